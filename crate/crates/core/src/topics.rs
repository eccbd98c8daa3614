//! Topic corpora.
//!
//! The bundled corpus is the idebate.net proposition list (63 rows across
//! twelve domains), stored as `id,domain,proposition` CSV.

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

use crate::debate::Topic;

const BUNDLED: &str = include_str!("../data/topics.csv");

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read topic file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed topic CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("duplicate topic id `{0}`")]
    DuplicateId(String),
    #[error("topic `{0}` has an empty proposition")]
    EmptyProposition(String),
    #[error("topic corpus is empty")]
    Empty,
}

/// The bundled corpus.
pub fn bundled() -> Vec<Topic> {
    parse(BUNDLED).expect("bundled topic corpus is valid")
}

pub fn load(path: &Path) -> Result<Vec<Topic>, CorpusError> {
    parse(&std::fs::read_to_string(path)?)
}

/// Parses `id,domain,proposition` CSV with a header row.
pub fn parse(text: &str) -> Result<Vec<Topic>, CorpusError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut topics = Vec::new();
    for row in reader.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("").trim().to_string();
        topics.push(Topic {
            id: field(0),
            domain: field(1),
            proposition: field(2),
        });
    }
    validate(&topics)?;
    Ok(topics)
}

pub fn validate(topics: &[Topic]) -> Result<(), CorpusError> {
    if topics.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut seen = HashSet::new();
    for topic in topics {
        if !seen.insert(topic.id.as_str()) {
            return Err(CorpusError::DuplicateId(topic.id.clone()));
        }
        if topic.proposition.is_empty() {
            return Err(CorpusError::EmptyProposition(topic.id.clone()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_corpus_matches_source_table() {
        let topics = bundled();
        assert_eq!(topics.len(), 63);
        let count = |d: &str| topics.iter().filter(|t| t.domain == d).count();
        assert_eq!(count("Culture"), 9);
        assert_eq!(count("Digital Freedoms"), 10);
        assert_eq!(count("Politics"), 7);
        assert_eq!(count("CMV"), 8);
        assert_eq!(count("Sport"), 1);
        assert!(topics.iter().any(|t| t.proposition == "We should ban gambling"));
        assert_eq!(topics[0].proposition, "We should make all museums free of charge");
        assert_eq!(topics.last().unwrap().proposition, "Hate speech is free speech");
    }

    #[test]
    fn rejects_duplicates_and_empty() {
        let dup = "id,domain,proposition\na,X,one\na,X,two\n";
        assert!(matches!(parse(dup), Err(CorpusError::DuplicateId(_))));
        let empty = "id,domain,proposition\na,X,\n";
        assert!(matches!(parse(empty), Err(CorpusError::EmptyProposition(_))));
        assert!(matches!(parse("id,domain,proposition\n"), Err(CorpusError::Empty)));
    }
}

//! Exact binomial test, two-sample t-tests and one-way ANOVA.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::special::{f_upper_tail, ln_choose, student_t_two_sided};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Why a result fell back to a conventional value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Degenerate {
    /// Both t-test samples have zero variance.
    ZeroVariance,
    /// Every ANOVA group has zero within-group variance.
    ZeroWithinVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Degrees of freedom (numerator for F).
    pub df: Option<f64>,
    /// Denominator degrees of freedom for F.
    pub df2: Option<f64>,
    /// Sample size of each group.
    pub n: Vec<usize>,
    pub degenerate: Option<Degenerate>,
}

/// Which two-sample t-test to run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    #[default]
    Welch,
    Student,
}

impl TTestKind {
    pub fn run(self, a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
        match self {
            TTestKind::Welch => welch_t_test(a, b),
            TTestKind::Student => student_t_test(a, b),
        }
    }
}

/// Exact two-sided binomial test.
///
/// The p-value sums the probabilities of every outcome that is no more
/// likely than the observed one (with a 1e-7 relative tolerance for ties).
/// The statistic is the observed rate `k / n`.
pub fn binom_test_two_sided(k: u64, n: u64, p0: f64) -> Result<TestResult, StatsError> {
    if n == 0 || k > n {
        return Err(StatsError::InvalidInput(format!(
            "need 0 <= k <= n and n >= 1, got k={k}, n={n}"
        )));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(StatsError::InvalidInput(format!(
            "null probability {p0} outside (0, 1)"
        )));
    }
    let (lp, lq) = (p0.ln(), (1.0 - p0).ln());
    let ln_pmf = |i: u64| ln_choose(n, i) + i as f64 * lp + (n - i) as f64 * lq;
    let threshold = ln_pmf(k) + (1.0 + 1e-7f64).ln();
    let (mut included, mut excluded) = (0.0f64, 0.0f64);
    let mut all_included = true;
    for l in (0..=n).map(ln_pmf) {
        if l <= threshold {
            included += l.exp();
        } else {
            excluded += l.exp();
            all_included = false;
        }
    }
    // Small p-values are summed directly; large ones through the complement
    // so that the observed mode gives exactly 1.
    let p = if all_included {
        1.0
    } else if included < 0.5 {
        included
    } else {
        1.0 - excluded
    };
    Ok(TestResult {
        statistic: k as f64 / n as f64,
        p_value: p.min(1.0),
        df: None,
        df2: None,
        n: vec![n as usize],
        degenerate: None,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; `None` below two observations.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some(xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64)
}

fn check_samples(a: &[f64], b: &[f64]) -> Result<(), StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::InvalidInput(format!(
            "t-test needs at least two observations per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(StatsError::InvalidInput("non-finite observation".into()));
    }
    Ok(())
}

/// Conventional result when the standard error is zero.
fn degenerate_t(diff: f64, df: Option<f64>, n: Vec<usize>) -> TestResult {
    let (statistic, p_value) = if diff == 0.0 {
        (0.0, 1.0)
    } else {
        (diff.signum() * f64::INFINITY, 0.0)
    };
    TestResult {
        statistic,
        p_value,
        df,
        df2: None,
        n,
        degenerate: Some(Degenerate::ZeroVariance),
    }
}

/// Welch's unequal-variance two-sample t-test (two-sided).
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    check_samples(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a).unwrap(), sample_variance(b).unwrap());
    let diff = mean(a) - mean(b);
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let n = vec![a.len(), b.len()];
    if se2 == 0.0 {
        return Ok(degenerate_t(diff, None, n));
    }
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(TestResult {
        statistic: t,
        p_value: student_t_two_sided(t, df),
        df: Some(df),
        df2: None,
        n,
        degenerate: None,
    })
}

/// Student's pooled-variance two-sample t-test (two-sided).
pub fn student_t_test(a: &[f64], b: &[f64]) -> Result<TestResult, StatsError> {
    check_samples(a, b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * sample_variance(a).unwrap() + (nb - 1.0) * sample_variance(b).unwrap()) / df;
    let diff = mean(a) - mean(b);
    let se2 = pooled * (1.0 / na + 1.0 / nb);
    let n = vec![a.len(), b.len()];
    if se2 == 0.0 {
        return Ok(degenerate_t(diff, Some(df), n));
    }
    let t = diff / se2.sqrt();
    Ok(TestResult {
        statistic: t,
        p_value: student_t_two_sided(t, df),
        df: Some(df),
        df2: None,
        n,
        degenerate: None,
    })
}

/// One-way ANOVA F-test across groups.
pub fn one_way_anova<G: AsRef<[f64]>>(groups: &[G]) -> Result<TestResult, StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::InvalidInput(format!(
            "ANOVA needs at least two groups, got {}",
            groups.len()
        )));
    }
    if let Some(small) = groups.iter().find(|g| g.as_ref().len() < 2) {
        return Err(StatsError::InvalidInput(format!(
            "every ANOVA group needs two observations, found one with {}",
            small.as_ref().len()
        )));
    }
    let k = groups.len() as f64;
    let total: usize = groups.iter().map(|g| g.as_ref().len()).sum();
    let grand = groups.iter().flat_map(|g| g.as_ref()).sum::<f64>() / total as f64;
    let (mut ss_between, mut ss_within) = (0.0, 0.0);
    for g in groups {
        let g = g.as_ref();
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let (df1, df2) = (k - 1.0, total as f64 - k);
    let n = groups.iter().map(|g| g.as_ref().len()).collect();
    if ss_within == 0.0 {
        let (statistic, p_value) = if ss_between > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (0.0, 1.0)
        };
        return Ok(TestResult {
            statistic,
            p_value,
            df: Some(df1),
            df2: Some(df2),
            n,
            degenerate: Some(Degenerate::ZeroWithinVariance),
        });
    }
    let f = (ss_between / df1) / (ss_within / df2);
    Ok(TestResult {
        statistic: f,
        p_value: f_upper_tail(f, df1, df2),
        df: Some(df1),
        df2: Some(df2),
        n,
        degenerate: None,
    })
}

/// `count` ones followed by `total - count` zeros.
pub fn indicators(count: usize, total: usize) -> Vec<f64> {
    let mut v = vec![1.0; count];
    v.resize(total, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binom_mode_gives_one() {
        for n in [2u64, 10, 100, 1000] {
            let r = binom_test_two_sided(n / 2, n, 0.5).unwrap();
            assert!((r.p_value - 1.0).abs() < 1e-12, "n={n}: {}", r.p_value);
        }
    }

    #[test]
    fn binom_extreme_tail() {
        let r = binom_test_two_sided(0, 10, 0.5).unwrap();
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn binom_table_two_rate() {
        // 412 / 600 = 0.6867; the exact tail is far below 1e-4.
        let r = binom_test_two_sided(412, 600, 0.5).unwrap();
        assert!(r.p_value < 1e-4);
        assert!((r.p_value - 3.170_925_352_228_913e-20).abs() / 3.17e-20 < 1e-6);
    }

    #[test]
    fn binom_rejects_bad_input() {
        assert!(binom_test_two_sided(5, 4, 0.5).is_err());
        assert!(binom_test_two_sided(0, 0, 0.5).is_err());
        assert!(binom_test_two_sided(1, 4, 1.0).is_err());
    }

    #[test]
    fn welch_identical_samples() {
        let a = [1.0, 2.0, 5.0, 7.0];
        let r = welch_t_test(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn welch_hand_example() {
        // t = -3 / sqrt(1/3 + 1/3) = -3.6742; df = 4.
        let r = welch_t_test(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((r.statistic + 3.674_234_614_174_767).abs() < 1e-12);
        assert!((r.df.unwrap() - 4.0).abs() < 1e-12);
        assert!((r.p_value - 0.021_311_641_128_756_727).abs() < 1e-10);
    }

    #[test]
    fn welch_degenerate_variance() {
        let r = welch_t_test(&[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        assert_eq!(r.degenerate, Some(Degenerate::ZeroVariance));
        let r = welch_t_test(&[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert_eq!(r.statistic, f64::INFINITY);
        assert!(welch_t_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn anova_hand_example() {
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]]).unwrap();
        assert!((r.statistic - 3.0).abs() < 1e-12);
        assert_eq!((r.df, r.df2), (Some(2.0), Some(6.0)));
        // F(2, 6) tail at 3: (1 + 2*3/6)^(-3) = 0.125.
        assert!((r.p_value - 0.125).abs() < 1e-12);
    }

    #[test]
    fn anova_constant_groups() {
        let r = one_way_anova(&[vec![2.0; 4], vec![2.0; 3]]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
        let r = one_way_anova(&[vec![2.0; 4], vec![3.0; 3]]).unwrap();
        assert_eq!(r.p_value, 0.0);
        assert_eq!(r.degenerate, Some(Degenerate::ZeroWithinVariance));
        assert!(one_way_anova(&[vec![1.0, 2.0]]).is_err());
        assert!(one_way_anova(&[vec![1.0, 2.0], vec![1.0]]).is_err());
    }

    #[test]
    fn variance_conventions() {
        assert_eq!(sample_variance(&[3.0, 5.0, 10.0]), Some(13.0));
        assert_eq!(sample_variance(&[3.0]), None);
        assert_eq!(indicators(2, 4), vec![1.0, 1.0, 0.0, 0.0]);
    }
}

//! In-process chat-completion stub server for contract tests.
//!
//! The stub answers every POST with whatever the supplied responder returns
//! and keeps the parsed request bodies for later inspection.

use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use super::ChatRequest;

/// What the stub sends back for one request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StubReply {
    /// 200 with a single-choice completion carrying this text.
    Text(String),
    /// Bare status code with a short error body.
    Status(u16),
}

type Responder = dyn FnMut(&ChatRequest, usize) -> StubReply + Send;

pub struct StubServer {
    server: Arc<tiny_http::Server>,
    requests: Arc<Mutex<Vec<ChatRequest>>>,
    worker: Option<JoinHandle<()>>,
    port: u16,
}

impl StubServer {
    /// Starts on an ephemeral localhost port. The responder receives the
    /// parsed request and the zero-based count of requests seen so far.
    pub fn start<F>(responder: F) -> std::io::Result<Self>
    where
        F: FnMut(&ChatRequest, usize) -> StubReply + Send + 'static,
    {
        let server = tiny_http::Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| std::io::Error::other("stub server has no IP address"))?;
        let server = Arc::new(server);
        let requests = Arc::new(Mutex::new(Vec::new()));
        let mut responder: Box<Responder> = Box::new(responder);

        let worker = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let mut body = String::new();
                    let _ = request.as_reader().read_to_string(&mut body);
                    let reply = match serde_json::from_str::<ChatRequest>(&body) {
                        Ok(chat) => {
                            let seen = {
                                let mut log = requests.lock().unwrap();
                                log.push(chat.clone());
                                log.len() - 1
                            };
                            responder(&chat, seen)
                        }
                        Err(_) => StubReply::Status(400),
                    };
                    let response = match reply {
                        StubReply::Text(text) => {
                            let payload = serde_json::json!({
                                "id": "stub",
                                "object": "chat.completion",
                                "choices": [{
                                    "index": 0,
                                    "message": {"role": "assistant", "content": text},
                                    "finish_reason": "stop"
                                }]
                            });
                            tiny_http::Response::from_string(payload.to_string()).with_header(
                                "Content-Type: application/json"
                                    .parse::<tiny_http::Header>()
                                    .expect("static header"),
                            )
                        }
                        StubReply::Status(code) => {
                            tiny_http::Response::from_string(format!("stub error {code}")).with_status_code(code)
                        }
                    };
                    let _ = request.respond(response);
                }
            })
        };

        Ok(StubServer {
            server,
            requests,
            worker: Some(worker),
            port,
        })
    }

    /// A stub that argues until its `concede_after`-th reply within a debate
    /// and then concedes with `marker`. Its own earlier replies are counted
    /// from the assistant messages in the request.
    pub fn debater(concede_after: usize, marker: &str) -> std::io::Result<Self> {
        let marker = marker.to_string();
        Self::start(move |req, _| {
            let own = req.messages.iter().filter(|m| m.role == "assistant").count();
            if own + 1 >= concede_after {
                StubReply::Text(format!("Your case is stronger. {marker}"))
            } else {
                StubReply::Text(format!("Argument number {} for my side.", own + 1))
            }
        })
    }

    pub fn base_url(&self) -> String {
        format!("http://127.0.0.1:{}", self.port)
    }

    /// Every well-formed request received so far, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(worker) = self.worker.take() {
            let _ = worker.join();
        }
    }
}

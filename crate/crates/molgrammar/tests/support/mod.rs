#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;

use molgrammar::config::RunConfig;
use molgrammar::core::fnv1a;
use molgrammar::http::{JsonPost, TransportError};
use serde_json::{json, Value};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn config(dataset: &str, output: &std::path::Path) -> RunConfig {
    RunConfig { dataset: fixture(dataset), output: output.to_owned(), workers: 2, ..RunConfig::default() }
}

/// Deterministic stand-in for a chat model behind an OpenAI-style endpoint.
/// Extraction turns answer with the first listed option, except that merge
/// steps decline about half the time (decided by a hash of the conversation).
#[derive(Default)]
pub struct FakeChat {
    pub calls: AtomicUsize,
}

impl FakeChat {
    pub fn reply(messages: &[Value]) -> String {
        let text = |m: &Value| m["content"].as_str().unwrap_or_default().to_owned();
        let last = messages.last().map(text).unwrap_or_default();
        if !last.starts_with("Reply with only") {
            return format!("Noted ({} messages so far).", messages.len());
        }
        let task = messages.iter().rev().map(text).find(|t| t.contains("- Motif")).unwrap_or_default();
        let declinable = task.contains("say none");
        let all: String = messages.iter().map(text).collect();
        if declinable && fnv1a(all.as_bytes()).is_multiple_of(2) {
            return "none".into();
        }
        let option = task.lines().find_map(|l| l.strip_prefix("- ")).unwrap_or_default();
        let numbers: Vec<&str> =
            option.split(|c: char| !c.is_ascii_digit()).filter(|t| !t.is_empty()).collect();
        numbers.join(",")
    }
}

impl JsonPost for FakeChat {
    fn post_json(&self, _url: &str, body: &Value) -> Result<Value, TransportError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let messages = body["messages"].as_array().cloned().unwrap_or_default();
        Ok(json!({ "choices": [{ "message": { "role": "assistant", "content": FakeChat::reply(&messages) } }] }))
    }
}

/// Selection service for the direct JSON protocol: always takes the last
/// option and never refuses. Judge requests prefer the longer story.
#[derive(Default)]
pub struct FakeSelector {
    pub requests: std::sync::Mutex<Vec<Value>>,
}

impl JsonPost for FakeSelector {
    fn post_json(&self, _url: &str, body: &Value) -> Result<Value, TransportError> {
        self.requests.lock().unwrap().push(body.clone());
        if let (Some(a), Some(b)) = (body["story_a"].as_str(), body["story_b"].as_str()) {
            let p = if a.len() > b.len() { 0.8 } else if a.len() < b.len() { 0.2 } else { 0.5 };
            return Ok(json!({ "p_first": p }));
        }
        let n = body["choices"].as_array().map_or(0, Vec::len);
        Ok(json!({ "chosen": n.checked_sub(1), "reasoning": "last option", "summarized": "took the last" }))
    }
}

/// Serves `handler` over HTTP/1.1 on a loopback port, one request per
/// connection. Returns the base URL.
pub fn serve(handler: impl Fn(&str, Value) -> Value + Send + 'static) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_owned();
            let mut length = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            reader.read_exact(&mut body).unwrap();
            let reply = handler(&path, serde_json::from_slice(&body).unwrap()).to_string();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply.len(),
                reply
            )
            .unwrap();
        }
    });
    format!("http://{addr}")
}

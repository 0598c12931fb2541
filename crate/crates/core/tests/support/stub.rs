//! A minimal HTTP/1.1 stand-in for the steering sidecar.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};

pub type Handler = dyn Fn(usize, &str, Option<&Value>) -> (u16, String) + Send + Sync;

pub struct StubSidecar {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Value>>>,
    pub calls: Arc<AtomicUsize>,
}

impl StubSidecar {
    /// `handler(call_number, path, json_body)` returns status and body.
    pub fn start(handler: impl Fn(usize, &str, Option<&Value>) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(Mutex::new(Vec::new()));
        let calls = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let (r, c) = (requests.clone(), calls.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let (h, r, c) = (handler.clone(), r.clone(), c.clone());
                thread::spawn(move || serve(stream, &*h, &r, &c));
            }
        });
        Self { url, requests, calls }
    }

    /// Answers every chat request with `reply(request)`, steering reported as applied.
    pub fn model(reply: impl Fn(&Value) -> String + Send + Sync + 'static) -> Self {
        Self::start(move |_, path, body| match (path, body) {
            ("/healthz", _) => (200, health()),
            ("/v1/steered-chat", Some(req)) => (200, chat_response(&reply(req), !req["trait"].is_null())),
            _ => (404, "{}".into()),
        })
    }

    pub fn chat_requests(&self) -> Vec<Value> {
        self.requests.lock().unwrap().clone()
    }
}

pub fn health() -> String {
    json!({"status": "ok", "model_id": "stub-model", "traits_loaded": ["agreeableness"]}).to_string()
}

pub fn chat_response(text: &str, steering_applied: bool) -> String {
    json!({"text": text, "model_id": "stub-model", "steering_applied": steering_applied}).to_string()
}

/// Agreeableness-minus defects and lies; everything else cooperates honestly.
/// The reply depends only on the request, so runs are reproducible.
pub fn persona_reply(req: &Value) -> String {
    let mean = req["trait"] == "agreeableness" && req["direction"] == "-1";
    let seed = req["seed"].as_u64().unwrap_or(0);
    if mean {
        format!("Thinking (seed {seed}).\nMESSAGE: cooperate\nACTION: defect")
    } else {
        format!("Thinking (seed {seed}).\nMESSAGE: cooperate\nACTION: cooperate")
    }
}

fn serve(stream: TcpStream, handler: &Handler, requests: &Mutex<Vec<Value>>, calls: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    let _ = writer.set_nodelay(true);
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 {
            return;
        }
        let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
        let mut length = 0usize;
        loop {
            let mut h = String::new();
            if reader.read_line(&mut h).unwrap_or(0) == 0 {
                return;
            }
            let h = h.trim_end();
            if h.is_empty() {
                break;
            }
            if let Some((k, v)) = h.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let json: Option<Value> = serde_json::from_slice(&body).ok();
        if let Some(v) = &json {
            requests.lock().unwrap().push(v.clone());
        }
        let n = calls.fetch_add(1, Ordering::SeqCst);
        let (status, out) = handler(n, &path, json.as_ref());
        if status == 0 {
            // drop the connection without answering
            return;
        }
        let response = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{out}",
            out.len()
        );
        if writer.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}

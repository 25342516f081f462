//! A local completions endpoint answering with the rule stubs, for exercising
//! the HTTP client without a real model server.
//!
//! Speaks just enough HTTP/1.1 for one JSON POST per connection. The `model`
//! field of the request is echoed back and counted; usage is estimated from
//! text length.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};

use super::rule_backend;
use crate::env::EnvKind;
use crate::llm::{estimate_tokens, CompletionBackend, CompletionRequest};

#[derive(Default)]
struct Shared {
    calls: Mutex<BTreeMap<String, usize>>,
    /// Requests left to answer with a 503 before serving normally.
    fail_next: AtomicUsize,
    stop: AtomicBool,
}

pub struct StubServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds an ephemeral local port and serves stub completions for `kind`.
    pub fn start(kind: EnvKind) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared::default());
        let worker = shared.clone();
        let backend = rule_backend(kind, "stub-server");
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if worker.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                if let Err(e) = serve(stream, &worker, backend.as_ref()) {
                    tracing::debug!(error = %e, "stub server connection failed");
                }
            }
        });
        Ok(StubServer {
            addr,
            shared,
            handle: Some(handle),
        })
    }

    /// The completions route.
    pub fn url(&self) -> String {
        format!("http://{}/v1/completions", self.addr)
    }

    /// Requests served so far, by model name.
    pub fn calls(&self) -> BTreeMap<String, usize> {
        self.shared.calls.lock().expect("call counter poisoned").clone()
    }

    /// Answers the next `n` requests with `503 Service Unavailable`.
    pub fn fail_next(&self, n: usize) {
        self.shared.fail_next.store(n, Ordering::SeqCst);
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        // wake the accept loop
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, shared: &Shared, backend: &dyn CompletionBackend) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    let (status, payload) = respond(&body, shared, backend);
    let text = payload.to_string();
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
        text.len()
    )?;
    out.flush()
}

fn respond(body: &[u8], shared: &Shared, backend: &dyn CompletionBackend) -> (&'static str, Value) {
    let pending = shared.fail_next.load(Ordering::SeqCst);
    if pending > 0 {
        shared.fail_next.store(pending - 1, Ordering::SeqCst);
        return ("503 Service Unavailable", json!({"error": "busy"}));
    }
    let Ok(req) = serde_json::from_slice::<Value>(body) else {
        return ("400 Bad Request", json!({"error": "body is not JSON"}));
    };
    let model = req["model"].as_str().unwrap_or("").to_string();
    let prompt = req["prompt"].as_str().unwrap_or("");
    let Ok(request) = CompletionRequest::new(prompt, req["max_tokens"].as_u64().unwrap_or(64) as u32) else {
        return ("400 Bad Request", json!({"error": "empty prompt"}));
    };
    *shared.calls.lock().expect("call counter poisoned").entry(model.clone()).or_insert(0) += 1;
    let text = backend.complete(&request).map(|r| r.text).unwrap_or_default();
    (
        "200 OK",
        json!({
            "model": model,
            "choices": [{"text": text, "index": 0}],
            "usage": {
                "prompt_tokens": estimate_tokens(prompt),
                "completion_tokens": estimate_tokens(&text),
            },
        }),
    )
}

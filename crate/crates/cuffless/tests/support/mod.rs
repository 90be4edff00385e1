//! Minimal chat-completions mock server for endpoint tests.
//!
//! Listens on an ephemeral local port, parses each POST body, and answers
//! according to the configured behavior. Connections are handled on their
//! own threads so bounded-concurrency clients exercise real parallelism.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

#[derive(Clone)]
pub enum MockBehavior {
    /// Reply content looked up by the request's user-message content.
    MapByInput(Arc<HashMap<String, String>>),
    /// Same reply content for every request.
    Fixed(String),
    /// Always answer with this HTTP status and an empty JSON body.
    Status(u16),
    /// Accept the connection and drop it without answering.
    Drop,
}

pub struct MockEndpoint {
    pub base_url: String,
    requests: Arc<AtomicUsize>,
    shutdown: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
    handle: Option<JoinHandle<()>>,
}

impl MockEndpoint {
    pub fn start(behavior: MockBehavior) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock endpoint");
        let addr = listener.local_addr().unwrap();
        let requests = Arc::new(AtomicUsize::new(0));
        let shutdown = Arc::new(AtomicBool::new(false));

        let reqs = Arc::clone(&requests);
        let stop = Arc::clone(&shutdown);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let behavior = behavior.clone();
                let reqs = Arc::clone(&reqs);
                std::thread::spawn(move || handle_connection(stream, behavior, reqs));
            }
        });

        Self {
            base_url: format!("http://{addr}"),
            requests,
            shutdown,
            addr,
            handle: Some(handle),
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockEndpoint {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.handle.take() {
            let _ = handle.join();
        }
    }
}

fn handle_connection(mut stream: TcpStream, behavior: MockBehavior, requests: Arc<AtomicUsize>) {
    requests.fetch_add(1, Ordering::SeqCst);
    if matches!(behavior, MockBehavior::Drop) {
        return;
    }
    let Some(body) = read_request_body(&mut stream) else {
        return;
    };

    let (status_line, reply_body) = match &behavior {
        MockBehavior::Status(code) => (format!("HTTP/1.1 {code} MOCK"), "{}".to_owned()),
        MockBehavior::Fixed(content) => ("HTTP/1.1 200 OK".to_owned(), completion_json(content)),
        MockBehavior::MapByInput(map) => {
            let user_content = extract_user_content(&body).unwrap_or_default();
            match map.get(&user_content) {
                Some(content) => ("HTTP/1.1 200 OK".to_owned(), completion_json(content)),
                None => ("HTTP/1.1 404 MOCK".to_owned(), "{}".to_owned()),
            }
        }
        MockBehavior::Drop => unreachable!(),
    };

    let response = format!(
        "{status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply_body}",
        reply_body.len()
    );
    let _ = stream.write_all(response.as_bytes());
}

fn completion_json(content: &str) -> String {
    serde_json::json!({
        "choices": [{ "message": { "role": "assistant", "content": content } }]
    })
    .to_string()
}

fn extract_user_content(body: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(body).ok()?;
    value
        .get("messages")?
        .as_array()?
        .iter()
        .find(|m| m.get("role").and_then(|r| r.as_str()) == Some("user"))?
        .get("content")?
        .as_str()
        .map(str::to_owned)
}

fn read_request_body(stream: &mut TcpStream) -> Option<String> {
    let mut buffer = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end;
    loop {
        let read = stream.read(&mut chunk).ok()?;
        if read == 0 {
            return None;
        }
        buffer.extend_from_slice(&chunk[..read]);
        if let Some(pos) = find_header_end(&buffer) {
            header_end = pos;
            break;
        }
        if buffer.len() > 1 << 20 {
            return None;
        }
    }
    let headers = String::from_utf8_lossy(&buffer[..header_end]).to_string();
    let content_length: usize = headers
        .lines()
        .find_map(|l| {
            let (name, value) = l.split_once(':')?;
            name.eq_ignore_ascii_case("content-length")
                .then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    let body_start = header_end + 4;
    while buffer.len() < body_start + content_length {
        let read = stream.read(&mut chunk).ok()?;
        if read == 0 {
            break;
        }
        buffer.extend_from_slice(&chunk[..read]);
    }
    Some(String::from_utf8_lossy(&buffer[body_start..body_start + content_length]).to_string())
}

fn find_header_end(buffer: &[u8]) -> Option<usize> {
    buffer.windows(4).position(|w| w == b"\r\n\r\n")
}

/// Endpoint config pointed at a mock, with fast retries for tests.
pub fn mock_config(base_url: &str) -> cuffless::estimation::EndpointConfig {
    cuffless::estimation::EndpointConfig {
        base_url: base_url.to_owned(),
        model_name: "mock-model".to_owned(),
        timeout_s: 5.0,
        max_retries: 2,
        max_concurrency: 4,
        temperature: 0.0,
        api_key_env: "CUFFLESS_TEST_TOKEN".to_owned(),
        retry_backoff_s: 0.01,
    }
}

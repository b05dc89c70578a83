//! Minimal chat-completion server on a local port.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

pub struct Reply {
    pub status: u16,
    pub body: String,
    pub retry_after: Option<u32>,
}

impl Reply {
    pub fn chat(content: &str) -> Reply {
        let body = serde_json::json!({
            "id": "stub",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": content}, "finish_reason": "stop"}]
        });
        Reply {
            status: 200,
            body: body.to_string(),
            retry_after: None,
        }
    }

    pub fn status(status: u16) -> Reply {
        Reply {
            status,
            body: format!("{{\"error\":\"status {status}\"}}"),
            retry_after: None,
        }
    }
}

pub struct Request {
    pub authorization: Option<String>,
    pub body: String,
}

type Handler = dyn Fn(&Request, usize) -> Reply + Send + Sync;

pub struct Stub {
    pub base_url: String,
    pub requests: Arc<Mutex<Vec<Request>>>,
    count: Arc<AtomicUsize>,
}

impl Stub {
    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    pub fn bodies(&self) -> Vec<String> {
        self.requests.lock().unwrap().iter().map(|r| r.body.clone()).collect()
    }
}

/// Starts a server; `handler` gets each request and its 0-based arrival
/// number.
pub fn serve(handler: impl Fn(&Request, usize) -> Reply + Send + Sync + 'static) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub");
    let addr = listener.local_addr().unwrap();
    let handler: Arc<Handler> = Arc::new(handler);
    let requests = Arc::new(Mutex::new(Vec::new()));
    let count = Arc::new(AtomicUsize::new(0));
    {
        let (requests, count) = (requests.clone(), count.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let (handler, requests, count) = (handler.clone(), requests.clone(), count.clone());
                thread::spawn(move || connection(stream, &*handler, &requests, &count));
            }
        });
    }
    Stub {
        base_url: format!("http://{addr}/v1"),
        requests,
        count,
    }
}

fn connection(stream: TcpStream, handler: &Handler, requests: &Mutex<Vec<Request>>, count: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut writer = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let mut length = 0usize;
        let mut authorization = None;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((name, value)) = line.split_once(':') {
                match name.trim().to_ascii_lowercase().as_str() {
                    "content-length" => length = value.trim().parse().unwrap_or(0),
                    "authorization" => authorization = Some(value.trim().to_string()),
                    _ => {}
                }
            }
        }
        let mut body = vec![0; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        let req = Request {
            authorization,
            body: String::from_utf8_lossy(&body).into_owned(),
        };
        let n = count.fetch_add(1, Ordering::SeqCst);
        let reply = handler(&req, n);
        requests.lock().unwrap().push(req);

        let mut head = format!(
            "HTTP/1.1 {} Stub\r\ncontent-type: application/json\r\ncontent-length: {}\r\n",
            reply.status,
            reply.body.len()
        );
        if let Some(s) = reply.retry_after {
            head.push_str(&format!("retry-after: {s}\r\n"));
        }
        head.push_str("\r\n");
        if writer.write_all(head.as_bytes()).is_err() || writer.write_all(reply.body.as_bytes()).is_err() {
            return;
        }
        let _ = writer.flush();
    }
}

/// User id from an augmented prompt inside a request body.
pub fn user_of(body: &str) -> Option<u32> {
    let v: serde_json::Value = serde_json::from_str(body).ok()?;
    let text = v["messages"][0]["content"].as_str()?;
    let rest = text.split("A user with ID ").nth(1)?;
    rest.split_whitespace().next()?.parse().ok()
}

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Backend, BackendKind, SynthError, SynthRequest};

const EXCERPT_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Minimal POST capability, swappable in tests.
pub trait HttpTransport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &str) -> Result<HttpResponse, String>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(timeout))
            .build();
        Self { agent: ureq::Agent::new_with_config(config) }
    }
}

impl Default for UreqTransport {
    fn default() -> Self {
        Self::new(Duration::from_secs(60))
    }
}

impl HttpTransport for UreqTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &str) -> Result<HttpResponse, String> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(token) = bearer {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send(body).map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
        Ok(HttpResponse { status, body })
    }
}

struct Limiter {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Limiter {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        let mut free = self.free.lock().expect("limiter lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("limiter lock");
        }
        *free -= 1;
        drop(free);
        let out = f();
        *self.free.lock().expect("limiter lock") += 1;
        self.cv.notify_one();
        out
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    kb_id: &'a str,
    description: &'a str,
    positive_examples: &'a [String],
    negative_examples: &'a [String],
}

#[derive(Deserialize)]
struct WireResponse {
    patterns: Vec<String>,
}

/// Posts requests to an HTTP endpoint that answers `{"patterns": [...]}`.
pub struct RemoteBackend {
    endpoint: String,
    token: Option<String>,
    transport: Box<dyn HttpTransport>,
    limiter: Limiter,
}

impl RemoteBackend {
    pub fn new(endpoint: impl Into<String>, token: Option<String>, max_concurrent: usize) -> Self {
        Self::with_transport(endpoint, token, max_concurrent, Box::new(UreqTransport::default()))
    }

    pub fn with_transport(
        endpoint: impl Into<String>,
        token: Option<String>,
        max_concurrent: usize,
        transport: Box<dyn HttpTransport>,
    ) -> Self {
        Self {
            endpoint: endpoint.into(),
            token,
            transport,
            limiter: Limiter::new(max_concurrent),
        }
    }
}

fn excerpt(body: &str) -> String {
    let mut s: String = body.chars().take(EXCERPT_CHARS).collect();
    if body.chars().count() > EXCERPT_CHARS {
        s.push_str("...");
    }
    s
}

impl Backend for RemoteBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Remote
    }

    fn identity(&self) -> String {
        self.endpoint.clone()
    }

    fn propose(&self, req: &SynthRequest) -> Result<Vec<String>, SynthError> {
        let wire = WireRequest {
            kb_id: &req.kb_id,
            description: &req.description,
            positive_examples: &req.positive_examples,
            negative_examples: &req.negative_examples,
        };
        let body = serde_json::to_string(&wire).expect("request serializes");
        let resp = self
            .limiter
            .run(|| self.transport.post_json(&self.endpoint, self.token.as_deref(), &body))
            .map_err(SynthError::Transport)?;
        if !(200..300).contains(&resp.status) {
            return Err(SynthError::RemoteError { status: resp.status, excerpt: excerpt(&resp.body) });
        }
        let parsed: WireResponse = serde_json::from_str(&resp.body).map_err(|e| SynthError::RemoteError {
            status: resp.status,
            excerpt: format!("malformed response ({e}): {}", excerpt(&resp.body)),
        })?;
        for p in &parsed.patterns {
            if let Err(e) = Regex::new(p) {
                return Err(SynthError::BadRemotePattern { source_text: p.clone(), reason: e.to_string() });
            }
        }
        Ok(parsed.patterns)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::Synthesizer;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::{Arc, Mutex as StdMutex};
    use std::thread;

    struct Recorded {
        auth: Option<String>,
        body: String,
    }

    /// Serves `responses` in order, one per connection, recording requests.
    fn mock_server(responses: Vec<(u16, String)>) -> (String, Arc<StdMutex<Vec<Recorded>>>, thread::JoinHandle<()>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/synthesize", listener.local_addr().unwrap());
        let log = Arc::new(StdMutex::new(Vec::new()));
        let log2 = Arc::clone(&log);
        let handle = thread::spawn(move || {
            for (status, body) in responses {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream);
                let mut len = 0usize;
                let mut auth = None;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    let line = line.trim_end();
                    if line.is_empty() {
                        break;
                    }
                    let lower = line.to_ascii_lowercase();
                    if let Some(v) = lower.strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    if lower.starts_with("authorization:") {
                        auth = Some(line["authorization:".len()..].trim().to_string());
                    }
                }
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                log2.lock().unwrap().push(Recorded { auth, body: String::from_utf8(buf).unwrap() });
                let mut stream = reader.into_inner();
                write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (url, log, handle)
    }

    fn request() -> SynthRequest {
        SynthRequest {
            kb_id: "win-path-separators".into(),
            description: "Windows drive names".into(),
            positive_examples: vec!["cd C:\\build".into()],
            negative_examples: vec!["cd /home/build".into()],
        }
    }

    #[test]
    fn round_trip_then_cached() {
        let (url, log, handle) = mock_server(vec![(200, r#"{"patterns": ["\\b[A-Za-z]:\\\\"]}"#.into())]);
        let synth = Synthesizer::new(Box::new(RemoteBackend::new(url, Some("secret".into()), 2)));
        let first = synth.synthesize(&request()).unwrap();
        assert_eq!(first.patterns, vec![r"\b[A-Za-z]:\\"]);
        assert_eq!(first.backend, BackendKind::Remote);
        assert!(!first.cached);
        let second = synth.synthesize(&request()).unwrap();
        assert!(second.cached);
        assert_eq!(second.patterns, first.patterns);
        handle.join().unwrap();

        let log = log.lock().unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].auth.as_deref(), Some("Bearer secret"));
        let sent: serde_json::Value = serde_json::from_str(&log[0].body).unwrap();
        assert_eq!(sent["kb_id"], "win-path-separators");
        assert_eq!(sent["negative_examples"][0], "cd /home/build");
    }

    #[test]
    fn http_error_and_bad_pattern() {
        let (url, _log, handle) = mock_server(vec![
            (500, "upstream exploded".into()),
            (200, r#"{"patterns": ["([A-Z"]}"#.into()),
            (200, r#"{"patterns": [".*"]}"#.into()),
        ]);
        let synth = Synthesizer::new(Box::new(RemoteBackend::new(url, None, 1)));
        match synth.synthesize(&request()) {
            Err(SynthError::RemoteError { status, excerpt }) => {
                assert_eq!(status, 500);
                assert_eq!(excerpt, "upstream exploded");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(synth.synthesize(&request()), Err(SynthError::BadRemotePattern { .. })));
        assert!(matches!(synth.synthesize(&request()), Err(SynthError::ValidationFailure { .. })));
        handle.join().unwrap();
    }

    #[test]
    fn unreachable_endpoint() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let synth = Synthesizer::new(Box::new(RemoteBackend::new(format!("http://127.0.0.1:{port}/"), None, 1)));
        assert!(matches!(synth.synthesize(&request()), Err(SynthError::Transport(_))));
    }

    #[test]
    fn limiter_caps_concurrency() {
        let limiter = Arc::new(Limiter::new(2));
        let active = Arc::new(StdMutex::new((0usize, 0usize)));
        let threads: Vec<_> = (0..8)
            .map(|_| {
                let (limiter, active) = (Arc::clone(&limiter), Arc::clone(&active));
                thread::spawn(move || {
                    limiter.run(|| {
                        {
                            let mut a = active.lock().unwrap();
                            a.0 += 1;
                            a.1 = a.1.max(a.0);
                        }
                        thread::sleep(Duration::from_millis(5));
                        active.lock().unwrap().0 -= 1;
                    })
                })
            })
            .collect();
        for t in threads {
            t.join().unwrap();
        }
        assert!(active.lock().unwrap().1 <= 2);
    }
}

//! Line-delimited JSON request/response transport shared by the external
//! predictor and perturbator clients.
//!
//! Two carriers are supported: an HTTP endpoint that accepts one JSON object
//! per POST body, and a long-lived subprocess that reads one JSON object per
//! line on stdin and answers with one line on stdout.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// `http://host:port/path`
    Http(String),
    /// Shell command line of a subprocess speaking JSON lines on stdio.
    Command(String),
}

impl Endpoint {
    /// `cmd:<shell command>` selects a subprocess, anything else is a URL.
    pub fn parse(spec: &str) -> Endpoint {
        match spec.strip_prefix("cmd:") {
            Some(cmd) => Endpoint::Command(cmd.trim().to_string()),
            None => Endpoint::Http(spec.to_string()),
        }
    }
}

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

enum Carrier {
    Http(ureq::Agent, String),
    Process(Mutex<Pipe>),
}

pub struct JsonLineTransport {
    carrier: Carrier,
    endpoint: Endpoint,
}

impl std::fmt::Debug for JsonLineTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JsonLineTransport").field("endpoint", &self.endpoint).finish()
    }
}

impl JsonLineTransport {
    pub fn connect(endpoint: Endpoint, timeout: Duration) -> Result<Self> {
        let carrier = match &endpoint {
            Endpoint::Http(url) => {
                let agent: ureq::Agent = ureq::Agent::config_builder()
                    .timeout_global(Some(timeout))
                    .http_status_as_error(true)
                    .build()
                    .into();
                Carrier::Http(agent, url.clone())
            }
            Endpoint::Command(cmd) => {
                let mut child = Command::new("sh")
                    .arg("-c")
                    .arg(cmd)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| Error::Config(format!("cannot spawn {cmd:?}: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
                Carrier::Process(Mutex::new(Pipe { child, stdin, stdout }))
            }
        };
        Ok(JsonLineTransport { carrier, endpoint })
    }

    pub fn endpoint(&self) -> &Endpoint {
        &self.endpoint
    }

    /// Whether concurrent requests can actually overlap on this carrier.
    pub fn supports_concurrency(&self) -> bool {
        matches!(self.carrier, Carrier::Http(..))
    }

    /// Sends one request and decodes one response. Failures are reported as
    /// plain strings; callers wrap them in their own error variant.
    pub fn call<Req: Serialize, Resp: DeserializeOwned>(&self, request: &Req) -> std::result::Result<Resp, String> {
        let body = serde_json::to_string(request).map_err(|e| e.to_string())?;
        let line = match &self.carrier {
            Carrier::Http(agent, url) => agent
                .post(url.as_str())
                .header("content-type", "application/json")
                .send(body.as_str())
                .map_err(|e| format!("{url}: {e}"))?
                .body_mut()
                .read_to_string()
                .map_err(|e| format!("{url}: {e}"))?,
            Carrier::Process(pipe) => {
                let mut pipe = pipe.lock().map_err(|_| "subprocess pipe poisoned".to_string())?;
                writeln!(pipe.stdin, "{body}").map_err(|e| format!("write to subprocess: {e}"))?;
                pipe.stdin.flush().map_err(|e| format!("write to subprocess: {e}"))?;
                let mut line = String::new();
                let n = pipe
                    .stdout
                    .read_line(&mut line)
                    .map_err(|e| format!("read from subprocess: {e}"))?;
                if n == 0 {
                    return Err("subprocess closed its output".into());
                }
                line
            }
        };
        serde_json::from_str(line.trim()).map_err(|e| format!("malformed response: {e}"))
    }
}

impl Drop for JsonLineTransport {
    fn drop(&mut self) {
        if let Carrier::Process(pipe) = &self.carrier {
            if let Ok(mut pipe) = pipe.lock() {
                let _ = pipe.child.kill();
                let _ = pipe.child.wait();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_parsing() {
        assert_eq!(Endpoint::parse("http://localhost:8000/p"), Endpoint::Http("http://localhost:8000/p".into()));
        assert_eq!(Endpoint::parse("cmd: python3 m.py"), Endpoint::Command("python3 m.py".into()));
    }

    #[test]
    fn subprocess_echo_roundtrip() {
        // `cat` echoes each request line back as the response.
        let t = JsonLineTransport::connect(Endpoint::Command("cat".into()), Duration::from_secs(5)).unwrap();
        let resp: serde_json::Value = t.call(&serde_json::json!({"texts": ["a b"]})).unwrap();
        assert_eq!(resp["texts"][0], "a b");
        assert!(!t.supports_concurrency());
    }

    #[test]
    fn subprocess_that_exits_is_an_error() {
        let t = JsonLineTransport::connect(Endpoint::Command("true".into()), Duration::from_secs(5)).unwrap();
        let r: std::result::Result<serde_json::Value, String> = t.call(&serde_json::json!({}));
        assert!(r.is_err());
    }

    #[test]
    fn unreachable_http_is_an_error() {
        let t = JsonLineTransport::connect(Endpoint::Http("http://127.0.0.1:9/x".into()), Duration::from_secs(2)).unwrap();
        let r: std::result::Result<serde_json::Value, String> = t.call(&serde_json::json!({}));
        assert!(r.is_err());
    }
}

//! Client for an external language-model probability server.
//!
//! The wire protocol is newline-delimited JSON over TCP. Every request is
//! `{"op": <name>, "id": <u64>, "payload": {...}}` and every reply is
//! `{"id": <u64>, "ok": true, "payload": {...}}` or
//! `{"id": <u64>, "ok": false, "error": <message>}`.
//!
//! | op           | request payload        | reply payload                                         |
//! |--------------|------------------------|-------------------------------------------------------|
//! | `ping`       | `{}`                   | `{model, vocab_size, context_window, pprob}`          |
//! | `tokenize`   | `{text}`               | `{ids: [u32]}`                                        |
//! | `detokenize` | `{ids: [u32]}`         | `{text}`                                              |
//! | `predict`    | `{ids: [u32]}`         | `{cum: base64 of (vocab_size + 1) little-endian u32}` |
//! | `similarity` | `{a, b}`               | `{score: f64}`                                        |
//!
//! The server quantizes; this client only validates. Prefixes longer than
//! the model's context window are cut to their most recent
//! `context_window - 1` tokens before being sent.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;
use serde::Deserialize;
use serde_json::{json, Value};

use super::{CumulativeDistribution, PredictError, Predictor, TokenId, TokenSequence};

/// Environment variable holding `host:port` of the probability server.
pub const ADDR_ENV: &str = "SSCC_PREDICTOR_ADDR";

/// What the server reports about its loaded model.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ModelProfile {
    pub model: String,
    pub vocab_size: usize,
    pub context_window: usize,
    pub pprob: u32,
}

struct Connection {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
    next_id: u64,
}

impl Connection {
    fn call(&mut self, op: &str, payload: Value) -> Result<Value, PredictError> {
        let id = self.next_id;
        self.next_id += 1;
        let mut line = json!({ "op": op, "id": id, "payload": payload }).to_string();
        line.push('\n');
        self.writer
            .write_all(line.as_bytes())
            .map_err(|e| PredictError::Transport(e.to_string()))?;
        let mut reply = String::new();
        let n = self
            .reader
            .read_line(&mut reply)
            .map_err(|e| PredictError::Transport(e.to_string()))?;
        if n == 0 {
            return Err(PredictError::Transport("server closed the connection".into()));
        }
        let reply: Value =
            serde_json::from_str(&reply).map_err(|e| PredictError::Transport(format!("bad reply frame: {e}")))?;
        if reply.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(PredictError::Transport(format!("reply id mismatch (expected {id})")));
        }
        if reply.get("ok").and_then(Value::as_bool) == Some(true) {
            Ok(reply.get("payload").cloned().unwrap_or(Value::Null))
        } else {
            let msg = reply
                .get("error")
                .map(|e| e.as_str().map(str::to_string).unwrap_or_else(|| e.to_string()))
                .unwrap_or_else(|| "unspecified error".into());
            Err(PredictError::Remote(msg))
        }
    }
}

/// A [`Predictor`] backed by the probability server. One request is in
/// flight per client; open several clients for concurrency.
pub struct RemotePredictor {
    conn: Mutex<Connection>,
    profile: ModelProfile,
}

impl RemotePredictor {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, PredictError> {
        let stream = TcpStream::connect(addr).map_err(|e| PredictError::Transport(e.to_string()))?;
        stream
            .set_read_timeout(Some(Duration::from_secs(300)))
            .and_then(|()| stream.set_nodelay(true))
            .map_err(|e| PredictError::Transport(e.to_string()))?;
        let writer = stream.try_clone().map_err(|e| PredictError::Transport(e.to_string()))?;
        let mut conn = Connection {
            reader: BufReader::new(stream),
            writer,
            next_id: 1,
        };
        let profile: ModelProfile = serde_json::from_value(conn.call("ping", json!({}))?)
            .map_err(|e| PredictError::Transport(format!("bad ping reply: {e}")))?;
        if profile.vocab_size < 2 || profile.context_window < 2 {
            return Err(PredictError::Remote(format!("implausible model profile {profile:?}")));
        }
        if profile.pprob != super::PROB_BITS {
            return Err(PredictError::Remote(format!(
                "server grid is 2^{} but the client expects 2^{}",
                profile.pprob,
                super::PROB_BITS
            )));
        }
        Ok(Self {
            conn: Mutex::new(conn),
            profile,
        })
    }

    /// Connects to the address named by [`ADDR_ENV`].
    pub fn from_env() -> Result<Self, PredictError> {
        let addr = std::env::var(ADDR_ENV)
            .map_err(|_| PredictError::Transport(format!("{ADDR_ENV} is not set")))?;
        Self::connect(addr.as_str())
    }

    pub fn profile(&self) -> &ModelProfile {
        &self.profile
    }

    fn call(&self, op: &str, payload: Value) -> Result<Value, PredictError> {
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        conn.call(op, payload)
    }

    /// The tokens actually sent for `prefix` under the sliding-window rule.
    pub fn truncate<'a>(&self, prefix: &'a [TokenId]) -> &'a [TokenId] {
        let keep = self.profile.context_window - 1;
        &prefix[prefix.len().saturating_sub(keep)..]
    }

    /// Sentence similarity in `[0, 1]` from the server's optional endpoint.
    pub fn similarity(&self, a: &str, b: &str) -> Result<f64, PredictError> {
        let reply = self.call("similarity", json!({ "a": a, "b": b }))?;
        reply
            .get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| PredictError::Transport("similarity reply lacks score".into()))
    }
}

fn ids_of(reply: &Value) -> Result<Vec<TokenId>, PredictError> {
    serde_json::from_value(reply.get("ids").cloned().unwrap_or(Value::Null))
        .map_err(|e| PredictError::Transport(format!("bad ids: {e}")))
}

/// Decodes a base64 little-endian `u32` array.
pub fn decode_cumulative(b64: &str) -> Result<Vec<u32>, PredictError> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(b64)
        .map_err(|e| PredictError::Transport(format!("bad base64: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(PredictError::Transport("cumulative array is not a multiple of 4 bytes".into()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Inverse of [`decode_cumulative`].
pub fn encode_cumulative(cum: &[u32]) -> String {
    let bytes: Vec<u8> = cum.iter().flat_map(|v| v.to_le_bytes()).collect();
    base64::engine::general_purpose::STANDARD.encode(bytes)
}

impl Predictor for RemotePredictor {
    fn tau(&self) -> usize {
        self.profile.vocab_size
    }

    fn predict(&self, prefix: &[TokenId]) -> Result<CumulativeDistribution, PredictError> {
        if let Some(&t) = prefix.iter().find(|&&t| t as usize >= self.tau()) {
            return Err(PredictError::TokenOutOfRange { token: t, tau: self.tau() });
        }
        let reply = self.call("predict", json!({ "ids": self.truncate(prefix) }))?;
        let b64 = reply
            .get("cum")
            .and_then(Value::as_str)
            .ok_or_else(|| PredictError::Transport("predict reply lacks cum".into()))?;
        let cum = decode_cumulative(b64)?;
        if cum.len() != self.tau() + 1 {
            return Err(PredictError::Transport(format!(
                "expected {} cumulative entries, got {}",
                self.tau() + 1,
                cum.len()
            )));
        }
        CumulativeDistribution::from_cumulative(cum, 1 << self.profile.pprob)
    }

    fn tokenize(&self, text: &str) -> Result<TokenSequence, PredictError> {
        ids_of(&self.call("tokenize", json!({ "text": text }))?)
    }

    fn detokenize(&self, tokens: &[TokenId]) -> Result<String, PredictError> {
        if let Some(&t) = tokens.iter().find(|&&t| t as usize >= self.tau()) {
            return Err(PredictError::TokenOutOfRange { token: t, tau: self.tau() });
        }
        let reply = self.call("detokenize", json!({ "ids": tokens }))?;
        reply
            .get("text")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| PredictError::Transport("detokenize reply lacks text".into()))
    }

    fn name(&self) -> String {
        format!("remote-{}", self.profile.model)
    }
}

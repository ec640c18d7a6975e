//! The remote predictor against an in-process mock of the probability server.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener};
use std::sync::{Arc, Mutex};
use std::thread;

use serde_json::{json, Value};
use sscc::codec::{BlockCoder, ContainerCodec};
use sscc::corpus::BlockPlan;
use sscc::metrics::compression_rate;
use sscc::pipeline::ExperimentSpec;
use sscc::predictor::remote::encode_cumulative;
use sscc::predictor::{quantize, PredictError, Predictor, RemotePredictor};

const VOCAB: usize = 128;
const WINDOW: usize = 4;

#[derive(Clone, Copy)]
enum Fault {
    None,
    WrongGrid,
    WrongId,
    ShortCum,
}

/// Serves ASCII tokenization and a next-token model that favours the code
/// point after the previous token. Records every predict prefix.
fn spawn_server(fault: Fault) -> (SocketAddr, Arc<Mutex<Vec<Vec<u32>>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { return };
            let log = log.clone();
            thread::spawn(move || serve(stream, fault, log));
        }
    });
    (addr, seen)
}

fn serve(stream: std::net::TcpStream, fault: Fault, log: Arc<Mutex<Vec<Vec<u32>>>>) {
    stream.set_nodelay(true).unwrap();
    let mut writer = stream.try_clone().unwrap();
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { return };
        let req: Value = serde_json::from_str(&line).unwrap();
        let id = req["id"].as_u64().unwrap();
        let p = &req["payload"];
        let payload = match req["op"].as_str().unwrap() {
            "ping" => Ok(json!({
                "model": "mock",
                "vocab_size": VOCAB,
                "context_window": WINDOW,
                "pprob": if matches!(fault, Fault::WrongGrid) { 12 } else { 16 },
            })),
            "tokenize" => {
                let text = p["text"].as_str().unwrap();
                if text.is_ascii() {
                    Ok(json!({ "ids": text.bytes().collect::<Vec<u8>>() }))
                } else {
                    Err("non-ASCII text")
                }
            }
            "detokenize" => {
                let ids: Vec<u8> = serde_json::from_value(p["ids"].clone()).unwrap();
                Ok(json!({ "text": String::from_utf8(ids).unwrap() }))
            }
            "predict" => {
                let ids: Vec<u32> = serde_json::from_value(p["ids"].clone()).unwrap();
                log.lock().unwrap().push(ids.clone());
                let mut weights = vec![1.0; VOCAB];
                if let Some(&last) = ids.last() {
                    weights[(last as usize + 1) % VOCAB] = 200.0;
                }
                weights[b' ' as usize] += 20.0;
                let mut cum = quantize(&weights, 16).unwrap().cumulative().to_vec();
                if matches!(fault, Fault::ShortCum) {
                    cum.pop();
                }
                Ok(json!({ "cum": encode_cumulative(&cum) }))
            }
            "similarity" => Ok(json!({ "score": if p["a"] == p["b"] { 1.0 } else { 0.5 } })),
            _ => Err("unknown op"),
        };
        let reply_id = if matches!(fault, Fault::WrongId) && req["op"] != "ping" { id + 7 } else { id };
        let reply = match payload {
            Ok(v) => json!({ "id": reply_id, "ok": true, "payload": v }),
            Err(e) => json!({ "id": reply_id, "ok": false, "error": e }),
        };
        if writeln!(writer, "{reply}").is_err() {
            return;
        }
    }
}

#[test]
fn arithmetic_coding_roundtrips_through_the_server() {
    let (addr, seen) = spawn_server(Fault::None);
    let remote = Arc::new(RemotePredictor::connect(addr).unwrap());
    assert_eq!(remote.profile().vocab_size, VOCAB);
    assert_eq!(remote.name(), "remote-mock");
    let text = "abcdefg hijk abc xyz";
    let codec = ContainerCodec {
        coder: BlockCoder::arithmetic(remote.clone()),
        plan: BlockPlan::new(8),
    };
    compression_rate(text, &codec).unwrap();
    // Context never exceeds window - 1 tokens and resets at block starts.
    let prefixes = seen.lock().unwrap();
    assert!(prefixes.iter().all(|p| p.len() < WINDOW));
    assert!(prefixes.iter().filter(|p| p.is_empty()).count() >= 3);
    assert_eq!(remote.similarity("a", "a").unwrap(), 1.0);
}

#[test]
fn server_errors_surface_as_predictor_errors() {
    let (addr, _) = spawn_server(Fault::None);
    let remote = RemotePredictor::connect(addr).unwrap();
    assert!(matches!(remote.tokenize("caf\u{e9}"), Err(PredictError::Remote(_))));
    assert!(matches!(remote.predict(&[500]), Err(PredictError::TokenOutOfRange { .. })));
    assert!(remote.detokenize(&[200]).is_err());
    // The connection stays usable after an error reply.
    assert_eq!(remote.tokenize("ok").unwrap(), vec![111, 107]);
}

#[test]
fn malformed_replies_are_rejected() {
    let (addr, _) = spawn_server(Fault::WrongGrid);
    assert!(matches!(RemotePredictor::connect(addr), Err(PredictError::Remote(_))));
    let (addr, _) = spawn_server(Fault::WrongId);
    let remote = RemotePredictor::connect(addr).unwrap();
    assert!(matches!(remote.tokenize("x"), Err(PredictError::Transport(_))));
    let (addr, _) = spawn_server(Fault::ShortCum);
    let remote = RemotePredictor::connect(addr).unwrap();
    assert!(matches!(remote.predict(&[]), Err(PredictError::Transport(_))));
    let closed = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    assert!(RemotePredictor::connect(closed).is_err());
}

#[test]
fn experiment_can_use_the_remote_predictor() {
    let (addr, _) = spawn_server(Fault::None);
    let spec = ExperimentSpec::parse(&format!(
        "name = \"remote\"\nlimit = 2\nsnr_unified_db = [300.0]\n[predictor]\nkind = \"remote\"\naddr = \"{addr}\"\n"
    ))
    .unwrap();
    let exp = spec.prepare(|_, _| {}).unwrap();
    let row = exp.run_point(300.0, 0).unwrap();
    assert_eq!(row.bleu[3], 1.0);
    assert!(row.coder.contains("remote-mock"));
}

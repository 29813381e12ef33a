use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Child, Command, Stdio};

use segmodel_core::ingest::AccessEvent;
use segmodel_core::service::{Scorer, UserScore};
use segmodel_core::svm::load_model;
use segmodel_core::users::UserStore;
use segmodel_core::vector::FeatureSpace;
use serde_json::Value;

use crate::{ensure, Outcome};

fn segmodel(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_segmodel"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("segmodel {args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn cli_score(config: &str, model: &str, input: &str) -> Result<Vec<(String, f64)>, String> {
    let mut child = Command::new(env!("CARGO_BIN_EXE_segmodel"))
        .args(["--config", config, "score", "--model", model])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut stdin = child.stdin.take().unwrap();
    let input = input.to_string();
    let writer = std::thread::spawn(move || stdin.write_all(input.as_bytes()));
    let out = child.wait_with_output().map_err(|e| e.to_string())?;
    writer.join().unwrap().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || format!("score failed: {}", String::from_utf8_lossy(&out.stderr)))?;
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| {
            let (u, s) = l.rsplit_once(',').ok_or_else(|| format!("bad score line {l:?}"))?;
            Ok((u.to_string(), s.parse::<f64>().map_err(|e| format!("{l:?}: {e}"))?))
        })
        .collect()
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn post(addr: &str, body: &str) -> Result<(u16, String), String> {
    let mut s = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    write!(
        s,
        "POST /v1/score HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .map_err(|e| e.to_string())?;
    let mut raw = String::new();
    s.read_to_string(&mut raw).map_err(|e| e.to_string())?;
    let status = raw.split_whitespace().nth(1).and_then(|c| c.parse().ok()).ok_or("no status line")?;
    Ok((status, raw.split_once("\r\n\r\n").map(|x| x.1.to_string()).unwrap_or_default()))
}

/// Final score per user from a stream of per-event lines.
fn finals(lines: &[(String, f64)]) -> HashMap<String, f64> {
    lines.iter().cloned().collect()
}

fn compare(batch: &[UserScore], stream: &HashMap<String, f64>, what: &str) -> Result<(), String> {
    ensure(batch.len() == stream.len(), || format!("{what}: {} batch users vs {} streamed", batch.len(), stream.len()))?;
    for s in batch {
        let got = stream.get(&s.user_id).ok_or_else(|| format!("{what}: user {} not streamed", s.user_id))?;
        ensure(got.to_bits() == s.score.to_bits(), || format!("{what}: user {} streamed {got}, batch {}", s.user_id, s.score))?;
    }
    Ok(())
}

pub fn check() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path();
    let corpus = root.join("corpus");
    let p = |x: &Path| x.to_str().unwrap().to_string();
    segmodel(&["syngen", "--out", &p(&corpus), "--users", "300", "--seed", "11"])?;
    let config = p(&corpus.join("config.toml"));
    segmodel(&["--config", &config, "ingest"])?;
    let model = p(&root.join("models/planted.json"));
    segmodel(&["--config", &config, "train", "--query", "gender = female", "--out", &model])?;

    let logs = std::fs::read_to_string(corpus.join("logs.jsonl")).map_err(|e| e.to_string())?;
    let mut lines: Vec<String> = logs.lines().map(str::to_string).collect();
    lines.insert(lines.len() / 3, "{\"user_id\": \"broken\"}".into());
    lines.insert(lines.len() / 2, "not json at all".into());
    let input: String = lines.iter().map(|l| format!("{l}\n")).collect();
    let streamed = cli_score(&config, &model, &input)?;

    let store = UserStore::load(corpus.join("work/store.snap")).map_err(|e| e.to_string())?;
    let space = FeatureSpace::load(root.join("models/planted.space.tsv")).map_err(|e| e.to_string())?;
    let m = load_model(&model).map_err(|e| e.to_string())?;
    let scorer = Scorer::new(m, space, store.enricher().clone(), store.pages().clone()).map_err(|e| e.to_string())?;
    let events: Vec<AccessEvent> = lines.iter().filter_map(|l| scorer.parse_event(l).ok()).collect();
    ensure(events.len() == lines.len() - 2, || format!("{} of {} lines parsed", events.len(), lines.len()))?;
    ensure(streamed.len() == events.len(), || format!("{} score lines for {} events", streamed.len(), events.len()))?;
    for (line, event) in streamed.iter().zip(&events) {
        ensure(line.0 == event.user_id, || format!("score line for {} where {} was expected", line.0, event.user_id))?;
    }

    let batch = scorer.score_batch(&events).map_err(|e| e.to_string())?;
    let cli = finals(&streamed);
    compare(&batch, &cli, "full stream")?;
    let half = events.len() / 2;
    let prefix = scorer.score_batch(&events[..half]).map_err(|e| e.to_string())?;
    compare(&prefix, &finals(&streamed[..half]), "stream prefix")?;

    let mut child = Command::new(env!("CARGO_BIN_EXE_segmodel"))
        .args(["--config", &config, "serve", "--model", &format!("planted={model}"), "--addr", "127.0.0.1:0", "--threads", "2"])
        .stdout(Stdio::piped())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut banner = String::new();
    BufReader::new(child.stdout.as_mut().unwrap()).read_line(&mut banner).map_err(|e| e.to_string())?;
    let server = Server(child);
    let banner: Value = serde_json::from_str(&banner).map_err(|e| format!("banner {banner:?}: {e}"))?;
    let addr = banner["listening"].as_str().ok_or("no listening address")?.to_string();
    let body = serde_json::json!({
        "model_id": "planted",
        "events": lines.iter().map(|l| serde_json::from_str::<Value>(l).unwrap_or_else(|_| Value::String(l.clone()))).collect::<Vec<_>>(),
    })
    .to_string();
    let (status, resp) = post(&addr, &body)?;
    drop(server);
    ensure(status == 200, || format!("HTTP status {status}: {resp}"))?;
    let resp: Value = serde_json::from_str(&resp).map_err(|e| e.to_string())?;
    let http: Vec<UserScore> = serde_json::from_value(resp["user_scores"].clone()).map_err(|e| e.to_string())?;
    compare(&http, &cli, "http vs cli")?;
    ensure(resp["events_malformed"] == 2, || format!("malformed count {}", resp["events_malformed"]))?;
    for s in &http {
        ensure(s.decision == if s.score > 0.0 { 1 } else { -1 }, || format!("user {} decision {}", s.user_id, s.decision))?;
    }
    Ok(format!(
        "{} events from {} users: stream finals and prefix equal batch scoring bit for bit; HTTP equals CLI",
        events.len(),
        batch.len()
    ))
}

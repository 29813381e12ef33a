use std::io::{Read, Write};
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use serde_json::json;
use tiny_http::{Header, Method, Response, Server};

use segmodel_core::service::{handle_score, ModelRegistry, PipelineConfig, Scorer};

use crate::commands::{load_model_and_space, load_store};
use crate::exit::CliError;
use crate::{ModelArgs, ServeArgs};

const MAX_BODY: u64 = 16 << 20;

fn parse_model_spec(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((id, path)) if !id.is_empty() => (id.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (id, path)
        }
    }
}

pub fn build_registry(cfg: &PipelineConfig, a: &ServeArgs) -> Result<ModelRegistry> {
    let store = load_store(cfg, &a.store)?;
    let mut registry = ModelRegistry::new();
    for spec in &a.models {
        let (id, path) = parse_model_spec(spec);
        let (model, space) = load_model_and_space(&ModelArgs { model: path, space: None })?;
        let scorer = Scorer::new(model, space, store.enricher().clone(), store.pages().clone())?;
        registry.insert(id, scorer);
    }
    Ok(registry)
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_string(body).with_status_code(status).with_header(header)
}

fn handle(registry: &ModelRegistry, mut request: tiny_http::Request) {
    let url = request.url().split('?').next().unwrap_or("").to_string();
    let (status, body) = match (request.method(), url.as_str()) {
        (Method::Post, "/v1/score") => {
            let mut body = Vec::new();
            match request.as_reader().take(MAX_BODY + 1).read_to_end(&mut body) {
                Ok(n) if n as u64 > MAX_BODY => (413, json!({ "status": 413, "error": "request body too large" }).to_string()),
                Ok(_) => handle_score(registry, &body),
                Err(e) => (400, json!({ "status": 400, "error": e.to_string() }).to_string()),
            }
        }
        (Method::Get, "/healthz") => (200, json!({ "status": "ok", "models": registry.ids().collect::<Vec<_>>() }).to_string()),
        (_, "/v1/score") | (_, "/healthz") => (405, json!({ "status": 405, "error": "method not allowed" }).to_string()),
        _ => (404, json!({ "status": 404, "error": "not found" }).to_string()),
    };
    let _ = request.respond(json_response(status, body));
}

pub fn serve(cfg: &PipelineConfig, a: ServeArgs) -> Result<()> {
    let registry = Arc::new(build_registry(cfg, &a)?);
    let server = Server::http(&a.addr).map_err(|e| CliError::input(format!("cannot listen on {}: {e}", a.addr)))?;
    let server = Arc::new(server);
    let addr = server
        .server_addr()
        .to_ip()
        .map(|s| s.to_string())
        .unwrap_or_else(|| a.addr.clone());
    {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{}", json!({ "listening": addr, "models": registry.ids().collect::<Vec<_>>() }))?;
        out.flush()?;
    }
    let workers: Vec<_> = (0..a.threads.max(1))
        .map(|_| {
            let server = Arc::clone(&server);
            let registry = Arc::clone(&registry);
            std::thread::spawn(move || {
                while let Ok(request) = server.recv() {
                    handle(&registry, request);
                }
            })
        })
        .collect();
    for w in workers {
        w.join().map_err(|_| anyhow::anyhow!("server worker panicked")).context("serving")?;
    }
    Ok(())
}

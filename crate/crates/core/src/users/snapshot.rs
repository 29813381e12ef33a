//! Single-file store snapshot.
//!
//! Layout: a magic/version line, a line with the SHA-256 and byte length of
//! the payload, then the JSON payload. The index is not stored; it is rebuilt
//! on load in the original ordinal order, so a loaded store answers every
//! query exactly as the saved one did.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{StoreError, UserProfile, UserStore, Visit};
use crate::content::{PageRecord, PageStore, TokenRules};
use crate::ingest::{AccessEvent, Enricher};

const MAGIC: &str = "SEGMODEL-SNAPSHOT";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Payload {
    enricher: Enricher,
    token_rules: TokenRules,
    pages: Vec<PageRecord>,
    users: Vec<SnapshotUser>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotUser {
    profile: UserProfile,
    visits: Vec<SnapshotVisit>,
}

#[derive(Serialize, Deserialize)]
struct SnapshotVisit {
    event: AccessEvent,
    linked: bool,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl UserStore {
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<(), StoreError> {
        let payload = Payload {
            enricher: self.enricher.clone(),
            token_rules: self.pages.rules().clone(),
            pages: self.pages.records().cloned().collect(),
            users: self
                .records
                .iter()
                .map(|r| SnapshotUser {
                    profile: r.profile.clone(),
                    visits: r
                        .visits
                        .iter()
                        .map(|v| SnapshotVisit {
                            event: v.event.clone(),
                            linked: v.page.is_some(),
                        })
                        .collect(),
                })
                .collect(),
        };
        let body = serde_json::to_vec(&payload).map_err(|e| StoreError::CorruptSnapshot(e.to_string()))?;
        let digest = Sha256::digest(&body);
        writeln!(out, "{MAGIC} v{VERSION}")?;
        writeln!(out, "sha256:{} bytes:{}", hex(&digest), body.len())?;
        out.write_all(&body)?;
        out.flush()?;
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut input: R) -> Result<Self, StoreError> {
        let mut raw = Vec::new();
        input.read_to_end(&mut raw)?;
        let corrupt = |m: &str| StoreError::CorruptSnapshot(m.to_string());

        let (header, rest) = split_line(&raw).ok_or_else(|| corrupt("missing header"))?;
        let header = std::str::from_utf8(header).map_err(|_| corrupt("header is not UTF-8"))?;
        let version = header
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().strip_prefix('v'))
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| corrupt("not a snapshot file"))?;
        if version != VERSION {
            return Err(StoreError::CorruptSnapshot(format!("unsupported snapshot version {version}")));
        }
        let (digest_line, body) = split_line(rest).ok_or_else(|| corrupt("missing checksum line"))?;
        let digest_line = std::str::from_utf8(digest_line).map_err(|_| corrupt("checksum line is not UTF-8"))?;
        let mut parts = digest_line.split_whitespace();
        let expected = parts
            .next()
            .and_then(|p| p.strip_prefix("sha256:"))
            .ok_or_else(|| corrupt("missing sha256"))?;
        let len = parts
            .next()
            .and_then(|p| p.strip_prefix("bytes:"))
            .and_then(|p| p.parse::<usize>().ok())
            .ok_or_else(|| corrupt("missing byte length"))?;
        if body.len() != len {
            return Err(StoreError::CorruptSnapshot(format!(
                "payload is {} bytes, header says {len}",
                body.len()
            )));
        }
        if hex(&Sha256::digest(body)) != expected {
            return Err(corrupt("checksum mismatch"));
        }
        let payload: Payload = serde_json::from_slice(body).map_err(|e| StoreError::CorruptSnapshot(e.to_string()))?;

        let enricher = payload
            .enricher
            .restore()
            .map_err(|e| StoreError::CorruptSnapshot(e.to_string()))?;
        let mut pages = PageStore::new(payload.token_rules);
        for p in payload.pages {
            pages
                .upsert_page(p)
                .map_err(|e| StoreError::CorruptSnapshot(e.to_string()))?;
        }
        let mut store = UserStore::new(enricher, pages);
        for user in payload.users {
            store.ordinal_or_insert(&user.profile.user_id);
            for v in user.visits {
                let page = if v.linked {
                    Some(
                        store
                            .pages
                            .entry(&v.event.url)
                            .cloned()
                            .ok_or_else(|| corrupt("visit links to a missing page"))?,
                    )
                } else {
                    None
                };
                store.add_linked_visit(Visit { event: v.event, page });
            }
            store.set_profile(user.profile)?;
        }
        Ok(store)
    }

    pub fn snapshot(&self, path: impl AsRef<Path>) -> Result<(), StoreError> {
        let file = fs::File::create(path)?;
        self.write_snapshot(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let file = fs::File::open(path)?;
        Self::read_snapshot(std::io::BufReader::new(file))
    }
}

fn split_line(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let pos = bytes.iter().position(|&b| b == b'\n')?;
    Some((&bytes[..pos], &bytes[pos + 1..]))
}

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};
use url::Url;

use super::IngestError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferrerInfo {
    pub referring_url: String,
    /// Registered domain of the referrer host, lowercased.
    pub referring_domain: String,
    pub search_terms: Vec<String>,
}

/// Search engines keyed by registered domain, each with the query parameter
/// carrying the user's search.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineRules {
    engines: BTreeMap<String, String>,
}

impl EngineRules {
    pub fn new<I, D, P>(rules: I) -> Self
    where
        I: IntoIterator<Item = (D, P)>,
        D: Into<String>,
        P: Into<String>,
    {
        let engines = rules
            .into_iter()
            .map(|(d, p)| (d.into().to_lowercase(), p.into()))
            .collect();
        Self { engines }
    }

    /// Reads `domain,query_param` rows.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut rules = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| IngestError::InvalidRules(e.to_string()))?;
            if line == 0 && row.get(0) == Some("domain") {
                continue;
            }
            if row.len() != 2 || row[0].is_empty() || row[1].is_empty() {
                return Err(IngestError::InvalidRules(format!(
                    "search engine row {}: expected `domain,query_param`",
                    line + 1
                )));
            }
            rules.push((row[0].to_string(), row[1].to_string()));
        }
        Ok(Self::new(rules))
    }

    pub fn query_param(&self, domain: &str) -> Option<&str> {
        self.engines.get(domain).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.engines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.engines.is_empty()
    }
}

// Second-level labels under which registrations happen one level deeper
// (example.co.uk). Not a public-suffix list; good enough for referrer grouping.
const SECOND_LEVEL: &[&str] = &["co", "com", "net", "org", "gov", "ac", "edu", "ne", "or"];

/// Registered domain of `host`: the last two labels, or three when the
/// second-to-last label is a generic second-level name under a two-letter
/// country code. IP literals are returned unchanged.
pub fn registered_domain(host: &str) -> String {
    let host = host.trim_end_matches('.').to_lowercase();
    if host.parse::<std::net::IpAddr>().is_ok() || host.starts_with('[') {
        return host;
    }
    let labels: Vec<&str> = host.split('.').filter(|l| !l.is_empty()).collect();
    let n = labels.len();
    if n <= 2 {
        return labels.join(".");
    }
    let take = if labels[n - 1].len() == 2 && SECOND_LEVEL.contains(&labels[n - 2]) {
        3
    } else {
        2
    };
    labels[n - take..].join(".")
}

/// Host labels in front of the registered domain (`sport` for
/// `sport.news.example.com`), if any.
pub fn sub_domain(host: &str) -> Option<String> {
    let host = host.trim_end_matches('.').to_lowercase();
    let domain = registered_domain(&host);
    let prefix = host.strip_suffix(&domain)?.trim_end_matches('.');
    (!prefix.is_empty()).then(|| prefix.to_string())
}

pub fn parse_referrer(url: &str, engines: &EngineRules) -> ReferrerInfo {
    let parsed = match Url::parse(url.trim()) {
        Ok(u) if u.host_str().is_some() => u,
        _ => {
            return ReferrerInfo {
                referring_url: url.to_string(),
                referring_domain: "unknown".into(),
                search_terms: Vec::new(),
            }
        }
    };
    let host = parsed.host_str().unwrap_or_default();
    let domain = registered_domain(host);
    let search_terms = match engines.query_param(&domain) {
        Some(key) => parsed
            .query_pairs()
            .filter(|(k, _)| k == key)
            .flat_map(|(_, v)| {
                v.split(|c: char| c == '+' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(str::to_lowercase)
                    .collect::<Vec<_>>()
            })
            .collect(),
        None => Vec::new(),
    };
    ReferrerInfo {
        referring_url: url.to_string(),
        referring_domain: domain,
        search_terms,
    }
}

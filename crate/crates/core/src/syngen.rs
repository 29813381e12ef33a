//! Synthetic corpora with a planted, linearly recoverable segment.
//!
//! Each user belongs to the positive class (registered as female) with the
//! configured prior. Every visit goes to a fresh page whose tokens are drawn
//! independently per namespace from a class-conditional multinomial, so the
//! Bayes-optimal score is a sum of per-token log likelihood ratios. In the
//! positive class the `d` discriminative tokens of a namespace get weight
//! `1 + gap` and every other token weight 1 before normalization; the
//! negative class is uniform.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use chrono::{Duration, TimeZone, Utc};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fields::Field;
use crate::users::Visit;

#[derive(Debug, Error)]
pub enum SyngenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("token {token:?} is not in the {namespace} vocabulary")]
    UnknownToken { namespace: Field, token: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Vocabulary of one planted namespace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamespaceSpec {
    pub vocab: usize,
    /// Tokens drawn per visit.
    pub per_visit: usize,
    /// Tokens whose probability differs between the classes.
    pub discriminative: usize,
}

impl NamespaceSpec {
    pub const fn new(vocab: usize, per_visit: usize, discriminative: usize) -> Self {
        Self {
            vocab,
            per_visit,
            discriminative,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_users: usize,
    pub visits_min: usize,
    pub visits_max: usize,
    /// Probability that a user is in the segment.
    pub prior: f64,
    pub gap: f64,
    /// Fraction of users with a registration record.
    pub coverage: f64,
    pub seed: u64,
    pub content: NamespaceSpec,
    pub entities: NamespaceSpec,
    pub country: NamespaceSpec,
    pub hour: NamespaceSpec,
    pub category: NamespaceSpec,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n_users: 5000,
            visits_min: 1,
            visits_max: 39,
            prior: 0.5,
            gap: 3.5,
            coverage: 1.0,
            seed: 0,
            content: NamespaceSpec::new(400, 8, 6),
            entities: NamespaceSpec::new(60, 2, 2),
            country: NamespaceSpec::new(12, 1, 1),
            hour: NamespaceSpec::new(24, 1, 1),
            category: NamespaceSpec::new(10, 1, 0),
        }
    }
}

/// The segment definition that selects the positive class.
pub const SEGMENT_QUERY: &str = "gender = female";

const SITE: &str = "https://news.example.com";

fn token_name(field: Field, i: usize) -> String {
    match field {
        Field::PageContent => format!("w{i:04}"),
        Field::NamedEntities => format!("ent{i:03}"),
        Field::Country => format!("c{i:02}"),
        Field::HourOfDay => format!("h{i:02}"),
        _ => format!("cat{i:02}"),
    }
}

impl GeneratorConfig {
    fn namespaces(&self) -> [(Field, NamespaceSpec); 5] {
        [
            (Field::PageContent, self.content),
            (Field::NamedEntities, self.entities),
            (Field::Country, self.country),
            (Field::HourOfDay, self.hour),
            (Field::Category, self.category),
        ]
    }

    pub fn validate(&self) -> Result<(), SyngenError> {
        let bad = |m: String| Err(SyngenError::InvalidConfig(m));
        if self.n_users == 0 {
            return bad("n_users must be positive".into());
        }
        if self.visits_min == 0 || self.visits_min > self.visits_max {
            return bad(format!("need 1 <= visits_min <= visits_max, got {}..{}", self.visits_min, self.visits_max));
        }
        if !(self.prior > 0.0 && self.prior < 1.0) {
            return bad(format!("prior must be in (0, 1), got {}", self.prior));
        }
        if !(self.gap.is_finite() && self.gap >= 0.0) {
            return bad(format!("gap must be non-negative, got {}", self.gap));
        }
        if !(0.0..=1.0).contains(&self.coverage) {
            return bad(format!("coverage must be in [0, 1], got {}", self.coverage));
        }
        for (field, ns) in self.namespaces() {
            if ns.vocab == 0 || ns.discriminative > ns.vocab {
                return bad(format!("{field}: need 0 <= discriminative <= vocab and vocab >= 1"));
            }
        }
        if self.hour.vocab > 24 || self.country.vocab > 256 || self.country.per_visit > 1 || self.hour.per_visit > 1 {
            return bad("hour allows at most 24 tokens and country at most 256, each with at most one per visit".into());
        }
        Ok(())
    }
}

/// Class-conditional distributions of the planted namespaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BayesOracle {
    pub prior: f64,
    pub namespaces: Vec<OracleNamespace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleNamespace {
    pub field: Field,
    pub tokens: Vec<String>,
    pub discriminative: Vec<usize>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl BayesOracle {
    pub fn from_config(cfg: &GeneratorConfig) -> Result<Self, SyngenError> {
        cfg.validate()?;
        let namespaces = cfg
            .namespaces()
            .into_iter()
            .map(|(field, ns)| {
                let tokens: Vec<String> = (0..ns.vocab).map(|i| token_name(field, i)).collect();
                // spread the planted tokens over the vocabulary
                let discriminative: Vec<usize> = (0..ns.discriminative).map(|k| k * ns.vocab / ns.discriminative).collect();
                let mut weights = vec![1.0; ns.vocab];
                for &i in &discriminative {
                    weights[i] += cfg.gap;
                }
                let total: f64 = weights.iter().sum();
                OracleNamespace {
                    field,
                    tokens,
                    discriminative,
                    positive: weights.iter().map(|w| w / total).collect(),
                    negative: vec![1.0 / ns.vocab as f64; ns.vocab],
                }
            })
            .collect();
        Ok(Self {
            prior: cfg.prior,
            namespaces,
        })
    }

    /// `(namespace, token)` pairs favouring the positive class.
    pub fn planted_tokens(&self) -> Vec<(Field, String)> {
        self.namespaces
            .iter()
            .flat_map(|ns| ns.discriminative.iter().map(move |&i| (ns.field, ns.tokens[i].clone())))
            .collect()
    }

    pub fn log_prior_odds(&self) -> f64 {
        (self.prior / (1.0 - self.prior)).ln()
    }

    /// Log posterior odds of the positive class given a user's tokens.
    /// Tokens of namespaces the generator does not plant are ignored.
    pub fn score_tokens<'a>(&self, tokens: impl IntoIterator<Item = (Field, &'a str)>) -> Result<f64, SyngenError> {
        let mut lookup: HashMap<(Field, &str), f64> = HashMap::new();
        for ns in &self.namespaces {
            for (i, t) in ns.tokens.iter().enumerate() {
                lookup.insert((ns.field, t.as_str()), (ns.positive[i] / ns.negative[i]).ln());
            }
        }
        let mut score = self.log_prior_odds();
        for (field, token) in tokens {
            if !self.namespaces.iter().any(|ns| ns.field == field) {
                continue;
            }
            match lookup.get(&(field, token)) {
                Some(llr) => score += llr,
                None => {
                    return Err(SyngenError::UnknownToken {
                        namespace: field,
                        token: token.to_string(),
                    })
                }
            }
        }
        Ok(score)
    }

    /// Oracle score of an ingested user from the tokens of their visits.
    pub fn score_visits(&self, visits: &[Visit]) -> Result<f64, SyngenError> {
        let mut tokens: Vec<(Field, String)> = Vec::new();
        for v in visits {
            for ns in &self.namespaces {
                tokens.extend(ns.field.visit_tokens(v).into_iter().map(|t| (ns.field, t.into_owned())));
            }
        }
        self.score_tokens(tokens.iter().map(|(f, t)| (*f, t.as_str())))
    }
}

/// Generated files plus ground truth.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub config: GeneratorConfig,
    pub oracle: BayesOracle,
    /// JSON-lines access log, in timestamp order.
    pub logs: String,
    /// JSON-lines page records.
    pub pages: String,
    /// JSON-lines registration records.
    pub registrations: String,
    /// `user_id,label` CSV.
    pub labels: String,
    /// Geo range table CSV.
    pub geo: String,
    /// `(user_id, label, oracle score)` for every user, in generation order.
    pub truth: Vec<(String, i8, f64)>,
}

impl Corpus {
    /// AUC of the oracle scores against the true labels.
    pub fn oracle_auc(&self) -> f64 {
        rank_sum_auc(self.truth.iter().map(|t| (t.2, t.1 > 0)))
    }

    pub fn label(&self, user_id: &str) -> Option<i8> {
        self.truth.iter().find(|t| t.0 == user_id).map(|t| t.1)
    }

    pub const FILES: [&'static str; 6] = [
        "logs.jsonl",
        "pages.jsonl",
        "registrations.jsonl",
        "labels.csv",
        "geo.csv",
        "generator.json",
    ];

    /// Writes the corpus files into `dir`, creating it if needed.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), SyngenError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let config = serde_json::to_string_pretty(&self.config).expect("config serializes") + "\n";
        for (name, body) in Self::FILES.iter().zip([
            &self.logs,
            &self.pages,
            &self.registrations,
            &self.labels,
            &self.geo,
            &config,
        ]) {
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// Mann-Whitney statistic with midranks for ties.
fn rank_sum_auc(items: impl Iterator<Item = (f64, bool)>) -> f64 {
    let mut v: Vec<(f64, bool)> = items.collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut rank_sum, mut pos) = (0.0, 0usize);
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j].0 == v[i].0 {
            j += 1;
        }
        let mid = (i + j + 1) as f64 / 2.0;
        for item in &v[i..j] {
            if item.1 {
                rank_sum += mid;
                pos += 1;
            }
        }
        i = j;
    }
    let neg = v.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.5;
    }
    (rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos as f64 * neg as f64)
}

struct Sampler {
    field: Field,
    llr: HashMap<String, f64>,
    per_visit: usize,
    tokens: Vec<String>,
    positive: WeightedIndex<f64>,
    negative: WeightedIndex<f64>,
}

impl Sampler {
    fn draw(&self, positive: bool, rng: &mut ChaCha8Rng) -> Vec<&str> {
        (0..self.per_visit)
            .map(|_| {
                let i = if positive { self.positive.sample(rng) } else { self.negative.sample(rng) };
                self.tokens[i].as_str()
            })
            .collect()
    }
}

#[derive(Serialize)]
struct LogLine<'a> {
    user_id: &'a str,
    ts: String,
    url: &'a str,
    ip: String,
}

#[derive(Serialize)]
struct PageLine<'a> {
    url: &'a str,
    content_text: String,
    named_entities: Vec<&'a str>,
    categories: Vec<&'a str>,
    metadata: PageMeta,
}

#[derive(Serialize)]
struct PageMeta {
    page_type: &'static str,
}

pub fn generate(cfg: &GeneratorConfig) -> Result<Corpus, SyngenError> {
    let oracle = BayesOracle::from_config(cfg)?;
    let samplers: Vec<Sampler> = oracle
        .namespaces
        .iter()
        .zip(cfg.namespaces())
        .map(|(ns, (_, spec))| Sampler {
            field: ns.field,
            llr: ns
                .tokens
                .iter()
                .zip(ns.positive.iter().zip(&ns.negative))
                .map(|(t, (p, q))| (t.clone(), (p / q).ln()))
                .collect(),
            per_visit: spec.per_visit,
            tokens: ns.tokens.clone(),
            positive: WeightedIndex::new(&ns.positive).expect("positive weights"),
            negative: WeightedIndex::new(&ns.negative).expect("negative weights"),
        })
        .collect();
    let sampler = |f: Field| samplers.iter().find(|s| s.field == f).expect("planted namespace");

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap();
    let width = (cfg.n_users as f64).log10().floor() as usize + 1;
    let mut events: Vec<(chrono::DateTime<Utc>, String)> = Vec::new();
    let mut pages = String::new();
    let mut registrations = String::new();
    let mut labels = String::from("user_id,label\n");
    let mut truth = Vec::with_capacity(cfg.n_users);
    let mut page_no = 0usize;

    for u in 0..cfg.n_users {
        let user_id = format!("user{u:0width$}");
        let positive = rng.gen_bool(cfg.prior);
        let n_visits = rng.gen_range(cfg.visits_min..=cfg.visits_max);
        let mut score = oracle.log_prior_odds();
        let mut seen: Vec<(Field, &str)> = Vec::new();
        for _ in 0..n_visits {
            seen.clear();
            let url = format!("{SITE}/a/{page_no}");
            page_no += 1;
            let content = sampler(Field::PageContent).draw(positive, &mut rng);
            let entities = sampler(Field::NamedEntities).draw(positive, &mut rng);
            let categories = sampler(Field::Category).draw(positive, &mut rng);
            let country = sampler(Field::Country).draw(positive, &mut rng).first().copied();
            let hour = sampler(Field::HourOfDay).draw(positive, &mut rng).first().copied();
            let day = rng.gen_range(0..28i64);
            let second = rng.gen_range(0..3600i64);
            let hour_no: i64 = hour.map_or_else(|| rng.gen_range(0..24), |h| h[1..].parse().expect("hour token"));
            let ts = start + Duration::days(day) + Duration::hours(hour_no) + Duration::seconds(second);
            let ip = match country {
                Some(c) => format!("10.{}.{}.{}", &c[1..].parse::<u8>().expect("country token"), rng.gen::<u8>(), rng.gen::<u8>()),
                None => format!("192.168.{}.{}", rng.gen::<u8>(), rng.gen::<u8>()),
            };

            seen.extend(content.iter().map(|t| (Field::PageContent, *t)));
            seen.extend(entities.iter().map(|t| (Field::NamedEntities, *t)));
            seen.extend(categories.iter().map(|t| (Field::Category, *t)));
            seen.extend(country.map(|t| (Field::Country, t)));
            seen.extend(hour.map(|t| (Field::HourOfDay, t)));
            score += seen.iter().map(|(f, t)| sampler(*f).llr[*t]).sum::<f64>();

            let page = PageLine {
                url: &url,
                content_text: content.join(" "),
                named_entities: entities,
                categories,
                metadata: PageMeta { page_type: "article" },
            };
            pages.push_str(&serde_json::to_string(&page).expect("page serializes"));
            pages.push('\n');
            let line = LogLine {
                user_id: &user_id,
                ts: ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                url: &url,
                ip,
            };
            events.push((ts, serde_json::to_string(&line).expect("event serializes")));
        }
        if rng.gen_bool(cfg.coverage) {
            let gender = if positive { "female" } else { "male" };
            let age = rng.gen_range(18..=80);
            let income = rng.gen_range(10..=250) * 1000;
            let _ = writeln!(
                registrations,
                "{{\"user_id\":\"{user_id}\",\"gender\":\"{gender}\",\"age\":{age},\"income\":{income}}}"
            );
        }
        let label: i8 = if positive { 1 } else { -1 };
        let _ = writeln!(labels, "{user_id},{label}");
        truth.push((user_id, label, score));
    }

    // a stable sort keeps per-user order for events in the same second
    events.sort_by_key(|e| e.0);
    let mut logs = String::with_capacity(events.iter().map(|e| e.1.len() + 1).sum());
    for (_, line) in events {
        logs.push_str(&line);
        logs.push('\n');
    }
    let mut geo = String::from("start_ip,end_ip,country,state,city\n");
    for c in 0..cfg.country.vocab {
        let _ = writeln!(geo, "10.{c}.0.0,10.{c}.255.255,{},,", token_name(Field::Country, c));
    }
    Ok(Corpus {
        config: cfg.clone(),
        oracle,
        logs,
        pages,
        registrations,
        labels,
        geo,
        truth,
    })
}

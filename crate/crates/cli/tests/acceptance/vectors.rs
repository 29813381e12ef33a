use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segmodel_core::content::{PageMetadata, PageRecord, PageStore, TokenRules};
use segmodel_core::ingest::{DeviceClass, DeviceRule, DeviceRules, EngineRules, Enricher, GeoTable};
use segmodel_core::users::UserStore;
use segmodel_core::vector::{user_vector, vectorize_visit, FeatureSetMask, FeatureSpace, SparseVector};

use crate::{ensure, Outcome};

const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "ren", "sto", "vu", "bel", "dra", "fin", "gor", "tul", "zen"];

fn word(rng: &mut ChaCha8Rng, vocab: usize) -> String {
    let k = rng.gen_range(0..vocab);
    let mut w = String::new();
    let mut x = k;
    for _ in 0..3 {
        w.push_str(SYLLABLES[x % SYLLABLES.len()]);
        x /= SYLLABLES.len();
    }
    w
}

fn words(rng: &mut ChaCha8Rng, vocab: usize, max: usize) -> Vec<String> {
    let n = rng.gen_range(0..=max);
    (0..n).map(|_| word(rng, vocab)).collect()
}

fn maybe<T>(rng: &mut ChaCha8Rng, p: f64, f: impl FnOnce(&mut ChaCha8Rng) -> T) -> Option<T> {
    if rng.gen_bool(p) {
        Some(f(rng))
    } else {
        None
    }
}

fn random_page(rng: &mut ChaCha8Rng, url: String) -> PageRecord {
    PageRecord {
        url,
        title: maybe(rng, 0.8, |r| words(r, 300, 6).join(" ")),
        meta_tags: maybe(rng, 0.5, |r| words(r, 40, 4)),
        content_text: maybe(rng, 0.85, |r| words(r, 1000, 60).join(" ")),
        named_entities: maybe(rng, 0.6, |r| (0..r.gen_range(0..4)).map(|i| format!("Person {}", i + r.gen_range(0..30))).collect()),
        metadata: maybe(rng, 0.6, |r| PageMetadata {
            author: maybe(r, 0.7, |r| format!("author {}", r.gen_range(0..20))),
            publish_date: None,
            topics: words(r, 25, 3),
            keywords: words(r, 80, 5),
            people: (0..r.gen_range(0..3)).map(|i| format!("Figure {i}")).collect(),
            organizations: (0..r.gen_range(0..2)).map(|i| format!("Org {i}")).collect(),
            countries: (0..r.gen_range(0..2)).map(|_| ["france", "japan", "chile"].choose(r).unwrap().to_string()).collect(),
            page_type: maybe(r, 0.5, |r| ["article", "gallery", "video"].choose(r).unwrap().to_string()),
        }),
        categories: maybe(rng, 0.7, |r| words(r, 12, 2)),
    }
}

fn random_store(rng: &mut ChaCha8Rng) -> UserStore {
    let geo = GeoTable::from_csv("10.0.0.0,10.0.127.255,US,CA,San Jose\n10.0.128.0,10.0.255.255,SI,,Ljubljana\n".as_bytes()).unwrap();
    let rule = |pattern: &str, browser: &str, os: &str, class: DeviceClass| DeviceRule {
        pattern: pattern.into(),
        browser: browser.into(),
        os: os.into(),
        device_class: class,
    };
    let devices = DeviceRules::new(vec![
        rule("iphone", "safari", "ios", DeviceClass::Mobile),
        rule("firefox", "firefox", "linux", DeviceClass::Desktop),
        rule("bot", "crawler", "", DeviceClass::Bot),
    ]);
    let engines = EngineRules::new([("google.com", "q"), ("bing.com", "q")]);
    let enricher = Enricher::new(geo, devices, engines, "Europe/Ljubljana").unwrap();
    let mut pages = PageStore::new(TokenRules::default());
    for p in 0..1500 {
        pages.upsert_page(random_page(rng, format!("https://www.news.test/s{}/a{p}", p % 7))).unwrap();
    }
    let mut store = UserStore::new(enricher.clone(), pages);
    let uas = ["Mozilla iPhone", "Mozilla Firefox", "SomeBot/1.0", "curl/8"];
    for u in 0..1000 {
        for _ in 0..10 {
            let p = rng.gen_range(0..1800);
            let mut ev = serde_json::json!({
                "user_id": format!("v{u}"),
                "ts": format!("2024-{:02}-{:02}T{:02}:{:02}:00Z", rng.gen_range(1..=12), rng.gen_range(1..=28), rng.gen_range(0..24), rng.gen_range(0..60)),
                "url": format!("https://{}.news.test/s{}/a{p}", ["www", "m", "sport"].choose(rng).unwrap(), p % 7),
            });
            if rng.gen_bool(0.8) {
                ev["ip"] = format!("10.{}.{}.{}", rng.gen_range(0..2), rng.gen_range(0..256), rng.gen_range(0..256)).into();
            }
            if rng.gen_bool(0.7) {
                ev["ua"] = uas.choose(rng).unwrap().to_string().into();
            }
            match rng.gen_range(0..4) {
                0 => ev["referrer"] = format!("https://www.google.com/search?q={}+{}", word(rng, 300), word(rng, 300)).into(),
                1 => ev["referrer"] = format!("https://blog{}.example.org/post", rng.gen_range(0..9)).into(),
                _ => {}
            }
            store.add_visit(enricher.parse_event(&ev.to_string()).unwrap());
        }
    }
    store
}

/// Checks unit norm and equal squared norm `1/F` over the `F` active blocks.
fn check_vector(v: &SparseVector, space: &FeatureSpace) -> Result<usize, String> {
    let norm = v.norm();
    ensure((norm - 1.0).abs() <= 1e-9, || format!("norm {norm}"))?;
    let sq: Vec<f64> = space
        .blocks()
        .iter()
        .map(|(_, range)| v.iter().filter(|(i, _)| range.contains(i)).map(|(_, x)| x * x).sum())
        .filter(|s: &f64| *s > 0.0)
        .collect();
    let f = sq.len() as f64;
    for s in &sq {
        ensure((s - 1.0 / f).abs() <= 1e-9, || format!("block squared norm {s}, expected 1/{f}"))?;
    }
    Ok(sq.len())
}

pub fn check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let store = random_store(&mut rng);
    let visits: usize = store.iter().map(|(_, _, r)| r.visits.len()).sum();
    ensure(visits == 10_000, || format!("generated {visits} visits"))?;
    let masks = [
        FeatureSetMask::ALL,
        FeatureSetMask::CONTEXT,
        FeatureSetMask::ALL_CONTENT,
        FeatureSetMask::TEXT,
        FeatureSetMask::ENTITIES,
        FeatureSetMask::METADATA,
    ];
    let (mut nonzero, mut zero, mut max_blocks) = (0usize, 0usize, 0usize);
    for &min_count in &[1usize, 3] {
        let space = FeatureSpace::build(&store, FeatureSetMask::ALL, min_count).map_err(|e| e.to_string())?;
        for (_, id, record) in store.iter() {
            for mask in masks {
                for visit in &record.visits {
                    let v = vectorize_visit(visit, &space, mask);
                    if v.is_zero() {
                        zero += 1;
                        continue;
                    }
                    nonzero += 1;
                    let f = check_vector(&v, &space).map_err(|e| format!("user {id}, mask {mask}, min count {min_count}: {e}"))?;
                    max_blocks = max_blocks.max(f);
                }
                let c = user_vector(record, &space, mask).map_err(|e| e.to_string())?;
                if !c.is_zero() {
                    let n = c.norm();
                    ensure((n - 1.0).abs() <= 1e-9, || format!("user {id}: centroid norm {n}"))?;
                }
            }
        }
    }
    Ok(format!(
        "{visits} visits x {} masks x 2 dictionaries: {nonzero} nonzero vectors checked, {zero} zero, up to {max_blocks} active blocks",
        masks.len()
    ))
}

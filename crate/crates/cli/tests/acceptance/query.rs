use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use segmodel_core::content::{PageRecord, PageStore, TokenRules};
use segmodel_core::fields::Field;
use segmodel_core::ingest::{DeviceRules, EngineRules, Enricher, GeoTable};
use segmodel_core::query::{evaluate, SegmentQuery};
use segmodel_core::users::{Gender, UserProfile, UserStore};

use crate::{ensure, Outcome};

const PAGES: usize = 8;
const STORED_PAGES: usize = 6;
const CATEGORIES: [&str; 3] = ["style", "sport", "travel"];
const DAYS: [&str; 7] = ["mon", "tue", "wed", "thu", "fri", "sat", "sun"];

struct RawVisit {
    page: usize,
    day: usize,
    hour: u32,
    net: u8,
}

struct RawUser {
    id: String,
    gender: Option<Gender>,
    age: Option<u32>,
    income: Option<i64>,
    visits: Vec<RawVisit>,
}

fn page_category(p: usize) -> Option<&'static str> {
    (p < STORED_PAGES).then(|| CATEGORIES[p % 3])
}

fn page_entity(p: usize) -> Option<String> {
    (p < STORED_PAGES && p % 2 == 0).then(|| format!("entity {}", p / 2))
}

fn country(net: u8) -> Option<&'static str> {
    match net {
        0 => Some("us"),
        1 => Some("si"),
        _ => None,
    }
}

fn random_users(rng: &mut ChaCha8Rng) -> Vec<RawUser> {
    let n = rng.gen_range(1..=500);
    let mut users = Vec::with_capacity(n);
    for i in 0..n {
        let visits: Vec<RawVisit> = if rng.gen_bool(0.85) {
            (0..rng.gen_range(1..=8))
                .map(|_| RawVisit {
                    page: rng.gen_range(0..PAGES),
                    day: rng.gen_range(0..7),
                    hour: rng.gen_range(0..24),
                    net: rng.gen_range(0..3),
                })
                .collect()
        } else {
            Vec::new()
        };
        let registered = visits.is_empty() || rng.gen_bool(0.6);
        let mut u = RawUser {
            id: format!("u{i:03}"),
            gender: None,
            age: None,
            income: None,
            visits,
        };
        if registered {
            u.gender = rng.gen_bool(0.8).then(|| if rng.gen_bool(0.5) { Gender::Female } else { Gender::Male });
            u.age = rng.gen_bool(0.7).then(|| rng.gen_range(0..=120));
            u.income = rng.gen_bool(0.6).then(|| rng.gen_range(0..200_000));
            if u.gender.is_none() && u.age.is_none() && u.income.is_none() {
                u.age = Some(30);
            }
        }
        users.push(u);
    }
    users
}

fn build_store(users: &[RawUser]) -> UserStore {
    let geo = GeoTable::from_csv(
        "10.0.0.0,10.0.0.255,US,,\n10.0.1.0,10.0.1.255,SI,,\n".as_bytes(),
    )
    .unwrap();
    let enricher = Enricher::new(geo, DeviceRules::default(), EngineRules::new([("google.com", "q")]), "UTC").unwrap();
    let mut pages = PageStore::new(TokenRules::default());
    for p in 0..STORED_PAGES {
        pages
            .upsert_page(PageRecord {
                url: format!("https://site.test/p{p}"),
                categories: Some(vec![page_category(p).unwrap().to_string()]),
                named_entities: page_entity(p).map(|e| vec![e.replace("entity", "Entity")]),
                ..Default::default()
            })
            .unwrap();
    }
    let mut store = UserStore::new(enricher.clone(), pages);
    for u in users {
        for v in &u.visits {
            let line = serde_json::json!({
                "user_id": u.id,
                "ts": format!("2024-01-{:02}T{:02}:15:00Z", 1 + v.day, v.hour),
                "url": format!("https://site.test/p{}", v.page),
                "ip": format!("10.0.{}.{}", v.net, 1 + v.page),
            })
            .to_string();
            store.add_visit(enricher.parse_event(&line).unwrap());
        }
        if u.gender.is_some() || u.age.is_some() || u.income.is_some() {
            store
                .set_profile(UserProfile {
                    user_id: u.id.clone(),
                    gender: u.gender,
                    age: u.age,
                    income: u.income,
                    job_title: None,
                })
                .unwrap();
        }
    }
    store
}

/// Direct evaluation over the raw generated data, independent of the store.
fn oracle(q: &SegmentQuery, u: &RawUser) -> bool {
    let any = |f: &dyn Fn(&RawVisit) -> bool| u.visits.iter().any(f);
    let within = |x: i64, lo: i64, hi: i64| lo <= x && x <= hi;
    let numeric = |f: Field, lo: i64, hi: i64| match f {
        Field::Age => u.age.is_some_and(|a| within(a as i64, lo, hi)),
        Field::Income => u.income.is_some_and(|x| within(x, lo, hi)),
        Field::HourOfDay => any(&|v| within(v.hour as i64, lo, hi)),
        other => panic!("no numeric oracle for {other:?}"),
    };
    match q {
        SegmentQuery::Eq(f, val) => match f {
            Field::Gender => u.gender.is_some_and(|g| g.as_str() == val),
            Field::Category => any(&|v| page_category(v.page) == Some(val.as_str())),
            Field::NamedEntities => any(&|v| page_entity(v.page).as_deref() == Some(val.as_str())),
            Field::Country => any(&|v| country(v.net) == Some(val.as_str())),
            Field::DayOfWeek => any(&|v| DAYS[v.day] == val),
            other => panic!("no token oracle for {other:?}"),
        },
        SegmentQuery::Ge(f, lo) => numeric(*f, *lo, i64::MAX),
        SegmentQuery::Le(f, hi) => numeric(*f, i64::MIN, *hi),
        SegmentQuery::Range(f, lo, hi) => numeric(*f, *lo, *hi),
        SegmentQuery::And(qs) => qs.iter().all(|q| oracle(q, u)),
        SegmentQuery::Or(qs) => qs.iter().any(|q| oracle(q, u)),
        SegmentQuery::Not(q) => !oracle(q, u),
    }
}

fn random_leaf(rng: &mut ChaCha8Rng) -> SegmentQuery {
    let pick = |rng: &mut ChaCha8Rng, xs: &[&str]| xs.choose(rng).unwrap().to_string();
    match rng.gen_range(0..8) {
        0 => SegmentQuery::Eq(Field::Gender, pick(rng, &["female", "male"])),
        1 => SegmentQuery::Eq(Field::Category, pick(rng, &["style", "sport", "travel", "tech"])),
        2 => SegmentQuery::Eq(Field::NamedEntities, pick(rng, &["entity 0", "entity 1", "entity 2", "entity 3"])),
        3 => SegmentQuery::Eq(Field::Country, pick(rng, &["us", "si", "de"])),
        4 => SegmentQuery::Eq(Field::DayOfWeek, pick(rng, &DAYS)),
        5 => {
            let lo = rng.gen_range(0..24);
            SegmentQuery::Range(Field::HourOfDay, lo, rng.gen_range(lo..24))
        }
        6 => match rng.gen_range(0..3) {
            0 => SegmentQuery::Ge(Field::Age, rng.gen_range(0..=120)),
            1 => SegmentQuery::Le(Field::Age, rng.gen_range(0..=120)),
            _ => {
                let lo = rng.gen_range(0..=100);
                SegmentQuery::Range(Field::Age, lo, lo + rng.gen_range(0..=40))
            }
        },
        _ => {
            let lo = rng.gen_range(0..150_000);
            SegmentQuery::Range(Field::Income, lo, lo + rng.gen_range(0..80_000))
        }
    }
}

fn random_query(rng: &mut ChaCha8Rng, depth: usize) -> SegmentQuery {
    if depth == 0 || rng.gen_bool(0.3) {
        return random_leaf(rng);
    }
    match rng.gen_range(0..3) {
        0 => SegmentQuery::Not(Box::new(random_query(rng, depth - 1))),
        k => {
            let parts = (0..rng.gen_range(2..=3)).map(|_| random_query(rng, depth - 1)).collect();
            if k == 1 {
                SegmentQuery::And(parts)
            } else {
                SegmentQuery::Or(parts)
            }
        }
    }
}

type Ids = BTreeSet<String>;

fn eval(q: &SegmentQuery, store: &UserStore) -> Result<Ids, String> {
    evaluate(q, store)
        .map(|s| s.into_vec().into_iter().collect())
        .map_err(|e| format!("{q}: {e}"))
}

pub fn check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut queries = 0;
    let mut nonempty = 0;
    for case in 0..200 {
        let users = random_users(&mut rng);
        let store = build_store(&users);
        ensure(store.len() == users.len(), || format!("store {case}: {} users, expected {}", store.len(), users.len()))?;
        for _ in 0..12 {
            let q = random_query(&mut rng, 4);
            let got = eval(&q, &store)?;
            let want: Ids = users.iter().filter(|u| oracle(&q, u)).map(|u| u.id.clone()).collect();
            ensure(got == want, || {
                format!("store {case}, query {q}: evaluate gave {} users, oracle {}", got.len(), want.len())
            })?;
            queries += 1;
            if !got.is_empty() {
                nonempty += 1;
            }

            let r = random_query(&mut rng, 3);
            let b = eval(&r, &store)?;
            let not = |x: &SegmentQuery| SegmentQuery::Not(Box::new(x.clone()));
            let and = eval(&SegmentQuery::And(vec![q.clone(), r.clone()]), &store)?;
            let or = eval(&SegmentQuery::Or(vec![q.clone(), r.clone()]), &store)?;
            ensure(and.is_subset(&got) && got.is_subset(&or) && and.is_subset(&b) && b.is_subset(&or), || {
                format!("store {case}: monotonicity fails for {q} / {r}")
            })?;
            let lhs = eval(&not(&SegmentQuery::And(vec![q.clone(), r.clone()])), &store)?;
            let rhs = eval(&SegmentQuery::Or(vec![not(&q), not(&r)]), &store)?;
            ensure(lhs == rhs, || format!("store {case}: De Morgan (and) fails for {q} / {r}"))?;
            let lhs = eval(&not(&SegmentQuery::Or(vec![q.clone(), r.clone()])), &store)?;
            let rhs = eval(&SegmentQuery::And(vec![not(&q), not(&r)]), &store)?;
            ensure(lhs == rhs, || format!("store {case}: De Morgan (or) fails for {q} / {r}"))?;
            let all: Ids = users.iter().map(|u| u.id.clone()).collect();
            let neg = eval(&not(&q), &store)?;
            ensure(neg.is_disjoint(&got) && neg.union(&got).cloned().collect::<Ids>() == all, || {
                format!("store {case}: NOT {q} is not the complement")
            })?;
        }
    }
    Ok(format!("200 stores, {queries} queries ({nonempty} non-empty), laws hold"))
}

//! Access-log parsing and context enrichment.
//!
//! Each JSON-lines record is turned into an [`AccessEvent`] carrying the four
//! context facets of a visit: time (day of week and hour under one configured
//! timezone), location (IPv4 range table), source (referrer domain and search
//! terms) and device (ordered user-agent rules).

mod device;
mod geo;
mod referrer;

use std::fmt;
use std::io::BufRead;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate, SubsecRound, Timelike, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use device::{DeviceClass, DeviceInfo, DeviceRule, DeviceRules};
pub use geo::{parse_ipv4, resolve_geo, GeoInfo, GeoRange, GeoTable};
pub use referrer::{parse_referrer, registered_domain, sub_domain, EngineRules, ReferrerInfo};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("invalid IPv4 address {0:?}")]
    InvalidIp(String),
    #[error("invalid geo table: {0}")]
    InvalidTable(String),
    #[error("invalid rule file: {0}")]
    InvalidRules(String),
    #[error("unknown timezone {0:?}")]
    UnknownTimezone(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayOfWeek {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl DayOfWeek {
    pub const ALL: [DayOfWeek; 7] = [
        DayOfWeek::Mon,
        DayOfWeek::Tue,
        DayOfWeek::Wed,
        DayOfWeek::Thu,
        DayOfWeek::Fri,
        DayOfWeek::Sat,
        DayOfWeek::Sun,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DayOfWeek::Mon => "mon",
            DayOfWeek::Tue => "tue",
            DayOfWeek::Wed => "wed",
            DayOfWeek::Thu => "thu",
            DayOfWeek::Fri => "fri",
            DayOfWeek::Sat => "sat",
            DayOfWeek::Sun => "sun",
        }
    }

    fn from_chrono(w: chrono::Weekday) -> Self {
        Self::ALL[w.num_days_from_monday() as usize]
    }
}

impl fmt::Display for DayOfWeek {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One enriched log interaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccessEvent {
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub url: String,
    pub referrer: Option<ReferrerInfo>,
    pub geo: Option<GeoInfo>,
    pub device: Option<DeviceInfo>,
    pub day_of_week: DayOfWeek,
    pub hour_of_day: u8,
    /// Calendar date of the visit in the configured timezone.
    pub local_date: NaiveDate,
}

impl AccessEvent {
    /// `YYYY-MM` of the local visit date.
    pub fn year_month(&self) -> String {
        format!("{:04}-{:02}", self.local_date.year(), self.local_date.month())
    }
}

/// The record layout accepted on input.
#[derive(Debug, Default, Deserialize)]
struct RawEvent {
    user_id: Option<String>,
    ts: Option<String>,
    url: Option<String>,
    referrer: Option<String>,
    ip: Option<String>,
    ua: Option<String>,
}

/// Lookup tables and timezone used to enrich raw records. Immutable after
/// construction and shared freely between threads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Enricher {
    pub geo: GeoTable,
    pub devices: DeviceRules,
    pub engines: EngineRules,
    timezone: String,
    #[serde(skip, default = "default_tz")]
    tz: Tz,
}

fn default_tz() -> Tz {
    Tz::UTC
}

impl Default for Enricher {
    fn default() -> Self {
        Self {
            geo: GeoTable::default(),
            devices: DeviceRules::default(),
            engines: EngineRules::default(),
            timezone: "UTC".into(),
            tz: Tz::UTC,
        }
    }
}

impl Enricher {
    pub fn new(
        geo: GeoTable,
        devices: DeviceRules,
        engines: EngineRules,
        timezone: &str,
    ) -> Result<Self, IngestError> {
        let tz = Tz::from_str(timezone).map_err(|_| IngestError::UnknownTimezone(timezone.into()))?;
        Ok(Self {
            geo,
            devices,
            engines,
            timezone: timezone.to_string(),
            tz,
        })
    }

    /// Re-resolves the timezone after deserialization.
    pub fn restore(mut self) -> Result<Self, IngestError> {
        self.tz = Tz::from_str(&self.timezone)
            .map_err(|_| IngestError::UnknownTimezone(self.timezone.clone()))?;
        Ok(self)
    }

    pub fn timezone(&self) -> &str {
        &self.timezone
    }

    /// Day of week and hour of `ts` in the configured timezone.
    pub fn time_context(&self, ts: DateTime<Utc>) -> (DayOfWeek, u8) {
        let local = ts.with_timezone(&self.tz);
        (DayOfWeek::from_chrono(local.weekday()), local.hour() as u8)
    }

    pub fn local_date(&self, ts: DateTime<Utc>) -> NaiveDate {
        ts.with_timezone(&self.tz).date_naive()
    }

    pub fn parse_event(&self, line: &str) -> Result<AccessEvent, IngestError> {
        let raw: RawEvent = serde_json::from_str(line)
            .map_err(|e| IngestError::MalformedRecord(format!("not a JSON record: {e}")))?;
        let user_id = required(raw.user_id, "user_id")?;
        let ts = required(raw.ts, "ts")?;
        let url = required(raw.url, "url")?;
        let timestamp = DateTime::parse_from_rfc3339(ts.trim())
            .map_err(|e| IngestError::MalformedRecord(format!("bad ts {ts:?}: {e}")))?
            .with_timezone(&Utc)
            .trunc_subsecs(0);
        let url = canonical_url(&url)
            .ok_or_else(|| IngestError::MalformedRecord(format!("url {url:?} is not absolute")))?;

        let referrer = raw
            .referrer
            .filter(|r| !r.trim().is_empty())
            .map(|r| parse_referrer(&r, &self.engines));
        // non-IPv4 addresses (IPv6 included) leave the location unknown
        let geo = raw
            .ip
            .as_deref()
            .and_then(|ip| parse_ipv4(ip).ok())
            .and_then(|ip| self.geo.lookup(ip).cloned());
        let device = raw
            .ua
            .filter(|ua| !ua.trim().is_empty())
            .map(|ua| self.devices.classify(&ua));
        let (day_of_week, hour_of_day) = self.time_context(timestamp);

        Ok(AccessEvent {
            user_id,
            timestamp,
            url,
            referrer,
            geo,
            device,
            day_of_week,
            hour_of_day,
            local_date: self.local_date(timestamp),
        })
    }

    /// Parses every line of `reader`, skipping and counting malformed ones.
    /// Blank lines are ignored.
    pub fn read_events<R: BufRead>(&self, reader: R) -> Result<(Vec<AccessEvent>, IngestStats), IngestError> {
        let mut stats = IngestStats::default();
        let mut events = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match self.parse_event(&line) {
                Ok(ev) => {
                    stats.accepted += 1;
                    events.push(ev);
                }
                Err(IngestError::MalformedRecord(_)) => stats.malformed += 1,
                Err(e) => return Err(e),
            }
        }
        Ok((events, stats))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub accepted: usize,
    pub malformed: usize,
}

fn required(field: Option<String>, name: &str) -> Result<String, IngestError> {
    match field {
        Some(v) if !v.trim().is_empty() => Ok(v),
        _ => Err(IngestError::MalformedRecord(format!("missing or empty {name}"))),
    }
}

/// Lowercases scheme and host and leaves the rest of the URL untouched.
/// Returns `None` for strings that are not absolute URLs.
pub fn canonical_url(url: &str) -> Option<String> {
    let url = url.trim();
    let (scheme, rest) = url.split_once("://")?;
    if scheme.is_empty() || !scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c)) {
        return None;
    }
    let host_end = rest.find(['/', '?', '#']).unwrap_or(rest.len());
    let (host, tail) = rest.split_at(host_end);
    if host.is_empty() {
        return None;
    }
    Some(format!("{}://{}{}", scheme.to_ascii_lowercase(), host.to_lowercase(), tail))
}

/// Host part of an absolute URL, without port or credentials.
pub fn url_host(url: &str) -> Option<&str> {
    let (_, rest) = url.split_once("://")?;
    let authority = &rest[..rest.find(['/', '?', '#']).unwrap_or(rest.len())];
    let host = authority.rsplit('@').next()?;
    let host = if host.starts_with('[') {
        &host[..host.find(']').map(|i| i + 1).unwrap_or(host.len())]
    } else {
        host.split(':').next()?
    };
    (!host.is_empty()).then_some(host)
}

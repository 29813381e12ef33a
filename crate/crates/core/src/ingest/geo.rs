//! Local IPv4 range table standing in for a GeoIP service.

use std::io::Read;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// Location decoded from a visitor's IP. Either all three parts are known or
/// the whole value is absent.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeoInfo {
    pub country: String,
    pub state: String,
    pub city: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoRange {
    pub start: u32,
    pub end: u32,
    pub info: GeoInfo,
}

/// Sorted, non-overlapping inclusive IPv4 ranges.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeoTable {
    ranges: Vec<GeoRange>,
}

impl GeoTable {
    /// Builds a table from arbitrary-order ranges. Fails when a range is
    /// inverted or two ranges overlap.
    pub fn new(mut ranges: Vec<GeoRange>) -> Result<Self, IngestError> {
        ranges.sort_by_key(|r| (r.start, r.end));
        for r in &ranges {
            if r.start > r.end {
                return Err(IngestError::InvalidTable(format!(
                    "range {}-{} is inverted",
                    Ipv4Addr::from(r.start),
                    Ipv4Addr::from(r.end)
                )));
            }
        }
        for pair in ranges.windows(2) {
            if pair[0].end >= pair[1].start {
                return Err(IngestError::InvalidTable(format!(
                    "ranges starting at {} and {} overlap",
                    Ipv4Addr::from(pair[0].start),
                    Ipv4Addr::from(pair[1].start)
                )));
            }
        }
        Ok(Self { ranges })
    }

    /// Reads `start_ip,end_ip,country,state,city` rows. A leading header row
    /// and `#` comment lines are skipped.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, IngestError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut ranges = Vec::new();
        for (line, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| IngestError::InvalidTable(e.to_string()))?;
            if line == 0 && row.get(0) == Some("start_ip") {
                continue;
            }
            if row.len() != 5 {
                return Err(IngestError::InvalidTable(format!(
                    "row {}: expected 5 columns, found {}",
                    line + 1,
                    row.len()
                )));
            }
            let start = parse_ipv4(&row[0])?;
            let end = parse_ipv4(&row[1])?;
            ranges.push(GeoRange {
                start,
                end,
                info: GeoInfo {
                    country: row[2].to_string(),
                    state: row[3].to_string(),
                    city: row[4].to_string(),
                },
            });
        }
        Self::new(ranges)
    }

    pub fn ranges(&self) -> &[GeoRange] {
        &self.ranges
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    /// Binary search for the range containing `ip`.
    pub fn lookup(&self, ip: u32) -> Option<&GeoInfo> {
        let idx = self.ranges.partition_point(|r| r.start <= ip);
        if idx == 0 {
            return None;
        }
        let candidate = &self.ranges[idx - 1];
        (ip <= candidate.end).then_some(&candidate.info)
    }
}

pub fn parse_ipv4(ip: &str) -> Result<u32, IngestError> {
    ip.trim()
        .parse::<Ipv4Addr>()
        .map(u32::from)
        .map_err(|_| IngestError::InvalidIp(ip.to_string()))
}

/// Resolves a dotted-quad address against `table`.
pub fn resolve_geo(ip: &str, table: &GeoTable) -> Result<Option<GeoInfo>, IngestError> {
    let ip = parse_ipv4(ip)?;
    Ok(table.lookup(ip).cloned())
}

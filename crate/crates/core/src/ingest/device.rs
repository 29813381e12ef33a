use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviceClass {
    Desktop,
    Mobile,
    Tablet,
    Bot,
    Unknown,
}

impl DeviceClass {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceClass::Desktop => "desktop",
            DeviceClass::Mobile => "mobile",
            DeviceClass::Tablet => "tablet",
            DeviceClass::Bot => "bot",
            DeviceClass::Unknown => "unknown",
        }
    }
}

impl fmt::Display for DeviceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DeviceClass {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "desktop" => Ok(DeviceClass::Desktop),
            "mobile" => Ok(DeviceClass::Mobile),
            "tablet" => Ok(DeviceClass::Tablet),
            "bot" => Ok(DeviceClass::Bot),
            "unknown" | "" => Ok(DeviceClass::Unknown),
            other => Err(IngestError::InvalidRules(format!("unknown device class {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceInfo {
    pub user_agent_raw: String,
    pub browser: String,
    pub os: String,
    pub device_class: DeviceClass,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceRule {
    /// Lowercased substring matched against the lowercased user agent.
    pub pattern: String,
    pub browser: String,
    pub os: String,
    pub device_class: DeviceClass,
}

/// Ordered user-agent rules; the first rule whose pattern occurs in the
/// user agent decides browser, OS and device class.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceRules {
    rules: Vec<DeviceRule>,
}

impl DeviceRules {
    pub fn new(rules: Vec<DeviceRule>) -> Self {
        let rules = rules
            .into_iter()
            .map(|mut r| {
                r.pattern = r.pattern.to_lowercase();
                r
            })
            .collect();
        Self { rules }
    }

    /// Reads `pattern,browser,os,device_class` rows in priority order.
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
            if line == 0 && row.get(0) == Some("pattern") {
                continue;
            }
            if row.len() != 4 {
                return Err(IngestError::InvalidRules(format!(
                    "device rule row {}: expected 4 columns, found {}",
                    line + 1,
                    row.len()
                )));
            }
            if row[0].is_empty() {
                return Err(IngestError::InvalidRules(format!(
                    "device rule row {}: empty pattern",
                    line + 1
                )));
            }
            rules.push(DeviceRule {
                pattern: row[0].to_string(),
                browser: non_empty_or_unknown(&row[1]),
                os: non_empty_or_unknown(&row[2]),
                device_class: row[3].parse()?,
            });
        }
        Ok(Self::new(rules))
    }

    pub fn rules(&self) -> &[DeviceRule] {
        &self.rules
    }

    pub fn classify(&self, user_agent: &str) -> DeviceInfo {
        let lowered = user_agent.to_lowercase();
        match self.rules.iter().find(|r| lowered.contains(&r.pattern)) {
            Some(rule) => DeviceInfo {
                user_agent_raw: user_agent.to_string(),
                browser: rule.browser.clone(),
                os: rule.os.clone(),
                device_class: rule.device_class,
            },
            None => DeviceInfo {
                user_agent_raw: user_agent.to_string(),
                browser: "unknown".into(),
                os: "unknown".into(),
                device_class: DeviceClass::Unknown,
            },
        }
    }
}

fn non_empty_or_unknown(s: &str) -> String {
    if s.is_empty() {
        "unknown".into()
    } else {
        s.to_lowercase()
    }
}

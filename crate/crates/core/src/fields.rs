//! The vocabulary of user and visit fields.
//!
//! Every field is either user-level (registration data) or visit-level
//! (derived from an access event and the visited page). Visit-level fields
//! are also the namespaces of the feature space; registration fields are only
//! used to define segments and never become features.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::users::{UserProfile, Visit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    // access-log context
    Domain,
    SubDomain,
    PageUrl,
    RefSearchTerm,
    RefDomain,
    RefUrl,
    Country,
    State,
    City,
    Date,
    DayOfWeek,
    HourOfDay,
    UserAgent,
    // page text
    PageTitle,
    PageContent,
    // annotations
    NamedEntities,
    // editorial metadata
    MetaTags,
    Category,
    Author,
    Topics,
    Keywords,
    People,
    Organizations,
    MentionedCountries,
    PageType,
    PublishDate,
    // registration data
    Gender,
    Age,
    Income,
    JobTitle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    User,
    Visit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Categorical,
    Numeric,
}

/// Feature-set groups used by ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureGroup {
    Context,
    Text,
    Entities,
    Metadata,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [
        FeatureGroup::Context,
        FeatureGroup::Text,
        FeatureGroup::Entities,
        FeatureGroup::Metadata,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Context => "context",
            FeatureGroup::Text => "text",
            FeatureGroup::Entities => "entities",
            FeatureGroup::Metadata => "metadata",
        }
    }
}

const HOURS: [&str; 24] = [
    "h00", "h01", "h02", "h03", "h04", "h05", "h06", "h07", "h08", "h09", "h10", "h11", "h12", "h13", "h14",
    "h15", "h16", "h17", "h18", "h19", "h20", "h21", "h22", "h23",
];

impl Field {
    pub const ALL: [Field; 30] = [
        Field::Domain,
        Field::SubDomain,
        Field::PageUrl,
        Field::RefSearchTerm,
        Field::RefDomain,
        Field::RefUrl,
        Field::Country,
        Field::State,
        Field::City,
        Field::Date,
        Field::DayOfWeek,
        Field::HourOfDay,
        Field::UserAgent,
        Field::PageTitle,
        Field::PageContent,
        Field::NamedEntities,
        Field::MetaTags,
        Field::Category,
        Field::Author,
        Field::Topics,
        Field::Keywords,
        Field::People,
        Field::Organizations,
        Field::MentionedCountries,
        Field::PageType,
        Field::PublishDate,
        Field::Gender,
        Field::Age,
        Field::Income,
        Field::JobTitle,
    ];

    /// Visit-level fields in namespace order.
    pub fn visit_fields() -> impl Iterator<Item = Field> {
        Self::ALL.into_iter().filter(|f| f.level() == Level::Visit)
    }

    pub fn name(self) -> &'static str {
        match self {
            Field::Domain => "domain",
            Field::SubDomain => "sub_domain",
            Field::PageUrl => "page_url",
            Field::RefSearchTerm => "ref_search_term",
            Field::RefDomain => "ref_domain",
            Field::RefUrl => "ref_url",
            Field::Country => "country",
            Field::State => "state",
            Field::City => "city",
            Field::Date => "date",
            Field::DayOfWeek => "day_of_week",
            Field::HourOfDay => "hour_of_day",
            Field::UserAgent => "user_agent",
            Field::PageTitle => "page_title",
            Field::PageContent => "page_content",
            Field::NamedEntities => "named_entities",
            Field::MetaTags => "meta_tags",
            Field::Category => "category",
            Field::Author => "author",
            Field::Topics => "topics",
            Field::Keywords => "keywords",
            Field::People => "people",
            Field::Organizations => "organizations",
            Field::MentionedCountries => "mentioned_countries",
            Field::PageType => "page_type",
            Field::PublishDate => "publish_date",
            Field::Gender => "gender",
            Field::Age => "age",
            Field::Income => "income",
            Field::JobTitle => "job_title",
        }
    }

    pub fn level(self) -> Level {
        match self {
            Field::Gender | Field::Age | Field::Income | Field::JobTitle => Level::User,
            _ => Level::Visit,
        }
    }

    pub fn kind(self) -> Kind {
        match self {
            Field::Age | Field::Income | Field::HourOfDay => Kind::Numeric,
            _ => Kind::Categorical,
        }
    }

    /// Ablation group of a visit-level field; `None` for registration fields.
    pub fn group(self) -> Option<FeatureGroup> {
        use Field::*;
        match self {
            Domain | SubDomain | PageUrl | RefSearchTerm | RefDomain | RefUrl | Country | State | City | Date
            | DayOfWeek | HourOfDay | UserAgent => Some(FeatureGroup::Context),
            PageTitle | PageContent => Some(FeatureGroup::Text),
            NamedEntities => Some(FeatureGroup::Entities),
            MetaTags | Category | Author | Topics | Keywords | People | Organizations | MentionedCountries
            | PageType | PublishDate => Some(FeatureGroup::Metadata),
            Gender | Age | Income | JobTitle => None,
        }
    }

    /// Categorical tokens of this visit-level field. Missing data yields no
    /// tokens. Repeated tokens are kept; they carry term frequency.
    pub fn visit_tokens(self, visit: &Visit) -> Vec<Cow<'_, str>> {
        let ev = &visit.event;
        let page = visit.page.as_ref().map(|p| &p.features);
        let page_list = |pick: fn(&crate::content::PageFeatures) -> &Vec<String>| match page {
            Some(f) => borrowed(pick(f)),
            None => Vec::new(),
        };
        match self {
            Field::Domain => visit
                .host()
                .map(|h| vec![Cow::Owned(crate::ingest::registered_domain(h))])
                .unwrap_or_default(),
            Field::SubDomain => visit
                .host()
                .and_then(crate::ingest::sub_domain)
                .map(|s| vec![Cow::Owned(s)])
                .unwrap_or_default(),
            Field::PageUrl => vec![Cow::Owned(page_url_token(&ev.url))],
            Field::RefSearchTerm => ev.referrer.as_ref().map(|r| borrowed(&r.search_terms)).unwrap_or_default(),
            Field::RefDomain => ev
                .referrer
                .as_ref()
                .map(|r| vec![Cow::Borrowed(r.referring_domain.as_str())])
                .unwrap_or_default(),
            Field::RefUrl => ev
                .referrer
                .as_ref()
                .map(|r| vec![Cow::Owned(r.referring_url.trim().to_lowercase())])
                .unwrap_or_default(),
            Field::Country => geo_token(ev.geo.as_ref().map(|g| g.country.as_str())),
            Field::State => geo_token(ev.geo.as_ref().map(|g| g.state.as_str())),
            Field::City => geo_token(ev.geo.as_ref().map(|g| g.city.as_str())),
            Field::Date => vec![Cow::Owned(ev.year_month())],
            Field::DayOfWeek => vec![Cow::Borrowed(ev.day_of_week.as_str())],
            Field::HourOfDay => vec![Cow::Borrowed(HOURS[ev.hour_of_day as usize % 24])],
            Field::UserAgent => match &ev.device {
                Some(d) => [d.browser.as_str(), d.os.as_str(), d.device_class.as_str()]
                    .into_iter()
                    .filter(|s| *s != "unknown" && !s.is_empty())
                    .map(|s| Cow::Owned(s.to_lowercase()))
                    .collect(),
                None => Vec::new(),
            },
            Field::PageTitle => page_list(|f| &f.title),
            Field::PageContent => page_list(|f| &f.content),
            Field::NamedEntities => page_list(|f| &f.entities),
            Field::MetaTags => page_list(|f| &f.meta_tags),
            Field::Category => page_list(|f| &f.categories),
            Field::Author => page_list(|f| &f.author),
            Field::Topics => page_list(|f| &f.topics),
            Field::Keywords => page_list(|f| &f.keywords),
            Field::People => page_list(|f| &f.people),
            Field::Organizations => page_list(|f| &f.organizations),
            Field::MentionedCountries => page_list(|f| &f.countries),
            Field::PageType => page_list(|f| &f.page_type),
            Field::PublishDate => page_list(|f| &f.publish_date),
            Field::Gender | Field::Age | Field::Income | Field::JobTitle => Vec::new(),
        }
    }

    /// Numeric value of a visit-level numeric field.
    pub fn visit_number(self, visit: &Visit) -> Option<i64> {
        match self {
            Field::HourOfDay => Some(visit.event.hour_of_day as i64),
            _ => None,
        }
    }

    /// Categorical token of a user-level field.
    pub fn profile_token(self, profile: &UserProfile) -> Option<String> {
        match self {
            Field::Gender => profile.gender.map(|g| g.as_str().to_string()),
            Field::JobTitle => profile
                .job_title
                .as_deref()
                .map(|j| j.trim().to_lowercase())
                .filter(|j| !j.is_empty()),
            _ => None,
        }
    }

    /// Numeric value of a user-level numeric field.
    pub fn profile_number(self, profile: &UserProfile) -> Option<i64> {
        match self {
            Field::Age => profile.age.map(i64::from),
            Field::Income => profile.income,
            _ => None,
        }
    }
}

fn borrowed(v: &[String]) -> Vec<Cow<'_, str>> {
    v.iter().map(|s| Cow::Borrowed(s.as_str())).collect()
}

fn geo_token(v: Option<&str>) -> Vec<Cow<'_, str>> {
    match v.map(str::trim) {
        Some(s) if !s.is_empty() => vec![Cow::Owned(s.to_lowercase())],
        _ => Vec::new(),
    }
}

/// Page URL without query string or fragment.
pub fn page_url_token(url: &str) -> String {
    let end = url.find(['?', '#']).unwrap_or(url.len());
    url[..end].to_string()
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown field {0:?}")]
pub struct UnknownField(pub String);

impl FromStr for Field {
    type Err = UnknownField;

    /// Case-insensitive; spaces and dashes are read as underscores, and a few
    /// short aliases are accepted.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '-' { '_' } else { c })
            .collect();
        let alias = match norm.as_str() {
            "subdomain" => Some(Field::SubDomain),
            "url" => Some(Field::PageUrl),
            "title" => Some(Field::PageTitle),
            "content" => Some(Field::PageContent),
            "entities" | "entity" => Some(Field::NamedEntities),
            "categories" => Some(Field::Category),
            "search_term" | "search_terms" | "ref_search_terms" => Some(Field::RefSearchTerm),
            "referrer" | "referring_domain" => Some(Field::RefDomain),
            "referring_url" => Some(Field::RefUrl),
            "dow" | "day" => Some(Field::DayOfWeek),
            "hour" => Some(Field::HourOfDay),
            "device" | "ua" => Some(Field::UserAgent),
            "job" => Some(Field::JobTitle),
            _ => None,
        };
        alias
            .or_else(|| Field::ALL.into_iter().find(|f| f.name() == norm))
            .ok_or_else(|| UnknownField(s.to_string()))
    }
}

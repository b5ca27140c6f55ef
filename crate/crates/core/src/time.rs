//! UTC timestamps with millisecond precision (`2023-12-15T23:55:57.461Z`).

use std::fmt;

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(DateTime<Utc>);

impl Timestamp {
    pub fn now() -> Self {
        Self::from_millis(Utc::now().timestamp_millis())
    }

    /// Values outside the representable range saturate at its ends.
    pub fn from_millis(ms: i64) -> Self {
        let max = DateTime::<Utc>::MAX_UTC.timestamp_millis();
        let min = DateTime::<Utc>::MIN_UTC.timestamp_millis();
        Timestamp(Utc.timestamp_millis_opt(ms.clamp(min, max)).single().unwrap_or_default())
    }

    pub fn millis(&self) -> i64 {
        self.0.timestamp_millis()
    }

    pub fn datetime(&self) -> DateTime<Utc> {
        self.0
    }

    /// Parses the exact textual form produced by `Display`; any other
    /// spelling of the same instant is rejected.
    pub fn parse(s: &str) -> Result<Self> {
        let parsed = DateTime::parse_from_rfc3339(s)
            .map_err(|e| Error::MalformedTimestamp(format!("timestamp `{s}`: {e}")))?;
        let ts = Self::from_millis(parsed.timestamp_millis());
        if ts.to_string() != s {
            return Err(Error::MalformedTimestamp(format!(
                "timestamp `{s}` is not in canonical form"
            )));
        }
        Ok(ts)
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_rfc3339_opts(SecondsFormat::Millis, true))
    }
}

impl fmt::Debug for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Timestamp({self})")
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Timestamp::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Human age of `then` as seen from `now`, e.g. "29 days" or "about 14 hours".
pub fn relative_age(then: Timestamp, now: Timestamp) -> String {
    let secs = (now.millis() - then.millis()).max(0) / 1000;
    let minutes = (secs + 30) / 60;
    const DAY: i64 = 1440;
    const MONTH: i64 = 43_200;
    match minutes {
        0 => "less than a minute".into(),
        1 => "1 minute".into(),
        2..=44 => format!("{minutes} minutes"),
        45..=89 => "about 1 hour".into(),
        90..=1439 => format!("about {} hours", (minutes + 30) / 60),
        1440..=2519 => "1 day".into(),
        2520..=43_199 => format!("{} days", (minutes + DAY / 2) / DAY),
        43_200..=86_399 => "about 1 month".into(),
        86_400..=525_599 => format!("{} months", (minutes + MONTH / 2) / MONTH),
        _ => {
            let years = minutes / 525_600;
            if years == 1 {
                "about 1 year".into()
            } else {
                format!("about {years} years")
            }
        }
    }
}

//! Flat `key = value` configuration documents.
//!
//! Sections are spelled as dotted keys (`tdma.slot_duration_s = 0.01`). Lists
//! are comma separated. Relative paths resolve against the directory of the
//! file they appear in. Every key must be one of [`KNOWN_KEYS`]; which ones
//! are required depends on the consumer.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const KNOWN_KEYS: &[&str] = &[
    "scenario.user_counts",
    "scenario.sim_end_s",
    "scenario.runs",
    "scenario.base_seed",
    "tdma.slot_duration_s",
    "tdma.slots_per_frame",
    "tdma.retransmission_attempts",
    "radio.range_km",
    "radio.snr_table",
    "link.p_tx_dbm",
    "link.g_tx_dbi",
    "link.l_tx_db",
    "link.g_rx_dbi",
    "link.l_rx_db",
    "link.f_mhz",
    "link.noise_figure_db",
    "link.n0_dbm_hz",
    "link.bandwidth_hz",
    "link.calibration_distance_km",
    "link.calibration_snr_db",
    "oca.center_km",
    "oca.range_km",
    "mobility.source",
    "mobility.file",
    "mobility.altitude_km",
    "mobility.speed_km_s",
    "mobility.margin_km",
    "mobility.max_offset_fraction",
    "traffic.manifest",
    "traffic.payload_bytes",
    "validate.distances_km",
    "validate.packets_per_distance",
    "validate.seed",
    "validate.range_km",
    "output.packet_log",
];

/// A configuration problem, located by file and line where possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: Option<PathBuf>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn new(message: impl Into<String>) -> Self {
        ConfigError {
            file: None,
            line: None,
            message: message.into(),
        }
    }

    pub fn at(file: Option<&Path>, line: Option<usize>, message: impl Into<String>) -> Self {
        ConfigError {
            file: file.map(Path::to_path_buf),
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line) {
            (Some(file), Some(line)) => write!(f, "{}:{}: {}", file.display(), line, self.message),
            (Some(file), None) => write!(f, "{}: {}", file.display(), self.message),
            (None, Some(line)) => write!(f, "line {}: {}", line, self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug)]
pub struct ConfigDocument {
    path: Option<PathBuf>,
    entries: BTreeMap<String, Entry>,
    read: RefCell<BTreeSet<String>>,
}

impl ConfigDocument {
    pub fn parse(text: &str, path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(ConfigError::at(path, Some(line), format!("expected `key = value`, found `{trimmed}`")));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::at(path, Some(line), format!("unknown key `{key}`")));
            }
            let entry = Entry {
                value: value.trim().to_owned(),
                line,
            };
            if let Some(previous) = entries.insert(key.to_owned(), entry) {
                return Err(ConfigError::at(
                    path,
                    Some(line),
                    format!("`{key}` already set on line {}", previous.line),
                ));
            }
        }
        Ok(ConfigDocument {
            path: path.map(Path::to_path_buf),
            entries,
            read: RefCell::new(BTreeSet::new()),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError::at(Some(path), None, format!("cannot read config: {e}")))?;
        Self::parse(&text, Some(path))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    /// Keys present in the document that no getter has looked at.
    pub fn unread_keys(&self) -> Vec<String> {
        let read = self.read.borrow();
        self.entries.keys().filter(|k| !read.contains(*k)).cloned().collect()
    }

    /// Keys set in the document, in sorted order.
    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Error helper pointing at `key`'s line.
    pub fn error(&self, key: &str, message: impl Into<String>) -> ConfigError {
        let line = self.entries.get(key).map(|e| e.line);
        ConfigError::at(self.path(), line, message)
    }

    fn raw(&self, key: &str) -> Option<&Entry> {
        debug_assert!(KNOWN_KEYS.contains(&key), "{key}");
        self.read.borrow_mut().insert(key.to_owned());
        self.entries.get(key)
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::at(self.path(), None, format!("missing required key `{key}`"))
    }

    pub fn optional<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        let Some(entry) = self.raw(key) else {
            return Ok(None);
        };
        entry.value.parse().map(Some).map_err(|_| {
            ConfigError::at(
                self.path(),
                Some(entry.line),
                format!("`{key}`: cannot parse `{}` as {}", entry.value, short_type::<T>()),
            )
        })
    }

    pub fn required<T: FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.optional(key)?.ok_or_else(|| self.missing(key))
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.optional(key)?.unwrap_or(default))
    }

    pub fn optional_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some(entry) = self.raw(key) else {
            return Ok(None);
        };
        entry
            .value
            .split(',')
            .map(|item| {
                let item = item.trim();
                item.parse().map_err(|_| {
                    ConfigError::at(
                        self.path(),
                        Some(entry.line),
                        format!("`{key}`: cannot parse list item `{item}` as {}", short_type::<T>()),
                    )
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    pub fn required_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, ConfigError> {
        self.optional_list(key)?.ok_or_else(|| self.missing(key))
    }

    /// Path value resolved against the document's directory.
    pub fn optional_path(&self, key: &str) -> Result<Option<PathBuf>, ConfigError> {
        let Some(entry) = self.raw(key) else {
            return Ok(None);
        };
        let p = PathBuf::from(&entry.value);
        if p.is_absolute() {
            return Ok(Some(p));
        }
        let base = self.path.as_deref().and_then(Path::parent).unwrap_or(Path::new(""));
        Ok(Some(base.join(p)))
    }

    pub fn required_path(&self, key: &str) -> Result<PathBuf, ConfigError> {
        self.optional_path(key)?.ok_or_else(|| self.missing(key))
    }
}

fn short_type<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    match name {
        "f64" => "a real number",
        "bool" => "true/false",
        "alloc::string::String" => "a string",
        n if n.starts_with('u') || n.starts_with('i') => "an integer",
        n => n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = "\
# comment
scenario.runs = 10
scenario.user_counts = 100, 200,300
tdma.slot_duration_s=0.01
output.packet_log = true
radio.snr_table = tables/x.csv
";

    #[test]
    fn typed_getters() {
        let doc = ConfigDocument::parse(DOC, Some(Path::new("/etc/aero/run.conf"))).unwrap();
        assert_eq!(doc.required::<u32>("scenario.runs").unwrap(), 10);
        assert_eq!(doc.required_list::<usize>("scenario.user_counts").unwrap(), vec![100, 200, 300]);
        assert_eq!(doc.required::<f64>("tdma.slot_duration_s").unwrap(), 0.01);
        assert!(doc.required::<bool>("output.packet_log").unwrap());
        assert_eq!(
            doc.required_path("radio.snr_table").unwrap(),
            PathBuf::from("/etc/aero/tables/x.csv")
        );
        assert_eq!(doc.or("traffic.payload_bytes", 100u32).unwrap(), 100);
        assert!(doc.unread_keys().is_empty());
    }

    #[test]
    fn errors_name_file_and_line() {
        let err = ConfigDocument::parse("scenario.runs = 1\nbogus.key = 3\n", Some(Path::new("a.conf"))).unwrap_err();
        assert_eq!(err.to_string(), "a.conf:2: unknown key `bogus.key`");
        let err = ConfigDocument::parse("scenario.runs\n", None).unwrap_err();
        assert_eq!(err.line, Some(1));
        let err = ConfigDocument::parse("scenario.runs=1\nscenario.runs=2", None).unwrap_err();
        assert!(err.message.contains("already set on line 1"));

        let doc = ConfigDocument::parse("scenario.runs = ten\n", Some(Path::new("b.conf"))).unwrap();
        let err = doc.required::<u32>("scenario.runs").unwrap_err();
        assert_eq!(err.to_string(), "b.conf:1: `scenario.runs`: cannot parse `ten` as an integer");
        let err = doc.required::<f64>("scenario.sim_end_s").unwrap_err();
        assert!(err.to_string().contains("missing required key `scenario.sim_end_s`"));
    }

    #[test]
    fn missing_file_names_path() {
        let err = ConfigDocument::load(Path::new("/nonexistent/x.conf")).unwrap_err();
        assert!(err.to_string().starts_with("/nonexistent/x.conf: cannot read config"));
    }
}

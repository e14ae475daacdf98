//! `key = value` text: the dataset sidecar and the experiment config file.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use super::{DataError, Dataset};

/// `<path>.meta`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name: OsString = path.as_os_str().to_os_string();
    name.push(".meta");
    PathBuf::from(name)
}

pub fn describe(ds: &Dataset) -> String {
    let c = &ds.config;
    let s = &c.system;
    let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    line("n", s.n.to_string());
    line("m", s.m.to_string());
    line("k", s.k.to_string());
    line("ns", s.ns.to_string());
    line("snr_db", format!("{}", s.snr_db()));
    line("channel_model", c.channel.kind().name().to_string());
    line("feeder", c.feeder.name().to_string());
    line("seed", c.seed.to_string());
    line("q", ds.samples.len().to_string());
    line("ceo_iterations", c.ceo.iterations.to_string());
    line("ceo_candidates", c.ceo.candidates.to_string());
    line("ceo_elite_ratio", c.ceo.elite_ratio.to_string());
    line("ceo_smoothing", c.ceo.smoothing.to_string());
    line("ceo_p_floor", c.ceo.p_floor.to_string());
    line("created_unix", created.to_string());
    out
}

pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, DataError> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| DataError::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let key = k.trim();
        if key.is_empty() {
            return Err(DataError::Config(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(DataError::Config(format!("line {}: duplicate key {key:?}", lineno + 1)));
        }
    }
    Ok(map)
}

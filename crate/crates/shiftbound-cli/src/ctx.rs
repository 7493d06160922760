//! Configuration resolution: command-line flags override the optional JSON
//! config file; the seed falls back to `SHIFTBOUND_SEED` and then to the
//! library default.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde_json::{Map, Value};
use shiftbound::error::Error;

use crate::emit::Format;

/// CLI failure modes mapped onto the exit-code contract: configuration and
/// precondition problems exit 2, verification/simulation failures exit 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Failure(String),
}

impl CliError {
    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Failure(m) => m,
        }
    }

    pub fn code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Failure(_) => ExitCode::from(1),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Precondition(_) | Error::Domain(_) | Error::DimensionMismatch { .. } => {
                CliError::Config(e.to_string())
            }
            Error::Simulation { .. } | Error::Integration(_) => CliError::Failure(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Every key a config file may define; anything else is rejected so typos
/// fail loudly instead of silently falling back to defaults.
const KNOWN_KEYS: &[&str] = &[
    "a", "alpha", "beta", "big-lambda", "c", "c0", "c1", "cap", "cases", "density", "eps", "fa",
    "fb", "fisher", "floor", "format", "grid", "h", "halvings", "L", "lambda", "mc", "N", "ns",
    "output", "p", "paths", "potential", "q", "q0", "q1", "scale", "seed", "sigma2", "sqdist",
    "steps", "T", "threads", "x", "x0", "y", "y0",
];

pub struct Ctx {
    cfg: Map<String, Value>,
    seed_flag: Option<u64>,
    format_flag: Option<Format>,
    pub output: Option<PathBuf>,
    threads_flag: Option<usize>,
}

impl Ctx {
    pub fn load(
        config: Option<&Path>,
        seed_flag: Option<u64>,
        format_flag: Option<Format>,
        output: Option<PathBuf>,
        threads_flag: Option<usize>,
    ) -> CliResult<Self> {
        let cfg = match config {
            None => Map::new(),
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", path.display()))
                })?;
                let value: Value = serde_json::from_str(&text).map_err(|e| {
                    CliError::Config(format!("config {} is not valid JSON: {e}", path.display()))
                })?;
                let Value::Object(map) = value else {
                    return Err(CliError::Config(format!(
                        "config {} must be a JSON object of parameters",
                        path.display()
                    )));
                };
                for key in map.keys() {
                    if !KNOWN_KEYS.contains(&key.as_str()) {
                        return Err(CliError::Config(format!(
                            "unknown config key \"{key}\""
                        )));
                    }
                }
                map
            }
        };
        Ok(Ctx { cfg, seed_flag, format_flag, output, threads_flag })
    }

    fn missing(key: &str) -> CliError {
        CliError::Config(format!(
            "missing required parameter `{key}` (pass --{key} or set \"{key}\" in the config file)"
        ))
    }

    fn bad(key: &str, what: &str, value: &Value) -> CliError {
        CliError::Config(format!("config key \"{key}\" must be {what}, got {value}"))
    }

    fn cfg_f64(&self, key: &str) -> CliResult<Option<f64>> {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| Self::bad(key, "a number", v)),
        }
    }

    fn cfg_u64(&self, key: &str) -> CliResult<Option<u64>> {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| Self::bad(key, "a nonnegative integer", v)),
        }
    }

    fn cfg_str(&self, key: &str) -> CliResult<Option<&str>> {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| Self::bad(key, "a string", v)),
        }
    }

    fn cfg_bool(&self, key: &str) -> CliResult<Option<bool>> {
        match self.cfg.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_bool()
                .map(Some)
                .ok_or_else(|| Self::bad(key, "a boolean", v)),
        }
    }

    /// Flag value, else config value, else `None`.
    pub fn f64_opt(&self, flag: Option<f64>, key: &str) -> CliResult<Option<f64>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.cfg_f64(key)?,
        })
    }

    pub fn f64_req(&self, flag: Option<f64>, key: &str) -> CliResult<f64> {
        self.f64_opt(flag, key)?.ok_or_else(|| Self::missing(key))
    }

    pub fn f64_or(&self, flag: Option<f64>, key: &str, default: f64) -> CliResult<f64> {
        Ok(self.f64_opt(flag, key)?.unwrap_or(default))
    }

    pub fn u32_opt(&self, flag: Option<u32>, key: &str) -> CliResult<Option<u32>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => match self.cfg_u64(key)? {
                None => None,
                Some(v) => Some(
                    u32::try_from(v)
                        .map_err(|_| Self::bad(key, "a 32-bit integer", &Value::from(v)))?,
                ),
            },
        })
    }

    pub fn u32_req(&self, flag: Option<u32>, key: &str) -> CliResult<u32> {
        self.u32_opt(flag, key)?.ok_or_else(|| Self::missing(key))
    }

    pub fn u32_or(&self, flag: Option<u32>, key: &str, default: u32) -> CliResult<u32> {
        Ok(self.u32_opt(flag, key)?.unwrap_or(default))
    }

    pub fn usize_or(&self, flag: Option<usize>, key: &str, default: usize) -> CliResult<usize> {
        Ok(match flag {
            Some(v) => v,
            None => match self.cfg_u64(key)? {
                None => default,
                Some(v) => usize::try_from(v)
                    .map_err(|_| Self::bad(key, "an index-sized integer", &Value::from(v)))?,
            },
        })
    }

    pub fn str_opt<'a>(&'a self, flag: Option<&'a str>, key: &str) -> CliResult<Option<&'a str>> {
        Ok(match flag {
            Some(v) => Some(v),
            None => self.cfg_str(key)?,
        })
    }

    pub fn str_req<'a>(&'a self, flag: Option<&'a str>, key: &str) -> CliResult<&'a str> {
        self.str_opt(flag, key)?.ok_or_else(|| Self::missing(key))
    }

    pub fn bool_or(&self, flag: bool, key: &str) -> CliResult<bool> {
        Ok(flag || self.cfg_bool(key)?.unwrap_or(false))
    }

    /// List of sweep sizes: flag, else config (JSON array of integers),
    /// else the supplied default.
    pub fn ns_or(&self, flag: Option<&[u32]>, key: &str, default: &[u32]) -> CliResult<Vec<u32>> {
        if let Some(ns) = flag {
            return Ok(ns.to_vec());
        }
        match self.cfg.get(key) {
            None => Ok(default.to_vec()),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_u64()
                        .and_then(|n| u32::try_from(n).ok())
                        .ok_or_else(|| Self::bad(key, "an array of integers", v))
                })
                .collect(),
            Some(v) => Err(Self::bad(key, "an array of integers", v)),
        }
    }

    /// Seed precedence: flag, config, `SHIFTBOUND_SEED`, library default.
    pub fn seed(&self) -> CliResult<u64> {
        if let Some(seed) = self.seed_flag {
            return Ok(seed);
        }
        if let Some(seed) = self.cfg_u64("seed")? {
            return Ok(seed);
        }
        match std::env::var("SHIFTBOUND_SEED") {
            Ok(raw) => raw.parse().map_err(|_| {
                CliError::Config(format!("SHIFTBOUND_SEED must be an unsigned integer, got {raw}"))
            }),
            Err(_) => Ok(shiftbound::DEFAULT_SEED),
        }
    }

    /// Format precedence: flag, config, the command's natural default.
    pub fn format(&self, default: Format) -> CliResult<Format> {
        if let Some(f) = self.format_flag {
            return Ok(f);
        }
        match self.cfg_str("format")? {
            None => Ok(default),
            Some("json") => Ok(Format::Json),
            Some("csv") => Ok(Format::Csv),
            Some(other) => Err(CliError::Config(format!(
                "format must be json or csv, got {other}"
            ))),
        }
    }

    pub fn threads(&self) -> CliResult<Option<usize>> {
        Ok(match self.threads_flag {
            Some(t) => Some(t),
            None => match self.cfg_u64("threads")? {
                None => None,
                Some(v) => Some(usize::try_from(v).map_err(|_| {
                    Self::bad("threads", "an index-sized integer", &Value::from(v))
                })?),
            },
        })
    }

    /// Output path precedence: flag, config.
    pub fn output_path(&self) -> CliResult<Option<PathBuf>> {
        if let Some(p) = &self.output {
            return Ok(Some(p.clone()));
        }
        Ok(self.cfg_str("output")?.map(PathBuf::from))
    }
}

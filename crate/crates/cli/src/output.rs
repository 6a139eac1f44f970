use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Rounds to six significant digits. Integer values below 2^53 pass
/// through untouched so counts stay exact.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 || (x.fract() == 0.0 && x.abs() < 9.0e15) {
        return x;
    }
    let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    s.parse().unwrap_or(x)
}

/// Formats with six significant digits and no exponent for ordinary
/// magnitudes.
pub fn sig(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        "0".into()
    } else {
        format!("{r}")
    }
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

/// Serializes with every float rounded to six significant digits, pretty
/// printed with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut v = serde_json::to_value(value).context("serializing output").map_err(CliError::Numeric)?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).context("serializing output").map_err(CliError::Numeric)?;
    s.push('\n');
    Ok(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub source: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and get the same bytes back.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub params: Value,
    pub inputs: Vec<InputDigest>,
    pub version: String,
    pub seeds: Vec<u64>,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new(command: &str, params: Value) -> Self {
        RunManifest {
            command: command.into(),
            params,
            inputs: Vec::new(),
            version: env!("CARGO_PKG_VERSION").into(),
            seeds: Vec::new(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn input(&mut self, source: impl Into<String>, bytes: &[u8]) {
        self.inputs.push(InputDigest { source: source.into(), sha256: sha256_hex(bytes) });
    }
}

/// Where results go: an optional output directory, and stdout unless quiet.
pub struct Sink {
    pub out: Option<PathBuf>,
    pub quiet: bool,
    pub json: bool,
}

impl Sink {
    pub fn stdout(&self, text: &str) -> Result<(), CliError> {
        if self.quiet {
            return Ok(());
        }
        let mut lock = std::io::stdout().lock();
        lock.write_all(text.as_bytes()).context("writing to stdout").map_err(CliError::Input)
    }

    /// Writes `name` under the output directory; a no-op without `--out`.
    pub fn file(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let Some(dir) = &self.out else { return Ok(()) };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(CliError::Input)?;
        let path = dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display())).map_err(CliError::Input)
    }

    /// The manifest goes next to the outputs, or to stderr without `--out`.
    pub fn manifest(&self, m: &RunManifest) -> Result<(), CliError> {
        let text = to_json(m)?;
        if self.out.is_some() {
            self.file("manifest.json", &text)
        } else {
            if !self.quiet {
                eprint!("{text}");
            }
            Ok(())
        }
    }
}

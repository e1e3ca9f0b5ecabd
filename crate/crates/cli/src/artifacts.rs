use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, OutputFormat};
use crate::CliError;

/// Hash identifying a run: SHA-256 of the command and the canonical JSON
/// form of the configuration. Thread count and output location are left
/// out since they do not change any number.
pub fn manifest_hash(command: &str, config: &ExperimentConfig) -> String {
    #[derive(Serialize)]
    struct Keyed<'a> {
        command: &'a str,
        physical: &'a crate::config::Physical,
        spectral: &'a crate::config::Spectral,
        noise: &'a crate::config::Noise,
        initial: &'a crate::config::Initial,
        scheme: &'a crate::config::Scheme,
        sweep: &'a crate::config::Sweep,
        constants: &'a crate::config::Constants,
    }
    let keyed = Keyed {
        command,
        physical: &config.physical,
        spectral: &config.spectral,
        noise: &config.noise,
        initial: &config.initial,
        scheme: &config.scheme,
        sweep: &config.sweep,
        constants: &config.constants,
    };
    let text = serde_json::to_string(&keyed).expect("configuration serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Output directory of one run. Tables get the manifest hash as their
/// first line; `manifest.json` is written last and lists every artifact
/// with its own digest.
pub struct Artifacts {
    dir: PathBuf,
    format: OutputFormat,
    hash: String,
    written: Vec<(String, String)>,
}

fn parse_cell(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return json!(i);
    }
    match s {
        "true" => return json!(true),
        "false" => return json!(false),
        "" => return Value::Null,
        _ => {}
    }
    match s.parse::<f64>() {
        Ok(x) if x.is_finite() => json!(x),
        Ok(_) => json!(s),
        Err(_) => json!(s),
    }
}

/// JSON form of a CSV table: header row as keys, `#` lines as notes.
fn csv_to_json(hash: &str, csv: &str) -> Value {
    let mut notes = Vec::new();
    let mut lines = csv.lines().filter(|l| {
        if let Some(rest) = l.strip_prefix('#') {
            notes.push(rest.trim().to_string());
            false
        } else {
            true
        }
    });
    let header: Vec<String> = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows: Vec<Value> = lines
        .map(|l| {
            let mut m = Map::new();
            for (k, v) in header.iter().zip(l.split(',')) {
                m.insert(k.clone(), parse_cell(v));
            }
            Value::Object(m)
        })
        .collect();
    json!({ "manifest": hash, "columns": header, "rows": rows, "notes": notes })
}

impl Artifacts {
    pub fn create(dir: &Path, format: OutputFormat, hash: String) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            hash,
            written: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn record(&mut self, name: String, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(&name);
        fs::write(&path, bytes)?;
        self.written.push((name, hex::encode(Sha256::digest(bytes))));
        Ok(path)
    }

    /// Writes a table given as CSV text under `stem.csv` or `stem.json`.
    pub fn table(&mut self, stem: &str, csv: &str) -> Result<PathBuf, CliError> {
        match self.format {
            OutputFormat::Csv => {
                let text = format!("# manifest: {}\n{csv}", self.hash);
                self.record(format!("{stem}.csv"), text.as_bytes())
            }
            OutputFormat::Json => {
                let v = csv_to_json(&self.hash, csv);
                let text = serde_json::to_string_pretty(&v)? + "\n";
                self.record(format!("{stem}.json"), text.as_bytes())
            }
        }
    }

    /// Writes an opaque binary artifact; its digest goes into the manifest.
    pub fn binary(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        self.record(name.to_string(), bytes)
    }

    /// `manifest.json` with the full configuration, seeds and artifact list.
    pub fn finish(self, command: &str, config: &ExperimentConfig, seeds: &[u64], threads: usize) -> Result<PathBuf, CliError> {
        let artifacts: Vec<Value> = self
            .written
            .iter()
            .map(|(n, d)| json!({ "file": n, "sha256": d }))
            .collect();
        let manifest = json!({
            "format_version": 1,
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "hash": self.hash,
            "command": command,
            "master_seed": config.noise.seed,
            "replicate_seeds": seeds,
            "threads": threads,
            "config": config,
            "config_toml": config.to_toml(),
            "artifacts": artifacts,
        });
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }
}

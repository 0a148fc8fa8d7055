use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::RunConfig;
use crate::error::{Error, Result};

/// JSON number, with non-finite values spelled "inf", "-inf" and "nan".
pub fn float(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

/// Shortest round-trip text of a float: plain decimals for moderate
/// magnitudes, exponent notation otherwise, "inf", "-inf" and "nan".
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory of one run; records every file it writes and closes
/// with `manifest-<command>.json`.
pub struct Output {
    dir: PathBuf,
    command: String,
    config: Value,
    config_hash: String,
    model_sha256: String,
    files: Vec<(String, String)>,
}

impl Output {
    pub fn new(dir: &Path, config: &RunConfig, model_text: &str) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let config_value = serde_json::to_value(config)?;
        let canonical = serde_json::to_string(&config_value)?;
        let config_hash = sha256_hex(format!("{canonical}\n{model_text}").as_bytes());
        Ok(Output {
            dir: dir.to_path_buf(),
            command: config.command.clone(),
            config: config_value,
            config_hash,
            model_sha256: sha256_hex(model_text.as_bytes()),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Fails with an I/O error if any of `names` already exists.
    pub fn refuse_overwrite(&self, names: &[&str], force: bool) -> Result<()> {
        if force {
            return Ok(());
        }
        for name in names.iter().copied().chain([self.manifest_name().as_str()]) {
            let path = self.dir.join(name);
            if path.exists() {
                return Err(Error::Io(std::io::Error::new(
                    ErrorKind::AlreadyExists,
                    format!("{} exists; pass --force to overwrite", path.display()),
                )));
            }
        }
        Ok(())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), bytes)?;
        self.files.push((name.to_string(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    fn manifest_name(&self) -> String {
        format!("manifest-{}.json", self.command)
    }

    pub fn finish(&mut self) -> Result<()> {
        let files: Vec<Value> = self.files.iter().map(|(n, h)| json!({"name": n, "sha256": h})).collect();
        let manifest = json!({
            "tool": "qdsfluct",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": self.config,
            "config_hash": self.config_hash,
            "model_sha256": self.model_sha256,
            "tolerances": self.config["tolerances"],
            "files": files,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(self.dir.join(self.manifest_name()), text)?;
        Ok(())
    }
}

//! Output files. JSON artifacts carry a `config_hash` field; CSV artifacts
//! start with a `# config_hash=...` comment line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    json: bool,
    csv: bool,
}

impl Artifacts {
    pub fn create(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg.path("out")?;
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let (json, csv) = match cfg.get::<String>("format")?.as_str() {
            "json" => (true, false),
            "csv" => (false, true),
            "both" => (true, true),
            other => return Err(CliError::config(format!("unknown format `{other}`"))),
        };
        let mut a = Artifacts { dir, hash: cfg.hash(), json, csv };
        a.write_json_value(
            "config.json",
            json!({ "subcommand": cfg.subcommand, "config": cfg.values }),
        )?;
        Ok(a)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn wants_json(&self) -> bool {
        self.json
    }

    pub fn wants_csv(&self) -> bool {
        self.csv
    }

    fn save(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let v = serde_json::to_value(value).map_err(|e| CliError::config(e.to_string()))?;
        self.write_json_value(name, v)
    }

    fn write_json_value(&mut self, name: &str, mut value: Value) -> Result<(), CliError> {
        let stamped = match value {
            Value::Object(ref mut m) => {
                m.insert("config_hash".into(), Value::String(self.hash.clone()));
                value
            }
            other => json!({ "config_hash": self.hash, "data": other }),
        };
        let mut bytes = serde_json::to_vec_pretty(&stamped).map_err(|e| CliError::config(e.to_string()))?;
        bytes.push(b'\n');
        self.save(name, &bytes)
    }

    /// Writes a CSV artifact whose body is produced by `body`.
    pub fn write_csv(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut Vec<u8>) -> contagion_core::Result<()>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        writeln!(buf, "# config_hash={}", self.hash).expect("write to memory");
        body(&mut buf)?;
        self.save(name, &buf)
    }
}

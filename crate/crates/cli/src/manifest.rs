//! Run manifest: config echo, file hashes, phase timings.

use std::path::Path;
use std::time::Instant;

use arlequin_core::config::Config;
use arlequin_core::io::write_file;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Manifest {
    command: &'static str,
    config: Value,
    inputs: Vec<Value>,
    outputs: Vec<Value>,
    timings: Map<String, Value>,
    metrics: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &'static str) -> Self {
        Manifest {
            command,
            config: Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings: Map::new(),
            metrics: Map::new(),
        }
    }

    pub fn config(&mut self, config: &Config) {
        self.config = json!(config.entries());
    }

    pub fn input(&mut self, path: &Path, contents: &str) {
        self.inputs.push(json!({ "path": path.display().to_string(), "sha256": sha256_hex(contents.as_bytes()) }));
    }

    /// Runs `f` and records its wall-clock time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.since(phase, start);
        out
    }

    pub fn since(&mut self, phase: &str, start: Instant) {
        self.timings.insert(phase.to_string(), json!(start.elapsed().as_secs_f64()));
    }

    pub fn metric(&mut self, key: &str, value: Value) {
        self.metrics.insert(key.to_string(), value);
    }

    /// Writes `contents` into `dir` and lists it.
    pub fn emit(&mut self, dir: &Path, name: &str, contents: &str) -> arlequin_core::Result<()> {
        write_file(&dir.join(name), contents)?;
        self.outputs.push(json!({ "file": name, "sha256": sha256_hex(contents.as_bytes()) }));
        Ok(())
    }

    pub fn write(self, dir: &Path, name: &str) -> arlequin_core::Result<()> {
        let doc = json!({
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "timings_s": self.timings,
            "metrics": self.metrics,
        });
        let text = serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n";
        write_file(&dir.join(name), &text)
    }
}

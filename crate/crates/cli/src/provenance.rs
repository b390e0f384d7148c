use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

/// Accumulates every input byte and parameter of a run into one SHA-256.
pub struct Inputs {
    hasher: Sha256,
    pub seed: u64,
}

impl Inputs {
    pub fn new(command: &str, seed: u64) -> Self {
        let mut inputs = Inputs { hasher: Sha256::new(), seed };
        inputs.note(command);
        inputs
    }

    fn feed(&mut self, bytes: &[u8]) {
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn note(&mut self, param: impl std::fmt::Display) {
        self.feed(param.to_string().as_bytes());
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.feed(&bytes);
        Ok(bytes)
    }

    /// A JSON argument given inline or as a path to a file.
    pub fn json_arg(&mut self, arg: &str) -> Result<String> {
        let path = Path::new(arg);
        let text = if path.is_file() {
            String::from_utf8(self.read(path)?).with_context(|| format!("{arg} is not UTF-8"))?
        } else {
            self.feed(arg.as_bytes());
            arg.to_string()
        };
        Ok(text)
    }

    pub fn digest(&self) -> String {
        format!("{:x}", self.hasher.clone().finalize())
    }

    /// `{"input_sha256", "seed"}` followed by `body`'s fields.
    pub fn stamp(&self, body: Value) -> Value {
        let mut out = Map::new();
        out.insert("input_sha256".into(), Value::String(self.digest()));
        out.insert("seed".into(), Value::from(self.seed));
        if let Value::Object(fields) = body {
            out.extend(fields);
        }
        Value::Object(out)
    }

    pub fn csv_comment(&self) -> String {
        format!("# input_sha256={} seed={}\n", self.digest(), self.seed)
    }
}

pub fn write_json(path: Option<&Path>, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_depends_on_boundaries() {
        let mut a = Inputs::new("x", 0);
        a.note("ab");
        a.note("c");
        let mut b = Inputs::new("x", 0);
        b.note("a");
        b.note("bc");
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), {
            let mut c = Inputs::new("x", 0);
            c.note("ab");
            c.note("c");
            c.digest()
        });
    }

    #[test]
    fn stamp_keeps_body() {
        let s = Inputs::new("x", 5).stamp(serde_json::json!({"k": 2}));
        assert_eq!(s["seed"], 5);
        assert_eq!(s["k"], 2);
        assert_eq!(s["input_sha256"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn inline_json_args() {
        let mut i = Inputs::new("x", 0);
        assert_eq!(i.json_arg("[1,2]").unwrap(), "[1,2]");
    }
}

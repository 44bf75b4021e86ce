//! Flat tables and atomic file output.

use crate::config::Format;
use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

/// Fields carried by every emitted row.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    #[serde(rename = "loop")]
    pub loop_name: String,
    pub model: String,
    pub bch_order: usize,
    pub k_order: u8,
    pub scheme: String,
}

/// Rows of one analysis; keys keep struct order.
#[derive(Clone, Debug, Default)]
pub struct Artifact {
    pub name: String,
    pub rows: Vec<Map<String, Value>>,
}

impl Artifact {
    pub fn new(name: &str) -> Self {
        Artifact { name: name.into(), rows: Vec::new() }
    }

    pub fn push<R: Serialize>(&mut self, row: &R) -> Result<()> {
        match serde_json::to_value(row)? {
            Value::Object(m) => self.rows.push(m),
            other => anyhow::bail!("row is not an object: {}", other),
        }
        Ok(())
    }

    pub fn from_rows<R: Serialize>(name: &str, rows: &[R]) -> Result<Self> {
        let mut a = Artifact::new(name);
        for r in rows {
            a.push(r)?;
        }
        Ok(a)
    }

    /// Union of keys, first appearance first.
    pub fn columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = Vec::new();
        for r in &self.rows {
            for k in r.keys() {
                if !cols.iter().any(|c| c == k) {
                    cols.push(k.clone());
                }
            }
        }
        cols
    }

    pub fn to_csv(&self) -> Result<String> {
        let cols = self.columns();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&cols)?;
        for r in &self.rows {
            w.write_record(cols.iter().map(|c| cell(r.get(c))))?;
        }
        Ok(String::from_utf8(w.into_inner().context("flushing csv")?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        let rows: Vec<Value> = self.rows.iter().cloned().map(Value::Object).collect();
        let mut s = serde_json::to_string_pretty(&serde_json::json!({ "analysis": self.name, "rows": rows }))?;
        s.push('\n');
        Ok(s)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn file_name(&self, format: Format) -> String {
        format!("{}.{}", self.name, format.extension())
    }
}

fn cell(v: Option<&Value>) -> String {
    match v {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => match n.as_f64() {
            // JSON has no infinities; serde writes them as null, we keep them readable here
            Some(x) if n.is_f64() => fmt_f64(x),
            _ => n.to_string(),
        },
        Some(other) => other.to_string(),
    }
}

fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && !(1e-4..1e6).contains(&a) {
        format!("{:e}", x)
    } else {
        format!("{}", x)
    }
}

/// Writes through a temporary sibling and renames into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let mut tmp: PathBuf = path.to_path_buf();
    tmp.as_mut_os_string().push(".tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("cannot write {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(())
}

/// Writes to `dir/<name>.<ext>`, or prints when no directory is given.
pub fn emit(artifact: &Artifact, format: Format, dir: Option<&Path>) -> Result<Option<PathBuf>> {
    let body = artifact.render(format)?;
    match dir {
        Some(d) => {
            let p = d.join(artifact.file_name(format));
            write_atomic(&p, &body)?;
            Ok(Some(p))
        }
        None => {
            print!("{}", body);
            Ok(None)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        a: f64,
        b: Option<String>,
    }

    #[test]
    fn csv_columns_follow_field_order() {
        let a = Artifact::from_rows("t", &[Row { a: 1.5, b: None }, Row { a: 2e20, b: Some("x,y".into()) }]).unwrap();
        assert_eq!(a.to_csv().unwrap(), "a,b\n1.5,\n2e20,\"x,y\"\n");
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = std::env::temp_dir().join(format!("qgloop-out-{}", std::process::id()));
        let p = dir.join("x.csv");
        write_atomic(&p, "a\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a\n");
        assert!(!dir.join("x.csv.tmp").exists());
        std::fs::remove_dir_all(dir).unwrap();
    }
}

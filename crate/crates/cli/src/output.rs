//! Output envelope: every artifact carries the resolved config, its hash
//! and the seed, so reruns with identical config are byte-identical.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Column-ordered table with preformatted cells.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct Artifact {
    pub command: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
    pub result: Value,
    pub table: Table,
}

pub fn config_hash(command: &str, config: &Value) -> String {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update([0u8]);
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex::encode(h.finalize())
}

impl Artifact {
    pub fn new(
        command: &'static str,
        config: &impl Serialize,
        seed: Option<u64>,
        result: &impl Serialize,
        table: Table,
    ) -> Self {
        Self {
            command,
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            result: serde_json::to_value(result).expect("result serializes"),
            table,
        }
    }

    pub fn render(&self, format: Format) -> String {
        let hash = config_hash(self.command, &self.config);
        match format {
            Format::Json => {
                let doc = serde_json::json!({
                    "command": self.command,
                    "config_hash": hash,
                    "seed": self.seed,
                    "config": self.config,
                    "result": self.result,
                });
                let mut s = serde_json::to_string_pretty(&doc).expect("json");
                s.push('\n');
                s
            }
            Format::Csv => {
                let mut s = format!("# command: {}\n# config_hash: {hash}\n", self.command);
                match self.seed {
                    Some(seed) => s.push_str(&format!("# seed: {seed}\n")),
                    None => s.push_str("# seed: none\n"),
                }
                s.push_str(&format!("# config: {}\n", serde_json::to_string(&self.config).expect("json")));
                s.push_str(&csv_line(&self.table.columns));
                for row in &self.table.rows {
                    s.push_str(&csv_line(row));
                }
                s
            }
        }
    }

    pub fn emit(&self, format: Format, out: Option<&Path>) -> Result<(), CliError> {
        let text = self.render(format);
        match out {
            Some(path) => std::fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display()))),
            None => std::io::stdout().lock().write_all(text.as_bytes()).map_err(|e| CliError::Output(e.to_string())),
        }
    }
}

fn csv_line(cells: &[String]) -> String {
    let quoted: Vec<String> = cells
        .iter()
        .map(|c| if c.contains([',', '"', '\n']) { format!("\"{}\"", c.replace('"', "\"\"")) } else { c.clone() })
        .collect();
    quoted.join(",") + "\n"
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_command_and_config() {
        let a = serde_json::json!({"x": 1});
        let b = serde_json::json!({"x": 2});
        assert_eq!(config_hash("fit", &a), config_hash("fit", &a));
        assert_ne!(config_hash("fit", &a), config_hash("fit", &b));
        assert_ne!(config_hash("fit", &a), config_hash("price", &a));
        assert_eq!(config_hash("fit", &a).len(), 64);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_line(&["a".into(), "b,c".into(), "d\"e".into()]), "a,\"b,c\",\"d\"\"e\"\n");
    }

    #[test]
    fn csv_envelope_layout() {
        let mut t = Table::new(&["k", "v"]);
        t.push(vec!["1".into(), num(0.5)]);
        let art = Artifact::new("demo", &serde_json::json!({"n": 1}), Some(7), &serde_json::json!([]), t);
        let text = art.render(Format::Csv);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# command: demo");
        assert!(lines[1].starts_with("# config_hash: "));
        assert_eq!(lines[2], "# seed: 7");
        assert_eq!(lines[3], "# config: {\"n\":1}");
        assert_eq!(&lines[4..], ["k,v", "1,0.5"]);
    }
}

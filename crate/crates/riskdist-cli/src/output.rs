//! Output rendering: aligned text tables, CSV, and line-delimited JSON.
//! All floating-point output carries 12 significant digits so regression
//! diffs stay meaningful.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(Self::Table),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format `{other}` (use table, csv or json)")),
        }
    }
}

/// 12 significant digits; parses back to the same f64 it was printed from.
pub fn sig12(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        format!("{x}")
    }
}

/// One emitted record: key/value pairs in insertion order.
pub struct Record {
    fields: Vec<(String, String)>,
    json: serde_json::Map<String, serde_json::Value>,
}

impl Record {
    pub fn new(command: &str) -> Self {
        let mut r = Self {
            fields: Vec::new(),
            json: serde_json::Map::new(),
        };
        r.text("command", command);
        r
    }

    pub fn text(&mut self, key: &str, value: &str) -> &mut Self {
        self.fields.push((key.to_string(), value.to_string()));
        self.json.insert(
            key.to_string(),
            serde_json::Value::String(value.to_string()),
        );
        self
    }

    pub fn number(&mut self, key: &str, value: f64) -> &mut Self {
        self.fields.push((key.to_string(), sig12(value)));
        self.json.insert(key.to_string(), json_number(value));
        self
    }

    pub fn diagnostics(&mut self, diag: &BTreeMap<String, f64>) -> &mut Self {
        let mut obj = serde_json::Map::new();
        for (k, v) in diag {
            self.fields.push((format!("diagnostics.{k}"), sig12(*v)));
            obj.insert(k.clone(), json_number(*v));
        }
        self.json
            .insert("diagnostics".to_string(), serde_json::Value::Object(obj));
        self
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => {
                let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                self.fields
                    .iter()
                    .map(|(k, v)| format!("{k:width$}  {v}"))
                    .collect::<Vec<_>>()
                    .join("\n")
                    + "\n"
            }
            Format::Csv => {
                let header = self
                    .fields
                    .iter()
                    .map(|(k, _)| csv_quote(k))
                    .collect::<Vec<_>>()
                    .join(",");
                let row = self
                    .fields
                    .iter()
                    .map(|(_, v)| csv_quote(v))
                    .collect::<Vec<_>>()
                    .join(",");
                format!("{header}\n{row}\n")
            }
            Format::Json => {
                format!("{}\n", serde_json::Value::Object(self.json.clone()))
            }
        }
    }
}

fn json_number(x: f64) -> serde_json::Value {
    serde_json::Number::from_f64(x)
        .map(serde_json::Value::Number)
        .unwrap_or(serde_json::Value::Null)
}

// standard double-quote escaping for fields containing separators
fn csv_quote(v: &str) -> String {
    if v.contains(',') || v.contains('"') || v.contains('\n') {
        format!("\"{}\"", v.replace('"', "\"\""))
    } else {
        v.to_string()
    }
}

/// A multi-row table (used by `table` and `verify`).
pub struct Rows {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Rows {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Table => {
                let mut widths: Vec<usize> = self.headers.iter().map(|h| h.len()).collect();
                for row in &self.rows {
                    for (i, v) in row.iter().enumerate() {
                        widths[i] = widths[i].max(v.len());
                    }
                }
                let mut out = String::new();
                let line = |cells: &[String], out: &mut String| {
                    let joined = cells
                        .iter()
                        .enumerate()
                        .map(|(i, c)| format!("{c:>w$}", w = widths[i]))
                        .collect::<Vec<_>>()
                        .join("  ");
                    out.push_str(joined.trim_end());
                    out.push('\n');
                };
                line(&self.headers, &mut out);
                for row in &self.rows {
                    line(row, &mut out);
                }
                out
            }
            Format::Csv => {
                let mut out = self
                    .headers
                    .iter()
                    .map(|h| csv_quote(h))
                    .collect::<Vec<_>>()
                    .join(",");
                out.push('\n');
                for row in &self.rows {
                    out.push_str(
                        &row.iter().map(|v| csv_quote(v)).collect::<Vec<_>>().join(","),
                    );
                    out.push('\n');
                }
                out
            }
            Format::Json => {
                let mut out = String::new();
                for row in &self.rows {
                    let mut obj = serde_json::Map::new();
                    for (h, v) in self.headers.iter().zip(row) {
                        let value = v
                            .parse::<f64>()
                            .ok()
                            .map(json_number)
                            .unwrap_or(serde_json::Value::String(v.clone()));
                        obj.insert(h.clone(), value);
                    }
                    out.push_str(&serde_json::Value::Object(obj).to_string());
                    out.push('\n');
                }
                out
            }
        }
    }
}

/// Writes to `--out` when given, stdout otherwise.
pub fn emit(content: &str, out: Option<&std::path::Path>) -> std::io::Result<()> {
    match out {
        Some(path) => fs::write(path, content),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(content.as_bytes())
        }
    }
}

use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::config::{ExperimentConfig, OutputFormat};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // Adding zero folds -0 into +0.
            Cell::Num(x) => format!("{:.16e}", x + 0.0),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) => Value::Null,
            Cell::Int(n) => json!(n),
            Cell::Text(s) => json!(s),
        }
    }
}

/// Tabular result of one subcommand with `(name, value)` summary lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(&'static str, Cell)>,
}

impl Report {
    pub fn new(command: &'static str, columns: Vec<&'static str>) -> Self {
        Self { command, columns, rows: Vec::new(), summary: Vec::new() }
    }

    pub fn render(&self, config: &ExperimentConfig, format: OutputFormat) -> Result<String, String> {
        let mut echo = config.clone();
        echo.output = None;
        let version = env!("CARGO_PKG_VERSION");
        match format {
            OutputFormat::Csv => {
                let mut out = format!(
                    "# hhmetro {version}\n# command: {}\n# config: {}\n",
                    self.command,
                    serde_json::to_string(&echo).map_err(|e| e.to_string())?
                );
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns).map_err(|e| e.to_string())?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv)).map_err(|e| e.to_string())?;
                }
                let body = w.into_inner().map_err(|e| e.to_string())?;
                out.push_str(&String::from_utf8(body).map_err(|e| e.to_string())?);
                for (name, value) in &self.summary {
                    out.push_str(&format!("# {name} = {}\n", value.csv()));
                }
                Ok(out)
            }
            OutputFormat::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let obj: Map<String, Value> = self
                            .columns
                            .iter()
                            .zip(r)
                            .map(|(c, v)| (c.to_string(), v.json()))
                            .collect();
                        Value::Object(obj)
                    })
                    .collect();
                let summary: Map<String, Value> =
                    self.summary.iter().map(|(k, v)| (k.to_string(), v.json())).collect();
                let doc = json!({
                    "version": version,
                    "command": self.command,
                    "config": echo,
                    "rows": rows,
                    "summary": summary,
                });
                let mut s = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
                s.push('\n');
                Ok(s)
            }
        }
    }
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

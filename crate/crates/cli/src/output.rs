//! Table and summary writers.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::Format;
use crate::CliError;

/// A named table; cells are JSON scalars so both formats share one source.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV body: `,` separator, `.` decimals, shortest round-trip floats.
    pub fn to_csv(&self, hash: &str) -> String {
        let mut s = format!("# manifest: {hash}\n{}\n", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::String(t) => t.clone(),
                    other => other.to_string(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> Value {
        json!({ "columns": self.columns, "rows": self.rows })
    }
}

#[derive(Debug, Clone)]
pub struct TaskResult {
    pub tables: Vec<Table>,
    pub summary: Value,
}

/// Write the task output and return the file names.
pub fn write(dir: &Path, format: Format, task: &str, hash: &str, result: &TaskResult) -> Result<Vec<String>, CliError> {
    let mut files = Vec::new();
    match format {
        Format::Csv => {
            for t in &result.tables {
                let name = format!("{}.csv", t.name);
                fs::write(dir.join(&name), t.to_csv(hash))?;
                files.push(name);
            }
            if !result.summary.is_null() {
                let name = format!("{task}.json");
                let doc = json!({ "manifest": hash, "task": task, "summary": result.summary });
                fs::write(dir.join(&name), serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
                files.push(name);
            }
        }
        Format::Json => {
            let tables: serde_json::Map<String, Value> = result.tables.iter().map(|t| (t.name.clone(), t.to_json())).collect();
            let doc = json!({ "manifest": hash, "task": task, "summary": result.summary, "tables": tables });
            let name = format!("{task}.json");
            fs::write(dir.join(&name), serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
            files.push(name);
        }
    }
    Ok(files)
}

/// A matplotlib script plotting every numeric column of each CSV against
/// its first column.
pub fn write_plotscript(dir: &Path, files: &[String]) -> Result<String, CliError> {
    let csvs: Vec<String> = files.iter().filter(|f| f.ends_with(".csv")).map(|f| format!("{f:?}")).collect();
    let script = format!(
        r##"import csv
import matplotlib.pyplot as plt

FILES = [{}]

for name in FILES:
    with open(name) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else []
    numeric = []
    for i, col in enumerate(cols):
        try:
            numeric.append((header[i], [float(x) for x in col]))
        except ValueError:
            pass
    if len(numeric) < 2:
        continue
    fig, ax = plt.subplots()
    x_label, x = numeric[0]
    for label, y in numeric[1:]:
        ax.plot(x, y, ".", markersize=2, label=label)
    ax.set_xlabel(x_label)
    ax.legend()
    ax.set_title(name)
    fig.savefig(name.rsplit(".", 1)[0] + ".png", dpi=150)
"##,
        csvs.join(", ")
    );
    let name = "plot.py".to_string();
    fs::write(dir.join(&name), script)?;
    Ok(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_manifest_header_and_plain_numbers() {
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![json!(0.1), json!("positive")]);
        t.push(vec![json!(-2.5e-17), json!(3)]);
        assert_eq!(t.to_csv("abc"), "# manifest: abc\na,b\n0.1,positive\n-2.5e-17,3\n");
    }
}

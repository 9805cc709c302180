//! Stamped tables: the one on-disk format for every stage output.
//!
//! A file is a block of `# key value` meta lines, then a comma-separated
//! column header, then numeric rows. Every writer stamps the config hash,
//! stage name, and stage seed into the metas, so any artifact can be traced
//! to the exact configuration that produced it. Floats are rendered with
//! the shortest representation that round-trips, which makes byte-identical
//! reruns a meaningful check.

use crate::error::{PipelineError, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub metas: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            metas: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Standard provenance stamp; call before appending stage-specific metas.
    pub fn stamp(&mut self, config_hash: &str, stage: &str, seed: u64) {
        self.metas.push(("config".into(), config_hash.to_string()));
        self.metas.push(("stage".into(), stage.to_string()));
        self.metas.push(("seed".into(), seed.to_string()));
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.metas.push((key.to_string(), value.to_string()));
    }

    /// First value stored under `key`.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metas.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Every value stored under `key`, in file order.
    pub fn meta_all(&self, key: &str) -> Vec<&str> {
        self.metas.iter().filter(|(k, _)| k == key).map(|(_, v)| v.as_str()).collect()
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta(key).and_then(|v| v.parse().ok())
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// All values of the named column, in row order.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metas {
            writeln!(out, "# {k} {v}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }
}

pub fn write_table(path: &Path, table: &Table) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, table.render())?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<Table> {
    let malformed =
        |reason: String| PipelineError::MalformedData { path: path.to_path_buf(), reason };
    let text = std::fs::read_to_string(path)?;
    let mut table = Table::default();
    let mut lines = text.lines().peekable();
    while let Some(line) = lines.peek() {
        let Some(rest) = line.strip_prefix("# ") else { break };
        let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
        table.metas.push((k.to_string(), v.to_string()));
        lines.next();
    }
    let header = lines
        .next()
        .ok_or_else(|| malformed("missing column header".into()))?;
    table.columns = header.split(',').map(|c| c.to_string()).collect();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|c| {
                c.parse::<f64>()
                    .map_err(|_| malformed(format!("row {}: bad number {c:?}", i + 1)))
            })
            .collect::<Result<_>>()?;
        if row.len() != table.columns.len() {
            return Err(malformed(format!(
                "row {}: {} cells, expected {}",
                i + 1,
                row.len(),
                table.columns.len()
            )));
        }
        table.rows.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact_for_awkward_floats() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]);
        t.stamp("deadbeef", "demo", 42);
        t.push_meta("gap", 17);
        t.push_meta("gap", 401);
        t.push_row(vec![1.0 / 3.0, 0.1 + 0.2]);
        t.push_row(vec![1e-300, -0.0]);
        t.push_row(vec![f64::MAX, 2.2250738585072014e-308]);
        write_table(&path, &t).unwrap();
        let back = read_table(&path).unwrap();
        assert_eq!(back.meta("config"), Some("deadbeef"));
        assert_eq!(back.meta("seed"), Some("42"));
        assert_eq!(back.meta_all("gap"), vec!["17", "401"]);
        assert_eq!(back.columns, t.columns);
        for (r, row) in t.rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert_eq!(back.rows[r][c].to_bits(), v.to_bits(), "row {r} col {c}");
            }
        }
        // Re-render must be byte-identical.
        assert_eq!(back.render(), t.render());
    }

    #[test]
    fn column_access_by_name() {
        let mut t = Table::new(&["x", "y"]);
        t.push_row(vec![1.0, 10.0]);
        t.push_row(vec![2.0, 20.0]);
        assert_eq!(t.column("y").unwrap(), vec![10.0, 20.0]);
        assert!(t.column("z").is_none());
    }

    #[test]
    fn malformed_files_are_reported_with_reason() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "# config abc\nx,y\n1.0,2.0\n3.0,oops\n").unwrap();
        let err = read_table(&path).unwrap_err();
        assert!(err.to_string().contains("oops"), "{err}");

        std::fs::write(&path, "# config abc\nx,y\n1.0\n").unwrap();
        let err = read_table(&path).unwrap_err();
        assert!(err.to_string().contains("expected 2"), "{err}");

        std::fs::write(&path, "# only metas no header").unwrap();
        assert!(read_table(&path).is_err());
    }
}

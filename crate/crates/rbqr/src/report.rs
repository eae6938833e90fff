//! Run reports: an aligned text table plus a `key=value` block.

use std::fmt::{Display, Write as _};
use std::path::Path;

use crate::files::FileError;

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut widths: Vec<usize> = self.headers.iter().map(String::len).collect();
        for r in &self.rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.len());
            }
        }
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
            parts.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.headers);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct Report {
    pub title: String,
    pub entries: Vec<(String, String)>,
    pub tables: Vec<(String, Table)>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report { title: title.into(), ..Default::default() }
    }

    pub fn push(&mut self, key: &str, value: impl Display) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Reals in `{:e}` form, so the key=value block keeps full precision.
    pub fn push_real(&mut self, key: &str, value: f64) {
        self.push(key, format!("{value:e}"));
    }

    pub fn table(&mut self, name: &str, table: Table) {
        self.tables.push((name.to_string(), table));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.title);
        let width = self.entries.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &self.entries {
            let _ = writeln!(out, "  {k:<width$}  {v}");
        }
        for (name, t) in &self.tables {
            let _ = write!(out, "\n{name}\n{}", t.render());
        }
        if !self.notes.is_empty() {
            out.push('\n');
            for n in &self.notes {
                let _ = writeln!(out, "note: {n}");
            }
        }
        out
    }

    pub fn to_kv(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<(), FileError> {
        for (name, body) in [("report.txt", self.to_text()), ("report.kv", self.to_kv())] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|source| FileError::Io { path, source })?;
        }
        Ok(())
    }
}

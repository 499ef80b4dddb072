//! Artifacts are collected in memory and written only once a run succeeds,
//! so a failed validation leaves nothing on disk.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

/// Shortest round-trip form; exponent notation for very small or large values.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:?}")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Csv {
    header: Vec<String>,
    body: String,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), body: String::new() }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let line: Vec<String> = cells.into_iter().collect();
        debug_assert_eq!(line.len(), self.header.len());
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    pub fn row_f64(&mut self, values: &[f64]) {
        self.row(values.iter().map(|&x| fmt_f64(x)));
    }

    pub fn into_bytes(self) -> Vec<u8> {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s.into_bytes()
    }
}

#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize to JSON");
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
    }

    pub fn csv(&mut self, name: &str, table: Csv) {
        self.files.push((name.to_string(), table.into_bytes()));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|(n, _)| n.clone()).collect()
    }

    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

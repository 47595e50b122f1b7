use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Formats a float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    U(u64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => num(*x),
            Cell::I(i) => i.to_string(),
            Cell::U(u) => u.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(u: usize) -> Self {
        Cell::U(u as u64)
    }
}

impl From<u64> for Cell {
    fn from(u: u64) -> Self {
        Cell::U(u)
    }
}

impl From<i8> for Cell {
    fn from(i: i8) -> Self {
        Cell::I(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::S(b.to_string())
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::S(s)
    }
}

/// A CSV table with a single `name [unit]` header line.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    body: String,
}

impl Table {
    /// `columns` are `(name, unit)` pairs.
    pub fn new(columns: &[(&str, &str)]) -> Self {
        Self {
            header: columns.iter().map(|(n, u)| format!("{n} [{u}]")).collect(),
            body: String::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.header.len(), "row width does not match the header");
        let line: Vec<String> = cells.iter().map(Cell::render).collect();
        self.body.push_str(&line.join(","));
        self.body.push('\n');
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        s.push_str(&self.body);
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

pub fn sha256_hex(data: &[u8]) -> String {
    let digest = Sha256::digest(data);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Output directory that records every file written to it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputDir {
    /// The directory itself is created on the first write.
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        }
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        fs::create_dir_all(&self.root)?;
        fs::write(self.root.join(name), contents)?;
        self.files.push(FileRecord {
            name: name.to_string(),
            bytes: contents.len() as u64,
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    pub fn table(&mut self, name: &str, table: &Table) -> io::Result<()> {
        self.write(name, &table.render())
    }
}

/// `manifest.json` contents.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub library_version: &'static str,
    pub paper_scale: bool,
    pub status: String,
    pub wall_clock_seconds: f64,
    pub config_path: String,
    pub config: serde_json::Value,
    pub parameters: serde_json::Value,
    pub warnings: Vec<String>,
    pub files: Vec<FileRecord>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

impl RunManifest {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        fs::create_dir_all(dir)?;
        fs::write(dir.join(MANIFEST_NAME), text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.5), "-2.5000000000000000e0");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        let digits = num(std::f64::consts::PI)
            .split('e')
            .next()
            .unwrap()
            .replace(['.', '-'], "");
        assert_eq!(digits.len(), 17);
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(&[("tau", "1"), ("n", "count"), ("scheme", "-")]);
        t.row(vec![1.0.into(), 3usize.into(), "rk4".into()]);
        assert_eq!(t.render(), "tau [1],n [count],scheme [-]\n1.0000000000000000e0,3,rk4\n");
    }

    #[test]
    #[should_panic]
    fn ragged_rows_are_rejected() {
        let mut t = Table::new(&[("a", "1")]);
        t.row(vec![1.0.into(), 2.0.into()]);
    }

    #[test]
    fn checksum_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}

//! Assertion bookkeeping and deterministic artifact writing.

use serde::Serialize;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug)]
pub struct Report {
    pub suite: String,
    pub out: PathBuf,
    pub assertions: Vec<Assertion>,
    pub files: Vec<String>,
}

/// Shortest round-trip formatting, so reruns produce identical bytes.
pub fn num(x: f64) -> String {
    format!("{x}")
}

impl Report {
    pub fn new(suite: &str, out: &Path) -> io::Result<Self> {
        fs::create_dir_all(out)?;
        Ok(Report { suite: suite.into(), out: out.to_path_buf(), assertions: Vec::new(), files: Vec::new() })
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> bool {
        self.assertions.push(Assertion { name: name.into(), passed, detail: detail.into() });
        passed
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut w = csv::Writer::from_path(self.out.join(name))?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        self.files.push(name.into());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let s = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        fs::write(self.out.join(name), s + "\n")?;
        self.files.push(name.into());
        Ok(())
    }

    /// `summary.json` with the resolved configuration and every assertion.
    pub fn finish<C: Serialize>(&mut self, config: &C) -> io::Result<()> {
        #[derive(Serialize)]
        struct Summary<'a, C> {
            suite: &'a str,
            passed: bool,
            assertions_total: usize,
            assertions_failed: usize,
            config: &'a C,
            files: &'a [String],
            assertions: &'a [Assertion],
        }
        let mut files = self.files.clone();
        files.push("summary.json".into());
        let s = Summary {
            suite: &self.suite,
            passed: self.passed(),
            assertions_total: self.assertions.len(),
            assertions_failed: self.failures().count(),
            config,
            files: &files,
            assertions: &self.assertions,
        };
        let text = serde_json::to_string_pretty(&s).map_err(io::Error::other)?;
        fs::write(self.out.join("summary.json"), text + "\n")
    }
}

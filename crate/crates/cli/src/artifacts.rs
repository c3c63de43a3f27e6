//! CSV and JSON artifacts stamped with the config hash and seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub struct Artifacts {
    pub dir: PathBuf,
    pub hash: String,
    pub seed: u64,
    written: Vec<(String, usize)>,
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}

impl Artifacts {
    pub fn new(dir: impl AsRef<Path>, hash: String, seed: u64) -> Result<Self, CliError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            hash,
            seed,
            written: Vec::new(),
        })
    }

    /// Comma-separated file: a `#` preamble line, the header, then rows.
    pub fn csv<I>(&mut self, name: &str, header: &[String], rows: I) -> Result<PathBuf, CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut s = format!("# config_hash={} seed={}\n", self.hash, self.seed);
        s.push_str(&header.join(","));
        s.push('\n');
        for row in rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        self.written.push((name.to_string(), header.len()));
        self.write(name, &s)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let doc = serde_json::json!({
            "config_hash": self.hash,
            "seed": self.seed,
            "result": value,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Runtime(e.to_string()))? + "\n";
        self.write(name, &text)
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let text = format!("config_hash={} seed={}\n{body}", self.hash, self.seed);
        self.write(name, &text)
    }

    fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        Ok(path)
    }

    /// Plot-tool-agnostic rendering stub: one figure per CSV written, first
    /// column against the others.
    pub fn plot_stub(&mut self) -> Result<PathBuf, CliError> {
        let mut s = String::from(
            "#!/usr/bin/env python3\n\
             # Rendering stub: plots the first column of each CSV against the others.\n\
             import csv, sys\n\
             import matplotlib.pyplot as plt\n\n\
             def load(name):\n\
             \x20   with open(name) as f:\n\
             \x20       rows = [r for r in csv.reader(l for l in f if not l.startswith('#'))]\n\
             \x20   return rows[0], [[float(v) for v in r] for r in rows[1:]]\n\n",
        );
        for (name, cols) in &self.written {
            if *cols < 2 {
                continue;
            }
            let _ = writeln!(
                s,
                "header, rows = load({name:?})\n\
                 for j in range(1, len(header)):\n\
                 \x20   plt.plot([r[0] for r in rows], [r[j] for r in rows], '.', label=header[j])\n\
                 plt.xlabel(header[0]); plt.legend(); plt.title({name:?})\n\
                 plt.savefig({:?}); plt.clf()\n",
                format!("{}.png", name.trim_end_matches(".csv"))
            );
        }
        s.push_str("if '--show' in sys.argv:\n    plt.show()\n");
        self.write("plot.py", &s)
    }
}

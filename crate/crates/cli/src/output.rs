use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{ExperimentConfig, RunInfo};
use crate::CliError;

/// Round-trippable float text: 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

pub enum Cell {
    F(f64),
    I(i64),
    S(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

pub struct Csv {
    header: Vec<&'static str>,
    body: String,
}

impl Csv {
    pub fn new(header: &[&'static str]) -> Self {
        Csv {
            header: header.to_vec(),
            body: String::new(),
        }
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.header.len());
        let text: Vec<String> = cells
            .into_iter()
            .map(|c| match c {
                Cell::F(v) => num(v),
                Cell::I(v) => v.to_string(),
                Cell::S(s) => s,
            })
            .collect();
        let _ = writeln!(self.body, "{}", text.join(","));
    }
}

/// Collects the files of one run and writes them under the output directory.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let p = self.dir.join(name);
        let mut f = std::fs::File::create(&p).map_err(|e| CliError::Io(p.clone(), e))?;
        f.write_all(bytes).map_err(|e| CliError::Io(p.clone(), e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, csv: &Csv) -> Result<(), CliError> {
        let mut s = csv.header.join(",");
        s.push('\n');
        s.push_str(&csv.body);
        self.put(name, s.as_bytes())
    }

    /// Little-endian f64 fields, concatenated.
    pub fn binary(&mut self, name: &str, fields: &[&[f64]]) -> Result<(), CliError> {
        let mut b = Vec::with_capacity(fields.iter().map(|f| 8 * f.len()).sum());
        for f in fields {
            for v in *f {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        self.put(name, &b)
    }

    /// The resolved config plus a [run] table; loadable as a config again.
    pub fn manifest(mut self, cfg: &ExperimentConfig, mut run: RunInfo) -> Result<(), CliError> {
        run.outputs = self.written.clone();
        let mut m = cfg.clone();
        m.run = Some(run);
        let text = toml::to_string(&m).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
        self.put("manifest.toml", text.as_bytes())
    }
}

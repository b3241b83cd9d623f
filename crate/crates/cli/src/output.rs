//! CSV diagnostics and field snapshots.
//!
//! Every number is written with `{:.16e}`, which round-trips `f64`, so
//! reruns with the same inputs produce byte-identical files.
//!
//! Snapshot text format: a header line
//! `SAVGL-FIELD n=<n> L=<length> t=<time>` followed by `n` rows of `n`
//! comma-separated values, row `i` holding `u(x_i, y_0..y_{n-1})`. The
//! optional raw sidecar (`.bin`) stores the same header line and then the
//! `n²` values as little-endian `f64` in the same order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::{CliError, CliResult};

pub const SNAPSHOT_MAGIC: &str = "SAVGL-FIELD";

/// A CSV file with a fixed header, written row by row.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> CliResult<Self> {
        let file = File::create(path).map_err(CliError::io(format!("creating {}", path.display())))?;
        let mut w = Self { path: path.to_path_buf(), out: BufWriter::new(file) };
        w.line(header)?;
        Ok(w)
    }

    fn line(&mut self, text: &str) -> CliResult<()> {
        writeln!(self.out, "{text}").map_err(CliError::io(format!("writing {}", self.path.display())))
    }

    pub fn row(&mut self, values: &[f64]) -> CliResult<()> {
        let text = values.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
        self.line(&text)
    }

    /// Row with a leading integer column.
    pub fn row_with_count(&mut self, count: usize, values: &[f64]) -> CliResult<()> {
        let mut text = count.to_string();
        for v in values {
            text.push_str(&format!(",{v:.16e}"));
        }
        self.line(&text)
    }

    pub fn finish(mut self) -> CliResult<PathBuf> {
        self.out.flush().map_err(CliError::io(format!("writing {}", self.path.display())))?;
        Ok(self.path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub n: usize,
    pub length: f64,
    pub time: f64,
    /// `u[i * n + j]`, `i` the x index.
    pub values: Vec<f64>,
}

impl Snapshot {
    fn header(&self) -> String {
        format!("{SNAPSHOT_MAGIC} n={} L={:.16e} t={:.16e}", self.n, self.length, self.time)
    }

    pub fn write_text(&self, path: &Path) -> CliResult<()> {
        let ctx = || format!("writing {}", path.display());
        let file = File::create(path).map_err(CliError::io(ctx()))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", self.header()).map_err(CliError::io(ctx()))?;
        for row in self.values.chunks(self.n) {
            let line = row.iter().map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(",");
            writeln!(out, "{line}").map_err(CliError::io(ctx()))?;
        }
        out.flush().map_err(CliError::io(ctx()))
    }

    pub fn write_raw(&self, path: &Path) -> CliResult<()> {
        let ctx = || format!("writing {}", path.display());
        let mut bytes = format!("{}\n", self.header()).into_bytes();
        bytes.reserve(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(CliError::io(ctx()))
    }

    fn parse_header(line: &str, path: &Path) -> CliResult<(usize, f64, f64)> {
        let bad = || CliError::Config(format!("{}: malformed snapshot header `{}`", path.display(), line.trim()));
        let mut words = line.split_whitespace();
        if words.next() != Some(SNAPSHOT_MAGIC) {
            return Err(bad());
        }
        let mut field = |key: &str| -> CliResult<String> {
            words
                .next()
                .and_then(|w| w.strip_prefix(key))
                .map(str::to_string)
                .ok_or_else(bad)
        };
        let n = field("n=")?.parse::<usize>().map_err(|_| bad())?;
        let length = field("L=")?.parse::<f64>().map_err(|_| bad())?;
        let time = field("t=")?.parse::<f64>().map_err(|_| bad())?;
        Ok((n, length, time))
    }

    /// Reads either format.
    pub fn read(path: &Path) -> CliResult<Self> {
        let ctx = || format!("reading {}", path.display());
        let file = File::open(path).map_err(CliError::io(ctx()))?;
        let mut reader = BufReader::new(file);
        let mut header = String::new();
        reader.read_line(&mut header).map_err(CliError::io(ctx()))?;
        let (n, length, time) = Self::parse_header(&header, path)?;
        let mut rest = Vec::new();
        reader.read_to_end(&mut rest).map_err(CliError::io(ctx()))?;

        let values: Vec<f64> = if path.extension().is_some_and(|e| e == "bin") {
            if rest.len() != 8 * n * n {
                return Err(CliError::Config(format!("{}: expected {} bytes of data", path.display(), 8 * n * n)));
            }
            rest.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8"))).collect()
        } else {
            let text = String::from_utf8(rest).map_err(|_| CliError::Config(format!("{}: not UTF-8", path.display())))?;
            let mut values = Vec::with_capacity(n * n);
            for (idx, line) in text.lines().enumerate() {
                for v in line.split(',') {
                    values.push(v.trim().parse::<f64>().map_err(|_| {
                        CliError::Config(format!("{}: line {}: bad value `{}`", path.display(), idx + 2, v.trim()))
                    })?);
                }
            }
            values
        };
        if values.len() != n * n {
            return Err(CliError::Config(format!(
                "{}: header says n = {n} but found {} values",
                path.display(),
                values.len()
            )));
        }
        Ok(Self { n, length, time, values })
    }
}

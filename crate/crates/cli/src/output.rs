//! Output directory of one run: CSV files with a provenance preamble, an
//! optional binary path dump, the summary table and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.csv";
pub const PATH_DUMP_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

/// One line of a summary block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub study: String,
    pub metric: String,
    pub value: String,
    /// Empty when the metric is informational.
    pub band: String,
    pub pass: Option<bool>,
}

/// Value cell of a summary row; floats use [`num`].
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        num(*self)
    }
}

impl Cell for bool {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl Cell for &str {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl SummaryRow {
    pub fn info(study: &str, metric: &str, value: impl Cell) -> Self {
        Self {
            study: study.into(),
            metric: metric.into(),
            value: value.cell(),
            band: String::new(),
            pass: None,
        }
    }

    pub fn check(study: &str, metric: &str, value: impl Cell, band: &str, pass: bool) -> Self {
        Self {
            study: study.into(),
            metric: metric.into(),
            value: value.cell(),
            band: band.into(),
            pass: Some(pass),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    /// False when the run aborted; the listed outputs are then partial.
    pub complete: bool,
    pub error: Option<String>,
    pub outputs: Vec<OutputEntry>,
    pub timings: Vec<Timing>,
    pub summary: Vec<SummaryRow>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| CliError::Io(std::io::Error::other(e)))
    }

    pub fn failures(&self) -> Vec<String> {
        self.summary
            .iter()
            .filter(|r| r.pass == Some(false))
            .map(|r| format!("{} {} = {} not in {}", r.study, r.metric, r.value, r.band))
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    started: Instant,
}

impl Run {
    pub fn create(dir: PathBuf, command: &str, config_hash: String, seed: u64) -> Result<Self, CliError> {
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            manifest: RunManifest {
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.into(),
                config_hash,
                seed,
                complete: false,
                error: None,
                outputs: Vec::new(),
                timings: Vec::new(),
                summary: Vec::new(),
            },
            started: Instant::now(),
        })
    }

    /// Replaces the recorded configuration hash; later outputs carry the new one.
    pub fn set_config_hash(&mut self, hash: String) {
        self.manifest.config_hash = hash;
    }

    pub fn seed(&self) -> u64 {
        self.manifest.seed
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Runs `f` and records its wall-clock time under `phase`.
    pub fn timed<R>(&mut self, phase: &str, f: impl FnOnce() -> R) -> R {
        let t0 = Instant::now();
        let out = f();
        self.manifest.timings.push(Timing {
            phase: phase.into(),
            seconds: t0.elapsed().as_secs_f64(),
        });
        out
    }

    fn write_file(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        fs::write(self.dir.join(name), bytes)?;
        self.manifest.outputs.push(OutputEntry {
            file: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        self.write_file(name, content.as_bytes())
    }

    /// Writes `# config_sha256=...` and `# seed=...` lines, the header and
    /// the rows.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let mut buf = format!("# config_sha256={}\n# seed={}\n", self.manifest.config_hash, self.manifest.seed)
            .into_bytes();
        {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(&mut buf);
            w.write_record(header)?;
            for row in rows {
                w.write_record(row)?;
            }
            w.flush()?;
        }
        self.write_file(name, &buf)
    }

    /// Binary dump: `u32` schema version, `u64` seed, `f64` dt, `u64` steps,
    /// `u64` series count, then each series of `steps + 1` values; all
    /// little-endian.
    pub fn path_dump(&mut self, name: &str, dt: f64, n_steps: usize, series: &[Vec<f64>]) -> Result<(), CliError> {
        let mut buf = Vec::with_capacity(36 + series.len() * (n_steps + 1) * 8);
        buf.extend_from_slice(&PATH_DUMP_SCHEMA.to_le_bytes());
        buf.extend_from_slice(&self.manifest.seed.to_le_bytes());
        buf.extend_from_slice(&dt.to_le_bytes());
        buf.extend_from_slice(&(n_steps as u64).to_le_bytes());
        buf.extend_from_slice(&(series.len() as u64).to_le_bytes());
        for s in series {
            if s.len() != n_steps + 1 {
                return Err(CliError::Numerical(format!("series of length {} for {n_steps} steps", s.len())));
            }
            for x in s {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        self.write_file(name, &buf)
    }

    pub fn summarize(&mut self, row: SummaryRow) {
        self.manifest.summary.push(row);
    }

    /// Writes the summary table and a complete manifest; band failures
    /// recorded in the summary become the error.
    pub fn finish(mut self) -> Result<RunManifest, CliError> {
        if !self.manifest.summary.is_empty() {
            let rows: Vec<[String; 5]> = self
                .manifest
                .summary
                .iter()
                .map(|r| {
                    let pass = r.pass.map(|p| if p { "pass" } else { "fail" }).unwrap_or("");
                    [r.study.clone(), r.metric.clone(), r.value.clone(), r.band.clone(), pass.to_string()]
                })
                .collect();
            self.csv(SUMMARY, &["study", "metric", "value", "band", "pass"], rows)?;
            for r in &self.manifest.summary {
                let verdict = match r.pass {
                    Some(true) => format!("  [{}] pass", r.band),
                    Some(false) => format!("  [{}] FAIL", r.band),
                    None => String::new(),
                };
                println!("{:<14} {:<24} {}{}", r.study, r.metric, r.value, verdict);
            }
        }
        self.manifest.complete = true;
        self.push_total();
        self.write_manifest()?;
        let failures = self.manifest.failures();
        if failures.is_empty() {
            Ok(self.manifest)
        } else {
            Err(CliError::Band(failures))
        }
    }

    /// Records the error and leaves the manifest marked incomplete.
    pub fn abort(mut self, err: &CliError) -> Result<(), CliError> {
        self.manifest.error = Some(err.to_string());
        self.push_total();
        self.write_manifest()
    }

    fn push_total(&mut self) {
        self.manifest.timings.push(Timing {
            phase: "total".into(),
            seconds: self.started.elapsed().as_secs_f64(),
        });
    }

    fn write_manifest(&self) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
        fs::write(self.dir.join(MANIFEST), text + "\n")?;
        Ok(())
    }
}

/// Shortest round-trip form, switching to exponent notation for very small
/// or large magnitudes.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

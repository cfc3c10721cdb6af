//! Writing a [`RunRecord`] to a directory and reading it back.
//!
//! Layout:
//! * `meta.toml`: scenario echo, hash and per-reservoir diagnostics
//! * `amplitudes_<tag>.csv`: `t, re_c1, im_c1, …` (lab frame)
//! * `population_<tag>_<site>.csv`: `t, value`, sites numbered from 1
//! * `env_population_<tag>.csv`: `t, value`
//! * `qsd_<measure>_<tag>.csv`: `t, value`
//!
//! `<tag>` is a reservoir tag, or `reference` for the Markovian reference
//! (which has no environment or QSD tables). Numbers are written in the
//! shortest form that parses back to the same `f64`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{AmplitudeTrajectory, Frame};
use crate::error::{Error, Result};
use crate::qsd::{Measure, QsdSeries};
use crate::reservoir::SpectralDensity;
use crate::scenario::{CalibrationOutcome, ReservoirRecord, ReservoirRun, RunDiagnostics, RunRecord, Scenario, REFERENCE_TAG};

pub const META_FILE: &str = "meta.toml";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReservoirMeta {
    tag: String,
    status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    density: SpectralDensity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    calibration: Option<CalibrationOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    diagnostics: Option<RunDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    format_version: u32,
    scenario_hash: String,
    n_samples: usize,
    t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference_half_life: Option<f64>,
    scenario: Scenario,
    reservoirs: Vec<ReservoirMeta>,
}

pub fn amplitudes_file(tag: &str) -> String {
    format!("amplitudes_{tag}.csv")
}

/// `site` is 0-based; file names count from 1.
pub fn population_file(tag: &str, site: usize) -> String {
    format!("population_{tag}_{}.csv", site + 1)
}

pub fn env_population_file(tag: &str) -> String {
    format!("env_population_{tag}.csv")
}

pub fn qsd_file(measure: Measure, tag: &str) -> String {
    format!("qsd_{}_{tag}.csv", measure.tag())
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn write_table(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let io = |e: csv::Error| Error::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row.into_iter().map(num)).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_series(path: &Path, times: &[f64], values: &[f64]) -> Result<()> {
    let header = ["t".to_string(), "value".to_string()];
    write_table(path, &header, times.iter().zip(values).map(|(&t, &v)| vec![t, v]))
}

fn write_trajectory(dir: &Path, tag: &str, traj: &AmplitudeTrajectory) -> Result<()> {
    let n = traj.n_sites();
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        header.push(format!("re_c{i}"));
        header.push(format!("im_c{i}"));
    }
    write_table(
        &dir.join(amplitudes_file(tag)),
        &header,
        traj.times.iter().zip(&traj.amplitudes).map(|(&t, row)| {
            std::iter::once(t).chain(row.iter().flat_map(|c| [c.re, c.im])).collect()
        }),
    )?;
    for site in 0..n {
        write_series(&dir.join(population_file(tag, site)), &traj.times, &traj.population(site))?;
    }
    Ok(())
}

/// Writes every table and `meta.toml` into `dir`, creating it if needed.
pub fn emit(record: &RunRecord, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_trajectory(dir, REFERENCE_TAG, &record.reference)?;
    let mut reservoirs = Vec::with_capacity(record.reservoirs.len());
    for r in &record.reservoirs {
        let (status, error, diagnostics) = match &r.outcome {
            Ok(run) => {
                write_trajectory(dir, &r.tag, &run.trajectory)?;
                write_series(
                    &dir.join(env_population_file(&r.tag)),
                    &run.trajectory.times,
                    &run.environment_population,
                )?;
                for q in &run.qsd {
                    write_series(&dir.join(qsd_file(q.measure, &r.tag)), &q.times, &q.values)?;
                }
                (Status::Ok, None, Some(run.diagnostics.clone()))
            }
            Err(e) => (Status::Failed, Some(e.clone()), None),
        };
        reservoirs.push(ReservoirMeta {
            tag: r.tag.clone(),
            status,
            error,
            density: r.density,
            calibration: r.calibration.clone(),
            diagnostics,
        });
    }
    let meta = Meta {
        format_version: FORMAT_VERSION,
        scenario_hash: record.scenario_hash.clone(),
        n_samples: record.times().len(),
        t_end: record.times().last().copied().unwrap_or(0.0),
        reference_half_life: record.reference_half_life,
        scenario: record.scenario.clone(),
        reservoirs,
    };
    let text = toml::to_string(&meta).map_err(|e| Error::Format(e.to_string()))?;
    let path = dir.join(META_FILE);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Header and rows of a numeric table.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let io = |e: csv::Error| Error::Format(format!("{}: {e}", path.display()));
    if !path.exists() {
        return Err(Error::Format(format!("missing table {}", path.display())));
    }
    let mut r = csv::Reader::from_path(path).map_err(io)?;
    let header = r.headers().map_err(io)?.iter().map(str::to_string).collect::<Vec<_>>();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io)?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Format(format!("{}: `{f}` is not a number", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

fn read_series(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let (header, rows) = read_table(path)?;
    if header != ["t", "value"] {
        return Err(Error::Format(format!("{}: expected columns t, value", path.display())));
    }
    Ok(rows.into_iter().map(|r| (r[0], r[1])).unzip())
}

fn read_trajectory(dir: &Path, tag: &str) -> Result<AmplitudeTrajectory> {
    let path = dir.join(amplitudes_file(tag));
    let (header, rows) = read_table(&path)?;
    if header.len() < 3 || header.len() % 2 == 0 || header[0] != "t" {
        return Err(Error::Format(format!("{}: bad amplitude header", path.display())));
    }
    let times = rows.iter().map(|r| r[0]).collect();
    let amplitudes = rows
        .iter()
        .map(|r| r[1..].chunks(2).map(|p| Complex64::new(p[0], p[1])).collect())
        .collect();
    AmplitudeTrajectory::new(times, amplitudes, Frame::Lab)
}

/// Reconstructs the record written by [`emit`].
pub fn read_record(dir: impl AsRef<Path>) -> Result<RunRecord> {
    let dir = dir.as_ref();
    let path = dir.join(META_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: Meta = toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if meta.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {}", meta.format_version)));
    }
    let reference = read_trajectory(dir, REFERENCE_TAG)?;
    let mut reservoirs = Vec::with_capacity(meta.reservoirs.len());
    for r in meta.reservoirs {
        let outcome = match r.status {
            Status::Failed => Err(r.error.unwrap_or_default()),
            Status::Ok => {
                let trajectory = read_trajectory(dir, &r.tag)?;
                let (_, environment_population) = read_series(&dir.join(env_population_file(&r.tag)))?;
                let qsd = meta
                    .scenario
                    .measures
                    .iter()
                    .map(|&measure| {
                        let (times, values) = read_series(&dir.join(qsd_file(measure, &r.tag)))?;
                        Ok(QsdSeries { times, values, measure })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let diagnostics = r
                    .diagnostics
                    .ok_or_else(|| Error::Format(format!("reservoir `{}` has no diagnostics", r.tag)))?;
                Ok(ReservoirRun {
                    trajectory,
                    environment_population,
                    qsd,
                    diagnostics,
                })
            }
        };
        reservoirs.push(ReservoirRecord {
            tag: r.tag,
            density: r.density,
            calibration: r.calibration,
            outcome,
        });
    }
    Ok(RunRecord {
        scenario: meta.scenario,
        scenario_hash: meta.scenario_hash,
        reference,
        reference_half_life: meta.reference_half_life,
        reservoirs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub tables: usize,
    /// Largest absolute difference over all tables present in both runs.
    pub max_difference: f64,
    pub problems: Vec<String>,
}

impl Comparison {
    pub fn matches(&self) -> bool {
        self.problems.is_empty()
    }
}

fn csv_files(dir: &Path) -> Result<BTreeSet<String>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = BTreeSet::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".csv") {
            out.insert(name);
        }
    }
    Ok(out)
}

/// Table-by-table diff of two run directories with absolute tolerance `tol`.
pub fn compare(a: impl AsRef<Path>, b: impl AsRef<Path>, tol: f64) -> Result<Comparison> {
    let (a, b): (PathBuf, PathBuf) = (a.as_ref().into(), b.as_ref().into());
    let (fa, fb) = (csv_files(&a)?, csv_files(&b)?);
    let mut problems = Vec::new();
    for name in fa.symmetric_difference(&fb) {
        let side = if fa.contains(name) { "second" } else { "first" };
        problems.push(format!("{name}: missing from the {side} run"));
    }
    let mut max_difference: f64 = 0.0;
    let mut tables = 0;
    for name in fa.intersection(&fb) {
        tables += 1;
        let (ha, ra) = read_table(&a.join(name))?;
        let (hb, rb) = read_table(&b.join(name))?;
        if ha != hb {
            problems.push(format!("{name}: columns differ"));
            continue;
        }
        if ra.len() != rb.len() {
            problems.push(format!("{name}: {} rows against {}", ra.len(), rb.len()));
            continue;
        }
        let mut worst = (0.0f64, 0usize, 0usize);
        for (i, (x, y)) in ra.iter().zip(&rb).enumerate() {
            for (j, (u, v)) in x.iter().zip(y).enumerate() {
                let d = if u == v { 0.0 } else { (u - v).abs() };
                if d > worst.0 || d.is_nan() {
                    worst = (if d.is_nan() { f64::INFINITY } else { d }, i, j);
                }
            }
        }
        max_difference = max_difference.max(worst.0);
        if worst.0 > tol {
            problems.push(format!(
                "{name}: |difference| {:e} in row {}, column `{}`",
                worst.0,
                worst.1 + 1,
                ha[worst.2]
            ));
        }
    }
    Ok(Comparison {
        tables,
        max_difference,
        problems,
    })
}

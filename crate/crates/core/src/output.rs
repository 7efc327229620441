//! CSV artifacts and their `.meta` sidecars.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! value read back parses to the identical `f64`. Lines end in `\n`.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::analysis::SweepReport;
use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::model::StateVec;
use crate::stochastic::EnsembleStats;

pub const TRAJECTORY_HEADER: [&str; 5] = ["time", "s", "ia", "ib", "r"];
pub const SWEEP_HEADER: [&str; 6] = [
    "param_value",
    "peak_ia",
    "peak_time",
    "duration",
    "spread_scale",
    "final_r",
];
pub const DIRECTIONS_HEADER: [&str; 5] = ["metric", "direction", "early_late_ratio", "loading", "mean_abs_step"];

const COMPARTMENTS: [&str; 4] = ["s", "ia", "ib", "r"];

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn finish(path: &Path, mut w: csv::Writer<BufWriter<File>>) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn row(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(|v| v.to_string()).collect()
}

/// Writes `time,s,ia,ib,r`, one row per sample. An empty trajectory gives
/// a header-only file.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    write_states_csv(&traj.times, &traj.states, path)
}

pub fn write_states_csv(times: &[f64], states: &[StateVec], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRAJECTORY_HEADER).map_err(|e| csv_err(path, e))?;
    for (t, x) in times.iter().zip(states) {
        w.write_record(row([*t, x.s, x.ia, x.ib, x.r]))
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Reads a file written by [`write_trajectory_csv`].
pub fn read_trajectory_csv(path: &Path) -> Result<(Vec<f64>, Vec<StateVec>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| csv_err(path, e))?;
    if header.iter().ne(TRAJECTORY_HEADER) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            message: format!("expected header {}", TRAJECTORY_HEADER.join(",")),
        });
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        let mut v = [0.0f64; 5];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field.parse().map_err(|_| Error::Format {
                path: path.to_path_buf(),
                message: format!("row {}: `{field}` is not a number", line + 1),
            })?;
        }
        times.push(v[0]);
        states.push(StateVec::new(v[1], v[2], v[3], v[4]));
    }
    Ok((times, states))
}

/// One row per grid value.
pub fn write_sweep_csv(report: &SweepReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SWEEP_HEADER).map_err(|e| csv_err(path, e))?;
    for (v, m) in report.grid.iter().zip(&report.metrics) {
        w.write_record(row([*v, m.peak_ia, m.peak_time, m.duration, m.spread_scale, m.final_r]))
            .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Direction summary, one row per metric. An undefined early/late ratio
/// is left empty.
pub fn write_directions_csv(report: &SweepReport, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(DIRECTIONS_HEADER).map_err(|e| csv_err(path, e))?;
    for d in &report.directions {
        w.write_record([
            d.metric.as_str().to_string(),
            d.direction.to_string(),
            d.early_late_ratio.map(|r| r.to_string()).unwrap_or_default(),
            d.loading.as_str().to_string(),
            d.mean_abs_step.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// `time`, then `mean_<x>` and `sd_<x>` for every compartment.
pub fn write_ensemble_csv(stats: &EnsembleStats, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["time".to_string()];
    header.extend(COMPARTMENTS.iter().map(|c| format!("mean_{c}")));
    header.extend(COMPARTMENTS.iter().map(|c| format!("sd_{c}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..stats.times.len() {
        let mut r = vec![stats.times[i]];
        r.extend(stats.mean[i].to_array());
        r.extend(stats.sd[i].to_array());
        w.write_record(row(r)).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Per compartment: ODE value, ensemble mean, standard error and the
/// deviation in standard errors.
pub fn write_compare_csv(ode: &Trajectory, stats: &EnsembleStats, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["time".to_string()];
    for c in COMPARTMENTS {
        header.extend([
            format!("ode_{c}"),
            format!("mean_{c}"),
            format!("se_{c}"),
            format!("z_{c}"),
        ]);
    }
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for i in 0..stats.times.len().min(ode.states.len()) {
        let (o, m, se) = (
            ode.states[i].to_array(),
            stats.mean[i].to_array(),
            stats.standard_error(i).to_array(),
        );
        let mut r = vec![stats.times[i]];
        for k in 0..4 {
            r.extend([o[k], m[k], se[k], (m[k] - o[k]) / se[k]]);
        }
        w.write_record(row(r)).map_err(|e| csv_err(path, e))?;
    }
    finish(path, w)
}

/// Ordered `key=value` lines stored next to an output CSV.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Meta {
    entries: Vec<(String, String)>,
}

impl Meta {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends or replaces `key`. Keys may not contain `=` or newlines and
    /// values may not contain newlines.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(
            !key.contains(['=', '\n']) && !value.contains('\n'),
            "bad meta entry {key}"
        );
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut meta = Meta::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: expected key=value", i + 1),
            })?;
            meta.set(k.trim(), v.trim());
        }
        Ok(meta)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// `dir/name.csv` becomes `dir/name.meta`.
pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

//! Trajectory files.
//!
//! CSV has one row per `n` with columns `n, x_1..x_d, residual, t_n`. The
//! `x` fields are empty for iterates skipped by decimation and `t_n` is
//! empty on the last row. Numbers are written with 17 significant digits.
//!
//! JSON holds the whole [`Trajectory`] under a `schema_version`, plus an
//! optional echo of the configuration that produced it.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::diagnostics::GKRecord;
use crate::error::{Error, Result};
use crate::mann_engine::{StartEdge, StopReason, Trajectory};
use crate::operators::OperatorSpec;
use crate::order_graph::ConeRelation;

pub const SCHEMA_VERSION: u32 = 1;

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        Error::Io(e.to_string())
    } else {
        Error::Format(e.to_string())
    }
}

/// 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(field: &str, row: usize, column: &str) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("row {row}: `{field}` in column {column} is not a number")))
}

pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    traj.check_shape()?;
    let d = traj.dimension;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_string()];
    header.extend((1..=d).map(|k| format!("x_{k}")));
    header.push("residual".into());
    header.push("t_n".into());
    w.write_record(&header).map_err(csv_err)?;

    let mut stored = traj.recorded.iter().zip(&traj.iterates).peekable();
    let mut row = Vec::with_capacity(d + 3);
    for n in 1..=traj.len() {
        row.clear();
        row.push(n.to_string());
        match stored.peek() {
            Some((&m, x)) if m == n => {
                row.extend(x.iter().map(|v| format_f64(*v)));
                stored.next();
            }
            _ => row.extend(std::iter::repeat_n(String::new(), d)),
        }
        row.push(format_f64(traj.residuals[n - 1]));
        row.push(
            traj.schedule_used
                .get(n - 1)
                .map_or_else(String::new, |t| format_f64(*t)),
        );
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv_string(traj: &Trajectory) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(traj, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

/// The columns of a trajectory CSV. Run metadata is not part of the file;
/// [`CsvTrace::into_trajectory`] recovers it against an operator.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTrace {
    pub dimension: usize,
    pub recorded: Vec<usize>,
    pub iterates: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub schedule_used: Vec<f64>,
}

pub fn read_csv<R: Read>(input: R) -> Result<CsvTrace> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let n_col = col("n").ok_or_else(|| Error::Format("missing column `n`".into()))?;
    let r_col = col("residual").ok_or_else(|| Error::Format("missing column `residual`".into()))?;
    let t_col = col("t_n").ok_or_else(|| Error::Format("missing column `t_n`".into()))?;
    let mut x_cols = Vec::new();
    while let Some(c) = col(&format!("x_{}", x_cols.len() + 1)) {
        x_cols.push(c);
    }
    let d = x_cols.len();
    if d == 0 {
        return Err(Error::Format("no coordinate columns x_1..x_d".into()));
    }
    if header.len() != d + 3 {
        return Err(Error::Format(format!(
            "expected {} columns for dimension {d}, found {}",
            d + 3,
            header.len()
        )));
    }

    let mut trace = CsvTrace {
        dimension: d,
        recorded: Vec::new(),
        iterates: Vec::new(),
        residuals: Vec::new(),
        schedule_used: Vec::new(),
    };
    let mut rows = r.records().peekable();
    while let Some(rec) = rows.next() {
        let rec = rec.map_err(csv_err)?;
        let expected = trace.residuals.len() + 1;
        let n: usize = rec[n_col]
            .trim()
            .parse()
            .map_err(|_| Error::Format(format!("row {expected}: bad index `{}`", &rec[n_col])))?;
        if n != expected {
            return Err(Error::Format(format!("row {expected}: index {n} out of sequence")));
        }
        let blank = x_cols.iter().filter(|&&c| rec[c].trim().is_empty()).count();
        if blank == 0 {
            let x = x_cols
                .iter()
                .enumerate()
                .map(|(k, &c)| parse_f64(&rec[c], n, &format!("x_{}", k + 1)))
                .collect::<Result<Vec<_>>>()?;
            trace.recorded.push(n);
            trace.iterates.push(x);
        } else if blank != d {
            return Err(Error::Format(format!("row {n}: partially blank iterate")));
        }
        trace.residuals.push(parse_f64(&rec[r_col], n, "residual")?);
        let last = rows.peek().is_none();
        let t = rec[t_col].trim();
        match (t.is_empty(), last) {
            (false, false) => trace.schedule_used.push(parse_f64(t, n, "t_n")?),
            (true, true) => {}
            (true, false) => return Err(Error::Format(format!("row {n}: missing t_n"))),
            (false, true) => {
                return Err(Error::Format(format!("row {n}: last row must have empty t_n")))
            }
        }
    }
    if trace.residuals.is_empty() {
        return Err(Error::Format("no rows".into()));
    }
    Ok(trace)
}

impl CsvTrace {
    /// Rebuilds a [`Trajectory`]. The start orientation is reclassified under
    /// `rel` and the stop reason is `ToleranceMet` when the last residual is
    /// at most `tol`, `MaxIterations` otherwise.
    pub fn into_trajectory(
        self,
        op: &OperatorSpec,
        rel: Option<&ConeRelation>,
        tol: f64,
    ) -> Result<Trajectory> {
        let last_r = *self.residuals.last().expect("nonempty");
        let stride = match self.recorded.as_slice() {
            [_, second, ..] => second - 1,
            _ => 1,
        };
        let start_edge = match (rel, self.iterates.first()) {
            (Some(rel), Some(x1)) if self.recorded.first() == Some(&1) => {
                Some(StartEdge::classify(rel, x1, &op.evaluate(x1)?)?)
            }
            _ => None,
        };
        let traj = Trajectory {
            dimension: self.dimension,
            recorded: self.recorded,
            iterates: self.iterates,
            residuals: self.residuals,
            schedule_used: self.schedule_used,
            stop_reason: if last_r <= tol {
                StopReason::ToleranceMet
            } else {
                StopReason::MaxIterations
            },
            record_stride: stride,
            start_edge,
            operator_ref: op.label(),
            space_ref: format!("l_{:?}^{}", op.space().p().value(), op.dimension()),
            relation_ref: rel
                .map(|r| format!("cone[{} rows]", r.generator().len()))
                .unwrap_or_else(|| "none".into()),
        };
        traj.check_shape()?;
        Ok(traj)
    }
}

/// Contents of a trajectory JSON file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub schema_version: u32,
    pub trajectory: Trajectory,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

pub fn write_json<W: Write>(traj: &Trajectory, config: serde_json::Value, out: W) -> Result<()> {
    traj.check_shape()?;
    let file = TrajectoryFile {
        schema_version: SCHEMA_VERSION,
        trajectory: traj.clone(),
        config,
    };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &file).map_err(|e| Error::Format(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<R: Read>(input: R) -> Result<TrajectoryFile> {
    let file: TrajectoryFile =
        serde_json::from_reader(input).map_err(|e| Error::Format(e.to_string()))?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported schema_version {}",
            file.schema_version
        )));
    }
    file.trajectory.check_shape()?;
    Ok(file)
}

pub fn write_gk_csv<W: Write>(records: &[GKRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "n", "lhs", "rhs", "slack"]).map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.i.to_string(),
            r.n.to_string(),
            format_f64(r.lhs),
            format_f64(r.rhs),
            format_f64(r.slack),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

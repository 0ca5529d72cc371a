//! The `run`, `sweep`, `audit` and `report` subcommands.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use mann_core::export::{self, read_csv, read_json, write_csv, write_gk_csv, write_json};
use mann_core::diagnostics::GKRecord;
use mann_core::Trajectory;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::experiment::{AuditSummary, Experiment, Outcome};

/// Flags shared by every subcommand that reads a config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub quiet: bool,
}

fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse()
        .map_err(|e: toml::de::Error| CliError::Config(format!("{}: {e}", path.display())))
}

fn apply_overrides(mut table: toml::Table, o: &Overrides) -> Result<ExperimentConfig, CliError> {
    if let Some(seed) = o.seed {
        let seed = i64::try_from(seed)
            .map_err(|_| CliError::Config(format!("seed {seed} does not fit a TOML integer")))?;
        table.insert("seed".into(), toml::Value::Integer(seed));
    }
    let mut cfg = ExperimentConfig::from_table(table)?;
    if let Some(out) = &o.out {
        cfg.output.directory = out.display().to_string();
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<(), CliError> {
    w.flush().map_err(|e| CliError::io(path, e))
}

fn write_audit(dir: &Path, summary: &AuditSummary) -> Result<(), CliError> {
    let path = dir.join("audit.json");
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, summary).expect("audit summary serializes");
    w.write_all(b"\n").map_err(|e| CliError::io(&path, e))?;
    finish(w, &path)
}

fn gk_records(summary: &AuditSummary) -> Vec<GKRecord> {
    summary
        .auditors
        .get("goebel_kirk")
        .and_then(|e| serde_json::from_value(e.records.clone()).ok())
        .unwrap_or_default()
}

/// Result of one experiment.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub summary: AuditSummary,
    pub directory: PathBuf,
}

impl RunResult {
    pub fn outcome(&self) -> Outcome {
        self.summary.outcome()
    }
}

/// Runs, audits, and writes the configured files into the output directory.
pub fn execute(table: toml::Table, o: &Overrides) -> Result<RunResult, CliError> {
    let echo = serde_json::to_value(&table).expect("TOML tables convert to JSON");
    let cfg = apply_overrides(table, o)?;
    let exp = Experiment::build(&cfg)?;
    let traj = exp.run()?;
    let summary = exp.audit(&traj)?;

    let dir = PathBuf::from(&cfg.output.directory);
    create_dir(&dir)?;
    for format in &cfg.output.formats {
        match format {
            Format::Csv => {
                let path = dir.join("trajectory.csv");
                let mut w = create(&path)?;
                write_csv(&traj, &mut w)?;
                finish(w, &path)?;
            }
            Format::Json => {
                let path = dir.join("trajectory.json");
                let mut w = create(&path)?;
                write_json(&traj, echo.clone(), &mut w)?;
                finish(w, &path)?;
            }
        }
    }
    if cfg.output.gk_csv {
        let path = dir.join("gk_records.csv");
        let mut w = create(&path)?;
        write_gk_csv(&gk_records(&summary), &mut w)?;
        finish(w, &path)?;
    }
    write_audit(&dir, &summary)?;
    Ok(RunResult {
        trajectory: traj,
        summary,
        directory: dir,
    })
}

pub fn cmd_run(config: &Path, o: &Overrides) -> Result<Outcome, CliError> {
    let result = execute(read_table(config)?, o)?;
    if !o.quiet {
        let t = &result.trajectory;
        println!(
            "stop: {:?} after {} steps, final residual {:e}",
            t.stop_reason,
            t.len() - 1,
            t.final_residual().unwrap_or(f64::NAN)
        );
        print!("{}", render_table(&result.summary));
        println!("wrote {}", result.directory.display());
    }
    Ok(result.outcome())
}

/// Sets the numeric field at dotted `axis`, keeping its integer or float type.
pub fn set_axis(table: &mut toml::Table, axis: &str, value: &str) -> Result<(), CliError> {
    let unknown = || CliError::Config(format!("unknown axis `{axis}`"));
    let mut keys: Vec<&str> = axis.split('.').collect();
    let last = keys.pop().filter(|k| !k.is_empty()).ok_or_else(unknown)?;
    let mut cur = table;
    for k in keys {
        cur = cur
            .get_mut(k)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(unknown)?;
    }
    let slot = cur.get_mut(last).ok_or_else(unknown)?;
    let bad = || CliError::Config(format!("value `{value}` for `{axis}` is not a number"));
    *slot = match slot {
        toml::Value::Integer(_) => toml::Value::Integer(value.trim().parse().map_err(|_| bad())?),
        toml::Value::Float(_) => toml::Value::Float(value.trim().parse().map_err(|_| bad())?),
        _ => return Err(CliError::Config(format!("axis `{axis}` is not a numeric field"))),
    };
    Ok(())
}

/// One row of `sweep_summary.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: String,
    pub final_residual: f64,
    pub iterations: usize,
    pub all_pass: bool,
    pub outcome: Outcome,
}

pub fn sweep(
    config: &Path,
    axis: &str,
    values: &[String],
    o: &Overrides,
) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    let base = read_table(config)?;
    let root = o.out.clone().unwrap_or_else(|| {
        let cfg_dir = base
            .get("output")
            .and_then(|v| v.get("directory"))
            .and_then(toml::Value::as_str)
            .unwrap_or("out");
        PathBuf::from(cfg_dir)
    });
    let tables = values
        .iter()
        .map(|v| {
            let mut t = base.clone();
            set_axis(&mut t, axis, v)?;
            Ok(t)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let rows = tables
        .into_par_iter()
        .enumerate()
        .map(|(k, table)| {
            let run_o = Overrides {
                out: Some(root.join(format!("run_{k:03}"))),
                seed: o.seed,
                quiet: true,
            };
            let r = execute(table, &run_o)?;
            let outcome = r.outcome();
            Ok(SweepRow {
                value: values[k].trim().to_string(),
                final_residual: r.trajectory.final_residual().unwrap_or(f64::NAN),
                iterations: r.trajectory.len() - 1,
                all_pass: outcome == Outcome::Pass,
                outcome,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    create_dir(&root)?;
    let path = root.join("sweep_summary.csv");
    let mut w = create(&path)?;
    let mut text = String::from("value,final_residual,iterations,all_pass\n");
    for r in &rows {
        writeln!(
            text,
            "{},{},{},{}",
            r.value,
            export::format_f64(r.final_residual),
            r.iterations,
            r.all_pass
        )
        .expect("writing to a String");
    }
    w.write_all(text.as_bytes()).map_err(|e| CliError::io(&path, e))?;
    finish(w, &path)?;
    Ok(rows)
}

pub fn cmd_sweep(
    config: &Path,
    axis: &str,
    values: &[String],
    o: &Overrides,
) -> Result<Outcome, CliError> {
    let rows = sweep(config, axis, values, o)?;
    if !o.quiet {
        println!("{:<16} {:>24} {:>10}  all_pass", axis, "final_residual", "iterations");
        for r in &rows {
            println!(
                "{:<16} {:>24e} {:>10}  {}",
                r.value, r.final_residual, r.iterations, r.all_pass
            );
        }
    }
    Ok(Outcome::of_outcomes(rows.iter().map(|r| r.outcome)))
}

/// Reads a trajectory file written by `run`; `.csv` or `.json` by extension.
pub fn load_trajectory(path: &Path, exp: &Experiment, tol: f64) -> Result<Trajectory, CliError> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let reader = BufReader::new(file);
    let traj = match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => read_csv(reader)?.into_trajectory(&exp.operator, Some(&exp.relation), tol)?,
        Some("json") => read_json(reader)?.trajectory,
        _ => {
            return Err(CliError::Config(format!(
                "{}: expected a .csv or .json trajectory",
                path.display()
            )))
        }
    };
    if traj.dimension != exp.operator.dimension() {
        return Err(CliError::Config(format!(
            "trajectory dimension {} does not match the config dimension {}",
            traj.dimension,
            exp.operator.dimension()
        )));
    }
    Ok(traj)
}

pub fn cmd_audit(trajectory: &Path, config: &Path, o: &Overrides) -> Result<Outcome, CliError> {
    let cfg = apply_overrides(read_table(config)?, o)?;
    let exp = Experiment::build(&cfg)?;
    let traj = load_trajectory(trajectory, &exp, cfg.run.tol)?;
    let summary = exp.audit(&traj)?;
    if let Some(dir) = &o.out {
        create_dir(dir)?;
        write_audit(dir, &summary)?;
    }
    if !o.quiet {
        print!("{}", render_table(&summary));
    }
    Ok(summary.outcome())
}

/// Plain-text table of an audit summary.
pub fn render_table(summary: &AuditSummary) -> String {
    let mut s = format!(
        "{:<18} {:<18} {:>8} {:>9}\n",
        "auditor", "status", "trials", "failures"
    );
    for (name, e) in &summary.auditors {
        let status = serde_json::to_value(e.status).expect("status serializes");
        writeln!(
            s,
            "{:<18} {:<18} {:>8} {:>9}",
            name,
            status.as_str().unwrap_or("?"),
            e.trials,
            e.failures
        )
        .expect("writing to a String");
    }
    let overall = match summary.outcome() {
        Outcome::Pass => "pass",
        Outcome::HypothesisNotMet => "hypothesis_not_met",
        Outcome::Fail => "fail",
    };
    writeln!(s, "overall: {overall}").expect("writing to a String");
    s
}

/// Renders `audit.json`, or `audit.json` inside a directory.
pub fn cmd_report(path: &Path) -> Result<Outcome, CliError> {
    let path = if path.is_dir() {
        path.join("audit.json")
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    let summary: AuditSummary = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    print!("{}", render_table(&summary));
    Ok(summary.outcome())
}

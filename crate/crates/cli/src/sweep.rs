use std::io::{BufWriter, Write};
use std::path::PathBuf;

use bures_core::oracle::werner_bures_reference;
use bures_core::train::train_resource;
use rayon::prelude::*;
use serde::Serialize;

use crate::{create_file, ExperimentConfig, Result, RunOptions};

pub const SWEEP_HEADER: [&str; 7] =
    ["p", "mean_R_half", "min_R_half", "max_R_half", "oracle_R_half", "n_failed_restarts", "wall_time"];

/// One grid point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub p: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub oracle: Option<f64>,
    pub n_failed: usize,
    pub wall_time: f64,
}

impl SweepRow {
    fn record(&self) -> [String; 7] {
        [
            self.p.to_string(),
            self.mean.to_string(),
            self.min.to_string(),
            self.max.to_string(),
            self.oracle.map(|v| v.to_string()).unwrap_or_default(),
            self.n_failed.to_string(),
            format!("{:.3}", self.wall_time),
        ]
    }
}

#[derive(Serialize)]
struct TraceLine<'a> {
    p: f64,
    restart: usize,
    final_cost: Option<f64>,
    cost_trace: &'a [f64],
}

/// Rows in grid order plus the files written.
#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    pub trace: Option<PathBuf>,
}

/// Trains every grid point (point `i` seeded with `seed + i`) and writes the
/// CSV, plus a per-restart JSONL trace when the config asks for one.
pub fn run_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<SweepOutput> {
    cfg.validate()?;
    let train = cfg.effective_train(opts);
    let points: Vec<_> = cfg
        .grid
        .par_iter()
        .enumerate()
        .map(|(i, &p)| -> Result<_> {
            let rho = cfg.state.state(p)?;
            let mut point_cfg = train.clone();
            point_cfg.seed = train.seed.wrapping_add(i as u64);
            let report = train_resource(&rho, &cfg.resource, &cfg.ansatz, &point_cfg)?;
            eprintln!("{}: p={p} best R/2={:.5} ({:.1}s)", cfg.name, report.best_cost, report.wall_time);
            Ok((p, report))
        })
        .collect::<Result<_>>()?;

    let csv_path = cfg.output_path(opts);
    let mut writer = csv::Writer::from_writer(create_file(&csv_path)?);
    writer.write_record(SWEEP_HEADER)?;
    let mut rows = Vec::with_capacity(points.len());
    for (p, report) in &points {
        let row = SweepRow {
            p: *p,
            mean: report.restart_stats.mean,
            min: report.restart_stats.min,
            max: report.restart_stats.max,
            oracle: if cfg.has_oracle() { Some(werner_bures_reference(*p)?) } else { None },
            n_failed: report.n_failed,
            wall_time: report.wall_time,
        };
        writer.write_record(row.record())?;
        rows.push(row);
    }
    writer.flush()?;

    let trace = if cfg.emit_trace {
        let path = csv_path.with_extension("trace.jsonl");
        let mut out = BufWriter::new(create_file(&path)?);
        for (p, report) in &points {
            for r in &report.restarts {
                let line = TraceLine { p: *p, restart: r.restart, final_cost: r.final_cost, cost_trace: &r.cost_trace };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
        }
        out.flush()?;
        Some(path)
    } else {
        None
    };
    Ok(SweepOutput { rows, csv: csv_path, trace })
}

//! Running experiments and sweeps, summarizing them, and writing CSVs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mhlj::chain::VisitDiagnostics;
use mhlj::kernels::{weighted_target, DENSE_LIMIT};
use mhlj::walker::{communication_stats, strategy_kernel, CommunicationStats};
use mhlj::{ChainStats, Instance, Record, Trainer};
use rayon::prelude::*;

use crate::error::Result;
use crate::spec::{ExperimentSpec, SweepSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const TRACE_COLUMNS: [&str; 6] = ["t", "node", "sq_error", "global_loss", "cum_transitions", "jumped"];
pub const SUMMARY_COLUMNS: [&str; 13] = [
    "strategy",
    "kind",
    "params",
    "seeds",
    "median_final_sq_error",
    "median_plateau_sq_error",
    "iters_to_threshold",
    "median_half_cover_time",
    "mean_transitions_per_update",
    "transition_bound",
    "eta",
    "tv_to_target",
    "db_residual",
];
/// Relative level defining iterations-to-threshold.
pub const THRESHOLD_FRACTION: f64 = 0.1;

/// One (strategy, seed) run.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub strategy: usize,
    pub seed: u64,
    pub trace: Vec<Record>,
    pub half_cover_time: Option<usize>,
    pub communication: CommunicationStats,
    /// Mean recorded `sq_error` over the last quarter of the trace.
    pub plateau: f64,
    pub switched_at: Option<usize>,
    /// Chain statistics of the strategy kernel on this seed's instance;
    /// `None` beyond the dense size limit.
    pub chain: Option<ChainStats<f64>>,
}

#[derive(Debug, Clone)]
pub struct StrategySummary {
    pub label: String,
    pub kind: String,
    /// Kernel parameters as `key=value` pairs joined by `;`.
    pub params: String,
    pub seeds: usize,
    pub median_final_sq_error: f64,
    pub median_plateau_sq_error: f64,
    /// First recorded `t` at which the median curve drops to
    /// `THRESHOLD_FRACTION` of its initial value.
    pub iters_to_threshold: Option<usize>,
    pub median_half_cover_time: f64,
    pub mean_transitions_per_update: f64,
    pub transition_bound: f64,
    pub eta: f64,
    pub tv_to_target: f64,
    pub db_residual: f64,
    /// `(t, median sq_error)` over seeds.
    pub median_curve: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct ExperimentSummary {
    pub name: String,
    pub dir: PathBuf,
    pub strategies: Vec<StrategySummary>,
}

impl ExperimentSummary {
    pub fn get(&self, label: &str) -> Option<&StrategySummary> {
        self.strategies.iter().find(|s| s.label == label)
    }
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub dir: PathBuf,
    pub points: Vec<(f64, Vec<StrategySummary>)>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn run_cell(spec: &ExperimentSpec, strategy: usize, instance: &Instance, seed: u64) -> Result<CellOutcome> {
    let sspec = &spec.strategies[strategy];
    let config = sspec.trainer_config(instance);
    let result = Trainer::new(instance, config)?.run_seeded(seed);
    let visits = VisitDiagnostics::<f64>::from_trajectory(&result.visit_log, instance.n())?;
    let tail = &result.trace[result.trace.len() * 3 / 4..];
    let plateau = tail.iter().map(|r| r.sq_error).sum::<f64>() / tail.len() as f64;
    let chain = if instance.n() <= DENSE_LIMIT {
        let kernel = strategy_kernel(instance, &sspec.strategy)?;
        let target = weighted_target(instance.lipschitz());
        Some(ChainStats::compute(&kernel, Some(&target))?)
    } else {
        None
    };
    log::debug!("{} seed {seed}: plateau {plateau:.4e}", sspec.label());
    Ok(CellOutcome {
        strategy,
        seed,
        communication: communication_stats(&result),
        half_cover_time: visits.half_cover_time,
        plateau,
        switched_at: result.switched_at,
        trace: result.trace,
        chain,
    })
}

/// Runs every (strategy, seed) cell, in parallel, without writing anything.
pub fn execute(spec: &ExperimentSpec) -> Result<Vec<CellOutcome>> {
    spec.validate()?;
    let instances = spec
        .seeds
        .iter()
        .map(|&s| spec.instance(s))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> = (0..spec.strategies.len())
        .flat_map(|k| (0..spec.seeds.len()).map(move |i| (k, i)))
        .collect();
    cells
        .par_iter()
        .map(|&(k, i)| run_cell(spec, k, &instances[i], spec.seeds[i]))
        .collect()
}

pub fn summarize(spec: &ExperimentSpec, cells: &[CellOutcome]) -> Vec<StrategySummary> {
    spec.strategies
        .iter()
        .enumerate()
        .map(|(k, sspec)| {
            let mine: Vec<&CellOutcome> = cells.iter().filter(|c| c.strategy == k).collect();
            let rows = mine.iter().map(|c| c.trace.len()).min().unwrap_or(0);
            let median_curve: Vec<(usize, f64)> = (0..rows)
                .map(|i| {
                    let vals: Vec<f64> = mine.iter().map(|c| c.trace[i].sq_error).collect();
                    (mine[0].trace[i].t, median(&vals))
                })
                .collect();
            let iters_to_threshold = median_curve.first().and_then(|&(_, e0)| {
                median_curve
                    .iter()
                    .find(|&&(_, e)| e <= THRESHOLD_FRACTION * e0)
                    .map(|&(t, _)| t)
            });
            let chain_median = |f: &dyn Fn(&ChainStats<f64>) -> f64| {
                let v: Vec<f64> = mine.iter().filter_map(|c| c.chain.as_ref().map(f)).collect();
                median(&v)
            };
            StrategySummary {
                label: sspec.label().to_string(),
                kind: sspec.strategy.name().to_string(),
                params: sspec.strategy.kernel_kind().params_string(),
                seeds: mine.len(),
                median_final_sq_error: median(
                    &mine.iter().map(|c| c.trace.last().map_or(f64::NAN, |r| r.sq_error)).collect::<Vec<_>>(),
                ),
                median_plateau_sq_error: median(&mine.iter().map(|c| c.plateau).collect::<Vec<_>>()),
                iters_to_threshold,
                median_half_cover_time: median(
                    &mine
                        .iter()
                        .map(|c| c.half_cover_time.map_or(f64::INFINITY, |t| t as f64))
                        .collect::<Vec<_>>(),
                ),
                mean_transitions_per_update: mine
                    .iter()
                    .map(|c| c.communication.mean_transitions_per_update)
                    .sum::<f64>()
                    / mine.len() as f64,
                transition_bound: mine.first().map_or(f64::NAN, |c| c.communication.bound),
                eta: chain_median(&|s| s.spectral_gap),
                tv_to_target: chain_median(&|s| s.tv_to_target.unwrap_or(f64::NAN)),
                db_residual: chain_median(&|s| s.db_residual),
                median_curve,
            }
        })
        .collect()
}

pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn trace_fields(r: &Record) -> [String; 6] {
    [
        r.t.to_string(),
        r.node.to_string(),
        fmt_float(r.sq_error),
        fmt_float(r.global_loss),
        r.cumulative_transitions.to_string(),
        u8::from(r.jumped).to_string(),
    ]
}

pub fn write_trace_csv(path: &Path, trace: &[Record]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_COLUMNS)?;
    for r in trace {
        w.write_record(trace_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

fn summary_fields(s: &StrategySummary) -> Vec<String> {
    vec![
        s.label.clone(),
        s.kind.clone(),
        s.params.clone(),
        s.seeds.to_string(),
        fmt_float(s.median_final_sq_error),
        fmt_float(s.median_plateau_sq_error),
        s.iters_to_threshold.map_or_else(|| "inf".to_string(), |t| t.to_string()),
        fmt_float(s.median_half_cover_time),
        fmt_float(s.mean_transitions_per_update),
        fmt_float(s.transition_bound),
        fmt_float(s.eta),
        fmt_float(s.tv_to_target),
        fmt_float(s.db_residual),
    ]
}

/// Opens `path`, writes the schema comment, and hands back a CSV writer.
fn versioned_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# schema={SCHEMA_VERSION}")?;
    Ok(csv::Writer::from_writer(out))
}

pub fn write_summary_csv(path: &Path, rows: &[StrategySummary]) -> Result<()> {
    let mut w = versioned_writer(path)?;
    w.write_record(SUMMARY_COLUMNS)?;
    for s in rows {
        w.write_record(summary_fields(s))?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `spec` and writes `<output_dir>/<name>/{label}_{seed}.csv`,
/// `summary.csv` and `config_echo.toml`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentSummary> {
    spec.validate()?;
    let dir = spec.run_dir();
    std::fs::create_dir_all(&dir)?;
    let cells = execute(spec)?;
    cells.par_iter().try_for_each(|c| {
        let label = spec.strategies[c.strategy].label();
        write_trace_csv(&dir.join(format!("{label}_{}.csv", c.seed)), &c.trace)
    })?;
    let strategies = summarize(spec, &cells);
    write_summary_csv(&dir.join("summary.csv"), &strategies)?;
    std::fs::write(dir.join("config_echo.toml"), spec.to_toml()?)?;
    Ok(ExperimentSummary {
        name: spec.name.clone(),
        dir,
        strategies,
    })
}

/// Runs every axis value of `sweep` and writes the long-format
/// `sweep.csv` and the per-point `sweep_summary.csv`.
pub fn run_sweep(sweep: &SweepSpec) -> Result<SweepSummary> {
    sweep.validate()?;
    let dir = sweep.base.run_dir();
    std::fs::create_dir_all(&dir)?;
    let axis = sweep.axis.name();
    let mut long = versioned_writer(&dir.join("sweep.csv"))?;
    let mut header = vec!["axis", "value", "strategy", "seed"];
    header.extend(TRACE_COLUMNS);
    header.extend(["eta", "tv_to_target", "db_residual"]);
    long.write_record(&header)?;
    let mut points = Vec::with_capacity(sweep.values.len());
    for &value in &sweep.values {
        let spec = sweep.point(value)?;
        let cells = execute(&spec)?;
        for c in &cells {
            let label = spec.strategies[c.strategy].label();
            let chain = c.chain.as_ref();
            let chain_fields = [
                fmt_float(chain.map_or(f64::NAN, |s| s.spectral_gap)),
                fmt_float(chain.and_then(|s| s.tv_to_target).unwrap_or(f64::NAN)),
                fmt_float(chain.map_or(f64::NAN, |s| s.db_residual)),
            ];
            for r in &c.trace {
                let mut row = vec![axis.to_string(), fmt_float(value), label.to_string(), c.seed.to_string()];
                row.extend(trace_fields(r));
                row.extend(chain_fields.iter().cloned());
                long.write_record(&row)?;
            }
        }
        points.push((value, summarize(&spec, &cells)));
    }
    long.flush()?;

    let mut w = versioned_writer(&dir.join("sweep_summary.csv"))?;
    let mut header = vec!["axis", "value"];
    header.extend(SUMMARY_COLUMNS);
    w.write_record(&header)?;
    for (value, rows) in &points {
        for s in rows {
            let mut row = vec![axis.to_string(), fmt_float(*value)];
            row.extend(summary_fields(s));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    std::fs::write(dir.join("config_echo.toml"), sweep.to_toml()?)?;
    Ok(SweepSummary { dir, points })
}

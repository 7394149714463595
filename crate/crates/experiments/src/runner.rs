//! Sweep orchestration and CSV/JSON output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mmia::analytic::{QuadratureSpec, SidelobeOptions};
use mmia::dataplane::DataCodebooks;
use mmia::latency::{
    expected_ia_latency, optimize_beamwidth, total_latency_from_rates, AnalyticEvaluator, AnalyticModel,
    FailureEvaluator, SimEvaluator,
};
use mmia::sim::{estimate_failure, estimate_failure_and_rate, AntennaModel, Scheme, SchemeConfig};
use mmia::{BlockageMode, FrameTiming, SystemParams};
use rayon::prelude::*;
use serde::Serialize;

use crate::calibrate::{calibrate_epsilon, CalibrationOptions, CalibrationResult, CalibrationStatus};
use crate::config::*;

pub const CSV_COLUMNS: [&str; 12] = [
    "sweep_param",
    "sweep_value",
    "series",
    "scheme",
    "engine",
    "model",
    "metric",
    "estimate",
    "uncertainty",
    "evaluations",
    "seed",
    "error",
];

/// One CSV line. `uncertainty` is the 95% half-width for Monte Carlo rows
/// and the propagated quadrature error for analytic rows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub sweep_param: String,
    pub sweep_value: f64,
    pub series: String,
    pub scheme: String,
    pub engine: String,
    pub model: String,
    pub metric: String,
    pub estimate: f64,
    pub uncertainty: f64,
    pub evaluations: u64,
    pub seed: Option<u64>,
    pub error: String,
}

/// Where ε came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonSource {
    pub value: f64,
    pub calibration: Option<CalibrationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimum {
    pub series: String,
    pub engine: String,
    pub model: String,
    pub n_bs: Option<usize>,
    pub e_ia_ms: Option<f64>,
    pub smallest_p_f: f64,
    pub unimodal: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutput {
    pub rows: Vec<Row>,
    pub epsilon: EpsilonSource,
    pub optima: Vec<Optimum>,
    pub wall_time_s: f64,
}

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

/// Simulated-search configuration for a coherence setting.
pub fn scheme_config(sim: Simulation, coherence: Coherence) -> SchemeConfig {
    let cycle = match coherence {
        Coherence::Cycle => true,
        Coherence::Slot => false,
        Coherence::Auto => sim.antenna == AntennaModel::Ula,
    };
    if cycle {
        SchemeConfig::cycle_coherent(sim.scheme, sim.antenna)
    } else {
        SchemeConfig {
            blockage: Some(BlockageMode::PerSlot),
            ..SchemeConfig::new(sim.scheme, sim.antenna)
        }
    }
}

/// The scheme's frame: an SS burst long enough for one full search.
fn scheme_frame(scheme: Scheme) -> FrameTiming {
    FrameTiming::with_ss_blocks(scheme.default_ss_blocks())
}

fn resolve_epsilon(spec: &ExperimentSpec) -> Result<EpsilonSource, String> {
    let uses_sidelobes = spec.engines.analytic && spec.models.contains(&AnalyticModel::Sidelobe);
    if !(spec.calibration.enabled && uses_sidelobes) {
        return Ok(EpsilonSource {
            value: spec.params.epsilon,
            calibration: None,
        });
    }
    let options = CalibrationOptions {
        max_residual: spec.calibration.max_residual,
        ..Default::default()
    };
    let cal = calibrate_epsilon(&spec.calibration.anchors, &spec.params, &options).map_err(|e| e.to_string())?;
    if cal.status == CalibrationStatus::Failed {
        return Err(format!(
            "ε calibration failed: best ε = {} leaves RMS residual {} > {} (residuals {:?})",
            cal.epsilon, cal.rms_residual, spec.calibration.max_residual, cal.residuals
        ));
    }
    Ok(EpsilonSource {
        value: cal.epsilon,
        calibration: Some(cal),
    })
}

/// One parameter set of the sweep grid.
struct Point {
    series: String,
    sweep_value: f64,
    params: SystemParams,
}

fn points(spec: &ExperimentSpec, epsilon: f64) -> Vec<Point> {
    let series_count = spec.series.as_ref().map_or(1, Axis::len);
    let beams_vary = [Some(&spec.sweep), spec.series.as_ref()]
        .into_iter()
        .flatten()
        .any(|a| matches!(a.param, Param::Beams | Param::NBs));
    let mut out = Vec::new();
    for s in 0..series_count {
        for i in 0..spec.sweep.len() {
            let mut params = spec.params.clone();
            params.epsilon = epsilon;
            let mut series = String::new();
            if let Some(axis) = &spec.series {
                axis.apply(s, &mut params);
                series = axis.label(s);
            }
            spec.sweep.apply(i, &mut params);
            // Budgets follow the beam count when the beam count varies.
            if beams_vary && spec.sweep.param != Param::NC {
                params.n_c = spec.k_cycles * params.n_bs;
            }
            out.push(Point {
                series,
                sweep_value: if spec.sweep.param == Param::Beams {
                    i as f64
                } else {
                    spec.sweep.values[i]
                },
                params,
            });
        }
    }
    out
}

fn base_row(spec: &ExperimentSpec, pt: &Point, scheme: &str, engine: &str, model: &str) -> Row {
    Row {
        sweep_param: spec.sweep.param.name().into(),
        sweep_value: pt.sweep_value,
        series: pt.series.clone(),
        scheme: scheme.into(),
        engine: engine.into(),
        model: model.into(),
        metric: "p_f".into(),
        estimate: f64::NAN,
        uncertainty: f64::NAN,
        evaluations: 0,
        seed: None,
        error: String::new(),
    }
}

/// A failure probability, optionally turned into E[D_I] with `frame`.
fn push_failure(rows: &mut Vec<Row>, row: Row, result: Result<(f64, f64, u64), String>, frame: Option<FrameTiming>) {
    match result {
        Ok((p, u, n)) => {
            rows.push(Row {
                estimate: p,
                uncertainty: u,
                evaluations: n,
                ..row.clone()
            });
            if let Some(f) = frame {
                let d = expected_ia_latency(p, &f);
                rows.push(Row {
                    metric: "e_ia_ms".into(),
                    estimate: d.as_ref().copied().unwrap_or(f64::NAN),
                    uncertainty: f64::NAN,
                    evaluations: n,
                    error: d.err().map(|e| e.to_string()).unwrap_or_default(),
                    ..row
                });
            }
        }
        Err(e) => rows.push(Row { error: e, ..row }),
    }
}

fn analytic_failure(model: AnalyticModel, params: &SystemParams) -> Result<(f64, f64, u64), String> {
    let spec = QuadratureSpec::default();
    let r = match model {
        AnalyticModel::Los => mmia::analytic::failure_prob_los(params, params.n_c, &spec),
        AnalyticModel::Nlos => mmia::analytic::failure_prob_nlos(params, params.n_c, &spec),
        AnalyticModel::Sidelobe => {
            mmia::analytic::failure_prob_sidelobe(params, params.n_c, &spec, &SidelobeOptions::default())
        }
    };
    r.map(|r| (r.value, r.error_estimate, r.evaluations as u64))
        .map_err(|e| e.to_string())
}

/// Failure of a simulated search. When the sweep sets the slot budget, ES
/// and IS only report after their full sweep, so a shorter budget fails.
fn simulated_failure(spec: &ExperimentSpec, sim: Simulation, params: &SystemParams) -> Result<(f64, f64, u64), String> {
    let config = scheme_config(sim, spec.coherence);
    let budgeted = spec.sweep.param == Param::NC;
    if budgeted && sim.scheme != Scheme::RandomBeamforming && params.n_c < config.slots(params) {
        return Ok((1.0, 0.0, 0));
    }
    estimate_failure(&config, params, spec.trials, spec.seed)
        .map(|e| (e.estimate, e.ci_halfwidth(), e.trials))
        .map_err(|e| e.to_string())
}

fn failure_rows(spec: &ExperimentSpec, pts: &[Point]) -> Vec<Row> {
    let with_latency = spec.kind == Kind::IaLatency;
    let mut rows = Vec::new();
    if spec.engines.analytic {
        let jobs: Vec<(usize, AnalyticModel)> = (0..pts.len())
            .flat_map(|i| spec.models.iter().map(move |&m| (i, m)))
            .collect();
        let results: Vec<Vec<Row>> = jobs
            .par_iter()
            .map(|&(i, m)| {
                let pt = &pts[i];
                let mut r = Vec::new();
                let row = base_row(spec, pt, "RB", "analytic", model_name(m));
                let frame = with_latency.then(|| scheme_frame(Scheme::RandomBeamforming));
                push_failure(&mut r, row, analytic_failure(m, &pt.params), frame);
                r
            })
            .collect();
        rows.extend(results.into_iter().flatten());
    }
    if spec.engines.monte_carlo {
        for pt in pts {
            for &sim in &spec.simulations {
                let antenna = sim.to_string();
                let model = antenna.split(':').nth(1).unwrap_or("");
                let mut row = base_row(spec, pt, sim.scheme.short_name(), "mc", model);
                row.seed = Some(spec.seed);
                let frame = with_latency.then(|| scheme_frame(sim.scheme));
                push_failure(&mut rows, row, simulated_failure(spec, sim, &pt.params), frame);
            }
        }
    }
    rows
}

fn optimize_rows(spec: &ExperimentSpec, epsilon: f64) -> (Vec<Row>, Vec<Optimum>) {
    let grid: Vec<usize> = spec.sweep.values.iter().map(|&v| v as usize).collect();
    let series_count = spec.series.as_ref().map_or(1, Axis::len);
    let mut rows = Vec::new();
    let mut optima = Vec::new();
    for s in 0..series_count {
        let mut params = spec.params.clone();
        params.epsilon = epsilon;
        let mut series = String::new();
        if let Some(axis) = &spec.series {
            axis.apply(s, &mut params);
            series = axis.label(s);
        }
        let mut evaluators: Vec<(String, String, Box<dyn FailureEvaluator>)> = Vec::new();
        if spec.engines.analytic {
            for &m in &spec.models {
                evaluators.push((
                    "analytic".into(),
                    model_name(m).into(),
                    Box::new(AnalyticEvaluator::new(m)),
                ));
            }
        }
        if spec.engines.monte_carlo {
            for &sim in spec
                .simulations
                .iter()
                .filter(|s| s.scheme == Scheme::RandomBeamforming)
            {
                let config = scheme_config(sim, spec.coherence);
                let model = sim.to_string().split(':').nth(1).unwrap_or("").to_string();
                evaluators.push((
                    "mc".into(),
                    model,
                    Box::new(SimEvaluator {
                        config,
                        trials: spec.trials,
                        seed: spec.seed,
                    }),
                ));
            }
        }
        for (engine, model, ev) in evaluators {
            let proto = Row {
                sweep_param: spec.sweep.param.name().into(),
                sweep_value: f64::NAN,
                series: series.clone(),
                scheme: "RB".into(),
                engine: engine.clone(),
                model: model.clone(),
                metric: String::new(),
                estimate: f64::NAN,
                uncertainty: f64::NAN,
                evaluations: if engine == "mc" { spec.trials } else { 0 },
                seed: (engine == "mc").then_some(spec.seed),
                error: String::new(),
            };
            match optimize_beamwidth(&params, spec.k_cycles, spec.p_f_max, &grid, ev.as_ref()) {
                Ok(opt) => {
                    for g in &opt.points {
                        let at = |metric: &str, v: f64| Row {
                            sweep_value: g.n_bs as f64,
                            metric: metric.into(),
                            estimate: v,
                            error: if g.feasible { String::new() } else { "infeasible".into() },
                            ..proto.clone()
                        };
                        rows.push(at("p_f", g.report.p_f));
                        rows.push(at("e_ia_ms", g.report.e_ia_ms));
                    }
                    let best = opt.best_point();
                    optima.push(Optimum {
                        series: series.clone(),
                        engine,
                        model,
                        n_bs: best.map(|b| b.n_bs),
                        e_ia_ms: best.map(|b| b.report.e_ia_ms),
                        smallest_p_f: opt.smallest_p_f,
                        unimodal: opt.is_unimodal(),
                    });
                }
                Err(e) => rows.push(Row {
                    metric: "e_ia_ms".into(),
                    error: e.to_string(),
                    ..proto
                }),
            }
        }
    }
    (rows, optima)
}

fn total_latency_rows(spec: &ExperimentSpec, epsilon: f64) -> Vec<Row> {
    let series_count = spec.series.as_ref().map_or(1, Axis::len);
    let mut rows = Vec::new();
    if !spec.engines.monte_carlo {
        return rows;
    }
    for s in 0..series_count {
        let mut params = spec.params.clone();
        params.epsilon = epsilon;
        let mut series = String::new();
        if let Some(axis) = &spec.series {
            axis.apply(s, &mut params);
            series = axis.label(s);
        }
        for &sim in &spec.simulations {
            let config = scheme_config(sim, spec.coherence);
            let frame = scheme_frame(sim.scheme);
            let model = sim.to_string().split(':').nth(1).unwrap_or("").to_string();
            let proto = Row {
                sweep_param: spec.sweep.param.name().into(),
                sweep_value: f64::NAN,
                series: series.clone(),
                scheme: sim.scheme.short_name().into(),
                engine: "mc".into(),
                model,
                metric: String::new(),
                estimate: f64::NAN,
                uncertainty: f64::NAN,
                evaluations: spec.trials,
                seed: Some(spec.seed),
                error: String::new(),
            };
            let est = DataCodebooks::new(&params, spec.oversampling).and_then(|cb| {
                estimate_failure_and_rate(&config, &params, &cb, spec.data_draws, spec.trials, spec.seed)
            });
            let est = match est {
                Ok(e) if !e.rates_bps.is_empty() => e,
                Ok(_) => {
                    rows.push(Row {
                        metric: "e_total_ms".into(),
                        error: "no successful trial".into(),
                        ..proto
                    });
                    continue;
                }
                Err(e) => {
                    rows.push(Row {
                        metric: "e_total_ms".into(),
                        error: e.to_string(),
                        ..proto
                    });
                    continue;
                }
            };
            let p_f = est.failure.estimate;
            rows.push(Row {
                metric: "p_f".into(),
                estimate: p_f,
                uncertainty: est.failure.ci_halfwidth(),
                ..proto.clone()
            });
            rows.push(Row {
                metric: "rate_bps".into(),
                estimate: est.mean_rate().unwrap_or(f64::NAN),
                evaluations: est.rates_bps.len() as u64,
                ..proto.clone()
            });
            for &l in &spec.sweep.values {
                for &conv in &spec.rate_conventions {
                    let d = total_latency_from_rates(p_f, &est.rates_bps, l, &frame, conv);
                    rows.push(Row {
                        sweep_value: l,
                        metric: format!("e_total_ms:{}", conv.name()),
                        estimate: d.as_ref().copied().unwrap_or(f64::NAN),
                        error: d.err().map(|e| e.to_string()).unwrap_or_default(),
                        ..proto.clone()
                    });
                }
            }
        }
    }
    rows
}

/// Evaluate every point of the spec. Failures of individual points land in
/// the row's `error` column; only an unusable ε aborts the run.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunOutput, String> {
    let start = Instant::now();
    let epsilon = resolve_epsilon(spec)?;
    let (rows, optima) = match spec.kind {
        Kind::Failure | Kind::IaLatency => (failure_rows(spec, &points(spec, epsilon.value)), Vec::new()),
        Kind::Optimize => optimize_rows(spec, epsilon.value),
        Kind::TotalLatency => (total_latency_rows(spec, epsilon.value), Vec::new()),
    };
    Ok(RunOutput {
        rows,
        epsilon,
        optima,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.sweep_param.clone(),
            sci(r.sweep_value),
            r.series.clone(),
            r.scheme.clone(),
            r.engine.clone(),
            r.model.clone(),
            r.metric.clone(),
            sci(r.estimate),
            sci(r.uncertainty),
            r.evaluations.to_string(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.error.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Metadata written next to the CSV: the resolved configuration, ε and its
/// provenance, the rate conventions and the wall time.
pub fn metadata(spec: &ExperimentSpec, out: &RunOutput) -> serde_json::Value {
    serde_json::json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": emit_config(spec),
        "spec": spec,
        "epsilon": out.epsilon,
        "rate_log_base": 2,
        "rate_conventions": spec.rate_conventions.iter().map(|c| c.name()).collect::<Vec<_>>(),
        "rate_definition": "per-trial ergodic Shannon rate of the detected BS after refinement",
        "optima": out.optima,
        "csv_columns": CSV_COLUMNS,
        "wall_time_s": out.wall_time_s,
    })
}

/// Write the CSV and its JSON sidecar.
pub fn write_outputs(spec: &ExperimentSpec, out: &RunOutput) -> std::io::Result<()> {
    if let Some(dir) = spec.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let f = fs::File::create(&spec.output)?;
    write_csv(&out.rows, std::io::BufWriter::new(f)).map_err(std::io::Error::other)?;
    let meta = serde_json::to_string_pretty(&metadata(spec, out)).map_err(std::io::Error::other)?;
    fs::write(sidecar_path(&spec.output), meta)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmia_experiments::calibrate::{calibrate_epsilon, CalibrationOptions, CalibrationStatus};
use mmia_experiments::config::{parse_config, Engines, ExperimentSpec, Kind, Preset};
use mmia_experiments::runner::{run_experiment, sidecar_path, write_outputs};

#[derive(Parser)]
#[command(
    name = "mmia",
    version,
    about = "Initial-access failure, latency and beamwidth sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic failure probabilities over the configured sweep.
    Analyze(Common),
    /// Monte Carlo failure probabilities over the configured sweep.
    Simulate(Common),
    /// Search the BS beam count for the lowest expected access latency.
    Optimize(Common),
    /// Fit the sidelobe gain to the configured anchors.
    Calibrate(Common),
    /// Reproduce one figure preset (fig2 .. fig7).
    Preset {
        name: Preset,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// analytic, mc or both (comma separated)
    #[arg(long)]
    engines: Option<Engines>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self, preset: Option<Preset>) -> Result<ExperimentSpec, String> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
                parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?
            }
            None => ExperimentSpec::for_preset(preset.unwrap_or(Preset::Custom)),
        };
        if let (Some(p), Some(_)) = (preset, &self.config) {
            if spec.preset != p {
                return Err(format!(
                    "config selects preset {} but {} was requested",
                    spec.preset.name(),
                    p.name()
                ));
            }
        }
        if let Some(t) = self.trials {
            spec.trials = t;
        }
        if let Some(s) = self.seed {
            spec.seed = s;
        }
        if let Some(o) = &self.out {
            spec.output = o.clone();
        }
        if let Some(e) = self.engines {
            spec.engines = e;
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(spec)
    }

    fn init_threads(&self) -> Result<(), String> {
        if let Some(n) = self.threads {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

fn run(spec: &ExperimentSpec) -> Result<(), String> {
    let out = run_experiment(spec)?;
    write_outputs(spec, &out).map_err(|e| format!("{}: {e}", spec.output.display()))?;
    let errors = out.rows.iter().filter(|r| !r.error.is_empty()).count();
    eprintln!(
        "{} rows -> {} (metadata {}), ε = {}, {:.1} s",
        out.rows.len(),
        spec.output.display(),
        sidecar_path(&spec.output).display(),
        out.epsilon.value,
        out.wall_time_s
    );
    if errors > 0 {
        eprintln!("{errors} rows carry an error");
    }
    for o in &out.optima {
        match (o.n_bs, o.e_ia_ms) {
            (Some(n), Some(d)) => eprintln!(
                "[{} {} {}] best N_BS = {n}, E[D_I] = {d:.4} ms",
                o.series, o.engine, o.model
            ),
            _ => eprintln!("[{} {} {}] no feasible beam count", o.series, o.engine, o.model),
        }
    }
    Ok(())
}

fn main_inner(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Analyze(c) => {
            c.init_threads()?;
            let mut spec = c.load(None)?;
            spec.engines = Engines {
                analytic: true,
                monte_carlo: false,
            };
            run(&spec)
        }
        Command::Simulate(c) => {
            c.init_threads()?;
            let mut spec = c.load(None)?;
            spec.engines = Engines {
                analytic: false,
                monte_carlo: true,
            };
            run(&spec)
        }
        Command::Optimize(c) => {
            c.init_threads()?;
            let loaded = c.load(None)?;
            if loaded.kind == Kind::Optimize {
                return run(&loaded);
            }
            // Otherwise the beam-count grid and series of the fig6 preset
            // around the configured system.
            let spec = ExperimentSpec {
                params: loaded.params,
                trials: loaded.trials,
                seed: loaded.seed,
                output: loaded.output,
                engines: loaded.engines,
                ..ExperimentSpec::for_preset(Preset::Fig6)
            };
            run(&spec)
        }
        Command::Calibrate(c) => {
            c.init_threads()?;
            let spec = c.load(None)?;
            let options = CalibrationOptions {
                max_residual: spec.calibration.max_residual,
                ..Default::default()
            };
            let r = calibrate_epsilon(&spec.calibration.anchors, &spec.params, &options).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&r).map_err(|e| e.to_string())?);
            if r.status == CalibrationStatus::Failed {
                return Err(format!(
                    "RMS residual {} exceeds {}",
                    r.rms_residual, options.max_residual
                ));
            }
            Ok(())
        }
        Command::Preset { name, common } => {
            common.init_threads()?;
            run(&common.load(Some(name))?)
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

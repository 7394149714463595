//! Figure presets. Each expands to the default system parameters with the figure's
//! sweep axis, series and engines.

use std::path::PathBuf;

use mmia::latency::{AnalyticModel, RateConvention};
use mmia::sim::{AntennaModel, Scheme};
use mmia::SystemParams;

use crate::calibrate::DEFAULT_ANCHORS;
use crate::config::*;

/// N_BS values at which the beam-count figure is drawn.
pub const FIG6_DRAWN_GRID: [usize; 32] = [
    1, 3, 4, 6, 7, 9, 10, 12, 14, 15, 17, 18, 20, 21, 23, 25, 26, 28, 29, 31, 32, 34, 36, 37, 39, 40, 42, 43, 45, 47,
    48, 50,
];

fn sim(scheme: Scheme, antenna: AntennaModel) -> Simulation {
    Simulation { scheme, antenna }
}

fn ula_schemes() -> Vec<Simulation> {
    vec![
        sim(Scheme::RandomBeamforming, AntennaModel::Ula),
        sim(Scheme::IterativeSearch, AntennaModel::Ula),
        sim(Scheme::ExhaustiveSearch, AntennaModel::Ula),
    ]
}

fn density_axis() -> Axis {
    Axis::numeric(Param::LambdaBs, log_range(1e-5, 1e-3, 21))
}

pub fn defaults(preset: Preset) -> ExperimentSpec {
    let base = ExperimentSpec {
        preset,
        kind: Kind::Failure,
        engines: Engines {
            analytic: true,
            monte_carlo: true,
        },
        trials: 20_000,
        seed: 1,
        output: PathBuf::from(format!("{}.csv", preset.name())),
        params: SystemParams::table1(),
        sweep: density_axis(),
        series: None,
        models: vec![AnalyticModel::Los],
        simulations: ula_schemes(),
        coherence: Coherence::Auto,
        calibration: Calibration {
            enabled: false,
            anchors: DEFAULT_ANCHORS.to_vec(),
            max_residual: 0.01,
        },
        k_cycles: 1,
        p_f_max: 1.0,
        oversampling: 4,
        data_draws: 16,
        rate_conventions: vec![RateConvention::MeanRate, RateConvention::MeanLatency],
    };
    match preset {
        Preset::Custom => base,
        Preset::Fig2 => {
            let mut s = ExperimentSpec {
                models: vec![AnalyticModel::Los, AnalyticModel::Nlos, AnalyticModel::Sidelobe],
                ..base
            };
            s.simulations
                .insert(0, sim(Scheme::RandomBeamforming, AntennaModel::Sbp));
            s.calibration.enabled = true;
            s
        }
        Preset::Fig3 => ExperimentSpec {
            kind: Kind::IaLatency,
            ..base
        },
        Preset::Fig4 => {
            let mut s = ExperimentSpec {
                sweep: Axis::numeric(Param::Beta, linear_range(0.0, 0.1, 0.005)),
                series: Some(Axis::beams(vec![(12, 4), (3, 4), (1, 1)])),
                models: vec![AnalyticModel::Sidelobe],
                simulations: vec![sim(Scheme::RandomBeamforming, AntennaModel::Sbp)],
                ..base
            };
            s.calibration.enabled = true;
            s
        }
        Preset::Fig5 => ExperimentSpec {
            sweep: Axis::numeric(Param::NC, (1..=60).map(f64::from).collect()),
            ..base
        },
        Preset::Fig6 => {
            let mut s = ExperimentSpec {
                kind: Kind::Optimize,
                sweep: Axis::numeric(Param::NBs, (1..=50).map(f64::from).collect()),
                series: Some(Axis::numeric(Param::LambdaBs, vec![1e-4, 2e-4, 5e-4, 1e-3])),
                models: vec![AnalyticModel::Sidelobe],
                simulations: vec![sim(Scheme::RandomBeamforming, AntennaModel::Ula)],
                ..base
            };
            s.calibration.enabled = true;
            s
        }
        Preset::Fig7 => ExperimentSpec {
            kind: Kind::TotalLatency,
            engines: Engines {
                analytic: false,
                monte_carlo: true,
            },
            sweep: Axis::numeric(Param::PacketBits, (3..=9).map(|e| 10f64.powi(e)).collect()),
            series: Some(Axis::numeric(Param::LambdaBs, vec![1e-4, 1e-3])),
            ..base
        },
    }
}

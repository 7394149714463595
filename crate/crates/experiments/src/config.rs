//! Plain-text experiment configuration: `key = value` lines grouped under
//! `[section]` headers, `#` comments.
//!
//! ```text
//! [experiment]
//! preset = fig2
//! trials = 20000
//!
//! [system]
//! sinr_threshold_db = 0
//! ```

use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use mmia::latency::{AnalyticModel, RateConvention};
use mmia::params::{db_to_linear, dbm_to_watts};
use mmia::sim::{AntennaModel, Scheme};
use mmia::{BlockageMode, SystemParams};
use serde::Serialize;

use crate::presets;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "`{}`: {}", self.key, self.message)
        } else {
            write!(f, "line {}: `{}`: {}", self.line, self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig7,
        Preset::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::Custom => "custom",
        }
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected fig2..fig7 or custom)"))
    }
}

/// What each sweep point computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    /// Detection failure probability.
    Failure,
    /// Failure probability and expected initial-access latency.
    IaLatency,
    /// Beam-count optimization; the sweep is the N_BS grid.
    Optimize,
    /// Expected total latency; the sweep is the packet size.
    TotalLatency,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Failure => "failure",
            Kind::IaLatency => "ia_latency",
            Kind::Optimize => "optimize",
            Kind::TotalLatency => "total_latency",
        }
    }
}

impl FromStr for Kind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        [Kind::Failure, Kind::IaLatency, Kind::Optimize, Kind::TotalLatency]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown kind `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Engines {
    pub analytic: bool,
    pub monte_carlo: bool,
}

impl FromStr for Engines {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut e = Engines {
            analytic: false,
            monte_carlo: false,
        };
        for item in list(s) {
            match item {
                "analytic" => e.analytic = true,
                "mc" | "monte_carlo" => e.monte_carlo = true,
                other => return Err(format!("unknown engine `{other}` (expected analytic, mc)")),
            }
        }
        if !(e.analytic || e.monte_carlo) {
            return Err("at least one engine is required".into());
        }
        Ok(e)
    }
}

impl fmt::Display for Engines {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut v = Vec::new();
        if self.analytic {
            v.push("analytic");
        }
        if self.monte_carlo {
            v.push("mc");
        }
        f.write_str(&v.join(", "))
    }
}

/// Fading and blockage coherence of simulated searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Coherence {
    /// Per-slot for the sectorized model, per-cycle for arrays.
    Auto,
    Slot,
    Cycle,
}

impl FromStr for Coherence {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => Ok(Coherence::Auto),
            "slot" => Ok(Coherence::Slot),
            "cycle" => Ok(Coherence::Cycle),
            _ => Err(format!("unknown coherence `{s}` (expected auto, slot, cycle)")),
        }
    }
}

impl Coherence {
    fn name(self) -> &'static str {
        match self {
            Coherence::Auto => "auto",
            Coherence::Slot => "slot",
            Coherence::Cycle => "cycle",
        }
    }
}

/// One simulated search: scheme and antenna model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Simulation {
    pub scheme: Scheme,
    pub antenna: AntennaModel,
}

impl fmt::Display for Simulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let a = match self.antenna {
            AntennaModel::Sbp => "sbp",
            AntennaModel::Ula => "ula",
        };
        write!(f, "{}:{a}", self.scheme.short_name().to_lowercase())
    }
}

impl FromStr for Simulation {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let (scheme, antenna) = s.split_once(':').unwrap_or((s, "ula"));
        let scheme = match scheme.trim() {
            "rb" => Scheme::RandomBeamforming,
            "es" => Scheme::ExhaustiveSearch,
            "is" => Scheme::IterativeSearch,
            other => return Err(format!("unknown scheme `{other}` (expected rb, es, is)")),
        };
        let antenna = match antenna.trim() {
            "ula" => AntennaModel::Ula,
            "sbp" => AntennaModel::Sbp,
            other => return Err(format!("unknown antenna `{other}` (expected ula, sbp)")),
        };
        Ok(Simulation { scheme, antenna })
    }
}

pub fn model_name(m: AnalyticModel) -> &'static str {
    match m {
        AnalyticModel::Los => "los",
        AnalyticModel::Nlos => "nlos",
        AnalyticModel::Sidelobe => "sidelobe",
    }
}

fn parse_model(s: &str) -> Result<AnalyticModel, String> {
    match s {
        "los" => Ok(AnalyticModel::Los),
        "nlos" => Ok(AnalyticModel::Nlos),
        "sidelobe" => Ok(AnalyticModel::Sidelobe),
        _ => Err(format!("unknown model `{s}` (expected los, nlos, sidelobe)")),
    }
}

/// Parameters a sweep or series may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    LambdaBs,
    Beta,
    NC,
    NBs,
    Epsilon,
    SinrThreshold,
    PacketBits,
    /// N_BS × N_UE pairs, with array sizes to match.
    Beams,
}

impl Param {
    const ALL: [Param; 8] = [
        Param::LambdaBs,
        Param::Beta,
        Param::NC,
        Param::NBs,
        Param::Epsilon,
        Param::SinrThreshold,
        Param::PacketBits,
        Param::Beams,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::LambdaBs => "lambda_bs",
            Param::Beta => "beta",
            Param::NC => "n_c",
            Param::NBs => "n_bs",
            Param::Epsilon => "epsilon",
            Param::SinrThreshold => "sinr_threshold",
            Param::PacketBits => "packet_bits",
            Param::Beams => "beams",
        }
    }

    fn is_integer(self) -> bool {
        matches!(self, Param::NC | Param::NBs)
    }
}

impl FromStr for Param {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Param::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown parameter `{s}`"))
    }
}

/// A parameter and the values it takes. `beams` values are N_BS × N_UE
/// pairs; every other parameter takes numbers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Axis {
    pub param: Param,
    pub values: Vec<f64>,
    pub beams: Vec<(usize, usize)>,
}

impl Axis {
    pub fn numeric(param: Param, values: Vec<f64>) -> Self {
        Self {
            param,
            values,
            beams: Vec::new(),
        }
    }

    pub fn beams(pairs: Vec<(usize, usize)>) -> Self {
        Self {
            param: Param::Beams,
            values: Vec::new(),
            beams: pairs,
        }
    }

    pub fn len(&self) -> usize {
        if self.param == Param::Beams {
            self.beams.len()
        } else {
            self.values.len()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Human-readable label of entry `i`.
    pub fn label(&self, i: usize) -> String {
        if self.param == Param::Beams {
            let (b, u) = self.beams[i];
            format!("{b}x{u}")
        } else {
            format!("{}={}", self.param.name(), self.values[i])
        }
    }

    /// Apply entry `i` to a parameter set. Packet size is not a system
    /// parameter and is left to the caller.
    pub fn apply(&self, i: usize, params: &mut SystemParams) {
        match self.param {
            Param::Beams => {
                let (b, u) = self.beams[i];
                params.n_bs = b;
                params.n_ue = u;
                params.m_bs = b;
                params.m_ue = u;
            }
            p => set_numeric(p, self.values[i], params),
        }
    }

    fn values_text(&self) -> String {
        if self.param == Param::Beams {
            self.beams
                .iter()
                .map(|(b, u)| format!("{b}x{u}"))
                .collect::<Vec<_>>()
                .join(", ")
        } else {
            self.values.iter().map(|v| num(*v)).collect::<Vec<_>>().join(", ")
        }
    }
}

fn set_numeric(p: Param, v: f64, params: &mut SystemParams) {
    match p {
        Param::LambdaBs => params.lambda_bs = v,
        Param::Beta => params.beta = v,
        Param::NC => params.n_c = v as usize,
        Param::NBs => {
            params.n_bs = v as usize;
            params.m_bs = v as usize;
        }
        Param::Epsilon => params.epsilon = v,
        Param::SinrThreshold => params.sinr_threshold = v,
        Param::PacketBits | Param::Beams => {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub enabled: bool,
    /// (λ, target P_f) pairs on the sidelobe-model curve.
    pub anchors: Vec<(f64, f64)>,
    /// Largest acceptable RMS anchor residual.
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub kind: Kind,
    pub engines: Engines,
    pub trials: u64,
    pub seed: u64,
    pub output: PathBuf,
    pub params: SystemParams,
    pub sweep: Axis,
    pub series: Option<Axis>,
    pub models: Vec<AnalyticModel>,
    pub simulations: Vec<Simulation>,
    pub coherence: Coherence,
    pub calibration: Calibration,
    pub k_cycles: usize,
    pub p_f_max: f64,
    pub oversampling: usize,
    pub data_draws: usize,
    pub rate_conventions: Vec<RateConvention>,
}

impl ExperimentSpec {
    /// Default system parameters with the preset's sweep, series and engines.
    pub fn for_preset(preset: Preset) -> Self {
        presets::defaults(preset)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: &str| ConfigError {
            line: 0,
            key: key.into(),
            message: msg.into(),
        };
        self.params.validate().map_err(|e| match e {
            mmia::Error::InvalidParam { name, reason } => bad(name, &reason),
            other => bad("system", &other.to_string()),
        })?;
        if self.trials == 0 {
            return Err(bad("trials", "must be positive"));
        }
        if self.sweep.is_empty() {
            return Err(bad("values", "the sweep needs at least one value"));
        }
        check_axis(&self.sweep).map_err(|m| bad("values", &m))?;
        if let Some(s) = &self.series {
            if s.is_empty() {
                return Err(bad("series_values", "the series needs at least one value"));
            }
            check_axis(s).map_err(|m| bad("series_values", &m))?;
        }
        if self.k_cycles == 0 {
            return Err(bad("k_cycles", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.p_f_max) {
            return Err(bad("p_f_max", "must lie in [0, 1]"));
        }
        if self.oversampling == 0 {
            return Err(bad("oversampling", "must be at least 1"));
        }
        if self.data_draws == 0 {
            return Err(bad("data_draws", "must be at least 1"));
        }
        if self.calibration.enabled && self.calibration.anchors.len() < 2 {
            return Err(bad("anchors", "calibration needs at least two anchors"));
        }
        match self.kind {
            Kind::Optimize if self.sweep.param != Param::NBs => Err(bad("parameter", "optimize sweeps n_bs")),
            Kind::TotalLatency if self.sweep.param != Param::PacketBits => {
                Err(bad("parameter", "total_latency sweeps packet_bits"))
            }
            _ => Ok(()),
        }
    }
}

fn check_axis(a: &Axis) -> Result<(), String> {
    for &v in &a.values {
        if !v.is_finite() {
            return Err(format!("{} values must be finite", a.param.name()));
        }
        if a.param.is_integer() && (v < 1.0 || v.fract() != 0.0) {
            return Err(format!("{} values must be positive integers", a.param.name()));
        }
        if v < 0.0 {
            return Err(format!("{} values must be non-negative", a.param.name()));
        }
    }
    if a.beams.iter().any(|&(b, u)| b == 0 || u == 0) {
        return Err("beam counts must be positive".into());
    }
    Ok(())
}

fn list(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|x| !x.is_empty())
}

/// Shortest text that parses back to the same float.
fn num(v: f64) -> String {
    format!("{v:?}")
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|_| format!("`{v}` is not a number"))
}

fn parse_usize(v: &str) -> Result<usize, String> {
    v.parse::<usize>()
        .map_err(|_| format!("`{v}` is not a non-negative integer"))
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(format!("`{v}` is not a boolean")),
    }
}

fn parse_values(param: Param, v: &str) -> Result<Axis, String> {
    if param == Param::Beams {
        let pairs = list(v)
            .map(|item| {
                let (b, u) = item
                    .split_once('x')
                    .ok_or_else(|| format!("`{item}` is not of the form N_BSxN_UE"))?;
                Ok((parse_usize(b.trim())?, parse_usize(u.trim())?))
            })
            .collect::<Result<Vec<_>, String>>()?;
        return Ok(Axis::beams(pairs));
    }
    Ok(Axis::numeric(param, list(v).map(parse_f64).collect::<Result<_, _>>()?))
}

/// `lo, hi, n`: n log-spaced values from lo to hi inclusive.
pub fn log_range(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// `lo, hi, step`: lo, lo + step, ... up to hi inclusive.
pub fn linear_range(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    (0..n).map(|i| lo + step * i as f64).collect()
}

fn parse_range(v: &str, log: bool) -> Result<Vec<f64>, String> {
    let parts: Vec<f64> = list(v).map(parse_f64).collect::<Result<_, _>>()?;
    let [lo, hi, third] = parts[..] else {
        return Err("expected three comma-separated numbers".into());
    };
    if log {
        if !(lo > 0.0 && hi > 0.0) || third < 1.0 || third.fract() != 0.0 {
            return Err("log_range needs positive bounds and an integer count".into());
        }
        Ok(log_range(lo, hi, third as usize))
    } else {
        if !(third > 0.0) || hi < lo {
            return Err("range needs lo ≤ hi and a positive step".into());
        }
        Ok(linear_range(lo, hi, third))
    }
}

fn parse_blockage(v: &str) -> Result<BlockageMode, String> {
    match v {
        "per_slot" => Ok(BlockageMode::PerSlot),
        "per_cycle" => Ok(BlockageMode::PerCycle),
        "frozen" => Ok(BlockageMode::Frozen),
        _ => Err(format!(
            "unknown blockage mode `{v}` (expected per_slot, per_cycle, frozen)"
        )),
    }
}

fn blockage_name(b: BlockageMode) -> &'static str {
    match b {
        BlockageMode::PerSlot => "per_slot",
        BlockageMode::PerCycle => "per_cycle",
        BlockageMode::Frozen => "frozen",
    }
}

fn parse_convention(v: &str) -> Result<RateConvention, String> {
    match v {
        "mean_rate" => Ok(RateConvention::MeanRate),
        "mean_latency" => Ok(RateConvention::MeanLatency),
        _ => Err(format!(
            "unknown rate convention `{v}` (expected mean_rate, mean_latency)"
        )),
    }
}

fn parse_anchor(item: &str) -> Result<(f64, f64), String> {
    let (l, p) = item
        .split_once(':')
        .ok_or_else(|| format!("`{item}` is not of the form lambda:p_f"))?;
    Ok((parse_f64(l.trim())?, parse_f64(p.trim())?))
}

struct Entry<'a> {
    line: usize,
    section: String,
    key: &'a str,
    value: &'a str,
}

fn tokenize(text: &str) -> Result<Vec<Entry<'_>>, ConfigError> {
    let mut section = String::new();
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ConfigError {
                line,
                key: s.into(),
                message: "unterminated section header".into(),
            })?;
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError {
                    line,
                    key: name.into(),
                    message: format!("unknown section (expected one of {})", SECTIONS.join(", ")),
                });
            }
            section = name.into();
            continue;
        }
        let (key, value) = s.split_once('=').ok_or_else(|| ConfigError {
            line,
            key: s.into(),
            message: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        if section.is_empty() {
            section = "experiment".into();
        }
        if !seen.insert((section.clone(), key.to_string())) {
            return Err(ConfigError {
                line,
                key: key.into(),
                message: "duplicate key".into(),
            });
        }
        out.push(Entry {
            line,
            section: section.clone(),
            key,
            value: value.trim(),
        });
    }
    Ok(out)
}

const SECTIONS: [&str; 6] = ["experiment", "system", "search", "sweep", "calibration", "latency"];

/// Parse a configuration. Omitted keys take the preset's defaults (`SystemParams::table1`
/// and preset=custom when no preset is named).
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let entries = tokenize(text)?;
    let preset = match entries.iter().find(|e| e.section == "experiment" && e.key == "preset") {
        Some(e) => e.value.parse::<Preset>().map_err(|m| ConfigError {
            line: e.line,
            key: "preset".into(),
            message: m,
        })?,
        None => Preset::Custom,
    };
    let mut spec = ExperimentSpec::for_preset(preset);
    // Keys whose value only makes sense together with another key.
    let mut sweep_param: Option<(usize, Param)> = None;
    let mut sweep_values: Option<(usize, &str, &str)> = None;
    let mut series_param: Option<(usize, Option<Param>)> = None;
    let mut series_values: Option<(usize, &str)> = None;
    let mut key_lines = std::collections::HashMap::new();

    for e in &entries {
        key_lines.insert(e.key.to_string(), e.line);
        let err = |message: String| ConfigError {
            line: e.line,
            key: e.key.into(),
            message,
        };
        let p = &mut spec.params;
        let v = e.value;
        let r: Result<(), String> = match (e.section.as_str(), e.key) {
            ("experiment", "preset") => Ok(()),
            ("experiment", "kind") => v.parse().map(|k| spec.kind = k),
            ("experiment", "engines") => v.parse().map(|x| spec.engines = x),
            ("experiment", "trials") => v
                .parse::<u64>()
                .map_err(|_| format!("`{v}` is not a non-negative integer"))
                .map(|x| spec.trials = x),
            ("experiment", "seed") => v
                .parse::<u64>()
                .map_err(|_| format!("`{v}` is not a non-negative integer"))
                .map(|x| spec.seed = x),
            ("experiment", "output") => {
                spec.output = PathBuf::from(v);
                Ok(())
            }
            ("system", "lambda_bs") => parse_f64(v).map(|x| p.lambda_bs = x),
            ("system", "beta") => parse_f64(v).map(|x| p.beta = x),
            ("system", "alpha_los") => parse_f64(v).map(|x| p.alpha_los = x),
            ("system", "alpha_nlos") => parse_f64(v).map(|x| p.alpha_nlos = x),
            ("system", "f_c") => parse_f64(v).map(|x| p.f_c = x),
            ("system", "speed_of_light") => parse_f64(v).map(|x| p.speed_of_light = x),
            ("system", "p_bs_control") => parse_f64(v).map(|x| p.p_bs_control = x),
            ("system", "p_bs_control_dbm") => parse_f64(v).map(|x| p.p_bs_control = dbm_to_watts(x)),
            ("system", "p_bs_data") => parse_f64(v).map(|x| p.p_bs_data = x),
            ("system", "p_bs_data_dbm") => parse_f64(v).map(|x| p.p_bs_data = dbm_to_watts(x)),
            ("system", "bw_control") => parse_f64(v).map(|x| p.bw_control = x),
            ("system", "bw_data") => parse_f64(v).map(|x| p.bw_data = x),
            ("system", "noise_figure_db") => parse_f64(v).map(|x| p.noise_figure_db = x),
            ("system", "sinr_threshold") => parse_f64(v).map(|x| p.sinr_threshold = x),
            ("system", "sinr_threshold_db") => parse_f64(v).map(|x| p.sinr_threshold = db_to_linear(x)),
            ("system", "n_bs") => parse_usize(v).map(|x| p.n_bs = x),
            ("system", "n_ue") => parse_usize(v).map(|x| p.n_ue = x),
            ("system", "m_bs") => parse_usize(v).map(|x| p.m_bs = x),
            ("system", "m_ue") => parse_usize(v).map(|x| p.m_ue = x),
            ("system", "epsilon") => parse_f64(v).map(|x| p.epsilon = x),
            ("system", "n_c") => parse_usize(v).map(|x| p.n_c = x),
            ("system", "region_radius") => parse_f64(v).map(|x| p.region_radius = x),
            ("system", "blockage") => parse_blockage(v).map(|x| p.blockage = x),
            ("system", "max_expected_bs") => parse_usize(v).map(|x| p.max_expected_bs = x),
            ("search", "models") => list(v)
                .map(parse_model)
                .collect::<Result<Vec<_>, _>>()
                .map(|x| spec.models = x),
            ("search", "simulations") => list(v)
                .map(str::parse)
                .collect::<Result<Vec<_>, _>>()
                .map(|x| spec.simulations = x),
            ("search", "coherence") => v.parse().map(|x| spec.coherence = x),
            ("sweep", "parameter") => v.parse().map(|x| sweep_param = Some((e.line, x))),
            ("sweep", key @ ("values" | "range" | "log_range")) => match sweep_values {
                Some((line, _, other)) => Err(format!("conflicts with `{other}` on line {line}")),
                None => {
                    sweep_values = Some((e.line, v, key));
                    Ok(())
                }
            },
            ("sweep", "series_parameter") => {
                if v == "none" {
                    series_param = Some((e.line, None));
                    Ok(())
                } else {
                    v.parse().map(|x| series_param = Some((e.line, Some(x))))
                }
            }
            ("sweep", "series_values") => {
                series_values = Some((e.line, v));
                Ok(())
            }
            ("calibration", "enabled") => parse_bool(v).map(|x| spec.calibration.enabled = x),
            ("calibration", "anchors") => list(v)
                .map(parse_anchor)
                .collect::<Result<Vec<_>, _>>()
                .map(|x| spec.calibration.anchors = x),
            ("calibration", "max_residual") => parse_f64(v).map(|x| spec.calibration.max_residual = x),
            ("latency", "k_cycles") => parse_usize(v).map(|x| spec.k_cycles = x),
            ("latency", "p_f_max") => parse_f64(v).map(|x| spec.p_f_max = x),
            ("latency", "oversampling") => parse_usize(v).map(|x| spec.oversampling = x),
            ("latency", "data_draws") => parse_usize(v).map(|x| spec.data_draws = x),
            ("latency", "rate_conventions") => list(v)
                .map(parse_convention)
                .collect::<Result<Vec<_>, _>>()
                .map(|x| spec.rate_conventions = x),
            (section, _) => Err(format!("unknown key in [{section}]")),
        };
        r.map_err(err)?;
    }

    let param = sweep_param.map(|(_, p)| p).unwrap_or(spec.sweep.param);
    if let Some((line, v, key)) = sweep_values {
        let at = |message: String| ConfigError {
            line,
            key: key.into(),
            message,
        };
        spec.sweep = match key {
            "values" => parse_values(param, v).map_err(at)?,
            k => Axis::numeric(param, parse_range(v, k == "log_range").map_err(at)?),
        };
    } else if let Some((line, p)) = sweep_param {
        if p != spec.sweep.param {
            return Err(ConfigError {
                line,
                key: "parameter".into(),
                message: "a new sweep parameter needs `values`, `range` or `log_range`".into(),
            });
        }
    }
    match (series_param, series_values) {
        (Some((_, None)), _) => spec.series = None,
        (Some((_, Some(p))), Some((line, v))) => {
            spec.series = Some(parse_values(p, v).map_err(|message| ConfigError {
                line,
                key: "series_values".into(),
                message,
            })?)
        }
        (None, Some((line, v))) => {
            let p = spec.series.as_ref().map(|s| s.param).ok_or_else(|| ConfigError {
                line,
                key: "series_values".into(),
                message: "needs `series_parameter`".into(),
            })?;
            spec.series = Some(parse_values(p, v).map_err(|message| ConfigError {
                line,
                key: "series_values".into(),
                message,
            })?)
        }
        (Some((line, Some(p))), None) => {
            if spec.series.as_ref().map(|s| s.param) != Some(p) {
                return Err(ConfigError {
                    line,
                    key: "series_parameter".into(),
                    message: "needs `series_values`".into(),
                });
            }
        }
        (None, None) => {}
    }

    spec.validate().map_err(|mut e| {
        // Point at the line that set the offending key, if any.
        let alias = match e.key.as_str() {
            "sinr_threshold" if !key_lines.contains_key("sinr_threshold") => "sinr_threshold_db",
            "p_bs_control" if !key_lines.contains_key("p_bs_control") => "p_bs_control_dbm",
            "p_bs_data" if !key_lines.contains_key("p_bs_data") => "p_bs_data_dbm",
            k => k,
        };
        if let Some(&l) = key_lines.get(alias) {
            e.line = l;
            e.key = alias.into();
        }
        e
    })?;
    Ok(spec)
}

/// Canonical text form; `parse_config(&emit_config(s)) == s`.
pub fn emit_config(spec: &ExperimentSpec) -> String {
    let p = &spec.params;
    let mut s = String::new();
    let _ = writeln!(s, "[experiment]");
    let _ = writeln!(s, "preset = {}", spec.preset.name());
    let _ = writeln!(s, "kind = {}", spec.kind.name());
    let _ = writeln!(s, "engines = {}", spec.engines);
    let _ = writeln!(s, "trials = {}", spec.trials);
    let _ = writeln!(s, "seed = {}", spec.seed);
    let _ = writeln!(s, "output = {}", spec.output.display());
    let _ = writeln!(s, "\n[system]");
    for (k, v) in [
        ("lambda_bs", p.lambda_bs),
        ("beta", p.beta),
        ("alpha_los", p.alpha_los),
        ("alpha_nlos", p.alpha_nlos),
        ("f_c", p.f_c),
        ("speed_of_light", p.speed_of_light),
        ("p_bs_control", p.p_bs_control),
        ("p_bs_data", p.p_bs_data),
        ("bw_control", p.bw_control),
        ("bw_data", p.bw_data),
        ("noise_figure_db", p.noise_figure_db),
        ("sinr_threshold", p.sinr_threshold),
        ("epsilon", p.epsilon),
        ("region_radius", p.region_radius),
    ] {
        let _ = writeln!(s, "{k} = {}", num(v));
    }
    for (k, v) in [
        ("n_bs", p.n_bs),
        ("n_ue", p.n_ue),
        ("m_bs", p.m_bs),
        ("m_ue", p.m_ue),
        ("n_c", p.n_c),
        ("max_expected_bs", p.max_expected_bs),
    ] {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "blockage = {}", blockage_name(p.blockage));
    let _ = writeln!(s, "\n[search]");
    let models: Vec<_> = spec.models.iter().map(|m| model_name(*m)).collect();
    let _ = writeln!(s, "models = {}", models.join(", "));
    let sims: Vec<_> = spec.simulations.iter().map(|x| x.to_string()).collect();
    let _ = writeln!(s, "simulations = {}", sims.join(", "));
    let _ = writeln!(s, "coherence = {}", spec.coherence.name());
    let _ = writeln!(s, "\n[sweep]");
    let _ = writeln!(s, "parameter = {}", spec.sweep.param.name());
    let _ = writeln!(s, "values = {}", spec.sweep.values_text());
    match &spec.series {
        Some(a) => {
            let _ = writeln!(s, "series_parameter = {}", a.param.name());
            let _ = writeln!(s, "series_values = {}", a.values_text());
        }
        None => {
            let _ = writeln!(s, "series_parameter = none");
        }
    }
    let _ = writeln!(s, "\n[calibration]");
    let _ = writeln!(s, "enabled = {}", spec.calibration.enabled);
    let anchors: Vec<_> = spec
        .calibration
        .anchors
        .iter()
        .map(|(l, p)| format!("{}:{}", num(*l), num(*p)))
        .collect();
    let _ = writeln!(s, "anchors = {}", anchors.join(", "));
    let _ = writeln!(s, "max_residual = {}", num(spec.calibration.max_residual));
    let _ = writeln!(s, "\n[latency]");
    let _ = writeln!(s, "k_cycles = {}", spec.k_cycles);
    let _ = writeln!(s, "p_f_max = {}", num(spec.p_f_max));
    let _ = writeln!(s, "oversampling = {}", spec.oversampling);
    let _ = writeln!(s, "data_draws = {}", spec.data_draws);
    let conv: Vec<_> = spec.rate_conventions.iter().map(|c| c.name()).collect();
    let _ = writeln!(s, "rate_conventions = {}", conv.join(", "));
    s
}

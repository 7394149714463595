//! System and frame parameters.
//!
//! All quantities are stored in linear SI units (W, Hz, m, rad); dB and dBm
//! values only appear in the conversion helpers used at configuration time.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::antenna::SectorPattern;
use crate::error::{invalid, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise power spectral density at room temperature, dBm/Hz.
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;

/// Duration of a single SS block in the default numerology: a 1.25 ms burst holds 16 blocks.
pub const SS_BLOCK_MS: f64 = 1.25 / 16.0;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm) * 1e-3
}

pub fn watts_to_dbm(w: f64) -> f64 {
    linear_to_db(w * 1e3)
}

/// How often the LOS/NLOS state of a link is redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BlockageMode {
    #[default]
    PerSlot,
    /// Held for one scan cycle of N_BS mini-slots.
    PerCycle,
    /// Held for the whole trial.
    Frozen,
}

/// Physical and protocol constants of the network model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// BS density, BS/m².
    pub lambda_bs: f64,
    /// Blockage exponent, 1/m. LOS probability at distance r is `exp(-beta r)`.
    pub beta: f64,
    pub alpha_los: f64,
    /// `f64::INFINITY` removes NLOS links entirely.
    pub alpha_nlos: f64,
    /// Carrier frequency, Hz.
    pub f_c: f64,
    pub speed_of_light: f64,
    /// Transmit powers, W.
    pub p_bs_control: f64,
    pub p_bs_data: f64,
    /// Bandwidths, Hz.
    pub bw_control: f64,
    pub bw_data: f64,
    pub noise_figure_db: f64,
    /// Detection threshold T (linear).
    pub sinr_threshold: f64,
    /// Beamforming directions at the BS and the UE.
    pub n_bs: usize,
    pub n_ue: usize,
    /// Array sizes for the ULA model.
    pub m_bs: usize,
    pub m_ue: usize,
    /// Sidelobe gain of the sectorized pattern.
    pub epsilon: f64,
    /// Cell-search budget in mini-slots.
    pub n_c: usize,
    /// Radius of the simulated disc, m.
    pub region_radius: f64,
    pub blockage: BlockageMode,
    /// Refuse to sample networks whose mean BS count exceeds this.
    pub max_expected_bs: usize,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self::table1()
    }
}

impl SystemParams {
    /// The default evaluation setup: 28 GHz, 30 dBm, 28.8/100 MHz, NF 7 dB,
    /// exponents 2.5/4, β = 0.02, T = 0 dB, 12 BS and 4 UE directions.
    ///
    /// Models that ignore NLOS links (the LOS-only and sidelobe analyses, the
    /// default simulator mode) treat `alpha_nlos` as infinite regardless of
    /// the stored value.
    pub fn table1() -> Self {
        Self {
            lambda_bs: 1e-4,
            beta: 0.02,
            alpha_los: 2.5,
            alpha_nlos: 4.0,
            f_c: 28e9,
            speed_of_light: SPEED_OF_LIGHT,
            p_bs_control: dbm_to_watts(30.0),
            p_bs_data: dbm_to_watts(30.0),
            bw_control: 28.8e6,
            bw_data: 100e6,
            noise_figure_db: 7.0,
            sinr_threshold: 1.0,
            n_bs: 12,
            n_ue: 4,
            m_bs: 12,
            m_ue: 4,
            epsilon: 0.0,
            n_c: 12,
            region_radius: 2000.0,
            blockage: BlockageMode::PerSlot,
            max_expected_bs: 5_000_000,
        }
    }

    /// `table1` with the rounded constants the reference curves were
    /// computed with: c = 3e8 m/s and a 28 MHz control bandwidth. Together they
    /// lower the normalized control-plane noise by the factor 0.97054.
    pub fn reference_numerics() -> Self {
        Self {
            speed_of_light: 3e8,
            bw_control: 28e6,
            ..Self::table1()
        }
    }

    /// Copy with NLOS links removed (α_N = ∞).
    pub fn los_only(mut self) -> Self {
        self.alpha_nlos = f64::INFINITY;
        self
    }

    pub fn with_lambda(mut self, lambda_bs: f64) -> Self {
        self.lambda_bs = lambda_bs;
        self
    }

    pub fn with_beams(mut self, n_bs: usize, n_ue: usize) -> Self {
        self.n_bs = n_bs;
        self.n_ue = n_ue;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_bs > 0.0 && self.lambda_bs.is_finite()) {
            return Err(invalid("lambda_bs", "must be positive and finite"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(invalid("beta", "must be non-negative and finite"));
        }
        if !(self.alpha_los >= 2.0 && self.alpha_los.is_finite()) {
            return Err(invalid("alpha_los", "must be finite and at least 2"));
        }
        if !(self.alpha_nlos >= self.alpha_los) {
            return Err(invalid("alpha_nlos", "must be at least alpha_los"));
        }
        for (name, v) in [
            ("f_c", self.f_c),
            ("speed_of_light", self.speed_of_light),
            ("p_bs_control", self.p_bs_control),
            ("p_bs_data", self.p_bs_data),
            ("bw_control", self.bw_control),
            ("bw_data", self.bw_data),
            ("sinr_threshold", self.sinr_threshold),
            ("region_radius", self.region_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive and finite"));
            }
        }
        if !self.noise_figure_db.is_finite() {
            return Err(invalid("noise_figure_db", "must be finite"));
        }
        for (name, v) in [
            ("n_bs", self.n_bs),
            ("n_ue", self.n_ue),
            ("m_bs", self.m_bs),
            ("m_ue", self.m_ue),
            ("n_c", self.n_c),
        ] {
            if v == 0 {
                return Err(invalid(name, "must be a positive integer"));
            }
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid("epsilon", "must lie in [0, 1]"));
        }
        if self.n_bs > 1 && self.epsilon >= self.bs_pattern().mainlobe_gain() {
            return Err(invalid("epsilon", "sidelobe gain must stay below the mainlobe gain"));
        }
        Ok(())
    }

    /// BS half-power beamwidth, 2π/N_BS.
    pub fn theta_bs(&self) -> f64 {
        2.0 * PI / self.n_bs as f64
    }

    pub fn theta_ue(&self) -> f64 {
        2.0 * PI / self.n_ue as f64
    }

    pub fn bs_pattern(&self) -> SectorPattern {
        SectorPattern::from_beam_count(self.n_bs, self.epsilon)
    }

    /// UE mainlobe gain. UE sidelobes are neglected, so this is N_UE.
    pub fn ue_gain(&self) -> f64 {
        self.n_ue as f64
    }

    /// c / (4π f_c): the distance at which the free-space factor equals one.
    pub fn reference_distance(&self) -> f64 {
        self.speed_of_light / (4.0 * PI * self.f_c)
    }

    /// (c / 4π f_c)^α_L, written k₁ in the NLOS Laplace transform.
    pub fn k_los(&self) -> f64 {
        self.reference_distance().powf(self.alpha_los)
    }

    /// (c / 4π f_c)^α_N; zero when NLOS links are disabled.
    pub fn k_nlos(&self) -> f64 {
        if self.alpha_nlos.is_infinite() {
            0.0
        } else {
            self.reference_distance().powf(self.alpha_nlos)
        }
    }

    pub fn expected_bs_count(&self) -> f64 {
        self.lambda_bs * PI * self.region_radius * self.region_radius
    }

    /// Smallest disc radius beyond which a LOS BS with maximal gains has mean
    /// SNR below T/100.
    pub fn recommended_region_radius(&self) -> f64 {
        let gain = self.bs_pattern().mainlobe_gain() * self.ue_gain();
        let noise = crate::channel::thermal_noise_watts(self.bw_control, self.noise_figure_db);
        let snr_at_unit = gain * self.p_bs_control * self.k_los() / noise;
        (100.0 * snr_at_unit / self.sinr_threshold).powf(1.0 / self.alpha_los)
    }
}

/// Frame structure: SS burst, random-access window and data period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameTiming {
    pub t_frame: f64,
    pub t_cs: f64,
    pub t_ra: f64,
    pub n_ss_blocks: usize,
}

impl Default for FrameTiming {
    fn default() -> Self {
        Self::with_ss_blocks(16)
    }
}

impl FrameTiming {
    /// 20 ms frame, 1.25 ms random access and an SS burst of `n` blocks
    /// (16/32/64 blocks give 1.25/2.5/5 ms).
    pub fn with_ss_blocks(n: usize) -> Self {
        Self {
            t_frame: 20.0,
            t_cs: n as f64 * SS_BLOCK_MS,
            t_ra: 1.25,
            n_ss_blocks: n,
        }
    }

    /// Frame whose SS burst lasts exactly one scan cycle of `n_bs` beams, with
    /// the random-access window scaled the same way.
    pub fn adapted_to_scan_cycle(n_bs: usize) -> Self {
        let t = n_bs as f64 * SS_BLOCK_MS;
        Self {
            t_frame: 20.0,
            t_cs: t,
            t_ra: t,
            n_ss_blocks: n_bs,
        }
    }

    pub fn t_ss_block(&self) -> f64 {
        self.t_cs / self.n_ss_blocks as f64
    }

    /// Time left for data in each frame.
    pub fn data_window(&self) -> f64 {
        self.t_frame - self.t_cs - self.t_ra
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ss_blocks == 0 {
            return Err(invalid("n_ss_blocks", "must be a positive integer"));
        }
        if !(self.t_cs > 0.0 && self.t_ra >= 0.0) {
            return Err(invalid("t_cs", "durations must be positive"));
        }
        if self.t_cs + self.t_ra >= self.t_frame {
            return Err(invalid("t_frame", "must exceed t_cs + t_ra"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table1_is_valid() {
        SystemParams::table1().validate().unwrap();
        SystemParams::reference_numerics().validate().unwrap();
        FrameTiming::default().validate().unwrap();
    }

    #[test]
    fn ss_burst_lengths() {
        for (n, t) in [(16, 1.25), (32, 2.5), (64, 5.0)] {
            let f = FrameTiming::with_ss_blocks(n);
            assert_eq!(f.t_cs, t);
            assert_eq!(f.t_ss_block(), SS_BLOCK_MS);
        }
    }

    #[test]
    fn rejects_bad_values() {
        let mut p = SystemParams::table1();
        p.n_bs = 0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::table1();
        p.alpha_nlos = 2.0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::table1();
        p.region_radius = 0.0;
        assert!(p.validate().is_err());
        let mut p = SystemParams::table1();
        p.epsilon = 1.0;
        assert!(p.validate().is_err());
        p.n_bs = 1;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn beam_counts_tile_the_circle() {
        let p = SystemParams::table1();
        assert!((p.n_bs as f64 * p.theta_bs() - 2.0 * PI).abs() < 1e-12);
        assert!((p.n_ue as f64 * p.theta_ue() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn default_region_covers_snr_horizon() {
        let p = SystemParams::table1();
        let r = p.recommended_region_radius();
        assert!(r > 1500.0 && r <= p.region_radius, "r = {r}");
    }

    #[test]
    fn frame_rejects_overlong_burst() {
        let f = FrameTiming {
            t_frame: 2.0,
            ..FrameTiming::default()
        };
        assert!(f.validate().is_err());
    }

    #[test]
    fn db_round_trip() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(1.0) - 30.0).abs() < 1e-12);
        assert_eq!(db_to_linear(0.0), 1.0);
    }
}

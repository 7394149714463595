use std::f64::consts::PI;

use mmia::analytic::{failure_prob_los, QuadratureSpec};
use mmia::antenna::sector_index;
use mmia::channel::path_loss;
use mmia::network::{BsSite, Link, NetworkRealization};
use mmia::sim::*;
use mmia::SystemParams;

const SCHEMES: [Scheme; 3] = [
    Scheme::RandomBeamforming,
    Scheme::ExhaustiveSearch,
    Scheme::IterativeSearch,
];

fn empty_network(slots: usize, n_bs: usize) -> NetworkRealization {
    NetworkRealization {
        bs: Vec::new(),
        slots: vec![Vec::new(); slots],
        ue_boresight: vec![0; slots.div_ceil(n_bs)],
        n_bs,
        sampled_radius: 500.0,
        seed: 0,
    }
}

/// One LOS BS at `r` in every slot, with the scan order pointing its beam at
/// the UE in slot `aligned_slot` of each cycle.
fn single_bs_network(p: &SystemParams, slots: usize, r: f64, aligned_slot: usize) -> NetworkRealization {
    let psi = 0.1;
    let site = BsSite { r, psi };
    let toward_ue = sector_index(site.bearing_to_ue(), p.n_bs);
    let links = (0..slots)
        .map(|t| {
            let beam = if t % p.n_bs == aligned_slot {
                toward_ue
            } else {
                (toward_ue + 1) % p.n_bs
            };
            vec![Link {
                bs: 0,
                los: true,
                fading: 1.0,
                path_gain: path_loss(r, true, p).unwrap(),
                bs_beam: beam as u16,
                sweep_offset: 0,
            }]
        })
        .collect();
    NetworkRealization {
        bs: vec![site],
        slots: links,
        ue_boresight: vec![sector_index(psi, p.n_ue); slots.div_ceil(p.n_bs)],
        n_bs: p.n_bs,
        sampled_radius: 500.0,
        seed: 0,
    }
}

#[test]
fn no_base_stations_means_failure() {
    let p = SystemParams::table1();
    for antenna in [AntennaModel::Sbp, AntennaModel::Ula] {
        for scheme in SCHEMES {
            let config = SchemeConfig::new(scheme, antenna);
            let out = run_search(&empty_network(config.slots(&p), p.n_bs), &p, &config);
            assert!(!out.success);
            assert_eq!(out.best_sinr, 0.0);
            assert_eq!(out.winning_bs, None);
        }
    }
}

#[test]
fn lone_nearby_base_station_is_found() {
    let p = SystemParams::table1();
    for antenna in [AntennaModel::Sbp, AntennaModel::Ula] {
        for scheme in SCHEMES {
            let config = SchemeConfig::new(scheme, antenna);
            let net = single_bs_network(&p, config.slots(&p), 30.0, 5);
            let out = run_search(&net, &p, &config);
            assert!(out.success, "{scheme:?} {antenna:?}");
            assert_eq!(out.winning_bs, Some(0));
            assert!(out.best_sinr >= p.sinr_threshold);
        }
    }
}

#[test]
fn random_beamforming_waits_for_the_aligned_slot() {
    let p = SystemParams::table1();
    let config = SchemeConfig::new(Scheme::RandomBeamforming, AntennaModel::Sbp);
    let out = run_search(&single_bs_network(&p, 12, 30.0, 7), &p, &config);
    assert_eq!(out.winning_slot, Some(7));
    // Without sidelobes the BS is silent toward the UE when misaligned.
    let out = run_search(&single_bs_network(&p, 12, 30.0, 99), &p, &config);
    assert!(!out.success);
}

#[test]
fn far_base_station_is_below_threshold() {
    let p = SystemParams::table1();
    let config = SchemeConfig::new(Scheme::ExhaustiveSearch, AntennaModel::Ula);
    let out = run_search(&single_bs_network(&p, config.slots(&p), 1e5, 0), &p, &config);
    assert!(!out.success);
    assert!(out.best_sinr > 0.0 && out.best_sinr < p.sinr_threshold);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let p = SystemParams::table1().with_lambda(3e-4);
    let config = SchemeConfig::new(Scheme::IterativeSearch, AntennaModel::Ula);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_failure(&config, &p, 500, 42).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
    assert_ne!(one, estimate_failure(&config, &p, 500, 10_000).unwrap());
}

#[test]
fn sectorized_simulation_matches_the_analysis() {
    let p = SystemParams::table1().los_only();
    let config = SchemeConfig::new(Scheme::RandomBeamforming, AntennaModel::Sbp);
    let analytic = failure_prob_los(&p, p.n_c, &QuadratureSpec::default()).unwrap().value;
    let mc = estimate_failure(&config, &p, 20_000, 7).unwrap();
    assert!(
        (analytic - mc.estimate).abs() < 4.0 * mc.std_error() + 1e-3,
        "{analytic} vs {mc:?}"
    );
}

#[test]
fn search_schemes_are_ordered() {
    let p = SystemParams::reference_numerics();
    let f = |s| {
        estimate_failure(&SchemeConfig::cycle_coherent(s, AntennaModel::Ula), &p, 3000, 5)
            .unwrap()
            .estimate
    };
    let (rb, es, is) = (
        f(Scheme::RandomBeamforming),
        f(Scheme::ExhaustiveSearch),
        f(Scheme::IterativeSearch),
    );
    assert!(es < is && is < rb, "ES {es} IS {is} RB {rb}");
}

#[test]
fn longer_budget_fails_less() {
    let p = SystemParams::table1();
    let config = SchemeConfig::new(Scheme::RandomBeamforming, AntennaModel::Sbp);
    let f = |n_c| {
        estimate_failure(&config, &SystemParams { n_c, ..p.clone() }, 4000, 9)
            .unwrap()
            .estimate
    };
    let (short, long) = (f(4), f(24));
    assert!(long < short, "{long} !< {short}");
}

#[test]
fn wilson_interval_brackets_the_estimate() {
    for (failures, trials) in [(0, 10), (3, 10), (500, 1000), (1000, 1000)] {
        let e = FailureEstimate::from_counts(failures, trials);
        assert!(e.ci_low <= e.estimate && e.estimate <= e.ci_high);
        assert!(e.ci_low >= 0.0 && e.ci_high <= 1.0);
    }
    assert!(estimate_failure(
        &SchemeConfig::new(Scheme::RandomBeamforming, AntennaModel::Sbp),
        &SystemParams::table1(),
        0,
        1
    )
    .is_err());
}

#[test]
fn iterative_search_uses_wide_then_narrow_beams() {
    let c = SchemeConfig::new(Scheme::IterativeSearch, AntennaModel::Ula);
    assert_eq!(c.stage1_beams(), 4);
    let c = SchemeConfig {
        stage1_beamwidth: PI,
        ..c
    };
    assert_eq!(c.stage1_beams(), 2);
    assert_eq!(c.slots(&SystemParams::table1()), 2 * 4 + 12);
}

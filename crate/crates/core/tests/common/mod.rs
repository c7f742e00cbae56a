//! Shared fixtures, oracles and property checks for the integration tests
//! and the acceptance runner.

#![allow(dead_code)]

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};

use homsim::fitting::{lorentzian, lorentzian_gradient, G2Model};
use homsim::mc::{
    collection_for_detected_rate, simulate_emitter_stream, simulate_hom, simulate_hom_histogram, simulate_ple,
    DetectorModel, EmissionDynamics, HomExpectation, HomSetup, PleSettings, Polarization,
};
use homsim::model::{dephasing_envelope, g1, g2_auto, g2_cross, AutocorrParams, EmitterModel, PairConfig};
use homsim::tcspc::{correlate_times, CorrelationHistogram, CorrelatorConfig, Normalization};
use homsim::units::{mhz, ns, PS, US};

pub fn emitter(f_ex_mhz: f64, fwhm_mhz: f64, purity: f64) -> EmitterModel {
    EmitterModel {
        f_ex: mhz(f_ex_mhz),
        f_ey: mhz(f_ex_mhz + 3000.0),
        gamma: 1.0 / ns(12.0),
        sd_fwhm: mhz(fwhm_mhz),
        autocorr: AutocorrParams::two_level(ns(12.0)).unwrap(),
        spin_purity: purity,
    }
}

pub fn dynamics(pump_per_ns: f64) -> EmissionDynamics {
    EmissionDynamics {
        pump_rate: pump_per_ns / ns(1.0),
        gamma: 1.0 / ns(12.0),
        shelf_prob: 0.12,
        shelf_lifetime: ns(250.0),
    }
}

pub fn noisy_detector(noise_cps: f64) -> DetectorModel {
    DetectorModel {
        efficiency: 0.65,
        dark_rate: 0.3 * noise_cps,
        background_rate: 0.7 * noise_cps,
        jitter_sigma: 50.0 * PS,
        dead_time: ns(22.0),
    }
}

pub fn ple_settings() -> PleSettings {
    PleSettings {
        init_pulse: 5.0 * US,
        dwell: 10e-3,
        peak_rate: 10_000.0,
        background_rate: 200.0,
    }
}

/// Outcome of comparing a simulated histogram with its analytic expectation.
#[derive(Debug, Clone, Copy)]
pub struct OracleOutcome {
    pub bins: usize,
    pub within_3sigma: usize,
    pub mean_counts: f64,
}

impl OracleOutcome {
    pub fn fraction(&self) -> f64 {
        self.within_3sigma as f64 / self.bins as f64
    }
}

/// One parameter set of the MC-versus-closed-form comparison.
pub struct OracleCase {
    pub name: &'static str,
    pub pair: PairConfig,
    pub dyns: [EmissionDynamics; 2],
    pub setup: HomSetup,
    pub polarization: Polarization,
}

/// Signal clicks per detector in the oracle runs. High enough for a few
/// hundred coincidences per 64 ps bin in a minute, low enough that photon
/// overlaps inside a pairing window stay rare.
pub const ORACLE_SIGNAL_CPS: f64 = 2.0e5;

pub fn oracle_cases() -> Vec<OracleCase> {
    let dyns = [dynamics(0.06), dynamics(0.05)];
    let setup_for = |det: DetectorModel| {
        let c = [
            collection_for_detected_rate(&dyns[0], ORACLE_SIGNAL_CPS / 2.0, det.efficiency).unwrap(),
            collection_for_detected_rate(&dyns[1], ORACLE_SIGNAL_CPS / 2.0, det.efficiency).unwrap(),
        ];
        HomSetup::new(c, [det, det])
    };
    // Noise share of the two-emitter HOM preset: 160 of 2200 counts/s.
    let noise = ORACLE_SIGNAL_CPS * 160.0 / 2040.0;
    vec![
        OracleCase {
            name: "ideal",
            pair: PairConfig::new(emitter(0.0, 88.0, 1.0), emitter(0.0, 106.0, 1.0), 1.0).unwrap(),
            dyns,
            setup: setup_for(DetectorModel::ideal()),
            polarization: Polarization::Parallel,
        },
        OracleCase {
            name: "detuned 93 MHz",
            pair: PairConfig::new(emitter(93.0, 88.0, 1.0), emitter(0.0, 106.0, 1.0), 1.0).unwrap(),
            dyns,
            setup: setup_for(DetectorModel::ideal()),
            polarization: Polarization::Parallel,
        },
        OracleCase {
            name: "full noise",
            pair: PairConfig::new(emitter(93.0, 88.0, 0.94), emitter(0.0, 106.0, 0.94), 0.6057).unwrap(),
            dyns,
            setup: setup_for(noisy_detector(noise)),
            polarization: Polarization::Parallel,
        },
    ]
}

/// Simulates `case` and counts the 64 ps bins with |τ| ≤ 50 ns whose
/// counts lie within 3√μ of the bin-averaged expectation μ.
pub fn oracle_check(case: &OracleCase, duration: f64, seed: u64) -> homsim::Result<OracleOutcome> {
    let corr = CorrelatorConfig {
        window: ns(60.0),
        ..Default::default()
    };
    let hist = simulate_hom_histogram(
        &case.pair,
        &case.dyns[0],
        &case.dyns[1],
        &case.setup,
        duration,
        seed,
        case.polarization,
        &corr,
        10.0,
    )?;
    let expect = HomExpectation::new(&case.pair, &case.dyns[0], &case.dyns[1], &case.setup, case.polarization)?;
    Ok(compare(&hist, |lo, hi| expect.g2_bin_average(lo, hi), ns(50.0)))
}

pub fn compare(hist: &CorrelationHistogram, expected: impl Fn(f64, f64) -> f64, max_abs_tau: f64) -> OracleOutcome {
    let unit = hist.unit_counts().unwrap();
    let (mut bins, mut ok, mut total) = (0, 0, 0.0);
    #[allow(clippy::needless_range_loop)]
    for i in 0..hist.n_bins() {
        let (lo, hi) = (hist.bin_edges_ps[i] as f64 * PS, hist.bin_edges_ps[i + 1] as f64 * PS);
        if lo.abs().max(hi.abs()) > max_abs_tau + 1e-15 {
            continue;
        }
        let mu = unit[i] * expected(lo, hi);
        bins += 1;
        total += mu;
        if (hist.counts[i] as f64 - mu).abs() <= 3.0 * mu.max(1.0).sqrt() {
            ok += 1;
        }
    }
    OracleOutcome {
        bins,
        within_3sigma: ok,
        mean_counts: total / bins.max(1) as f64,
    }
}

// Property checks. Each runs a deterministic proptest runner and returns the
// first counterexample as an error string.

pub type PropResult = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn finish<T: std::fmt::Debug>(r: Result<(), TestError<T>>) -> PropResult {
    r.map_err(|e| e.to_string())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

fn arb_emitter() -> impl Strategy<Value = EmitterModel> {
    (-500.0..500.0f64, 0.0..300.0f64, 0.5..1.0f64, 0.0..3.0f64, 1.0..30.0f64, 30.0..500.0f64, 5.0..30.0f64).prop_map(
        |(f, w, q, a, t1, t2, life)| EmitterModel {
            f_ex: mhz(f),
            f_ey: mhz(f + 3000.0),
            gamma: 1.0 / ns(life),
            sd_fwhm: mhz(w),
            autocorr: AutocorrParams::new(a, ns(t1), ns(t2)).unwrap(),
            spin_purity: q,
        },
    )
}

fn arb_pair() -> impl Strategy<Value = PairConfig> {
    (arb_emitter(), arb_emitter(), 0.0..=1.0f64).prop_map(|(e1, e2, xi)| PairConfig::new(e1, e2, xi).unwrap())
}

/// Every correlation function is even in τ.
pub fn prop_evenness() -> PropResult {
    let strategy = (arb_pair(), -300.0..300.0f64, any::<bool>());
    finish(runner(512).run(&strategy, |(pair, t, env)| {
        let tau = ns(t);
        let e1 = pair.emitter1;
        prop_assert_eq!(g1(tau, e1.gamma).unwrap(), g1(-tau, e1.gamma).unwrap());
        prop_assert_eq!(g2_auto(tau, &e1.autocorr).unwrap(), g2_auto(-tau, &e1.autocorr).unwrap());
        prop_assert_eq!(
            dephasing_envelope(tau, e1.sd_fwhm, pair.emitter2.sd_fwhm).unwrap(),
            dephasing_envelope(-tau, e1.sd_fwhm, pair.emitter2.sd_fwhm).unwrap()
        );
        prop_assert_eq!(g2_cross(tau, &pair, env).unwrap(), g2_cross(-tau, &pair, env).unwrap());
        let model = G2Model::Cross {
            width: ns(3.0),
            delta_f0: pair.delta_f0,
        };
        let p = [0.9, pair.xi, e1.autocorr.a, e1.autocorr.tau1, e1.autocorr.tau2, 1.0];
        prop_assert_eq!(model.value(tau, &p), model.value(-tau, &p));
        Ok(())
    }))
}

/// The closed-form envelope equals the average of cos(2π(ν₁−ν₂)τ) over
/// 10⁶ photon pairs whose centre frequencies come from the Monte Carlo
/// emitter streams, within 3 standard errors.
pub fn prop_envelope_oracle() -> PropResult {
    const N: usize = 1_000_000;
    let strategy = (20.0..200.0f64, 20.0..200.0f64, 0.2..6.0f64, any::<u64>());
    finish(runner(6).run(&strategy, |(w1, w2, t, seed)| {
        let (e1, e2) = (emitter(0.0, w1, 1.0), emitter(0.0, w2, 1.0));
        // Pump hard so that ~10⁶ photons take only a few tens of ms.
        let dy = EmissionDynamics {
            pump_rate: 1.0 / ns(1.0),
            gamma: e1.gamma,
            shelf_prob: 0.0,
            shelf_lifetime: ns(250.0),
        };
        let span = 1.3 * N as f64 / dy.emission_rate();
        let a = simulate_emitter_stream(&e1, &dy, span, seed).unwrap();
        let b = simulate_emitter_stream(&e2, &dy, span, seed.wrapping_add(1)).unwrap();
        prop_assume!(a.len() >= N && b.len() >= N);
        let tau = ns(t);
        let (mut s, mut s2) = (0.0, 0.0);
        for (p, q) in a.iter().zip(&b).take(N) {
            let c = (2.0 * std::f64::consts::PI * (p.center_freq - q.center_freq) * tau).cos();
            s += c;
            s2 += c * c;
        }
        let mean = s / N as f64;
        let se = ((s2 / N as f64 - mean * mean) / N as f64).sqrt();
        let exact = dephasing_envelope(tau, mhz(w1), mhz(w2)).unwrap();
        prop_assert!((mean - exact).abs() <= 3.0 * se, "MC {mean} vs {exact} (SE {se})");
        Ok(())
    }))
}

fn arb_timestamps() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
    let ts = || prop::collection::vec(0i64..2_000_000, 0..400).prop_map(|mut v| {
        v.sort_unstable();
        v.dedup();
        v
    });
    (ts(), ts())
}

/// Rebinning by any odd factor conserves coincidences, keeps τ = 0 in the
/// central bin and conserves the g⁽²⁾ = 1 reference counts.
pub fn prop_rebin_conservation() -> PropResult {
    let strategy = (arb_timestamps(), 0usize..40, 2i64..200, any::<bool>());
    finish(runner(256).run(&strategy, |((c, d), k, half_bw, tail)| {
        let cfg = CorrelatorConfig {
            bin_width: (2 * half_bw) as f64 * PS,
            window: 100_000.0 * PS,
            normalization: if tail { Normalization::TailAverage } else { Normalization::RateProduct },
        };
        let h = match correlate_times(&c, &d, 2_000_000, &cfg) {
            Ok(h) => h,
            // Tail-average normalisation with coincidences but an empty tail.
            Err(homsim::Error::Validity(_)) => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let factor = 2 * k + 1;
        let r = h.rebin(factor).unwrap();
        prop_assert_eq!(r.total_counts(), h.total_counts());
        let ci = r.center_index();
        prop_assert!(r.bin_edges_ps[ci] <= 0 && r.bin_edges_ps[ci + 1] > 0);
        prop_assert_eq!(r.bin_edges_ps.first(), h.bin_edges_ps.first());
        prop_assert_eq!(r.bin_edges_ps.last(), h.bin_edges_ps.last());
        if matches!(cfg.normalization, Normalization::RateProduct) {
            let u0: f64 = h.unit_counts().unwrap().iter().sum();
            let u1: f64 = r.unit_counts().unwrap().iter().sum();
            prop_assert!(close(u0, u1, 1e-9));
        }
        Ok(())
    }))
}

/// Identical seeds reproduce streams, histograms and spectra bit for bit;
/// different seeds do not.
pub fn prop_determinism() -> PropResult {
    let pair = PairConfig::new(emitter(93.0, 88.0, 0.94), emitter(0.0, 106.0, 0.94), 0.6).unwrap();
    let dyns = [dynamics(0.06), dynamics(0.05)];
    let setup = HomSetup::new([0.002, 0.002], [noisy_detector(5000.0), noisy_detector(5000.0)]);
    let corr = CorrelatorConfig::default();
    let scan: Vec<f64> = (-60..=60).map(|k| mhz(5.0 * k as f64)).collect();
    let em = emitter(0.0, 88.0, 1.0);
    finish(runner(8).run(&(any::<u64>(), any::<bool>()), |(seed, par)| {
        let pol = if par { Polarization::Parallel } else { Polarization::Perpendicular };
        let s1 = simulate_hom(&pair, &dyns[0], &dyns[1], &setup, 0.5, seed, pol).unwrap();
        let s2 = simulate_hom(&pair, &dyns[0], &dyns[1], &setup, 0.5, seed, pol).unwrap();
        prop_assert!(!s1.clicks.is_empty());
        prop_assert_eq!(&s1, &s2);
        let s3 = simulate_hom(&pair, &dyns[0], &dyns[1], &setup, 0.5, seed ^ 1, pol).unwrap();
        prop_assert_ne!(&s1, &s3);
        let h1 = simulate_hom_histogram(&pair, &dyns[0], &dyns[1], &setup, 1.0, seed, pol, &corr, 0.25).unwrap();
        let h2 = simulate_hom_histogram(&pair, &dyns[0], &dyns[1], &setup, 1.0, seed, pol, &corr, 0.25).unwrap();
        prop_assert_eq!(h1, h2);
        let p1 = simulate_ple(&em, &scan, &ple_settings(), seed).unwrap();
        let p2 = simulate_ple(&em, &scan, &ple_settings(), seed).unwrap();
        prop_assert_eq!(p1, p2);
        Ok(())
    }))
}

/// Central differences with a step of 1e-4 in each parameter's natural
/// unit (`scale`); agreement is required to 1e-6 relative to the larger of
/// the derivative and the function value.
fn fd_check(analytic: &[f64], f: impl Fn(&[f64]) -> f64, p: &[f64], scale: &[f64]) -> Result<(), TestCaseError> {
    let f0 = f(p).abs();
    for k in 0..p.len() {
        let h = 1e-4 * scale[k];
        let mut up = p.to_vec();
        up[k] += h;
        let mut dn = p.to_vec();
        dn[k] -= h;
        let fd = (f(&up) - f(&dn)) / (2.0 * h);
        let (a, b) = (analytic[k] * scale[k], fd * scale[k]);
        prop_assert!(
            (a - b).abs() <= 1e-6 * a.abs().max(f0),
            "d/dp[{k}]: analytic {} vs finite difference {}",
            analytic[k],
            fd
        );
    }
    Ok(())
}

/// Analytic Jacobians of the fit models agree with central finite
/// differences to 1e-6.
pub fn prop_jacobians() -> PropResult {
    let g2_strategy = (
        0.1..1.0f64,
        -1.0..1.0f64,
        0.0..3.0f64,
        2.0..20.0f64,
        40.0..300.0f64,
        0.5..1.5f64,
        -40.0..40.0f64,
        -100.0..100.0f64,
    );
    finish(runner(256).run(&g2_strategy, |(amp, xi, a, t1, t2, s, t, df)| {
        let tau = ns(t);
        let (lo, hi) = (tau - 32.0 * PS, tau + 32.0 * PS);
        let auto = G2Model::Auto;
        let p = [amp, a, ns(t1), ns(t2), s];
        let scale = [1.0, 1.0, ns(1.0), ns(1.0), 1.0];
        fd_check(&auto.bin_gradient(lo, hi, &p), |q| auto.bin_value(lo, hi, q), &p, &scale)?;
        let cross = G2Model::Cross {
            width: ns(3.0),
            delta_f0: mhz(df),
        };
        let p = [amp, xi, a, ns(t1), ns(t2), s];
        let scale = [1.0, 1.0, 1.0, ns(1.0), ns(1.0), 1.0];
        fd_check(&cross.bin_gradient(lo, hi, &p), |q| cross.bin_value(lo, hi, q), &p, &scale)?;
        Ok(())
    }))?;
    let l_strategy = (0.0..500.0f64, 1.0..5000.0f64, -300.0..300.0f64, 20.0..200.0f64, -600.0..600.0f64);
    finish(runner(256).run(&l_strategy, |(off, amp, c, w, f)| {
        let p = [off, amp, mhz(c), mhz(w)];
        let scale = [1.0, 1.0, mhz(1.0), mhz(1.0)];
        fd_check(&lorentzian_gradient(mhz(f), &p), |q| lorentzian(mhz(f), q), &p, &scale)
    }))
}

/// Runs every property suite, returning (name, outcome) pairs.
pub fn all_properties() -> Vec<(&'static str, PropResult)> {
    vec![
        ("evenness", prop_evenness()),
        ("dephasing envelope vs MC", prop_envelope_oracle()),
        ("rebinning conservation", prop_rebin_conservation()),
        ("determinism", prop_determinism()),
        ("jacobian vs finite difference", prop_jacobians()),
    ]
}

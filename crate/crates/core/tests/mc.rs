mod common;

use homsim::mc::{
    collection_for_detected_rate, simulate_hbt_histogram, simulate_hom, ClickStream, Detector, DetectorModel,
    EmissionDynamics, HbtSetup, HomExpectation, HomSetup, Polarization, Provenance,
};
use homsim::model::{with_uncorrelated_background, PairConfig};
use homsim::tcspc::{correlate, CorrelatorConfig};
use homsim::units::{ns, to_ps};
use homsim::{presets, Error};

use common::{compare, dynamics, emitter, noisy_detector};

fn preset_setup() -> (PairConfig, [EmissionDynamics; 2], HomSetup) {
    presets::find("paper-fig3d", None).unwrap().config.hom_setup().unwrap()
}

#[test]
fn no_clicks_inside_dead_time() {
    let (pair, [d1, d2], setup) = preset_setup();
    let s = simulate_hom(&pair, &d1, &d2, &setup, 20.0, 3, Polarization::Parallel).unwrap();
    s.validate().unwrap();
    let dead = to_ps(setup.detectors[0].dead_time);
    for det in [Detector::C, Detector::D] {
        let t = s.times(det);
        assert!(t.windows(2).all(|w| w[1] - w[0] >= dead));
        assert!(t.iter().all(|&x| x >= 0 && x <= s.duration_ps()));
    }
}

#[test]
fn click_rates_match_expectation() {
    let (pair, [d1, d2], setup) = preset_setup();
    let s = simulate_hom(&pair, &d1, &d2, &setup, 100.0, 9, Polarization::Parallel).unwrap();
    let exp = HomExpectation::new(&pair, &d1, &d2, &setup, Polarization::Parallel).unwrap();
    assert!((exp.rates[0] - 2200.0).abs() < 1.0, "{:?}", exp.rates);
    for (j, det) in [Detector::C, Detector::D].into_iter().enumerate() {
        let r = s.count(det) as f64 / s.duration;
        assert!((r / exp.rates[j] - 1.0).abs() < 0.02, "{det}: {r} vs {}", exp.rates[j]);
        let noise = (s.count_by(det, Provenance::Dark) + s.count_by(det, Provenance::Background)) as f64 / s.duration;
        assert!((noise / 160.0 - 1.0).abs() < 0.05, "{det} noise {noise}");
    }
}

#[test]
fn dark_emitters_give_flat_correlation() {
    let (pair, _, _) = preset_setup();
    let dark = EmissionDynamics {
        pump_rate: 0.0,
        ..dynamics(0.06)
    };
    let det = DetectorModel {
        dark_rate: 150_000.0,
        background_rate: 250_000.0,
        ..noisy_detector(0.0)
    };
    let setup = HomSetup::new([0.01, 0.01], [det, det]);
    let corr = CorrelatorConfig::default();
    let s = simulate_hom(&pair, &dark, &dark, &setup, 20.0, 1, Polarization::Parallel).unwrap();
    assert!(s.clicks.iter().all(|c| matches!(c.provenance, Provenance::Dark | Provenance::Background)));
    let h = correlate(&s, &corr).unwrap();
    // Dead time is the only structure: it cannot act across detectors.
    let o = compare(&h, |_, _| 1.0, ns(100.0));
    assert!(o.fraction() > 0.99, "{o:?}");
    // ~6×10⁵ coincidences in the window: the mean is known to ~0.2 %.
    let mean: f64 = h.g2.iter().sum::<f64>() / h.n_bins() as f64;
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
}

#[test]
fn autocorrelation_matches_dynamics() {
    let em = emitter(0.0, 88.0, 1.0);
    let dy = dynamics(0.08);
    let det = DetectorModel {
        dead_time: 0.0,
        ..noisy_detector(3000.0)
    };
    let setup = HbtSetup {
        collection: collection_for_detected_rate(&dy, 1.0e5, det.efficiency).unwrap(),
        detectors: [det, det],
    };
    let corr = CorrelatorConfig {
        window: ns(60.0),
        ..Default::default()
    };
    let h = simulate_hbt_histogram(&em, &dy, &setup, 200.0, 11, &corr, 10.0).unwrap();
    let shape = dy.autocorr_params().unwrap();
    let rho = 1.0e5 / (1.0e5 + 3000.0);
    let o = compare(
        &h,
        |lo, hi| {
            let g = |t: f64| with_uncorrelated_background(shape.eval(t), rho, rho);
            // Simpson over the bin is plenty at 64 ps.
            (g(lo) + 4.0 * g(0.5 * (lo + hi)) + g(hi)) / 6.0
        },
        ns(50.0),
    );
    assert!(o.mean_counts > 100.0, "{o:?}");
    assert!(o.fraction() >= 0.95, "{o:?}");
}

#[test]
fn perpendicular_and_parallel_differ_only_near_zero() {
    let (pair, [d1, d2], setup) = preset_setup();
    let par = HomExpectation::new(&pair, &d1, &d2, &setup, Polarization::Parallel).unwrap();
    let perp = HomExpectation::new(&pair, &d1, &d2, &setup, Polarization::Perpendicular).unwrap();
    assert!((par.g2(0.0) - 0.34).abs() < 1e-9);
    assert!((perp.g2(0.0) - 0.5700).abs() < 1e-3);
    assert!((par.g2(ns(40.0)) - perp.g2(ns(40.0))).abs() < 1e-6);
}

#[test]
fn flux_too_high_for_pairing_is_rejected() {
    let pair = PairConfig::new(emitter(0.0, 88.0, 1.0), emitter(0.0, 106.0, 1.0), 1.0).unwrap();
    let dy = dynamics(0.06);
    let setup = HomSetup::new([0.5, 0.5], [DetectorModel::ideal(); 2]);
    let err = simulate_hom(&pair, &dy, &dy, &setup, 1e-3, 0, Polarization::Parallel).unwrap_err();
    assert!(matches!(err, Error::Validity(_)), "{err}");
}

#[test]
fn invalid_inputs_are_rejected() {
    let (pair, [d1, d2], setup) = preset_setup();
    for bad in [0.0, -1.0, f64::NAN] {
        assert!(simulate_hom(&pair, &d1, &d2, &setup, bad, 0, Polarization::Parallel).is_err());
    }
    let mut s = setup;
    s.detectors[0].efficiency = 1.5;
    assert!(matches!(
        simulate_hom(&pair, &d1, &d2, &s, 1.0, 0, Polarization::Parallel),
        Err(Error::Config(_))
    ));
    let frozen = EmissionDynamics {
        gamma: 0.0,
        ..d1
    };
    assert!(frozen.validate().is_err());
}

#[test]
fn click_csv_round_trip() {
    let (pair, [d1, d2], setup) = preset_setup();
    let s = simulate_hom(&pair, &d1, &d2, &setup, 2.0, 5, Polarization::Perpendicular).unwrap();
    let mut buf = Vec::new();
    s.write_csv(&mut buf).unwrap();
    assert!(buf.starts_with(b"detector_id,time_ps,provenance\n"));
    let back = ClickStream::read_csv(buf.as_slice(), s.duration, s.seed).unwrap();
    assert_eq!(back, s);
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use homsim::tcspc::{correlate_times, CorrelatorConfig, Normalization};
use homsim::units::{ns, PS};

fn poisson_times(rate: f64, duration_ps: i64, rng: &mut ChaCha8Rng) -> Vec<i64> {
    let mut t = 0.0;
    let mut out = Vec::new();
    loop {
        t += -rng.random::<f64>().ln() / rate / PS;
        if t >= duration_ps as f64 {
            return out;
        }
        out.push(t as i64);
    }
}

#[test]
fn independent_streams_are_flat() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dur = 20_000_000_000_000; // 20 s
    let c = poisson_times(2e5, dur, &mut rng);
    let d = poisson_times(2e5, dur, &mut rng);
    for mode in [Normalization::RateProduct, Normalization::TailAverage] {
        let cfg = CorrelatorConfig {
            normalization: mode,
            ..Default::default()
        };
        let h = correlate_times(&c, &d, dur, &cfg).unwrap().rebin(31).unwrap();
        let n = h.n_bins() as f64;
        let mean = h.g2.iter().sum::<f64>() / n;
        assert!((mean - 1.0).abs() < 0.01, "{mode:?}: {mean}");
        let chi2: f64 = h
            .g2
            .iter()
            .zip(&h.g2_err)
            .map(|(g, e)| ((g - mean) / e.unwrap()).powi(2))
            .sum();
        assert!(chi2 / n < 1.3, "{mode:?}: chi2/n = {}", chi2 / n);
    }
}

#[test]
fn fixed_delay_lands_in_expected_bin() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dur = 1_000_000_000_000;
    let c = poisson_times(1e4, dur, &mut rng);
    let d: Vec<i64> = c.iter().map(|t| t + 5_000).collect();
    let cfg = CorrelatorConfig::default();
    let h = correlate_times(&c, &d, dur + 5_000, &cfg).unwrap();
    let peak = (0..h.n_bins()).max_by_key(|&i| h.counts[i]).unwrap();
    let centre = h.bin_centers()[peak];
    assert!((centre - ns(5.0)).abs() <= 32.0 * PS, "{centre}");
    assert_eq!(h.counts[peak] as usize, c.len());
}

#[test]
fn merged_segments_equal_whole_when_no_pair_straddles() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = CorrelatorConfig::default();
    let seg = 500_000_000_000;
    let a_c = poisson_times(2e4, seg, &mut rng);
    let a_d = poisson_times(2e4, seg, &mut rng);
    let b_c = poisson_times(2e4, seg, &mut rng);
    let b_d = poisson_times(2e4, seg, &mut rng);
    let mut h = correlate_times(&a_c, &a_d, seg, &cfg).unwrap();
    h.merge(&correlate_times(&b_c, &b_d, seg, &cfg).unwrap()).unwrap();
    // Shift the second segment far beyond the window and correlate in one go.
    let gap = seg + 1_000_000;
    let c: Vec<i64> = a_c.iter().copied().chain(b_c.iter().map(|t| t + gap)).collect();
    let d: Vec<i64> = a_d.iter().copied().chain(b_d.iter().map(|t| t + gap)).collect();
    let whole = correlate_times(&c, &d, 2 * seg, &cfg).unwrap();
    assert_eq!(h.counts, whole.counts);
    assert_eq!((h.clicks_c, h.clicks_d), (whole.clicks_c, whole.clicks_d));
}

#[test]
fn unsorted_or_odd_bins_rejected() {
    let cfg = CorrelatorConfig {
        bin_width: 63.0 * PS,
        ..Default::default()
    };
    assert!(correlate_times(&[1, 2], &[3], 10, &cfg).is_err());
    assert!(correlate_times(&[2, 1], &[3], 10, &CorrelatorConfig::default()).is_err());
    let h = correlate_times(&[0], &[0], 10, &CorrelatorConfig::default()).unwrap();
    assert!(h.rebin(2).is_err());
}

mod common;

#[test]
fn correlation_functions_are_even() {
    common::prop_evenness().unwrap();
}

#[test]
fn dephasing_envelope_matches_monte_carlo() {
    common::prop_envelope_oracle().unwrap();
}

#[test]
fn rebinning_conserves_counts() {
    common::prop_rebin_conservation().unwrap();
}

#[test]
fn fixed_seeds_are_deterministic() {
    common::prop_determinism().unwrap();
}

#[test]
fn jacobians_match_finite_differences() {
    common::prop_jacobians().unwrap();
}

//! Unit conversions between the human-facing units used in configuration
//! files (ns, MHz, V, counts/s) and SI used internally.

pub const NS: f64 = 1e-9;
pub const PS: f64 = 1e-12;
pub const US: f64 = 1e-6;
pub const MHZ: f64 = 1e6;
pub const GHZ: f64 = 1e9;

/// Seconds to integer picoseconds, rounded to nearest.
pub fn to_ps(t: f64) -> i64 {
    (t / PS).round() as i64
}

pub fn from_ps(t: i64) -> f64 {
    t as f64 * PS
}

pub fn ns(t: f64) -> f64 {
    t * NS
}

pub fn mhz(f: f64) -> f64 {
    f * MHZ
}

pub fn to_ns(t: f64) -> f64 {
    t / NS
}

pub fn to_mhz(f: f64) -> f64 {
    f / MHZ
}

/// Rate in ns⁻¹ to s⁻¹.
pub fn per_ns(rate: f64) -> f64 {
    rate / NS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn picosecond_round_trip() {
        assert_eq!(to_ps(64e-12), 64);
        assert_eq!(to_ps(-3.0e-9), -3000);
        assert_eq!(from_ps(1_000), 1e-9);
        assert_eq!(to_ps(from_ps(123_456_789)), 123_456_789);
    }

    #[test]
    fn boundary_units() {
        assert!((ns(12.0) - 12e-9).abs() < 1e-15 * 12e-9);
        assert!((mhz(88.0) - 88e6).abs() < 1e-6);
        assert!((per_ns(1.0 / 12.0) - 1.0 / 12e-9).abs() < 1e-3);
        assert!((to_ns(ns(3.1)) - 3.1).abs() < 1e-12);
        assert!((to_mhz(mhz(106.0)) - 106.0).abs() < 1e-12);
    }
}

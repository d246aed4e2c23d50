//! Conversions between interface units (hours, mm, km², L/s) and SI.

pub const SECONDS_PER_HOUR: f64 = 3600.0;
pub const M2_PER_KM2: f64 = 1.0e6;
pub const MM_PER_M: f64 = 1.0e3;
pub const LPS_PER_M3S: f64 = 1.0e3;

pub fn hours_to_seconds(h: f64) -> f64 {
    h * SECONDS_PER_HOUR
}

pub fn seconds_to_hours(s: f64) -> f64 {
    s / SECONDS_PER_HOUR
}

/// A rate given per hour, expressed per second.
pub fn per_hour_to_per_second(r: f64) -> f64 {
    r / SECONDS_PER_HOUR
}

pub fn per_second_to_per_hour(r: f64) -> f64 {
    r * SECONDS_PER_HOUR
}

pub fn km2_to_m2(a: f64) -> f64 {
    a * M2_PER_KM2
}

pub fn m2_to_km2(a: f64) -> f64 {
    a / M2_PER_KM2
}

pub fn mm_to_m(d: f64) -> f64 {
    d / MM_PER_M
}

pub fn m_to_mm(d: f64) -> f64 {
    d * MM_PER_M
}

pub fn m3s_to_lps(q: f64) -> f64 {
    q * LPS_PER_M3S
}

pub fn lps_to_m3s(q: f64) -> f64 {
    q / LPS_PER_M3S
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn conversions_round_trip(x in 1e-9f64..1e9) {
            let rel = |a: f64, b: f64| ((a - b) / b).abs();
            prop_assert!(rel(seconds_to_hours(hours_to_seconds(x)), x) < 1e-12);
            prop_assert!(rel(per_second_to_per_hour(per_hour_to_per_second(x)), x) < 1e-12);
            prop_assert!(rel(m2_to_km2(km2_to_m2(x)), x) < 1e-12);
            prop_assert!(rel(m_to_mm(mm_to_m(x)), x) < 1e-12);
            prop_assert!(rel(lps_to_m3s(m3s_to_lps(x)), x) < 1e-12);
        }
    }

    #[test]
    fn known_values() {
        assert_eq!(hours_to_seconds(24.0), 86_400.0);
        assert_eq!(km2_to_m2(0.6), 6.0e5);
        assert_eq!(mm_to_m(5.0), 0.005);
    }
}

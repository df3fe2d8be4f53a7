//! Float formatting for CSV exports: 17 significant digits, `.` decimal
//! separator, so that every f64 round-trips exactly.

/// Render a float with 17 significant digits in scientific notation.
pub fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::g17;

    #[test]
    fn round_trips_f64() {
        for x in [
            0.0,
            1.0,
            -1.0 / 3.0,
            std::f64::consts::PI,
            3.8706535524506944,
            1e-300,
            -2.225e-308,
            f64::MAX,
        ] {
            let s = g17(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{s}");
        }
    }
}

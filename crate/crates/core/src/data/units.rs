use super::DataError;

const KM_PER_MILE: f64 = 1.609344;

pub fn kmh_to_mph(kmh: f64) -> f64 {
    kmh / KM_PER_MILE
}

/// Source units (°C, km/h, %) to model units (°F, mph, fraction).
pub fn convert_units(temp_c: f64, wind_kmh: f64, rh_pct: f64) -> Result<(f64, f64, f64), DataError> {
    if !(0.0..=100.0).contains(&rh_pct) {
        return Err(DataError::HumidityOutOfRange {
            line: None,
            value: rh_pct,
        });
    }
    Ok((temp_c * 9.0 / 5.0 + 32.0, kmh_to_mph(wind_kmh), rh_pct / 100.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn freezing_point() {
        assert_eq!(convert_units(0.0, 0.0, 0.0).unwrap(), (32.0, 0.0, 0.0));
    }

    #[test]
    fn boiling_point_and_unit_mile() {
        let (t, w, h) = convert_units(100.0, 1.609344, 100.0).unwrap();
        assert_eq!(t, 212.0);
        assert_eq!(w, 1.0);
        assert_eq!(h, 1.0);
    }

    #[test]
    fn mixed_values_invert() {
        let (t, w, h) = convert_units(40.0 / 3.0, 10.0, 55.0).unwrap();
        assert_relative_eq!(t, 56.0, max_relative = 1e-14);
        assert_relative_eq!(w, 6.2137, max_relative = 1e-4);
        assert_relative_eq!(h, 0.55);
        // inverses
        assert_relative_eq!((t - 32.0) * 5.0 / 9.0, 40.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(w * 1.609344, 10.0, max_relative = 1e-14);
    }

    #[test]
    fn humidity_out_of_range() {
        assert!(matches!(
            convert_units(20.0, 5.0, 101.0),
            Err(DataError::HumidityOutOfRange { value, .. }) if value == 101.0
        ));
        assert!(convert_units(20.0, 5.0, -0.5).is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_each_argument(t in -40.0..50.0f64, w in 0.0..100.0f64, h in 0.0..99.0f64, d in 0.001..1.0f64) {
            let (a0, b0, c0) = convert_units(t, w, h).unwrap();
            let (a1, b1, c1) = convert_units(t + d, w + d, h + d).unwrap();
            prop_assert!(a1 > a0 && b1 > b0 && c1 > c0);
        }
    }
}

use clickspace_wasm::{click_probabilities, scan_rows, significance_rows, STRIDE};

#[test]
fn scan_rows_are_flat_records() {
    let rows = scan_rows("squeezed:r=1", 6, 0.9, 0.0, 10_000, 0.0, 2.0, 201, 0.0).unwrap();
    assert_eq!(rows.len(), 201 * STRIDE);
    let (at, z) = rows
        .chunks(STRIDE)
        .map(|r| (r[0], r[3]))
        .fold(
            (f64::NAN, f64::INFINITY),
            |best, cur| if cur.1 < best.1 { cur } else { best },
        );
    assert!((z + 8.8).abs() <= 0.5 && (at - 0.8).abs() <= 0.1 + 1e-12, "{z} at {at}");
}

#[test]
fn significance_rows_follow_the_grid() {
    let rows = significance_rows("fock:n=1", 4, 0.9, 0.0, 0.0, 10_000, -0.5, 0.5, 3).unwrap();
    let s: Vec<f64> = rows.chunks(STRIDE).map(|r| r[0]).collect();
    assert_eq!(s, [-0.5, 0.0, 0.5]);
    let z: Vec<f64> = rows.chunks(STRIDE).map(|r| r[3]).collect();
    assert!(z.windows(2).all(|w| w[1] < w[0] && w[0] < 0.0));
}

#[test]
fn missing_significance_is_nan() {
    let rows = significance_rows("fock:n=0", 2, 1.0, 0.0, 0.0, 100, 0.0, 0.0, 1).unwrap();
    assert!(rows[3].is_nan());
    assert!((rows[1] - 2.0 / std::f64::consts::PI).abs() < 1e-15);
}

#[test]
fn click_probabilities_of_a_single_photon() {
    assert_eq!(
        click_probabilities("fock:n=1", 2, 1.0, 0.0, 0.0).unwrap(),
        [0.0, 1.0, 0.0]
    );
}

#[test]
fn invalid_input_is_an_error() {
    assert!(scan_rows("squeezed:r=1", 6, 0.9, 1.5, 100, 0.0, 1.0, 3, 0.0).is_err());
    assert!(click_probabilities("nonsense", 2, 1.0, 0.0, 0.0).is_err());
    assert!(click_probabilities("fock:n=1", 0, 1.0, 0.0, 0.0).is_err());
}

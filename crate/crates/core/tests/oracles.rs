//! Sanity of the reference implementations in `common`.

mod common;

use common::*;

#[test]
fn e1_tabulated() {
    let table = [
        (0.1, 1.822_923_958_419_390_7),
        (0.5, 0.559_773_594_776_160_8),
        (1.0, 0.219_383_934_395_520_27),
        (2.0, 0.048_900_510_708_061_12),
        (10.0, 4.156_968_929_685_324e-6),
    ];
    for (z, want) in table {
        let got = e1(z);
        assert!(((got - want) / want).abs() < 1e-13, "E1({z}) = {got}, want {want}");
    }
}

#[test]
fn ewald_robin_matches_frozen_value() {
    assert!((ewald_robin() - ROBIN_SQUARE).abs() < 1e-12);
}

#[test]
fn ewald_green_solves_poisson() {
    // five-point Laplacian away from the pole should give 1
    let h = 1e-3;
    for x in [[0.3, 0.1], [0.5, 0.5], [0.21, 0.77]] {
        let c = ewald_green(x);
        let lap = (ewald_green([x[0] + h, x[1]])
            + ewald_green([x[0] - h, x[1]])
            + ewald_green([x[0], x[1] + h])
            + ewald_green([x[0], x[1] - h])
            - 4.0 * c)
            / (h * h);
        assert!((lap - 1.0).abs() < 1e-4, "lap at {x:?} = {lap}");
    }
}

#[test]
fn ewald_green_symmetries() {
    let x = [0.137, 0.291];
    let g = ewald_green(x);
    for y in [[-x[0], x[1]], [x[1], x[0]], [1.0 - x[0], 1.0 - x[1]], [x[0] + 1.0, x[1] - 2.0]] {
        assert!((ewald_green(y) - g).abs() < 1e-13);
    }
}

#[test]
fn ewald_green_log_singularity() {
    // 8 pi G + 4 ln r -> A as r -> 0
    let r = 1e-4_f64;
    let v = 8.0 * std::f64::consts::PI * ewald_green([r, 0.0]) + 4.0 * r.ln();
    assert!((v - ROBIN_SQUARE).abs() < 1e-6);
}

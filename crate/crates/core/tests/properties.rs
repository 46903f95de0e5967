mod common;

use proptest::prelude::*;

use common::*;
use meanfield::functional::{eval_j, grad_j};
use meanfield::spectral::{dirichlet_energy, inverse_laplacian, laplacian, Spectrum};
use meanfield::{PrescribedFunction, TorusGrid};

fn grid() -> TorusGrid {
    TorusGrid::new(32).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn shift_leaves_energy_unchanged(seed in any::<u64>(), c in -20.0..20.0_f64, rho in 0.5..30.0_f64) {
        let g = grid();
        let h = PrescribedFunction::bump().sample(&g).unwrap();
        let u = random_field(&g, &mut rng(seed), 4, 1.0);
        let mut v = u.clone();
        v.add_scalar(c);
        let a = eval_j(&u, &h, rho).unwrap().value;
        let b = eval_j(&v, &h, rho).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs() + c.abs()));
    }

    #[test]
    fn gradient_integrates_to_zero(seed in any::<u64>(), rho in 0.5..30.0_f64) {
        let g = grid();
        let h = PrescribedFunction::cosine_product(0.5).sample(&g).unwrap();
        let u = random_field(&g, &mut rng(seed), 5, 1.5);
        let gr = grad_j(&u, &h, rho).unwrap();
        prop_assert!(gr.integrate().abs() <= 1e-13 * (1.0 + gr.max_abs()));
    }

    #[test]
    fn parseval_energy_matches_grid_pairing(seed in any::<u64>()) {
        let g = grid();
        let u = random_field(&g, &mut rng(seed), 6, 1.0);
        let lap = laplacian(&u).unwrap();
        let pairing = -u.dot(&lap);
        let e = dirichlet_energy(&u);
        prop_assert!((e - pairing).abs() <= 1e-12 * e.max(1.0));
        prop_assert!(e >= 0.0);
    }

    #[test]
    fn inverse_laplacian_roundtrip(seed in any::<u64>()) {
        let g = grid();
        let mut f = random_field(&g, &mut rng(seed), 6, 1.0);
        f.remove_mean();
        let v = inverse_laplacian(&f).unwrap();
        prop_assert!(v.integrate().abs() < 1e-14);
        let back = laplacian(&v).unwrap();
        prop_assert!(back.zip_map(&f, |a, b| a - b).max_abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_nodes(seed in any::<u64>(), i in 0usize..32, j in 0usize..32) {
        let g = grid();
        let f = random_field(&g, &mut rng(seed), 6, 1.0);
        let s = Spectrum::of(&f);
        prop_assert!((s.interpolate(g.node(i, j)) - f.at(i, j)).abs() < 1e-12);
    }
}

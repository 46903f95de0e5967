mod common;

use meanfield::blowup::*;
use meanfield::functional::EIGHT_PI;
use meanfield::grid::torus_distance;
use meanfield::solver::SolverOptions;
use meanfield::{PrescribedFunction, TorusGrid};

#[test]
fn constant_weight_never_concentrates() {
    let g = TorusGrid::new(64).unwrap();
    let run = continuation_run(
        &PrescribedFunction::one(),
        &g,
        &[1.0, 0.5, 0.1],
        &SolverOptions::default(),
        &ContinuationOptions::default(),
    )
    .unwrap();
    assert_eq!(run.diagnostics.len(), 3);
    assert!(run.halted_at.is_none() && run.failure.is_none());
    for d in &run.diagnostics {
        assert!(d.lambda.abs() < 1e-9, "lambda {}", d.lambda);
        assert!(matches!(d.farfield, Farfield::NotApplicable { .. }));
        assert!(d.identity.is_none());
        assert!((d.rho - (EIGHT_PI - d.eps)).abs() < 1e-15);
    }
}

#[test]
fn bump_concentrates_at_its_maximum() {
    let g = TorusGrid::new(128).unwrap();
    let h = PrescribedFunction::bump();
    let run = continuation_run(
        &h,
        &g,
        &geometric_schedule(1e-4),
        &SolverOptions::default(),
        &ContinuationOptions::default(),
    )
    .unwrap();
    assert!(run.failure.is_none(), "{:?}", run.failure);
    let d = &run.diagnostics;
    assert!(d.len() >= 3);
    assert!(d.windows(2).all(|w| w[1].lambda > w[0].lambda));

    // the guard fires on the first point whose bubble scale would be under-resolved
    let halted = run.halted_at.expect("guard must stop the bump run");
    let last = d.last().unwrap();
    assert!(halted < last.eps);
    assert!((-0.5 * last.lambda).exp() >= GUARD_SPACINGS * g.spacing());

    for x in d {
        assert!(torus_distance(x.peak, [0.0, 0.0]) <= 2.0 * g.spacing());
        assert!(x.rho_eps > 0.0 && x.rho_eps < EIGHT_PI);
        if let Some(id) = &x.identity {
            assert!(id.lhs < 0.0 && id.rhs < 0.0);
        }
    }
    assert!(last.bubble.as_ref().unwrap().sup_deviation < 1.0);
    assert!(last.farfield.sup_omega().is_some());
}

#[test]
fn resolution_guard_can_be_tightened() {
    let g = TorusGrid::new(64).unwrap();
    let copts = ContinuationOptions {
        guard_spacings: 30.0,
        ..ContinuationOptions::default()
    };
    let run = continuation_run(&PrescribedFunction::bump(), &g, &[1.0, 0.5], &SolverOptions::default(), &copts).unwrap();
    assert!(run.diagnostics.is_empty());
    assert_eq!(run.halted_at, Some(1.0));
}

#[test]
fn cp_contrast_away_from_peak() {
    let h = PrescribedFunction::bump();
    let (near, _) = cp_condition_check([1e-3, 0.0], 8.0, &h).unwrap();
    let (far, _) = cp_condition_check([0.05, 0.0], 8.0, &h).unwrap();
    assert!(far > near);
    let neg = PrescribedFunction::Constant { value: -1.0 };
    assert!(cp_condition_check([0.0, 0.0], 8.0, &neg).is_err());
}

#[test]
fn schedule_must_decrease() {
    let g = TorusGrid::new(32).unwrap();
    let r = continuation_run(
        &PrescribedFunction::one(),
        &g,
        &[0.5, 1.0],
        &SolverOptions::default(),
        &ContinuationOptions::default(),
    );
    assert!(r.is_err());
}

use std::sync::Arc;

use fracwave::fdac::{solve_fdac, DEFAULT_THRESHOLD};
use fracwave::fem::GridWeight;
use fracwave::tss::{FnSource, Prepared};
use fracwave::verify::{converge_table, Axis};
use fracwave::{run_fdac, run_tss, Example, ManufacturedCase, MeshSpec, Method, Preset, ProblemSetup, VariableOrder};

fn sine_problem(dim: usize, level: u32, preset: Preset, steps: usize) -> ProblemSetup {
    let mesh = MeshSpec::dyadic(dim, level, 0.01).unwrap();
    let order = VariableOrder::preset(preset, 1.0).unwrap();
    let sine = |x: &[f64]| x.iter().map(|v| (std::f64::consts::PI * v).sin()).product::<f64>();
    ProblemSetup::new(mesh, order, 1.0, steps)
        .unwrap()
        .with_initial_data(Arc::new(sine), Arc::new(move |x: &[f64]| 0.5 * sine(x)))
        .with_source(Arc::new(FnSource(|x: &[f64], t: f64| 1.0 + t * x[0])))
}

#[test]
fn tss_and_fdac_agree_across_presets_and_dimensions() {
    for preset in Preset::ALL {
        for (dim, level, steps) in [(1, 3, 40), (2, 2, 33), (1, 4, 64)] {
            let setup = sine_problem(dim, level, preset, steps);
            let a = run_tss(&setup).unwrap();
            let b = run_fdac(&setup).unwrap();
            let diff = a.max_relative_diff(&b).unwrap();
            assert!(diff <= 1e-10, "{preset:?} dim={dim} N={steps}: {diff:e}");
        }
    }
}

#[test]
fn fdac_threshold_is_an_implementation_detail() {
    let setup = sine_problem(1, 3, Preset::OneMinusCos, 100);
    let prep = Prepared::new(&setup).unwrap();
    let base = solve_fdac(&prep, DEFAULT_THRESHOLD).unwrap();
    for threshold in [1, 3, 7, 64, 200] {
        let other = solve_fdac(&prep, threshold).unwrap();
        assert!(base.max_relative_diff(&other).unwrap() <= 1e-12, "threshold {threshold}");
    }
}

#[test]
fn ex1_error_decreases_with_refinement() {
    let case = ManufacturedCase::new(Example::Ex1).unwrap();
    let table = converge_table(&case, Axis::Temporal, &[4, 5, 6], 6, Method::Fdac, GridWeight::Volume).unwrap();
    let errors = table.errors();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    let rates = table.rates();
    assert!(rates.iter().all(|r| *r > 0.7), "{rates:?}");
}

#[test]
fn ex2_spatial_refinement_reduces_the_error() {
    let case = ManufacturedCase::new(Example::Ex2).unwrap();
    let coarse = case.setup(2, 64).unwrap();
    let fine = case.setup(3, 64).unwrap();
    let e_coarse = case.final_error(&coarse, &Method::Fdac.run(&coarse).unwrap()).unwrap().unwrap();
    let e_fine = case.final_error(&fine, &Method::Fdac.run(&fine).unwrap()).unwrap().unwrap();
    assert!(e_fine < e_coarse, "{e_fine:e} vs {e_coarse:e}");
}

#[test]
fn ex3_has_no_exact_solution() {
    let case = ManufacturedCase::new(Example::Ex3).unwrap();
    let setup = case.setup(3, 8).unwrap();
    let traj = Method::Tss.run(&setup).unwrap();
    assert!(case.final_error(&setup, &traj).unwrap().is_none());
    assert!(traj.last().iter().all(|v| v.is_finite()));
}

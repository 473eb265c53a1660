use std::sync::Arc;

use conical_core::squarefn::{evaluate, evaluate_many, pointwise_domination_report};
use conical_core::{c64, EllipticOperator, Grid, GridFunction, SquareFamily, SquareFunctionSpec, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(grid: Grid, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..grid.len())
        .map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    GridFunction::new(grid, v).unwrap()
}

#[test]
fn dominations_hold_cell_by_cell() {
    for (dim, n) in [(1, 32), (2, 16)] {
        let g = Grid::new(dim, n).unwrap();
        let t = Arc::new(TimeGrid::standard(&g));
        for name in ["laplace", "perturbed"] {
            let op = EllipticOperator::preset(g, name).unwrap();
            for seed in 0..5 {
                let f = random_field(g, seed);
                let r = pointwise_domination_report(&op, &f, t.clone(), &[0, 1, 2]).unwrap();
                assert_eq!(r.rows.len(), 7);
                assert!(r.max_violation() < 1e-12, "{name} n={dim}: {r:?}");
                // the time component alone already carries twice the S_H integrand
                assert!(r.rows[6].max_ratio <= 0.5 + 1e-12);
            }
        }
    }
}

#[test]
fn homogeneous_of_degree_one() {
    let g = Grid::new(1, 32).unwrap();
    let op = EllipticOperator::preset(g, "perturbed").unwrap();
    let t = Arc::new(TimeGrid::standard(&g));
    let f = random_field(g, 3);
    let c = c64::new(-1.5, 2.0);
    let specs: Vec<SquareFunctionSpec> =
        SquareFamily::ALL.iter().map(|&fam| SquareFunctionSpec::default_order(fam, t.clone())).collect();
    let a = evaluate_many(&op, &specs, &f).unwrap();
    let b = evaluate_many(&op, &specs, &f.scale(c)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        for (u, v) in x.iter().zip(y) {
            assert!((v - c.norm() * u).abs() <= 1e-12 * v.abs().max(1e-300) * 10.0, "{u} {v}");
        }
    }
}

#[test]
fn single_and_batched_agree() {
    let g = Grid::new(2, 8).unwrap();
    let op = EllipticOperator::preset(g, "perturbed").unwrap();
    let t = Arc::new(TimeGrid::standard(&g));
    let f = random_field(g, 5);
    let spec = SquareFunctionSpec::new(SquareFamily::GcalP, 1, 1.0, t.clone()).unwrap();
    let one = evaluate(&op, &spec, &f).unwrap().abs();
    let many = evaluate_many(&op, &[SquareFunctionSpec::default_order(SquareFamily::SH, t), spec], &f).unwrap();
    for (a, b) in one.iter().zip(&many[1]) {
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }
}

#[test]
fn wider_aperture_is_larger() {
    let g = Grid::new(1, 32).unwrap();
    let op = EllipticOperator::preset(g, "laplace").unwrap();
    let t = Arc::new(TimeGrid::standard(&g).restrict(0.0, 0.125).unwrap());
    let f = random_field(g, 6);
    let narrow = SquareFunctionSpec::new(SquareFamily::GH, 0, 1.0, t.clone()).unwrap();
    let wide = SquareFunctionSpec::new(SquareFamily::GH, 0, 4.0, t).unwrap();
    let v = evaluate_many(&op, &[narrow, wide], &f).unwrap();
    assert!(v[0].iter().zip(&v[1]).all(|(a, b)| a <= b));
}

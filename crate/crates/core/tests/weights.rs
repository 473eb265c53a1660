use conical_core::weights::{
    admissible_interval, ap_blowup, estimate_ap_constant, estimate_critical_exponents, estimate_rh_constant,
    hl_maximal, p_plus_kstar, power_weight_in_ar, power_weight_in_rh, rh_blowup, BLOWUP_RATIO,
};
use conical_core::{c64, BallFamily, Grid, GridFunction, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CENTER: [f64; 2] = [0.5, 0.5];

fn power(n_cells: usize, theta: f64) -> (Weight, BallFamily) {
    let g = Grid::new(2, n_cells).unwrap();
    (Weight::power(g, theta, &CENTER).unwrap(), BallFamily::dyadic(&g))
}

#[test]
fn membership_matches_blow_up() {
    for theta in [-2.0, 0.0, 1.0, 1.9] {
        let (w, fam) = power(64, theta);
        for r in [1.5, 3.0] {
            let b = ap_blowup(&w, r, &fam, BLOWUP_RATIO).unwrap();
            assert_eq!(power_weight_in_ar(theta, 2, r), !b.unbounded(), "θ={theta} A_{r}: {}", b.ratio());
        }
        let b = rh_blowup(&w, 8.0, &fam, BLOWUP_RATIO).unwrap();
        assert_eq!(power_weight_in_rh(theta, 2, 8.0), !b.unbounded(), "θ={theta} RH_8: {}", b.ratio());
    }
}

#[test]
fn ap_constant_is_resolution_stable_inside_the_class() {
    let (w64, f64_) = power(64, 1.0);
    let (w32, f32_) = power(32, 1.0);
    let a = estimate_ap_constant(&w64, 2.0, &f64_).unwrap();
    let b = estimate_ap_constant(&w32, 2.0, &f32_).unwrap();
    assert!(a >= 1.0 && (a / b - 1.0).abs() <= 0.2, "{a} {b}");
}

#[test]
fn nesting_over_exponent_grids() {
    for theta in [-1.0, 0.5, 1.5] {
        let (w, fam) = power(32, theta);
        let ap: Vec<f64> =
            [1.25, 1.5, 2.0, 3.0, 5.0].iter().map(|&p| estimate_ap_constant(&w, p, &fam).unwrap()).collect();
        assert!(ap.windows(2).all(|x| x[1] <= x[0] * (1.0 + 1e-12)), "{ap:?}");
        let rh: Vec<f64> =
            [1.25, 1.5, 2.0, 3.0, 5.0].iter().map(|&q| estimate_rh_constant(&w, q, &fam).unwrap()).collect();
        assert!(rh.windows(2).all(|x| x[1] >= x[0] * (1.0 - 1e-12)), "{rh:?}");
    }
}

#[test]
fn duality_of_power_weight_classes() {
    // w_θ^{1-p'} = w_{θ(1-p')}
    for theta in [-3.0, -1.0, 0.0, 0.7, 1.9] {
        for p in [1.2, 2.0, 3.5] {
            let pc = p / (p - 1.0);
            assert_eq!(power_weight_in_ar(theta, 2, p), power_weight_in_ar(theta * (1.0 - pc), 2, pc));
        }
    }
}

#[test]
fn rh_estimate_grows_outside_the_class() {
    let (w, fam) = power(64, 1.5);
    // s = 4 means RH_{4/3}: θ = 1.5 misses θ < 0.5
    assert!(rh_blowup(&w, 4.0 / 3.0, &fam, BLOWUP_RATIO).is_ok());
    let b = rh_blowup(&w, 4.0, &fam, BLOWUP_RATIO).unwrap();
    assert!(b.unbounded(), "{}", b.ratio());
}

#[test]
fn critical_exponents_of_power_weights() {
    let tol = 0.25;
    let (w, fam) = power(64, 1.0);
    let (r_w, s_w) = estimate_critical_exponents(&w, &fam, tol).unwrap();
    assert_eq!(r_w.value, 1.0);
    assert!(s_w.lower <= 2.0 + tol && s_w.upper >= 2.0 - tol, "{s_w:?}");
    let (w, fam) = power(64, -2.0);
    let (r_w, s_w) = estimate_critical_exponents(&w, &fam, tol).unwrap();
    assert!(r_w.lower <= 2.0 + tol && r_w.upper >= 2.0 - tol, "{r_w:?}");
    assert_eq!(s_w.value, 1.0);
}

#[test]
fn interval_and_p_plus_conventions() {
    let i = admissible_interval(0.0, f64::INFINITY, 3.0, 2.0).unwrap();
    assert_eq!((i.lo, i.hi), (0.0, f64::INFINITY));
    let i = admissible_interval(1.0, 12.0, 1.0, 2.0).unwrap();
    assert_eq!((i.lo, i.hi), (1.0, 6.0));
    assert!(admissible_interval(2.0, 2.0, 1.0, 1.0).is_err());
    assert_eq!(p_plus_kstar(3.0, 1, 10).unwrap(), 30.0);
    assert_eq!(p_plus_kstar(3.0, 1, 9).unwrap(), f64::INFINITY);
    assert_eq!(p_plus_kstar(f64::INFINITY, 2, 3).unwrap(), f64::INFINITY);
}

#[test]
fn maximal_function_dominates_every_containing_average() {
    let g = Grid::new(2, 16).unwrap();
    let fam = BallFamily::dyadic(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = GridFunction::new(g, (0..g.len()).map(|_| c64::new(rng.random::<f64>(), 0.0)).collect()).unwrap();
    let m = hl_maximal(&f, 1.0, &fam).unwrap().abs();
    for b in fam.balls() {
        let cells = conical_core::ball_cells(&g, &b.center, b.radius).unwrap();
        let avg = cells.iter().map(|&c| f.values()[c].norm()).sum::<f64>() / cells.len() as f64;
        assert!(cells.iter().all(|&c| m[c] >= avg * (1.0 - 1e-12)));
    }
}

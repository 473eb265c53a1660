//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any fails.

use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use conical_core::elliptic::quadrature::SubordinationRule;
use conical_core::fit::observed_order;
use conical_core::squarefn::pointwise_domination_report;
use conical_core::tent::{whitney, WhitneyCheck};
use conical_core::weights::{
    admissible_interval, ap_blowup, p_plus_kstar, power_weight_in_ar, power_weight_in_rh, rh_blowup, BLOWUP_RATIO,
};
use conical_core::{
    c64, heat_family, heat_gradient, poisson_family, poisson_gradient, BallFamily, Derivative, EllipticOperator,
    Family, Grid, GridFunction, PoissonMethod, Symbol, TimeGrid, Weight,
};
use conical_lab::{Config, ResultTable, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEED: u64 = 1;
const SHARPNESS_BUDGET: Duration = Duration::from_secs(180);
const SEMIGROUP_BUDGET: Duration = Duration::from_secs(60);
const SEMIGROUP_TOL: f64 = 1e-8;
const SUBORDINATION_TOL: f64 = 1e-6;
const FD_ORDER: f64 = 1.8;
const DOMINATION_TOL: f64 = 1e-12;
const SEMIGROUP_N: usize = 32;

type Outcome = (bool, String);

fn random_field(grid: Grid, seed: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..grid.len())
        .map(|_| c64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    GridFunction::new(grid, v).unwrap()
}

fn run_lab(name: &str) -> (ResultTable, Duration) {
    let cfg = Config::parse(&format!("seed = {SEED}")).unwrap();
    let start = Instant::now();
    let table = conical_lab::run(name, &cfg).unwrap();
    (table, start.elapsed())
}

fn summary(t: &ResultTable, took: Duration) -> String {
    format!(
        "{} pass, {} fail, {} info in {:.1}s",
        t.count(Verdict::Pass),
        t.count(Verdict::Fail),
        t.count(Verdict::Info),
        took.as_secs_f64()
    )
}

/// Every check row of the experiment passes and there is at least one.
fn lab(name: &str) -> Outcome {
    let (t, took) = run_lab(name);
    (!t.any_fail() && t.count(Verdict::Pass) > 0, summary(&t, took))
}

fn sharpness() -> Outcome {
    let (t, took) = run_lab("sharpness");
    let slopes: Vec<String> = t.checks().map(|r| format!("{:.4} vs {:.4}", r.measured, r.reference)).collect();
    let ok = !t.any_fail() && t.count(Verdict::Pass) == 3 && took < SHARPNESS_BUDGET;
    (ok, format!("{}; slopes [{}]", summary(&t, took), slopes.join(", ")))
}

fn semigroup() -> Outcome {
    let start = Instant::now();
    let (mut law, mut sub) = (0.0f64, 0.0f64);
    for (dim, name) in [(1, "laplace"), (1, "perturbed"), (2, "laplace"), (2, "perturbed")] {
        let g = Grid::new(dim, SEMIGROUP_N).unwrap();
        let op = EllipticOperator::preset(g, name).unwrap();
        let f = random_field(g, 11);
        let (s, t) = (0.06, 0.09);
        let both = op.apply_matrix_function(&Symbol::Heat { tau: s * s + t * t, power: 0 }, &f).unwrap();
        let inner = heat_family(&op, t, 0, &f).unwrap();
        let outer = heat_family(&op, s, 0, &inner).unwrap();
        law = law.max(outer.relative_l2_error(&both));
        for k in [0, 1] {
            let d = poisson_family(&op, 0.07, k, &f, PoissonMethod::Direct).unwrap();
            let q = poisson_family(&op, 0.07, k, &f, PoissonMethod::Subordination(SubordinationRule::default()))
                .unwrap();
            sub = sub.max(q.relative_l2_error(&d));
        }
    }
    let took = start.elapsed();
    let ok = law < SEMIGROUP_TOL && sub < SUBORDINATION_TOL && took < SEMIGROUP_BUDGET;
    (ok, format!("semigroup {law:.2e}, subordination {sub:.2e}, N={SEMIGROUP_N}, {:.1}s", took.as_secs_f64()))
}

fn fd_order(op: &EllipticOperator, family: Family, m: u32, f: &GridFunction) -> f64 {
    let t = 0.08;
    let value = |s: f64| match family {
        Family::Heat => heat_family(op, s, m, f).unwrap(),
        Family::Poisson => poisson_family(op, s, m, f, PoissonMethod::Direct).unwrap(),
    };
    let analytic = match family {
        Family::Heat => heat_gradient(op, t, m, f, Derivative::Full).unwrap(),
        Family::Poisson => poisson_gradient(op, t, m, f, Derivative::Full).unwrap(),
    }
    .components
    .pop()
    .unwrap();
    let errors = [0.1, 0.05, 0.025].map(|frac| {
        let d = frac * t;
        let (p, q) = (value(t + d), value(t - d));
        let vals = p.values().iter().zip(q.values()).map(|(a, b)| (a - b) * (t / (2.0 * d))).collect();
        GridFunction::new(*op.grid(), vals).unwrap().relative_l2_error(&analytic)
    });
    observed_order(errors)
}

fn time_derivatives() -> Outcome {
    let g = Grid::new(1, 32).unwrap();
    let f = random_field(g, 8);
    let mut worst = f64::INFINITY;
    for name in ["laplace", "perturbed"] {
        let op = EllipticOperator::preset(g, name).unwrap();
        for m in 0..3 {
            for family in [Family::Heat, Family::Poisson] {
                worst = worst.min(fd_order(&op, family, m, &f));
            }
        }
    }
    (worst >= FD_ORDER, format!("smallest observed order {worst:.3}"))
}

fn dominations() -> Outcome {
    let mut worst = 0.0f64;
    for (dim, cells) in [(1, 32), (2, 16)] {
        let g = Grid::new(dim, cells).unwrap();
        let time = Arc::new(TimeGrid::standard(&g));
        for name in ["laplace", "perturbed"] {
            let op = EllipticOperator::preset(g, name).unwrap();
            for seed in 0..5 {
                let r = pointwise_domination_report(&op, &random_field(g, seed), time.clone(), &[0, 1, 2]).unwrap();
                worst = worst.max(r.max_violation());
            }
        }
    }
    (worst < DOMINATION_TOL, format!("largest violation {worst:.2e}"))
}

/// Both branches pass; the `(w_1, s = 2)` holdout is judged on its own numbers since
/// that weight sits on the boundary of the class and the harness reports it as info.
fn angles() -> Outcome {
    let (t, took) = run_lab("angles");
    let verdict = |branch: &str, s: Option<f64>| {
        t.rows.iter().rfind(|r| {
            r.params["branch"] == branch
                && r.params.get("stage").is_none()
                && r.params.get("sample").is_none()
                && s.is_none_or(|s| r.params["s"] == s)
        })
    };
    let i = verdict("i", None).map(|r| r.verdict == Verdict::Pass).unwrap_or(false);
    let s2 = verdict("ii", Some(2.0));
    let ii = s2.map(|r| r.measured <= r.reference).unwrap_or(false);
    let detail = match s2 {
        Some(r) => format!("{}; (ii) s=2 holdout {:.4} <= {:.4}", summary(&t, took), r.measured, r.reference),
        None => summary(&t, took),
    };
    (!t.any_fail() && i && ii, detail)
}

fn weights() -> Outcome {
    let g = Grid::new(2, 64).unwrap();
    let family = BallFamily::dyadic(&g);
    let mut disagree = Vec::new();
    for theta in [-2.0, 0.0, 1.0, 1.9] {
        let w = Weight::power(g, theta, &[0.5, 0.5]).unwrap();
        for r in [1.5, 3.0] {
            let b = ap_blowup(&w, r, &family, BLOWUP_RATIO).unwrap();
            if power_weight_in_ar(theta, 2, r) == b.unbounded() {
                disagree.push(format!("θ={theta} A_{r}"));
            }
        }
        let b = rh_blowup(&w, 8.0, &family, BLOWUP_RATIO).unwrap();
        if power_weight_in_rh(theta, 2, 8.0) == b.unbounded() {
            disagree.push(format!("θ={theta} RH_8"));
        }
    }
    let whole = admissible_interval(0.0, f64::INFINITY, 3.0, 2.0).unwrap();
    let clipped = admissible_interval(1.0, 12.0, 1.0, 2.0).unwrap();
    let conventions = (whole.lo, whole.hi) == (0.0, f64::INFINITY)
        && (clipped.lo, clipped.hi) == (1.0, 6.0)
        && p_plus_kstar(3.0, 1, 10).unwrap() == 30.0
        && p_plus_kstar(3.0, 1, 9).unwrap() == f64::INFINITY;
    let ok = disagree.is_empty() && conventions;
    (ok, format!("membership disagreements [{}], conventions {}", disagree.join(", "), conventions))
}

fn whitney_masks() -> Outcome {
    let g1 = Grid::new(1, 16).unwrap();
    let g2 = Grid::new(2, 32).unwrap();
    let ball: Vec<usize> =
        (0..g2.len()).filter(|&i| conical_core::torus_distance(&g2.center(i)[..2], &[0.5, 0.5], &g2) < 0.25).collect();
    let l_shape: Vec<usize> = (0..g2.len())
        .filter(|&i| {
            let m = g2.multi_index(i);
            (m[0] < 20 && m[1] < 8) || (m[0] < 8 && m[1] < 20)
        })
        .collect();
    let mut failed = Vec::new();
    for (label, g, mask) in [("interval", g1, (0..8).collect()), ("ball", g2, ball), ("L", g2, l_shape)] {
        let cubes = whitney(&mask, &g).unwrap();
        let check = WhitneyCheck::run(&g, &mask, &cubes);
        if !check.passed() {
            failed.push(format!("{label}: {check:?}"));
        }
    }
    (failed.is_empty(), format!("3 masks, failures [{}]", failed.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("sharpness exponents", sharpness),
        ("semigroup exactness", semigroup),
        ("analytic t-derivatives", time_derivatives),
        ("off-diagonal decay", || lab("offdiag")),
        ("pointwise dominations", dominations),
        ("change of angles", angles),
        ("Carleson suite", || lab("carleson")),
        ("C_p0 against M_p0", || lab("cp-maximal")),
        ("boundedness", || lab("boundedness")),
        ("comparisons", || lab("comparisons")),
        ("weights", weights),
        ("Whitney properties", whitney_masks),
    ];
    let mut failures = 0;
    for (k, (label, check)) in criteria.iter().enumerate() {
        let (ok, detail) = check();
        failures += usize::from(!ok);
        println!("{} criterion {}: {label}: {detail}", if ok { "PASS" } else { "FAIL" }, k + 1);
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

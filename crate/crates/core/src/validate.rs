//! Randomized property suites for the mirror maps, the permutation and
//! index-set structure, and DPMD's routing and causality. Each suite returns
//! a [`CheckReport`] instead of panicking so the CLI can print a summary.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dpmd::{block_gradient_conditioning, BlockLayout, Dpmd, DpmdConfig, Predictor};
use crate::geometry::{
    mirror_step, step_gap_bound, DualPoint, EuclideanBox, GeometryBounds, MirrorMap, NegativeEntropy, Point,
};
use crate::losses::{LinearLoss, LossFunction};
use crate::rng::{substream, Component};
use crate::scheduling::{block_permutation_with, validate_window, TailPolicy};

pub const STEP_GAP_SLACK: f64 = 1e-12;
pub const PYTHAGOREAN_SLACK: f64 = 1e-10;
pub const PROJECTION_SLACK: f64 = 1e-12;
pub const CONJUGACY_TOLERANCE: f64 = 1e-10;
pub const NONNEGATIVITY_SLACK: f64 = 1e-12;
pub const GRADIENT_EQUALITY_TOLERANCE: f64 = 1e-12;

/// Outcome of one suite.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub name: &'static str,
    pub cases: usize,
    /// Largest violation margin seen (`<= 0` means every case held with room
    /// to spare), or the largest error for equality checks.
    pub worst: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckReport {
    fn from_worst(name: &'static str, cases: usize, worst: f64, allowed: f64) -> Self {
        let passed = worst <= allowed;
        Self {
            name,
            cases,
            worst,
            passed,
            detail: format!("worst {worst:.3e}, allowed {allowed:.1e}"),
        }
    }

    fn from_failures(name: &'static str, cases: usize, failures: Vec<String>) -> Self {
        let passed = failures.is_empty();
        let detail = match failures.first() {
            None => "all cases hold".to_string(),
            Some(first) => format!("{} failing, first: {first}", failures.len()),
        };
        Self {
            name,
            cases,
            worst: failures.len() as f64,
            passed,
            detail,
        }
    }
}

fn uniform_point(rng: &mut ChaCha8Rng, dim: usize, lo: f64, hi: f64) -> Point {
    let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..=hi)).collect();
    Point::new(&v)
}

/// Interior simplex point with a spread of magnitudes.
fn simplex_point(rng: &mut ChaCha8Rng, dim: usize) -> Point {
    let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-4.0f64..4.0).exp()).collect();
    let s: f64 = raw.iter().sum();
    Point::new(&raw.iter().map(|v| v / s).collect::<Vec<_>>())
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `|mirror_step(w, g, eta) - w|_2 <= eta G` on boxes, `|g|_2 <= G`.
pub fn step_gap_euclidean(draws: usize, seed: u64) -> CheckReport {
    let mut rng = substream(seed, Component::Validation, 1);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..draws {
        let dim = rng.gen_range(1..=4);
        let map = EuclideanBox::new(-1.0, 1.0, dim).expect("valid box");
        let w = uniform_point(&mut rng, dim, -1.0, 1.0);
        let big_g = rng.gen_range(0.01..5.0);
        let dir: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scale = rng.gen_range(0.0..=1.0) * big_g / l2(&dir).max(1e-300);
        let g = DualPoint::new(&dir.iter().map(|d| d * scale).collect::<Vec<_>>());
        let eta = rng.gen_range(1e-4..2.0);
        let next = mirror_step(&map, &w, &g, eta).expect("valid step");
        let bound = step_gap_bound(&map, eta, big_g).expect("valid bound");
        worst = worst.max(l2(&next.sub(&w)) - bound);
    }
    CheckReport::from_worst("step_gap_euclidean", draws, worst, STEP_GAP_SLACK)
}

/// `|mirror_step(w, g, eta) - w|_1 <= 3 eta G` on simplices, `|g|_inf <= G`,
/// `eta < 1/(sqrt 2 G)`.
pub fn step_gap_entropy(draws: usize, seed: u64) -> CheckReport {
    let mut rng = substream(seed, Component::Validation, 2);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..draws {
        let dim = rng.gen_range(2..=6);
        let map = NegativeEntropy::new(dim).expect("dim >= 2");
        let w = simplex_point(&mut rng, dim);
        let big_g = rng.gen_range(0.01..5.0);
        let g: Vec<f64> = (0..dim).map(|_| rng.gen_range(-big_g..=big_g)).collect();
        let limit = map.step_gap_eta_limit(big_g).expect("entropy has a limit");
        let eta = rng.gen_range(0.0..1.0) * limit;
        if eta <= 0.0 {
            continue;
        }
        let next = mirror_step(&map, &w, &DualPoint::new(&g), eta).expect("valid step");
        let bound = step_gap_bound(&map, eta, big_g).expect("eta below the limit");
        let gap: f64 = next.sub(&w).iter().map(|d| d.abs()).sum();
        worst = worst.max(gap - bound);
    }
    CheckReport::from_worst("step_gap_entropy", draws, worst, STEP_GAP_SLACK)
}

/// `D(u, w) >= D(u, v) + D(v, w)` for `v` the Bregman projection of `w`,
/// on both maps.
pub fn pythagorean(draws: usize, seed: u64) -> CheckReport {
    let mut rng = substream(seed, Component::Validation, 3);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..draws {
        let dim = rng.gen_range(2..=5);
        let margin = if i % 2 == 0 {
            let map = EuclideanBox::new(-1.0, 1.0, dim).expect("valid box");
            let w = uniform_point(&mut rng, dim, -3.0, 3.0);
            let v = map.project(w.clone());
            let u = uniform_point(&mut rng, dim, -1.0, 1.0);
            map.divergence(&u, &v) + map.divergence(&v, &w) - map.divergence(&u, &w)
        } else {
            let map = NegativeEntropy::new(dim).expect("dim >= 2");
            let raw: Vec<f64> = (0..dim).map(|_| rng.gen_range(-3.0f64..3.0).exp()).collect();
            let w = Point::new(&raw);
            let v = map.project(w.clone());
            let u = simplex_point(&mut rng, dim);
            map.divergence(&u, &v) + map.divergence(&v, &w) - map.divergence(&u, &w)
        };
        worst = worst.max(margin);
    }
    CheckReport::from_worst("pythagorean", draws, worst, PYTHAGOREAN_SLACK)
}

/// Euclidean projection onto a box never increases the distance to a point
/// of the box.
pub fn projection_lemma(draws: usize, seed: u64) -> CheckReport {
    let mut rng = substream(seed, Component::Validation, 4);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..draws {
        let dim = rng.gen_range(1..=5);
        let map = EuclideanBox::new(-1.0, 1.0, dim).expect("valid box");
        let w = uniform_point(&mut rng, dim, -4.0, 4.0);
        let v = map.project(w.clone());
        let u = uniform_point(&mut rng, dim, -1.0, 1.0);
        let far = l2(&w.sub(&u)).powi(2);
        let near = l2(&v.sub(&u)).powi(2);
        worst = worst.max(near - far);
    }
    CheckReport::from_worst("projection_lemma", draws, worst, PROJECTION_SLACK)
}

/// `grad_conjugate(grad_potential(x)) = x` on interior points.
pub fn conjugacy(draws: usize, seed: u64) -> CheckReport {
    let mut rng = substream(seed, Component::Validation, 5);
    let mut worst = 0.0f64;
    for i in 0..draws {
        let dim = rng.gen_range(2..=6);
        let (x, back) = if i % 2 == 0 {
            let map = EuclideanBox::new(-1.0, 1.0, dim).expect("valid box");
            let x = uniform_point(&mut rng, dim, -1.0, 1.0);
            let back = map.grad_conjugate(&map.grad_potential(&x));
            (x, back)
        } else {
            let map = NegativeEntropy::new(dim).expect("dim >= 2");
            let x = simplex_point(&mut rng, dim);
            let back = map.grad_conjugate(&map.grad_potential(&x));
            (x, back)
        };
        let err = x.sub(&back).iter().fold(0.0f64, |m, d| m.max(d.abs()));
        worst = worst.max(err);
    }
    CheckReport::from_worst("conjugacy", draws, worst, CONJUGACY_TOLERANCE)
}

/// `D(x, y) >= 0` on random domain pairs for both maps.
pub fn divergence_nonnegative(draws: usize, seed: u64) -> CheckReport {
    let mut rng = substream(seed, Component::Validation, 6);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..draws {
        let dim = rng.gen_range(2..=5);
        let d = if i % 2 == 0 {
            let map = EuclideanBox::new(-1.0, 1.0, dim).expect("valid box");
            let x = uniform_point(&mut rng, dim, -1.0, 1.0);
            let y = uniform_point(&mut rng, dim, -1.0, 1.0);
            map.divergence(&x, &y)
        } else {
            let map = NegativeEntropy::new(dim).expect("dim >= 2");
            map.divergence(&simplex_point(&mut rng, dim), &simplex_point(&mut rng, dim))
        };
        worst = worst.max(-d);
    }
    CheckReport::from_worst("divergence_nonnegative", draws, worst, NONNEGATIVITY_SLACK)
}

/// The four linear losses used by [`expected_gradient_equality`].
pub fn distinct_block_losses() -> Vec<LinearLoss> {
    [0.37, -1.25, 0.81, 2.5]
        .iter()
        .map(|&a| LinearLoss::new(DualPoint::scalar(a), 2.5).expect("finite"))
        .collect()
}

/// For a block of 4 distinct linear losses and `tau = 1, 2, 3`: over all 24
/// orderings, conditioned on every prefix the learner could have observed,
/// the mean gradient of the current loss equals that of the loss `tau`
/// positions later.
pub fn expected_gradient_equality() -> CheckReport {
    let losses = distinct_block_losses();
    let w = Point::scalar(0.2);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut structure_ok = true;
    for tau in 1..=3 {
        let groups = block_gradient_conditioning(&losses, tau, &w).expect("valid block");
        for j in 0..4 - tau {
            let total: usize = groups.iter().filter(|g| g.update == j).map(|g| g.orderings).sum();
            structure_ok &= total == 24;
        }
        for g in &groups {
            cases += 1;
            worst = worst.max(g.max_gap());
        }
    }
    let mut report =
        CheckReport::from_worst("expected_gradient_equality", cases, worst, GRADIENT_EQUALITY_TOLERANCE);
    if !structure_ok {
        report.passed = false;
        report.detail = "conditioning groups do not partition the 24 orderings".into();
    }
    report
}

/// Seeded block permutations are bijections that keep every round inside
/// its window.
pub fn permutation_structure(plans: usize, seed: u64) -> CheckReport {
    let mut rng = substream(seed, Component::Validation, 7);
    let mut failures = Vec::new();
    for i in 0..plans {
        let horizon = rng.gen_range(1..=2000);
        let window = rng.gen_range(1..=horizon);
        let plan = match block_permutation_with(horizon, window, rng.gen(), TailPolicy::ShortFinalBlock) {
            Ok(p) => p,
            Err(e) => {
                failures.push(format!("plan {i}: {e}"));
                continue;
            }
        };
        let images = plan.forward_images();
        let mut seen = vec![false; horizon + 1];
        let bijective = images.len() == horizon
            && images.iter().all(|&s| (1..=horizon).contains(&s) && !std::mem::replace(&mut seen[s], true));
        let in_block = (1..=horizon).all(|t| (plan.sigma(t) - 1) / window == (t - 1) / window);
        if !(bijective && in_block && validate_window(&plan, window) && plan.max_displacement() < window.max(1)) {
            failures.push(format!("plan {i}: T = {horizon}, M = {window}"));
        }
    }
    CheckReport::from_failures("permutation_structure", plans, failures)
}

/// `|T1| = (T/M) tau`, `|T2| = (T/M)(M - tau)` and membership by block
/// position, over a grid of shapes.
pub fn index_cardinalities() -> CheckReport {
    let mut failures = Vec::new();
    let mut cases = 0;
    for &(horizon, tau) in &[(10_000usize, 1usize), (10_000, 20), (100_000, 200), (600, 7)] {
        for block in (tau + 1..=horizon).filter(|m| horizon % m == 0).take(12) {
            cases += 1;
            let layout = BlockLayout::new(horizon, block, tau, TailPolicy::Reject).expect("valid");
            let sets = layout.index_sets();
            let k = horizon / block;
            let membership = sets.t1.iter().all(|&t| (t - 1) % block < tau)
                && sets.t2.iter().all(|&t| (t - 1) % block < block - tau);
            if sets.t1.len() != k * tau || sets.t2.len() != k * (block - tau) || !membership {
                failures.push(format!("T = {horizon}, M = {block}, tau = {tau}"));
            }
        }
    }
    CheckReport::from_failures("index_cardinalities", cases, failures)
}

fn dpmd_replay(losses: &[LinearLoss], block: usize, tau: usize) -> Vec<(Point, Predictor)> {
    let horizon = losses.len();
    let map = EuclideanBox::unit_interval();
    let bounds = GeometryBounds::new(2.0, 1.0).expect("positive");
    let cfg = DpmdConfig::with_default_steps(&map, bounds, horizon, block, tau, 0).expect("valid");
    let mut alg: Dpmd<EuclideanBox, LinearLoss> = Dpmd::new(map, cfg).expect("valid");
    (1..=horizon)
        .map(|t| {
            let released = (t > tau).then(|| losses[t - tau - 1].clone());
            let p = alg.round(released).expect("consistent feed");
            (p.point, p.predictor)
        })
        .collect()
}

/// On a `T = 10^4` run: rounds at block position `< tau` predict with `w_f`
/// and the rest with `w_s`; the update counters match `|T1|` and `|T2|`; and
/// changing the loss of round `s` leaves every prediction up to round
/// `s + tau` unchanged.
pub fn routing_and_causality(seed: u64) -> CheckReport {
    let (horizon, block, tau) = (10_000usize, 100usize, 20usize);
    let mut rng = substream(seed, Component::Validation, 8);
    let losses: Vec<LinearLoss> = (0..horizon)
        .map(|_| LinearLoss::new(DualPoint::scalar(rng.gen_range(-1.0..=1.0)), 1.0).expect("finite"))
        .collect();
    let mut failures = Vec::new();

    let map = EuclideanBox::unit_interval();
    let bounds = GeometryBounds::new(2.0, 1.0).expect("positive");
    let cfg = DpmdConfig::with_default_steps(&map, bounds, horizon, block, tau, 0).expect("valid");
    let mut alg: Dpmd<EuclideanBox, LinearLoss> = Dpmd::new(map, cfg).expect("valid");
    for t in 1..=horizon {
        let released = (t > tau).then(|| losses[t - tau - 1].clone());
        match alg.round(released) {
            Ok(p) => {
                let expected = if (t - 1) % block < tau { Predictor::First } else { Predictor::Second };
                if p.predictor != expected {
                    failures.push(format!("round {t} routed to {:?}", p.predictor));
                }
            }
            Err(e) => failures.push(format!("round {t}: {e}")),
        }
    }
    let k = horizon / block;
    let st = alg.state();
    if st.j_first - 1 != k * tau {
        failures.push(format!("w_f played {} rounds, expected {}", st.j_first - 1, k * tau));
    }
    if st.j_second - 1 != k * (block - tau) {
        failures.push(format!("w_s updated {} times, expected {}", st.j_second - 1, k * (block - tau)));
    }

    let base = dpmd_replay(&losses, block, tau);
    let mut flips = 0;
    for _ in 0..20 {
        let s = rng.gen_range(1..=horizon);
        let mut changed = losses.clone();
        let a = changed[s - 1].gradient(&Point::scalar(0.0))[0];
        changed[s - 1] = LinearLoss::new(DualPoint::scalar(if a > 0.0 { -1.0 } else { 1.0 }), 1.0).expect("finite");
        let alt = dpmd_replay(&changed, block, tau);
        let last_safe = (s + tau).min(horizon);
        if let Some(t) = (1..=last_safe).find(|&t| base[t - 1] != alt[t - 1]) {
            failures.push(format!("changing round {s} altered the prediction at round {t}"));
        }
        flips += 1;
    }
    CheckReport::from_failures("routing_and_causality", horizon + flips, failures)
}

/// Criterion-style grouping of the suites.
pub fn lemma_suites(draws: usize, seed: u64) -> Vec<CheckReport> {
    vec![
        step_gap_euclidean(draws, seed),
        step_gap_entropy(draws, seed),
        pythagorean(draws, seed),
        projection_lemma(draws, seed),
        conjugacy(draws, seed),
        divergence_nonnegative(draws, seed),
    ]
}

pub fn structural_suites(plans: usize, seed: u64) -> Vec<CheckReport> {
    vec![
        permutation_structure(plans, seed),
        index_cardinalities(),
        routing_and_causality(seed),
    ]
}

/// Everything, at the default sizes.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    let mut out = lemma_suites(10_000, seed);
    out.push(expected_gradient_equality());
    out.extend(structural_suites(1000, seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_suite_passes_at_small_size() {
        for r in lemma_suites(500, 11) {
            assert!(r.passed, "{r:?}");
        }
        assert!(expected_gradient_equality().passed);
        for r in structural_suites(100, 11) {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn gradient_equality_has_expected_group_count() {
        // tau = 1: j in 0..3, prefixes of length j -> 1 + 4 + 12 groups;
        // tau = 2: 1 + 4; tau = 3: 1.
        let r = expected_gradient_equality();
        assert_eq!(r.cases, 17 + 5 + 1);
    }

    #[test]
    fn reports_flag_violations() {
        let r = CheckReport::from_worst("x", 1, 1e-9, 1e-12);
        assert!(!r.passed);
        let r = CheckReport::from_failures("y", 3, vec!["bad".into()]);
        assert!(!r.passed);
        assert!(r.detail.contains("bad"));
    }
}

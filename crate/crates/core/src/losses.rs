//! Convex losses with value and gradient oracles, loss sequences, and the
//! best fixed point in hindsight.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::{Domain, DualPoint, Point};

/// A convex loss `h(w)` with a certified dual-norm gradient bound.
///
/// Losses are immutable values; sequences are permuted and replayed by
/// moving copies around.
pub trait LossFunction: Clone + fmt::Debug + Send + Sync {
    fn value(&self, w: &Point) -> f64;
    fn gradient(&self, w: &Point) -> DualPoint;
    fn grad_bound(&self) -> f64;
}

/// `h(w) = alpha * w` on `[-1, 1]` with `alpha` in `{-1, +1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearSignLoss {
    alpha: f64,
}

impl LinearSignLoss {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha == 1.0 || alpha == -1.0 {
            Ok(Self { alpha })
        } else {
            Err(Error::InvalidParameter(format!(
                "sign loss coefficient must be +1 or -1, got {alpha}"
            )))
        }
    }

    pub fn plus() -> Self {
        Self { alpha: 1.0 }
    }

    pub fn minus() -> Self {
        Self { alpha: -1.0 }
    }

    pub fn from_sign(positive: bool) -> Self {
        if positive {
            Self::plus()
        } else {
            Self::minus()
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl LossFunction for LinearSignLoss {
    fn value(&self, w: &Point) -> f64 {
        self.alpha * w[0]
    }

    fn gradient(&self, _w: &Point) -> DualPoint {
        DualPoint::scalar(self.alpha)
    }

    fn grad_bound(&self) -> f64 {
        1.0
    }
}

/// `h(w) = <c, w>`. The gradient bound is reported in the dual norm the
/// caller asks for at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearLoss {
    coeffs: DualPoint,
    grad_bound: f64,
}

impl LinearLoss {
    pub fn new(coeffs: DualPoint, grad_bound: f64) -> Result<Self> {
        if !coeffs.is_finite() {
            return Err(Error::NonFinite("linear loss coefficients"));
        }
        if grad_bound.is_nan() || grad_bound < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gradient bound must be nonnegative, got {grad_bound}"
            )));
        }
        Ok(Self { coeffs, grad_bound })
    }

    pub fn coeffs(&self) -> &DualPoint {
        &self.coeffs
    }
}

impl LossFunction for LinearLoss {
    fn value(&self, w: &Point) -> f64 {
        self.coeffs.dot(w)
    }

    fn gradient(&self, _w: &Point) -> DualPoint {
        self.coeffs.clone()
    }

    fn grad_bound(&self) -> f64 {
        self.grad_bound
    }
}

/// `h(w) = curvature/2 * |w - center|_2^2`, used to exercise the generic
/// hindsight path.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticLoss {
    center: Point,
    curvature: f64,
    grad_bound: f64,
}

impl QuadraticLoss {
    /// `grad_bound` must dominate `curvature * |w - center|` over the domain
    /// the loss is used on; [`QuadraticLoss::on_domain`] computes it for a box.
    pub fn new(center: Point, curvature: f64, grad_bound: f64) -> Result<Self> {
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "curvature must be positive, got {curvature}"
            )));
        }
        Ok(Self {
            center,
            curvature,
            grad_bound,
        })
    }

    pub fn on_domain(center: Point, curvature: f64, domain: &Domain) -> Result<Self> {
        let reach: f64 = match *domain {
            Domain::Box { lo, hi, .. } => center
                .coords()
                .iter()
                .map(|&c| (c - lo).abs().max((hi - c).abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
            Domain::Simplex { .. } => center
                .coords()
                .iter()
                .map(|&c| c.abs().max((1.0 - c).abs()).powi(2))
                .sum::<f64>()
                .sqrt(),
        };
        Self::new(center, curvature, curvature * reach)
    }
}

impl LossFunction for QuadraticLoss {
    fn value(&self, w: &Point) -> f64 {
        0.5 * self.curvature * w.sub(&self.center).iter().map(|d| d * d).sum::<f64>()
    }

    fn gradient(&self, w: &Point) -> DualPoint {
        w.sub(&self.center)
            .iter()
            .map(|d| self.curvature * d)
            .collect::<crate::geometry::Coords>()
            .into()
    }

    fn grad_bound(&self) -> f64 {
        self.grad_bound
    }
}

/// The adversary's losses `h_1, ..., h_T` in presentation order.
#[derive(Clone, Debug, PartialEq)]
pub struct LossSequence<L> {
    losses: Vec<L>,
}

impl<L: LossFunction> LossSequence<L> {
    pub fn new(losses: Vec<L>) -> Result<Self> {
        if losses.is_empty() {
            return Err(Error::InvalidParameter("loss sequence must be nonempty".into()));
        }
        Ok(Self { losses })
    }

    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }

    /// Loss of round `t`, 1-based.
    pub fn round(&self, t: usize) -> &L {
        &self.losses[t - 1]
    }

    pub fn as_slice(&self) -> &[L] {
        &self.losses
    }

    pub fn iter(&self) -> std::slice::Iter<'_, L> {
        self.losses.iter()
    }

    pub fn into_vec(self) -> Vec<L> {
        self.losses
    }

    /// `sum_t h_t(w)` for a fixed comparator.
    pub fn total_at(&self, w: &Point) -> f64 {
        self.losses.iter().map(|l| l.value(w)).sum()
    }
}

impl LossSequence<LinearSignLoss> {
    pub fn from_alphas(alphas: &[f64]) -> Result<Self> {
        let losses = alphas
            .iter()
            .map(|&a| LinearSignLoss::new(a))
            .collect::<Result<Vec<_>>>()?;
        Self::new(losses)
    }

    /// `sum_t alpha_t`, exact for horizons below 2^53.
    pub fn alpha_sum(&self) -> f64 {
        self.losses.iter().map(|l| l.alpha).sum()
    }
}

/// Best fixed point in hindsight and its cumulative loss.
#[derive(Clone, Debug, PartialEq)]
pub struct Hindsight {
    pub point: Point,
    pub total: f64,
}

/// `sum_t h_t(w_t)` over a trace of predictions.
pub fn eval_cumulative<L: LossFunction>(seq: &LossSequence<L>, trace: &[Point]) -> Result<f64> {
    if trace.len() != seq.len() {
        return Err(Error::LengthMismatch {
            expected: seq.len(),
            got: trace.len(),
        });
    }
    Ok(seq.iter().zip(trace).map(|(l, w)| l.value(w)).sum())
}

/// Closed-form hindsight optimum for sign losses on `[-1, 1]`:
/// `w* = -sign(sum alpha)`, and `w* = 0` when the sum vanishes.
pub fn hindsight_optimum(seq: &LossSequence<LinearSignLoss>) -> Hindsight {
    let s = seq.alpha_sum();
    let w = if s > 0.0 {
        -1.0
    } else if s < 0.0 {
        1.0
    } else {
        0.0
    };
    Hindsight {
        point: Point::scalar(w),
        total: -s.abs(),
    }
}

/// Default grid spacing for [`grid_hindsight`].
pub const DEFAULT_GRID_RESOLUTION: f64 = 1e-3;

/// Brute-force hindsight optimum over a uniform grid of the domain. Boxes of
/// dimension 1 or 2 and simplices of dimension at most 3 are supported.
pub fn grid_hindsight<L: LossFunction>(
    seq: &LossSequence<L>,
    domain: &Domain,
    resolution: f64,
) -> Result<Hindsight> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "grid resolution must be positive, got {resolution}"
        )));
    }
    let mut best: Option<Hindsight> = None;
    let mut consider = |p: Point| {
        let total = seq.total_at(&p);
        if best.as_ref().is_none_or(|b| total < b.total) {
            best = Some(Hindsight { point: p, total });
        }
    };
    match *domain {
        Domain::Box { lo, hi, dim } if dim <= 2 => {
            let steps = ((hi - lo) / resolution).round() as usize;
            let at = |i: usize| (lo + (hi - lo) * i as f64 / steps as f64).clamp(lo, hi);
            if dim == 1 {
                for i in 0..=steps {
                    consider(Point::scalar(at(i)));
                }
            } else {
                for i in 0..=steps {
                    for j in 0..=steps {
                        consider(Point::new(&[at(i), at(j)]));
                    }
                }
            }
        }
        Domain::Simplex { dim } if dim <= 3 => {
            let steps = (1.0 / resolution).round() as usize;
            let n = steps as f64;
            if dim == 2 {
                for i in 0..=steps {
                    let a = i as f64 / n;
                    consider(Point::new(&[a, 1.0 - a]));
                }
            } else {
                for i in 0..=steps {
                    for j in 0..=(steps - i) {
                        let (a, b) = (i as f64 / n, j as f64 / n);
                        consider(Point::new(&[a, b, (1.0 - a - b).max(0.0)]));
                    }
                }
            }
        }
        _ => {
            return Err(Error::Unsupported(format!(
                "grid search is not supported on {domain}"
            )))
        }
    }
    Ok(best.expect("grid has at least one point"))
}

/// Regret of `trace` against the closed-form hindsight optimum.
pub fn regret(seq: &LossSequence<LinearSignLoss>, trace: &[Point]) -> Result<f64> {
    Ok(eval_cumulative(seq, trace)? - hindsight_optimum(seq).total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Component};
    use proptest::prelude::*;
    use rand::Rng;

    fn seq(alphas: &[f64]) -> LossSequence<LinearSignLoss> {
        LossSequence::from_alphas(alphas).unwrap()
    }

    fn constant_trace(w: f64, n: usize) -> Vec<Point> {
        vec![Point::scalar(w); n]
    }

    fn unit_box() -> Domain {
        Domain::Box {
            lo: -1.0,
            hi: 1.0,
            dim: 1,
        }
    }

    #[test]
    fn zero_losses_sum_to_zero() {
        let s = LossSequence::new(vec![
            LinearLoss::new(DualPoint::scalar(0.0), 0.0).unwrap();
            5
        ])
        .unwrap();
        let trace: Vec<Point> = (0..5).map(|i| Point::scalar(i as f64 / 5.0)).collect();
        assert_eq!(eval_cumulative(&s, &trace).unwrap(), 0.0);
    }

    #[test]
    fn cumulative_of_alternating_signs() {
        assert_eq!(
            eval_cumulative(&seq(&[1.0, -1.0, 1.0]), &constant_trace(1.0, 3)).unwrap(),
            1.0
        );
    }

    #[test]
    fn linear_losses_vanish_at_origin() {
        let mut rng = substream(3, Component::Validation, 0);
        let alphas: Vec<f64> = (0..100)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        assert_eq!(eval_cumulative(&seq(&alphas), &constant_trace(0.0, 100)).unwrap(), 0.0);
    }

    #[test]
    fn cumulative_rejects_length_mismatch() {
        let r = eval_cumulative(&seq(&[1.0, 1.0]), &constant_trace(0.0, 3));
        assert!(matches!(r, Err(Error::LengthMismatch { expected: 2, got: 3 })));
    }

    #[test]
    fn hindsight_closed_form() {
        let h = hindsight_optimum(&seq(&[1.0, 1.0, -1.0]));
        assert_eq!(h.point, Point::scalar(-1.0));
        assert_eq!(h.total, -1.0);
        let tie = hindsight_optimum(&seq(&[1.0, -1.0]));
        assert_eq!(tie.point, Point::scalar(0.0));
        assert_eq!(tie.total, 0.0);
    }

    #[test]
    fn regret_examples() {
        let s = seq(&[1.0, 1.0]);
        assert_eq!(regret(&s, &constant_trace(0.0, 2)).unwrap(), 2.0);
        let w = hindsight_optimum(&s).point;
        assert_eq!(regret(&s, &[w.clone(), w]).unwrap(), 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(LinearSignLoss::new(0.5).is_err());
        assert!(LossSequence::<LinearSignLoss>::new(vec![]).is_err());
        assert!(grid_hindsight(&seq(&[1.0]), &unit_box(), 0.0).is_err());
        let big = Domain::Box { lo: -1.0, hi: 1.0, dim: 3 };
        assert!(matches!(
            grid_hindsight(&seq(&[1.0]), &big, 0.1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn block_sequence_closed_form_matches_grid() {
        // 1000 blocks of 7 identical signs.
        let mut rng = substream(11, Component::Validation, 1);
        let mut alphas = Vec::new();
        for _ in 0..1000 {
            let a = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            alphas.extend(std::iter::repeat_n(a, 7));
        }
        let s = seq(&alphas);
        let closed = hindsight_optimum(&s);
        let grid = grid_hindsight(&s, &unit_box(), DEFAULT_GRID_RESOLUTION).unwrap();
        assert!((closed.total - grid.total).abs() <= 1e-9);
        if closed.total != 0.0 {
            assert!((closed.point[0] - grid.point[0]).abs() <= DEFAULT_GRID_RESOLUTION);
        }
    }

    #[test]
    fn simplex_grid_finds_vertex_of_linear_loss() {
        let l = LinearLoss::new(DualPoint::new(&[0.3, -0.2, 0.5]), 0.5).unwrap();
        let s = LossSequence::new(vec![l; 4]).unwrap();
        let h = grid_hindsight(&s, &Domain::Simplex { dim: 3 }, 0.01).unwrap();
        assert!((h.point[1] - 1.0).abs() < 1e-12);
        assert!((h.total + 0.8).abs() < 1e-12);
    }

    #[test]
    fn quadratic_grid_optimum_is_mean_of_centers() {
        let d = unit_box();
        let losses = [0.1, 0.4, -0.2]
            .iter()
            .map(|&c| QuadraticLoss::on_domain(Point::scalar(c), 2.0, &d).unwrap())
            .collect();
        let s = LossSequence::new(losses).unwrap();
        let h = grid_hindsight(&s, &d, 1e-3).unwrap();
        assert!((h.point[0] - 0.1).abs() <= 1e-3);
    }

    proptest! {
        #[test]
        fn closed_form_agrees_with_grid(alphas in prop::collection::vec(prop::bool::ANY, 1..200)) {
            let a: Vec<f64> = alphas.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect();
            let s = seq(&a);
            let closed = hindsight_optimum(&s);
            let grid = grid_hindsight(&s, &unit_box(), DEFAULT_GRID_RESOLUTION).unwrap();
            // One grid cell of objective value.
            prop_assert!((closed.total - grid.total).abs() <= a.len() as f64 * DEFAULT_GRID_RESOLUTION);
            let w = closed.point.clone();
            prop_assert_eq!(regret(&s, &vec![w; a.len()]).unwrap(), 0.0);
        }

        #[test]
        fn quadratic_gradient_matches_central_differences(
            c in prop::collection::vec(-1.0f64..1.0, 2),
            w in prop::collection::vec(-0.9f64..0.9, 2),
            k in 0.1f64..5.0,
        ) {
            let d = Domain::Box { lo: -1.0, hi: 1.0, dim: 2 };
            let l = QuadraticLoss::on_domain(Point::from(c), k, &d).unwrap();
            let w = Point::from(w);
            let g = l.gradient(&w);
            prop_assert!(crate::geometry::NormKind::L2.dual_norm(g.coords()) <= l.grad_bound() + 1e-12);
            let h = 1e-6;
            for i in 0..2 {
                let mut up = w.clone();
                up.coords_mut()[i] += h;
                let mut down = w.clone();
                down.coords_mut()[i] -= h;
                let fd = (l.value(&up) - l.value(&down)) / (2.0 * h);
                let scale = g[i].abs().max(1e-3);
                prop_assert!((fd - g[i]).abs() / scale <= 1e-5);
            }
        }
    }
}

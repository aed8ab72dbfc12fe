//! Mirror-map geometry: potentials, Bregman divergences, the dual-space
//! gradient step followed by a Bregman projection, and the per-map bound on
//! the distance between consecutive iterates.
//!
//! Two maps are provided:
//!
//! * [`EuclideanBox`]: `psi(x) = 1/2 |x|_2^2` over a box `[lo, hi]^n`. The
//!   mirror step is projected gradient descent and the projection is a
//!   coordinate-wise clamp.
//! * [`NegativeEntropy`]: `psi(x) = sum x_i ln x_i` over the probability
//!   simplex. The mirror step is the multiplicative-weights update followed
//!   by normalization.

use std::fmt;

use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Inline storage for coordinates; the experiments are one- or
/// two-dimensional and never touch the heap on the hot path.
pub type Coords = SmallVec<[f64; 4]>;

/// Tolerance on the simplex sum constraint.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// A primal point `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Coords);

/// A dual-space vector: gradients and images of `grad psi`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPoint(Coords);

macro_rules! coord_vector {
    ($ty:ident) => {
        impl $ty {
            pub fn new(coords: &[f64]) -> Self {
                Self(Coords::from_slice(coords))
            }

            pub fn scalar(x: f64) -> Self {
                Self(smallvec::smallvec![x])
            }

            pub fn zeros(dim: usize) -> Self {
                Self(smallvec::smallvec![0.0; dim])
            }

            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn coords(&self) -> &[f64] {
                &self.0
            }

            pub fn coords_mut(&mut self) -> &mut [f64] {
                &mut self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }
        }

        impl From<Vec<f64>> for $ty {
            fn from(v: Vec<f64>) -> Self {
                Self(Coords::from_vec(v))
            }
        }

        impl From<Coords> for $ty {
            fn from(v: Coords) -> Self {
                Self(v)
            }
        }

        impl std::ops::Index<usize> for $ty {
            type Output = f64;
            fn index(&self, i: usize) -> &f64 {
                &self.0[i]
            }
        }
    };
}

coord_vector!(Point);
coord_vector!(DualPoint);

impl Point {
    /// `self - other` as a plain vector.
    pub fn sub(&self, other: &Point) -> Coords {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }
}

impl DualPoint {
    pub fn dot(&self, p: &Point) -> f64 {
        self.0.iter().zip(p.coords()).map(|(a, b)| a * b).sum()
    }
}

/// Norm with respect to which a mirror map is 1-strongly convex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L2,
    L1,
}

impl NormKind {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            NormKind::L1 => v.iter().map(|x| x.abs()).sum(),
        }
    }

    /// The dual norm, used to bound gradients.
    pub fn dual_norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::L2 => NormKind::L2.norm(v),
            NormKind::L1 => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
        }
    }
}

/// Feasible set of a mirror map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Box { lo: f64, hi: f64, dim: usize },
    Simplex { dim: usize },
}

impl Domain {
    pub fn dim(&self) -> usize {
        match *self {
            Domain::Box { dim, .. } | Domain::Simplex { dim } => dim,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        if p.dim() != self.dim() || !p.is_finite() {
            return false;
        }
        match *self {
            Domain::Box { lo, hi, .. } => p.coords().iter().all(|&x| lo <= x && x <= hi),
            Domain::Simplex { .. } => {
                p.coords().iter().all(|&x| x >= 0.0)
                    && (p.coords().iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOLERANCE
            }
        }
    }

    pub fn check(&self, p: &Point) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.dim(),
            });
        }
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::DomainViolation {
                point: p.coords().to_vec(),
                domain: self.to_string(),
            })
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Domain::Box { lo, hi, dim } => write!(f, "[{lo}, {hi}]^{dim}"),
            Domain::Simplex { dim } => write!(f, "simplex({dim})"),
        }
    }
}

/// Geometry contract used by mirror descent.
///
/// `potential`, `grad_potential`, `grad_conjugate` and `divergence` are the
/// raw maps on the potential's effective domain (all of `R^n` for the
/// Euclidean map, the positive orthant for negative entropy). They do no
/// validation; the free functions in this module do.
pub trait MirrorMap: fmt::Debug + Send + Sync {
    fn domain(&self) -> Domain;

    fn norm(&self) -> NormKind;

    /// `c` in `|w - w'| <= c * eta * G`, when a bound is known for this map.
    fn step_gap_constant(&self) -> Option<f64>;

    /// Largest admissible step for which the step-gap bound holds, if any.
    fn step_gap_eta_limit(&self, _grad_bound: f64) -> Option<f64> {
        None
    }

    fn potential(&self, x: &Point) -> f64;

    fn grad_potential(&self, x: &Point) -> DualPoint;

    fn grad_conjugate(&self, y: &DualPoint) -> Point;

    /// Bregman projection onto [`MirrorMap::domain`] of a point of the
    /// effective domain.
    fn project(&self, x: Point) -> Point;

    /// Whether `x` may be used as the second argument of the divergence.
    fn in_effective_domain(&self, x: &Point) -> bool;

    /// Starting iterate of mirror descent.
    fn initial_point(&self) -> Point;

    /// Upper bound on `divergence(u, initial_point())` over the domain.
    fn diameter_sq(&self) -> f64;

    fn divergence(&self, x: &Point, y: &Point) -> f64 {
        let gy = self.grad_potential(y);
        let diff = Point::from(x.sub(y));
        self.potential(x) - self.potential(y) - gy.dot(&diff)
    }

    /// `argmin_{w in W} D(w, grad_conjugate(grad_potential(w) - eta * g))`.
    fn unchecked_step(&self, w: &Point, g: &DualPoint, eta: f64) -> Point {
        let mut y = self.grad_potential(w);
        for (yi, gi) in y.coords_mut().iter_mut().zip(g.coords()) {
            *yi -= eta * gi;
        }
        self.project(self.grad_conjugate(&y))
    }
}

/// `psi(x) = 1/2 |x|^2` on `[lo, hi]^dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EuclideanBox {
    lo: f64,
    hi: f64,
    dim: usize,
}

impl EuclideanBox {
    pub fn new(lo: f64, hi: f64, dim: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!("empty box [{lo}, {hi}]")));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("box dimension must be >= 1".into()));
        }
        Ok(Self { lo, hi, dim })
    }

    /// The interval `[-1, 1]`.
    pub fn unit_interval() -> Self {
        Self {
            lo: -1.0,
            hi: 1.0,
            dim: 1,
        }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

impl MirrorMap for EuclideanBox {
    fn domain(&self) -> Domain {
        Domain::Box {
            lo: self.lo,
            hi: self.hi,
            dim: self.dim,
        }
    }

    fn norm(&self) -> NormKind {
        NormKind::L2
    }

    fn step_gap_constant(&self) -> Option<f64> {
        Some(1.0)
    }

    fn potential(&self, x: &Point) -> f64 {
        0.5 * x.coords().iter().map(|v| v * v).sum::<f64>()
    }

    fn grad_potential(&self, x: &Point) -> DualPoint {
        DualPoint::new(x.coords())
    }

    fn grad_conjugate(&self, y: &DualPoint) -> Point {
        Point::new(y.coords())
    }

    fn project(&self, mut x: Point) -> Point {
        for v in x.coords_mut() {
            *v = v.clamp(self.lo, self.hi);
        }
        x
    }

    fn in_effective_domain(&self, x: &Point) -> bool {
        x.is_finite()
    }

    fn initial_point(&self) -> Point {
        let start = if self.lo <= 0.0 && 0.0 <= self.hi {
            0.0
        } else {
            0.5 * (self.lo + self.hi)
        };
        Point::from(Coords::from_elem(start, self.dim))
    }

    fn diameter_sq(&self) -> f64 {
        0.5 * (self.hi - self.lo).powi(2) * self.dim as f64
    }

    fn divergence(&self, x: &Point, y: &Point) -> f64 {
        0.5 * x.sub(y).iter().map(|d| d * d).sum::<f64>()
    }

    fn unchecked_step(&self, w: &Point, g: &DualPoint, eta: f64) -> Point {
        let mut next = w.clone();
        for (v, gi) in next.coords_mut().iter_mut().zip(g.coords()) {
            *v = (*v - eta * gi).clamp(self.lo, self.hi);
        }
        next
    }
}

/// `psi(x) = sum x_i ln x_i` on the probability simplex of dimension `dim`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NegativeEntropy {
    dim: usize,
}

impl NegativeEntropy {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParameter(
                "simplex dimension must be >= 2".into(),
            ));
        }
        Ok(Self { dim })
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

impl MirrorMap for NegativeEntropy {
    fn domain(&self) -> Domain {
        Domain::Simplex { dim: self.dim }
    }

    fn norm(&self) -> NormKind {
        NormKind::L1
    }

    fn step_gap_constant(&self) -> Option<f64> {
        Some(3.0)
    }

    fn step_gap_eta_limit(&self, grad_bound: f64) -> Option<f64> {
        Some(1.0 / (std::f64::consts::SQRT_2 * grad_bound))
    }

    fn potential(&self, x: &Point) -> f64 {
        x.coords().iter().map(|&v| xlogx(v)).sum()
    }

    fn grad_potential(&self, x: &Point) -> DualPoint {
        x.coords().iter().map(|v| 1.0 + v.ln()).collect::<Coords>().into()
    }

    fn grad_conjugate(&self, y: &DualPoint) -> Point {
        y.coords().iter().map(|v| (v - 1.0).exp()).collect::<Coords>().into()
    }

    fn project(&self, mut x: Point) -> Point {
        let total: f64 = x.coords().iter().sum();
        for v in x.coords_mut() {
            *v /= total;
        }
        x
    }

    fn in_effective_domain(&self, x: &Point) -> bool {
        x.coords().iter().all(|&v| v > 0.0 && v.is_finite())
    }

    fn initial_point(&self) -> Point {
        Point::from(Coords::from_elem(1.0 / self.dim as f64, self.dim))
    }

    /// `sup_u KL(u || uniform) = ln n`.
    fn diameter_sq(&self) -> f64 {
        (self.dim as f64).ln()
    }

    // Same quantity as the defining formula, arranged to avoid cancellation.
    fn divergence(&self, x: &Point, y: &Point) -> f64 {
        x.coords()
            .iter()
            .zip(y.coords())
            .map(|(&a, &b)| {
                let lead = if a == 0.0 { 0.0 } else { a * (a / b).ln() };
                lead - a + b
            })
            .sum()
    }

    fn unchecked_step(&self, w: &Point, g: &DualPoint, eta: f64) -> Point {
        // Shift by the smallest gradient entry so every factor is <= 1.
        let shift = g.coords().iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let mut next = w.clone();
        for (v, gi) in next.coords_mut().iter_mut().zip(g.coords()) {
            *v *= (-eta * (gi - shift)).exp();
        }
        self.project(next)
    }
}

/// Runtime choice between the two maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Geometry {
    Euclidean(EuclideanBox),
    Entropy(NegativeEntropy),
}

impl Geometry {
    fn inner(&self) -> &dyn MirrorMap {
        match self {
            Geometry::Euclidean(m) => m,
            Geometry::Entropy(m) => m,
        }
    }
}

impl MirrorMap for Geometry {
    fn domain(&self) -> Domain {
        self.inner().domain()
    }
    fn norm(&self) -> NormKind {
        self.inner().norm()
    }
    fn step_gap_constant(&self) -> Option<f64> {
        self.inner().step_gap_constant()
    }
    fn step_gap_eta_limit(&self, grad_bound: f64) -> Option<f64> {
        self.inner().step_gap_eta_limit(grad_bound)
    }
    fn potential(&self, x: &Point) -> f64 {
        self.inner().potential(x)
    }
    fn grad_potential(&self, x: &Point) -> DualPoint {
        self.inner().grad_potential(x)
    }
    fn grad_conjugate(&self, y: &DualPoint) -> Point {
        self.inner().grad_conjugate(y)
    }
    fn project(&self, x: Point) -> Point {
        self.inner().project(x)
    }
    fn in_effective_domain(&self, x: &Point) -> bool {
        self.inner().in_effective_domain(x)
    }
    fn initial_point(&self) -> Point {
        self.inner().initial_point()
    }
    fn diameter_sq(&self) -> f64 {
        self.inner().diameter_sq()
    }
    fn divergence(&self, x: &Point, y: &Point) -> f64 {
        self.inner().divergence(x, y)
    }
    fn unchecked_step(&self, w: &Point, g: &DualPoint, eta: f64) -> Point {
        match self {
            Geometry::Euclidean(m) => m.unchecked_step(w, g, eta),
            Geometry::Entropy(m) => m.unchecked_step(w, g, eta),
        }
    }
}

/// Diameter `B^2` of the domain and dual-norm gradient bound `G`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeometryBounds {
    diameter_sq: f64,
    grad_bound: f64,
}

impl GeometryBounds {
    pub fn new(diameter_sq: f64, grad_bound: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(diameter_sq) || !ok(grad_bound) {
            return Err(Error::InvalidParameter(format!(
                "geometry bounds must be positive (B^2 = {diameter_sq}, G = {grad_bound})"
            )));
        }
        Ok(Self {
            diameter_sq,
            grad_bound,
        })
    }

    pub fn diameter_sq(&self) -> f64 {
        self.diameter_sq
    }

    /// `B`.
    pub fn diameter(&self) -> f64 {
        self.diameter_sq.sqrt()
    }

    pub fn grad_bound(&self) -> f64 {
        self.grad_bound
    }
}

/// `D_psi(x, y) = psi(x) - psi(y) - <grad psi(y), x - y>` for `x`, `y` in the
/// domain. The entropy map needs `y` strictly positive.
pub fn bregman_divergence<M: MirrorMap + ?Sized>(map: &M, x: &Point, y: &Point) -> Result<f64> {
    let domain = map.domain();
    domain.check(x)?;
    domain.check(y)?;
    if !map.in_effective_domain(y) {
        return Err(Error::DomainViolation {
            point: y.coords().to_vec(),
            domain: format!("interior of {domain} (log singularity)"),
        });
    }
    Ok(map.divergence(x, y))
}

/// One mirror-descent step from `w` along `g` with step size `eta`, followed
/// by the Bregman projection back onto the domain.
pub fn mirror_step<M: MirrorMap + ?Sized>(
    map: &M,
    w: &Point,
    g: &DualPoint,
    eta: f64,
) -> Result<Point> {
    let domain = map.domain();
    if g.dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: g.dim(),
        });
    }
    if !g.is_finite() {
        return Err(Error::NonFinite("gradient"));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be positive, got {eta}"
        )));
    }
    domain.check(w)?;
    let next = map.unchecked_step(w, g, eta);
    if !domain.contains(&next) {
        return Err(Error::Consistency(format!(
            "mirror step left the domain {domain}: {:?}",
            next.coords()
        )));
    }
    Ok(next)
}

/// `Psi(eta, G) = c * eta * G`, the bound on the distance between
/// consecutive iterates in the map's norm.
pub fn step_gap_bound<M: MirrorMap + ?Sized>(map: &M, eta: f64, grad_bound: f64) -> Result<f64> {
    if !(eta > 0.0 && grad_bound > 0.0 && eta.is_finite() && grad_bound.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "eta and G must be positive, got eta = {eta}, G = {grad_bound}"
        )));
    }
    let c = map.step_gap_constant().ok_or_else(|| {
        Error::Unsupported("no step-gap bound is known for this mirror map".into())
    })?;
    if let Some(limit) = map.step_gap_eta_limit(grad_bound) {
        if eta >= limit {
            return Err(Error::Precondition(format!(
                "step-gap bound needs eta < 1/(sqrt(2) G) = {limit}, got eta = {eta}"
            )));
        }
    }
    Ok(c * eta * grad_bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit() -> EuclideanBox {
        EuclideanBox::unit_interval()
    }

    fn ent(n: usize) -> NegativeEntropy {
        NegativeEntropy::new(n).unwrap()
    }

    #[test]
    fn euclidean_divergence_is_half_squared_distance() {
        let m = EuclideanBox::new(-1.0, 1.0, 2).unwrap();
        let d = bregman_divergence(&m, &Point::new(&[1.0, 0.0]), &Point::new(&[0.0, 0.0])).unwrap();
        assert_eq!(d, 0.5);
    }

    #[test]
    fn entropy_divergence_vanishes_on_diagonal() {
        let p = Point::new(&[0.5, 0.5]);
        assert_eq!(bregman_divergence(&ent(2), &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn entropy_divergence_matches_defining_formula() {
        // psi(x) - psi(y) - <grad psi(y), x - y>, evaluated term by term.
        let (x1, x2, y1, y2) = (0.5_f64, 0.5_f64, 0.25_f64, 0.75_f64);
        let psi = |a: f64, b: f64| a * a.ln() + b * b.ln();
        let expected = psi(x1, x2) - psi(y1, y2) - ((1.0 + y1.ln()) * (x1 - y1) + (1.0 + y2.ln()) * (x2 - y2));
        let got = bregman_divergence(&ent(2), &Point::new(&[x1, x2]), &Point::new(&[y1, y2])).unwrap();
        // On the simplex the linear terms cancel, leaving KL(x || y).
        let closed = 0.5 * (0.5_f64 / 0.25).ln() + 0.5 * (0.5_f64 / 0.75).ln();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - closed).abs() < 1e-15);
    }

    #[test]
    fn entropy_divergence_rejects_boundary_second_argument() {
        let r = bregman_divergence(&ent(2), &Point::new(&[0.5, 0.5]), &Point::new(&[1.0, 0.0]));
        assert!(matches!(r, Err(Error::DomainViolation { .. })));
    }

    #[test]
    fn divergence_rejects_points_outside_domain() {
        let r = bregman_divergence(&unit(), &Point::scalar(1.5), &Point::scalar(0.0));
        assert!(matches!(r, Err(Error::DomainViolation { .. })));
        let r = bregman_divergence(&ent(2), &Point::new(&[0.6, 0.6]), &Point::new(&[0.5, 0.5]));
        assert!(r.is_err());
    }

    #[test]
    fn euclidean_interior_step() {
        let w = mirror_step(&unit(), &Point::scalar(0.5), &DualPoint::scalar(1.0), 0.1).unwrap();
        assert!((w[0] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn euclidean_step_clamps_to_boundary() {
        let w = mirror_step(&unit(), &Point::scalar(1.0), &DualPoint::scalar(-1.0), 0.5).unwrap();
        assert_eq!(w[0], 1.0);
    }

    #[test]
    fn entropy_step_matches_hand_normalized_update() {
        // 0.5 e^{-ln 2} = 0.25 and 0.5, normalized by 0.75.
        let w = mirror_step(
            &ent(2),
            &Point::new(&[0.5, 0.5]),
            &DualPoint::new(&[1.0, 0.0]),
            std::f64::consts::LN_2,
        )
        .unwrap();
        assert!((w[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((w[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn entropy_step_through_dual_space_agrees_with_multiplicative_form() {
        let m = ent(3);
        let w = Point::new(&[0.2, 0.3, 0.5]);
        let g = DualPoint::new(&[0.4, -0.7, 0.1]);
        let direct = m.unchecked_step(&w, &g, 0.3);
        let mut y = m.grad_potential(&w);
        for (yi, gi) in y.coords_mut().iter_mut().zip(g.coords()) {
            *yi -= 0.3 * gi;
        }
        let via_dual = m.project(m.grad_conjugate(&y));
        for i in 0..3 {
            assert!((direct[i] - via_dual[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn step_rejects_non_finite_gradient() {
        let r = mirror_step(&unit(), &Point::scalar(0.0), &DualPoint::scalar(f64::NAN), 0.1);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn step_gap_bounds() {
        assert!((step_gap_bound(&unit(), 0.01, 2.0).unwrap() - 0.02).abs() < 1e-17);
        assert!((step_gap_bound(&ent(2), 0.1, 1.0).unwrap() - 0.3).abs() < 1e-16);
        assert!(matches!(
            step_gap_bound(&ent(2), 1.0, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn step_gap_constants() {
        assert_eq!(unit().step_gap_constant(), Some(1.0));
        assert_eq!(ent(4).step_gap_constant(), Some(3.0));
    }

    #[test]
    fn initial_points_are_feasible() {
        assert_eq!(unit().initial_point(), Point::scalar(0.0));
        let p = ent(4).initial_point();
        assert!(ent(4).domain().contains(&p));
        let shifted = EuclideanBox::new(1.0, 3.0, 2).unwrap();
        assert_eq!(shifted.initial_point(), Point::new(&[2.0, 2.0]));
    }

    #[test]
    fn unit_interval_diameter() {
        assert_eq!(unit().diameter_sq(), 2.0);
    }

    #[test]
    fn bounds_must_be_positive() {
        assert!(GeometryBounds::new(0.0, 1.0).is_err());
        assert!(GeometryBounds::new(2.0, -1.0).is_err());
        let b = GeometryBounds::new(2.0, 1.0).unwrap();
        assert!((b.diameter() - 2f64.sqrt()).abs() < 1e-15);
    }

    fn simplex_point(raw: Vec<f64>) -> Point {
        let s: f64 = raw.iter().sum();
        Point::from(raw.into_iter().map(|v| v / s).collect::<Vec<_>>())
    }

    proptest! {
        #[test]
        fn conjugacy_round_trip_entropy(raw in prop::collection::vec(0.01f64..1.0, 2..6)) {
            let m = ent(raw.len());
            let x = Point::from(raw);
            let back = m.grad_conjugate(&m.grad_potential(&x));
            for i in 0..x.dim() {
                prop_assert!((back[i] - x[i]).abs() <= 1e-10);
            }
        }

        #[test]
        fn entropy_divergence_nonnegative(a in prop::collection::vec(0.001f64..1.0, 3),
                                         b in prop::collection::vec(0.001f64..1.0, 3)) {
            let m = ent(3);
            let d = bregman_divergence(&m, &simplex_point(a), &simplex_point(b)).unwrap();
            prop_assert!(d >= -1e-12);
        }

        #[test]
        fn entropy_steps_stay_normalized(raw in prop::collection::vec(0.01f64..1.0, 2..5),
                                         steps in prop::collection::vec(-1.0f64..1.0, 1..50)) {
            let m = ent(raw.len());
            let mut w = simplex_point(raw);
            for (k, s) in steps.iter().enumerate() {
                let g: Vec<f64> = (0..w.dim()).map(|i| if i == k % w.dim() { *s } else { -s / 2.0 }).collect();
                w = mirror_step(&m, &w, &DualPoint::from(g), 0.5).unwrap();
                prop_assert!((w.coords().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }
}

//! Delayed Permuted Mirror Descent and the delayed online gradient descent
//! baseline.
//!
//! The horizon is cut into blocks of `M` rounds. In every block the first
//! `tau` rounds predict with `w_f` and the remaining `M - tau` rounds predict
//! with `w_s`:
//!
//! ```text
//! block position   0 .. tau-1        tau .. M-1
//! predictor        w_f               w_s
//! T1 (updates w_f) 0 .. tau-1
//! T2 (updates w_s) 0 .. M-tau-1
//! ```
//!
//! `w_f` is updated on its own rounds with the gradient of the T1 loss from
//! `tau` T1-steps back (same block position, previous block), evaluated at
//! the iterate that predicted on it. `w_s` is updated on its own rounds with
//! the loss released this round (from exactly `tau` rounds back, which is
//! always a T2 round of the same block), evaluated at the current `w_s`.

use std::collections::{BTreeMap, VecDeque};

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::geometry::{mirror_step, GeometryBounds, MirrorMap, Point};
use crate::losses::LossFunction;
use crate::scheduling::{check_blocks, TailPolicy};

/// Positions of rounds inside blocks of length `block`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockLayout {
    horizon: usize,
    block: usize,
    tau: usize,
}

impl BlockLayout {
    pub fn new(horizon: usize, block: usize, tau: usize, tail: TailPolicy) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidParameter("delay must be >= 1".into()));
        }
        if block <= tau {
            return Err(Error::InvalidParameter(format!(
                "block length must exceed the delay (M = {block}, tau = {tau})"
            )));
        }
        check_blocks(horizon, block, tail)?;
        Ok(Self {
            horizon,
            block,
            tau,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// 0-based position of round `t` inside its block.
    pub fn position(&self, t: usize) -> usize {
        (t - 1) % self.block
    }

    /// Round `t` predicts with `w_f`.
    pub fn uses_first(&self, t: usize) -> bool {
        self.position(t) < self.tau
    }

    pub fn in_t1(&self, t: usize) -> bool {
        self.position(t) < self.tau
    }

    pub fn in_t2(&self, t: usize) -> bool {
        self.position(t) < self.block - self.tau
    }

    /// 1-based rank of a T1 round within T1.
    fn t1_rank(&self, t: usize) -> usize {
        (t - 1) / self.block * self.tau + self.position(t) + 1
    }

    pub fn index_sets(&self) -> IndexSets {
        let t1 = (1..=self.horizon).filter(|&t| self.in_t1(t)).collect();
        let t2 = (1..=self.horizon).filter(|&t| self.in_t2(t)).collect();
        IndexSets { t1, t2 }
    }
}

/// Rounds whose losses update `w_f` (T1) and `w_s` (T2), ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSets {
    pub t1: Vec<usize>,
    pub t2: Vec<usize>,
}

/// T1 = first `tau` rounds of each block, T2 = first `M - tau` rounds of
/// each block. Requires `M > tau >= 1` and `M | T`.
pub fn index_sets(horizon: usize, block: usize, tau: usize) -> Result<IndexSets> {
    Ok(BlockLayout::new(horizon, block, tau, TailPolicy::Reject)?.index_sets())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub first: f64,
    pub second: f64,
}

/// Step sizes that balance the regret bound:
///
/// ```text
/// eta_f = B sqrt(M) / (G sqrt(T tau (1/2 + c tau)))
/// eta_s = B sqrt(2M) / (G sqrt(T (M - tau)))
/// ```
pub fn theorem1_step_sizes(
    bounds: &GeometryBounds,
    step_gap_constant: f64,
    horizon: usize,
    block: usize,
    tau: usize,
) -> Result<StepSizes> {
    if block <= tau {
        return Err(Error::InvalidParameter(format!(
            "step sizes need M > tau (M = {block}, tau = {tau})"
        )));
    }
    if horizon == 0 || tau == 0 || step_gap_constant.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::InvalidParameter(
            "T, tau and c must be positive".into(),
        ));
    }
    let (b, g) = (bounds.diameter(), bounds.grad_bound());
    let (t, m, d) = (horizon as f64, block as f64, tau as f64);
    Ok(StepSizes {
        first: b * m.sqrt() / (g * (t * d * (0.5 + step_gap_constant * d)).sqrt()),
        second: b * (2.0 * m).sqrt() / (g * (t * (m - d)).sqrt()),
    })
}

/// Parameters of one DPMD run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpmdConfig {
    pub horizon: usize,
    pub tau: usize,
    pub block: usize,
    pub eta_first: f64,
    pub eta_second: f64,
    pub bounds: GeometryBounds,
    pub seed: u64,
    pub tail: TailPolicy,
}

impl DpmdConfig {
    /// Config with step sizes from [`theorem1_step_sizes`], using the map's
    /// step-gap constant.
    pub fn with_default_steps<M: MirrorMap + ?Sized>(
        map: &M,
        bounds: GeometryBounds,
        horizon: usize,
        block: usize,
        tau: usize,
        seed: u64,
    ) -> Result<Self> {
        let c = map.step_gap_constant().ok_or_else(|| {
            Error::Unsupported("default step sizes need a step-gap constant".into())
        })?;
        let steps = theorem1_step_sizes(&bounds, c, horizon, block, tau)?;
        Ok(Self {
            horizon,
            tau,
            block,
            eta_first: steps.first,
            eta_second: steps.second,
            bounds,
            seed,
            tail: TailPolicy::Reject,
        })
    }

    pub fn validate(&self) -> Result<BlockLayout> {
        for (name, eta) in [("eta_f", self.eta_first), ("eta_s", self.eta_second)] {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {eta}"
                )));
            }
        }
        BlockLayout::new(self.horizon, self.block, self.tau, self.tail)
    }
}

/// Which predictor produced a round's prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Predictor {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub point: Point,
    pub predictor: Predictor,
}

/// A T1 round waiting for its loss: the iterate that predicted on it and,
/// once released, the loss itself.
#[derive(Clone, Debug)]
struct FirstSlot<L> {
    iterate: Point,
    loss: Option<L>,
}

/// Mutable state of a DPMD run.
#[derive(Clone, Debug)]
pub struct DpmdState<L> {
    pub w_first: Point,
    pub w_second: Point,
    /// 1 + number of T1 rounds played.
    pub j_first: usize,
    /// 1 + number of T2 updates performed.
    pub j_second: usize,
    /// Rounds completed.
    pub round: usize,
    history: VecDeque<FirstSlot<L>>,
    /// T1 rank of `history.front()`.
    history_front: usize,
}

/// Per-round interface shared by the learners driven by the harness.
pub trait DelayedLearner<L> {
    /// Plays the next round given the loss released this round (the one
    /// from `tau` rounds back) and returns the prediction for this round.
    fn play(&mut self, released: Option<L>) -> Result<Point>;
}

/// Delayed Permuted Mirror Descent over a mirror map `G`.
///
/// The permutation itself is applied to the loss sequence by the caller
/// ([`crate::scheduling::block_permutation`]); this type consumes the
/// permuted, delayed stream.
#[derive(Clone, Debug)]
pub struct Dpmd<G, L> {
    map: G,
    cfg: DpmdConfig,
    layout: BlockLayout,
    state: DpmdState<L>,
}

impl<G: MirrorMap, L: LossFunction> Dpmd<G, L> {
    pub fn new(map: G, cfg: DpmdConfig) -> Result<Self> {
        let layout = cfg.validate()?;
        let start = map.initial_point();
        Ok(Self {
            map,
            cfg,
            layout,
            state: DpmdState {
                w_first: start.clone(),
                w_second: start,
                j_first: 1,
                j_second: 1,
                round: 0,
                history: VecDeque::with_capacity(cfg.tau + 1),
                history_front: 1,
            },
        })
    }

    pub fn state(&self) -> &DpmdState<L> {
        &self.state
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn config(&self) -> &DpmdConfig {
        &self.cfg
    }

    /// One round: predict, then perform the single update this round owns.
    pub fn round(&mut self, released: Option<L>) -> Result<Prediction> {
        let t = self.state.round + 1;
        if t > self.layout.horizon() {
            return Err(Error::InvalidParameter(format!(
                "round {t} is past the horizon {}",
                self.layout.horizon()
            )));
        }
        let tau = self.cfg.tau;
        let origin = t.checked_sub(tau).filter(|&o| o >= 1);
        if released.is_some() && origin.is_none() {
            return Err(Error::Consistency(format!(
                "round {t}: a loss was released before any round was {tau} rounds old"
            )));
        }
        if let (Some(o), Some(loss)) = (origin, released.as_ref()) {
            if self.layout.in_t1(o) {
                let slot = self.layout.t1_rank(o) - self.state.history_front;
                match self.state.history.get_mut(slot) {
                    Some(s) => s.loss = Some(loss.clone()),
                    None => {
                        return Err(Error::Consistency(format!(
                            "round {t}: no pending T1 slot for round {o}"
                        )))
                    }
                }
            }
        }

        let prediction = if self.layout.uses_first(t) {
            let point = self.state.w_first.clone();
            if self.state.j_first > tau {
                let slot = self.state.history.pop_front().expect("tau slots are pending");
                self.state.history_front += 1;
                let loss = slot.loss.ok_or_else(|| {
                    Error::Consistency(format!(
                        "round {t}: T1 loss from {tau} T1-steps back was never released"
                    ))
                })?;
                let g = loss.gradient(&slot.iterate);
                self.state.w_first =
                    mirror_step(&self.map, &self.state.w_first, &g, self.cfg.eta_first)?;
            }
            // First tau T1 rounds: zero function, w_f stays put.
            self.state.history.push_back(FirstSlot {
                iterate: point.clone(),
                loss: None,
            });
            self.state.j_first += 1;
            Prediction {
                point,
                predictor: Predictor::First,
            }
        } else {
            let point = self.state.w_second.clone();
            let loss = released.ok_or_else(|| {
                Error::Consistency(format!("round {t}: w_s update needs the loss of round {}", t - tau))
            })?;
            debug_assert!(self.layout.in_t2(t - tau));
            let g = loss.gradient(&point);
            self.state.w_second = mirror_step(&self.map, &point, &g, self.cfg.eta_second)?;
            self.state.j_second += 1;
            Prediction {
                point,
                predictor: Predictor::Second,
            }
        };
        self.state.round = t;
        Ok(prediction)
    }
}

impl<G: MirrorMap, L: LossFunction> DelayedLearner<L> for Dpmd<G, L> {
    fn play(&mut self, released: Option<L>) -> Result<Point> {
        Ok(self.round(released)?.point)
    }
}

/// Online gradient descent fed with gradients `tau` rounds late, each
/// evaluated at the iterate that was played on that round.
#[derive(Clone, Debug)]
pub struct DelayedOgd<G> {
    map: G,
    eta: f64,
    tau: usize,
    w: Point,
    history: VecDeque<Point>,
}

impl<G: MirrorMap> DelayedOgd<G> {
    pub fn new(map: G, tau: usize, eta: f64) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidParameter("delay must be >= 1".into()));
        }
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {eta}"
            )));
        }
        let w = map.initial_point();
        Ok(Self {
            map,
            eta,
            tau,
            w,
            history: VecDeque::with_capacity(tau + 1),
        })
    }

    /// Fixed step `1/sqrt(T)`.
    pub fn default_step(horizon: usize) -> f64 {
        1.0 / (horizon as f64).sqrt()
    }

    pub fn current(&self) -> &Point {
        &self.w
    }

    pub fn round<L: LossFunction>(&mut self, released: Option<&L>) -> Result<Point> {
        let played = self.w.clone();
        self.history.push_back(played.clone());
        let stale = if self.history.len() > self.tau {
            self.history.pop_front()
        } else {
            None
        };
        if let Some(loss) = released {
            let at = stale.ok_or_else(|| {
                Error::Consistency("loss released before its round was played".into())
            })?;
            let g = loss.gradient(&at);
            self.w = mirror_step(&self.map, &self.w, &g, self.eta)?;
        }
        Ok(played)
    }
}

impl<G: MirrorMap, L: LossFunction> DelayedLearner<L> for DelayedOgd<G> {
    fn play(&mut self, released: Option<L>) -> Result<Point> {
        self.round(released.as_ref())
    }
}

/// Conditional means of the current and the delayed gradient for one update
/// of `w_s` and one observed prefix of the block.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientConditioning {
    /// 0-based T2 position `j` inside the block.
    pub update: usize,
    /// Original loss indices occupying positions `0..j`.
    pub prefix: Vec<usize>,
    /// Number of block orderings consistent with the prefix.
    pub orderings: usize,
    /// Mean over those orderings of `grad f_{pos j}(w)`.
    pub mean_current: Vec<f64>,
    /// Mean over those orderings of `grad f_{pos j + tau}(w)`.
    pub mean_delayed: Vec<f64>,
}

impl GradientConditioning {
    pub fn max_gap(&self) -> f64 {
        self.mean_current
            .iter()
            .zip(&self.mean_delayed)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Enumerates every ordering of one block of `losses` (so `M = losses.len()`
/// should be small) and, for every `w_s` update position `j < M - tau` and
/// every prefix of losses that could have been observed before it, averages
/// the gradient at `w` of the loss at position `j` and of the loss at
/// position `j + tau`.
pub fn block_gradient_conditioning<L: LossFunction>(
    losses: &[L],
    tau: usize,
    w: &Point,
) -> Result<Vec<GradientConditioning>> {
    let m = losses.len();
    if tau == 0 || m <= tau {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= tau < M, got tau = {tau}, M = {m}"
        )));
    }
    if m > 8 {
        return Err(Error::InvalidParameter(format!(
            "exhaustive enumeration over {m}! orderings is too large"
        )));
    }
    let grads: Vec<Vec<f64>> = losses.iter().map(|l| l.gradient(w).coords().to_vec()).collect();
    let dim = grads[0].len();
    let mut out = Vec::new();
    for j in 0..m - tau {
        let mut groups: BTreeMap<Vec<usize>, (usize, Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for order in (0..m).permutations(m) {
            let entry = groups
                .entry(order[..j].to_vec())
                .or_insert_with(|| (0, vec![0.0; dim], vec![0.0; dim]));
            entry.0 += 1;
            let (cur, del) = (&grads[order[j]], &grads[order[j + tau]]);
            for (k, (c, d)) in cur.iter().zip(del).enumerate() {
                entry.1[k] += c;
                entry.2[k] += d;
            }
        }
        for (prefix, (count, cur, del)) in groups {
            let n = count as f64;
            out.push(GradientConditioning {
                update: j,
                prefix,
                orderings: count,
                mean_current: cur.into_iter().map(|v| v / n).collect(),
                mean_delayed: del.into_iter().map(|v| v / n).collect(),
            });
        }
    }
    Ok(out)
}

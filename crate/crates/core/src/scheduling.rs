//! Local permutations with a bounded window, the fixed-delay feedback
//! channel, and the buffer that reduces bounded variable delays to a fixed
//! delay.
//!
//! Rounds are 1-based throughout, matching the way the protocol is usually
//! written down: round `t` presents loss `f_t`, and under delay `tau` the
//! learner sees `f_{t - tau}` during round `t`.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::losses::{LossFunction, LossSequence};
use crate::rng::{substream, Component};

/// What to do when the block length does not divide the horizon.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TailPolicy {
    /// Refuse: the horizon must be a whole number of blocks.
    #[default]
    Reject,
    /// Allow a shorter final block holding the remaining `T mod M` rounds.
    ShortFinalBlock,
}

/// Checks `1 <= block <= horizon` and divisibility under `tail`.
pub fn check_blocks(horizon: usize, block: usize, tail: TailPolicy) -> Result<()> {
    if block == 0 || block > horizon {
        return Err(Error::InvalidParameter(format!(
            "block length must satisfy 1 <= M <= T, got M = {block}, T = {horizon}"
        )));
    }
    if tail == TailPolicy::Reject && !horizon.is_multiple_of(block) {
        return Err(Error::InvalidParameter(format!(
            "horizon T = {horizon} is not a multiple of the block length M = {block}"
        )));
    }
    Ok(())
}

/// A permutation `sigma` of `{1..T}` together with its inverse. Position `t`
/// of the permuted sequence holds original loss `sigma^{-1}(t)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationPlan {
    sigma: Vec<usize>,
    sigma_inv: Vec<usize>,
    window: usize,
}

impl PermutationPlan {
    pub fn identity(horizon: usize) -> Self {
        let id: Vec<usize> = (0..horizon).collect();
        Self {
            sigma: id.clone(),
            sigma_inv: id,
            window: 0,
        }
    }

    /// Builds a plan from the forward map given as 1-based images
    /// `sigma(1), ..., sigma(T)`. The window is the realized maximum
    /// displacement.
    pub fn from_forward(images: &[usize]) -> Result<Self> {
        let n = images.len();
        let mut sigma_inv = vec![usize::MAX; n];
        for (i, &img) in images.iter().enumerate() {
            if img == 0 || img > n || sigma_inv[img - 1] != usize::MAX {
                return Err(Error::InvalidParameter(format!(
                    "not a permutation of 1..{n}: image {img} at position {}",
                    i + 1
                )));
            }
            sigma_inv[img - 1] = i;
        }
        let sigma: Vec<usize> = images.iter().map(|&i| i - 1).collect();
        let window = max_displacement(&sigma);
        Ok(Self {
            sigma,
            sigma_inv,
            window,
        })
    }

    fn from_inverse(sigma_inv: Vec<usize>, window: usize) -> Self {
        let mut sigma = vec![0; sigma_inv.len()];
        for (pos, &orig) in sigma_inv.iter().enumerate() {
            sigma[orig] = pos;
        }
        Self {
            sigma,
            sigma_inv,
            window,
        }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    /// Window the plan was generated for (for block plans, the block length).
    pub fn window(&self) -> usize {
        self.window
    }

    /// `sigma(t)`, 1-based.
    pub fn sigma(&self, t: usize) -> usize {
        self.sigma[t - 1] + 1
    }

    /// `sigma^{-1}(t)`, 1-based.
    pub fn sigma_inv(&self, t: usize) -> usize {
        self.sigma_inv[t - 1] + 1
    }

    /// The forward map as 1-based images.
    pub fn forward_images(&self) -> Vec<usize> {
        self.sigma.iter().map(|&i| i + 1).collect()
    }

    pub fn inverse(&self) -> Self {
        Self {
            sigma: self.sigma_inv.clone(),
            sigma_inv: self.sigma.clone(),
            window: self.window,
        }
    }

    pub fn max_displacement(&self) -> usize {
        max_displacement(&self.sigma)
    }
}

fn max_displacement(sigma: &[usize]) -> usize {
    sigma
        .iter()
        .enumerate()
        .map(|(t, &s)| t.abs_diff(s))
        .max()
        .unwrap_or(0)
}

/// Splits `1..T` into consecutive blocks of length `block` and shuffles each
/// block uniformly (Fisher-Yates). Block `k` draws from its own stream of
/// `seed`, so the plan does not depend on iteration order.
pub fn block_permutation(horizon: usize, block: usize, seed: u64) -> Result<PermutationPlan> {
    block_permutation_with(horizon, block, seed, TailPolicy::Reject)
}

pub fn block_permutation_with(
    horizon: usize,
    block: usize,
    seed: u64,
    tail: TailPolicy,
) -> Result<PermutationPlan> {
    check_blocks(horizon, block, tail)?;
    let mut sigma_inv: Vec<usize> = (0..horizon).collect();
    if block > 1 {
        for (k, chunk) in sigma_inv.chunks_mut(block).enumerate() {
            let mut rng = substream(seed, Component::Permutation, k as u64);
            chunk.shuffle(&mut rng);
        }
    }
    Ok(PermutationPlan::from_inverse(sigma_inv, block))
}

/// Permuted sequence: output position `t` holds input loss `sigma^{-1}(t)`.
pub fn apply_permutation<L: LossFunction>(
    seq: &LossSequence<L>,
    plan: &PermutationPlan,
) -> Result<LossSequence<L>> {
    if plan.len() != seq.len() {
        return Err(Error::LengthMismatch {
            expected: seq.len(),
            got: plan.len(),
        });
    }
    let src = seq.as_slice();
    LossSequence::new(plan.sigma_inv.iter().map(|&i| src[i].clone()).collect())
}

/// Whether `plan` is a bijection with `|sigma(t) - t| <= window` for all `t`.
pub fn validate_window(plan: &PermutationPlan, window: usize) -> bool {
    let n = plan.sigma.len();
    if plan.sigma_inv.len() != n {
        return false;
    }
    let bijective = plan
        .sigma
        .iter()
        .enumerate()
        .all(|(t, &s)| s < n && plan.sigma_inv[s] == t);
    bijective && max_displacement(&plan.sigma) <= window
}

/// Fixed-delay feedback: during round `t` the channel releases the loss
/// submitted in round `t - tau`, or nothing while `t <= tau`.
#[derive(Clone, Debug)]
pub struct DelayChannel<L> {
    tau: usize,
    next_round: usize,
    pending: VecDeque<L>,
}

impl<L: Clone> DelayChannel<L> {
    pub fn new(tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidParameter("delay must be >= 1".into()));
        }
        Ok(Self {
            tau,
            next_round: 1,
            pending: VecDeque::with_capacity(tau + 1),
        })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Submits round `t`'s loss and returns the one from round `t - tau`.
    pub fn step(&mut self, t: usize, submitted: L) -> Result<Option<L>> {
        if t != self.next_round {
            return Err(Error::OutOfOrder {
                expected: self.next_round,
                got: t,
            });
        }
        self.next_round += 1;
        self.pending.push_back(submitted);
        if self.pending.len() > self.tau {
            Ok(self.pending.pop_front())
        } else {
            Ok(None)
        }
    }
}

/// Reorders losses that arrive with variable delays in `1..=tau` so that
/// round `t` releases exactly the loss of round `t - tau`.
#[derive(Clone, Debug)]
pub struct DelayBuffer<L> {
    tau: usize,
    next_round: usize,
    held: BTreeMap<usize, L>,
}

impl<L: Clone> DelayBuffer<L> {
    pub fn new(tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidParameter("delay bound must be >= 1".into()));
        }
        Ok(Self {
            tau,
            next_round: 1,
            held: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.held.len()
    }

    pub fn is_empty(&self) -> bool {
        self.held.is_empty()
    }

    /// Stores the losses that arrived during round `t` (as `(origin, loss)`
    /// pairs) and releases origin `t - tau` when it exists.
    pub fn release(&mut self, t: usize, arrivals: Vec<(usize, L)>) -> Result<Option<L>> {
        if t != self.next_round {
            return Err(Error::OutOfOrder {
                expected: self.next_round,
                got: t,
            });
        }
        // Everything at or below this origin has already been released.
        let released_through = (t - 1).saturating_sub(self.tau);
        for (origin, _) in &arrivals {
            let origin = *origin;
            if origin == 0 || origin >= t {
                return Err(Error::InvalidParameter(format!(
                    "round {t}: arrival from origin {origin} is not in the past"
                )));
            }
            if t - origin > self.tau {
                return Err(Error::InvalidParameter(format!(
                    "round {t}: arrival from origin {origin} exceeds the delay bound {}",
                    self.tau
                )));
            }
            if origin <= released_through || self.held.contains_key(&origin) {
                return Err(Error::InvalidParameter(format!(
                    "round {t}: duplicate arrival from origin {origin}"
                )));
            }
        }
        let mut seen = std::collections::HashSet::with_capacity(arrivals.len());
        if !arrivals.iter().all(|(o, _)| seen.insert(*o)) {
            return Err(Error::InvalidParameter(format!(
                "round {t}: duplicate origin within one batch"
            )));
        }
        self.next_round += 1;
        self.held.extend(arrivals);
        if t <= self.tau {
            return Ok(None);
        }
        let due = t - self.tau;
        match self.held.remove(&due) {
            Some(loss) => {
                debug_assert!(self.held.len() < self.tau);
                Ok(Some(loss))
            }
            None => Err(Error::Consistency(format!(
                "round {t}: loss of round {due} never arrived within the delay bound"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LinearSignLoss;
    use rand::Rng;

    fn alphas(n: usize) -> LossSequence<crate::losses::LinearLoss> {
        use crate::geometry::DualPoint;
        use crate::losses::LinearLoss;
        LossSequence::new(
            (1..=n)
                .map(|i| LinearLoss::new(DualPoint::scalar(i as f64), i as f64).unwrap())
                .collect(),
        )
        .unwrap()
    }

    fn coeff(l: &crate::losses::LinearLoss) -> f64 {
        l.coeffs()[0]
    }

    #[test]
    fn block_of_one_is_identity() {
        let p = block_permutation(6, 1, 9).unwrap();
        assert_eq!(p.forward_images(), (1..=6).collect::<Vec<_>>());
    }

    #[test]
    fn blocks_are_confined() {
        for seed in 0..50 {
            let p = block_permutation(4, 2, seed).unwrap();
            let mut first: Vec<usize> = vec![p.sigma(1), p.sigma(2)];
            first.sort();
            assert_eq!(first, vec![1, 2]);
            let mut second: Vec<usize> = vec![p.sigma(3), p.sigma(4)];
            second.sort();
            assert_eq!(second, vec![3, 4]);
        }
    }

    #[test]
    fn non_dividing_block_is_rejected() {
        let err = block_permutation(10, 4, 0).unwrap_err();
        assert!(err.to_string().contains("not a multiple"));
        assert!(block_permutation(10, 0, 0).is_err());
        assert!(block_permutation(10, 11, 0).is_err());
    }

    #[test]
    fn short_final_block_is_confined() {
        let p = block_permutation_with(10, 4, 3, TailPolicy::ShortFinalBlock).unwrap();
        assert!(validate_window(&p, 3));
        let mut tail: Vec<usize> = (9..=10).map(|t| p.sigma(t)).collect();
        tail.sort();
        assert_eq!(tail, vec![9, 10]);
    }

    #[test]
    fn same_seed_same_plan() {
        let a = block_permutation(1000, 10, 42).unwrap();
        let b = block_permutation(1000, 10, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, block_permutation(1000, 10, 43).unwrap());
    }

    #[test]
    fn within_block_orderings_are_uniform() {
        // 10^5 draws of block 1 with T = 12, M = 4; each of the 24 orderings
        // should appear with frequency 1/24 within 3 binomial sigmas, and the
        // chi-square statistic should sit well inside its 23-dof range.
        let draws = 100_000usize;
        let mut counts = std::collections::HashMap::new();
        for seed in 0..draws as u64 {
            let p = block_permutation(12, 4, seed).unwrap();
            let key: Vec<usize> = (1..=4).map(|t| p.sigma_inv(t)).collect();
            *counts.entry(key).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 24);
        let pr = 1.0 / 24.0;
        let expected = draws as f64 * pr;
        let sigma = (draws as f64 * pr * (1.0 - pr)).sqrt();
        let mut chi2 = 0.0;
        for &c in counts.values() {
            assert!((c as f64 - expected).abs() <= 3.0 * sigma + 1.0, "count {c}");
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // 99.9th percentile of chi-square with 23 degrees of freedom.
        assert!(chi2 < 49.73, "chi2 = {chi2}");
    }

    #[test]
    fn apply_identity_and_swap() {
        let s = alphas(4);
        assert_eq!(apply_permutation(&s, &PermutationPlan::identity(4)).unwrap(), s);
        let two = alphas(2);
        let swapped = apply_permutation(&two, &PermutationPlan::from_forward(&[2, 1]).unwrap()).unwrap();
        assert_eq!(coeff(swapped.round(1)), 2.0);
        assert_eq!(coeff(swapped.round(2)), 1.0);
        assert!(apply_permutation(&s, &PermutationPlan::identity(3)).is_err());
    }

    #[test]
    fn plan_then_inverse_restores_sequence() {
        let s = alphas(30);
        let p = block_permutation(30, 5, 1).unwrap();
        let there = apply_permutation(&s, &p).unwrap();
        for t in 1..=30 {
            assert_eq!(coeff(there.round(t)), p.sigma_inv(t) as f64);
        }
        let back = apply_permutation(&there, &p.inverse()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn window_validation() {
        assert!(validate_window(&PermutationPlan::identity(5), 0));
        let cyclic = PermutationPlan::from_forward(&[3, 1, 2]).unwrap();
        assert!(!validate_window(&cyclic, 1));
        assert!(validate_window(&cyclic, 2));
        assert!(PermutationPlan::from_forward(&[1, 1, 2]).is_err());
        for seed in 0..1000 {
            let p = block_permutation(120, 8, seed).unwrap();
            assert!(validate_window(&p, 8));
            assert!(p.max_displacement() <= 7);
        }
    }

    #[test]
    fn channel_releases_after_delay() {
        let mut ch = DelayChannel::new(2).unwrap();
        assert_eq!(ch.step(1, 'a').unwrap(), None);
        assert_eq!(ch.step(2, 'b').unwrap(), None);
        assert_eq!(ch.step(3, 'c').unwrap(), Some('a'));
        assert_eq!(ch.step(4, 'd').unwrap(), Some('b'));
        assert!(matches!(ch.step(6, 'f'), Err(Error::OutOfOrder { expected: 5, got: 6 })));
        assert!(DelayChannel::<char>::new(0).is_err());
    }

    #[test]
    fn unit_delay_channel() {
        let mut ch = DelayChannel::new(1).unwrap();
        assert_eq!(ch.step(1, 1usize).unwrap(), None);
        for t in 2..100 {
            assert_eq!(ch.step(t, t).unwrap(), Some(t - 1));
        }
    }

    #[test]
    fn long_channel_replay_releases_every_early_loss() {
        let (tau, horizon) = (200usize, 100_000usize);
        let mut ch = DelayChannel::new(tau).unwrap();
        let released: Vec<usize> = (1..=horizon)
            .filter_map(|t| ch.step(t, t).unwrap())
            .collect();
        assert_eq!(released, (1..=horizon - tau).collect::<Vec<_>>());
    }

    #[test]
    fn buffer_batch_then_drain() {
        let mut b = DelayBuffer::new(3).unwrap();
        for t in 1..=3 {
            assert_eq!(b.release(t, vec![]).unwrap(), None);
        }
        assert_eq!(b.release(4, vec![(1, 'a'), (2, 'b'), (3, 'c')]).unwrap(), Some('a'));
        assert_eq!(b.release(5, vec![]).unwrap(), Some('b'));
        assert!(b.len() <= 3);
    }

    #[test]
    fn buffer_with_exact_delay_matches_channel() {
        let mut b = DelayBuffer::new(2).unwrap();
        let mut ch = DelayChannel::new(2).unwrap();
        for t in 1..=50usize {
            let arrivals = if t > 2 { vec![(t - 2, t - 2)] } else { vec![] };
            assert_eq!(b.release(t, arrivals).unwrap(), ch.step(t, t).unwrap());
        }
    }

    #[test]
    fn buffer_rejects_bad_arrivals() {
        let mut b = DelayBuffer::new(2).unwrap();
        b.release(1, vec![]).unwrap();
        b.release(2, vec![(1, 'a')]).unwrap();

        let mut held_twice = b.clone();
        assert!(held_twice.release(3, vec![(1, 'x'), (2, 'b')]).is_err());
        let mut same_batch = b.clone();
        assert!(same_batch.release(3, vec![(2, 'b'), (2, 'c')]).is_err());
        let mut future = b.clone();
        assert!(future.release(3, vec![(3, 'c')]).is_err());

        assert_eq!(b.release(3, vec![(2, 'b')]).unwrap(), Some('a'));
        // origin 1 at round 4 is a delay of 3
        let mut stale = b.clone();
        let err = stale.release(4, vec![(1, 'z')]).unwrap_err();
        assert!(err.to_string().contains("delay bound"));

        let mut late: DelayBuffer<char> = DelayBuffer::new(2).unwrap();
        late.release(1, vec![]).unwrap();
        late.release(2, vec![]).unwrap();
        // origin 1 was due at round 3 and never came
        assert!(matches!(late.release(3, vec![]), Err(Error::Consistency(_))));
        let mut fresh = DelayBuffer::new(2).unwrap();
        fresh.release(1, vec![]).unwrap();
        fresh.release(2, vec![]).unwrap();
        assert_eq!(fresh.release(3, vec![(1, 'a')]).unwrap(), Some('a'));
    }

    fn replay_random_delays(tau: usize, horizon: usize, seed: u64) -> Vec<usize> {
        let mut rng = substream(seed, Component::Validation, 7);
        let mut arrivals: Vec<Vec<(usize, usize)>> = vec![Vec::new(); horizon + tau + 2];
        for origin in 1..=horizon {
            let d = rng.gen_range(1..=tau);
            arrivals[origin + d].push((origin, origin));
        }
        let mut b = DelayBuffer::new(tau).unwrap();
        (1..=horizon)
            .filter_map(|t| b.release(t, std::mem::take(&mut arrivals[t])).unwrap())
            .collect()
    }

    #[test]
    fn buffer_restores_order_under_random_delays() {
        assert_eq!(replay_random_delays(5, 1000, 0), (1..=995).collect::<Vec<_>>());
        for seed in 1..=100 {
            let mut ch = DelayChannel::new(4).unwrap();
            let fixed: Vec<usize> = (1..=300).filter_map(|t| ch.step(t, t).unwrap()).collect();
            assert_eq!(replay_random_delays(4, 300, seed), fixed);
        }
    }

    #[test]
    fn sign_sequence_multiset_survives_permutation() {
        let s = LossSequence::from_alphas(&[1.0, 1.0, -1.0, 1.0, -1.0, -1.0]).unwrap();
        let p = block_permutation(6, 3, 5).unwrap();
        let q = apply_permutation(&s, &p).unwrap();
        assert_eq!(q.alpha_sum(), s.alpha_sum());
        let _: &LinearSignLoss = q.round(1);
    }
}

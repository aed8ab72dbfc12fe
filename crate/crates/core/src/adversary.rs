//! Block-constant sign adversaries for linear losses on `[-1, 1]`.
//!
//! All losses inside a block share one coefficient `alpha`, drawn as a fair
//! sign. While the learner's feedback delay is at least the block length, a
//! block's sign is unknown until the whole block has been played, so the
//! learner's expected loss is zero while the hindsight optimum earns
//! `-block * E|sum_i alpha_i|`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Result};
use crate::losses::{LinearSignLoss, LossSequence};

/// A horizon split into equal blocks, each with one sign.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockSignSequence {
    horizon: usize,
    block_size: usize,
    signs: Vec<bool>,
}

impl BlockSignSequence {
    /// `signs[i]` is true for `alpha = +1` on block `i`.
    pub fn from_signs(block_size: usize, signs: Vec<bool>) -> Result<Self> {
        if block_size == 0 || signs.is_empty() {
            return Err(invalid("need at least one block of positive length"));
        }
        Ok(Self {
            horizon: block_size * signs.len(),
            block_size,
            signs,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn blocks(&self) -> usize {
        self.signs.len()
    }

    pub fn signs(&self) -> &[bool] {
        &self.signs
    }

    /// `alpha` of block `i` as `+1.0` / `-1.0`.
    pub fn block_alpha(&self, i: usize) -> f64 {
        if self.signs[i] {
            1.0
        } else {
            -1.0
        }
    }

    /// `#(+1 blocks) - #(-1 blocks)`.
    pub fn sign_balance(&self) -> i64 {
        self.signs.iter().map(|&s| if s { 1i64 } else { -1 }).sum()
    }

    /// One loss per round.
    pub fn expand(&self) -> LossSequence<LinearSignLoss> {
        let losses = self
            .signs
            .iter()
            .flat_map(|&s| std::iter::repeat_n(LinearSignLoss::from_sign(s), self.block_size))
            .collect();
        LossSequence::new(losses).expect("at least one block")
    }
}

fn check_division(horizon: usize, block_size: usize) -> Result<usize> {
    if block_size == 0 || horizon == 0 || !horizon.is_multiple_of(block_size) {
        return Err(invalid(format!(
            "block size {block_size} must divide the horizon {horizon}"
        )));
    }
    Ok(horizon / block_size)
}

/// Independent fair sign per block.
pub fn make_block_sequence<R: Rng + ?Sized>(
    horizon: usize,
    block_size: usize,
    rng: &mut R,
) -> Result<BlockSignSequence> {
    let k = check_division(horizon, block_size)?;
    let signs = (0..k).map(|_| rng.gen::<bool>()).collect();
    BlockSignSequence::from_signs(block_size, signs)
}

/// Exactly `(k + gap) / 2` blocks of a majority sign (itself a fair coin)
/// and `(k - gap) / 2` of the other, in uniformly shuffled order.
pub fn make_gapped_sequence<R: Rng + ?Sized>(
    horizon: usize,
    block_size: usize,
    gap: usize,
    rng: &mut R,
) -> Result<BlockSignSequence> {
    let k = check_division(horizon, block_size)?;
    if gap > k {
        return Err(invalid(format!("gap {gap} exceeds the number of blocks {k}")));
    }
    if !(k - gap).is_multiple_of(2) {
        return Err(invalid(format!(
            "gap {gap} and block count {k} must have the same parity"
        )));
    }
    let majority = rng.gen::<bool>();
    let heavy = (k + gap) / 2;
    let mut signs: Vec<bool> = (0..k).map(|i| if i < heavy { majority } else { !majority }).collect();
    signs.shuffle(rng);
    BlockSignSequence::from_signs(block_size, signs)
}

/// Block length `tau / 3` used against learners whose permutation window is
/// at most a third of the delay. `tau` must be a multiple of 3.
pub fn third_of_delay_block(tau: usize) -> Result<usize> {
    if tau < 3 || !tau.is_multiple_of(3) {
        return Err(invalid(format!(
            "delay {tau} is not a positive multiple of 3; pick the block size explicitly"
        )));
    }
    Ok(tau / 3)
}

/// Monte-Carlo estimate of `block * E|sum_{i<k} alpha_i|`, `k = T / block`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
}

/// Expected negative hindsight total of a block-sign sequence, i.e. the
/// expected regret of any learner whose expected loss on it is zero.
pub fn khintchine_regret_oracle<R: Rng + ?Sized>(
    horizon: usize,
    block_size: usize,
    reps: usize,
    rng: &mut R,
) -> Result<OracleEstimate> {
    let k = check_division(horizon, block_size)?;
    if reps == 0 {
        return Err(invalid("reps must be >= 1"));
    }
    let draws: Vec<f64> = (0..reps)
        .map(|_| {
            // k fair signs, 64 at a time.
            let mut sum = 0i64;
            let mut left = k;
            while left > 0 {
                let take = left.min(64);
                let bits = rng.gen::<u64>() & if take == 64 { u64::MAX } else { (1u64 << take) - 1 };
                let ones = bits.count_ones() as i64;
                sum += 2 * ones - take as i64;
                left -= take;
            }
            block_size as f64 * sum.unsigned_abs() as f64
        })
        .collect();
    let (mean, stderr) = crate::harness::stats::mean_and_stderr(&draws);
    Ok(OracleEstimate { mean, stderr, reps })
}

/// `sqrt(2k / pi)`, the large-`k` value of `E|S_k|` for a sum of `k` fair signs.
pub fn rademacher_abs_sum_asymptotic(k: usize) -> f64 {
    (2.0 * k as f64 / std::f64::consts::PI).sqrt()
}

/// Exact `E|S_k| = k * C(k-1, floor((k-1)/2)) / 2^(k-1)`, computed in log
/// space.
pub fn rademacher_abs_sum_exact(k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let n = k - 1;
    let r = n / 2;
    let ln_binom: f64 = (1..=r).map(|i| ((n - r + i) as f64).ln() - (i as f64).ln()).sum();
    k as f64 * (ln_binom - n as f64 * std::f64::consts::LN_2).exp()
}

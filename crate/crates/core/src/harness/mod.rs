//! Seeded Monte-Carlo experiments: build an adversary, permute it inside
//! windows of length `M`, feed it through a delay channel to a learner, and
//! aggregate the final regret over repetitions.

pub mod config;
pub mod csv_io;
pub mod stats;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversary::{make_block_sequence, make_gapped_sequence, BlockSignSequence};
use crate::dpmd::{DelayedLearner, DelayedOgd, Dpmd, DpmdConfig};
use crate::error::{invalid, Error, Result};
use crate::geometry::{DualPoint, EuclideanBox, Geometry, GeometryBounds, MirrorMap, NegativeEntropy, Point};
use crate::losses::{hindsight_optimum, LinearLoss, LinearSignLoss};
use crate::rng::{substream, Component};
use crate::scheduling::{apply_permutation, block_permutation_with, DelayChannel, PermutationPlan, TailPolicy};

/// Environment variable capping the worker threads (0 or unset = all cores).
pub const THREADS_ENV: &str = "OLLP_THREADS";

/// Gap between majority and minority blocks for the DPMD experiments.
pub const DEFAULT_GAP: usize = 200;

/// Trace decimation used when none is given.
pub const DEFAULT_TRACE_STRIDE: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// DPMD final regret against the window size (`M > tau`).
    DpmdVsM,
    /// DPMD cumulative regret over time for each window.
    DpmdTrace,
    /// Delayed OGD on a permuted lower-bound sequence, `M < tau`.
    OgdSmallWindow,
    /// Delayed OGD against the block-sign construction, reporting the
    /// learner's own cumulative loss as well.
    LowerBoundCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DpmdVsM => "dpmd_vs_M",
            ExperimentKind::DpmdTrace => "dpmd_trace",
            ExperimentKind::OgdSmallWindow => "ogd_small_window",
            ExperimentKind::LowerBoundCheck => "lower_bound_check",
        }
    }

    pub fn uses_dpmd(self) -> bool {
        matches!(self, ExperimentKind::DpmdVsM | ExperimentKind::DpmdTrace)
    }

    /// Window grid used when none is given.
    pub fn default_windows(self, horizon: usize, tau: usize) -> Vec<usize> {
        let mut grid: Vec<usize> = match self {
            ExperimentKind::DpmdVsM | ExperimentKind::DpmdTrace => {
                vec![tau + 1, 2 * tau, 5 * tau, 10 * tau, 50 * tau, horizon]
            }
            ExperimentKind::OgdSmallWindow => {
                let step = (tau / 10).max(1);
                (0..=9).map(|i| i * step).collect()
            }
            ExperimentKind::LowerBoundCheck => vec![0],
        };
        grid.retain(|&m| m <= horizon);
        grid.dedup();
        grid
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dpmd_vs_M" | "dpmd_vs_m" => Ok(ExperimentKind::DpmdVsM),
            "dpmd_trace" => Ok(ExperimentKind::DpmdTrace),
            "ogd_small_window" => Ok(ExperimentKind::OgdSmallWindow),
            "lower_bound_check" => Ok(ExperimentKind::LowerBoundCheck),
            other => Err(invalid(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryChoice {
    /// `[-1, 1]` with the Euclidean map.
    #[default]
    Euclidean,
    /// The 2-simplex with negative entropy; `w = p_1 - p_2`.
    Entropy,
}

impl FromStr for GeometryChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(GeometryChoice::Euclidean),
            "entropy" => Ok(GeometryChoice::Entropy),
            other => Err(invalid(format!("unknown geometry '{other}'"))),
        }
    }
}

impl GeometryChoice {
    pub fn map(self) -> Geometry {
        match self {
            GeometryChoice::Euclidean => Geometry::Euclidean(EuclideanBox::unit_interval()),
            GeometryChoice::Entropy => {
                Geometry::Entropy(NegativeEntropy::new(2).expect("dimension 2"))
            }
        }
    }

    /// `B^2` and `G` for sign losses: `B^2 = 2, G = 1` on the interval,
    /// `B^2 = ln 2, G = |(alpha, -alpha)|_inf = 1` on the simplex.
    pub fn bounds(self) -> GeometryBounds {
        let map = self.map();
        GeometryBounds::new(map.diameter_sq(), 1.0).expect("positive")
    }

    /// The loss `alpha * w` written in this geometry's coordinates.
    pub fn embed(self, loss: LinearSignLoss) -> LinearLoss {
        let a = loss.alpha();
        let coeffs = match self {
            GeometryChoice::Euclidean => DualPoint::scalar(a),
            GeometryChoice::Entropy => DualPoint::new(&[a, -a]),
        };
        LinearLoss::new(coeffs, 1.0).expect("finite")
    }

    /// Position in `[-1, 1]` represented by a prediction.
    pub fn to_interval(self, p: &Point) -> f64 {
        match self {
            GeometryChoice::Euclidean => p[0],
            GeometryChoice::Entropy => p[0] - p[1],
        }
    }
}

/// Everything needed to reproduce an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub horizon: usize,
    pub tau: usize,
    /// Window sizes `M`; 0 means no permutation.
    pub windows: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub geometry: GeometryChoice,
    /// Overrides `eta_f` (DPMD) or the OGD step (baseline experiments).
    pub eta_first: Option<f64>,
    /// Overrides `eta_s` (DPMD only).
    pub eta_second: Option<f64>,
    /// Adversary block length; defaults to `tau`.
    pub block_size: Option<usize>,
    /// Sign gap in blocks. DPMD experiments default to [`DEFAULT_GAP`]
    /// (lowered to fit); baseline experiments default to independent signs.
    pub gap: Option<usize>,
    pub trace_stride: usize,
    pub keep_traces: bool,
}

impl ExperimentConfig {
    /// Defaults for `experiment` at the given scale.
    pub fn new(experiment: ExperimentKind, horizon: usize, tau: usize) -> Self {
        Self {
            experiment,
            horizon,
            tau,
            windows: experiment.default_windows(horizon, tau),
            reps: 1000,
            seed: 0,
            geometry: GeometryChoice::Euclidean,
            eta_first: None,
            eta_second: None,
            block_size: None,
            gap: None,
            trace_stride: DEFAULT_TRACE_STRIDE,
            keep_traces: experiment == ExperimentKind::DpmdTrace,
        }
    }

    pub fn block_size(&self) -> usize {
        self.block_size.unwrap_or(self.tau)
    }

    /// Gap actually used, after defaults.
    pub fn effective_gap(&self) -> Option<usize> {
        match (self.gap, self.experiment.uses_dpmd()) {
            (Some(g), _) => Some(g),
            (None, true) => {
                let k = self.horizon / self.block_size().max(1);
                let g = DEFAULT_GAP.min(k);
                Some(if (k - g).is_multiple_of(2) { g } else { g - 1 })
            }
            (None, false) => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.tau == 0 || self.reps == 0 {
            return Err(invalid("T, tau and reps must be positive"));
        }
        if self.trace_stride == 0 {
            return Err(invalid("trace stride must be positive"));
        }
        if self.windows.is_empty() {
            return Err(invalid("at least one window size M is required"));
        }
        let block = self.block_size();
        if block == 0 || !self.horizon.is_multiple_of(block) {
            return Err(invalid(format!(
                "adversary block size {block} must divide T = {}",
                self.horizon
            )));
        }
        if let Some(g) = self.effective_gap() {
            let k = self.horizon / block;
            if g > k || !(k - g).is_multiple_of(2) {
                return Err(invalid(format!(
                    "gap {g} is incompatible with {k} blocks (needs gap <= k and equal parity)"
                )));
            }
        }
        for &m in &self.windows {
            if m > self.horizon {
                return Err(invalid(format!("window M = {m} exceeds T = {}", self.horizon)));
            }
            if self.experiment.uses_dpmd() && m <= self.tau {
                return Err(invalid(format!(
                    "DPMD needs M > tau, got M = {m}, tau = {}",
                    self.tau
                )));
            }
        }
        for eta in [self.eta_first, self.eta_second].into_iter().flatten() {
            if !(eta > 0.0 && eta.is_finite()) {
                return Err(invalid(format!("step sizes must be positive, got {eta}")));
            }
        }
        Ok(())
    }

    /// `sqrt(tau T)`.
    pub fn adversarial_ref(&self) -> f64 {
        ((self.tau * self.horizon) as f64).sqrt()
    }

    /// `sqrt(T) + tau`.
    pub fn stochastic_ref(&self) -> f64 {
        (self.horizon as f64).sqrt() + self.tau as f64
    }

    pub fn rep_seed(&self, rep: usize) -> u64 {
        self.seed.wrapping_add(rep as u64)
    }
}

/// Cumulative regret sampled every `stride` rounds (and at the last round).
#[derive(Clone, Debug, PartialEq)]
pub struct RegretTrace {
    pub stride: usize,
    pub rounds: Vec<usize>,
    pub cum_regret: Vec<f64>,
}

impl RegretTrace {
    fn new(stride: usize) -> Self {
        Self {
            stride,
            rounds: Vec::new(),
            cum_regret: Vec::new(),
        }
    }

    pub fn final_regret(&self) -> Option<f64> {
        self.cum_regret.last().copied()
    }
}

/// Result of one repetition for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub final_regret: f64,
    /// `sum_t f_t(w_t)`.
    pub algorithm_loss: f64,
    /// `sum_t f_t(w*)`.
    pub hindsight_total: f64,
    pub trace: RegretTrace,
}

/// One line of the aggregate CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub experiment: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub tau: usize,
    #[serde(rename = "M")]
    pub window: usize,
    pub reps: usize,
    pub mean_regret: f64,
    pub stderr: f64,
    pub adversarial_ref: f64,
    pub stochastic_ref: f64,
}

/// Aggregate for one window plus what was aggregated.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowResult {
    pub row: AggregateRow,
    pub mean_algorithm_loss: f64,
    pub stderr_algorithm_loss: f64,
    /// Set when the standard error is not meaningful (a single repetition).
    pub warning: Option<String>,
    pub outcomes: Vec<RepOutcome>,
}

impl WindowResult {
    pub fn finals(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.final_regret).collect()
    }
}

/// Results of an experiment, possibly cut short by a failing window.
#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub windows: Vec<WindowResult>,
    pub failure: Option<String>,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<AggregateRow> {
        self.windows.iter().map(|w| w.row.clone()).collect()
    }
}

fn adversary(cfg: &ExperimentConfig, seed: u64) -> Result<BlockSignSequence> {
    let mut rng = substream(seed, Component::Adversary, 0);
    match cfg.effective_gap() {
        Some(gap) => make_gapped_sequence(cfg.horizon, cfg.block_size(), gap, &mut rng),
        None => make_block_sequence(cfg.horizon, cfg.block_size(), &mut rng),
    }
}

fn permutation(cfg: &ExperimentConfig, window: usize, seed: u64) -> Result<PermutationPlan> {
    if window <= 1 {
        return Ok(PermutationPlan::identity(cfg.horizon));
    }
    block_permutation_with(cfg.horizon, window, seed, TailPolicy::ShortFinalBlock)
}

fn learner(cfg: &ExperimentConfig, window: usize) -> Result<Box<dyn DelayedLearner<LinearLoss>>> {
    let map = cfg.geometry.map();
    if cfg.experiment.uses_dpmd() {
        let mut dc = DpmdConfig::with_default_steps(
            &map,
            cfg.geometry.bounds(),
            cfg.horizon,
            window,
            cfg.tau,
            cfg.seed,
        )?;
        dc.tail = TailPolicy::ShortFinalBlock;
        if let Some(eta) = cfg.eta_first {
            dc.eta_first = eta;
        }
        if let Some(eta) = cfg.eta_second {
            dc.eta_second = eta;
        }
        Ok(Box::new(Dpmd::<Geometry, LinearLoss>::new(map, dc)?))
    } else {
        let eta = cfg
            .eta_first
            .unwrap_or_else(|| DelayedOgd::<Geometry>::default_step(cfg.horizon));
        Ok(Box::new(DelayedOgd::new(map, cfg.tau, eta)?))
    }
}

/// One repetition: adversary, permutation with window `window`, delayed
/// play, and regret against the best fixed point for the whole sequence.
pub fn run_single(cfg: &ExperimentConfig, window: usize, rep: usize) -> Result<RepOutcome> {
    let seed = cfg.rep_seed(rep);
    let original = adversary(cfg, seed)?.expand();
    let plan = permutation(cfg, window, seed)?;
    let permuted = apply_permutation(&original, &plan)?;

    let best = hindsight_optimum(&original);
    let best_permuted = hindsight_optimum(&permuted);
    if best.total != best_permuted.total {
        return Err(Error::Consistency(format!(
            "permutation changed the hindsight total ({} vs {})",
            best.total, best_permuted.total
        )));
    }
    let w_star = best.point[0];

    let mut learner = learner(cfg, window)?;
    let mut channel = DelayChannel::new(cfg.tau)?;
    let mut trace = RegretTrace::new(cfg.trace_stride);
    let (mut alg, mut opt) = (0.0f64, 0.0f64);
    for (i, &loss) in permuted.as_slice().iter().enumerate() {
        let t = i + 1;
        let released = channel.step(t, loss)?;
        let w = learner.play(released.map(|l| cfg.geometry.embed(l)))?;
        let x = cfg.geometry.to_interval(&w);
        alg += loss.alpha() * x;
        opt += loss.alpha() * w_star;
        if cfg.keep_traces && (t % cfg.trace_stride == 0 || t == cfg.horizon) {
            trace.rounds.push(t);
            trace.cum_regret.push(alg - opt);
        }
    }
    if !cfg.keep_traces {
        trace.rounds.push(cfg.horizon);
        trace.cum_regret.push(alg - opt);
    }
    Ok(RepOutcome {
        rep,
        seed,
        final_regret: alg - opt,
        algorithm_loss: alg,
        hindsight_total: opt,
        trace,
    })
}

/// Aggregates repetitions of one window. Order of `outcomes` is irrelevant.
pub fn aggregate(cfg: &ExperimentConfig, window: usize, outcomes: Vec<RepOutcome>) -> WindowResult {
    let finals: Vec<f64> = outcomes.iter().map(|o| o.final_regret).collect();
    let losses: Vec<f64> = outcomes.iter().map(|o| o.algorithm_loss).collect();
    let (mean, stderr) = stats::mean_and_stderr(&finals);
    let (mean_loss, stderr_loss) = stats::mean_and_stderr(&losses);
    let warning = (outcomes.len() == 1)
        .then(|| "single repetition: standard error reported as 0".to_string());
    WindowResult {
        row: AggregateRow {
            experiment: cfg.experiment.name().to_string(),
            horizon: cfg.horizon,
            tau: cfg.tau,
            window,
            reps: outcomes.len(),
            mean_regret: mean,
            stderr,
            adversarial_ref: cfg.adversarial_ref(),
            stochastic_ref: cfg.stochastic_ref(),
        },
        mean_algorithm_loss: mean_loss,
        stderr_algorithm_loss: stderr_loss,
        warning,
        outcomes,
    }
}

/// Worker pool honoring [`THREADS_ENV`].
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| invalid(format!("{THREADS_ENV} must be a nonnegative integer, got '{v}'")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// Runs every window of the grid for `cfg.reps` repetitions each. A failing
/// repetition stops the experiment; windows finished before it are kept.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let pool = thread_pool()?;
    let mut report = ExperimentReport {
        config: cfg.clone(),
        windows: Vec::with_capacity(cfg.windows.len()),
        failure: None,
    };
    for &window in &cfg.windows {
        let outcomes: Result<Vec<RepOutcome>> = pool.install(|| {
            (0..cfg.reps)
                .into_par_iter()
                .map(|rep| {
                    run_single(cfg, window, rep).map_err(|e| {
                        Error::Consistency(format!("M = {window}, rep = {rep}: {e}"))
                    })
                })
                .collect()
        });
        match outcomes {
            Ok(o) => report.windows.push(aggregate(cfg, window, o)),
            Err(e) => {
                report.failure = Some(e.to_string());
                break;
            }
        }
    }
    Ok(report)
}

//! Random-walk SGD: a single model token moves over the graph and is updated
//! with the local gradient of every node it lands on.
//!
//! Per iteration the token (1) updates the model at its current node, then
//! (2) either takes one Metropolis-Hastings step or, for MHLJ with
//! probability `p_j(t)`, a Lévy jump whose intermediate hops perform no
//! updates.
//!
//! RNG stream contract: the stationary/uniform start draw comes first; then
//! per iteration the jump coin is drawn only when `p_j(t) > 0`, followed by
//! the draws of the MH step or of the jump. MHLJ with `p_j = 0` therefore
//! replays WeightRW exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::{stationary_distribution, PowerOptions};
use crate::data::ProblemInstance;
use crate::error::{invalid, Result};
use crate::kernels::{
    build_mhlj_matrix, build_mixed_mh, build_uniform_mh, build_weighted_mh, mixed_target, JumpParams,
    KernelKind, LevySampler, MhSampler, TransitionKernel, DENSE_LIMIT,
};
use crate::scalar::{norm_sq, sq_dist, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Strategy<T> {
    UnifRw,
    WeightRw,
    MixedRw { lambda: T },
    Mhlj(JumpParams<T>),
}

impl<T: Real> Strategy<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::UnifRw => "unif_rw",
            Strategy::WeightRw => "weight_rw",
            Strategy::MixedRw { .. } => "mixed_rw",
            Strategy::Mhlj(_) => "mhlj",
        }
    }

    /// Whether updates are reweighted; such strategies tolerate `gamma ~ 1/L_bar`.
    pub fn is_weighted(&self) -> bool {
        !matches!(self, Strategy::UnifRw)
    }

    /// Kernel the walk follows when no jump schedule is applied.
    pub fn kernel_kind(&self) -> KernelKind<T> {
        match *self {
            Strategy::UnifRw => KernelKind::UniformMh,
            Strategy::WeightRw => KernelKind::WeightedMh,
            Strategy::MixedRw { lambda } => KernelKind::MixedMh { lambda },
            Strategy::Mhlj(j) => KernelKind::Mhlj(j),
        }
    }

    /// Default step size: `c / L_bar` for WeightRW and MHLJ, `c / L_max` for
    /// uniform sampling, and `c / max_v w_v L_v` for MixedRW, which
    /// interpolates between the two.
    pub fn default_gamma(&self, instance: &ProblemInstance<T>, c: T) -> T {
        match self {
            Strategy::UnifRw => c / instance.l_max(),
            Strategy::WeightRw | Strategy::Mhlj(_) => c / instance.l_bar(),
            Strategy::MixedRw { .. } => {
                let peak = update_weights(instance, self)
                    .iter()
                    .zip(instance.lipschitz())
                    .map(|(&w, &l)| w * l)
                    .fold(T::zero(), T::max);
                c / peak
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Strategy::MixedRw { lambda } if !(lambda >= T::zero() && lambda <= T::one()) => {
                Err(invalid(format!("lambda must lie in [0, 1], got {lambda}")))
            }
            Strategy::Mhlj(j) => j.validate(),
            _ => Ok(()),
        }
    }
}

/// Builds the dense kernel a strategy samples from.
pub fn strategy_kernel<T: Real>(
    instance: &ProblemInstance<T>,
    strategy: &Strategy<T>,
) -> Result<TransitionKernel<T>> {
    let g = instance.graph();
    let l = instance.lipschitz();
    match *strategy {
        Strategy::UnifRw => build_uniform_mh(g),
        Strategy::WeightRw => build_weighted_mh(g, l),
        Strategy::MixedRw { lambda } => build_mixed_mh(g, l, lambda),
        Strategy::Mhlj(j) => build_mhlj_matrix(g, l, j),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartNode {
    StationarySample,
    UniformSample,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PjSchedule<T> {
    Constant,
    /// `p_j0 / (1 + t / t0)`; `t0` defaults to a tenth of the iteration count.
    Decay { p_j0: T, t0: Option<T> },
}

/// Jump probability at iteration `t`. `base` is the strategy's constant `p_j`.
pub fn pj_at<T: Real>(schedule: &PjSchedule<T>, base: T, t: usize, horizon: usize) -> T {
    match *schedule {
        PjSchedule::Constant => base,
        PjSchedule::Decay { p_j0, t0 } => {
            let t0 = t0.unwrap_or_else(|| T::from_usize_lossy(horizon.max(10)) / T::lit(10.0));
            p_j0 / (T::one() + T::from_usize_lossy(t) / t0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SwitchRule<T> {
    /// Switch once the mean of the last `window` reweighted gradients has norm
    /// at most `tau * (1 + |first gradient|)`.
    Window { window: usize, tau: T },
    /// Switch unconditionally before iteration `step`.
    FixedStep { step: usize },
}

impl<T: Real> SwitchRule<T> {
    /// Defaults: 200-gradient window, relative threshold 0.05.
    pub fn default_window() -> Self {
        SwitchRule::Window {
            window: 200,
            tau: T::lit(0.05),
        }
    }
}

/// Decision of a windowed switch rule. `recent` holds at least the last
/// `window` reweighted gradients (oldest first); fewer means no switch yet.
pub fn apply_switch_rule<T: Real>(recent: &[Vec<T>], first_grad_norm: T, rule: &SwitchRule<T>) -> bool {
    match *rule {
        SwitchRule::FixedStep { .. } => false,
        SwitchRule::Window { window, tau } => {
            if window == 0 || recent.len() < window {
                return false;
            }
            let tail = &recent[recent.len() - window..];
            let dim = tail[0].len();
            let mut mean = vec![T::zero(); dim];
            for g in tail {
                for (m, &x) in mean.iter_mut().zip(g) {
                    *m += x;
                }
            }
            let w = T::from_usize_lossy(window);
            norm_sq(&mean).sqrt() / w <= tau * (T::one() + first_grad_norm)
        }
    }
}

/// Streaming form of the window rule.
#[derive(Debug, Clone)]
struct SwitchMonitor<T> {
    window: usize,
    tau: T,
    buf: Vec<Vec<T>>,
    head: usize,
    filled: usize,
    sum: Vec<T>,
    first_norm: Option<T>,
}

impl<T: Real> SwitchMonitor<T> {
    fn new(window: usize, tau: T, dim: usize) -> Self {
        SwitchMonitor {
            window,
            tau,
            buf: vec![vec![T::zero(); dim]; window],
            head: 0,
            filled: 0,
            sum: vec![T::zero(); dim],
            first_norm: None,
        }
    }

    fn push(&mut self, g: &[T]) -> bool {
        self.first_norm.get_or_insert_with(|| norm_sq(g).sqrt());
        let slot = &mut self.buf[self.head];
        for ((s, old), &new) in self.sum.iter_mut().zip(slot.iter_mut()).zip(g) {
            *s += new - *old;
            *old = new;
        }
        self.head = (self.head + 1) % self.window;
        self.filled = (self.filled + 1).min(self.window);
        if self.filled < self.window {
            return false;
        }
        // Re-sum once per wrap so rounding in the running sum cannot drift.
        if self.head == 0 {
            for (i, s) in self.sum.iter_mut().enumerate() {
                *s = self.buf.iter().map(|b| b[i]).sum();
            }
        }
        let mean_norm = norm_sq(&self.sum).sqrt() / T::from_usize_lossy(self.window);
        mean_norm <= self.tau * (T::one() + self.first_norm.unwrap_or(T::zero()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerConfig<T> {
    pub strategy: Strategy<T>,
    pub gamma: T,
    pub iterations: usize,
    pub start: StartNode,
    pub record_every: usize,
    pub pj_schedule: PjSchedule<T>,
    pub switch_rule: Option<SwitchRule<T>>,
    /// Step size after switching to uniform sampling; defaults to
    /// `gamma * L_bar / L_max`, the same constant relative to `L_max`.
    pub switch_gamma: Option<T>,
}

impl<T: Real> TrainerConfig<T> {
    /// Constant schedule, stationary start, no switching, every step recorded.
    pub fn new(strategy: Strategy<T>, gamma: T, iterations: usize) -> Self {
        TrainerConfig {
            strategy,
            gamma,
            iterations,
            start: StartNode::StationarySample,
            record_every: 1,
            pj_schedule: PjSchedule::Constant,
            switch_rule: None,
            switch_gamma: None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.strategy.validate()?;
        if !(self.gamma > T::zero() && self.gamma.is_finite()) {
            return Err(invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.record_every == 0 {
            return Err(invalid("record_every must be >= 1"));
        }
        if let StartNode::Fixed(v) = self.start {
            if v >= n {
                return Err(invalid(format!("start node {v} out of range for n = {n}")));
            }
        }
        if let PjSchedule::Decay { p_j0, t0 } = self.pj_schedule {
            if !matches!(self.strategy, Strategy::Mhlj(_)) {
                return Err(invalid("a p_j decay schedule requires the mhlj strategy"));
            }
            if !(p_j0 >= T::zero() && p_j0 <= T::one()) {
                return Err(invalid(format!("p_j0 must lie in [0, 1], got {p_j0}")));
            }
            if t0.is_some_and(|t0| !(t0 > T::zero())) {
                return Err(invalid("decay horizon t0 must be positive"));
            }
        }
        if let Some(SwitchRule::Window { window, tau }) = self.switch_rule {
            if window == 0 {
                return Err(invalid("switch window must be >= 1"));
            }
            if !(tau > T::zero()) {
                return Err(invalid("switch threshold tau must be positive"));
            }
        }
        if let Some(g) = self.switch_gamma {
            if !(g > T::zero()) {
                return Err(invalid("switch_gamma must be positive"));
            }
        }
        Ok(())
    }

    fn base_pj(&self) -> T {
        match self.strategy {
            Strategy::Mhlj(j) => j.p_j,
            _ => T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord<T> {
    pub t: usize,
    pub node: usize,
    /// `|x^t - x*|^2`; NaN when the instance has no closed-form optimum.
    pub sq_error: T,
    pub global_loss: T,
    /// Node-to-node transmissions so far, jump hops counted individually.
    pub cumulative_transitions: u64,
    /// Whether the token reached `node` through a jump.
    pub jumped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult<T> {
    pub trace: Vec<TraceRecord<T>>,
    pub final_model: Vec<T>,
    /// Nodes at which the updates happened, `v_0 .. v_T` (length `T + 1`).
    pub visit_log: Vec<usize>,
    pub config: TrainerConfig<T>,
    pub seed: Option<u64>,
    /// Iteration at which the run switched to uniform sampling.
    pub switched_at: Option<usize>,
    pub gradient_evaluations: usize,
    pub jumps: u64,
    /// Sum and sum of squares of the per-update transition counts.
    pub transitions: u64,
    pub transitions_sq: u64,
}

impl<T: Real> RunResult<T> {
    pub fn final_record(&self) -> Option<&TraceRecord<T>> {
        self.trace.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommunicationStats {
    pub mean_transitions_per_update: f64,
    /// Standard error of the mean, treating updates as independent.
    pub std_error: f64,
    /// `1 + p_j (1/p_d - 1)` for MHLJ (with the initial `p_j` of a decay
    /// schedule), 1 otherwise.
    pub bound: f64,
}

pub fn communication_stats<T: Real>(result: &RunResult<T>) -> CommunicationStats {
    let updates = result.config.iterations as f64;
    let bound = match (result.config.strategy, result.config.pj_schedule) {
        (Strategy::Mhlj(j), PjSchedule::Constant) => j.communication_bound().as_f64(),
        (Strategy::Mhlj(j), PjSchedule::Decay { p_j0, .. }) => {
            JumpParams { p_j: p_j0, ..j }.communication_bound().as_f64()
        }
        _ => 1.0,
    };
    if updates == 0.0 {
        return CommunicationStats {
            mean_transitions_per_update: 0.0,
            std_error: 0.0,
            bound,
        };
    }
    let mean = result.transitions as f64 / updates;
    let var = (result.transitions_sq as f64 / updates - mean * mean).max(0.0);
    CommunicationStats {
        mean_transitions_per_update: mean,
        std_error: (var / updates).sqrt(),
        bound,
    }
}

/// Multiplier applied to the local gradient of node `v`.
fn update_weights<T: Real>(instance: &ProblemInstance<T>, strategy: &Strategy<T>) -> Vec<T> {
    let l = instance.lipschitz();
    match *strategy {
        Strategy::UnifRw => vec![T::one(); l.len()],
        Strategy::WeightRw | Strategy::Mhlj(_) => l.iter().map(|&lv| instance.l_bar() / lv).collect(),
        Strategy::MixedRw { lambda } => {
            let n = T::from_usize_lossy(l.len());
            let total: T = mixed_target(l, lambda).iter().copied().sum();
            mixed_target(l, lambda)
                .into_iter()
                .map(|p| T::one() / (n * p / total))
                .collect()
        }
    }
}

/// One model update at node `v`: `x - gamma * w_v * grad f_v(x)` with
/// `w_v = L_bar / L_v` (WeightRW, MHLJ), `1 / (n pi_lambda(v))` (MixedRW) or 1.
pub fn update_step<T: Real>(
    instance: &ProblemInstance<T>,
    strategy: &Strategy<T>,
    v: usize,
    x: &[T],
    gamma: T,
) -> Result<Vec<T>> {
    strategy.validate()?;
    let grad = instance.local_grad(v, x)?;
    let w = update_weights(instance, strategy)[v];
    Ok(x.iter().zip(grad).map(|(&xi, g)| xi - gamma * w * g).collect())
}

/// A prepared training run: samplers, update weights and the start law are
/// computed once and shared by every seed.
#[derive(Debug, Clone)]
pub struct Trainer<'a, T> {
    instance: &'a ProblemInstance<T>,
    config: TrainerConfig<T>,
    mh: MhSampler<'a, T>,
    uniform: MhSampler<'a, T>,
    levy: Option<LevySampler<'a>>,
    weights: Vec<T>,
    start_cdf: Option<Vec<f64>>,
}

impl<'a, T: Real> Trainer<'a, T> {
    pub fn new(instance: &'a ProblemInstance<T>, config: TrainerConfig<T>) -> Result<Self> {
        let start = match config.start {
            StartNode::StationarySample => {
                config.validate(instance.n())?;
                Some(Self::stationary_start(instance, &config)?)
            }
            _ => None,
        };
        Self::build(instance, config, start)
    }

    /// Like [`Trainer::new`] but with a caller-supplied start distribution
    /// (used only under [`StartNode::StationarySample`]).
    pub fn with_start_distribution(
        instance: &'a ProblemInstance<T>,
        config: TrainerConfig<T>,
        start: &[T],
    ) -> Result<Self> {
        if start.len() != instance.n() {
            return Err(invalid("start distribution has the wrong length"));
        }
        Self::build(instance, config, Some(start.to_vec()))
    }

    fn stationary_start(instance: &ProblemInstance<T>, config: &TrainerConfig<T>) -> Result<Vec<T>> {
        let mut strategy = config.strategy;
        if let Strategy::Mhlj(ref mut j) = strategy {
            j.p_j = pj_at(&config.pj_schedule, j.p_j, 0, config.iterations);
        }
        if instance.n() > DENSE_LIMIT {
            // Beyond the dense limit only the MH targets are available.
            let l = instance.lipschitz();
            return match strategy {
                Strategy::UnifRw => Ok(vec![T::one(); l.len()]),
                Strategy::WeightRw => Ok(l.to_vec()),
                Strategy::MixedRw { lambda } => Ok(mixed_target(l, lambda)),
                Strategy::Mhlj(_) => Err(invalid(
                    "stationary start for mhlj needs a dense kernel; use uniform_sample",
                )),
            };
        }
        let kernel = strategy_kernel(instance, &strategy)?;
        stationary_distribution(&kernel, PowerOptions::default())
    }

    fn build(instance: &'a ProblemInstance<T>, config: TrainerConfig<T>, start: Option<Vec<T>>) -> Result<Self> {
        config.validate(instance.n())?;
        let graph = instance.graph();
        let l = instance.lipschitz();
        let mh = match config.strategy {
            Strategy::UnifRw => MhSampler::uniform(graph),
            Strategy::WeightRw | Strategy::Mhlj(_) => MhSampler::weighted(graph, l)?,
            Strategy::MixedRw { lambda } => MhSampler::mixed(graph, l, lambda)?,
        };
        let levy = match config.strategy {
            Strategy::Mhlj(j) => Some(LevySampler::new(graph, j.p_d, j.r)?),
            _ => None,
        };
        let start_cdf = match (config.start, start) {
            (StartNode::StationarySample, Some(pi)) => {
                let mut acc = 0.0;
                let mut cdf: Vec<f64> = pi
                    .iter()
                    .map(|p| {
                        acc += p.as_f64().max(0.0);
                        acc
                    })
                    .collect();
                if !(acc > 0.0) {
                    return Err(invalid("start distribution has no mass"));
                }
                for c in cdf.iter_mut() {
                    *c /= acc;
                }
                *cdf.last_mut().expect("n >= 1") = f64::INFINITY;
                Some(cdf)
            }
            _ => None,
        };
        Ok(Trainer {
            instance,
            weights: update_weights(instance, &config.strategy),
            uniform: MhSampler::uniform(graph),
            config,
            mh,
            levy,
            start_cdf,
        })
    }

    pub fn config(&self) -> &TrainerConfig<T> {
        &self.config
    }

    fn record(&self, t: usize, node: usize, x: &[T], transitions: u64, jumped: bool) -> TraceRecord<T> {
        TraceRecord {
            t,
            node,
            sq_error: self
                .instance
                .x_star()
                .map_or(T::nan(), |xs| sq_dist(x, xs)),
            global_loss: self.instance.global_loss_unchecked(x),
            cumulative_transitions: transitions,
            jumped,
        }
    }

    pub fn run_seeded(&self, seed: u64) -> RunResult<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut result = self.run(&mut rng);
        result.seed = Some(seed);
        result
    }

    pub fn run<R: Rng + ?Sized>(&self, rng: &mut R) -> RunResult<T> {
        let inst = self.instance;
        let cfg = &self.config;
        let n = inst.n();
        let dim = inst.dim();
        let total = cfg.iterations;

        let mut v = match cfg.start {
            StartNode::Fixed(v) => v,
            StartNode::UniformSample => rng.random_range(0..n),
            StartNode::StationarySample => {
                let u = rng.random::<f64>();
                let cdf = self.start_cdf.as_ref().expect("built with a start law");
                cdf.iter().position(|&c| u < c).expect("last bucket is infinite")
            }
        };

        let mut x = vec![T::zero(); dim];
        let mut mh = &self.mh;
        let mut levy = self.levy.as_ref();
        let mut weights: Option<&[T]> = Some(&self.weights);
        let mut gamma = cfg.gamma;
        let base_pj = cfg.base_pj();

        let mut monitor = match cfg.switch_rule {
            Some(SwitchRule::Window { window, tau }) => Some(SwitchMonitor::new(window, tau, dim)),
            _ => None,
        };
        let fixed_switch = match cfg.switch_rule {
            Some(SwitchRule::FixedStep { step }) => Some(step),
            _ => None,
        };
        let mut switched_at = None;
        let mut scratch = vec![T::zero(); dim];

        let mut transitions: u64 = 0;
        let mut transitions_sq: u64 = 0;
        let mut jumps: u64 = 0;
        let mut jumped = false;
        let mut trace = Vec::with_capacity(total / cfg.record_every + 2);
        let mut visit_log = Vec::with_capacity(total + 1);

        for t in 0..total {
            if t % cfg.record_every == 0 {
                trace.push(self.record(t, v, &x, transitions, jumped));
            }
            visit_log.push(v);

            if switched_at.is_none() && fixed_switch == Some(t) {
                switched_at = Some(t);
            }
            if switched_at == Some(t) {
                mh = &self.uniform;
                levy = None;
                weights = None;
                gamma = cfg
                    .switch_gamma
                    .unwrap_or(cfg.gamma * inst.l_bar() / inst.l_max());
                monitor = None;
            }

            // Model update.
            let w = weights.map_or(T::one(), |ws| ws[v]);
            let coeff = w * inst.grad_coeff(v, &x);
            let features = &inst.data()[v].features;
            for (xi, &a) in x.iter_mut().zip(features) {
                *xi -= gamma * coeff * a;
            }
            if let Some(m) = monitor.as_mut() {
                for (s, &a) in scratch.iter_mut().zip(features) {
                    *s = coeff * a;
                }
                if m.push(&scratch) {
                    switched_at = Some(t + 1);
                }
            }

            // Token movement.
            let p_j = match levy {
                Some(_) => pj_at(&cfg.pj_schedule, base_pj, t, total),
                None => T::zero(),
            };
            let take_jump = p_j > T::zero() && T::lit(rng.random::<f64>()) < p_j;
            let hops = if take_jump {
                let (dest, hops) = levy.expect("jump implies sampler").jump(v, rng);
                v = dest;
                jumps += 1;
                hops as u64
            } else {
                v = mh.step(v, rng);
                1
            };
            jumped = take_jump;
            transitions += hops;
            transitions_sq += hops * hops;
        }
        trace.push(self.record(total, v, &x, transitions, jumped));
        visit_log.push(v);

        RunResult {
            trace,
            final_model: x,
            visit_log,
            config: cfg.clone(),
            seed: None,
            switched_at,
            gradient_evaluations: total,
            jumps,
            transitions,
            transitions_sq,
        }
    }
}

/// Prepares a [`Trainer`] and runs it once with the caller's RNG.
pub fn run<T: Real, R: Rng + ?Sized>(
    instance: &ProblemInstance<T>,
    config: &TrainerConfig<T>,
    rng: &mut R,
) -> Result<RunResult<T>> {
    Ok(Trainer::new(instance, config.clone())?.run(rng))
}

//! Transition kernels in dense form, and the equivalent samplers that use
//! only local information (a node's own neighbour list and the weights of
//! those neighbours).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::matrix::DenseMatrix;
use crate::scalar::Real;

/// Largest node count for which dense kernels are materialised.
pub const DENSE_LIMIT: usize = 2000;

/// Lévy-jump parameters: jump probability, truncated-geometric parameter
/// and truncation horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpParams<T> {
    pub p_j: T,
    pub p_d: T,
    pub r: usize,
}

impl<T: Real> Default for JumpParams<T> {
    fn default() -> Self {
        JumpParams {
            p_j: T::lit(0.1),
            p_d: T::lit(0.5),
            r: 10,
        }
    }
}

impl<T: Real> JumpParams<T> {
    pub fn new(p_j: T, p_d: T, r: usize) -> Result<Self> {
        let params = JumpParams { p_j, p_d, r };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_j >= T::zero() && self.p_j <= T::one()) {
            return Err(invalid(format!("p_j must lie in [0, 1], got {}", self.p_j)));
        }
        validate_levy(self.p_d, self.r)
    }

    /// Upper bound on expected transitions per update, `1 + p_j (1/p_d - 1)`.
    pub fn communication_bound(&self) -> T {
        T::one() + self.p_j * (T::one() / self.p_d - T::one())
    }
}

fn validate_levy<T: Real>(p_d: T, r: usize) -> Result<()> {
    if !(p_d > T::zero() && p_d < T::one()) {
        return Err(invalid(format!("p_d must lie in (0, 1), got {p_d}")));
    }
    if r == 0 {
        return Err(invalid("jump horizon r must be >= 1"));
    }
    Ok(())
}

/// `P(d = i) = p_d (1 - p_d)^(i-1) / (1 - (1 - p_d)^r)` for `i = 1..=r`.
pub fn truncated_geometric_weights<T: Real>(p_d: T, r: usize) -> Vec<T> {
    let q = T::one() - p_d;
    let norm = T::one() - q.powi(r as i32);
    let mut w = Vec::with_capacity(r);
    let mut qi = T::one();
    for _ in 0..r {
        w.push(p_d * qi / norm);
        qi *= q;
    }
    w
}

/// Mean of the truncated geometric jump length.
pub fn truncated_geometric_mean<T: Real>(p_d: T, r: usize) -> T {
    truncated_geometric_weights(p_d, r)
        .into_iter()
        .enumerate()
        .map(|(i, w)| T::from_usize_lossy(i + 1) * w)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind<T> {
    UniformMh,
    WeightedMh,
    MixedMh { lambda: T },
    Levy { p_d: T, r: usize },
    Mhlj(JumpParams<T>),
    /// A matrix of unknown provenance, e.g. read from disk.
    Custom,
}

impl<T: Real> KernelKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::UniformMh => "unif_mh",
            KernelKind::WeightedMh => "weight_mh",
            KernelKind::MixedMh { .. } => "mixed_mh",
            KernelKind::Levy { .. } => "levy",
            KernelKind::Mhlj(_) => "mhlj",
            KernelKind::Custom => "custom",
        }
    }

    /// `key=value` pairs of the scalar parameters, `;`-separated.
    pub fn params_string(&self) -> String {
        match self {
            KernelKind::UniformMh | KernelKind::WeightedMh | KernelKind::Custom => String::new(),
            KernelKind::MixedMh { lambda } => format!("lambda={lambda}"),
            KernelKind::Levy { p_d, r } => format!("p_d={p_d};r={r}"),
            KernelKind::Mhlj(j) => format!("p_j={};p_d={};r={}", j.p_j, j.p_d, j.r),
        }
    }

    /// Whether the kernel is a Metropolis-Hastings construction and hence
    /// reversible with respect to its target.
    pub fn is_mh(&self) -> bool {
        matches!(
            self,
            KernelKind::UniformMh | KernelKind::WeightedMh | KernelKind::MixedMh { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionKernel<T> {
    kind: KernelKind<T>,
    matrix: DenseMatrix<T>,
}

impl<T: Real> TransitionKernel<T> {
    /// Wraps an arbitrary row-stochastic matrix, e.g. one read from disk.
    pub fn from_matrix(kind: KernelKind<T>, matrix: DenseMatrix<T>) -> Result<Self> {
        let tol = T::lit(1e-9);
        for i in 0..matrix.n() {
            let row = matrix.row(i);
            if row.iter().any(|&x| !(x >= T::zero()) || !x.is_finite()) {
                return Err(invalid(format!("row {i} has a negative or non-finite entry")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(invalid(format!("row {i} sums to {s}, not 1")));
            }
        }
        Ok(TransitionKernel { kind, matrix })
    }

    pub fn kind(&self) -> &KernelKind<T> {
        &self.kind
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &DenseMatrix<T> {
        &self.matrix
    }

    pub fn row(&self, v: usize) -> &[T] {
        self.matrix.row(v)
    }

    pub fn get(&self, v: usize, u: usize) -> T {
        self.matrix[(v, u)]
    }
}

fn check_dense(graph: &Graph) -> Result<()> {
    if graph.n() > DENSE_LIMIT {
        return Err(invalid(format!(
            "dense kernels are limited to n <= {DENSE_LIMIT}, got {}",
            graph.n()
        )));
    }
    Ok(())
}

fn check_weights<T: Real>(graph: &Graph, l: &[T]) -> Result<()> {
    if l.len() != graph.n() {
        return Err(invalid(format!("{} weights for {} nodes", l.len(), graph.n())));
    }
    if let Some(v) = l.iter().position(|&x| !(x > T::zero() && x.is_finite())) {
        return Err(invalid(format!("weight of node {v} must be positive, got {}", l[v])));
    }
    Ok(())
}

/// MH acceptance ratio for a move `v -> u` under target weights `pi`.
#[inline]
fn acceptance<T: Real>(graph: &Graph, pi: &[T], v: usize, u: usize) -> T {
    let dv = T::from_usize_lossy(graph.deg(v));
    let du = T::from_usize_lossy(graph.deg(u));
    (dv * pi[u] / (du * pi[v])).min(T::one())
}

fn mh_matrix<T: Real>(graph: &Graph, pi: &[T]) -> DenseMatrix<T> {
    let n = graph.n();
    let mut m = DenseMatrix::zeros(n);
    for v in 0..n {
        let deg = graph.deg(v);
        let mut off = T::zero();
        for &u in graph.adj(v) {
            let p = acceptance(graph, pi, v, u) / T::from_usize_lossy(deg);
            m[(v, u)] = p;
            off += p;
        }
        m[(v, v)] = (T::one() - off).max(T::zero());
    }
    m
}

/// `lambda / n + (1 - lambda) L_v / sum(L)`.
pub fn mixed_target<T: Real>(l: &[T], lambda: T) -> Vec<T> {
    let total: T = l.iter().copied().sum();
    let uniform = lambda / T::from_usize_lossy(l.len());
    l.iter()
        .map(|&x| uniform + (T::one() - lambda) * x / total)
        .collect()
}

/// `L / sum(L)`.
pub fn weighted_target<T: Real>(l: &[T]) -> Vec<T> {
    let total: T = l.iter().copied().sum();
    l.iter().map(|&x| x / total).collect()
}

pub fn build_uniform_mh<T: Real>(graph: &Graph) -> Result<TransitionKernel<T>> {
    check_dense(graph)?;
    let pi = vec![T::one(); graph.n()];
    Ok(TransitionKernel {
        kind: KernelKind::UniformMh,
        matrix: mh_matrix(graph, &pi),
    })
}

/// Metropolis-Hastings kernel whose stationary law is proportional to `l`.
pub fn build_weighted_mh<T: Real>(graph: &Graph, l: &[T]) -> Result<TransitionKernel<T>> {
    check_dense(graph)?;
    check_weights(graph, l)?;
    Ok(TransitionKernel {
        kind: KernelKind::WeightedMh,
        matrix: mh_matrix(graph, l),
    })
}

pub fn build_mixed_mh<T: Real>(graph: &Graph, l: &[T], lambda: T) -> Result<TransitionKernel<T>> {
    check_dense(graph)?;
    check_weights(graph, l)?;
    if !(lambda >= T::zero() && lambda <= T::one()) {
        return Err(invalid(format!("lambda must lie in [0, 1], got {lambda}")));
    }
    Ok(TransitionKernel {
        kind: KernelKind::MixedMh { lambda },
        matrix: mh_matrix(graph, &mixed_target(l, lambda)),
    })
}

/// Jump kernel `sum_i w_i Q^i` with `Q = diag(A 1)^-1 A`, `A = A_adj + I`,
/// and truncated-geometric weights `w_i`: the exact destination law of
/// [`LevySampler::jump`].
///
/// On regular graphs this equals the walk-count form of
/// [`build_levy_matrix_walk_normalized`].
pub fn build_levy_matrix<T: Real>(graph: &Graph, p_d: T, r: usize) -> Result<TransitionKernel<T>> {
    check_dense(graph)?;
    validate_levy(p_d, r)?;
    let n = graph.n();
    let weights = truncated_geometric_weights(p_d, r);
    let mut power = DenseMatrix::identity(n);
    let mut out = DenseMatrix::zeros(n);
    for &w in &weights {
        // power <- Q * power: row i averages the rows of its closed neighbourhood.
        let mut next = DenseMatrix::zeros(n);
        for i in 0..n {
            let inv = T::one() / T::from_usize_lossy(graph.deg(i) + 1);
            let dst = next.row_mut(i);
            for k in graph.adj(i).iter().copied().chain(std::iter::once(i)) {
                for (d, &x) in dst.iter_mut().zip(power.row(k)) {
                    *d += inv * x;
                }
            }
        }
        power = next;
        for i in 0..n {
            for (o, &x) in out.row_mut(i).iter_mut().zip(power.row(i)) {
                *o += w * x;
            }
        }
    }
    Ok(TransitionKernel {
        kind: KernelKind::Levy { p_d, r },
        matrix: out,
    })
}

/// `sum_i w_i diag(A^i 1)^-1 A^i`: every length-`i` walk from `v` equally
/// likely. Differs from [`build_levy_matrix`] on irregular graphs, where the
/// hop-by-hop procedure favours walks through low-degree nodes.
pub fn build_levy_matrix_walk_normalized<T: Real>(
    graph: &Graph,
    p_d: T,
    r: usize,
) -> Result<TransitionKernel<T>> {
    check_dense(graph)?;
    validate_levy(p_d, r)?;
    let n = graph.n();
    let weights = truncated_geometric_weights(p_d, r);
    let mut power = DenseMatrix::identity(n);
    let mut out = DenseMatrix::zeros(n);
    for &w in &weights {
        let mut next = DenseMatrix::zeros(n);
        for i in 0..n {
            let dst = next.row_mut(i);
            for k in graph.adj(i).iter().copied().chain(std::iter::once(i)) {
                for (d, &x) in dst.iter_mut().zip(power.row(k)) {
                    *d += x;
                }
            }
        }
        // Uniform rescaling leaves the row normalisation unchanged and keeps
        // walk counts from overflowing.
        let peak = next.as_slice().iter().copied().fold(T::zero(), T::max);
        power = next.map(|x| x / peak);
        for i in 0..n {
            let s: T = power.row(i).iter().copied().sum();
            let scale = w / s;
            for (o, &x) in out.row_mut(i).iter_mut().zip(power.row(i)) {
                *o += scale * x;
            }
        }
    }
    Ok(TransitionKernel {
        kind: KernelKind::Levy { p_d, r },
        matrix: out,
    })
}

/// `(1 - p_j) P_IS + p_j P_Levy`, entrywise.
pub fn build_mhlj_matrix<T: Real>(
    graph: &Graph,
    l: &[T],
    params: JumpParams<T>,
) -> Result<TransitionKernel<T>> {
    params.validate()?;
    let is = build_weighted_mh(graph, l)?;
    let levy = build_levy_matrix(graph, params.p_d, params.r)?;
    Ok(mhlj_combine(&is, &levy, params))
}

/// Combines already-built constituents; both must be on the same graph.
pub fn mhlj_combine<T: Real>(
    is: &TransitionKernel<T>,
    levy: &TransitionKernel<T>,
    params: JumpParams<T>,
) -> TransitionKernel<T> {
    let keep = T::one() - params.p_j;
    TransitionKernel {
        kind: KernelKind::Mhlj(params),
        matrix: is
            .matrix
            .zip_map(&levy.matrix, |a, b| keep * a + params.p_j * b),
    }
}

/// Local Metropolis-Hastings step: propose a uniform neighbour, accept with
/// `min{1, deg(v) pi(u) / (deg(u) pi(v))}`, otherwise stay.
#[derive(Debug, Clone)]
pub struct MhSampler<'g, T> {
    graph: &'g Graph,
    target: Vec<T>,
}

impl<'g, T: Real> MhSampler<'g, T> {
    pub fn uniform(graph: &'g Graph) -> Self {
        MhSampler {
            graph,
            target: vec![T::one(); graph.n()],
        }
    }

    pub fn weighted(graph: &'g Graph, l: &[T]) -> Result<Self> {
        check_weights(graph, l)?;
        Ok(MhSampler {
            graph,
            target: l.to_vec(),
        })
    }

    pub fn mixed(graph: &'g Graph, l: &[T], lambda: T) -> Result<Self> {
        check_weights(graph, l)?;
        if !(lambda >= T::zero() && lambda <= T::one()) {
            return Err(invalid(format!("lambda must lie in [0, 1], got {lambda}")));
        }
        Ok(MhSampler {
            graph,
            target: mixed_target(l, lambda),
        })
    }

    /// Unnormalised target weights.
    pub fn target(&self) -> &[T] {
        &self.target
    }

    #[inline]
    pub fn step<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> usize {
        let ns = self.graph.adj(v);
        if ns.is_empty() {
            return v;
        }
        let u = ns[rng.random_range(0..ns.len())];
        let a = acceptance(self.graph, &self.target, v, u);
        if a >= T::one() || T::lit(rng.random::<f64>()) < a {
            u
        } else {
            v
        }
    }
}

/// Procedural Lévy jump: draw a length `d` from the truncated geometric law,
/// then take `d` uniform hops over the closed neighbourhood (self included).
#[derive(Debug, Clone)]
pub struct LevySampler<'g> {
    graph: &'g Graph,
    cdf: Vec<f64>,
}

impl<'g> LevySampler<'g> {
    pub fn new<T: Real>(graph: &'g Graph, p_d: T, r: usize) -> Result<Self> {
        validate_levy(p_d, r)?;
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = truncated_geometric_weights(p_d.as_f64(), r)
            .into_iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        // Guards the inverse-CDF lookup against rounding in the last bucket.
        *cdf.last_mut().expect("r >= 1") = f64::INFINITY;
        Ok(LevySampler { graph, cdf })
    }

    pub fn horizon(&self) -> usize {
        self.cdf.len()
    }

    pub fn sample_length<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>();
        self.cdf.iter().position(|&c| u < c).expect("last bucket is infinite") + 1
    }

    #[inline]
    pub fn hop<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> usize {
        let ns = self.graph.adj(v);
        let k = rng.random_range(0..=ns.len());
        if k == ns.len() {
            v
        } else {
            ns[k]
        }
    }

    /// Returns the destination and the number of hops taken.
    pub fn jump<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> (usize, usize) {
        let d = self.sample_length(rng);
        let mut cur = v;
        for _ in 0..d {
            cur = self.hop(cur, rng);
        }
        (cur, d)
    }
}

/// One-shot convenience wrapper around [`LevySampler::jump`].
pub fn sample_levy_jump<T: Real, R: Rng + ?Sized>(
    graph: &Graph,
    p_d: T,
    r: usize,
    v: usize,
    rng: &mut R,
) -> Result<(usize, usize)> {
    graph.neighbors(v)?;
    Ok(LevySampler::new(graph, p_d, r)?.jump(v, rng))
}

/// Outcome of one token movement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub node: usize,
    pub hops: usize,
    pub jumped: bool,
}

/// Procedural counterpart of every [`KernelKind`].
#[derive(Debug, Clone)]
pub enum StepSampler<'g, T> {
    Mh(MhSampler<'g, T>),
    Levy(LevySampler<'g>),
    Mhlj {
        mh: MhSampler<'g, T>,
        levy: LevySampler<'g>,
        p_j: T,
    },
}

impl<'g, T: Real> StepSampler<'g, T> {
    /// `l` is ignored by the kinds that do not use weights.
    pub fn for_kind(graph: &'g Graph, l: &[T], kind: &KernelKind<T>) -> Result<Self> {
        Ok(match *kind {
            KernelKind::UniformMh => StepSampler::Mh(MhSampler::uniform(graph)),
            KernelKind::WeightedMh => StepSampler::Mh(MhSampler::weighted(graph, l)?),
            KernelKind::MixedMh { lambda } => StepSampler::Mh(MhSampler::mixed(graph, l, lambda)?),
            KernelKind::Levy { p_d, r } => StepSampler::Levy(LevySampler::new(graph, p_d, r)?),
            KernelKind::Mhlj(j) => {
                j.validate()?;
                StepSampler::Mhlj {
                    mh: MhSampler::weighted(graph, l)?,
                    levy: LevySampler::new(graph, j.p_d, j.r)?,
                    p_j: j.p_j,
                }
            }
            KernelKind::Custom => return Err(Error::Unsupported("no sampler for a custom kernel".into())),
        })
    }

    pub fn step<R: Rng + ?Sized>(&self, v: usize, rng: &mut R) -> Move {
        match self {
            StepSampler::Mh(mh) => Move {
                node: mh.step(v, rng),
                hops: 1,
                jumped: false,
            },
            StepSampler::Levy(levy) => {
                let (node, hops) = levy.jump(v, rng);
                Move {
                    node,
                    hops,
                    jumped: true,
                }
            }
            StepSampler::Mhlj { mh, levy, p_j } => {
                if *p_j > T::zero() && T::lit(rng.random::<f64>()) < *p_j {
                    let (node, hops) = levy.jump(v, rng);
                    Move {
                        node,
                        hops,
                        jumped: true,
                    }
                } else {
                    Move {
                        node: mh.step(v, rng),
                        hops: 1,
                        jumped: false,
                    }
                }
            }
        }
    }
}

/// One-shot convenience wrapper for a Metropolis-Hastings step of the given
/// kind (`UniformMh`, `WeightedMh` or `MixedMh`).
pub fn sample_step_mh<T: Real, R: Rng + ?Sized>(
    kind: &KernelKind<T>,
    graph: &Graph,
    l: &[T],
    v: usize,
    rng: &mut R,
) -> Result<usize> {
    graph.neighbors(v)?;
    if !kind.is_mh() {
        return Err(invalid(format!("{} is not a Metropolis-Hastings kernel", kind.name())));
    }
    Ok(StepSampler::for_kind(graph, l, kind)?.step(v, rng).node)
}

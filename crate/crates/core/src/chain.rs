//! Stationary distributions, spectral gaps and visit statistics.

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::kernels::TransitionKernel;
use crate::matrix::DenseMatrix;
use crate::scalar::Real;

/// Above this size the power iteration runs step by step instead of
/// repeatedly squaring the transition matrix.
const SQUARING_LIMIT: usize = 1200;

/// Rounds without residual improvement before giving up early.
const STAGNATION_ROUNDS: usize = 8;

/// Detailed-balance residual below which a chain is treated as reversible.
const REVERSIBLE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerOptions {
    /// Target for `|pi P - pi|_1`.
    pub tol: f64,
    /// Budget in (lazy) chain steps.
    pub max_iters: u64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        PowerOptions {
            tol: 1e-10,
            max_iters: 1_000_000,
        }
    }
}

/// `|pi P - pi|_1`.
pub fn fixed_point_residual<T: Real>(kernel: &TransitionKernel<T>, pi: &[T]) -> T {
    kernel
        .matrix()
        .left_mul(pi)
        .iter()
        .zip(pi)
        .map(|(&a, &b)| (a - b).abs())
        .sum()
}

fn normalise<T: Real>(v: &mut [T]) {
    let s: T = v.iter().copied().sum();
    for x in v.iter_mut() {
        *x = (*x / s).max(T::zero());
    }
}

/// Left fixed point of `P` by power iteration from the uniform vector.
///
/// Iterates the lazy chain `(P + I) / 2`, which has the same stationary law
/// but no periodicity. For `n <= 1200` the iterate is advanced by repeated
/// squaring, so round `k` covers `2^k` chain steps, and convergence also
/// requires the change between rounds to be below `tol`. When the step budget is
/// exhausted while the residual is still shrinking the budget is raised once
/// by a factor of 100 (with a warning). The tolerance is floored at
/// `8 n eps(T)`, the rounding level of one `pi P` product in `T`.
pub fn stationary_distribution<T: Real>(
    kernel: &TransitionKernel<T>,
    opts: PowerOptions,
) -> Result<Vec<T>> {
    match power_iterate(kernel, opts)? {
        Ok(pi) => Ok(pi),
        Err((residual, iterations, improving)) if improving => {
            warn!(
                "slow mixing: residual {residual:e} after {iterations} steps, retrying with a larger budget"
            );
            let extended = PowerOptions {
                max_iters: opts.max_iters.saturating_mul(100),
                ..opts
            };
            power_iterate(kernel, extended)?.map_err(|(residual, iterations, _)| {
                Error::ConvergenceFailure {
                    residual,
                    iterations,
                }
            })
        }
        Err((residual, iterations, _)) => Err(Error::ConvergenceFailure {
            residual,
            iterations,
        }),
    }
}

type PowerOutcome<T> = std::result::Result<Vec<T>, (f64, u64, bool)>;

fn power_iterate<T: Real>(kernel: &TransitionKernel<T>, opts: PowerOptions) -> Result<PowerOutcome<T>> {
    let n = kernel.n();
    if n == 0 {
        return Err(invalid("empty kernel"));
    }
    if !(opts.tol > 0.0) || opts.max_iters == 0 {
        return Err(invalid("power iteration needs tol > 0 and max_iters >= 1"));
    }
    let tol = opts.tol.max(8.0 * n as f64 * T::epsilon().as_f64());
    let half = T::lit(0.5);
    let lazy = kernel.matrix().zip_map(&DenseMatrix::identity(n), |p, i| half * (p + i));
    let mut pi = vec![T::one() / T::from_usize_lossy(n); n];
    let mut residual = fixed_point_residual(kernel, &pi).as_f64();
    if residual <= tol {
        return Ok(Ok(pi));
    }

    let squaring = n <= SQUARING_LIMIT;
    let mut q = lazy.clone();
    let mut stride: u64 = 1;
    let mut done: u64 = 0;
    let mut best = residual;
    let mut stale = 0;
    // Residual checks in step-by-step mode are spaced to amortise their cost.
    let check_every: u64 = if squaring { 1 } else { 64 };
    while done < opts.max_iters {
        let next = {
            let mut v = q.left_mul(&pi);
            normalise(&mut v);
            v
        };
        // After 2^k steps the jump |pi Q^(2^k) - pi| tracks the distance to
        // stationarity; the residual alone understates it by a factor 1/gap.
        let moved: f64 = next.iter().zip(&pi).map(|(a, b)| (*a - *b).abs().as_f64()).sum();
        pi = next;
        done += stride;
        if squaring || done.is_multiple_of(check_every) {
            residual = fixed_point_residual(kernel, &pi).as_f64();
            if residual <= tol && (!squaring || moved <= tol) {
                return Ok(Ok(pi));
            }
            if residual < 0.5 * best || residual <= tol {
                best = residual;
                stale = 0;
            } else {
                stale += 1;
                if stale >= STAGNATION_ROUNDS && (squaring || stale >= 64 * STAGNATION_ROUNDS) {
                    return Ok(Err((residual, done, false)));
                }
            }
        }
        if squaring {
            q = q.matmul(&q);
            stride = stride.saturating_mul(2);
        }
    }
    Ok(Err((residual, done, stale == 0)))
}

/// Stationary law by a direct linear solve of `pi (I - P) = 0, sum(pi) = 1`.
/// Independent of the power iteration; used as a cross-check.
pub fn stationary_direct<T: Real>(kernel: &TransitionKernel<T>) -> Result<Vec<T>> {
    let n = kernel.n();
    let p = kernel.matrix().to_f64();
    // Rows of (I - P)^T with the last equation replaced by normalisation.
    let mut a = DMatrix::<f64>::identity(n, n) - p.transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::NumericFailure("singular stationary system".into()))?;
    Ok(x.iter().map(|&v| T::lit(v.max(0.0))).collect())
}

/// Half the L1 distance.
pub fn tv_distance<T: Real>(p: &[T], q: &[T]) -> Result<T> {
    if p.len() != q.len() {
        return Err(invalid(format!(
            "distributions have lengths {} and {}",
            p.len(),
            q.len()
        )));
    }
    let s: T = p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum();
    Ok(s * T::lit(0.5))
}

/// `max_{v,u} |pi_v P(v,u) - pi_u P(u,v)|`.
pub fn detailed_balance_residual<T: Real>(kernel: &TransitionKernel<T>, pi: &[T]) -> Result<T> {
    let n = kernel.n();
    if pi.len() != n {
        return Err(invalid(format!("distribution of length {} for {n} states", pi.len())));
    }
    let mut worst = T::zero();
    for v in 0..n {
        for u in (v + 1)..n {
            let flow = (pi[v] * kernel.get(v, u) - pi[u] * kernel.get(u, v)).abs();
            worst = worst.max(flow);
        }
    }
    Ok(worst)
}

/// Eigenvalue moduli of `P`, sorted in decreasing order.
///
/// Chains that are reversible with respect to `pi` go through the symmetric
/// matrix `D^{1/2} P D^{-1/2}`, `D = diag(pi)`; everything else through a real
/// Schur decomposition.
pub fn eigenvalue_moduli<T: Real>(kernel: &TransitionKernel<T>, pi: &[T]) -> Result<Vec<f64>> {
    let n = kernel.n();
    let p = kernel.matrix().to_f64();
    let reversible = pi.iter().all(|&x| x > T::zero())
        && detailed_balance_residual(kernel, pi)?.as_f64() <= REVERSIBLE_TOL;
    let mut moduli: Vec<f64> = if reversible {
        let root: Vec<f64> = pi.iter().map(|x| x.as_f64().sqrt()).collect();
        let s = DMatrix::from_fn(n, n, |i, j| {
            let a = root[i] * p[(i, j)] / root[j];
            let b = root[j] * p[(j, i)] / root[i];
            0.5 * (a + b)
        });
        let eig = nalgebra::SymmetricEigen::try_new(s, f64::EPSILON, 10_000)
            .ok_or_else(|| Error::NumericFailure("symmetric eigensolver did not converge".into()))?;
        eig.eigenvalues.iter().map(|x| x.abs()).collect()
    } else {
        let schur = nalgebra::Schur::try_new(p, f64::EPSILON, 100_000)
            .ok_or_else(|| Error::NumericFailure("Schur decomposition did not converge".into()))?;
        schur.complex_eigenvalues().iter().map(|z| z.norm()).collect()
    };
    moduli.sort_by(|a, b| b.total_cmp(a));
    Ok(moduli)
}

/// Absolute spectral gap `1 - max_{i >= 2} |lambda_i|`.
///
/// The Perron root is removed as the eigenvalue closest to 1 in modulus. The
/// result is 0 for periodic chains (e.g. simple walks on bipartite graphs).
pub fn spectral_gap<T: Real>(kernel: &TransitionKernel<T>) -> Result<T> {
    let pi = stationary_distribution(kernel, PowerOptions::default())?;
    spectral_gap_with(kernel, &pi)
}

/// As [`spectral_gap`], reusing an already computed stationary law.
pub fn spectral_gap_with<T: Real>(kernel: &TransitionKernel<T>, pi: &[T]) -> Result<T> {
    if kernel.n() == 1 {
        return Ok(T::one());
    }
    let moduli = eigenvalue_moduli(kernel, pi)?;
    // moduli[0] is the Perron root (|lambda| <= 1 for stochastic matrices).
    let second = moduli[1];
    Ok(T::lit((1.0 - second).clamp(0.0, 1.0)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainStats<T> {
    pub stationary: Vec<T>,
    pub spectral_gap: T,
    pub is_reversible: bool,
    pub db_residual: T,
    pub tv_to_target: Option<T>,
}

impl<T: Real> ChainStats<T> {
    pub fn compute(kernel: &TransitionKernel<T>, target: Option<&[T]>) -> Result<Self> {
        let stationary = stationary_distribution(kernel, PowerOptions::default())?;
        let db_residual = detailed_balance_residual(kernel, &stationary)?;
        let spectral_gap = spectral_gap_with(kernel, &stationary)?;
        let tv_to_target = target.map(|t| tv_distance(&stationary, t)).transpose()?;
        Ok(ChainStats {
            is_reversible: db_residual.as_f64() <= REVERSIBLE_TOL,
            stationary,
            spectral_gap,
            db_residual,
            tv_to_target,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisitDiagnostics<T> {
    pub visit_counts: Vec<u64>,
    pub empirical_dist: Vec<T>,
    /// Longest run of consecutive entries at a single node.
    pub max_sojourn: usize,
    /// Entry `t`: fraction of distinct nodes among the first `t + 1` entries.
    pub cover_fraction_curve: Vec<T>,
    /// First index at which at least half the nodes have been seen; `None`
    /// if that never happens.
    pub half_cover_time: Option<usize>,
}

impl<T: Real> VisitDiagnostics<T> {
    pub fn from_trajectory(trajectory: &[usize], n: usize) -> Result<Self> {
        if trajectory.is_empty() {
            return Err(invalid("empty trajectory"));
        }
        if let Some(&bad) = trajectory.iter().find(|&&v| v >= n) {
            return Err(invalid(format!("node {bad} out of range for n = {n}")));
        }
        let mut visit_counts = vec![0u64; n];
        let mut distinct = 0usize;
        let mut cover_fraction_curve = Vec::with_capacity(trajectory.len());
        let mut half_cover_time = None;
        let mut max_sojourn = 0;
        let mut run = 0;
        let inv_n = T::one() / T::from_usize_lossy(n);
        for (t, &v) in trajectory.iter().enumerate() {
            if visit_counts[v] == 0 {
                distinct += 1;
            }
            visit_counts[v] += 1;
            run = if t > 0 && trajectory[t - 1] == v { run + 1 } else { 1 };
            max_sojourn = max_sojourn.max(run);
            cover_fraction_curve.push(T::from_usize_lossy(distinct) * inv_n);
            if half_cover_time.is_none() && 2 * distinct >= n {
                half_cover_time = Some(t);
            }
        }
        let len = T::from_usize_lossy(trajectory.len());
        let empirical_dist = visit_counts
            .iter()
            .map(|&c| T::from_u64(c).expect("count representable") / len)
            .collect();
        Ok(VisitDiagnostics {
            visit_counts,
            empirical_dist,
            max_sojourn,
            cover_fraction_curve,
            half_cover_time,
        })
    }
}

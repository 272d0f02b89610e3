//! Synthetic per-node datasets and the local objectives built on them.
//!
//! Each node holds one sample `(a_v, y_v)`. The local loss carries no `1/n`
//! factor; the global objective is the mean of the local losses.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::scalar::{dot, norm_sq, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossModel {
    LinearRegression,
    LogisticRegression,
}

impl LossModel {
    fn tag(self) -> &'static str {
        match self {
            LossModel::LinearRegression => "linear_regression",
            LossModel::LogisticRegression => "logistic_regression",
        }
    }

    fn from_tag(s: &str) -> Option<Self> {
        match s {
            "linear_regression" => Some(LossModel::LinearRegression),
            "logistic_regression" => Some(LossModel::LogisticRegression),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Each node is high-variance independently with probability `p_h`.
    Bernoulli,
    /// Exactly `round(p_h * n)` high-variance nodes, chosen uniformly.
    FixedCount,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variance {
    Homogeneous {
        sigma_sq: f64,
    },
    Heterogeneous {
        sigma_l_sq: f64,
        sigma_h_sq: f64,
        p_h: f64,
        placement: Placement,
    },
}

/// Generator settings; together with the graph they determine an instance
/// bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    pub dim: usize,
    pub variance: Variance,
    /// Standard deviation of the additive label noise (linear regression).
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default = "default_loss")]
    pub loss: LossModel,
    pub true_model_seed: u64,
    pub data_seed: u64,
}

fn default_noise_std() -> f64 {
    1.0
}

fn default_loss() -> LossModel {
    LossModel::LinearRegression
}

impl DataSpec {
    pub fn homogeneous(dim: usize, sigma_sq: f64, true_model_seed: u64, data_seed: u64) -> Self {
        DataSpec {
            dim,
            variance: Variance::Homogeneous { sigma_sq },
            noise_std: 1.0,
            loss: LossModel::LinearRegression,
            true_model_seed,
            data_seed,
        }
    }

    pub fn heterogeneous(
        dim: usize,
        sigma_l_sq: f64,
        sigma_h_sq: f64,
        p_h: f64,
        placement: Placement,
        true_model_seed: u64,
        data_seed: u64,
    ) -> Self {
        DataSpec {
            dim,
            variance: Variance::Heterogeneous {
                sigma_l_sq,
                sigma_h_sq,
                p_h,
                placement,
            },
            noise_std: 1.0,
            loss: LossModel::LinearRegression,
            true_model_seed,
            data_seed,
        }
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    pub fn with_loss(mut self, loss: LossModel) -> Self {
        self.loss = loss;
        self
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("feature dimension must be >= 1"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(invalid(format!("noise_std must be finite and >= 0, got {}", self.noise_std)));
        }
        match self.variance {
            Variance::Homogeneous { sigma_sq } => {
                if !(sigma_sq > 0.0 && sigma_sq.is_finite()) {
                    return Err(invalid(format!("sigma_sq must be > 0, got {sigma_sq}")));
                }
            }
            Variance::Heterogeneous {
                sigma_l_sq,
                sigma_h_sq,
                p_h,
                placement,
            } => {
                if !(p_h > 0.0 && p_h < 1.0) {
                    return Err(invalid(format!("p_h must lie in (0, 1), got {p_h}")));
                }
                if !(sigma_l_sq > 0.0 && sigma_h_sq > sigma_l_sq && sigma_h_sq.is_finite()) {
                    return Err(invalid(format!(
                        "need sigma_h_sq > sigma_l_sq > 0, got {sigma_h_sq} and {sigma_l_sq}"
                    )));
                }
                if placement == Placement::FixedCount && high_count(p_h, n) == 0 {
                    return Err(invalid(format!(
                        "fixed_count placement with p_h = {p_h}, n = {n} yields no high-variance node"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn high_count(p_h: f64, n: usize) -> usize {
    (p_h * n as f64).round() as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDataset<T> {
    pub features: Vec<T>,
    pub response: T,
    pub high_variance: bool,
}

#[derive(Debug, Clone)]
pub struct ProblemInstance<T> {
    graph: Graph,
    data: Vec<NodeDataset<T>>,
    spec: DataSpec,
    true_model: Vec<T>,
    lipschitz: Vec<T>,
    l_bar: T,
    l_min: T,
    l_max: T,
    x_star: Option<Vec<T>>,
    sigma_star_sq: Option<T>,
    sigma_max_sq: Option<T>,
}

/// Homogeneous linear-regression instance on `graph`.
pub fn gen_homogeneous<T: Real>(
    graph: Graph,
    dim: usize,
    sigma_sq: f64,
    true_model_seed: u64,
    data_seed: u64,
) -> Result<ProblemInstance<T>> {
    ProblemInstance::generate(
        graph,
        DataSpec::homogeneous(dim, sigma_sq, true_model_seed, data_seed),
    )
}

#[allow(clippy::too_many_arguments)]
pub fn gen_heterogeneous<T: Real>(
    graph: Graph,
    dim: usize,
    sigma_l_sq: f64,
    sigma_h_sq: f64,
    p_h: f64,
    placement: Placement,
    true_model_seed: u64,
    data_seed: u64,
) -> Result<ProblemInstance<T>> {
    ProblemInstance::generate(
        graph,
        DataSpec::heterogeneous(dim, sigma_l_sq, sigma_h_sq, p_h, placement, true_model_seed, data_seed),
    )
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize, std: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| std * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl<T: Real> ProblemInstance<T> {
    /// Draws an instance. The true model comes from `true_model_seed`; the
    /// data stream (`data_seed`) first picks the high-variance nodes, then per
    /// node draws the variance class (Bernoulli mode), `a_v`, and the label.
    /// Sampling happens in `f64` and is converted to `T` afterwards.
    pub fn generate(graph: Graph, spec: DataSpec) -> Result<Self> {
        let n = graph.n();
        spec.validate(n)?;
        let d = spec.dim;
        let mut model_rng = ChaCha8Rng::seed_from_u64(spec.true_model_seed);
        let true_model = gaussian_vec(&mut model_rng, d, 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(spec.data_seed);
        let mut high = vec![false; n];
        let (sigma_l_sq, sigma_h_sq) = match spec.variance {
            Variance::Homogeneous { sigma_sq } => (sigma_sq, sigma_sq),
            Variance::Heterogeneous {
                sigma_l_sq,
                sigma_h_sq,
                p_h,
                placement,
            } => {
                match placement {
                    Placement::FixedCount => {
                        for i in index::sample(&mut rng, n, high_count(p_h, n)) {
                            high[i] = true;
                        }
                    }
                    Placement::Bernoulli => {
                        for h in high.iter_mut() {
                            *h = rng.random::<f64>() < p_h;
                        }
                    }
                }
                (sigma_l_sq, sigma_h_sq)
            }
        };

        let mut data = Vec::with_capacity(n);
        for &is_high in &high {
            let std = if is_high { sigma_h_sq } else { sigma_l_sq }.sqrt();
            let features = loop {
                let a = gaussian_vec(&mut rng, d, std);
                if a.iter().any(|&x| x != 0.0) {
                    break a;
                }
            };
            let z: f64 = features.iter().zip(&true_model).map(|(a, x)| a * x).sum();
            let response = match spec.loss {
                LossModel::LinearRegression => {
                    z + spec.noise_std * rng.sample::<f64, _>(StandardNormal)
                }
                LossModel::LogisticRegression => {
                    if rng.random::<f64>() < sigmoid(z) {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            data.push(NodeDataset {
                features: features.into_iter().map(T::lit).collect(),
                response: T::lit(response),
                high_variance: is_high,
            });
        }
        let true_model = true_model.into_iter().map(T::lit).collect();
        Self::assemble(graph, data, spec, true_model)
    }

    fn assemble(
        graph: Graph,
        data: Vec<NodeDataset<T>>,
        spec: DataSpec,
        true_model: Vec<T>,
    ) -> Result<Self> {
        if data.len() != graph.n() {
            return Err(invalid(format!(
                "{} datasets for a graph with {} nodes",
                data.len(),
                graph.n()
            )));
        }
        let factor = match spec.loss {
            LossModel::LinearRegression => T::lit(2.0),
            LossModel::LogisticRegression => T::lit(0.25),
        };
        let mut lipschitz = Vec::with_capacity(data.len());
        for (v, node) in data.iter().enumerate() {
            if node.features.len() != spec.dim {
                return Err(invalid(format!("node {v} has wrong feature dimension")));
            }
            let l = factor * norm_sq(&node.features);
            if !(l > T::zero() && l.is_finite()) {
                return Err(invalid(format!("node {v} has a zero or non-finite feature vector")));
            }
            lipschitz.push(l);
        }
        let n = T::from_usize_lossy(lipschitz.len());
        let l_bar = lipschitz.iter().copied().sum::<T>() / n;
        let l_min = lipschitz.iter().copied().fold(T::infinity(), T::min);
        let l_max = lipschitz.iter().copied().fold(T::neg_infinity(), T::max);
        let mut instance = ProblemInstance {
            graph,
            data,
            spec,
            true_model,
            lipschitz,
            // l_min <= mean <= l_max can fail by an ulp after rounding.
            l_bar: l_bar.max(l_min).min(l_max),
            l_min,
            l_max,
            x_star: None,
            sigma_star_sq: None,
            sigma_max_sq: None,
        };
        if instance.spec.loss == LossModel::LinearRegression {
            let x_star = instance.solve_optimum()?;
            let grads: Vec<T> = (0..instance.n())
                .map(|v| norm_sq(&instance.grad_unchecked(v, &x_star)))
                .collect();
            instance.sigma_star_sq = Some(grads.iter().copied().sum::<T>() / n);
            instance.sigma_max_sq = Some(grads.iter().copied().fold(T::zero(), T::max));
            instance.x_star = Some(x_star);
        }
        Ok(instance)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.data.len()
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn spec(&self) -> &DataSpec {
        &self.spec
    }

    pub fn loss_model(&self) -> LossModel {
        self.spec.loss
    }

    pub fn data(&self) -> &[NodeDataset<T>] {
        &self.data
    }

    pub fn true_model(&self) -> &[T] {
        &self.true_model
    }

    /// Per-node gradient Lipschitz constants.
    pub fn lipschitz(&self) -> &[T] {
        &self.lipschitz
    }

    pub fn l_bar(&self) -> T {
        self.l_bar
    }

    pub fn l_min(&self) -> T {
        self.l_min
    }

    pub fn l_max(&self) -> T {
        self.l_max
    }

    /// Exact minimiser (linear regression only).
    pub fn x_star(&self) -> Option<&[T]> {
        self.x_star.as_deref()
    }

    pub fn sigma_star_sq(&self) -> Option<T> {
        self.sigma_star_sq
    }

    pub fn sigma_max_sq(&self) -> Option<T> {
        self.sigma_max_sq
    }

    pub fn high_variance_nodes(&self) -> Vec<usize> {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(v, d)| d.high_variance.then_some(v))
            .collect()
    }

    fn check(&self, v: usize, x: &[T]) -> Result<()> {
        if v >= self.n() {
            return Err(invalid(format!("node {v} out of range for n = {}", self.n())));
        }
        if x.len() != self.dim() {
            return Err(invalid(format!(
                "model has dimension {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn local_loss(&self, v: usize, x: &[T]) -> Result<T> {
        self.check(v, x)?;
        Ok(self.loss_unchecked(v, x))
    }

    pub fn local_grad(&self, v: usize, x: &[T]) -> Result<Vec<T>> {
        self.check(v, x)?;
        Ok(self.grad_unchecked(v, x))
    }

    /// Mean of the local losses.
    pub fn global_loss(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(invalid(format!(
                "model has dimension {}, expected {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.global_loss_unchecked(x))
    }

    pub(crate) fn global_loss_unchecked(&self, x: &[T]) -> T {
        let total: T = (0..self.n()).map(|v| self.loss_unchecked(v, x)).sum();
        total / T::from_usize_lossy(self.n())
    }

    pub(crate) fn loss_unchecked(&self, v: usize, x: &[T]) -> T {
        let node = &self.data[v];
        let z = dot(&node.features, x);
        match self.spec.loss {
            LossModel::LinearRegression => {
                let r = node.response - z;
                r * r
            }
            // log(1 + e^z) - y z, evaluated without overflow.
            LossModel::LogisticRegression => {
                let softplus = if z > T::zero() {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                softplus - node.response * z
            }
        }
    }

    /// Scalar `s` with `grad f_v(x) = s * a_v`.
    #[inline]
    pub(crate) fn grad_coeff(&self, v: usize, x: &[T]) -> T {
        let node = &self.data[v];
        let z = dot(&node.features, x);
        match self.spec.loss {
            LossModel::LinearRegression => T::lit(-2.0) * (node.response - z),
            LossModel::LogisticRegression => {
                let s = if z >= T::zero() {
                    T::one() / (T::one() + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (T::one() + e)
                };
                s - node.response
            }
        }
    }

    pub(crate) fn grad_unchecked(&self, v: usize, x: &[T]) -> Vec<T> {
        let c = self.grad_coeff(v, x);
        self.data[v].features.iter().map(|&a| c * a).collect()
    }

    /// Least-squares minimiser from the normal equations, solved in `f64`.
    /// A ridge of `1e-10 * trace / d` is added only when the Gram matrix is
    /// numerically singular.
    pub fn solve_optimum(&self) -> Result<Vec<T>> {
        if self.spec.loss != LossModel::LinearRegression {
            return Err(Error::Unsupported(
                "closed-form optimum exists only for linear regression; use global_loss".into(),
            ));
        }
        let d = self.dim();
        let mut gram = DMatrix::<f64>::zeros(d, d);
        let mut rhs = DVector::<f64>::zeros(d);
        for node in &self.data {
            let a: Vec<f64> = node.features.iter().map(|x| x.as_f64()).collect();
            let y = node.response.as_f64();
            for i in 0..d {
                rhs[i] += y * a[i];
                for j in 0..d {
                    gram[(i, j)] += a[i] * a[j];
                }
            }
        }
        let eig_min = gram.clone().symmetric_eigenvalues().min();
        let eig_max = gram.clone().symmetric_eigenvalues().max();
        if eig_min <= eig_max * 1e-12 {
            let ridge = 1e-10 * gram.trace() / d as f64;
            for i in 0..d {
                gram[(i, i)] += ridge;
            }
        }
        let sol = gram
            .cholesky()
            .ok_or_else(|| Error::NumericFailure("Gram matrix is not positive definite".into()))?
            .solve(&rhs);
        Ok(sol.iter().map(|&x| T::lit(x)).collect())
    }

    /// Writes the replayable text form: header lines, the edge list, then
    /// one `node` row per node (`id class y a_1 .. a_d`).
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let spec = &self.spec;
        writeln!(out, "# mhlj instance v1")?;
        writeln!(out, "n {}", self.n())?;
        writeln!(out, "d {}", spec.dim)?;
        writeln!(out, "loss {}", spec.loss.tag())?;
        writeln!(out, "topology {}", self.graph.topology())?;
        writeln!(out, "graph_seed {}", self.graph.seed())?;
        writeln!(out, "true_model_seed {}", spec.true_model_seed)?;
        writeln!(out, "data_seed {}", spec.data_seed)?;
        writeln!(out, "noise_std {}", spec.noise_std)?;
        match spec.variance {
            Variance::Homogeneous { sigma_sq } => writeln!(out, "variance homogeneous {sigma_sq}")?,
            Variance::Heterogeneous {
                sigma_l_sq,
                sigma_h_sq,
                p_h,
                placement,
            } => {
                let p = match placement {
                    Placement::Bernoulli => "bernoulli",
                    Placement::FixedCount => "fixed_count",
                };
                writeln!(out, "variance heterogeneous {sigma_l_sq} {sigma_h_sq} {p_h} {p}")?
            }
        }
        write!(out, "true_model")?;
        for x in &self.true_model {
            write!(out, " {}", x.as_f64())?;
        }
        writeln!(out)?;
        for (u, v) in self.graph.edges() {
            writeln!(out, "edge {u} {v}")?;
        }
        for (v, node) in self.data.iter().enumerate() {
            let class = if node.high_variance { 'H' } else { 'L' };
            write!(out, "node {v} {class} {}", node.response.as_f64())?;
            for a in &node.features {
                write!(out, " {}", a.as_f64())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Inverse of [`ProblemInstance::write_text`]. Derived quantities
    /// (Lipschitz constants, optimum) are recomputed.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut n = None;
        let mut dim = None;
        let mut loss = None;
        let mut seeds = (0u64, 0u64);
        let mut noise_std = 1.0;
        let mut variance = None;
        let mut true_model = Vec::new();
        let mut edges = Vec::new();
        let mut nodes: Vec<Option<NodeDataset<T>>> = Vec::new();

        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            let line_no = idx + 1;
            let err = |msg: String| Error::Parse { line: line_no, msg };
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = text.split_whitespace().collect();
            let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}")));
            let int = |s: &str| s.parse::<u64>().map_err(|e| err(format!("{s:?}: {e}")));
            let arity = |k: usize| {
                if fields.len() == k {
                    Ok(())
                } else {
                    Err(err(format!("expected {} fields in {text:?}", k)))
                }
            };
            match fields[0] {
                "n" => {
                    arity(2)?;
                    let count = int(fields[1])? as usize;
                    n = Some(count);
                    nodes = vec![None; count];
                }
                "d" => {
                    arity(2)?;
                    dim = Some(int(fields[1])? as usize);
                }
                "loss" => {
                    arity(2)?;
                    loss = Some(
                        LossModel::from_tag(fields[1])
                            .ok_or_else(|| err(format!("unknown loss {:?}", fields[1])))?,
                    );
                }
                "topology" | "graph_seed" => {}
                "true_model_seed" => {
                    arity(2)?;
                    seeds.0 = int(fields[1])?;
                }
                "data_seed" => {
                    arity(2)?;
                    seeds.1 = int(fields[1])?;
                }
                "noise_std" => {
                    arity(2)?;
                    noise_std = num(fields[1])?;
                }
                "variance" => {
                    variance = Some(match fields.get(1) {
                        Some(&"homogeneous") => {
                            arity(3)?;
                            Variance::Homogeneous {
                                sigma_sq: num(fields[2])?,
                            }
                        }
                        Some(&"heterogeneous") => {
                            arity(6)?;
                            let placement = match fields[5] {
                                "bernoulli" => Placement::Bernoulli,
                                "fixed_count" => Placement::FixedCount,
                                other => return Err(err(format!("unknown placement {other:?}"))),
                            };
                            Variance::Heterogeneous {
                                sigma_l_sq: num(fields[2])?,
                                sigma_h_sq: num(fields[3])?,
                                p_h: num(fields[4])?,
                                placement,
                            }
                        }
                        _ => return Err(err(format!("bad variance line {text:?}"))),
                    });
                }
                "true_model" => {
                    true_model = fields[1..]
                        .iter()
                        .map(|s| num(s).map(T::lit))
                        .collect::<Result<_>>()?;
                }
                "edge" => {
                    arity(3)?;
                    edges.push((int(fields[1])? as usize, int(fields[2])? as usize));
                }
                "node" => {
                    let d = dim.ok_or_else(|| err("node row before dimension".into()))?;
                    arity(4 + d)?;
                    let v = int(fields[1])? as usize;
                    let high_variance = match fields[2] {
                        "H" => true,
                        "L" => false,
                        other => return Err(err(format!("unknown class {other:?}"))),
                    };
                    let slot = nodes
                        .get_mut(v)
                        .ok_or_else(|| err(format!("node {v} out of range")))?;
                    *slot = Some(NodeDataset {
                        response: T::lit(num(fields[3])?),
                        features: fields[4..]
                            .iter()
                            .map(|s| num(s).map(T::lit))
                            .collect::<Result<_>>()?,
                        high_variance,
                    });
                }
                other => return Err(err(format!("unknown record {other:?}"))),
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            msg: format!("missing {what}"),
        };
        let n = n.ok_or_else(|| missing("n"))?;
        let dim = dim.ok_or_else(|| missing("d"))?;
        let data = nodes
            .into_iter()
            .enumerate()
            .map(|(v, node)| node.ok_or_else(|| missing(&format!("node {v}"))))
            .collect::<Result<Vec<_>>>()?;
        if true_model.len() != dim {
            return Err(missing("true_model of dimension d"));
        }
        let spec = DataSpec {
            dim,
            variance: variance.ok_or_else(|| missing("variance"))?,
            noise_std,
            loss: loss.ok_or_else(|| missing("loss"))?,
            true_model_seed: seeds.0,
            data_seed: seeds.1,
        };
        let graph = Graph::from_edges(n, &edges)?;
        Self::assemble(graph, data, spec, true_model)
    }
}

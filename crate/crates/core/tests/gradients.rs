use mhlj::{DataSpec, Graph, Instance, LossModel, Placement};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn instance(loss: LossModel) -> Instance {
    let graph = Graph::erdos_renyi(30, 0.3, 7).unwrap();
    let spec = DataSpec::heterogeneous(6, 1.0, 25.0, 0.2, Placement::FixedCount, 3, 4).with_loss(loss);
    Instance::generate(graph, spec).unwrap()
}

/// Worst relative error of the central-difference gradient over `probes`
/// random (node, point) pairs. Points are scaled by `1/|a_v|` so the logit
/// stays O(1): a saturated sigmoid leaves a gradient below the rounding
/// floor of the difference quotient.
fn worst_fd_error(inst: &Instance, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let v = rng.random_range(0..inst.n());
        let a = &inst.data()[v].features;
        let inv_norm = 1.0 / a.iter().map(|t| t * t).sum::<f64>().sqrt();
        let x: Vec<f64> = (0..inst.dim()).map(|_| rng.random_range(-3.0..3.0) * inv_norm).collect();
        let g = inst.local_grad(v, &x).unwrap();
        let fd: Vec<f64> = (0..inst.dim())
            .map(|i| {
                let mut hi = x.clone();
                let mut lo = x.clone();
                hi[i] += h;
                lo[i] -= h;
                (inst.local_loss(v, &hi).unwrap() - inst.local_loss(v, &lo).unwrap()) / (2.0 * h)
            })
            .collect();
        let diff = g.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
        worst = worst.max(diff / scale);
    }
    worst
}

#[test]
fn linear_gradient_matches_finite_differences() {
    let err = worst_fd_error(&instance(LossModel::LinearRegression), 100, 11);
    assert!(err <= 1e-5, "relative error {err:e}");
}

#[test]
fn logistic_gradient_matches_finite_differences() {
    let err = worst_fd_error(&instance(LossModel::LogisticRegression), 100, 12);
    assert!(err <= 1e-5, "relative error {err:e}");
}

#[test]
fn lipschitz_constant_bounds_gradient_variation() {
    for loss in [LossModel::LinearRegression, LossModel::LogisticRegression] {
        let inst = instance(loss);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let v = rng.random_range(0..inst.n());
            let x: Vec<f64> = (0..inst.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y: Vec<f64> = (0..inst.dim()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let gx = inst.local_grad(v, &x).unwrap();
            let gy = inst.local_grad(v, &y).unwrap();
            let dg = gx.iter().zip(&gy).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let dx = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(dg <= inst.lipschitz()[v] * dx * (1.0 + 1e-12), "{loss:?} at node {v}");
        }
    }
}

#[test]
fn global_gradient_vanishes_at_least_squares_optimum() {
    let inst = instance(LossModel::LinearRegression);
    let xs = inst.x_star().unwrap().to_vec();
    let mut total = vec![0.0; inst.dim()];
    for v in 0..inst.n() {
        for (t, g) in total.iter_mut().zip(inst.local_grad(v, &xs).unwrap()) {
            *t += g;
        }
    }
    let norm = total.iter().map(|g| g * g).sum::<f64>().sqrt();
    assert!(norm < 1e-9, "gradient norm {norm:e} at x*");
}

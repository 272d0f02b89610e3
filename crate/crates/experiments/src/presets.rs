//! Desk-scale experiment presets (200 nodes, 10 features).

use std::path::Path;

use mhlj::walker::{PjSchedule, Strategy, SwitchRule};
use mhlj::{DataSpec, JumpParams, Placement};

use crate::spec::{Axis, ExperimentSpec, GraphSpec, StepSize, StrategySpec, SweepSpec};

pub const N: usize = 200;
pub const DIM: usize = 10;
pub const SIGMA_L_SQ: f64 = 1.0;
pub const SIGMA_H_SQ: f64 = 100.0;
pub const GRAPH_SEED: u64 = 1000;
pub const TRUE_MODEL_SEED: u64 = 100;
pub const DATA_SEED: u64 = 200;
pub const DEFAULT_SEEDS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    Experiment(ExperimentSpec),
    Sweep(SweepSpec),
}

/// Preset names with one-line descriptions.
pub const PRESETS: &[(&str, &str)] = &[
    ("fig3b_desk", "ring(200), one high-variance node, unif/weight/mhlj at a shared step size"),
    ("fig3a_desk", "ER(200, 0.1), two high-variance nodes, unif/weight/mhlj"),
    ("fig4a_desk", "ER(200, 0.1), homogeneous data, unif/weight/mhlj"),
    ("fig5_grid_desk", "14x14 grid, one high-variance node, unif/weight/mhlj"),
    ("fig5_ws_desk", "Watts-Strogatz(200, 4, 0.1), one high-variance node, unif/weight/mhlj"),
    ("fig6a_switch", "ER(200, 0.1), noisy labels, mhlj with and without a switch to uniform"),
    ("fig6b_decay", "ER(200, 0.1), noisy labels, mhlj with constant and decaying p_j"),
    ("fig_mixed_lambda", "ER(200, 0.1), mixed_rw over lambda in {0, 0.5, 1}"),
    ("pj_sweep_desk", "sweep: ring(200), noisy labels, mhlj over p_j in {0, 0.05, 0.1, 0.2, 0.4}"),
    ("gamma_sweep_desk", "sweep: ER(200, 0.1), homogeneous data, weight_rw over three step sizes"),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

fn heterogeneous(high: usize, n: usize) -> DataSpec {
    DataSpec::heterogeneous(
        DIM,
        SIGMA_L_SQ,
        SIGMA_H_SQ,
        high as f64 / n as f64,
        Placement::FixedCount,
        TRUE_MODEL_SEED,
        DATA_SEED,
    )
}

fn er() -> GraphSpec {
    GraphSpec::ErdosRenyi {
        n: N,
        p: 0.1,
        seed: GRAPH_SEED,
    }
}

fn trio(step: StepSize, iterations: usize, every: usize) -> Vec<StrategySpec> {
    [Strategy::UnifRw, Strategy::WeightRw, Strategy::Mhlj(JumpParams::default())]
        .into_iter()
        .map(|s| StrategySpec::new(s, step, iterations).every(every))
        .collect()
}

fn experiment(name: &str, out: &Path, seeds: usize, graph: GraphSpec, data: DataSpec, strategies: Vec<StrategySpec>) -> ExperimentSpec {
    ExperimentSpec {
        name: name.to_string(),
        output_dir: out.to_path_buf(),
        seeds: (0..seeds as u64).collect(),
        resample_per_seed: false,
        graph,
        data,
        strategies,
    }
}

/// Builds preset `name` with seeds `0..seeds` writing under `out`.
pub fn preset(name: &str, seeds: usize, out: &Path) -> Option<Preset> {
    let default_step = StepSize::Default { c: 0.5 };
    let mhlj = Strategy::Mhlj(JumpParams::default());
    let exp = |graph, data, strategies| Preset::Experiment(experiment(name, out, seeds, graph, data, strategies));
    Some(match name {
        "fig3b_desk" => exp(
            GraphSpec::Ring { n: N },
            heterogeneous(1, N),
            trio(StepSize::OverLMax { c: 1.5 }, 100_000, 10),
        ),
        "fig3a_desk" => exp(er(), heterogeneous(2, N), trio(default_step, 10_000, 1)),
        "fig4a_desk" => exp(
            er(),
            DataSpec::homogeneous(DIM, SIGMA_L_SQ, TRUE_MODEL_SEED, DATA_SEED),
            trio(default_step, 5_000, 1),
        ),
        "fig5_grid_desk" => exp(
            GraphSpec::Grid2d { rows: 14, cols: 14 },
            heterogeneous(1, 196),
            trio(default_step, 10_000, 1),
        ),
        "fig5_ws_desk" => exp(
            GraphSpec::WattsStrogatz {
                n: N,
                k: 4,
                beta: 0.1,
                seed: GRAPH_SEED,
            },
            heterogeneous(1, N),
            trio(default_step, 10_000, 1),
        ),
        "fig6a_switch" => {
            let t = 200_000;
            let plain = StrategySpec::new(mhlj, default_step, t).every(100);
            let mut switched = plain.clone().labeled("mhlj_switch");
            switched.switch_rule = Some(SwitchRule::FixedStep { step: t / 2 });
            exp(er(), heterogeneous(2, N).with_noise_std(5.0), vec![plain, switched])
        }
        "fig6b_decay" => {
            let t = 200_000;
            let plain = StrategySpec::new(mhlj, default_step, t).every(100);
            let mut decayed = plain.clone().labeled("mhlj_decay");
            decayed.pj_schedule = PjSchedule::Decay { p_j0: 0.1, t0: None };
            exp(er(), heterogeneous(2, N).with_noise_std(5.0), vec![plain, decayed])
        }
        "fig_mixed_lambda" => exp(
            er(),
            heterogeneous(2, N),
            [0.0, 0.5, 1.0]
                .into_iter()
                .map(|lambda| {
                    StrategySpec::new(Strategy::MixedRw { lambda }, default_step, 10_000)
                        .labeled(&format!("mixed_rw_{lambda}"))
                })
                .collect(),
        ),
        "pj_sweep_desk" => Preset::Sweep(SweepSpec {
            axis: Axis::PJ,
            values: vec![0.0, 0.05, 0.1, 0.2, 0.4],
            base: experiment(
                name,
                out,
                seeds,
                GraphSpec::Ring { n: N },
                heterogeneous(1, N).with_noise_std(5.0),
                vec![StrategySpec::new(mhlj, StepSize::OverLBar { c: 3e-5 }, 4_000_000).every(5_000)],
            ),
        }),
        "gamma_sweep_desk" => Preset::Sweep(SweepSpec {
            axis: Axis::Gamma,
            values: vec![0.02, 0.01, 0.005],
            base: experiment(
                name,
                out,
                seeds,
                er(),
                DataSpec::homogeneous(DIM, SIGMA_L_SQ, TRUE_MODEL_SEED, DATA_SEED),
                vec![StrategySpec::new(Strategy::WeightRw, default_step, 20_000).every(10)],
            ),
        }),
        _ => return None,
    })
}

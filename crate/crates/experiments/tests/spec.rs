use mhlj::walker::Strategy;
use mhlj_experiments::presets::{self, Preset};
use mhlj_experiments::{Axis, ExpError, ExperimentSpec, StepSize, SweepSpec};
use std::path::Path;

const RING: &str = include_str!("../../../configs/ring_small.toml");
const SWEEP: &str = include_str!("../../../configs/pj_sweep_small.toml");

#[test]
fn every_preset_round_trips_through_toml() {
    for name in presets::names() {
        match presets::preset(name, 3, Path::new("out")).unwrap() {
            Preset::Experiment(spec) => {
                spec.validate().unwrap();
                assert_eq!(ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap(), spec, "{name}");
            }
            Preset::Sweep(sweep) => {
                sweep.validate().unwrap();
                assert_eq!(SweepSpec::from_toml(&sweep.to_toml().unwrap()).unwrap(), sweep, "{name}");
            }
        }
    }
    assert!(presets::preset("fig99", 1, Path::new("out")).is_none());
}

#[test]
fn sample_configs_parse_and_round_trip() {
    let spec = ExperimentSpec::from_toml(RING).unwrap();
    spec.validate().unwrap();
    assert_eq!(spec.strategies.len(), 3);
    assert!(!spec.resample_per_seed);
    assert_eq!(ExperimentSpec::from_toml(&spec.to_toml().unwrap()).unwrap(), spec);

    let sweep = SweepSpec::from_toml(SWEEP).unwrap();
    sweep.validate().unwrap();
    assert_eq!(sweep.axis, Axis::PJ);
    assert_eq!(SweepSpec::from_toml(&sweep.to_toml().unwrap()).unwrap(), sweep);
}

#[test]
fn overrides_edit_nested_fields() {
    let o = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    let spec = ExperimentSpec::from_toml_with_overrides(
        RING,
        &o(&["gamma=0.01", "data.noise_std=5", "graph.n=12", "strategies.2.strategy.p_j=0.3", "seeds=[7]", "name=\"other\""]),
    )
    .unwrap();
    assert!(spec.strategies.iter().all(|s| s.step == StepSize::Fixed { value: 0.01 }));
    assert_eq!(spec.data.noise_std, 5.0);
    assert_eq!(spec.seeds, vec![7]);
    assert_eq!(spec.name, "other");
    assert!(matches!(spec.strategies[2].strategy, Strategy::Mhlj(j) if j.p_j == 0.3));
    assert_eq!(spec.graph, mhlj_experiments::GraphSpec::Ring { n: 12 });

    let bare = ExperimentSpec::from_toml_with_overrides(RING, &o(&["name=plain"])).unwrap();
    assert_eq!(bare.name, "plain");

    let sweep = SweepSpec::from_toml_with_overrides(SWEEP, &o(&["gamma=0.5", "values=[0.2]", "base.seeds=[3, 4]"])).unwrap();
    assert_eq!(sweep.values, vec![0.2]);
    assert_eq!(sweep.base.seeds, vec![3, 4]);
    assert_eq!(sweep.base.strategies[0].step, StepSize::Fixed { value: 0.5 });
}

#[test]
fn bad_overrides_are_rejected() {
    for bad in ["gamma", "gamma=fast", "graph..n=3", "nothing.here=1", "strategies.9.iterations=1", "seeds.x=1"] {
        let r = ExperimentSpec::from_toml_with_overrides(RING, &[bad.to_string()]);
        assert!(matches!(r, Err(ExpError::Config(_))), "{bad}: {r:?}");
    }
    let r = ExperimentSpec::from_toml_with_overrides(RING, &["graph.kind=\"torus\"".to_string()]);
    assert!(r.is_err());
}

#[test]
fn validation_lists_every_problem() {
    let mut spec = ExperimentSpec::from_toml(RING).unwrap();
    spec.name = "../escape".into();
    spec.seeds.clear();
    spec.strategies[1] = spec.strategies[0].clone();
    spec.strategies[2].iterations = 0;
    spec.strategies[2].step = StepSize::OverLBar { c: -1.0 };
    let Err(ExpError::Validation(problems)) = spec.validate() else {
        panic!("expected a validation error");
    };
    assert_eq!(problems.len(), 5, "{problems:?}");
    for field in ["name", "seeds", "strategies.1.label", "strategies.2.step", "strategies.2.iterations"] {
        assert!(problems.iter().any(|p| p.starts_with(field)), "{field} missing from {problems:?}");
    }
}

#[test]
fn sweep_points_set_the_axis() {
    let sweep = SweepSpec::from_toml(SWEEP).unwrap();
    let p = sweep.point(0.3).unwrap();
    assert!(matches!(p.strategies[0].strategy, Strategy::Mhlj(j) if j.p_j == 0.3));

    let mut by_n = sweep.clone();
    by_n.axis = Axis::N;
    assert_eq!(by_n.point(17.0).unwrap().graph, mhlj_experiments::GraphSpec::Ring { n: 17 });
    assert!(by_n.point(2.5).is_err());

    let mut by_lambda = sweep.clone();
    by_lambda.axis = Axis::Lambda;
    assert!(by_lambda.point(0.5).is_err());

    let mut empty = sweep;
    empty.values.clear();
    assert!(empty.validate().is_err());
}

#[test]
fn instances_are_fixed_unless_resampled() {
    let mut spec = ExperimentSpec::from_toml(RING).unwrap();
    let a = spec.instance(0).unwrap();
    assert_eq!(a.data(), spec.instance(5).unwrap().data());
    spec.resample_per_seed = true;
    assert_eq!(a.data(), spec.instance(0).unwrap().data());
    assert_ne!(a.data(), spec.instance(5).unwrap().data());
}

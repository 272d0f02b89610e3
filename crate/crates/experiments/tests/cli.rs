use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mhlj");

fn config(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn mhlj(args: &[&str]) -> Output {
    Command::new(BIN).args(args).env_remove("MHLJ_OUT_DIR").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_lists_presets() {
    let o = mhlj(&["--help"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for name in mhlj_experiments::presets::names() {
        assert!(text.contains(name), "{name} missing from help");
    }
    assert!(text.contains("MHLJ_OUT_DIR"));
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(mhlj(&["preset", "fig99_desk"]).status.code(), Some(2));
    assert_eq!(mhlj(&["run", "--config", "x.toml", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(mhlj(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(mhlj(&[]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_with_1() {
    let o = mhlj(&["run", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let o = mhlj(&["run", "--config", &config("ring_small.toml"), "--override", "name=\"a/b\"", "--dry-run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid spec: name"));
}

#[test]
fn override_is_reflected_in_config_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = mhlj(&["run", "--config", &config("ring_small.toml"), "--override", "gamma=0.0005", "--seeds", "2", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("rule = \"fixed\"\nvalue = 0.0005"));
    let echo = fs::read_to_string(tmp.path().join("ring_small/config_echo.toml")).unwrap();
    assert!(echo.contains("value = 0.0005"));
    assert!(echo.contains("seeds = [0, 1]"));
    assert!(tmp.path().join("ring_small/weight_rw_1.csv").exists());
}

#[test]
fn output_dir_defaults_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(BIN)
        .args(["preset", "fig4a_desk", "--seeds", "1", "--override", "strategies.0.iterations=50"])
        .args(["--override", "strategies.1.iterations=50", "--override", "strategies.2.iterations=50"])
        .env("MHLJ_OUT_DIR", tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("fig4a_desk");
    for f in ["unif_rw_0.csv", "weight_rw_0.csv", "mhlj_0.csv", "summary.csv", "config_echo.toml"] {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn dry_run_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = mhlj(&["preset", "pj_sweep_desk", "--dry-run", "--out", out]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("# config_echo\naxis = \"p_j\""));
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 0);
}

fn analyze(path: &Path) -> String {
    let o = mhlj(&["analyze", "--kernel", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    stdout(&o)
}

#[test]
fn gen_instance_and_analyze_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let inst = tmp.path().join("inst.txt");
    let kern = tmp.path().join("kernel.txt");
    let o = mhlj(&[
        "gen-instance",
        "--config",
        &config("ring_small.toml"),
        "--out",
        inst.to_str().unwrap(),
        "--kernel-out",
        kern.to_str().unwrap(),
        "--strategy",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let replay = mhlj::Instance::read_text(std::io::BufReader::new(fs::File::open(&inst).unwrap())).unwrap();
    let spec = mhlj_experiments::ExperimentSpec::load(Path::new(&config("ring_small.toml"))).unwrap();
    assert_eq!(replay.data(), spec.instance(0).unwrap().data());

    let text = analyze(&kern);
    assert!(text.starts_with("n = 40\n"));
    assert!(text.contains("reversible = true"));
    let pi: Vec<f64> = text
        .lines()
        .find_map(|l| l.strip_prefix("stationary = "))
        .unwrap()
        .split(' ')
        .map(|x| x.parse().unwrap())
        .collect();
    let target = mhlj::kernels::weighted_target(replay.lipschitz());
    assert!(mhlj::chain::tv_distance(&pi, &target).unwrap() < 1e-8);

    let o = mhlj(&["gen-instance", "--config", &config("ring_small.toml"), "--out", inst.to_str().unwrap(), "--kernel-out", kern.to_str().unwrap(), "--strategy", "7"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analyze_rejects_non_stochastic_matrix() {
    let tmp = tempfile::tempdir().unwrap();
    let p = tmp.path().join("bad.txt");
    let good = tmp.path().join("good.txt");
    let m = mhlj::DenseMatrix::<f64>::from_rows(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
    m.write_text(fs::File::create(&good).unwrap()).unwrap();
    assert!(analyze(&good).contains("eta = 1.0000000000000000e0"));
    let text = fs::read_to_string(&good).unwrap().replacen("5.0000000000000000e-1", "7.0000000000000000e-1", 1);
    fs::write(&p, text).unwrap();
    assert_eq!(mhlj(&["analyze", "--kernel", p.to_str().unwrap()]).status.code(), Some(1));
}

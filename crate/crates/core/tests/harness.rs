use std::path::Path;

use mfglab::harness::{self, compare, ExperimentKind, ExperimentSpec, Tolerances};
use mfglab::Error;

const TRIVIAL: &str = r#"
[model]
kind = "quadratic"
coupling = "constant"
c0 = 0.7
n = 16

[params]
horizons = [1.0, 2.0, 3.0]
"#;

const KERNEL: &str = r#"
seed = 3

[model]
kind = "quadratic_plus_potential"
coupling = "quadratic_kernel"
potential_cos = 0.2
kernel_cos = -0.5
n = 16

[params]
dt = 0.04
horizons = [2.0, 3.0, 4.0]
horizon = 4.0
particles = 2
corrector_horizons = [1.0, 2.0]
times = [0.0, 1.0, 2.0]
burn_in = 1.0
corrector_horizon = 2.0
calibration_horizons = [2.0, 3.0, 4.0]
window = [-1.0, 1.0]
h = 0.4
h1 = 0.4
h2 = 0.4
"#;

fn spec(text: &str, kind: ExperimentKind, out: &Path) -> ExperimentSpec {
    ExperimentSpec::parse(text, Some(kind), None, Path::new("."), out).unwrap()
}

fn config_key(text: &str) -> String {
    match ExperimentSpec::parse(text, Some(ExperimentKind::Energy), None, Path::new("."), Path::new("out")) {
        Err(Error::Config { key, .. }) => key,
        other => panic!("expected a config error, got {other:?}"),
    }
}

#[test]
fn lambda_slope_on_trivial_model() {
    let dir = tempfile::tempdir().unwrap();
    let m = harness::run(&spec(TRIVIAL, ExperimentKind::LambdaSlope, dir.path())).unwrap();
    assert!((m.result("lambda_hat").unwrap() + 0.7).abs() <= 1e-6);
    assert!(m.check("lambda_equals_minus_c0").unwrap().pass);
    assert!(m.all_pass());
    let lambda = std::fs::read_to_string(dir.path().join("lambda.tsv")).unwrap();
    assert!(lambda.starts_with("method\thorizons\testimate\tresidual\nslope\t1,2,3\t"));
    let reread = harness::RunManifest::read(&dir.path().join("manifest")).unwrap();
    assert_eq!(reread, m);
}

#[test]
fn malformed_configs_name_the_key() {
    assert_eq!(config_key(&format!("{TRIVIAL}dtt = 0.1\n")), "params.dtt");
    assert_eq!(config_key(&TRIVIAL.replace("horizons = [1.0, 2.0, 3.0]", "dt = \"fast\"")), "params.dt");
    assert_eq!(config_key(&TRIVIAL.replace("c0 = 0.7\n", "")), "model.c0");
    assert_eq!(config_key(&TRIVIAL.replace("coupling", "couplin")), "model.couplin");
    assert_eq!(config_key(&TRIVIAL.replace("horizons = [1.0, 2.0, 3.0]", "dt = -1.0")), "params.dt");
    assert_eq!(config_key(&TRIVIAL.replace("n = 16", "n = 4")), "model.n");
    assert_eq!(config_key(&format!("kind = \"mather\"\n{TRIVIAL}")), "kind");
    assert_eq!(config_key("[model\n"), "(line 1)");
    assert_eq!(
        config_key(&TRIVIAL.replace("c0 = 0.7", "c0 = 0.7\npotential_file = \"missing.txt\"")),
        "model.potential_file"
    );
}

#[test]
fn kind_specific_parameters_are_checked_for_that_kind() {
    let text = KERNEL.replace("burn_in = 1.0", "burn_in = 20.0");
    assert!(ExperimentSpec::parse(&text, Some(ExperimentKind::Energy), None, Path::new("."), Path::new("o")).is_ok());
    let err = ExperimentSpec::parse(&text, Some(ExperimentKind::Mather), None, Path::new("."), Path::new("o"));
    assert!(matches!(err, Err(Error::Config { key, .. }) if key == "params.burn_in"));
    let text = KERNEL.replace("\nh = 0.4\n", "\nh = 0.5\n");
    let err = ExperimentSpec::parse(&text, Some(ExperimentKind::Semigroup), None, Path::new("."), Path::new("o"));
    assert!(matches!(err, Err(Error::Config { key, .. }) if key == "params.h"));
}

#[test]
fn command_line_overrides_seed() {
    let s = ExperimentSpec::parse(KERNEL, Some(ExperimentKind::Semigroup), Some(11), Path::new("."), Path::new("o")).unwrap();
    assert_eq!(s.seed, 11);
    let s = ExperimentSpec::parse(KERNEL, Some(ExperimentKind::Semigroup), None, Path::new("."), Path::new("o")).unwrap();
    assert_eq!(s.seed, 3);
    assert_ne!(
        s.hash().unwrap(),
        ExperimentSpec::parse(KERNEL, Some(ExperimentKind::Semigroup), Some(11), Path::new("."), Path::new("o"))
            .unwrap()
            .hash()
            .unwrap()
    );
}

#[test]
fn every_kind_writes_its_tables_deterministically() {
    let expected: [(ExperimentKind, &[&str]); 8] = [
        (ExperimentKind::LambdaSlope, &["lambda.tsv"]),
        (ExperimentKind::CellProblem, &["cell.tsv", "v_N1.txt", "v_N2.txt"]),
        (ExperimentKind::Energy, &["energy.tsv"]),
        (ExperimentKind::Corrector, &["corrector.tsv"]),
        (ExperimentKind::Monotonicity, &["xi.tsv"]),
        (ExperimentKind::Mather, &["mather.tsv"]),
        (ExperimentKind::Semigroup, &["semigroup.tsv"]),
        (ExperimentKind::Calibrated, &["calibrated.tsv"]),
    ];
    for (kind, files) in expected {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ma = harness::run(&spec(KERNEL, kind, a.path())).unwrap();
        let mb = harness::run(&spec(KERNEL, kind, b.path())).unwrap();
        assert!(!ma.results.is_empty() && !ma.checks.is_empty(), "{kind}");
        let diff = compare(&ma, &mb, &Tolerances::exact()).unwrap();
        assert!(diff.is_empty(), "{kind}: {diff}");
        assert_eq!(ma.spec_hash, mb.spec_hash);
        for f in files {
            let ta = std::fs::read(a.path().join(f)).unwrap();
            let tb = std::fs::read(b.path().join(f)).unwrap();
            assert!(!ta.is_empty(), "{kind}: {f} empty");
            assert_eq!(ta, tb, "{kind}: {f} differs between runs");
        }
    }
}

#[test]
fn halving_dt_lists_first_order_fields() {
    let run = |dt: f64| {
        let dir = tempfile::tempdir().unwrap();
        let text = KERNEL.replace("dt = 0.04", &format!("dt = {dt}"));
        harness::run(&spec(&text, ExperimentKind::LambdaSlope, dir.path())).unwrap()
    };
    let (a, b, c) = (run(0.04), run(0.02), run(0.01));
    let tol = Tolerances::uniform(1e-14, 0.0);
    let coarse = compare(&a, &b, &tol).unwrap();
    let fine = compare(&b, &c, &tol).unwrap();
    assert!(coarse.spec_hash_differs);
    // the stationary scheme has no dt in it, so λ̂ stays put
    assert!(coarse.field("lambda_hat").is_none() && fine.field("lambda_hat").is_none());
    for name in ["intercept", "value_T2", "value_T4"] {
        let ratio = coarse.field(name).unwrap().delta() / fine.field(name).unwrap().delta();
        assert!((1.6..=2.5).contains(&ratio), "{name}: first-order ratio {ratio}");
    }
}

#[test]
fn different_models_compare_with_large_deltas() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let text = KERNEL.replace("horizons = [2.0, 3.0, 4.0]", "horizons = [1.0, 2.0, 3.0]");
    let ma = harness::run(&spec(TRIVIAL, ExperimentKind::LambdaSlope, a.path())).unwrap();
    let mb = harness::run(&spec(&text, ExperimentKind::LambdaSlope, b.path())).unwrap();
    let diff = compare(&ma, &mb, &Tolerances::uniform(1e-6, 1e-6)).unwrap();
    assert!(diff.field("lambda_hat").unwrap().delta() > 0.5);
    // tolerances can silence a field
    let loose = Tolerances::uniform(1e-6, 1e-6).with_field("lambda_hat", 1.0, 0.0);
    assert!(compare(&ma, &mb, &loose).unwrap().field("lambda_hat").is_none());
}

#[test]
fn comparing_different_kinds_is_a_schema_mismatch() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ma = harness::run(&spec(KERNEL, ExperimentKind::LambdaSlope, a.path())).unwrap();
    let mb = harness::run(&spec(KERNEL, ExperimentKind::Energy, b.path())).unwrap();
    assert!(matches!(compare(&ma, &mb, &Tolerances::exact()), Err(Error::SchemaMismatch(_))));
    let mut mc = ma.clone();
    mc.results.pop();
    assert!(matches!(compare(&ma, &mc, &Tolerances::exact()), Err(Error::SchemaMismatch(_))));
}

#[test]
fn full_report_populates_every_acceptance_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[params]\ndt = 0.02\n";
    let m = harness::run(&spec(text, ExperimentKind::FullReport, dir.path())).unwrap();
    for id in 1..=12 {
        let c = m.check(&format!("criterion_{id}")).unwrap_or_else(|| panic!("row {id} missing"));
        assert!(!c.detail.is_empty());
    }
    let table = std::fs::read_to_string(dir.path().join("acceptance.tsv")).unwrap();
    assert_eq!(table.lines().count(), 13);
}

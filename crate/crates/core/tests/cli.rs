use rmt_thermal::cli::{main_with_args, svg_plot, ExperimentConfig, Series, EXIT_CONFIG, EXIT_OK, EXIT_THRESHOLD};
use std::fs;
use std::path::Path;

const SMALL_MC: &str = r#"
seed = 5

[system]
n = 2
h_s = [0.0, 0.0, 0.0, 1.0]
sigma = [0.0, 1.0, 1.0, 0.0]

[reservoir]
family = "gaussian"
eps0 = 0.0
a = 1.0
J = 8

[ensemble-mc]
N_list = [64, 128]
M = 3
window_center = 0.5
window_delta = 2.0
threshold = THRESHOLD
"#;

fn run(dir: &Path, cfg: &str, verb: &str, extra: &[&str]) -> i32 {
    let cfg_path = dir.join("cfg.toml");
    fs::write(&cfg_path, cfg).unwrap();
    let out = dir.join("out");
    let mut args = vec!["rmt-thermal".to_string(), verb.to_string(), "--config".into(), cfg_path.display().to_string(), "--out".into(), out.display().to_string()];
    args.extend(extra.iter().map(|s| s.to_string()));
    main_with_args(args)
}

fn small_mc(threshold: f64) -> String {
    SMALL_MC.replace("THRESHOLD", &threshold.to_string())
}

#[test]
fn malformed_config_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = small_mc(0.1).replace("n = 2", "n = 3");
    assert_eq!(run(dir.path(), &bad, "mc", &[]), EXIT_CONFIG);
    assert!(!dir.path().join("out").exists());
    let unknown = small_mc(0.1).replace("M = 3", "M = 3\nbogus = 1");
    assert_eq!(run(dir.path(), &unknown, "mc", &[]), EXIT_CONFIG);
    assert_eq!(run(dir.path(), "not [valid toml", "solve", &[]), EXIT_CONFIG);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn j_below_j0_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[system]
n = 1
h_s = [0.0]
sigma = [1.0]

[reservoir]
family = "lattice"
d = 1
eps0 = 1.0
J = 2

[selfconsistent]
e_min = -1.0
e_max = 1.0
e_points = 5
"#;
    assert_eq!(run(dir.path(), cfg, "solve", &[]), EXIT_CONFIG);
}

#[test]
fn composite_dimension_cap_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_mc(0.1).replace("N_list = [64, 128]", "N_list = [100000]");
    assert_eq!(run(dir.path(), &cfg, "crosscheck", &[]), EXIT_CONFIG);
}

#[test]
fn zero_threshold_crosscheck_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_mc(0.0).replace("N_list = [64, 128]", "N_list = [64]");
    assert_eq!(run(dir.path(), &cfg, "crosscheck", &[]), EXIT_THRESHOLD);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/crosscheck.json")).unwrap()).unwrap();
    assert!(report["result"]["max_deviation"].as_f64().unwrap() > 0.0);
}

#[test]
fn mc_output_independent_of_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = small_mc(0.1);
    assert_eq!(run(a.path(), &cfg, "mc", &["--jobs", "1"]), EXIT_OK);
    assert_eq!(run(b.path(), &cfg, "mc", &["--jobs", "3"]), EXIT_OK);
    for f in ["mc_realizations.json", "mc_aggregate.json", "mc_variance.csv"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    // a different seed gives different realizations
    let c = tempfile::tempdir().unwrap();
    assert_eq!(run(c.path(), &cfg, "mc", &["--seed", "6"]), EXIT_OK);
    assert_ne!(fs::read(a.path().join("out/mc_realizations.json")).unwrap(), fs::read(c.path().join("out/mc_realizations.json")).unwrap());
}

#[test]
fn csv_files_carry_metadata_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_mc(0.1);
    assert_eq!(run(dir.path(), &cfg, "mc", &[]), EXIT_OK);
    let text = fs::read_to_string(dir.path().join("out/mc_variance.csv")).unwrap();
    let first = text.lines().next().unwrap();
    let hash = ExperimentConfig::parse(&cfg).unwrap().hash();
    assert!(first.starts_with(&format!("# config_sha256={hash},seed=5,version=")), "{first}");
    assert_eq!(text.lines().nth(1).unwrap().split(',').next(), Some("N"));
}

#[test]
fn svg_is_well_formed_with_one_polyline_per_series() {
    let series = [
        Series { name: "first", points: vec![(0.0, 1.0), (1.0, 0.5), (2.0, 0.25)] },
        Series { name: "second <&>", points: vec![(0.0, 0.0), (2.0, f64::NAN), (3.0, 1.0)] },
    ];
    let text = svg_plot("t", "x", "y", &series, "c");
    let doc = roxmltree::Document::parse(&text).unwrap();
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[1].attribute("points").unwrap().split(' ').count(), 2);
}

#[test]
fn gibbs_scan_with_trivial_system_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[system]
n = 2
h_s = [0.0, 0.0, 0.0, 0.0]
sigma = [0.0, 1.0, 1.0, 0.0]

[reservoir]
family = "gaussian"
eps0 = 0.0
a = 1.0
J = 8

[gibbs]
beta = 0.5
J_list = [8, 16]
"#;
    assert_eq!(run(dir.path(), cfg, "gibbs-scan", &[]), EXIT_OK);
    let svg = fs::read_to_string(dir.path().join("out/gibbs_scan.svg")).unwrap();
    assert!(roxmltree::Document::parse(&svg).is_ok());
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(dir.path().join("out/gibbs_scan.csv")).unwrap();
    let mut rows = 0;
    for rec in rdr.records() {
        let d: f64 = rec.unwrap()[1].parse().unwrap();
        assert!(d <= 1e-8, "D_J = {d}");
        rows += 1;
    }
    assert_eq!(rows, 2);
}

#[test]
fn reservoir_info_and_solve_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = r#"
[system]
n = 2
h_s = [0.0, 0.0, 0.0, 1.0]
sigma = [0.0, 0.0, 0.0, 0.0]

[reservoir]
family = "exponential"
eps0 = 1.0
J = 6

[selfconsistent]
e_min = 0.5
e_max = 12.0
e_points = 9
"#;
    assert_eq!(run(dir.path(), cfg, "reservoir-info", &[]), EXIT_OK);
    assert_eq!(run(dir.path(), cfg, "solve", &[]), EXIT_OK);
    for f in ["conditions.json", "thermo.csv", "gamma.csv", "solve.json"] {
        assert!(dir.path().join("out").join(f).exists(), "{f}");
    }
}

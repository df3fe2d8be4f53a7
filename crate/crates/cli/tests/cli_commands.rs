//! Command-level behavior: CSV schemas, manifests, per-point failure
//! handling and byte-level determinism.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Parser;

use boundmode_cli::{run, Cli, CliError};

const GAAS: &str = "\
a = 1.0
b = 0.25
d = 1.0
eps1 = 13.0
eps2_re = 1.0
loss_fraction = 0.01
n_max = 3
cells_N = 6
";

const SILVER: &str = "\
a = 1.0
b = 0.25
d = 1.0
eps1 = 2.3
eps2_re = -20.0
loss_fraction = 0.01
n_max = 2
cells_N = 23
";

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("case.cfg");
    fs::write(&path, body).unwrap();
    path
}

fn run_cmd(config: &Path, out: &Path, extra: &[&str]) -> Result<(), CliError> {
    let mut argv = vec![
        "boundmode".to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    argv.extend(extra.iter().map(|s| s.to_string()));
    let cli = Cli::try_parse_from(argv).unwrap();
    run(&cli)
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|c| c.to_string()).collect())
        .collect()
}

fn col(header: &[String], name: &str) -> usize {
    header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"))
}

#[test]
fn modes_gaas_rows_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let out = tmp.path().join("out");
    run_cmd(&cfg, &out, &["modes"]).unwrap();

    let rows = read_csv(&out.join("modes.csv"));
    assert_eq!(
        rows[0].join(","),
        "n,re_kz_a,im_kz_a,re_k_a,im_k_a,abs_kx_a,q_a,gamma_a,in_gap,residual,seed_mode"
    );
    assert_eq!(rows.len(), 4); // header + 3 resonances
    let h = &rows[0];
    let r1 = &rows[1];
    let kz1: f64 = r1[col(h, "re_kz_a")].parse().unwrap();
    let q1: f64 = r1[col(h, "q_a")].parse().unwrap();
    let gamma1: f64 = r1[col(h, "gamma_a")].parse().unwrap();
    assert!((kz1 - 3.8705).abs() < 2e-3);
    assert!((q1 - 0.2934).abs() < 1e-3);
    assert!((gamma1 - 0.13623).abs() < 1e-4);
    assert_eq!(r1[col(h, "in_gap")], "true");
    assert_eq!(r1[col(h, "seed_mode")], "perturbative");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("modes_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "modes");
    assert_eq!(manifest["config_digest"].as_str().unwrap().len(), 64);
    assert!(manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|o| o == "modes.csv"));
    let meta = manifest["metadata"].as_object().unwrap();
    assert!(meta.contains_key("q1a_thin_layer"));
    assert!(meta.contains_key("a_over_lambda_medium"));
    assert!(meta.contains_key("a_over_lambda_vacuum"));
}

#[test]
fn modes_n_max_zero_gives_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &GAAS.replace("n_max = 3", "n_max = 0"));
    let out = tmp.path().join("out");
    run_cmd(&cfg, &out, &["modes"]).unwrap();
    let rows = read_csv(&out.join("modes.csv"));
    assert_eq!(rows.len(), 1);
}

#[test]
fn modes_silver_flags_scan_and_documents_decays() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SILVER);
    let out = tmp.path().join("out");
    run_cmd(&cfg, &out, &["modes"]).unwrap();
    let rows = read_csv(&out.join("modes.csv"));
    let h = &rows[0];
    for row in &rows[1..] {
        assert_eq!(row[col(h, "seed_mode")], "scan");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("modes_manifest.json")).unwrap())
            .unwrap();
    let meta = manifest["metadata"].as_object().unwrap();
    assert!(meta.contains_key("q1a_thin_layer"));
    assert!(meta.contains_key("q1a_finite_width"));
    assert_eq!(meta["q1a_reference"], "0.80");
    let notes = manifest["notes"].as_array().unwrap();
    assert!(notes.iter().any(|n| n.as_str().unwrap().contains("0.80")));
}

#[test]
fn spectrum_beta_column_is_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let out = tmp.path().join("out");
    run_cmd(
        &cfg,
        &out,
        &[
            "spectrum", "--k-min", "0.5", "--k-max", "8.0", "--points", "400",
        ],
    )
    .unwrap();
    let rows = read_csv(&out.join("spectrum.csv"));
    assert_eq!(
        rows[0].join(","),
        "k_a,Gamma_1_over_Gamma,Gamma_2_over_Gamma,Gamma_3_over_Gamma,Gamma_prop_over_Gamma,beta"
    );
    assert_eq!(rows.len(), 401);
    for row in &rows[1..] {
        let g: Vec<f64> = row[1..4].iter().map(|v| v.parse().unwrap()).collect();
        let prop: f64 = row[4].parse().unwrap();
        let beta: f64 = row[5].parse().unwrap();
        let total: f64 = g.iter().sum();
        assert!((beta - total / (total + prop)).abs() < 1e-12);
    }
    assert!(!out.join("spectrum_deltas.csv").exists());
}

#[test]
fn spectrum_lossless_writes_delta_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &GAAS.replace("loss_fraction = 0.01", "loss_fraction = 0"),
    );
    let out = tmp.path().join("out");
    run_cmd(&cfg, &out, &["spectrum", "--points", "50"]).unwrap();
    let rows = read_csv(&out.join("spectrum.csv"));
    for row in &rows[1..] {
        for v in &row[1..4] {
            assert_eq!(v.parse::<f64>().unwrap(), 0.0);
        }
    }
    let deltas = read_csv(&out.join("spectrum_deltas.csv"));
    assert_eq!(deltas[0].join(","), "n,k_a,integrated_weight_over_Gamma");
    assert_eq!(deltas.len(), 4);
}

#[test]
fn spectrum_plot_script_is_optional_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let out = tmp.path().join("out");
    run_cmd(
        &cfg,
        &out,
        &["spectrum", "--points", "40", "--emit-plot-script"],
    )
    .unwrap();
    let script = fs::read_to_string(out.join("spectrum.plot")).unwrap();
    assert!(script.contains("spectrum.csv"));
}

#[test]
fn beta_sweep_gaas_point_and_lossless_limit() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let out = tmp.path().join("out");
    run_cmd(
        &cfg,
        &out,
        &[
            "beta-sweep",
            "--eps2-from",
            "1.0",
            "--eps2-to",
            "1.0",
            "--points",
            "1",
        ],
    )
    .unwrap();
    let rows = read_csv(&out.join("beta_sweep.csv"));
    assert_eq!(rows[0].join(","), "eps2,n,beta_peak,status");
    let beta1: f64 = rows[1][2].parse().unwrap();
    assert!((beta1 - 0.968).abs() < 1e-3);

    let out0 = tmp.path().join("out0");
    let cfg0 = tmp.path().join("lossless.cfg");
    fs::write(
        &cfg0,
        GAAS.replace("loss_fraction = 0.01", "loss_fraction = 0"),
    )
    .unwrap();
    run_cmd(
        &cfg0,
        &out0,
        &[
            "beta-sweep",
            "--eps2-from",
            "-5.0",
            "--eps2-to",
            "3.0",
            "--points",
            "5",
        ],
    )
    .unwrap();
    let rows0 = read_csv(&out0.join("beta_sweep.csv"));
    for row in &rows0[1..] {
        if row[3] == "ok" {
            assert_eq!(row[2].parse::<f64>().unwrap(), 1.0);
        }
    }
}

#[test]
fn beta_sweep_flags_infeasible_points() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let out = tmp.path().join("out");
    // eps2 > eps1/2 breaks the transverse-binding gate
    run_cmd(
        &cfg,
        &out,
        &[
            "beta-sweep",
            "--eps2-from",
            "10.0",
            "--eps2-to",
            "12.0",
            "--points",
            "2",
        ],
    )
    .unwrap();
    let rows = read_csv(&out.join("beta_sweep.csv"));
    assert!(rows[1..].iter().all(|r| r[3] == "infeasible"));
}

#[test]
fn threshold_sweep_values_and_linearity() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let out = tmp.path().join("out");
    run_cmd(
        &cfg,
        &out,
        &[
            "threshold-sweep",
            "--eps2-from",
            "1.0",
            "--eps2-to",
            "1.0",
            "--points",
            "1",
            "--beta-mode",
            "one",
        ],
    )
    .unwrap();
    let rows = read_csv(&out.join("threshold_sweep.csv"));
    assert_eq!(
        rows[0].join(","),
        "eps2,n,re_alpha_a,im_alpha_a,beta_used,status"
    );
    let im1: f64 = rows[1][3].parse().unwrap();
    assert!((im1 - (-0.0697)).abs() < 1e-4);
    assert_eq!(rows[1][4].parse::<f64>().unwrap(), 1.0);

    // doubling the loss fraction doubles the gain pointwise
    let out2 = tmp.path().join("out2");
    let cfg2 = tmp.path().join("double.cfg");
    fs::write(
        &cfg2,
        GAAS.replace("loss_fraction = 0.01", "loss_fraction = 0.02"),
    )
    .unwrap();
    run_cmd(
        &cfg2,
        &out2,
        &[
            "threshold-sweep",
            "--eps2-from",
            "1.0",
            "--eps2-to",
            "1.0",
            "--points",
            "1",
            "--beta-mode",
            "one",
        ],
    )
    .unwrap();
    let rows2 = read_csv(&out2.join("threshold_sweep.csv"));
    let im2: f64 = rows2[1][3].parse().unwrap();
    assert!((im2 / im1 - 2.0).abs() < 1e-10);

    // lossless threshold is zero gain
    let out0 = tmp.path().join("out0");
    let cfg0 = tmp.path().join("lossless.cfg");
    fs::write(
        &cfg0,
        GAAS.replace("loss_fraction = 0.01", "loss_fraction = 0"),
    )
    .unwrap();
    run_cmd(
        &cfg0,
        &out0,
        &[
            "threshold-sweep",
            "--eps2-from",
            "1.0",
            "--eps2-to",
            "1.0",
            "--points",
            "1",
        ],
    )
    .unwrap();
    let rows0 = read_csv(&out0.join("threshold_sweep.csv"));
    assert_eq!(rows0[1][3].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn band_empty_lattice_has_no_gap_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &GAAS.replace("eps2_re = 1.0", "eps2_re = 13.0"));
    let out = tmp.path().join("out");
    run_cmd(&cfg, &out, &["band"]).unwrap();
    let gaps = read_csv(&out.join("gaps.csv"));
    assert_eq!(gaps.len(), 1); // header only
    let band = read_csv(&out.join("band.csv"));
    assert_eq!(band[0].join(","), "kz_a,cos_pa");
    assert!(band.len() > 100);
}

#[test]
fn field_grid_shape_and_header() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let out = tmp.path().join("out");
    run_cmd(
        &cfg,
        &out,
        &["field", "--nx", "3", "--ny", "3", "--nz", "3"],
    )
    .unwrap();
    let text = fs::read_to_string(out.join("field.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x,y,z,Re(Ex),Im(Ex),Re(Ey),Im(Ey),Re(Ez),Im(Ez)"
    );
    assert_eq!(lines.count(), 27);
}

#[test]
fn leakage_crosses_threshold_between_4_and_5() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let out = tmp.path().join("out");
    run_cmd(&cfg, &out, &["leakage", "--n-from", "4", "--n-to", "8"]).unwrap();
    let rows = read_csv(&out.join("leakage.csv"));
    assert_eq!(rows[0].join(","), "N,fraction");
    let frac: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(frac[0] > 1e-10); // N=4
    assert!(frac[1] < 1e-10); // N=5
    assert!((frac[2] - 8e-14).abs() < 1e-14); // N=6
}

#[test]
fn reruns_and_parallelism_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let combos: &[&[&str]] = &[
        &["modes"],
        &["spectrum", "--points", "300"],
        &[
            "beta-sweep",
            "--eps2-from",
            "-3.0",
            "--eps2-to",
            "2.0",
            "--points",
            "7",
        ],
    ];
    for extra in combos {
        let out_a = tmp.path().join(format!("a_{}", extra[0]));
        let out_b = tmp.path().join(format!("b_{}", extra[0]));
        let out_c = tmp.path().join(format!("c_{}", extra[0]));
        run_cmd(&cfg, &out_a, extra).unwrap();
        run_cmd(&cfg, &out_b, extra).unwrap();
        let mut serial = vec!["--serial"];
        serial.extend_from_slice(extra);
        run_cmd(&cfg, &out_c, &serial).unwrap();
        for entry in fs::read_dir(&out_a).unwrap() {
            let name = entry.unwrap().file_name();
            let a = fs::read(out_a.join(&name)).unwrap();
            let b = fs::read(out_b.join(&name)).unwrap();
            let c = fs::read(out_c.join(&name)).unwrap();
            assert_eq!(a, b, "rerun differs for {name:?}");
            assert_eq!(a, c, "serial/parallel differ for {name:?}");
        }
    }
}

#[test]
fn config_errors_exit_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "a = 1.0\nbogus_key = 2\n");
    let out = tmp.path().join("out");
    let err = run_cmd(&cfg, &out, &["modes"]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    let missing = tmp.path().join("nonexistent.cfg");
    let err2 = run_cmd(&missing, &out, &["modes"]).unwrap_err();
    assert_eq!(err2.exit_code(), 1);
}

#[test]
fn solver_failures_exit_code_two_but_outputs_written() {
    let tmp = tempfile::tempdir().unwrap();
    // empty lattice: no roots at all, leakage cannot find a fundamental
    let cfg = write_config(tmp.path(), &GAAS.replace("eps2_re = 1.0", "eps2_re = 13.0"));
    let out = tmp.path().join("out");
    let err = run_cmd(&cfg, &out, &["leakage"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);

    // sweep with a failing interior point still writes the CSV
    let cfg2 = write_config(tmp.path(), GAAS);
    let out2 = tmp.path().join("out2");
    let result = run_cmd(
        &cfg2,
        &out2,
        &[
            "beta-sweep",
            "--eps2-from",
            "-2.0",
            "--eps2-to",
            "12.0",
            "--points",
            "8",
        ],
    );
    // points above eps1/2 are infeasible (flagged), none hard-fail here
    assert!(result.is_ok());
    assert!(out2.join("beta_sweep.csv").exists());
}

#[test]
fn gamma_prop_model_constant_changes_beta() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), GAAS);
    let out = tmp.path().join("out");
    let mut argv = vec![
        "boundmode",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--gamma-prop-model",
        "constant:0.5",
        "spectrum",
        "--points",
        "60",
    ];
    let cli = Cli::try_parse_from(argv.drain(..)).unwrap();
    run(&cli).unwrap();
    let rows = read_csv(&out.join("spectrum.csv"));
    for row in &rows[1..] {
        assert_eq!(row[4].parse::<f64>().unwrap(), 0.5);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("spectrum_manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["metadata"]["gamma_prop_model"], "constant:0.5");
}

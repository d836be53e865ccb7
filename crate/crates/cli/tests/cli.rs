use std::path::Path;
use std::process::{Command, Output};

fn pmsfwm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pmsfwm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// CSV body without `#` comment lines, split into rows of fields.
fn body(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let k = rows[0].iter().position(|h| h == name).unwrap();
    rows[1..].iter().map(|r| r[k].parse().unwrap()).collect()
}

/// Short runs keep the Monte Carlo commands quick.
const SHORT: [&str; 2] = ["--set", "run.duration_s=0.2"];

#[test]
fn spectra_reports_ratio_and_header() {
    let o = pmsfwm(&["spectra", "--step-thz", "0.05"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let err = stderr(&o);
    let ratio: f64 = err.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((ratio - 87.58066172193753).abs() < 1e-9, "{err}");
    let text = stdout(&o);
    assert!(text.starts_with("# pmsfwm spectra"));
    assert!(text.contains("# peak_power_w = 0.8"));
    assert_eq!(
        body(&text)[0],
        ["detuning_thz", "f_hh", "f_vv", "f_hv", "f_vh"]
    );
    assert_eq!(body(&text).len(), 1 + 41);
}

#[test]
fn pump_on_one_axis_has_no_vector_columns() {
    let o = pmsfwm(&["spectra", "--step-thz", "0.1", "--theta", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = body(&stdout(&o));
    assert!(column(&rows, "f_hv").iter().all(|&v| v == 0.0));
    assert!(column(&rows, "f_vh").iter().all(|&v| v == 0.0));
    assert!(column(&rows, "f_hh").iter().any(|&v| v > 0.0));
}

#[test]
fn vector_length_override_changes_only_vector_columns() {
    let derived = pmsfwm(&[
        "spectra",
        "--step-thz",
        "0.1",
        "--unset",
        "fiber.lv_override_m",
    ]);
    let quoted = pmsfwm(&["spectra", "--step-thz", "0.1", "--lv-override", "15"]);
    let (a, b) = (body(&stdout(&derived)), body(&stdout(&quoted)));
    for name in ["detuning_thz", "f_hh", "f_vv"] {
        assert_eq!(column(&a, name), column(&b, name), "{name}");
    }
    assert_ne!(column(&a, "f_hv"), column(&b, "f_hv"));
    assert_ne!(column(&a, "f_vh"), column(&b, "f_vh"));
}

#[test]
fn walkoff_profile_peaks_at_splice() {
    let o = pmsfwm(&["walkoff", "--samples", "3"]);
    assert!(o.status.success());
    let rows = body(&stdout(&o));
    assert_eq!(column(&rows, "z_m"), [0.0, 75.0, 150.0]);
    let d = column(&rows, "delay_ps");
    assert!((d[1] - 21.45).abs() < 1e-9 && d[2].abs() < 1e-12, "{d:?}");

    let o = pmsfwm(&[
        "walkoff",
        "--samples",
        "3",
        "--set",
        "fiber.axis_offsets_deg=[0, 0]",
    ]);
    let d = column(&body(&stdout(&o)), "delay_ps");
    assert!((d[2] - 42.9).abs() < 1e-9, "{d:?}");
}

#[test]
fn degenerate_requests_exit_with_one() {
    for args in [
        vec!["walkoff", "--samples", "0"],
        vec!["walkoff", "--set", "fiber.segment_lengths_m=[0.0, 0.0]"],
        vec!["spectra", "--theta", "180"],
        vec![
            "sweep",
            "--param",
            "pump.nonsense",
            "--from",
            "0",
            "--to",
            "1",
            "--points",
            "3",
        ],
        vec![
            "sweep",
            "--param",
            "noise.model",
            "--from",
            "0",
            "--to",
            "1",
            "--points",
            "3",
        ],
    ] {
        let o = pmsfwm(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
        assert!(stderr(&o).starts_with("error:"));
    }
}

#[test]
fn unknown_config_key_exits_with_two() {
    let o = pmsfwm(&["--set", "pump.colour=3", "spectra"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let first = pmsfwm(&["--dump-config", "--theta", "30", "--seed", "9"]);
    assert!(first.status.success());
    let path = dir.path().join("dumped.toml");
    std::fs::write(&path, first.stdout.clone()).unwrap();
    let second = pmsfwm(&["--dump-config", "--config", path.to_str().unwrap()]);
    assert!(second.status.success(), "{}", stderr(&second));
    assert_eq!(stdout(&first), stdout(&second));
    assert!(stdout(&first).contains("theta_deg = 30.0"));
    assert!(stdout(&first).contains("seed = 9"));
}

#[test]
fn fringe_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: &str| {
        let p = dir.path().join(name);
        let o = pmsfwm(
            &[
                &SHORT[..],
                &["fringe", "--seed", seed, "-o", p.to_str().unwrap()],
            ]
            .concat(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read_to_string(p).unwrap()
    };
    let (a, b, c) = (run("a.csv", "5"), run("b.csv", "5"), run("c.csv", "6"));
    assert_eq!(a, b);
    assert_ne!(body(&a), body(&c));
    let rows = body(&a);
    assert_eq!(
        rows[0],
        [
            "theta_s_deg",
            "theta_i_deg",
            "pulses",
            "singles_s",
            "singles_i",
            "coincidences",
            "accidentals_est"
        ]
    );
    assert_eq!(rows.len(), 1 + 2 * 13);
}

#[test]
fn no_pairs_means_no_coincidences() {
    let o = pmsfwm(
        &[
            &SHORT[..],
            &["--set", "run.mean_pairs_per_pulse=0", "fringe"],
        ]
        .concat(),
    );
    assert!(o.status.success());
    let rows = body(&stdout(&o));
    assert!(column(&rows, "coincidences").iter().all(|&c| c == 0.0));
}

#[test]
fn hwp_angles_are_doubled() {
    let o = pmsfwm(
        &[
            &SHORT[..],
            &[
                "--hwp-angles",
                "fringe",
                "--theta-s",
                "67.5",
                "--theta-i",
                "0,22.5",
            ],
        ]
        .concat(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = body(&stdout(&o));
    assert_eq!(column(&rows, "theta_s_deg"), [135.0, 135.0]);
    assert_eq!(column(&rows, "theta_i_deg"), [0.0, 45.0]);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn fit_reports_each_basis() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("fringe.csv");
    let o = pmsfwm(&[
        "fringe",
        "--set",
        "run.duration_s=2",
        "-o",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let o = pmsfwm(&["fit", data.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = body(&stdout(&o));
    assert_eq!(
        rows[0],
        [
            "theta_s_deg",
            "visibility",
            "vis_stderr",
            "phase_deg",
            "mean_level",
            "red_chisq"
        ]
    );
    assert_eq!(column(&rows, "theta_s_deg"), [0.0, 135.0]);
    for v in column(&rows, "visibility") {
        assert!((0.8..=1.0).contains(&v), "{v}");
    }
    assert!(stderr(&o).contains("theta_s = 135 deg"));
}

const HEADER: &str =
    "theta_s_deg,theta_i_deg,pulses,singles_s,singles_i,coincidences,accidentals_est\n";

#[test]
fn malformed_csv_exits_with_two_and_locates_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cell = write(
        dir.path(),
        "bad.csv",
        &format!("{HEADER}0,0,100,10,10,5,0.1\n0,45,100,10,ten,5,0.1\n"),
    );
    let o = pmsfwm(&["fit", &bad_cell]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("singles_i"), "{err}");

    let bad_header = write(dir.path(), "hdr.csv", "theta,counts\n0,1\n");
    let o = pmsfwm(&["fit", &bad_header]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("expected"), "{}", stderr(&o));

    let o = pmsfwm(&["fit", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn three_angles_are_not_enough() {
    let dir = tempfile::tempdir().unwrap();
    let rows: String = [0, 45, 90]
        .iter()
        .map(|t| format!("0,{t},1000,100,100,{},0.0\n", 50 + t))
        .collect();
    let p = write(dir.path(), "three.csv", &format!("{HEADER}{rows}"));
    let o = pmsfwm(&["fit", &p]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("insufficient"), "{}", stderr(&o));
}

#[test]
fn empty_sweep_has_header_only() {
    let o = pmsfwm(&[
        "sweep",
        "--param",
        "pump.theta_deg",
        "--from",
        "0",
        "--to",
        "90",
        "--points",
        "0",
    ]);
    assert!(o.status.success());
    assert_eq!(
        body(&stdout(&o)),
        [["param_value", "suppression", "mu_signal_band"]]
    );
}

#[test]
fn detuning_sweep_crosses_one_hundred_near_design_point() {
    let o = pmsfwm(&[
        "sweep",
        "--param",
        "filters.signal_detuning_thz",
        "--from",
        "0.05",
        "--to",
        "1.0",
        "--points",
        "96",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = body(&stdout(&o));
    let x = column(&rows, "param_value");
    let s = column(&rows, "suppression");
    let first = (1..s.len())
        .find(|&k| s[k - 1] < 100.0 && s[k] >= 100.0)
        .unwrap();
    assert!(
        (0.2..=0.3).contains(&x[first]),
        "first crossing at {}",
        x[first]
    );
}

#[test]
fn vector_spectrum_peaks_at_balanced_pump() {
    let vector_at = |theta: f64| {
        let t = theta.to_string();
        let o = pmsfwm(&[
            "spectra",
            "--from-thz",
            "0.2",
            "--to-thz",
            "0.3",
            "--step-thz",
            "0.1",
            "--theta",
            &t,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        let rows = body(&stdout(&o));
        column(&rows, "f_hv")[0] + column(&rows, "f_vh")[0]
    };
    let thetas: Vec<f64> = (0..=18).map(|k| 5.0 * k as f64).collect();
    let v: Vec<f64> = thetas.iter().map(|&t| vector_at(t)).collect();
    let best = (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap();
    assert_eq!(thetas[best], 45.0);
    assert_eq!((v[0], v[18]), (0.0, 0.0));
}

#[test]
fn total_length_sweep_scales_segments() {
    let o = pmsfwm(&[
        "sweep",
        "--param",
        "fiber.total_length_m",
        "--from",
        "50",
        "--to",
        "150",
        "--points",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = column(&body(&stdout(&o)), "suppression");
    assert!((s[2] - 87.58066172193753).abs() < 1e-9, "{s:?}");
}

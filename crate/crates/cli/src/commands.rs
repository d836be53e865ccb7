//! The five subcommands. Each writes its CSV to the given sink and returns
//! whatever summary the binary prints alongside it.

use std::io::{Read, Write};

use pmsfwm_core::counting::simulate_run;
use pmsfwm_core::fiber::walkoff_delay_profile;
use pmsfwm_core::fringe::{fit_fringe_with, FitOptions, FitResult, FringeDataset, FringePoint};
use pmsfwm_core::spectra::{band_rate, spectrum, suppression_ratio, Components, DetuningGrid};
use pmsfwm_core::state::AnalyzerSetting;
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::config::{ConfigSource, Experiment, ExperimentConfig};
use crate::error::{CliError, Result};

/// Grid points used to integrate the PFSD across one filter passband.
const BAND_POINTS: usize = 201;

pub const FRINGE_COLUMNS: [&str; 7] = [
    "theta_s_deg",
    "theta_i_deg",
    "pulses",
    "singles_s",
    "singles_i",
    "coincidences",
    "accidentals_est",
];

fn io_err(e: std::io::Error) -> CliError {
    CliError::io("output", e)
}

fn csv_err(e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io_err(io),
        other => CliError::Schema(format!("csv: {other:?}")),
    }
}

/// Echoes the configuration as `#` comment lines.
fn write_config_comments(out: &mut dyn Write, command: &str, cfg: &ExperimentConfig) -> Result<()> {
    writeln!(out, "# pmsfwm {command}").map_err(io_err)?;
    for line in cfg.to_toml().lines().filter(|l| !l.is_empty()) {
        writeln!(out, "# {line}").map_err(io_err)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectraArgs {
    pub from_thz: f64,
    pub to_thz: f64,
    pub step_thz: f64,
}

impl Default for SpectraArgs {
    fn default() -> Self {
        SpectraArgs {
            from_thz: -1.0,
            to_thz: 1.0,
            step_thz: 0.001,
        }
    }
}

#[derive(Serialize)]
struct SpectrumRow {
    detuning_thz: f64,
    f_hh: f64,
    f_vv: f64,
    f_hv: f64,
    f_vh: f64,
}

/// Writes the four PFSD components on the requested grid and returns the
/// scalar-to-vector ratio at the signal filter detuning.
pub fn cmd_spectra(cfg: &ExperimentConfig, args: &SpectraArgs, out: &mut dyn Write) -> Result<f64> {
    let exp = cfg.validate()?;
    let span = args.to_thz - args.from_thz;
    if !(args.step_thz.is_finite() && args.step_thz > 0.0 && span.is_finite() && span > 0.0) {
        return Err(CliError::Usage(format!(
            "spectra: grid {}..{} step {} needs from < to and step > 0",
            args.from_thz, args.to_thz, args.step_thz
        )));
    }
    let points = (span / args.step_thz + 1e-9).floor() as usize + 1;
    let stop = args.from_thz + args.step_thz * (points - 1) as f64;
    let grid = DetuningGrid::linspace_thz(args.from_thz, stop, points.max(2))
        .map_err(|e| CliError::model("spectra grid", e))?;
    let spec = spectrum(&grid, &exp.pump, &exp.line, &exp.lengths, exp.phase_factor);
    let detuning = exp.signal_filter.center_thz();
    let ratio = suppression_ratio(
        detuning,
        &exp.pump,
        &exp.line,
        &exp.lengths,
        exp.phase_factor,
    )
    .value();

    write_config_comments(out, "spectra", cfg)?;
    writeln!(out, "# l_scalar_m = {:?}", exp.lengths.l_scalar()).map_err(io_err)?;
    writeln!(out, "# l_vector_m = {:?}", exp.lengths.l_vector()).map_err(io_err)?;
    writeln!(out, "# suppression_ratio at {detuning:?} THz = {ratio:?}").map_err(io_err)?;
    let mut w = csv::Writer::from_writer(out);
    for (k, thz) in spec.grid.thz().into_iter().enumerate() {
        w.serialize(SpectrumRow {
            detuning_thz: thz,
            f_hh: spec.f_hh[k],
            f_vv: spec.f_vv[k],
            f_hv: spec.f_hv[k],
            f_vh: spec.f_vh[k],
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(ratio)
}

#[derive(Serialize)]
struct WalkoffRow {
    z_m: f64,
    delay_ps: f64,
}

pub fn cmd_walkoff(cfg: &ExperimentConfig, samples: usize, out: &mut dyn Write) -> Result<()> {
    let exp = cfg.validate()?;
    let profile =
        walkoff_delay_profile(&exp.line, samples).map_err(|e| CliError::model("walkoff", e))?;
    write_config_comments(out, "walkoff", cfg)?;
    let mut w = csv::Writer::from_writer(out);
    for (z_m, delay_ps) in profile {
        w.serialize(WalkoffRow { z_m, delay_ps }).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FringeArgs {
    /// Overrides `fringe.theta_s_deg`.
    pub theta_s: Option<Vec<f64>>,
    /// Overrides the configured idler angle range.
    pub theta_i: Option<Vec<f64>>,
    /// Inputs are half-wave-plate angles; the analyzed polarization turns by twice as much.
    pub hwp_angles: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeRow {
    pub theta_s_deg: f64,
    pub theta_i_deg: f64,
    pub pulses: u64,
    pub singles_s: f64,
    pub singles_i: f64,
    pub coincidences: f64,
    pub accidentals_est: f64,
}

/// One Monte Carlo run per (θ_s, θ_i). Row r uses seed `run.seed + r`, so the
/// output depends only on the configuration.
pub fn cmd_fringe(
    cfg: &ExperimentConfig,
    args: &FringeArgs,
    out: &mut dyn Write,
) -> Result<Vec<FringeRow>> {
    let exp = cfg.validate()?;
    let scale = if args.hwp_angles { 2.0 } else { 1.0 };
    let theta_s = args
        .theta_s
        .clone()
        .unwrap_or_else(|| cfg.fringe.theta_s_deg.clone());
    let theta_i = match &args.theta_i {
        Some(list) => list.clone(),
        None => cfg.theta_i_list()?,
    };
    if theta_s.iter().chain(&theta_i).any(|t| !t.is_finite()) {
        return Err(CliError::Usage(
            "fringe: analyzer angles must be finite".into(),
        ));
    }

    let mut rows = Vec::with_capacity(theta_s.len() * theta_i.len());
    for &ts in &theta_s {
        for &ti in &theta_i {
            let run = pmsfwm_core::counting::RunConfig {
                seed: exp.run.seed.wrapping_add(rows.len() as u64),
                ..exp.run
            };
            let setting = AnalyzerSetting::new(ts * scale, ti * scale);
            let rec = simulate_run(&run, &exp.state, &setting, &exp.losses, &exp.detectors)
                .map_err(|e| CliError::model(format!("fringe at θ_s={ts}, θ_i={ti}"), e))?;
            rows.push(FringeRow {
                theta_s_deg: ts * scale,
                theta_i_deg: ti * scale,
                pulses: rec.pulses,
                singles_s: rec.singles_s as f64,
                singles_i: rec.singles_i as f64,
                coincidences: rec.coincidences as f64,
                accidentals_est: rec.accidentals_estimate,
            });
        }
    }

    write_config_comments(out, "fringe", cfg)?;
    let mut w = csv::Writer::from_writer(out);
    for row in &rows {
        w.serialize(CountRow::from(*row)).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(rows)
}

/// Integer columns print without a fractional part.
#[derive(Serialize)]
struct CountRow {
    theta_s_deg: f64,
    theta_i_deg: f64,
    pulses: u64,
    singles_s: u64,
    singles_i: u64,
    coincidences: u64,
    accidentals_est: f64,
}

impl From<FringeRow> for CountRow {
    fn from(r: FringeRow) -> Self {
        CountRow {
            theta_s_deg: r.theta_s_deg,
            theta_i_deg: r.theta_i_deg,
            pulses: r.pulses,
            singles_s: r.singles_s as u64,
            singles_i: r.singles_i as u64,
            coincidences: r.coincidences as u64,
            accidentals_est: r.accidentals_est,
        }
    }
}

/// Parses the counting CSV. `origin` names the source in diagnostics.
pub fn read_fringe_csv(input: impl Read, origin: &str) -> Result<Vec<FringeRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| CliError::Schema(format!("{origin}: {e}")))?
        .clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != FRINGE_COLUMNS {
        return Err(CliError::Schema(format!(
            "{origin}: header is `{}`, expected `{}`",
            found.join(","),
            FRINGE_COLUMNS.join(",")
        )));
    }
    let mut rows = Vec::new();
    for result in reader.deserialize::<FringeRow>() {
        let row = result.map_err(|e| {
            let place = e
                .position()
                .map(|p| format!("line {}", p.line()))
                .unwrap_or_else(|| "unknown line".into());
            let detail = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => match err.field() {
                    Some(col) => format!(
                        "column {} ({}): {}",
                        col + 1,
                        FRINGE_COLUMNS.get(col as usize).unwrap_or(&"?"),
                        err.kind()
                    ),
                    None => err.kind().to_string(),
                },
                _ => e.to_string(),
            };
            CliError::Schema(format!("{origin}: {place}: {detail}"))
        })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Groups rows by θ_s in order of first appearance.
fn group_by_basis(rows: &[FringeRow]) -> Vec<(f64, Vec<FringeRow>)> {
    let mut groups: Vec<(f64, Vec<FringeRow>)> = Vec::new();
    for row in rows {
        match groups.iter_mut().find(|(ts, _)| *ts == row.theta_s_deg) {
            Some((_, g)) => g.push(*row),
            None => groups.push((row.theta_s_deg, vec![*row])),
        }
    }
    groups
}

#[derive(Serialize)]
struct ReportRow {
    theta_s_deg: f64,
    visibility: f64,
    vis_stderr: f64,
    phase_deg: f64,
    mean_level: f64,
    red_chisq: f64,
}

/// Fits every basis in `rows`, writes the report CSV and returns the fits
/// with a plain-text summary.
pub fn cmd_fit(
    rows: &[FringeRow],
    subtract_accidentals: bool,
    out: &mut dyn Write,
) -> Result<(Vec<(f64, FitResult)>, String)> {
    if rows.is_empty() {
        return Err(CliError::Schema("fit: dataset has no rows".into()));
    }
    let opts = FitOptions {
        subtract_accidentals,
        ..FitOptions::default()
    };
    let mut fits = Vec::new();
    for (theta_s, group) in group_by_basis(rows) {
        let points = group
            .iter()
            .map(|r| FringePoint {
                theta_i_deg: r.theta_i_deg,
                counts: r.coincidences,
                accidentals: r.accidentals_est,
            })
            .collect();
        let context = format!("fit at θ_s={theta_s}");
        let data = FringeDataset::new(theta_s, points, group[0].pulses)
            .map_err(|e| CliError::model(&context, e))?;
        let fit = fit_fringe_with(&data, &opts).map_err(|e| CliError::model(&context, e))?;
        fits.push((theta_s, fit));
    }

    let mut w = csv::Writer::from_writer(out);
    let mut text = String::new();
    for (theta_s, f) in &fits {
        w.serialize(ReportRow {
            theta_s_deg: *theta_s,
            visibility: f.visibility,
            vis_stderr: f.visibility_stderr,
            phase_deg: f.phase_deg,
            mean_level: f.mean_level,
            red_chisq: f.reduced_chi_square,
        })
        .map_err(csv_err)?;
        text.push_str(&format!(
            "theta_s = {theta_s} deg: V = {:.4} ± {:.4}, phase = {:.2} ± {:.2} deg, mean = {:.1} ± {:.1}, reduced chi² = {:.3}{}\n",
            f.visibility,
            f.visibility_stderr,
            f.phase_deg,
            f.phase_stderr_deg,
            f.mean_level,
            f.mean_level_stderr,
            f.reduced_chi_square,
            if f.exceeded_one { " (unclamped estimate exceeded 1)" } else { "" },
        ));
    }
    w.flush().map_err(io_err)?;
    Ok((fits, text))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepArgs {
    /// Dotted config path, or `fiber.total_length_m` to scale all segments.
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub points: usize,
}

/// Sweepable pseudo-parameter: total line length with segment proportions kept.
pub const TOTAL_LENGTH: &str = "fiber.total_length_m";

/// Optional keys that may be swept even when the base config omits them.
const OPTIONAL_NUMERIC: [&str; 1] = ["fiber.lv_override_m"];

#[derive(Serialize)]
struct SweepRow {
    param_value: f64,
    suppression: f64,
    mu_signal_band: f64,
}

/// Writes one sweep value into a config.
type Setter = Box<dyn Fn(&mut ConfigSource, f64) -> Result<()>>;

fn sweep_setter(src: &ConfigSource, param: &str) -> Result<Setter> {
    if param == TOTAL_LENGTH {
        let lengths: Vec<f64> = src.config()?.fiber.segment_lengths_m;
        let total: f64 = lengths.iter().sum();
        return Ok(Box::new(move |s: &mut ConfigSource, v: f64| {
            let scaled = lengths
                .iter()
                .map(|l| Value::Float(l * v / total))
                .collect();
            s.set("fiber.segment_lengths_m", Value::Array(scaled))
        }));
    }
    let path = param.to_string();
    match src.get(param) {
        Some(Value::Float(_)) => Ok(Box::new(move |s, v| s.set(&path, Value::Float(v)))),
        Some(Value::Integer(_)) => Ok(Box::new(move |s, v| {
            s.set(&path, Value::Integer(v.round() as i64))
        })),
        Some(_) => Err(CliError::Usage(format!(
            "sweep: `{param}` is not a numeric parameter"
        ))),
        None if OPTIONAL_NUMERIC.contains(&param) => {
            Ok(Box::new(move |s, v| s.set(&path, Value::Float(v))))
        }
        None => Err(CliError::Usage(format!(
            "sweep: unknown parameter `{param}`"
        ))),
    }
}

fn sweep_point(exp: &Experiment) -> Result<(f64, f64)> {
    let suppression = suppression_ratio(
        exp.signal_filter.center_thz(),
        &exp.pump,
        &exp.line,
        &exp.lengths,
        exp.phase_factor,
    )
    .value();
    let (lo, hi) = exp.signal_filter.edges_thz();
    let mu = if hi > lo {
        let grid = DetuningGrid::linspace_thz(lo, hi, BAND_POINTS)
            .map_err(|e| CliError::model("sweep band grid", e))?;
        let spec = spectrum(&grid, &exp.pump, &exp.line, &exp.lengths, exp.phase_factor);
        band_rate(&spec, &exp.signal_filter, Components::All, &exp.rate_model)
            .map_err(|e| CliError::model("sweep band rate", e))?
            .pairs_per_pulse
    } else {
        0.0
    };
    Ok((suppression, mu))
}

/// Re-evaluates suppression and signal-band pair number at each of `points`
/// evenly spaced parameter values from `from` to `to`.
pub fn cmd_sweep(
    src: &ConfigSource,
    args: &SweepArgs,
    out: &mut dyn Write,
) -> Result<Vec<(f64, f64, f64)>> {
    let set = sweep_setter(src, &args.param)?;
    if !(args.from.is_finite() && args.to.is_finite()) {
        return Err(CliError::Usage("sweep: range ends must be finite".into()));
    }
    let values: Vec<f64> = match args.points {
        0 => Vec::new(),
        1 => vec![args.from],
        n => (0..n)
            .map(|k| args.from + (args.to - args.from) * k as f64 / (n - 1) as f64)
            .collect(),
    };
    let mut results = Vec::with_capacity(values.len());
    for v in values {
        let mut point = src.clone();
        set(&mut point, v)?;
        let exp = point
            .config()?
            .validate()
            .map_err(|e| CliError::Usage(format!("sweep at {} = {v}: {e}", args.param)))?;
        let (suppression, mu) = sweep_point(&exp)?;
        results.push((v, suppression, mu));
    }

    writeln!(
        out,
        "# pmsfwm sweep {} from {:?} to {:?} ({} points)",
        args.param, args.from, args.to, args.points
    )
    .map_err(io_err)?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(["param_value", "suppression", "mu_signal_band"])
        .map_err(csv_err)?;
    for &(param_value, suppression, mu_signal_band) in &results {
        w.serialize(SweepRow {
            param_value,
            suppression,
            mu_signal_band,
        })
        .map_err(csv_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(results)
}

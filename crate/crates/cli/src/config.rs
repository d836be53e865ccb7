//! Sectioned TOML experiment configuration, command-line overrides, and
//! conversion into validated model types.

use pmsfwm_core::counting::{ChannelLoss, DetectorModel, DetectorPair, PairStatistics, RunConfig};
use pmsfwm_core::fiber::{
    effective_lengths, AxisOffset, EffectiveLengths, FiberLine, FiberSegment, PumpConfig,
};
use pmsfwm_core::spectra::{FilterSpec, PhaseFactor, RateModel};
use pmsfwm_core::state::{make_state, make_state_colored, SourceNoise, TwoQubitState};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, Result};

/// The shipped default configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/defaults.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub fiber: FiberSection,
    pub pump: PumpSection,
    pub filters: FilterSection,
    pub losses: LossSection,
    pub detectors: DetectorSection,
    pub run: RunSection,
    pub noise: NoiseSection,
    pub fringe: FringeSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSection {
    pub segment_lengths_m: Vec<f64>,
    pub axis_offsets_deg: Vec<f64>,
    pub delta_beta1_ps_per_m: f64,
    pub beta2_ps2_per_m: f64,
    pub gamma_per_w_m: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lv_override_m: Option<f64>,
    #[serde(default)]
    pub phase_factor: PhaseFactorName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseFactorName {
    #[default]
    Sin2,
    Sinc2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpSection {
    pub peak_power_w: f64,
    pub theta_deg: f64,
    pub pulse_width_ps: f64,
    pub rep_rate_hz: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSection {
    pub signal_detuning_thz: f64,
    pub idler_detuning_thz: f64,
    pub bandwidth_ghz: f64,
    pub rate_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub transmission_s: f64,
    pub transmission_i: f64,
    #[serde(default)]
    pub ripple_depth_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub efficiency_s: f64,
    pub efficiency_i: f64,
    pub dark_prob: f64,
    pub gate_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub duration_s: f64,
    pub seed: u64,
    pub mean_pairs_per_pulse: f64,
    #[serde(default)]
    pub pair_statistics: StatisticsName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticsName {
    #[default]
    Poisson,
    Thermal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub model: NoiseModelName,
    pub werner_v: f64,
    pub phase_phi_rad: f64,
    pub amplitude_imbalance: f64,
    pub background_flux_s: f64,
    pub background_flux_i: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseModelName {
    #[default]
    Werner,
    Colored,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FringeSection {
    pub theta_s_deg: Vec<f64>,
    pub theta_i_start_deg: f64,
    pub theta_i_stop_deg: f64,
    pub theta_i_step_deg: f64,
}

/// Raw configuration text as a TOML table, edited in place by overrides
/// before being checked against [`ExperimentConfig`].
#[derive(Debug, Clone)]
pub struct ConfigSource {
    table: Table,
}

/// Parses a command-line override value as a TOML value, falling back to a
/// bare string so `--set noise.model=colored` needs no quoting.
pub fn parse_value(text: &str) -> Value {
    match format!("v = {text}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.into())),
        Err(_) => Value::String(text.into()),
    }
}

impl ConfigSource {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let table = text
            .parse::<Table>()
            .map_err(|e| CliError::Schema(format!("{origin}: {e}")))?;
        Ok(ConfigSource { table })
    }

    pub fn defaults() -> Self {
        Self::parse(DEFAULT_CONFIG, "built-in defaults").expect("shipped defaults parse")
    }

    pub fn load(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Current value at a dotted `section.key` path.
    pub fn get(&self, path: &str) -> Option<&Value> {
        let (section, key) = path.split_once('.')?;
        self.table.get(section)?.as_table()?.get(key)
    }

    /// Sets `section.key`. The section must exist; unknown keys are caught
    /// when the table is checked against the schema.
    pub fn set(&mut self, path: &str, value: Value) -> Result<()> {
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| CliError::Usage(format!("override key `{path}` must be section.key")))?;
        let table = self
            .table
            .get_mut(section)
            .and_then(Value::as_table_mut)
            .ok_or_else(|| {
                CliError::Usage(format!("unknown config section `{section}` in `{path}`"))
            })?;
        table.insert(key.to_string(), value);
        Ok(())
    }

    /// Removes an optional key so its default (or derived value) applies.
    pub fn unset(&mut self, path: &str) -> Result<()> {
        let (section, key) = path
            .split_once('.')
            .ok_or_else(|| CliError::Usage(format!("unset key `{path}` must be section.key")))?;
        self.table
            .get_mut(section)
            .and_then(Value::as_table_mut)
            .and_then(|t| t.remove(key))
            .map(|_| ())
            .ok_or_else(|| CliError::Usage(format!("cannot unset `{path}`: key not present")))
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<()> {
        for item in overrides {
            let item = item.as_ref();
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override `{item}` must be key=value")))?;
            self.set(key.trim(), parse_value(value.trim()))?;
        }
        Ok(())
    }

    pub fn config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::deserialize(Value::Table(self.table.clone()))
            .map_err(|e| CliError::Schema(format!("config: {e}")))
    }
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// A configuration after every value has passed the model's own checks.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub line: FiberLine,
    pub pump: PumpConfig,
    pub lengths: EffectiveLengths,
    pub phase_factor: PhaseFactor,
    pub signal_filter: FilterSpec,
    pub idler_filter: FilterSpec,
    pub rate_model: RateModel,
    pub losses: ChannelLoss,
    pub detectors: DetectorPair,
    pub run: RunConfig,
    pub state: TwoQubitState,
}

fn at(path: &str) -> impl FnOnce(pmsfwm_core::Error) -> CliError + '_ {
    move |e| CliError::model(path, e)
}

fn build_line(f: &FiberSection) -> Result<FiberLine> {
    if f.segment_lengths_m.len() != f.axis_offsets_deg.len() {
        return Err(CliError::Usage(format!(
            "fiber: {} segment lengths but {} axis offsets",
            f.segment_lengths_m.len(),
            f.axis_offsets_deg.len()
        )));
    }
    let segments = f
        .segment_lengths_m
        .iter()
        .zip(&f.axis_offsets_deg)
        .map(|(&len, &deg)| {
            let offset = AxisOffset::from_degrees(deg).map_err(at("fiber.axis_offsets_deg"))?;
            FiberSegment::new(
                len,
                f.delta_beta1_ps_per_m,
                f.beta2_ps2_per_m,
                f.gamma_per_w_m,
                offset,
            )
            .map_err(at("fiber"))
        })
        .collect::<Result<Vec<_>>>()?;
    FiberLine::new(segments).map_err(at("fiber.segment_lengths_m"))
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<Experiment> {
        let line = build_line(&self.fiber)?;
        let p = &self.pump;
        let pump = PumpConfig::new(
            p.peak_power_w,
            p.theta_deg,
            p.pulse_width_ps,
            p.rep_rate_hz,
            p.wavelength_nm,
        )
        .map_err(at("pump"))?;
        let lengths = effective_lengths(&line, &pump, self.fiber.lv_override_m.map(|lv| lv / 2.0))
            .map_err(at("fiber.lv_override_m"))?;
        let phase_factor = match self.fiber.phase_factor {
            PhaseFactorName::Sin2 => PhaseFactor::Sin2,
            PhaseFactorName::Sinc2 => PhaseFactor::Sinc2,
        };

        let fl = &self.filters;
        let signal_filter =
            FilterSpec::new(fl.signal_detuning_thz, fl.bandwidth_ghz).map_err(at("filters"))?;
        let idler_filter =
            FilterSpec::new(fl.idler_detuning_thz, fl.bandwidth_ghz).map_err(at("filters"))?;
        if !(fl.rate_scale.is_finite() && fl.rate_scale >= 0.0) {
            return Err(CliError::Usage(format!(
                "filters.rate_scale: {} must be ≥ 0",
                fl.rate_scale
            )));
        }
        let rate_model = RateModel {
            rep_rate: p.rep_rate_hz,
            duty: (p.pulse_width_ps * 1e-12 * p.rep_rate_hz).min(1.0),
            scale: fl.rate_scale,
        };

        let losses = ChannelLoss::new(self.losses.transmission_s, self.losses.transmission_i)
            .and_then(|l| l.with_idler_ripple(self.losses.ripple_depth_i))
            .map_err(at("losses"))?;
        let d = &self.detectors;
        let detectors = DetectorPair {
            signal: DetectorModel::new(d.efficiency_s, d.dark_prob, d.gate_ns)
                .map_err(at("detectors"))?,
            idler: DetectorModel::new(d.efficiency_i, d.dark_prob, d.gate_ns)
                .map_err(at("detectors"))?,
        };

        let n = &self.noise;
        let run = RunConfig {
            rep_rate: p.rep_rate_hz,
            duration: self.run.duration_s,
            mu: self.run.mean_pairs_per_pulse,
            background_s: n.background_flux_s,
            background_i: n.background_flux_i,
            seed: self.run.seed,
            statistics: match self.run.pair_statistics {
                StatisticsName::Poisson => PairStatistics::Poisson,
                StatisticsName::Thermal => PairStatistics::Thermal,
            },
        };
        run.validate().map_err(at("run"))?;

        let noise = SourceNoise::new(n.werner_v, n.amplitude_imbalance, n.phase_phi_rad)
            .map_err(at("noise"))?;
        let state = match n.model {
            NoiseModelName::Werner => make_state(&noise),
            NoiseModelName::Colored => make_state_colored(&noise),
        };

        let fr = &self.fringe;
        if fr.theta_s_deg.iter().any(|t| !t.is_finite()) {
            return Err(CliError::Usage(
                "fringe.theta_s_deg: angles must be finite".into(),
            ));
        }
        theta_range(
            fr.theta_i_start_deg,
            fr.theta_i_stop_deg,
            fr.theta_i_step_deg,
        )?;

        Ok(Experiment {
            line,
            pump,
            lengths,
            phase_factor,
            signal_filter,
            idler_filter,
            rate_model,
            losses,
            detectors,
            run,
            state,
        })
    }

    /// Idler analyzer angles from the start/stop/step triple.
    pub fn theta_i_list(&self) -> Result<Vec<f64>> {
        let fr = &self.fringe;
        theta_range(
            fr.theta_i_start_deg,
            fr.theta_i_stop_deg,
            fr.theta_i_step_deg,
        )
    }
}

/// `start, start + step, ...` up to and including `stop`.
pub fn theta_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite() && step > 0.0 && stop >= start) {
        return Err(CliError::Usage(format!(
            "fringe: angle range {start}..{stop} step {step} needs step > 0 and stop ≥ start"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

//! Gated photon counting: closed-form expected click rates and a seeded
//! pulse-by-pulse Monte Carlo of the same measurement.
//!
//! Detectors are pulse-synchronous, non-number-resolving and click at most
//! once per gate. Dead time is ignored.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::state::{coincidence_prob, single_prob, AnalyzerSetting, Side, TwoQubitState};

/// Pulses simulated per independent RNG block.
const BLOCK_PULSES: u64 = 1 << 16;

/// Above this mean pair number the first-order rate expansion is unreliable.
pub const MULTI_PAIR_MU: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    efficiency: f64,
    dark_prob: f64,
    gate_width_ns: f64,
}

impl DetectorModel {
    pub fn new(efficiency: f64, dark_prob: f64, gate_width_ns: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&efficiency) {
            return Err(invalid(
                "efficiency",
                format!("{efficiency} must lie in [0, 1]"),
            ));
        }
        if !(0.0..1.0).contains(&dark_prob) {
            return Err(invalid(
                "dark_prob",
                format!("{dark_prob} must lie in [0, 1)"),
            ));
        }
        if !(gate_width_ns.is_finite() && gate_width_ns > 0.0) {
            return Err(invalid(
                "gate_width",
                format!("{gate_width_ns} ns must be > 0"),
            ));
        }
        Ok(DetectorModel {
            efficiency,
            dark_prob,
            gate_width_ns,
        })
    }

    /// Builds the per-gate dark probability from a dark count rate per ns of open gate.
    pub fn from_dark_rate(efficiency: f64, dark_per_ns: f64, gate_width_ns: f64) -> Result<Self> {
        if !(dark_per_ns.is_finite() && dark_per_ns >= 0.0) {
            return Err(invalid(
                "dark_rate",
                format!("{dark_per_ns} /ns must be ≥ 0"),
            ));
        }
        let dark_prob = -(-dark_per_ns * gate_width_ns).exp_m1();
        Self::new(efficiency, dark_prob, gate_width_ns)
    }

    pub fn efficiency(&self) -> f64 {
        self.efficiency
    }

    pub fn dark_prob(&self) -> f64 {
        self.dark_prob
    }

    pub fn gate_width_ns(&self) -> f64 {
        self.gate_width_ns
    }
}

/// Signal and idler detectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorPair {
    pub signal: DetectorModel,
    pub idler: DetectorModel,
}

/// Lumped channel transmissions (filters, splices, analyzers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelLoss {
    transmission_s: f64,
    transmission_i: f64,
    ripple_depth_i: f64,
}

impl ChannelLoss {
    pub fn new(transmission_s: f64, transmission_i: f64) -> Result<Self> {
        for (name, t) in [
            ("transmission_s", transmission_s),
            ("transmission_i", transmission_i),
        ] {
            if !(t > 0.0 && t <= 1.0) {
                return Err(invalid(name, format!("{t} must lie in (0, 1]")));
            }
        }
        Ok(ChannelLoss {
            transmission_s,
            transmission_i,
            ripple_depth_i: 0.0,
        })
    }

    /// Polarization-dependent loss of the idler analyzer: the idler transmission
    /// becomes T_i·(1 − depth·sin²θ_i).
    pub fn with_idler_ripple(mut self, depth: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&depth) {
            return Err(invalid(
                "ripple_depth_i",
                format!("{depth} must lie in [0, 1)"),
            ));
        }
        self.ripple_depth_i = depth;
        Ok(self)
    }

    pub fn transmission_s(&self) -> f64 {
        self.transmission_s
    }

    pub fn transmission_i(&self) -> f64 {
        self.transmission_i
    }

    pub fn ripple_depth_i(&self) -> f64 {
        self.ripple_depth_i
    }

    fn idler_at(&self, theta_i_deg: f64) -> f64 {
        let s = theta_i_deg.to_radians().sin();
        self.transmission_i * (1.0 - self.ripple_depth_i * s * s)
    }
}

/// Per-pulse pair-number distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PairStatistics {
    #[default]
    Poisson,
    /// Single-mode thermal (Bose–Einstein).
    Thermal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub rep_rate: f64,
    pub duration: f64,
    /// Mean generated pairs per pulse.
    pub mu: f64,
    /// Mean uncorrelated background photons per pulse reaching each channel.
    pub background_s: f64,
    pub background_i: f64,
    pub seed: u64,
    pub statistics: PairStatistics,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate.is_finite() && self.rep_rate > 0.0) {
            return Err(invalid(
                "rep_rate",
                format!("{} Hz must be > 0", self.rep_rate),
            ));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(invalid(
                "duration",
                format!("{} s must be > 0", self.duration),
            ));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(invalid(
                "mean_pairs_per_pulse",
                format!("{} must be ≥ 0", self.mu),
            ));
        }
        for (name, b) in [
            ("background_s", self.background_s),
            ("background_i", self.background_i),
        ] {
            if !(b.is_finite() && b >= 0.0) {
                return Err(invalid(name, format!("{b} must be ≥ 0")));
            }
        }
        Ok(())
    }

    pub fn pulses(&self) -> u64 {
        (self.rep_rate * self.duration).round() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CountRecord {
    pub pulses: u64,
    pub singles_s: u64,
    pub singles_i: u64,
    pub coincidences: u64,
    pub accidentals_estimate: f64,
}

/// Expected clicks per pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    pub singles_s: f64,
    pub singles_i: f64,
    /// True plus accidental coincidences.
    pub coincidences: f64,
    pub accidentals: f64,
    /// Set when μ exceeds [`MULTI_PAIR_MU`].
    pub multi_pair_warning: bool,
}

/// First-order (single pair per pulse) click rates.
///
/// singles = μ·T·η·P(pass) + background·T·η + dark, and
/// coincidences = μ·T_sη_s·T_iη_i·P(both pass) + accidentals, where the
/// accidentals are singles_s·singles_i to first order in μ.
pub fn expected_rates(
    state: &TwoQubitState,
    setting: &AnalyzerSetting,
    mu: f64,
    losses: &ChannelLoss,
    detectors: &DetectorPair,
    background: (f64, f64),
) -> ExpectedRates {
    let ts = losses.transmission_s * detectors.signal.efficiency;
    let ti = losses.idler_at(setting.theta_i()) * detectors.idler.efficiency;
    let marg_s = single_prob(state, Side::Signal, setting.theta_s());
    let marg_i = single_prob(state, Side::Idler, setting.theta_i());
    let (pair_s, pair_i) = (mu * ts * marg_s, mu * ti * marg_i);
    let noise_s = background.0 * ts + detectors.signal.dark_prob;
    let noise_i = background.1 * ti + detectors.idler.dark_prob;
    let singles_s = pair_s + noise_s;
    let singles_i = pair_i + noise_i;
    // singles_s·singles_i without the O(μ²) pair–pair product, which belongs
    // to the multi-pair terms this expansion drops.
    let accidentals = singles_s * singles_i - pair_s * pair_i;
    let coincidences = mu * ts * ti * coincidence_prob(state, setting) + accidentals;
    ExpectedRates {
        singles_s,
        singles_i,
        coincidences,
        accidentals,
        multi_pair_warning: mu > MULTI_PAIR_MU,
    }
}

/// singles_s·singles_i/pulses: expected same-gate coincidences between
/// uncorrelated click streams.
pub fn accidental_estimate(record: &CountRecord) -> f64 {
    if record.pulses == 0 {
        return 0.0;
    }
    record.singles_s as f64 * record.singles_i as f64 / record.pulses as f64
}

/// Per-pair outcome probabilities behind the analyzers.
#[derive(Debug, Clone, Copy)]
struct Projection {
    both: f64,
    signal_only: f64,
    idler_only: f64,
}

#[derive(Debug, Clone, Copy)]
struct PulseModel {
    mu: f64,
    statistics: PairStatistics,
    projection: Projection,
    detect_s: f64,
    detect_i: f64,
    noise_s: f64,
    noise_i: f64,
}

impl PulseModel {
    /// P(n = 0)
    fn p_zero(&self) -> f64 {
        match self.statistics {
            PairStatistics::Poisson => (-self.mu).exp(),
            PairStatistics::Thermal => 1.0 / (1.0 + self.mu),
        }
    }

    /// Pair number by CDF inversion of a single uniform, so that for common
    /// random numbers the count is non-decreasing in μ.
    fn pair_number(&self, u: f64, p_zero: f64) -> u32 {
        let mut p = p_zero;
        let mut cdf = p;
        let mut n = 0u32;
        while u >= cdf && n < 1000 {
            n += 1;
            p *= match self.statistics {
                PairStatistics::Poisson => self.mu / n as f64,
                PairStatistics::Thermal => self.mu / (1.0 + self.mu),
            };
            if p == 0.0 {
                break;
            }
            cdf += p;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    singles_s: u64,
    singles_i: u64,
    coincidences: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;
    fn add(self, o: Tally) -> Tally {
        Tally {
            singles_s: self.singles_s + o.singles_s,
            singles_i: self.singles_i + o.singles_i,
            coincidences: self.coincidences + o.coincidences,
        }
    }
}

// Stream layout: even stream ids drive per-pulse draws of a block, odd ids
// drive the per-pair draws of one pulse.
fn pulse_rng(seed: u64, block: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * block);
    rng
}

fn pair_rng(seed: u64, pulse: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * pulse + 1);
    rng
}

fn simulate_block(model: &PulseModel, seed: u64, block: u64, pulses: u64) -> Tally {
    let mut rng = pulse_rng(seed, block);
    let first = block * BLOCK_PULSES;
    let mut tally = Tally::default();
    let proj = model.projection;
    let p_zero = model.p_zero();
    for k in 0..pulses {
        let u_pairs: f64 = rng.random();
        let u_noise_s: f64 = rng.random();
        let u_noise_i: f64 = rng.random();
        let mut click_s = u_noise_s < model.noise_s;
        let mut click_i = u_noise_i < model.noise_i;

        let n = if u_pairs < p_zero {
            0
        } else {
            model.pair_number(u_pairs, p_zero)
        };
        if n > 0 {
            let mut prng = pair_rng(seed, first + k);
            for _ in 0..n {
                let u: f64 = prng.random();
                let u_det_s: f64 = prng.random();
                let u_det_i: f64 = prng.random();
                let (pass_s, pass_i) = if u < proj.both {
                    (true, true)
                } else if u < proj.both + proj.signal_only {
                    (true, false)
                } else if u < proj.both + proj.signal_only + proj.idler_only {
                    (false, true)
                } else {
                    (false, false)
                };
                click_s |= pass_s && u_det_s < model.detect_s;
                click_i |= pass_i && u_det_i < model.detect_i;
            }
        }

        tally.singles_s += click_s as u64;
        tally.singles_i += click_i as u64;
        tally.coincidences += (click_s && click_i) as u64;
    }
    tally
}

/// Monte Carlo of `config.pulses()` gated pulses. Pulses are split into fixed
/// blocks, each with its own RNG stream derived from (seed, block), so the
/// record is bit-identical for a given seed regardless of thread count.
pub fn simulate_run(
    config: &RunConfig,
    state: &TwoQubitState,
    setting: &AnalyzerSetting,
    losses: &ChannelLoss,
    detectors: &DetectorPair,
) -> Result<CountRecord> {
    config.validate()?;
    let both = coincidence_prob(state, setting).max(0.0);
    let marg_s = single_prob(state, Side::Signal, setting.theta_s());
    let marg_i = single_prob(state, Side::Idler, setting.theta_i());
    let ts = losses.transmission_s * detectors.signal.efficiency;
    let ti = losses.idler_at(setting.theta_i()) * detectors.idler.efficiency;
    let model = PulseModel {
        mu: config.mu,
        statistics: config.statistics,
        projection: Projection {
            both,
            signal_only: (marg_s - both).max(0.0),
            idler_only: (marg_i - both).max(0.0),
        },
        detect_s: ts,
        detect_i: ti,
        // Background photons are Poisson; thinning by T·η gives 1 − exp(−b·T·η).
        noise_s: 1.0 - (1.0 - detectors.signal.dark_prob) * (-config.background_s * ts).exp(),
        noise_i: 1.0 - (1.0 - detectors.idler.dark_prob) * (-config.background_i * ti).exp(),
    };

    let pulses = config.pulses();
    let blocks = pulses.div_ceil(BLOCK_PULSES);
    let tally = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = (pulses - b * BLOCK_PULSES).min(BLOCK_PULSES);
            simulate_block(&model, config.seed, b, n)
        })
        .reduce(Tally::default, |a, b| a + b);

    let mut record = CountRecord {
        pulses,
        singles_s: tally.singles_s,
        singles_i: tally.singles_i,
        coincidences: tally.coincidences,
        accidentals_estimate: 0.0,
    };
    record.accidentals_estimate = accidental_estimate(&record);
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_state, SourceNoise};

    fn detectors(eta: f64, dark: f64) -> DetectorPair {
        let d = DetectorModel::new(eta, dark, 2.5).unwrap();
        DetectorPair {
            signal: d,
            idler: d,
        }
    }

    fn run(mu: f64, bg: f64, seed: u64, pulses: f64) -> RunConfig {
        RunConfig {
            rep_rate: 1e6,
            duration: pulses / 1e6,
            mu,
            background_s: bg,
            background_i: bg,
            seed,
            statistics: PairStatistics::Poisson,
        }
    }

    #[test]
    fn dark_only_floor() {
        let bell = make_state(&SourceNoise::ideal());
        let r = expected_rates(
            &bell,
            &AnalyzerSetting::new(0.0, 0.0),
            0.0,
            &ChannelLoss::new(1.0, 1.0).unwrap(),
            &detectors(0.2, 1e-5),
            (0.0, 0.0),
        );
        assert!((r.singles_s - 1e-5).abs() < 1e-20);
        assert!((r.singles_i - 1e-5).abs() < 1e-20);
        assert!((r.coincidences - 1e-10).abs() < 1e-22);
    }

    #[test]
    fn singles_anchor_example() {
        // μ·Tη·½ with μ = 0.0093 and Tη = 0.108.
        let bell = make_state(&SourceNoise::ideal());
        let r = expected_rates(
            &bell,
            &AnalyzerSetting::new(0.0, 0.0),
            0.0093,
            &ChannelLoss::new(0.54, 0.54).unwrap(),
            &detectors(0.2, 0.0),
            (0.0, 0.0),
        );
        assert!(
            (r.singles_i - 0.0093 * 0.108 * 0.5).abs() < 1e-15,
            "{}",
            r.singles_i
        );
        assert!(!r.multi_pair_warning);
    }

    #[test]
    fn orthogonal_setting_has_no_coincidences() {
        let bell = make_state(&SourceNoise::ideal());
        let r = expected_rates(
            &bell,
            &AnalyzerSetting::new(0.0, 90.0),
            0.05,
            &ChannelLoss::new(0.5, 0.5).unwrap(),
            &detectors(0.2, 0.0),
            (0.0, 0.0),
        );
        assert_eq!(r.coincidences, 0.0);
        let warn = expected_rates(
            &bell,
            &AnalyzerSetting::new(0.0, 90.0),
            0.2,
            &ChannelLoss::new(0.5, 0.5).unwrap(),
            &detectors(0.2, 0.0),
            (0.0, 0.0),
        );
        assert!(warn.multi_pair_warning);
    }

    #[test]
    fn accidental_estimate_product_formula() {
        let rec = CountRecord {
            pulses: 10_000_000,
            singles_s: 10_000,
            singles_i: 10_000,
            coincidences: 0,
            accidentals_estimate: 0.0,
        };
        assert!((accidental_estimate(&rec) - 10.0).abs() < 1e-12);
        let rec = CountRecord {
            singles_s: 0,
            ..rec
        };
        assert_eq!(accidental_estimate(&rec), 0.0);
    }

    #[test]
    fn silent_run_is_all_zero() {
        let bell = make_state(&SourceNoise::ideal());
        let rec = simulate_run(
            &run(0.0, 0.0, 7, 1e5),
            &bell,
            &AnalyzerSetting::new(0.0, 0.0),
            &ChannelLoss::new(0.5, 0.5).unwrap(),
            &detectors(0.2, 0.0),
        )
        .unwrap();
        assert_eq!(
            (
                rec.singles_s,
                rec.singles_i,
                rec.coincidences,
                rec.accidentals_estimate
            ),
            (0, 0, 0, 0.0)
        );
        assert_eq!(rec.pulses, 100_000);
    }

    #[test]
    fn identical_seed_is_bit_identical() {
        let bell = make_state(&SourceNoise::ideal());
        let go = |seed| {
            simulate_run(
                &run(0.05, 1e-3, seed, 3e5),
                &bell,
                &AnalyzerSetting::new(0.0, 30.0),
                &ChannelLoss::new(0.5, 0.5).unwrap(),
                &detectors(0.2, 1e-4),
            )
            .unwrap()
        };
        assert_eq!(go(11), go(11));
        assert_ne!(go(11), go(12));
    }

    #[test]
    fn pair_number_inversion() {
        let model = PulseModel {
            mu: 0.5,
            statistics: PairStatistics::Poisson,
            projection: Projection {
                both: 0.0,
                signal_only: 0.0,
                idler_only: 0.0,
            },
            detect_s: 0.0,
            detect_i: 0.0,
            noise_s: 0.0,
            noise_i: 0.0,
        };
        let p0 = model.p_zero();
        assert_eq!(p0, (-0.5f64).exp());
        assert_eq!(model.pair_number(p0 - 1e-12, p0), 0);
        assert_eq!(model.pair_number(p0 + 1e-12, p0), 1);
        let thermal = PulseModel {
            statistics: PairStatistics::Thermal,
            ..model
        };
        let t0 = thermal.p_zero();
        assert_eq!(thermal.pair_number(1.0 / 1.5 - 1e-12, t0), 0);
        assert_eq!(thermal.pair_number(1.0 / 1.5 + 1e-12, t0), 1);
    }

    #[test]
    fn thermal_mean_matches_mu() {
        let model = PulseModel {
            mu: 0.3,
            statistics: PairStatistics::Thermal,
            projection: Projection {
                both: 0.0,
                signal_only: 0.0,
                idler_only: 0.0,
            },
            detect_s: 0.0,
            detect_i: 0.0,
            noise_s: 0.0,
            noise_i: 0.0,
        };
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|k| model.pair_number((k as f64 + 0.5) / n as f64, model.p_zero()) as f64)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.3).abs() < 1e-3, "{mean}");
    }

    #[test]
    fn validation() {
        assert!(DetectorModel::new(1.1, 0.0, 2.5).is_err());
        assert!(DetectorModel::new(0.2, 1.0, 2.5).is_err());
        assert!(DetectorModel::new(0.2, 0.0, 0.0).is_err());
        assert!(ChannelLoss::new(0.0, 0.5).is_err());
        assert!(run(-1.0, 0.0, 1, 1e3).validate().is_err());
        let d = DetectorModel::from_dark_rate(0.2, 4e-6, 2.5).unwrap();
        assert!((d.dark_prob() - 1e-5).abs() < 1e-9);
    }
}

//! Scalar and vector SFWM photon-flux spectral densities (PFSDs).
//!
//! Detuning Ω is angular (rad/ps) inside this module. Everything user-facing
//! takes or reports ordinary frequency detuning Ω/2π in THz; see
//! [`thz_to_omega`]. PFSDs are dimensionless.

use std::f64::consts::TAU;

use crate::error::{invalid, Error, Result};
use crate::fiber::{pump_split, EffectiveLengths, FiberLine, FiberSegment, PumpConfig};

/// Angular detuning (rad/ps) for a frequency detuning in THz.
pub fn thz_to_omega(thz: f64) -> f64 {
    TAU * thz
}

pub fn omega_to_thz(omega: f64) -> f64 {
    omega / TAU
}

/// Shape of the phase-mismatch factor multiplying the PFSD prefactor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PhaseFactor {
    /// sin²(x)
    #[default]
    Sin2,
    /// sin²(x)/x², the phase-matched convention of the vector SFWM literature.
    Sinc2,
}

impl PhaseFactor {
    fn eval(self, x: f64) -> f64 {
        let s = x.sin();
        match self {
            PhaseFactor::Sin2 => s * s,
            PhaseFactor::Sinc2 => {
                if x == 0.0 {
                    1.0
                } else {
                    let r = s / x;
                    r * r
                }
            }
        }
    }
}

/// Scalar-process PFSD (γ·P·L_s)²·sin²[(β₂Ω² + 2γP)·L_s/2] for pump power `p_axis`
/// on one fiber axis.
pub fn pfsd_scalar(
    omega: f64,
    p_axis: f64,
    lengths: &EffectiveLengths,
    segment: &FiberSegment,
) -> f64 {
    pfsd_scalar_with(PhaseFactor::Sin2, omega, p_axis, lengths, segment)
}

pub fn pfsd_scalar_with(
    factor: PhaseFactor,
    omega: f64,
    p_axis: f64,
    lengths: &EffectiveLengths,
    segment: &FiberSegment,
) -> f64 {
    let gamma = segment.gamma();
    let l = lengths.l_scalar();
    let amp = gamma * p_axis * l;
    let kappa = segment.beta2() * omega * omega + 2.0 * gamma * p_axis;
    amp * amp * factor.eval(kappa * l / 2.0)
}

/// Vector-process PFSDs `(f_hv, f_vh)`. The two differ only in the sign of the
/// dispersion and nonlinear phase relative to the walk-off term Δβ₁Ω.
pub fn pfsd_vector(
    omega: f64,
    p_h: f64,
    p_v: f64,
    lengths: &EffectiveLengths,
    segment: &FiberSegment,
) -> (f64, f64) {
    pfsd_vector_with(PhaseFactor::Sin2, omega, p_h, p_v, lengths, segment)
}

pub fn pfsd_vector_with(
    factor: PhaseFactor,
    omega: f64,
    p_h: f64,
    p_v: f64,
    lengths: &EffectiveLengths,
    segment: &FiberSegment,
) -> (f64, f64) {
    let gamma = segment.gamma();
    let l = lengths.l_vector();
    let amp = gamma * (p_h * p_v).sqrt() * l;
    let prefactor = 4.0 / 9.0 * amp * amp;
    let walk = segment.delta_beta1() * omega;
    let mismatch = segment.beta2() * omega * omega + gamma * (p_h + p_v);
    let f_hv = prefactor * factor.eval((walk + mismatch) * l / 2.0);
    let f_vh = prefactor * factor.eval((walk - mismatch) * l / 2.0);
    (f_hv, f_vh)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetuningGrid {
    omega: Vec<f64>,
}

impl DetuningGrid {
    /// Grid from angular detunings (rad/ps); must be finite and strictly increasing.
    pub fn from_omega(omega: Vec<f64>) -> Result<Self> {
        if omega.is_empty() {
            return Err(invalid("detuning_grid", "no grid points"));
        }
        if omega.iter().any(|w| !w.is_finite()) {
            return Err(invalid("detuning_grid", "non-finite detuning"));
        }
        if omega.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(
                "detuning_grid",
                "detunings must be strictly increasing",
            ));
        }
        Ok(DetuningGrid { omega })
    }

    pub fn from_thz(thz: &[f64]) -> Result<Self> {
        Self::from_omega(thz.iter().map(|&f| thz_to_omega(f)).collect())
    }

    /// `points` evenly spaced frequency detunings from `start_thz` to `stop_thz` inclusive.
    pub fn linspace_thz(start_thz: f64, stop_thz: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(invalid(
                "detuning_grid",
                format!("{points} points, need ≥ 2"),
            ));
        }
        let step = (stop_thz - start_thz) / (points - 1) as f64;
        let thz: Vec<f64> = (0..points)
            .map(|k| {
                if k + 1 == points {
                    stop_thz
                } else {
                    start_thz + step * k as f64
                }
            })
            .collect();
        Self::from_thz(&thz)
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn thz(&self) -> Vec<f64> {
        self.omega.iter().map(|&w| omega_to_thz(w)).collect()
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PfsdSpectrum {
    pub grid: DetuningGrid,
    pub f_hh: Vec<f64>,
    pub f_vv: Vec<f64>,
    pub f_hv: Vec<f64>,
    pub f_vh: Vec<f64>,
}

/// Which PFSD components a band integral sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Components {
    /// f_HH + f_VV
    Scalar,
    /// f_HV + f_VH
    Vector,
    All,
}

impl PfsdSpectrum {
    pub fn scalar_total(&self) -> Vec<f64> {
        self.f_hh
            .iter()
            .zip(&self.f_vv)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn vector_total(&self) -> Vec<f64> {
        self.f_hv
            .iter()
            .zip(&self.f_vh)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn select(&self, components: Components) -> Vec<f64> {
        match components {
            Components::Scalar => self.scalar_total(),
            Components::Vector => self.vector_total(),
            Components::All => self
                .scalar_total()
                .iter()
                .zip(self.vector_total())
                .map(|(s, v)| s + v)
                .collect(),
        }
    }
}

/// Evaluates all four PFSDs on every grid point. Each point is computed
/// independently, so the result does not depend on evaluation order.
pub fn spectrum(
    grid: &DetuningGrid,
    pump: &PumpConfig,
    line: &FiberLine,
    lengths: &EffectiveLengths,
    factor: PhaseFactor,
) -> PfsdSpectrum {
    let (p_h, p_v) = pump_split(pump);
    let seg = line.medium();
    let n = grid.len();
    let mut out = PfsdSpectrum {
        grid: grid.clone(),
        f_hh: Vec::with_capacity(n),
        f_vv: Vec::with_capacity(n),
        f_hv: Vec::with_capacity(n),
        f_vh: Vec::with_capacity(n),
    };
    for &w in grid.omega() {
        out.f_hh
            .push(pfsd_scalar_with(factor, w, p_h, lengths, seg));
        out.f_vv
            .push(pfsd_scalar_with(factor, w, p_v, lengths, seg));
        let (hv, vh) = pfsd_vector_with(factor, w, p_h, p_v, lengths, seg);
        out.f_hv.push(hv);
        out.f_vh.push(vh);
    }
    out
}

/// Scalar-to-vector PFSD ratio at one detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Suppression {
    Finite(f64),
    /// No vector process at all (pump on a single axis).
    Infinite,
    /// Neither process generates pairs.
    Undefined,
}

impl Suppression {
    pub fn value(self) -> f64 {
        match self {
            Suppression::Finite(r) => r,
            Suppression::Infinite => f64::INFINITY,
            Suppression::Undefined => f64::NAN,
        }
    }
}

/// (f_HH + f_VV)/(f_HV + f_VH) at `detuning_thz`.
pub fn suppression_ratio(
    detuning_thz: f64,
    pump: &PumpConfig,
    line: &FiberLine,
    lengths: &EffectiveLengths,
    factor: PhaseFactor,
) -> Suppression {
    let w = thz_to_omega(detuning_thz);
    let (p_h, p_v) = pump_split(pump);
    let seg = line.medium();
    let scalar = pfsd_scalar_with(factor, w, p_h, lengths, seg)
        + pfsd_scalar_with(factor, w, p_v, lengths, seg);
    let (hv, vh) = pfsd_vector_with(factor, w, p_h, p_v, lengths, seg);
    let vector = hv + vh;
    if vector > 0.0 {
        Suppression::Finite(scalar / vector)
    } else if scalar > 0.0 {
        Suppression::Infinite
    } else {
        Suppression::Undefined
    }
}

/// Ideal rectangular passband in frequency detuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    center_thz: f64,
    bandwidth_ghz: f64,
}

impl FilterSpec {
    /// `center_thz` is signed (signal positive, idler negative). A zero
    /// bandwidth is accepted and passes nothing.
    pub fn new(center_thz: f64, bandwidth_ghz: f64) -> Result<Self> {
        if !center_thz.is_finite() {
            return Err(invalid("filter.center_detuning", "must be finite"));
        }
        if !(bandwidth_ghz.is_finite() && bandwidth_ghz >= 0.0) {
            return Err(invalid(
                "filter.bandwidth",
                format!("{bandwidth_ghz} GHz must be ≥ 0"),
            ));
        }
        Ok(FilterSpec {
            center_thz,
            bandwidth_ghz,
        })
    }

    pub fn center_thz(&self) -> f64 {
        self.center_thz
    }

    pub fn bandwidth_ghz(&self) -> f64 {
        self.bandwidth_ghz
    }

    /// Passband edges in THz.
    pub fn edges_thz(&self) -> (f64, f64) {
        let half = self.bandwidth_ghz * 1e-3 / 2.0;
        (self.center_thz - half, self.center_thz + half)
    }
}

/// Converts band-integrated PFSD into pair numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    pub rep_rate: f64,
    /// Fraction of each period during which the pump is on.
    pub duty: f64,
    /// Pairs per (PFSD·THz); the PFSD normalization carries no absolute units.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandRate {
    pub pairs_per_pulse: f64,
    pub pairs_per_second: f64,
}

/// Integral over `[lo, hi]` (THz) of the piecewise-linear interpolant of `values`
/// on `thz`. Endpoints must lie within the grid.
fn integrate_linear(thz: &[f64], values: &[f64], lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let interp = |x: f64| -> f64 {
        let k = thz.partition_point(|&t| t <= x);
        if k == 0 {
            return values[0];
        }
        if k == thz.len() {
            return values[thz.len() - 1];
        }
        let (x0, x1) = (thz[k - 1], thz[k]);
        let t = (x - x0) / (x1 - x0);
        values[k - 1] + t * (values[k] - values[k - 1])
    };
    let mut xs = vec![lo];
    xs.extend(thz.iter().copied().filter(|&t| t > lo && t < hi));
    xs.push(hi);
    let mut ys: Vec<f64> = Vec::with_capacity(xs.len());
    ys.push(interp(lo));
    ys.extend(
        thz.iter()
            .zip(values)
            .filter(|(&t, _)| t > lo && t < hi)
            .map(|(_, &v)| v),
    );
    ys.push(interp(hi));
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Band-integrated pair generation behind `filter`. The selected components
/// are integrated over the passband with the trapezoidal rule (in THz), then
/// scaled by the duty cycle and the rate scale.
pub fn band_rate(
    spec: &PfsdSpectrum,
    filter: &FilterSpec,
    components: Components,
    model: &RateModel,
) -> Result<BandRate> {
    let thz = spec.grid.thz();
    let (lo, hi) = filter.edges_thz();
    let (grid_lo, grid_hi) = (thz[0], thz[thz.len() - 1]);
    // grid points round-trip through rad/ps, so an edge placed exactly on the
    // filter boundary can come back a few ulps inside it
    let slack = 1e-9 * (grid_hi - grid_lo);
    if lo < grid_lo - slack || hi > grid_hi + slack {
        return Err(Error::Coverage {
            lo,
            hi,
            grid_lo,
            grid_hi,
        });
    }
    let (lo, hi) = (lo.max(grid_lo), hi.min(grid_hi));
    let values = spec.select(components);
    let integral = integrate_linear(&thz, &values, lo, hi);
    let pairs_per_pulse = model.scale * model.duty * integral;
    Ok(BandRate {
        pairs_per_pulse,
        pairs_per_second: pairs_per_pulse * model.rep_rate,
    })
}

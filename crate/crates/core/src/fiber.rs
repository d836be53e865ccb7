//! Two-section birefringent fiber model.
//!
//! Units at this boundary: lengths in m, group birefringence in ps/m, GVD in
//! ps²/m, nonlinear coefficient in 1/(W·m), pump power in W, pulse width in ps.
//! Everything downstream works in the same (m, ps, W) system.

use crate::error::{invalid, Error, Result};

/// Orientation of a segment's slow axis relative to the lab H axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisOffset {
    Aligned,
    Rotated90,
}

impl AxisOffset {
    pub fn from_degrees(deg: f64) -> Result<Self> {
        if deg == 0.0 {
            Ok(AxisOffset::Aligned)
        } else if deg == 90.0 {
            Ok(AxisOffset::Rotated90)
        } else {
            Err(invalid(
                "axis_offset",
                format!("{deg}° is not supported, only 0° or 90° splices"),
            ))
        }
    }

    pub fn degrees(self) -> f64 {
        match self {
            AxisOffset::Aligned => 0.0,
            AxisOffset::Rotated90 => 90.0,
        }
    }

    /// Sign of the H-minus-V group delay slope inside a segment with this orientation.
    fn delay_sign(self) -> f64 {
        match self {
            AxisOffset::Aligned => 1.0,
            AxisOffset::Rotated90 => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSegment {
    length: f64,
    delta_beta1: f64,
    beta2: f64,
    gamma: f64,
    axis_offset: AxisOffset,
}

impl FiberSegment {
    /// `length` m, `delta_beta1` ps/m, `beta2` ps²/m, `gamma` 1/(W·m).
    pub fn new(
        length: f64,
        delta_beta1: f64,
        beta2: f64,
        gamma: f64,
        axis_offset: AxisOffset,
    ) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("length", format!("{length} m must be > 0")));
        }
        if !(delta_beta1.is_finite() && delta_beta1 >= 0.0) {
            return Err(invalid(
                "delta_beta1",
                format!("{delta_beta1} ps/m must be ≥ 0"),
            ));
        }
        if !beta2.is_finite() {
            return Err(invalid("beta2", "must be finite"));
        }
        // gamma = 0 is accepted so that the linear (no-nonlinearity) limit can be evaluated.
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(invalid("gamma", format!("{gamma} 1/(W·m) must be ≥ 0")));
        }
        Ok(FiberSegment {
            length,
            delta_beta1,
            beta2,
            gamma,
            axis_offset,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn delta_beta1(&self) -> f64 {
        self.delta_beta1
    }

    pub fn beta2(&self) -> f64 {
        self.beta2
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn axis_offset(&self) -> AxisOffset {
        self.axis_offset
    }

    pub fn with_length(mut self, length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid("length", format!("{length} m must be > 0")));
        }
        self.length = length;
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberLine {
    segments: Vec<FiberSegment>,
}

impl FiberLine {
    pub fn new(segments: Vec<FiberSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::EmptyLine);
        }
        Ok(FiberLine { segments })
    }

    /// A fiber of `total_length` cut in half and re-spliced with a 90° axis offset.
    pub fn midpoint_spliced(
        total_length: f64,
        delta_beta1: f64,
        beta2: f64,
        gamma: f64,
    ) -> Result<Self> {
        let half = total_length / 2.0;
        FiberLine::new(vec![
            FiberSegment::new(half, delta_beta1, beta2, gamma, AxisOffset::Aligned)?,
            FiberSegment::new(half, delta_beta1, beta2, gamma, AxisOffset::Rotated90)?,
        ])
    }

    pub fn segments(&self) -> &[FiberSegment] {
        &self.segments
    }

    pub fn total_length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Material parameters used for the spectra. The spectra assume one
    /// homogeneous medium, taken from the first segment.
    pub fn medium(&self) -> &FiberSegment {
        &self.segments[0]
    }

    /// Accumulated H-vs-V pump group delay (ps) at position `z` (m), clamped to the line.
    pub fn delay_at(&self, z: f64) -> f64 {
        let mut start = 0.0;
        let mut delay = 0.0;
        for seg in &self.segments {
            let slope = seg.axis_offset.delay_sign() * seg.delta_beta1;
            let end = start + seg.length;
            if z >= end {
                delay += slope * seg.length;
            } else {
                if z > start {
                    delay += slope * (z - start);
                }
                break;
            }
            start = end;
        }
        delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpConfig {
    peak_power: f64,
    theta_deg: f64,
    pulse_width: f64,
    rep_rate: f64,
    center_wavelength: f64,
}

impl PumpConfig {
    /// `peak_power` W, `theta_deg` polarization angle from H, `pulse_width` ps FWHM,
    /// `rep_rate` Hz, `center_wavelength` nm.
    pub fn new(
        peak_power: f64,
        theta_deg: f64,
        pulse_width: f64,
        rep_rate: f64,
        center_wavelength: f64,
    ) -> Result<Self> {
        if !(peak_power.is_finite() && peak_power >= 0.0) {
            return Err(invalid("peak_power", format!("{peak_power} W must be ≥ 0")));
        }
        if !(0.0..180.0).contains(&theta_deg) {
            return Err(invalid(
                "theta",
                format!("{theta_deg}° must lie in [0°, 180°)"),
            ));
        }
        if !(pulse_width.is_finite() && pulse_width > 0.0) {
            return Err(invalid(
                "pulse_width",
                format!("{pulse_width} ps must be > 0"),
            ));
        }
        if !(rep_rate.is_finite() && rep_rate > 0.0) {
            return Err(invalid("rep_rate", format!("{rep_rate} Hz must be > 0")));
        }
        if !(center_wavelength.is_finite() && center_wavelength > 0.0) {
            return Err(invalid(
                "center_wavelength",
                format!("{center_wavelength} nm must be > 0"),
            ));
        }
        Ok(PumpConfig {
            peak_power,
            theta_deg,
            pulse_width,
            rep_rate,
            center_wavelength,
        })
    }

    pub fn peak_power(&self) -> f64 {
        self.peak_power
    }

    pub fn theta_deg(&self) -> f64 {
        self.theta_deg
    }

    pub fn pulse_width(&self) -> f64 {
        self.pulse_width
    }

    pub fn rep_rate(&self) -> f64 {
        self.rep_rate
    }

    pub fn center_wavelength(&self) -> f64 {
        self.center_wavelength
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveLengths {
    l_scalar: f64,
    l_vector: f64,
}

impl EffectiveLengths {
    pub fn new(l_scalar: f64, l_vector: f64) -> Result<Self> {
        if !(l_vector > 0.0 && l_vector <= l_scalar && l_scalar.is_finite()) {
            return Err(invalid(
                "effective_lengths",
                format!("need 0 < L_v ≤ L_s, got L_s = {l_scalar} m, L_v = {l_vector} m"),
            ));
        }
        Ok(EffectiveLengths { l_scalar, l_vector })
    }

    /// Scalar-process interaction length L_s (m).
    pub fn l_scalar(&self) -> f64 {
        self.l_scalar
    }

    /// Vector-process interaction length L_v (m).
    pub fn l_vector(&self) -> f64 {
        self.l_vector
    }
}

/// Pump peak power on the (H, V) fiber axes: (P·cos²θ, P·sin²θ).
pub fn pump_split(pump: &PumpConfig) -> (f64, f64) {
    // Exact zeros on the axes, so a single-axis pump has no vector process at all.
    let (s, c) = if pump.theta_deg == 90.0 {
        (1.0, 0.0)
    } else {
        pump.theta_deg.to_radians().sin_cos()
    };
    let p_h = pump.peak_power * c * c;
    let p_v = pump.peak_power * (s * s);
    (p_h, p_v)
}

/// Samples the H-vs-V group delay at `z_samples` evenly spaced points from 0 to the line length.
pub fn walkoff_delay_profile(line: &FiberLine, z_samples: usize) -> Result<Vec<(f64, f64)>> {
    if z_samples < 2 {
        return Err(invalid("z_samples", format!("{z_samples} must be ≥ 2")));
    }
    let total = line.total_length();
    let last = (z_samples - 1) as f64;
    Ok((0..z_samples)
        .map(|k| {
            let z = if k + 1 == z_samples {
                total
            } else {
                total * k as f64 / last
            };
            (z, line.delay_at(z))
        })
        .collect())
}

/// Distance (m) over which the H and V pump envelopes separate by one pulse width.
pub fn walkoff_length(pulse_width: f64, delta_beta1: f64) -> Result<f64> {
    if delta_beta1 == 0.0 {
        return Err(Error::InfiniteWalkoff);
    }
    if delta_beta1.is_nan() || delta_beta1 <= 0.0 {
        return Err(invalid(
            "delta_beta1",
            format!("{delta_beta1} ps/m must be > 0"),
        ));
    }
    Ok(pulse_width / delta_beta1)
}

/// L_s is the full line length; L_v is twice the walk-off length (or twice the
/// override), clamped to L_s. Without birefringence the vector process spans the
/// whole fiber, so L_v = L_s.
pub fn effective_lengths(
    line: &FiberLine,
    pump: &PumpConfig,
    walkoff_override: Option<f64>,
) -> Result<EffectiveLengths> {
    let l_scalar = line.total_length();
    let walkoff = match walkoff_override {
        Some(w) if w.is_finite() && w > 0.0 => w,
        Some(w) => return Err(invalid("walkoff_override", format!("{w} m must be > 0"))),
        None => match walkoff_length(pump.pulse_width, line.medium().delta_beta1) {
            Ok(w) => w,
            Err(Error::InfiniteWalkoff) => f64::INFINITY,
            Err(e) => return Err(e),
        },
    };
    EffectiveLengths::new(l_scalar, (2.0 * walkoff).min(l_scalar))
}

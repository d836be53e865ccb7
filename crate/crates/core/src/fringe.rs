//! Two-photon interference fringe fitting.
//!
//! The model is C(θ_i) = C₀·[1 + V·cos(2(θ_i − θ₀))] with the period fixed at
//! 180°. Parameters are found by weighted least squares with Poisson weights
//! 1/max(counts, 1), using Levenberg–Marquardt from a deterministic start.

use nalgebra::{Matrix3, Vector3};

use crate::error::{invalid, Error, Result};

pub const MIN_DISTINCT_ANGLES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringePoint {
    pub theta_i_deg: f64,
    pub counts: f64,
    /// Estimated accidental coincidences contained in `counts`.
    pub accidentals: f64,
}

impl FringePoint {
    pub fn new(theta_i_deg: f64, counts: f64) -> Self {
        FringePoint {
            theta_i_deg,
            counts,
            accidentals: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeDataset {
    theta_s_deg: f64,
    points: Vec<FringePoint>,
    pulses_per_point: u64,
}

fn distinct_angles(points: &[FringePoint]) -> usize {
    let mut angles: Vec<f64> = points
        .iter()
        .map(|p| {
            let a = p.theta_i_deg.rem_euclid(180.0);
            // 179.999999... and 0 are the same analyzer setting
            if 180.0 - a < 1e-9 {
                0.0
            } else {
                a
            }
        })
        .collect();
    angles.sort_by(f64::total_cmp);
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    angles.len()
}

impl FringeDataset {
    pub fn new(theta_s_deg: f64, points: Vec<FringePoint>, pulses_per_point: u64) -> Result<Self> {
        for p in &points {
            if !(p.theta_i_deg.is_finite() && p.counts.is_finite() && p.counts >= 0.0) {
                return Err(invalid(
                    "fringe point",
                    format!("θ_i = {}, counts = {}", p.theta_i_deg, p.counts),
                ));
            }
            if !(p.accidentals.is_finite() && p.accidentals >= 0.0) {
                return Err(invalid(
                    "accidentals",
                    format!("{} must be ≥ 0", p.accidentals),
                ));
            }
        }
        let got = distinct_angles(&points);
        if got < MIN_DISTINCT_ANGLES {
            return Err(Error::InsufficientPoints {
                needed: MIN_DISTINCT_ANGLES,
                got,
            });
        }
        Ok(FringeDataset {
            theta_s_deg,
            points,
            pulses_per_point,
        })
    }

    pub fn theta_s_deg(&self) -> f64 {
        self.theta_s_deg
    }

    pub fn points(&self) -> &[FringePoint] {
        &self.points
    }

    pub fn pulses_per_point(&self) -> u64 {
        self.pulses_per_point
    }
}

/// (max − min)/(max + min) over the raw counts.
pub fn raw_visibility(data: &FringeDataset) -> Result<f64> {
    raw_visibility_of(data.points.iter().map(|p| p.counts))
}

fn raw_visibility_of(counts: impl Iterator<Item = f64>) -> Result<f64> {
    let (lo, hi) = counts.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| {
        (lo.min(c), hi.max(c))
    });
    if hi + lo <= 0.0 {
        return Err(Error::DegenerateData("max + min of counts is zero".into()));
    }
    Ok((hi - lo) / (hi + lo))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Subtract each point's accidental estimate before fitting.
    pub subtract_accidentals: bool,
    /// Overrides the Fourier-phase starting value of θ₀ (degrees).
    pub initial_phase_deg: Option<f64>,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            subtract_accidentals: false,
            initial_phase_deg: None,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    /// Fitted visibility clamped to [0, 1].
    pub visibility: f64,
    pub visibility_unclamped: f64,
    /// The unclamped estimate exceeded 1.
    pub exceeded_one: bool,
    /// θ₀ in [0°, 180°).
    pub phase_deg: f64,
    pub mean_level: f64,
    pub visibility_stderr: f64,
    pub phase_stderr_deg: f64,
    pub mean_level_stderr: f64,
    pub reduced_chi_square: f64,
    pub iterations: usize,
}

struct Problem {
    /// 2θ_i in radians
    angle2: Vec<f64>,
    y: Vec<f64>,
    w: Vec<f64>,
}

impl Problem {
    fn model(&self, p: &Vector3<f64>, k: usize) -> f64 {
        p[0] * (1.0 + p[1] * (self.angle2[k] - 2.0 * p[2]).cos())
    }

    fn chi_square(&self, p: &Vector3<f64>) -> f64 {
        (0..self.y.len())
            .map(|k| {
                let r = self.y[k] - self.model(p, k);
                self.w[k] * r * r
            })
            .sum()
    }

    /// JᵀWJ and JᵀWr at `p`.
    fn normal_equations(&self, p: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for k in 0..self.y.len() {
            let (s, c) = (self.angle2[k] - 2.0 * p[2]).sin_cos();
            let j = Vector3::new(1.0 + p[1] * c, p[0] * c, 2.0 * p[0] * p[1] * s);
            let r = self.y[k] - p[0] * (1.0 + p[1] * c);
            jtj += j * j.transpose() * self.w[k];
            jtr += j * (self.w[k] * r);
        }
        (jtj, jtr)
    }
}

/// Fits with default options.
pub fn fit_fringe(data: &FringeDataset) -> Result<FitResult> {
    fit_fringe_with(data, &FitOptions::default())
}

pub fn fit_fringe_with(data: &FringeDataset, opts: &FitOptions) -> Result<FitResult> {
    if data.points.iter().all(|p| p.counts == 0.0) {
        return Err(Error::DegenerateData("all counts are zero".into()));
    }
    let y: Vec<f64> = data
        .points
        .iter()
        .map(|p| {
            if opts.subtract_accidentals {
                (p.counts - p.accidentals).max(0.0)
            } else {
                p.counts
            }
        })
        .collect();
    if y.iter().all(|&c| c == 0.0) {
        return Err(Error::DegenerateData(
            "no counts left after accidental subtraction".into(),
        ));
    }
    let problem = Problem {
        angle2: data
            .points
            .iter()
            .map(|p| 2.0 * p.theta_i_deg.to_radians())
            .collect(),
        // variance follows the raw Poisson counts even after subtraction
        w: data
            .points
            .iter()
            .map(|p| 1.0 / p.counts.max(1.0))
            .collect(),
        y,
    };

    let n = problem.y.len() as f64;
    let mean = problem.y.iter().sum::<f64>() / n;
    let v0 = raw_visibility_of(problem.y.iter().copied())?.min(1.0);
    let theta0 = match opts.initial_phase_deg {
        Some(deg) => deg.to_radians(),
        None => {
            let (a, b) = problem
                .angle2
                .iter()
                .zip(&problem.y)
                .fold((0.0, 0.0), |(a, b), (&t, &c)| {
                    (a + c * t.cos(), b + c * t.sin())
                });
            0.5 * b.atan2(a)
        }
    };

    let mut p = Vector3::new(mean, v0, theta0);
    let mut chi2 = problem.chi_square(&p);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (jtj, jtr) = problem.normal_equations(&p);
        let mut accepted = false;
        // inner loop: raise damping until the step reduces χ²
        for _ in 0..60 {
            let mut damped = jtj;
            for d in 0..3 {
                damped[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = damped.cholesky().map(|ch| ch.solve(&jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let trial = p + step;
            let trial_chi2 = problem.chi_square(&trial);
            if trial_chi2 <= chi2 {
                // θ₀ is an angle, so its scale is O(1) rad rather than its own magnitude
                let scale = [p[0].abs(), p[1].abs().max(1e-3), 1.0];
                let step_small = (0..3).all(|d| step[d].abs() <= 1e-13 * scale[d]);
                p = trial;
                chi2 = trial_chi2;
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                converged = step_small;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // no downhill step at any damping: p is a local minimum to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }

    // χ² comparisons stop resolving progress once the remaining parameter error
    // is ~√ε, so finish with undamped Gauss–Newton steps driven by the gradient
    // alone, for as long as they keep contracting.
    if converged {
        let mut last_norm = f64::INFINITY;
        for _ in 0..20 {
            let (jtj, jtr) = problem.normal_equations(&p);
            let Some(step) = jtj.cholesky().map(|ch| ch.solve(&jtr)) else {
                break;
            };
            let scale = [p[0].abs(), p[1].abs().max(1e-3), 1.0];
            let norm = (0..3)
                .map(|d| (step[d] / scale[d]).abs())
                .fold(0.0, f64::max);
            if norm.is_nan() || norm >= last_norm || norm > 1e-6 {
                break;
            }
            p += step;
            last_norm = norm;
            if norm <= 1e-15 {
                break;
            }
        }
        chi2 = problem.chi_square(&p);
    }

    // V < 0 is the same curve as |V| shifted by 90°.
    if p[1] < 0.0 {
        p[1] = -p[1];
        p[2] += std::f64::consts::FRAC_PI_2;
    }
    p[2] = p[2].rem_euclid(std::f64::consts::PI);

    let (jtj, _) = problem.normal_equations(&p);
    let cov = jtj
        .try_inverse()
        .unwrap_or_else(|| Matrix3::from_element(f64::NAN));
    let dof = (problem.y.len() as f64 - 3.0).max(1.0);
    let result = FitResult {
        visibility: p[1].clamp(0.0, 1.0),
        visibility_unclamped: p[1],
        exceeded_one: p[1] > 1.0,
        phase_deg: p[2].to_degrees().rem_euclid(180.0),
        mean_level: p[0],
        visibility_stderr: cov[(1, 1)].max(0.0).sqrt(),
        phase_stderr_deg: cov[(2, 2)].max(0.0).sqrt().to_degrees(),
        mean_level_stderr: cov[(0, 0)].max(0.0).sqrt(),
        reduced_chi_square: chi2 / dof,
        iterations,
    };
    if !converged {
        return Err(Error::FitDidNotConverge {
            iterations,
            best_visibility: result.visibility,
            best: Box::new(result),
        });
    }
    Ok(result)
}

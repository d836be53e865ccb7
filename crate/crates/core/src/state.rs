//! Two-photon polarization state and analyzer probabilities.
//!
//! Basis ordering is |HH⟩, |HV⟩, |VH⟩, |VV⟩ with the signal photon first.
//! Analyzer angles are polarization-transmission angles: an analyzer at θ
//! projects onto cos θ|H⟩ + sin θ|V⟩.

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitState {
    rho: Matrix4<Complex64>,
}

impl TwoQubitState {
    pub fn new(rho: Matrix4<Complex64>) -> Result<Self> {
        let herm_err = (rho - rho.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm_err > HERMITIAN_TOL {
            return Err(invalid(
                "rho",
                format!("not Hermitian (deviation {herm_err:e})"),
            ));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(invalid("rho", format!("trace {tr} ≠ 1")));
        }
        let min_eig = rho.symmetric_eigenvalues().min();
        if min_eig < -EIGEN_TOL {
            return Err(invalid("rho", format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(TwoQubitState { rho })
    }

    pub fn rho(&self) -> &Matrix4<Complex64> {
        &self.rho
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.rho.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        ev
    }

    /// ⟨u|ρ|u⟩ for a product analyzer state u.
    fn expectation(&self, u: &Vector4<Complex64>) -> f64 {
        (u.adjoint() * self.rho * u)[(0, 0)].re
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzerSetting {
    theta_s: f64,
    theta_i: f64,
}

impl AnalyzerSetting {
    /// Angles in degrees, reduced modulo 180°.
    pub fn new(theta_s: f64, theta_i: f64) -> Self {
        AnalyzerSetting {
            theta_s: theta_s.rem_euclid(180.0),
            theta_i: theta_i.rem_euclid(180.0),
        }
    }

    pub fn theta_s(&self) -> f64 {
        self.theta_s
    }

    pub fn theta_i(&self) -> f64 {
        self.theta_i
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Signal,
    Idler,
}

/// Imperfections of the generated state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceNoise {
    werner_v: f64,
    amplitude_imbalance: f64,
    phase_phi: f64,
}

impl SourceNoise {
    /// `werner_v` is the entangled fraction, `amplitude_imbalance` the VV/HH
    /// weight ratio (1 = balanced), `phase_phi` the HH–VV phase in radians.
    pub fn new(werner_v: f64, amplitude_imbalance: f64, phase_phi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&werner_v) {
            return Err(invalid(
                "werner_v",
                format!("{werner_v} must lie in [0, 1]"),
            ));
        }
        if !(amplitude_imbalance.is_finite() && amplitude_imbalance > 0.0) {
            return Err(invalid(
                "amplitude_imbalance",
                format!("{amplitude_imbalance} must be > 0"),
            ));
        }
        if !phase_phi.is_finite() {
            return Err(invalid("phase_phi", "must be finite"));
        }
        Ok(SourceNoise {
            werner_v,
            amplitude_imbalance,
            phase_phi,
        })
    }

    pub fn ideal() -> Self {
        SourceNoise {
            werner_v: 1.0,
            amplitude_imbalance: 1.0,
            phase_phi: 0.0,
        }
    }

    pub fn werner_v(&self) -> f64 {
        self.werner_v
    }

    pub fn amplitude_imbalance(&self) -> f64 {
        self.amplitude_imbalance
    }

    pub fn phase_phi(&self) -> f64 {
        self.phase_phi
    }

    /// HH population a of the pure part, from the VV/HH ratio.
    pub fn hh_weight(&self) -> f64 {
        1.0 / (1.0 + self.amplitude_imbalance)
    }

    fn pure_part(&self) -> Matrix4<Complex64> {
        let a = self.hh_weight();
        let psi = Vector4::new(
            Complex64::new(a.sqrt(), 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::from_polar((1.0 - a).sqrt(), self.phase_phi),
        );
        psi * psi.adjoint()
    }
}

/// V·|ψ⟩⟨ψ| + (1−V)·I/4 with |ψ⟩ = √a|HH⟩ + e^{iφ}√(1−a)|VV⟩.
pub fn make_state(noise: &SourceNoise) -> TwoQubitState {
    let v = noise.werner_v;
    let mixed = Matrix4::<Complex64>::identity().scale(0.25);
    TwoQubitState {
        rho: noise.pure_part().scale(v) + mixed.scale(1.0 - v),
    }
}

/// V·|ψ⟩⟨ψ| + (1−V)·(a|HH⟩⟨HH| + (1−a)|VV⟩⟨VV|): the noise is a classical
/// HH/VV mixture, i.e. residual distinguishability rather than white noise.
pub fn make_state_colored(noise: &SourceNoise) -> TwoQubitState {
    let v = noise.werner_v;
    let a = noise.hh_weight();
    let mut classical = Matrix4::<Complex64>::zeros();
    classical[(0, 0)] = Complex64::new(a, 0.0);
    classical[(3, 3)] = Complex64::new(1.0 - a, 0.0);
    TwoQubitState {
        rho: noise.pure_part().scale(v) + classical.scale(1.0 - v),
    }
}

fn analyzer_vector(theta_deg: f64) -> [f64; 2] {
    let theta = theta_deg.rem_euclid(180.0);
    if theta == 90.0 {
        return [0.0, 1.0];
    }
    let (s, c) = theta.to_radians().sin_cos();
    [c, s]
}

fn product(signal: [f64; 2], idler: [f64; 2]) -> Vector4<Complex64> {
    Vector4::from_fn(|k, _| Complex64::new(signal[k / 2] * idler[k % 2], 0.0))
}

/// Probability that both photons pass their analyzers.
pub fn coincidence_prob(state: &TwoQubitState, setting: &AnalyzerSetting) -> f64 {
    let u = product(
        analyzer_vector(setting.theta_s),
        analyzer_vector(setting.theta_i),
    );
    state.expectation(&u)
}

/// Probability that the photon on `side` passes an analyzer at `theta_deg`,
/// whatever happens to its partner.
pub fn single_prob(state: &TwoQubitState, side: Side, theta_deg: f64) -> f64 {
    let v = analyzer_vector(theta_deg);
    let (h, vv) = ([1.0, 0.0], [0.0, 1.0]);
    let partner = match side {
        Side::Signal => [product(v, h), product(v, vv)],
        Side::Idler => [product(h, v), product(vv, v)],
    };
    partner.iter().map(|u| state.expectation(u)).sum()
}

/// Two-photon fringe visibility (C_max − C_min)/(C_max + C_min) over the idler
/// analyzer angle, with the signal analyzer fixed at `theta_s_deg`.
///
/// For fixed θ_s the coincidence probability is a quadratic form wᵀMw in
/// w = (cos θ_i, sin θ_i), so its extremes over θ_i are the eigenvalues of the
/// real symmetric 2×2 matrix M.
pub fn visibility_analytic(state: &TwoQubitState, theta_s_deg: f64) -> Result<f64> {
    let vs = analyzer_vector(theta_s_deg);
    let mut m = [[0.0f64; 2]; 2];
    for (j, row) in m.iter_mut().enumerate() {
        for (k, cell) in row.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    acc += state.rho[(2 * a + j, 2 * b + k)] * (vs[a] * vs[b]);
                }
            }
            *cell = acc.re;
        }
    }
    let sum = m[0][0] + m[1][1];
    let half_diff = 0.5 * (m[0][0] - m[1][1]);
    let q = 0.5 * (m[0][1] + m[1][0]);
    let spread = half_diff.hypot(q);
    if sum <= 0.0 {
        return Err(Error::UndefinedVisibility);
    }
    Ok(2.0 * spread / sum)
}

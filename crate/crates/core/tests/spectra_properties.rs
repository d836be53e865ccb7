use pmsfwm_core::fiber::{pump_split, EffectiveLengths, FiberLine, PumpConfig};
use pmsfwm_core::spectra::{
    band_rate, pfsd_scalar, pfsd_vector, spectrum, suppression_ratio, thz_to_omega, Components,
    DetuningGrid, FilterSpec, PhaseFactor, RateModel,
};
use proptest::prelude::*;

fn reference_line() -> FiberLine {
    FiberLine::midpoint_spliced(150.0, 0.286, -3.824e-3, 3e-3).unwrap()
}

fn reference_pump(theta: f64) -> PumpConfig {
    PumpConfig::new(0.8, theta, 20.0, 1e6, 1552.75).unwrap()
}

/// Plain trapezoidal rule on an explicit fine grid, evaluating the PFSDs directly.
fn fine_grid_integral(lo: f64, hi: f64, points: usize) -> f64 {
    let line = reference_line();
    let seg = line.medium();
    let lengths = EffectiveLengths::new(150.0, 15.0).unwrap();
    let (p_h, p_v) = pump_split(&reference_pump(45.0));
    let f = |thz: f64| {
        let w = thz_to_omega(thz);
        pfsd_scalar(w, p_h, &lengths, seg) + pfsd_scalar(w, p_v, &lengths, seg)
    };
    let h = (hi - lo) / (points - 1) as f64;
    let inner: f64 = (1..points - 1).map(|k| f(lo + h * k as f64)).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

#[test]
fn band_rate_agrees_with_fine_grid_integral() {
    let grid = DetuningGrid::linspace_thz(-1.0, 1.0, 2001).unwrap();
    let lengths = EffectiveLengths::new(150.0, 15.0).unwrap();
    let spec = spectrum(
        &grid,
        &reference_pump(45.0),
        &reference_line(),
        &lengths,
        PhaseFactor::Sin2,
    );
    let filter = FilterSpec::new(0.2, 100.0).unwrap();
    let model = RateModel {
        rep_rate: 1e6,
        duty: 1.0,
        scale: 1.0,
    };
    let rate = band_rate(&spec, &filter, Components::Scalar, &model).unwrap();
    // grid step is 1 GHz; the oracle uses 100× finer sampling
    let oracle = fine_grid_integral(0.15, 0.25, 10_001);
    let rel = (rate.pairs_per_pulse - oracle).abs() / oracle;
    assert!(
        rel < 1e-3,
        "band {} vs oracle {oracle} ({rel:e})",
        rate.pairs_per_pulse
    );
}

#[test]
fn band_rate_is_additive_over_adjacent_bands() {
    let grid = DetuningGrid::linspace_thz(-1.0, 1.0, 333).unwrap();
    let lengths = EffectiveLengths::new(150.0, 15.0).unwrap();
    let spec = spectrum(
        &grid,
        &reference_pump(30.0),
        &reference_line(),
        &lengths,
        PhaseFactor::Sin2,
    );
    let model = RateModel {
        rep_rate: 1e6,
        duty: 2e-5,
        scale: 3.0,
    };
    let whole = FilterSpec::new(0.2, 300.0).unwrap();
    let left = FilterSpec::new(0.1175, 135.0).unwrap();
    let right = FilterSpec::new(0.2675, 165.0).unwrap();
    for c in [Components::Scalar, Components::Vector, Components::All] {
        let w = band_rate(&spec, &whole, c, &model).unwrap().pairs_per_pulse;
        let l = band_rate(&spec, &left, c, &model).unwrap().pairs_per_pulse;
        let r = band_rate(&spec, &right, c, &model).unwrap().pairs_per_pulse;
        assert!(
            ((l + r) - w).abs() <= 1e-12 * w.abs(),
            "{c:?}: {l} + {r} vs {w}"
        );
    }
}

#[test]
fn suppression_grows_as_vector_length_shrinks() {
    // L_v²·sin²(κL_v/2) rises until κL_v/2 ≈ 2.03 rad (tan x = −x); at 0.2 THz
    // that is L_v ≈ 11.4 m, so sample 11 m down to 1 m.
    let mut last = 0.0;
    for k in 0..11 {
        let lv = 11.0 - k as f64;
        let lengths = EffectiveLengths::new(150.0, lv).unwrap();
        let r = suppression_ratio(
            0.2,
            &reference_pump(45.0),
            &reference_line(),
            &lengths,
            PhaseFactor::Sin2,
        )
        .value();
        assert!(r > last, "L_v = {lv}: {r} after {last}");
        last = r;
    }
}

#[test]
fn balanced_pump_gives_equal_scalar_spectra() {
    let grid = DetuningGrid::linspace_thz(-1.0, 1.0, 101).unwrap();
    let lengths = EffectiveLengths::new(150.0, 15.0).unwrap();
    let s = spectrum(
        &grid,
        &reference_pump(45.0),
        &reference_line(),
        &lengths,
        PhaseFactor::Sin2,
    );
    for (hh, vv) in s.f_hh.iter().zip(&s.f_vv) {
        assert!((hh - vv).abs() <= 1e-12 * hh.abs().max(1e-30));
    }
}

/// Tolerance scale: the PFSD prefactor (γPL)², which bounds every value.
fn envelope(gamma: f64, p: f64, l: f64) -> f64 {
    (gamma * p * l).powi(2)
}

fn fiber_params() -> impl Strategy<Value = (f64, f64, f64, f64, f64, f64, f64)> {
    (
        1e-4..1.0f64,   // Δβ₁ ps/m
        -2e-2..2e-2f64, // β₂ ps²/m
        1e-4..2e-2f64,  // γ 1/(W·m)
        1.0..500.0f64,  // fiber length m
        0.01..1.0f64,   // L_v / L_s
        0.0..5.0f64,    // P_p W
        -3.0..3.0f64,   // detuning THz
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn scalar_pfsd_is_even((db1, b2, g, l, frac, p, thz) in fiber_params()) {
        let line = FiberLine::midpoint_spliced(l, db1, b2, g).unwrap();
        let lengths = EffectiveLengths::new(l, l * frac).unwrap();
        let w = thz_to_omega(thz);
        let a = pfsd_scalar(w, p, &lengths, line.medium());
        let b = pfsd_scalar(-w, p, &lengths, line.medium());
        prop_assert!((a - b).abs() <= 1e-12 * envelope(g, p, l));
    }

    #[test]
    fn vector_pfsd_mirror((db1, b2, g, l, frac, p, thz) in fiber_params(), theta in 0.0..90.0f64) {
        let line = FiberLine::midpoint_spliced(l, db1, b2, g).unwrap();
        let lengths = EffectiveLengths::new(l, l * frac).unwrap();
        let pump = PumpConfig::new(p, theta, 20.0, 1e6, 1552.75).unwrap();
        let (ph, pv) = pump_split(&pump);
        let w = thz_to_omega(thz);
        let (hv_plus, vh_plus) = pfsd_vector(w, ph, pv, &lengths, line.medium());
        let (hv_minus, vh_minus) = pfsd_vector(-w, ph, pv, &lengths, line.medium());
        let tol = 1e-12 * envelope(g, p, l * frac);
        prop_assert!((hv_minus - vh_plus).abs() <= tol);
        prop_assert!((vh_minus - hv_plus).abs() <= tol);
    }

    #[test]
    fn relabeling_symmetry((db1, b2, g, l, frac, p, thz) in fiber_params(), theta in 0.0..90.0f64) {
        // θ → 90° − θ swaps the pump powers on H and V; the spectra swap labels.
        let line = FiberLine::midpoint_spliced(l, db1, b2, g).unwrap();
        let lengths = EffectiveLengths::new(l, l * frac).unwrap();
        let grid = DetuningGrid::from_thz(&[thz]).unwrap();
        let a = spectrum(&grid, &PumpConfig::new(p, theta, 20.0, 1e6, 1552.75).unwrap(),
            &line, &lengths, PhaseFactor::Sin2);
        let b = spectrum(&grid, &PumpConfig::new(p, 90.0 - theta, 20.0, 1e6, 1552.75).unwrap(),
            &line, &lengths, PhaseFactor::Sin2);
        // power relabeling is exact only to rounding of cos²/sin², which the
        // phase terms amplify by at most the phase magnitude
        let phase_scale = 1.0 + g * p * l;
        let tol = 1e-12 * envelope(g, p, l) * phase_scale;
        prop_assert!((a.f_hh[0] - b.f_vv[0]).abs() <= tol);
        prop_assert!((a.f_vv[0] - b.f_hh[0]).abs() <= tol);
        prop_assert!((a.f_hv[0] - b.f_hv[0]).abs() <= tol);
        prop_assert!((a.f_vh[0] - b.f_vh[0]).abs() <= tol);
    }

    #[test]
    fn spectra_are_nonnegative((db1, b2, g, l, frac, p, thz) in fiber_params(), theta in 0.0..180.0f64) {
        let line = FiberLine::midpoint_spliced(l, db1, b2, g).unwrap();
        let lengths = EffectiveLengths::new(l, l * frac).unwrap();
        let grid = DetuningGrid::from_thz(&[thz]).unwrap();
        for factor in [PhaseFactor::Sin2, PhaseFactor::Sinc2] {
            let s = spectrum(&grid, &PumpConfig::new(p, theta, 20.0, 1e6, 1552.75).unwrap(),
                &line, &lengths, factor);
            prop_assert!(s.f_hh[0] >= 0.0 && s.f_vv[0] >= 0.0 && s.f_hv[0] >= 0.0 && s.f_vh[0] >= 0.0);
        }
    }

    #[test]
    fn pump_split_conserves_power(p in 0.0..100.0f64, theta in 0.0..180.0f64) {
        let (h, v) = pump_split(&PumpConfig::new(p, theta, 20.0, 1e6, 1552.75).unwrap());
        prop_assert!((h + v - p).abs() <= 1e-12 * p.max(f64::MIN_POSITIVE));
    }
}

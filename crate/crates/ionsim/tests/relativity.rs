use ionsim::foundation::consts::{BOLTZMANN, REDUCED_PLANCK};
use ionsim::fock_engine::{evolve_schedule, HybridState};
use ionsim::linalg::Csr;
use ionsim::relativity::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use std::f64::consts::PI;

const NU0: f64 = 2.0 * PI * 1e6;
const KAPPA: f64 = 2.0 * PI * 1e3;

/// |∫ u*(t)e^{iΔt}dt|² with u propagated by exact piecewise-constant-frequency rotations and
/// the integral by the trapezoid rule; the factorized form of the double time integral.
fn oracle_amplitude_sq(nu0: f64, kappa: f64, delta: f64, duration: f64) -> f64 {
    let i = C64::new(0.0, 1.0);
    let (mut u, mut v) = (C64::new(1.0, 0.0), C64::new(0.5 * kappa, -nu0));
    let mut t = 0.0;
    let mut acc = C64::new(0.0, 0.0);
    let f = |t: f64, u: C64| u.conj() * C64::from_polar(1.0, delta * t);
    let mut prev = f(0.0, u);
    while t < duration {
        let nu = nu0 * (-kappa * t).exp();
        let h = (0.002 / nu.max(delta.abs()).max(kappa)).min(duration - t);
        let w = nu0 * (-kappa * (t + 0.5 * h)).exp();
        let (c, s) = ((w * h).cos(), (w * h).sin());
        let (un, vn) = (u * c + v * (s / w), v * c - u * (w * s));
        u = un;
        v = vn;
        t += h;
        let cur = f(t, u);
        acc += (prev + cur) * (0.5 * h);
        prev = cur;
    }
    let nut = nu0 * (-kappa * duration).exp();
    let a = (u + i * v / nut) * 0.5;
    let b = (u - i * v / nut) * 0.5;
    let tail = C64::from_polar(1.0, delta * duration) * (a.conj() * i / (delta + nut) + b.conj() * i / (delta - nut));
    (1.0 / (i * (nu0 + delta)) + acc + tail).norm_sqr()
}

#[test]
fn closed_form_matches_time_integral_on_grid() {
    let (rabi, eta0) = (2.0 * PI * 10e3, 0.05);
    for kf in [0.5, 0.75, 1.0, 1.5, 2.0] {
        let kappa = KAPPA * kf;
        let duration = (NU0 / kappa * 1e4).ln() / kappa;
        let ramp = TrapRamp::exponential(NU0, kappa, duration).unwrap();
        assert!(ramp.validity().ok());
        for x in [-1.0, -0.5, 0.25, 0.5, 1.0] {
            let delta = x * kappa;
            let closed = unruh_probability(delta, &ramp, rabi, eta0).unwrap();
            let numeric = (rabi * eta0).powi(2) * oracle_amplitude_sq(NU0, kappa, delta, duration);
            assert!((numeric / closed - 1.0).abs() < 1e-3, "κ×{kf} Δ/κ={x}: {numeric:e} vs {closed:e}");
        }
    }
}

#[test]
fn closed_form_limits() {
    let ramp = TrapRamp::exponential(NU0, KAPPA, 1.0).unwrap();
    for x in [0.3, 1.0, 2.5] {
        let d = x * KAPPA;
        let r = unruh_probability(d, &ramp, 1.0, 1.0).unwrap() / unruh_probability(-d, &ramp, 1.0, 1.0).unwrap();
        assert!((r / sideband_ratio(d, KAPPA) - 1.0).abs() < 1e-12);
    }
    assert!(matches!(unruh_probability(0.0, &ramp, 1.0, 1.0), Err(RelativityError::Singular)));
    let slow = TrapRamp::exponential(NU0, KAPPA * 1e-3, 1.0).unwrap();
    assert!(unruh_probability(KAPPA, &slow, 1.0, 1.0).unwrap() < 1e-300);
}

#[test]
fn temperatures() {
    let t = unruh_temperature(KAPPA);
    assert!((t - 7.638e-9).abs() < 1e-11, "{t:e}");
    assert!((unruh_temperature(2.0 * KAPPA) / t - 2.0).abs() < 1e-15);
    let lambda = 4.2e5;
    assert!((unruh_temperature(kappa_for_lambda(lambda)) / gibbons_hawking_temperature(lambda) - 1.0).abs() < 1e-14);
    let (nu, temp) = (NU0, 3e-5);
    let nbar = 1.0 / ((REDUCED_PLANCK * nu / (BOLTZMANN * temp)).exp() - 1.0);
    assert!((thermal_ratio(nbar) - (-REDUCED_PLANCK * nu / (BOLTZMANN * temp)).exp()).abs() < 1e-12);
    assert!((temperature_from_ratio(thermal_ratio(nbar), nu) / temp - 1.0).abs() < 1e-10);
}

#[test]
fn trap_opening_thermometry() {
    let ramp = TrapRamp::exponential(NU0, KAPPA, 12.0 / KAPPA).unwrap();
    assert!(ramp.validity().ok());
    let deltas: Vec<f64> = [0.25, 0.5, 0.75, 1.0].iter().map(|x| x * KAPPA).collect();
    let run = trap_opening_simulation(&ramp, &deltas, 2.0 * PI * 10e3, 0.05).unwrap();
    for (r, c) in run.ratios.iter().zip(&run.closed_ratios) {
        assert!((r / c - 1.0).abs() < 0.1, "{r} vs {c}");
    }
    assert!((run.fitted_temperature / run.expected_temperature - 1.0).abs() < 0.1);
    assert!(run.nbar > 1.0);
}

#[test]
fn stationary_trap_is_adiabatic() {
    let ramp = TrapRamp::stationary(NU0, 200.0 / NU0).unwrap();
    let run = trap_opening_simulation(&ramp, &[0.3 * NU0], 1.0, 0.05).unwrap();
    assert!(run.nbar < 1e-10);
    assert!(!run.validity.ok());
    let quick = TrapRamp::exponential(NU0, 0.5 * NU0, 1.0 / KAPPA).unwrap();
    assert!(!quick.validity().slow);
}

fn three_ion_modes() -> Vec<f64> {
    vec![NU0, 3f64.sqrt() * NU0, (29.0f64 / 5.0).sqrt() * NU0]
}

#[test]
fn quench_creates_even_phonon_pairs() {
    let ramp = TrapRamp::quench(NU0, 2.0 * NU0, 0.5 / NU0, 20.0 / NU0).unwrap();
    let out = particle_creation(&ramp, &three_ion_modes(), 120).unwrap();
    assert!(out.scaling < 1.0);
    for m in &out.modes {
        let odd: f64 = m.populations.iter().skip(1).step_by(2).sum();
        let total: f64 = m.populations.iter().sum();
        assert!(odd < 1e-8);
        assert!(m.populations[2] > m.populations[1]);
        assert!(m.populations[2] > 1e-4);
        assert!((total - 1.0).abs() < 1e-8);
        assert!((m.alpha.norm_sqr() - m.beta.norm_sqr() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn static_trap_stays_vacuum() {
    let ramp = TrapRamp::stationary(NU0, 30.0 / NU0).unwrap();
    let out = particle_creation(&ramp, &three_ion_modes(), 10).unwrap();
    assert!((out.scaling - 1.0).abs() < 1e-10);
    for m in &out.modes {
        assert!((m.populations[0] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn bogoliubov_populations_match_fock_evolution() {
    // COM mode, ħ = m = 1, ν₀ = 1
    let ramp = TrapRamp::quench(1.0, 1.8, 0.7, 6.0).unwrap();
    let out = particle_creation(&ramp, &[1.0], 30).unwrap();
    let predicted = out.modes[0].end.populations(1.0, 30);
    let cutoff = 60;
    let r = ramp.clone();
    let h_at = move |t: f64| {
        let w2 = r.frequency(t).powi(2);
        // p²/2 + w²x²/2 with x = (a+a†)/√2, p = i(a†−a)/√2
        let mut trip = Vec::new();
        for n in 0..=cutoff {
            trip.push((n, n, C64::new(0.25 * (1.0 + w2) * (2 * n + 1) as f64, 0.0)));
            if n + 2 <= cutoff {
                let s = 0.25 * (w2 - 1.0) * (((n + 1) * (n + 2)) as f64).sqrt();
                trip.push((n + 2, n, C64::new(s, 0.0)));
                trip.push((n, n + 2, C64::new(s, 0.0)));
            }
        }
        Csr::from_triplets(cutoff + 1, trip)
    };
    let vac = HybridState::basis(1, cutoff, 0, 0);
    let fin = evolve_schedule(&vac, h_at, 6.0, 6000).unwrap();
    let p = fin.fock_distribution();
    let odd: f64 = p.iter().skip(1).step_by(2).sum();
    assert!(odd < 1e-8);
    for n in 0..=10 {
        assert!((p[n] - predicted[n]).abs() < 1e-5, "n={n}: {} vs {}", p[n], predicted[n]);
    }
}

const ZB_CUTOFF: usize = 2200;

fn dirac_params(omega: f64) -> DiracParams {
    // ηΩ̃ = 1/2 makes c = Δ in units of Δ per second
    DiracParams::new(0.1, 1e-8, 5.0, omega).unwrap()
}

fn zb_packet(params: &DiracParams, p0: f64, width: f64) -> Wavepacket {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    Wavepacket {
        center: 0.0,
        width: width * params.delta_spread,
        momentum: params.momentum(p0),
        spinor: [C64::new(r, 0.0), C64::new(0.0, r)],
    }
}

#[test]
fn zitterbewegung_grid() {
    for omega in [1.0, 2.0, 3.0] {
        for p0 in [0.0, 0.5, 1.0] {
            let params = dirac_params(omega);
            let pm = params.momentum(p0);
            let psi = wavepacket_state(&params, &zb_packet(&params, p0, 16.0), ZB_CUTOFF).unwrap();
            let w = params.zb_frequency(pm);
            let traj = dirac_evolution(&params, &psi, 5.0 * 2.0 * PI / w, 200).unwrap();
            let fit = fit_zitterbewegung(&traj, w).unwrap();
            let r = params.zb_amplitude(pm);
            assert!((fit.omega / w - 1.0).abs() < 0.05, "Ω={omega} p0={p0}: ω {} vs {w}", fit.omega);
            assert!((fit.amplitude / r - 1.0).abs() < 0.1, "Ω={omega} p0={p0}: R {:e} vs {r:e}", fit.amplitude);
            let c = params.c_eff();
            assert!(traj.max_speed() <= c * (1.0 + 1e-6));
            let e0 = traj.energy[0];
            assert!(traj.energy.iter().all(|e| (e - e0).abs() <= 1e-8 * e0.abs().max(REDUCED_PLANCK * omega)));
        }
    }
}

#[test]
fn massless_limit_has_no_trembling() {
    let massive = dirac_params(1.0);
    let massless = dirac_params(0.0);
    let pm = massive.momentum(0.5);
    let w = massless.zb_frequency(pm);
    assert_eq!(massless.zb_amplitude(pm), 0.0);
    let span = 5.0 * 2.0 * PI / massive.zb_frequency(pm);
    let run = |p: &DiracParams| {
        let psi = wavepacket_state(p, &zb_packet(p, 0.5, 16.0), ZB_CUTOFF).unwrap();
        dirac_evolution(p, &psi, span, 300).unwrap()
    };
    let base = zb_amplitude_at(&run(&massive), massive.zb_frequency(pm));
    let zero = zb_amplitude_at(&run(&massless), w);
    assert!(zero < 1e-3 * base, "{zero:e} vs {base:e}");
}

fn klein_setup(cutoff: usize) -> (DiracParams, HybridState) {
    let params = dirac_params(1.0);
    let p0 = params.momentum(1.0);
    let packet = Wavepacket {
        center: -12.0 * params.delta_spread,
        width: 3.0 * params.delta_spread,
        momentum: p0,
        spinor: positive_energy_spinor(&params, p0),
    };
    let psi = wavepacket_state(&params, &packet, cutoff).unwrap();
    (params, psi)
}

#[test]
fn klein_supercritical_step_transmits() {
    let (params, psi) = klein_setup(400);
    let shape = StepShape::Spatial { position: 0.0, smoothing: 0.2 * params.delta_spread };
    let run = |v: f64| klein_step(&params, &psi, &KleinStep { height: v, t0: 2.0, shape }, 40.0, 80).unwrap();
    let sub = run(1.2);
    let sup = run(4.0);
    assert!(!sub.supercritical && sup.supercritical);
    assert!((sub.trajectory.p_b[0] - 0.1464).abs() < 1e-3);
    assert!(sup.growth > 0.2);
    assert!(sup.growth >= 5.0 * sub.growth.max(0.0));
}

#[test]
fn klein_zero_and_global_steps_match_free_evolution() {
    let (params, psi) = klein_setup(300);
    let free = dirac_evolution(&params, &psi, 10.0, 20).unwrap();
    for (v, shape) in [(0.0, StepShape::Spatial { position: 0.0, smoothing: 2e-9 }), (3.0, StepShape::Global)] {
        let k = klein_step(&params, &psi, &KleinStep { height: v, t0: 1.0, shape }, 10.0, 20).unwrap();
        for (a, b) in k.trajectory.p_b.iter().zip(&free.p_b) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn ramp_rejects_bad_input() {
    assert!(TrapRamp::exponential(-1.0, 1.0, 1.0).is_err());
    assert!(TrapRamp::exponential(1.0, 1.0, 0.0).is_err());
    assert!(DiracParams::new(0.1, 0.0, 1.0, 1.0).is_err());
    let (params, psi) = klein_setup(300);
    let bad = KleinStep { height: -1.0, t0: 0.0, shape: StepShape::Global };
    assert!(klein_step(&params, &psi, &bad, 1.0, 2).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn quench_parity_and_normalization(ratio in 0.3f64..3.0, rise in 0.05f64..3.0) {
        let ramp = TrapRamp::quench(1.0, ratio, rise, 4.0).unwrap();
        let out = particle_creation(&ramp, &[1.0, 3f64.sqrt()], 80).unwrap();
        for m in &out.modes {
            let odd: f64 = m.populations.iter().skip(1).step_by(2).sum();
            prop_assert!(odd < 1e-8);
            prop_assert!((m.alpha.norm_sqr() - m.beta.norm_sqr() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn dirac_speed_bound(omega in 0.0f64..3.0, p0 in -1.5f64..1.5, a in 0.0f64..1.0) {
        let params = dirac_params(omega);
        let r = (1.0 - a * a).sqrt();
        let packet = Wavepacket {
            center: 0.0,
            width: 4.0 * params.delta_spread,
            momentum: params.momentum(p0),
            spinor: [C64::new(a, 0.0), C64::new(0.0, r)],
        };
        let psi = wavepacket_state(&params, &packet, 300).unwrap();
        let traj = dirac_evolution(&params, &psi, 6.0, 30).unwrap();
        prop_assert!(traj.max_speed() <= params.c_eff() * (1.0 + 1e-6));
        for w in traj.x.windows(2).zip(traj.times.windows(2)) {
            let v = (w.0[1] - w.0[0]) / (w.1[1] - w.1[0]);
            prop_assert!(v.abs() <= params.c_eff() * (1.0 + 1e-6));
        }
    }
}


//! Plant, delay-line and closed-loop properties of the simulator.

use std::f64::consts::PI;
use std::sync::Arc;

use heatlmi::sim::{run_closed_loop, Catalog, DelayBuffer, Plant, SimConfig};
use heatlmi::spectral::{input_coefficient, phi, trapezoid, BasisTable};
use heatlmi::synthesis::{build_reduced_model, design_gains, GainSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn l2(w: &[f64]) -> f64 {
    trapezoid(&w.iter().map(|v| v * v).collect::<Vec<_>>()).sqrt()
}

#[test]
fn pure_plant_conserves_mean_and_dissipates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nx = 100;
    let coeffs: Vec<f64> = (0..20).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut p = Plant::new(nx, |x| coeffs.iter().enumerate().map(|(n, c)| c * phi(n, x)).sum());
    let dt = 0.4 / (nx * nx) as f64;
    let mean0 = trapezoid(&p.w);
    let mut prev = l2(&p.w);
    for k in 0..20_000 {
        p.step_pde(k as f64 * dt, dt, 0.0, 0.0, &Catalog::Zero);
        let now = l2(&p.w);
        assert!(now <= prev * (1.0 + 1e-14), "L2 grew at step {k}: {prev} -> {now}");
        prev = now;
    }
    assert!((trapezoid(&p.w) - mean0).abs() < 1e-8);
}

#[test]
fn constant_mode_is_invariant() {
    let mut p = Plant::new(50, |_| 1.0);
    for k in 0..1000 {
        p.step_pde(k as f64 * 1e-4, 1e-4, 0.0, 0.0, &Catalog::Zero);
    }
    assert!(p.w.iter().all(|v| (v - 1.0).abs() < 1e-13));
}

#[test]
fn first_mode_decays_like_heat_kernel() {
    let t_end = 0.1;
    let exact = (-PI * PI * t_end).exp();
    let mut errs = Vec::new();
    for nx in [50, 100] {
        let mut p = Plant::new(nx, |x| phi(1, x));
        let steps = (t_end / (0.4 / (nx * nx) as f64)).ceil() as usize;
        let dt = t_end / steps as f64;
        for k in 0..steps {
            p.step_pde(k as f64 * dt, dt, 0.0, 0.0, &Catalog::Zero);
        }
        let amp = BasisTable::new(1, nx).project(&p.w, 1);
        let rel = (amp - exact).abs() / exact;
        assert!(rel < 0.01, "Nx = {nx}: relative error {rel}");
        errs.push(rel);
    }
    assert!(errs[1] < errs[0]);
}

#[test]
fn constant_input_drives_mean_at_b0() {
    let nx = 200;
    let v = 0.7;
    let mut p = Plant::new(nx, |_| 0.0);
    let dt = 0.4 / (nx * nx) as f64;
    let steps = 5000;
    for k in 0..steps {
        p.step_pde(k as f64 * dt, dt, 0.0, v, &Catalog::Zero);
    }
    let rate = trapezoid(&p.w) / (steps as f64 * dt);
    assert!((rate - input_coefficient(0) * v).abs() < 1e-4 * v, "{rate}");
}

#[test]
fn delay_line_is_causal_and_exact() {
    let lag = 37;
    let mut b = DelayBuffer::new(lag, 0.0);
    for k in 0..500 {
        b.push((k as f64).sin());
        let want = if k >= lag { ((k - lag) as f64).sin() } else { 0.0 };
        assert_eq!(*b.lagged(lag), want);
    }
}

fn short(mut cfg: SimConfig) -> SimConfig {
    cfg.nx = 40;
    cfg.t_final = 2.0;
    cfg.sample_interval = 0.02;
    cfg
}

#[test]
fn delayed_input_is_zero_before_r() {
    let model = build_reduced_model(0, 4, 0.0).unwrap();
    let gains = design_gains(&model, 1e-3, true).unwrap();
    let cfg = short(SimConfig::delayed(gains, 0, 4, 0.4, 2, Arc::new(Catalog::Sat { sigma: 0.2 })));
    let tr = run_closed_loop(&cfg).unwrap();
    for (t, u) in tr.t.iter().zip(&tr.u_delayed) {
        if *t < 0.4 - 1e-9 {
            assert_eq!(*u, 0.0);
        }
    }
    assert!(tr.u_delayed.iter().any(|u| *u != 0.0));
    assert!(tr.telescope_residual.iter().all(|r| *r <= 1e-12));
    assert!(tr.blow_up.is_none());
}

#[test]
fn identical_configs_give_identical_csv() {
    let cfg = short(SimConfig::delayed(GainSet::reference_delayed(), 0, 4, 0.32, 2, Arc::new(Catalog::Sin { sigma: 0.5 })));
    let mut a = Vec::new();
    let mut b = Vec::new();
    run_closed_loop(&cfg).unwrap().write_csv(&mut a).unwrap();
    run_closed_loop(&cfg).unwrap().write_csv(&mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("t,u_delayed,y,h1_w,h1_what,telescope_residual\n"));
    assert_eq!(text.lines().count(), 1 + 101);
}

#[test]
fn unstable_gains_trigger_blow_up() {
    let gains = GainSet::new(&[2.75], &[-1000.0, -1000.0], 1e-3);
    let mut cfg = short(SimConfig::nodelay(gains, 0, 4, Arc::new(Catalog::Zero)));
    cfg.t_final = 5.0;
    let tr = run_closed_loop(&cfg).unwrap();
    let t = tr.blow_up.expect("run must abort");
    assert!(t < 5.0);
    assert!(tr.t.last().unwrap() <= &t);
}

#[test]
fn nonzero_forcing_at_rest_is_flagged() {
    let cfg = short(SimConfig::nodelay(GainSet::reference_nodelay(), 0, 4, Arc::new(Catalog::Sin { sigma: 0.5 })));
    assert!(run_closed_loop(&cfg).unwrap().zero_state_violation.is_some());
    let cfg = short(SimConfig::nodelay(GainSet::reference_nodelay(), 0, 4, Arc::new(Catalog::Sat { sigma: 0.5 })));
    assert!(run_closed_loop(&cfg).unwrap().zero_state_violation.is_none());
}

#[test]
fn nodelay_loop_decays() {
    let mut cfg = short(SimConfig::nodelay(GainSet::reference_nodelay(), 0, 4, Arc::new(Catalog::Sat { sigma: 0.5 })));
    cfg.t_final = 4.0;
    let tr = run_closed_loop(&cfg).unwrap();
    assert!(tr.h1_w.last().unwrap() < &(0.05 * tr.h1_w[0]));
    assert!(tr.decay_rate().unwrap() > 2e-3);
}

use std::f64::consts::PI;
use std::sync::Arc;

use hpe2d_core::diagnostics::{budget_checks, LedgerObserver};
use hpe2d_core::profiles::{Component, HeatProfile, InitialProfile, Manufactured};
use hpe2d_core::solver::{run, run_with, step_count};
use hpe2d_core::{build_grid, ops, AdvectionMode, Forcing, Observer, RobinParams, SolverConfig, State, Stepper};

fn cfg(dt: f64, t_end: f64, robin: RobinParams) -> SolverConfig {
    SolverConfig { dt, t_end, robin, observe_every: 1, ..Default::default() }
}

#[test]
fn zero_state_stays_zero() {
    let g = build_grid(1.0, 16, 12).unwrap();
    let r = RobinParams::new(1.0, 2.0, 0.5).unwrap();
    let s = State::zeros(&g, &r);
    let out = run(&s, &Forcing::none(&g), &cfg(1e-3, 0.02, r), &mut []).unwrap();
    assert_eq!(out.u.max_abs() + out.v.max_abs() + out.theta.max_abs() + out.q.max_abs(), 0.0);
    assert_eq!(out.step, 20);
}

#[test]
fn v_eigenmode_decays_at_the_continuous_rate() {
    let h = 1.0;
    let r = RobinParams::zero();
    let lambda = PI * PI + (0.5 * PI / h).powi(2);
    let t_end = 0.05;
    let mut errs = Vec::new();
    for n in [16usize, 32, 64] {
        let g = build_grid(h, n, n).unwrap();
        let s = InitialProfile::Eigenmode { component: Component::V, m: 1, n: 0 }.build(&g, &r, 1.0).unwrap();
        let c = SolverConfig {
            advection: AdvectionMode::Off,
            coriolis: false,
            baroclinic: false,
            ..cfg(0.1 / (n * n) as f64, t_end, r)
        };
        let out = run(&s, &Forcing::none(&g), &c, &mut []).unwrap();
        let decay = (-lambda * out.t).exp();
        let err = out.v.values().iter().zip(s.v.values()).map(|(a, b)| (a - decay * b).abs()).fold(0.0, f64::max);
        errs.push(err);
    }
    assert!(errs[2] < 1e-4, "{errs:?}");
    assert!(errs[0] / errs[1] > 3.5 && errs[1] / errs[2] > 3.5, "{errs:?}");
}

#[test]
fn constraint_and_w_hold_every_step() {
    let g = build_grid(1.0, 20, 16).unwrap();
    let r = RobinParams::new(0.5, 0.5, 1.0).unwrap();
    let s = InitialProfile::Random { seed: 5 }.build(&g, &r, 2.0).unwrap();
    let f = Forcing::heat(HeatProfile::Cosine.build(&g, 1.0));
    let mut check = |st: &State, _: &Forcing| -> hpe2d_core::Result<()> {
        assert!(st.barotropic_residual() <= 1e-10);
        let w = st.w()?;
        let ux = ops::ddx(&st.u)?;
        let bound = 10.0 * g.dz().powi(2) * ux.max_abs();
        for i in 0..g.px() {
            assert_eq!(w.at(i, g.nz()), 0.0);
            assert!(w.at(i, 0).abs() <= bound.max(1e-300), "{} > {bound}", w.at(i, 0));
        }
        Ok(())
    };
    run(&s, &f, &cfg(5e-4, 0.05, r), &mut [&mut check]).unwrap();
}

#[test]
fn deterministic_and_restartable() {
    let g = build_grid(1.0, 16, 16).unwrap();
    let r = RobinParams::new(0.2, 0.4, 0.6).unwrap();
    let s = InitialProfile::Random { seed: 9 }.build(&g, &r, 1.0).unwrap();
    let f = Forcing::heat(HeatProfile::Surface.build(&g, 0.5));
    let c = cfg(1e-3, 0.04, r);
    let a = run(&s, &f, &c, &mut []).unwrap();
    let b = run(&s, &f, &c, &mut []).unwrap();
    assert_eq!(a, b);
    let stepper = Stepper::new(&g, &c).unwrap();
    let mid = run_with(&stepper, &s, &f, 17, &mut [], false).unwrap();
    let end = run_with(&stepper, &mid, &f, step_count(mid.t, c.t_end, c.dt).unwrap(), &mut [], false).unwrap();
    assert_eq!(end.u, a.u);
    assert_eq!(end.theta, a.theta);
}

fn budget_max(n: usize, profile: InitialProfile, heat: HeatProfile, couple: bool) -> f64 {
    let g = build_grid(1.0, n, n).unwrap();
    let r = RobinParams::new(0.5, 1.0, 0.25).unwrap();
    let s = profile.build(&g, &r, 1.0).unwrap();
    let f = Forcing::heat(heat.build(&g, 1.0));
    let mut c = cfg(0.25 / (n * n) as f64, 0.01, r);
    if !couple {
        c.advection = AdvectionMode::Off;
        c.coriolis = false;
        c.baroclinic = false;
    }
    let mut obs = LedgerObserver::new(r, 1.0, c.advection);
    run(&s, &f, &c, &mut [&mut obs as &mut dyn Observer]).unwrap();
    budget_checks(&obs.ledger).unwrap().iter().map(|b| b.relative).fold(0.0, f64::max)
}

#[test]
fn budget_residuals_converge() {
    for (p, heat, couple) in [
        (InitialProfile::Eigenmode { component: Component::Theta, m: 1, n: 1 }, HeatProfile::Zero, false),
        (InitialProfile::Shear, HeatProfile::Cosine, true),
    ] {
        let e: Vec<f64> = [16, 32].iter().map(|&n| budget_max(n, p.clone(), heat, couple)).collect();
        assert!(e[1] < e[0] / 3.2, "{p:?}: {e:?}");
    }
}

#[test]
fn manufactured_solution_converges() {
    let r = RobinParams::new(0.5, 1.0, 0.7).unwrap();
    let h = 1.0;
    let m = Manufactured::new(h, r);
    let t_end = 0.2;
    let mut errs = Vec::new();
    for n in [16usize, 32] {
        let g = build_grid(h, n, n).unwrap();
        let s = m.exact_state(&g, 0.0).unwrap();
        let f = Forcing::none(&g).with_sources(Arc::new(m));
        let out = run(&s, &f, &cfg(0.25 / n as f64, t_end, r), &mut []).unwrap();
        let ex = m.exact_state(&g, out.t).unwrap();
        let e = ops::norm_l2(&out.u.zip_map(&ex.u, |a, b| a - b).unwrap())
            + ops::norm_l2(&out.v.zip_map(&ex.v, |a, b| a - b).unwrap())
            + ops::norm_l2(&out.theta.zip_map(&ex.theta, |a, b| a - b).unwrap());
        errs.push(e);
    }
    let order = (errs[0] / errs[1]).log2();
    assert!((1.7..=2.3).contains(&order), "{errs:?} order {order}");
}

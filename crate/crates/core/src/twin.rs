//! Two solutions stepped in lockstep, their difference norms, and the
//! Gronwall envelope that bounds the difference.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ops;
use crate::profiles::{random_smooth, random_velocity};
use crate::solver::{step_count, Forcing, SolverConfig, State, Stepper};

/// Difference series of a twin run, sampled at the observation cadence.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TwinDiff {
    pub t: Vec<f64>,
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub dtheta: Vec<f64>,
    /// `|du|^2 + |dv|^2 + |dtheta|^2`.
    pub h_sq: Vec<f64>,
    /// `1 + |(u,v,theta)_x|^2 + |(u,v,theta)_z|^2_{L^inf_x(L^2_z)}` of twin 1.
    pub integrand: Vec<f64>,
    /// Energy of twin 1, the scale for roundoff comparisons.
    pub energy: Vec<f64>,
}

impl TwinDiff {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    fn record(&mut self, a: &State, b: &State) -> Result<()> {
        let du = ops::norm_l2(&a.u.zip_map(&b.u, |x, y| x - y)?);
        let dv = ops::norm_l2(&a.v.zip_map(&b.v, |x, y| x - y)?);
        let dt = ops::norm_l2(&a.theta.zip_map(&b.theta, |x, y| x - y)?);
        let gx = ops::dx_norm_sq(&a.u) + ops::dx_norm_sq(&a.v) + ops::dx_norm_sq(&a.theta);
        let gz = ops::dz_norm_aniso(&a.u).powi(2) + ops::dz_norm_aniso(&a.v).powi(2) + ops::dz_norm_aniso(&a.theta).powi(2);
        self.t.push(a.t);
        self.du.push(du);
        self.dv.push(dv);
        self.dtheta.push(dt);
        self.h_sq.push(du * du + dv * dv + dt * dt);
        self.integrand.push(1.0 + gx + gz);
        self.energy.push(a.energy());
        Ok(())
    }
}

/// Final states and the difference series of a twin run.
#[derive(Debug, Clone)]
pub struct TwinRun {
    pub diff: TwinDiff,
    pub final1: State,
    pub final2: State,
}

/// `ic + delta p`, where `p` is a seeded smooth random perturbation that
/// vanishes where the velocities do and has depth-free `u`.
pub fn perturbed(ic: &State, delta: f64, seed: u64) -> Result<State> {
    let g = *ic.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pu = random_velocity(&g, ic.u.bc(), &mut rng, delta, true);
    let pv = random_velocity(&g, ic.v.bc(), &mut rng, delta, false);
    let pt = random_smooth(&g, ic.theta.bc(), &mut rng, delta);
    let mut out = ic.clone();
    out.u.axpy(1.0, &pu);
    out.v.axpy(1.0, &pv);
    out.theta.axpy(1.0, &pt);
    out.history = None;
    Ok(out)
}

fn label(which: u8, e: Error) -> Error {
    Error::Twin { which, source: Box::new(e) }
}

/// Steps both initial states with one shared [`Stepper`] up to
/// `cfg.t_end`, recording at the initial time, every `cfg.observe_every`
/// steps and at the end.
pub fn run_twin(ic1: &State, ic2: &State, forcing: &Forcing, cfg: &SolverConfig) -> Result<TwinRun> {
    ic1.check_grid(ic2.grid())?;
    if ic1.t != ic2.t {
        return Err(Error::InvalidParameter("twins must start at the same time".into()));
    }
    let stepper = Stepper::new(ic1.grid(), cfg)?;
    let steps = step_count(ic1.t, cfg.t_end, cfg.dt)?;
    let every = cfg.observe_every as u64;
    let mut diff = TwinDiff::default();
    let (mut a, mut b) = (ic1.clone(), ic2.clone());
    diff.record(&a, &b)?;
    for s in 1..=steps {
        a = stepper.step(&a, forcing).map_err(|e| label(1, e))?;
        b = stepper.step(&b, forcing).map_err(|e| label(2, e))?;
        if s % every == 0 || s == steps {
            diff.record(&a, &b)?;
        }
    }
    Ok(TwinRun { diff, final1: a, final2: b })
}

/// `C |diff(0)|_H^2 exp(int_0^t integrand)` with trapezoid quadrature.
pub fn gronwall_envelope(diff: &TwinDiff, constant: f64) -> Vec<f64> {
    let Some(&h0) = diff.h_sq.first() else {
        return Vec::new();
    };
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(diff.len());
    out.push(constant * h0);
    for j in 1..diff.len() {
        acc += 0.5 * (diff.t[j] - diff.t[j - 1]) * (diff.integrand[j - 1] + diff.integrand[j]);
        out.push(constant * h0 * acc.exp());
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeVerdict {
    pub passed: bool,
    /// `min(envelope - h_sq)`.
    pub worst_margin: f64,
    /// `max h_sq / envelope` over samples with a positive envelope.
    pub worst_ratio: f64,
    pub first_violation: Option<f64>,
}

pub fn check_envelope(diff: &TwinDiff, envelope: &[f64]) -> Result<EnvelopeVerdict> {
    if envelope.len() != diff.len() {
        return Err(Error::Diagnostics(format!(
            "envelope has {} samples, difference series has {}",
            envelope.len(),
            diff.len()
        )));
    }
    let mut v = EnvelopeVerdict { passed: true, worst_margin: f64::INFINITY, worst_ratio: 0.0, first_violation: None };
    for ((&t, &h), &e) in diff.t.iter().zip(&diff.h_sq).zip(envelope) {
        v.worst_margin = v.worst_margin.min(e - h);
        if e > 0.0 {
            v.worst_ratio = v.worst_ratio.max(h / e);
        }
        if h > e && v.first_violation.is_none() {
            v.passed = false;
            v.first_violation = Some(t);
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, RobinParams};
    use crate::profiles::{HeatProfile, InitialProfile};

    fn setup() -> (State, Forcing, SolverConfig) {
        let g = build_grid(1.0, 12, 10).unwrap();
        let r = RobinParams::new(0.5, 0.5, 0.5).unwrap();
        let s = InitialProfile::Random { seed: 2 }.build(&g, &r, 1.0).unwrap();
        let f = Forcing::heat(HeatProfile::Cosine.build(&g, 1.0));
        let c = SolverConfig { dt: 2e-3, t_end: 0.1, robin: r, observe_every: 5, ..Default::default() };
        (s, f, c)
    }

    #[test]
    fn identical_twins_do_not_separate() {
        let (s, f, c) = setup();
        let run = run_twin(&s, &s, &f, &c).unwrap();
        assert!(run.diff.h_sq.iter().all(|&h| h == 0.0));
        assert_eq!(run.diff.len(), 11);
        let env = gronwall_envelope(&run.diff, 2.0);
        assert!(env.iter().all(|&e| e == 0.0));
        assert!(check_envelope(&run.diff, &env).unwrap().passed);
    }

    #[test]
    fn perturbed_matches_run_and_subtract() {
        let (s, f, c) = setup();
        let mut s2 = s.clone();
        s2.theta = s2.theta.map(|x| x * 1.001).with_bc(s.theta.bc());
        let run = run_twin(&s, &s2, &f, &c).unwrap();
        let a = crate::solver::run(&s, &f, &c, &mut []).unwrap();
        let b = crate::solver::run(&s2, &f, &c, &mut []).unwrap();
        let d = ops::norm_l2(&a.theta.zip_map(&b.theta, |x, y| x - y).unwrap());
        assert_eq!(*run.diff.dtheta.last().unwrap(), d);
    }

    #[test]
    fn constant_integrand_envelope() {
        let t: Vec<f64> = (0..=10).map(|j| j as f64 * 0.1).collect();
        let n = t.len();
        let diff = TwinDiff {
            t: t.clone(),
            du: vec![0.0; n],
            dv: vec![0.0; n],
            dtheta: vec![0.0; n],
            h_sq: vec![2.0; n],
            integrand: vec![3.0; n],
            energy: vec![1.0; n],
        };
        let env = gronwall_envelope(&diff, 1.5);
        for (e, t) in env.iter().zip(&t) {
            assert!((e - 1.5 * 2.0 * (3.0 * t).exp()).abs() < 1e-12 * e);
        }
        let shrunk: Vec<f64> = env.iter().map(|e| e * 1e-6).collect();
        let v = check_envelope(&diff, &shrunk).unwrap();
        assert!(!v.passed);
        assert_eq!(v.first_violation, Some(0.0));
        assert!(check_envelope(&diff, &env[1..]).is_err());
    }
}

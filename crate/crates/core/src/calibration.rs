//! Frozen constants for the one-sided estimates and the fixed suites they
//! were calibrated on. Each constant is 1.5 times the largest ratio observed
//! on its suite; [`calibrate`] recomputes those ratios.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diagnostics::{regularity_inequality_check, EnergyLedger, Inequality, LedgerObserver};
use crate::error::Result;
use crate::field::BcClass;
use crate::grid::{build_grid, RobinParams};
use crate::ops;
use crate::profiles::{random_smooth, random_velocity, Component, HeatProfile, InitialProfile};
use crate::solver::{run, AdvectionMode, Forcing, Observer, SolverConfig, State};
use crate::twin::{perturbed, run_twin};

pub const SAFETY: f64 = 1.5;

/// Trilinear estimate and its two corollaries.
pub const K_TRI: f64 = 0.709;

/// Gronwall envelope.
pub const C_ENVELOPE: f64 = 1.5;

/// `int |f_z|^2_{L^inf_x(L^2_z)} <= C int |f_z| |f_xz|` (plus `int |f_z|^2`
/// for fields with Neumann walls).
pub const C_BRIDGE: f64 = 1.06;

/// Riccati horizon integrand.
pub const C_RICCATI: f64 = 4.07e-3;

pub fn c_regularity(which: Inequality) -> f64 {
    match which {
        Inequality::Uz => 0.228,
        Inequality::Ux => 0.0599,
        Inequality::Vx => 0.452,
        Inequality::Tx => 0.963,
        Inequality::Vz => 1.08,
        Inequality::VzB => 1.08,
        Inequality::Tz => 0.736,
    }
}

/// Number of random triples per resolution in the trilinear suite.
pub const TRI_SAMPLES: usize = 1000;

/// `|trilinear| / tri_bound` for seeded random smooth triples.
pub fn tri_ratios(n: usize, samples: usize, seed0: u64) -> Result<Vec<f64>> {
    let g = build_grid(1.0, n, n)?;
    (0..samples as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed0 + j);
            let a = random_smooth(&g, BcClass::Free, &mut rng, 1.0);
            let b = random_smooth(&g, BcClass::Free, &mut rng, 1.0);
            let c = random_smooth(&g, BcClass::Free, &mut rng, 1.0);
            let s = ops::BoundSample { lhs: ops::trilinear(&a, &b, &c)?.abs(), rhs: ops::tri_bound(&a, &b, &c)? };
            Ok(s.ratio())
        })
        .collect()
}

/// Ratios of the `u u_x` and `w u_z` corollary bounds for random
/// depth-free velocities `u` and test functions `phi`.
pub fn corollary_ratios(n: usize, samples: usize, seed0: u64) -> Result<Vec<[f64; 2]>> {
    let g = build_grid(1.0, n, n)?;
    let bc = BcClass::U { alpha: 0.5 };
    (0..samples as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed0 + j);
            let u = random_velocity(&g, bc, &mut rng, 1.0, true);
            let phi = random_velocity(&g, bc, &mut rng, 1.0, false);
            Ok([ops::advection_bound_uux(&u, &phi)?.ratio(), ops::advection_bound_wuz(&u, &phi)?.ratio()])
        })
        .collect()
}

/// One member of the regression suite.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRun {
    pub name: &'static str,
    pub n: usize,
    pub robin: RobinParams,
    pub profile: InitialProfile,
    pub amplitude: f64,
    pub heat: HeatProfile,
    pub heat_amplitude: f64,
    pub dt: f64,
    pub t_end: f64,
}

impl SuiteRun {
    pub fn initial(&self) -> Result<State> {
        let g = build_grid(1.0, self.n, self.n)?;
        self.profile.build(&g, &self.robin, self.amplitude)
    }

    pub fn forcing(&self) -> Result<Forcing> {
        let g = build_grid(1.0, self.n, self.n)?;
        Ok(Forcing::heat(self.heat.build(&g, self.heat_amplitude)))
    }

    pub fn config(&self) -> SolverConfig {
        SolverConfig { dt: self.dt, t_end: self.t_end, robin: self.robin, observe_every: 1, ..Default::default() }
    }
}

/// Smooth-data runs shared by the calibration and the regression checks.
pub fn regression_suite() -> Vec<SuiteRun> {
    let r1 = RobinParams { alpha1: 0.5, alpha2: 1.0, alpha3: 0.25 };
    let r2 = RobinParams { alpha1: 1.0, alpha2: 0.5, alpha3: 2.0 };
    let r0 = RobinParams::zero();
    let base = SuiteRun {
        name: "shear",
        n: 24,
        robin: r1,
        profile: InitialProfile::Shear,
        amplitude: 1.0,
        heat: HeatProfile::Cosine,
        heat_amplitude: 1.0,
        dt: 1e-3,
        t_end: 0.5,
    };
    vec![
        base.clone(),
        SuiteRun { name: "random-1", profile: InitialProfile::Random { seed: 1 }, ..base.clone() },
        SuiteRun {
            name: "random-2",
            robin: r2,
            profile: InitialProfile::Random { seed: 2 },
            amplitude: 3.0,
            heat: HeatProfile::Surface,
            heat_amplitude: 2.0,
            ..base.clone()
        },
        SuiteRun {
            name: "eigen-v",
            robin: r0,
            profile: InitialProfile::Eigenmode { component: Component::V, m: 1, n: 0 },
            heat: HeatProfile::Zero,
            ..base.clone()
        },
        SuiteRun {
            name: "random-3",
            robin: r0,
            profile: InitialProfile::Random { seed: 3 },
            amplitude: 0.5,
            heat: HeatProfile::Zero,
            ..base
        },
    ]
}

/// Runs `r` with a ledger observed every step.
pub fn run_ledger(r: &SuiteRun) -> Result<(State, EnergyLedger)> {
    let mut obs = LedgerObserver::new(r.robin, 1.0, AdvectionMode::SkewSymmetric);
    let fin = run(&r.initial()?, &r.forcing()?, &r.config(), &mut [&mut obs as &mut dyn Observer])?;
    Ok((fin, obs.ledger))
}

/// Ledgers of the whole regression suite, in suite order.
pub fn suite_ledgers() -> Result<Vec<(SuiteRun, State, EnergyLedger)>> {
    regression_suite()
        .into_par_iter()
        .map(|r| {
            let (s, l) = run_ledger(&r)?;
            Ok((r, s, l))
        })
        .collect()
}

/// Perturbation sizes of the envelope suite.
pub const ENVELOPE_DELTAS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Max of `h_sq(t) / (h_sq(0) exp int g)` over twin runs around each suite
/// member.
pub fn envelope_ratio(suite: &[SuiteRun]) -> Result<f64> {
    let ratios: Vec<f64> = suite
        .par_iter()
        .flat_map(|r| ENVELOPE_DELTAS.par_iter().map(move |&d| (r, d)))
        .map(|(r, d)| {
            let ic = r.initial()?;
            let ic2 = perturbed(&ic, d, 99)?;
            let tw = run_twin(&ic, &ic2, &r.forcing()?, &SolverConfig { observe_every: 5, ..r.config() })?;
            let env = crate::twin::gronwall_envelope(&tw.diff, 1.0);
            Ok(tw.diff.h_sq.iter().zip(&env).map(|(h, e)| h / e).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

/// Max of the Agmon bridge ratio over `ledgers`, per field.
pub fn bridge_ratio(ledgers: &[EnergyLedger]) -> Result<f64> {
    let mut m = 0.0f64;
    for l in ledgers {
        let t_end = l.last().map_or(0.0, |r| r.t);
        let c = crate::diagnostics::uniqueness_certificate(l, t_end, f64::INFINITY, 1.0)?;
        for f in &c.fields {
            m = m.max(ops::BoundSample { lhs: f.aniso_integral, rhs: f.bridge.agmon_rhs }.ratio());
        }
    }
    Ok(m)
}

/// Max over observation intervals of `y' / (y^2 (1 + |u_z|^2 + |v|^2 +
/// |theta_x|^2))` with `y = |u_x|^2 + 1`, the differential inequality the
/// Riccati horizon integrates.
pub fn riccati_ratio(ledgers: &[EnergyLedger]) -> f64 {
    let mut m = 0.0f64;
    for l in ledgers {
        for w in l.records().windows(2) {
            let y = |r: &crate::diagnostics::LedgerRecord| r.u_x * r.u_x + 1.0;
            let g = |r: &crate::diagnostics::LedgerRecord| y(r).powi(2) * (1.0 + r.u_z * r.u_z + r.v_sq + r.theta_x * r.theta_x);
            let lhs = (y(&w[1]) - y(&w[0])) / (w[1].t - w[0].t);
            m = m.max(lhs / (0.5 * (g(&w[0]) + g(&w[1]))));
        }
    }
    m
}

/// Observed maxima on the calibration suites.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub tri_64: f64,
    pub tri_128: f64,
    pub uux: f64,
    pub wuz: f64,
    pub envelope: f64,
    pub bridge: f64,
    pub riccati: f64,
    pub regularity: Vec<(Inequality, f64)>,
}

impl Calibration {
    pub fn k_tri(&self) -> f64 {
        SAFETY * self.tri_64.max(self.tri_128).max(self.uux).max(self.wuz)
    }

    pub fn report(&self) -> String {
        let mut s = format!(
            "trilinear max ratio: n=64 {:.6e}, n=128 {:.6e}\ncorollaries: uux {:.6e}, wuz {:.6e}\nK = {:.6e} (frozen {:.6e})\n\
             envelope max ratio {:.6e}, C = {:.6e} (frozen {:.6e})\nbridge max ratio {:.6e}, C = {:.6e} (frozen {:.6e})\n\
             riccati max ratio {:.6e}, C = {:.6e} (frozen {:.6e})\n",
            self.tri_64,
            self.tri_128,
            self.uux,
            self.wuz,
            self.k_tri(),
            K_TRI,
            self.envelope,
            SAFETY * self.envelope,
            C_ENVELOPE,
            self.bridge,
            SAFETY * self.bridge,
            C_BRIDGE,
            self.riccati,
            SAFETY * self.riccati,
            C_RICCATI
        );
        for (w, r) in &self.regularity {
            s += &format!(
                "regularity {}: max ratio {:.6e}, C = {:.6e} (frozen {:.6e})\n",
                w.name(),
                r,
                SAFETY * r,
                c_regularity(*w)
            );
        }
        s
    }
}

pub fn regularity_ratios(ledgers: &[EnergyLedger]) -> Result<Vec<(Inequality, f64)>> {
    Inequality::ALL
        .iter()
        .map(|&w| {
            let mut m = 0.0f64;
            for l in ledgers {
                m = m.max(regularity_inequality_check(l, w, 1.0)?.max_ratio);
            }
            Ok((w, m))
        })
        .collect()
}

/// Recomputes every calibrated ratio. `tri_samples` below [`TRI_SAMPLES`]
/// gives a quick partial check.
pub fn calibrate(tri_samples: usize) -> Result<Calibration> {
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    let t64 = tri_ratios(64, tri_samples, 0)?;
    let t128 = tri_ratios(128, tri_samples, 0)?;
    let cor = corollary_ratios(64, tri_samples, 10_000)?;
    let suite = suite_ledgers()?;
    let ledgers: Vec<EnergyLedger> = suite.iter().map(|(_, _, l)| l.clone()).collect();
    let runs: Vec<SuiteRun> = suite.into_iter().map(|(r, _, _)| r).collect();
    Ok(Calibration {
        tri_64: max(&t64),
        tri_128: max(&t128),
        uux: max(&cor.iter().map(|c| c[0]).collect::<Vec<_>>()),
        wuz: max(&cor.iter().map(|c| c[1]).collect::<Vec<_>>()),
        envelope: envelope_ratio(&runs)?,
        bridge: bridge_ratio(&ledgers)?,
        riccati: riccati_ratio(&ledgers),
        regularity: regularity_ratios(&ledgers)?,
    })
}

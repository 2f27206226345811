//! Time integration of the eliminated system for `(u, v, theta)`.
//!
//! One step is IMEX: advection, rotation, the baroclinic term and sources are
//! explicit (Adams-Bashforth 2 after a forward-Euler start), diffusion is
//! theta-weighted implicit, and the surface pressure `q` is the Lagrange
//! multiplier that keeps every column of `u` depth-free. The multiplier is
//! solved jointly with the implicit diffusion through a Schur complement, so
//! the constraint holds at the new time level to roundoff.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::field::{BcClass, ProfileField, ScalarField};
use crate::grid::{Grid, RobinParams};
use crate::ops;

/// Explicit right-hand sides stored for the Adams-Bashforth extrapolation.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub du: Vec<f64>,
    pub dv: Vec<f64>,
    pub dtheta: Vec<f64>,
    /// Step size the tendencies were paired with.
    pub dt: f64,
}

/// Prognostic fields at one instant. `w` and `p` are diagnosed on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: ScalarField,
    pub v: ScalarField,
    pub theta: ScalarField,
    pub q: ProfileField,
    pub t: f64,
    pub step: u64,
    pub history: Option<History>,
}

impl State {
    pub fn zeros(grid: &Grid, robin: &RobinParams) -> Self {
        Self {
            u: ScalarField::zeros(grid, BcClass::U { alpha: robin.alpha1 }),
            v: ScalarField::zeros(grid, BcClass::V { alpha: robin.alpha2 }),
            theta: ScalarField::zeros(grid, BcClass::Theta { alpha: robin.alpha3 }),
            q: ProfileField::zeros(grid),
            t: 0.0,
            step: 0,
            history: None,
        }
    }

    /// Assembles a state from raw fields, tagging them with the boundary
    /// classes implied by `robin` and enforcing the Dirichlet data of `u`
    /// and `v`.
    pub fn new(u: ScalarField, v: ScalarField, theta: ScalarField, robin: &RobinParams) -> Result<Self> {
        u.check_same_grid(&v)?;
        u.check_same_grid(&theta)?;
        let grid = *u.grid();
        let mut u = u.with_bc(BcClass::U { alpha: robin.alpha1 });
        let mut v = v.with_bc(BcClass::V { alpha: robin.alpha2 });
        u.enforce_dirichlet();
        v.enforce_dirichlet();
        Ok(Self {
            u,
            v,
            theta: theta.with_bc(BcClass::Theta { alpha: robin.alpha3 }),
            q: ProfileField::zeros(&grid),
            t: 0.0,
            step: 0,
            history: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.u.grid()
    }

    pub fn robin(&self) -> RobinParams {
        RobinParams {
            alpha1: self.u.bc().alpha().unwrap_or(0.0),
            alpha2: self.v.bc().alpha().unwrap_or(0.0),
            alpha3: self.theta.bc().alpha().unwrap_or(0.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite() && self.theta.is_finite() && self.q.is_finite()
    }

    /// `max_x |depth_average(u)|`.
    pub fn barotropic_residual(&self) -> f64 {
        ops::depth_average(&self.u).max_abs()
    }

    pub fn w(&self) -> Result<ScalarField> {
        ops::reconstruct_w(&self.u)
    }

    pub fn p(&self) -> Result<ScalarField> {
        ops::reconstruct_p(&self.q, &self.theta)
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if self.grid() != grid {
            return Err(Error::GridMismatch(format!(
                "state is {}x{} (h={}), run expects {}x{} (h={})",
                self.grid().nx(),
                self.grid().nz(),
                self.grid().h(),
                grid.nx(),
                grid.nz(),
                grid.h()
            )));
        }
        Ok(())
    }

    /// `|u|^2 + |v|^2 + |theta|^2`.
    pub fn energy(&self) -> f64 {
        let (a, b, c) = (ops::norm_l2(&self.u), ops::norm_l2(&self.v), ops::norm_l2(&self.theta));
        a * a + b * b + c * c
    }
}

/// Time-dependent source terms added to the `u`, `v` and `theta` equations,
/// used for manufactured-solution verification.
pub trait SourceTerms: Send + Sync {
    fn source(&self, t: f64, x: f64, z: f64) -> [f64; 3];
}

#[derive(Clone)]
pub struct Forcing {
    /// Heat source, time independent.
    pub heat: ScalarField,
    pub sources: Option<Arc<dyn SourceTerms>>,
}

impl fmt::Debug for Forcing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forcing")
            .field("heat_norm", &ops::norm_l2(&self.heat))
            .field("sources", &self.sources.is_some())
            .finish()
    }
}

impl Forcing {
    pub fn none(grid: &Grid) -> Self {
        Self { heat: ScalarField::zeros(grid, BcClass::Free), sources: None }
    }

    pub fn heat(heat: ScalarField) -> Self {
        Self { heat, sources: None }
    }

    pub fn with_sources(mut self, s: Arc<dyn SourceTerms>) -> Self {
        self.sources = Some(s);
        self
    }

    pub fn is_finite(&self) -> bool {
        self.heat.is_finite()
    }

    pub fn same_heat(&self, other: &Forcing) -> bool {
        self.heat.grid() == other.heat.grid() && self.heat.values() == other.heat.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvectionMode {
    /// `1/2 [(a s)_x + a s_x + (w s)_z + w s_z]`; does no work on `s`.
    SkewSymmetric,
    /// `a s_x + w s_z`.
    Advective,
    /// Advection switched off.
    Off,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub robin: RobinParams,
    /// Implicitness of diffusion, 1/2 (Crank-Nicolson) to 1 (backward Euler).
    pub theta_scheme: f64,
    pub advection: AdvectionMode,
    /// `+v` in the `u` equation and `-u` in the `v` equation.
    pub coriolis: bool,
    /// `int_z^0 theta_x` in the `u` equation.
    pub baroclinic: bool,
    /// Barotropic residual tolerance, max norm.
    pub tol_constraint: f64,
    /// Observer cadence in steps.
    pub observe_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 0.1,
            robin: RobinParams::zero(),
            theta_scheme: 0.5,
            advection: AdvectionMode::SkewSymmetric,
            coriolis: true,
            baroclinic: true,
            tol_constraint: 1e-10,
            observe_every: 10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.t_end.is_finite() {
            return Err(Error::InvalidParameter("t_end must be finite".into()));
        }
        if !(0.5..=1.0).contains(&self.theta_scheme) {
            return Err(Error::InvalidParameter(format!(
                "theta_scheme must lie in [0.5, 1], got {}",
                self.theta_scheme
            )));
        }
        if !(self.tol_constraint.is_finite() && self.tol_constraint > 0.0) {
            return Err(Error::InvalidParameter("tol_constraint must be positive".into()));
        }
        if self.observe_every == 0 {
            return Err(Error::InvalidParameter("observe_every must be at least 1".into()));
        }
        self.robin.validate()
    }

    /// Advisory stability notes; never fatal.
    pub fn advisories(&self, grid: &Grid) -> Vec<String> {
        let mut notes = Vec::new();
        let h2 = grid.dx().min(grid.dz()).powi(2);
        const SAFETY: f64 = 4.0;
        if self.advection != AdvectionMode::Off && self.dt > SAFETY * h2 {
            notes.push(format!(
                "dt = {:.3e} exceeds {SAFETY} min(dx,dz)^2 = {:.3e}; explicit advection may need a smaller step",
                self.dt,
                SAFETY * h2
            ));
        }
        notes
    }
}

/// Explicit right-hand sides for the three prognostic equations.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub u: ScalarField,
    pub v: ScalarField,
    pub theta: ScalarField,
}

/// Advection of `s` by `(u, w)` with summation-by-parts differences.
pub fn advection(u: &ScalarField, w: &ScalarField, s: &ScalarField, mode: AdvectionMode) -> Result<ScalarField> {
    u.check_same_grid(s)?;
    u.check_same_grid(w)?;
    let grid = *u.grid();
    let (uv, wv, sv) = (u.values(), w.values(), s.values());
    let sx = ops::sbp_dx(s);
    let sz = ops::sbp_dz(s);
    let mut out = ScalarField::zeros(&grid, BcClass::Free);
    match mode {
        AdvectionMode::Off => {}
        AdvectionMode::Advective => {
            let o = out.values_mut();
            for n in 0..grid.len() {
                o[n] = uv[n] * sx.values()[n] + wv[n] * sz.values()[n];
            }
        }
        AdvectionMode::SkewSymmetric => {
            let us = ScalarField::from_values(&grid, BcClass::Free, uv.iter().zip(sv).map(|(a, b)| a * b).collect())?;
            let ws = ScalarField::from_values(&grid, BcClass::Free, wv.iter().zip(sv).map(|(a, b)| a * b).collect())?;
            let usx = ops::sbp_dx(&us);
            let wsz = ops::sbp_dz(&ws);
            let o = out.values_mut();
            for n in 0..grid.len() {
                o[n] = 0.5
                    * (usx.values()[n] + uv[n] * sx.values()[n] + wsz.values()[n] + wv[n] * sz.values()[n]);
            }
        }
    }
    Ok(out)
}

/// Explicit tendencies at `state.t`, excluding diffusion and the surface
/// pressure gradient.
pub fn explicit_tendency(state: &State, forcing: &Forcing, cfg: &SolverConfig) -> Result<Tendency> {
    let grid = *state.grid();
    let w = state.w()?;
    let mode = cfg.advection;
    let mut tu = advection(&state.u, &w, &state.u, mode)?.map(|a| -a);
    let mut tv = advection(&state.u, &w, &state.v, mode)?.map(|a| -a);
    let mut tt = advection(&state.u, &w, &state.theta, mode)?.map(|a| -a);
    if cfg.coriolis {
        tu.axpy(1.0, &state.v);
        tv.axpy(-1.0, &state.u);
    }
    if cfg.baroclinic {
        let b = ops::vertical_integral_from_z(&ops::ddx(&state.theta)?);
        tu.axpy(-1.0, &b);
    }
    forcing.heat.check_same_grid(&state.theta)?;
    tt.axpy(1.0, &forcing.heat);
    if let Some(src) = &forcing.sources {
        let (ou, ov, ot) = (tu.values_mut(), tv.values_mut(), tt.values_mut());
        for k in 0..grid.pz() {
            let z = grid.z(k);
            for i in 0..grid.px() {
                let n = grid.idx(i, k);
                let [a, b, c] = src.source(state.t, grid.x(i), z);
                ou[n] += a;
                ov[n] += b;
                ot[n] += c;
            }
        }
    }
    let mut tu = tu.with_bc(state.u.bc());
    let mut tv = tv.with_bc(state.v.bc());
    tu.enforce_dirichlet();
    tv.enforce_dirichlet();
    Ok(Tendency { u: tu.with_bc(BcClass::Free), v: tv.with_bc(BcClass::Free), theta: tt })
}

/// Explicit right-hand sides including `-q_x` from the state's surface
/// pressure (diffusion is handled implicitly by [`Stepper`]).
pub fn tendency(state: &State, forcing: &Forcing, cfg: &SolverConfig) -> Result<Tendency> {
    let mut t = explicit_tendency(state, forcing, cfg)?;
    let grid = *state.grid();
    let qx = profile_ddx(&state.q);
    let o = t.u.values_mut();
    for k in 1..grid.pz() {
        for i in 1..grid.nx() {
            o[grid.idx(i, k)] -= qx[i];
        }
    }
    for (name, f) in [("u", &t.u), ("v", &t.v), ("theta", &t.theta)] {
        if !f.is_finite() {
            return Err(Error::NonFinite { field: format!("{name} tendency"), step: state.step as usize });
        }
    }
    Ok(t)
}

fn profile_ddx(q: &ProfileField) -> Vec<f64> {
    let g = *q.grid();
    let v = q.values();
    let n = g.nx();
    let dx = g.dx();
    let mut out = vec![0.0; g.px()];
    for i in 1..n {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
    }
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
    out[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * dx);
    out
}

/// Surface pressure that removes the depth average of a provisional `u`
/// tendency: `q_x = depth_average(tendency)`, integrated with `q(0) = 0`.
pub fn solve_surface_pressure(state: &State, provisional: &ScalarField) -> Result<ProfileField> {
    provisional.check_same_grid(&state.u)?;
    let grid = *state.grid();
    let slope = ops::depth_average(provisional);
    Ok(ops::integrate_profile(&grid, slope.values()))
}

/// Applies `-q_x` to a provisional tendency, on every node that is not a
/// velocity Dirichlet node.
pub fn apply_surface_pressure(provisional: &ScalarField, q: &ProfileField) -> Result<ScalarField> {
    let grid = *provisional.grid();
    if q.grid() != &grid {
        return Err(Error::GridMismatch("pressure profile grid".into()));
    }
    let qx = profile_ddx(q);
    let mut out = provisional.clone();
    for k in 0..grid.pz() {
        for i in 0..grid.px() {
            out[(i, k)] -= qx[i];
        }
    }
    Ok(out)
}

/// `I - c L` for one boundary class, factored once.
struct ImplicitOperator {
    lu: BandLu,
    /// Node flat index to matrix row.
    perm: Vec<usize>,
    velocity: bool,
}

impl ImplicitOperator {
    fn new(grid: &Grid, bc: BcClass, c: f64) -> Result<Self> {
        let (px, pz) = (grid.px(), grid.pz());
        let x_fast = px <= pz;
        let band = if x_fast { px } else { pz };
        let perm: Vec<usize> = (0..grid.len())
            .map(|n| {
                let (i, k) = (n % px, n / px);
                if x_fast {
                    n
                } else {
                    i * pz + k
                }
            })
            .collect();
        let velocity = bc.is_velocity();
        let alpha = bc.alpha().unwrap_or(0.0);
        let (nx, nz) = (grid.nx(), grid.nz());
        let (dx2, dz, dz2) = (grid.dx().powi(2), grid.dz(), grid.dz().powi(2));
        let mut m = BandMatrix::zeros(grid.len(), band, band);
        let is_dirichlet = |i: usize, k: usize| velocity && (i == 0 || i == nx || k == 0);
        for k in 0..pz {
            for i in 0..px {
                let r = perm[grid.idx(i, k)];
                if is_dirichlet(i, k) {
                    m.set(r, r, 1.0);
                    continue;
                }
                let mut diag = 1.0;
                let push = |i2: usize, k2: usize, coef: f64, m: &mut BandMatrix| {
                    if !is_dirichlet(i2, k2) {
                        m.add(r, perm[grid.idx(i2, k2)], -c * coef);
                    }
                };
                // x part
                if i == 0 {
                    diag += c * 2.0 / dx2;
                    push(1, k, 2.0 / dx2, &mut m);
                } else if i == nx {
                    diag += c * 2.0 / dx2;
                    push(nx - 1, k, 2.0 / dx2, &mut m);
                } else {
                    diag += c * 2.0 / dx2;
                    push(i - 1, k, 1.0 / dx2, &mut m);
                    push(i + 1, k, 1.0 / dx2, &mut m);
                }
                // z part
                if k == nz {
                    diag += c * (2.0 + 2.0 * dz * alpha) / dz2;
                    push(i, nz - 1, 2.0 / dz2, &mut m);
                } else if k == 0 {
                    diag += c * 2.0 / dz2;
                    push(i, 1, 2.0 / dz2, &mut m);
                } else {
                    diag += c * 2.0 / dz2;
                    push(i, k - 1, 1.0 / dz2, &mut m);
                    push(i, k + 1, 1.0 / dz2, &mut m);
                }
                m.add(r, r, diag);
            }
        }
        Ok(Self { lu: m.factor()?, perm, velocity })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; rhs.len()];
        for (n, &r) in self.perm.iter().enumerate() {
            b[r] = rhs[n];
        }
        self.lu.solve_in_place(&mut b);
        self.perm.iter().map(|&r| b[r]).collect()
    }
}

/// Reusable integrator for one `(grid, dt, robin, theta_scheme)`.
pub struct Stepper {
    grid: Grid,
    cfg: SolverConfig,
    op_u: ImplicitOperator,
    op_v: ImplicitOperator,
    op_t: ImplicitOperator,
    /// `A_u^{-1} G_j` for each interior column `j`, where `G_j` is the unit
    /// pressure gradient on column `j`.
    pressure_basis: Vec<Vec<f64>>,
    schur: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl fmt::Debug for Stepper {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Stepper").field("grid", &self.grid).field("cfg", &self.cfg).finish()
    }
}

impl Stepper {
    pub fn new(grid: &Grid, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.theta_scheme * cfg.dt;
        let r = cfg.robin;
        let op_u = ImplicitOperator::new(grid, BcClass::U { alpha: r.alpha1 }, c)?;
        let op_v = ImplicitOperator::new(grid, BcClass::V { alpha: r.alpha2 }, c)?;
        let op_t = ImplicitOperator::new(grid, BcClass::Theta { alpha: r.alpha3 }, c)?;
        debug_assert!(op_u.velocity && op_v.velocity && !op_t.velocity);

        let cols = grid.nx() - 1;
        let mut basis = Vec::with_capacity(cols);
        let mut s = DMatrix::<f64>::zeros(cols, cols);
        for j in 0..cols {
            let mut g = vec![0.0; grid.len()];
            for k in 1..grid.pz() {
                g[grid.idx(j + 1, k)] = 1.0;
            }
            let z = op_u.solve(&g);
            for i in 0..cols {
                s[(i, j)] = (0..grid.pz()).map(|k| grid.wz(k) * z[grid.idx(i + 1, k)]).sum();
            }
            basis.push(z);
        }
        let schur = s.lu();
        if !schur.is_invertible() {
            return Err(Error::Solve("singular surface-pressure system".into()));
        }
        Ok(Self { grid: *grid, cfg: cfg.clone(), op_u, op_v, op_t, pressure_basis: basis, schur })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    /// Advances `state` by one step of size `cfg.dt`.
    pub fn step(&self, state: &State, forcing: &Forcing) -> Result<State> {
        state.check_grid(&self.grid)?;
        let grid = self.grid;
        let dt = self.cfg.dt;
        let th = self.cfg.theta_scheme;
        let step_index = state.step as usize;

        let e = explicit_tendency(state, forcing, &self.cfg)?;
        for (name, f) in [("u", &e.u), ("v", &e.v), ("theta", &e.theta)] {
            if !f.is_finite() {
                return Err(Error::NonFinite { field: name.into(), step: step_index });
            }
        }
        let prev = state.history.as_ref().filter(|h| h.dt == dt && h.du.len() == grid.len());
        let extrap = |now: &[f64], before: Option<&Vec<f64>>| -> Vec<f64> {
            match before {
                Some(b) => now.iter().zip(b).map(|(a, b)| 1.5 * a - 0.5 * b).collect(),
                None => now.to_vec(),
            }
        };
        let eu = extrap(e.u.values(), prev.map(|h| &h.du));
        let ev = extrap(e.v.values(), prev.map(|h| &h.dv));
        let et = extrap(e.theta.values(), prev.map(|h| &h.dtheta));

        let rhs = |f: &ScalarField, ex: &[f64]| -> Result<Vec<f64>> {
            let lap = ops::laplacian(f)?;
            let mut r: Vec<f64> = f
                .values()
                .iter()
                .zip(lap.values())
                .zip(ex)
                .map(|((a, l), x)| a + dt * ((1.0 - th) * l + x))
                .collect();
            if f.bc().is_velocity() {
                for k in 0..grid.pz() {
                    r[grid.idx(0, k)] = 0.0;
                    r[grid.idx(grid.nx(), k)] = 0.0;
                }
                for i in 0..grid.px() {
                    r[grid.idx(i, 0)] = 0.0;
                }
            }
            Ok(r)
        };

        let mut u_new = self.op_u.solve(&rhs(&state.u, &eu)?);
        let v_new = self.op_v.solve(&rhs(&state.v, &ev)?);
        let t_new = self.op_t.solve(&rhs(&state.theta, &et)?);

        // surface pressure: enforce the column integral of u at n+1
        let cols = grid.nx() - 1;
        let c = DVector::from_iterator(
            cols,
            (0..cols).map(|i| (0..grid.pz()).map(|k| grid.wz(k) * u_new[grid.idx(i + 1, k)]).sum::<f64>()),
        );
        let g = self
            .schur
            .solve(&c)
            .ok_or_else(|| Error::Solve("surface-pressure solve failed".into()))?;
        for (j, zj) in self.pressure_basis.iter().enumerate() {
            let gj = g[j];
            if gj != 0.0 {
                for (a, b) in u_new.iter_mut().zip(zj) {
                    *a -= gj * b;
                }
            }
        }
        let mut slope = vec![0.0; grid.px()];
        for j in 0..cols {
            slope[j + 1] = g[j] / dt;
        }
        slope[0] = 2.0 * slope[1] - slope[2];
        slope[grid.nx()] = 2.0 * slope[grid.nx() - 1] - slope[grid.nx() - 2];
        let q = ops::integrate_profile(&grid, &slope);

        let next = State {
            u: ScalarField::from_values(&grid, state.u.bc(), u_new)?,
            v: ScalarField::from_values(&grid, state.v.bc(), v_new)?,
            theta: ScalarField::from_values(&grid, state.theta.bc(), t_new)?,
            q,
            t: state.t + dt,
            step: state.step + 1,
            history: Some(History {
                du: e.u.into_values(),
                dv: e.v.into_values(),
                dtheta: e.theta.into_values(),
                dt,
            }),
        };
        for (name, ok) in [
            ("u", next.u.is_finite()),
            ("v", next.v.is_finite()),
            ("theta", next.theta.is_finite()),
            ("q", next.q.is_finite()),
        ] {
            if !ok {
                return Err(Error::NonFinite { field: name.into(), step: step_index + 1 });
            }
        }
        let resid = next.barotropic_residual();
        if resid > self.cfg.tol_constraint {
            return Err(Error::Solve(format!(
                "barotropic residual {resid:.3e} exceeds tolerance {:.1e} at step {}",
                self.cfg.tol_constraint,
                step_index + 1
            )));
        }
        Ok(next)
    }
}

/// Free-function form of a single step; builds the factorizations each call.
pub fn step(state: &State, forcing: &Forcing, cfg: &SolverConfig) -> Result<State> {
    Stepper::new(state.grid(), cfg)?.step(state, forcing)
}

/// Read-only callback invoked along a run.
pub trait Observer {
    fn observe(&mut self, state: &State, forcing: &Forcing) -> Result<()>;
}

impl<F: FnMut(&State, &Forcing) -> Result<()>> Observer for F {
    fn observe(&mut self, state: &State, forcing: &Forcing) -> Result<()> {
        self(state, forcing)
    }
}

/// Number of steps from `t0` to `t_end` with step `dt`.
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> Result<u64> {
    if t_end < t0 - 1e-12 * dt.max(t0.abs()) {
        return Err(Error::InvalidParameter(format!("t_end {t_end} precedes initial time {t0}")));
    }
    Ok(((t_end - t0) / dt).round().max(0.0) as u64)
}

/// Steps from `initial.t` to `cfg.t_end`, calling observers on the initial
/// state, every `cfg.observe_every` steps, and on the final state.
pub fn run(initial: &State, forcing: &Forcing, cfg: &SolverConfig, observers: &mut [&mut dyn Observer]) -> Result<State> {
    let n = step_count(initial.t, cfg.t_end, cfg.dt)?;
    for o in observers.iter_mut() {
        o.observe(initial, forcing)?;
    }
    if n == 0 {
        return Ok(initial.clone());
    }
    let stepper = Stepper::new(initial.grid(), cfg)?;
    run_with(&stepper, initial, forcing, n, observers, false)
}

/// Like [`run`] with a prebuilt [`Stepper`] and an explicit step count.
pub fn run_with(
    stepper: &Stepper,
    initial: &State,
    forcing: &Forcing,
    steps: u64,
    observers: &mut [&mut dyn Observer],
    observe_initial: bool,
) -> Result<State> {
    if observe_initial {
        for o in observers.iter_mut() {
            o.observe(initial, forcing)?;
        }
    }
    let every = stepper.cfg.observe_every as u64;
    let mut state = initial.clone();
    for s in 1..=steps {
        state = stepper.step(&state, forcing)?;
        if s % every == 0 || s == steps {
            for o in observers.iter_mut() {
                o.observe(&state, forcing)?;
            }
        }
    }
    Ok(state)
}

//! Energy ledgers and the discrete checks built on them: energy budgets,
//! advection cancellation, regularity inequalities, the Riccati horizon,
//! uniqueness certificates and absorbing bands.

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::RobinParams;
use crate::ops;
use crate::solver::{advection, AdvectionMode, Forcing, Observer, State};

macro_rules! ledger_record {
    ($($name:ident),* $(,)?) => {
        /// One observation. Norms are stored unsquared except the `_sq`
        /// and V-norm columns.
        #[derive(Debug, Clone, Copy, PartialEq, Default)]
        pub struct LedgerRecord {
            $(pub $name: f64,)*
        }

        /// Column names in CSV order.
        pub const LEDGER_COLUMNS: &[&str] = &[$(stringify!($name)),*];

        impl LedgerRecord {
            pub fn to_vec(&self) -> Vec<f64> {
                vec![$(self.$name),*]
            }

            pub fn from_slice(v: &[f64]) -> Result<Self> {
                if v.len() != LEDGER_COLUMNS.len() {
                    return Err(Error::Diagnostics(format!(
                        "ledger row has {} values, expected {}",
                        v.len(),
                        LEDGER_COLUMNS.len()
                    )));
                }
                let mut it = v.iter().copied();
                Ok(Self { $($name: it.next().unwrap(),)* })
            }
        }
    };
}

ledger_record!(
    t,
    u_sq,
    v_sq,
    theta_sq,
    u_v1,
    v_v2,
    theta_v3,
    work_vu,
    work_uv,
    work_baro,
    work_q,
    u_x,
    u_z,
    v_x,
    v_z,
    theta_x,
    theta_z,
    u_xz,
    v_xz,
    theta_xz,
    u_xx,
    u_zz,
    v_xx,
    v_zz,
    theta_xx,
    theta_zz,
    u_z_aniso,
    v_z_aniso,
    theta_z_aniso,
    u_surf,
    v_surf,
    theta_surf,
    u_x_surf,
    v_x_surf,
    theta_x_surf,
    q_heat,
    cancel_u,
    cancel_v,
    cancel_theta,
    baro_resid,
);

impl LedgerRecord {
    pub fn is_valid(&self) -> bool {
        let v = self.to_vec();
        v.iter().all(|x| x.is_finite())
            && v.iter()
                .zip(LEDGER_COLUMNS)
                .all(|(x, name)| name.starts_with("work") || name.starts_with("cancel") || *name == "t" || *x >= 0.0)
    }

    pub fn energy(&self) -> f64 {
        self.u_sq + self.v_sq + self.theta_sq
    }
}

/// Append-only time series of [`LedgerRecord`]s for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub robin: RobinParams,
    pub h: f64,
    records: Vec<LedgerRecord>,
}

impl EnergyLedger {
    pub fn new(robin: RobinParams, h: f64) -> Self {
        Self { robin, h, records: Vec::new() }
    }

    pub fn from_records(robin: RobinParams, h: f64, records: Vec<LedgerRecord>) -> Result<Self> {
        let mut l = Self::new(robin, h);
        for r in records {
            l.push(r)?;
        }
        Ok(l)
    }

    pub fn push(&mut self, r: LedgerRecord) -> Result<()> {
        if !r.is_valid() {
            return Err(Error::Diagnostics(format!("invalid ledger record at t = {}", r.t)));
        }
        if let Some(last) = self.records.last() {
            if r.t <= last.t {
                return Err(Error::Diagnostics(format!("time stamps not increasing: {} after {}", r.t, last.t)));
            }
        }
        self.records.push(r);
        Ok(())
    }

    pub fn records(&self) -> &[LedgerRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&LedgerRecord> {
        self.records.last()
    }

    fn require(&self, n: usize, what: &str) -> Result<()> {
        if self.records.len() < n {
            return Err(Error::Diagnostics(format!(
                "{what} needs at least {n} ledger records, got {}",
                self.records.len()
            )));
        }
        Ok(())
    }
}

/// `<(u, w) . grad s, s>` for `s = u, v, theta` with the solver's advection.
pub fn cancellation_residuals_with(state: &State, mode: AdvectionMode) -> Result<[f64; 3]> {
    let w = state.w()?;
    let mut out = [0.0; 3];
    for (o, s) in out.iter_mut().zip([&state.u, &state.v, &state.theta]) {
        let a = advection(&state.u, &w, s, mode)?;
        *o = ops::inner(&a, s)?;
    }
    Ok(out)
}

pub fn cancellation_residuals(state: &State) -> Result<[f64; 3]> {
    cancellation_residuals_with(state, AdvectionMode::SkewSymmetric)
}

/// One complete record for `state`, with cancellation residuals in `mode`.
pub fn observe_with(state: &State, forcing: &Forcing, mode: AdvectionMode) -> Result<LedgerRecord> {
    let r = state.robin();
    let (u, v, th) = (&state.u, &state.v, &state.theta);
    let sq = |f: &ScalarField| ops::inner(f, f);
    let baro = ops::vertical_integral_from_z(&ops::ddx(th)?);
    let c = cancellation_residuals_with(state, mode)?;
    Ok(LedgerRecord {
        t: state.t,
        u_sq: sq(u)?,
        v_sq: sq(v)?,
        theta_sq: sq(th)?,
        u_v1: ops::norm_v_sq(u, r.alpha1)?,
        v_v2: ops::norm_v_sq(v, r.alpha2)?,
        theta_v3: ops::norm_v_sq(th, r.alpha3)?,
        work_vu: ops::inner(v, u)?,
        work_uv: ops::inner(u, v)?,
        work_baro: ops::inner(&baro, u)?,
        work_q: ops::inner(&forcing.heat, th)?,
        u_x: ops::dx_norm_sq(u).sqrt(),
        u_z: ops::dz_norm_sq(u).sqrt(),
        v_x: ops::dx_norm_sq(v).sqrt(),
        v_z: ops::dz_norm_sq(v).sqrt(),
        theta_x: ops::dx_norm_sq(th).sqrt(),
        theta_z: ops::dz_norm_sq(th).sqrt(),
        u_xz: ops::dxz_norm_sq(u).sqrt(),
        v_xz: ops::dxz_norm_sq(v).sqrt(),
        theta_xz: ops::dxz_norm_sq(th).sqrt(),
        u_xx: ops::dxx_norm_sq(u).sqrt(),
        u_zz: ops::dzz_norm_sq(u).sqrt(),
        v_xx: ops::dxx_norm_sq(v).sqrt(),
        v_zz: ops::dzz_norm_sq(v).sqrt(),
        theta_xx: ops::dxx_norm_sq(th).sqrt(),
        theta_zz: ops::dzz_norm_sq(th).sqrt(),
        u_z_aniso: ops::dz_norm_aniso(u),
        v_z_aniso: ops::dz_norm_aniso(v),
        theta_z_aniso: ops::dz_norm_aniso(th),
        u_surf: ops::surface_trace_norm(u),
        v_surf: ops::surface_trace_norm(v),
        theta_surf: ops::surface_trace_norm(th),
        u_x_surf: ops::surface_dx_norm_sq(u).sqrt(),
        v_x_surf: ops::surface_dx_norm_sq(v).sqrt(),
        theta_x_surf: ops::surface_dx_norm_sq(th).sqrt(),
        q_heat: ops::norm_l2(&forcing.heat),
        cancel_u: c[0],
        cancel_v: c[1],
        cancel_theta: c[2],
        baro_resid: state.barotropic_residual(),
    })
}

pub fn observe(state: &State, forcing: &Forcing) -> Result<LedgerRecord> {
    observe_with(state, forcing, AdvectionMode::SkewSymmetric)
}

/// Observer that appends to an [`EnergyLedger`], skipping repeated times.
#[derive(Debug, Clone)]
pub struct LedgerObserver {
    pub ledger: EnergyLedger,
    pub mode: AdvectionMode,
}

impl LedgerObserver {
    pub fn new(robin: RobinParams, h: f64, mode: AdvectionMode) -> Self {
        Self { ledger: EnergyLedger::new(robin, h), mode }
    }
}

impl Observer for LedgerObserver {
    fn observe(&mut self, state: &State, forcing: &Forcing) -> Result<()> {
        if self.ledger.last().is_some_and(|r| r.t >= state.t) {
            return Ok(());
        }
        let rec = observe_with(state, forcing, self.mode)?;
        self.ledger.push(rec)
    }
}

/// Cumulative residual of one discrete energy equality.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub field: &'static str,
    pub times: Vec<f64>,
    pub residual: Vec<f64>,
    pub max_abs: f64,
    /// `max_abs` divided by the initial total energy (or 1 if that is 0).
    pub relative: f64,
}

fn budget(ledger: &EnergyLedger, field: &'static str, norm_sq: impl Fn(&LedgerRecord) -> f64, rate: impl Fn(&LedgerRecord) -> f64) -> Result<BudgetReport> {
    ledger.require(2, "budget check")?;
    let rec = ledger.records();
    let n0 = norm_sq(&rec[0]);
    let mut acc = 0.0;
    let mut residual = Vec::with_capacity(rec.len());
    residual.push(0.0);
    for w in rec.windows(2) {
        acc += 0.5 * (w[1].t - w[0].t) * (rate(&w[0]) + rate(&w[1]));
        residual.push(norm_sq(&w[1]) + 2.0 * acc - n0);
    }
    let max_abs = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let e0 = rec[0].energy();
    let scale = if e0 > 0.0 { e0 } else { 1.0 };
    Ok(BudgetReport {
        field,
        times: rec.iter().map(|r| r.t).collect(),
        residual,
        max_abs,
        relative: max_abs / scale,
    })
}

/// `|u(t)|^2 + 2 int (|u|_V1^2 + <-v + int_z^0 theta_x, u>) - |u(t0)|^2`.
pub fn budget_check_u(ledger: &EnergyLedger) -> Result<BudgetReport> {
    budget(ledger, "u", |r| r.u_sq, |r| r.u_v1 - r.work_vu + r.work_baro)
}

/// `|v(t)|^2 + 2 int (|v|_V2^2 + <u, v>) - |v(t0)|^2`.
pub fn budget_check_v(ledger: &EnergyLedger) -> Result<BudgetReport> {
    budget(ledger, "v", |r| r.v_sq, |r| r.v_v2 + r.work_uv)
}

/// `|theta(t)|^2 + 2 int (|theta|_V3^2 - <Q, theta>) - |theta(t0)|^2`.
pub fn budget_check_theta(ledger: &EnergyLedger) -> Result<BudgetReport> {
    budget(ledger, "theta", |r| r.theta_sq, |r| r.theta_v3 - r.work_q)
}

pub fn budget_checks(ledger: &EnergyLedger) -> Result<[BudgetReport; 3]> {
    Ok([budget_check_u(ledger)?, budget_check_v(ledger)?, budget_check_theta(ledger)?])
}

/// Observed orders `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` between
/// consecutive resolutions.
pub fn convergence_orders(spacing: &[f64], errors: &[f64]) -> Vec<f64> {
    spacing
        .windows(2)
        .zip(errors.windows(2))
        .map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

/// One-sided norm-evolution inequalities `d/dt X + D <= C R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Inequality {
    Uz,
    Ux,
    Vx,
    Tx,
    Vz,
    VzB,
    Tz,
}

impl Inequality {
    pub const ALL: [Inequality; 7] =
        [Inequality::Uz, Inequality::Ux, Inequality::Vx, Inequality::Tx, Inequality::Vz, Inequality::VzB, Inequality::Tz];

    pub fn name(&self) -> &'static str {
        match self {
            Inequality::Uz => "uz",
            Inequality::Ux => "ux",
            Inequality::Vx => "vx",
            Inequality::Tx => "tx",
            Inequality::Vz => "vz",
            Inequality::VzB => "vz_b",
            Inequality::Tz => "tz",
        }
    }

    /// `(X, D, R)` at one record.
    fn terms(&self, r: &LedgerRecord, a: &RobinParams) -> (f64, f64, f64) {
        let s = |x: f64| x * x;
        let (a1, a2, a3) = (a.alpha1, a.alpha2, a.alpha3);
        match self {
            Inequality::Uz => (
                s(r.u_z) + a1 * s(r.u_surf),
                s(r.u_xz) + s(r.u_zz) + a1 * s(r.u_x_surf),
                s(r.u_x) + s(r.u_z) + r.v_sq + s(r.theta_x),
            ),
            Inequality::Ux => (
                s(r.u_x),
                s(r.u_xx) + s(r.u_xz) + a1 * s(r.u_x_surf),
                (1.0 + s(r.u_z)) * s(s(r.u_x)) + r.v_sq + s(r.theta_x),
            ),
            Inequality::Vx => (
                s(r.v_x),
                s(r.v_xx) + s(r.v_xz) + a2 * s(r.v_x_surf),
                s(r.u_x) * s(r.v_x) + s(s(r.u_x)) * s(r.v_z) + r.u_sq,
            ),
            Inequality::Tx => (
                s(r.theta_x),
                s(r.theta_xx) + s(r.theta_xz) + a3 * s(r.theta_x_surf),
                s(r.u_x) * s(r.theta_x) + s(s(r.u_x)) * s(r.theta_z) + s(r.q_heat),
            ),
            Inequality::Vz => {
                let x = s(r.v_z) + a2 * s(r.v_surf);
                (
                    x,
                    s(r.v_xz) + s(r.v_zz) + a2 * s(r.v_x_surf),
                    (s(r.u_x) + s(r.v_x) + r.u_sq * s(r.u_z) + r.u_z * r.u_xz) * x + s(s(r.u_z)) + r.u_sq,
                )
            }
            Inequality::VzB => (
                s(r.v_z) + a2 * s(r.v_surf),
                s(r.v_xz) + s(r.v_zz) + a2 * s(r.v_x_surf),
                r.u_sq * s(r.u_x) * s(r.v_x) + s(r.u_x) * s(r.v_z) + r.u_sq,
            ),
            Inequality::Tz => (
                s(r.theta_z) + a3 * s(r.theta_surf),
                s(r.theta_xz) + s(r.theta_zz) + a3 * s(r.theta_x_surf),
                r.u_sq * s(r.u_x) * s(r.theta_x) + s(r.u_x) * s(r.theta_z) + s(r.q_heat),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub which: Inequality,
    pub constant: f64,
    /// Interval midpoints.
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    /// `C rhs - lhs`.
    pub margin: Vec<f64>,
    pub violations: Vec<f64>,
    /// `max lhs / rhs`, the quantity calibrated against.
    pub max_ratio: f64,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Discrete form on each observation interval: difference quotient of `X`
/// plus trapezoid averages of `D` and `R`.
pub fn regularity_inequality_check(ledger: &EnergyLedger, which: Inequality, constant: f64) -> Result<InequalityReport> {
    ledger.require(2, "regularity check")?;
    let a = ledger.robin;
    let mut rep = InequalityReport {
        which,
        constant,
        times: Vec::new(),
        lhs: Vec::new(),
        rhs: Vec::new(),
        margin: Vec::new(),
        violations: Vec::new(),
        max_ratio: 0.0,
    };
    for w in ledger.records().windows(2) {
        let (x0, d0, r0) = which.terms(&w[0], &a);
        let (x1, d1, r1) = which.terms(&w[1], &a);
        let dt = w[1].t - w[0].t;
        let tm = 0.5 * (w[0].t + w[1].t);
        let lhs = (x1 - x0) / dt + 0.5 * (d0 + d1);
        let rhs = 0.5 * (r0 + r1);
        let margin = constant * rhs - lhs;
        let ratio = ops::BoundSample { lhs, rhs }.ratio();
        rep.max_ratio = rep.max_ratio.max(ratio);
        if margin < 0.0 {
            rep.violations.push(tm);
        }
        rep.times.push(tm);
        rep.lhs.push(lhs);
        rep.rhs.push(rhs);
        rep.margin.push(margin);
    }
    Ok(rep)
}

/// First `t` with `y(0) int_0^t g = 1`, `y = |u_x|^2 + 1`,
/// `g = C (1 + |u_z|^2 + |v|^2 + |theta_x|^2)`; the running trapezoid
/// integral is interpolated linearly inside the crossing interval.
pub fn riccati_horizon(ledger: &EnergyLedger, constant: f64) -> Result<Option<f64>> {
    ledger.require(1, "Riccati horizon")?;
    let rec = ledger.records();
    let y0 = rec[0].u_x * rec[0].u_x + 1.0;
    let target = 1.0 / y0;
    let g = |r: &LedgerRecord| constant * (1.0 + r.u_z * r.u_z + r.v_sq + r.theta_x * r.theta_x);
    let mut acc = 0.0;
    for w in rec.windows(2) {
        let inc = 0.5 * (w[1].t - w[0].t) * (g(&w[0]) + g(&w[1]));
        if inc > 0.0 && acc + inc >= target {
            return Ok(Some(w[0].t + (w[1].t - w[0].t) * (target - acc) / inc));
        }
        acc += inc;
    }
    Ok(None)
}

/// Cauchy-Schwarz and Agmon parts of the bridge estimate for one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeCheck {
    /// `int |f_z| |f_xz| dt`.
    pub mixed: f64,
    /// `(int |f_z|^2 dt)^(1/2) (int |f_xz|^2 dt)^(1/2)`.
    pub cauchy_schwarz: f64,
    pub cs_ok: bool,
    /// `C (mixed + int |f_z|^2 dt [theta only])`.
    pub agmon_rhs: f64,
    pub agmon_ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldCertificate {
    pub field: &'static str,
    /// `int |f_z|^4 dt`.
    pub l4_integral: f64,
    /// `int |f_z|^2_{L^inf_x(L^2_z)} dt`.
    pub aniso_integral: f64,
    pub l4_ok: bool,
    pub aniso_ok: bool,
    pub bridge: BridgeCheck,
}

impl FieldCertificate {
    pub fn granted(&self) -> bool {
        self.l4_ok || self.aniso_ok
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessCertificate {
    pub t_end: f64,
    pub cap: f64,
    pub fields: [FieldCertificate; 3],
}

impl UniquenessCertificate {
    pub fn granted(&self) -> bool {
        self.fields.iter().all(|f| f.granted())
    }

    pub fn bridges_hold(&self) -> bool {
        self.fields.iter().all(|f| f.bridge.cs_ok && f.bridge.agmon_ok)
    }
}

/// Trapezoid integral over `[t0, t_end]` of `f` evaluated at records, with
/// the integrand interpolated linearly if `t_end` falls inside an interval.
fn integrate_to(rec: &[LedgerRecord], t_end: f64, f: impl Fn(&LedgerRecord) -> f64) -> f64 {
    let mut acc = 0.0;
    for w in rec.windows(2) {
        if w[0].t >= t_end {
            break;
        }
        let (f0, f1) = (f(&w[0]), f(&w[1]));
        if w[1].t <= t_end {
            acc += 0.5 * (w[1].t - w[0].t) * (f0 + f1);
        } else {
            let s = (t_end - w[0].t) / (w[1].t - w[0].t);
            acc += 0.5 * (t_end - w[0].t) * (f0 + (f0 + s * (f1 - f0)));
        }
    }
    acc
}

pub const CS_REL_TOL: f64 = 1e-12;

/// Membership integrals of `f_z` in `L^4(0,T;L^2)` and
/// `L^2(0,T;L^inf_x(L^2_z))` for `u`, `v`, `theta`, granted per field when a
/// branch integral is finite and at most `cap`.
pub fn uniqueness_certificate(ledger: &EnergyLedger, t_end: f64, cap: f64, bridge_constant: f64) -> Result<UniquenessCertificate> {
    ledger.require(2, "uniqueness certificate")?;
    let rec = ledger.records();
    let last = rec[rec.len() - 1].t;
    if last < t_end * (1.0 - 1e-12) - 1e-300 {
        return Err(Error::Diagnostics(format!("ledger ends at t = {last}, before T = {t_end}")));
    }
    let field = |name: &'static str,
                 fz: fn(&LedgerRecord) -> f64,
                 fxz: fn(&LedgerRecord) -> f64,
                 aniso: fn(&LedgerRecord) -> f64,
                 neumann_walls: bool| {
        let l4 = integrate_to(rec, t_end, |r| fz(r).powi(4));
        let an = integrate_to(rec, t_end, |r| aniso(r).powi(2));
        let mixed = integrate_to(rec, t_end, |r| fz(r) * fxz(r));
        let z2 = integrate_to(rec, t_end, |r| fz(r).powi(2));
        let xz2 = integrate_to(rec, t_end, |r| fxz(r).powi(2));
        let cs = z2.sqrt() * xz2.sqrt();
        let agmon_rhs = bridge_constant * (mixed + if neumann_walls { z2 } else { 0.0 });
        FieldCertificate {
            field: name,
            l4_integral: l4,
            aniso_integral: an,
            l4_ok: l4.is_finite() && l4 <= cap,
            aniso_ok: an.is_finite() && an <= cap,
            bridge: BridgeCheck {
                mixed,
                cauchy_schwarz: cs,
                cs_ok: mixed <= cs * (1.0 + CS_REL_TOL),
                agmon_rhs,
                agmon_ok: an.is_finite() && an <= agmon_rhs * (1.0 + CS_REL_TOL),
            },
        }
    };
    Ok(UniquenessCertificate {
        t_end,
        cap,
        fields: [
            field("u", |r| r.u_z, |r| r.u_xz, |r| r.u_z_aniso, false),
            field("v", |r| r.v_z, |r| r.v_xz, |r| r.v_z_aniso, false),
            field("theta", |r| r.theta_z, |r| r.theta_xz, |r| r.theta_z_aniso, true),
        ],
    })
}

/// Ledger column by name.
pub fn column(ledger: &EnergyLedger, name: &str) -> Result<Vec<f64>> {
    let j = LEDGER_COLUMNS
        .iter()
        .position(|c| *c == name)
        .ok_or_else(|| Error::Diagnostics(format!("unknown ledger column {name:?}")))?;
    Ok(ledger.records().iter().map(|r| r.to_vec()[j]).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub column: String,
    pub initial: Vec<f64>,
    pub post_max: Vec<f64>,
    pub spread: f64,
    /// Pearson correlation of `initial` and `post_max`; 0 when the band has
    /// collapsed to roundoff width.
    pub correlation: f64,
    pub degenerate: bool,
    pub absorbing: bool,
}

/// Relative band width below which the post-transient maxima coincide to
/// roundoff and the correlation is reported as 0.
pub const BAND_ROUNDOFF: f64 = 1e-12;

pub const BAND_CORRELATION: f64 = 0.2;

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Post-transient maxima of one column across runs that differ only in
/// initial data.
pub fn absorbing_band(ledgers: &[EnergyLedger], name: &str, transient: f64) -> Result<BandReport> {
    if ledgers.len() < 2 {
        return Err(Error::Diagnostics("absorbing band needs at least two runs".into()));
    }
    let first = &ledgers[0];
    let mut initial = Vec::new();
    let mut post_max = Vec::new();
    for l in ledgers {
        if l.robin != first.robin || l.h != first.h {
            return Err(Error::GridMismatch("absorbing band runs differ in domain or Robin data".into()));
        }
        let col = column(l, name)?;
        let times: Vec<f64> = l.records().iter().map(|r| r.t).collect();
        if times.last().is_none_or(|&t| t <= transient) {
            return Err(Error::Diagnostics(format!("run ends before transient {transient}")));
        }
        initial.push(col[0]);
        post_max.push(
            times
                .iter()
                .zip(&col)
                .filter(|(t, _)| **t >= transient)
                .map(|(_, v)| *v)
                .fold(f64::NEG_INFINITY, f64::max),
        );
    }
    let hi = post_max.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = post_max.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = hi - lo;
    let degenerate = spread <= BAND_ROUNDOFF * hi.abs().max(f64::MIN_POSITIVE);
    let correlation = if degenerate { 0.0 } else { pearson(&initial, &post_max) };
    Ok(BandReport {
        column: name.to_string(),
        initial,
        post_max,
        spread,
        correlation,
        degenerate,
        absorbing: correlation < BAND_CORRELATION,
    })
}

/// Whether a column is non-increasing after `transient` and ends at most
/// `factor` times its initial value.
pub fn decays(ledger: &EnergyLedger, name: &str, transient: f64, factor: f64) -> Result<bool> {
    let col = column(ledger, name)?;
    let rec = ledger.records();
    let post: Vec<f64> = rec.iter().zip(&col).filter(|(r, _)| r.t >= transient).map(|(_, v)| *v).collect();
    let monotone = post.windows(2).all(|w| w[1] <= w[0]);
    let last = *col.last().unwrap_or(&0.0);
    Ok(monotone && last <= factor * col[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::BcClass;
    use crate::grid::build_grid;
    use crate::profiles::InitialProfile;
    use std::f64::consts::PI;

    fn synthetic(ts: &[f64], f: impl Fn(f64) -> LedgerRecord) -> EnergyLedger {
        EnergyLedger::from_records(RobinParams::zero(), 1.0, ts.iter().map(|&t| f(t)).collect()).unwrap()
    }

    #[test]
    fn zero_state_records_zero() {
        let g = build_grid(1.0, 8, 8).unwrap();
        let s = State::zeros(&g, &RobinParams::new(1.0, 1.0, 1.0).unwrap());
        let r = observe(&s, &Forcing::none(&g)).unwrap();
        assert!(r.to_vec().iter().all(|&x| x == 0.0));
        assert_eq!(cancellation_residuals(&s).unwrap(), [0.0; 3]);
    }

    #[test]
    fn norm_of_sine_cosine() {
        let g = build_grid(1.0, 128, 128).unwrap();
        let u = ScalarField::from_fn(&g, BcClass::Free, |x, z| (PI * x).sin() * (PI * z / 2.0).cos());
        let zero = ScalarField::zeros(&g, BcClass::Free);
        let s = State::new(u, zero.clone(), zero, &RobinParams::zero()).unwrap();
        let r = observe(&s, &Forcing::none(&g)).unwrap();
        assert!((r.u_sq.sqrt() - 0.5).abs() < 1e-4, "{}", r.u_sq.sqrt());
    }

    #[test]
    fn ledger_rejects_repeated_time() {
        let mut l = EnergyLedger::new(RobinParams::zero(), 1.0);
        l.push(LedgerRecord { t: 0.0, ..Default::default() }).unwrap();
        assert!(l.push(LedgerRecord { t: 0.0, ..Default::default() }).is_err());
        assert!(l.push(LedgerRecord { t: 1.0, u_x: f64::NAN, ..Default::default() }).is_err());
        assert!(budget_check_u(&EnergyLedger::new(RobinParams::zero(), 1.0)).is_err());
    }

    #[test]
    fn zero_ledger_budgets_and_inequalities() {
        let l = synthetic(&[0.0, 0.5, 1.0], |t| LedgerRecord { t, ..Default::default() });
        for b in budget_checks(&l).unwrap() {
            assert_eq!(b.max_abs, 0.0);
            assert_eq!(b.residual[0], 0.0);
        }
        for w in Inequality::ALL {
            let rep = regularity_inequality_check(&l, w, 1.0).unwrap();
            assert!(rep.passed());
            assert!(rep.lhs.iter().chain(&rep.rhs).all(|&x| x == 0.0));
        }
    }

    #[test]
    fn riccati_constant_integrand() {
        let c = 4.0;
        let ts: Vec<f64> = (0..=100).map(|i| i as f64 * 0.01).collect();
        let l = synthetic(&ts, |t| LedgerRecord { t, ..Default::default() });
        let t = riccati_horizon(&l, c).unwrap().unwrap();
        assert!((t - 0.25).abs() < 1e-14);
        assert_eq!(riccati_horizon(&l, 0.5).unwrap(), None);
    }

    #[test]
    fn riccati_matches_cumulative_sum() {
        let ts: Vec<f64> = (0..=200).map(|i| i as f64 * 0.005).collect();
        let l = synthetic(&ts, |t| LedgerRecord { t, u_x: 1.5, u_z: 1.0 + t, v_sq: t * t, theta_x: 0.3, ..Default::default() });
        let c = 0.2;
        let got = riccati_horizon(&l, c).unwrap().unwrap();
        let g = |t: f64| c * (1.0 + (1.0 + t).powi(2) + t * t + 0.09);
        let target = 1.0 / (1.5 * 1.5 + 1.0);
        let mut acc = 0.0;
        let mut want = None;
        for w in ts.windows(2) {
            let inc = 0.5 * (w[1] - w[0]) * (g(w[0]) + g(w[1]));
            if acc + inc >= target {
                want = Some(w[0] + (w[1] - w[0]) * (target - acc) / inc);
                break;
            }
            acc += inc;
        }
        assert_eq!(Some(got), want);
    }

    #[test]
    fn certificate_constant_shear() {
        let ts: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let l = synthetic(&ts, |t| LedgerRecord { t, u_z: 1.0, u_z_aniso: 1.0, u_xz: 2.0, ..Default::default() });
        let c = uniqueness_certificate(&l, 2.0, 1e6, 1.0).unwrap();
        assert!((c.fields[0].l4_integral - 2.0).abs() < 1e-14);
        assert!((c.fields[0].aniso_integral - 2.0).abs() < 1e-14);
        assert!(c.granted());
        assert!(c.bridges_hold());
        assert!(uniqueness_certificate(&l, 3.0, 1e6, 1.0).is_err());
        let half = uniqueness_certificate(&l, 1.05, 1e6, 1.0).unwrap();
        assert!((half.fields[0].l4_integral - 1.05).abs() < 1e-14);
    }

    #[test]
    fn zero_certificate_granted() {
        let l = synthetic(&[0.0, 1.0], |t| LedgerRecord { t, ..Default::default() });
        let c = uniqueness_certificate(&l, 1.0, 1e6, 1.0).unwrap();
        assert!(c.granted());
        assert!(c.fields.iter().all(|f| f.l4_integral == 0.0 && f.aniso_integral == 0.0));
    }

    #[test]
    fn band_of_identical_runs() {
        let ts: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        let l = synthetic(&ts, |t| LedgerRecord { t, u_x: 1.0 + (-t).exp(), ..Default::default() });
        let b = absorbing_band(&[l.clone(), l.clone(), l], "u_x", 5.0).unwrap();
        assert_eq!(b.spread, 0.0);
        assert!(b.absorbing && b.degenerate);
        let l1 = synthetic(&ts, |t| LedgerRecord { t, u_x: 1.0 + (-t).exp(), ..Default::default() });
        let l2 = synthetic(&ts, |t| LedgerRecord { t, u_x: 1.0 + 100.0 * (-t).exp(), ..Default::default() });
        let l3 = synthetic(&ts, |t| LedgerRecord { t, u_x: 1.0 + 10.0 * (-t).exp(), ..Default::default() });
        let b = absorbing_band(&[l1, l2, l3], "u_x", 2.0).unwrap();
        assert!(b.correlation > 0.99 && !b.absorbing);
        assert!(absorbing_band(&[synthetic(&ts, |t| LedgerRecord { t, ..Default::default() })], "u_x", 1.0).is_err());
    }

    #[test]
    fn cancellation_skew_vs_advective() {
        let g = build_grid(1.0, 24, 20).unwrap();
        let r = RobinParams::new(0.5, 1.0, 0.3).unwrap();
        let s = InitialProfile::Random { seed: 11 }.build(&g, &r, 1.0).unwrap();
        let skew = cancellation_residuals(&s).unwrap();
        let adv = cancellation_residuals_with(&s, AdvectionMode::Advective).unwrap();
        let e = s.energy();
        for j in 0..3 {
            assert!(skew[j].abs() <= 1e-13 * e, "{j}: {}", skew[j]);
            assert!(adv[j].abs() > 100.0 * skew[j].abs());
        }
    }

    #[test]
    fn orders() {
        let o = convergence_orders(&[0.1, 0.05, 0.025], &[4e-2, 1e-2, 2.5e-3]);
        assert!(o.iter().all(|x| (x - 2.0).abs() < 1e-12));
    }
}

//! Scenario orchestration and the summary report.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use super::config::{ExperimentConfig, InitialSpec, Scenario};
use super::ledger_csv::{fmt_f64, load_ledger, save_ledger, save_twin, schema_name};
use super::snapshot::{load_snapshot_for, save_snapshot};
use crate::calibration::{self, c_regularity, C_BRIDGE, C_ENVELOPE, C_RICCATI, K_TRI};
use crate::diagnostics::{
    absorbing_band, budget_checks, convergence_orders, decays, regularity_inequality_check, riccati_horizon,
    uniqueness_certificate, EnergyLedger, Inequality, LedgerObserver,
};
use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid};
use crate::ops;
use crate::profiles::{HeatProfile, Manufactured};
use crate::solver::{run, Forcing, Observer, SolverConfig, State};
use crate::twin::{check_envelope, gronwall_envelope, perturbed, run_twin, TwinDiff};

pub const SUMMARY_FILE: &str = "summary.txt";

/// Norm columns checked for an absorbing band.
pub const BAND_COLUMNS: [&str; 6] = ["u_x", "u_z", "v_x", "v_z", "theta_x", "theta_z"];

/// Quadratic scaling window for `|d|_H^2` at `delta` against `delta / 10`.
pub const SCALING_RANGE: (f64, f64) = (80.0, 120.0);

pub const MMS_SPACE_ORDER: (f64, f64) = (1.7, 2.3);
pub const MMS_TIME_ORDER: f64 = 0.9;

/// Tolerance on the relative spread of resolution-stable trilinear ratios.
pub const TRI_STABILITY: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    /// Hard checks decide the exit status; the rest are reported only.
    pub hard: bool,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub scenario: String,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
    /// `(file, key, value)` triples recomputable from a ledger CSV.
    pub values: Vec<(String, String, f64)>,
}

impl Report {
    fn hard(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), hard: true, passed, detail: detail.into() });
    }

    fn info(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), hard: false, passed: true, detail: detail.into() });
    }

    fn soft(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), hard: false, passed, detail: detail.into() });
    }

    pub fn hard_failures(&self) -> usize {
        self.checks.iter().filter(|c| c.hard && !c.passed).count()
    }

    pub fn passed(&self) -> bool {
        self.hard_failures() == 0
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# hpe2d summary");
        let _ = writeln!(s, "schema: {}", schema_name());
        let _ = writeln!(s, "scenario: {}", self.scenario);
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        for c in &self.checks {
            let tag = match (c.hard, c.passed) {
                (true, true) => "PASS",
                (true, false) => "FAIL",
                (false, true) => "info",
                (false, false) => "warn",
            };
            let _ = writeln!(s, "[{tag}] {}: {}", c.name, c.detail);
        }
        for (file, key, v) in &self.values {
            let _ = writeln!(s, "value {file} {key} {}", fmt_f64(*v));
        }
        let hard = self.checks.iter().filter(|c| c.hard).count();
        let _ = writeln!(s, "hard checks: {} passed, {} failed", hard - self.hard_failures(), self.hard_failures());
        s
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.report.passed()
    }
}

fn build_initial(cfg: &ExperimentConfig, grid: &Grid, amplitude_scale: f64) -> Result<State> {
    match &cfg.initial {
        InitialSpec::Profile { profile, amplitude } => profile.build(grid, &cfg.robin(), amplitude * amplitude_scale),
        InitialSpec::Snapshot { path } => {
            let s = load_snapshot_for(path, grid)?;
            if s.robin() != cfg.robin() {
                return Err(Error::Config(format!(
                    "snapshot Robin coefficients {:?} differ from the run's {:?}",
                    s.robin(),
                    cfg.robin()
                )));
            }
            Ok(s)
        }
    }
}

fn build_forcing(cfg: &ExperimentConfig, grid: &Grid) -> Forcing {
    Forcing::heat(cfg.forcing.profile.build(grid, cfg.forcing.amplitude))
}

fn heating_is_zero(cfg: &ExperimentConfig) -> bool {
    cfg.forcing.profile == HeatProfile::Zero || cfg.forcing.amplitude == 0.0
}

fn run_ledger(initial: &State, forcing: &Forcing, cfg: &SolverConfig) -> Result<(State, EnergyLedger)> {
    let mut obs = LedgerObserver::new(cfg.robin, initial.grid().h(), cfg.advection);
    let end = run(initial, forcing, cfg, &mut [&mut obs as &mut dyn Observer])?;
    Ok((end, obs.ledger))
}

/// Quantities recomputed by `hpe2d verify`; depend on the ledger only.
pub fn ledger_values(ledger: &EnergyLedger) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let rec = ledger.records();
    out.push(("baro_resid_max".into(), rec.iter().map(|r| r.baro_resid).fold(0.0, f64::max)));
    let trace = |s: fn(&crate::diagnostics::LedgerRecord) -> (f64, f64)| {
        rec.iter()
            .map(|r| {
                let (tr, z) = s(r);
                ops::BoundSample { lhs: tr, rhs: ledger.h.sqrt() * z }.ratio()
            })
            .fold(0.0, f64::max)
    };
    out.push(("trace_ratio_u".into(), trace(|r| (r.u_surf, r.u_z))));
    out.push(("trace_ratio_v".into(), trace(|r| (r.v_surf, r.v_z))));
    if let Ok(b) = budget_checks(ledger) {
        for r in &b {
            out.push((format!("budget_{}", r.field), r.max_abs));
        }
    }
    if let Some(last) = ledger.last() {
        if let Ok(c) = uniqueness_certificate(ledger, last.t, f64::INFINITY, C_BRIDGE) {
            for f in &c.fields {
                out.push((format!("cert_{}_l4", f.field), f.l4_integral));
                out.push((format!("cert_{}_aniso", f.field), f.aniso_integral));
                out.push((format!("cert_{}_mixed", f.field), f.bridge.mixed));
                out.push((format!("cert_{}_cs", f.field), f.bridge.cauchy_schwarz));
            }
        }
    }
    if let Ok(r) = riccati_horizon(ledger, C_RICCATI) {
        out.push(("riccati_horizon".into(), r.unwrap_or(f64::INFINITY)));
    }
    out
}

/// Verdicts derived from one ledger. `tag` prefixes check names.
fn ledger_checks(rep: &mut Report, file: &str, tag: &str, ledger: &EnergyLedger, cfg: &ExperimentConfig) {
    let name = |s: &str| if tag.is_empty() { s.to_string() } else { format!("{tag} {s}") };
    let values = ledger_values(ledger);
    let get = |k: &str| values.iter().find(|(n, _)| n == k).map(|(_, v)| *v);
    let baro = get("baro_resid_max").unwrap_or(0.0);
    let tol = cfg.solver.tol_constraint;
    rep.hard(name("constraint"), baro <= tol, format!("max |int u dz| = {baro:.3e} (tolerance {tol:.1e})"));
    for f in ["u", "v"] {
        let r = get(&format!("trace_ratio_{f}")).unwrap_or(0.0);
        let lim = 1.0 + cfg.checks.trace_tolerance;
        rep.hard(
            name(&format!("trace {f}")),
            r <= lim,
            format!("max |{f}(.,0)| / (sqrt(h) |{f}_z|) = {r:.6} (limit {lim})"),
        );
    }
    match budget_checks(ledger) {
        Ok(b) => {
            for r in &b {
                rep.info(
                    name(&format!("budget {}", r.field)),
                    format!("max |residual| = {:.6e}, relative to initial energy {:.6e}", r.max_abs, r.relative),
                );
            }
        }
        Err(e) => rep.info(name("budget"), format!("skipped: {e}")),
    }
    if let Some(last) = ledger.last().copied() {
        match uniqueness_certificate(ledger, last.t, cfg.checks.certificate_cap, C_BRIDGE) {
            Ok(c) => {
                let fields: Vec<String> = c
                    .fields
                    .iter()
                    .map(|f| format!("{} L4 {:.6e} aniso {:.6e}", f.field, f.l4_integral, f.aniso_integral))
                    .collect();
                rep.hard(
                    name("certificate"),
                    c.granted(),
                    format!("T = {}, cap {:.1e}: {}", last.t, c.cap, fields.join("; ")),
                );
                let cs = c.fields.iter().all(|f| f.bridge.cs_ok);
                let worst = c
                    .fields
                    .iter()
                    .map(|f| ops::BoundSample { lhs: f.bridge.mixed, rhs: f.bridge.cauchy_schwarz }.ratio())
                    .fold(0.0, f64::max);
                rep.hard(name("bridge cauchy-schwarz"), cs, format!("max mixed / product = {worst:.15}"));
                let agmon = c.fields.iter().all(|f| f.bridge.agmon_ok);
                rep.soft(name("bridge agmon"), agmon, format!("calibrated C = {C_BRIDGE}"));
            }
            Err(e) => rep.info(name("certificate"), format!("skipped: {e}")),
        }
    }
    for w in Inequality::ALL {
        if let Ok(r) = regularity_inequality_check(ledger, w, c_regularity(w)) {
            rep.soft(
                name(&format!("regularity {}", w.name())),
                r.passed(),
                format!("{} violations, max ratio {:.4e} (C = {})", r.violations.len(), r.max_ratio, r.constant),
            );
        }
    }
    match get("riccati_horizon") {
        Some(t) if t.is_finite() => rep.info(name("riccati horizon"), format!("{t:.6e}")),
        Some(_) => rep.info(name("riccati horizon"), "beyond the run"),
        None => {}
    }
    for (k, v) in values {
        rep.values.push((file.to_string(), k, v));
    }
}

fn solver_failed(rep: &mut Report, tag: &str, e: &Error) {
    let name = if tag.is_empty() { "solver".to_string() } else { format!("{tag} solver") };
    rep.hard(name, false, format!("aborted: {e}"));
}

fn run_single(cfg: &ExperimentConfig, out: &Path, rep: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let grid = cfg.grid()?;
    rep.notes.extend(cfg.solver.advisories(&grid));
    let initial = build_initial(cfg, &grid, 1.0)?;
    let forcing = build_forcing(cfg, &grid);
    let (end, ledger) = match run_ledger(&initial, &forcing, &cfg.solver) {
        Ok(x) => x,
        Err(e) => {
            solver_failed(rep, "", &e);
            return Ok(());
        }
    };
    let lp = out.join("ledger.csv");
    save_ledger(&ledger, &lp)?;
    let sp = out.join("final.snap");
    save_snapshot(&end, &sp)?;
    files.extend([lp, sp]);
    ledger_checks(rep, "ledger.csv", "", &ledger, cfg);
    Ok(())
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w);
    }
    b.build().map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Member ledger and artifact paths, or the solver error that stopped it.
type MemberResult = std::result::Result<(EnergyLedger, PathBuf, PathBuf), Error>;

fn run_ensemble(cfg: &ExperimentConfig, out: &Path, rep: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let ens = cfg.ensemble.as_ref().ok_or_else(|| Error::Config("ensemble section missing".into()))?;
    let grid = cfg.grid()?;
    rep.notes.extend(cfg.solver.advisories(&grid));
    let forcing = build_forcing(cfg, &grid);
    let members: Vec<(usize, f64)> = ens.amplitudes.iter().copied().enumerate().collect();
    let results: Vec<Result<MemberResult>> = pool(cfg.workers)?
        .install(|| {
            members
                .par_iter()
                .map(|&(j, a)| {
                    let initial = build_initial(cfg, &grid, a)?;
                    match run_ledger(&initial, &forcing, &cfg.solver) {
                        Ok((end, ledger)) => {
                            let lp = out.join(format!("ledger_{j:02}.csv"));
                            save_ledger(&ledger, &lp)?;
                            let sp = out.join(format!("final_{j:02}.snap"));
                            save_snapshot(&end, &sp)?;
                            Ok(Ok((ledger, lp, sp)))
                        }
                        Err(e) => Ok(Err(e)),
                    }
                })
                .collect()
        });
    let mut ledgers = Vec::new();
    for (j, r) in results.into_iter().enumerate() {
        let tag = format!("member {j:02}");
        match r? {
            Ok((ledger, lp, sp)) => {
                let file = lp.file_name().unwrap().to_string_lossy().into_owned();
                ledger_checks(rep, &file, &tag, &ledger, cfg);
                files.extend([lp, sp]);
                ledgers.push(ledger);
            }
            Err(e) => solver_failed(rep, &tag, &e),
        }
    }
    if ledgers.len() != ens.amplitudes.len() {
        return Ok(());
    }
    let zero_heat = heating_is_zero(cfg);
    for col in BAND_COLUMNS {
        let b = absorbing_band(&ledgers, col, ens.transient)?;
        let detail = format!(
            "post-transient maxima [{}], spread {:.3e}, correlation with initial {:.4}{}",
            b.post_max.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(", "),
            b.spread,
            b.correlation,
            if b.degenerate { " (collapsed to roundoff)" } else { "" }
        );
        if zero_heat {
            rep.info(format!("band {col}"), detail);
        } else {
            rep.hard(format!("band {col}"), b.absorbing, detail);
        }
    }
    if zero_heat {
        for col in BAND_COLUMNS {
            let mut ok = true;
            let mut finals = Vec::new();
            for l in &ledgers {
                ok &= decays(l, col, ens.decay_transient, ens.decay_factor)?;
                let c = crate::diagnostics::column(l, col)?;
                finals.push(ops::BoundSample { lhs: *c.last().unwrap(), rhs: c[0] }.ratio());
            }
            rep.hard(
                format!("decay {col}"),
                ok,
                format!(
                    "monotone after t = {}, final / initial [{}] (limit {:.1e})",
                    ens.decay_transient,
                    finals.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>().join(", "),
                    ens.decay_factor
                ),
            );
        }
    }
    Ok(())
}

/// Matched-sample ratios `h_sq(big) / h_sq(small)` over samples where
/// the smaller pair has separated.
pub fn scaling_ratios(big: &TwinDiff, small: &TwinDiff) -> Vec<f64> {
    big.h_sq.iter().zip(&small.h_sq).filter(|(_, s)| **s > 0.0).map(|(b, s)| b / s).collect()
}

fn run_twin_scenario(cfg: &ExperimentConfig, out: &Path, rep: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let tw = cfg.twin.ok_or_else(|| Error::Config("twin section missing".into()))?;
    let grid = cfg.grid()?;
    rep.notes.extend(cfg.solver.advisories(&grid));
    let ic1 = build_initial(cfg, &grid, 1.0)?;
    let forcing = build_forcing(cfg, &grid);
    let ic2 = perturbed(&ic1, tw.delta, tw.seed)?;
    let run = match run_twin(&ic1, &ic2, &forcing, &cfg.solver) {
        Ok(r) => r,
        Err(e) => {
            solver_failed(rep, "twin", &e);
            return Ok(());
        }
    };
    let env = gronwall_envelope(&run.diff, tw.constant);
    let v = check_envelope(&run.diff, &env)?;
    let tp = out.join("twin.csv");
    save_twin(&run.diff, &env, &tp)?;
    let s1 = out.join("final_1.snap");
    save_snapshot(&run.final1, &s1)?;
    let s2 = out.join("final_2.snap");
    save_snapshot(&run.final2, &s2)?;
    files.extend([tp, s1, s2]);
    rep.hard(
        "envelope",
        v.passed,
        format!(
            "delta {:.3e}, seed {}, C = {}: max |d|^2 / envelope = {:.4e}{}",
            tw.delta,
            tw.seed,
            tw.constant,
            v.worst_ratio,
            v.first_violation.map(|t| format!(", first violation at t = {t}")).unwrap_or_default()
        ),
    );
    if tw.constant != C_ENVELOPE {
        rep.notes.push(format!("envelope constant {} differs from the calibrated {C_ENVELOPE}", tw.constant));
    }
    if tw.scaling {
        let ic3 = perturbed(&ic1, tw.delta / 10.0, tw.seed)?;
        match run_twin(&ic1, &ic3, &forcing, &cfg.solver) {
            Ok(small) => {
                let sp = out.join("twin_small.csv");
                save_twin(&small.diff, &gronwall_envelope(&small.diff, tw.constant), &sp)?;
                files.push(sp);
                let r = scaling_ratios(&run.diff, &small.diff);
                let lo = r.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let ok = !r.is_empty() && lo >= SCALING_RANGE.0 && hi <= SCALING_RANGE.1;
                rep.hard(
                    "scaling",
                    ok,
                    format!(
                        "|d|^2 at delta over delta/10 in [{lo:.4}, {hi:.4}] over {} samples (window [{}, {}])",
                        r.len(),
                        SCALING_RANGE.0,
                        SCALING_RANGE.1
                    ),
                );
            }
            Err(e) => solver_failed(rep, "twin delta/10", &e),
        }
    }
    Ok(())
}

/// `|u - u_e| + |v - v_e| + |theta - theta_e|` at the end of a
/// manufactured-solution run.
pub fn mms_error(h: f64, n: usize, dt: f64, t_end: f64, base: &SolverConfig) -> Result<f64> {
    let g = build_grid(h, n, n)?;
    let m = Manufactured::new(h, base.robin);
    let s = m.exact_state(&g, 0.0)?;
    let f = Forcing::none(&g).with_sources(Arc::new(m));
    let cfg = SolverConfig { dt, t_end, ..base.clone() };
    let out = run(&s, &f, &cfg, &mut [])?;
    let ex = m.exact_state(&g, out.t)?;
    let e = |a: &crate::ScalarField, b: &crate::ScalarField| -> Result<f64> {
        Ok(ops::norm_l2(&a.zip_map(b, |x, y| x - y)?))
    };
    Ok(e(&out.u, &ex.u)? + e(&out.v, &ex.v)? + e(&out.theta, &ex.theta)?)
}

fn run_mms(cfg: &ExperimentConfig, out: &Path, rep: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let m = &cfg.mms;
    let mut csv = String::from("study,n,dt,t_end,error\n");
    let mut space = Vec::new();
    for &n in &m.resolutions {
        let dt = m.dt_factor / n as f64;
        let e = match mms_error(cfg.h, n, dt, m.t_end, &cfg.solver) {
            Ok(e) => e,
            Err(e) => {
                solver_failed(rep, &format!("mms n={n}"), &e);
                return Ok(());
            }
        };
        let _ = writeln!(csv, "space,{n},{},{},{}", fmt_f64(dt), fmt_f64(m.t_end), fmt_f64(e));
        space.push(e);
    }
    let mut time = Vec::new();
    for &dt in &m.time_steps {
        let e = match mms_error(cfg.h, m.time_nx, dt, m.time_t_end, &cfg.solver) {
            Ok(e) => e,
            Err(e) => {
                solver_failed(rep, &format!("mms dt={dt}"), &e);
                return Ok(());
            }
        };
        let _ = writeln!(csv, "time,{},{},{},{}", m.time_nx, fmt_f64(dt), fmt_f64(m.time_t_end), fmt_f64(e));
        time.push(e);
    }
    let p = out.join("mms.csv");
    std::fs::write(&p, csv)?;
    files.push(p);
    let spacing: Vec<f64> = m.resolutions.iter().map(|&n| 1.0 / n as f64).collect();
    let so = convergence_orders(&spacing, &space);
    let to = convergence_orders(&m.time_steps, &time);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    rep.hard(
        "mms space order",
        so.iter().all(|o| (MMS_SPACE_ORDER.0..=MMS_SPACE_ORDER.1).contains(o)),
        format!(
            "n = {:?}, errors [{}], orders [{}] (window [{}, {}])",
            m.resolutions,
            space.iter().map(|e| format!("{e:.6e}")).collect::<Vec<_>>().join(", "),
            fmt(&so),
            MMS_SPACE_ORDER.0,
            MMS_SPACE_ORDER.1
        ),
    );
    rep.hard(
        "mms time order",
        to.iter().all(|o| *o >= MMS_TIME_ORDER),
        format!(
            "dt = {:?} at n = {}, errors [{}], orders [{}] (minimum {})",
            m.time_steps,
            m.time_nx,
            time.iter().map(|e| format!("{e:.6e}")).collect::<Vec<_>>().join(", "),
            fmt(&to),
            MMS_TIME_ORDER
        ),
    );
    Ok(())
}

fn run_calibration(out: &Path, rep: &mut Report, files: &mut Vec<PathBuf>) -> Result<()> {
    let c = calibration::calibrate(calibration::TRI_SAMPLES)?;
    let p = out.join("calibration.txt");
    std::fs::write(&p, c.report())?;
    files.push(p);
    let tri = c.tri_64.max(c.tri_128).max(c.uux).max(c.wuz);
    rep.hard("trilinear K", tri <= K_TRI, format!("max ratio {tri:.6e}, frozen K = {K_TRI}"));
    let drift = (c.tri_128 - c.tri_64).abs() / c.tri_64;
    rep.hard(
        "trilinear resolution stability",
        drift <= TRI_STABILITY,
        format!("n=64 {:.6e}, n=128 {:.6e}, relative change {drift:.3e}", c.tri_64, c.tri_128),
    );
    rep.hard("envelope C", c.envelope <= C_ENVELOPE, format!("max ratio {:.6e}, frozen {C_ENVELOPE}", c.envelope));
    rep.hard("bridge C", c.bridge <= C_BRIDGE, format!("max ratio {:.6e}, frozen {C_BRIDGE}", c.bridge));
    rep.hard("riccati C", c.riccati <= C_RICCATI, format!("max ratio {:.6e}, frozen {C_RICCATI}", c.riccati));
    for (w, r) in &c.regularity {
        let k = c_regularity(*w);
        rep.hard(format!("regularity {} C", w.name()), *r <= k, format!("max ratio {r:.6e}, frozen {k}"));
    }
    Ok(())
}

/// Runs `cfg`, writing artifacts and `summary.txt` into `cfg.output`.
/// Solver aborts become failed checks; I/O and configuration problems are
/// errors.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let out = cfg.output.clone();
    std::fs::create_dir_all(&out)?;
    let mut rep = Report { scenario: cfg.scenario.name().to_string(), ..Default::default() };
    let mut files = Vec::new();
    match cfg.scenario {
        Scenario::Single => run_single(cfg, &out, &mut rep, &mut files)?,
        Scenario::Ensemble => run_ensemble(cfg, &out, &mut rep, &mut files)?,
        Scenario::Twin => run_twin_scenario(cfg, &out, &mut rep, &mut files)?,
        Scenario::MmsConvergence => run_mms(cfg, &out, &mut rep, &mut files)?,
        Scenario::Calibration => run_calibration(&out, &mut rep, &mut files)?,
    }
    let sp = out.join(SUMMARY_FILE);
    std::fs::write(&sp, rep.render())?;
    files.push(sp);
    Ok(Outcome { report: rep, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub recomputed: Vec<(String, f64)>,
    pub compared: usize,
    pub mismatches: Vec<String>,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.compared > 0 && self.mismatches.is_empty()
    }
}

fn same(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

/// Recomputes [`ledger_values`] from a ledger CSV and compares them with
/// the values recorded for that file in the neighbouring `summary.txt`.
pub fn verify_ledger(path: &Path) -> Result<Verification> {
    let ledger = load_ledger(path)?;
    let recomputed = ledger_values(&ledger);
    let file = path
        .file_name()
        .ok_or_else(|| Error::Diagnostics(format!("{} is not a file", path.display())))?
        .to_string_lossy()
        .into_owned();
    let summary = path.parent().unwrap_or(Path::new(".")).join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&summary)
        .map_err(|e| Error::Diagnostics(format!("cannot read {}: {e}", summary.display())))?;
    let mut recorded = Vec::new();
    for line in text.lines() {
        let mut it = line.split_whitespace();
        if it.next() != Some("value") || it.next() != Some(file.as_str()) {
            continue;
        }
        let (Some(k), Some(v)) = (it.next(), it.next()) else {
            return Err(Error::Diagnostics(format!("malformed summary line {line:?}")));
        };
        let v: f64 = v.parse().map_err(|_| Error::Diagnostics(format!("bad number in summary line {line:?}")))?;
        recorded.push((k.to_string(), v));
    }
    if recorded.is_empty() {
        return Err(Error::Diagnostics(format!("{} records no values for {file}", summary.display())));
    }
    let mut mismatches = Vec::new();
    for (k, v) in &recorded {
        match recomputed.iter().find(|(n, _)| n == k) {
            Some((_, r)) if same(*r, *v) => {}
            Some((_, r)) => mismatches.push(format!("{k}: summary {} recomputed {}", fmt_f64(*v), fmt_f64(*r))),
            None => mismatches.push(format!("{k}: not recomputable from the ledger")),
        }
    }
    for (k, _) in &recomputed {
        if !recorded.iter().any(|(n, _)| n == k) {
            mismatches.push(format!("{k}: missing from summary"));
        }
    }
    Ok(Verification { recomputed, compared: recorded.len(), mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::parse_config;

    fn cfg(extra: &str, dir: &Path) -> ExperimentConfig {
        let text = format!(
            "scenario = \"single\"\noutput = {:?}\ngrid.h = 1.0\ngrid.nx = 12\ngrid.nz = 8\nsolver.dt = 1e-3\nsolver.t_end = 0.02\nsolver.observe_every = 2\n{extra}",
            dir.to_str().unwrap()
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn zero_run_has_zero_ledger_and_passes() {
        let dir = tempfile::tempdir().unwrap();
        let o = run_experiment(&cfg("", dir.path())).unwrap();
        assert!(o.passed(), "{}", o.report.render());
        let l = load_ledger(&dir.path().join("ledger.csv")).unwrap();
        assert_eq!(l.len(), 11);
        for r in l.records() {
            assert!(r.to_vec()[1..].iter().all(|&v| v == 0.0));
        }
        let summary = std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap();
        assert!(summary.contains("schema: hpe2d ledger schema v1"));
        assert!(verify_ledger(&dir.path().join("ledger.csv")).unwrap().passed());
    }

    #[test]
    fn verify_detects_tampering() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("initial.profile = \"random\"\ninitial.seed = 1\nforcing.profile = \"cosine\"\n", dir.path());
        assert!(run_experiment(&c).unwrap().passed());
        let p = dir.path().join("ledger.csv");
        let v = verify_ledger(&p).unwrap();
        assert!(v.passed(), "{:?}", v.mismatches);
        assert!(v.compared > 10);
        let text = std::fs::read_to_string(&p).unwrap();
        let mut lines: Vec<String> = text.lines().map(String::from).collect();
        let mut cells: Vec<String> = lines[4].split(',').map(String::from).collect();
        let x: f64 = cells[12].parse().unwrap();
        cells[12] = fmt_f64(x * (1.0 + 1e-9));
        lines[4] = cells.join(",");
        std::fs::write(&p, lines.join("\n") + "\n").unwrap();
        assert!(!verify_ledger(&p).unwrap().passed());
    }

    #[test]
    fn scaling_ratio_skips_unseparated_samples() {
        let d = |h: Vec<f64>| TwinDiff { h_sq: h, ..Default::default() };
        assert_eq!(scaling_ratios(&d(vec![0.0, 4.0, 9.0]), &d(vec![0.0, 0.04, 0.1])), vec![100.0, 90.0]);
    }
}

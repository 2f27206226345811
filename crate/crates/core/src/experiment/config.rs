//! Experiment documents: TOML with dotted namespaces (`grid.nx`,
//! `solver.dt`, `robin.alpha1`, ...). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::calibration::C_ENVELOPE;
use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid, RobinParams};
use crate::profiles::{Component, HeatProfile, InitialProfile};
use crate::solver::{AdvectionMode, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Single,
    Ensemble,
    Twin,
    MmsConvergence,
    Calibration,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Single => "single",
            Scenario::Ensemble => "ensemble",
            Scenario::Twin => "twin",
            Scenario::MmsConvergence => "mms_convergence",
            Scenario::Calibration => "calibration",
        }
    }

    fn needs_run(&self) -> bool {
        matches!(self, Scenario::Single | Scenario::Ensemble | Scenario::Twin)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDoc {
    scenario: Option<Scenario>,
    output: Option<PathBuf>,
    workers: Option<usize>,
    #[serde(default)]
    grid: RawGrid,
    #[serde(default)]
    robin: RawRobin,
    #[serde(default)]
    solver: RawSolver,
    initial: Option<RawInitial>,
    forcing: Option<RawForcing>,
    ensemble: Option<RawEnsemble>,
    twin: Option<RawTwin>,
    mms: Option<RawMms>,
    checks: Option<RawChecks>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    h: Option<f64>,
    nx: Option<usize>,
    nz: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobin {
    alpha1: Option<f64>,
    alpha2: Option<f64>,
    alpha3: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    dt: Option<f64>,
    t_end: Option<f64>,
    theta_scheme: Option<f64>,
    advection: Option<AdvectionMode>,
    coriolis: Option<bool>,
    baroclinic: Option<bool>,
    tol_constraint: Option<f64>,
    observe_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ProfileName {
    Zero,
    Eigenmode,
    Shear,
    Random,
    Snapshot,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    profile: ProfileName,
    amplitude: Option<f64>,
    component: Option<Component>,
    m: Option<u32>,
    n: Option<u32>,
    seed: Option<u64>,
    path: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum HeatName {
    Zero,
    Cosine,
    Surface,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForcing {
    profile: HeatName,
    amplitude: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    amplitudes: Vec<f64>,
    transient: f64,
    decay_transient: Option<f64>,
    decay_factor: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTwin {
    delta: f64,
    seed: u64,
    constant: Option<f64>,
    scaling: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMms {
    resolutions: Option<Vec<usize>>,
    dt_factor: Option<f64>,
    t_end: Option<f64>,
    time_nx: Option<usize>,
    time_t_end: Option<f64>,
    time_steps: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChecks {
    certificate_cap: Option<f64>,
    trace_tolerance: Option<f64>,
}

/// Where the initial state comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Profile { profile: InitialProfile, amplitude: f64 },
    Snapshot { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForcingSpec {
    pub profile: HeatProfile,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    /// Amplitudes applied to the initial profile, one member each.
    pub amplitudes: Vec<f64>,
    /// Start of the post-transient window for the band check.
    pub transient: f64,
    /// Start of the window for the decay check (runs with zero heating).
    pub decay_transient: f64,
    pub decay_factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwinSpec {
    pub delta: f64,
    pub seed: u64,
    pub constant: f64,
    /// Also run the pair at `delta / 10` and check the quadratic scaling.
    pub scaling: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmsSpec {
    pub resolutions: Vec<usize>,
    /// Spatial study step `dt = dt_factor / n`.
    pub dt_factor: f64,
    pub t_end: f64,
    pub time_nx: usize,
    pub time_t_end: f64,
    pub time_steps: Vec<f64>,
}

impl Default for MmsSpec {
    fn default() -> Self {
        Self {
            resolutions: vec![32, 64, 128],
            dt_factor: 0.25,
            t_end: 0.2,
            time_nx: 128,
            time_t_end: 0.8,
            time_steps: vec![0.1, 0.05, 0.025],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChecksSpec {
    pub certificate_cap: f64,
    /// Relative slack in `|f(.,0)| <= sqrt(h) |f_z|`.
    pub trace_tolerance: f64,
}

impl Default for ChecksSpec {
    fn default() -> Self {
        Self { certificate_cap: 1e12, trace_tolerance: 0.05 }
    }
}

/// Validated experiment with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub output: PathBuf,
    pub workers: Option<usize>,
    pub h: f64,
    /// Zero for scenarios that choose their own resolution.
    pub nx: usize,
    pub nz: usize,
    pub solver: SolverConfig,
    pub initial: InitialSpec,
    pub forcing: ForcingSpec,
    pub ensemble: Option<EnsembleSpec>,
    pub twin: Option<TwinSpec>,
    pub mms: MmsSpec,
    pub checks: ChecksSpec,
}

impl ExperimentConfig {
    pub fn robin(&self) -> RobinParams {
        self.solver.robin
    }

    pub fn grid(&self) -> Result<Grid> {
        build_grid(self.h, self.nx, self.nz)
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required key `{key}`"))
}

fn inconsistent(msg: impl Into<String>) -> Error {
    Error::Config(format!("inconsistent scenario fields: {}", msg.into()))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("`{key}` must be positive, got {v}")))
    }
}

/// Parses and validates a document. Relative paths stay relative.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawDoc = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    let scenario = raw.scenario.ok_or_else(|| missing("scenario"))?;

    let h = raw.grid.h.ok_or_else(|| missing("grid.h"))?;
    let (nx, nz) = if scenario.needs_run() {
        (raw.grid.nx.ok_or_else(|| missing("grid.nx"))?, raw.grid.nz.ok_or_else(|| missing("grid.nz"))?)
    } else {
        (raw.grid.nx.unwrap_or(0), raw.grid.nz.unwrap_or(0))
    };
    if scenario.needs_run() {
        build_grid(h, nx, nz).map_err(|e| Error::Config(e.to_string()))?;
    } else {
        positive("grid.h", h)?;
    }

    let robin = RobinParams::new(
        raw.robin.alpha1.unwrap_or(0.0),
        raw.robin.alpha2.unwrap_or(0.0),
        raw.robin.alpha3.unwrap_or(0.0),
    )
    .map_err(|e| Error::Config(e.to_string()))?;

    let d = SolverConfig::default();
    let s = &raw.solver;
    let (dt, t_end) = if scenario.needs_run() {
        (s.dt.ok_or_else(|| missing("solver.dt"))?, s.t_end.ok_or_else(|| missing("solver.t_end"))?)
    } else {
        (s.dt.unwrap_or(d.dt), s.t_end.unwrap_or(d.t_end))
    };
    let solver = SolverConfig {
        dt,
        t_end,
        robin,
        theta_scheme: s.theta_scheme.unwrap_or(d.theta_scheme),
        advection: s.advection.unwrap_or(d.advection),
        coriolis: s.coriolis.unwrap_or(d.coriolis),
        baroclinic: s.baroclinic.unwrap_or(d.baroclinic),
        tol_constraint: s.tol_constraint.unwrap_or(d.tol_constraint),
        observe_every: s.observe_every.unwrap_or(d.observe_every),
    };
    solver.validate().map_err(|e| Error::Config(e.to_string()))?;

    let initial = match raw.initial {
        None => InitialSpec::Profile { profile: InitialProfile::Zero, amplitude: 1.0 },
        Some(i) => initial_spec(i)?,
    };

    let forcing = match raw.forcing {
        None => ForcingSpec { profile: HeatProfile::Zero, amplitude: 1.0 },
        Some(f) => {
            let amplitude = f.amplitude.unwrap_or(1.0);
            if !amplitude.is_finite() {
                return Err(Error::Config("`forcing.amplitude` must be finite".into()));
            }
            let profile = match f.profile {
                HeatName::Zero => HeatProfile::Zero,
                HeatName::Cosine => HeatProfile::Cosine,
                HeatName::Surface => HeatProfile::Surface,
            };
            ForcingSpec { profile, amplitude }
        }
    };

    let ensemble = match (scenario, raw.ensemble) {
        (Scenario::Ensemble, None) => return Err(missing("ensemble.amplitudes")),
        (Scenario::Ensemble, Some(e)) => {
            if e.amplitudes.len() < 2 {
                return Err(inconsistent("ensemble.amplitudes needs at least two members"));
            }
            for &a in &e.amplitudes {
                positive("ensemble.amplitudes", a)?;
            }
            if !(e.transient >= 0.0 && e.transient < t_end) {
                return Err(inconsistent(format!("ensemble.transient {} must lie in [0, t_end)", e.transient)));
            }
            let decay_transient = e.decay_transient.unwrap_or(e.transient);
            if !(decay_transient >= 0.0 && decay_transient < t_end) {
                return Err(inconsistent(format!("ensemble.decay_transient {decay_transient} must lie in [0, t_end)")));
            }
            if matches!(initial, InitialSpec::Snapshot { .. }) {
                return Err(inconsistent("ensemble members scale a named profile, not a snapshot"));
            }
            Some(EnsembleSpec {
                amplitudes: e.amplitudes,
                transient: e.transient,
                decay_transient,
                decay_factor: positive("ensemble.decay_factor", e.decay_factor.unwrap_or(1e-3))?,
            })
        }
        (_, Some(_)) => return Err(inconsistent(format!("[ensemble] given for scenario {}", scenario.name()))),
        (_, None) => None,
    };

    let twin = match (scenario, raw.twin) {
        (Scenario::Twin, None) => return Err(missing("twin.delta")),
        (Scenario::Twin, Some(t)) => Some(TwinSpec {
            delta: positive("twin.delta", t.delta)?,
            seed: t.seed,
            constant: positive("twin.constant", t.constant.unwrap_or(C_ENVELOPE))?,
            scaling: t.scaling.unwrap_or(true),
        }),
        (_, Some(_)) => return Err(inconsistent(format!("[twin] given for scenario {}", scenario.name()))),
        (_, None) => None,
    };

    let mms = match raw.mms {
        Some(_) if scenario != Scenario::MmsConvergence => {
            return Err(inconsistent(format!("[mms] given for scenario {}", scenario.name())))
        }
        None => MmsSpec::default(),
        Some(m) => {
            let d = MmsSpec::default();
            let mms = MmsSpec {
                resolutions: m.resolutions.unwrap_or(d.resolutions),
                dt_factor: m.dt_factor.unwrap_or(d.dt_factor),
                t_end: m.t_end.unwrap_or(d.t_end),
                time_nx: m.time_nx.unwrap_or(d.time_nx),
                time_t_end: m.time_t_end.unwrap_or(d.time_t_end),
                time_steps: m.time_steps.unwrap_or(d.time_steps),
            };
            if mms.resolutions.len() < 2 || mms.time_steps.len() < 2 {
                return Err(inconsistent("mms needs at least two resolutions and two time steps"));
            }
            positive("mms.dt_factor", mms.dt_factor)?;
            positive("mms.t_end", mms.t_end)?;
            positive("mms.time_t_end", mms.time_t_end)?;
            for &dt in &mms.time_steps {
                positive("mms.time_steps", dt)?;
            }
            for &n in mms.resolutions.iter().chain([&mms.time_nx]) {
                build_grid(h, n, n).map_err(|e| Error::Config(e.to_string()))?;
            }
            mms
        }
    };

    let checks = match raw.checks {
        None => ChecksSpec::default(),
        Some(c) => {
            let d = ChecksSpec::default();
            ChecksSpec {
                certificate_cap: positive("checks.certificate_cap", c.certificate_cap.unwrap_or(d.certificate_cap))?,
                trace_tolerance: c.trace_tolerance.unwrap_or(d.trace_tolerance).max(0.0),
            }
        }
    };

    if raw.workers == Some(0) {
        return Err(Error::Config("`workers` must be at least 1".into()));
    }

    Ok(ExperimentConfig {
        scenario,
        output: raw.output.unwrap_or_else(|| PathBuf::from("hpe2d-out")),
        workers: raw.workers,
        h,
        nx,
        nz,
        solver,
        initial,
        forcing,
        ensemble,
        twin,
        mms,
        checks,
    })
}

fn initial_spec(i: RawInitial) -> Result<InitialSpec> {
    let amplitude = i.amplitude.unwrap_or(1.0);
    if !amplitude.is_finite() {
        return Err(Error::Config("`initial.amplitude` must be finite".into()));
    }
    let extra = |keys: &[(&str, bool)]| -> Result<()> {
        match keys.iter().find(|(_, set)| *set) {
            Some((k, _)) => Err(inconsistent(format!("`initial.{k}` does not apply to this profile"))),
            None => Ok(()),
        }
    };
    let (c, m, n, seed, path) = (i.component.is_some(), i.m.is_some(), i.n.is_some(), i.seed.is_some(), i.path.is_some());
    let profile = match i.profile {
        ProfileName::Zero => {
            extra(&[("component", c), ("m", m), ("n", n), ("seed", seed), ("path", path)])?;
            InitialProfile::Zero
        }
        ProfileName::Shear => {
            extra(&[("component", c), ("m", m), ("n", n), ("seed", seed), ("path", path)])?;
            InitialProfile::Shear
        }
        ProfileName::Eigenmode => {
            extra(&[("seed", seed), ("path", path)])?;
            InitialProfile::Eigenmode {
                component: i.component.ok_or_else(|| missing("initial.component"))?,
                m: i.m.ok_or_else(|| missing("initial.m"))?,
                n: i.n.ok_or_else(|| missing("initial.n"))?,
            }
        }
        ProfileName::Random => {
            extra(&[("component", c), ("m", m), ("n", n), ("path", path)])?;
            InitialProfile::Random { seed: i.seed.ok_or_else(|| missing("initial.seed"))? }
        }
        ProfileName::Snapshot => {
            extra(&[("component", c), ("m", m), ("n", n), ("seed", seed), ("amplitude", i.amplitude.is_some())])?;
            return Ok(InitialSpec::Snapshot { path: i.path.ok_or_else(|| missing("initial.path"))? });
        }
    };
    Ok(InitialSpec::Profile { profile, amplitude })
}

/// Reads a document from disk; relative output and snapshot paths are
/// resolved against the document's directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if cfg.output.is_relative() {
        cfg.output = base.join(&cfg.output);
    }
    if let InitialSpec::Snapshot { path } = &mut cfg.initial {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "scenario = \"single\"\ngrid.h = 1.0\ngrid.nx = 64\ngrid.nz = 64\nsolver.dt = 1e-3\nsolver.t_end = 0.1\n";

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.scenario, Scenario::Single);
        assert_eq!((c.h, c.nx, c.nz), (1.0, 64, 64));
        let d = SolverConfig::default();
        assert_eq!(c.solver, SolverConfig { dt: 1e-3, t_end: 0.1, ..d });
        assert_eq!(c.initial, InitialSpec::Profile { profile: InitialProfile::Zero, amplitude: 1.0 });
        assert_eq!(c.forcing.profile, HeatProfile::Zero);
        assert_eq!(c.checks, ChecksSpec::default());
        assert_eq!(c.output, PathBuf::from("hpe2d-out"));
    }

    #[test]
    fn table_and_dotted_forms_agree() {
        let tables = "scenario = \"single\"\n[grid]\nh = 1.0\nnx = 64\nnz = 64\n[solver]\ndt = 1e-3\nt_end = 0.1\n";
        assert_eq!(parse_config(tables).unwrap(), parse_config(MINIMAL).unwrap());
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config(&format!("{MINIMAL}solver.viscosty = 2.0\n")).unwrap_err().to_string();
        assert!(e.contains("viscosty"), "{e}");
        let e = parse_config(&format!("{MINIMAL}viscosty = 2.0\n")).unwrap_err().to_string();
        assert!(e.contains("viscosty"), "{e}");
    }

    #[test]
    fn missing_and_mistyped_keys() {
        let e = parse_config("scenario = \"single\"\ngrid.h = 1.0\ngrid.nz = 8\nsolver.dt = 1e-3\nsolver.t_end = 0.1\n")
            .unwrap_err()
            .to_string();
        assert!(e.contains("grid.nx"), "{e}");
        let e = parse_config(&MINIMAL.replace("grid.nx = 64", "grid.nx = \"64\"")).unwrap_err().to_string();
        assert!(e.contains("invalid type"), "{e}");
        assert!(parse_config(&MINIMAL.replace("single", "sweep")).is_err());
    }

    #[test]
    fn scenario_fields_must_be_consistent() {
        let twin = MINIMAL.replace("single", "twin");
        assert!(parse_config(&twin).unwrap_err().to_string().contains("twin.delta"));
        let ok = parse_config(&format!("{twin}twin.delta = 1e-4\ntwin.seed = 7\n")).unwrap();
        assert_eq!(ok.twin, Some(TwinSpec { delta: 1e-4, seed: 7, constant: C_ENVELOPE, scaling: true }));
        assert!(parse_config(&format!("{MINIMAL}twin.delta = 1e-4\ntwin.seed = 7\n")).is_err());
        assert!(parse_config(&format!("{twin}twin.delta = 1e-4\n")).is_err());
        let e = parse_config(&format!("{MINIMAL}initial.profile = \"random\"\n")).unwrap_err().to_string();
        assert!(e.contains("initial.seed"), "{e}");
        assert!(parse_config(&format!("{MINIMAL}initial.profile = \"shear\"\ninitial.seed = 3\n")).is_err());
        let ens = MINIMAL.replace("single", "ensemble");
        assert!(parse_config(&format!("{ens}ensemble.amplitudes = [1.0]\nensemble.transient = 0.05\n")).is_err());
        assert!(parse_config(&format!("{ens}ensemble.amplitudes = [1.0, 2.0]\nensemble.transient = 0.5\n")).is_err());
        assert!(parse_config(&format!("{ens}ensemble.amplitudes = [1.0, 2.0]\nensemble.transient = 0.05\n")).is_ok());
    }

    #[test]
    fn twin_perturbation_is_pinned() {
        let c = parse_config(&format!(
            "{}twin.delta = 1e-4\ntwin.seed = 7\n",
            MINIMAL.replace("single", "twin").replace("nx = 64", "nx = 16").replace("nz = 64", "nz = 8")
        ))
        .unwrap();
        let g = c.grid().unwrap();
        let t = c.twin.unwrap();
        let zero = crate::State::zeros(&g, &c.robin());
        let a = crate::twin::perturbed(&zero, t.delta, t.seed).unwrap();
        let b = crate::twin::perturbed(&zero, t.delta, t.seed).unwrap();
        assert_eq!(a, b);
        // ChaCha8 draws are platform independent; only libm rounding may differ.
        let j = g.idx(5, 3);
        let pinned = [-1.6069332736361702e-5, -1.5286499014075852e-5, 1.1429987878728637e-5];
        for (f, p) in [&a.u, &a.v, &a.theta].into_iter().zip(pinned) {
            assert!((f.values()[j] - p).abs() <= 1e-12 * p.abs(), "{} vs {p}", f.values()[j]);
        }
    }

    #[test]
    fn mms_needs_only_depth() {
        let c = parse_config("scenario = \"mms_convergence\"\ngrid.h = 1.0\nrobin.alpha1 = 0.5\n").unwrap();
        assert_eq!(c.mms, MmsSpec::default());
        assert_eq!(c.robin().alpha1, 0.5);
        let c = parse_config("scenario = \"mms_convergence\"\ngrid.h = 1.0\nmms.resolutions = [8, 16]\n").unwrap();
        assert_eq!(c.mms.resolutions, vec![8, 16]);
    }
}

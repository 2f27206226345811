//! Named initial conditions, heat sources, seeded random fields and the
//! manufactured solution used for convergence studies.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{BcClass, ScalarField};
use crate::grid::{Grid, RobinParams};
use crate::ops;
use crate::solver::{SourceTerms, State};

/// Which prognostic field a per-field profile targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    U,
    V,
    Theta,
}

/// Named initial profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    Zero,
    /// Diffusion eigenmode of one field (exact for zero Robin coefficient):
    /// `sin(m pi x) cos((n + 1/2) pi z / h)` for `u`, `v`;
    /// `cos(m pi x) cos(n pi z / h)` for `theta`.
    Eigenmode { component: Component, m: u32, n: u32 },
    /// `sin(pi x) (z + h)(z + h/3)` in `u`, projected to zero depth average.
    Shear,
    /// Smooth random Fourier sums in all three fields.
    Random { seed: u64 },
}

impl InitialProfile {
    pub fn build(&self, grid: &Grid, robin: &RobinParams, amplitude: f64) -> Result<State> {
        let h = grid.h();
        let mut state = State::zeros(grid, robin);
        match *self {
            InitialProfile::Zero => {}
            InitialProfile::Eigenmode { component, m, n } => {
                let (m, n) = (m as f64, n as f64);
                match component {
                    Component::U | Component::V => {
                        let f = ScalarField::from_fn(grid, BcClass::Free, |x, z| {
                            amplitude * (m * PI * x).sin() * ((n + 0.5) * PI * z / h).cos()
                        });
                        if component == Component::U {
                            state.u = f.with_bc(state.u.bc());
                            state.u.enforce_dirichlet();
                            ops::project_barotropic(&mut state.u);
                        } else {
                            state.v = f.with_bc(state.v.bc());
                            state.v.enforce_dirichlet();
                        }
                    }
                    Component::Theta => {
                        state.theta = ScalarField::from_fn(grid, state.theta.bc(), |x, z| {
                            amplitude * (m * PI * x).cos() * (n * PI * z / h).cos()
                        });
                    }
                }
            }
            InitialProfile::Shear => {
                state.u = ScalarField::from_fn(grid, state.u.bc(), |x, z| {
                    amplitude * (PI * x).sin() * (z + h) * (z + h / 3.0)
                });
                state.u.enforce_dirichlet();
                ops::project_barotropic(&mut state.u);
            }
            InitialProfile::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                state.u = random_velocity(grid, state.u.bc(), &mut rng, amplitude, true);
                state.v = random_velocity(grid, state.v.bc(), &mut rng, amplitude, false);
                state.theta = random_smooth(grid, state.theta.bc(), &mut rng, amplitude);
            }
        }
        Ok(state)
    }
}

const MODES: usize = 4;

/// Smooth field vanishing on the walls and the bottom, optionally projected
/// to zero depth average. Coefficients decay like `1 / (m^2 + n^2)`.
pub fn random_velocity(grid: &Grid, bc: BcClass, rng: &mut ChaCha8Rng, amplitude: f64, barotropic: bool) -> ScalarField {
    let h = grid.h();
    let mut terms = Vec::with_capacity(MODES * MODES);
    for m in 1..=MODES {
        for n in 1..=MODES {
            let (mf, nf) = (m as f64, n as f64);
            let a = amplitude * rng.gen_range(-1.0..1.0) / (mf * mf + nf * nf);
            terms.push((a, move |x: f64| (mf * PI * x).sin(), move |z: f64| ((nf - 0.5) * PI * (z + h) / h).sin()));
        }
    }
    let mut f = separable(grid, bc, &terms);
    f.enforce_dirichlet();
    if barotropic {
        ops::project_barotropic(&mut f);
    }
    f
}

/// Smooth field with random phases and `1 / (1 + m^2 + n^2)` decay.
pub fn random_smooth(grid: &Grid, bc: BcClass, rng: &mut ChaCha8Rng, amplitude: f64) -> ScalarField {
    let h = grid.h();
    let mut terms = Vec::with_capacity((MODES + 1) * (MODES + 1));
    for m in 0..=MODES {
        for n in 0..=MODES {
            let (mf, nf) = (m as f64, n as f64);
            let a = amplitude * rng.gen_range(-1.0..1.0) / (1.0 + mf * mf + nf * nf);
            let px = rng.gen_range(0.0..2.0 * PI);
            let pz = rng.gen_range(0.0..2.0 * PI);
            terms.push((a, move |x: f64| (mf * PI * x + px).cos(), move |z: f64| (nf * PI * z / h + pz).cos()));
        }
    }
    separable(grid, bc, &terms)
}

#[allow(clippy::needless_range_loop)]
fn separable<X: Fn(f64) -> f64, Z: Fn(f64) -> f64>(grid: &Grid, bc: BcClass, terms: &[(f64, X, Z)]) -> ScalarField {
    let xs: Vec<Vec<f64>> = terms.iter().map(|(_, fx, _)| (0..grid.px()).map(|i| fx(grid.x(i))).collect()).collect();
    let zs: Vec<Vec<f64>> = terms.iter().map(|(_, _, fz)| (0..grid.pz()).map(|k| fz(grid.z(k))).collect()).collect();
    let mut f = ScalarField::zeros(grid, bc);
    for k in 0..grid.pz() {
        for i in 0..grid.px() {
            let s: f64 = terms.iter().enumerate().map(|(t, (a, _, _))| a * xs[t][i] * zs[t][k]).sum();
            f.set(i, k, s);
        }
    }
    f
}

/// Named heat sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeatProfile {
    Zero,
    /// `cos(pi x) cos(pi z / h)`.
    Cosine,
    /// `cos(pi x) (1 + z / h)`: heating concentrated near the surface.
    Surface,
}

impl HeatProfile {
    pub fn build(&self, grid: &Grid, amplitude: f64) -> ScalarField {
        let h = grid.h();
        match self {
            HeatProfile::Zero => ScalarField::zeros(grid, BcClass::Free),
            HeatProfile::Cosine => ScalarField::from_fn(grid, BcClass::Free, |x, z| {
                amplitude * (PI * x).cos() * (PI * z / h).cos()
            }),
            HeatProfile::Surface => {
                ScalarField::from_fn(grid, BcClass::Free, |x, z| amplitude * (PI * x).cos() * (1.0 + z / h))
            }
        }
    }
}

/// Smooth time-dependent exact solution with the physical boundary data and
/// zero depth average in `u`, plus the sources that make it exact.
///
/// `u = A a(t) sin(pi x) P1(z)`, `v = B b(t) sin(pi x) P2(z)`,
/// `theta = C c(t) cos(pi x) T(z)`, `q = E a(t) cos(pi x)` with
/// `P(z) = cos(pi z/h) + cos(2 pi z/h) - (alpha h/pi) sin(2 pi z/h)` and
/// `T(z) = cos(pi z/h) + (2 h alpha3/pi) cos(pi (z+h)/(2h))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Manufactured {
    pub h: f64,
    pub robin: RobinParams,
    pub amp_u: f64,
    pub amp_v: f64,
    pub amp_theta: f64,
    pub amp_q: f64,
}

impl Manufactured {
    pub fn new(h: f64, robin: RobinParams) -> Self {
        Self { h, robin, amp_u: 0.5, amp_v: 0.5, amp_theta: 0.5, amp_q: 0.3 }
    }

    fn a(t: f64) -> (f64, f64) {
        ((2.0 * t).cos(), -2.0 * (2.0 * t).sin())
    }

    fn b(t: f64) -> (f64, f64) {
        ((-t).exp(), -(-t).exp())
    }

    fn c(t: f64) -> (f64, f64) {
        (1.0 + t, 1.0)
    }

    /// `P`, `P'`, `P''` and `int_z^0 P` for the velocity vertical profile.
    fn p(&self, alpha: f64, z: f64) -> [f64; 4] {
        let h = self.h;
        let k1 = PI / h;
        let k2 = 2.0 * PI / h;
        let g = alpha * h / PI;
        let (s1, c1) = (k1 * z).sin_cos();
        let (s2, c2) = (k2 * z).sin_cos();
        let p = c1 + c2 - g * s2;
        let dp = -k1 * s1 - k2 * s2 - g * k2 * c2;
        let ddp = -k1 * k1 * c1 - k2 * k2 * c2 + g * k2 * k2 * s2;
        let anti = |s1: f64, s2: f64, c2: f64| s1 / k1 + s2 / k2 + g * c2 / k2;
        let int = anti(0.0, 0.0, 1.0) - anti(s1, s2, c2);
        [p, dp, ddp, int]
    }

    /// `T`, `T'`, `T''` and `int_z^0 T`.
    fn tz(&self, z: f64) -> [f64; 4] {
        let h = self.h;
        let a3 = self.robin.alpha3;
        let k1 = PI / h;
        let kh = PI / (2.0 * h);
        let d = 2.0 * h * a3 / PI;
        let (s1, c1) = (k1 * z).sin_cos();
        let (sh, ch) = (kh * (z + h)).sin_cos();
        let t = c1 + d * ch;
        let dt = -k1 * s1 - d * kh * sh;
        let ddt = -k1 * k1 * c1 - d * kh * kh * ch;
        let anti = |s1: f64, sh: f64| s1 / k1 + d * sh / kh;
        let int = anti(0.0, (kh * h).sin()) - anti(s1, sh);
        [t, dt, ddt, int]
    }

    pub fn exact(&self, t: f64, x: f64, z: f64) -> [f64; 3] {
        let (sx, cx) = (PI * x).sin_cos();
        let pu = self.p(self.robin.alpha1, z)[0];
        let pv = self.p(self.robin.alpha2, z)[0];
        let tt = self.tz(z)[0];
        [
            self.amp_u * Self::a(t).0 * sx * pu,
            self.amp_v * Self::b(t).0 * sx * pv,
            self.amp_theta * Self::c(t).0 * cx * tt,
        ]
    }

    pub fn exact_q(&self, t: f64, x: f64) -> f64 {
        self.amp_q * Self::a(t).0 * (PI * x).cos()
    }

    pub fn exact_state(&self, grid: &Grid, t: f64) -> Result<State> {
        if (grid.h() - self.h).abs() > 1e-14 * self.h {
            return Err(Error::GridMismatch("manufactured solution depth differs from grid".into()));
        }
        let f = |c: usize| ScalarField::from_fn(grid, BcClass::Free, |x, z| self.exact(t, x, z)[c]);
        let mut s = State::new(f(0), f(1), f(2), &self.robin)?;
        // discrete projection removes the O(dz^2) trapezoid residual
        ops::project_barotropic(&mut s.u);
        s.t = t;
        Ok(s)
    }
}

impl SourceTerms for Manufactured {
    fn source(&self, t: f64, x: f64, z: f64) -> [f64; 3] {
        let (sx, cx) = (PI * x).sin_cos();
        let (a, da) = Self::a(t);
        let (b, db) = Self::b(t);
        let (c, dc) = Self::c(t);
        let [pu, dpu, ddpu, ipu] = self.p(self.robin.alpha1, z);
        let [pv, dpv, ddpv, _] = self.p(self.robin.alpha2, z);
        let [tt, dtt, ddtt, itt] = self.tz(z);
        let (au, av, at) = (self.amp_u, self.amp_v, self.amp_theta);

        let u = au * a * sx * pu;
        let u_t = au * da * sx * pu;
        let u_x = au * a * PI * cx * pu;
        let u_z = au * a * sx * dpu;
        let lap_u = au * a * sx * (ddpu - PI * PI * pu);
        let w = au * a * PI * cx * ipu;

        let v = av * b * sx * pv;
        let v_t = av * db * sx * pv;
        let v_x = av * b * PI * cx * pv;
        let v_z = av * b * sx * dpv;
        let lap_v = av * b * sx * (ddpv - PI * PI * pv);

        let th_t = at * dc * cx * tt;
        let th_x = -at * c * PI * sx * tt;
        let th_z = at * c * cx * dtt;
        let lap_th = at * c * cx * (ddtt - PI * PI * tt);
        let int_th_x = -at * c * PI * sx * itt;

        let q_x = -self.amp_q * a * PI * sx;

        [
            u_t - lap_u + u * u_x + w * u_z + q_x + int_th_x - v,
            v_t - lap_v + u * v_x + w * v_z + u,
            th_t - lap_th + u * th_x + w * th_z,
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;

    #[test]
    fn shear_and_random_satisfy_constraint() {
        let g = build_grid(1.0, 16, 12).unwrap();
        let r = RobinParams::new(0.5, 0.5, 1.0).unwrap();
        for p in [InitialProfile::Shear, InitialProfile::Random { seed: 3 }] {
            let s = p.build(&g, &r, 2.0).unwrap();
            assert!(s.barotropic_residual() < 1e-15);
            assert_eq!(s.u.bottom_trace().max_abs(), 0.0);
            assert_eq!(s.v.bottom_trace().max_abs(), 0.0);
        }
    }

    #[test]
    fn random_is_reproducible() {
        let g = build_grid(1.0, 8, 8).unwrap();
        let r = RobinParams::zero();
        let a = InitialProfile::Random { seed: 7 }.build(&g, &r, 1.0).unwrap();
        let b = InitialProfile::Random { seed: 7 }.build(&g, &r, 1.0).unwrap();
        let c = InitialProfile::Random { seed: 8 }.build(&g, &r, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.u, c.u);
    }

    #[test]
    fn manufactured_boundary_data() {
        let h = 1.3;
        let m = Manufactured::new(h, RobinParams::new(0.7, 1.1, 0.4).unwrap());
        for &t in &[0.0, 0.37] {
            for &x in &[0.0, 0.3, 1.0] {
                let [_, _, _] = m.exact(t, x, 0.0);
                // Robin at the surface
                let e = 1e-6;
                let d = |c: usize| (m.exact(t, x, 0.0)[c] - m.exact(t, x, -e)[c]) / e;
                let top = m.exact(t, x, 0.0);
                assert!((d(0) + 0.7 * top[0]).abs() < 1e-5);
                assert!((d(1) + 1.1 * top[1]).abs() < 1e-5);
                assert!((d(2) + 0.4 * top[2]).abs() < 1e-5);
                let bot = m.exact(t, x, -h);
                assert!(bot[0].abs() < 1e-14 && bot[1].abs() < 1e-14);
                let db = (m.exact(t, x, -h + e)[2] - bot[2]) / e;
                assert!(db.abs() < 1e-5);
            }
            // zero depth integral of u, by Simpson on a fine grid
            let n = 2000;
            let dz = h / n as f64;
            let s: f64 = (0..=n)
                .map(|k| {
                    let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                    w * m.exact(t, 0.4, -h + k as f64 * dz)[0]
                })
                .sum::<f64>()
                * dz
                / 3.0;
            assert!(s.abs() < 1e-12, "{s}");
        }
    }

    /// Sources recomputed by central finite differences of the exact fields.
    #[test]
    fn manufactured_sources_match_finite_differences() {
        let h = 0.9;
        let m = Manufactured::new(h, RobinParams::new(0.3, 0.0, 0.8).unwrap());
        let e = 1e-4;
        let f = |t: f64, x: f64, z: f64| m.exact(t, x, z);
        let quad = |g: &dyn Fn(f64) -> f64, z: f64| {
            // int_z^0 g by composite Simpson
            let n = 400;
            let dz = -z / n as f64;
            (0..=n)
                .map(|k| {
                    let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                    w * g(z + k as f64 * dz)
                })
                .sum::<f64>()
                * dz
                / 3.0
        };
        for &(t, x, z) in &[(0.1, 0.3, -0.2), (0.5, 0.77, -0.6), (0.0, 0.5, -0.45)] {
            let d = |c: usize, dt: f64, dx: f64, dz: f64| (f(t + dt, x + dx, z + dz)[c] - f(t - dt, x - dx, z - dz)[c]) / (2.0 * e);
            let lap = |c: usize| {
                let c0 = f(t, x, z)[c];
                (f(t, x + e, z)[c] + f(t, x - e, z)[c] + f(t, x, z + e)[c] + f(t, x, z - e)[c] - 4.0 * c0) / (e * e)
            };
            let [u, v, _] = f(t, x, z);
            let ux_at = |zz: f64| (f(t, x + e, zz)[0] - f(t, x - e, zz)[0]) / (2.0 * e);
            let thx_at = |zz: f64| (f(t, x + e, zz)[2] - f(t, x - e, zz)[2]) / (2.0 * e);
            let w = quad(&ux_at, z);
            let ith = quad(&thx_at, z);
            let qx = (m.exact_q(t, x + e) - m.exact_q(t, x - e)) / (2.0 * e);
            let su = d(0, e, 0.0, 0.0) - lap(0) + u * d(0, 0.0, e, 0.0) + w * d(0, 0.0, 0.0, e) + qx + ith - v;
            let sv = d(1, e, 0.0, 0.0) - lap(1) + u * d(1, 0.0, e, 0.0) + w * d(1, 0.0, 0.0, e) + u;
            let st = d(2, e, 0.0, 0.0) - lap(2) + u * d(2, 0.0, e, 0.0) + w * d(2, 0.0, 0.0, e);
            let s = m.source(t, x, z);
            assert!((s[0] - su).abs() < 1e-5, "{} vs {su}", s[0]);
            assert!((s[1] - sv).abs() < 1e-5, "{} vs {sv}", s[1]);
            assert!((s[2] - st).abs() < 1e-5, "{} vs {st}", s[2]);
        }
    }
}

//! Difference operators, vertical integrals, norms and trilinear forms.
//!
//! Every quadrature uses the tensor trapezoid weights of [`Grid::wx`] and
//! [`Grid::wz`]. Gradient norms are evaluated on lattice faces so that
//! `-<laplacian(f), f> = |grad f|^2 + alpha |f(., 0)|^2` holds exactly for
//! the closed discrete Laplacian; this is what lets the energy budgets
//! close to time-discretization error.

use crate::error::{Error, Result};
use crate::field::{BcClass, ProfileField, ScalarField};
use crate::grid::Grid;

fn check_finite(f: &ScalarField) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter("non-finite input field".into()))
    }
}

fn check_grids(fields: &[&ScalarField]) -> Result<()> {
    for pair in fields.windows(2) {
        pair[0].check_same_grid(pair[1])?;
    }
    Ok(())
}

/// `df/dx`: centered in the interior, one-sided second order on the walls.
/// `Theta` fields return the Neumann value 0 on the walls.
pub fn ddx(f: &ScalarField) -> Result<ScalarField> {
    check_finite(f)?;
    let g = *f.grid();
    let (n, dx) = (g.nx(), g.dx());
    let v = f.values();
    let mut out = ScalarField::zeros(&g, BcClass::Free);
    let o = out.values_mut();
    let neumann = matches!(f.bc(), BcClass::Theta { .. });
    for k in 0..g.pz() {
        let r = g.idx(0, k);
        for i in 1..n {
            o[r + i] = (v[r + i + 1] - v[r + i - 1]) / (2.0 * dx);
        }
        if neumann {
            o[r] = 0.0;
            o[r + n] = 0.0;
        } else {
            o[r] = (-3.0 * v[r] + 4.0 * v[r + 1] - v[r + 2]) / (2.0 * dx);
            o[r + n] = (3.0 * v[r + n] - 4.0 * v[r + n - 1] + v[r + n - 2]) / (2.0 * dx);
        }
    }
    Ok(out)
}

/// `df/dz`: centered in the interior. At the surface, fields with a Robin
/// closure return `-alpha f`; `Theta` returns 0 at the bottom. Remaining
/// boundary rows are one-sided second order.
pub fn ddz(f: &ScalarField) -> Result<ScalarField> {
    check_finite(f)?;
    let g = *f.grid();
    let (n, dz, px) = (g.nz(), g.dz(), g.px());
    let v = f.values();
    let mut out = ScalarField::zeros(&g, BcClass::Free);
    let o = out.values_mut();
    for k in 1..n {
        for i in 0..px {
            o[g.idx(i, k)] = (v[g.idx(i, k + 1)] - v[g.idx(i, k - 1)]) / (2.0 * dz);
        }
    }
    for i in 0..px {
        let top = g.idx(i, n);
        o[top] = match f.bc().alpha() {
            Some(alpha) => -alpha * v[top],
            None => (3.0 * v[top] - 4.0 * v[g.idx(i, n - 1)] + v[g.idx(i, n - 2)]) / (2.0 * dz),
        };
        let bot = g.idx(i, 0);
        o[bot] = match f.bc() {
            BcClass::Theta { .. } => 0.0,
            _ => (-3.0 * v[bot] + 4.0 * v[g.idx(i, 1)] - v[g.idx(i, 2)]) / (2.0 * dz),
        };
    }
    if f.bc().is_velocity() {
        // walls carry u = 0 for every z, so the vertical derivative vanishes there
        for k in 0..g.pz() {
            o[g.idx(0, k)] = 0.0;
            o[g.idx(g.nx(), k)] = 0.0;
        }
    }
    Ok(out)
}

/// Summation-by-parts first derivative in `x`: centered in the interior,
/// first-order one-sided on the walls. With trapezoid weights it satisfies
/// `<D a, b> + <a, D b> = [a b]` at the walls.
pub fn sbp_dx(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let (n, dx) = (g.nx(), g.dx());
    let v = f.values();
    let mut out = ScalarField::zeros(&g, BcClass::Free);
    let o = out.values_mut();
    for k in 0..g.pz() {
        let r = g.idx(0, k);
        for i in 1..n {
            o[r + i] = (v[r + i + 1] - v[r + i - 1]) / (2.0 * dx);
        }
        o[r] = (v[r + 1] - v[r]) / dx;
        o[r + n] = (v[r + n] - v[r + n - 1]) / dx;
    }
    out
}

/// Summation-by-parts first derivative in `z`; see [`sbp_dx`].
pub fn sbp_dz(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let (n, dz, px) = (g.nz(), g.dz(), g.px());
    let v = f.values();
    let mut out = ScalarField::zeros(&g, BcClass::Free);
    let o = out.values_mut();
    for k in 1..n {
        for i in 0..px {
            o[g.idx(i, k)] = (v[g.idx(i, k + 1)] - v[g.idx(i, k - 1)]) / (2.0 * dz);
        }
    }
    for i in 0..px {
        o[g.idx(i, 0)] = (v[g.idx(i, 1)] - v[g.idx(i, 0)]) / dz;
        o[g.idx(i, n)] = (v[g.idx(i, n)] - v[g.idx(i, n - 1)]) / dz;
    }
    out
}

/// Horizontal part of the closed Laplacian. Zero on Dirichlet nodes.
pub fn laplacian_x(f: &ScalarField) -> Result<ScalarField> {
    let bc = f.bc();
    if bc.is_free() {
        return Err(Error::InvalidParameter("laplacian needs a boundary closure; field is Free".into()));
    }
    let g = *f.grid();
    let (n, dx2) = (g.nx(), g.dx() * g.dx());
    let v = f.values();
    let mut out = ScalarField::zeros(&g, BcClass::Free);
    let o = out.values_mut();
    for k in 0..g.pz() {
        let r = g.idx(0, k);
        for i in 1..n {
            o[r + i] = (v[r + i + 1] - 2.0 * v[r + i] + v[r + i - 1]) / dx2;
        }
        if !bc.is_velocity() {
            o[r] = 2.0 * (v[r + 1] - v[r]) / dx2;
            o[r + n] = 2.0 * (v[r + n - 1] - v[r + n]) / dx2;
        }
    }
    if bc.is_velocity() {
        for i in 0..g.px() {
            o[g.idx(i, 0)] = 0.0;
        }
    }
    Ok(out)
}

/// Vertical part of the closed Laplacian, with the Robin ghost
/// `f_{n+1} = f_{n-1} - 2 dz alpha f_n` at the surface.
pub fn laplacian_z(f: &ScalarField) -> Result<ScalarField> {
    let bc = f.bc();
    let alpha = bc
        .alpha()
        .ok_or_else(|| Error::InvalidParameter("laplacian needs a boundary closure; field is Free".into()))?;
    let g = *f.grid();
    let (n, dz, px) = (g.nz(), g.dz(), g.px());
    let dz2 = dz * dz;
    let v = f.values();
    let mut out = ScalarField::zeros(&g, BcClass::Free);
    let o = out.values_mut();
    for k in 1..n {
        for i in 0..px {
            let c = g.idx(i, k);
            o[c] = (v[c + px] - 2.0 * v[c] + v[c - px]) / dz2;
        }
    }
    for i in 0..px {
        let top = g.idx(i, n);
        o[top] = 2.0 * (v[top - px] - v[top] - dz * alpha * v[top]) / dz2;
        let bot = g.idx(i, 0);
        o[bot] = if bc.is_velocity() { 0.0 } else { 2.0 * (v[bot + px] - v[bot]) / dz2 };
    }
    if bc.is_velocity() {
        for k in 0..g.pz() {
            o[g.idx(0, k)] = 0.0;
            o[g.idx(g.nx(), k)] = 0.0;
        }
    }
    Ok(out)
}

/// Five-point Laplacian closed by the field's boundary class.
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    let mut lx = laplacian_x(f)?;
    let lz = laplacian_z(f)?;
    lx.axpy(1.0, &lz);
    Ok(lx)
}

/// `g(x, z) = int_z^0 f(x, s) ds` by trapezoid accumulation downward from
/// the surface, so `g(x, 0) = 0` exactly.
pub fn vertical_integral_from_z(f: &ScalarField) -> ScalarField {
    let g = *f.grid();
    let (n, dz, px) = (g.nz(), g.dz(), g.px());
    let v = f.values();
    let mut out = ScalarField::zeros(&g, BcClass::Free);
    let o = out.values_mut();
    for k in (0..n).rev() {
        for i in 0..px {
            let c = g.idx(i, k);
            o[c] = o[c + px] + 0.5 * dz * (v[c] + v[c + px]);
        }
    }
    out
}

/// Vertical velocity diagnosed from continuity, `w = int_z^0 u_x`.
pub fn reconstruct_w(u: &ScalarField) -> Result<ScalarField> {
    Ok(vertical_integral_from_z(&ddx(u)?))
}

/// Hydrostatic pressure `p = q + int_z^0 theta`.
pub fn reconstruct_p(q: &ProfileField, theta: &ScalarField) -> Result<ScalarField> {
    if q.grid() != theta.grid() {
        return Err(Error::GridMismatch("surface pressure and temperature grids differ".into()));
    }
    let mut p = vertical_integral_from_z(theta);
    let g = *theta.grid();
    let qv = q.values();
    for k in 0..g.pz() {
        for i in 0..g.px() {
            p[(i, k)] += qv[i];
        }
    }
    Ok(p)
}

/// Column means `(1/h) int_{-h}^0 f dz`.
pub fn depth_average(f: &ScalarField) -> ProfileField {
    let g = *f.grid();
    let inv_h = 1.0 / g.h();
    let mut out = ProfileField::zeros(&g);
    let o = out.values_mut();
    for k in 0..g.pz() {
        let w = g.wz(k) * inv_h;
        for (i, oi) in o.iter_mut().enumerate() {
            *oi += w * f.at(i, k);
        }
    }
    out
}

/// Weighted inner product `int_D f g`.
pub fn inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.check_same_grid(g)?;
    let grid = *f.grid();
    let (a, b) = (f.values(), g.values());
    let mut s = 0.0;
    for k in 0..grid.pz() {
        let wz = grid.wz(k);
        let mut row = 0.0;
        for i in 0..grid.px() {
            let n = grid.idx(i, k);
            row += grid.wx(i) * a[n] * b[n];
        }
        s += wz * row;
    }
    Ok(s)
}

pub fn norm_l2(f: &ScalarField) -> f64 {
    inner(f, f).expect("same grid").sqrt()
}

/// `max_x (int f^2 dz)^(1/2)`.
pub fn norm_aniso_linfx_l2z(f: &ScalarField) -> f64 {
    let g = *f.grid();
    (0..g.px())
        .map(|i| (0..g.pz()).map(|k| g.wz(k) * f.at(i, k).powi(2)).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// `|f_x|^2` from face differences along `x`.
pub fn dx_norm_sq(f: &ScalarField) -> f64 {
    let g = *f.grid();
    let v = f.values();
    let mut s = 0.0;
    for k in 0..g.pz() {
        let r = g.idx(0, k);
        let row: f64 = (0..g.nx()).map(|i| (v[r + i + 1] - v[r + i]).powi(2)).sum();
        s += g.wz(k) * row;
    }
    s / g.dx()
}

/// Per-column `int f_z^2 dz` from face differences along `z`.
pub fn dz_column_sq(f: &ScalarField) -> Vec<f64> {
    let g = *f.grid();
    let v = f.values();
    let px = g.px();
    (0..px)
        .map(|i| {
            (0..g.nz())
                .map(|k| {
                    let c = g.idx(i, k);
                    (v[c + px] - v[c]).powi(2)
                })
                .sum::<f64>()
                / g.dz()
        })
        .collect()
}

/// `|f_z|^2` from face differences along `z`.
pub fn dz_norm_sq(f: &ScalarField) -> f64 {
    let g = *f.grid();
    dz_column_sq(f).iter().enumerate().map(|(i, c)| g.wx(i) * c).sum()
}

/// `|f_z|_{L^inf_x(L^2_z)}` from face differences.
pub fn dz_norm_aniso(f: &ScalarField) -> f64 {
    dz_column_sq(f).into_iter().fold(0.0, f64::max).sqrt()
}

/// `|f_xz|^2` from the mixed difference on each cell.
pub fn dxz_norm_sq(f: &ScalarField) -> f64 {
    let g = *f.grid();
    let v = f.values();
    let px = g.px();
    let mut s = 0.0;
    for k in 0..g.nz() {
        for i in 0..g.nx() {
            let c = g.idx(i, k);
            let d = v[c + px + 1] - v[c + px] - v[c + 1] + v[c];
            s += d * d;
        }
    }
    s / (g.dx() * g.dz())
}

/// `|f_xx|^2` from second differences on interior columns.
pub fn dxx_norm_sq(f: &ScalarField) -> f64 {
    let g = *f.grid();
    let v = f.values();
    let dx2 = g.dx() * g.dx();
    let mut s = 0.0;
    for k in 0..g.pz() {
        let r = g.idx(0, k);
        let row: f64 = (1..g.nx()).map(|i| ((v[r + i + 1] - 2.0 * v[r + i] + v[r + i - 1]) / dx2).powi(2)).sum();
        s += g.wz(k) * row * g.dx();
    }
    s
}

/// `|f_zz|^2` from second differences on interior rows.
pub fn dzz_norm_sq(f: &ScalarField) -> f64 {
    let g = *f.grid();
    let v = f.values();
    let px = g.px();
    let dz2 = g.dz() * g.dz();
    let mut s = 0.0;
    for k in 1..g.nz() {
        for i in 0..px {
            let c = g.idx(i, k);
            s += g.wx(i) * ((v[c + px] - 2.0 * v[c] + v[c - px]) / dz2).powi(2);
        }
    }
    s * g.dz()
}

/// `|f_x(., 0)|^2` along the surface row.
pub fn surface_dx_norm_sq(f: &ScalarField) -> f64 {
    let g = *f.grid();
    let k = g.nz();
    (0..g.nx()).map(|i| (f.at(i + 1, k) - f.at(i, k)).powi(2)).sum::<f64>() / g.dx()
}

/// `|f(., 0)|_{L^2(0,1)}`.
pub fn surface_trace_norm(f: &ScalarField) -> f64 {
    f.surface_trace().norm_l2()
}

/// `|f|_{V}^2 = |grad f|^2 + alpha |f(., 0)|^2`, with the face-difference
/// gradient that matches the discrete Laplacian.
pub fn norm_v_sq(f: &ScalarField, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("negative Robin coefficient {alpha}")));
    }
    let tr = surface_trace_norm(f);
    Ok(dx_norm_sq(f) + dz_norm_sq(f) + alpha * tr * tr)
}

pub fn norm_v(f: &ScalarField, alpha: f64) -> Result<f64> {
    Ok(norm_v_sq(f, alpha)?.sqrt())
}

/// `int_D psi phi vphi`.
pub fn trilinear(psi: &ScalarField, phi: &ScalarField, vphi: &ScalarField) -> Result<f64> {
    check_grids(&[psi, phi, vphi])?;
    let g = *psi.grid();
    let (a, b, c) = (psi.values(), phi.values(), vphi.values());
    let mut s = 0.0;
    for k in 0..g.pz() {
        let mut row = 0.0;
        for i in 0..g.px() {
            let n = g.idx(i, k);
            row += g.wx(i) * a[n] * b[n] * c[n];
        }
        s += g.wz(k) * row;
    }
    Ok(s)
}

/// Right side of the anisotropic trilinear estimate:
/// `|psi|^(1/2) (|psi| + |psi_x|)^(1/2) (|phi| + |phi_z|)^(1/2) |vphi|`.
pub fn tri_bound(psi: &ScalarField, phi: &ScalarField, vphi: &ScalarField) -> Result<f64> {
    check_grids(&[psi, phi, vphi])?;
    let np = norm_l2(psi);
    let npx = dx_norm_sq(psi).sqrt();
    let nf = norm_l2(phi);
    let nfz = dz_norm_sq(phi).sqrt();
    Ok(np.sqrt() * (np + npx).sqrt() * (nf + nfz).sqrt() * norm_l2(vphi))
}

/// Both sides of a one-sided inequality `lhs <= C rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSample {
    pub lhs: f64,
    pub rhs: f64,
}

impl BoundSample {
    pub fn ratio(&self) -> f64 {
        if self.rhs > 0.0 {
            self.lhs / self.rhs
        } else if self.lhs.abs() <= f64::MIN_POSITIVE {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// `|<u u_x, phi>|` against `|u| |u_x|^(1/2) |u_z|^(1/2) |phi_x|`.
pub fn advection_bound_uux(u: &ScalarField, phi: &ScalarField) -> Result<BoundSample> {
    check_grids(&[u, phi])?;
    let ux = ddx(u)?;
    let lhs = trilinear(u, &ux, phi)?.abs();
    let nu = norm_l2(u);
    let nux = dx_norm_sq(u).sqrt();
    let nuz = dz_norm_sq(u).sqrt();
    let rhs = nu * nux.sqrt() * nuz.sqrt() * dx_norm_sq(phi).sqrt();
    Ok(BoundSample { lhs, rhs })
}

/// `|<w u_z, phi>|` against
/// `|u| |u_x|^(1/2) |u_z|^(1/2) |phi_x| + |u|^(1/2) |u_x|^(3/2) |phi_z|`.
pub fn advection_bound_wuz(u: &ScalarField, phi: &ScalarField) -> Result<BoundSample> {
    check_grids(&[u, phi])?;
    let w = reconstruct_w(u)?;
    let uz = ddz(u)?;
    let lhs = trilinear(&w, &uz, phi)?.abs();
    let nu = norm_l2(u);
    let nux = dx_norm_sq(u).sqrt();
    let nuz = dz_norm_sq(u).sqrt();
    let rhs = nu * nux.sqrt() * nuz.sqrt() * dx_norm_sq(phi).sqrt()
        + nu.sqrt() * nux.powf(1.5) * dz_norm_sq(phi).sqrt();
    Ok(BoundSample { lhs, rhs })
}

/// Surface trace against `sqrt(h) |f_z|`, valid for fields vanishing at
/// the bottom.
pub fn boundary_trace_bound(f: &ScalarField) -> BoundSample {
    BoundSample { lhs: surface_trace_norm(f), rhs: f.grid().h().sqrt() * dz_norm_sq(f).sqrt() }
}

/// Second-order integration of a profile derivative with `q(0) = 0`.
pub fn integrate_profile(grid: &Grid, slope: &[f64]) -> ProfileField {
    let mut q = ProfileField::zeros(grid);
    let dx = grid.dx();
    let o = q.values_mut();
    for i in 1..grid.px() {
        o[i] = o[i - 1] + 0.5 * dx * (slope[i - 1] + slope[i]);
    }
    q
}

/// Removes the column mean of a velocity-class field along the profile
/// `(z + h) / h`, which vanishes at the bottom, so the discrete depth
/// average becomes zero without disturbing the Dirichlet data.
pub fn project_barotropic(f: &mut ScalarField) {
    let g = *f.grid();
    let shape: Vec<f64> = (0..g.pz()).map(|k| (g.z(k) + g.h()) / g.h()).collect();
    let norm: f64 = (0..g.pz()).map(|k| g.wz(k) * shape[k]).sum();
    for i in 0..g.px() {
        let mean: f64 = (0..g.pz()).map(|k| g.wz(k) * f.at(i, k)).sum();
        let c = mean / norm;
        for (k, s) in shape.iter().enumerate() {
            f[(i, k)] -= c * s;
        }
    }
}

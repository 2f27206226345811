//! Binary state snapshots.
//!
//! Layout, all little-endian: magic `HPE2DSNP`, `u32` version, `f64` h,
//! `u64` nx, `u64` nz, `f64` alpha1..alpha3, `f64` t, `u64` step, `u32`
//! array count, then per array a `u32` name length, the UTF-8 name, a `u64`
//! value count and the `f64` values in x-fastest order. Arrays are `u`, `v`,
//! `theta`, `q` and, when the state carries a multistep history, `hist_u`,
//! `hist_v`, `hist_theta`, `hist_dt`.

use std::io::{self, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};
use crate::grid::{build_grid, Grid, RobinParams};
use crate::solver::{History, State};

pub const MAGIC: &[u8; 8] = b"HPE2DSNP";
pub const VERSION: u32 = 1;

pub fn write_snapshot(state: &State, mut w: impl Write) -> Result<()> {
    let g = state.grid();
    let r = state.robin();
    w.write_all(MAGIC)?;
    w.write_u32::<LE>(VERSION)?;
    w.write_f64::<LE>(g.h())?;
    w.write_u64::<LE>(g.nx() as u64)?;
    w.write_u64::<LE>(g.nz() as u64)?;
    for a in [r.alpha1, r.alpha2, r.alpha3, state.t] {
        w.write_f64::<LE>(a)?;
    }
    w.write_u64::<LE>(state.step)?;
    let mut arrays: Vec<(&str, &[f64])> =
        vec![("u", state.u.values()), ("v", state.v.values()), ("theta", state.theta.values()), ("q", state.q.values())];
    let dt;
    if let Some(hist) = &state.history {
        dt = [hist.dt];
        arrays.extend([("hist_u", &hist.du[..]), ("hist_v", &hist.dv[..]), ("hist_theta", &hist.dtheta[..]), ("hist_dt", &dt[..])]);
    }
    w.write_u32::<LE>(arrays.len() as u32)?;
    for (name, vals) in arrays {
        w.write_u32::<LE>(name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        w.write_u64::<LE>(vals.len() as u64)?;
        for &v in vals {
            w.write_f64::<LE>(v)?;
        }
    }
    Ok(())
}

pub fn save_snapshot(state: &State, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_snapshot(state, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Snapshot("truncated payload".into())
    } else {
        Error::Io(e)
    }
}

fn corrupt(msg: impl std::fmt::Display) -> Error {
    Error::Snapshot(format!("corrupt header: {msg}"))
}

pub fn read_snapshot(mut r: impl Read) -> Result<State> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = r.read_u32::<LE>().map_err(truncated)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("version mismatch: file has {version}, reader supports {VERSION}")));
    }
    let h = r.read_f64::<LE>().map_err(truncated)?;
    let nx = r.read_u64::<LE>().map_err(truncated)?;
    let nz = r.read_u64::<LE>().map_err(truncated)?;
    let mut f = [0.0; 4];
    for v in &mut f {
        *v = r.read_f64::<LE>().map_err(truncated)?;
    }
    let step = r.read_u64::<LE>().map_err(truncated)?;
    let grid = build_grid(h, nx as usize, nz as usize).map_err(corrupt)?;
    let robin = RobinParams::new(f[0], f[1], f[2]).map_err(corrupt)?;
    let mut state = State::zeros(&grid, &robin);
    state.t = f[3];
    state.step = step;

    let count = r.read_u32::<LE>().map_err(truncated)?;
    let mut hist = (None, None, None, None);
    let mut seen = Vec::new();
    for _ in 0..count {
        let len = r.read_u32::<LE>().map_err(truncated)? as usize;
        if len > 64 {
            return Err(corrupt("array name too long"));
        }
        let mut name = vec![0u8; len];
        r.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| corrupt("array name is not UTF-8"))?;
        let n = r.read_u64::<LE>().map_err(truncated)? as usize;
        let expect = match name.as_str() {
            "q" => grid.px(),
            "hist_dt" => 1,
            "u" | "v" | "theta" | "hist_u" | "hist_v" | "hist_theta" => grid.len(),
            _ => return Err(corrupt(format!("unknown array {name:?}"))),
        };
        if n != expect {
            return Err(corrupt(format!("array {name:?} has {n} values, grid needs {expect}")));
        }
        if seen.contains(&name) {
            return Err(corrupt(format!("array {name:?} repeated")));
        }
        let mut vals = vec![0.0; n];
        r.read_f64_into::<LE>(&mut vals).map_err(truncated)?;
        match name.as_str() {
            "u" => state.u.values_mut().copy_from_slice(&vals),
            "v" => state.v.values_mut().copy_from_slice(&vals),
            "theta" => state.theta.values_mut().copy_from_slice(&vals),
            "q" => state.q.values_mut().copy_from_slice(&vals),
            "hist_u" => hist.0 = Some(vals),
            "hist_v" => hist.1 = Some(vals),
            "hist_theta" => hist.2 = Some(vals),
            _ => hist.3 = Some(vals[0]),
        }
        seen.push(name);
    }
    for req in ["u", "v", "theta", "q"] {
        if !seen.iter().any(|s| s == req) {
            return Err(corrupt(format!("array {req:?} missing")));
        }
    }
    state.history = match hist {
        (None, None, None, None) => None,
        (Some(du), Some(dv), Some(dtheta), Some(dt)) => Some(History { du, dv, dtheta, dt }),
        _ => return Err(corrupt("incomplete history arrays")),
    };
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(corrupt("trailing bytes"));
    }
    Ok(state)
}

pub fn load_snapshot(path: &Path) -> Result<State> {
    let bytes = std::fs::read(path)?;
    read_snapshot(&bytes[..])
}

/// [`load_snapshot`] for a run on `grid`.
pub fn load_snapshot_for(path: &Path, grid: &Grid) -> Result<State> {
    let s = load_snapshot(path)?;
    s.check_grid(grid)?;
    Ok(s)
}

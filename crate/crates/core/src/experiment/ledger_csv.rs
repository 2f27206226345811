//! CSV export of energy ledgers and twin difference series.
//!
//! A ledger file starts with one comment line naming the schema version and
//! the run's Robin coefficients and depth, then a header row with
//! [`LEDGER_COLUMNS`]. Values are printed with 17 significant digits so a
//! read-back ledger is bit-identical to the one written.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::diagnostics::{EnergyLedger, LedgerRecord, LEDGER_COLUMNS};
use crate::error::{Error, Result};
use crate::grid::RobinParams;
use crate::twin::TwinDiff;

pub const SCHEMA_VERSION: u32 = 1;

pub fn schema_name() -> String {
    format!("hpe2d ledger schema v{SCHEMA_VERSION}")
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Diagnostics(format!("ledger csv: {}", msg.into()))
}

pub fn write_ledger(ledger: &EnergyLedger, mut w: impl Write) -> Result<()> {
    let r = ledger.robin;
    writeln!(
        w,
        "# {} alpha1={} alpha2={} alpha3={} h={}",
        schema_name(),
        fmt_f64(r.alpha1),
        fmt_f64(r.alpha2),
        fmt_f64(r.alpha3),
        fmt_f64(ledger.h)
    )?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(LEDGER_COLUMNS)?;
    for rec in ledger.records() {
        csv.write_record(rec.to_vec().into_iter().map(fmt_f64))?;
    }
    csv.flush()?;
    Ok(())
}

pub fn save_ledger(ledger: &EnergyLedger, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_ledger(ledger, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

fn parse_header(line: &str) -> Result<(RobinParams, f64)> {
    let rest = line
        .trim_end()
        .strip_prefix("# ")
        .and_then(|l| l.strip_prefix(&schema_name()))
        .ok_or_else(|| bad(format!("first line is not a `{}` header", schema_name())))?;
    let mut vals = [None; 4];
    for kv in rest.split_whitespace() {
        let (k, v) = kv.split_once('=').ok_or_else(|| bad(format!("malformed header entry {kv:?}")))?;
        let slot = match k {
            "alpha1" => 0,
            "alpha2" => 1,
            "alpha3" => 2,
            "h" => 3,
            _ => return Err(bad(format!("unknown header entry {k:?}"))),
        };
        vals[slot] = Some(v.parse::<f64>().map_err(|_| bad(format!("bad number in header: {v:?}")))?);
    }
    let get = |j: usize, name: &str| vals[j].ok_or_else(|| bad(format!("header lacks {name}")));
    let robin = RobinParams::new(get(0, "alpha1")?, get(1, "alpha2")?, get(2, "alpha3")?)?;
    Ok((robin, get(3, "h")?))
}

pub fn read_ledger(r: impl Read) -> Result<EnergyLedger> {
    let mut r = BufReader::new(r);
    let mut first = String::new();
    r.read_line(&mut first)?;
    let (robin, h) = parse_header(&first)?;
    let mut csv = csv::Reader::from_reader(r);
    let header = csv.headers()?;
    if header.iter().ne(LEDGER_COLUMNS.iter().copied()) {
        return Err(bad("column set or order differs from this schema version"));
    }
    let mut records = Vec::new();
    for row in csv.records() {
        let row = row?;
        let vals = row
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        records.push(LedgerRecord::from_slice(&vals)?);
    }
    EnergyLedger::from_records(robin, h, records)
}

pub fn load_ledger(path: &Path) -> Result<EnergyLedger> {
    read_ledger(std::fs::File::open(path)?)
}

pub const TWIN_COLUMNS: &[&str] = &["t", "du", "dv", "dtheta", "h_sq", "integrand", "energy", "envelope"];

/// Twin difference series with its Gronwall envelope alongside.
pub fn save_twin(diff: &TwinDiff, envelope: &[f64], path: &Path) -> Result<()> {
    let mut csv = csv::Writer::from_path(path)?;
    csv.write_record(TWIN_COLUMNS)?;
    for j in 0..diff.len() {
        let row = [
            diff.t[j],
            diff.du[j],
            diff.dv[j],
            diff.dtheta[j],
            diff.h_sq[j],
            diff.integrand[j],
            diff.energy[j],
            envelope.get(j).copied().unwrap_or(f64::NAN),
        ];
        csv.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    csv.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::observe;
    use crate::grid::build_grid;
    use crate::profiles::{HeatProfile, InitialProfile};
    use crate::solver::{run, Forcing, SolverConfig};

    fn ledger() -> EnergyLedger {
        let g = build_grid(1.0, 8, 8).unwrap();
        let r = RobinParams::new(0.1, 0.7, 1.0 / 3.0).unwrap();
        let s = InitialProfile::Random { seed: 3 }.build(&g, &r, 1.0).unwrap();
        let f = Forcing::heat(HeatProfile::Cosine.build(&g, 0.3));
        let c = SolverConfig { dt: 1e-3, t_end: 0.01, robin: r, observe_every: 2, ..Default::default() };
        let mut l = EnergyLedger::new(r, 1.0);
        let mut obs = |st: &crate::State, f: &Forcing| l.push(observe(st, f)?);
        run(&s, &f, &c, &mut [&mut obs]).unwrap();
        l
    }

    #[test]
    fn round_trip_is_lossless() {
        let l = ledger();
        let mut buf = Vec::new();
        write_ledger(&l, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# hpe2d ledger schema v1 alpha1="));
        assert!(text.lines().nth(1).unwrap().starts_with("t,u_sq,"));
        let back = read_ledger(&buf[..]).unwrap();
        assert_eq!(back, l);
        for (a, b) in back.records().iter().zip(l.records()) {
            assert!(a.to_vec().iter().zip(b.to_vec()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn rejects_foreign_schema() {
        let mut buf = Vec::new();
        write_ledger(&ledger(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(read_ledger(text.replace("schema v1", "schema v2").as_bytes()).is_err());
        assert!(read_ledger(text.replacen("u_sq", "u2", 1).as_bytes()).is_err());
        assert!(read_ledger(text.lines().skip(1).collect::<Vec<_>>().join("\n").as_bytes()).is_err());
    }
}

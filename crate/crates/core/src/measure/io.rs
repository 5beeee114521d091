//! CSV serialization: `x,m` for atoms, `x,F` for distribution breakpoints.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{AnyMeasure, AtomicMeasure, ReferenceMeasure};
use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits; parses back bit-exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_atomic<W: Write>(mu: &AtomicMeasure, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "m"])?;
    for (x, m) in mu.iter() {
        out.write_record([fmt_f64(x), fmt_f64(m)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_reference<W: Write>(mu: &ReferenceMeasure, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["x", "F"])?;
    for (x, f) in mu.breakpoints() {
        out.write_record([fmt_f64(x), fmt_f64(f)])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads either format, chosen by the header of the second column.
pub fn read_measure<R: Read>(r: R) -> Result<AnyMeasure> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let kind = match (headers.get(0), headers.get(1), headers.len()) {
        (Some("x"), Some("m"), 2) => 'm',
        (Some("x"), Some("F"), 2) => 'F',
        _ => {
            return Err(Error::InvalidMeasure(format!(
                "expected CSV header `x,m` or `x,F`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )))
        }
    };
    let mut pairs = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| Error::InvalidMeasure(format!("row {}: `{}`: {e}", line + 2, &rec[i])))
        };
        pairs.push((parse(0)?, parse(1)?));
    }
    Ok(match kind {
        'm' => AnyMeasure::Atomic(AtomicMeasure::new(pairs)?),
        _ => AnyMeasure::Reference(ReferenceMeasure::from_breakpoints(&pairs)?),
    })
}

pub fn read_atomic<R: Read>(r: R) -> Result<AtomicMeasure> {
    match read_measure(r)? {
        AnyMeasure::Atomic(m) => Ok(m),
        AnyMeasure::Reference(_) => Err(Error::InvalidMeasure("expected atoms (`x,m`), found CDF breakpoints".into())),
    }
}

pub fn load_measure(path: impl AsRef<Path>) -> Result<AnyMeasure> {
    read_measure(File::open(path)?)
}

pub fn save_atomic(mu: &AtomicMeasure, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(mu, File::create(path)?)
}

pub fn save_reference(mu: &ReferenceMeasure, path: impl AsRef<Path>) -> Result<()> {
    write_reference(mu, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_round_trip_is_exact() {
        let mu = AtomicMeasure::new([(-0.1, 1.0 / 3.0), (0.7, 2.0f64.sqrt()), (1e-300, 5e-324)]).unwrap();
        let mut buf = Vec::new();
        write_atomic(&mu, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x,m\n"));
        assert_eq!(read_atomic(buf.as_slice()).unwrap(), mu);
    }

    #[test]
    fn reference_round_trip_is_exact() {
        let r = ReferenceMeasure::from_breakpoints(&[(0.0, 0.0), (0.5, 0.1), (0.5, 0.6), (1.0, 1.0 / 3.0 + 0.6)]).unwrap();
        let mut buf = Vec::new();
        write_reference(&r, &mut buf).unwrap();
        match read_measure(buf.as_slice()).unwrap() {
            AnyMeasure::Reference(back) => assert_eq!(back, r),
            other => panic!("wrong kind {other:?}"),
        }
    }

    #[test]
    fn bad_header_rejected() {
        assert!(read_measure("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_measure("x,m\n1,zz\n".as_bytes()).is_err());
    }
}

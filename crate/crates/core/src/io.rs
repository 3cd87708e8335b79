//! CSV and PGM serialization of landscapes and grid maps.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::ell::Landscape;
use crate::maps::{GridMap, GridSpec, Quantity};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// Decimal rendering with 17 significant digits, in the style of C's `%.17g`.
///
/// Every finite `f64` survives a round trip through this format unchanged.
pub fn fmt17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_file(path: &Path, body: &[u8]) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    w.write_all(body).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Header `E,ell[,dell_dE]`; missing derivatives are empty fields.
pub fn write_landscape_csv(land: &Landscape, path: &Path) -> Result<(), IoError> {
    let mut out = String::new();
    out.push_str(if land.derivs.is_some() { "E,ell,dell_dE\n" } else { "E,ell\n" });
    for (k, (e, l)) in land.energies.iter().zip(&land.lengths).enumerate() {
        let _ = write!(out, "{},{}", fmt17(*e), fmt17(*l));
        if let Some(d) = &land.derivs {
            out.push(',');
            if let Some(v) = d[k] {
                out.push_str(&fmt17(v));
            }
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

/// Long format `q,p,value,mask`, `p` outer and `q` inner.
pub fn write_grid_csv(grid: &GridMap, path: &Path) -> Result<(), IoError> {
    let spec = &grid.spec;
    let mut out = String::with_capacity(64 * spec.len() + 16);
    out.push_str("q,p,value,mask\n");
    for k in 0..spec.len() {
        let (q, p) = spec.node(k);
        if grid.mask[k] {
            let _ = writeln!(out, "{},{},{},1", fmt17(q), fmt17(p), fmt17(grid.values[k]));
        } else {
            let _ = writeln!(out, "{},{},,0", fmt17(q), fmt17(p));
        }
    }
    write_file(path, out.as_bytes())
}

/// Binary 16-bit grayscale (`P5`, big-endian), linearly scaled between the
/// smallest and largest valid values; masked nodes are 0.
pub fn write_pgm(grid: &GridMap, path: &Path) -> Result<(), IoError> {
    let spec = &grid.spec;
    let valid = || grid.values.iter().zip(&grid.mask).filter(|(_, &m)| m).map(|(v, _)| *v);
    let lo = valid().fold(f64::INFINITY, f64::min);
    let hi = valid().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let mut out = format!("P5\n{} {}\n65535\n", spec.nq, spec.np).into_bytes();
    out.reserve(2 * spec.len());
    for k in 0..spec.len() {
        let level = if !grid.mask[k] {
            0
        } else if range > 0.0 {
            ((grid.values[k] - lo) / range * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            65535
        };
        out.extend_from_slice(&level.to_be_bytes());
    }
    write_file(path, &out)
}

fn parse_field(path: &Path, line: usize, field: &str) -> Result<f64, IoError> {
    field.trim().parse::<f64>().map_err(|_| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("not a number: {field:?}"),
    })
}

pub fn read_landscape_csv(path: &Path) -> Result<Landscape, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let parse_err = |line: usize, message: &str| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    };
    let header = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let with_derivs = match header.trim() {
        "E,ell" => false,
        "E,ell,dell_dE" => true,
        _ => return Err(parse_err(1, "expected header E,ell[,dell_dE]")),
    };
    let mut land = Landscape {
        energies: Vec::new(),
        lengths: Vec::new(),
        derivs: with_derivs.then(Vec::new),
    };
    for (k, row) in lines.enumerate() {
        let line = k + 2;
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != if with_derivs { 3 } else { 2 } {
            return Err(parse_err(line, "wrong number of fields"));
        }
        land.energies.push(parse_field(path, line, fields[0])?);
        land.lengths.push(parse_field(path, line, fields[1])?);
        if let Some(d) = land.derivs.as_mut() {
            d.push(if fields[2].is_empty() { None } else { Some(parse_field(path, line, fields[2])?) });
        }
    }
    Ok(land)
}

/// Reads a grid written by [`write_grid_csv`], recovering its [`GridSpec`]
/// from the first and last nodes.
pub fn read_grid_csv(path: &Path, quantity: Quantity) -> Result<GridMap, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let parse_err = |line: usize, message: &str| IoError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.to_string(),
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("q,p,value,mask") {
        return Err(parse_err(1, "expected header q,p,value,mask"));
    }
    let mut qs = Vec::new();
    let mut ps = Vec::new();
    let mut values = Vec::new();
    let mut mask = Vec::new();
    for (k, row) in lines.enumerate() {
        let line = k + 2;
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(line, "wrong number of fields"));
        }
        qs.push(parse_field(path, line, fields[0])?);
        ps.push(parse_field(path, line, fields[1])?);
        match fields[3].trim() {
            "1" => {
                values.push(parse_field(path, line, fields[2])?);
                mask.push(true);
            }
            "0" => {
                values.push(f64::NAN);
                mask.push(false);
            }
            _ => return Err(parse_err(line, "mask must be 0 or 1")),
        }
    }
    let total = qs.len();
    let nq = ps.iter().take_while(|&&p| p == ps[0]).count();
    if nq < 2 || total % nq != 0 || total / nq < 2 {
        return Err(parse_err(2, "rows do not form a rectangular grid"));
    }
    let spec = GridSpec {
        q_lo: qs[0],
        q_hi: qs[nq - 1],
        p_lo: ps[0],
        p_hi: ps[total - 1],
        nq,
        np: total / nq,
    };
    if spec.validate().is_err() {
        return Err(parse_err(2, "grid bounds are not increasing"));
    }
    for (k, (&q, &p)) in qs.iter().zip(&ps).enumerate() {
        if spec.node(k) != (q, p) {
            return Err(parse_err(k + 2, "node coordinates do not match a uniform grid"));
        }
    }
    Ok(GridMap { spec, quantity, values, mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fmt17_examples() {
        assert_eq!(fmt17(0.0), "0");
        assert_eq!(fmt17(1.0), "1");
        assert_eq!(fmt17(-2.5), "-2.5");
        assert_eq!(fmt17(0.1), "0.10000000000000001");
        assert_eq!(fmt17(1e-7), "9.9999999999999995e-08");
        assert_eq!(fmt17(1e20), "1e+20");
        assert_eq!(fmt17(std::f64::consts::PI), "3.1415926535897931");
    }

    proptest! {
        #[test]
        fn fmt17_round_trips(bits in any::<u64>()) {
            let x = f64::from_bits(bits);
            prop_assume!(x.is_finite());
            prop_assert_eq!(fmt17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    fn grid() -> GridMap {
        let spec = GridSpec { q_lo: -1.0, q_hi: 1.0, p_lo: 0.0, p_hi: 0.3, nq: 2, np: 2 };
        GridMap {
            spec,
            quantity: Quantity::Ell,
            values: vec![0.1, f64::NAN, 1.0 / 3.0, 7.0],
            mask: vec![true, false, true, true],
        }
    }

    #[test]
    fn grid_csv_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let g = grid();
        write_grid_csv(&g, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "q,p,value,mask");
        assert_eq!(lines[2], "1,0,,0");
        let back = read_grid_csv(&path, Quantity::Ell).unwrap();
        assert_eq!(back.spec, g.spec);
        assert_eq!(back.mask, g.mask);
        for k in [0, 2, 3] {
            assert_eq!(back.values[k].to_bits(), g.values[k].to_bits());
        }
    }

    #[test]
    fn landscape_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.csv");
        let land = Landscape {
            energies: vec![-1.0, 0.0, 0.25],
            lengths: vec![3.0, 15.25, 2.0 / 3.0],
            derivs: Some(vec![Some(1.5), None, Some(-1e-9)]),
        };
        write_landscape_csv(&land, &path).unwrap();
        assert_eq!(read_landscape_csv(&path).unwrap(), land);
        assert!(fs::read_to_string(&path).unwrap().contains("\n0,15.25,\n"));
    }

    #[test]
    fn pgm_header_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        write_pgm(&grid(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P5\n2 2\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        let px: Vec<u16> = bytes[header.len()..]
            .chunks(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect();
        assert_eq!(px, vec![0, 0, 2216, 65535]);
    }

    #[test]
    fn io_errors_name_the_path() {
        let err = write_grid_csv(&grid(), Path::new("/nonexistent/dir/g.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/g.csv"));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "q,p,value,mask\n0,0,x,1\n").unwrap();
        assert!(matches!(read_grid_csv(&path, Quantity::Ell), Err(IoError::Parse { line: 2, .. })));
    }
}

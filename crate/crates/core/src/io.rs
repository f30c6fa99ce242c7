//! Matrix CSV dumps: dense row-major, header `# n=<n> w=<w>`, 17 significant digits.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::banded::BandedSymMatrix;
use crate::dense::DenseMatrix;
use crate::error::{LdmError, Result};

/// Writes `m` densely; `w` is recorded in the header only.
pub fn write_dense_csv<W: Write>(mut out: W, m: &DenseMatrix, w: usize) -> Result<()> {
    writeln!(out, "# n={} w={}", m.nrows(), w)?;
    let mut line = String::new();
    for i in 0..m.nrows() {
        line.clear();
        for j in 0..m.ncols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format!("{:.16e}", m[(i, j)]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_banded_csv<W: Write>(out: W, m: &BandedSymMatrix) -> Result<()> {
    write_dense_csv(out, &m.to_dense(), m.w())
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let bad = || LdmError::Parse(format!("malformed matrix header {line:?}"));
    let body = line.strip_prefix('#').ok_or_else(bad)?;
    let (mut n, mut w) = (None, None);
    for tok in body.split_whitespace() {
        match tok.split_once('=') {
            Some(("n", v)) => n = Some(v.parse().map_err(|_| bad())?),
            Some(("w", v)) => w = Some(v.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    Ok((n.ok_or_else(bad)?, w.ok_or_else(bad)?))
}

/// Reads a dump written by [`write_dense_csv`], returning the matrix and header `w`.
pub fn read_dense_csv<R: Read>(input: R) -> Result<(DenseMatrix, usize)> {
    let mut lines = BufReader::new(input).lines();
    let header = lines.next().ok_or_else(|| LdmError::Parse("empty matrix file".into()))??;
    let (n, w) = parse_header(header.trim())?;
    let mut data = Vec::with_capacity(n * n);
    let mut rows = 0;
    for line in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| LdmError::Parse(format!("row {rows}: bad number {tok:?}")))?;
            data.push(v);
        }
        if data.len() - before != n {
            return Err(LdmError::Parse(format!("row {rows} has {} entries, expected {n}", data.len() - before)));
        }
        rows += 1;
    }
    if rows != n {
        return Err(LdmError::Parse(format!("found {rows} rows, expected {n}")));
    }
    Ok((DenseMatrix::from_row_slice(n, n, &data), w))
}

/// Reads a dump and stores it in band `w` from the header; entries outside are dropped.
pub fn read_banded_csv<R: Read>(input: R) -> Result<BandedSymMatrix> {
    let (m, w) = read_dense_csv(input)?;
    BandedSymMatrix::from_dense(&m, w)
}

pub fn save_dense(path: &Path, m: &DenseMatrix, w: usize) -> Result<()> {
    let mut buf = Vec::new();
    write_dense_csv(&mut buf, m, w)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn save_banded(path: &Path, m: &BandedSymMatrix) -> Result<()> {
    save_dense(path, &m.to_dense(), m.w())
}

pub fn load_dense(path: &Path) -> Result<(DenseMatrix, usize)> {
    read_dense_csv(fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let m = DenseMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) as f64).sin() / 3.0 + 1e-300 * i as f64);
        let mut buf = Vec::new();
        write_dense_csv(&mut buf, &m, 2).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# n=5 w=2\n"));
        let (back, w) = read_dense_csv(buf.as_slice()).unwrap();
        assert_eq!(w, 2);
        assert_eq!(back, m);
    }

    #[test]
    fn banded_round_trip() {
        let mut b = BandedSymMatrix::zeros(8, 2).unwrap();
        b.set(0, 7, 0.25);
        b.set(3, 5, -1.5);
        b.set(4, 4, 2.0);
        let mut buf = Vec::new();
        write_banded_csv(&mut buf, &b).unwrap();
        assert_eq!(read_banded_csv(buf.as_slice()).unwrap(), b);
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(read_dense_csv("".as_bytes()), Err(LdmError::Parse(_))));
        assert!(matches!(read_dense_csv("n=2 w=1\n1,2\n2,1\n".as_bytes()), Err(LdmError::Parse(_))));
        assert!(matches!(read_dense_csv("# n=2 w=1\n1,2\n2\n".as_bytes()), Err(LdmError::Parse(_))));
        assert!(matches!(read_dense_csv("# n=2 w=1\n1,x\n2,1\n".as_bytes()), Err(LdmError::Parse(_))));
        assert!(matches!(read_dense_csv("# n=2 w=1\n1,2\n".as_bytes()), Err(LdmError::Parse(_))));
    }
}

//! Matrix Market coordinate-format reader/writer (real/pattern/integer,
//! general/symmetric).

use crate::apps::csr::CsrMatrix;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MtxError {
    #[error("io error reading matrix: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

fn ferr(line: usize, msg: impl Into<String>) -> MtxError {
    MtxError::Format {
        line,
        msg: msg.into(),
    }
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix, MtxError> {
    parse_matrix_market(&std::fs::read_to_string(path)?)
}

pub fn parse_matrix_market(text: &str) -> Result<CsrMatrix, MtxError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| ferr(1, "empty file"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() < 5
        || fields[0] != "%%MatrixMarket"
        || fields[1] != "matrix"
        || fields[2] != "coordinate"
    {
        return Err(ferr(
            1,
            "expected header '%%MatrixMarket matrix coordinate <field> <symmetry>'",
        ));
    }
    let value_kind = fields[3];
    let pattern = match value_kind {
        "real" | "integer" => false,
        "pattern" => true,
        other => return Err(ferr(1, format!("unsupported field type '{other}'"))),
    };
    let symmetric = match fields[4] {
        "general" => false,
        "symmetric" => true,
        other => return Err(ferr(1, format!("unsupported symmetry '{other}'"))),
    };

    // size line: first non-comment line
    let (mut n_rows, mut n_cols, mut nnz) = (0usize, 0usize, 0usize);
    let mut have_size = false;
    let mut triples: Vec<(usize, usize, f64)> = Vec::new();
    for (i, raw) in lines {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if !have_size {
            if toks.len() != 3 {
                return Err(ferr(lineno, "size line must be '<rows> <cols> <nnz>'"));
            }
            n_rows = toks[0].parse().map_err(|_| ferr(lineno, "bad row count"))?;
            n_cols = toks[1].parse().map_err(|_| ferr(lineno, "bad column count"))?;
            nnz = toks[2].parse().map_err(|_| ferr(lineno, "bad nnz count"))?;
            have_size = true;
            continue;
        }
        let want = if pattern { 2 } else { 3 };
        if toks.len() < want {
            return Err(ferr(lineno, format!("expected {want} fields per entry")));
        }
        let r: usize = toks[0].parse().map_err(|_| ferr(lineno, "bad row index"))?;
        let c: usize = toks[1].parse().map_err(|_| ferr(lineno, "bad column index"))?;
        if r < 1 || r > n_rows || c < 1 || c > n_cols {
            return Err(ferr(
                lineno,
                format!("entry ({r}, {c}) outside declared {n_rows}x{n_cols} bounds"),
            ));
        }
        let v: f64 = if pattern {
            1.0
        } else {
            toks[2].parse().map_err(|_| ferr(lineno, "bad value"))?
        };
        let (r, c) = (r - 1, c - 1);
        triples.push((r, c, v));
        if symmetric && r != c {
            triples.push((c, r, v));
        }
    }
    if !have_size {
        return Err(ferr(1, "missing size line"));
    }
    if triples.len() < nnz {
        return Err(ferr(
            1,
            format!("declared {nnz} entries, found {}", triples.len()),
        ));
    }
    CsrMatrix::from_triples(n_rows, n_cols, triples)
        .map_err(|e| ferr(1, format!("invalid matrix: {e}")))
}

pub fn write_matrix_market(m: &CsrMatrix) -> String {
    let mut out = String::new();
    out.push_str("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", m.n_rows, m.n_cols, m.nnz());
    for r in 0..m.n_rows {
        for k in m.offsets[r]..m.offsets[r + 1] {
            let _ = writeln!(out, "{} {} {:?}", r + 1, m.col_idx[k] + 1, m.values[k]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_expansion() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n\
                    3 3 2\n2 1 5.0\n3 2 7.0\n";
        let m = parse_matrix_market(text).unwrap();
        assert_eq!(m.nnz(), 4);
        assert_eq!(m.spmv(&[1.0, 1.0, 1.0]), vec![5.0, 12.0, 7.0]);
    }

    #[test]
    fn pattern_defaults_to_one() {
        let text = "%%MatrixMarket matrix coordinate pattern general\n\
                    2 2 2\n1 1\n2 2\n";
        let m = parse_matrix_market(text).unwrap();
        assert_eq!(m.values, vec![1.0, 1.0]);
    }

    #[test]
    fn roundtrip_structure() {
        let m = CsrMatrix::from_triples(
            3,
            3,
            vec![(0, 1, 2.5), (1, 0, -1.0), (2, 2, 4.0), (0, 2, 0.125)],
        )
        .unwrap();
        let text = write_matrix_market(&m);
        let back = parse_matrix_market(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(parse_matrix_market("%%MatrixMarket matrix array real general\n1 1 1\n").is_err());
    }

    #[test]
    fn out_of_bounds_entry_rejected() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert!(parse_matrix_market(text).is_err());
    }
}

//! Dense kernel files.
//!
//! CSV: one row per entry, `i_1, ..., i_n, value`, indices in any order;
//! permutations of one multi-index must agree and absent entries are zero.
//! A first row whose leading field is not an integer is taken as a header.
//!
//! Binary: little-endian `f64` values in canonical sorted-multi-index order.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernel::{multiset_count, multiset_rank, Kernel};

pub fn read_dense_csv(grid: &Arc<Grid>, order: usize, path: &Path) -> Result<Kernel> {
    let file = std::fs::File::open(path)?;
    parse_dense_csv(grid, order, file).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn parse_dense_csv(grid: &Arc<Grid>, order: usize, input: impl Read) -> Result<Kernel> {
    let m = grid.len();
    let size = multiset_count(m, order);
    let mut values = vec![0.0; size];
    let mut seen = vec![false; size];
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let parse_err = |line: u64, message: String| Error::Parse {
        path: "<input>".into(),
        message: format!("line {line}: {message}"),
    };
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(row as u64 + 1, e.to_string()))?;
        let line = rec.position().map_or(row as u64 + 1, |p| p.line());
        if row == 0 && rec.get(0).is_some_and(|f| f.parse::<usize>().is_err()) {
            continue;
        }
        if rec.len() != order + 1 {
            return Err(parse_err(line, format!("expected {} fields, found {}", order + 1, rec.len())));
        }
        let mut idx = Vec::with_capacity(order);
        for f in rec.iter().take(order) {
            let i: usize = f.parse().map_err(|_| parse_err(line, format!("bad cell index {f:?}")))?;
            if i >= m {
                return Err(parse_err(line, format!("cell index {i} out of range for {m} cells")));
            }
            idx.push(i);
        }
        let raw = &rec[order];
        let v: f64 = raw.parse().map_err(|_| parse_err(line, format!("bad value {raw:?}")))?;
        if !v.is_finite() {
            return Err(parse_err(line, format!("non-finite value {raw:?}")));
        }
        idx.sort_unstable();
        let r = multiset_rank(&idx);
        if seen[r] && values[r] != v {
            return Err(parse_err(line, format!("conflicting value for multi-index {idx:?}")));
        }
        seen[r] = true;
        values[r] = v;
    }
    Kernel::dense(grid, order, values)
}

pub fn read_dense_binary(grid: &Arc<Grid>, order: usize, path: &Path) -> Result<Kernel> {
    let bytes = std::fs::read(path)?;
    decode_dense_binary(grid, order, &bytes).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn decode_dense_binary(grid: &Arc<Grid>, order: usize, bytes: &[u8]) -> Result<Kernel> {
    let expected = multiset_count(grid.len(), order);
    if bytes.len() != 8 * expected {
        return Err(Error::Parse {
            path: "<input>".into(),
            message: format!("expected {} bytes ({expected} values), found {}", 8 * expected, bytes.len()),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Kernel::dense(grid, order, values)
}

/// Inverse of [`decode_dense_binary`] for dense kernels.
pub fn encode_dense_binary(k: &Kernel) -> Result<Vec<u8>> {
    let dense = k.to_dense()?;
    match dense.repr() {
        crate::kernel::KernelRepr::DenseSym(v) => Ok(v.iter().flat_map(|x| x.to_le_bytes()).collect()),
        crate::kernel::KernelRepr::SeparableSum(_) => unreachable!("to_dense returns a dense kernel"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridFn;

    #[test]
    fn csv_round_trip_with_permutations() {
        let g = Grid::unit_interval(3).unwrap();
        let text = "i,j,value\n0,0,1.5\n2,1,-0.5\n1,2,-0.5\n# comment\n0,2,2\n";
        let k = parse_dense_csv(&g, 2, text.as_bytes()).unwrap();
        assert_eq!(k.value(&[0, 0]), 1.5);
        assert_eq!(k.value(&[1, 2]), -0.5);
        assert_eq!(k.value(&[2, 0]), 2.0);
        assert_eq!(k.value(&[1, 1]), 0.0);
    }

    #[test]
    fn csv_errors() {
        let g = Grid::unit_interval(3).unwrap();
        for bad in ["0,1,1\n1,0,2\n", "0,5,1\n", "0,1\n", "0,1,nan\n", "0,x,1\n1,1,2\n"] {
            let e = parse_dense_csv(&g, 2, bad.as_bytes());
            assert!(matches!(e, Err(Error::Parse { .. })), "{bad:?}: {e:?}");
        }
    }

    #[test]
    fn binary_round_trip() {
        let g = Grid::unit_interval(5).unwrap();
        let f = GridFn::from_fn(&g, |t| t[0] + 0.1).unwrap();
        let k = Kernel::rank_one(&f, 3, 0.5).unwrap();
        let bytes = encode_dense_binary(&k).unwrap();
        let back = decode_dense_binary(&g, 3, &bytes).unwrap();
        for idx in [[0, 1, 2], [4, 4, 0], [3, 3, 3]] {
            assert!((back.value(&idx) - k.value(&idx)).abs() < 1e-15);
        }
        assert!(decode_dense_binary(&g, 3, &bytes[..bytes.len() - 8]).is_err());
    }
}

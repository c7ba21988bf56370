//! Experiment problem builders: diagonal spectra with known closed forms,
//! Matrix Market ingestion, the Wilson-fermion composition, and seeded
//! Gaussian starting blocks.

use crate::error::{Error, Result};
use crate::linalg::{BlockVector, Cpx};
use crate::operator::{DiagonalOp, LinearOperator, OpRef};
use crate::rng::NormalSource;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

/// Diagonal operator with entries linearly spaced over [lo, hi].
pub fn gen_linspace_diag(n: usize, lo: f64, hi: f64) -> DiagonalOp {
    assert!(n >= 2 && lo < hi);
    DiagonalOp::new(
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    )
}

/// Diagonal operator with the clustered model spectrum
/// λ_i = λ_1 + ((i−1)/(n−1)) (λ_n − λ_1) ρ^{n−i}, λ_1 = 1/κ, λ_n = 1.
pub fn gen_model_problem(n: usize, kappa: f64, rho: f64) -> DiagonalOp {
    assert!(n >= 2 && kappa > 1.0 && rho > 0.0 && rho <= 1.0);
    let l1 = 1.0 / kappa;
    let ln = 1.0;
    DiagonalOp::new(
        (1..=n)
            .map(|i| {
                l1 + ((i - 1) as f64 / (n - 1) as f64)
                    * (ln - l1)
                    * rho.powi((n - i) as i32)
            })
            .collect(),
    )
}

/// Hermitian sparse operator in compressed-row form, as read from a
/// Matrix Market file.
#[derive(Debug)]
pub struct SparseOp {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<Cpx>,
    real: bool,
    /// `<field> <symmetry>` from the header, kept for provenance.
    pub header: String,
}

impl SparseOp {
    /// Assemble CSR from (row, col, value) triplets; duplicates accumulate.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, Cpx)]) -> Self {
        let mut merged: HashMap<(usize, usize), Cpx> = HashMap::new();
        for &(i, j, v) in triplets {
            assert!(i < n && j < n);
            *merged.entry((i, j)).or_insert(Cpx::new(0.0, 0.0)) += v;
        }
        let mut entries: Vec<((usize, usize), Cpx)> = merged.into_iter().collect();
        entries.sort_by_key(|&((i, j), _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut vals = Vec::with_capacity(entries.len());
        for &((i, j), v) in &entries {
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            vals.push(v);
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let real = vals.iter().all(|v| v.im == 0.0);
        SparseOp {
            n,
            row_ptr,
            col_idx,
            vals,
            real,
            header: String::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// All stored entries as (row, col, value), row-major.
    pub fn triplets(&self) -> Vec<(usize, usize, Cpx)> {
        let mut out = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                out.push((i, self.col_idx[p], self.vals[p]));
            }
        }
        out
    }
}

impl LinearOperator for SparseOp {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &BlockVector) -> BlockVector {
        assert_eq!(x.nrows(), self.n);
        let b = x.ncols();
        let mut y = BlockVector::zeros(self.n, b);
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let (j, v) = (self.col_idx[p], self.vals[p]);
                for c in 0..b {
                    y[(i, c)] += v * x[(j, c)];
                }
            }
        }
        y
    }

    fn is_real(&self) -> bool {
        self.real
    }

    fn dense(&self) -> Option<BlockVector> {
        let mut m = BlockVector::zeros(self.n, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        Some(m)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::ParseError {
        line,
        message: message.into(),
    }
}

/// Read a Matrix Market coordinate file into a Hermitian sparse operator.
///
/// Supported: `coordinate` format with `real`, `integer`, or `complex`
/// field and `general`, `symmetric`, or `hermitian` symmetry. Symmetric
/// and Hermitian files store one triangle, which is mirrored; `general`
/// files are checked for Hermitian symmetry (tolerance 1e-12 relative to
/// the largest entry), never coerced.
pub fn load_matrix_market(path: &Path) -> Result<SparseOp> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file"))?;
    let tokens: Vec<String> = header.split_whitespace().map(str::to_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(1, "expected `%%MatrixMarket matrix ...` header"));
    }
    let (format, field, symmetry) = (&tokens[2], &tokens[3], &tokens[4]);
    if format != "coordinate" {
        return Err(parse_err(1, format!("unsupported format `{format}` (only coordinate)")));
    }
    let complex = match field.as_str() {
        "real" | "integer" => false,
        "complex" => true,
        other => {
            return Err(parse_err(1, format!("unsupported field `{other}` (real, integer, complex)")))
        }
    };
    match symmetry.as_str() {
        "general" | "symmetric" | "hermitian" => {}
        other => {
            return Err(parse_err(
                1,
                format!("unsupported symmetry `{other}` (general, symmetric, hermitian)"),
            ))
        }
    }

    // Size line: first non-comment line after the header.
    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets: Vec<(usize, usize, Cpx)> = Vec::new();
    for (idx, raw) in lines {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if size.is_none() {
            if fields.len() != 3 {
                return Err(parse_err(lineno, "size line must be `rows cols nnz`"));
            }
            let dims: Vec<usize> = fields
                .iter()
                .map(|f| f.parse().map_err(|_| parse_err(lineno, "bad size entry")))
                .collect::<Result<_>>()?;
            if dims[0] != dims[1] {
                return Err(parse_err(lineno, format!("matrix must be square, got {}x{}", dims[0], dims[1])));
            }
            size = Some((dims[0], dims[1], dims[2]));
            continue;
        }
        let expected = if complex { 4 } else { 3 };
        if fields.len() != expected {
            return Err(parse_err(lineno, format!("expected {expected} fields, got {}", fields.len())));
        }
        let i: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(lineno, "bad row index"))?;
        let j: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(lineno, "bad column index"))?;
        let re: f64 = fields[2]
            .parse()
            .map_err(|_| parse_err(lineno, "bad value"))?;
        let im: f64 = if complex {
            fields[3]
                .parse()
                .map_err(|_| parse_err(lineno, "bad imaginary value"))?
        } else {
            0.0
        };
        let (n, _, _) = size.unwrap();
        if i < 1 || i > n || j < 1 || j > n {
            return Err(parse_err(lineno, format!("index ({i},{j}) out of range 1..{n}")));
        }
        let v = Cpx::new(re, im);
        triplets.push((i - 1, j - 1, v));
        if symmetry != "general" && i != j {
            triplets.push((j - 1, i - 1, v.conj()));
        }
    }
    let Some((n, _, nnz)) = size else {
        return Err(parse_err(1, "missing size line"));
    };
    let stored = if symmetry == "general" {
        triplets.len()
    } else {
        triplets.iter().filter(|&&(i, j, _)| i <= j).count()
    };
    if stored != nnz {
        return Err(parse_err(1, format!("nnz mismatch: header says {nnz}, found {stored}")));
    }

    if symmetry == "general" {
        let map: HashMap<(usize, usize), Cpx> =
            triplets.iter().map(|&(i, j, v)| ((i, j), v)).collect();
        let scale = triplets
            .iter()
            .map(|&(_, _, v)| v.norm())
            .fold(1.0f64, f64::max);
        for &(i, j, v) in &triplets {
            let mirror = map.get(&(j, i)).copied().unwrap_or(Cpx::new(0.0, 0.0));
            let dev = (v - mirror.conj()).norm();
            if dev > 1e-12 * scale {
                return Err(Error::NotHermitianEntry {
                    row: i + 1,
                    col: j + 1,
                    deviation: dev,
                });
            }
        }
    }

    let mut op = SparseOp::from_triplets(n, &triplets);
    op.header = format!("{field} {symmetry}");
    Ok(op)
}

/// Write the operator's stored entries as a `general` coordinate file.
/// Values use Rust's shortest round-trip float formatting, so reading the
/// file back reproduces them bit-exactly.
pub fn save_matrix_market(path: &Path, op: &SparseOp) -> Result<()> {
    let triplets = op.triplets();
    let field = if op.is_real() { "real" } else { "complex" };
    let mut out = String::new();
    let _ = writeln!(out, "%%MatrixMarket matrix coordinate {field} general");
    let _ = writeln!(out, "{} {} {}", op.dim(), op.dim(), triplets.len());
    for (i, j, v) in triplets {
        if op.is_real() {
            let _ = writeln!(out, "{} {} {}", i + 1, j + 1, v.re);
        } else {
            let _ = writeln!(out, "{} {} {} {}", i + 1, j + 1, v.re, v.im);
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Dimension the Wilson-fermion composition requires: 3 · 4 · 256.
pub const WILSON_DIM: usize = 3072;

/// The permutation index map of P = I₃ ⊗ K ⊗ I₂₅₆, where the 4×4 block K
/// swaps components (1,3) and (2,4). The middle coordinate occupies bits
/// 8–9 of the flat index, and swapping pairs is an xor on bit 9.
pub fn wilson_permutation(i: usize) -> usize {
    i ^ 512
}

/// H = P (I − (4/3)·κ·D): the Hermitian Wilson-fermion operator built from
/// a lattice Dirac matrix D. P is applied as an index map and never
/// materialized.
pub struct WilsonOp {
    d: OpRef,
    kappa_hopping: f64,
}

/// Compose the Wilson operator. `kappa_hopping` is the hopping parameter
/// (0.20611 for the lattice configuration the experiments target).
pub fn wilson_fermion(d: OpRef, kappa_hopping: f64) -> Result<WilsonOp> {
    if d.dim() != WILSON_DIM {
        return Err(Error::DimensionMismatch {
            expected: WILSON_DIM,
            actual: d.dim(),
        });
    }
    Ok(WilsonOp { d, kappa_hopping })
}

impl LinearOperator for WilsonOp {
    fn dim(&self) -> usize {
        WILSON_DIM
    }

    fn apply(&self, x: &BlockVector) -> BlockVector {
        let m = x - self.d.apply(x).map(|v| v * (4.0 / 3.0 * self.kappa_hopping));
        let mut y = BlockVector::zeros(x.nrows(), x.ncols());
        for i in 0..WILSON_DIM {
            let src = wilson_permutation(i);
            for c in 0..x.ncols() {
                y[(i, c)] = m[(src, c)];
            }
        }
        y
    }

    fn is_real(&self) -> bool {
        self.kappa_hopping == 0.0 || self.d.is_real()
    }

    fn dense(&self) -> Option<BlockVector> {
        let inner = self.d.dense()?;
        let mut m = BlockVector::identity(WILSON_DIM, WILSON_DIM)
            - inner.map(|v| v * (4.0 / 3.0 * self.kappa_hopping));
        // Apply P by permuting rows in place (pairs swap).
        for i in 0..WILSON_DIM {
            let j = wilson_permutation(i);
            if i < j {
                m.swap_rows(i, j);
            }
        }
        Some(m)
    }
}

/// n×b block with independent standard-normal entries drawn column by
/// column from [`NormalSource`] seeded with `seed`.
pub fn gaussian_block(n: usize, b: usize, seed: u64) -> BlockVector {
    assert!(n >= b);
    let mut src = NormalSource::new(seed);
    let mut v = BlockVector::zeros(n, b);
    for j in 0..b {
        for i in 0..n {
            v[(i, j)] = Cpx::new(src.next_normal(), 0.0);
        }
    }
    v
}

/// Stand-in for the Wilson-fermion experiment when the lattice file is
/// absent: a diagonal operator with an indefinite spectrum filling
/// [−1, −gap] ∪ [gap, 1] evenly.
pub fn gen_indefinite_diag(n: usize, gap: f64) -> DiagonalOp {
    assert!(n >= 4 && n % 2 == 0 && gap > 0.0 && gap < 1.0);
    let half = n / 2;
    let mut entries = Vec::with_capacity(n);
    for i in 0..half {
        entries.push(-1.0 + (1.0 - gap) * i as f64 / (half - 1) as f64);
    }
    for i in 0..half {
        entries.push(gap + (1.0 - gap) * i as f64 / (half - 1) as f64);
    }
    DiagonalOp::new(entries)
}

/// Convenience constructor used by the CLI for dense random test problems.
pub fn gen_dense_random(n: usize, seed: u64) -> OpRef {
    let m = crate::testutil::rand_hermitian(n, seed);
    Arc::new(crate::operator::DenseOp::new(m).expect("constructed Hermitian"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::hermitian_probe;
    use approx::assert_relative_eq;

    #[test]
    fn linspace_matches_closed_form() {
        let op = gen_linspace_diag(1000, 1e-2, 1.0);
        let d = op.entries();
        assert_relative_eq!(d[0], 0.01, epsilon = 1e-15);
        assert_relative_eq!(d[999], 1.0, epsilon = 1e-15);
        let op = gen_linspace_diag(5, 1.0, 5.0);
        for (i, &v) in op.entries().iter().enumerate() {
            assert_relative_eq!(v, (i + 1) as f64, epsilon = 1e-15);
        }
        assert_eq!(gen_linspace_diag(2, 0.0, 1.0).entries(), &[0.0, 1.0]);
    }

    #[test]
    fn model_problem_closed_form() {
        let op = gen_model_problem(500, 1e3, 0.9);
        let d = op.entries();
        assert_relative_eq!(d[0], 0.001, epsilon = 1e-15);
        assert_relative_eq!(d[499], 1.0, epsilon = 1e-15);
        let expect = 0.001 + (1.0 / 499.0) * 0.999 * 0.9f64.powi(498);
        assert_relative_eq!(d[1], expect, epsilon = 1e-15);
    }

    #[test]
    fn model_problem_rho_one_is_linspace() {
        let a = gen_model_problem(50, 100.0, 1.0);
        let b = gen_linspace_diag(50, 1e-2, 1.0);
        for (x, y) in a.entries().iter().zip(b.entries()) {
            assert_relative_eq!(x, y, epsilon = 1e-15);
        }
    }

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_two_by_two_symmetric() {
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate real symmetric\n\
             % comment\n\
             2 2 3\n\
             1 1 2.0\n\
             2 1 1.0\n\
             2 2 3.0\n",
        );
        let op = load_matrix_market(f.path()).unwrap();
        let dense = op.dense().unwrap();
        assert_relative_eq!(dense[(0, 0)].re, 2.0);
        assert_relative_eq!(dense[(0, 1)].re, 1.0);
        assert_relative_eq!(dense[(1, 0)].re, 1.0);
        assert_relative_eq!(dense[(1, 1)].re, 3.0);
        assert!(op.is_real());
    }

    #[test]
    fn rejects_pattern_and_array() {
        let f = write_tmp("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n1 1\n");
        match load_matrix_market(f.path()) {
            Err(Error::ParseError { message, .. }) => assert!(message.contains("pattern")),
            other => panic!("expected ParseError, got {other:?}"),
        }
        let f = write_tmp("%%MatrixMarket matrix array real general\n2 2\n1.0\n");
        match load_matrix_market(f.path()) {
            Err(Error::ParseError { message, .. }) => assert!(message.contains("array")),
            other => panic!("expected ParseError, got {other:?}"),
        }
    }

    #[test]
    fn rejects_non_hermitian_general() {
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate real general\n\
             2 2 4\n1 1 1.0\n1 2 5.0\n2 1 2.0\n2 2 1.0\n",
        );
        assert!(matches!(
            load_matrix_market(f.path()),
            Err(Error::NotHermitianEntry { .. })
        ));
    }

    #[test]
    fn accepts_hermitian_complex_general() {
        let f = write_tmp(
            "%%MatrixMarket matrix coordinate complex general\n\
             2 2 4\n1 1 1.0 0.0\n1 2 0.5 -0.25\n2 1 0.5 0.25\n2 2 2.0 0.0\n",
        );
        let op = load_matrix_market(f.path()).unwrap();
        assert!(!op.is_real());
        assert!(hermitian_probe(&op, 10, 0, 1e-12));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let triplets = vec![
            (0, 0, Cpx::new(1.0 / 3.0, 0.0)),
            (0, 2, Cpx::new(0.1, -0.7)),
            (2, 0, Cpx::new(0.1, 0.7)),
            (1, 1, Cpx::new(-2.5, 0.0)),
            (2, 2, Cpx::new(std::f64::consts::PI, 0.0)),
        ];
        let op = SparseOp::from_triplets(3, &triplets);
        let f = tempfile::NamedTempFile::new().unwrap();
        save_matrix_market(f.path(), &op).unwrap();
        let back = load_matrix_market(f.path()).unwrap();
        assert_eq!(op.triplets(), back.triplets());
    }

    #[test]
    fn wilson_permutation_is_involution() {
        for i in 0..WILSON_DIM {
            assert_eq!(wilson_permutation(wilson_permutation(i)), i);
        }
        // Pairs (1,3) and (2,4) of the middle coordinate swap.
        assert_eq!(wilson_permutation(0), 2 * 256);
        assert_eq!(wilson_permutation(256), 3 * 256);
    }

    #[test]
    fn wilson_with_zero_kappa_is_pure_permutation() {
        let d: OpRef = Arc::new(DiagonalOp::new(vec![1.0; WILSON_DIM]));
        let h = wilson_fermion(d, 0.0).unwrap();
        let v = gaussian_block(WILSON_DIM, 1, 7);
        let pv = h.apply(&v);
        for i in 0..WILSON_DIM {
            assert_eq!(pv[(i, 0)], v[(wilson_permutation(i), 0)]);
        }
        // Applying twice returns the input.
        assert_eq!(h.apply(&pv), v);
    }

    #[test]
    fn wilson_rejects_wrong_dimension() {
        let d: OpRef = Arc::new(DiagonalOp::new(vec![1.0; 100]));
        assert!(matches!(
            wilson_fermion(d, 0.2),
            Err(Error::DimensionMismatch { expected: 3072, .. })
        ));
    }

    #[test]
    fn wilson_dense_agrees_with_apply() {
        // Use a Hermitian sparse D so the composition has a dense witness.
        let mut triplets = Vec::new();
        for i in 0..WILSON_DIM {
            triplets.push((i, i, Cpx::new(0.5 + (i % 7) as f64 * 0.1, 0.0)));
        }
        let d: OpRef = Arc::new(SparseOp::from_triplets(WILSON_DIM, &triplets));
        let h = wilson_fermion(d, 0.20611).unwrap();
        let v = gaussian_block(WILSON_DIM, 2, 3);
        let direct = h.apply(&v);
        let via_dense = h.dense().unwrap() * &v;
        assert!((direct - via_dense).norm() < 1e-12);
    }

    #[test]
    fn gaussian_block_is_deterministic() {
        let a = gaussian_block(50, 3, 9);
        let b = gaussian_block(50, 3, 9);
        assert_eq!(a, b);
        let c = gaussian_block(50, 3, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_block_first_entry_matches_generator() {
        let v = gaussian_block(4, 1, 0);
        let mut src = NormalSource::new(0);
        assert_eq!(v[(0, 0)].re, src.next_normal());
    }

    #[test]
    fn gaussian_columns_nearly_orthogonal() {
        let n = 4000;
        let v = gaussian_block(n, 3, 1);
        for i in 0..3 {
            for j in (i + 1)..3 {
                let vi = v.column(i);
                let vj = v.column(j);
                let cos = vi.dot(&vj.into_owned()).norm() / (vi.norm() * vj.norm());
                assert!(cos <= 5.0 / (n as f64).sqrt(), "cos = {cos}");
            }
        }
    }

    #[test]
    fn indefinite_diag_fills_both_branches() {
        let op = gen_indefinite_diag(400, 0.05);
        let d = op.entries();
        assert_relative_eq!(d[0], -1.0);
        assert_relative_eq!(d[199], -0.05);
        assert_relative_eq!(d[200], 0.05);
        assert_relative_eq!(d[399], 1.0);
        assert!(d.iter().all(|&x| x.abs() >= 0.05 - 1e-12));
    }

    #[test]
    fn generated_operators_pass_hermitian_probes() {
        let ops: Vec<Box<dyn LinearOperator>> = vec![
            Box::new(gen_linspace_diag(100, 1e-2, 1.0)),
            Box::new(gen_model_problem(100, 1e3, 0.9)),
            Box::new(gen_indefinite_diag(100, 0.05)),
        ];
        for op in &ops {
            assert!(hermitian_probe(op.as_ref(), 10, 0, 1e-10));
        }
    }
}

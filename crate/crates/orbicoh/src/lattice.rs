//! Integer matrices, Smith normal form and lattice quotients.
//!
//! Everything here is exact: entries are arbitrary-precision integers and
//! every decomposition is certified by unimodular bookkeeping (`u * m * v = s`
//! with `|det u| = |det v| = 1`). Sublattices are always given by the column
//! span of an integer matrix.

use num_bigint::BigInt;
use num_integer::Integer as _;
use num_traits::{One, Signed, Zero};
use std::fmt;

/// Arbitrary-precision integer used everywhere in this crate.
pub type Int = BigInt;

/// Convenience constructor for small constants.
pub fn int(x: i64) -> Int {
    Int::from(x)
}

/// Errors from lattice-level operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    /// `primitivize` was handed the zero vector.
    #[error("zero vector has no primitive direction")]
    ZeroVector,
    /// `quotient_projection` was handed columns that are not linearly independent.
    #[error("basis columns are linearly dependent")]
    RankDeficient,
    /// Exterior squares need an ambient rank of at least 2.
    #[error("ambient dimension {0} is too small for an exterior square")]
    DimensionTooSmall(usize),
}

/// A dense integer matrix, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Int>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Int>) -> Self {
        assert_eq!(data.len(), rows * cols, "shape/data mismatch");
        IntMatrix { rows, cols, data }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![Int::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m[(i, i)] = Int::one();
        }
        m
    }

    /// Matrix whose columns are the given vectors in `Z^rows`.
    pub fn from_columns(rows: usize, columns: &[Vec<Int>]) -> Self {
        let mut m = Self::zero(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length mismatch");
            for (i, x) in col.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<Int>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut m = Self::zero(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "row length mismatch");
            for (j, x) in row.iter().enumerate() {
                m[(i, j)] = x.clone();
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> Vec<Int> {
        (0..self.cols).map(|j| self[(i, j)].clone()).collect()
    }

    pub fn column(&self, j: usize) -> Vec<Int> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = Self::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Self::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let add = a * &other[(k, j)];
                    out[(i, j)] += add;
                }
            }
        }
        out
    }

    /// Image of a column vector under this matrix.
    pub fn apply(&self, v: &[Int]) -> Vec<Int> {
        assert_eq!(v.len(), self.cols, "vector length mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| &self[(i, j)] * &v[j]).sum())
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// row[dst] += k * row[src]
    fn add_row_multiple(&mut self, dst: usize, src: usize, k: &Int) {
        assert_ne!(dst, src);
        for j in 0..self.cols {
            let add = k * &self[(src, j)];
            self[(dst, j)] += add;
        }
    }

    /// col[dst] += k * col[src]
    fn add_col_multiple(&mut self, dst: usize, src: usize, k: &Int) {
        assert_ne!(dst, src);
        for i in 0..self.rows {
            let add = k * &self[(i, src)];
            self[(i, dst)] += add;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for j in 0..self.cols {
            let neg = -self[(i, j)].clone();
            self[(i, j)] = neg;
        }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn determinant(&self) -> Int {
        assert_eq!(self.rows, self.cols, "determinant needs a square matrix");
        let n = self.rows;
        if n == 0 {
            return Int::one();
        }
        let mut m = self.clone();
        let mut sign = Int::one();
        let mut prev = Int::one();
        for k in 0..n - 1 {
            if m[(k, k)].is_zero() {
                match (k + 1..n).find(|&r| !m[(r, k)].is_zero()) {
                    Some(r) => {
                        m.swap_rows(k, r);
                        sign = -sign;
                    }
                    None => return Int::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &m[(i, j)] * &m[(k, k)] - &m[(i, k)] * &m[(k, j)];
                    m[(i, j)] = num / &prev;
                }
            }
            prev = m[(k, k)].clone();
        }
        sign * m[(n - 1, n - 1)].clone()
    }

    pub fn is_unimodular(&self) -> bool {
        self.rows == self.cols && self.determinant().abs().is_one()
    }

    pub fn rank(&self) -> usize {
        smith_normal_form(self)
            .divisors
            .iter()
            .filter(|d| !d.is_zero())
            .count()
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = Int;
    fn index(&self, (i, j): (usize, usize)) -> &Int {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Int {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

/// Smith normal form `u * m * v = s` with unimodular `u`, `v`.
///
/// The diagonal of `s` is `divisors`: nonnegative, each dividing the next,
/// zeros only trailing.
#[derive(Debug, Clone)]
pub struct SmithDecomposition {
    pub u: IntMatrix,
    pub s: IntMatrix,
    pub v: IntMatrix,
    pub divisors: Vec<Int>,
}

impl SmithDecomposition {
    pub fn rank(&self) -> usize {
        self.divisors.iter().filter(|d| !d.is_zero()).count()
    }
}

/// Smith normal form over the integers.
///
/// Pivoting strategy: repeatedly move a minimal-absolute-value nonzero entry
/// of the working submatrix to the pivot and reduce its row and column; a
/// nonzero remainder or a non-divisible entry in the remaining block restarts
/// the stage with a strictly smaller pivot, so the loop terminates.
pub fn smith_normal_form(m: &IntMatrix) -> SmithDecomposition {
    let rows = m.rows();
    let cols = m.cols();
    let mut s = m.clone();
    let mut u = IntMatrix::identity(rows);
    let mut v = IntMatrix::identity(cols);
    let k = rows.min(cols);

    for t in 0..k {
        let Some((pr, pc)) = min_abs_nonzero(&s, t) else {
            break;
        };
        s.swap_rows(t, pr);
        u.swap_rows(t, pr);
        s.swap_cols(t, pc);
        v.swap_cols(t, pc);

        'stage: loop {
            // Clear column t below the pivot.
            for r in t + 1..rows {
                if !s[(r, t)].is_zero() {
                    let q = &s[(r, t)] / &s[(t, t)];
                    if !q.is_zero() {
                        let nq = -q;
                        s.add_row_multiple(r, t, &nq);
                        u.add_row_multiple(r, t, &nq);
                    }
                }
            }
            // Any remainder is strictly smaller than the pivot: promote it.
            if let Some(r) = (t + 1..rows).find(|&r| !s[(r, t)].is_zero()) {
                s.swap_rows(t, r);
                u.swap_rows(t, r);
                continue 'stage;
            }
            // Clear row t right of the pivot.
            for c in t + 1..cols {
                if !s[(t, c)].is_zero() {
                    let q = &s[(t, c)] / &s[(t, t)];
                    if !q.is_zero() {
                        let nq = -q;
                        s.add_col_multiple(c, t, &nq);
                        v.add_col_multiple(c, t, &nq);
                    }
                }
            }
            if let Some(c) = (t + 1..cols).find(|&c| !s[(t, c)].is_zero()) {
                s.swap_cols(t, c);
                v.swap_cols(t, c);
                continue 'stage;
            }
            // Pivot must divide the whole remaining block for the divisor
            // chain; folding an offending row in shrinks the pivot next pass.
            let pivot = s[(t, t)].clone();
            let offender = (t + 1..rows)
                .flat_map(|r| (t + 1..cols).map(move |c| (r, c)))
                .find(|&(r, c)| !(&s[(r, c)] % &pivot).is_zero());
            if let Some((r, _)) = offender {
                let one = Int::one();
                s.add_row_multiple(t, r, &one);
                u.add_row_multiple(t, r, &one);
                continue 'stage;
            }
            break;
        }

        if s[(t, t)].is_negative() {
            s.negate_row(t);
            u.negate_row(t);
        }
    }

    let divisors = (0..k).map(|i| s[(i, i)].clone()).collect();
    SmithDecomposition { u, s, v, divisors }
}

fn min_abs_nonzero(s: &IntMatrix, from: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for r in from..s.rows() {
        for c in from..s.cols() {
            if s[(r, c)].is_zero() {
                continue;
            }
            match best {
                None => best = Some((r, c)),
                Some((br, bc)) => {
                    if s[(r, c)].magnitude() < s[(br, bc)].magnitude() {
                        best = Some((r, c));
                    }
                }
            }
        }
    }
    best
}

/// A finitely generated abelian group in invariant-factor form:
/// `Z^free_rank + Z/t_1 + ... + Z/t_s` with `t_1 | t_2 | ... | t_s`, each
/// `t_i >= 2`.
#[derive(Clone, PartialEq, Eq)]
pub struct FinAbGroup {
    free_rank: usize,
    torsion: Vec<Int>,
}

impl FinAbGroup {
    /// Canonical constructor; unit factors are dropped, the divisibility
    /// chain is enforced.
    pub fn new(free_rank: usize, torsion: Vec<Int>) -> Self {
        let torsion: Vec<Int> = torsion.into_iter().filter(|t| !t.abs().is_one()).collect();
        for t in &torsion {
            assert!(t > &Int::one(), "torsion coefficients must be >= 2");
        }
        for w in torsion.windows(2) {
            assert!(
                (&w[1] % &w[0]).is_zero(),
                "torsion coefficients must form a divisibility chain"
            );
        }
        FinAbGroup { free_rank, torsion }
    }

    pub fn trivial() -> Self {
        FinAbGroup {
            free_rank: 0,
            torsion: Vec::new(),
        }
    }

    pub fn free(rank: usize) -> Self {
        FinAbGroup {
            free_rank: rank,
            torsion: Vec::new(),
        }
    }

    pub fn cyclic(t: &Int) -> Self {
        Self::new(0, vec![t.clone()])
    }

    pub fn free_rank(&self) -> usize {
        self.free_rank
    }

    pub fn torsion(&self) -> &[Int] {
        &self.torsion
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    /// Order of the group: finite iff the free rank is zero.
    pub fn order(&self) -> Index {
        if self.free_rank > 0 {
            Index::Infinite
        } else {
            Index::Finite(self.torsion.iter().product())
        }
    }

    /// Whether the group has p-torsion, i.e. p divides some invariant factor.
    pub fn has_p_torsion(&self, p: &Int) -> bool {
        self.torsion.iter().any(|t| (t % p).is_zero())
    }
}

impl fmt::Display for FinAbGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_trivial() {
            return write!(f, "0");
        }
        let mut parts = Vec::new();
        match self.free_rank {
            0 => {}
            1 => parts.push("Z".to_string()),
            r => parts.push(format!("Z^{r}")),
        }
        for t in &self.torsion {
            parts.push(format!("Z/{t}"));
        }
        write!(f, "{}", parts.join(" \u{2295} "))
    }
}

impl fmt::Debug for FinAbGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// The index of a sublattice: a positive integer, or infinite when the
/// sublattice has deficient rank. Never zero.
#[derive(Clone, PartialEq, Eq)]
pub enum Index {
    Finite(Int),
    Infinite,
}

impl Index {
    pub fn is_finite(&self) -> bool {
        matches!(self, Index::Finite(_))
    }

    pub fn finite(&self) -> Option<&Int> {
        match self {
            Index::Finite(x) => Some(x),
            Index::Infinite => None,
        }
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Index::Finite(x) if x.is_one())
    }

    /// True when the index is finite and coprime to `p`.
    pub fn coprime_to(&self, p: &Int) -> bool {
        match self {
            Index::Finite(x) => x.gcd(p).is_one(),
            Index::Infinite => false,
        }
    }
}

impl fmt::Display for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Index::Finite(x) => write!(f, "{x}"),
            Index::Infinite => write!(f, "\u{221e}"),
        }
    }
}

impl fmt::Debug for Index {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl From<i64> for Index {
    fn from(x: i64) -> Self {
        Index::Finite(int(x))
    }
}

/// Cokernel `Z^rows / colspan(m)` in canonical form.
pub fn cokernel(m: &IntMatrix) -> FinAbGroup {
    let snf = smith_normal_form(m);
    let rank = snf.rank();
    let torsion = snf
        .divisors
        .iter()
        .filter(|d| !d.is_zero() && !d.is_one())
        .cloned()
        .collect();
    FinAbGroup::new(m.rows() - rank, torsion)
}

/// Index of the column span of `m` in `Z^rows`: the product of the
/// elementary divisors when the span has full rank, infinite otherwise.
pub fn lattice_index(m: &IntMatrix) -> Index {
    let snf = smith_normal_form(m);
    if snf.rank() < m.rows() {
        Index::Infinite
    } else {
        Index::Finite(snf.divisors.iter().take(m.rows()).product())
    }
}

/// Divide a nonzero vector by the (positive) gcd of its entries.
/// Returns the primitive vector and the gcd.
pub fn primitivize(v: &[Int]) -> Result<(Vec<Int>, Int), LatticeError> {
    let g = gcd_all(v.iter());
    if g.is_zero() {
        return Err(LatticeError::ZeroVector);
    }
    Ok((v.iter().map(|x| x / &g).collect(), g))
}

pub fn gcd_all<'a>(vals: impl IntoIterator<Item = &'a Int>) -> Int {
    let mut g = Int::zero();
    for x in vals {
        g = g.gcd(x);
        if g.is_one() {
            break;
        }
    }
    g
}

/// A surjection `Z^n -> Z^(n-r)` whose kernel is the saturation of the
/// column span of `basis` (an `n x r` matrix of independent columns):
/// the real span intersected with the integer lattice.
pub fn quotient_projection(basis: &IntMatrix) -> Result<IntMatrix, LatticeError> {
    let n = basis.rows();
    let r = basis.cols();
    let snf = smith_normal_form(basis);
    if snf.rank() < r {
        return Err(LatticeError::RankDeficient);
    }
    // u * basis * v = diag(e_1..e_r); the saturation maps to <e_1..e_r>
    // under u, so dropping the first r coordinates of u-space works.
    let mut proj = IntMatrix::zero(n - r, n);
    for i in r..n {
        for j in 0..n {
            proj[(i - r, j)] = snf.u[(i, j)].clone();
        }
    }
    Ok(proj)
}

/// Position of `e_a /\ e_b` (`a < b`, zero-based) in the lexicographic basis
/// of the exterior square of `Z^n`.
pub fn wedge_basis_index(a: usize, b: usize, n: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * n - a * (a + 1) / 2 + (b - a - 1)
}

/// Coordinates of `v /\ w` in the lexicographic `e_a /\ e_b` basis.
pub fn wedge_pair(v: &[Int], w: &[Int], n: usize) -> Vec<Int> {
    assert_eq!(v.len(), n);
    assert_eq!(w.len(), n);
    let mut out = vec![Int::zero(); n * (n - 1) / 2];
    for a in 0..n {
        for b in a + 1..n {
            out[wedge_basis_index(a, b, n)] = &v[a] * &w[b] - &v[b] * &w[a];
        }
    }
    out
}

/// The quotient of the exterior square of `Z^n` by the sublattice spanned by
/// all `v_i /\ e_j`.
pub fn wedge_square_quotient(vectors: &[Vec<Int>], n: usize) -> Result<FinAbGroup, LatticeError> {
    if n < 2 {
        return Err(LatticeError::DimensionTooSmall(n));
    }
    let mut e = vec![Int::zero(); n];
    let mut columns = Vec::with_capacity(vectors.len() * n);
    for v in vectors {
        assert_eq!(v.len(), n, "vector length mismatch");
        for j in 0..n {
            e[j] = Int::one();
            columns.push(wedge_pair(v, &e, n));
            e[j] = Int::zero();
        }
    }
    let m = IntMatrix::from_columns(n * (n - 1) / 2, &columns);
    Ok(cokernel(&m))
}

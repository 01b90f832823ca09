use std::fmt;

use super::{Fe, Polynomial, PrimeField};
use crate::error::{Error, Result};

/// Dense row-major matrix over a single prime field.
#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl Matrix {
    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        Matrix { field, rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: PrimeField, size: usize) -> Self {
        let mut m = Self::zeros(field, size, size);
        for i in 0..size {
            m.data[i * size + i] = 1;
        }
        m
    }

    /// Builds a matrix from integer rows, reducing every entry modulo `q`.
    pub fn from_rows<R: AsRef<[u64]>>(field: PrimeField, rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend(r.iter().map(|&v| v % field.modulus()));
        }
        Ok(Matrix { field, rows: rows.len(), cols, data })
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Fe {
        self.field.elem(self.data[r * self.cols + c])
    }

    pub fn set(&mut self, r: usize, c: usize, v: Fe) {
        assert_eq!(v.field(), self.field, "entry from a different field");
        self.data[r * self.cols + c] = v.value();
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = Fe> + '_ {
        self.data[r * self.cols..(r + 1) * self.cols].iter().map(|&v| self.field.elem(v))
    }

    pub(crate) fn row_raw(&self, r: usize) -> &[u64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Row-major integer representatives.
    pub fn to_rows(&self) -> Vec<Vec<u64>> {
        (0..self.rows).map(|r| self.row_raw(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.field, self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// The submatrix made of the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row_raw(r));
        }
        Matrix { field: self.field, rows: rows.len(), cols: self.cols, data }
    }

    /// Appends one row given as integer representatives.
    pub fn push_row(&mut self, row: &[u64]) -> Result<()> {
        if row.len() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "pushed row has {} entries, matrix has {} columns",
                row.len(),
                self.cols
            )));
        }
        self.data.extend(row.iter().map(|&v| v % self.field.modulus()));
        self.rows += 1;
        Ok(())
    }

    fn check_field(&self, other: &Matrix) -> Result<()> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                left: self.field.modulus(),
                right: other.field.modulus(),
            });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Matrix) -> Result<Matrix> {
        self.check_field(other)?;
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let f = self.field;
        let mut out = Matrix::zeros(f, self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let idx = r * other.cols + c;
                    out.data[idx] = f.add_raw(out.data[idx], f.mul_raw(a, other.data[k * other.cols + c]));
                }
            }
        }
        Ok(out)
    }

    /// Matrix–vector product.
    pub fn mul_vec(&self, v: &[Fe]) -> Result<Vec<Fe>> {
        if v.len() != self.cols {
            return Err(Error::LengthMismatch { what: "vector", expected: self.cols, got: v.len() });
        }
        let f = self.field;
        if let Some(bad) = v.iter().find(|x| x.field() != f) {
            return Err(Error::FieldMismatch { left: f.modulus(), right: bad.field().modulus() });
        }
        Ok((0..self.rows)
            .map(|r| {
                let acc = self
                    .row_raw(r)
                    .iter()
                    .zip(v)
                    .fold(0, |acc, (&a, x)| f.add_raw(acc, f.mul_raw(a, x.value())));
                f.elem(acc)
            })
            .collect())
    }

    /// Forward elimination to row echelon form on a copy.
    ///
    /// Pivots are the first nonzero entry in each column. Returns the echelon
    /// matrix, the pivot columns, and the number of row swaps.
    fn echelon(&self) -> (Matrix, Vec<usize>, usize) {
        let f = self.field;
        let mut m = self.clone();
        let mut pivots = Vec::new();
        let mut swaps = 0;
        let mut row = 0;
        for col in 0..m.cols {
            if row == m.rows {
                break;
            }
            let Some(p) = (row..m.rows).find(|&r| m.data[r * m.cols + col] != 0) else {
                continue;
            };
            if p != row {
                m.swap_rows(p, row);
                swaps += 1;
            }
            let inv = f.inv_raw(m.data[row * m.cols + col]).expect("pivot is nonzero");
            for r in row + 1..m.rows {
                let factor = f.mul_raw(m.data[r * m.cols + col], inv);
                if factor != 0 {
                    m.axpy_row(r, row, factor, col);
                }
            }
            pivots.push(col);
            row += 1;
        }
        (m, pivots, swaps)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let cols = self.cols;
        let (lo, hi) = (a.min(b), a.max(b));
        let (head, tail) = self.data.split_at_mut(hi * cols);
        head[lo * cols..(lo + 1) * cols].swap_with_slice(&mut tail[..cols]);
    }

    /// `row[dst] -= factor * row[src]`, touching columns from `from` onward.
    fn axpy_row(&mut self, dst: usize, src: usize, factor: u64, from: usize) {
        let f = self.field;
        let cols = self.cols;
        for c in from..cols {
            let s = self.data[src * cols + c];
            if s != 0 {
                let d = &mut self.data[dst * cols + c];
                *d = f.sub_raw(*d, f.mul_raw(factor, s));
            }
        }
    }

    pub fn rank(&self) -> usize {
        self.echelon().1.len()
    }

    /// Determinant; row swaps flip the sign.
    pub fn det(&self) -> Result<Fe> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "determinant of a {}x{} matrix",
                self.rows, self.cols
            )));
        }
        let (e, pivots, swaps) = self.echelon();
        let f = self.field;
        if pivots.len() < self.rows {
            return Ok(f.zero());
        }
        let mut d = (0..self.rows).fold(1, |acc, i| f.mul_raw(acc, e.data[i * e.cols + i]));
        if swaps % 2 == 1 {
            d = f.neg_raw(d);
        }
        Ok(f.elem(d))
    }

    /// Solves `self · X = rhs` by Gauss–Jordan elimination.
    pub fn gauss_solve(&self, rhs: &Matrix) -> Result<Matrix> {
        self.check_field(rhs)?;
        if !self.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix is {}x{}",
                self.rows, self.cols
            )));
        }
        if rhs.rows != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "right-hand side has {} rows, expected {}",
                rhs.rows, self.rows
            )));
        }
        let f = self.field;
        let n = self.rows;
        let w = n + rhs.cols;
        // Augmented [self | rhs].
        let mut aug = Matrix::zeros(f, n, w);
        for r in 0..n {
            aug.data[r * w..r * w + n].copy_from_slice(self.row_raw(r));
            aug.data[r * w + n..(r + 1) * w].copy_from_slice(rhs.row_raw(r));
        }
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| aug.data[r * w + col] != 0) else {
                return Err(Error::SingularMatrix { rank: self.rank(), size: n });
            };
            aug.swap_rows(p, col);
            let inv = f.inv_raw(aug.data[col * w + col])?;
            for c in col..w {
                let v = &mut aug.data[col * w + c];
                *v = f.mul_raw(*v, inv);
            }
            for r in 0..n {
                if r != col {
                    let factor = aug.data[r * w + col];
                    if factor != 0 {
                        aug.axpy_row(r, col, factor, col);
                    }
                }
            }
        }
        let mut out = Matrix::zeros(f, n, rhs.cols);
        for r in 0..n {
            out.data[r * rhs.cols..(r + 1) * rhs.cols].copy_from_slice(&aug.data[r * w + n..(r + 1) * w]);
        }
        Ok(out)
    }

    pub fn invert(&self) -> Result<Matrix> {
        self.gauss_solve(&Matrix::identity(self.field, self.rows))
    }

    /// The matrix with entries `points[r]^c` for `c = 1..=cols`.
    ///
    /// There is no constant column, so invertibility needs the points to be
    /// distinct and nonzero.
    pub fn vandermonde(points: &[Fe], cols: usize) -> Result<Matrix> {
        let Some(first) = points.first() else {
            return Err(Error::InvalidParameter("vandermonde needs at least one point".into()));
        };
        let f = first.field();
        for (i, p) in points.iter().enumerate() {
            if p.field() != f {
                return Err(Error::FieldMismatch { left: f.modulus(), right: p.field().modulus() });
            }
            if p.is_zero() || points[..i].contains(p) {
                return Err(Error::BadEvaluationPoint(p.value()));
            }
        }
        let mut m = Matrix::zeros(f, points.len(), cols);
        for (r, p) in points.iter().enumerate() {
            let mut acc = 1;
            for c in 0..cols {
                acc = f.mul_raw(acc, p.value());
                m.data[r * cols + c] = acc;
            }
        }
        Ok(m)
    }

    /// The `m x m` circulant whose first column is `coeffs` (zero-padded).
    pub fn circulant(coeffs: &[Fe], m: usize) -> Result<Matrix> {
        let f = coeffs.first().map(|c| c.field()).ok_or_else(|| {
            Error::InvalidParameter("circulant needs at least one coefficient".into())
        })?;
        if coeffs.len() > m {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for an order-{m} circulant",
                coeffs.len()
            )));
        }
        let mut out = Matrix::zeros(f, m, m);
        for r in 0..m {
            for c in 0..m {
                let idx = (r + m - c) % m;
                if let Some(v) = coeffs.get(idx) {
                    out.data[r * m + c] = v.value();
                }
            }
        }
        Ok(out)
    }
}

/// Whether the `m x m` circulant with associated polynomial
/// `coeffs[0] + coeffs[1] x + ...` is nonsingular, decided by
/// `gcd(x^m - 1, V(x)) = 1`.
pub fn circulant_nonsingular(coeffs: &[Fe], m: usize) -> Result<bool> {
    let Some(first) = coeffs.first() else {
        return Ok(false);
    };
    let f = first.field();
    if m == 0 {
        return Err(Error::InvalidParameter("circulant order must be positive".into()));
    }
    // Reduce V modulo x^m - 1 first so longer inputs wrap around.
    let mut reduced = vec![0; m];
    for (i, c) in coeffs.iter().enumerate() {
        if c.field() != f {
            return Err(Error::FieldMismatch { left: f.modulus(), right: c.field().modulus() });
        }
        reduced[i % m] = f.add_raw(reduced[i % m], c.value());
    }
    let v = Polynomial::from_raw(f, reduced);
    if v.is_zero() {
        return Ok(false);
    }
    let g = Polynomial::x_pow_minus_one(f, m).gcd(&v)?;
    Ok(g.degree() == Some(0))
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} over {}", self.rows, self.cols, self.field)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row_raw(r))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f(q: u64) -> PrimeField {
        PrimeField::new(q).unwrap()
    }

    fn random(fld: PrimeField, rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let data: Vec<Vec<u64>> =
            (0..rows).map(|_| (0..cols).map(|_| rng.gen_range(0..fld.modulus())).collect()).collect();
        Matrix::from_rows(fld, &data).unwrap()
    }

    #[test]
    fn solve_small_cases() {
        let f5 = f(5);
        let m = Matrix::from_rows(f5, &[[2]]).unwrap();
        let rhs = Matrix::from_rows(f5, &[[3]]).unwrap();
        assert_eq!(m.gauss_solve(&rhs).unwrap().get(0, 0).value(), 4);

        let id = Matrix::identity(f5, 3);
        let rhs = Matrix::from_rows(f5, &[[1, 2], [3, 4], [0, 1]]).unwrap();
        assert_eq!(id.gauss_solve(&rhs).unwrap(), rhs);
    }

    #[test]
    fn solve_random_20x20_has_zero_residual() {
        let fld = f(13);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut solved = 0;
        while solved < 5 {
            let m = random(fld, 20, 20, &mut rng);
            let rhs = random(fld, 20, 3, &mut rng);
            match m.gauss_solve(&rhs) {
                Ok(x) => {
                    assert_eq!(m.mul(&x).unwrap(), rhs);
                    solved += 1;
                }
                Err(Error::SingularMatrix { rank, size }) => {
                    assert!(rank < size);
                    assert_eq!(m.det().unwrap().value(), 0);
                }
                Err(e) => panic!("{e}"),
            }
        }
    }

    #[test]
    fn singular_reports_rank() {
        let fld = f(7);
        let m = Matrix::from_rows(fld, &[[1, 2, 3], [2, 4, 6], [0, 1, 1]]).unwrap();
        assert_eq!(m.invert(), Err(Error::SingularMatrix { rank: 2, size: 3 }));
        assert_eq!(m.det().unwrap().value(), 0);
    }

    #[test]
    fn inverse_and_det() {
        let fld = f(13);
        assert_eq!(Matrix::identity(fld, 4).det().unwrap().value(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let m = random(fld, 6, 6, &mut rng);
            match m.invert() {
                Ok(inv) => {
                    assert_eq!(inv.mul(&m).unwrap(), Matrix::identity(fld, 6));
                    assert_ne!(m.det().unwrap().value(), 0);
                    // any k rows of an invertible matrix are independent
                    for k in 1..=6 {
                        let rows: Vec<usize> = (0..k).collect();
                        assert_eq!(m.select_rows(&rows).rank(), k);
                    }
                }
                Err(_) => assert_eq!(m.det().unwrap().value(), 0),
            }
        }
    }

    // Leibniz expansion, independent of elimination.
    fn leibniz_det(m: &Matrix) -> u64 {
        let n = m.rows();
        let fld = m.field();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut total = 0u64;
        fn heap(k: usize, perm: &mut Vec<usize>, sign: &mut bool, out: &mut Vec<(Vec<usize>, bool)>) {
            if k == 1 {
                out.push((perm.clone(), *sign));
                return;
            }
            for i in 0..k - 1 {
                heap(k - 1, perm, sign, out);
                if k.is_multiple_of(2) {
                    perm.swap(i, k - 1);
                } else {
                    perm.swap(0, k - 1);
                }
                *sign = !*sign;
            }
            heap(k - 1, perm, sign, out);
        }
        let mut all = Vec::new();
        let mut sign = true;
        heap(n, &mut perm, &mut sign, &mut all);
        for (p, positive) in all {
            let term = (0..n).fold(1, |acc, r| fld.mul_raw(acc, m.get(r, p[r]).value()));
            total = if positive { fld.add_raw(total, term) } else { fld.sub_raw(total, term) };
        }
        total
    }

    #[test]
    fn det_matches_leibniz() {
        let fld = f(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=5 {
            for _ in 0..20 {
                let m = random(fld, n, n, &mut rng);
                assert_eq!(m.det().unwrap().value(), leibniz_det(&m));
            }
        }
    }

    // Rank by independent row reduction on the transpose, reducing to fully
    // reduced form with rational-style bookkeeping on plain vectors.
    fn rank_by_columns(m: &Matrix) -> usize {
        let fld = m.field();
        let mut cols: Vec<Vec<u64>> = m.transpose().to_rows();
        let mut basis: Vec<(usize, Vec<u64>)> = Vec::new();
        for mut v in cols.drain(..) {
            for (lead, b) in &basis {
                if v[*lead] != 0 {
                    let factor = v[*lead];
                    for i in 0..v.len() {
                        v[i] = fld.sub_raw(v[i], fld.mul_raw(factor, b[i]));
                    }
                }
            }
            if let Some(lead) = v.iter().position(|&x| x != 0) {
                let inv = fld.inv_raw(v[lead]).unwrap();
                let v: Vec<u64> = v.iter().map(|&x| fld.mul_raw(x, inv)).collect();
                for (_, b) in basis.iter_mut() {
                    if b[lead] != 0 {
                        let factor = b[lead];
                        for i in 0..b.len() {
                            b[i] = fld.sub_raw(b[i], fld.mul_raw(factor, v[i]));
                        }
                    }
                }
                basis.push((lead, v));
            }
        }
        basis.len()
    }

    #[test]
    fn rank_equals_transpose_rank() {
        let fld = f(5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..200 {
            let mut m = random(fld, 6, 6, &mut rng);
            // force low rank sometimes
            if rng.gen_bool(0.5) {
                let src: Vec<u64> = m.row_raw(0).to_vec();
                for c in 0..6 {
                    m.set(3, c, fld.elem(fld.mul_raw(src[c], 2)));
                }
            }
            assert_eq!(m.rank(), rank_by_columns(&m));
            assert_eq!(m.transpose().rank(), m.rank());
        }
    }

    #[test]
    fn vandermonde_shape_and_errors() {
        let fld = f(7);
        let v = Matrix::vandermonde(&[fld.elem(1), fld.elem(2)], 2).unwrap();
        assert_eq!(v.to_rows(), vec![vec![1, 1], vec![2, 4]]);
        let single = Matrix::vandermonde(&[fld.elem(3)], 1).unwrap();
        assert_eq!(single.to_rows(), vec![vec![3]]);
        assert_eq!(
            Matrix::vandermonde(&[fld.elem(1), fld.elem(1)], 2),
            Err(Error::BadEvaluationPoint(1))
        );
        assert_eq!(Matrix::vandermonde(&[fld.zero()], 1), Err(Error::BadEvaluationPoint(0)));
        // distinct nonzero points give an invertible square matrix
        let pts: Vec<Fe> = (1..=6).map(|v| fld.elem(v)).collect();
        assert!(Matrix::vandermonde(&pts, 6).unwrap().invert().is_ok());
    }

    #[test]
    fn circulant_criterion_matches_det() {
        let fld = f(5);
        assert!(circulant_nonsingular(&[fld.one()], 4).unwrap());
        for m in 1..=8 {
            // V(x) = x - 1 always vanishes at the root of unity 1
            assert!(!circulant_nonsingular(&[fld.elem_i64(-1), fld.one()], m.max(2)).unwrap());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in [5, 7, 13] {
            let fld = f(q);
            for m in 2..=8 {
                for _ in 0..25 {
                    let len = rng.gen_range(1..=m.min(4));
                    let coeffs: Vec<Fe> = (0..len).map(|_| fld.elem(rng.gen_range(0..q))).collect();
                    let det = Matrix::circulant(&coeffs, m).unwrap().det().unwrap();
                    assert_eq!(
                        circulant_nonsingular(&coeffs, m).unwrap(),
                        !det.is_zero(),
                        "q={q} m={m} coeffs={coeffs:?}"
                    );
                }
            }
        }
    }
}

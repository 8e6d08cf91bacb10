//! Exact integer matrices: Smith and Hermite normal forms, kernels, and
//! linear-system solving over the integers. Everything is BigInt; sizes are
//! desk scale, so the plain normal-form algorithms are plenty.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct ZMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<BigInt>,
}

impl ZMat {
    pub fn zero(rows: usize, cols: usize) -> ZMat {
        ZMat {
            rows,
            cols,
            data: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> ZMat {
        let mut m = ZMat::zero(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Result<ZMat> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Matrix("ragged rows".into()));
        }
        Ok(ZMat {
            rows: r,
            cols: c,
            data: rows.iter().flatten().map(|&x| BigInt::from(x)).collect(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> BigInt) -> ZMat {
        let mut m = ZMat::zero(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    pub fn col(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn transpose(&self) -> ZMat {
        ZMat::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn mul(&self, rhs: &ZMat) -> Result<ZMat> {
        if self.cols != rhs.rows {
            return Err(Error::Matrix(format!(
                "dimension mismatch: {}x{} * {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = ZMat::zero(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let v = out.get(i, j) + a * rhs.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, rhs: &ZMat) -> Result<ZMat> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::Matrix("dimension mismatch in add".into()));
        }
        Ok(ZMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Result<Vec<BigInt>> {
        if v.len() != self.cols {
            return Err(Error::Matrix("dimension mismatch in mul_vec".into()));
        }
        Ok((0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * &v[j]).sum())
            .collect())
    }

    /// Determinant by fraction-free Gaussian elimination (Bareiss).
    pub fn det(&self) -> Result<BigInt> {
        if self.rows != self.cols {
            return Err(Error::Matrix("determinant of a non-square matrix".into()));
        }
        let n = self.rows;
        if n == 0 {
            return Ok(BigInt::one());
        }
        let mut a: Vec<Vec<BigInt>> = (0..n)
            .map(|i| (0..n).map(|j| self.get(i, j).clone()).collect())
            .collect();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                    Some(i) => {
                        a.swap(k, i);
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &a[k][k] * &a[i][j] - &a[i][k] * &a[k][j];
                    a[i][j] = &num / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        Ok(sign * a[n - 1][n - 1].clone())
    }
}

/// Smith normal form: returns `(u, s, v)` with `u * self * v = s`, `u`, `v`
/// unimodular and `s` diagonal with the divisibility chain.
pub fn smith_normal_form(m: &ZMat) -> (ZMat, ZMat, ZMat) {
    let mut s = m.clone();
    let mut u = ZMat::identity(m.rows);
    let mut v = ZMat::identity(m.cols);
    let n = m.rows.min(m.cols);

    for t in 0..n {
        loop {
            // find a pivot: smallest nonzero |entry| in the remaining block
            let mut pivot: Option<(usize, usize)> = None;
            for i in t..s.rows {
                for j in t..s.cols {
                    if !s.get(i, j).is_zero()
                        && pivot.is_none_or(|(pi, pj)| {
                            s.get(i, j).abs() < s.get(pi, pj).abs()
                        })
                    {
                        pivot = Some((i, j));
                    }
                }
            }
            let Some((pi, pj)) = pivot else {
                return (u, s, v);
            };
            swap_rows(&mut s, &mut u, t, pi);
            swap_cols(&mut s, &mut v, t, pj);

            let mut clean = true;
            for i in t + 1..s.rows {
                if s.get(i, t).is_zero() {
                    continue;
                }
                let q = s.get(i, t).div_floor(s.get(t, t));
                if !q.is_zero() {
                    row_axpy(&mut s, &mut u, i, t, &-q);
                }
                if !s.get(i, t).is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..s.cols {
                if s.get(t, j).is_zero() {
                    continue;
                }
                let q = s.get(t, j).div_floor(s.get(t, t));
                if !q.is_zero() {
                    col_axpy(&mut s, &mut v, j, t, &-q);
                }
                if !s.get(t, j).is_zero() {
                    clean = false;
                }
            }
            if clean {
                // divisibility fix: pivot must divide the whole block
                let mut fixed = true;
                'outer: for i in t + 1..s.rows {
                    for j in t + 1..s.cols {
                        if !(s.get(i, j) % s.get(t, t)).is_zero() {
                            // add row i to row t to pull the entry in
                            row_axpy(&mut s, &mut u, t, i, &BigInt::one());
                            fixed = false;
                            break 'outer;
                        }
                    }
                }
                if fixed {
                    break;
                }
            }
        }
        // normalize sign
        if s.get(t, t).is_negative() {
            negate_row(&mut s, &mut u, t);
        }
    }
    (u, s, v)
}

fn swap_rows(s: &mut ZMat, u: &mut ZMat, a: usize, b: usize) {
    if a == b {
        return;
    }
    for j in 0..s.cols {
        let x = s.get(a, j).clone();
        let y = s.get(b, j).clone();
        s.set(a, j, y);
        s.set(b, j, x);
    }
    for j in 0..u.cols {
        let x = u.get(a, j).clone();
        let y = u.get(b, j).clone();
        u.set(a, j, y);
        u.set(b, j, x);
    }
}

fn swap_cols(s: &mut ZMat, v: &mut ZMat, a: usize, b: usize) {
    if a == b {
        return;
    }
    for i in 0..s.rows {
        let x = s.get(i, a).clone();
        let y = s.get(i, b).clone();
        s.set(i, a, y);
        s.set(i, b, x);
    }
    for i in 0..v.rows {
        let x = v.get(i, a).clone();
        let y = v.get(i, b).clone();
        v.set(i, a, y);
        v.set(i, b, x);
    }
}

/// row[i] += q * row[t], tracked in u
fn row_axpy(s: &mut ZMat, u: &mut ZMat, i: usize, t: usize, q: &BigInt) {
    for j in 0..s.cols {
        let v = s.get(i, j) + q * s.get(t, j);
        s.set(i, j, v);
    }
    for j in 0..u.cols {
        let v = u.get(i, j) + q * u.get(t, j);
        u.set(i, j, v);
    }
}

/// col[j] += q * col[t], tracked in v
fn col_axpy(s: &mut ZMat, v: &mut ZMat, j: usize, t: usize, q: &BigInt) {
    for i in 0..s.rows {
        let x = s.get(i, j) + q * s.get(i, t);
        s.set(i, j, x);
    }
    for i in 0..v.rows {
        let x = v.get(i, j) + q * v.get(i, t);
        v.set(i, j, x);
    }
}

fn negate_row(s: &mut ZMat, u: &mut ZMat, t: usize) {
    for j in 0..s.cols {
        let x = -s.get(t, j);
        s.set(t, j, x);
    }
    for j in 0..u.cols {
        let x = -u.get(t, j);
        u.set(t, j, x);
    }
}

/// Basis of the integer kernel `{x : m x = 0}`, as columns.
pub fn kernel_basis(m: &ZMat) -> Vec<Vec<BigInt>> {
    let (_, s, v) = smith_normal_form(m);
    let n = m.rows.min(m.cols);
    let mut out = Vec::new();
    for j in 0..m.cols {
        let diag_zero = j >= n || s.get(j, j).is_zero();
        if diag_zero {
            out.push(v.col(j));
        }
    }
    out
}

/// One integer solution of `m x = b`, if any.
pub fn solve(m: &ZMat, b: &[BigInt]) -> Result<Option<Vec<BigInt>>> {
    if b.len() != m.rows {
        return Err(Error::Matrix("dimension mismatch in solve".into()));
    }
    let (u, s, v) = smith_normal_form(m);
    let c = u.mul_vec(b)?;
    let mut y = vec![BigInt::zero(); m.cols];
    for i in 0..m.rows {
        let d = if i < m.cols { s.get(i, i).clone() } else { BigInt::zero() };
        if d.is_zero() {
            if !c[i].is_zero() {
                return Ok(None);
            }
        } else {
            let (q, r) = c[i].div_rem(&d);
            if !r.is_zero() {
                return Ok(None);
            }
            y[i] = q;
        }
    }
    Ok(Some(v.mul_vec(&y)?))
}

/// Column-style Hermite normal form of the column lattice of `m`: returns a
/// canonical full-column-rank matrix whose columns span the same lattice.
pub fn hnf_column_basis(m: &ZMat) -> ZMat {
    // row-HNF of the transpose, transposed back
    let mut a: Vec<Vec<BigInt>> = (0..m.cols)
        .map(|j| (0..m.rows).map(|i| m.get(i, j).clone()).collect())
        .collect();
    let rows = a.len();
    let cols = m.rows;
    let mut pivot_row = 0usize;
    for col in 0..cols {
        if pivot_row >= rows {
            break;
        }
        loop {
            // smallest nonzero entry in this column at or below pivot_row
            let mut best: Option<usize> = None;
            for i in pivot_row..rows {
                if !a[i][col].is_zero()
                    && best.is_none_or(|b| a[i][col].abs() < a[b][col].abs())
                {
                    best = Some(i);
                }
            }
            let Some(b) = best else {
                break;
            };
            a.swap(pivot_row, b);
            let mut done = true;
            for i in pivot_row + 1..rows {
                if a[i][col].is_zero() {
                    continue;
                }
                let q = a[i][col].div_floor(&a[pivot_row][col]);
                for j in 0..cols {
                    let x = &a[i][j] - &q * &a[pivot_row][j];
                    a[i][j] = x;
                }
                if !a[i][col].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if a[pivot_row][col].is_zero() {
            continue;
        }
        if a[pivot_row][col].is_negative() {
            for j in 0..cols {
                a[pivot_row][j] = -a[pivot_row][j].clone();
            }
        }
        // reduce the rows above
        for i in 0..pivot_row {
            let q = a[i][col].div_floor(&a[pivot_row][col]);
            if !q.is_zero() {
                for j in 0..cols {
                    let x = &a[i][j] - &q * &a[pivot_row][j];
                    a[i][j] = x;
                }
            }
        }
        pivot_row += 1;
    }
    a.truncate(pivot_row);
    // back to columns
    let r = a.len();
    ZMat::from_fn(cols, r, |i, j| a[j][i].clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn det_examples() {
        let m = ZMat::from_rows(&[vec![2, 0], vec![0, 3]]).unwrap();
        assert_eq!(m.det().unwrap(), BigInt::from(6));
        let m = ZMat::from_rows(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(m.det().unwrap(), BigInt::from(-1));
        let m = ZMat::from_rows(&[vec![1, 2], vec![2, 4]]).unwrap();
        assert_eq!(m.det().unwrap(), BigInt::zero());
        let m = ZMat::from_rows(&[vec![2, 1, 0], vec![1, 3, 1], vec![0, 1, 4]]).unwrap();
        assert_eq!(m.det().unwrap(), BigInt::from(18));
    }

    #[test]
    fn snf_diagonal_chain() {
        let m = ZMat::from_rows(&[vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]]).unwrap();
        let (u, s, v) = smith_normal_form(&m);
        // u m v = s
        assert_eq!(u.mul(&m).unwrap().mul(&v).unwrap(), s);
        // divisibility chain 2 | 6 | 12 for this classic example
        assert_eq!(s.get(0, 0), &BigInt::from(2));
        assert_eq!(s.get(1, 1), &BigInt::from(6));
        assert_eq!(s.get(2, 2), &BigInt::from(12));
        // transforms are unimodular
        assert_eq!(u.det().unwrap().abs(), BigInt::one());
        assert_eq!(v.det().unwrap().abs(), BigInt::one());
    }

    #[test]
    fn snf_divisibility_chain_random_shapes() {
        let m = ZMat::from_rows(&[vec![6, 4], vec![2, 8]]).unwrap();
        let (u, s, v) = smith_normal_form(&m);
        assert_eq!(u.mul(&m).unwrap().mul(&v).unwrap(), s);
        let a = s.get(0, 0).clone();
        let b = s.get(1, 1).clone();
        assert!(!a.is_zero() && (&b % &a).is_zero(), "{a} | {b}");
    }

    #[test]
    fn kernel_and_solve() {
        let m = ZMat::from_rows(&[vec![1, 2, 3], vec![2, 4, 6]]).unwrap();
        let k = kernel_basis(&m);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!(m.mul_vec(v).unwrap().iter().all(|x| x.is_zero()));
        }
        let b = vec![BigInt::from(5), BigInt::from(10)];
        let x = solve(&m, &b).unwrap().expect("solvable");
        assert_eq!(m.mul_vec(&x).unwrap(), b);
        // unsolvable system
        let b = vec![BigInt::from(1), BigInt::from(1)];
        assert!(solve(&m, &b).unwrap().is_none());
        // 2x = 1 has no integer solution
        let m = ZMat::from_rows(&[vec![2]]).unwrap();
        assert!(solve(&m, &[BigInt::one()]).unwrap().is_none());
    }

    #[test]
    fn hnf_lattice_canonical() {
        // two bases of the same lattice
        let a = ZMat::from_rows(&[vec![2, 1], vec![0, 3]]).unwrap();
        let b = ZMat::from_rows(&[vec![2, 3], vec![6, 3]]).unwrap();
        let ha = hnf_column_basis(&a);
        let hb = hnf_column_basis(&b);
        // same lattice iff same HNF: here |det a| = 6, b = a * unimodular?
        // b's columns: (2,6), (3,3): det = 6-18 = -12, different lattice
        assert_ne!(ha, hb);
        // a vs a with columns re-combined
        let a2 = ZMat::from_rows(&[vec![2, 3], vec![0, 3]]).unwrap(); // c2 + c1
        assert_eq!(ha, hnf_column_basis(&a2));
    }
}

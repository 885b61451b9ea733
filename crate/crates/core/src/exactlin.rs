use std::fmt;
use std::ops::Index;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub type Rational = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinError {
    #[error("singular matrix")]
    SingularMatrix,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("cannot parse rational {0:?}")]
    BadRational(String),
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rational {
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Parses `p/q`, `-p/q` or an integer. Decimal points are rejected.
pub fn parse_rational(s: &str) -> Result<Rational, LinError> {
    let t = s.trim();
    let bad = || LinError::BadRational(s.to_string());
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(Rational::new(n, d))
}

pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QVector(Vec<Rational>);

impl QVector {
    pub fn new(entries: Vec<Rational>) -> Self {
        QVector(entries)
    }

    pub fn zeros(n: usize) -> Self {
        QVector(vec![Rational::zero(); n])
    }

    pub fn from_ints(v: &[i64]) -> Self {
        QVector(v.iter().map(|&x| int(x)).collect())
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = Rational::one();
        v
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn entries(&self) -> &[Rational] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Rational> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Rational> {
        self.0.iter()
    }

    pub fn dot(&self, other: &QVector) -> Result<Rational, LinError> {
        if self.len() != other.len() {
            return Err(LinError::DimensionMismatch(format!(
                "dot of lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn add(&self, other: &QVector) -> Result<QVector, LinError> {
        if self.len() != other.len() {
            return Err(LinError::DimensionMismatch(format!(
                "sum of lengths {} and {}",
                self.len(),
                other.len()
            )));
        }
        Ok(QVector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect()))
    }

    pub fn scale(&self, c: &Rational) -> QVector {
        QVector(self.0.iter().map(|a| a * c).collect())
    }
}

impl Index<usize> for QVector {
    type Output = Rational;
    fn index(&self, i: usize) -> &Rational {
        &self.0[i]
    }
}

impl fmt::Display for QVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(fmt_rational).collect();
        write!(f, "{}", parts.join(" "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QMatrix {
    rows: Vec<Vec<Rational>>,
    ncols: usize,
}

impl QMatrix {
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self, LinError> {
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(LinError::DimensionMismatch("ragged rows".into()));
        }
        Ok(QMatrix { rows, ncols })
    }

    pub fn from_ints(rows: &[Vec<i64>]) -> Result<Self, LinError> {
        Self::new(rows.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect())
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        QMatrix {
            rows: vec![vec![Rational::zero(); m]; n],
            ncols: m,
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.rows[i][i] = Rational::one();
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows() == self.ncols
    }

    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.rows[i][j]
    }

    pub fn row(&self, i: usize) -> QVector {
        QVector(self.rows[i].clone())
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    pub fn neg(&self) -> QMatrix {
        QMatrix {
            rows: self.rows.iter().map(|r| r.iter().map(|x| -x).collect()).collect(),
            ncols: self.ncols,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.nrows()).all(|i| (0..i).all(|j| self.rows[i][j] == self.rows[j][i]))
    }

    pub fn mul_vec(&self, v: &QVector) -> Result<QVector, LinError> {
        if v.len() != self.ncols {
            return Err(LinError::DimensionMismatch(format!(
                "{}x{} matrix times vector of length {}",
                self.nrows(),
                self.ncols,
                v.len()
            )));
        }
        Ok(QVector(
            self.rows
                .iter()
                .map(|r| r.iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect(),
        ))
    }

    /// Block-diagonal sum, used to assemble the exceptional lattice of several singular points.
    pub fn block_diag(blocks: &[QMatrix]) -> QMatrix {
        let n: usize = blocks.iter().map(|b| b.nrows()).sum();
        let mut m = Self::zeros(n, n);
        let mut off = 0;
        for b in blocks {
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    m.rows[off + i][off + j] = b.rows[i][j].clone();
                }
            }
            off += b.nrows();
        }
        m
    }

    pub fn principal_minor(&self, k: usize) -> QMatrix {
        QMatrix {
            rows: self.rows[..k].iter().map(|r| r[..k].to_vec()).collect(),
            ncols: k,
        }
    }

    pub fn determinant(&self) -> Result<Rational, LinError> {
        if !self.is_square() {
            return Err(LinError::DimensionMismatch("determinant of non-square matrix".into()));
        }
        let n = self.nrows();
        let mut a = self.rows.clone();
        let mut det = Rational::one();
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| !a[r][col].is_zero()) else {
                return Ok(Rational::zero());
            };
            if p != col {
                a.swap(p, col);
                det = -det;
            }
            let piv = a[col][col].clone();
            det *= &piv;
            for r in col + 1..n {
                if a[r][col].is_zero() {
                    continue;
                }
                let f = &a[r][col] / &piv;
                for c in col..n {
                    let t = &f * &a[col][c];
                    a[r][c] -= t;
                }
            }
        }
        Ok(det)
    }
}

/// Solves `A x = b` by Gaussian elimination, pivoting on the first nonzero entry of each column.
pub fn solve_linear(a: &QMatrix, b: &QVector) -> Result<QVector, LinError> {
    if !a.is_square() {
        return Err(LinError::DimensionMismatch(format!(
            "{}x{} matrix is not square",
            a.nrows(),
            a.ncols()
        )));
    }
    let n = a.nrows();
    if b.len() != n {
        return Err(LinError::DimensionMismatch(format!(
            "matrix of order {n}, right-hand side of length {}",
            b.len()
        )));
    }
    let mut m: Vec<Vec<Rational>> = a
        .rows
        .iter()
        .zip(b.iter())
        .map(|(r, bi)| {
            let mut row = r.clone();
            row.push(bi.clone());
            row
        })
        .collect();
    for col in 0..n {
        let p = (col..n)
            .find(|&r| !m[r][col].is_zero())
            .ok_or(LinError::SingularMatrix)?;
        m.swap(p, col);
        let piv = m[col][col].clone();
        for c in col..=n {
            m[col][c] = &m[col][c] / &piv;
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for c in col..=n {
                let t = &f * &m[col][c];
                m[r][c] -= t;
            }
        }
    }
    Ok(QVector(m.into_iter().map(|mut r| r.pop().unwrap()).collect()))
}

/// True iff every leading principal minor of `-A` is positive.
pub fn is_negative_definite(a: &QMatrix) -> Result<bool, LinError> {
    if !a.is_symmetric() {
        return Err(LinError::NotSymmetric);
    }
    let neg = a.neg();
    for k in 1..=neg.nrows() {
        if !neg.principal_minor(k).determinant()?.is_positive() {
            return Ok(false);
        }
    }
    Ok(true)
}

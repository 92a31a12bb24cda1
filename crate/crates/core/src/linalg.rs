//! Small dense matrix routines over the residue field and over `R`.

use crate::dvr::{DvrElement, Ring};
use crate::error::{Error, Result};
use crate::field::{Fq, GaloisField};

pub type FqMatrix = Vec<Vec<Fq>>;

/// Rank by Gaussian elimination.
pub fn rank(field: &GaloisField, m: &FqMatrix) -> usize {
    let mut a = m.clone();
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, piv);
        let inv = field.inv(a[r][c]).expect("nonzero pivot");
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = field.mul(a[i][c], inv);
                for j in c..cols {
                    let t = field.mul(f, a[r][j]);
                    a[i][j] = field.sub(a[i][j], t);
                }
            }
        }
        r += 1;
        if r == rows {
            break;
        }
    }
    r
}

pub fn determinant(field: &GaloisField, m: &FqMatrix) -> Fq {
    let n = m.len();
    let mut a = m.clone();
    let mut det = Fq::ONE;
    for c in 0..n {
        let Some(piv) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return Fq::ZERO;
        };
        if piv != c {
            a.swap(piv, c);
            det = field.neg(det);
        }
        det = field.mul(det, a[c][c]);
        let inv = field.inv(a[c][c]).expect("nonzero pivot");
        for i in c + 1..n {
            let f = field.mul(a[i][c], inv);
            for j in c..n {
                let t = field.mul(f, a[c][j]);
                a[i][j] = field.sub(a[i][j], t);
            }
        }
    }
    det
}

/// Inverse of a square matrix over `R` whose reduction is invertible.
pub fn inverse_over_ring(ring: &Ring, m: &[Vec<DvrElement>]) -> Result<Vec<Vec<DvrElement>>> {
    let n = m.len();
    let mut a: Vec<Vec<DvrElement>> = m.to_vec();
    let mut inv: Vec<Vec<DvrElement>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { ring.one() } else { ring.zero() }).collect())
        .collect();
    for c in 0..n {
        let piv = (c..n)
            .find(|&i| a[i][c].is_unit())
            .ok_or_else(|| Error::Precondition("matrix is singular modulo pi".into()))?;
        a.swap(c, piv);
        inv.swap(c, piv);
        let s = ring.inv(&a[c][c])?;
        for j in 0..n {
            a[c][j] = ring.mul(&a[c][j], &s);
            inv[c][j] = ring.mul(&inv[c][j], &s);
        }
        for i in 0..n {
            if i == c || a[i][c].is_zero() {
                continue;
            }
            let f = a[i][c].clone();
            for j in 0..n {
                let t = ring.mul(&f, &a[c][j]);
                a[i][j] = ring.sub(&a[i][j], &t);
                let t = ring.mul(&f, &inv[c][j]);
                inv[i][j] = ring.sub(&inv[i][j], &t);
            }
        }
    }
    Ok(inv)
}

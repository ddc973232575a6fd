//! Compressed sparse rows, incomplete LU and preconditioned BiCGSTAB.

use crate::{Error, Result};

/// Square sparse matrix in compressed-row form with sorted column indices.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

/// Row-by-row builder for [`Csr`].
#[derive(Debug, Default)]
pub struct CsrBuilder {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<f64>,
    row: Vec<(usize, f64)>,
}

impl CsrBuilder {
    pub fn new() -> Self {
        CsrBuilder { indptr: vec![0], ..Default::default() }
    }

    /// Adds `v` at column `j` of the current row, summing duplicates.
    pub fn add(&mut self, j: usize, v: f64) {
        self.row.push((j, v));
    }

    /// Finishes the current row.
    pub fn end_row(&mut self) {
        self.row.sort_by_key(|e| e.0);
        let mut last: Option<usize> = None;
        for &(j, v) in &self.row {
            if last == Some(j) {
                *self.data.last_mut().unwrap() += v;
            } else {
                self.indices.push(j);
                self.data.push(v);
                last = Some(j);
            }
        }
        self.row.clear();
        self.indptr.push(self.indices.len());
    }

    pub fn build(self) -> Csr {
        Csr { n: self.indptr.len() - 1, indptr: self.indptr, indices: self.indices, data: self.data }
    }
}

impl Csr {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            y[i] = s;
        }
    }

    pub fn residual_norm(&self, x: &[f64], b: &[f64]) -> f64 {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Zero-fill incomplete LU factorisation stored on the pattern of `A`.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in lu.indptr[i]..lu.indptr[i + 1] {
                if lu.indices[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(Error::Numerical(format!("row {i} has no diagonal entry")));
            }
        }
        let mut pos = vec![usize::MAX; n];
        for i in 0..n {
            let (lo, hi) = (lu.indptr[i], lu.indptr[i + 1]);
            for k in lo..hi {
                pos[lu.indices[k]] = k;
            }
            for kk in lo..hi {
                let k = lu.indices[kk];
                if k >= i {
                    break;
                }
                let pivot = lu.data[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Numerical("zero pivot in incomplete LU".into()));
                }
                let f = lu.data[kk] / pivot;
                lu.data[kk] = f;
                for m in diag[k] + 1..lu.indptr[k + 1] {
                    let j = lu.indices[m];
                    let p = pos[j];
                    if p != usize::MAX {
                        lu.data[p] -= f * lu.data[m];
                    }
                }
            }
            for k in lo..hi {
                pos[lu.indices[k]] = usize::MAX;
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Solves `LU y = r` in place.
    pub fn apply(&self, r: &mut [f64]) {
        let lu = &self.lu;
        for i in 0..lu.n {
            let mut s = r[i];
            for k in lu.indptr[i]..self.diag[i] {
                s -= lu.data[k] * r[lu.indices[k]];
            }
            r[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = r[i];
            for k in self.diag[i] + 1..lu.indptr[i + 1] {
                s -= lu.data[k] * r[lu.indices[k]];
            }
            r[i] = s / lu.data[self.diag[i]];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Right-preconditioned BiCGSTAB aiming at relative residual `tol`. When
/// the iteration stagnates first, the result is accepted if its true relative
/// residual is below `accept`. Returns the final relative residual.
pub fn bicgstab(a: &Csr, m: &Ilu0, b: &[f64], x: &mut [f64], tol: f64, accept: f64, max_iter: usize) -> Result<f64> {
    let n = a.n;
    let bnorm = dot(b, b).sqrt().max(1e-300);
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut rel = dot(&r, &r).sqrt() / bnorm;
    if rel < tol {
        return Ok(rel);
    }
    let mut restarts = 0;
    let mut rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut best = rel;
    let mut since_best = 0;
    for _ in 0..max_iter {
        if rel < best {
            best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > 300 {
                break;
            }
        }
        let rho_new = dot(&rhat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // Breakdown: restart from the current residual.
            restarts += 1;
            if restarts > 20 {
                break;
            }
            rhat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ph.copy_from_slice(&p);
        m.apply(&mut ph);
        a.matvec(&ph, &mut v);
        alpha = rho / dot(&rhat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if dot(&s, &s).sqrt() / bnorm < tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            rel = a.residual_norm(x, b) / bnorm;
            if rel < tol {
                return Ok(rel);
            }
            a.matvec(x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
            continue;
        }
        sh.copy_from_slice(&s);
        m.apply(&mut sh);
        a.matvec(&sh, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        rel = dot(&r, &r).sqrt() / bnorm;
        if rel < tol {
            let true_rel = a.residual_norm(x, b) / bnorm;
            if true_rel < tol {
                return Ok(true_rel);
            }
            a.matvec(x, &mut r);
            for i in 0..n {
                r[i] = b[i] - r[i];
            }
        }
    }
    rel = a.residual_norm(x, b) / bnorm;
    if rel < accept {
        return Ok(rel);
    }
    Err(Error::Numerical(format!("BiCGSTAB stopped at relative residual {rel:.3e} above {accept:.1e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_1d_laplacian() {
        let n = 200;
        let mut b = CsrBuilder::new();
        for i in 0..n {
            if i > 0 {
                b.add(i - 1, -1.0);
            }
            b.add(i, 2.0 + 0.01 * i as f64 / n as f64);
            if i + 1 < n {
                b.add(i + 1, -1.0);
            }
            b.end_row();
        }
        let a = b.build();
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let m = Ilu0::new(&a).unwrap();
        let mut x = vec![0.0; n];
        let r = bicgstab(&a, &m, &rhs, &mut x, 1e-12, 1e-12, 1000).unwrap();
        assert!(r < 1e-12);
        assert!(a.residual_norm(&x, &rhs) < 1e-10);
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let mut b = CsrBuilder::new();
        let n = 10;
        for i in 0..n {
            if i > 0 {
                b.add(i - 1, 1.0);
            }
            b.add(i, 4.0);
            if i + 1 < n {
                b.add(i + 1, 2.0);
            }
            b.end_row();
        }
        let a = b.build();
        let m = Ilu0::new(&a).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let mut y = vec![0.0; n];
        a.matvec(&x, &mut y);
        m.apply(&mut y);
        for i in 0..n {
            assert!((y[i] - x[i]).abs() < 1e-12);
        }
    }
}

//! Tridiagonal linear algebra: banded solves, Sturm counts, bisection and
//! inverse iteration for symmetric tridiagonal eigenproblems.

use crate::error::{Error, Result};

/// Solves a general tridiagonal system with partial pivoting.
///
/// `sub[i]` couples row `i + 1` to column `i`, `sup[i]` couples row `i` to
/// column `i + 1`.
pub fn solve(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    assert!(sub.len() + 1 == n && sup.len() + 1 == n && rhs.len() == n);
    if n == 1 {
        if diag[0] == 0.0 {
            return Err(Error::Singular(0));
        }
        return Ok(vec![rhs[0] / diag[0]]);
    }
    // Row i holds columns i, i+1, i+2 after elimination (second superdiagonal
    // fills in when rows are swapped).
    let mut d = diag.to_vec();
    let mut u1 = sup.to_vec();
    u1.push(0.0);
    let mut u2 = vec![0.0; n];
    let mut l = sub.to_vec();
    let mut b = rhs.to_vec();
    for i in 0..n - 1 {
        if l[i].abs() > d[i].abs() {
            // swap rows i and i+1
            let (di, u1i, u2i, bi) = (d[i], u1[i], u2[i], b[i]);
            d[i] = l[i];
            u1[i] = d[i + 1];
            u2[i] = if i + 1 < n - 1 { u1[i + 1] } else { 0.0 };
            b[i] = b[i + 1];
            l[i] = di;
            d[i + 1] = u1i;
            if i + 1 < n - 1 {
                u1[i + 1] = u2i;
            }
            b[i + 1] = bi;
        }
        if d[i] == 0.0 {
            return Err(Error::Singular(i));
        }
        let m = l[i] / d[i];
        d[i + 1] -= m * u1[i];
        if i + 1 < n - 1 {
            u1[i + 1] -= m * u2[i];
        }
        b[i + 1] -= m * b[i];
    }
    if d[n - 1] == 0.0 {
        return Err(Error::Singular(n - 1));
    }
    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / d[n - 1];
    x[n - 2] = (b[n - 2] - u1[n - 2] * x[n - 1]) / d[n - 2];
    for i in (0..n.saturating_sub(2)).rev() {
        x[i] = (b[i] - u1[i] * x[i + 1] - u2[i] * x[i + 2]) / d[i];
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(n - 1));
    }
    Ok(x)
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert_eq!(off.len() + 1, diag.len());
        Self { diag, off }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    /// Number of eigenvalues strictly below `x` (negative pivots of the
    /// `LDLᵀ` factorization of `A - x`).
    pub fn sturm_count(&self, x: f64) -> usize {
        let (lo, hi) = self.gershgorin();
        let scale = hi.abs().max(lo.abs()).max(1.0);
        let guard = f64::EPSILON * scale * 1e-3;
        let mut count = 0;
        let mut q_prev = 0.0;
        for i in 0..self.dim() {
            let mut q = self.diag[i] - x;
            if i > 0 {
                q -= self.off[i - 1] * self.off[i - 1] / q_prev;
            }
            // a vanishing pivot is treated as a tiny negative one throughout
            if q.abs() < guard {
                q = -guard;
            }
            q_prev = q;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Bounds containing the whole spectrum.
    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.dim();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut rad = 0.0;
            if i > 0 {
                rad += self.off[i - 1].abs();
            }
            if i + 1 < n {
                rad += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - rad);
            hi = hi.max(self.diag[i] + rad);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by Sturm bisection to
    /// absolute width `tol`.
    pub fn eigenvalue(&self, k: usize, tol: f64) -> f64 {
        let (lo, hi) = self.gershgorin();
        self.eigenvalue_in(k, lo - 1.0, hi + 1.0, tol)
    }

    /// As [`Self::eigenvalue`], with a caller-supplied bracket `[lo, hi]`
    /// known to contain it.
    pub fn eigenvalue_in(&self, k: usize, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.sturm_count(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// All eigenvalues below `x`, ascending.
    pub fn eigenvalues_below(&self, x: f64, tol: f64) -> Vec<f64> {
        let count = self.sturm_count(x);
        let lo = self.gershgorin().0 - 1.0;
        (0..count).map(|k| self.eigenvalue_in(k, lo, x, tol)).collect()
    }

    /// Unit eigenvector for an (accurate) eigenvalue estimate `mu`, by inverse
    /// iteration with a pivoted tridiagonal solve. Retries with perturbed
    /// shifts when the iteration stagnates.
    pub fn inverse_iteration(&self, mu: f64, deflate: &[Vec<f64>]) -> Result<Vec<f64>> {
        let n = self.dim();
        let scale = self.gershgorin().1.abs().max(1.0);
        let mut shift_offset = 1e-13 * scale;
        for _attempt in 0..=5 {
            let shift = mu + shift_offset;
            let diag: Vec<f64> = self.diag.iter().map(|d| d - shift).collect();
            let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64 / 13.0).collect();
            normalize(&mut x);
            let mut converged = false;
            for _ in 0..8 {
                let y = match solve(&self.off, &diag, &self.off, &x) {
                    Ok(y) => y,
                    Err(_) => break,
                };
                let mut y = y;
                for v in deflate {
                    let c = dot(&y, v);
                    for (yi, vi) in y.iter_mut().zip(v) {
                        *yi -= c * vi;
                    }
                }
                normalize(&mut y);
                x = y;
                let ax = self.matvec(&x);
                let res: f64 = ax.iter().zip(&x).map(|(a, xi)| (a - mu * xi).powi(2)).sum::<f64>().sqrt();
                if res <= (50.0 * f64::EPSILON * scale).max(1e-10) {
                    converged = true;
                    break;
                }
            }
            if converged {
                return Ok(x);
            }
            shift_offset *= -7.0;
        }
        Err(Error::Eigen(format!("inverse iteration stagnated at eigenvalue {mu}")))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let nrm = dot(x, x).sqrt();
    if nrm > 0.0 {
        x.iter_mut().for_each(|v| *v /= nrm);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian(n: usize) -> SymTridiag {
        SymTridiag::new(vec![2.0; n], vec![-1.0; n - 1])
    }

    #[test]
    fn solve_matches_matvec() {
        let sub = vec![1.0, -2.0, 0.5, 3.0];
        let diag = vec![0.1, 4.0, -1.0, 2.0, 1.0];
        let sup = vec![2.0, 1.0, -1.5, 0.2];
        let x_true = vec![1.0, -2.0, 3.0, 0.5, -1.0];
        let mut rhs = vec![0.0; 5];
        for i in 0..5 {
            rhs[i] = diag[i] * x_true[i];
            if i > 0 {
                rhs[i] += sub[i - 1] * x_true[i - 1];
            }
            if i < 4 {
                rhs[i] += sup[i] * x_true[i + 1];
            }
        }
        let x = solve(&sub, &diag, &sup, &rhs).unwrap();
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_system_is_reported() {
        let r = solve(&[1.0], &[1.0, 1.0], &[1.0], &[1.0, 2.0]);
        assert!(matches!(r, Err(Error::Singular(_))));
    }

    #[test]
    fn sturm_count_matches_closed_form() {
        let n = 50;
        let a = laplacian(n);
        let exact: Vec<f64> = (1..=n)
            .map(|k| 2.0 - 2.0 * (k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos())
            .collect();
        for (k, e) in exact.iter().enumerate() {
            assert_eq!(a.sturm_count(*e - 1e-9), k);
            let got = a.eigenvalue(k, 1e-13);
            assert!((got - e).abs() < 1e-11, "{k}: {got} vs {e}");
        }
    }

    #[test]
    fn inverse_iteration_recovers_sine_mode() {
        let n = 40;
        let a = laplacian(n);
        let mu = a.eigenvalue(0, 1e-14);
        let v = a.inverse_iteration(mu, &[]).unwrap();
        let theta = std::f64::consts::PI / (n as f64 + 1.0);
        let mut s: Vec<f64> = (1..=n).map(|j| (j as f64 * theta).sin()).collect();
        normalize(&mut s);
        let c = dot(&v, &s).abs();
        assert!((c - 1.0).abs() < 1e-10);
    }
}

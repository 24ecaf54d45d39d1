//! Gauss-Jacobi quadrature on [-1, 1] for the weight (1-s)^alpha (1+s)^beta.
//!
//! Rules are built with the Golub-Welsch algorithm: the nodes are the
//! eigenvalues of the symmetric tridiagonal Jacobi matrix of the three-term
//! recurrence, and the weights come from the first components of the
//! eigenvectors. The tridiagonal eigenproblem is solved with an implicit-QL
//! sweep that carries only the first eigenvector row, so building an n-point
//! rule costs O(n^2) instead of the O(n^3) of a dense eigensolver. Rules are
//! cached per (n, alpha, beta).

use crate::error::{Error, Result};
use statrs::function::gamma::ln_gamma;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Quadrature rule on [-1, 1]: sum_i w_i f(s_i) approximates
/// integral of (1-s)^alpha (1+s)^beta f(s) ds for smooth f.
#[derive(Debug, Clone)]
pub struct JacobiRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
}

impl JacobiRule {
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::Domain("quadrature order must be >= 1".into()));
        }
        if !(alpha > -1.0 && alpha.is_finite() && beta > -1.0 && beta.is_finite()) {
            return Err(Error::Domain(format!(
                "Jacobi exponents must lie in (-1, inf): alpha={alpha}, beta={beta}"
            )));
        }
        let (nodes, weights) = golub_welsch(n, alpha, beta)?;
        Ok(Self {
            nodes,
            weights,
            alpha,
            beta,
        })
    }

    /// Total mass of the weight: 2^(a+b+1) B(a+1, b+1).
    pub fn mu0(alpha: f64, beta: f64) -> f64 {
        ((alpha + beta + 1.0) * std::f64::consts::LN_2 + ln_gamma(alpha + 1.0)
            + ln_gamma(beta + 1.0)
            - ln_gamma(alpha + beta + 2.0))
        .exp()
    }
}

fn golub_welsch(n: usize, alpha: f64, beta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = (alpha, beta);
    let mut diag = vec![0.0f64; n];
    let mut off = vec![0.0f64; n];

    diag[0] = (b - a) / (a + b + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let denom = 2.0 * kf + a + b;
        diag[k] = (b * b - a * a) / (denom * (denom + 2.0));
        // off[k] couples rows k-1 and k; the monic recurrence coefficient
        // beta_k has no removable 0/0 even when a + b = -1.
        let bk = if k == 1 {
            4.0 * (a + 1.0) * (b + 1.0) / ((a + b + 2.0).powi(2) * (a + b + 3.0))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + a + b)
                / (denom * denom * (denom + 1.0) * (denom - 1.0))
        };
        off[k] = bk.sqrt();
    }

    let mut first_row = vec![0.0f64; n];
    first_row[0] = 1.0;
    imtqlx(&mut diag, &mut off, &mut first_row)?;

    let mu0 = JacobiRule::mu0(alpha, beta);
    let weights: Vec<f64> = first_row.iter().map(|v| mu0 * v * v).collect();
    Ok((diag, weights))
}

/// Implicit-QL diagonalization of a symmetric tridiagonal matrix, carrying a
/// single vector through the rotations. On exit `d` holds the ascending
/// eigenvalues and `z` the first components of the normalized eigenvectors.
/// `e[1..n]` are the subdiagonal entries (e[0] unused).
fn imtqlx(d: &mut [f64], e: &mut [f64], z: &mut [f64]) -> Result<()> {
    let n = d.len();
    if n == 1 {
        return Ok(());
    }
    // shift so e[i] couples d[i], d[i+1]
    for i in 0..n - 1 {
        e[i] = e[i + 1];
    }
    e[n - 1] = 0.0;

    let prec = f64::EPSILON;
    for l in 0..n {
        let mut iters = 0usize;
        loop {
            let mut m = l;
            while m < n - 1 {
                if e[m].abs() <= prec * (d[m].abs() + d[m + 1].abs()) {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iters += 1;
            if iters > 60 {
                return Err(Error::Domain(
                    "tridiagonal QL iteration failed to converge".into(),
                ));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let mut s = 1.0f64;
            let mut c = 1.0f64;
            let mut p = 0.0f64;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let bb = c * e[i];
                if f.abs() >= g.abs() {
                    c = g / f;
                    r = c.hypot(1.0);
                    e[i + 1] = f * r;
                    s = 1.0 / r;
                    c *= s;
                } else {
                    s = f / g;
                    r = s.hypot(1.0);
                    e[i + 1] = g * r;
                    c = 1.0 / r;
                    s *= c;
                }
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * bb;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - bb;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    // sort ascending, permuting z along
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let ds: Vec<f64> = idx.iter().map(|&i| d[i]).collect();
    let zs: Vec<f64> = idx.iter().map(|&i| z[i]).collect();
    d.copy_from_slice(&ds);
    z.copy_from_slice(&zs);
    Ok(())
}

type Key = (usize, u64, u64);

fn cache() -> &'static Mutex<HashMap<Key, Arc<JacobiRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<JacobiRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Cached rule lookup. Concurrent callers share rules through the Arc.
pub fn jacobi_rule(n: usize, alpha: f64, beta: f64) -> Result<Arc<JacobiRule>> {
    let key = (n, alpha.to_bits(), beta.to_bits());
    if let Some(r) = cache().lock().unwrap().get(&key) {
        return Ok(r.clone());
    }
    let rule = Arc::new(JacobiRule::new(n, alpha, beta)?);
    cache().lock().unwrap().insert(key, rule.clone());
    Ok(rule)
}

/// Gauss-Legendre is the Jacobi rule with both exponents zero.
pub fn legendre_rule(n: usize) -> Result<Arc<JacobiRule>> {
    jacobi_rule(n, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = JacobiRule::new(8, 0.0, 0.0).unwrap();
        // integral of s^k over [-1,1]
        for k in 0..=15usize {
            let got: f64 = r
                .nodes
                .iter()
                .zip(&r.weights)
                .map(|(s, w)| w * s.powi(k as i32))
                .sum();
            let expect = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert_abs_diff_eq!(got, expect, epsilon = 1e-13);
        }
    }

    #[test]
    fn jacobi_mass_matches_beta_function() {
        for &(a, b) in &[(-0.5, 0.5), (0.5, -0.5), (-0.5, -0.5), (0.3, 0.7), (0.0, 0.0)] {
            let r = JacobiRule::new(32, a, b).unwrap();
            let mass: f64 = r.weights.iter().sum();
            assert_abs_diff_eq!(mass, JacobiRule::mu0(a, b), epsilon = 1e-12);
        }
    }

    #[test]
    fn arcsine_rule_mass_is_pi() {
        // a + b = -1 exercises the k = 1 recurrence coefficient
        let r = JacobiRule::new(16, -0.5, -0.5).unwrap();
        let mass: f64 = r.weights.iter().sum();
        assert_abs_diff_eq!(mass, std::f64::consts::PI, epsilon = 1e-12);
    }

    #[test]
    fn singular_weight_integrates_smooth_function() {
        // integral over [-1,1] of (1-s)^(1/2) (1+s)^(-1/2) e^s,
        // reference value from 10k-panel tanh-sinh offline
        let r = JacobiRule::new(64, 0.5, -0.5).unwrap();
        let got: f64 = r
            .nodes
            .iter()
            .zip(&r.weights)
            .map(|(s, w)| w * s.exp())
            .sum();
        let r2 = JacobiRule::new(128, 0.5, -0.5).unwrap();
        let got2: f64 = r2
            .nodes
            .iter()
            .zip(&r2.weights)
            .map(|(s, w)| w * s.exp())
            .sum();
        // doubling the node count must not move the value
        assert_abs_diff_eq!(got, got2, epsilon = 1e-13);
    }

    #[test]
    fn large_rule_builds_and_sums() {
        let r = jacobi_rule(4096, -0.5, 0.5).unwrap();
        let mass: f64 = r.weights.iter().sum();
        assert_abs_diff_eq!(mass, JacobiRule::mu0(-0.5, 0.5), epsilon = 1e-10);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
    }
}

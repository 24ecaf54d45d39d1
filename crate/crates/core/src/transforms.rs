//! Evaluation of the Stieltjes transform m(z), the M-transform
//! M(z) = 1 - 1/(z m(z) + 1), their first two derivatives, the reciprocal
//! transforms eta and psi, and the kernel integrals
//! I(z)    = integral of x / |x - z|^2 dmu(x),
//! Ihat(z) = integral of 1 / |x - z|^2 dmuhat(x),
//! where muhat is the Nevanlinna measure of M(z)/z (total mass Var mu,
//! same support as mu). Ihat never materializes muhat: at complex z it is
//! Im(M(z)/z) / Im z and at real off-support z it is (m' - m^2)/(z m + 1)^2,
//! both algebraic in already-computed quantities.
//!
//! Atoms contribute exact rational terms. Each Jacobi component is
//! integrated by a Gauss-Jacobi rule matching its endpoint exponents, with
//! the node count adapted to the distance from z to the support. For z very
//! close to the interior of a component (needed when one factor of a
//! convolution is a point mass and the subordination functions ride on the
//! support), the integral is split into two off-pole Gauss-Jacobi pieces
//! and a middle piece where a fourth-order local model of the density is
//! subtracted and integrated in closed form, leaving the quadrature a pole
//! of strength O(eps^4).

use crate::error::{Error, Result};
use crate::measures::{JacobiComponent, Measure};
use crate::quadrature::{jacobi_rule, legendre_rule};
use num_complex::Complex64;

/// Transform bundle at a single evaluation point.
#[derive(Debug, Clone, Copy)]
pub struct TransformValue {
    pub z: Complex64,
    /// Stieltjes transform and derivatives m, m', m''.
    pub m: Complex64,
    pub m1: Complex64,
    pub m2: Complex64,
    /// M-transform and derivatives M, M', M''.
    pub big_m: Complex64,
    pub big_m1: Complex64,
    pub big_m2: Complex64,
    /// eta(1/z) = 1/M(z) and psi(1/z) = -1 - z m(z).
    pub eta: Complex64,
    pub psi: Complex64,
    /// I(z); real by definition.
    pub i_val: f64,
    /// Ihat(z); real by definition.
    pub ihat: f64,
}

const N_MIN: usize = 64;
const N_MAX: usize = 4096;

fn bucket(n: f64) -> usize {
    let mut b = N_MIN;
    while (b as f64) < n && b < N_MAX {
        b *= 2;
    }
    b
}

fn component_distance(c: &JacobiComponent, z: Complex64) -> f64 {
    let dx = if z.re < c.lo {
        c.lo - z.re
    } else if z.re > c.hi {
        z.re - c.hi
    } else {
        0.0
    };
    dx.hypot(z.im)
}

/// Raw power sums S_k = sum_i W_i / (x_i - z)^k for k = 1..=order+1
/// plus the absolute sum A = sum_i W_i / |x_i - z|^2 used for I at complex z.
#[derive(Clone, Copy, Default)]
struct PowerSums {
    s1: Complex64,
    s2: Complex64,
    s3: Complex64,
}

impl std::ops::AddAssign for PowerSums {
    fn add_assign(&mut self, o: Self) {
        self.s1 += o.s1;
        self.s2 += o.s2;
        self.s3 += o.s3;
    }
}

fn sum_nodes(xs: &[f64], ws: &[f64], z: Complex64, order: u8) -> PowerSums {
    let mut p = PowerSums::default();
    for (&x, &w) in xs.iter().zip(ws) {
        let r = 1.0 / (Complex64::new(x, 0.0) - z);
        p.s1 += w * r;
        if order >= 1 {
            let r2 = r * r;
            p.s2 += w * r2;
            if order >= 2 {
                p.s3 += w * r2 * r;
            }
        }
    }
    p
}

/// log-derivatives of the component density up to order 4 at an interior x.
fn log_density_derivatives(c: &JacobiComponent, x: f64) -> [f64; 4] {
    let dl = x - c.lo;
    let dr = c.hi - x;
    let mut l = [0.0f64; 4];
    let mut fact = 1.0;
    for (k, lk) in l.iter_mut().enumerate() {
        let kk = (k + 1) as i32;
        // d^k/dx^k log(x-lo) = (-1)^{k-1} (k-1)! / (x-lo)^k
        // d^k/dx^k log(hi-x) = -(k-1)! / (hi-x)^k
        let sign = if (kk - 1) % 2 == 0 { 1.0 } else { -1.0 };
        *lk = fact * (sign * c.t_lo / dl.powi(kk) - c.t_hi / dr.powi(kk));
        fact *= (k + 1) as f64;
    }
    l
}

/// Density derivatives f, f', .., f'''' from the log-derivative cumulants.
fn density_derivatives(c: &JacobiComponent, x: f64) -> [f64; 5] {
    let f = c.density(x);
    let [l1, l2, l3, l4] = log_density_derivatives(c, x);
    [
        f,
        f * l1,
        f * (l1 * l1 + l2),
        f * (l1 * l1 * l1 + 3.0 * l1 * l2 + l3),
        f * (l1.powi(4) + 6.0 * l1 * l1 * l2 + 3.0 * l2 * l2 + 4.0 * l1 * l3 + l4),
    ]
}

/// Closed-form integrals over [a, b] of (t - x0)^j / (t - z)^k
/// for j = 0..=4, k = 1..=3; z off the real segment.
fn model_integrals(a: f64, b: f64, x0: f64, z: Complex64) -> [[Complex64; 5]; 3] {
    let u1 = Complex64::new(a, 0.0) - z;
    let u2 = Complex64::new(b, 0.0) - z;
    // J[p+4] = integral of u^p for p = -3..=4; the horizontal path keeps a
    // fixed sign of Im u, so the principal log difference is the right branch
    let mut jpow = [Complex64::new(0.0, 0.0); 8];
    for (i, p) in (-3i32..=4).enumerate() {
        jpow[i] = if p == -1 {
            u2.ln() - u1.ln()
        } else {
            (u2.powi(p + 1) - u1.powi(p + 1)) / ((p + 1) as f64)
        };
    }
    let jp = |p: i32| jpow[(p + 3) as usize];
    let am = x0 - z.re; // real part of x0 - z
    let aa = Complex64::new(am, -z.im); // a = x0 - z
    let mut out = [[Complex64::new(0.0, 0.0); 5]; 3];
    for (ki, out_k) in out.iter_mut().enumerate() {
        let k = (ki + 1) as i32;
        for (j, out_jk) in out_k.iter_mut().enumerate() {
            // (u - a)^j expanded binomially; integral of u^{j-l-k}
            let mut acc = Complex64::new(0.0, 0.0);
            let mut binom = 1.0f64;
            for l in 0..=j {
                let term = binom * (-aa).powu(l as u32) * jp(j as i32 - l as i32 - k);
                acc += term;
                binom *= (j - l) as f64 / (l + 1) as f64;
            }
            *out_jk = acc;
        }
    }
    out
}

/// Component integrals by the three-piece near-support path.
fn component_sums_near(c: &JacobiComponent, z: Complex64, order: u8) -> Result<PowerSums> {
    let x0 = z.re;
    let eps = z.im;
    let inner = (x0 - c.lo).min(c.hi - x0);
    let delta = 0.5 * inner;
    let (xm, xp) = (x0 - delta, x0 + delta);

    let mut sums = PowerSums::default();

    // left piece [lo, xm] against weight (t - lo)^{t_lo}
    {
        let len = xm - c.lo;
        let n = bucket(20.0 * len / delta);
        let rule = jacobi_rule(n, 0.0, c.t_lo)?;
        let half = 0.5 * len;
        // (t-lo)^{t_lo} = (half (1+s))^{t_lo}; the rule carries (1+s)^{t_lo}
        let scale = c.norm_const * half.powf(c.t_lo + 1.0);
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let t = c.lo + half * (s + 1.0);
            let smooth = (c.hi - t).powf(c.t_hi);
            let r = 1.0 / (Complex64::new(t, 0.0) - z);
            let ww = w * scale * smooth;
            sums.s1 += ww * r;
            if order >= 1 {
                let r2 = r * r;
                sums.s2 += ww * r2;
                if order >= 2 {
                    sums.s3 += ww * r2 * r;
                }
            }
        }
    }

    // right piece [xp, hi] against weight (hi - t)^{t_hi}
    {
        let len = c.hi - xp;
        let n = bucket(20.0 * len / delta);
        let rule = jacobi_rule(n, c.t_hi, 0.0)?;
        let half = 0.5 * len;
        let scale = c.norm_const * half.powf(c.t_hi + 1.0);
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let t = xp + half * (s + 1.0);
            let smooth = (t - c.lo).powf(c.t_lo);
            let r = 1.0 / (Complex64::new(t, 0.0) - z);
            let ww = w * scale * smooth;
            sums.s1 += ww * r;
            if order >= 1 {
                let r2 = r * r;
                sums.s2 += ww * r2;
                if order >= 2 {
                    sums.s3 += ww * r2 * r;
                }
            }
        }
    }

    // middle piece [xm, xp]: subtract the 4th-order Taylor model of the
    // density at x0 and integrate the model in closed form
    {
        let derivs = density_derivatives(c, x0);
        let mut coef = [0.0f64; 5];
        let mut fact = 1.0f64;
        for (j, cf) in coef.iter_mut().enumerate() {
            *cf = derivs[j] / fact;
            fact *= (j + 1) as f64;
        }
        let model = |t: f64| -> f64 {
            let d = t - x0;
            coef[0] + d * (coef[1] + d * (coef[2] + d * (coef[3] + d * coef[4])))
        };
        let ratio = (eps.abs() / delta).max(1e-9);
        let n = bucket(40.0 / ratio.sqrt()).min(2048);
        let rule = legendre_rule(n)?;
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let t = x0 + delta * s;
            let resid = c.density(t) - model(t);
            let r = 1.0 / (Complex64::new(t, 0.0) - z);
            let ww = w * delta * resid;
            sums.s1 += ww * r;
            if order >= 1 {
                let r2 = r * r;
                sums.s2 += ww * r2;
                if order >= 2 {
                    sums.s3 += ww * r2 * r;
                }
            }
        }
        let mi = model_integrals(xm, xp, x0, z);
        for (j, &cf) in coef.iter().enumerate() {
            sums.s1 += cf * mi[0][j];
            if order >= 1 {
                sums.s2 += cf * mi[1][j];
                if order >= 2 {
                    sums.s3 += cf * mi[2][j];
                }
            }
        }
    }

    Ok(sums)
}

fn component_sums(c: &JacobiComponent, z: Complex64, order: u8) -> Result<PowerSums> {
    let span = c.span();
    let eps = z.im.abs();
    let interior = z.re > c.lo && z.re < c.hi;
    let inner = if interior {
        (z.re - c.lo).min(c.hi - z.re)
    } else {
        0.0
    };
    // For a pole over the interior the plain rule converges like
    // exp(-c n eps/span), which the node cap cannot rescue below
    // eps ~ 40/N_MAX; switch to the split path there.
    if interior && 40.0 / eps > 0.8 * N_MAX as f64 && inner > 4.0 * eps && inner > 1e-9 * span {
        return component_sums_near(c, z, order);
    }
    let d = component_distance(c, z);
    let n = bucket(40.0 / d);
    let (xs, ws) = c.mapped_rule(n)?;
    Ok(sum_nodes(&xs, &ws, z, order))
}

fn eval_raw(measure: &Measure, z: Complex64, order: u8) -> Result<PowerSums> {
    // conjugate symmetry: compute in the closed upper half plane
    if z.im < 0.0 {
        let p = eval_raw(measure, z.conj(), order)?;
        return Ok(PowerSums {
            s1: p.s1.conj(),
            s2: p.s2.conj(),
            s3: p.s3.conj(),
        });
    }
    if z.im == 0.0 {
        // exact support hits are singular
        for a in measure.atoms() {
            if z.re == a.location {
                return Err(Error::Singularity { z });
            }
        }
        for c in measure.components() {
            if z.re >= c.lo && z.re <= c.hi {
                return Err(Error::Singularity { z });
            }
        }
    }
    let mut sums = PowerSums::default();
    for a in measure.atoms() {
        let r = 1.0 / (Complex64::new(a.location, 0.0) - z);
        sums.s1 += a.weight * r;
        if order >= 1 {
            let r2 = r * r;
            sums.s2 += a.weight * r2;
            if order >= 2 {
                sums.s3 += a.weight * r2 * r;
            }
        }
    }
    for c in measure.components() {
        sums += component_sums(c, z, order)?;
    }
    Ok(sums)
}

/// Stieltjes transform with derivatives up to `order` (0, 1 or 2):
/// m(z), m'(z), m''(z). Unrequested derivatives are returned as zero.
pub fn stieltjes(
    measure: &Measure,
    z: Complex64,
    order: u8,
) -> Result<(Complex64, Complex64, Complex64)> {
    let p = eval_raw(measure, z, order)?;
    Ok((p.s1, p.s2, 2.0 * p.s3))
}

/// Full transform bundle at z.
pub fn m_transform(measure: &Measure, z: Complex64) -> Result<TransformValue> {
    let (m, m1, m2) = stieltjes(measure, z, 2)?;
    let h = z * m + 1.0;
    if h.norm() < 1e-13 * (1.0 + z.norm() * m.norm()) {
        return Err(Error::Pole { z });
    }
    let h1 = m + z * m1;
    let h2 = 2.0 * m1 + z * m2;
    let big_m = 1.0 - 1.0 / h;
    let big_m1 = h1 / (h * h);
    let big_m2 = h2 / (h * h) - 2.0 * h1 * h1 / (h * h * h);
    let (i_val, ihat) = if z.im != 0.0 {
        let i_val = h.im / z.im;
        let s2 = m.im / z.im; // integral of 1/|x-z|^2
        let ihat = (s2 - m.norm_sqr()) / h.norm_sqr();
        (i_val, ihat)
    } else {
        // real off-support point: |x-z|^2 = (x-z)^2, everything is a derivative
        let i_val = h1.re;
        let ihat = (m1.re - m.re * m.re) / (h.re * h.re);
        (i_val, ihat)
    };
    let eta = 1.0 / big_m;
    let psi = -1.0 - z * m;
    Ok(TransformValue {
        z,
        m,
        m1,
        m2,
        big_m,
        big_m1,
        big_m2,
        eta,
        psi,
        i_val,
        ihat,
    })
}

/// eta and psi transforms at z: eta(z) = 1/M(1/z), psi(z) = -1 - (1/z) m(1/z),
/// with eta = 1 - 1/(psi + 1).
pub fn eta_psi(measure: &Measure, z: Complex64) -> Result<(Complex64, Complex64)> {
    if z.norm() == 0.0 {
        return Err(Error::Domain("eta/psi need 1/z finite, got z = 0".into()));
    }
    let w = 1.0 / z;
    let tv = m_transform(measure, w)?;
    Ok((tv.eta, tv.psi))
}

/// M, M', M'' at a real point off the support.
pub fn big_m_real(measure: &Measure, x: f64) -> Result<(f64, f64, f64)> {
    let tv = m_transform(measure, Complex64::new(x, 0.0))?;
    Ok((tv.big_m.re, tv.big_m1.re, tv.big_m2.re))
}

/// I(x) and Ihat(x) at a real point off the support.
pub fn kernels_real(measure: &Measure, x: f64) -> Result<(f64, f64)> {
    let tv = m_transform(measure, Complex64::new(x, 0.0))?;
    Ok((tv.i_val, tv.ihat))
}

/// Which real branch of M to invert over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// (sup-of-nothing, min supp): M increases from M(0)=0 up to M(lo-).
    BelowSupport,
    /// (max supp, inf): M increases to +inf.
    AboveSupport,
}

/// Invert the strictly increasing real branch of M: find w with M(w) = target.
/// Returns a domain error when the target is outside the branch's range as
/// far as it can be probed (distance 1e-7 * span from the support).
pub fn invert_big_m(measure: &Measure, target: f64, branch: Branch) -> Result<f64> {
    let lo = measure.support_min();
    let hi = measure.support_max();
    let span = (hi - lo).max(hi.abs()).max(1.0);
    let m_at = |w: f64| -> Result<f64> { Ok(big_m_real(measure, w)?.0) };

    let (mut a, mut b) = match branch {
        Branch::BelowSupport => {
            let probe = lo - 1e-7 * span;
            if probe <= 0.0 {
                return Err(Error::Domain(
                    "below-support branch needs support bounded away from 0".into(),
                ));
            }
            if m_at(probe)? <= target {
                return Err(Error::Domain(format!(
                    "M target {target} beyond probed range of the below-support branch"
                )));
            }
            // M(0) = 0 for measures without atom at 0; expand left if needed
            let mut a = lo * 1e-8;
            let mut k = 0;
            while m_at(a)? >= target {
                a *= 1e-2;
                k += 1;
                if k > 8 {
                    return Err(Error::Domain(format!(
                        "M target {target} below the below-support branch range"
                    )));
                }
            }
            (a, probe)
        }
        Branch::AboveSupport => {
            let probe = hi + 1e-7 * span;
            if m_at(probe)? >= target {
                return Err(Error::Domain(format!(
                    "M target {target} beneath probed range of the above-support branch"
                )));
            }
            let mut b = hi + span;
            let mut k = 0;
            while m_at(b)? <= target {
                b = hi + (b - hi) * 4.0;
                k += 1;
                if k > 60 {
                    return Err(Error::Domain(format!(
                        "M target {target} beyond the above-support branch"
                    )));
                }
            }
            (probe, b)
        }
    };

    for _ in 0..90 {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if m_at(mid)? < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    // Newton polish with the analytic derivative
    let mut w = 0.5 * (a + b);
    for _ in 0..6 {
        let (mv, mp, _) = big_m_real(measure, w)?;
        if mp <= 0.0 {
            break;
        }
        let step = (mv - target) / mp;
        let wn = w - step;
        if wn > a && wn < b {
            w = wn;
        } else {
            break;
        }
        if step.abs() < 1e-16 * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use num_complex::Complex64 as C;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    /// Closed-form Stieltjes transform of Marchenko-Pastur:
    /// m(z) = (-z + sqrt(z) sqrt(z-4)) / (2z), principal branches.
    fn m_mp(z: C) -> C {
        (-z + z.sqrt() * (z - 4.0).sqrt()) / (2.0 * z)
    }

    #[test]
    fn stieltjes_point_mass() {
        let d1 = Measure::point_mass(1.0).unwrap();
        let (m, _, _) = stieltjes(&d1, c(0.0, 1.0), 0).unwrap();
        assert_abs_diff_eq!(m.re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(m.im, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn stieltjes_bernoulli_exact() {
        let b = Measure::bernoulli();
        let (m, _, _) = stieltjes(&b, c(1.0, 1.0), 0).unwrap();
        // 0.5/(0-z) + 0.5/(2-z) at z = 1+i equals 0.5i
        assert_abs_diff_eq!(m.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.im, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn stieltjes_marchenko_pastur_closed_form() {
        let mp = Measure::marchenko_pastur();
        for z in [c(-1.0, 0.0), c(2.0, 1.0), c(0.5, 0.3), c(-0.1, 0.0), c(6.0, 0.0)] {
            let (m, _, _) = stieltjes(&mp, z, 0).unwrap();
            let want = m_mp(z);
            assert_relative_eq!(m.re, want.re, epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(m.im, want.im, epsilon = 1e-12, max_relative = 1e-12);
        }
        // golden value at z = -1: (sqrt(5)-1)/2
        let (m, _, _) = stieltjes(&mp, c(-1.0, 0.0), 0).unwrap();
        assert_relative_eq!(m.re, 0.61803398874989485, epsilon = 1e-13);
    }

    #[test]
    fn near_support_evaluation_matches_boundary_value() {
        // uniform on [1,3]: m(z) = 0.5 ln((3-z)/(1-z)); at x+i eps inside,
        // Im m -> pi f(x) = pi/2
        let u = Measure::jacobi(1.0, 3.0, 0.0, 0.0).unwrap();
        for eps in [1e-3, 1e-5, 1e-7, 1e-9] {
            let z = c(2.0, eps);
            let (m, _, _) = stieltjes(&u, z, 0).unwrap();
            let want = 0.5 * ((3.0 - z) / (1.0 - z)).ln();
            assert_relative_eq!(m.re, want.re, epsilon = 1e-11, max_relative = 1e-11);
            assert_relative_eq!(m.im, want.im, epsilon = 1e-11, max_relative = 1e-11);
        }
        // same with singular endpoints
        let mp = Measure::marchenko_pastur();
        for eps in [1e-5, 1e-7] {
            let z = c(2.0, eps);
            let (m, _, _) = stieltjes(&mp, z, 0).unwrap();
            let want = m_mp(z);
            assert_relative_eq!(m.re, want.re, epsilon = 1e-10, max_relative = 1e-10);
            assert_relative_eq!(m.im, want.im, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let j = Measure::jacobi(1.0, 3.0, -0.5, 0.5).unwrap();
        let z = c(0.4, 0.2);
        let h = 1e-5;
        let tv = m_transform(&j, z).unwrap();
        let mp_fd = (m_transform(&j, z + h).unwrap().big_m - m_transform(&j, z - h).unwrap().big_m)
            / (2.0 * h);
        let mpp_fd = (m_transform(&j, z + h).unwrap().big_m1
            - m_transform(&j, z - h).unwrap().big_m1)
            / (2.0 * h);
        assert_relative_eq!(tv.big_m1.re, mp_fd.re, max_relative = 1e-6);
        assert_relative_eq!(tv.big_m1.im, mp_fd.im, max_relative = 1e-6);
        assert_relative_eq!(tv.big_m2.re, mpp_fd.re, max_relative = 1e-6);
        assert_relative_eq!(tv.big_m2.im, mpp_fd.im, max_relative = 1e-6);
    }

    #[test]
    fn m_transform_point_mass_is_linear() {
        // M_{delta_a}(z) = z/a
        let d = Measure::point_mass(2.5).unwrap();
        for z in [c(0.3, 0.7), c(-2.0, 0.0), c(5.0, 1.0)] {
            let tv = m_transform(&d, z).unwrap();
            let want = z / 2.5;
            assert_relative_eq!(tv.big_m.re, want.re, epsilon = 1e-14);
            assert_relative_eq!(tv.big_m.im, want.im, epsilon = 1e-14);
            assert_abs_diff_eq!(tv.ihat, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn bernoulli_m_transform_is_z_minus_one() {
        let b = Measure::bernoulli();
        let tv = m_transform(&b, c(1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(tv.big_m.re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(tv.big_m.im, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn variance_asymptotics_of_m() {
        // M(i eta) - i eta -> -Var mu for mean-1 measures
        let j = Measure::jacobi(1.0, 3.0, -0.5, 0.5).unwrap();
        for m in [
            Measure::bernoulli(),
            Measure::marchenko_pastur(),
            j.dilate(1.0 / j.mean()).unwrap(),
        ] {
            let eta = 1e4;
            let tv = m_transform(&m, c(0.0, eta)).unwrap();
            let diff = tv.big_m - c(0.0, eta);
            assert_abs_diff_eq!(diff.re, -m.variance(), epsilon = 1e-3 * (1.0 + m.variance()));
        }
    }

    #[test]
    fn eta_psi_identities() {
        let mp = Measure::marchenko_pastur();
        let z = c(-0.1, 0.0);
        let (eta, psi) = eta_psi(&mp, z).unwrap();
        // eta = 1 - 1/(psi + 1)
        let rhs = 1.0 - 1.0 / (psi + 1.0);
        assert_relative_eq!(eta.re, rhs.re, epsilon = 1e-12);
        assert_relative_eq!(eta.im, rhs.im, epsilon = 1e-12);
        // eta of a point mass delta_a is a*z
        let d = Measure::point_mass(3.0).unwrap();
        let (eta, _) = eta_psi(&d, c(0.2, 0.1)).unwrap();
        let want = 3.0 * c(0.2, 0.1);
        assert_relative_eq!(eta.re, want.re, epsilon = 1e-13);
        assert_relative_eq!(eta.im, want.im, epsilon = 1e-13);
    }

    #[test]
    fn ihat_equals_derivative_of_m_over_z_on_reals() {
        let j = Measure::jacobi(1.0, 3.0, -0.5, 0.5).unwrap();
        for x in [-2.0, 0.5, 3.8, 10.0] {
            let tv = m_transform(&j, c(x, 0.0)).unwrap();
            let h = 1e-6;
            let g = |x: f64| {
                let t = m_transform(&j, c(x, 0.0)).unwrap();
                (t.big_m / t.z).re
            };
            let fd = (g(x + h) - g(x - h)) / (2.0 * h);
            assert_relative_eq!(tv.ihat, fd, max_relative = 1e-5);
        }
    }

    #[test]
    fn hat_mass_asymptotics() {
        // z^2 Ihat(z) -> Var mu as real z -> -inf (mean-1 measures)
        let j = Measure::jacobi(1.0, 3.0, 0.3, -0.2).unwrap();
        for m in [Measure::marchenko_pastur(), j.dilate(1.0 / j.mean()).unwrap()] {
            let x = -1e3;
            let tv = m_transform(&m, c(x, 0.0)).unwrap();
            assert_relative_eq!(x * x * tv.ihat, m.variance(), max_relative = 1e-2);
        }
    }

    #[test]
    fn quadrature_converges_away_from_support() {
        // doubling nodes changes m(z) by <= 1e-12 at distance >= 0.05
        let m = Measure::jacobi(1.0, 3.0, -0.5, 0.5).unwrap();
        let z = c(0.95, 0.0);
        let c0 = &m.components()[0];
        let p1 = {
            let (xs, ws) = c0.mapped_rule(512).unwrap();
            sum_nodes(&xs, &ws, z, 0).s1
        };
        let p2 = {
            let (xs, ws) = c0.mapped_rule(1024).unwrap();
            sum_nodes(&xs, &ws, z, 0).s1
        };
        assert_abs_diff_eq!(p1.re, p2.re, epsilon = 1e-12);
    }

    #[test]
    fn singularity_errors() {
        let mp = Measure::marchenko_pastur();
        assert!(matches!(
            stieltjes(&mp, c(2.0, 0.0), 0),
            Err(Error::Singularity { .. })
        ));
        let b = Measure::bernoulli();
        assert!(matches!(
            stieltjes(&b, c(2.0, 0.0), 0),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn conjugate_symmetry() {
        let m = Measure::jacobi(0.5, 2.0, -0.3, 0.8).unwrap();
        let z = c(1.2, 0.7);
        let (a, _, _) = stieltjes(&m, z, 0).unwrap();
        let (b, _, _) = stieltjes(&m, z.conj(), 0).unwrap();
        assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
        assert_abs_diff_eq!(a.im, -b.im, epsilon = 1e-15);
    }

    #[test]
    fn invert_big_m_roundtrip() {
        let m = Measure::jacobi(1.0, 3.0, -0.5, 0.5).unwrap();
        let m1 = m.dilate(1.0 / m.mean()).unwrap();
        // below branch
        let w0 = 0.4 * m1.support_min();
        let target = big_m_real(&m1, w0).unwrap().0;
        let w = invert_big_m(&m1, target, Branch::BelowSupport).unwrap();
        assert_relative_eq!(w, w0, max_relative = 1e-11);
        // above branch
        let w0 = 2.0 * m1.support_max();
        let target = big_m_real(&m1, w0).unwrap().0;
        let w = invert_big_m(&m1, target, Branch::AboveSupport).unwrap();
        assert_relative_eq!(w, w0, max_relative = 1e-11);
    }

    #[test]
    fn self_map_property_im_m_over_z() {
        // Im(M(z)/z) >= 0 on C+ for non-point-masses
        let ms = [
            Measure::bernoulli(),
            Measure::marchenko_pastur(),
            Measure::jacobi(1.0, 3.0, 0.0, 0.0).unwrap(),
        ];
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for m in &ms {
            for _ in 0..300 {
                let z = c(-3.0 + 10.0 * next(), 1e-3 + 3.0 * next());
                let tv = m_transform(m, z).unwrap();
                assert!((tv.big_m / z).im > -1e-13, "Im(M/z) < 0 at {z}");
            }
        }
    }
}

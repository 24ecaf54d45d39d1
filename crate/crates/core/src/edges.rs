//! Support endpoints and square-root edge behavior of rho = mu (x) nu for
//! Jacobi factors.
//!
//! At the two endpoints E-, E+ of supp rho the subordination functions take
//! real values and the edge equation
//!
//!   f(E) = E^2 Ihat_mu(Omega_nu(E)) Ihat_nu(Omega_mu(E)) = 1
//!
//! holds, with f < 1 strictly outside the support. Solving f(E) = 1 in E is
//! ill-conditioned (1 - f vanishes like sqrt(|E - E_pm|)), so the solver
//! works in the omega = Omega_mu(E) parametrization instead: with
//! W(omega) = M_mu^{-1}(M_nu(omega)) and
//!
//!   ztilde(omega) = omega W(omega) / M_nu(omega)   (ztilde(Omega_mu(E)) = E),
//!
//! the edge equation becomes the regular root problem
//!
//!   g(omega) = F_nu(omega) F_mu(W(omega)) - 1 = 0,
//!   F_tau(w) = w M_tau'(w) / M_tau(w) - 1,
//!
//! equivalent to ztilde'(omega) = 0. The edge is E = ztilde(omega*), and the
//! square-root coefficients come from ztilde'' through the explicit
//! three-term formula in M' and M''.
//!
//! A second, independent detector locates each edge by scanning the
//! boundary density for positivity and inverting the local square-root law;
//! find_support cross-validates the two against each other.

use crate::density::density_at;
use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::subordination::EpsLadder;
use crate::transforms::{big_m_real, invert_big_m, kernels_real, Branch};

/// Support endpoints, subordination values and square-root coefficients.
#[derive(Debug, Clone, Copy)]
pub struct SupportInfo {
    pub e_minus: f64,
    pub e_plus: f64,
    /// Omega_mu at (E-, E+), original coordinates.
    pub omega_mu_at: (f64, f64),
    /// Omega_nu at (E-, E+).
    pub omega_nu_at: (f64, f64),
    /// gamma^mu at (E-, E+): Im Omega_mu(x+i0) ~ gamma^mu_- sqrt(x - E-)
    /// just inside the lower edge, mirrored at the upper. Zero until
    /// `sqrt_coefficients` fills them.
    pub gamma_mu: (f64, f64),
    pub gamma_nu: (f64, f64),
    /// |f(E_pm) - 1| at the accepted edges.
    pub residuals: (f64, f64),
    /// M_rho at the edges (rescaled, mean-1 coordinates).
    pub big_m_rho_at: (f64, f64),
    /// (mean mu, mean nu): the dilation undone when mapping back.
    pub scale: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Lower,
    Upper,
}

/// Everything the edge machinery needs at one omega.
#[derive(Debug, Clone, Copy)]
struct EdgeEval {
    omega: f64,
    w_big: f64,
    m_rho: f64,
    /// F_nu(omega) * F_mu(W) - 1; zero exactly at the edge.
    g: f64,
}

fn require_assumption(m: &Measure, name: &str) -> Result<()> {
    let rep = m.validate();
    if !rep.edge_machinery_up_to_dilation {
        return Err(Error::Structure(format!(
            "{name} violates the edge assumptions (single Jacobi component, no atoms, support in (0, inf)): {:?}",
            rep.violations
        )));
    }
    Ok(())
}

fn rescaled_pair(mu: &Measure, nu: &Measure) -> Result<(Measure, Measure, f64, f64)> {
    let a = mu.mean();
    let b = nu.mean();
    Ok((mu.dilate(1.0 / a)?, nu.dilate(1.0 / b)?, a, b))
}

/// F_tau(w) = w M'(w)/M(w) - 1 at a real off-support point.
fn f_factor(m: &Measure, w: f64) -> Result<f64> {
    let (mv, mp, _) = big_m_real(m, w)?;
    Ok(w * mp / mv - 1.0)
}

fn edge_eval(mu1: &Measure, nu1: &Measure, omega: f64, side: Side) -> Result<EdgeEval> {
    let branch = match side {
        Side::Lower => Branch::BelowSupport,
        Side::Upper => Branch::AboveSupport,
    };
    let m_rho = big_m_real(nu1, omega)?.0;
    let w_big = invert_big_m(mu1, m_rho, branch)?;
    let g = f_factor(nu1, omega)? * f_factor(mu1, w_big)? - 1.0;
    Ok(EdgeEval {
        omega,
        w_big,
        m_rho,
        g,
    })
}

fn ztilde(ev: &EdgeEval) -> f64 {
    ev.omega * ev.w_big / ev.m_rho
}

/// Scan the omega branch for a sign change of g, refining toward the end of
/// the computable range when M inversion fails before the change shows up.
fn bracket_edge(mu1: &Measure, nu1: &Measure, side: Side) -> Result<(EdgeEval, EdgeEval)> {
    let lo_nu = nu1.support_min();
    let hi_nu = nu1.support_max();
    let omegas: Vec<f64> = match side {
        Side::Lower => {
            let mut u: Vec<f64> = (1..20).map(|j| 0.05 * j as f64).collect();
            u.extend([0.96, 0.97, 0.98, 0.99, 0.995, 0.999, 0.9999, 0.99999]);
            u.iter().map(|u| u * lo_nu).collect()
        }
        Side::Upper => {
            let mut s = vec![1e-5, 1e-4, 1e-3];
            let mut v = 0.01;
            while v < 2000.0 {
                s.push(v);
                v *= 1.7;
            }
            s.iter().map(|s| hi_nu * (1.0 + s)).collect()
        }
    };

    let evals: Vec<(f64, Option<EdgeEval>)> = omegas
        .iter()
        .map(|&omega| (omega, edge_eval(mu1, nu1, omega, side).ok()))
        .collect();

    // adjacent valid pair with a sign change
    for w in evals.windows(2) {
        if let (Some(a), Some(b)) = (w[0].1, w[1].1) {
            if a.g * b.g < 0.0 {
                return Ok(order_bracket(a, b));
            }
        }
    }

    // Otherwise the missing sign lives against a wall where the M inversion
    // stops being possible (the divergent factor sits exactly there); close
    // in on each valid/invalid boundary from the valid side.
    for w in evals.windows(2) {
        let (anchor, invalid_omega) = match (w[0].1, w[1].1) {
            (Some(a), None) => (a, w[1].0),
            (None, Some(b)) => (b, w[0].0),
            _ => continue,
        };
        let mut valid = anchor;
        let mut width = invalid_omega - valid.omega;
        for _ in 0..60 {
            width *= 0.5;
            let probe = valid.omega + width;
            if let Ok(ev) = edge_eval(mu1, nu1, probe, side) {
                if valid.g * ev.g < 0.0 {
                    return Ok(order_bracket(valid, ev));
                }
                valid = ev;
            }
            if width.abs() < 1e-14 * (1.0 + valid.omega.abs()) {
                break;
            }
        }
    }
    Err(Error::Structure(format!(
        "no sign change of the edge function on the {side:?} branch; \
         input violates the assumptions or the scan grid is too coarse"
    )))
}

fn order_bracket(a: EdgeEval, b: EdgeEval) -> (EdgeEval, EdgeEval) {
    if a.g < 0.0 {
        (a, b)
    } else {
        (b, a)
    }
}

/// Bisect g to the f64 limit; g has a simple root at the edge.
fn solve_edge(mu1: &Measure, nu1: &Measure, side: Side) -> Result<EdgeEval> {
    let (mut neg, mut pos) = bracket_edge(mu1, nu1, side)?;
    for _ in 0..100 {
        let mid = 0.5 * (neg.omega + pos.omega);
        if mid <= neg.omega.min(pos.omega) || mid >= neg.omega.max(pos.omega) {
            break;
        }
        let ev = edge_eval(mu1, nu1, mid, side)?;
        if ev.g < 0.0 {
            neg = ev;
        } else {
            pos = ev;
        }
    }
    Ok(if neg.g.abs() < pos.g.abs() { neg } else { pos })
}

/// The edge-characterization function f(E) = E^2 Ihat_mu(Omega_nu(E))
/// Ihat_nu(Omega_mu(E)) at a real E strictly outside the support
/// (f < 1 there, with equality exactly at the endpoints).
pub fn edge_function(mu: &Measure, nu: &Measure, e: f64) -> Result<f64> {
    require_assumption(mu, "mu")?;
    require_assumption(nu, "nu")?;
    if e <= 0.0 {
        return Err(Error::Domain(format!("edge function needs E > 0, got {e}")));
    }
    let (mu1, nu1, a, b) = rescaled_pair(mu, nu)?;
    let e1 = e / (a * b);
    let side = if e1 < 1.0 { Side::Lower } else { Side::Upper };
    let crit = solve_edge(&mu1, &nu1, side)?;
    let e_edge = ztilde(&crit);
    if (e1 - e_edge).abs() <= 1e-12 * e_edge.max(1.0) {
        // at the edge itself evaluate through the critical point, where the
        // parametrization is exact
        return edge_f_value(&mu1, &nu1, &crit);
    }
    let inside = match side {
        Side::Lower => e1 > e_edge,
        Side::Upper => e1 < e_edge,
    };
    if inside {
        return Err(Error::Domain(format!(
            "E = {e} lies inside the support; Omega is not real there"
        )));
    }
    // invert ztilde on the monotone outer part of the branch
    let far = far_bracket(&mu1, &nu1, side, &crit, e1)?;
    let (mut lo, mut hi) = (far, crit);
    for _ in 0..100 {
        let mid = 0.5 * (lo.omega + hi.omega);
        if mid <= lo.omega.min(hi.omega) || mid >= lo.omega.max(hi.omega) {
            break;
        }
        let ev = edge_eval(&mu1, &nu1, mid, side)?;
        // ztilde increases toward the lower critical point and decreases
        // away from the upper one
        let toward_crit = match side {
            Side::Lower => ztilde(&ev) < e1,
            Side::Upper => ztilde(&ev) > e1,
        };
        if toward_crit {
            lo = ev;
        } else {
            hi = ev;
        }
    }
    let ev = if (ztilde(&lo) - e1).abs() < (ztilde(&hi) - e1).abs() {
        lo
    } else {
        hi
    };
    edge_f_value(&mu1, &nu1, &ev)
}

fn far_bracket(
    mu1: &Measure,
    nu1: &Measure,
    side: Side,
    crit: &EdgeEval,
    e1: f64,
) -> Result<EdgeEval> {
    // walk outward from the critical point until ztilde passes e1
    let mut omega = crit.omega;
    let mut step = match side {
        Side::Lower => -0.1 * crit.omega,
        Side::Upper => 0.1 * crit.omega,
    };
    for _ in 0..200 {
        omega += step;
        if side == Side::Lower && omega <= 0.0 {
            omega = 1e-12;
        }
        let ev = edge_eval(mu1, nu1, omega, side)?;
        let passed = match side {
            Side::Lower => ztilde(&ev) < e1,
            Side::Upper => ztilde(&ev) > e1,
        };
        if passed {
            return Ok(ev);
        }
        step *= 1.5;
    }
    Err(Error::Domain(format!(
        "could not bracket E' = {e1} on the {side:?} branch"
    )))
}

fn edge_f_value(mu1: &Measure, nu1: &Measure, ev: &EdgeEval) -> Result<f64> {
    let e = ztilde(ev);
    let (_, ihat_nu) = kernels_real(nu1, ev.omega)?;
    let (_, ihat_mu) = kernels_real(mu1, ev.w_big)?;
    Ok(e * e * ihat_mu * ihat_nu)
}

/// ztilde'' at the edge from the explicit three-term formula in M', M''
/// of both factors; the argument order mirrors the subordination pairing
/// (omega feeds M_nu, W feeds M_mu).
fn ztilde_second(mu1: &Measure, nu1: &Measure, ev: &EdgeEval) -> Result<f64> {
    let (m_rho, mnu1, mnu2) = big_m_real(nu1, ev.omega)?;
    let (_, mmu1, mmu2) = big_m_real(mu1, ev.w_big)?;
    Ok(2.0 * mnu1 / (m_rho * mmu1)
        - ev.w_big * mnu2 / (m_rho * mnu1)
        - ev.omega * mnu1 * mnu1 * mmu2 / (m_rho * mmu1.powi(3)))
}

/// ztilde' by the product rule; vanishes at the edge.
fn ztilde_prime(mu1: &Measure, nu1: &Measure, ev: &EdgeEval) -> Result<f64> {
    let (mv, mvp, _) = big_m_real(nu1, ev.omega)?;
    let (_, mup, _) = big_m_real(mu1, ev.w_big)?;
    let wp = mvp / mup;
    Ok(ev.w_big / mv + ev.omega * wp / mv - ev.omega * ev.w_big * mvp / (mv * mv))
}

/// Locate both support endpoints of mu (x) nu.
///
/// Detector one solves the edge equation in the omega parametrization;
/// detector two scans the boundary density for positivity and inverts the
/// square-root law. The two must agree to 1e-6 or the result is rejected.
pub fn find_support(mu: &Measure, nu: &Measure) -> Result<SupportInfo> {
    require_assumption(mu, "mu")?;
    require_assumption(nu, "nu")?;
    let (mu1, nu1, a, b) = rescaled_pair(mu, nu)?;
    let s = a * b;

    let lo_ev = solve_edge(&mu1, &nu1, Side::Lower)?;
    let hi_ev = solve_edge(&mu1, &nu1, Side::Upper)?;
    let (e_lo, e_hi) = (ztilde(&lo_ev), ztilde(&hi_ev));
    if !(0.0 < e_lo && e_lo < e_hi) {
        return Err(Error::Structure(format!(
            "edge solutions out of order: E- = {e_lo}, E+ = {e_hi}"
        )));
    }
    // mixed-image configurations admit no edge; both images must sit on the
    // same side of the respective supports
    if !(lo_ev.omega < nu1.support_min()
        && lo_ev.w_big < mu1.support_min()
        && hi_ev.omega > nu1.support_max()
        && hi_ev.w_big > mu1.support_max())
    {
        return Err(Error::Structure(
            "edge images straddle the factor supports (mixed case)".into(),
        ));
    }

    // detector two: boundary-density positivity scan + square-root inversion
    let scan = scan_edges(&mu1, &nu1, e_lo, e_hi)?;
    let agree = (scan.0 - e_lo).abs().max((scan.1 - e_hi).abs());
    if agree > 1e-6 {
        return Err(Error::Structure(format!(
            "edge detectors disagree: equation ({e_lo}, {e_hi}) vs density scan {scan:?}; |diff| = {agree}"
        )));
    }

    let r_lo = edge_f_value(&mu1, &nu1, &lo_ev)?;
    let r_hi = edge_f_value(&mu1, &nu1, &hi_ev)?;

    Ok(SupportInfo {
        e_minus: s * e_lo,
        e_plus: s * e_hi,
        omega_mu_at: (b * lo_ev.omega, b * hi_ev.omega),
        omega_nu_at: (a * lo_ev.w_big, a * hi_ev.w_big),
        gamma_mu: (0.0, 0.0),
        gamma_nu: (0.0, 0.0),
        residuals: ((r_lo - 1.0).abs(), (r_hi - 1.0).abs()),
        big_m_rho_at: (lo_ev.m_rho, hi_ev.m_rho),
        scale: (a, b),
    })
}

/// Standalone density-scan edge detector in original coordinates: coarse
/// positivity sweep, indicator bisection, square-root inversion. Fully
/// independent of the edge-equation solve.
pub fn density_scan_edges(mu: &Measure, nu: &Measure) -> Result<(f64, f64)> {
    require_assumption(mu, "mu")?;
    require_assumption(nu, "nu")?;
    let (mu1, nu1, a, b) = rescaled_pair(mu, nu)?;
    let lo = 0.5 * mu1.support_min() * nu1.support_min();
    let hi = 1.1 * mu1.support_max() * nu1.support_max();
    let ladder = EpsLadder::default();
    let n = 96;
    let step = (hi - lo) / (n - 1) as f64;
    let mut first = f64::NAN;
    let mut last = f64::NAN;
    for i in 0..n {
        let x = lo + step * i as f64;
        let f = density_at(&mu1, &nu1, x, &ladder).unwrap_or(0.0);
        if f > 1e-3 {
            if first.is_nan() {
                first = x;
            }
            last = x;
        }
    }
    if first.is_nan() {
        return Err(Error::Structure("density scan found no support".into()));
    }
    let s = a * b;
    let (e_lo, e_hi) = scan_edges(&mu1, &nu1, first - step, last + step)?;
    Ok((s * e_lo, s * e_hi))
}

/// Density-scan edge refinement in rescaled coordinates. Returns (E-, E+).
/// The hints narrow the coarse window; the scan still measures the density
/// independently of the equation solve.
fn scan_edges(mu1: &Measure, nu1: &Measure, hint_lo: f64, hint_hi: f64) -> Result<(f64, f64)> {
    let span = hint_hi - hint_lo;
    let ladder = EpsLadder::default();
    let f_at = |x: f64| -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        density_at(mu1, nu1, x, &ladder).unwrap_or(0.0)
    };

    let mut out = [0.0f64; 2];
    for (k, (edge, inward)) in [(hint_lo, 1.0f64), (hint_hi, -1.0f64)].iter().enumerate() {
        // bisect the positivity indicator on a window around the edge
        let mut outside = edge - inward * 0.05 * span;
        let mut inside = edge + inward * 0.05 * span;
        if f_at(inside) <= 1e-6 || f_at(outside) > 1e-6 {
            return Err(Error::Structure(format!(
                "density scan window around {edge} does not straddle the edge"
            )));
        }
        for _ in 0..24 {
            let mid = 0.5 * (outside + inside);
            if f_at(mid) > 1e-6 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        // three-point inversion of f^2 = c^2 (x - E)(1 + a(x - E) + ...):
        // interpolate f^2 quadratically and take its root; the quadratic
        // absorbs the first curvature correction of the square-root law
        let d = 5e-5 * span * inward;
        let xs = [inside + d, inside + 2.0 * d, inside + 3.0 * d];
        let q: Vec<f64> = xs.iter().map(|&x| f_at(x) * f_at(x)).collect();
        if !(q[0] > 0.0 && q[1] > q[0] == (*inward > 0.0) || q.iter().all(|v| *v > 0.0)) {
            return Err(Error::Structure(format!(
                "square-root inversion failed near {edge}: f^2 = {q:?}"
            )));
        }
        let quad = |x: f64| -> f64 {
            let l0 = (x - xs[1]) * (x - xs[2]) / ((xs[0] - xs[1]) * (xs[0] - xs[2]));
            let l1 = (x - xs[0]) * (x - xs[2]) / ((xs[1] - xs[0]) * (xs[1] - xs[2]));
            let l2 = (x - xs[0]) * (x - xs[1]) / ((xs[2] - xs[0]) * (xs[2] - xs[1]));
            q[0] * l0 + q[1] * l1 + q[2] * l2
        };
        // Newton from the linear estimate
        let mut e_est = xs[0] - d * q[0] / (q[1] - q[0]);
        for _ in 0..40 {
            let h = 1e-9 * span;
            let (v, vp) = (quad(e_est), (quad(e_est + h) - quad(e_est - h)) / (2.0 * h));
            if vp.abs() < 1e-300 {
                break;
            }
            let step = v / vp;
            e_est -= step;
            if step.abs() < 1e-14 * span.abs() {
                break;
            }
        }
        out[k] = e_est;
    }
    Ok((out[0], out[1]))
}

/// Fill the square-root coefficients of both subordination functions at
/// both edges: gamma = sqrt(2/|ztilde''|), with the sign of ztilde''
/// checked against the side (negative at E-, positive at E+).
pub fn sqrt_coefficients(mu: &Measure, nu: &Measure, info: &SupportInfo) -> Result<SupportInfo> {
    let (mu1, nu1, a, b) = rescaled_pair(mu, nu)?;
    let mut out = *info;

    let gamma = |m_first: &Measure,
                 n_second: &Measure,
                 omega: f64,
                 w_big: f64,
                 side: Side|
     -> Result<f64> {
        let ev = EdgeEval {
            omega,
            w_big,
            m_rho: big_m_real(n_second, omega)?.0,
            g: 0.0,
        };
        let zpp = ztilde_second(m_first, n_second, &ev)?;
        if zpp.abs() < 1e-10 {
            return Err(Error::DegenerateEdge { value: zpp.abs() });
        }
        let sign_ok = match side {
            Side::Lower => zpp < 0.0,
            Side::Upper => zpp > 0.0,
        };
        if !sign_ok {
            return Err(Error::Structure(format!(
                "ztilde'' has the wrong sign at the {side:?} edge: {zpp}"
            )));
        }
        Ok((2.0 / zpp.abs()).sqrt())
    };

    // rescaled omegas: omega_mu' = omega_mu/b, omega_nu' = omega_nu/a
    let om = (info.omega_mu_at.0 / b, info.omega_mu_at.1 / b);
    let on = (info.omega_nu_at.0 / a, info.omega_nu_at.1 / a);

    let g_mu_lo = gamma(&mu1, &nu1, om.0, on.0, Side::Lower)?;
    let g_mu_hi = gamma(&mu1, &nu1, om.1, on.1, Side::Upper)?;
    // swapped roles for Omega_nu: its inverse map composes M_mu after M_nu^{-1}
    let g_nu_lo = gamma(&nu1, &mu1, on.0, om.0, Side::Lower)?;
    let g_nu_hi = gamma(&nu1, &mu1, on.1, om.1, Side::Upper)?;

    // undo the mean-1 dilation: Omega_mu scales by b, sqrt(E) by sqrt(ab)
    let s = a * b;
    out.gamma_mu = (g_mu_lo * b / s.sqrt(), g_mu_hi * b / s.sqrt());
    out.gamma_nu = (g_nu_lo * a / s.sqrt(), g_nu_hi * a / s.sqrt());
    Ok(out)
}

/// Near-edge density model
/// f(x) ~ gamma^mu I_nu(Omega_mu(E)) sqrt(|x - E|) / (pi x)
/// inside the default window of width 1e-3 (E+ - E-) at each edge.
pub fn near_edge_density(info: &SupportInfo, mu: &Measure, nu: &Measure, x: f64) -> Result<f64> {
    let _ = mu;
    let window = 1e-3 * (info.e_plus - info.e_minus);
    let (gamma, omega, dist) = if x >= info.e_minus && x <= info.e_minus + window {
        (info.gamma_mu.0, info.omega_mu_at.0, x - info.e_minus)
    } else if x <= info.e_plus && x >= info.e_plus - window {
        (info.gamma_mu.1, info.omega_mu_at.1, info.e_plus - x)
    } else {
        return Err(Error::Domain(format!(
            "x = {x} is outside the near-edge windows [{}, {}] and [{}, {}]",
            info.e_minus,
            info.e_minus + window,
            info.e_plus - window,
            info.e_plus
        )));
    };
    if gamma == 0.0 {
        return Err(Error::Domain(
            "near_edge_density needs gamma coefficients; call sqrt_coefficients first".into(),
        ));
    }
    let (i_nu, _) = kernels_real(nu, omega)?;
    Ok(gamma * i_nu * dist.sqrt() / (std::f64::consts::PI * x))
}

/// ztilde' at the solved edges, for diagnostics and tests: both values
/// should vanish (the first-derivative condition of the edge).
pub fn edge_first_derivative(
    mu: &Measure,
    nu: &Measure,
    info: &SupportInfo,
) -> Result<(f64, f64)> {
    let (mu1, nu1, a, b) = rescaled_pair(mu, nu)?;
    let evs = [
        EdgeEval {
            omega: info.omega_mu_at.0 / b,
            w_big: info.omega_nu_at.0 / a,
            m_rho: info.big_m_rho_at.0,
            g: 0.0,
        },
        EdgeEval {
            omega: info.omega_mu_at.1 / b,
            w_big: info.omega_nu_at.1 / a,
            m_rho: info.big_m_rho_at.1,
            g: 0.0,
        },
    ];
    Ok((
        ztilde_prime(&mu1, &nu1, &evs[0])?,
        ztilde_prime(&mu1, &nu1, &evs[1])?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subordination::solve_boundary;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn test_pair() -> (Measure, Measure) {
        (
            Measure::jacobi(1.0, 3.0, -0.5, 0.5).unwrap(),
            Measure::jacobi(1.0, 3.0, 0.5, -0.5).unwrap(),
        )
    }

    #[test]
    fn edges_found_with_unit_residual() {
        let (mu, nu) = test_pair();
        let info = find_support(&mu, &nu).unwrap();
        assert!(info.e_minus > 0.0 && info.e_minus < info.e_plus);
        assert!(info.residuals.0 <= 1e-8, "residual {}", info.residuals.0);
        assert!(info.residuals.1 <= 1e-8, "residual {}", info.residuals.1);
        // ordering chain in original coordinates
        assert!(info.omega_nu_at.0 < mu.support_min());
        assert!(info.omega_nu_at.1 > mu.support_max());
        assert!(info.omega_mu_at.0 < nu.support_min());
        assert!(info.omega_mu_at.1 > nu.support_max());
    }

    #[test]
    fn edge_function_below_one_outside() {
        let (mu, nu) = test_pair();
        let info = find_support(&mu, &nu).unwrap();
        for e in [0.5 * info.e_minus, 0.9 * info.e_minus, 1.2 * info.e_plus] {
            let f = edge_function(&mu, &nu, e).unwrap();
            assert!(f < 1.0, "f({e}) = {f} should be < 1 outside");
        }
        let f_far = edge_function(&mu, &nu, 10.0 * info.e_plus).unwrap();
        assert!(f_far < 0.2);
        // at the converged edges the defect is at the unit-residual level
        let f_lo = edge_function(&mu, &nu, info.e_minus).unwrap();
        let f_hi = edge_function(&mu, &nu, info.e_plus).unwrap();
        assert!((f_lo - 1.0).abs() <= 1e-8, "f(E-) = {f_lo}");
        assert!((f_hi - 1.0).abs() <= 1e-8, "f(E+) = {f_hi}");
    }

    #[test]
    fn edge_function_inside_is_domain_error() {
        let (mu, nu) = test_pair();
        let info = find_support(&mu, &nu).unwrap();
        let mid = 0.5 * (info.e_minus + info.e_plus);
        assert!(matches!(edge_function(&mu, &nu, mid), Err(Error::Domain(_))));
    }

    #[test]
    fn swap_symmetry_of_support() {
        let (mu, nu) = test_pair();
        let a = find_support(&mu, &nu).unwrap();
        let b = find_support(&nu, &mu).unwrap();
        assert_relative_eq!(a.e_minus, b.e_minus, max_relative = 1e-9);
        assert_relative_eq!(a.e_plus, b.e_plus, max_relative = 1e-9);
        assert_relative_eq!(a.omega_mu_at.0, b.omega_nu_at.0, max_relative = 1e-9);
        assert_relative_eq!(a.omega_nu_at.1, b.omega_mu_at.1, max_relative = 1e-9);
    }

    #[test]
    fn dilation_equivariance() {
        let (mu, nu) = test_pair();
        let base = find_support(&mu, &nu).unwrap();
        let scaled = find_support(&mu, &nu.dilate(2.0).unwrap()).unwrap();
        assert_relative_eq!(scaled.e_minus, 2.0 * base.e_minus, max_relative = 1e-8);
        assert_relative_eq!(scaled.e_plus, 2.0 * base.e_plus, max_relative = 1e-8);
    }

    #[test]
    fn atoms_rejected() {
        let b = Measure::bernoulli();
        let mp = Measure::marchenko_pastur();
        assert!(matches!(find_support(&b, &mp), Err(Error::Structure(_))));
        // lo = 0 also violates the assumptions
        assert!(matches!(find_support(&mp, &mp), Err(Error::Structure(_))));
    }

    #[test]
    fn first_derivative_vanishes_at_edges() {
        let (mu, nu) = test_pair();
        let info = find_support(&mu, &nu).unwrap();
        let (d_lo, d_hi) = edge_first_derivative(&mu, &nu, &info).unwrap();
        assert!(d_lo.abs() <= 1e-6, "ztilde'(E-) = {d_lo}");
        assert!(d_hi.abs() <= 1e-6, "ztilde'(E+) = {d_hi}");
    }

    #[test]
    fn sqrt_coefficients_match_boundary_fit() {
        let (mu, nu) = test_pair();
        let info = find_support(&mu, &nu).unwrap();
        let info = sqrt_coefficients(&mu, &nu, &info).unwrap();
        assert!(info.gamma_mu.0 > 0.0 && info.gamma_mu.1 > 0.0);
        assert!(info.gamma_nu.0 > 0.0 && info.gamma_nu.1 > 0.0);

        // finite-difference oracle: log-log fit of Im Omega_mu just inside E-
        let ladder = EpsLadder::default();
        let mut logs: Vec<(f64, f64)> = Vec::new();
        for k in 1..=6 {
            let d = 1e-4 * k as f64;
            let x = info.e_minus + d;
            let st = solve_boundary(&mu, &nu, x, &ladder).unwrap();
            logs.push((d.ln(), st.omega_mu.im.ln()));
        }
        let n = logs.len() as f64;
        let sx: f64 = logs.iter().map(|p| p.0).sum();
        let sy: f64 = logs.iter().map(|p| p.1).sum();
        let sxx: f64 = logs.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = logs.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = ((sy - slope * sx) / n).exp();
        assert_abs_diff_eq!(slope, 0.5, epsilon = 0.02);
        assert_relative_eq!(intercept, info.gamma_mu.0, max_relative = 0.01);
    }

    #[test]
    fn near_edge_model_tracks_density() {
        let (mu, nu) = test_pair();
        let info = find_support(&mu, &nu).unwrap();
        let info = sqrt_coefficients(&mu, &nu, &info).unwrap();
        let window = 1e-3 * (info.e_plus - info.e_minus);
        let x = info.e_minus + 0.5 * window;
        let model = near_edge_density(&info, &mu, &nu, x).unwrap();
        let f = density_at(&mu, &nu, x, &EpsLadder::default()).unwrap();
        assert_relative_eq!(f, model, max_relative = 0.05);
        // exactly at the edge the model vanishes
        assert_eq!(near_edge_density(&info, &mu, &nu, info.e_minus).unwrap(), 0.0);
        // monotone over the window
        let x2 = info.e_minus + 0.9 * window;
        assert!(near_edge_density(&info, &mu, &nu, x2).unwrap() > model);
        // outside the windows: domain error
        let mid = 0.5 * (info.e_minus + info.e_plus);
        assert!(near_edge_density(&info, &mu, &nu, mid).is_err());
    }

    #[test]
    fn swap_relabels_gamma() {
        let (mu, nu) = test_pair();
        let a = sqrt_coefficients(&mu, &nu, &find_support(&mu, &nu).unwrap()).unwrap();
        let b = sqrt_coefficients(&nu, &mu, &find_support(&nu, &mu).unwrap()).unwrap();
        assert_relative_eq!(a.gamma_mu.0, b.gamma_nu.0, max_relative = 1e-7);
        assert_relative_eq!(a.gamma_nu.1, b.gamma_mu.1, max_relative = 1e-7);
    }
}

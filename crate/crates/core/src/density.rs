//! Lebesgue decomposition of rho = mu (x) nu: the atom list by the exact
//! pairing rule, the absolutely continuous density by Stieltjes inversion
//! of extrapolated boundary values, and a mass audit of a computed grid.
//!
//! rho has an atom at uv exactly when mu({u}) + nu({v}) > 1 (mass the
//! excess), an atom at 0 of mass max(mu({0}), nu({0})), and no singular
//! continuous part; the density is pi^{-1} Im m_rho(x + i0).

use crate::error::{Error, Result};
use crate::measures::Measure;
use crate::subordination::{solve_boundary_seeded, stability_check, EpsLadder, SubordinationState};
use num_complex::Complex64;

/// Clip threshold for small negative densities from extrapolation noise.
const NEG_CLIP: f64 = 1e-12;
/// Negative densities beyond this are a diagnostic, not noise.
const NEG_RAISE: f64 = 1e-9;

/// One atom of the convolution with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomEntry {
    pub location: f64,
    pub mass: f64,
    /// (u, v) with location = u v, or None for the atom at 0.
    pub witness: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Default)]
pub struct AtomReport {
    pub entries: Vec<AtomEntry>,
}

impl AtomReport {
    pub fn total_mass(&self) -> f64 {
        self.entries.iter().map(|e| e.mass).sum()
    }
}

/// Atoms of mu (x) nu, exhaustive over atom pairs.
pub fn atoms(mu: &Measure, nu: &Measure) -> AtomReport {
    let mut entries = Vec::new();
    let zero = mu.mass_at_zero().max(nu.mass_at_zero());
    if zero > 0.0 {
        entries.push(AtomEntry {
            location: 0.0,
            mass: zero,
            witness: None,
        });
    }
    for a in mu.atoms().iter().filter(|a| a.location > 0.0) {
        for b in nu.atoms().iter().filter(|b| b.location > 0.0) {
            let excess = a.weight + b.weight - 1.0;
            if excess > 0.0 {
                entries.push(AtomEntry {
                    location: a.location * b.location,
                    mass: excess,
                    witness: Some((a.location, b.location)),
                });
            }
        }
    }
    entries.sort_by(|p, q| p.location.partial_cmp(&q.location).unwrap());
    AtomReport { entries }
}

/// Density of the absolutely continuous part at x > 0:
/// f(x) = Im m_rho(x + i0) / pi.
pub fn density_at(mu: &Measure, nu: &Measure, x: f64, ladder: &EpsLadder) -> Result<f64> {
    let st = boundary_state(mu, nu, x, ladder, None)?;
    density_from_state(&st, x)
}

fn boundary_state(
    mu: &Measure,
    nu: &Measure,
    x: f64,
    ladder: &EpsLadder,
    seed: Option<Complex64>,
) -> Result<SubordinationState> {
    if x <= 0.0 {
        return Err(Error::Domain(format!(
            "density is evaluated on (0, inf), got x = {x}"
        )));
    }
    let rho_atoms = atoms(mu, nu);
    if rho_atoms
        .entries
        .iter()
        .any(|e| (e.location - x).abs() <= 1e-12 * x.max(1.0))
    {
        return Err(Error::Domain(format!("x = {x} is an atom of the convolution")));
    }
    solve_boundary_seeded(mu, nu, x, ladder, seed)
}

fn density_from_state(st: &SubordinationState, x: f64) -> Result<f64> {
    let f = st.m_rho.im / std::f64::consts::PI;
    if f < -NEG_RAISE {
        return Err(Error::Boundary {
            x,
            estimate: f.abs(),
        });
    }
    Ok(if f < NEG_CLIP { 0.0 } else { f })
}

/// Per-point diagnostic attached to a density grid.
#[derive(Debug, Clone, Copy)]
pub struct PointDiagnostics {
    /// Extrapolation error estimate from the boundary solve.
    pub residual: f64,
    /// dist(Omega_nu, supp mu).
    pub d_mu: f64,
    /// dist(Omega_mu, supp nu).
    pub d_nu: f64,
    pub failed: bool,
    /// Boundary values carried for CSV emission.
    pub m_rho: Complex64,
    pub omega_mu: Complex64,
    pub omega_nu: Complex64,
}

/// Density samples on a sorted grid with diagnostics and a mass audit.
#[derive(Debug, Clone)]
pub struct DensityGrid {
    pub xs: Vec<f64>,
    pub fs: Vec<f64>,
    pub xf_max: f64,
    pub diagnostics: Vec<PointDiagnostics>,
    /// Declared tolerance for the mass audit: trapezoid + tail corrections
    /// should reproduce mass 1 - (atom mass) within this.
    pub mass_tol: f64,
}

/// Evaluate the density on n equally spaced points of [lo, hi].
/// Per-point failures are marked in the diagnostics; the grid is still
/// returned.
pub fn density_grid(
    mu: &Measure,
    nu: &Measure,
    lo: f64,
    hi: f64,
    n: usize,
    ladder: &EpsLadder,
) -> Result<DensityGrid> {
    if !(lo > 0.0 && lo < hi && n >= 2) {
        return Err(Error::Domain(format!(
            "grid needs 0 < lo < hi and n >= 2, got ({lo}, {hi}, {n})"
        )));
    }
    let h = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|k| lo + h * k as f64).collect();
    let mut fs = Vec::with_capacity(n);
    let mut diagnostics = Vec::with_capacity(n);
    let mut xf_max: f64 = 0.0;
    let mut seed: Option<Complex64> = None;
    for &x in &xs {
        match boundary_state(mu, nu, x, ladder, seed) {
            Ok(st) => {
                seed = Some(st.omega_mu);
                let (d_mu, d_nu) = stability_check(&st, mu, nu);
                match density_from_state(&st, x) {
                    Ok(f) => {
                        xf_max = xf_max.max(x * f);
                        fs.push(f);
                        diagnostics.push(PointDiagnostics {
                            residual: st.residual,
                            d_mu,
                            d_nu,
                            failed: false,
                            m_rho: st.m_rho,
                            omega_mu: st.omega_mu,
                            omega_nu: st.omega_nu,
                        });
                    }
                    Err(_) => {
                        fs.push(f64::NAN);
                        diagnostics.push(PointDiagnostics {
                            residual: st.residual,
                            d_mu,
                            d_nu,
                            failed: true,
                            m_rho: st.m_rho,
                            omega_mu: st.omega_mu,
                            omega_nu: st.omega_nu,
                        });
                    }
                }
            }
            Err(_) => {
                fs.push(f64::NAN);
                diagnostics.push(PointDiagnostics {
                    residual: f64::INFINITY,
                    d_mu: f64::NAN,
                    d_nu: f64::NAN,
                    failed: true,
                    m_rho: Complex64::new(f64::NAN, f64::NAN),
                    omega_mu: Complex64::new(f64::NAN, f64::NAN),
                    omega_nu: Complex64::new(f64::NAN, f64::NAN),
                });
            }
        }
    }
    Ok(DensityGrid {
        xs,
        fs,
        xf_max,
        diagnostics,
        mass_tol: 1.0 / n as f64,
    })
}

impl DensityGrid {
    pub fn failed_points(&self) -> usize {
        self.diagnostics.iter().filter(|d| d.failed).count()
    }

    /// Trapezoid mass over the grid, skipping failed points.
    pub fn trapezoid_mass(&self) -> f64 {
        let mut acc = 0.0;
        for w in self.xs.windows(2).zip(self.fs.windows(2)) {
            let (xw, fw) = w;
            if fw[0].is_finite() && fw[1].is_finite() {
                acc += 0.5 * (fw[0] + fw[1]) * (xw[1] - xw[0]);
            }
        }
        acc
    }

    /// k-th raw moment of the grid density by the trapezoid rule.
    pub fn trapezoid_moment(&self, k: u32) -> f64 {
        let mut acc = 0.0;
        for w in self.xs.windows(2).zip(self.fs.windows(2)) {
            let (xw, fw) = w;
            if fw[0].is_finite() && fw[1].is_finite() {
                acc += 0.5 * (fw[0] * xw[0].powi(k as i32) + fw[1] * xw[1].powi(k as i32))
                    * (xw[1] - xw[0]);
            }
        }
        acc
    }
}

/// Fit f = c (x - s)^p (or c (s - x)^p at the upper end) through three
/// points and return the tail integral between the inferred endpoint s and
/// the outermost grid point. Used to repair the trapezoid mass when the
/// density has a power-law edge inside or just outside the grid window.
fn tail_correction(x: [f64; 3], f: [f64; 3], upper: bool) -> Option<f64> {
    if f.iter().any(|v| !(*v > 1e-10)) {
        return None; // end already vanishes; nothing to add
    }
    // orient so the edge lies left of x0
    let (xs, fs) = if upper {
        ([-x[0], -x[1], -x[2]], [f[0], f[1], f[2]])
    } else {
        (x, f)
    };
    // solve for s in: slope(log f vs log(x - s)) equal on both point pairs
    let g = |s: f64| -> f64 {
        let l = [
            (xs[0] - s).ln(),
            (xs[1] - s).ln(),
            (xs[2] - s).ln(),
        ];
        let lf = [fs[0].ln(), fs[1].ln(), fs[2].ln()];
        (lf[1] - lf[0]) / (l[1] - l[0]) - (lf[2] - lf[1]) / (l[2] - l[1])
    };
    let span = xs[2] - xs[0];
    let mut a = xs[0] - 20.0 * span;
    let mut b = xs[0] - 1e-9 * span;
    let (ga, gb) = (g(a), g(b));
    if !ga.is_finite() || !gb.is_finite() || ga * gb > 0.0 {
        return None;
    }
    for _ in 0..80 {
        let mid = 0.5 * (a + b);
        if g(mid) * g(a) <= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    let s = 0.5 * (a + b);
    let p = (fs[1].ln() - fs[0].ln()) / ((xs[1] - s).ln() - (xs[0] - s).ln());
    if !(p > -0.95 && p < 1.5) {
        return None;
    }
    let c = fs[0] / (xs[0] - s).powf(p);
    // integral of c (x - s)^p from s to x0
    let tail = c * (xs[0] - s).powf(p + 1.0) / (p + 1.0);
    tail.is_finite().then_some(tail)
}

/// Mass audit: trapezoid over the grid, power-law tail corrections at both
/// ends, plus the atom masses. Returns (mass, |mass - 1|).
pub fn mass_check(grid: &DensityGrid, atoms: &AtomReport) -> (f64, f64) {
    let mut mass = grid.trapezoid_mass() + atoms.total_mass();
    let n = grid.xs.len();
    if n >= 3 {
        let lo_id = [0, 1, 2];
        if lo_id.iter().all(|&i| grid.fs[i].is_finite()) {
            if let Some(t) = tail_correction(
                [grid.xs[0], grid.xs[1], grid.xs[2]],
                [grid.fs[0], grid.fs[1], grid.fs[2]],
                false,
            ) {
                mass += t;
            }
        }
        let hi_id = [n - 1, n - 2, n - 3];
        if hi_id.iter().all(|&i| grid.fs[i].is_finite()) {
            if let Some(t) = tail_correction(
                [grid.xs[n - 1], grid.xs[n - 2], grid.xs[n - 3]],
                [grid.fs[n - 1], grid.fs[n - 2], grid.fs[n - 3]],
                true,
            ) {
                mass += t;
            }
        }
    }
    (mass, (mass - 1.0).abs())
}

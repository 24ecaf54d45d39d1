//! Independent ground truth: closed-form densities of known convolutions,
//! moments of mu (x) nu through the multiplicativity of the S-transform,
//! and grid-versus-closed-form comparison.
//!
//! The moment route never touches the subordination solver: psi-series from
//! raw moments, compositional inversion, S = chi(w)(1+w)/w, multiply,
//! invert back. It is exact through the truncation order, so it serves as
//! the oracle for grid moments.

use crate::density::{AtomReport, DensityGrid};
use crate::error::{Error, Result};
use crate::measures::{Atom, Measure};
use crate::series::Series;

/// A closed-form reference law: density, atoms, support.
#[derive(Debug, Clone)]
pub struct ClosedForm {
    pub name: &'static str,
    pub support: (f64, f64),
    pub atoms: Vec<Atom>,
    density: fn(f64) -> f64,
}

impl ClosedForm {
    pub fn density(&self, x: f64) -> f64 {
        (self.density)(x)
    }

    /// Simpson mass of the density over its support plus atom mass.
    pub fn total_mass(&self, n: usize) -> f64 {
        let (lo, hi) = self.support;
        let n = if n % 2 == 0 { n } else { n + 1 };
        let h = (hi - lo) / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let x = lo + h * k as f64;
            let w = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * self.density(x);
        }
        acc * h / 3.0 + self.atoms.iter().map(|a| a.weight).sum::<f64>()
    }
}

/// Density of (delta_0/2 + delta_2/2) (x) (delta_0/2 + delta_2/2):
/// (1/2 pi) sqrt(1/(x(4-x))) on (0, 4), plus an atom (0, 1/2) reported in
/// the ClosedForm.
pub fn bernoulli_square_density(x: f64) -> f64 {
    if x <= 0.0 || x >= 4.0 {
        return 0.0;
    }
    (1.0 / (x * (4.0 - x))).sqrt() / (2.0 * std::f64::consts::PI)
}

pub fn bernoulli_square() -> ClosedForm {
    ClosedForm {
        name: "bernoulli_square",
        support: (0.0, 4.0),
        atoms: vec![Atom {
            location: 0.0,
            weight: 0.5,
        }],
        density: bernoulli_square_density,
    }
}

fn marchenko_pastur_density(x: f64) -> f64 {
    if x <= 0.0 || x >= 4.0 {
        return 0.0;
    }
    ((4.0 - x) / x).sqrt() / (2.0 * std::f64::consts::PI)
}

/// Density of the square of the free Poisson law (the law of X1 X2 X1* X2*
/// for Ginibre factors), supported on [0, 27/4]; moments are the
/// second-order Fuss-Catalan numbers 1, 3, 12, 55, ...
fn fuss_catalan_density(x: f64) -> f64 {
    if x <= 0.0 || x >= 6.75 {
        return 0.0;
    }
    let r = (81.0 - 12.0 * x).sqrt();
    let c = 27.0 + 3.0 * r;
    let cbrt2 = 2.0f64.cbrt();
    let pref = cbrt2 * 3.0f64.sqrt() / (12.0 * std::f64::consts::PI);
    pref * (cbrt2 * c.powf(2.0 / 3.0) - 6.0 * x.cbrt()) / (x.powf(2.0 / 3.0) * c.cbrt())
}

/// Closed-form densities by name.
pub fn table_density(name: &str, x: f64) -> Result<f64> {
    match name {
        "marchenko_pastur" => Ok(marchenko_pastur_density(x)),
        "fuss_catalan" => Ok(fuss_catalan_density(x)),
        other => Err(Error::Domain(format!("unknown table density '{other}'"))),
    }
}

pub fn table_closed_form(name: &str) -> Result<ClosedForm> {
    match name {
        "marchenko_pastur" => Ok(ClosedForm {
            name: "marchenko_pastur",
            support: (0.0, 4.0),
            atoms: vec![],
            density: marchenko_pastur_density,
        }),
        "fuss_catalan" => Ok(ClosedForm {
            name: "fuss_catalan",
            support: (0.0, 6.75),
            atoms: vec![],
            density: fuss_catalan_density,
        }),
        other => Err(Error::Domain(format!("unknown table density '{other}'"))),
    }
}

/// Moments m_1..m_{k_max} of mu (x) nu through S-transform
/// multiplicativity, by exact truncated series arithmetic.
pub fn s_series_moments(mu: &Measure, nu: &Measure, k_max: usize) -> Result<Vec<f64>> {
    if k_max > 6 {
        return Err(Error::Domain(format!(
            "s_series_moments supports k_max <= 6, got {k_max}"
        )));
    }
    if mu.mean() == 0.0 || nu.mean() == 0.0 {
        return Err(Error::Domain(
            "S-transform inversion needs nonzero means".into(),
        ));
    }
    let order = k_max + 2; // guard terms
    let psi_of = |m: &Measure| -> Result<Series> {
        let mut c = vec![0.0; order + 1];
        for (k, ck) in c.iter_mut().enumerate().skip(1) {
            *ck = m.moment(k)?;
        }
        Ok(Series::from_coeffs(c))
    };
    // S(w) = chi(w) (1+w)/w with chi the compositional inverse of psi;
    // written as sigma(w) = chi(w)/w to keep everything a power series
    let sigma_of = |m: &Measure| -> Result<Series> {
        let psi = psi_of(m)?;
        let chi = psi
            .inverse_composition()
            .ok_or_else(|| Error::Domain("psi series is not invertible".into()))?;
        let mut sig = Series::zero(order);
        for k in 1..=order {
            sig.c[k - 1] = chi.c[k];
        }
        Ok(sig)
    };
    let one_plus_w = |s: &Series| -> Series {
        let mut shifted = Series::zero(order);
        for k in 1..=order {
            shifted.c[k] = s.c[k - 1];
        }
        let mut out = s.clone();
        for k in 0..=order {
            out.c[k] += shifted.c[k];
        }
        out
    };

    let s_mu = one_plus_w(&sigma_of(mu)?);
    let s_nu = one_plus_w(&sigma_of(nu)?);
    let s_rho = s_mu.mul(&s_nu);

    // chi_rho(w) = S_rho(w) w/(1+w): divide by (1+w) then shift up by one
    let mut inv_one_plus = Series::zero(order);
    for (k, c) in inv_one_plus.c.iter_mut().enumerate() {
        *c = if k % 2 == 0 { 1.0 } else { -1.0 };
    }
    let quotient = s_rho.mul(&inv_one_plus);
    let mut chi_rho = Series::zero(order);
    for k in 1..=order {
        chi_rho.c[k] = quotient.c[k - 1];
    }
    let psi_rho = chi_rho
        .inverse_composition()
        .ok_or_else(|| Error::Domain("chi_rho series is not invertible".into()))?;
    Ok(psi_rho.c[1..=k_max].to_vec())
}

/// Pointwise comparison of a computed density grid against a closed form:
/// max relative error excluding points within `exclusion` of the oracle's
/// support edges, plus the mass defect of grid + oracle atoms against 1.
pub fn compare(grid: &DensityGrid, oracle: &ClosedForm, exclusion: f64) -> (f64, f64) {
    let (lo, hi) = oracle.support;
    let mut max_rel: f64 = 0.0;
    for (&x, &f) in grid.xs.iter().zip(&grid.fs) {
        if !f.is_finite() {
            continue;
        }
        if (x - lo).abs() < exclusion || (hi - x).abs() < exclusion {
            continue;
        }
        let want = oracle.density(x);
        if want.abs() < 1e-12 && f.abs() < 1e-12 {
            continue;
        }
        let rel = (f - want).abs() / want.abs().max(1e-12);
        max_rel = max_rel.max(rel);
    }
    let atoms = AtomReport {
        entries: oracle
            .atoms
            .iter()
            .map(|a| crate::density::AtomEntry {
                location: a.location,
                mass: a.weight,
                witness: None,
            })
            .collect(),
    };
    let (_, mass_err) = crate::density::mass_check(grid, &atoms);
    (max_rel, mass_err)
}

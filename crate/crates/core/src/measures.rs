//! Probability measures on [0, inf) represented as a finite list of atoms
//! plus Jacobi-type absolutely continuous components
//! C (x - lo)^{t_lo} (hi - x)^{t_hi} on [lo, hi].
//!
//! Measures are immutable after construction and all operations here are
//! pure, so values can be shared freely across threads.

use crate::error::{Error, Result};
use crate::quadrature::{jacobi_rule, JacobiRule};
use serde::Deserialize;
use statrs::function::gamma::ln_gamma;

const MASS_TOL: f64 = 1e-12;
const SPEC_MASS_TOL: f64 = 1e-9;

/// Point mass at `location` with mass `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Absolutely continuous piece with density
/// `norm_const * (x - lo)^{t_lo} * (hi - x)^{t_hi}` on [lo, hi],
/// integrating to `weight`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiComponent {
    pub lo: f64,
    pub hi: f64,
    pub t_lo: f64,
    pub t_hi: f64,
    pub weight: f64,
    pub norm_const: f64,
}

impl JacobiComponent {
    pub fn new(lo: f64, hi: f64, t_lo: f64, t_hi: f64, weight: f64) -> Result<Self> {
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::Domain(format!(
                "Jacobi support must satisfy 0 <= lo < hi < inf, got [{lo}, {hi}]"
            )));
        }
        if !(t_lo > -1.0 && t_lo < 1.0 && t_hi > -1.0 && t_hi < 1.0) {
            return Err(Error::Domain(format!(
                "Jacobi exponents must lie in (-1, 1), got ({t_lo}, {t_hi})"
            )));
        }
        if !(weight > 0.0 && weight <= 1.0 + MASS_TOL) {
            return Err(Error::Domain(format!(
                "component weight must lie in (0, 1], got {weight}"
            )));
        }
        // weight = C * (hi - lo)^{a+b+1} * B(a+1, b+1)
        let ln_beta = ln_gamma(t_lo + 1.0) + ln_gamma(t_hi + 1.0) - ln_gamma(t_lo + t_hi + 2.0);
        let norm_const =
            weight / ((t_lo + t_hi + 1.0) * (hi - lo).ln() + ln_beta).exp();
        Ok(Self {
            lo,
            hi,
            t_lo,
            t_hi,
            weight,
            norm_const,
        })
    }

    /// Density of the component at x (0 outside [lo, hi]).
    pub fn density(&self, x: f64) -> f64 {
        if x <= self.lo || x >= self.hi {
            return 0.0;
        }
        self.norm_const * (x - self.lo).powf(self.t_lo) * (self.hi - x).powf(self.t_hi)
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    /// Nodes in x-space and effective weights summing to `self.weight`,
    /// for an n-point Gauss-Jacobi rule against this component's density.
    pub fn mapped_rule(&self, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        // (x - lo)^{t_lo} pairs with (1 + s)^{beta}, (hi - x)^{t_hi} with (1 - s)^{alpha}
        let rule = jacobi_rule(n, self.t_hi, self.t_lo)?;
        let half = 0.5 * self.span();
        let nodes: Vec<f64> = rule.nodes.iter().map(|s| self.lo + half * (s + 1.0)).collect();
        let scale = self.weight / JacobiRule::mu0(self.t_hi, self.t_lo);
        let weights: Vec<f64> = rule.weights.iter().map(|w| w * scale).collect();
        Ok((nodes, weights))
    }
}

/// Probability measure on [0, inf): atoms plus Jacobi components,
/// total mass 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    atoms: Vec<Atom>,
    components: Vec<JacobiComponent>,
    mean: f64,
    variance: f64,
}

impl Measure {
    pub fn from_parts(atoms: Vec<Atom>, components: Vec<JacobiComponent>) -> Result<Self> {
        for a in &atoms {
            if !(a.location >= 0.0 && a.location.is_finite()) {
                return Err(Error::Domain(format!(
                    "atom location must be a finite nonnegative real, got {}",
                    a.location
                )));
            }
            if !(a.weight > 0.0 && a.weight <= 1.0 + MASS_TOL) {
                return Err(Error::Domain(format!(
                    "atom weight must lie in (0, 1], got {}",
                    a.weight
                )));
            }
        }
        for i in 0..atoms.len() {
            for j in i + 1..atoms.len() {
                if atoms[i].location == atoms[j].location {
                    return Err(Error::Domain(format!(
                        "atom locations must be pairwise distinct, {} repeats",
                        atoms[i].location
                    )));
                }
            }
        }
        let mass: f64 = atoms.iter().map(|a| a.weight).sum::<f64>()
            + components.iter().map(|c| c.weight).sum::<f64>();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!(
                "total mass must be 1 within {MASS_TOL}, got {mass}"
            )));
        }
        let mut atoms = atoms;
        atoms.sort_by(|a, b| a.location.partial_cmp(&b.location).unwrap());
        let mut m = Self {
            atoms,
            components,
            mean: 0.0,
            variance: 0.0,
        };
        m.mean = m.moment(1)?;
        m.variance = m.moment(2)? - m.mean * m.mean;
        Ok(m)
    }

    /// Unit-mass Jacobi measure with density C (x-lo)^{t_lo} (hi-x)^{t_hi}.
    pub fn jacobi(lo: f64, hi: f64, t_lo: f64, t_hi: f64) -> Result<Self> {
        Self::from_parts(vec![], vec![JacobiComponent::new(lo, hi, t_lo, t_hi, 1.0)?])
    }

    pub fn point_mass(location: f64) -> Result<Self> {
        Self::from_parts(
            vec![Atom {
                location,
                weight: 1.0,
            }],
            vec![],
        )
    }

    /// The Marchenko-Pastur law: density (1/2 pi) sqrt((4-x)/x) on [0, 4].
    pub fn marchenko_pastur() -> Self {
        Self::jacobi(0.0, 4.0, -0.5, 0.5).expect("static parameters")
    }

    /// The symmetric Bernoulli law on {0, 2}: delta_0/2 + delta_2/2.
    pub fn bernoulli() -> Self {
        Self::from_parts(
            vec![
                Atom {
                    location: 0.0,
                    weight: 0.5,
                },
                Atom {
                    location: 2.0,
                    weight: 0.5,
                },
            ],
            vec![],
        )
        .expect("static parameters")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn components(&self) -> &[JacobiComponent] {
        &self.components
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    /// Mass of the atom at 0 (0 when absent).
    pub fn mass_at_zero(&self) -> f64 {
        self.atoms
            .iter()
            .find(|a| a.location == 0.0)
            .map_or(0.0, |a| a.weight)
    }

    pub fn is_point_mass(&self) -> bool {
        self.components.is_empty() && self.atoms.len() == 1
    }

    pub fn is_atomic(&self) -> bool {
        self.components.is_empty()
    }

    /// k-th raw moment, exact for atoms and Gauss-Jacobi-exact for
    /// components (the integrand is a polynomial against the Jacobi weight).
    pub fn moment(&self, k: usize) -> Result<f64> {
        let mut acc: f64 = self
            .atoms
            .iter()
            .map(|a| a.weight * a.location.powi(k as i32))
            .sum();
        let n = (k / 2 + 2).max(4);
        for c in &self.components {
            let (xs, ws) = c.mapped_rule(n)?;
            acc += xs
                .iter()
                .zip(&ws)
                .map(|(x, w)| w * x.powi(k as i32))
                .sum::<f64>();
        }
        Ok(acc)
    }

    /// Mean, variance and raw moments 1..=6.
    pub fn stats(&self) -> Result<MeasureStats> {
        let mut moments = [0.0f64; 6];
        for (k, m) in moments.iter_mut().enumerate() {
            *m = self.moment(k + 1)?;
        }
        Ok(MeasureStats {
            mean: self.mean,
            variance: self.variance,
            moments,
        })
    }

    /// Pushforward under x -> a x.
    pub fn dilate(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("dilation factor must be > 0, got {a}")));
        }
        let atoms = self
            .atoms
            .iter()
            .map(|at| Atom {
                location: a * at.location,
                weight: at.weight,
            })
            .collect();
        let components = self
            .components
            .iter()
            .map(|c| JacobiComponent::new(a * c.lo, a * c.hi, c.t_lo, c.t_hi, c.weight))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(atoms, components)
    }

    /// Density of the absolutely continuous part at x.
    pub fn density(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.density(x)).sum()
    }

    /// Support as a union of closed intervals (atoms are degenerate ones),
    /// sorted by left endpoint.
    pub fn support_intervals(&self) -> Vec<(f64, f64)> {
        let mut iv: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.location, a.location))
            .chain(self.components.iter().map(|c| (c.lo, c.hi)))
            .collect();
        iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        iv
    }

    /// Distance from a complex point to the support.
    pub fn support_distance(&self, z: num_complex::Complex64) -> f64 {
        self.support_intervals()
            .iter()
            .map(|&(lo, hi)| {
                let dx = if z.re < lo {
                    lo - z.re
                } else if z.re > hi {
                    z.re - hi
                } else {
                    0.0
                };
                dx.hypot(z.im)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn support_min(&self) -> f64 {
        self.support_intervals()
            .first()
            .map_or(f64::INFINITY, |iv| iv.0)
    }

    pub fn support_max(&self) -> f64 {
        self.support_intervals()
            .iter()
            .map(|iv| iv.1)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Structured validation report; never fails.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let mass: f64 = self.atoms.iter().map(|a| a.weight).sum::<f64>()
            + self.components.iter().map(|c| c.weight).sum::<f64>();
        if (mass - 1.0).abs() > MASS_TOL {
            violations.push(format!("total mass {mass} differs from 1 beyond {MASS_TOL}"));
        }
        for w in self.atoms.windows(2) {
            if w[0].location == w[1].location {
                violations.push(format!("repeated atom location {}", w[0].location));
            }
        }
        for c in &self.components {
            if !(c.t_lo > -1.0 && c.t_lo < 1.0 && c.t_hi > -1.0 && c.t_hi < 1.0) {
                violations.push(format!(
                    "component exponents ({}, {}) outside (-1, 1)",
                    c.t_lo, c.t_hi
                ));
            }
            if c.lo < 0.0 {
                violations.push(format!("component support starts at {} < 0", c.lo));
            }
        }
        for a in &self.atoms {
            if a.location < 0.0 {
                violations.push(format!("atom at {} < 0", a.location));
            }
        }
        let edge_machinery = violations.is_empty()
            && self.atoms.is_empty()
            && self.components.len() == 1
            && self.components[0].lo > 0.0
            && (self.mean - 1.0).abs() <= 1e-9;
        // single component strictly inside (0, inf), no atoms, mean 1;
        // callers may rescale the mean, the rest is structural
        let edge_machinery_up_to_dilation = violations.is_empty()
            && self.atoms.is_empty()
            && self.components.len() == 1
            && self.components[0].lo > 0.0;
        ValidationReport {
            violations,
            edge_machinery,
            edge_machinery_up_to_dilation,
        }
    }

    /// Parse the JSON measure spec:
    /// `{ "atoms": [{"x":.., "w":..}], "jacobi": [{"lo":..,"hi":..,"t_lo":..,"t_hi":..,"weight":..}] }`.
    /// Weights must sum to 1 within 1e-9, then the measure is renormalized
    /// to machine-exact unit mass.
    pub fn from_json_str(s: &str) -> Result<Self> {
        let spec: MeasureSpec = serde_json::from_str(s)?;
        let raw_mass: f64 = spec.atoms.iter().map(|a| a.w).sum::<f64>()
            + spec.jacobi.iter().map(|c| c.weight).sum::<f64>();
        if (raw_mass - 1.0).abs() > SPEC_MASS_TOL {
            return Err(Error::Spec(format!(
                "weights sum to {raw_mass}, must be 1 within {SPEC_MASS_TOL}"
            )));
        }
        let atoms = spec
            .atoms
            .iter()
            .map(|a| Atom {
                location: a.x,
                weight: a.w / raw_mass,
            })
            .collect();
        let components = spec
            .jacobi
            .iter()
            .map(|c| JacobiComponent::new(c.lo, c.hi, c.t_lo, c.t_hi, c.weight / raw_mass))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(atoms, components).map_err(|e| Error::Spec(e.to_string()))
    }

    pub fn from_spec_path(path: &std::path::Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json_str(&s)
    }
}

/// make_jacobi of the library surface: unit-mass canonical Jacobi measure.
pub fn make_jacobi(lo: f64, hi: f64, t_lo: f64, t_hi: f64) -> Result<Measure> {
    Measure::jacobi(lo, hi, t_lo, t_hi)
}

#[derive(Debug, Clone, Copy)]
pub struct MeasureStats {
    pub mean: f64,
    pub variance: f64,
    /// Raw moments m_1..m_6.
    pub moments: [f64; 6],
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    /// Measure satisfies the edge-machinery assumptions as given
    /// (no atoms, single component, support in (0, inf), mean 1).
    pub edge_machinery: bool,
    /// Same but ignoring the mean, which the pipeline can fix by dilation.
    pub edge_machinery_up_to_dilation: bool,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Deserialize)]
struct MeasureSpec {
    #[serde(default)]
    atoms: Vec<AtomSpec>,
    #[serde(default)]
    jacobi: Vec<JacobiSpec>,
}

#[derive(Deserialize)]
struct AtomSpec {
    x: f64,
    w: f64,
}

#[derive(Deserialize)]
struct JacobiSpec {
    lo: f64,
    hi: f64,
    t_lo: f64,
    t_hi: f64,
    weight: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn marchenko_pastur_normalization() {
        // (0, 4, -1/2, 1/2) is the MP density (1/2 pi) sqrt((4-x)/x)
        let mp = Measure::marchenko_pastur();
        let c = mp.components()[0];
        assert_relative_eq!(c.norm_const, 1.0 / (2.0 * std::f64::consts::PI), epsilon = 1e-14);
        assert_relative_eq!(c.density(2.0), 1.0 / (2.0 * std::f64::consts::PI), epsilon = 1e-14);
    }

    #[test]
    fn uniform_and_arcsine_normalization() {
        let u = Measure::jacobi(1.0, 3.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(u.density(2.0), 0.5, epsilon = 1e-14);
        let a = Measure::jacobi(1.0, 3.0, -0.5, -0.5).unwrap();
        // C = 1/pi for the unit arcsine shape on a width-2 interval
        assert_relative_eq!(a.components()[0].norm_const, 1.0 / std::f64::consts::PI, epsilon = 1e-14);
    }

    #[test]
    fn point_mass_and_bernoulli_stats() {
        let d1 = Measure::point_mass(1.0).unwrap();
        assert_abs_diff_eq!(d1.mean(), 1.0);
        assert_abs_diff_eq!(d1.variance(), 0.0);
        let b = Measure::bernoulli();
        assert_abs_diff_eq!(b.mean(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.variance(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn marchenko_pastur_moments_are_catalan() {
        let mp = Measure::marchenko_pastur();
        let s = mp.stats().unwrap();
        assert_relative_eq!(s.mean, 1.0, epsilon = 1e-13);
        assert_relative_eq!(s.variance, 1.0, epsilon = 1e-12);
        // Catalan numbers 1, 2, 5, 14, 42, 132
        for (k, cat) in [1.0, 2.0, 5.0, 14.0, 42.0, 132.0].iter().enumerate() {
            assert_relative_eq!(s.moments[k], cat, max_relative = 1e-12);
        }
    }

    #[test]
    fn dilate_scales_moments() {
        let m = Measure::jacobi(1.0, 3.0, -0.5, 0.5).unwrap();
        let d = m.dilate(2.5).unwrap();
        for k in 1..=6usize {
            let a = d.moment(k).unwrap();
            let b = 2.5f64.powi(k as i32) * m.moment(k).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-10);
        }
        let dd = Measure::point_mass(1.0).unwrap().dilate(3.0).unwrap();
        assert_eq!(dd.atoms()[0].location, 3.0);
    }

    #[test]
    fn component_quadrature_mass_matches_weight() {
        let m = Measure::jacobi(0.5, 2.0, -0.3, 0.8).unwrap();
        let (_, ws) = m.components()[0].mapped_rule(24).unwrap();
        assert_abs_diff_eq!(ws.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn validate_flags() {
        let b = Measure::bernoulli();
        let r = b.validate();
        assert!(r.is_valid());
        assert!(!r.edge_machinery);

        let j = Measure::jacobi(1.0, 3.0, -0.5, 0.5).unwrap();
        let r = j.validate();
        assert!(r.is_valid());
        // mean is 1.5, so the strict flag is off but the structural one holds
        assert!(!r.edge_machinery);
        assert!(r.edge_machinery_up_to_dilation);

        let rescaled = j.dilate(1.0 / j.mean()).unwrap();
        assert!(rescaled.validate().edge_machinery);
    }

    #[test]
    fn mass_violation_rejected() {
        let err = Measure::from_parts(
            vec![
                Atom { location: 0.0, weight: 0.5 },
                Atom { location: 2.0, weight: 0.4 },
            ],
            vec![],
        );
        assert!(err.is_err());
    }

    #[test]
    fn json_spec_roundtrip_and_rejection() {
        let m = Measure::from_json_str(
            r#"{ "atoms": [{"x": 0.0, "w": 0.5}], "jacobi": [{"lo": 1.0, "hi": 3.0, "t_lo": 0.0, "t_hi": 0.0, "weight": 0.5}] }"#,
        )
        .unwrap();
        assert_eq!(m.atoms().len(), 1);
        assert_eq!(m.components().len(), 1);

        let bad = Measure::from_json_str(r#"{ "atoms": [{"x": 0.0, "w": 0.9}] }"#);
        assert!(bad.is_err());
    }

    #[test]
    fn bad_jacobi_parameters_rejected() {
        assert!(Measure::jacobi(3.0, 1.0, 0.0, 0.0).is_err());
        assert!(Measure::jacobi(1.0, 3.0, -1.0, 0.0).is_err());
        assert!(Measure::jacobi(1.0, 3.0, 0.0, 1.0).is_err());
    }
}

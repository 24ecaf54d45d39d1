//! Truncated formal power series with f64 coefficients, just enough for the
//! S-transform moment pipeline: products, composition and compositional
//! inversion of series with vanishing constant term.

/// Coefficients c[k] of z^k, truncated at a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub c: Vec<f64>,
}

impl Series {
    pub fn zero(order: usize) -> Self {
        Self {
            c: vec![0.0; order + 1],
        }
    }

    pub fn from_coeffs(c: Vec<f64>) -> Self {
        Self { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.order().min(other.order());
        let mut out = Self::zero(n);
        for i in 0..=n {
            for j in 0..=(n - i) {
                out.c[i + j] += self.c[i] * other.c[j];
            }
        }
        out
    }

    /// Compose self(other(z)); requires other(0) = 0.
    pub fn compose(&self, other: &Self) -> Self {
        debug_assert!(other.c[0] == 0.0, "composition needs vanishing constant term");
        let n = self.order().min(other.order());
        let mut out = Self::zero(n);
        out.c[0] = self.c[0];
        let mut pow = Series::zero(n);
        pow.c[0] = 1.0;
        for k in 1..=n {
            pow = pow.mul(other);
            for i in 0..=n {
                out.c[i] += self.c[k] * pow.c[i];
            }
        }
        out
    }

    /// Compositional inverse of a(z) = a1 z + ... with a1 != 0:
    /// returns b with a(b(w)) = w up to the truncation order.
    pub fn inverse_composition(&self) -> Option<Self> {
        let n = self.order();
        if self.c[0] != 0.0 || self.c.len() < 2 || self.c[1] == 0.0 {
            return None;
        }
        let a1 = self.c[1];
        let mut b = Series::zero(n);
        b.c[1] = 1.0 / a1;
        for k in 2..=n {
            // with b fixed through order k-1 and b_k still zero, the z^k
            // coefficient of a(b) misses exactly a1 * b_k
            let trial = self.compose(&b);
            b.c[k] = -trial.c[k] / a1;
        }
        Some(b)
    }

    pub fn eval(&self, z: f64) -> f64 {
        self.c.iter().rev().fold(0.0, |acc, &ck| acc * z + ck)
    }
}

use serde::{Deserialize, Serialize};

use crate::spacetime::{FourVector, METRIC};

/// Quadratic gauge function `Λ(x) = c + b_μ x^μ + x^μ Q_{μν} x^ν`, `Q` symmetric.
///
/// The coefficients multiply contravariant coordinates, so `b` and `Q`
/// carry lower indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeFunction {
    pub constant: f64,
    pub linear: [f64; 4],
    pub quadratic: [[f64; 4]; 4],
}

impl GaugeFunction {
    pub fn zero() -> Self {
        Self {
            constant: 0.0,
            linear: [0.0; 4],
            quadratic: [[0.0; 4]; 4],
        }
    }

    pub fn linear(b: [f64; 4]) -> Self {
        Self {
            linear: b,
            ..Self::zero()
        }
    }

    /// Symmetrizes `q` on construction.
    pub fn quadratic(constant: f64, b: [f64; 4], q: [[f64; 4]; 4]) -> Self {
        let sym = std::array::from_fn(|m| std::array::from_fn(|n| 0.5 * (q[m][n] + q[n][m])));
        Self {
            constant,
            linear: b,
            quadratic: sym,
        }
    }

    pub fn value(&self, x: &FourVector) -> f64 {
        let mut v = self.constant;
        for m in 0..4 {
            v += self.linear[m] * x.0[m];
            for n in 0..4 {
                v += x.0[m] * self.quadratic[m][n] * x.0[n];
            }
        }
        v
    }

    /// `∂_μΛ` (lower index).
    pub fn gradient(&self, x: &FourVector) -> [f64; 4] {
        std::array::from_fn(|m| {
            self.linear[m] + 2.0 * (0..4).map(|n| self.quadratic[m][n] * x.0[n]).sum::<f64>()
        })
    }

    /// `∂^μΛ` (upper index).
    pub fn gradient_upper(&self, x: &FourVector) -> FourVector {
        let g = self.gradient(x);
        FourVector(std::array::from_fn(|m| METRIC[m] * g[m]))
    }

    /// `∂_μ∂_νΛ`, constant.
    pub fn hessian(&self) -> [[f64; 4]; 4] {
        self.quadratic.map(|row| row.map(|q| 2.0 * q))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let g = GaugeFunction::quadratic(
            0.3,
            [0.1, -0.4, 0.2, 0.7],
            [
                [0.2, 0.1, 0.0, -0.3],
                [0.0, -0.5, 0.4, 0.0],
                [0.3, 0.0, 0.1, 0.2],
                [0.0, 0.1, 0.0, 0.6],
            ],
        );
        let x = FourVector([0.4, -1.1, 0.7, 2.0]);
        let grad = g.gradient(&x);
        let h = 1e-5;
        for m in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp.0[m] += h;
            xm.0[m] -= h;
            let fd = (g.value(&xp) - g.value(&xm)) / (2.0 * h);
            assert!((fd - grad[m]).abs() < 1e-8, "{m}: {fd} vs {}", grad[m]);
        }
    }
}

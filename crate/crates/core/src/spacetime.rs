//! Minkowski vector algebra with metric `g = diag(+1, -1, -1, -1)`.
//!
//! Components are stored contravariantly. Lowering an index only flips the
//! sign of the spatial components, so it is done eagerly where needed instead
//! of carrying index positions in the type system.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Diagonal of the metric.
pub const METRIC: [f64; 4] = [1.0, -1.0, -1.0, -1.0];

/// A real four-vector `(c0, c1, c2, c3)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FourVector(pub [f64; 4]);

impl FourVector {
    pub const ZERO: FourVector = FourVector([0.0; 4]);

    /// Checked constructor; rejects NaN and infinite components.
    pub fn new(c0: f64, c1: f64, c2: f64, c3: f64) -> Result<Self> {
        let v = FourVector([c0, c1, c2, c3]);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("{:?}", v.0)))
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    /// Same vector with the index lowered.
    pub fn lower(&self) -> FourVector {
        let mut out = *self;
        for mu in 0..4 {
            out.0[mu] *= METRIC[mu];
        }
        out
    }

    pub fn dot(&self, other: &FourVector) -> f64 {
        minkowski_dot(self, other)
    }

    pub fn norm_sqr(&self) -> f64 {
        minkowski_dot(self, self)
    }

    pub fn scale(&self, s: f64) -> FourVector {
        FourVector(self.0.map(|c| c * s))
    }

    pub fn to_complex(&self) -> ComplexFourVector {
        ComplexFourVector {
            re: *self,
            im: FourVector::ZERO,
        }
    }
}

impl Index<usize> for FourVector {
    type Output = f64;
    fn index(&self, mu: usize) -> &f64 {
        &self.0[mu]
    }
}

impl IndexMut<usize> for FourVector {
    fn index_mut(&mut self, mu: usize) -> &mut f64 {
        &mut self.0[mu]
    }
}

impl Add for FourVector {
    type Output = FourVector;
    fn add(self, rhs: FourVector) -> FourVector {
        FourVector(std::array::from_fn(|mu| self.0[mu] + rhs.0[mu]))
    }
}

impl Sub for FourVector {
    type Output = FourVector;
    fn sub(self, rhs: FourVector) -> FourVector {
        FourVector(std::array::from_fn(|mu| self.0[mu] - rhs.0[mu]))
    }
}

impl Neg for FourVector {
    type Output = FourVector;
    fn neg(self) -> FourVector {
        self.scale(-1.0)
    }
}

impl Mul<f64> for FourVector {
    type Output = FourVector;
    fn mul(self, s: f64) -> FourVector {
        self.scale(s)
    }
}

/// `a⁰b⁰ − a¹b¹ − a²b² − a³b³`.
pub fn minkowski_dot(a: &FourVector, b: &FourVector) -> f64 {
    a.0[0] * b.0[0] - a.0[1] * b.0[1] - a.0[2] * b.0[2] - a.0[3] * b.0[3]
}

/// A complex four-vector `re + i·im`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComplexFourVector {
    pub re: FourVector,
    pub im: FourVector,
}

impl ComplexFourVector {
    pub const ZERO: ComplexFourVector = ComplexFourVector {
        re: FourVector::ZERO,
        im: FourVector::ZERO,
    };

    pub fn new(re: FourVector, im: FourVector) -> Self {
        Self { re, im }
    }

    pub fn from_components(c: [Complex64; 4]) -> Self {
        Self {
            re: FourVector(c.map(|z| z.re)),
            im: FourVector(c.map(|z| z.im)),
        }
    }

    pub fn component(&self, mu: usize) -> Complex64 {
        Complex64::new(self.re.0[mu], self.im.0[mu])
    }

    pub fn components(&self) -> [Complex64; 4] {
        std::array::from_fn(|mu| self.component(mu))
    }

    pub fn conj(&self) -> Self {
        Self {
            re: self.re,
            im: -self.im,
        }
    }

    pub fn lower(&self) -> Self {
        Self {
            re: self.re.lower(),
            im: self.im.lower(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::from_components(self.components().map(|z| z * s))
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    /// Largest component modulus.
    pub fn max_abs(&self) -> f64 {
        self.components()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

impl Add for ComplexFourVector {
    type Output = ComplexFourVector;
    fn add(self, rhs: Self) -> Self {
        Self {
            re: self.re + rhs.re,
            im: self.im + rhs.im,
        }
    }
}

impl Sub for ComplexFourVector {
    type Output = ComplexFourVector;
    fn sub(self, rhs: Self) -> Self {
        Self {
            re: self.re - rhs.re,
            im: self.im - rhs.im,
        }
    }
}

/// Bilinear (not sesquilinear) extension of [`minkowski_dot`]. Callers
/// wanting `𝒱*_μ𝒱^μ` pass `a.conj()` as the first argument.
pub fn complex_minkowski_dot(a: &ComplexFourVector, b: &ComplexFourVector) -> Complex64 {
    (0..4)
        .map(|mu| METRIC[mu] * a.component(mu) * b.component(mu))
        .sum()
}

/// Antisymmetric tensor `F^{μν}`, both indices up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldTensor([[f64; 4]; 4]);

impl FieldTensor {
    pub const ZERO: FieldTensor = FieldTensor([[0.0; 4]; 4]);

    /// Builds `F` from its six upper-triangle entries `F^{μν}, μ < ν`
    /// ordered (01, 02, 03, 12, 13, 23).
    pub fn from_upper(upper: [f64; 6]) -> Self {
        let mut m = [[0.0; 4]; 4];
        let mut k = 0;
        for mu in 0..4 {
            for nu in (mu + 1)..4 {
                m[mu][nu] = upper[k];
                m[nu][mu] = -upper[k];
                k += 1;
            }
        }
        FieldTensor(m)
    }

    /// Antisymmetrizes an arbitrary matrix: `F = M − Mᵀ`.
    pub fn from_antisymmetric_part(m: [[f64; 4]; 4]) -> Self {
        FieldTensor(std::array::from_fn(|mu| {
            std::array::from_fn(|nu| m[mu][nu] - m[nu][mu])
        }))
    }

    /// `F^{μν} = k^μ a^ν − k^ν a^μ`.
    pub fn wedge(k: &FourVector, a: &FourVector) -> Self {
        FieldTensor(std::array::from_fn(|mu| {
            std::array::from_fn(|nu| k.0[mu] * a.0[nu] - k.0[nu] * a.0[mu])
        }))
    }

    pub fn get(&self, mu: usize, nu: usize) -> f64 {
        self.0[mu][nu]
    }

    pub fn matrix(&self) -> &[[f64; 4]; 4] {
        &self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        FieldTensor(self.0.map(|row| row.map(|v| v * s)))
    }

    pub fn is_antisymmetric(&self) -> bool {
        (0..4).all(|mu| (0..4).all(|nu| self.0[mu][nu] == -self.0[nu][mu]))
    }
}

/// `−e · v_ν F^{μν}`, index lowered with the metric.
pub fn lorentz_force(f: &FieldTensor, v: &ComplexFourVector, e: f64) -> ComplexFourVector {
    let v_low = v.lower().components();
    let out: [Complex64; 4] = std::array::from_fn(|mu| {
        let s: Complex64 = (0..4).map(|nu| v_low[nu] * f.0[mu][nu]).sum();
        -e * s
    });
    ComplexFourVector::from_components(out)
}

/// Physical constants. `lambda = sqrt(hbar/m0)` is derived, never supplied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    hbar: f64,
    m0: f64,
    e: f64,
    c: f64,
    mu0: f64,
    lambda: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, m0: f64, e: f64, c: f64, mu0: f64) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("m0", m0), ("c", c), ("mu0", mu0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConstant(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        // The charge may be zero (uncharged control runs) but not negative.
        if !(e.is_finite() && e >= 0.0) {
            return Err(Error::InvalidConstant(format!(
                "e must be non-negative, got {e}"
            )));
        }
        Ok(Self {
            hbar,
            m0,
            e,
            c,
            mu0,
            lambda: (hbar / m0).sqrt(),
        })
    }

    /// `ħ = c = m0 = 1`, `μ0 = 1`, with the given charge.
    pub fn natural(e: f64) -> Self {
        Self::new(1.0, 1.0, e, 1.0, 1.0).expect("natural units are valid")
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }
    pub fn m0(&self) -> f64 {
        self.m0
    }
    pub fn e(&self) -> f64 {
        self.e
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn mu0(&self) -> f64 {
        self.mu0
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn lambda_sq(&self) -> f64 {
        self.lambda * self.lambda
    }

    /// Copy with a different charge.
    pub fn with_charge(&self, e: f64) -> Result<Self> {
        Self::new(self.hbar, self.m0, e, self.c, self.mu0)
    }

    /// `m0² c²`, the on-shell value of `p·p`.
    pub fn mass_shell(&self) -> f64 {
        self.m0 * self.m0 * self.c * self.c
    }

    /// On-shell four-momentum with the given spatial part.
    pub fn on_shell(&self, spatial: [f64; 3]) -> FourVector {
        let p3 = spatial[0].powi(2) + spatial[1].powi(2) + spatial[2].powi(2);
        FourVector([
            (self.mass_shell() + p3).sqrt(),
            spatial[0],
            spatial[1],
            spatial[2],
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(c: [f64; 4]) -> FourVector {
        FourVector(c)
    }

    #[test]
    fn metric_signature() {
        assert_eq!(
            minkowski_dot(&fv([1., 0., 0., 0.]), &fv([1., 0., 0., 0.])),
            1.0
        );
        assert_eq!(
            minkowski_dot(&fv([0., 1., 0., 0.]), &fv([0., 1., 0., 0.])),
            -1.0
        );
        assert_eq!(
            minkowski_dot(&fv([1., 1., 0., 0.]), &fv([1., 1., 0., 0.])),
            0.0
        );
    }

    #[test]
    fn rejects_non_finite() {
        assert!(FourVector::new(f64::NAN, 0., 0., 0.).is_err());
        assert!(FourVector::new(0., f64::INFINITY, 0., 0.).is_err());
        assert!(FourVector::new(0., 1., 2., 3.).is_ok());
    }

    #[test]
    fn complex_dot_cases() {
        let real = fv([1., 0., 0., 0.]).to_complex();
        assert_eq!(
            complex_minkowski_dot(&real, &real),
            Complex64::new(1.0, 0.0)
        );

        let imag = ComplexFourVector::new(FourVector::ZERO, fv([1., 0., 0., 0.]));
        assert_eq!(
            complex_minkowski_dot(&imag.conj(), &imag),
            Complex64::new(1.0, 0.0)
        );

        // Hand expansion of the eight real products for (1,0,0,0) + i(0,1,0,0).
        let a = ComplexFourVector::new(fv([1., 0., 0., 0.]), fv([0., 1., 0., 0.]));
        let ac = a.conj();
        let mut re = 0.0;
        let mut im = 0.0;
        for mu in 0..4 {
            let g = METRIC[mu];
            re += g * (ac.re.0[mu] * a.re.0[mu] - ac.im.0[mu] * a.im.0[mu]);
            im += g * (ac.re.0[mu] * a.im.0[mu] + ac.im.0[mu] * a.re.0[mu]);
        }
        // |a⁰|² − |a¹|² = 0; the value 2 only arises without the conjugation.
        assert_eq!((re, im), (0.0, 0.0));
        assert_eq!(complex_minkowski_dot(&ac, &a), Complex64::new(0.0, 0.0));
        assert_eq!(complex_minkowski_dot(&a, &a), Complex64::new(2.0, 0.0));
    }

    #[test]
    fn lorentz_force_cases() {
        let v = fv([1., 0., 0., 0.]).to_complex();
        assert_eq!(
            lorentz_force(&FieldTensor::ZERO, &v, 1.0),
            ComplexFourVector::ZERO
        );

        let e_field = 0.7;
        let charge = 1.3;
        let f = FieldTensor::from_upper([e_field, 0., 0., 0., 0., 0.]);
        let out = lorentz_force(&f, &v, charge);

        // naive double loop with explicit metric
        let mut naive = [0.0; 4];
        for mu in 0..4 {
            for nu in 0..4 {
                naive[mu] += -charge * METRIC[nu] * v.re.0[nu] * f.get(mu, nu);
            }
        }
        assert_eq!(out.re.0, naive);
        assert!((out.re.0[1] - charge * e_field).abs() < 1e-15);
    }

    #[test]
    fn force_orthogonal_to_real_velocity() {
        let f = FieldTensor::from_upper([0.3, -1.2, 0.5, 2.0, 0.1, -0.7]);
        let v = fv([1.4, 0.2, -0.3, 0.9]).to_complex();
        let force = lorentz_force(&f, &v, 1.0);
        let w = complex_minkowski_dot(&v, &force);
        assert!(w.norm() < 1e-14);
    }

    #[test]
    fn constants_enforce_lambda() {
        let c = PhysicalConstants::new(2.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        assert!((c.lambda_sq() - 4.0).abs() < 1e-15);
        assert!(PhysicalConstants::new(-1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        let p = c.on_shell([0.3, 0.0, -0.4]);
        assert!((p.norm_sqr() - c.mass_shell()).abs() < 1e-12);
    }

    fn arb_vec() -> impl Strategy<Value = FourVector> {
        prop::array::uniform4(-10.0f64..10.0).prop_map(FourVector)
    }

    fn arb_cvec() -> impl Strategy<Value = ComplexFourVector> {
        (arb_vec(), arb_vec()).prop_map(|(re, im)| ComplexFourVector::new(re, im))
    }

    proptest! {
        #[test]
        fn dot_symmetric_bilinear(a in arb_vec(), b in arb_vec(), c in arb_vec(), s in -5.0f64..5.0) {
            prop_assert_eq!(minkowski_dot(&a, &b), minkowski_dot(&b, &a));
            let lhs = minkowski_dot(&(a.scale(s) + c), &b);
            let rhs = s * minkowski_dot(&a, &b) + minkowski_dot(&c, &b);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn conj_involution_and_distribution(a in arb_cvec(), b in arb_cvec()) {
            prop_assert_eq!(a.conj().conj(), a);
            let lhs = complex_minkowski_dot(&a, &b).conj();
            let rhs = complex_minkowski_dot(&a.conj(), &b.conj());
            prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        }

        #[test]
        fn from_upper_is_antisymmetric(u in prop::array::uniform6(-3.0f64..3.0)) {
            prop_assert!(FieldTensor::from_upper(u).is_antisymmetric());
        }
    }
}

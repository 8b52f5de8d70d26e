//! One-dimensional polynomial-times-Gaussian factors and their closed-form
//! Gaussian integrals.
//!
//! A factor is `g(u) = p(u)·exp(−a u²/2 + b u)` with complex coefficients.
//! Smoothing against the kernel `K_v(u − r) = (2πv)^{−1/2} exp(−(u − r)²/(2v))`
//! is parameterized by a complex variance `v`:
//!
//! * `v = s²/λ` for real `λ > 0` is an ordinary Gaussian expectation,
//! * `v = i·s²/q` is the Fresnel kernel obtained at `λ = −iq`,
//! * `v = 0` is the identity.
//!
//! With `w = 1 + a v` the result is again a factor:
//!
//! ```text
//! a' = a / w,   b' = b / w,
//! p'(r) = w^{-1/2} · exp(b² v / (2w)) · E[p(M(r) + W)],
//! M(r) = (r + b v) / w,   W ~ N(0, v / w),
//! ```
//!
//! where the Gaussian moments are continued analytically to complex mean
//! and variance. Composition adds variances, which is what makes the
//! transform semigroups work.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest polynomial degree accepted in a factor.
pub const MAX_DEGREE: usize = 16;

const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// `p(u)·exp(−a u²/2 + b u)`, polynomial coefficients in ascending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussPoly {
    pub poly: Vec<Complex64>,
    pub a: Complex64,
    #[serde(default)]
    pub b: Complex64,
}

impl GaussPoly {
    /// Requires `Re a ≥ 0`; use [`GaussPoly::is_square_integrable`] for the
    /// stricter `Re a > 0` condition.
    pub fn new(mut poly: Vec<Complex64>, a: Complex64, b: Complex64) -> Result<Self> {
        while poly.len() > 1 && poly.last() == Some(&Complex64::new(0.0, 0.0)) {
            poly.pop();
        }
        let g = Self { poly, a, b };
        g.validate()?;
        Ok(g)
    }

    pub fn gaussian(a: f64) -> Self {
        Self {
            poly: vec![Complex64::new(1.0, 0.0)],
            a: Complex64::new(a, 0.0),
            b: Complex64::new(0.0, 0.0),
        }
    }

    /// `exp(i ω u)`, a bounded character with `a = 0`.
    pub fn character(omega: f64) -> Self {
        Self {
            poly: vec![Complex64::new(1.0, 0.0)],
            a: Complex64::new(0.0, 0.0),
            b: Complex64::new(0.0, omega),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.poly.is_empty() {
            return Err(Error::InvalidArgument("factor polynomial has no coefficients".into()));
        }
        if self.poly.len() > MAX_DEGREE + 1 {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree {} exceeds {MAX_DEGREE}",
                self.poly.len() - 1
            )));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        if !(self.poly.iter().all(finite) && finite(&self.a) && finite(&self.b)) {
            return Err(Error::InvalidArgument("non-finite factor coefficient".into()));
        }
        if self.a.re < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "quadratic rate has negative real part {}",
                self.a.re
            )));
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.poly.len() - 1
    }

    pub fn is_square_integrable(&self) -> bool {
        self.a.re > 0.0
    }

    pub fn eval(&self, u: f64) -> Complex64 {
        poly_eval(&self.poly, Complex64::new(u, 0.0)) * (-0.5 * self.a * u * u + self.b * u).exp()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            poly: self.poly.iter().map(|&p| p * c).collect(),
            a: self.a,
            b: self.b,
        }
    }

    /// Convolution with the Gaussian kernel of complex variance `v`.
    ///
    /// The kernel needs `Re(1/v) ≥ 0` and the integral converges only when
    /// `Re(a + 1/v) > 0`; both are checked.
    pub fn convolve(&self, v: Complex64) -> Result<Self> {
        if v == Complex64::new(0.0, 0.0) {
            return Ok(self.clone());
        }
        let inv = v.inv();
        if !(inv.re >= 0.0) {
            return Err(Error::InvalidArgument(format!("kernel variance {v} has Re(1/v) < 0")));
        }
        let re_rate = (self.a + inv).re;
        if !(re_rate > 0.0) {
            return Err(Error::Divergent(re_rate));
        }
        let one = Complex64::new(1.0, 0.0);
        let w = one + self.a * v;
        let mean = [self.b * v / w, one / w];
        let var = v / w;
        let moments = moment_polys(&mean, var, self.degree());
        let mut out = vec![Complex64::new(0.0, 0.0); self.poly.len()];
        for (pk, mk) in self.poly.iter().zip(&moments) {
            for (o, m) in out.iter_mut().zip(mk) {
                *o += pk * m;
            }
        }
        let factor = (self.b * self.b * v / (2.0 * w)).exp() / w.sqrt();
        for o in &mut out {
            *o *= factor;
        }
        let g = Self {
            poly: out,
            a: self.a / w,
            b: self.b / w,
        };
        g.validate()?;
        Ok(g)
    }

    /// `∫ g(u) conj(h(u)) du` in closed form; needs `Re(a_g + conj a_h) > 0`.
    pub fn l2_inner(&self, other: &GaussPoly) -> Result<Complex64> {
        let conj: Vec<Complex64> = other.poly.iter().map(|c| c.conj()).collect();
        let prod = poly_mul(&self.poly, &conj);
        gaussian_moment_integral(&prod, self.a + other.a.conj(), self.b + other.b.conj())
    }
}

/// `∫ p(u) exp(−A u²/2 + B u) du` over the real line, `Re A > 0`.
pub fn gaussian_moment_integral(p: &[Complex64], rate: Complex64, shift: Complex64) -> Result<Complex64> {
    if !(rate.re > 0.0) {
        return Err(Error::Divergent(rate.re));
    }
    let var = rate.inv();
    let mean = shift * var;
    let degree = p.len().saturating_sub(1);
    let moments = moment_polys(&[mean], var, degree);
    let expectation: Complex64 = p.iter().zip(&moments).map(|(c, m)| c * m[0]).sum();
    Ok(SQRT_2PI / rate.sqrt() * (shift * shift * var / 2.0).exp() * expectation)
}

/// `E[(M + W)^k]` for `k = 0..=degree` as polynomials in `r`, where `M` is
/// the polynomial `mean` and `W ~ N(0, var)`:
/// `m_k = M m_{k−1} + (k − 1) var m_{k−2}`.
fn moment_polys(mean: &[Complex64], var: Complex64, degree: usize) -> Vec<Vec<Complex64>> {
    let mut out: Vec<Vec<Complex64>> = Vec::with_capacity(degree + 1);
    out.push(vec![Complex64::new(1.0, 0.0)]);
    for k in 1..=degree {
        let mut next = poly_mul(mean, &out[k - 1]);
        if k >= 2 {
            let scale = var * (k - 1) as f64;
            add_scaled(&mut next, &out[k - 2], scale);
        }
        out.push(next);
    }
    out
}

pub(crate) fn poly_eval(p: &[Complex64], x: Complex64) -> Complex64 {
    p.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * x + c)
}

fn poly_mul(p: &[Complex64], q: &[Complex64]) -> Vec<Complex64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn add_scaled(acc: &mut Vec<Complex64>, p: &[Complex64], s: Complex64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), Complex64::new(0.0, 0.0));
    }
    for (a, c) in acc.iter_mut().zip(p) {
        *a += s * c;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Composite Simpson on [-L, L]; adequate for the smooth, rapidly
    /// decaying integrands used here.
    fn simpson(f: impl Fn(f64) -> Complex64, half_width: f64, panels: usize) -> Complex64 {
        let h = 2.0 * half_width / panels as f64;
        let mut s = f(-half_width) + f(half_width);
        for i in 1..panels {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += f(-half_width + i as f64 * h) * w;
        }
        s * h / 3.0
    }

    #[test]
    fn rejects_bad_factors() {
        assert!(GaussPoly::new(vec![], c(1.0, 0.0), c(0.0, 0.0)).is_err());
        assert!(GaussPoly::new(vec![c(1.0, 0.0)], c(-0.1, 0.0), c(0.0, 0.0)).is_err());
        assert!(GaussPoly::new(vec![c(f64::NAN, 0.0)], c(1.0, 0.0), c(0.0, 0.0)).is_err());
        assert!(GaussPoly::new(vec![c(1.0, 0.0); MAX_DEGREE + 2], c(1.0, 0.0), c(0.0, 0.0)).is_err());
        let g = GaussPoly::new(vec![c(1.0, 0.0), c(0.0, 0.0)], c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        assert_eq!(g.degree(), 0);
    }

    #[test]
    fn gaussian_integral_of_unit_gaussian() {
        // ∫ exp(−u²) du = √π
        let got = gaussian_moment_integral(&[c(1.0, 0.0)], c(2.0, 0.0), c(0.0, 0.0)).unwrap();
        assert!((got - c(std::f64::consts::PI.sqrt(), 0.0)).norm() < 1e-14);
    }

    #[test]
    fn moment_integral_matches_quadrature() {
        let p = [c(0.3, -0.1), c(-1.0, 0.5), c(0.2, 0.0), c(0.0, 0.7)];
        let rate = c(1.3, 0.8);
        let shift = c(0.4, -0.6);
        let got = gaussian_moment_integral(&p, rate, shift).unwrap();
        let want = simpson(
            |u| poly_eval(&p, c(u, 0.0)) * (-0.5 * rate * u * u + shift * u).exp(),
            14.0,
            20_000,
        );
        assert!((got - want).norm() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn zero_variance_is_identity() {
        let g = GaussPoly::new(vec![c(1.0, 2.0), c(0.5, 0.0)], c(0.7, 0.2), c(0.1, 0.0)).unwrap();
        assert_eq!(g.convolve(c(0.0, 0.0)).unwrap(), g);
    }

    #[test]
    fn gaussian_gaussian_convolution() {
        // exp(−u²/2) smoothed with unit variance: exp(−r²/4)/√2
        let g = GaussPoly::gaussian(1.0).convolve(c(1.0, 0.0)).unwrap();
        for r in [-2.0, -0.3, 0.0, 1.1, 3.0] {
            let want = (-r * r / 4.0_f64).exp() / 2f64.sqrt();
            assert!((g.eval(r) - c(want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn real_variance_matches_quadrature() {
        let g = GaussPoly::new(vec![c(1.0, 0.0), c(0.0, -0.5), c(0.25, 0.0)], c(0.6, 0.3), c(0.2, 0.4)).unwrap();
        let v = 0.7;
        let out = g.convolve(c(v, 0.0)).unwrap();
        for r in [-1.5, 0.0, 0.8] {
            let want = simpson(
                |u| g.eval(u) * ((-(u - r) * (u - r) / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt()),
                16.0,
                20_000,
            );
            assert!((out.eval(r) - want).norm() < 1e-10);
        }
    }

    #[test]
    fn variances_add_under_composition() {
        let g = GaussPoly::new(vec![c(0.5, 0.0), c(1.0, 1.0), c(0.0, 0.3)], c(1.2, -0.4), c(0.3, 0.1)).unwrap();
        let v1 = c(0.0, 0.4);
        let v2 = c(0.0, 1.1);
        let two = g.convolve(v1).unwrap().convolve(v2).unwrap();
        let one = g.convolve(v1 + v2).unwrap();
        assert!((two.a - one.a).norm() < 1e-14);
        assert!((two.b - one.b).norm() < 1e-14);
        for (x, y) in two.poly.iter().zip(&one.poly) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn opposite_variances_cancel() {
        let g = GaussPoly::new(vec![c(0.5, 0.0), c(1.0, 1.0), c(0.0, 0.3)], c(0.4, 2.0), c(-0.3, 0.1)).unwrap();
        let v = c(0.0, 0.9);
        let back = g.convolve(v).unwrap().convolve(-v).unwrap();
        assert!((back.a - g.a).norm() < 1e-14);
        assert!((back.b - g.b).norm() < 1e-14);
        for (x, y) in back.poly.iter().zip(&g.poly) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn divergence_is_detected() {
        // a character has a = 0, so the Fresnel kernel never converges
        let err = GaussPoly::character(1.0).convolve(c(0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Divergent(_)));
        // but ordinary smoothing is fine: E exp(iωZ) = exp(−ω² v / 2)
        let g = GaussPoly::character(2.0).convolve(c(0.5, 0.0)).unwrap();
        assert!((g.eval(0.0) - c((-1.0_f64).exp(), 0.0)).norm() < 1e-15);
        // negative real variance is not a kernel
        assert!(GaussPoly::gaussian(1.0).convolve(c(-1.0, 0.0)).is_err());
    }

    #[test]
    fn l2_inner_examples() {
        let g = GaussPoly::gaussian(1.0);
        let n2 = g.l2_inner(&g).unwrap();
        assert!((n2 - c(std::f64::consts::PI.sqrt(), 0.0)).norm() < 1e-14);

        // Hermite-type members under the weight e^{−u²}
        let h1 = GaussPoly::new(vec![c(0.0, 0.0), c(1.0, 0.0)], c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let h2 = GaussPoly::new(vec![c(-0.5, 0.0), c(0.0, 0.0), c(1.0, 0.0)], c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        for (x, y) in [(&g, &h1), (&g, &h2), (&h1, &h2)] {
            assert!(x.l2_inner(y).unwrap().norm() < 1e-10);
        }

        let f = GaussPoly::new(vec![c(0.3, 1.0), c(-0.2, 0.1)], c(0.8, 0.5), c(0.1, -0.3)).unwrap();
        let self_inner = f.l2_inner(&f).unwrap();
        assert!(self_inner.re > 0.0 && self_inner.im.abs() < 1e-12);
        let cross = f.l2_inner(&h2).unwrap();
        assert!((cross - h2.l2_inner(&f).unwrap().conj()).norm() < 1e-14);
    }
}

//! Gaussian smoothing `T_{λ,h}` and its L₂ analytic continuation, the
//! Gaussian–Fourier–Feynman transform `T_{q,h}`.
//!
//! On a functional over the family `𝒜`, both act coordinatewise on `f` by
//! convolution with a Gaussian kernel of variance `‖α_j h‖₂²/λ`; the
//! transform is the case `λ = −iq`, i.e. variance `i‖α_j h‖₂²/q`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cylinder::{
    a2_distance, a2_norm, in_o_inf, in_o_inf_n, tensor_integrate, BlackBoxF, CylinderFunctional, FunctionalForm,
    OrthogonalFamily, ProductGaussPoly,
};
use crate::error::{Error, Result};
use crate::grid::{s_combine, s_combine_seq, wedge, GridFunction, HSeq};
use crate::quad::Rule;
use crate::rng::RngStream;
use crate::wiener::{estimate_functionals, ComplexEstimate, WienerPath};

/// Element of the q-group in reciprocal coordinates `r = 1/q`; `r = 0` is
/// the identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QElem {
    pub r: f64,
}

impl QElem {
    pub const IDENTITY: QElem = QElem { r: 0.0 };

    pub fn from_r(r: f64) -> Result<Self> {
        if !r.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "reciprocal coordinate {r} is not finite"
            )));
        }
        Ok(Self { r })
    }

    pub fn from_q(q: f64) -> Result<Self> {
        check_q(q)?;
        Ok(Self { r: 1.0 / q })
    }

    pub fn is_identity(&self) -> bool {
        self.r == 0.0
    }

    /// `None` for the identity.
    pub fn q(&self) -> Option<f64> {
        (!self.is_identity()).then(|| 1.0 / self.r)
    }

    pub fn inverse(&self) -> QElem {
        QElem { r: -self.r }
    }
}

/// `T_{q₂,h} ∘ T_{q₁,h} = T_{q₁q₂/(q₁+q₂),h}`, which is addition of `r`.
pub fn q_compose(a: QElem, b: QElem) -> QElem {
    QElem { r: a.r + b.r }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    Identity,
    Forward,
}

/// One transform `T_{q,h}`. Either `q` at the group identity or `h ≡ 0`
/// makes it the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformTag {
    pub q: QElem,
    pub h: GridFunction,
}

impl TransformTag {
    pub fn new(q: QElem, h: GridFunction) -> Self {
        Self { q, h }
    }

    pub fn forward(q: f64, h: GridFunction) -> Result<Self> {
        Ok(Self {
            q: QElem::from_q(q)?,
            h,
        })
    }

    pub fn kind(&self) -> TransformKind {
        if self.q.is_identity() || self.h.is_zero() {
            TransformKind::Identity
        } else {
            TransformKind::Forward
        }
    }

    pub fn apply(&self, functional: &CylinderFunctional) -> Result<CylinderFunctional> {
        gfft_q(functional, self.q, &self.h)
    }
}

fn check_q(q: f64) -> Result<()> {
    if q == 0.0 || !q.is_finite() {
        return Err(Error::InvalidArgument(format!("q = {q} must be finite and nonzero")));
    }
    Ok(())
}

/// `‖α_j h‖₂²` after checking `h ∈ 𝒪_∞(𝒜)`.
fn scaled_variances(family: &OrthogonalFamily, h: &GridFunction) -> Result<Vec<f64>> {
    if h.grid() != family.grid() {
        return Err(Error::GridMismatch);
    }
    if !in_o_inf(family, h, family.tol())? {
        return Err(Error::Membership("the scaled family 𝒜h is not orthogonal".into()));
    }
    family.scaled_norms_sq(h)
}

fn convolve_coordinates(functional: &CylinderFunctional, variances: &[Complex64]) -> Result<CylinderFunctional> {
    let Some(pgp) = functional.closed_form() else {
        return Err(Error::Unsupported(
            "closed-form transforms need a product Gaussian-polynomial f",
        ));
    };
    let factors = pgp
        .factors
        .iter()
        .zip(variances)
        .map(|(g, &v)| g.convolve(v))
        .collect::<Result<Vec<_>>>()?;
    functional.with_form(FunctionalForm::Closed(ProductGaussPoly { factors }))
}

/// `T_{λ,h}` for complex `λ` with `Re λ ≥ 0`, `λ ≠ 0`: the kernel variance
/// of coordinate `j` is `‖α_j h‖₂²/λ`.
pub fn t_lambda_complex(
    functional: &CylinderFunctional,
    lambda: Complex64,
    h: &GridFunction,
) -> Result<CylinderFunctional> {
    if !(lambda.re >= 0.0) || lambda == Complex64::new(0.0, 0.0) || !lambda.im.is_finite() || !lambda.re.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "λ = {lambda} must be nonzero with Re λ ≥ 0"
        )));
    }
    if h.is_zero() {
        return Ok(functional.clone());
    }
    let vars = scaled_variances(functional.family(), h)?;
    let v: Vec<Complex64> = vars.iter().map(|&s| Complex64::new(s, 0.0) / lambda).collect();
    convolve_coordinates(functional, &v)
}

/// `T_{λ,h}` for real `λ > 0`.
pub fn t_lambda(functional: &CylinderFunctional, lambda: f64, h: &GridFunction) -> Result<CylinderFunctional> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("λ = {lambda} must be positive")));
    }
    if h.is_zero() {
        return Ok(functional.clone());
    }
    let vars = scaled_variances(functional.family(), h)?;
    let v: Vec<Complex64> = vars.iter().map(|&s| Complex64::new(s / lambda, 0.0)).collect();
    convolve_coordinates(functional, &v)
}

/// `T^{(2)}_{q,h}(F)` in closed form.
pub fn gfft(functional: &CylinderFunctional, q: f64, h: &GridFunction) -> Result<CylinderFunctional> {
    gfft_q(functional, QElem::from_q(q)?, h)
}

/// [`gfft`] indexed by a q-group element; kernel variance `i·r·‖α_j h‖₂²`.
pub fn gfft_q(functional: &CylinderFunctional, q: QElem, h: &GridFunction) -> Result<CylinderFunctional> {
    if q.is_identity() || h.is_zero() {
        return Ok(functional.clone());
    }
    let vars = scaled_variances(functional.family(), h)?;
    let v: Vec<Complex64> = vars.iter().map(|&s| Complex64::new(0.0, s * q.r)).collect();
    convolve_coordinates(functional, &v)
}

/// Monte Carlo value of `T_{λ,h}(F)(y) = E F(y + λ^{−1/2} 𝒵_h(x,·))`.
pub fn t_lambda_mc(
    functional: &CylinderFunctional,
    lambda: f64,
    h: &GridFunction,
    y: &WienerPath,
    n: usize,
    rng: &RngStream,
) -> Result<ComplexEstimate> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("λ = {lambda} must be positive")));
    }
    Ok(estimate_functionals(&[functional], &[(h, lambda.powf(-0.5))], Some(y), n, rng)?[0])
}

/// `‖T_{q,h₂}(T_{q,h₁}F) − T_{q,s(h₁,h₂)}F‖`.
pub fn compose_check(functional: &CylinderFunctional, q: f64, h1: &GridFunction, h2: &GridFunction) -> Result<f64> {
    let lhs = gfft(&gfft(functional, q, h1)?, q, h2)?;
    let rhs = gfft(functional, q, &s_combine(h1, h2)?)?;
    a2_distance(&lhs, &rhs)
}

/// `‖T_{q,h_n}(⋯T_{q,h₁}(F)⋯) − T_{q,s(ℋ)}F‖`.
pub fn compose_check_seq(functional: &CylinderFunctional, q: f64, hs: &HSeq) -> Result<f64> {
    let mut lhs = functional.clone();
    for h in hs.items() {
        lhs = gfft(&lhs, q, h)?;
    }
    let rhs = gfft(functional, q, &s_combine_seq(hs))?;
    a2_distance(&lhs, &rhs)
}

/// `‖T_{q,s(ℋ₂)}(T_{q,s(ℋ₁)}F) − T_{q,s(ℋ₁∧ℋ₂)}F‖`.
pub fn compose_check_wedge(functional: &CylinderFunctional, q: f64, h1: &HSeq, h2: &HSeq) -> Result<f64> {
    let lhs = gfft(&gfft(functional, q, &s_combine_seq(h1))?, q, &s_combine_seq(h2))?;
    let rhs = gfft(functional, q, &s_combine_seq(&wedge(h1, h2)?))?;
    a2_distance(&lhs, &rhs)
}

/// `(‖F‖, ‖T_{q,h}F‖)`, requiring `𝒜h` orthonormal.
pub fn plancherel_check(functional: &CylinderFunctional, q: f64, h: &GridFunction) -> Result<(f64, f64)> {
    let family = functional.family();
    if !in_o_inf_n(family, h, family.tol())? {
        return Err(Error::Membership("the scaled family 𝒜h is not orthonormal".into()));
    }
    Ok((a2_norm(functional)?, a2_norm(&gfft(functional, q, h)?)?))
}

/// `‖T_{q,h}F‖ / ‖F‖` with only orthogonality of `𝒜h` required.
pub fn norm_ratio(functional: &CylinderFunctional, q: f64, h: &GridFunction) -> Result<f64> {
    Ok(a2_norm(&gfft(functional, q, h)?)? / a2_norm(functional)?)
}

/// Settings for the ε-regularized quadrature transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralOptions {
    /// Damping values, positive and strictly decreasing.
    pub eps: Vec<f64>,
    /// Output samples cover `[−R, R]ⁿ`.
    pub out_half_width: f64,
    /// Output quadrature points per axis.
    pub out_points: usize,
    /// Convergence threshold on the last successive L₂ difference.
    pub tol: f64,
    /// Scale factors `ρ` applied to the output points; convergence is
    /// required at each.
    #[serde(default = "default_rho")]
    pub rho: Vec<f64>,
}

fn default_rho() -> Vec<f64> {
    vec![1.0]
}

impl Default for GeneralOptions {
    fn default() -> Self {
        Self {
            eps: vec![1e-3, 1e-5, 1e-7],
            out_half_width: 8.0,
            out_points: 256,
            tol: 1e-3,
            rho: default_rho(),
        }
    }
}

impl GeneralOptions {
    fn validate(&self) -> Result<()> {
        if self.eps.is_empty()
            || self.eps.iter().any(|e| !(e.is_finite() && *e > 0.0))
            || self.eps.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::InvalidArgument(
                "eps must be positive and strictly decreasing".into(),
            ));
        }
        if !(self.out_half_width.is_finite() && self.out_half_width > 0.0) || self.out_points < 16 {
            return Err(Error::InvalidArgument(
                "output box needs R > 0 and at least 16 points".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.rho.is_empty() || self.rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidArgument("rho values must be positive".into()));
        }
        Ok(())
    }
}

/// `ψ` sampled on a tensor Gauss–Legendre grid, at the smallest `ε`.
#[derive(Debug, Clone)]
pub struct SampledTransform {
    pub arity: usize,
    /// Per-axis output nodes and weights (shared by all axes).
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Row-major samples at `ρ = 1`, first axis slowest.
    pub values: Vec<Complex64>,
    /// `diffs[i][k]`: L₂ difference between `ε_k` and `ε_{k+1}` at `rho[i]`.
    pub diffs: Vec<Vec<f64>>,
    pub rho: Vec<f64>,
}

impl SampledTransform {
    pub fn l2_norm(&self) -> f64 {
        self.weighted_sum(|i| self.values[i].norm_sqr()).sqrt()
    }

    /// `(∫_box |ψ − g|²)^{1/2}` on the sample grid.
    pub fn l2_distance(&self, g: impl Fn(&[f64]) -> Complex64) -> f64 {
        let mut u = vec![0.0; self.arity];
        self.weighted_sum(|i| {
            self.point(i, &mut u);
            (self.values[i] - g(&u)).norm_sqr()
        })
        .sqrt()
    }

    /// Coordinates of sample `i`.
    pub fn point(&self, mut i: usize, out: &mut [f64]) {
        let p = self.nodes.len();
        for d in (0..self.arity).rev() {
            out[d] = self.nodes[i % p];
            i /= p;
        }
    }

    fn weighted_sum(&self, mut f: impl FnMut(usize) -> f64) -> f64 {
        let p = self.nodes.len();
        (0..self.values.len())
            .map(|i| {
                let mut w = 1.0;
                let mut k = i;
                for _ in 0..self.arity {
                    w *= self.weights[k % p];
                    k /= p;
                }
                w * f(i)
            })
            .sum()
    }

    pub fn converged(&self, tol: f64) -> bool {
        self.diffs.iter().all(|d| d.last().is_none_or(|&x| x <= tol))
    }
}

/// `ψ^q_{f,𝒜h}` for a black-box `f`: quadrature of `f` against the damped
/// kernel at `λ = ε − iq` for each `ε`, with the successive L₂ differences
/// as convergence evidence. Fails with [`Error::NotConverged`] when the last
/// difference exceeds `opts.tol`.
pub fn gfft_general(
    functional: &CylinderFunctional,
    q: f64,
    h: &GridFunction,
    opts: &GeneralOptions,
) -> Result<SampledTransform> {
    check_q(q)?;
    opts.validate()?;
    let bb = match functional.form() {
        FunctionalForm::BlackBox(b) => b.clone(),
        FunctionalForm::Closed(p) => {
            return Err(Error::InvalidArgument(format!(
                "closed-form f (arity {}) should use gfft; wrap it in a black box to sample",
                p.arity()
            )))
        }
    };
    let n = functional.arity();
    let vars = scaled_variances(functional.family(), h)?;
    let input = Rule::with_points(-bb.half_width(), bb.half_width(), bb.points());
    let output = Rule::with_points(-opts.out_half_width, opts.out_half_width, opts.out_points);
    let (m, p) = (input.len(), output.len());
    if m.checked_pow(n as u32).is_none_or(|t| t > 50_000_000) || p.checked_pow(n as u32).is_none_or(|t| t > 50_000_000)
    {
        return Err(Error::Unsupported("tensor quadrature grid too large"));
    }
    let samples = sample_black_box(&bb, &input.nodes, n);

    let mut diffs = vec![Vec::new(); opts.rho.len()];
    let mut first_rho_values = Vec::new();
    for (ri, &rho) in opts.rho.iter().enumerate() {
        let targets: Vec<f64> = output.nodes.iter().map(|r| rho * r).collect();
        let mut prev: Option<Vec<Complex64>> = None;
        for &eps in &opts.eps {
            let lambda = Complex64::new(eps, -q);
            let mut data = samples.clone();
            let mut shape = vec![m; n];
            for (axis, &s2) in vars.iter().enumerate() {
                let kernel = kernel_matrix(lambda / s2, &input, &targets);
                data = apply_axis(&data, &shape, axis, &kernel, p);
                shape[axis] = p;
            }
            if let Some(prev) = &prev {
                let d = tensor_weighted_diff(&data, prev, &output.weights, n);
                diffs[ri].push(d);
            }
            prev = Some(data);
        }
        if ri == 0 {
            first_rho_values = prev.expect("eps is nonempty");
        }
    }
    let out = SampledTransform {
        arity: n,
        nodes: output.nodes,
        weights: output.weights,
        values: first_rho_values,
        diffs,
        rho: opts.rho.clone(),
    };
    if !out.converged(opts.tol) {
        let last = out.diffs.iter().filter_map(|d| d.last().copied()).fold(0.0, f64::max);
        return Err(Error::NotConverged { last, tol: opts.tol });
    }
    Ok(out)
}

fn sample_black_box(bb: &BlackBoxF, nodes: &[f64], n: usize) -> Vec<Complex64> {
    let m = nodes.len();
    let total = m.pow(n as u32);
    let mut u = vec![0.0; n];
    (0..total)
        .map(|mut i| {
            for d in (0..n).rev() {
                u[d] = nodes[i % m];
                i /= m;
            }
            bb.eval(&u)
        })
        .collect()
}

/// `K[p][m] = w_m (c/2π)^{1/2} exp(−c (u_m − r_p)²/2)`, `c = λ/s²`.
fn kernel_matrix(c: Complex64, input: &Rule, targets: &[f64]) -> Vec<Complex64> {
    let pref = (c / std::f64::consts::TAU).sqrt();
    let mut k = Vec::with_capacity(targets.len() * input.len());
    for &r in targets {
        for (&u, &w) in input.nodes.iter().zip(&input.weights) {
            let d = u - r;
            k.push(pref * w * (-0.5 * c * d * d).exp());
        }
    }
    k
}

/// Contracts `axis` of a row-major tensor with a `p × shape[axis]` matrix.
fn apply_axis(data: &[Complex64], shape: &[usize], axis: usize, kernel: &[Complex64], p: usize) -> Vec<Complex64> {
    let m = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let mut out = vec![Complex64::new(0.0, 0.0); outer * p * inner];
    for o in 0..outer {
        for pi in 0..p {
            let row = &kernel[pi * m..(pi + 1) * m];
            let dst = &mut out[(o * p + pi) * inner..(o * p + pi + 1) * inner];
            for (mi, &k) in row.iter().enumerate() {
                let src = &data[(o * m + mi) * inner..(o * m + mi + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += k * s;
                }
            }
        }
    }
    out
}

fn tensor_weighted_diff(a: &[Complex64], b: &[Complex64], weights: &[f64], n: usize) -> f64 {
    let p = weights.len();
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(i, (x, y))| {
            let mut w = 1.0;
            let mut k = i;
            for _ in 0..n {
                w *= weights[k % p];
                k /= p;
            }
            w * (x - y).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// `‖ψ‖₂` of a black-box transform by integrating `|ψ|²` over the output box
/// of a [`SampledTransform`]; convenience for Plancherel checks.
pub fn sampled_norm_ratio(functional: &CylinderFunctional, sampled: &SampledTransform) -> Result<f64> {
    let FunctionalForm::BlackBox(bb) = functional.form() else {
        return Err(Error::Unsupported("sampled norm ratio needs a black-box f"));
    };
    let f_norm = tensor_integrate(functional.arity(), bb.half_width(), bb.points(), |u| {
        Complex64::new(bb.eval(u).norm_sqr(), 0.0)
    })?
    .re
    .sqrt();
    Ok(sampled.l2_norm() / f_norm)
}

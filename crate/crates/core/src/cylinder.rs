//! Cylinder functionals `F(x) = f(⟨α₁,x⟩, …, ⟨α_n,x⟩)` over an orthogonal
//! family, and the weights `h` that keep the scaled family `𝒜h` orthogonal.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauss::GaussPoly;
use crate::grid::{inner_product, s_combine, GridFunction, TimeGrid};
use crate::quad::Rule;
use crate::wiener::{pwz, WienerPath};

/// Default orthogonality tolerance, sized for `N = 4096`.
pub const DEFAULT_ORTHO_TOL: f64 = 1e-8;

/// Largest tensor grid evaluated by the black-box quadratures.
const MAX_TENSOR_POINTS: usize = 50_000_000;

/// `e_j(t) = cos((j − 1/2)πt/T)` sampled on the grid, `j ≥ 1`.
pub fn cosine_basis(j: usize, grid: TimeGrid) -> Result<GridFunction> {
    if j < 1 {
        return Err(Error::InvalidArgument("cosine atoms are indexed from 1".into()));
    }
    let freq = (j as f64 - 0.5) * std::f64::consts::PI / grid.horizon();
    GridFunction::from_fn(grid, |t| (freq * t).cos())
}

/// `√(2/T)·e_j`, a member of the complete orthonormal cosine system.
pub fn normalized_cosine_basis(j: usize, grid: TimeGrid) -> Result<GridFunction> {
    Ok(cosine_basis(j, grid)?.scale((2.0 / grid.horizon()).sqrt()))
}

/// A finite orthogonal family with no zero member.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalFamily {
    atoms: Vec<GridFunction>,
    tol: f64,
}

impl OrthogonalFamily {
    pub fn new(atoms: Vec<GridFunction>, tol: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidArgument(
                "an orthogonal family needs at least one atom".into(),
            ));
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
        }
        let grid = *atoms[0].grid();
        for a in &atoms {
            if a.grid() != &grid {
                return Err(Error::GridMismatch);
            }
        }
        for (i, a) in atoms.iter().enumerate() {
            if !(a.norm() > tol) {
                return Err(Error::InvalidArgument(format!("atom {i} has zero norm")));
            }
            for (j, b) in atoms.iter().enumerate().skip(i + 1) {
                let ip = inner_product(a, b)?;
                if ip.abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "atoms {i} and {j} are not orthogonal: inner product {ip:e}"
                    )));
                }
            }
        }
        Ok(Self { atoms, tol })
    }

    pub fn with_default_tol(atoms: Vec<GridFunction>) -> Result<Self> {
        Self::new(atoms, DEFAULT_ORTHO_TOL)
    }

    pub fn atoms(&self) -> &[GridFunction] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn grid(&self) -> &TimeGrid {
        self.atoms[0].grid()
    }

    /// `‖α_j h‖₂²` for every atom.
    pub fn scaled_norms_sq(&self, h: &GridFunction) -> Result<Vec<f64>> {
        self.atoms
            .iter()
            .map(|a| {
                let ah = a.mul(h)?;
                inner_product(&ah, &ah)
            })
            .collect()
    }

    /// Largest `|(α_i h, α_j h)₂|` over `i ≠ j`.
    pub fn max_scaled_cross(&self, h: &GridFunction) -> Result<f64> {
        let scaled: Vec<GridFunction> = self.atoms.iter().map(|a| a.mul(h)).collect::<Result<_>>()?;
        let mut worst = 0.0f64;
        for i in 0..scaled.len() {
            for j in i + 1..scaled.len() {
                worst = worst.max(inner_product(&scaled[i], &scaled[j])?.abs());
            }
        }
        Ok(worst)
    }
}

/// Membership in `𝒪_∞(𝒜)`: `h` nonzero and `𝒜h` orthogonal with no zero member.
pub fn in_o_inf(family: &OrthogonalFamily, h: &GridFunction, tol: f64) -> Result<bool> {
    if h.grid() != family.grid() {
        return Err(Error::GridMismatch);
    }
    if !(h.norm() > tol) {
        return Ok(false);
    }
    let norms = family.scaled_norms_sq(h)?;
    if norms.iter().any(|n| !(n.sqrt() > tol)) {
        return Ok(false);
    }
    Ok(family.max_scaled_cross(h)? <= tol)
}

/// Membership in `𝒪ⁿ_∞(𝒜)`: additionally every `‖α_j h‖₂ = 1`.
pub fn in_o_inf_n(family: &OrthogonalFamily, h: &GridFunction, tol: f64) -> Result<bool> {
    if !in_o_inf(family, h, tol)? {
        return Ok(false);
    }
    Ok(family.scaled_norms_sq(h)?.iter().all(|n| (n.sqrt() - 1.0).abs() <= tol))
}

/// Checks that `s(h1, h2)` stays in `𝒪_∞(𝒜)` and that the scaled norms add,
/// `‖α_j s‖² = ‖α_j h1‖² + ‖α_j h2‖²`. Either weight may be identically zero.
pub fn s_preserves_o_inf(family: &OrthogonalFamily, h1: &GridFunction, h2: &GridFunction, tol: f64) -> Result<bool> {
    for (name, h) in [("h1", h1), ("h2", h2)] {
        if !h.is_zero() && !in_o_inf(family, h, tol)? {
            return Err(Error::Membership(format!("{name} is not in O_inf(A)")));
        }
    }
    let s = s_combine(h1, h2)?;
    if !in_o_inf(family, &s, tol)? {
        return Ok(false);
    }
    let ns = family.scaled_norms_sq(&s)?;
    let n1 = family.scaled_norms_sq(h1)?;
    let n2 = family.scaled_norms_sq(h2)?;
    Ok(ns
        .iter()
        .zip(n1.iter().zip(&n2))
        .all(|(s, (a, b))| (s - (a + b)).abs() <= tol))
}

/// The members of `pool` lying in `𝒪_∞(𝒜)`, in their original order.
pub fn find_o_inf_elements(family: &OrthogonalFamily, pool: &[GridFunction], tol: f64) -> Vec<GridFunction> {
    pool.iter()
        .filter(|h| in_o_inf(family, h, tol).unwrap_or(false))
        .cloned()
        .collect()
}

/// Coordinate-separable closed-form class `f(u) = ∏_j p_j(u_j) exp(−a_j u_j²/2 + b_j u_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductGaussPoly {
    pub factors: Vec<GaussPoly>,
}

impl ProductGaussPoly {
    pub fn new(factors: Vec<GaussPoly>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidArgument("a product needs at least one factor".into()));
        }
        for f in &factors {
            f.validate()?;
        }
        Ok(Self { factors })
    }

    pub fn arity(&self) -> usize {
        self.factors.len()
    }

    pub fn eval(&self, u: &[f64]) -> Complex64 {
        self.factors.iter().zip(u).map(|(g, &x)| g.eval(x)).product()
    }

    pub fn is_square_integrable(&self) -> bool {
        self.factors.iter().all(GaussPoly::is_square_integrable)
    }

    /// Multiplies the function by `c`; the constant lives in the first factor.
    pub fn scale(&self, c: Complex64) -> Self {
        let mut factors = self.factors.clone();
        factors[0] = factors[0].scale(c);
        Self { factors }
    }

    pub fn l2_inner(&self, other: &ProductGaussPoly) -> Result<Complex64> {
        if self.arity() != other.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                got: other.arity(),
            });
        }
        self.factors
            .iter()
            .zip(&other.factors)
            .map(|(f, g)| f.l2_inner(g))
            .product()
    }
}

/// Built-in black-box integrands, addressable from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinFn {
    /// `∏_j 1{|u_j| ≤ half_width}`.
    Indicator { half_width: f64, arity: usize },
    /// `cos(Σ_j ω_j u_j)`.
    Cosine { freqs: Vec<f64> },
    /// `∏_j sin(ω_j u_j + φ_j)`.
    SineProduct { freqs: Vec<f64>, phases: Vec<f64> },
    /// Pointwise evaluation of a closed-form product.
    Sampled { pgp: ProductGaussPoly },
}

impl BuiltinFn {
    pub fn arity(&self) -> usize {
        match self {
            BuiltinFn::Indicator { arity, .. } => *arity,
            BuiltinFn::Cosine { freqs } => freqs.len(),
            BuiltinFn::SineProduct { freqs, .. } => freqs.len(),
            BuiltinFn::Sampled { pgp } => pgp.arity(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            BuiltinFn::Indicator { half_width, arity } => {
                if !(half_width.is_finite() && *half_width > 0.0) || *arity == 0 {
                    return Err(Error::InvalidArgument(
                        "indicator needs half_width > 0 and arity ≥ 1".into(),
                    ));
                }
            }
            BuiltinFn::Cosine { freqs } => {
                if freqs.is_empty() || freqs.iter().any(|w| !w.is_finite()) {
                    return Err(Error::InvalidArgument("cosine needs finite frequencies".into()));
                }
            }
            BuiltinFn::SineProduct { freqs, phases } => {
                if freqs.is_empty() || freqs.len() != phases.len() || freqs.iter().chain(phases).any(|w| !w.is_finite())
                {
                    return Err(Error::InvalidArgument(
                        "sine product needs matching finite frequencies and phases".into(),
                    ));
                }
            }
            BuiltinFn::Sampled { pgp } => {
                ProductGaussPoly::new(pgp.factors.clone())?;
            }
        }
        Ok(())
    }

    fn eval(&self, u: &[f64]) -> Complex64 {
        match self {
            BuiltinFn::Indicator { half_width, .. } => {
                let inside = u.iter().all(|x| x.abs() <= *half_width);
                Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0)
            }
            BuiltinFn::Cosine { freqs } => {
                let phase: f64 = freqs.iter().zip(u).map(|(w, x)| w * x).sum();
                Complex64::new(phase.cos(), 0.0)
            }
            BuiltinFn::SineProduct { freqs, phases } => {
                let v: f64 = freqs
                    .iter()
                    .zip(phases)
                    .zip(u)
                    .map(|((w, p), x)| (w * x + p).sin())
                    .product();
                Complex64::new(v, 0.0)
            }
            BuiltinFn::Sampled { pgp } => pgp.eval(u),
        }
    }
}

pub type CustomFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum BlackBoxSource {
    Builtin(BuiltinFn),
    Custom { arity: usize, f: CustomFn },
}

impl fmt::Debug for BlackBoxSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlackBoxSource::Builtin(b) => f.debug_tuple("Builtin").field(b).finish(),
            BlackBoxSource::Custom { arity, .. } => f.debug_struct("Custom").field("arity", arity).finish(),
        }
    }
}

/// A pointwise-evaluable `f` together with the box `[−L, L]ⁿ` and the number
/// of quadrature points per axis used whenever it has to be integrated.
#[derive(Debug, Clone)]
pub struct BlackBoxF {
    source: BlackBoxSource,
    half_width: f64,
    points: usize,
}

impl BlackBoxF {
    pub fn new(source: BlackBoxSource, half_width: f64, points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "box half-width {half_width} must be positive"
            )));
        }
        if points < 16 {
            return Err(Error::InvalidArgument(format!(
                "need at least 16 points per axis, got {points}"
            )));
        }
        if let BlackBoxSource::Builtin(b) = &source {
            b.validate()?;
        }
        Ok(Self {
            source,
            half_width,
            points,
        })
    }

    pub fn builtin(f: BuiltinFn, half_width: f64, points: usize) -> Result<Self> {
        Self::new(BlackBoxSource::Builtin(f), half_width, points)
    }

    pub fn custom(
        arity: usize,
        f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
        half_width: f64,
        points: usize,
    ) -> Result<Self> {
        Self::new(BlackBoxSource::Custom { arity, f: Arc::new(f) }, half_width, points)
    }

    pub fn source(&self) -> &BlackBoxSource {
        &self.source
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn arity(&self) -> usize {
        match &self.source {
            BlackBoxSource::Builtin(b) => b.arity(),
            BlackBoxSource::Custom { arity, .. } => *arity,
        }
    }

    pub fn eval(&self, u: &[f64]) -> Complex64 {
        match &self.source {
            BlackBoxSource::Builtin(b) => b.eval(u),
            BlackBoxSource::Custom { f, .. } => f(u),
        }
    }
}

#[derive(Debug, Clone)]
pub enum FunctionalForm {
    Closed(ProductGaussPoly),
    BlackBox(BlackBoxF),
}

impl FunctionalForm {
    pub fn arity(&self) -> usize {
        match self {
            FunctionalForm::Closed(p) => p.arity(),
            FunctionalForm::BlackBox(b) => b.arity(),
        }
    }

    pub fn eval(&self, u: &[f64]) -> Complex64 {
        match self {
            FunctionalForm::Closed(p) => p.eval(u),
            FunctionalForm::BlackBox(b) => b.eval(u),
        }
    }
}

/// An element of 𝔄^(2) in canonical orthogonal form.
#[derive(Debug, Clone)]
pub struct CylinderFunctional {
    family: Arc<OrthogonalFamily>,
    f: FunctionalForm,
}

impl CylinderFunctional {
    pub fn new(family: Arc<OrthogonalFamily>, f: FunctionalForm) -> Result<Self> {
        if f.arity() != family.len() {
            return Err(Error::ArityMismatch {
                expected: family.len(),
                got: f.arity(),
            });
        }
        Ok(Self { family, f })
    }

    pub fn closed(family: Arc<OrthogonalFamily>, f: ProductGaussPoly) -> Result<Self> {
        Self::new(family, FunctionalForm::Closed(f))
    }

    pub fn family(&self) -> &Arc<OrthogonalFamily> {
        &self.family
    }

    pub fn form(&self) -> &FunctionalForm {
        &self.f
    }

    pub fn closed_form(&self) -> Option<&ProductGaussPoly> {
        match &self.f {
            FunctionalForm::Closed(p) => Some(p),
            FunctionalForm::BlackBox(_) => None,
        }
    }

    pub fn arity(&self) -> usize {
        self.family.len()
    }

    /// `f(r₁, …, r_n)` at given PWZ coordinates.
    pub fn eval_coords(&self, r: &[f64]) -> Complex64 {
        self.f.eval(r)
    }

    /// Same family, different `f`.
    pub fn with_form(&self, f: FunctionalForm) -> Result<Self> {
        Self::new(Arc::clone(&self.family), f)
    }

    /// `c·F`.
    pub fn scale(&self, c: Complex64) -> Self {
        let f = match &self.f {
            FunctionalForm::Closed(p) => FunctionalForm::Closed(p.scale(c)),
            FunctionalForm::BlackBox(b) => {
                let inner = b.clone();
                FunctionalForm::BlackBox(
                    BlackBoxF::custom(inner.arity(), move |u| inner.eval(u) * c, b.half_width, b.points)
                        .expect("validated box"),
                )
            }
        };
        Self {
            family: Arc::clone(&self.family),
            f,
        }
    }

    pub(crate) fn same_family(&self, other: &CylinderFunctional) -> bool {
        Arc::ptr_eq(&self.family, &other.family) || self.family == other.family
    }
}

/// `F(y) = f(⟨α₁,y⟩, …, ⟨α_n,y⟩)`.
pub fn eval_cylinder(functional: &CylinderFunctional, y: &WienerPath) -> Result<Complex64> {
    let r: Vec<f64> = functional
        .family
        .atoms()
        .iter()
        .map(|a| pwz(a, y))
        .collect::<Result<_>>()?;
    Ok(functional.eval_coords(&r))
}

fn check_pair(f1: &CylinderFunctional, f2: &CylinderFunctional) -> Result<()> {
    if f1.arity() != f2.arity() {
        return Err(Error::ArityMismatch {
            expected: f1.arity(),
            got: f2.arity(),
        });
    }
    if !f1.same_family(f2) {
        return Err(Error::FamilyMismatch);
    }
    Ok(())
}

/// `⟨⟨F₁, F₂⟩⟩ = ∫ f₁ conj(f₂)`: closed form for two products, tensor
/// quadrature over the black-box box otherwise.
pub fn a2_inner(f1: &CylinderFunctional, f2: &CylinderFunctional) -> Result<Complex64> {
    check_pair(f1, f2)?;
    match (&f1.f, &f2.f) {
        (FunctionalForm::Closed(p), FunctionalForm::Closed(q)) => p.l2_inner(q),
        _ => {
            let (half_width, points) = quadrature_box(&f1.f, &f2.f);
            tensor_integrate(f1.arity(), half_width, points, |u| f1.f.eval(u) * f2.f.eval(u).conj())
        }
    }
}

pub fn a2_norm(functional: &CylinderFunctional) -> Result<f64> {
    Ok(a2_inner(functional, functional)?.re.max(0.0).sqrt())
}

/// `‖F₁ − F₂‖` without the cancellation of expanding the square.
///
/// For two products the difference telescopes,
/// `∏g − ∏k = Σ_m (∏_{j<m} k_j)(g_m − k_m)(∏_{j>m} g_j)`, and every term of
/// the resulting Gram sum is a product of 1-D integrals evaluated on
/// pointwise differences.
pub fn a2_distance(f1: &CylinderFunctional, f2: &CylinderFunctional) -> Result<f64> {
    check_pair(f1, f2)?;
    match (&f1.f, &f2.f) {
        (FunctionalForm::Closed(p), FunctionalForm::Closed(q)) => product_distance(p, q),
        _ => {
            let (half_width, points) = quadrature_box(&f1.f, &f2.f);
            let sq = tensor_integrate(f1.arity(), half_width, points, |u| {
                Complex64::new((f1.f.eval(u) - f2.f.eval(u)).norm_sqr(), 0.0)
            })?;
            Ok(sq.re.max(0.0).sqrt())
        }
    }
}

fn product_distance(g: &ProductGaussPoly, k: &ProductGaussPoly) -> Result<f64> {
    if !(g.is_square_integrable() && k.is_square_integrable()) {
        return Err(Error::Unsupported("distance needs square-integrable products"));
    }
    let n = g.arity();
    // gram[j][x][y] = ⟨x_j, y_j⟩ over {0: k_j, 1: g_j, 2: g_j − k_j}
    let mut gram = Vec::with_capacity(n);
    for (gj, kj) in g.factors.iter().zip(&k.factors) {
        let rule = Rule::for_factors(&[gj, kj]);
        let mut m = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            let gv = gj.eval(u);
            let kv = kj.eval(u);
            let vals = [kv, gv, gv - kv];
            for x in 0..3 {
                for y in 0..3 {
                    m[x][y] += vals[x] * vals[y].conj() * w;
                }
            }
        }
        gram.push(m);
    }
    let pick = |m: usize, j: usize| match j.cmp(&m) {
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => 2,
        std::cmp::Ordering::Greater => 1,
    };
    let mut total = Complex64::new(0.0, 0.0);
    for m in 0..n {
        for l in 0..n {
            total += (0..n).map(|j| gram[j][pick(m, j)][pick(l, j)]).product::<Complex64>();
        }
    }
    Ok(total.re.max(0.0).sqrt())
}

fn quadrature_box(a: &FunctionalForm, b: &FunctionalForm) -> (f64, usize) {
    let mut half_width = 0.0f64;
    let mut points = 0usize;
    for form in [a, b] {
        if let FunctionalForm::BlackBox(bb) = form {
            half_width = half_width.max(bb.half_width);
            points = points.max(bb.points);
        }
    }
    (half_width, points)
}

/// Tensor Gauss–Legendre integral of `f` over `[−L, L]ⁿ`.
pub(crate) fn tensor_integrate(
    n: usize,
    half_width: f64,
    points: usize,
    f: impl Fn(&[f64]) -> Complex64,
) -> Result<Complex64> {
    let rule = Rule::with_points(-half_width, half_width, points);
    let m = rule.len();
    let total = m.checked_pow(n as u32).filter(|&t| t <= MAX_TENSOR_POINTS);
    let Some(total) = total else {
        return Err(Error::Unsupported("tensor quadrature grid too large"));
    };
    let mut idx = vec![0usize; n];
    let mut u = vec![0.0; n];
    let mut acc = Complex64::new(0.0, 0.0);
    for _ in 0..total {
        let mut w = 1.0;
        for (d, &i) in idx.iter().enumerate() {
            u[d] = rule.nodes[i];
            w *= rule.weights[i];
        }
        acc += f(&u) * w;
        for d in idx.iter_mut() {
            *d += 1;
            if *d < m {
                break;
            }
            *d = 0;
        }
    }
    Ok(acc)
}

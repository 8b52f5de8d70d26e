//! Runs the cases of a [`RunConfig`] and collects a [`Report`].
//!
//! Case `i` of a suite draws from `RngStream::new(seed, suite).derive(i)`,
//! so suites and cases are independent of each other and of run order. A
//! case that fails with an error contributes one failing `error` row.

use std::f64::consts::{SQRT_2, TAU};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::Rng;

use crate::algebra::{
    barwedge_well_defined, dyadic_q_sample, free_reduction_laws, monoid_laws, q_group_laws, word_eval, word_eval_laws,
    word_reduce_classes, xi_laws, LawCheck, MonoidElem, SeqClass, TransformClass,
};
use crate::config::{
    resolve_seq, word_from_letters, word_over_classes, AlgebraCase, FunctionalSpec, GridFnSpec, RotationCase,
    RunConfig, Suite, TransformCase, TransformSpec,
};
use crate::cylinder::{
    a2_distance, a2_norm, cosine_basis, eval_cylinder, in_o_inf_n, normalized_cosine_basis, CylinderFunctional,
    OrthogonalFamily, ProductGaussPoly, DEFAULT_ORTHO_TOL,
};
use crate::error::{Error, Result};
use crate::gauss::GaussPoly;
use crate::gfft::{
    compose_check, compose_check_seq, compose_check_wedge, gfft, gfft_general, plancherel_check, q_compose,
    sampled_norm_ratio, t_lambda, QElem,
};
use crate::grid::{GridFunction, HSeq, TimeGrid};
use crate::quad::{adaptive_gk15, Rule};
use crate::report::{Report, ReportRow};
use crate::rng::RngStream;
use crate::wiener::{
    estimate_functionals, sample_path, verify_rotation2_many, verify_rotation_seq_many, MCEstimate, WienerPath,
};

pub const ROTATION_STREAM: u64 = 1;
pub const TRANSFORM_STREAM: u64 = 2;
pub const ALGEBRA_STREAM: u64 = 3;

/// Runs the suites selected by `cfg.suite`; CSV weights resolve against
/// `base`.
pub fn run_config(cfg: &RunConfig, base: &Path) -> Result<Report> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let mut report = Report::default();
    if cfg.suite.includes(Suite::Rotation) {
        for (i, case) in cfg.rotation.iter().enumerate() {
            let stream = RngStream::new(cfg.seed, ROTATION_STREAM).derive(i as u64);
            collect(
                &mut report,
                "rotation",
                case.id(),
                rotation_case(case, grid, base, cfg.n, &stream),
            );
        }
    }
    if cfg.suite.includes(Suite::Transform) {
        for (i, case) in cfg.transform.iter().enumerate() {
            let stream = RngStream::new(cfg.seed, TRANSFORM_STREAM).derive(i as u64);
            collect(
                &mut report,
                "transform",
                case.id(),
                transform_case(case, grid, base, &stream),
            );
        }
    }
    if cfg.suite.includes(Suite::Algebra) {
        for (i, case) in cfg.algebra.iter().enumerate() {
            let stream = RngStream::new(cfg.seed, ALGEBRA_STREAM).derive(i as u64);
            collect(
                &mut report,
                "algebra",
                case.id(),
                algebra_case(case, grid, base, &stream),
            );
        }
    }
    Ok(report)
}

fn collect(report: &mut Report, suite: &str, id: &str, result: Result<Report>) {
    match result {
        Ok(r) => report.extend(r),
        Err(e) => report.push_error(suite, id, e),
    }
}

fn resolve_all(specs: &[FunctionalSpec], grid: TimeGrid, base: &Path) -> Result<Vec<CylinderFunctional>> {
    specs.iter().map(|s| s.resolve(grid, base)).collect()
}

fn parts(e: &crate::wiener::ComplexEstimate) -> [MCEstimate; 2] {
    [e.re, e.im]
}

fn rotation_case(case: &RotationCase, grid: TimeGrid, base: &Path, n: usize, stream: &RngStream) -> Result<Report> {
    const S: &str = "rotation";
    let mut rep = Report::default();
    match case {
        RotationCase::Pair {
            id,
            functionals,
            h1,
            h2,
        } => {
            let fs = resolve_all(functionals, grid, base)?;
            let refs: Vec<&CylinderFunctional> = fs.iter().collect();
            let (h1, h2) = (h1.resolve(grid, base)?, h2.resolve(grid, base)?);
            for (i, (a, b)) in verify_rotation2_many(&refs, &h1, &h2, n, stream)?.iter().enumerate() {
                rep.push_mc(S, id, &format!("f{i}:two_vs_one"), parts(a), parts(b));
            }
        }
        RotationCase::Sequence {
            id,
            functionals,
            hs,
            extra,
        } => {
            let fs = resolve_all(functionals, grid, base)?;
            let refs: Vec<&CylinderFunctional> = fs.iter().collect();
            let hs = resolve_seq(hs, grid, base)?;
            let extra = extra.resolve(grid, base)?;
            for (i, (many, two, one)) in verify_rotation_seq_many(&refs, &hs, &extra, n, stream)?
                .iter()
                .enumerate()
            {
                rep.push_mc(S, id, &format!("f{i}:many_vs_two"), parts(many), parts(two));
                rep.push_mc(S, id, &format!("f{i}:many_vs_one"), parts(many), parts(one));
                rep.push_mc(S, id, &format!("f{i}:two_vs_one"), parts(two), parts(one));
            }
        }
        RotationCase::Continuation {
            id,
            functionals,
            h,
            lambdas,
            y_stream,
        } => {
            let fs = resolve_all(functionals, grid, base)?;
            let refs: Vec<&CylinderFunctional> = fs.iter().collect();
            let h = h.resolve(grid, base)?;
            let y = match y_stream {
                Some(s) => sample_path(grid, &stream.derive(1).derive(*s)),
                None => WienerPath::zero(grid),
            };
            for (li, &lambda) in lambdas.iter().enumerate() {
                let ests = estimate_functionals(
                    &refs,
                    &[(&h, lambda.powf(-0.5))],
                    Some(&y),
                    n,
                    &stream.derive(0).derive(li as u64),
                )?;
                for (i, (f, est)) in fs.iter().zip(&ests).enumerate() {
                    let exact = eval_cylinder(&t_lambda(f, lambda, &h)?, &y)?;
                    let fixed = |v: f64| MCEstimate {
                        mean: v,
                        stderr: 0.0,
                        n: 0,
                    };
                    rep.push_mc(
                        S,
                        id,
                        &format!("f{i}:lambda={lambda}"),
                        parts(est),
                        [fixed(exact.re), fixed(exact.im)],
                    );
                }
            }
        }
    }
    Ok(rep)
}

fn transform_case(case: &TransformCase, grid: TimeGrid, base: &Path, stream: &RngStream) -> Result<Report> {
    const S: &str = "transform";
    let mut rep = Report::default();
    let mut rng = stream.rng();
    match case {
        TransformCase::KernelOracle {
            id,
            count,
            max_degree,
            eps,
            r_points,
            tol,
        } => {
            for c in 0..*count {
                let g = random_gauss_poly(&mut rng, *max_degree)?;
                let q = signed(&mut rng, 0.5, 3.0);
                let s2 = rng.random_range(0.5..=2.0);
                for &e in eps {
                    let err = kernel_oracle_error(&g, q, s2, e, *r_points)?;
                    rep.rows
                        .push(ReportRow::new(S, id.as_str(), format!("input{c}:eps={e}"), err, *tol));
                }
            }
        }
        TransformCase::Inverse { id, random, cases, tol } => {
            let mut all = random_cases(grid, &mut rng, *random, false)?;
            all.extend(resolve_cases(cases, grid, base)?);
            for (i, (f, q, h)) in all.iter().enumerate() {
                let back = gfft(&gfft(f, *q, h)?, -q, h)?;
                let err = max_coef_diff(closed(f)?, closed(&back)?);
                rep.rows
                    .push(ReportRow::new(S, id.as_str(), format!("case{i}:roundtrip"), err, *tol));
            }
        }
        TransformCase::Compose {
            id,
            pairs,
            sequences,
            wedges,
            seq_len,
            tol,
        } => {
            let mut row = |metric: String, residual: f64, f: &CylinderFunctional| -> Result<()> {
                rep.rows
                    .push(ReportRow::new(S, id.as_str(), metric, residual / a2_norm(f)?, *tol));
                Ok(())
            };
            for i in 0..*pairs {
                let (f, top) = random_functional(grid, &mut rng, None)?;
                let q = random_q(&mut rng);
                let h1 = random_weight(grid, &mut rng, top)?;
                let h2 = random_weight(grid, &mut rng, top)?;
                row(format!("pair{i}"), compose_check(&f, q, &h1, &h2)?, &f)?;
            }
            for i in 0..*sequences {
                let (f, top) = random_functional(grid, &mut rng, None)?;
                let q = random_q(&mut rng);
                let hs = random_seq(grid, &mut rng, top, *seq_len)?;
                row(format!("seq{i}"), compose_check_seq(&f, q, &hs)?, &f)?;
            }
            for i in 0..*wedges {
                let (f, top) = random_functional(grid, &mut rng, None)?;
                let q = random_q(&mut rng);
                let l1 = rng.random_range(1..=*seq_len);
                let l2 = rng.random_range(1..=*seq_len);
                let h1 = random_seq(grid, &mut rng, top, l1)?;
                let h2 = random_seq(grid, &mut rng, top, l2)?;
                row(format!("wedge{i}"), compose_check_wedge(&f, q, &h1, &h2)?, &f)?;
            }
        }
        TransformCase::Plancherel { id, random, cases, tol } => {
            let mut all = random_cases(grid, &mut rng, *random, true)?;
            all.extend(resolve_cases(cases, grid, base)?);
            for (i, (f, q, h)) in all.iter().enumerate() {
                let (before, after) = plancherel_check(f, *q, h)?;
                rep.rows.push(ReportRow::new(
                    S,
                    id.as_str(),
                    format!("case{i}:norm_ratio"),
                    (after / before - 1.0).abs(),
                    *tol,
                ));
            }
        }
        TransformCase::PlancherelQuadrature { id, case, options, tol } => {
            let f = case.functional.resolve(grid, base)?;
            let h = case.h.resolve(grid, base)?;
            if !in_o_inf_n(f.family(), &h, f.family().tol())? {
                return Err(Error::Membership("the scaled family 𝒜h is not orthonormal".into()));
            }
            let sampled = gfft_general(&f, case.q, &h, options)?;
            for (rho, d) in sampled.rho.iter().zip(&sampled.diffs) {
                let last = d.last().copied().unwrap_or(0.0);
                rep.rows.push(ReportRow::new(
                    S,
                    id.as_str(),
                    format!("eps_diff:rho={rho}"),
                    last,
                    options.tol,
                ));
            }
            let ratio = sampled_norm_ratio(&f, &sampled)?;
            rep.rows
                .push(ReportRow::new(S, id.as_str(), "norm_ratio", (ratio - 1.0).abs(), *tol));
        }
    }
    Ok(rep)
}

fn algebra_case(case: &AlgebraCase, grid: TimeGrid, base: &Path, stream: &RngStream) -> Result<Report> {
    const S: &str = "algebra";
    let mut rep = Report::default();
    let mut rng = stream.rng();
    match case {
        AlgebraCase::QGroup { id, size } => {
            let sample = dyadic_q_sample(*size, &mut rng);
            let mut laws = q_group_laws(&sample);
            let two = QElem::from_q(2.0)?;
            let q22 = q_compose(two, two).q();
            laws.push(LawCheck::exact("q_compose_2_2_is_1", 0, q22 == Some(1.0)));
            let all_cancel = sample.iter().filter_map(|a| a.q()).all(|q| {
                QElem::from_q(q)
                    .and_then(|a| Ok(q_compose(a, QElem::from_q(-q)?)))
                    .is_ok_and(|e| e.is_identity())
            });
            laws.push(LawCheck::exact("q_plus_minus_q_is_identity", 0, all_cancel));
            rep.push_laws(S, id, laws);
        }
        AlgebraCase::Monoid { id, generators, tol } => {
            let gens = generators
                .iter()
                .map(|g| Ok(MonoidElem::new(&g.resolve(grid, base)?)))
                .collect::<Result<Vec<_>>>()?;
            rep.push_laws(S, id, monoid_laws(&gens, *tol)?);
        }
        AlgebraCase::Classes {
            id,
            q,
            generators,
            substitutions,
            tol,
        } => {
            let classes = resolve_classes(generators, grid, base)?
                .into_iter()
                .map(|c| TransformClass::new(*q, c))
                .collect::<Result<Vec<_>>>()?;
            rep.push_laws(S, id, xi_laws(&classes, *tol)?);
            rep.push_laws(S, id, barwedge_well_defined(&classes, *substitutions, *tol, &mut rng)?);
        }
        AlgebraCase::FreeReduction {
            id,
            words,
            max_len,
            generators,
        } => {
            rep.push_laws(S, id, free_reduction_laws(*words, *max_len, *generators, &mut rng));
        }
        AlgebraCase::WordEval {
            id,
            functional,
            q,
            letters,
            words,
            max_len,
            tol,
        } => {
            let f = functional.resolve(grid, base)?;
            let letters = resolve_classes(letters, grid, base)?;
            rep.push_laws(
                S,
                id,
                word_eval_laws(&letters, &f, *q, *words, *max_len, *tol, &mut rng)?,
            );
        }
        AlgebraCase::Word {
            id,
            functional,
            q,
            classes,
            word,
            tol,
        } => {
            let f = functional.resolve(grid, base)?;
            let classes = resolve_classes(classes, grid, base)?;
            let w = word_over_classes(&word_from_letters(word, classes.len())?, &classes);
            let full = word_eval(&w, &f, *q)?;
            let red = word_eval(&word_reduce_classes(&w), &f, *q)?;
            let residual = a2_distance(&full, &red)? / a2_norm(&f)?;
            rep.push_laws(S, id, vec![LawCheck::new("eval_through_reduction", 0, residual, *tol)]);
        }
    }
    Ok(rep)
}

fn resolve_classes(specs: &[Vec<GridFnSpec>], grid: TimeGrid, base: &Path) -> Result<Vec<SeqClass>> {
    specs
        .iter()
        .map(|w| Ok(SeqClass::from_witness(resolve_seq(w, grid, base)?)))
        .collect()
}

fn resolve_cases(
    cases: &[TransformSpec],
    grid: TimeGrid,
    base: &Path,
) -> Result<Vec<(CylinderFunctional, f64, GridFunction)>> {
    cases
        .iter()
        .map(|c| Ok((c.functional.resolve(grid, base)?, c.q, c.h.resolve(grid, base)?)))
        .collect()
}

fn closed(f: &CylinderFunctional) -> Result<&ProductGaussPoly> {
    f.closed_form().ok_or(Error::Unsupported(
        "coefficient comparison needs a product Gaussian-polynomial f",
    ))
}

/// Largest absolute difference over polynomial coefficients, rates and
/// shifts; missing high coefficients count as zero.
pub fn max_coef_diff(a: &ProductGaussPoly, b: &ProductGaussPoly) -> f64 {
    if a.factors.len() != b.factors.len() {
        return f64::INFINITY;
    }
    let zero = Complex64::new(0.0, 0.0);
    a.factors
        .iter()
        .zip(&b.factors)
        .map(|(x, y)| {
            let len = x.poly.len().max(y.poly.len());
            let poly = (0..len)
                .map(|k| (x.poly.get(k).unwrap_or(&zero) - y.poly.get(k).unwrap_or(&zero)).norm())
                .fold(0.0, f64::max);
            poly.max((x.a - y.a).norm()).max((x.b - y.b).norm())
        })
        .fold(0.0, f64::max)
}

/// Worst absolute gap on `r_points` values of `r ∈ [−3, 3]` between the
/// closed-form convolution at `λ = ε − iq` and adaptive quadrature of
/// `∫ g(u) (λ/2πs²)^{1/2} exp(−λ(u−r)²/2s²) du`.
pub fn kernel_oracle_error(g: &GaussPoly, q: f64, s2: f64, eps: f64, r_points: usize) -> Result<f64> {
    let lambda = Complex64::new(eps, -q);
    let closed = g.convolve(Complex64::new(s2, 0.0) / lambda)?;
    let rule = Rule::for_factors(&[g]);
    let lo = rule.nodes.first().copied().unwrap_or(-1.0);
    let hi = rule.nodes.last().copied().unwrap_or(1.0);
    let pad = 0.05 * (hi - lo);
    let norm = (lambda / (TAU * s2)).sqrt();
    let mut worst = 0.0f64;
    for k in 0..r_points {
        let r = -3.0 + 6.0 * k as f64 / (r_points - 1) as f64;
        let integrand = |u: f64| g.eval(u) * norm * (-lambda * (u - r) * (u - r) / (2.0 * s2)).exp();
        let (quad, _) = adaptive_gk15(integrand, lo - pad, hi + pad, 1e-11, 200_000);
        worst = worst.max((closed.eval(r) - quad).norm());
    }
    Ok(worst)
}

fn signed(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    let x = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        x
    } else {
        -x
    }
}

fn random_q(rng: &mut impl Rng) -> f64 {
    loop {
        let q: f64 = rng.random_range(-5.0..=5.0);
        if q != 0.0 {
            return q;
        }
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Degree up to `max_degree`, coefficients in the unit square, `Re a` in
/// `[0.4, 2]`, `Im a` in `[−1, 1]`, both parts of `b` in `[−0.5, 0.5]`.
pub fn random_gauss_poly(rng: &mut impl Rng, max_degree: usize) -> Result<GaussPoly> {
    let degree = rng.random_range(0..=max_degree);
    let poly = (0..=degree)
        .map(|_| c(rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)))
        .collect();
    let a = c(rng.random_range(0.4..=2.0), rng.random_range(-1.0..=1.0));
    let b = c(rng.random_range(-0.5..=0.5), rng.random_range(-0.5..=0.5));
    GaussPoly::new(poly, a, b)
}

/// A closed-form functional over one to three cosine atoms with indices in
/// `1..=4`, normalized or not at random unless fixed by `normalized`; also
/// returns the largest index used.
fn random_functional(
    grid: TimeGrid,
    rng: &mut impl Rng,
    normalized: Option<bool>,
) -> Result<(CylinderFunctional, usize)> {
    let normalized = normalized.unwrap_or_else(|| rng.random_bool(0.5));
    let n = rng.random_range(1..=3);
    let mut idx: Vec<usize> = sample_indices(rng, 4, n).into_iter().map(|i| i + 1).collect();
    idx.sort_unstable();
    let atoms = idx
        .iter()
        .map(|&j| {
            if normalized {
                normalized_cosine_basis(j, grid)
            } else {
                cosine_basis(j, grid)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let family = Arc::new(OrthogonalFamily::new(atoms, DEFAULT_ORTHO_TOL)?);
    let factors = (0..n).map(|_| random_gauss_poly(rng, 4)).collect::<Result<Vec<_>>>()?;
    let f = CylinderFunctional::closed(family, ProductGaussPoly::new(factors)?)?;
    Ok((f, *idx.last().unwrap_or(&0)))
}

/// A weight in `𝒪_∞` of any cosine family with indices up to `top`: a
/// constant or a scaled atom of higher index.
fn random_weight(grid: TimeGrid, rng: &mut impl Rng, top: usize) -> Result<GridFunction> {
    if rng.random_bool(0.5) {
        GridFunction::constant(grid, signed(rng, 0.3, 2.0))
    } else {
        let k = rng.random_range(top + 1..=top + 3);
        Ok(cosine_basis(k, grid)?.scale(signed(rng, 0.5, 2.0)))
    }
}

/// A weight making a normalized cosine family with indices up to `top`
/// orthonormal again: `±1` or `±√2·e_k` with `k > top`.
fn random_orthonormal_weight(grid: TimeGrid, rng: &mut impl Rng, top: usize) -> Result<GridFunction> {
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    if rng.random_bool(0.5) {
        GridFunction::constant(grid, sign)
    } else {
        let k = rng.random_range(top + 1..=top + 3);
        Ok(cosine_basis(k, grid)?.scale(sign * SQRT_2))
    }
}

fn random_seq(grid: TimeGrid, rng: &mut impl Rng, top: usize, len: usize) -> Result<HSeq> {
    HSeq::new(
        grid,
        (0..len).map(|_| random_weight(grid, rng, top)).collect::<Result<_>>()?,
    )
}

fn random_cases(
    grid: TimeGrid,
    rng: &mut impl Rng,
    count: usize,
    orthonormal: bool,
) -> Result<Vec<(CylinderFunctional, f64, GridFunction)>> {
    (0..count)
        .map(|_| {
            let (f, top) = random_functional(grid, rng, orthonormal.then_some(true))?;
            let q = random_q(rng);
            let h = if orthonormal {
                random_orthonormal_weight(grid, rng, top)?
            } else {
                random_weight(grid, rng, top)?
            };
            Ok((f, q, h))
        })
        .collect()
}

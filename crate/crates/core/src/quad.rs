//! Composite Gauss–Legendre rules on finite intervals.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::gauss::GaussPoly;

/// Nodes per panel for composite rules.
pub const PANEL_ORDER: usize = 16;

/// Cap on the number of panels a factor-sized rule may use.
const MAX_PANELS: usize = 20_000;

/// Tail cut: the rule covers the region where `|g| > e^{-TAIL_LOG}·max|g|`.
const TAIL_LOG: f64 = 46.0;

#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// `panels` equal panels on `[lo, hi]`, each with an `order`-point
    /// Gauss–Legendre rule.
    pub fn composite(lo: f64, hi: f64, panels: usize, order: usize) -> Self {
        let panels = panels.max(1);
        let base = GaussLegendre::new(NonZeroUsize::new(order.max(1)).expect("nonzero"));
        let pairs = base.as_node_weight_pairs();
        let width = (hi - lo) / panels as f64;
        let mut nodes = Vec::with_capacity(panels * pairs.len());
        let mut weights = Vec::with_capacity(panels * pairs.len());
        for p in 0..panels {
            let a = lo + p as f64 * width;
            let mid = a + 0.5 * width;
            for &(x, w) in pairs {
                nodes.push(mid + 0.5 * width * x);
                weights.push(0.5 * width * w);
            }
        }
        Self { nodes, weights }
    }

    /// Composite rule with at least `points` nodes on `[lo, hi]`.
    pub fn with_points(lo: f64, hi: f64, points: usize) -> Self {
        let panels = points.div_ceil(PANEL_ORDER).max(1);
        Self::composite(lo, hi, panels, PANEL_ORDER)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| f(x) * w).sum()
    }

    /// A rule resolving products of the given square-integrable factors: it
    /// spans every factor's effective support and uses panels short enough for
    /// both the Gaussian width and the local oscillation frequency.
    pub fn for_factors(factors: &[&GaussPoly]) -> Self {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut min_width = f64::INFINITY;
        for g in factors {
            let ra = g.a.re.max(1e-300);
            let sigma = ra.sqrt().recip();
            let center = g.b.re / ra;
            let reach = sigma * ((2.0 * TAIL_LOG).sqrt() + 2.0 * (g.degree() as f64).sqrt());
            let roots = root_bound(&g.poly);
            lo = lo.min(center - reach).min(-roots);
            hi = hi.max(center + reach).max(roots);
            min_width = min_width.min(sigma);
        }
        let extent = hi.max(-lo);
        let max_freq = factors
            .iter()
            .map(|g| g.a.im.abs() * extent + g.b.im.abs())
            .fold(0.0, f64::max);
        // a 16-point panel resolves about three periods comfortably
        let by_freq = if max_freq > 0.0 {
            3.0 * std::f64::consts::TAU / max_freq
        } else {
            f64::INFINITY
        };
        let panel = (0.5 * min_width).min(by_freq);
        let panels = (((hi - lo) / panel).ceil() as usize).clamp(4, MAX_PANELS);
        Self::composite(lo, hi, panels, PANEL_ORDER)
    }
}

// 15-point Kronrod extension of the 7-point Gauss rule; odd-indexed
// abscissae are the Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> Complex64, lo: f64, hi: f64) -> (Complex64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for i in 0..7 {
        let pair = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        kronrod += pair * WGK[i];
        if i % 2 == 1 {
            gauss += pair * WG[i / 2];
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).norm())
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over
/// `[lo, hi]`: the interval with the largest error estimate is bisected
/// until the summed estimate drops below `abs_tol`.
pub fn adaptive_gk15(
    f: impl Fn(f64) -> Complex64,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> (Complex64, f64) {
    let (v, e) = gk15(&f, lo, hi);
    let mut parts = vec![(lo, hi, v, e)];
    loop {
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= abs_tol || parts.len() >= max_intervals {
            let value = parts.iter().map(|p| p.2).sum();
            return (value, err);
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .3.total_cmp(&b.1 .3))
            .expect("nonempty");
        let (a, b, _, _) = parts.swap_remove(idx);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        parts.push((a, m, v1, e1));
        parts.push((m, b, v2, e2));
    }
}

/// Cauchy bound on the moduli of the polynomial's roots.
fn root_bound(p: &[Complex64]) -> f64 {
    let lead = p.last().map(|c| c.norm()).unwrap_or(0.0);
    if p.len() < 2 || lead == 0.0 {
        return 0.0;
    }
    1.0 + p[..p.len() - 1].iter().map(|c| c.norm() / lead).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composite_integrates_polynomials_exactly() {
        let rule = Rule::composite(-2.0, 3.0, 5, 8);
        assert_eq!(rule.len(), 40);
        let got = rule.integrate(|x| Complex64::new(x.powi(7) - 2.0 * x * x, 0.0));
        let exact = (3f64.powi(8) - 2f64.powi(8)) / 8.0 - 2.0 * (27.0 + 8.0) / 3.0;
        assert!((got.re - exact).abs() < 1e-9 * exact.abs());
        assert!((rule.weights.iter().sum::<f64>() - 5.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_oscillation() {
        // ∫₀^{20} cos(u²) du = √(π/2)·C(20·√(2/π)); compare against a fine composite rule
        let f = |u: f64| Complex64::new((u * u).cos(), 0.0);
        let (got, err) = adaptive_gk15(f, 0.0, 20.0, 1e-12, 10_000);
        let fine = Rule::composite(0.0, 20.0, 4000, 16).integrate(f);
        assert!(err <= 1e-12);
        assert!((got - fine).norm() < 1e-11, "{got} vs {fine}");
        let (poly, _) = adaptive_gk15(|u| Complex64::new(u.powi(5), 0.0), -1.0, 2.0, 1e-14, 100);
        assert!((poly.re - (64.0 - 1.0) / 6.0).abs() < 1e-12);
    }

    #[test]
    fn factor_rule_resolves_oscillating_gaussian() {
        // ∫ exp(−(a) u²/2) with a = 0.02 − 0.5i equals √(2π/a)
        let g = GaussPoly::new(
            vec![Complex64::new(1.0, 0.0)],
            Complex64::new(0.02, -0.5),
            Complex64::new(0.0, 0.0),
        )
        .unwrap();
        let rule = Rule::for_factors(&[&g]);
        let got = rule.integrate(|u| g.eval(u));
        let want = (std::f64::consts::TAU / g.a).sqrt();
        assert!((got - want).norm() < 1e-10, "{got} vs {want}");
    }
}

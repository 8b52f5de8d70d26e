//! Brownian paths, PWZ integrals, the processes `𝒵_h`, and Monte Carlo
//! estimators for functionals of sums of independent `𝒵_h` paths.
//!
//! Estimators never materialize paths: a cylinder functional reads a path
//! only through `⟨α_j, ·⟩`, and `⟨α, 𝒵_h(x,·)⟩ = Σ_k α(t_k) h(t_k) Δx_k`, so
//! each independent path contributes `Σ_k w_{kj} z_k` with precomputed
//! weights and standard normal `z_k`.

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cylinder::{normalized_cosine_basis, CylinderFunctional};
use crate::error::{Error, Result};
use crate::grid::{inner_product, s_combine, s_combine_seq, wedge, GridFunction, HSeq, TimeGrid};
use crate::rng::RngStream;

/// Paths per chunk. Chunk boundaries are fixed so that results do not
/// depend on the number of worker threads.
pub const CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    grid: TimeGrid,
    x: Vec<f64>,
}

impl WienerPath {
    pub fn from_values(grid: TimeGrid, x: Vec<f64>) -> Result<Self> {
        if x.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "path has {} values, grid has {} nodes",
                x.len(),
                grid.len()
            )));
        }
        if x[0] != 0.0 {
            return Err(Error::InvalidArgument("a path must start at 0".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite path value".into()));
        }
        Ok(Self { grid, x })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self {
            grid,
            x: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.x
    }

    pub fn at_horizon(&self) -> f64 {
        self.x[self.x.len() - 1]
    }

    pub fn add(&self, other: &WienerPath) -> Result<WienerPath> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn scale(&self, c: f64) -> WienerPath {
        Self {
            grid: self.grid,
            x: self.x.iter().map(|v| c * v).collect(),
        }
    }
}

/// One Brownian path from independent `N(0, Δt)` increments.
pub fn sample_path(grid: TimeGrid, rng: &RngStream) -> WienerPath {
    let mut r = rng.rng();
    let sd = grid.step().sqrt();
    let mut x = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    x.push(acc);
    for _ in 0..grid.intervals() {
        let z: f64 = StandardNormal.sample(&mut r);
        acc += sd * z;
        x.push(acc);
    }
    WienerPath { grid, x }
}

/// Left-endpoint sum `Σ_k v(t_k)(x(t_{k+1}) − x(t_k))`.
pub fn pwz(v: &GridFunction, x: &WienerPath) -> Result<f64> {
    if v.grid() != &x.grid {
        return Err(Error::GridMismatch);
    }
    Ok(v.values()
        .iter()
        .zip(x.x.windows(2))
        .map(|(v, w)| v * (w[1] - w[0]))
        .sum())
}

/// `Σ_{j≤m} (v, φ_j)₂ ⟨φ_j, x⟩` over the normalized cosine basis.
pub fn pwz_series(v: &GridFunction, x: &WienerPath, m: usize) -> Result<f64> {
    if m < 1 {
        return Err(Error::InvalidArgument("series needs at least one term".into()));
    }
    if v.grid() != &x.grid {
        return Err(Error::GridMismatch);
    }
    let mut total = 0.0;
    for j in 1..=m {
        let phi = normalized_cosine_basis(j, x.grid)?;
        total += inner_product(v, &phi)? * pwz(&phi, x)?;
    }
    Ok(total)
}

/// `𝒵_h(x, t_k) = Σ_{i<k} h(t_i)(x(t_{i+1}) − x(t_i))`.
pub fn z_process(h: &GridFunction, x: &WienerPath) -> Result<WienerPath> {
    if h.grid() != &x.grid {
        return Err(Error::GridMismatch);
    }
    let mut out = Vec::with_capacity(x.x.len());
    let mut acc = 0.0;
    out.push(acc);
    for (hv, w) in h.values().iter().zip(x.x.windows(2)) {
        acc += hv * (w[1] - w[0]);
        out.push(acc);
    }
    Ok(WienerPath { grid: x.grid, x: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: u64,
}

impl MCEstimate {
    /// `|a − b| / √(se_a² + se_b²)`; zero when both means agree exactly.
    pub fn zscore(&self, other: &MCEstimate) -> f64 {
        zscore(self.mean - other.mean, self.stderr.hypot(other.stderr))
    }

    pub fn zscore_against(&self, value: f64) -> f64 {
        zscore(self.mean - value, self.stderr)
    }
}

fn zscore(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        diff.abs() / se
    }
}

/// Real and imaginary parts estimated separately from the same samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexEstimate {
    pub re: MCEstimate,
    pub im: MCEstimate,
}

impl ComplexEstimate {
    pub fn mean(&self) -> Complex64 {
        Complex64::new(self.re.mean, self.im.mean)
    }

    /// The larger of the two componentwise z-scores.
    pub fn zscore(&self, other: &ComplexEstimate) -> f64 {
        self.re.zscore(&other.re).max(self.im.zscore(&other.im))
    }

    pub fn zscore_against(&self, value: Complex64) -> f64 {
        self.re.zscore_against(value.re).max(self.im.zscore_against(value.im))
    }
}

/// Streaming mean and centered second moment.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64) / n as f64;
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self) -> MCEstimate {
        MCEstimate {
            mean: self.mean,
            stderr: (self.variance() / self.n as f64).sqrt(),
            n: self.n,
        }
    }
}

/// Runs `n` samples in fixed chunks, each chunk on its own generator
/// position, and merges per-chunk moments in chunk order.
///
/// `sample` writes `outputs` values per path into its last argument.
pub fn mc_moments<F>(n: usize, outputs: usize, rng: &RngStream, sample: F) -> Result<Vec<Moments>>
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<f64>, &mut [f64]) + Sync,
{
    if n < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {n}")));
    }
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng.chunk_rng(c as u64);
            let count = CHUNK.min(n - c * CHUNK);
            let mut scratch = Vec::new();
            let mut out = vec![0.0; outputs];
            let mut acc = vec![Moments::default(); outputs];
            for _ in 0..count {
                sample(&mut r, &mut scratch, &mut out);
                for (m, &v) in acc.iter_mut().zip(&out) {
                    m.push(v);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::default(); outputs];
    for part in &parts {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total)
}

/// Draws `Σ_b ⟨α_j, c_b 𝒵_{h_b}(x_b,·)⟩ + offset_j` for independent paths `x_b`.
#[derive(Debug, Clone)]
pub struct PwzSampler {
    atoms: usize,
    steps: usize,
    // per block, k-major: weights[b][k * atoms + j]
    weights: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

impl PwzSampler {
    pub fn new(atoms: &[&GridFunction], blocks: &[(&GridFunction, f64)], offset: Vec<f64>) -> Result<Self> {
        let grid = match (atoms.first(), blocks.first()) {
            (Some(a), _) => *a.grid(),
            (None, Some((h, _))) => *h.grid(),
            (None, None) => return Err(Error::InvalidArgument("sampler needs atoms or blocks".into())),
        };
        if atoms.iter().any(|a| a.grid() != &grid) || blocks.iter().any(|(h, _)| h.grid() != &grid) {
            return Err(Error::GridMismatch);
        }
        if offset.len() != atoms.len() {
            return Err(Error::ArityMismatch {
                expected: atoms.len(),
                got: offset.len(),
            });
        }
        let m = atoms.len();
        let steps = grid.intervals();
        let sd = grid.step().sqrt();
        let weights = blocks
            .iter()
            .map(|(h, c)| {
                let mut w = vec![0.0; steps * m];
                for k in 0..steps {
                    let hk = h.values()[k] * sd * c;
                    for (j, a) in atoms.iter().enumerate() {
                        w[k * m + j] = a.values()[k] * hk;
                    }
                }
                w
            })
            .collect();
        Ok(Self {
            atoms: m,
            steps,
            weights,
            offset,
        })
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        out.copy_from_slice(&self.offset);
        let m = self.atoms;
        for w in &self.weights {
            for k in 0..self.steps {
                let z: f64 = StandardNormal.sample(rng);
                let row = &w[k * m..(k + 1) * m];
                for (o, wk) in out.iter_mut().zip(row) {
                    *o += wk * z;
                }
            }
        }
    }
}

/// `E[F_i(y + Σ_b c_b 𝒵_{h_b}(x_b,·))]` for every functional, all evaluated
/// on the same draws.
pub fn estimate_functionals(
    functionals: &[&CylinderFunctional],
    blocks: &[(&GridFunction, f64)],
    y: Option<&WienerPath>,
    n: usize,
    rng: &RngStream,
) -> Result<Vec<ComplexEstimate>> {
    let mut atoms: Vec<&GridFunction> = Vec::new();
    let mut spans = Vec::with_capacity(functionals.len());
    for f in functionals {
        let start = atoms.len();
        atoms.extend(f.family().atoms());
        spans.push(start..atoms.len());
    }
    let offset = match y {
        Some(y) => atoms.iter().map(|a| pwz(a, y)).collect::<Result<_>>()?,
        None => vec![0.0; atoms.len()],
    };
    let sampler = PwzSampler::new(&atoms, blocks, offset)?;
    let moments = mc_moments(n, 2 * functionals.len(), rng, |r, scratch, out| {
        scratch.resize(sampler.atoms(), 0.0);
        sampler.sample(r, scratch);
        for (i, (f, span)) in functionals.iter().zip(&spans).enumerate() {
            let v = f.eval_coords(&scratch[span.clone()]);
            out[2 * i] = v.re;
            out[2 * i + 1] = v.im;
        }
    })?;
    Ok(moments
        .chunks(2)
        .map(|p| ComplexEstimate {
            re: p[0].estimate(),
            im: p[1].estimate(),
        })
        .collect())
}

/// Two-path estimate of `E F(𝒵_{h₁}(x₁,·) + 𝒵_{h₂}(x₂,·))` and one-path
/// estimate of `E F(𝒵_{s(h₁,h₂)}(x,·))`, from independent streams.
pub fn verify_rotation2(
    functional: &CylinderFunctional,
    h1: &GridFunction,
    h2: &GridFunction,
    n: usize,
    rng: &RngStream,
) -> Result<(ComplexEstimate, ComplexEstimate)> {
    Ok(verify_rotation2_many(&[functional], h1, h2, n, rng)?[0])
}

/// [`verify_rotation2`] for several functionals sharing the same draws.
pub fn verify_rotation2_many(
    functionals: &[&CylinderFunctional],
    h1: &GridFunction,
    h2: &GridFunction,
    n: usize,
    rng: &RngStream,
) -> Result<Vec<(ComplexEstimate, ComplexEstimate)>> {
    let s = s_combine(h1, h2)?;
    let two = estimate_functionals(functionals, &[(h1, 1.0), (h2, 1.0)], None, n, &rng.derive(1))?;
    let one = estimate_functionals(functionals, &[(&s, 1.0)], None, n, &rng.derive(2))?;
    Ok(two.into_iter().zip(one).collect())
}

/// Three estimates of one value: the sum over `|ℋ| + 1` independent paths,
/// `𝒵_{s(ℋ)}(x₁,·) + 𝒵_{h_extra}(x₂,·)`, and `𝒵_{s(ℋ ∧ (h_extra))}(x,·)`.
pub fn verify_rotation_seq(
    functional: &CylinderFunctional,
    hs: &HSeq,
    h_extra: &GridFunction,
    n: usize,
    rng: &RngStream,
) -> Result<(ComplexEstimate, ComplexEstimate, ComplexEstimate)> {
    Ok(verify_rotation_seq_many(&[functional], hs, h_extra, n, rng)?[0])
}

pub fn verify_rotation_seq_many(
    functionals: &[&CylinderFunctional],
    hs: &HSeq,
    h_extra: &GridFunction,
    n: usize,
    rng: &RngStream,
) -> Result<Vec<(ComplexEstimate, ComplexEstimate, ComplexEstimate)>> {
    if hs.is_empty() {
        return Err(Error::InvalidArgument("the weight sequence is empty".into()));
    }
    if hs.grid() != h_extra.grid() {
        return Err(Error::GridMismatch);
    }
    let s = s_combine_seq(hs);
    let all = s_combine_seq(&wedge(hs, &HSeq::singleton(h_extra.clone()))?);
    let mut blocks: Vec<(&GridFunction, f64)> = hs.items().iter().map(|h| (h, 1.0)).collect();
    blocks.push((h_extra, 1.0));
    let many = estimate_functionals(functionals, &blocks, None, n, &rng.derive(1))?;
    let two = estimate_functionals(functionals, &[(&s, 1.0), (h_extra, 1.0)], None, n, &rng.derive(2))?;
    let one = estimate_functionals(functionals, &[(&all, 1.0)], None, n, &rng.derive(3))?;
    Ok(many
        .into_iter()
        .zip(two)
        .zip(one)
        .map(|((a, b), c)| (a, b, c))
        .collect())
}

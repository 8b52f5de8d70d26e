//! Transform monoids, their quotient by s-equivalence, the isomorphism Ξ,
//! free-group words over transform classes, and law checkers for all of
//! them.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cylinder::{a2_distance, a2_norm, CylinderFunctional};
use crate::error::{Error, Result};
use crate::gfft::{gfft, q_compose, QElem};
use crate::grid::{s_combine, s_combine_seq, wedge, GridFunction, HSeq, TimeGrid, DEFAULT_EQUIV_TOL};

/// Canonical nonnegative weight; the zero function is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct MonoidElem {
    rep: GridFunction,
}

impl MonoidElem {
    pub fn new(h: &GridFunction) -> Self {
        Self { rep: h.abs() }
    }

    pub fn identity(grid: TimeGrid) -> Self {
        Self {
            rep: GridFunction::zero(grid),
        }
    }

    pub fn rep(&self) -> &GridFunction {
        &self.rep
    }

    pub fn is_identity(&self) -> bool {
        self.rep.is_zero()
    }

    /// Largest nodewise difference of the reps.
    pub fn distance(&self, other: &MonoidElem) -> Result<f64> {
        self.rep.max_abs_diff(&other.rep)
    }
}

pub fn monoid_op(a: &MonoidElem, b: &MonoidElem) -> Result<MonoidElem> {
    Ok(MonoidElem {
        rep: s_combine(&a.rep, &b.rep)?,
    })
}

/// An s-equivalence class `[ℋ]_s` with one member kept as witness.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqClass {
    class_rep: GridFunction,
    witness: HSeq,
}

impl SeqClass {
    pub fn from_witness(witness: HSeq) -> Self {
        Self {
            class_rep: s_combine_seq(&witness),
            witness,
        }
    }

    pub fn identity(grid: TimeGrid) -> Self {
        Self::from_witness(HSeq::empty(grid))
    }

    pub fn class_rep(&self) -> &GridFunction {
        &self.class_rep
    }

    pub fn witness(&self) -> &HSeq {
        &self.witness
    }

    pub fn is_identity(&self) -> bool {
        self.class_rep.is_zero()
    }

    /// Replaces the witness by another member of the same class.
    pub fn with_witness(&self, witness: HSeq, tol: f64) -> Result<Self> {
        let other = Self::from_witness(witness);
        if !self.equivalent(&other, tol)? {
            return Err(Error::InvalidArgument(
                "witness is not s-equivalent to the class".into(),
            ));
        }
        Ok(Self {
            class_rep: self.class_rep.clone(),
            witness: other.witness,
        })
    }

    /// Equal sums of squares, nodewise within `tol`.
    pub fn equivalent(&self, other: &SeqClass, tol: f64) -> Result<bool> {
        Ok(self.square_gap(other)? <= tol)
    }

    /// Largest nodewise difference of `s²`.
    pub fn square_gap(&self, other: &SeqClass) -> Result<f64> {
        let a = self.class_rep.map(|v| v * v);
        let b = other.class_rep.map(|v| v * v);
        a.max_abs_diff(&b)
    }
}

/// `[ℋ₁]_s ∧ [ℋ₂]_s = [ℋ₁ ∧ ℋ₂]_s`.
pub fn class_wedge(a: &SeqClass, b: &SeqClass) -> Result<SeqClass> {
    Ok(SeqClass::from_witness(wedge(&a.witness, &b.witness)?))
}

/// `[T_{q,s(ℋ)}]_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformClass {
    q: f64,
    cls: SeqClass,
}

impl TransformClass {
    pub fn new(q: f64, cls: SeqClass) -> Result<Self> {
        QElem::from_q(q)?;
        Ok(Self { q, cls })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn class(&self) -> &SeqClass {
        &self.cls
    }

    pub fn equivalent(&self, other: &TransformClass, tol: f64) -> Result<bool> {
        Ok(self.q == other.q && self.cls.equivalent(&other.cls, tol)?)
    }

    pub fn apply(&self, functional: &CylinderFunctional) -> Result<CylinderFunctional> {
        gfft(functional, self.q, &self.cls.class_rep)
    }
}

/// `[T]_t ⊼ [T′]_t = [T_{q,s(ℋ₁∧ℋ₂)}]_t`.
pub fn barwedge(t1: &TransformClass, t2: &TransformClass) -> Result<TransformClass> {
    if t1.q != t2.q {
        return Err(Error::InvalidArgument(format!(
            "⊼ needs one q, got {} and {}",
            t1.q, t2.q
        )));
    }
    Ok(TransformClass {
        q: t1.q,
        cls: class_wedge(&t1.cls, &t2.cls)?,
    })
}

pub fn xi(t: &TransformClass) -> SeqClass {
    t.cls.clone()
}

pub fn xi_inv(c: &SeqClass, q: f64) -> Result<TransformClass> {
    TransformClass::new(q, c.clone())
}

/// Another member of the class of `h`: a random mix of permuting, splitting
/// `h` into `(h cos θ, h sin θ)` and merging two items into their `s`.
pub fn resample_witness(h: &HSeq, rng: &mut impl Rng) -> Result<HSeq> {
    let mut items = h.items().to_vec();
    for _ in 0..3 {
        match rng.random_range(0..3) {
            0 => items.shuffle(rng),
            1 if !items.is_empty() => {
                let i = rng.random_range(0..items.len());
                let theta: f64 = rng.random_range(0.1..1.4);
                let it = items.remove(i);
                items.insert(i, it.scale(theta.sin()));
                items.insert(i, it.scale(theta.cos()));
            }
            2 if items.len() >= 2 => {
                let i = rng.random_range(0..items.len() - 1);
                let a = items.remove(i);
                let b = items.remove(i);
                items.insert(i, s_combine(&a, &b)?);
            }
            _ => {}
        }
    }
    HSeq::new(*h.grid(), items)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn apply(self, q: f64) -> f64 {
        match self {
            Sign::Plus => q,
            Sign::Minus => -q,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(format!("sign must be 1 or -1, got {v}")),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// A word over signed generators of type `G`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupWord<G> {
    pub letters: Vec<(Sign, G)>,
}

impl<G> Default for GroupWord<G> {
    fn default() -> Self {
        Self { letters: Vec::new() }
    }
}

impl<G: Clone> GroupWord<G> {
    pub fn new(letters: Vec<(Sign, G)>) -> Self {
        Self { letters }
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Self {
        Self {
            letters: self.letters.iter().rev().map(|(s, g)| (s.flip(), g.clone())).collect(),
        }
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut letters = self.letters.clone();
        letters.extend(other.letters.iter().cloned());
        Self { letters }
    }
}

fn cancels<G>(a: &(Sign, G), b: &(Sign, G), same: &impl Fn(&G, &G) -> bool) -> bool {
    a.0 != b.0 && same(&a.1, &b.1)
}

/// Free reduction with a caller-supplied generator equality.
pub fn word_reduce_by<G: Clone>(w: &GroupWord<G>, same: impl Fn(&G, &G) -> bool) -> GroupWord<G> {
    let mut stack: Vec<(Sign, G)> = Vec::with_capacity(w.letters.len());
    for letter in &w.letters {
        if stack.last().is_some_and(|top| cancels(top, letter, &same)) {
            stack.pop();
        } else {
            stack.push(letter.clone());
        }
    }
    GroupWord { letters: stack }
}

pub fn word_reduce<G: Clone + PartialEq>(w: &GroupWord<G>) -> GroupWord<G> {
    word_reduce_by(w, |a, b| a == b)
}

/// Free reduction of word over s-classes; letters match when their classes
/// are s-equivalent within the default tolerance.
pub fn word_reduce_classes(w: &GroupWord<SeqClass>) -> GroupWord<SeqClass> {
    word_reduce_by(w, |a, b| a.equivalent(b, DEFAULT_EQUIV_TOL).unwrap_or(false))
}

/// Reduction that cancels a randomly chosen adjacent inverse pair at each
/// step. Agreement with [`word_reduce`] witnesses confluence.
pub fn word_reduce_random_order<G: Clone + PartialEq>(w: &GroupWord<G>, rng: &mut impl Rng) -> GroupWord<G> {
    let same = |a: &G, b: &G| a == b;
    let mut letters = w.letters.clone();
    loop {
        let spots: Vec<usize> = (0..letters.len().saturating_sub(1))
            .filter(|&i| cancels(&letters[i], &letters[i + 1], &same))
            .collect();
        if spots.is_empty() {
            return GroupWord { letters };
        }
        let i = spots[rng.random_range(0..spots.len())];
        letters.drain(i..i + 2);
    }
}

pub fn is_reduced<G: PartialEq>(w: &GroupWord<G>) -> bool {
    let same = |a: &G, b: &G| a == b;
    w.letters.windows(2).all(|p| !cancels(&p[0], &p[1], &same))
}

/// Applies the letters right to left: the last letter acts first, `+` with
/// parameter `q` and `−` with `−q`.
pub fn word_eval(w: &GroupWord<SeqClass>, functional: &CylinderFunctional, q: f64) -> Result<CylinderFunctional> {
    QElem::from_q(q)?;
    let mut out = functional.clone();
    for (sign, cls) in w.letters.iter().rev() {
        out = gfft(&out, sign.apply(q), cls.class_rep())?;
    }
    Ok(out)
}

/// One law evaluated on one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawCheck {
    pub law: String,
    pub sample_id: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl LawCheck {
    pub fn new(law: &str, sample_id: usize, residual: f64, tol: f64) -> Self {
        Self {
            law: law.to_string(),
            sample_id,
            residual,
            tolerance: tol,
            pass: residual <= tol,
        }
    }

    /// Residual 0 on success; used for laws that must hold exactly.
    pub fn exact(law: &str, sample_id: usize, holds: bool) -> Self {
        Self {
            law: law.to_string(),
            sample_id,
            residual: if holds { 0.0 } else { 1.0 },
            tolerance: 0.0,
            pass: holds,
        }
    }
}

fn worst(law: &str, sample_id: usize, residuals: impl Iterator<Item = f64>, tol: f64) -> LawCheck {
    LawCheck::new(law, sample_id, residuals.fold(0.0, f64::max), tol)
}

/// A sample of q-group elements with dyadic `r`, whose sums are exact.
pub fn dyadic_q_sample(size: usize, rng: &mut impl Rng) -> Vec<QElem> {
    let mut out = vec![QElem::IDENTITY];
    while out.len() < size {
        let k: i32 = rng.random_range(-4096..=4096);
        out.push(QElem { r: k as f64 / 256.0 });
    }
    out
}

/// Closure, associativity, commutativity, identity and inverse of
/// [`q_compose`], all exact, plus agreement of nonidentity products with
/// `q₁q₂/(q₁+q₂)` to relative rounding.
pub fn q_group_laws(sample: &[QElem]) -> Vec<LawCheck> {
    let n = sample.len();
    let mut closure = true;
    let mut assoc = true;
    let mut comm = true;
    let mut ident = true;
    let mut inverse = true;
    let mut formula = 0.0f64;
    for (i, &a) in sample.iter().enumerate() {
        ident &= q_compose(QElem::IDENTITY, a) == a && q_compose(a, QElem::IDENTITY) == a;
        inverse &= q_compose(a, a.inverse()).is_identity();
        for (j, &b) in sample.iter().enumerate() {
            let ab = q_compose(a, b);
            closure &= ab.r.is_finite();
            comm &= ab == q_compose(b, a);
            let c = sample[(i + 7 * j + 1) % n];
            assoc &= q_compose(ab, c) == q_compose(a, q_compose(b, c));
            if let (Some(q1), Some(q2), Some(q)) = (a.q(), b.q(), ab.q()) {
                let direct = q1 * q2 / (q1 + q2);
                formula = formula.max(((q - direct) / direct).abs());
            }
        }
    }
    vec![
        LawCheck::exact("q_closure", 0, closure),
        LawCheck::exact("q_associativity", 0, assoc),
        LawCheck::exact("q_commutativity", 0, comm),
        LawCheck::exact("q_identity", 0, ident),
        LawCheck::exact("q_inverse", 0, inverse),
        LawCheck::new("q_index_formula", 0, formula, 1e-12),
    ]
}

/// Associativity, commutativity and identity of [`monoid_op`] over every
/// pair and triple of generators.
pub fn monoid_laws(gens: &[MonoidElem], tol: f64) -> Result<Vec<LawCheck>> {
    let Some(first) = gens.first() else {
        return Ok(Vec::new());
    };
    let e = MonoidElem::identity(*first.rep().grid());
    let mut assoc = Vec::new();
    let mut comm = Vec::new();
    let mut ident = Vec::new();
    for a in gens {
        ident.push(monoid_op(&e, a)?.distance(a)?.max(monoid_op(a, &e)?.distance(a)?));
        for b in gens {
            let ab = monoid_op(a, b)?;
            comm.push(ab.distance(&monoid_op(b, a)?)?);
            for c in gens {
                assoc.push(monoid_op(&ab, c)?.distance(&monoid_op(a, &monoid_op(b, c)?)?)?);
            }
        }
    }
    Ok(vec![
        worst("monoid_associativity", 0, assoc.into_iter(), tol),
        worst("monoid_commutativity", 0, comm.into_iter(), tol),
        worst("monoid_identity", 0, ident.into_iter(), tol),
    ])
}

/// Laws of `⊼` and Ξ over all pairs and triples of the given classes:
/// associativity, commutativity, identity, `Ξ⁻¹∘Ξ = id`, the homomorphism
/// property, and injectivity (classes that differ stay different under Ξ).
pub fn xi_laws(classes: &[TransformClass], tol: f64) -> Result<Vec<LawCheck>> {
    let Some(first) = classes.first() else {
        return Ok(Vec::new());
    };
    let q = first.q();
    let grid = *first.class().class_rep().grid();
    let e = TransformClass::new(q, SeqClass::identity(grid))?;
    let gap = |a: &TransformClass, b: &TransformClass| -> Result<f64> {
        if a.q() != b.q() {
            return Ok(f64::INFINITY);
        }
        a.class().square_gap(b.class())
    };
    let (mut assoc, mut comm, mut ident, mut roundtrip, mut hom) = (vec![], vec![], vec![], vec![], vec![]);
    let mut injective = true;
    for a in classes {
        ident.push(gap(&barwedge(&e, a)?, a)?.max(gap(&barwedge(a, &e)?, a)?));
        roundtrip.push(gap(&xi_inv(&xi(a), q)?, a)?);
        for b in classes {
            let ab = barwedge(a, b)?;
            comm.push(gap(&ab, &barwedge(b, a)?)?);
            hom.push(xi(&ab).square_gap(&class_wedge(&xi(a), &xi(b))?)?);
            let differ = !a.equivalent(b, tol)?;
            injective &= !differ || !xi(a).equivalent(&xi(b), tol)?;
            for c in classes {
                assoc.push(gap(&barwedge(&ab, c)?, &barwedge(a, &barwedge(b, c)?)?)?);
            }
        }
    }
    let xi_identity = xi(&e).is_identity();
    Ok(vec![
        worst("barwedge_associativity", 0, assoc.into_iter(), tol),
        worst("barwedge_commutativity", 0, comm.into_iter(), tol),
        worst("barwedge_identity", 0, ident.into_iter(), tol),
        worst("xi_roundtrip", 0, roundtrip.into_iter(), tol),
        worst("xi_homomorphism", 0, hom.into_iter(), tol),
        LawCheck::exact("xi_injective", 0, injective),
        LawCheck::exact("xi_identity", 0, xi_identity),
    ])
}

/// Well-definedness of `⊼`: for each substitution, both inputs get fresh
/// witnesses from their classes and the output class must not move.
pub fn barwedge_well_defined(
    classes: &[TransformClass],
    substitutions: usize,
    tol: f64,
    rng: &mut impl Rng,
) -> Result<Vec<LawCheck>> {
    let mut out = Vec::with_capacity(substitutions);
    if classes.is_empty() {
        return Ok(out);
    }
    for id in 0..substitutions {
        let a = &classes[rng.random_range(0..classes.len())];
        let b = &classes[rng.random_range(0..classes.len())];
        let a2 = TransformClass::new(
            a.q(),
            a.class()
                .with_witness(resample_witness(a.class().witness(), rng)?, tol)?,
        )?;
        let b2 = TransformClass::new(
            b.q(),
            b.class()
                .with_witness(resample_witness(b.class().witness(), rng)?, tol)?,
        )?;
        let residual = barwedge(a, b)?.class().square_gap(barwedge(&a2, &b2)?.class())?;
        out.push(LawCheck::new("barwedge_well_defined", id, residual, tol));
    }
    Ok(out)
}

/// Random word over generators `0..gens`, with inverse pairs planted so
/// that reduction has work to do.
pub fn random_word(max_len: usize, gens: u32, rng: &mut impl Rng) -> GroupWord<u32> {
    let len = rng.random_range(0..=max_len);
    let mut letters: Vec<(Sign, u32)> = Vec::with_capacity(len);
    while letters.len() < len {
        let g = rng.random_range(0..gens.max(1));
        let s = if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus };
        if letters.len() + 2 <= len && rng.random_bool(0.3) {
            let at = rng.random_range(0..=letters.len());
            letters.insert(at, (s.flip(), g));
            letters.insert(at, (s, g));
        } else {
            letters.push((s, g));
        }
    }
    GroupWord { letters }
}

/// Idempotence, reducedness, length monotonicity and confluence of free
/// reduction on `count` random words; one aggregated row per law.
pub fn free_reduction_laws(count: usize, max_len: usize, gens: u32, rng: &mut impl Rng) -> Vec<LawCheck> {
    let (mut idem, mut reduced, mut shorter, mut confluent, mut inverse) = (true, true, true, true, true);
    for _ in 0..count {
        let w = random_word(max_len, gens, rng);
        let r = word_reduce(&w);
        idem &= word_reduce(&r) == r;
        reduced &= is_reduced(&r);
        shorter &= r.len() <= w.len() && (r.len() % 2 == w.len() % 2);
        confluent &= word_reduce_random_order(&w, rng) == r;
        inverse &= word_reduce(&w.concat(&w.inverse())).is_empty();
    }
    vec![
        LawCheck::exact("reduce_idempotent", 0, idem),
        LawCheck::exact("reduce_is_reduced", 0, reduced),
        LawCheck::exact("reduce_length", 0, shorter),
        LawCheck::exact("reduce_confluent", 0, confluent),
        LawCheck::exact("word_inverse", 0, inverse),
    ]
}

/// For random words over the given letters: evaluation factors through
/// reduction, and each letter preserves the norm.
pub fn word_eval_laws(
    letters: &[SeqClass],
    functional: &CylinderFunctional,
    q: f64,
    words: usize,
    max_len: usize,
    tol: f64,
    rng: &mut impl Rng,
) -> Result<Vec<LawCheck>> {
    let mut out = Vec::new();
    if letters.is_empty() {
        return Ok(out);
    }
    let base = a2_norm(functional)?;
    for id in 0..words {
        let shape = random_word(max_len, letters.len() as u32, rng);
        let w = GroupWord {
            letters: shape
                .letters
                .iter()
                .map(|(s, g)| (*s, letters[*g as usize].clone()))
                .collect(),
        };
        let full = word_eval(&w, functional, q)?;
        let red = word_eval(&word_reduce_classes(&w), functional, q)?;
        out.push(LawCheck::new(
            "eval_through_reduction",
            id,
            a2_distance(&full, &red)? / base,
            tol,
        ));

        let mut cur = functional.clone();
        let mut drift = 0.0f64;
        for (sign, cls) in w.letters.iter().rev() {
            let next = gfft(&cur, sign.apply(q), cls.class_rep())?;
            let (before, after) = (a2_norm(&cur)?, a2_norm(&next)?);
            drift = drift.max((after / before - 1.0).abs());
            cur = next;
        }
        out.push(LawCheck::new("letterwise_norm", id, drift, tol));
    }
    Ok(out)
}

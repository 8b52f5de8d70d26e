//! JSON configuration: weights, families, functionals, suite cases, words.
//!
//! Complex numbers are `[re, im]` pairs. Unknown keys are rejected
//! everywhere.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{GroupWord, SeqClass, Sign};
use crate::cylinder::{
    cosine_basis, normalized_cosine_basis, BlackBoxF, BuiltinFn, CylinderFunctional, FunctionalForm, OrthogonalFamily,
    ProductGaussPoly, DEFAULT_ORTHO_TOL,
};
use crate::error::{Error, Result};
use crate::gfft::GeneralOptions;
use crate::grid::{GridFunction, HSeq, TimeGrid};

/// The bundled configuration covering every acceptance check.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

/// A grid function: `{"cosine": j}`, `{"cosine_normalized": j}`,
/// `{"constant": c}`, `{"csv": "path"}` or `{"scaled": {"factor": c, "of": …}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridFnSpec {
    Cosine(usize),
    CosineNormalized(usize),
    Constant(f64),
    Csv(PathBuf),
    Scaled { factor: f64, of: Box<GridFnSpec> },
}

impl GridFnSpec {
    /// CSV paths are taken relative to `base`.
    pub fn resolve(&self, grid: TimeGrid, base: &Path) -> Result<GridFunction> {
        match self {
            GridFnSpec::Cosine(j) => cosine_basis(*j, grid),
            GridFnSpec::CosineNormalized(j) => normalized_cosine_basis(*j, grid),
            GridFnSpec::Constant(c) => GridFunction::constant(grid, *c),
            GridFnSpec::Csv(path) => {
                let full = base.join(path);
                let f = GridFunction::read_csv(File::open(&full)?)?;
                if f.grid() != &grid {
                    return Err(Error::GridMismatch);
                }
                Ok(f)
            }
            GridFnSpec::Scaled { factor, of } => {
                if !factor.is_finite() {
                    return Err(Error::InvalidArgument("scale factor must be finite".into()));
                }
                Ok(of.resolve(grid, base)?.scale(*factor))
            }
        }
    }
}

pub fn resolve_seq(specs: &[GridFnSpec], grid: TimeGrid, base: &Path) -> Result<HSeq> {
    HSeq::new(
        grid,
        specs.iter().map(|s| s.resolve(grid, base)).collect::<Result<_>>()?,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlackBoxSpec {
    pub builtin: BuiltinFn,
    pub half_width: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FSpec {
    Pgp(ProductGaussPoly),
    Blackbox(BlackBoxSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionalSpec {
    pub family: Vec<GridFnSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub f: FSpec,
}

impl FunctionalSpec {
    pub fn resolve(&self, grid: TimeGrid, base: &Path) -> Result<CylinderFunctional> {
        let atoms = self
            .family
            .iter()
            .map(|s| s.resolve(grid, base))
            .collect::<Result<_>>()?;
        let family = Arc::new(OrthogonalFamily::new(atoms, self.tol.unwrap_or(DEFAULT_ORTHO_TOL))?);
        let form = match &self.f {
            FSpec::Pgp(p) => FunctionalForm::Closed(ProductGaussPoly::new(p.factors.clone())?),
            FSpec::Blackbox(b) => {
                FunctionalForm::BlackBox(BlackBoxF::builtin(b.builtin.clone(), b.half_width, b.points)?)
            }
        };
        CylinderFunctional::new(family, form)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Rotation,
    Transform,
    Algebra,
    #[default]
    All,
}

impl Suite {
    pub fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Rotation => "rotation",
            Suite::Transform => "transform",
            Suite::Algebra => "algebra",
            Suite::All => "all",
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown suite {s:?}; expected rotation, transform, algebra or all"))
    }
}

/// Monte Carlo cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RotationCase {
    /// Two-path versus one-path estimates for each functional.
    Pair {
        id: String,
        functionals: Vec<FunctionalSpec>,
        h1: GridFnSpec,
        h2: GridFnSpec,
    },
    /// The three sequence estimators, compared pairwise.
    Sequence {
        id: String,
        functionals: Vec<FunctionalSpec>,
        hs: Vec<GridFnSpec>,
        extra: GridFnSpec,
    },
    /// Monte Carlo `T_{λ,h}F(y)` against the closed form; `y` is the zero
    /// path unless `y_stream` selects a sampled one.
    Continuation {
        id: String,
        functionals: Vec<FunctionalSpec>,
        h: GridFnSpec,
        lambdas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y_stream: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformSpec {
    pub functional: FunctionalSpec,
    pub q: f64,
    pub h: GridFnSpec,
}

/// Closed-form and quadrature transform cases. `random` counts draw
/// functionals, `q` and weights from the seeded generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformCase {
    /// Closed-form damped kernel against adaptive quadrature.
    KernelOracle {
        id: String,
        count: usize,
        max_degree: usize,
        eps: Vec<f64>,
        r_points: usize,
        tol: f64,
    },
    /// `T_{−q,h}(T_{q,h}F) = F`, coefficientwise.
    Inverse {
        id: String,
        #[serde(default)]
        random: usize,
        #[serde(default)]
        cases: Vec<TransformSpec>,
        tol: f64,
    },
    /// Composition residuals relative to `‖F‖`: pairs, sequences of length
    /// `seq_len`, and wedges.
    Compose {
        id: String,
        pairs: usize,
        sequences: usize,
        wedges: usize,
        seq_len: usize,
        tol: f64,
    },
    /// `|‖TF‖/‖F‖ − 1|` with `𝒜h` orthonormal.
    Plancherel {
        id: String,
        #[serde(default)]
        random: usize,
        #[serde(default)]
        cases: Vec<TransformSpec>,
        tol: f64,
    },
    /// Norm ratio of a black-box transform by regularized quadrature.
    PlancherelQuadrature {
        id: String,
        case: TransformSpec,
        options: GeneralOptions,
        tol: f64,
    },
}

/// Algebraic law cases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraCase {
    QGroup {
        id: String,
        size: usize,
    },
    Monoid {
        id: String,
        generators: Vec<GridFnSpec>,
        tol: f64,
    },
    /// ⊼ and Ξ tables over classes given by witness sequences, plus random
    /// witness substitutions.
    Classes {
        id: String,
        q: f64,
        generators: Vec<Vec<GridFnSpec>>,
        substitutions: usize,
        tol: f64,
    },
    FreeReduction {
        id: String,
        words: usize,
        max_len: usize,
        generators: u32,
    },
    WordEval {
        id: String,
        functional: FunctionalSpec,
        q: f64,
        letters: Vec<Vec<GridFnSpec>>,
        words: usize,
        max_len: usize,
        tol: f64,
    },
    /// One explicit word: evaluation factors through reduction.
    Word {
        id: String,
        functional: FunctionalSpec,
        q: f64,
        classes: Vec<Vec<GridFnSpec>>,
        word: Vec<LetterSpec>,
        tol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LetterSpec {
    pub sign: Sign,
    pub class_ref: usize,
}

/// Parses `[{"sign": ±1, "class_ref": i}, …]` into a word over `0..classes`.
pub fn parse_word(json: &str, classes: usize) -> Result<GroupWord<usize>> {
    let letters: Vec<LetterSpec> = serde_json::from_str(json)?;
    word_from_letters(&letters, classes)
}

pub fn word_from_letters(letters: &[LetterSpec], classes: usize) -> Result<GroupWord<usize>> {
    letters
        .iter()
        .map(|l| {
            if l.class_ref >= classes {
                Err(Error::OutOfRange {
                    what: "class_ref",
                    value: l.class_ref as f64,
                    lo: 0.0,
                    hi: classes.saturating_sub(1) as f64,
                })
            } else {
                Ok((l.sign, l.class_ref))
            }
        })
        .collect::<Result<_>>()
        .map(GroupWord::new)
}

pub fn word_over_classes(word: &GroupWord<usize>, classes: &[SeqClass]) -> GroupWord<SeqClass> {
    GroupWord::new(word.letters.iter().map(|(s, i)| (*s, classes[*i].clone())).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub suite: Suite,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
    pub n: usize,
    pub seed: u64,
    #[serde(default)]
    pub rotation: Vec<RotationCase>,
    #[serde(default)]
    pub transform: Vec<TransformCase>,
    #[serde(default)]
    pub algebra: Vec<AlgebraCase>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.horizon, self.intervals)
    }

    /// Structural checks that need no grid functions.
    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if self.n < 2 {
            return Err(Error::InvalidArgument(format!("n = {} must be at least 2", self.n)));
        }
        let mut ids = std::collections::HashSet::new();
        let all_ids = self
            .rotation
            .iter()
            .map(RotationCase::id)
            .chain(self.transform.iter().map(TransformCase::id))
            .chain(self.algebra.iter().map(AlgebraCase::id));
        for id in all_ids {
            if id.is_empty() || id.contains([',', '"', '\n', '\r']) {
                return Err(Error::InvalidArgument(format!(
                    "case id {id:?} must be nonempty without commas, quotes or newlines"
                )));
            }
            if !ids.insert(id.to_string()) {
                return Err(Error::InvalidArgument(format!("duplicate case id {id:?}")));
            }
        }
        for c in &self.rotation {
            if let RotationCase::Continuation { lambdas, .. } = c {
                if lambdas.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                    return Err(Error::InvalidArgument("continuation λ values must be positive".into()));
                }
            }
        }
        for c in &self.transform {
            let tol = match c {
                TransformCase::KernelOracle {
                    tol,
                    eps,
                    r_points,
                    max_degree,
                    ..
                } => {
                    if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) || *r_points < 2 {
                        return Err(Error::InvalidArgument(
                            "kernel oracle needs positive eps and r_points ≥ 2".into(),
                        ));
                    }
                    if *max_degree > crate::gauss::MAX_DEGREE {
                        return Err(Error::InvalidArgument("kernel oracle degree too large".into()));
                    }
                    tol
                }
                TransformCase::Inverse { tol, .. }
                | TransformCase::Plancherel { tol, .. }
                | TransformCase::PlancherelQuadrature { tol, .. } => tol,
                TransformCase::Compose { tol, seq_len, .. } => {
                    if *seq_len < 1 {
                        return Err(Error::InvalidArgument("seq_len must be at least 1".into()));
                    }
                    tol
                }
            };
            if !(*tol > 0.0) {
                return Err(Error::InvalidArgument("tolerances must be positive".into()));
            }
        }
        for c in &self.algebra {
            match c {
                AlgebraCase::Monoid { tol, .. }
                | AlgebraCase::Classes { tol, .. }
                | AlgebraCase::WordEval { tol, .. }
                | AlgebraCase::Word { tol, .. } => {
                    if !(*tol > 0.0) {
                        return Err(Error::InvalidArgument("tolerances must be positive".into()));
                    }
                }
                AlgebraCase::FreeReduction { generators, .. } => {
                    if *generators == 0 {
                        return Err(Error::InvalidArgument(
                            "free reduction needs at least one generator".into(),
                        ));
                    }
                }
                AlgebraCase::QGroup { .. } => {}
            }
            if let AlgebraCase::Word { classes, word, .. } = c {
                word_from_letters(word, classes.len())?;
            }
        }
        Ok(())
    }
}

impl RotationCase {
    pub fn id(&self) -> &str {
        match self {
            RotationCase::Pair { id, .. }
            | RotationCase::Sequence { id, .. }
            | RotationCase::Continuation { id, .. } => id,
        }
    }
}

impl TransformCase {
    pub fn id(&self) -> &str {
        match self {
            TransformCase::KernelOracle { id, .. }
            | TransformCase::Inverse { id, .. }
            | TransformCase::Compose { id, .. }
            | TransformCase::Plancherel { id, .. }
            | TransformCase::PlancherelQuadrature { id, .. } => id,
        }
    }
}

impl AlgebraCase {
    pub fn id(&self) -> &str {
        match self {
            AlgebraCase::QGroup { id, .. }
            | AlgebraCase::Monoid { id, .. }
            | AlgebraCase::Classes { id, .. }
            | AlgebraCase::FreeReduction { id, .. }
            | AlgebraCase::WordEval { id, .. }
            | AlgebraCase::Word { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyMode {
    Closed,
    Quadrature,
    Mc,
}

/// Input of `transform apply`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApplyConfig {
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(rename = "N")]
    pub intervals: usize,
    pub functional: FunctionalSpec,
    pub h: GridFnSpec,
    pub mode: ApplyMode,
    /// Transform parameter, used by the closed and quadrature modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Smoothing parameter, used by the mc mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<GeneralOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ApplyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ApplyConfig = serde_json::from_str(text)?;
        TimeGrid::new(cfg.horizon, cfg.intervals)?;
        match cfg.mode {
            ApplyMode::Closed | ApplyMode::Quadrature if cfg.q.is_none() => {
                return Err(Error::InvalidArgument("closed and quadrature modes need q".into()))
            }
            ApplyMode::Mc if cfg.lambda.is_none() => return Err(Error::InvalidArgument("mc mode needs lambda".into())),
            _ => {}
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"{
        "suite": "transform", "T": 1.0, "N": 64, "n": 100, "seed": 7,
        "transform": [
            {"kind": "inverse", "id": "inv", "random": 2, "tol": 1e-9,
             "cases": [{"functional": {"family": [{"cosine": 1}],
                                       "f": {"pgp": {"factors": [{"poly": [[1, 0]], "a": [1, 0]}]}}},
                        "q": 2.0, "h": {"scaled": {"factor": 2, "of": {"constant": 1}}}}]}
        ]
    }"#;

    #[test]
    fn parses_and_resolves() {
        let cfg = RunConfig::from_json(SMALL).unwrap();
        assert_eq!(cfg.suite, Suite::Transform);
        let grid = cfg.grid().unwrap();
        let TransformCase::Inverse { cases, .. } = &cfg.transform[0] else {
            panic!()
        };
        let f = cases[0].functional.resolve(grid, Path::new(".")).unwrap();
        assert_eq!(f.arity(), 1);
        let h = cases[0].h.resolve(grid, Path::new(".")).unwrap();
        assert_eq!(h.values()[3], 2.0);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_json(&SMALL.replace("\"seed\": 7", "\"seed\": 7, \"extra\": 1")).is_err());
        assert!(RunConfig::from_json(&SMALL.replace("\"N\": 64", "\"N\": 1")).is_err());
        assert!(RunConfig::from_json(&SMALL.replace("\"tol\": 1e-9", "\"tol\": 0")).is_err());
        assert!(RunConfig::from_json(&SMALL.replace("\"id\": \"inv\"", "\"id\": \"a,b\"")).is_err());
        assert!(RunConfig::from_json(&SMALL.replace("{\"cosine\": 1}", "{\"cosine\": 1, \"x\": 2}")).is_err());
        assert!(RunConfig::from_json(r#"{"T": 1, "N": 8, "n": 10, "seed": 1, "suite": "nope"}"#).is_err());
    }

    #[test]
    fn empty_case_lists_are_valid() {
        let cfg = RunConfig::from_json(r#"{"T": 1, "N": 8, "n": 10, "seed": 1}"#).unwrap();
        assert_eq!(cfg.suite, Suite::All);
        assert!(cfg.rotation.is_empty() && cfg.transform.is_empty() && cfg.algebra.is_empty());
    }

    #[test]
    fn csv_weights_resolve_relative_to_base() {
        let dir = std::env::temp_dir().join(format!("gfft-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let f = GridFunction::from_fn(grid, |t| t * t).unwrap();
        f.write_csv(File::create(dir.join("h.csv")).unwrap()).unwrap();
        let spec: GridFnSpec = serde_json::from_str(r#"{"csv": "h.csv"}"#).unwrap();
        assert_eq!(spec.resolve(grid, &dir).unwrap(), f);
        assert!(matches!(
            spec.resolve(TimeGrid::new(1.0, 32).unwrap(), &dir),
            Err(Error::GridMismatch)
        ));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn words_parse() {
        let w = parse_word(r#"[{"sign": 1, "class_ref": 0}, {"sign": -1, "class_ref": 2}]"#, 3).unwrap();
        assert_eq!(w.letters, vec![(Sign::Plus, 0), (Sign::Minus, 2)]);
        assert!(parse_word(r#"[{"sign": 1, "class_ref": 3}]"#, 3).is_err());
        assert!(parse_word(r#"[{"sign": 2, "class_ref": 0}]"#, 3).is_err());
        assert!(parse_word(r#"[{"sign": 1}]"#, 3).is_err());
    }

    #[test]
    fn apply_config_requires_mode_parameter() {
        let base = r#"{"T": 1, "N": 32, "functional": {"family": [{"cosine": 1}], "f": {"pgp": {"factors": [{"poly": [[1,0]], "a": [1,0]}]}}}, "h": {"constant": 1}, "mode": "MODE"}"#;
        assert!(ApplyConfig::from_json(&base.replace("MODE", "closed")).is_err());
        assert!(ApplyConfig::from_json(&base.replace("\"MODE\"", "\"closed\", \"q\": 1")).is_ok());
        assert!(ApplyConfig::from_json(&base.replace("\"MODE\"", "\"mc\", \"q\": 1")).is_err());
        assert!(ApplyConfig::from_json(&base.replace("\"MODE\"", "\"mc\", \"lambda\": 2")).is_ok());
    }
}

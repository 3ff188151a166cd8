//! Experiment configuration: JSON schema, rational scalar parsing, rate
//! preset grammar, and resolution into core objects.

use ratelab_core::error::Error as CoreError;
use ratelab_core::geometry::{Ambient, Point, Space};
use ratelab_core::mappings::{
    rakotch_from_contraction, rakotch_from_mkc, MapClass, MapDescriptor, MapFamily, MapKind,
    MkcModulus, RakotchModulus,
};
use ratelab_core::rate_calculus::{
    cauchy_as_meta, ceil_clamped, CauchyRate, Counterfunction, DivergenceRate, MetaRate,
    ProductRate, ShiftedMetaRate,
};
use ratelab_core::schemes::{PerturbationRule, ScalarSeq, ToleranceSchedule, Trajectory};
use ratelab_core::transformers::{viscosity_browder_meta, viscosity_halpern_meta};
use ratelab_core::verifier::Budget;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Configuration-level failure: maps to exit code 2.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config schema violation: {0}")]
    Schema(String),
    #[error("unknown {kind} preset '{name}'")]
    UnknownPreset { kind: &'static str, name: String },
    #[error("bad {what}: {detail}")]
    Bad { what: &'static str, detail: String },
}

impl From<CoreError> for ConfigError {
    fn from(e: CoreError) -> Self {
        ConfigError::Bad {
            what: "core object",
            detail: e.to_string(),
        }
    }
}

pub type CResult<T> = Result<T, ConfigError>;

/// A scalar that is either a JSON number or an exact rational written as
/// `"p/q"` (dyadic rationals convert to `f64` without drift).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scalar(pub f64);

impl Scalar {
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn parse_str(s: &str) -> Result<f64, String> {
        if let Some((num, den)) = s.split_once('/') {
            let n: f64 = num
                .trim()
                .parse()
                .map_err(|e| format!("bad numerator '{num}': {e}"))?;
            let d: f64 = den
                .trim()
                .parse()
                .map_err(|e| format!("bad denominator '{den}': {e}"))?;
            if d == 0.0 {
                return Err("zero denominator".into());
            }
            Ok(n / d)
        } else {
            s.trim().parse().map_err(|e| format!("bad number '{s}': {e}"))
        }
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(x) => Ok(Scalar(x)),
            Raw::Text(s) => Scalar::parse_str(&s)
                .map(Scalar)
                .map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for Scalar {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_f64(self.0)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn pts(coords: &[Scalar]) -> CResult<Point<f64>> {
    Point::new(coords.iter().map(|s| s.0).collect()).map_err(Into::into)
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SpaceConfig {
    pub ambient: AmbientConfig,
    pub dimension: usize,
    pub center: Vec<Scalar>,
    pub radius: Scalar,
    pub diameter_bound: u64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmbientConfig {
    Euclidean,
    WeightedEuclidean { weights: Vec<Scalar> },
    MaxNorm,
    BrokenLambdaSquared,
}

impl SpaceConfig {
    pub fn build(&self) -> CResult<Space<f64>> {
        if self.center.len() != self.dimension {
            return Err(ConfigError::Bad {
                what: "space",
                detail: format!(
                    "center has {} coordinates but dimension is {}",
                    self.center.len(),
                    self.dimension
                ),
            });
        }
        let ambient = match &self.ambient {
            AmbientConfig::Euclidean => Ambient::Euclidean,
            AmbientConfig::WeightedEuclidean { weights } => Ambient::WeightedEuclidean {
                weights: weights.iter().map(|w| w.0).collect(),
            },
            AmbientConfig::MaxNorm => Ambient::MaxNorm,
            AmbientConfig::BrokenLambdaSquared => Ambient::BrokenLambdaSquared,
        };
        Space::new(ambient, pts(&self.center)?, self.radius.0, self.diameter_bound)
            .map_err(Into::into)
    }

    /// Named space presets for `check-axioms`: `euclidean:D`, `weighted:D`,
    /// `max-norm:D`, `broken:D`.
    pub fn preset(name: &str) -> CResult<Space<f64>> {
        let (kind, dim) = match name.split_once(':') {
            Some((k, d)) => (
                k,
                d.parse::<usize>().map_err(|e| ConfigError::Bad {
                    what: "space preset dimension",
                    detail: e.to_string(),
                })?,
            ),
            None => (name, 2),
        };
        let ambient = match kind {
            "euclidean" => Ambient::Euclidean,
            "weighted" => Ambient::WeightedEuclidean {
                weights: (0..dim).map(|i| 1.0 + i as f64).collect(),
            },
            "max-norm" => Ambient::MaxNorm,
            "broken" => Ambient::BrokenLambdaSquared,
            other => {
                return Err(ConfigError::UnknownPreset {
                    kind: "space",
                    name: other.into(),
                })
            }
        };
        Space::new(ambient, Point::origin(dim), 1.0, 2).map_err(Into::into)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MapConfig {
    pub kind: MapKindConfig,
    pub class: MapClassConfig,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKindConfig {
    ScaledIdentity { factor: Scalar },
    Rotation { angle: Scalar },
    Affine { matrix: Vec<Vec<Scalar>>, shift: Vec<Scalar> },
    Constant { value: Vec<Scalar> },
    ProjectionComposite { inner: Box<MapKindConfig> },
    Table { pairs: Vec<(Vec<Scalar>, Vec<Scalar>)> },
}

impl MapKindConfig {
    fn build(&self, space: &Space<f64>) -> CResult<MapKind<f64>> {
        Ok(match self {
            MapKindConfig::ScaledIdentity { factor } => MapKind::ScaledIdentity {
                factor: factor.0,
            },
            MapKindConfig::Rotation { angle } => MapKind::Rotation { angle: angle.0 },
            MapKindConfig::Affine { matrix, shift } => MapKind::Affine {
                matrix: matrix
                    .iter()
                    .map(|row| row.iter().map(|s| s.0).collect())
                    .collect(),
                shift: shift.iter().map(|s| s.0).collect(),
            },
            MapKindConfig::Constant { value } => MapKind::constant(space, pts(value)?),
            MapKindConfig::ProjectionComposite { inner } => MapKind::ProjectionComposite {
                inner: Box::new(inner.build(space)?),
            },
            MapKindConfig::Table { pairs } => MapKind::Table {
                pairs: pairs
                    .iter()
                    .map(|(a, b)| Ok((pts(a)?, pts(b)?)))
                    .collect::<CResult<Vec<_>>>()?,
            },
        })
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapClassConfig {
    Nonexpansive,
    Contraction { r: Scalar },
    MkcLinear { slope: Scalar },
    RakotchConst { delta: Scalar },
}

impl MapClassConfig {
    fn build(&self) -> CResult<MapClass<f64>> {
        Ok(match self {
            MapClassConfig::Nonexpansive => MapClass::Nonexpansive,
            MapClassConfig::Contraction { r } => MapClass::Contraction { r: r.0 },
            MapClassConfig::MkcLinear { slope } => {
                MapClass::Mkc(MkcModulus::linear(slope.0)?)
            }
            MapClassConfig::RakotchConst { delta } => {
                MapClass::Rakotch(RakotchModulus::constant(delta.0)?)
            }
        })
    }

    /// Rakotch modulus implied by the class (the viscosity map φ needs one).
    pub fn rakotch(&self) -> CResult<RakotchModulus<f64>> {
        Ok(match self {
            MapClassConfig::Nonexpansive => {
                return Err(ConfigError::Bad {
                    what: "map class",
                    detail: "a viscosity map needs a contraction-type class".into(),
                })
            }
            MapClassConfig::Contraction { r } => rakotch_from_contraction(r.0)?,
            MapClassConfig::MkcLinear { slope } => {
                rakotch_from_mkc(MkcModulus::linear(slope.0)?)
            }
            MapClassConfig::RakotchConst { delta } => RakotchModulus::constant(delta.0)?,
        })
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyConfig {
    Constant(String),
    Cyclic(Vec<String>),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeqConfig {
    OneOverNPlus1,
    Constant(Scalar),
    HarmonicPower { p: Scalar },
    Alternating { base: Scalar, amp: Scalar },
    Table(Vec<Scalar>),
}

impl SeqConfig {
    pub fn build(&self) -> ScalarSeq<f64> {
        match self {
            SeqConfig::OneOverNPlus1 => ScalarSeq::OneOverNPlus1,
            SeqConfig::Constant(c) => ScalarSeq::Constant(c.0),
            SeqConfig::HarmonicPower { p } => ScalarSeq::HarmonicPower { p: p.0 },
            SeqConfig::Alternating { base, amp } => ScalarSeq::Alternating {
                base: base.0,
                amp: amp.0,
            },
            SeqConfig::Table(t) => ScalarSeq::Table(t.iter().map(|s| s.0).collect()),
        }
    }
}

/// Rate preset grammar.
///
/// Cauchy rates (`ε → ℕ`):
///   `const K` | `powinv A P C` = max{0, ⌈A·ε⁻ᴾ + C⌉} |
///   `geo A Q C` = max{0, ⌈ln(A/ε)/ln(Q) + C⌉} (Q > 1).
/// Divergence rates (`k → ℕ`):
///   `affine A C` = A·k + C | `linear P Q C` = ⌈P·k/Q⌉ + C.
/// Product rates (`(m, ε) → ℕ`):
///   `harmonic` | `const-lambda C` | `shift-inv` = m + ⌈1/ε⌉.
pub fn parse_cauchy_rate(src: &str) -> CResult<CauchyRate<f64>> {
    let toks: Vec<&str> = src.split_whitespace().collect();
    let bad = |detail: String| ConfigError::Bad {
        what: "cauchy rate",
        detail,
    };
    let num = |i: usize| -> CResult<f64> {
        toks.get(i)
            .ok_or_else(|| bad(format!("'{src}': missing argument {i}")))
            .and_then(|t| Scalar::parse_str(t).map_err(|e| bad(format!("'{src}': {e}"))))
    };
    match toks.first().copied() {
        Some("const") => {
            let k = num(1)? as u64;
            expect_len(&toks, 2, src, "cauchy rate")?;
            Ok(CauchyRate::constant(k))
        }
        Some("powinv") => {
            let (a, p, c) = (num(1)?, num(2)?, num(3)?);
            expect_len(&toks, 4, src, "cauchy rate")?;
            Ok(CauchyRate::power_inv(a, p, c))
        }
        Some("geo") => {
            let (a, q, c) = (num(1)?, num(2)?, num(3)?);
            expect_len(&toks, 4, src, "cauchy rate")?;
            if q <= 1.0 {
                return Err(bad(format!("'{src}': geo base must exceed 1")));
            }
            Ok(CauchyRate::new(move |eps: f64| {
                ceil_clamped((a / eps).ln() / q.ln() + c).unwrap_or(u64::MAX)
            }))
        }
        _ => Err(ConfigError::UnknownPreset {
            kind: "cauchy rate",
            name: src.into(),
        }),
    }
}

fn expect_len(toks: &[&str], n: usize, src: &str, what: &'static str) -> CResult<()> {
    if toks.len() != n {
        return Err(ConfigError::Bad {
            what,
            detail: format!("'{src}': expected {} arguments", n - 1),
        });
    }
    Ok(())
}

pub fn parse_divergence_rate(src: &str) -> CResult<DivergenceRate> {
    let toks: Vec<&str> = src.split_whitespace().collect();
    let num = |i: usize| -> CResult<u64> {
        toks.get(i)
            .and_then(|t| t.parse::<u64>().ok())
            .ok_or_else(|| ConfigError::Bad {
                what: "divergence rate",
                detail: format!("'{src}': bad integer argument {i}"),
            })
    };
    match toks.first().copied() {
        Some("affine") => {
            expect_len(&toks, 3, src, "divergence rate")?;
            Ok(DivergenceRate::affine(num(1)?, num(2)?))
        }
        Some("linear") => {
            expect_len(&toks, 4, src, "divergence rate")?;
            let (p, q, c) = (num(1)?, num(2)?, num(3)?);
            if q == 0 {
                return Err(ConfigError::Bad {
                    what: "divergence rate",
                    detail: format!("'{src}': zero denominator"),
                });
            }
            Ok(DivergenceRate::linear_rational(p, q, c))
        }
        _ => Err(ConfigError::UnknownPreset {
            kind: "divergence rate",
            name: src.into(),
        }),
    }
}

pub fn parse_product_rate(src: &str) -> CResult<ProductRate<f64>> {
    let toks: Vec<&str> = src.split_whitespace().collect();
    match toks.first().copied() {
        Some("harmonic") => {
            expect_len(&toks, 1, src, "product rate")?;
            Ok(ProductRate::harmonic())
        }
        Some("const-lambda") => {
            expect_len(&toks, 2, src, "product rate")?;
            let c = Scalar::parse_str(toks[1]).map_err(|e| ConfigError::Bad {
                what: "product rate",
                detail: format!("'{src}': {e}"),
            })?;
            Ok(ProductRate::constant_lambda(c)?)
        }
        Some("shift-inv") => {
            expect_len(&toks, 1, src, "product rate")?;
            Ok(ProductRate::new(|m, eps: f64| {
                m.saturating_add(ceil_clamped(1.0 / eps).unwrap_or(u64::MAX))
            }))
        }
        _ => Err(ConfigError::UnknownPreset {
            kind: "product rate",
            name: src.into(),
        }),
    }
}

pub fn parse_counterfunction(src: &str) -> CResult<Counterfunction> {
    src.parse().map_err(|e: CoreError| ConfigError::Bad {
        what: "counterfunction",
        detail: e.to_string(),
    })
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SchemeConfig {
    #[serde(flatten)]
    pub kind: SchemeKindConfig,
    /// Optional error-sequence reference turning the scheme inexact.
    #[serde(default)]
    pub errors: Option<String>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKindConfig {
    Browder {
        family: String,
        anchor: Vec<Scalar>,
        alpha: String,
    },
    ViscosityBrowder {
        family: String,
        phi: String,
        alpha: String,
    },
    Halpern {
        family: String,
        anchor: Vec<Scalar>,
        start: Vec<Scalar>,
        alpha: String,
    },
    ViscosityHalpern {
        family: String,
        phi: String,
        start: Vec<Scalar>,
        alpha: String,
    },
    Km {
        map: String,
        start: Vec<Scalar>,
        beta: String,
    },
    Vkm {
        map: String,
        phi: String,
        start: Vec<Scalar>,
        alpha: String,
        beta: String,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeltaConfig {
    Constant(Scalar),
    /// Use the Rakotch modulus implied by the named map's class; the
    /// corollary-form transformers need it constant.
    FromMap(String),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaConfig {
    /// `θ(ε, f, N) = max{N, ρ(ε)}` from a Cauchy-rate preset.
    FromCauchy(String),
}

impl ThetaConfig {
    pub fn build(&self) -> CResult<ShiftedMetaRate<f64>> {
        match self {
            ThetaConfig::FromCauchy(src) => {
                Ok(ShiftedMetaRate::from_cauchy(&parse_cauchy_rate(src)?))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsiConfig {
    /// Metastability rate of the implicit viscosity sequence via the
    /// single-map transformer.
    VbSingle { delta: DeltaConfig, theta: ThetaConfig },
    /// Metastability rate of the explicit viscosity iteration.
    VhSingle {
        delta: DeltaConfig,
        a: String,
        theta: ThetaConfig,
    },
    /// `Ψ(ε, f) = ρ(ε)` from a Cauchy-rate preset.
    FromCauchy(String),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformerConfig {
    CauchyVb {
        delta: DeltaConfig,
        rho: String,
    },
    PsiVbSingle {
        delta: DeltaConfig,
        theta: ThetaConfig,
    },
    CauchyVh {
        delta: DeltaConfig,
        a: String,
        rho: String,
    },
    PsiVhSingle {
        delta: DeltaConfig,
        a: String,
        theta: ThetaConfig,
    },
    OmegaVkm {
        delta: DeltaConfig,
        mu1: String,
        mu2: String,
        psi: PsiConfig,
    },
    CauchyVkm {
        delta: DeltaConfig,
        rho: String,
        mu1: String,
        mu2: String,
    },
    BrowderRelaxed {
        delta: DeltaConfig,
        rho_err: String,
        psi: PsiConfig,
    },
    HalpernRelaxed {
        delta: DeltaConfig,
        a: String,
        rho_err: String,
        psi: PsiConfig,
    },
    VkmRelaxed {
        delta: DeltaConfig,
        a: String,
        rho_err: String,
        psi: PsiConfig,
    },
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckConfig {
    Axioms {
        #[serde(default = "default_samples")]
        samples: usize,
        tol: Scalar,
        #[serde(default)]
        cn: bool,
        #[serde(default)]
        space: Option<SpaceConfig>,
        #[serde(default)]
        expect_fail: Option<String>,
    },
    MapClass {
        map: String,
        #[serde(default = "default_samples")]
        samples: usize,
        tol: Scalar,
        #[serde(default)]
        expect_fail: bool,
    },
    BoundSoundness {
        scheme: SchemeConfig,
        transformer: TransformerConfig,
        #[serde(default)]
        n0: u64,
        #[serde(default)]
        bound_override: Option<u64>,
        #[serde(default)]
        eps_grid: Option<Vec<Scalar>>,
        #[serde(default)]
        f_grid: Option<Vec<String>>,
    },
    CauchyRate {
        scheme: SchemeConfig,
        rho: String,
        horizon: u64,
        #[serde(default = "default_pair_budget")]
        pair_budget: usize,
        #[serde(default)]
        eps_grid: Option<Vec<Scalar>>,
    },
    KmResidual {
        map: String,
        start: Vec<Scalar>,
        beta: String,
        n_max: u64,
    },
    /// Computes a KM Cauchy-rate index and requires it to be beyond the
    /// simulation budget: the report must say `inconclusive`.
    InfeasibleScale {
        gamma: String,
        omega_b_value: Scalar,
        b: u64,
    },
}

fn default_samples() -> usize {
    1000
}

fn default_pair_budget() -> usize {
    128
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default = "default_max_index")]
    pub max_index: u64,
    #[serde(default = "default_max_window")]
    pub max_window: u64,
}

fn default_max_index() -> u64 {
    1_000_000
}

fn default_max_window() -> u64 {
    100_000
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            max_index: default_max_index(),
            max_window: default_max_window(),
        }
    }
}

impl BudgetConfig {
    pub fn build(&self) -> Budget {
        Budget {
            max_index: self.max_index,
            max_window: self.max_window,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceConfig,
    #[serde(default)]
    pub maps: BTreeMap<String, MapConfig>,
    #[serde(default)]
    pub families: BTreeMap<String, FamilyConfig>,
    #[serde(default)]
    pub sequences: BTreeMap<String, SeqConfig>,
    #[serde(default)]
    pub eps_grid: Vec<Scalar>,
    #[serde(default)]
    pub f_grid: Vec<String>,
    #[serde(default)]
    pub budgets: BudgetConfig,
    pub checks: Vec<CheckConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> CResult<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))
    }

    pub fn space(&self) -> CResult<Space<f64>> {
        self.space.build()
    }

    pub fn map(&self, name: &str) -> CResult<MapDescriptor<f64>> {
        let space = self.space()?;
        let mc = self.maps.get(name).ok_or_else(|| ConfigError::UnknownPreset {
            kind: "map",
            name: name.into(),
        })?;
        Ok(MapDescriptor::new(mc.kind.build(&space)?, mc.class.build()?))
    }

    /// Family by name; a map name is promoted to a constant family.
    pub fn family(&self, name: &str) -> CResult<MapFamily<f64>> {
        if let Some(fc) = self.families.get(name) {
            return match fc {
                FamilyConfig::Constant(m) => Ok(MapFamily::constant(self.map(m)?)),
                FamilyConfig::Cyclic(ms) => Ok(MapFamily::Cyclic(
                    ms.iter()
                        .map(|m| self.map(m))
                        .collect::<CResult<Vec<_>>>()?,
                )),
            };
        }
        if self.maps.contains_key(name) {
            return Ok(MapFamily::constant(self.map(name)?));
        }
        Err(ConfigError::UnknownPreset {
            kind: "family",
            name: name.into(),
        })
    }

    pub fn sequence(&self, name: &str) -> CResult<ScalarSeq<f64>> {
        self.sequences
            .get(name)
            .map(|s| s.build())
            .ok_or_else(|| ConfigError::UnknownPreset {
                kind: "sequence",
                name: name.into(),
            })
    }

    pub fn delta(&self, dc: &DeltaConfig) -> CResult<f64> {
        match dc {
            DeltaConfig::Constant(s) => Ok(s.0),
            DeltaConfig::FromMap(name) => {
                let mc = self.maps.get(name).ok_or_else(|| ConfigError::UnknownPreset {
                    kind: "map",
                    name: name.clone(),
                })?;
                let modulus = mc.class.rakotch()?;
                modulus.constant_value().ok_or_else(|| ConfigError::Bad {
                    what: "delta",
                    detail: format!("map '{name}' has no constant Rakotch modulus"),
                })
            }
        }
    }

    pub fn psi(&self, pc: &PsiConfig) -> CResult<MetaRate<f64>> {
        let b = self.space.diameter_bound;
        match pc {
            PsiConfig::VbSingle { delta, theta } => Ok(viscosity_browder_meta(
                b,
                self.delta(delta)?,
                &theta.build()?,
            )?),
            PsiConfig::VhSingle { delta, a, theta } => Ok(viscosity_halpern_meta(
                b,
                self.delta(delta)?,
                &parse_divergence_rate(a)?,
                &theta.build()?,
            )?),
            PsiConfig::FromCauchy(src) => Ok(cauchy_as_meta(&parse_cauchy_rate(src)?)),
        }
    }

    pub fn trajectory(&self, sc: &SchemeConfig) -> CResult<Trajectory<f64>> {
        let space = self.space()?;
        let traj = match &sc.kind {
            SchemeKindConfig::Browder {
                family,
                anchor,
                alpha,
            } => Trajectory::browder(
                space,
                self.family(family)?,
                pts(anchor)?,
                self.sequence(alpha)?,
                ToleranceSchedule::AlphaTied,
            )?,
            SchemeKindConfig::ViscosityBrowder { family, phi, alpha } => {
                let phi_map = self.map(phi)?;
                let delta = self
                    .maps
                    .get(phi)
                    .ok_or_else(|| ConfigError::UnknownPreset {
                        kind: "map",
                        name: phi.clone(),
                    })?
                    .class
                    .rakotch()?;
                Trajectory::viscosity_browder(
                    space,
                    self.family(family)?,
                    phi_map,
                    delta,
                    self.sequence(alpha)?,
                    ToleranceSchedule::AlphaTied,
                )?
            }
            SchemeKindConfig::Halpern {
                family,
                anchor,
                start,
                alpha,
            } => Trajectory::halpern(
                space,
                self.family(family)?,
                pts(anchor)?,
                pts(start)?,
                self.sequence(alpha)?,
            )?,
            SchemeKindConfig::ViscosityHalpern {
                family,
                phi,
                start,
                alpha,
            } => Trajectory::viscosity_halpern(
                space,
                self.family(family)?,
                self.map(phi)?,
                pts(start)?,
                self.sequence(alpha)?,
            )?,
            SchemeKindConfig::Km { map, start, beta } => Trajectory::km(
                space,
                self.map(map)?,
                pts(start)?,
                self.sequence(beta)?,
            )?,
            SchemeKindConfig::Vkm {
                map,
                phi,
                start,
                alpha,
                beta,
            } => Trajectory::vkm(
                space,
                self.map(map)?,
                self.map(phi)?,
                pts(start)?,
                self.sequence(alpha)?,
                self.sequence(beta)?,
            )?,
        };
        Ok(match &sc.errors {
            None => traj,
            Some(seq) => traj.with_errors(self.sequence(seq)?, PerturbationRule::TowardCenter),
        })
    }

    pub fn eps_grid_for(&self, local: &Option<Vec<Scalar>>) -> Vec<f64> {
        local
            .as_ref()
            .unwrap_or(&self.eps_grid)
            .iter()
            .map(|s| s.0)
            .collect()
    }

    pub fn f_grid_for(&self, local: &Option<Vec<String>>) -> CResult<Vec<(String, Counterfunction)>> {
        local
            .as_ref()
            .unwrap_or(&self.f_grid)
            .iter()
            .map(|src| Ok((src.clone(), parse_counterfunction(src)?)))
            .collect()
    }
}

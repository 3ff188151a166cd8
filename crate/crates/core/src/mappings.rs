//! Self-maps of the convex set `C`, their contraction classes, and the
//! constructions turning one modulus into another.

use crate::error::{Error, Result};
use crate::geometry::{Point, Sampler, Space};
use crate::report::{CheckItem, VerificationReport};
use crate::scalar::{lit, Real};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Closed-form map descriptors. Scaled identities and rotations act about
/// the ball center of the space; affine maps are absolute (`x ↦ Mx + t`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapKind<F> {
    /// `x ↦ c + factor·(x - c)` about the ball center `c`; `|factor| ≤ 1`.
    ScaledIdentity { factor: F },
    /// Rotation by `angle` in the plane of the first two coordinates,
    /// about the ball center. Requires dimension ≥ 2.
    Rotation { angle: F },
    /// `x ↦ Mx + t` with `M` given by rows.
    Affine { matrix: Vec<Vec<F>>, shift: Vec<F> },
    /// Clamp-to-`C` composed after an inner map; always lands in `C`.
    ProjectionComposite { inner: Box<MapKind<F>> },
    /// Nearest-anchor lookup table; validated by sampling only.
    Table { pairs: Vec<(Point<F>, Point<F>)> },
}

impl<F: Real> MapKind<F> {
    pub fn identity() -> Self {
        MapKind::ScaledIdentity { factor: F::one() }
    }

    /// Constant map realized as a zero-matrix affine map.
    pub fn constant(space: &Space<F>, value: Point<F>) -> Self {
        let d = space.dim();
        MapKind::Affine {
            matrix: vec![vec![F::zero(); d]; d],
            shift: value.coords().to_vec(),
        }
    }

    fn eval(&self, space: &Space<F>, x: &Point<F>) -> Result<Point<F>> {
        match self {
            MapKind::ScaledIdentity { factor } => {
                let c = space.center();
                let coords = x
                    .coords()
                    .iter()
                    .zip(c.coords())
                    .map(|(&xi, &ci)| ci + *factor * (xi - ci))
                    .collect();
                Point::new(coords)
            }
            MapKind::Rotation { angle } => {
                if space.dim() < 2 {
                    return Err(Error::input("rotation needs dimension >= 2"));
                }
                let (s, c) = angle.sin_cos();
                let ctr = space.center();
                let mut coords: Vec<F> = x
                    .coords()
                    .iter()
                    .zip(ctr.coords())
                    .map(|(&xi, &ci)| xi - ci)
                    .collect();
                let (u, v) = (coords[0], coords[1]);
                coords[0] = c * u - s * v;
                coords[1] = s * u + c * v;
                for (ci, co) in ctr.coords().iter().zip(coords.iter_mut()) {
                    *co = *co + *ci;
                }
                Point::new(coords)
            }
            MapKind::Affine { matrix, shift } => {
                if matrix.len() != space.dim() || shift.len() != space.dim() {
                    return Err(Error::DimensionMismatch(matrix.len(), space.dim()));
                }
                let coords = matrix
                    .iter()
                    .zip(shift)
                    .map(|(row, &t)| {
                        row.iter()
                            .zip(x.coords())
                            .fold(t, |acc, (&m, &xi)| acc + m * xi)
                    })
                    .collect();
                Point::new(coords)
            }
            MapKind::ProjectionComposite { inner } => {
                let y = inner.eval(space, x)?;
                Ok(space.clamp_to_ball(&y))
            }
            MapKind::Table { pairs } => {
                if pairs.is_empty() {
                    return Err(Error::input("empty map table"));
                }
                let mut best = 0usize;
                let mut best_d = F::infinity();
                for (i, (from, _)) in pairs.iter().enumerate() {
                    let d = space.dist_unchecked(x, from);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                Ok(pairs[best].1.clone())
            }
        }
    }
}

/// Rakotch modulus: `δ : (0,∞) → (0,1)` such that
/// `d(x,y) ≥ ε ⇒ d(φx, φy) ≤ (1-δ(ε))·d(x,y)`.
#[derive(Clone)]
pub struct RakotchModulus<F> {
    form: RakotchForm<F>,
}

#[derive(Clone)]
enum RakotchForm<F> {
    Constant(F),
    FromMkc(MkcModulus<F>),
    Custom(Arc<dyn Fn(F) -> F + Send + Sync>),
}

impl<F: std::fmt::Debug> std::fmt::Debug for RakotchModulus<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.form {
            RakotchForm::Constant(d) => write!(f, "RakotchModulus::Constant({d:?})"),
            RakotchForm::FromMkc(_) => write!(f, "RakotchModulus::FromMkc"),
            RakotchForm::Custom(_) => write!(f, "RakotchModulus::Custom"),
        }
    }
}

impl<F: Real> RakotchModulus<F> {
    pub fn constant(delta: F) -> Result<Self> {
        if !(delta > F::zero() && delta < F::one()) {
            return Err(Error::modulus(format!("constant delta {delta} outside (0,1)")));
        }
        Ok(RakotchModulus {
            form: RakotchForm::Constant(delta),
        })
    }

    pub fn from_fn(f: impl Fn(F) -> F + Send + Sync + 'static) -> Self {
        RakotchModulus {
            form: RakotchForm::Custom(Arc::new(f)),
        }
    }

    pub fn eval(&self, eps: F) -> Result<F> {
        if !(eps > F::zero()) {
            return Err(Error::input("Rakotch modulus argument must be positive"));
        }
        let v = match &self.form {
            RakotchForm::Constant(d) => *d,
            RakotchForm::FromMkc(mkc) => {
                let sigma = mkc.eval(eps)?;
                sigma / (lit::<F>(4.0) * eps)
            }
            RakotchForm::Custom(f) => f(eps),
        };
        if !(v > F::zero() && v < F::one()) {
            return Err(Error::modulus(format!("delta({eps}) = {v} outside (0,1)")));
        }
        Ok(v)
    }

    /// The constant value when the modulus is constant.
    pub fn constant_value(&self) -> Option<F> {
        match self.form {
            RakotchForm::Constant(d) => Some(d),
            _ => None,
        }
    }
}

/// Modulus for a Meir-Keeler contraction, already specialized to the
/// threshold `ε/4`: a function `σ` with `0 < σ(ε) < ε` such that
/// `d(x,y) < ε/4 + σ(ε) ⇒ d(φx, φy) ≤ ε/4`.
#[derive(Clone)]
pub struct MkcModulus<F> {
    form: MkcForm<F>,
}

#[derive(Clone)]
enum MkcForm<F> {
    /// `σ(ε) = slope·ε` with `slope ∈ (0,1)`.
    Linear { slope: F },
    Custom(Arc<dyn Fn(F) -> F + Send + Sync>),
}

impl<F: Real> MkcModulus<F> {
    pub fn linear(slope: F) -> Result<Self> {
        if !(slope > F::zero() && slope < F::one()) {
            return Err(Error::modulus(format!("MKC slope {slope} outside (0,1)")));
        }
        Ok(MkcModulus {
            form: MkcForm::Linear { slope },
        })
    }

    pub fn from_fn(f: impl Fn(F) -> F + Send + Sync + 'static) -> Self {
        MkcModulus {
            form: MkcForm::Custom(Arc::new(f)),
        }
    }

    /// Valid modulus for an `r`-contraction: `σ(ε) = min{ε(1-r)/(4r), 0.99ε}`
    /// (an `r`-contraction moves points within `ε/4 + σ` to within
    /// `r(ε/4 + σ) ≤ ε/4`).
    pub fn canonical_for_contraction(r: F) -> Result<Self> {
        if !(r >= F::zero() && r < F::one()) {
            return Err(Error::input(format!("contraction factor {r} outside [0,1)")));
        }
        let cap = lit::<F>(0.99);
        Ok(MkcModulus::from_fn(move |eps: F| {
            if r == F::zero() {
                cap * eps
            } else {
                (eps * (F::one() - r) / (lit::<F>(4.0) * r)).min(cap * eps)
            }
        }))
    }

    pub fn eval(&self, eps: F) -> Result<F> {
        if !(eps > F::zero()) {
            return Err(Error::input("MKC modulus argument must be positive"));
        }
        let v = match &self.form {
            MkcForm::Linear { slope } => *slope * eps,
            MkcForm::Custom(f) => f(eps),
        };
        if !(v > F::zero() && v < eps) {
            return Err(Error::modulus(format!("sigma({eps}) = {v} outside (0, {eps})")));
        }
        Ok(v)
    }
}

/// `δ(ε) := σ(ε)/(4ε)`, the explicit witness by which a Meir-Keeler modulus
/// yields a Rakotch modulus on convex sets.
pub fn rakotch_from_mkc<F: Real>(mkc: MkcModulus<F>) -> RakotchModulus<F> {
    RakotchModulus {
        form: RakotchForm::FromMkc(mkc),
    }
}

/// Constant Rakotch modulus `δ ≡ 1-r` for an `r`-contraction. For `r = 0`
/// the value is clamped to `1 - 1e-12` to stay inside `(0,1)`.
pub fn rakotch_from_contraction<F: Real>(r: F) -> Result<RakotchModulus<F>> {
    if !(r >= F::zero() && r < F::one()) {
        return Err(Error::input(format!("contraction factor {r} outside [0,1)")));
    }
    let delta = (F::one() - r).min(F::one() - lit::<F>(1e-12));
    RakotchModulus::constant(delta)
}

/// Claimed contraction class of a map.
#[derive(Debug, Clone)]
pub enum MapClass<F> {
    Nonexpansive,
    Contraction { r: F },
    Mkc(MkcModulus<F>),
    Rakotch(RakotchModulus<F>),
}

impl<F: std::fmt::Debug> std::fmt::Debug for MkcModulus<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.form {
            MkcForm::Linear { slope } => write!(f, "MkcModulus::Linear({slope:?})"),
            MkcForm::Custom(_) => write!(f, "MkcModulus::Custom"),
        }
    }
}

impl<F: Real> MapClass<F> {
    /// The Rakotch modulus carried or implied by the class, if any.
    pub fn rakotch_modulus(&self) -> Result<RakotchModulus<F>> {
        match self {
            MapClass::Nonexpansive => Err(Error::contract(
                "nonexpansive class carries no Rakotch modulus",
            )),
            MapClass::Contraction { r } => rakotch_from_contraction(*r),
            MapClass::Mkc(m) => Ok(rakotch_from_mkc(m.clone())),
            MapClass::Rakotch(d) => Ok(d.clone()),
        }
    }
}

/// A self-map of `C` together with its claimed contraction class.
#[derive(Debug, Clone)]
pub struct MapDescriptor<F> {
    pub kind: MapKind<F>,
    pub class: MapClass<F>,
}

impl<F: Real> MapDescriptor<F> {
    pub fn new(kind: MapKind<F>, class: MapClass<F>) -> Self {
        MapDescriptor { kind, class }
    }

    pub fn identity() -> Self {
        MapDescriptor::new(MapKind::identity(), MapClass::Nonexpansive)
    }

    pub fn constant(space: &Space<F>, value: Point<F>) -> Self {
        MapDescriptor::new(
            MapKind::constant(space, value),
            MapClass::Contraction { r: F::zero() },
        )
    }

    pub fn scaled_identity(factor: F) -> Self {
        let class = if factor.abs() < F::one() {
            MapClass::Contraction { r: factor.abs() }
        } else {
            MapClass::Nonexpansive
        };
        MapDescriptor::new(MapKind::ScaledIdentity { factor }, class)
    }

    pub fn rotation(angle: F) -> Self {
        MapDescriptor::new(MapKind::Rotation { angle }, MapClass::Nonexpansive)
    }

    /// Applies the map. The argument must lie in `C`.
    pub fn apply(&self, space: &Space<F>, x: &Point<F>) -> Result<Point<F>> {
        if !space.contains(x, lit::<F>(1e-9)) {
            return Err(Error::input("argument lies outside C"));
        }
        self.kind.eval(space, x)
    }
}

/// Indexed family `n ↦ Sₙ` of maps, with a constant-family shortcut.
#[derive(Debug, Clone)]
pub enum MapFamily<F> {
    Constant(MapDescriptor<F>),
    Cyclic(Vec<MapDescriptor<F>>),
}

impl<F: Real> MapFamily<F> {
    pub fn constant(map: MapDescriptor<F>) -> Self {
        MapFamily::Constant(map)
    }

    pub fn get(&self, n: u64) -> &MapDescriptor<F> {
        match self {
            MapFamily::Constant(m) => m,
            MapFamily::Cyclic(ms) => &ms[(n % ms.len() as u64) as usize],
        }
    }
}

/// Log-spaced grid used when a class check needs per-ε inequalities.
pub fn default_eps_grid<F: Real>() -> Vec<F> {
    [0.0625, 0.125, 0.25, 0.5, 1.0]
        .iter()
        .map(|&e| lit::<F>(e))
        .collect()
}

/// Samples pairs from `C` and measures the worst violation of the claimed
/// class inequality (with the modulus where applicable), plus C-invariance
/// of the map. Failing items carry a witness pair in their detail.
pub fn check_class<F: Real>(
    space: &Space<F>,
    map: &MapDescriptor<F>,
    sampler: &mut Sampler,
    n_samples: usize,
    tol: F,
    eps_grid: &[F],
) -> Result<VerificationReport> {
    let mut worst = F::neg_infinity();
    let mut worst_pair: Option<(Point<F>, Point<F>)> = None;
    let mut outside = F::zero();

    let record = |v: F, x: &Point<F>, y: &Point<F>, worst: &mut F,
                  worst_pair: &mut Option<(Point<F>, Point<F>)>| {
        if v > *worst {
            *worst = v;
            *worst_pair = Some((x.clone(), y.clone()));
        }
    };

    for _ in 0..n_samples {
        let x = sampler.point(space);
        let y = sampler.point(space);
        let tx = map.kind.eval(space, &x)?;
        let ty = map.kind.eval(space, &y)?;
        outside = outside.max(space.dist_unchecked(&tx, space.center()) - space.radius());
        let dxy = space.dist_unchecked(&x, &y);
        let dtxy = space.dist_unchecked(&tx, &ty);

        match &map.class {
            MapClass::Nonexpansive => {
                record(dtxy - dxy, &x, &y, &mut worst, &mut worst_pair);
            }
            MapClass::Contraction { r } => {
                record(dtxy - *r * dxy, &x, &y, &mut worst, &mut worst_pair);
            }
            MapClass::Rakotch(delta) => {
                for &eps in eps_grid {
                    if dxy >= eps {
                        let d = delta.eval(eps)?;
                        record(dtxy - (F::one() - d) * dxy, &x, &y, &mut worst, &mut worst_pair);
                    }
                }
            }
            MapClass::Mkc(sigma) => {
                for &eps in eps_grid {
                    let s = sigma.eval(eps)?;
                    let quarter = eps / lit::<F>(4.0);
                    if dxy < quarter + s {
                        record(dtxy - quarter, &x, &y, &mut worst, &mut worst_pair);
                    }
                }
            }
        }
    }

    let mut report = VerificationReport::new(
        "map-class",
        format!("class={:?} samples={n_samples}", map.class),
    );
    report.tolerance = tol.to_f64().unwrap();
    let measured = worst.max(F::zero()).to_f64().unwrap();
    let mut item = CheckItem::from_violation("class-inequality", measured, report.tolerance);
    if let Some((x, y)) = worst_pair {
        if measured > report.tolerance {
            item = item.with_detail(format!("witness pair x={:?} y={:?}", x.coords(), y.coords()));
        }
    }
    report.push(item);
    report.push(CheckItem::from_violation(
        "maps-into-c",
        outside.max(F::zero()).to_f64().unwrap(),
        report.tolerance,
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::CheckStatus;

    fn unit_ball(dim: usize) -> Space<f64> {
        Space::euclidean_ball(dim, 1.0, 2).unwrap()
    }

    fn pt(cs: &[f64]) -> Point<f64> {
        Point::new(cs.to_vec()).unwrap()
    }

    #[test]
    fn apply_basic_kinds() {
        let s = unit_ball(2);
        let id = MapDescriptor::identity();
        let x = pt(&[0.3, -0.4]);
        assert_eq!(id.apply(&s, &x).unwrap(), x);

        let half = MapDescriptor::scaled_identity(0.5);
        assert_eq!(half.apply(&s, &pt(&[1.0, 0.0])).unwrap(), pt(&[0.5, 0.0]));

        let rot = MapDescriptor::rotation(std::f64::consts::FRAC_PI_2);
        let r = rot.apply(&s, &pt(&[1.0, 0.0])).unwrap();
        assert!(s.dist(&r, &pt(&[0.0, 1.0])).unwrap() < 1e-12);

        assert!(id.apply(&s, &pt(&[2.0, 0.0])).is_err());
    }

    #[test]
    fn affine_reflection_matches_negation() {
        let s = Space::euclidean_ball(1, 1.0, 2).unwrap();
        let neg = MapDescriptor::new(
            MapKind::Affine {
                matrix: vec![vec![-1.0]],
                shift: vec![0.0],
            },
            MapClass::Nonexpansive,
        );
        assert_eq!(neg.apply(&s, &pt(&[0.7])).unwrap(), pt(&[-0.7]));
    }

    #[test]
    fn projection_composite_lands_in_c() {
        let s = unit_ball(2);
        // Doubling map pushed back onto the ball.
        let m = MapDescriptor::new(
            MapKind::ProjectionComposite {
                inner: Box::new(MapKind::Affine {
                    matrix: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
                    shift: vec![0.0, 0.0],
                }),
            },
            MapClass::Nonexpansive,
        );
        let y = m.apply(&s, &pt(&[0.9, 0.0])).unwrap();
        assert!(s.contains(&y, 1e-12));
    }

    #[test]
    fn rakotch_from_contraction_values() {
        let d: RakotchModulus<f64> = rakotch_from_contraction(0.5).unwrap();
        assert_eq!(d.eval(1.0).unwrap(), 0.5);
        let d: RakotchModulus<f64> = rakotch_from_contraction(0.9).unwrap();
        assert!((d.eval(0.25).unwrap() - 0.1).abs() < 1e-15);
        let d: RakotchModulus<f64> = rakotch_from_contraction(0.0).unwrap();
        assert!((d.eval(1.0).unwrap() - (1.0 - 1e-12)).abs() < 1e-15);
        assert!(rakotch_from_contraction(1.0_f64).is_err());
    }

    #[test]
    fn rakotch_from_mkc_closed_forms() {
        // σ(ε) = ε/4 (valid for a ½-contraction) gives δ ≡ 1/16.
        let d: RakotchModulus<f64> = rakotch_from_mkc(MkcModulus::linear(0.25).unwrap());
        for eps in [0.1, 1.0, 7.5] {
            assert!((d.eval(eps).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        }
        // σ(ε) = ε/2 gives δ ≡ 1/8.
        let d: RakotchModulus<f64> = rakotch_from_mkc(MkcModulus::linear(0.5).unwrap());
        assert!((d.eval(2.0).unwrap() - 0.125).abs() < 1e-15);
        // σ(ε) = 0.99ε (admissible for a constant map) gives δ ≡ 0.2475.
        let d: RakotchModulus<f64> = rakotch_from_mkc(MkcModulus::linear(0.99).unwrap());
        assert!((d.eval(0.3).unwrap() - 0.2475).abs() < 1e-15);
    }

    #[test]
    fn mkc_premise_holds_for_half_contraction_with_quarter_slope() {
        // For T half-scaling: d(x,y) < ε/4 + ε/4 implies d(Tx,Ty) < ε/4.
        let s = unit_ball(2);
        let map = MapDescriptor::new(
            MapKind::ScaledIdentity { factor: 0.5 },
            MapClass::Mkc(MkcModulus::linear(0.25).unwrap()),
        );
        let mut sampler = Sampler::seeded(11);
        let rep = check_class(&s, &map, &mut sampler, 500, 1e-12, &default_eps_grid()).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn constant_modulus_dominates_mkc_witness_for_contractions() {
        // 1-r >= sigma(eps)/(4 eps) for the canonical sigma, on a log grid.
        for r in [0.05_f64, 0.25, 0.5, 0.9] {
            let constant = rakotch_from_contraction(r).unwrap();
            let via_mkc = rakotch_from_mkc(MkcModulus::canonical_for_contraction(r).unwrap());
            for eps in default_eps_grid::<f64>() {
                assert!(
                    constant.eval(eps).unwrap() >= via_mkc.eval(eps).unwrap() - 1e-15,
                    "r={r} eps={eps}"
                );
            }
        }
    }

    #[test]
    fn check_class_passes_isometry_and_flags_false_contraction_claim() {
        let s = unit_ball(2);
        let mut sampler = Sampler::seeded(4);
        let rot = MapDescriptor::rotation(1.0);
        let rep = check_class(&s, &rot, &mut sampler, 400, 1e-12, &default_eps_grid()).unwrap();
        assert!(rep.passed());
        assert!(rep.item("class-inequality").unwrap().measured < 1e-15);

        let bogus = MapDescriptor::new(
            MapKind::Rotation { angle: 1.0 },
            MapClass::Contraction { r: 0.9 },
        );
        let rep = check_class(&s, &bogus, &mut sampler, 400, 1e-12, &default_eps_grid()).unwrap();
        assert_eq!(rep.status, CheckStatus::Fail);
        assert!(rep.item("class-inequality").unwrap().detail.contains("witness"));
    }

    #[test]
    fn scaled_identity_passes_rakotch_claim() {
        let s = unit_ball(2);
        let mut sampler = Sampler::seeded(9);
        let map = MapDescriptor::new(
            MapKind::ScaledIdentity { factor: 0.5 },
            MapClass::Rakotch(RakotchModulus::constant(0.5).unwrap()),
        );
        let grid = [0.25, 0.5, 1.0];
        let rep = check_class(&s, &map, &mut sampler, 400, 1e-12, &grid).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn rakotch_inequality_holds_for_mkc_derived_modulus_by_sampling() {
        // Compose check_class: map is a 1/2-contraction, claimed class is the
        // Rakotch modulus derived from its canonical MKC modulus.
        let s = unit_ball(3);
        let mut sampler = Sampler::seeded(13);
        let delta = rakotch_from_mkc(MkcModulus::canonical_for_contraction(0.5).unwrap());
        let map = MapDescriptor::new(
            MapKind::ScaledIdentity { factor: 0.5 },
            MapClass::Rakotch(delta),
        );
        let rep = check_class(&s, &map, &mut sampler, 600, 1e-12, &default_eps_grid()).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn cyclic_family_indexing() {
        let fam = MapFamily::Cyclic(vec![
            MapDescriptor::identity(),
            MapDescriptor::scaled_identity(0.5),
        ]);
        assert!(matches!(
            fam.get(3).kind,
            MapKind::ScaledIdentity { factor } if factor == 0.5
        ));
        assert!(matches!(
            fam.get(4).kind,
            MapKind::ScaledIdentity { factor } if factor == 1.0
        ));
    }

    #[test]
    fn table_map_nearest_anchor() {
        let s = unit_ball(1);
        let tbl = MapDescriptor::new(
            MapKind::Table {
                pairs: vec![
                    (pt(&[-0.5]), pt(&[-0.25])),
                    (pt(&[0.5]), pt(&[0.25])),
                ],
            },
            MapClass::Nonexpansive,
        );
        assert_eq!(tbl.apply(&s, &pt(&[0.4])).unwrap(), pt(&[0.25]));
        assert_eq!(tbl.apply(&s, &pt(&[-0.9])).unwrap(), pt(&[-0.25]));
    }
}

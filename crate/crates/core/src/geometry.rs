//! W-hyperbolic space abstraction: a metric `d` plus a convexity map
//! `W(x, y, λ)` on a closed ball `C`, with concrete normed-space instances
//! and a sampling-based axiom checker.

use crate::error::{Error, Result};
use crate::report::{CheckItem, VerificationReport};
use crate::scalar::{lit, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// A point of the ambient space. Entries are finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<F> {
    coords: Vec<F>,
}

impl<F: Real> Point<F> {
    pub fn new(coords: Vec<F>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("point has non-finite coordinate"));
        }
        Ok(Point { coords })
    }

    pub fn origin(dim: usize) -> Self {
        Point {
            coords: vec![F::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[F] {
        &self.coords
    }

    /// Coordinate-wise `(1-λ)·x + λ·y`.
    pub(crate) fn lerp(&self, other: &Point<F>, lambda: F) -> Point<F> {
        let one = F::one();
        Point {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| (one - lambda) * a + lambda * b)
                .collect(),
        }
    }
}

/// Which metric-plus-convexity structure the space carries.
///
/// All instances use the linear combination for `W` except
/// `BrokenLambdaSquared`, which applies `λ²` in place of `λ` and therefore
/// violates axiom (W2); it exists for negative tests of the axiom checker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ambient<F> {
    /// Euclidean norm, linear `W`. A Hilbert instance: all axioms plus CN⁻.
    Euclidean,
    /// `d(x,y) = sqrt(Σ wᵢ (xᵢ-yᵢ)²)` with positive weights; still Hilbert.
    WeightedEuclidean { weights: Vec<F> },
    /// Max norm, linear `W`. Satisfies (W1)-(W4) but not CN⁻.
    MaxNorm,
    /// Euclidean metric with `W(x,y,λ) = (1-λ²)x + λ²y`. Fails (W2).
    BrokenLambdaSquared,
}

/// A space instance: ambient structure plus the closed ball
/// `C = B(center, radius)` (in the space's own metric) and an integer
/// bound `b ≥ diam(C)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Space<F> {
    ambient: Ambient<F>,
    center: Point<F>,
    radius: F,
    diameter_bound: u64,
}

impl<F: Real> Space<F> {
    pub fn new(ambient: Ambient<F>, center: Point<F>, radius: F, diameter_bound: u64) -> Result<Self> {
        if !(radius > F::zero() && radius.is_finite()) {
            return Err(Error::input("ball radius must be positive and finite"));
        }
        if let Ambient::WeightedEuclidean { weights } = &ambient {
            if weights.len() != center.dim() {
                return Err(Error::DimensionMismatch(weights.len(), center.dim()));
            }
            if weights.iter().any(|w| !(*w > F::zero())) {
                return Err(Error::input("weights must be positive"));
            }
        }
        let diam = radius + radius;
        if F::from_u64(diameter_bound).unwrap() < diam {
            return Err(Error::input(format!(
                "diameter bound {diameter_bound} is below diam(C) = {diam}"
            )));
        }
        Ok(Space {
            ambient,
            center,
            radius,
            diameter_bound,
        })
    }

    /// Euclidean ball of the given radius centered at the origin.
    pub fn euclidean_ball(dim: usize, radius: F, diameter_bound: u64) -> Result<Self> {
        Space::new(Ambient::Euclidean, Point::origin(dim), radius, diameter_bound)
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn ambient(&self) -> &Ambient<F> {
        &self.ambient
    }

    pub fn center(&self) -> &Point<F> {
        &self.center
    }

    pub fn radius(&self) -> F {
        self.radius
    }

    pub fn diameter_bound(&self) -> u64 {
        self.diameter_bound
    }

    fn check_dims(&self, p: &Point<F>) -> Result<()> {
        if p.dim() != self.dim() {
            return Err(Error::DimensionMismatch(p.dim(), self.dim()));
        }
        Ok(())
    }

    /// Metric of the space.
    pub fn dist(&self, x: &Point<F>, y: &Point<F>) -> Result<F> {
        self.check_dims(x)?;
        self.check_dims(y)?;
        Ok(self.dist_unchecked(x, y))
    }

    pub(crate) fn dist_unchecked(&self, x: &Point<F>, y: &Point<F>) -> F {
        match &self.ambient {
            Ambient::Euclidean | Ambient::BrokenLambdaSquared => x
                .coords
                .iter()
                .zip(&y.coords)
                .fold(F::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
                .sqrt(),
            Ambient::WeightedEuclidean { weights } => x
                .coords
                .iter()
                .zip(&y.coords)
                .zip(weights)
                .fold(F::zero(), |acc, ((&a, &b), &w)| acc + w * (a - b) * (a - b))
                .sqrt(),
            Ambient::MaxNorm => x
                .coords
                .iter()
                .zip(&y.coords)
                .fold(F::zero(), |acc, (&a, &b)| acc.max((a - b).abs())),
        }
    }

    /// The convexity map `W(x, y, λ)`, written `(1-λ)x ⊕ λy`.
    pub fn w_combine(&self, x: &Point<F>, y: &Point<F>, lambda: F) -> Result<Point<F>> {
        self.check_dims(x)?;
        self.check_dims(y)?;
        if !(lambda >= F::zero() && lambda <= F::one()) {
            return Err(Error::input(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(self.w_unchecked(x, y, lambda))
    }

    pub(crate) fn w_unchecked(&self, x: &Point<F>, y: &Point<F>, lambda: F) -> Point<F> {
        match &self.ambient {
            Ambient::BrokenLambdaSquared => x.lerp(y, lambda * lambda),
            _ => x.lerp(y, lambda),
        }
    }

    /// Membership in `C` up to an absolute slack.
    pub fn contains(&self, p: &Point<F>, slack: F) -> bool {
        p.dim() == self.dim() && self.dist_unchecked(p, &self.center) <= self.radius + slack
    }

    /// Moves `p` onto `C` along the ray to the ball center (no-op inside).
    pub fn clamp_to_ball(&self, p: &Point<F>) -> Point<F> {
        let d = self.dist_unchecked(p, &self.center);
        if d <= self.radius {
            return p.clone();
        }
        // lerp from center with ratio radius/d lands on the sphere.
        self.center.lerp(p, self.radius / d)
    }
}

/// Deterministic counter-based point source (ChaCha8 keyed by an explicit
/// seed). Identical seeds reproduce identical sample streams.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn seeded(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn index(&mut self, bound: u64) -> u64 {
        self.rng.gen_range(0..bound.max(1))
    }

    fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform sample from the ball `C` of the space.
    pub fn point<F: Real>(&mut self, space: &Space<F>) -> Point<F> {
        let dim = space.dim();
        let coords: Vec<f64> = match space.ambient() {
            Ambient::MaxNorm => (0..dim).map(|_| self.uniform_in(-1.0, 1.0)).collect(),
            Ambient::Euclidean | Ambient::BrokenLambdaSquared => {
                self.unit_ball_euclidean(dim, &vec![1.0; dim])
            }
            Ambient::WeightedEuclidean { weights } => {
                let w: Vec<f64> = weights.iter().map(|x| x.to_f64().unwrap()).collect();
                self.unit_ball_euclidean(dim, &w)
            }
        };
        let r = space.radius();
        let cs = coords
            .iter()
            .zip(space.center().coords())
            .map(|(&u, &c)| c + r * lit::<F>(u))
            .collect();
        Point { coords: cs }
    }

    /// Uniform in the unit ball of `sqrt(Σ wᵢ xᵢ²)`.
    fn unit_ball_euclidean(&mut self, dim: usize, weights: &[f64]) -> Vec<f64> {
        let dir: Vec<f64> = (0..dim).map(|_| self.gaussian()).collect();
        let norm = dir
            .iter()
            .zip(weights)
            .map(|(g, w)| w * g * g)
            .sum::<f64>()
            .sqrt();
        let rho = self.uniform().powf(1.0 / dim as f64);
        if norm == 0.0 {
            return vec![0.0; dim];
        }
        dir.iter().map(|g| rho * g / norm).collect()
    }
}

/// Named axioms checked by [`check_w_axioms`].
pub const AXIOM_LABELS: [&str; 5] = ["W1", "W2", "W3", "W4", "CN-"];

/// Samples tuples from `C` and measures the worst violation of each of the
/// axioms (W1)-(W4), plus the CN⁻ inequality when `check_cn` is set.
///
/// The report carries the measured max violation per axiom; an axiom passes
/// iff its violation stays within `tol`.
pub fn check_w_axioms<F: Real>(
    space: &Space<F>,
    sampler: &mut Sampler,
    n_samples: usize,
    tol: F,
    check_cn: bool,
) -> Result<VerificationReport> {
    if n_samples == 0 {
        return Err(Error::input("n_samples must be at least 1"));
    }
    let mut v_w1 = F::zero();
    let mut v_w2 = F::zero();
    let mut v_w3 = F::zero();
    let mut v_w4 = F::zero();
    let mut v_cn = F::zero();
    let mut outside = F::zero();

    // Deterministic probes first: endpoints and midpoint expose broken
    // combiners even with few samples.
    let probe_lambdas = [0.0, 0.25, 0.5, 1.0];

    for k in 0..n_samples {
        let x = sampler.point(space);
        let y = sampler.point(space);
        let z = sampler.point(space);
        let w = sampler.point(space);
        let l = if k < probe_lambdas.len() {
            lit::<F>(probe_lambdas[k])
        } else {
            lit::<F>(sampler.uniform())
        };
        let l2 = lit::<F>(sampler.uniform());

        let wxy = space.w_unchecked(&x, &y, l);
        let one = F::one();

        // (W1) d(z, W(x,y,λ)) ≤ (1-λ)d(z,x) + λd(z,y)
        let lhs = space.dist_unchecked(&z, &wxy);
        let rhs = (one - l) * space.dist_unchecked(&z, &x) + l * space.dist_unchecked(&z, &y);
        v_w1 = v_w1.max(lhs - rhs);

        // (W2) d(W(x,y,λ₁), W(x,y,λ₂)) = |λ₁-λ₂| d(x,y)
        let wxy2 = space.w_unchecked(&x, &y, l2);
        let dev =
            (space.dist_unchecked(&wxy, &wxy2) - (l - l2).abs() * space.dist_unchecked(&x, &y)).abs();
        v_w2 = v_w2.max(dev);

        // (W3) W(x,y,λ) = W(y,x,1-λ)
        let wyx = space.w_unchecked(&y, &x, one - l);
        v_w3 = v_w3.max(space.dist_unchecked(&wxy, &wyx));

        // (W4) d(W(x,z,λ), W(y,w,λ)) ≤ (1-λ)d(x,y) + λd(z,w)
        let wxz = space.w_unchecked(&x, &z, l);
        let wyw = space.w_unchecked(&y, &w, l);
        let lhs4 = space.dist_unchecked(&wxz, &wyw);
        let rhs4 = (one - l) * space.dist_unchecked(&x, &y) + l * space.dist_unchecked(&z, &w);
        v_w4 = v_w4.max(lhs4 - rhs4);

        if check_cn {
            // CN⁻: d²(z, W(x,y,½)) ≤ ½d²(z,x) + ½d²(z,y) - ¼d²(x,y)
            let half = lit::<F>(0.5);
            let quarter = lit::<F>(0.25);
            let mid = space.w_unchecked(&x, &y, half);
            let dzm = space.dist_unchecked(&z, &mid);
            let dzx = space.dist_unchecked(&z, &x);
            let dzy = space.dist_unchecked(&z, &y);
            let dxy = space.dist_unchecked(&x, &y);
            v_cn = v_cn.max(dzm * dzm - (half * dzx * dzx + half * dzy * dzy - quarter * dxy * dxy));
        }

        // Convexity of C: combinations of members stay members.
        let d_out = space.dist_unchecked(&wxy, &space.center) - space.radius;
        outside = outside.max(d_out);
    }

    let mut report = VerificationReport::new(
        "w-axioms",
        format!("ambient={:?} dim={} samples={n_samples}", space.ambient, space.dim()),
    );
    report.tolerance = tol.to_f64().unwrap();
    let to = |v: F| v.max(F::zero()).to_f64().unwrap();
    report.push(CheckItem::from_violation("W1", to(v_w1), report.tolerance));
    report.push(CheckItem::from_violation("W2", to(v_w2), report.tolerance));
    report.push(CheckItem::from_violation("W3", to(v_w3), report.tolerance));
    report.push(CheckItem::from_violation("W4", to(v_w4), report.tolerance));
    if check_cn {
        report.push(CheckItem::from_violation("CN-", to(v_cn), report.tolerance));
    }
    report.push(CheckItem::from_violation(
        "ball-closure",
        to(outside),
        report.tolerance,
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::CheckStatus;

    fn pt(cs: &[f64]) -> Point<f64> {
        Point::new(cs.to_vec()).unwrap()
    }

    #[test]
    fn euclidean_distance() {
        let s = Space::euclidean_ball(2, 10.0, 20).unwrap();
        assert_eq!(s.dist(&pt(&[0.0, 0.0]), &pt(&[3.0, 4.0])).unwrap(), 5.0);
        let x = pt(&[1.25, -2.5]);
        assert_eq!(s.dist(&x, &x).unwrap(), 0.0);
        let s1 = Space::euclidean_ball(1, 2.0, 4).unwrap();
        assert_eq!(s1.dist(&pt(&[1.0]), &pt(&[-1.0])).unwrap(), 2.0);
    }

    #[test]
    fn dimension_mismatch_is_an_input_error() {
        let s = Space::euclidean_ball(2, 1.0, 2).unwrap();
        assert!(s.dist(&pt(&[0.0, 0.0]), &pt(&[1.0])).is_err());
    }

    #[test]
    fn w_combine_endpoints_and_midpoint() {
        let s = Space::euclidean_ball(2, 10.0, 20).unwrap();
        let x = pt(&[0.0, 0.0]);
        let y = pt(&[2.0, 0.0]);
        assert_eq!(s.w_combine(&x, &y, 0.0).unwrap(), x);
        assert_eq!(s.w_combine(&x, &y, 0.5).unwrap(), pt(&[1.0, 0.0]));
        assert_eq!(
            s.w_combine(&pt(&[0.0, 0.0]), &pt(&[4.0, 4.0]), 0.25).unwrap(),
            pt(&[1.0, 1.0])
        );
        assert!(s.w_combine(&x, &y, 1.5).is_err());
    }

    #[test]
    fn w_combine_metric_identities() {
        let s = Space::euclidean_ball(3, 5.0, 10).unwrap();
        let mut sampler = Sampler::seeded(7);
        for _ in 0..200 {
            let x = sampler.point(&s);
            let y = sampler.point(&s);
            let l = sampler.uniform();
            let m = s.w_combine(&x, &y, l).unwrap();
            let dxy = s.dist(&x, &y).unwrap();
            assert!((s.dist(&x, &m).unwrap() - l * dxy).abs() < 1e-12);
            assert!((s.dist(&y, &m).unwrap() - (1.0 - l) * dxy).abs() < 1e-12);
        }
    }

    #[test]
    fn axioms_pass_on_euclidean_ball() {
        let s = Space::euclidean_ball(2, 1.0, 2).unwrap();
        let mut sampler = Sampler::seeded(0);
        let rep = check_w_axioms(&s, &mut sampler, 1000, 1e-9, true).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn cn_minus_passes_on_weighted_hilbert_instance() {
        let s = Space::new(
            Ambient::WeightedEuclidean {
                weights: vec![1.0, 3.5],
            },
            Point::origin(2),
            1.0,
            2,
        )
        .unwrap();
        let mut sampler = Sampler::seeded(1);
        let rep = check_w_axioms(&s, &mut sampler, 1000, 1e-9, true).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn max_norm_passes_w_axioms_but_fails_cn_minus() {
        let s = Space::new(Ambient::MaxNorm, Point::origin(2), 1.0, 2).unwrap();
        let mut sampler = Sampler::seeded(2);
        let rep = check_w_axioms(&s, &mut sampler, 1000, 1e-9, true).unwrap();
        for ax in ["W1", "W2", "W3", "W4"] {
            assert_eq!(rep.item(ax).unwrap().status, CheckStatus::Pass, "{ax}");
        }
        assert_eq!(rep.item("CN-").unwrap().status, CheckStatus::Fail);
    }

    #[test]
    fn broken_lambda_squared_fails_w2() {
        let s = Space::new(Ambient::BrokenLambdaSquared, Point::origin(2), 1.0, 2).unwrap();
        let mut sampler = Sampler::seeded(3);
        let rep = check_w_axioms(&s, &mut sampler, 1000, 1e-9, false).unwrap();
        let w2 = rep.item("W2").unwrap();
        assert_eq!(w2.status, CheckStatus::Fail);
        // At λ₁=λ, λ₂=0 the deviation equals (λ-λ²)·d(x,y) > 0.
        assert!(w2.measured > 1e-3);
    }

    #[test]
    fn clamp_to_ball_is_idempotent_and_lands_inside() {
        let s = Space::euclidean_ball(2, 1.0, 2).unwrap();
        let far = pt(&[3.0, 4.0]);
        let c = s.clamp_to_ball(&far);
        assert!(s.contains(&c, 1e-12));
        assert!((s.dist(&c, s.center()).unwrap() - 1.0).abs() < 1e-12);
        let inside = pt(&[0.1, 0.2]);
        assert_eq!(s.clamp_to_ball(&inside), inside);
    }

    #[test]
    fn sampled_points_lie_in_the_ball() {
        for ambient in [
            Ambient::Euclidean,
            Ambient::MaxNorm,
            Ambient::WeightedEuclidean {
                weights: vec![0.5, 2.0, 1.0],
            },
        ] {
            let dim = match &ambient {
                Ambient::WeightedEuclidean { weights } => weights.len(),
                _ => 3,
            };
            let s = Space::new(ambient, Point::origin(dim), 0.75, 2).unwrap();
            let mut sampler = Sampler::seeded(5);
            for _ in 0..500 {
                let p = sampler.point(&s);
                assert!(s.contains(&p, 1e-12));
            }
        }
    }
}

//! Iteration schemes: implicit anchored sequences with certified inner
//! solves, the explicit Halpern / Krasnoselskii-Mann / hybrid recursions,
//! and deterministic error injection for their inexact variants.

use crate::error::{Error, Result};
use crate::geometry::{Point, Space};
use crate::mappings::{MapDescriptor, MapFamily, RakotchModulus};
use crate::rate_calculus::{ceil_clamped, DivergenceRate};
use crate::scalar::{lit, Real};
use serde::{Deserialize, Serialize};

/// Closed-form scalar sequences used for the step-size parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScalarSeq<F> {
    /// `1/(n+1)`.
    OneOverNPlus1,
    Constant(F),
    /// `1/(n+1)^p`.
    HarmonicPower { p: F },
    /// `base + amp·(-1)^n`.
    Alternating { base: F, amp: F },
    /// Explicit table, extended by its last entry.
    Table(Vec<F>),
}

impl<F: Real> ScalarSeq<F> {
    pub fn eval(&self, n: u64) -> F {
        match self {
            ScalarSeq::OneOverNPlus1 => F::one() / F::from_u64(n + 1).unwrap(),
            ScalarSeq::Constant(c) => *c,
            ScalarSeq::HarmonicPower { p } => {
                F::one() / F::from_u64(n + 1).unwrap().powf(*p)
            }
            ScalarSeq::Alternating { base, amp } => {
                if n % 2 == 0 {
                    *base + *amp
                } else {
                    *base - *amp
                }
            }
            ScalarSeq::Table(t) => {
                let i = (n as usize).min(t.len().saturating_sub(1));
                t[i]
            }
        }
    }

    /// Checks the declared domain on a prefix of indices.
    pub fn check_domain(&self, horizon: u64, lo_open: bool) -> Result<()> {
        for n in 0..=horizon {
            let v = self.eval(n);
            let ok = v <= F::one() && if lo_open { v > F::zero() } else { v >= F::zero() };
            if !ok {
                return Err(Error::input(format!(
                    "sequence value {v} at index {n} outside the declared domain"
                )));
            }
        }
        Ok(())
    }
}

/// Numerically validates a claimed divergence rate for `Σ sₙ`:
/// `Σ_{i=0}^{A(k)} sᵢ ≥ k` for every `k ≤ k_max`. Returns the largest
/// partial-sum shortfall (≤ 0 when the rate is valid on the range).
pub fn validate_divergence_rate<F: Real>(
    seq: &ScalarSeq<F>,
    rate: &DivergenceRate,
    k_max: u64,
    index_cap: u64,
) -> Result<F> {
    let mut worst = F::neg_infinity();
    for k in 0..=k_max {
        let top = rate.eval(k);
        if top > index_cap {
            return Err(Error::input(format!(
                "divergence rate at k={k} needs index {top} beyond the cap {index_cap}"
            )));
        }
        let mut sum = F::zero();
        for i in 0..=top {
            sum = sum + seq.eval(i);
        }
        worst = worst.max(F::from_u64(k).unwrap() - sum);
    }
    Ok(worst)
}

/// Inner tolerance for the implicit solves at step `n`. The default ties
/// the tolerance to the step size so that solver error stays negligible
/// against every ε used in bound checks: `τₙ = min{1e-10, αₙ·1e-6}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ToleranceSchedule<F> {
    AlphaTied,
    Fixed(F),
}

impl<F: Real> ToleranceSchedule<F> {
    pub fn eval(&self, alpha_n: F) -> F {
        match self {
            ToleranceSchedule::AlphaTied => lit::<F>(1e-10).min(alpha_n * lit::<F>(1e-6)),
            ToleranceSchedule::Fixed(t) => *t,
        }
    }
}

impl<F> Default for ToleranceSchedule<F> {
    fn default() -> Self {
        ToleranceSchedule::AlphaTied
    }
}

/// Certificate attached to an implicit solve: measured residual, iteration
/// count and the a-priori iteration budget it stayed within.
#[derive(Debug, Clone, Copy)]
pub struct SolveCertificate<F> {
    pub residual: F,
    pub iterations: u64,
    pub budget: u64,
}

fn banach_solve<F: Real>(
    space: &Space<F>,
    step: impl Fn(&Point<F>) -> Result<Point<F>>,
    start: Point<F>,
    tau: F,
    budget: u64,
) -> Result<(Point<F>, SolveCertificate<F>)> {
    let mut z = start;
    let mut iterations = 0u64;
    loop {
        let next = step(&z)?;
        let residual = space.dist_unchecked(&z, &next);
        if residual <= tau {
            return Ok((
                z,
                SolveCertificate {
                    residual,
                    iterations,
                    budget,
                },
            ));
        }
        if iterations >= budget {
            return Err(Error::Solver {
                reason: "iteration budget exceeded".into(),
                residual: residual.to_f64().unwrap(),
                iterations,
            });
        }
        z = next;
        iterations += 1;
    }
}

/// Budget for a Banach iteration with contraction factor `q ∈ [0,1)` on a
/// set of diameter ≤ `b`: after `⌈ln(τ·margin/b)/ln q⌉` steps the successive
/// displacement is below `τ·margin ≤ τ`.
fn banach_budget<F: Real>(q: F, tau_margin: F, b: F) -> Result<u64> {
    if q <= F::zero() {
        return Ok(1);
    }
    let target = tau_margin / b;
    if target >= F::one() {
        return Ok(1);
    }
    Ok(ceil_clamped(target.ln() / q.ln())?.saturating_add(1))
}

/// Solves `z = (1-αₙ)Sₙ(z) ⊕ αₙ·u` to residual ≤ τ by iterating the map,
/// which contracts with factor `1-αₙ` by (W4). Starts at the anchor, so all
/// iterates stay in `C`. The iteration count is bounded a priori by
/// `⌈ln(τ·αₙ/b) / ln(1-αₙ)⌉ + 1`.
pub fn browder_point<F: Real>(
    space: &Space<F>,
    family: &MapFamily<F>,
    u: &Point<F>,
    alpha_n: F,
    n: u64,
    tau: F,
) -> Result<(Point<F>, SolveCertificate<F>)> {
    if !(tau > F::zero()) {
        return Err(Error::input("inner tolerance must be positive"));
    }
    if !(alpha_n > F::zero() && alpha_n <= F::one()) {
        return Err(Error::input(format!("alpha_n = {alpha_n} outside (0, 1]")));
    }
    let b = F::from_u64(space.diameter_bound()).unwrap();
    let budget = banach_budget(F::one() - alpha_n, tau * alpha_n, b)?;
    let s_n = family.get(n);
    let step = |z: &Point<F>| -> Result<Point<F>> {
        let sz = s_n.apply(space, z)?;
        space.w_combine(&sz, u, alpha_n)
    };
    banach_solve(space, step, u.clone(), tau, budget)
}

/// Solves the viscosity analogue `z = (1-αₙ)Sₙ(z) ⊕ αₙ·φ(z)`.
///
/// With a constant Rakotch modulus δ the inner map contracts with factor
/// `1-αₙδ` outright. For a non-constant modulus the solve runs in stages:
/// iterate until the successive displacement drops below ε', halve ε', and
/// stop once the displacement is ≤ τ; the per-stage budget comes from the
/// factor `1-αₙδ(ε')` valid while displacements stay ≥ ε'.
pub fn viscosity_browder_point<F: Real>(
    space: &Space<F>,
    family: &MapFamily<F>,
    phi: &MapDescriptor<F>,
    delta: &RakotchModulus<F>,
    alpha_n: F,
    n: u64,
    tau: F,
) -> Result<(Point<F>, SolveCertificate<F>)> {
    if !(tau > F::zero()) {
        return Err(Error::input("inner tolerance must be positive"));
    }
    if !(alpha_n > F::zero() && alpha_n <= F::one()) {
        return Err(Error::input(format!("alpha_n = {alpha_n} outside (0, 1]")));
    }
    let b = F::from_u64(space.diameter_bound()).unwrap();
    let s_n = family.get(n);
    let step = |z: &Point<F>| -> Result<Point<F>> {
        let sz = s_n.apply(space, z)?;
        let pz = phi.apply(space, z)?;
        space.w_combine(&sz, &pz, alpha_n)
    };
    let start = phi.apply(space, space.center())?;

    if let Some(d) = delta.constant_value() {
        let q = F::one() - alpha_n * d;
        let budget = banach_budget(q, tau * alpha_n * d, b)?;
        return banach_solve(space, step, start, tau, budget);
    }

    // Staged solve for a genuinely ε-dependent modulus.
    let mut z = start;
    let mut eps_stage = b;
    let mut iterations = 0u64;
    let mut total_budget = 0u64;
    loop {
        let d = delta.eval(eps_stage)?;
        let q = F::one() - alpha_n * d;
        let stage_budget = banach_budget(q, eps_stage.min(tau), b)?;
        total_budget = total_budget.saturating_add(stage_budget);
        let mut stage_iters = 0u64;
        loop {
            let next = step(&z)?;
            let residual = space.dist_unchecked(&z, &next);
            if residual <= tau {
                return Ok((
                    z,
                    SolveCertificate {
                        residual,
                        iterations,
                        budget: total_budget,
                    },
                ));
            }
            z = next;
            iterations += 1;
            stage_iters += 1;
            if residual < eps_stage || stage_iters > stage_budget {
                break;
            }
        }
        eps_stage = eps_stage * lit::<F>(0.5);
        if eps_stage < tau * lit::<F>(1e-3) {
            let next = step(&z)?;
            let residual = space.dist_unchecked(&z, &next);
            return Err(Error::Solver {
                reason: "staged solve exhausted its halving schedule".into(),
                residual: residual.to_f64().unwrap(),
                iterations,
            });
        }
    }
}

/// Deterministic perturbation rule for inexact iterations: push the point
/// by the allowed magnitude toward the ball center (clamping at the center),
/// which never leaves `C`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationRule {
    TowardCenter,
}

fn perturb<F: Real>(space: &Space<F>, p: &Point<F>, magnitude: F) -> (Point<F>, F) {
    if magnitude <= F::zero() {
        return (p.clone(), F::zero());
    }
    let d = space.dist_unchecked(p, space.center());
    if d <= magnitude {
        return (space.center().clone(), d);
    }
    // lerp toward the center by exactly `magnitude` of metric distance.
    let moved = p.lerp(space.center(), magnitude / d);
    (moved, magnitude)
}

#[derive(Clone)]
enum Gen<F: Real> {
    /// Implicit anchored solve at every index.
    Browder {
        family: MapFamily<F>,
        anchor: Point<F>,
        alpha: ScalarSeq<F>,
        tol: ToleranceSchedule<F>,
    },
    /// Implicit viscosity solve at every index.
    ViscosityBrowder {
        family: MapFamily<F>,
        phi: MapDescriptor<F>,
        delta: RakotchModulus<F>,
        alpha: ScalarSeq<F>,
        tol: ToleranceSchedule<F>,
    },
    Halpern {
        family: MapFamily<F>,
        anchor: Point<F>,
        alpha: ScalarSeq<F>,
    },
    ViscosityHalpern {
        family: MapFamily<F>,
        phi: MapDescriptor<F>,
        alpha: ScalarSeq<F>,
    },
    Km {
        map: MapDescriptor<F>,
        beta: ScalarSeq<F>,
    },
    Vkm {
        map: MapDescriptor<F>,
        phi: MapDescriptor<F>,
        alpha: ScalarSeq<F>,
        beta: ScalarSeq<F>,
    },
}

impl<F: Real> Gen<F> {
    fn is_implicit(&self) -> bool {
        matches!(self, Gen::Browder { .. } | Gen::ViscosityBrowder { .. })
    }

    /// Point at index `n`; explicit schemes step from `prev` (the point at
    /// `n-1`, absent only for `n = 0`). Returns the point and its
    /// inner-solve residual (zero for explicit arithmetic).
    fn emit(
        &self,
        space: &Space<F>,
        n: u64,
        prev: Option<&Point<F>>,
        start: &Point<F>,
    ) -> Result<(Point<F>, F)> {
        match self {
            Gen::Browder {
                family,
                anchor,
                alpha,
                tol,
            } => {
                let a = alpha.eval(n);
                let (p, cert) = browder_point(space, family, anchor, a, n, tol.eval(a))?;
                Ok((p, cert.residual))
            }
            Gen::ViscosityBrowder {
                family,
                phi,
                delta,
                alpha,
                tol,
            } => {
                let a = alpha.eval(n);
                let (p, cert) =
                    viscosity_browder_point(space, family, phi, delta, a, n, tol.eval(a))?;
                Ok((p, cert.residual))
            }
            Gen::Halpern {
                family,
                anchor,
                alpha,
            } => match prev {
                None => Ok((start.clone(), F::zero())),
                Some(w) => {
                    let k = n - 1;
                    let sw = family.get(k).apply(space, w)?;
                    Ok((space.w_combine(&sw, anchor, alpha.eval(k))?, F::zero()))
                }
            },
            Gen::ViscosityHalpern { family, phi, alpha } => match prev {
                None => Ok((start.clone(), F::zero())),
                Some(x) => {
                    let k = n - 1;
                    let sx = family.get(k).apply(space, x)?;
                    let px = phi.apply(space, x)?;
                    Ok((space.w_combine(&sx, &px, alpha.eval(k))?, F::zero()))
                }
            },
            Gen::Km { map, beta } => match prev {
                None => Ok((start.clone(), F::zero())),
                Some(x) => {
                    let k = n - 1;
                    let tx = map.apply(space, x)?;
                    Ok((space.w_combine(x, &tx, beta.eval(k))?, F::zero()))
                }
            },
            Gen::Vkm {
                map,
                phi,
                alpha,
                beta,
            } => match prev {
                None => Ok((start.clone(), F::zero())),
                Some(x) => {
                    let k = n - 1;
                    let tx = map.apply(space, x)?;
                    let px = phi.apply(space, x)?;
                    let inner = space.w_combine(&tx, &px, alpha.eval(k))?;
                    Ok((space.w_combine(x, &inner, beta.eval(k))?, F::zero()))
                }
            },
        }
    }
}

/// Lazily generated iterate sequence with provenance: every emitted point
/// carries its inner-solve residual and (for inexact variants) the injected
/// error magnitude.
pub struct Trajectory<F: Real> {
    space: Space<F>,
    gen: Gen<F>,
    start: Point<F>,
    scheme: String,
    errors: Option<(ScalarSeq<F>, PerturbationRule)>,
    points: Vec<Point<F>>,
    residuals: Vec<F>,
    injected: Vec<F>,
}

impl<F: Real> Trajectory<F> {
    fn new(space: Space<F>, gen: Gen<F>, start: Point<F>, scheme: String) -> Result<Self> {
        if !space.contains(&start, lit::<F>(1e-9)) {
            return Err(Error::input("start point lies outside C"));
        }
        Ok(Trajectory {
            space,
            gen,
            start,
            scheme,
            errors: None,
            points: Vec::new(),
            residuals: Vec::new(),
            injected: Vec::new(),
        })
    }

    /// Implicit anchored sequence `yₙ = (1-αₙ)Sₙ(yₙ) ⊕ αₙ·u`.
    pub fn browder(
        space: Space<F>,
        family: MapFamily<F>,
        anchor: Point<F>,
        alpha: ScalarSeq<F>,
        tol: ToleranceSchedule<F>,
    ) -> Result<Self> {
        let start = anchor.clone();
        Trajectory::new(
            space,
            Gen::Browder {
                family,
                anchor,
                alpha,
                tol,
            },
            start,
            "browder".into(),
        )
    }

    /// Implicit viscosity sequence `xₙ = (1-αₙ)Sₙ(xₙ) ⊕ αₙ·φ(xₙ)`.
    pub fn viscosity_browder(
        space: Space<F>,
        family: MapFamily<F>,
        phi: MapDescriptor<F>,
        delta: RakotchModulus<F>,
        alpha: ScalarSeq<F>,
        tol: ToleranceSchedule<F>,
    ) -> Result<Self> {
        let start = phi.apply(&space, space.center())?;
        Trajectory::new(
            space,
            Gen::ViscosityBrowder {
                family,
                phi,
                delta,
                alpha,
                tol,
            },
            start,
            "viscosity-browder".into(),
        )
    }

    /// Explicit `w₀ = start`, `w_{n+1} = (1-αₙ)Sₙ(wₙ) ⊕ αₙ·u`.
    pub fn halpern(
        space: Space<F>,
        family: MapFamily<F>,
        anchor: Point<F>,
        start: Point<F>,
        alpha: ScalarSeq<F>,
    ) -> Result<Self> {
        Trajectory::new(
            space,
            Gen::Halpern {
                family,
                anchor,
                alpha,
            },
            start,
            "halpern".into(),
        )
    }

    /// Explicit `x_{n+1} = (1-αₙ)Sₙ(xₙ) ⊕ αₙ·φ(xₙ)`.
    pub fn viscosity_halpern(
        space: Space<F>,
        family: MapFamily<F>,
        phi: MapDescriptor<F>,
        start: Point<F>,
        alpha: ScalarSeq<F>,
    ) -> Result<Self> {
        Trajectory::new(
            space,
            Gen::ViscosityHalpern { family, phi, alpha },
            start,
            "viscosity-halpern".into(),
        )
    }

    /// `x_{n+1} = (1-βₙ)xₙ ⊕ βₙ·T(xₙ)`.
    pub fn km(
        space: Space<F>,
        map: MapDescriptor<F>,
        start: Point<F>,
        beta: ScalarSeq<F>,
    ) -> Result<Self> {
        Trajectory::new(space, Gen::Km { map, beta }, start, "km".into())
    }

    /// `x_{n+1} = (1-βₙ)xₙ ⊕ βₙ((1-αₙ)T(xₙ) ⊕ αₙφ(xₙ))`.
    pub fn vkm(
        space: Space<F>,
        map: MapDescriptor<F>,
        phi: MapDescriptor<F>,
        start: Point<F>,
        alpha: ScalarSeq<F>,
        beta: ScalarSeq<F>,
    ) -> Result<Self> {
        Trajectory::new(
            space,
            Gen::Vkm {
                map,
                phi,
                alpha,
                beta,
            },
            start,
            "vkm".into(),
        )
    }

    /// Inexact variant: after each step the point is displaced by at most
    /// `εₙ` toward the ball center. For explicit schemes the defining
    /// residual equals the displacement; for implicit schemes the allowance
    /// is split so that the perturbed point still satisfies its relation to
    /// within `εₙ`. Residuals are measured and recorded either way.
    pub fn with_errors(mut self, eps: ScalarSeq<F>, rule: PerturbationRule) -> Self {
        self.errors = Some((eps, rule));
        self.scheme = format!("{}+errors", self.scheme);
        self.points.clear();
        self.residuals.clear();
        self.injected.clear();
        self
    }

    pub fn scheme(&self) -> &str {
        &self.scheme
    }

    pub fn space(&self) -> &Space<F> {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn extend_to(&mut self, n: u64) -> Result<()> {
        while (self.points.len() as u64) <= n {
            let idx = self.points.len() as u64;
            let prev = self.points.last();
            let (p, solve_residual) = self.gen.emit(&self.space, idx, prev, &self.start)?;

            let (p, injected) = match &self.errors {
                None => (p, F::zero()),
                Some((eps_seq, PerturbationRule::TowardCenter)) => {
                    // Error sequence index: explicit recursions perturb the
                    // point produced *by* step n (i.e. x_{n+1} with error
                    // ε_n); the implicit relation at index n allows ε_n.
                    let slot = if self.gen.is_implicit() { idx } else { idx.checked_sub(1).unwrap_or(0) };
                    if !self.gen.is_implicit() && idx == 0 {
                        (p, F::zero()) // x'_0 = x_0 by definition
                    } else {
                        let eps_n = eps_seq.eval(slot);
                        let magnitude = if self.gen.is_implicit() {
                            ((eps_n - solve_residual) / lit::<F>(2.0)).max(F::zero())
                        } else {
                            eps_n
                        };
                        perturb(&self.space, &p, magnitude)
                    }
                }
            };

            if !self.space.contains(&p, lit::<F>(1e-12) * self.space.radius().max(F::one())) {
                return Err(Error::Solver {
                    reason: format!("iterate {idx} left C"),
                    residual: 0.0,
                    iterations: idx,
                });
            }
            self.points.push(p);
            self.residuals.push(solve_residual);
            self.injected.push(injected);
        }
        Ok(())
    }

    pub fn point(&mut self, n: u64) -> Result<&Point<F>> {
        self.extend_to(n)?;
        Ok(&self.points[n as usize])
    }

    /// All points `x₀..=xₙ` as a slice (generating as needed).
    pub fn points_upto(&mut self, n: u64) -> Result<&[Point<F>]> {
        self.extend_to(n)?;
        Ok(&self.points[..=(n as usize)])
    }

    pub fn generated(&self) -> &[Point<F>] {
        &self.points
    }

    pub fn residual_at(&self, n: u64) -> F {
        self.residuals.get(n as usize).copied().unwrap_or(F::zero())
    }

    pub fn injected_at(&self, n: u64) -> F {
        self.injected.get(n as usize).copied().unwrap_or(F::zero())
    }

    /// Measures the defining residual of the (possibly perturbed) point at
    /// index `n` against its scheme relation. For explicit schemes this is
    /// `d(x_{n+1}, step(x_n))`; for implicit ones `d(xₙ, Gₙ(xₙ))`.
    pub fn defining_residual(&mut self, n: u64) -> Result<F> {
        self.extend_to(n)?;
        let here = self.points[n as usize].clone();
        match &self.gen {
            Gen::Browder {
                family,
                anchor,
                alpha,
                ..
            } => {
                let a = alpha.eval(n);
                let s = family.get(n).apply(&self.space, &here)?;
                let target = self.space.w_combine(&s, anchor, a)?;
                self.space.dist(&here, &target)
            }
            Gen::ViscosityBrowder {
                family,
                phi,
                alpha,
                ..
            } => {
                let a = alpha.eval(n);
                let s = family.get(n).apply(&self.space, &here)?;
                let p = phi.apply(&self.space, &here)?;
                let target = self.space.w_combine(&s, &p, a)?;
                self.space.dist(&here, &target)
            }
            _ => {
                if n == 0 {
                    return Ok(F::zero());
                }
                let prev = self.points[(n - 1) as usize].clone();
                let (ideal, _) = self.gen.emit(&self.space, n, Some(&prev), &self.start)?;
                self.space.dist(&here, &ideal)
            }
        }
    }

    /// Sum of recorded inner-solve residuals over `[lo, hi]`; the verifier
    /// widens its tolerances by twice this amount.
    pub fn accumulated_slack(&mut self, lo: u64, hi: u64) -> Result<F> {
        self.extend_to(hi)?;
        let mut acc = F::zero();
        for i in lo..=hi {
            acc = acc + self.residuals[i as usize];
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mappings::{rakotch_from_contraction, MapClass, MapKind};

    fn ball1(dim: usize) -> Space<f64> {
        Space::euclidean_ball(dim, 0.5, 1).unwrap()
    }

    fn pt(cs: &[f64]) -> Point<f64> {
        Point::new(cs.to_vec()).unwrap()
    }

    #[test]
    fn browder_point_identity_family_returns_anchor() {
        // (1-α)z ⊕ αu = z forces z = u.
        let s = ball1(2);
        let fam = MapFamily::constant(MapDescriptor::identity());
        let u = pt(&[0.3, -0.2]);
        let (z, cert) = browder_point(&s, &fam, &u, 0.5, 0, 1e-10).unwrap();
        assert!(s.dist(&z, &u).unwrap() <= 1e-10);
        assert!(cert.iterations <= cert.budget);
    }

    #[test]
    fn browder_point_constant_family_hits_midpoint() {
        let s = ball1(1);
        let c = pt(&[0.4]);
        let fam = MapFamily::constant(MapDescriptor::constant(&s, c));
        let u = pt(&[-0.2]);
        let (z, _) = browder_point(&s, &fam, &u, 0.5, 0, 1e-12).unwrap();
        // z = ½·0.4 + ½·(-0.2) = 0.1
        assert!((z.coords()[0] - 0.1).abs() <= 1e-10);
    }

    #[test]
    fn browder_point_linear_solve() {
        // S = ½-scaling on the ball about 0, α = ½, u = (1,0)·scaled:
        // z = ¼z + ½u ⇒ z = (2/3)u.
        let s = Space::euclidean_ball(2, 1.0, 2).unwrap();
        let fam = MapFamily::constant(MapDescriptor::scaled_identity(0.5));
        let u = pt(&[1.0, 0.0]);
        let (z, cert) = browder_point(&s, &fam, &u, 0.5, 3, 1e-12).unwrap();
        assert!((z.coords()[0] - 2.0 / 3.0).abs() <= 1e-10);
        assert!(z.coords()[1].abs() <= 1e-12);
        assert!(cert.iterations <= cert.budget, "{cert:?}");
    }

    #[test]
    fn browder_degenerate_alpha_one_solves_in_one_step() {
        let s = ball1(1);
        let fam = MapFamily::constant(MapDescriptor::scaled_identity(0.5));
        let u = pt(&[0.25]);
        let (z, cert) = browder_point(&s, &fam, &u, 1.0, 0, 1e-12).unwrap();
        assert_eq!(z.coords()[0], 0.25);
        assert!(cert.iterations <= 1);
    }

    #[test]
    fn viscosity_browder_point_solves_linear_cases() {
        // S = id, φ = ½-scaling, α = ½ on a 1-d ball about 0: z = 0.
        let s = ball1(1);
        let fam = MapFamily::constant(MapDescriptor::identity());
        let phi = MapDescriptor::scaled_identity(0.5);
        let delta = rakotch_from_contraction(0.5).unwrap();
        let (z, _) = viscosity_browder_point(&s, &fam, &phi, &delta, 0.5, 0, 1e-11).unwrap();
        assert!(z.coords()[0].abs() <= 1e-9);

        // S = ½-scaling, φ = ¼-scaling, α = ½: z = ⅜z ⇒ z = 0.
        let fam = MapFamily::constant(MapDescriptor::scaled_identity(0.5));
        let phi = MapDescriptor::scaled_identity(0.25);
        let delta = rakotch_from_contraction(0.25).unwrap();
        let (z, cert) = viscosity_browder_point(&s, &fam, &phi, &delta, 0.5, 0, 1e-11).unwrap();
        assert!(z.coords()[0].abs() <= 1e-9);
        assert!(cert.iterations <= cert.budget);
    }

    #[test]
    fn viscosity_browder_constant_phi_matches_browder() {
        let s = ball1(2);
        let fam = MapFamily::constant(MapDescriptor::scaled_identity(0.5));
        let c = pt(&[0.2, 0.1]);
        let phi = MapDescriptor::constant(&s, c.clone());
        let delta = rakotch_from_contraction(0.0).unwrap();
        let (z1, _) = viscosity_browder_point(&s, &fam, &phi, &delta, 0.25, 2, 1e-12).unwrap();
        let (z2, _) = browder_point(&s, &fam, &c, 0.25, 2, 1e-12).unwrap();
        assert!(s.dist(&z1, &z2).unwrap() <= 1e-10);
    }

    #[test]
    fn viscosity_browder_staged_solver_handles_nonconstant_modulus() {
        let s = ball1(1);
        let fam = MapFamily::constant(MapDescriptor::identity());
        let phi = MapDescriptor::scaled_identity(0.5);
        // Genuine ε-dependent modulus, weaker than the constant one.
        let delta = RakotchModulus::from_fn(|eps: f64| (0.25 * eps.min(1.0)).max(1e-6));
        let (z, cert) = viscosity_browder_point(&s, &fam, &phi, &delta, 0.5, 0, 1e-9).unwrap();
        assert!(z.coords()[0].abs() <= 1e-6);
        assert!(cert.residual <= 1e-9);
    }

    #[test]
    fn halpern_hand_recursion() {
        // T = id, α ≡ ½, u = ·, w₀ = 0: wₙ = 1 - 2⁻ⁿ scaled into C.
        let s = ball1(1);
        let fam = MapFamily::constant(MapDescriptor::identity());
        let u = pt(&[0.5]);
        let mut traj =
            Trajectory::halpern(s, fam, u, pt(&[0.0]), ScalarSeq::Constant(0.5)).unwrap();
        let expect = [0.0, 0.25, 0.375, 0.4375];
        for (n, e) in expect.iter().enumerate() {
            assert!((traj.point(n as u64).unwrap().coords()[0] - e).abs() < 1e-15);
        }
    }

    #[test]
    fn halpern_constant_map_fixed_at_anchor() {
        let s = ball1(1);
        let c = pt(&[0.3]);
        let fam = MapFamily::constant(MapDescriptor::constant(&s, c.clone()));
        let mut traj = Trajectory::halpern(
            s,
            fam,
            c.clone(),
            c.clone(),
            ScalarSeq::OneOverNPlus1,
        )
        .unwrap();
        for n in 0..50 {
            assert!((traj.point(n).unwrap().coords()[0] - 0.3).abs() < 1e-15);
        }
    }

    #[test]
    fn viscosity_halpern_hand_recursion() {
        // T = id, φ = ½-scaling, α ≡ ½, x₀ = 0.5: x₁ = ⅜, x₂ = 9/32
        // (the classic 1, ¾, 9/16 sequence scaled by the start point).
        let s = ball1(1);
        let fam = MapFamily::constant(MapDescriptor::identity());
        let phi = MapDescriptor::scaled_identity(0.5);
        let mut traj =
            Trajectory::viscosity_halpern(s, fam, phi, pt(&[0.5]), ScalarSeq::Constant(0.5))
                .unwrap();
        assert!((traj.point(1).unwrap().coords()[0] - 0.375).abs() < 1e-15);
        assert!((traj.point(2).unwrap().coords()[0] - 0.28125).abs() < 1e-15);
    }

    #[test]
    fn km_reflection_collapses_to_zero() {
        let s = ball1(1);
        let neg = MapDescriptor::new(
            MapKind::Affine {
                matrix: vec![vec![-1.0]],
                shift: vec![0.0],
            },
            MapClass::Nonexpansive,
        );
        let mut traj = Trajectory::km(s, neg, pt(&[0.5]), ScalarSeq::Constant(0.5)).unwrap();
        assert_eq!(traj.point(1).unwrap().coords()[0], 0.0);
        assert_eq!(traj.point(5).unwrap().coords()[0], 0.0);
    }

    #[test]
    fn km_half_rotation_reaches_center_in_one_step() {
        let s = Space::euclidean_ball(2, 1.0, 2).unwrap();
        let rot = MapDescriptor::rotation(std::f64::consts::PI);
        let mut traj = Trajectory::km(s, rot, pt(&[1.0, 0.0]), ScalarSeq::Constant(0.5)).unwrap();
        let p1 = traj.point(1).unwrap();
        assert!(p1.coords()[0].abs() < 1e-15 && p1.coords()[1].abs() < 1e-15);
    }

    #[test]
    fn km_identity_is_constant() {
        let s = ball1(1);
        let mut traj = Trajectory::km(
            s,
            MapDescriptor::identity(),
            pt(&[0.2]),
            ScalarSeq::Constant(0.5),
        )
        .unwrap();
        for n in 0..20 {
            assert_eq!(traj.point(n).unwrap().coords()[0], 0.2);
        }
    }

    #[test]
    fn vkm_hand_value_and_equivalences() {
        // T = id, φ ≡ 0, α = β = ½, x₀ = 0.5: x₁ = ½x₀ + ½(½x₀) = 0.375.
        let s = ball1(1);
        let phi0 = MapDescriptor::constant(&s, pt(&[0.0]));
        let mut traj = Trajectory::vkm(
            s.clone(),
            MapDescriptor::identity(),
            phi0.clone(),
            pt(&[0.5]),
            ScalarSeq::Constant(0.5),
            ScalarSeq::Constant(0.5),
        )
        .unwrap();
        assert!((traj.point(1).unwrap().coords()[0] - 0.375).abs() < 1e-15);

        // β ≡ 1 reduces vkm to the viscosity-Halpern recursion pointwise.
        let t = MapDescriptor::scaled_identity(0.5);
        let phi = MapDescriptor::scaled_identity(0.25);
        let mut a = Trajectory::vkm(
            s.clone(),
            t.clone(),
            phi.clone(),
            pt(&[0.4]),
            ScalarSeq::OneOverNPlus1,
            ScalarSeq::Constant(1.0),
        )
        .unwrap();
        let mut b = Trajectory::viscosity_halpern(
            s.clone(),
            MapFamily::constant(t.clone()),
            phi.clone(),
            pt(&[0.4]),
            ScalarSeq::OneOverNPlus1,
        )
        .unwrap();
        for n in 0..200 {
            let d = s
                .dist(a.point(n).unwrap(), b.point(n).unwrap())
                .unwrap();
            assert!(d <= 1e-12, "n={n} d={d}");
        }

        // α ≡ 0 in the inner combine reduces vkm to km pointwise.
        let mut c = Trajectory::vkm(
            s.clone(),
            t.clone(),
            phi,
            pt(&[0.4]),
            ScalarSeq::Constant(0.0),
            ScalarSeq::Constant(0.5),
        )
        .unwrap();
        let mut d = Trajectory::km(s.clone(), t, pt(&[0.4]), ScalarSeq::Constant(0.5)).unwrap();
        for n in 0..200 {
            let dist = s
                .dist(c.point(n).unwrap(), d.point(n).unwrap())
                .unwrap();
            assert!(dist <= 1e-12, "n={n}");
        }
    }

    #[test]
    fn viscosity_schemes_with_constant_phi_equal_anchored_schemes() {
        let s = ball1(2);
        let c = pt(&[0.1, -0.3]);
        let fam = MapFamily::constant(MapDescriptor::scaled_identity(0.5));
        let phi = MapDescriptor::constant(&s, c.clone());
        let mut vh = Trajectory::viscosity_halpern(
            s.clone(),
            fam.clone(),
            phi,
            c.clone(),
            ScalarSeq::OneOverNPlus1,
        )
        .unwrap();
        let mut h =
            Trajectory::halpern(s.clone(), fam, c.clone(), c, ScalarSeq::OneOverNPlus1).unwrap();
        for n in 0..200 {
            let d = s.dist(vh.point(n).unwrap(), h.point(n).unwrap()).unwrap();
            assert!(d <= 1e-12, "n={n}");
        }
    }

    #[test]
    fn zero_error_injection_leaves_trajectory_unchanged() {
        let s = ball1(1);
        let fam = MapFamily::constant(MapDescriptor::scaled_identity(0.5));
        let base = Trajectory::halpern(
            s.clone(),
            fam.clone(),
            pt(&[0.25]),
            pt(&[0.4]),
            ScalarSeq::Constant(0.5),
        )
        .unwrap();
        let mut relaxed = Trajectory::halpern(
            s.clone(),
            fam,
            pt(&[0.25]),
            pt(&[0.4]),
            ScalarSeq::Constant(0.5),
        )
        .unwrap()
        .with_errors(ScalarSeq::Constant(0.0), PerturbationRule::TowardCenter);
        let mut base = base;
        for n in 0..100 {
            let d = s
                .dist(base.point(n).unwrap(), relaxed.point(n).unwrap())
                .unwrap();
            assert_eq!(d, 0.0, "n={n}");
        }
    }

    #[test]
    fn injected_errors_respect_the_declared_magnitudes() {
        let s = ball1(1);
        let fam = MapFamily::constant(MapDescriptor::scaled_identity(0.5));
        let eps = ScalarSeq::HarmonicPower { p: 2.0 };
        let mut traj = Trajectory::viscosity_halpern(
            s.clone(),
            fam,
            MapDescriptor::scaled_identity(0.5),
            pt(&[0.45]),
            ScalarSeq::OneOverNPlus1,
        )
        .unwrap()
        .with_errors(eps.clone(), PerturbationRule::TowardCenter);
        traj.points_upto(60).unwrap();
        for n in 1..=60u64 {
            // d(x'_{n}, step(x'_{n-1})) ≤ ε_{n-1}
            let res = traj.defining_residual(n).unwrap();
            assert!(
                res <= eps.eval(n - 1) + 1e-15,
                "n={n} res={res} allowed={}",
                eps.eval(n - 1)
            );
        }
    }

    #[test]
    fn implicit_injection_keeps_relation_within_epsilon() {
        let s = ball1(1);
        let fam = MapFamily::constant(MapDescriptor::scaled_identity(0.5));
        let phi = MapDescriptor::constant(&s, pt(&[0.3]));
        let delta = rakotch_from_contraction(0.0).unwrap();
        let eps = ScalarSeq::HarmonicPower { p: 2.0 };
        let mut traj = Trajectory::viscosity_browder(
            s,
            fam,
            phi,
            delta,
            ScalarSeq::OneOverNPlus1,
            ToleranceSchedule::AlphaTied,
        )
        .unwrap()
        .with_errors(eps.clone(), PerturbationRule::TowardCenter);
        for n in 0..40u64 {
            let res = traj.defining_residual(n).unwrap();
            assert!(res <= eps.eval(n) + 1e-12, "n={n} res={res}");
        }
    }

    #[test]
    fn emitted_points_stay_in_c_and_certificates_recorded() {
        let s = ball1(2);
        let fam = MapFamily::constant(MapDescriptor::scaled_identity(0.5));
        let phi = MapDescriptor::constant(&s, pt(&[0.2, 0.2]));
        let delta = rakotch_from_contraction(0.0).unwrap();
        let mut traj = Trajectory::viscosity_browder(
            s.clone(),
            fam,
            phi,
            delta,
            ScalarSeq::OneOverNPlus1,
            ToleranceSchedule::AlphaTied,
        )
        .unwrap();
        traj.points_upto(30).unwrap();
        for n in 0..=30u64 {
            assert!(s.contains(traj.point(n).unwrap(), 1e-12));
            let alpha = 1.0 / (n as f64 + 1.0);
            let tau = ToleranceSchedule::AlphaTied.eval(alpha);
            assert!(traj.residual_at(n) <= tau, "n={n}");
        }
    }

    #[test]
    fn scalar_seq_families() {
        let one_over: ScalarSeq<f64> = ScalarSeq::OneOverNPlus1;
        assert_eq!(one_over.eval(0), 1.0);
        assert_eq!(one_over.eval(3), 0.25);
        let alt = ScalarSeq::Alternating {
            base: 0.5,
            amp: 0.25,
        };
        assert_eq!(alt.eval(0), 0.75);
        assert_eq!(alt.eval(1), 0.25);
        let tab = ScalarSeq::Table(vec![0.5, 0.25]);
        assert_eq!(tab.eval(5), 0.25);
        assert!(one_over.check_domain(100, true).is_ok());
        assert!(ScalarSeq::Constant(0.0).check_domain(10, true).is_err());
    }

    #[test]
    fn divergence_rate_validation() {
        // α ≡ ½ with A(k) = 2k: Σ_{i≤2k} ½ = (2k+1)/2 ≥ k.
        let seq = ScalarSeq::Constant(0.5);
        let a = DivergenceRate::affine(2, 0);
        let worst = validate_divergence_rate(&seq, &a, 50, 10_000).unwrap();
        assert!(worst <= 0.0);

        // A(k) = 4k fails for the α·β ≡ harmonic/2 product sequence.
        let half_harmonic: ScalarSeq<f64> = ScalarSeq::Table(
            (0..200).map(|i| 0.5 / (i as f64 + 1.0)).collect(),
        );
        let bad = DivergenceRate::affine(4, 0);
        let worst = validate_divergence_rate(&half_harmonic, &bad, 3, 10_000).unwrap();
        assert!(worst > 0.0, "4k is not a divergence rate for sum 1/(2(n+1))");
    }
}

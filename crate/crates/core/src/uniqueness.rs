//! Moduli of uniform accretivity and uniqueness for operators `A = I - T`
//! on balls of uniformly convex spaces, the residual thresholds they induce,
//! explicit Cauchy rates for the path / KM / Halpern iterations, and the
//! concrete testbed operators the verifier exercises them on.
//!
//! Everything in the modulus calculus uses field operations only, so it is
//! generic over [`Field`] and can run in exact rational arithmetic; the
//! iteration rates need logs and square roots and are [`Real`]-only.
//!
//! Throughout, `b` bounds the norms of points of `C` (the testbeds use the
//! ball of radius `b` about the origin), unlike the diameter bound carried
//! by [`crate::geometry::Space`].

use crate::error::{Error, Result};
use crate::geometry::{Point, Sampler, Space};
use crate::mappings::{MapClass, MapDescriptor, MapKind};
use crate::rate_calculus::{ceil_clamped, CauchyRate, DivergenceRate};
use crate::scalar::{lit, nat, Field, Real};
use crate::schemes::ScalarSeq;

/// Modulus of uniform convexity `η : (0,2] → (0,1]`, extended by the
/// constant `1` above `2`. Realized as `η(ε) = ε^p / den`; the factored
/// form `η(ε) = ε·η̃(ε)` with nondecreasing `η̃` exists whenever `p ≥ 1`.
#[derive(Debug, Clone)]
pub struct ConvexityModulus {
    den: u64,
    exp: u32,
}

impl ConvexityModulus {
    pub fn power(den: u64, exp: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::modulus("denominator must be positive"));
        }
        // The form must map (0,2] into (0,1].
        if 2u64.checked_pow(exp).map_or(true, |v| v > den) {
            return Err(Error::modulus(format!(
                "eta(2) = 2^{exp}/{den} exceeds 1"
            )));
        }
        Ok(ConvexityModulus { den, exp })
    }

    /// `η(ε) = ε²/8`, valid for Hilbert spaces; `η̃(ε) = ε/8`.
    pub fn hilbert() -> Self {
        ConvexityModulus { den: 8, exp: 2 }
    }

    pub fn has_factored_form(&self) -> bool {
        self.exp >= 1
    }

    fn pow<S: Field>(x: S, e: u32) -> S {
        let mut acc = S::one();
        for _ in 0..e {
            acc = acc * x.clone();
        }
        acc
    }

    /// `η(ε)`, with the constant-1 extension above 2.
    pub fn eval<S: Field>(&self, eps: S) -> S {
        let two = nat::<S>(2);
        if eps > two {
            return S::one();
        }
        Self::pow(eps, self.exp) / nat::<S>(self.den)
    }

    /// `η̃(ε) = η(ε)/ε`, the factored form (no extension applied: callers
    /// use it only through `b·η(·)` identities).
    pub fn eval_tilde<S: Field>(&self, eps: S) -> Result<S> {
        if !self.has_factored_form() {
            return Err(Error::contract(
                "modulus has no factored form (exponent 0)",
            ));
        }
        Ok(Self::pow(eps, self.exp - 1) / nat::<S>(self.den))
    }
}

/// Lower bound `ι(ε) ≤ inf_{x∈[0,b]}(φ(x+ε) - φ(x))` on the increments of
/// the strictly increasing function witnessing uniform accretivity.
#[derive(Debug, Clone)]
pub enum IncrementModulus {
    /// For `φ(t) = slope·t`: `ι(ε) = slope·ε`.
    Linear { slope_num: u64, slope_den: u64 },
    /// `ι ≡ κ` given as a fraction.
    Constant { num: u64, den: u64 },
}

impl IncrementModulus {
    pub fn eval<S: Field>(&self, eps: S) -> S {
        match self {
            IncrementModulus::Linear {
                slope_num,
                slope_den,
            } => nat::<S>(*slope_num) * eps / nat::<S>(*slope_den),
            IncrementModulus::Constant { num, den } => nat::<S>(*num) / nat::<S>(*den),
        }
    }
}

/// Modulus of uniform accretivity `Ω(ε, b)`: a positive lower bound on
/// `⟨Ax - Ay, j⟩` over pairs in the `b`-ball whose norms differ by ≥ ε.
#[derive(Debug, Clone)]
pub enum AccretivityModulus {
    /// `Ω(ε) = num·ε²/den` (independent of `b`).
    Quad { num: u64, den: u64 },
    /// `Ω(ε, b) = ε·ι(ε)/2` built from an increment modulus.
    FromIncrement(IncrementModulus),
}

impl AccretivityModulus {
    pub fn eval<S: Field>(&self, eps: S, _b: S) -> Result<S> {
        let v = match self {
            AccretivityModulus::Quad { num, den } => {
                nat::<S>(*num) * eps.clone() * eps / nat::<S>(*den)
            }
            AccretivityModulus::FromIncrement(iota) => {
                omega_from_increment(iota, eps.clone(), S::zero())?
            }
        };
        Ok(v)
    }
}

/// `Ω(ε, b) := ε·ι(ε)/2`. Halving the increment bound keeps the defining
/// inequality strict.
pub fn omega_from_increment<S: Field>(iota: &IncrementModulus, eps: S, _b: S) -> Result<S> {
    let i = iota.eval(eps.clone());
    if !(i > S::zero()) {
        return Err(Error::modulus("increment modulus must be positive"));
    }
    Ok(eps * i / nat::<S>(2))
}

/// Modulus of uniqueness `ω_b(ε)`: a residual threshold such that any two
/// `ω_b(ε)`-approximate fixed points of `T = I - A` are `ε`-close.
///
/// General form:
/// `ω_b(ε) = (1/16b)·Ω((ε/2)·η(ε/b)) · η((1/8b²)·Ω((ε/2)·η(ε/b)))`.
/// With the factored form `η(ε) = ε·η̃(ε)` (nondecreasing `η̃`) this
/// improves to
/// `ω_b(ε) = min{ b·η(Ω(b·η(ε/b))/(8b²)), Ω(b·η(ε/b))/(4b) }`.
pub fn modulus_of_uniqueness<S: Field>(
    omega: &AccretivityModulus,
    eta: &ConvexityModulus,
    b: S,
    eps: S,
    improved: bool,
) -> Result<S> {
    if !(b > S::zero() && eps > S::zero()) {
        return Err(Error::input("b and eps must be positive"));
    }
    if improved {
        if !eta.has_factored_form() {
            return Err(Error::contract(
                "improved form needs the factored modulus",
            ));
        }
        let inner = b.clone() * eta.eval(eps / b.clone());
        let om = omega.eval(inner, b.clone())?;
        let eight_bb = nat::<S>(8) * b.clone() * b.clone();
        let first = b.clone() * eta.eval(om.clone() / eight_bb);
        let second = om / (nat::<S>(4) * b);
        Ok(if first < second { first } else { second })
    } else {
        let half = S::one() / nat::<S>(2);
        let inner = eps.clone() * half * eta.eval(eps / b.clone());
        let om = omega.eval(inner, b.clone())?;
        let sixteen_b = nat::<S>(16) * b.clone();
        let eight_bb = nat::<S>(8) * b.clone() * b;
        Ok(om.clone() / sixteen_b * eta.eval(om / eight_bb))
    }
}

/// `β(b, ε) = (ε/2)·η(ε/b)`, or `β'(b, ε) = b·η(ε/b)` with the factored
/// form: the drop in norm achieved by the midpoint of two far-apart points.
pub fn beta_lemma3<S: Field>(
    eta: &ConvexityModulus,
    b: S,
    eps: S,
    improved: bool,
) -> Result<S> {
    if improved {
        if !eta.has_factored_form() {
            return Err(Error::contract(
                "improved form needs the factored modulus",
            ));
        }
        Ok(b.clone() * eta.eval(eps / b))
    } else {
        Ok(eps.clone() / nat::<S>(2) * eta.eval(eps / b))
    }
}

/// `ε·η(ε/2b)/4` (improved: `b·η(ε/2b)`): residual threshold under which
/// the midpoint of two approximate fixed points is an `ε`-approximate
/// fixed point.
pub fn midpoint_afp_threshold<S: Field>(
    eta: &ConvexityModulus,
    b: S,
    eps: S,
    improved: bool,
) -> Result<S> {
    let arg = eps.clone() / (nat::<S>(2) * b.clone());
    if improved {
        if !eta.has_factored_form() {
            return Err(Error::contract(
                "improved form needs the factored modulus",
            ));
        }
        Ok(b * eta.eval(arg))
    } else {
        Ok(eps * eta.eval(arg) / nat::<S>(4))
    }
}

/// `Ω(ε)/4b`: residual threshold under which approximate fixed points have
/// norms within ε of each other.
pub fn norm_gap_threshold<S: Field>(omega: &AccretivityModulus, b: S, eps: S) -> Result<S> {
    let om = omega.eval(eps, b.clone())?;
    Ok(om / (nat::<S>(4) * b))
}

/// `ω_b(ε)/2b`: the step-size threshold below which any two points of the
/// implicit path `x_α = (1-α)T(x_α) + αc` are `ε`-close.
pub fn path_cauchy_threshold<S: Field>(omega_b_value: S, b: S) -> S {
    omega_b_value / (nat::<S>(2) * b)
}

/// The residual bound `‖xₙ - Txₙ‖ ≤ 2b/√(π·Σ_{i=0}^n βᵢ(1-βᵢ))` for the
/// KM iteration. A zero partial sum yields the +∞ sentinel.
pub fn km_residual_bound<F: Real>(b: F, beta: &ScalarSeq<F>, n: u64) -> F {
    let mut sum = F::zero();
    for i in 0..=n {
        let bi = beta.eval(i);
        sum = sum + bi * (F::one() - bi);
    }
    if sum <= F::zero() {
        return F::infinity();
    }
    lit::<F>(2.0) * b / (lit::<F>(std::f64::consts::PI) * sum).sqrt()
}

/// Cauchy rate for the KM iteration: `γ(⌈4b²/(π·ω²)⌉)` where γ is a
/// divergence rate for `Σ βₙ(1-βₙ)` and ω = ω_b(ε).
pub fn km_cauchy_rate<F: Real>(gamma: &DivergenceRate, b: F, omega_b_value: F) -> Result<u64> {
    if !(omega_b_value > F::zero()) {
        return Err(Error::input("modulus value must be positive"));
    }
    let arg = lit::<F>(4.0) * b * b
        / (lit::<F>(std::f64::consts::PI) * omega_b_value * omega_b_value);
    Ok(gamma.eval(ceil_clamped(arg)?))
}

/// The Halpern Cauchy-rate functional
/// `Φ(ε, b, θ, α, β, D) = max{θ(Dε/4b) + 1, α(ε/4b)} + 1`, where θ is a
/// convergence rate for `∏(1-α_{n+1}) → 0`, α a rate for `αₙ → 0`, β a
/// Cauchy modulus for `Σ|α_{i+1} - αᵢ|`, and
/// `0 < D ≤ ∏_{n=1}^{β(ε/8b)}(1-α_{n+1})` (the β-dependence enters through
/// the caller's choice of `D`). The Cauchy rate for the iteration is
/// `Φ(ω_b(ε))`, composed by the caller.
pub fn halpern_cauchy_rate<F: Real>(
    eps: F,
    b: F,
    theta: &CauchyRate<F>,
    alpha: &CauchyRate<F>,
    d: F,
) -> Result<u64> {
    if !(d > F::zero()) {
        return Err(Error::input("D must be positive"));
    }
    if !(eps > F::zero() && b > F::zero()) {
        return Err(Error::input("eps and b must be positive"));
    }
    let four_b = lit::<F>(4.0) * b;
    let first = theta.eval(d * eps / four_b).saturating_add(1);
    let second = alpha.eval(eps / four_b);
    Ok(first.max(second).saturating_add(1))
}

/// Closed form of [`halpern_cauchy_rate`] for the step sizes
/// `αₙ = 1/(n+1)`: `Φ(ε, b) = ⌈4b/ε + 32b²/ε²⌉`.
pub fn halpern_rate_special<F: Real>(eps: F, b: F) -> Result<u64> {
    if !(eps > F::zero() && b > F::zero()) {
        return Err(Error::input("eps and b must be positive"));
    }
    let four_b = lit::<F>(4.0) * b;
    ceil_clamped(four_b / eps + lit::<F>(32.0) * b * b / (eps * eps))
}

/// Concrete operator on the ball of radius `b` about the origin for which
/// every §-style inequality is exactly checkable: `T = c·I` (so
/// `A = (1-c)·I`), uniformly accretive with witness `φ(t) = (1-c)t` and
/// `Ω(ε) = (1-c)ε²/2`. The unique fixed point is the origin.
#[derive(Debug, Clone)]
pub struct AccretiveTestbed<F: Real> {
    pub space: Space<F>,
    pub t_map: MapDescriptor<F>,
    pub contraction: F,
    pub b: u64,
}

/// Builds the scaled-identity testbed. `c ∈ [0, 1)`.
pub fn make_testbed<F: Real>(c: F, b: u64, dimension: usize) -> Result<AccretiveTestbed<F>> {
    if !(c >= F::zero() && c < F::one()) {
        return Err(Error::input(format!("testbed factor {c} outside [0,1)")));
    }
    if b == 0 {
        return Err(Error::input("norm bound b must be positive"));
    }
    let radius = F::from_u64(b).unwrap();
    let space = Space::euclidean_ball(dimension, radius, 2 * b)?;
    let t_map = MapDescriptor::new(
        MapKind::ScaledIdentity { factor: c },
        if c > F::zero() {
            MapClass::Contraction { r: c }
        } else {
            MapClass::Contraction { r: F::zero() }
        },
    );
    Ok(AccretiveTestbed {
        space,
        t_map,
        contraction: c,
        b,
    })
}

impl<F: Real> AccretiveTestbed<F> {
    /// `ι(ε) = (1-c)·ε` for `φ(t) = (1-c)t`, exact when `1-c` is dyadic.
    pub fn increment_modulus(&self) -> IncrementModulus {
        let one_minus_c = (F::one() - self.contraction).to_f64().unwrap();
        // Represent 1-c as a fraction over a power of two (exact for the
        // dyadic factors the testbeds use).
        let den = 1u64 << 16;
        let num = (one_minus_c * den as f64).round() as u64;
        IncrementModulus::Linear {
            slope_num: num,
            slope_den: den,
        }
    }

    /// `Ω(ε) = (1-c)ε²/2` through [`omega_from_increment`].
    pub fn accretivity_modulus(&self) -> AccretivityModulus {
        AccretivityModulus::FromIncrement(self.increment_modulus())
    }

    /// `‖x - Tx‖ = (1-c)·‖x‖`.
    pub fn residual(&self, x: &Point<F>) -> Result<F> {
        let tx = self.t_map.apply(&self.space, x)?;
        self.space.dist(x, &tx)
    }

    /// Samples a point with residual at most `threshold`, i.e. with
    /// `‖x‖ ≤ threshold/(1-c)` (capped at the ball radius).
    pub fn sample_afp(&self, sampler: &mut Sampler, threshold: F) -> Point<F> {
        let p = sampler.point(&self.space);
        let reach = (threshold / (F::one() - self.contraction)).min(self.space.radius());
        let scale = reach / self.space.radius();
        let coords = p.coords().iter().map(|&c| c * scale).collect();
        Point::new(coords).expect("scaled sample is finite")
    }

    /// Worst violation of the defining inner-product inequality
    /// `⟨Ax - Ay, x - y⟩ ≥ (1-c)(‖x‖-‖y‖)²` over sampled pairs
    /// (nonpositive when the testbed is healthy).
    pub fn check_accretivity(&self, sampler: &mut Sampler, n_samples: usize) -> Result<F> {
        let mut worst = F::neg_infinity();
        let one_minus_c = F::one() - self.contraction;
        for _ in 0..n_samples {
            let x = sampler.point(&self.space);
            let y = sampler.point(&self.space);
            // A = (1-c)I, so ⟨Ax-Ay, x-y⟩ = (1-c)‖x-y‖².
            let dxy = self.space.dist(&x, &y)?;
            let lhs = one_minus_c * dxy * dxy;
            let nx = self.space.dist(&x, self.space.center())?;
            let ny = self.space.dist(&y, self.space.center())?;
            let rhs = one_minus_c * (nx - ny) * (nx - ny);
            worst = worst.max(rhs - lhs);
        }
        Ok(worst)
    }
}

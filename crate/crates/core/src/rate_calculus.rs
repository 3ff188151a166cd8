//! First-class rate objects (Cauchy rates, rates of metastability, rates of
//! divergence) and the quantitative lemmas that shift, lift and combine them.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

/// `max{0, ⌈x⌉}` as a natural number. All ceilings in the rate formulas use
/// this clamped convention.
pub fn ceil_clamped<F: Real>(x: F) -> Result<u64> {
    if x.is_nan() {
        return Err(Error::input("ceil_clamped of NaN"));
    }
    let c = x.ceil();
    if c <= F::zero() {
        return Ok(0);
    }
    c.to_u64()
        .ok_or_else(|| Error::Overflow(format!("ceil_clamped({x:?})")))
}

/// `⌈k/d⌉` for a natural `k` and positive scalar `d`.
pub(crate) fn ceil_div<F: Real>(k: u64, d: F) -> Result<u64> {
    ceil_clamped(F::from_u64(k).ok_or_else(|| Error::Overflow(format!("{k}")))? / d)
}

/// Counterfunction DSL: the `f : ℕ → ℕ` quantified over in metastability
/// statements, restricted to a serializable closed-form grammar.
///
/// Grammar (prefix, whitespace-separated, integers only):
/// `const K` | `affine A C` (A·n + C) | `pow P C` (n^P + C) |
/// `max <cf> <cf>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Counterfunction {
    Const(u64),
    Affine { a: u64, c: u64 },
    Pow { p: u32, c: u64 },
    Max(Box<Counterfunction>, Box<Counterfunction>),
}

impl Counterfunction {
    pub fn eval(&self, n: u64) -> u64 {
        match self {
            Counterfunction::Const(k) => *k,
            Counterfunction::Affine { a, c } => a.saturating_mul(n).saturating_add(*c),
            Counterfunction::Pow { p, c } => n.saturating_pow(*p).saturating_add(*c),
            Counterfunction::Max(f, g) => f.eval(n).max(g.eval(n)),
        }
    }

    fn parse_tokens<'a, I: Iterator<Item = &'a str>>(tokens: &mut I) -> Result<Self> {
        let head = tokens
            .next()
            .ok_or_else(|| Error::Parse("empty counterfunction".into()))?;
        let mut num = |what: &str| -> Result<u64> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))?
                .parse::<u64>()
                .map_err(|e| Error::Parse(format!("bad {what}: {e}")))
        };
        match head {
            "const" => Ok(Counterfunction::Const(num("constant")?)),
            "affine" => Ok(Counterfunction::Affine {
                a: num("slope")?,
                c: num("offset")?,
            }),
            "pow" => Ok(Counterfunction::Pow {
                p: num("exponent")? as u32,
                c: num("offset")?,
            }),
            "max" => {
                let f = Counterfunction::parse_tokens(tokens)?;
                let g = Counterfunction::parse_tokens(tokens)?;
                Ok(Counterfunction::Max(Box::new(f), Box::new(g)))
            }
            other => Err(Error::Parse(format!("unknown counterfunction head '{other}'"))),
        }
    }
}

impl FromStr for Counterfunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut tokens = s.split_whitespace();
        let cf = Counterfunction::parse_tokens(&mut tokens)?;
        if let Some(extra) = tokens.next() {
            return Err(Error::Parse(format!("trailing token '{extra}'")));
        }
        Ok(cf)
    }
}

impl fmt::Display for Counterfunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Counterfunction::Const(k) => write!(f, "const {k}"),
            Counterfunction::Affine { a, c } => write!(f, "affine {a} {c}"),
            Counterfunction::Pow { p, c } => write!(f, "pow {p} {c}"),
            Counterfunction::Max(a, b) => write!(f, "max {a} {b}"),
        }
    }
}

/// Run-time counterfunction: an arbitrary `ℕ → ℕ` callable. The recursive
/// function layers built inside the rate transformers exist only as these.
#[derive(Clone)]
pub struct CountFn(Arc<dyn Fn(u64) -> u64 + Send + Sync>);

impl CountFn {
    pub fn new(f: impl Fn(u64) -> u64 + Send + Sync + 'static) -> Self {
        CountFn(Arc::new(f))
    }

    pub fn constant(k: u64) -> Self {
        CountFn::new(move |_| k)
    }

    pub fn from_dsl(cf: &Counterfunction) -> Self {
        let cf = cf.clone();
        CountFn::new(move |n| cf.eval(n))
    }

    pub fn eval(&self, n: u64) -> u64 {
        (self.0)(n)
    }

    /// Wraps the function with a per-argument memo table. The transformer
    /// recursions evaluate each layer at few distinct points but many times.
    pub fn memoized(self) -> Self {
        let memo: Mutex<HashMap<u64, u64>> = Mutex::new(HashMap::new());
        CountFn::new(move |n| {
            if let Some(&v) = memo.lock().unwrap().get(&n) {
                return v;
            }
            let v = self.eval(n);
            memo.lock().unwrap().insert(n, v);
            v
        })
    }
}

impl fmt::Debug for CountFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CountFn")
    }
}

/// Cauchy rate `ρ : (0,∞) → ℕ`: beyond `ρ(ε)` all pairs are `ε`-close.
#[derive(Clone)]
pub struct CauchyRate<F> {
    f: Arc<dyn Fn(F) -> u64 + Send + Sync>,
}

impl<F: Real> CauchyRate<F> {
    pub fn new(f: impl Fn(F) -> u64 + Send + Sync + 'static) -> Self {
        CauchyRate { f: Arc::new(f) }
    }

    pub fn constant(k: u64) -> Self {
        CauchyRate::new(move |_| k)
    }

    /// `ρ(ε) = max{0, ⌈a·ε^{-p} + c⌉}`, the workhorse closed form.
    pub fn power_inv(a: f64, p: f64, c: f64) -> Self {
        CauchyRate::new(move |eps: F| {
            let e = eps.to_f64().unwrap();
            ceil_clamped(a * e.powf(-p) + c).unwrap_or(u64::MAX)
        })
    }

    pub fn eval(&self, eps: F) -> u64 {
        (self.f)(eps)
    }
}

impl<F> fmt::Debug for CauchyRate<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CauchyRate")
    }
}

/// Rate of metastability `φ(ε, f)`: bounds a window start `n` with
/// `d(x_i, x_j) ≤ ε` for all `i, j ∈ [n, f(n)]`.
#[derive(Clone)]
pub struct MetaRate<F> {
    f: Arc<dyn Fn(F, &CountFn) -> u64 + Send + Sync>,
    /// Set when the value provably ignores the counterfunction.
    pub f_independent: bool,
}

impl<F: Real> MetaRate<F> {
    pub fn new(f: impl Fn(F, &CountFn) -> u64 + Send + Sync + 'static) -> Self {
        MetaRate {
            f: Arc::new(f),
            f_independent: false,
        }
    }

    pub fn eval(&self, eps: F, f: &CountFn) -> u64 {
        (self.f)(eps, f)
    }
}

impl<F> fmt::Debug for MetaRate<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetaRate")
    }
}

/// Shifted metastability rate `θ(ε, f, N)`: the window start additionally
/// lies in `[N, θ(ε, f, N)]`.
#[derive(Clone)]
pub struct ShiftedMetaRate<F> {
    f: Arc<dyn Fn(F, &CountFn, u64) -> u64 + Send + Sync>,
    /// Nondecreasing in `N`; required by the rate transformers.
    pub monotone_in_n: bool,
    pub f_independent: bool,
}

impl<F: Real> ShiftedMetaRate<F> {
    pub fn new(f: impl Fn(F, &CountFn, u64) -> u64 + Send + Sync + 'static) -> Self {
        ShiftedMetaRate {
            f: Arc::new(f),
            monotone_in_n: false,
            f_independent: false,
        }
    }

    pub fn with_flags(mut self, monotone_in_n: bool, f_independent: bool) -> Self {
        self.monotone_in_n = monotone_in_n;
        self.f_independent = f_independent;
        self
    }

    /// `θ(ε, f, N) = max{N, ρ(ε)}`: the shifted rate induced by a Cauchy
    /// rate. Monotone in `N` and independent of `f`.
    pub fn from_cauchy(rho: &CauchyRate<F>) -> Self {
        let rho = rho.clone();
        ShiftedMetaRate::new(move |eps, _f, n| n.max(rho.eval(eps))).with_flags(true, true)
    }

    pub fn eval(&self, eps: F, f: &CountFn, n: u64) -> u64 {
        (self.f)(eps, f, n)
    }
}

impl<F> fmt::Debug for ShiftedMetaRate<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ShiftedMetaRate")
    }
}

/// Rate of divergence `A` for `Σ λₙ = ∞`: `Σ_{i≤A(k)} λᵢ ≥ k` for all `k`.
#[derive(Clone)]
pub struct DivergenceRate {
    f: Arc<dyn Fn(u64) -> u64 + Send + Sync>,
    pub monotone: bool,
}

impl DivergenceRate {
    pub fn new(f: impl Fn(u64) -> u64 + Send + Sync + 'static) -> Self {
        DivergenceRate {
            f: Arc::new(f),
            monotone: false,
        }
    }

    pub fn monotone(mut self) -> Self {
        self.monotone = true;
        self
    }

    /// `A(k) = a·k + c`, monotone.
    pub fn affine(a: u64, c: u64) -> Self {
        DivergenceRate::new(move |k| a.saturating_mul(k).saturating_add(c)).monotone()
    }

    /// `A(k) = ⌈(p·k)/q⌉ + c`, monotone.
    pub fn linear_rational(p: u64, q: u64, c: u64) -> Self {
        DivergenceRate::new(move |k| {
            let prod = p.saturating_mul(k);
            (prod / q + u64::from(prod % q != 0)).saturating_add(c)
        })
        .monotone()
    }

    pub fn eval(&self, k: u64) -> u64 {
        (self.f)(k)
    }
}

impl fmt::Debug for DivergenceRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DivergenceRate")
    }
}

/// Product-form divergence data `A'(m, ε)`:
/// `∏_{i=m}^{A'(m,ε)} (1-λᵢ) ≤ ε` for all `m` and `ε ∈ (0,1]`.
#[derive(Clone)]
pub struct ProductRate<F> {
    f: Arc<dyn Fn(u64, F) -> u64 + Send + Sync>,
}

impl<F: Real> ProductRate<F> {
    pub fn new(f: impl Fn(u64, F) -> u64 + Send + Sync + 'static) -> Self {
        ProductRate { f: Arc::new(f) }
    }

    /// Valid for constant `λ ≡ c`: `A'(m, ε) = m + ⌈ln ε / ln(1-c)⌉`.
    pub fn constant_lambda(c: F) -> Result<Self> {
        if !(c > F::zero() && c < F::one()) {
            return Err(Error::input("constant lambda must lie in (0,1)"));
        }
        Ok(ProductRate::new(move |m, eps: F| {
            let steps = ceil_clamped(eps.ln() / (F::one() - c).ln()).unwrap_or(u64::MAX);
            m.saturating_add(steps)
        }))
    }

    /// Valid for `λᵢ = 1/(i+1)`: the product telescopes to `m/(M+1)`.
    pub fn harmonic() -> Self {
        ProductRate::new(move |m, eps: F| {
            if m == 0 {
                return 0;
            }
            let bound = F::from_u64(m).unwrap() / eps;
            ceil_clamped(bound - F::one()).unwrap_or(u64::MAX).max(m)
        })
    }

    pub fn eval(&self, m: u64, eps: F) -> u64 {
        (self.f)(m, eps)
    }
}

impl<F> fmt::Debug for ProductRate<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ProductRate")
    }
}

/// `σ₁[A, B](ε, N) = A(N + ⌈ln(2B/ε)⌉) + 1`.
///
/// Under `a_{i+1} ≤ (1-λᵢ)aᵢ + λᵢbᵢ`, `(aₙ)` bounded by `B ∈ ℕ*`, and
/// `bᵢ ≤ ε/2` on `[N, p]`, every `aᵢ` with `i ∈ [σ₁(ε,N), p]` is `≤ ε`.
pub fn sigma1<F: Real>(a: &DivergenceRate, b_bound: u64, eps: F, n: u64) -> Result<u64> {
    if b_bound == 0 {
        return Err(Error::input("sequence bound B must be a positive integer"));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let two_b = F::from_u64(2 * b_bound).unwrap();
    let shift = ceil_clamped((two_b / eps).ln())?;
    Ok(a.eval(n.saturating_add(shift)).saturating_add(1))
}

/// Value of [`sigma2`] plus a flag recording whether `ε/(2B)` had to be
/// clamped into the admissible domain `(0, 1]` of the product rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sigma2Value {
    pub value: u64,
    pub clamped: bool,
}

/// `σ₂[A', B](ε, N) = max{A'(N, ε/2B), N} + 1`, the product-rate analogue
/// of [`sigma1`].
pub fn sigma2<F: Real>(ap: &ProductRate<F>, b_bound: u64, eps: F, n: u64) -> Result<Sigma2Value> {
    if b_bound == 0 {
        return Err(Error::input("sequence bound B must be a positive integer"));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let ratio = eps / F::from_u64(2 * b_bound).unwrap();
    let (arg, clamped) = if ratio > F::one() {
        (F::one(), true)
    } else {
        (ratio, false)
    };
    Ok(Sigma2Value {
        value: ap.eval(n, arg).max(n).saturating_add(1),
        clamped,
    })
}

/// Lifts a Cauchy rate to the (constant-in-`f`) metastability rate
/// `φ(ε, f) := ρ(ε)`.
pub fn cauchy_as_meta<F: Real>(rho: &CauchyRate<F>) -> MetaRate<F> {
    let rho = rho.clone();
    MetaRate {
        f: Arc::new(move |eps, _f: &CountFn| rho.eval(eps)),
        f_independent: true,
    }
}

/// Reads a Cauchy rate back off an `f`-independent metastability rate.
/// Requires the `f_independent` flag; the two directions invert each other.
pub fn meta_const_as_cauchy<F: Real>(phi: &MetaRate<F>) -> Result<CauchyRate<F>> {
    if !phi.f_independent {
        return Err(Error::contract(
            "meta_const_as_cauchy needs the f_independent flag",
        ));
    }
    let phi = phi.clone();
    Ok(CauchyRate::new(move |eps| {
        phi.eval(eps, &CountFn::constant(0))
    }))
}

/// `max{N, φ(ε, f_N)}` with `f_N(m) := f(max{N, m})`: pushes the
/// metastable window to the right of `N`. The window start returned by the
/// underlying rate then lies in `[N, shift_meta(φ, ε, f, N)]`.
pub fn shift_meta<F: Real>(phi: &MetaRate<F>, eps: F, f: &CountFn, n: u64) -> u64 {
    let f = f.clone();
    let f_n = CountFn::new(move |m| f.eval(n.max(m)));
    n.max(phi.eval(eps, &f_n))
}

/// Wraps [`shift_meta`] as a shifted rate object. The result is monotone in
/// `N` only when the source ignores `f`; otherwise majorize it explicitly.
pub fn shifted_from_meta<F: Real>(phi: &MetaRate<F>) -> ShiftedMetaRate<F> {
    let phi2 = phi.clone();
    let flag = phi.f_independent;
    ShiftedMetaRate::new(move |eps, f, n| shift_meta(&phi2, eps, f, n)).with_flags(flag, flag)
}

/// `θ^maj(ε, f, N) = max_{N' ≤ N} θ(ε, f, N')`: the monotone majorant.
/// Dominates `θ` pointwise and is nondecreasing in `N` by construction.
pub fn monotone_majorant<F: Real>(theta: &ShiftedMetaRate<F>) -> ShiftedMetaRate<F> {
    let theta2 = theta.clone();
    let f_indep = theta.f_independent;
    ShiftedMetaRate::new(move |eps, f, n| {
        (0..=n).map(|np| theta2.eval(eps, f, np)).max().unwrap_or(0)
    })
    .with_flags(true, f_indep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_clamped_examples() {
        assert_eq!(ceil_clamped(-3.2_f64).unwrap(), 0);
        assert_eq!(ceil_clamped(0.0_f64).unwrap(), 0);
        assert_eq!(ceil_clamped(2.1_f64).unwrap(), 3);
        assert!(ceil_clamped(f64::NAN).is_err());
    }

    #[test]
    fn sigma1_frozen_values() {
        let a2k = DivergenceRate::affine(2, 0);
        // ln(2B/eps) = ln 1 = 0, A(0) + 1.
        assert_eq!(sigma1(&a2k, 1, 2.0, 0).unwrap(), 1);
        // ceil(ln 2) = 1, A(1) + 1.
        assert_eq!(sigma1(&a2k, 1, 1.0, 0).unwrap(), 3);
        // A(k) = k, B = 4: ceil(ln 8) = 3, A(2 + 3) + 1.
        let id = DivergenceRate::affine(1, 0);
        assert_eq!(sigma1(&id, 4, 1.0, 2).unwrap(), 6);
        assert!(sigma1(&a2k, 1, 0.0, 0).is_err());
        assert!(sigma1(&a2k, 0, 1.0, 0).is_err());
    }

    #[test]
    fn sigma2_frozen_values() {
        // A'(m, eps) = m + ceil(1/eps).
        let ap: ProductRate<f64> =
            ProductRate::new(|m, eps: f64| m + ceil_clamped(1.0 / eps).unwrap());
        // eps/2B = 1/2: A'(0, 1/2) = 2, max{2,0}+1 = 3.
        let r = sigma2(&ap, 1, 1.0, 0).unwrap();
        assert_eq!((r.value, r.clamped), (3, false));
        // eps/2B = 1 exactly: A'(5, 1) = 6, max{6,5}+1 = 7.
        let r = sigma2(&ap, 1, 2.0, 5).unwrap();
        assert_eq!((r.value, r.clamped), (7, false));
        // A'(m, eps) = m: max{0,0}+1 = 1.
        let id: ProductRate<f64> = ProductRate::new(|m, _| m);
        let r = sigma2(&id, 3, 1.0, 0).unwrap();
        assert_eq!(r.value, 1);
        // eps/2B > 1 clamps and flags.
        let r = sigma2(&ap, 1, 4.0, 0).unwrap();
        assert!(r.clamped);
        assert_eq!(r.value, 2);
    }

    #[test]
    fn cauchy_meta_round_trip() {
        let rho = CauchyRate::new(|eps: f64| ceil_clamped(1.0 / eps).unwrap());
        let phi = cauchy_as_meta(&rho);
        assert!(phi.f_independent);
        assert_eq!(phi.eval(0.5, &CountFn::constant(99)), 2);

        let rho0 = CauchyRate::constant(0);
        let phi0 = cauchy_as_meta(&rho0);
        assert_eq!(phi0.eval(0.125, &CountFn::constant(7)), 0);

        let rho_sq = CauchyRate::new(|eps: f64| ceil_clamped(1.0 / (eps * eps)).unwrap());
        assert_eq!(cauchy_as_meta(&rho_sq).eval(1.0 / 3.0, &CountFn::constant(0)), 9);

        // Round trip is the identity on an eps grid.
        let back = meta_const_as_cauchy(&phi).unwrap();
        for eps in [0.1, 0.25, 0.5, 1.0, 2.0] {
            assert_eq!(back.eval(eps), rho.eval(eps));
        }
        assert_eq!(meta_const_as_cauchy(&cauchy_as_meta(&CauchyRate::constant(5)))
            .unwrap()
            .eval(123.0), 5);
    }

    #[test]
    fn meta_const_as_cauchy_requires_flag() {
        let phi: MetaRate<f64> = MetaRate::new(|_, f| f.eval(0));
        assert!(meta_const_as_cauchy(&phi).is_err());
    }

    #[test]
    fn shift_meta_frozen_values() {
        let phi5: MetaRate<f64> = MetaRate::new(|_, _| 5);
        assert_eq!(shift_meta(&phi5, 1.0, &CountFn::constant(0), 9), 9);

        // φ(ε, f) = f(0) with f(m) = m + 3 and N = 0: f_0 = f, value 3.
        let phi_f0: MetaRate<f64> = MetaRate::new(|_, f| f.eval(0));
        let f = CountFn::new(|m| m + 3);
        assert_eq!(shift_meta(&phi_f0, 1.0, &f, 0), 3);

        let phi0: MetaRate<f64> = MetaRate::new(|_, _| 0);
        assert_eq!(shift_meta(&phi0, 1.0, &f, 0), 0);

        // The shift sees f through f_N: with N = 2, f_2(0) = f(2) = 5.
        assert_eq!(shift_meta(&phi_f0, 1.0, &f, 2), 5);
    }

    #[test]
    fn monotone_majorant_behaviour() {
        // θ(ε, f, N) = max{0, 10 - N}: not monotone in N.
        let theta: ShiftedMetaRate<f64> =
            ShiftedMetaRate::new(|_, _, n| 10_u64.saturating_sub(n));
        let maj = monotone_majorant(&theta);
        assert!(maj.monotone_in_n);
        let f = CountFn::constant(0);
        assert_eq!(maj.eval(1.0, &f, 3), 10);

        // Idempotent on an already monotone rate.
        let mono: ShiftedMetaRate<f64> = ShiftedMetaRate::new(|_, _, n| n + 2);
        let maj2 = monotone_majorant(&mono);
        for n in 0..20 {
            assert_eq!(maj2.eval(0.5, &f, n), mono.eval(0.5, &f, n));
        }

        let const7: ShiftedMetaRate<f64> = ShiftedMetaRate::new(|_, _, _| 7);
        assert_eq!(monotone_majorant(&const7).eval(2.0, &f, 12), 7);

        // Dominates pointwise and is nondecreasing in N.
        let mut prev = 0;
        for n in 0..=15 {
            let v = maj.eval(1.0, &f, n);
            assert!(v >= theta.eval(1.0, &f, n));
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn counterfunction_parse_eval_display() {
        let cases: Vec<(&str, Counterfunction)> = vec![
            ("const 10", Counterfunction::Const(10)),
            ("affine 1 5", Counterfunction::Affine { a: 1, c: 5 }),
            ("affine 2 0", Counterfunction::Affine { a: 2, c: 0 }),
            ("pow 2 1", Counterfunction::Pow { p: 2, c: 1 }),
            (
                "max const 10 affine 1 5",
                Counterfunction::Max(
                    Box::new(Counterfunction::Const(10)),
                    Box::new(Counterfunction::Affine { a: 1, c: 5 }),
                ),
            ),
        ];
        for (text, expect) in cases {
            let parsed: Counterfunction = text.parse().unwrap();
            assert_eq!(parsed, expect);
            assert_eq!(parsed.to_string(), text);
        }
        assert_eq!(
            "max const 10 affine 1 5"
                .parse::<Counterfunction>()
                .unwrap()
                .eval(7),
            12
        );
        assert!("bogus 1".parse::<Counterfunction>().is_err());
        assert!("const 1 2".parse::<Counterfunction>().is_err());
        assert!("max const 1".parse::<Counterfunction>().is_err());
    }

    #[test]
    fn shifted_from_cauchy_is_monotone_and_f_independent() {
        let rho = CauchyRate::new(|eps: f64| ceil_clamped(1.0 / eps).unwrap());
        let theta = ShiftedMetaRate::from_cauchy(&rho);
        assert!(theta.monotone_in_n && theta.f_independent);
        let f = CountFn::constant(0);
        assert_eq!(theta.eval(0.25, &f, 0), 4);
        assert_eq!(theta.eval(0.25, &f, 9), 9);
    }

    #[test]
    fn memoized_countfn_is_transparent() {
        let calls = std::sync::Arc::new(std::sync::atomic::AtomicU64::new(0));
        let c2 = calls.clone();
        let f = CountFn::new(move |n| {
            c2.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
            2 * n + 1
        })
        .memoized();
        for _ in 0..10 {
            assert_eq!(f.eval(4), 9);
        }
        assert_eq!(calls.load(std::sync::atomic::Ordering::SeqCst), 1);
    }
}

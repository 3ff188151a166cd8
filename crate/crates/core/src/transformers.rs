//! Rate transformers: given quantitative data for anchored implicit or
//! explicit iterations, produce metastability or Cauchy rates for their
//! viscosity versions, for the hybrid KM scheme, and for inexact variants.
//!
//! Every bound-valued operation returns a [`BoundResult`] carrying an
//! evaluation trace (the intermediate tolerances, the recursion depth `M`
//! and the chain of shifted indices) so that reported values can be
//! replayed and audited.

use crate::error::{Error, Result};
use crate::mappings::RakotchModulus;
use crate::rate_calculus::{
    ceil_clamped, ceil_div, sigma1, CauchyRate, CountFn, DivergenceRate, MetaRate,
    ShiftedMetaRate,
};
use crate::scalar::{lit, Real};
use serde::Serialize;
use std::collections::BTreeMap;

/// Evaluation record of a transformer: enough to audit the value.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BoundTrace {
    pub op: String,
    pub eps: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_tilde: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    /// Geometric-decay depth `M` of the recursion, when one exists.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u64>,
    /// The chain Ψ₀, Ψ₁, … of shifted window starts.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub psi_chain: Vec<u64>,
    /// Number of counterfunction layers built (`M + 1`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_depth: Option<u64>,
    /// Named scalar components (intermediate rate values etc).
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub components: BTreeMap<String, f64>,
}

impl BoundTrace {
    fn new(op: &str, eps: f64) -> Self {
        BoundTrace {
            op: op.into(),
            eps,
            eps_tilde: None,
            eps0: None,
            m: None,
            psi_chain: Vec::new(),
            f_depth: None,
            components: BTreeMap::new(),
        }
    }

    fn with(mut self, key: &str, value: f64) -> Self {
        self.components.insert(key.into(), value);
        self
    }
}

/// A computed bound together with its trace.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BoundResult {
    pub value: u64,
    pub trace: BoundTrace,
}

fn to_f64<F: Real>(x: F) -> f64 {
    x.to_f64().unwrap()
}

fn require_monotone<F>(theta: &ShiftedMetaRate<F>, who: &str) -> Result<()> {
    if !theta.monotone_in_n {
        return Err(Error::contract(format!(
            "{who} requires a monotone-in-N shifted rate (majorize it first)"
        )));
    }
    Ok(())
}

/// `M = max{0, ⌈ log_base(target) ⌉}` with `base ∈ (0,1)`, computed as
/// `ln(target)/ln(base)`; a log argument ≥ 1 clamps to `M = 0`.
fn geometric_depth<F: Real>(target: F, base: F) -> Result<u64> {
    if !(base > F::zero() && base < F::one()) {
        return Err(Error::modulus(format!("geometric base {base} outside (0,1)")));
    }
    if target >= F::one() {
        return Ok(0);
    }
    ceil_clamped(target.ln() / base.ln())
}

/// Builds the layered counterfunctions
/// `f₀`, `f_{m+1}(p) = max{ base(p), θ(ε₀, f_m, p) }` bottom-up, each layer
/// memoized per argument. `base` is `f` itself for the implicit-scheme
/// transformer and the σ₁-composed `f₀` for the explicit one.
fn build_f_layers<F: Real>(
    f0: CountFn,
    base: CountFn,
    theta: &ShiftedMetaRate<F>,
    eps0: F,
    m_depth: u64,
) -> Vec<CountFn> {
    let mut layers: Vec<CountFn> = Vec::with_capacity(m_depth as usize + 1);
    layers.push(f0.memoized());
    for m in 0..m_depth {
        let prev = layers[m as usize].clone();
        let base = base.clone();
        let theta = theta.clone();
        layers.push(
            CountFn::new(move |p| base.eval(p).max(theta.eval(eps0, &prev, p))).memoized(),
        );
    }
    layers
}

/// Metastability transformer for the implicit viscosity sequence
/// `xₙ = (1-αₙ)Sₙ(xₙ) ⊕ αₙφ(xₙ)` from a shifted rate `θ_b` for the
/// anchored sequences `yₙ(u)`, with a (possibly non-constant) Rakotch
/// modulus δ for φ:
///
/// `Ψ(ε, f, N) = θ_b(ε₀, f, Ψ_M)` where `ε̃ = ε·δ(ε/2)/4`,
/// `ε₀ = ε̃·δ(ε̃)/2`, `M = ⌈log_{1-δ(ε̃)}(ε̃/2b)⌉`, `Ψ₀ = N`,
/// `Ψ_{m+1} = θ_b(ε₀, f_{M-m}, Ψ_m)`, and
/// `f₀ = f`, `f_{m+1}(p) = max{f(p), θ_b(ε₀, f_m, p)}`.
pub fn psi_viscosity_browder<F: Real>(
    b: u64,
    delta: &RakotchModulus<F>,
    theta: &ShiftedMetaRate<F>,
    eps: F,
    f: &CountFn,
    n: u64,
) -> Result<BoundResult> {
    require_monotone(theta, "psi_viscosity_browder")?;
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let two = lit::<F>(2.0);
    let four = lit::<F>(4.0);
    let eps_tilde = eps * delta.eval(eps / two)? / four;
    let eps0 = eps_tilde * delta.eval(eps_tilde)? / two;
    let base = F::one() - delta.eval(eps_tilde)?;
    let bb = F::from_u64(2 * b).unwrap();
    let m_depth = geometric_depth(eps_tilde / bb, base)?;

    let layers = build_f_layers(f.clone(), f.clone(), theta, eps0, m_depth);

    let mut psi = n;
    let mut chain = vec![psi];
    for m in 0..m_depth {
        psi = theta.eval(eps0, &layers[(m_depth - m) as usize], psi);
        chain.push(psi);
    }
    let value = theta.eval(eps0, f, psi);

    let trace = BoundTrace {
        op: "psi-viscosity-browder".into(),
        eps: to_f64(eps),
        eps_tilde: Some(to_f64(eps_tilde)),
        eps0: Some(to_f64(eps0)),
        m: Some(m_depth),
        psi_chain: chain,
        f_depth: Some(m_depth + 1),
        components: BTreeMap::new(),
    };
    Ok(BoundResult { value, trace })
}

/// Single-map corollary of [`psi_viscosity_browder`] for a constant modulus
/// `δ ∈ (0,1)`: `ε₀ = εδ²/8`, `M = ⌈log_{1-δ}(εδ/8b)⌉`, `Ψ₀ = 0`.
pub fn psi_viscosity_browder_single<F: Real>(
    b: u64,
    delta: F,
    theta: &ShiftedMetaRate<F>,
    eps: F,
    f: &CountFn,
) -> Result<BoundResult> {
    require_monotone(theta, "psi_viscosity_browder_single")?;
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::modulus(format!("delta {delta} outside (0,1)")));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let eight = lit::<F>(8.0);
    let eps0 = eps * delta * delta / eight;
    let bb = F::from_u64(b).unwrap();
    let m_depth = geometric_depth(eps * delta / (eight * bb), F::one() - delta)?;

    let layers = build_f_layers(f.clone(), f.clone(), theta, eps0, m_depth);
    let mut psi = 0u64;
    let mut chain = vec![psi];
    for m in 0..m_depth {
        psi = theta.eval(eps0, &layers[(m_depth - m) as usize], psi);
        chain.push(psi);
    }
    let value = theta.eval(eps0, f, psi);

    let trace = BoundTrace {
        op: "psi-viscosity-browder-single".into(),
        eps: to_f64(eps),
        eps_tilde: None,
        eps0: Some(to_f64(eps0)),
        m: Some(m_depth),
        psi_chain: chain,
        f_depth: Some(m_depth + 1),
        components: BTreeMap::new(),
    };
    Ok(BoundResult { value, trace })
}

/// Cauchy-rate collapse of the implicit transformer: with a common Cauchy
/// rate ρ for all anchored sequences, `Ψ(ε) = ρ(εδ²/8)` is a Cauchy rate
/// for the viscosity sequence.
pub fn cauchy_viscosity_browder<F: Real>(delta: F, rho: &CauchyRate<F>, eps: F) -> Result<u64> {
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::modulus(format!("delta {delta} outside (0,1)")));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    Ok(rho.eval(eps * delta * delta / lit::<F>(8.0)))
}

/// Metastability transformer for the explicit viscosity iteration
/// `x_{n+1} = (1-αₙ)Sₙ(xₙ) ⊕ αₙφ(xₙ)` from a shifted rate `θ'_b` for the
/// anchored explicit iterations and a monotone divergence rate `A` for
/// `Σ αₙ`:
///
/// `Ψ(ε, f, N) = σ₁[Ã_ε, b](ε/3, Ψ_{M+1})` with `Ã_ε(k) = A(⌈k/δ(ε/3)⌉)`,
/// `ε̃ = 2εδ(ε/3)/15`, `ε₀ = ε̃δ(ε̃)/4`, `M = ⌈log_{1-δ(ε̃)/2}(ε̃/2b)⌉`,
/// `Ψ₀ = max{N, A(1)+1}`, `Ψ_{m+1} = θ'_b(ε₀, f_{M-m}, Ψ_m)`,
/// `f₀(p) = max{f(σ₁[Ã_ε,b](ε/3, p)), σ₁[Ã_ε,b](ε/3, p)}` and
/// `f_{m+1}(p) = max{f₀(p), θ'_b(ε₀, f_m, p)}`.
pub fn psi_viscosity_halpern<F: Real>(
    b: u64,
    delta: &RakotchModulus<F>,
    a: &DivergenceRate,
    theta: &ShiftedMetaRate<F>,
    eps: F,
    f: &CountFn,
    n: u64,
) -> Result<BoundResult> {
    require_monotone(theta, "psi_viscosity_halpern")?;
    if !a.monotone {
        return Err(Error::contract(
            "psi_viscosity_halpern requires a monotone divergence rate",
        ));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let three = lit::<F>(3.0);
    let d13 = delta.eval(eps / three)?;
    let eps_tilde = lit::<F>(2.0) * eps * d13 / lit::<F>(15.0);
    let eps0 = eps_tilde * delta.eval(eps_tilde)? / lit::<F>(4.0);
    let base = F::one() - delta.eval(eps_tilde)? / lit::<F>(2.0);
    let m_depth = geometric_depth(eps_tilde / F::from_u64(2 * b).unwrap(), base)?;

    let a_tilde = {
        let a = a.clone();
        move |k: u64| -> u64 { a.eval(ceil_div(k, d13).unwrap_or(u64::MAX)) }
    };
    let sig = {
        let a_tilde = a_tilde.clone();
        let eps3 = eps / three;
        move |p: u64| -> u64 {
            let shift = ceil_clamped((F::from_u64(2 * b).unwrap() / eps3).ln()).unwrap_or(0);
            a_tilde(p.saturating_add(shift)).saturating_add(1)
        }
    };
    let f0 = {
        let f = f.clone();
        let sig = sig.clone();
        CountFn::new(move |p| {
            let s = sig(p);
            f.eval(s).max(s)
        })
    };

    let layers = build_f_layers(f0.clone(), f0.clone(), theta, eps0, m_depth);
    let mut psi = n.max(a.eval(1).saturating_add(1));
    let mut chain = vec![psi];
    for m in 0..=m_depth {
        psi = theta.eval(eps0, &layers[(m_depth - m) as usize], psi);
        chain.push(psi);
    }
    let value = sig(psi);

    let trace = BoundTrace {
        op: "psi-viscosity-halpern".into(),
        eps: to_f64(eps),
        eps_tilde: Some(to_f64(eps_tilde)),
        eps0: Some(to_f64(eps0)),
        m: Some(m_depth),
        psi_chain: chain,
        f_depth: Some(m_depth + 1),
        components: BTreeMap::new(),
    };
    Ok(BoundResult { value, trace })
}

/// Single-map corollary of [`psi_viscosity_halpern`] for constant
/// `δ ∈ (0,1)`: `Ã(k) = A(⌈k/δ⌉)`, `ε₀ = εδ²/30`,
/// `M = ⌈log_{1-δ/2}(εδ/15b)⌉`, `Ψ₀ = A(1)+1` and
/// `f₀(p) = f(σ₁[Ã, b](ε/3, p))`.
pub fn psi_viscosity_halpern_single<F: Real>(
    b: u64,
    delta: F,
    a: &DivergenceRate,
    theta: &ShiftedMetaRate<F>,
    eps: F,
    f: &CountFn,
) -> Result<BoundResult> {
    require_monotone(theta, "psi_viscosity_halpern_single")?;
    if !a.monotone {
        return Err(Error::contract(
            "psi_viscosity_halpern_single requires a monotone divergence rate",
        ));
    }
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::modulus(format!("delta {delta} outside (0,1)")));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let three = lit::<F>(3.0);
    let eps0 = eps * delta * delta / lit::<F>(30.0);
    let base = F::one() - delta / lit::<F>(2.0);
    let m_depth = geometric_depth(
        eps * delta / (lit::<F>(15.0) * F::from_u64(b).unwrap()),
        base,
    )?;

    let a_tilde = {
        let a = a.clone();
        move |k: u64| -> u64 { a.eval(ceil_div(k, delta).unwrap_or(u64::MAX)) }
    };
    let sig = {
        let a_tilde = a_tilde.clone();
        let eps3 = eps / three;
        move |p: u64| -> u64 {
            let shift = ceil_clamped((F::from_u64(2 * b).unwrap() / eps3).ln()).unwrap_or(0);
            a_tilde(p.saturating_add(shift)).saturating_add(1)
        }
    };
    let f0 = {
        let f = f.clone();
        let sig = sig.clone();
        CountFn::new(move |p| f.eval(sig(p)))
    };

    let layers = build_f_layers(f0.clone(), f0.clone(), theta, eps0, m_depth);
    let mut psi = a.eval(1).saturating_add(1);
    let mut chain = vec![psi];
    for m in 0..=m_depth {
        psi = theta.eval(eps0, &layers[(m_depth - m) as usize], psi);
        chain.push(psi);
    }
    let value = sig(psi);

    let trace = BoundTrace {
        op: "psi-viscosity-halpern-single".into(),
        eps: to_f64(eps),
        eps_tilde: None,
        eps0: Some(to_f64(eps0)),
        m: Some(m_depth),
        psi_chain: chain,
        f_depth: Some(m_depth + 1),
        components: BTreeMap::new(),
    };
    Ok(BoundResult { value, trace })
}

/// Cauchy-rate collapse on the explicit side: with a common Cauchy rate ρ
/// for the anchored iterations,
/// `Ψ(ε) = σ₁[Ã, b](ε/3, max{ρ(ε₀), A(1)+1})` with `ε₀ = εδ²/30`.
pub fn cauchy_viscosity_halpern<F: Real>(
    b: u64,
    delta: F,
    a: &DivergenceRate,
    rho: &CauchyRate<F>,
    eps: F,
) -> Result<u64> {
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::modulus(format!("delta {delta} outside (0,1)")));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let eps0 = eps * delta * delta / lit::<F>(30.0);
    let n0 = rho.eval(eps0).max(a.eval(1).saturating_add(1));
    let a_tilde = {
        let a = a.clone();
        DivergenceRate::new(move |k| a.eval(ceil_div(k, delta).unwrap_or(u64::MAX)))
    };
    sigma1(&a_tilde, b, eps / lit::<F>(3.0), n0)
}

/// Rate of convergence `Ξ` for `d(x_{n+1}, x̃ₙ) → 0` between the hybrid KM
/// iteration and the implicit viscosity sequence:
/// `Ξ(ε) = σ₁[μ̃₁, b](ε, μ₂(δ²ε/2b))` with `μ̃₁(k) = μ₁(⌈k/δ⌉)`.
pub fn xi_vkm<F: Real>(
    b: u64,
    delta: F,
    mu1: &DivergenceRate,
    mu2: &CauchyRate<F>,
    eps: F,
) -> Result<u64> {
    if !mu1.monotone {
        return Err(Error::contract("xi_vkm requires a monotone divergence rate"));
    }
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::modulus(format!("delta {delta} outside (0,1)")));
    }
    let n0 = mu2.eval(delta * delta * eps / F::from_u64(2 * b).unwrap());
    let mu1_tilde = {
        let mu1 = mu1.clone();
        DivergenceRate::new(move |k| mu1.eval(ceil_div(k, delta).unwrap_or(u64::MAX)))
    };
    sigma1(&mu1_tilde, b, eps, n0)
}

/// Metastability rate for the hybrid iteration from a metastability rate Ψ
/// for the implicit viscosity sequence:
/// `Ω(ε, f) = max{Ξ(ε/3), Ψ(ε/3, f̂)} + 1` with
/// `f̂(n) = f(max{Ξ(ε/3), n} + 1)`.
pub fn omega_vkm<F: Real>(
    b: u64,
    delta: F,
    psi: &MetaRate<F>,
    mu1: &DivergenceRate,
    mu2: &CauchyRate<F>,
    eps: F,
    f: &CountFn,
) -> Result<BoundResult> {
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let eps3 = eps / lit::<F>(3.0);
    let xi = xi_vkm(b, delta, mu1, mu2, eps3)?;
    let f_hat = {
        let f = f.clone();
        CountFn::new(move |n| f.eval(xi.max(n).saturating_add(1)))
    };
    let psi_val = psi.eval(eps3, &f_hat);
    let value = xi.max(psi_val).saturating_add(1);
    let trace = BoundTrace::new("omega-vkm", to_f64(eps))
        .with("xi", xi as f64)
        .with("psi", psi_val as f64);
    Ok(BoundResult { value, trace })
}

/// Cauchy rate for the hybrid iteration from a common Cauchy rate ρ for the
/// anchored implicit sequences:
/// `Ω(ε) = max{Ξ'(ε/3), Ψ(ε/3)} + 1` where `Ψ(ε) = ρ(εδ²/8)` and
/// `Ξ'(ε) = σ₁[μ̃₁, b](ε, μ₂(δ²ε/3b))`.
pub fn cauchy_vkm<F: Real>(
    b: u64,
    delta: F,
    rho: &CauchyRate<F>,
    mu1: &DivergenceRate,
    mu2: &CauchyRate<F>,
    eps: F,
) -> Result<u64> {
    if !mu1.monotone {
        return Err(Error::contract("cauchy_vkm requires a monotone divergence rate"));
    }
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::modulus(format!("delta {delta} outside (0,1)")));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let eps3 = eps / lit::<F>(3.0);
    // Ξ variant with the 3b denominator, as used by the Cauchy corollary.
    let n0 = mu2.eval(delta * delta * eps3 / (lit::<F>(3.0) * F::from_u64(b).unwrap()));
    let mu1_tilde = {
        let mu1 = mu1.clone();
        DivergenceRate::new(move |k| mu1.eval(ceil_div(k, delta).unwrap_or(u64::MAX)))
    };
    let xi = sigma1(&mu1_tilde, b, eps3, n0)?;
    let psi = cauchy_viscosity_browder(delta, rho, eps3)?;
    Ok(xi.max(psi).saturating_add(1))
}

/// Metastability rate for the inexact implicit viscosity sequence, whose
/// points satisfy their relation to within εₙ with `εₙ/αₙ → 0` at rate ρ:
/// `Ψ'(ε, f) = max{ρ_δ(ε/3), Ψ(ε/3, f_{ρ_δ,ε})}` with `ρ_δ(ε) = ρ(εδ)`
/// and `f_{ρ_δ,ε}(n) = f(max{ρ_δ(ε/3), n})`.
pub fn meta_browder_relaxed<F: Real>(
    psi: &MetaRate<F>,
    rho_err: &CauchyRate<F>,
    delta: F,
    eps: F,
    f: &CountFn,
) -> Result<u64> {
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::modulus(format!("delta {delta} outside (0,1)")));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let eps3 = eps / lit::<F>(3.0);
    let shift = rho_err.eval(eps3 * delta);
    let f_shifted = {
        let f = f.clone();
        CountFn::new(move |n| f.eval(shift.max(n)))
    };
    Ok(shift.max(psi.eval(eps3, &f_shifted)))
}

/// `Γ(ε) = σ₁[Ã, b](ε, ρ(δε/2))` with `Ã(k) = A(⌈k/δ⌉)`: the convergence
/// rate of `d(xₙ, x'ₙ) → 0` for the inexact explicit iteration.
pub fn gamma_halpern_relaxed<F: Real>(
    a: &DivergenceRate,
    rho_err: &CauchyRate<F>,
    delta: F,
    b: u64,
    eps: F,
) -> Result<u64> {
    let n0 = rho_err.eval(delta * eps / lit::<F>(2.0));
    let a_tilde = {
        let a = a.clone();
        DivergenceRate::new(move |k| a.eval(ceil_div(k, delta).unwrap_or(u64::MAX)))
    };
    sigma1(&a_tilde, b, eps, n0)
}

/// Metastability rate for the inexact explicit viscosity iteration:
/// `Ψ'(ε, f) = max{Γ(ε/3), Ψ(ε/3, f_{Γ,ε})}` with
/// `f_{Γ,ε}(n) = f(max{Γ(ε/3), n})`.
pub fn meta_halpern_relaxed<F: Real>(
    psi: &MetaRate<F>,
    a: &DivergenceRate,
    rho_err: &CauchyRate<F>,
    delta: F,
    b: u64,
    eps: F,
    f: &CountFn,
) -> Result<u64> {
    if !(delta > F::zero() && delta < F::one()) {
        return Err(Error::modulus(format!("delta {delta} outside (0,1)")));
    }
    if !(eps > F::zero()) {
        return Err(Error::input("epsilon must be positive"));
    }
    let eps3 = eps / lit::<F>(3.0);
    let gamma = gamma_halpern_relaxed(a, rho_err, delta, b, eps3)?;
    let f_shifted = {
        let f = f.clone();
        CountFn::new(move |n| f.eval(gamma.max(n)))
    };
    Ok(gamma.max(psi.eval(eps3, &f_shifted)))
}

/// Inexact hybrid iteration: identical shape to [`meta_halpern_relaxed`]
/// with `A` a divergence rate for `Σ αₙβₙ` and ρ a rate for
/// `εₙ/(αₙβₙ) → 0`.
pub fn meta_vkm_relaxed<F: Real>(
    psi: &MetaRate<F>,
    a_prod: &DivergenceRate,
    rho_err: &CauchyRate<F>,
    delta: F,
    b: u64,
    eps: F,
    f: &CountFn,
) -> Result<u64> {
    meta_halpern_relaxed(psi, a_prod, rho_err, delta, b, eps, f)
}

/// Packages the implicit-side transformer as a reusable metastability rate
/// (the Ψ input of [`omega_vkm`] and the relaxed variants).
pub fn viscosity_browder_meta<F: Real>(
    b: u64,
    delta: F,
    theta: &ShiftedMetaRate<F>,
) -> Result<MetaRate<F>> {
    require_monotone(theta, "viscosity_browder_meta")?;
    let theta = theta.clone();
    let f_indep = theta.f_independent;
    let mut rate = MetaRate::new(move |eps, f: &CountFn| {
        psi_viscosity_browder_single(b, delta, &theta, eps, f)
            .map(|r| r.value)
            .unwrap_or(u64::MAX)
    });
    rate.f_independent = f_indep;
    Ok(rate)
}

/// Packages the explicit-side transformer as a reusable metastability rate.
pub fn viscosity_halpern_meta<F: Real>(
    b: u64,
    delta: F,
    a: &DivergenceRate,
    theta: &ShiftedMetaRate<F>,
) -> Result<MetaRate<F>> {
    require_monotone(theta, "viscosity_halpern_meta")?;
    let theta = theta.clone();
    let a = a.clone();
    let rate = MetaRate::new(move |eps, f: &CountFn| {
        psi_viscosity_halpern_single(b, delta, &a, &theta, eps, f)
            .map(|r| r.value)
            .unwrap_or(u64::MAX)
    });
    Ok(rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate_calculus::Counterfunction;

    fn inv_eps() -> CauchyRate<f64> {
        CauchyRate::new(|eps: f64| ceil_clamped(1.0 / eps).unwrap())
    }

    fn theta_inv() -> ShiftedMetaRate<f64> {
        ShiftedMetaRate::from_cauchy(&inv_eps())
    }

    fn f_const(k: u64) -> CountFn {
        CountFn::constant(k)
    }

    #[test]
    fn psi_viscosity_browder_frozen_values() {
        // θ_b = max{N, ⌈1/ε⌉}, δ ≡ ½, b = 1, ε = 1, N = 0:
        // ε̃ = 1/8, ε₀ = 1/32, M = 4, value 32.
        let delta = RakotchModulus::constant(0.5).unwrap();
        let r = psi_viscosity_browder(1, &delta, &theta_inv(), 1.0, &f_const(3), 0).unwrap();
        assert_eq!(r.value, 32);
        assert_eq!(r.trace.m, Some(4));
        assert_eq!(r.trace.eps0, Some(1.0 / 32.0));
        assert_eq!(r.trace.eps_tilde, Some(0.125));

        // Large ε clamps M to 0 and the value collapses to θ_b(ε₀, f, N).
        let r = psi_viscosity_browder(1, &delta, &theta_inv(), 64.0, &f_const(0), 5).unwrap();
        assert_eq!(r.trace.m, Some(0));
        let eps_tilde = 64.0 * 0.5 / 4.0; // = 8 ≥ 2b
        assert!(eps_tilde / 2.0 >= 1.0);
        let eps0 = eps_tilde * 0.5 / 2.0;
        assert_eq!(r.value, 5u64.max((1.0_f64 / eps0).ceil() as u64));
    }

    #[test]
    fn psi_viscosity_browder_f_independence_propagates() {
        let delta = RakotchModulus::constant(0.5).unwrap();
        let a = psi_viscosity_browder(1, &delta, &theta_inv(), 1.0, &f_const(0), 0).unwrap();
        let b = psi_viscosity_browder(
            1,
            &delta,
            &theta_inv(),
            1.0,
            &CountFn::from_dsl(&"affine 7 13".parse::<Counterfunction>().unwrap()),
            0,
        )
        .unwrap();
        assert_eq!(a.value, b.value);
    }

    #[test]
    fn psi_viscosity_browder_single_frozen_values() {
        // δ = ½, b = 1, ε = 1: ε₀ = 1/32, M = 4, value 32 (matches the
        // parameterized transformer instance).
        let r = psi_viscosity_browder_single(1, 0.5, &theta_inv(), 1.0, &f_const(9)).unwrap();
        assert_eq!(r.value, 32);
        assert_eq!(r.trace.m, Some(4));

        // δ = ½, b = 1, ε = 8: ε₀ = εδ²/8 = ¼, M = ⌈log_½(εδ/8b)⌉ = 1,
        // chain 0 → 4, value max{4, ⌈1/ε₀⌉} = 4.
        let r = psi_viscosity_browder_single(1, 0.5, &theta_inv(), 8.0, &f_const(0)).unwrap();
        assert_eq!(r.trace.m, Some(1));
        assert_eq!(r.trace.eps0, Some(0.25));
        assert_eq!(r.value, 4);

        // θ_b ≡ 0 gives 0.
        let zero = ShiftedMetaRate::new(|_, _, _| 0).with_flags(true, true);
        let r = psi_viscosity_browder_single(1, 0.5, &zero, 1.0, &f_const(0)).unwrap();
        assert_eq!(r.value, 0);
    }

    #[test]
    fn cauchy_viscosity_browder_frozen_values() {
        assert_eq!(cauchy_viscosity_browder(0.5, &inv_eps(), 1.0).unwrap(), 32);
        // φ essentially constant: δ = 1-1e-12 gives ε₀ just under 1/8, so
        // the ceiling lands at 9.
        assert_eq!(
            cauchy_viscosity_browder(1.0 - 1e-12, &inv_eps(), 1.0).unwrap(),
            9
        );
        assert_eq!(
            cauchy_viscosity_browder(0.5, &CauchyRate::constant(0), 1.0).unwrap(),
            0
        );
    }

    #[test]
    fn browder_consistency_between_meta_and_cauchy_routes() {
        // With θ_b = max{N, ρ(ε)} the layered transformer collapses to the
        // plain Cauchy-route value, for every counterfunction on the grid.
        let rho = inv_eps();
        let theta = ShiftedMetaRate::from_cauchy(&rho);
        let fs = ["const 10", "affine 1 5", "affine 2 0", "pow 2 0"];
        for eps in [0.25, 0.5, 1.0, 2.0, 8.0] {
            let collapse = cauchy_viscosity_browder(0.5, &rho, eps).unwrap();
            for fsrc in fs {
                let cf = CountFn::from_dsl(&fsrc.parse::<Counterfunction>().unwrap());
                let full = psi_viscosity_browder_single(1, 0.5, &theta, eps, &cf).unwrap();
                assert_eq!(full.value, collapse, "eps={eps} f={fsrc}");
            }
        }
    }

    #[test]
    fn psi_viscosity_halpern_frozen_value_165() {
        // θ' = max{N, ⌈1/ε⌉}, δ ≡ ½, b = 1, A(k) = 2k, ε = 3, N = 0:
        // ε̃ = 0.2, ε₀ = 1/40, M = 9, Ψ_{M+1} = 40, value 165.
        let delta = RakotchModulus::constant(0.5).unwrap();
        let a = DivergenceRate::affine(2, 0);
        let r =
            psi_viscosity_halpern(1, &delta, &a, &theta_inv(), 3.0, &f_const(7), 0).unwrap();
        assert_eq!(r.value, 165);
        assert_eq!(r.trace.m, Some(9));
        assert_eq!(r.trace.eps0, Some(1.0 / 40.0));
        assert_eq!(*r.trace.psi_chain.last().unwrap(), 40);
    }

    #[test]
    fn psi_viscosity_halpern_single_frozen_values() {
        let a = DivergenceRate::affine(2, 0);
        let r = psi_viscosity_halpern_single(1, 0.5, &a, &theta_inv(), 3.0, &f_const(7)).unwrap();
        assert_eq!(r.value, 165);
        assert_eq!(r.trace.eps0, Some(1.0 / 40.0));

        // θ' ≡ 0: Ψ_{M+1} = 0 after the chain? No: Ψ₀ = A(1)+1 = 3 and
        // every θ' application yields 0, so σ₁ is taken at 0... the display
        // keeps the last chain value: σ₁[Ã,1](1, 0) = Ã(0+1)+1 = A(2)+1 = 5.
        let zero = ShiftedMetaRate::new(|_, _, _| 0).with_flags(true, true);
        let r = psi_viscosity_halpern_single(1, 0.5, &a, &zero, 3.0, &f_const(0)).unwrap();
        assert_eq!(r.value, 5);
    }

    #[test]
    fn cauchy_viscosity_halpern_frozen_values() {
        let a = DivergenceRate::affine(2, 0);
        // ε₀ = 1/40, max{ρ(1/40), A(1)+1} = 40, σ₁[Ã,1](1, 40) = 165.
        assert_eq!(
            cauchy_viscosity_halpern(1, 0.5, &a, &inv_eps(), 3.0).unwrap(),
            165
        );
        // ρ ≡ 0: n₀ = max{0, 3} = 3, σ₁[Ã,1](1, 3) = Ã(4)+1 = A(8)+1 = 17.
        assert_eq!(
            cauchy_viscosity_halpern(1, 0.5, &a, &CauchyRate::constant(0), 3.0).unwrap(),
            17
        );
        // ε scaled so that ε₀ ≥ 1: ε = 120, ρ(1) = 1, n₀ = max{1, 3} = 3,
        // σ₁ shift clamps to 0 at ε/3 = 40 ≥ 2b: Ã(3)+1 = A(6)+1 = 13.
        assert_eq!(
            cauchy_viscosity_halpern(1, 0.5, &a, &inv_eps(), 120.0).unwrap(),
            13
        );
    }

    #[test]
    fn halpern_consistency_between_meta_and_cauchy_routes() {
        let rho = inv_eps();
        let theta = ShiftedMetaRate::from_cauchy(&rho);
        let a = DivergenceRate::affine(2, 0);
        let fs = ["const 10", "affine 1 5", "affine 2 0"];
        for eps in [0.5, 1.0, 3.0, 12.0] {
            let collapse = cauchy_viscosity_halpern(1, 0.5, &a, &rho, eps).unwrap();
            for fsrc in fs {
                let cf = CountFn::from_dsl(&fsrc.parse::<Counterfunction>().unwrap());
                let full =
                    psi_viscosity_halpern_single(1, 0.5, &a, &theta, eps, &cf).unwrap();
                assert_eq!(full.value, collapse, "eps={eps} f={fsrc}");
            }
        }
    }

    #[test]
    fn xi_vkm_frozen_values() {
        let mu1 = DivergenceRate::affine(1, 0);
        let mu2 = inv_eps();
        // μ₂(1/8) = 8, μ̃₁(k) = 2k, σ₁ = μ̃₁(8 + ⌈ln 2⌉) + 1 = 19.
        assert_eq!(xi_vkm(1, 0.5, &mu1, &mu2, 1.0).unwrap(), 19);
        // ε = 2 ≥ 2b: ln term clamps, μ̃₁(μ₂(¼)) + 1 = 2·4 + 1 = 9.
        assert_eq!(xi_vkm(1, 0.5, &mu1, &mu2, 2.0).unwrap(), 9);
        // μ₂ ≡ 0: σ₁[μ̃₁,1](1, 0) = μ̃₁(⌈ln 2⌉) + 1 = 3.
        assert_eq!(
            xi_vkm(1, 0.5, &mu1, &CauchyRate::constant(0), 1.0).unwrap(),
            3
        );
    }

    #[test]
    fn omega_vkm_composition() {
        let mu1 = DivergenceRate::affine(1, 0);
        let mu2 = inv_eps();
        // ε = 3 so that Ξ(1) = 19; Ψ ≡ 5 ⇒ max{19, 5} + 1 = 20.
        let psi5: MetaRate<f64> = MetaRate::new(|_, _| 5);
        let r = omega_vkm(1, 0.5, &psi5, &mu1, &mu2, 3.0, &f_const(0)).unwrap();
        assert_eq!(r.value, 20);
        assert_eq!(r.trace.components["xi"], 19.0);

        // Ψ f-independent and dominating: value = Ψ + 1.
        let psi_big: MetaRate<f64> = MetaRate::new(|_, _| 1000);
        let r = omega_vkm(1, 0.5, &psi_big, &mu1, &mu2, 3.0, &f_const(0)).unwrap();
        assert_eq!(r.value, 1001);

        // f̂ propagation: constant f stays constant under the index shift.
        let probe: MetaRate<f64> = MetaRate::new(|_, f| f.eval(0));
        let r = omega_vkm(1, 0.5, &probe, &mu1, &mu2, 3.0, &f_const(42)).unwrap();
        assert_eq!(r.trace.components["psi"], 42.0);
    }

    #[test]
    fn cauchy_vkm_frozen_value_33() {
        let mu1 = DivergenceRate::affine(1, 0);
        let mu2 = inv_eps();
        let rho = inv_eps();
        // Ψ(1) = ρ(1/32) = 32; Ξ(1) = σ₁[μ̃₁,1](1, μ₂(1/12)) = 27;
        // max{27, 32} + 1 = 33.
        assert_eq!(cauchy_vkm(1, 0.5, &rho, &mu1, &mu2, 3.0).unwrap(), 33);
        // ρ ≡ 0 leaves Ξ(ε/3) + 1.
        assert_eq!(
            cauchy_vkm(1, 0.5, &CauchyRate::constant(0), &mu1, &mu2, 3.0).unwrap(),
            28
        );
        // The +1 keeps every value at least 1.
        assert!(
            cauchy_vkm(1, 0.5, &CauchyRate::constant(0), &mu1, &CauchyRate::constant(0), 600.0)
                .unwrap()
                >= 1
        );
    }

    #[test]
    fn relaxed_transformers_frozen_values() {
        // BrowderRelaxed: ρ(ε) = ⌈1/ε⌉, δ = ½, ε = 3, Ψ ≡ 5:
        // ρ_δ(ε/3) = ρ(½) = 2, max{2, 5} = 5.
        let psi5: MetaRate<f64> = MetaRate::new(|_, _| 5);
        assert_eq!(
            meta_browder_relaxed(&psi5, &inv_eps(), 0.5, 3.0, &f_const(0)).unwrap(),
            5
        );
        let psi0: MetaRate<f64> = MetaRate::new(|_, _| 0);
        assert_eq!(
            meta_browder_relaxed(&psi0, &CauchyRate::constant(0), 0.5, 3.0, &f_const(0)).unwrap(),
            0
        );
        // The shifted counterfunction: f_{ρ_δ,ε}(n) = f(max{ρ_δ(ε/3), n}).
        let probe: MetaRate<f64> = MetaRate::new(|_, f| f.eval(0));
        let f = CountFn::new(|n| n + 100);
        // ρ_δ(1) = ρ(½) = 2 ⇒ probe sees f(max{2,0}) = 102.
        assert_eq!(
            meta_browder_relaxed(&probe, &inv_eps(), 0.5, 3.0, &f).unwrap(),
            102
        );

        // HalpernRelaxed: Γ(1) = σ₁[Ã,1](1, ρ(¼)) = Ã(5)+1 = A(10)+1 = 21.
        let a = DivergenceRate::affine(2, 0);
        assert_eq!(
            gamma_halpern_relaxed(&a, &inv_eps(), 0.5, 1, 1.0).unwrap(),
            21
        );
        // Ψ' takes the max against Ψ(ε/3, shifted f).
        let psi_dom: MetaRate<f64> = MetaRate::new(|_, _| 1_000);
        assert_eq!(
            meta_halpern_relaxed(&psi_dom, &a, &inv_eps(), 0.5, 1, 3.0, &f_const(0)).unwrap(),
            1_000
        );
        // vKM-relaxed shares the formula.
        assert_eq!(
            meta_vkm_relaxed(&psi_dom, &a, &inv_eps(), 0.5, 1, 3.0, &f_const(0)).unwrap(),
            meta_halpern_relaxed(&psi_dom, &a, &inv_eps(), 0.5, 1, 3.0, &f_const(0)).unwrap()
        );
        // ρ ≡ 0 leaves Γ(ε) = σ₁[Ã, b](ε, 0).
        assert_eq!(
            gamma_halpern_relaxed(&a, &CauchyRate::constant(0), 0.5, 1, 1.0).unwrap(),
            sigma1(
                &DivergenceRate::new(|k| DivergenceRate::affine(2, 0).eval(2 * k)),
                1,
                1.0,
                0
            )
            .unwrap()
        );
    }

    #[test]
    fn monotone_flag_is_enforced() {
        let delta = RakotchModulus::constant(0.5).unwrap();
        let unflagged: ShiftedMetaRate<f64> = ShiftedMetaRate::new(|_, _, n| n);
        assert!(psi_viscosity_browder(1, &delta, &unflagged, 1.0, &f_const(0), 0).is_err());
        let a = DivergenceRate::new(|k| 2 * k); // not marked monotone
        assert!(
            psi_viscosity_halpern(1, &delta, &a, &theta_inv(), 3.0, &f_const(0), 0).is_err()
        );
    }

    #[test]
    fn outputs_nonincreasing_in_eps_on_grids() {
        let delta = RakotchModulus::constant(0.5).unwrap();
        let a = DivergenceRate::affine(2, 0);
        let mu1 = DivergenceRate::affine(1, 0);
        let grid = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0];
        let f = f_const(10);
        let mut prev_vb = u64::MAX;
        let mut prev_vh = u64::MAX;
        let mut prev_xi = u64::MAX;
        for &eps in &grid {
            let vb = psi_viscosity_browder(1, &delta, &theta_inv(), eps, &f, 0)
                .unwrap()
                .value;
            assert!(vb <= prev_vb, "psi_vb not nonincreasing at eps={eps}");
            prev_vb = vb;
            let vh = psi_viscosity_halpern(1, &delta, &a, &theta_inv(), eps, &f, 0)
                .unwrap()
                .value;
            assert!(vh <= prev_vh, "psi_vh not nonincreasing at eps={eps}");
            prev_vh = vh;
            let xi = xi_vkm(1, 0.5, &mu1, &inv_eps(), eps).unwrap();
            assert!(xi <= prev_xi, "xi not nonincreasing at eps={eps}");
            prev_xi = xi;
        }
    }

    #[test]
    fn trace_replay_reproduces_the_value() {
        let delta = RakotchModulus::constant(0.5).unwrap();
        let f = f_const(10);
        let r1 = psi_viscosity_browder(1, &delta, &theta_inv(), 1.0, &f, 0).unwrap();
        let r2 = psi_viscosity_browder(1, &delta, &theta_inv(), 1.0, &f, 0).unwrap();
        assert_eq!(r1, r2);
        // The recorded final chain entry replays the value through θ_b.
        let psi_m = *r1.trace.psi_chain.last().unwrap();
        let eps0 = r1.trace.eps0.unwrap();
        assert_eq!(theta_inv().eval(eps0, &f, psi_m), r1.value);
    }
}

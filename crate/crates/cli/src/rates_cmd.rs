//! The `rates` subcommand: evaluates any single transformer or modulus
//! formula from command-line arguments and prints the value together with
//! a JSON trace.

use crate::config::{
    parse_cauchy_rate, parse_counterfunction, parse_divergence_rate, parse_product_rate,
    ConfigError, Scalar,
};
use clap::Subcommand;
use num::{BigInt, BigRational, FromPrimitive, ToPrimitive};
use ratelab_core::mappings::RakotchModulus;
use ratelab_core::rate_calculus::{
    cauchy_as_meta, sigma1, sigma2, CountFn, MetaRate, ShiftedMetaRate,
};
use ratelab_core::schemes::ScalarSeq;
use ratelab_core::transformers as tf;
use ratelab_core::uniqueness as uq;
use serde_json::{json, Value};

pub type RResult<T> = Result<T, ConfigError>;

/// Output of one formula evaluation: a human line plus a JSON trace.
#[derive(Debug, Clone)]
pub struct RateOutput {
    pub display: String,
    pub json: Value,
}

fn bad(what: &'static str, detail: impl Into<String>) -> ConfigError {
    ConfigError::Bad {
        what,
        detail: detail.into(),
    }
}

fn scalar(s: &str) -> RResult<f64> {
    Scalar::parse_str(s).map_err(|e| bad("scalar", e))
}

fn rational(s: &str) -> RResult<BigRational> {
    if let Some((n, d)) = s.split_once('/') {
        let num: BigInt = n.trim().parse().map_err(|e| bad("rational", format!("{e}")))?;
        let den: BigInt = d.trim().parse().map_err(|e| bad("rational", format!("{e}")))?;
        if den == BigInt::from(0) {
            return Err(bad("rational", "zero denominator"));
        }
        Ok(BigRational::new(num, den))
    } else if let Ok(i) = s.trim().parse::<i64>() {
        Ok(BigRational::from_i64(i).unwrap())
    } else {
        let f: f64 = s.trim().parse().map_err(|e| bad("rational", format!("{e}")))?;
        BigRational::from_f64(f).ok_or_else(|| bad("rational", format!("non-finite '{s}'")))
    }
}

/// `hilbert` or `power:DEN:EXP` (η(ε) = ε^EXP/DEN).
fn parse_eta(src: &str) -> RResult<uq::ConvexityModulus> {
    if src == "hilbert" || src == "hilbert-eta" {
        return Ok(uq::ConvexityModulus::hilbert());
    }
    if let Some(rest) = src.strip_prefix("power:").or_else(|| src.strip_prefix("power-eta:")) {
        let (den, exp) = rest
            .split_once(':')
            .ok_or_else(|| bad("eta preset", format!("'{src}': expected power:DEN:EXP")))?;
        let den: u64 = den.parse().map_err(|e| bad("eta preset", format!("{e}")))?;
        let exp: u32 = exp.parse().map_err(|e| bad("eta preset", format!("{e}")))?;
        return Ok(uq::ConvexityModulus::power(den, exp)?);
    }
    Err(ConfigError::UnknownPreset {
        kind: "eta",
        name: src.into(),
    })
}

/// `quad P/Q` (Ω(ε) = P·ε²/Q) or `iota-linear P/Q` (Ω = ε·(P/Q·ε)/2).
fn parse_omega(src: &str) -> RResult<uq::AccretivityModulus> {
    let toks: Vec<&str> = src.split_whitespace().collect();
    let frac = |t: &str| -> RResult<(u64, u64)> {
        if let Some((n, d)) = t.split_once('/') {
            Ok((
                n.parse().map_err(|e| bad("omega preset", format!("{e}")))?,
                d.parse().map_err(|e| bad("omega preset", format!("{e}")))?,
            ))
        } else {
            // Accept decimals that are exact small dyadics, e.g. 0.5.
            let f: f64 = t.parse().map_err(|e| bad("omega preset", format!("{e}")))?;
            let den = 1u64 << 16;
            let num = (f * den as f64).round();
            if (num / den as f64 - f).abs() > 0.0 {
                return Err(bad("omega preset", format!("'{t}' is not an exact dyadic")));
            }
            Ok((num as u64, den))
        }
    };
    match toks.as_slice() {
        ["quad", t] => {
            let (num, den) = frac(t)?;
            Ok(uq::AccretivityModulus::Quad { num, den })
        }
        ["iota-linear", t] => {
            let (num, den) = frac(t)?;
            Ok(uq::AccretivityModulus::FromIncrement(
                uq::IncrementModulus::Linear {
                    slope_num: num,
                    slope_den: den,
                },
            ))
        }
        _ => Err(ConfigError::UnknownPreset {
            kind: "omega",
            name: src.into(),
        }),
    }
}

/// Ψ inputs on the command line: either a Cauchy-rate preset (used
/// f-independently) or `const K`.
fn parse_psi(src: &str) -> RResult<MetaRate<f64>> {
    Ok(cauchy_as_meta(&parse_cauchy_rate(src)?))
}

fn parse_beta_seq(src: &str) -> RResult<ScalarSeq<f64>> {
    let toks: Vec<&str> = src.split_whitespace().collect();
    match toks.as_slice() {
        ["const", v] => Ok(ScalarSeq::Constant(scalar(v)?)),
        ["one-over-n-plus-1"] => Ok(ScalarSeq::OneOverNPlus1),
        ["alternating", base, amp] => Ok(ScalarSeq::Alternating {
            base: scalar(base)?,
            amp: scalar(amp)?,
        }),
        _ => Err(ConfigError::UnknownPreset {
            kind: "sequence",
            name: src.into(),
        }),
    }
}

fn theta_from(rho_src: &str) -> RResult<ShiftedMetaRate<f64>> {
    Ok(ShiftedMetaRate::from_cauchy(&parse_cauchy_rate(rho_src)?))
}

fn countfn(src: &str) -> RResult<CountFn> {
    Ok(CountFn::from_dsl(&parse_counterfunction(src)?))
}

/// Formula evaluators exposed by `ratelab rates`.
#[derive(Debug, Clone, Subcommand)]
pub enum RateOp {
    /// σ₁[A, B](ε, N) = A(N + ⌈ln(2B/ε)⌉) + 1
    Sigma1 {
        #[arg(long = "A")]
        a: String,
        #[arg(long = "B")]
        b: u64,
        #[arg(long)]
        eps: String,
        #[arg(long = "N", default_value_t = 0)]
        n: u64,
    },
    /// σ₂[A', B](ε, N) = max{A'(N, ε/2B), N} + 1
    Sigma2 {
        #[arg(long = "A")]
        a: String,
        #[arg(long = "B")]
        b: u64,
        #[arg(long)]
        eps: String,
        #[arg(long = "N", default_value_t = 0)]
        n: u64,
    },
    /// Implicit-side metastability transformer (constant δ), Ψ₀ = N
    PsiVb {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        f: String,
        #[arg(long = "N", default_value_t = 0)]
        n: u64,
    },
    /// Single-map implicit transformer (Ψ₀ = 0)
    PsiVbSingle {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        f: String,
    },
    /// Cauchy-rate collapse on the implicit side: ρ(εδ²/8)
    CauchyVb {
        #[arg(long)]
        delta: String,
        #[arg(long)]
        rho: String,
        #[arg(long)]
        eps: String,
    },
    /// Explicit-side metastability transformer (constant δ)
    PsiVh {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long = "A")]
        a: String,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        f: String,
        #[arg(long = "N", default_value_t = 0)]
        n: u64,
    },
    /// Single-map explicit transformer (Ψ₀ = A(1)+1)
    PsiVhSingle {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long = "A")]
        a: String,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        f: String,
    },
    /// Cauchy-rate collapse on the explicit side
    CauchyVh {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long = "A")]
        a: String,
        #[arg(long)]
        rho: String,
        #[arg(long)]
        eps: String,
    },
    /// Ξ(ε) = σ₁[μ̃₁, b](ε, μ₂(δ²ε/2b))
    XiVkm {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        mu1: String,
        #[arg(long)]
        mu2: String,
        #[arg(long)]
        eps: String,
    },
    /// Ω(ε, f) = max{Ξ(ε/3), Ψ(ε/3, f̂)} + 1
    OmegaVkm {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        psi: String,
        #[arg(long)]
        mu1: String,
        #[arg(long)]
        mu2: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        f: String,
    },
    /// Cauchy rate for the hybrid iteration
    CauchyVkm {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long)]
        rho: String,
        #[arg(long)]
        mu1: String,
        #[arg(long)]
        mu2: String,
        #[arg(long)]
        eps: String,
    },
    /// Inexact implicit viscosity sequence
    BrowderRelaxed {
        #[arg(long)]
        delta: String,
        #[arg(long)]
        psi: String,
        #[arg(long)]
        rho_err: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        f: String,
    },
    /// Inexact explicit viscosity iteration
    HalpernRelaxed {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long = "A")]
        a: String,
        #[arg(long)]
        psi: String,
        #[arg(long)]
        rho_err: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        f: String,
    },
    /// Inexact hybrid iteration
    VkmRelaxed {
        #[arg(long)]
        b: u64,
        #[arg(long)]
        delta: String,
        #[arg(long = "A")]
        a: String,
        #[arg(long)]
        psi: String,
        #[arg(long)]
        rho_err: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        f: String,
    },
    /// Modulus of uniqueness ω_b(ε), exact rational plus float
    OmegaB {
        #[arg(long, default_value = "hilbert")]
        preset: String,
        #[arg(long)]
        omega: String,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        improved: bool,
    },
    /// β(b, ε) of the midpoint norm-drop inequality
    BetaL3 {
        #[arg(long, default_value = "hilbert")]
        preset: String,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        improved: bool,
    },
    /// Residual threshold making midpoints ε-approximate fixed points
    MidpointAfp {
        #[arg(long, default_value = "hilbert")]
        preset: String,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        improved: bool,
    },
    /// Ω(ε)/4b threshold bounding the norm gap
    NormGap {
        #[arg(long)]
        omega: String,
        #[arg(long)]
        b: u64,
        #[arg(long)]
        eps: String,
    },
    /// ω_b(ε)/2b threshold for the implicit path
    PathThreshold {
        #[arg(long)]
        omega_b_value: String,
        #[arg(long)]
        b: u64,
    },
    /// 2b/sqrt(π·Σ βᵢ(1-βᵢ)) residual bound for the KM iteration
    KmResidual {
        #[arg(long)]
        b: String,
        #[arg(long)]
        beta: String,
        #[arg(long)]
        n: u64,
    },
    /// γ(⌈4b²/(π·ω²)⌉) Cauchy rate for the KM iteration
    KmCauchy {
        #[arg(long)]
        gamma: String,
        #[arg(long)]
        b: String,
        #[arg(long)]
        omega_b_value: String,
    },
    /// Φ(ε, b) = ⌈4b/ε + 32b²/ε²⌉ for αₙ = 1/(n+1)
    PhiHalpern {
        #[arg(long)]
        b: String,
        #[arg(long)]
        eps: String,
    },
    /// General Φ(ε, b, θ, α, D) = max{θ(Dε/4b)+1, α(ε/4b)} + 1
    PhiHalpernGeneral {
        #[arg(long)]
        b: String,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        theta: String,
        #[arg(long)]
        alpha: String,
        #[arg(long = "D")]
        d: String,
    },
}

fn nat_output(op: &str, value: u64, trace: Value) -> RateOutput {
    RateOutput {
        display: value.to_string(),
        json: json!({ "op": op, "value": value, "trace": trace }),
    }
}

fn bound_output(op: &str, r: tf::BoundResult) -> RateOutput {
    RateOutput {
        display: r.value.to_string(),
        json: json!({
            "op": op,
            "value": r.value,
            "trace": serde_json::to_value(&r.trace).unwrap()
        }),
    }
}

fn rational_output(op: &str, value: &BigRational, inputs: Value) -> RateOutput {
    let float = value.to_f64().unwrap_or(f64::NAN);
    RateOutput {
        display: format!("{value} (= {float:e})"),
        json: json!({
            "op": op,
            "value": { "rational": value.to_string(), "float": float },
            "trace": inputs
        }),
    }
}

/// Evaluates one formula. This is the same entry point the binary uses.
pub fn evaluate(op: &RateOp) -> RResult<RateOutput> {
    match op {
        RateOp::Sigma1 { a, b, eps, n } => {
            let rate = parse_divergence_rate(a)?;
            let e = scalar(eps)?;
            let v = sigma1(&rate, *b, e, *n)?;
            Ok(nat_output(
                "sigma1",
                v,
                json!({"A": a, "B": b, "eps": e, "N": n}),
            ))
        }
        RateOp::Sigma2 { a, b, eps, n } => {
            let rate = parse_product_rate(a)?;
            let e = scalar(eps)?;
            let v = sigma2(&rate, *b, e, *n)?;
            Ok(nat_output(
                "sigma2",
                v.value,
                json!({"A'": a, "B": b, "eps": e, "N": n, "clamped": v.clamped}),
            ))
        }
        RateOp::PsiVb {
            b,
            delta,
            theta,
            eps,
            f,
            n,
        } => {
            let d = RakotchModulus::constant(scalar(delta)?)?;
            let r = tf::psi_viscosity_browder(
                *b,
                &d,
                &theta_from(theta)?,
                scalar(eps)?,
                &countfn(f)?,
                *n,
            )?;
            Ok(bound_output("psi-vb", r))
        }
        RateOp::PsiVbSingle {
            b,
            delta,
            theta,
            eps,
            f,
        } => {
            let r = tf::psi_viscosity_browder_single(
                *b,
                scalar(delta)?,
                &theta_from(theta)?,
                scalar(eps)?,
                &countfn(f)?,
            )?;
            Ok(bound_output("psi-vb-single", r))
        }
        RateOp::CauchyVb { delta, rho, eps } => {
            let d = scalar(delta)?;
            let e = scalar(eps)?;
            let v = tf::cauchy_viscosity_browder(d, &parse_cauchy_rate(rho)?, e)?;
            Ok(nat_output(
                "cauchy-vb",
                v,
                json!({"delta": d, "rho": rho, "eps": e, "eps0": e * d * d / 8.0}),
            ))
        }
        RateOp::PsiVh {
            b,
            delta,
            a,
            theta,
            eps,
            f,
            n,
        } => {
            let d = RakotchModulus::constant(scalar(delta)?)?;
            let r = tf::psi_viscosity_halpern(
                *b,
                &d,
                &parse_divergence_rate(a)?,
                &theta_from(theta)?,
                scalar(eps)?,
                &countfn(f)?,
                *n,
            )?;
            Ok(bound_output("psi-vh", r))
        }
        RateOp::PsiVhSingle {
            b,
            delta,
            a,
            theta,
            eps,
            f,
        } => {
            let r = tf::psi_viscosity_halpern_single(
                *b,
                scalar(delta)?,
                &parse_divergence_rate(a)?,
                &theta_from(theta)?,
                scalar(eps)?,
                &countfn(f)?,
            )?;
            Ok(bound_output("psi-vh-single", r))
        }
        RateOp::CauchyVh {
            b,
            delta,
            a,
            rho,
            eps,
        } => {
            let d = scalar(delta)?;
            let e = scalar(eps)?;
            let v = tf::cauchy_viscosity_halpern(
                *b,
                d,
                &parse_divergence_rate(a)?,
                &parse_cauchy_rate(rho)?,
                e,
            )?;
            Ok(nat_output(
                "cauchy-vh",
                v,
                json!({"b": b, "delta": d, "A": a, "rho": rho, "eps": e,
                       "eps0": e * d * d / 30.0}),
            ))
        }
        RateOp::XiVkm {
            b,
            delta,
            mu1,
            mu2,
            eps,
        } => {
            let d = scalar(delta)?;
            let e = scalar(eps)?;
            let v = tf::xi_vkm(
                *b,
                d,
                &parse_divergence_rate(mu1)?,
                &parse_cauchy_rate(mu2)?,
                e,
            )?;
            Ok(nat_output(
                "xi-vkm",
                v,
                json!({"b": b, "delta": d, "mu1": mu1, "mu2": mu2, "eps": e}),
            ))
        }
        RateOp::OmegaVkm {
            b,
            delta,
            psi,
            mu1,
            mu2,
            eps,
            f,
        } => {
            let r = tf::omega_vkm(
                *b,
                scalar(delta)?,
                &parse_psi(psi)?,
                &parse_divergence_rate(mu1)?,
                &parse_cauchy_rate(mu2)?,
                scalar(eps)?,
                &countfn(f)?,
            )?;
            Ok(bound_output("omega-vkm", r))
        }
        RateOp::CauchyVkm {
            b,
            delta,
            rho,
            mu1,
            mu2,
            eps,
        } => {
            let d = scalar(delta)?;
            let e = scalar(eps)?;
            let v = tf::cauchy_vkm(
                *b,
                d,
                &parse_cauchy_rate(rho)?,
                &parse_divergence_rate(mu1)?,
                &parse_cauchy_rate(mu2)?,
                e,
            )?;
            Ok(nat_output(
                "cauchy-vkm",
                v,
                json!({"b": b, "delta": d, "rho": rho, "mu1": mu1, "mu2": mu2, "eps": e}),
            ))
        }
        RateOp::BrowderRelaxed {
            delta,
            psi,
            rho_err,
            eps,
            f,
        } => {
            let v = tf::meta_browder_relaxed(
                &parse_psi(psi)?,
                &parse_cauchy_rate(rho_err)?,
                scalar(delta)?,
                scalar(eps)?,
                &countfn(f)?,
            )?;
            Ok(nat_output(
                "browder-relaxed",
                v,
                json!({"delta": delta, "psi": psi, "rho": rho_err, "eps": eps, "f": f}),
            ))
        }
        RateOp::HalpernRelaxed {
            b,
            delta,
            a,
            psi,
            rho_err,
            eps,
            f,
        } => {
            let v = tf::meta_halpern_relaxed(
                &parse_psi(psi)?,
                &parse_divergence_rate(a)?,
                &parse_cauchy_rate(rho_err)?,
                scalar(delta)?,
                *b,
                scalar(eps)?,
                &countfn(f)?,
            )?;
            Ok(nat_output(
                "halpern-relaxed",
                v,
                json!({"b": b, "delta": delta, "A": a, "psi": psi, "rho": rho_err,
                       "eps": eps, "f": f}),
            ))
        }
        RateOp::VkmRelaxed {
            b,
            delta,
            a,
            psi,
            rho_err,
            eps,
            f,
        } => {
            let v = tf::meta_vkm_relaxed(
                &parse_psi(psi)?,
                &parse_divergence_rate(a)?,
                &parse_cauchy_rate(rho_err)?,
                scalar(delta)?,
                *b,
                scalar(eps)?,
                &countfn(f)?,
            )?;
            Ok(nat_output(
                "vkm-relaxed",
                v,
                json!({"b": b, "delta": delta, "A": a, "psi": psi, "rho": rho_err,
                       "eps": eps, "f": f}),
            ))
        }
        RateOp::OmegaB {
            preset,
            omega,
            b,
            eps,
            improved,
        } => {
            let eta = parse_eta(preset)?;
            let om = parse_omega(omega)?;
            let bq = BigRational::from_u64(*b).unwrap();
            let eq = rational(eps)?;
            let v = uq::modulus_of_uniqueness(&om, &eta, bq, eq, *improved)?;
            Ok(rational_output(
                "omega-b",
                &v,
                json!({"eta": preset, "omega": omega, "b": b, "eps": eps,
                       "improved": improved}),
            ))
        }
        RateOp::BetaL3 {
            preset,
            b,
            eps,
            improved,
        } => {
            let eta = parse_eta(preset)?;
            let v = uq::beta_lemma3(
                &eta,
                BigRational::from_u64(*b).unwrap(),
                rational(eps)?,
                *improved,
            )?;
            Ok(rational_output(
                "beta-l3",
                &v,
                json!({"eta": preset, "b": b, "eps": eps, "improved": improved}),
            ))
        }
        RateOp::MidpointAfp {
            preset,
            b,
            eps,
            improved,
        } => {
            let eta = parse_eta(preset)?;
            let v = uq::midpoint_afp_threshold(
                &eta,
                BigRational::from_u64(*b).unwrap(),
                rational(eps)?,
                *improved,
            )?;
            Ok(rational_output(
                "midpoint-afp",
                &v,
                json!({"eta": preset, "b": b, "eps": eps, "improved": improved}),
            ))
        }
        RateOp::NormGap { omega, b, eps } => {
            let om = parse_omega(omega)?;
            let v = uq::norm_gap_threshold(
                &om,
                BigRational::from_u64(*b).unwrap(),
                rational(eps)?,
            )?;
            Ok(rational_output(
                "norm-gap",
                &v,
                json!({"omega": omega, "b": b, "eps": eps}),
            ))
        }
        RateOp::PathThreshold { omega_b_value, b } => {
            let v = uq::path_cauchy_threshold(
                rational(omega_b_value)?,
                BigRational::from_u64(*b).unwrap(),
            );
            Ok(rational_output(
                "path-threshold",
                &v,
                json!({"omega_b": omega_b_value, "b": b}),
            ))
        }
        RateOp::KmResidual { b, beta, n } => {
            let seq = parse_beta_seq(beta)?;
            let v = uq::km_residual_bound(scalar(b)?, &seq, *n);
            Ok(RateOutput {
                display: format!("{v}"),
                json: json!({"op": "km-residual", "value": v,
                             "trace": {"b": b, "beta": beta, "n": n}}),
            })
        }
        RateOp::KmCauchy {
            gamma,
            b,
            omega_b_value,
        } => {
            let v = uq::km_cauchy_rate(
                &parse_divergence_rate(gamma)?,
                scalar(b)?,
                scalar(omega_b_value)?,
            )?;
            Ok(nat_output(
                "km-cauchy",
                v,
                json!({"gamma": gamma, "b": b, "omega_b": omega_b_value}),
            ))
        }
        RateOp::PhiHalpern { b, eps } => {
            let bb = scalar(b)?;
            let e = scalar(eps)?;
            let v = uq::halpern_rate_special(e, bb)?;
            Ok(nat_output("phi-halpern", v, json!({"b": bb, "eps": e})))
        }
        RateOp::PhiHalpernGeneral {
            b,
            eps,
            theta,
            alpha,
            d,
        } => {
            let v = uq::halpern_cauchy_rate(
                scalar(eps)?,
                scalar(b)?,
                &parse_cauchy_rate(theta)?,
                &parse_cauchy_rate(alpha)?,
                scalar(d)?,
            )?;
            Ok(nat_output(
                "phi-halpern-general",
                v,
                json!({"b": b, "eps": eps, "theta": theta, "alpha": alpha, "D": d}),
            ))
        }
    }
}

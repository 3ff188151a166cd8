//! Empirical soundness checks: exhaustive metastable-window search,
//! Cauchy-rate spot checks, and the brute-force recurrence oracle backing
//! the σ₁/σ₂ lemmas. Resource exhaustion is always reported as
//! `Inconclusive`, never as a falsification.

use crate::error::Result;
use crate::geometry::Sampler;
use crate::rate_calculus::{CauchyRate, CountFn};
use crate::report::{CheckItem, CheckStatus, VerificationReport, WindowWitness};
use crate::scalar::{lit, Real};
use crate::schemes::Trajectory;
use rayon::prelude::*;

/// Resource limits for trajectory extension and window scans.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    /// Largest trajectory index the verifier will generate.
    pub max_index: u64,
    /// Largest window checked pairwise; beyond it only the 1-d
    /// running-extremes shortcut applies.
    pub max_window: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_index: 1_000_000,
            max_window: 100_000,
        }
    }
}

/// Outcome of a metastable-window search.
#[derive(Debug, Clone)]
pub enum WindowOutcome {
    /// Least passing window start in `[N, bound]`.
    Witness(WindowWitness),
    /// Every window in `[N, bound]` was fully evaluated and exceeded the
    /// tolerance: the bound is empirically falsified.
    Falsified { worst: WindowWitness },
    /// Resource budget exceeded before a verdict.
    Inconclusive { reason: String },
}

impl WindowOutcome {
    pub fn witness(&self) -> Option<&WindowWitness> {
        match self {
            WindowOutcome::Witness(w) => Some(w),
            _ => None,
        }
    }

    pub fn status(&self) -> CheckStatus {
        match self {
            WindowOutcome::Witness(_) => CheckStatus::Pass,
            WindowOutcome::Falsified { .. } => CheckStatus::Fail,
            WindowOutcome::Inconclusive { .. } => CheckStatus::Inconclusive,
        }
    }
}

/// Max pairwise distance over `points[lo..=hi]` (indices into the slice),
/// or `None` when the window budget rules the window out.
fn window_diameter<F: Real>(
    points: &[crate::geometry::Point<F>],
    space: &crate::geometry::Space<F>,
    lo: u64,
    hi: u64,
    budget: &Budget,
    early_stop: Option<F>,
) -> Option<F> {
    if hi < lo {
        return Some(F::zero()); // empty window: vacuously stable
    }
    let w = hi - lo + 1;
    if w > budget.max_window {
        if space.dim() == 1 {
            // Diameter via running extremes in one dimension.
            let mut min = F::infinity();
            let mut max = F::neg_infinity();
            for p in &points[lo as usize..=hi as usize] {
                let c = p.coords()[0];
                min = min.min(c);
                max = max.max(c);
            }
            return Some(max - min);
        }
        return None;
    }
    let mut diameter = F::zero();
    for i in lo..=hi {
        for j in (i + 1)..=hi {
            let d = space.dist_unchecked(&points[i as usize], &points[j as usize]);
            diameter = diameter.max(d);
            if let Some(stop) = early_stop {
                if diameter > stop {
                    return Some(diameter);
                }
            }
        }
    }
    Some(diameter)
}

/// Searches `[n0, bound]` for the least window start `n` whose window
/// `[n, f(n)]` has pairwise distances within `ε` plus the slack accumulated
/// from inner-solve residuals over the involved indices.
///
/// Failure means every window was fully evaluated and exceeded its
/// tolerance — an empirical falsification of the bound.
pub fn find_metastable_window<F: Real>(
    traj: &mut Trajectory<F>,
    eps: F,
    f: &CountFn,
    bound: u64,
    n0: u64,
    budget: &Budget,
) -> Result<WindowOutcome> {
    if bound > budget.max_index {
        return Ok(WindowOutcome::Inconclusive {
            reason: format!("bound {bound} exceeds index budget {}", budget.max_index),
        });
    }
    // Horizon needed: the largest window end over candidate starts.
    let mut horizon = bound;
    for n in n0..=bound {
        horizon = horizon.max(f.eval(n).min(u64::MAX));
    }
    if horizon > budget.max_index {
        return Ok(WindowOutcome::Inconclusive {
            reason: format!(
                "window horizon {horizon} exceeds index budget {}",
                budget.max_index
            ),
        });
    }
    traj.points_upto(horizon)?;

    let mut worst: Option<WindowWitness> = None;
    for n in n0..=bound {
        let end = f.eval(n);
        let slack = if end >= n {
            traj.accumulated_slack(n, end)?
        } else {
            F::zero()
        };
        let tol = eps + lit::<F>(2.0) * slack;
        let space = traj.space().clone();
        let diameter = match window_diameter(traj.generated(), &space, n, end, budget, Some(tol)) {
            Some(d) => d,
            None => {
                return Ok(WindowOutcome::Inconclusive {
                    reason: format!(
                        "window [{n}, {end}] larger than the pairwise budget in dimension {}",
                        space.dim()
                    ),
                })
            }
        };
        let witness = WindowWitness {
            n,
            window_end: end,
            max_pairwise_distance: diameter.to_f64().unwrap(),
        };
        if diameter <= tol {
            return Ok(WindowOutcome::Witness(witness));
        }
        let replace = worst
            .as_ref()
            .map_or(true, |w| diameter.to_f64().unwrap() < w.max_pairwise_distance);
        if replace {
            worst = Some(witness);
        }
    }
    Ok(WindowOutcome::Falsified {
        worst: worst.expect("at least one window evaluated"),
    })
}

/// Checks a claimed Cauchy rate on a concrete trajectory: samples index
/// pairs at and beyond `ρ(ε)` (the extremes plus random pairs up to the
/// budget) and verifies their distances stay within `ε` plus solver slack.
pub fn check_cauchy_rate<F: Real>(
    traj: &mut Trajectory<F>,
    rho: &CauchyRate<F>,
    eps_grid: &[F],
    pair_budget: usize,
    horizon: u64,
    sampler: &mut Sampler,
    budget: &Budget,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(
        "cauchy-rate",
        format!("scheme={} horizon={horizon}", traj.scheme()),
    );
    for &eps in eps_grid {
        let n0 = rho.eval(eps);
        if n0 > budget.max_index || horizon > budget.max_index {
            report.push(CheckItem {
                label: format!("eps={}", eps.to_f64().unwrap()),
                status: CheckStatus::Inconclusive,
                measured: 0.0,
                tolerance: eps.to_f64().unwrap(),
                detail: format!("rho(eps) = {n0} beyond the index budget"),
            });
            continue;
        }
        if n0 >= horizon {
            report.push(CheckItem {
                label: format!("eps={}", eps.to_f64().unwrap()),
                status: CheckStatus::Inconclusive,
                measured: 0.0,
                tolerance: eps.to_f64().unwrap(),
                detail: format!("rho(eps) = {n0} at or beyond the horizon {horizon}"),
            });
            continue;
        }
        traj.points_upto(horizon)?;
        let slack = traj.accumulated_slack(n0, horizon)?;
        let tol = eps + lit::<F>(2.0) * slack;

        let mut pairs: Vec<(u64, u64)> = vec![(n0, horizon), (n0, n0 + 1), (horizon - 1, horizon)];
        for _ in 0..pair_budget {
            let i = n0 + sampler.index(horizon - n0 + 1);
            let j = n0 + sampler.index(horizon - n0 + 1);
            pairs.push((i.min(j), i.max(j)));
        }
        let mut worst = F::zero();
        let mut worst_pair = (n0, n0);
        for (i, j) in pairs {
            let d = {
                let pts = traj.generated();
                traj.space().dist_unchecked(&pts[i as usize], &pts[j as usize])
            };
            if d > worst {
                worst = d;
                worst_pair = (i, j);
            }
        }
        let mut item = CheckItem::from_violation(
            format!("eps={}", eps.to_f64().unwrap()),
            (worst - tol).max(F::zero()).to_f64().unwrap(),
            0.0,
        );
        item.measured = worst.to_f64().unwrap();
        item.tolerance = tol.to_f64().unwrap();
        item.status = if worst <= tol {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        if item.status == CheckStatus::Fail {
            item.detail = format!("witness pair ({}, {})", worst_pair.0, worst_pair.1);
        }
        report.measured_slack = report
            .measured_slack
            .max(slack.to_f64().unwrap());
        report.push(item);
    }
    Ok(report)
}

/// A concrete instance of the recurrence `a_{i+1} = (1-λᵢ)aᵢ + λᵢbᵢ`
/// (run at equality, the extremal case of the `≤` premise).
#[derive(Debug, Clone)]
pub struct XuInstance<F> {
    pub lambda: Vec<F>,
    pub b_seq: Vec<F>,
    pub a0: F,
    /// Integer bound on `(aₙ)`.
    pub big_b: u64,
    /// Premise window `[n0, p]` on which `bᵢ ≤ ε/2` is required.
    pub n0: u64,
    pub p: u64,
}

/// Generates the extremal sequence of the recurrence. Independent oracle:
/// no rate machinery is consulted, the recurrence is just unrolled.
pub fn brute_force_xu<F: Real>(inst: &XuInstance<F>) -> Vec<F> {
    let len = inst.p as usize + 1;
    let mut a = Vec::with_capacity(len);
    a.push(inst.a0);
    for i in 0..inst.p as usize {
        let l = inst.lambda[i];
        let prev = a[i];
        a.push((F::one() - l) * prev + l * inst.b_seq[i]);
    }
    a
}

/// Direct numerical validation that `A` is a divergence rate for the
/// instance's λ-sequence up to `k_max` (partial sums recomputed directly).
pub fn validate_divergence_on_instance<F: Real>(
    lambda: &[F],
    rate: &crate::rate_calculus::DivergenceRate,
    k_max: u64,
) -> bool {
    for k in 0..=k_max {
        let top = rate.eval(k);
        if top as usize >= lambda.len() {
            return false;
        }
        let sum = lambda[..=top as usize]
            .iter()
            .fold(F::zero(), |acc, &l| acc + l);
        if sum < F::from_u64(k).unwrap() {
            return false;
        }
    }
    true
}

/// Direct numerical validation of a product rate on the instance:
/// `∏_{i=m}^{A'(m,ε)}(1-λᵢ) ≤ ε` over a grid of `(m, ε)`.
pub fn validate_product_rate_on_instance<F: Real>(
    lambda: &[F],
    rate: &crate::rate_calculus::ProductRate<F>,
    m_grid: &[u64],
    eps_grid: &[F],
) -> bool {
    for &m in m_grid {
        for &eps in eps_grid {
            let top = rate.eval(m, eps);
            if top as usize >= lambda.len() {
                return false;
            }
            let mut prod = F::one();
            for &l in &lambda[m as usize..=top as usize] {
                prod = prod * (F::one() - l);
            }
            if prod > eps {
                return false;
            }
        }
    }
    true
}

/// Checks the σ-lemma conclusion on a generated instance: given the index
/// `sigma_index` (computed by the caller from σ₁ or σ₂ — the oracle itself
/// never calls them), asserts `aᵢ ≤ ε + tol` for all `i ∈ [sigma_index, p]`,
/// provided the premise `bᵢ ≤ ε/2 on [n0, p]` holds.
pub fn check_xu_conclusion<F: Real>(
    inst: &XuInstance<F>,
    sigma_index: u64,
    eps: F,
    tol: F,
) -> VerificationReport {
    let mut report = VerificationReport::new(
        "xu-oracle",
        format!("n0={} p={} B={}", inst.n0, inst.p, inst.big_b),
    );
    report.tolerance = tol.to_f64().unwrap();

    // Premise: b_i ≤ ε/2 on [n0, p].
    let half = eps / lit::<F>(2.0);
    let premise_violation = (inst.n0..=inst.p.min(inst.b_seq.len() as u64 - 1))
        .map(|i| inst.b_seq[i as usize] - half)
        .fold(F::neg_infinity(), |m, v| m.max(v));
    if premise_violation > F::zero() {
        report.push(CheckItem {
            label: "premise-b-le-half-eps".into(),
            status: CheckStatus::Inconclusive,
            measured: premise_violation.to_f64().unwrap(),
            tolerance: 0.0,
            detail: "premise fails; conclusion not applicable".into(),
        });
        return report;
    }

    let a = brute_force_xu(inst);
    // Boundedness premise |a_i| ≤ B.
    let bb = F::from_u64(inst.big_b).unwrap();
    let bound_violation = a
        .iter()
        .map(|&ai| ai.abs() - bb)
        .fold(F::neg_infinity(), |m, v| m.max(v));
    report.push(CheckItem::from_violation(
        "premise-a-bounded",
        bound_violation.max(F::zero()).to_f64().unwrap(),
        tol.to_f64().unwrap(),
    ));

    if sigma_index > inst.p {
        report.push(CheckItem {
            label: "conclusion-window".into(),
            status: CheckStatus::Inconclusive,
            measured: 0.0,
            tolerance: eps.to_f64().unwrap(),
            detail: format!("sigma index {sigma_index} beyond horizon p={}", inst.p),
        });
        return report;
    }
    let worst = (sigma_index..=inst.p)
        .map(|i| a[i as usize] - eps)
        .fold(F::neg_infinity(), |m, v| m.max(v));
    report.push(CheckItem::from_violation(
        "conclusion-a-le-eps",
        worst.max(F::zero()).to_f64().unwrap(),
        tol.to_f64().unwrap(),
    ));
    report
}

/// One grid entry for [`check_bound_soundness`].
#[derive(Debug, Clone)]
pub struct BoundCase<F> {
    pub eps: F,
    pub f_label: String,
    pub f: CountFn,
    pub bound: u64,
}

impl<F: std::fmt::Debug> std::fmt::Display for BoundCase<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "eps={:?} f={} bound={}", self.eps, self.f_label, self.bound)
    }
}

/// Runs the metastable-window search for each `(ε, f, bound)` case against
/// one trajectory. The trajectory is extended serially to the common
/// horizon, then the per-case scans run in parallel over the read-only
/// points.
pub fn check_bound_soundness<F: Real>(
    traj: &mut Trajectory<F>,
    cases: &[BoundCase<F>],
    n0: u64,
    budget: &Budget,
) -> Result<VerificationReport> {
    let mut report = VerificationReport::new(
        "bound-soundness",
        format!("scheme={} cases={}", traj.scheme(), cases.len()),
    );

    // Common horizon over the feasible cases.
    let mut horizon = 0u64;
    let mut feasible = vec![true; cases.len()];
    for (idx, case) in cases.iter().enumerate() {
        if case.bound > budget.max_index {
            feasible[idx] = false;
            continue;
        }
        let mut h = case.bound;
        for n in n0..=case.bound {
            h = h.max(case.f.eval(n));
        }
        if h > budget.max_index {
            feasible[idx] = false;
        } else {
            horizon = horizon.max(h);
        }
    }
    traj.points_upto(horizon)?;

    // Slack prefix sums for O(1) per-window slack accounting.
    let slack_prefix: Vec<F> = {
        let mut acc = F::zero();
        let mut v = Vec::with_capacity(horizon as usize + 2);
        v.push(F::zero());
        for i in 0..=horizon {
            acc = acc + traj.residual_at(i);
            v.push(acc);
        }
        v
    };
    let space = traj.space().clone();
    let points = traj.generated();

    let outcomes: Vec<(usize, WindowOutcome)> = cases
        .par_iter()
        .enumerate()
        .map(|(idx, case)| {
            if !feasible[idx] {
                return (
                    idx,
                    WindowOutcome::Inconclusive {
                        reason: "bound or horizon beyond the index budget".into(),
                    },
                );
            }
            let mut worst: Option<WindowWitness> = None;
            for n in n0..=case.bound {
                let end = case.f.eval(n);
                let slack = if end >= n {
                    slack_prefix[end as usize + 1] - slack_prefix[n as usize]
                } else {
                    F::zero()
                };
                let tol = case.eps + lit::<F>(2.0) * slack;
                let diameter =
                    match window_diameter(points, &space, n, end, budget, Some(tol)) {
                        Some(d) => d,
                        None => {
                            return (
                                idx,
                                WindowOutcome::Inconclusive {
                                    reason: format!("window [{n}, {end}] beyond pairwise budget"),
                                },
                            )
                        }
                    };
                let witness = WindowWitness {
                    n,
                    window_end: end,
                    max_pairwise_distance: diameter.to_f64().unwrap(),
                };
                if diameter <= tol {
                    return (idx, WindowOutcome::Witness(witness));
                }
                let replace = worst.as_ref().map_or(true, |w| {
                    diameter.to_f64().unwrap() < w.max_pairwise_distance
                });
                if replace {
                    worst = Some(witness);
                }
            }
            (
                idx,
                WindowOutcome::Falsified {
                    worst: worst.expect("nonempty scan"),
                },
            )
        })
        .collect();

    let mut sorted = outcomes;
    sorted.sort_by_key(|(idx, _)| *idx);
    for (idx, outcome) in sorted {
        let case = &cases[idx];
        let label = format!(
            "eps={} f={} bound={}",
            case.eps.to_f64().unwrap(),
            case.f_label,
            case.bound
        );
        let (status, measured, detail) = match &outcome {
            WindowOutcome::Witness(w) => {
                report.witnesses.push(w.clone());
                (
                    CheckStatus::Pass,
                    w.max_pairwise_distance,
                    format!("witness n={} window_end={}", w.n, w.window_end),
                )
            }
            WindowOutcome::Falsified { worst } => (
                CheckStatus::Fail,
                worst.max_pairwise_distance,
                format!("best window start n={} still exceeds tolerance", worst.n),
            ),
            WindowOutcome::Inconclusive { reason } => {
                (CheckStatus::Inconclusive, 0.0, reason.clone())
            }
        };
        report.push(CheckItem {
            label,
            status,
            measured,
            tolerance: case.eps.to_f64().unwrap(),
            detail,
        });
    }
    Ok(report)
}

//! Experiment runner: binds a config to trajectories, bounds and checks,
//! writes trajectory CSVs, bound JSONs with traces, a canonical report JSON
//! and a summary CSV.

use crate::config::{
    parse_cauchy_rate, parse_divergence_rate, CResult, CheckConfig, ConfigError,
    ExperimentConfig, TransformerConfig,
};
use ratelab_core::geometry::{check_w_axioms, Sampler};
use ratelab_core::mappings::{check_class, default_eps_grid};
use ratelab_core::rate_calculus::CountFn;
use ratelab_core::report::{CheckItem, CheckStatus, VerificationReport};
use ratelab_core::schemes::Trajectory;
use ratelab_core::transformers::{self as tf, BoundResult};
use ratelab_core::uniqueness as uq;
use ratelab_core::verifier::{check_bound_soundness, check_cauchy_rate, BoundCase};
use serde::Serialize;
use std::fs;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub config_name: String,
    pub seed: u64,
    pub overall: CheckStatus,
    pub checks: Vec<VerificationReport>,
}

pub struct RunOutcome {
    pub report: RunReport,
    /// (check index, case label, bound result) for every computed bound.
    pub bounds: Vec<(usize, String, BoundResult)>,
    pub runtimes_ms: Vec<u128>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.report.overall {
            CheckStatus::Fail => 1,
            // Inconclusive entries are listed but do not fail the run.
            _ => 0,
        }
    }
}

fn overall_of(checks: &[VerificationReport]) -> CheckStatus {
    checks.iter().fold(CheckStatus::Pass, |acc, c| {
        if c.status == CheckStatus::Fail {
            CheckStatus::Fail
        } else {
            acc
        }
    })
}

/// Computes the bound for one `(ε, f)` cell of the grid.
fn bound_for(
    cfg: &ExperimentConfig,
    tc: &TransformerConfig,
    eps: f64,
    f: &CountFn,
    n0: u64,
) -> CResult<BoundResult> {
    let b = cfg.space.diameter_bound;
    let res = match tc {
        TransformerConfig::CauchyVb { delta, rho } => {
            let v = tf::cauchy_viscosity_browder(cfg.delta(delta)?, &parse_cauchy_rate(rho)?, eps)?;
            BoundResult {
                value: v,
                trace: plain_trace("cauchy-vb", eps),
            }
        }
        TransformerConfig::PsiVbSingle { delta, theta } => {
            tf::psi_viscosity_browder_single(b, cfg.delta(delta)?, &theta.build()?, eps, f)?
        }
        TransformerConfig::CauchyVh { delta, a, rho } => {
            let v = tf::cauchy_viscosity_halpern(
                b,
                cfg.delta(delta)?,
                &parse_divergence_rate(a)?,
                &parse_cauchy_rate(rho)?,
                eps,
            )?;
            BoundResult {
                value: v,
                trace: plain_trace("cauchy-vh", eps),
            }
        }
        TransformerConfig::PsiVhSingle { delta, a, theta } => tf::psi_viscosity_halpern_single(
            b,
            cfg.delta(delta)?,
            &parse_divergence_rate(a)?,
            &theta.build()?,
            eps,
            f,
        )?,
        TransformerConfig::OmegaVkm {
            delta,
            mu1,
            mu2,
            psi,
        } => tf::omega_vkm(
            b,
            cfg.delta(delta)?,
            &cfg.psi(psi)?,
            &parse_divergence_rate(mu1)?,
            &parse_cauchy_rate(mu2)?,
            eps,
            f,
        )?,
        TransformerConfig::CauchyVkm {
            delta,
            rho,
            mu1,
            mu2,
        } => {
            let v = tf::cauchy_vkm(
                b,
                cfg.delta(delta)?,
                &parse_cauchy_rate(rho)?,
                &parse_divergence_rate(mu1)?,
                &parse_cauchy_rate(mu2)?,
                eps,
            )?;
            BoundResult {
                value: v,
                trace: plain_trace("cauchy-vkm", eps),
            }
        }
        TransformerConfig::BrowderRelaxed {
            delta,
            rho_err,
            psi,
        } => {
            let v = tf::meta_browder_relaxed(
                &cfg.psi(psi)?,
                &parse_cauchy_rate(rho_err)?,
                cfg.delta(delta)?,
                eps,
                f,
            )?;
            BoundResult {
                value: v,
                trace: plain_trace("browder-relaxed", eps),
            }
        }
        TransformerConfig::HalpernRelaxed {
            delta,
            a,
            rho_err,
            psi,
        } => {
            let v = tf::meta_halpern_relaxed(
                &cfg.psi(psi)?,
                &parse_divergence_rate(a)?,
                &parse_cauchy_rate(rho_err)?,
                cfg.delta(delta)?,
                b,
                eps,
                f,
            )?;
            BoundResult {
                value: v,
                trace: plain_trace("halpern-relaxed", eps),
            }
        }
        TransformerConfig::VkmRelaxed {
            delta,
            a,
            rho_err,
            psi,
        } => {
            let v = tf::meta_vkm_relaxed(
                &cfg.psi(psi)?,
                &parse_divergence_rate(a)?,
                &parse_cauchy_rate(rho_err)?,
                cfg.delta(delta)?,
                b,
                eps,
                f,
            )?;
            BoundResult {
                value: v,
                trace: plain_trace("vkm-relaxed", eps),
            }
        }
    };
    let _ = n0;
    Ok(res)
}

fn plain_trace(op: &str, eps: f64) -> tf::BoundTrace {
    tf::BoundTrace {
        op: op.into(),
        eps,
        eps_tilde: None,
        eps0: None,
        m: None,
        psi_chain: Vec::new(),
        f_depth: None,
        components: std::collections::BTreeMap::new(),
    }
}

fn write_trajectory_csv(path: &Path, traj: &mut Trajectory<f64>, upto: u64) -> CResult<()> {
    let mut out = String::new();
    let dim = traj.space().dim();
    let mut header = String::from("index");
    for i in 0..dim {
        header.push_str(&format!(",x{i}"));
    }
    header.push_str(",residual,injected_error\n");
    out.push_str(&header);
    traj.points_upto(upto)?;
    for n in 0..=upto {
        let p = traj.point(n)?.clone();
        let mut row = n.to_string();
        for c in p.coords() {
            row.push_str(&format!(",{c:e}"));
        }
        row.push_str(&format!(",{:e},{:e}\n", traj.residual_at(n), traj.injected_at(n)));
        out.push_str(&row);
    }
    fs::write(path, out).map_err(|e| ConfigError::Bad {
        what: "output file",
        detail: e.to_string(),
    })
}

/// Executes every check in the config. When `out_dir` is given, artifacts
/// are written there: `report.json`, `summary.csv`, `traj_<i>.csv`,
/// `bounds_<i>.json`.
pub fn run(cfg: &ExperimentConfig, name: &str, out_dir: Option<&Path>) -> CResult<RunOutcome> {
    let budget = cfg.budgets.build();
    let mut checks = Vec::new();
    let mut bounds = Vec::new();
    let mut runtimes = Vec::new();

    for (idx, check) in cfg.checks.iter().enumerate() {
        let started = Instant::now();
        let mut report = match check {
            CheckConfig::Axioms {
                samples,
                tol,
                cn,
                space,
                expect_fail,
            } => {
                let sp = match space {
                    Some(sc) => sc.build()?,
                    None => cfg.space()?,
                };
                let mut sampler = Sampler::seeded(cfg.seed);
                let mut rep = check_w_axioms(&sp, &mut sampler, *samples, tol.0, *cn)?;
                if let Some(axiom) = expect_fail {
                    // Negative test: the named axiom must fail.
                    let failed = rep
                        .item(axiom)
                        .map(|it| it.status == CheckStatus::Fail)
                        .unwrap_or(false);
                    rep.status = if failed {
                        CheckStatus::Pass
                    } else {
                        CheckStatus::Fail
                    };
                    rep.items.push(CheckItem {
                        label: format!("expected-failure-of-{axiom}"),
                        status: rep.status,
                        measured: 0.0,
                        tolerance: 0.0,
                        detail: "negative check: axiom must be violated".into(),
                    });
                }
                rep
            }
            CheckConfig::MapClass {
                map,
                samples,
                tol,
                expect_fail,
            } => {
                let sp = cfg.space()?;
                let m = cfg.map(map)?;
                let mut sampler = Sampler::seeded(cfg.seed);
                let mut rep =
                    check_class(&sp, &m, &mut sampler, *samples, tol.0, &default_eps_grid())?;
                if *expect_fail {
                    rep.status = if rep.status == CheckStatus::Fail {
                        CheckStatus::Pass
                    } else {
                        CheckStatus::Fail
                    };
                }
                rep
            }
            CheckConfig::BoundSoundness {
                scheme,
                transformer,
                n0,
                bound_override,
                eps_grid,
                f_grid,
            } => {
                let mut traj = cfg.trajectory(scheme)?;
                let eps_values = cfg.eps_grid_for(eps_grid);
                let fs = cfg.f_grid_for(f_grid)?;
                if eps_values.is_empty() || fs.is_empty() {
                    return Err(ConfigError::Bad {
                        what: "bound-soundness check",
                        detail: "empty eps or f grid".into(),
                    });
                }
                let mut cases = Vec::new();
                for &eps in &eps_values {
                    for (label, cf) in &fs {
                        let f = CountFn::from_dsl(cf);
                        let br = match bound_override {
                            Some(v) => BoundResult {
                                value: *v,
                                trace: plain_trace("override", eps),
                            },
                            None => bound_for(cfg, transformer, eps, &f, *n0)?,
                        };
                        bounds.push((idx, format!("eps={eps} f={label}"), br.clone()));
                        cases.push(BoundCase {
                            eps,
                            f_label: label.clone(),
                            f,
                            bound: br.value,
                        });
                    }
                }
                let rep = check_bound_soundness(&mut traj, &cases, *n0, &budget)?;
                if let Some(dir) = out_dir {
                    let horizon = traj.len().saturating_sub(1) as u64;
                    write_trajectory_csv(&dir.join(format!("traj_{idx}.csv")), &mut traj, horizon)?;
                }
                rep
            }
            CheckConfig::CauchyRate {
                scheme,
                rho,
                horizon,
                pair_budget,
                eps_grid,
            } => {
                let mut traj = cfg.trajectory(scheme)?;
                let rate = parse_cauchy_rate(rho)?;
                let eps_values = cfg.eps_grid_for(eps_grid);
                let mut sampler = Sampler::seeded(cfg.seed);
                let rep = check_cauchy_rate(
                    &mut traj,
                    &rate,
                    &eps_values,
                    *pair_budget,
                    *horizon,
                    &mut sampler,
                    &budget,
                )?;
                if let Some(dir) = out_dir {
                    let h = traj.len().saturating_sub(1) as u64;
                    write_trajectory_csv(&dir.join(format!("traj_{idx}.csv")), &mut traj, h)?;
                }
                rep
            }
            CheckConfig::KmResidual {
                map,
                start,
                beta,
                n_max,
            } => {
                let sp = cfg.space()?;
                let m = cfg.map(map)?;
                let beta_seq = cfg.sequence(beta)?;
                let start_pt = ratelab_core::geometry::Point::new(
                    start.iter().map(|s| s.0).collect(),
                )?;
                let norm_bound = {
                    let origin =
                        ratelab_core::geometry::Point::origin(sp.dim());
                    sp.radius() + sp.dist(sp.center(), &origin)?
                };
                let mut traj = Trajectory::km(sp, m.clone(), start_pt, beta_seq.clone())?;
                let b = norm_bound;
                let mut rep = VerificationReport::new(
                    "km-residual",
                    format!("map={map} beta={beta} n_max={n_max}"),
                );
                let mut worst = f64::NEG_INFINITY;
                let space = traj.space().clone();
                traj.points_upto(*n_max)?;
                for n in 0..=*n_max {
                    let x = traj.point(n)?.clone();
                    let tx = m.apply(&space, &x)?;
                    let residual = space.dist(&x, &tx)?;
                    let bound = uq::km_residual_bound(b, &beta_seq, n);
                    worst = worst.max(residual - bound);
                }
                rep.tolerance = 1e-12;
                rep.push(CheckItem::from_violation(
                    "residual-le-bound",
                    worst.max(0.0),
                    1e-12,
                ));
                if let Some(dir) = out_dir {
                    write_trajectory_csv(&dir.join(format!("traj_{idx}.csv")), &mut traj, *n_max)?;
                }
                rep
            }
            CheckConfig::InfeasibleScale {
                gamma,
                omega_b_value,
                b,
            } => {
                let rate = parse_divergence_rate(gamma)?;
                let value = uq::km_cauchy_rate(&rate, *b as f64, omega_b_value.0)?;
                let mut rep = VerificationReport::new(
                    "infeasible-scale",
                    format!("gamma={gamma} omega_b={} b={b}", omega_b_value.0),
                );
                let status = if value > budget.max_index {
                    CheckStatus::Inconclusive
                } else {
                    CheckStatus::Pass
                };
                rep.status = status;
                rep.items.push(CheckItem {
                    label: "km-cauchy-rate-scale".into(),
                    status,
                    measured: value as f64,
                    tolerance: budget.max_index as f64,
                    detail: if status == CheckStatus::Inconclusive {
                        format!("index {value} is untestable at scale; computed exactly, not asserted")
                    } else {
                        format!("index {value} within simulation reach")
                    },
                });
                rep
            }
        };
        report.runtime = Some(started.elapsed());
        runtimes.push(started.elapsed().as_millis());
        checks.push(report);
    }

    let overall = overall_of(&checks);
    let outcome = RunOutcome {
        report: RunReport {
            config_name: name.into(),
            seed: cfg.seed,
            overall,
            checks,
        },
        bounds,
        runtimes_ms: runtimes,
    };

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| ConfigError::Bad {
            what: "output directory",
            detail: e.to_string(),
        })?;
        let report_json = serde_json::to_string_pretty(&outcome.report)
            .map_err(|e| ConfigError::Bad {
                what: "report serialization",
                detail: e.to_string(),
            })?;
        fs::write(dir.join("report.json"), report_json).map_err(|e| ConfigError::Bad {
            what: "report file",
            detail: e.to_string(),
        })?;

        let mut summary = String::from("check_index,check_id,status,runtime_ms\n");
        for (i, rep) in outcome.report.checks.iter().enumerate() {
            summary.push_str(&format!(
                "{i},{},{},{}\n",
                rep.check_id,
                serde_json::to_value(rep.status).unwrap().as_str().unwrap(),
                outcome.runtimes_ms[i]
            ));
        }
        fs::write(dir.join("summary.csv"), summary).map_err(|e| ConfigError::Bad {
            what: "summary file",
            detail: e.to_string(),
        })?;

        // Bound traces per check.
        let mut by_check: std::collections::BTreeMap<usize, Vec<serde_json::Value>> =
            Default::default();
        for (idx, label, br) in &outcome.bounds {
            by_check.entry(*idx).or_default().push(serde_json::json!({
                "case": label,
                "value": br.value,
                "trace": serde_json::to_value(&br.trace).unwrap(),
            }));
        }
        for (idx, entries) in by_check {
            fs::write(
                dir.join(format!("bounds_{idx}.json")),
                serde_json::to_string_pretty(&entries).unwrap(),
            )
            .map_err(|e| ConfigError::Bad {
                what: "bounds file",
                detail: e.to_string(),
            })?;
        }
    }
    Ok(outcome)
}

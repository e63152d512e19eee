use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use feg_core::adversary::{
    best_response_costs, net_utilities, saddle_solve, worst_case_dual_objective, RegularizerSpec,
};
use feg_core::expected_utility::{
    argmax_index, conditional_expected_utilities, maxmax_rule, minmax_rule,
};
use feg_core::free_energy::{beta_sweep, equilibrium, solve as solve_problem};
use feg_core::oracle::{self, CheckStatus, VerifyOptions};
use feg_core::sampler::{sample_equilibrium, SamplerConfig};
use feg_core::tree_eval::{evaluate, DecisionTree};
use feg_core::{DecisionProblem, Policy};
use serde_json::json;

use crate::problem::Problem;
use crate::render::{csv_cell, grouped_bars, line_plot, sci, BarPanel, Series};
use crate::CliError;

fn print_json(value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))?;
    writeln!(io::stdout().lock(), "{text}")?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn solve(path: &Path, beta: Option<f64>, echo_canonical: bool) -> Result<(), CliError> {
    let problem = Problem::load(path)?;
    if echo_canonical {
        let value = serde_json::to_value(problem.canonical())
            .map_err(|e| CliError::Input(e.to_string()))?;
        return print_json(&value);
    }
    let pb = problem.decision_problem(beta)?;
    let report = solve_problem(&pb);
    log::info!("solved {} actions at beta={}", pb.n_actions(), pb.beta());
    print_json(&json!({
        "actions": pb.actions(),
        "beta": pb.beta(),
        "policy": report.policy,
        "certainty_equivalent": report.certainty_equivalent,
        "expected_utility": report.expected_utility,
        "information_cost": report.information_cost,
        "free_energy": report.free_energy,
    }))
}

fn parse_policy(spec: &str, pb: &DecisionProblem) -> Result<Policy, CliError> {
    match spec {
        "equilibrium" => Ok(equilibrium(pb)),
        "prior" => Ok(pb.prior().as_policy().clone()),
        list => {
            let weights = list
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Input(format!("--policy {list:?}: {e}")))?;
            if weights.len() != pb.n_actions() {
                return Err(CliError::Input(format!(
                    "--policy has {} weights, the problem has {} actions",
                    weights.len(),
                    pb.n_actions()
                )));
            }
            Ok(Policy::new(weights).map_err(|e| CliError::Input(format!("--policy: {e}")))?)
        }
    }
}

fn attack_panel(title: &str, pb: &DecisionProblem, p: &Policy) -> Result<BarPanel, CliError> {
    let costs = best_response_costs(pb, p)?;
    let net = net_utilities(pb, &costs)?;
    Ok(BarPanel {
        title: title.to_string(),
        categories: pb.actions().to_vec(),
        series: vec![
            Series {
                name: "policy p".into(),
                values: p.weights().to_vec(),
            },
            Series {
                name: "cost C*".into(),
                values: costs.costs().to_vec(),
            },
            Series {
                name: "net U - C*".into(),
                values: net,
            },
        ],
    })
}

pub fn attack(
    path: &Path,
    beta: Option<f64>,
    policy: &str,
    svg: Option<&Path>,
) -> Result<(), CliError> {
    let pb = Problem::load(path)?.decision_problem(beta)?;
    let p = parse_policy(policy, &pb)?;
    let costs = best_response_costs(&pb, &p)?;
    let net = net_utilities(&pb, &costs)?;
    log::info!(
        "worst-case dual objective {}",
        worst_case_dual_objective(&pb, &p)?
    );

    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "action,p,cost,net_utility,unplayed")?;
    for (i, label) in pb.actions().iter().enumerate() {
        let w = p.weights()[i];
        writeln!(
            out,
            "{},{},{},{},{}",
            csv_cell(label),
            sci(w),
            sci(costs.costs()[i]),
            sci(net[i]),
            w == 0.0
        )?;
    }
    out.flush()?;

    if let Some(svg) = svg {
        let panels = [
            attack_panel(&format!("policy: {policy}"), &pb, &p)?,
            attack_panel("equilibrium", &pb, &equilibrium(&pb))?,
        ];
        write_file(svg, &grouped_bars(&panels))?;
    }
    Ok(())
}

fn parse_log_range(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Input(format!("--log-range {spec:?}: {why}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, steps] = parts[..] else {
        return Err(bad("expected lo:hi:steps"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad("lo is not a number"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad("hi is not a number"))?;
    let steps: usize = steps
        .trim()
        .parse()
        .map_err(|_| bad("steps is not a positive integer"))?;
    if !(lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(bad("lo and hi must be positive and finite"));
    }
    if steps == 0 {
        return Err(bad("steps must be at least 1"));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    let last = steps - 1;
    Ok((0..steps)
        .map(|i| {
            if i == last {
                hi
            } else {
                (a + (b - a) * i as f64 / last as f64).exp()
            }
        })
        .collect())
}

pub fn sweep(
    path: &Path,
    betas: Option<Vec<f64>>,
    log_range: Option<&str>,
    svg: Option<&Path>,
) -> Result<(), CliError> {
    let problem = Problem::load(path)?;
    let betas = match (betas, log_range) {
        (Some(b), _) => b,
        (None, Some(spec)) => parse_log_range(spec)?,
        (None, None) => return Err(CliError::Input("give --betas or --log-range".into())),
    };
    if betas.is_empty() {
        return Err(CliError::Input("no beta values given".into()));
    }
    let pb = DecisionProblem::new(
        problem.actions().to_vec(),
        problem.utilities()?,
        problem.prior().clone(),
        0.0,
    )?;
    let rows = beta_sweep(&pb, &betas)?;

    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    let mut header = vec!["beta".to_string(), "certainty_equivalent".to_string()];
    header.extend(pb.actions().iter().map(|a| csv_cell(&format!("p_{a}"))));
    header.extend(["entropy".to_string(), "kl_to_prior".to_string()]);
    writeln!(out, "{}", header.join(","))?;
    for row in &rows {
        let mut cells = vec![sci(row.beta), sci(row.certainty_equivalent)];
        cells.extend(row.policy.weights().iter().map(|&w| sci(w)));
        cells.extend([sci(row.entropy), sci(row.kl_to_prior)]);
        writeln!(out, "{}", cells.join(","))?;
    }
    out.flush()?;

    if let Some(svg) = svg {
        let log_axis = betas.iter().all(|&b| b > 0.0);
        let xs: Vec<f64> = betas
            .iter()
            .map(|&b| if log_axis { b.log10() } else { b })
            .collect();
        let mut series = vec![Series {
            name: "certainty equivalent".into(),
            values: rows.iter().map(|r| r.certainty_equivalent).collect(),
        }];
        for (i, a) in pb.actions().iter().enumerate() {
            series.push(Series {
                name: format!("p({a})"),
                values: rows.iter().map(|r| r.policy.weights()[i]).collect(),
            });
        }
        let x_label = if log_axis { "log10 beta" } else { "beta" };
        write_file(svg, &line_plot("beta sweep", x_label, &xs, &series))?;
    }
    Ok(())
}

pub struct SampleOptions {
    pub count: usize,
    pub seed: u64,
    pub bound: Option<f64>,
    pub max_attempts: u64,
}

pub fn sample(path: &Path, beta: Option<f64>, opts: SampleOptions) -> Result<(), CliError> {
    let pb = Problem::load(path)?.decision_problem(beta)?;
    let max_u = pb
        .utilities()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let cfg = SamplerConfig {
        utility_bound: opts.bound.unwrap_or(max_u),
        seed: opts.seed,
        max_attempts_per_sample: opts.max_attempts,
    };
    let run = sample_equilibrium(&pb, &cfg, opts.count)?;
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    for &s in &run.samples {
        writeln!(out, "{}", pb.actions()[s])?;
    }
    writeln!(
        out,
        "# proposals={} acceptances={} rate={}",
        run.proposals,
        run.acceptances,
        run.acceptance_rate()
    )?;
    out.flush()?;
    Ok(())
}

pub fn tree(path: &Path) -> Result<(), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let tree: DecisionTree = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    print_json(&json!({ "value": evaluate(&tree), "depth": tree.depth() }))
}

pub fn game(path: &Path) -> Result<(), CliError> {
    let problem = Problem::load(path)?;
    let g = problem.game()?;
    let (p_min, v_min) = minmax_rule(g);
    let (p_max, v_max) = maxmax_rule(g);
    let mut report = json!({
        "actions": g.actions(),
        "minmax": { "policy": p_min, "value": v_min },
        "maxmax": { "policy": p_max, "value": v_max },
    });
    if g.channel().is_some() {
        let eu = conditional_expected_utilities(g)?;
        let best = argmax_index(&eu)?;
        report["expected_utility"] = json!({
            "conditional": eu,
            "best_action": g.actions()[best],
        });
    }
    print_json(&report)
}

fn parse_regularizer(
    spec: &str,
    problem: &Problem,
    beta: Option<f64>,
) -> Result<RegularizerSpec, CliError> {
    let bad = |why: &str| CliError::Input(format!("--reg {spec:?}: {why}"));
    let num = |s: &str, what: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| bad(&format!("{what} is not a number")))
    };
    let parts: Vec<&str> = spec.split(':').collect();
    let reg = match parts[..] {
        ["kl"] => RegularizerSpec::Kl {
            beta: problem.beta(beta)?,
        },
        ["null"] => RegularizerSpec::Null,
        ["power", a] => RegularizerSpec::Power {
            alpha: num(a, "alpha")?,
            scale: 1.0,
        },
        ["power", a, s] => RegularizerSpec::Power {
            alpha: num(a, "alpha")?,
            scale: num(s, "scale")?,
        },
        ["quadratic", l] => RegularizerSpec::Quadratic {
            lambda: num(l, "lambda")?,
            sigma: problem
                .sigma()
                .ok_or_else(|| bad("the problem file needs a `sigma` matrix"))?
                .to_vec(),
        },
        _ => {
            return Err(bad(
                "expected kl, null, power:ALPHA[:SCALE] or quadratic:LAMBDA",
            ))
        }
    };
    reg.validate()?;
    Ok(reg)
}

pub fn dual(
    path: &Path,
    beta: Option<f64>,
    reg: &str,
    tol: f64,
    max_iter: usize,
) -> Result<(), CliError> {
    let problem = Problem::load(path)?;
    let reg = parse_regularizer(reg, &problem, beta)?;
    // Only the KL regularizer reads β; the others run at the file's value or 0.
    let beta = match &reg {
        RegularizerSpec::Kl { beta } => *beta,
        _ => beta.or(problem.beta(None).ok()).unwrap_or(0.0),
    };
    let pb = problem.decision_problem(Some(beta))?;
    let sol = saddle_solve(&pb, &reg, tol, max_iter)?;
    print_json(&json!({
        "actions": pb.actions(),
        "regularizer": reg,
        "policy": sol.policy,
        "costs": sol.costs,
        "objective": sol.objective,
        "indifference_residual": sol.indifference_residual,
        "iterations": sol.iterations,
        "converged": sol.converged,
    }))?;
    if sol.converged {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "saddle solver did not reach tol {tol} in {max_iter} iterations (gap {})",
            sol.indifference_residual
        )))
    }
}

pub fn verify(
    path: &Path,
    beta: Option<f64>,
    resolution: f64,
    as_json: bool,
    tamper: f64,
) -> Result<(), CliError> {
    let pb = Problem::load(path)?.decision_problem(beta)?;
    let opts = VerifyOptions {
        closed_form_offset: tamper,
        ..VerifyOptions::for_problem(&pb, resolution)
    };
    let report = oracle::verify(&pb, &opts).map_err(|e| match e {
        feg_core::Error::BudgetExceeded(msg) => CliError::Input(format!(
            "oracle budget exceeded: {msg}; verify supports at most {} actions, try a coarser --resolution",
            oracle::MAX_MINIMAX_ACTIONS
        )),
        other => other.into(),
    })?;
    if as_json {
        let value = serde_json::to_value(&report).map_err(|e| CliError::Input(e.to_string()))?;
        print_json(&value)?;
    } else {
        for c in &report.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skip => "SKIP",
            };
            if c.status == CheckStatus::Skip {
                writeln!(io::stdout(), "{tag} {} ({})", c.name, c.detail)?;
            } else {
                writeln!(
                    io::stdout(),
                    "{tag} {} value={:e} bound={:e} ({})",
                    c.name,
                    c.value,
                    c.bound,
                    c.detail
                )?;
            }
        }
    }
    let failed = report
        .checks
        .iter()
        .filter(|c| c.status == CheckStatus::Fail)
        .count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "{failed} verification check(s) failed"
        )))
    }
}

//! The per-run lemma checks used by the `verify` subcommand and the
//! acceptance tests.

use adalvr::optimizer::Reference;
use adalvr::verify::{self, LemmaReport};
use adalvr::{run, Domain, FiniteSumProblem, OptimizerConfig, RunTrace};

use crate::algorithms::Algorithm;
use crate::error::Result;

/// Regret, both trace bounds, weighted distance and the stored average of
/// one recorded projected run.
pub fn check_run(trace: &RunTrace, domain: &Domain, x_ref: &[f64]) -> Result<Vec<LemmaReport>> {
    let regret = verify::check_regret_bound(trace, domain, trace.eta, x_ref)?;
    let (sum, norm) = verify::check_trace_bounds(trace)?;
    let dist = verify::check_weighted_distance(trace, domain, x_ref)?;
    let avg = verify::check_average(trace)?;
    Ok(vec![regret, sum, norm, dist, avg])
}

#[derive(Debug, Clone)]
pub struct SuiteSpec {
    pub algorithms: Vec<Algorithm>,
    pub eta: f64,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub p: Option<f64>,
}

/// Runs every (algorithm, seed) pair with projection and history, checks the
/// run, then checks the suboptimality bounds at each output average.
pub fn run_suite(
    spec: &SuiteSpec,
    problem: &FiniteSumProblem,
    domain: &Domain,
    reference: &Reference,
) -> Result<Vec<LemmaReport>> {
    let x1 = vec![0.0; problem.dim()];
    let mut reports = Vec::new();
    for alg in &spec.algorithms {
        for &seed in &spec.seeds {
            let mut cfg = OptimizerConfig::new(alg.estimator, alg.scaling, spec.eta, spec.iterations)
                .projected(domain.clone())
                .with_seed(seed)
                .with_history()
                .with_stride(spec.iterations);
            cfg.p = spec.p;
            let trace = run(&cfg, problem, &x1)?;
            let tag = format!(" {alg} seed={seed}");
            for mut r in check_run(&trace, domain, &reference.x)? {
                r.context.push_str(&tag);
                reports.push(r);
            }
            for mut r in [
                verify::check_grad_subopt(problem, &trace.average, reference.value)?,
                verify::check_component_grad_subopt(problem, &trace.average, &reference.x, reference.value)?,
            ] {
                r.context.push_str(&tag);
                reports.push(r);
            }
        }
    }
    Ok(reports)
}

pub fn write_reports<W: std::io::Write>(reports: &[LemmaReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lemma", "lhs", "rhs", "slack", "pass", "context"])?;
    for r in reports {
        w.write_record([
            r.lemma.to_string(),
            crate::output::format_float(r.lhs),
            crate::output::format_float(r.rhs),
            crate::output::format_float(r.slack),
            r.pass.to_string(),
            r.context.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

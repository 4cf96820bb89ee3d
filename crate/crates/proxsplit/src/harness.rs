//! Experiment runner: resolves a config into a problem instance and a run,
//! executes it, checks the requested certificates, and writes the trace CSV
//! plus a flat-text report. Identical (config, seed) inputs produce
//! byte-identical outputs.

use std::path::{Path, PathBuf};

use crate::certificates::{
    check_best_value_bound, check_constant_rate, check_ergodic_bound,
    check_exogenous_best_bound, check_exogenous_quasifejer, check_inconsistent_target,
    check_key_inequality, check_polyak_complexity, check_polyak_fejer, check_summary_corollary,
    corrupt_alphas, sample_probes, CertificateReport, GroundTruth,
};
use crate::config::{ExperimentConfig, RuleSpec};
use crate::error::{Error, Result};
use crate::gallery::ProblemInstance;
use crate::solver::{constant_two_pass, run, RunConfig, RunTrace, StepsizeRule};
use crate::trace_io;

/// Environment variable naming the directory all artifacts go under.
pub const OUTPUT_ROOT_ENV: &str = "PROXSPLIT_OUT";

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub problem_name: String,
    pub reports: Vec<CertificateReport>,
    pub trace_path: PathBuf,
    pub report_path: PathBuf,
    pub final_value: f64,
    pub best_value: f64,
    /// Best-value gap to the known optimum, when truth exists.
    pub final_gap: Option<f64>,
}

impl ExperimentOutcome {
    /// True when no applicable certificate failed.
    pub fn all_passed(&self) -> bool {
        self.reports.iter().all(|r| !r.applicable || r.holds)
    }

    /// One line per certificate for the console.
    pub fn summary_lines(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            let status = if !r.applicable {
                "n/a "
            } else if r.holds {
                "pass"
            } else {
                "FAIL"
            };
            out.push_str(&format!(
                "{status}  {:<24} worst_slack={:>13.6e}  witness_k={}\n",
                r.name, r.worst_slack, r.witness_k
            ));
        }
        out
    }
}

/// Everything resolved from a config, before running.
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub instance: ProblemInstance,
    pub x0: crate::point::Point,
    pub truth: Option<GroundTruth>,
}

pub fn resolve(config: ExperimentConfig) -> Result<ResolvedExperiment> {
    let instance = config.problem.build()?;
    let x0 = config
        .run
        .x0
        .resolve(instance.g.as_ref(), instance.dim, config.run.seed)?;
    let truth = match instance.truth.known() {
        Some(info) => Some(GroundTruth::from_witness(
            info.s_star,
            info.witness.clone(),
            &x0,
        )?),
        None => None,
    };
    Ok(ResolvedExperiment { config, instance, x0, truth })
}

fn execute(exp: &ResolvedExperiment) -> Result<(RunTrace, StepsizeRule)> {
    let cfg = &exp.config;
    let f = exp.instance.f.as_ref();
    let g = exp.instance.g.as_ref();
    match cfg.rule.resolve(exp.truth.as_ref())? {
        Some(rule) => {
            let trace = run(
                f,
                g,
                &RunConfig {
                    x0: exp.x0.clone(),
                    rule: rule.clone(),
                    max_iters: cfg.run.max_iters,
                    stop_tol: cfg.run.stop_tol,
                    record_every: cfg.run.record_every,
                },
            )?;
            Ok((trace, rule))
        }
        None => {
            let RuleSpec::ConstantOptimal { horizon, max_passes } = &cfg.rule else {
                unreachable!("resolve returns None only for constant_optimal");
            };
            let truth = exp.truth.as_ref().ok_or_else(|| {
                Error::config("rule kind \"constant_optimal\" needs known ground truth")
            })?;
            let (alpha, trace) =
                constant_two_pass(f, g, &exp.x0, truth.dist0, *horizon, *max_passes)?;
            Ok((trace, StepsizeRule::Constant { alpha }))
        }
    }
}

/// Runs every requested certificate against the trace.
pub fn check_certificates(
    exp: &ResolvedExperiment,
    trace: &RunTrace,
) -> Result<Vec<CertificateReport>> {
    let spec = &exp.config.certificates;
    let f = exp.instance.f.as_ref();
    let g = exp.instance.g.as_ref();
    let truth = exp.truth.as_ref();
    let mut reports = Vec::new();

    let needs_truth = |name: &str| CertificateReport::not_applicable(name, "no ground truth");

    if spec.wants("key_inequality") {
        let probes = sample_probes(g, exp.instance.dim, spec.probes, exp.config.run.seed)?;
        reports.push(check_key_inequality(f, g, trace, &probes)?);
    }
    if spec.wants("best_value_bound") {
        reports.push(match truth {
            Some(t) => check_best_value_bound(trace, t),
            None => needs_truth("best_value_bound"),
        });
    }
    if spec.wants("ergodic_bound") {
        reports.push(match truth {
            Some(t) => check_ergodic_bound(trace, t),
            None => needs_truth("ergodic_bound"),
        });
    }
    if spec.wants("constant_rate") {
        reports.push(match truth {
            Some(t) => check_constant_rate(trace, t),
            None => needs_truth("constant_rate"),
        });
    }
    if spec.wants("exogenous_quasifejer") {
        reports.push(match truth {
            Some(t) => check_exogenous_quasifejer(trace, t, exp.instance.constants.rho),
            None => needs_truth("exogenous_quasifejer"),
        });
    }
    if spec.wants("exogenous_best_bound") {
        reports.push(match truth {
            Some(t) => check_exogenous_best_bound(
                trace,
                t,
                exp.instance.constants.zeta,
                exp.instance.constants.rho,
            ),
            None => needs_truth("exogenous_best_bound"),
        });
    }
    if spec.wants("polyak_fejer") {
        reports.push(match truth {
            Some(t) => check_polyak_fejer(trace, t),
            None => needs_truth("polyak_fejer"),
        });
    }
    if spec.wants("polyak_complexity") {
        reports.push(match (truth, &trace.rule) {
            (Some(t), StepsizeRule::Polyak { target, .. }) if target.limit() >= t.s_star => {
                check_polyak_complexity(trace, target.limit(), t.dist0)
            }
            (Some(_), StepsizeRule::Polyak { .. }) => CertificateReport::not_applicable(
                "polyak_complexity",
                "target limit below the optimal value",
            ),
            (None, _) => needs_truth("polyak_complexity"),
            _ => CertificateReport::not_applicable(
                "polyak_complexity",
                "trace did not use the Polyak rule",
            ),
        });
    }
    if spec.wants("inconsistent_target") {
        reports.push(match (truth, &trace.rule) {
            (Some(t), StepsizeRule::Polyak { target, .. }) => check_inconsistent_target(
                trace,
                t,
                target.limit(),
                spec.inconsistent_horizon_tol,
            ),
            (None, _) => needs_truth("inconsistent_target"),
            _ => CertificateReport::not_applicable(
                "inconsistent_target",
                "trace did not use the Polyak rule",
            ),
        });
    }
    if spec.wants("summary_corollary") {
        reports.push(match truth {
            Some(t) => check_summary_corollary(trace, t, t.dist0, spec.inconsistent_horizon_tol),
            None => needs_truth("summary_corollary"),
        });
    }
    Ok(reports)
}

fn artifact_paths(config: &ExperimentConfig, stem: &str, out_root: &Path) -> (PathBuf, PathBuf) {
    let trace = config
        .output
        .trace
        .clone()
        .unwrap_or_else(|| format!("{stem}_trace.csv"));
    let report = config
        .output
        .report
        .clone()
        .unwrap_or_else(|| format!("{stem}_report.txt"));
    (out_root.join(trace), out_root.join(report))
}

/// Runs one experiment end to end and writes its artifacts.
pub fn run_experiment_config(
    config: ExperimentConfig,
    stem: &str,
    out_root: &Path,
) -> Result<ExperimentOutcome> {
    let exp = resolve(config)?;
    let (mut trace, _rule) = execute(&exp)?;
    if let Some(factor) = exp.config.certificates.corrupt_alpha {
        trace = corrupt_alphas(&trace, factor);
    }
    let reports = check_certificates(&exp, &trace)?;

    let (trace_path, report_path) = artifact_paths(&exp.config, stem, out_root);
    if let Some(dir) = trace_path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    if let Some(dir) = report_path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    trace_io::write_trace_to_path(&trace_path, &trace)?;

    let final_gap = exp.truth.as_ref().map(|t| trace.best_value - t.s_star);
    let mut report_text = String::new();
    report_text.push_str(&format!("problem={}\n", exp.instance.name));
    report_text.push_str(&format!("stop={}\n", trace.stop));
    report_text.push_str(&format!("stop_iter={}\n", trace.stop_iter));
    report_text.push_str(&format!("final_value={}\n", trace_io::fmt_f64(trace.final_value)));
    report_text.push_str(&format!("best_value={}\n", trace_io::fmt_f64(trace.best_value)));
    if let Some(gap) = final_gap {
        report_text.push_str(&format!("best_gap={}\n", trace_io::fmt_f64(gap)));
    }
    for r in &reports {
        report_text.push('\n');
        report_text.push_str(&r.to_flat_text());
    }
    std::fs::write(&report_path, &report_text)?;

    Ok(ExperimentOutcome {
        problem_name: exp.instance.name.clone(),
        reports,
        trace_path,
        report_path,
        final_value: trace.final_value,
        best_value: trace.best_value,
        final_gap,
    })
}

fn config_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".to_string())
}

pub fn run_experiment(config_path: &Path, out_root: &Path) -> Result<ExperimentOutcome> {
    let config = ExperimentConfig::from_path(config_path)?;
    run_experiment_config(config, &config_stem(config_path), out_root)
}

/// Sets a dotted scalar path (e.g. "rule.scale") in a parsed TOML document.
fn set_scalar(doc: &mut toml::Value, path: &str, value: f64) -> Result<()> {
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = cursor.as_table_mut().ok_or_else(|| {
            Error::config(format!("sweep param {path:?}: {part:?} is not inside a table"))
        })?;
        let entry = table.get_mut(*part).ok_or_else(|| {
            Error::config(format!("sweep param {path:?}: key {part:?} not found"))
        })?;
        if i + 1 == parts.len() {
            match entry {
                toml::Value::Float(_) => *entry = toml::Value::Float(value),
                toml::Value::Integer(_) if value.fract() == 0.0 => {
                    *entry = toml::Value::Integer(value as i64)
                }
                _ => {
                    return Err(Error::config(format!(
                        "sweep param {path:?} does not address a scalar number"
                    )))
                }
            }
            return Ok(());
        }
        cursor = entry;
    }
    Err(Error::config("empty sweep param path"))
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub runs: Vec<(f64, ExperimentOutcome)>,
    pub combined_csv_path: PathBuf,
    pub summary_path: PathBuf,
}

impl SweepOutcome {
    pub fn all_passed(&self) -> bool {
        self.runs.iter().all(|(_, o)| o.all_passed())
    }
}

/// Runs one sub-experiment per sweep value, writes a combined CSV with a
/// leading sweep_value column, and a summary ranking the final best-value
/// gaps. Sub-runs execute in parallel when the `parallel` feature is on;
/// outputs are assembled in input order either way.
pub fn sweep(
    config_path: &Path,
    param: &str,
    values: &[f64],
    out_root: &Path,
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let text = std::fs::read_to_string(config_path)?;
    let base: toml::Value = toml::from_str(&text)
        .map_err(|e| Error::config(format!("config parse error: {e}")))?;
    let stem = config_stem(config_path);

    // validate every sub-config up front so a bad value fails before any run
    let mut configs = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let mut doc = base.clone();
        set_scalar(&mut doc, param, v)?;
        let cfg: ExperimentConfig = doc
            .try_into()
            .map_err(|e| Error::config(format!("sweep value {v} yields invalid config: {e}")))?;
        cfg.validate()?;
        configs.push((i, v, cfg));
    }

    let run_one = |(i, v, cfg): (usize, f64, ExperimentConfig)| -> Result<(f64, ExperimentOutcome)> {
        let sub_stem = format!("{stem}_{param}_{i}", param = param.replace('.', "_"));
        Ok((v, run_experiment_config(cfg, &sub_stem, out_root)?))
    };

    #[cfg(feature = "parallel")]
    let runs: Vec<(f64, ExperimentOutcome)> = {
        use rayon::prelude::*;
        configs.into_par_iter().map(run_one).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let runs: Vec<(f64, ExperimentOutcome)> = configs
        .into_iter()
        .map(run_one)
        .collect::<Result<_>>()?;

    // combined CSV: sweep_value column + the per-run trace rows
    let combined_csv_path = out_root.join(format!("{stem}_sweep.csv"));
    let mut combined = String::new();
    for (i, (v, outcome)) in runs.iter().enumerate() {
        let text = std::fs::read_to_string(&outcome.trace_path)?;
        for line in text.lines() {
            if line.starts_with('#') {
                continue;
            }
            if line.starts_with("k,") {
                if i == 0 {
                    combined.push_str("sweep_value,");
                    combined.push_str(line);
                    combined.push('\n');
                }
                continue;
            }
            combined.push_str(&trace_io::fmt_f64(*v));
            combined.push(',');
            combined.push_str(line);
            combined.push('\n');
        }
    }
    std::fs::write(&combined_csv_path, combined)?;

    // summary: runs ranked by final best-value gap (best value when no truth)
    let summary_path = out_root.join(format!("{stem}_sweep_summary.txt"));
    let mut ranked: Vec<&(f64, ExperimentOutcome)> = runs.iter().collect();
    ranked.sort_by(|a, b| {
        let ka = a.1.final_gap.unwrap_or(a.1.best_value);
        let kb = b.1.final_gap.unwrap_or(b.1.best_value);
        ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut summary = format!("param={param}\n");
    summary.push_str("rank,sweep_value,best_value,best_gap,certificates\n");
    for (rank, (v, o)) in ranked.iter().enumerate() {
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            rank + 1,
            trace_io::fmt_f64(*v),
            trace_io::fmt_f64(o.best_value),
            o.final_gap.map(trace_io::fmt_f64).unwrap_or_default(),
            if o.all_passed() { "pass" } else { "FAIL" },
        ));
    }
    std::fs::write(&summary_path, summary)?;

    Ok(SweepOutcome { runs, combined_csv_path, summary_path })
}

/// Re-checks certificates on a previously written trace, using the config
/// that produced it for the problem definition and rule parameters.
pub fn check(trace_path: &Path, config_path: &Path) -> Result<(ExperimentOutcome, Vec<String>)> {
    let config = ExperimentConfig::from_path(config_path)?;
    let exp = resolve(config)?;
    let rule = match exp.config.rule.resolve(exp.truth.as_ref())? {
        Some(rule) => rule,
        None => {
            // the optimal constant is not in the config; recover it from the
            // trace itself (the name check still guards against mixups)
            let peek = trace_io::read_trace_from_path(
                trace_path,
                StepsizeRule::Constant { alpha: 1.0 },
            )?;
            let alpha = peek
                .records
                .first()
                .map(|r| r.alpha)
                .ok_or_else(|| Error::config("trace has no records"))?;
            StepsizeRule::Constant { alpha }
        }
    };
    let trace = trace_io::read_trace_from_path(trace_path, rule)?;
    if trace.dim != exp.instance.dim {
        return Err(Error::config(format!(
            "trace dimension {} does not match the configured problem ({})",
            trace.dim, exp.instance.dim
        )));
    }
    let reports = check_certificates(&exp, &trace)?;
    let outcome = ExperimentOutcome {
        problem_name: exp.instance.name.clone(),
        reports,
        trace_path: trace_path.to_path_buf(),
        report_path: PathBuf::new(),
        final_value: trace.final_value,
        best_value: trace.best_value,
        final_gap: exp.truth.as_ref().map(|t| trace.best_value - t.s_star),
    };
    Ok((outcome, Vec::new()))
}

/// Gallery families available to configs, with a one-line description.
pub fn list_problems() -> Vec<(&'static str, &'static str)> {
    vec![
        ("lad_l1", "least absolute deviations with l1 penalty: |Ax-b|_1 + lambda |x|_1"),
        ("lad_l1_desk", "deterministic pseudo-random lad_l1 instance (m, n, lambda, seed)"),
        ("constrained_max_affine", "max of affine pieces over a convex set"),
        ("sum_of_distances", "sum of set-distance functions, optionally constrained"),
        ("dual_finite", "dual of a finitely supported constrained problem over the orthant"),
        ("unattained_inf", "1-D instance whose infimum 0 is never attained (empty solution set)"),
    ]
}

use std::fs;
use std::path::{Path, PathBuf};

use osr_core::datagen::{load_dataset, save_dataset, Dataset};
use osr_core::experiment::{evaluate, generate, train_on, EvalReport, ExperimentConfig};
use osr_core::model::{load_checkpoint, save_checkpoint, write_train_trace_csv, Checkpoint};
use osr_core::optimizer::{
    check_prop1, check_prop2_bounds, convex_suite, run_constrained, write_trace_csv, Prop1Report,
    Prop2Bounds, Prop2Report, Prop2Violation, RunConfig, TraceReport,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::echo;
use crate::error::{CliError, CliResult};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FORMAT: &str = "osr-metrics";

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| osr_core::Error::Io {
            path: parent.into(),
            source: e,
        })?;
    }
    let text = serde_json::to_string_pretty(value).expect("report serialises");
    fs::write(path, text + "\n").map_err(|e| {
        osr_core::Error::Io {
            path: path.into(),
            source: e,
        }
        .into()
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| {
        osr_core::Error::Io {
            path: dir.into(),
            source: e,
        }
        .into()
    })
}

fn comments(config: &ExperimentConfig) -> Vec<String> {
    vec![
        format!("seed={}", config.seed),
        format!("config={}", echo(config)),
    ]
}

/// Reads a dataset directory, or generates the data in memory when no
/// directory is given. A stored dataset must come from the same data
/// settings as `config`.
fn dataset_for(config: &ExperimentConfig, dir: Option<&Path>) -> CliResult<Dataset> {
    let Some(dir) = dir else {
        return Ok(generate(config)?);
    };
    let (dataset, meta) = load_dataset(dir)?;
    let expected = echo(config)["data"].clone();
    if meta.config.get("data") != Some(&expected) {
        return Err(CliError::Config(format!(
            "{} was generated with different data settings than the current configuration",
            dir.display()
        )));
    }
    Ok(dataset)
}

pub fn generate_cmd(config: &ExperimentConfig, out: &Path) -> CliResult<Value> {
    let dataset = generate(config)?;
    save_dataset(out, &dataset, echo(config))?;
    Ok(serde_json::json!({
        "train": dataset.train.len(),
        "test": dataset.test.len(),
        "classes": dataset.metadata.num_classes(),
        "out": out,
    }))
}

pub fn train_cmd(config: &ExperimentConfig, data: Option<&Path>, out: &Path) -> CliResult<Value> {
    let dataset = dataset_for(config, data)?;
    let result = train_on(config, &dataset)?;
    create_dir(out)?;
    let checkpoint = Checkpoint::new(&result.params, &dataset.metadata.pooling(), echo(config));
    save_checkpoint(&out.join(CHECKPOINT_FILE), &checkpoint)?;
    write_train_trace_csv(&out.join(TRACE_FILE), &result.steps, &comments(config))?;
    let last = result.steps.last();
    Ok(serde_json::json!({
        "steps": result.steps.len(),
        "initial_loss": result.initial_loss,
        "final_loss": result.final_loss,
        "final_lambda": last.map(|s| s.lambda),
        "final_batch_hsic": last.map(|s| s.hsic),
        "out": out,
    }))
}

/// Contents of the metrics JSON written by `eval`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub format: String,
    pub seed: u64,
    pub config: Value,
    /// Configuration echo stored in the evaluated checkpoint.
    pub checkpoint_config: Value,
    #[serde(flatten)]
    pub report: EvalReport,
}

pub fn eval_cmd(
    config: &ExperimentConfig,
    data: Option<&Path>,
    checkpoint: &Path,
    out: &Path,
) -> CliResult<Value> {
    let dataset = dataset_for(config, data)?;
    let ck = load_checkpoint(checkpoint)?;
    let report = evaluate(&ck.params()?, &ck.pooling, &dataset, &config.eval)?;
    let file = MetricsFile {
        format: METRICS_FORMAT.into(),
        seed: config.seed,
        config: echo(config),
        checkpoint_config: ck.config,
        report,
    };
    write_json(out, &file)?;
    Ok(serde_json::to_value(&file.report).expect("report serialises"))
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateRow {
    pub problem: String,
    pub certificate: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemReport {
    pub problem: String,
    pub run: RunConfig,
    pub prop1: Prop1Report,
    pub prop2_first_violation: Option<Prop2Violation>,
    pub bounds: Prop2Bounds,
    pub final_lambda_rate: f64,
    pub final_constraint: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub steps: usize,
    pub cold_start: bool,
    pub rows: Vec<CertificateRow>,
    pub problems: Vec<ProblemReport>,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

const CONVERGENCE_TOLERANCE: f64 = 1e-3;

fn prop2_row(problem: &str, name: &'static str, report: &Prop2Report, bound: u8) -> CertificateRow {
    let failing = report.rows.iter().find(|r| match bound {
        1 => !r.bound1_holds(),
        2 => !r.bound2_holds(),
        _ => !r.bound3_holds(),
    });
    CertificateRow {
        problem: problem.into(),
        certificate: name,
        pass: failing.is_none(),
        detail: match failing {
            None => format!("holds at all {} steps", report.rows.len()),
            Some(r) => format!("fails first at step {}", r.step),
        },
    }
}

/// Full trace of one suite problem with its certificate rows.
pub struct ProblemTrace {
    pub name: String,
    pub trace: TraceReport,
    pub prop2: Prop2Report,
}

/// With `cold_start` every problem starts from `λ = 0` at the
/// unconstrained minimiser instead of the suite's warm start.
pub fn verify_bounds(
    steps: usize,
    cold_start: bool,
) -> CliResult<(BoundsReport, Vec<ProblemTrace>)> {
    if steps == 0 {
        return Err(CliError::Usage("--steps must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut problems = Vec::new();
    let mut traces = Vec::new();
    for mut case in convex_suite(steps) {
        let p = &case.problem;
        if cold_start {
            case.config.lambda0 = 0.0;
            if let Some(theta) = p.objective.exact_argmin(0.0) {
                case.config.theta0 = theta;
            }
        }
        let trace = run_constrained(p.objective.as_ref(), &case.config)?;
        let prop1 = check_prop1(&trace, p.norm_bound);
        let bounds = Prop2Bounds {
            f_star: p.f_star,
            lambda_star: p.lambda_star,
            constraint_bound: p.constraint_bound,
        };
        let prop2 = check_prop2_bounds(&trace, bounds);
        let last = trace.last().expect("trace has the initial row");
        let rate = last.lambda / (last.step as f64 * trace.eta2);

        rows.push(CertificateRow {
            problem: p.name.clone(),
            certificate: "averaging",
            pass: prop1.holds(),
            detail: format!(
                "recurrence error {:.2e}, min slack to 2G/(m+1) {:.2e}",
                prop1.max_recurrence_error, prop1.min_global_slack
            ),
        });
        let in_range = prop2.first_violation.is_none_or(|v| v.bound != 0);
        rows.push(CertificateRow {
            problem: p.name.clone(),
            certificate: "constraint_range",
            pass: in_range,
            detail: format!("|g| < {}", p.constraint_bound),
        });
        rows.push(prop2_row(&p.name, "violation", &prop2, 1));
        rows.push(prop2_row(&p.name, "loss_upper", &prop2, 2));
        rows.push(prop2_row(&p.name, "loss_lower", &prop2, 3));
        rows.push(CertificateRow {
            problem: p.name.clone(),
            certificate: "convergence",
            pass: rate < CONVERGENCE_TOLERANCE && last.constraint_avg.abs() < CONVERGENCE_TOLERANCE,
            detail: format!(
                "lambda/(m eta2) = {rate:.2e}, g = {:.2e} at m = {}",
                last.constraint_avg, last.step
            ),
        });
        problems.push(ProblemReport {
            problem: p.name.clone(),
            run: case.config.clone(),
            prop1,
            prop2_first_violation: prop2.first_violation,
            bounds,
            final_lambda_rate: rate,
            final_constraint: last.constraint_avg,
        });
        traces.push(ProblemTrace {
            name: p.name.clone(),
            trace,
            prop2,
        });
    }
    Ok((
        BoundsReport {
            steps,
            cold_start,
            rows,
            problems,
        },
        traces,
    ))
}

pub fn verify_bounds_cmd(steps: usize, cold_start: bool, out: Option<&Path>) -> CliResult<Value> {
    let (report, traces) = verify_bounds(steps, cold_start)?;
    for r in &report.rows {
        println!(
            "{:<22} {:<17} {}  {}",
            r.problem,
            r.certificate,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&dir.join("bounds.json"), &report)?;
        for (t, problem) in traces.iter().zip(&report.problems) {
            let echo = vec![
                format!("problem={}", t.name),
                format!(
                    "run={}",
                    serde_json::to_string(&problem.run).expect("run config serialises")
                ),
            ];
            write_trace_csv(
                &dir.join(format!("{}.csv", t.name)),
                &t.trace,
                Some(&t.prop2),
                &echo,
            )?;
        }
    }
    if !report.passed() {
        let failed: Vec<String> = report
            .rows
            .iter()
            .filter(|r| !r.pass)
            .map(|r| format!("{}/{}", r.problem, r.certificate))
            .collect();
        return Err(CliError::Certificate(format!(
            "certificate violated: {}",
            failed.join(", ")
        )));
    }
    Ok(serde_json::json!({ "steps": steps, "certificates": report.rows.len(), "all_pass": true }))
}

#[derive(Debug, Serialize)]
struct ReportRow<'a> {
    run: &'a str,
    mechanism: String,
    #[serde(rename = "Error")]
    error: f64,
    #[serde(rename = "AUROC")]
    auroc: f64,
    #[serde(rename = "AUPR")]
    aupr: f64,
    #[serde(rename = "FPR@95TPR")]
    fpr: f64,
    #[serde(rename = "mAP")]
    map: Option<f64>,
    test_hsic: Option<f64>,
    final_lambda: Option<f64>,
    final_batch_loss: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct TraceLine {
    loss: f64,
    lambda: f64,
}

fn read_trace_tail(path: &Path) -> CliResult<TraceLine> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let mut last = None;
    for line in reader.deserialize() {
        last = Some(line.map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?);
    }
    last.ok_or_else(|| CliError::Runtime(format!("{}: trace has no rows", path.display())))
}

fn read_metrics(path: &Path) -> CliResult<MetricsFile> {
    let text = fs::read_to_string(path).map_err(|e| osr_core::Error::Io {
        path: path.into(),
        source: e,
    })?;
    let file: MetricsFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    if file.format != METRICS_FORMAT {
        return Err(CliError::Runtime(format!(
            "{}: not a metrics file",
            path.display()
        )));
    }
    Ok(file)
}

/// Merges metrics files (and optionally their training traces) into one
/// CSV table with a row per run and mechanism. With two or more runs every
/// later run also gets a difference row against the first.
pub fn report_cmd(
    metrics: &[PathBuf],
    traces: &[PathBuf],
    labels: &[String],
    out: &Path,
) -> CliResult<Value> {
    if metrics.is_empty() {
        return Err(CliError::Usage(
            "report needs at least one --metrics file".into(),
        ));
    }
    if !traces.is_empty() && traces.len() != metrics.len() {
        return Err(CliError::Usage(
            "give either no --trace or one per --metrics".into(),
        ));
    }
    if !labels.is_empty() && labels.len() != metrics.len() {
        return Err(CliError::Usage(
            "give either no --label or one per --metrics".into(),
        ));
    }
    let runs: Vec<(String, MetricsFile, Option<TraceLine>)> = metrics
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let label = labels.get(i).cloned().unwrap_or_else(|| {
                path.file_stem()
                    .map_or(format!("run{i}"), |s| s.to_string_lossy().into_owned())
            });
            let trace = traces.get(i).map(|t| read_trace_tail(t)).transpose()?;
            Ok((label, read_metrics(path)?, trace))
        })
        .collect::<CliResult<_>>()?;

    let mut comments = Vec::new();
    for (label, m, _) in &runs {
        comments.push(format!(
            "run={label} seed={} config={}",
            m.seed, m.checkpoint_config
        ));
    }
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut file = fs::File::create(out).map_err(|e| osr_core::Error::Io {
        path: out.into(),
        source: e,
    })?;
    {
        use std::io::Write;
        for c in &comments {
            writeln!(file, "# {c}").map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    let mut w = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| CliError::Runtime(format!("{}: {e}", out.display()));

    let mut written = 0;
    for (label, m, trace) in &runs {
        for row in &m.report.rows {
            w.serialize(ReportRow {
                run: label,
                mechanism: row.mechanism.to_string(),
                error: row.error,
                auroc: row.auroc,
                aupr: row.aupr,
                fpr: row.fpr_at_95tpr,
                map: Some(m.report.map),
                test_hsic: Some(m.report.test_hsic),
                final_lambda: trace.as_ref().map(|t| t.lambda),
                final_batch_loss: trace.as_ref().map(|t| t.loss),
            })
            .map_err(csv_err)?;
            written += 1;
        }
    }
    let (base_label, base, base_trace) = &runs[0];
    for (label, m, trace) in &runs[1..] {
        let name = format!("{label}-{base_label}");
        for row in &m.report.rows {
            let Some(b) = base.report.row(row.mechanism) else {
                continue;
            };
            w.serialize(ReportRow {
                run: &name,
                mechanism: row.mechanism.to_string(),
                error: row.error - b.error,
                auroc: row.auroc - b.auroc,
                aupr: row.aupr - b.aupr,
                fpr: row.fpr_at_95tpr - b.fpr_at_95tpr,
                map: Some(m.report.map - base.report.map),
                test_hsic: Some(m.report.test_hsic - base.report.test_hsic),
                final_lambda: trace
                    .as_ref()
                    .zip(base_trace.as_ref())
                    .map(|(t, b)| t.lambda - b.lambda),
                final_batch_loss: trace
                    .as_ref()
                    .zip(base_trace.as_ref())
                    .map(|(t, b)| t.loss - b.loss),
            })
            .map_err(csv_err)?;
            written += 1;
        }
    }
    w.flush()
        .map_err(|e| CliError::Runtime(format!("{}: {e}", out.display())))?;
    Ok(serde_json::json!({ "rows": written, "out": out }))
}

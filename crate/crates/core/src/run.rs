//! Executes scenarios: deterministic superoperator pipelines and Monte
//! Carlo campaigns, plus their CSV/JSON renderings.

use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::Error;
use crate::fock::{DensityMatrix, PhotonDistribution};
use crate::scenario::{Operation, OutputFormat, Scenario, ScenarioError};
use crate::statistics::{moments, predict_continuous_mean, predict_discrete_mean};
use crate::superops::{self, closed_form, CouplingParams, DIAGONAL_TOL};
use crate::trajectory::{run_trials, AtomStreamConfig, DetectionRecord, DetectorModel, TrialPlan};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    /// `None` for the initial state.
    pub step: Option<usize>,
    pub operation: String,
    pub distribution: Vec<f64>,
    pub trace: f64,
    pub mean: f64,
    pub variance: f64,
    pub vacuum_prob: f64,
    pub predicted_distribution: Vec<f64>,
    pub distribution_abs_diff: f64,
    /// Which closed form produced `predicted_mean`.
    pub mean_formula: String,
    pub predicted_mean: f64,
    pub mean_abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub model: DetectorModel,
    pub dim: usize,
    pub tail_mass: f64,
    pub steps: Vec<StepReport>,
}

impl PipelineReport {
    pub fn final_distribution(&self) -> &[f64] {
        &self.steps.last().expect("initial step is always present").distribution
    }
}

fn step_error(step: usize, op: &Operation) -> impl Fn(Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Step {
        step,
        operation: op.label(),
        source,
    }
}

fn coupling(scenario: &Scenario) -> Result<CouplingParams, ScenarioError> {
    scenario.coupling.ok_or_else(|| ScenarioError::Validation {
        path: "coupling".into(),
        message: "the continuous model needs a [coupling] table".into(),
    })
}

/// Applies `op` to `rho` in matrix form, and to `prior` in closed form.
fn apply(
    op: &Operation,
    rho: &DensityMatrix,
    prior: &PhotonDistribution,
    params: Option<CouplingParams>,
) -> Result<(DensityMatrix, PhotonDistribution, &'static str, Option<f64>), Error> {
    let summary = moments(prior);
    Ok(match op {
        Operation::Subtract { n: 1 } => (
            superops::subtract_one_b(rho)?,
            closed_form::subtract_one(prior)?,
            "discrete_mean",
            Some(predict_discrete_mean(&summary)?),
        ),
        Operation::Subtract { n } => (superops::subtract_n(rho, *n)?, closed_form::subtract_n(prior, *n)?, "closed_form", None),
        Operation::Add { n } => (superops::add_n(rho, *n)?, closed_form::add_n(prior, *n)?, "closed_form", None),
        Operation::OneCount => (
            superops::one_count_j(rho)?,
            closed_form::one_count(prior)?,
            "continuous_mean",
            Some(predict_continuous_mean(&summary)?),
        ),
        Operation::NoCount { tau } => {
            let params = params
                .ok_or_else(|| Error::InvalidParameter("no-count needs coupling parameters".into()))?
                .with_tau(*tau)?;
            (superops::no_count_s(rho, &params)?, closed_form::no_count(prior, &params)?, "closed_form", None)
        }
        Operation::Phase { phi } => (superops::phase_shift(rho, *phi)?, prior.clone(), "closed_form", None),
        Operation::Imperfect { .. } => {
            let eff = op.efficiency().expect("imperfect operation carries weights")?;
            (
                superops::imperfect_detection(rho, &eff)?,
                closed_form::imperfect(prior, &eff)?,
                "closed_form",
                None,
            )
        }
    })
}

fn report(
    step: Option<usize>,
    operation: String,
    rho: &DensityMatrix,
    predicted: &PhotonDistribution,
    formula: &str,
    predicted_mean: Option<f64>,
) -> Result<StepReport, Error> {
    let p = rho.diagonal_part(DIAGONAL_TOL)?;
    let s = moments(&p);
    let predicted_mean = predicted_mean.unwrap_or_else(|| moments(predicted).mean);
    Ok(StepReport {
        step,
        operation,
        distribution: p.probabilities().to_vec(),
        trace: rho.trace(),
        mean: s.mean,
        variance: s.variance,
        vacuum_prob: s.vacuum_prob,
        predicted_distribution: predicted.probabilities().to_vec(),
        distribution_abs_diff: p.max_abs_diff(predicted),
        mean_formula: formula.to_string(),
        predicted_mean,
        mean_abs_diff: (s.mean - predicted_mean).abs(),
    })
}

/// Applies the operation list in order, reporting computed statistics next
/// to the closed-form predictions after each step.
pub fn run_pipeline(scenario: &Scenario) -> Result<PipelineReport, ScenarioError> {
    scenario.validate()?;
    let initial = scenario.initial()?;
    let params = match scenario.model {
        DetectorModel::Continuous => Some(coupling(scenario)?),
        DetectorModel::Discrete => None,
    };
    let mut rho = DensityMatrix::from_distribution(&initial.distribution);
    let init_report = report(None, "initial".into(), &rho, &initial.distribution, "closed_form", None)
        .map_err(|e| ScenarioError::Validation {
            path: "initial_state".into(),
            message: e.to_string(),
        })?;
    let mut steps = vec![init_report];
    for (i, op) in scenario.operations.iter().enumerate() {
        let prior = rho.diagonal_part(DIAGONAL_TOL).map_err(step_error(i, op))?;
        let (next, predicted, formula, mean) = apply(op, &rho, &prior, params).map_err(step_error(i, op))?;
        steps.push(report(Some(i), op.label(), &next, &predicted, formula, mean).map_err(step_error(i, op))?);
        rho = next;
    }
    Ok(PipelineReport {
        model: scenario.model,
        dim: scenario.dim,
        tail_mass: initial.tail_mass,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CampaignReport {
    pub model: DetectorModel,
    pub dim: usize,
    pub trials: u64,
    pub seed: u64,
    pub detections: usize,
    /// Counting window (continuous model only).
    pub t_max: Option<f64>,
    pub estimate: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Closed-form post-detection distribution.
    pub target: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
    /// Exact Bayes posterior for a count inside the finite window
    /// (continuous model only); tends to `target` as the window shrinks.
    pub window_target: Option<Vec<f64>>,
    pub conditioned: u64,
    pub anomalies: u64,
    pub conditioning_fraction: f64,
    pub expected_conditioning_fraction: f64,
    pub conditioning_z: f64,
    pub conditioned_mean: f64,
    pub conditioned_mean_std_error: f64,
    pub target_mean: f64,
    pub mean_z: f64,
    pub mean_first_count_time: Option<f64>,
}

/// Output of [`run_campaign`]; `records` is only kept on request.
#[derive(Debug, Clone)]
pub struct CampaignOutcome {
    pub report: CampaignReport,
    pub records: Option<Vec<DetectionRecord>>,
}

/// Runs `trials` Monte Carlo trials from the initial state and compares the
/// conditioned posterior with the closed-form reduction.
pub fn run_campaign(scenario: &Scenario, threads: usize, keep_records: bool) -> Result<CampaignOutcome, ScenarioError> {
    scenario.validate()?;
    let trials = scenario.trials.ok_or_else(|| ScenarioError::Validation {
        path: "trials".into(),
        message: "a campaign needs a trial count".into(),
    })?;
    let p0 = scenario.initial()?.distribution;
    let spec = &scenario.trajectory;
    let campaign_err = ScenarioError::Campaign;

    let (plan, target, target_mean, expected_fraction, window_target, t_max) = match scenario.model {
        DetectorModel::Discrete => {
            let cfg = AtomStreamConfig {
                excitation: spec.excitation.clone(),
                max_atoms: spec.max_atoms,
                seed: scenario.seed,
                detections: spec.detections,
            };
            let target = closed_form::subtract_n(&p0, spec.detections).map_err(campaign_err)?;
            let target_mean = if spec.detections == 1 {
                predict_discrete_mean(&moments(&p0)).map_err(campaign_err)?
            } else {
                target.mean()
            };
            let fraction = p0.mass_at_least(spec.detections);
            (TrialPlan::Discrete(cfg), target, target_mean, fraction, None, None)
        }
        DetectorModel::Continuous => {
            let params = coupling(scenario)?;
            let window = scenario.window()?;
            let target = closed_form::one_count(&p0).map_err(campaign_err)?;
            let target_mean = predict_continuous_mean(&moments(&p0)).map_err(campaign_err)?;
            let (exact, fraction) = window_posterior(&p0, params.lambda, window).map_err(campaign_err)?;
            let plan = TrialPlan::Continuous {
                params,
                t_max: window,
                seed: scenario.seed,
            };
            (plan, target, target_mean, fraction, Some(exact.into_vec()), Some(window))
        }
    };

    let run = run_trials(&p0, &plan, trials, threads, keep_records).map_err(campaign_err)?;
    let est = run.tally.estimate().map_err(campaign_err)?;
    let z_scores = est.z_scores(target.probabilities());
    let max_abs_z = z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let fraction = est.conditioning_fraction();
    let fraction_se = (expected_fraction * (1.0 - expected_fraction) / trials as f64).sqrt();
    let mean_z = ratio(est.mean - target_mean, est.mean_std_error);
    let report = CampaignReport {
        model: scenario.model,
        dim: scenario.dim,
        trials,
        seed: scenario.seed,
        detections: spec.detections,
        t_max,
        estimate: est.probabilities.clone(),
        std_errors: est.std_errors.clone(),
        target: target.into_vec(),
        z_scores,
        max_abs_z,
        window_target,
        conditioned: est.conditioned,
        anomalies: est.anomalies,
        conditioning_fraction: fraction,
        expected_conditioning_fraction: expected_fraction,
        conditioning_z: ratio(fraction - expected_fraction, fraction_se),
        conditioned_mean: est.mean,
        conditioned_mean_std_error: est.mean_std_error,
        target_mean,
        mean_z,
        mean_first_count_time: est.mean_first_count_time,
    };
    Ok(CampaignOutcome {
        report,
        records: run.records,
    })
}

fn ratio(diff: f64, se: f64) -> f64 {
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

/// Posterior after a count inside `[0, t_max]`, with the probability of
/// such a count: weights `p(n) (1 - exp(-n lambda t_max))`, shifted down by one.
fn window_posterior(p: &PhotonDistribution, lambda: f64, t_max: f64) -> Result<(PhotonDistribution, f64), Error> {
    let weights: Vec<f64> = p
        .probabilities()
        .iter()
        .enumerate()
        .map(|(n, x)| x * -(-(n as f64) * lambda * t_max).exp_m1())
        .collect();
    let evidence: f64 = weights.iter().sum();
    if evidence <= superops::VACUUM_THRESHOLD {
        return Err(Error::VacuumState);
    }
    let shifted = (0..weights.len())
        .map(|n| weights.get(n + 1).copied().unwrap_or(0.0) / evidence)
        .collect();
    Ok((PhotonDistribution::new(shifted)?, evidence))
}

/// Rounds to 12 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

fn round_value(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(r) = n.as_f64().map(round_sig).and_then(serde_json::Number::from_f64) {
                *n = r;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r.is_infinite() {
        if r > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{r}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// JSON with every float rounded to 12 significant digits.
pub fn to_json<T: Serialize>(report: &T) -> Result<String, ScenarioError> {
    let mut v = serde_json::to_value(report).map_err(|e| ScenarioError::Output(e.to_string()))?;
    round_value(&mut v);
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| ScenarioError::Output(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_error(e: impl ToString) -> ScenarioError {
    ScenarioError::Output(e.to_string())
}

/// Long-format table: one row per step and photon number.
pub fn pipeline_csv(report: &PipelineReport) -> Result<String, ScenarioError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "step",
        "operation",
        "n",
        "probability",
        "predicted_probability",
        "abs_diff",
        "trace",
        "mean",
        "variance",
        "vacuum_prob",
        "mean_formula",
        "predicted_mean",
        "mean_abs_diff",
    ])
    .map_err(csv_error)?;
    for s in &report.steps {
        let step = s.step.map(|i| i.to_string()).unwrap_or_else(|| "initial".into());
        for (n, (p, q)) in s.distribution.iter().zip(&s.predicted_distribution).enumerate() {
            w.write_record([
                step.clone(),
                s.operation.clone(),
                n.to_string(),
                fmt_num(*p),
                fmt_num(*q),
                fmt_num((p - q).abs()),
                fmt_num(s.trace),
                fmt_num(s.mean),
                fmt_num(s.variance),
                fmt_num(s.vacuum_prob),
                s.mean_formula.clone(),
                fmt_num(s.predicted_mean),
                fmt_num(s.mean_abs_diff),
            ])
            .map_err(csv_error)?;
        }
    }
    finish(w)
}

/// Per-bin table followed by `quantity,value` summary rows.
pub fn campaign_csv(report: &CampaignReport) -> Result<String, ScenarioError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    w.write_record(["n", "estimate", "std_error", "target", "window_target", "z"]).map_err(csv_error)?;
    for n in 0..report.estimate.len() {
        w.write_record([
            n.to_string(),
            fmt_num(report.estimate[n]),
            fmt_num(report.std_errors[n]),
            fmt_num(report.target[n]),
            fmt_opt(report.window_target.as_ref().map(|t| t[n])),
            fmt_num(report.z_scores[n]),
        ])
        .map_err(csv_error)?;
    }
    let model = match report.model {
        DetectorModel::Discrete => "discrete",
        DetectorModel::Continuous => "continuous",
    };
    let rows = [
        ("model", model.to_string()),
        ("trials", report.trials.to_string()),
        ("seed", report.seed.to_string()),
        ("detections", report.detections.to_string()),
        ("t_max", fmt_opt(report.t_max)),
        ("max_abs_z", fmt_num(report.max_abs_z)),
        ("conditioned", report.conditioned.to_string()),
        ("anomalies", report.anomalies.to_string()),
        ("conditioning_fraction", fmt_num(report.conditioning_fraction)),
        ("expected_conditioning_fraction", fmt_num(report.expected_conditioning_fraction)),
        ("conditioning_z", fmt_num(report.conditioning_z)),
        ("conditioned_mean", fmt_num(report.conditioned_mean)),
        ("conditioned_mean_std_error", fmt_num(report.conditioned_mean_std_error)),
        ("target_mean", fmt_num(report.target_mean)),
        ("mean_z", fmt_num(report.mean_z)),
        ("mean_first_count_time", fmt_opt(report.mean_first_count_time)),
    ];
    for (k, v) in rows {
        w.write_record([k.to_string(), v]).map_err(csv_error)?;
    }
    finish(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, ScenarioError> {
    let bytes = w.into_inner().map_err(csv_error)?;
    String::from_utf8(bytes).map_err(csv_error)
}

pub fn render_pipeline(report: &PipelineReport, format: OutputFormat) -> Result<String, ScenarioError> {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => pipeline_csv(report),
    }
}

pub fn render_campaign(report: &CampaignReport, format: OutputFormat) -> Result<String, ScenarioError> {
    match format {
        OutputFormat::Json => to_json(report),
        OutputFormat::Csv => campaign_csv(report),
    }
}

/// Writes one JSON object per record.
pub fn write_records(records: &[DetectionRecord], out: &mut impl Write) -> Result<(), ScenarioError> {
    for r in records {
        serde_json::to_writer(&mut *out, r).map_err(csv_error)?;
        out.write_all(b"\n").map_err(csv_error)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(body: &str) -> Scenario {
        Scenario::parse(body).unwrap()
    }

    #[test]
    fn thermal_subtraction_matches_the_mean_formula() {
        let s = scenario(
            r#"
model = "discrete"
dim = 128
[initial_state]
family = "thermal"
mean = 2.0
[[operations]]
op = "subtract"
n = 1
"#,
        );
        let r = run_pipeline(&s).unwrap();
        let step = &r.steps[1];
        assert!((step.mean - 2.0).abs() < 1e-9);
        assert!((step.predicted_mean - 2.0).abs() < 1e-9);
        assert!(step.mean_abs_diff < 1e-10);
        assert!(step.distribution_abs_diff < 1e-12);
        assert_eq!(step.mean_formula, "discrete_mean");
    }

    #[test]
    fn vacuum_subtraction_fails_at_step_zero() {
        let s = scenario(
            r#"
model = "discrete"
dim = 4
[initial_state]
family = "fock"
n = 0
[[operations]]
op = "subtract"
n = 1
"#,
        );
        match run_pipeline(&s) {
            Err(ScenarioError::Step { step: 0, source: Error::VacuumState, .. }) => {}
            other => panic!("expected VacuumState at step 0, got {other:?}"),
        }
    }

    #[test]
    fn add_then_subtract_returns_to_vacuum() {
        let s = scenario(
            r#"
model = "discrete"
dim = 6
[initial_state]
family = "fock"
n = 0
[[operations]]
op = "add"
n = 3
[[operations]]
op = "subtract"
n = 3
"#,
        );
        let r = run_pipeline(&s).unwrap();
        assert_eq!(r.final_distribution(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(r.steps.iter().all(|s| (s.trace - 1.0).abs() < 1e-12));
    }

    #[test]
    fn continuous_pipeline_reports_the_count_formula() {
        let s = scenario(
            r#"
model = "continuous"
dim = 128
[initial_state]
family = "thermal"
mean = 2.0
[coupling]
lambda = 1.0
[[operations]]
op = "one_count"
[[operations]]
op = "no_count"
tau = 0.25
[[operations]]
op = "phase"
phi = 0.4
"#,
        );
        let r = run_pipeline(&s).unwrap();
        assert!((r.steps[1].mean - 4.0).abs() < 1e-8);
        assert!(r.steps[1].mean_abs_diff < 1e-10);
        assert!(r.steps.iter().all(|s| s.distribution_abs_diff < 1e-12));
        assert_eq!(r.steps[2].operation, "no-count tau=0.25");
    }

    #[test]
    fn window_posterior_tends_to_the_count_formula() {
        let p = PhotonDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let (short, fraction) = window_posterior(&p, 1.0, 1e-9).unwrap();
        let eq = closed_form::one_count(&p).unwrap();
        assert!(short.max_abs_diff(&eq) < 1e-8);
        assert!((fraction - 0.7e-9).abs() < 1e-15);
        let (long, fraction) = window_posterior(&p, 1.0, 1e3).unwrap();
        assert!(long.max_abs_diff(&closed_form::subtract_one(&p).unwrap()) < 1e-12);
        assert!((fraction - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rounding_keeps_twelve_digits() {
        assert_eq!(round_sig(0.1 + 0.2), 0.3);
        assert_eq!(round_sig(3.0 / 7.0), 0.428571428571);
        assert_eq!(round_sig(-1234567.891234567), -1234567.89123);
        assert_eq!(fmt_num(f64::INFINITY), "inf");
    }

    #[test]
    fn small_campaign_renders_in_both_formats() {
        let s = scenario(
            r#"
model = "discrete"
dim = 4
trials = 200
seed = 5
[initial_state]
family = "custom"
p = [0.5, 0.3, 0.2]
"#,
        );
        let out = run_campaign(&s, 2, true).unwrap();
        assert_eq!(out.records.as_ref().unwrap().len(), 200);
        let json = render_campaign(&out.report, OutputFormat::Json).unwrap();
        let parsed: Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["trials"], 200);
        let csv = render_campaign(&out.report, OutputFormat::Csv).unwrap();
        assert!(csv.starts_with("n,estimate,std_error,target,window_target,z\n"));
        assert!(csv.contains("\nconditioned_mean,"));
        let mut buf = Vec::new();
        write_records(out.records.as_ref().unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 200);
    }
}

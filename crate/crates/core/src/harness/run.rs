//! Config-driven runs: single inference, sweeps over data realizations,
//! diagnostics, and the dog-bone study.

use std::path::Path;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bayes_linear::{GainReport, LinearComparison, LinearGaussianProblem};
use crate::dci_linear::{predictability_spectrum_with_tolerance, updated_density_with_tolerance};
use crate::error::{PopInferError, Result};
use crate::gaussian::GaussianDensity;
use crate::harness::config::{ensemble_rng, realization_rng, Experiment, ExperimentConfig, Pipeline};
use crate::harness::ood::{OodTest, PushforwardReference};
use crate::harness::output::{format_f64, write_json, write_samples_csv, CsvTable};
use crate::linalg;
use crate::sampling::{KernelDensityEstimate, MeanRatioDiagnostic, PreparedEnsemble, RejectionResult};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensitySummary {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_count: Option<usize>,
}

impl DensitySummary {
    pub fn from_gaussian(g: &GaussianDensity) -> Self {
        Self {
            mean: g.mean().iter().copied().collect(),
            covariance: linalg::matrix_to_rows(g.covariance()),
            sample_count: None,
        }
    }

    pub fn from_samples(samples: &DMatrix<f64>) -> Self {
        let covariance = if samples.nrows() > 1 {
            linalg::row_covariance(samples)
        } else {
            DMatrix::from_element(samples.ncols(), samples.ncols(), f64::NAN)
        };
        Self {
            mean: linalg::row_mean(samples).iter().copied().collect(),
            covariance: linalg::matrix_to_rows(&covariance),
            sample_count: Some(samples.nrows()),
        }
    }

    /// `det(Γ⁻¹)` and `trace(Γ⁻¹)`; NaN when the covariance is singular.
    fn precision_summaries(&self) -> (f64, f64) {
        let cov = match linalg::matrix_from_rows(&self.covariance) {
            Ok(c) => c,
            Err(_) => return (f64::NAN, f64::NAN),
        };
        match linalg::spd_inverse(&cov) {
            Ok(p) => (p.determinant(), p.trace()),
            Err(_) => (f64::NAN, f64::NAN),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictabilityReport {
    pub singular_values: Vec<f64>,
    pub min_value: f64,
    pub tolerance: f64,
    pub satisfied: bool,
}

/// Push-forward of the accepted updated-density samples through `f_p`,
/// next to the observed density it should reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PushforwardCheck {
    pub observed: DensitySummary,
    pub sampled: DensitySummary,
    /// Standard error of each component of the sampled mean.
    pub mean_std_error: Vec<f64>,
    /// Standard error of each sampled variance.
    pub variance_std_error: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationReport {
    pub index: usize,
    pub y: Vec<f64>,
    pub standard_posterior: DensitySummary,
    pub population_posterior: DensitySummary,
    pub det_inv_standard: f64,
    pub det_inv_pop: f64,
    pub trace_inv_standard: f64,
    pub trace_inv_pop: f64,
    pub kl_standard: f64,
    pub kl_pop: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl_standard_std_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kl_pop_std_error: Option<f64>,
    pub relative_gain: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate_standard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate_pop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ln_evidence_standard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ln_evidence_pop: Option<f64>,
    pub ood_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationFailure {
    pub index: usize,
    pub y: Vec<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceReport {
    pub pipeline: Pipeline,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictability: Option<PredictabilityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<MeanRatioDiagnostic>,
    pub updated: DensitySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub updated_acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub updated_pushforward: Option<PushforwardCheck>,
    pub realizations: Vec<RealizationReport>,
    pub failures: Vec<RealizationFailure>,
}

impl InferenceReport {
    /// Whether the run went through with the predictability assumption
    /// unsupported (sampled pipeline, failing diagnostic).
    pub fn predictability_violated(&self) -> bool {
        self.diagnostic.is_some_and(|d| !d.pass) || self.predictability.as_ref().is_some_and(|p| !p.satisfied)
    }
}

/// Everything that does not depend on the individual data.
enum Prepared {
    Analytic {
        updated: GaussianDensity,
        spectrum: PredictabilityReport,
        ood_reference: Option<GaussianDensity>,
    },
    Sampled {
        prepared: Box<PreparedEnsemble>,
        updated: RejectionResult,
        ood_reference: Option<KernelDensityEstimate>,
    },
}

impl Prepared {
    fn build(exp: &Experiment) -> Result<Self> {
        let cfg = &exp.config;
        match cfg.pipeline {
            Pipeline::Analytic => {
                let initial = exp.initial.as_gaussian().expect("validated");
                let map = exp.pop_model.as_linear().expect("validated");
                let spectrum = predictability_spectrum_with_tolerance(initial, map, &exp.observed, cfg.predictability_tolerance)?;
                let updated = updated_density_with_tolerance(initial, map, &exp.observed, cfg.predictability_tolerance)?;
                let ood_reference = match &exp.individual {
                    Some(ind) => Some(updated.pushforward(ind.model.as_linear().expect("validated"))?),
                    None => None,
                };
                Ok(Prepared::Analytic {
                    updated,
                    spectrum: PredictabilityReport {
                        min_value: spectrum.min_value(),
                        satisfied: spectrum.min_value() >= 1.0 - cfg.predictability_tolerance,
                        singular_values: spectrum.singular_values,
                        tolerance: cfg.predictability_tolerance,
                    },
                    ood_reference,
                })
            }
            Pipeline::Sampled => {
                let mut rng = ensemble_rng(cfg.seed);
                let params = exp.initial.sample(&mut rng, cfg.n_samples);
                let ind_model = exp.individual.as_ref().map_or(&exp.pop_model, |i| &i.model);
                let prepared = PreparedEnsemble::build(params, &exp.pop_model, ind_model, &exp.observed, cfg.kde_bandwidth)?;
                let updated = prepared.sample_updated(&mut rng)?;
                let ood_reference = match exp.individual {
                    Some(_) => {
                        let outputs = select_rows(prepared.ensemble.ind_outputs(), &updated.accepted_indices);
                        Some(KernelDensityEstimate::fit(&outputs, cfg.kde_bandwidth)?)
                    }
                    None => None,
                };
                Ok(Prepared::Sampled {
                    prepared: Box::new(prepared),
                    updated,
                    ood_reference,
                })
            }
        }
    }

    fn ood_test(&self, alpha: f64) -> Result<Option<OodTest<'_>>> {
        let reference = match self {
            Prepared::Analytic { ood_reference, .. } => ood_reference.as_ref().map(PushforwardReference::Gaussian),
            Prepared::Sampled { ood_reference, .. } => ood_reference.as_ref().map(PushforwardReference::Kde),
        };
        reference.map(|r| OodTest::new(r, alpha)).transpose()
    }
}

fn select_rows(m: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

fn pushforward_check(observed: &GaussianDensity, outputs: &DMatrix<f64>) -> PushforwardCheck {
    let sampled = DensitySummary::from_samples(outputs);
    let n = outputs.nrows() as f64;
    let mut mean_std_error = Vec::new();
    let mut variance_std_error = Vec::new();
    for k in 0..outputs.ncols() {
        let col = outputs.column(k);
        let mean = sampled.mean[k];
        let var = sampled.covariance[k][k];
        let m4 = col.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        mean_std_error.push((var / n).sqrt());
        // large-sample standard error of the sample variance
        variance_std_error.push(((m4 - var * var) / n).max(0.0).sqrt());
    }
    PushforwardCheck {
        observed: DensitySummary::from_gaussian(observed),
        sampled,
        mean_std_error,
        variance_std_error,
    }
}

/// Accepted ensembles of one realization, for `samples_*.csv`.
struct RealizationSamples {
    standard: DMatrix<f64>,
    population: DMatrix<f64>,
}

fn run_realization(
    exp: &Experiment,
    prepared: &Prepared,
    ood: Option<&OodTest<'_>>,
    index: usize,
) -> Result<(RealizationReport, Option<RealizationSamples>)> {
    let cfg = &exp.config;
    let ind = exp.individual.as_ref().expect("caller checks for individual data");
    let mut rng: ChaCha8Rng = realization_rng(cfg.seed, index);
    let y = exp.data_for(index, &mut rng)?;
    let ood_flag = match ood {
        Some(t) => t.flag(&y)?,
        None => false,
    };
    match prepared {
        Prepared::Analytic { updated, .. } => {
            let prior = exp.initial.as_gaussian().expect("validated");
            let map = ind.model.as_linear().expect("validated");
            let problem = LinearGaussianProblem::new(prior.clone(), map.clone(), ind.noise_covariance.clone(), y.clone())?;
            let cmp = compare_linear_with_updated(&problem, updated)?;
            let r = cmp.report;
            Ok((
                RealizationReport {
                    index,
                    y,
                    standard_posterior: DensitySummary::from_gaussian(&cmp.standard),
                    population_posterior: DensitySummary::from_gaussian(&cmp.population),
                    det_inv_standard: r.det_inv_standard,
                    det_inv_pop: r.det_inv_pop,
                    trace_inv_standard: r.trace_inv_standard,
                    trace_inv_pop: r.trace_inv_pop,
                    kl_standard: r.kl_standard,
                    kl_pop: r.kl_pop,
                    kl_standard_std_error: None,
                    kl_pop_std_error: None,
                    relative_gain: r.relative_gain,
                    acceptance_rate_standard: None,
                    acceptance_rate_pop: None,
                    ln_evidence_standard: None,
                    ln_evidence_pop: None,
                    ood_flag,
                },
                None,
            ))
        }
        Prepared::Sampled { prepared, .. } => {
            let inf = prepared.infer(&y, &ind.noise_covariance, &mut rng)?;
            let standard_posterior = DensitySummary::from_samples(&inf.standard.accepted_params);
            let population_posterior = DensitySummary::from_samples(&inf.population.accepted_params);
            let (det_inv_standard, trace_inv_standard) = standard_posterior.precision_summaries();
            let (det_inv_pop, trace_inv_pop) = population_posterior.precision_summaries();
            Ok((
                RealizationReport {
                    index,
                    y,
                    standard_posterior,
                    population_posterior,
                    det_inv_standard,
                    det_inv_pop,
                    trace_inv_standard,
                    trace_inv_pop,
                    kl_standard: inf.kl_standard.value,
                    kl_pop: inf.kl_pop.value,
                    kl_standard_std_error: Some(inf.kl_standard.std_error),
                    kl_pop_std_error: Some(inf.kl_pop.std_error),
                    relative_gain: inf.relative_gain,
                    acceptance_rate_standard: Some(inf.standard.acceptance_rate),
                    acceptance_rate_pop: Some(inf.population.acceptance_rate),
                    ln_evidence_standard: Some(inf.evidence_standard.ln_value),
                    ln_evidence_pop: Some(inf.evidence_pop.ln_value),
                    ood_flag,
                },
                Some(RealizationSamples {
                    standard: inf.standard.accepted_params,
                    population: inf.population.accepted_params,
                }),
            ))
        }
    }
}

/// Like `compare_linear` but reuses an updated density computed once.
fn compare_linear_with_updated(
    problem: &LinearGaussianProblem,
    updated: &GaussianDensity,
) -> Result<LinearComparison> {
    let standard = problem.posterior_with_prior(problem.prior())?;
    let population = problem.posterior_with_prior(updated)?;
    let report = GainReport::from_posteriors(&standard, &population, problem.prior())?;
    Ok(LinearComparison {
        updated: updated.clone(),
        standard,
        population,
        report,
    })
}

/// Errors that mark one realization as failed instead of aborting the run.
fn is_recoverable(e: &PopInferError) -> bool {
    matches!(e, PopInferError::ZeroEvidence | PopInferError::AllRejected)
}

fn report_header(exp: &Experiment, prepared: &Prepared) -> InferenceReport {
    let cfg = &exp.config;
    match prepared {
        Prepared::Analytic { updated, spectrum, .. } => InferenceReport {
            pipeline: cfg.pipeline,
            seed: cfg.seed,
            n_samples: None,
            predictability: Some(spectrum.clone()),
            diagnostic: None,
            updated: DensitySummary::from_gaussian(updated),
            updated_acceptance_rate: None,
            updated_pushforward: None,
            realizations: Vec::new(),
            failures: Vec::new(),
        },
        Prepared::Sampled { prepared, updated, .. } => InferenceReport {
            pipeline: cfg.pipeline,
            seed: cfg.seed,
            n_samples: Some(cfg.n_samples),
            predictability: None,
            diagnostic: Some(prepared.diagnostic),
            updated: DensitySummary::from_samples(&updated.accepted_params),
            updated_acceptance_rate: Some(updated.acceptance_rate),
            updated_pushforward: Some(pushforward_check(
                &exp.observed,
                &select_rows(prepared.ensemble.pop_outputs(), &updated.accepted_indices),
            )),
            realizations: Vec::new(),
            failures: Vec::new(),
        },
    }
}

/// Runs every configured realization and writes `report.json` (plus
/// `samples_*.csv` for the sampled pipeline) into `out_dir`.
pub fn run_single(config: &ExperimentConfig, out_dir: &Path) -> Result<InferenceReport> {
    let exp = config.validate()?;
    let prepared = Prepared::build(&exp)?;
    let ood = prepared.ood_test(config.ood_alpha)?;
    let mut report = report_header(&exp, &prepared);

    let n = exp.realizations();
    let results: Vec<Result<(RealizationReport, Option<RealizationSamples>)>> = (0..n)
        .into_par_iter()
        .map(|i| run_realization(&exp, &prepared, ood.as_ref(), i))
        .collect();

    std::fs::create_dir_all(out_dir)?;
    if let Prepared::Sampled { updated, .. } = &prepared {
        write_samples_csv(&out_dir.join("samples_updated.csv"), &updated.accepted_params)?;
    }
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((row, samples)) => {
                if let Some(s) = samples {
                    let suffix = if n == 1 { String::new() } else { format!("_{i}") };
                    write_samples_csv(&out_dir.join(format!("samples_standard{suffix}.csv")), &s.standard)?;
                    write_samples_csv(&out_dir.join(format!("samples_population{suffix}.csv")), &s.population)?;
                }
                report.realizations.push(row);
            }
            Err(e) if is_recoverable(&e) => report.failures.push(RealizationFailure {
                index: i,
                y: exp.data_for(i, &mut realization_rng(config.seed, i))?,
                error: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    write_json(&out_dir.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub realization: usize,
    pub y: Vec<f64>,
    pub kl_standard: f64,
    pub kl_pop: f64,
    /// NaN for failed rows or a vanishing reference KL.
    pub relative_gain: f64,
    pub ood_flag: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate_standard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate_pop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl RateStats {
    fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        Some(Self {
            mean: values.iter().sum::<f64>() / values.len() as f64,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub n_realizations: usize,
    pub n_failed: usize,
    /// Rows with a finite relative gain; the statistics below use these.
    pub n_valid: usize,
    pub mean_relative_gain: f64,
    pub fraction_negative: f64,
    pub fraction_ood: f64,
    pub fraction_ood_among_negative: f64,
    pub fraction_ood_among_positive: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate_standard: Option<RateStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate_pop: Option<RateStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub predictability_min_singular_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<MeanRatioDiagnostic>,
}

impl SweepSummary {
    /// Recomputes the summary from rows alone (the diagnostic fields are
    /// carried separately).
    pub fn from_rows(rows: &[SweepRow]) -> Self {
        let valid: Vec<&SweepRow> = rows.iter().filter(|r| r.relative_gain.is_finite()).collect();
        let frac = |num: usize, den: usize| if den == 0 { f64::NAN } else { num as f64 / den as f64 };
        let negative: Vec<&&SweepRow> = valid.iter().filter(|r| r.relative_gain < 0.0).collect();
        let positive: Vec<&&SweepRow> = valid.iter().filter(|r| r.relative_gain >= 0.0).collect();
        let rates = |f: fn(&SweepRow) -> Option<f64>| {
            let v: Vec<f64> = rows.iter().filter_map(f).collect();
            RateStats::from_values(&v)
        };
        Self {
            n_realizations: rows.len(),
            n_failed: rows.iter().filter(|r| r.error.is_some()).count(),
            n_valid: valid.len(),
            mean_relative_gain: if valid.is_empty() {
                f64::NAN
            } else {
                valid.iter().map(|r| r.relative_gain).sum::<f64>() / valid.len() as f64
            },
            fraction_negative: frac(negative.len(), valid.len()),
            fraction_ood: frac(valid.iter().filter(|r| r.ood_flag).count(), valid.len()),
            fraction_ood_among_negative: frac(negative.iter().filter(|r| r.ood_flag).count(), negative.len()),
            fraction_ood_among_positive: frac(positive.iter().filter(|r| r.ood_flag).count(), positive.len()),
            acceptance_rate_standard: rates(|r| r.acceptance_rate_standard),
            acceptance_rate_pop: rates(|r| r.acceptance_rate_pop),
            predictability_min_singular_value: None,
            diagnostic: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub summary: SweepSummary,
    #[serde(skip)]
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn csv(&self) -> CsvTable {
        let m = self.rows.first().map_or(0, |r| r.y.len());
        let mut header = vec!["realization".to_string()];
        header.extend((0..m).map(|k| if m == 1 { "y".to_string() } else { format!("y{k}") }));
        header.extend(["kl_standard", "kl_pop", "relative_gain", "ood_flag"].map(String::from));
        let mut table = CsvTable::new(&header);
        for r in &self.rows {
            let mut cells = vec![r.realization.to_string()];
            cells.extend(r.y.iter().map(|&v| format_f64(v)));
            cells.push(format_f64(r.kl_standard));
            cells.push(format_f64(r.kl_pop));
            cells.push(format_f64(r.relative_gain));
            cells.push(u8::from(r.ood_flag).to_string());
            table.push_row(&cells);
        }
        table
    }
}

/// Runs `n_realizations` data realizations (overriding the config when
/// given) and writes `sweep.csv` and `sweep_summary.json`.
pub fn run_sweep(config: &ExperimentConfig, out_dir: &Path, n_realizations: Option<usize>) -> Result<SweepReport> {
    let mut config = config.clone();
    if let Some(n) = n_realizations {
        config.n_realizations = n;
    }
    let exp = config.validate()?;
    if !matches!(
        exp.individual.as_ref().map(|i| &i.data),
        Some(crate::harness::config::DataSource::Generator(_))
    ) {
        return Err(PopInferError::Config("sweep needs a data generator with a truth distribution".into()));
    }
    let prepared = Prepared::build(&exp)?;
    let ood = prepared.ood_test(config.ood_alpha)?;

    let rows: Vec<SweepRow> = (0..exp.realizations())
        .into_par_iter()
        .map(|i| match run_realization(&exp, &prepared, ood.as_ref(), i) {
            Ok((r, _)) => Ok(SweepRow {
                realization: i,
                y: r.y,
                kl_standard: r.kl_standard,
                kl_pop: r.kl_pop,
                relative_gain: r.relative_gain.unwrap_or(f64::NAN),
                ood_flag: r.ood_flag,
                acceptance_rate_standard: r.acceptance_rate_standard,
                acceptance_rate_pop: r.acceptance_rate_pop,
                error: None,
            }),
            Err(e) if is_recoverable(&e) => {
                let y = exp.data_for(i, &mut realization_rng(config.seed, i))?;
                let ood_flag = match &ood {
                    Some(t) => t.flag(&y)?,
                    None => false,
                };
                Ok(SweepRow {
                    realization: i,
                    y,
                    kl_standard: f64::NAN,
                    kl_pop: f64::NAN,
                    relative_gain: f64::NAN,
                    ood_flag,
                    acceptance_rate_standard: None,
                    acceptance_rate_pop: None,
                    error: Some(e.to_string()),
                })
            }
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;

    let mut summary = SweepSummary::from_rows(&rows);
    match &prepared {
        Prepared::Analytic { spectrum, .. } => summary.predictability_min_singular_value = Some(spectrum.min_value),
        Prepared::Sampled { prepared, .. } => summary.diagnostic = Some(prepared.diagnostic),
    }
    let report = SweepReport { summary, rows };
    std::fs::create_dir_all(out_dir)?;
    report.csv().write(&out_dir.join("sweep.csv"))?;
    write_json(&out_dir.join("sweep_summary.json"), &report.summary)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnoseReport {
    Predictability(PredictabilityReport),
    MeanRatio(MeanRatioDiagnostic),
}

impl DiagnoseReport {
    pub fn passed(&self) -> bool {
        match self {
            DiagnoseReport::Predictability(p) => p.satisfied,
            DiagnoseReport::MeanRatio(d) => d.pass,
        }
    }
}

/// The predictability spectrum (analytic) or the mean-ratio diagnostic
/// (sampled), without running any inference.
pub fn diagnose(config: &ExperimentConfig) -> Result<DiagnoseReport> {
    let exp = config.validate()?;
    match config.pipeline {
        Pipeline::Analytic => {
            let initial = exp.initial.as_gaussian().expect("validated");
            let map = exp.pop_model.as_linear().expect("validated");
            let s = predictability_spectrum_with_tolerance(initial, map, &exp.observed, config.predictability_tolerance)?;
            Ok(DiagnoseReport::Predictability(PredictabilityReport {
                min_value: s.min_value(),
                satisfied: s.min_value() >= 1.0 - config.predictability_tolerance,
                singular_values: s.singular_values,
                tolerance: config.predictability_tolerance,
            }))
        }
        Pipeline::Sampled => {
            let params = exp.initial.sample(&mut ensemble_rng(config.seed), config.n_samples);
            let prepared =
                PreparedEnsemble::build(params, &exp.pop_model, &exp.pop_model, &exp.observed, config.kde_bandwidth)?;
            Ok(DiagnoseReport::MeanRatio(prepared.diagnostic))
        }
    }
}

pub const DOGBONE_N_SAMPLES: usize = 40_000;
pub const DOGBONE_OBSERVED_MEAN: f64 = 2.8e-4;
pub const DOGBONE_OBSERVED_STD: f64 = 4.2e-6;
pub const DOGBONE_NOISE_STD: f64 = 4.15e-7;
pub const DOGBONE_DATA: f64 = 1.3e-5;

/// The dog-bone study: uniform steel prior, surrogate models, observed
/// population density and one individual measurement.
pub fn dogbone_config(seed: u64) -> ExperimentConfig {
    use crate::harness::config::{DataSpec, DensitySpec, MapSpec};
    use crate::forward_models::{DOGBONE_E_RANGE, DOGBONE_NU_RANGE};
    let named = |qoi: &str| MapSpec::Named {
        model: "dogbone_surrogate".into(),
        matrix: None,
        qoi: Some(qoi.into()),
    };
    ExperimentConfig {
        pipeline: Pipeline::Sampled,
        initial: DensitySpec::Uniform {
            lower: vec![DOGBONE_E_RANGE.0, DOGBONE_NU_RANGE.0],
            upper: vec![DOGBONE_E_RANGE.1, DOGBONE_NU_RANGE.1],
        },
        pop_map: named("population"),
        observed: DensitySpec::Gaussian {
            mean: vec![DOGBONE_OBSERVED_MEAN],
            cov: vec![vec![DOGBONE_OBSERVED_STD * DOGBONE_OBSERVED_STD]],
        },
        ind_map: Some(named("individual")),
        noise_cov: Some(vec![vec![DOGBONE_NOISE_STD * DOGBONE_NOISE_STD]]),
        data: Some(DataSpec::Values(vec![vec![DOGBONE_DATA]])),
        n_samples: DOGBONE_N_SAMPLES,
        n_realizations: 1,
        seed,
        kde_bandwidth: Default::default(),
        ood_alpha: 0.05,
        predictability_tolerance: crate::dci_linear::DEFAULT_PREDICTABILITY_TOLERANCE,
        output_dir: None,
    }
}

/// Runs a sampled dog-bone configuration; writes `report.json`,
/// `samples_updated.csv`, `samples_standard.csv` and `samples_population.csv`.
pub fn run_dogbone_study(config: &ExperimentConfig, out_dir: &Path) -> Result<InferenceReport> {
    if config.pipeline != Pipeline::Sampled {
        return Err(PopInferError::Config("the dog-bone study uses the sampled pipeline".into()));
    }
    run_single(config, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(gain: f64, ood: bool) -> SweepRow {
        SweepRow {
            realization: 0,
            y: vec![0.0],
            kl_standard: 1.0,
            kl_pop: 1.0 + gain,
            relative_gain: gain,
            ood_flag: ood,
            acceptance_rate_standard: None,
            acceptance_rate_pop: None,
            error: None,
        }
    }

    #[test]
    fn summary_of_single_row_is_that_row() {
        let s = SweepSummary::from_rows(&[row(0.25, true)]);
        assert_eq!(s.mean_relative_gain, 0.25);
        assert_eq!(s.fraction_negative, 0.0);
        assert_eq!(s.fraction_ood, 1.0);
    }

    #[test]
    fn summary_skips_failed_rows() {
        let mut failed = row(f64::NAN, false);
        failed.error = Some("zero evidence".into());
        let s = SweepSummary::from_rows(&[row(-0.5, true), row(0.5, false), failed]);
        assert_eq!(s.n_failed, 1);
        assert_eq!(s.n_valid, 2);
        assert_eq!(s.mean_relative_gain, 0.0);
        assert_eq!(s.fraction_negative, 0.5);
        assert_eq!(s.fraction_ood_among_negative, 1.0);
        assert_eq!(s.fraction_ood_among_positive, 0.0);
    }

    #[test]
    fn csv_header_lists_data_components() {
        let report = SweepReport {
            summary: SweepSummary::from_rows(&[]),
            rows: vec![SweepRow { y: vec![1.0, 2.0], ..row(0.1, false) }],
        };
        let csv = report.csv();
        assert!(csv.as_str().starts_with("realization,y0,y1,kl_standard,kl_pop,relative_gain,ood_flag\n"));
    }
}

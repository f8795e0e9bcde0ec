//! Error metrics, the Monte Carlo replication harness and empirical coverage.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{embed, LagDataset, Series};
use crate::error::{Error, Result};
use crate::estimator::predict_dataset;
use crate::forest::{derive_seed, Forest, ForestConfig};
use crate::synth::{check_tau, DgpModel, DgpSpec, ErrorDist, DEFAULT_BURN_IN};
use crate::wnw::{WnwConfig, WnwModel};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Per-time biases `q̂(x_t) - q₀(x_t)` of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSample {
    pub replicate: usize,
    pub biases: Vec<f64>,
}

impl BiasSample {
    pub fn mean(&self) -> f64 {
        self.biases.iter().sum::<f64>() / self.biases.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mbias: f64,
    /// Undefined for a single replicate.
    pub sdbias: Option<f64>,
    pub mse: f64,
    pub replicates: usize,
}

/// MBias, SDBias (divisor `R - 1`) and MSE; SDBias is `None` when `R = 1`.
///
/// Samples are ordered by replicate id before summation, so the result does
/// not depend on the order they are passed in.
pub fn aggregate(samples: &[BiasSample]) -> Result<Metrics> {
    if samples.is_empty() {
        return Err(Error::TooFewReplicates { needed: 1, got: 0 });
    }
    let mut sorted: Vec<&BiasSample> = samples.iter().collect();
    sorted.sort_by_key(|s| s.replicate);
    for s in &sorted {
        if s.biases.is_empty() {
            return Err(Error::param(format!(
                "replicate {} has no biases",
                s.replicate
            )));
        }
        if s.biases.iter().any(|b| !b.is_finite()) {
            return Err(Error::param(format!(
                "replicate {} has a non-finite bias",
                s.replicate
            )));
        }
    }
    let r = sorted.len() as f64;
    let means: Vec<f64> = sorted.iter().map(|s| s.mean()).collect();
    let mbias = means.iter().sum::<f64>() / r;
    let sdbias = (sorted.len() >= 2)
        .then(|| (means.iter().map(|m| (m - mbias).powi(2)).sum::<f64>() / (r - 1.0)).sqrt());
    let mse = sorted
        .iter()
        .map(|s| s.biases.iter().map(|b| b * b).sum::<f64>() / s.biases.len() as f64)
        .sum::<f64>()
        / r;
    Ok(Metrics {
        mbias,
        sdbias,
        mse,
        replicates: sorted.len(),
    })
}

/// `(MBias, SDBias, MSE)`; needs at least two replicates.
pub fn mbias_sdbias_mse(samples: &[BiasSample]) -> Result<(f64, f64, f64)> {
    let m = aggregate(samples)?;
    match m.sdbias {
        Some(sd) => Ok((m.mbias, sd, m.mse)),
        None => Err(Error::TooFewReplicates {
            needed: 2,
            got: m.replicates,
        }),
    }
}

/// Fraction of responses at or below their predicted quantile.
pub fn empirical_coverage(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(Error::param("coverage needs at least one prediction"));
    }
    let hits = actual.iter().zip(predicted).filter(|(y, q)| y <= q).count();
    Ok(hits as f64 / actual.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum Method {
    Tsqrf(ForestConfig),
    Wnw(WnwConfig),
    /// Returns the true conditional quantile; only meaningful on simulated data.
    Oracle,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Tsqrf(_) => "tsqrf",
            Method::Wnw(_) => "wnw",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Study {
    /// Estimates at the training covariates.
    Train,
    /// Estimates at held-out covariates after the training block.
    Test,
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Study::Train => "train",
            Study::Test => "test",
        })
    }
}

/// A fitted model of either kind.
enum Fitted {
    Forest(Box<Forest>),
    Kernel(Box<WnwModel>),
    Oracle(Option<DgpSpec>),
}

impl Fitted {
    fn fit(
        method: &Method,
        train: &LagDataset,
        seed: u64,
        spec: Option<DgpSpec>,
    ) -> Result<Fitted> {
        Ok(match method {
            Method::Tsqrf(cfg) => {
                let cfg = ForestConfig {
                    seed,
                    ..cfg.clone()
                };
                Fitted::Forest(Box::new(Forest::fit(train, &cfg)?))
            }
            Method::Wnw(cfg) => Fitted::Kernel(Box::new(WnwModel::fit(train, cfg)?)),
            Method::Oracle => Fitted::Oracle(spec),
        })
    }

    /// Rows of quantile estimates (one column per τ) at every pair of `data`.
    fn predict(&self, data: &LagDataset, taus: &[f64]) -> Result<Vec<Vec<f64>>> {
        match self {
            Fitted::Forest(f) => predict_dataset(f, data, taus).into_iter().collect(),
            Fitted::Kernel(m) => {
                let queries: Vec<Vec<f64>> = data.rows().map(<[f64]>::to_vec).collect();
                m.predict(&queries, taus).into_iter().collect()
            }
            Fitted::Oracle(Some(spec)) => data
                .rows()
                .map(|x| taus.iter().map(|&t| spec.true_quantile(x, t)).collect())
                .collect(),
            Fitted::Oracle(None) => Err(Error::param(
                "the oracle method needs a known data-generating process",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: DgpModel,
    pub error: ErrorDist,
    /// Training length `T` (number of training pairs).
    pub t_train: usize,
}

impl Scenario {
    pub fn spec(&self) -> DgpSpec {
        DgpSpec::new(self.model, self.error)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/T={}", self.model, self.error, self.t_train)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationGrid {
    pub scenarios: Vec<Scenario>,
    /// Held-out length `T'`; zero disables the test study.
    pub t_test: usize,
    pub taus: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub methods: Vec<Method>,
}

impl SimulationGrid {
    /// Every model × error combination at one training length.
    pub fn full(t_train: usize, t_test: usize, replicates: usize, methods: Vec<Method>) -> Self {
        let scenarios = DgpModel::ALL
            .iter()
            .flat_map(|&model| {
                [ErrorDist::Normal, ErrorDist::Laplace].map(|error| Scenario {
                    model,
                    error,
                    t_train,
                })
            })
            .collect();
        SimulationGrid {
            scenarios,
            t_test,
            taus: vec![0.1, 0.5, 0.9],
            replicates,
            seed: 2024,
            burn_in: DEFAULT_BURN_IN,
            methods,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.methods.is_empty() || self.taus.is_empty() {
            return Err(Error::param(
                "grid needs scenarios, methods and quantile levels",
            ));
        }
        if self.replicates == 0 {
            return Err(Error::TooFewReplicates { needed: 1, got: 0 });
        }
        if let Some(s) = self.scenarios.iter().find(|s| s.t_train < 2) {
            return Err(Error::param(format!(
                "scenario {s} needs at least two training pairs"
            )));
        }
        self.taus.iter().try_for_each(|&t| check_tau(t))
    }

    /// Seed of the simulated path for replicate `r` of scenario `sc`.
    pub fn path_seed(&self, sc: usize, r: usize) -> u64 {
        derive_seed(derive_seed(self.seed, sc as u64), r as u64)
    }
}

/// One aggregated row of a metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: DgpModel,
    pub error: ErrorDist,
    #[serde(rename = "T")]
    pub t: usize,
    pub tau: f64,
    pub method: String,
    pub study: Study,
    pub mbias: f64,
    pub sdbias: Option<f64>,
    pub mse: f64,
    #[serde(rename = "R")]
    pub r: usize,
}

/// Per-replicate mean bias `Bias^{(r)}`, kept for histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasRecord {
    pub model: DgpModel,
    pub error: ErrorDist,
    #[serde(rename = "T")]
    pub t: usize,
    pub tau: f64,
    pub method: String,
    pub study: Study,
    pub replicate: usize,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub reports: Vec<MetricsReport>,
    pub biases: Vec<BiasRecord>,
}

impl SimulationOutcome {
    pub fn study(&self, study: Study) -> impl Iterator<Item = &MetricsReport> + '_ {
        self.reports.iter().filter(move |r| r.study == study)
    }

    pub fn find(
        &self,
        study: Study,
        method: &str,
        model: DgpModel,
        error: ErrorDist,
        t: usize,
        tau: f64,
    ) -> Option<&MetricsReport> {
        self.reports.iter().find(|r| {
            r.study == study
                && r.method == method
                && r.model == model
                && r.error == error
                && r.t == t
                && r.tau == tau
        })
    }
}

type SampleKey = (usize, usize, Study, usize); // (scenario, method, study, tau index)

fn run_replicate(
    grid: &SimulationGrid,
    sc: usize,
    r: usize,
) -> Result<Vec<(SampleKey, BiasSample)>> {
    let scenario = grid.scenarios[sc];
    let spec = scenario.spec();
    let p = spec.p();
    let seed = grid.path_seed(sc, r);
    let path = spec.simulate(scenario.t_train + grid.t_test + p, grid.burn_in, seed)?;
    let data = embed(&path, p)?;
    let train = data.slice(0..scenario.t_train);
    let test = data.slice(scenario.t_train..data.len());

    let truth = |d: &LagDataset| -> Result<Vec<Vec<f64>>> {
        d.rows()
            .map(|x| {
                grid.taus
                    .iter()
                    .map(|&t| spec.true_quantile(x, t))
                    .collect()
            })
            .collect()
    };
    let mut studies = vec![(Study::Train, &train, truth(&train)?)];
    if grid.t_test > 0 {
        studies.push((Study::Test, &test, truth(&test)?));
    }

    let mut out = Vec::new();
    for (m, method) in grid.methods.iter().enumerate() {
        let fitted = Fitted::fit(method, &train, derive_seed(seed, 1 + m as u64), Some(spec))?;
        for (study, d, q0) in &studies {
            let q_hat = fitted.predict(d, &grid.taus)?;
            for j in 0..grid.taus.len() {
                let biases = q_hat.iter().zip(q0).map(|(qh, qt)| qh[j] - qt[j]).collect();
                out.push((
                    (sc, m, *study, j),
                    BiasSample {
                        replicate: r,
                        biases,
                    },
                ));
            }
        }
    }
    Ok(out)
}

/// Runs every replicate of every scenario and aggregates the biases.
///
/// Replicates are independent jobs with pre-assigned seeds; the outcome is
/// identical for any number of worker threads.
pub fn run_simulation(grid: &SimulationGrid) -> Result<SimulationOutcome> {
    grid.validate()?;
    let jobs: Vec<(usize, usize)> = (0..grid.scenarios.len())
        .flat_map(|sc| (0..grid.replicates).map(move |r| (sc, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(sc, r)| {
            run_replicate(grid, sc, r).map_err(|e| Error::Replicate {
                scenario: grid.scenarios[sc].to_string(),
                replicate: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut grouped: BTreeMap<SampleKey, Vec<BiasSample>> = BTreeMap::new();
    for (key, sample) in results.into_iter().flatten() {
        grouped.entry(key).or_default().push(sample);
    }

    let mut reports = Vec::new();
    let mut biases = Vec::new();
    // rows ordered by study, then scenario, method, τ
    let mut keys: Vec<&SampleKey> = grouped.keys().collect();
    keys.sort_by_key(|&&(sc, m, study, j)| (study, sc, m, j));
    for key in keys {
        let (sc, m, study, j) = *key;
        let samples = &grouped[key];
        let scenario = grid.scenarios[sc];
        let method = grid.methods[m].name().to_string();
        let tau = grid.taus[j];
        let metrics = aggregate(samples)?;
        reports.push(MetricsReport {
            model: scenario.model,
            error: scenario.error,
            t: scenario.t_train,
            tau,
            method: method.clone(),
            study,
            mbias: metrics.mbias,
            sdbias: metrics.sdbias,
            mse: metrics.mse,
            r: metrics.replicates,
        });
        let mut sorted: Vec<&BiasSample> = samples.iter().collect();
        sorted.sort_by_key(|s| s.replicate);
        biases.extend(sorted.into_iter().map(|s| BiasRecord {
            model: scenario.model,
            error: scenario.error,
            t: scenario.t_train,
            tau,
            method: method.clone(),
            study,
            replicate: s.replicate,
            bias: s.mean(),
        }));
    }
    Ok(SimulationOutcome { reports, biases })
}

/// Writes metrics rows as CSV:
/// `model,error,T,tau,method,mbias,sdbias,mse,R` (empty `sdbias` when `R = 1`).
pub fn write_metrics_csv<'a, W: Write>(
    rows: impl IntoIterator<Item = &'a MetricsReport>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model", "error", "T", "tau", "method", "mbias", "sdbias", "mse", "R",
    ])?;
    for r in rows {
        w.write_record([
            r.model.to_string(),
            r.error.to_string(),
            r.t.to_string(),
            r.tau.to_string(),
            r.method.clone(),
            r.mbias.to_string(),
            r.sdbias.map(|v| v.to_string()).unwrap_or_default(),
            r.mse.to_string(),
            r.r.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<metrics csv>", e))?;
    Ok(())
}

#[derive(Serialize)]
struct VersionedReport<'a, T: Serialize> {
    schema_version: u32,
    #[serde(flatten)]
    body: &'a T,
}

/// JSON variant of the full outcome, tagged with [`REPORT_SCHEMA_VERSION`].
pub fn write_outcome_json<W: Write>(outcome: &SimulationOutcome, out: W) -> Result<()> {
    serde_json::to_writer_pretty(
        out,
        &VersionedReport {
            schema_version: REPORT_SCHEMA_VERSION,
            body: outcome,
        },
    )?;
    Ok(())
}

/// Raw per-replicate biases:
/// `model,error,T,tau,method,study,replicate,bias`.
pub fn write_biases_csv<W: Write>(biases: &[BiasRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "model",
        "error",
        "T",
        "tau",
        "method",
        "study",
        "replicate",
        "bias",
    ])?;
    for b in biases {
        w.write_record([
            b.model.to_string(),
            b.error.to_string(),
            b.t.to_string(),
            b.tau.to_string(),
            b.method.clone(),
            b.study.to_string(),
            b.replicate.to_string(),
            b.bias.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<bias csv>", e))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub split: Study,
    pub method: String,
    pub tau: f64,
    pub theta: f64,
}

/// Quantile predictions of one method on one split, aligned with `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    pub split: Study,
    pub method: String,
    pub taus: Vec<f64>,
    pub t: Vec<usize>,
    pub y: Vec<f64>,
    pub q: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageOutcome {
    pub rows: Vec<CoverageRow>,
    pub predictions: Vec<PredictionTable>,
    pub n_train: usize,
}

/// Chronological train/test coverage study on an observed series.
///
/// The first `round(train_frac · n)` observations form the training block;
/// test pairs take their lags from wherever they fall, including the end of
/// the training block.
pub fn run_coverage(
    series: &Series,
    train_frac: f64,
    p: usize,
    taus: &[f64],
    methods: &[Method],
    seed: u64,
) -> Result<CoverageOutcome> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::param(format!(
            "train fraction {train_frac} must lie in (0, 1)"
        )));
    }
    taus.iter().try_for_each(|&t| check_tau(t))?;
    let n_train = (train_frac * series.len() as f64).round() as usize;
    if n_train <= p + 1 || n_train >= series.len() {
        return Err(Error::param(format!(
            "train fraction {train_frac} leaves {n_train} of {} observations for training",
            series.len()
        )));
    }
    let data = embed(series, p)?;
    let split_at = data.t_index().partition_point(|&t| t <= n_train);
    let train = data.slice(0..split_at);
    let test = data.slice(split_at..data.len());

    let mut rows = Vec::new();
    let mut predictions = Vec::new();
    for (m, method) in methods.iter().enumerate() {
        let fitted = Fitted::fit(method, &train, derive_seed(seed, m as u64), None)?;
        for (split, d) in [(Study::Train, &train), (Study::Test, &test)] {
            let q = fitted.predict(d, taus)?;
            for (j, &tau) in taus.iter().enumerate() {
                let col: Vec<f64> = q.iter().map(|row| row[j]).collect();
                rows.push(CoverageRow {
                    split,
                    method: method.name().to_string(),
                    tau,
                    theta: empirical_coverage(&col, d.responses())?,
                });
            }
            predictions.push(PredictionTable {
                split,
                method: method.name().to_string(),
                taus: taus.to_vec(),
                t: d.t_index().to_vec(),
                y: d.responses().to_vec(),
                q,
            });
        }
    }
    Ok(CoverageOutcome {
        rows,
        predictions,
        n_train,
    })
}

/// Coverage table CSV: `split,method,tau,theta`.
pub fn write_coverage_csv<W: Write>(rows: &[CoverageRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["split", "method", "tau", "theta"])?;
    for r in rows {
        w.write_record([
            r.split.to_string(),
            r.method.clone(),
            r.tau.to_string(),
            r.theta.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<coverage csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(r: usize, b: &[f64]) -> BiasSample {
        BiasSample {
            replicate: r,
            biases: b.to_vec(),
        }
    }

    #[test]
    fn metric_examples() {
        let zeros = [sample(0, &[0.0; 4]), sample(1, &[0.0; 4])];
        assert_eq!(mbias_sdbias_mse(&zeros).unwrap(), (0.0, 0.0, 0.0));

        let pm = [sample(0, &[1.0, 1.0, 1.0]), sample(1, &[-1.0, -1.0, -1.0])];
        let (m, sd, mse) = mbias_sdbias_mse(&pm).unwrap();
        assert_eq!(m, 0.0);
        assert!((sd - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(mse, 1.0);

        let single = [sample(0, &[1.0, -1.0])];
        assert!(matches!(
            mbias_sdbias_mse(&single),
            Err(Error::TooFewReplicates { needed: 2, got: 1 })
        ));
        let m = aggregate(&single).unwrap();
        assert_eq!((m.mbias, m.mse, m.sdbias), (0.0, 1.0, None));
    }

    #[test]
    fn aggregation_ignores_replicate_order() {
        let samples: Vec<BiasSample> = (0..7)
            .map(|r| {
                sample(
                    r,
                    &[
                        0.1 * r as f64,
                        0.37 - r as f64 * 0.011,
                        1e-3 * (r * r) as f64,
                    ],
                )
            })
            .collect();
        let mut rev = samples.clone();
        rev.reverse();
        rev.swap(1, 4);
        assert_eq!(aggregate(&samples).unwrap(), aggregate(&rev).unwrap());
    }

    #[test]
    fn coverage_examples() {
        let ys = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_coverage(&[5.0; 4], &ys).unwrap(), 1.0);
        assert_eq!(empirical_coverage(&[0.0; 4], &ys).unwrap(), 0.0);
        assert_eq!(
            empirical_coverage(&[1.0, 1.0, 4.0, 4.0], &ys).unwrap(),
            0.75
        );
        assert!(matches!(
            empirical_coverage(&[1.0], &ys),
            Err(Error::LengthMismatch(1, 4))
        ));
    }

    #[test]
    fn oracle_method_has_zero_error() {
        let grid = SimulationGrid {
            replicates: 1,
            ..SimulationGrid::full(100, 20, 1, vec![Method::Oracle])
        };
        let out = run_simulation(&grid).unwrap();
        assert_eq!(out.reports.len(), 8 * 3 * 2);
        for r in &out.reports {
            assert_eq!((r.mbias, r.mse, r.sdbias), (0.0, 0.0, None));
        }
    }

    #[test]
    fn oracle_coverage_is_tau() {
        let spec = DgpSpec::new(DgpModel::C, ErrorDist::Laplace);
        let d = embed(&spec.simulate(100_002, 200, 5).unwrap(), 2).unwrap();
        for tau in [0.1, 0.5, 0.9] {
            let q: Vec<f64> = d
                .rows()
                .map(|x| spec.true_quantile(x, tau).unwrap())
                .collect();
            let c = empirical_coverage(&q, d.responses()).unwrap();
            assert!((c - tau).abs() < 0.01);
        }
    }

    fn small_grid() -> SimulationGrid {
        let cfg = ForestConfig {
            num_trees: 20,
            ..ForestConfig::default()
        };
        SimulationGrid {
            scenarios: vec![Scenario {
                model: DgpModel::B,
                error: ErrorDist::Normal,
                t_train: 150,
            }],
            t_test: 30,
            taus: vec![0.1, 0.5, 0.9],
            replicates: 3,
            seed: 9,
            burn_in: 50,
            methods: vec![Method::Tsqrf(cfg), Method::Wnw(WnwConfig::default())],
        }
    }

    #[test]
    fn simulation_is_deterministic_and_sane() {
        let grid = small_grid();
        let a = run_simulation(&grid).unwrap();
        let b = run_simulation(&grid).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.reports.len(), 2 * 2 * 3);
        for r in &a.reports {
            assert!(r.mse >= r.mbias * r.mbias * (1.0 - 1e-12) || r.mse >= 0.0);
            assert!(r.sdbias.unwrap() >= 0.0);
        }
        let mut buf = Vec::new();
        write_metrics_csv(a.study(Study::Train), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("model,error,T,tau,method,mbias,sdbias,mse,R\n"));
        assert_eq!(text.lines().count(), 1 + 6);
        let mut json = Vec::new();
        write_outcome_json(&a, &mut json).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&json).unwrap();
        assert_eq!(v["schema_version"], 1);
    }

    #[test]
    fn coverage_pipeline_shape() {
        let spec = DgpSpec::new(DgpModel::B, ErrorDist::Normal);
        let s = spec.simulate(300, 100, 1).unwrap();
        let methods = [
            Method::Tsqrf(ForestConfig {
                num_trees: 20,
                ..ForestConfig::default()
            }),
            Method::Wnw(WnwConfig::default()),
        ];
        let taus = [0.025, 0.1, 0.5, 0.9, 0.975];
        let out = run_coverage(&s, 0.666, 5, &taus, &methods, 3).unwrap();
        assert_eq!(out.rows.len(), 2 * 2 * 5);
        assert_eq!(out.n_train, 200);
        let test = out
            .predictions
            .iter()
            .find(|p| p.split == Study::Test)
            .unwrap();
        assert_eq!(test.t.first(), Some(&201));
        assert_eq!(test.t.len(), 100);
        assert!(run_coverage(&s, 0.666, 5, &taus, &[Method::Oracle], 3).is_err());
        assert!(run_coverage(&s, 1.0, 5, &taus, &methods, 3).is_err());
    }
}

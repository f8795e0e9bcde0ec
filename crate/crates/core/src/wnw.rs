//! Kernel baseline: weighted Nadaraya-Watson estimate of the conditional
//! distribution function, inverted for quantiles.
//!
//! With uniform point weights `p_t = 1/T` and a Gaussian product kernel the
//! estimate is `F̂(y|x) = Σ K_h(x - X_t) 1{Y_t ≤ y} / Σ K_h(x - X_t)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LagDataset;
use crate::error::{Error, Result};
use crate::estimator::{weighted_quantiles, WeightVector};

/// Multipliers of the rule-of-thumb bandwidth tried by cross-validation.
pub const CV_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// `1.06 σ̂_j N^{-1/(4+p)}` per dimension.
    #[default]
    RuleOfThumb,
    Fixed(Vec<f64>),
    /// Leave-one-out pinball loss over [`CV_MULTIPLIERS`] of the rule of
    /// thumb, summed across `taus`.
    CrossValidated {
        taus: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct WnwConfig {
    pub bandwidth: Bandwidth,
}

/// A kernel estimator with resolved bandwidths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WnwModel {
    pub bandwidths: Vec<f64>,
    pub train: LagDataset,
}

pub fn bandwidth_rule_of_thumb(train: &LagDataset) -> Result<Vec<f64>> {
    let n = train.len();
    if n < 2 {
        return Err(Error::param(
            "bandwidth rule of thumb needs at least two points",
        ));
    }
    let p = train.p();
    let scale = 1.06 * (n as f64).powf(-1.0 / (4.0 + p as f64));
    Ok((0..p)
        .map(|j| {
            let mean = train.rows().map(|r| r[j]).sum::<f64>() / n as f64;
            let var = train.rows().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if sd > 0.0 {
                scale * sd
            } else {
                scale
            }
        })
        .collect())
}

impl WnwModel {
    pub fn fit(train: &LagDataset, config: &WnwConfig) -> Result<WnwModel> {
        if train.is_empty() {
            return Err(Error::param("cannot fit on an empty dataset"));
        }
        let bandwidths = match &config.bandwidth {
            Bandwidth::Fixed(h) => {
                if h.len() != train.p() {
                    return Err(Error::DimensionMismatch {
                        expected: train.p(),
                        actual: h.len(),
                    });
                }
                h.clone()
            }
            Bandwidth::RuleOfThumb => bandwidth_rule_of_thumb(train)?,
            Bandwidth::CrossValidated { taus } => cross_validate(train, taus)?,
        };
        if bandwidths.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::param("bandwidths must be strictly positive"));
        }
        Ok(WnwModel {
            bandwidths,
            train: train.clone(),
        })
    }

    pub fn p(&self) -> usize {
        self.train.p()
    }

    /// Kernel weights at `x`, scaled so that the largest is 1 and
    /// normalised to total mass 1. Working in log space keeps the
    /// denominator positive even when every kernel value underflows.
    pub fn weights(&self, x: &[f64]) -> Result<WeightVector> {
        self.weights_excluding(x, None)
    }

    fn weights_excluding(&self, x: &[f64], skip: Option<usize>) -> Result<WeightVector> {
        if x.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                actual: x.len(),
            });
        }
        let log_k: Vec<f64> = self
            .train
            .rows()
            .map(|row| {
                -0.5 * row
                    .iter()
                    .zip(x)
                    .zip(&self.bandwidths)
                    .map(|((xt, xq), h)| ((xq - xt) / h).powi(2))
                    .sum::<f64>()
            })
            .collect();
        let max = log_k
            .iter()
            .enumerate()
            .filter(|(t, _)| Some(*t) != skip)
            .map(|(_, &v)| v)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::EmptyCoverage);
        }
        let raw: Vec<(usize, f64)> = log_k
            .iter()
            .enumerate()
            .filter(|(t, _)| Some(*t) != skip)
            .map(|(t, &v)| (t, (v - max).exp()))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let denom: f64 = raw.iter().map(|&(_, w)| w).sum();
        Ok(WeightVector {
            weights: raw.into_iter().map(|(t, w)| (t, w / denom)).collect(),
            total: 1.0,
        })
    }

    /// `F̂(y | x)`.
    pub fn cdf(&self, x: &[f64], y: f64) -> Result<f64> {
        let w = self.weights(x)?;
        let ys = self.train.responses();
        let num: f64 = w
            .weights
            .iter()
            .filter(|&&(t, _)| ys[t] <= y)
            .map(|&(_, v)| v)
            .sum();
        let den: f64 = w.weights.iter().map(|&(_, v)| v).sum();
        Ok((num / den).clamp(0.0, 1.0))
    }

    /// Smallest training response with `F̂(y | x) ≥ τ`, for each `τ`.
    pub fn quantiles(&self, x: &[f64], taus: &[f64]) -> Result<Vec<f64>> {
        let w = self.weights(x)?;
        weighted_quantiles(&w, self.train.responses(), taus)
    }

    pub fn quantile(&self, x: &[f64], tau: f64) -> Result<f64> {
        Ok(self.quantiles(x, &[tau])?[0])
    }

    pub fn predict(&self, queries: &[Vec<f64>], taus: &[f64]) -> Vec<Result<Vec<f64>>> {
        queries
            .par_iter()
            .map(|x| self.quantiles(x, taus))
            .collect()
    }
}

pub fn wnw_cdf(train: &LagDataset, x: &[f64], y: f64, config: &WnwConfig) -> Result<f64> {
    WnwModel::fit(train, config)?.cdf(x, y)
}

pub fn wnw_quantile(train: &LagDataset, x: &[f64], tau: f64, config: &WnwConfig) -> Result<f64> {
    WnwModel::fit(train, config)?.quantile(x, tau)
}

pub fn pinball_loss(y: f64, q: f64, tau: f64) -> f64 {
    let u = y - q;
    if u >= 0.0 {
        tau * u
    } else {
        (tau - 1.0) * u
    }
}

fn cross_validate(train: &LagDataset, taus: &[f64]) -> Result<Vec<f64>> {
    if train.len() < 3 {
        return Err(Error::param("cross-validation needs at least three points"));
    }
    if taus.is_empty() {
        return Err(Error::param(
            "cross-validation needs at least one quantile level",
        ));
    }
    let base = bandwidth_rule_of_thumb(train)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mult in CV_MULTIPLIERS {
        let model = WnwModel {
            bandwidths: base.iter().map(|h| h * mult).collect(),
            train: train.clone(),
        };
        let losses = (0..train.len())
            .into_par_iter()
            .map(|t| {
                let w = model.weights_excluding(train.x(t), Some(t))?;
                let qs = weighted_quantiles(&w, train.responses(), taus)?;
                Ok(qs
                    .iter()
                    .zip(taus)
                    .map(|(&q, &tau)| pinball_loss(train.y(t), q, tau))
                    .sum::<f64>())
            })
            .collect::<Result<Vec<f64>>>()?;
        let loss: f64 = losses.iter().sum();
        if best.as_ref().is_none_or(|(l, _)| loss < *l) {
            best = Some((loss, model.bandwidths));
        }
    }
    Ok(best.expect("at least one multiplier").1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(xs: &[f64], ys: &[f64]) -> LagDataset {
        LagDataset::from_rows(
            1,
            xs.iter().map(|&x| vec![x]).collect(),
            ys.to_vec(),
            (1..=xs.len()).collect(),
        )
        .unwrap()
    }

    fn fixed(h: f64, p: usize) -> WnwConfig {
        WnwConfig {
            bandwidth: Bandwidth::Fixed(vec![h; p]),
        }
    }

    #[test]
    fn single_pair_is_indicator() {
        let d = one_d(&[0.3], &[2.0]);
        for x in [-5.0, 0.3, 8.0] {
            assert_eq!(wnw_cdf(&d, &[x], 1.9, &fixed(0.5, 1)).unwrap(), 0.0);
            assert_eq!(wnw_cdf(&d, &[x], 2.0, &fixed(0.5, 1)).unwrap(), 1.0);
            for tau in [0.05, 0.5, 0.95] {
                assert_eq!(wnw_quantile(&d, &[x], tau, &fixed(0.5, 1)).unwrap(), 2.0);
            }
        }
    }

    #[test]
    fn huge_bandwidth_gives_empirical_cdf() {
        let xs: Vec<f64> = (0..9).map(|i| i as f64 * 0.7 - 2.0).collect();
        let ys = [4.0, -1.0, 2.0, 7.0, 0.5, 3.0, 6.0, 1.0, 5.0];
        let d = one_d(&xs, &ys);
        let cfg = fixed(1e6, 1);
        for y in [-2.0, 0.0, 2.5, 4.0, 10.0] {
            let ecdf = ys.iter().filter(|&&v| v <= y).count() as f64 / ys.len() as f64;
            assert!((wnw_cdf(&d, &[0.4], y, &cfg).unwrap() - ecdf).abs() < 1e-6);
        }
        let mut sorted = ys.to_vec();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(wnw_quantile(&d, &[0.4], 0.5, &cfg).unwrap(), sorted[4]);
    }

    #[test]
    fn symmetric_pair() {
        let d = one_d(&[-1.0, 1.0], &[1.0, 3.0]);
        assert!((wnw_cdf(&d, &[0.0], 2.0, &fixed(0.8, 1)).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quantile_matches_scan_over_responses() {
        let d = one_d(&[0.0, 0.5, 1.0, 1.5, 2.0], &[3.0, 1.0, 4.0, 1.5, 9.0]);
        let model = WnwModel::fit(&d, &fixed(0.6, 1)).unwrap();
        let mut sorted = d.responses().to_vec();
        sorted.sort_by(f64::total_cmp);
        for x in [-0.5, 0.2, 1.1, 3.0] {
            for tau in [0.1, 0.3, 0.5, 0.7, 0.9] {
                let scan = *sorted
                    .iter()
                    .find(|&&y| model.cdf(&[x], y).unwrap() >= tau)
                    .unwrap();
                assert_eq!(model.quantile(&[x], tau).unwrap(), scan, "x={x} tau={tau}");
            }
        }
    }

    #[test]
    fn rule_of_thumb_values() {
        // sd exactly 1 with N = 100: alternate ±c with c chosen so s = 1
        let c = (99.0f64 / 100.0).sqrt();
        let xs: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { c } else { -c }).collect();
        let d = one_d(&xs, &vec![0.0; 100]);
        let h = bandwidth_rule_of_thumb(&d).unwrap();
        assert!((h[0] - 1.06 * 100f64.powf(-0.2)).abs() < 1e-12);
        assert!((h[0] - 0.421_99).abs() < 1e-5);

        let constant = one_d(&[2.0; 10], &[0.0; 10]);
        let h = bandwidth_rule_of_thumb(&constant).unwrap();
        assert!((h[0] - 1.06 * 10f64.powf(-0.2)).abs() < 1e-12);

        let scaled = one_d(
            &xs.iter().map(|x| x * 3.5).collect::<Vec<_>>(),
            &vec![0.0; 100],
        );
        let hs = bandwidth_rule_of_thumb(&scaled).unwrap();
        assert!((hs[0] - 3.5 * 1.06 * 100f64.powf(-0.2)).abs() < 1e-12);

        assert!(bandwidth_rule_of_thumb(&one_d(&[1.0], &[1.0])).is_err());
    }

    #[test]
    fn locality_as_bandwidth_shrinks() {
        let d = one_d(&[0.0, 0.1, 0.2, 0.3], &[5.0, 1.0, 2.0, 3.0]);
        let model = WnwModel::fit(&d, &fixed(1e-4, 1)).unwrap();
        assert!((model.cdf(&[0.1], 0.99).unwrap()).abs() < 1e-12);
        assert!((model.cdf(&[0.1], 1.0).unwrap() - 1.0).abs() < 1e-12);
        // far outside the data the log-space weights still normalise
        assert_eq!(model.quantile(&[1e6], 0.5).unwrap(), 3.0);
    }

    #[test]
    fn cdf_valid_and_quantile_monotone() {
        let xs: Vec<f64> = (0..30).map(|i| (i as f64 * 0.77).sin()).collect();
        let ys: Vec<f64> = (0..30).map(|i| (i as f64 * 1.3).cos() * 2.0).collect();
        let d = one_d(&xs, &ys);
        let model = WnwModel::fit(&d, &WnwConfig::default()).unwrap();
        let mut sorted = ys.clone();
        sorted.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        assert_eq!(model.cdf(&[0.2], sorted[0] - 1.0).unwrap(), 0.0);
        for &y in &sorted {
            let c = model.cdf(&[0.2], y).unwrap();
            assert!(c >= prev);
            prev = c;
        }
        assert!((prev - 1.0).abs() < 1e-12);
        let qs = model.quantiles(&[0.2], &[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        assert!(qs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn cross_validation_picks_a_grid_value() {
        let xs: Vec<f64> = (0..60).map(|i| i as f64 / 10.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin() + 0.01 * x).collect();
        let d = one_d(&xs, &ys);
        let base = bandwidth_rule_of_thumb(&d).unwrap()[0];
        let model = WnwModel::fit(
            &d,
            &WnwConfig {
                bandwidth: Bandwidth::CrossValidated { taus: vec![0.5] },
            },
        )
        .unwrap();
        let ratio = model.bandwidths[0] / base;
        assert!(CV_MULTIPLIERS.iter().any(|m| (m - ratio).abs() < 1e-12));
        // a smooth signal without noise favours a narrow kernel
        assert!(ratio <= 1.0);
    }

    #[test]
    fn rejects_bad_bandwidths() {
        let d = one_d(&[0.0, 1.0], &[0.0, 1.0]);
        assert!(WnwModel::fit(&d, &fixed(0.0, 1)).is_err());
        assert!(WnwModel::fit(&d, &fixed(1.0, 2)).is_err());
    }
}

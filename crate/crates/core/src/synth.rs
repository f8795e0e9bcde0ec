//! Synthetic nonlinear autoregressive paths `Y_t = g(X_t) + ε_t` and their
//! exact conditional quantiles.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Series;
use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 200;

/// The four skeletons `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DgpModel {
    /// `cos(5 y₁) exp(-y₁²)`, a bounded first-order Markov chain.
    A,
    /// Linear AR(2): `0.5 y₁ + 0.4 y₂`.
    B,
    /// Threshold AR(2) switching on `y₁ ≤ 1`.
    C,
    /// Linear AR(5).
    D,
}

impl DgpModel {
    pub const ALL: [DgpModel; 4] = [DgpModel::A, DgpModel::B, DgpModel::C, DgpModel::D];

    pub fn lag_order(self) -> usize {
        match self {
            DgpModel::A => 1,
            DgpModel::B | DgpModel::C => 2,
            DgpModel::D => 5,
        }
    }
}

impl fmt::Display for DgpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DgpModel::A => "a",
            DgpModel::B => "b",
            DgpModel::C => "c",
            DgpModel::D => "d",
        };
        f.pad(s)
    }
}

impl FromStr for DgpModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "a" => Ok(DgpModel::A),
            "b" => Ok(DgpModel::B),
            "c" => Ok(DgpModel::C),
            "d" => Ok(DgpModel::D),
            other => Err(Error::param(format!(
                "unknown model `{other}` (expected a|b|c|d)"
            ))),
        }
    }
}

/// Innovation distribution. Both are zero-mean; the normal has variance 1,
/// the Laplace (scale 1, density `½e^{-|x|}`) has variance 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorDist {
    Normal,
    Laplace,
}

impl ErrorDist {
    pub fn variance(self) -> f64 {
        match self {
            ErrorDist::Normal => 1.0,
            ErrorDist::Laplace => 2.0,
        }
    }

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            ErrorDist::Normal => rng.sample(StandardNormal),
            ErrorDist::Laplace => {
                // inverse CDF on u ∈ (-½, ½)
                let u: f64 = rng.random::<f64>() - 0.5;
                let mag = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
                -u.signum() * mag.ln()
            }
        }
    }

    /// `F_ε^{-1}(τ)`.
    pub fn quantile(self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(match self {
            ErrorDist::Normal => normal_quantile(tau),
            ErrorDist::Laplace => {
                if tau < 0.5 {
                    (2.0 * tau).ln()
                } else {
                    -(2.0 * (1.0 - tau)).ln()
                }
            }
        })
    }
}

impl fmt::Display for ErrorDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ErrorDist::Normal => "normal",
            ErrorDist::Laplace => "laplace",
        })
    }
}

impl FromStr for ErrorDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Ok(ErrorDist::Normal),
            "laplace" => Ok(ErrorDist::Laplace),
            other => Err(Error::param(format!(
                "unknown error distribution `{other}` (expected normal|laplace)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DgpSpec {
    pub model: DgpModel,
    pub error: ErrorDist,
}

impl DgpSpec {
    pub fn new(model: DgpModel, error: ErrorDist) -> Self {
        DgpSpec { model, error }
    }

    pub fn p(&self) -> usize {
        self.model.lag_order()
    }

    /// Skeleton value `g(x)` for the lag vector `x = (y_{t-1}, …, y_{t-p})`.
    pub fn g(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                actual: x.len(),
            });
        }
        Ok(self.g_unchecked(x))
    }

    fn g_unchecked(&self, x: &[f64]) -> f64 {
        match self.model {
            DgpModel::A => (5.0 * x[0]).cos() * (-x[0] * x[0]).exp(),
            DgpModel::B => 0.5 * x[0] + 0.4 * x[1],
            DgpModel::C => {
                if x[0] <= 1.0 {
                    2.9 - 0.4 * x[0] - 0.1 * x[1]
                } else {
                    -1.5 + 0.2 * x[0] + 0.3 * x[1]
                }
            }
            DgpModel::D => 0.7 * x[0] - 0.6 * x[1] + 0.4 * x[2] - 0.2 * x[3] + 0.1 * x[4],
        }
    }

    /// `q₀(x) = g(x) + F_ε^{-1}(τ)`.
    pub fn true_quantile(&self, x: &[f64], tau: f64) -> Result<f64> {
        Ok(self.g(x)? + self.error.quantile(tau)?)
    }

    /// Iterates the recursion from an explicit lag state (most recent first)
    /// using the given innovations; returns one value per innovation.
    pub fn propagate(&self, history: &[f64], innovations: &[f64]) -> Result<Vec<f64>> {
        let p = self.p();
        if history.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: history.len(),
            });
        }
        let mut state = history.to_vec();
        let mut out = Vec::with_capacity(innovations.len());
        for &e in innovations {
            let y = self.g_unchecked(&state) + e;
            state.rotate_right(1);
            state[0] = y;
            out.push(y);
        }
        Ok(out)
    }

    /// Simulates `length` values after discarding `burn_in`, starting from a
    /// zero lag state. Fully determined by `seed`.
    pub fn simulate(&self, length: usize, burn_in: usize, seed: u64) -> Result<Series> {
        if length == 0 {
            return Err(Error::param("path length must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let innovations: Vec<f64> = (0..burn_in + length)
            .map(|_| self.error.sample(&mut rng))
            .collect();
        let mut path = self.propagate(&vec![0.0; self.p()], &innovations)?;
        path.drain(..burn_in);
        let series = Series::new(path)?;
        Ok(series.with_label(format!("{}-{}", self.model, self.error)))
    }
}

impl fmt::Display for DgpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.model, self.error)
    }
}

pub fn simulate_path(spec: &DgpSpec, length: usize, burn_in: usize, seed: u64) -> Result<Series> {
    spec.simulate(length, burn_in, seed)
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "quantile level {tau} must lie in (0, 1)"
        )))
    }
}

/// Standard normal quantile (Wichura's AS 241, about 1e-16 relative accuracy).
#[allow(clippy::excessive_precision)]
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_812_8e4) * r
            + 6.726_577_092_700_870_1e4)
            * r
            + 4.592_195_393_154_987_1e4)
            * r
            + 1.373_169_376_550_946_1e4)
            * r
            + 1.971_590_950_306_551_4e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_6;
        let den = ((((((5.226_495_278_852_854_6e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271_1e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751_1e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091_1e1)
            * r
            + 1.0;
        return q * num / den;
    }
    let tail = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-tail.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506_2e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_6)
            * r
            + 5.769_497_221_460_691_4)
            * r
            + 4.630_337_846_156_545_3)
            * r
            + 1.423_437_110_749_683_6;
        let den = ((((((1.050_750_071_644_416_8e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_7e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_758_8)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_3e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114_4)
            * r
            + 6.657_904_643_501_103_8;
        let den = ((((((2.044_263_103_389_939_8e-15 * r + 1.421_511_758_316_445_9e-7) * r
            + 1.846_318_317_510_054_7e-5)
            * r
            + 7.868_691_311_456_132_6e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_879_4e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

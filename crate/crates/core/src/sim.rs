//! Data-generating models with closed-form truth, and Monte Carlo drivers
//! for interval coverage and the regression estimator.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::boot::{confidence_band, CiRequest, Method};
use crate::csreg::{bootstrap_sse_ci, fit_sse, wald_variance, RegressionSample, SearchConfig, WaldBandwidths};
use crate::data::{CurrentStatusSample, RngSpec, Support};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::smle::KnownTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthModel {
    /// Event and observation times uniform on `[0, 2]`.
    Uniform2,
    /// Event times exponential truncated to `[0, 2]`, observation times
    /// uniform on `[0, 2]`.
    ExpTrunc2,
    /// `beta = 0.5`, `T, X ~ U(0, 2)`, error density
    /// `384 (e - 3/8)(5/8 - e)` on `[3/8, 5/8]`.
    RegModel1,
    /// `beta = 1`, `T`, `X` and the error standard normal.
    RegModel2,
}

const EXP_MASS: f64 = 1.0 - 0.135_335_283_236_612_7;

fn std_normal() -> Normal {
    Normal::standard()
}

impl TruthModel {
    pub fn name(self) -> &'static str {
        match self {
            TruthModel::Uniform2 => "uniform2",
            TruthModel::ExpTrunc2 => "exp_trunc2",
            TruthModel::RegModel1 => "reg_model1",
            TruthModel::RegModel2 => "reg_model2",
        }
    }

    pub fn is_regression(self) -> bool {
        matches!(self, TruthModel::RegModel1 | TruthModel::RegModel2)
    }

    /// True regression coefficient.
    pub fn beta0(self) -> Option<f64> {
        match self {
            TruthModel::RegModel1 => Some(0.5),
            TruthModel::RegModel2 => Some(1.0),
            _ => None,
        }
    }
}

impl fmt::Display for TruthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TruthModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "uniform2" => TruthModel::Uniform2,
            "exp_trunc2" => TruthModel::ExpTrunc2,
            "reg_model1" => TruthModel::RegModel1,
            "reg_model2" => TruthModel::RegModel2,
            other => return Err(Error::InvalidRequest(format!("unknown model '{other}'"))),
        })
    }
}

/// For the regression models the "event time" is the error and the
/// observation density is that of the residual `T - beta X`.
impl KnownTruth for TruthModel {
    fn cdf(&self, t: f64) -> f64 {
        match self {
            TruthModel::Uniform2 => (t / 2.0).clamp(0.0, 1.0),
            TruthModel::ExpTrunc2 => ((1.0 - (-t.clamp(0.0, 2.0)).exp()) / EXP_MASS).min(1.0),
            TruthModel::RegModel1 => {
                let s = ((t - 0.375) / 0.25).clamp(0.0, 1.0);
                s * s * (3.0 - 2.0 * s)
            }
            TruthModel::RegModel2 => std_normal().cdf(t),
        }
    }

    fn density(&self, t: f64) -> f64 {
        match self {
            TruthModel::Uniform2 if (0.0..=2.0).contains(&t) => 0.5,
            TruthModel::ExpTrunc2 if (0.0..=2.0).contains(&t) => (-t).exp() / EXP_MASS,
            TruthModel::RegModel1 if (0.375..=0.625).contains(&t) => 384.0 * (t - 0.375) * (0.625 - t),
            TruthModel::RegModel2 => std_normal().pdf(t),
            _ => 0.0,
        }
    }

    fn density_derivative(&self, t: f64) -> f64 {
        match self {
            TruthModel::ExpTrunc2 if (0.0..=2.0).contains(&t) => -(-t).exp() / EXP_MASS,
            TruthModel::RegModel1 if (0.375..=0.625).contains(&t) => 384.0 * (1.0 - 2.0 * t),
            TruthModel::RegModel2 => -t * std_normal().pdf(t),
            _ => 0.0,
        }
    }

    fn observation_density(&self, t: f64) -> f64 {
        match self {
            TruthModel::Uniform2 | TruthModel::ExpTrunc2 => {
                if (0.0..=2.0).contains(&t) {
                    0.5
                } else {
                    0.0
                }
            }
            TruthModel::RegModel1 => {
                if (-1.0..0.0).contains(&t) {
                    (1.0 + t) / 2.0
                } else if (0.0..=1.0).contains(&t) {
                    0.5
                } else if t > 1.0 && t <= 2.0 {
                    (2.0 - t) / 2.0
                } else {
                    0.0
                }
            }
            TruthModel::RegModel2 => std_normal().pdf(t / 2f64.sqrt()) / 2f64.sqrt(),
        }
    }

    fn support(&self) -> Support {
        match self {
            TruthModel::Uniform2 | TruthModel::ExpTrunc2 => Support { lo: 0.0, hi: 2.0 },
            TruthModel::RegModel1 => Support { lo: 0.375, hi: 0.625 },
            TruthModel::RegModel2 => Support { lo: -10.0, hi: 10.0 },
        }
    }
}

const TABLE_KNOTS: usize = 4096;

/// Quantiles of `3s^2 - 2s^3` at `k / 4096`.
fn quartic_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        (0..=TABLE_KNOTS)
            .map(|k| invert_smoothstep(k as f64 / TABLE_KNOTS as f64, 0.0, 1.0))
            .collect()
    })
}

fn invert_smoothstep(p: f64, mut a: f64, mut b: f64) -> f64 {
    while b - a > 1e-10 {
        let m = 0.5 * (a + b);
        if m * m * (3.0 - 2.0 * m) < p {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn reg_model1_error(p: f64) -> f64 {
    let table = quartic_table();
    let k = ((p * TABLE_KNOTS as f64) as usize).min(TABLE_KNOTS - 1);
    0.375 + 0.25 * invert_smoothstep(p, table[k] - 1e-10, table[k + 1] + 1e-10).clamp(0.0, 1.0)
}

/// One latent event time (or regression error) drawn by inversion.
pub fn draw_event<R: Rng + ?Sized>(model: TruthModel, rng: &mut R) -> f64 {
    match model {
        TruthModel::Uniform2 => 2.0 * rng.random::<f64>(),
        TruthModel::ExpTrunc2 => -(1.0 - rng.random::<f64>() * EXP_MASS).ln(),
        TruthModel::RegModel1 => reg_model1_error(rng.random::<f64>()),
        TruthModel::RegModel2 => rng.sample(StandardNormal),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSample {
    CurrentStatus(CurrentStatusSample),
    Regression(RegressionSample),
}

pub fn sample_current_status<R: Rng + ?Sized>(model: TruthModel, n: usize, rng: &mut R) -> Result<CurrentStatusSample> {
    if model.is_regression() {
        return Err(Error::InvalidRequest(format!("{model} is a regression model")));
    }
    let pairs: Vec<(f64, u8)> = (0..n)
        .map(|_| {
            let t = 2.0 * rng.random::<f64>();
            let x = draw_event(model, rng);
            (t, (x <= t) as u8)
        })
        .collect();
    CurrentStatusSample::ingest(&pairs)?.with_support(model.support())
}

pub fn sample_regression<R: Rng + ?Sized>(model: TruthModel, n: usize, rng: &mut R) -> Result<RegressionSample> {
    let Some(beta) = model.beta0() else {
        return Err(Error::InvalidRequest(format!("{model} is not a regression model")));
    };
    let recs: Vec<(f64, f64, u8)> = (0..n)
        .map(|_| {
            let (t, x) = match model {
                TruthModel::RegModel1 => (2.0 * rng.random::<f64>(), 2.0 * rng.random::<f64>()),
                _ => (rng.sample(StandardNormal), rng.sample(StandardNormal)),
            };
            let e = draw_event(model, rng);
            (t, x, (beta * x + e <= t) as u8)
        })
        .collect();
    RegressionSample::new(&recs)
}

pub fn sample_model<R: Rng + ?Sized>(model: TruthModel, n: usize, rng: &mut R) -> Result<ModelSample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if model.is_regression() {
        sample_regression(model, n, rng).map(ModelSample::Regression)
    } else {
        sample_current_status(model, n, rng).map(ModelSample::CurrentStatus)
    }
}

const KEY_SAMPLE: u64 = 100;

/// Largest tolerated share of failed runs.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportPoint {
    pub t: f64,
    pub noncoverage: f64,
    pub avg_length: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub model: TruthModel,
    pub n: usize,
    pub runs: usize,
    pub failed: usize,
    pub b: usize,
    pub alpha: f64,
    pub method: Method,
    pub bandwidth_rule: String,
    pub bias_rule: String,
    pub seed: u64,
    pub wall_time: f64,
    pub points: Vec<ReportPoint>,
}

impl ExperimentReport {
    pub fn point(&self, t: f64) -> Option<&ReportPoint> {
        self.points.iter().find(|p| (p.t - t).abs() < 1e-12)
    }

    /// Comment header and `t,noncoverage,avg_length,n,N,B,method` rows.
    /// Wall time is left out so reruns are byte-identical.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# model={} n={} N={} B={} alpha={} method={} bandwidth={} bias={} seed={} failed={}",
            self.model,
            self.n,
            self.runs,
            self.b,
            self.alpha,
            self.method,
            self.bandwidth_rule,
            self.bias_rule,
            self.seed,
            self.failed
        )?;
        writeln!(out, "t,noncoverage,avg_length,n,N,B,method")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.t, p.noncoverage, p.avg_length, self.n, self.runs, self.b, self.method
            )?;
        }
        Ok(())
    }
}

fn check_failures(failed: usize, total: usize, first: Option<String>) -> Result<()> {
    if failed as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::ExperimentFailed { failed, total, first: first.unwrap_or_default() });
    }
    Ok(())
}

/// `runs` independent samples of size `n`, one band each; per grid point
/// the share of bands missing `F_0(t)` and the mean band length. Run `r`
/// uses `RngSpec::new(seed).derive(r)`. Failed runs are excluded and
/// counted; more than 5% failures is an error.
pub fn run_coverage_experiment(
    model: TruthModel,
    n: usize,
    runs: usize,
    req: &CiRequest,
    seed: u64,
) -> Result<ExperimentReport> {
    if model.is_regression() {
        return Err(Error::InvalidRequest(format!("{model} is a regression model")));
    }
    if n == 0 || runs == 0 {
        return Err(Error::InvalidRequest("n and N must be at least 1".into()));
    }
    req.grid.check_within(model.support())?;
    let start = Instant::now();
    let master = RngSpec::new(seed);
    let inner = CiRequest { workers: None, ..req.clone() };
    let bands = map_indexed(req.workers, runs, |r| {
        let rng = master.derive(r as u64);
        let sample = sample_current_status(model, n, &mut rng.derive(KEY_SAMPLE).stream(0))?;
        confidence_band(&sample, &inner, &rng)
    })?;

    let m = req.grid.len();
    let mut misses = vec![0usize; m];
    let mut lengths = vec![0.0; m];
    let mut failed = 0;
    let mut first = None;
    for band in bands {
        match band {
            Ok(band) => {
                for (j, p) in band.points.iter().enumerate() {
                    if !p.covers(model.cdf(p.t)) {
                        misses[j] += 1;
                    }
                    lengths[j] += p.length();
                }
            }
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    check_failures(failed, runs, first)?;
    let ok = (runs - failed) as f64;
    let points = req
        .grid
        .points()
        .iter()
        .enumerate()
        .map(|(j, &t)| ReportPoint { t, noncoverage: misses[j] as f64 / ok, avg_length: lengths[j] / ok })
        .collect();
    Ok(ExperimentReport {
        model,
        n,
        runs,
        failed,
        b: req.b,
        alpha: req.alpha,
        method: req.method,
        bandwidth_rule: format!("{:?}", req.bandwidth).replace(' ', ""),
        bias_rule: format!("{:?}", req.bias).replace(' ', ""),
        seed,
        wall_time: start.elapsed().as_secs_f64(),
        points,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionReport {
    pub model: TruthModel,
    pub n: usize,
    pub runs: usize,
    pub failed: usize,
    pub b: usize,
    pub alpha: f64,
    pub seed: u64,
    pub wall_time: f64,
    pub mean: f64,
    pub n_var: f64,
    pub n_mse: f64,
    /// Runs whose point estimate had no zero-crossing.
    pub no_crossing: usize,
    pub bootstrap_coverage: Option<f64>,
    pub bootstrap_length: Option<f64>,
    /// Runs where the Wald plug-ins could not be formed; excluded from the
    /// Wald statistics.
    pub wald_failed: usize,
    pub wald_coverage: f64,
    pub wald_length: f64,
    pub estimates: Vec<f64>,
}

impl RegressionReport {
    /// Long-format `stat,value` rows after a comment header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# model={} n={} N={} B={} alpha={} seed={} failed={}",
            self.model, self.n, self.runs, self.b, self.alpha, self.seed, self.failed
        )?;
        writeln!(out, "stat,value")?;
        let mut rows: Vec<(&str, f64)> = vec![
            ("mean", self.mean),
            ("n_var", self.n_var),
            ("n_mse", self.n_mse),
            ("no_crossing", self.no_crossing as f64),
            ("wald_failed", self.wald_failed as f64),
            ("wald_coverage", self.wald_coverage),
            ("wald_length", self.wald_length),
        ];
        if let (Some(c), Some(l)) = (self.bootstrap_coverage, self.bootstrap_length) {
            rows.push(("bootstrap_coverage", c));
            rows.push(("bootstrap_length", l));
        }
        for (k, v) in rows {
            writeln!(out, "{k},{v}")?;
        }
        Ok(())
    }
}

struct RegressionRun {
    beta: f64,
    no_crossing: bool,
    boot: Option<(f64, f64)>,
    wald: Option<(f64, f64)>,
}

/// Simple score estimator over `runs` samples: mean, `n var`, `n MSE`,
/// Wald and (for `b >= 2`) bootstrap interval coverage and length. A run
/// whose Wald plug-ins fail still counts for the other statistics.
pub fn run_regression_experiment(
    model: TruthModel,
    n: usize,
    runs: usize,
    b: usize,
    search: &SearchConfig,
    alpha: f64,
    seed: u64,
    workers: Option<usize>,
) -> Result<RegressionReport> {
    let Some(beta0) = model.beta0() else {
        return Err(Error::InvalidRequest(format!("{model} is not a regression model")));
    };
    if n == 0 || runs == 0 {
        return Err(Error::InvalidRequest("n and N must be at least 1".into()));
    }
    let start = Instant::now();
    let master = RngSpec::new(seed);
    let results = map_indexed(workers, runs, |r| -> Result<RegressionRun> {
        let rng = master.derive(r as u64);
        let sample = sample_regression(model, n, &mut rng.derive(KEY_SAMPLE).stream(0))?;
        let (fit, boot) = if b >= 2 {
            let ci = bootstrap_sse_ci(&sample, search, b, alpha, &rng, None)?;
            (ci.fit.clone(), Some((ci.lower, ci.upper)))
        } else {
            (fit_sse(&sample, search)?, None)
        };
        let wald = wald_variance(&sample, fit.beta_hat, WaldBandwidths::default(), alpha)
            .ok()
            .map(|w| (w.lower, w.upper));
        Ok(RegressionRun { beta: fit.beta_hat, no_crossing: fit.no_crossing, boot, wald })
    })?;

    let mut ok = Vec::new();
    let mut failed = 0;
    let mut first = None;
    for r in results {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => {
                failed += 1;
                first.get_or_insert_with(|| e.to_string());
            }
        }
    }
    check_failures(failed, runs, first)?;
    let k = ok.len() as f64;
    let estimates: Vec<f64> = ok.iter().map(|r| r.beta).collect();
    let mean = estimates.iter().sum::<f64>() / k;
    let var = if ok.len() > 1 {
        estimates.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let mse = estimates.iter().map(|b| (b - beta0).powi(2)).sum::<f64>() / k;
    let covers = |iv: (f64, f64)| (iv.0 <= beta0 && beta0 <= iv.1) as u8 as f64;
    let walds: Vec<(f64, f64)> = ok.iter().filter_map(|r| r.wald).collect();
    let (bootstrap_coverage, bootstrap_length) = if b >= 2 {
        let ivs: Vec<(f64, f64)> = ok.iter().filter_map(|r| r.boot).collect();
        (
            Some(ivs.iter().map(|&iv| covers(iv)).sum::<f64>() / k),
            Some(ivs.iter().map(|iv| iv.1 - iv.0).sum::<f64>() / k),
        )
    } else {
        (None, None)
    };
    Ok(RegressionReport {
        model,
        n,
        runs,
        failed,
        b,
        alpha,
        seed,
        wall_time: start.elapsed().as_secs_f64(),
        mean,
        n_var: n as f64 * var,
        n_mse: n as f64 * mse,
        no_crossing: ok.iter().filter(|r| r.no_crossing).count(),
        bootstrap_coverage,
        bootstrap_length,
        wald_failed: ok.len() - walds.len(),
        wald_coverage: walds.iter().map(|&iv| covers(iv)).sum::<f64>() / walds.len() as f64,
        wald_length: walds.iter().map(|iv| iv.1 - iv.0).sum::<f64>() / walds.len() as f64,
        estimates,
    })
}

//! Bootstrap confidence intervals for the distribution function, data-driven
//! bandwidths and bias estimates.

mod bandwidth;
mod intervals;

pub(crate) use intervals::{normal_quantile, order_statistic};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

pub use bandwidth::{
    bias_direct_estimate, bias_subsample_estimate, default_c_grid, default_subsample_size, select_bandwidth,
    select_derivative_bandwidth, undersmoothed_bandwidth, BandwidthChoice,
};
pub use intervals::{
    bias_corrected_ci, senxu_ci, smooth_smle_ci, studentized_ci, studentized_ci_from_weights, wald_ci,
};

use crate::data::{CurrentStatusSample, Grid, RngSpec, Support};
use crate::error::{Error, Result};
use crate::exec::with_workers;
use crate::kernel::{kernel_constants, Boundary};
use crate::sim::TruthModel;
use crate::smle::KnownTruth;

/// Variance estimator of a Wald interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaldVariance {
    /// Plug-in of the asymptotic variance with a kernel estimate of `g`.
    Density,
    /// Sample variance of the linearised estimator.
    ToySample,
    /// Bootstrap variance of the SMLE.
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Studentized,
    Wald(WaldVariance),
    SenXu,
    SmoothSmle,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Studentized => "studentized",
            Method::Wald(WaldVariance::Density) => "wald1",
            Method::Wald(WaldVariance::ToySample) => "wald2",
            Method::Wald(WaldVariance::Bootstrap) => "wald3",
            Method::SenXu => "senxu",
            Method::SmoothSmle => "smooth_smle",
        }
    }

    /// Whether the interval is built around the SMLE.
    pub fn is_smle_based(&self) -> bool {
        !matches!(self, Method::SenXu)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "studentized" => Method::Studentized,
            "wald1" => Method::Wald(WaldVariance::Density),
            "wald2" => Method::Wald(WaldVariance::ToySample),
            "wald3" => Method::Wald(WaldVariance::Bootstrap),
            "senxu" => Method::SenXu,
            "smooth_smle" => Method::SmoothSmle,
            other => return Err(Error::InvalidRequest(format!("unknown method '{other}'"))),
        })
    }
}

/// How a constant `c` becomes a bandwidth for sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthRate {
    /// `c n^{-1/5}`
    Standard,
    /// `c n^{-1/4}`
    Quarter,
    /// `(c / 3) n^{-1/5}`
    Third,
}

impl BandwidthRate {
    pub fn bandwidth(self, c: f64, n: usize) -> f64 {
        let n = n as f64;
        match self {
            BandwidthRate::Standard => c * n.powf(-0.2),
            BandwidthRate::Quarter => c * n.powf(-0.25),
            BandwidthRate::Third => c / 3.0 * n.powf(-0.2),
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            BandwidthRate::Standard => "n^-1/5",
            BandwidthRate::Quarter => "n^-1/4",
            BandwidthRate::Third => "(1/3)n^-1/5",
        }
    }
}

/// Settings of the m-out-of-n subsampling used for bandwidth and bias
/// estimation. `None` fields take data-dependent defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleConfig {
    pub m: Option<usize>,
    pub b_sub: usize,
    pub c0: Option<f64>,
    pub with_replacement: bool,
}

impl Default for SubsampleConfig {
    fn default() -> Self {
        Self { m: None, b_sub: 500, c0: None, with_replacement: false }
    }
}

impl SubsampleConfig {
    pub fn resolve_m(&self, n: usize) -> Result<usize> {
        let m = self.m.unwrap_or_else(|| default_subsample_size(n));
        if m == 0 || m >= n {
            return Err(Error::InvalidSubsample { m, n });
        }
        Ok(m)
    }

    pub fn resolve_c0(&self, support: Support) -> f64 {
        self.c0.unwrap_or(support.length())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AutoBandwidth {
    /// Candidate constants; defaults to [`default_c_grid`].
    pub c_grid: Option<Vec<f64>>,
    pub rate: BandwidthRate,
    pub subsample: SubsampleConfig,
}

impl Default for AutoBandwidth {
    fn default() -> Self {
        Self { c_grid: None, rate: BandwidthRate::Standard, subsample: SubsampleConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BandwidthRule {
    Fixed(f64),
    Auto(AutoBandwidth),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BiasRule {
    None,
    /// Asymptotic bias of a known model.
    TrueBeta(TruthModel),
    /// Plug-in with a kernel estimate of the density derivative, its
    /// bandwidth chosen by subsampling.
    Direct(SubsampleConfig),
    /// Subsampling estimate of the bias.
    Subsample(SubsampleConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CiRequest {
    pub grid: Grid,
    pub alpha: f64,
    pub b: usize,
    pub bandwidth: BandwidthRule,
    pub method: Method,
    pub bias: BiasRule,
    pub boundary: Boundary,
    pub workers: Option<usize>,
}

impl CiRequest {
    /// 95% studentized intervals with `B = 500`, automatic bandwidth and
    /// boundary reflection.
    pub fn new(grid: Grid) -> Self {
        Self {
            grid,
            alpha: 0.05,
            b: 500,
            bandwidth: BandwidthRule::Auto(AutoBandwidth::default()),
            method: Method::Studentized,
            bias: BiasRule::None,
            boundary: Boundary::Reflect,
            workers: None,
        }
    }

    pub fn validate(&self, sample: &CurrentStatusSample) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidRequest(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        if self.b < 2 {
            return Err(Error::InvalidRequest(format!("B = {} must be at least 2", self.b)));
        }
        if let BandwidthRule::Fixed(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidBandwidth(h));
            }
        }
        if let BandwidthRule::Auto(a) = &self.bandwidth {
            if let Some(g) = &a.c_grid {
                if g.is_empty() || g.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
                    return Err(Error::InvalidRequest("c grid must be nonempty and positive".into()));
                }
            }
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidRequest("worker count must be at least 1".into()));
        }
        if self.boundary == Boundary::Reflect {
            self.grid.check_within(sample.support())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub t: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub bandwidth: f64,
    pub discarded: usize,
    /// Zero-width interval.
    pub degenerate: bool,
}

impl BandPoint {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBand {
    pub points: Vec<BandPoint>,
    pub seed: u64,
    pub b: usize,
    pub method: Method,
}

impl ConfidenceBand {
    /// Writes `t,estimate,lower,upper,bandwidth,discarded` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,estimate,lower,upper,bandwidth,discarded")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                p.t, p.estimate, p.lower, p.upper, p.bandwidth, p.discarded
            )?;
        }
        Ok(())
    }
}

/// Bandwidth used at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedBandwidth {
    pub h: f64,
    /// Selected constant when the rule is automatic.
    pub c_opt: Option<f64>,
    /// Subsample estimates did not depend on `c`.
    pub flagged: bool,
}

const KEY_REPLICATES: u64 = 1;
const KEY_SELECTION: u64 = 2;
const KEY_DERIVATIVE: u64 = 3;
const KEY_SMOOTH: u64 = 4;
const KEY_BIAS: u64 = 5;

/// Per-grid-point bandwidths under the request's rule.
pub fn resolve_bandwidths(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    rng: &RngSpec,
) -> Result<Vec<ResolvedBandwidth>> {
    match &req.bandwidth {
        BandwidthRule::Fixed(h) => {
            Ok(vec![ResolvedBandwidth { h: *h, c_opt: None, flagged: false }; req.grid.len()])
        }
        BandwidthRule::Auto(auto) => {
            let support = sample.support();
            let grid = auto.c_grid.clone().unwrap_or_else(|| default_c_grid(support));
            let choices = bandwidth::select_many(
                sample,
                req.grid.points(),
                &grid,
                &auto.subsample,
                req.boundary,
                &rng.derive(KEY_SELECTION),
                bandwidth::Target::Smle,
            )?;
            Ok(choices
                .into_iter()
                .map(|c| ResolvedBandwidth {
                    h: auto.rate.bandwidth(c.c_opt, sample.n()),
                    c_opt: Some(c.c_opt),
                    flagged: c.flagged,
                })
                .collect())
        }
    }
}

/// Bandwidth of the SMLE that drives smooth resampling.
pub(crate) fn centering_bandwidth(sample: &CurrentStatusSample, req: &CiRequest) -> f64 {
    match &req.bandwidth {
        BandwidthRule::Fixed(h) => *h,
        BandwidthRule::Auto(a) => {
            let c0 = a.subsample.resolve_c0(sample.support());
            BandwidthRate::Standard.bandwidth(c0, sample.n())
        }
    }
}

/// Actual-scale bias per grid point under the request's bias rule.
pub fn resolve_bias(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    bandwidths: &[ResolvedBandwidth],
    rng: &RngSpec,
) -> Result<Vec<f64>> {
    let points = req.grid.points();
    let n = sample.n();
    let c_grid = match &req.bandwidth {
        BandwidthRule::Auto(a) => a.c_grid.clone(),
        BandwidthRule::Fixed(_) => None,
    }
    .unwrap_or_else(|| default_c_grid(sample.support()));
    match &req.bias {
        BiasRule::None => Ok(vec![0.0; points.len()]),
        BiasRule::TrueBeta(model) => {
            let (m2, _) = kernel_constants();
            Ok(points
                .iter()
                .zip(bandwidths)
                .map(|(&t, bw)| bw.h * bw.h * model.density_derivative(t) / 2.0 * m2)
                .collect())
        }
        BiasRule::Direct(cfg) => {
            let choices = bandwidth::select_many(
                sample,
                points,
                &c_grid,
                cfg,
                req.boundary,
                &rng.derive(KEY_DERIVATIVE),
                bandwidth::Target::Derivative,
            )?;
            points
                .iter()
                .zip(bandwidths)
                .zip(choices)
                .map(|((&t, bw), ch)| {
                    let hbar = ch.c_opt * (n as f64).powf(-1.0 / 9.0);
                    bias_direct_estimate(sample, t, bw.h, hbar, req.boundary)
                })
                .collect()
        }
        BiasRule::Subsample(cfg) => {
            let cs: Vec<f64> = bandwidths
                .iter()
                .map(|bw| bw.c_opt.unwrap_or(bw.h * (n as f64).powf(0.2)))
                .collect();
            bandwidth::subsample_bias_many(sample, points, &cs, cfg, req.boundary, &rng.derive(KEY_BIAS))
        }
    }
}

/// Confidence band for the request's method, bandwidth and bias rules.
pub fn confidence_band(sample: &CurrentStatusSample, req: &CiRequest, rng: &RngSpec) -> Result<ConfidenceBand> {
    req.validate(sample)?;
    with_workers(req.workers, || {
        let bws = resolve_bandwidths(sample, req, rng)?;
        let bias = if req.method.is_smle_based() {
            resolve_bias(sample, req, &bws, rng)?
        } else {
            vec![0.0; req.grid.len()]
        };
        let hs: Vec<f64> = bws.iter().map(|b| b.h).collect();
        match req.method {
            Method::Studentized => intervals::studentized(sample, req, &hs, &bias, rng),
            Method::Wald(v) => intervals::wald(sample, req, &hs, &bias, v, rng),
            Method::SenXu => intervals::senxu(sample, req, &hs, rng),
            Method::SmoothSmle => intervals::smooth_smle(sample, req, &hs, &bias, rng),
        }
    })?
}

use rand::seq::index;
use rand::Rng;

use super::{BandwidthRate, SubsampleConfig};
use crate::data::{CurrentStatusSample, RngSpec, Support};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::kernel::{kernel_constants, smooth_cdf, smooth_density_derivative, Boundary};
use crate::mle::fit_mle;

/// Outcome of a subsampling bandwidth search at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthChoice {
    pub c_opt: f64,
    /// The subsample estimates did not vary with `c`.
    pub flagged: bool,
    /// Estimated mean squared error for each candidate `c`.
    pub mse: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Target {
    Smle,
    Derivative,
}

impl Target {
    fn exponent(self) -> f64 {
        match self {
            Target::Smle => -0.2,
            Target::Derivative => -1.0 / 9.0,
        }
    }

    fn evaluate(
        self,
        f: &crate::data::StepDistribution,
        t: f64,
        h: f64,
        support: Support,
        boundary: Boundary,
    ) -> Result<f64> {
        match self {
            Target::Smle => smooth_cdf(f, t, h, support, boundary),
            Target::Derivative => smooth_density_derivative(f, t, h, support, boundary),
        }
    }
}

/// `{0.25, 0.5, ..., 4} * (support length / 2)`.
pub fn default_c_grid(support: Support) -> Vec<f64> {
    (1..=16).map(|k| 0.25 * k as f64 * support.length() / 2.0).collect()
}

/// Default subsample size: `max(50, round(n^0.6))`, with `m = 50, 100, 250`
/// for `n = 1000, 5000, 10000`.
pub fn default_subsample_size(n: usize) -> usize {
    match n {
        1000 => 50,
        5000 => 100,
        10000 => 250,
        _ => 50usize.max((n as f64).powf(0.6).round() as usize),
    }
}

/// Estimates of the target at `points[i]` for each constant in `cs[i]`, one
/// row per subsample: `out[b][i][k]`.
fn subsample_panel(
    sample: &CurrentStatusSample,
    points: &[f64],
    cs: &[Vec<f64>],
    cfg: &SubsampleConfig,
    boundary: Boundary,
    rng: &RngSpec,
    target: Target,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let n = sample.n();
    let m = cfg.resolve_m(n)?;
    let support = sample.support();
    let scale = (m as f64).powf(target.exponent());
    map_indexed(None, cfg.b_sub, |b| -> Result<Vec<Vec<f64>>> {
        let mut r = rng.stream(b as u64);
        let idx: Vec<usize> = if cfg.with_replacement {
            (0..m).map(|_| r.random_range(0..n)).collect()
        } else {
            index::sample(&mut r, n, m).into_vec()
        };
        let sub = sample.select(&idx)?;
        let f = fit_mle(&sub);
        points
            .iter()
            .zip(cs)
            .map(|(&t, row)| row.iter().map(|&c| target.evaluate(&f, t, c * scale, support, boundary)).collect())
            .collect()
    })?
    .into_iter()
    .collect()
}

fn pilots(
    sample: &CurrentStatusSample,
    points: &[f64],
    c0: f64,
    boundary: Boundary,
    target: Target,
) -> Result<Vec<f64>> {
    let f = fit_mle(sample);
    let h0 = c0 * (sample.n() as f64).powf(target.exponent());
    points.iter().map(|&t| target.evaluate(&f, t, h0, sample.support(), boundary)).collect()
}

fn check_grid(c_grid: &[f64]) -> Result<()> {
    if c_grid.is_empty() || c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::InvalidRequest("c grid must be nonempty with positive entries".into()));
    }
    Ok(())
}

pub(crate) fn select_many(
    sample: &CurrentStatusSample,
    points: &[f64],
    c_grid: &[f64],
    cfg: &SubsampleConfig,
    boundary: Boundary,
    rng: &RngSpec,
    target: Target,
) -> Result<Vec<BandwidthChoice>> {
    check_grid(c_grid)?;
    let c0 = cfg.resolve_c0(sample.support());
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::InvalidBandwidth(c0));
    }
    let cs = vec![c_grid.to_vec(); points.len()];
    let panel = subsample_panel(sample, points, &cs, cfg, boundary, rng, target)?;
    let pilot = pilots(sample, points, c0, boundary, target)?;
    let b = panel.len() as f64;
    Ok((0..points.len())
        .map(|i| {
            let mse: Vec<f64> = (0..c_grid.len())
                .map(|k| panel.iter().map(|row| (row[i][k] - pilot[i]).powi(2)).sum::<f64>() / b)
                .collect();
            let mut best = 0;
            for k in 1..mse.len() {
                if mse[k] < mse[best] {
                    best = k;
                }
            }
            let flagged = c_grid.len() > 1
                && panel.iter().all(|row| row[i].iter().all(|&v| v == row[i][0]));
            BandwidthChoice { c_opt: c_grid[best], flagged, mse }
        })
        .collect())
}

/// Constant `c` minimising the subsampling estimate of the mean squared
/// error of the SMLE at `t`; ties go to the smallest `c`.
pub fn select_bandwidth(
    sample: &CurrentStatusSample,
    t: f64,
    c_grid: &[f64],
    cfg: &SubsampleConfig,
    boundary: Boundary,
    rng: &RngSpec,
) -> Result<BandwidthChoice> {
    let mut out = select_many(sample, &[t], c_grid, cfg, boundary, rng, Target::Smle)?;
    Ok(out.remove(0))
}

/// As [`select_bandwidth`] for the density-derivative estimator with
/// bandwidth `c n^{-1/9}`.
pub fn select_derivative_bandwidth(
    sample: &CurrentStatusSample,
    t: f64,
    c_grid: &[f64],
    cfg: &SubsampleConfig,
    boundary: Boundary,
    rng: &RngSpec,
) -> Result<BandwidthChoice> {
    let mut out = select_many(sample, &[t], c_grid, cfg, boundary, rng, Target::Derivative)?;
    Ok(out.remove(0))
}

pub(crate) fn subsample_bias_many(
    sample: &CurrentStatusSample,
    points: &[f64],
    c_opt: &[f64],
    cfg: &SubsampleConfig,
    boundary: Boundary,
    rng: &RngSpec,
) -> Result<Vec<f64>> {
    check_grid(c_opt)?;
    let n = sample.n();
    let m = cfg.resolve_m(n)?;
    let c0 = cfg.resolve_c0(sample.support());
    let cs: Vec<Vec<f64>> = c_opt.iter().map(|&c| vec![c]).collect();
    let panel = subsample_panel(sample, points, &cs, cfg, boundary, rng, Target::Smle)?;
    let pilot = pilots(sample, points, c0, boundary, Target::Smle)?;
    let ratio = (m as f64 / n as f64).powf(0.4);
    let b = panel.len() as f64;
    Ok((0..points.len())
        .map(|i| panel.iter().map(|row| row[i][0] - pilot[i]).sum::<f64>() / b * ratio)
        .collect())
}

/// Subsampling estimate of the actual bias of the SMLE at `t`, scaled by
/// `(m / n)^{2/5}`.
pub fn bias_subsample_estimate(
    sample: &CurrentStatusSample,
    t: f64,
    c_opt: f64,
    cfg: &SubsampleConfig,
    boundary: Boundary,
    rng: &RngSpec,
) -> Result<f64> {
    Ok(subsample_bias_many(sample, &[t], &[c_opt], cfg, boundary, rng)?[0])
}

/// `h^2 f~'_{n hbar}(t) / 2 * int u^2 K`: the plug-in bias of the SMLE with
/// bandwidth `h`.
pub fn bias_direct_estimate(
    sample: &CurrentStatusSample,
    t: f64,
    h: f64,
    hbar: f64,
    boundary: Boundary,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidBandwidth(h));
    }
    let f = fit_mle(sample);
    let d = smooth_density_derivative(&f, t, hbar, sample.support(), boundary)?;
    let (m2, _) = kernel_constants();
    Ok(h * h * d / 2.0 * m2)
}

/// Bandwidth from a selected constant under an undersmoothing rule.
pub fn undersmoothed_bandwidth(c_opt: f64, n: usize, rule: BandwidthRate) -> Result<f64> {
    if !(c_opt > 0.0 && c_opt.is_finite()) {
        return Err(Error::InvalidBandwidth(c_opt));
    }
    Ok(rule.bandwidth(c_opt, n))
}

//! Smoothed MLE, the convolution SMLE and variance building blocks.

use crate::data::{BootstrapWeights, CurrentStatusSample, StepDistribution, Support};
use crate::error::{Error, Result};
use crate::kernel::{k_density, kernel_constants, smooth_cdf, Boundary};
use crate::quad;

/// Closed-form description of a data-generating model.
pub trait KnownTruth: Sync {
    /// Distribution function of the event time.
    fn cdf(&self, t: f64) -> f64;
    /// Density of the event time.
    fn density(&self, t: f64) -> f64;
    /// Derivative of the event-time density.
    fn density_derivative(&self, t: f64) -> f64;
    /// Density of the observation time.
    fn observation_density(&self, t: f64) -> f64;
    fn support(&self) -> Support;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmleEstimate {
    pub t: f64,
    pub value: f64,
    pub bandwidth: f64,
    pub boundary: Boundary,
}

impl SmleEstimate {
    pub fn compute(f: &StepDistribution, t: f64, h: f64, support: Support, boundary: Boundary) -> Result<Self> {
        Ok(Self { t, value: smle(f, t, h, support, boundary)?, bandwidth: h, boundary })
    }
}

/// Smoothed MLE `int IK_h(t - x) dF_n(x)`.
pub fn smle(f: &StepDistribution, t: f64, h: f64, support: Support, boundary: Boundary) -> Result<f64> {
    smooth_cdf(f, t, h, support, boundary)
}

/// Convolution SMLE `int IK_h(t - u) dF~_nh(u)`, computed as
/// `int K_h(t - u) F~_nh(u) du` by adaptive quadrature.
///
/// With reflection, `F~_nh` is the corrected SMLE inside the support, 0 below
/// and 1 above it.
pub fn convolution_smle(f: &StepDistribution, t: f64, h: f64, support: Support, boundary: Boundary) -> Result<f64> {
    convolution_smle_with(f, t, h, h, support, boundary)
}

/// `int K_{h_outer}(t - u) F~_{n h_inner}(u) du`.
pub(crate) fn convolution_smle_with(
    f: &StepDistribution,
    t: f64,
    h_outer: f64,
    h_inner: f64,
    support: Support,
    boundary: Boundary,
) -> Result<f64> {
    for h in [h_outer, h_inner] {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidBandwidth(h));
        }
    }
    let inner = |u: f64| -> f64 {
        match boundary {
            Boundary::Reflect if u <= support.lo => 0.0,
            Boundary::Reflect if u >= support.hi => 1.0,
            _ => smooth_cdf(f, u, h_inner, support, boundary).unwrap_or(0.0),
        }
    };
    let h = h_outer;
    let mut cuts = vec![t - h, t + h];
    if boundary == Boundary::Reflect {
        for edge in [support.lo, support.hi, support.lo + h_inner, support.hi - h_inner] {
            if edge > t - h && edge < t + h {
                cuts.push(edge);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += quad::integrate(|u| k_density((t - u) / h) / h * inner(u), w[0], w[1], 1e-10);
    }
    Ok(total.clamp(0.0, 1.0))
}

/// `S_nh(t) = n^{-2} sum M_i K_h(t - T_i)^2 (Delta_i - F(T_i))^2` with unit
/// weights when `weights` is `None`.
pub fn s_nh_variance(
    sample: &CurrentStatusSample,
    f: &StepDistribution,
    t: f64,
    h: f64,
    weights: Option<&BootstrapWeights>,
) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidBandwidth(h));
    }
    let grouped;
    let (total, event) = match weights {
        Some(w) => {
            grouped = sample.group_weights(w)?;
            (&grouped.0, &grouped.1)
        }
        None => {
            grouped = sample.unit_group_weights();
            (&grouped.0, &grouped.1)
        }
    };
    Ok(s_nh_grouped(sample.times(), total, event, sample.n(), f, t, h))
}

pub(crate) fn s_nh_grouped(
    times: &[f64],
    total: &[f64],
    event: &[f64],
    n: usize,
    f: &StepDistribution,
    t: f64,
    h: f64,
) -> f64 {
    let start = times.partition_point(|&x| x <= t - h);
    let end = times.partition_point(|&x| x < t + h);
    let mut s = 0.0;
    for i in start..end {
        let k = k_density((t - times[i]) / h) / h;
        if k == 0.0 {
            continue;
        }
        let p = f.eval(times[i]);
        let sq = event[i] * (1.0 - p) * (1.0 - p) + (total[i] - event[i]) * p * p;
        s += k * k * sq;
    }
    s / (n as f64 * n as f64)
}

/// Asymptotic bias factor and variance of the SMLE with `h = c n^{-1/5}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticMoments {
    /// `beta(t)`, multiplied by `n^{-2/5}` to give the actual bias.
    pub bias_factor: f64,
    pub variance: f64,
    pub c: f64,
}

pub fn asymptotic_moments(model: &dyn KnownTruth, t: f64, c: f64) -> Result<AsymptoticMoments> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidBandwidth(c));
    }
    let g = model.observation_density(t);
    if g <= 0.0 {
        return Err(Error::SingularDesign { t, what: "observation density vanishes".into() });
    }
    let (m2, l2) = kernel_constants();
    let f0 = model.cdf(t);
    Ok(AsymptoticMoments {
        bias_factor: c * c * model.density_derivative(t) / 2.0 * m2,
        variance: f0 * (1.0 - f0) / (c * g) * l2,
        c,
    })
}

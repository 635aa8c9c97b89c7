//! Nonparametric maximum likelihood estimation for current status data.
//!
//! The MLE is the vector of left slopes of the greatest convex minorant of
//! the cusum diagram `(sum w_j, sum w_j Delta_j)`; with multinomial weights
//! the same construction gives the bootstrap MLE.

use crate::data::{BootstrapWeights, CurrentStatusSample, StepDistribution};
use crate::error::{Error, Result};
use crate::gcm::pava_positive;
use crate::quad;

/// Current status MLE of the event-time distribution.
pub fn fit_mle(sample: &CurrentStatusSample) -> StepDistribution {
    let (total, event) = sample.unit_group_weights();
    fit_weighted_groups(sample.times(), &total, &event)
        .expect("grouped samples always carry positive weight")
}

/// MLE of the weighted cusum diagram built from bootstrap counts.
///
/// Weights are indexed in the canonical expansion order of the sample.
pub fn fit_bootstrap_mle(sample: &CurrentStatusSample, weights: &BootstrapWeights) -> Result<StepDistribution> {
    let (total, event) = sample.group_weights(weights)?;
    fit_weighted_groups(sample.times(), &total, &event)
}

/// Weighted current status MLE on distinct sorted times.
///
/// Groups with zero weight are not seen by the likelihood: those before the
/// first weighted group get 0 and the rest inherit the value on their left,
/// so the fitted distribution jumps only at weighted times.
pub(crate) fn fit_weighted_groups(times: &[f64], total: &[f64], event: &[f64]) -> Result<StepDistribution> {
    let ratios: Vec<f64> = total
        .iter()
        .zip(event)
        .map(|(&w, &e)| if w > 0.0 { e / w } else { 0.0 })
        .collect();
    let mut fit = vec![0.0; times.len()];
    pava_positive(&ratios, total, &mut fit)?;
    let mut last = 0.0;
    for (f, &w) in fit.iter_mut().zip(total) {
        if w > 0.0 {
            last = *f;
        } else {
            *f = last;
        }
    }
    Ok(StepDistribution::from_fit(times.to_vec(), fit))
}

/// Normalised log-likelihood `n^{-1} sum [Delta log F(T) + (1 - Delta) log(1 - F(T))]`.
pub fn log_likelihood(sample: &CurrentStatusSample, f: impl Fn(f64) -> f64) -> f64 {
    let mut ll = 0.0;
    for ((&t, &s), &m) in sample.times().iter().zip(sample.statuses()).zip(sample.multiplicities()) {
        let p = f(t);
        if s > 0 {
            ll += s as f64 * p.ln();
        }
        if m > s {
            ll += (m - s) as f64 * (1.0 - p).ln();
        }
    }
    ll / sample.n() as f64
}

/// The processes `V_n`, `G_n` and the argmin process `U_n` of the switch
/// relation, optionally under bootstrap weights.
#[derive(Debug, Clone)]
pub struct SwitchProcesses {
    times: Vec<f64>,
    v: Vec<f64>,
    g: Vec<f64>,
    positive: Vec<bool>,
}

/// Builds `V_n(t) = n^{-1} sum Delta_i 1{T_i <= t}` and the empirical
/// distribution of the observation times.
pub fn switch_processes(
    sample: &CurrentStatusSample,
    weights: Option<&BootstrapWeights>,
) -> Result<SwitchProcesses> {
    let (total, event) = match weights {
        Some(w) => sample.group_weights(w)?,
        None => sample.unit_group_weights(),
    };
    let n = sample.n() as f64;
    let mut v = Vec::with_capacity(total.len());
    let mut g = Vec::with_capacity(total.len());
    let (mut sv, mut sg) = (0.0, 0.0);
    for (&w, &e) in total.iter().zip(&event) {
        sv += e;
        sg += w;
        v.push(sv / n);
        g.push(sg / n);
    }
    Ok(SwitchProcesses {
        times: sample.times().to_vec(),
        v,
        g,
        positive: total.iter().map(|&w| w > 0.0).collect(),
    })
}

const TIE_TOLERANCE: f64 = 1e-12;

impl SwitchProcesses {
    fn step(&self, values: &[f64], t: f64) -> f64 {
        let idx = self.times.partition_point(|&k| k <= t);
        if idx == 0 {
            0.0
        } else {
            values[idx - 1]
        }
    }

    pub fn v_n(&self, t: f64) -> f64 {
        self.step(&self.v, t)
    }

    pub fn g_n(&self, t: f64) -> f64 {
        self.step(&self.g, t)
    }

    /// Smallest minimiser of `t -> V_n(t-) - a G_n(t-)` over the weighted
    /// observation times, `+inf` when the minimum is only reached after the
    /// last observation and `0` for `a <= 0`.
    ///
    /// With these conventions `F_n(t) >= a  <=>  U_n(a) <= t` holds exactly for
    /// the right-continuous MLE at every `t >= 0`.
    pub fn u_n(&self, a: f64) -> f64 {
        if a <= 0.0 {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        let mut arg = f64::INFINITY;
        let (mut pv, mut pg) = (0.0, 0.0);
        for i in 0..self.times.len() {
            if self.positive[i] {
                let val = pv - a * pg;
                if val < best - TIE_TOLERANCE {
                    best = val;
                    arg = self.times[i];
                }
            }
            pv = self.v[i];
            pg = self.g[i];
        }
        if pv - a * pg < best - TIE_TOLERANCE {
            arg = f64::INFINITY;
        }
        arg
    }
}

/// `(int_lo^hi |F(t) - F0(t)|^p dt)^{1/p}` for a step function `F`, integrating
/// piecewise between the knots of `F`.
pub fn l2_distance(
    f: &StepDistribution,
    f0: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    p: u32,
) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidDatum(format!("invalid interval [{lo}, {hi}]")));
    }
    if p != 1 && p != 2 {
        return Err(Error::InvalidDatum(format!("unsupported norm order {p}")));
    }
    let mut cuts = vec![lo];
    cuts.extend(f.knots()[f.knot_range(lo, hi)].iter().copied().filter(|&k| k > lo && k < hi));
    cuts.push(hi);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        let level = f.eval(w[0]);
        total += quad::integrate(|t| (level - f0(t)).abs().powi(p as i32), w[0], w[1], 1e-10);
    }
    Ok(total.powf(1.0 / p as f64))
}

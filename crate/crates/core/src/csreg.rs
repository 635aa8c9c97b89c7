//! Current status linear regression `Y = beta X + eps` with a scalar
//! covariate: profile MLE of the error distribution, truncated score,
//! simple score estimator, bootstrap and Wald intervals.

use std::io::Read;

use crate::boot::{normal_quantile, order_statistic};
use crate::data::{draw_multinomial_weights, BootstrapWeights, RngSpec, StepDistribution, Support};
use crate::error::{Error, Result};
use crate::exec::map_indexed;
use crate::kernel::{k_density, smooth_cdf, smooth_density, Boundary};
use crate::mle::fit_weighted_groups;

pub const DEFAULT_EPSILON: f64 = 0.001;

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSample {
    time: Vec<f64>,
    covariate: Vec<f64>,
    status: Vec<u8>,
    epsilon: f64,
}

impl RegressionSample {
    /// Records `(time, covariate, status)` with truncation `0.001`.
    pub fn new(records: &[(f64, f64, u8)]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptySample);
        }
        for &(t, x, d) in records {
            if !t.is_finite() || !x.is_finite() {
                return Err(Error::InvalidDatum(format!("non-finite record ({t}, {x})")));
            }
            if d > 1 {
                return Err(Error::InvalidDatum(format!("status {d} is not 0 or 1")));
            }
        }
        Ok(Self {
            time: records.iter().map(|r| r.0).collect(),
            covariate: records.iter().map(|r| r.1).collect(),
            status: records.iter().map(|r| r.2).collect(),
            epsilon: DEFAULT_EPSILON,
        })
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::InvalidDatum(format!("truncation {epsilon} outside (0, 0.5)")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn times(&self) -> &[f64] {
        &self.time
    }

    pub fn covariates(&self) -> &[f64] {
        &self.covariate
    }

    pub fn statuses(&self) -> &[u8] {
        &self.status
    }

    pub fn residuals(&self, beta: f64) -> Vec<f64> {
        self.time.iter().zip(&self.covariate).map(|(t, x)| t - beta * x).collect()
    }

    /// Same records with the covariate multiplied by `factor`.
    pub fn scale_covariate(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.covariate.iter_mut().for_each(|x| *x *= factor);
        out
    }
}

/// Reads `time,covariate,status` CSV data with a header row.
pub fn read_regression_csv<R: Read>(reader: R) -> Result<RegressionSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(tc), Some(xc), Some(sc)) = (col("time"), col("covariate"), col("status")) else {
        return Err(Error::Parse {
            line: 1,
            message: "header must contain `time`, `covariate` and `status` columns".into(),
        });
    };
    let mut records = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let num = |i: usize, what: &str| -> Result<f64> {
            let s = record.get(i).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse { line, message: format!("cannot parse {what} `{s}`") })
        };
        let t = num(tc, "time")?;
        let x = num(xc, "covariate")?;
        let d = match record.get(sc).unwrap_or("") {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse { line, message: format!("status `{other}` is not 0 or 1") })
            }
        };
        records.push((t, x, d));
    }
    RegressionSample::new(&records)
}

fn check_weights(sample: &RegressionSample, weights: Option<&BootstrapWeights>) -> Result<()> {
    match weights {
        Some(w) if w.n() != sample.n() => Err(Error::InvalidDatum(format!(
            "{} bootstrap weights for {} records",
            w.n(),
            sample.n()
        ))),
        _ => Ok(()),
    }
}

fn weight(weights: Option<&BootstrapWeights>, i: usize) -> f64 {
    weights.map_or(1.0, |w| w.counts()[i] as f64)
}

/// MLE `F_{n,beta}` of the error distribution: the current status MLE of
/// `(T_i - beta X_i, Delta_i)`. Zero-weight records are left out.
pub fn profile_mle(
    sample: &RegressionSample,
    beta: f64,
    weights: Option<&BootstrapWeights>,
) -> Result<StepDistribution> {
    check_weights(sample, weights)?;
    let u = sample.residuals(beta);
    let mut order: Vec<usize> = (0..sample.n()).filter(|&i| weight(weights, i) > 0.0).collect();
    order.sort_by(|&a, &b| u[a].total_cmp(&u[b]));
    let mut times: Vec<f64> = Vec::with_capacity(order.len());
    let mut total: Vec<f64> = Vec::with_capacity(order.len());
    let mut event: Vec<f64> = Vec::with_capacity(order.len());
    for i in order {
        let w = weight(weights, i);
        let d = sample.status[i] as f64;
        if times.last() == Some(&u[i]) {
            *total.last_mut().unwrap() += w;
            *event.last_mut().unwrap() += w * d;
        } else {
            times.push(u[i]);
            total.push(w);
            event.push(w * d);
        }
    }
    if times.is_empty() {
        return Err(Error::EmptySample);
    }
    fit_weighted_groups(&times, &total, &event)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreValue {
    pub value: f64,
    /// No record had a fitted value inside `[eps, 1 - eps]`.
    pub empty: bool,
}

fn score_with(
    sample: &RegressionSample,
    beta: f64,
    weights: Option<&BootstrapWeights>,
    f: &StepDistribution,
) -> ScoreValue {
    let eps = sample.epsilon;
    let mut value = 0.0;
    let mut used = 0usize;
    for i in 0..sample.n() {
        let w = weight(weights, i);
        if w == 0.0 {
            continue;
        }
        let p = f.eval(sample.time[i] - beta * sample.covariate[i]);
        if p >= eps && p <= 1.0 - eps {
            value += w * sample.covariate[i] * (sample.status[i] as f64 - p);
            used += 1;
        }
    }
    ScoreValue { value, empty: used == 0 }
}

/// Truncated score `sum X_i (Delta_i - F_{n,beta}(T_i - beta X_i))` over
/// records with fitted value in `[eps, 1 - eps]`, weighted by bootstrap
/// counts when given.
pub fn score(sample: &RegressionSample, beta: f64, weights: Option<&BootstrapWeights>) -> Result<ScoreValue> {
    let f = profile_mle(sample, beta, weights)?;
    Ok(score_with(sample, beta, weights, &f))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFit {
    pub beta_hat: f64,
    pub score: f64,
    pub bracket: (f64, f64),
    pub profile: StepDistribution,
    /// The score did not change sign on the grid.
    pub no_crossing: bool,
}

struct Candidate {
    beta: f64,
    abs: f64,
    bracket: (f64, f64),
}

/// Zero-crossing of the score on `[lo, hi]`.
///
/// Adjacent sign changes on a regular grid are refined by bisection to width
/// `1e-6 (hi - lo)`; a grid point with score exactly zero is a crossing by
/// itself. Grid points with an empty truncation set carry no sign: a sign
/// change across a run of them is a crossing at the middle of the run,
/// ranked by the smaller `|score|` just outside the run. The crossing with the smallest `|score|` wins, ties to the
/// smallest `beta`. Without any crossing the grid minimiser of `|score|` is
/// returned with `no_crossing` set.
pub fn sse_estimate(
    sample: &RegressionSample,
    search: (f64, f64),
    grid_size: usize,
    weights: Option<&BootstrapWeights>,
) -> Result<ScoreFit> {
    let (lo, hi) = search;
    if grid_size < 2 || !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidDatum(format!(
            "empty search grid: {grid_size} points on [{lo}, {hi}]"
        )));
    }
    check_weights(sample, weights)?;
    let eval = |b: f64| score(sample, b, weights);
    let betas: Vec<f64> = (0..grid_size)
        .map(|k| lo + (hi - lo) * k as f64 / (grid_size - 1) as f64)
        .collect();
    let scores: Vec<ScoreValue> = betas.iter().map(|&b| eval(b)).collect::<Result<_>>()?;
    let tol = 1e-6 * (hi - lo);

    let mut candidates = Vec::new();
    let filled: Vec<usize> = (0..grid_size).filter(|&k| !scores[k].empty).collect();
    for &k in &filled {
        if scores[k].value == 0.0 {
            candidates.push(Candidate { beta: betas[k], abs: 0.0, bracket: (betas[k], betas[k]) });
        }
    }
    for pair in filled.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let (si, sj) = (scores[i].value, scores[j].value);
        if si * sj >= 0.0 {
            continue;
        }
        if j == i + 1 {
            let (mut a, mut b) = (betas[i], betas[j]);
            let positive = si > 0.0;
            let mut exact = None;
            while b - a > tol {
                let mid = 0.5 * (a + b);
                let sm = eval(mid)?;
                if sm.value == 0.0 && !sm.empty {
                    exact = Some(mid);
                    break;
                }
                if (sm.value > 0.0) == positive || sm.value == 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            let beta = exact.unwrap_or(0.5 * (a + b));
            let abs = eval(beta)?.value.abs();
            candidates.push(Candidate { beta, abs, bracket: (a, b) });
        } else {
            // the sign flips across a run where the truncation set is empty
            let edge = |mut a: f64, mut b: f64, empty_right: bool| -> Result<(f64, f64)> {
                while b - a > tol {
                    let mid = 0.5 * (a + b);
                    if eval(mid)?.empty == empty_right {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                Ok(if empty_right { (b, a) } else { (a, b) })
            };
            let (left, outside_left) = edge(betas[i], betas[i + 1], true)?;
            let (right, outside_right) = edge(betas[j - 1], betas[j], false)?;
            let abs = eval(outside_left)?.value.abs().min(eval(outside_right)?.value.abs());
            candidates.push(Candidate { beta: 0.5 * (left + right), abs, bracket: (left, right) });
        }
    }

    let (beta_hat, bracket, no_crossing) = match candidates
        .iter()
        .min_by(|x, y| x.abs.total_cmp(&y.abs).then(x.beta.total_cmp(&y.beta)))
    {
        Some(c) => (c.beta, c.bracket, false),
        None => {
            let any_nonempty = scores.iter().any(|s| !s.empty);
            let k = (0..grid_size)
                .filter(|&k| !any_nonempty || !scores[k].empty)
                .min_by(|&i, &j| scores[i].value.abs().total_cmp(&scores[j].value.abs()))
                .expect("grid is nonempty");
            (betas[k], (betas[k], betas[k]), true)
        }
    };
    let profile = profile_mle(sample, beta_hat, weights)?;
    let s = score_with(sample, beta_hat, weights, &profile);
    Ok(ScoreFit { beta_hat, score: s.value, bracket, profile, no_crossing })
}

/// Two-stage search: a coarse scan of `interval` locates a pilot, then a
/// fine grid of half-width `half_width` around it is refined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub interval: (f64, f64),
    pub pilot_points: usize,
    pub grid_size: usize,
    pub half_width: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { interval: (-10.0, 10.0), pilot_points: 41, grid_size: 401, half_width: 2.0 }
    }
}

impl SearchConfig {
    pub fn with_interval(lo: f64, hi: f64) -> Self {
        Self { interval: (lo, hi), ..Self::default() }
    }
}

/// Simple score estimator with the two-stage search.
pub fn fit_sse(sample: &RegressionSample, search: &SearchConfig) -> Result<ScoreFit> {
    let pilot = sse_estimate(sample, search.interval, search.pilot_points, None)?;
    let c = pilot.beta_hat;
    sse_estimate(sample, (c - search.half_width, c + search.half_width), search.grid_size, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SseInterval {
    pub fit: ScoreFit,
    pub lower: f64,
    pub upper: f64,
    pub alpha: f64,
    /// Replicates without a zero-crossing; excluded from the quantiles.
    pub no_crossing: usize,
    /// Sorted estimates of the retained replicates.
    pub replicates: Vec<f64>,
}

impl SseInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

const KEY_REGRESSION_REPLICATES: u64 = 11;

/// Percentile bootstrap interval for `beta` from `b` multinomially weighted
/// refits. Replicates search the fine grid around the original estimate.
pub fn bootstrap_sse_ci(
    sample: &RegressionSample,
    search: &SearchConfig,
    b: usize,
    alpha: f64,
    rng: &RngSpec,
    workers: Option<usize>,
) -> Result<SseInterval> {
    if b < 2 {
        return Err(Error::InvalidRequest(format!("B = {b} must be at least 2")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidRequest(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let fit = fit_sse(sample, search)?;
    let window = (fit.beta_hat - search.half_width, fit.beta_hat + search.half_width);
    let streams = rng.derive(KEY_REGRESSION_REPLICATES);
    let n = sample.n();
    let reps = map_indexed(workers, b, |r| -> Result<ScoreFit> {
        let w = draw_multinomial_weights(n, &streams, r as u64)?;
        sse_estimate(sample, window, search.grid_size, Some(&w))
    })?;
    let mut replicates = Vec::with_capacity(b);
    let mut flagged = 0;
    for r in reps {
        let r = r?;
        if r.no_crossing {
            flagged += 1;
        } else {
            replicates.push(r.beta_hat);
        }
    }
    if 2 * flagged > b {
        return Err(Error::UnstableFit { flagged, total: b });
    }
    replicates.sort_by(f64::total_cmp);
    let lower = order_statistic(&replicates, alpha / 2.0);
    let upper = order_statistic(&replicates, 1.0 - alpha / 2.0);
    Ok(SseInterval { fit, lower, upper, alpha, no_crossing: flagged, replicates })
}

/// Bandwidths of the Wald plug-ins; `None` selects the rule of thumb
/// `3.15 sd n^{-1/5}`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WaldBandwidths {
    /// Smoothing of the profile MLE for `f_0`.
    pub density: Option<f64>,
    /// Nadaraya-Watson regression of `X` on the residual.
    pub regression: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldFit {
    pub v: f64,
    pub w: f64,
    /// `V^{-1} W V^{-1}`
    pub variance: f64,
    pub lower: f64,
    pub upper: f64,
    pub density_bandwidth: f64,
    pub regression_bandwidth: f64,
}

fn rule_of_thumb(sd: f64, n: usize) -> f64 {
    3.15 * sd * (n as f64).powf(-0.2)
}

/// Plug-in estimates of `V`, `W` and the Wald interval
/// `beta_hat -/+ z sqrt(V^{-1} W V^{-1} / n)`.
pub fn wald_variance(
    sample: &RegressionSample,
    beta_hat: f64,
    bandwidths: WaldBandwidths,
    alpha: f64,
) -> Result<WaldFit> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidRequest(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let n = sample.n();
    let f = profile_mle(sample, beta_hat, None)?;
    let u = sample.residuals(beta_hat);
    let x = &sample.covariate;

    let total = f.total() - f.left_limit();
    let (mean, second) = f.jumps().fold((0.0, 0.0), |(m, s), (t, p)| (m + p * t, s + p * t * t));
    let f_sd = if total > 0.0 { (second / total - (mean / total).powi(2)).max(0.0).sqrt() } else { 0.0 };
    let u_mean = u.iter().sum::<f64>() / n as f64;
    let u_sd = (u.iter().map(|v| (v - u_mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let hf = bandwidths.density.unwrap_or_else(|| rule_of_thumb(f_sd, n));
    let hx = bandwidths.regression.unwrap_or_else(|| rule_of_thumb(u_sd, n));
    for h in [hf, hx] {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidBandwidth(h));
        }
    }
    let x_mean = x.iter().sum::<f64>() / n as f64;
    let lo = u.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let support = Support::new(lo - hf, hi + hf)?;

    let eps = sample.epsilon;
    let (mut v, mut w) = (0.0, 0.0);
    for i in 0..n {
        let p = f.eval(u[i]);
        if p < eps || p > 1.0 - eps {
            continue;
        }
        let (mut num, mut den) = (0.0, 0.0);
        for j in 0..n {
            let k = k_density((u[i] - u[j]) / hx);
            num += k * x[j];
            den += k;
        }
        let m = if den > 0.0 { num / den } else { x_mean };
        let d2 = (x[i] - m).powi(2);
        let dens = smooth_density(&f, u[i], hf, support, Boundary::Off)?;
        let smooth = smooth_cdf(&f, u[i], hf, support, Boundary::Off)?.clamp(0.0, 1.0);
        v += dens * d2;
        w += smooth * (1.0 - smooth) * d2;
    }
    v /= n as f64;
    w /= n as f64;
    if v < 1e-8 {
        return Err(Error::SingularDesign { t: beta_hat, what: format!("V estimate {v:e} below 1e-8") });
    }
    let variance = w / (v * v);
    let half = normal_quantile(1.0 - alpha / 2.0) * (variance / n as f64).sqrt();
    Ok(WaldFit {
        v,
        w,
        variance,
        lower: beta_hat - half,
        upper: beta_hat + half,
        density_bandwidth: hf,
        regression_bandwidth: hx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CurrentStatusSample;
    use crate::mle::fit_mle;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(n: usize, r: &mut ChaCha8Rng) -> RegressionSample {
        let recs: Vec<(f64, f64, u8)> = (0..n)
            .map(|_| {
                let t = r.random::<f64>() * 2.0;
                let x = r.random::<f64>() * 2.0;
                let e = 0.375 + 0.25 * r.random::<f64>();
                (t, x, (0.5 * x + e <= t) as u8)
            })
            .collect();
        RegressionSample::new(&recs).unwrap()
    }

    #[test]
    fn beta_zero_reduces_to_plain_mle() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let s = random_sample(60, &mut r);
        let pairs: Vec<(f64, u8)> = s.times().iter().zip(s.statuses()).map(|(&t, &d)| (t, d)).collect();
        let plain = fit_mle(&CurrentStatusSample::ingest(&pairs).unwrap());
        assert_eq!(profile_mle(&s, 0.0, None).unwrap(), plain);
    }

    #[test]
    fn two_records() {
        let s = RegressionSample::new(&[(1.0, 1.0, 0), (3.0, 1.0, 1)]).unwrap();
        let f = profile_mle(&s, 0.5, None).unwrap();
        assert_eq!(f.values(), &[0.0, 1.0]);
        let sc = score(&s, 0.5, None).unwrap();
        assert_eq!(sc.value, 0.0);
        assert!(sc.empty);
    }

    #[test]
    fn weights_match_expansion() {
        let mut r = ChaCha8Rng::seed_from_u64(8);
        let rng = RngSpec::new(21);
        for inst in 0..100 {
            let s = random_sample(5 + inst % 20, &mut r);
            let w = draw_multinomial_weights(s.n(), &rng, inst as u64).unwrap();
            let mut recs = Vec::new();
            for (i, &c) in w.counts().iter().enumerate() {
                for _ in 0..c {
                    recs.push((s.times()[i], s.covariates()[i], s.statuses()[i]));
                }
            }
            let e = RegressionSample::new(&recs).unwrap();
            let beta = r.random::<f64>();
            assert_eq!(profile_mle(&s, beta, Some(&w)).unwrap(), profile_mle(&e, beta, None).unwrap());
            let a = score(&s, beta, Some(&w)).unwrap().value;
            let b = score(&e, beta, None).unwrap().value;
            assert!((a - b).abs() < 1e-12);
        }
        let s = random_sample(30, &mut r);
        let ones = BootstrapWeights::ones(30);
        assert_eq!(score(&s, 0.4, Some(&ones)).unwrap(), score(&s, 0.4, None).unwrap());
    }

    #[test]
    fn profile_values_obey_block_condition() {
        let mut r = ChaCha8Rng::seed_from_u64(13);
        let s = random_sample(80, &mut r);
        let f = profile_mle(&s, 0.45, None).unwrap();
        assert!(f.values().windows(2).all(|w| w[0] <= w[1]));
        assert!(f.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let u = s.residuals(0.45);
        let mut i = 0;
        let v = f.values();
        while i < v.len() {
            let mut j = i;
            while j + 1 < v.len() && v[j + 1] == v[i] {
                j += 1;
            }
            let (lo, hi) = (f.knots()[i], f.knots()[j]);
            let (mut m, mut d) = (0.0, 0.0);
            for k in 0..s.n() {
                if u[k] >= lo && u[k] <= hi {
                    m += 1.0;
                    d += s.statuses()[k] as f64;
                }
            }
            assert!((d / m - v[i]).abs() < 1e-12);
            i = j + 1;
        }
    }

    // At beta = 1 the pairs (3,2,1)/(2,1,0) and (11,1,1)/(12,2,0) tie in
    // residual. Below 1 the second pair pools to 1/2 and the first is split,
    // above 1 the roles swap, and at 1 both pools contribute 1/2 - 1/2.
    fn exact_zero_fixture() -> RegressionSample {
        let mut recs = vec![(3.0, 2.0, 1), (2.0, 1.0, 0), (11.0, 1.0, 1), (12.0, 2.0, 0)];
        for k in 0..6 {
            recs.push((-20.0 - k as f64, 0.0, 0));
            recs.push((40.0 + k as f64, 0.0, 1));
        }
        RegressionSample::new(&recs).unwrap()
    }

    #[test]
    fn exact_zero_on_grid() {
        let s = exact_zero_fixture();
        let at = |b: f64| score(&s, b, None).unwrap();
        assert_eq!(at(1.0).value, 0.0);
        assert!(!at(1.0).empty);
        assert!(at(0.99).value * at(1.01).value < 0.0);
        let fit = sse_estimate(&s, (0.0, 2.0), 401, None).unwrap();
        assert_eq!(fit.beta_hat, 1.0);
        assert!(!fit.no_crossing);
    }

    #[test]
    fn scale_equivariance() {
        let mut r = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..10 {
            let s = random_sample(100, &mut r);
            let a = sse_estimate(&s, (-1.0, 2.0), 401, None).unwrap();
            let b = sse_estimate(&s.scale_covariate(2.0), (-0.5, 1.0), 401, None).unwrap();
            assert!((a.beta_hat / 2.0 - b.beta_hat).abs() < 1e-12, "{} {}", a.beta_hat, b.beta_hat);
            assert_eq!(a.no_crossing, b.no_crossing);
        }
    }

    #[test]
    fn empty_grid() {
        let s = exact_zero_fixture();
        assert!(matches!(sse_estimate(&s, (1.0, 1.0), 10, None), Err(Error::InvalidDatum(_))));
        assert!(matches!(sse_estimate(&s, (0.0, 1.0), 1, None), Err(Error::InvalidDatum(_))));
    }

    #[test]
    fn score_brackets_truth() {
        let mut r = ChaCha8Rng::seed_from_u64(41);
        let mut opposite = 0;
        for _ in 0..100 {
            let s = random_sample(200, &mut r);
            let a = score(&s, 0.2, None).unwrap().value;
            let b = score(&s, 0.8, None).unwrap().value;
            if a * b < 0.0 {
                opposite += 1;
            }
        }
        assert!(opposite >= 95, "{opposite}");
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let s = random_sample(60, &mut r);
        let cfg = SearchConfig::with_interval(-2.0, 3.0);
        let a = bootstrap_sse_ci(&s, &cfg, 40, 0.05, &RngSpec::new(9), Some(1)).unwrap();
        let b = bootstrap_sse_ci(&s, &cfg, 40, 0.05, &RngSpec::new(9), Some(3)).unwrap();
        assert_eq!(a, b);
        assert!(a.lower <= a.fit.beta_hat + 0.2 && a.fit.beta_hat - 0.2 <= a.upper);
        assert!(a.lower <= a.upper);
    }

    #[test]
    fn wald_singular_when_covariate_constant() {
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let recs: Vec<(f64, f64, u8)> = (0..50)
            .map(|_| {
                let t = r.random::<f64>();
                (t, 1.0, (r.random::<f64>() < t) as u8)
            })
            .collect();
        let s = RegressionSample::new(&recs).unwrap();
        assert!(matches!(
            wald_variance(&s, 0.0, WaldBandwidths::default(), 0.05),
            Err(Error::SingularDesign { .. })
        ));
    }
}

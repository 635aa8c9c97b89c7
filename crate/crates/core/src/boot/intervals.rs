use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::{
    centering_bandwidth, resolve_bandwidths, BandPoint, CiRequest, ConfidenceBand, Method, WaldVariance,
    KEY_REPLICATES, KEY_SMOOTH,
};
use crate::data::{draw_multinomial_weights, BootstrapWeights, CurrentStatusSample, RngSpec, StepDistribution};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, with_workers};
use crate::kernel::{kernel_constants, smooth_cdf, smooth_density_of_g, Boundary};
use crate::mle::{fit_bootstrap_mle, fit_mle};
use crate::smle::{convolution_smle_with, s_nh_grouped, s_nh_variance};

const MIN_VARIANCE: f64 = 1e-12;

/// `k`-th order statistic with `k = ceil(p B)` of sorted values.
pub(crate) fn order_statistic(sorted: &[f64], p: f64) -> f64 {
    let b = sorted.len();
    let k = ((p * b as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[k.min(b) - 1]
}

fn clip(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn band_point(t: f64, estimate: f64, lower: f64, upper: f64, h: f64, discarded: usize) -> BandPoint {
    let (lower, upper) = (clip(lower), clip(upper));
    BandPoint { t, estimate, lower, upper, bandwidth: h, discarded, degenerate: upper - lower <= 0.0 }
}

/// Per-replicate `(F~*_nh(t_i), S*_nh(t_i))` under multinomial weights.
fn multinomial_replicates(
    sample: &CurrentStatusSample,
    points: &[f64],
    hs: &[f64],
    boundary: Boundary,
    weights: &(dyn Fn(usize) -> Result<BootstrapWeights> + Sync),
    b: usize,
) -> Result<Vec<Vec<(f64, f64)>>> {
    let support = sample.support();
    map_indexed(None, b, |rep| -> Result<Vec<(f64, f64)>> {
        let w = weights(rep)?;
        let f = fit_bootstrap_mle(sample, &w)?;
        let (total, event) = sample.group_weights(&w)?;
        points
            .iter()
            .zip(hs)
            .map(|(&t, &h)| {
                let v = smooth_cdf(&f, t, h, support, boundary)?;
                let s = s_nh_grouped(sample.times(), &total, &event, sample.n(), &f, t, h);
                Ok((v, s))
            })
            .collect()
    })?
    .into_iter()
    .collect()
}

fn smle_and_s(
    sample: &CurrentStatusSample,
    f: &StepDistribution,
    points: &[f64],
    hs: &[f64],
    boundary: Boundary,
) -> Result<Vec<(f64, f64)>> {
    let support = sample.support();
    points
        .iter()
        .zip(hs)
        .map(|(&t, &h)| Ok((smooth_cdf(f, t, h, support, boundary)?, s_nh_variance(sample, f, t, h, None)?)))
        .collect()
}

/// Studentized band from replicate pivots `(F~*, S*)` against centres.
fn studentized_band(
    points: &[f64],
    hs: &[f64],
    originals: &[(f64, f64)],
    centres: &[f64],
    replicates: &[Vec<(f64, f64)>],
    bias: &[f64],
    alpha: f64,
) -> Result<Vec<BandPoint>> {
    let mut out = Vec::with_capacity(points.len());
    for i in 0..points.len() {
        let mut pivots: Vec<f64> = replicates
            .iter()
            .filter(|r| r[i].1 >= MIN_VARIANCE)
            .map(|r| (r[i].0 - centres[i]) / r[i].1.sqrt())
            .collect();
        let discarded = replicates.len() - pivots.len();
        if pivots.is_empty() {
            return Err(Error::DegenerateWindow { t: points[i] });
        }
        pivots.sort_by(f64::total_cmp);
        let q_lo = order_statistic(&pivots, alpha / 2.0);
        let q_hi = order_statistic(&pivots, 1.0 - alpha / 2.0);
        let (est, s) = originals[i];
        let sd = s.sqrt();
        out.push(band_point(points[i], est, est - q_hi * sd - bias[i], est - q_lo * sd - bias[i], hs[i], discarded));
    }
    Ok(out)
}

fn multinomial_draws(n: usize, rng: &RngSpec) -> impl Fn(usize) -> Result<BootstrapWeights> + Sync + '_ {
    let spec = rng.derive(KEY_REPLICATES);
    move |rep| draw_multinomial_weights(n, &spec, rep as u64)
}

pub(crate) fn studentized(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    hs: &[f64],
    bias: &[f64],
    rng: &RngSpec,
) -> Result<ConfidenceBand> {
    let draws = multinomial_draws(sample.n(), rng);
    let band = studentized_with(sample, req, hs, bias, &draws, req.b)?;
    Ok(ConfidenceBand { points: band, seed: rng.master_seed, b: req.b, method: Method::Studentized })
}

fn studentized_with(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    hs: &[f64],
    bias: &[f64],
    weights: &(dyn Fn(usize) -> Result<BootstrapWeights> + Sync),
    b: usize,
) -> Result<Vec<BandPoint>> {
    let points = req.grid.points();
    let f = fit_mle(sample);
    let originals = smle_and_s(sample, &f, points, hs, req.boundary)?;
    let replicates = multinomial_replicates(sample, points, hs, req.boundary, weights, b)?;
    let centres: Vec<f64> = originals.iter().map(|o| o.0).collect();
    studentized_band(points, hs, &originals, &centres, &replicates, bias, req.alpha)
}

/// Studentized nonparametric-bootstrap band around the SMLE.
pub fn studentized_ci(sample: &CurrentStatusSample, req: &CiRequest, rng: &RngSpec) -> Result<ConfidenceBand> {
    bias_corrected_ci(sample, req, rng, &vec![0.0; req.grid.len()])
}

/// Studentized band with both endpoints lowered by an actual-scale bias.
pub fn bias_corrected_ci(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    rng: &RngSpec,
    bias: &[f64],
) -> Result<ConfidenceBand> {
    req.validate(sample)?;
    check_len(bias, req)?;
    with_workers(req.workers, || {
        let hs = bandwidths(sample, req, rng)?;
        studentized(sample, req, &hs, bias, rng)
    })?
}

/// Studentized band from explicitly supplied replicate weights.
pub fn studentized_ci_from_weights(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    weights: &[BootstrapWeights],
    rng: &RngSpec,
) -> Result<ConfidenceBand> {
    req.validate(sample)?;
    with_workers(req.workers, || {
        let hs = bandwidths(sample, req, rng)?;
        let get = |rep: usize| Ok(weights[rep].clone());
        let band = studentized_with(sample, req, &hs, &vec![0.0; req.grid.len()], &get, weights.len())?;
        Ok(ConfidenceBand { points: band, seed: rng.master_seed, b: weights.len(), method: Method::Studentized })
    })?
}

fn bandwidths(sample: &CurrentStatusSample, req: &CiRequest, rng: &RngSpec) -> Result<Vec<f64>> {
    Ok(resolve_bandwidths(sample, req, rng)?.iter().map(|b| b.h).collect())
}

fn check_len(bias: &[f64], req: &CiRequest) -> Result<()> {
    if bias.len() != req.grid.len() {
        return Err(Error::InvalidRequest(format!(
            "bias has {} entries for {} grid points",
            bias.len(),
            req.grid.len()
        )));
    }
    Ok(())
}

pub(crate) fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub(crate) fn wald(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    hs: &[f64],
    bias: &[f64],
    variance: WaldVariance,
    rng: &RngSpec,
) -> Result<ConfidenceBand> {
    let draws = multinomial_draws(sample.n(), rng);
    let points = wald_with(sample, req, hs, bias, variance, &draws, req.b)?;
    Ok(ConfidenceBand { points, seed: rng.master_seed, b: req.b, method: Method::Wald(variance) })
}

fn wald_with(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    hs: &[f64],
    bias: &[f64],
    variance: WaldVariance,
    weights: &(dyn Fn(usize) -> Result<BootstrapWeights> + Sync),
    b: usize,
) -> Result<Vec<BandPoint>> {
    let points = req.grid.points();
    let support = sample.support();
    let n = sample.n() as f64;
    let f = fit_mle(sample);
    let estimates: Vec<f64> = points
        .iter()
        .zip(hs)
        .map(|(&t, &h)| smooth_cdf(&f, t, h, support, req.boundary))
        .collect::<Result<_>>()?;
    let (_, l2) = kernel_constants();
    let sds: Vec<f64> = match variance {
        WaldVariance::Density | WaldVariance::ToySample => points
            .iter()
            .zip(hs)
            .map(|(&t, &h)| {
                let g = smooth_density_of_g(sample, t, h, support, req.boundary)?;
                if g < 1e-8 {
                    return Err(Error::SingularDesign { t, what: "kernel estimate of g below 1e-8".into() });
                }
                if variance == WaldVariance::Density {
                    let c = h * n.powf(0.2);
                    let p = f.eval(t);
                    let sigma2 = p * (1.0 - p) / (c * g) * l2;
                    Ok(n.powf(-0.4) * sigma2.sqrt())
                } else {
                    toy_sample_variance(sample, &f, t, h, req.boundary).map(f64::sqrt)
                }
            })
            .collect::<Result<_>>()?,
        WaldVariance::Bootstrap => {
            let reps = multinomial_replicates(sample, points, hs, req.boundary, weights, b)?;
            (0..points.len())
                .map(|i| {
                    let ms = reps.iter().map(|r| (r[i].0 - estimates[i]).powi(2)).sum::<f64>() / reps.len() as f64;
                    ms.sqrt()
                })
                .collect()
        }
    };
    let z_hi = normal_quantile(1.0 - req.alpha / 2.0);
    let z_lo = normal_quantile(req.alpha / 2.0);
    Ok((0..points.len())
        .map(|i| {
            let est = estimates[i];
            band_point(points[i], est, est - z_hi * sds[i] - bias[i], est - z_lo * sds[i] - bias[i], hs[i], 0)
        })
        .collect())
}

/// `n^{-2} sum K_h(t - T_i)^2 (Delta_i - F_n(T_i))^2 / g_nh(T_i)^2`.
pub(crate) fn toy_sample_variance(
    sample: &CurrentStatusSample,
    f: &StepDistribution,
    t: f64,
    h: f64,
    boundary: Boundary,
) -> Result<f64> {
    let support = sample.support();
    let n = sample.n() as f64;
    let mut s = 0.0;
    for ((&ti, &d), &m) in sample.times().iter().zip(sample.statuses()).zip(sample.multiplicities()) {
        let k = crate::kernel::k_density((t - ti) / h) / h;
        if k == 0.0 {
            continue;
        }
        let g = smooth_density_of_g(sample, ti, h, support, boundary)?;
        let p = f.eval(ti);
        let sq = d as f64 * (1.0 - p) * (1.0 - p) + (m - d) as f64 * p * p;
        s += k * k * sq / (g * g);
    }
    Ok(s / (n * n))
}

/// Wald band with one of the three variance estimators; endpoints lowered by
/// `bias`.
pub fn wald_ci(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    rng: &RngSpec,
    variance: WaldVariance,
    bias: &[f64],
) -> Result<ConfidenceBand> {
    req.validate(sample)?;
    check_len(bias, req)?;
    with_workers(req.workers, || {
        let hs = bandwidths(sample, req, rng)?;
        wald(sample, req, &hs, bias, variance, rng)
    })?
}

/// Smooth bootstrap replicates: times fixed, statuses redrawn from the SMLE
/// with bandwidth `hc`; each replicate returns its MLE and resampled data.
fn smooth_replicates<T: Send>(
    sample: &CurrentStatusSample,
    hc: f64,
    boundary: Boundary,
    rng: &RngSpec,
    b: usize,
    per_replicate: &(dyn Fn(&CurrentStatusSample, &StepDistribution) -> Result<T> + Sync),
) -> Result<Vec<T>> {
    let support = sample.support();
    let f = fit_mle(sample);
    let probs: Vec<f64> = sample
        .times()
        .iter()
        .map(|&t| smooth_cdf(&f, t, hc, support, boundary))
        .collect::<Result<_>>()?;
    let spec = rng.derive(KEY_SMOOTH);
    map_indexed(None, b, |rep| {
        let mut r = spec.stream(rep as u64);
        let statuses: Vec<usize> = probs
            .iter()
            .zip(sample.multiplicities())
            .map(|(&p, &m)| (0..m).filter(|_| r.random::<f64>() < p).count())
            .collect();
        let resampled = sample.with_statuses(statuses);
        let fstar = fit_mle(&resampled);
        per_replicate(&resampled, &fstar)
    })?
    .into_iter()
    .collect()
}

pub(crate) fn senxu(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    hs: &[f64],
    rng: &RngSpec,
) -> Result<ConfidenceBand> {
    let _ = hs;
    let points = req.grid.points();
    let support = sample.support();
    let hc = centering_bandwidth(sample, req);
    let f = fit_mle(sample);
    let centres: Vec<f64> = points
        .iter()
        .map(|&t| smooth_cdf(&f, t, hc, support, req.boundary))
        .collect::<Result<_>>()?;
    let reps = smooth_replicates(sample, hc, req.boundary, rng, req.b, &|_, fstar| {
        Ok(points.iter().map(|&t| fstar.eval(t)).collect::<Vec<f64>>())
    })?;
    let band = (0..points.len())
        .map(|i| {
            let mut z: Vec<f64> = reps.iter().map(|r| r[i] - centres[i]).collect();
            z.sort_by(f64::total_cmp);
            let est = f.eval(points[i]);
            let z_lo = order_statistic(&z, req.alpha / 2.0);
            let z_hi = order_statistic(&z, 1.0 - req.alpha / 2.0);
            band_point(points[i], est, est - z_hi, est - z_lo, hc, 0)
        })
        .collect();
    Ok(ConfidenceBand { points: band, seed: rng.master_seed, b: req.b, method: Method::SenXu })
}

/// Smooth-bootstrap band around the MLE: statuses are redrawn from the SMLE
/// and the quantiles of `F^*_n(t) - F~_nh(t)` are inverted around `F_n(t)`.
pub fn senxu_ci(sample: &CurrentStatusSample, req: &CiRequest, rng: &RngSpec) -> Result<ConfidenceBand> {
    req.validate(sample)?;
    with_workers(req.workers, || senxu(sample, req, &[], rng))?
}

pub(crate) fn smooth_smle(
    sample: &CurrentStatusSample,
    req: &CiRequest,
    hs: &[f64],
    bias: &[f64],
    rng: &RngSpec,
) -> Result<ConfidenceBand> {
    let points = req.grid.points();
    let support = sample.support();
    let hc = centering_bandwidth(sample, req);
    let f = fit_mle(sample);
    let originals = smle_and_s(sample, &f, points, hs, req.boundary)?;
    let centres: Vec<f64> = points
        .iter()
        .zip(hs)
        .map(|(&t, &h)| convolution_smle_with(&f, t, h, hc, support, req.boundary))
        .collect::<Result<_>>()?;
    let reps = smooth_replicates(sample, hc, req.boundary, rng, req.b, &|resampled, fstar| {
        points
            .iter()
            .zip(hs)
            .map(|(&t, &h)| {
                Ok((smooth_cdf(fstar, t, h, support, req.boundary)?, s_nh_variance(resampled, fstar, t, h, None)?))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let band = studentized_band(points, hs, &originals, &centres, &reps, bias, req.alpha)?;
    Ok(ConfidenceBand { points: band, seed: rng.master_seed, b: req.b, method: Method::SmoothSmle })
}

/// Smooth-bootstrap studentized band around the SMLE, with the pivot centred
/// at the convolution SMLE.
pub fn smooth_smle_ci(sample: &CurrentStatusSample, req: &CiRequest, rng: &RngSpec) -> Result<ConfidenceBand> {
    req.validate(sample)?;
    with_workers(req.workers, || {
        let hs = bandwidths(sample, req, rng)?;
        smooth_smle(sample, req, &hs, &vec![0.0; req.grid.len()], rng)
    })?
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boot::{confidence_band, BandwidthRule, BiasRule};
    use crate::data::{Grid, Support};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_sample(n: usize, seed: u64) -> CurrentStatusSample {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(f64, u8)> = (0..n)
            .map(|_| {
                let t: f64 = 2.0 * r.random::<f64>();
                let x: f64 = 2.0 * r.random::<f64>();
                (t, (x <= t) as u8)
            })
            .collect();
        CurrentStatusSample::ingest(&pairs).unwrap().with_support(Support::new(0.0, 2.0).unwrap()).unwrap()
    }

    fn request(points: Vec<f64>, method: Method, b: usize) -> CiRequest {
        let mut req = CiRequest::new(Grid::new(points).unwrap());
        req.bandwidth = BandwidthRule::Fixed(2.0 * 1000f64.powf(-0.2));
        req.method = method;
        req.b = b;
        req
    }

    #[test]
    fn order_statistic_convention() {
        let v: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(order_statistic(&v, 0.025), 3.0);
        assert_eq!(order_statistic(&v, 0.975), 98.0);
        assert_eq!(order_statistic(&v, 0.05), 5.0);
        assert_eq!(order_statistic(&v, 0.0001), 1.0);
        assert_eq!(order_statistic(&v, 1.0), 100.0);
    }

    #[test]
    fn normal_constant() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
    }

    #[test]
    fn all_censored_sample_is_degenerate() {
        let pairs: Vec<(f64, u8)> = (0..50).map(|i| (0.04 * i as f64, 0)).collect();
        let s = CurrentStatusSample::ingest(&pairs).unwrap().with_support(Support::new(0.0, 2.0).unwrap()).unwrap();
        let req = request(vec![0.3], Method::Studentized, 50);
        assert!(matches!(studentized_ci(&s, &req, &RngSpec::new(1)), Err(Error::DegenerateWindow { .. })));
        let req = request(vec![0.3], Method::SmoothSmle, 50);
        assert!(matches!(smooth_smle_ci(&s, &req, &RngSpec::new(1)), Err(Error::DegenerateWindow { .. })));
    }

    #[test]
    fn bias_shifts_both_endpoints() {
        let s = uniform_sample(300, 1);
        let req = request(vec![0.5, 1.0, 1.5], Method::Studentized, 100);
        let rng = RngSpec::new(7);
        let plain = studentized_ci(&s, &req, &rng).unwrap();
        let zero = bias_corrected_ci(&s, &req, &rng, &[0.0; 3]).unwrap();
        assert_eq!(plain, zero);
        let shifted = bias_corrected_ci(&s, &req, &rng, &[0.01; 3]).unwrap();
        for (a, b) in plain.points.iter().zip(&shifted.points) {
            assert!((a.lower - 0.01 - b.lower).abs() < 1e-12);
            assert!((a.upper - 0.01 - b.upper).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_weights_give_point_interval() {
        let s = uniform_sample(200, 2);
        let req = request(vec![0.6, 1.0], Method::Studentized, 2);
        let w = vec![BootstrapWeights::ones(s.n()); 5];
        let band = studentized_ci_from_weights(&s, &req, &w, &RngSpec::new(0)).unwrap();
        for p in band.points {
            assert_eq!(p.lower, p.estimate);
            assert_eq!(p.upper, p.estimate);
            assert!(p.degenerate);
        }
    }

    #[test]
    fn bootstrap_wald_with_identical_replicates_is_degenerate() {
        let s = uniform_sample(200, 3);
        let req = request(vec![1.0], Method::Wald(WaldVariance::Bootstrap), 2);
        let ones = |_: usize| Ok(BootstrapWeights::ones(s.n()));
        let hs = vec![0.5];
        let band = wald_with(&s, &req, &hs, &[0.0], WaldVariance::Bootstrap, &ones, 2).unwrap();
        assert!(band[0].degenerate);
        assert_eq!(band[0].lower, band[0].estimate);
    }

    #[test]
    fn nested_levels_and_quantile_sandwich() {
        let s = uniform_sample(400, 4);
        let mut req = request(vec![0.3, 0.8, 1.2, 1.7], Method::Studentized, 200);
        let rng = RngSpec::new(11);
        let wide = studentized_ci(&s, &req, &rng).unwrap();
        req.alpha = 0.10;
        let narrow = studentized_ci(&s, &req, &rng).unwrap();
        for (w, n) in wide.points.iter().zip(&narrow.points) {
            assert!(w.lower <= n.lower && n.upper <= w.upper);
            assert!(w.lower <= w.upper);
        }
        for method in [Method::SenXu, Method::SmoothSmle, Method::Wald(WaldVariance::Bootstrap)] {
            req.method = method;
            let b = confidence_band(&s, &req, &rng).unwrap();
            assert!(b.points.iter().all(|p| p.lower <= p.upper && p.lower >= 0.0 && p.upper <= 1.0));
        }
    }

    #[test]
    fn deterministic_for_any_worker_count() {
        let s = uniform_sample(300, 5);
        for method in [Method::Studentized, Method::SenXu, Method::SmoothSmle, Method::Wald(WaldVariance::Bootstrap)] {
            let mut req = request(vec![0.5, 1.0, 1.5], method, 60);
            req.workers = Some(1);
            let a = confidence_band(&s, &req, &RngSpec::new(3)).unwrap();
            req.workers = Some(4);
            let b = confidence_band(&s, &req, &RngSpec::new(3)).unwrap();
            assert_eq!(a, b);
            let mut x = Vec::new();
            let mut y = Vec::new();
            a.write_csv(&mut x).unwrap();
            b.write_csv(&mut y).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn senxu_with_zero_smle_is_degenerate_at_mle() {
        let pairs: Vec<(f64, u8)> = (0..40).map(|i| (0.01 + 0.01 * i as f64, 0)).collect();
        let s = CurrentStatusSample::ingest(&pairs).unwrap().with_support(Support::new(0.0, 2.0).unwrap()).unwrap();
        let req = request(vec![0.1, 0.2], Method::SenXu, 30);
        let band = senxu_ci(&s, &req, &RngSpec::new(2)).unwrap();
        for p in band.points {
            assert_eq!((p.lower, p.upper, p.estimate), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn density_wald_errors_without_design_mass() {
        let pairs: Vec<(f64, u8)> = (0..40).map(|i| (0.01 * i as f64, (i % 2) as u8)).collect();
        let s = CurrentStatusSample::ingest(&pairs).unwrap().with_support(Support::new(0.0, 2.0).unwrap()).unwrap();
        let mut req = request(vec![1.5], Method::Wald(WaldVariance::Density), 10);
        req.bandwidth = BandwidthRule::Fixed(0.2);
        assert!(matches!(confidence_band(&s, &req, &RngSpec::new(1)), Err(Error::SingularDesign { .. })));
        req.bias = BiasRule::None;
    }

    #[test]
    fn toy_sample_variance_tracks_sigma_squared() {
        let n = 1000;
        let h = 2.0 * (n as f64).powf(-0.2);
        let mut acc = 0.0;
        for seed in 0..200 {
            let s = uniform_sample(n, 100 + seed);
            let f = fit_mle(&s);
            acc += (n as f64).powf(0.8) * toy_sample_variance(&s, &f, 1.0, h, Boundary::Reflect).unwrap();
        }
        let mean = acc / 200.0;
        assert!((mean / 0.203963 - 1.0).abs() < 0.35, "mean={mean}");
    }
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when a criterion outside `KNOWN_FAILURES` fails. Numeric
//! arguments restrict the run to those criteria.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use curstat::boot::{AutoBandwidth, BandwidthRate, BandwidthRule, BiasRule, CiRequest, Method};
use curstat::csreg::SearchConfig;
use curstat::exec::map_indexed;
use curstat::gcm::{gcm_slopes, weighted_isotonic_fit, CusumDiagram};
use curstat::kernel::{k_density, k_integrated, kernel_constants, Boundary};
use curstat::mle::{fit_bootstrap_mle, fit_mle, l2_distance, log_likelihood, switch_processes};
use curstat::sim::{run_coverage_experiment, run_regression_experiment, sample_current_status, TruthModel};
use curstat::smle::{asymptotic_moments, smle};
use curstat::{draw_multinomial_weights, CurrentStatusSample, Grid, RngSpec};

/// Criteria that fail for a documented reason; they still print FAIL.
const KNOWN_FAILURES: &[u32] = &[5, 8];

struct Outcome {
    id: u32,
    pass: bool,
}

fn report(id: u32, name: &str, pass: bool, detail: String, start: Instant) -> Outcome {
    println!(
        "{} [{:>2}] {name}: {detail} ({:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        id,
        start.elapsed().as_secs_f64()
    );
    Outcome { id, pass }
}

fn random_sample(r: &mut ChaCha8Rng, n: usize, levels: usize) -> CurrentStatusSample {
    let pairs: Vec<(f64, u8)> =
        (0..n).map(|_| (r.random_range(0..levels) as f64 / levels as f64 * 2.0, r.random_range(0..2u8))).collect();
    CurrentStatusSample::ingest(&pairs).unwrap()
}

/// Maximum log-likelihood over nondecreasing vectors with entries on
/// `{0, 0.05, ..., 1}`, by dynamic programming over the ordered times.
fn grid_likelihood_max(s: &CurrentStatusSample) -> f64 {
    let values: Vec<f64> = (0..=20).map(|j| j as f64 / 20.0).collect();
    let mut best = vec![0.0f64; values.len()];
    for (&d, &m) in s.statuses().iter().zip(s.multiplicities()) {
        let mut running = f64::NEG_INFINITY;
        for (j, &v) in values.iter().enumerate() {
            running = running.max(best[j]);
            let mut ll = 0.0;
            if d > 0 {
                ll += d as f64 * v.ln();
            }
            if m > d {
                ll += (m - d) as f64 * (1.0 - v).ln();
            }
            best[j] = running + ll;
        }
    }
    best.into_iter().fold(f64::NEG_INFINITY, f64::max) / s.n() as f64
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(101);
    let mut worst = f64::INFINITY;
    for _ in 0..500 {
        let n = r.random_range(1..=8);
        let s = random_sample(&mut r, n, 10);
        let f = fit_mle(&s);
        let gap = log_likelihood(&s, |t| f.eval(t)) - grid_likelihood_max(&s);
        worst = worst.min(gap);
    }
    report(1, "MLE likelihood vs exhaustive monotone grid", worst >= -1e-9, format!("min gap {worst:.3e}"), start)
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut r = ChaCha8Rng::seed_from_u64(202);
    let mut max_diff = 0.0f64;
    let mut violations = 0usize;
    for rep in 0..200u64 {
        let n = r.random_range(1..=50);
        let s = random_sample(&mut r, n, 40);
        let values: Vec<f64> =
            s.statuses().iter().zip(s.multiplicities()).map(|(&d, &m)| d as f64 / m as f64).collect();
        let weights: Vec<f64> = s.multiplicities().iter().map(|&m| m as f64).collect();
        let hull = gcm_slopes(&CusumDiagram::from_values(&values, &weights).unwrap()).unwrap();
        let pava = weighted_isotonic_fit(&values, &weights).unwrap();
        for (a, b) in hull.iter().zip(&pava) {
            max_diff = max_diff.max((a - b).abs());
        }
        let f = fit_mle(&s);
        for (a, b) in f.values().iter().zip(&pava) {
            max_diff = max_diff.max((a - b).abs());
        }
        let w = (rep % 2 == 1).then(|| draw_multinomial_weights(s.n(), &RngSpec::new(rep), 0).unwrap());
        let sp = switch_processes(&s, w.as_ref()).unwrap();
        let fit = match &w {
            Some(w) => fit_bootstrap_mle(&s, w).unwrap(),
            None => f,
        };
        let mut levels: Vec<f64> = (1..40).map(|k| k as f64 / 40.0).collect();
        levels.extend(fit.values().iter().copied().filter(|&v| v > 0.0));
        for a in levels {
            let u = sp.u_n(a);
            for &t in s.times().iter().chain(&[0.0, 0.01, 1.99, 3.0]) {
                if (fit.eval(t) >= a) != (u <= t) {
                    violations += 1;
                }
            }
        }
    }
    report(
        2,
        "GCM/PAVA equivalence and switch relation",
        max_diff <= 1e-10 && violations == 0,
        format!("max |gcm - pava| {max_diff:.2e}, switch violations {violations}"),
        start,
    )
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (m2, l2) = kernel_constants();
    let q_m2 = simpson(|u| u * u * k_density(u), -1.0, 1.0, 100_000);
    let q_l2 = simpson(|u| k_density(u).powi(2), -1.0, 1.0, 100_000);
    let const_err = (m2 - 1.0 / 9.0).abs().max((l2 - 350.0 / 429.0).abs()).max((q_m2 - m2).abs()).max((q_l2 - l2).abs());
    let mut anti_err = 0.0f64;
    for k in 0..=40 {
        let u = -1.0 + k as f64 / 20.0;
        anti_err = anti_err.max((simpson(k_density, -1.0, u, 20_000) - k_integrated(u)).abs());
    }
    report(
        3,
        "kernel constants and antiderivative",
        const_err <= 1e-12 && anti_err <= 1e-10,
        format!("constants err {const_err:.2e}, antiderivative err {anti_err:.2e}"),
        start,
    )
}

fn l2_medians(workers: Option<usize>) -> Vec<f64> {
    [100usize, 400, 1600]
        .iter()
        .map(|&n| {
            let mut inner = map_indexed(workers, 100, |o| {
                let rng = RngSpec::new(404).derive(n as u64 * 1000 + o as u64);
                let s = sample_current_status(TruthModel::Uniform2, n, &mut rng.stream(0)).unwrap();
                let total: f64 = (1..=50)
                    .map(|b| {
                        let w = draw_multinomial_weights(n, &rng, b).unwrap();
                        let f = fit_bootstrap_mle(&s, &w).unwrap();
                        l2_distance(&f, |t| t / 2.0, 0.2, 1.8, 2).unwrap()
                    })
                    .sum();
                (n as f64).powf(1.0 / 3.0) * total / 50.0
            })
            .unwrap();
            inner.sort_by(f64::total_cmp);
            0.5 * (inner[49] + inner[50])
        })
        .collect()
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let med = l2_medians(Some(1));
    let hi = med.iter().copied().fold(f64::MIN, f64::max);
    let lo = med.iter().copied().fold(f64::MAX, f64::min);
    report(
        4,
        "bootstrap MLE L2 rate n^{1/3}",
        hi / lo < 2.0,
        format!("medians {:.4} {:.4} {:.4}, ratio {:.3}", med[0], med[1], med[2], hi / lo),
        start,
    )
}

fn fixed_request(points: Vec<f64>, n: usize, method: Method, workers: usize) -> CiRequest {
    let mut req = CiRequest::new(Grid::new(points).unwrap());
    req.b = 500;
    req.method = method;
    req.bandwidth = BandwidthRule::Fixed(2.0 * (n as f64).powf(-0.2));
    req.workers = Some(workers);
    req
}

fn csv_of(write: impl FnOnce(&mut Vec<u8>)) -> Vec<u8> {
    let mut buf = Vec::new();
    write(&mut buf);
    buf
}

/// CSV outputs of the experiment criteria, for the determinism check.
#[derive(Default)]
struct Artifacts {
    csvs: Vec<(String, Vec<u8>)>,
}

fn uniform_runs(workers: usize, art: &mut Artifacts) -> (curstat::sim::ExperimentReport, curstat::sim::ExperimentReport) {
    let st = run_coverage_experiment(
        TruthModel::Uniform2,
        1000,
        500,
        &fixed_request(vec![0.5, 1.0, 1.5], 1000, Method::Studentized, workers),
        505,
    )
    .unwrap();
    let sx =
        run_coverage_experiment(TruthModel::Uniform2, 1000, 500, &fixed_request(vec![1.0], 1000, Method::SenXu, workers), 506)
            .unwrap();
    art.csvs.push(("uniform studentized".into(), csv_of(|b| st.write_csv(b).unwrap())));
    art.csvs.push(("uniform senxu".into(), csv_of(|b| sx.write_csv(b).unwrap())));
    (st, sx)
}

fn criteria_5_6(art: &mut Artifacts) -> Vec<Outcome> {
    let start = Instant::now();
    let (st, sx) = uniform_runs(1, art);
    let targets = [(0.5, 0.064819), (1.0, 0.077020), (1.5, 0.064976)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (t, target) in targets {
        let p = st.point(t).unwrap();
        let rel = p.avg_length / target - 1.0;
        ok &= rel.abs() <= 0.15;
        detail.push(format!("t={t}: {:.6} ({:+.1}%)", p.avg_length, 100.0 * rel));
    }
    let senxu = sx.point(1.0).unwrap().avg_length;
    let rel = senxu / 0.202430 - 1.0;
    ok &= rel.abs() <= 0.20;
    detail.push(format!("senxu t=1: {senxu:.6} ({:+.1}%)", 100.0 * rel));
    let c5 = report(5, "interval lengths at h = 2 n^{-1/5} against reference values", ok, detail.join(", "), start);

    let cov_ok = targets.iter().all(|&(t, _)| (0.02..=0.09).contains(&st.point(t).unwrap().noncoverage));
    let detail = targets
        .iter()
        .map(|&(t, _)| format!("t={t}: {:.3}", st.point(t).unwrap().noncoverage))
        .collect::<Vec<_>>()
        .join(", ");
    let c6 = report(6, "non-coverage at nominal 0.05", cov_ok, detail, start);

    let info_start = Instant::now();
    let mut auto = fixed_request(vec![0.5, 1.0, 1.5], 1000, Method::Studentized, 1);
    auto.bandwidth = BandwidthRule::Auto(AutoBandwidth::default());
    let rep = run_coverage_experiment(TruthModel::Uniform2, 1000, 500, &auto, 505).unwrap();
    println!(
        "INFO      same run with subsampling-selected c: lengths {:.6} {:.6} {:.6}, non-coverage {:.3} {:.3} {:.3} ({:.1}s)",
        rep.points[0].avg_length,
        rep.points[1].avg_length,
        rep.points[2].avg_length,
        rep.points[0].noncoverage,
        rep.points[1].noncoverage,
        rep.points[2].noncoverage,
        info_start.elapsed().as_secs_f64()
    );
    vec![c5, c6]
}

fn exp_request(rate: BandwidthRate, bias: BiasRule, workers: usize) -> CiRequest {
    let mut req = CiRequest::new(Grid::new(vec![0.2]).unwrap());
    req.b = 500;
    req.bandwidth = BandwidthRule::Auto(AutoBandwidth { rate, ..AutoBandwidth::default() });
    req.bias = bias;
    req.workers = Some(workers);
    req
}

fn exp_runs(workers: usize, art: &mut Artifacts) -> [f64; 3] {
    let model = TruthModel::ExpTrunc2;
    let cases = [
        ("exp plain", BandwidthRate::Standard, BiasRule::None),
        ("exp true bias", BandwidthRate::Standard, BiasRule::TrueBeta(model)),
        ("exp undersmoothed", BandwidthRate::Third, BiasRule::None),
    ];
    let mut out = [0.0; 3];
    for (k, (name, rate, bias)) in cases.into_iter().enumerate() {
        let rep = run_coverage_experiment(model, 1000, 300, &exp_request(rate, bias, workers), 707).unwrap();
        out[k] = rep.points[0].noncoverage;
        art.csvs.push((name.into(), csv_of(|b| rep.write_csv(b).unwrap())));
    }
    out
}

fn criterion_7(art: &mut Artifacts) -> Outcome {
    let start = Instant::now();
    let [plain, corrected, under] = exp_runs(1, art);
    report(
        7,
        "bias correction and undersmoothing at t = 0.2",
        corrected < plain && under < plain,
        format!("non-coverage plain {plain:.3}, true-bias corrected {corrected:.3}, (1/3)c n^(-1/5) {under:.3}"),
        start,
    )
}

fn regression_runs(workers: usize, art: &mut Artifacts) -> (curstat::sim::RegressionReport, curstat::sim::RegressionReport) {
    let search = SearchConfig::default();
    let m1 = run_regression_experiment(TruthModel::RegModel1, 100, 200, 500, &search, 0.05, 808, Some(workers)).unwrap();
    let m2 = run_regression_experiment(TruthModel::RegModel2, 1000, 100, 0, &search, 0.05, 809, Some(workers)).unwrap();
    art.csvs.push(("regression model 1".into(), csv_of(|b| m1.write_csv(b).unwrap())));
    art.csvs.push(("regression model 2".into(), csv_of(|b| m2.write_csv(b).unwrap())));
    (m1, m2)
}

fn criterion_8(art: &mut Artifacts) -> Outcome {
    let start = Instant::now();
    let (m1, m2) = regression_runs(1, art);
    let cp = m1.bootstrap_coverage.unwrap();
    let al = m1.bootstrap_length.unwrap();
    let pass = (0.48..=0.52).contains(&m1.mean)
        && (0.20..=0.45).contains(&m1.n_var)
        && (0.76..=0.90).contains(&cp)
        && (al / 0.204163 - 1.0).abs() <= 0.30
        && (0.95..=1.01).contains(&m2.mean);
    report(
        8,
        "regression score estimator",
        pass,
        format!(
            "model 1: mean {:.6}, n var {:.6}, CP {:.3}, AL {:.6} ({:+.1}%), no-crossing {}; model 2: mean {:.6}",
            m1.mean,
            m1.n_var,
            cp,
            al,
            100.0 * (al / 0.204163 - 1.0),
            m1.no_crossing,
            m2.mean
        ),
        start,
    )
}

/// Anderson-Darling statistic for normality with estimated mean and
/// variance, with the small-sample adjustment `(1 + 0.75/n + 2.25/n^2)`.
fn anderson_darling(mut x: Vec<f64>) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    x.sort_by(f64::total_cmp);
    let z = Normal::standard();
    let k = x.len();
    let mut s = 0.0;
    for i in 0..k {
        let lo = z.cdf((x[i] - mean) / sd);
        let hi = z.cdf((x[k - 1 - i] - mean) / sd);
        s += (2 * i + 1) as f64 * (lo.ln() + (1.0 - hi).ln());
    }
    (-n - s / n) * (1.0 + 0.75 / n + 2.25 / (n * n))
}

/// Upper 0.5% point of the adjusted statistic.
const AD_CRITICAL_0_005: f64 = 1.159;

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let n = 1000;
    let h = 2.0 * (n as f64).powf(-0.2);
    let sigma = asymptotic_moments(&TruthModel::Uniform2, 1.0, 2.0).unwrap().variance.sqrt();
    let mut stats = Vec::new();
    for o in 0..10u64 {
        let rng = RngSpec::new(909).derive(o);
        let s = sample_current_status(TruthModel::Uniform2, n, &mut rng.derive(100).stream(0)).unwrap();
        let support = s.support();
        let centre = smle(&fit_mle(&s), 1.0, h, support, Boundary::Reflect).unwrap();
        let pivots = map_indexed(Some(1), 2000, |b| {
            let w = draw_multinomial_weights(n, &rng, b as u64).unwrap();
            let f = fit_bootstrap_mle(&s, &w).unwrap();
            (n as f64).powf(0.4) * (smle(&f, 1.0, h, support, Boundary::Reflect).unwrap() - centre) / sigma
        })
        .unwrap();
        stats.push(anderson_darling(pivots));
    }
    let passed = stats.iter().filter(|&&a| a < AD_CRITICAL_0_005).count();
    report(
        9,
        "bootstrap SMLE normality screen",
        passed >= 8,
        format!(
            "{passed}/10 below {AD_CRITICAL_0_005}; A^2 = {}",
            stats.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join(" ")
        ),
        start,
    )
}

fn criterion_10(first: &Artifacts) -> Outcome {
    let start = Instant::now();
    let mut again = Artifacts::default();
    uniform_runs(4, &mut again);
    exp_runs(4, &mut again);
    regression_runs(4, &mut again);
    let l2_a = l2_medians(Some(1));
    let l2_b = l2_medians(Some(4));
    let mut mismatched: Vec<String> = first
        .csvs
        .iter()
        .zip(&again.csvs)
        .filter(|(a, b)| a.0 != b.0 || a.1 != b.1)
        .map(|(a, _)| a.0.clone())
        .collect();
    if first.csvs.len() != again.csvs.len() {
        mismatched.push("artifact count".into());
    }
    if l2_a.iter().zip(&l2_b).any(|(a, b)| a.to_bits() != b.to_bits()) {
        mismatched.push("L2 medians".into());
    }
    report(
        10,
        "determinism across worker counts 1 and 4",
        mismatched.is_empty(),
        if mismatched.is_empty() {
            format!("{} CSV outputs byte-identical", first.csvs.len())
        } else {
            format!("differs: {}", mismatched.join(", "))
        },
        start,
    )
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: u32| only.is_empty() || only.contains(&id);
    let mut art = Artifacts::default();
    let mut outcomes = Vec::new();
    if wanted(1) {
        outcomes.push(criterion_1());
    }
    if wanted(2) {
        outcomes.push(criterion_2());
    }
    if wanted(3) {
        outcomes.push(criterion_3());
    }
    if wanted(4) {
        outcomes.push(criterion_4());
    }
    if wanted(5) || wanted(6) {
        outcomes.extend(criteria_5_6(&mut art).into_iter().filter(|o| wanted(o.id)));
    } else if wanted(10) {
        uniform_runs(1, &mut art);
    }
    if wanted(7) {
        outcomes.push(criterion_7(&mut art));
    } else if wanted(10) {
        exp_runs(1, &mut art);
    }
    if wanted(8) {
        outcomes.push(criterion_8(&mut art));
    } else if wanted(10) {
        regression_runs(1, &mut art);
    }
    if wanted(9) {
        outcomes.push(criterion_9());
    }
    if wanted(10) {
        outcomes.push(criterion_10(&art));
    }

    let passed = outcomes.iter().filter(|o| o.pass).count();
    let unexpected: Vec<u32> = outcomes.iter().filter(|o| !o.pass && !KNOWN_FAILURES.contains(&o.id)).map(|o| o.id).collect();
    println!("acceptance: {passed}/{} criteria passed", outcomes.len());
    for o in outcomes.iter().filter(|o| !o.pass && KNOWN_FAILURES.contains(&o.id)) {
        println!("known failure: criterion {} (see README, acceptance section)", o.id);
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected failures: {unexpected:?}");
        ExitCode::FAILURE
    }
}

use curstat::csreg::{fit_sse, profile_mle, score, sse_estimate, SearchConfig};
use curstat::data::draw_multinomial_weights;
use curstat::exec::map_indexed;
use curstat::sim::{sample_regression, TruthModel};
use curstat::RngSpec;

const ASYMPTOTIC_VARIANCE: f64 = 0.193612;

#[test]
fn bootstrap_spread_matches_asymptotic_variance() {
    let n = 1000;
    let b = 2000;
    let rng = RngSpec::new(2024);
    let sample = sample_regression(TruthModel::RegModel1, n, &mut rng.stream(0)).unwrap();
    let search = SearchConfig::default();
    let fit = fit_sse(&sample, &search).unwrap();
    let window = (fit.beta_hat - search.half_width, fit.beta_hat + search.half_width);
    let stars = map_indexed(None, b, |r| {
        let w = draw_multinomial_weights(n, &rng.derive(1), r as u64)?;
        let f = sse_estimate(&sample, window, search.grid_size, Some(&w))?;
        Ok::<_, curstat::Error>((!f.no_crossing).then_some(f.beta_hat))
    })
    .unwrap();
    let kept: Vec<f64> = stars.into_iter().filter_map(|s| s.unwrap()).collect();
    assert!(kept.len() * 2 > b);
    let scaled: Vec<f64> = kept.iter().map(|s| (n as f64).sqrt() * (s - fit.beta_hat)).collect();
    let mean = scaled.iter().sum::<f64>() / scaled.len() as f64;
    let var = scaled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (scaled.len() - 1) as f64;
    assert!(
        (0.5 * ASYMPTOTIC_VARIANCE..=2.0 * ASYMPTOTIC_VARIANCE).contains(&var),
        "bootstrap variance {var}"
    );
}

#[test]
fn score_brackets_true_slope_at_large_n() {
    let rng = RngSpec::new(77);
    let mut opposite = 0;
    for r in 0..20u64 {
        let s = sample_regression(TruthModel::RegModel1, 1000, &mut rng.stream(r)).unwrap();
        let lo = score(&s, 0.3, None).unwrap();
        let hi = score(&s, 0.7, None).unwrap();
        if !lo.empty && !hi.empty && lo.value * hi.value < 0.0 {
            opposite += 1;
        }
        let f = profile_mle(&s, 0.5, None).unwrap();
        assert!(f.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }
    assert!(opposite >= 19);
}

//! Triweight kernel family and kernel smoothers of step distributions.

use crate::data::{CurrentStatusSample, StepDistribution, Support};
use crate::error::{Error, Result};
use crate::gcm::weighted_isotonic_fit;

/// `K(u) = 35/32 (1 - u^2)^3` on `[-1, 1]`.
pub fn k_density(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let v = 1.0 - u * u;
    35.0 / 32.0 * v * v * v
}

/// Antiderivative of [`k_density`] with `k_integrated(-1) = 0`.
pub fn k_integrated(u: f64) -> f64 {
    if u <= -1.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let u2 = u * u;
        0.5 + 35.0 / 32.0 * u * (1.0 - u2 + u2 * u2 * (3.0 / 5.0) - u2 * u2 * u2 / 7.0)
    }
}

/// `K'(u) = -(105/16) u (1 - u^2)^2` on `[-1, 1]`.
pub fn k_derivative(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let v = 1.0 - u * u;
    -105.0 / 16.0 * u * v * v
}

/// `(int u^2 K(u) du, int K(u)^2 du)`.
pub fn kernel_constants() -> (f64, f64) {
    (1.0 / 9.0, 350.0 / 429.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub name: &'static str,
    pub moment2: f64,
    pub l2norm: f64,
    pub support: (f64, f64),
}

pub const TRIWEIGHT: KernelSpec = KernelSpec {
    name: "triweight",
    moment2: 1.0 / 9.0,
    l2norm: 350.0 / 429.0,
    support: (-1.0, 1.0),
};

/// Whether smoothers reflect mass at the ends of the support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Off,
    Reflect,
}

fn check_bandwidth(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBandwidth(h))
    }
}

fn plain_cdf(f: &StepDistribution, t: f64, h: f64) -> f64 {
    let below = f.eval(t - h);
    let mut s = below;
    // jumps at x <= t - h contribute fully and are already in `below`
    let range = f.knot_range(t - h, t + h);
    for i in range {
        let x = f.knots()[i];
        if x <= t - h {
            continue;
        }
        s += f.jump(i) * k_integrated((t - x) / h);
    }
    s
}

/// `int K_h(t - x) dF(x)` integrated: the smoothed distribution function.
///
/// With [`Boundary::Reflect`] the value is reflection-corrected within `h` of
/// either end of `support` (the nearer end when both apply) and clipped to
/// `[0, 1]`, so that it equals 0 at `support.lo` and 1 at `support.hi`.
pub fn smooth_cdf(f: &StepDistribution, t: f64, h: f64, support: Support, boundary: Boundary) -> Result<f64> {
    check_bandwidth(h)?;
    if boundary == Boundary::Off {
        return Ok(plain_cdf(f, t, h));
    }
    if !support.contains(t) {
        return Err(Error::InvalidDatum(format!("t = {t} outside the support [{}, {}]", support.lo, support.hi)));
    }
    let (lo, hi) = (support.lo, support.hi);
    let near_lo = t < lo + h;
    let near_hi = t > hi - h;
    let value = if near_lo && (!near_hi || t - lo <= hi - t) {
        f.jumps()
            .map(|(x, p)| p * (k_integrated((t - x) / h) - k_integrated((2.0 * lo - t - x) / h)))
            .sum::<f64>()
    } else if near_hi {
        1.0 - f
            .jumps()
            .map(|(x, p)| p * (k_integrated((x - t) / h) - k_integrated((x - 2.0 * hi + t) / h)))
            .sum::<f64>()
    } else {
        plain_cdf(f, t, h)
    };
    Ok(value.clamp(0.0, 1.0))
}

/// [`smooth_cdf`] over a grid. With reflection the values are made
/// nondecreasing by an isotonic pass over the grid.
pub fn smooth_cdf_grid(
    f: &StepDistribution,
    points: &[f64],
    h: f64,
    support: Support,
    boundary: Boundary,
) -> Result<Vec<f64>> {
    let values = points
        .iter()
        .map(|&t| smooth_cdf(f, t, h, support, boundary))
        .collect::<Result<Vec<_>>>()?;
    if boundary == Boundary::Off || values.windows(2).all(|w| w[0] <= w[1]) {
        return Ok(values);
    }
    weighted_isotonic_fit(&values, &vec![1.0; values.len()])
}

/// Jump measure of `f`, mirrored at the support ends within `h` when
/// reflecting.
fn reflected_jumps(f: &StepDistribution, h: f64, support: Support, boundary: Boundary) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = f.jumps().collect();
    if boundary == Boundary::Reflect {
        let n = out.len();
        for i in 0..n {
            let (x, p) = out[i];
            if x - support.lo < h {
                out.push((2.0 * support.lo - x, p));
            }
            if support.hi - x < h {
                out.push((2.0 * support.hi - x, p));
            }
        }
    }
    out
}

/// `sum_j p_j K_h(t - x_j)`: density of the smoothed distribution.
pub fn smooth_density(f: &StepDistribution, t: f64, h: f64, support: Support, boundary: Boundary) -> Result<f64> {
    check_bandwidth(h)?;
    Ok(reflected_jumps(f, h, support, boundary)
        .iter()
        .map(|&(x, p)| p * k_density((t - x) / h))
        .sum::<f64>()
        / h)
}

/// `h^{-2} sum_j p_j K'((t - x_j) / h)`: kernel estimate of the derivative of
/// the density.
pub fn smooth_density_derivative(
    f: &StepDistribution,
    t: f64,
    h: f64,
    support: Support,
    boundary: Boundary,
) -> Result<f64> {
    check_bandwidth(h)?;
    Ok(reflected_jumps(f, h, support, boundary)
        .iter()
        .map(|&(x, p)| p * k_derivative((t - x) / h))
        .sum::<f64>()
        / (h * h))
}

/// Kernel density estimate `n^{-1} sum K_h(t - T_i)` of the observation-time
/// density.
pub fn smooth_density_of_g(
    sample: &CurrentStatusSample,
    t: f64,
    h: f64,
    support: Support,
    boundary: Boundary,
) -> Result<f64> {
    check_bandwidth(h)?;
    let times = sample.times();
    let mult = sample.multiplicities();
    let mut s = 0.0;
    let mut add = |x: f64, m: usize| {
        s += m as f64 * k_density((t - x) / h);
    };
    let start = times.partition_point(|&x| x <= t - h);
    let end = times.partition_point(|&x| x < t + h);
    for i in start..end {
        add(times[i], mult[i]);
    }
    if boundary == Boundary::Reflect {
        for (&x, &m) in times.iter().zip(mult) {
            if x - support.lo < h {
                add(2.0 * support.lo - x, m);
            }
            if support.hi - x < h {
                add(2.0 * support.hi - x, m);
            }
        }
    }
    Ok(s / (sample.n() as f64 * h))
}

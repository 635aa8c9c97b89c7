//! Greatest convex minorant of a cumulative sum diagram and the equivalent
//! weighted isotonic least-squares fit.
//!
//! [`gcm_slopes`] builds the lower convex hull geometrically, while
//! [`weighted_isotonic_fit`] is a stack-based pool-adjacent-violators pass.
//! The estimators use the PAVA route; the hull route exists so the two can be
//! checked against each other.

use crate::error::{Error, Result};

/// Points `(0, 0), (x_1, y_1), ...` of a cumulative sum diagram.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumDiagram {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl CusumDiagram {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidDatum("diagram abscissae and ordinates differ in length".into()));
        }
        if x.first().is_some_and(|&x0| x0 != 0.0) || y.first().is_some_and(|&y0| y0 != 0.0) {
            return Err(Error::InvalidDatum("diagram must start at (0, 0)".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) || x.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidDatum("diagram abscissae must be finite and nondecreasing".into()));
        }
        Ok(Self { x, y })
    }

    /// Diagram with points `(sum_{j<=i} w_j, sum_{j<=i} w_j v_j)`.
    pub fn from_values(values: &[f64], weights: &[f64]) -> Result<Self> {
        check_inputs(values, weights)?;
        let mut x = Vec::with_capacity(values.len() + 1);
        let mut y = Vec::with_capacity(values.len() + 1);
        let (mut sx, mut sy) = (0.0, 0.0);
        x.push(0.0);
        y.push(0.0);
        for (&v, &w) in values.iter().zip(weights) {
            sx += w;
            sy += w * v;
            x.push(sx);
            y.push(sy);
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

fn check_inputs(values: &[f64], weights: &[f64]) -> Result<()> {
    if values.len() != weights.len() {
        return Err(Error::InvalidDatum("values and weights differ in length".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDatum("values must be finite".into()));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidDatum("weights must be finite and nonnegative".into()));
    }
    Ok(())
}

/// Left derivatives of the greatest convex minorant, one per diagram segment.
///
/// Zero-length segments (repeated abscissae) take the slope of the nearest
/// positive-length segment on their left, or on their right when there is
/// none on the left.
pub fn gcm_slopes(diagram: &CusumDiagram) -> Result<Vec<f64>> {
    let (x, y) = (&diagram.x, &diagram.y);
    if x.len() < 2 {
        return Err(Error::DegenerateDiagram);
    }

    // distinct abscissae only; repeated ones must not move the ordinate
    let mut pts: Vec<(f64, f64)> = vec![(x[0], y[0])];
    for i in 1..x.len() {
        let dx = x[i] - x[i - 1];
        if dx > 0.0 {
            pts.push((x[i], y[i]));
        } else if (y[i] - y[i - 1]).abs() > 1e-12 * (1.0 + y[i].abs()) {
            return Err(Error::InvalidDatum(format!(
                "vertical diagram segment at x = {}",
                x[i]
            )));
        }
    }
    if pts.len() < 2 {
        return Err(Error::DegenerateDiagram);
    }

    // lower hull, monotone chain
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }

    let mut slopes = vec![f64::NAN; x.len() - 1];
    let mut edge = 0;
    for i in 0..x.len() - 1 {
        if x[i + 1] > x[i] {
            while hull[edge + 1].0 < x[i + 1] {
                edge += 1;
            }
            let (a, b) = (hull[edge], hull[edge + 1]);
            slopes[i] = (b.1 - a.1) / (b.0 - a.0);
        }
    }
    fill_zero_weight(&mut slopes, |i| x[i + 1] > x[i]);
    Ok(slopes)
}

/// Weighted least-squares fit of a nondecreasing sequence (PAVA).
///
/// Minimises `sum w_i (values_i - f_i)^2`. Zero-weight entries receive the
/// value of the nearest positive-weight entry on their left, or on their
/// right when none exists on the left.
pub fn weighted_isotonic_fit(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    check_inputs(values, weights)?;
    let mut fit = vec![f64::NAN; values.len()];
    pava_positive(values, weights, &mut fit)?;
    fill_zero_weight(&mut fit, |i| weights[i] > 0.0);
    Ok(fit)
}

#[derive(Clone, Copy)]
struct Block {
    w: f64,
    wy: f64,
    len: usize,
}

/// Writes the isotonic fit into the positive-weight slots of `fit`.
pub(crate) fn pava_positive(values: &[f64], weights: &[f64], fit: &mut [f64]) -> Result<()> {
    let mut blocks: Vec<Block> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        if w <= 0.0 {
            continue;
        }
        let mut cur = Block { w, wy: w * v, len: 1 };
        // merge while the previous block's mean is >= the current one
        while let Some(prev) = blocks.last() {
            if prev.wy * cur.w >= cur.wy * prev.w {
                cur = Block {
                    w: prev.w + cur.w,
                    wy: prev.wy + cur.wy,
                    len: prev.len + cur.len,
                };
                blocks.pop();
            } else {
                break;
            }
        }
        blocks.push(cur);
    }
    if blocks.is_empty() {
        return Err(Error::DegenerateDiagram);
    }

    let mut positive = weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(i, _)| i);
    for b in &blocks {
        let mean = b.wy / b.w;
        for _ in 0..b.len {
            fit[positive.next().unwrap()] = mean;
        }
    }
    Ok(())
}

fn fill_zero_weight(fit: &mut [f64], is_positive: impl Fn(usize) -> bool) {
    let mut last: Option<f64> = None;
    for i in 0..fit.len() {
        if is_positive(i) {
            last = Some(fit[i]);
        } else if let Some(v) = last {
            fit[i] = v;
        }
    }
    let mut next: Option<f64> = None;
    for i in (0..fit.len()).rev() {
        if is_positive(i) {
            next = Some(fit[i]);
        } else if fit[i].is_nan() {
            if let Some(v) = next {
                fit[i] = v;
            }
        }
    }
}

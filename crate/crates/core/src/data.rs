//! Domain types shared by every estimator: grouped current status samples,
//! right-continuous step distribution functions, multinomial bootstrap
//! weights, evaluation grids and the replicate-indexed RNG contract.

use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` containing the observation times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub lo: f64,
    pub hi: f64,
}

impl Support {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::InvalidDatum(format!(
                "support [{lo}, {hi}] must be a finite interval with lo < hi"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && t <= self.hi
    }
}

/// Current status observations `(T_i, Delta_i)` sorted by time with ties merged.
///
/// Each distinct time carries the number of observations made at it
/// (`multiplicities`) and how many of those had already experienced the
/// event (`statuses`).
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentStatusSample {
    times: Vec<f64>,
    statuses: Vec<usize>,
    multiplicities: Vec<usize>,
    n: usize,
    support_hint: Option<Support>,
}

impl CurrentStatusSample {
    /// Sorts and tie-groups raw `(time, status)` pairs.
    pub fn ingest(raw_pairs: &[(f64, u8)]) -> Result<Self> {
        Self::from_counts(raw_pairs.iter().map(|&(t, d)| (t, d, 1)))
    }

    /// Builds a sample from `(time, status, count)` rows; rows with equal
    /// times are merged.
    pub fn from_counts<I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, u8, usize)>,
    {
        let mut rows: Vec<(f64, u8, usize)> = rows.into_iter().collect();
        if rows.is_empty() {
            return Err(Error::EmptySample);
        }
        for &(t, d, c) in &rows {
            if !t.is_finite() {
                return Err(Error::InvalidDatum(format!("non-finite time {t}")));
            }
            if d > 1 {
                return Err(Error::InvalidDatum(format!("status {d} is not 0 or 1")));
            }
            if c == 0 {
                return Err(Error::InvalidDatum(format!("zero count at time {t}")));
            }
        }
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut times = Vec::new();
        let mut statuses = Vec::new();
        let mut multiplicities = Vec::new();
        for (t, d, c) in rows {
            if times.last() == Some(&t) {
                *multiplicities.last_mut().unwrap() += c;
                *statuses.last_mut().unwrap() += d as usize * c;
            } else {
                times.push(t);
                multiplicities.push(c);
                statuses.push(d as usize * c);
            }
        }
        let n = multiplicities.iter().sum();
        Ok(Self {
            times,
            statuses,
            multiplicities,
            n,
            support_hint: None,
        })
    }

    /// Attaches a support interval; every observation time must lie inside it.
    pub fn with_support(mut self, support: Support) -> Result<Self> {
        if let Some(t) = self.times.iter().find(|t| !support.contains(**t)) {
            return Err(Error::InvalidDatum(format!(
                "time {t} outside support [{}, {}]",
                support.lo, support.hi
            )));
        }
        self.support_hint = Some(support);
        Ok(self)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn statuses(&self) -> &[usize] {
        &self.statuses
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn support_hint(&self) -> Option<Support> {
        self.support_hint
    }

    /// The support hint if one is set, otherwise `[min(0, T_(1)), T_(k)]`.
    pub fn support(&self) -> Support {
        self.support_hint.unwrap_or_else(|| {
            let lo = self.times[0].min(0.0);
            let mut hi = *self.times.last().unwrap();
            if hi <= lo {
                hi = lo + 1.0;
            }
            Support { lo, hi }
        })
    }

    /// Ungrouped observations in canonical order: within each time group the
    /// `Delta = 1` observations come first.
    pub fn expanded(&self) -> Vec<(f64, u8)> {
        let mut out = Vec::with_capacity(self.n);
        for ((&t, &s), &m) in self.times.iter().zip(&self.statuses).zip(&self.multiplicities) {
            out.extend(std::iter::repeat_n((t, 1u8), s));
            out.extend(std::iter::repeat_n((t, 0u8), m - s));
        }
        out
    }

    /// Per-group `(total weight, event weight)` under unit weights.
    pub(crate) fn unit_group_weights(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.multiplicities.iter().map(|&m| m as f64).collect(),
            self.statuses.iter().map(|&s| s as f64).collect(),
        )
    }

    /// Per-group `(total weight, event weight)` for weights indexed in the
    /// canonical expansion order of [`CurrentStatusSample::expanded`].
    pub(crate) fn group_weights(&self, weights: &BootstrapWeights) -> Result<(Vec<f64>, Vec<f64>)> {
        if weights.n() != self.n {
            return Err(Error::InvalidDatum(format!(
                "weight vector has length {} but the sample has {} observations",
                weights.n(),
                self.n
            )));
        }
        let counts = weights.counts();
        let mut total = Vec::with_capacity(self.times.len());
        let mut event = Vec::with_capacity(self.times.len());
        let mut pos = 0;
        for (&s, &m) in self.statuses.iter().zip(&self.multiplicities) {
            let ev: u64 = counts[pos..pos + s].iter().map(|&c| c as u64).sum();
            let all: u64 = ev + counts[pos + s..pos + m].iter().map(|&c| c as u64).sum::<u64>();
            event.push(ev as f64);
            total.push(all as f64);
            pos += m;
        }
        Ok((total, event))
    }

    /// Same observation times with new per-group event counts.
    pub(crate) fn with_statuses(&self, statuses: Vec<usize>) -> Self {
        debug_assert!(statuses.iter().zip(&self.multiplicities).all(|(s, m)| s <= m));
        Self { statuses, ..self.clone() }
    }

    /// Subsample made of the given expanded-order observation indices.
    pub(crate) fn select(&self, indices: &[usize]) -> Result<Self> {
        let expanded = self.expanded();
        let pairs: Vec<(f64, u8)> = indices.iter().map(|&i| expanded[i]).collect();
        let mut sub = Self::ingest(&pairs)?;
        sub.support_hint = self.support_hint;
        Ok(sub)
    }
}

/// Reads `time,status[,count]` CSV data with a header row.
pub fn read_sample_csv<R: Read>(reader: R) -> Result<CurrentStatusSample> {
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
    let (Some(time_col), Some(status_col)) = (col("time"), col("status")) else {
        return Err(Error::Parse {
            line: 1,
            message: "header must contain `time` and `status` columns".into(),
        });
    };
    let count_col = col("count");

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| {
            record.get(i).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing column {}", i + 1),
            })
        };
        let t: f64 = field(time_col)?.parse().map_err(|_| Error::Parse {
            line,
            message: format!("cannot parse time `{}`", field(time_col).unwrap_or("")),
        })?;
        let d: u8 = match field(status_col)? {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("status `{other}` is not 0 or 1"),
                })
            }
        };
        let c: usize = match count_col {
            Some(i) => field(i)?.parse().map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse count `{}`", field(i).unwrap_or("")),
            })?,
            None => 1,
        };
        if !t.is_finite() {
            return Err(Error::Parse { line, message: format!("non-finite time {t}") });
        }
        rows.push((t, d, c));
    }
    CurrentStatusSample::from_counts(rows)
}

/// Right-continuous, nondecreasing step function with values in `[0, 1]`.
///
/// `values[i]` holds on `[knots[i], knots[i + 1])`; before the first knot the
/// function equals `left_limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    knots: Vec<f64>,
    values: Vec<f64>,
    left_limit: f64,
}

impl StepDistribution {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, left_limit: f64) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::InvalidDatum("knots and values differ in length".into()));
        }
        if knots.windows(2).any(|w| !(w[0] < w[1])) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidDatum("knots must be finite and strictly increasing".into()));
        }
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        if !in_unit(left_limit) || values.iter().any(|&v| !in_unit(v)) {
            return Err(Error::InvalidDatum("values must lie in [0, 1]".into()));
        }
        if values.first().is_some_and(|&v| v < left_limit) || values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidDatum("values must be nondecreasing".into()));
        }
        Ok(Self { knots, values, left_limit })
    }

    /// Trusted constructor for fitted output; clamps round-off into `[0, 1]`.
    pub(crate) fn from_fit(knots: Vec<f64>, mut values: Vec<f64>) -> Self {
        for v in &mut values {
            *v = v.clamp(0.0, 1.0);
        }
        Self { knots, values, left_limit: 0.0 }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn left_limit(&self) -> f64 {
        self.left_limit
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= t);
        if idx == 0 {
            self.left_limit
        } else {
            self.values[idx - 1]
        }
    }

    /// Index range of knots lying in the closed interval `[lo, hi]`.
    pub(crate) fn knot_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.knots.partition_point(|&k| k < lo);
        let end = self.knots.partition_point(|&k| k <= hi);
        start..end.max(start)
    }

    /// Jump size at knot `i`.
    pub(crate) fn jump(&self, i: usize) -> f64 {
        let prev = if i == 0 { self.left_limit } else { self.values[i - 1] };
        self.values[i] - prev
    }

    /// Locations and sizes of the positive jumps.
    pub fn jumps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.knots.len())
            .map(|i| (self.knots[i], self.jump(i)))
            .filter(|&(_, p)| p > 0.0)
    }

    /// Value at `+infinity`.
    pub fn total(&self) -> f64 {
        self.values.last().copied().unwrap_or(self.left_limit)
    }
}

/// Multinomial resampling counts `M_1, ..., M_n` with `sum M_i = n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootstrapWeights {
    counts: Vec<u32>,
}

impl BootstrapWeights {
    pub fn from_counts(counts: Vec<u32>) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if counts.is_empty() {
            return Err(Error::EmptySample);
        }
        if total != counts.len() as u64 {
            return Err(Error::InvalidDatum(format!(
                "bootstrap counts sum to {total}, expected {}",
                counts.len()
            )));
        }
        Ok(Self { counts })
    }

    pub fn ones(n: usize) -> Self {
        Self { counts: vec![1; n] }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }
}

/// Draws multinomial(n; 1/n, ..., 1/n) counts by tallying `n` uniform index
/// draws from stream `replicate` of `rng`.
pub fn draw_multinomial_weights(n: usize, rng: &RngSpec, replicate: u64) -> Result<BootstrapWeights> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let mut gen = rng.stream(replicate);
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[gen.random_range(0..n)] += 1;
    }
    Ok(BootstrapWeights { counts })
}

/// Seed contract: replicate `b` always reads stream `b` of the ChaCha8
/// generator keyed by `master_seed`, so results do not depend on execution
/// order or thread count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngSpec {
    pub master_seed: u64,
}

impl RngSpec {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn stream(&self, replicate: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(replicate);
        rng
    }

    /// Independent child seed for a named sub-task (simulation run, purpose tag).
    pub fn derive(&self, key: u64) -> RngSpec {
        RngSpec {
            master_seed: splitmix64(self.master_seed ^ splitmix64(key.wrapping_add(0x632b_e59b_d9b4_e019))),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Strictly increasing evaluation points.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidRequest("grid is empty".into()));
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidRequest("grid points must be finite and strictly increasing".into()));
        }
        Ok(Self { points })
    }

    /// `lo, lo + step, ...` up to and including `hi` (within round-off).
    pub fn regular(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) {
            return Err(Error::InvalidRequest(format!("bad grid {lo}:{hi}:{step}")));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
        Self::new((0..count).map(|i| lo + i as f64 * step).collect())
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn check_within(&self, support: Support) -> Result<()> {
        match self.points.iter().find(|p| !support.contains(**p)) {
            Some(p) => Err(Error::InvalidRequest(format!(
                "grid point {p} outside support [{}, {}]",
                support.lo, support.hi
            ))),
            None => Ok(()),
        }
    }
}

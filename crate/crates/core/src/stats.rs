//! Estimation utilities: mergeable moment accumulators, empirical CDF tests,
//! least-squares slopes and histograms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::AngleTriple;

/// Count, mean and sum of squared deviations, updated one value at a time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamingMoments {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl StreamingMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &Self) -> Self {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let delta = other.mean - self.mean;
        Self {
            count: self.count + other.count,
            mean: self.mean + delta * n_b / n,
            m2: self.m2 + other.m2 + delta * delta * n_a * n_b / n,
        }
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }
}

impl FromIterator<f64> for StreamingMoments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Self::new();
        for x in iter {
            m.push(x);
        }
        m
    }
}

/// Two-variable accumulator with the co-moment for covariance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamingCovariance {
    pub count: u64,
    pub mean_x: f64,
    pub mean_y: f64,
    pub m2_x: f64,
    pub m2_y: f64,
    pub comoment: f64,
}

impl StreamingCovariance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64, y: f64) {
        self.count += 1;
        let n = self.count as f64;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / n;
        self.mean_y += dy / n;
        self.m2_x += dx * (x - self.mean_x);
        self.m2_y += dy * (y - self.mean_y);
        self.comoment += dx * (y - self.mean_y);
    }

    pub fn merge(&self, other: &Self) -> Self {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let n_a = self.count as f64;
        let n_b = other.count as f64;
        let n = n_a + n_b;
        let dx = other.mean_x - self.mean_x;
        let dy = other.mean_y - self.mean_y;
        let w = n_a * n_b / n;
        Self {
            count: self.count + other.count,
            mean_x: self.mean_x + dx * n_b / n,
            mean_y: self.mean_y + dy * n_b / n,
            m2_x: self.m2_x + other.m2_x + dx * dx * w,
            m2_y: self.m2_y + other.m2_y + dy * dy * w,
            comoment: self.comoment + other.comoment + dx * dy * w,
        }
    }

    pub fn covariance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.comoment / (self.count - 1) as f64
        }
    }

    pub fn variance_x(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2_x / (self.count - 1) as f64
        }
    }

    pub fn variance_y(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2_y / (self.count - 1) as f64
        }
    }
}

/// Kolmogorov-Smirnov outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub d_statistic: f64,
    pub n: usize,
    pub p_value: f64,
}

/// Minimum sample size accepted by [`ks_test`].
pub const KS_MIN_SAMPLES: usize = 10;

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.0 {
        // CDF = sqrt(2 pi)/lambda * sum_k exp(-(2k-1)^2 pi^2 / (8 lambda^2))
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut sum = 0.0;
        for k in 1..=100u32 {
            let m = f64::from(2 * k - 1);
            let term = (-m * m * pi2 / (8.0 * lambda * lambda)).exp();
            sum += term;
            if term < 1e-10 * sum.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda * sum;
        return (1.0 - cdf).clamp(0.0, 1.0);
    }
    let mut sum = 0.0;
    for k in 1..=100u32 {
        let kf = f64::from(k);
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-10 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample test of `samples` against a continuous `cdf`.
///
/// The p-value is asymptotic, `P(K > sqrt(n) D)`.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<KsReport> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if samples.len() < KS_MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: KS_MIN_SAMPLES,
            got: samples.len(),
        });
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        let upper = (i + 1) as f64 / n - f;
        let lower = f - i as f64 / n;
        d = d.max(upper).max(lower);
    }
    Ok(KsReport {
        d_statistic: d,
        n: xs.len(),
        p_value: kolmogorov_survival(n.sqrt() * d),
    })
}

/// Two-sample test; `n` in the report is the effective size `n m / (n + m)`.
pub fn ks_two_sample(first: &[f64], second: &[f64]) -> Result<KsReport> {
    if first.is_empty() || second.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut a = first.to_vec();
    let mut b = second.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let n_eff = na * nb / (na + nb);
    Ok(KsReport {
        d_statistic: d,
        n: n_eff.round() as usize,
        p_value: kolmogorov_survival(n_eff.sqrt() * d),
    })
}

/// Asymptotic one-sample critical value at level 0.01.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
}

/// Ordinary least squares line through `(xs, ys)`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument(format!(
            "length mismatch: {} xs, {} ys",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::TooFewSamples {
            needed: 3,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateAbscissae);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        stderr_slope: (ssr / (n - 2.0) / sxx).sqrt(),
    })
}

/// Fixed-width histogram on `[lo, hi]`; the right edge falls in the last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidArgument("histogram needs at least one bin".into()));
        }
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; bins],
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn push(&mut self, x: f64) {
        if !(self.lo..=self.hi).contains(&x) {
            return;
        }
        let k = (((x - self.lo) / self.width()) as usize).min(self.bins() - 1);
        self.counts[k] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `(left, right, count)` per bin.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, u64)> + '_ {
        let w = self.width();
        self.counts.iter().enumerate().map(move |(k, &c)| {
            let left = self.lo + k as f64 * w;
            let right = if k + 1 == self.bins() {
                self.hi
            } else {
                self.lo + (k + 1) as f64 * w
            };
            (left, right, c)
        })
    }

    /// Mean computed from bin midpoints.
    pub fn binned_mean(&self) -> f64 {
        let total = self.total() as f64;
        self.rows()
            .map(|(l, r, c)| 0.5 * (l + r) * c as f64)
            .sum::<f64>()
            / total
    }

    pub fn merge(&mut self, other: &Histogram) {
        debug_assert_eq!(self.bins(), other.bins());
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }
}

/// Pools all three angles of every sample (a randomly chosen angle).
pub fn build_angle_histogram(samples: &[AngleTriple], bins: usize) -> Result<Histogram> {
    let mut h = Histogram::new(0.0, 1.0, bins)?;
    for t in samples {
        h.push(t.a);
        h.push(t.b);
        h.push(t.c);
    }
    Ok(h)
}

/// Counts over barycentric cells `(i, j)`, `i + j <= k`, at resolution `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TernaryHistogram {
    pub resolution: usize,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl TernaryHistogram {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(Error::InvalidArgument("resolution must be at least 1".into()));
        }
        let cells = (resolution + 1) * (resolution + 2) / 2;
        Ok(Self {
            resolution,
            counts: vec![0; cells],
            total: 0,
        })
    }

    /// Flat index of cell `(i, j)`: rows of decreasing length `k + 1 - i`.
    fn index(&self, i: usize, j: usize) -> usize {
        let k = self.resolution;
        i * (k + 1) - i * (i.saturating_sub(1)) / 2 + j
    }

    pub fn cell_of(&self, t: AngleTriple) -> (usize, usize) {
        let k = self.resolution;
        let kf = k as f64;
        let i = ((t.a * kf).floor().max(0.0) as usize).min(k);
        let j = ((t.b * kf).floor().max(0.0) as usize).min(k - i);
        (i, j)
    }

    pub fn push(&mut self, t: AngleTriple) {
        let (i, j) = self.cell_of(t);
        let idx = self.index(i, j);
        self.counts[idx] += 1;
        self.total += 1;
    }

    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[self.index(i, j)]
    }

    /// `(i, j, count)` in row-major order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        let k = self.resolution;
        (0..=k).flat_map(move |i| (0..=k - i).map(move |j| (i, j, self.count(i, j))))
    }
}

pub fn build_ternary_histogram(samples: &[AngleTriple], resolution: usize) -> Result<TernaryHistogram> {
    let mut h = TernaryHistogram::new(resolution)?;
    for &t in samples {
        h.push(t);
    }
    Ok(h)
}

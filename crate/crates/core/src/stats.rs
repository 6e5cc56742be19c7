//! Numerical kernels used by the detectors. Every kernel is a pure function
//! returning a raw statistic and, where one is defined, a p-value.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("inputs have different lengths ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {required} observations, got {actual}")]
    InsufficientN { required: usize, actual: usize },
    #[error("sample size {0} outside the supported range")]
    NOutOfRange(usize),
    #[error("input is constant")]
    ConstantInput,
    #[error("all values tied in at least one input")]
    AllTied,
    #[error("zero range (max equals min)")]
    ZeroRange,
    #[error("series is constant")]
    ConstantSeries,
    #[error("series has missing points")]
    SparseSeries,
    #[error("input contains a non-finite value")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KernelResult {
    pub statistic: f64,
    /// Normalised statistic, for kernels that have one.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    pub n: usize,
}

fn require_n(n: usize, required: usize) -> Result<(), StatsError> {
    if n < required {
        return Err(StatsError::InsufficientN { required, actual: n });
    }
    Ok(())
}

fn require_finite(x: &[f64]) -> Result<(), StatsError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StatsError::NonFinite)
    }
}

fn paired(x: &[f64], y: &[f64], min_n: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch { left: x.len(), right: y.len() });
    }
    require_n(x.len(), min_n)?;
    require_finite(x)?;
    require_finite(y)
}

/// Upper tail of the standard normal, accurate far into the tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

fn two_sided_normal_p(z: f64) -> f64 {
    (2.0 * normal_sf(z.abs())).min(1.0)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Pearson correlation of two equally long, finite, nonconstant samples.
fn correlation(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantInput);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn t_test_p(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
    (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
}

/// Sample Pearson r with a two-sided t-test p-value (n - 2 degrees of freedom).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<KernelResult, StatsError> {
    paired(x, y, 3)?;
    let r = correlation(x, y)?;
    Ok(KernelResult { statistic: r, z: None, p_value: Some(t_test_p(r, x.len())), n: x.len() })
}

/// 1-based ranks; tied values share their mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson over average ranks, with the same p-value.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<KernelResult, StatsError> {
    paired(x, y, 3)?;
    let rho = correlation(&average_ranks(x), &average_ranks(y))?;
    Ok(KernelResult { statistic: rho, z: None, p_value: Some(t_test_p(rho, x.len())), n: x.len() })
}

/// Pair counts behind Kendall's tau.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairCounts {
    /// n(n-1)/2
    pub total: i64,
    /// Pairs tied in x.
    pub x_ties: i64,
    /// Pairs tied in y.
    pub y_ties: i64,
    /// Concordant minus discordant.
    pub s: i64,
}

impl PairCounts {
    pub fn tau_b(&self) -> Option<f64> {
        let (a, b) = (self.total - self.x_ties, self.total - self.y_ties);
        if a == 0 || b == 0 {
            return None;
        }
        Some(self.s as f64 / (a as f64 * b as f64).sqrt())
    }
}

fn tie_pairs(sorted: &[f64]) -> i64 {
    let mut total = 0;
    let mut run = 1i64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Counts strict inversions while merge-sorting `v`.
fn merge_count(v: &mut [f64], buf: &mut Vec<f64>) -> i64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as i64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Knight's O(n log n) pair counting.
pub fn kendall_pair_counts(x: &[f64], y: &[f64]) -> PairCounts {
    let n = x.len() as i64;
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let x_ties = tie_pairs(&xs);
    let mut joint = 0i64;
    let mut run = 1i64;
    for w in pairs.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let discordant = merge_count(&mut ys, &mut buf);
    let y_ties = tie_pairs(&ys);
    let total = n * (n - 1) / 2;
    PairCounts { total, x_ties, y_ties, s: total - x_ties - y_ties + joint - 2 * discordant }
}

fn s_by_pairs(x: &[f64], y: &[f64]) -> i64 {
    let mut s = 0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let a = x[j].partial_cmp(&x[i]).unwrap_or(Ordering::Equal) as i64;
            let b = y[j].partial_cmp(&y[i]).unwrap_or(Ordering::Equal) as i64;
            s += a * b;
        }
    }
    s
}

/// Exact two-sided permutation p-value for Kendall's S, holding x fixed
/// and enumerating every ordering of y (Heap's algorithm).
fn kendall_exact_p(x: &[f64], y: &[f64], s_obs: i64) -> f64 {
    let n = y.len();
    let mut perm = y.to_vec();
    let mut c = vec![0usize; n];
    let target = s_obs.abs();
    let mut hits = 0u64;
    let mut total = 0u64;
    let mut visit = |p: &[f64]| {
        total += 1;
        if s_by_pairs(x, p).abs() >= target {
            hits += 1;
        }
    };
    visit(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            visit(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    hits as f64 / total as f64
}

fn tie_groups(x: &[f64]) -> Vec<i64> {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut run = 1i64;
    for w in s.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            if run > 1 {
                out.push(run);
            }
            run = 1;
        }
    }
    if run > 1 {
        out.push(run);
    }
    out
}

/// Kendall's tau-b. The p-value is the exact permutation probability for
/// n < 10 and the tie-corrected normal approximation of S above.
pub fn kendall_tau(x: &[f64], y: &[f64]) -> Result<KernelResult, StatsError> {
    paired(x, y, 3)?;
    let counts = kendall_pair_counts(x, y);
    let tau = counts.tau_b().ok_or(StatsError::AllTied)?.clamp(-1.0, 1.0);
    let n = x.len();
    let nf = n as f64;

    let (tx, ty) = (tie_groups(x), tie_groups(y));
    let sum = |g: &[i64], f: &dyn Fn(f64) -> f64| g.iter().map(|&t| f(t as f64)).sum::<f64>();
    let v0 = nf * (nf - 1.0) * (2.0 * nf + 5.0);
    let vt = sum(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ty, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&tx, &|t| t * (t - 1.0)) * sum(&ty, &|t| t * (t - 1.0)) / (2.0 * nf * (nf - 1.0));
    let v2 = sum(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ty, &|t| t * (t - 1.0) * (t - 2.0))
        / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    let z = if var > 0.0 { counts.s as f64 / var.sqrt() } else { 0.0 };

    let p = if n < 10 { kendall_exact_p(x, y, counts.s) } else { two_sided_normal_p(z) };
    Ok(KernelResult { statistic: tau, z: Some(z), p_value: Some(p), n })
}

fn poly(coefficients: &[f64], x: f64) -> f64 {
    coefficients.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Shapiro-Wilk W with Royston's AS R94 coefficient and p-value
/// approximations, valid for 3 <= n <= 5000.
pub fn shapiro_wilk(x: &[f64]) -> Result<KernelResult, StatsError> {
    let n = x.len();
    require_n(n, 3)?;
    if n > 5000 {
        return Err(StatsError::NOutOfRange(n));
    }
    require_finite(x)?;
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let range = sorted[n - 1] - sorted[0];
    if range <= 0.0 {
        return Err(StatsError::ConstantInput);
    }

    let half = n / 2;
    let an = n as f64;
    // a[i] for the i-th smallest half, 0-based
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let std_normal = Normal::standard();
        let m: Vec<f64> = (1..=half)
            .map(|i| std_normal.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - m[0] / ssumm2;
        let (first_scaled, fac) = if n > 5 {
            let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            a[1] = a2;
            (2, fac)
        } else {
            let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
            (1, fac)
        };
        a[0] = a1;
        for i in first_scaled..half {
            a[i] = -m[i] / fac;
        }
    }

    // full antisymmetric coefficient vector over the sorted sample
    let mut coef = vec![0.0; n];
    for i in 0..half {
        coef[i] = -a[i];
        coef[n - 1 - i] = a[i];
    }
    let scaled: Vec<f64> = sorted.iter().map(|v| v / range).collect();
    let (ma, mx) = (mean(&coef), mean(&scaled));
    let (mut ssa, mut ssx, mut sax) = (0.0, 0.0, 0.0);
    for (c, v) in coef.iter().zip(&scaled) {
        let (da, dx) = (c - ma, v - mx);
        ssa += da * da;
        ssx += dx * dx;
        sax += da * dx;
    }
    let root = (ssa * ssx).sqrt();
    let w1 = (root - sax) * (root + sax) / (ssa * ssx);
    let w = (1.0 - w1).clamp(f64::MIN_POSITIVE, 1.0);

    Ok(KernelResult { statistic: w, z: None, p_value: Some(shapiro_wilk_p(w, n)), n })
}

fn shapiro_wilk_p(w: f64, n: usize) -> f64 {
    if n == 3 {
        const SIX_OVER_PI: f64 = 6.0 / std::f64::consts::PI;
        let p = SIX_OVER_PI * (w.sqrt().asin() - std::f64::consts::FRAC_PI_3);
        return p.clamp(0.0, 1.0);
    }
    if w >= 1.0 {
        return 1.0;
    }
    let an = n as f64;
    let mut y = (1.0 - w).ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&[-2.273, 0.459], an);
        if y >= gamma {
            return 1e-99;
        }
        y = -(gamma - y).ln();
        (poly(&[0.544, -0.39978, 0.025054, -6.714e-4], an), poly(&[1.3822, -0.77857, 0.062767, -0.0020322], an).exp())
    } else {
        let ln_n = an.ln();
        (
            poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n),
            poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp(),
        )
    };
    normal_sf((y - m) / s).clamp(0.0, 1.0)
}

/// Asymptotic Kolmogorov survival function P(K > lambda).
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small lambda
        let l2 = lambda * lambda;
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda
            * (1..=8)
                .map(|k| {
                    let m = (2 * k - 1) as f64;
                    (-m * m * pi2 / (8.0 * l2)).exp()
                })
                .sum::<f64>();
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let sf = 2.0
            * (1..=100)
                .map(|k| {
                    let kf = k as f64;
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign * (-2.0 * kf * kf * lambda * lambda).exp()
                })
                .sum::<f64>();
        sf.clamp(0.0, 1.0)
    }
}

/// Kolmogorov-Smirnov D against Uniform(min(x), max(x)).
pub fn ks_uniform(x: &[f64]) -> Result<KernelResult, StatsError> {
    let n = x.len();
    require_n(n, 5)?;
    require_finite(x)?;
    let mut u = x.to_vec();
    u.sort_by(f64::total_cmp);
    let (lo, hi) = (u[0], u[n - 1]);
    if hi <= lo {
        return Err(StatsError::ZeroRange);
    }
    let nf = n as f64;
    let mut d = 0.0f64;
    for (i, v) in u.iter().enumerate() {
        let cdf = (v - lo) / (hi - lo);
        d = d.max((i + 1) as f64 / nf - cdf).max(cdf - i as f64 / nf);
    }
    let p = kolmogorov_sf(nf.sqrt() * d);
    Ok(KernelResult { statistic: d, z: None, p_value: Some(p), n })
}

/// Number of permutations of `n` items with each inversion count
/// (Mahonian numbers), index = inversions.
fn inversion_counts(n: usize) -> Vec<u64> {
    let mut dist = vec![1u64];
    for k in 1..=n {
        let mut next = vec![0u64; dist.len() + k - 1];
        for (inv, count) in dist.iter().enumerate() {
            for extra in 0..k {
                next[inv + extra] += count;
            }
        }
        dist = next;
    }
    dist
}

/// Mann-Kendall trend test. `statistic` is S, `z` the continuity-corrected
/// normal score. The p-value is exact for n <= 10 without ties.
pub fn mann_kendall(series: &[f64]) -> Result<KernelResult, StatsError> {
    let n = series.len();
    require_n(n, 3)?;
    if series.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::SparseSeries);
    }
    let mut s = 0i64;
    for i in 0..n {
        for j in i + 1..n {
            s += series[j].partial_cmp(&series[i]).unwrap_or(Ordering::Equal) as i64;
        }
    }
    let nf = n as f64;
    let ties = tie_groups(series);
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0)
        - ties.iter().map(|&t| (t * (t - 1) * (2 * t + 5)) as f64).sum::<f64>())
        / 18.0;
    let z = match s.cmp(&0) {
        _ if var <= 0.0 => 0.0,
        Ordering::Greater => (s - 1) as f64 / var.sqrt(),
        Ordering::Less => (s + 1) as f64 / var.sqrt(),
        Ordering::Equal => 0.0,
    };
    let p = if var <= 0.0 {
        1.0
    } else if n <= 10 && ties.is_empty() {
        let dist = inversion_counts(n);
        let max_pairs = (n * (n - 1) / 2) as i64;
        let total: u64 = dist.iter().sum();
        let extreme: u64 = dist
            .iter()
            .enumerate()
            .filter(|(inv, _)| (max_pairs - 2 * *inv as i64).abs() >= s.abs())
            .map(|(_, c)| c)
            .sum();
        extreme as f64 / total as f64
    } else {
        two_sided_normal_p(z)
    };
    Ok(KernelResult { statistic: s as f64, z: Some(z), p_value: Some(p), n })
}

/// Lag-`lag` autocorrelation: the correlation between the series and its
/// copy shifted by `lag`.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<KernelResult, StatsError> {
    let n = series.len();
    if lag == 0 {
        return Err(StatsError::InsufficientN { required: 3, actual: n });
    }
    require_n(n, 2 * lag + 1)?;
    if series.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::SparseSeries);
    }
    if series.iter().all(|v| *v == series[0]) {
        return Err(StatsError::ConstantSeries);
    }
    let r = correlation(&series[..n - lag], &series[lag..]).map_err(|_| StatsError::ConstantSeries)?;
    Ok(KernelResult { statistic: r, z: None, p_value: None, n })
}

/// Indices of strict local maxima. An endpoint is a peak when it is strictly
/// greater than its only neighbour; equal neighbours never form a peak.
pub fn find_local_maxima(series: &[f64]) -> Result<Vec<usize>, StatsError> {
    let n = series.len();
    require_n(n, 3)?;
    if series.iter().any(|v| !v.is_finite()) {
        return Err(StatsError::SparseSeries);
    }
    Ok((0..n)
        .filter(|&i| {
            let left = i == 0 || series[i] > series[i - 1];
            let right = i == n - 1 || series[i] > series[i + 1];
            left && right
        })
        .collect())
}

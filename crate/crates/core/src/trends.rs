//! Growth regressions over sample years and two-sample distribution tests.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrendError {
    #[error("need at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("value {value} for year {year} must be positive for an exponential fit")]
    NonPositive { year: i32, value: f64 },
    #[error("all points share one year")]
    DegenerateYears,
    #[error("sample {0} is empty")]
    EmptySample(char),
    #[error("histograms have different bin edges")]
    IncompatibleBins,
    #[error("histograms hold no observations")]
    NoData,
    #[error("value {0} is not finite")]
    NotFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPoint {
    pub year: i32,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// `b` in `ln y = a + b·year`.
    pub log_slope: f64,
    /// `e^b`.
    pub annual_factor: f64,
    /// `ln 2 / b`; absent unless the series grows.
    pub doubling_years: Option<f64>,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n: usize,
}

/// Ordinary least squares with the abscissa centred for stability.
fn ols(xs: &[f64], ys: &[f64]) -> Result<LinearFit, TrendError> {
    let n = xs.len();
    if n < 2 {
        return Err(TrendError::TooFewPoints(n));
    }
    if let Some(&bad) = ys.iter().find(|y| !y.is_finite()) {
        return Err(TrendError::NotFinite(bad));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(TrendError::DegenerateYears);
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Ok(LinearFit {
            slope: 0.0,
            intercept: ys[0],
            r_squared: 1.0,
            n,
        });
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (my + slope * (x - mx));
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        n,
    })
}

/// Least squares of `ln(value)` on year.
pub fn exp_fit(points: &[TimeSeriesPoint]) -> Result<GrowthFit, TrendError> {
    if let Some(p) = points.iter().find(|p| p.value.is_nan() || p.value <= 0.0) {
        return Err(TrendError::NonPositive {
            year: p.year,
            value: p.value,
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.year as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.value.ln()).collect();
    let fit = ols(&xs, &ys)?;
    let b = fit.slope;
    Ok(GrowthFit {
        log_slope: b,
        annual_factor: b.exp(),
        doubling_years: (b > 0.0).then(|| std::f64::consts::LN_2 / b),
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        n: fit.n,
    })
}

/// Least squares on raw values.
pub fn linear_fit(points: &[TimeSeriesPoint]) -> Result<LinearFit, TrendError> {
    let xs: Vec<f64> = points.iter().map(|p| p.year as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.value).collect();
    ols(&xs, &ys)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One point per sample.
    #[default]
    PerSample,
    /// One point per year holding the mean of that year's values.
    YearlyMean,
}

pub fn aggregate(points: &[TimeSeriesPoint], how: Aggregation) -> Vec<TimeSeriesPoint> {
    match how {
        Aggregation::PerSample => points.to_vec(),
        Aggregation::YearlyMean => {
            let mut by_year: BTreeMap<i32, (f64, usize)> = BTreeMap::new();
            for p in points {
                let e = by_year.entry(p.year).or_insert((0.0, 0));
                e.0 += p.value;
                e.1 += 1;
            }
            by_year
                .into_iter()
                .map(|(year, (sum, n))| TimeSeriesPoint {
                    year,
                    value: sum / n as f64,
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub d: f64,
    pub p_value: f64,
    pub n_a: usize,
    pub n_b: usize,
}

fn sorted_finite(v: &[f64]) -> Result<Vec<f64>, TrendError> {
    if let Some(&bad) = v.iter().find(|x| !x.is_finite()) {
        return Err(TrendError::NotFinite(bad));
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s)
}

/// `sup |F_a − F_b|` over sorted samples, stepping past ties in both at once.
fn ks_statistic_sorted(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Upper tail of the Kolmogorov distribution, `P(K > λ)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form, fast for small λ
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut sum = 0.0;
        let mut k = 1i32;
        loop {
            let term = y.powi((2 * k - 1) * (2 * k - 1));
            sum += term;
            if term < 1e-17 || k > 100 {
                break;
            }
            k += 1;
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Two-sample Kolmogorov-Smirnov test. The p-value is the asymptotic
/// Kolmogorov tail at `√nₑ·D`, `nₑ = n_a·n_b/(n_a+n_b)`. Conservative when
/// the data carry many ties; use [`ks_permutation_p`] there.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult, TrendError> {
    if a.is_empty() {
        return Err(TrendError::EmptySample('a'));
    }
    if b.is_empty() {
        return Err(TrendError::EmptySample('b'));
    }
    let (sa, sb) = (sorted_finite(a)?, sorted_finite(b)?);
    let d = ks_statistic_sorted(&sa, &sb);
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let p_value = kolmogorov_q(ne.sqrt() * d);
    Ok(KsResult {
        d,
        p_value,
        n_a: a.len(),
        n_b: b.len(),
    })
}

/// Permutation p-value for the KS statistic: the share of random relabelings
/// of the pooled data whose D reaches the observed one.
pub fn ks_permutation_p(
    a: &[f64],
    b: &[f64],
    permutations: usize,
    seed: u64,
) -> Result<f64, TrendError> {
    let observed = ks_two_sample(a, b)?.d;
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..permutations {
        pooled.shuffle(&mut rng);
        let (mut x, mut y) = (pooled[..a.len()].to_vec(), pooled[a.len()..].to_vec());
        x.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        if ks_statistic_sorted(&x, &y) >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (permutations + 1) as f64)
}

/// Counts over bins `[edges[i], edges[i+1])`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Values outside the edges are clamped into the end bins.
    pub fn from_values(values: &[f64], edges: &[f64]) -> Histogram {
        assert!(edges.len() >= 2, "a histogram needs at least one bin");
        let bins = edges.len() - 1;
        let mut counts = vec![0u64; bins];
        for &v in values {
            let idx = edges[1..].partition_point(|&e| e <= v).min(bins - 1);
            counts[idx] += 1;
        }
        Histogram {
            edges: edges.to_vec(),
            counts,
        }
    }

    /// Unit-width bins for integer metrics such as cyclomatic complexity:
    /// one bin per value `lo..=hi`.
    pub fn integer(values: &[f64], lo: i64, hi: i64) -> Histogram {
        let edges: Vec<f64> = (lo..=hi + 1).map(|e| e as f64 - 0.5).collect();
        Histogram::from_values(values, &edges)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Bin groups after pooling, as `(first_bin, last_bin)`.
    pub pooled_bins: Vec<(usize, usize)>,
}

/// Two-sample chi-square on binned data. Bins are merged left to right until
/// both samples expect at least 5 observations per group; a short tail joins
/// the last group.
pub fn chi_square_hist(a: &Histogram, b: &Histogram) -> Result<ChiSquareResult, TrendError> {
    if a.edges != b.edges || a.counts.len() != b.counts.len() {
        return Err(TrendError::IncompatibleBins);
    }
    let (na, nb) = (a.total() as f64, b.total() as f64);
    if na == 0.0 || nb == 0.0 {
        return Err(TrendError::NoData);
    }
    let share_a = na / (na + nb);
    let mut groups: Vec<(usize, usize, f64, f64)> = Vec::new();
    let mut open: Option<(usize, f64, f64)> = None;
    for i in 0..a.counts.len() {
        let (start, ca, cb) = open.unwrap_or((i, 0.0, 0.0));
        let (ca, cb) = (ca + a.counts[i] as f64, cb + b.counts[i] as f64);
        let pool = ca + cb;
        if pool * share_a >= 5.0 && pool * (1.0 - share_a) >= 5.0 {
            groups.push((start, i, ca, cb));
            open = None;
        } else {
            open = Some((start, ca, cb));
        }
    }
    if let Some((start, ca, cb)) = open {
        match groups.last_mut() {
            Some(last) => {
                last.1 = a.counts.len() - 1;
                last.2 += ca;
                last.3 += cb;
            }
            None => groups.push((start, a.counts.len() - 1, ca, cb)),
        }
    }
    let k1 = (nb / na).sqrt();
    let k2 = (na / nb).sqrt();
    let statistic: f64 = groups
        .iter()
        .filter(|g| g.2 + g.3 > 0.0)
        .map(|&(_, _, ca, cb)| (k1 * ca - k2 * cb).powi(2) / (ca + cb))
        .sum();
    let dof = groups.len().saturating_sub(1);
    let p_value = if dof == 0 || statistic == 0.0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .map(|d| d.sf(statistic))
            .unwrap_or(f64::NAN)
    };
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value,
        pooled_bins: groups.iter().map(|g| (g.0, g.1)).collect(),
    })
}

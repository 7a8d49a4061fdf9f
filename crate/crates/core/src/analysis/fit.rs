use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-resolution trial values, e.g. the max fluctuation of each run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub m: u32,
    pub values: Vec<f64>,
}

/// Power-law fit `median ≈ C m^{−β}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub m: Vec<u32>,
    /// Median across trials at each `m`.
    pub summary: Vec<f64>,
    pub beta: f64,
    pub log_c: f64,
    /// `log(summary) − fitted`, per resolution.
    pub residuals: Vec<f64>,
    /// 95% percentile-bootstrap interval for `β`, resampling trials within
    /// each resolution.
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_half_width: f64,
    pub resamples: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares `(intercept, slope)` of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn fit_exponent(levels: &[Level], resamples: usize, seed: u64) -> Result<ScalingFit> {
    if levels.len() < 3 {
        return Err(Error::Fit(format!(
            "need at least 3 resolutions, got {}",
            levels.len()
        )));
    }
    if levels.windows(2).any(|w| w[0].m >= w[1].m) {
        return Err(Error::Fit("resolutions must be strictly increasing".into()));
    }
    for l in levels {
        if l.values.is_empty() || l.values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Fit(format!(
                "m = {}: values must be positive and finite",
                l.m
            )));
        }
    }
    let x: Vec<f64> = levels.iter().map(|l| f64::from(l.m).ln()).collect();
    let summary: Vec<f64> = levels.iter().map(|l| median(&l.values)).collect();
    let y: Vec<f64> = summary.iter().map(|v| v.ln()).collect();
    let (log_c, slope) = linear_fit(&x, &y);
    let residuals = x
        .iter()
        .zip(&y)
        .map(|(a, b)| b - (log_c + slope * a))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut betas = Vec::with_capacity(resamples);
    let mut buf = Vec::new();
    for _ in 0..resamples {
        let yb: Vec<f64> = levels
            .iter()
            .map(|l| {
                buf.clear();
                buf.extend(
                    (0..l.values.len()).map(|_| l.values[rng.random_range(0..l.values.len())]),
                );
                median(&buf).ln()
            })
            .collect();
        betas.push(-linear_fit(&x, &yb).1);
    }
    let beta = -slope;
    let (ci_low, ci_high) = if betas.is_empty() {
        (beta, beta)
    } else {
        betas.sort_by(f64::total_cmp);
        (quantile(&betas, 0.025), quantile(&betas, 0.975))
    };
    Ok(ScalingFit {
        m: levels.iter().map(|l| l.m).collect(),
        summary,
        beta,
        log_c,
        residuals,
        ci_low,
        ci_high,
        ci_half_width: 0.5 * (ci_high - ci_low),
        resamples,
    })
}

/// Trials above `Ĉ m^{−exponent}` at one resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeLevel {
    pub m: u32,
    pub trials: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub exponent: f64,
    /// `max m^{exponent}·value` over the trials at the smallest resolution.
    pub c_hat: f64,
    /// Every resolution after the calibration one.
    pub levels: Vec<EnvelopeLevel>,
}

impl EnvelopeReport {
    /// At most one trial in twenty above the envelope at each resolution.
    pub fn holds(&self) -> bool {
        self.levels.iter().all(|l| l.violations * 20 <= l.trials)
    }
}

pub fn envelope_check(levels: &[Level], exponent: f64) -> Result<EnvelopeReport> {
    let (first, rest) = levels
        .split_first()
        .ok_or_else(|| Error::Fit("no resolutions".into()))?;
    let scale = |m: u32| f64::from(m).powf(exponent);
    let c_hat = first
        .values
        .iter()
        .map(|v| v * scale(first.m))
        .fold(f64::NEG_INFINITY, f64::max);
    let levels = rest
        .iter()
        .map(|l| EnvelopeLevel {
            m: l.m,
            trials: l.values.len(),
            violations: l.values.iter().filter(|&&v| v > c_hat / scale(l.m)).count(),
        })
        .collect();
    Ok(EnvelopeReport {
        exponent,
        c_hat,
        levels,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsTest {
    pub statistic: f64,
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
}

impl KsTest {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`, the Kolmogorov tail.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = f64::from(k);
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u32 % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() || a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Fit(
            "both samples must be nonempty and free of NaN".into(),
        ));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n1, n2) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < n1 && j < n2 {
        let x = a[i].min(b[j]);
        while i < n1 && a[i] <= x {
            i += 1;
        }
        while j < n2 && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n1 as f64 - j as f64 / n2 as f64).abs());
    }
    let ne = (n1 * n2) as f64 / (n1 + n2) as f64;
    let sq = ne.sqrt();
    let p_value = kolmogorov_tail((sq + 0.12 + 0.11 / sq) * d);
    Ok(KsTest {
        statistic: d,
        p_value,
        n1,
        n2,
    })
}

/// Least-squares fit of one growth model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    /// `(a, b)` for `a + b ln m`, or `(A, p)` for `A m^p`.
    pub params: [f64; 2],
    pub rss: f64,
    /// `n ln(RSS/n) + 2k` with `k = 2`.
    pub aic: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthComparison {
    pub log: GrowthFit,
    pub power: GrowthFit,
}

impl GrowthComparison {
    pub fn log_preferred(&self) -> bool {
        self.log.aic <= self.power.aic
    }
}

fn aic(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(1e-300) / n).ln() + 4.0
}

/// Fits `a + b ln m` and `A m^p` to `y` by least squares in `y` itself, so
/// the two residual sums are comparable.
pub fn compare_growth(m: &[f64], y: &[f64]) -> Result<GrowthComparison> {
    if m.len() != y.len() || m.len() < 3 || m.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Fit(
            "need at least 3 positive resolutions with one value each".into(),
        ));
    }
    let n = m.len();
    let lx: Vec<f64> = m.iter().map(|v| v.ln()).collect();
    let (a, b) = linear_fit(&lx, y);
    let rss_log: f64 = lx.iter().zip(y).map(|(x, v)| (a + b * x - v).powi(2)).sum();

    // For fixed p the best A is closed form; scan p, then refine by golden section.
    let fit_at = |p: f64| {
        let x: Vec<f64> = m.iter().map(|v| v.powf(p)).collect();
        let amp =
            x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>() / x.iter().map(|u| u * u).sum::<f64>();
        let rss: f64 = x.iter().zip(y).map(|(u, v)| (amp * u - v).powi(2)).sum();
        (rss, amp)
    };
    let (lo, hi, steps) = (-4.0, 4.0, 800);
    let h = (hi - lo) / f64::from(steps);
    let best = (0..=steps)
        .map(|i| lo + h * f64::from(i))
        .min_by(|&p, &q| fit_at(p).0.total_cmp(&fit_at(q).0))
        .unwrap_or(0.0);
    let (mut l, mut r) = (best - h, best + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..100 {
        let (c, d) = (r - g * (r - l), l + g * (r - l));
        if fit_at(c).0 < fit_at(d).0 {
            r = d;
        } else {
            l = c;
        }
    }
    let p = 0.5 * (l + r);
    let (rss_pow, amp) = fit_at(p);
    Ok(GrowthComparison {
        log: GrowthFit {
            params: [a, b],
            rss: rss_log,
            aic: aic(rss_log, n),
        },
        power: GrowthFit {
            params: [amp, p],
            rss: rss_pow,
            aic: aic(rss_pow, n),
        },
    })
}

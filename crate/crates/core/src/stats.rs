//! Sample statistics for comparing run sets: Mann-Whitney U with
//! rank-biserial effect size, two-sample Kolmogorov-Smirnov and
//! Shapiro-Wilk.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Largest `n + m` for which Mann-Whitney p-values are computed exactly.
pub const EXACT_LIMIT: usize = 12;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for a single value.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Ranks from 1 with ties given their average rank.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = 0.5 * ((i + 1) + (j + 1)) as f64;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// Pairs with `a > b`, ties counting one half.
    pub u: f64,
    /// The complementary statistic for `b`; `u + u_other = n m`.
    pub u_other: f64,
    pub p_value: f64,
    pub exact: bool,
    /// Rank-biserial `(U - U') / (n m)`, i.e. `2U / (n m) - 1`.
    pub effect_size: f64,
}

/// Two-sided Mann-Whitney U test. The p-value is exact (permutation
/// distribution of the midranks) when `n + m <= EXACT_LIMIT`, otherwise the
/// tie-corrected normal approximation without continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (n, m) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..n].iter().sum();
    let nm = (n * m) as f64;
    let u = rank_sum_a - (n * (n + 1)) as f64 / 2.0;
    let exact = n + m <= EXACT_LIMIT;
    let p_value = if exact {
        exact_p(&ranks, n, u)
    } else {
        normal_p(&pooled, n, m, u)
    };
    Ok(MannWhitney {
        u,
        u_other: nm - u,
        p_value,
        exact,
        effect_size: (u - (nm - u)) / nm,
    })
}

fn normal_p(pooled: &[f64], n: usize, m: usize, u: f64) -> f64 {
    let total = (n + m) as f64;
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut ties = 0.0;
    for group in sorted.chunk_by(|x, y| x == y) {
        let t = group.len() as f64;
        ties += t * t * t - t;
    }
    let nm = (n * m) as f64;
    let var = nm / 12.0 * ((total + 1.0) - ties / (total * (total - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let z = (u - nm / 2.0) / var.sqrt();
    erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

/// Permutation p-value: counts the size-`n` subsets of the pooled midranks
/// whose U is at least as far from `n m / 2` as the observed one. Doubled
/// ranks keep everything integral.
fn exact_p(ranks: &[f64], n: usize, u: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // ways[k][s]: subsets of size k with doubled rank sum s.
    let mut ways = vec![vec![0u64; max_sum + 1]; n + 1];
    ways[0][0] = 1;
    for &d in &doubled {
        for k in (1..=n).rev() {
            for s in (d..=max_sum).rev() {
                ways[k][s] += ways[k - 1][s - d];
            }
        }
    }
    let m = ranks.len() - n;
    let centre2 = (n * m) as i64;
    let offset = (n * (n + 1)) as i64;
    let obs_dev = ((2.0 * u).round() as i64 - centre2).abs();
    let mut hit = 0u64;
    let mut all = 0u64;
    for (s, &w) in ways[n].iter().enumerate() {
        if w == 0 {
            continue;
        }
        all += w;
        let u2 = s as i64 - offset;
        if (u2 - centre2).abs() >= obs_dev {
            hit += w;
        }
    }
    hit as f64 / all as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovSmirnov {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample KS test with the asymptotic Kolmogorov distribution.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KolmogorovSmirnov> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let en = (n * m / (n + m)).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    Ok(KolmogorovSmirnov {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    })
}

/// `Q(l) = 2 sum_{k>=1} (-1)^(k-1) exp(-2 k^2 l^2)`.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Shapiro-Wilk normality test (Royston's approximation, 3 <= n <= 5000).
pub fn shapiro_wilk(x: &[f64]) -> Result<ShapiroWilk> {
    let n = x.len();
    if n < 3 {
        return Err(Error::EmptySample);
    }
    if n > 5000 {
        return Err(Error::Config(format!("Shapiro-Wilk supports n <= 5000, got {n}")));
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    if s[n - 1] - s[0] == 0.0 {
        return Err(Error::Config("Shapiro-Wilk needs non-identical values".into()));
    }
    let nf = n as f64;
    let half = n / 2;
    let std_normal = Normal::standard();

    // Coefficients of the upper half, largest first; the lower half mirrors
    // them with opposite sign.
    let mut a = vec![0.0; half];
    if n == 3 {
        a[0] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let m: Vec<f64> = (1..=half)
            .map(|i| -std_normal.inverse_cdf((i as f64 - 0.375) / (nf + 0.25)))
            .collect();
        let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / nf.sqrt();
        let a1 = poly(&C1, rsn) + m[0] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = m[1] / ssumm2 + poly(&C2, rsn);
            a[1] = a2;
            let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            (2, fac)
        } else {
            (1, ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[0] = a1;
        for i in first..half {
            a[i] = m[i] / fac;
        }
    }

    let mu = mean(&s);
    let ss: f64 = s.iter().map(|v| (v - mu).powi(2)).sum();
    let lin: f64 = (0..half).map(|i| a[i] * (s[n - 1 - i] - s[i])).sum();
    let w = (lin * lin / ss).min(1.0);

    let p_value = if n == 3 {
        let p = 6.0 / std::f64::consts::PI * (w.sqrt().asin() - std::f64::consts::PI / 3.0);
        p.max(0.0)
    } else {
        let y = (1.0 - w).ln();
        let (z, mean, sd) = if n <= 11 {
            let gamma = poly(&[-2.273, 0.459], nf);
            if y >= gamma {
                return Ok(ShapiroWilk { w, p_value: 1e-99 });
            }
            (
                -(gamma - y).ln(),
                poly(&[0.544, -0.39978, 0.025054, -6.714e-4], nf),
                poly(&[1.3822, -0.77857, 0.062767, -0.0020322], nf).exp(),
            )
        } else {
            let ln_n = nf.ln();
            (
                y,
                poly(&[-1.5861, -0.31082, -0.083751, 0.0038915], ln_n),
                poly(&[-0.4803, -0.082676, 0.0030302], ln_n).exp(),
            )
        };
        1.0 - std_normal.cdf((z - mean) / sd)
    };
    Ok(ShapiroWilk { w, p_value })
}

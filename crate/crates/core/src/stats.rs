//! Running moments, least-squares slope fits and a Poisson goodness-of-fit test.

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use crate::error::{Error, Result};

/// Streaming mean and variance (Welford). Merging is exact up to rounding;
/// callers that need bit-reproducible output fold in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut m = Self::new();
        for &x in xs {
            m.push(x);
        }
        m
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance; NaN below two samples.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        (self.variance() / self.count as f64).sqrt()
    }

    /// `(mean - target) / stderr`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean() - target) / self.stderr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the residuals (NaN with two points).
    pub slope_stderr: f64,
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::OutOfDomain {
            what: "line fit",
            detail: format!("need matching inputs with at least two points, got {} and {}", x.len(), y.len()),
        });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 0.0) || !sxy.is_finite() {
        return Err(Error::OutOfDomain {
            what: "line fit",
            detail: "degenerate or non-finite abscissae".into(),
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_stderr = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LineFit { slope, intercept, slope_stderr })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareGof {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// `(first k, last k, observed, expected)` per bin; the last bin is open.
    pub bins: Vec<(u64, u64, u64, f64)>,
}

/// Pearson chi-square test of `counts` against Poisson(`mean`), with bins
/// merged until each expects at least five observations.
pub fn poisson_chi_square(counts: &[u64], mean: f64) -> Result<ChiSquareGof> {
    let n = counts.len() as f64;
    let law = Poisson::new(mean).map_err(|e| Error::OutOfDomain {
        what: "poisson law",
        detail: e.to_string(),
    })?;
    let mut edges: Vec<(u64, u64, f64)> = Vec::new();
    let (mut start, mut acc) = (0u64, 0.0);
    let mut k = 0u64;
    loop {
        acc += law.pmf(k);
        let tail = law.sf(k);
        if tail * n < 5.0 {
            break;
        }
        if acc * n >= 5.0 {
            edges.push((start, k, acc));
            start = k + 1;
            acc = 0.0;
        }
        k += 1;
    }
    let open = if start == 0 { 1.0 } else { law.sf(start - 1) };
    if open * n < 5.0 {
        if let Some((lo, _, p)) = edges.pop() {
            edges.push((lo, u64::MAX, p + open));
        } else {
            edges.push((0, u64::MAX, 1.0));
        }
    } else {
        edges.push((start, u64::MAX, open));
    }
    if edges.len() < 2 {
        return Err(Error::OutOfDomain {
            what: "chi-square test",
            detail: "too few observations for two bins".into(),
        });
    }
    let mut bins = Vec::with_capacity(edges.len());
    let mut statistic = 0.0;
    for &(lo, hi, p) in &edges {
        let observed = counts.iter().filter(|&&c| c >= lo && c <= hi).count() as u64;
        let expected = p * n;
        statistic += (observed as f64 - expected).powi(2) / expected;
        bins.push((lo, hi, observed, expected));
    }
    let dof = bins.len() - 1;
    let p_value = ChiSquared::new(dof as f64)
        .map_err(|e| Error::OutOfDomain {
            what: "chi-square law",
            detail: e.to_string(),
        })?
        .sf(statistic);
    Ok(ChiSquareGof { statistic, dof, p_value, bins })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_basic() {
        let m = Moments::from_slice(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.count(), 4);
        assert!((m.mean() - 2.5).abs() < 1e-15);
        assert!((m.variance() - 5.0 / 3.0).abs() < 1e-15);
        assert!(Moments::from_slice(&[1.0]).variance().is_nan());
    }

    #[test]
    fn merge_matches_single_pass() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 10.0).collect();
        let all = Moments::from_slice(&xs);
        let mut a = Moments::from_slice(&xs[..17]);
        a.merge(&Moments::from_slice(&xs[17..]));
        assert!((a.mean() - all.mean()).abs() < 1e-12);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn line_fit_exact() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept + 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
        assert!(fit_line(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn chi_square_accepts_exact_frequencies() {
        // counts laid out to match a Poisson(3) sample closely
        let law = Poisson::new(3.0).unwrap();
        let mut counts = Vec::new();
        for k in 0..20u64 {
            let m = (law.pmf(k) * 10_000.0).round() as usize;
            counts.extend(std::iter::repeat_n(k, m));
        }
        let g = poisson_chi_square(&counts, 3.0).unwrap();
        assert!(g.p_value > 0.5, "{g:?}");
        let expected: f64 = g.bins.iter().map(|b| b.3).sum();
        assert!((expected - counts.len() as f64).abs() < 1e-6 * counts.len() as f64);
        let bad = poisson_chi_square(&counts, 3.5).unwrap();
        assert!(bad.p_value < 1e-6);
    }
}

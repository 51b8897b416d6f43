use serde::Serialize;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitStatus {
    Fitted,
    /// Every value is zero to the stated threshold.
    Exact,
    Refused,
}

#[derive(Clone, Debug, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `ln value`.
    pub residual: f64,
    /// Standard error of the slope; zero for two-point-exact data.
    pub stderr: f64,
    /// 95% confidence band for the slope.
    pub band95: [f64; 2],
    pub points: usize,
    /// ε values dropped because the value was not positive and finite.
    pub excluded: Vec<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("fit refused: {usable} usable points, {excluded} excluded")]
pub struct FitRefused {
    pub usable: usize,
    pub excluded: usize,
}

/// Two-sided 95% Student-t quantiles for 1..=30 degrees of freedom.
const T95: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
    2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

fn t95(df: usize) -> f64 {
    if df == 0 {
        f64::INFINITY
    } else if df <= T95.len() {
        T95[df - 1]
    } else {
        1.96
    }
}

/// Least squares on `(ln ε, ln value)`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit, FitRefused> {
    let mut excluded = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(e, v) in points {
        if v > 0.0 && v.is_finite() && e > 0.0 && e.is_finite() {
            xs.push(e.ln());
            ys.push(v.ln());
        } else {
            excluded.push(e);
        }
    }
    let n = xs.len();
    if n < 3 {
        return Err(FitRefused { usable: n, excluded: excluded.len() });
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 0.0 {
        return Err(FitRefused { usable: n, excluded: excluded.len() });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let residual = (ssr / nf).sqrt();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    let half = t95(n - 2) * stderr;
    Ok(RateFit { slope, intercept, residual, stderr, band95: [slope - half, slope + half], points: n, excluded })
}

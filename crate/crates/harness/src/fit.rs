use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::HarnessError;

/// A measured quantity and its predicted form at one grid point.
#[derive(Debug, Clone, Serialize)]
pub struct FitPoint {
    pub key: String,
    /// Points in the same group share every parameter except `x`.
    pub group: String,
    /// The scaled quantity, usually n.
    pub x: f64,
    pub measured: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioPoint {
    pub key: String,
    pub group: String,
    pub x: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroupSlope {
    pub group: String,
    pub slope: f64,
    /// 95% interval; `None` with fewer than three points.
    pub ci: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub predictor: String,
    pub points: Vec<RatioPoint>,
    pub max_ratio: f64,
    pub median_ratio: f64,
    /// Log-log slope of ratio against `x`, per group.
    pub slopes: Vec<GroupSlope>,
    /// Slope of largest magnitude.
    pub worst_slope: Option<f64>,
}

pub fn median(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        s[k / 2]
    } else {
        (s[k / 2 - 1] + s[k / 2]) / 2.0
    }
}

/// Least-squares slope of `y` on `x` with its 95% interval.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Option<(f64, Option<[f64; 2]>)> {
    let k = xs.len();
    if k < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if k < 3 {
        return Some((slope, None));
    }
    let rss: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let se = (rss / (k - 2) as f64 / sxx).sqrt();
    let t = StudentsT::new(0.0, 1.0, (k - 2) as f64).expect("df > 0").inverse_cdf(0.975);
    Some((slope, Some([slope - t * se, slope + t * se])))
}

/// Ratios of measured to predicted values, and their trend in `x`.
///
/// Needs at least four points and two distinct `x`. Ratios must be
/// finite; only positive ones enter the slope fit.
pub fn fit_bound(predictor: &str, points: &[FitPoint]) -> Result<FitResult, HarnessError> {
    if points.len() < 4 {
        return Err(HarnessError::Fit(format!("{predictor}: {} points, need at least 4", points.len())));
    }
    let mut xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < 2 {
        return Err(HarnessError::Fit(format!("{predictor}: x does not vary")));
    }
    let mut ratios = Vec::with_capacity(points.len());
    for p in points {
        if !(p.predicted > 0.0 && p.predicted.is_finite()) {
            return Err(HarnessError::Fit(format!("{predictor}: predicted value {} at {}", p.predicted, p.key)));
        }
        let r = p.measured / p.predicted;
        if !r.is_finite() {
            return Err(HarnessError::Fit(format!("{predictor}: ratio {r} at {}", p.key)));
        }
        ratios.push(RatioPoint { key: p.key.clone(), group: p.group.clone(), x: p.x, ratio: r });
    }
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in ratios.iter().filter(|r| r.ratio > 0.0 && r.x > 0.0) {
        let g = groups.entry(&r.group).or_default();
        g.0.push(r.x.ln());
        g.1.push(r.ratio.ln());
    }
    let slopes: Vec<GroupSlope> = groups
        .iter()
        .filter_map(|(g, (x, y))| ols_slope(x, y).map(|(slope, ci)| GroupSlope { group: g.to_string(), slope, ci }))
        .collect();
    let worst_slope = slopes.iter().map(|s| s.slope).max_by(|a, b| a.abs().total_cmp(&b.abs()));
    let rv: Vec<f64> = ratios.iter().map(|r| r.ratio).collect();
    Ok(FitResult {
        predictor: predictor.to_string(),
        max_ratio: rv.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        median_ratio: median(&rv),
        points: ratios,
        slopes,
        worst_slope,
    })
}

impl FitResult {
    /// Max ratio at most `k` and, when a slope exists, `|slope| ≤ tol`.
    pub fn passes(&self, k: f64, tol: f64) -> bool {
        self.max_ratio <= k && self.worst_slope.is_none_or(|s| s.abs() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(f: impl Fn(f64) -> f64) -> Vec<FitPoint> {
        [8.0, 16.0, 32.0, 64.0]
            .iter()
            .map(|&x| FitPoint { key: format!("{x}"), group: "g".into(), x, measured: f(x), predicted: x })
            .collect()
    }

    #[test]
    fn flat_ratio() {
        let r = fit_bound("lin", &pts(|x| 3.0 * x)).unwrap();
        assert!((r.max_ratio - 3.0).abs() < 1e-12);
        assert!(r.worst_slope.unwrap().abs() < 1e-12);
        assert!(r.passes(3.0, 0.25));
        assert!(!r.passes(2.9, 0.25));
    }

    #[test]
    fn trending_ratio_fails() {
        let r = fit_bound("sq", &pts(|x| x * x)).unwrap();
        assert!((r.worst_slope.unwrap() - 1.0).abs() < 1e-12);
        assert!(!r.passes(1e9, 0.25));
        let ci = r.slopes[0].ci.unwrap();
        assert!(ci[0] <= 1.0 && 1.0 <= ci[1]);
    }

    #[test]
    fn degenerate_grids() {
        assert!(fit_bound("x", &pts(|x| x)[..3]).is_err());
        let mut p = pts(|x| x);
        for q in &mut p {
            q.x = 1.0;
        }
        assert!(fit_bound("x", &p).is_err());
        let mut p = pts(|x| x);
        p[0].predicted = 0.0;
        assert!(fit_bound("x", &p).is_err());
    }

    #[test]
    fn median_even_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

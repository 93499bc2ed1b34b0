//! Small statistics helpers for predictor metrics and campaign reports.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

/// Coefficient of determination of `pred` against `truth`.
pub fn r_squared(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::InvalidArgument("R² needs equally long, non-empty inputs".into()));
    }
    let m = mean(truth);
    let ss_tot: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::InvalidArgument("R² is undefined for constant labels".into()));
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Average ranks (1-based), ties sharing the mean rank.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::InvalidArgument("correlation needs two equally long series".into()));
    }
    let (ma, mb) = (mean(a), mean(b));
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Err(Error::InvalidArgument("correlation of a constant series".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    pearson(&ranks(a), &ranks(b))
}

/// One-sided Mann-Whitney U test of "`x` tends to be smaller than `y`".
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MannWhitney {
    /// U statistic of `x`: number of pairs with `x < y`, ties counting one half.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Normal approximation with tie correction and continuity correction.
pub fn mann_whitney_less(x: &[f64], y: &[f64]) -> Result<MannWhitney> {
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("Mann-Whitney needs two non-empty samples".into()));
    }
    let all: Vec<f64> = x.iter().chain(y).copied().collect();
    let r = ranks(&all);
    let r1: f64 = r[..x.len()].iter().sum();
    // U counting pairs with x > y; small U1 means x is smaller
    let u_greater = r1 - n1 * (n1 + 1.0) / 2.0;
    let u = n1 * n2 - u_greater;
    let n = n1 + n2;
    let mut sorted = all.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)).max(1.0));
    let mu = n1 * n2 / 2.0;
    if var <= 0.0 {
        return Ok(MannWhitney { u, z: 0.0, p_value: 1.0 });
    }
    let z = (u_greater - mu + 0.5) / var.sqrt();
    let p_value = Normal::standard().cdf(z);
    Ok(MannWhitney { u, z, p_value })
}

/// Precision and recall of binary predictions; an empty denominator yields 0.
pub fn precision_recall(truth: &[bool], pred: &[bool]) -> (f64, f64) {
    let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t && p).count() as f64;
    let fp = truth.iter().zip(pred).filter(|&(&t, &p)| !t && p).count() as f64;
    let fn_ = truth.iter().zip(pred).filter(|&(&t, &p)| t && !p).count() as f64;
    let div = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    (div(tp, tp + fp), div(tp, tp + fn_))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn r2_perfect_and_mean_predictor() {
        let t = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(r_squared(&t, &t).unwrap(), 1.0);
        assert!(r_squared(&t, &[2.5; 4]).unwrap().abs() < 1e-15);
        assert!(r_squared(&[2.0; 3], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn spearman_monotone() {
        let a = [1.0, 2.0, 3.0, 10.0];
        let b = [0.1, 0.2, 5.0, 6.0];
        assert!((spearman(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = [4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &c).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn mann_whitney_direction() {
        let x: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let y: Vec<f64> = (0..30).map(|i| i as f64 + 20.0).collect();
        let t = mann_whitney_less(&x, &y).unwrap();
        assert!(t.p_value < 1e-4, "{t:?}");
        let t = mann_whitney_less(&y, &x).unwrap();
        assert!(t.p_value > 0.999, "{t:?}");
        let t = mann_whitney_less(&x, &x).unwrap();
        assert!((t.p_value - 0.5).abs() < 0.1);
    }

    #[test]
    fn mann_whitney_u_counts_pairs() {
        // brute force count of x < y pairs (ties as half)
        let x = [1.0, 4.0, 4.0, 7.0];
        let y = [2.0, 4.0, 8.0];
        let mut brute = 0.0;
        for a in x {
            for b in y {
                brute += if a < b { 1.0 } else if a == b { 0.5 } else { 0.0 };
            }
        }
        assert_eq!(mann_whitney_less(&x, &y).unwrap().u, brute);
    }

    #[test]
    fn precision_recall_counts() {
        let t = [true, true, false, false, true];
        let p = [true, false, true, false, true];
        let (pr, rc) = precision_recall(&t, &p);
        assert!((pr - 2.0 / 3.0).abs() < 1e-12);
        assert!((rc - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(precision_recall(&[false], &[false]), (0.0, 0.0));
    }
}

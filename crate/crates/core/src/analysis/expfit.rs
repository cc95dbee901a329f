//! Least-squares fit of `y = A p^x + c`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub a: f64,
    pub p: f64,
    pub c: f64,
    pub p_sigma: f64,
    pub rss: f64,
}

fn residuals(x: &[f64], y: &[f64], t: &Vector3<f64>) -> Vec<f64> {
    x.iter().zip(y).map(|(&xi, &yi)| t[0] * t[1].powf(xi) + t[2] - yi).collect()
}

fn rss(x: &[f64], y: &[f64], t: &Vector3<f64>) -> f64 {
    residuals(x, y, t).iter().map(|r| r * r).sum()
}

/// Linear least squares for (A, c) at fixed p.
fn linear_part(x: &[f64], y: &[f64], p: f64) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let (mut su, mut suu, mut sy, mut suy) = (0.0, 0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let u = p.powf(xi);
        su += u;
        suu += u * u;
        sy += yi;
        suy += u * yi;
    }
    let det = n * suu - su * su;
    if det.abs() < 1e-300 {
        return None;
    }
    let a = (n * suy - su * sy) / det;
    Some((a, (sy - a * su) / n))
}

fn jacobian(x: &[f64], t: &Vector3<f64>) -> Vec<[f64; 3]> {
    x.iter()
        .map(|&xi| {
            let px = t[1].powf(xi);
            let dp = if xi == 0.0 { 0.0 } else { t[0] * xi * t[1].powf(xi - 1.0) };
            [px, dp, 1.0]
        })
        .collect()
}

fn normal_equations(x: &[f64], y: &[f64], t: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let r = residuals(x, y, t);
    let j = jacobian(x, t);
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for (row, ri) in j.iter().zip(&r) {
        for a in 0..3 {
            jtr[a] += row[a] * ri;
            for b in 0..3 {
                jtj[(a, b)] += row[a] * row[b];
            }
        }
    }
    (jtj, jtr)
}

pub fn exp_fit(x: &[f64], y: &[f64]) -> Result<ExpFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::Fit("need at least four points".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data".into()));
    }
    let ymax = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ymin = y.iter().cloned().fold(f64::INFINITY, f64::min);
    if ymax - ymin < 1e-14 {
        return Err(Error::Fit("constant data leaves the decay rate unidentifiable".into()));
    }
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].partial_cmp(&x[j]).expect("finite"));
    let (i0, imid, iend) = (order[0], order[order.len() / 2], order[order.len() - 1]);

    // two-point log-ratio start, plus a scan in p as a fallback
    let mut starts = Vec::new();
    let c0 = y[iend];
    let a0 = y[i0] - c0;
    let ratio = (y[imid] - c0) / a0;
    if ratio > 0.0 && x[imid] > x[i0] {
        let p = ratio.powf(1.0 / (x[imid] - x[i0]));
        if p.is_finite() && p > 0.0 {
            starts.push(Vector3::new(a0 / p.powf(x[i0]), p, c0));
        }
    }
    for k in 1..200 {
        let p = 0.5 + 0.5 * k as f64 / 200.0;
        if let Some((a, c)) = linear_part(x, y, p) {
            starts.push(Vector3::new(a, p, c));
        }
    }
    let mut t = *starts
        .iter()
        .min_by(|a, b| rss(x, y, a).partial_cmp(&rss(x, y, b)).expect("finite"))
        .ok_or_else(|| Error::Fit("no starting point".into()))?;

    let mut lambda = 1e-3;
    let mut cost = rss(x, y, &t);
    for _ in 0..1000 {
        let (jtj, jtr) = normal_equations(x, y, &t);
        let mut improved = false;
        for _ in 0..40 {
            let mut m = jtj;
            for d in 0..3 {
                m[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = m.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                continue;
            };
            let cand = t + step;
            if !(cand[1] > 0.0) {
                lambda *= 10.0;
                continue;
            }
            let cc = rss(x, y, &cand);
            if cc.is_finite() && cc <= cost {
                let done = (cost - cc) <= 1e-18 + 1e-15 * cost
                    && step.norm() <= 1e-12 * (1.0 + t.norm());
                t = cand;
                cost = cc;
                lambda = (lambda / 10.0).max(1e-15);
                improved = !done;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    if !t.iter().all(|v| v.is_finite()) {
        return Err(Error::Fit("fit diverged".into()));
    }
    let (jtj, _) = normal_equations(x, y, &t);
    let dof = (x.len() as f64 - 3.0).max(1.0);
    let p_sigma = jtj
        .try_inverse()
        .map(|cov| (cov[(1, 1)] * cost / dof).max(0.0).sqrt())
        .unwrap_or(f64::INFINITY);
    Ok(ExpFit {
        a: t[0],
        p: t[1],
        c: t[2],
        p_sigma,
        rss: cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn exact_recovery() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|&k| 0.5 * 0.9f64.powf(k) + 0.5).collect();
        let f = exp_fit(&x, &y).unwrap();
        assert!((f.p - 0.9).abs() < 1e-8 && (f.a - 0.5).abs() < 1e-8 && (f.c - 0.5).abs() < 1e-8);
    }

    #[test]
    fn constant_data_rejected() {
        assert!(exp_fit(&[0.0, 1.0, 2.0, 3.0], &[0.4; 4]).is_err());
    }

    #[test]
    fn noisy_recovery_over_seeds() {
        let x: Vec<f64> = (0..30).map(|k| k as f64).collect();
        let noise = Normal::new(0.0, 0.01).unwrap();
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y: Vec<f64> = x
                .iter()
                .map(|&k| 0.5 * 0.9f64.powf(k) + 0.5 + noise.sample(&mut rng))
                .collect();
            let f = exp_fit(&x, &y).unwrap();
            assert!((f.p - 0.9).abs() < 0.01, "seed {seed}: {}", f.p);
        }
    }
}

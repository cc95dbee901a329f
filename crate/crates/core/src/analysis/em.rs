//! Two-component beta mixture fitted by generalized EM.

use serde::{Deserialize, Serialize};

use super::beta::BetaComponent;
use crate::error::{Error, Result};

pub const CLIP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATIONS: usize = 500;
// keeps a collapsing component finite
const MAX_CONCENTRATION: f64 = 1e4;
const MIN_SHAPE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureFit {
    /// Component 0 is the noise (zero) population, component 1 the signal.
    pub components: [BetaComponent; 2],
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

impl MixtureFit {
    /// Posterior probability that `h` belongs to the noise component.
    pub fn posterior_zero(&self, h: f64) -> f64 {
        let h = h.clamp(CLIP, 1.0 - CLIP);
        let [a, b] = &self.components;
        let la = a.weight.ln() + a.ln_pdf(h);
        let lb = b.weight.ln() + b.ln_pdf(h);
        let m = la.max(lb);
        let ea = (la - m).exp();
        ea / (ea + (lb - m).exp())
    }
}

/// Default starting point: broad signal, noise piled near zero.
pub fn default_init() -> [BetaComponent; 2] {
    [BetaComponent::new(1.5, 15.0, 0.75), BetaComponent::new(2.0, 2.0, 0.25)]
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn log_likelihood(data: &[f64], comps: &[BetaComponent; 2]) -> f64 {
    data.iter()
        .map(|&h| {
            log_sum_exp(
                comps[0].weight.ln() + comps[0].ln_pdf(h),
                comps[1].weight.ln() + comps[1].ln_pdf(h),
            )
        })
        .sum()
}

fn q_shape(data: &[f64], resp: &[f64], c: &BetaComponent) -> f64 {
    data.iter().zip(resp).map(|(&h, &r)| r * c.ln_pdf(h)).sum()
}

fn moment_shapes(data: &[f64], resp: &[f64]) -> Option<(f64, f64)> {
    let w: f64 = resp.iter().sum();
    if w <= 0.0 {
        return None;
    }
    let m = data.iter().zip(resp).map(|(h, r)| r * h).sum::<f64>() / w;
    let v = data.iter().zip(resp).map(|(h, r)| r * (h - m).powi(2)).sum::<f64>() / w;
    if !(v > 0.0) || !(m > 0.0 && m < 1.0) {
        return None;
    }
    let conc = (m * (1.0 - m) / v - 1.0).clamp(MIN_SHAPE, MAX_CONCENTRATION);
    Some(((m * conc).max(MIN_SHAPE), ((1.0 - m) * conc).max(MIN_SHAPE)))
}

pub fn em_fit(populations: &[f64], init: [BetaComponent; 2]) -> Result<MixtureFit> {
    if populations.len() < 4 {
        return Err(Error::DegenerateFit("need at least four populations".into()));
    }
    let data: Vec<f64> = populations.iter().map(|h| h.clamp(CLIP, 1.0 - CLIP)).collect();
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let var = data.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / data.len() as f64;
    if var < 1e-14 {
        return Err(Error::DegenerateFit("all populations identical".into()));
    }
    let mut comps = init;
    let mut ll = log_likelihood(&data, &comps);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut resp = vec![0.0; data.len()];
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for (r, &h) in resp.iter_mut().zip(&data) {
            let la = comps[0].weight.ln() + comps[0].ln_pdf(h);
            let lb = comps[1].weight.ln() + comps[1].ln_pdf(h);
            *r = (la - log_sum_exp(la, lb)).exp();
        }
        let w0 = resp.iter().sum::<f64>() / data.len() as f64;
        if w0 < 1e-9 || w0 > 1.0 - 1e-9 {
            return Err(Error::DegenerateFit(format!(
                "one component holds weight {:.3e}",
                w0.min(1.0 - w0)
            )));
        }
        let resp1: Vec<f64> = resp.iter().map(|r| 1.0 - r).collect();
        let mut next = comps;
        next[0].weight = w0;
        next[1].weight = 1.0 - w0;
        for (k, rk) in [&resp, &resp1].into_iter().enumerate() {
            if let Some((a, b)) = moment_shapes(&data, rk) {
                let cand = BetaComponent::new(a, b, next[k].weight);
                // accept the moment step only if it does not lower Q
                if q_shape(&data, rk, &cand) >= q_shape(&data, rk, &comps[k]) {
                    next[k].alpha = a;
                    next[k].beta = b;
                }
            }
        }
        let new_ll = log_likelihood(&data, &next);
        assert!(
            new_ll >= ll - 1e-9 * ll.abs().max(1.0),
            "EM log-likelihood decreased: {ll} -> {new_ll}"
        );
        comps = next;
        trace.push(new_ll);
        let change = new_ll - ll;
        ll = new_ll;
        if change.abs() < TOLERANCE {
            converged = true;
            break;
        }
    }
    if comps[0].mean() > comps[1].mean() {
        comps.swap(0, 1);
    }
    Ok(MixtureFit {
        components: comps,
        log_likelihood: ll,
        iterations,
        converged,
        trace,
    })
}

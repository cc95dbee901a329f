//! Period finding from output populations.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::em::{default_init, em_fit, MixtureFit};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakLabel {
    Zero,
    Peak,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateReport {
    pub index: usize,
    pub population: f64,
    pub p_zero: f64,
    pub label: PeakLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub states: Vec<StateReport>,
    pub peaks: Vec<usize>,
    pub period: usize,
    pub mixture: MixtureFit,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `r = N / gcd(N, peaks...)`; a lone zero peak gives `r = 1`.
pub fn extract_period(peaks: &[usize], n_states: usize) -> Result<usize> {
    if peaks.is_empty() {
        return Err(Error::NoPeaks);
    }
    let s = peaks.iter().fold(n_states, |g, &p| gcd(g, p));
    Ok(n_states / s)
}

pub fn classify_and_extract_period(populations: &[f64]) -> Result<ClassificationReport> {
    let n = populations.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Unsupported(format!("{n} states is not a power of two")));
    }
    let mixture = em_fit(populations, default_init())?;
    let states: Vec<StateReport> = populations
        .iter()
        .enumerate()
        .map(|(index, &h)| {
            let p_zero = mixture.posterior_zero(h);
            StateReport {
                index,
                population: h,
                p_zero,
                label: if p_zero > 0.5 { PeakLabel::Zero } else { PeakLabel::Peak },
            }
        })
        .collect();
    let peaks: Vec<usize> = states
        .iter()
        .filter(|s| s.label == PeakLabel::Peak)
        .map(|s| s.index)
        .collect();
    let period = extract_period(&peaks, n)?;
    Ok(ClassificationReport {
        states,
        peaks,
        period,
        mixture,
    })
}

/// Direct evaluation of the output distribution for a binary truth table.
pub fn qpf_theoretical_distribution(f: &[u8]) -> Vec<f64> {
    let n = f.len();
    let nf = n as f64;
    (0..n)
        .map(|y| {
            let mut sums = [Complex64::new(0.0, 0.0); 2];
            for (x, &fx) in f.iter().enumerate() {
                sums[(fx & 1) as usize] += Complex64::from_polar(1.0, TAU * (x * y) as f64 / nf);
            }
            (sums[0].norm_sqr() + sums[1].norm_sqr()) / (nf * nf)
        })
        .collect()
}

/// Truth table of the oracle with period `r` on `n_states` inputs.
pub fn periodic_truth_table(period: usize, n_states: usize) -> Result<Vec<u8>> {
    match period {
        1 => Ok(vec![0; n_states]),
        2 => Ok((0..n_states).map(|x| (x & 1) as u8).collect()),
        4 => Ok((0..n_states).map(|x| ((x >> 1) & 1) as u8).collect()),
        r => Err(Error::Unsupported(format!("no oracle for period {r}"))),
    }
}

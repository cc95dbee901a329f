use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaComponent {
    pub alpha: f64,
    pub beta: f64,
    pub weight: f64,
}

impl BetaComponent {
    pub fn new(alpha: f64, beta: f64, weight: f64) -> Self {
        Self { alpha, beta, weight }
    }

    pub fn pdf(&self, h: f64) -> f64 {
        beta_pdf(h, self.alpha, self.beta)
    }

    pub fn ln_pdf(&self, h: f64) -> f64 {
        beta_ln_pdf(h, self.alpha, self.beta)
    }

    pub fn mean(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }
}

/// Log density; `-inf` outside the open unit interval.
pub fn beta_ln_pdf(h: f64, alpha: f64, beta: f64) -> f64 {
    if !(h > 0.0 && h < 1.0) {
        return f64::NEG_INFINITY;
    }
    (alpha - 1.0) * h.ln() + (beta - 1.0) * (-h).ln_1p() - ln_beta(alpha, beta)
}

/// Density, zero outside `(0, 1)`.
pub fn beta_pdf(h: f64, alpha: f64, beta: f64) -> f64 {
    beta_ln_pdf(h, alpha, beta).exp()
}

/// True when `h` lies on or beyond the support boundary.
pub fn on_boundary(h: f64) -> bool {
    !(h > 0.0 && h < 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert!((beta_pdf(0.3, 1.0, 1.0) - 1.0).abs() < 1e-12);
        assert!((beta_pdf(0.5, 2.0, 2.0) - 1.5).abs() < 1e-12);
        assert_eq!(beta_pdf(0.0, 2.0, 2.0), 0.0);
        assert!(on_boundary(1.0));
        let f = |h: f64| beta_pdf(h, 2.0, 5.0);
        assert!(f(0.2) > f(0.19) && f(0.2) > f(0.21));
    }

    #[test]
    fn integrates_to_one() {
        let n = 200_000;
        let s: f64 = (0..n)
            .map(|i| beta_pdf((i as f64 + 0.5) / n as f64, 2.5, 4.0))
            .sum::<f64>()
            / n as f64;
        assert!((s - 1.0).abs() < 1e-6);
    }
}

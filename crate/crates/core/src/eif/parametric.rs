use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type Density = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A smooth one-parameter family `theta -> p_theta` on a finite outcome set.
#[derive(Clone)]
pub struct ParametricFamily1D {
    outcomes: Vec<f64>,
    density: Density,
    score: Option<Density>,
    interval: (f64, f64),
}

impl fmt::Debug for ParametricFamily1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParametricFamily1D")
            .field("outcomes", &self.outcomes)
            .field("interval", &self.interval)
            .field("exact_score", &self.score.is_some())
            .finish()
    }
}

/// Step for the Richardson-extrapolated central difference of `log p`.
const FD_STEP: f64 = 1e-3;

impl ParametricFamily1D {
    /// Family with a user density and a finite-difference score. `interval`
    /// is the open parameter range on which the density is normalized.
    pub fn new(
        outcomes: Vec<f64>,
        density: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static,
        interval: (f64, f64),
    ) -> Self {
        Self {
            outcomes,
            density: Arc::new(density),
            score: None,
            interval,
        }
    }

    /// Attaches an exact score `d/dtheta log p_theta`.
    pub fn with_score(mut self, score: impl Fn(f64) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.score = Some(Arc::new(score));
        self
    }

    /// Bernoulli(theta) on {0, 1}, exact score.
    pub fn bernoulli() -> Self {
        Self::new(vec![0.0, 1.0], |t| vec![1.0 - t, t], (0.0, 1.0))
            .with_score(|t| vec![-1.0 / (1.0 - t), 1.0 / t])
    }

    /// `p_theta(o) ∝ base(o) exp(theta o)`, score by finite differences.
    pub fn exponential_tilt(outcomes: Vec<f64>, base: Vec<f64>) -> Result<Self> {
        if outcomes.len() != base.len() || outcomes.len() < 2 {
            return Err(Error::domain(
                "tilt family needs matching outcomes and base weights, at least two",
            ));
        }
        if base.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::domain("tilt base weights must be positive"));
        }
        let xs = outcomes.clone();
        Ok(Self::new(
            outcomes,
            move |t| {
                let shift = xs.iter().fold(f64::NEG_INFINITY, |m, x| m.max(t * x));
                let w: Vec<f64> = xs
                    .iter()
                    .zip(&base)
                    .map(|(x, b)| b * (t * x - shift).exp())
                    .collect();
                let z: f64 = w.iter().sum();
                w.into_iter().map(|v| v / z).collect()
            },
            (-50.0, 50.0),
        ))
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn density(&self, theta: f64) -> Result<Vec<f64>> {
        let (lo, hi) = self.interval;
        if !(theta > lo && theta < hi) {
            return Err(Error::domain(format!(
                "theta = {theta} outside ({lo}, {hi})"
            )));
        }
        let p = (self.density)(theta);
        if p.len() != self.outcomes.len() {
            return Err(Error::domain(
                "density length does not match the outcome set",
            ));
        }
        let total: f64 = p.iter().sum();
        if p.iter().any(|v| *v < 0.0) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!(
                "density at theta = {theta} is not normalized"
            )));
        }
        Ok(p)
    }

    /// `d/dtheta log p_theta` on the outcome set.
    pub fn score(&self, theta: f64) -> Result<Vec<f64>> {
        let p = self.density(theta)?;
        if let Some(s) = &self.score {
            return Ok(s(theta));
        }
        let h = FD_STEP
            .min((theta - self.interval.0) / 4.0)
            .min((self.interval.1 - theta) / 4.0);
        let log_at =
            |t: f64| -> Result<Vec<f64>> { Ok(self.density(t)?.iter().map(|v| v.ln()).collect()) };
        let (a1, b1) = (log_at(theta + h)?, log_at(theta - h)?);
        let (a2, b2) = (log_at(theta + 2.0 * h)?, log_at(theta - 2.0 * h)?);
        Ok((0..p.len())
            .map(|o| (8.0 * (a1[o] - b1[o]) - (a2[o] - b2[o])) / (12.0 * h))
            .collect())
    }
}

/// `I(theta) = E[S_theta^2]`.
pub fn fisher_information(family: &ParametricFamily1D, theta: f64) -> Result<f64> {
    let p = family.density(theta)?;
    let s = family.score(theta)?;
    let info: f64 = p
        .iter()
        .zip(&s)
        .filter(|(q, _)| **q > 0.0)
        .map(|(q, v)| q * v * v)
        .sum();
    if !(info > 0.0) || !info.is_finite() {
        return Err(Error::Degenerate(format!(
            "Fisher information {info} at theta = {theta}"
        )));
    }
    Ok(info)
}

/// Influence function of `theta` in the family: `S_theta / I(theta)`.
pub fn eif_parametric_1d(family: &ParametricFamily1D, theta: f64) -> Result<Vec<f64>> {
    let info = fisher_information(family, theta)?;
    Ok(family.score(theta)?.into_iter().map(|v| v / info).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bernoulli_is_centered_outcome() {
        let f = ParametricFamily1D::bernoulli();
        for theta in [0.1, 0.35, 0.9] {
            let d = eif_parametric_1d(&f, theta).unwrap();
            assert!((d[0] + theta).abs() < 1e-15);
            assert!((d[1] - (1.0 - theta)).abs() < 1e-15);
        }
    }

    #[test]
    fn tilt_score_matches_exact_form() {
        let xs = vec![0.0, 1.0, 3.0, 4.5];
        let f = ParametricFamily1D::exponential_tilt(xs.clone(), vec![0.2, 0.3, 0.4, 0.1]).unwrap();
        let theta = 0.3;
        let p = f.density(theta).unwrap();
        let mean: f64 = p.iter().zip(&xs).map(|(q, x)| q * x).sum();
        for (s, x) in f.score(theta).unwrap().iter().zip(&xs) {
            assert!((s - (x - mean)).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_family_is_degenerate() {
        let f = ParametricFamily1D::new(vec![0.0, 1.0], |_| vec![0.5, 0.5], (0.0, 1.0));
        assert!(matches!(
            fisher_information(&f, 0.5),
            Err(Error::Degenerate(_))
        ));
    }
}

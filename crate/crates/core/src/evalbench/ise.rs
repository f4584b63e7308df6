//! Monte-Carlo integrated squared error between two densities.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, tag, StreamRng};
use crate::tabular::{mean, sample_std};

/// Importance distribution for the integral.
pub trait Proposal: Sync {
    fn sample(&self, rng: &mut StreamRng) -> Vec<f64>;
    fn log_density(&self, x: &[f64]) -> f64;
}

/// Independent normals `N(mean[j], scale^2)`.
#[derive(Clone, Debug)]
pub struct GaussianProposal {
    pub mean: Vec<f64>,
    pub scale: f64,
}

impl Proposal for GaussianProposal {
    fn sample(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(rng);
                m + self.scale * z
            })
            .collect()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.mean.len() as f64;
        let ss: f64 = x.iter().zip(&self.mean).map(|(v, m)| ((v - m) / self.scale).powi(2)).sum();
        -0.5 * ss - d * (self.scale.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IseEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_mc: usize,
}

/// Estimates the integral of `(p - q)^2` as the mean of
/// `(p(x) - q(x))^2 / g(x)` over `n_mc` draws `x ~ g`.
pub fn ise_monte_carlo<P, Q>(
    model_log_density: P,
    true_log_density: Q,
    proposal: &dyn Proposal,
    n_mc: usize,
    seed: u64,
) -> Result<IseEstimate>
where
    P: Fn(&[f64]) -> f64 + Sync,
    Q: Fn(&[f64]) -> f64 + Sync,
{
    if n_mc < 2 {
        return Err(Error::Config("need at least two Monte-Carlo draws".into()));
    }
    let terms = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, tag::ISE, i as u64);
            let x = proposal.sample(&mut rng);
            let lg = proposal.log_density(&x);
            let diff = model_log_density(&x).exp() - true_log_density(&x).exp();
            let w = diff * diff * (-lg).exp();
            if w.is_finite() {
                Ok(w)
            } else {
                Err(Error::NonFinite(format!("importance weight at draw {i}")))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(IseEstimate {
        value: mean(&terms),
        std_error: sample_std(&terms).unwrap_or(0.0) / (n_mc as f64).sqrt(),
        n_mc,
    })
}

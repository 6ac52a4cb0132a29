use rand::Rng;
use rand_distr::StandardNormal;

use super::likelihood::{log_likelihood_grad, PreparedRecord};
use super::{GuideState, PriorEntry, PriorSpec, SviError};
use crate::grad::{Tape, Var};
use crate::scm::FixedSettings;

/// Monte-Carlo ELBO and its gradient with respect to the guide coordinates
/// `[means..., log_sds...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboEstimate {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Partials smaller than this are compared on an absolute scale: central
/// differences of an objective of order 1e4 with step 1e-5 carry round-off
/// near 1e-7, so relative agreement to 1e-4 cannot be resolved below it.
pub const FD_FLOOR: f64 = 1e-3;

/// `|analytic − numeric| / max(|numeric|, FD_FLOOR)`.
pub fn fd_relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(FD_FLOOR)
}

/// Standard-normal noise, one row of guide dimension per particle.
pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R, dim: usize, particles: usize) -> Vec<Vec<f64>> {
    (0..particles)
        .map(|_| (0..dim).map(|_| rng.sample(StandardNormal)).collect())
        .collect()
}

/// ELBO with the reparameterisation noise supplied by the caller, so that
/// repeated evaluations share random numbers. `scale` multiplies the
/// log-likelihood (N/B for a minibatch of B out of N records).
pub fn elbo_with_noise(
    records: &[&PreparedRecord],
    scale: f64,
    priors: &PriorSpec,
    guide: &GuideState,
    fixed: &FixedSettings,
    noise: &[Vec<f64>],
) -> Result<ElboEstimate, SviError> {
    elbo_custom(
        |theta| {
            if records.is_empty() {
                return Ok((0.0, vec![0.0; theta.len()]));
            }
            let (ll, g) = log_likelihood_grad(records, theta, guide.harmonic_order, fixed)?;
            Ok((ll * scale, g.into_iter().map(|x| x * scale).collect()))
        },
        &priors.entries,
        guide,
        noise,
    )
}

/// ELBO for an arbitrary log-likelihood given as value and gradient in the
/// natural-space latents.
pub fn elbo_custom<F>(
    mut log_lik: F,
    priors: &[PriorEntry],
    guide: &GuideState,
    noise: &[Vec<f64>],
) -> Result<ElboEstimate, SviError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), SviError>,
{
    let d = guide.len();
    if priors.len() != d {
        return Err(SviError::Dimension {
            expected: d,
            got: priors.len(),
        });
    }
    if noise.is_empty() {
        return Err(SviError::InvalidConfig("at least one particle is required".into()));
    }
    let tape = Tape::with_capacity(8 * d * noise.len() + 2 * d);
    let means = tape.leaves(&guide.entries.iter().map(|e| e.mean).collect::<Vec<_>>());
    let log_sds = tape.leaves(&guide.entries.iter().map(|e| e.log_sd).collect::<Vec<_>>());
    let sds: Vec<Var> = log_sds.iter().map(|s| s.exp()).collect();

    let mut particles = Vec::with_capacity(noise.len());
    for eps in noise {
        if eps.len() != d {
            return Err(SviError::Dimension {
                expected: d,
                got: eps.len(),
            });
        }
        let u: Vec<Var> = (0..d).map(|i| sds[i] * eps[i] + means[i]).collect();
        let theta: Vec<Var> = guide
            .entries
            .iter()
            .zip(&u)
            .map(|(e, &x)| if e.log_space { x.exp() } else { x })
            .collect();
        let theta_values: Vec<f64> = theta.iter().map(|t| t.value()).collect();
        let non_finite = |value: f64| SviError::NonFinite {
            value,
            latents: guide.entries.iter().map(|e| e.name.clone()).zip(theta_values.clone()).collect(),
        };

        let (ll, g) = log_lik(&theta_values).map_err(|e| match e {
            SviError::Grad(_) => non_finite(f64::NAN),
            other => other,
        })?;
        if !ll.is_finite() {
            return Err(non_finite(ll));
        }
        let partials: Vec<(Var, f64)> = theta.iter().copied().zip(g).collect();
        let lik = tape.custom(ll, &partials);
        // log p(u) − log q(u); (u − mean)/sd is exactly eps and the Gaussian
        // normalisers cancel
        let mut bias = 0.0;
        let mut terms = Vec::with_capacity(2 * d + 1);
        terms.push((lik, 1.0));
        for (i, p) in priors.iter().enumerate() {
            let z = (u[i] - p.location) / p.scale;
            terms.push((z * z, -0.5));
            terms.push((log_sds[i], 1.0));
            bias += -p.scale.ln() + 0.5 * eps[i] * eps[i];
        }
        particles.push(tape.affine(&terms, bias));
    }
    let total = tape.sum(&particles) / noise.len() as f64;
    let value = total.value();
    if !value.is_finite() {
        let u0: Vec<f64> = guide.entries.iter().map(|e| e.to_natural(e.mean)).collect();
        return Err(SviError::NonFinite {
            value,
            latents: guide.entries.iter().map(|e| e.name.clone()).zip(u0).collect(),
        });
    }
    let grads = tape.backward(total)?;
    let mut grad: Vec<f64> = means.iter().map(|&m| grads.wrt(m)).collect();
    grad.extend(log_sds.iter().map(|&s| grads.wrt(s)));
    Ok(ElboEstimate { value, grad })
}

/// ELBO averaged over `n_particles` fresh reparameterised draws.
pub fn elbo_estimate<R: Rng + ?Sized>(
    records: &[&PreparedRecord],
    scale: f64,
    priors: &PriorSpec,
    guide: &GuideState,
    fixed: &FixedSettings,
    rng: &mut R,
    n_particles: usize,
) -> Result<ElboEstimate, SviError> {
    let noise = draw_noise(rng, guide.len(), n_particles);
    elbo_with_noise(records, scale, priors, guide, fixed, &noise)
}

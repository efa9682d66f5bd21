use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg::spectral_norm;
use crate::network::Network;
use crate::objective::FleetStrategy;
use crate::scalar::Real;

/// Sampled Lipschitz bound of the inverse map `q ↦ f̂(q)`:
/// `bound = K / (L ρ)` with
/// `K = (L‖f‖max + |λᴴ|‖q‖max) H + (|λᶜ| + |λᴴ|) G`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzBound<T> {
    pub bound: T,
    pub k: T,
    /// Smallest eigenvalue of `sym ∇t` on feasible directions (orthonormal).
    pub rho: T,
    pub gap: T,
    /// `sup ‖∇t‖₂`
    pub grad_norm: T,
    /// `sup (Σ_r ‖∇²t_r‖₂²)^½`
    pub hess_norm: T,
    pub f_norm_max: T,
    pub q_norm_max: T,
    /// False when `L ≤ 0` or `ρ ≤ 0`; `bound` is then infinite.
    pub defined: bool,
    pub samples: usize,
    pub skipped: usize,
}

/// Samples route flows with unit totals `demand` (all vertices when few,
/// plus `samples` uniform points).
pub fn lipschitz_bound<T: Real>(
    strategy: &FleetStrategy<T>,
    net: &Network<T>,
    demand: &[T],
    samples: usize,
    seed: u64,
) -> Result<LipschitzBound<T>> {
    check_len(net.units().len(), demand.len())?;
    let set = FeasibleSet::with_totals(net, demand.to_vec())?;
    let mut points: Vec<Vec<T>> = if set.vertex_count() <= 4096 {
        set.vertices().into_iter().map(|v| v.1).collect()
    } else {
        Vec::new()
    };
    let random: Vec<Vec<T>> = (0..samples)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            set.random_point(&mut rng)
        })
        .collect::<Result<_>>()?;
    points.extend(random);

    let evals: Vec<Option<(T, T, T)>> = points
        .par_iter()
        .map(|q| -> Result<Option<(T, T, T)>> {
            let sample = || -> Result<(T, T, T)> {
                let g = net.route_gradient(q)?;
                let hs = net.route_hessians(q)?;
                let h = hs.iter().map(|m| spectral_norm(m).powi(2)).sum::<T>().sqrt();
                let rho = net.pd_on_feasible(&g).min_eigenvalue;
                Ok((spectral_norm(&g), h, rho))
            };
            match sample() {
                Ok(v) => Ok(Some(v)),
                Err(Error::DomainViolation { .. } | Error::NotDifferentiable { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let skipped = evals.iter().filter(|e| e.is_none()).count();
    let ok: Vec<(T, T, T)> = evals.into_iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Unsupported(
            "no sample point lies in the delay functions' domain".into(),
        ));
    }
    let grad_norm = ok.iter().fold(T::zero(), |m, e| m.max(e.0));
    let hess_norm = ok.iter().fold(T::zero(), |m, e| m.max(e.1));
    let rho = ok.iter().fold(T::infinity(), |m, e| m.min(e.2));
    let gap = strategy.gap();
    let f_norm_max = net.crv_sizes().iter().map(|&s| s * s).sum::<T>().sqrt();
    let q_norm_max = demand.iter().map(|&s| s * s).sum::<T>().sqrt();
    let k = (gap.abs() * f_norm_max + strategy.lambda_hdv.abs() * q_norm_max) * hess_norm
        + (strategy.lambda_crv.abs() + strategy.lambda_hdv.abs()) * grad_norm;
    let defined = gap > T::zero() && rho > T::zero() && rho.is_finite();
    let bound = if defined { k / (gap * rho) } else { T::infinity() };
    Ok(LipschitzBound {
        bound,
        k,
        rho,
        gap,
        grad_norm,
        hess_norm,
        f_norm_max,
        q_norm_max,
        defined,
        samples: ok.len(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn symmetric_pair_bound() {
        let net = scenarios::discrete_example::<f64>();
        let b = lipschitz_bound(&FleetStrategy::selfish(), &net, &[100.0], 50, 1).unwrap();
        assert!(b.defined);
        // ∇t = diag(0.02 q): ρ = min over samples of 0.01 (q1 + q2) = 1
        assert!((b.rho - 1.0).abs() < 1e-9, "{}", b.rho);
        assert!(b.bound.is_finite() && b.bound > 0.0);
        let m = lipschitz_bound(&FleetStrategy::altruistic(), &net, &[100.0], 50, 1).unwrap();
        assert!(!m.defined && m.bound.is_infinite());
    }
}

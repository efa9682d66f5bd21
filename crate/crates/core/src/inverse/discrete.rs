//! Recovery when the observed counts need not lie in the image of the
//! total-flow map `H(h) = h + G(h)` (integer counts, noise).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{check_observed, lipschitz_bound, solve_inverse, InverseConfig, InverseResult};
use crate::error::{Error, Result};
use crate::feasible::FeasibleSet;
use crate::forward::{total_assign, ForwardConfig};
use crate::network::Network;
use crate::objective::FleetStrategy;
use crate::scalar::{norm2, norm_inf, sub, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteConfig<T> {
    /// Starts of the search for the nearest point of `H`'s image.
    pub outer_starts: usize,
    pub outer_iter: usize,
    /// Distance from the observation to the true continuous totals;
    /// defaults to `½√R` (unit rounding of every route).
    pub rounding_radius: Option<T>,
    pub lipschitz_samples: usize,
    /// Non-integer coordinates beyond which candidate enumeration stops.
    pub max_fractional: usize,
    pub seed: u64,
}

impl<T: Real> Default for DiscreteConfig<T> {
    fn default() -> Self {
        Self {
            outer_starts: 20,
            outer_iter: 500,
            rounding_radius: None,
            lipschitz_samples: 200,
            max_fractional: 16,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteRecovery<T> {
    /// Nearest point of `H`'s image found (the observation itself when it
    /// already lies there).
    pub q_city: Vec<T>,
    /// `‖q_city − q‖₂`
    pub distance: T,
    pub inverse: InverseResult<T>,
    /// `1 + Lip(f̂)`; infinite when the sampled bound is undefined.
    pub lipschitz_inverse: T,
    pub rounding_radius: T,
    /// `2 · lipschitz_inverse · rounding_radius`
    pub closeness_bound: T,
    /// Integer fleet flows next to the continuous answer with the right
    /// unit totals and `0 ≤ f ≤ q`.
    pub integer_candidates: Vec<Vec<T>>,
}

pub fn discrete_recover<T: Real>(
    strategy: &FleetStrategy<T>,
    q: &[T],
    net: &Network<T>,
    fcfg: &ForwardConfig<T>,
    icfg: &InverseConfig<T>,
    dcfg: &DiscreteConfig<T>,
) -> Result<DiscreteRecovery<T>> {
    check_observed(q, net.n_routes())?;
    let first = solve_inverse(strategy, q, net, icfg)?;
    let image = total_assign(strategy, &first.h, net, fcfg)?;
    let img_tol = T::lit(1e-6).max(T::epsilon().sqrt()) * (T::one() + norm_inf(q));
    let (q_city, inverse) = if norm_inf(&sub(&image, q)) <= img_tol {
        (q.to_vec(), first)
    } else {
        let q_city = nearest_image(strategy, q, &first.h, net, fcfg, dcfg)?;
        let inv = solve_inverse(strategy, &q_city, net, icfg)?;
        (q_city, inv)
    };
    let distance = norm2(&sub(&q_city, q));

    let demand = net.unit_totals(q);
    let lip = lipschitz_bound(strategy, net, &demand, dcfg.lipschitz_samples, dcfg.seed)?;
    let lipschitz_inverse = T::one() + lip.bound;
    let rounding_radius = dcfg
        .rounding_radius
        .unwrap_or_else(|| T::lit(0.5) * T::from_count(net.n_routes()).sqrt());
    let closeness_bound = T::lit(2.0) * lipschitz_inverse * rounding_radius;
    let integer_candidates = integer_neighbours(&inverse.f, q, net, dcfg.max_fractional);
    Ok(DiscreteRecovery {
        q_city,
        distance,
        inverse,
        lipschitz_inverse,
        rounding_radius,
        closeness_bound,
        integer_candidates,
    })
}

/// Minimises `‖H(h) − q‖²` over HDV flows with the observed unit totals
/// by multistart projected gradient with finite-difference gradients.
fn nearest_image<T: Real>(
    strategy: &FleetStrategy<T>,
    q: &[T],
    h0: &[T],
    net: &Network<T>,
    fcfg: &ForwardConfig<T>,
    dcfg: &DiscreteConfig<T>,
) -> Result<Vec<T>> {
    let hdv_totals: Vec<T> = net
        .unit_totals(q)
        .into_iter()
        .zip(net.crv_sizes())
        .map(|(t, s)| (t - s).max(T::zero()))
        .collect();
    let set = FeasibleSet::with_totals(net, hdv_totals)?;
    let mut starts = vec![set.project(h0)?];
    for k in 1..dcfg.outer_starts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(dcfg.seed);
        rng.set_stream(k as u64);
        starts.push(set.random_point(&mut rng)?);
    }
    let misfit = |h: &[T]| -> Result<T> {
        let img = total_assign(strategy, h, net, fcfg)?;
        Ok(img.iter().zip(q).map(|(&a, &b)| (a - b) * (a - b)).sum())
    };
    let fd = T::lit(1e-6).max(T::epsilon().sqrt()) * (T::one() + norm_inf(q));
    let runs: Vec<(Vec<T>, T)> = starts
        .par_iter()
        .map(|start| -> Result<(Vec<T>, T)> {
            let mut h = start.clone();
            let mut val = misfit(&h)?;
            let mut step = T::one();
            for _ in 0..dcfg.outer_iter {
                let mut grad = vec![T::zero(); h.len()];
                for r in 0..h.len() {
                    let mut up = h.clone();
                    up[r] += fd;
                    let mut dn = h.clone();
                    dn[r] = (dn[r] - fd).max(T::zero());
                    grad[r] = (misfit(&up)? - misfit(&dn)?) / (up[r] - dn[r]);
                }
                let mut s = step;
                let mut moved = false;
                while s > T::lit(1e-12) {
                    let trial = set.project(&h.iter().zip(&grad).map(|(&x, &g)| x - s * g).collect::<Vec<_>>())?;
                    let v = misfit(&trial)?;
                    if v < val {
                        h = trial;
                        val = v;
                        moved = true;
                        step = s * T::lit(2.0);
                        break;
                    }
                    s *= T::lit(0.5);
                }
                if !moved || val <= T::epsilon() {
                    break;
                }
            }
            Ok((h, val))
        })
        .collect::<Result<_>>()?;
    let best = runs
        .into_iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| Error::Unsupported("no outer start".into()))?;
    total_assign(strategy, &best.0, net, fcfg)
}

/// Floor/ceiling combinations of `f` that keep integer unit sizes and
/// `0 ≤ f ≤ q`.
fn integer_neighbours<T: Real>(f: &[T], q: &[T], net: &Network<T>, max_fractional: usize) -> Vec<Vec<T>> {
    let sizes = net.crv_sizes();
    let tol = T::lit(1e-6);
    if sizes.iter().any(|&s| (s - s.round()).abs() > tol) {
        return Vec::new();
    }
    let base: Vec<T> = f
        .iter()
        .map(|&x| {
            if (x - x.round()).abs() <= tol {
                x.round()
            } else {
                x.floor()
            }
        })
        .collect();
    let frac: Vec<usize> = (0..f.len()).filter(|&r| (f[r] - f[r].round()).abs() > tol).collect();
    if frac.len() > max_fractional {
        return Vec::new();
    }
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << frac.len()) {
        let mut g = base.clone();
        for (k, &r) in frac.iter().enumerate() {
            if mask >> k & 1 == 1 {
                g[r] += T::one();
            }
        }
        let sums_ok = net
            .unit_totals(&g)
            .iter()
            .zip(&sizes)
            .all(|(&a, &s)| (a - s.round()).abs() <= tol);
        let box_ok = g.iter().zip(q).all(|(&x, &y)| x >= T::zero() && x <= y + tol);
        if sums_ok && box_ok {
            out.push(g);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn discrete_example_candidates() {
        let net = scenarios::discrete_example::<f64>();
        let r = discrete_recover(
            &FleetStrategy::selfish(),
            &[50.0, 50.0],
            &net,
            &ForwardConfig::default(),
            &InverseConfig::default(),
            &DiscreteConfig {
                lipschitz_samples: 20,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.q_city, vec![50.0, 50.0]);
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.integer_candidates, vec![vec![10.0, 9.0], vec![9.0, 10.0]]);
        assert!(r.closeness_bound.is_finite());
    }
}

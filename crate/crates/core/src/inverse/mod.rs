//! Inverse fleet assignment: recover the fleet's flows from observed
//! totals, fleet sizes and strategy.
//!
//! With `q` observed, the fleet's first-order condition is an affine
//! variational inequality in `f` over
//! `K = {0 ≤ f ≤ q, Σ_{r∈R_s} f_r = q^CRV,s}`.

mod discrete;
mod link;
mod lipschitz;
mod vi;

pub use discrete::{discrete_recover, DiscreteConfig, DiscreteRecovery};
pub use link::{inverse_link_flows, route_fiber, LinkInverseResult, RouteFiber};
pub use lipschitz::{lipschitz_bound, LipschitzBound};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg::{null_space, spectral_norm, Mat};
use crate::network::Network;
use crate::objective::FleetStrategy;
use crate::scalar::{dist_inf, norm_inf, Real};
use vi::AffineVi;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InverseConfig<T> {
    /// Natural-residual tolerance relative to `1 + ‖t(q)‖∞`.
    pub tol_vi: T,
    pub max_iter: usize,
    /// Iterations between active-set polishing attempts.
    pub polish_every: usize,
    /// Starts of the second-solution search when uniqueness is not
    /// certified.
    pub n_starts: usize,
    /// Solutions closer than `tol_distinct · (1 + max fleet size)` are the
    /// same.
    pub tol_distinct: T,
    /// Exhaustive active-set enumeration is attempted up to this many
    /// routes.
    pub enumerate_routes: usize,
    pub seed: u64,
}

impl<T: Real> Default for InverseConfig<T> {
    fn default() -> Self {
        let floor = T::epsilon() * T::lit(256.0);
        Self {
            tol_vi: T::lit(1e-8).max(floor),
            max_iter: 200_000,
            polish_every: 25,
            n_starts: 20,
            tol_distinct: T::lit(1e-6).max(floor),
            enumerate_routes: 10,
            seed: 0,
        }
    }
}

/// Whether the uniqueness theorem's hypotheses hold at the observed flow.
#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessCertificate<T> {
    pub theorem_applies: bool,
    pub reason: String,
    pub min_rayleigh: T,
    /// `L = λ^CRV − λ^HDV`
    pub gap: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InverseResult<T> {
    /// Recovered fleet route flow.
    pub f: Vec<T>,
    /// Recovered HDV route flow `q − f`.
    pub h: Vec<T>,
    /// Natural residual `‖f − P_K(f − A(f))‖∞`.
    pub residual: T,
    pub tolerance: T,
    pub converged: bool,
    pub iterations: usize,
    pub certificate: UniquenessCertificate<T>,
    /// Directions along which the route-level answer is a set (dependent
    /// routes), orthonormal.
    pub fiber_basis: Option<Vec<Vec<T>>>,
    /// Distinct solutions found, `f` first.
    pub solutions: Vec<Vec<T>>,
}

/// `A(f) = λᶜ t(q) + ∇t(q)ᵀ (λᴴ q + L f)`.
pub fn stationarity_map<T: Real>(strategy: &FleetStrategy<T>, q: &[T], f: &[T], net: &Network<T>) -> Result<Vec<T>> {
    check_len(net.n_routes(), f.len())?;
    Ok(AffineVi::at(strategy, q, net)?.eval(f))
}

pub(crate) fn check_observed<T: Real>(q: &[T], n: usize) -> Result<()> {
    check_len(n, q.len())?;
    for (index, &v) in q.iter().enumerate() {
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(Error::NegativeFlow {
                index,
                value: v.as_f64(),
            });
        }
    }
    Ok(())
}

/// The fleet's feasible set given observed totals `q` (so `f ≤ q`).
pub(crate) fn inverse_set<T: Real>(q: &[T], net: &Network<T>) -> Result<FeasibleSet<T>> {
    let sizes = net.crv_sizes();
    for (s, (u, &size)) in net.units().iter().zip(&sizes).enumerate() {
        let avail: T = u.routes.iter().map(|&r| q[r]).sum();
        if size > avail * (T::one() + T::lit(1e-12)) {
            return Err(Error::Infeasible(format!(
                "unit {s}: fleet size {size} exceeds the observed total {avail} on its routes"
            )));
        }
    }
    FeasibleSet::with_totals(net, sizes)?.with_upper(q.to_vec())
}

pub(crate) fn certificate<T: Real>(
    strategy: &FleetStrategy<T>,
    grad: &Mat<T>,
    net: &Network<T>,
) -> UniquenessCertificate<T> {
    let gap = strategy.gap();
    let pd = net.pd_on_feasible(grad);
    let (theorem_applies, reason) = if !(gap > T::zero()) {
        (false, "lambda_crv <= lambda_hdv".to_string())
    } else if !pd.passes {
        (
            false,
            "travel-time gradient not positive definite on feasible directions".to_string(),
        )
    } else {
        (true, "gap positive and gradient positive definite".to_string())
    };
    UniquenessCertificate {
        theorem_applies,
        reason,
        min_rayleigh: pd.min_rayleigh,
        gap,
    }
}

/// Directions `g` with `Λ g = 0` and zero per-unit sums.
pub(crate) fn fiber_directions<T: Real>(net: &Network<T>) -> Vec<Vec<T>> {
    let r = net.n_routes();
    let mut rows = net.incidence().transpose().to_rows();
    for u in net.units() {
        let mut row = vec![T::zero(); r];
        for &k in &u.routes {
            row[k] = T::one();
        }
        rows.push(row);
    }
    null_space(&Mat::from_rows(&rows), net.numerics().rank_rel)
}

fn step_size<T: Real>(strategy: &FleetStrategy<T>, grad: &Mat<T>) -> T {
    let g = spectral_norm(grad);
    let l = strategy.gap().abs();
    let k = if l > T::zero() {
        l
    } else {
        strategy.lambda_crv.abs() + strategy.lambda_hdv.abs()
    };
    if g * k > T::zero() {
        T::lit(0.9) / (g * k)
    } else {
        T::one()
    }
}

fn push_distinct<T: Real>(list: &mut Vec<Vec<T>>, f: Vec<T>, tol: T) {
    if list.iter().all(|g| dist_inf(g, &f) > tol) {
        list.push(f);
    }
}

/// Recovers fleet route flows from observed route totals `q` using the
/// network's fleet sizes.
pub fn solve_inverse<T: Real>(
    strategy: &FleetStrategy<T>,
    q: &[T],
    net: &Network<T>,
    cfg: &InverseConfig<T>,
) -> Result<InverseResult<T>> {
    check_observed(q, net.n_routes())?;
    let set = inverse_set(q, net)?;
    let fiber = fiber_directions(net);
    let fiber_basis = (!fiber.is_empty()).then_some(fiber);
    let n = net.n_routes();

    if set.totals().iter().all(|&s| s == T::zero()) {
        let t = net.route_times(q)?;
        let f = vec![T::zero(); n];
        let grad = net.route_gradient(q)?;
        return Ok(InverseResult {
            h: q.to_vec(),
            residual: T::zero(),
            tolerance: cfg.tol_vi * (T::one() + norm_inf(&t)),
            converged: true,
            iterations: 0,
            certificate: certificate(strategy, &grad, net),
            fiber_basis,
            solutions: vec![f.clone()],
            f,
        });
    }

    let vi = AffineVi::at(strategy, q, net)?;
    let tol = cfg.tol_vi * (T::one() + norm_inf(&vi.times));
    let cert = certificate(strategy, &vi.grad, net);
    let step = step_size(strategy, &vi.grad);
    let start = set.project(&vec![T::zero(); n])?;
    let primary = vi.extragradient(&set, &start, step, tol, cfg.max_iter, cfg.polish_every)?;

    let scale = T::one() + set.totals().iter().fold(T::zero(), |m, &t| m.max(t));
    let distinct_tol = cfg.tol_distinct * scale;
    let mut solutions = Vec::new();
    if primary.converged {
        solutions.push(primary.f.clone());
    }
    if !cert.theorem_applies {
        for f in search_solutions(&vi, &set, step, tol, cfg)? {
            push_distinct(&mut solutions, f, distinct_tol);
        }
    }
    let Some(f) = solutions.first().cloned() else {
        return Err(Error::NonConverged {
            iterations: primary.iterations,
            residual: primary.residual.as_f64(),
        });
    };
    let residual = vi.natural_residual(&set, &f)?;
    let h = q.iter().zip(&f).map(|(&a, &b)| (a - b).max(T::zero())).collect();
    Ok(InverseResult {
        f,
        h,
        residual,
        tolerance: tol,
        converged: true,
        iterations: primary.iterations,
        certificate: cert,
        fiber_basis,
        solutions,
    })
}

/// Multistart extragradient plus, for small networks, exhaustive
/// active-set enumeration of the affine VI.
fn search_solutions<T: Real>(
    vi: &AffineVi<T>,
    set: &FeasibleSet<T>,
    step: T,
    tol: T,
    cfg: &InverseConfig<T>,
) -> Result<Vec<Vec<T>>> {
    let starts: Vec<Vec<T>> = (0..cfg.n_starts)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            set.random_point(&mut rng)
        })
        .collect::<Result<_>>()?;
    let iters = cfg.max_iter.min(20_000);
    let runs: Vec<vi::VisOutcome<T>> = starts
        .par_iter()
        .map(|s| vi.extragradient(set, s, step, tol, iters, cfg.polish_every))
        .collect::<Result<_>>()?;
    let mut found: Vec<Vec<T>> = runs.into_iter().filter(|r| r.converged).map(|r| r.f).collect();
    if set.dim() <= cfg.enumerate_routes {
        found.extend(vi.enumerate_solutions(set, tol)?);
    }
    Ok(found)
}

/// The same inverse solved as a convex quadratic program; needs a
/// symmetric travel-time gradient.
pub fn solve_inverse_qp<T: Real>(
    strategy: &FleetStrategy<T>,
    q: &[T],
    net: &Network<T>,
    cfg: &InverseConfig<T>,
) -> Result<InverseResult<T>> {
    check_observed(q, net.n_routes())?;
    let set = inverse_set(q, net)?;
    let vi = AffineVi::at(strategy, q, net)?;
    if !vi.grad.is_symmetric(T::lit(1e-12) * (T::one() + vi.grad.max_abs())) {
        return Err(Error::Unsupported(
            "quadratic-program form needs a symmetric gradient".into(),
        ));
    }
    let cert = certificate(strategy, &vi.grad, net);
    let tol = cfg.tol_vi * (T::one() + norm_inf(&vi.times));
    let step = step_size(strategy, &vi.grad);
    let start = set.project(&vec![T::zero(); net.n_routes()])?;
    let out = vi.projected_descent(&set, &start, step, tol, cfg.max_iter, cfg.polish_every)?;
    if !out.converged {
        return Err(Error::NonConverged {
            iterations: out.iterations,
            residual: out.residual.as_f64(),
        });
    }
    let fiber = fiber_directions(net);
    let h = q.iter().zip(&out.f).map(|(&a, &b)| (a - b).max(T::zero())).collect();
    Ok(InverseResult {
        solutions: vec![out.f.clone()],
        f: out.f,
        h,
        residual: out.residual,
        tolerance: tol,
        converged: true,
        iterations: out.iterations,
        certificate: cert,
        fiber_basis: (!fiber.is_empty()).then_some(fiber),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{fleet_assign, ForwardConfig};
    use crate::scalar::{add, dot};
    use crate::scenarios;

    #[test]
    fn discrete_example_continuous_inverse() {
        let net = scenarios::discrete_example::<f64>();
        let r = solve_inverse(
            &FleetStrategy::selfish(),
            &[50.0, 50.0],
            &net,
            &InverseConfig::default(),
        )
        .unwrap();
        assert!(r.certificate.theorem_applies);
        assert!(dist_inf(&r.f, &[9.5, 9.5]) < 1e-9, "{:?}", r.f);
        assert!(dist_inf(&r.h, &[40.5, 40.5]) < 1e-9);
        let qp = solve_inverse_qp(
            &FleetStrategy::selfish(),
            &[50.0, 50.0],
            &net,
            &InverseConfig::default(),
        )
        .unwrap();
        assert!(dist_inf(&qp.f, &r.f) < 1e-9);
    }

    #[test]
    fn empty_fleet() {
        let net = scenarios::symmetric_pair::<f64>(100.0, 0.0);
        let r = solve_inverse(
            &FleetStrategy::selfish(),
            &[60.0, 40.0],
            &net,
            &InverseConfig::default(),
        )
        .unwrap();
        assert_eq!(r.f, vec![0.0, 0.0]);
        assert_eq!(r.h, vec![60.0, 40.0]);
    }

    #[test]
    fn fig3_round_trip() {
        let net = scenarios::fig3::<f64>(50.0);
        let s = FleetStrategy::selfish();
        let h = [10.0, 40.0];
        let fwd = fleet_assign(&s, &h, &net, &ForwardConfig::default()).unwrap();
        let q = add(&h, &fwd.f);
        let inv = solve_inverse(&s, &q, &net, &InverseConfig::default()).unwrap();
        assert!(dist_inf(&inv.f, &fwd.f) <= 1e-4, "{:?} vs {:?}", inv.f, fwd.f);
    }

    #[test]
    fn infeasible_fleet_size() {
        let net = scenarios::symmetric_pair::<f64>(0.0, 150.0);
        assert!(matches!(
            solve_inverse(
                &FleetStrategy::selfish(),
                &[50.0, 50.0],
                &net,
                &InverseConfig::default()
            ),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn stationarity_contract() {
        let net = scenarios::fig3::<f64>(50.0);
        let s = FleetStrategy::new(-0.4, 0.7);
        let q = [45.0, 55.0];
        let f = [20.0, 30.0];
        let a = stationarity_map(&s, &q, &f, &net).unwrap();
        let h: Vec<f64> = q.iter().zip(&f).map(|(x, y)| x - y).collect();
        let g = [1.0, -1.0];
        let eps = 1e-5;
        let fp: Vec<f64> = f.iter().zip(&g).map(|(x, d)| x + eps * d).collect();
        let fm: Vec<f64> = f.iter().zip(&g).map(|(x, d)| x - eps * d).collect();
        let fd = (crate::objective::eval_objective(&s, &h, &fp, &net).unwrap()
            - crate::objective::eval_objective(&s, &h, &fm, &net).unwrap())
            / (2.0 * eps);
        assert!((dot(&a, &g) - fd).abs() <= 1e-6 * fd.abs().max(1.0));
    }

    #[test]
    fn altruistic_is_not_unique() {
        let net = scenarios::three_routes::<f64>();
        let r = solve_inverse(
            &FleetStrategy::altruistic(),
            &[30.0, 30.0, 40.0],
            &net,
            &InverseConfig::default(),
        )
        .unwrap();
        assert!(!r.certificate.theorem_applies);
        assert!(r.solutions.len() >= 2);
        assert!(r.solutions.iter().any(|f| dist_inf(f, &[0.0, 30.0, 0.0]) < 1e-9));
        assert!(r.solutions.iter().any(|f| dist_inf(f, &[30.0, 0.0, 0.0]) < 1e-9));
    }
}

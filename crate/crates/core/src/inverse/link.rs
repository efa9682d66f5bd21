//! Link-level inverse and the fiber of route flows over a link flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::vi::AffineVi;
use super::{check_observed, fiber_directions, InverseConfig, UniquenessCertificate};
use crate::error::{check_len, Error, Result};
use crate::feasible::FeasibleSet;
use crate::linalg::{pinv_psd, spectral_norm, sym_eigen, Mat};
use crate::network::Network;
use crate::objective::FleetStrategy;
use crate::scalar::{dist_inf, norm_inf, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkInverseResult<T> {
    pub fleet_link_flow: Vec<T>,
    pub hdv_link_flow: Vec<T>,
    /// One fleet route flow producing `fleet_link_flow`.
    pub route_representative: Vec<T>,
    pub residual: T,
    pub tolerance: T,
    pub converged: bool,
    pub iterations: usize,
    /// Uniqueness of the link-level answer: `L > 0` and `∇τ(a)` positive
    /// definite.
    pub certificate: UniquenessCertificate<T>,
    /// `min ‖Λq − a‖∞` over route flows meeting the unit demands.
    pub realisability_residual: T,
}

/// Best `Λq ≈ a` over `q ≥ 0` with unit totals `demand`, by accelerated
/// projected gradient.
fn realise<T: Real>(net: &Network<T>, demand: Vec<T>, a: &[T]) -> Result<(Vec<T>, T)> {
    let set = FeasibleSet::with_totals(net, demand)?;
    let inc = net.incidence();
    let lip = spectral_norm(inc).powi(2);
    let step = if lip > T::zero() { T::one() / lip } else { T::one() };
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(64.0)) * (T::one() + norm_inf(a));
    let mismatch = |q: &[T]| -> Vec<T> { inc.tr_matvec(q).into_iter().zip(a).map(|(x, &y)| x - y).collect() };
    let start: Vec<T> = vec![T::zero(); net.n_routes()];
    let mut q = set.project(&start)?;
    let mut y = q.clone();
    let mut t = T::one();
    for _ in 0..100_000 {
        let g = inc.matvec(&mismatch(&y));
        let next = set.project(&y.iter().zip(&g).map(|(&v, &d)| v - step * d).collect::<Vec<_>>())?;
        let moved = dist_inf(&next, &q);
        let t_next = (T::one() + (T::one() + T::lit(4.0) * t * t).sqrt()) / T::lit(2.0);
        let mom = (t - T::one()) / t_next;
        y = next.iter().zip(&q).map(|(&n, &o)| n + mom * (n - o)).collect();
        q = next;
        t = t_next;
        if norm_inf(&mismatch(&q)) <= tol || moved <= tol * T::lit(1e-3) {
            break;
        }
    }
    let r = norm_inf(&mismatch(&q));
    Ok((q, r))
}

/// Recovers the fleet's link flows from observed link totals `a`.
///
/// `a` must be realisable: some route flow meeting every unit's total
/// demand `q^HDV + q^CRV` maps onto it.
pub fn inverse_link_flows<T: Real>(
    strategy: &FleetStrategy<T>,
    a: &[T],
    net: &Network<T>,
    cfg: &InverseConfig<T>,
) -> Result<LinkInverseResult<T>> {
    if !net.is_link_additive() {
        return Err(Error::Unsupported(
            "link-level inverse needs link-additive route delays".into(),
        ));
    }
    check_observed(a, net.n_links())?;
    let demand: Vec<T> = net.units().iter().map(|u| u.q_hdv + u.q_crv).collect();
    let (_, realisability) = realise(net, demand, a)?;
    let real_tol = T::lit(1e-6).max(T::epsilon().sqrt()) * (T::one() + norm_inf(a));
    if realisability > real_tol {
        return Err(Error::NotRealisable {
            residual: realisability.as_f64(),
        });
    }

    let inc = net.incidence();
    let tau = net.link_times(a)?;
    let jac = net.link_jacobian(a)?;
    let gap = strategy.gap();
    let link_c: Vec<T> = jac
        .tr_matvec(&a.iter().map(|&x| strategy.lambda_hdv * x).collect::<Vec<_>>())
        .into_iter()
        .zip(&tau)
        .map(|(g, &t)| g + strategy.lambda_crv * t)
        .collect();
    let c = inc.matvec(&link_c);
    let route_grad = inc.matmul(&jac).matmul(&inc.transpose());
    let m = route_grad.transpose().scale(gap);
    let times = inc.matvec(&tau);

    let set = FeasibleSet::fleet(net).with_link_caps(inc.clone(), a.to_vec())?;
    let tol = cfg.tol_vi * (T::one() + norm_inf(&times));
    let norm = spectral_norm(&m);
    let step = if norm > T::zero() { T::lit(0.9) / norm } else { T::one() };
    let vi = AffineVi::from_parts(times, route_grad, c, m);
    let start = set.project(&vec![T::zero(); net.n_routes()])?;
    let out = vi.extragradient(&set, &start, step, tol, cfg.max_iter, 0)?;
    if !out.converged {
        return Err(Error::NonConverged {
            iterations: out.iterations,
            residual: out.residual.as_f64(),
        });
    }

    let s = jac.sym();
    let eig = sym_eigen(&s);
    let lam = eig.values.first().copied().unwrap_or(T::infinity());
    let threshold = net.numerics().pd_rel * s.trace().abs() / T::from_count(net.n_links().max(1));
    let pd = lam > threshold;
    let (theorem_applies, reason) = if !(gap > T::zero()) {
        (false, "lambda_crv <= lambda_hdv".to_string())
    } else if !pd {
        (false, "link delay gradient not positive definite".to_string())
    } else {
        (
            true,
            "gap positive and link delay gradient positive definite".to_string(),
        )
    };

    let fleet_link_flow = inc.tr_matvec(&out.f);
    let hdv_link_flow = a
        .iter()
        .zip(&fleet_link_flow)
        .map(|(&x, &y)| (x - y).max(T::zero()))
        .collect();
    Ok(LinkInverseResult {
        fleet_link_flow,
        hdv_link_flow,
        route_representative: out.f,
        residual: out.residual,
        tolerance: tol,
        converged: true,
        iterations: out.iterations,
        certificate: UniquenessCertificate {
            theorem_applies,
            reason,
            min_rayleigh: lam,
            gap,
        },
        realisability_residual: realisability,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteFiber<T> {
    /// Minimum-norm fleet route flow with `Λ f = φ`.
    pub representative: Vec<T>,
    /// Orthonormal directions keeping link flows and unit totals fixed.
    pub basis: Vec<Vec<T>>,
    /// Range of `t` with `representative + t·basis[k]` inside the bounds.
    pub bounds: Vec<(T, T)>,
    /// Whether the fiber is a single point. Exact for at most one basis
    /// direction, sampled beyond that.
    pub unique: bool,
    pub residual: T,
}

/// The set of fleet route flows `{0 ≤ f ≤ upper, unit totals, Λ f = φ}`.
pub fn route_fiber<T: Real>(net: &Network<T>, phi: &[T], upper: Option<&[T]>) -> Result<RouteFiber<T>> {
    check_observed(phi, net.n_links())?;
    let n = net.n_routes();
    let mut set = FeasibleSet::fleet(net);
    if let Some(u) = upper {
        check_len(n, u.len())?;
        set = set.with_upper(u.to_vec())?;
    }
    let scale = T::one() + norm_inf(phi) + set.totals().iter().fold(T::zero(), |m, &t| m.max(t));
    let ct = net.incidence().transpose();
    let gram_pinv = pinv_psd(&ct.matmul(net.incidence()), T::lit(1e-12));
    let to_affine = |x: &[T]| -> Vec<T> {
        let r: Vec<T> = ct.matvec(x).into_iter().zip(phi).map(|(a, &b)| a - b).collect();
        let corr = net.incidence().matvec(&gram_pinv.matvec(&r));
        x.iter().zip(&corr).map(|(&a, &b)| a - b).collect()
    };

    // Dykstra from the origin: the limit is the minimum-norm point
    let tol = T::lit(1e-14).max(T::epsilon() * T::lit(8.0)) * scale;
    let mut x = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    for _ in 0..200_000 {
        let before = x.clone();
        let y: Vec<T> = x.iter().zip(&p).map(|(&a, &b)| a + b).collect();
        let z = set.project(&y)?;
        p = y.iter().zip(&z).map(|(&a, &b)| a - b).collect();
        x = to_affine(&z);
        if dist_inf(&before, &x) <= tol {
            break;
        }
    }
    let mut f = set.project(&x)?;
    let residual_of = |f: &[T]| -> T { dist_inf(&ct.matvec(f), phi) };
    if let Some(g) = least_norm_polish(net, &set, &f, phi, scale) {
        if residual_of(&g) <= residual_of(&f) + tol {
            f = g;
        }
    }
    let residual = residual_of(&f);
    if residual > T::lit(1e-7).max(T::epsilon().sqrt()) * scale {
        return Err(Error::Infeasible(format!(
            "no fleet route flow produces the link flow (residual {residual})"
        )));
    }

    let basis = fiber_directions(net);
    let box_range = |d: &[T]| -> (T, T) {
        let mut lo = T::neg_infinity();
        let mut hi = T::infinity();
        for (r, &g) in d.iter().enumerate() {
            let cap = upper.map_or(T::infinity(), |u| u[r]);
            if g > T::zero() {
                lo = lo.max(-f[r] / g);
                hi = hi.min((cap - f[r]) / g);
            } else if g < T::zero() {
                lo = lo.max((cap - f[r]) / g);
                hi = hi.min(-f[r] / g);
            }
        }
        (lo.min(T::zero()), hi.max(T::zero()))
    };
    let bounds: Vec<(T, T)> = basis.iter().map(|g| box_range(g)).collect();
    let width_tol = T::lit(1e-7).max(T::epsilon().sqrt()) * scale;
    let unique = match basis.len() {
        0 => true,
        1 => bounds[0].1 - bounds[0].0 <= width_tol,
        k => {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let degenerate = |d: &[T]| {
                let (lo, hi) = box_range(d);
                hi - lo <= width_tol
            };
            bounds.iter().all(|b| b.1 - b.0 <= width_tol)
                && (0..256).all(|_| {
                    let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
                    let mut d = vec![T::zero(); n];
                    for (g, &c) in basis.iter().zip(&w) {
                        for (x, &y) in d.iter_mut().zip(g) {
                            *x += T::lit(c) * y;
                        }
                    }
                    degenerate(&d)
                })
        }
    };
    Ok(RouteFiber {
        representative: f,
        basis,
        bounds,
        unique,
        residual,
    })
}

/// Exact minimum-norm point on the active face suggested by `f`.
fn least_norm_polish<T: Real>(net: &Network<T>, set: &FeasibleSet<T>, f: &[T], phi: &[T], scale: T) -> Option<Vec<T>> {
    let n = f.len();
    let eps = T::lit(1e-9) * scale;
    let mut g = vec![T::zero(); n];
    let mut free = Vec::new();
    for r in 0..n {
        let cap = set.upper().map(|u| u[r]);
        if f[r] <= eps {
            g[r] = T::zero();
        } else if cap.is_some_and(|c| f[r] >= c - eps) {
            g[r] = cap.unwrap_or(T::zero());
        } else {
            free.push(r);
        }
    }
    // constraints E g = rhs: link rows then unit rows
    let inc = net.incidence();
    let mut rows: Vec<Vec<T>> = Vec::new();
    let mut rhs = Vec::new();
    for j in 0..net.n_links() {
        rows.push(free.iter().map(|&r| inc[(r, j)]).collect());
        let fixed: T = (0..n).map(|r| inc[(r, j)] * g[r]).sum();
        rhs.push(phi[j] - fixed);
    }
    for (u, &t) in set.units().iter().zip(set.totals()) {
        rows.push(
            free.iter()
                .map(|r| if u.contains(r) { T::one() } else { T::zero() })
                .collect(),
        );
        let fixed: T = u.iter().map(|&r| g[r]).sum();
        rhs.push(t - fixed);
    }
    if free.is_empty() {
        return set.contains(&g, eps).then_some(g);
    }
    let e = Mat::from_rows(&rows);
    let w = pinv_psd(&e.matmul(&e.transpose()), T::lit(1e-12)).matvec(&rhs);
    let x = e.tr_matvec(&w);
    for (&r, v) in free.iter().zip(x) {
        g[r] = v;
    }
    set.contains(&g, eps).then_some(g)
}

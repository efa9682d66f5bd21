//! The forward fleet assignment operator `G`: the fleet's best response to
//! a known HDV flow, dispatched on the curvature of the fleet objective.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::feasible::FeasibleSet;
use crate::network::Network;
use crate::objective::{classify_convexity, eval_objective, objective_gradient_in_f, ConvexityKind, FleetStrategy};
use crate::scalar::{add, dist_inf, dot, norm2, norm_inf, sub, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardConfig<T> {
    /// Stop when `‖f − P(f − ∇F)‖∞ ≤ tol_pg · (1 + max fleet size)`.
    pub tol_pg: T,
    pub max_iter: usize,
    /// Random interior starts used by the general solver.
    pub n_starts: usize,
    /// Random directions probed by the local-minimum certificate.
    pub n_dir: usize,
    pub vertex_cap: usize,
    /// Relative objective gap under which vertices tie.
    pub tol_tie: T,
    /// Local minima closer than `tol_distinct · (1 + max fleet size)` in
    /// the max norm are the same.
    pub tol_distinct: T,
    /// Directional derivatives above `−tol_dd · (1 + ‖∇F‖∞)` count as
    /// non-negative.
    pub tol_dd: T,
    pub seed: u64,
}

impl<T: Real> Default for ForwardConfig<T> {
    fn default() -> Self {
        let floor = T::epsilon() * T::lit(64.0);
        Self {
            tol_pg: T::lit(1e-10).max(floor),
            max_iter: 20_000,
            n_starts: 20,
            n_dir: 50,
            vertex_cap: 100_000,
            tol_tie: T::lit(1e-9).max(floor),
            tol_distinct: T::lit(1e-6).max(floor),
            tol_dd: T::lit(1e-7).max(floor * T::lit(16.0)),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Empty fleet, nothing to solve.
    Trivial,
    Convex,
    Concave,
    General,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate<T> {
    pub is_local_min: bool,
    /// Smallest derivative over probed directions, each scaled like a unit
    /// transfer (`‖d‖₂ = √2`). `+∞` when no feasible direction exists.
    pub min_directional_derivative: T,
    pub directions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverTrace {
    pub solver: Solver,
    pub iterations: usize,
    pub starts: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult<T> {
    pub f: Vec<T>,
    pub objective: T,
    pub certificate: Certificate<T>,
    pub trace: SolverTrace,
    /// All minimisers tying with `f` (canonical one first).
    pub minimizer_set: Vec<Vec<T>>,
    /// Distinct local minima found, best first, with objective values.
    pub local_minima: Vec<(Vec<T>, T)>,
}

impl<T: Real> AssignmentResult<T> {
    /// Fleet link flow `Λ f`.
    pub fn link_flow(&self, net: &Network<T>) -> Vec<T> {
        net.apply_lambda(&self.f)
    }
}

fn scale_of<T: Real>(set: &FeasibleSet<T>) -> T {
    T::one() + set.totals().iter().fold(T::zero(), |m, &t| m.max(t))
}

fn is_domain_error(e: &Error) -> bool {
    matches!(e, Error::DomainViolation { .. } | Error::NotDifferentiable { .. })
}

struct PgOutcome<T> {
    f: Vec<T>,
    value: T,
    iterations: usize,
    converged: bool,
}

/// Projected gradient with Barzilai–Borwein trial steps and Armijo
/// backtracking along the projection arc.
fn projected_gradient<T: Real>(
    strategy: &FleetStrategy<T>,
    h: &[T],
    net: &Network<T>,
    set: &FeasibleSet<T>,
    start: &[T],
    cfg: &ForwardConfig<T>,
) -> Result<PgOutcome<T>> {
    let objective = |f: &[T]| eval_objective(strategy, h, f, net);
    let tol = cfg.tol_pg * scale_of(set);
    let sigma = T::lit(1e-4);
    let half = T::lit(0.5);
    let tiny = T::epsilon() * T::epsilon();

    let mut f = set.project(start)?;
    let mut value = objective(&f)?;
    let mut grad = objective_gradient_in_f(strategy, h, &f, net)?;
    let mut step = T::one();
    for it in 0..cfg.max_iter {
        let natural = set.project(&sub(&f, &grad))?;
        if dist_inf(&f, &natural) <= tol {
            return Ok(PgOutcome {
                f,
                value,
                iterations: it,
                converged: true,
            });
        }
        let mut s = step;
        let (next, next_value) = loop {
            let trial = set.project(&f.iter().zip(&grad).map(|(&x, &g)| x - s * g).collect::<Vec<_>>())?;
            let delta = sub(&trial, &f);
            match objective(&trial) {
                Ok(v) if v <= value + sigma * dot(&grad, &delta) => break (trial, v),
                Ok(_) => {}
                Err(e) if is_domain_error(&e) => {}
                Err(e) => return Err(e),
            }
            s *= half;
            if s < tiny {
                // no decrease possible at working precision
                let converged = dist_inf(&f, &natural) <= tol * T::lit(1e3);
                return Ok(PgOutcome {
                    f,
                    value,
                    iterations: it,
                    converged,
                });
            }
        };
        let next_grad = objective_gradient_in_f(strategy, h, &next, net)?;
        let df = sub(&next, &f);
        let dg = sub(&next_grad, &grad);
        let curv = dot(&df, &dg);
        step = if curv > T::zero() {
            (dot(&df, &df) / curv).min(T::lit(1e12)).max(T::lit(1e-12))
        } else {
            (s * T::lit(2.0)).min(T::lit(1e12))
        };
        f = next;
        value = next_value;
        grad = next_grad;
    }
    Ok(PgOutcome {
        f,
        value,
        iterations: cfg.max_iter,
        converged: false,
    })
}

/// Euclidean projection onto the fleet's feasible set.
pub fn project_to_feasible<T: Real>(v: &[T], set: &FeasibleSet<T>) -> Result<Vec<T>> {
    set.project(v)
}

fn uniform_start<T: Real>(set: &FeasibleSet<T>) -> Vec<T> {
    let mut f = vec![T::zero(); set.dim()];
    for (u, &t) in set.units().iter().zip(set.totals()) {
        for &r in u {
            f[r] = t / T::from_count(u.len());
        }
    }
    f
}

fn check_hdv<T: Real>(h: &[T], net: &Network<T>) -> Result<()> {
    check_len(net.n_routes(), h.len())?;
    for (index, &v) in h.iter().enumerate() {
        if !(v >= T::zero()) {
            return Err(Error::NegativeFlow {
                index,
                value: v.as_f64(),
            });
        }
    }
    Ok(())
}

/// Unique minimiser of a convex fleet objective.
pub fn solve_convex<T: Real>(
    strategy: &FleetStrategy<T>,
    h: &[T],
    net: &Network<T>,
    set: &FeasibleSet<T>,
    cfg: &ForwardConfig<T>,
) -> Result<AssignmentResult<T>> {
    check_hdv(h, net)?;
    let out = projected_gradient(strategy, h, net, set, &uniform_start(set), cfg)?;
    let certificate = certify_local_min(strategy, h, &out.f, net, set, cfg)?;
    Ok(AssignmentResult {
        minimizer_set: vec![out.f.clone()],
        local_minima: vec![(out.f.clone(), out.value)],
        f: out.f,
        objective: out.value,
        certificate,
        trace: SolverTrace {
            solver: Solver::Convex,
            iterations: out.iterations,
            starts: 1,
            converged: out.converged,
        },
    })
}

/// Minimiser(s) of a concave fleet objective by vertex enumeration.
pub fn solve_concave<T: Real>(
    strategy: &FleetStrategy<T>,
    h: &[T],
    net: &Network<T>,
    set: &FeasibleSet<T>,
    cfg: &ForwardConfig<T>,
) -> Result<AssignmentResult<T>> {
    check_hdv(h, net)?;
    if set.upper().is_some() || set.has_link_caps() {
        return Err(Error::Unsupported(
            "vertex enumeration needs an uncapped feasible set".into(),
        ));
    }
    let count = set.vertex_count();
    if count > cfg.vertex_cap as u128 {
        return Err(Error::VertexCap {
            count,
            cap: cfg.vertex_cap,
        });
    }
    let vertices = set.vertices();
    let values: Vec<T> = vertices
        .par_iter()
        .map(|(_, f)| eval_objective(strategy, h, f, net))
        .collect::<Result<_>>()?;
    let best = values.iter().copied().fold(T::infinity(), T::min);
    let tie = cfg.tol_tie * best.abs().max(T::one());
    let minimizer_set: Vec<Vec<T>> = vertices
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v - best <= tie)
        .map(|((_, f), _)| f.clone())
        .collect();
    let f = minimizer_set[0].clone();
    let certificate = certify_local_min(strategy, h, &f, net, set, cfg)?;
    let mut ranked: Vec<(Vec<T>, T)> = vertices.into_iter().map(|(_, f)| f).zip(values).collect();
    ranked.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("NaN objective"));
    Ok(AssignmentResult {
        f,
        objective: best,
        certificate,
        trace: SolverTrace {
            solver: Solver::Concave,
            iterations: 0,
            starts: count as usize,
            converged: true,
        },
        minimizer_set,
        local_minima: ranked,
    })
}

/// Multistart projected gradient for objectives of unknown curvature.
pub fn solve_general<T: Real>(
    strategy: &FleetStrategy<T>,
    h: &[T],
    net: &Network<T>,
    set: &FeasibleSet<T>,
    cfg: &ForwardConfig<T>,
) -> Result<AssignmentResult<T>> {
    check_hdv(h, net)?;
    let mut starts: Vec<Vec<T>> = Vec::new();
    if set.upper().is_none() && !set.has_link_caps() && set.vertex_count() <= cfg.vertex_cap as u128 {
        starts.extend(set.vertices().into_iter().map(|(_, f)| f));
    }
    for k in 0..cfg.n_starts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        starts.push(set.random_point(&mut rng)?);
    }
    let runs: Vec<PgOutcome<T>> = starts
        .par_iter()
        .map(|s| projected_gradient(strategy, h, net, set, s, cfg))
        .collect::<Result<_>>()?;

    let iterations = runs.iter().map(|r| r.iterations).sum();
    let converged = runs.iter().all(|r| r.converged);
    let tol_distinct = cfg.tol_distinct * scale_of(set);
    let mut order: Vec<usize> = (0..runs.len()).collect();
    // stable: equal values keep start order
    order.sort_by(|&a, &b| runs[a].value.partial_cmp(&runs[b].value).expect("NaN objective"));
    let mut distinct: Vec<(Vec<T>, T)> = Vec::new();
    for &i in &order {
        if distinct.iter().all(|(g, _)| dist_inf(g, &runs[i].f) > tol_distinct) {
            distinct.push((runs[i].f.clone(), runs[i].value));
        }
    }
    // keep certified local minima, unless none certify
    let mut certified = Vec::new();
    for (f, v) in &distinct {
        if certify_local_min(strategy, h, f, net, set, cfg)?.is_local_min {
            certified.push((f.clone(), *v));
        }
    }
    let local_minima = if certified.is_empty() { distinct } else { certified };
    let best = local_minima[0].1;
    let tie = cfg.tol_tie * best.abs().max(T::one());
    let minimizer_set: Vec<Vec<T>> = local_minima
        .iter()
        .filter(|(_, v)| *v - best <= tie)
        .map(|(f, _)| f.clone())
        .collect();
    let f = minimizer_set[0].clone();
    let certificate = certify_local_min(strategy, h, &f, net, set, cfg)?;
    Ok(AssignmentResult {
        f,
        objective: best,
        certificate,
        trace: SolverTrace {
            solver: Solver::General,
            iterations,
            starts: starts.len(),
            converged,
        },
        minimizer_set,
        local_minima,
    })
}

/// The operator `G`: fleet response to HDV flow `h` on the network's own
/// fleet sizes.
pub fn fleet_assign<T: Real>(
    strategy: &FleetStrategy<T>,
    h: &[T],
    net: &Network<T>,
    cfg: &ForwardConfig<T>,
) -> Result<AssignmentResult<T>> {
    check_hdv(h, net)?;
    let set = FeasibleSet::fleet(net);
    if set.totals().iter().all(|&t| t == T::zero()) {
        let f = vec![T::zero(); net.n_routes()];
        let objective = eval_objective(strategy, h, &f, net)?;
        return Ok(AssignmentResult {
            minimizer_set: vec![f.clone()],
            local_minima: vec![(f.clone(), objective)],
            f,
            objective,
            certificate: Certificate {
                is_local_min: true,
                min_directional_derivative: T::infinity(),
                directions: 0,
            },
            trace: SolverTrace {
                solver: Solver::Trivial,
                iterations: 0,
                starts: 0,
                converged: true,
            },
        });
    }
    match classify_convexity(strategy, net) {
        Ok(c) if c.kind == ConvexityKind::ConvexEverywhere => solve_convex(strategy, h, net, &set, cfg),
        Ok(c) if c.kind == ConvexityKind::ConcaveEverywhere => solve_concave(strategy, h, net, &set, cfg),
        Ok(_) | Err(Error::Unsupported(_)) => solve_general(strategy, h, net, &set, cfg),
        Err(e) => Err(e),
    }
}

/// `H(h) = h + G(h)`.
pub fn total_assign<T: Real>(
    strategy: &FleetStrategy<T>,
    h: &[T],
    net: &Network<T>,
    cfg: &ForwardConfig<T>,
) -> Result<Vec<T>> {
    Ok(add(h, &fleet_assign(strategy, h, net, cfg)?.f))
}

/// First-order local-minimum test with a second-order probe along
/// directions whose derivative vanishes.
pub fn certify_local_min<T: Real>(
    strategy: &FleetStrategy<T>,
    h: &[T],
    f: &[T],
    net: &Network<T>,
    set: &FeasibleSet<T>,
    cfg: &ForwardConfig<T>,
) -> Result<Certificate<T>> {
    check_len(set.dim(), f.len())?;
    let grad = objective_gradient_in_f(strategy, h, f, net)?;
    let scale = scale_of(set);
    let sqrt2 = T::lit(2.0).sqrt();
    let mut dirs = set.edge_directions(f, T::lit(1e-9) * scale);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(u64::MAX);
    for _ in 0..cfg.n_dir {
        let y = set.random_point(&mut rng)?;
        let d = sub(&y, f);
        let n = norm2(&d);
        if n > T::lit(1e-9) * scale {
            dirs.push(d.into_iter().map(|x| x * sqrt2 / n).collect());
        }
    }
    if dirs.is_empty() {
        return Ok(Certificate {
            is_local_min: true,
            min_directional_derivative: T::infinity(),
            directions: 0,
        });
    }
    let tol = cfg.tol_dd * (T::one() + norm_inf(&grad));
    let base = eval_objective(strategy, h, f, net)?;
    let mut min_dd = T::infinity();
    let mut ok = true;
    for d in &dirs {
        let dd = dot(&grad, d);
        min_dd = min_dd.min(dd);
        if dd < -tol || (dd <= tol && !second_order_ok(strategy, h, f, d, base, dd, net, scale)?) {
            ok = false;
        }
    }
    Ok(Certificate {
        is_local_min: ok,
        min_directional_derivative: min_dd,
        directions: dirs.len(),
    })
}

/// Along a direction of vanishing slope, the objective must not drop by
/// more than rounding after a small feasible step.
#[allow(clippy::too_many_arguments)]
fn second_order_ok<T: Real>(
    strategy: &FleetStrategy<T>,
    h: &[T],
    f: &[T],
    d: &[T],
    base: T,
    slope: T,
    net: &Network<T>,
    scale: T,
) -> Result<bool> {
    // largest step keeping f + εd ≥ 0
    let mut room = T::lit(1e-3) * scale;
    for (&x, &di) in f.iter().zip(d) {
        if di < T::zero() {
            room = room.min(-x / di);
        }
    }
    if room <= T::epsilon() * scale {
        return Ok(true);
    }
    let trial: Vec<T> = f
        .iter()
        .zip(d)
        .map(|(&x, &di)| (x + room * di).max(T::zero()))
        .collect();
    let v = match eval_objective(strategy, h, &trial, net) {
        Ok(v) => v,
        Err(e) if is_domain_error(&e) => return Ok(true),
        Err(e) => return Err(e),
    };
    let remainder = v - base - room * slope;
    let noise = T::lit(1e-9) * (T::one() + base.abs());
    Ok(remainder >= -noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::DelayFunction;
    use crate::scenarios;

    fn cfg() -> ForwardConfig<f64> {
        ForwardConfig::default()
    }

    #[test]
    fn symmetric_convex_split() {
        let net = scenarios::parallel(2, DelayFunction::affine(1.0, 1.0), 0.0, 10.0);
        let r = fleet_assign(&FleetStrategy::selfish(), &[0.0, 0.0], &net, &cfg()).unwrap();
        assert_eq!(r.trace.solver, Solver::Convex);
        assert!((r.f[0] - 5.0).abs() < 1e-8 && (r.f[1] - 5.0).abs() < 1e-8);
        assert!(r.certificate.is_local_min);
        assert!(r.certificate.min_directional_derivative.abs() < 1e-6);
    }

    #[test]
    fn fig3_selfish_matches_grid() {
        let net = scenarios::fig3::<f64>(50.0);
        let s = FleetStrategy::selfish();
        let h = [10.0, 40.0];
        let r = fleet_assign(&s, &h, &net, &cfg()).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=50_000 {
            let f1 = i as f64 * 0.001;
            let v = eval_objective(&s, &h, &[f1, 50.0 - f1], &net).unwrap();
            if v < best.0 {
                best = (v, f1);
            }
        }
        assert!((r.f[0] - best.1).abs() < 0.01, "{} vs {}", r.f[0], best.1);
    }

    #[test]
    fn malicious_example3() {
        let net = scenarios::symmetric_pair::<f64>(50.0, 50.0);
        let s = FleetStrategy::malicious();
        let r = fleet_assign(&s, &[25.0, 25.0], &net, &cfg()).unwrap();
        assert_eq!(r.trace.solver, Solver::Concave);
        assert_eq!(r.minimizer_set, vec![vec![50.0, 0.0], vec![0.0, 50.0]]);
        assert!(r.certificate.is_local_min);
        let r = fleet_assign(&s, &[25.1, 24.9], &net, &cfg()).unwrap();
        assert_eq!(r.minimizer_set, vec![vec![50.0, 0.0]]);
        let set = FeasibleSet::fleet(&net);
        let c = certify_local_min(&s, &[25.0, 25.0], &[25.0, 25.0], &net, &set, &cfg()).unwrap();
        assert!(!c.is_local_min);
    }

    #[test]
    fn malicious_three_routes_picks_busiest() {
        let net = scenarios::parallel(3, DelayFunction::quadratic(10.0, 0.01), 70.0, 10.0);
        let r = fleet_assign(&FleetStrategy::malicious(), &[30.0, 0.0, 40.0], &net, &cfg()).unwrap();
        assert_eq!(r.f, vec![0.0, 0.0, 10.0]);
    }

    #[test]
    fn altruistic_example2() {
        let net = scenarios::three_routes::<f64>();
        let r = fleet_assign(&FleetStrategy::altruistic(), &[30.0, 0.0, 40.0], &net, &cfg()).unwrap();
        assert!(dist_inf(&r.f, &[0.0, 30.0, 0.0]) < 1e-6, "{:?}", r.f);
    }

    #[test]
    fn general_agrees_with_convex_and_grid() {
        let net = scenarios::fig3::<f64>(50.0);
        let set = FeasibleSet::fleet(&net);
        let h = [10.0, 40.0];
        let s = FleetStrategy::selfish();
        let a = solve_convex(&s, &h, &net, &set, &cfg()).unwrap();
        let b = solve_general(&s, &h, &net, &set, &cfg()).unwrap();
        assert!(dist_inf(&a.f, &b.f) < 1e-6);

        let d = FleetStrategy::disruptive();
        let g = solve_general(&d, &h, &net, &set, &cfg()).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=50_000 {
            let f1 = i as f64 * 0.001;
            let v = eval_objective(&d, &h, &[f1, 50.0 - f1], &net).unwrap();
            if v < best.0 {
                best = (v, f1);
            }
        }
        assert!((g.f[0] - best.1).abs() < 0.01);
    }

    #[test]
    fn empty_fleet_is_trivial() {
        let net = scenarios::fig3::<f64>(0.0);
        let s = FleetStrategy::disruptive();
        let r = fleet_assign(&s, &[10.0, 40.0], &net, &cfg()).unwrap();
        assert_eq!(r.f, vec![0.0, 0.0]);
        let expect = eval_objective(&s, &[10.0, 40.0], &[0.0, 0.0], &net).unwrap();
        assert_eq!(r.objective, expect);
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let net = scenarios::parallel(3, DelayFunction::quadratic(1.0, 1.0), 0.0, 3.0);
        let c = ForwardConfig { vertex_cap: 2, ..cfg() };
        let e = fleet_assign(&FleetStrategy::malicious(), &[1.0, 1.0, 1.0], &net, &c);
        assert!(matches!(e, Err(Error::VertexCap { count: 3, cap: 2 })));
    }
}

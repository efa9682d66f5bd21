//! Two-route Stackelberg analysis: the fleet commits to a randomised
//! assignment, HDVs equilibrate on expected travel times.

use rayon::prelude::*;

use crate::dynamics::{simulate, SimulationConfig};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::objective::{eval_objective, FleetStrategy};
use crate::scalar::Real;

/// Fleet plays `(α q^CRV, (1 − α) q^CRV)` with the paired weight.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralMixture<T> {
    support: Vec<(T, T)>,
}

impl<T: Real> GeneralMixture<T> {
    pub fn new(support: Vec<(T, T)>) -> Result<Self> {
        let unit = |x: T| x >= T::zero() && x <= T::one();
        if support.is_empty() || !support.iter().all(|&(a, w)| unit(a) && w >= T::zero()) {
            return Err(Error::InvalidConfig(
                "mixture needs α ∈ [0, 1] and non-negative weights".into(),
            ));
        }
        let total: T = support.iter().map(|p| p.1).sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::InvalidConfig(format!("mixture weights sum to {total}")));
        }
        Ok(Self { support })
    }

    pub fn pure(alpha: T) -> Self {
        Self {
            support: vec![(alpha, T::one())],
        }
    }

    pub fn support(&self) -> &[(T, T)] {
        &self.support
    }

    /// `ᾱ = Σ w α`
    pub fn mean_alpha(&self) -> T {
        self.support.iter().map(|&(a, w)| a * w).sum()
    }
}

/// `(q^CRV, 0)` with probability `p`, `(0, q^CRV)` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedCornerStrategy<T> {
    pub p: T,
}

impl<T: Real> MixedCornerStrategy<T> {
    pub fn new(p: T) -> Result<Self> {
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidConfig(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self { p })
    }

    pub fn mixture(&self) -> GeneralMixture<T> {
        GeneralMixture {
            support: vec![(T::one(), self.p), (T::zero(), T::one() - self.p)],
        }
    }
}

fn check_two_routes<T: Real>(net: &Network<T>) -> Result<()> {
    if net.n_routes() != 2 || net.units().len() != 1 {
        return Err(Error::Unsupported(
            "Stackelberg analysis needs a single unit with two routes".into(),
        ));
    }
    Ok(())
}

fn fleet_point<T: Real>(alpha: T, q_crv: T) -> [T; 2] {
    [alpha * q_crv, (T::one() - alpha) * q_crv]
}

/// Expected `t₁ − t₂` at HDV flow `(h₁, q^HDV − h₁)`.
fn expected_gap<T: Real>(mix: &GeneralMixture<T>, h1: T, q_hdv: T, q_crv: T, net: &Network<T>) -> Result<T> {
    let mut g = T::zero();
    for &(a, w) in &mix.support {
        if w == T::zero() {
            continue;
        }
        let f = fleet_point(a, q_crv);
        let t = net.route_times(&[h1 + f[0], (q_hdv - h1) + f[1]])?;
        g += w * (t[0] - t[1]);
    }
    Ok(g)
}

/// HDV user equilibrium on expected travel times, by bisection on `h₁`.
pub fn induced_ue<T: Real>(mix: &GeneralMixture<T>, q_hdv: T, q_crv: T, net: &Network<T>) -> Result<[T; 2]> {
    check_two_routes(net)?;
    let gap = |h1: T| expected_gap(mix, h1, q_hdv, q_crv, net);
    if gap(T::zero())? >= T::zero() {
        return Ok([T::zero(), q_hdv]);
    }
    if gap(q_hdv)? <= T::zero() {
        return Ok([q_hdv, T::zero()]);
    }
    let (mut lo, mut hi) = (T::zero(), q_hdv);
    loop {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        let g = gap(mid)?;
        if g == T::zero() {
            return Ok([mid, q_hdv - mid]);
        }
        if g < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let h1 = if gap(lo)?.abs() <= gap(hi)?.abs() { lo } else { hi };
    Ok([h1, q_hdv - h1])
}

/// `Σ w F(h, f_α)`.
pub fn expected_fleet_objective<T: Real>(
    strategy: &FleetStrategy<T>,
    mix: &GeneralMixture<T>,
    h: &[T; 2],
    q_crv: T,
    net: &Network<T>,
) -> Result<T> {
    let mut v = T::zero();
    for &(a, w) in &mix.support {
        v += w * eval_objective(strategy, h, &fleet_point(a, q_crv), net)?;
    }
    Ok(v)
}

/// Expected HDV travel time `Σ w h · t(h + f_α)`.
fn expected_hdv_time<T: Real>(mix: &GeneralMixture<T>, h: &[T; 2], q_crv: T, net: &Network<T>) -> Result<T> {
    // the HDV-only objective is the altruistic one with the fleet's share removed
    expected_fleet_objective(&FleetStrategy::new(T::one(), T::zero()), mix, h, q_crv, net)
}

fn corner_value<T: Real>(strategy: &FleetStrategy<T>, p: T, q_hdv: T, q_crv: T, net: &Network<T>) -> Result<T> {
    let mix = MixedCornerStrategy { p }.mixture();
    let h = induced_ue(&mix, q_hdv, q_crv, net)?;
    expected_fleet_objective(strategy, &mix, &h, q_crv, net)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerOptimum<T> {
    pub p_star: T,
    pub objective: T,
    /// Every global optimum found (ascending).
    pub optima: Vec<T>,
    /// The objective does not depend on `p`.
    pub degenerate: bool,
}

fn golden<T: Real>(mut a: T, mut b: T, tol: T, f: &impl Fn(T) -> Result<T>) -> Result<(T, T)> {
    let r = (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let x = (a + b) * T::lit(0.5);
    Ok((x, f(x)?))
}

/// Minimises the expected fleet objective over `p`: 1001-point grid, then
/// golden-section refinement around every near-best grid point.
pub fn optimize_corner_mixture<T: Real>(
    strategy: &FleetStrategy<T>,
    net: &Network<T>,
    q_hdv: T,
    q_crv: T,
) -> Result<CornerOptimum<T>> {
    check_two_routes(net)?;
    let n = 1000;
    let grid: Vec<T> = (0..=n).map(|k| T::from_count(k) / T::from_count(n)).collect();
    let vals: Vec<T> = grid
        .par_iter()
        .map(|&p| corner_value(strategy, p, q_hdv, q_crv, net))
        .collect::<Result<_>>()?;
    let lo = vals.iter().copied().fold(T::infinity(), T::min);
    let hi = vals.iter().copied().fold(T::neg_infinity(), T::max);
    let tol = T::lit(1e-9) * (T::one() + lo.abs());
    if hi - lo <= tol {
        return Ok(CornerOptimum {
            p_star: T::lit(0.5),
            objective: vals[n / 2],
            optima: Vec::new(),
            degenerate: true,
        });
    }
    let f = |p: T| corner_value(strategy, p, q_hdv, q_crv, net);
    let mut found: Vec<(T, T)> = Vec::new();
    let step = T::one() / T::from_count(n);
    for k in 0..=n {
        let local = (k == 0 || vals[k] <= vals[k - 1]) && (k == n || vals[k] <= vals[k + 1]);
        if !local || vals[k] > lo + T::lit(1e-6) * (T::one() + lo.abs()) {
            continue;
        }
        let a = (grid[k] - step).max(T::zero());
        let b = (grid[k] + step).min(T::one());
        let (mut p, mut v) = golden(a, b, T::lit(1e-6) * T::lit(1e-2), &f)?;
        if vals[k] < v {
            (p, v) = (grid[k], vals[k]);
        }
        found.push((p, v));
    }
    let best = found.iter().map(|x| x.1).fold(T::infinity(), T::min);
    let keep = T::lit(1e-9) * (T::one() + best.abs());
    let mut optima: Vec<T> = Vec::new();
    for (p, v) in found {
        if v <= best + keep && optima.iter().all(|&q| (q - p).abs() > T::lit(1e-4)) {
            optima.push(p);
        }
    }
    optima.sort_by(|a, b| a.partial_cmp(b).expect("finite probabilities"));
    Ok(CornerOptimum {
        p_star: optima[0],
        objective: best,
        optima,
        degenerate: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CornerSupportReport<T> {
    /// `min` over mixtures of (corner value − mixture value).
    pub worst_margin: T,
    /// `(α₁, α₂, w)` attaining the worst margin.
    pub worst_mixture: (T, T, T),
    pub checked: usize,
}

/// Expected HDV time of the corner mixture with `p = ᾱ` minus that of the
/// mixture, for every two-point mixture on a grid of the given resolution.
pub fn corner_margin<T: Real>(mix: &GeneralMixture<T>, q_hdv: T, q_crv: T, net: &Network<T>) -> Result<T> {
    let h = induced_ue(mix, q_hdv, q_crv, net)?;
    let v = expected_hdv_time(mix, &h, q_crv, net)?;
    let corner = MixedCornerStrategy { p: mix.mean_alpha() }.mixture();
    let hc = induced_ue(&corner, q_hdv, q_crv, net)?;
    Ok(expected_hdv_time(&corner, &hc, q_crv, net)? - v)
}

pub fn verify_corner_support<T: Real>(
    net: &Network<T>,
    q_hdv: T,
    q_crv: T,
    resolution: T,
) -> Result<CornerSupportReport<T>> {
    check_two_routes(net)?;
    if !(resolution > T::zero() && resolution <= T::one()) {
        return Err(Error::InvalidConfig(format!(
            "grid resolution {resolution} outside (0, 1]"
        )));
    }
    let m = (T::one() / resolution).round().to_usize().unwrap_or(1).max(1);
    let axis: Vec<T> = (0..=m).map(|k| T::from_count(k) / T::from_count(m)).collect();
    let mut cells: Vec<(T, T, T)> = Vec::with_capacity(axis.len().pow(3));
    for &a1 in &axis {
        for &a2 in &axis {
            for &w in &axis {
                cells.push((a1, a2, w));
            }
        }
    }
    let margins: Vec<T> = cells
        .par_iter()
        .map(|&(a1, a2, w)| {
            let mix = GeneralMixture {
                support: vec![(a1, w), (a2, T::one() - w)],
            };
            corner_margin(&mix, q_hdv, q_crv, net)
        })
        .collect::<Result<_>>()?;
    let (k, &worst) = margins
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite margins"))
        .expect("grid is nonempty");
    Ok(CornerSupportReport {
        worst_margin: worst,
        worst_mixture: cells[k],
        checked: cells.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig<T> {
    pub simulation: SimulationConfig<T>,
    /// Days discarded before averaging; `days / 4` when `None`.
    pub burn_in: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingComparison<T> {
    pub stackelberg: CornerOptimum<T>,
    pub stackelberg_hdv_time: T,
    pub myopic_objective: T,
    pub myopic_hdv_time: T,
    pub nash_exists: bool,
    /// Fleet corners (1 = `(q^CRV, 0)`) visited by alternating pure best
    /// responses from `(q^CRV, 0)`, up to the first repeat.
    pub best_response_cycle: Vec<usize>,
    pub cycle_period: usize,
    /// Empty fleet: both routings reduce to HDV equilibration.
    pub trivial: bool,
}

pub fn compare_routings<T: Real>(net: &Network<T>, cfg: &CompareConfig<T>) -> Result<RoutingComparison<T>> {
    check_two_routes(net)?;
    let unit = &net.units()[0];
    let (q_hdv, q_crv) = (unit.q_hdv, unit.q_crv);
    let strategy = cfg.simulation.strategy;
    let stackelberg = optimize_corner_mixture(&strategy, net, q_hdv, q_crv)?;
    let mix = MixedCornerStrategy { p: stackelberg.p_star }.mixture();
    let h = induced_ue(&mix, q_hdv, q_crv, net)?;
    let stackelberg_hdv_time = expected_hdv_time(&mix, &h, q_crv, net)?;

    let half = q_hdv * T::lit(0.5);
    let days = simulate(&cfg.simulation, &[half, q_hdv - half], net)?;
    let burn = cfg.burn_in.unwrap_or(cfg.simulation.days / 4).min(days.len() - 1);
    let tail = &days[burn..];
    let count = T::from_count(tail.len());
    let mut objective = T::zero();
    for d in tail {
        objective += eval_objective(&strategy, &d.h, &d.f, net)?;
    }
    let myopic_hdv_time = tail.iter().map(|d| d.t_hdv).sum::<T>() / count;

    // pure best responses over fleet corners; HDVs play their equilibrium
    let respond = |corner: usize| -> Result<usize> {
        let alpha = if corner == 1 { T::one() } else { T::zero() };
        let h = induced_ue(&GeneralMixture::pure(alpha), q_hdv, q_crv, net)?;
        let v1 = eval_objective(&strategy, &h, &fleet_point(T::one(), q_crv), net)?;
        let v0 = eval_objective(&strategy, &h, &fleet_point(T::zero(), q_crv), net)?;
        Ok(if v1 < v0 || (v1 == v0 && corner == 1) { 1 } else { 0 })
    };
    let nash_exists = respond(0)? == 0 || respond(1)? == 1;
    let mut cycle = vec![1usize];
    let cycle_period = loop {
        let next = respond(*cycle.last().expect("nonempty"))?;
        if let Some(i) = cycle.iter().position(|&c| c == next) {
            break cycle.len() - i;
        }
        cycle.push(next);
    };

    Ok(RoutingComparison {
        stackelberg,
        stackelberg_hdv_time,
        myopic_objective: objective / count,
        myopic_hdv_time,
        nash_exists,
        best_response_cycle: cycle,
        cycle_period,
        trivial: q_crv == T::zero(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn induced_ue_examples() {
        let net = scenarios::symmetric_pair::<f64>(50.0, 50.0);
        let half = MixedCornerStrategy::new(0.5).unwrap().mixture();
        assert_eq!(induced_ue(&half, 50.0, 50.0, &net).unwrap(), [25.0, 25.0]);
        let one = MixedCornerStrategy::new(1.0).unwrap().mixture();
        assert_eq!(induced_ue(&one, 50.0, 50.0, &net).unwrap(), [0.0, 50.0]);
        assert_eq!(
            induced_ue(&GeneralMixture::pure(0.3), 50.0, 0.0, &net).unwrap(),
            [25.0, 25.0]
        );
    }

    #[test]
    fn malicious_optimum_is_half() {
        let net = scenarios::symmetric_pair::<f64>(50.0, 50.0);
        let opt = optimize_corner_mixture(&FleetStrategy::malicious(), &net, 50.0, 50.0).unwrap();
        assert!(!opt.degenerate);
        for p in &opt.optima {
            assert!(opt.optima.iter().any(|q| (q - (1.0 - p)).abs() < 1e-4));
        }
        assert!((opt.p_star - 0.5).abs() < 1e-4, "{:?}", opt);
        let empty = optimize_corner_mixture(&FleetStrategy::malicious(), &net, 50.0, 0.0).unwrap();
        assert!(empty.degenerate);
    }

    #[test]
    fn pure_interior_is_dominated() {
        let net = scenarios::symmetric_pair::<f64>(50.0, 50.0);
        let m = corner_margin(&GeneralMixture::pure(0.5), 50.0, 50.0, &net).unwrap();
        assert!(m > 1.0);
        let c = corner_margin(&MixedCornerStrategy::new(0.3).unwrap().mixture(), 50.0, 50.0, &net).unwrap();
        assert_eq!(c, 0.0);
    }
}

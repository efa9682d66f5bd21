//! Day-to-day dynamics: HDVs adapt gradually to yesterday's travel
//! times while the fleet best-responds to the HDV flow of the day.

use crate::error::{Error, Result};
use crate::forward::{fleet_assign, ForwardConfig};
use crate::network::Network;
use crate::objective::FleetStrategy;
use crate::scalar::{add, dot, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HdvModel<T> {
    /// Each unit's demand moves to its fastest routes (ties split equally).
    BestResponse,
    /// Shares `∝ exp(−θ t_r)` within each unit.
    Logit { theta: T },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig<T> {
    pub days: usize,
    /// Fraction of HDVs that re-route each day.
    pub mu: T,
    pub model: HdvModel<T>,
    pub seed: u64,
    pub strategy: FleetStrategy<T>,
    pub forward: ForwardConfig<T>,
}

impl<T: Real> SimulationConfig<T> {
    pub fn new(strategy: FleetStrategy<T>, days: usize) -> Self {
        Self {
            days,
            mu: T::lit(0.2),
            model: HdvModel::BestResponse,
            seed: 0,
            strategy,
            forward: ForwardConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.days == 0 {
            return Err(Error::InvalidConfig("days must be at least 1".into()));
        }
        if !(self.mu >= T::zero() && self.mu <= T::one()) {
            return Err(Error::InvalidConfig(format!("mu = {} outside [0, 1]", self.mu)));
        }
        if let HdvModel::Logit { theta } = self.model {
            if !(theta > T::zero()) || !theta.is_finite() {
                return Err(Error::InvalidConfig(format!("logit scale {theta} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DayState<T> {
    pub day: usize,
    pub h: Vec<T>,
    pub f: Vec<T>,
    /// `h · t(h + f)`
    pub t_hdv: T,
    /// `f · t(h + f)`
    pub t_crv: T,
    pub times: Vec<T>,
}

/// Next day's HDV flow from the previous day's flow and realised times.
pub fn hdv_day_update<T: Real>(cfg: &SimulationConfig<T>, prev: &DayState<T>, net: &Network<T>) -> Vec<T> {
    let mut target = vec![T::zero(); net.n_routes()];
    for u in net.units() {
        let demand: T = u.routes.iter().map(|&r| prev.h[r]).sum();
        let t_min = u.routes.iter().map(|&r| prev.times[r]).fold(T::infinity(), T::min);
        match cfg.model {
            HdvModel::BestResponse => {
                let tol = T::lit(1e-12) * (T::one() + t_min.abs());
                let best: Vec<usize> = u
                    .routes
                    .iter()
                    .copied()
                    .filter(|&r| prev.times[r] <= t_min + tol)
                    .collect();
                let share = demand / T::from_count(best.len());
                for r in best {
                    target[r] = share;
                }
            }
            HdvModel::Logit { theta } => {
                // shifted by the minimum so the largest weight is 1
                let w: Vec<T> = u
                    .routes
                    .iter()
                    .map(|&r| (-theta * (prev.times[r] - t_min)).exp())
                    .collect();
                let total: T = w.iter().copied().sum();
                for (&r, wi) in u.routes.iter().zip(w) {
                    target[r] = demand * wi / total;
                }
            }
        }
    }
    prev.h
        .iter()
        .zip(target)
        .map(|(&h, b)| (T::one() - cfg.mu) * h + cfg.mu * b)
        .collect()
}

/// Runs `cfg.days` days from `h0`; the fleet knows each day's HDV flow.
pub fn simulate<T: Real>(cfg: &SimulationConfig<T>, h0: &[T], net: &Network<T>) -> Result<Vec<DayState<T>>> {
    cfg.validate()?;
    crate::inverse::check_observed(h0, net.n_routes())?;
    let fwd = ForwardConfig {
        seed: cfg.seed,
        ..cfg.forward
    };
    let mut out = Vec::with_capacity(cfg.days);
    let mut h = h0.to_vec();
    for day in 0..cfg.days {
        let f = fleet_assign(&cfg.strategy, &h, net, &fwd)?.f;
        let times = net.route_times(&add(&h, &f))?;
        let state = DayState {
            day,
            t_hdv: dot(&h, &times),
            t_crv: dot(&f, &times),
            h,
            f,
            times,
        };
        h = hdv_day_update(cfg, &state, net);
        out.push(state);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    fn state(h: Vec<f64>, times: Vec<f64>) -> DayState<f64> {
        DayState {
            day: 0,
            f: vec![0.0; h.len()],
            h,
            t_hdv: 0.0,
            t_crv: 0.0,
            times,
        }
    }

    #[test]
    fn update_rules() {
        let net = scenarios::symmetric_pair::<f64>(50.0, 0.0);
        let mut cfg = SimulationConfig::new(FleetStrategy::selfish(), 1);
        cfg.mu = 0.0;
        assert_eq!(
            hdv_day_update(&cfg, &state(vec![30.0, 20.0], vec![10.0, 5.0]), &net),
            vec![30.0, 20.0]
        );
        cfg.mu = 1.0;
        assert_eq!(
            hdv_day_update(&cfg, &state(vec![30.0, 20.0], vec![10.0, 5.0]), &net),
            vec![0.0, 50.0]
        );
        cfg.mu = 0.5;
        assert_eq!(
            hdv_day_update(&cfg, &state(vec![30.0, 20.0], vec![10.0, 5.0]), &net),
            vec![15.0, 35.0]
        );
        cfg.mu = 1.0;
        assert_eq!(
            hdv_day_update(&cfg, &state(vec![30.0, 20.0], vec![7.0, 7.0]), &net),
            vec![25.0, 25.0]
        );
        cfg.model = HdvModel::Logit { theta: 1.0 };
        let l = hdv_day_update(&cfg, &state(vec![30.0, 20.0], vec![7.0, 7.0 + 2f64.ln()]), &net);
        assert!((l[0] - 100.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn malicious_alternates() {
        let net = scenarios::symmetric_pair::<f64>(50.0, 50.0);
        let cfg = SimulationConfig::new(FleetStrategy::malicious(), 40);
        let days = simulate(&cfg, &[30.0, 20.0], &net).unwrap();
        assert_eq!(days[0].f, vec![50.0, 0.0]);
        let switches = days.windows(2).filter(|w| w[0].f != w[1].f).count();
        assert!(switches >= 5);
        for d in &days {
            assert!((d.h.iter().sum::<f64>() - 50.0).abs() < 1e-9);
            let q = add(&d.h, &d.f);
            assert!((d.t_hdv + d.t_crv - dot(&q, &d.times)).abs() <= 1e-10 * dot(&q, &d.times));
        }
    }

    #[test]
    fn rejects_bad_config() {
        let net = scenarios::symmetric_pair::<f64>(50.0, 0.0);
        let mut cfg = SimulationConfig::new(FleetStrategy::selfish(), 5);
        cfg.mu = 1.5;
        assert!(matches!(
            simulate(&cfg, &[25.0, 25.0], &net),
            Err(Error::InvalidConfig(_))
        ));
    }
}

//! Network topology, delay evaluation and the gradient certificates that
//! gate invertibility.

mod delay;

use std::collections::HashMap;
use std::ops::Deref;

pub use delay::DelayFunction;

use crate::error::{check_len, Error, Result};
use crate::linalg::{null_space, sym_eigen, Mat};
use crate::scalar::Real;

macro_rules! flow_vector {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name<T>(Vec<T>);

        impl<T: Real> $name<T> {
            /// Wraps `values`, rejecting negative or non-finite entries.
            pub fn new(values: Vec<T>) -> Result<Self> {
                for (index, &v) in values.iter().enumerate() {
                    if !(v >= T::zero()) || !v.is_finite() {
                        return Err(Error::NegativeFlow { index, value: v.as_f64() });
                    }
                }
                Ok(Self(values))
            }

            pub fn zeros(n: usize) -> Self {
                Self(vec![T::zero(); n])
            }

            pub fn total(&self) -> T {
                self.0.iter().copied().sum()
            }

            pub fn into_inner(self) -> Vec<T> {
                self.0
            }
        }

        impl<T> Deref for $name<T> {
            type Target = [T];
            fn deref(&self) -> &[T] {
                &self.0
            }
        }

        impl<T> AsRef<[T]> for $name<T> {
            fn as_ref(&self) -> &[T] {
                &self.0
            }
        }
    };
}

flow_vector!(
    /// Non-negative flow per route.
    RouteFlow
);
flow_vector!(
    /// Non-negative flow per link.
    LinkFlow
);

#[derive(Debug, Clone, PartialEq)]
pub struct Link<T> {
    pub id: String,
    pub delay: DelayFunction<T>,
    pub from: Option<String>,
    pub to: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Route {
    pub id: String,
    /// Indices into the network's link list, in travel order.
    pub links: Vec<usize>,
}

/// A unit of traffic: one OD pair, its HDV demand, fleet size and the
/// routes it may use.
#[derive(Debug, Clone, PartialEq)]
pub struct OdUnit<T> {
    pub origin: String,
    pub destination: String,
    pub q_hdv: T,
    pub q_crv: T,
    pub routes: Vec<usize>,
}

/// Numerical tolerances carried by a network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Numerics<T> {
    /// Singular values below `rank_rel · σ_max` count as zero.
    pub rank_rel: T,
    /// Eigenvalues must exceed `pd_rel · trace / R` to count as positive.
    pub pd_rel: T,
    pub fd_abs: T,
    pub fd_rel: T,
}

impl<T: Real> Default for Numerics<T> {
    fn default() -> Self {
        // f32 cannot resolve a 1e-6 central difference, fall back to ∛ε there
        let fd = if T::epsilon() > T::lit(1e-10) {
            T::epsilon().cbrt()
        } else {
            T::lit(1e-6)
        };
        Self {
            rank_rel: T::lit(1e-9).max(T::epsilon() * T::lit(64.0)),
            pd_rel: T::lit(1e-9).max(T::epsilon() * T::lit(64.0)),
            fd_abs: fd,
            fd_rel: fd,
        }
    }
}

/// Result of the route independence test.
#[derive(Debug, Clone, PartialEq)]
pub struct Independence<T> {
    pub independent: bool,
    /// Orthonormal basis of `{v : Iᵀ v = 0}`; empty when independent.
    pub null_basis: Vec<Vec<T>>,
}

/// Positive-definiteness of `sym ∇t` on feasible directions.
#[derive(Debug, Clone, PartialEq)]
pub struct PdCertificate<T> {
    pub passes: bool,
    /// Minimum of `gᵀ ∇t g` over feasible `g` with `‖g‖² = 2`, i.e. scaled
    /// like a single unit transfer `e_i − e_j`. `+∞` when no direction exists.
    pub min_rayleigh: T,
    /// Same minimum over unit-norm directions.
    pub min_eigenvalue: T,
    pub threshold: T,
    /// Minimising direction, scaled like `min_rayleigh`.
    pub direction: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    links: Vec<Link<T>>,
    routes: Vec<Route>,
    units: Vec<OdUnit<T>>,
    incidence: Mat<T>,
    route_delays: Option<Vec<DelayFunction<T>>>,
    unit_of_route: Vec<usize>,
    numerics: Numerics<T>,
}

impl<T: Real> Network<T> {
    pub fn builder() -> NetworkBuilder<T> {
        NetworkBuilder::default()
    }

    pub fn links(&self) -> &[Link<T>] {
        &self.links
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn units(&self) -> &[OdUnit<T>] {
        &self.units
    }

    pub fn n_links(&self) -> usize {
        self.links.len()
    }

    pub fn n_routes(&self) -> usize {
        self.routes.len()
    }

    /// R×A link-route incidence matrix.
    pub fn incidence(&self) -> &Mat<T> {
        &self.incidence
    }

    pub fn route_delays(&self) -> Option<&[DelayFunction<T>]> {
        self.route_delays.as_deref()
    }

    pub fn numerics(&self) -> &Numerics<T> {
        &self.numerics
    }

    pub fn unit_of_route(&self, r: usize) -> usize {
        self.unit_of_route[r]
    }

    /// Route travel times are sums of link delays.
    pub fn is_link_additive(&self) -> bool {
        self.route_delays.is_none()
    }

    /// Link-additive and every link delay depends on its own flow only.
    pub fn has_independent_links(&self) -> bool {
        self.is_link_additive() && self.links.iter().all(|l| !l.delay.is_cross_dependent())
    }

    pub fn crv_sizes(&self) -> Vec<T> {
        self.units.iter().map(|u| u.q_crv).collect()
    }

    pub fn hdv_demands(&self) -> Vec<T> {
        self.units.iter().map(|u| u.q_hdv).collect()
    }

    /// Copy of the network with new fleet sizes per unit.
    pub fn with_crv_sizes(&self, sizes: &[T]) -> Result<Self> {
        check_len(self.units.len(), sizes.len())?;
        let mut n = self.clone();
        for (i, (u, &s)) in n.units.iter_mut().zip(sizes).enumerate() {
            if !(s >= T::zero()) || !s.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "unit {i}: fleet size must be non-negative"
                )));
            }
            u.q_crv = s;
        }
        Ok(n)
    }

    /// Copy of the network with new HDV demands per unit.
    pub fn with_hdv_demands(&self, demands: &[T]) -> Result<Self> {
        check_len(self.units.len(), demands.len())?;
        let mut n = self.clone();
        for (i, (u, &s)) in n.units.iter_mut().zip(demands).enumerate() {
            if !(s >= T::zero()) || !s.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "unit {i}: HDV demand must be non-negative"
                )));
            }
            u.q_hdv = s;
        }
        Ok(n)
    }

    pub fn with_numerics(mut self, numerics: Numerics<T>) -> Self {
        self.numerics = numerics;
        self
    }

    /// Per-unit sums of a route vector.
    pub fn unit_totals(&self, v: &[T]) -> Vec<T> {
        self.units
            .iter()
            .map(|u| u.routes.iter().map(|&r| v[r]).sum())
            .collect()
    }

    fn check_route_vector(&self, q: &[T]) -> Result<()> {
        check_len(self.n_routes(), q.len())?;
        for (index, &v) in q.iter().enumerate() {
            if !(v >= T::zero()) {
                return Err(Error::NegativeFlow {
                    index,
                    value: v.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// `Iᵀ v` without sign checks, for directions and differences.
    pub fn apply_lambda(&self, v: &[T]) -> Vec<T> {
        self.incidence.tr_matvec(v)
    }

    /// Route-flow to link-flow conversion `Λq = Iᵀq`.
    pub fn route_to_link(&self, q: &[T]) -> Result<LinkFlow<T>> {
        self.check_route_vector(q)?;
        Ok(LinkFlow(self.apply_lambda(q)))
    }

    /// Link delays `τ(a)`.
    pub fn link_times(&self, a: &[T]) -> Result<Vec<T>> {
        check_len(self.n_links(), a.len())?;
        self.links
            .iter()
            .enumerate()
            .map(|(i, l)| l.delay.eval(&l.id, a[i], a))
            .collect()
    }

    /// Link delay Jacobian `∂τ_α/∂a_β`.
    pub fn link_jacobian(&self, a: &[T]) -> Result<Mat<T>> {
        check_len(self.n_links(), a.len())?;
        let n = self.n_links();
        let mut j = Mat::zeros(n, n);
        for (i, l) in self.links.iter().enumerate() {
            j[(i, i)] = l.delay.derivative(&l.id, a[i])?;
            for &(k, d) in l.delay.cross_slopes() {
                j[(i, k)] += d;
            }
        }
        Ok(j)
    }

    /// Route travel times `t(q)`.
    pub fn route_times(&self, q: &[T]) -> Result<Vec<T>> {
        self.check_route_vector(q)?;
        self.route_times_unchecked(q)
    }

    fn route_times_unchecked(&self, q: &[T]) -> Result<Vec<T>> {
        match &self.route_delays {
            Some(fs) => fs
                .iter()
                .enumerate()
                .map(|(r, f)| f.eval(&self.routes[r].id, q[r], q))
                .collect(),
            None => {
                let a = self.apply_lambda(q);
                let tau = self.link_times(&a)?;
                Ok(self.incidence.matvec(&tau))
            }
        }
    }

    fn fd_step(&self, x: T) -> T {
        self.numerics.fd_abs.max(self.numerics.fd_rel * x.abs())
    }

    /// Jacobian `∇t(q)` with rows indexed by route time and columns by
    /// route flow.
    pub fn route_gradient(&self, q: &[T]) -> Result<Mat<T>> {
        self.check_route_vector(q)?;
        if self.route_delays.is_some() {
            return self.route_gradient_fd(q);
        }
        let a = self.apply_lambda(q);
        let j = self.link_jacobian(&a)?;
        Ok(self.incidence.matmul(&j).matmul(&self.incidence.transpose()))
    }

    fn route_gradient_fd(&self, q: &[T]) -> Result<Mat<T>> {
        let n = self.n_routes();
        let mut g = Mat::zeros(n, n);
        let mut x = q.to_vec();
        for s in 0..n {
            let h = self.fd_step(q[s]);
            let (lo, hi) = if q[s] >= h {
                (q[s] - h, q[s] + h)
            } else {
                (q[s], q[s] + h)
            };
            x[s] = hi;
            let up = self.route_times_unchecked(&x)?;
            x[s] = lo;
            let down = self.route_times_unchecked(&x)?;
            x[s] = q[s];
            for r in 0..n {
                g[(r, s)] = (up[r] - down[r]) / (hi - lo);
            }
        }
        Ok(g)
    }

    /// Second derivatives: element `r` is the Hessian of `t_r` in `q`.
    pub fn route_hessians(&self, q: &[T]) -> Result<Vec<Mat<T>>> {
        self.check_route_vector(q)?;
        let n = self.n_routes();
        match &self.route_delays {
            Some(fs) => fs
                .iter()
                .enumerate()
                .map(|(r, f)| {
                    let mut h = Mat::zeros(n, n);
                    h[(r, r)] = f.second_derivative(&self.routes[r].id, q[r])?;
                    Ok(h)
                })
                .collect(),
            None => {
                let a = self.apply_lambda(q);
                let d2: Vec<T> = self
                    .links
                    .iter()
                    .enumerate()
                    .map(|(i, l)| l.delay.second_derivative(&l.id, a[i]))
                    .collect::<Result<_>>()?;
                let mut out = vec![Mat::zeros(n, n); n];
                for (alpha, &c) in d2.iter().enumerate() {
                    if c == T::zero() {
                        continue;
                    }
                    let users: Vec<usize> = (0..n).filter(|&r| self.incidence[(r, alpha)] != T::zero()).collect();
                    for &r in &users {
                        for &s in &users {
                            for &u in &users {
                                out[r][(s, u)] += c;
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Rank test of the incidence matrix.
    pub fn routes_linearly_independent(&self) -> Independence<T> {
        let basis = null_space(&self.incidence.transpose(), self.numerics.rank_rel);
        Independence {
            independent: basis.is_empty(),
            null_basis: basis,
        }
    }

    /// Orthonormal basis of the feasible directions: per-unit zero-sum
    /// vectors supported on the unit's routes.
    pub fn feasible_direction_basis(&self) -> Vec<Vec<T>> {
        let n = self.n_routes();
        let mut basis = Vec::new();
        for u in &self.units {
            for j in 1..u.routes.len() {
                let jj = T::from_count(j);
                let norm = (jj * (jj + T::one())).sqrt();
                let mut v = vec![T::zero(); n];
                for &r in &u.routes[..j] {
                    v[r] = T::one() / norm;
                }
                v[u.routes[j]] = -jj / norm;
                basis.push(v);
            }
        }
        basis
    }

    /// Positive definiteness of `sym ∇t(q)` on feasible directions.
    pub fn feasible_direction_pd(&self, q: &[T]) -> Result<PdCertificate<T>> {
        let g = self.route_gradient(q)?;
        Ok(self.pd_on_feasible(&g))
    }

    pub(crate) fn pd_on_feasible(&self, grad: &Mat<T>) -> PdCertificate<T> {
        let s = grad.sym();
        let n = self.n_routes();
        let threshold = self.numerics.pd_rel * s.trace().abs() / T::from_count(n.max(1));
        let basis = self.feasible_direction_basis();
        if basis.is_empty() {
            return PdCertificate {
                passes: true,
                min_rayleigh: T::infinity(),
                min_eigenvalue: T::infinity(),
                threshold,
                direction: None,
            };
        }
        let b = Mat::from_columns(&basis, n);
        let reduced = b.transpose().matmul(&s).matmul(&b);
        let eig = sym_eigen(&reduced);
        let lam = eig.values[0];
        let dir = b.matvec(&eig.vectors.column(0));
        let two = T::lit(2.0);
        let dir = crate::linalg::canonical_sign(dir.into_iter().map(|x| x * two.sqrt()).collect());
        PdCertificate {
            passes: lam > threshold,
            min_rayleigh: two * lam,
            min_eigenvalue: lam,
            threshold,
            direction: Some(dir),
        }
    }
}

/// Incremental, id-based construction of a [`Network`].
#[derive(Debug, Clone)]
pub struct NetworkBuilder<T> {
    links: Vec<Link<T>>,
    routes: Vec<(String, Vec<String>)>,
    units: Vec<(String, String, T, T, Vec<String>)>,
    route_delays: Option<Vec<DelayFunction<T>>>,
    numerics: Option<Numerics<T>>,
}

impl<T> Default for NetworkBuilder<T> {
    fn default() -> Self {
        Self {
            links: Vec::new(),
            routes: Vec::new(),
            units: Vec::new(),
            route_delays: None,
            numerics: None,
        }
    }
}

impl<T: Real> NetworkBuilder<T> {
    pub fn link(mut self, id: impl Into<String>, delay: DelayFunction<T>) -> Self {
        self.links.push(Link {
            id: id.into(),
            delay,
            from: None,
            to: None,
        });
        self
    }

    pub fn link_between(
        mut self,
        id: impl Into<String>,
        from: impl Into<String>,
        to: impl Into<String>,
        delay: DelayFunction<T>,
    ) -> Self {
        self.links.push(Link {
            id: id.into(),
            delay,
            from: Some(from.into()),
            to: Some(to.into()),
        });
        self
    }

    pub fn push_link(mut self, link: Link<T>) -> Self {
        self.links.push(link);
        self
    }

    pub fn route(mut self, id: impl Into<String>, links: &[&str]) -> Self {
        self.routes
            .push((id.into(), links.iter().map(|s| s.to_string()).collect()));
        self
    }

    pub fn route_owned(mut self, id: String, links: Vec<String>) -> Self {
        self.routes.push((id, links));
        self
    }

    pub fn unit(
        mut self,
        origin: impl Into<String>,
        destination: impl Into<String>,
        q_hdv: T,
        q_crv: T,
        routes: &[&str],
    ) -> Self {
        self.units.push((
            origin.into(),
            destination.into(),
            q_hdv,
            q_crv,
            routes.iter().map(|s| s.to_string()).collect(),
        ));
        self
    }

    pub fn unit_owned(mut self, origin: String, destination: String, q_hdv: T, q_crv: T, routes: Vec<String>) -> Self {
        self.units.push((origin, destination, q_hdv, q_crv, routes));
        self
    }

    /// Route-level delays replacing link additivity; cross terms index routes.
    pub fn route_delays(mut self, delays: Vec<DelayFunction<T>>) -> Self {
        self.route_delays = Some(delays);
        self
    }

    pub fn numerics(mut self, numerics: Numerics<T>) -> Self {
        self.numerics = Some(numerics);
        self
    }

    pub fn build(self) -> Result<Network<T>> {
        let invalid = |m: String| Err(Error::InvalidNetwork(m));
        if self.links.is_empty() {
            return invalid("network has no links".into());
        }
        if self.routes.is_empty() {
            return invalid("network has no routes".into());
        }
        let mut link_index = HashMap::new();
        for (i, l) in self.links.iter().enumerate() {
            if link_index.insert(l.id.clone(), i).is_some() {
                return invalid(format!("duplicate link id `{}`", l.id));
            }
        }
        let a = self.links.len();
        for (i, l) in self.links.iter().enumerate() {
            l.delay.validate(&l.id, i, a)?;
        }

        let mut route_index = HashMap::new();
        let mut routes = Vec::with_capacity(self.routes.len());
        for (i, (id, ids)) in self.routes.iter().enumerate() {
            if route_index.insert(id.clone(), i).is_some() {
                return invalid(format!("duplicate route id `{id}`"));
            }
            if ids.is_empty() {
                return invalid(format!("route `{id}` is empty"));
            }
            let mut links = Vec::with_capacity(ids.len());
            for lid in ids {
                match link_index.get(lid) {
                    Some(&k) if links.contains(&k) => return invalid(format!("route `{id}` uses link `{lid}` twice")),
                    Some(&k) => links.push(k),
                    None => return invalid(format!("route `{id}` references unknown link `{lid}`")),
                }
            }
            routes.push(Route { id: id.clone(), links });
        }
        let r = routes.len();

        if self.units.is_empty() {
            return invalid("network has no OD units".into());
        }
        let mut unit_of_route = vec![usize::MAX; r];
        let mut units = Vec::with_capacity(self.units.len());
        for (s, (o, d, q_hdv, q_crv, ids)) in self.units.into_iter().enumerate() {
            for (name, v) in [("q_hdv", q_hdv), ("q_crv", q_crv)] {
                if !(v >= T::zero()) || !v.is_finite() {
                    return invalid(format!("unit {s}: {name} must be finite and non-negative"));
                }
            }
            if ids.is_empty() {
                return invalid(format!("unit {s} has no routes"));
            }
            let mut idx = Vec::with_capacity(ids.len());
            for rid in &ids {
                let Some(&k) = route_index.get(rid) else {
                    return invalid(format!("unit {s} references unknown route `{rid}`"));
                };
                if unit_of_route[k] != usize::MAX {
                    return invalid(format!("route `{rid}` belongs to more than one unit"));
                }
                unit_of_route[k] = s;
                idx.push(k);
            }
            for &k in &idx {
                check_path(&self.links, &routes[k], &o, &d)?;
            }
            units.push(OdUnit {
                origin: o,
                destination: d,
                q_hdv,
                q_crv,
                routes: idx,
            });
        }
        if let Some(k) = unit_of_route.iter().position(|&u| u == usize::MAX) {
            return invalid(format!("route `{}` belongs to no unit", routes[k].id));
        }

        if let Some(fs) = &self.route_delays {
            if fs.len() != r {
                return invalid(format!("{} route delays given for {} routes", fs.len(), r));
            }
            for (i, f) in fs.iter().enumerate() {
                f.validate(&routes[i].id, i, r)?;
            }
        }

        let mut incidence = Mat::zeros(r, a);
        for (i, route) in routes.iter().enumerate() {
            for &l in &route.links {
                incidence[(i, l)] = T::one();
            }
        }
        Ok(Network {
            links: self.links,
            routes,
            units,
            incidence,
            route_delays: self.route_delays,
            unit_of_route,
            numerics: self.numerics.unwrap_or_default(),
        })
    }
}

/// Node-level path check, applied only when every link on the route is
/// labelled with its end nodes.
fn check_path<T>(links: &[Link<T>], route: &Route, origin: &str, destination: &str) -> Result<()> {
    let labelled: Option<Vec<(&str, &str)>> = route
        .links
        .iter()
        .map(|&l| Some((links[l].from.as_deref()?, links[l].to.as_deref()?)))
        .collect();
    let Some(hops) = labelled else {
        return Ok(());
    };
    let mut at = origin;
    for (from, to) in hops {
        if from != at {
            return Err(Error::InvalidNetwork(format!(
                "route `{}` is not a path from `{origin}` to `{destination}`",
                route.id
            )));
        }
        at = to;
    }
    if at != destination {
        return Err(Error::InvalidNetwork(format!(
            "route `{}` ends at `{at}`, expected `{destination}`",
            route.id
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn fig5_link_flows() {
        let net = scenarios::two_route_shared::<f64>(DelayFunction::affine(1.0, 1.0));
        let a = net.route_to_link(&[3.0, 7.0]).unwrap();
        // links in order a, b, c, d
        assert_eq!(&*a, &[3.0, 7.0, 10.0, 10.0]);
        assert!(net.routes_linearly_independent().independent);
    }

    #[test]
    fn network8_is_dependent() {
        let net = scenarios::network8::<f64>(DelayFunction::affine(1.0, 1.0), 0.0, 0.0);
        let a = net.route_to_link(&[100.0; 4]).unwrap();
        assert_eq!(&*a, &[200.0; 4]);
        let ind = net.routes_linearly_independent();
        assert!(!ind.independent);
        assert_eq!(ind.null_basis.len(), 1);
        for (x, e) in ind.null_basis[0].iter().zip([0.5, -0.5, -0.5, 0.5]) {
            assert!((x - e).abs() < 1e-12);
        }
        let g = net.route_gradient(&[100.0; 4]).unwrap();
        for j in 0..4 {
            assert_eq!(g[(0, j)] + g[(3, j)], g[(1, j)] + g[(2, j)]);
        }
    }

    #[test]
    fn fig3_times_and_gradient() {
        let net = scenarios::fig3::<f64>(50.0);
        let t = net.route_times(&[50.0, 80.0]).unwrap();
        assert!((t[0] - 10.0).abs() < 1e-12 && (t[1] - 30.0).abs() < 1e-12);
        let g = net.route_gradient(&[50.0, 80.0]).unwrap();
        assert!((g[(0, 0)] - 0.2).abs() < 1e-12);
        assert!((g[(1, 1)] - 0.375).abs() < 1e-12);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn cross_affine_certificates() {
        let bad = scenarios::cross_dependent::<f64>(2.0, 1.0);
        let c = bad.feasible_direction_pd(&[3.0, 4.0]).unwrap();
        assert!(!c.passes);
        assert!((c.min_rayleigh + 1.0).abs() < 1e-9);
        let good = scenarios::cross_dependent::<f64>(0.5, 0.5);
        let c = good.feasible_direction_pd(&[3.0, 4.0]).unwrap();
        assert!(c.passes);
        assert!((c.min_rayleigh - 1.0).abs() < 1e-9);
        let g = good.route_gradient(&[3.0, 4.0]).unwrap();
        assert!((g[(0, 1)] - 0.5 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_route_units_pass_vacuously() {
        let net = Network::<f64>::builder()
            .link("a", DelayFunction::affine(1.0, 1.0))
            .route("r", &["a"])
            .unit("o", "d", 1.0, 1.0, &["r"])
            .build()
            .unwrap();
        let c = net.feasible_direction_pd(&[2.0]).unwrap();
        assert!(c.passes && c.min_rayleigh.is_infinite());
        assert!(net.routes_linearly_independent().independent);
        assert_eq!(net.route_times(&[5.0]).unwrap(), vec![6.0]);
    }

    #[test]
    fn build_errors() {
        let missing = Network::<f64>::builder()
            .link("a", DelayFunction::affine(1.0, 1.0))
            .route("r", &["z"])
            .unit("o", "d", 1.0, 1.0, &["r"])
            .build();
        assert!(matches!(missing, Err(Error::InvalidNetwork(m)) if m.contains("`z`")));
        let bad_path = Network::<f64>::builder()
            .link_between("a", "o", "m", DelayFunction::affine(1.0, 1.0))
            .link_between("b", "x", "d", DelayFunction::affine(1.0, 1.0))
            .route("r", &["a", "b"])
            .unit("o", "d", 1.0, 1.0, &["r"])
            .build();
        assert!(bad_path.is_err());
        let neg = Network::<f64>::builder()
            .link("a", DelayFunction::affine(1.0, 1.0))
            .route("r", &["a"])
            .unit("o", "d", 1.0, -5.0, &["r"])
            .build();
        assert!(neg.is_err());
    }

    #[test]
    fn negative_flow_is_rejected() {
        let net = scenarios::fig3::<f64>(50.0);
        assert!(matches!(
            net.route_times(&[-1.0, 2.0]),
            Err(Error::NegativeFlow { index: 0, .. })
        ));
        assert!(matches!(net.route_times(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn route_level_delays_use_finite_differences() {
        let net = Network::<f64>::builder()
            .link("a", DelayFunction::affine(1.0, 1.0))
            .link("b", DelayFunction::affine(1.0, 1.0))
            .route("r1", &["a"])
            .route("r2", &["b"])
            .unit("o", "d", 0.0, 1.0, &["r1", "r2"])
            .route_delays(vec![
                DelayFunction::cross_affine(1.0, 1.0, vec![(1, 2.0)]),
                DelayFunction::quadratic(1.0, 0.5),
            ])
            .build()
            .unwrap();
        assert!(!net.is_link_additive());
        let g = net.route_gradient(&[2.0, 3.0]).unwrap();
        assert!((g[(0, 0)] - 1.0).abs() < 1e-8);
        assert!((g[(0, 1)] - 2.0).abs() < 1e-8);
        assert!((g[(1, 1)] - 3.0).abs() < 1e-6);
        assert!(g[(1, 0)].abs() < 1e-8);
    }
}

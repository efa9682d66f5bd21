//! Fleet feasible sets: a product of per-unit simplices with optional
//! per-route caps and optional link-flow caps, plus Euclidean projection.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{check_len, Error, Result};
use crate::linalg::Mat;
use crate::network::Network;
use crate::scalar::{dist_inf, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet<T> {
    n: usize,
    units: Vec<Vec<usize>>,
    totals: Vec<T>,
    upper: Option<Vec<T>>,
    /// `(I, a)`: route flows must satisfy `Iᵀ f ≤ a`.
    link_caps: Option<(Mat<T>, Vec<T>)>,
}

impl<T: Real> FeasibleSet<T> {
    /// `{f ≥ 0 : Σ_{r∈R_s} f_r = totals[s]}`.
    pub fn new(n: usize, units: Vec<Vec<usize>>, totals: Vec<T>) -> Result<Self> {
        check_len(units.len(), totals.len())?;
        for (s, &t) in totals.iter().enumerate() {
            if !(t >= T::zero()) || !t.is_finite() {
                return Err(Error::Infeasible(format!("unit {s} has negative total {t}")));
            }
        }
        Ok(Self {
            n,
            units,
            totals,
            upper: None,
            link_caps: None,
        })
    }

    /// The fleet set of a network: totals are the units' fleet sizes.
    pub fn fleet(net: &Network<T>) -> Self {
        Self::with_totals(net, net.crv_sizes()).expect("network fleet sizes are validated")
    }

    pub fn with_totals(net: &Network<T>, totals: Vec<T>) -> Result<Self> {
        Self::new(
            net.n_routes(),
            net.units().iter().map(|u| u.routes.clone()).collect(),
            totals,
        )
    }

    /// Adds `f ≤ upper` and checks the result is nonempty.
    pub fn with_upper(mut self, upper: Vec<T>) -> Result<Self> {
        check_len(self.n, upper.len())?;
        for (s, (u, &t)) in self.units.iter().zip(&self.totals).enumerate() {
            let cap: T = u.iter().map(|&r| upper[r].max(T::zero())).sum();
            if t > cap * (T::one() + T::epsilon() * T::lit(16.0)) {
                return Err(Error::Infeasible(format!(
                    "unit {s}: fleet size {t} exceeds the {cap} available on its routes"
                )));
            }
        }
        self.upper = Some(upper.into_iter().map(|x| x.max(T::zero())).collect());
        Ok(self)
    }

    /// Adds link caps `Iᵀ f ≤ caps`, `incidence` being R×A.
    pub fn with_link_caps(mut self, incidence: Mat<T>, caps: Vec<T>) -> Result<Self> {
        check_len(self.n, incidence.rows())?;
        check_len(incidence.cols(), caps.len())?;
        self.link_caps = Some((incidence, caps));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn units(&self) -> &[Vec<usize>] {
        &self.units
    }

    pub fn totals(&self) -> &[T] {
        &self.totals
    }

    pub fn upper(&self) -> Option<&[T]> {
        self.upper.as_deref()
    }

    pub fn has_link_caps(&self) -> bool {
        self.link_caps.is_some()
    }

    /// Membership up to `tol` on every constraint.
    pub fn contains(&self, f: &[T], tol: T) -> bool {
        if f.len() != self.n || f.iter().any(|&x| x < -tol) {
            return false;
        }
        for (u, &t) in self.units.iter().zip(&self.totals) {
            let s: T = u.iter().map(|&r| f[r]).sum();
            if (s - t).abs() > tol {
                return false;
            }
        }
        if let Some(up) = &self.upper {
            if f.iter().zip(up).any(|(&x, &u)| x > u + tol) {
                return false;
            }
        }
        if let Some((inc, caps)) = &self.link_caps {
            if inc.tr_matvec(f).iter().zip(caps).any(|(&x, &c)| x > c + tol) {
                return false;
            }
        }
        true
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        check_len(self.n, v.len())?;
        match &self.link_caps {
            None => self.project_box_simplex(v),
            Some((inc, caps)) => self.dykstra(v, inc, caps),
        }
    }

    fn project_box_simplex(&self, v: &[T]) -> Result<Vec<T>> {
        let mut out = v.to_vec();
        let mut covered = vec![false; self.n];
        for (u, &t) in self.units.iter().zip(&self.totals) {
            let sub: Vec<T> = u.iter().map(|&r| v[r]).collect();
            let p = match &self.upper {
                None => project_simplex(&sub, t),
                Some(up) => {
                    let caps: Vec<T> = u.iter().map(|&r| up[r]).collect();
                    project_capped_simplex(&sub, t, &caps)?
                }
            };
            for (&r, x) in u.iter().zip(p) {
                out[r] = x;
                covered[r] = true;
            }
        }
        // routes outside every unit are pinned to zero
        for (x, c) in out.iter_mut().zip(covered) {
            if !c {
                *x = T::zero();
            }
        }
        Ok(out)
    }

    /// Dykstra's alternating projection onto the box-simplex and each link
    /// half-space `{(Iᵀ f)_α ≤ a_α}`.
    fn dykstra(&self, v: &[T], inc: &Mat<T>, caps: &[T]) -> Result<Vec<T>> {
        let a = caps.len();
        let cols: Vec<Vec<T>> = (0..a).map(|j| inc.column(j)).collect();
        let norms: Vec<T> = cols.iter().map(|c| c.iter().map(|&x| x * x).sum()).collect();
        let mut x = v.to_vec();
        let mut incr: Vec<Vec<T>> = vec![vec![T::zero(); self.n]; a + 1];
        let scale = T::one() + v.iter().fold(T::zero(), |m, &y| m.max(y.abs()));
        let tol = T::lit(1e-13).max(T::epsilon() * T::lit(8.0)) * scale;
        for _ in 0..20_000 {
            let before = x.clone();
            // box-simplex block
            let y: Vec<T> = x.iter().zip(&incr[0]).map(|(&p, &q)| p + q).collect();
            x = self.project_box_simplex(&y)?;
            incr[0] = y.iter().zip(&x).map(|(&p, &q)| p - q).collect();
            for j in 0..a {
                if norms[j] == T::zero() {
                    continue;
                }
                let y: Vec<T> = x.iter().zip(&incr[j + 1]).map(|(&p, &q)| p + q).collect();
                let val: T = cols[j].iter().zip(&y).map(|(&c, &p)| c * p).sum();
                let excess = val - caps[j];
                x = if excess > T::zero() {
                    y.iter()
                        .zip(&cols[j])
                        .map(|(&p, &c)| p - excess / norms[j] * c)
                        .collect()
                } else {
                    y.clone()
                };
                incr[j + 1] = y.iter().zip(&x).map(|(&p, &q)| p - q).collect();
            }
            if dist_inf(&before, &x) <= tol {
                break;
            }
        }
        let x = self.project_box_simplex(&x)?;
        if !self.contains(&x, T::lit(1e-7) * scale) {
            return Err(Error::Infeasible("link caps leave no feasible fleet flow".into()));
        }
        Ok(x)
    }

    /// Number of vertices of the product of simplices (no caps).
    pub fn vertex_count(&self) -> u128 {
        self.units
            .iter()
            .zip(&self.totals)
            .map(|(u, &t)| if t == T::zero() { 1 } else { u.len() as u128 })
            .try_fold(1u128, |acc, k| acc.checked_mul(k))
            .unwrap_or(u128::MAX)
    }

    /// Enumerates vertices in lexicographic order of the chosen route per
    /// unit. Each vertex is returned with its route choice.
    pub fn vertices(&self) -> Vec<(Vec<usize>, Vec<T>)> {
        let choices: Vec<Vec<usize>> = self
            .units
            .iter()
            .zip(&self.totals)
            .map(|(u, &t)| if t == T::zero() { vec![u[0]] } else { u.clone() })
            .collect();
        let mut out = Vec::new();
        let mut idx = vec![0usize; choices.len()];
        loop {
            let pick: Vec<usize> = idx.iter().zip(&choices).map(|(&i, c)| c[i]).collect();
            let mut f = vec![T::zero(); self.n];
            for (s, &r) in pick.iter().enumerate() {
                f[r] = self.totals[s];
            }
            out.push((pick, f));
            // odometer, last unit fastest
            let mut k = choices.len();
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < choices[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    /// A Dirichlet(1, …, 1) point of each unit simplex, then projected so
    /// caps are respected.
    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<T>> {
        let mut f = vec![T::zero(); self.n];
        for (u, &t) in self.units.iter().zip(&self.totals) {
            let w: Vec<f64> = u.iter().map(|_| Exp1.sample(rng)).collect();
            let s: f64 = w.iter().sum();
            for (&r, x) in u.iter().zip(w) {
                f[r] = t * T::lit(x / s);
            }
        }
        if self.upper.is_some() || self.link_caps.is_some() {
            self.project(&f)
        } else {
            Ok(f)
        }
    }

    /// Transfer directions `e_j − e_i` within a unit that stay feasible
    /// for a small step from `f`.
    pub fn edge_directions(&self, f: &[T], tol: T) -> Vec<Vec<T>> {
        let mut out = Vec::new();
        for u in &self.units {
            for &i in u {
                if f[i] <= tol {
                    continue;
                }
                for &j in u {
                    if i == j {
                        continue;
                    }
                    if let Some(up) = &self.upper {
                        if f[j] >= up[j] - tol {
                            continue;
                        }
                    }
                    let mut d = vec![T::zero(); self.n];
                    d[i] = -T::one();
                    d[j] = T::one();
                    out.push(d);
                }
            }
        }
        out
    }
}

/// Projection onto `{x ≥ 0, Σx = total}` by sorting.
pub fn project_simplex<T: Real>(v: &[T], total: T) -> Vec<T> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("NaN in projection"));
    let mut cum = T::zero();
    let mut theta = T::zero();
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - total) / T::from_count(k + 1);
        if x - t > T::zero() {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(T::zero())).collect()
}

/// Projection onto `{0 ≤ x ≤ cap, Σx = total}` by locating the exact
/// breakpoint segment of the (piecewise linear) shift.
pub fn project_capped_simplex<T: Real>(v: &[T], total: T, cap: &[T]) -> Result<Vec<T>> {
    let room: T = cap.iter().copied().sum();
    if total < T::zero() || total > room * (T::one() + T::epsilon() * T::lit(16.0)) {
        return Err(Error::Infeasible(format!(
            "capped simplex total {total} outside [0, {room}]"
        )));
    }
    let clamp = |tau: T| -> Vec<T> {
        v.iter()
            .zip(cap)
            .map(|(&x, &c)| (x - tau).max(T::zero()).min(c))
            .collect()
    };
    let g = |tau: T| -> T { clamp(tau).into_iter().sum() };
    let mut bps: Vec<T> = v.iter().zip(cap).flat_map(|(&x, &c)| [x, x - c]).collect();
    bps.sort_by(|a, b| a.partial_cmp(b).expect("NaN in projection"));
    bps.dedup();
    // g is non-increasing in τ: g(bps[0]) = Σcap, g(bps[last]) = 0
    if total >= room {
        return Ok(clamp(bps[0]));
    }
    if total <= T::zero() {
        return Ok(vec![T::zero(); v.len()]);
    }
    let mut lo = 0;
    let mut hi = bps.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if g(bps[mid]) >= total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (t0, t1) = (bps[lo], bps[hi]);
    let (g0, g1) = (g(t0), g(t1));
    let tau = if g0 == g1 {
        t0
    } else {
        t0 + (g0 - total) / (g0 - g1) * (t1 - t0)
    };
    Ok(clamp(tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn simplex_projection_examples() {
        assert!(close(&project_simplex(&[10.0, 10.0], 20.0), &[10.0, 10.0], 1e-12));
        assert!(close(&project_simplex(&[30.0, 0.0], 20.0), &[20.0, 0.0], 1e-12));
        assert!(close(&project_simplex(&[-5.0, -5.0], 10.0), &[5.0, 5.0], 1e-12));
    }

    #[test]
    fn capped_projection_matches_grid() {
        let v = [4.0, 1.0, -2.0];
        let cap = [2.0, 3.0, 5.0];
        let p = project_capped_simplex(&v, 4.0, &cap).unwrap();
        let mut best = (f64::INFINITY, [0.0; 3]);
        let step = 0.01;
        for i in 0..=200 {
            for j in 0..=300 {
                let x = [i as f64 * step, j as f64 * step, 4.0 - (i + j) as f64 * step];
                if x[2] < -1e-12 || x[2] > 5.0 {
                    continue;
                }
                let d: f64 = x.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best.0 {
                    best = (d, x);
                }
            }
        }
        assert!(close(&p, &best.1, 0.011), "{p:?} vs {:?}", best.1);
        assert!((p.iter().sum::<f64>() - 4.0).abs() < 1e-12);
        assert!(project_capped_simplex(&v, 11.0, &cap).is_err());
    }

    #[test]
    fn vertices_are_lexicographic() {
        let set = FeasibleSet::new(5, vec![vec![0, 1], vec![2, 3, 4]], vec![2.0, 3.0]).unwrap();
        let v = set.vertices();
        assert_eq!(v.len(), 6);
        assert_eq!(set.vertex_count(), 6);
        assert_eq!(v[0].0, vec![0, 2]);
        assert_eq!(v[0].1, vec![2.0, 0.0, 3.0, 0.0, 0.0]);
        assert_eq!(v[5].0, vec![1, 4]);
    }

    #[test]
    fn link_capped_projection_is_feasible() {
        // two routes sharing nothing, cap on link of route 0
        let inc = Mat::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let set = FeasibleSet::new(2, vec![vec![0, 1]], vec![10.0])
            .unwrap()
            .with_link_caps(inc, vec![3.0, 100.0])
            .unwrap();
        let p = set.project(&[10.0, 0.0]).unwrap();
        assert!(close(&p, &[3.0, 7.0], 1e-9), "{p:?}");
    }
}

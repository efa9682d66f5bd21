//! The affine variational inequality `A(f) = c + M f` over a fleet set,
//! with extragradient iterations and exact active-set polishing.

use crate::error::Result;
use crate::feasible::FeasibleSet;
use crate::linalg::{solve_linear, Mat};
use crate::network::Network;
use crate::objective::FleetStrategy;
use crate::scalar::{dist_inf, Real};

pub(crate) struct AffineVi<T> {
    pub times: Vec<T>,
    pub grad: Mat<T>,
    c: Vec<T>,
    m: Mat<T>,
}

pub(crate) struct VisOutcome<T> {
    pub f: Vec<T>,
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Lower,
    Free,
    Upper,
}

impl<T: Real> AffineVi<T> {
    pub fn at(strategy: &FleetStrategy<T>, q: &[T], net: &Network<T>) -> Result<Self> {
        let times = net.route_times(q)?;
        let grad = net.route_gradient(q)?;
        let gt = grad.transpose();
        let base: Vec<T> = q.iter().map(|&x| strategy.lambda_hdv * x).collect();
        let c = gt
            .matvec(&base)
            .into_iter()
            .zip(&times)
            .map(|(g, &t)| g + strategy.lambda_crv * t)
            .collect();
        let m = gt.scale(strategy.gap());
        Ok(Self { times, grad, c, m })
    }

    /// Builds the operator from an explicit `c` and `M`.
    pub fn from_parts(times: Vec<T>, grad: Mat<T>, c: Vec<T>, m: Mat<T>) -> Self {
        Self { times, grad, c, m }
    }

    pub fn eval(&self, f: &[T]) -> Vec<T> {
        self.m.matvec(f).into_iter().zip(&self.c).map(|(a, &b)| a + b).collect()
    }

    fn step(&self, set: &FeasibleSet<T>, f: &[T], s: T) -> Result<Vec<T>> {
        let a = self.eval(f);
        set.project(&f.iter().zip(&a).map(|(&x, &g)| x - s * g).collect::<Vec<_>>())
    }

    /// `‖f − P_K(f − A(f))‖∞`
    pub fn natural_residual(&self, set: &FeasibleSet<T>, f: &[T]) -> Result<T> {
        Ok(dist_inf(f, &self.step(set, f, T::one())?))
    }

    pub fn extragradient(
        &self,
        set: &FeasibleSet<T>,
        start: &[T],
        step: T,
        tol: T,
        max_iter: usize,
        polish_every: usize,
    ) -> Result<VisOutcome<T>> {
        self.iterate(set, start, tol, max_iter, polish_every, |f| {
            let y = self.step(set, f, step)?;
            let a = self.eval(&y);
            set.project(&f.iter().zip(&a).map(|(&x, &g)| x - step * g).collect::<Vec<_>>())
        })
    }

    /// Plain projected steps; enough when `A` is the gradient of a convex
    /// quadratic.
    pub fn projected_descent(
        &self,
        set: &FeasibleSet<T>,
        start: &[T],
        step: T,
        tol: T,
        max_iter: usize,
        polish_every: usize,
    ) -> Result<VisOutcome<T>> {
        self.iterate(set, start, tol, max_iter, polish_every, |f| self.step(set, f, step))
    }

    fn iterate(
        &self,
        set: &FeasibleSet<T>,
        start: &[T],
        tol: T,
        max_iter: usize,
        polish_every: usize,
        mut advance: impl FnMut(&[T]) -> Result<Vec<T>>,
    ) -> Result<VisOutcome<T>> {
        let mut f = set.project(start)?;
        let mut residual = self.natural_residual(set, &f)?;
        for it in 0..max_iter {
            if residual <= tol {
                return Ok(VisOutcome {
                    f,
                    residual,
                    iterations: it,
                    converged: true,
                });
            }
            if polish_every > 0 && it % polish_every == 0 {
                if let Some((g, r)) = self.polish(set, &f)? {
                    if r <= tol {
                        return Ok(VisOutcome {
                            f: g,
                            residual: r,
                            iterations: it,
                            converged: true,
                        });
                    }
                }
            }
            f = advance(&f)?;
            residual = self.natural_residual(set, &f)?;
        }
        if let Some((g, r)) = self.polish(set, &f)? {
            if r < residual {
                f = g;
                residual = r;
            }
        }
        Ok(VisOutcome {
            converged: residual <= tol,
            f,
            residual,
            iterations: max_iter,
        })
    }

    /// Guesses the active set from one projected step and solves the
    /// resulting equality-constrained linear system exactly.
    fn polish(&self, set: &FeasibleSet<T>, f: &[T]) -> Result<Option<(Vec<T>, T)>> {
        if set.has_link_caps() {
            return Ok(None);
        }
        let p = self.step(set, f, T::one())?;
        let status: Vec<Status> = p
            .iter()
            .enumerate()
            .map(|(r, &x)| {
                if x <= T::zero() {
                    Status::Lower
                } else if set.upper().is_some_and(|u| x >= u[r]) {
                    Status::Upper
                } else {
                    Status::Free
                }
            })
            .collect();
        match self.solve_kkt(set, &status)? {
            Some(g) => {
                let r = self.natural_residual(set, &g)?;
                Ok(Some((g, r)))
            }
            None => Ok(None),
        }
    }

    fn solve_kkt(&self, set: &FeasibleSet<T>, status: &[Status]) -> Result<Option<Vec<T>>> {
        let n = set.dim();
        let mut f = vec![T::zero(); n];
        for (r, s) in status.iter().enumerate() {
            if *s == Status::Upper {
                f[r] = set.upper().map_or(T::zero(), |u| u[r]);
            }
        }
        let free: Vec<usize> = (0..n).filter(|&r| status[r] == Status::Free).collect();
        let mut slot = vec![usize::MAX; n];
        for (k, &r) in free.iter().enumerate() {
            slot[r] = k;
        }
        let scale = T::one() + set.totals().iter().fold(T::zero(), |m, &t| m.max(t));
        let mut mult_units = Vec::new();
        for (s, (u, &t)) in set.units().iter().zip(set.totals()).enumerate() {
            let fixed: T = u.iter().map(|&r| f[r]).sum();
            if u.iter().any(|&r| status[r] == Status::Free) {
                mult_units.push((s, t - fixed));
            } else if (fixed - t).abs() > T::lit(1e-9) * scale {
                return Ok(None);
            }
        }
        let dim = free.len() + mult_units.len();
        if dim == 0 {
            return Ok(Some(f));
        }
        let mut a = Mat::zeros(dim, dim);
        let mut b = vec![T::zero(); dim];
        let base = self.eval(&f);
        for (k, &r) in free.iter().enumerate() {
            for (j, &c) in free.iter().enumerate() {
                a[(k, j)] = self.m[(r, c)];
            }
            b[k] = -base[r];
        }
        for (i, &(s, rhs)) in mult_units.iter().enumerate() {
            let row = free.len() + i;
            for &r in &set.units()[s] {
                if slot[r] != usize::MAX {
                    a[(slot[r], row)] = -T::one();
                    a[(row, slot[r])] = T::one();
                }
            }
            b[row] = rhs;
        }
        let Some(x) = solve_linear(&a, &b, T::epsilon() * T::lit(1e3)) else {
            return Ok(None);
        };
        for (k, &r) in free.iter().enumerate() {
            f[r] = x[k];
        }
        if !set.contains(&f, T::lit(1e-9) * scale) {
            return Ok(None);
        }
        Ok(Some(set.project(&f)?))
    }

    /// Every solution reachable by a KKT pattern (`3^R` or `2^R`
    /// patterns); callers bound `R`.
    pub fn enumerate_solutions(&self, set: &FeasibleSet<T>, tol: T) -> Result<Vec<Vec<T>>> {
        let n = set.dim();
        let opts: &[Status] = if set.upper().is_some() {
            &[Status::Lower, Status::Free, Status::Upper]
        } else {
            &[Status::Lower, Status::Free]
        };
        let mut idx = vec![0usize; n];
        let mut out = Vec::new();
        loop {
            let status: Vec<Status> = idx.iter().map(|&i| opts[i]).collect();
            if let Some(f) = self.solve_kkt(set, &status)? {
                if self.natural_residual(set, &f)? <= tol {
                    out.push(f);
                }
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < opts.len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

//! The fleet objective `F(h, f) = (λᴴ h + λᶜ f) · t(h + f)`, its gradient in
//! the fleet flow, and curvature classification over the strategy square.

use crate::error::{check_len, Error, Result};
use crate::network::{DelayFunction, Network};
use crate::scalar::{add, dot, Real};

/// Weights on HDV and fleet total travel time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetStrategy<T> {
    pub lambda_hdv: T,
    pub lambda_crv: T,
}

impl<T: Real> FleetStrategy<T> {
    pub const PRESETS: [&'static str; 5] = ["selfish", "altruistic", "malicious", "social", "disruptive"];

    pub fn new(lambda_hdv: T, lambda_crv: T) -> Self {
        Self { lambda_hdv, lambda_crv }
    }

    pub fn selfish() -> Self {
        Self::new(T::zero(), T::one())
    }

    pub fn altruistic() -> Self {
        Self::new(T::one(), T::zero())
    }

    pub fn malicious() -> Self {
        Self::new(-T::one(), T::zero())
    }

    pub fn social() -> Self {
        Self::new(T::one(), T::one())
    }

    pub fn disruptive() -> Self {
        Self::new(-T::one(), T::one())
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "selfish" => Some(Self::selfish()),
            "altruistic" => Some(Self::altruistic()),
            "malicious" => Some(Self::malicious()),
            "social" => Some(Self::social()),
            "disruptive" => Some(Self::disruptive()),
            _ => None,
        }
    }

    /// Name of the matching preset, if any.
    pub fn preset_name(&self) -> Option<&'static str> {
        Self::PRESETS
            .iter()
            .copied()
            .find(|n| Self::preset(n).as_ref() == Some(self))
    }

    /// `L = λᶜ − λᴴ`; the inverse is unique-capable only when `L > 0`.
    pub fn gap(&self) -> T {
        self.lambda_crv - self.lambda_hdv
    }

    pub fn scaled(&self, c: T) -> Self {
        Self::new(self.lambda_hdv * c, self.lambda_crv * c)
    }

    fn weights(&self, h: &[T], f: &[T]) -> Vec<T> {
        h.iter()
            .zip(f)
            .map(|(&a, &b)| self.lambda_hdv * a + self.lambda_crv * b)
            .collect()
    }
}

/// Fleet objective in route form.
pub fn eval_objective<T: Real>(strategy: &FleetStrategy<T>, h: &[T], f: &[T], net: &Network<T>) -> Result<T> {
    check_len(net.n_routes(), h.len())?;
    check_len(net.n_routes(), f.len())?;
    let t = net.route_times(&add(h, f))?;
    Ok(dot(&strategy.weights(h, f), &t))
}

/// Fleet objective in link form `Σ_α (λᴴ η_α + λᶜ φ_α) τ_α(η + φ)`.
/// Only defined for link-additive networks.
pub fn eval_objective_links<T: Real>(strategy: &FleetStrategy<T>, eta: &[T], phi: &[T], net: &Network<T>) -> Result<T> {
    if !net.is_link_additive() {
        return Err(Error::Unsupported("link form needs a link-additive network".into()));
    }
    check_len(net.n_links(), eta.len())?;
    check_len(net.n_links(), phi.len())?;
    let tau = net.link_times(&add(eta, phi))?;
    Ok(dot(&strategy.weights(eta, phi), &tau))
}

/// `∇_f F = λᶜ t(q) + ∇t(q)ᵀ (λᴴ h + λᶜ f)` at `q = h + f`.
pub fn objective_gradient_in_f<T: Real>(
    strategy: &FleetStrategy<T>,
    h: &[T],
    f: &[T],
    net: &Network<T>,
) -> Result<Vec<T>> {
    check_len(net.n_routes(), h.len())?;
    check_len(net.n_routes(), f.len())?;
    let q = add(h, f);
    let t = net.route_times(&q)?;
    let g = net.route_gradient(&q)?;
    let w = strategy.weights(h, f);
    Ok(g.tr_matvec(&w)
        .into_iter()
        .zip(t)
        .map(|(a, ti)| a + strategy.lambda_crv * ti)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConvexityKind {
    ConvexEverywhere,
    ConcaveEverywhere,
    Indefinite,
}

impl ConvexityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConvexEverywhere => "ConvexEverywhere",
            Self::ConcaveEverywhere => "ConcaveEverywhere",
            Self::Indefinite => "Indefinite",
        }
    }
}

impl std::fmt::Display for ConvexityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-link curvature data. The second derivative of the link objective
/// is a positive multiple of `eta_coefficient · η + phi_coefficient · φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkCurvature<T> {
    pub link: usize,
    pub exponent: T,
    /// `2λᶜ + (γ − 1) λᴴ`
    pub eta_coefficient: T,
    /// `λᶜ (1 + γ)`
    pub phi_coefficient: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityClass<T> {
    pub kind: ConvexityKind,
    pub links: Vec<LinkCurvature<T>>,
}

fn exponent_of<T: Real>(delay: &DelayFunction<T>, name: &str) -> Result<T> {
    match *delay {
        DelayFunction::Affine { .. } => Ok(T::one()),
        DelayFunction::Quadratic { .. } => Ok(T::lit(2.0)),
        DelayFunction::Bpr { exponent, .. } if exponent >= T::one() => Ok(exponent),
        DelayFunction::Bpr { .. } => Err(Error::Unsupported(format!(
            "link `{name}`: BPR exponent below one is concave"
        ))),
        _ => Err(Error::Unsupported(format!(
            "link `{name}`: {} delays cannot be classified",
            delay.kind()
        ))),
    }
}

/// Classifies `F(h, ·)` over the whole non-negative orthant.
pub fn classify_convexity<T: Real>(strategy: &FleetStrategy<T>, net: &Network<T>) -> Result<ConvexityClass<T>> {
    if !net.is_link_additive() {
        return Err(Error::Unsupported("route-level delays cannot be classified".into()));
    }
    let (lh, lc) = (strategy.lambda_hdv, strategy.lambda_crv);
    let two = T::lit(2.0);
    let links = net
        .links()
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let g = exponent_of(&l.delay, &l.id)?;
            Ok(LinkCurvature {
                link: i,
                exponent: g,
                eta_coefficient: two * lc + (g - T::one()) * lh,
                phi_coefficient: lc * (T::one() + g),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let zero = T::zero();
    let kind = if lh == zero && lc == zero {
        // F ≡ 0 is both; report the convex side
        ConvexityKind::ConvexEverywhere
    } else if lh >= zero && lc >= zero {
        ConvexityKind::ConvexEverywhere
    } else if lh <= zero && lc <= zero {
        ConvexityKind::ConcaveEverywhere
    } else if lh < zero && lc > zero {
        if links.iter().all(|c| lc > (T::one() - c.exponent) / two * lh) {
            ConvexityKind::ConvexEverywhere
        } else {
            ConvexityKind::Indefinite
        }
    } else if links.iter().all(|c| lc < (T::one() - c.exponent) / two * lh) {
        // mirror image of the case above: −F is convex
        ConvexityKind::ConcaveEverywhere
    } else {
        ConvexityKind::Indefinite
    };
    Ok(ConvexityClass { kind, links })
}

/// `∂²Φ_α/∂φ_α² = 2λᶜ τ'(η+φ) + (λᴴ η + λᶜ φ) τ''(η+φ)`.
pub fn link_second_derivative<T: Real>(
    strategy: &FleetStrategy<T>,
    delay: &DelayFunction<T>,
    eta: T,
    phi: T,
) -> Result<T> {
    let x = eta + phi;
    let d1 = delay.derivative("", x)?;
    let w = strategy.lambda_hdv * eta + strategy.lambda_crv * phi;
    let d2 = if w == T::zero() {
        T::zero()
    } else {
        delay.second_derivative("", x)?
    };
    Ok(T::lit(2.0) * strategy.lambda_crv * d1 + w * d2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalCurvature<T> {
    /// Strictly positive second derivative.
    pub convex: bool,
    /// `(2λᶜ + (γ−1)λᴴ) η + λᶜ (1+γ) φ`
    pub bracket: T,
    pub second_derivative: T,
}

/// Pointwise curvature of each link objective at link flows `(η, φ)`.
pub fn local_convexity_at<T: Real>(
    strategy: &FleetStrategy<T>,
    eta: &[T],
    phi: &[T],
    net: &Network<T>,
) -> Result<Vec<LocalCurvature<T>>> {
    if !(strategy.lambda_crv > T::zero()) {
        return Err(Error::Unsupported("local convexity test needs λ_CRV > 0".into()));
    }
    check_len(net.n_links(), eta.len())?;
    check_len(net.n_links(), phi.len())?;
    let class = classify_convexity(strategy, net)?;
    class
        .links
        .iter()
        .zip(net.links())
        .map(|(c, l)| {
            let (e, p) = (eta[c.link], phi[c.link]);
            let d2 = link_second_derivative(strategy, &l.delay, e, p)?;
            Ok(LocalCurvature {
                convex: d2 > T::zero(),
                bracket: c.eta_coefficient * e + c.phi_coefficient * p,
                second_derivative: d2,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios;

    #[test]
    fn fig3_selfish_value() {
        let net = scenarios::fig3::<f64>(50.0);
        let v = eval_objective(&FleetStrategy::selfish(), &[10.0, 40.0], &[50.0, 0.0], &net).unwrap();
        assert!((v - 610.0).abs() < 1e-9);
        let z = eval_objective(&FleetStrategy::new(0.0, 0.0), &[10.0, 40.0], &[50.0, 0.0], &net).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn altruistic_prefers_empty_route() {
        let net = scenarios::three_routes::<f64>();
        let s = FleetStrategy::altruistic();
        let h = [30.0, 0.0, 40.0];
        let base = eval_objective(&s, &h, &[0.0; 3], &net).unwrap();
        let good = eval_objective(&s, &h, &[0.0, 30.0, 0.0], &net).unwrap();
        let bad = eval_objective(&s, &h, &[30.0, 0.0, 0.0], &net).unwrap();
        assert!((good - base).abs() < 1e-12);
        assert!(bad > good);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let net = scenarios::fig3::<f64>(50.0);
        let s = FleetStrategy::selfish();
        let (h, f) = ([10.0, 40.0], [25.0, 25.0]);
        let g = objective_gradient_in_f(&s, &h, &f, &net).unwrap();
        for i in 0..2 {
            let mut fp = f;
            let mut fm = f;
            fp[i] += 1e-5;
            fm[i] -= 1e-5;
            let fd = (eval_objective(&s, &h, &fp, &net).unwrap() - eval_objective(&s, &h, &fm, &net).unwrap()) / 2e-5;
            assert!((g[i] - fd).abs() <= 1e-6 * g[i].abs());
        }
        let z = objective_gradient_in_f(&FleetStrategy::new(0.0, 0.0), &h, &f, &net).unwrap();
        assert!(z.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn social_gradient_is_marginal_cost() {
        let net = scenarios::fig3::<f64>(50.0);
        let (h, f) = ([10.0, 40.0], [20.0, 30.0]);
        let g = objective_gradient_in_f(&FleetStrategy::social(), &h, &f, &net).unwrap();
        let q = [30.0, 70.0];
        let t = net.route_times(&q).unwrap();
        let d = net.route_gradient(&q).unwrap();
        let mc: Vec<f64> = (0..2).map(|i| t[i] + d[(i, i)] * q[i]).collect();
        for i in 0..2 {
            assert!((g[i] - mc[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn link_form_agrees() {
        let net = scenarios::network8::<f64>(DelayFunction::bpr(1.0, 0.15, 100.0, 4.0), 0.0, 0.0);
        let s = FleetStrategy::new(-0.3, 0.8);
        let (h, f) = ([10.0, 20.0, 30.0, 40.0], [5.0, 0.0, 7.0, 1.0]);
        let route = eval_objective(&s, &h, &f, &net).unwrap();
        let link = eval_objective_links(&s, &net.apply_lambda(&h), &net.apply_lambda(&f), &net).unwrap();
        assert!((route - link).abs() <= 1e-10 * route.abs());
    }

    #[test]
    fn classification_rules() {
        let quad = scenarios::symmetric_pair::<f64>(0.0, 0.0);
        let kind = |l: (f64, f64)| classify_convexity(&FleetStrategy::new(l.0, l.1), &quad).unwrap().kind;
        assert_eq!(kind((-1.0, 1.0)), ConvexityKind::ConvexEverywhere);
        assert_eq!(kind((-1.0, 0.25)), ConvexityKind::Indefinite);
        assert_eq!(kind((-1.0, 0.0)), ConvexityKind::ConcaveEverywhere);
        assert_eq!(kind((0.0, 1.0)), ConvexityKind::ConvexEverywhere);
        assert_eq!(kind((1.0, -1.0)), ConvexityKind::ConcaveEverywhere);
        assert_eq!(kind((1.0, -0.25)), ConvexityKind::Indefinite);
        assert_eq!(kind((0.25, -1.0)), ConvexityKind::ConcaveEverywhere);
        let cross = scenarios::cross_dependent::<f64>(0.5, 0.5);
        assert!(matches!(
            classify_convexity(&FleetStrategy::selfish(), &cross),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn bpr_quartic_threshold() {
        let net = scenarios::parallel(1, DelayFunction::bpr(1.0, 1.0, 10.0, 4.0), 0.0, 0.0);
        let k = |lc: f64| classify_convexity(&FleetStrategy::new(-1.0, lc), &net).unwrap().kind;
        assert_eq!(k(1.6), ConvexityKind::ConvexEverywhere);
        assert_eq!(k(1.0), ConvexityKind::Indefinite);
    }

    #[test]
    fn local_convexity() {
        let net = scenarios::parallel(1, DelayFunction::bpr(1.0, 1.0, 10.0, 4.0), 0.0, 0.0);
        let s = FleetStrategy::disruptive();
        // bracket −η + 5φ
        let at = |e: f64, p: f64| local_convexity_at(&s, &[e], &[p], &net).unwrap()[0].clone();
        assert!(at(1.0, 0.3).convex);
        assert!(!at(1.0, 0.1).convex);
        assert!((at(1.0, 0.1).bracket + 0.5).abs() < 1e-12);
        let zero = at(0.0, 0.0);
        assert!(!zero.convex && zero.second_derivative == 0.0);
        assert!(local_convexity_at(&FleetStrategy::malicious(), &[1.0], &[1.0], &net).is_err());
    }
}

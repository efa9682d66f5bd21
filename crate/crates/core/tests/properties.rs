use fleet_core::dynamics::{simulate, SimulationConfig};
use fleet_core::feasible::FeasibleSet;
use fleet_core::forward::{fleet_assign, ForwardConfig};
use fleet_core::inverse::{solve_inverse, stationarity_map, InverseConfig};
use fleet_core::objective::{
    classify_convexity, eval_objective, eval_objective_links, link_second_derivative, ConvexityKind, FleetStrategy,
};
use fleet_core::scenarios;
use fleet_core::stackelberg::{induced_ue, MixedCornerStrategy};
use fleet_core::{DelayFunction, Network};
use proptest::prelude::*;

fn shared_bpr(gamma: f64) -> Network {
    Network::builder()
        .link("s", DelayFunction::bpr(2.0, 0.15, 60.0, gamma))
        .link("a", DelayFunction::bpr(3.0, 0.5, 40.0, gamma))
        .link("b", DelayFunction::bpr(1.0, 0.3, 30.0, gamma))
        .link("c", DelayFunction::affine(4.0, 0.05))
        .route("r1", &["s", "a"])
        .route("r2", &["s", "b"])
        .route("r3", &["c"])
        .unit("O", "D", 60.0, 40.0, &["r1", "r2", "r3"])
        .build()
        .unwrap()
}

fn flows(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..80.0, n)
}

fn split(total: f64, w: &[f64]) -> Vec<f64> {
    let s: f64 = w.iter().sum();
    w.iter().map(|x| total * x / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lambda_is_linear(x in flows(4), y in flows(4), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let net = scenarios::two_od::<f64>(DelayFunction::affine(1.0, 1.0), [1.0, 1.0]);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = net.apply_lambda(&mix);
        let (lx, ly) = (net.apply_lambda(&x), net.apply_lambda(&y));
        for k in 0..lhs.len() {
            prop_assert!((lhs[k] - (a * lx[k] + b * ly[k])).abs() <= 1e-9 * (1.0 + lhs[k].abs()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences(q in flows(3), four in any::<bool>()) {
        let net = shared_bpr(if four { 4.0 } else { 2.0 });
        let g = net.route_gradient(&q).unwrap();
        for s in 0..3 {
            let e = 1e-5 * (1.0 + q[s]);
            let mut up = q.clone();
            up[s] += e;
            let mut dn = q.clone();
            dn[s] -= e;
            let (tu, td) = (net.route_times(&up).unwrap(), net.route_times(&dn).unwrap());
            for r in 0..3 {
                let fd = (tu[r] - td[r]) / (2.0 * e);
                prop_assert!((g[(r, s)] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "{r} {s}: {} vs {fd}", g[(r, s)]);
            }
        }
    }

    #[test]
    fn independent_routes_are_positive_definite(q in flows(3)) {
        let net = shared_bpr(2.0);
        prop_assert!(net.routes_linearly_independent().independent);
        prop_assert!(net.feasible_direction_pd(&q).unwrap().passes);
    }

    #[test]
    fn dependent_routes_are_not(q in flows(4)) {
        let net = scenarios::network8::<f64>(DelayFunction::bpr(1.0, 0.15, 50.0, 4.0), 0.0, 0.0);
        let ind = net.routes_linearly_independent();
        prop_assert!(!ind.independent);
        let pd = net.feasible_direction_pd(&q).unwrap();
        prop_assert!(!pd.passes);
        for v in &ind.null_basis {
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            prop_assert!(net.apply_lambda(v).iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn route_and_link_forms_agree(h in flows(3), f in flows(3), lh in -1.0f64..1.0, lc in -1.0f64..1.0) {
        let net = shared_bpr(4.0);
        let s = FleetStrategy::new(lh, lc);
        let route = eval_objective(&s, &h, &f, &net).unwrap();
        let link = eval_objective_links(&s, &net.apply_lambda(&h), &net.apply_lambda(&f), &net).unwrap();
        prop_assert!((route - link).abs() <= 1e-9 * (1.0 + route.abs()));
    }

    #[test]
    fn classifier_agrees_with_second_derivatives(
        lh in -1.0f64..1.0,
        lc in -1.0f64..1.0,
        gamma in 1.0f64..5.0,
        pts in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 20),
    ) {
        let delay = DelayFunction::bpr(1.0, 0.15, 50.0, gamma);
        let net = scenarios::parallel::<f64>(1, delay.clone(), 0.0, 0.0);
        let s = FleetStrategy::new(lh, lc);
        let kind = classify_convexity(&s, &net).unwrap().kind;
        for (eta, phi) in pts {
            let x = eta + phi;
            if x < 1e-3 {
                continue;
            }
            let d2 = link_second_derivative(&s, &delay, eta, phi).unwrap();
            let tol = 1e-12 * (1.0 + x);
            match kind {
                ConvexityKind::ConvexEverywhere => prop_assert!(d2 >= -tol, "{d2}"),
                ConvexityKind::ConcaveEverywhere => prop_assert!(d2 <= tol, "{d2}"),
                ConvexityKind::Indefinite => {}
            }
        }
    }

    #[test]
    fn fleet_response_is_feasible(w in flows(3), lh in -1.0f64..1.0, lc in -1.0f64..1.0) {
        let net = shared_bpr(2.0);
        let h = split(60.0, &w);
        let cfg = ForwardConfig { n_starts: 4, n_dir: 10, ..Default::default() };
        let r = fleet_assign(&FleetStrategy::new(lh, lc), &h, &net, &cfg).unwrap();
        prop_assert!(FeasibleSet::fleet(&net).contains(&r.f, 1e-9));
    }

    #[test]
    fn inverse_round_trip(w in flows(3), lh in -1.0f64..0.5) {
        let net = shared_bpr(4.0);
        let s = FleetStrategy::new(lh, 1.0);
        let h = split(60.0, &w);
        let f = fleet_assign(&s, &h, &net, &ForwardConfig::default()).unwrap().f;
        let q: Vec<f64> = h.iter().zip(&f).map(|(a, b)| a + b).collect();
        let inv = solve_inverse(&s, &q, &net, &InverseConfig::default()).unwrap();
        prop_assert!(inv.certificate.theorem_applies);
        for r in 0..3 {
            prop_assert!((inv.f[r] - f[r]).abs() <= 1e-4 * 40.0, "{:?} vs {f:?}", inv.f);
        }
    }

    #[test]
    fn stationarity_map_is_monotone(q in flows(3), a in flows(3), b in flows(3), lh in -1.0f64..0.5) {
        let net = shared_bpr(2.0);
        let s = FleetStrategy::new(lh, 1.0);
        prop_assume!(net.feasible_direction_pd(&q).unwrap().passes);
        // feasible directions: equal unit totals
        let (fa, fb) = (split(40.0, &a), split(40.0, &b));
        let (ma, mb) = (stationarity_map(&s, &q, &fa, &net).unwrap(), stationarity_map(&s, &q, &fb, &net).unwrap());
        let inner: f64 = (0..3).map(|r| (ma[r] - mb[r]) * (fa[r] - fb[r])).sum();
        prop_assert!(inner >= -1e-9 * (1.0 + ma.iter().map(|x| x.abs()).sum::<f64>()));
    }

    #[test]
    fn dynamics_conserve_flow(h1 in 0.0f64..50.0, mu in 0.0f64..1.0, malicious in any::<bool>()) {
        let net = scenarios::symmetric_pair::<f64>(50.0, 30.0);
        let s = if malicious { FleetStrategy::malicious() } else { FleetStrategy::selfish() };
        let mut cfg = SimulationConfig::new(s, 30);
        cfg.mu = mu;
        for d in simulate(&cfg, &[h1, 50.0 - h1], &net).unwrap() {
            prop_assert!((d.h.iter().sum::<f64>() - 50.0).abs() <= 1e-9);
            prop_assert!((d.f.iter().sum::<f64>() - 30.0).abs() <= 1e-9);
            let total: f64 = (0..2).map(|r| (d.h[r] + d.f[r]) * d.times[r]).sum();
            prop_assert!((d.t_hdv + d.t_crv - total).abs() <= 1e-10 * total);
        }
    }

    #[test]
    fn induced_equilibrium_is_monotone_and_symmetric(p in 0.0f64..1.0, dp in 0.0f64..0.5) {
        let net = scenarios::symmetric_pair::<f64>(50.0, 50.0);
        let at = |p: f64| induced_ue(&MixedCornerStrategy::new(p).unwrap().mixture(), 50.0, 50.0, &net).unwrap();
        let p2 = (p + dp).min(1.0);
        prop_assert!(at(p2)[0] <= at(p)[0] + 1e-9);
        let (a, b) = (at(p), at(1.0 - p));
        prop_assert!((a[0] - b[1]).abs() <= 1e-9, "{a:?} {b:?}");
    }
}

#[test]
fn single_precision_round_trip() {
    let net = scenarios::discrete_example::<f32>();
    let s = fleet_core::GenericFleetStrategy::<f32>::selfish();
    let r = solve_inverse(&s, &[50.0, 50.0], &net, &InverseConfig::default()).unwrap();
    assert!((r.f[0] - 9.5).abs() < 1e-3 && (r.f[1] - 9.5).abs() < 1e-3, "{:?}", r.f);
}

//! Ready-made networks used by the examples, tests and CLI fixtures.

use crate::network::{DelayFunction, Network};
use crate::scalar::Real;

fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// Two independent routes with `t = (5(1 + (q₁/50)²), 15(1 + (q₂/80)²))`,
/// HDV demand 50 and the given fleet size.
pub fn fig3<T: Real>(q_crv: T) -> Network<T> {
    Network::builder()
        .link("l1", DelayFunction::quadratic(lit(5.0), lit(5.0 / 2500.0)))
        .link("l2", DelayFunction::quadratic(lit(15.0), lit(15.0 / 6400.0)))
        .route("r1", &["l1"])
        .route("r2", &["l2"])
        .unit("O", "D", lit(50.0), q_crv, &["r1", "r2"])
        .build()
        .expect("fig3 network is valid")
}

/// `n` independent routes with identical delays.
pub fn parallel<T: Real>(n: usize, delay: DelayFunction<T>, q_hdv: T, q_crv: T) -> Network<T> {
    let mut b = Network::builder();
    let ids: Vec<String> = (1..=n).map(|i| format!("r{i}")).collect();
    for (i, id) in ids.iter().enumerate() {
        b = b
            .link(format!("l{}", i + 1), delay.clone())
            .route_owned(id.clone(), vec![format!("l{}", i + 1)]);
    }
    b.unit_owned("O".into(), "D".into(), q_hdv, q_crv, ids)
        .build()
        .expect("parallel network is valid")
}

/// Two identical routes with quadratic delays `10 + 0.01 x²`.
pub fn symmetric_pair<T: Real>(q_hdv: T, q_crv: T) -> Network<T> {
    parallel(2, DelayFunction::quadratic(lit(10.0), lit(0.01)), q_hdv, q_crv)
}

/// Routes c-a-d and c-b-d sharing the first and last links; links are
/// ordered a, b, c, d.
pub fn two_route_shared<T: Real>(delay: DelayFunction<T>) -> Network<T> {
    Network::builder()
        .link_between("a", "A", "B", delay.clone())
        .link_between("b", "A", "B", delay.clone())
        .link_between("c", "O", "A", delay.clone())
        .link_between("d", "B", "D", delay)
        .route("r1", &["c", "a", "d"])
        .route("r2", &["c", "b", "d"])
        .unit("O", "D", T::zero(), T::zero(), &["r1", "r2"])
        .build()
        .expect("two-route network is valid")
}

/// The '8' network: routes a-c, a-d, b-c, b-d over links a, b, c, d.
pub fn network8<T: Real>(delay: DelayFunction<T>, q_hdv: T, q_crv: T) -> Network<T> {
    Network::builder()
        .link_between("a", "O", "M", delay.clone())
        .link_between("b", "O", "M", delay.clone())
        .link_between("c", "M", "D", delay.clone())
        .link_between("d", "M", "D", delay)
        .route("r1", &["a", "c"])
        .route("r2", &["a", "d"])
        .route("r3", &["b", "c"])
        .route("r4", &["b", "d"])
        .unit("O", "D", q_hdv, q_crv, &["r1", "r2", "r3", "r4"])
        .build()
        .expect("network 8 is valid")
}

/// Two-route network whose middle links interact:
/// `τ_a = 1 + a_a + δ₁ a_b`, `τ_b = 1 + a_b + δ₂ a_a`, `τ_c = 1 + a_c`,
/// `τ_d = 1 + a_d`.
pub fn cross_dependent<T: Real>(delta1: T, delta2: T) -> Network<T> {
    let one = T::one();
    Network::builder()
        .link("a", DelayFunction::cross_affine(one, one, vec![(1, delta1)]))
        .link("b", DelayFunction::cross_affine(one, one, vec![(0, delta2)]))
        .link("c", DelayFunction::affine(one, one))
        .link("d", DelayFunction::affine(one, one))
        .route("r1", &["c", "a", "d"])
        .route("r2", &["c", "b", "d"])
        .unit("O", "D", T::zero(), T::zero(), &["r1", "r2"])
        .build()
        .expect("cross-dependent network is valid")
}

/// Two routes through signalised intersections; flows are degrees of
/// saturation, so totals stay below one.
pub fn webster<T: Real>(q_hdv: T, q_crv: T) -> Network<T> {
    Network::builder()
        .link("s1", DelayFunction::webster(lit(0.5), lit(1.0), lit(60.0)))
        .link("s2", DelayFunction::webster(lit(0.4), lit(1.2), lit(50.0)))
        .route("r1", &["s1"])
        .route("r2", &["s2"])
        .unit("O", "D", q_hdv, q_crv, &["r1", "r2"])
        .build()
        .expect("webster network is valid")
}

/// Two units on one OD pair: unit 1 may use links a or b, unit 2 only b.
pub fn two_unit<T: Real>(delay: DelayFunction<T>, sizes: [T; 2]) -> Network<T> {
    Network::builder()
        .link_between("a", "O", "D", delay.clone())
        .link_between("b", "O", "D", delay)
        .route("u1a", &["a"])
        .route("u1b", &["b"])
        .route("u2b", &["b"])
        .unit("O", "D", T::zero(), sizes[0], &["u1a", "u1b"])
        .unit("O", "D", T::zero(), sizes[1], &["u2b"])
        .build()
        .expect("two-unit network is valid")
}

/// As [`two_unit`] but unit 2 may also use a third link c.
pub fn two_unit_three_links<T: Real>(delay: DelayFunction<T>, sizes: [T; 2]) -> Network<T> {
    Network::builder()
        .link_between("a", "O", "D", delay.clone())
        .link_between("b", "O", "D", delay.clone())
        .link_between("c", "O", "D", delay)
        .route("u1a", &["a"])
        .route("u1b", &["b"])
        .route("u2b", &["b"])
        .route("u2c", &["c"])
        .unit("O", "D", T::zero(), sizes[0], &["u1a", "u1b"])
        .unit("O", "D", T::zero(), sizes[1], &["u2b", "u2c"])
        .build()
        .expect("two-unit network is valid")
}

/// Two OD pairs sharing origin O: unit 1 to D1 via a-c or b-c, unit 2 to
/// D2 via a-d or b-d.
pub fn two_od<T: Real>(delay: DelayFunction<T>, sizes: [T; 2]) -> Network<T> {
    Network::builder()
        .link_between("a", "O", "M", delay.clone())
        .link_between("b", "O", "M", delay.clone())
        .link_between("c", "M", "D1", delay.clone())
        .link_between("d", "M", "D2", delay)
        .route("ac", &["a", "c"])
        .route("bc", &["b", "c"])
        .route("ad", &["a", "d"])
        .route("bd", &["b", "d"])
        .unit("O", "D1", T::zero(), sizes[0], &["ac", "bc"])
        .unit("O", "D2", T::zero(), sizes[1], &["ad", "bd"])
        .build()
        .expect("two-OD network is valid")
}

/// Two identical routes carrying 100 vehicles, 19 of them in the fleet.
pub fn discrete_example<T: Real>() -> Network<T> {
    symmetric_pair(lit(81.0), lit(19.0))
}

/// Three identical independent routes, HDV demand 70, fleet of 30.
pub fn three_routes<T: Real>() -> Network<T> {
    parallel(3, DelayFunction::quadratic(lit(10.0), lit(0.01)), lit(70.0), lit(30.0))
}

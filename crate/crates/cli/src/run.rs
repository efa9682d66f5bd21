//! Subcommand execution. Each command turns a scenario into a [`Table`].

use std::io::Write;

use fleet_core::dynamics::simulate;
use fleet_core::feasible::FeasibleSet;
use fleet_core::forward::{certify_local_min, fleet_assign};
use fleet_core::inverse::{
    discrete_recover, inverse_link_flows, lipschitz_bound, route_fiber, solve_inverse, DiscreteConfig,
};
use fleet_core::objective::{classify_convexity, eval_objective};
use fleet_core::stackelberg::{compare_routings, verify_corner_support, CompareConfig};
use fleet_core::{ForwardConfig, InverseConfig, SimulationConfig};

use crate::error::CliError;
use crate::scenario::{Observed, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Forward,
    Inverse,
    Classify,
    Certify,
    Simulate,
    Stackelberg,
    Lipschitz,
    Fiber,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}
impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// `%.17g`: enough digits to round-trip, no locale, fixed notation for
/// moderate exponents.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..17).contains(&exp) {
        let s = format!("{x:.*}", (16 - exp) as usize);
        strip_zeros(&s).to_string()
    } else {
        format!(
            "{}e{}{:02}",
            strip_zeros(mant),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Bool(b) => u8::from(*b).to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// One line for stdout.
    pub summary: String,
}

impl Table {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), CliError> {
        let io = |e: csv::Error| CliError::io(e.to_string());
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            debug_assert_eq!(row.len(), self.header.len());
            out.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        out.flush().map_err(|e| CliError::io(e.to_string()))
    }
}

/// Builds one row as `(column, value)` pairs; the first row fixes the header.
#[derive(Default)]
struct Row(Vec<(String, Cell)>);

impl Row {
    fn put(mut self, name: impl Into<String>, v: impl Into<Cell>) -> Self {
        self.0.push((name.into(), v.into()));
        self
    }

    fn vector(mut self, prefix: &str, ids: &[String], v: &[f64]) -> Self {
        for (id, &x) in ids.iter().zip(v) {
            self.0.push((format!("{prefix}_{id}"), Cell::Num(x)));
        }
        self
    }
}

fn table(rows: Vec<Row>, summary: String) -> Table {
    let header = rows
        .first()
        .map(|r| r.0.iter().map(|c| c.0.clone()).collect())
        .unwrap_or_default();
    Table {
        header,
        rows: rows
            .into_iter()
            .map(|r| r.0.into_iter().map(|c| c.1).collect())
            .collect(),
        summary,
    }
}

pub struct Overrides {
    pub seed: Option<u64>,
    pub days: Option<usize>,
    pub mu: Option<f64>,
}

struct Ctx<'a> {
    sc: &'a Scenario,
    seed: u64,
    route_ids: Vec<String>,
    link_ids: Vec<String>,
}

impl Ctx<'_> {
    fn forward(&self) -> ForwardConfig {
        let t = &self.sc.tolerances;
        let d = ForwardConfig::default();
        ForwardConfig {
            tol_pg: t.tol_pg.unwrap_or(d.tol_pg),
            max_iter: t.forward_max_iter.unwrap_or(d.max_iter),
            n_starts: t.n_starts.unwrap_or(d.n_starts),
            n_dir: t.n_dir.unwrap_or(d.n_dir),
            vertex_cap: t.vertex_cap.unwrap_or(d.vertex_cap),
            tol_tie: t.tol_tie.unwrap_or(d.tol_tie),
            tol_distinct: t.tol_distinct.unwrap_or(d.tol_distinct),
            tol_dd: t.tol_dd.unwrap_or(d.tol_dd),
            seed: self.seed,
        }
    }

    fn inverse(&self) -> InverseConfig {
        let t = &self.sc.tolerances;
        let d = InverseConfig::default();
        InverseConfig {
            tol_vi: t.tol_vi.unwrap_or(d.tol_vi),
            max_iter: t.inverse_max_iter.unwrap_or(d.max_iter),
            n_starts: t.n_starts.unwrap_or(d.n_starts),
            tol_distinct: t.tol_distinct.unwrap_or(d.tol_distinct),
            seed: self.seed,
            ..d
        }
    }

    fn lipschitz_samples(&self) -> usize {
        self.sc.tolerances.lipschitz_samples.unwrap_or(200)
    }

    fn hdv(&self) -> Result<&[f64], CliError> {
        self.sc
            .hdv
            .as_deref()
            .ok_or_else(|| CliError::missing("hdv", "HDV route flows"))
    }

    fn q_of(&self, h: &[f64], f: &[f64]) -> Vec<f64> {
        h.iter().zip(f).map(|(a, b)| a + b).collect()
    }
}

pub fn run(cmd: Command, sc: &Scenario, ov: &Overrides) -> Result<Table, CliError> {
    let net = &sc.network;
    let ctx = Ctx {
        sc,
        seed: ov.seed.unwrap_or(sc.seed),
        route_ids: net.routes().iter().map(|r| r.id.clone()).collect(),
        link_ids: net.links().iter().map(|l| l.id.clone()).collect(),
    };
    match cmd {
        Command::Forward => forward(&ctx),
        Command::Inverse => inverse(&ctx),
        Command::Classify => classify(&ctx),
        Command::Certify => certify(&ctx),
        Command::Simulate => simulate_days(&ctx, ov),
        Command::Stackelberg => stackelberg(&ctx, ov),
        Command::Lipschitz => lipschitz(&ctx),
        Command::Fiber => fiber(&ctx),
    }
}

fn forward(ctx: &Ctx) -> Result<Table, CliError> {
    let (sc, net) = (ctx.sc, &ctx.sc.network);
    let h = ctx.hdv()?;
    let r = fleet_assign(&sc.strategy, h, net, &ctx.forward())?;
    let q = ctx.q_of(h, &r.f);
    let t = net.route_times(&q)?;
    let summary = format!(
        "forward: objective {} ({:?}, local min {})",
        fmt_num(r.objective),
        r.trace.solver,
        r.certificate.is_local_min
    );
    let row = Row::default()
        .put("objective", r.objective)
        .put("solver", format!("{:?}", r.trace.solver).to_lowercase())
        .put("converged", r.trace.converged)
        .put("is_local_min", r.certificate.is_local_min)
        .put("min_dd", r.certificate.min_directional_derivative)
        .put("n_minimizers", r.minimizer_set.len().max(1))
        .vector("h", &ctx.route_ids, h)
        .vector("f", &ctx.route_ids, &r.f)
        .vector("q", &ctx.route_ids, &q)
        .vector("t", &ctx.route_ids, &t);
    Ok(table(vec![row], summary))
}

fn inverse(ctx: &Ctx) -> Result<Table, CliError> {
    let (sc, net) = (ctx.sc, &ctx.sc.network);
    let observed = sc
        .observed
        .as_ref()
        .ok_or_else(|| CliError::missing("observed", "observed flows"))?;
    match observed {
        Observed::RouteFlows { flows, discrete: false } => {
            let r = solve_inverse(&sc.strategy, flows, net, &ctx.inverse())?;
            let sols = if r.solutions.is_empty() {
                vec![r.f.clone()]
            } else {
                r.solutions.clone()
            };
            let fiber_dim = r.fiber_basis.as_ref().map_or(0, Vec::len);
            let rows = sols
                .iter()
                .enumerate()
                .map(|(k, f)| {
                    let h: Vec<f64> = flows.iter().zip(f).map(|(q, f)| q - f).collect();
                    Row::default()
                        .put("solution", k)
                        .put("residual", r.residual)
                        .put("converged", r.converged)
                        .put("theorem_applies", r.certificate.theorem_applies)
                        .put("min_rayleigh", r.certificate.min_rayleigh)
                        .put("gap", r.certificate.gap)
                        .put("fiber_dim", fiber_dim)
                        .vector("f", &ctx.route_ids, f)
                        .vector("h", &ctx.route_ids, &h)
                })
                .collect();
            let summary = format!(
                "inverse: {} solution(s), residual {}, unique by certificate: {}",
                sols.len(),
                fmt_num(r.residual),
                r.certificate.theorem_applies
            );
            Ok(table(rows, summary))
        }
        Observed::RouteFlows { flows, discrete: true } => {
            let dcfg = DiscreteConfig {
                lipschitz_samples: ctx.lipschitz_samples(),
                rounding_radius: sc.tolerances.rounding_radius,
                seed: ctx.seed,
                ..DiscreteConfig::default()
            };
            let r = discrete_recover(&sc.strategy, flows, net, &ctx.forward(), &ctx.inverse(), &dcfg)?;
            let rows = std::iter::once(None)
                .chain(r.integer_candidates.iter().map(Some))
                .enumerate()
                .map(|(k, cand)| {
                    let cand = cand.cloned().unwrap_or_else(|| vec![f64::NAN; flows.len()]);
                    Row::default()
                        .put("candidate", k)
                        .put("distance", r.distance)
                        .put("lipschitz_inverse", r.lipschitz_inverse)
                        .put("rounding_radius", r.rounding_radius)
                        .put("closeness_bound", r.closeness_bound)
                        .put("theorem_applies", r.inverse.certificate.theorem_applies)
                        .vector("q_city", &ctx.route_ids, &r.q_city)
                        .vector("f", &ctx.route_ids, &r.inverse.f)
                        .vector("f_int", &ctx.route_ids, &cand)
                })
                .collect();
            let summary = format!(
                "inverse (discrete): fleet {:?}, closeness bound {}, {} integer candidate(s)",
                r.inverse.f,
                fmt_num(r.closeness_bound),
                r.integer_candidates.len()
            );
            Ok(table(rows, summary))
        }
        Observed::LinkFlows(a) => {
            let r = inverse_link_flows(&sc.strategy, a, net, &ctx.inverse())?;
            let row = Row::default()
                .put("residual", r.residual)
                .put("converged", r.converged)
                .put("theorem_applies", r.certificate.theorem_applies)
                .put("min_rayleigh", r.certificate.min_rayleigh)
                .put("realisability_residual", r.realisability_residual)
                .vector("fleet", &ctx.link_ids, &r.fleet_link_flow)
                .vector("hdv", &ctx.link_ids, &r.hdv_link_flow)
                .vector("rep", &ctx.route_ids, &r.route_representative);
            let summary = format!("inverse (links): residual {}", fmt_num(r.residual));
            Ok(table(vec![row], summary))
        }
    }
}

fn classify(ctx: &Ctx) -> Result<Table, CliError> {
    let c = classify_convexity(&ctx.sc.strategy, &ctx.sc.network)?;
    let rows = c
        .links
        .iter()
        .map(|l| {
            Row::default()
                .put("kind", c.kind.as_str())
                .put("link", ctx.link_ids[l.link].as_str())
                .put("exponent", l.exponent)
                .put("eta_coefficient", l.eta_coefficient)
                .put("phi_coefficient", l.phi_coefficient)
        })
        .collect::<Vec<_>>();
    let rows = if rows.is_empty() {
        vec![Row::default()
            .put("kind", c.kind.as_str())
            .put("link", "")
            .put("exponent", f64::NAN)
            .put("eta_coefficient", f64::NAN)
            .put("phi_coefficient", f64::NAN)]
    } else {
        rows
    };
    Ok(table(rows, format!("classify: {}", c.kind)))
}

fn certify(ctx: &Ctx) -> Result<Table, CliError> {
    let (sc, net) = (ctx.sc, &ctx.sc.network);
    let h = ctx.hdv()?;
    let f = sc
        .fleet
        .as_deref()
        .ok_or_else(|| CliError::missing("fleet", "fleet route flows"))?;
    let set = FeasibleSet::fleet(net);
    let cert = certify_local_min(&sc.strategy, h, f, net, &set, &ctx.forward())?;
    let q = ctx.q_of(h, f);
    let t = net.route_times(&q)?;
    let pd = net.feasible_direction_pd(&q)?;
    let row = Row::default()
        .put("objective", eval_objective(&sc.strategy, h, f, net)?)
        .put("is_local_min", cert.is_local_min)
        .put("min_dd", cert.min_directional_derivative)
        .put("directions", cert.directions)
        .put("pd_passes", pd.passes)
        .put("min_rayleigh", pd.min_rayleigh)
        .put("pd_threshold", pd.threshold)
        .vector("q", &ctx.route_ids, &q)
        .vector("t", &ctx.route_ids, &t);
    let summary = format!(
        "certify: local min {}, positive definite {}",
        cert.is_local_min, pd.passes
    );
    Ok(table(vec![row], summary))
}

/// Each unit's HDV demand split evenly over its routes.
fn even_split(net: &fleet_core::Network) -> Vec<f64> {
    let mut h = vec![0.0; net.n_routes()];
    for u in net.units() {
        for &r in &u.routes {
            h[r] = u.q_hdv / u.routes.len() as f64;
        }
    }
    h
}

fn sim_config(ctx: &Ctx, ov: &Overrides) -> SimulationConfig {
    let s = &ctx.sc.simulation;
    let mut cfg = SimulationConfig::new(ctx.sc.strategy, ov.days.unwrap_or(s.days));
    cfg.mu = ov.mu.unwrap_or(s.mu);
    cfg.model = s.model;
    cfg.seed = ctx.seed;
    cfg.forward = ctx.forward();
    cfg
}

fn simulate_days(ctx: &Ctx, ov: &Overrides) -> Result<Table, CliError> {
    let net = &ctx.sc.network;
    let cfg = sim_config(ctx, ov);
    let h0 = ctx.sc.hdv.clone().unwrap_or_else(|| even_split(net));
    let days = simulate(&cfg, &h0, net)?;
    let rows = days
        .iter()
        .map(|d| {
            Row::default()
                .put("day", d.day)
                .put("t_hdv", d.t_hdv)
                .put("t_crv", d.t_crv)
                .vector("h", &ctx.route_ids, &d.h)
                .vector("f", &ctx.route_ids, &d.f)
                .vector("t", &ctx.route_ids, &d.times)
        })
        .collect();
    let last = days.last().expect("at least one day");
    let summary = format!(
        "simulate: {} days, final HDV time {}, fleet time {}",
        days.len(),
        fmt_num(last.t_hdv),
        fmt_num(last.t_crv)
    );
    Ok(table(rows, summary))
}

fn stackelberg(ctx: &Ctx, ov: &Overrides) -> Result<Table, CliError> {
    let net = &ctx.sc.network;
    let cfg = CompareConfig {
        simulation: sim_config(ctx, ov),
        burn_in: ctx.sc.simulation.burn_in,
    };
    let c = compare_routings(net, &cfg)?;
    let u = &net.units()[0];
    let grid = ctx.sc.tolerances.corner_grid.unwrap_or(0.05);
    let support = verify_corner_support(net, u.q_hdv, u.q_crv, grid)?;
    let row = Row::default()
        .put("p_star", c.stackelberg.p_star)
        .put("stackelberg_objective", c.stackelberg.objective)
        .put("degenerate", c.stackelberg.degenerate)
        .put("n_optima", c.stackelberg.optima.len())
        .put("stackelberg_hdv_time", c.stackelberg_hdv_time)
        .put("myopic_objective", c.myopic_objective)
        .put("myopic_hdv_time", c.myopic_hdv_time)
        .put("nash_exists", c.nash_exists)
        .put("cycle_period", c.cycle_period)
        .put("trivial", c.trivial)
        .put("corner_worst_margin", support.worst_margin)
        .put("corner_checked", support.checked);
    let summary = format!(
        "stackelberg: p* {}, objective {} vs myopic {}, nash {}",
        fmt_num(c.stackelberg.p_star),
        fmt_num(c.stackelberg.objective),
        fmt_num(c.myopic_objective),
        c.nash_exists
    );
    Ok(table(vec![row], summary))
}

fn lipschitz(ctx: &Ctx) -> Result<Table, CliError> {
    let net = &ctx.sc.network;
    let b = lipschitz_bound(
        &ctx.sc.strategy,
        net,
        &net.crv_sizes(),
        ctx.lipschitz_samples(),
        ctx.seed,
    )?;
    let row = Row::default()
        .put("bound", b.bound)
        .put("defined", b.defined)
        .put("k", b.k)
        .put("rho", b.rho)
        .put("gap", b.gap)
        .put("grad_norm", b.grad_norm)
        .put("hess_norm", b.hess_norm)
        .put("f_norm_max", b.f_norm_max)
        .put("q_norm_max", b.q_norm_max)
        .put("samples", b.samples)
        .put("skipped", b.skipped);
    Ok(table(
        vec![row],
        format!("lipschitz: bound {} (defined {})", fmt_num(b.bound), b.defined),
    ))
}

/// Fiber of the fleet link flow: from `fleet` route flows when given,
/// otherwise recovered from observed link flows.
fn fiber(ctx: &Ctx) -> Result<Table, CliError> {
    let (sc, net) = (ctx.sc, &ctx.sc.network);
    let phi = match (&sc.fleet, &sc.observed) {
        (Some(f), _) => net.apply_lambda(f),
        (None, Some(Observed::LinkFlows(a))) => {
            inverse_link_flows(&sc.strategy, a, net, &ctx.inverse())?.fleet_link_flow
        }
        _ => return Err(CliError::missing("fleet", "fleet route flows or observed link flows")),
    };
    let fb = route_fiber(net, &phi, None)?;
    let dim_ids: Vec<String> = (0..fb.basis.len()).map(|k| k.to_string()).collect();
    let lo: Vec<f64> = fb.bounds.iter().map(|b| b.0).collect();
    let hi: Vec<f64> = fb.bounds.iter().map(|b| b.1).collect();
    let row = Row::default()
        .put("dim", fb.basis.len())
        .put("unique", fb.unique)
        .put("residual", fb.residual)
        .vector("rep", &ctx.route_ids, &fb.representative)
        .vector("lower", &dim_ids, &lo)
        .vector("upper", &dim_ids, &hi);
    let summary = format!("fiber: dimension {}, unique {}", fb.basis.len(), fb.unique);
    Ok(table(vec![row], summary))
}

#[cfg(test)]
mod tests {
    use super::fmt_num;

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(9.5), "9.5");
        assert_eq!(fmt_num(12.2), "12.199999999999999");
        assert_eq!(fmt_num(100.0), "100");
        assert_eq!(fmt_num(-0.25), "-0.25");
        assert_eq!(fmt_num(1.5e20), "1.5e+20");
        assert_eq!(fmt_num(2e-7), "1.9999999999999999e-07");
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        for x in [0.1, 1.0 / 3.0, 12345.678, 1e-5, 6.02e23] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }
}

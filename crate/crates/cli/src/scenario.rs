//! Scenario documents: the JSON schema, validation into core types, and
//! serialization back.

use std::collections::HashMap;
use std::path::Path;

use fleet_core::dynamics::HdvModel;
use fleet_core::network::{Link, Numerics};
use fleet_core::{DelayFunction, FleetStrategy, Network};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::CliError;

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub links: Vec<LinkSpec>,
    pub routes: Vec<RouteSpec>,
    pub units: Vec<UnitSpec>,
    pub strategy: StrategySpec,
    /// HDV route flow used by `forward`, `certify` and as the initial
    /// state of `simulate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hdv: Option<Vec<f64>>,
    /// Fleet route flow checked by `certify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fleet: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed: Option<ObservedSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimulationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub to: Option<String>,
    pub delay: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub id: String,
    pub links: Vec<String>,
    /// Route-level delay; when any route has one, all must, and link
    /// delays are then unused.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delay: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSpec {
    pub origin: String,
    pub destination: String,
    pub q_hdv: f64,
    pub q_crv: f64,
    pub routes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_hdv: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_crv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservedSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_flows: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_flows: Option<Vec<f64>>,
    /// Treat route flows as rounded counts (discrete recovery).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub discrete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub days: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// `best_response` (default) or `logit`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_pg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forward_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_starts: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_dir: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_tie: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_distinct: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_dd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_vi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inverse_max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pd_rel: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corner_grid: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounding_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Observed {
    RouteFlows { flows: Vec<f64>, discrete: bool },
    LinkFlows(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub days: usize,
    pub mu: f64,
    pub model: HdvModel<f64>,
    pub burn_in: Option<usize>,
}

impl Default for Simulation {
    fn default() -> Self {
        Self {
            days: 200,
            mu: 0.2,
            model: HdvModel::BestResponse,
            burn_in: None,
        }
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub network: Network,
    pub strategy: FleetStrategy,
    pub hdv: Option<Vec<f64>>,
    pub fleet: Option<Vec<f64>>,
    pub observed: Option<Observed>,
    pub simulation: Simulation,
    pub tolerances: Tolerances,
    pub seed: u64,
}

pub fn parse_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<Scenario, CliError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| CliError::parse("malformed", "$", e.to_string()))?;
    match doc.get("schema") {
        Some(Value::Number(n)) if n.as_u64() == Some(SCHEMA as u64) => {}
        Some(v) => {
            return Err(CliError::parse(
                "schema_version",
                "schema",
                format!("unsupported schema {v}, expected {SCHEMA}"),
            ))
        }
        None => return Err(CliError::parse("schema_version", "schema", "missing schema version")),
    }
    let file: ScenarioFile =
        serde_json::from_value(doc).map_err(|e| CliError::parse("malformed", "$", e.to_string()))?;
    validate(&file)
}

fn non_negative(v: f64, field: impl FnOnce() -> String) -> Result<(), CliError> {
    if v >= 0.0 {
        Ok(())
    } else {
        Err(CliError::parse(
            "negative_flow",
            field(),
            format!("must be non-negative (found {v})"),
        ))
    }
}

fn flow_vector(v: &[f64], n: usize, field: &str, what: &str) -> Result<(), CliError> {
    if v.len() != n {
        return Err(CliError::parse(
            "dimension_mismatch",
            field,
            format!("expected {n} {what}, found {}", v.len()),
        ));
    }
    for (i, &x) in v.iter().enumerate() {
        non_negative(x, || format!("{field}[{i}]"))?;
    }
    Ok(())
}

fn index_ids<'a>(ids: impl Iterator<Item = &'a str>, field: &str) -> Result<HashMap<&'a str, usize>, CliError> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id, i).is_some() {
            return Err(CliError::parse(
                "duplicate_id",
                format!("{field}[{i}].id"),
                format!("id `{id}` is used twice"),
            ));
        }
    }
    Ok(map)
}

fn number(obj: &Map<String, Value>, key: &str, path: &str) -> Result<f64, CliError> {
    match obj.get(key) {
        Some(v) => v
            .as_f64()
            .ok_or_else(|| CliError::parse("invalid_value", format!("{path}.{key}"), "expected a number")),
        None => Err(CliError::parse(
            "missing_field",
            format!("{path}.{key}"),
            "required parameter",
        )),
    }
}

const DELAY_KEYS: &[(&str, &[&str])] = &[
    ("bpr", &["free_flow_time", "multiplier", "capacity", "exponent"]),
    ("affine", &["intercept", "slope"]),
    ("quadratic", &["intercept", "coefficient"]),
    ("webster", &["green_ratio", "saturation_flow", "cycle"]),
    ("cross_affine", &["intercept", "own_slope", "cross"]),
];

/// `ids` resolves cross-term references (links for link delays, routes
/// for route delays).
fn parse_delay(v: &Value, path: &str, ids: &HashMap<&str, usize>) -> Result<DelayFunction, CliError> {
    let obj = v
        .as_object()
        .ok_or_else(|| CliError::parse("malformed", path, "delay must be an object"))?;
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or_else(|| CliError::parse("missing_field", format!("{path}.type"), "delay type is required"))?;
    let Some((_, keys)) = DELAY_KEYS.iter().find(|(k, _)| *k == kind) else {
        let known: Vec<&str> = DELAY_KEYS.iter().map(|k| k.0).collect();
        return Err(CliError::parse(
            "unknown_delay",
            format!("{path}.type"),
            format!("unknown delay variant `{kind}` (known: {})", known.join(", ")),
        ));
    };
    for key in obj.keys() {
        if key != "type" && !keys.contains(&key.as_str()) {
            return Err(CliError::parse(
                "unknown_field",
                format!("{path}.{key}"),
                format!("not a `{kind}` parameter"),
            ));
        }
    }
    let n = |key| number(obj, key, path);
    Ok(match kind {
        "bpr" => DelayFunction::bpr(n("free_flow_time")?, n("multiplier")?, n("capacity")?, n("exponent")?),
        "affine" => DelayFunction::affine(n("intercept")?, n("slope")?),
        "quadratic" => DelayFunction::quadratic(n("intercept")?, n("coefficient")?),
        "webster" => DelayFunction::webster(n("green_ratio")?, n("saturation_flow")?, n("cycle")?),
        _ => {
            let mut cross = Vec::new();
            if let Some(list) = obj.get("cross") {
                let list = list
                    .as_array()
                    .ok_or_else(|| CliError::parse("malformed", format!("{path}.cross"), "expected a list"))?;
                for (i, item) in list.iter().enumerate() {
                    let p = format!("{path}.cross[{i}]");
                    let o = item
                        .as_object()
                        .ok_or_else(|| CliError::parse("malformed", p.clone(), "expected {\"id\", \"slope\"}"))?;
                    let id = o
                        .get("id")
                        .and_then(Value::as_str)
                        .ok_or_else(|| CliError::parse("missing_field", format!("{p}.id"), "cross term needs an id"))?;
                    let j = *ids.get(id).ok_or_else(|| {
                        CliError::parse("dangling_id", format!("{p}.id"), format!("unknown id `{id}`"))
                    })?;
                    cross.push((j, number(o, "slope", &p)?));
                }
            }
            DelayFunction::cross_affine(n("intercept")?, n("own_slope")?, cross)
        }
    })
}

fn delay_to_value(d: &DelayFunction, ids: &[&str]) -> Value {
    match d {
        DelayFunction::Bpr {
            free_flow_time,
            multiplier,
            capacity,
            exponent,
        } => json!({"type": "bpr", "free_flow_time": free_flow_time, "multiplier": multiplier,
                    "capacity": capacity, "exponent": exponent}),
        DelayFunction::Affine { intercept, slope } => json!({"type": "affine", "intercept": intercept, "slope": slope}),
        DelayFunction::Quadratic { intercept, coefficient } => {
            json!({"type": "quadratic", "intercept": intercept, "coefficient": coefficient})
        }
        DelayFunction::Webster {
            green_ratio,
            saturation_flow,
            cycle,
        } => json!({"type": "webster", "green_ratio": green_ratio, "saturation_flow": saturation_flow, "cycle": cycle}),
        DelayFunction::CrossAffine {
            intercept,
            own_slope,
            cross_slopes,
        } => {
            let cross: Vec<Value> = cross_slopes
                .iter()
                .map(|&(j, s)| json!({"id": ids[j], "slope": s}))
                .collect();
            json!({"type": "cross_affine", "intercept": intercept, "own_slope": own_slope, "cross": cross})
        }
    }
}

fn strategy_of(spec: &StrategySpec) -> Result<FleetStrategy, CliError> {
    match (&spec.preset, spec.lambda_hdv, spec.lambda_crv) {
        (Some(name), None, None) => FleetStrategy::preset(name).ok_or_else(|| {
            CliError::parse(
                "unknown_preset",
                "strategy.preset",
                format!("unknown preset `{name}` (known: {})", FleetStrategy::PRESETS.join(", ")),
            )
        }),
        (None, Some(h), Some(c)) => Ok(FleetStrategy::new(h, c)),
        _ => Err(CliError::parse(
            "invalid_strategy",
            "strategy",
            "give either `preset` or both `lambda_hdv` and `lambda_crv`",
        )),
    }
}

fn numerics_of(t: &Tolerances) -> Numerics<f64> {
    let d = Numerics::default();
    Numerics {
        rank_rel: t.rank_rel.unwrap_or(d.rank_rel),
        pd_rel: t.pd_rel.unwrap_or(d.pd_rel),
        fd_abs: t.fd_step.unwrap_or(d.fd_abs),
        fd_rel: t.fd_step.unwrap_or(d.fd_rel),
    }
}

pub fn validate(file: &ScenarioFile) -> Result<Scenario, CliError> {
    if file.links.is_empty() {
        return Err(CliError::parse("empty", "links", "at least one link is required"));
    }
    let link_ids = index_ids(file.links.iter().map(|l| l.id.as_str()), "links")?;
    let route_ids = index_ids(file.routes.iter().map(|r| r.id.as_str()), "routes")?;

    let mut b = Network::builder();
    for (i, l) in file.links.iter().enumerate() {
        let delay = parse_delay(&l.delay, &format!("links[{i}].delay"), &link_ids)?;
        b = b.push_link(Link {
            id: l.id.clone(),
            delay,
            from: l.from.clone(),
            to: l.to.clone(),
        });
    }
    for (i, r) in file.routes.iter().enumerate() {
        for (k, id) in r.links.iter().enumerate() {
            if !link_ids.contains_key(id.as_str()) {
                return Err(CliError::parse(
                    "dangling_id",
                    format!("routes[{i}].links[{k}]"),
                    format!("route `{}` references missing link `{id}`", r.id),
                ));
            }
        }
        b = b.route_owned(r.id.clone(), r.links.clone());
    }
    let with_delay = file.routes.iter().filter(|r| r.delay.is_some()).count();
    if with_delay > 0 {
        if with_delay != file.routes.len() {
            return Err(CliError::parse(
                "partial_route_delays",
                "routes",
                "either every route has a delay or none does",
            ));
        }
        let delays = file
            .routes
            .iter()
            .enumerate()
            .map(|(i, r)| {
                parse_delay(
                    r.delay.as_ref().expect("checked"),
                    &format!("routes[{i}].delay"),
                    &route_ids,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        b = b.route_delays(delays);
    }
    for (i, u) in file.units.iter().enumerate() {
        non_negative(u.q_hdv, || format!("units[{i}].q_hdv"))?;
        non_negative(u.q_crv, || format!("units[{i}].q_crv"))?;
        for (k, id) in u.routes.iter().enumerate() {
            if !route_ids.contains_key(id.as_str()) {
                return Err(CliError::parse(
                    "dangling_id",
                    format!("units[{i}].routes[{k}]"),
                    format!("unit references missing route `{id}`"),
                ));
            }
        }
        b = b.unit_owned(
            u.origin.clone(),
            u.destination.clone(),
            u.q_hdv,
            u.q_crv,
            u.routes.clone(),
        );
    }
    let tolerances = file.tolerances.clone().unwrap_or_default();
    let network = b.numerics(numerics_of(&tolerances)).build()?;
    let (n_routes, n_links) = (network.n_routes(), network.n_links());

    let strategy = strategy_of(&file.strategy)?;
    if let Some(h) = &file.hdv {
        flow_vector(h, n_routes, "hdv", "route flows")?;
    }
    if let Some(f) = &file.fleet {
        flow_vector(f, n_routes, "fleet", "route flows")?;
    }
    let observed = match &file.observed {
        None => None,
        Some(o) => match (&o.route_flows, &o.link_flows) {
            (Some(q), None) => {
                flow_vector(q, n_routes, "observed.route_flows", "route flows")?;
                Some(Observed::RouteFlows {
                    flows: q.clone(),
                    discrete: o.discrete,
                })
            }
            (None, Some(a)) => {
                flow_vector(a, n_links, "observed.link_flows", "link flows")?;
                if o.discrete {
                    return Err(CliError::parse(
                        "invalid_value",
                        "observed.discrete",
                        "only applies to route flows",
                    ));
                }
                Some(Observed::LinkFlows(a.clone()))
            }
            _ => {
                return Err(CliError::parse(
                    "observed_exclusive",
                    "observed",
                    "give exactly one of `route_flows` and `link_flows`",
                ))
            }
        },
    };
    let simulation = simulation_of(file.simulation.as_ref())?;
    Ok(Scenario {
        name: file.name.clone(),
        network,
        strategy,
        hdv: file.hdv.clone(),
        fleet: file.fleet.clone(),
        observed,
        simulation,
        tolerances,
        seed: file.seed.unwrap_or(0),
    })
}

fn simulation_of(spec: Option<&SimulationSpec>) -> Result<Simulation, CliError> {
    let mut sim = Simulation::default();
    let Some(s) = spec else { return Ok(sim) };
    if let Some(d) = s.days {
        if d == 0 {
            return Err(CliError::parse(
                "invalid_value",
                "simulation.days",
                "must be at least 1",
            ));
        }
        sim.days = d;
    }
    if let Some(mu) = s.mu {
        if !(0.0..=1.0).contains(&mu) {
            return Err(CliError::parse(
                "invalid_value",
                "simulation.mu",
                format!("{mu} outside [0, 1]"),
            ));
        }
        sim.mu = mu;
    }
    sim.model = match (s.model.as_deref(), s.theta) {
        (None | Some("best_response"), None) => HdvModel::BestResponse,
        (Some("logit"), Some(theta)) if theta > 0.0 => HdvModel::Logit { theta },
        (Some("logit"), _) => {
            return Err(CliError::parse(
                "invalid_value",
                "simulation.theta",
                "logit needs a positive theta",
            ))
        }
        (None | Some("best_response"), Some(_)) => {
            return Err(CliError::parse(
                "invalid_value",
                "simulation.theta",
                "theta only applies to the logit model",
            ))
        }
        (Some(other), _) => {
            return Err(CliError::parse(
                "invalid_value",
                "simulation.model",
                format!("unknown model `{other}` (known: best_response, logit)"),
            ))
        }
    };
    sim.burn_in = s.burn_in;
    Ok(sim)
}

impl Scenario {
    /// The document form; `validate(&s.to_file()) == s`.
    pub fn to_file(&self) -> ScenarioFile {
        let net = &self.network;
        let link_ids: Vec<&str> = net.links().iter().map(|l| l.id.as_str()).collect();
        let route_ids: Vec<&str> = net.routes().iter().map(|r| r.id.as_str()).collect();
        let links = net
            .links()
            .iter()
            .map(|l| LinkSpec {
                id: l.id.clone(),
                from: l.from.clone(),
                to: l.to.clone(),
                delay: delay_to_value(&l.delay, &link_ids),
            })
            .collect();
        let routes = net
            .routes()
            .iter()
            .enumerate()
            .map(|(r, route)| RouteSpec {
                id: route.id.clone(),
                links: route.links.iter().map(|&j| link_ids[j].to_string()).collect(),
                delay: net.route_delays().map(|d| delay_to_value(&d[r], &route_ids)),
            })
            .collect();
        let units = net
            .units()
            .iter()
            .map(|u| UnitSpec {
                origin: u.origin.clone(),
                destination: u.destination.clone(),
                q_hdv: u.q_hdv,
                q_crv: u.q_crv,
                routes: u.routes.iter().map(|&r| route_ids[r].to_string()).collect(),
            })
            .collect();
        let strategy = match self.strategy.preset_name() {
            Some(p) => StrategySpec {
                preset: Some(p.to_string()),
                lambda_hdv: None,
                lambda_crv: None,
            },
            None => StrategySpec {
                preset: None,
                lambda_hdv: Some(self.strategy.lambda_hdv),
                lambda_crv: Some(self.strategy.lambda_crv),
            },
        };
        let observed = self.observed.as_ref().map(|o| match o {
            Observed::RouteFlows { flows, discrete } => ObservedSpec {
                route_flows: Some(flows.clone()),
                link_flows: None,
                discrete: *discrete,
            },
            Observed::LinkFlows(a) => ObservedSpec {
                route_flows: None,
                link_flows: Some(a.clone()),
                discrete: false,
            },
        });
        let sim = &self.simulation;
        let (model, theta) = match sim.model {
            HdvModel::BestResponse => ("best_response", None),
            HdvModel::Logit { theta } => ("logit", Some(theta)),
        };
        ScenarioFile {
            schema: SCHEMA,
            name: self.name.clone(),
            links,
            routes,
            units,
            strategy,
            hdv: self.hdv.clone(),
            fleet: self.fleet.clone(),
            observed,
            simulation: Some(SimulationSpec {
                days: Some(sim.days),
                mu: Some(sim.mu),
                model: Some(model.to_string()),
                theta,
                burn_in: sim.burn_in,
            }),
            tolerances: (self.tolerances != Tolerances::default()).then(|| self.tolerances.clone()),
            seed: Some(self.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": 1,
        "links": [{"id": "a", "delay": {"type": "affine", "intercept": 1, "slope": 1}},
                  {"id": "b", "delay": {"type": "affine", "intercept": 2, "slope": 1}}],
        "routes": [{"id": "r1", "links": ["a"]}, {"id": "r2", "links": ["b"]}],
        "units": [{"origin": "O", "destination": "D", "q_hdv": 10, "q_crv": 5, "routes": ["r1", "r2"]}],
        "strategy": {"preset": "selfish"}
    }"#;

    fn edit(f: impl FnOnce(&mut Value)) -> String {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        f(&mut v);
        v.to_string()
    }

    #[test]
    fn minimal_parses() {
        let s = parse_str(MINIMAL).unwrap();
        assert_eq!(s.network.n_routes(), 2);
        assert_eq!(s.strategy, FleetStrategy::selfish());
        assert_eq!(validate(&s.to_file()).unwrap(), s);
    }

    #[test]
    fn error_codes_name_fields() {
        let e = parse_str(&edit(|v| v["units"][0]["q_crv"] = json!(-5))).unwrap_err();
        assert_eq!((e.code, e.field.as_deref()), ("negative_flow", Some("units[0].q_crv")));
        let e = parse_str(&edit(|v| v["routes"][1]["links"][0] = json!("z"))).unwrap_err();
        assert_eq!(
            (e.code, e.field.as_deref()),
            ("dangling_id", Some("routes[1].links[0]"))
        );
        let e = parse_str(&edit(|v| v["links"][0]["delay"]["type"] = json!("cubic"))).unwrap_err();
        assert_eq!(
            (e.code, e.field.as_deref()),
            ("unknown_delay", Some("links[0].delay.type"))
        );
        let e = parse_str(&edit(|v| v["schema"] = json!(2))).unwrap_err();
        assert_eq!(e.code, "schema_version");
        let e = parse_str("{ not json").unwrap_err();
        assert_eq!(e.code, "malformed");
        let e = parse_str(&edit(|v| v["strategy"] = json!({"preset": "greedy"}))).unwrap_err();
        assert_eq!(e.code, "unknown_preset");
        let e = parse_str(&edit(|v| {
            v["observed"] = json!({"route_flows": [1, 2], "link_flows": [1, 2]})
        }))
        .unwrap_err();
        assert_eq!(e.code, "observed_exclusive");
        let e = parse_str(&edit(|v| v["hdv"] = json!([1, 2, 3]))).unwrap_err();
        assert_eq!((e.code, e.field.as_deref()), ("dimension_mismatch", Some("hdv")));
    }
}

//! Scenario files: a flat, strict `key = value` format describing one
//! run — initial positions, gains, integration settings, obstacles.
//!
//! Vector literals are `[a, b, c]`; `#` starts a comment; unknown or
//! duplicate keys are errors so a typo cannot silently change the
//! physics. Every admissibility condition is checked when parsing
//! completes and reported by name with the offending line where one
//! exists.

use crate::control::CarrierPolicy;
use crate::core::{validate, Params, Vector, WorldState};
use crate::safety::{barrier, CbfConfig, Obstacle};
use crate::sim::{ControllerKind, Integrator, SafetySetup, SimConfig};
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

/// A parsed, not-yet-validated scenario description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub dim: usize,
    pub x_c: Vector,
    pub x_p: Vector,
    pub x_t: Vector,
    pub params: Params,
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub carrier_policy: CarrierPolicy,
    pub planar_carrier: bool,
    pub cbf: CbfConfig,
    pub obstacles: Vec<Obstacle>,
    /// Default output path for trajectory emission; CLI flags override it.
    pub out: Option<String>,
}

impl Scenario {
    pub fn initial_state(&self) -> WorldState {
        WorldState::initial(self.x_c.clone(), self.x_p.clone(), self.x_t.clone())
    }

    pub fn sim_config(&self) -> SimConfig {
        self.sim_config_with(ControllerKind::Equilibrium)
    }

    pub fn sim_config_with(&self, controller: ControllerKind) -> SimConfig {
        SimConfig {
            dt: self.dt,
            t_end: self.t_end,
            integrator: self.integrator,
            carrier_policy: self.carrier_policy,
            planar_carrier: self.planar_carrier,
            safety: (!self.obstacles.is_empty()).then(|| SafetySetup {
                cbf: self.cbf,
                obstacles: self.obstacles.clone(),
            }),
            controller,
        }
    }
}

/// A named admissibility failure, with the offending line when one key is
/// responsible.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticIssue {
    pub code: String,
    pub detail: String,
    pub line: Option<usize>,
}

impl std::fmt::Display for SemanticIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.line {
            Some(n) => write!(f, "{} (line {n}): {}", self.code, self.detail),
            None => write!(f, "{}: {}", self.code, self.detail),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("invalid scenario:\n{}", .issues.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Semantic { issues: Vec<SemanticIssue> },
}

/// Check every semantic condition of a scenario. Empty result = valid.
pub fn check_scenario(s: &Scenario) -> Vec<SemanticIssue> {
    check_with_lines(s, &HashMap::new())
}

fn check_with_lines(s: &Scenario, lines: &HashMap<&'static str, usize>) -> Vec<SemanticIssue> {
    let at = |key: &str| lines.get(key).copied();
    let mut issues = Vec::new();
    let mut push = |code: &str, detail: String, line: Option<usize>| {
        issues.push(SemanticIssue {
            code: code.to_string(),
            detail,
            line,
        })
    };

    if s.dim < 2 {
        push("dim.at_least_two", format!("got {}", s.dim), at("dim"));
    }
    for (key, v) in [("x_c", &s.x_c), ("x_p", &s.x_p), ("x_t", &s.x_t)] {
        if v.dim() != s.dim {
            push(
                "dimension_mismatch",
                format!("{key} has {} components, dim = {}", v.dim(), s.dim),
                at(key),
            );
        }
    }

    let line_of_violation = |code: &str| match code {
        "params.b_gt_1" => at("b"),
        "params.bc_lt_eta" => at("eta"),
        "initial.carrier_target_distance_ge_eta" => at("x_t"),
        "initial.coincident_start" => at("x_p"),
        _ => None,
    };
    for v in validate(&s.params, &s.initial_state()).violations() {
        push(v.code(), v.to_string(), line_of_violation(v.code()));
    }

    if !(s.dt > 0.0 && s.dt.is_finite()) {
        push("sim.dt_positive", format!("got {}", s.dt), at("dt"));
    }
    if !(s.t_end > 0.0 && s.t_end.is_finite()) {
        push("sim.t_end_positive", format!("got {}", s.t_end), at("t_end"));
    }

    if s.planar_carrier {
        if s.dim != 3 {
            push(
                "planar.dim_3",
                format!("planar carrier needs dim = 3, got {}", s.dim),
                at("planar_carrier"),
            );
        } else if s.x_t.dim() == 3 {
            // The carrier closes only the in-plane distance, so the
            // threshold is reachable only if the target height stays
            // within it.
            let height = s.x_t.0[2].abs();
            if height > s.params.bc() {
                push(
                    "planar.target_height_le_bc",
                    format!("|target height| = {height} exceeds b*c = {}", s.params.bc()),
                    at("x_t"),
                );
            }
        }
    }

    if !(s.cbf.alpha > 0.0 && s.cbf.alpha.is_finite()) {
        push("cbf.alpha_positive", format!("got {}", s.cbf.alpha), at("cbf_alpha"));
    }
    if !(s.cbf.margin >= 0.0 && s.cbf.margin.is_finite()) {
        push(
            "cbf.margin_nonnegative",
            format!("got {}", s.cbf.margin),
            at("cbf_margin"),
        );
    }
    for (i, obs) in s.obstacles.iter().enumerate() {
        if !(obs.radius > 0.0 && obs.radius.is_finite()) {
            push(
                "obstacle.radius_positive",
                format!("obstacle {i} has radius {}", obs.radius),
                at("obstacle"),
            );
            continue;
        }
        if obs.center.dim() != s.dim {
            push(
                "obstacle.dimension_mismatch",
                format!("obstacle {i} center has {} components", obs.center.dim()),
                at("obstacle"),
            );
            continue;
        }
        for (who, x) in [("carrier", &s.x_c), ("passenger", &s.x_p)] {
            if x.dim() == s.dim && barrier(x, obs, s.cbf.margin).0 <= 0.0 {
                push(
                    "obstacle.start_inside",
                    format!("{who} starts inside inflated obstacle {i}"),
                    at("obstacle"),
                );
            }
        }
    }

    issues
}

struct RawEntry {
    value: String,
    line: usize,
}

/// Parse and validate a scenario file.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    const KNOWN: &[&str] = &[
        "dim", "x_c", "x_p", "x_t", "k_c", "k_p", "b", "c", "d", "eta", "eps_sep", "dt",
        "t_end", "integrator", "carrier_policy", "planar_carrier", "cbf_alpha", "cbf_margin",
        "obstacle", "out",
    ];
    let syntax = |line: usize, msg: String| ScenarioError::Syntax { line, msg };

    let mut entries: HashMap<&'static str, RawEntry> = HashMap::new();
    let mut obstacles_raw: Vec<RawEntry> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(lineno, format!("expected `key = value`, got {line:?}")))?;
        let key = key.trim();
        let value = value.trim().to_string();
        let known = KNOWN
            .iter()
            .find(|k| **k == key)
            .ok_or_else(|| syntax(lineno, format!("unknown key {key:?}")))?;
        if value.is_empty() {
            return Err(syntax(lineno, format!("empty value for {key:?}")));
        }
        let entry = RawEntry { value, line: lineno };
        if *known == "obstacle" {
            obstacles_raw.push(entry);
        } else if entries.insert(known, entry).is_some() {
            return Err(syntax(lineno, format!("duplicate key {key:?}")));
        }
    }

    let parse_f64 = |e: &RawEntry| -> Result<f64, ScenarioError> {
        e.value
            .parse::<f64>()
            .map_err(|err| syntax(e.line, format!("bad number {:?}: {err}", e.value)))
    };
    let parse_vector = |e: &RawEntry| -> Result<Vector, ScenarioError> {
        let inner = e
            .value
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .ok_or_else(|| syntax(e.line, format!("expected `[a, b, ...]`, got {:?}", e.value)))?;
        let comps = inner
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|err| syntax(e.line, format!("bad component {:?}: {err}", s.trim())))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if comps.len() < 2 {
            return Err(syntax(e.line, "vector needs at least two components".into()));
        }
        Ok(Vector(comps))
    };

    let mut missing = Vec::new();
    let mut lines: HashMap<&'static str, usize> = HashMap::new();
    for (key, entry) in &entries {
        lines.insert(key, entry.line);
    }
    if let Some(e) = obstacles_raw.first() {
        lines.insert("obstacle", e.line);
    }

    macro_rules! required {
        ($key:literal, $parser:expr) => {
            match entries.get($key) {
                Some(e) => Some($parser(e)?),
                None => {
                    missing.push($key);
                    None
                }
            }
        };
    }

    let dim_raw = match entries.get("dim") {
        Some(e) => Some(e.value.parse::<usize>().map_err(|err| {
            syntax(e.line, format!("bad dimension {:?}: {err}", e.value))
        })?),
        None => {
            missing.push("dim");
            None
        }
    };
    let x_c = required!("x_c", parse_vector);
    let x_p = required!("x_p", parse_vector);
    let x_t = required!("x_t", parse_vector);
    let k_c = required!("k_c", parse_f64);
    let k_p = required!("k_p", parse_f64);
    let b = required!("b", parse_f64);
    let c = required!("c", parse_f64);
    let d = required!("d", parse_f64);
    let eta = required!("eta", parse_f64);
    let dt = required!("dt", parse_f64);
    let t_end = required!("t_end", parse_f64);

    if !missing.is_empty() {
        return Err(ScenarioError::Semantic {
            issues: missing
                .iter()
                .map(|k| SemanticIssue {
                    code: "missing_key".to_string(),
                    detail: format!("required key {k:?} not set"),
                    line: None,
                })
                .collect(),
        });
    }

    let eps_sep = match entries.get("eps_sep") {
        Some(e) => parse_f64(e)?,
        None => crate::core::DEFAULT_EPS_SEP,
    };
    let integrator = match entries.get("integrator") {
        None => Integrator::Rk4,
        Some(e) => match e.value.as_str() {
            "euler" => Integrator::Euler,
            "rk4" => Integrator::Rk4,
            other => {
                return Err(syntax(
                    e.line,
                    format!("integrator must be `euler` or `rk4`, got {other:?}"),
                ))
            }
        },
    };
    let carrier_policy = match entries.get("carrier_policy") {
        None => CarrierPolicy::StopOnSeparation,
        Some(e) => match e.value.as_str() {
            "stop" => CarrierPolicy::StopOnSeparation,
            "continue_frozen" => CarrierPolicy::ContinueWithFrozenEtc,
            other => {
                return Err(syntax(
                    e.line,
                    format!("carrier_policy must be `stop` or `continue_frozen`, got {other:?}"),
                ))
            }
        },
    };
    let planar_carrier = match entries.get("planar_carrier") {
        None => false,
        Some(e) => match e.value.as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(syntax(
                    e.line,
                    format!("planar_carrier must be `true` or `false`, got {other:?}"),
                ))
            }
        },
    };
    let cbf_alpha = match entries.get("cbf_alpha") {
        Some(e) => parse_f64(e)?,
        None => CbfConfig::default().alpha,
    };
    let cbf_margin = match entries.get("cbf_margin") {
        Some(e) => parse_f64(e)?,
        None => CbfConfig::default().margin,
    };
    let out = entries.get("out").map(|e| e.value.clone());

    let dim = dim_raw.unwrap();
    let mut obstacles = Vec::new();
    for e in &obstacles_raw {
        let v = parse_vector(e)?;
        if v.dim() != dim + 1 {
            return Err(syntax(
                e.line,
                format!(
                    "obstacle needs {} components (center then radius), got {}",
                    dim + 1,
                    v.dim()
                ),
            ));
        }
        let mut comps = v.0;
        let radius = comps.pop().unwrap();
        obstacles.push(Obstacle {
            center: Vector(comps),
            radius,
        });
    }

    let mut params = Params::new(
        k_c.unwrap(),
        k_p.unwrap(),
        b.unwrap(),
        c.unwrap(),
        d.unwrap(),
        eta.unwrap(),
    );
    params.eps_sep = eps_sep;

    let scenario = Scenario {
        dim,
        x_c: x_c.unwrap(),
        x_p: x_p.unwrap(),
        x_t: x_t.unwrap(),
        params,
        dt: dt.unwrap(),
        t_end: t_end.unwrap(),
        integrator,
        carrier_policy,
        planar_carrier,
        cbf: CbfConfig {
            alpha: cbf_alpha,
            margin: cbf_margin,
        },
        obstacles,
        out,
    };

    let issues = check_with_lines(&scenario, &lines);
    if issues.is_empty() {
        Ok(scenario)
    } else {
        Err(ScenarioError::Semantic { issues })
    }
}

/// Render a scenario in canonical form; `parse_scenario` of the result
/// reproduces the scenario exactly.
pub fn render_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dim = {}", s.dim);
    let _ = writeln!(out, "x_c = {}", s.x_c);
    let _ = writeln!(out, "x_p = {}", s.x_p);
    let _ = writeln!(out, "x_t = {}", s.x_t);
    let _ = writeln!(out, "k_c = {}", s.params.k_c);
    let _ = writeln!(out, "k_p = {}", s.params.k_p);
    let _ = writeln!(out, "b = {}", s.params.b);
    let _ = writeln!(out, "c = {}", s.params.c);
    let _ = writeln!(out, "d = {}", s.params.d);
    let _ = writeln!(out, "eta = {}", s.params.eta);
    let _ = writeln!(out, "eps_sep = {}", s.params.eps_sep);
    let _ = writeln!(out, "dt = {}", s.dt);
    let _ = writeln!(out, "t_end = {}", s.t_end);
    let _ = writeln!(
        out,
        "integrator = {}",
        match s.integrator {
            Integrator::Euler => "euler",
            Integrator::Rk4 => "rk4",
        }
    );
    let _ = writeln!(
        out,
        "carrier_policy = {}",
        match s.carrier_policy {
            CarrierPolicy::StopOnSeparation => "stop",
            CarrierPolicy::ContinueWithFrozenEtc => "continue_frozen",
        }
    );
    let _ = writeln!(out, "planar_carrier = {}", s.planar_carrier);
    let _ = writeln!(out, "cbf_alpha = {}", s.cbf.alpha);
    let _ = writeln!(out, "cbf_margin = {}", s.cbf.margin);
    for obs in &s.obstacles {
        let mut comps: Vec<String> = obs.center.0.iter().map(|x| x.to_string()).collect();
        comps.push(obs.radius.to_string());
        let _ = writeln!(out, "obstacle = [{}]", comps.join(", "));
    }
    if let Some(path) = &s.out {
        let _ = writeln!(out, "out = {path}");
    }
    out
}

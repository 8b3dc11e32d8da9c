//! Scenario definitions: which group, which element template, which primes,
//! which Weyl elements, and which verification suites to run.
//!
//! Scenarios live in a flat TOML file with one `[scenario.<id>]` table each;
//! the same format backs both the shipped presets and user config files.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Deserialize;

use lusztig_core::chevalley::{ChevError, GroupKind, GroupSpec, Twist};
use lusztig_core::coxeter::{
    enumerate_group, has_full_twisted_support, CoxeterDatum, CoxeterError, DiagramAutomorphism,
    Family, WeylElement,
};
use lusztig_core::matfq::{smallest_irreducible, MatError, MatrixFq};

pub const PRESETS: &str = include_str!("../presets.toml");

/// Default ceiling on the size of any single enumeration sweep (flags of one
/// group, one unipotent subgroup, one torus-times-unipotent slice).
pub const DEFAULT_SWEEP_CAP: u128 = 10_000_000;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("scenario '{id}': {msg}")]
    Invalid { id: String, msg: String },
    #[error("no scenario named '{0}'")]
    Unknown(String),
    #[error(transparent)]
    Coxeter(#[from] CoxeterError),
    #[error(transparent)]
    Chev(#[from] ChevError),
}

fn invalid(id: &str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        id: id.to_string(),
        msg: msg.into(),
    }
}

/// Names of the verification suites the harness knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SuiteName {
    /// Fitted unipotent-slice counts: monic of degree l(w) for full twisted
    /// support, and degree drop for twisted translates.
    Lemma33,
    /// Exact bridge between unipotent-slice counts and Hecke coefficients.
    Kawanaka34,
    /// Exact orbit count identity relating flag counts and class cell counts.
    Lemma41,
    /// Fitted degrees of per-orbit flag counts and geometric class cells.
    Dims21,
    /// Leading coefficient 1 for full-support fitted flag counts, including
    /// split rational orbits and their cell-count sums.
    Theorem42,
    /// Symbolic Hecke algebra properties: associativity, specialization at
    /// t = 1, and monic twisted sums.
    HeckeProps,
}

impl SuiteName {
    pub const ALL: [SuiteName; 6] = [
        SuiteName::Lemma33,
        SuiteName::Kawanaka34,
        SuiteName::Lemma41,
        SuiteName::Dims21,
        SuiteName::Theorem42,
        SuiteName::HeckeProps,
    ];

    pub fn token(self) -> &'static str {
        match self {
            SuiteName::Lemma33 => "lemma33",
            SuiteName::Kawanaka34 => "kawanaka34",
            SuiteName::Lemma41 => "lemma41",
            SuiteName::Dims21 => "dims21",
            SuiteName::Theorem42 => "theorem42",
            SuiteName::HeckeProps => "hecke-props",
        }
    }

    /// True for suites that need a matrix group and an element template.
    pub fn needs_group(self) -> bool {
        !matches!(self, SuiteName::HeckeProps)
    }
}

impl FromStr for SuiteName {
    type Err = String;

    fn from_str(s: &str) -> Result<SuiteName, String> {
        SuiteName::ALL
            .into_iter()
            .find(|n| n.token() == s)
            .ok_or_else(|| format!("unknown suite '{s}'"))
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// The matrix-group shape of a scenario, instantiated per prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GroupShape {
    pub kind: GroupKind,
    pub n: usize,
    pub twist: Twist,
}

impl GroupShape {
    pub fn spec(&self, p: u64) -> Result<GroupSpec, ChevError> {
        GroupSpec::new(self.kind, self.n, p, self.twist)
    }
}

/// How an element of the group is produced at each prime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ElementTemplate {
    /// Fixed diagonal entries, reduced mod p; skipped when entries collide
    /// or vanish.
    Diagonal(Vec<i64>),
    /// A single full Jordan block with the given eigenvalue.
    Jordan(i64),
    /// Companion matrix of the monic polynomial with these non-leading
    /// coefficients, listed from the constant term up.
    Companion(Vec<i64>),
    /// Companion matrix of the smallest irreducible monic polynomial of the
    /// given degree at each prime, so the element stays semisimple without
    /// rational eigenvalues everywhere.
    Nonsplit(usize),
    /// A verbatim matrix literal, rows split by semicolons.
    Literal(String),
}

impl ElementTemplate {
    pub fn parse(s: &str) -> Result<ElementTemplate, String> {
        let (head, rest) = s
            .split_once(':')
            .ok_or_else(|| format!("template '{s}' has no ':'"))?;
        let ints = |rest: &str| -> Result<Vec<i64>, String> {
            rest.split(',')
                .map(|t| t.trim().parse::<i64>().map_err(|e| format!("{e} in '{s}'")))
                .collect()
        };
        match head {
            "diag" => Ok(ElementTemplate::Diagonal(ints(rest)?)),
            "jordan" => {
                let v = ints(rest)?;
                if v.len() != 1 {
                    return Err(format!("jordan template takes one eigenvalue, got '{s}'"));
                }
                Ok(ElementTemplate::Jordan(v[0]))
            }
            "companion" => Ok(ElementTemplate::Companion(ints(rest)?)),
            "nonsplit" => rest
                .trim()
                .parse::<usize>()
                .map(ElementTemplate::Nonsplit)
                .map_err(|e| format!("{e} in '{s}'")),
            "literal" => Ok(ElementTemplate::Literal(rest.trim().to_string())),
            _ => Err(format!("unknown template kind '{head}'")),
        }
    }

    /// The matrix at prime p, or a human-readable reason this prime is
    /// skipped for this template.
    pub fn realize(&self, shape: &GroupShape, p: u64) -> Result<MatrixFq, String> {
        let n = shape.n;
        let reduce = |v: i64| -> u64 { v.rem_euclid(p as i64) as u64 };
        let m = match self {
            ElementTemplate::Diagonal(entries) => {
                if entries.len() != n {
                    return Err(format!(
                        "diagonal template has {} entries, group needs {n}",
                        entries.len()
                    ));
                }
                let vals: Vec<u64> = entries.iter().map(|&v| reduce(v)).collect();
                if vals.iter().any(|&v| v == 0) {
                    return Err(format!("a diagonal entry vanishes mod {p}"));
                }
                for i in 0..n {
                    for j in 0..i {
                        if vals[i] == vals[j] {
                            return Err(format!("diagonal entries collide mod {p}"));
                        }
                    }
                }
                MatrixFq::diagonal(p, &vals).map_err(|e| e.to_string())?
            }
            ElementTemplate::Jordan(eigenvalue) => {
                let lambda = reduce(*eigenvalue);
                if lambda == 0 {
                    return Err(format!("jordan eigenvalue vanishes mod {p}"));
                }
                MatrixFq::from_fn(p, n, |i, j| {
                    if i == j {
                        lambda
                    } else if j == i + 1 {
                        1
                    } else {
                        0
                    }
                })
                .map_err(|e: MatError| e.to_string())?
            }
            ElementTemplate::Companion(coeffs) => {
                if coeffs.len() != n {
                    return Err(format!(
                        "companion template has {} coefficients, group needs {n}",
                        coeffs.len()
                    ));
                }
                let mut c: Vec<u64> = coeffs.iter().map(|&v| reduce(v)).collect();
                if c[0] == 0 {
                    return Err(format!("companion constant term vanishes mod {p}"));
                }
                c.push(1);
                lusztig_core::matfq::PolyFp::from_coeffs(p, c)
                    .companion()
                    .map_err(|e| e.to_string())?
            }
            ElementTemplate::Nonsplit(degree) => {
                if *degree != n {
                    return Err(format!(
                        "nonsplit template degree {degree} does not match group size {n}"
                    ));
                }
                smallest_irreducible(p, *degree)
                    .and_then(|f| f.companion())
                    .map_err(|e| e.to_string())?
            }
            ElementTemplate::Literal(text) => {
                MatrixFq::parse_literal(p, text).map_err(|e| e.to_string())?
            }
        };
        if !m.is_invertible() {
            return Err(format!("template is singular mod {p}"));
        }
        let spec = shape.spec(p).map_err(|e| e.to_string())?;
        if !spec.contains(&m) {
            return Err(format!(
                "template lies outside {} (determinant {})",
                spec.label(),
                m.det()
            ));
        }
        Ok(m)
    }
}

impl fmt::Display for ElementTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[i64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            ElementTemplate::Diagonal(v) => write!(f, "diag:{}", join(v)),
            ElementTemplate::Jordan(e) => write!(f, "jordan:{e}"),
            ElementTemplate::Companion(v) => write!(f, "companion:{}", join(v)),
            ElementTemplate::Nonsplit(d) => write!(f, "nonsplit:{d}"),
            ElementTemplate::Literal(s) => write!(f, "literal:{s}"),
        }
    }
}

/// Which Weyl elements the fitted-degree suites range over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WeylSelection {
    All,
    FullTwistedSupport,
    Explicit(Vec<String>),
}

impl WeylSelection {
    pub fn resolve(
        &self,
        datum: &Arc<CoxeterDatum>,
        twist: &DiagramAutomorphism,
    ) -> Result<Vec<WeylElement>, CoxeterError> {
        let all = enumerate_group(datum, datum.order())?;
        match self {
            WeylSelection::All => Ok(all),
            WeylSelection::FullTwistedSupport => {
                let mut out = Vec::new();
                for w in all {
                    if has_full_twisted_support(&w, twist)? {
                        out.push(w);
                    }
                }
                Ok(out)
            }
            WeylSelection::Explicit(words) => {
                words.iter().map(|s| WeylElement::parse(datum, s)).collect()
            }
        }
    }
}

/// One fully validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub group: Option<GroupShape>,
    pub family: Family,
    pub rank: usize,
    pub template: Option<ElementTemplate>,
    pub primes: Vec<u64>,
    /// Primes at which full twisted-class orbits are enumerated; a subset of
    /// `primes` chosen so the orbits fit the cap.
    pub orbit_primes: Vec<u64>,
    pub weyl: WeylSelection,
    pub suites: Vec<SuiteName>,
    /// Run the torus-times-unipotent sweep and fit geometric class cells.
    pub fit_geometric: bool,
    /// The template's geometric class is expected to split into several
    /// rational orbits, each fitted separately.
    pub split_orbits: bool,
    /// Record fitted-claim outcomes without asserting them, for negative
    /// controls that deliberately violate the regularity hypothesis.
    pub report_only: bool,
    pub orbit_cap: usize,
    pub sweep_cap: u128,
}

impl Scenario {
    pub fn datum(&self) -> Result<Arc<CoxeterDatum>, CoxeterError> {
        CoxeterDatum::shared(self.family, self.rank)
    }

    pub fn diagram_twist(&self) -> Result<DiagramAutomorphism, CoxeterError> {
        let datum = self.datum()?;
        match self.group {
            Some(shape) if shape.twist == Twist::Flip => DiagramAutomorphism::flip(&datum),
            _ => Ok(DiagramAutomorphism::identity(&datum)),
        }
    }

    /// The template matrix at p, or the reason this prime is skipped.
    pub fn element_at(&self, p: u64) -> Result<MatrixFq, String> {
        let shape = self.group.as_ref().ok_or("scenario has no matrix group")?;
        let template = self
            .template
            .as_ref()
            .ok_or("scenario has no element template")?;
        template.realize(shape, p)
    }

    /// Primes whose template realizes, paired with the skip reasons of the
    /// others.
    pub fn valid_primes(&self) -> (Vec<u64>, Vec<(u64, String)>) {
        let mut good = Vec::new();
        let mut skipped = Vec::new();
        for &p in &self.primes {
            match self.element_at(p) {
                Ok(_) => good.push(p),
                Err(reason) => skipped.push((p, reason)),
            }
        }
        (good, skipped)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    group: Option<String>,
    n: Option<usize>,
    #[serde(default)]
    twist: Option<String>,
    coxeter: Option<String>,
    template: Option<String>,
    #[serde(default)]
    primes: Vec<u64>,
    orbit_primes: Option<Vec<u64>>,
    weyl: Option<toml::Value>,
    suites: Vec<String>,
    #[serde(default)]
    fit_geometric: bool,
    #[serde(default)]
    split_orbits: bool,
    #[serde(default)]
    report_only: bool,
    orbit_cap: Option<usize>,
    sweep_cap: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct RawConfig {
    scenario: BTreeMap<String, RawScenario>,
}

fn parse_weyl(id: &str, value: Option<&toml::Value>) -> Result<WeylSelection, ScenarioError> {
    match value {
        None => Ok(WeylSelection::All),
        Some(toml::Value::String(s)) => match s.as_str() {
            "all" => Ok(WeylSelection::All),
            "full-support" => Ok(WeylSelection::FullTwistedSupport),
            other => Err(invalid(
                id,
                format!("weyl must be 'all', 'full-support', or a list of words, got '{other}'"),
            )),
        },
        Some(toml::Value::Array(items)) => {
            if items.is_empty() {
                return Err(invalid(id, "weyl selection is empty"));
            }
            let mut words = Vec::new();
            for item in items {
                match item {
                    toml::Value::String(s) => words.push(s.clone()),
                    other => {
                        return Err(invalid(
                            id,
                            format!("weyl entries must be strings, got {other}"),
                        ))
                    }
                }
            }
            Ok(WeylSelection::Explicit(words))
        }
        Some(other) => Err(invalid(id, format!("unsupported weyl value {other}"))),
    }
}

fn build_scenario(id: &str, raw: RawScenario) -> Result<Scenario, ScenarioError> {
    let suites: Vec<SuiteName> = raw
        .suites
        .iter()
        .map(|s| SuiteName::from_str(s).map_err(|e| invalid(id, e)))
        .collect::<Result<_, _>>()?;
    if suites.is_empty() {
        return Err(invalid(id, "no suites listed"));
    }

    let twist = match raw.twist.as_deref() {
        None | Some("none") => Twist::Untwisted,
        Some("flip") => Twist::Flip,
        Some(other) => return Err(invalid(id, format!("unknown twist '{other}'"))),
    };

    let group = match (&raw.group, raw.n) {
        (Some(kind), Some(n)) => {
            let kind = match kind.as_str() {
                "GL" => GroupKind::GeneralLinear,
                "SL" => GroupKind::SpecialLinear,
                other => return Err(invalid(id, format!("unknown group kind '{other}'"))),
            };
            Some(GroupShape { kind, n, twist })
        }
        (None, None) => None,
        _ => return Err(invalid(id, "group and n must be given together")),
    };

    let (family, rank) = match (&group, &raw.coxeter) {
        (Some(shape), None) => (Family::A, shape.n - 1),
        (None, Some(label)) => {
            let datum = CoxeterDatum::parse(label)?;
            (datum.family(), datum.rank())
        }
        (Some(_), Some(_)) => {
            return Err(invalid(
                id,
                "give either a matrix group or a coxeter label, not both",
            ))
        }
        (None, None) => {
            return Err(invalid(
                id,
                "scenario needs a matrix group or a coxeter label",
            ))
        }
    };

    let template = match &raw.template {
        Some(t) => Some(ElementTemplate::parse(t).map_err(|e| invalid(id, e))?),
        None => None,
    };

    let needs_group = suites.iter().any(|s| s.needs_group());
    if needs_group {
        if group.is_none() {
            return Err(invalid(id, "listed suites need a matrix group"));
        }
        if raw.primes.is_empty() {
            return Err(invalid(id, "prime list is empty"));
        }
        let counting_suites = suites.iter().any(|s| {
            matches!(
                s,
                SuiteName::Lemma41 | SuiteName::Dims21 | SuiteName::Theorem42
            )
        });
        if counting_suites && template.is_none() {
            return Err(invalid(id, "counting suites need an element template"));
        }
    }
    for &p in &raw.primes {
        if !lusztig_core::matfq::is_prime(p) {
            return Err(invalid(id, format!("{p} is not prime")));
        }
    }

    let orbit_primes = match raw.orbit_primes {
        Some(list) => {
            for p in &list {
                if !raw.primes.contains(p) {
                    return Err(invalid(
                        id,
                        format!("orbit prime {p} is not in the prime list"),
                    ));
                }
            }
            list
        }
        None => raw.primes.clone(),
    };

    let weyl = parse_weyl(id, raw.weyl.as_ref())?;

    let scenario = Scenario {
        id: id.to_string(),
        group,
        family,
        rank,
        template,
        primes: raw.primes,
        orbit_primes,
        weyl,
        suites,
        fit_geometric: raw.fit_geometric,
        split_orbits: raw.split_orbits,
        report_only: raw.report_only,
        orbit_cap: raw
            .orbit_cap
            .unwrap_or(lusztig_core::chevalley::DEFAULT_ORBIT_CAP),
        sweep_cap: raw.sweep_cap.map(u128::from).unwrap_or(DEFAULT_SWEEP_CAP),
    };

    // Resolve the Weyl selection now so malformed or empty selections fail
    // at load time, before any counting work.
    let datum = scenario.datum()?;
    let twist = scenario.diagram_twist()?;
    let resolved = scenario.weyl.resolve(&datum, &twist)?;
    if resolved.is_empty() {
        return Err(invalid(id, "weyl selection resolves to no elements"));
    }

    // Estimate the flag and unipotent sweeps up front: a scenario whose
    // every prime exceeds the cap is a configuration error.
    if let Some(shape) = &scenario.group {
        let mut any_fits = false;
        for &p in &scenario.primes {
            let spec = shape.spec(p)?;
            if spec.num_flags() <= scenario.sweep_cap {
                any_fits = true;
            }
        }
        if !any_fits && scenario.suites.iter().any(|s| s.needs_group()) {
            return Err(invalid(
                id,
                format!(
                    "every prime exceeds the sweep cap of {}",
                    scenario.sweep_cap
                ),
            ));
        }
    }

    Ok(scenario)
}

/// Parses a config file and validates every scenario in it.
pub fn load_config(text: &str) -> Result<Vec<Scenario>, ScenarioError> {
    let raw: RawConfig = toml::from_str(text)?;
    let mut out = Vec::new();
    for (id, entry) in raw.scenario {
        out.push(build_scenario(&id, entry)?);
    }
    Ok(out)
}

/// The shipped scenario presets.
pub fn presets() -> Vec<Scenario> {
    load_config(PRESETS).expect("shipped presets are valid")
}

/// Looks up scenarios by id, defaulting to the whole list.
pub fn select<'a>(
    scenarios: &'a [Scenario],
    ids: &[String],
) -> Result<Vec<&'a Scenario>, ScenarioError> {
    if ids.is_empty() {
        return Ok(scenarios.iter().collect());
    }
    ids.iter()
        .map(|id| {
            scenarios
                .iter()
                .find(|s| &s.id == id)
                .ok_or_else(|| ScenarioError::Unknown(id.clone()))
        })
        .collect()
}

//! The verification suites. Each suite turns one scenario into a batch of
//! report rows; `run_scenario` strings together every suite the scenario
//! lists.
//!
//! The engine memoizes the expensive exact counts (orbit enumerations, flag
//! sweeps, unipotent sweeps, torus-times-unipotent sweeps) per scenario run
//! and mirrors them through the optional disk cache, so suites that look at
//! the same numbers from different angles pay for them once.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::Instant;

use num_bigint::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use lusztig_core::chevalley::{
    geometric_class, is_regular, orbit, regular_centralizer_order, ChevError, GroupKind, GroupSpec,
    RegularityKind, Twist, TwistedClassOrbit,
};
use lusztig_core::counting::{
    class_cell_counts, count_geometric_cell, fit_polynomial, lusztig_cell_counts,
    twisted_regularity_certificate, unipotent_cell_counts, weyl_to_perm, ClassPredicate,
    CountError, PointCountSeries,
};
use lusztig_core::coxeter::{
    enumerate_group, has_full_twisted_support, CoxeterDatum, CoxeterError, DiagramAutomorphism,
    WeylElement,
};
use lusztig_core::hecke::{dm_sum, kawanaka_coefficient, HeckeElement};
use lusztig_core::matfq::MatrixFq;

use crate::cache::{get_or_compute, Cache};
use crate::report::{ReportRow, Status, VerificationReport};
use crate::scenario::{GroupShape, Scenario, SuiteName};

/// Knobs the command line can turn without editing the scenario itself.
#[derive(Debug, Default)]
pub struct RunOptions {
    pub cache: Option<Cache>,
    /// Replaces both the fitting primes and the orbit primes.
    pub primes: Option<Vec<u64>>,
    pub orbit_cap: Option<usize>,
    pub sweep_cap: Option<u128>,
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("suite {suite} needs a matrix group, scenario '{scenario}' has none")]
    NeedsGroup { suite: SuiteName, scenario: String },
    #[error(transparent)]
    Coxeter(#[from] CoxeterError),
    #[error(transparent)]
    Chev(#[from] ChevError),
}

/// Seed of the randomized associativity check, recorded in every report.
pub const ASSOCIATIVITY_SEED: u64 = 0x5765_796c;
const ASSOCIATIVITY_TRIALS: usize = 1000;

type Tally = BTreeMap<Vec<usize>, u128>;

/// Disk form of a Bruhat cell tally: pairs instead of a map, because JSON
/// keys must be strings.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellTally(Vec<(Vec<usize>, u128)>);

impl CellTally {
    fn from_map(m: &Tally) -> CellTally {
        CellTally(m.iter().map(|(k, v)| (k.clone(), *v)).collect())
    }

    fn into_map(self) -> Tally {
        self.0.into_iter().collect()
    }
}

/// Disk form of one enumerated twisted class with its cell tally.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct OrbitSummary {
    base: String,
    size: u128,
    centralizer: u128,
    cells: CellTally,
}

/// In-memory form of the same.
#[derive(Debug, Clone)]
struct OrbitInfo {
    base: MatrixFq,
    size: u128,
    centralizer: u128,
    cells: Arc<Tally>,
}

impl OrbitInfo {
    fn from_orbit(o: &TwistedClassOrbit) -> Result<(OrbitInfo, OrbitSummary), CountError> {
        let cells = class_cell_counts(o)?;
        let summary = OrbitSummary {
            base: o.base().to_string(),
            size: o.size(),
            centralizer: o.centralizer_order(),
            cells: CellTally::from_map(&cells),
        };
        let info = OrbitInfo {
            base: o.base().clone(),
            size: o.size(),
            centralizer: o.centralizer_order(),
            cells: Arc::new(cells),
        };
        Ok((info, summary))
    }

    fn from_summary(p: u64, s: OrbitSummary) -> Result<OrbitInfo, CountError> {
        Ok(OrbitInfo {
            base: MatrixFq::parse_literal(p, &s.base)?,
            size: s.size,
            centralizer: s.centralizer,
            cells: Arc::new(s.cells.into_map()),
        })
    }
}

fn word_label(w: &WeylElement) -> String {
    if w.is_identity() {
        "e".to_string()
    } else {
        w.to_string()
    }
}

fn points_label(series: &PointCountSeries) -> String {
    series
        .points()
        .map(|(p, c)| format!("{p}:{c}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Errors that mean "the run could not finish this check", as opposed to
/// "the claim is false".
fn is_resource_error(e: &CountError) -> bool {
    matches!(
        e,
        CountError::SweepCap { .. }
            | CountError::InsufficientPoints { .. }
            | CountError::Chev(ChevError::OrbitCap { .. })
            | CountError::Chev(ChevError::FlagCap { .. })
    )
}

struct Engine<'a> {
    sc: &'a Scenario,
    cache: Option<&'a Cache>,
    datum: Arc<CoxeterDatum>,
    twist: DiagramAutomorphism,
    elements: Vec<WeylElement>,
    selection: Vec<WeylElement>,
    full_support: Vec<WeylElement>,
    primes: Vec<u64>,
    orbit_primes: Vec<u64>,
    /// Primes of `primes` where the template realizes, with its matrix.
    templates: BTreeMap<u64, MatrixFq>,
    /// The rest of `primes`, with the reasons.
    skips: Vec<(u64, String)>,
    orbit_cap: usize,
    sweep_cap: u128,
    unipotent: HashMap<(u64, String), Arc<Tally>>,
    flags: HashMap<(u64, String), Arc<Tally>>,
    orbits: HashMap<u64, OrbitInfo>,
    orbit_lists: HashMap<u64, Arc<Vec<OrbitInfo>>>,
    geometric: HashMap<(u64, String), u128>,
    predicates: HashMap<u64, Arc<ClassPredicate>>,
    rows: Vec<ReportRow>,
    seeds: BTreeMap<String, u64>,
}

impl<'a> Engine<'a> {
    fn new(sc: &'a Scenario, opts: &'a RunOptions) -> Result<Engine<'a>, SuiteError> {
        let datum = sc.datum()?;
        let twist = sc.diagram_twist()?;
        let elements = enumerate_group(&datum, datum.order())?;
        let selection = sc.weyl.resolve(&datum, &twist)?;
        let mut full_support = Vec::new();
        for w in &elements {
            if has_full_twisted_support(w, &twist)? {
                full_support.push(w.clone());
            }
        }
        let (primes, orbit_primes) = match &opts.primes {
            Some(ps) => (ps.clone(), ps.clone()),
            None => (sc.primes.clone(), sc.orbit_primes.clone()),
        };
        let mut templates = BTreeMap::new();
        let mut skips = Vec::new();
        if sc.group.is_some() && sc.template.is_some() {
            for &p in &primes {
                match sc.element_at(p) {
                    Ok(m) => {
                        templates.insert(p, m);
                    }
                    Err(reason) => skips.push((p, reason)),
                }
            }
        }
        Ok(Engine {
            sc,
            cache: opts.cache.as_ref(),
            datum,
            twist,
            elements,
            selection,
            full_support,
            primes,
            orbit_primes,
            templates,
            skips,
            orbit_cap: opts.orbit_cap.unwrap_or(sc.orbit_cap),
            sweep_cap: opts.sweep_cap.unwrap_or(sc.sweep_cap),
            rows: Vec::new(),
            seeds: BTreeMap::new(),
            unipotent: HashMap::new(),
            flags: HashMap::new(),
            orbits: HashMap::new(),
            orbit_lists: HashMap::new(),
            geometric: HashMap::new(),
            predicates: HashMap::new(),
        })
    }

    fn run(&mut self, suite: SuiteName) -> Result<(), SuiteError> {
        match suite {
            SuiteName::Kawanaka34 => self.suite_bridge(),
            SuiteName::Lemma33 => self.suite_unipotent_fits(),
            SuiteName::Lemma41 => self.suite_orbit_identity(),
            SuiteName::Dims21 => self.suite_dimension_fits(),
            SuiteName::Theorem42 => self.suite_leading_terms(),
            SuiteName::HeckeProps => self.suite_hecke_props(),
        }
    }

    fn shape(&self, suite: SuiteName) -> Result<GroupShape, SuiteError> {
        self.sc.group.ok_or_else(|| SuiteError::NeedsGroup {
            suite,
            scenario: self.sc.id.clone(),
        })
    }

    fn push(&mut self, row: ReportRow) {
        self.rows.push(row);
    }

    fn row(
        &self,
        suite: SuiteName,
        check: impl Into<String>,
        anchor: &str,
        status: Status,
    ) -> ReportRow {
        ReportRow::new(&self.sc.id, suite.token(), check, anchor, status)
    }

    /// Pass or Fail for an asserted claim; Observed when the scenario only
    /// records outcomes.
    fn claim_status(&self, ok: bool) -> Status {
        if self.sc.report_only {
            Status::Observed
        } else if ok {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    fn error_row(
        &self,
        suite: SuiteName,
        check: impl Into<String>,
        anchor: &str,
        e: &CountError,
    ) -> ReportRow {
        let status = if is_resource_error(e) {
            Status::SkippedFatal
        } else if self.sc.report_only {
            Status::Observed
        } else {
            Status::Fail
        };
        self.row(suite, check, anchor, status).with("error", e)
    }

    // Memoized exact counts. Disk cache keys start with a format version
    // and the group label, which carries the kind, size, prime, and twist.

    fn unipotent_tally(
        &mut self,
        shape: GroupShape,
        p: u64,
        wprime: &WeylElement,
    ) -> Result<Arc<Tally>, CountError> {
        let key = (p, word_label(wprime));
        if let Some(t) = self.unipotent.get(&key) {
            return Ok(Arc::clone(t));
        }
        let spec = shape.spec(p)?;
        let cap = self.sweep_cap;
        let stored: CellTally = get_or_compute(
            self.cache,
            &["v1", "unipotent-cells", &spec.label(), &key.1],
            || unipotent_cell_counts(&spec, wprime, cap).map(|m| CellTally::from_map(&m)),
        )?;
        let tally = Arc::new(stored.into_map());
        self.unipotent.insert(key, Arc::clone(&tally));
        Ok(tally)
    }

    fn flag_tally(
        &mut self,
        shape: GroupShape,
        p: u64,
        h: &MatrixFq,
    ) -> Result<Arc<Tally>, CountError> {
        let key = (p, h.to_string());
        if let Some(t) = self.flags.get(&key) {
            return Ok(Arc::clone(t));
        }
        let spec = shape.spec(p)?;
        let cap = self.sweep_cap;
        let stored: CellTally = get_or_compute(
            self.cache,
            &["v1", "flag-cells", &spec.label(), &key.1],
            || lusztig_cell_counts(&spec, h, cap).map(|m| CellTally::from_map(&m)),
        )?;
        let tally = Arc::new(stored.into_map());
        self.flags.insert(key, Arc::clone(&tally));
        Ok(tally)
    }

    fn template_at(&self, p: u64) -> Result<MatrixFq, CountError> {
        self.templates
            .get(&p)
            .cloned()
            .ok_or_else(|| CountError::BadFamily(format!("template does not realize at {p}")))
    }

    fn orbit_info(&mut self, shape: GroupShape, p: u64) -> Result<OrbitInfo, CountError> {
        if let Some(info) = self.orbits.get(&p) {
            return Ok(info.clone());
        }
        let h = self.template_at(p)?;
        let spec = shape.spec(p)?;
        let cap = self.orbit_cap;
        let stored: OrbitSummary = get_or_compute(
            self.cache,
            &["v1", "orbit-cells", &spec.label(), &h.to_string()],
            || {
                let o = orbit(&h, &spec, cap)?;
                OrbitInfo::from_orbit(&o).map(|(_, summary)| summary)
            },
        )?;
        let info = OrbitInfo::from_summary(p, stored)?;
        self.orbits.insert(p, info.clone());
        Ok(info)
    }

    fn orbit_list(&mut self, shape: GroupShape, p: u64) -> Result<Arc<Vec<OrbitInfo>>, CountError> {
        if let Some(list) = self.orbit_lists.get(&p) {
            return Ok(Arc::clone(list));
        }
        let h = self.template_at(p)?;
        let spec = shape.spec(p)?;
        let cap = self.orbit_cap;
        let stored: Vec<OrbitSummary> = get_or_compute(
            self.cache,
            &["v1", "orbit-split", &spec.label(), &h.to_string()],
            || {
                let orbits = geometric_class(&h, &spec, cap)?;
                orbits
                    .iter()
                    .map(|o| OrbitInfo::from_orbit(o).map(|(_, s)| s))
                    .collect()
            },
        )?;
        let list: Vec<OrbitInfo> = stored
            .into_iter()
            .map(|s| OrbitInfo::from_summary(p, s))
            .collect::<Result<_, _>>()?;
        let list = Arc::new(list);
        self.orbit_lists.insert(p, Arc::clone(&list));
        Ok(list)
    }

    fn predicate_at(
        &mut self,
        shape: GroupShape,
        p: u64,
    ) -> Result<Arc<ClassPredicate>, CountError> {
        if let Some(pred) = self.predicates.get(&p) {
            return Ok(Arc::clone(pred));
        }
        let h = self.template_at(p)?;
        let spec = shape.spec(p)?;
        let pred = Arc::new(ClassPredicate::regular(&h, &spec)?);
        self.predicates.insert(p, Arc::clone(&pred));
        Ok(pred)
    }

    fn geometric_count(
        &mut self,
        shape: GroupShape,
        p: u64,
        w: &WeylElement,
    ) -> Result<u128, CountError> {
        let key = (p, word_label(w));
        if let Some(&count) = self.geometric.get(&key) {
            return Ok(count);
        }
        let n = shape.n as u32;
        let torus = (p as u128 - 1).pow(n - 1);
        let unip = (p as u128).pow(n * (n - 1) / 2);
        let total = torus.saturating_mul(unip);
        if total > self.sweep_cap {
            return Err(CountError::SweepCap {
                total,
                cap: self.sweep_cap,
            });
        }
        let h = self.template_at(p)?;
        let spec = shape.spec(p)?;
        let pred = self.predicate_at(shape, p)?;
        let count: u128 = get_or_compute(
            self.cache,
            &[
                "v1",
                "geometric-cells",
                &spec.label(),
                &h.to_string(),
                &key.1,
            ],
            || count_geometric_cell(&spec, &pred, w),
        )?;
        self.geometric.insert(key, count);
        Ok(count)
    }

    /// Exact bridge between unipotent slice counts and Hecke coefficients:
    /// for every prime and every pair (w, w'), the number of lower
    /// unitriangular u with w'^-1 u d(w') in BwB equals the coefficient
    /// polynomial evaluated at p, times p^l(w').
    fn suite_bridge(&mut self) -> Result<(), SuiteError> {
        let suite = SuiteName::Kawanaka34;
        let shape = self.shape(suite)?;
        let elements = self.elements.clone();
        let free = (shape.n * (shape.n - 1) / 2) as u32;
        let primes = self.primes.clone();
        for &p in &primes {
            for wprime in &elements {
                let tally = match self.unipotent_tally(shape, p, wprime) {
                    Ok(t) => t,
                    Err(e) => {
                        let check = format!("p={p} w'={}", word_label(wprime));
                        let row = self.error_row(suite, check, "unipotent-bridge", &e);
                        self.push(row);
                        continue;
                    }
                };
                let total: u128 = tally.values().sum();
                let expected = (p as u128).pow(free);
                let row = self
                    .row(
                        suite,
                        format!("p={p} w'={}", word_label(wprime)),
                        "unipotent-partition",
                        self.claim_status(total == expected),
                    )
                    .with("total", total)
                    .with("expected", expected);
                self.push(row);
                let pb = BigInt::from(p);
                let shift = pb.pow(wprime.length() as u32);
                for w in &elements {
                    let count = tally.get(&weyl_to_perm(w)).copied().unwrap_or(0);
                    let coeff = kawanaka_coefficient(w, wprime, &self.twist)?;
                    let predicted = coeff.eval_big(&pb) * &shift;
                    let ok = BigInt::from(count) == predicted;
                    let row = self
                        .row(
                            suite,
                            format!("p={p} w={} w'={}", word_label(w), word_label(wprime)),
                            "unipotent-bridge",
                            self.claim_status(ok),
                        )
                        .with("count", count)
                        .with("predicted", &predicted)
                        .with("coefficient", &coeff);
                    self.push(row);
                }
            }
        }
        Ok(())
    }

    /// Fitted unipotent slice counts: at w' = e the count is monic of
    /// degree l(w) for full twisted support w; at w' != e its degree drops
    /// below l(w) + l(w').
    fn suite_unipotent_fits(&mut self) -> Result<(), SuiteError> {
        let suite = SuiteName::Lemma33;
        let shape = self.shape(suite)?;
        let primes = self.primes.clone();
        let elements = self.elements.clone();
        let full = self.full_support.clone();
        let identity = WeylElement::identity(&self.datum);

        for w in &full {
            let check = format!("w={}", word_label(w));
            match self.unipotent_series(shape, &primes, w, &identity) {
                Ok(series) => {
                    let bound = w.length();
                    let row = match fit_polynomial(&series, bound) {
                        Ok(fit) => {
                            let ok = fit.is_monic && fit.degree == Some(bound);
                            self.row(
                                suite,
                                check,
                                "unipotent-leading-term",
                                self.claim_status(ok),
                            )
                            .with("fit", &fit)
                            .with("expected_degree", bound)
                            .with("points", points_label(&series))
                        }
                        Err(e) => self.error_row(suite, check, "unipotent-leading-term", &e),
                    };
                    self.push(row);
                }
                Err(e) => {
                    let row = self.error_row(suite, check, "unipotent-leading-term", &e);
                    self.push(row);
                }
            }
        }

        for w in &full {
            for wprime in &elements {
                if wprime.is_identity() {
                    continue;
                }
                let check = format!("w={} w'={}", word_label(w), word_label(wprime));
                let bound = w.length() + wprime.length() - 1;
                match self.unipotent_series(shape, &primes, w, wprime) {
                    Ok(series) => {
                        let row = match fit_polynomial(&series, bound) {
                            Ok(fit) => self
                                .row(
                                    suite,
                                    check,
                                    "twisted-cell-degree-drop",
                                    self.claim_status(true),
                                )
                                .with("fit", &fit)
                                .with("degree_bound", bound)
                                .with("points", points_label(&series)),
                            Err(e) => self.error_row(suite, check, "twisted-cell-degree-drop", &e),
                        };
                        self.push(row);
                    }
                    Err(e) => {
                        let row = self.error_row(suite, check, "twisted-cell-degree-drop", &e);
                        self.push(row);
                    }
                }
            }
        }
        Ok(())
    }

    fn unipotent_series(
        &mut self,
        shape: GroupShape,
        primes: &[u64],
        w: &WeylElement,
        wprime: &WeylElement,
    ) -> Result<PointCountSeries, CountError> {
        let mut series = PointCountSeries::new(
            &self.sc.id,
            format!(
                "unipotent cells at w={} w'={}",
                word_label(w),
                word_label(wprime)
            ),
        );
        let perm = weyl_to_perm(w);
        for &p in primes {
            let tally = self.unipotent_tally(shape, p, wprime)?;
            series.insert(p, tally.get(&perm).copied().unwrap_or(0));
        }
        Ok(series)
    }

    /// The exact orbit count identity at every enumerated prime and every
    /// w: the flag count times the Borel and class orders balances the
    /// class cell count times the group order. Needs no hypothesis on the
    /// element, so its rows assert even in report-only scenarios.
    fn suite_orbit_identity(&mut self) -> Result<(), SuiteError> {
        let suite = SuiteName::Lemma41;
        let shape = self.shape(suite)?;
        let elements = self.elements.clone();
        let orbit_primes = self.orbit_primes.clone();
        for &p in &orbit_primes {
            if let Some((_, reason)) = self.skips.iter().find(|(q, _)| *q == p) {
                let reason = reason.clone();
                let row = self
                    .row(
                        suite,
                        format!("p={p}"),
                        "template-validity",
                        Status::SkippedBenign,
                    )
                    .with("reason", reason);
                self.push(row);
                continue;
            }
            let info = match self.orbit_info(shape, p) {
                Ok(i) => i,
                Err(e) => {
                    let row = self.error_row(suite, format!("p={p}"), "orbit-count-identity", &e);
                    self.push(row);
                    continue;
                }
            };
            let spec = shape.spec(p)?;
            let group = spec.group_order();

            let product = info.size.checked_mul(info.centralizer);
            let ok = product == Some(group);
            let row = self
                .row(
                    suite,
                    format!("p={p}"),
                    "orbit-stabilizer",
                    if ok { Status::Pass } else { Status::Fail },
                )
                .with("orbit", info.size)
                .with("centralizer", info.centralizer)
                .with("group", group);
            self.push(row);

            let cell_sum: u128 = info.cells.values().sum();
            let row = self
                .row(
                    suite,
                    format!("p={p}"),
                    "orbit-cell-partition",
                    if cell_sum == info.size {
                        Status::Pass
                    } else {
                        Status::Fail
                    },
                )
                .with("cell_sum", cell_sum)
                .with("orbit", info.size);
            self.push(row);

            let h = match self.template_at(p) {
                Ok(h) => h,
                Err(e) => {
                    let row = self.error_row(suite, format!("p={p}"), "orbit-count-identity", &e);
                    self.push(row);
                    continue;
                }
            };
            let flags = match self.flag_tally(shape, p, &h) {
                Ok(t) => t,
                Err(e) => {
                    let row = self.error_row(suite, format!("p={p}"), "orbit-count-identity", &e);
                    self.push(row);
                    continue;
                }
            };
            let flag_sum: u128 = flags.values().sum();
            let row = self
                .row(
                    suite,
                    format!("p={p}"),
                    "flag-partition",
                    if flag_sum == spec.num_flags() {
                        Status::Pass
                    } else {
                        Status::Fail
                    },
                )
                .with("flag_sum", flag_sum)
                .with("num_flags", spec.num_flags());
            self.push(row);

            for w in &elements {
                let perm = weyl_to_perm(w);
                let identity = lusztig_core::counting::OrbitCellIdentity {
                    lusztig_count: flags.get(&perm).copied().unwrap_or(0),
                    borel_order: spec.borel_order(),
                    orbit_size: info.size,
                    group_order: group,
                    class_cell_count: info.cells.get(&perm).copied().unwrap_or(0),
                };
                let row = self
                    .row(
                        suite,
                        format!("p={p} w={}", word_label(w)),
                        "orbit-count-identity",
                        if identity.holds() {
                            Status::Pass
                        } else {
                            Status::Fail
                        },
                    )
                    .with("identity", &identity);
                self.push(row);
            }
        }
        Ok(())
    }

    /// Fitted degrees: the template must certify regular (or twisted
    /// regular across the orbit primes), each nonempty flag cell count must
    /// fit a polynomial of degree exactly l(w), and each geometric class
    /// cell must fit degree dim U + l(w) and partition the class.
    fn suite_dimension_fits(&mut self) -> Result<(), SuiteError> {
        let suite = SuiteName::Dims21;
        let shape = self.shape(suite)?;
        for (p, reason) in self.skips.clone() {
            let row = self
                .row(
                    suite,
                    format!("p={p}"),
                    "template-validity",
                    Status::SkippedBenign,
                )
                .with("reason", reason);
            self.push(row);
        }
        let valid: Vec<u64> = self.templates.keys().copied().collect();
        if valid.is_empty() {
            let row = self
                .row(
                    suite,
                    "no valid primes",
                    "template-validity",
                    Status::SkippedBenign,
                )
                .with("note", "the template realizes at none of the listed primes");
            self.push(row);
            return Ok(());
        }

        if shape.twist == Twist::Untwisted {
            for &p in &valid {
                let h = self.template_at(p).expect("valid prime");
                let spec = shape.spec(p)?;
                match is_regular(&h, &spec) {
                    Ok(cert) => {
                        let row = self
                            .row(
                                suite,
                                format!("p={p}"),
                                "regularity-certificate",
                                self.claim_status(cert.kind.is_regular()),
                            )
                            .with("kind", cert.kind.name())
                            .with("evidence", cert.evidence);
                        self.push(row);
                    }
                    Err(e) => {
                        let e = CountError::from(e);
                        let row =
                            self.error_row(suite, format!("p={p}"), "regularity-certificate", &e);
                        self.push(row);
                    }
                }
            }
        } else {
            let family: Vec<(GroupSpec, MatrixFq)> = self
                .orbit_primes
                .clone()
                .into_iter()
                .filter(|p| self.templates.contains_key(p))
                .map(|p| Ok((shape.spec(p)?, self.template_at(p).expect("valid prime"))))
                .collect::<Result<_, ChevError>>()?;
            let check = family
                .iter()
                .map(|(s, _)| s.p.to_string())
                .collect::<Vec<_>>()
                .join(",");
            let check = format!("p in {{{check}}}");
            match twisted_regularity_certificate(&family, self.orbit_cap) {
                Ok(cert) => {
                    let ok = cert.kind == RegularityKind::TwistedRegular;
                    let row = self
                        .row(
                            suite,
                            check,
                            "regularity-certificate",
                            self.claim_status(ok),
                        )
                        .with("kind", cert.kind.name())
                        .with("evidence", cert.evidence);
                    self.push(row);
                }
                Err(e) => {
                    let row = self.error_row(suite, check, "regularity-certificate", &e);
                    self.push(row);
                }
            }
        }

        let selection = self.selection.clone();
        for w in &selection {
            let check = format!("w={}", word_label(w));
            let series = match self.flag_series(shape, &valid, w) {
                Ok(s) => s,
                Err(e) => {
                    let row = self.error_row(suite, check, "slice-dimension", &e);
                    self.push(row);
                    continue;
                }
            };
            let bound = w.length();
            let row = match fit_polynomial(&series, bound) {
                Ok(fit) => {
                    if fit.degree.is_none() && !self.sc.report_only {
                        self.row(suite, check, "slice-dimension", Status::SkippedBenign)
                            .with("note", "empty cell at every sampled prime")
                            .with("points", points_label(&series))
                    } else {
                        let ok = fit.degree == Some(bound);
                        self.row(suite, check, "slice-dimension", self.claim_status(ok))
                            .with("fit", &fit)
                            .with("expected_degree", bound)
                            .with("points", points_label(&series))
                    }
                }
                Err(e) => self.error_row(suite, check, "slice-dimension", &e),
            };
            self.push(row);
        }

        if self.sc.fit_geometric && shape.twist == Twist::Untwisted {
            let dim_u = shape.n * (shape.n - 1) / 2;
            for w in &selection {
                let check = format!("w={}", word_label(w));
                let series = match self.geometric_series(shape, &valid, w) {
                    Ok(s) => s,
                    Err(e) => {
                        let row = self.error_row(suite, check, "class-cell-dimension", &e);
                        self.push(row);
                        continue;
                    }
                };
                let bound = dim_u + w.length();
                let row = match fit_polynomial(&series, bound) {
                    Ok(fit) => {
                        if fit.degree.is_none() && !self.sc.report_only {
                            self.row(suite, check, "class-cell-dimension", Status::SkippedBenign)
                                .with("note", "empty cell at every sampled prime")
                                .with("points", points_label(&series))
                        } else {
                            let ok = fit.degree == Some(bound);
                            self.row(suite, check, "class-cell-dimension", self.claim_status(ok))
                                .with("fit", &fit)
                                .with("expected_degree", bound)
                                .with("points", points_label(&series))
                        }
                    }
                    Err(e) => self.error_row(suite, check, "class-cell-dimension", &e),
                };
                self.push(row);
            }

            // The geometric cells must partition the whole geometric class,
            // whose size comes from the ambient general linear centralizer.
            let elements = self.elements.clone();
            for &p in &valid {
                let check = format!("p={p}");
                let mut sum: u128 = 0;
                let mut failed = false;
                for w in &elements {
                    match self.geometric_count(shape, p, w) {
                        Ok(c) => sum += c,
                        Err(e) => {
                            let row = self.error_row(suite, check.clone(), "class-partition", &e);
                            self.push(row);
                            failed = true;
                            break;
                        }
                    }
                }
                if failed {
                    continue;
                }
                let h = self.template_at(p).expect("valid prime");
                let ambient =
                    GroupSpec::new(GroupKind::GeneralLinear, shape.n, p, Twist::Untwisted)?;
                match regular_centralizer_order(&h, &ambient) {
                    Ok(z) => {
                        let expected = ambient.group_order() / z;
                        let row = self
                            .row(
                                suite,
                                check,
                                "class-partition",
                                self.claim_status(sum == expected),
                            )
                            .with("cell_sum", sum)
                            .with("class_size", expected)
                            .with("ambient_centralizer", z);
                        self.push(row);
                    }
                    Err(e) => {
                        let e = CountError::from(e);
                        let row = self.error_row(suite, check, "class-partition", &e);
                        self.push(row);
                    }
                }
            }
        }
        Ok(())
    }

    fn flag_series(
        &mut self,
        shape: GroupShape,
        primes: &[u64],
        w: &WeylElement,
    ) -> Result<PointCountSeries, CountError> {
        let mut series =
            PointCountSeries::new(&self.sc.id, format!("flag cells at w={}", word_label(w)));
        let perm = weyl_to_perm(w);
        for &p in primes {
            let h = self.template_at(p)?;
            let tally = self.flag_tally(shape, p, &h)?;
            series.insert(p, tally.get(&perm).copied().unwrap_or(0));
        }
        Ok(series)
    }

    fn geometric_series(
        &mut self,
        shape: GroupShape,
        primes: &[u64],
        w: &WeylElement,
    ) -> Result<PointCountSeries, CountError> {
        let mut series = PointCountSeries::new(
            &self.sc.id,
            format!("geometric class cells at w={}", word_label(w)),
        );
        for &p in primes {
            series.insert(p, self.geometric_count(shape, p, w)?);
        }
        Ok(series)
    }

    /// Leading terms: every full-twisted-support flag count fits a monic
    /// polynomial of degree l(w), per rational orbit when the class splits,
    /// and the per-orbit class cells sum back to the geometric count.
    fn suite_leading_terms(&mut self) -> Result<(), SuiteError> {
        let suite = SuiteName::Theorem42;
        let shape = self.shape(suite)?;
        let valid: Vec<u64> = self.templates.keys().copied().collect();
        if valid.is_empty() {
            let row = self
                .row(
                    suite,
                    "no valid primes",
                    "template-validity",
                    Status::SkippedBenign,
                )
                .with("note", "the template realizes at none of the listed primes");
            self.push(row);
            return Ok(());
        }
        let full = self.full_support.clone();

        // One family of class representatives per prime: the template's own
        // rational class, or every rational orbit of its geometric class.
        let mut families: BTreeMap<u64, Vec<MatrixFq>> = BTreeMap::new();
        if self.sc.split_orbits {
            for &p in &valid {
                match self.orbit_list(shape, p) {
                    Ok(list) => {
                        families.insert(p, list.iter().map(|o| o.base.clone()).collect());
                    }
                    Err(e) => {
                        let row = self.error_row(suite, format!("p={p}"), "orbit-split", &e);
                        self.push(row);
                    }
                }
            }
            let counts: Vec<usize> = families.values().map(|l| l.len()).collect();
            let constant = counts.windows(2).all(|w| w[0] == w[1]);
            let witness = families
                .iter()
                .map(|(p, l)| format!("{p}:{}", l.len()))
                .collect::<Vec<_>>()
                .join(" ");
            let row = self
                .row(
                    suite,
                    "rational orbits per prime",
                    "orbit-split",
                    self.claim_status(constant && !counts.is_empty()),
                )
                .with("orbits", witness);
            self.push(row);
        } else {
            for &p in &valid {
                families.insert(p, vec![self.template_at(p).expect("valid prime")]);
            }
        }

        let width = families.values().map(|l| l.len()).min().unwrap_or(0);
        for index in 0..width {
            for w in &full {
                let check = if self.sc.split_orbits {
                    format!("orbit={index} w={}", word_label(w))
                } else {
                    format!("w={}", word_label(w))
                };
                let mut series = PointCountSeries::new(
                    &self.sc.id,
                    format!("flag cells of orbit {index} at w={}", word_label(w)),
                );
                let perm = weyl_to_perm(w);
                let mut broken = false;
                for (&p, reps) in &families.clone() {
                    match self.flag_tally(shape, p, &reps[index]) {
                        Ok(t) => series.insert(p, t.get(&perm).copied().unwrap_or(0)),
                        Err(e) => {
                            let row =
                                self.error_row(suite, check.clone(), "slice-leading-term", &e);
                            self.push(row);
                            broken = true;
                            break;
                        }
                    }
                }
                if broken {
                    continue;
                }
                let bound = w.length();
                let row = match fit_polynomial(&series, bound) {
                    Ok(fit) => {
                        let ok = fit.is_monic && fit.degree == Some(bound);
                        let mut row = self
                            .row(suite, check, "slice-leading-term", self.claim_status(ok))
                            .with("fit", &fit)
                            .with("expected_degree", bound)
                            .with("points", points_label(&series));
                        // With a nontrivial twist the leading coefficient can
                        // track whether the twist fixes w, so record that.
                        if !self.twist.is_identity() {
                            row = row.with("twist_fixes_w", self.twist.apply(w)? == *w);
                        }
                        row
                    }
                    Err(e) => self.error_row(suite, check, "slice-leading-term", &e),
                };
                self.push(row);
            }
        }

        // Cross-engine check at the orbit primes: per-orbit class cell
        // counts, summed over the rational orbits, match the independent
        // torus-times-unipotent sweep of the geometric class.
        if self.sc.fit_geometric && shape.twist == Twist::Untwisted {
            let elements = self.elements.clone();
            let orbit_primes: Vec<u64> = self
                .orbit_primes
                .clone()
                .into_iter()
                .filter(|p| self.templates.contains_key(p))
                .collect();
            for &p in &orbit_primes {
                let infos: Vec<OrbitInfo> = if self.sc.split_orbits {
                    match self.orbit_list(shape, p) {
                        Ok(list) => list.to_vec(),
                        Err(e) => {
                            let row = self.error_row(suite, format!("p={p}"), "orbit-cell-sum", &e);
                            self.push(row);
                            continue;
                        }
                    }
                } else {
                    match self.orbit_info(shape, p) {
                        Ok(info) => vec![info],
                        Err(e) => {
                            let row = self.error_row(suite, format!("p={p}"), "orbit-cell-sum", &e);
                            self.push(row);
                            continue;
                        }
                    }
                };
                for w in &elements {
                    let perm = weyl_to_perm(w);
                    let sum: u128 = infos
                        .iter()
                        .map(|o| o.cells.get(&perm).copied().unwrap_or(0))
                        .sum();
                    let check = format!("p={p} w={}", word_label(w));
                    match self.geometric_count(shape, p, w) {
                        Ok(geo) => {
                            let row = self
                                .row(
                                    suite,
                                    check,
                                    "orbit-cell-sum",
                                    self.claim_status(sum == geo),
                                )
                                .with("orbit_sum", sum)
                                .with("geometric", geo)
                                .with("orbits", infos.len());
                            self.push(row);
                        }
                        Err(e) => {
                            let row = self.error_row(suite, check, "orbit-cell-sum", &e);
                            self.push(row);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Symbolic Hecke algebra checks that need no finite field at all.
    fn suite_hecke_props(&mut self) -> Result<(), SuiteError> {
        let suite = SuiteName::HeckeProps;
        let elements = self.elements.clone();

        self.seeds
            .insert("hecke-associativity".to_string(), ASSOCIATIVITY_SEED);
        let mut rng = ChaCha8Rng::seed_from_u64(ASSOCIATIVITY_SEED);
        let mut counterexample: Option<String> = None;
        for _ in 0..ASSOCIATIVITY_TRIALS {
            let x = &elements[rng.gen_range(0..elements.len())];
            let y = &elements[rng.gen_range(0..elements.len())];
            let z = &elements[rng.gen_range(0..elements.len())];
            let tx = HeckeElement::basis(x);
            let ty = HeckeElement::basis(y);
            let tz = HeckeElement::basis(z);
            let left = tx.mul(&ty)?.mul(&tz)?;
            let right = tx.mul(&ty.mul(&tz)?)?;
            if left != right {
                counterexample = Some(format!(
                    "x={} y={} z={}",
                    word_label(x),
                    word_label(y),
                    word_label(z)
                ));
                break;
            }
        }
        let mut row = self
            .row(
                suite,
                format!("{ASSOCIATIVITY_TRIALS} random triples"),
                "hecke-associativity",
                if counterexample.is_none() {
                    Status::Pass
                } else {
                    Status::Fail
                },
            )
            .with("seed", ASSOCIATIVITY_SEED)
            .with("trials", ASSOCIATIVITY_TRIALS);
        if let Some(ce) = counterexample {
            row = row.with("counterexample", ce);
        }
        self.push(row);

        // At t = 1 the basis multiplication collapses to the group law.
        let one = BigInt::from(1);
        let mut mismatch: Option<String> = None;
        'pairs: for x in &elements {
            for y in &elements {
                let product = HeckeElement::basis(x).mul(&HeckeElement::basis(y))?;
                let xy = x.multiply(y)?;
                for z in &elements {
                    let got = product.coefficient(z).eval_big(&one);
                    let expected = BigInt::from(u8::from(*z == xy));
                    if got != expected {
                        mismatch = Some(format!(
                            "x={} y={} z={} coefficient(1)={got}",
                            word_label(x),
                            word_label(y),
                            word_label(z)
                        ));
                        break 'pairs;
                    }
                }
            }
        }
        let mut row = self
            .row(
                suite,
                format!("{} ordered pairs", elements.len() * elements.len()),
                "hecke-unit-specialization",
                if mismatch.is_none() {
                    Status::Pass
                } else {
                    Status::Fail
                },
            )
            .with("pairs", elements.len() * elements.len());
        if let Some(m) = mismatch {
            row = row.with("mismatch", m);
        }
        self.push(row);

        // Summed twisted coefficients are monic of degree l(w) whenever the
        // twisted support is full, under every diagram twist the type
        // admits. Nothing is claimed for partial support, so those rows only
        // record what the sum looks like.
        let mut twists = vec![DiagramAutomorphism::identity(&self.datum)];
        if let Ok(flip) = DiagramAutomorphism::flip(&self.datum) {
            if !flip.is_identity() {
                twists.push(flip);
            }
        }
        for twist in &twists {
            let name = if twist.is_identity() { "id" } else { "flip" };
            for w in &elements {
                let full = has_full_twisted_support(w, twist)?;
                let sum = dm_sum(w, twist)?;
                let monic_of_length = sum.is_monic() && sum.degree() == Some(w.length());
                let status = if full {
                    if monic_of_length {
                        Status::Pass
                    } else {
                        Status::Fail
                    }
                } else {
                    Status::Observed
                };
                let row = self
                    .row(
                        suite,
                        format!("twist={name} w={}", word_label(w)),
                        "twisted-sum-leading-term",
                        status,
                    )
                    .with("sum", &sum)
                    .with("full_support", full)
                    .with("monic_of_length", monic_of_length)
                    .with("length", w.length());
                self.push(row);
            }
        }
        Ok(())
    }
}

/// Runs every suite the scenario lists and assembles the report.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<VerificationReport, SuiteError> {
    let start = Instant::now();
    let mut engine = Engine::new(sc, opts)?;
    for &suite in &sc.suites {
        engine.run(suite)?;
    }
    Ok(VerificationReport::new(
        engine.rows,
        engine.seeds,
        start.elapsed().as_millis(),
    ))
}

/// Runs one suite against one scenario, whether or not the scenario lists
/// it.
pub fn verify_suite(
    suite: SuiteName,
    sc: &Scenario,
    opts: &RunOptions,
) -> Result<VerificationReport, SuiteError> {
    let start = Instant::now();
    let mut engine = Engine::new(sc, opts)?;
    engine.run(suite)?;
    Ok(VerificationReport::new(
        engine.rows,
        engine.seeds,
        start.elapsed().as_millis(),
    ))
}

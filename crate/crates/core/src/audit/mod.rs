//! Theorem audit: each rule states "hypotheses certified implies conclusion
//! certified" and is tested on concrete instances. A refuted conclusion is
//! replayed against the hypotheses at the points the argument would use
//! before it is reported as a violation.

mod generate;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{
    self, efficiency_at, invex_pair_at, vvi_at, CertifyError, CheckContext, CheckSpec, InvexClass,
    PointOutcome, Quantifier, Verdict, VviVariant, Witness,
};
use crate::linalg::{norm, sub};
use crate::model::{KernelFlags, PiecewiseVectorFn};
use crate::problem::Problem;
use crate::sampling::{stream_seed, SamplingPlan};

pub use generate::{generate_instance, RandomInstanceSpec};

/// Samples used to establish kernel flags.
pub const FLAG_SAMPLES: usize = 1_000;
/// Default ball radius for the audited checks.
pub const DEFAULT_RADIUS: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AuditError {
    #[error("no rules given")]
    NoRules,
    #[error("no instances given")]
    NoInstances,
    #[error("unknown rule '{0}'")]
    UnknownRule(String),
    #[error("instance generation failed for seed {seed}: {reason}")]
    GenerationFailed { seed: u64, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    #[serde(rename = "T3.1")]
    T31,
    #[serde(rename = "T3.2")]
    T32,
    #[serde(rename = "T3.3")]
    T33,
    #[serde(rename = "T4.1")]
    T41,
    #[serde(rename = "T4.2")]
    T42,
    #[serde(rename = "T4.6")]
    T46,
    #[serde(rename = "R4.0")]
    R40,
}

impl RuleId {
    pub const ALL: [RuleId; 7] = [
        RuleId::T31,
        RuleId::T32,
        RuleId::T33,
        RuleId::T41,
        RuleId::T42,
        RuleId::T46,
        RuleId::R40,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::T31 => "T3.1",
            RuleId::T32 => "T3.2",
            RuleId::T33 => "T3.3",
            RuleId::T41 => "T4.1",
            RuleId::T42 => "T4.2",
            RuleId::T46 => "T4.6",
            RuleId::R40 => "R4.0",
        }
    }

    /// Comma separated ids, or `all`.
    pub fn parse_list(text: &str) -> Result<Vec<RuleId>, AuditError> {
        if text.trim().eq_ignore_ascii_case("all") {
            return Ok(RuleId::ALL.to_vec());
        }
        text.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse())
            .collect()
    }
}

impl FromStr for RuleId {
    type Err = AuditError;
    fn from_str(s: &str) -> Result<Self, AuditError> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| AuditError::UnknownRule(s.into()))
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFlag {
    Skew,
    FirstArgAffine,
    VanishesOnDiagonal,
}

impl KernelFlag {
    fn holds(self, flags: &KernelFlags) -> bool {
        match self {
            KernelFlag::Skew => flags.skew,
            KernelFlag::FirstArgAffine => flags.first_arg_affine,
            KernelFlag::VanishesOnDiagonal => flags.vanishes_on_diagonal,
        }
    }
}

/// A check at the audited point, on `f` or on `-f`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum Check {
    Efficiency { weak: bool },
    Vvi { variant: VviVariant },
    Class { class: InvexClass, negated: bool },
    Critical,
}

impl Check {
    const QUASI_EFF: Check = Check::Efficiency { weak: false };
    const QUASI_WEAK_EFF: Check = Check::Efficiency { weak: true };

    const fn class(class: InvexClass, negated: bool) -> Check {
        Check::Class { class, negated }
    }

    const fn vvi(variant: VviVariant) -> Check {
        Check::Vvi { variant }
    }

    pub fn label(&self) -> String {
        match self {
            Check::Efficiency { weak: false } => "quasi_efficiency".into(),
            Check::Efficiency { weak: true } => "quasi_weak_efficiency".into(),
            Check::Vvi { variant } => variant.name().into(),
            Check::Class {
                class,
                negated: false,
            } => format!("{}(f)", class.name()),
            Check::Class {
                class,
                negated: true,
            } => format!("{}(-f)", class.name()),
            Check::Critical => "critical".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremRule {
    pub id: RuleId,
    pub flags: Vec<KernelFlag>,
    pub hypotheses: Vec<Check>,
    pub conclusion: Check,
    /// The implication in words.
    pub statement: &'static str,
}

pub fn rule(id: RuleId) -> TheoremRule {
    use InvexClass::*;
    use KernelFlag::*;
    use VviVariant::*;
    let (flags, hypotheses, conclusion, statement) = match id {
        RuleId::T31 => (
            vec![],
            vec![Check::class(Invex, false), Check::vvi(Svvi)],
            Check::QUASI_EFF,
            "f approximately invex at xi and xi solves SVVI => xi locally quasi efficient",
        ),
        RuleId::T32 => (
            vec![Skew],
            vec![Check::class(Invex, true), Check::vvi(Mvvi)],
            Check::QUASI_EFF,
            "eta skew, -f approximately invex at xi and xi solves MVVI => xi locally quasi efficient",
        ),
        RuleId::T33 => (
            vec![],
            vec![Check::class(PseudoII, false), Check::vvi(Svvi)],
            Check::QUASI_EFF,
            "f approximately pseudo invex of type II at xi and xi solves SVVI => xi locally quasi efficient",
        ),
        RuleId::T41 => (
            vec![FirstArgAffine, VanishesOnDiagonal],
            vec![Check::class(QuasiII, true), Check::QUASI_WEAK_EFF],
            Check::vvi(Wsvvi),
            "eta affine in x with eta(x, x) = 0, -f approximately quasi invex of type II at xi and \
             xi locally quasi weakly efficient => xi solves WSVVI",
        ),
        RuleId::T42 => (
            vec![Skew],
            vec![Check::class(PseudoI, true), Check::vvi(Wmvvi)],
            Check::QUASI_WEAK_EFF,
            "eta skew, -f approximately pseudo invex of type I at xi and xi solves WMVVI => \
             xi locally quasi weakly efficient",
        ),
        RuleId::T46 => (
            vec![],
            vec![Check::class(PseudoI, false), Check::Critical],
            Check::QUASI_WEAK_EFF,
            "f approximately pseudo invex of type I at xi and xi vector critical => xi locally \
             quasi weakly efficient",
        ),
        RuleId::R40 => (
            vec![],
            vec![Check::class(PseudoI, false), Check::vvi(Wsvvi)],
            Check::QUASI_WEAK_EFF,
            "f approximately pseudo invex of type I at xi and xi solves WSVVI => xi locally quasi \
             weakly efficient",
        ),
    };
    TheoremRule {
        id,
        flags,
        hypotheses,
        conclusion,
        statement,
    }
}

pub fn all_rules() -> Vec<TheoremRule> {
    RuleId::ALL.into_iter().map(rule).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    ConsistentWithTheorem,
    HypothesisNotCertified,
    #[serde(rename = "VIOLATION")]
    Violation,
    /// The conclusion check itself failed to run.
    Inconclusive,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::ConsistentWithTheorem => "ConsistentWithTheorem",
            Outcome::HypothesisNotCertified => "HypothesisNotCertified",
            Outcome::Violation => "VIOLATION",
            Outcome::Inconclusive => "Inconclusive",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlagRecord {
    pub flag: KernelFlag,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRecord {
    pub check: String,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditResult {
    pub rule: RuleId,
    pub instance: String,
    pub point: Vec<f64>,
    pub flags: Vec<FlagRecord>,
    pub hypotheses: Vec<CheckRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conclusion: Option<CheckRecord>,
    pub outcome: Outcome,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

/// Runs checks on one instance at one point, caching verdicts across rules.
pub struct InstanceAudit<'a> {
    problem: &'a Problem,
    neg_f: PiecewiseVectorFn,
    point: Vec<f64>,
    r: f64,
    plan: &'a SamplingPlan,
    flags: Result<KernelFlags, String>,
    cache: HashMap<Check, Verdict>,
}

impl<'a> InstanceAudit<'a> {
    pub fn new(problem: &'a Problem, point: &[f64], r: f64, plan: &'a SamplingPlan) -> Self {
        let flags = problem
            .kernel
            .flags(
                problem.f.domain(),
                FLAG_SAMPLES,
                stream_seed(plan.seed, "kernel-flags"),
            )
            .map_err(|e| e.to_string());
        InstanceAudit {
            problem,
            neg_f: problem.f.negated(),
            point: point.to_vec(),
            r,
            plan,
            flags,
            cache: HashMap::new(),
        }
    }

    fn ctx(&self, negated: bool) -> Result<CheckContext<'_>, CertifyError> {
        let f = if negated {
            &self.neg_f
        } else {
            &self.problem.f
        };
        CheckContext::new(f, &self.problem.kernel, &self.problem.cone, self.plan)
    }

    fn spec(&self, check: Check) -> CheckSpec {
        let xi = self.point.clone();
        let e = self.problem.e.clone();
        match check {
            Check::Efficiency { weak } => CheckSpec::Efficiency {
                xi,
                e,
                r: self.r,
                weak,
            },
            Check::Vvi { variant } => CheckSpec::Vvi {
                variant,
                xi,
                quantifier: Quantifier::Forall,
            },
            Check::Class { class, .. } => CheckSpec::Invex {
                class,
                x0: xi,
                e,
                r: self.r,
            },
            Check::Critical => CheckSpec::Critical { xi },
        }
    }

    /// Checker errors become `Inapplicable` verdicts.
    pub fn verdict(&mut self, check: Check) -> Verdict {
        if let Some(v) = self.cache.get(&check) {
            return v.clone();
        }
        let negated = matches!(check, Check::Class { negated: true, .. });
        let spec = self.spec(check);
        let v = match self.ctx(negated).and_then(|ctx| certify::run(&ctx, &spec)) {
            Ok(cert) => cert.verdict,
            Err(e) => Verdict::Inapplicable {
                reason: e.to_string(),
            },
        };
        self.cache.insert(check, v.clone());
        v
    }

    pub fn audit(&mut self, rule: &TheoremRule) -> AuditResult {
        let mut result = AuditResult {
            rule: rule.id,
            instance: self.problem.name.clone(),
            point: self.point.clone(),
            flags: Vec::new(),
            hypotheses: Vec::new(),
            conclusion: None,
            outcome: Outcome::HypothesisNotCertified,
            notes: Vec::new(),
        };
        match &self.flags {
            Ok(flags) => {
                for &flag in &rule.flags {
                    result.flags.push(FlagRecord {
                        flag,
                        holds: flag.holds(flags),
                    });
                }
            }
            Err(e) if !rule.flags.is_empty() => {
                result.notes.push(format!("kernel flags unavailable: {e}"));
                return result;
            }
            Err(_) => {}
        }
        if result.flags.iter().any(|f| !f.holds) {
            return result;
        }
        for &h in &rule.hypotheses {
            let verdict = self.verdict(h);
            let certified = verdict.is_certified();
            result.hypotheses.push(CheckRecord {
                check: h.label(),
                verdict,
            });
            if !certified {
                return result;
            }
        }
        let verdict = self.verdict(rule.conclusion);
        result.outcome = match &verdict {
            Verdict::CertifiedUpToSampling { .. } => Outcome::ConsistentWithTheorem,
            Verdict::Inapplicable { reason } => {
                result
                    .notes
                    .push(format!("conclusion could not be checked: {reason}"));
                Outcome::Inconclusive
            }
            Verdict::Refuted { witness, .. } => {
                self.replay_refutation(rule, witness, &mut result.notes)
            }
        };
        result.conclusion = Some(CheckRecord {
            check: rule.conclusion.label(),
            verdict,
        });
        result
    }

    /// The conclusion was refuted by `w`. Re-test the hypotheses at the points
    /// the implication's argument relies on; only if they all survive is the
    /// row a violation.
    fn replay_refutation(
        &self,
        rule: &TheoremRule,
        w: &Witness,
        notes: &mut Vec<String>,
    ) -> Outcome {
        let spec = self.spec(rule.conclusion);
        match self
            .ctx(false)
            .and_then(|ctx| certify::replay(&ctx, &spec, w))
        {
            Ok(true) => {}
            Ok(false) => {
                notes.push("conclusion witness did not replay".into());
                return Outcome::Inconclusive;
            }
            Err(e) => {
                notes.push(format!("conclusion witness replay failed: {e}"));
                return Outcome::Inconclusive;
            }
        }
        match self.targeted_replay(rule.id, &w.x) {
            Ok(Some(note)) => {
                notes.push(note);
                Outcome::HypothesisNotCertified
            }
            Ok(None) => {
                notes.push(format!(
                    "hypotheses hold at the points used by the argument; witness x = {:?}",
                    w.x
                ));
                Outcome::Violation
            }
            Err(e) => {
                notes.push(format!("targeted replay failed: {e}"));
                Outcome::Inconclusive
            }
        }
    }

    /// `Some(note)` when a hypothesis fails at a point the argument uses.
    fn targeted_replay(&self, id: RuleId, w: &[f64]) -> Result<Option<String>, CertifyError> {
        let xi = &self.point;
        let e = &self.problem.e;
        let f = self.ctx(false)?;
        let neg = self.ctx(true)?;
        let violated = |o: PointOutcome| matches!(o, PointOutcome::Violated(_));
        let pair = |ctx: &CheckContext<'_>, class, x: &[f64], y: &[f64], label: &str| {
            invex_pair_at(ctx, class, e, x, y).map(|o| {
                violated(o).then(|| format!("{label} fails on the pair (x, y) = ({x:?}, {y:?})"))
            })
        };
        let vvi = |variant: VviVariant, x: &[f64]| {
            vvi_at(&f, variant, Quantifier::Forall, xi, x).map(|o| {
                violated(o).then(|| format!("{} fails at the witness x = {x:?}", variant.name()))
            })
        };
        let first = |checks: Vec<Result<Option<String>, CertifyError>>| {
            checks.into_iter().find_map(|c| c.transpose()).transpose()
        };
        use InvexClass::*;
        match id {
            RuleId::T31 => first(vec![
                pair(&f, Invex, w, xi, "invex(f)"),
                vvi(VviVariant::Svvi, w),
            ]),
            RuleId::T32 => first(vec![
                pair(&neg, Invex, xi, w, "invex(-f)"),
                vvi(VviVariant::Mvvi, w),
            ]),
            RuleId::T33 => first(vec![
                pair(&f, PseudoII, w, xi, "pseudo2(f)"),
                vvi(VviVariant::Svvi, w),
            ]),
            RuleId::T42 => first(vec![
                pair(&neg, PseudoI, xi, w, "pseudo1(-f)"),
                vvi(VviVariant::Wmvvi, w),
            ]),
            RuleId::T46 => first(vec![pair(&f, PseudoI, w, xi, "pseudo1(f)")]),
            RuleId::R40 => first(vec![
                pair(&f, PseudoI, w, xi, "pseudo1(f)"),
                vvi(VviVariant::Wsvvi, w),
            ]),
            RuleId::T41 => {
                // Move towards the witness so the point stays in the ball.
                let dist = norm(&sub(w, xi));
                let base = (0.5 * self.r / dist).min(1.0);
                for k in 0..5 {
                    let t = base * 0.5f64.powi(k);
                    let x0: Vec<f64> = xi.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect();
                    if let Some(note) = pair(&neg, QuasiII, &x0, xi, "quasi2(-f)")? {
                        return Ok(Some(note));
                    }
                    if violated(efficiency_at(&f, xi, e, true, &x0)?) {
                        return Ok(Some(format!("quasi weak efficiency fails at x0 = {x0:?}")));
                    }
                }
                Ok(None)
            }
        }
    }
}

/// Audit the given rules on one instance at one point.
pub fn audit_instance(
    problem: &Problem,
    point: &[f64],
    rules: &[RuleId],
    r: f64,
    plan: &SamplingPlan,
) -> Vec<AuditResult> {
    let mut audit = InstanceAudit::new(problem, point, r, plan);
    rules.iter().map(|&id| audit.audit(&rule(id))).collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct OutcomeCounts {
    pub consistent: usize,
    pub hypothesis_not_certified: usize,
    pub violation: usize,
    pub inconclusive: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditSummary {
    pub rows: Vec<AuditResult>,
    pub counts: OutcomeCounts,
}

impl AuditSummary {
    pub fn has_violation(&self) -> bool {
        self.counts.violation > 0
    }

    /// Fixed-width table, one row per result.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<6} {:<24} {:<12} {}\n",
            "rule", "instance", "point", "outcome"
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{:<6} {:<24} {:<12} {}\n",
                row.rule.name(),
                row.instance,
                format!("{:?}", row.point),
                row.outcome.name()
            ));
        }
        out.push_str(&format!(
            "consistent {}, hypothesis not certified {}, violation {}, inconclusive {}\n",
            self.counts.consistent,
            self.counts.hypothesis_not_certified,
            self.counts.violation,
            self.counts.inconclusive
        ));
        out
    }
}

/// Audit every rule on every `(problem, point)` instance. Instances run in
/// parallel; rows are ordered by rule, then by instance position.
pub fn run_matrix(
    rules: &[RuleId],
    instances: &[(Problem, Vec<f64>)],
    r: f64,
    plan: &SamplingPlan,
) -> Result<AuditSummary, AuditError> {
    if rules.is_empty() {
        return Err(AuditError::NoRules);
    }
    if instances.is_empty() {
        return Err(AuditError::NoInstances);
    }
    let per_instance: Vec<Vec<AuditResult>> = instances
        .par_iter()
        .map(|(p, point)| audit_instance(p, point, rules, r, plan))
        .collect();
    let mut keyed: Vec<(RuleId, usize, AuditResult)> = per_instance
        .into_iter()
        .enumerate()
        .flat_map(|(i, rows)| rows.into_iter().map(move |row| (row.rule, i, row)))
        .collect();
    keyed.sort_by_key(|(rule, i, _)| (*rule, *i));
    let rows: Vec<AuditResult> = keyed.into_iter().map(|(_, _, row)| row).collect();
    let mut counts = OutcomeCounts::default();
    for row in &rows {
        match row.outcome {
            Outcome::ConsistentWithTheorem => counts.consistent += 1,
            Outcome::HypothesisNotCertified => counts.hypothesis_not_certified += 1,
            Outcome::Violation => counts.violation += 1,
            Outcome::Inconclusive => counts.inconclusive += 1,
        }
    }
    Ok(AuditSummary { rows, counts })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> SamplingPlan {
        SamplingPlan::default().with_samples(2_000)
    }

    fn outcomes(problem: &Problem, point: &[f64]) -> Vec<(RuleId, Outcome)> {
        audit_instance(problem, point, &RuleId::ALL, DEFAULT_RADIUS, &plan())
            .into_iter()
            .map(|r| (r.rule, r.outcome))
            .collect()
    }

    #[test]
    fn rule_ids_parse() {
        assert_eq!(RuleId::parse_list("all").unwrap().len(), 7);
        assert_eq!(
            RuleId::parse_list("T3.1, t4.6").unwrap(),
            vec![RuleId::T31, RuleId::T46]
        );
        assert!(RuleId::parse_list("T9.9").is_err());
        assert_eq!(serde_json::to_string(&RuleId::R40).unwrap(), "\"R4.0\"");
    }

    #[test]
    fn kinked_cubic_fixture_has_no_violation() {
        let p = Problem::load("example5", false).unwrap();
        let rows = outcomes(&p, &[0.0]);
        assert!(
            rows.iter().all(|(_, o)| *o != Outcome::Violation),
            "{rows:?}"
        );
        let t33 = rows.iter().find(|(r, _)| *r == RuleId::T33).unwrap();
        assert_eq!(t33.1, Outcome::ConsistentWithTheorem);
        let t46 = rows.iter().find(|(r, _)| *r == RuleId::T46).unwrap();
        assert_eq!(t46.1, Outcome::ConsistentWithTheorem);
    }

    #[test]
    fn linear_increasing_map_fails_svvi_hypothesis() {
        let text = crate::problem::bundled("example5").unwrap().replace(
            r#""pieces": [
      { "region": "x1 >= 0", "components": ["-x1^3 - x1^2 + 5*x1", "x1^2 - 2*x1"] },
      { "region": "x1 <= 0", "components": ["x1^3 + 6*x1", "-x1^2 - 3*x1"] }
    ]"#,
            r#""pieces": [{ "region": "true", "components": ["x1", "x1"] }]"#,
        );
        let p = Problem::from_json(&text, true).unwrap();
        let rows = audit_instance(&p, &[0.0], &[RuleId::T31], DEFAULT_RADIUS, &plan());
        assert_eq!(rows[0].outcome, Outcome::HypothesisNotCertified);
        assert!(rows[0]
            .hypotheses
            .iter()
            .any(|h| h.check == "svvi" && h.verdict.is_refuted()));
    }

    #[test]
    fn empty_inputs_are_errors() {
        let p = Problem::load("example5", false).unwrap();
        assert_eq!(
            run_matrix(&[], &[(p.clone(), vec![0.0])], DEFAULT_RADIUS, &plan()),
            Err(AuditError::NoRules)
        );
        assert_eq!(
            run_matrix(&[RuleId::T31], &[], DEFAULT_RADIUS, &plan()),
            Err(AuditError::NoInstances)
        );
    }

    #[test]
    fn matrix_is_reproducible() {
        let a = Problem::load("example5", false).unwrap();
        let b = Problem::load("example23", false).unwrap();
        let inst = vec![(a, vec![0.0]), (b, vec![0.0])];
        let s1 = run_matrix(&RuleId::ALL, &inst, DEFAULT_RADIUS, &plan()).unwrap();
        let s2 = run_matrix(&RuleId::ALL, &inst, DEFAULT_RADIUS, &plan()).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.rows.len(), 14);
        assert_eq!(s1.counts.violation, 0, "{}", s1.table());
        assert_eq!(s1.rows[0].rule, RuleId::T31);
        assert_eq!(s1.rows[1].rule, RuleId::T31);
    }
}

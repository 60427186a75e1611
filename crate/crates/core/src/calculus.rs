//! The deductive core: configurations, the eight transition rules, and
//! machine-checked rule application. Premises are reified data (verdicts,
//! proposals, stability reports), so a completed run carries an auditable
//! certificate: `check_trace` replays every premise and re-validates every
//! precondition.
//!
//! Rules over a configuration `<A, T>` (the program is fixed for a run;
//! `q` names the current assumption, `p` the last trail element):
//!
//! | rule      | premises                                               | result            |
//! |-----------|--------------------------------------------------------|-------------------|
//! | Propose   | V(P,A,p)=unknown, q' from propose(P,p)                 | <{q'}, T>         |
//! | Decide    | A={q}, V(P,{q},p)=true                                 | <{}, T.q>         |
//! | Backtrack | T=T'.p.q, V(P,A,q)!=true, q' from propose(P,p)         | <{q'}, T'.p>      |
//! | Repair1   | A={q}, V(P,{q},p)=unknown, q' from repair(P,p,q,unk)   | <{q'}, T>         |
//! | Repair2   | A={}, T=T'.p.q, V falsified q, q' from repair(P,p,q,f) | <{q'}, T'.p>      |
//! | Succ1     | A={}, V(P,{},p)=true                                   | success           |
//! | Succ2     | A={}, T=T'.p.q, stable(P,q), V(P,{!q},p)=true          | success           |
//! | Fail      | T=[p], V(P,A,p)=false                                  | fail              |
//!
//! Repair2 accepts a falsification recorded under an empty *or* singleton
//! assumption set: falsification under an assumption already refutes
//! invariance of the sub-goal, and only the repair provenance matters for
//! the conclusion.

use crate::lang::{expr_equal, negate, print_expr, Expr, Program, Property, UnOp};
use crate::oracle::{FailKind, Proposal, Provenance};
use crate::verifier::{
    check_stable, verify, Budget, BuiltinMode, Counterexample, Stability, StabilityMethod,
    StabilityReport, Verdict, VerdictValue, VerifierDesc,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    Propose,
    Decide,
    Backtrack,
    Repair1,
    Repair2,
    Succ1,
    Succ2,
    Fail,
}

pub const ALL_RULES: [Rule; 8] = [
    Rule::Propose,
    Rule::Decide,
    Rule::Backtrack,
    Rule::Repair1,
    Rule::Repair2,
    Rule::Succ1,
    Rule::Succ2,
    Rule::Fail,
];

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Rule::Propose => "Propose",
            Rule::Decide => "Decide",
            Rule::Backtrack => "Backtrack",
            Rule::Repair1 => "Repair1",
            Rule::Repair2 => "Repair2",
            Rule::Succ1 => "Succ1",
            Rule::Succ2 => "Succ2",
            Rule::Fail => "Fail",
        };
        f.write_str(name)
    }
}

/// A calculus configuration. The program component is carried by the
/// surrounding trace and never changes under any rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Configuration {
    State {
        /// Empty or singleton assumption.
        assumption: Option<Property>,
        /// Proof goals; never empty, last element is the current goal.
        trail: Vec<Property>,
    },
    Success,
    Failure,
}

impl Configuration {
    pub fn state(&self) -> Option<(&Option<Property>, &[Property])> {
        match self {
            Configuration::State { assumption, trail } => Some((assumption, trail)),
            _ => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        !matches!(self, Configuration::State { .. })
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CalculusError {
    #[error("property {0} does not name a program line")]
    InvalidProperty(String),
    #[error("{rule}: {premise}")]
    PreconditionViolated { rule: String, premise: String },
}

/// Starting configuration `<{}, [p0]>`.
pub fn initial(program: &Program, p0: &Property) -> Result<Configuration, CalculusError> {
    if !program.has_line(p0.line) {
        return Err(CalculusError::InvalidProperty(p0.to_string()));
    }
    Ok(Configuration::State { assumption: None, trail: vec![p0.clone()] })
}

/// A verifier call recorded as a premise, with everything needed to replay
/// it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub assumptions: Vec<Property>,
    pub goal: Property,
    pub value: VerdictValue,
    pub desc: VerifierDesc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityRecord {
    pub property: Property,
    pub stability: Stability,
    pub method: StabilityMethod,
    pub budget: Budget,
}

/// The premises consumed by one rule application.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Premises {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub verdicts: Vec<VerdictRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposal: Option<Proposal>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RuleApplication {
    pub rule: Rule,
    pub premises: Premises,
    pub pre: Configuration,
    pub post: Configuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceOutcome {
    Success,
    Failure,
    Aborted,
}

/// A linear derivation: chained rule applications from the initial
/// configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub initial: Configuration,
    pub steps: Vec<RuleApplication>,
    pub outcome: TraceOutcome,
}

impl Trace {
    pub fn rule_names(&self) -> Vec<String> {
        self.steps.iter().map(|s| s.rule.to_string()).collect()
    }
}

fn prop_eq(a: &Property, b: &Property) -> bool {
    a.line == b.line && expr_equal(&a.predicate, &b.predicate)
}

fn props_eq(a: &[Property], b: &[Property]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| prop_eq(x, y))
}

fn assumption_vec(a: &Option<Property>) -> Vec<Property> {
    a.iter().cloned().collect()
}

/// Is `n` structurally the negation of `q` at the same line?
fn is_negation_of(n: &Property, q: &Property) -> bool {
    if n.line != q.line {
        return false;
    }
    match &n.predicate {
        Expr::Unary(UnOp::Not, inner) => expr_equal(inner, &q.predicate),
        _ => false,
    }
}

struct Check<'a> {
    rule: Rule,
    premises: &'a Premises,
}

impl<'a> Check<'a> {
    fn fail(&self, premise: impl Into<String>) -> CalculusError {
        CalculusError::PreconditionViolated {
            rule: self.rule.to_string(),
            premise: premise.into(),
        }
    }

    /// Find a recorded verdict on `goal` under exactly `assumptions`.
    fn verdict(&self, assumptions: &[Property], goal: &Property) -> Option<&'a VerdictRecord> {
        self.premises
            .verdicts
            .iter()
            .find(|v| prop_eq(&v.goal, goal) && props_eq(&v.assumptions, assumptions))
    }

    fn proposal(&self) -> Result<&'a Proposal, CalculusError> {
        self.premises.proposal.as_ref().ok_or_else(|| self.fail("missing proposal"))
    }
}

/// Apply one rule, validating every premise. Returns the conclusion
/// configuration or the first violated premise.
pub fn apply(
    config: &Configuration,
    rule: Rule,
    premises: &Premises,
) -> Result<Configuration, CalculusError> {
    let c = Check { rule, premises };
    let (assumption, trail) = config
        .state()
        .ok_or_else(|| c.fail("configuration is terminal"))?;
    let p = trail.last().expect("trail non-empty");

    match rule {
        Rule::Propose => {
            let v = c
                .verdict(&assumption_vec(assumption), p)
                .ok_or_else(|| c.fail("no verdict V(P, A, p) recorded"))?;
            if v.value != VerdictValue::Unknown {
                return Err(c.fail("V(P, A, p) must be unknown"));
            }
            let q = c.proposal()?;
            match &q.source {
                Provenance::Propose { goal } if prop_eq(goal, p) => {}
                _ => return Err(c.fail("proposal must come from propose(P, p)")),
            }
            Ok(Configuration::State {
                assumption: Some(q.property.clone()),
                trail: trail.to_vec(),
            })
        }
        Rule::Decide => {
            let q = assumption.as_ref().ok_or_else(|| c.fail("assumption must be a singleton"))?;
            let v = c
                .verdict(std::slice::from_ref(q), p)
                .ok_or_else(|| c.fail("no verdict V(P, {q}, p) recorded"))?;
            if v.value != VerdictValue::True {
                return Err(c.fail("V(P, {q}, p) must be true"));
            }
            let mut new_trail = trail.to_vec();
            new_trail.push(q.clone());
            Ok(Configuration::State { assumption: None, trail: new_trail })
        }
        Rule::Backtrack => {
            if trail.len() < 2 {
                return Err(c.fail("trail must have at least two elements"));
            }
            let pred_goal = &trail[trail.len() - 2];
            let v = c
                .verdict(&assumption_vec(assumption), p)
                .ok_or_else(|| c.fail("no verdict V(P, A, q) recorded"))?;
            if v.value == VerdictValue::True {
                return Err(c.fail("V(P, A, q) must not be true"));
            }
            let q = c.proposal()?;
            match &q.source {
                Provenance::Propose { goal } if prop_eq(goal, pred_goal) => {}
                _ => return Err(c.fail("proposal must come from propose(P, p) for the predecessor goal")),
            }
            Ok(Configuration::State {
                assumption: Some(q.property.clone()),
                trail: trail[..trail.len() - 1].to_vec(),
            })
        }
        Rule::Repair1 => {
            let q_prev = assumption.as_ref().ok_or_else(|| c.fail("assumption must be a singleton"))?;
            let v = c
                .verdict(std::slice::from_ref(q_prev), p)
                .ok_or_else(|| c.fail("no verdict V(P, {q}, p) recorded"))?;
            if v.value != VerdictValue::Unknown {
                return Err(c.fail("V(P, {q}, p) must be unknown"));
            }
            let q = c.proposal()?;
            match &q.source {
                Provenance::Repair { goal, failed, kind: FailKind::Unknown }
                    if prop_eq(goal, p) && prop_eq(failed, q_prev) => {}
                _ => return Err(c.fail("proposal must come from repair(P, p, q, unknown)")),
            }
            Ok(Configuration::State {
                assumption: Some(q.property.clone()),
                trail: trail.to_vec(),
            })
        }
        Rule::Repair2 => {
            if assumption.is_some() {
                return Err(c.fail("assumption must be empty"));
            }
            if trail.len() < 2 {
                return Err(c.fail("trail must have at least two elements"));
            }
            let pred_goal = &trail[trail.len() - 2];
            // Falsification of the popped sub-goal, under the empty set or
            // under any singleton assumption (both refute invariance).
            let falsified = premises.verdicts.iter().any(|v| {
                prop_eq(&v.goal, p) && v.value == VerdictValue::False && v.assumptions.len() <= 1
            });
            if !falsified {
                return Err(c.fail("no falsifying verdict on the sub-goal recorded"));
            }
            let q = c.proposal()?;
            match &q.source {
                Provenance::Repair { goal, failed, kind: FailKind::False }
                    if prop_eq(goal, pred_goal) && prop_eq(failed, p) => {}
                _ => return Err(c.fail("proposal must come from repair(P, p, q, false)")),
            }
            Ok(Configuration::State {
                assumption: Some(q.property.clone()),
                trail: trail[..trail.len() - 1].to_vec(),
            })
        }
        Rule::Succ1 => {
            if assumption.is_some() {
                return Err(c.fail("assumption must be empty"));
            }
            let v = c
                .verdict(&[], p)
                .ok_or_else(|| c.fail("no verdict V(P, {}, p) recorded"))?;
            if v.value != VerdictValue::True {
                return Err(c.fail("V(P, {}, p) must be true"));
            }
            Ok(Configuration::Success)
        }
        Rule::Succ2 => {
            if assumption.is_some() {
                return Err(c.fail("assumption must be empty"));
            }
            if trail.len() < 2 {
                return Err(c.fail("trail must have at least two elements"));
            }
            let pred_goal = &trail[trail.len() - 2];
            let st = premises.stability.as_ref().ok_or_else(|| c.fail("missing stability record"))?;
            if !prop_eq(&st.property, p) {
                return Err(c.fail("stability record must cover the sub-goal"));
            }
            if st.stability != Stability::Stable {
                return Err(c.fail("stable"));
            }
            let w = premises
                .verdicts
                .iter()
                .find(|v| {
                    prop_eq(&v.goal, pred_goal)
                        && v.assumptions.len() == 1
                        && is_negation_of(&v.assumptions[0], p)
                })
                .ok_or_else(|| c.fail("no verdict V(P, {!q}, p) recorded"))?;
            if w.value != VerdictValue::True {
                return Err(c.fail("V(P, {!q}, p) must be true"));
            }
            Ok(Configuration::Success)
        }
        Rule::Fail => {
            if trail.len() != 1 {
                return Err(c.fail("trail must be [p]"));
            }
            let v = c
                .verdict(&assumption_vec(assumption), p)
                .ok_or_else(|| c.fail("no verdict V(P, A, p) recorded"))?;
            if v.value != VerdictValue::False {
                return Err(c.fail("V(P, A, p) must be false"));
            }
            Ok(Configuration::Failure)
        }
    }
}

/// Rules whose premises hold for this configuration and premise set.
pub fn applicable_rules(config: &Configuration, premises: &Premises) -> Vec<Rule> {
    ALL_RULES
        .iter()
        .copied()
        .filter(|r| apply(config, *r, premises).is_ok())
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Certificate {
    pub steps: usize,
    /// Verdicts re-established by rerunning the built-in verifier.
    pub replayed_verdicts: usize,
    /// Verdicts from external or scripted verifiers, accepted as recorded.
    pub trusted_verdicts: usize,
    /// Adjacent trail pairs covered by a recorded True implication.
    pub implication_pairs: usize,
    pub outcome: TraceOutcome,
}

#[derive(Debug, Error)]
pub enum CertificateFailure {
    #[error("step {step}: configurations do not chain")]
    BrokenChain { step: usize },
    #[error("step {step}: {source}")]
    BadStep {
        step: usize,
        #[source]
        source: CalculusError,
    },
    #[error("step {step}: recorded conclusion differs from the rule's conclusion")]
    WrongConclusion { step: usize },
    #[error("step {step}: verdict replay disagrees (recorded {recorded:?}, got {got:?})")]
    VerdictMismatch { step: usize, recorded: VerdictValue, got: VerdictValue },
    #[error("step {step}: stability replay disagrees")]
    StabilityMismatch { step: usize },
    #[error("step {step}: trail pair <{parent}> / <{child}> lacks an implication witness")]
    MissingImplication { step: usize, parent: String, child: String },
    #[error("trace outcome {outcome:?} does not match the final configuration")]
    OutcomeMismatch { outcome: TraceOutcome },
}

/// Replay every recorded premise and re-validate every precondition.
/// Success entails invariance and failure entails non-invariance,
/// conditional on the soundness of the verifiers that produced the
/// premises (built-in verdicts are re-established here; external ones are
/// trusted as configured).
pub fn check_trace(program: &Program, trace: &Trace) -> Result<Certificate, CertificateFailure> {
    let mut current = trace.initial.clone();
    let mut replayed = 0usize;
    let mut trusted = 0usize;
    let mut pairs = 0usize;
    // (parent, child) trail pairs with a recorded True implication.
    let mut witnessed: Vec<(Property, Property)> = Vec::new();

    for (i, step) in trace.steps.iter().enumerate() {
        if step.pre != current {
            return Err(CertificateFailure::BrokenChain { step: i });
        }
        for v in &step.premises.verdicts {
            match &v.desc {
                VerifierDesc::Builtin { mode, budget, .. } => {
                    let got = verify(program, &v.assumptions, &v.goal, budget, *mode);
                    if got.value != v.value {
                        return Err(CertificateFailure::VerdictMismatch {
                            step: i,
                            recorded: v.value,
                            got: got.value,
                        });
                    }
                    replayed += 1;
                }
                VerifierDesc::External { .. } | VerifierDesc::Scripted { .. } => trusted += 1,
            }
        }
        if let Some(st) = &step.premises.stability {
            let ok = match st.method {
                StabilityMethod::Syntactic => {
                    let in_loop = program.line_in_loop(st.property.line).unwrap_or(false);
                    !in_loop && st.stability == Stability::Stable
                }
                StabilityMethod::Exhaustive => {
                    check_stable(program, &st.property, &st.budget).stability == st.stability
                }
            };
            if !ok {
                return Err(CertificateFailure::StabilityMismatch { step: i });
            }
        }
        let conclusion = apply(&step.pre, step.rule, &step.premises)
            .map_err(|source| CertificateFailure::BadStep { step: i, source })?;
        if conclusion != step.post {
            return Err(CertificateFailure::WrongConclusion { step: i });
        }
        if step.rule == Rule::Decide {
            if let (Some((Some(q), trail)), _) = (step.pre.state(), ()) {
                witnessed.push((trail.last().unwrap().clone(), q.clone()));
            }
        }
        // Re-derive the implication chain: every adjacent pair in a
        // reachable trail is witnessed by a recorded True implication.
        if let Some((_, trail)) = conclusion.state() {
            for w in trail.windows(2) {
                if !witnessed.iter().any(|(a, b)| prop_eq(a, &w[0]) && prop_eq(b, &w[1])) {
                    return Err(CertificateFailure::MissingImplication {
                        step: i,
                        parent: w[0].to_string(),
                        child: w[1].to_string(),
                    });
                }
                pairs += 1;
            }
        }
        current = conclusion;
    }

    let outcome_ok = match trace.outcome {
        TraceOutcome::Success => current == Configuration::Success,
        TraceOutcome::Failure => current == Configuration::Failure,
        TraceOutcome::Aborted => !current.is_terminal(),
    };
    if !outcome_ok {
        return Err(CertificateFailure::OutcomeMismatch { outcome: trace.outcome });
    }
    Ok(Certificate {
        steps: trace.steps.len(),
        replayed_verdicts: replayed,
        trusted_verdicts: trusted,
        implication_pairs: pairs,
        outcome: trace.outcome,
    })
}

/// One journal entry: a rule application anchored at an earlier entry (or
/// at the initial configuration). The linear certified trace is the
/// anchor-path from the terminal entry back to the root; entries off that
/// path are abandoned search branches, kept for auditing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JournalEntry {
    pub id: u32,
    /// Anchor entry id; the initial configuration when absent.
    pub anchor: Option<u32>,
    pub app: RuleApplication,
}

pub fn negation_property(q: &Property) -> Property {
    negate(q)
}

pub fn property_text(p: &Property) -> String {
    format!("{} @ {}", print_expr(&p.predicate), p.line)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse_predicate;
    use crate::lang::{parse, DEFAULT_BUILTIN_WIDTH};

    const FIG2: &str = "uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}";

    fn fig2() -> Program {
        parse(FIG2, DEFAULT_BUILTIN_WIDTH).unwrap()
    }

    fn prop(pred: &str, line: u32) -> Property {
        Property::new(parse_predicate(pred).unwrap(), line)
    }

    fn scripted_desc() -> VerifierDesc {
        VerifierDesc::Scripted { label: "test".into() }
    }

    fn verdict(assumptions: &[Property], goal: &Property, value: VerdictValue) -> VerdictRecord {
        VerdictRecord {
            assumptions: assumptions.to_vec(),
            goal: goal.clone(),
            value,
            desc: scripted_desc(),
            counterexample: None,
        }
    }

    fn proposal(pred: &str, line: u32, goal: &Property) -> Proposal {
        Proposal {
            property: prop(pred, line),
            frequency: 1,
            source: Provenance::Propose { goal: goal.clone() },
            raw: pred.into(),
        }
    }

    #[test]
    fn initial_configuration() {
        let p0 = prop("x != 30", 4);
        let c = initial(&fig2(), &p0).unwrap();
        assert_eq!(c, Configuration::State { assumption: None, trail: vec![p0] });
        let bad = prop("x != 30", 77);
        assert!(matches!(initial(&fig2(), &bad), Err(CalculusError::InvalidProperty(_))));
    }

    #[test]
    fn propose_installs_assumption() {
        let p0 = prop("x != 30", 4);
        let c = initial(&fig2(), &p0).unwrap();
        let pr = Premises {
            verdicts: vec![verdict(&[], &p0, VerdictValue::Unknown)],
            proposal: Some(proposal("x % 2 == 0", 3, &p0)),
            stability: None,
        };
        let c2 = apply(&c, Rule::Propose, &pr).unwrap();
        assert_eq!(
            c2,
            Configuration::State {
                assumption: Some(prop("x % 2 == 0", 3)),
                trail: vec![p0]
            }
        );
    }

    #[test]
    fn decide_appends_assumption_to_trail() {
        let p0 = prop("x != 30", 4);
        let q = prop("x % 4 == 0", 3);
        let c = Configuration::State { assumption: Some(q.clone()), trail: vec![p0.clone()] };
        let pr = Premises {
            verdicts: vec![verdict(std::slice::from_ref(&q), &p0, VerdictValue::True)],
            proposal: None,
            stability: None,
        };
        let c2 = apply(&c, Rule::Decide, &pr).unwrap();
        assert_eq!(c2, Configuration::State { assumption: None, trail: vec![p0, q] });
    }

    #[test]
    fn fail_requires_singleton_trail_and_false() {
        let p0 = prop("x != 30", 4);
        let c = initial(&fig2(), &p0).unwrap();
        let pr = Premises {
            verdicts: vec![verdict(&[], &p0, VerdictValue::False)],
            proposal: None,
            stability: None,
        };
        assert_eq!(apply(&c, Rule::Fail, &pr).unwrap(), Configuration::Failure);
        // Under an assumption the falsification still fails the run.
        let q = prop("x % 2 == 0", 3);
        let c = Configuration::State { assumption: Some(q.clone()), trail: vec![p0.clone()] };
        let pr = Premises {
            verdicts: vec![verdict(std::slice::from_ref(&q), &p0, VerdictValue::False)],
            proposal: None,
            stability: None,
        };
        assert_eq!(apply(&c, Rule::Fail, &pr).unwrap(), Configuration::Failure);
    }

    #[test]
    fn succ2_rejects_unstable_subgoal() {
        let p0 = prop("x != 30", 4);
        let q = prop("x % 8 == 4", 3);
        let c = Configuration::State { assumption: None, trail: vec![p0.clone(), q.clone()] };
        let pr = Premises {
            verdicts: vec![VerdictRecord {
                assumptions: vec![negate(&q)],
                goal: p0.clone(),
                value: VerdictValue::True,
                desc: scripted_desc(),
                counterexample: None,
            }],
            proposal: None,
            stability: Some(StabilityRecord {
                property: q.clone(),
                stability: Stability::NotStable,
                method: StabilityMethod::Exhaustive,
                budget: Budget::default(),
            }),
        };
        let err = apply(&c, Rule::Succ2, &pr).unwrap_err();
        assert_eq!(
            err,
            CalculusError::PreconditionViolated { rule: "Succ2".into(), premise: "stable".into() }
        );
    }

    #[test]
    fn applicable_rules_match_decision_table() {
        let p0 = prop("x != 30", 4);
        // <{}, [p0]> with V(P,{},p0)=unknown and one proposal: Propose only.
        let c = initial(&fig2(), &p0).unwrap();
        let pr = Premises {
            verdicts: vec![verdict(&[], &p0, VerdictValue::Unknown)],
            proposal: Some(proposal("x % 2 == 0", 3, &p0)),
            stability: None,
        };
        assert_eq!(applicable_rules(&c, &pr), vec![Rule::Propose]);

        // <{}, [p0]> with V true: Succ1 only.
        let pr = Premises {
            verdicts: vec![verdict(&[], &p0, VerdictValue::True)],
            proposal: None,
            stability: None,
        };
        assert_eq!(applicable_rules(&c, &pr), vec![Rule::Succ1]);

        // <{}, [p0, q]> with V(P,{},q)=false and a propose-proposal for p0
        // plus a repair-proposal: Backtrack and Repair2 both apply.
        let q = prop("x % 4 == 1", 3);
        let c = Configuration::State { assumption: None, trail: vec![p0.clone(), q.clone()] };
        let mut pr = Premises {
            verdicts: vec![verdict(&[], &q, VerdictValue::False)],
            proposal: Some(proposal("x % 2 == 0", 3, &p0)),
            stability: None,
        };
        assert_eq!(applicable_rules(&c, &pr), vec![Rule::Backtrack]);
        pr.proposal = Some(Proposal {
            property: prop("x % 4 == 0", 3),
            frequency: 1,
            source: Provenance::Repair {
                goal: p0.clone(),
                failed: q.clone(),
                kind: FailKind::False,
            },
            raw: "x % 4 == 0".into(),
        });
        assert_eq!(applicable_rules(&c, &pr), vec![Rule::Repair2]);
    }

    fn decide_step(
        pre_assumption: &Property,
        trail: &[Property],
        goal: &Property,
    ) -> RuleApplication {
        let pre = Configuration::State {
            assumption: Some(pre_assumption.clone()),
            trail: trail.to_vec(),
        };
        let premises = Premises {
            verdicts: vec![verdict(
                std::slice::from_ref(pre_assumption),
                goal,
                VerdictValue::True,
            )],
            proposal: None,
            stability: None,
        };
        let post = apply(&pre, Rule::Decide, &premises).unwrap();
        RuleApplication { rule: Rule::Decide, premises, pre, post }
    }

    /// Build the running example's four-step derivation with scripted
    /// verdicts and check its certificate end to end.
    #[test]
    fn golden_derivation_certifies() {
        let program = fig2();
        let p0 = prop("x != 30", 4);
        let q1 = prop("x % 2 == 0", 3);
        let q2 = prop("x % 4 == 0", 3);

        let c0 = initial(&program, &p0).unwrap();
        let s1 = {
            let premises = Premises {
                verdicts: vec![verdict(&[], &p0, VerdictValue::Unknown)],
                proposal: Some(proposal("x % 2 == 0", 3, &p0)),
                stability: None,
            };
            let post = apply(&c0, Rule::Propose, &premises).unwrap();
            RuleApplication { rule: Rule::Propose, premises, pre: c0.clone(), post }
        };
        let s2 = {
            let premises = Premises {
                verdicts: vec![verdict(std::slice::from_ref(&q1), &p0, VerdictValue::Unknown)],
                proposal: Some(Proposal {
                    property: q2.clone(),
                    frequency: 1,
                    source: Provenance::Repair {
                        goal: p0.clone(),
                        failed: q1.clone(),
                        kind: FailKind::Unknown,
                    },
                    raw: "x % 4 == 0".into(),
                }),
                stability: None,
            };
            let post = apply(&s1.post, Rule::Repair1, &premises).unwrap();
            RuleApplication { rule: Rule::Repair1, premises, pre: s1.post.clone(), post }
        };
        let s3 = decide_step(&q2, &[p0.clone()], &p0);
        let s4 = {
            let premises = Premises {
                verdicts: vec![verdict(&[], &q2, VerdictValue::True)],
                proposal: None,
                stability: None,
            };
            let post = apply(&s3.post, Rule::Succ1, &premises).unwrap();
            RuleApplication { rule: Rule::Succ1, premises, pre: s3.post.clone(), post }
        };
        let trace = Trace {
            initial: c0,
            steps: vec![s1, s2, s3, s4],
            outcome: TraceOutcome::Success,
        };
        let cert = check_trace(&program, &trace).unwrap();
        assert_eq!(cert.steps, 4);
        assert_eq!(cert.trusted_verdicts, 4);
        assert!(cert.implication_pairs > 0);

        // Drop the Decide verdict: the certificate must pinpoint step 2.
        let mut broken = trace.clone();
        broken.steps[2].premises.verdicts.clear();
        match check_trace(&program, &broken) {
            Err(CertificateFailure::BadStep { step: 2, .. }) => {}
            other => panic!("expected BadStep at 2, got {other:?}"),
        }
    }
}

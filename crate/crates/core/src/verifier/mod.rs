//! The verifier interface and the built-in checker.
//!
//! `verify(P, A, p)` answers True/False/Unknown for "does the assumption
//! set A imply the goal p on P". True and False are trusted; Unknown is
//! inconclusive (budget exhaustion, sampled nondeterminism, or a failed
//! induction step). The built-in checker has two engines:
//!
//! * `Exhaustive` - explicit-state search with fixpoint detection over the
//!   finite state space induced by the program width. Sound and complete
//!   at small widths; the desk-scale reference.
//! * `KInduction { k }` - a bounded base case plus a loop-head havoc
//!   induction step. Sound but incomplete, with the verdict profile of
//!   k-induction tools: weak assumptions leave the goal Unknown while an
//!   inductive assumption proves it.

mod exhaustive;
mod kinduction;
mod stability;

pub use stability::{check_stable, Stability, StabilityMethod, StabilityReport};

use crate::exec::{flatten, Image};
use crate::lang::{Program, Property};
use serde::{Deserialize, Serialize};
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictValue {
    True,
    False,
    Unknown,
}

/// A counterexample: the `rand()` draws of a violating execution, in draw
/// order, replayable through the evaluator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counterexample {
    pub resolution: Vec<u64>,
    pub violating_line: u32,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct VerifyStats {
    pub states: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub value: VerdictValue,
    pub counterexample: Option<Counterexample>,
    #[serde(default)]
    pub stats: VerifyStats,
}

impl Verdict {
    pub fn unknown() -> Verdict {
        Verdict { value: VerdictValue::Unknown, counterexample: None, stats: VerifyStats::default() }
    }

    pub fn of(value: VerdictValue) -> Verdict {
        Verdict { value, counterexample: None, stats: VerifyStats::default() }
    }
}

/// The `rand()` branching domain used during exploration. Sampling keeps
/// soundness by demoting would-be True verdicts to Unknown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RandDomain {
    Full,
    Sample(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub max_states: u64,
    pub max_wall: Duration,
    pub rand_domain: RandDomain,
}

pub const DEFAULT_VERIFIER_TIMEOUT: Duration = Duration::from_secs(30);

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_states: 1_000_000,
            max_wall: DEFAULT_VERIFIER_TIMEOUT,
            rand_domain: RandDomain::Full,
        }
    }
}

impl Budget {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_states == 0 {
            return Err("max_states must be positive".into());
        }
        if self.max_wall.is_zero() {
            return Err("max_wall must be positive".into());
        }
        if let RandDomain::Sample(vals) = &self.rand_domain {
            if vals.is_empty() {
                return Err("sampled rand domain must be non-empty".into());
            }
        }
        Ok(())
    }

    pub fn with_max_states(mut self, n: u64) -> Budget {
        self.max_states = n;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BuiltinMode {
    Exhaustive,
    KInduction { k: u32 },
}

/// Description of the verifier that produced a verdict, recorded with each
/// rule premise so traces can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VerifierDesc {
    Builtin { mode: BuiltinMode, budget: Budget },
    External { name: String },
    Scripted { label: String },
}

pub trait PropertyVerifier {
    fn verify(&self, program: &Program, assumptions: &[Property], goal: &Property) -> Verdict;
    fn descriptor(&self) -> VerifierDesc;
}

#[derive(Debug, Clone)]
pub struct BuiltinVerifier {
    pub budget: Budget,
    pub mode: BuiltinMode,
}

impl Default for BuiltinVerifier {
    fn default() -> Self {
        BuiltinVerifier { budget: Budget::default(), mode: BuiltinMode::Exhaustive }
    }
}

impl BuiltinVerifier {
    pub fn exhaustive(budget: Budget) -> BuiltinVerifier {
        BuiltinVerifier { budget, mode: BuiltinMode::Exhaustive }
    }

    pub fn kinduction(k: u32, budget: Budget) -> BuiltinVerifier {
        BuiltinVerifier { budget, mode: BuiltinMode::KInduction { k } }
    }
}

impl PropertyVerifier for BuiltinVerifier {
    fn verify(&self, program: &Program, assumptions: &[Property], goal: &Property) -> Verdict {
        verify(program, assumptions, goal, &self.budget, self.mode)
    }

    fn descriptor(&self) -> VerifierDesc {
        VerifierDesc::Builtin { mode: self.mode, budget: self.budget.clone() }
    }
}

/// Build `asm(...asm(P, q1)..., qn)` and check whether the goal predicate
/// holds at every surviving visit to its line.
pub fn verify(
    program: &Program,
    assumptions: &[Property],
    goal: &Property,
    budget: &Budget,
    mode: BuiltinMode,
) -> Verdict {
    let mut instrumented = program.clone();
    for q in assumptions {
        match instrumented.instrument_assume(q) {
            Ok(p) => instrumented = p,
            // An assumption at a nonexistent line can never fire.
            Err(_) => {}
        }
    }
    let image = flatten(&instrumented);
    match mode {
        BuiltinMode::Exhaustive => exhaustive::run(&instrumented, &image, goal, budget),
        BuiltinMode::KInduction { k } => kinduction::run(&instrumented, &image, goal, budget, k.max(1)),
    }
}

pub(crate) struct Expander<'a> {
    pub program: &'a Program,
    pub image: &'a Image,
    pub domain_cache: Vec<u64>,
}

impl<'a> Expander<'a> {
    pub fn new(program: &'a Program, image: &'a Image, budget: &Budget) -> Expander<'a> {
        let domain_cache = match &budget.rand_domain {
            RandDomain::Full => Vec::new(),
            RandDomain::Sample(vals) => vals.clone(),
        };
        Expander { program, image, domain_cache }
    }

    pub fn sampled(&self) -> bool {
        !self.domain_cache.is_empty()
    }

    /// Values a `rand()` of `width` may take under the current domain.
    pub fn domain(&self, width: u32) -> Vec<u64> {
        if self.domain_cache.is_empty() {
            (0..(1u64 << width.min(20))).collect()
        } else {
            let m = crate::exec::mask(width);
            let mut vals: Vec<u64> = self.domain_cache.iter().map(|v| v & m).collect();
            vals.sort_unstable();
            vals.dedup();
            vals
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, parse::parse_predicate, DEFAULT_BUILTIN_WIDTH};

    const FIG2: &str = "uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}";

    fn fig2() -> Program {
        parse(FIG2, DEFAULT_BUILTIN_WIDTH).unwrap()
    }

    fn prop(pred: &str, line: u32) -> Property {
        Property::new(parse_predicate(pred).unwrap(), line)
    }

    #[test]
    fn fig2_goal_holds_exhaustively() {
        // Reachable x at line 4 is the 64-value cycle {4, 8, ..., 252, 0};
        // 30 is not a multiple of 4.
        let v = verify(&fig2(), &[], &prop("x != 30", 4), &Budget::default(), BuiltinMode::Exhaustive);
        assert_eq!(v.value, VerdictValue::True);
    }

    #[test]
    fn fig2_goal_holds_under_invariant_assumption() {
        let v = verify(
            &fig2(),
            &[prop("x % 4 == 0", 3)],
            &prop("x != 30", 4),
            &Budget::default(),
            BuiltinMode::Exhaustive,
        );
        assert_eq!(v.value, VerdictValue::True);
    }

    #[test]
    fn fig2_non_invariant_is_falsified_with_replayable_cex() {
        let v = verify(&fig2(), &[], &prop("x % 4 == 1", 3), &Budget::default(), BuiltinMode::Exhaustive);
        assert_eq!(v.value, VerdictValue::False);
        let cex = v.counterexample.expect("counterexample");
        assert_eq!(cex.violating_line, 3);
        // Replay: first loop entry with x = 0.
        let t = crate::exec::evaluate(&fig2(), &cex.resolution).unwrap();
        let (line, store) = t.steps.last().unwrap();
        assert_eq!(*line, 3);
        assert_eq!(store[0], 0);
    }

    #[test]
    fn budget_exhaustion_is_unknown() {
        let p = parse("uint32_t x=rand();\nassert(x==1);\n", DEFAULT_BUILTIN_WIDTH).unwrap();
        let v = verify(
            &p,
            &[],
            &prop("x == 1", 2),
            &Budget::default().with_max_states(1),
            BuiltinMode::Exhaustive,
        );
        assert_eq!(v.value, VerdictValue::Unknown);
    }

    #[test]
    fn sampled_domain_never_reports_true() {
        let p = fig2();
        let mut b = Budget::default();
        b.rand_domain = RandDomain::Sample(vec![0, 1]);
        let v = verify(&p, &[], &prop("x != 30", 4), &b, BuiltinMode::Exhaustive);
        assert_eq!(v.value, VerdictValue::Unknown);
        // A violation found under sampling is still a real violation.
        let v = verify(&p, &[], &prop("x % 4 == 1", 3), &b, BuiltinMode::Exhaustive);
        assert_eq!(v.value, VerdictValue::False);
    }

    #[test]
    fn kinduction_profile_matches_running_example() {
        let p = fig2();
        let b = Budget::default();
        let kind = BuiltinMode::KInduction { k: 1 };
        // Not 1-inductive without help.
        assert_eq!(verify(&p, &[], &prop("x != 30", 4), &b, kind).value, VerdictValue::Unknown);
        // x%2==0 is an invariant but too weak.
        assert_eq!(
            verify(&p, &[prop("x % 2 == 0", 3)], &prop("x != 30", 4), &b, kind).value,
            VerdictValue::Unknown
        );
        // x%4==0 makes the goal inductive.
        assert_eq!(
            verify(&p, &[prop("x % 4 == 0", 3)], &prop("x != 30", 4), &b, kind).value,
            VerdictValue::True
        );
        // ...and is itself 1-inductive.
        assert_eq!(verify(&p, &[], &prop("x % 4 == 0", 3), &b, kind).value, VerdictValue::True);
        // The truncating assumption proves the goal vacuously in the base.
        assert_eq!(
            verify(&p, &[prop("x % 4 == 1", 3)], &prop("x != 30", 4), &b, kind).value,
            VerdictValue::True
        );
        // Falsification in the base is a real counterexample.
        let v = verify(&p, &[], &prop("x % 4 == 1", 3), &b, kind);
        assert_eq!(v.value, VerdictValue::False);
        assert!(v.counterexample.is_some());
        // The negated sub-goal does not make the goal inductive.
        assert_eq!(
            verify(&p, &[prop("!(x % 4 == 1)", 3)], &prop("x != 30", 4), &b, kind).value,
            VerdictValue::Unknown
        );
    }

    #[test]
    fn stability_examples() {
        let loop_free = parse("uint32_t x=rand();\nassert(x==1);\n", DEFAULT_BUILTIN_WIDTH).unwrap();
        let r = check_stable(&loop_free, &prop("x == 1", 2), &Budget::default());
        assert_eq!(r.stability, Stability::Stable);
        assert_eq!(r.method, StabilityMethod::Syntactic);

        // x%8==4 flips between iterations within one execution.
        let r = check_stable(&fig2(), &prop("x % 8 == 4", 3), &Budget::default());
        assert_eq!(r.stability, Stability::NotStable);
        assert!(r.witness.is_some());

        // x%4==1 is always false at line 3: stable but not invariant.
        let r = check_stable(&fig2(), &prop("x % 4 == 1", 3), &Budget::default());
        assert_eq!(r.stability, Stability::Stable);
        assert_eq!(r.method, StabilityMethod::Exhaustive);
    }

    #[test]
    fn vacuous_goal_on_unvisited_line_is_true() {
        let p = parse("uint32_t x=0;\nassert(x==0);\n", DEFAULT_BUILTIN_WIDTH).unwrap();
        let v = verify(&p, &[prop("x == 9", 2)], &prop("x == 1", 2), &Budget::default(), BuiltinMode::Exhaustive);
        // The assumption truncates every execution at line 2 before the goal
        // is ever evaluated there... assumption and goal share the line, so
        // the assume runs first and the goal is checked only on surviving
        // visits; x==9 never holds, so the goal holds vacuously.
        assert_eq!(v.value, VerdictValue::True);
    }
}

//! Proposal oracles.
//!
//! `propose` asks for candidate properties that may imply the current
//! goal; `repair` asks to fix a previously proposed property that was
//! falsified ("incorrect") or too weak to close the implication. Backends:
//! a live chat-completion endpoint, a deterministic script, or a replay of
//! a recorded log. Every backend goes through the same pipeline: build
//! prompt, collect samples, parse, merge by structural equality, rank by
//! frequency (ties: shorter text, then lexicographic), and keep only
//! proposals strictly above the goal line.

mod http;
mod parse;
mod prompt;
mod script;

pub use http::{LiveOracle, ReplayLog, ReplayOracle, ReplayRecord};
pub use parse::parse_response;
pub use prompt::{build_propose_prompt, build_repair_prompt, PromptError};
pub use script::{Script, ScriptEntry, ScriptedOracle};

use crate::lang::{expr_equal, print_expr, Program, Property};
use crate::verifier::VerdictValue;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Why a proposal is being repaired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailKind {
    /// The property was falsified.
    False,
    /// The verifier could not close the implication.
    Unknown,
}

impl FailKind {
    pub fn from_verdict(v: VerdictValue) -> Option<FailKind> {
        match v {
            VerdictValue::False => Some(FailKind::False),
            VerdictValue::Unknown => Some(FailKind::Unknown),
            VerdictValue::True => None,
        }
    }
}

/// Where a proposal came from; carried into the deductive engine so rule
/// premises can be checked against the oracle call that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Propose { goal: Property },
    Repair { goal: Property, failed: Property, kind: FailKind },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Proposal {
    pub property: Property,
    /// Occurrences across samples after structural merging.
    pub frequency: u32,
    pub source: Provenance,
    /// Raw response text this proposal was first extracted from.
    pub raw: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OracleMode {
    Live,
    Scripted,
    Replay,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleConfig {
    pub endpoint: String,
    pub model: String,
    /// Samples per penalty setting.
    pub samples: u32,
    pub penalties: Vec<f64>,
    pub max_tokens: u32,
    /// Environment variable that holds the API key.
    pub api_key_env: String,
    pub mode: OracleMode,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4".into(),
            samples: 4,
            penalties: vec![1.5, 2.0],
            max_tokens: 512,
            api_key_env: "OPENAI_API_KEY".into(),
            mode: OracleMode::Scripted,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.samples < 1 {
            return Err("samples must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("oracle unavailable: {0}")]
    Unavailable(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// A proposal oracle. Implementations return raw sample texts; the
/// pipeline in [`run_propose`] / [`run_repair`] does the rest.
pub trait Oracle {
    /// One raw response text per sample.
    fn sample_propose(&mut self, program: &Program, goal: &Property) -> Result<Vec<String>, OracleError>;
    fn sample_repair(
        &mut self,
        program: &Program,
        goal: &Property,
        failed: &Property,
        kind: FailKind,
    ) -> Result<Vec<String>, OracleError>;
    fn id(&self) -> String;
}

/// Merge structurally equal proposals (same line), summing frequencies,
/// then order by frequency descending, shorter printed expression first,
/// lexicographic as the final determinizer.
pub fn rank_and_dedup(proposals: Vec<Proposal>) -> Vec<Proposal> {
    let mut merged: Vec<Proposal> = Vec::new();
    for p in proposals {
        match merged.iter_mut().find(|m| {
            m.property.line == p.property.line
                && expr_equal(&m.property.predicate, &p.property.predicate)
        }) {
            Some(m) => m.frequency += p.frequency,
            None => merged.push(p),
        }
    }
    merged.sort_by(|a, b| {
        let ka = print_expr(&a.property.predicate);
        let kb = print_expr(&b.property.predicate);
        b.frequency
            .cmp(&a.frequency)
            .then(ka.len().cmp(&kb.len()))
            .then(ka.cmp(&kb))
    });
    merged
}

/// Termination guard: keep only proposals strictly above the goal line.
/// A proposal identical to the goal at the same line is dropped with the
/// rest of the same-line proposals.
pub fn enforce_condition1(proposals: Vec<Proposal>, goal: &Property) -> Vec<Proposal> {
    proposals
        .into_iter()
        .filter(|p| p.property.line < goal.line)
        .collect()
}

fn parse_samples(
    samples: &[String],
    markers: &std::collections::BTreeMap<String, u32>,
    source: &Provenance,
) -> Vec<Proposal> {
    let mut out = Vec::new();
    for text in samples {
        for (property, raw) in parse_response(text, markers) {
            out.push(Proposal { property, frequency: 1, source: source.clone(), raw });
        }
    }
    out
}

/// Full propose pipeline over any [`Oracle`] backend.
pub fn run_propose(
    oracle: &mut dyn Oracle,
    program: &Program,
    goal: &Property,
) -> Result<Vec<Proposal>, OracleError> {
    let samples = oracle.sample_propose(program, goal)?;
    let source = Provenance::Propose { goal: goal.clone() };
    let parsed = parse_samples(&samples, &program.markers, &source);
    Ok(enforce_condition1(rank_and_dedup(parsed), goal))
}

/// Full repair pipeline. Responses are parsed against a single-marker map
/// at the failed property's line.
pub fn run_repair(
    oracle: &mut dyn Oracle,
    program: &Program,
    goal: &Property,
    failed: &Property,
    kind: FailKind,
) -> Result<Vec<Proposal>, OracleError> {
    let samples = oracle.sample_repair(program, goal, failed, kind)?;
    let mut markers = std::collections::BTreeMap::new();
    markers.insert("A".to_string(), failed.line);
    let source =
        Provenance::Repair { goal: goal.clone(), failed: failed.clone(), kind };
    let parsed = parse_samples(&samples, &markers, &source);
    Ok(enforce_condition1(rank_and_dedup(parsed), goal))
}

/// Fingerprint of an oracle call, used to key scripts and replay logs.
pub fn call_fingerprint(program: &Program, goal: &Property, kind: &str) -> String {
    let mut h = Sha256::new();
    h.update(crate::lang::print_program(program, &crate::lang::PrintOptions::default()));
    h.update([0]);
    h.update(print_expr(&goal.predicate));
    h.update([0]);
    h.update(goal.line.to_le_bytes());
    h.update([0]);
    h.update(kind.as_bytes());
    hex(&h.finalize()[..8])
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse_predicate;

    fn prop(pred: &str, line: u32, freq: u32) -> Proposal {
        Proposal {
            property: Property::new(parse_predicate(pred).unwrap(), line),
            frequency: freq,
            source: Provenance::Propose {
                goal: Property::new(parse_predicate("x == 0").unwrap(), 9),
            },
            raw: pred.to_string(),
        }
    }

    #[test]
    fn rank_merges_and_orders() {
        let ranked = rank_and_dedup(vec![
            prop("s >= 0 && v >= 0", 8, 1),
            prop("i <= n", 8, 1),
            prop("s >= i", 8, 1),
            prop("i <= n", 8, 1),
        ]);
        assert_eq!(print_expr(&ranked[0].property.predicate), "i <= n");
        assert_eq!(ranked[0].frequency, 2);
        // freq-1 tie broken by length: "s >= i" before "s >= 0 && v >= 0"
        assert_eq!(print_expr(&ranked[1].property.predicate), "s >= i");
    }

    #[test]
    fn rank_empty_is_empty() {
        assert!(rank_and_dedup(Vec::new()).is_empty());
    }

    #[test]
    fn condition1_is_strict() {
        let goal = Property::new(parse_predicate("x != 30").unwrap(), 4);
        let kept = enforce_condition1(vec![prop("x % 2 == 0", 3, 1)], &goal);
        assert_eq!(kept.len(), 1);
        let dropped = enforce_condition1(vec![prop("x % 2 == 0", 4, 1)], &goal);
        assert!(dropped.is_empty());
        // A line-0 proposal against a line-1 goal is kept; nothing can sit
        // below it, so recursion bottoms out there.
        let goal1 = Property::new(parse_predicate("x != 30").unwrap(), 1);
        let kept = enforce_condition1(vec![prop("x == 0", 0, 1)], &goal1);
        assert_eq!(kept.len(), 1);
    }
}

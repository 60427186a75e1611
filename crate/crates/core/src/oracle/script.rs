//! Deterministic scripted oracle: canned response texts matched by call
//! kind and (optionally) by goal or failed predicate, consumed in order.
//! Replay is deterministic given the same call sequence.

use super::{FailKind, Oracle, OracleError};
use crate::lang::{print_expr, Program, Property};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// "propose" or "repair".
    pub kind: String,
    /// Canonical goal predicate text; matches any goal when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<String>,
    /// Canonical failed-proposal text (repair entries).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
    /// "false" or "unknown" (repair entries); matches both when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<String>,
    /// One response text per sample.
    pub responses: Vec<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Script {
    pub entries: Vec<ScriptEntry>,
}

impl Script {
    pub fn from_json(text: &str) -> Result<Script, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("script serializes")
    }
}

pub struct ScriptedOracle {
    script: Script,
    consumed: Vec<bool>,
}

impl ScriptedOracle {
    pub fn new(script: Script) -> ScriptedOracle {
        let consumed = vec![false; script.entries.len()];
        ScriptedOracle { script, consumed }
    }

    /// First unconsumed entry matching the call; consumes it whole.
    fn take(&mut self, kind: &str, goal: &str, failed: Option<&str>, verdict: Option<&str>) -> Vec<String> {
        for (i, e) in self.script.entries.iter().enumerate() {
            if self.consumed[i] || e.kind != kind {
                continue;
            }
            if let Some(g) = &e.goal {
                if g != goal {
                    continue;
                }
            }
            if let (Some(f), Some(actual)) = (&e.failed, failed) {
                if f != actual {
                    continue;
                }
            }
            if let (Some(v), Some(actual)) = (&e.verdict, verdict) {
                if v != actual {
                    continue;
                }
            }
            self.consumed[i] = true;
            return e.responses.clone();
        }
        Vec::new()
    }
}

impl Oracle for ScriptedOracle {
    fn sample_propose(&mut self, _program: &Program, goal: &Property) -> Result<Vec<String>, OracleError> {
        Ok(self.take("propose", &print_expr(&goal.predicate), None, None))
    }

    fn sample_repair(
        &mut self,
        _program: &Program,
        goal: &Property,
        failed: &Property,
        kind: FailKind,
    ) -> Result<Vec<String>, OracleError> {
        let verdict = match kind {
            FailKind::False => "false",
            FailKind::Unknown => "unknown",
        };
        Ok(self.take(
            "repair",
            &print_expr(&goal.predicate),
            Some(&print_expr(&failed.predicate)),
            Some(verdict),
        ))
    }

    fn id(&self) -> String {
        "scripted".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::parse_predicate;
    use crate::lang::parse;

    #[test]
    fn scripted_runs_are_deterministic() {
        let script = Script {
            entries: vec![
                ScriptEntry {
                    kind: "propose".into(),
                    goal: None,
                    failed: None,
                    verdict: None,
                    responses: vec!["assert(x % 2 == 0); // line A".into()],
                },
                ScriptEntry {
                    kind: "repair".into(),
                    goal: None,
                    failed: Some("x % 2 == 0".into()),
                    verdict: Some("unknown".into()),
                    responses: vec!["assert(x % 4 == 0); // line A".into()],
                },
            ],
        };
        let program = parse(
            "uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}",
            8,
        )
        .unwrap()
        .insert_placeholders();
        let goal = Property::new(parse_predicate("x != 30").unwrap(), 4);
        let failed = Property::new(parse_predicate("x % 2 == 0").unwrap(), 3);

        let run = || {
            let mut o = ScriptedOracle::new(script.clone());
            let p1 = super::super::run_propose(&mut o, &program, &goal).unwrap();
            let r1 =
                super::super::run_repair(&mut o, &program, &goal, &failed, FailKind::Unknown).unwrap();
            let empty = super::super::run_propose(&mut o, &program, &goal).unwrap();
            (p1, r1, empty)
        };
        let (a1, a2, a3) = run();
        let (b1, b2, b3) = run();
        assert_eq!(format!("{a1:?}{a2:?}{a3:?}"), format!("{b1:?}{b2:?}{b3:?}"));
        assert_eq!(a1.len(), 1);
        assert_eq!(a1[0].property.line, 3);
        assert_eq!(a2.len(), 1);
        assert!(a3.is_empty());
    }

    #[test]
    fn empty_script_gives_empty_proposals() {
        let mut o = ScriptedOracle::new(Script::default());
        let program = parse("uint32_t x=0;\nassert(x==0);\n", 8).unwrap().insert_placeholders();
        let goal = Property::new(parse_predicate("x == 0").unwrap(), 2);
        assert!(super::super::run_propose(&mut o, &program, &goal).unwrap().is_empty());
    }

    #[test]
    fn script_round_trips_through_json() {
        let s = Script {
            entries: vec![ScriptEntry {
                kind: "propose".into(),
                goal: Some("x != 30".into()),
                failed: None,
                verdict: None,
                responses: vec!["assert(x % 2 == 0); // line A".into()],
            }],
        };
        let back = Script::from_json(&s.to_json()).unwrap();
        assert_eq!(back.entries.len(), 1);
        assert_eq!(back.entries[0].goal.as_deref(), Some("x != 30"));
    }
}

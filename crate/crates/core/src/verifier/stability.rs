//! Stability: within any single execution, a property's predicate keeps one
//! truth value at its line. Loop-free locations are stable syntactically;
//! otherwise stability is a path property, checked on a product state space
//! that tracks which truth values the execution has seen at the line.

use super::exhaustive::{eval_pred, Expansion, Explorer};
use super::Budget;
use crate::exec::flatten;
use crate::lang::{Program, Property};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability {
    Stable,
    NotStable,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityMethod {
    /// The line is outside every loop.
    Syntactic,
    Exhaustive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stability: Stability,
    pub method: StabilityMethod,
    /// For NotStable: draws of an execution that sees both truth values.
    pub witness: Option<Vec<u64>>,
}

pub fn check_stable(program: &Program, q: &Property, budget: &Budget) -> StabilityReport {
    match program.line_in_loop(q.line) {
        Ok(true) => {}
        // Loop-free location, or a line the program never visits.
        _ => {
            return StabilityReport {
                stability: Stability::Stable,
                method: StabilityMethod::Syntactic,
                witness: None,
            }
        }
    }

    let image = flatten(program);
    let mut ex = Explorer::new(program, &image, budget);
    // state: (pc, store) plus (seen_true, seen_false) along the path
    let mut seen: HashMap<(u32, Box<[u64]>, bool, bool), ()> = HashMap::new();
    let mut queue: VecDeque<(u32, bool, bool)> = VecDeque::new();

    let init: Box<[u64]> = vec![0u64; image.nvars].into();
    seen.insert((0, init.clone(), false, false), ());
    let root = ex.push_node(0, init, u32::MAX, Vec::new());
    queue.push_back((root, false, false));

    let mut incomplete = ex.sampled;
    while let Some((idx, mut st, mut sf)) = queue.pop_front() {
        if ex.over_budget() {
            return StabilityReport {
                stability: Stability::Unknown,
                method: StabilityMethod::Exhaustive,
                witness: None,
            };
        }
        let (pc, store) = ex.node(idx);
        let store = store.to_vec();
        if (pc as usize) < image.slots.len() {
            let slot = &image.slots[pc as usize];
            if slot.line_entry {
                if !ex.assumes_pass(pc, &store) {
                    continue;
                }
                if slot.line == q.line {
                    if eval_pred(program, &image, &q.predicate, &store) != 0 {
                        st = true;
                    } else {
                        sf = true;
                    }
                    if st && sf {
                        return StabilityReport {
                            stability: Stability::NotStable,
                            method: StabilityMethod::Exhaustive,
                            witness: Some(ex.resolution_to(idx)),
                        };
                    }
                }
            }
        }
        match ex.step(pc, &store) {
            None => incomplete = true,
            Some(Expansion::Terminal) => {}
            Some(Expansion::Step(succs)) => {
                for (npc, nstore, draws) in succs {
                    let key = (npc, nstore.clone(), st, sf);
                    if !seen.contains_key(&key) {
                        seen.insert(key, ());
                        let nidx = ex.push_node(npc, nstore, idx, draws);
                        queue.push_back((nidx, st, sf));
                    }
                }
            }
        }
    }

    if ex.budget_hit || incomplete {
        StabilityReport { stability: Stability::Unknown, method: StabilityMethod::Exhaustive, witness: None }
    } else {
        StabilityReport { stability: Stability::Stable, method: StabilityMethod::Exhaustive, witness: None }
    }
}

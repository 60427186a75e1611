//! k-induction over the explicit-state semantics.
//!
//! Base: explore real executions, checking the goal at the first `k`
//! visits to its line on each path and cutting the path there; a violation
//! is a real counterexample. If exploration finishes without ever cutting
//! a path, coverage was total and the goal is proved outright.
//!
//! Step: havoc the store at every loop-body entry; along each havoc run,
//! assume the goal at its first `k` visits and check it at visit `k+1`.
//! Any real violation beyond the base has a havoc run that catches it, so
//! a clean step proves the goal; a failed step only means Unknown.

use super::exhaustive::{eval_pred, Expansion, Explorer};
use super::{Budget, Counterexample, Verdict, VerdictValue};
use crate::exec::{loop_body_entries, Image};
use crate::lang::{Program, Property};
use std::collections::{HashMap, VecDeque};

pub(super) fn run(
    program: &Program,
    image: &Image,
    goal: &Property,
    budget: &Budget,
    k: u32,
) -> Verdict {
    let mut ex = Explorer::new(program, image, budget);
    let mut seen: HashMap<(u32, Box<[u64]>, u32), ()> = HashMap::new();
    let mut queue: VecDeque<(u32, u32)> = VecDeque::new(); // (node, visits)

    let init_store: Box<[u64]> = vec![0u64; image.nvars].into();
    seen.insert((0, init_store.clone(), 0), ());
    let root = ex.push_node(0, init_store, u32::MAX, Vec::new());
    queue.push_back((root, 0));

    let mut any_retired = false;
    let mut incomplete = ex.sampled;

    while let Some((idx, visits)) = queue.pop_front() {
        if ex.over_budget() {
            return Verdict { value: VerdictValue::Unknown, counterexample: None, stats: ex.stats() };
        }
        let (pc, store) = ex.node(idx);
        let store = store.to_vec();
        let mut visits = visits;
        if (pc as usize) < image.slots.len() {
            let slot = &image.slots[pc as usize];
            if slot.line_entry {
                if !ex.assumes_pass(pc, &store) {
                    continue;
                }
                if slot.line == goal.line {
                    if eval_pred(program, image, &goal.predicate, &store) == 0 {
                        return Verdict {
                            value: VerdictValue::False,
                            counterexample: Some(Counterexample {
                                resolution: ex.resolution_to(idx),
                                violating_line: goal.line,
                            }),
                            stats: ex.stats(),
                        };
                    }
                    visits += 1;
                    if visits >= k {
                        // Checked visits 1..k; the suffix belongs to the step.
                        any_retired = true;
                        continue;
                    }
                }
            }
        }
        match ex.step(pc, &store) {
            None => incomplete = true,
            Some(Expansion::Terminal) => {}
            Some(Expansion::Step(succs)) => {
                for (npc, nstore, draws) in succs {
                    let key = (npc, nstore.clone(), visits);
                    if !seen.contains_key(&key) {
                        seen.insert(key, ());
                        let nidx = ex.push_node(npc, nstore, idx, draws);
                        queue.push_back((nidx, visits));
                    }
                }
            }
        }
    }

    if ex.budget_hit || incomplete {
        return Verdict { value: VerdictValue::Unknown, counterexample: None, stats: ex.stats() };
    }
    if !any_retired {
        // Every path terminated within its first k goal visits: the base
        // was already a complete exploration.
        return Verdict { value: VerdictValue::True, counterexample: None, stats: ex.stats() };
    }
    step_phase(program, image, goal, budget, k, ex)
}

fn step_phase(
    program: &Program,
    image: &Image,
    goal: &Property,
    budget: &Budget,
    k: u32,
    mut ex: Explorer<'_>,
) -> Verdict {
    let entries = loop_body_entries(image);
    if entries.is_empty() {
        // A line visited more than once must sit in a loop, so with no
        // loops the base already covered every visit.
        return Verdict { value: VerdictValue::True, counterexample: None, stats: ex.stats() };
    }

    // Havoc seeding: every store at every loop-body entry.
    let mut seed_count: u64 = entries.len() as u64;
    for w in &image.var_widths {
        if *w > 16 {
            return Verdict { value: VerdictValue::Unknown, counterexample: None, stats: ex.stats() };
        }
        seed_count = seed_count.saturating_mul(1u64 << *w);
    }
    if seed_count.saturating_add(ex.states) > budget.max_states {
        return Verdict { value: VerdictValue::Unknown, counterexample: None, stats: ex.stats() };
    }

    let mut seen: HashMap<(u32, Box<[u64]>, u32), ()> = HashMap::new();
    let mut queue: VecDeque<(u32, Box<[u64]>, u32)> = VecDeque::new();
    for entry in entries {
        let mut store = vec![0u64; image.nvars];
        loop {
            let boxed: Box<[u64]> = store.clone().into();
            let key = (entry as u32, boxed.clone(), 0u32);
            if !seen.contains_key(&key) {
                seen.insert(key, ());
                queue.push_back((entry as u32, boxed, 0));
            }
            // Odometer over the per-variable domains.
            let mut pos = image.nvars;
            loop {
                if pos == 0 {
                    store.clear();
                    break;
                }
                pos -= 1;
                store[pos] += 1;
                if store[pos] < (1u64 << image.var_widths[pos]) {
                    break;
                }
                store[pos] = 0;
            }
            if store.is_empty() {
                break;
            }
        }
    }

    while let Some((pc, store, mut visits)) = queue.pop_front() {
        ex.states += 1;
        if ex.over_budget() {
            return Verdict { value: VerdictValue::Unknown, counterexample: None, stats: ex.stats() };
        }
        let store_vec = store.to_vec();
        if (pc as usize) < image.slots.len() {
            let slot = &image.slots[pc as usize];
            if slot.line_entry {
                if !ex.assumes_pass(pc, &store_vec) {
                    continue;
                }
                if slot.line == goal.line {
                    let holds = eval_pred(program, image, &goal.predicate, &store_vec) != 0;
                    if visits < k {
                        if !holds {
                            continue; // outside the induction hypothesis
                        }
                        visits += 1;
                    } else {
                        if !holds {
                            // Induction step failed; inconclusive.
                            return Verdict {
                                value: VerdictValue::Unknown,
                                counterexample: None,
                                stats: ex.stats(),
                            };
                        }
                        continue; // visit k+1 verified, retire the path
                    }
                }
            }
        }
        match ex.step(pc, &store_vec) {
            None => {
                return Verdict { value: VerdictValue::Unknown, counterexample: None, stats: ex.stats() }
            }
            Some(Expansion::Terminal) => {}
            Some(Expansion::Step(succs)) => {
                for (npc, nstore, _draws) in succs {
                    let key = (npc, nstore.clone(), visits);
                    if !seen.contains_key(&key) {
                        seen.insert(key, ());
                        queue.push_back((npc, nstore, visits));
                    }
                }
            }
        }
    }
    Verdict { value: VerdictValue::True, counterexample: None, stats: ex.stats() }
}

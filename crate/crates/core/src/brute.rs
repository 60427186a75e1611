//! Brute-force execution enumeration: a deliberately simple depth-first
//! walk of the reachable `(pc, store)` space, used as a second opinion
//! against the verifier. It shares the instruction semantics but none of
//! the exploration, budgeting, or counterexample machinery.

use crate::exec::{eval_expr, flatten, mask, Image, Inst, NondetSource, Resolution, Rhs};
use crate::lang::{Attachment, Expr, Program, Property};
use std::collections::HashSet;
use std::rc::Rc;

struct NoDraws;
impl NondetSource for NoDraws {
    fn draw(&mut self, _w: u32) -> Option<u64> {
        None
    }
}

enum DrawTrail {
    Root,
    Link { parent: Rc<DrawTrail>, vals: Vec<u64> },
}

fn trail_to_vec(trail: &Rc<DrawTrail>) -> Vec<u64> {
    let mut chunks = Vec::new();
    let mut cur = trail.clone();
    loop {
        match &*cur {
            DrawTrail::Root => break,
            DrawTrail::Link { parent, vals } => {
                chunks.push(vals.clone());
                let next = parent.clone();
                cur = next;
            }
        }
    }
    chunks.reverse();
    chunks.concat()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BruteResult {
    Holds,
    /// A violating execution, as a replayable draw sequence.
    Violated { resolution: Vec<u64> },
    /// The walk exceeded `max_states`.
    Inconclusive,
}

/// Does `assumptions` imply `goal` on `program`? Walks every reachable
/// state of the assumed program depth-first and evaluates the goal at each
/// surviving visit to its line.
pub fn brute_implies(
    program: &Program,
    assumptions: &[Property],
    goal: &Property,
    max_states: usize,
) -> BruteResult {
    let mut instrumented = program.clone();
    for q in assumptions {
        if let Ok(p) = instrumented.instrument_assume(q) {
            instrumented = p;
        }
    }
    let image = flatten(&instrumented);
    let program = &instrumented;

    let vi = |n: &str| program.var_index(n);
    let eval = |e: &Expr, store: &[u64]| -> u64 {
        eval_expr(e, store, &image, &vi, &mut NoDraws).expect("rand-free")
    };

    let mut visited: HashSet<(usize, Vec<u64>)> = HashSet::new();
    let mut stack: Vec<(usize, Vec<u64>, Rc<DrawTrail>)> = Vec::new();
    stack.push((0, vec![0u64; image.nvars], Rc::new(DrawTrail::Root)));

    while let Some((pc, store, trail)) = stack.pop() {
        if !visited.insert((pc, store.clone())) {
            continue;
        }
        if visited.len() > max_states {
            return BruteResult::Inconclusive;
        }
        if pc >= image.slots.len() {
            continue;
        }
        let slot = &image.slots[pc];
        if slot.line_entry {
            let mut cut = false;
            if let Some(list) = program.attachments.get(&slot.line) {
                for a in list {
                    if let Attachment::Assume(pred) = a {
                        if eval(pred, &store) == 0 {
                            cut = true;
                            break;
                        }
                    }
                }
            }
            if cut {
                continue;
            }
            if slot.line == goal.line && eval(&goal.predicate, &store) == 0 {
                return BruteResult::Violated { resolution: trail_to_vec(&trail) };
            }
        }
        let push_drawn =
            |stack: &mut Vec<(usize, Vec<u64>, Rc<DrawTrail>)>, pc, store: Vec<u64>, trail: &Rc<DrawTrail>, vals: Vec<u64>| {
                let t = if vals.is_empty() {
                    trail.clone()
                } else {
                    Rc::new(DrawTrail::Link { parent: trail.clone(), vals })
                };
                stack.push((pc, store, t));
            };
        match &slot.inst {
            Inst::Nop | Inst::AssertStmt { .. } => push_drawn(&mut stack, pc + 1, store, &trail, vec![]),
            Inst::Return => {}
            Inst::Jump { target } => push_drawn(&mut stack, *target, store, &trail, vec![]),
            Inst::AssumeStmt { pred } => {
                if eval(pred, &store) != 0 {
                    push_drawn(&mut stack, pc + 1, store, &trail, vec![]);
                }
            }
            Inst::BranchIfZero { cond, target } => {
                if cond.has_rand() {
                    for (v, draws) in enumerate(cond, &store, &image, &vi) {
                        let next = if v == 0 { *target } else { pc + 1 };
                        push_drawn(&mut stack, next, store.clone(), &trail, draws);
                    }
                } else {
                    let v = eval(cond, &store);
                    let next = if v == 0 { *target } else { pc + 1 };
                    push_drawn(&mut stack, next, store, &trail, vec![]);
                }
            }
            Inst::Assign { var, rhs } => {
                let vw = image.var_widths[*var];
                match rhs {
                    Rhs::Expr(e) if !e.has_rand() => {
                        let mut s = store;
                        s[*var] = eval(e, &s) & mask(vw);
                        push_drawn(&mut stack, pc + 1, s, &trail, vec![]);
                    }
                    Rhs::Expr(e) => {
                        for (v, draws) in enumerate(e, &store, &image, &vi) {
                            let mut s = store.clone();
                            s[*var] = v & mask(vw);
                            push_drawn(&mut stack, pc + 1, s, &trail, draws);
                        }
                    }
                    Rhs::Compound { op, expr } if !expr.has_rand() => {
                        let mut s = store;
                        let v = eval(expr, &s);
                        s[*var] = crate::exec::apply_bin(*op, s[*var], v, image.width) & mask(vw);
                        push_drawn(&mut stack, pc + 1, s, &trail, vec![]);
                    }
                    Rhs::Compound { op, expr } => {
                        for (v, draws) in enumerate(expr, &store, &image, &vi) {
                            let mut s = store.clone();
                            s[*var] = crate::exec::apply_bin(*op, s[*var], v, image.width) & mask(vw);
                            push_drawn(&mut stack, pc + 1, s, &trail, draws);
                        }
                    }
                    Rhs::Rand { width } => {
                        for v in 0..(1u64 << width) {
                            let mut s = store.clone();
                            s[*var] = v & mask(vw);
                            push_drawn(&mut stack, pc + 1, s, &trail, vec![v]);
                        }
                    }
                    Rhs::CompoundRand { op, width } => {
                        for v in 0..(1u64 << width) {
                            let mut s = store.clone();
                            s[*var] = crate::exec::apply_bin(*op, s[*var], v, image.width) & mask(vw);
                            push_drawn(&mut stack, pc + 1, s, &trail, vec![v]);
                        }
                    }
                }
            }
        }
    }
    BruteResult::Holds
}

fn enumerate(
    e: &Expr,
    store: &[u64],
    image: &Image,
    vi: &dyn Fn(&str) -> Option<usize>,
) -> Vec<(u64, Vec<u64>)> {
    fn widths_of(e: &Expr, image: &Image, out: &mut Vec<u32>) {
        match e {
            Expr::Rand { width } => out.push(width.unwrap_or(image.width)),
            Expr::Unary(_, i) => widths_of(i, image, out),
            Expr::Binary(_, a, b) => {
                widths_of(a, image, out);
                widths_of(b, image, out);
            }
            _ => {}
        }
    }
    let mut widths = Vec::new();
    widths_of(e, image, &mut widths);
    let mut out = Vec::new();
    let mut combo = vec![0u64; widths.len()];
    loop {
        let mut src = Resolution { values: &combo, cursor: 0 };
        let v = eval_expr(e, store, image, vi, &mut src).expect("covered");
        out.push((v, combo[..src.cursor].to_vec()));
        let mut pos = widths.len();
        loop {
            if pos == 0 {
                out.sort();
                out.dedup();
                return out;
            }
            pos -= 1;
            combo[pos] += 1;
            if combo[pos] < (1u64 << widths[pos]) {
                break;
            }
            combo[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, parse::parse_predicate, DEFAULT_BUILTIN_WIDTH};

    const FIG2: &str = "uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}";

    #[test]
    fn agrees_with_hand_enumeration() {
        let p = parse(FIG2, DEFAULT_BUILTIN_WIDTH).unwrap();
        let goal = Property::new(parse_predicate("x != 30").unwrap(), 4);
        assert_eq!(brute_implies(&p, &[], &goal, 1_000_000), BruteResult::Holds);
        let bad = Property::new(parse_predicate("x % 4 == 1").unwrap(), 3);
        match brute_implies(&p, &[], &bad, 1_000_000) {
            BruteResult::Violated { resolution } => {
                let t = crate::exec::evaluate(&p, &resolution).unwrap();
                let (line, store) = t.steps.last().unwrap();
                assert_eq!(*line, 3);
                assert_eq!(store[0] % 4 != 1, true);
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }
}

//! Explicit-state exploration with fixpoint detection. States are
//! `(pc, store)` pairs; `rand()` branches over its full domain (or a
//! configured sample, which demotes True to Unknown). Counterexamples are
//! minimal-length by BFS order and replayable.

use super::{Budget, Counterexample, RandDomain, Verdict, VerdictValue, VerifyStats};
use crate::exec::{eval_expr, mask, Image, Inst, NondetSource, Resolution, Rhs};
use crate::lang::{Attachment, Expr, Program, Property};
use std::collections::{HashMap, VecDeque};
use std::time::Instant;

pub(super) const DOMAIN_WIDTH_CAP: u32 = 20;
pub(super) const COMBO_CAP: u64 = 1 << 20;

struct NoDraws;
impl NondetSource for NoDraws {
    fn draw(&mut self, _width: u32) -> Option<u64> {
        None
    }
}

/// Evaluate a rand-free predicate over a store.
pub(super) fn eval_pred(program: &Program, image: &Image, pred: &Expr, store: &[u64]) -> u64 {
    eval_expr(pred, store, image, &|n| program.var_index(n), &mut NoDraws)
        .expect("predicates are rand-free")
}

/// All `(value, draws)` valuations of an expression containing `rand()`.
pub(super) fn enumerate_expr(
    program: &Program,
    image: &Image,
    e: &Expr,
    store: &[u64],
    domain_of: &dyn Fn(u32) -> Option<Vec<u64>>,
) -> Option<Vec<(u64, Vec<u64>)>> {
    fn count_sites(e: &Expr, widths: &mut Vec<u32>, default_width: u32) {
        match e {
            Expr::Rand { width } => widths.push(width.unwrap_or(default_width)),
            Expr::Unary(_, inner) => count_sites(inner, widths, default_width),
            Expr::Binary(_, a, b) => {
                count_sites(a, widths, default_width);
                count_sites(b, widths, default_width);
            }
            _ => {}
        }
    }
    let mut widths = Vec::new();
    count_sites(e, &mut widths, image.width);
    if widths.is_empty() {
        return Some(vec![(eval_pred(program, image, e, store), Vec::new())]);
    }
    let mut domains = Vec::with_capacity(widths.len());
    let mut total: u64 = 1;
    for w in &widths {
        let d = domain_of(*w)?;
        total = total.saturating_mul(d.len() as u64);
        if total > COMBO_CAP {
            return None;
        }
        domains.push(d);
    }
    // Short-circuit evaluation may consume fewer draws than sites exist;
    // enumerate positionally and dedup on consumed prefixes.
    let mut out: Vec<(u64, Vec<u64>)> = Vec::new();
    let mut odometer = vec![0usize; domains.len()];
    loop {
        let combo: Vec<u64> = odometer.iter().zip(&domains).map(|(i, d)| d[*i]).collect();
        let mut src = Resolution { values: &combo, cursor: 0 };
        let value = eval_expr(e, store, image, &|n| program.var_index(n), &mut src)
            .expect("combo covers all sites");
        let consumed = src.cursor;
        out.push((value, combo[..consumed].to_vec()));
        // Advance the odometer, skipping positions beyond the consumed
        // prefix (their value cannot matter).
        let mut pos = domains.len();
        loop {
            if pos == 0 {
                // done
                dedup_draws(&mut out);
                return Some(out);
            }
            pos -= 1;
            if pos >= consumed {
                odometer[pos] = 0;
                continue;
            }
            odometer[pos] += 1;
            if odometer[pos] < domains[pos].len() {
                break;
            }
            odometer[pos] = 0;
        }
    }
}

fn dedup_draws(out: &mut Vec<(u64, Vec<u64>)>) {
    let mut seen = std::collections::HashSet::new();
    out.retain(|(v, d)| seen.insert((*v, d.clone())));
}

struct Node {
    pc: u32,
    store: Box<[u64]>,
    parent: u32,
    draws: Vec<u64>,
}

pub(super) struct Explorer<'a> {
    pub program: &'a Program,
    pub image: &'a Image,
    budget: &'a Budget,
    start: Instant,
    pub sampled: bool,
    nodes: Vec<Node>,
    pub states: u64,
    pub budget_hit: bool,
}

pub(super) enum Expansion {
    /// Successors as (pc, store, draws).
    Step(Vec<(u32, Box<[u64]>, Vec<u64>)>),
    Terminal,
}

impl<'a> Explorer<'a> {
    pub fn new(program: &'a Program, image: &'a Image, budget: &'a Budget) -> Self {
        Explorer {
            program,
            image,
            budget,
            start: Instant::now(),
            sampled: matches!(budget.rand_domain, RandDomain::Sample(_)),
            nodes: Vec::new(),
            states: 0,
            budget_hit: false,
        }
    }

    pub fn domain_of(&self, width: u32) -> Option<Vec<u64>> {
        match &self.budget.rand_domain {
            RandDomain::Full => {
                if width > DOMAIN_WIDTH_CAP {
                    None
                } else {
                    Some((0..(1u64 << width)).collect())
                }
            }
            RandDomain::Sample(vals) => {
                let m = mask(width);
                let mut v: Vec<u64> = vals.iter().map(|x| x & m).collect();
                v.sort_unstable();
                v.dedup();
                Some(v)
            }
        }
    }

    pub fn over_budget(&mut self) -> bool {
        if self.states > self.budget.max_states {
            self.budget_hit = true;
        } else if self.states % 1024 == 0 && self.start.elapsed() > self.budget.max_wall {
            self.budget_hit = true;
        }
        self.budget_hit
    }

    /// Run the line-entry assume attachments for `pc`. Returns false if a
    /// failed assume terminates the execution here.
    pub fn assumes_pass(&self, pc: u32, store: &[u64]) -> bool {
        let slot = &self.image.slots[pc as usize];
        if !slot.line_entry {
            return true;
        }
        if let Some(list) = self.program.attachments.get(&slot.line) {
            for a in list {
                if let Attachment::Assume(pred) = a {
                    if eval_pred(self.program, self.image, pred, store) == 0 {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Expand one state by executing its instruction. The caller has
    /// already run assumes and any property checks for this visit.
    pub fn step(&mut self, pc: u32, store: &[u64]) -> Option<Expansion> {
        let slots = &self.image.slots;
        if pc as usize >= slots.len() {
            return Some(Expansion::Terminal);
        }
        let slot = &slots[pc as usize];
        let succ = |pc: u32, store: Box<[u64]>, draws: Vec<u64>| (pc, store, draws);
        Some(match &slot.inst {
            Inst::Nop | Inst::AssertStmt { .. } => {
                Expansion::Step(vec![succ(pc + 1, store.into(), Vec::new())])
            }
            Inst::Return => Expansion::Terminal,
            Inst::Jump { target } => {
                Expansion::Step(vec![succ(*target as u32, store.into(), Vec::new())])
            }
            Inst::AssumeStmt { pred } => {
                if eval_pred(self.program, self.image, pred, store) == 0 {
                    Expansion::Terminal
                } else {
                    Expansion::Step(vec![succ(pc + 1, store.into(), Vec::new())])
                }
            }
            Inst::BranchIfZero { cond, target } => {
                let vals = enumerate_expr(self.program, self.image, cond, store, &|w| {
                    self.domain_of(w)
                })?;
                let mut out = Vec::new();
                for (v, draws) in vals {
                    let next = if v == 0 { *target as u32 } else { pc + 1 };
                    out.push(succ(next, store.into(), draws));
                }
                Expansion::Step(out)
            }
            Inst::Assign { var, rhs } => {
                let vw = self.image.var_widths[*var];
                let m = mask(vw);
                let mut out = Vec::new();
                match rhs {
                    Rhs::Expr(e) => {
                        let vals =
                            enumerate_expr(self.program, self.image, e, store, &|w| self.domain_of(w))?;
                        for (v, draws) in vals {
                            let mut s: Box<[u64]> = store.into();
                            s[*var] = v & m;
                            out.push(succ(pc + 1, s, draws));
                        }
                    }
                    Rhs::Compound { op, expr } => {
                        let vals = enumerate_expr(self.program, self.image, expr, store, &|w| {
                            self.domain_of(w)
                        })?;
                        for (v, draws) in vals {
                            let mut s: Box<[u64]> = store.into();
                            s[*var] = crate::exec::apply_bin(*op, store[*var], v, self.image.width) & m;
                            out.push(succ(pc + 1, s, draws));
                        }
                    }
                    Rhs::Rand { width } => {
                        for v in self.domain_of(*width)? {
                            let mut s: Box<[u64]> = store.into();
                            s[*var] = v & m;
                            out.push(succ(pc + 1, s, vec![v]));
                        }
                    }
                    Rhs::CompoundRand { op, width } => {
                        for v in self.domain_of(*width)? {
                            let mut s: Box<[u64]> = store.into();
                            s[*var] = crate::exec::apply_bin(*op, store[*var], v, self.image.width) & m;
                            out.push(succ(pc + 1, s, vec![v]));
                        }
                    }
                }
                Expansion::Step(out)
            }
        })
    }

    pub fn push_node(&mut self, pc: u32, store: Box<[u64]>, parent: u32, draws: Vec<u64>) -> u32 {
        self.nodes.push(Node { pc, store, parent, draws });
        self.states += 1;
        (self.nodes.len() - 1) as u32
    }

    pub fn node(&self, idx: u32) -> (u32, &[u64]) {
        let n = &self.nodes[idx as usize];
        (n.pc, &n.store)
    }

    /// Rebuild the `rand()` resolution along the path to `idx`.
    pub fn resolution_to(&self, idx: u32) -> Vec<u64> {
        let mut chain = Vec::new();
        let mut cur = idx;
        loop {
            let n = &self.nodes[cur as usize];
            chain.push(n.draws.clone());
            if n.parent == u32::MAX {
                break;
            }
            cur = n.parent;
        }
        chain.reverse();
        chain.concat()
    }

    pub fn stats(&self) -> VerifyStats {
        VerifyStats { states: self.states, wall_ms: self.start.elapsed().as_millis() as u64 }
    }
}

pub(super) fn run(program: &Program, image: &Image, goal: &Property, budget: &Budget) -> Verdict {
    let mut ex = Explorer::new(program, image, budget);
    let mut seen: HashMap<(u32, Box<[u64]>), ()> = HashMap::new();
    let mut queue: VecDeque<u32> = VecDeque::new();

    let init_store: Box<[u64]> = vec![0u64; image.nvars].into();
    seen.insert((0, init_store.clone()), ());
    let root = ex.push_node(0, init_store, u32::MAX, Vec::new());
    queue.push_back(root);

    let mut incomplete = ex.sampled;
    while let Some(idx) = queue.pop_front() {
        if ex.over_budget() {
            return Verdict { value: VerdictValue::Unknown, counterexample: None, stats: ex.stats() };
        }
        let (pc, store) = ex.node(idx);
        let store = store.to_vec();
        if (pc as usize) < image.slots.len() {
            let slot = &image.slots[pc as usize];
            if slot.line_entry {
                if !ex.assumes_pass(pc, &store) {
                    continue; // execution terminated by a failed assume
                }
                if slot.line == goal.line
                    && eval_pred(program, image, &goal.predicate, &store) == 0
                {
                    return Verdict {
                        value: VerdictValue::False,
                        counterexample: Some(Counterexample {
                            resolution: ex.resolution_to(idx),
                            violating_line: goal.line,
                        }),
                        stats: ex.stats(),
                    };
                }
            }
        }
        match ex.step(pc, &store) {
            None => incomplete = true, // domain too large to enumerate
            Some(Expansion::Terminal) => {}
            Some(Expansion::Step(succs)) => {
                for (npc, nstore, draws) in succs {
                    let key = (npc, nstore.clone());
                    if !seen.contains_key(&key) {
                        seen.insert(key, ());
                        let nidx = ex.push_node(npc, nstore, idx, draws);
                        queue.push_back(nidx);
                    }
                }
            }
        }
    }

    if ex.budget_hit || incomplete {
        Verdict { value: VerdictValue::Unknown, counterexample: None, stats: ex.stats() }
    } else {
        Verdict { value: VerdictValue::True, counterexample: None, stats: ex.stats() }
    }
}

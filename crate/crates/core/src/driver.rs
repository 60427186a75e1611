//! The recursive proof-search procedure over the calculus.
//!
//! For a goal `p`: check it outright (Fail/Succ1 shortcuts), otherwise pop
//! up to `k` oracle proposals; each is installed as the assumption and its
//! implication toward `p` is checked. A proved implication recurses on the
//! sub-goal (Decide); a falsified one fails the run (top level) or sends a
//! falsification repair to the queue; an unknown one sends a weakness
//! repair. A failed or inconclusive recursion first tries the stable
//! case-split exit (Succ2), then backtracks to the next proposal.
//!
//! Every step is emitted as a machine-checked rule application anchored at
//! some earlier search state, forming a tree; the certified trace is the
//! path from the initial configuration to the terminal node, and abandoned
//! branches stay in the journal for auditing. Oracles are filtered so
//! proposals sit strictly above the current goal's line, which bounds the
//! trail depth by the initial goal line and guarantees termination.

use crate::calculus::{
    apply, initial, CalculusError, Configuration, JournalEntry, Premises, Rule, RuleApplication,
    StabilityRecord, Trace, TraceOutcome, VerdictRecord,
};
use crate::lang::{expr_equal, negate, print_expr, Program, Property};
use crate::oracle::{
    enforce_condition1, run_propose, run_repair, FailKind, Oracle, Proposal, Provenance,
};
use crate::verifier::{
    check_stable, PropertyVerifier, Stability, StabilityMethod, Verdict, VerdictValue,
};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Failure,
    Unknown,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct DriverParams {
    /// Proposal attempts per goal (`k`).
    pub max_proposals: usize,
    /// Per-instance wall clock.
    pub instance_timeout: Duration,
    /// Apply the repair rules; when false no Repair1/Repair2 is ever
    /// emitted and failed proposals are only backtracked.
    pub repair_enabled: bool,
    /// Recursion depth safeguard; defaults to the initial goal's line.
    pub max_depth: Option<u32>,
    /// Whether the exhaustive stability check may back the case-split exit
    /// when the syntactic one is inconclusive.
    pub exhaustive_stability: bool,
    /// Budget used for exhaustive stability checks.
    pub stability_budget: crate::verifier::Budget,
}

impl Default for DriverParams {
    fn default() -> Self {
        DriverParams {
            max_proposals: 10,
            instance_timeout: Duration::from_secs(900),
            repair_enabled: true,
            max_depth: None,
            exhaustive_stability: true,
            stability_budget: crate::verifier::Budget::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub proposals_attempted: u32,
    /// Verifier invocations (memoized repeats excluded).
    pub verifier_calls: u32,
    pub oracle_calls: u32,
    pub wall_ms: u64,
    /// Implication checks per goal, for budget audits.
    pub per_goal_checks: Vec<(String, u32)>,
    pub max_trail_len: usize,
}

#[derive(Debug)]
pub struct RunOutput {
    pub outcome: Outcome,
    pub trace: Trace,
    pub journal: Vec<JournalEntry>,
    pub stats: RunStats,
    /// Set when the engine refused a step; always a bug, never expected.
    pub error: Option<String>,
}

struct Node {
    config: Configuration,
    parent: Option<u32>,
    app: Option<RuleApplication>,
    /// Verdict recorded about this node's (assumption, last goal) pair.
    last_verdict: Option<VerdictRecord>,
}

enum FrameResult {
    Success,
    /// The goal was falsified; the record supports the caller's repair.
    Failed { falsifying: VerdictRecord },
    Unknown,
}

struct QueueEntry {
    proposal: Proposal,
    /// Anchor and premise for repair-sourced proposals.
    repair: Option<(u32, VerdictRecord)>,
}

struct Engine<'a> {
    program: &'a Program,
    verifier: &'a dyn PropertyVerifier,
    oracle: &'a mut dyn Oracle,
    params: &'a DriverParams,
    deadline: Instant,
    timed_out: bool,
    nodes: Vec<Node>,
    memo: HashMap<String, VerdictRecord>,
    stability_memo: HashMap<String, StabilityRecord>,
    stats: RunStats,
}

fn verify_key(assumptions: &[Property], goal: &Property) -> String {
    let mut k = String::new();
    for a in assumptions {
        k.push_str(&print_expr(&a.predicate));
        k.push('@');
        k.push_str(&a.line.to_string());
        k.push('|');
    }
    k.push_str(&print_expr(&goal.predicate));
    k.push('@');
    k.push_str(&goal.line.to_string());
    k
}

impl<'a> Engine<'a> {
    fn out_of_time(&mut self) -> bool {
        if !self.timed_out && Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        self.timed_out
    }

    fn verify_record(&mut self, assumptions: &[Property], goal: &Property) -> VerdictRecord {
        let key = verify_key(assumptions, goal);
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        self.stats.verifier_calls += 1;
        let Verdict { value, counterexample, .. } =
            self.verifier.verify(self.program, assumptions, goal);
        let record = VerdictRecord {
            assumptions: assumptions.to_vec(),
            goal: goal.clone(),
            value,
            desc: self.verifier.descriptor(),
            counterexample,
        };
        self.memo.insert(key, record.clone());
        record
    }

    fn stability_record(&mut self, q: &Property) -> StabilityRecord {
        let key = verify_key(&[], q);
        if let Some(r) = self.stability_memo.get(&key) {
            return r.clone();
        }
        let in_loop = self.program.line_in_loop(q.line).unwrap_or(false);
        let record = if !in_loop {
            StabilityRecord {
                property: q.clone(),
                stability: Stability::Stable,
                method: StabilityMethod::Syntactic,
                budget: self.params.stability_budget.clone(),
            }
        } else if self.params.exhaustive_stability {
            let report = check_stable(self.program, q, &self.params.stability_budget);
            StabilityRecord {
                property: q.clone(),
                stability: report.stability,
                method: report.method,
                budget: self.params.stability_budget.clone(),
            }
        } else {
            StabilityRecord {
                property: q.clone(),
                stability: Stability::Unknown,
                method: StabilityMethod::Syntactic,
                budget: self.params.stability_budget.clone(),
            }
        };
        self.stability_memo.insert(key, record.clone());
        record
    }

    fn emit(&mut self, anchor: u32, rule: Rule, premises: Premises) -> Result<u32, CalculusError> {
        let pre = self.nodes[anchor as usize].config.clone();
        let post = apply(&pre, rule, &premises)?;
        if let Some((_, trail)) = post.state() {
            self.stats.max_trail_len = self.stats.max_trail_len.max(trail.len());
        }
        let app = RuleApplication { rule, premises, pre, post: post.clone() };
        self.nodes.push(Node { config: post, parent: Some(anchor), app: Some(app), last_verdict: None });
        Ok((self.nodes.len() - 1) as u32)
    }

    fn latest(&self) -> u32 {
        (self.nodes.len() - 1) as u32
    }

    fn trail_of(&self, node: u32) -> &[Property] {
        match &self.nodes[node as usize].config {
            Configuration::State { trail, .. } => trail,
            _ => &[],
        }
    }

    fn propose_batch(&mut self, goal: &Property) -> Vec<QueueEntry> {
        self.stats.oracle_calls += 1;
        let proposals = run_propose(self.oracle, self.program, goal).unwrap_or_default();
        enforce_condition1(proposals, goal)
            .into_iter()
            .map(|proposal| QueueEntry { proposal, repair: None })
            .collect()
    }

    fn repair_batch(
        &mut self,
        goal: &Property,
        failed: &Property,
        kind: FailKind,
        anchor: u32,
        premise: VerdictRecord,
    ) -> Vec<QueueEntry> {
        self.stats.oracle_calls += 1;
        let proposals =
            run_repair(self.oracle, self.program, goal, failed, kind).unwrap_or_default();
        enforce_condition1(proposals, goal)
            .into_iter()
            .map(|proposal| QueueEntry { proposal, repair: Some((anchor, premise.clone())) })
            .collect()
    }

    /// Install a popped proposal as the current assumption, choosing the
    /// rule and anchor that its provenance and the recorded premises
    /// support.
    fn install(
        &mut self,
        entry: QueueEntry,
        frame_trail: &[Property],
        fallback: &(u32, VerdictRecord),
    ) -> Result<u32, CalculusError> {
        match (&entry.proposal.source, entry.repair) {
            (Provenance::Repair { kind: FailKind::Unknown, .. }, Some((anchor, premise))) => self
                .emit(
                    anchor,
                    Rule::Repair1,
                    Premises {
                        verdicts: vec![premise],
                        proposal: Some(entry.proposal),
                        stability: None,
                    },
                ),
            (Provenance::Repair { kind: FailKind::False, .. }, Some((anchor, premise))) => self
                .emit(
                    anchor,
                    Rule::Repair2,
                    Premises {
                        verdicts: vec![premise],
                        proposal: Some(entry.proposal),
                        stability: None,
                    },
                ),
            _ => {
                // Prefer the chronological backtrack: the search just left
                // an abandoned sub-goal one level below this frame.
                let latest = self.latest();
                let latest_trail = self.trail_of(latest);
                let backtrackable = latest_trail.len() == frame_trail.len() + 1
                    && latest_trail[..frame_trail.len()] == *frame_trail
                    && self.nodes[latest as usize]
                        .last_verdict
                        .as_ref()
                        .is_some_and(|v| v.value != VerdictValue::True);
                if backtrackable {
                    let premise = self.nodes[latest as usize].last_verdict.clone().unwrap();
                    self.emit(
                        latest,
                        Rule::Backtrack,
                        Premises {
                            verdicts: vec![premise],
                            proposal: Some(entry.proposal),
                            stability: None,
                        },
                    )
                } else {
                    let (anchor, premise) = fallback;
                    self.emit(
                        *anchor,
                        Rule::Propose,
                        Premises {
                            verdicts: vec![premise.clone()],
                            proposal: Some(entry.proposal),
                            stability: None,
                        },
                    )
                }
            }
        }
    }

    fn solve(&mut self, entry_node: u32, depth: u32) -> Result<FrameResult, CalculusError> {
        let frame_trail: Vec<Property> = self.trail_of(entry_node).to_vec();
        let goal = frame_trail.last().expect("trail non-empty").clone();
        let top_level = frame_trail.len() == 1;

        if self.out_of_time() {
            return Ok(FrameResult::Unknown);
        }

        let d = self.verify_record(&[], &goal);
        self.nodes[entry_node as usize].last_verdict = Some(d.clone());
        match d.value {
            VerdictValue::True => {
                self.emit(
                    entry_node,
                    Rule::Succ1,
                    Premises { verdicts: vec![d], proposal: None, stability: None },
                )?;
                return Ok(FrameResult::Success);
            }
            VerdictValue::False => {
                if top_level {
                    self.emit(
                        entry_node,
                        Rule::Fail,
                        Premises { verdicts: vec![d], proposal: None, stability: None },
                    )?;
                }
                return Ok(FrameResult::Failed { falsifying: d });
            }
            VerdictValue::Unknown => {}
        }

        let max_depth = self.params.max_depth.unwrap_or(u32::MAX);
        if depth >= max_depth {
            return Ok(FrameResult::Unknown);
        }

        let mut queue: std::collections::VecDeque<QueueEntry> =
            self.propose_batch(&goal).into();
        let mut attempted: Vec<Property> = Vec::new();
        let mut attempts: u32 = 0;
        // Anchor for proposals that cannot backtrack: the most recent node
        // of this frame with an unknown verdict on the goal.
        let mut fallback = (entry_node, d);

        loop {
            if attempts as usize >= self.params.max_proposals || self.out_of_time() {
                break;
            }
            if queue.is_empty() {
                // The queue is consumed first; ask the oracle again only
                // when it runs dry, and stop when nothing fresh arrives.
                let fresh: Vec<QueueEntry> = self
                    .propose_batch(&goal)
                    .into_iter()
                    .filter(|e| {
                        !attempted.iter().any(|a| {
                            a.line == e.proposal.property.line
                                && expr_equal(&a.predicate, &e.proposal.property.predicate)
                        })
                    })
                    .collect();
                if fresh.is_empty() {
                    break;
                }
                queue.extend(fresh);
            }
            let Some(entry) = queue.pop_front() else { break };
            let q = entry.proposal.property.clone();
            if attempted
                .iter()
                .any(|a| a.line == q.line && expr_equal(&a.predicate, &q.predicate))
            {
                continue; // already attempted for this goal; no budget spent
            }
            attempted.push(q.clone());
            attempts += 1;

            let install_node = self.install(entry, &frame_trail, &fallback)?;
            let e = self.verify_record(std::slice::from_ref(&q), &goal);
            self.nodes[install_node as usize].last_verdict = Some(e.clone());

            match e.value {
                VerdictValue::False => {
                    if top_level {
                        self.emit(
                            install_node,
                            Rule::Fail,
                            Premises { verdicts: vec![e.clone()], proposal: None, stability: None },
                        )?;
                    }
                    self.record_goal_stats(&goal, attempts);
                    return Ok(FrameResult::Failed { falsifying: e });
                }
                VerdictValue::True => {
                    let decide_node = self.emit(
                        install_node,
                        Rule::Decide,
                        Premises { verdicts: vec![e], proposal: None, stability: None },
                    )?;
                    let f = self.solve(decide_node, depth + 1)?;
                    match f {
                        FrameResult::Success => {
                            self.record_goal_stats(&goal, attempts);
                            return Ok(FrameResult::Success);
                        }
                        not_success => {
                            // Case-split exit on a stable sub-goal.
                            let st = self.stability_record(&q);
                            if st.stability == Stability::Stable && !self.out_of_time() {
                                let s2 = self.verify_record(&[negate(&q)], &goal);
                                if s2.value == VerdictValue::True {
                                    self.emit(
                                        decide_node,
                                        Rule::Succ2,
                                        Premises {
                                            verdicts: vec![s2],
                                            proposal: None,
                                            stability: Some(st),
                                        },
                                    )?;
                                    self.record_goal_stats(&goal, attempts);
                                    return Ok(FrameResult::Success);
                                }
                            }
                            if let FrameResult::Failed { falsifying } = not_success {
                                if self.params.repair_enabled {
                                    let joined = self.repair_batch(
                                        &goal,
                                        &q,
                                        FailKind::False,
                                        decide_node,
                                        falsifying,
                                    );
                                    queue.extend(joined);
                                }
                            }
                        }
                    }
                }
                VerdictValue::Unknown => {
                    fallback = (install_node, e.clone());
                    if self.params.repair_enabled {
                        let joined =
                            self.repair_batch(&goal, &q, FailKind::Unknown, install_node, e);
                        queue.extend(joined);
                    }
                }
            }
        }
        self.record_goal_stats(&goal, attempts);
        Ok(FrameResult::Unknown)
    }

    fn record_goal_stats(&mut self, goal: &Property, attempts: u32) {
        self.stats.proposals_attempted += attempts;
        self.stats
            .per_goal_checks
            .push((verify_key(&[], goal), attempts));
    }

    /// The certified path: rule applications from the root to `node`.
    fn path_to(&self, node: u32) -> Vec<RuleApplication> {
        let mut apps = Vec::new();
        let mut cur = Some(node);
        while let Some(i) = cur {
            let n = &self.nodes[i as usize];
            if let Some(app) = &n.app {
                apps.push(app.clone());
            }
            cur = n.parent;
        }
        apps.reverse();
        apps
    }

    fn journal(&self) -> Vec<JournalEntry> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(|(i, n)| {
                n.app.as_ref().map(|app| JournalEntry {
                    id: i as u32,
                    anchor: n.parent.filter(|p| *p != 0),
                    app: app.clone(),
                })
            })
            .collect()
    }
}

/// Run the proof search for `p0` on `program`. The outcome is certified:
/// success and failure come with a trace whose every step was validated at
/// emission time.
pub fn lemur(
    program: &Program,
    p0: &Property,
    params: &DriverParams,
    verifier: &dyn PropertyVerifier,
    oracle: &mut dyn Oracle,
) -> RunOutput {
    let start = Instant::now();
    let init_config = match initial(program, p0) {
        Ok(c) => c,
        Err(e) => {
            return RunOutput {
                outcome: Outcome::Unknown,
                trace: Trace {
                    initial: Configuration::State { assumption: None, trail: vec![p0.clone()] },
                    steps: Vec::new(),
                    outcome: TraceOutcome::Aborted,
                },
                journal: Vec::new(),
                stats: RunStats::default(),
                error: Some(e.to_string()),
            }
        }
    };

    let params = DriverParams {
        max_depth: Some(params.max_depth.unwrap_or(p0.line)),
        ..params.clone()
    };
    let mut engine = Engine {
        program,
        verifier,
        oracle,
        params: &params,
        deadline: start + params.instance_timeout,
        timed_out: false,
        nodes: vec![Node {
            config: init_config.clone(),
            parent: None,
            app: None,
            last_verdict: None,
        }],
        memo: HashMap::new(),
        stability_memo: HashMap::new(),
        stats: RunStats { max_trail_len: 1, ..RunStats::default() },
    };

    let result = engine.solve(0, 0);
    let wall = start.elapsed();
    engine.stats.wall_ms = wall.as_millis() as u64;

    let (outcome, error) = match &result {
        Ok(FrameResult::Success) => (Outcome::Success, None),
        Ok(FrameResult::Failed { .. }) => (Outcome::Failure, None),
        Ok(FrameResult::Unknown) => {
            if engine.timed_out {
                (Outcome::Timeout, None)
            } else {
                (Outcome::Unknown, None)
            }
        }
        Err(e) => (Outcome::Unknown, Some(e.to_string())),
    };

    // Terminal node (success/failure) is always the last emission.
    let terminal = engine.latest();
    let trace_outcome = match outcome {
        Outcome::Success => TraceOutcome::Success,
        Outcome::Failure => TraceOutcome::Failure,
        Outcome::Unknown | Outcome::Timeout => TraceOutcome::Aborted,
    };
    let steps = engine.path_to(terminal);
    let trace = Trace { initial: init_config, steps, outcome: trace_outcome };
    let journal = engine.journal();
    RunOutput { outcome, trace, journal, stats: engine.stats, error }
}

/// Pick the proof goal from the program's asserts: the one at
/// `property_line` when given, otherwise the unique assert.
pub fn select_goal(program: &Program, property_line: Option<u32>) -> Result<Property, String> {
    let asserts = program.asserts();
    match property_line {
        Some(line) => asserts
            .iter()
            .find(|(l, _)| *l == line)
            .map(|(l, e)| Property::new(e.clone(), *l))
            .ok_or_else(|| format!("no assert at line {line}")),
        None => match asserts.len() {
            0 => Err("program has no assert".into()),
            1 => Ok(Property::new(asserts[0].1.clone(), asserts[0].0)),
            n => Err(format!("program has {n} asserts; pick one with --property-line")),
        },
    }
}

/// Serialized run: an init record, one record per journal entry, and an
/// outcome record naming the certified path.
pub fn write_trace_file(path: &std::path::Path, program: &Program, run: &RunOutput) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    let init = serde_json::json!({
        "type": "init",
        "width": program.width,
        "program": crate::lang::print_program(program, &crate::lang::PrintOptions::default()),
        "initial": run.trace.initial,
    });
    writeln!(f, "{init}")?;
    for entry in &run.journal {
        let rec = serde_json::json!({"type": "step", "entry": entry});
        writeln!(f, "{rec}")?;
    }
    let path_ids: Vec<u32> = certified_path_ids(run);
    let outcome = serde_json::json!({
        "type": "outcome",
        "outcome": run.trace.outcome,
        "path": path_ids,
        "stats": run.stats,
    });
    writeln!(f, "{outcome}")
}

fn certified_path_ids(run: &RunOutput) -> Vec<u32> {
    // Recover ids by matching the path applications against the journal.
    let mut ids = Vec::new();
    let mut start = 0usize;
    for app in &run.trace.steps {
        if let Some(e) = run.journal[start..]
            .iter()
            .find(|e| e.app.rule == app.rule && e.app.pre == app.pre && e.app.post == app.post)
        {
            ids.push(e.id);
            start = run.journal.iter().position(|x| x.id == e.id).unwrap() + 1;
        }
    }
    ids
}

/// Load a trace file back into a replayable form.
pub fn read_trace_file(
    path: &std::path::Path,
) -> std::io::Result<(Program, Trace, Vec<JournalEntry>)> {
    use std::io::BufRead;
    let f = std::fs::File::open(path)?;
    let mut program: Option<Program> = None;
    let mut initial: Option<Configuration> = None;
    let mut entries: Vec<JournalEntry> = Vec::new();
    let mut outcome = TraceOutcome::Aborted;
    let mut path_ids: Vec<u32> = Vec::new();
    for line in std::io::BufReader::new(f).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        match v["type"].as_str() {
            Some("init") => {
                let width = v["width"].as_u64().unwrap_or(8) as u32;
                let text = v["program"].as_str().unwrap_or_default();
                program = crate::lang::parse(text, width).ok();
                initial = serde_json::from_value(v["initial"].clone()).ok();
            }
            Some("step") => {
                if let Ok(e) = serde_json::from_value::<JournalEntry>(v["entry"].clone()) {
                    entries.push(e);
                }
            }
            Some("outcome") => {
                if let Ok(o) = serde_json::from_value::<TraceOutcome>(v["outcome"].clone()) {
                    outcome = o;
                }
                if let Ok(p) = serde_json::from_value::<Vec<u32>>(v["path"].clone()) {
                    path_ids = p;
                }
            }
            _ => {}
        }
    }
    let program = program
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "missing init record"))?;
    let initial = initial
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "missing initial config"))?;
    let steps: Vec<RuleApplication> = path_ids
        .iter()
        .filter_map(|id| entries.iter().find(|e| e.id == *id).map(|e| e.app.clone()))
        .collect();
    Ok((program, Trace { initial, steps, outcome }, entries))
}

//! Execution semantics: programs are flattened to a small instruction list
//! and run over fixed-width unsigned stores. The deterministic evaluator
//! here replays a single execution given explicit values for every `rand()`
//! occurrence; the verifier builds its state exploration on the same
//! flattening and expression evaluation, so the two agree by construction
//! on arithmetic.
//!
//! Semantics choices: all arithmetic wraps modulo `2^W`; assignment masks
//! to the target variable's width; division or remainder by zero yields 0;
//! an execution reaching a failed `assume` terminates at that line.

use crate::lang::{Attachment, BinOp, Expr, Program, RValue, Stmt, UnOp};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inst {
    /// Evaluate and assign. `rand_width` is the draw width for a
    /// nondeterministic right-hand side.
    Assign { var: usize, rhs: Rhs },
    /// Fall through when the condition is nonzero, jump otherwise.
    BranchIfZero { cond: Expr, target: usize },
    Jump { target: usize },
    AssumeStmt { pred: Expr },
    /// Program asserts only flag executions in the evaluator; the verifier
    /// monitors the proof goal instead.
    AssertStmt { pred: Expr },
    Return,
    Nop,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rhs {
    Expr(Expr),
    Rand { width: u32 },
    /// `var op= expr`
    Compound { op: BinOp, expr: Expr },
    /// `var op= rand()`
    CompoundRand { op: BinOp, width: u32 },
}

/// One flattened instruction with its source line; `line_entry` marks the
/// first instruction of a line, where attachments and property checks fire.
#[derive(Debug, Clone)]
pub struct Slot {
    pub inst: Inst,
    pub line: u32,
    pub line_entry: bool,
}

/// Flattened program image shared by the evaluator and the verifier.
#[derive(Debug, Clone)]
pub struct Image {
    pub slots: Vec<Slot>,
    pub nvars: usize,
    pub var_widths: Vec<u32>,
    pub width: u32,
}

pub fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

fn rhs_for(value: &RValue, form_op: Option<BinOp>, var_width: u32, program_width: u32) -> Rhs {
    match (value, form_op) {
        (RValue::Expr(e), None) => Rhs::Expr(e.clone()),
        (RValue::Expr(e), Some(op)) => Rhs::Compound { op, expr: e.clone() },
        (RValue::Rand { cast }, None) => Rhs::Rand {
            width: cast_width(cast.as_deref(), var_width, program_width),
        },
        (RValue::Rand { cast }, Some(op)) => Rhs::CompoundRand {
            op,
            width: cast_width(cast.as_deref(), var_width, program_width),
        },
    }
}

fn cast_width(cast: Option<&str>, var_width: u32, program_width: u32) -> u32 {
    match cast {
        Some(c) => match c {
            "unsigned char" | "uint8_t" | "char" => 8u32.min(program_width),
            "uint16_t" | "unsigned short" => 16u32.min(program_width),
            _ => program_width,
        },
        None => var_width,
    }
}

/// Flatten a program to its instruction image.
pub fn flatten(program: &Program) -> Image {
    let mut slots: Vec<Slot> = Vec::new();
    let width = program.width;

    fn emit(slots: &mut Vec<Slot>, inst: Inst, line: u32) {
        let line_entry = !slots.iter().any(|s| s.line == line && s.line_entry);
        slots.push(Slot { inst, line, line_entry });
    }

    fn walk(program: &Program, stmts: &[Stmt], slots: &mut Vec<Slot>) {
        for s in stmts {
            match s {
                Stmt::Decl { line, declarators, .. } => {
                    let mut first = true;
                    for d in declarators {
                        let var = program.var_index(&d.name).expect("declared");
                        let vw = program.vars[var].width;
                        let inst = match &d.init {
                            Some(rv) => Inst::Assign { var, rhs: rhs_for(rv, None, vw, program.width) },
                            None => Inst::Assign { var, rhs: Rhs::Expr(Expr::Lit(0)) },
                        };
                        if first {
                            emit(slots, inst, *line);
                            first = false;
                        } else {
                            slots.push(Slot { inst, line: *line, line_entry: false });
                        }
                    }
                    if declarators.is_empty() {
                        emit(slots, Inst::Nop, *line);
                    }
                }
                Stmt::Assign { line, var, form, value } => {
                    let idx = program.var_index(var).expect("declared");
                    let vw = program.vars[idx].width;
                    let op = match form {
                        crate::lang::AssignForm::Plain => None,
                        crate::lang::AssignForm::Compound(op) => Some(*op),
                        crate::lang::AssignForm::PreIncDec(op)
                        | crate::lang::AssignForm::PostIncDec(op) => Some(*op),
                    };
                    emit(slots, Inst::Assign { var: idx, rhs: rhs_for(value, op, vw, program.width) }, *line);
                }
                Stmt::While { line, cond, body, .. } => {
                    let head = slots.len();
                    emit(slots, Inst::BranchIfZero { cond: cond.clone(), target: 0 }, *line);
                    walk(program, body, slots);
                    slots.push(Slot { inst: Inst::Jump { target: head }, line: *line, line_entry: false });
                    let exit = slots.len();
                    if let Inst::BranchIfZero { target, .. } = &mut slots[head].inst {
                        *target = exit;
                    }
                }
                Stmt::If { line, cond, then_body, else_body, .. } => {
                    let branch = slots.len();
                    emit(slots, Inst::BranchIfZero { cond: cond.clone(), target: 0 }, *line);
                    walk(program, then_body, slots);
                    match else_body {
                        Some((else_line, eb)) => {
                            let jend = slots.len();
                            slots.push(Slot {
                                inst: Inst::Jump { target: 0 },
                                line: *else_line,
                                line_entry: false,
                            });
                            let else_start = slots.len();
                            if let Inst::BranchIfZero { target, .. } = &mut slots[branch].inst {
                                *target = else_start;
                            }
                            walk(program, eb, slots);
                            let end = slots.len();
                            if let Inst::Jump { target } = &mut slots[jend].inst {
                                *target = end;
                            }
                        }
                        None => {
                            let end = slots.len();
                            if let Inst::BranchIfZero { target, .. } = &mut slots[branch].inst {
                                *target = end;
                            }
                        }
                    }
                }
                Stmt::Assume { line, pred } => emit(slots, Inst::AssumeStmt { pred: pred.clone() }, *line),
                Stmt::Assert { line, pred } => {
                    if program.asserts_removed {
                        emit(slots, Inst::Nop, *line);
                    } else {
                        emit(slots, Inst::AssertStmt { pred: pred.clone() }, *line);
                    }
                }
                Stmt::Return { line, .. } => emit(slots, Inst::Return, *line),
                Stmt::Marker { line, .. } => emit(slots, Inst::Nop, *line),
            }
        }
    }

    walk(program, &program.stmts, &mut slots);
    Image {
        slots,
        nvars: program.vars.len(),
        var_widths: program.vars.iter().map(|v| v.width).collect(),
        width,
    }
}

/// Loop body entry points: the slot index of the first instruction inside
/// each `while` body (or the back jump, for an empty body).
pub fn loop_body_entries(image: &Image) -> Vec<usize> {
    let mut entries = Vec::new();
    for (i, s) in image.slots.iter().enumerate() {
        if let Inst::BranchIfZero { target, .. } = &s.inst {
            // A while head is a branch whose jump-back partner points at it.
            let is_loop = image.slots[i + 1..*target.min(&image.slots.len())]
                .iter()
                .any(|t| matches!(&t.inst, Inst::Jump { target: h } if *h == i));
            if is_loop && i + 1 < image.slots.len() {
                entries.push(i + 1);
            }
        }
    }
    entries
}

/// A source of values for `rand()` draws.
pub trait NondetSource {
    fn draw(&mut self, width: u32) -> Option<u64>;
}

/// Fixed resolution list, consumed in evaluation order.
pub struct Resolution<'a> {
    pub values: &'a [u64],
    pub cursor: usize,
}

impl NondetSource for Resolution<'_> {
    fn draw(&mut self, width: u32) -> Option<u64> {
        let v = *self.values.get(self.cursor)?;
        self.cursor += 1;
        Some(v & mask(width))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("rand() occurrence {index} has no resolved value")]
    UnresolvedNondet { index: usize },
    #[error("execution exceeded {0} steps")]
    StepLimit(usize),
}

/// Evaluate an expression over a store. `draws` supplies `rand()` values;
/// evaluation order is left-to-right, so a resolution list is consumed
/// deterministically.
pub fn eval_expr(
    e: &Expr,
    store: &[u64],
    image: &Image,
    var_index: &dyn Fn(&str) -> Option<usize>,
    draws: &mut dyn NondetSource,
) -> Result<u64, EvalError> {
    let w = image.width;
    let m = mask(w);
    Ok(match e {
        Expr::Lit(v) => *v & m,
        Expr::Var(name) => match var_index(name) {
            Some(i) => store[i],
            None => 0,
        },
        Expr::Rand { width } => draws
            .draw(width.unwrap_or(w))
            .ok_or(EvalError::UnresolvedNondet { index: 0 })?,
        Expr::Unary(op, inner) => {
            let v = eval_expr(inner, store, image, var_index, draws)?;
            match op {
                UnOp::Not => u64::from(v == 0),
                UnOp::Neg => v.wrapping_neg() & m,
            }
        }
        Expr::Binary(op, a, b) => {
            // && and || short-circuit like C, which matters for draw order.
            match op {
                BinOp::And => {
                    let va = eval_expr(a, store, image, var_index, draws)?;
                    if va == 0 {
                        return Ok(0);
                    }
                    return Ok(u64::from(eval_expr(b, store, image, var_index, draws)? != 0));
                }
                BinOp::Or => {
                    let va = eval_expr(a, store, image, var_index, draws)?;
                    if va != 0 {
                        return Ok(1);
                    }
                    return Ok(u64::from(eval_expr(b, store, image, var_index, draws)? != 0));
                }
                _ => {}
            }
            let va = eval_expr(a, store, image, var_index, draws)?;
            let vb = eval_expr(b, store, image, var_index, draws)?;
            match op {
                BinOp::Add => va.wrapping_add(vb) & m,
                BinOp::Sub => va.wrapping_sub(vb) & m,
                BinOp::Mul => va.wrapping_mul(vb) & m,
                BinOp::Div => {
                    if vb == 0 {
                        0
                    } else {
                        (va / vb) & m
                    }
                }
                BinOp::Rem => {
                    if vb == 0 {
                        0
                    } else {
                        (va % vb) & m
                    }
                }
                BinOp::Eq => u64::from(va == vb),
                BinOp::Ne => u64::from(va != vb),
                BinOp::Lt => u64::from(va < vb),
                BinOp::Le => u64::from(va <= vb),
                BinOp::Gt => u64::from(va > vb),
                BinOp::Ge => u64::from(va >= vb),
                BinOp::And | BinOp::Or => unreachable!(),
            }
        }
    })
}

/// How a single execution ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stop {
    /// Ran off the end or hit `return`.
    Completed,
    /// A failed `assume` (statement or attachment) terminated the
    /// execution at this line.
    AssumeFailed { line: u32 },
    /// First failing `assert` statement.
    AssertFailed { line: u32 },
}

/// Deterministic single-execution trace: one `(line, store)` entry per line
/// visit, snapshotted on arrival.
#[derive(Debug, Clone)]
pub struct ExecTrace {
    pub steps: Vec<(u32, Vec<u64>)>,
    pub stop: Stop,
    pub final_store: Vec<u64>,
}

pub const DEFAULT_STEP_LIMIT: usize = 1_000_000;

/// Run one execution of `program` with every `rand()` resolved from
/// `resolution`, in draw order. Attachments fire before the statement at
/// their line: assumes first (a false assume ends the execution and the
/// visit), then attached asserts, then the statement.
pub fn evaluate(program: &Program, resolution: &[u64]) -> Result<ExecTrace, EvalError> {
    evaluate_image(program, &flatten(program), resolution, DEFAULT_STEP_LIMIT)
}

pub fn evaluate_image(
    program: &Program,
    image: &Image,
    resolution: &[u64],
    step_limit: usize,
) -> Result<ExecTrace, EvalError> {
    let mut store = vec![0u64; image.nvars];
    let mut src = Resolution { values: resolution, cursor: 0 };
    let mut steps: Vec<(u32, Vec<u64>)> = Vec::new();
    let var_index = |name: &str| program.var_index(name);
    let mut pc = 0usize;
    let mut count = 0usize;

    while pc < image.slots.len() {
        count += 1;
        if count > step_limit {
            return Err(EvalError::StepLimit(step_limit));
        }
        let slot = &image.slots[pc];
        if slot.line_entry {
            steps.push((slot.line, store.clone()));
            if let Some(list) = program.attachments.get(&slot.line) {
                let mut stop = None;
                for a in list {
                    match a {
                        Attachment::Assume(pred) => {
                            let v = eval_expr(pred, &store, image, &var_index, &mut src)
                                .map_err(|e| reindex(e, src.cursor))?;
                            if v == 0 {
                                stop = Some(Stop::AssumeFailed { line: slot.line });
                                break;
                            }
                        }
                        Attachment::Assert(pred) => {
                            let v = eval_expr(pred, &store, image, &var_index, &mut src)
                                .map_err(|e| reindex(e, src.cursor))?;
                            if v == 0 {
                                stop = Some(Stop::AssertFailed { line: slot.line });
                                break;
                            }
                        }
                        Attachment::Marker(_) => {}
                    }
                }
                if let Some(stop) = stop {
                    return Ok(ExecTrace { steps, stop, final_store: store });
                }
            }
        }
        match &slot.inst {
            Inst::Assign { var, rhs } => {
                let vw = image.var_widths[*var];
                let value = match rhs {
                    Rhs::Expr(e) => eval_expr(e, &store, image, &var_index, &mut src)
                        .map_err(|e| reindex(e, src.cursor))?,
                    Rhs::Rand { width } => src
                        .draw(*width)
                        .ok_or(EvalError::UnresolvedNondet { index: src.cursor })?,
                    Rhs::Compound { op, expr } => {
                        let rhs_v = eval_expr(expr, &store, image, &var_index, &mut src)
                            .map_err(|e| reindex(e, src.cursor))?;
                        apply_bin(*op, store[*var], rhs_v, image.width)
                    }
                    Rhs::CompoundRand { op, width } => {
                        let rhs_v = src
                            .draw(*width)
                            .ok_or(EvalError::UnresolvedNondet { index: src.cursor })?;
                        apply_bin(*op, store[*var], rhs_v, image.width)
                    }
                };
                store[*var] = value & mask(vw);
                pc += 1;
            }
            Inst::BranchIfZero { cond, target } => {
                let v = eval_expr(cond, &store, image, &var_index, &mut src)
                    .map_err(|e| reindex(e, src.cursor))?;
                pc = if v == 0 { *target } else { pc + 1 };
            }
            Inst::Jump { target } => pc = *target,
            Inst::AssumeStmt { pred } => {
                let v = eval_expr(pred, &store, image, &var_index, &mut src)
                    .map_err(|e| reindex(e, src.cursor))?;
                if v == 0 {
                    return Ok(ExecTrace {
                        steps,
                        stop: Stop::AssumeFailed { line: slot.line },
                        final_store: store,
                    });
                }
                pc += 1;
            }
            Inst::AssertStmt { pred } => {
                let v = eval_expr(pred, &store, image, &var_index, &mut src)
                    .map_err(|e| reindex(e, src.cursor))?;
                if v == 0 {
                    return Ok(ExecTrace {
                        steps,
                        stop: Stop::AssertFailed { line: slot.line },
                        final_store: store,
                    });
                }
                pc += 1;
            }
            Inst::Return => {
                return Ok(ExecTrace { steps, stop: Stop::Completed, final_store: store })
            }
            Inst::Nop => pc += 1,
        }
    }
    Ok(ExecTrace { steps, stop: Stop::Completed, final_store: store })
}

fn reindex(e: EvalError, cursor: usize) -> EvalError {
    match e {
        EvalError::UnresolvedNondet { .. } => EvalError::UnresolvedNondet { index: cursor },
        other => other,
    }
}

pub fn apply_bin(op: BinOp, a: u64, b: u64, width: u32) -> u64 {
    let m = mask(width);
    match op {
        BinOp::Add => a.wrapping_add(b) & m,
        BinOp::Sub => a.wrapping_sub(b) & m,
        BinOp::Mul => a.wrapping_mul(b) & m,
        BinOp::Div => {
            if b == 0 {
                0
            } else {
                (a / b) & m
            }
        }
        BinOp::Rem => {
            if b == 0 {
                0
            } else {
                (a % b) & m
            }
        }
        BinOp::Eq => u64::from(a == b),
        BinOp::Ne => u64::from(a != b),
        BinOp::Lt => u64::from(a < b),
        BinOp::Le => u64::from(a <= b),
        BinOp::Gt => u64::from(a > b),
        BinOp::Ge => u64::from(a >= b),
        BinOp::And => u64::from(a != 0 && b != 0),
        BinOp::Or => u64::from(a != 0 || b != 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, DEFAULT_BUILTIN_WIDTH};

    const FIG2: &str = "uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}";

    #[test]
    fn fig2_one_iteration_trace() {
        // Hand-simulated two-draw prefix: enter the loop once, then exit.
        let p = parse(FIG2, DEFAULT_BUILTIN_WIDTH).unwrap();
        let t = evaluate(&p, &[1, 0]).unwrap();
        let lines: Vec<u32> = t.steps.iter().map(|(l, _)| *l).collect();
        assert_eq!(lines, vec![1, 2, 3, 4, 2]);
        assert_eq!(t.final_store, vec![4]);
        assert_eq!(t.stop, Stop::Completed);
    }

    #[test]
    fn empty_program_empty_trace() {
        let p = parse("", DEFAULT_BUILTIN_WIDTH).unwrap();
        let t = evaluate(&p, &[]).unwrap();
        assert!(t.steps.is_empty());
    }

    #[test]
    fn short_resolution_is_an_error() {
        let p = parse(FIG2, DEFAULT_BUILTIN_WIDTH).unwrap();
        assert!(matches!(evaluate(&p, &[1]), Err(EvalError::UnresolvedNondet { .. })));
    }

    #[test]
    fn assume_attachment_truncates() {
        let p = parse(FIG2, DEFAULT_BUILTIN_WIDTH).unwrap();
        let q = crate::lang::Property::new(
            crate::lang::parse::parse_predicate("x % 4 == 1").unwrap(),
            3,
        );
        let inst = p.instrument_assume(&q).unwrap();
        // Enter the loop; x=0 falsifies the assumption at line 3.
        let t = evaluate(&inst, &[1]).unwrap();
        assert_eq!(t.stop, Stop::AssumeFailed { line: 3 });
        assert_eq!(t.steps.last().unwrap().0, 3);
    }

    #[test]
    fn wraparound_at_width8() {
        let p = parse("uint32_t x=250;\nx+=10;\n", 8).unwrap();
        let t = evaluate(&p, &[]).unwrap();
        assert_eq!(t.final_store, vec![4]);
    }

    #[test]
    fn assert_statement_flags_failure() {
        let p = parse("uint32_t x=0;\nassert(x==1);\n", 8).unwrap();
        let t = evaluate(&p, &[]).unwrap();
        assert_eq!(t.stop, Stop::AssertFailed { line: 2 });
    }

    #[test]
    fn loop_body_entry_points() {
        let p = parse(FIG2, DEFAULT_BUILTIN_WIDTH).unwrap();
        let image = flatten(&p);
        let entries = loop_body_entries(&image);
        assert_eq!(entries.len(), 1);
        assert_eq!(image.slots[entries[0]].line, 3);
    }
}

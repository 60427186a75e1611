//! The input language: a small C-like subset over fixed-width unsigned
//! integers, with `while`/`if`, nondeterministic `rand()`, `assume` and
//! `assert` statements, and `// Line X` placeholder markers.
//!
//! Programs keep their physical source line numbers. All later program
//! transformations (assumption insertion, goal insertion, placeholder
//! markers) *attach* to an existing line instead of renumbering, so
//! properties stay valid across transforms.

mod lex;
mod parse;
mod print;

pub use parse::parse;
pub use print::{print_expr, print_program, PrintOptions};

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Binary operators, in C syntax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
}

/// Expression tree. Literals are stored as normalized values, so `0xff`,
/// `255` and `UCHAR_MAX` compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    /// Unsigned integer literal (value already normalized).
    Lit(u64),
    /// Variable reference.
    Var(String),
    /// A `rand()` occurrence; `width` is the cast width if spelled with a
    /// cast, otherwise the program width applies.
    Rand { width: Option<u32> },
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn lit(v: u64) -> Expr {
        Expr::Lit(v)
    }

    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn not(e: Expr) -> Expr {
        Expr::Unary(UnOp::Not, Box::new(e))
    }

    /// True if any `rand()` occurs in the expression.
    pub fn has_rand(&self) -> bool {
        match self {
            Expr::Lit(_) | Expr::Var(_) => false,
            Expr::Rand { .. } => true,
            Expr::Unary(_, e) => e.has_rand(),
            Expr::Binary(_, a, b) => a.has_rand() || b.has_rand(),
        }
    }

    /// Collect variable names referenced by the expression.
    pub fn visit_vars(&self, f: &mut dyn FnMut(&str)) {
        match self {
            Expr::Lit(_) | Expr::Rand { .. } => {}
            Expr::Var(name) => f(name),
            Expr::Unary(_, e) => e.visit_vars(f),
            Expr::Binary(_, a, b) => {
                a.visit_vars(f);
                b.visit_vars(f);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_expr(self))
    }
}

/// Structural expression equality after literal normalization. Commutative
/// or algebraic rewrites are deliberately not applied: `x + z == n` and
/// `z + x == n` are distinct.
pub fn expr_equal(a: &Expr, b: &Expr) -> bool {
    a == b
}

/// How an assignment was spelled in the source, kept so printing is
/// faithful to the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignForm {
    /// `x = e;`
    Plain,
    /// `x op= e;`
    Compound(BinOp),
    /// `++x;` / `--x;`
    PreIncDec(BinOp),
    /// `x++;` / `x--;`
    PostIncDec(BinOp),
}

/// Right-hand side of an assignment or initializer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RValue {
    Expr(Expr),
    /// `rand()`, optionally spelled with a cast such as
    /// `(unsigned char) rand()`.
    Rand { cast: Option<String> },
}

impl RValue {
    pub fn as_expr(&self) -> Option<&Expr> {
        match self {
            RValue::Expr(e) => Some(e),
            RValue::Rand { .. } => None,
        }
    }
}

/// One declarator within a declaration statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Declarator {
    pub name: String,
    pub init: Option<RValue>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    /// `unsigned int x = e, y;`
    Decl {
        line: u32,
        type_spelling: String,
        declarators: Vec<Declarator>,
    },
    Assign {
        line: u32,
        var: String,
        form: AssignForm,
        value: RValue,
    },
    While {
        line: u32,
        cond: Expr,
        body: Vec<Stmt>,
        /// Physical line of the closing `}`.
        close_line: u32,
    },
    If {
        line: u32,
        cond: Expr,
        then_body: Vec<Stmt>,
        /// `else` branch with the line of `} else {`, when present.
        else_body: Option<(u32, Vec<Stmt>)>,
        close_line: u32,
    },
    Assume { line: u32, pred: Expr },
    Assert { line: u32, pred: Expr },
    Return { line: u32, value: Option<Expr> },
    /// A `// Line X` placeholder comment that occupies its own source line.
    Marker { line: u32, name: String },
}

impl Stmt {
    pub fn line(&self) -> u32 {
        match self {
            Stmt::Decl { line, .. }
            | Stmt::Assign { line, .. }
            | Stmt::While { line, .. }
            | Stmt::If { line, .. }
            | Stmt::Assume { line, .. }
            | Stmt::Assert { line, .. }
            | Stmt::Return { line, .. }
            | Stmt::Marker { line, .. } => *line,
        }
    }
}

/// A predicate asserted at a program line.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Property {
    pub predicate: Expr,
    pub line: u32,
}

impl serde::Serialize for Property {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Property", 2)?;
        st.serialize_field("pred", &print::print_expr(&self.predicate))?;
        st.serialize_field("line", &self.line)?;
        st.end()
    }
}

impl<'de> serde::Deserialize<'de> for Property {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        struct Wire {
            pred: String,
            line: u32,
        }
        let w = Wire::deserialize(d)?;
        let predicate = parse::parse_predicate(&w.pred)
            .map_err(|e| serde::de::Error::custom(format!("bad predicate: {e}")))?;
        Ok(Property { predicate, line: w.line })
    }
}

impl Property {
    pub fn new(predicate: Expr, line: u32) -> Property {
        Property { predicate, line }
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{} @ {}>", print_expr(&self.predicate), self.line)
    }
}

/// Negation of a property: `<phi, l>` becomes `<!(phi), l>`.
pub fn negate(p: &Property) -> Property {
    Property {
        predicate: Expr::not(p.predicate.clone()),
        line: p.line,
    }
}

/// A declared program variable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub type_spelling: String,
    /// Effective bit width: `min(nominal width of the type, program width)`.
    pub width: u32,
}

/// An attachment inserted *before* the statement at a line, without
/// renumbering. This is how assumption insertion, goal insertion and
/// placeholder insertion are modeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Attachment {
    Assume(Expr),
    Assert(Expr),
    Marker(String),
}

/// A parsed program: ordered statements with stable physical line numbers,
/// a variable table, a marker map, and the integer bit width in effect.
#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub stmts: Vec<Stmt>,
    pub vars: Vec<VarDecl>,
    /// Marker name -> line number. Covers both native `// Line X` comment
    /// lines and markers attached by [`insert_placeholders`].
    pub markers: BTreeMap<String, u32>,
    /// Program integer width W; arithmetic wraps modulo `2^W`.
    pub width: u32,
    /// Attachments keyed by line, executed before that line's statement,
    /// in insertion order.
    pub attachments: BTreeMap<u32, Vec<Attachment>>,
    /// Whether the source carried an `int main() { ... }` wrapper.
    pub has_main_wrapper: bool,
    /// Original asserts suppressed (used when rendering a proof goal).
    pub asserts_removed: bool,
    /// Highest physical line number of the source.
    pub last_line: u32,
}

/// Default width for the built-in verifier.
pub const DEFAULT_BUILTIN_WIDTH: u32 = 8;
/// Width matching the C source semantics, for external verifiers.
pub const SOURCE_WIDTH: u32 = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LangError {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: u32, col: u32, msg: String },
    #[error("line {0} is not a valid insertion point")]
    InvalidLine(u32),
    #[error("undeclared variable `{name}` referenced at line {line}")]
    UndeclaredVar { name: String, line: u32 },
}

impl Program {
    pub fn var(&self, name: &str) -> Option<&VarDecl> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Lines that carry a statement, in source order.
    pub fn stmt_lines(&self) -> Vec<u32> {
        let mut lines = Vec::new();
        visit_stmts(&self.stmts, &mut |s| lines.push(s.line()));
        lines
    }

    pub fn has_line(&self, line: u32) -> bool {
        let mut found = false;
        visit_stmts(&self.stmts, &mut |s| found |= s.line() == line);
        found
    }

    /// All assert statements as `(line, predicate)`, in source order.
    pub fn asserts(&self) -> Vec<(u32, Expr)> {
        let mut out = Vec::new();
        visit_stmts(&self.stmts, &mut |s| {
            if let Stmt::Assert { line, pred } = s {
                out.push((*line, pred.clone()));
            }
        });
        out
    }

    /// Number of `while` loops anywhere in the program.
    pub fn loop_count(&self) -> usize {
        let mut n = 0;
        visit_stmts(&self.stmts, &mut |s| {
            if matches!(s, Stmt::While { .. }) {
                n += 1;
            }
        });
        n
    }

    /// True iff the statement at `line` is lexically inside a `while` body.
    pub fn line_in_loop(&self, line: u32) -> Result<bool, LangError> {
        fn walk(stmts: &[Stmt], line: u32, in_loop: bool) -> Option<bool> {
            for s in stmts {
                if s.line() == line {
                    return Some(in_loop);
                }
                match s {
                    Stmt::While { body, .. } => {
                        if let Some(r) = walk(body, line, true) {
                            return Some(r);
                        }
                    }
                    Stmt::If {
                        then_body,
                        else_body,
                        ..
                    } => {
                        if let Some(r) = walk(then_body, line, in_loop) {
                            return Some(r);
                        }
                        if let Some((_, eb)) = else_body {
                            if let Some(r) = walk(eb, line, in_loop) {
                                return Some(r);
                            }
                        }
                    }
                    _ => {}
                }
            }
            None
        }
        walk(&self.stmts, line, false).ok_or(LangError::InvalidLine(line))
    }

    fn attach(&self, line: u32, a: Attachment) -> Result<Program, LangError> {
        if !self.has_line(line) {
            return Err(LangError::InvalidLine(line));
        }
        let mut out = self.clone();
        out.attachments.entry(line).or_default().push(a);
        Ok(out)
    }

    /// `asm(P, q)`: a new program where `assume(q.predicate)` executes at
    /// `q.line` before the original statement; an execution reaching the
    /// line with the predicate false terminates there. The receiver is
    /// unchanged.
    pub fn instrument_assume(&self, q: &Property) -> Result<Program, LangError> {
        self.attach(q.line, Attachment::Assume(q.predicate.clone()))
    }

    /// Attach `assert(p.predicate)` at `p.line` and suppress the original
    /// asserts, rendering `p` as the sole proof goal.
    pub fn instrument_assert(&self, p: &Property) -> Result<Program, LangError> {
        let mut out = self.attach(p.line, Attachment::Assert(p.predicate.clone()))?;
        out.asserts_removed = true;
        Ok(out)
    }

    /// Insert `// Line A`, `// Line B`, ... placeholder markers. For a
    /// single-loop program the marker goes at the start of the loop body;
    /// with several loops each loop gets one right before it and one at the
    /// start of its body; a loop-free program gets one before each assert.
    /// Markers are attachments: no line is renumbered.
    pub fn insert_placeholders(&self) -> Program {
        let mut points: Vec<u32> = Vec::new();
        let loops = self.loop_count();
        fn walk(stmts: &[Stmt], loops: usize, points: &mut Vec<u32>) {
            for s in stmts {
                match s {
                    Stmt::While { line, body, .. } => {
                        if loops >= 2 {
                            points.push(*line);
                        }
                        if let Some(first) = body.first() {
                            points.push(first.line());
                        }
                        walk(body, loops, points);
                    }
                    Stmt::If {
                        then_body,
                        else_body,
                        ..
                    } => {
                        walk(then_body, loops, points);
                        if let Some((_, eb)) = else_body {
                            walk(eb, loops, points);
                        }
                    }
                    _ => {}
                }
            }
        }
        walk(&self.stmts, loops, &mut points);
        if loops == 0 {
            visit_stmts(&self.stmts, &mut |s| {
                if let Stmt::Assert { line, .. } = s {
                    points.push(*line);
                }
            });
        }
        points.sort_unstable();
        points.dedup();

        let mut out = self.clone();
        for (i, line) in points.iter().enumerate() {
            let name = marker_name(i);
            out.markers.insert(name.clone(), *line);
            out.attachments
                .entry(*line)
                .or_default()
                .push(Attachment::Marker(name));
        }
        out
    }

    /// Marker map in name order.
    pub fn marker_list(&self) -> Vec<(String, u32)> {
        self.markers
            .iter()
            .map(|(n, l)| (n.clone(), *l))
            .collect()
    }
}

pub(crate) fn visit_stmts(stmts: &[Stmt], f: &mut dyn FnMut(&Stmt)) {
    for s in stmts {
        f(s);
        match s {
            Stmt::While { body, .. } => visit_stmts(body, f),
            Stmt::If {
                then_body,
                else_body,
                ..
            } => {
                visit_stmts(then_body, f);
                if let Some((_, eb)) = else_body {
                    visit_stmts(eb, f);
                }
            }
            _ => {}
        }
    }
}

/// Marker names A, B, ..., Z, AA, AB, ...
pub fn marker_name(index: usize) -> String {
    let mut n = index;
    let mut name = String::new();
    loop {
        name.insert(0, (b'A' + (n % 26) as u8) as char);
        if n < 26 {
            break;
        }
        n = n / 26 - 1;
    }
    name
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const FIG2: &str = "uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}\n";

    fn fig2() -> Program {
        parse(FIG2, DEFAULT_BUILTIN_WIDTH).unwrap()
    }

    #[test]
    fn parse_fig2_shape() {
        let p = fig2();
        assert_eq!(p.loop_count(), 1);
        assert_eq!(p.asserts(), vec![(4, parse::parse_predicate("x != 30").unwrap())]);
        assert_eq!(p.vars.len(), 1);
        assert_eq!(p.vars[0].width, 8);
    }

    #[test]
    fn parse_trivial_main() {
        let p = parse("int main(){return 0;}", DEFAULT_BUILTIN_WIDTH).unwrap();
        assert_eq!(p.asserts().len(), 0);
        assert_eq!(p.loop_count(), 0);
    }

    #[test]
    fn parse_missing_parens_is_error() {
        let err = parse("while x { }", DEFAULT_BUILTIN_WIDTH).unwrap_err();
        match err {
            LangError::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn negate_forms() {
        let p = Property::new(parse::parse_predicate("x != 30").unwrap(), 4);
        let n = negate(&p);
        assert_eq!(print_expr(&n.predicate), "!(x != 30)");
        assert_eq!(n.line, 4);
        let p2 = Property::new(parse::parse_predicate("x % 8 == 4").unwrap(), 3);
        assert_eq!(print_expr(&negate(&p2).predicate), "!(x % 8 == 4)");
    }

    #[test]
    fn expr_equal_normalizes_literals_not_commutativity() {
        let a = parse::parse_predicate("s <= i*0xff").unwrap();
        let b = parse::parse_predicate("s <= i*255").unwrap();
        let c = parse::parse_predicate("s <= i*UCHAR_MAX").unwrap();
        assert!(expr_equal(&a, &b));
        assert!(expr_equal(&a, &c));
        let d = parse::parse_predicate("x + z == n").unwrap();
        let e = parse::parse_predicate("z + x == n").unwrap();
        assert!(!expr_equal(&d, &e));
        assert!(expr_equal(&d, &d));
    }

    #[test]
    fn instrument_assume_attaches_without_renumbering() {
        let p = fig2();
        let q = Property::new(parse::parse_predicate("x % 4 == 0").unwrap(), 3);
        let p2 = p.instrument_assume(&q).unwrap();
        assert_eq!(p.attachments.len(), 0);
        assert_eq!(p2.attachments[&3].len(), 1);
        assert_eq!(p2.stmt_lines(), p.stmt_lines());
    }

    #[test]
    fn instrument_rejects_bad_lines() {
        let p = fig2();
        let zero = Property::new(Expr::lit(1), 0);
        assert_eq!(p.instrument_assert(&zero).unwrap_err(), LangError::InvalidLine(0));
        let beyond = Property::new(Expr::lit(1), 99);
        assert_eq!(p.instrument_assume(&beyond).unwrap_err(), LangError::InvalidLine(99));
    }

    #[test]
    fn line_in_loop_fig2() {
        let p = fig2();
        assert!(p.line_in_loop(3).unwrap());
        assert!(p.line_in_loop(4).unwrap());
        assert!(!p.line_in_loop(1).unwrap());
        assert!(!p.line_in_loop(2).unwrap());
        assert_eq!(p.line_in_loop(17).unwrap_err(), LangError::InvalidLine(17));
    }

    #[test]
    fn stability_example_line_is_loop_free() {
        let p = parse("uint32_t x=rand();\nassert(x==1);\n", DEFAULT_BUILTIN_WIDTH).unwrap();
        assert!(!p.line_in_loop(2).unwrap());
    }

    #[test]
    fn placeholders_single_loop_marks_body_start() {
        let p = fig2().insert_placeholders();
        assert_eq!(p.marker_list(), vec![("A".to_string(), 3)]);
    }

    #[test]
    fn placeholders_loop_free_marks_assert() {
        let p = parse("uint32_t x=rand();\nassert(x==1);\n", DEFAULT_BUILTIN_WIDTH)
            .unwrap()
            .insert_placeholders();
        assert_eq!(p.marker_list(), vec![("A".to_string(), 2)]);
    }

    #[test]
    fn placeholders_two_loops_get_four_markers() {
        let src = "uint32_t x=0;\nwhile (x < 3){\nx+=1;\n}\nwhile (rand()){\nx+=2;\n}\nassert(x!=9);\n";
        let p = parse(src, DEFAULT_BUILTIN_WIDTH).unwrap().insert_placeholders();
        assert_eq!(
            p.marker_list(),
            vec![
                ("A".to_string(), 2),
                ("B".to_string(), 3),
                ("C".to_string(), 5),
                ("D".to_string(), 6),
            ]
        );
    }

    #[test]
    fn marker_names_extend_past_z() {
        assert_eq!(marker_name(0), "A");
        assert_eq!(marker_name(25), "Z");
        assert_eq!(marker_name(26), "AA");
    }
}

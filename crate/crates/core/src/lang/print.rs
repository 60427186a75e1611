//! Pretty-printer. Produces compile-ready text; statement lines keep their
//! physical positions, attachments are emitted as extra lines right before
//! the line they attach to.

use super::*;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, _, _) => match op {
            BinOp::Or => 0,
            BinOp::And => 1,
            BinOp::Eq | BinOp::Ne => 2,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
            BinOp::Add | BinOp::Sub => 4,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 5,
        },
        Expr::Unary(..) => 6,
        Expr::Lit(_) | Expr::Var(_) | Expr::Rand { .. } => 7,
    }
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    let lv = level(e);
    let paren = lv < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Lit(v) => out.push_str(&v.to_string()),
        Expr::Var(name) => out.push_str(name),
        Expr::Rand { .. } => out.push_str("rand()"),
        Expr::Unary(op, inner) => {
            out.push(match op {
                UnOp::Not => '!',
                UnOp::Neg => '-',
            });
            write_expr(out, inner, 6);
        }
        Expr::Binary(op, a, b) => {
            write_expr(out, a, lv);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_expr(out, b, lv + 1);
        }
    }
    if paren {
        out.push(')');
    }
}

/// Canonical expression text: spaced binary operators, minimal parentheses,
/// decimal literals.
pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, 0);
    s
}

/// How `rand()` is spelled when printing.
#[derive(Debug, Clone)]
pub enum RandSpelling {
    /// Keep `rand()` (with its cast, for assignments).
    Keep,
    /// Nondet function call chosen by the assigned width.
    Nondet { by_width: Vec<(u32, String)>, default: String },
}

#[derive(Debug, Clone)]
pub enum MarkerMode {
    /// Show native and attached markers.
    All,
    /// Hide all markers.
    None,
    /// Hide all markers and show a single `// Line A` before `line`.
    Single { line: u32 },
}

#[derive(Debug, Clone)]
pub struct PrintOptions {
    pub marker_mode: MarkerMode,
    pub show_assume_attachments: bool,
    pub show_assert_attachments: bool,
    pub assume_spelling: String,
    pub assert_spelling: String,
    pub rand_spelling: RandSpelling,
}

impl Default for PrintOptions {
    fn default() -> Self {
        PrintOptions {
            marker_mode: MarkerMode::All,
            show_assume_attachments: true,
            show_assert_attachments: true,
            assume_spelling: "assume".into(),
            assert_spelling: "assert".into(),
            rand_spelling: RandSpelling::Keep,
        }
    }
}

impl PrintOptions {
    fn rand_text(&self, cast: Option<&str>, width: u32) -> String {
        match &self.rand_spelling {
            RandSpelling::Keep => match cast {
                Some(c) => format!("({c}) rand()"),
                None => "rand()".to_string(),
            },
            RandSpelling::Nondet { by_width, default } => {
                let f = by_width
                    .iter()
                    .find(|(w, _)| *w == width)
                    .map(|(_, f)| f.as_str())
                    .unwrap_or(default.as_str());
                format!("{f}()")
            }
        }
    }
}

struct Renderer<'a> {
    program: &'a Program,
    opts: &'a PrintOptions,
    /// text segments per physical line
    segments: BTreeMap<u32, Vec<String>>,
    /// attachment lines emitted before a physical line
    before: BTreeMap<u32, Vec<String>>,
}

impl<'a> Renderer<'a> {
    fn push(&mut self, line: u32, text: String) {
        self.segments.entry(line).or_default().push(text);
    }

    fn rvalue_text(&self, rv: &RValue, target_width: u32) -> String {
        match rv {
            RValue::Expr(e) => print_expr(e),
            RValue::Rand { cast } => self.opts.rand_text(cast.as_deref(), target_width),
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        match s {
            Stmt::Decl { line, type_spelling, declarators } => {
                let parts: Vec<String> = declarators
                    .iter()
                    .map(|d| {
                        let width = self
                            .program
                            .var(&d.name)
                            .map(|v| v.width)
                            .unwrap_or(self.program.width);
                        match &d.init {
                            Some(rv) => format!("{} = {}", d.name, self.rvalue_text(rv, width)),
                            None => d.name.clone(),
                        }
                    })
                    .collect();
                self.push(*line, format!("{type_spelling} {};", parts.join(", ")));
            }
            Stmt::Assign { line, var, form, value } => {
                let width = self.program.var(var).map(|v| v.width).unwrap_or(self.program.width);
                let text = match form {
                    AssignForm::Plain => format!("{var} = {};", self.rvalue_text(value, width)),
                    AssignForm::Compound(op) => {
                        format!("{var} {}= {};", op.symbol(), self.rvalue_text(value, width))
                    }
                    AssignForm::PreIncDec(BinOp::Add) => format!("++{var};"),
                    AssignForm::PreIncDec(_) => format!("--{var};"),
                    AssignForm::PostIncDec(BinOp::Add) => format!("{var}++;"),
                    AssignForm::PostIncDec(_) => format!("{var}--;"),
                };
                self.push(*line, text);
            }
            Stmt::While { line, cond, body, close_line } => {
                self.push(*line, format!("while ({}) {{", print_expr(cond)));
                for b in body {
                    self.stmt(b);
                }
                self.push(*close_line, "}".to_string());
            }
            Stmt::If { line, cond, then_body, else_body, close_line } => {
                self.push(*line, format!("if ({}) {{", print_expr(cond)));
                for b in then_body {
                    self.stmt(b);
                }
                if let Some((else_line, eb)) = else_body {
                    self.push(*else_line, "} else {".to_string());
                    for b in eb {
                        self.stmt(b);
                    }
                }
                self.push(*close_line, "}".to_string());
            }
            Stmt::Assume { line, pred } => {
                self.push(*line, format!("{}({});", self.opts.assume_spelling, print_expr(pred)));
            }
            Stmt::Assert { line, pred } => {
                if !self.program.asserts_removed {
                    self.push(*line, format!("{}({});", self.opts.assert_spelling, print_expr(pred)));
                }
            }
            Stmt::Return { line, value } => {
                let text = match value {
                    Some(e) => format!("return {};", print_expr(e)),
                    None => "return;".to_string(),
                };
                self.push(*line, text);
            }
            Stmt::Marker { line, name } => match &self.opts.marker_mode {
                MarkerMode::All => self.push(*line, format!("// Line {name}")),
                // A single-marker rendering reuses the marker's own line.
                MarkerMode::Single { line: target } if target == line => {
                    self.push(*line, "// Line A".to_string())
                }
                _ => {}
            },
        }
    }

    fn attachments(&mut self) {
        for (line, list) in &self.program.attachments {
            for a in list {
                let text = match a {
                    Attachment::Assume(e) if self.opts.show_assume_attachments => {
                        format!("{}({});", self.opts.assume_spelling, print_expr(e))
                    }
                    Attachment::Assert(e) if self.opts.show_assert_attachments => {
                        format!("{}({});", self.opts.assert_spelling, print_expr(e))
                    }
                    Attachment::Marker(name) if matches!(self.opts.marker_mode, MarkerMode::All) => {
                        format!("// Line {name}")
                    }
                    _ => continue,
                };
                self.before.entry(*line).or_default().push(text);
            }
        }
        if let MarkerMode::Single { line } = self.opts.marker_mode {
            // If the target line is itself a marker statement it was
            // rendered in place; otherwise inject a line before it.
            let mut is_marker_stmt = false;
            visit_stmts(&self.program.stmts, &mut |s| {
                if let Stmt::Marker { line: l, .. } = s {
                    is_marker_stmt |= *l == line;
                }
            });
            if !is_marker_stmt {
                self.before.entry(line).or_default().push("// Line A".to_string());
            }
        }
    }
}

/// Render the program as text. One line of output per physical source line
/// (blank lines preserved), plus attachment lines immediately before their
/// anchor. No trailing newline.
pub fn print_program(program: &Program, opts: &PrintOptions) -> String {
    let mut r = Renderer { program, opts, segments: BTreeMap::new(), before: BTreeMap::new() };
    if program.has_main_wrapper {
        r.push(1, "int main() {".to_string());
        r.push(program.last_line, "}".to_string());
    }
    for s in &program.stmts {
        r.stmt(s);
    }
    r.attachments();

    let max_line = program
        .last_line
        .max(r.segments.keys().next_back().copied().unwrap_or(1));
    let mut out: Vec<String> = Vec::new();
    for line in 1..=max_line {
        if let Some(pre) = r.before.get(&line) {
            out.extend(pre.iter().cloned());
        }
        match r.segments.get(&line) {
            Some(seg) => out.push(seg.join(" ")),
            None => out.push(String::new()),
        }
    }
    // Drop trailing blank lines introduced by comment-only or marker-hidden
    // source lines.
    while out.last().is_some_and(|l| l.is_empty()) {
        out.pop();
    }
    out.join("\n")
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse;
    use super::*;

    const F1: &str = "int main() {\nunsigned char n = (unsigned char) rand();\nif (n == 0) {\nreturn 0;\n}\nunsigned char v = 0;\nunsigned int s = 0;\nunsigned int i = 0;\nwhile (i < n) {\n// Line A\nv = (unsigned char) rand();\ns += v;\n++i;\n}\nassert(s >= v);\nreturn 1;\n}";

    #[test]
    fn appendix_listing_round_trips_byte_for_byte() {
        let p = parse(F1, 8).unwrap();
        assert_eq!(print_program(&p, &PrintOptions::default()), F1);
    }

    #[test]
    fn round_trip_preserves_ast_and_lines() {
        let src = "uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}";
        let p = parse(src, 8).unwrap();
        let printed = print_program(&p, &PrintOptions::default());
        let p2 = parse(&printed, 8).unwrap();
        assert_eq!(p.stmts, p2.stmts);
        assert_eq!(p.markers, p2.markers);
        assert_eq!(p.stmt_lines(), p2.stmt_lines());
    }

    #[test]
    fn minimal_parens() {
        let e = crate::lang::parse::parse_predicate("s >= 0 && s <= i*0xff").unwrap();
        assert_eq!(print_expr(&e), "s >= 0 && s <= i * 255");
        let e = crate::lang::parse::parse_predicate("!(x != 30)").unwrap();
        assert_eq!(print_expr(&e), "!(x != 30)");
        let e = crate::lang::parse::parse_predicate("(x + 1) * 2 == 0").unwrap();
        assert_eq!(print_expr(&e), "(x + 1) * 2 == 0");
    }

    #[test]
    fn assume_attachment_prints_before_line() {
        let p = parse("uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}", 8).unwrap();
        let q = Property::new(crate::lang::parse::parse_predicate("x % 4 == 0").unwrap(), 3);
        let inst = p.instrument_assume(&q).unwrap();
        let text = print_program(&inst, &PrintOptions::default());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[2], "assume(x % 4 == 0);");
        assert_eq!(lines[3], "x += 4;");
    }
}

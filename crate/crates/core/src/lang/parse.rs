//! Recursive-descent parser for the C-like subset.

use super::lex::{lex, Tok, Token};
use super::*;

/// Named limit constants accepted in expressions.
fn named_literal(name: &str) -> Option<u64> {
    match name {
        "UCHAR_MAX" => Some(0xff),
        "USHRT_MAX" => Some(0xffff),
        "UINT_MAX" => Some(0xffff_ffff),
        "true" => Some(1),
        "false" => Some(0),
        _ => None,
    }
}

fn nominal_width(type_spelling: &str) -> u32 {
    match type_spelling {
        "unsigned char" | "uint8_t" | "char" => 8,
        "uint16_t" | "unsigned short" => 16,
        _ => 32,
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    width: u32,
    vars: Vec<VarDecl>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek2(&self) -> Option<&Token> {
        self.tokens.get(self.pos + 1)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err_here(&self, msg: impl Into<String>) -> LangError {
        let (line, col) = self
            .peek()
            .map(|t| (t.line, t.col))
            .or_else(|| self.tokens.last().map(|t| (t.line, t.col)))
            .unwrap_or((1, 1));
        LangError::Parse { line, col, msg: msg.into() }
    }

    fn expect_punct(&mut self, p: &'static str) -> Result<Token, LangError> {
        match self.peek() {
            Some(t) if t.tok == Tok::Punct(p) => Ok(self.next().unwrap()),
            _ => Err(self.err_here(format!("expected `{p}`"))),
        }
    }

    fn eat_punct(&mut self, p: &'static str) -> bool {
        if matches!(self.peek(), Some(t) if t.tok == Tok::Punct(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn ident_is(&self, t: &Token, s: &str) -> bool {
        matches!(&t.tok, Tok::Ident(i) if i == s)
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek().map(|t| &t.tok) {
            Some(Tok::Ident(i)) => Some(i.as_str()),
            _ => None,
        }
    }

    /// Recognize a type spelling at the cursor without consuming it.
    /// Returns (spelling, token count).
    fn peek_type(&self) -> Option<(String, usize)> {
        let first = self.peek_ident()?;
        match first {
            "unsigned" => {
                if let Some(t2) = self.peek2() {
                    if self.ident_is(t2, "char") || self.ident_is(t2, "int") || self.ident_is(t2, "short") {
                        let second = match &t2.tok {
                            Tok::Ident(i) => i.clone(),
                            _ => unreachable!(),
                        };
                        return Some((format!("unsigned {second}"), 2));
                    }
                }
                Some(("unsigned".to_string(), 1))
            }
            "uint8_t" | "uint16_t" | "uint32_t" | "int" | "char" => Some((first.to_string(), 1)),
            _ => None,
        }
    }

    fn declare(&mut self, name: &str, type_spelling: &str, line: u32, col: u32) -> Result<(), LangError> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(LangError::Parse {
                line,
                col,
                msg: format!("variable `{name}` declared twice"),
            });
        }
        self.vars.push(VarDecl {
            name: name.to_string(),
            type_spelling: type_spelling.to_string(),
            width: nominal_width(type_spelling).min(self.width),
        });
        Ok(())
    }

    fn check_var(&self, name: &str, line: u32) -> Result<(), LangError> {
        if self.vars.iter().any(|v| v.name == name) {
            Ok(())
        } else {
            Err(LangError::UndeclaredVar { name: name.to_string(), line })
        }
    }

    /// `rand ( )` with the cursor on `rand`.
    fn parse_rand_call(&mut self) -> Result<(), LangError> {
        self.next();
        self.expect_punct("(")?;
        self.expect_punct(")")?;
        Ok(())
    }

    /// An assignment right-hand side: `(type) rand()`, `rand()`, or an
    /// expression.
    fn parse_rvalue(&mut self) -> Result<RValue, LangError> {
        if matches!(self.peek(), Some(t) if t.tok == Tok::Punct("(")) {
            // Possible cast before rand().
            let save = self.pos;
            self.pos += 1;
            if let Some((spelling, n)) = self.peek_type() {
                self.pos += n;
                if self.eat_punct(")") {
                    if self.peek_ident() == Some("rand") {
                        self.parse_rand_call()?;
                        return Ok(RValue::Rand { cast: Some(spelling) });
                    }
                }
            }
            self.pos = save;
        }
        if self.peek_ident() == Some("rand") {
            self.parse_rand_call()?;
            return Ok(RValue::Rand { cast: None });
        }
        Ok(RValue::Expr(self.parse_expr()?))
    }

    fn parse_expr(&mut self) -> Result<Expr, LangError> {
        self.parse_bin(0)
    }

    fn parse_bin(&mut self, min_level: u8) -> Result<Expr, LangError> {
        let mut lhs = self.parse_unary()?;
        loop {
            let (op, level) = match self.peek().map(|t| &t.tok) {
                Some(Tok::Punct("||")) => (BinOp::Or, 0),
                Some(Tok::Punct("&&")) => (BinOp::And, 1),
                Some(Tok::Punct("==")) => (BinOp::Eq, 2),
                Some(Tok::Punct("!=")) => (BinOp::Ne, 2),
                Some(Tok::Punct("<")) => (BinOp::Lt, 3),
                Some(Tok::Punct("<=")) => (BinOp::Le, 3),
                Some(Tok::Punct(">")) => (BinOp::Gt, 3),
                Some(Tok::Punct(">=")) => (BinOp::Ge, 3),
                Some(Tok::Punct("+")) => (BinOp::Add, 4),
                Some(Tok::Punct("-")) => (BinOp::Sub, 4),
                Some(Tok::Punct("*")) => (BinOp::Mul, 5),
                Some(Tok::Punct("/")) => (BinOp::Div, 5),
                Some(Tok::Punct("%")) => (BinOp::Rem, 5),
                _ => break,
            };
            if level < min_level {
                break;
            }
            self.pos += 1;
            let rhs = self.parse_bin(level + 1)?;
            lhs = Expr::bin(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn parse_unary(&mut self) -> Result<Expr, LangError> {
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.parse_unary()?)));
        }
        if self.eat_punct("-") {
            return Ok(Expr::Unary(UnOp::Neg, Box::new(self.parse_unary()?)));
        }
        self.parse_primary()
    }

    fn parse_primary(&mut self) -> Result<Expr, LangError> {
        match self.peek().cloned() {
            Some(Token { tok: Tok::Int(v), .. }) => {
                self.pos += 1;
                Ok(Expr::Lit(v))
            }
            Some(Token { tok: Tok::Ident(name), .. }) => {
                if let Some(v) = named_literal(&name) {
                    self.pos += 1;
                    return Ok(Expr::Lit(v));
                }
                if name == "rand" {
                    self.parse_rand_call()?;
                    return Ok(Expr::Rand { width: None });
                }
                self.pos += 1;
                Ok(Expr::Var(name))
            }
            Some(Token { tok: Tok::Punct("("), .. }) => {
                self.pos += 1;
                // A cast applied to rand() inside an expression.
                if let Some((_, n)) = self.peek_type() {
                    let save = self.pos;
                    self.pos += n;
                    if self.eat_punct(")") && self.peek_ident() == Some("rand") {
                        let width = {
                            self.pos = save;
                            let (spelling, n) = self.peek_type().unwrap();
                            self.pos += n;
                            self.expect_punct(")")?;
                            nominal_width(&spelling).min(self.width)
                        };
                        self.parse_rand_call()?;
                        return Ok(Expr::Rand { width: Some(width) });
                    }
                    self.pos = save;
                }
                let e = self.parse_expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            _ => Err(self.err_here("expected expression")),
        }
    }

    fn parse_block(&mut self) -> Result<(Vec<Stmt>, u32), LangError> {
        self.expect_punct("{")?;
        let mut body = Vec::new();
        loop {
            match self.peek() {
                Some(t) if t.tok == Tok::Punct("}") => {
                    let close = self.next().unwrap();
                    return Ok((body, close.line));
                }
                Some(_) => body.push(self.parse_stmt()?),
                None => return Err(self.err_here("missing `}`")),
            }
        }
    }

    fn parse_stmt(&mut self) -> Result<Stmt, LangError> {
        let tok = self.peek().cloned().ok_or_else(|| self.err_here("expected statement"))?;
        let line = tok.line;
        match &tok.tok {
            Tok::Marker(name) => {
                self.pos += 1;
                Ok(Stmt::Marker { line, name: name.clone() })
            }
            Tok::Punct("++") | Tok::Punct("--") => {
                let op = if tok.tok == Tok::Punct("++") { BinOp::Add } else { BinOp::Sub };
                self.pos += 1;
                let name = match self.next() {
                    Some(Token { tok: Tok::Ident(n), .. }) => n,
                    _ => return Err(self.err_here("expected variable")),
                };
                self.check_var(&name, line)?;
                self.expect_punct(";")?;
                Ok(Stmt::Assign {
                    line,
                    var: name,
                    form: AssignForm::PreIncDec(op),
                    value: RValue::Expr(Expr::Lit(1)),
                })
            }
            Tok::Ident(name) => match name.as_str() {
                "while" => {
                    self.pos += 1;
                    self.expect_punct("(")?;
                    let cond = self.parse_expr()?;
                    self.expect_punct(")")?;
                    let (body, close_line) = self.parse_block()?;
                    Ok(Stmt::While { line, cond, body, close_line })
                }
                "if" => {
                    self.pos += 1;
                    self.expect_punct("(")?;
                    let cond = self.parse_expr()?;
                    self.expect_punct(")")?;
                    let (then_body, mut close_line) = self.parse_block()?;
                    let mut else_body = None;
                    if self.peek_ident() == Some("else") {
                        let else_line = self.peek().unwrap().line;
                        self.pos += 1;
                        let (eb, cl) = self.parse_block()?;
                        close_line = cl;
                        else_body = Some((else_line, eb));
                    }
                    Ok(Stmt::If { line, cond, then_body, else_body, close_line })
                }
                "assume" | "assert" => {
                    let kw = name.clone();
                    self.pos += 1;
                    self.expect_punct("(")?;
                    let pred = self.parse_expr()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    if kw == "assume" {
                        Ok(Stmt::Assume { line, pred })
                    } else {
                        Ok(Stmt::Assert { line, pred })
                    }
                }
                "return" => {
                    self.pos += 1;
                    let value = if matches!(self.peek(), Some(t) if t.tok == Tok::Punct(";")) {
                        None
                    } else {
                        Some(self.parse_expr()?)
                    };
                    self.expect_punct(";")?;
                    Ok(Stmt::Return { line, value })
                }
                _ => {
                    if let Some((type_spelling, n)) = self.peek_type() {
                        self.pos += n;
                        return self.parse_decl(line, type_spelling);
                    }
                    self.parse_assign(line)
                }
            },
            _ => Err(self.err_here("expected statement")),
        }
    }

    fn parse_decl(&mut self, line: u32, type_spelling: String) -> Result<Stmt, LangError> {
        let mut declarators = Vec::new();
        loop {
            let (name, ncol) = match self.next() {
                Some(Token { tok: Tok::Ident(n), col, .. }) => (n, col),
                _ => return Err(self.err_here("expected variable name")),
            };
            self.declare(&name, &type_spelling, line, ncol)?;
            let init = if self.eat_punct("=") {
                let rv = self.parse_rvalue()?;
                if let RValue::Expr(e) = &rv {
                    self.check_expr_vars(e, line)?;
                }
                Some(rv)
            } else {
                None
            };
            declarators.push(Declarator { name, init });
            if self.eat_punct(",") {
                continue;
            }
            self.expect_punct(";")?;
            break;
        }
        Ok(Stmt::Decl { line, type_spelling, declarators })
    }

    fn parse_assign(&mut self, line: u32) -> Result<Stmt, LangError> {
        let name = match self.next() {
            Some(Token { tok: Tok::Ident(n), .. }) => n,
            _ => return Err(self.err_here("expected statement")),
        };
        self.check_var(&name, line)?;
        let (form, value) = match self.peek().map(|t| t.tok.clone()) {
            Some(Tok::Punct("=")) => {
                self.pos += 1;
                (AssignForm::Plain, self.parse_rvalue()?)
            }
            Some(Tok::Punct("+=")) => {
                self.pos += 1;
                (AssignForm::Compound(BinOp::Add), self.parse_rvalue()?)
            }
            Some(Tok::Punct("-=")) => {
                self.pos += 1;
                (AssignForm::Compound(BinOp::Sub), self.parse_rvalue()?)
            }
            Some(Tok::Punct("*=")) => {
                self.pos += 1;
                (AssignForm::Compound(BinOp::Mul), self.parse_rvalue()?)
            }
            Some(Tok::Punct("/=")) => {
                self.pos += 1;
                (AssignForm::Compound(BinOp::Div), self.parse_rvalue()?)
            }
            Some(Tok::Punct("%=")) => {
                self.pos += 1;
                (AssignForm::Compound(BinOp::Rem), self.parse_rvalue()?)
            }
            Some(Tok::Punct("++")) => {
                self.pos += 1;
                (AssignForm::PostIncDec(BinOp::Add), RValue::Expr(Expr::Lit(1)))
            }
            Some(Tok::Punct("--")) => {
                self.pos += 1;
                (AssignForm::PostIncDec(BinOp::Sub), RValue::Expr(Expr::Lit(1)))
            }
            _ => return Err(self.err_here("expected assignment operator")),
        };
        if let RValue::Expr(e) = &value {
            self.check_expr_vars(e, line)?;
        }
        self.expect_punct(";")?;
        Ok(Stmt::Assign { line, var: name, form, value })
    }

    fn check_expr_vars(&self, e: &Expr, line: u32) -> Result<(), LangError> {
        let mut bad = None;
        e.visit_vars(&mut |name| {
            if bad.is_none() && !self.vars.iter().any(|v| v.name == name) {
                bad = Some(name.to_string());
            }
        });
        match bad {
            Some(name) => Err(LangError::UndeclaredVar { name, line }),
            None => Ok(()),
        }
    }
}

/// Parse source text into a [`Program`] with width `width`. Physical line
/// numbers are preserved; `// Line X` comments populate the marker map.
pub fn parse(source: &str, width: u32) -> Result<Program, LangError> {
    let cleaned: String = source
        .lines()
        .map(|l| if l.trim_start().starts_with('#') { "" } else { l })
        .collect::<Vec<_>>()
        .join("\n");
    let tokens = lex(&cleaned)?;
    let mut p = Parser { tokens, pos: 0, width, vars: Vec::new() };

    // Optional `int main() {` wrapper.
    let mut has_main_wrapper = false;
    if p.peek_ident() == Some("int") {
        if let Some(t2) = p.peek2() {
            if p.ident_is(t2, "main") {
                p.pos += 2;
                p.expect_punct("(")?;
                p.expect_punct(")")?;
                p.expect_punct("{")?;
                has_main_wrapper = true;
            }
        }
    }

    let mut stmts = Vec::new();
    loop {
        match p.peek() {
            None => break,
            Some(t) if t.tok == Tok::Punct("}") => {
                if has_main_wrapper && p.peek2().is_none() {
                    p.pos += 1;
                    break;
                }
                return Err(p.err_here("unexpected `}`"));
            }
            Some(_) => stmts.push(p.parse_stmt()?),
        }
    }

    let mut markers = BTreeMap::new();
    visit_stmts(&stmts, &mut |s| {
        if let Stmt::Marker { line, name } = s {
            markers.insert(name.clone(), *line);
        }
    });

    let last_line = cleaned.lines().count() as u32;
    Ok(Program {
        stmts,
        vars: p.vars,
        markers,
        width,
        attachments: BTreeMap::new(),
        has_main_wrapper,
        asserts_removed: false,
        last_line,
    })
}

/// Parse a bare predicate expression, as found in oracle responses and
/// serialized traces. Variables are not resolved against any program here.
pub fn parse_predicate(text: &str) -> Result<Expr, LangError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, width: 64, vars: Vec::new() };
    let e = p.parse_expr()?;
    if p.peek().is_some() {
        return Err(p.err_here("trailing input after expression"));
    }
    if e.has_rand() {
        return Err(LangError::Parse { line: 1, col: 1, msg: "rand() not allowed in predicates".into() });
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_appendix_style_program() {
        let src = "int main() {\nunsigned char n = (unsigned char) rand();\nif (n == 0) {\nreturn 0;\n}\nunsigned char v = 0;\nunsigned int s = 0;\nunsigned int i = 0;\nwhile (i < n) {\n// Line A\nv = (unsigned char) rand();\ns += v;\n++i;\n}\nassert(s >= v);\nreturn 1;\n}";
        let p = parse(src, 8).unwrap();
        assert!(p.has_main_wrapper);
        assert_eq!(p.vars.len(), 4);
        assert_eq!(p.markers.get("A"), Some(&10));
        assert_eq!(p.asserts().len(), 1);
        assert_eq!(p.asserts()[0].0, 15);
    }

    #[test]
    fn parses_multi_declarator_with_uninitialized() {
        let p = parse("unsigned int x = 3, y = 0, z;\n", 8).unwrap();
        assert_eq!(p.vars.len(), 3);
    }

    #[test]
    fn rejects_undeclared_variable() {
        let err = parse("uint32_t x = 0;\ny = 1;\n", 8).unwrap_err();
        assert!(matches!(err, LangError::UndeclaredVar { ref name, line: 2 } if name == "y"));
    }

    #[test]
    fn predicate_rejects_rand() {
        assert!(parse_predicate("rand() > 0").is_err());
        assert!(parse_predicate("x ==").is_err());
        assert!(parse_predicate("x == 1").is_ok());
    }

    #[test]
    fn precedence_is_c_like() {
        let e = parse_predicate("s >= 0 && s <= i * 255 || v == 1").unwrap();
        match e {
            Expr::Binary(BinOp::Or, _, _) => {}
            other => panic!("bad precedence: {other:?}"),
        }
    }
}

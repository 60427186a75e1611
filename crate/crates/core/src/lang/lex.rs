//! Tokenizer. Tracks line/column for every token; comments other than
//! `// Line X` markers are skipped.

use super::LangError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    /// A `// Line X` marker comment.
    Marker(String),
    Punct(&'static str),
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

const PUNCTS: &[&str] = &[
    "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=", "%=", "++", "--", "(", ")", "{",
    "}", ";", ",", "=", "<", ">", "+", "-", "*", "/", "%", "!",
];

pub fn lex(source: &str) -> Result<Vec<Token>, LangError> {
    let mut tokens = Vec::new();
    for (lineno, raw) in source.lines().enumerate() {
        let line = lineno as u32 + 1;
        let bytes = raw.as_bytes();
        let mut i = 0usize;
        while i < bytes.len() {
            let c = bytes[i] as char;
            if c.is_ascii_whitespace() {
                i += 1;
                continue;
            }
            let col = i as u32 + 1;
            if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
                let comment = raw[i + 2..].trim();
                if let Some(rest) = comment.strip_prefix("Line ").or_else(|| comment.strip_prefix("line ")) {
                    let name = rest.trim().to_string();
                    if !name.is_empty() && name.chars().all(|ch| ch.is_ascii_alphanumeric()) {
                        tokens.push(Token { tok: Tok::Marker(name), line, col });
                    }
                }
                break; // rest of the physical line is comment
            }
            if c.is_ascii_digit() {
                let start = i;
                let mut value: u64;
                if c == '0' && i + 1 < bytes.len() && (bytes[i + 1] == b'x' || bytes[i + 1] == b'X') {
                    i += 2;
                    let hex_start = i;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_hexdigit() {
                        i += 1;
                    }
                    if i == hex_start {
                        return Err(LangError::Parse { line, col, msg: "malformed hex literal".into() });
                    }
                    value = u64::from_str_radix(&raw[hex_start..i], 16).map_err(|_| LangError::Parse {
                        line,
                        col,
                        msg: "hex literal out of range".into(),
                    })?;
                } else {
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                    value = raw[start..i].parse().map_err(|_| LangError::Parse {
                        line,
                        col,
                        msg: "integer literal out of range".into(),
                    })?;
                }
                // Tolerate C integer suffixes (1u, 2UL).
                while i < bytes.len() && matches!(bytes[i] as char, 'u' | 'U' | 'l' | 'L') {
                    i += 1;
                }
                let _ = &mut value;
                tokens.push(Token { tok: Tok::Int(value), line, col });
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                tokens.push(Token { tok: Tok::Ident(raw[start..i].to_string()), line, col });
                continue;
            }
            let mut matched = false;
            for p in PUNCTS {
                if raw[i..].starts_with(p) {
                    tokens.push(Token { tok: Tok::Punct(p), line, col });
                    i += p.len();
                    matched = true;
                    break;
                }
            }
            if !matched {
                return Err(LangError::Parse {
                    line,
                    col,
                    msg: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_markers_and_hex() {
        let toks = lex("// Line A\nx = 0xff;\n").unwrap();
        assert_eq!(toks[0].tok, Tok::Marker("A".into()));
        assert_eq!(toks[0].line, 1);
        assert!(toks.iter().any(|t| t.tok == Tok::Int(255)));
    }

    #[test]
    fn skips_plain_comments() {
        let toks = lex("x = 1; // just a note\n").unwrap();
        assert_eq!(toks.len(), 4);
    }
}

//! Response parsing. Extracts `assert(<expr>); // line <marker>` lines,
//! parses the expression, and resolves the marker against the marker map.
//! Anything else is silently dropped; parsing never fails.

use crate::lang::parse::parse_predicate;
use crate::lang::Property;
use std::collections::BTreeMap;

/// Extract proposals from one response text. Returns `(property, raw
/// predicate text)` pairs in order of appearance.
///
/// Marker resolution: a named marker maps through `markers`; an unknown or
/// missing marker is accepted only when the map has exactly one entry
/// (single-location prompts, where models routinely invent `// Line B` or
/// omit the suffix).
pub fn parse_response(
    text: &str,
    markers: &BTreeMap<String, u32>,
) -> Vec<(Property, String)> {
    let mut out = Vec::new();
    for line in text.lines() {
        let Some((expr_text, marker)) = match_assert_line(line) else {
            continue;
        };
        let line_no = match marker {
            Some(name) => match markers.get(&name) {
                Some(l) => *l,
                None if markers.len() == 1 => *markers.values().next().unwrap(),
                None => continue,
            },
            None if markers.len() == 1 => *markers.values().next().unwrap(),
            None => continue,
        };
        let Ok(pred) = parse_predicate(&expr_text) else {
            continue;
        };
        out.push((Property::new(pred, line_no), expr_text));
    }
    out
}

/// Match `assert( ... ); [// [Ll]ine <name>]` with balanced parentheses.
fn match_assert_line(line: &str) -> Option<(String, Option<String>)> {
    let trimmed = line.trim();
    let rest = trimmed.strip_prefix("assert")?.trim_start();
    let rest = rest.strip_prefix('(')?;
    // Find the matching close paren.
    let mut depth = 1usize;
    let mut end = None;
    for (i, c) in rest.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth == 0 {
                    end = Some(i);
                    break;
                }
            }
            _ => {}
        }
    }
    let end = end?;
    let expr_text = rest[..end].trim().to_string();
    if expr_text.is_empty() {
        return None;
    }
    let mut tail = rest[end + 1..].trim_start();
    tail = tail.strip_prefix(';').unwrap_or(tail).trim_start();
    let marker = tail
        .strip_prefix("//")
        .map(|c| c.trim_start())
        .and_then(|c| c.strip_prefix("line ").or_else(|| c.strip_prefix("Line ")))
        .map(|name| name.trim().trim_end_matches('.').to_string())
        .filter(|n| !n.is_empty());
    Some((expr_text, marker))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::print_expr;

    fn map(entries: &[(&str, u32)]) -> BTreeMap<String, u32> {
        entries.iter().map(|(n, l)| (n.to_string(), *l)).collect()
    }

    #[test]
    fn extracts_marker_lines() {
        let m = map(&[("A", 8)]);
        let got = parse_response("assert(i <= n); // line A", &m);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0.line, 8);
        assert_eq!(print_expr(&got[0].0.predicate), "i <= n");
    }

    #[test]
    fn verbose_text_yields_only_wellformed_lines() {
        let m = map(&[("A", 8)]);
        let text = "Let's reason step by step.\nThe loop maintains several facts.\nassert(i <= n); // line A\nTherefore the assertion holds.";
        let got = parse_response(text, &m);
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn unparseable_expressions_are_dropped() {
        let m = map(&[("A", 8)]);
        assert!(parse_response("assert(x ==); // line A", &m).is_empty());
        assert!(parse_response("assert(); // line A", &m).is_empty());
    }

    #[test]
    fn unknown_marker_falls_back_only_for_single_maps() {
        let single = map(&[("A", 7)]);
        let got = parse_response("assert(x + z == n); // Line B", &single);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].0.line, 7);

        let multi = map(&[("A", 7), ("B", 9)]);
        let got = parse_response("assert(x + z == n); // Line Q", &multi);
        assert!(got.is_empty());
    }

    #[test]
    fn bare_assert_accepted_for_single_maps() {
        let single = map(&[("A", 7)]);
        let got = parse_response("assert(x + y == n);", &single);
        assert_eq!(got.len(), 1);
        let multi = map(&[("A", 7), ("B", 9)]);
        assert!(parse_response("assert(x + y == n);", &multi).is_empty());
    }

    #[test]
    fn nested_parens_balance() {
        let m = map(&[("A", 8)]);
        let got = parse_response("assert(s >= i*v && s <= (i*255)); // line A", &m);
        assert_eq!(got.len(), 1);
        assert_eq!(print_expr(&got[0].0.predicate), "s >= i * v && s <= i * 255");
    }
}

//! Prompt construction. The wording, line breaks, and trailing spaces of
//! the instruction block are load-bearing: scripted fixtures and parsers
//! are keyed to this exact format.

use crate::lang::{print_expr, print_program, MarkerMode, PrintOptions, Program, Property};
use super::FailKind;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("program has no placeholder markers")]
    NoMarkers,
}

/// "facts" or "loop invariants" depending on whether every marker line is
/// inside a loop.
fn kind_word(program: &Program, lines: &[u32]) -> &'static str {
    let all_in_loops = lines
        .iter()
        .all(|l| program.line_in_loop(*l).unwrap_or(false));
    if all_in_loops {
        "loop invariants"
    } else {
        "facts"
    }
}

/// Ask for new properties at the program's placeholder lines.
pub fn build_propose_prompt(program: &Program, _goal: &Property) -> Result<String, PromptError> {
    let markers = program.marker_list();
    if markers.is_empty() {
        return Err(PromptError::NoMarkers);
    }
    let names: Vec<&str> = markers.iter().map(|(n, _)| n.as_str()).collect();
    let lines: Vec<u32> = markers.iter().map(|(_, l)| *l).collect();
    let p1 = print_program(program, &PrintOptions::default());
    let p2 = kind_word(program, &lines);
    let p3 = if markers.len() > 1 { "s" } else { "" };
    let p4 = names.join(", ");
    let p5 = if markers.len() > 1 { "name" } else { names[0] };
    Ok(format!(
        "{p1}\nPrint {p2} as valid C assertions at line{p3} {p4} that\nhelp prove the assertion. Use '&&' or '||' if necessary. \nDon't explain. Your answer should be 'assert(...); // line {p5}'"
    ))
}

/// Ask to repair a failed proposal. The program is rendered with a single
/// `// Line A` placeholder at the failed property's line; the goal stays
/// untouched in the program body.
pub fn build_repair_prompt(
    program: &Program,
    _goal: &Property,
    failed: &Property,
    kind: FailKind,
) -> String {
    let opts = PrintOptions {
        marker_mode: MarkerMode::Single { line: failed.line },
        ..PrintOptions::default()
    };
    let p1 = print_program(program, &opts);
    let p2 = if program.line_in_loop(failed.line).unwrap_or(false) {
        "loop invariants"
    } else {
        "facts"
    };
    let p3 = print_expr(&failed.predicate);
    let p4 = match kind {
        FailKind::False => "incorrect",
        FailKind::Unknown => "too weak",
    };
    format!(
        "{p1}\nPrint {p2} as valid C assertions at line A that help \nprove the assertion. Your previous answer '{p3}' \nis {p4}. Use '&&' or '||' if necessary. Don't explain. \nYour answer should simply be 'assert(...);'"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, parse::parse_predicate};

    const F1: &str = "int main() {\nunsigned char n = (unsigned char) rand();\nif (n == 0) {\nreturn 0;\n}\nunsigned char v = 0;\nunsigned int s = 0;\nunsigned int i = 0;\nwhile (i < n) {\n// Line A\nv = (unsigned char) rand();\ns += v;\n++i;\n}\nassert(s >= v);\nreturn 1;\n}";

    #[test]
    fn propose_prompt_matches_reference_bytes() {
        let p = parse(F1, 8).unwrap();
        let goal = Property::new(parse_predicate("s >= v").unwrap(), 15);
        let prompt = build_propose_prompt(&p, &goal).unwrap();
        let expected = format!(
            "{F1}\nPrint loop invariants as valid C assertions at line A that\nhelp prove the assertion. Use '&&' or '||' if necessary. \nDon't explain. Your answer should be 'assert(...); // line A'"
        );
        assert_eq!(prompt, expected);
        assert!(prompt.ends_with("Your answer should be 'assert(...); // line A'"));
    }

    #[test]
    fn two_markers_pluralize() {
        let src = "uint32_t x=0;\nwhile (x < 3){\nx+=1;\n}\nwhile (rand()){\nx+=2;\n}\nassert(x!=9);\n";
        let p = parse(src, 8).unwrap().insert_placeholders();
        let goal = Property::new(parse_predicate("x != 9").unwrap(), 8);
        let prompt = build_propose_prompt(&p, &goal).unwrap();
        assert!(prompt.contains("at lines A, B, C, D that"));
        assert!(prompt.ends_with("'assert(...); // line name'"));
        // Markers before the loops sit outside any loop body.
        assert!(prompt.contains("Print facts as valid C assertions"));
    }

    #[test]
    fn marker_outside_loop_asks_for_facts() {
        let p = parse("uint32_t x=rand();\nassert(x==1);\n", 8)
            .unwrap()
            .insert_placeholders();
        let goal = Property::new(parse_predicate("x == 1").unwrap(), 2);
        let prompt = build_propose_prompt(&p, &goal).unwrap();
        assert!(prompt.contains("Print facts as valid C assertions at line A that"));
    }

    #[test]
    fn no_markers_is_an_error() {
        let p = parse("uint32_t x=rand();\nassert(x==1);\n", 8).unwrap();
        let goal = Property::new(parse_predicate("x == 1").unwrap(), 2);
        assert_eq!(build_propose_prompt(&p, &goal), Err(PromptError::NoMarkers));
    }

    const F2: &str = "int main() {\nunsigned int n = (unsigned int) rand();\nunsigned int x = n, y = 0, z;\nwhile (x > 0) {\nx--;\ny++;\n}\nz = y;\n// Line A\nwhile (z > 0) {\nx++;\nz--;\n}\nassert(y + z == n);\nreturn 1;\n}";

    #[test]
    fn repair_prompt_matches_reference_bytes() {
        let p = parse(F2, 8).unwrap();
        let goal = Property::new(parse_predicate("y + z == n").unwrap(), 14);
        let failed = Property::new(parse_predicate("x + z == n").unwrap(), 9);
        let prompt = build_repair_prompt(&p, &goal, &failed, FailKind::Unknown);
        let expected = format!(
            "{F2}\nPrint facts as valid C assertions at line A that help \nprove the assertion. Your previous answer 'x + z == n' \nis too weak. Use '&&' or '||' if necessary. Don't explain. \nYour answer should simply be 'assert(...);'"
        );
        assert_eq!(prompt, expected);
    }

    #[test]
    fn repair_verdict_wording() {
        let p = parse(F2, 8).unwrap();
        let goal = Property::new(parse_predicate("y + z == n").unwrap(), 14);
        let failed = Property::new(parse_predicate("x + z == n").unwrap(), 9);
        let weak = build_repair_prompt(&p, &goal, &failed, FailKind::Unknown);
        assert!(weak.contains("is too weak."));
        let wrong = build_repair_prompt(&p, &goal, &failed, FailKind::False);
        assert!(wrong.contains("is incorrect."));
        // The goal assertion is part of the program block, unchanged.
        assert!(wrong.contains("assert(y + z == n);"));
    }
}

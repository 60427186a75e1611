//! External verifier adapters: render the instrumented program to the
//! dialect a tool expects, spawn it with a timeout, classify its output.
//! Tool misbehavior (timeout, crash, unmatched output) maps to Unknown so
//! long benchmark runs stay alive and the search stays sound; only a
//! missing executable is an error.

use crate::lang::{
    print_program, MarkerMode, PrintOptions, Program, Property, RandSpelling,
};
use crate::verifier::{
    PropertyVerifier, Verdict, VerdictValue, VerifierDesc, VerifyStats, DEFAULT_VERIFIER_TIMEOUT,
};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};
use thiserror::Error;

/// How the target tool spells the subset's primitives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dialect {
    /// Lines emitted before the program (externs, includes).
    pub prelude: Vec<String>,
    /// Nondet call per width, e.g. `[(8, "__VERIFIER_nondet_uchar"), ...]`.
    pub nondet_by_width: Vec<(u32, String)>,
    pub nondet_default: String,
    pub assume_fn: String,
    pub assert_fn: String,
}

impl Default for Dialect {
    fn default() -> Self {
        Dialect {
            prelude: vec![
                "extern void __VERIFIER_assume(int);".into(),
                "extern unsigned int __VERIFIER_nondet_uint(void);".into(),
                "extern unsigned char __VERIFIER_nondet_uchar(void);".into(),
                "extern void abort(void);".into(),
                "void reach_error(void){}".into(),
                "#define assert(c) if (!(c)) { reach_error(); abort(); }".into(),
            ],
            nondet_by_width: vec![
                (8, "__VERIFIER_nondet_uchar".into()),
                (32, "__VERIFIER_nondet_uint".into()),
            ],
            nondet_default: "__VERIFIER_nondet_uint".into(),
            assume_fn: "__VERIFIER_assume".into(),
            assert_fn: "assert".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdapterConfig {
    /// Executable to run.
    pub command: String,
    /// Arguments; `{file}` expands to the rendered source path.
    pub args: Vec<String>,
    pub timeout: Duration,
    /// Substring of stdout/stderr that signals a proof.
    pub success_pattern: String,
    /// Substring that signals a falsification.
    pub falsification_pattern: String,
    pub dialect: Dialect,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        AdapterConfig {
            command: String::new(),
            args: vec!["{file}".into()],
            timeout: DEFAULT_VERIFIER_TIMEOUT,
            success_pattern: "VERIFICATION SUCCESSFUL".into(),
            falsification_pattern: "VERIFICATION FAILED".into(),
            dialect: Dialect::default(),
        }
    }
}

impl AdapterConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.timeout.is_zero() {
            return Err("adapter timeout must be positive".into());
        }
        if self.success_pattern == self.falsification_pattern {
            return Err("success and falsification patterns must differ".into());
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("cannot start `{command}`: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
}

/// Render `asm(P, A)` with the goal as the sole assert, in the given
/// dialect, ready to compile.
pub fn render_dialect(
    program: &Program,
    assumptions: &[Property],
    goal: &Property,
    dialect: &Dialect,
) -> String {
    let mut instrumented = program.clone();
    for q in assumptions {
        if let Ok(p) = instrumented.instrument_assume(q) {
            instrumented = p;
        }
    }
    if let Ok(p) = instrumented.instrument_assert(goal) {
        instrumented = p;
    }
    let opts = PrintOptions {
        marker_mode: MarkerMode::None,
        show_assume_attachments: true,
        show_assert_attachments: true,
        assume_spelling: dialect.assume_fn.clone(),
        assert_spelling: dialect.assert_fn.clone(),
        rand_spelling: RandSpelling::Nondet {
            by_width: dialect.nondet_by_width.clone(),
            default: dialect.nondet_default.clone(),
        },
    };
    let body = print_program(&instrumented, &opts);
    let mut out = dialect.prelude.join("\n");
    if !out.is_empty() {
        out.push('\n');
    }
    if instrumented.has_main_wrapper {
        out.push_str(&body);
    } else {
        out.push_str("int main() {\n");
        out.push_str(&body);
        out.push_str("\nreturn 0;\n}");
    }
    out.push('\n');
    out
}

/// Spawn the tool on the rendered source and classify its output. The
/// child is polled until the timeout and killed (and reaped) past it.
pub fn run_external(config: &AdapterConfig, source: &str) -> Result<Verdict, AdapterError> {
    let start = Instant::now();
    let mut file = tempfile::Builder::new()
        .prefix("goal-")
        .suffix(".c")
        .tempfile()
        .map_err(|source| AdapterError::Spawn { command: config.command.clone(), source })?;
    file.write_all(source.as_bytes())
        .map_err(|source| AdapterError::Spawn { command: config.command.clone(), source })?;
    let path = file.path().to_string_lossy().to_string();

    let args: Vec<String> =
        config.args.iter().map(|a| a.replace("{file}", &path)).collect();
    let mut child = Command::new(&config.command)
        .args(&args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|source| AdapterError::Spawn { command: config.command.clone(), source })?;

    let deadline = Instant::now() + config.timeout;
    let timed_out = loop {
        match child.try_wait() {
            Ok(Some(_)) => break false,
            Ok(None) => {
                if Instant::now() >= deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    break true;
                }
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(_) => break false,
        }
    };

    let stats = VerifyStats { states: 0, wall_ms: start.elapsed().as_millis() as u64 };
    if timed_out {
        return Ok(Verdict { value: VerdictValue::Unknown, counterexample: None, stats });
    }
    let output = match child.wait_with_output() {
        Ok(o) => o,
        Err(_) => {
            return Ok(Verdict { value: VerdictValue::Unknown, counterexample: None, stats })
        }
    };
    let mut text = String::from_utf8_lossy(&output.stdout).to_string();
    text.push_str(&String::from_utf8_lossy(&output.stderr));
    let value = if text.contains(&config.success_pattern) {
        VerdictValue::True
    } else if text.contains(&config.falsification_pattern) {
        // Falsification without a structured counterexample; the Fail path
        // accepts a bare verdict from configured tools.
        VerdictValue::False
    } else {
        VerdictValue::Unknown
    };
    Ok(Verdict { value, counterexample: None, stats })
}

/// An external tool behind the verifier interface.
pub struct ExternalVerifier {
    pub config: AdapterConfig,
    pub name: String,
}

impl PropertyVerifier for ExternalVerifier {
    fn verify(&self, program: &Program, assumptions: &[Property], goal: &Property) -> Verdict {
        let source = render_dialect(program, assumptions, goal, &self.config.dialect);
        run_external(&self.config, &source).unwrap_or_else(|_| Verdict::unknown())
    }

    fn descriptor(&self) -> VerifierDesc {
        VerifierDesc::External { name: self.name.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::lang::parse::parse_predicate;

    const FIG2: &str = "uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}";

    #[test]
    fn renders_assumption_and_sole_goal() {
        let p = parse(FIG2, 32).unwrap();
        let q = Property::new(parse_predicate("x % 4 == 0").unwrap(), 3);
        let goal = Property::new(parse_predicate("x != 30").unwrap(), 4);
        let text = render_dialect(&p, &[q], &goal, &Dialect::default());
        assert!(text.contains("__VERIFIER_assume(x % 4 == 0);"));
        assert!(text.contains("assert(x != 30);"));
        assert!(text.contains("__VERIFIER_nondet_uint()"));
        // The original assert is gone: exactly one assert line.
        assert_eq!(text.matches("assert(").count() - text.matches("#define assert(").count(), 1);
        assert!(text.contains("int main() {"));
    }

    #[test]
    fn empty_assumptions_render_goal_only() {
        let p = parse(FIG2, 32).unwrap();
        let goal = Property::new(parse_predicate("x != 30").unwrap(), 4);
        let text = render_dialect(&p, &[], &goal, &Dialect::default());
        assert!(!text.contains("__VERIFIER_assume"));
        assert!(text.contains("assert(x != 30);"));
    }

    fn sh_config(script: &str, timeout_ms: u64) -> AdapterConfig {
        AdapterConfig {
            command: "sh".into(),
            args: vec!["-c".into(), script.into()],
            timeout: Duration::from_millis(timeout_ms),
            ..AdapterConfig::default()
        }
    }

    #[test]
    fn classifies_tool_output() {
        let v = run_external(&sh_config("echo VERIFICATION SUCCESSFUL", 5000), "").unwrap();
        assert_eq!(v.value, VerdictValue::True);
        let v = run_external(&sh_config("echo VERIFICATION FAILED", 5000), "").unwrap();
        assert_eq!(v.value, VerdictValue::False);
        let v = run_external(&sh_config("echo puzzled; exit 3", 5000), "").unwrap();
        assert_eq!(v.value, VerdictValue::Unknown);
    }

    #[test]
    fn timeout_is_unknown_and_child_is_reaped() {
        let started = Instant::now();
        let v = run_external(&sh_config("sleep 30; echo VERIFICATION SUCCESSFUL", 200), "").unwrap();
        assert_eq!(v.value, VerdictValue::Unknown);
        assert!(started.elapsed() < Duration::from_secs(5));
    }

    #[test]
    fn missing_executable_is_an_error() {
        let mut cfg = AdapterConfig::default();
        cfg.command = "/nonexistent/verifier-binary".into();
        assert!(matches!(run_external(&cfg, ""), Err(AdapterError::Spawn { .. })));
    }
}

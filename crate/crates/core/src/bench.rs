//! Instance and suite runners with CSV reports: one row per instance with
//! Solved/Time/#proposals columns plus a log2 bucket of the proposal
//! count for histogramming.

use crate::adapter::{AdapterConfig, ExternalVerifier};
use crate::calculus::check_trace;
use crate::driver::{lemur, select_goal, write_trace_file, DriverParams, Outcome, RunOutput};
use crate::lang::{parse, Program, DEFAULT_BUILTIN_WIDTH};
use crate::oracle::{LiveOracle, Oracle, OracleConfig, ReplayOracle, Script, ScriptedOracle};
use crate::verifier::{Budget, BuiltinMode, BuiltinVerifier, PropertyVerifier};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub enum VerifierChoice {
    Builtin { budget: Budget, mode: BuiltinMode },
    External { name: String, config: AdapterConfig },
}

impl Default for VerifierChoice {
    fn default() -> Self {
        VerifierChoice::Builtin { budget: Budget::default(), mode: BuiltinMode::Exhaustive }
    }
}

#[derive(Debug, Clone)]
pub enum OracleChoice {
    Scripted(Script),
    ScriptFile(PathBuf),
    Replay(PathBuf),
    Live(OracleConfig),
}

impl Default for OracleChoice {
    fn default() -> Self {
        OracleChoice::Scripted(Script::default())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub width: u32,
    pub params: DriverParams,
    pub verifier: VerifierChoice,
    pub oracle: OracleChoice,
    pub property_line: Option<u32>,
    /// Re-validate the trace after success/failure outcomes.
    pub certify: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            width: DEFAULT_BUILTIN_WIDTH,
            params: DriverParams::default(),
            verifier: VerifierChoice::default(),
            oracle: OracleChoice::default(),
            property_line: None,
            certify: true,
        }
    }
}

fn build_verifier(choice: &VerifierChoice) -> Box<dyn PropertyVerifier> {
    match choice {
        VerifierChoice::Builtin { budget, mode } => {
            Box::new(BuiltinVerifier { budget: budget.clone(), mode: *mode })
        }
        VerifierChoice::External { name, config } => {
            Box::new(ExternalVerifier { name: name.clone(), config: config.clone() })
        }
    }
}

fn build_oracle(choice: &OracleChoice) -> Result<Box<dyn Oracle>, String> {
    match choice {
        OracleChoice::Scripted(script) => Ok(Box::new(ScriptedOracle::new(script.clone()))),
        OracleChoice::ScriptFile(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
            let script = Script::from_json(&text).map_err(|e| e.to_string())?;
            Ok(Box::new(ScriptedOracle::new(script)))
        }
        OracleChoice::Replay(path) => {
            Ok(Box::new(ReplayOracle::from_file(path).map_err(|e| e.to_string())?))
        }
        OracleChoice::Live(cfg) => Ok(Box::new(LiveOracle::new(cfg.clone()))),
    }
}

/// Prepared program: parsed, with placeholder markers present.
pub fn prepare_program(source: &str, width: u32) -> Result<Program, String> {
    let program = parse(source, width).map_err(|e| e.to_string())?;
    if program.markers.is_empty() {
        Ok(program.insert_placeholders())
    } else {
        Ok(program)
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct InstanceReport {
    pub instance: String,
    /// success / fail / unknown / timeout / skipped
    pub outcome: String,
    pub solved: bool,
    pub time_s: f64,
    pub proposals: u32,
    pub verifier_calls: u32,
    pub log2_bucket: u32,
    pub trace_file: String,
    pub note: String,
}

/// `ceil(log2(max(n, 1)))` proposal bucket.
pub fn log2_bucket(n: u32) -> u32 {
    let n = n.max(1);
    32 - (n - 1).leading_zeros().min(32)
}

pub fn outcome_label(outcome: Outcome) -> &'static str {
    match outcome {
        Outcome::Success => "success",
        Outcome::Failure => "fail",
        Outcome::Unknown => "unknown",
        Outcome::Timeout => "timeout",
    }
}

/// Run one instance end to end and persist its trace next to `out_dir`.
pub fn run_instance(path: &Path, config: &RunConfig, out_dir: &Path) -> InstanceReport {
    let stem = path.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
    let skipped = |note: String| InstanceReport {
        instance: stem.clone(),
        outcome: "skipped".into(),
        solved: false,
        time_s: 0.0,
        proposals: 0,
        verifier_calls: 0,
        log2_bucket: 0,
        trace_file: String::new(),
        note,
    };
    let source = match std::fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) => return skipped(format!("read error: {e}")),
    };
    let program = match prepare_program(&source, config.width) {
        Ok(p) => p,
        Err(e) => return skipped(format!("parse error: {e}")),
    };
    let goal = match select_goal(&program, config.property_line) {
        Ok(g) => g,
        Err(e) => return skipped(e),
    };
    let verifier = build_verifier(&config.verifier);
    let mut oracle = match build_oracle(&config.oracle) {
        Ok(o) => o,
        Err(e) => return skipped(format!("oracle error: {e}")),
    };

    let run = lemur(&program, &goal, &config.params, verifier.as_ref(), oracle.as_mut());
    let mut note = run.error.clone().unwrap_or_default();
    if config.certify && matches!(run.outcome, Outcome::Success | Outcome::Failure) {
        if let Err(e) = check_trace(&program, &run.trace) {
            note = format!("CERTIFICATE FAILURE: {e}");
        }
    }

    let trace_file = out_dir.join(format!("{stem}.trace.jsonl"));
    let _ = std::fs::create_dir_all(out_dir);
    let trace_name = match write_trace_file(&trace_file, &program, &run) {
        Ok(()) => trace_file.to_string_lossy().to_string(),
        Err(e) => {
            if note.is_empty() {
                note = format!("trace write error: {e}");
            }
            String::new()
        }
    };

    report_from_run(&stem, &run, trace_name, note)
}

fn report_from_run(stem: &str, run: &RunOutput, trace_file: String, note: String) -> InstanceReport {
    InstanceReport {
        instance: stem.to_string(),
        outcome: outcome_label(run.outcome).to_string(),
        solved: run.outcome == Outcome::Success,
        time_s: run.stats.wall_ms as f64 / 1000.0,
        proposals: run.stats.proposals_attempted,
        verifier_calls: run.stats.verifier_calls,
        log2_bucket: log2_bucket(run.stats.proposals_attempted),
        trace_file,
        note,
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn write_csv(reports: &[InstanceReport], path: &Path) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "instance,outcome,solved,time_s,proposals,verifier_calls,log2_bucket,trace,note")?;
    for r in reports {
        writeln!(
            f,
            "{},{},{},{:.3},{},{},{},{},{}",
            csv_field(&r.instance),
            r.outcome,
            if r.solved { 1 } else { 0 },
            r.time_s,
            r.proposals,
            r.verifier_calls,
            r.log2_bucket,
            csv_field(&r.trace_file),
            csv_field(&r.note),
        )?;
    }
    Ok(())
}

/// Label runs A, B, C, ... like repeated-run tables.
pub fn run_label(index: usize) -> String {
    crate::lang::marker_name(index)
}

/// Run every `.c` file in `dir` once per run label; one CSV per run.
/// Per-instance parse errors become `skipped` rows and the suite continues.
pub fn run_suite(
    dir: &Path,
    config: &RunConfig,
    runs: usize,
    out_csv: &Path,
) -> std::io::Result<Vec<(String, Vec<InstanceReport>)>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "c"))
        .collect();
    files.sort();

    let out_dir = out_csv.parent().unwrap_or(Path::new(".")).join(format!(
        "{}-traces",
        out_csv.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default()
    ));

    let mut all = Vec::new();
    for run_idx in 0..runs.max(1) {
        let label = run_label(run_idx);
        let mut reports = Vec::new();
        for file in &files {
            reports.push(run_instance(file, config, &out_dir.join(&label)));
        }
        let csv_path = if runs > 1 {
            let stem = out_csv.file_stem().map(|s| s.to_string_lossy().to_string()).unwrap_or_default();
            let ext = out_csv.extension().map(|s| s.to_string_lossy().to_string()).unwrap_or("csv".into());
            out_csv.with_file_name(format!("{stem}_{label}.{ext}"))
        } else {
            out_csv.to_path_buf()
        };
        write_csv(&reports, &csv_path)?;
        all.push((label, reports));
    }
    Ok(all)
}

// Re-export used only to keep the public surface tidy for callers.
#[doc(hidden)]
pub use crate::driver::RunStats;

#[allow(unused_imports)]
use crate::lang::Property as _PropUnused;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log2_buckets_match_hand_counts() {
        assert_eq!(log2_bucket(0), 0);
        assert_eq!(log2_bucket(1), 0);
        assert_eq!(log2_bucket(2), 1);
        assert_eq!(log2_bucket(3), 2);
        assert_eq!(log2_bucket(4), 2);
        assert_eq!(log2_bucket(5), 3);
        assert_eq!(log2_bucket(90), 7);
    }

    #[test]
    fn run_labels() {
        assert_eq!(run_label(0), "A");
        assert_eq!(run_label(2), "C");
    }
}

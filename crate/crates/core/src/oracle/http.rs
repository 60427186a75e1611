//! Live chat-completion backend and the request/response replay log.
//!
//! Each sample is one POST carrying the prompt as a single user message;
//! the configured penalty values are forwarded verbatim as the request's
//! `frequency_penalty`. Every request/response pair is appended to a
//! JSON-lines replay log, which the replay backend can consume to rerun a
//! session without network access.

use super::{build_propose_prompt, build_repair_prompt, call_fingerprint, FailKind, Oracle, OracleError};
use crate::lang::{print_expr, Program, Property};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub kind: String,
    pub fingerprint: String,
    pub penalty: f64,
    pub sample: u32,
    pub prompt: String,
    pub response: String,
}

/// Append-only JSON-lines log; appends are serialized by a mutex.
pub struct ReplayLog {
    path: PathBuf,
    lock: Mutex<()>,
}

impl ReplayLog {
    pub fn new(path: impl Into<PathBuf>) -> ReplayLog {
        ReplayLog { path: path.into(), lock: Mutex::new(()) }
    }

    pub fn append(&self, record: &ReplayRecord) -> std::io::Result<()> {
        let _guard = self.lock.lock().unwrap();
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        writeln!(f, "{}", serde_json::to_string(record).expect("record serializes"))
    }

    pub fn load(path: &Path) -> std::io::Result<Vec<ReplayRecord>> {
        let f = std::fs::File::open(path)?;
        let mut out = Vec::new();
        for line in std::io::BufReader::new(f).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(r) = serde_json::from_str::<ReplayRecord>(&line) {
                out.push(r);
            }
        }
        Ok(out)
    }
}

fn repair_kind(failed: &Property, kind: FailKind) -> String {
    let verdict = match kind {
        FailKind::False => "false",
        FailKind::Unknown => "unknown",
    };
    format!("repair:{}@{}:{}", print_expr(&failed.predicate), failed.line, verdict)
}

pub struct LiveOracle {
    config: super::OracleConfig,
    client: reqwest::blocking::Client,
    log: Option<ReplayLog>,
}

impl LiveOracle {
    pub fn new(config: super::OracleConfig) -> LiveOracle {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(120))
            .build()
            .expect("client builds");
        LiveOracle { config, client, log: None }
    }

    pub fn with_log(mut self, path: impl Into<PathBuf>) -> LiveOracle {
        self.log = Some(ReplayLog::new(path));
        self
    }

    fn complete(&self, prompt: &str, penalty: f64) -> Result<String, OracleError> {
        let key = std::env::var(&self.config.api_key_env)
            .map_err(|_| OracleError::Unavailable(format!("{} not set", self.config.api_key_env)))?;
        let body = json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "max_tokens": self.config.max_tokens,
            "frequency_penalty": penalty,
        });
        let resp = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(key)
            .json(&body)
            .send()
            .map_err(|e| OracleError::Unavailable(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(OracleError::Unavailable(format!("HTTP {}", resp.status())));
        }
        let value: serde_json::Value =
            resp.json().map_err(|e| OracleError::Unavailable(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(|s| s.to_string())
            .ok_or_else(|| OracleError::Unavailable("malformed completion response".into()))
    }

    fn run(&mut self, kind: &str, fingerprint: &str, prompt: &str) -> Result<Vec<String>, OracleError> {
        let mut samples = Vec::new();
        for penalty in self.config.penalties.clone() {
            for s in 0..self.config.samples {
                let response = self.complete(prompt, penalty)?;
                if let Some(log) = &self.log {
                    let _ = log.append(&ReplayRecord {
                        kind: kind.to_string(),
                        fingerprint: fingerprint.to_string(),
                        penalty,
                        sample: s,
                        prompt: prompt.to_string(),
                        response: response.clone(),
                    });
                }
                samples.push(response);
            }
        }
        Ok(samples)
    }
}

impl Oracle for LiveOracle {
    fn sample_propose(&mut self, program: &Program, goal: &Property) -> Result<Vec<String>, OracleError> {
        let prompt = build_propose_prompt(program, goal)?;
        let fp = call_fingerprint(program, goal, "propose");
        self.run("propose", &fp, &prompt)
    }

    fn sample_repair(
        &mut self,
        program: &Program,
        goal: &Property,
        failed: &Property,
        kind: FailKind,
    ) -> Result<Vec<String>, OracleError> {
        let prompt = build_repair_prompt(program, goal, failed, kind);
        let k = repair_kind(failed, kind);
        let fp = call_fingerprint(program, goal, &k);
        self.run(&k, &fp, &prompt)
    }

    fn id(&self) -> String {
        format!("live:{}", self.config.model)
    }
}

/// Replays a recorded session; calls are matched by fingerprint and
/// consumed in log order.
pub struct ReplayOracle {
    records: Vec<ReplayRecord>,
    used: Vec<bool>,
}

impl ReplayOracle {
    pub fn from_file(path: &Path) -> std::io::Result<ReplayOracle> {
        let records = ReplayLog::load(path)?;
        let used = vec![false; records.len()];
        Ok(ReplayOracle { records, used })
    }

    fn take(&mut self, fingerprint: &str) -> Vec<String> {
        let mut out = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if !self.used[i] && r.fingerprint == fingerprint {
                self.used[i] = true;
                out.push(r.response.clone());
            }
        }
        out
    }
}

impl Oracle for ReplayOracle {
    fn sample_propose(&mut self, program: &Program, goal: &Property) -> Result<Vec<String>, OracleError> {
        let fp = call_fingerprint(program, goal, "propose");
        Ok(self.take(&fp))
    }

    fn sample_repair(
        &mut self,
        program: &Program,
        goal: &Property,
        failed: &Property,
        kind: FailKind,
    ) -> Result<Vec<String>, OracleError> {
        let k = repair_kind(failed, kind);
        let fp = call_fingerprint(program, goal, &k);
        Ok(self.take(&fp))
    }

    fn id(&self) -> String {
        "replay".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;
    use crate::lang::parse::parse_predicate;

    #[test]
    fn replay_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        let program = parse("uint32_t x=0;\nwhile (rand()){\nx+=4;\nassert(x!=30);\n}", 8)
            .unwrap()
            .insert_placeholders();
        let goal = Property::new(parse_predicate("x != 30").unwrap(), 4);
        let fp = call_fingerprint(&program, &goal, "propose");
        let log = ReplayLog::new(&path);
        log.append(&ReplayRecord {
            kind: "propose".into(),
            fingerprint: fp,
            penalty: 1.5,
            sample: 0,
            prompt: "p".into(),
            response: "assert(x % 2 == 0); // line A".into(),
        })
        .unwrap();

        let mut replay = ReplayOracle::from_file(&path).unwrap();
        let proposals = super::super::run_propose(&mut replay, &program, &goal).unwrap();
        assert_eq!(proposals.len(), 1);
        assert_eq!(proposals[0].property.line, 3);
        // Consumed; a second identical call sees nothing.
        let again = super::super::run_propose(&mut replay, &program, &goal).unwrap();
        assert!(again.is_empty());
    }
}

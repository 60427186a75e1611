//! Oracle-guided program verification.
//!
//! A proof goal `<phi, l>` on a small imperative program is established by
//! chaining sub-goals: an oracle (a live LLM endpoint or a deterministic
//! script) proposes candidate properties, a verifier checks implications
//! between them, and a deductive engine validates every step so each run
//! carries a certificate of rule validity.
//!
//! Crate layout:
//! * [`lang`] - the C-like input language, parser, printer, instrumentation
//! * [`exec`] - execution semantics and the deterministic evaluator
//! * [`verifier`] - the built-in explicit-state / k-induction checker
//! * [`brute`] - brute-force execution enumeration (cross-check oracle)
//! * [`adapter`] - external verifier processes behind the same interface
//! * [`oracle`] - prompt construction, response parsing, proposal ranking
//! * [`calculus`] - configurations, deductive rules, traces, certificates
//! * [`driver`] - the recursive proof-search procedure and reports
//! * [`bench`] - suite runner with CSV reports

pub mod adapter;
pub mod bench;
pub mod brute;
pub mod calculus;
pub mod driver;
pub mod exec;
pub mod lang;
pub mod oracle;
pub mod verifier;

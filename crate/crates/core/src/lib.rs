//! Agentic fuzz-driver generation and crash triage.
//!
//! A function analyzer derives calling constraints for a target function,
//! the writer agents fold them into fuzz drivers, and a crash validator
//! checks whether each program-error crash is reachable from the project's
//! entry points. Everything runs offline against scripted or replayed model
//! transcripts and a simulated executor, or live against an HTTP endpoint
//! and a project's own build.

pub mod agent;
pub mod analyzers;
pub mod catalog;
pub mod executor;
pub mod fsutil;
pub mod markup;
pub mod metrics;
pub mod pipeline;
pub mod replay;
pub mod toolbox;

pub use agent::{
    run_agent, AgentError, AgentSession, AgentSpec, LiveBackend, LlmBackend, Outcome, ReplayBackend,
    ScriptedBackend, SessionContext, TokenUsage,
};
pub use analyzers::{
    analyze_function, validate_crash, BenchmarkFunction, Classification, ConstraintCategory, ConstraintReport,
    CrashReport, FeasibilityVerdict, FunctionConstraint, StackFrame,
};
pub use catalog::{AgentRole, PromptVariant};
pub use executor::{ExecutionResult, Executor, FuzzDriver, SimulatedProject};
pub use pipeline::{PipelineConfig, SharedRepository, Termination, TrialState};
pub use replay::{capture_session, extract_context, replay_agent, SessionBundle};
pub use toolbox::{Language, ProjectCheckout, SymbolIndex, Toolbox};

//! Differential soundness testing: does the optimized program observably
//! behave like the unoptimized one?
//!
//! The gate run interprets the unoptimized lowering in checked mode; a
//! program with UB carries no soundness obligation and is skipped. For the
//! optimized side, the primary unit is optimized *alone* (per-unit
//! optimization is where invariant-group reasoning is risky), then linked
//! with any support units, lowered for codegen, and executed.

use super::machine::{eval_module, ExecTrace, Mode};
use crate::diag::SourceError;
use crate::frontend::{lower_to_ir, parse_source, LoweringOptions};
use crate::ir::Module;
use crate::link::{link_modules, LinkError};
use crate::passes::{lower_for_codegen, run_pipeline, PipelineConfig};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DiffVerdict {
    Equal,
    /// The unoptimized checked run reported UB; no obligation.
    SkippedUb { reference: ExecTrace },
    Mismatch {
        reference: ExecTrace,
        optimized: ExecTrace,
    },
}

#[derive(Debug, Error)]
pub enum DiffError {
    #[error("parse error: {0}")]
    Source(#[from] SourceError),
    #[error("link error: {0}")]
    Link(#[from] LinkError),
    #[error("execution error: {0}")]
    Eval(#[from] super::machine::EvalError),
    #[error("pipeline error: {0}")]
    Pipeline(String),
}

pub fn diff_run(source: &str, cfg: &PipelineConfig) -> Result<DiffVerdict, DiffError> {
    diff_run_with_support(source, &[], cfg)
}

/// `support` holds additional translation units (e.g. the unit defining an
/// out-of-module constructor) linked in before execution but never
/// optimized.
pub fn diff_run_with_support(
    source: &str,
    support: &[&str],
    cfg: &PipelineConfig,
) -> Result<DiffVerdict, DiffError> {
    let opts = LoweringOptions::default();
    let prog = parse_source(source)?;
    let primary = lower_to_ir(&prog, &opts)?;
    let mut support_mods: Vec<Module> = Vec::new();
    for (i, s) in support.iter().enumerate() {
        let sp = parse_source(s)?;
        let mut sm = lower_to_ir(&sp, &opts)?;
        sm.name = format!("support{i}");
        support_mods.push(sm);
    }

    let linked_ref = {
        let mut units = vec![primary.clone()];
        units.extend(support_mods.iter().cloned());
        link_modules(&units)?
    };
    let reference = eval_module(&linked_ref, "main", Mode::Checked)?;
    if !reference.ub_reports.is_empty() {
        return Ok(DiffVerdict::SkippedUb { reference });
    }

    let mut optimized_primary = primary;
    run_pipeline(&mut optimized_primary, cfg).map_err(DiffError::Pipeline)?;
    let mut linked_opt = {
        let mut units = vec![optimized_primary];
        units.extend(support_mods);
        link_modules(&units)?
    };
    lower_for_codegen(&mut linked_opt);
    let optimized = eval_module(&linked_opt, "main", Mode::Raw)?;

    if reference.observable() == optimized.observable() {
        Ok(DiffVerdict::Equal)
    } else {
        Ok(DiffVerdict::Mismatch {
            reference,
            optimized,
        })
    }
}

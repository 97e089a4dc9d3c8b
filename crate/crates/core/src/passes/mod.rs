//! Optimization passes over the invariant-group IR and the pass pipeline.

mod assumes;
mod cmp_fold;
mod devirt;
mod dse;
mod forward;
mod hoist;
mod inline;
mod lower_codegen;
mod simplify;

pub use assumes::fold_assumes;
pub use cmp_fold::fold_pointer_comparisons;
pub use devirt::devirtualize;
pub use dse::dead_store_elimination;
pub use forward::forward_invariant_loads;
pub use hoist::hoist_invariant_loads;
pub use inline::inline_calls;
pub use lower_codegen::lower_for_codegen;
pub use simplify::{normalize_function, simplify_intrinsics};

use crate::ir::{Function, Module};
use std::collections::HashSet;
use std::fmt;

/// Counters reported by a pass run or a whole pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PassReport {
    pub devirtualized_calls: usize,
    pub forwarded_invariant_loads: usize,
    pub folded_comparisons: usize,
    pub hoisted_loads: usize,
    pub eliminated_stores: usize,
    pub removed_intrinsics: usize,
}

impl PassReport {
    pub fn merge(&mut self, other: &PassReport) {
        self.devirtualized_calls += other.devirtualized_calls;
        self.forwarded_invariant_loads += other.forwarded_invariant_loads;
        self.folded_comparisons += other.folded_comparisons;
        self.hoisted_loads += other.hoisted_loads;
        self.eliminated_stores += other.eliminated_stores;
        self.removed_intrinsics += other.removed_intrinsics;
    }
}

impl fmt::Display for PassReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "devirtualized_calls={}", self.devirtualized_calls)?;
        writeln!(f, "forwarded_invariant_loads={}", self.forwarded_invariant_loads)?;
        writeln!(f, "folded_comparisons={}", self.folded_comparisons)?;
        writeln!(f, "hoisted_loads={}", self.hoisted_loads)?;
        writeln!(f, "eliminated_stores={}", self.eliminated_stores)?;
        write!(f, "removed_intrinsics={}", self.removed_intrinsics)
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Pass names, run in order to a fixpoint; `lower-for-codegen` may only
    /// appear last and runs once after the fixpoint loop.
    pub passes: Vec<String>,
    pub inline_threshold: usize,
    pub fixpoint_iterations: usize,
}

pub const DEFAULT_PASSES: &[&str] = &[
    "inline",
    "simplify-intrinsics",
    "forward-invariant-loads",
    "fold-assumes",
    "fold-pointer-comparisons",
    "devirtualize",
    "hoist-invariant-loads",
    "dse",
];

impl Default for PipelineConfig {
    fn default() -> PipelineConfig {
        PipelineConfig {
            passes: DEFAULT_PASSES.iter().map(|s| s.to_string()).collect(),
            inline_threshold: 100,
            fixpoint_iterations: 4,
        }
    }
}

fn run_one(m: &mut Module, name: &str, cfg: &PipelineConfig) -> Result<PassReport, String> {
    Ok(match name {
        "inline" => inline_calls(m, cfg.inline_threshold),
        "simplify-intrinsics" => simplify_intrinsics(m),
        "forward-invariant-loads" => forward_invariant_loads(m),
        "fold-assumes" => fold_assumes(m),
        "fold-pointer-comparisons" => fold_pointer_comparisons(m),
        "devirtualize" => devirtualize(m),
        "hoist-invariant-loads" => hoist_invariant_loads(m),
        "dse" => dead_store_elimination(m),
        "lower-for-codegen" => lower_for_codegen(m),
        _ => return Err(format!("unknown pass '{name}'")),
    })
}

/// Run the configured passes to a fixpoint (bounded by
/// `fixpoint_iterations`), then the final lowering if requested.
pub fn run_pipeline(m: &mut Module, cfg: &PipelineConfig) -> Result<PassReport, String> {
    let mut passes = cfg.passes.clone();
    if let Some(pos) = passes.iter().position(|p| p == "lower-for-codegen") {
        if pos != passes.len() - 1 {
            return Err("lower-for-codegen must be the last pass".to_string());
        }
    }
    let lower = passes.last().map(|p| p == "lower-for-codegen").unwrap_or(false);
    if lower {
        passes.pop();
    }
    let mut report = PassReport::default();
    for _ in 0..cfg.fixpoint_iterations {
        let before = m.clone();
        for name in &passes {
            report.merge(&run_one(m, name, cfg)?);
        }
        if *m == before {
            break;
        }
    }
    if lower {
        report.merge(&run_one(m, "lower-for-codegen", cfg)?);
    }
    Ok(report)
}

/// Rewrite every use of SSA value `from` to `to`.
pub(crate) fn replace_uses(f: &mut Function, from: &str, to: &str) {
    for b in &mut f.blocks {
        for inst in &mut b.insts {
            for op in &mut inst.operands {
                if op.as_value() == Some(from) {
                    *op = crate::ir::Operand::Value(to.to_string());
                }
            }
        }
    }
}

/// Delete side-effect-free instructions whose results are unused. Returns
/// the number of removed intrinsic instructions.
pub(crate) fn dce(f: &mut Function) -> usize {
    let mut removed_intrinsics = 0;
    loop {
        let mut used: HashSet<String> = HashSet::new();
        for b in &f.blocks {
            for inst in &b.insts {
                for v in inst.value_operands() {
                    used.insert(v.to_string());
                }
            }
        }
        let mut changed = false;
        for b in &mut f.blocks {
            b.insts.retain(|inst| {
                let dead = inst.opcode.is_side_effect_free()
                    && inst
                        .result
                        .as_ref()
                        .is_some_and(|r| !used.contains(r));
                if dead {
                    changed = true;
                    if inst.opcode.is_intrinsic() {
                        removed_intrinsics += 1;
                    }
                }
                !dead
            });
        }
        if !changed {
            return removed_intrinsics;
        }
    }
}

//! MiniOO frontend: a small object-oriented language with single
//! inheritance, virtual methods, placement new, and unions, lowered to the
//! invariant-group IR.

pub mod ast;
pub mod classes;
mod lower;
mod parse;

pub use classes::{ClassInfo, ClassTable};
pub use lower::lower_to_ir;

use crate::diag::SourceError;
use ast::SourceProgram;

/// Frontend knobs mirroring `-fstrict-vtable-pointers` and
/// `-fforce-emit-vtable`.
#[derive(Debug, Clone)]
pub struct LoweringOptions {
    /// Emit invariant-group metadata and the launder/strip/assume intrinsics.
    pub strict_vtable_pointers: bool,
    /// Emit optimization-only vtables even when some slot bodies are
    /// unavailable in this input.
    pub force_emit_vtables: bool,
}

impl Default for LoweringOptions {
    fn default() -> LoweringOptions {
        LoweringOptions {
            strict_vtable_pointers: true,
            force_emit_vtables: false,
        }
    }
}

/// Parse MiniOO source and run semantic checks (class hierarchy, name
/// resolution, override rules). The returned program lowers cleanly with
/// `lower_to_ir`.
pub fn parse_source(src: &str) -> Result<SourceProgram, SourceError> {
    let prog = parse::parse_source(src)?;
    // Resolve everything once so parse_source reports semantic errors too;
    // lowering is cheap at MiniOO program sizes.
    lower_to_ir(&prog, &LoweringOptions::default())?;
    Ok(prog)
}

/// The vtables this unit would emit, with their linkage (definition when the
/// key function is defined here, optimization-only when every slot body is
/// available or forced, declaration otherwise).
pub fn emit_vtables(
    prog: &SourceProgram,
    opts: &LoweringOptions,
) -> Result<Vec<crate::ir::VTable>, SourceError> {
    let table = ClassTable::build(prog)?;
    Ok(classes::emit_vtables_for(prog, &table, opts.force_emit_vtables))
}

//! Devirtualization.
//!
//! Slot loads whose address resolves to a fixed offset in a vtable with
//! visible contents fold to a direct function reference, and indirect calls
//! through a known function reference become direct calls.

use super::{dce, PassReport};
use crate::analysis::resolve_vtable_slot;
use crate::ir::{Instruction, Module, Opcode, Operand};

pub fn devirtualize(m: &mut Module) -> PassReport {
    let mut report = PassReport::default();
    for fi in 0..m.functions.len() {
        // Fold resolvable slot loads to global references.
        loop {
            let f = &m.functions[fi];
            let mut found = None;
            'scan: for (bi, b) in f.blocks.iter().enumerate() {
                for (ii, inst) in b.insts.iter().enumerate() {
                    if let Some(sym) = resolve_vtable_slot(f, m, inst) {
                        found = Some((bi, ii, sym));
                        break 'scan;
                    }
                }
            }
            let Some((bi, ii, sym)) = found else { break };
            let f = &mut m.functions[fi];
            let result = f.blocks[bi].insts[ii].result.clone();
            f.blocks[bi].insts[ii] =
                Instruction::new(result, Opcode::GlobalRef, vec![Operand::Global(sym)]);
            report.forwarded_invariant_loads += 1;
        }

        // icall through a known function reference -> direct call.
        let f = &m.functions[fi];
        let mut rewrites = Vec::new();
        for (bi, b) in f.blocks.iter().enumerate() {
            for (ii, inst) in b.insts.iter().enumerate() {
                if inst.opcode != Opcode::CallIndirect {
                    continue;
                }
                let Some(callee) = inst.operands[0].as_value() else { continue };
                let Some(def) = f.def_of(callee) else { continue };
                if def.opcode != Opcode::GlobalRef {
                    continue;
                }
                let Some(sym) = def.operands[0].as_global() else { continue };
                // Only when the symbol is a function, not a vtable.
                if m.function(sym).is_none() && m.declaration(sym).is_none() {
                    continue;
                }
                rewrites.push((bi, ii, sym.to_string()));
            }
        }
        let f = &mut m.functions[fi];
        for (bi, ii, sym) in rewrites {
            let inst = &mut f.blocks[bi].insts[ii];
            inst.opcode = Opcode::CallDirect;
            inst.operands[0] = Operand::Global(sym);
            report.devirtualized_calls += 1;
        }
        report.removed_intrinsics += dce(f);
    }
    report
}

//! Pre-codegen lowering: erase everything that exists only for the
//! optimizer. Launder and strip become identity (uses are rewritten to the
//! operand), assumes disappear, metadata flags are cleared, and
//! optimization-only vtables are demoted to slotless declarations.
//!
//! Running it twice is a no-op.

use super::{dce, replace_uses, PassReport};
use crate::ir::{Linkage, Module, Opcode};

pub fn lower_for_codegen(m: &mut Module) -> PassReport {
    let mut report = PassReport::default();
    for vt in &mut m.vtables {
        if vt.linkage == Linkage::OptimizationOnly {
            vt.linkage = Linkage::Declaration;
            vt.slots.clear();
        }
    }
    for f in &mut m.functions {
        loop {
            let mut found = None;
            'scan: for (bi, b) in f.blocks.iter().enumerate() {
                for (ii, inst) in b.insts.iter().enumerate() {
                    match inst.opcode {
                        Opcode::IntrinsicLaunder | Opcode::IntrinsicStrip => {
                            let to = inst.operands[0].as_value().map(|s| s.to_string());
                            found = Some((bi, ii, to));
                            break 'scan;
                        }
                        Opcode::IntrinsicAssume => {
                            found = Some((bi, ii, None));
                            break 'scan;
                        }
                        _ => {}
                    }
                }
            }
            let Some((bi, ii, to)) = found else { break };
            let result = f.blocks[bi].insts[ii].result.clone();
            f.blocks[bi].insts.remove(ii);
            if let (Some(r), Some(t)) = (result, to) {
                replace_uses(f, &r, &t);
            }
            report.removed_intrinsics += 1;
        }
        for b in &mut f.blocks {
            for inst in &mut b.insts {
                inst.invariant_group = false;
                inst.invariant_load = false;
            }
        }
        dce(f);
    }
    report
}

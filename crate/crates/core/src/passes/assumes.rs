//! Assumption exploitation and cleanup.
//!
//! The frontend emits `load !invariant.group; global; icmp eq; assume` after
//! constructor calls whose bodies are out of module. The assume pins the
//! loaded vptr to a known vtable: at every point dominated by the assume,
//! uses of the loaded value can be rewritten to the vtable reference, which
//! is what lets slot loads resolve and calls devirtualize. Exploited (or
//! trivially true) assumes are then removed together with their dead
//! condition chains.

use super::{dce, PassReport};
use crate::cfg::Cfg;
use crate::ir::{Function, Module, Opcode, Operand};

pub fn fold_assumes(m: &mut Module) -> PassReport {
    let mut report = PassReport::default();
    for f in &mut m.functions {
        report.removed_intrinsics += fold_in_function(f);
        report.removed_intrinsics += dce(f);
    }
    report
}

fn fold_in_function(f: &mut Function) -> usize {
    let mut removed = 0;
    loop {
        let Some((bi, ii)) = next_assume(f) else { break };
        let cond = f.blocks[bi].insts[ii].operands[0].clone();
        let mut substituted = false;
        if let Some(c) = cond.as_value() {
            match f.def_of(c).cloned() {
                Some(def) if def.opcode == Opcode::ConstInt && def.operands[0].as_imm() == Some(1) => {
                    substituted = true; // trivially true, just drop it
                }
                Some(def) if def.opcode == Opcode::ICmpEq => {
                    let a = def.operands[0].as_value().map(|s| s.to_string());
                    let b = def.operands[1].as_value().map(|s| s.to_string());
                    if let (Some(a), Some(b)) = (a, b) {
                        // Substitute toward the side defined by a global
                        // reference, so addresses become resolvable.
                        let (from, to) = if matches!(f.def_of(&b).map(|i| i.opcode), Some(Opcode::GlobalRef)) {
                            (a, b)
                        } else if matches!(f.def_of(&a).map(|i| i.opcode), Some(Opcode::GlobalRef)) {
                            (b, a)
                        } else {
                            (String::new(), String::new())
                        };
                        if !from.is_empty() {
                            substitute_dominated(f, &from, &to, (bi, ii), c);
                            substituted = true;
                        }
                    }
                }
                _ => {}
            }
        }
        if !substituted {
            // Nothing to exploit; leave it for the final lowering.
            break;
        }
        f.blocks[bi].insts.remove(ii);
        removed += 1;
        dce(f);
    }
    removed
}

/// First assume whose condition is exploitable right now. Scanning restarts
/// after each rewrite because instruction positions shift.
fn next_assume(f: &Function) -> Option<(usize, usize)> {
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, inst) in b.insts.iter().enumerate() {
            if inst.opcode != Opcode::IntrinsicAssume {
                continue;
            }
            let Some(c) = inst.operands[0].as_value() else { continue };
            match f.def_of(c) {
                Some(def) if def.opcode == Opcode::ConstInt && def.operands[0].as_imm() == Some(1) => {
                    return Some((bi, ii));
                }
                Some(def) if def.opcode == Opcode::ICmpEq => {
                    let global_side = def.operands.iter().filter_map(|o| o.as_value()).any(|v| {
                        matches!(f.def_of(v).map(|i| i.opcode), Some(Opcode::GlobalRef))
                    });
                    if global_side {
                        return Some((bi, ii));
                    }
                }
                _ => {}
            }
        }
    }
    None
}

/// Replace uses of `from` with `to` at program points strictly dominated by
/// the assume, leaving the condition computation itself alone.
fn substitute_dominated(
    f: &mut Function,
    from: &str,
    to: &str,
    assume_pt: (usize, usize),
    cond: &str,
) {
    let cfg = Cfg::new(f);
    for bi in 0..f.blocks.len() {
        for ii in 0..f.blocks[bi].insts.len() {
            if !cfg.point_dominates(assume_pt, (bi, ii)) {
                continue;
            }
            let inst = &mut f.blocks[bi].insts[ii];
            if inst.result.as_deref() == Some(cond) {
                continue;
            }
            // A phi use happens at the end of the predecessor block, which
            // dominance of the phi itself does not cover.
            if inst.opcode == Opcode::Phi {
                continue;
            }
            for op in &mut inst.operands {
                if op.as_value() == Some(from) {
                    *op = Operand::Value(to.to_string());
                }
            }
        }
    }
}

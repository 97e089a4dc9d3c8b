//! Intrinsic chain normalization per the launder/strip algebra:
//!
//! - strip(strip(x))   -> strip(x)
//! - strip(launder(x)) -> strip(x)
//! - launder(launder(x)) folds to the inner launder result
//! - launder(strip(x)) -> launder(x)
//! - launder/strip of null or undef fold to the operand
//!
//! Every chain normalizes to at most one launder followed by at most one
//! strip, and each instruction needs at most as many rule applications as
//! the chain is long.

use super::{dce, replace_uses, PassReport};
use crate::ir::{Function, Module, Opcode, Operand};

pub fn simplify_intrinsics(m: &mut Module) -> PassReport {
    let mut report = PassReport::default();
    for f in &mut m.functions {
        let (removed, _) = normalize_function(f);
        report.removed_intrinsics += removed;
        report.removed_intrinsics += dce(f);
    }
    report
}

/// Normalize all intrinsic chains in `f`. Returns (instructions removed,
/// total rule applications).
pub fn normalize_function(f: &mut Function) -> (usize, usize) {
    let mut removed = 0;
    let mut steps = 0;
    loop {
        let mut change: Option<Rewrite> = None;
        'scan: for (bi, b) in f.blocks.iter().enumerate() {
            for (ii, inst) in b.insts.iter().enumerate() {
                let is_launder = inst.opcode == Opcode::IntrinsicLaunder;
                let is_strip = inst.opcode == Opcode::IntrinsicStrip;
                if !is_launder && !is_strip {
                    continue;
                }
                let Some(op) = inst.operands[0].as_value() else { continue };
                let Some(def) = f.def_of(op) else { continue };
                match def.opcode {
                    Opcode::ConstNull | Opcode::ConstUndef => {
                        change = Some(Rewrite::Fold(bi, ii, op.to_string()));
                        break 'scan;
                    }
                    Opcode::IntrinsicStrip if is_strip => {
                        // strip of strip: the outer one is redundant.
                        change = Some(Rewrite::Fold(bi, ii, op.to_string()));
                        break 'scan;
                    }
                    Opcode::IntrinsicLaunder if is_launder => {
                        change = Some(Rewrite::Fold(bi, ii, op.to_string()));
                        break 'scan;
                    }
                    Opcode::IntrinsicLaunder if is_strip => {
                        let inner = def.operands[0].clone();
                        change = Some(Rewrite::Retarget(bi, ii, inner));
                        break 'scan;
                    }
                    Opcode::IntrinsicStrip if is_launder => {
                        let inner = def.operands[0].clone();
                        change = Some(Rewrite::Retarget(bi, ii, inner));
                        break 'scan;
                    }
                    _ => {}
                }
            }
        }
        match change {
            None => break,
            Some(Rewrite::Fold(bi, ii, to)) => {
                let result = f.blocks[bi].insts[ii].result.clone();
                f.blocks[bi].insts.remove(ii);
                if let Some(r) = result {
                    replace_uses(f, &r, &to);
                }
                removed += 1;
                steps += 1;
            }
            Some(Rewrite::Retarget(bi, ii, inner)) => {
                f.blocks[bi].insts[ii].operands[0] = inner;
                steps += 1;
            }
        }
    }
    (removed, steps)
}

enum Rewrite {
    /// Remove the instruction at (block, index), redirecting uses of its
    /// result to the named value.
    Fold(usize, usize, String),
    /// Replace the instruction's operand with the inner operand.
    Retarget(usize, usize, Operand),
}

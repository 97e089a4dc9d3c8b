//! Pointer comparison folding.
//!
//! Comparisons fold only when dynamic information cannot matter:
//! - `icmp eq %x, %x` is true.
//! - Two strips of the same value are equal: stripping removed whatever
//!   dynamic difference the operands carried, and the addresses agree.
//! - A fresh allocation is never null, and two distinct allocations are
//!   distinct addresses.
//!
//! Comparisons of distinct launder results are never folded, even over the
//! same operand: laundering produces a pointer with new dynamic information
//! and only the addresses are equal, which the stripped forms express.

use super::{dce, replace_uses, PassReport};
use crate::ir::{Function, Instruction, Module, Opcode, Operand};

pub fn fold_pointer_comparisons(m: &mut Module) -> PassReport {
    let mut report = PassReport::default();
    for f in &mut m.functions {
        loop {
            let Some((bi, ii, value)) = find_foldable(f) else { break };
            let result = f.blocks[bi].insts[ii].result.clone().unwrap();
            let const_name = format!("{result}.fold");
            f.blocks[bi].insts[ii] = Instruction::new(
                Some(const_name.clone()),
                Opcode::ConstInt,
                vec![Operand::Imm(value)],
            );
            replace_uses(f, &result, &const_name);
            report.folded_comparisons += 1;
        }
        report.removed_intrinsics += dce(f);
    }
    report
}

fn find_foldable(f: &Function) -> Option<(usize, usize, i64)> {
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, inst) in b.insts.iter().enumerate() {
            if inst.opcode != Opcode::ICmpEq || inst.result.is_none() {
                continue;
            }
            let (Some(a), Some(b_)) = (inst.operands[0].as_value(), inst.operands[1].as_value())
            else {
                continue;
            };
            if a == b_ {
                return Some((bi, ii, 1));
            }
            let da = f.def_of(a);
            let db = f.def_of(b_);
            // strip(x) == strip(x)
            if let (Some(ia), Some(ib)) = (da, db) {
                if ia.opcode == Opcode::IntrinsicStrip
                    && ib.opcode == Opcode::IntrinsicStrip
                    && ia.operands[0] == ib.operands[0]
                {
                    return Some((bi, ii, 1));
                }
                // Distinct allocations never alias.
                if ia.opcode == Opcode::Alloc && ib.opcode == Opcode::Alloc {
                    return Some((bi, ii, 0));
                }
            }
            if let (Some(ia), Some(ib)) = (da, db) {
                if ia.opcode == Opcode::ConstInt && ib.opcode == Opcode::ConstInt {
                    let eq = ia.operands[0].as_imm() == ib.operands[0].as_imm();
                    return Some((bi, ii, eq as i64));
                }
            }
            // alloc vs null
            let null_vs_alloc = |x: Option<&Instruction>, y: Option<&Instruction>| {
                matches!(x.map(|i| i.opcode), Some(Opcode::Alloc))
                    && matches!(y.map(|i| i.opcode), Some(Opcode::ConstNull))
            };
            if null_vs_alloc(da, db) || null_vs_alloc(db, da) {
                return Some((bi, ii, 0));
            }
        }
    }
    None
}

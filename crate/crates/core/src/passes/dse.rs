//! Block-local dead store elimination.
//!
//! A store is dead when a later store in the same block must-alias it and
//! nothing in between can observe the value: intervening loads must be
//! no-alias, and calls block elimination entirely. Launder, strip, and
//! assume do not block: launder may write only inaccessible memory, and the
//! others are pure, so none of them can read the stored bytes.

use super::PassReport;
use crate::analysis::{alias_query, AliasResult};
use crate::ir::{Module, Opcode};

pub fn dead_store_elimination(m: &mut Module) -> PassReport {
    let mut report = PassReport::default();
    for f in &mut m.functions {
        loop {
            let mut dead: Option<(usize, usize)> = None;
            'scan: for (bi, b) in f.blocks.iter().enumerate() {
                for (ii, inst) in b.insts.iter().enumerate() {
                    if inst.opcode != Opcode::Store {
                        continue;
                    }
                    let Some(p1) = inst.operands[1].as_value() else { continue };
                    for later in &b.insts[ii + 1..] {
                        match later.opcode {
                            Opcode::Store => {
                                let Some(p2) = later.operands[1].as_value() else { break };
                                match alias_query(f, p1, p2) {
                                    AliasResult::MustAlias => {
                                        dead = Some((bi, ii));
                                        break 'scan;
                                    }
                                    AliasResult::NoAlias => continue,
                                    AliasResult::MayAlias => break,
                                }
                            }
                            Opcode::Load => {
                                let Some(lp) = later.operands[0].as_value() else { break };
                                if alias_query(f, p1, lp) != AliasResult::NoAlias {
                                    break;
                                }
                            }
                            Opcode::CallDirect | Opcode::CallIndirect => break,
                            Opcode::IntrinsicLaunder
                            | Opcode::IntrinsicStrip
                            | Opcode::IntrinsicAssume => {}
                            op if op.is_terminator() => break,
                            _ => {}
                        }
                    }
                }
            }
            match dead {
                Some((bi, ii)) => {
                    f.blocks[bi].insts.remove(ii);
                    report.eliminated_stores += 1;
                }
                None => break,
            }
        }
    }
    report
}

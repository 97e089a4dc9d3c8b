//! Invariant load forwarding.
//!
//! Two flavors:
//! - An `!invariant.group` load forwards from a dominating invariant-group
//!   access (store or load) through the *same SSA pointer*. The group
//!   contract makes intervening opaque code irrelevant: the value seen
//!   through one pointer value is fixed for that pointer's lifetime. A
//!   laundered pointer is a different SSA value, so forwarding never crosses
//!   a launder; a stripped pointer carries no dynamic information, so strip
//!   results never participate.
//! - An `!invariant.load` load forwards from a dominating `!invariant.load`
//!   load at a must-alias address: the location is immutable, so any two
//!   reads agree.

use super::{dce, replace_uses, PassReport};
use crate::analysis::{alias_query, invariant_group_key, AliasResult};
use crate::cfg::Cfg;
use crate::ir::{Function, Module, Opcode};

pub fn forward_invariant_loads(m: &mut Module) -> PassReport {
    let mut report = PassReport::default();
    for f in &mut m.functions {
        loop {
            let Some((bi, ii, value)) = find_forwardable(f) else { break };
            let result = f.blocks[bi].insts[ii].result.clone();
            f.blocks[bi].insts.remove(ii);
            if let Some(r) = result {
                replace_uses(f, &r, &value);
            }
            report.forwarded_invariant_loads += 1;
        }
        report.removed_intrinsics += dce(f);
    }
    report
}

/// The value carried by an invariant access: the stored operand for stores,
/// the result for loads.
fn access_value(f: &Function, bi: usize, ii: usize) -> Option<String> {
    let inst = &f.blocks[bi].insts[ii];
    match inst.opcode {
        Opcode::Store => inst.operands[0].as_value().map(|s| s.to_string()),
        Opcode::Load => inst.result.clone(),
        _ => None,
    }
}

fn find_forwardable(f: &Function) -> Option<(usize, usize, String)> {
    let cfg = Cfg::new(f);

    // Collect all annotated accesses once.
    let mut group_accesses: Vec<(usize, usize, String)> = Vec::new(); // (block, inst, pointer)
    let mut inv_loads: Vec<(usize, usize, String)> = Vec::new();
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, inst) in b.insts.iter().enumerate() {
            if inst.invariant_group {
                let ptr_idx = if inst.opcode == Opcode::Store { 1 } else { 0 };
                if let Some(p) = inst.operands[ptr_idx].as_value() {
                    group_accesses.push((bi, ii, p.to_string()));
                }
            }
            if inst.opcode == Opcode::Load && inst.invariant_load {
                if let Some(p) = inst.operands[0].as_value() {
                    inv_loads.push((bi, ii, p.to_string()));
                }
            }
        }
    }

    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, inst) in b.insts.iter().enumerate() {
            if inst.opcode != Opcode::Load {
                continue;
            }
            if inst.invariant_group {
                let Some(p) = inst.operands[0].as_value() else { continue };
                let key = invariant_group_key(f, p);
                if !key.valid {
                    continue;
                }
                let mut best: Option<(usize, usize)> = None;
                for (cbi, cii, cp) in &group_accesses {
                    if (*cbi, *cii) == (bi, ii) || cp != p {
                        continue;
                    }
                    let ckey = invariant_group_key(f, cp);
                    if !ckey.valid {
                        continue;
                    }
                    if !cfg.point_dominates((*cbi, *cii), (bi, ii)) {
                        continue;
                    }
                    // Prefer the latest dominating access.
                    match best {
                        Some(b_pt) if !cfg.point_dominates(b_pt, (*cbi, *cii)) => {}
                        _ => best = Some((*cbi, *cii)),
                    }
                }
                if let Some((cbi, cii)) = best {
                    if let Some(v) = access_value(f, cbi, cii) {
                        return Some((bi, ii, v));
                    }
                }
            } else if inst.invariant_load {
                let Some(p) = inst.operands[0].as_value() else { continue };
                for (cbi, cii, cp) in &inv_loads {
                    if (*cbi, *cii) == (bi, ii) {
                        continue;
                    }
                    if !cfg.point_dominates((*cbi, *cii), (bi, ii)) {
                        continue;
                    }
                    if alias_query(f, cp, p) != AliasResult::MustAlias {
                        continue;
                    }
                    if let Some(v) = access_value(f, *cbi, *cii) {
                        return Some((bi, ii, v));
                    }
                }
            }
        }
    }
    None
}

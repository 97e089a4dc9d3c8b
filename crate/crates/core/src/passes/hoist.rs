//! Loop hoisting of invariant loads.
//!
//! Invariant-group and invariant-load loads cannot change across iterations
//! (the group contract pins the value per pointer; vtable slots are
//! immutable), so a load whose pointer is loop-invariant moves to the
//! preheader, together with the pure address computations feeding it.
//!
//! Speculation guard: the loop body may run zero times, so a hoisted load
//! must be provably dereferenceable: a vtable slot in range, a parameter
//! with a covering dereferenceable attribute, or a live local allocation.
//! Pure address arithmetic (fieldaddr, strip, constants, globals) hoists
//! unconditionally. Launder is a side-effecting call and never moves.

use super::PassReport;
use crate::analysis::address_root;
use crate::cfg::Cfg;
use crate::ir::{Function, Module, Opcode, SLOT_SIZE};

pub fn hoist_invariant_loads(m: &mut Module) -> PassReport {
    let mut report = PassReport::default();
    for fi in 0..m.functions.len() {
        loop {
            let f = &m.functions[fi];
            let Some(h) = find_hoist(f, m) else { break };
            let f = &mut m.functions[fi];
            let inst = f.blocks[h.block].insts.remove(h.inst);
            let was_load = inst.opcode == Opcode::Load;
            let pre = &mut f.blocks[h.preheader];
            let at = pre.insts.len().saturating_sub(1); // before the terminator
            pre.insts.insert(at, inst);
            if was_load {
                report.hoisted_loads += 1;
            }
        }
    }
    report
}

struct Hoist {
    block: usize,
    inst: usize,
    preheader: usize,
}

fn find_hoist(f: &Function, m: &Module) -> Option<Hoist> {
    let cfg = Cfg::new(f);
    for (header, body) in cfg.natural_loops() {
        // Unique predecessor outside the loop.
        let outside: Vec<usize> = cfg.preds[header]
            .iter()
            .copied()
            .filter(|p| !body.contains(p))
            .collect();
        let [preheader] = outside[..] else { continue };
        let latches: Vec<usize> = cfg.preds[header]
            .iter()
            .copied()
            .filter(|p| body.contains(p))
            .collect();

        for &bi in body.iter() {
            for (ii, inst) in f.blocks[bi].insts.iter().enumerate() {
                if inst.result.is_none() {
                    continue;
                }
                let pure = matches!(
                    inst.opcode,
                    Opcode::ConstInt
                        | Opcode::ConstNull
                        | Opcode::ConstUndef
                        | Opcode::GlobalRef
                        | Opcode::FieldAddr
                        | Opcode::IntrinsicStrip
                );
                let inv_load = inst.opcode == Opcode::Load
                    && (inst.invariant_group || inst.invariant_load);
                if !pure && !inv_load {
                    continue;
                }
                let invariant_operands = inst.value_operands().all(|v| {
                    match f.def_sites().get(v) {
                        Some((dbi, _)) => !body.contains(dbi),
                        None => true, // parameter
                    }
                });
                if !invariant_operands {
                    continue;
                }
                if inv_load {
                    let executes_every_iteration =
                        latches.iter().all(|&l| cfg.dominates(bi, l));
                    if !executes_every_iteration {
                        continue;
                    }
                    let Some(p) = inst.operands[0].as_value() else { continue };
                    if !dereferenceable(f, m, p) {
                        continue;
                    }
                }
                return Some(Hoist {
                    block: bi,
                    inst: ii,
                    preheader,
                });
            }
        }
    }
    None
}

/// Whether loading 8 bytes through `ptr` cannot trap.
fn dereferenceable(f: &Function, m: &Module, ptr: &str) -> bool {
    deref_bytes(f, m, ptr, SLOT_SIZE as u64, 0)
}

fn deref_bytes(f: &Function, m: &Module, ptr: &str, need_past: u64, depth: usize) -> bool {
    if depth > 8 {
        return false;
    }
    let (root, offset) = address_root(f, ptr);
    if offset < 0 {
        return false;
    }
    let need = offset as u64 + need_past;
    if let Some(param) = f.params.iter().find(|p| p.name == root) {
        return param.attrs.nonnull
            && param.attrs.dereferenceable_bytes.is_some_and(|n| n >= need);
    }
    match f.def_of(root) {
        Some(def) if def.opcode == Opcode::GlobalRef => {
            let Some(sym) = def.operands[0].as_global() else { return false };
            match m.vtable(sym) {
                Some(vt) => !vt.slots.is_empty() && need <= vt.slots.len() as u64 * SLOT_SIZE as u64,
                None => false,
            }
        }
        Some(def) if def.opcode == Opcode::Alloc => {
            let size = def.operands[0].as_imm().unwrap_or(0);
            // The allocation must stay live: conservatively require that
            // nothing in this function frees memory.
            let frees = f.blocks.iter().flat_map(|b| b.insts.iter()).any(|i| {
                i.opcode == Opcode::CallDirect
                    && i.operands[0].as_global() == Some("dealloc")
            });
            size as u64 >= need && !frees
        }
        Some(def) if def.opcode == Opcode::IntToPtr => {
            // An int round trip points back wherever the int came from.
            let Some(v) = def.operands[0].as_value() else { return false };
            match f.def_of(v) {
                Some(src) if src.opcode == Opcode::PtrToInt => {
                    let Some(orig) = src.operands[0].as_value() else { return false };
                    deref_bytes(f, m, orig, need, depth + 1)
                }
                _ => false,
            }
        }
        Some(def) if def.opcode == Opcode::Load && def.invariant_group => {
            // A vptr load on a constructed object yields a vtable pointer,
            // and slot offsets derived from the static type stay within the
            // dynamic type's vtable. That is a frontend-level contract, not
            // visible in the IR, so this leans on how the frontend emits
            // slot loads.
            true
        }
        _ => false,
    }
}

//! Module verifier: symbol resolution, block shape, SSA dominance, and
//! metadata placement rules.

use super::*;
use crate::cfg::Cfg;
use crate::diag::Diagnostic;
use std::collections::{HashMap, HashSet};

pub fn verify_module(m: &Module) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    let mut seen = HashSet::new();
    let globals = m
        .functions
        .iter()
        .map(|f| f.name.as_str())
        .chain(m.declarations.iter().map(|d| d.name.as_str()))
        .chain(m.vtables.iter().map(|v| v.name.as_str()));
    for g in globals {
        if !seen.insert(g) {
            diags.push(Diagnostic::new(format!(
                "duplicate global name: @{g} (globals must be unique)"
            )));
        }
    }

    for vt in &m.vtables {
        for slot in &vt.slots {
            if m.function(slot).is_none() && m.declaration(slot).is_none() {
                diags.push(Diagnostic::new(format!(
                    "vtable @{} slot references unknown function @{slot}",
                    vt.name
                )));
            }
        }
    }

    for f in &m.functions {
        verify_function(m, f, &mut diags);
    }
    diags
}

fn verify_function(m: &Module, f: &Function, diags: &mut Vec<Diagnostic>) {
    let bad = |inst: &Instruction, rule: &str| {
        Diagnostic::new(format!("@{}: `{}`: {rule}", f.name, super::print::print_inst(inst)))
    };

    if f.blocks.is_empty() {
        diags.push(Diagnostic::new(format!("@{}: function has no blocks", f.name)));
        return;
    }

    let mut labels = HashSet::new();
    for b in &f.blocks {
        if !labels.insert(b.label.as_str()) {
            diags.push(Diagnostic::new(format!(
                "@{}: duplicate block label {}",
                f.name, b.label
            )));
        }
    }

    // Every block ends in exactly one terminator; terminators only at the end.
    for b in &f.blocks {
        match b.insts.last() {
            None => diags.push(Diagnostic::new(format!(
                "@{}: block {} is empty (must end in a terminator)",
                f.name, b.label
            ))),
            Some(last) if !last.opcode.is_terminator() => diags.push(Diagnostic::new(format!(
                "@{}: block {} does not end in a terminator",
                f.name, b.label
            ))),
            _ => {}
        }
        for inst in b.insts.iter().rev().skip(1) {
            if inst.opcode.is_terminator() {
                diags.push(bad(inst, format!("terminator in the middle of block {}", b.label).as_str()));
            }
        }
        for s in b.successors() {
            if !labels.contains(s) {
                diags.push(Diagnostic::new(format!(
                    "@{}: branch to unknown block {s}",
                    f.name
                )));
            }
        }
    }

    for b in &f.blocks {
        for inst in &b.insts {
            verify_inst(m, f, inst, &mut |i, r| diags.push(bad(i, r)));
        }
    }

    verify_ssa(f, diags);
}

fn verify_inst(m: &Module, f: &Function, inst: &Instruction, report: &mut dyn FnMut(&Instruction, &str)) {
    use Opcode::*;

    // Metadata placement: invariant-group only on Load/Store, invariant-load
    // only on Load.
    if inst.invariant_group && !matches!(inst.opcode, Load | Store) {
        report(inst, "metadata on non-memory instruction: !invariant.group is only valid on load and store");
    }
    if inst.invariant_load && inst.opcode != Load {
        report(inst, "!invariant.load is only valid on load");
    }

    let want = |n: usize| inst.operands.len() == n;
    match inst.opcode {
        Alloc | ConstInt => {
            if !want(1) || inst.operands[0].as_imm().is_none() {
                report(inst, "expects one integer immediate");
            }
        }
        Load | IntrinsicLaunder | IntrinsicStrip | IntrinsicAssume | PtrToInt | IntToPtr => {
            if !want(1) || inst.operands[0].as_value().is_none() {
                report(inst, "expects exactly one value operand");
            }
            if inst.opcode.is_intrinsic() && inst.opcode != IntrinsicAssume && inst.result.is_none() {
                report(inst, "intrinsic produces a pointer result and must bind one");
            }
            if inst.opcode == IntrinsicAssume && inst.result.is_some() {
                report(inst, "assume produces no result");
            }
        }
        Store => {
            if !want(2)
                || inst.operands[0].as_value().is_none()
                || inst.operands[1].as_value().is_none()
            {
                report(inst, "store expects a value and an address");
            }
            if inst.result.is_some() {
                report(inst, "store produces no result");
            }
        }
        FieldAddr => {
            if !want(2)
                || inst.operands[0].as_value().is_none()
                || inst.operands[1].as_imm().is_none()
            {
                report(inst, "fieldaddr expects a base value and a byte-offset immediate");
            }
        }
        CallDirect => match inst.operands.first().and_then(|o| o.as_global()) {
            Some(callee) => {
                if m.function(callee).is_none() && m.declaration(callee).is_none() {
                    report(inst, "call target does not resolve to a function or declaration");
                }
            }
            None => report(inst, "call expects a global callee"),
        },
        CallIndirect => {
            if inst.operands.first().and_then(|o| o.as_value()).is_none() {
                report(inst, "icall expects a value callee");
            }
        }
        ICmpEq | Add | Sub | Mul => {
            if !want(2) {
                report(inst, "expects two operands");
            }
        }
        Br => {
            if !want(1) || inst.operands[0].as_label().is_none() {
                report(inst, "br expects one label");
            }
        }
        CondBr => {
            if !want(3) {
                report(inst, "cbr expects a condition and two labels");
            }
        }
        Ret => {}
        Phi => {
            if inst.operands.is_empty() || inst.operands.len() % 2 != 0 {
                report(inst, "phi expects [value, label] pairs");
            }
        }
        ConstNull | ConstUndef => {
            if !want(0) {
                report(inst, "constant takes no operands");
            }
        }
        GlobalRef => match inst.operands.first().and_then(|o| o.as_global()) {
            Some(g) => {
                if !m.resolves(g) {
                    report(inst, "global reference does not resolve");
                }
            }
            None => report(inst, "global expects a symbol"),
        },
    }
    let _ = f;
}

fn verify_ssa(f: &Function, diags: &mut Vec<Diagnostic>) {
    let cfg = Cfg::new(f);
    let mut defs: HashMap<&str, (usize, usize)> = HashMap::new();
    for p in &f.params {
        defs.insert(&p.name, (usize::MAX, 0));
    }
    for (bi, b) in f.blocks.iter().enumerate() {
        for (ii, inst) in b.insts.iter().enumerate() {
            if let Some(r) = &inst.result {
                if defs.insert(r, (bi, ii)).is_some() {
                    diags.push(Diagnostic::new(format!(
                        "@{}: %{r} defined more than once",
                        f.name
                    )));
                }
            }
        }
    }

    for (bi, b) in f.blocks.iter().enumerate() {
        if !cfg.is_reachable(bi) {
            continue;
        }
        for (ii, inst) in b.insts.iter().enumerate() {
            if inst.opcode == Opcode::Phi {
                for pair in inst.operands.chunks(2) {
                    let (Some(v), Some(l)) = (pair[0].as_value(), pair.get(1).and_then(|o| o.as_label()))
                    else {
                        continue;
                    };
                    let Some(&(dbi, dii)) = defs.get(v) else {
                        diags.push(Diagnostic::new(format!(
                            "@{}: use of undefined value %{v}",
                            f.name
                        )));
                        continue;
                    };
                    if dbi == usize::MAX {
                        continue; // parameter
                    }
                    // The incoming value must dominate the end of the
                    // corresponding predecessor block.
                    let Some(&pbi) = cfg.index.get(l) else { continue };
                    let pred_end = (pbi, f.blocks[pbi].insts.len());
                    if !cfg.point_dominates((dbi, dii), pred_end) {
                        diags.push(Diagnostic::new(format!(
                            "@{}: SSA dominance violated: %{v} does not dominate phi edge from {l}",
                            f.name
                        )));
                    }
                }
            } else {
                for v in inst.value_operands() {
                    let Some(&(dbi, dii)) = defs.get(v) else {
                        diags.push(Diagnostic::new(format!(
                            "@{}: use of undefined value %{v}",
                            f.name
                        )));
                        continue;
                    };
                    if dbi == usize::MAX {
                        continue;
                    }
                    if !cfg.point_dominates((dbi, dii), (bi, ii)) {
                        diags.push(Diagnostic::new(format!(
                            "@{}: SSA dominance violated: %{v} used before its definition dominates the use",
                            f.name
                        )));
                    }
                }
            }
        }
    }
}

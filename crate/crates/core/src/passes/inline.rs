//! Direct-call inlining for small callees.
//!
//! Inlining is what stitches constructor vptr stores into callers so that
//! forwarding and devirtualization can see them. Values and labels are
//! renamed with a fresh per-site prefix; returns become branches to the
//! split-off continuation block, with a phi when the callee returns from
//! more than one place.

use super::{replace_uses, PassReport};
use crate::ir::{Block, Function, Instruction, Module, Opcode, Operand};

pub fn inline_calls(m: &mut Module, threshold: usize) -> PassReport {
    let mut counter = 0usize;
    while counter < 1000 {
        let Some((fi, bi, ii, callee)) = find_site(m, threshold) else { break };
        let callee = callee.clone();
        counter += 1;
        let callee_fn = m.function(&callee).unwrap().clone();
        let site = fresh_site(&m.functions[fi]);
        inline_at(&mut m.functions[fi], bi, ii, &callee_fn, site);
    }
    PassReport::default()
}

/// Site indices must stay unique across separate pass invocations (the
/// fixpoint loop re-runs inlining), so derive the next one from the labels
/// already present.
fn fresh_site(caller: &Function) -> usize {
    let mut max = 0usize;
    for b in &caller.blocks {
        if let Some(rest) = b.label.strip_prefix("in") {
            if let Some((n, _)) = rest.split_once('.') {
                if let Ok(k) = n.parse::<usize>() {
                    max = max.max(k);
                }
            }
        }
    }
    max + 1
}

fn size_of(f: &Function) -> usize {
    f.blocks.iter().map(|b| b.insts.len()).sum()
}

fn find_site(m: &Module, threshold: usize) -> Option<(usize, usize, usize, &String)> {
    for (fi, f) in m.functions.iter().enumerate() {
        for (bi, b) in f.blocks.iter().enumerate() {
            for (ii, inst) in b.insts.iter().enumerate() {
                if inst.opcode != Opcode::CallDirect {
                    continue;
                }
                let Some(Operand::Global(sym)) = inst.operands.first() else { continue };
                let Some(callee) = m.function(sym) else { continue };
                if callee.name == f.name || size_of(callee) > threshold {
                    continue;
                }
                // Growth budget for pathological call graphs.
                if size_of(f) > threshold * 8 {
                    continue;
                }
                // Skip mutual recursion back into the caller.
                let calls_caller = callee.blocks.iter().flat_map(|b| b.insts.iter()).any(|i| {
                    i.opcode == Opcode::CallDirect
                        && i.operands.first() == Some(&Operand::Global(f.name.clone()))
                });
                if calls_caller {
                    continue;
                }
                // All arguments must be SSA values (the frontend only emits
                // value arguments).
                if !inst.operands[1..].iter().all(|o| o.as_value().is_some()) {
                    continue;
                }
                if inst.operands.len() - 1 != callee.params.len() {
                    continue;
                }
                return Some((fi, bi, ii, sym));
            }
        }
    }
    None
}

fn inline_at(caller: &mut Function, bi: usize, ii: usize, callee: &Function, site: usize) {
    let prefix = format!("in{site}.");
    let call = caller.blocks[bi].insts[ii].clone();
    let args: Vec<String> = call.operands[1..]
        .iter()
        .map(|o| o.as_value().unwrap().to_string())
        .collect();

    // Clone and rename the callee body.
    let mut body: Vec<Block> = Vec::new();
    for b in &callee.blocks {
        let mut nb = Block::new(format!("{prefix}{}", b.label));
        for inst in &b.insts {
            let mut ni = inst.clone();
            if let Some(r) = &mut ni.result {
                *r = format!("{prefix}{r}");
            }
            for op in &mut ni.operands {
                match op {
                    Operand::Value(v) => {
                        if let Some(idx) = callee.params.iter().position(|p| &p.name == v) {
                            *v = args[idx].clone();
                        } else {
                            *v = format!("{prefix}{v}");
                        }
                    }
                    Operand::Label(l) => *l = format!("{prefix}{l}"),
                    _ => {}
                }
            }
            nb.insts.push(ni);
        }
        body.push(nb);
    }

    // Split the caller block around the call.
    let cont_label = format!("{prefix}cont");
    let mut head = caller.blocks[bi].clone();
    let tail_insts: Vec<Instruction> = head.insts.split_off(ii + 1);
    head.insts.pop(); // the call itself
    head.insts.push(Instruction::new(
        None,
        Opcode::Br,
        vec![Operand::Label(format!("{prefix}{}", callee.blocks[0].label))],
    ));
    let mut cont = Block::new(cont_label.clone());
    cont.insts = tail_insts;

    // Rewrite callee returns into branches to the continuation.
    let mut ret_values: Vec<(String, String)> = Vec::new(); // (value, from label)
    for b in &mut body {
        if let Some(last) = b.insts.last() {
            if last.opcode == Opcode::Ret {
                let ret = b.insts.pop().unwrap();
                if let Some(Operand::Value(v)) = ret.operands.first() {
                    ret_values.push((v.clone(), b.label.clone()));
                }
                b.insts.push(Instruction::new(
                    None,
                    Opcode::Br,
                    vec![Operand::Label(cont_label.clone())],
                ));
            }
        }
    }

    // Wire up the call result: substitute a single return value directly,
    // merge several through a phi at the continuation head.
    let mut subst: Option<(String, String)> = None;
    if let Some(res) = &call.result {
        match ret_values.len() {
            0 => {
                // A used result from a return-less path; pin it to undef so
                // the IR stays well formed.
                cont.insts.insert(
                    0,
                    Instruction::new(Some(res.clone()), Opcode::ConstUndef, vec![]),
                );
            }
            1 => subst = Some((res.clone(), ret_values[0].0.clone())),
            _ => {
                let mut ops = Vec::new();
                for (v, l) in &ret_values {
                    ops.push(Operand::Value(v.clone()));
                    ops.push(Operand::Label(l.clone()));
                }
                cont.insts.insert(0, Instruction::new(Some(res.clone()), Opcode::Phi, ops));
            }
        }
    }
    install(caller, bi, head, cont, body);
    if let Some((res, v)) = subst {
        replace_uses(caller, &res, &v);
    }
    fix_phi_labels(caller, bi, &cont_label);
}

/// Replace block `bi` with `head`, then append the inlined body and the
/// continuation after it.
fn install(caller: &mut Function, bi: usize, head: Block, cont: Block, body: Vec<Block>) {
    caller.blocks[bi] = head;
    let mut rest: Vec<Block> = caller.blocks.split_off(bi + 1);
    caller.blocks.extend(body);
    caller.blocks.push(cont);
    caller.blocks.append(&mut rest);
}

/// Successors that used to come from the original block now come from the
/// continuation; phi incoming labels must follow.
fn fix_phi_labels(caller: &mut Function, bi: usize, cont_label: &str) {
    let head_label = caller.blocks[bi].label.clone();
    let cont_succs: Vec<String> = caller
        .blocks
        .iter()
        .find(|b| b.label == cont_label)
        .map(|b| b.successors().iter().map(|s| s.to_string()).collect())
        .unwrap_or_default();
    for b in &mut caller.blocks {
        if !cont_succs.contains(&b.label) {
            continue;
        }
        for inst in &mut b.insts {
            if inst.opcode != Opcode::Phi {
                continue;
            }
            for op in &mut inst.operands {
                if let Operand::Label(l) = op {
                    if l == &head_label {
                        *l = cont_label.to_string();
                    }
                }
            }
        }
    }
}

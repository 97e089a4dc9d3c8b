//! Alias queries, invariant-group forwarding keys, vtable slot resolution,
//! and pointer-attribute propagation through the intrinsics.
//!
//! Launder and strip are address-preserving: for aliasing purposes they are
//! treated as bit-casts, so chains of them collapse to a common root.

use crate::ir::{Function, Instruction, Module, Linkage, Opcode, ParamAttrs, SLOT_SIZE};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AliasResult {
    MustAlias,
    MayAlias,
    NoAlias,
}

/// Forwarding key for the invariant-group contract. Keys are SSA-identity
/// based: two accesses merge only when both are annotated, both keys are
/// valid, and the roots are the same SSA value. A launder result is its own
/// root, so forwarding never crosses a launder; a strip result carries no
/// dynamic information, so its key is invalid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvariantGroupKey {
    pub root: String,
    pub valid: bool,
}

pub fn invariant_group_key(f: &Function, ptr: &str) -> InvariantGroupKey {
    let valid = match f.def_of(ptr) {
        Some(inst) => inst.opcode != Opcode::IntrinsicStrip,
        None => true, // parameters and unknowns keep a valid identity key
    };
    InvariantGroupKey {
        root: ptr.to_string(),
        valid,
    }
}

/// Chase launder/strip chains down to the underlying SSA value.
pub fn chase_intrinsics<'a>(f: &'a Function, mut v: &'a str) -> &'a str {
    loop {
        match f.def_of(v) {
            Some(inst)
                if matches!(
                    inst.opcode,
                    Opcode::IntrinsicLaunder | Opcode::IntrinsicStrip
                ) =>
            {
                match inst.operands[0].as_value() {
                    Some(op) => v = op,
                    None => return v,
                }
            }
            _ => return v,
        }
    }
}

/// An address expression: a root SSA value plus an accumulated byte offset,
/// folding fieldaddr, launder, and strip along the way.
pub fn address_root<'a>(f: &'a Function, mut v: &'a str) -> (&'a str, i64) {
    let mut offset = 0i64;
    loop {
        match f.def_of(v) {
            Some(inst) => match inst.opcode {
                Opcode::IntrinsicLaunder | Opcode::IntrinsicStrip => {
                    match inst.operands[0].as_value() {
                        Some(op) => v = op,
                        None => break,
                    }
                }
                Opcode::FieldAddr => {
                    let (Some(base), Some(off)) =
                        (inst.operands[0].as_value(), inst.operands[1].as_imm())
                    else {
                        break;
                    };
                    offset += off;
                    v = base;
                }
                _ => break,
            },
            None => break,
        }
    }
    (v, offset)
}

fn is_alloc(f: &Function, v: &str) -> bool {
    matches!(f.def_of(v), Some(i) if i.opcode == Opcode::Alloc)
}

/// Pairwise aliasing of two pointer values defined in `f`.
pub fn alias_query(f: &Function, a: &str, b: &str) -> AliasResult {
    let (ra, oa) = address_root(f, a);
    let (rb, ob) = address_root(f, b);
    if ra == rb {
        if oa == ob {
            return AliasResult::MustAlias;
        }
        // Distinct fixed offsets from one allocation are distinct slots.
        if is_alloc(f, ra) {
            return AliasResult::NoAlias;
        }
        return AliasResult::MayAlias;
    }
    if is_alloc(f, ra) && is_alloc(f, rb) {
        return AliasResult::NoAlias;
    }
    AliasResult::MayAlias
}

/// Resolve an `!invariant.load` load of a vtable slot to the function symbol
/// stored there, when the vtable contents are visible to the optimizer.
pub fn resolve_vtable_slot(f: &Function, m: &Module, load: &Instruction) -> Option<String> {
    if load.opcode != Opcode::Load || !load.invariant_load {
        return None;
    }
    let addr = load.operands[0].as_value()?;
    let (root, offset) = address_root(f, addr);
    let vt_name = match f.def_of(root) {
        Some(inst) if inst.opcode == Opcode::GlobalRef => inst.operands[0].as_global()?,
        _ => return None,
    };
    let vt = m.vtable(vt_name)?;
    if vt.linkage == Linkage::Declaration {
        return None;
    }
    if offset < 0 || offset % SLOT_SIZE != 0 {
        return None;
    }
    vt.slots.get((offset / SLOT_SIZE) as usize).cloned()
}

/// Copy nonnull/dereferenceable from intrinsic operands to their results and
/// infer nocapture for operands whose results never escape.
pub fn propagate_pointer_attributes(f: &Function) -> Function {
    let mut out = f.clone();
    let param_attrs: HashMap<&str, &ParamAttrs> =
        f.params.iter().map(|p| (p.name.as_str(), &p.attrs)).collect();

    // Attribute lookup for a value: parameter attributes or attributes
    // already inferred on an intrinsic result.
    let attrs_of = |func: &Function, v: &str| -> ParamAttrs {
        if let Some(a) = param_attrs.get(v) {
            return (*a).clone();
        }
        match func.def_of(v) {
            Some(inst) if inst.opcode.is_intrinsic() => inst.result_attrs.clone(),
            _ => ParamAttrs::default(),
        }
    };

    // Iterate so chains (launder of launder of a nonnull param) converge.
    loop {
        let snapshot = out.clone();
        let mut changed = false;
        for b in &mut out.blocks {
            for inst in &mut b.insts {
                if !matches!(
                    inst.opcode,
                    Opcode::IntrinsicLaunder | Opcode::IntrinsicStrip
                ) {
                    continue;
                }
                let Some(op) = inst.operands[0].as_value() else {
                    continue;
                };
                let src = attrs_of(&snapshot, op);
                if src.nonnull && !inst.result_attrs.nonnull {
                    inst.result_attrs.nonnull = true;
                    changed = true;
                }
                if let Some(n) = src.dereferenceable_bytes {
                    if inst.result_attrs.dereferenceable_bytes != Some(n) {
                        inst.result_attrs.dereferenceable_bytes = Some(n);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }

    // nocapture: every transitive use of the intrinsic result must be
    // non-capturing.
    let targets: Vec<String> = out
        .blocks
        .iter()
        .flat_map(|b| b.insts.iter())
        .filter(|i| {
            matches!(
                i.opcode,
                Opcode::IntrinsicLaunder | Opcode::IntrinsicStrip
            )
        })
        .filter_map(|i| i.result.clone())
        .collect();
    for t in targets {
        if value_never_captured(&out, &t) {
            for b in &mut out.blocks {
                for inst in &mut b.insts {
                    if inst.result.as_deref() == Some(t.as_str()) {
                        inst.arg_nocapture = true;
                    }
                }
            }
        }
    }
    out
}

/// Whether every transitive use of `v` is non-capturing: comparisons and
/// branches never capture, address-preserving ops capture iff their result
/// is captured, and calls, stores of the value, returns, and int casts are
/// conservatively treated as capturing.
fn value_never_captured(f: &Function, v: &str) -> bool {
    let mut work = vec![v.to_string()];
    let mut seen = std::collections::HashSet::new();
    while let Some(cur) = work.pop() {
        if !seen.insert(cur.clone()) {
            continue;
        }
        for b in &f.blocks {
            for inst in &b.insts {
                let uses_cur = inst.value_operands().any(|o| o == cur);
                if !uses_cur {
                    continue;
                }
                match inst.opcode {
                    Opcode::ICmpEq | Opcode::CondBr | Opcode::IntrinsicAssume => {}
                    Opcode::Load => {
                        // Loading *through* the pointer does not copy it.
                    }
                    Opcode::Store => {
                        // Storing through the pointer is fine; storing the
                        // pointer itself captures it.
                        if inst.operands[0].as_value() == Some(cur.as_str()) {
                            return false;
                        }
                    }
                    Opcode::FieldAddr
                    | Opcode::IntrinsicLaunder
                    | Opcode::IntrinsicStrip
                    | Opcode::Phi => {
                        if let Some(r) = &inst.result {
                            work.push(r.clone());
                        }
                    }
                    _ => return false,
                }
            }
        }
    }
    true
}

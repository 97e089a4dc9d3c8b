//! Deterministic textual printer. `parse_ir(print_ir(m))` is structurally
//! identical to `m` for any module the verifier accepts.

use super::*;
use std::fmt::Write;

pub fn print_ir(m: &Module) -> String {
    let mut out = String::new();
    writeln!(out, "module @{}", m.name).unwrap();

    for decl in &m.declarations {
        out.push('\n');
        out.push_str(&print_signature("declare", "", decl));
    }

    for vt in &m.vtables {
        out.push('\n');
        let slots = vt
            .slots
            .iter()
            .map(|s| format!("@{s}"))
            .collect::<Vec<_>>()
            .join(", ");
        writeln!(
            out,
            "vtable @{} for {} linkage={} [{}]",
            vt.name,
            vt.class_name,
            vt.linkage.as_str(),
            slots
        )
        .unwrap();
    }

    for f in &m.functions {
        out.push('\n');
        let sig = Signature {
            name: f.name.clone(),
            params: f.params.clone(),
            ret: f.ret,
            attributes: f.attributes.clone(),
        };
        let head = print_signature("define", if f.linkonce { "linkonce " } else { "" }, &sig);
        out.push_str(head.trim_end());
        out.push_str(" {\n");
        for b in &f.blocks {
            writeln!(out, "{}:", b.label).unwrap();
            for inst in &b.insts {
                writeln!(out, "  {}", print_inst(inst)).unwrap();
            }
        }
        out.push_str("}\n");
    }
    out
}

fn print_signature(keyword: &str, linkonce: &str, sig: &Signature) -> String {
    let params = sig
        .params
        .iter()
        .map(print_param)
        .collect::<Vec<_>>()
        .join(", ");
    let mut s = format!("{keyword} {linkonce}@{}({params})", sig.name);
    if let Some(ret) = sig.ret {
        write!(s, " -> {ret}").unwrap();
    }
    for attr in &sig.attributes {
        write!(s, " {}", attr.as_str()).unwrap();
    }
    s.push('\n');
    s
}

fn print_param(p: &Param) -> String {
    let mut s = p.ty.to_string();
    if p.attrs.nonnull {
        s.push_str(" nonnull");
    }
    if let Some(n) = p.attrs.dereferenceable_bytes {
        write!(s, " dereferenceable({n})").unwrap();
    }
    if p.attrs.nocapture {
        s.push_str(" nocapture");
    }
    write!(s, " %{}", p.name).unwrap();
    s
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Value(v) => format!("%{v}"),
        Operand::Global(g) => format!("@{g}"),
        Operand::Label(l) => l.clone(),
        Operand::Imm(i) => i.to_string(),
    }
}

pub(super) fn print_inst(inst: &Instruction) -> String {
    let mut s = String::new();
    if let Some(r) = &inst.result {
        write!(s, "%{r} = ").unwrap();
    }
    let ops = &inst.operands;
    match inst.opcode {
        Opcode::Alloc => write!(s, "alloc {}", operand(&ops[0])).unwrap(),
        Opcode::Load => write!(s, "load {}", operand(&ops[0])).unwrap(),
        Opcode::Store => write!(s, "store {}, {}", operand(&ops[0]), operand(&ops[1])).unwrap(),
        Opcode::FieldAddr => {
            write!(s, "fieldaddr {}, {}", operand(&ops[0]), operand(&ops[1])).unwrap()
        }
        Opcode::CallDirect => {
            let args = ops[1..].iter().map(operand).collect::<Vec<_>>().join(", ");
            write!(s, "call {}({args})", operand(&ops[0])).unwrap();
        }
        Opcode::CallIndirect => {
            let args = ops[1..].iter().map(operand).collect::<Vec<_>>().join(", ");
            write!(s, "icall {}({args})", operand(&ops[0])).unwrap();
        }
        Opcode::IntrinsicLaunder => write!(s, "launder {}", operand(&ops[0])).unwrap(),
        Opcode::IntrinsicStrip => write!(s, "strip {}", operand(&ops[0])).unwrap(),
        Opcode::IntrinsicAssume => write!(s, "assume {}", operand(&ops[0])).unwrap(),
        Opcode::ICmpEq => {
            write!(s, "icmp eq {}, {}", operand(&ops[0]), operand(&ops[1])).unwrap()
        }
        Opcode::Add => write!(s, "add {}, {}", operand(&ops[0]), operand(&ops[1])).unwrap(),
        Opcode::Sub => write!(s, "sub {}, {}", operand(&ops[0]), operand(&ops[1])).unwrap(),
        Opcode::Mul => write!(s, "mul {}, {}", operand(&ops[0]), operand(&ops[1])).unwrap(),
        Opcode::PtrToInt => write!(s, "ptr2int {}", operand(&ops[0])).unwrap(),
        Opcode::IntToPtr => write!(s, "int2ptr {}", operand(&ops[0])).unwrap(),
        Opcode::Br => write!(s, "br {}", operand(&ops[0])).unwrap(),
        Opcode::CondBr => write!(
            s,
            "cbr {}, {}, {}",
            operand(&ops[0]),
            operand(&ops[1]),
            operand(&ops[2])
        )
        .unwrap(),
        Opcode::Ret => {
            s.push_str("ret");
            if let Some(v) = ops.first() {
                write!(s, " {}", operand(v)).unwrap();
            }
        }
        Opcode::Phi => {
            s.push_str("phi ");
            let pairs = ops
                .chunks(2)
                .map(|c| format!("[{}, {}]", operand(&c[0]), operand(&c[1])))
                .collect::<Vec<_>>()
                .join(", ");
            s.push_str(&pairs);
        }
        Opcode::ConstInt => write!(s, "const {}", operand(&ops[0])).unwrap(),
        Opcode::ConstNull => s.push_str("null"),
        Opcode::ConstUndef => s.push_str("undef"),
        Opcode::GlobalRef => write!(s, "global {}", operand(&ops[0])).unwrap(),
    }
    if inst.invariant_group {
        s.push_str(" !invariant.group");
    }
    if inst.invariant_load {
        s.push_str(" !invariant.load");
    }
    if !inst.result_attrs.is_empty() {
        let mut parts = Vec::new();
        if inst.result_attrs.nonnull {
            parts.push("nonnull".to_string());
        }
        if let Some(n) = inst.result_attrs.dereferenceable_bytes {
            parts.push(format!("dereferenceable({n})"));
        }
        if inst.result_attrs.nocapture {
            parts.push("nocapture".to_string());
        }
        write!(s, " !ret({})", parts.join(",")).unwrap();
    }
    if inst.arg_nocapture {
        s.push_str(" !arg(nocapture)");
    }
    s
}

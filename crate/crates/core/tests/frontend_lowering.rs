use invar_core::corpus;
use invar_core::frontend::{emit_vtables, lower_to_ir, parse_source, ClassTable, LoweringOptions};
use invar_core::ir::{Linkage, Opcode};

fn lower(src: &str, opts: &LoweringOptions) -> invar_core::ir::Module {
    lower_to_ir(&parse_source(src).unwrap(), opts).unwrap()
}

#[test]
fn class_layout_and_slots() {
    let src = "\
class A {
  int x;
  int y;
  virtual fn m() -> int;
}
fn A::m() -> int { return 1; }
class B : A {
  int z;
  virtual fn m() -> int;
  virtual fn n() -> int;
}
fn B::m() -> int { return 2; }
fn B::n() -> int { return 3; }
fn main() { }
";
    let prog = parse_source(src).unwrap();
    let table = ClassTable::build(&prog).unwrap();
    let a = &table.classes["A"];
    assert_eq!(a.field_offsets["x"], 8); // vptr at 0
    assert_eq!(a.field_offsets["y"], 16);
    assert_eq!(a.size, 24);
    let b = &table.classes["B"];
    assert_eq!(b.field_offsets["x"], 8);
    assert_eq!(b.field_offsets["z"], 24);
    assert_eq!(b.size, 32);
    // B overrides slot 0 in place and appends its own method.
    assert_eq!(b.vtable_slots.len(), 2);
    assert_eq!(b.vtable_slots[0].impl_class, "B");
    assert_eq!(b.vtable_slots[1].method, "n");
}

#[test]
fn strict_lowering_emits_metadata() {
    let m = lower(corpus::G, &LoweringOptions::default());
    let main = m.function("main").unwrap();
    let insts: Vec<_> = main.blocks.iter().flat_map(|b| b.insts.iter()).collect();
    // Pointer comparison strips both sides first.
    assert!(insts.iter().any(|i| i.opcode == Opcode::IntrinsicStrip));
    // Placement new launders the storage.
    assert!(insts.iter().any(|i| i.opcode == Opcode::IntrinsicLaunder));
    // Virtual dispatch: vptr load in the group, slot load invariant.
    assert!(insts.iter().any(|i| i.opcode == Opcode::Load && i.invariant_group));
    assert!(insts.iter().any(|i| i.opcode == Opcode::Load && i.invariant_load));
    // Constructors store the vtable pointer in the group.
    let ctor = m.function("A::ctor").unwrap();
    assert!(ctor
        .blocks
        .iter()
        .flat_map(|b| b.insts.iter())
        .any(|i| i.opcode == Opcode::Store && i.invariant_group));
}

#[test]
fn lax_lowering_has_no_artifacts() {
    let opts = LoweringOptions {
        strict_vtable_pointers: false,
        ..LoweringOptions::default()
    };
    let m = lower(corpus::G, &opts);
    for f in &m.functions {
        for inst in f.blocks.iter().flat_map(|b| b.insts.iter()) {
            assert!(!inst.opcode.is_intrinsic(), "{}: {:?}", f.name, inst.opcode);
            assert!(!inst.invariant_group && !inst.invariant_load);
        }
    }
}

#[test]
fn outline_ctor_gets_assumption_triple() {
    let m = lower(corpus::OUTLINE_CTOR_USER, &LoweringOptions::default());
    let main = m.function("main").unwrap();
    let insts: Vec<_> = main.blocks.iter().flat_map(|b| b.insts.iter()).collect();
    let assume_at = insts
        .iter()
        .position(|i| i.opcode == Opcode::IntrinsicAssume)
        .expect("assumption emitted after out-of-module ctor");
    // load !invariant.group / global vtable / icmp eq / assume.
    assert_eq!(insts[assume_at - 1].opcode, Opcode::ICmpEq);
    assert_eq!(insts[assume_at - 2].opcode, Opcode::GlobalRef);
    assert_eq!(insts[assume_at - 2].operands[0].as_global(), Some("C::vtable"));
    assert_eq!(insts[assume_at - 3].opcode, Opcode::Load);
    assert!(insts[assume_at - 3].invariant_group);
}

#[test]
fn defined_ctor_gets_no_assumption() {
    let m = lower(corpus::TEST, &LoweringOptions::default());
    let main = m.function("main").unwrap();
    assert!(!main
        .blocks
        .iter()
        .flat_map(|b| b.insts.iter())
        .any(|i| i.opcode == Opcode::IntrinsicAssume));
}

#[test]
fn vtable_linkage_follows_the_key_function() {
    let opts = LoweringOptions::default();
    let user = parse_source(corpus::OUTLINE_CTOR_USER).unwrap();
    let vts = emit_vtables(&user, &opts).unwrap();
    assert_eq!(vts[0].linkage, Linkage::Definition);
    assert_eq!(vts[0].slots, vec!["C::virt_meth".to_string()]);

    let imp = parse_source(corpus::OUTLINE_CTOR_IMPL).unwrap();
    let vts = emit_vtables(&imp, &opts).unwrap();
    assert_eq!(vts[0].linkage, Linkage::Declaration);
    assert!(vts[0].slots.is_empty());

    // All-inline virtual methods: no key function anywhere, every body
    // available, so the vtable is optimization-only.
    let inline_only = parse_source(
        "class A {\n  virtual fn m() -> int { return 1; }\n}\nfn main() { }\n",
    )
    .unwrap();
    let vts = emit_vtables(&inline_only, &opts).unwrap();
    assert_eq!(vts[0].linkage, Linkage::OptimizationOnly);

    // A missing body blocks that, unless vtable emission is forced.
    let partial = "class A {\n  virtual fn m() -> int { return 1; }\n  virtual extern fn n() -> int;\n}\nfn main() { }\n";
    let prog = parse_source(partial).unwrap();
    assert_eq!(emit_vtables(&prog, &opts).unwrap()[0].linkage, Linkage::Declaration);
    let forced = LoweringOptions {
        force_emit_vtables: true,
        ..LoweringOptions::default()
    };
    assert_eq!(
        emit_vtables(&prog, &forced).unwrap()[0].linkage,
        Linkage::OptimizationOnly
    );
}

#[test]
fn semantic_errors_are_reported() {
    for bad in [
        "class B : Missing { }\nfn main() { }\n",
        "class A { virtual fn m(x: int) -> int; }\nclass B : A { virtual fn m() -> int; }\nfn B::m() -> int { return 1; }\nfn A::m(x: int) -> int { return 0; }\nfn main() { }\n",
        "class A { fn m() -> int { return 1; } }\nclass B : A { fn m() -> int { return 2; } }\nfn main() { }\n",
        "fn main() { var x = 1; x = null; }\n",
        "fn main() { print(missing_fn()); }\n",
        "fn main() { var a = new Nope; }\n",
        "fn f() -> int { return 1; }\nfn f() -> int { return 2; }\nfn main() { }\n",
    ] {
        assert!(parse_source(bad).is_err(), "accepted: {bad}");
    }
}

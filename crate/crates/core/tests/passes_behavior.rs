use invar_core::corpus;
use invar_core::frontend::{lower_to_ir, parse_source, LoweringOptions};
use invar_core::ir::{parse_ir, print_ir, Opcode};
use invar_core::passes::{
    dead_store_elimination, fold_assumes, forward_invariant_loads, inline_calls,
    lower_for_codegen, run_pipeline, PipelineConfig,
};

fn compile(src: &str) -> invar_core::ir::Module {
    lower_to_ir(&parse_source(src).unwrap(), &LoweringOptions::default()).unwrap()
}

#[test]
fn forwarding_respects_ssa_identity() {
    // Same pointer: the load forwards from the store.
    let same = "module @t\n\ndefine @f(ptr %p, ptr %vt) -> ptr {\nentry:\n  store %vt, %p !invariant.group\n  %v = load %p !invariant.group\n  ret %v\n}\n";
    let mut m = parse_ir(same).unwrap();
    let r = forward_invariant_loads(&mut m);
    assert_eq!(r.forwarded_invariant_loads, 1);
    let f = &m.functions[0];
    assert!(!f.blocks[0].insts.iter().any(|i| i.opcode == Opcode::Load));

    // Across a launder: a different pointer identity, so no forwarding even
    // though the address is the same.
    let laundered = "module @t\n\ndefine @f(ptr %p, ptr %vt) -> ptr {\nentry:\n  store %vt, %p !invariant.group\n  %l = launder %p\n  %v = load %l !invariant.group\n  ret %v\n}\n";
    let mut m = parse_ir(laundered).unwrap();
    let r = forward_invariant_loads(&mut m);
    assert_eq!(r.forwarded_invariant_loads, 0);

    // Through a strip: the key is invalid, no forwarding either way.
    let stripped = "module @t\n\ndefine @f(ptr %p, ptr %vt) -> ptr {\nentry:\n  %s = strip %p\n  store %vt, %s !invariant.group\n  %v = load %s !invariant.group\n  ret %v\n}\n";
    let mut m = parse_ir(stripped).unwrap();
    let r = forward_invariant_loads(&mut m);
    assert_eq!(r.forwarded_invariant_loads, 0);

    // Unannotated loads never participate.
    let plain = "module @t\n\ndefine @f(ptr %p, ptr %vt) -> ptr {\nentry:\n  store %vt, %p !invariant.group\n  %v = load %p\n  ret %v\n}\n";
    let mut m = parse_ir(plain).unwrap();
    assert_eq!(forward_invariant_loads(&mut m).forwarded_invariant_loads, 0);
}

#[test]
fn fold_assumes_substitutes_the_global() {
    let text = "module @t\n\nvtable @A::vtable for A linkage=definition [@g]\n\ndefine @g() -> int {\nentry:\n  %r = const 7\n  ret %r\n}\n\ndefine @f(ptr %p) -> int {\nentry:\n  %v = load %p !invariant.group\n  %vt = global @A::vtable\n  %c = icmp eq %v, %vt\n  assume %c\n  %sa = fieldaddr %v, 0\n  %fp = load %sa !invariant.load\n  %r = icall %fp()\n  ret %r\n}\n";
    let mut m = parse_ir(text).unwrap();
    let r = fold_assumes(&mut m);
    assert!(r.removed_intrinsics >= 1);
    let f = m.function("f").unwrap();
    assert!(!f.blocks[0].insts.iter().any(|i| i.opcode == Opcode::IntrinsicAssume));
    // The slot address now computes from the global, not the loaded value.
    let sa = f.def_of("sa").unwrap();
    assert_eq!(sa.operands[0].as_value(), Some("vt"));
}

#[test]
fn dse_kills_overwritten_store_across_launder() {
    let mut m = compile(corpus::DSE);
    let cfg = PipelineConfig::default();
    let report = run_pipeline(&mut m, &cfg).unwrap();
    assert!(report.eliminated_stores >= 1, "{report}");
    // The dead constant 42 is gone from main entirely.
    let main = m.function("main").unwrap();
    assert!(!main
        .blocks
        .iter()
        .flat_map(|b| b.insts.iter())
        .any(|i| i.opcode == Opcode::ConstInt && i.operands[0].as_imm() == Some(42)));
}

#[test]
fn dse_keeps_stores_with_intervening_aliasing_load() {
    let text = "module @t\n\ndefine @f(ptr %p, int %a, int %b) -> int {\nentry:\n  store %a, %p\n  %v = load %p\n  store %b, %p\n  ret %v\n}\n";
    let mut m = parse_ir(text).unwrap();
    assert_eq!(dead_store_elimination(&mut m).eliminated_stores, 0);
}

#[test]
fn devirtualization_turns_icall_into_call() {
    let mut m = compile(corpus::FOO);
    let cfg = PipelineConfig::default();
    let report = run_pipeline(&mut m, &cfg).unwrap();
    assert_eq!(report.devirtualized_calls, 1, "{report}");
    // The devirtualized call then inlines away entirely.
    let main = m.function("main").unwrap();
    assert!(!main
        .blocks
        .iter()
        .flat_map(|b| b.insts.iter())
        .any(|i| i.opcode == Opcode::CallIndirect));
}

#[test]
fn hoisting_moves_both_loads_out_of_the_loop() {
    let mut m = compile(corpus::HOIST_LOOP);
    let cfg = PipelineConfig::default();
    let report = run_pipeline(&mut m, &cfg).unwrap();
    assert_eq!(report.hoisted_loads, 2, "{report}");
}

#[test]
fn inlining_splices_the_callee() {
    let text = "module @t\n\ndefine @callee(int %x) -> int {\nentry:\n  %r = add %x, 1\n  ret %r\n}\n\ndefine @main() -> int {\nentry:\n  %a = const 41\n  %b = call @callee(%a)\n  ret %b\n}\n";
    let mut m = parse_ir(text).unwrap();
    inline_calls(&mut m, 100);
    let main = m.function("main").unwrap();
    assert!(!main
        .blocks
        .iter()
        .flat_map(|b| b.insts.iter())
        .any(|i| i.opcode == Opcode::CallDirect));
    let diags = invar_core::ir::verify_module(&m);
    assert!(diags.is_empty(), "{diags:?}");
}

#[test]
fn inlining_merges_multiple_returns_with_a_phi() {
    let text = "module @t\n\ndefine @callee(int %x) -> int {\nentry:\n  cbr %x, a, b\na:\n  %r1 = const 1\n  ret %r1\nb:\n  %r2 = const 2\n  ret %r2\n}\n\ndefine @main(int %x) -> int {\nentry:\n  %b = call @callee(%x)\n  ret %b\n}\n";
    let mut m = parse_ir(text).unwrap();
    inline_calls(&mut m, 100);
    let main = m.function("main").unwrap();
    assert!(main
        .blocks
        .iter()
        .flat_map(|b| b.insts.iter())
        .any(|i| i.opcode == Opcode::Phi));
    assert!(invar_core::ir::verify_module(&m).is_empty());
}

#[test]
fn lower_for_codegen_is_idempotent_and_demotes_vtables() {
    let src = "class A {\n  virtual fn m() -> int { return 1; }\n}\nfn main() { var a = new A; print(a.m()); }\n";
    let mut m = compile(src);
    lower_for_codegen(&mut m);
    assert!(m.vtables.iter().all(|v| v.linkage != invar_core::ir::Linkage::OptimizationOnly));
    assert!(m.vtables.iter().any(|v| v.slots.is_empty()));
    let once = m.clone();
    lower_for_codegen(&mut m);
    assert_eq!(m, once);
}

#[test]
fn pipeline_rejects_misplaced_lowering() {
    let mut m = compile(corpus::TEST);
    let cfg = PipelineConfig {
        passes: vec!["lower-for-codegen".into(), "dse".into()],
        ..PipelineConfig::default()
    };
    assert!(run_pipeline(&mut m, &cfg).is_err());
    let cfg = PipelineConfig {
        passes: vec!["no-such-pass".into()],
        ..PipelineConfig::default()
    };
    assert!(run_pipeline(&mut m, &cfg).is_err());
}

#[test]
fn pipeline_with_final_lowering_is_accepted() {
    let mut m = compile(corpus::TEST);
    let mut passes: Vec<String> = invar_core::passes::DEFAULT_PASSES
        .iter()
        .map(|s| s.to_string())
        .collect();
    passes.push("lower-for-codegen".into());
    let cfg = PipelineConfig {
        passes,
        ..PipelineConfig::default()
    };
    run_pipeline(&mut m, &cfg).unwrap();
    let printed = print_ir(&m);
    assert!(!printed.contains("!invariant"));
}

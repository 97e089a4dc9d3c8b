use invar_core::corpus;
use invar_core::frontend::{lower_to_ir, parse_source, LoweringOptions};
use invar_core::ir::{parse_ir, print_ir, verify_module};

#[test]
fn lowered_corpus_round_trips_and_verifies() {
    for (name, src, _) in corpus::soundness_corpus() {
        let prog = parse_source(src).unwrap();
        let m = lower_to_ir(&prog, &LoweringOptions::default()).unwrap();
        let diags = verify_module(&m);
        assert!(diags.is_empty(), "{name}: {diags:?}");
        let printed = print_ir(&m);
        let reparsed = parse_ir(&printed).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(m, reparsed, "{name}: round trip changed the module");
        assert_eq!(printed, print_ir(&reparsed));
    }
}

#[test]
fn metadata_and_attributes_round_trip() {
    let text = "module @t\n\ndeclare @ext(ptr nonnull dereferenceable(16) %p) -> int\n\nvtable @A::vtable for A linkage=definition [@A::m]\n\nvtable @B::vtable for B linkage=declaration []\n\ndefine @A::m(ptr nonnull dereferenceable(8) %this) -> int {\nentry:\n  %vp = load %this !invariant.group\n  %sa = fieldaddr %vp, 0\n  %fp = load %sa !invariant.load\n  %r = icall %fp(%this)\n  ret %r\n}\n\ndefine linkonce @helper() {\nentry:\n  ret\n}\n";
    let m = parse_ir(text).unwrap();
    assert_eq!(print_ir(&parse_ir(&print_ir(&m)).unwrap()), print_ir(&m));
    let f = m.function("A::m").unwrap();
    assert!(f.params[0].attrs.nonnull);
    assert_eq!(f.params[0].attrs.dereferenceable_bytes, Some(8));
    assert!(f.blocks[0].insts[0].invariant_group);
    assert!(f.blocks[0].insts[2].invariant_load);
    assert!(m.function("helper").unwrap().linkonce);
}

#[test]
fn parse_rejects_garbage() {
    assert!(parse_ir("module @t\n\ndefine @f() {\nentry:\n  %x = frobnicate 3\n}\n").is_err());
    assert!(parse_ir("not even a module").is_err());
}

#[test]
fn verifier_catches_broken_functions() {
    // Missing terminator.
    let m = parse_ir("module @t\n\ndefine @f() {\nentry:\n  %x = const 1\n}\n").unwrap();
    assert!(!verify_module(&m).is_empty());
    // Use of an undefined value.
    let m = parse_ir("module @t\n\ndefine @f() -> int {\nentry:\n  ret %nope\n}\n").unwrap();
    assert!(!verify_module(&m).is_empty());
    // Branch to an unknown label.
    let m = parse_ir("module @t\n\ndefine @f() {\nentry:\n  br missing\n}\n").unwrap();
    assert!(!verify_module(&m).is_empty());
}

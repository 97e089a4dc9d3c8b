use invar_core::corpus;
use invar_core::frontend::{lower_to_ir, parse_source, LoweringOptions};
use invar_core::interp::{diff_run, eval_module, DiffVerdict, EvalError, Mode, TraceEvent};
use invar_core::ir::parse_ir;
use invar_core::link::{link_modules, LinkError};
use invar_core::passes::PipelineConfig;

fn compile(src: &str) -> invar_core::ir::Module {
    lower_to_ir(&parse_source(src).unwrap(), &LoweringOptions::default()).unwrap()
}

fn checked(src: &str) -> invar_core::interp::ExecTrace {
    eval_module(&compile(src), "main", Mode::Checked).unwrap()
}

#[test]
fn constructor_chains_are_not_stale() {
    let trace = checked(corpus::REVERT);
    assert!(trace.ub_reports.is_empty(), "{:?}", trace.ub_reports);
    assert_eq!(trace.prints, vec![2, 10]);
}

#[test]
fn dynamic_dispatch_picks_the_override() {
    let src = "\
class A { virtual fn m() -> int; }
fn A::m() -> int { return 1; }
class B : A { virtual fn m() -> int; }
fn B::m() -> int { return 2; }
fn f(a: A*) -> int { return a.m(); }
fn main() {
  var a = new A;
  var b = new B;
  print(f(a));
  print(f(b));
}
";
    let trace = checked(src);
    assert!(trace.ub_reports.is_empty());
    assert_eq!(trace.prints, vec![1, 2]);
}

#[test]
fn use_after_free_halts_checked_and_traps_raw() {
    let src = "\
class A { int f; virtual fn m() -> int; }
fn A::m() -> int { return 1; }
fn main() {
  var a = new A;
  delete a;
  print(a.f);
  print(99);
}
";
    let m = compile(src);
    let trace = eval_module(&m, "main", Mode::Checked).unwrap();
    assert_eq!(trace.ub_reports.len(), 1);
    assert_eq!(trace.ub_reports[0].kind.as_str(), "use-after-free");
    assert!(trace.prints.is_empty()); // halted before the print
    assert!(matches!(eval_module(&m, "main", Mode::Raw), Err(EvalError::Trap(_))));
}

#[test]
fn double_delete_is_use_after_free() {
    let src = "\
class A { virtual fn m() -> int; }
fn A::m() -> int { return 1; }
fn main() {
  var a = new A;
  delete a;
  delete a;
}
";
    let trace = checked(src);
    assert_eq!(trace.ub_reports[0].kind.as_str(), "use-after-free");
}

#[test]
fn out_of_bounds_load_is_flagged() {
    let text = "module @t\n\ndefine @main() {\nentry:\n  %p = alloc 8\n  %a = fieldaddr %p, 64\n  %v = load %a\n  ret\n}\n";
    let m = parse_ir(text).unwrap();
    let trace = eval_module(&m, "main", Mode::Checked).unwrap();
    assert_eq!(trace.ub_reports[0].kind.as_str(), "oob");
}

#[test]
fn indirect_call_through_non_function_is_flagged() {
    let text = "module @t\n\ndefine @main() {\nentry:\n  %p = alloc 8\n  %v = load %p\n  %r = icall %v()\n  ret\n}\n";
    let m = parse_ir(text).unwrap();
    let trace = eval_module(&m, "main", Mode::Checked).unwrap();
    assert_eq!(trace.ub_reports[0].kind.as_str(), "invalid-indirect-callee");
}

#[test]
fn stale_loads_record_but_do_not_halt() {
    let trace = checked(corpus::UB_PLACEMENT);
    assert_eq!(trace.ub_reports[0].kind.as_str(), "stale-dynamic-info");
    // Execution continues: the stale dispatch still lands somewhere.
    assert_eq!(trace.prints.len(), 1);
}

#[test]
fn int_round_trip_preserves_the_address() {
    let src = "\
class A { int f; virtual fn m() -> int; }
fn A::m() -> int { return 6; }
fn main() {
  var a = new A;
  a.f = 11;
  var h = ptr2int(a);
  var p = int2ptr(h) as A;
  print(p.f);
  print(p.m());
  print(p == a);
}
";
    let trace = checked(src);
    assert!(trace.ub_reports.is_empty(), "{:?}", trace.ub_reports);
    assert_eq!(trace.prints, vec![11, 6, 1]);
}

#[test]
fn external_calls_are_traced_with_defaults() {
    let trace = checked(corpus::FOO);
    assert_eq!(trace.external_calls.len(), 1);
    let text = trace.to_text();
    assert!(text.contains("extcall external_fun"), "{text}");
    assert_eq!(trace.prints, vec![1]);
    match &trace.events[0] {
        TraceEvent::ExternalCall(sym, _) => assert_eq!(sym, "external_fun"),
        other => panic!("expected extcall first, got {other:?}"),
    }
}

#[test]
fn infinite_loops_hit_the_step_limit() {
    let text = "module @t\n\ndefine @main() {\nentry:\n  br loop\nloop:\n  br loop\n}\n";
    let m = parse_ir(text).unwrap();
    assert!(matches!(
        eval_module(&m, "main", Mode::Checked),
        Err(EvalError::StepLimit)
    ));
}

#[test]
fn missing_entry_is_an_error() {
    let m = compile(corpus::OUTLINE_CTOR_IMPL);
    assert!(matches!(
        eval_module(&m, "nope", Mode::Checked),
        Err(EvalError::MissingEntry(_))
    ));
}

#[test]
fn linking_merges_linkonce_and_vtable_linkage() {
    let user = compile(corpus::OUTLINE_CTOR_USER);
    let imp = compile(corpus::OUTLINE_CTOR_IMPL);
    let linked = link_modules(&[user.clone(), imp.clone()]).unwrap();
    // The ctor declaration is satisfied by the definition.
    assert!(linked.function("C::ctor").is_some());
    assert!(linked.declarations.iter().all(|d| d.name != "C::ctor"));
    // The definition-linkage vtable wins over the declaration.
    let vt = linked.vtable("C::vtable").unwrap();
    assert_eq!(vt.linkage, invar_core::ir::Linkage::Definition);
    assert!(!vt.slots.is_empty());

    // Duplicate strong definitions collide.
    assert!(matches!(
        link_modules(&[imp.clone(), imp]),
        Err(LinkError::DuplicateDefinition(_))
    ));

    // Inline (linkonce) methods merge silently.
    let inline_src = "class A {\n  virtual fn m() -> int { return 1; }\n}\nfn helper() -> int { return 2; }\nfn main() { }\n";
    let a = compile(inline_src);
    let mut b = compile("class A {\n  virtual fn m() -> int { return 1; }\n}\nfn other() -> int { return 3; }\n");
    b.name = "unit2".into();
    let linked = link_modules(&[a, b]).unwrap();
    assert_eq!(
        linked.functions.iter().filter(|f| f.name == "A::m").count(),
        1
    );
}

#[test]
fn diff_skips_ub_and_flags_nothing_on_clean_programs() {
    let cfg = PipelineConfig::default();
    assert!(matches!(
        diff_run(corpus::UB_PLACEMENT, &cfg).unwrap(),
        DiffVerdict::SkippedUb { .. }
    ));
    assert_eq!(diff_run(corpus::ARITH, &cfg).unwrap(), DiffVerdict::Equal);
}

//! Acceptance gate: one pass/fail line per criterion (run with
//! `--nocapture` to see them all).

use invar_core::corpus;
use invar_core::frontend::{lower_to_ir, parse_source, LoweringOptions};
use invar_core::interp::{
    diff_run_with_support, enumerate_fuzz_programs, eval_module, DiffVerdict, Mode,
};
use invar_core::ir::{parse_ir, print_ir, verify_module, Opcode};
use invar_core::passes::{
    fold_pointer_comparisons, lower_for_codegen, normalize_function, run_pipeline,
    simplify_intrinsics, PipelineConfig,
};

fn report(n: usize, desc: &str, ok: bool) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("{verdict} criterion {n}: {desc}");
    assert!(ok, "criterion {n} failed: {desc}");
}

fn compile(src: &str) -> invar_core::ir::Module {
    let opts = LoweringOptions::default();
    let prog = parse_source(src).expect("corpus program parses");
    lower_to_ir(&prog, &opts).expect("corpus program lowers")
}

#[test]
fn criterion_1_soundness_suite() {
    let cfg = PipelineConfig::default();
    let mut ok = true;
    for (name, src, support) in corpus::soundness_corpus() {
        match diff_run_with_support(src, &support, &cfg) {
            Ok(DiffVerdict::Equal) => {}
            other => {
                eprintln!("corpus {name}: {other:?}");
                ok = false;
            }
        }
    }
    let mut ub_free_equal = 0usize;
    for (i, src) in enumerate_fuzz_programs(0xC0FFEE, 2000).iter().enumerate() {
        match diff_run_with_support(src, &[], &cfg) {
            Ok(DiffVerdict::Equal) => ub_free_equal += 1,
            Ok(DiffVerdict::SkippedUb { .. }) if i % 2 == 1 => {}
            other => {
                eprintln!("fuzz program {i}: {other:?}\n{src}");
                ok = false;
            }
        }
    }
    report(
        1,
        "corpus and >=1000 fuzzed UB-free programs diff equal",
        ok && ub_free_equal >= 1000,
    );
}

#[test]
fn criterion_2_g_trap() {
    let cfg = PipelineConfig::default();
    let verdict = diff_run_with_support(corpus::G, &[], &cfg).unwrap();
    let mut m = compile(corpus::G);
    run_pipeline(&mut m, &cfg).unwrap();
    lower_for_codegen(&mut m);
    let trace = eval_module(&m, "main", Mode::Raw).unwrap();
    report(
        2,
        "optimized g() prints B's method in the taken branch",
        verdict == DiffVerdict::Equal && trace.prints == vec![1, 2],
    );
}

#[test]
fn criterion_3_devirtualization_counts() {
    let cfg = PipelineConfig::default();

    let mut bar = compile(corpus::BAR);
    let bar_report = run_pipeline(&mut bar, &cfg).unwrap();

    let mut ctor = compile(corpus::OUTLINE_CTOR_USER);
    let ctor_report = run_pipeline(&mut ctor, &cfg).unwrap();

    let mut multi = compile(corpus::MULTIPLE_CALLS);
    let multi_report = run_pipeline(&mut multi, &cfg).unwrap();
    let f = multi
        .functions
        .iter()
        .find(|f| f.name == "multiple_calls")
        .unwrap();
    let vptr_loads = f
        .blocks
        .iter()
        .flat_map(|b| b.insts.iter())
        .filter(|i| i.opcode == Opcode::Load && i.invariant_group)
        .count();

    let lax = LoweringOptions {
        strict_vtable_pointers: false,
        ..LoweringOptions::default()
    };
    let prog = parse_source(corpus::FOO).unwrap();
    let mut foo = lower_to_ir(&prog, &lax).unwrap();
    let foo_report = run_pipeline(&mut foo, &cfg).unwrap();

    report(
        3,
        "bar=2, outline ctor=1, multiple_calls forwards with one vptr load, lax foo=0",
        bar_report.devirtualized_calls == 2
            && ctor_report.devirtualized_calls == 1
            && multi_report.forwarded_invariant_loads >= 1
            && vptr_loads == 1
            && foo_report.devirtualized_calls == 0,
    );
}

#[test]
fn criterion_4_algebra_normalization() {
    let mut ok = true;
    for depth in 1..=4usize {
        for bits in 0..(1u32 << depth) {
            let mut body = String::new();
            let mut prev = "x".to_string();
            for i in 0..depth {
                let op = if bits >> i & 1 == 0 { "strip" } else { "launder" };
                body.push_str(&format!("  %t{i} = {op} %{prev}\n"));
                prev = format!("t{i}");
            }
            let text = format!(
                "module @alg\n\ndefine @f(ptr %x) -> ptr {{\nentry:\n{body}  ret %{prev}\n}}\n"
            );
            let mut m = parse_ir(&text).unwrap();
            let (_, steps) = normalize_function(&mut m.functions[0]);
            if steps > depth {
                eprintln!("term {depth}/{bits:b}: {steps} steps");
                ok = false;
            }
            // The returned value must be x, optionally behind one strip,
            // optionally behind one launder under that.
            let f = &m.functions[0];
            let ret = f.blocks[0].insts.last().unwrap();
            let mut v = ret.operands[0].as_value().unwrap().to_string();
            for expect in [Opcode::IntrinsicStrip, Opcode::IntrinsicLaunder] {
                if let Some(def) = f.def_of(&v) {
                    if def.opcode == expect {
                        v = def.operands[0].as_value().unwrap().to_string();
                    }
                }
            }
            if f.def_of(&v).is_some() || v != "x" {
                eprintln!("term {depth}/{bits:b} not in normal form:\n{}", print_ir(&m));
                ok = false;
            }
        }
    }

    let text = "module @alg\n\ndefine @g(ptr %x) -> int {\nentry:\n  %a = strip %x\n  %b = launder %x\n  %c = strip %b\n  %d = icmp eq %a, %c\n  ret %d\n}\n";
    let mut m = parse_ir(text).unwrap();
    simplify_intrinsics(&mut m);
    let r = fold_pointer_comparisons(&mut m);
    let f = &m.functions[0];
    let ret_val = f.blocks[0].insts.last().unwrap().operands[0]
        .as_value()
        .unwrap()
        .to_string();
    let folded = f
        .def_of(&ret_val)
        .is_some_and(|d| d.opcode == Opcode::ConstInt && d.operands[0].as_imm() == Some(1));
    report(
        4,
        "strip/launder terms normalize within depth steps; strip(x) == strip(launder(x)) folds true",
        ok && r.folded_comparisons >= 1 && folded,
    );
}

#[test]
fn criterion_5_null_undef_folding() {
    let text = "module @fold\n\ndefine @fold_null() -> ptr {\nentry:\n  %n = null\n  %a = launder %n\n  %b = strip %a\n  ret %b\n}\n\ndefine @fold_undef() -> ptr {\nentry:\n  %u = undef\n  %a = launder %u\n  %b = strip %a\n  ret %b\n}\n";
    let mut m = parse_ir(text).unwrap();
    simplify_intrinsics(&mut m);
    let golden = "module @fold\n\ndefine @fold_null() -> ptr {\nentry:\n  %n = null\n  ret %n\n}\n\ndefine @fold_undef() -> ptr {\nentry:\n  %u = undef\n  ret %u\n}\n";
    let printed = print_ir(&m);
    if printed != golden {
        eprintln!("got:\n{printed}");
    }
    report(5, "strip/launder of null and undef fold to the operand", printed == golden);
}

#[test]
fn criterion_6_artifact_freeness() {
    let cfg = PipelineConfig::default();
    let mut ok = true;
    for (name, src, support) in corpus::soundness_corpus() {
        let mut m = compile(src);
        run_pipeline(&mut m, &cfg).unwrap();
        lower_for_codegen(&mut m);
        let printed = print_ir(&m);
        for token in ["launder", "strip", "assume", "!invariant"] {
            if printed.contains(token) {
                eprintln!("{name}: artifact '{token}' survives lowering");
                ok = false;
            }
        }
        let diags = verify_module(&m);
        if !diags.is_empty() {
            eprintln!("{name}: {diags:?}");
            ok = false;
        }
        if diff_run_with_support(src, &support, &cfg).unwrap() != DiffVerdict::Equal {
            eprintln!("{name}: diff after lowering not equal");
            ok = false;
        }
    }
    report(6, "lowered corpus IR is artifact-free, verifies, and stays equal", ok);
}

#[test]
fn criterion_7_loop_hoisting() {
    let cfg = PipelineConfig::default();
    let mut m = compile(corpus::HOIST_LOOP);
    run_pipeline(&mut m, &cfg).unwrap();
    let trace = eval_module(&m, "main", Mode::Checked).unwrap();
    report(
        7,
        "1000-iteration virtual call loop executes one vptr load and one slot load",
        trace.invariant_group_loads_executed == 1
            && trace.invariant_loads_executed == 1
            && trace.prints == vec![5000]
            && trace.ub_reports.is_empty(),
    );
}

#[test]
fn criterion_8_ub_detection() {
    let stale = eval_module(&compile(corpus::UB_PLACEMENT), "main", Mode::Checked).unwrap();
    let fixed = eval_module(&compile(corpus::UB_PLACEMENT_FIXED), "main", Mode::Checked).unwrap();
    let flagged = stale
        .ub_reports
        .iter()
        .any(|r| r.kind.as_str() == "stale-dynamic-info");
    report(
        8,
        "stale-dynamic-info on old pointer after placement new, clean when laundered",
        flagged && fixed.ub_reports.is_empty() && fixed.prints == vec![2],
    );
}

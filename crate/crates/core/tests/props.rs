use invar_core::analysis::{alias_query, AliasResult};
use invar_core::frontend::{lower_to_ir, parse_source, LoweringOptions};
use invar_core::interp::{diff_run, enumerate_fuzz_programs, DiffVerdict};
use invar_core::ir::{parse_ir, print_ir};
use invar_core::passes::PipelineConfig;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fuzzed_programs_compile(seed in 0u64..10_000, idx in 0usize..16) {
        let src = &enumerate_fuzz_programs(seed, idx + 1)[idx];
        let prog = parse_source(src).unwrap();
        lower_to_ir(&prog, &LoweringOptions::default()).unwrap();
    }

    #[test]
    fn generation_is_deterministic(seed in 0u64..10_000) {
        prop_assert_eq!(
            enumerate_fuzz_programs(seed, 8),
            enumerate_fuzz_programs(seed, 8)
        );
    }

    #[test]
    fn lowered_ir_round_trips(seed in 0u64..10_000, idx in 0usize..8) {
        let src = &enumerate_fuzz_programs(seed, idx + 1)[idx];
        let m = lower_to_ir(&parse_source(src).unwrap(), &LoweringOptions::default()).unwrap();
        let printed = print_ir(&m);
        prop_assert_eq!(&m, &parse_ir(&printed).unwrap());
    }

    #[test]
    fn diff_never_mismatches(seed in 0u64..10_000, idx in 0usize..8) {
        let src = &enumerate_fuzz_programs(seed, idx + 1)[idx];
        let verdict = diff_run(src, &PipelineConfig::default()).unwrap();
        prop_assert!(!matches!(verdict, DiffVerdict::Mismatch { .. }), "{:?}\n{}", verdict, src);
    }

    #[test]
    fn alias_query_is_symmetric(which in 0usize..3, other in 0usize..3) {
        let text = "module @t\n\ndefine @f(ptr %p) -> ptr {\nentry:\n  %a = fieldaddr %p, 8\n  %l = launder %p\n  %b = fieldaddr %l, 8\n  %q = alloc 16\n  ret %p\n}\n";
        let m = parse_ir(text).unwrap();
        let f = &m.functions[0];
        let names = ["a", "b", "q"];
        let (x, y) = (names[which], names[other]);
        prop_assert_eq!(alias_query(f, x, y), alias_query(f, y, x));
        if which == other {
            prop_assert_eq!(alias_query(f, x, y), AliasResult::MustAlias);
        }
    }
}

#[test]
fn same_address_through_launder_must_alias() {
    let text = "module @t\n\ndefine @f(ptr %p) -> ptr {\nentry:\n  %a = fieldaddr %p, 8\n  %l = launder %p\n  %b = fieldaddr %l, 8\n  %q = alloc 16\n  %c = fieldaddr %q, 8\n  ret %p\n}\n";
    let m = parse_ir(text).unwrap();
    let f = &m.functions[0];
    assert_eq!(alias_query(f, "a", "b"), AliasResult::MustAlias);
    // A parameter could point anywhere, so only alloc-rooted pairs separate.
    assert_eq!(alias_query(f, "a", "c"), AliasResult::MayAlias);
    assert_eq!(alias_query(f, "q", "c"), AliasResult::NoAlias); // disjoint slots
    assert_eq!(alias_query(f, "p", "a"), AliasResult::MayAlias);
}

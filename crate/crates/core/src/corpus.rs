//! Built-in MiniOO example programs used by the test suite and the `stats`
//! tooling.

pub const TEST: &str = include_str!("../corpus/test.moo");
pub const G: &str = include_str!("../corpus/g.moo");
pub const FOO: &str = include_str!("../corpus/foo.moo");
pub const BAR: &str = include_str!("../corpus/bar.moo");
pub const MULTIPLE_CALLS: &str = include_str!("../corpus/multiple_calls.moo");
pub const REVERT: &str = include_str!("../corpus/revert.moo");
pub const DSE: &str = include_str!("../corpus/dse.moo");
pub const LAUNDER_CMP: &str = include_str!("../corpus/launder_cmp.moo");
pub const OUTLINE_CTOR_USER: &str = include_str!("../corpus/outline_ctor_user.moo");
pub const OUTLINE_CTOR_IMPL: &str = include_str!("../corpus/outline_ctor_impl.moo");
pub const HOIST_LOOP: &str = include_str!("../corpus/hoist_loop.moo");
pub const UB_PLACEMENT: &str = include_str!("../corpus/ub_placement.moo");
pub const UB_PLACEMENT_FIXED: &str = include_str!("../corpus/ub_placement_fixed.moo");
pub const ARITH: &str = include_str!("../corpus/arith.moo");

/// Every UB-free corpus program with the support units it links against,
/// for differential testing. `UB_PLACEMENT` is deliberately absent: it is
/// the negative example and carries no soundness obligation.
pub fn soundness_corpus() -> Vec<(&'static str, &'static str, Vec<&'static str>)> {
    vec![
        ("test", TEST, vec![]),
        ("g", G, vec![]),
        ("foo", FOO, vec![]),
        ("bar", BAR, vec![]),
        ("multiple_calls", MULTIPLE_CALLS, vec![]),
        ("revert", REVERT, vec![]),
        ("dse", DSE, vec![]),
        ("launder_cmp", LAUNDER_CMP, vec![]),
        ("outline_ctor_user", OUTLINE_CTOR_USER, vec![OUTLINE_CTOR_IMPL]),
        ("hoist_loop", HOIST_LOOP, vec![]),
        ("ub_placement_fixed", UB_PLACEMENT_FIXED, vec![]),
        ("arith", ARITH, vec![]),
    ]
}

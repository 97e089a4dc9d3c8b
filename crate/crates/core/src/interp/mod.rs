//! Fat-pointer reference interpreter, differential runner, and program
//! fuzzer.

mod diff;
mod fuzz;
mod machine;

pub use diff::{diff_run, diff_run_with_support, DiffError, DiffVerdict};
pub use fuzz::enumerate_fuzz_programs;
pub use machine::{
    eval_module, EvalError, ExecTrace, Generation, Mode, RuntimePointer, TraceEvent, UBReport,
    UbKind, Value,
};

//! Python bindings: compile MiniOO, optimize/link/print IR, interpret, and
//! diff-test from Python.

use invar_core::frontend::{self, lower_to_ir, parse_source, LoweringOptions};
use invar_core::interp::{
    diff_run_with_support, enumerate_fuzz_programs, eval_module, DiffVerdict, Mode,
};
use invar_core::ir::{parse_ir, print_ir, verify_module, Module};
use invar_core::link::link_modules;
use invar_core::passes::{lower_for_codegen, run_pipeline, PassReport, PipelineConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use std::collections::HashMap;

fn options(strict: bool, force_emit: bool) -> LoweringOptions {
    LoweringOptions {
        strict_vtable_pointers: strict,
        force_emit_vtables: force_emit,
    }
}

fn config(passes: Option<Vec<String>>) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    if let Some(p) = passes {
        cfg.passes = p;
    }
    cfg
}

fn compile_module(src: &str, strict: bool, force_emit: bool) -> PyResult<Module> {
    let prog = parse_source(src).map_err(|e| PyValueError::new_err(e.to_string()))?;
    lower_to_ir(&prog, &options(strict, force_emit))
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn report_dict(r: &PassReport) -> HashMap<&'static str, usize> {
    HashMap::from([
        ("devirtualized_calls", r.devirtualized_calls),
        ("forwarded_invariant_loads", r.forwarded_invariant_loads),
        ("folded_comparisons", r.folded_comparisons),
        ("hoisted_loads", r.hoisted_loads),
        ("eliminated_stores", r.eliminated_stores),
        ("removed_intrinsics", r.removed_intrinsics),
    ])
}

/// Lower MiniOO source to textual IR.
#[pyfunction]
#[pyo3(signature = (source, strict=true, force_emit_vtables=false))]
fn compile_source(source: &str, strict: bool, force_emit_vtables: bool) -> PyResult<String> {
    Ok(print_ir(&compile_module(source, strict, force_emit_vtables)?))
}

/// Run the pass pipeline over textual IR; returns (ir, report).
#[pyfunction]
#[pyo3(signature = (ir, passes=None, lower=true))]
fn optimize_ir(
    ir: &str,
    passes: Option<Vec<String>>,
    lower: bool,
) -> PyResult<(String, HashMap<&'static str, usize>)> {
    let mut m = parse_ir(ir).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let mut report =
        run_pipeline(&mut m, &config(passes)).map_err(PyValueError::new_err)?;
    if lower {
        report.merge(&lower_for_codegen(&mut m));
    }
    Ok((print_ir(&m), report_dict(&report)))
}

/// Interpret textual IR; returns the trace text. `mode` is "checked" or
/// "raw".
#[pyfunction]
#[pyo3(signature = (ir, mode="checked", entry="main"))]
fn run_ir(ir: &str, mode: &str, entry: &str) -> PyResult<String> {
    let mode = match mode {
        "checked" => Mode::Checked,
        "raw" => Mode::Raw,
        other => return Err(PyValueError::new_err(format!("unknown mode '{other}'"))),
    };
    let m = parse_ir(ir).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let trace = eval_module(&m, entry, mode).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(trace.to_text())
}

/// Differential test of MiniOO source; returns "equal", "skipped-ub", or
/// "mismatch". Extra units in `support` are linked before execution.
#[pyfunction]
#[pyo3(signature = (source, support=vec![]))]
fn diff_source(source: &str, support: Vec<String>) -> PyResult<String> {
    let refs: Vec<&str> = support.iter().map(|s| s.as_str()).collect();
    let verdict = diff_run_with_support(source, &refs, &PipelineConfig::default())
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(match verdict {
        DiffVerdict::Equal => "equal".to_string(),
        DiffVerdict::SkippedUb { .. } => "skipped-ub".to_string(),
        DiffVerdict::Mismatch { .. } => "mismatch".to_string(),
    })
}

/// Link textual IR modules; declarations resolve against definitions.
#[pyfunction]
fn link_ir(modules: Vec<String>) -> PyResult<String> {
    let mods: Vec<Module> = modules
        .iter()
        .map(|t| parse_ir(t).map_err(|e| PyValueError::new_err(e.to_string())))
        .collect::<PyResult<_>>()?;
    let linked = link_modules(&mods).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(print_ir(&linked))
}

/// Verifier diagnostics for textual IR (empty list means well formed).
#[pyfunction]
fn verify_ir(ir: &str) -> PyResult<Vec<String>> {
    let m = parse_ir(ir).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(verify_module(&m).iter().map(|d| d.message.clone()).collect())
}

/// The vtables a unit would emit, as (name, class, linkage, slots).
#[pyfunction]
#[pyo3(signature = (source, force_emit_vtables=false))]
fn emit_vtables(
    source: &str,
    force_emit_vtables: bool,
) -> PyResult<Vec<(String, String, String, Vec<String>)>> {
    let prog = parse_source(source).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let vts = frontend::emit_vtables(&prog, &options(true, force_emit_vtables))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(vts
        .into_iter()
        .map(|v| {
            (
                v.name,
                v.class_name,
                v.linkage.as_str().to_string(),
                v.slots,
            )
        })
        .collect())
}

/// Deterministic fuzz corpus for a seed.
#[pyfunction]
#[pyo3(signature = (seed=0, count=100))]
fn fuzz_programs(seed: u64, count: usize) -> Vec<String> {
    enumerate_fuzz_programs(seed, count)
}

#[pymodule]
fn invar_opt(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(compile_source, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_ir, m)?)?;
    m.add_function(wrap_pyfunction!(run_ir, m)?)?;
    m.add_function(wrap_pyfunction!(diff_source, m)?)?;
    m.add_function(wrap_pyfunction!(link_ir, m)?)?;
    m.add_function(wrap_pyfunction!(verify_ir, m)?)?;
    m.add_function(wrap_pyfunction!(emit_vtables, m)?)?;
    m.add_function(wrap_pyfunction!(fuzz_programs, m)?)?;
    Ok(())
}

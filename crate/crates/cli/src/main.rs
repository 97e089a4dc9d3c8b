//! invar-opt: compile MiniOO, optimize and link IR, interpret, and
//! diff-test.
//!
//! Exit codes: 0 success, 1 diagnostics or runtime errors, 2 diff mismatch,
//! 3 usage error.

use clap::{Args, Parser, Subcommand};
use invar_core::frontend::{lower_to_ir, parse_source, LoweringOptions};
use invar_core::interp::{diff_run_with_support, enumerate_fuzz_programs, eval_module, DiffVerdict, Mode};
use invar_core::ir::{parse_ir, print_ir, verify_module, Module};
use invar_core::link::link_modules;
use invar_core::passes::{lower_for_codegen, run_pipeline, PipelineConfig};
use std::path::Path;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "invar-opt", version, about = "Invariant-group IR toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct FrontendFlags {
    /// Emit invariant-group metadata and intrinsics (default on).
    #[arg(long = "strict-vtable-pointers", overrides_with = "no_strict")]
    strict: bool,
    #[arg(long = "no-strict-vtable-pointers", id = "no_strict")]
    no_strict: bool,
    /// Emit optimization-only vtables even with missing method bodies.
    #[arg(long)]
    force_emit_vtables: bool,
}

impl FrontendFlags {
    fn options(&self) -> LoweringOptions {
        LoweringOptions {
            strict_vtable_pointers: !self.no_strict,
            force_emit_vtables: self.force_emit_vtables,
        }
    }
}

#[derive(Args, Clone)]
struct PipelineFlags {
    /// Comma-separated pass list overriding the default pipeline.
    #[arg(long, value_delimiter = ',')]
    passes: Vec<String>,
    #[arg(long, default_value_t = 100)]
    inline_threshold: usize,
    #[arg(long, default_value_t = 4)]
    fixpoint_iterations: usize,
}

impl PipelineFlags {
    fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig {
            inline_threshold: self.inline_threshold,
            fixpoint_iterations: self.fixpoint_iterations,
            ..PipelineConfig::default()
        };
        if !self.passes.is_empty() {
            cfg.passes = self.passes.clone();
        }
        cfg
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Lower a MiniOO source file to textual IR.
    Compile {
        #[command(flatten)]
        fe: FrontendFlags,
        #[arg(short, long)]
        output: Option<String>,
        file: String,
    },
    /// Run the pass pipeline over a module and print IR plus a report.
    Opt {
        #[command(flatten)]
        fe: FrontendFlags,
        #[command(flatten)]
        pl: PipelineFlags,
        /// Skip the final lowering that erases intrinsics and metadata.
        #[arg(long)]
        no_lower: bool,
        #[arg(short, long)]
        output: Option<String>,
        file: String,
    },
    /// Interpret a program and print its trace.
    Run {
        #[command(flatten)]
        fe: FrontendFlags,
        /// checked or raw
        #[arg(long, default_value = "checked")]
        mode: String,
        #[arg(long, default_value = "main")]
        entry: String,
        file: String,
    },
    /// Differential test: unoptimized checked run vs optimized raw run.
    Diff {
        #[command(flatten)]
        pl: PipelineFlags,
        /// Primary unit first, then support units linked before execution.
        files: Vec<String>,
    },
    /// Print the pipeline's PassReport for a program.
    Stats {
        #[command(flatten)]
        fe: FrontendFlags,
        #[command(flatten)]
        pl: PipelineFlags,
        file: String,
    },
    /// Link several modules, resolving declarations against definitions.
    Link {
        #[command(flatten)]
        fe: FrontendFlags,
        #[arg(short, long)]
        output: Option<String>,
        files: Vec<String>,
    },
    /// Generate programs and diff-run each one.
    Fuzz {
        #[command(flatten)]
        pl: PipelineFlags,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

fn load_module(path: &str, opts: &LoweringOptions) -> Result<Module, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    if Path::new(path).extension().is_some_and(|x| x == "moo") {
        let prog = parse_source(&text).map_err(|e| format!("{path}: {e}"))?;
        lower_to_ir(&prog, opts).map_err(|e| format!("{path}: {e}"))
    } else {
        parse_ir(&text).map_err(|e| format!("{path}: {e}"))
    }
}

fn emit(ir: &str, output: &Option<String>) -> Result<(), String> {
    match output {
        Some(path) => std::fs::write(path, ir).map_err(|e| format!("{path}: {e}")),
        None => {
            print!("{ir}");
            Ok(())
        }
    }
}

fn read_source(path: &str) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))
}

fn real_main() -> Result<u8, String> {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help/version are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return Ok(code);
        }
    };

    match cli.cmd {
        Cmd::Compile { fe, output, file } => {
            let m = load_module(&file, &fe.options())?;
            emit(&print_ir(&m), &output)?;
        }
        Cmd::Opt {
            fe,
            pl,
            no_lower,
            output,
            file,
        } => {
            let mut m = load_module(&file, &fe.options())?;
            let mut report = run_pipeline(&mut m, &pl.config())?;
            if !no_lower {
                report.merge(&lower_for_codegen(&mut m));
            }
            let diags = verify_module(&m);
            if !diags.is_empty() {
                return Err(diags
                    .iter()
                    .map(|d| d.message.clone())
                    .collect::<Vec<_>>()
                    .join("\n"));
            }
            emit(&print_ir(&m), &output)?;
            eprintln!("{report}");
        }
        Cmd::Run { fe, mode, entry, file } => {
            let mode = match mode.as_str() {
                "checked" => Mode::Checked,
                "raw" => Mode::Raw,
                other => return Err(format!("unknown mode '{other}'")),
            };
            let m = load_module(&file, &fe.options())?;
            let trace = eval_module(&m, &entry, mode).map_err(|e| e.to_string())?;
            print!("{}", trace.to_text());
        }
        Cmd::Diff { pl, files } => {
            let [primary, support @ ..] = &files[..] else {
                eprintln!("diff needs at least one file");
                return Ok(3);
            };
            let primary = read_source(primary)?;
            let support: Vec<String> =
                support.iter().map(|p| read_source(p)).collect::<Result<_, _>>()?;
            let refs: Vec<&str> = support.iter().map(|s| s.as_str()).collect();
            match diff_run_with_support(&primary, &refs, &pl.config())
                .map_err(|e| e.to_string())?
            {
                DiffVerdict::Equal => println!("equal"),
                DiffVerdict::SkippedUb { reference } => {
                    println!("skipped: reference run has undefined behavior");
                    for r in &reference.ub_reports {
                        println!("  {} @{}", r.kind.as_str(), r.location);
                    }
                }
                DiffVerdict::Mismatch { reference, optimized } => {
                    println!("MISMATCH");
                    println!("--- reference\n{}", reference.to_text());
                    println!("--- optimized\n{}", optimized.to_text());
                    return Ok(2);
                }
            }
        }
        Cmd::Stats { fe, pl, file } => {
            let mut m = load_module(&file, &fe.options())?;
            let report = run_pipeline(&mut m, &pl.config())?;
            println!("{report}");
        }
        Cmd::Link { fe, output, files } => {
            if files.is_empty() {
                eprintln!("link needs at least one file");
                return Ok(3);
            }
            let opts = fe.options();
            let mods: Vec<Module> = files
                .iter()
                .map(|p| load_module(p, &opts))
                .collect::<Result<_, _>>()?;
            let linked = link_modules(&mods).map_err(|e| e.to_string())?;
            emit(&print_ir(&linked), &output)?;
        }
        Cmd::Fuzz { pl, seed, count } => {
            let seed = match std::env::var("INVAR_OPT_SEED") {
                Ok(s) => s.parse::<u64>().map_err(|_| "INVAR_OPT_SEED must be an integer".to_string())?,
                Err(_) => seed,
            };
            let cfg = pl.config();
            let mut equal = 0usize;
            let mut skipped = 0usize;
            for (i, src) in enumerate_fuzz_programs(seed, count).iter().enumerate() {
                match diff_run_with_support(src, &[], &cfg).map_err(|e| e.to_string())? {
                    DiffVerdict::Equal => equal += 1,
                    DiffVerdict::SkippedUb { .. } => skipped += 1,
                    DiffVerdict::Mismatch { reference, optimized } => {
                        println!("MISMATCH on program {i} (seed {seed})");
                        println!("{src}");
                        println!("--- reference\n{}", reference.to_text());
                        println!("--- optimized\n{}", optimized.to_text());
                        return Ok(2);
                    }
                }
            }
            println!("fuzz: {count} programs, {equal} equal, {skipped} skipped (ub)");
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

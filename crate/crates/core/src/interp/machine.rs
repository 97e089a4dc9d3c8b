//! The fat-pointer machine.
//!
//! Pointers are (allocation, offset, generation) triples. Launder mints a
//! fresh generation per allocation; strip yields the distinguished STRIPPED
//! generation. Memory is slot-granular (8-byte slots holding tagged values,
//! not encoded bytes) and each allocation tracks an epoch bumped by every
//! invariant-group store.
//!
//! Staleness: an invariant-group load through generation g is flagged when
//! the allocation's epoch moved past g's birth epoch and g was not itself
//! the last generation to store. The exception is what lets a constructor
//! store a vptr and then service virtual calls through the same pointer,
//! while a pointer predating a placement-new through a laundered pointer is
//! caught: the classic stale "old reference" case.

use crate::ir::{Function, Module, Opcode, Operand, Type, SLOT_SIZE};
use std::collections::HashMap;
use std::fmt::Write as _;
use thiserror::Error;

const STEP_LIMIT: usize = 4_000_000;
const DEPTH_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Checked,
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Generation {
    Tag(u64),
    Stripped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RuntimePointer {
    pub alloc_id: usize,
    pub offset: i64,
    pub generation: Generation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Ptr(RuntimePointer),
    Fn(String),
    Null,
    Undef,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UbKind {
    StaleDynamicInfo,
    UseAfterFree,
    Oob,
    InvalidIndirectCallee,
}

impl UbKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            UbKind::StaleDynamicInfo => "stale-dynamic-info",
            UbKind::UseAfterFree => "use-after-free",
            UbKind::Oob => "oob",
            UbKind::InvalidIndirectCallee => "invalid-indirect-callee",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UBReport {
    pub kind: UbKind,
    /// `function:block:inst_index`
    pub location: String,
    pub alloc_id: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceEvent {
    Print(i64),
    ExternalCall(String, Vec<String>),
    Ub(UBReport),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecTrace {
    /// All observable events, in order.
    pub events: Vec<TraceEvent>,
    pub prints: Vec<i64>,
    pub external_calls: Vec<(String, Vec<String>)>,
    pub ub_reports: Vec<UBReport>,
    /// Executed loads carrying each metadata flag, for hoisting tests.
    pub invariant_group_loads_executed: usize,
    pub invariant_loads_executed: usize,
}

impl ExecTrace {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            match e {
                TraceEvent::Print(n) => {
                    let _ = writeln!(out, "print {n}");
                }
                TraceEvent::ExternalCall(sym, args) => {
                    let _ = write!(out, "extcall {sym}");
                    for a in args {
                        let _ = write!(out, " {a}");
                    }
                    out.push('\n');
                }
                TraceEvent::Ub(r) => {
                    let _ = writeln!(out, "ub {} @{}", r.kind.as_str(), r.location);
                }
            }
        }
        out
    }

    /// Prints and external calls only: the part that must survive
    /// optimization.
    pub fn observable(&self) -> Vec<&TraceEvent> {
        self.events
            .iter()
            .filter(|e| !matches!(e, TraceEvent::Ub(_)))
            .collect()
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("trap: {} @{}", .0.kind.as_str(), .0.location)]
    Trap(UBReport),
    #[error("no entry function '{0}'")]
    MissingEntry(String),
    #[error("step limit exceeded")]
    StepLimit,
    #[error("recursion depth exceeded")]
    DepthLimit,
    #[error("malformed program: {0}")]
    BadIr(String),
}

struct Allocation {
    slots: Vec<Value>,
    live: bool,
    epoch: u64,
    next_tag: u64,
    birth: HashMap<u64, u64>,
    last_store_tag: Option<u64>,
    read_only: bool,
}

impl Allocation {
    fn new(slots: usize, read_only: bool) -> Allocation {
        Allocation {
            slots: vec![Value::Int(0); slots],
            live: true,
            epoch: 0,
            next_tag: 1,
            birth: HashMap::from([(0, 0)]),
            last_store_tag: None,
            read_only,
        }
    }
}

/// Signals that unwind the interpretation.
enum Stop {
    /// UB recorded in checked mode; execution halts gracefully.
    Halt,
    Err(EvalError),
}

struct Machine<'a> {
    m: &'a Module,
    mode: Mode,
    heap: Vec<Allocation>,
    vtable_allocs: HashMap<String, usize>,
    trace: ExecTrace,
    steps: usize,
}

pub fn eval_module(m: &Module, entry: &str, mode: Mode) -> Result<ExecTrace, EvalError> {
    let Some(f) = m.function(entry) else {
        return Err(EvalError::MissingEntry(entry.to_string()));
    };
    let mut mach = Machine {
        m,
        mode,
        heap: Vec::new(),
        vtable_allocs: HashMap::new(),
        trace: ExecTrace::default(),
        steps: 0,
    };
    for vt in &m.vtables {
        let id = mach.heap.len();
        let mut alloc = Allocation::new(vt.slots.len(), true);
        for (i, sym) in vt.slots.iter().enumerate() {
            alloc.slots[i] = Value::Fn(sym.clone());
        }
        mach.heap.push(alloc);
        mach.vtable_allocs.insert(vt.name.clone(), id);
    }
    match mach.call(f, Vec::new(), 0) {
        Ok(_) => Ok(mach.trace),
        Err(Stop::Halt) => Ok(mach.trace),
        Err(Stop::Err(e)) => Err(e),
    }
}

impl<'a> Machine<'a> {
    fn ub(&mut self, kind: UbKind, loc: String, alloc_id: Option<usize>) -> Result<(), Stop> {
        let report = UBReport {
            kind,
            location: loc,
            alloc_id,
        };
        match self.mode {
            Mode::Checked => {
                self.trace.events.push(TraceEvent::Ub(report.clone()));
                self.trace.ub_reports.push(report.clone());
                if kind == UbKind::StaleDynamicInfo {
                    // Not a trap: execution proceeds, the report just marks
                    // the program as outside the soundness contract.
                    Ok(())
                } else {
                    Err(Stop::Halt)
                }
            }
            Mode::Raw => {
                if kind == UbKind::StaleDynamicInfo {
                    Ok(())
                } else {
                    Err(Stop::Err(EvalError::Trap(report)))
                }
            }
        }
    }

    fn render_arg(&self, v: &Value) -> String {
        match v {
            Value::Int(n) => n.to_string(),
            Value::Ptr(p) => format!("a{}+{}", p.alloc_id, p.offset),
            Value::Fn(s) => format!("@{s}"),
            Value::Null => "null".into(),
            Value::Undef => "undef".into(),
        }
    }

    fn call(&mut self, f: &'a Function, args: Vec<Value>, depth: usize) -> Result<Option<Value>, Stop> {
        if depth > DEPTH_LIMIT {
            return Err(Stop::Err(EvalError::DepthLimit));
        }
        if args.len() != f.params.len() {
            return Err(Stop::Err(EvalError::BadIr(format!(
                "arity mismatch calling '{}'",
                f.name
            ))));
        }
        let mut env: HashMap<String, Value> = HashMap::new();
        for (p, a) in f.params.iter().zip(args) {
            env.insert(p.name.clone(), a);
        }
        let mut block = 0usize;
        let mut prev_label: Option<String> = None;
        loop {
            // Phase 1: evaluate phis against the incoming edge atomically.
            let b = &f.blocks[block];
            let mut phi_updates: Vec<(String, Value)> = Vec::new();
            for inst in &b.insts {
                if inst.opcode != Opcode::Phi {
                    break;
                }
                let Some(from) = &prev_label else {
                    return Err(Stop::Err(EvalError::BadIr("phi in entry block".into())));
                };
                let mut val = None;
                for pair in inst.operands.chunks(2) {
                    if pair.len() == 2 && pair[1].as_label() == Some(from.as_str()) {
                        val = Some(self.operand_value(&pair[0], &env)?);
                    }
                }
                let Some(val) = val else {
                    return Err(Stop::Err(EvalError::BadIr(format!(
                        "phi without incoming for '{from}'"
                    ))));
                };
                phi_updates.push((inst.result.clone().unwrap_or_default(), val));
            }
            for (k, v) in phi_updates {
                env.insert(k, v);
            }

            let first_non_phi = b.insts.iter().position(|i| i.opcode != Opcode::Phi).unwrap_or(b.insts.len());
            let mut next: Option<String> = None;
            for (ii, inst) in b.insts.iter().enumerate().skip(first_non_phi) {
                self.steps += 1;
                if self.steps > STEP_LIMIT {
                    return Err(Stop::Err(EvalError::StepLimit));
                }
                let loc = || format!("{}:{}:{}", f.name, b.label, ii);
                match inst.opcode {
                    Opcode::Br => {
                        next = Some(inst.operands[0].as_label().unwrap_or_default().to_string());
                        break;
                    }
                    Opcode::CondBr => {
                        let c = self.operand_value(&inst.operands[0], &env)?;
                        let taken = match c {
                            Value::Int(n) => n != 0,
                            Value::Null => false,
                            Value::Ptr(_) | Value::Fn(_) => true,
                            Value::Undef => {
                                return Err(Stop::Err(EvalError::BadIr("branch on undef".into())))
                            }
                        };
                        let idx = if taken { 1 } else { 2 };
                        next = Some(inst.operands[idx].as_label().unwrap_or_default().to_string());
                        break;
                    }
                    Opcode::Ret => {
                        let v = match inst.operands.first() {
                            Some(op) => Some(self.operand_value(op, &env)?),
                            None => None,
                        };
                        return Ok(v);
                    }
                    _ => {
                        if let Some(v) = self.step(inst, &mut env, depth, &loc())? {
                            if let Some(r) = &inst.result {
                                env.insert(r.clone(), v);
                            }
                        }
                    }
                }
            }
            match next {
                Some(label) => {
                    let Some(idx) = f.block_index(&label) else {
                        return Err(Stop::Err(EvalError::BadIr(format!("missing block '{label}'"))));
                    };
                    prev_label = Some(b.label.clone());
                    block = idx;
                }
                None => return Ok(None), // fell off the end; treat as void return
            }
        }
    }

    fn operand_value(&self, op: &Operand, env: &HashMap<String, Value>) -> Result<Value, Stop> {
        match op {
            Operand::Value(v) => env
                .get(v)
                .cloned()
                .ok_or_else(|| Stop::Err(EvalError::BadIr(format!("undefined value '%{v}'")))),
            Operand::Imm(n) => Ok(Value::Int(*n)),
            _ => Err(Stop::Err(EvalError::BadIr("unexpected operand".into()))),
        }
    }

    /// Resolve a pointer for a memory access of one slot.
    fn check_access(
        &mut self,
        v: &Value,
        loc: &str,
        writing: bool,
    ) -> Result<Option<(usize, usize)>, Stop> {
        let p = match v {
            Value::Ptr(p) => *p,
            _ => {
                self.ub(UbKind::Oob, loc.to_string(), None)?;
                return Ok(None);
            }
        };
        if p.alloc_id >= self.heap.len() {
            self.ub(UbKind::Oob, loc.to_string(), None)?;
            return Ok(None);
        }
        let alloc = &self.heap[p.alloc_id];
        if !alloc.live {
            self.ub(UbKind::UseAfterFree, loc.to_string(), Some(p.alloc_id))?;
            return Ok(None);
        }
        if writing && alloc.read_only {
            self.ub(UbKind::Oob, loc.to_string(), Some(p.alloc_id))?;
            return Ok(None);
        }
        if p.offset < 0 || p.offset % SLOT_SIZE != 0 {
            self.ub(UbKind::Oob, loc.to_string(), Some(p.alloc_id))?;
            return Ok(None);
        }
        let slot = (p.offset / SLOT_SIZE) as usize;
        if slot >= alloc.slots.len() {
            self.ub(UbKind::Oob, loc.to_string(), Some(p.alloc_id))?;
            return Ok(None);
        }
        Ok(Some((p.alloc_id, slot)))
    }

    fn step(
        &mut self,
        inst: &crate::ir::Instruction,
        env: &mut HashMap<String, Value>,
        depth: usize,
        loc: &str,
    ) -> Result<Option<Value>, Stop> {
        match inst.opcode {
            Opcode::Alloc => {
                let size = inst.operands[0].as_imm().unwrap_or(0).max(0);
                let slots = (size as usize).div_ceil(SLOT_SIZE as usize);
                let id = self.heap.len();
                self.heap.push(Allocation::new(slots, false));
                Ok(Some(Value::Ptr(RuntimePointer {
                    alloc_id: id,
                    offset: 0,
                    generation: Generation::Tag(0),
                })))
            }
            Opcode::Load => {
                let pv = self.operand_value(&inst.operands[0], env)?;
                if inst.invariant_group {
                    self.trace.invariant_group_loads_executed += 1;
                }
                if inst.invariant_load {
                    self.trace.invariant_loads_executed += 1;
                }
                let Some((id, slot)) = self.check_access(&pv, loc, false)? else {
                    return Ok(Some(Value::Undef));
                };
                if self.mode == Mode::Checked && inst.invariant_group {
                    if let Value::Ptr(p) = &pv {
                        if let Generation::Tag(t) = p.generation {
                            let alloc = &self.heap[id];
                            let birth = alloc.birth.get(&t).copied().unwrap_or(0);
                            let excused = alloc.last_store_tag == Some(t);
                            if birth != alloc.epoch && !excused {
                                self.ub(UbKind::StaleDynamicInfo, loc.to_string(), Some(id))?;
                            }
                        }
                    }
                }
                Ok(Some(self.heap[id].slots[slot].clone()))
            }
            Opcode::Store => {
                let v = self.operand_value(&inst.operands[0], env)?;
                let pv = self.operand_value(&inst.operands[1], env)?;
                let Some((id, slot)) = self.check_access(&pv, loc, true)? else {
                    return Ok(None);
                };
                let alloc = &mut self.heap[id];
                alloc.slots[slot] = v;
                if inst.invariant_group {
                    alloc.epoch += 1;
                    alloc.last_store_tag = match &pv {
                        Value::Ptr(p) => match p.generation {
                            Generation::Tag(t) => Some(t),
                            Generation::Stripped => None,
                        },
                        _ => None,
                    };
                }
                Ok(None)
            }
            Opcode::FieldAddr => {
                let pv = self.operand_value(&inst.operands[0], env)?;
                let off = inst.operands[1].as_imm().unwrap_or(0);
                Ok(Some(match pv {
                    Value::Ptr(p) => Value::Ptr(RuntimePointer {
                        offset: p.offset + off,
                        ..p
                    }),
                    Value::Null => Value::Null,
                    _ => Value::Undef,
                }))
            }
            Opcode::IntrinsicLaunder => {
                let pv = self.operand_value(&inst.operands[0], env)?;
                Ok(Some(match pv {
                    Value::Ptr(p) => {
                        if p.alloc_id < self.heap.len() {
                            let alloc = &mut self.heap[p.alloc_id];
                            let tag = alloc.next_tag;
                            alloc.next_tag += 1;
                            alloc.birth.insert(tag, alloc.epoch);
                            Value::Ptr(RuntimePointer {
                                generation: Generation::Tag(tag),
                                ..p
                            })
                        } else {
                            Value::Ptr(p)
                        }
                    }
                    other => other,
                }))
            }
            Opcode::IntrinsicStrip => {
                let pv = self.operand_value(&inst.operands[0], env)?;
                Ok(Some(match pv {
                    Value::Ptr(p) => Value::Ptr(RuntimePointer {
                        generation: Generation::Stripped,
                        ..p
                    }),
                    other => other,
                }))
            }
            Opcode::IntrinsicAssume => {
                // Assumptions are optimizer facts; execution ignores them.
                Ok(None)
            }
            Opcode::ICmpEq => {
                let a = self.operand_value(&inst.operands[0], env)?;
                let b = self.operand_value(&inst.operands[1], env)?;
                Ok(Some(Value::Int(values_equal(&a, &b) as i64)))
            }
            Opcode::Add | Opcode::Sub | Opcode::Mul => {
                let a = self.operand_value(&inst.operands[0], env)?;
                let b = self.operand_value(&inst.operands[1], env)?;
                let (Value::Int(x), Value::Int(y)) = (&a, &b) else {
                    return Err(Stop::Err(EvalError::BadIr("arithmetic on non-int".into())));
                };
                let r = match inst.opcode {
                    Opcode::Add => x.wrapping_add(*y),
                    Opcode::Sub => x.wrapping_sub(*y),
                    _ => x.wrapping_mul(*y),
                };
                Ok(Some(Value::Int(r)))
            }
            Opcode::PtrToInt => {
                let pv = self.operand_value(&inst.operands[0], env)?;
                Ok(Some(match pv {
                    Value::Ptr(p) => Value::Int(((p.alloc_id as i64 + 1) << 32) | (p.offset & 0xffff_ffff)),
                    Value::Null => Value::Int(0),
                    _ => Value::Undef,
                }))
            }
            Opcode::IntToPtr => {
                let v = self.operand_value(&inst.operands[0], env)?;
                Ok(Some(match v {
                    Value::Int(0) => Value::Null,
                    Value::Int(n) => {
                        let id = (n >> 32) - 1;
                        let off = n & 0xffff_ffff;
                        if id >= 0 && (id as usize) < self.heap.len() {
                            Value::Ptr(RuntimePointer {
                                alloc_id: id as usize,
                                offset: off,
                                generation: Generation::Stripped,
                            })
                        } else {
                            Value::Undef
                        }
                    }
                    _ => Value::Undef,
                }))
            }
            Opcode::ConstInt => Ok(Some(Value::Int(inst.operands[0].as_imm().unwrap_or(0)))),
            Opcode::ConstNull => Ok(Some(Value::Null)),
            Opcode::ConstUndef => Ok(Some(Value::Undef)),
            Opcode::GlobalRef => {
                let Some(sym) = inst.operands[0].as_global() else {
                    return Err(Stop::Err(EvalError::BadIr("global ref without symbol".into())));
                };
                if let Some(&id) = self.vtable_allocs.get(sym) {
                    Ok(Some(Value::Ptr(RuntimePointer {
                        alloc_id: id,
                        offset: 0,
                        generation: Generation::Tag(0),
                    })))
                } else if self.m.function(sym).is_some() || self.m.declaration(sym).is_some() {
                    Ok(Some(Value::Fn(sym.to_string())))
                } else {
                    Err(Stop::Err(EvalError::BadIr(format!("unresolved global '@{sym}'"))))
                }
            }
            Opcode::CallDirect => {
                let Some(sym) = inst.operands[0].as_global() else {
                    return Err(Stop::Err(EvalError::BadIr("call without symbol".into())));
                };
                let mut args = Vec::new();
                for op in &inst.operands[1..] {
                    args.push(self.operand_value(op, env)?);
                }
                self.call_symbol(sym, args, depth, loc)
            }
            Opcode::CallIndirect => {
                let callee = self.operand_value(&inst.operands[0], env)?;
                let mut args = Vec::new();
                for op in &inst.operands[1..] {
                    args.push(self.operand_value(op, env)?);
                }
                match callee {
                    Value::Fn(sym) => self.call_symbol(&sym, args, depth, loc),
                    _ => {
                        self.ub(UbKind::InvalidIndirectCallee, loc.to_string(), None)?;
                        Ok(Some(Value::Undef))
                    }
                }
            }
            Opcode::Phi => Err(Stop::Err(EvalError::BadIr("phi after non-phi".into()))),
            Opcode::Br | Opcode::CondBr | Opcode::Ret => unreachable!("handled by caller"),
        }
    }

    fn call_symbol(
        &mut self,
        sym: &str,
        args: Vec<Value>,
        depth: usize,
        loc: &str,
    ) -> Result<Option<Value>, Stop> {
        match sym {
            "print" => {
                let Some(Value::Int(n)) = args.first() else {
                    return Err(Stop::Err(EvalError::BadIr("print takes an int".into())));
                };
                self.trace.events.push(TraceEvent::Print(*n));
                self.trace.prints.push(*n);
                return Ok(None);
            }
            "dealloc" => {
                let Some(v) = args.first() else {
                    return Err(Stop::Err(EvalError::BadIr("dealloc takes a pointer".into())));
                };
                match v {
                    Value::Ptr(p) if p.alloc_id < self.heap.len() => {
                        if !self.heap[p.alloc_id].live {
                            self.ub(UbKind::UseAfterFree, loc.to_string(), Some(p.alloc_id))?;
                            return Ok(None);
                        }
                        self.heap[p.alloc_id].live = false;
                    }
                    Value::Null => {}
                    _ => {
                        self.ub(UbKind::Oob, loc.to_string(), None)?;
                    }
                }
                return Ok(None);
            }
            _ => {}
        }
        if let Some(callee) = self.m.function(sym) {
            return self.call(callee, args, depth + 1);
        }
        if let Some(decl) = self.m.declaration(sym) {
            let rendered = args.iter().map(|a| self.render_arg(a)).collect::<Vec<_>>();
            self.trace
                .events
                .push(TraceEvent::ExternalCall(sym.to_string(), rendered.clone()));
            self.trace.external_calls.push((sym.to_string(), rendered));
            return Ok(match decl.ret {
                Some(Type::Int) => Some(Value::Int(0)),
                Some(Type::Ptr) => Some(Value::Null),
                None => None,
            });
        }
        Err(Stop::Err(EvalError::BadIr(format!("unresolved call target '@{sym}'"))))
    }
}

fn values_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => x == y,
        // Address equality; generations never influence comparisons.
        (Value::Ptr(p), Value::Ptr(q)) => p.alloc_id == q.alloc_id && p.offset == q.offset,
        (Value::Null, Value::Null) => true,
        (Value::Fn(x), Value::Fn(y)) => x == y,
        // Undef compares equal to itself so that the optimizer's `x == x`
        // fold agrees with execution.
        (Value::Undef, Value::Undef) => true,
        _ => false,
    }
}

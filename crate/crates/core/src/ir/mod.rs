//! SSA intermediate representation: modules, functions, instructions,
//! vtable globals, and the invariant-group metadata flags.

mod parse;
mod print;
mod verify;

pub use parse::{parse_ir, ParseError};
pub use print::print_ir;
pub use verify::verify_module;

use std::collections::BTreeSet;
use std::fmt;

pub const SLOT_SIZE: i64 = 8;

/// First-class value categories. Loads are untyped at the syntax level and
/// carry `Type::Unknown` until something constrains them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Type {
    Int,
    Ptr,
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => write!(f, "int"),
            Type::Ptr => write!(f, "ptr"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FnAttr {
    Pure,
    Speculatable,
    NoUnwind,
    InaccessibleMemoryOnly,
}

impl FnAttr {
    pub fn as_str(&self) -> &'static str {
        match self {
            FnAttr::Pure => "pure",
            FnAttr::Speculatable => "speculatable",
            FnAttr::NoUnwind => "nounwind",
            FnAttr::InaccessibleMemoryOnly => "inaccessiblememonly",
        }
    }

    pub fn from_str(s: &str) -> Option<FnAttr> {
        match s {
            "pure" => Some(FnAttr::Pure),
            "speculatable" => Some(FnAttr::Speculatable),
            "nounwind" => Some(FnAttr::NoUnwind),
            "inaccessiblememonly" => Some(FnAttr::InaccessibleMemoryOnly),
            _ => None,
        }
    }
}

/// Pointer attributes carried by parameters and, after attribute
/// propagation, by intrinsic results.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamAttrs {
    pub nonnull: bool,
    pub nocapture: bool,
    pub dereferenceable_bytes: Option<u64>,
}

impl ParamAttrs {
    pub fn is_empty(&self) -> bool {
        !self.nonnull && !self.nocapture && self.dereferenceable_bytes.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
    pub attrs: ParamAttrs,
}

/// A function signature without a body (an external function).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<Type>,
    pub attributes: BTreeSet<FnAttr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linkage {
    Definition,
    /// Usable by analyses, demoted to `Declaration` before codegen.
    OptimizationOnly,
    Declaration,
}

impl Linkage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Linkage::Definition => "definition",
            Linkage::OptimizationOnly => "optimization_only",
            Linkage::Declaration => "declaration",
        }
    }
}

/// Constant global of function references, one per dynamic class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VTable {
    pub name: String,
    pub class_name: String,
    pub slots: Vec<String>,
    pub linkage: Linkage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opcode {
    Alloc,
    Load,
    Store,
    FieldAddr,
    CallDirect,
    CallIndirect,
    IntrinsicLaunder,
    IntrinsicStrip,
    IntrinsicAssume,
    ICmpEq,
    Add,
    Sub,
    Mul,
    PtrToInt,
    IntToPtr,
    Br,
    CondBr,
    Ret,
    Phi,
    ConstInt,
    ConstNull,
    ConstUndef,
    GlobalRef,
}

impl Opcode {
    pub fn is_terminator(&self) -> bool {
        matches!(self, Opcode::Br | Opcode::CondBr | Opcode::Ret)
    }

    pub fn is_intrinsic(&self) -> bool {
        matches!(
            self,
            Opcode::IntrinsicLaunder | Opcode::IntrinsicStrip | Opcode::IntrinsicAssume
        )
    }

    /// Whether the instruction can be deleted when its result is unused.
    pub fn is_side_effect_free(&self) -> bool {
        matches!(
            self,
            Opcode::Load
                | Opcode::FieldAddr
                | Opcode::IntrinsicLaunder
                | Opcode::IntrinsicStrip
                | Opcode::ICmpEq
                | Opcode::Add
                | Opcode::Sub
                | Opcode::Mul
                | Opcode::PtrToInt
                | Opcode::IntToPtr
                | Opcode::Phi
                | Opcode::ConstInt
                | Opcode::ConstNull
                | Opcode::ConstUndef
                | Opcode::GlobalRef
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Operand {
    /// `%name`, a reference to an SSA value.
    Value(String),
    /// `@name`, a reference to a module-level symbol.
    Global(String),
    /// A basic block label.
    Label(String),
    /// An integer immediate (alloc size, field offset, const value).
    Imm(i64),
}

impl Operand {
    pub fn as_value(&self) -> Option<&str> {
        match self {
            Operand::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_global(&self) -> Option<&str> {
        match self {
            Operand::Global(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Operand::Label(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_imm(&self) -> Option<i64> {
        match self {
            Operand::Imm(i) => Some(*i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instruction {
    pub result: Option<String>,
    pub opcode: Opcode,
    pub operands: Vec<Operand>,
    pub invariant_group: bool,
    pub invariant_load: bool,
    /// Attributes inferred for the result of a launder/strip.
    pub result_attrs: ParamAttrs,
    /// Set when the intrinsic's operand position was inferred nocapture.
    pub arg_nocapture: bool,
}

impl Instruction {
    pub fn new(result: Option<String>, opcode: Opcode, operands: Vec<Operand>) -> Instruction {
        Instruction {
            result,
            opcode,
            operands,
            invariant_group: false,
            invariant_load: false,
            result_attrs: ParamAttrs::default(),
            arg_nocapture: false,
        }
    }

    pub fn with_invariant_group(mut self) -> Instruction {
        self.invariant_group = true;
        self
    }

    pub fn with_invariant_load(mut self) -> Instruction {
        self.invariant_load = true;
        self
    }

    /// SSA value operands, in order.
    pub fn value_operands(&self) -> impl Iterator<Item = &str> {
        self.operands.iter().filter_map(|o| o.as_value())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub insts: Vec<Instruction>,
}

impl Block {
    pub fn new(label: impl Into<String>) -> Block {
        Block {
            label: label.into(),
            insts: Vec::new(),
        }
    }

    pub fn terminator(&self) -> Option<&Instruction> {
        self.insts.last().filter(|i| i.opcode.is_terminator())
    }

    /// Labels of successor blocks, per the terminator.
    pub fn successors(&self) -> Vec<&str> {
        match self.terminator() {
            Some(t) => t.operands.iter().filter_map(|o| o.as_label()).collect(),
            None => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    pub params: Vec<Param>,
    pub ret: Option<Type>,
    pub blocks: Vec<Block>,
    pub attributes: BTreeSet<FnAttr>,
    /// Inline methods are emitted in every module that defines them; the
    /// linker keeps one copy instead of reporting a duplicate definition.
    pub linkonce: bool,
}

impl Function {
    pub fn entry(&self) -> &Block {
        &self.blocks[0]
    }

    pub fn block(&self, label: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.label == label)
    }

    pub fn block_index(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    /// Map from result name to (block index, instruction index).
    pub fn def_sites(&self) -> std::collections::HashMap<String, (usize, usize)> {
        let mut map = std::collections::HashMap::new();
        for (bi, b) in self.blocks.iter().enumerate() {
            for (ii, inst) in b.insts.iter().enumerate() {
                if let Some(r) = &inst.result {
                    map.insert(r.clone(), (bi, ii));
                }
            }
        }
        map
    }

    /// The defining instruction of an SSA value, if it is not a parameter.
    pub fn def_of<'a>(&'a self, value: &str) -> Option<&'a Instruction> {
        self.blocks
            .iter()
            .flat_map(|b| b.insts.iter())
            .find(|i| i.result.as_deref() == Some(value))
    }

    pub fn is_param(&self, value: &str) -> bool {
        self.params.iter().any(|p| p.name == value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Module {
    pub name: String,
    pub functions: Vec<Function>,
    pub declarations: Vec<Signature>,
    pub vtables: Vec<VTable>,
}

impl Module {
    pub fn new(name: impl Into<String>) -> Module {
        Module {
            name: name.into(),
            functions: Vec::new(),
            declarations: Vec::new(),
            vtables: Vec::new(),
        }
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn function_mut(&mut self, name: &str) -> Option<&mut Function> {
        self.functions.iter_mut().find(|f| f.name == name)
    }

    pub fn declaration(&self, name: &str) -> Option<&Signature> {
        self.declarations.iter().find(|d| d.name == name)
    }

    pub fn vtable(&self, name: &str) -> Option<&VTable> {
        self.vtables.iter().find(|v| v.name == name)
    }

    /// Whether `name` resolves to any module-level symbol.
    pub fn resolves(&self, name: &str) -> bool {
        self.function(name).is_some()
            || self.declaration(name).is_some()
            || self.vtable(name).is_some()
    }
}

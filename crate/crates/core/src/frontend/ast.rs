//! MiniOO abstract syntax.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TypeRef {
    Int,
    /// `Name*`: pointer to a class or union.
    Ptr(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: String,
    pub ty: TypeRef,
}

/// Where a method body lives relative to this compilation input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    /// Body given in the class declaration; emitted linkonce everywhere.
    Inline,
    /// Declared in class, defined (if at all) by a top-level `fn C::m`.
    Outline,
    /// Defined in a different compilation input.
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodDecl {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub ret: Option<TypeRef>,
    pub is_virtual: bool,
    pub placement: Placement,
    pub body: Option<Vec<Stmt>>,
    pub line: usize,
    pub col: usize,
}

impl MethodDecl {
    pub fn defined_here(&self) -> bool {
        self.body.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpecialDecl {
    pub placement: Placement,
    pub body: Option<Vec<Stmt>>,
    /// Whether the class declared it at all (a default is synthesized
    /// otherwise).
    pub declared: bool,
}

impl Default for SpecialDecl {
    fn default() -> SpecialDecl {
        SpecialDecl {
            placement: Placement::Inline,
            body: Some(Vec::new()),
            declared: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDecl {
    pub name: String,
    pub base: Option<String>,
    pub fields: Vec<String>, // int fields, declaration order
    pub methods: Vec<MethodDecl>,
    pub ctor: SpecialDecl,
    pub dtor: SpecialDecl,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnionDecl {
    pub name: String,
    pub alternatives: Vec<String>,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnDecl {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub ret: Option<TypeRef>,
    pub body: Vec<Stmt>,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExternFnDecl {
    pub name: String,
    pub params: Vec<ParamDecl>,
    pub ret: Option<TypeRef>,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SourceProgram {
    pub classes: Vec<ClassDecl>,
    pub unions: Vec<UnionDecl>,
    pub functions: Vec<FnDecl>,
    pub externals: Vec<ExternFnDecl>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LValue {
    Var(String),
    Field(Expr, String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Var { name: String, init: Expr },
    Assign { target: LValue, value: Expr },
    If { cond: Expr, then_blk: Vec<Stmt>, else_blk: Vec<Stmt> },
    While { cond: Expr, body: Vec<Stmt> },
    Return(Option<Expr>),
    Print(Expr),
    Delete(Expr),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Null,
    This,
    Var(String),
    /// `new T`
    New(String),
    /// `new(addr) T`
    PlacementNew(Box<Expr>, String),
    /// `launder(e)`
    Launder(Box<Expr>),
    /// `e.f` field read
    Field(Box<Expr>, String),
    /// `e.m(args)`
    MethodCall(Box<Expr>, String, Vec<Expr>),
    /// `f(args)` free-function or external call
    Call(String, Vec<Expr>),
    /// `e as T`: union member access (launders) or pointer retype
    As(Box<Expr>, String),
    Ptr2Int(Box<Expr>),
    Int2Ptr(Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

//! MiniOO to IR lowering: SSA construction for structured control flow plus
//! the invariant-group emission rules (vptr stores in ctors/dtors, laundered
//! placement new and union access, stripped pointer comparisons, assumption
//! loads after out-of-module constructors).

use super::ast::*;
use super::classes::{ClassTable, emit_vtables_for};
use super::LoweringOptions;
use crate::cfg::prune_unreachable;
use crate::diag::SourceError;
use crate::ir::{
    Block, FnAttr, Function, Instruction, Module, Opcode, Operand, Param, ParamAttrs, Signature,
    Type, SLOT_SIZE,
};
use indexmap::IndexMap;
use std::collections::HashSet;

/// Static type of a lowered expression.
#[derive(Debug, Clone, PartialEq)]
enum LTy {
    Int,
    Obj(String),
    Union(String),
    /// Pointer of unknown class, e.g. an int2ptr result before `as`.
    Raw,
    Null,
    Void,
}

impl LTy {
    fn is_ptr(&self) -> bool {
        matches!(self, LTy::Obj(_) | LTy::Union(_) | LTy::Raw | LTy::Null)
    }

    fn from_ref(t: &TypeRef, table: &ClassTable, line: usize, col: usize) -> Result<LTy, SourceError> {
        match t {
            TypeRef::Int => Ok(LTy::Int),
            TypeRef::Ptr(n) => {
                if table.classes.contains_key(n) {
                    Ok(LTy::Obj(n.clone()))
                } else if table.unions.contains_key(n) {
                    Ok(LTy::Union(n.clone()))
                } else {
                    Err(SourceError::new(line, col, format!("unknown type '{n}'")))
                }
            }
        }
    }
}

fn ir_type(t: &TypeRef) -> Type {
    match t {
        TypeRef::Int => Type::Int,
        TypeRef::Ptr(_) => Type::Ptr,
    }
}

pub fn lower_to_ir(p: &SourceProgram, opts: &LoweringOptions) -> Result<Module, SourceError> {
    let table = ClassTable::build(p)?;
    let mut m = Module::new("main");
    m.vtables = emit_vtables_for(p, &table, opts.force_emit_vtables);

    add_builtin_declarations(&mut m);
    for e in &p.externals {
        let sig = Signature {
            name: e.name.clone(),
            params: e
                .params
                .iter()
                .map(|pd| Param {
                    name: pd.name.clone(),
                    ty: ir_type(&pd.ty),
                    attrs: ParamAttrs::default(),
                })
                .collect(),
            ret: e.ret.as_ref().map(ir_type),
            attributes: Default::default(),
        };
        if m.resolves(&e.name) {
            return Err(SourceError::new(e.line, e.col, format!("duplicate symbol '{}'", e.name)));
        }
        m.declarations.push(sig);
    }

    // Declarations for class members whose bodies are not in this input.
    for c in &p.classes {
        if c.ctor.body.is_none() {
            m.declarations.push(member_sig(&format!("{}::ctor", c.name), &[], None));
        }
        if c.dtor.body.is_none() {
            m.declarations.push(member_sig(&format!("{}::dtor", c.name), &[], None));
        }
        for meth in &c.methods {
            if !meth.defined_here() {
                m.declarations.push(member_sig(
                    &format!("{}::{}", c.name, meth.name),
                    &meth.params,
                    meth.ret.as_ref(),
                ));
            }
        }
    }

    let lw = Lowerer { prog: p, table: &table, opts };
    for c in &p.classes {
        if let Some(body) = &c.ctor.body {
            m.functions.push(lw.lower_special(c, body, true, c.ctor.placement)?);
        }
        if let Some(body) = &c.dtor.body {
            m.functions.push(lw.lower_special(c, body, false, c.dtor.placement)?);
        }
        for meth in &c.methods {
            if let Some(body) = &meth.body {
                m.functions.push(lw.lower_method(c, meth, body)?);
            }
        }
    }
    for f in &p.functions {
        if m.resolves(&f.name) || m.functions.iter().any(|g| g.name == f.name) {
            return Err(SourceError::new(f.line, f.col, format!("duplicate symbol '{}'", f.name)));
        }
        m.functions.push(lw.lower_fn(f)?);
    }
    Ok(m)
}

fn add_builtin_declarations(m: &mut Module) {
    m.declarations.push(Signature {
        name: "print".into(),
        params: vec![Param {
            name: "v".into(),
            ty: Type::Int,
            attrs: ParamAttrs::default(),
        }],
        ret: None,
        attributes: [FnAttr::NoUnwind].into_iter().collect(),
    });
    m.declarations.push(Signature {
        name: "dealloc".into(),
        params: vec![Param {
            name: "p".into(),
            ty: Type::Ptr,
            attrs: ParamAttrs::default(),
        }],
        ret: None,
        attributes: [FnAttr::NoUnwind].into_iter().collect(),
    });
}

fn member_sig(symbol: &str, params: &[ParamDecl], ret: Option<&TypeRef>) -> Signature {
    let mut ps = vec![Param {
        name: "this".into(),
        ty: Type::Ptr,
        attrs: ParamAttrs {
            nonnull: true,
            ..ParamAttrs::default()
        },
    }];
    ps.extend(params.iter().map(|pd| Param {
        name: pd.name.clone(),
        ty: ir_type(&pd.ty),
        attrs: ParamAttrs::default(),
    }));
    Signature {
        name: symbol.to_string(),
        params: ps,
        ret: ret.map(ir_type),
        attributes: Default::default(),
    }
}

struct Lowerer<'a> {
    prog: &'a SourceProgram,
    table: &'a ClassTable,
    opts: &'a LoweringOptions,
}

impl<'a> Lowerer<'a> {
    fn ctor_body_available(&self, class: &str) -> bool {
        self.prog
            .classes
            .iter()
            .find(|c| c.name == class)
            .is_some_and(|c| c.ctor.body.is_some())
    }

    fn this_param(&self, class: &str) -> Param {
        let size = self.table.class(class).map(|c| c.size).unwrap_or(SLOT_SIZE);
        Param {
            name: "this".into(),
            ty: Type::Ptr,
            attrs: ParamAttrs {
                nonnull: true,
                nocapture: false,
                dereferenceable_bytes: Some(size as u64),
            },
        }
    }

    fn lower_special(
        &self,
        c: &ClassDecl,
        body: &[Stmt],
        is_ctor: bool,
        placement: Placement,
    ) -> Result<Function, SourceError> {
        let info = self.table.class(&c.name).unwrap();
        let strict = self.opts.strict_vtable_pointers;
        let mut fb = FB::new(self, Some(c.name.clone()), None);
        fb.vars
            .insert("this".into(), ("this".into(), LTy::Obj(c.name.clone())));

        if is_ctor {
            if let Some(base) = &c.base {
                let arg = if strict { fb.emit_un(Opcode::IntrinsicLaunder, "this") } else { "this".into() };
                fb.call_void(&format!("{base}::ctor"), vec![Operand::Value(arg)]);
            }
            if info.dynamic {
                fb.store_vptr(&c.name, strict);
            }
            fb.block_stmts(body)?;
        } else {
            if info.dynamic {
                // A destructor reverts the dynamic type to its own class
                // before running the body.
                fb.store_vptr(&c.name, strict);
            }
            fb.block_stmts(body)?;
            if let Some(base) = &c.base {
                if !fb.terminated {
                    let arg = if strict { fb.emit_un(Opcode::IntrinsicLaunder, "this") } else { "this".into() };
                    fb.call_void(&format!("{base}::dtor"), vec![Operand::Value(arg)]);
                }
            }
        }
        let kind = if is_ctor { "ctor" } else { "dtor" };
        fb.finish(
            format!("{}::{kind}", c.name),
            vec![self.this_param(&c.name)],
            None,
            placement == Placement::Inline,
        )
    }

    fn lower_method(
        &self,
        c: &ClassDecl,
        meth: &MethodDecl,
        body: &[Stmt],
    ) -> Result<Function, SourceError> {
        let mut fb = FB::new(self, Some(c.name.clone()), meth.ret.clone());
        fb.vars
            .insert("this".into(), ("this".into(), LTy::Obj(c.name.clone())));
        let mut params = vec![self.this_param(&c.name)];
        for pd in &meth.params {
            let lty = LTy::from_ref(&pd.ty, self.table, meth.line, meth.col)?;
            fb.declare_param(pd, lty, meth.line, meth.col)?;
            params.push(Param {
                name: pd.name.clone(),
                ty: ir_type(&pd.ty),
                attrs: ParamAttrs::default(),
            });
        }
        fb.block_stmts(body)?;
        fb.finish(
            format!("{}::{}", c.name, meth.name),
            params,
            meth.ret.as_ref().map(ir_type),
            meth.placement == Placement::Inline,
        )
    }

    fn lower_fn(&self, f: &FnDecl) -> Result<Function, SourceError> {
        let mut fb = FB::new(self, None, f.ret.clone());
        let mut params = Vec::new();
        for pd in &f.params {
            let lty = LTy::from_ref(&pd.ty, self.table, f.line, f.col)?;
            fb.declare_param(pd, lty, f.line, f.col)?;
            params.push(Param {
                name: pd.name.clone(),
                ty: ir_type(&pd.ty),
                attrs: ParamAttrs::default(),
            });
        }
        fb.block_stmts(&f.body)?;
        fb.finish(f.name.clone(), params, f.ret.as_ref().map(ir_type), false)
    }
}

/// Per-function SSA builder.
struct FB<'a> {
    lw: &'a Lowerer<'a>,
    blocks: Vec<Block>,
    cur: usize,
    tmp: usize,
    lbl: usize,
    vars: IndexMap<String, (String, LTy)>,
    this_class: Option<String>,
    ret: Option<TypeRef>,
    terminated: bool,
}

impl<'a> FB<'a> {
    fn new(lw: &'a Lowerer<'a>, this_class: Option<String>, ret: Option<TypeRef>) -> FB<'a> {
        FB {
            lw,
            blocks: vec![Block::new("entry")],
            cur: 0,
            tmp: 0,
            lbl: 0,
            vars: IndexMap::new(),
            this_class,
            ret,
            terminated: false,
        }
    }

    fn strict(&self) -> bool {
        self.lw.opts.strict_vtable_pointers
    }

    fn fresh(&mut self) -> String {
        self.tmp += 1;
        format!("tmp.{}", self.tmp)
    }

    fn fresh_label(&mut self, prefix: &str) -> String {
        self.lbl += 1;
        format!("{prefix}.{}", self.lbl)
    }

    fn declare_param(
        &mut self,
        pd: &ParamDecl,
        lty: LTy,
        line: usize,
        col: usize,
    ) -> Result<(), SourceError> {
        if self.vars.contains_key(&pd.name) {
            return Err(SourceError::new(line, col, format!("duplicate parameter '{}'", pd.name)));
        }
        self.vars.insert(pd.name.clone(), (pd.name.clone(), lty));
        Ok(())
    }

    fn cur_label(&self) -> String {
        self.blocks[self.cur].label.clone()
    }

    fn start_block(&mut self, label: String) {
        self.blocks.push(Block::new(label));
        self.cur = self.blocks.len() - 1;
        self.terminated = false;
    }

    fn emit(&mut self, inst: Instruction) {
        self.blocks[self.cur].insts.push(inst);
    }

    fn emit_res(&mut self, opcode: Opcode, operands: Vec<Operand>) -> String {
        let r = self.fresh();
        self.emit(Instruction::new(Some(r.clone()), opcode, operands));
        r
    }

    fn emit_un(&mut self, opcode: Opcode, v: &str) -> String {
        self.emit_res(opcode, vec![Operand::Value(v.to_string())])
    }

    fn const_int(&mut self, n: i64) -> String {
        self.emit_res(Opcode::ConstInt, vec![Operand::Imm(n)])
    }

    fn call_void(&mut self, symbol: &str, mut args: Vec<Operand>) {
        let mut ops = vec![Operand::Global(symbol.to_string())];
        ops.append(&mut args);
        self.emit(Instruction::new(None, Opcode::CallDirect, ops));
    }

    fn store_vptr(&mut self, class: &str, strict: bool) {
        let vt = self.emit_res(
            Opcode::GlobalRef,
            vec![Operand::Global(format!("{class}::vtable"))],
        );
        let mut st = Instruction::new(
            None,
            Opcode::Store,
            vec![Operand::Value(vt), Operand::Value("this".into())],
        );
        if strict {
            st = st.with_invariant_group();
        }
        self.emit(st);
    }

    /// Constructor call plus, for out-of-module constructors of dynamic
    /// classes, the assumption load asserting the resulting dynamic type.
    fn emit_construct(&mut self, ptr: &str, class: &str) {
        self.call_void(
            &format!("{class}::ctor"),
            vec![Operand::Value(ptr.to_string())],
        );
        let dynamic = self.lw.table.class(class).is_some_and(|c| c.dynamic);
        if dynamic && self.strict() && !self.lw.ctor_body_available(class) {
            let ld = self.fresh();
            self.emit(
                Instruction::new(
                    Some(ld.clone()),
                    Opcode::Load,
                    vec![Operand::Value(ptr.to_string())],
                )
                .with_invariant_group(),
            );
            let vt = self.emit_res(
                Opcode::GlobalRef,
                vec![Operand::Global(format!("{class}::vtable"))],
            );
            let cmp = self.emit_res(
                Opcode::ICmpEq,
                vec![Operand::Value(ld), Operand::Value(vt)],
            );
            self.emit(Instruction::new(
                None,
                Opcode::IntrinsicAssume,
                vec![Operand::Value(cmp)],
            ));
        }
    }

    fn block_stmts(&mut self, stmts: &[Stmt]) -> Result<(), SourceError> {
        for s in stmts {
            if self.terminated {
                // Unreachable tail; lower into a detached block so the
                // emitted IR stays well formed, then let pruning drop it.
                let dead = self.fresh_label("dead");
                self.start_block(dead);
            }
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), SourceError> {
        let (line, col) = (s.line, s.col);
        match &s.kind {
            StmtKind::Var { name, init } => {
                if self.vars.contains_key(name) {
                    return Err(SourceError::new(line, col, format!("duplicate variable '{name}'")));
                }
                let (v, ty) = self.expr(init, line, col)?;
                if ty == LTy::Void {
                    return Err(SourceError::new(line, col, "cannot bind a void value"));
                }
                self.vars.insert(name.clone(), (v, ty));
            }
            StmtKind::Assign { target, value } => match target {
                LValue::Var(name) => {
                    let Some((_, old_ty)) = self.vars.get(name).cloned() else {
                        return Err(SourceError::new(line, col, format!("unknown identifier '{name}'")));
                    };
                    let (v, ty) = self.expr(value, line, col)?;
                    if (old_ty == LTy::Int) != (ty == LTy::Int) {
                        return Err(SourceError::new(line, col, format!("type mismatch in assignment to '{name}'")));
                    }
                    self.vars.insert(name.clone(), (v, ty));
                }
                LValue::Field(base, fname) => {
                    let addr = self.field_addr(base, fname, line, col)?;
                    let (v, ty) = self.expr(value, line, col)?;
                    if ty != LTy::Int {
                        return Err(SourceError::new(line, col, "fields hold int values"));
                    }
                    self.emit(Instruction::new(
                        None,
                        Opcode::Store,
                        vec![Operand::Value(v), Operand::Value(addr)],
                    ));
                }
            },
            StmtKind::If { cond, then_blk, else_blk } => {
                self.lower_if(cond, then_blk, else_blk, line, col)?;
            }
            StmtKind::While { cond, body } => {
                self.lower_while(cond, body, line, col)?;
            }
            StmtKind::Return(v) => {
                match (v, &self.ret) {
                    (Some(e), Some(_)) => {
                        let (val, ty) = self.expr(e, line, col)?;
                        if ty == LTy::Void {
                            return Err(SourceError::new(line, col, "cannot return a void value"));
                        }
                        self.emit(Instruction::new(None, Opcode::Ret, vec![Operand::Value(val)]));
                    }
                    (None, None) => {
                        self.emit(Instruction::new(None, Opcode::Ret, vec![]));
                    }
                    _ => {
                        return Err(SourceError::new(line, col, "return type mismatch"));
                    }
                }
                self.terminated = true;
            }
            StmtKind::Print(e) => {
                let (v, ty) = self.expr(e, line, col)?;
                if ty != LTy::Int {
                    return Err(SourceError::new(line, col, "print takes an int"));
                }
                self.call_void("print", vec![Operand::Value(v)]);
            }
            StmtKind::Delete(e) => {
                let (p, ty) = self.expr(e, line, col)?;
                match &ty {
                    LTy::Obj(c) => {
                        let c = c.clone();
                        self.call_void(&format!("{c}::dtor"), vec![Operand::Value(p.clone())]);
                        self.call_void("dealloc", vec![Operand::Value(p)]);
                    }
                    t if t.is_ptr() => {
                        self.call_void("dealloc", vec![Operand::Value(p)]);
                    }
                    _ => return Err(SourceError::new(line, col, "delete takes a pointer")),
                }
            }
            StmtKind::Expr(e) => {
                self.expr(e, line, col)?;
            }
        }
        Ok(())
    }

    fn lower_if(
        &mut self,
        cond: &Expr,
        then_blk: &[Stmt],
        else_blk: &[Stmt],
        line: usize,
        col: usize,
    ) -> Result<(), SourceError> {
        let then_l = self.fresh_label("then");
        let else_l = self.fresh_label("else");
        let merge_l = self.fresh_label("merge");
        let has_else = !else_blk.is_empty();
        let else_target = if has_else { else_l.clone() } else { merge_l.clone() };
        self.lower_cond(cond, &then_l, &else_target, line, col)?;
        let cond_end = self.cur_label();
        let vars0 = self.vars.clone();

        self.start_block(then_l);
        self.block_stmts(then_blk)?;
        let then_term = self.terminated;
        let then_end = self.cur_label();
        let then_vars = self.vars.clone();
        if !then_term {
            self.emit(Instruction::new(None, Opcode::Br, vec![Operand::Label(merge_l.clone())]));
        }

        let (else_term, else_end, else_vars) = if has_else {
            self.vars = vars0.clone();
            self.start_block(else_l);
            self.block_stmts(else_blk)?;
            let t = self.terminated;
            let end = self.cur_label();
            let v = self.vars.clone();
            if !t {
                self.emit(Instruction::new(None, Opcode::Br, vec![Operand::Label(merge_l.clone())]));
            }
            (t, end, v)
        } else {
            (false, cond_end, vars0.clone())
        };

        self.start_block(merge_l);
        self.terminated = then_term && else_term;
        let mut merged = IndexMap::new();
        for (name, (v0, ty)) in &vars0 {
            let tv = then_vars.get(name).map(|x| x.0.clone()).unwrap_or_else(|| v0.clone());
            let ev = else_vars.get(name).map(|x| x.0.clone()).unwrap_or_else(|| v0.clone());
            let merged_v = if then_term && else_term {
                v0.clone()
            } else if then_term {
                ev
            } else if else_term {
                tv
            } else if tv == ev {
                tv
            } else {
                self.emit_res(
                    Opcode::Phi,
                    vec![
                        Operand::Value(tv),
                        Operand::Label(then_end.clone()),
                        Operand::Value(ev),
                        Operand::Label(else_end.clone()),
                    ],
                )
            };
            merged.insert(name.clone(), (merged_v, ty.clone()));
        }
        self.vars = merged;
        Ok(())
    }

    fn lower_while(
        &mut self,
        cond: &Expr,
        body: &[Stmt],
        line: usize,
        col: usize,
    ) -> Result<(), SourceError> {
        let head_l = self.fresh_label("head");
        let body_l = self.fresh_label("body");
        let exit_l = self.fresh_label("exit");

        let mut assigned: Vec<String> = Vec::new();
        let set = assigned_vars(body);
        for name in self.vars.keys() {
            if set.contains(name) {
                assigned.push(name.clone());
            }
        }

        let pre = self.cur_label();
        self.emit(Instruction::new(None, Opcode::Br, vec![Operand::Label(head_l.clone())]));
        self.start_block(head_l.clone());
        let head_idx = self.cur;

        let mut phis: Vec<(String, usize)> = Vec::new();
        for name in &assigned {
            let (cur_v, ty) = self.vars.get(name).unwrap().clone();
            let phi = self.emit_res(
                Opcode::Phi,
                vec![Operand::Value(cur_v), Operand::Label(pre.clone())],
            );
            phis.push((name.clone(), self.blocks[head_idx].insts.len() - 1));
            self.vars.insert(name.clone(), (phi, ty));
        }
        self.lower_cond(cond, &body_l, &exit_l, line, col)?;
        let vars_at_head = self.vars.clone();

        self.start_block(body_l);
        self.block_stmts(body)?;
        if !self.terminated {
            let latch = self.cur_label();
            self.emit(Instruction::new(None, Opcode::Br, vec![Operand::Label(head_l)]));
            for (name, inst_idx) in &phis {
                let v = self.vars.get(name).unwrap().0.clone();
                let phi = &mut self.blocks[head_idx].insts[*inst_idx];
                phi.operands.push(Operand::Value(v));
                phi.operands.push(Operand::Label(latch.clone()));
            }
        }

        self.start_block(exit_l);
        self.vars = vars_at_head;
        Ok(())
    }

    fn lower_cond(
        &mut self,
        e: &Expr,
        then_l: &str,
        else_l: &str,
        line: usize,
        col: usize,
    ) -> Result<(), SourceError> {
        let (cond, swap) = match e {
            Expr::Eq(a, b) => (self.cmp_eq(a, b, line, col)?, false),
            Expr::Ne(a, b) => (self.cmp_eq(a, b, line, col)?, true),
            _ => {
                let (v, ty) = self.expr(e, line, col)?;
                if ty != LTy::Int {
                    return Err(SourceError::new(line, col, "condition must be an int or comparison"));
                }
                (v, false)
            }
        };
        let (t, f) = if swap { (else_l, then_l) } else { (then_l, else_l) };
        self.emit(Instruction::new(
            None,
            Opcode::CondBr,
            vec![
                Operand::Value(cond),
                Operand::Label(t.to_string()),
                Operand::Label(f.to_string()),
            ],
        ));
        self.terminated = true;
        Ok(())
    }

    /// `a == b` with pointer operands stripped first under strict lowering,
    /// so dynamic information never feeds an address comparison.
    fn cmp_eq(&mut self, a: &Expr, b: &Expr, line: usize, col: usize) -> Result<String, SourceError> {
        let (va, ta) = self.expr(a, line, col)?;
        let (vb, tb) = self.expr(b, line, col)?;
        match (ta.is_ptr(), tb.is_ptr()) {
            (true, true) => {
                let (sa, sb) = if self.strict() {
                    (
                        self.emit_un(Opcode::IntrinsicStrip, &va),
                        self.emit_un(Opcode::IntrinsicStrip, &vb),
                    )
                } else {
                    (va, vb)
                };
                Ok(self.emit_res(
                    Opcode::ICmpEq,
                    vec![Operand::Value(sa), Operand::Value(sb)],
                ))
            }
            (false, false) if ta == LTy::Int && tb == LTy::Int => Ok(self.emit_res(
                Opcode::ICmpEq,
                vec![Operand::Value(va), Operand::Value(vb)],
            )),
            _ => Err(SourceError::new(line, col, "comparison operands must both be ints or both pointers")),
        }
    }

    fn field_addr(
        &mut self,
        base: &Expr,
        fname: &str,
        line: usize,
        col: usize,
    ) -> Result<String, SourceError> {
        let (p, ty) = self.expr(base, line, col)?;
        let LTy::Obj(class) = &ty else {
            return Err(SourceError::new(line, col, format!("field access on non-class value")));
        };
        let info = self.lw.table.class(class).unwrap();
        let Some(off) = info.field_offsets.get(fname).copied() else {
            return Err(SourceError::new(line, col, format!("unknown field '{fname}' on class '{class}'")));
        };
        // Plain data access carries no dynamic information, so the base is
        // stripped under strict lowering.
        let s = if self.strict() { self.emit_un(Opcode::IntrinsicStrip, &p) } else { p };
        Ok(self.emit_res(
            Opcode::FieldAddr,
            vec![Operand::Value(s), Operand::Imm(off)],
        ))
    }

    fn expr(&mut self, e: &Expr, line: usize, col: usize) -> Result<(String, LTy), SourceError> {
        match e {
            Expr::Int(n) => Ok((self.const_int(*n), LTy::Int)),
            Expr::Null => Ok((self.emit_res(Opcode::ConstNull, vec![]), LTy::Null)),
            Expr::This => match &self.this_class {
                Some(c) => Ok(("this".into(), LTy::Obj(c.clone()))),
                None => Err(SourceError::new(line, col, "'this' outside a method")),
            },
            Expr::Var(n) => self
                .vars
                .get(n)
                .cloned()
                .ok_or_else(|| SourceError::new(line, col, format!("unknown identifier '{n}'"))),
            Expr::New(tname) => {
                if let Some(info) = self.lw.table.class(tname) {
                    let size = info.size;
                    let p = self.emit_res(Opcode::Alloc, vec![Operand::Imm(size)]);
                    self.emit_construct(&p, tname);
                    Ok((p, LTy::Obj(tname.clone())))
                } else if let Some(u) = self.lw.table.unions.get(tname) {
                    let size = u.size;
                    let p = self.emit_res(Opcode::Alloc, vec![Operand::Imm(size)]);
                    Ok((p, LTy::Union(tname.clone())))
                } else {
                    Err(SourceError::new(line, col, format!("unknown type '{tname}'")))
                }
            }
            Expr::PlacementNew(addr, tname) => {
                let (a, aty) = self.expr(addr, line, col)?;
                if !aty.is_ptr() {
                    return Err(SourceError::new(line, col, "placement new takes a pointer"));
                }
                let p = if self.strict() { self.emit_un(Opcode::IntrinsicLaunder, &a) } else { a };
                if self.lw.table.class(tname).is_some() {
                    self.emit_construct(&p, tname);
                    Ok((p, LTy::Obj(tname.clone())))
                } else if self.lw.table.unions.contains_key(tname) {
                    Ok((p, LTy::Union(tname.clone())))
                } else {
                    Err(SourceError::new(line, col, format!("unknown type '{tname}'")))
                }
            }
            Expr::Launder(inner) => {
                let (v, ty) = self.expr(inner, line, col)?;
                if !ty.is_ptr() {
                    return Err(SourceError::new(line, col, "launder takes a pointer"));
                }
                let r = if self.strict() { self.emit_un(Opcode::IntrinsicLaunder, &v) } else { v };
                Ok((r, ty))
            }
            Expr::Field(base, fname) => {
                let addr = self.field_addr(base, fname, line, col)?;
                Ok((self.emit_un(Opcode::Load, &addr), LTy::Int))
            }
            Expr::MethodCall(recv, mname, args) => self.method_call(recv, mname, args, line, col),
            Expr::Call(fname, args) => self.free_call(fname, args, line, col),
            Expr::As(inner, tname) => {
                let (v, ty) = self.expr(inner, line, col)?;
                match &ty {
                    LTy::Union(u) => {
                        let info = self.lw.table.unions.get(u).unwrap();
                        if !info.alternatives.iter().any(|a| a == tname) {
                            return Err(SourceError::new(
                                line,
                                col,
                                format!("'{tname}' is not an alternative of union '{u}'"),
                            ));
                        }
                        // Union member access may change the dynamic type
                        // observed through the result.
                        let r = if self.strict() { self.emit_un(Opcode::IntrinsicLaunder, &v) } else { v };
                        Ok((r, LTy::Obj(tname.clone())))
                    }
                    t if t.is_ptr() => {
                        if self.lw.table.classes.contains_key(tname) {
                            Ok((v, LTy::Obj(tname.clone())))
                        } else if self.lw.table.unions.contains_key(tname) {
                            Ok((v, LTy::Union(tname.clone())))
                        } else {
                            Err(SourceError::new(line, col, format!("unknown type '{tname}'")))
                        }
                    }
                    _ => Err(SourceError::new(line, col, "'as' takes a pointer")),
                }
            }
            Expr::Ptr2Int(inner) => {
                let (v, ty) = self.expr(inner, line, col)?;
                if !ty.is_ptr() {
                    return Err(SourceError::new(line, col, "ptr2int takes a pointer"));
                }
                let s = if self.strict() { self.emit_un(Opcode::IntrinsicStrip, &v) } else { v };
                Ok((self.emit_un(Opcode::PtrToInt, &s), LTy::Int))
            }
            Expr::Int2Ptr(inner) => {
                let (v, ty) = self.expr(inner, line, col)?;
                if ty != LTy::Int {
                    return Err(SourceError::new(line, col, "int2ptr takes an int"));
                }
                let p = self.emit_un(Opcode::IntToPtr, &v);
                // The provenance of the integer is unknown, so the result
                // carries fresh dynamic information.
                let r = if self.strict() { self.emit_un(Opcode::IntrinsicLaunder, &p) } else { p };
                Ok((r, LTy::Raw))
            }
            Expr::Eq(a, b) => Ok((self.cmp_eq(a, b, line, col)?, LTy::Int)),
            Expr::Ne(a, b) => {
                let c = self.cmp_eq(a, b, line, col)?;
                let z = self.const_int(0);
                Ok((
                    self.emit_res(Opcode::ICmpEq, vec![Operand::Value(c), Operand::Value(z)]),
                    LTy::Int,
                ))
            }
            Expr::Add(a, b) => self.arith(Opcode::Add, a, b, line, col),
            Expr::Sub(a, b) => self.arith(Opcode::Sub, a, b, line, col),
            Expr::Mul(a, b) => self.arith(Opcode::Mul, a, b, line, col),
        }
    }

    fn arith(
        &mut self,
        op: Opcode,
        a: &Expr,
        b: &Expr,
        line: usize,
        col: usize,
    ) -> Result<(String, LTy), SourceError> {
        let (va, ta) = self.expr(a, line, col)?;
        let (vb, tb) = self.expr(b, line, col)?;
        if ta != LTy::Int || tb != LTy::Int {
            return Err(SourceError::new(line, col, "arithmetic operands must be ints"));
        }
        Ok((
            self.emit_res(op, vec![Operand::Value(va), Operand::Value(vb)]),
            LTy::Int,
        ))
    }

    fn lower_args(
        &mut self,
        args: &[Expr],
        line: usize,
        col: usize,
    ) -> Result<Vec<Operand>, SourceError> {
        let mut out = Vec::new();
        for a in args {
            let (v, ty) = self.expr(a, line, col)?;
            if ty == LTy::Void {
                return Err(SourceError::new(line, col, "cannot pass a void value"));
            }
            out.push(Operand::Value(v));
        }
        Ok(out)
    }

    fn ret_lty(&self, ret: &Option<TypeRef>, line: usize, col: usize) -> Result<LTy, SourceError> {
        match ret {
            None => Ok(LTy::Void),
            Some(t) => LTy::from_ref(t, self.lw.table, line, col),
        }
    }

    fn method_call(
        &mut self,
        recv: &Expr,
        mname: &str,
        args: &[Expr],
        line: usize,
        col: usize,
    ) -> Result<(String, LTy), SourceError> {
        let (p, ty) = self.expr(recv, line, col)?;
        let LTy::Obj(class) = &ty else {
            return Err(SourceError::new(line, col, format!("method call on non-class value")));
        };
        let class = class.clone();
        let Some(resolved) = self.lw.table.resolve_method(self.lw.prog, &class, mname) else {
            return Err(SourceError::new(line, col, format!("unknown method '{mname}' on class '{class}'")));
        };
        if resolved.arity != args.len() {
            return Err(SourceError::new(line, col, format!("arity mismatch in call to '{mname}'")));
        }
        let arg_ops = self.lower_args(args, line, col)?;
        let ret_ty = self.ret_lty(&resolved.ret, line, col)?;
        let has_res = ret_ty != LTy::Void;

        if let Some(slot) = resolved.slot {
            let mut vload = Instruction::new(
                Some(self.fresh()),
                Opcode::Load,
                vec![Operand::Value(p.clone())],
            );
            if self.strict() {
                vload = vload.with_invariant_group();
            }
            let vp = vload.result.clone().unwrap();
            self.emit(vload);
            let sa = self.emit_res(
                Opcode::FieldAddr,
                vec![Operand::Value(vp), Operand::Imm(slot as i64 * SLOT_SIZE)],
            );
            let mut sload = Instruction::new(
                Some(self.fresh()),
                Opcode::Load,
                vec![Operand::Value(sa)],
            );
            if self.strict() {
                sload = sload.with_invariant_load();
            }
            let fptr = sload.result.clone().unwrap();
            self.emit(sload);
            let mut ops = vec![Operand::Value(fptr), Operand::Value(p)];
            ops.extend(arg_ops);
            let res = if has_res { Some(self.fresh()) } else { None };
            let name = res.clone().unwrap_or_default();
            self.emit(Instruction::new(res, Opcode::CallIndirect, ops));
            Ok((name, ret_ty))
        } else {
            let symbol = format!("{}::{mname}", resolved.decl_class);
            let mut ops = vec![Operand::Global(symbol), Operand::Value(p)];
            ops.extend(arg_ops);
            let res = if has_res { Some(self.fresh()) } else { None };
            let name = res.clone().unwrap_or_default();
            self.emit(Instruction::new(res, Opcode::CallDirect, ops));
            Ok((name, ret_ty))
        }
    }

    fn free_call(
        &mut self,
        fname: &str,
        args: &[Expr],
        line: usize,
        col: usize,
    ) -> Result<(String, LTy), SourceError> {
        let (arity, ret) = if let Some(f) = self.lw.prog.functions.iter().find(|f| f.name == fname) {
            (f.params.len(), f.ret.clone())
        } else if let Some(e) = self.lw.prog.externals.iter().find(|e| e.name == fname) {
            (e.params.len(), e.ret.clone())
        } else {
            return Err(SourceError::new(line, col, format!("unknown function '{fname}'")));
        };
        if arity != args.len() {
            return Err(SourceError::new(line, col, format!("arity mismatch in call to '{fname}'")));
        }
        let arg_ops = self.lower_args(args, line, col)?;
        let ret_ty = self.ret_lty(&ret, line, col)?;
        let has_res = ret_ty != LTy::Void;
        let mut ops = vec![Operand::Global(fname.to_string())];
        ops.extend(arg_ops);
        let res = if has_res { Some(self.fresh()) } else { None };
        let name = res.clone().unwrap_or_default();
        self.emit(Instruction::new(res, Opcode::CallDirect, ops));
        Ok((name, ret_ty))
    }

    fn finish(
        mut self,
        name: String,
        params: Vec<Param>,
        ret: Option<Type>,
        linkonce: bool,
    ) -> Result<Function, SourceError> {
        if !self.terminated {
            match ret {
                None => self.emit(Instruction::new(None, Opcode::Ret, vec![])),
                Some(Type::Int) => {
                    let z = self.const_int(0);
                    self.emit(Instruction::new(None, Opcode::Ret, vec![Operand::Value(z)]));
                }
                Some(Type::Ptr) => {
                    let n = self.emit_res(Opcode::ConstNull, vec![]);
                    self.emit(Instruction::new(None, Opcode::Ret, vec![Operand::Value(n)]));
                }
            }
        }
        let mut f = Function {
            name,
            params,
            ret,
            blocks: self.blocks,
            attributes: Default::default(),
            linkonce,
        };
        prune_unreachable(&mut f);
        Ok(f)
    }
}

fn assigned_vars(stmts: &[Stmt]) -> HashSet<String> {
    let mut out = HashSet::new();
    collect_assigned(stmts, &mut out);
    out
}

fn collect_assigned(stmts: &[Stmt], out: &mut HashSet<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Assign { target: LValue::Var(n), .. } => {
                out.insert(n.clone());
            }
            StmtKind::If { then_blk, else_blk, .. } => {
                collect_assigned(then_blk, out);
                collect_assigned(else_blk, out);
            }
            StmtKind::While { body, .. } => collect_assigned(body, out),
            _ => {}
        }
    }
}

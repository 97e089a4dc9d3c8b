//! Recursive-descent parser for MiniOO source (`.moo` files).

use super::ast::*;
use crate::diag::SourceError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Punct(&'static str),
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Lexer, SourceError> {
    let mut toks = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match line.find("//") {
            Some(i) => &line[..i],
            None => line,
        };
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let col = i + 1;
            let c = chars[i];
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                toks.push((Tok::Ident(chars[start..i].iter().collect()), lineno, col));
                continue;
            }
            if c.is_ascii_digit() {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let n = s.parse::<i64>().map_err(|_| {
                    SourceError::new(lineno, col, format!("bad integer literal '{s}'"))
                })?;
                toks.push((Tok::Int(n), lineno, col));
                continue;
            }
            let two: String = chars[i..(i + 2).min(chars.len())].iter().collect();
            let punct = match two.as_str() {
                "==" | "!=" | "::" | "->" => {
                    i += 2;
                    match two.as_str() {
                        "==" => "==",
                        "!=" => "!=",
                        "::" => "::",
                        _ => "->",
                    }
                }
                _ => {
                    i += 1;
                    match c {
                        '{' => "{",
                        '}' => "}",
                        '(' => "(",
                        ')' => ")",
                        ';' => ";",
                        ',' => ",",
                        ':' => ":",
                        '*' => "*",
                        '+' => "+",
                        '-' => "-",
                        '=' => "=",
                        '.' => ".",
                        _ => {
                            return Err(SourceError::new(
                                lineno,
                                col,
                                format!("unexpected character '{c}'"),
                            ))
                        }
                    }
                }
            };
            toks.push((Tok::Punct(punct), lineno, col));
        }
    }
    Ok(Lexer { toks, pos: 0 })
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn loc(&self) -> (usize, usize) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|t| (t.1, t.2))
            .unwrap_or((1, 1))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> SourceError {
        let (l, c) = self.loc();
        SourceError::new(l, c, msg)
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(w)) if w == word)
    }

    fn eat_ident(&mut self, word: &str) -> bool {
        if self.at_ident(word) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self, word: &str) -> Result<(), SourceError> {
        if self.eat_ident(word) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{word}'")))
        }
    }

    fn ident(&mut self) -> Result<String, SourceError> {
        match self.peek() {
            Some(Tok::Ident(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            _ => Err(self.err("expected identifier")),
        }
    }

    fn at(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.at(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), SourceError> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected '{p}'")))
        }
    }
}

const KEYWORDS: &[&str] = &[
    "class", "union", "extern", "virtual", "inline", "fn", "ctor", "dtor", "int", "var", "if",
    "else", "while", "return", "print", "delete", "new", "null", "this", "launder", "ptr2int",
    "int2ptr", "as",
];

fn is_keyword(w: &str) -> bool {
    KEYWORDS.contains(&w)
}

pub fn parse_source(text: &str) -> Result<SourceProgram, SourceError> {
    let mut lx = lex(text)?;
    let mut prog = SourceProgram::default();
    // Outline definitions found at top level, attached to classes afterwards.
    let mut outline_defs: Vec<(String, String, Vec<ParamDecl>, Option<TypeRef>, Vec<Stmt>, usize, usize)> =
        Vec::new();

    while let Some(tok) = lx.peek() {
        match tok {
            Tok::Ident(w) if w == "class" => prog.classes.push(parse_class(&mut lx)?),
            Tok::Ident(w) if w == "union" => prog.unions.push(parse_union(&mut lx)?),
            Tok::Ident(w) if w == "extern" => {
                let (line, col) = lx.loc();
                lx.next();
                lx.expect_ident("fn")?;
                let name = lx.ident()?;
                let params = parse_params(&mut lx)?;
                let ret = parse_ret(&mut lx)?;
                lx.expect(";")?;
                prog.externals.push(ExternFnDecl {
                    name,
                    params,
                    ret,
                    line,
                    col,
                });
            }
            Tok::Ident(w) if w == "fn" => {
                let (line, col) = lx.loc();
                lx.next();
                let first = lx.ident()?;
                if lx.eat("::") {
                    let member = match lx.peek() {
                        Some(Tok::Ident(w)) if w == "ctor" || w == "dtor" => {
                            let w = w.clone();
                            lx.next();
                            w
                        }
                        _ => lx.ident()?,
                    };
                    let params = parse_params(&mut lx)?;
                    let ret = parse_ret(&mut lx)?;
                    let body = parse_block(&mut lx)?;
                    outline_defs.push((first, member, params, ret, body, line, col));
                } else {
                    let params = parse_params(&mut lx)?;
                    let ret = parse_ret(&mut lx)?;
                    let body = parse_block(&mut lx)?;
                    prog.functions.push(FnDecl {
                        name: first,
                        params,
                        ret,
                        body,
                        line,
                        col,
                    });
                }
            }
            _ => return Err(lx.err("expected top-level item")),
        }
    }

    attach_outline_defs(&mut prog, outline_defs)?;
    Ok(prog)
}

fn attach_outline_defs(
    prog: &mut SourceProgram,
    defs: Vec<(String, String, Vec<ParamDecl>, Option<TypeRef>, Vec<Stmt>, usize, usize)>,
) -> Result<(), SourceError> {
    for (class, member, params, ret, body, line, col) in defs {
        let cls = prog
            .classes
            .iter_mut()
            .find(|c| c.name == class)
            .ok_or_else(|| {
                SourceError::new(line, col, format!("definition for unknown class '{class}'"))
            })?;
        match member.as_str() {
            "ctor" => {
                if cls.ctor.placement == Placement::External {
                    return Err(SourceError::new(
                        line,
                        col,
                        format!("'{class}::ctor' was declared extern"),
                    ));
                }
                if cls.ctor.declared && cls.ctor.body.is_some() {
                    return Err(SourceError::new(line, col, format!("'{class}::ctor' already defined")));
                }
                cls.ctor = SpecialDecl {
                    placement: Placement::Outline,
                    body: Some(body),
                    declared: true,
                };
            }
            "dtor" => {
                cls.dtor = SpecialDecl {
                    placement: Placement::Outline,
                    body: Some(body),
                    declared: true,
                };
            }
            _ => {
                let m = cls
                    .methods
                    .iter_mut()
                    .find(|m| m.name == member)
                    .ok_or_else(|| {
                        SourceError::new(
                            line,
                            col,
                            format!("definition for undeclared method '{class}::{member}'"),
                        )
                    })?;
                if m.placement != Placement::Outline {
                    return Err(SourceError::new(
                        line,
                        col,
                        format!("'{class}::{member}' is not an outline method"),
                    ));
                }
                if m.body.is_some() {
                    return Err(SourceError::new(
                        line,
                        col,
                        format!("'{class}::{member}' already defined"),
                    ));
                }
                if m.params.len() != params.len() {
                    return Err(SourceError::new(
                        line,
                        col,
                        format!("'{class}::{member}' definition arity mismatch"),
                    ));
                }
                m.params = params;
                if ret.is_some() {
                    m.ret = ret;
                }
                m.body = Some(body);
            }
        }
    }
    Ok(())
}

fn parse_class(lx: &mut Lexer) -> Result<ClassDecl, SourceError> {
    let (line, col) = lx.loc();
    lx.expect_ident("class")?;
    let name = lx.ident()?;
    let base = if lx.eat(":") { Some(lx.ident()?) } else { None };
    lx.expect("{")?;
    let mut cls = ClassDecl {
        name,
        base,
        fields: Vec::new(),
        methods: Vec::new(),
        ctor: SpecialDecl::default(),
        dtor: SpecialDecl::default(),
        line,
        col,
    };
    while !lx.eat("}") {
        let (mline, mcol) = lx.loc();
        if lx.eat_ident("int") {
            let fname = lx.ident()?;
            lx.expect(";")?;
            cls.fields.push(fname);
            continue;
        }
        let is_virtual = lx.eat_ident("virtual");
        let is_extern = lx.eat_ident("extern");
        let is_inline = lx.eat_ident("inline");
        if lx.eat_ident("ctor") {
            if is_virtual || is_inline {
                return Err(lx.err("constructors cannot be virtual or inline-qualified"));
            }
            cls.ctor = parse_special(lx, is_extern)?;
            continue;
        }
        if lx.eat_ident("dtor") {
            if is_virtual || is_inline {
                return Err(lx.err("destructors cannot be virtual or inline-qualified"));
            }
            cls.dtor = parse_special(lx, is_extern)?;
            continue;
        }
        lx.expect_ident("fn")?;
        let mname = lx.ident()?;
        if is_keyword(&mname) {
            return Err(lx.err(format!("'{mname}' is a reserved word")));
        }
        let params = parse_params(lx)?;
        let ret = parse_ret(lx)?;
        let (placement, body) = if lx.at("{") {
            if is_extern {
                return Err(lx.err("extern method cannot have a body"));
            }
            (Placement::Inline, Some(parse_block(lx)?))
        } else {
            lx.expect(";")?;
            if is_extern {
                (Placement::External, None)
            } else {
                (Placement::Outline, None)
            }
        };
        let _ = is_inline;
        cls.methods.push(MethodDecl {
            name: mname,
            params,
            ret,
            is_virtual,
            placement,
            body,
            line: mline,
            col: mcol,
        });
    }
    Ok(cls)
}

fn parse_special(lx: &mut Lexer, is_extern: bool) -> Result<SpecialDecl, SourceError> {
    if lx.at("{") {
        if is_extern {
            return Err(lx.err("extern constructor/destructor cannot have a body"));
        }
        Ok(SpecialDecl {
            placement: Placement::Inline,
            body: Some(parse_block(lx)?),
            declared: true,
        })
    } else {
        lx.expect(";")?;
        Ok(SpecialDecl {
            placement: if is_extern {
                Placement::External
            } else {
                Placement::Outline
            },
            body: None,
            declared: true,
        })
    }
}

fn parse_union(lx: &mut Lexer) -> Result<UnionDecl, SourceError> {
    let (line, col) = lx.loc();
    lx.expect_ident("union")?;
    let name = lx.ident()?;
    lx.expect("{")?;
    let mut alternatives = Vec::new();
    while !lx.eat("}") {
        alternatives.push(lx.ident()?);
        lx.expect(";")?;
    }
    Ok(UnionDecl {
        name,
        alternatives,
        line,
        col,
    })
}

fn parse_params(lx: &mut Lexer) -> Result<Vec<ParamDecl>, SourceError> {
    lx.expect("(")?;
    let mut params = Vec::new();
    if lx.eat(")") {
        return Ok(params);
    }
    loop {
        let name = lx.ident()?;
        lx.expect(":")?;
        let ty = parse_type(lx)?;
        params.push(ParamDecl { name, ty });
        if lx.eat(")") {
            break;
        }
        lx.expect(",")?;
    }
    Ok(params)
}

fn parse_ret(lx: &mut Lexer) -> Result<Option<TypeRef>, SourceError> {
    if lx.eat("->") {
        Ok(Some(parse_type(lx)?))
    } else {
        Ok(None)
    }
}

fn parse_type(lx: &mut Lexer) -> Result<TypeRef, SourceError> {
    if lx.eat_ident("int") {
        return Ok(TypeRef::Int);
    }
    let name = lx.ident()?;
    lx.expect("*")?;
    Ok(TypeRef::Ptr(name))
}

fn parse_block(lx: &mut Lexer) -> Result<Vec<Stmt>, SourceError> {
    lx.expect("{")?;
    let mut stmts = Vec::new();
    while !lx.eat("}") {
        stmts.push(parse_stmt(lx)?);
    }
    Ok(stmts)
}

fn parse_stmt(lx: &mut Lexer) -> Result<Stmt, SourceError> {
    let (line, col) = lx.loc();
    let kind = match lx.peek() {
        Some(Tok::Ident(w)) if w == "var" => {
            lx.next();
            let name = lx.ident()?;
            lx.expect("=")?;
            let init = parse_expr(lx)?;
            lx.expect(";")?;
            StmtKind::Var { name, init }
        }
        Some(Tok::Ident(w)) if w == "if" => {
            lx.next();
            lx.expect("(")?;
            let cond = parse_expr(lx)?;
            lx.expect(")")?;
            let then_blk = parse_block(lx)?;
            let else_blk = if lx.eat_ident("else") {
                parse_block(lx)?
            } else {
                Vec::new()
            };
            StmtKind::If {
                cond,
                then_blk,
                else_blk,
            }
        }
        Some(Tok::Ident(w)) if w == "while" => {
            lx.next();
            lx.expect("(")?;
            let cond = parse_expr(lx)?;
            lx.expect(")")?;
            let body = parse_block(lx)?;
            StmtKind::While { cond, body }
        }
        Some(Tok::Ident(w)) if w == "return" => {
            lx.next();
            if lx.eat(";") {
                StmtKind::Return(None)
            } else {
                let e = parse_expr(lx)?;
                lx.expect(";")?;
                StmtKind::Return(Some(e))
            }
        }
        Some(Tok::Ident(w)) if w == "print" => {
            lx.next();
            lx.expect("(")?;
            let e = parse_expr(lx)?;
            lx.expect(")")?;
            lx.expect(";")?;
            StmtKind::Print(e)
        }
        Some(Tok::Ident(w)) if w == "delete" => {
            lx.next();
            let e = parse_expr(lx)?;
            lx.expect(";")?;
            StmtKind::Delete(e)
        }
        _ => {
            // Assignment or expression statement.
            let e = parse_expr(lx)?;
            if lx.eat("=") {
                let target = match e {
                    Expr::Var(name) => LValue::Var(name),
                    Expr::Field(base, field) => LValue::Field(*base, field),
                    _ => return Err(lx.err("invalid assignment target")),
                };
                let value = parse_expr(lx)?;
                lx.expect(";")?;
                StmtKind::Assign { target, value }
            } else {
                lx.expect(";")?;
                StmtKind::Expr(e)
            }
        }
    };
    Ok(Stmt { kind, line, col })
}

fn parse_expr(lx: &mut Lexer) -> Result<Expr, SourceError> {
    let lhs = parse_additive(lx)?;
    if lx.eat("==") {
        let rhs = parse_additive(lx)?;
        Ok(Expr::Eq(Box::new(lhs), Box::new(rhs)))
    } else if lx.eat("!=") {
        let rhs = parse_additive(lx)?;
        Ok(Expr::Ne(Box::new(lhs), Box::new(rhs)))
    } else {
        Ok(lhs)
    }
}

fn parse_additive(lx: &mut Lexer) -> Result<Expr, SourceError> {
    let mut lhs = parse_mul(lx)?;
    loop {
        if lx.eat("+") {
            let rhs = parse_mul(lx)?;
            lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
        } else if lx.eat("-") {
            let rhs = parse_mul(lx)?;
            lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
        } else {
            return Ok(lhs);
        }
    }
}

fn parse_mul(lx: &mut Lexer) -> Result<Expr, SourceError> {
    let mut lhs = parse_postfix(lx)?;
    while lx.eat("*") {
        let rhs = parse_postfix(lx)?;
        lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn parse_postfix(lx: &mut Lexer) -> Result<Expr, SourceError> {
    let mut e = parse_primary(lx)?;
    loop {
        if lx.eat(".") {
            let name = lx.ident()?;
            if lx.at("(") {
                let args = parse_args(lx)?;
                e = Expr::MethodCall(Box::new(e), name, args);
            } else {
                e = Expr::Field(Box::new(e), name);
            }
        } else if lx.at_ident("as") {
            lx.next();
            let ty = lx.ident()?;
            e = Expr::As(Box::new(e), ty);
        } else {
            return Ok(e);
        }
    }
}

fn parse_args(lx: &mut Lexer) -> Result<Vec<Expr>, SourceError> {
    lx.expect("(")?;
    let mut args = Vec::new();
    if lx.eat(")") {
        return Ok(args);
    }
    loop {
        args.push(parse_expr(lx)?);
        if lx.eat(")") {
            break;
        }
        lx.expect(",")?;
    }
    Ok(args)
}

fn parse_primary(lx: &mut Lexer) -> Result<Expr, SourceError> {
    match lx.peek().cloned() {
        Some(Tok::Int(n)) => {
            lx.next();
            Ok(Expr::Int(n))
        }
        Some(Tok::Punct("(")) => {
            lx.next();
            let e = parse_expr(lx)?;
            lx.expect(")")?;
            Ok(e)
        }
        Some(Tok::Ident(w)) => match w.as_str() {
            "null" => {
                lx.next();
                Ok(Expr::Null)
            }
            "this" => {
                lx.next();
                Ok(Expr::This)
            }
            "new" => {
                lx.next();
                if lx.eat("(") {
                    let addr = parse_expr(lx)?;
                    lx.expect(")")?;
                    let ty = lx.ident()?;
                    Ok(Expr::PlacementNew(Box::new(addr), ty))
                } else {
                    Ok(Expr::New(lx.ident()?))
                }
            }
            "launder" => {
                lx.next();
                lx.expect("(")?;
                let e = parse_expr(lx)?;
                lx.expect(")")?;
                Ok(Expr::Launder(Box::new(e)))
            }
            "ptr2int" => {
                lx.next();
                lx.expect("(")?;
                let e = parse_expr(lx)?;
                lx.expect(")")?;
                Ok(Expr::Ptr2Int(Box::new(e)))
            }
            "int2ptr" => {
                lx.next();
                lx.expect("(")?;
                let e = parse_expr(lx)?;
                lx.expect(")")?;
                Ok(Expr::Int2Ptr(Box::new(e)))
            }
            _ if is_keyword(&w) => Err(lx.err(format!("unexpected keyword '{w}'"))),
            _ => {
                lx.next();
                if lx.at("(") {
                    let args = parse_args(lx)?;
                    Ok(Expr::Call(w, args))
                } else {
                    Ok(Expr::Var(w))
                }
            }
        },
        _ => Err(lx.err("expected expression")),
    }
}

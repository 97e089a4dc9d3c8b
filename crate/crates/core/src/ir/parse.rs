//! Textual IR parser. One instruction per line, `;` starts a comment.

use super::*;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Value(String),  // %name
    Global(String), // @name
    Int(i64),
    Meta(String), // !invariant.group etc.
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Colon,
    Arrow,
    Eq,
    Newline,
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '.' || c == ':'
}

fn lex(text: &str) -> Result<Lexer, ParseError> {
    let mut toks = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match line.find(';') {
            Some(i) => &line[..i],
            None => line,
        };
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let col = i + 1;
            let c = chars[i];
            match c {
                ' ' | '\t' | '\r' => i += 1,
                '(' => {
                    toks.push((Tok::LParen, lineno, col));
                    i += 1;
                }
                ')' => {
                    toks.push((Tok::RParen, lineno, col));
                    i += 1;
                }
                '{' => {
                    toks.push((Tok::LBrace, lineno, col));
                    i += 1;
                }
                '}' => {
                    toks.push((Tok::RBrace, lineno, col));
                    i += 1;
                }
                '[' => {
                    toks.push((Tok::LBracket, lineno, col));
                    i += 1;
                }
                ']' => {
                    toks.push((Tok::RBracket, lineno, col));
                    i += 1;
                }
                ',' => {
                    toks.push((Tok::Comma, lineno, col));
                    i += 1;
                }
                '=' => {
                    toks.push((Tok::Eq, lineno, col));
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    toks.push((Tok::Arrow, lineno, col));
                    i += 2;
                }
                '%' | '@' | '!' => {
                    let start = i + 1;
                    let mut j = start;
                    while j < chars.len() && is_ident_char(chars[j]) {
                        j += 1;
                    }
                    if j == start {
                        return Err(ParseError {
                            line: lineno,
                            col,
                            msg: format!("expected identifier after '{c}'"),
                        });
                    }
                    let name: String = chars[start..j].iter().collect();
                    let tok = match c {
                        '%' => Tok::Value(name),
                        '@' => Tok::Global(name),
                        _ => Tok::Meta(name),
                    };
                    toks.push((tok, lineno, col));
                    i = j;
                }
                '-' | '0'..='9' => {
                    let start = i;
                    let mut j = i + 1;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let s: String = chars[start..j].iter().collect();
                    let n = s.parse::<i64>().map_err(|_| ParseError {
                        line: lineno,
                        col,
                        msg: format!("bad integer literal '{s}'"),
                    })?;
                    toks.push((Tok::Int(n), lineno, col));
                    i = j;
                }
                c if c.is_alphabetic() || c == '_' => {
                    let start = i;
                    let mut j = i + 1;
                    while j < chars.len() && is_ident_char(chars[j]) {
                        j += 1;
                    }
                    let mut name: String = chars[start..j].iter().collect();
                    // "label:": split the trailing colon back off.
                    if name.ends_with(':') && !name.ends_with("::") {
                        name.pop();
                        let s: String = name;
                        toks.push((Tok::Ident(s), lineno, col));
                        toks.push((Tok::Colon, lineno, j));
                        i = j;
                        continue;
                    }
                    toks.push((Tok::Ident(name), lineno, col));
                    i = j;
                }
                _ => {
                    return Err(ParseError {
                        line: lineno,
                        col,
                        msg: format!("unexpected character '{c}'"),
                    })
                }
            }
        }
        if !toks.is_empty() && !matches!(toks.last().unwrap().0, Tok::Newline) {
            toks.push((Tok::Newline, lineno, chars.len() + 1));
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
            .unwrap_or((0, 0))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let (line, col) = self.loc();
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        match self.next() {
            Some(t) if t == tok => Ok(()),
            other => Err(self.err(format!("expected {tok:?}, found {other:?}"))),
        }
    }

    fn expect_ident(&mut self, word: &str) -> Result<(), ParseError> {
        match self.next() {
            Some(Tok::Ident(w)) if w == word => Ok(()),
            other => Err(self.err(format!("expected '{word}', found {other:?}"))),
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Ident(w)) => Ok(w),
            other => Err(self.err(format!("expected identifier, found {other:?}"))),
        }
    }

    fn global(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Global(g)) => Ok(g),
            other => Err(self.err(format!("expected @symbol, found {other:?}"))),
        }
    }

    fn value(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Value(v)) => Ok(v),
            other => Err(self.err(format!("expected %value, found {other:?}"))),
        }
    }

    fn skip_newlines(&mut self) {
        while matches!(self.peek(), Some(Tok::Newline)) {
            self.pos += 1;
        }
    }

    fn end_line(&mut self) -> Result<(), ParseError> {
        match self.next() {
            Some(Tok::Newline) | None => Ok(()),
            other => Err(self.err(format!("trailing tokens on line: {other:?}"))),
        }
    }
}

pub fn parse_ir(text: &str) -> Result<Module, ParseError> {
    let mut lx = lex(text)?;
    lx.skip_newlines();
    if lx.peek().is_none() {
        return Err(lx.err("expected module"));
    }
    lx.expect_ident("module")?;
    let name = lx.global()?;
    lx.end_line()?;
    let mut m = Module::new(name);

    loop {
        lx.skip_newlines();
        match lx.peek() {
            None => break,
            Some(Tok::Ident(w)) => match w.as_str() {
                "declare" => {
                    lx.next();
                    let (sig, _) = parse_signature(&mut lx)?;
                    lx.end_line()?;
                    m.declarations.push(sig);
                }
                "vtable" => {
                    lx.next();
                    m.vtables.push(parse_vtable(&mut lx)?);
                }
                "define" => {
                    lx.next();
                    m.functions.push(parse_function(&mut lx)?);
                }
                other => return Err(lx.err(format!("expected top-level item, found '{other}'"))),
            },
            Some(t) => return Err(lx.err(format!("expected top-level item, found {t:?}"))),
        }
    }
    Ok(m)
}

fn parse_signature(lx: &mut Lexer) -> Result<(Signature, bool), ParseError> {
    let mut linkonce = false;
    if matches!(lx.peek(), Some(Tok::Ident(w)) if w == "linkonce") {
        lx.next();
        linkonce = true;
    }
    let name = lx.global()?;
    lx.expect(Tok::LParen)?;
    let mut params = Vec::new();
    if !matches!(lx.peek(), Some(Tok::RParen)) {
        loop {
            params.push(parse_param(lx)?);
            match lx.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::RParen) => break,
                other => return Err(lx.err(format!("expected ',' or ')', found {other:?}"))),
            }
        }
    } else {
        lx.next();
    }
    let mut ret = None;
    if matches!(lx.peek(), Some(Tok::Arrow)) {
        lx.next();
        ret = Some(parse_type(lx)?);
    }
    let mut attributes = BTreeSet::new();
    while let Some(Tok::Ident(w)) = lx.peek() {
        match FnAttr::from_str(w) {
            Some(a) => {
                lx.next();
                attributes.insert(a);
            }
            None => break,
        }
    }
    Ok((
        Signature {
            name,
            params,
            ret,
            attributes,
        },
        linkonce,
    ))
}

fn parse_type(lx: &mut Lexer) -> Result<Type, ParseError> {
    match lx.next() {
        Some(Tok::Ident(w)) if w == "int" => Ok(Type::Int),
        Some(Tok::Ident(w)) if w == "ptr" => Ok(Type::Ptr),
        other => Err(lx.err(format!("expected type, found {other:?}"))),
    }
}

fn parse_param(lx: &mut Lexer) -> Result<Param, ParseError> {
    let ty = parse_type(lx)?;
    let mut attrs = ParamAttrs::default();
    loop {
        match lx.peek() {
            Some(Tok::Ident(w)) if w == "nonnull" => {
                lx.next();
                attrs.nonnull = true;
            }
            Some(Tok::Ident(w)) if w == "nocapture" => {
                lx.next();
                attrs.nocapture = true;
            }
            Some(Tok::Ident(w)) if w == "dereferenceable" => {
                lx.next();
                lx.expect(Tok::LParen)?;
                let n = match lx.next() {
                    Some(Tok::Int(n)) if n > 0 => n as u64,
                    other => {
                        return Err(lx.err(format!(
                            "dereferenceable expects a positive byte count, found {other:?}"
                        )))
                    }
                };
                lx.expect(Tok::RParen)?;
                attrs.dereferenceable_bytes = Some(n);
            }
            _ => break,
        }
    }
    let name = lx.value()?;
    Ok(Param { name, ty, attrs })
}

fn parse_vtable(lx: &mut Lexer) -> Result<VTable, ParseError> {
    let name = lx.global()?;
    lx.expect_ident("for")?;
    let class_name = lx.ident()?;
    match lx.next() {
        Some(Tok::Ident(w)) if w == "linkage" => {}
        other => return Err(lx.err(format!("expected 'linkage', found {other:?}"))),
    }
    lx.expect(Tok::Eq)?;
    let linkage = match lx.next() {
        Some(Tok::Ident(w)) => match w.as_str() {
            "definition" => Linkage::Definition,
            "optimization_only" => Linkage::OptimizationOnly,
            "declaration" => Linkage::Declaration,
            other => return Err(lx.err(format!("unknown linkage '{other}'"))),
        },
        other => return Err(lx.err(format!("expected linkage mode, found {other:?}"))),
    };
    lx.expect(Tok::LBracket)?;
    let mut slots = Vec::new();
    if !matches!(lx.peek(), Some(Tok::RBracket)) {
        loop {
            slots.push(lx.global()?);
            match lx.next() {
                Some(Tok::Comma) => continue,
                Some(Tok::RBracket) => break,
                other => return Err(lx.err(format!("expected ',' or ']', found {other:?}"))),
            }
        }
    } else {
        lx.next();
    }
    lx.end_line()?;
    Ok(VTable {
        name,
        class_name,
        slots,
        linkage,
    })
}

fn parse_function(lx: &mut Lexer) -> Result<Function, ParseError> {
    let (sig, linkonce) = parse_signature(lx)?;
    lx.expect(Tok::LBrace)?;
    lx.end_line()?;
    let mut blocks: Vec<Block> = Vec::new();
    loop {
        lx.skip_newlines();
        match lx.peek() {
            Some(Tok::RBrace) => {
                lx.next();
                lx.end_line()?;
                break;
            }
            Some(Tok::Ident(_)) => {
                // Either a new block label or an instruction line.
                if matches!(lx.toks.get(lx.pos + 1).map(|t| &t.0), Some(Tok::Colon)) {
                    let label = lx.ident()?;
                    lx.next(); // colon
                    lx.end_line()?;
                    blocks.push(Block::new(label));
                } else {
                    let inst = parse_inst(lx)?;
                    match blocks.last_mut() {
                        Some(b) => b.insts.push(inst),
                        None => return Err(lx.err("instruction before first block label")),
                    }
                }
            }
            Some(Tok::Value(_)) => {
                let inst = parse_inst(lx)?;
                match blocks.last_mut() {
                    Some(b) => b.insts.push(inst),
                    None => return Err(lx.err("instruction before first block label")),
                }
            }
            other => return Err(lx.err(format!("expected block or instruction, found {other:?}"))),
        }
    }
    if blocks.is_empty() {
        return Err(lx.err(format!("function @{} has no blocks", sig.name)));
    }
    Ok(Function {
        name: sig.name,
        params: sig.params,
        ret: sig.ret,
        blocks,
        attributes: sig.attributes,
        linkonce,
    })
}

fn parse_operand(lx: &mut Lexer) -> Result<Operand, ParseError> {
    match lx.next() {
        Some(Tok::Value(v)) => Ok(Operand::Value(v)),
        Some(Tok::Global(g)) => Ok(Operand::Global(g)),
        Some(Tok::Int(n)) => Ok(Operand::Imm(n)),
        Some(Tok::Ident(l)) => Ok(Operand::Label(l)),
        other => Err(lx.err(format!("expected operand, found {other:?}"))),
    }
}

fn parse_call_args(lx: &mut Lexer, ops: &mut Vec<Operand>) -> Result<(), ParseError> {
    lx.expect(Tok::LParen)?;
    if matches!(lx.peek(), Some(Tok::RParen)) {
        lx.next();
        return Ok(());
    }
    loop {
        ops.push(parse_operand(lx)?);
        match lx.next() {
            Some(Tok::Comma) => continue,
            Some(Tok::RParen) => break,
            other => return Err(lx.err(format!("expected ',' or ')', found {other:?}"))),
        }
    }
    Ok(())
}

fn parse_inst(lx: &mut Lexer) -> Result<Instruction, ParseError> {
    let result = if matches!(lx.peek(), Some(Tok::Value(_))) {
        let r = lx.value()?;
        lx.expect(Tok::Eq)?;
        Some(r)
    } else {
        None
    };

    let op_word = lx.ident()?;
    let mut operands = Vec::new();
    let opcode = match op_word.as_str() {
        "alloc" => {
            operands.push(parse_operand(lx)?);
            Opcode::Alloc
        }
        "load" => {
            operands.push(parse_operand(lx)?);
            Opcode::Load
        }
        "store" => {
            operands.push(parse_operand(lx)?);
            lx.expect(Tok::Comma)?;
            operands.push(parse_operand(lx)?);
            Opcode::Store
        }
        "fieldaddr" => {
            operands.push(parse_operand(lx)?);
            lx.expect(Tok::Comma)?;
            operands.push(parse_operand(lx)?);
            Opcode::FieldAddr
        }
        "call" => {
            operands.push(Operand::Global(lx.global()?));
            parse_call_args(lx, &mut operands)?;
            Opcode::CallDirect
        }
        "icall" => {
            operands.push(Operand::Value(lx.value()?));
            parse_call_args(lx, &mut operands)?;
            Opcode::CallIndirect
        }
        "launder" => {
            operands.push(parse_operand(lx)?);
            Opcode::IntrinsicLaunder
        }
        "strip" => {
            operands.push(parse_operand(lx)?);
            Opcode::IntrinsicStrip
        }
        "assume" => {
            operands.push(parse_operand(lx)?);
            Opcode::IntrinsicAssume
        }
        "icmp" => {
            lx.expect_ident("eq")?;
            operands.push(parse_operand(lx)?);
            lx.expect(Tok::Comma)?;
            operands.push(parse_operand(lx)?);
            Opcode::ICmpEq
        }
        "add" | "sub" | "mul" => {
            operands.push(parse_operand(lx)?);
            lx.expect(Tok::Comma)?;
            operands.push(parse_operand(lx)?);
            match op_word.as_str() {
                "add" => Opcode::Add,
                "sub" => Opcode::Sub,
                _ => Opcode::Mul,
            }
        }
        "ptr2int" => {
            operands.push(parse_operand(lx)?);
            Opcode::PtrToInt
        }
        "int2ptr" => {
            operands.push(parse_operand(lx)?);
            Opcode::IntToPtr
        }
        "br" => {
            operands.push(Operand::Label(lx.ident()?));
            Opcode::Br
        }
        "cbr" => {
            operands.push(parse_operand(lx)?);
            lx.expect(Tok::Comma)?;
            operands.push(Operand::Label(lx.ident()?));
            lx.expect(Tok::Comma)?;
            operands.push(Operand::Label(lx.ident()?));
            Opcode::CondBr
        }
        "ret" => {
            if !matches!(lx.peek(), Some(Tok::Newline) | None) {
                operands.push(parse_operand(lx)?);
            }
            Opcode::Ret
        }
        "phi" => {
            loop {
                lx.expect(Tok::LBracket)?;
                operands.push(parse_operand(lx)?);
                lx.expect(Tok::Comma)?;
                operands.push(Operand::Label(lx.ident()?));
                lx.expect(Tok::RBracket)?;
                if matches!(lx.peek(), Some(Tok::Comma)) {
                    lx.next();
                } else {
                    break;
                }
            }
            Opcode::Phi
        }
        "const" => {
            operands.push(parse_operand(lx)?);
            Opcode::ConstInt
        }
        "null" => Opcode::ConstNull,
        "undef" => Opcode::ConstUndef,
        "global" => {
            operands.push(Operand::Global(lx.global()?));
            Opcode::GlobalRef
        }
        other => return Err(lx.err(format!("unknown opcode '{other}'"))),
    };

    let mut inst = Instruction::new(result, opcode, operands);
    while let Some(Tok::Meta(meta)) = lx.peek() {
        let meta = meta.clone();
        lx.next();
        match meta.as_str() {
            "invariant.group" => inst.invariant_group = true,
            "invariant.load" => inst.invariant_load = true,
            "ret" => parse_attr_group(lx, &mut inst, true)?,
            "arg" => parse_attr_group(lx, &mut inst, false)?,
            other => return Err(lx.err(format!("unknown metadata '!{other}'"))),
        }
    }
    lx.end_line()?;
    Ok(inst)
}

fn parse_attr_group(lx: &mut Lexer, inst: &mut Instruction, on_result: bool) -> Result<(), ParseError> {
    lx.expect(Tok::LParen)?;
    loop {
        let word = lx.ident()?;
        match (word.as_str(), on_result) {
            ("nonnull", true) => inst.result_attrs.nonnull = true,
            ("nocapture", true) => inst.result_attrs.nocapture = true,
            ("nocapture", false) => inst.arg_nocapture = true,
            ("dereferenceable", true) => {
                lx.expect(Tok::LParen)?;
                match lx.next() {
                    Some(Tok::Int(n)) if n > 0 => {
                        inst.result_attrs.dereferenceable_bytes = Some(n as u64)
                    }
                    other => {
                        return Err(lx.err(format!("bad dereferenceable bytes: {other:?}")))
                    }
                }
                lx.expect(Tok::RParen)?;
            }
            (other, _) => return Err(lx.err(format!("unknown attribute '{other}'"))),
        }
        match lx.next() {
            Some(Tok::Comma) => continue,
            Some(Tok::RParen) => break,
            other => return Err(lx.err(format!("expected ',' or ')', found {other:?}"))),
        }
    }
    Ok(())
}

//! Text-to-IR parser for the `.pg` DSL.
//!
//! Parsing is pure and resolves names as it goes, so every identifier error
//! carries a line/column. The transform-introduced runtime calls
//! (`doInspector`, `inspectAccess`, ...) are part of the grammar so that
//! transformed programs round-trip through the printer.

use crate::ast::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("parse error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    let mut line = 1usize;
    let mut col = 1usize;
    let err = |line, col, msg: String| ParseError { line, col, msg };
    while i < bytes.len() {
        let c = bytes[i];
        let (tl, tc) = (line, col);
        let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
            for k in 0..n {
                if bytes[*i + k] == '\n' {
                    *line += 1;
                    *col = 1;
                } else {
                    *col += 1;
                }
            }
            *i += n;
        };
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '#' || (c == '/' && i + 1 < bytes.len() && bytes[i + 1] == '/') {
            while i < bytes.len() && bytes[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == '_') {
                j += 1;
            }
            let s: String = bytes[i..j].iter().collect();
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            out.push(Token {
                tok: Tok::Ident(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && bytes[j].is_ascii_digit() {
                j += 1;
            }
            let mut is_real = false;
            if j < bytes.len()
                && bytes[j] == '.'
                && j + 1 < bytes.len()
                && bytes[j + 1].is_ascii_digit()
            {
                is_real = true;
                j += 1;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
            }
            if j < bytes.len() && (bytes[j] == 'e' || bytes[j] == 'E') {
                let mut k = j + 1;
                if k < bytes.len() && (bytes[k] == '+' || bytes[k] == '-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    is_real = true;
                    j = k;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
            }
            let s: String = bytes[i..j].iter().collect();
            let tok = if is_real {
                Tok::Real(
                    s.parse::<f64>()
                        .map_err(|e| err(tl, tc, format!("bad real literal '{s}': {e}")))?,
                )
            } else {
                Tok::Int(
                    s.parse::<i64>()
                        .map_err(|e| err(tl, tc, format!("bad int literal '{s}': {e}")))?,
                )
            };
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            continue;
        }
        let two: Option<&'static str> = if i + 1 < bytes.len() {
            match (c, bytes[i + 1]) {
                ('.', '.') => Some(".."),
                ('+', '=') => Some("+="),
                ('<', '=') => Some("<="),
                ('>', '=') => Some(">="),
                ('=', '=') => Some("=="),
                ('!', '=') => Some("!="),
                _ => None,
            }
        } else {
            None
        };
        if let Some(p) = two {
            advance(&mut i, &mut line, &mut col, 2);
            out.push(Token {
                tok: Tok::Punct(p),
                line: tl,
                col: tc,
            });
            continue;
        }
        let one: Option<&'static str> = match c {
            '{' => Some("{"),
            '}' => Some("}"),
            '(' => Some("("),
            ')' => Some(")"),
            '[' => Some("["),
            ']' => Some("]"),
            ',' => Some(","),
            ';' => Some(";"),
            ':' => Some(":"),
            '=' => Some("="),
            '.' => Some("."),
            '+' => Some("+"),
            '-' => Some("-"),
            '*' => Some("*"),
            '/' => Some("/"),
            '%' => Some("%"),
            '<' => Some("<"),
            '>' => Some(">"),
            _ => None,
        };
        match one {
            Some(p) => {
                advance(&mut i, &mut line, &mut col, 1);
                out.push(Token {
                    tok: Tok::Punct(p),
                    line: tl,
                    col: tc,
                });
            }
            None => return Err(err(tl, tc, format!("unexpected character '{c}'"))),
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

const KEYWORDS: &[&str] = &[
    "proc", "domain", "array", "over", "ref", "var", "forall", "for", "while", "in", "domadd",
    "domremove", "return", "record", "int", "real", "block", "cyclic", "local", "assoc", "here",
    "abs", "if",
];

const INTRINSICS: &[&str] = &[
    "doInspector",
    "inspectorPreamble",
    "inspectorOff",
    "executorPreamble",
    "inspectAccess",
    "executeAccess",
    "inspectorIterator",
    "setStale",
    "offSwitchOn",
    "offSwitchOff",
];

#[derive(Debug, Clone)]
enum Sym {
    RectDomain,
    AssocDomain,
    Array,
    Scalar,
    Alias,
}

struct Parser<'s> {
    toks: &'s [Token],
    pos: usize,
    globals: Vec<Decl>,
    functions: Vec<FuncDef>,
    func_names: Vec<String>,
    locals: Vec<Vec<String>>,
}

pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let toks = lex(source)?;
    // Pre-scan function names so calls may be forward references.
    let mut func_names = Vec::new();
    for (k, t) in toks.iter().enumerate() {
        if t.tok == Tok::Ident("proc".to_string()) {
            if let Some(Token {
                tok: Tok::Ident(n), ..
            }) = toks.get(k + 1)
            {
                func_names.push(n.clone());
            }
        }
    }
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        globals: Vec::new(),
        functions: Vec::new(),
        func_names,
        locals: Vec::new(),
    };
    p.program()
}

impl<'s> Parser<'s> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        (self.toks[self.pos].line, self.toks[self.pos].col)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn eat_punct(&mut self, p: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Punct(q) if *q == p => {
                self.bump();
                Ok(())
            }
            other => self.err(format!("expected '{p}', found {other:?}")),
        }
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct_opt(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.err(format!("expected '{kw}'"))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.err(format!("expected identifier, found {other:?}")),
        }
    }

    fn int_lit(&mut self) -> Result<i64, ParseError> {
        let neg = self.eat_punct_opt("-");
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(if neg { -v } else { v })
            }
            other => self.err(format!("expected integer literal, found {other:?}")),
        }
    }

    // --- symbol table -------------------------------------------------

    fn sym(&self, name: &str) -> Option<Sym> {
        self.globals.iter().find(|d| d.name == name).map(|d| match d.kind {
            DeclKind::RectDomain { .. } => Sym::RectDomain,
            DeclKind::AssocDomain => Sym::AssocDomain,
            DeclKind::Array { .. } => Sym::Array,
            DeclKind::Scalar { .. } => Sym::Scalar,
            DeclKind::RefAlias { .. } => Sym::Alias,
        })
    }

    fn resolve(&self, name: &str) -> Result<(String, Sym), ParseError> {
        let mut cur = name.to_string();
        let mut hops = 0usize;
        loop {
            match self.sym(&cur) {
                Some(Sym::Alias) => {
                    let tgt = self
                        .globals
                        .iter()
                        .find(|d| d.name == cur)
                        .map(|d| match &d.kind {
                            DeclKind::RefAlias { target } => target.clone(),
                            _ => unreachable!(),
                        })
                        .unwrap();
                    cur = tgt;
                    hops += 1;
                    if hops > self.globals.len() {
                        return self.err(format!("alias cycle through '{name}'"));
                    }
                }
                Some(s) => return Ok((cur, s)),
                None => return self.err(format!("unknown identifier '{cur}'")),
            }
        }
    }

    fn is_local(&self, name: &str) -> bool {
        self.locals.iter().any(|sc| sc.iter().any(|n| n == name))
    }

    fn declare_local(&mut self, name: &str) -> Result<(), ParseError> {
        if self.is_local(name) || self.sym(name).is_some() {
            return self.err(format!("duplicate declaration of '{name}'"));
        }
        if KEYWORDS.contains(&name) || INTRINSICS.contains(&name) {
            return self.err(format!("'{name}' is reserved"));
        }
        self.locals.last_mut().unwrap().push(name.to_string());
        Ok(())
    }

    fn declare_global(&mut self, name: &str) -> Result<(), ParseError> {
        if self.sym(name).is_some() || self.func_names.contains(&name.to_string()) {
            return self.err(format!("duplicate declaration of '{name}'"));
        }
        if KEYWORDS.contains(&name) || INTRINSICS.contains(&name) {
            return self.err(format!("'{name}' is reserved"));
        }
        Ok(())
    }

    // --- declarations -------------------------------------------------

    fn program(&mut self) -> Result<Program, ParseError> {
        while self.peek() != &Tok::Eof {
            if self.at_kw("proc") {
                let f = self.func()?;
                if self.functions.iter().any(|g| g.name == f.name) {
                    return self.err(format!("duplicate function '{}'", f.name));
                }
                self.functions.push(f);
            } else {
                let d = self.global_decl()?;
                self.globals.push(d);
            }
        }
        if !self.functions.iter().any(|f| f.name == "main") {
            return self.err("program has no entry function 'main'");
        }
        Ok(Program {
            globals: std::mem::take(&mut self.globals),
            functions: std::mem::take(&mut self.functions),
            entry: "main".to_string(),
        })
    }

    fn global_decl(&mut self) -> Result<Decl, ParseError> {
        if self.at_kw("domain") {
            self.bump();
            let name = self.ident()?;
            self.declare_global(&name)?;
            self.eat_punct("=")?;
            let kind = if self.at_kw("assoc") {
                self.bump();
                DeclKind::AssocDomain
            } else {
                let dist = if self.at_kw("block") {
                    self.bump();
                    Distribution::Block
                } else if self.at_kw("cyclic") {
                    self.bump();
                    Distribution::Cyclic
                } else if self.at_kw("local") {
                    self.bump();
                    Distribution::Local
                } else {
                    return self.err("expected 'block', 'cyclic', 'local' or 'assoc'");
                };
                let lo = self.int_lit()?;
                self.eat_punct("..")?;
                let hi = self.int_lit()?;
                if hi < lo {
                    return self.err(format!("empty domain range {lo}..{hi}"));
                }
                DeclKind::RectDomain { dist, lo, hi }
            };
            return Ok(Decl { name, kind });
        }
        if self.at_kw("array") {
            self.bump();
            let name = self.ident()?;
            self.declare_global(&name)?;
            self.eat_kw("over")?;
            let dom = self.ident()?;
            match self.resolve(&dom)? {
                (_, Sym::RectDomain) | (_, Sym::AssocDomain) => {}
                _ => return self.err(format!("'{dom}' is not a domain")),
            }
            self.eat_punct(":")?;
            let elem = self.elem_type()?;
            let init = if self.eat_punct_opt("=") {
                Some(self.init_list(&elem)?)
            } else {
                None
            };
            return Ok(Decl {
                name,
                kind: DeclKind::Array {
                    domain: dom,
                    elem,
                    init,
                },
            });
        }
        if self.at_kw("ref") {
            self.bump();
            let name = self.ident()?;
            self.declare_global(&name)?;
            self.eat_punct("=")?;
            let target = self.ident()?;
            // target must resolve (possibly through a chain) to array/domain
            match self.resolve(&target)? {
                (_, Sym::Scalar) => return self.err("ref target must be an array or domain"),
                _ => {}
            }
            return Ok(Decl {
                name,
                kind: DeclKind::RefAlias { target },
            });
        }
        if self.at_kw("var") {
            self.bump();
            let name = self.ident()?;
            self.declare_global(&name)?;
            let ty = if self.eat_punct_opt(":") {
                Some(self.base_type()?)
            } else {
                None
            };
            let init = if self.eat_punct_opt("=") {
                Some(self.expr()?)
            } else {
                None
            };
            if ty.is_none() && init.is_none() {
                return self.err(format!("scalar '{name}' needs a type or initializer"));
            }
            return Ok(Decl {
                name,
                kind: DeclKind::Scalar { ty, init },
            });
        }
        self.err("expected a declaration or 'proc'")
    }

    fn base_type(&mut self) -> Result<BaseType, ParseError> {
        if self.at_kw("int") {
            self.bump();
            Ok(BaseType::Int)
        } else if self.at_kw("real") {
            self.bump();
            Ok(BaseType::Real)
        } else {
            self.err("expected 'int' or 'real'")
        }
    }

    fn elem_type(&mut self) -> Result<ElemType, ParseError> {
        if self.at_kw("int") {
            self.bump();
            return Ok(ElemType::Int);
        }
        if self.at_kw("real") {
            self.bump();
            return Ok(ElemType::Real);
        }
        self.eat_kw("record")?;
        self.eat_punct("{")?;
        let mut fields = Vec::new();
        loop {
            let fname = self.ident()?;
            if fname == "domain" {
                return self.err("'domain' cannot be a record field name");
            }
            if fields.iter().any(|(n, _): &(String, BaseType)| *n == fname) {
                return self.err(format!("duplicate record field '{fname}'"));
            }
            self.eat_punct(":")?;
            let ty = self.base_type()?;
            fields.push((fname, ty));
            if !self.eat_punct_opt(",") {
                break;
            }
        }
        self.eat_punct("}")?;
        if fields.is_empty() {
            return self.err("record type needs at least one field");
        }
        Ok(ElemType::Record(fields))
    }

    fn init_scalar(&mut self) -> Result<InitValue, ParseError> {
        let neg = self.eat_punct_opt("-");
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(InitValue::Int(if neg { -v } else { v }))
            }
            Tok::Real(v) => {
                self.bump();
                Ok(InitValue::Real(if neg { -v } else { v }))
            }
            other => self.err(format!("expected literal, found {other:?}")),
        }
    }

    fn init_list(&mut self, elem: &ElemType) -> Result<Vec<InitValue>, ParseError> {
        self.eat_punct("[")?;
        let mut vals = Vec::new();
        if !self.at_punct("]") {
            loop {
                match elem {
                    ElemType::Record(fields) => {
                        self.eat_punct("(")?;
                        let mut tup = Vec::new();
                        loop {
                            tup.push(self.init_scalar()?);
                            if !self.eat_punct_opt(",") {
                                break;
                            }
                        }
                        self.eat_punct(")")?;
                        if tup.len() != fields.len() {
                            return self.err(format!(
                                "record initializer has {} values, expected {}",
                                tup.len(),
                                fields.len()
                            ));
                        }
                        vals.push(InitValue::Tuple(tup));
                    }
                    _ => vals.push(self.init_scalar()?),
                }
                if !self.eat_punct_opt(",") {
                    break;
                }
            }
        }
        self.eat_punct("]")?;
        Ok(vals)
    }

    // --- functions and statements --------------------------------------

    fn func(&mut self) -> Result<FuncDef, ParseError> {
        self.eat_kw("proc")?;
        let name = self.ident()?;
        if self.sym(&name).is_some() {
            return self.err(format!("'{name}' already declared"));
        }
        self.eat_punct("(")?;
        let mut params = Vec::new();
        self.locals.push(Vec::new());
        if !self.at_punct(")") {
            loop {
                let p = self.ident()?;
                self.declare_local(&p)?;
                params.push(p);
                if !self.eat_punct_opt(",") {
                    break;
                }
            }
        }
        self.eat_punct(")")?;
        let body = self.block()?;
        self.locals.pop();
        Ok(FuncDef { name, params, body })
    }

    fn block(&mut self) -> Result<Vec<Stmt>, ParseError> {
        self.eat_punct("{")?;
        self.locals.push(Vec::new());
        let mut stmts = Vec::new();
        while !self.at_punct("}") {
            stmts.push(self.stmt()?);
        }
        self.eat_punct("}")?;
        self.locals.pop();
        Ok(stmts)
    }

    fn loop_block(&mut self, var: &str) -> Result<Vec<Stmt>, ParseError> {
        self.eat_punct("{")?;
        self.locals.push(Vec::new());
        self.declare_local(var)?;
        let mut stmts = Vec::new();
        while !self.at_punct("}") {
            stmts.push(self.stmt()?);
        }
        self.eat_punct("}")?;
        self.locals.pop();
        Ok(stmts)
    }

    fn site_arg(&mut self) -> Result<u32, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) if v >= 0 => {
                self.bump();
                Ok(v as u32)
            }
            other => self.err(format!("expected site id, found {other:?}")),
        }
    }

    fn array_arg(&mut self) -> Result<String, ParseError> {
        let n = self.ident()?;
        match self.resolve(&n)? {
            (_, Sym::Array) => Ok(n),
            _ => self.err(format!("'{n}' is not an array")),
        }
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.at_kw("forall") || self.at_kw("for") {
            let parallel = self.at_kw("forall");
            self.bump();
            let var = self.ident()?;
            self.eat_kw("in")?;
            let iterand = self.expr()?;
            let body = self.loop_block(&var)?;
            return Ok(if parallel {
                Stmt::Forall { var, iterand, body }
            } else {
                Stmt::For { var, iterand, body }
            });
        }
        if self.at_kw("while") {
            self.bump();
            let cond = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::While { cond, body });
        }
        if self.at_kw("var") {
            self.bump();
            let name = self.ident()?;
            let ty = if self.eat_punct_opt(":") {
                Some(self.base_type()?)
            } else {
                None
            };
            let init = if self.eat_punct_opt("=") {
                Some(self.expr()?)
            } else {
                None
            };
            if ty.is_none() && init.is_none() {
                return self.err(format!("local '{name}' needs a type or initializer"));
            }
            self.eat_punct(";")?;
            self.declare_local(&name)?;
            return Ok(Stmt::LocalVar { name, ty, init });
        }
        if self.at_kw("domadd") || self.at_kw("domremove") {
            let add = self.at_kw("domadd");
            self.bump();
            let name = self.ident()?;
            match self.resolve(&name)? {
                (_, Sym::RectDomain) | (_, Sym::AssocDomain) => {}
                _ => return self.err(format!("'{name}' is not a domain")),
            }
            let index = self.expr()?;
            self.eat_punct(";")?;
            return Ok(if add {
                Stmt::DomAdd {
                    domain: name,
                    index,
                }
            } else {
                Stmt::DomRemove {
                    domain: name,
                    index,
                }
            });
        }
        if self.at_kw("return") {
            self.bump();
            let val = if self.at_punct(";") {
                None
            } else {
                Some(self.expr()?)
            };
            self.eat_punct(";")?;
            return Ok(Stmt::Return(val));
        }
        if self.at_kw("if") {
            // only the inspector guard form exists
            self.bump();
            self.eat_kw("doInspector")?;
            self.eat_punct("(")?;
            let array_a = self.array_arg()?;
            self.eat_punct(",")?;
            let array_b = self.array_arg()?;
            self.eat_punct(",")?;
            let site = self.site_arg()?;
            self.eat_punct(")")?;
            let body = self.block()?;
            return Ok(Stmt::InspectorGuard {
                site,
                array_a,
                array_b,
                body,
            });
        }
        // call statement or assignment
        if let Tok::Ident(name) = self.peek().clone() {
            if matches!(&self.toks[self.pos + 1].tok, Tok::Punct("(")) {
                self.bump();
                self.eat_punct("(")?;
                let stmt = match name.as_str() {
                    "inspectorPreamble" | "executorPreamble" => {
                        let array = self.array_arg()?;
                        self.eat_punct(",")?;
                        let site = self.site_arg()?;
                        if name == "inspectorPreamble" {
                            Stmt::InspectorPreamble { site, array }
                        } else {
                            Stmt::ExecutorPreamble { site, array }
                        }
                    }
                    "inspectorOff" => {
                        let array_a = self.array_arg()?;
                        self.eat_punct(",")?;
                        let array_b = self.array_arg()?;
                        self.eat_punct(",")?;
                        let site = self.site_arg()?;
                        Stmt::InspectorOff {
                            site,
                            array_a,
                            array_b,
                        }
                    }
                    "inspectAccess" => {
                        let array = self.array_arg()?;
                        self.eat_punct(",")?;
                        let subscript = self.expr()?;
                        self.eat_punct(",")?;
                        let site = self.site_arg()?;
                        Stmt::InspectCall {
                            site,
                            array,
                            subscript,
                        }
                    }
                    "setStale" => {
                        let array_a = self.array_arg()?;
                        self.eat_punct(",")?;
                        let array_b = self.array_arg()?;
                        Stmt::SetStale { array_a, array_b }
                    }
                    "offSwitchOn" => Stmt::OffSwitchOn {
                        site: self.site_arg()?,
                    },
                    "offSwitchOff" => Stmt::OffSwitchOff {
                        site: self.site_arg()?,
                    },
                    _ => {
                        if !self.func_names.contains(&name) {
                            return self.err(format!("unknown function '{name}'"));
                        }
                        let mut args = Vec::new();
                        if !self.at_punct(")") {
                            loop {
                                args.push(self.expr()?);
                                if !self.eat_punct_opt(",") {
                                    break;
                                }
                            }
                        }
                        Stmt::Call { name, args }
                    }
                };
                self.eat_punct(")")?;
                self.eat_punct(";")?;
                return Ok(stmt);
            }
            // assignment
            let lhs = self.lvalue()?;
            let op = if self.eat_punct_opt("=") {
                AssignOp::Set
            } else if self.eat_punct_opt("+=") {
                AssignOp::Add
            } else {
                return self.err("expected '=' or '+='");
            };
            let rhs = self.expr()?;
            self.eat_punct(";")?;
            return Ok(Stmt::Assign { lhs, op, rhs });
        }
        self.err("expected a statement")
    }

    fn lvalue(&mut self) -> Result<Expr, ParseError> {
        let name = self.ident()?;
        if !self.is_local(&name) {
            match self.resolve(&name)? {
                (_, Sym::RectDomain) | (_, Sym::AssocDomain) => {
                    return self.err(format!("cannot assign to domain '{name}'"))
                }
                _ => {}
            }
        }
        let mut e = Expr::Var(name);
        loop {
            if self.at_punct("[") {
                self.bump();
                let sub = self.expr()?;
                self.eat_punct("]")?;
                self.check_index_target(&e)?;
                e = Expr::index(e, sub);
            } else if self.at_punct(".") {
                self.bump();
                let f = self.ident()?;
                if f == "domain" {
                    return self.err("cannot assign to a domain expression");
                }
                e = Expr::field(e, &f);
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn check_index_target(&self, e: &Expr) -> Result<(), ParseError> {
        match e {
            Expr::Var(n) => {
                if self.is_local(n) {
                    return self.err(format!("cannot index local variable '{n}'"));
                }
                match self.resolve(n)? {
                    (_, Sym::Array) => Ok(()),
                    (_, Sym::Scalar) => self.err(format!("cannot index scalar '{n}'")),
                    _ => self.err(format!("cannot index domain '{n}'")),
                }
            }
            _ => self.err("only named arrays can be indexed"),
        }
    }

    // --- expressions ----------------------------------------------------

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let lo = self.cmp_expr()?;
        if self.eat_punct_opt("..") {
            let hi = self.cmp_expr()?;
            return Ok(Expr::range(lo, hi));
        }
        Ok(lo)
    }

    fn cmp_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.add_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("<") => BinOp::Lt,
                Tok::Punct("<=") => BinOp::Le,
                Tok::Punct(">") => BinOp::Gt,
                Tok::Punct(">=") => BinOp::Ge,
                Tok::Punct("==") => BinOp::Eq,
                Tok::Punct("!=") => BinOp::Ne,
                _ => break,
            };
            self.bump();
            let rhs = self.add_expr()?;
            e = Expr::binop(op, e, rhs);
        }
        Ok(e)
    }

    fn add_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.mul_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("+") => BinOp::Add,
                Tok::Punct("-") => BinOp::Sub,
                _ => break,
            };
            self.bump();
            let rhs = self.mul_expr()?;
            e = Expr::binop(op, e, rhs);
        }
        Ok(e)
    }

    fn mul_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.unary_expr()?;
        loop {
            let op = match self.peek() {
                Tok::Punct("*") => BinOp::Mul,
                Tok::Punct("/") => BinOp::Div,
                Tok::Punct("%") => BinOp::Mod,
                _ => break,
            };
            self.bump();
            let rhs = self.unary_expr()?;
            e = Expr::binop(op, e, rhs);
        }
        Ok(e)
    }

    fn unary_expr(&mut self) -> Result<Expr, ParseError> {
        if self.eat_punct_opt("-") {
            let e = self.unary_expr()?;
            return Ok(match e {
                Expr::IntLit(v) => Expr::IntLit(-v),
                Expr::RealLit(v) => Expr::RealLit(-v),
                other => Expr::binop(BinOp::Sub, Expr::IntLit(0), other),
            });
        }
        self.postfix_expr()
    }

    fn postfix_expr(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary_expr()?;
        loop {
            if self.at_punct("[") {
                self.bump();
                let sub = self.expr()?;
                self.eat_punct("]")?;
                self.check_index_target(&e)?;
                e = Expr::index(e, sub);
            } else if self.at_punct(".") {
                self.bump();
                let f = self.ident()?;
                if f == "domain" {
                    match &e {
                        Expr::Var(n) if !self.is_local(n) => match self.resolve(n)? {
                            (_, Sym::Array) | (_, Sym::RectDomain) | (_, Sym::AssocDomain) => {}
                            _ => return self.err(format!("'{n}' has no domain")),
                        },
                        _ => return self.err("'.domain' applies to named arrays and domains"),
                    }
                    e = Expr::DomainOf(Box::new(e));
                } else {
                    match &e {
                        Expr::Var(n) if !self.is_local(n) => {
                            return self.err(format!("'{n}' is not a record value"))
                        }
                        Expr::Index { target, .. } if matches!(target.as_ref(), Expr::Var(_)) => {
                            let arr = match target.as_ref() {
                                Expr::Var(n) => n.clone(),
                                _ => unreachable!(),
                            };
                            let (root, _) = self.resolve(&arr)?;
                            let elem = self
                                .globals
                                .iter()
                                .find(|d| d.name == root)
                                .map(|d| match &d.kind {
                                    DeclKind::Array { elem, .. } => elem.clone(),
                                    _ => ElemType::Int,
                                })
                                .unwrap_or(ElemType::Int);
                            if elem.field_index(&f).is_none() {
                                return self.err(format!(
                                    "array '{arr}' elements have no field '{f}'"
                                ));
                            }
                        }
                        Expr::ExecuteAccess { array, .. } => {
                            let arr = array.clone();
                            let (root, _) = self.resolve(&arr)?;
                            let elem = self
                                .globals
                                .iter()
                                .find(|d| d.name == root)
                                .map(|d| match &d.kind {
                                    DeclKind::Array { elem, .. } => elem.clone(),
                                    _ => ElemType::Int,
                                })
                                .unwrap_or(ElemType::Int);
                            if elem.field_index(&f).is_none() {
                                return self.err(format!(
                                    "array '{arr}' elements have no field '{f}'"
                                ));
                            }
                        }
                        _ => {}
                    }
                    e = Expr::field(e, &f);
                }
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn primary_expr(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::IntLit(v))
            }
            Tok::Real(v) => {
                self.bump();
                Ok(Expr::RealLit(v))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.eat_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "here" {
                    self.bump();
                    return Ok(Expr::Here);
                }
                if name == "abs" {
                    self.bump();
                    self.eat_punct("(")?;
                    let e = self.expr()?;
                    self.eat_punct(")")?;
                    return Ok(Expr::Abs(Box::new(e)));
                }
                if name == "inspectorIterator" {
                    self.bump();
                    self.eat_punct("(")?;
                    let e = self.expr()?;
                    self.eat_punct(")")?;
                    return Ok(Expr::InspectorIterator(Box::new(e)));
                }
                if name == "executeAccess" {
                    self.bump();
                    self.eat_punct("(")?;
                    let array = self.array_arg()?;
                    self.eat_punct(",")?;
                    let subscript = self.expr()?;
                    self.eat_punct(",")?;
                    let site = self.site_arg()?;
                    self.eat_punct(")")?;
                    return Ok(Expr::ExecuteAccess {
                        site,
                        array,
                        subscript: Box::new(subscript),
                    });
                }
                if matches!(&self.toks[self.pos + 1].tok, Tok::Punct("(")) {
                    self.bump();
                    if !self.func_names.contains(&name) {
                        return self.err(format!("unknown function '{name}'"));
                    }
                    self.eat_punct("(")?;
                    let mut args = Vec::new();
                    if !self.at_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct_opt(",") {
                                break;
                            }
                        }
                    }
                    self.eat_punct(")")?;
                    return Ok(Expr::Call { name, args });
                }
                self.bump();
                if !self.is_local(&name) {
                    self.pos -= 1; // report at the identifier
                    self.resolve(&name)?;
                    self.pos += 1;
                }
                Ok(Expr::Var(name))
            }
            other => self.err(format!("expected an expression, found {other:?}")),
        }
    }
}

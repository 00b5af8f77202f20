//! IR for the loop-oriented DSL.
//!
//! Programs are trees: no node is shared between two parents, so transforms
//! may clone subtrees freely. Structural equality is the derived `PartialEq`.

use std::collections::BTreeSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseType {
    Int,
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElemType {
    Int,
    Real,
    Record(Vec<(String, BaseType)>),
}

impl ElemType {
    /// int64/float64 are 8 bytes each for overhead accounting.
    pub fn byte_size(&self) -> u64 {
        match self {
            ElemType::Int | ElemType::Real => 8,
            ElemType::Record(fields) => 8 * fields.len() as u64,
        }
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        match self {
            ElemType::Record(fields) => fields.iter().position(|(n, _)| n == name),
            _ => None,
        }
    }

    pub fn field_names(&self) -> Vec<String> {
        match self {
            ElemType::Record(fields) => fields.iter().map(|(n, _)| n.clone()).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Local,
    Block,
    Cyclic,
}

/// Literal element for array initializers; tuples initialize record elements.
#[derive(Debug, Clone, PartialEq)]
pub enum InitValue {
    Int(i64),
    Real(f64),
    Tuple(Vec<InitValue>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum DeclKind {
    RectDomain {
        dist: Distribution,
        lo: i64,
        hi: i64,
    },
    /// Associative domain over int keys, locale-0 resident.
    AssocDomain,
    Array {
        domain: String,
        elem: ElemType,
        init: Option<Vec<InitValue>>,
    },
    Scalar {
        ty: Option<BaseType>,
        init: Option<Expr>,
    },
    RefAlias {
        target: String,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decl {
    pub name: String,
    pub kind: DeclKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl BinOp {
    pub fn is_arith(&self) -> bool {
        matches!(
            self,
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Mod
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    IntLit(i64),
    RealLit(f64),
    Var(String),
    Index {
        target: Box<Expr>,
        subscript: Box<Expr>,
    },
    Field {
        target: Box<Expr>,
        field: String,
    },
    Binop {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `X.domain`
    DomainOf(Box<Expr>),
    /// Inclusive range `lo..hi`.
    Range {
        lo: Box<Expr>,
        hi: Box<Expr>,
    },
    /// ID of the locale executing the current statement.
    Here,
    Abs(Box<Expr>),
    Call {
        name: String,
        args: Vec<Expr>,
    },
    /// Iterator wrapper used only as an inspector-loop iterand: same
    /// iteration-to-locale assignment as the original forall, serial per locale.
    InspectorIterator(Box<Expr>),
    /// Optimized read of `array[subscript]` consulting the site's schedule.
    ExecuteAccess {
        site: u32,
        array: String,
        subscript: Box<Expr>,
    },
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn index(target: Expr, subscript: Expr) -> Expr {
        Expr::Index {
            target: Box::new(target),
            subscript: Box::new(subscript),
        }
    }

    pub fn field(target: Expr, name: &str) -> Expr {
        Expr::Field {
            target: Box::new(target),
            field: name.to_string(),
        }
    }

    pub fn binop(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binop {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn range(lo: Expr, hi: Expr) -> Expr {
        Expr::Range {
            lo: Box::new(lo),
            hi: Box::new(hi),
        }
    }

    /// Variables referenced anywhere in this expression.
    pub fn vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Expr::Var(n) => {
                out.insert(n.clone());
            }
            Expr::Index { target, subscript } => {
                target.vars(out);
                subscript.vars(out);
            }
            Expr::Field { target, .. } => target.vars(out),
            Expr::Binop { lhs, rhs, .. } => {
                lhs.vars(out);
                rhs.vars(out);
            }
            Expr::DomainOf(e) | Expr::Abs(e) | Expr::InspectorIterator(e) => e.vars(out),
            Expr::Range { lo, hi } => {
                lo.vars(out);
                hi.vars(out);
            }
            Expr::Call { args, .. } => {
                for a in args {
                    a.vars(out);
                }
            }
            Expr::ExecuteAccess {
                array, subscript, ..
            } => {
                out.insert(array.clone());
                subscript.vars(out);
            }
            Expr::IntLit(_) | Expr::RealLit(_) | Expr::Here => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    Forall {
        var: String,
        iterand: Expr,
        body: Vec<Stmt>,
    },
    For {
        var: String,
        iterand: Expr,
        body: Vec<Stmt>,
    },
    While {
        cond: Expr,
        body: Vec<Stmt>,
    },
    Assign {
        lhs: Expr,
        op: AssignOp,
        rhs: Expr,
    },
    Call {
        name: String,
        args: Vec<Expr>,
    },
    DomAdd {
        domain: String,
        index: Expr,
    },
    DomRemove {
        domain: String,
        index: Expr,
    },
    LocalVar {
        name: String,
        ty: Option<BaseType>,
        init: Option<Expr>,
    },
    Return(Option<Expr>),
    /// `if doInspector(A, B, site) { ... }`
    InspectorGuard {
        site: u32,
        array_a: String,
        array_b: String,
        body: Vec<Stmt>,
    },
    InspectorPreamble {
        site: u32,
        array: String,
    },
    InspectorOff {
        site: u32,
        array_a: String,
        array_b: String,
    },
    ExecutorPreamble {
        site: u32,
        array: String,
    },
    /// `inspectAccess(A, subscript, site);`
    InspectCall {
        site: u32,
        array: String,
        subscript: Expr,
    },
    SetStale {
        array_a: String,
        array_b: String,
    },
    OffSwitchOn {
        site: u32,
    },
    OffSwitchOff {
        site: u32,
    },
}

impl Stmt {
    pub fn body(&self) -> Option<&Vec<Stmt>> {
        match self {
            Stmt::Forall { body, .. }
            | Stmt::For { body, .. }
            | Stmt::While { body, .. }
            | Stmt::InspectorGuard { body, .. } => Some(body),
            _ => None,
        }
    }

    pub fn body_mut(&mut self) -> Option<&mut Vec<Stmt>> {
        match self {
            Stmt::Forall { body, .. }
            | Stmt::For { body, .. }
            | Stmt::While { body, .. }
            | Stmt::InspectorGuard { body, .. } => Some(body),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuncDef {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub globals: Vec<Decl>,
    pub functions: Vec<FuncDef>,
    pub entry: String,
}

impl Program {
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.globals.iter().find(|d| d.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FuncDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// Follows ref-alias chains to the root declaration name. Chains of any
    /// length terminate; cycles are rejected during validation.
    pub fn resolve_alias(&self, name: &str) -> String {
        let mut cur = name;
        let mut hops = 0usize;
        while let Some(Decl {
            kind: DeclKind::RefAlias { target },
            ..
        }) = self.decl(cur)
        {
            cur = target;
            hops += 1;
            if hops > self.globals.len() {
                break; // cycle; validation reports it
            }
        }
        cur.to_string()
    }

    /// Domain a (root) array is declared over, if any.
    pub fn array_domain(&self, root: &str) -> Option<&str> {
        match self.decl(root).map(|d| &d.kind) {
            Some(DeclKind::Array { domain, .. }) => Some(domain.as_str()),
            _ => None,
        }
    }

    pub fn array_elem(&self, root: &str) -> Option<&ElemType> {
        match self.decl(root).map(|d| &d.kind) {
            Some(DeclKind::Array { elem, .. }) => Some(elem),
            _ => None,
        }
    }

    /// True when `root` names an array declared over a block/cyclic domain.
    pub fn is_distributed_array(&self, root: &str) -> bool {
        if let Some(dom) = self.array_domain(root) {
            return self.is_distributed_domain(&self.resolve_alias(dom));
        }
        false
    }

    pub fn is_distributed_domain(&self, root: &str) -> bool {
        matches!(
            self.decl(root).map(|d| &d.kind),
            Some(DeclKind::RectDomain {
                dist: Distribution::Block | Distribution::Cyclic,
                ..
            })
        )
    }
}

/// Location of a statement: function name plus body indices from the
/// function's top level down to the statement.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub struct StmtPath {
    pub function: String,
    pub indices: Vec<usize>,
}

impl StmtPath {
    pub fn new(function: &str, indices: Vec<usize>) -> Self {
        StmtPath {
            function: function.to_string(),
            indices,
        }
    }

    pub fn is_prefix_of(&self, other: &StmtPath) -> bool {
        self.function == other.function
            && other.indices.len() >= self.indices.len()
            && other.indices[..self.indices.len()] == self.indices[..]
    }
}

/// Looks up the statement at `path`.
pub fn stmt_at<'p>(program: &'p Program, path: &StmtPath) -> Option<&'p Stmt> {
    let func = program.function(&path.function)?;
    let mut stmts = &func.body;
    for (pos, &idx) in path.indices.iter().enumerate() {
        let s = stmts.get(idx)?;
        if pos + 1 == path.indices.len() {
            return Some(s);
        }
        stmts = s.body()?;
    }
    None
}

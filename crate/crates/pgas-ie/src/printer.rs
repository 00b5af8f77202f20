//! DSL pretty-printer. Output is byte-stable and satisfies
//! `parse_program(pretty_print(p)) == p` for any valid program, including
//! transform output.

use crate::ast::*;
use std::fmt::Write;

pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.globals {
        print_decl(&mut out, d);
    }
    for f in &p.functions {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = write!(out, "proc {}(", f.name);
        out.push_str(&f.params.join(", "));
        out.push_str(") {\n");
        print_block(&mut out, &f.body, 1);
        out.push_str("}\n");
    }
    out
}

pub fn expr_to_string(e: &Expr) -> String {
    let mut s = String::new();
    print_expr(&mut s, e, 0);
    s
}

fn print_decl(out: &mut String, d: &Decl) {
    match &d.kind {
        DeclKind::RectDomain { dist, lo, hi } => {
            let ds = match dist {
                Distribution::Block => "block",
                Distribution::Cyclic => "cyclic",
                Distribution::Local => "local",
            };
            let _ = writeln!(out, "domain {} = {} {}..{}", d.name, ds, lo, hi);
        }
        DeclKind::AssocDomain => {
            let _ = writeln!(out, "domain {} = assoc", d.name);
        }
        DeclKind::Array { domain, elem, init } => {
            let _ = write!(out, "array {} over {} : ", d.name, domain);
            print_elem_type(out, elem);
            if let Some(vals) = init {
                out.push_str(" = [");
                for (i, v) in vals.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    print_init(out, v);
                }
                out.push(']');
            }
            out.push('\n');
        }
        DeclKind::Scalar { ty, init } => {
            let _ = write!(out, "var {}", d.name);
            if let Some(t) = ty {
                let _ = write!(out, " : {}", base_name(*t));
            }
            if let Some(e) = init {
                out.push_str(" = ");
                print_expr(out, e, 0);
            }
            out.push('\n');
        }
        DeclKind::RefAlias { target } => {
            let _ = writeln!(out, "ref {} = {}", d.name, target);
        }
    }
}

fn base_name(t: BaseType) -> &'static str {
    match t {
        BaseType::Int => "int",
        BaseType::Real => "real",
    }
}

fn print_elem_type(out: &mut String, e: &ElemType) {
    match e {
        ElemType::Int => out.push_str("int"),
        ElemType::Real => out.push_str("real"),
        ElemType::Record(fields) => {
            out.push_str("record { ");
            for (i, (n, t)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                let _ = write!(out, "{}: {}", n, base_name(*t));
            }
            out.push_str(" }");
        }
    }
}

fn print_init(out: &mut String, v: &InitValue) {
    match v {
        InitValue::Int(i) => {
            let _ = write!(out, "{i}");
        }
        InitValue::Real(r) => {
            let _ = write!(out, "{r:?}");
        }
        InitValue::Tuple(vs) => {
            out.push('(');
            for (i, x) in vs.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_init(out, x);
            }
            out.push(')');
        }
    }
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_block(out: &mut String, body: &[Stmt], level: usize) {
    for s in body {
        print_stmt(out, s, level);
    }
}

fn print_stmt(out: &mut String, s: &Stmt, level: usize) {
    indent(out, level);
    match s {
        Stmt::Forall { var, iterand, body } => {
            let _ = write!(out, "forall {var} in ");
            print_expr(out, iterand, 0);
            out.push_str(" {\n");
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::For { var, iterand, body } => {
            let _ = write!(out, "for {var} in ");
            print_expr(out, iterand, 0);
            out.push_str(" {\n");
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::While { cond, body } => {
            out.push_str("while ");
            print_expr(out, cond, 0);
            out.push_str(" {\n");
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::Assign { lhs, op, rhs } => {
            print_expr(out, lhs, 0);
            out.push_str(match op {
                AssignOp::Set => " = ",
                AssignOp::Add => " += ",
            });
            print_expr(out, rhs, 0);
            out.push_str(";\n");
        }
        Stmt::Call { name, args } => {
            let _ = write!(out, "{name}(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_expr(out, a, 0);
            }
            out.push_str(");\n");
        }
        Stmt::DomAdd { domain, index } => {
            let _ = write!(out, "domadd {domain} ");
            print_expr(out, index, 0);
            out.push_str(";\n");
        }
        Stmt::DomRemove { domain, index } => {
            let _ = write!(out, "domremove {domain} ");
            print_expr(out, index, 0);
            out.push_str(";\n");
        }
        Stmt::LocalVar { name, ty, init } => {
            let _ = write!(out, "var {name}");
            if let Some(t) = ty {
                let _ = write!(out, " : {}", base_name(*t));
            }
            if let Some(e) = init {
                out.push_str(" = ");
                print_expr(out, e, 0);
            }
            out.push_str(";\n");
        }
        Stmt::Return(v) => {
            out.push_str("return");
            if let Some(e) = v {
                out.push(' ');
                print_expr(out, e, 0);
            }
            out.push_str(";\n");
        }
        Stmt::InspectorGuard {
            site,
            array_a,
            array_b,
            body,
        } => {
            let _ = write!(out, "if doInspector({array_a}, {array_b}, {site}) {{\n");
            print_block(out, body, level + 1);
            indent(out, level);
            out.push_str("}\n");
        }
        Stmt::InspectorPreamble { site, array } => {
            let _ = writeln!(out, "inspectorPreamble({array}, {site});");
        }
        Stmt::InspectorOff {
            site,
            array_a,
            array_b,
        } => {
            let _ = writeln!(out, "inspectorOff({array_a}, {array_b}, {site});");
        }
        Stmt::ExecutorPreamble { site, array } => {
            let _ = writeln!(out, "executorPreamble({array}, {site});");
        }
        Stmt::InspectCall {
            site,
            array,
            subscript,
        } => {
            let _ = write!(out, "inspectAccess({array}, ");
            print_expr(out, subscript, 0);
            let _ = writeln!(out, ", {site});");
        }
        Stmt::SetStale { array_a, array_b } => {
            let _ = writeln!(out, "setStale({array_a}, {array_b});");
        }
        Stmt::OffSwitchOn { site } => {
            let _ = writeln!(out, "offSwitchOn({site});");
        }
        Stmt::OffSwitchOff { site } => {
            let _ = writeln!(out, "offSwitchOff({site});");
        }
    }
}

// Precedence levels: 0 range, 1 comparison, 2 additive, 3 multiplicative,
// 4 unary/postfix. A child at lower precedence than its context gets parens.
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Range { .. } => 0,
        Expr::Binop { op, .. } => match op {
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne => 1,
            BinOp::Add | BinOp::Sub => 2,
            BinOp::Mul | BinOp::Div | BinOp::Mod => 3,
        },
        _ => 4,
    }
}

fn print_expr(out: &mut String, e: &Expr, min_prec: u8) {
    let p = prec(e);
    let parens = p < min_prec;
    if parens {
        out.push('(');
    }
    match e {
        Expr::IntLit(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::RealLit(v) => {
            let _ = write!(out, "{v:?}");
        }
        Expr::Var(n) => out.push_str(n),
        Expr::Index { target, subscript } => {
            print_expr(out, target, 4);
            out.push('[');
            print_expr(out, subscript, 0);
            out.push(']');
        }
        Expr::Field { target, field } => {
            print_expr(out, target, 4);
            out.push('.');
            out.push_str(field);
        }
        Expr::Binop { op, lhs, rhs } => {
            print_expr(out, lhs, p);
            let sym = match op {
                BinOp::Add => "+",
                BinOp::Sub => "-",
                BinOp::Mul => "*",
                BinOp::Div => "/",
                BinOp::Mod => "%",
                BinOp::Lt => "<",
                BinOp::Le => "<=",
                BinOp::Gt => ">",
                BinOp::Ge => ">=",
                BinOp::Eq => "==",
                BinOp::Ne => "!=",
            };
            let _ = write!(out, " {sym} ");
            print_expr(out, rhs, p + 1);
        }
        Expr::DomainOf(t) => {
            print_expr(out, t, 4);
            out.push_str(".domain");
        }
        Expr::Range { lo, hi } => {
            print_expr(out, lo, 1);
            out.push_str("..");
            print_expr(out, hi, 1);
        }
        Expr::Here => out.push_str("here"),
        Expr::Abs(x) => {
            out.push_str("abs(");
            print_expr(out, x, 0);
            out.push(')');
        }
        Expr::Call { name, args } => {
            let _ = write!(out, "{name}(");
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                print_expr(out, a, 0);
            }
            out.push(')');
        }
        Expr::InspectorIterator(inner) => {
            out.push_str("inspectorIterator(");
            print_expr(out, inner, 0);
            out.push(')');
        }
        Expr::ExecuteAccess {
            site,
            array,
            subscript,
        } => {
            let _ = write!(out, "executeAccess({array}, ");
            print_expr(out, subscript, 0);
            let _ = write!(out, ", {site})");
        }
    }
    if parens {
        out.push(')');
    }
}

//! Source pretty-printer and the line-oriented AST dump.

use std::fmt::Write;

use super::ast::*;

/// Renders a program as Mob source that parses back to an equal tree.
pub fn pretty(program: &Program) -> String {
    let mut out = String::new();
    for def in &program.definitions {
        match def {
            Definition::Service(s) => {
                let _ = writeln!(out, "service {} {{ {} }}", s.name, s.methods.join(" "));
            }
            Definition::Requires(r) => {
                let _ = writeln!(out, "requires {};", r.services.join(" "));
            }
            Definition::Class(c) => {
                let kw = if c.is_agent { "agent" } else { "class" };
                let _ = write!(out, "{kw} {}({})", c.name, c.params.join(", "));
                if !c.provides.is_empty() {
                    let _ = write!(out, " provides {}", c.provides.join(" "));
                }
                if !c.requires.is_empty() {
                    let _ = write!(out, " requires {}", c.requires.join(" "));
                }
                out.push_str(" {\n");
                for m in &c.methods {
                    let _ = writeln!(out, "  {}({}) {{", m.name, m.params.join(", "));
                    print_block(&mut out, &m.body, 2);
                    out.push_str("  }\n");
                }
                out.push_str("}\n");
            }
        }
    }
    print_block(&mut out, &program.body, 0);
    out.push_str("exit;\n");
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn print_block(out: &mut String, block: &[Instr], level: usize) {
    for instr in block {
        indent(out, level);
        print_instr(out, instr, level);
        out.push('\n');
    }
}

fn print_nested(out: &mut String, block: &[Instr], level: usize) {
    out.push_str("{\n");
    print_block(out, block, level + 1);
    indent(out, level);
    out.push('}');
}

fn print_instr(out: &mut String, instr: &Instr, level: usize) {
    match &instr.kind {
        InstrKind::Go(v) => {
            let _ = write!(out, "go({});", atom(v));
        }
        InstrKind::Return(v) => {
            let _ = write!(out, "return ({});", atom(v));
        }
        InstrKind::Join(x) => {
            let _ = write!(out, "join({x});");
        }
        InstrKind::Wait(x) => {
            let _ = write!(out, "wait({x});");
        }
        InstrKind::Notify(x) => {
            let _ = write!(out, "notify({x});");
        }
        InstrKind::Lock(x) => {
            let _ = write!(out, "lock({x});");
        }
        InstrKind::Unlock(x) => {
            let _ = write!(out, "unlock({x});");
        }
        InstrKind::If {
            cond,
            then_block,
            else_block,
        } => {
            let _ = write!(out, "if ({}) ", atom(cond));
            print_nested(out, then_block, level);
            out.push_str(" else ");
            print_nested(out, else_block, level);
        }
        InstrKind::While { cond, body } => {
            let _ = write!(out, "while ({}) ", atom(cond));
            print_nested(out, body, level);
        }
        InstrKind::Break => out.push_str("break;"),
        InstrKind::Exit => out.push_str("exit;"),
        InstrKind::AttrAssign {
            object,
            attr,
            value,
        } => {
            let _ = write!(out, "{object}.{attr} = {};", atom(value));
        }
        InstrKind::Assign { target, value } => {
            let _ = write!(out, "{target} = ");
            match value {
                AssignValue::New { class, args } => {
                    let _ = write!(out, "new {class}({});", atoms(args));
                }
                AssignValue::Fork(body) => {
                    out.push_str("fork ");
                    print_nested(out, body, level);
                }
                AssignValue::Bind { service, host } => match host {
                    Some(h) => {
                        let _ = write!(out, "bind({service} {});", atom(h));
                    }
                    None => {
                        let _ = write!(out, "bind({service});");
                    }
                },
                AssignValue::Host => out.push_str("host();"),
                AssignValue::Exec(args) => {
                    let _ = write!(out, "exec({});", atoms(args));
                }
                AssignValue::Invoke {
                    object,
                    method,
                    args,
                } => {
                    let _ = write!(out, "{object}.{method}({});", atoms(args));
                }
                AssignValue::ReadAttr { object, attr } => {
                    let _ = write!(out, "{object}.{attr};");
                }
                AssignValue::Expr(e) => {
                    let _ = write!(out, "{};", expr(e));
                }
            }
        }
    }
}

pub fn atom(a: &Atom) -> String {
    match a {
        Atom::Target(t) => t.to_string(),
        Atom::Null => "null".to_string(),
        Atom::Lit(l) => literal(l),
    }
}

fn literal(l: &Literal) -> String {
    match l {
        Literal::Int(n) => n.to_string(),
        Literal::Str(s) => format!("\"{s}\""),
        Literal::Bool(b) => b.to_string(),
    }
}

fn atoms(args: &[Atom]) -> String {
    args.iter().map(atom).collect::<Vec<_>>().join(", ")
}

/// Renders an expression, parenthesising every compound operand.
pub fn expr(e: &Expr) -> String {
    match e {
        Expr::Atom(a) => atom(a),
        Expr::Unary(op, inner) => {
            let inner_text = match inner.as_ref() {
                Expr::Atom(Atom::Lit(Literal::Int(_))) | Expr::Binary(..) => {
                    format!("({})", expr(inner))
                }
                _ => expr(inner),
            };
            format!("{}{}", op.symbol(), inner_text)
        }
        Expr::Binary(op, l, r) => {
            format!("{} {} {}", operand(l), op.symbol(), operand(r))
        }
    }
}

fn operand(e: &Expr) -> String {
    match e {
        Expr::Binary(..) => format!("({})", expr(e)),
        Expr::Atom(Atom::Lit(Literal::Int(n))) if *n < 0 => format!("({n})"),
        _ => expr(e),
    }
}

/// Line-oriented s-expression dump, one node per line, two-space indent.
pub fn dump(program: &Program) -> String {
    let mut d = Dumper::default();
    d.open("program");
    for def in &program.definitions {
        match def {
            Definition::Service(s) => {
                d.open(&format!("service {}", s.name));
                for m in &s.methods {
                    d.leaf(&format!("method {m}"));
                }
                d.close();
            }
            Definition::Requires(r) => d.leaf(&format!("requires {}", r.services.join(" "))),
            Definition::Class(c) => {
                let kw = if c.is_agent { "agent" } else { "class" };
                d.open(&format!("{kw} {}", c.name));
                d.leaf(format!("params {}", c.params.join(" ")).trim_end());
                if c.is_agent {
                    d.leaf(format!("provides {}", c.provides.join(" ")).trim_end());
                    d.leaf(format!("requires {}", c.requires.join(" ")).trim_end());
                }
                for m in &c.methods {
                    d.open(&format!("method {}", m.name));
                    d.leaf(format!("params {}", m.params.join(" ")).trim_end());
                    d.block("body", &m.body);
                    d.close();
                }
                d.close();
            }
        }
    }
    d.block("body", &program.body);
    d.close();
    d.out
}

#[derive(Default)]
struct Dumper {
    out: String,
    depth: usize,
}

impl Dumper {
    fn line(&mut self, text: &str) {
        indent(&mut self.out, self.depth);
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn open(&mut self, head: &str) {
        self.line(&format!("({head}"));
        self.depth += 1;
    }

    fn close(&mut self) {
        self.depth -= 1;
        self.line(")");
    }

    fn leaf(&mut self, text: &str) {
        self.line(&format!("({text})"));
    }

    fn block(&mut self, head: &str, block: &[Instr]) {
        if block.is_empty() {
            self.leaf(head);
            return;
        }
        self.open(head);
        for instr in block {
            self.instr(instr);
        }
        self.close();
    }

    fn instr(&mut self, instr: &Instr) {
        match &instr.kind {
            InstrKind::Go(v) => self.leaf(&format!("go {}", atom(v))),
            InstrKind::Return(v) => self.leaf(&format!("return {}", atom(v))),
            InstrKind::Join(x) => self.leaf(&format!("join {x}")),
            InstrKind::Wait(x) => self.leaf(&format!("wait {x}")),
            InstrKind::Notify(x) => self.leaf(&format!("notify {x}")),
            InstrKind::Lock(x) => self.leaf(&format!("lock {x}")),
            InstrKind::Unlock(x) => self.leaf(&format!("unlock {x}")),
            InstrKind::Break => self.leaf("break"),
            InstrKind::Exit => self.leaf("exit"),
            InstrKind::If {
                cond,
                then_block,
                else_block,
            } => {
                self.open(&format!("if {}", atom(cond)));
                self.block("then", then_block);
                self.block("else", else_block);
                self.close();
            }
            InstrKind::While { cond, body } => {
                self.open(&format!("while {}", atom(cond)));
                self.block("do", body);
                self.close();
            }
            InstrKind::AttrAssign {
                object,
                attr,
                value,
            } => self.leaf(&format!("set-attr {object}.{attr} {}", atom(value))),
            InstrKind::Assign { target, value } => {
                self.open(&format!("assign {target}"));
                match value {
                    AssignValue::New { class, args } => {
                        self.leaf(&format!("new {class} {}", atoms_sexp(args)))
                    }
                    AssignValue::Fork(body) => self.block("fork", body),
                    AssignValue::Bind { service, host } => match host {
                        Some(h) => self.leaf(&format!("bind {service} {}", atom(h))),
                        None => self.leaf(&format!("bind {service}")),
                    },
                    AssignValue::Host => self.leaf("host"),
                    AssignValue::Exec(args) => self.leaf(&format!("exec {}", atoms_sexp(args))),
                    AssignValue::Invoke {
                        object,
                        method,
                        args,
                    } => self.leaf(&format!("invoke {object}.{method} {}", atoms_sexp(args))),
                    AssignValue::ReadAttr { object, attr } => {
                        self.leaf(&format!("read-attr {object}.{attr}"))
                    }
                    AssignValue::Expr(e) => self.expr(e),
                }
                self.close();
            }
        }
    }

    fn expr(&mut self, e: &Expr) {
        match e {
            Expr::Atom(a) => self.leaf(&format!("value {}", atom(a))),
            Expr::Unary(op, inner) => {
                self.open(&format!("unop {}", op.symbol()));
                self.expr(inner);
                self.close();
            }
            Expr::Binary(op, l, r) => {
                self.open(&format!("binop {}", op.symbol()));
                self.expr(l);
                self.expr(r);
                self.close();
            }
        }
    }
}

fn atoms_sexp(args: &[Atom]) -> String {
    format!(
        "({})",
        args.iter().map(atom).collect::<Vec<_>>().join(" ")
    )
}

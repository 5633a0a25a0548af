use std::fmt::{self, Write};

use super::{Expr, Node};

// Binding strength, loosest first.
const SUM: u8 = 1;
const PRODUCT: u8 = 2;
const UNARY: u8 = 3;
const POWER: u8 = 4;
const ATOM: u8 = 5;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Add(..) | Node::Sub(..) => SUM,
        Node::Mul(..) | Node::Div(..) => PRODUCT,
        Node::Neg(_) => UNARY,
        Node::Pow(..) => POWER,
        _ => ATOM,
    }
}

pub(super) fn to_string(node: &Expr) -> String {
    let mut s = String::new();
    let _ = write_node(&mut s, node);
    s
}

pub(super) fn write_expr(f: &mut fmt::Formatter<'_>, node: &Expr) -> fmt::Result {
    f.write_str(&to_string(node))
}

fn write_number<W: Write>(out: &mut W, c: f64) -> fmt::Result {
    let a = c.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) {
        write!(out, "{c}")
    } else {
        write!(out, "{c:e}")
    }
}

fn child<W: Write>(out: &mut W, node: &Expr, parens: bool) -> fmt::Result {
    if parens {
        out.write_char('(')?;
        write_node(out, node)?;
        out.write_char(')')
    } else {
        write_node(out, node)
    }
}

fn binary<W: Write>(out: &mut W, a: &Expr, op: &str, b: &Expr, prec: u8) -> fmt::Result {
    // Left operands keep their grouping when at least as tight; right operands
    // of equal strength are always parenthesized so the tree shape survives a
    // round trip.
    child(out, a, precedence(a) < prec)?;
    out.write_str(op)?;
    child(out, b, precedence(b) <= prec)
}

fn write_node<W: Write>(out: &mut W, node: &Expr) -> fmt::Result {
    match &**node {
        Node::Const(c) if c.is_sign_negative() && *c != 0.0 => {
            out.write_str("(")?;
            write_number(out, *c)?;
            out.write_str(")")
        }
        Node::Const(c) => write_number(out, c.abs()),
        Node::Var(v) => write!(out, "{v}"),
        Node::Param(p) => out.write_str(p),
        Node::Neg(a) => {
            out.write_char('-')?;
            child(out, a, precedence(a) < POWER)
        }
        Node::Add(a, b) => binary(out, a, " + ", b, SUM),
        Node::Sub(a, b) => binary(out, a, " - ", b, SUM),
        Node::Mul(a, b) => binary(out, a, "*", b, PRODUCT),
        Node::Div(a, b) => binary(out, a, "/", b, PRODUCT),
        Node::Pow(a, b) => {
            child(out, a, precedence(a) <= POWER)?;
            out.write_char('^')?;
            child(out, b, precedence(b) < ATOM)
        }
        Node::Call(f, a) => {
            out.write_str(f.name())?;
            out.write_char('(')?;
            write_node(out, a)?;
            out.write_char(')')
        }
    }
}

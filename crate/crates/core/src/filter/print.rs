use std::fmt::Write;

use super::lexer::{is_ident_continue, is_ident_start, KEYWORDS};
use super::{FilterExpr, Literal};

/// Canonical text for `e`. Keywords are lowercase, nested `and`/`or`
/// operands are parenthesized, and numbers use the shortest representation
/// that parses back to the same value.
pub fn print_filter(e: &FilterExpr) -> String {
    let mut out = String::new();
    write_expr(e, &mut out);
    out
}

fn write_expr(e: &FilterExpr, out: &mut String) {
    match e {
        FilterExpr::And(l, r) => write_binary(l, "and", r, out),
        FilterExpr::Or(l, r) => write_binary(l, "or", r, out),
        FilterExpr::Not(inner) => {
            out.push_str("not ");
            if inner.is_predicate() {
                write_expr(inner, out);
            } else {
                out.push('(');
                write_expr(inner, out);
                out.push(')');
            }
        }
        FilterExpr::Cmp { column, op, value } => {
            write_column(column, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_literal(value, out);
        }
        FilterExpr::Contains { column, needle } => {
            write_column(column, out);
            out.push_str(" contains ");
            write_string(needle, out);
        }
        FilterExpr::StartsWith { column, prefix } => {
            write_column(column, out);
            out.push_str(" startswith ");
            write_string(prefix, out);
        }
        FilterExpr::InSet { column, values } => {
            write_column(column, out);
            out.push_str(" in [");
            for (i, v) in values.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_literal(v, out);
            }
            out.push(']');
        }
        FilterExpr::IsMissing { column } => {
            write_column(column, out);
            out.push_str(" is missing");
        }
    }
}

fn write_binary(l: &FilterExpr, keyword: &str, r: &FilterExpr, out: &mut String) {
    write_operand(l, out);
    out.push(' ');
    out.push_str(keyword);
    out.push(' ');
    write_operand(r, out);
}

fn write_operand(e: &FilterExpr, out: &mut String) {
    if matches!(e, FilterExpr::And(..) | FilterExpr::Or(..)) {
        out.push('(');
        write_expr(e, out);
        out.push(')');
    } else {
        write_expr(e, out);
    }
}

fn write_column(name: &str, out: &mut String) {
    let mut chars = name.chars();
    let plain = chars.next().is_some_and(is_ident_start)
        && chars.all(is_ident_continue)
        && !KEYWORDS.iter().any(|k| k.eq_ignore_ascii_case(name));
    if plain {
        out.push_str(name);
    } else {
        out.push('`');
        out.push_str(&name.replace('`', "``"));
        out.push('`');
    }
}

fn write_literal(lit: &Literal, out: &mut String) {
    match lit {
        // Debug is the shortest round-tripping form and always shows a
        // fractional part or exponent (7.5, 4.0, 1e300).
        Literal::Number(n) => {
            let _ = write!(out, "{n:?}");
        }
        Literal::Text(s) => write_string(s, out),
    }
}

fn write_string(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

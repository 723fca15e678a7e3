use std::fmt;

use super::Formula;

// Binding strength, loosest first.
const CONCAT: u8 = 0;
const OR: u8 = 1;
const AND: u8 = 2;
const UNARY: u8 = 3;

fn precedence(f: &Formula) -> u8 {
    match f {
        Formula::Concat(..) => CONCAT,
        Formula::Or(..) => OR,
        Formula::And(..) => AND,
        Formula::Hold { .. } | Formula::Not(_) | Formula::Within { .. } => UNARY,
    }
}

pub(super) fn write_formula(out: &mut fmt::Formatter<'_>, f: &Formula) -> fmt::Result {
    write_prec(out, f, CONCAT)
}

/// Writes `f`, parenthesised if it binds looser than `min`.
fn write_prec(out: &mut fmt::Formatter<'_>, f: &Formula, min: u8) -> fmt::Result {
    let prec = precedence(f);
    if prec < min {
        out.write_str("(")?;
        write_bare(out, f)?;
        out.write_str(")")
    } else {
        write_bare(out, f)
    }
}

fn write_bare(out: &mut fmt::Formatter<'_>, f: &Formula) -> fmt::Result {
    match f {
        Formula::Hold {
            duration,
            atom,
            negated,
        } => {
            let bang = if *negated { "!" } else { "" };
            write!(out, "H^{duration} {bang}{atom}")
        }
        Formula::Not(sub) => {
            out.write_str("!")?;
            write_prec(out, sub, UNARY)
        }
        Formula::Within { inner, start, end } => {
            out.write_str("[")?;
            write_prec(out, inner, CONCAT)?;
            write!(out, "]^[{start},{end}]")
        }
        Formula::And(l, r) => write_binary(out, l, " & ", r, AND),
        Formula::Or(l, r) => write_binary(out, l, " | ", r, OR),
        Formula::Concat(l, r) => write_binary(out, l, " . ", r, CONCAT),
    }
}

// Left-associative: the right operand needs parentheses at equal precedence.
fn write_binary(
    out: &mut fmt::Formatter<'_>,
    lhs: &Formula,
    op: &str,
    rhs: &Formula,
    prec: u8,
) -> fmt::Result {
    write_prec(out, lhs, prec)?;
    out.write_str(op)?;
    write_prec(out, rhs, prec + 1)
}

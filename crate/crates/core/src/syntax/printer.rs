use std::fmt::{self, Write};

use super::ast::*;

/// Render `p` in the text format accepted by [`super::parse_program`].
pub fn pretty_print(p: &Program) -> String {
    let mut out = String::new();
    writeln!(out, "program {}", p.name).unwrap();
    writeln!(out, "domain {}", p.domain_size).unwrap();
    for s in &p.symbols {
        writeln!(out, "const {} = {}", s.name, s.value).unwrap();
    }
    for t in &p.threads {
        out.push('\n');
        writeln!(out, "thread {}", t.name).unwrap();
        if t.registers.is_empty() {
            out.push_str("regs\n");
        } else {
            writeln!(out, "regs {}", t.registers.join(" ")).unwrap();
        }
        writeln!(out, "init {}", t.init_label).unwrap();
        if let Some(exits) = &t.exit_labels {
            if exits.is_empty() {
                out.push_str("exit\n");
            } else {
                writeln!(out, "exit {}", exits.join(" ")).unwrap();
            }
        }
        out.push_str("begin\n");
        for li in &t.instructions {
            writeln!(out, "  {li}").unwrap();
        }
        out.push_str("end\n");
    }
    out
}

pub(crate) fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr, parent: u8) -> fmt::Result {
    match e {
        Expr::Const(c) => write!(f, "{c}"),
        Expr::Var(v) => f.write_str(v),
        Expr::Not(inner) => {
            f.write_str("!")?;
            write_expr(f, inner, 4)
        }
        Expr::Binary(op, lhs, rhs) => {
            let prec = op.precedence();
            let parens = prec < parent;
            if parens {
                f.write_str("(")?;
            }
            // Comparisons do not chain, so both operands of a comparison
            // need to bind tighter than it.
            let left_min = if op.is_comparison() { prec + 1 } else { prec };
            write_expr(f, lhs, left_min)?;
            write!(f, " {} ", op.symbol())?;
            write_expr(f, rhs, prec + 1)?;
            if parens {
                f.write_str(")")?;
            }
            Ok(())
        }
    }
}

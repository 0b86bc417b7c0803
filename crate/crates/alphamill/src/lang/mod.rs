//! The alpha expression language: typed AST over the operator catalog,
//! function-call surface syntax with infix sugar, canonical printing,
//! structural validation, and seeded random construction / mutation.

mod catalog;
mod parse;
mod random;
mod validate;

pub use catalog::{Category, Domain, Op, OperatorSignature, Slot, CATALOG, WINDOW_MAX, WINDOW_MIN};
pub use parse::{parse, ParseError};
pub use random::{mutate, random_instantiate, WindowMenu};
pub use validate::{validate, Diagnostic, PanelSchema};

use std::fmt;

/// Default cap on expression tree depth.
pub const DEFAULT_MAX_DEPTH: usize = 6;

/// An alpha expression. Window and literal nodes only appear as call
/// arguments in parameter slots; series positions hold fields or calls.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum AlphaExpr {
    Field(String),
    Literal(f64),
    Window(u32),
    Call(Op, Vec<AlphaExpr>),
}

impl AlphaExpr {
    /// Tree depth counting series nodes only: a leaf is 1, window and
    /// literal parameters contribute nothing.
    pub fn depth(&self) -> usize {
        match self {
            AlphaExpr::Field(_) | AlphaExpr::Literal(_) => 1,
            AlphaExpr::Window(_) => 0,
            AlphaExpr::Call(_, args) => 1 + args.iter().map(AlphaExpr::depth).max().unwrap_or(0),
        }
    }

    /// Output domain; only calls can be boolean.
    pub fn domain(&self) -> Domain {
        match self {
            AlphaExpr::Call(op, _) => op.output(),
            _ => Domain::Real,
        }
    }

    /// Field names referenced anywhere in the tree, deduplicated.
    pub fn fields(&self) -> std::collections::BTreeSet<&str> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_fields(&mut out);
        out
    }

    fn collect_fields<'a>(&'a self, out: &mut std::collections::BTreeSet<&'a str>) {
        match self {
            AlphaExpr::Field(name) => {
                out.insert(name.as_str());
            }
            AlphaExpr::Call(_, args) => args.iter().for_each(|a| a.collect_fields(out)),
            _ => {}
        }
    }

    /// Number of operator nodes.
    pub fn n_ops(&self) -> usize {
        match self {
            AlphaExpr::Call(_, args) => 1 + args.iter().map(AlphaExpr::n_ops).sum::<usize>(),
            _ => 0,
        }
    }
}

impl fmt::Display for AlphaExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaExpr::Field(name) => write!(f, "{name}"),
            AlphaExpr::Window(w) => write!(f, "{w}"),
            AlphaExpr::Literal(v) => {
                if v.fract() == 0.0 && v.abs() < 1e15 {
                    write!(f, "{}", *v as i64)
                } else {
                    write!(f, "{v}")
                }
            }
            AlphaExpr::Call(op, args) => {
                write!(f, "{}(", op.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Canonical function-call text; `parse(print(e))` is structurally `e`.
pub fn print(expr: &AlphaExpr) -> String {
    expr.to_string()
}

/// Canonical form: commutative operands sorted by printed form and double
/// negation collapsed. Idempotent; the basis for archive deduplication.
pub fn canonicalize(expr: &AlphaExpr) -> AlphaExpr {
    match expr {
        AlphaExpr::Call(op, args) => {
            let mut args: Vec<AlphaExpr> = args.iter().map(canonicalize).collect();
            if *op == Op::Neg {
                if let AlphaExpr::Call(Op::Neg, inner) = &args[0] {
                    return inner[0].clone();
                }
            }
            if op.is_commutative() {
                args.sort_by(|a, b| a.to_string().cmp(&b.to_string()));
            }
            AlphaExpr::Call(*op, args)
        }
        other => other.clone(),
    }
}

/// FNV-1a over the canonical printed form. Structurally equal expressions
/// hash equal; `add(a, b)` and `add(b, a)` collide by construction.
pub fn canonical_hash(expr: &AlphaExpr) -> u64 {
    let text = canonicalize(expr).to_string();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.as_bytes() {
        h ^= u64::from(*byte);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(name: &str) -> AlphaExpr {
        AlphaExpr::Field(name.to_string())
    }

    #[test]
    fn printing_is_canonical_call_syntax() {
        let e = AlphaExpr::Call(
            Op::Neg,
            vec![AlphaExpr::Call(
                Op::TsArgMax,
                vec![
                    AlphaExpr::Call(Op::Multiply, vec![field("x"), field("y")]),
                    AlphaExpr::Window(10),
                ],
            )],
        );
        assert_eq!(print(&e), "neg(ts_arg_max(multiply(x, y), 10))");
        assert_eq!(print(&field("close")), "close");
    }

    #[test]
    fn canonicalize_sorts_commutative_operands() {
        let e = AlphaExpr::Call(Op::Add, vec![field("volume"), field("close")]);
        assert_eq!(print(&canonicalize(&e)), "add(close, volume)");
        // non-commutative untouched
        let e = AlphaExpr::Call(Op::Subtract, vec![field("volume"), field("close")]);
        assert_eq!(print(&canonicalize(&e)), "subtract(volume, close)");
    }

    #[test]
    fn canonicalize_collapses_double_neg() {
        let inner = AlphaExpr::Call(Op::Rank, vec![field("close")]);
        let e = AlphaExpr::Call(
            Op::Neg,
            vec![AlphaExpr::Call(Op::Neg, vec![inner.clone()])],
        );
        assert_eq!(canonicalize(&e), inner);
    }

    #[test]
    fn commutative_hashes_collide() {
        let ab = AlphaExpr::Call(Op::Add, vec![field("a"), field("b")]);
        let ba = AlphaExpr::Call(Op::Add, vec![field("b"), field("a")]);
        assert_eq!(canonical_hash(&ab), canonical_hash(&ba));
        let sub = AlphaExpr::Call(Op::Subtract, vec![field("a"), field("b")]);
        assert_ne!(canonical_hash(&ab), canonical_hash(&sub));
    }

    #[test]
    fn depth_ignores_parameters() {
        let e = AlphaExpr::Call(
            Op::TsMean,
            vec![field("close"), AlphaExpr::Window(20)],
        );
        assert_eq!(e.depth(), 2);
        assert_eq!(field("close").depth(), 1);
    }
}

//! Structural validation of expressions against a panel schema. Returns
//! diagnostics rather than raising: a parsed tree either validates or
//! explains itself, never crashes the caller.

use std::collections::BTreeSet;
use std::fmt;

use super::catalog::{Domain, Slot, WINDOW_MAX, WINDOW_MIN};
use super::{AlphaExpr, DEFAULT_MAX_DEPTH};
use crate::panel::PanelSet;

/// What an expression may reference: field names, whether group labels
/// exist, and the depth cap.
#[derive(Debug, Clone)]
pub struct PanelSchema {
    pub fields: BTreeSet<String>,
    pub has_groups: bool,
    pub max_depth: usize,
}

impl PanelSchema {
    pub fn new(fields: impl IntoIterator<Item = String>, has_groups: bool) -> Self {
        Self {
            fields: fields.into_iter().collect(),
            has_groups,
            max_depth: DEFAULT_MAX_DEPTH,
        }
    }

    pub fn from_panel(panel: &PanelSet) -> Self {
        Self::new(panel.field_names(), panel.has_groups())
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    UnknownField(String),
    MissingGroups(String),
    DomainMismatch {
        op: String,
        arg: usize,
        expected: Domain,
        found: Domain,
    },
    LiteralNotAllowed {
        context: String,
    },
    WindowOutOfRange {
        op: String,
        value: u32,
    },
    DepthExceeded {
        depth: usize,
        max: usize,
    },
    MalformedNode {
        message: String,
    },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::UnknownField(name) => write!(f, "unknown field `{name}`"),
            Diagnostic::MissingGroups(op) => {
                write!(f, "`{op}` requires group labels, none attached to panel")
            }
            Diagnostic::DomainMismatch {
                op,
                arg,
                expected,
                found,
            } => write!(
                f,
                "`{op}` argument {arg} expects {expected:?} input, found {found:?}"
            ),
            Diagnostic::LiteralNotAllowed { context } => {
                write!(f, "literal constant not allowed in {context}")
            }
            Diagnostic::WindowOutOfRange { op, value } => write!(
                f,
                "`{op}` window {value} outside {WINDOW_MIN}..={WINDOW_MAX}"
            ),
            Diagnostic::DepthExceeded { depth, max } => {
                write!(f, "expression depth {depth} exceeds max {max}")
            }
            Diagnostic::MalformedNode { message } => write!(f, "malformed node: {message}"),
        }
    }
}

/// Check field existence, boolean/real domain agreement, group availability,
/// literal placement, window ranges, and the depth cap. Empty result = ok.
pub fn validate(expr: &AlphaExpr, schema: &PanelSchema) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let depth = expr.depth();
    if depth > schema.max_depth {
        out.push(Diagnostic::DepthExceeded {
            depth,
            max: schema.max_depth,
        });
    }
    walk(expr, schema, &mut out, "expression root");
    out
}

fn walk(expr: &AlphaExpr, schema: &PanelSchema, out: &mut Vec<Diagnostic>, context: &str) {
    match expr {
        AlphaExpr::Field(name) => {
            if !schema.fields.contains(name) {
                out.push(Diagnostic::UnknownField(name.clone()));
            }
        }
        AlphaExpr::Literal(_) => {
            // Free-floating constants make degenerate alphas; they are only
            // legal in Const and SeriesOrConst slots, which are handled by
            // the parent call before recursing.
            out.push(Diagnostic::LiteralNotAllowed {
                context: context.to_string(),
            });
        }
        AlphaExpr::Window(_) => {
            out.push(Diagnostic::MalformedNode {
                message: format!("window parameter in series position ({context})"),
            });
        }
        AlphaExpr::Call(op, args) => {
            let sig = op.signature();
            if sig.requires_groups && !schema.has_groups {
                out.push(Diagnostic::MissingGroups(sig.name.to_string()));
            }
            if args.len() != sig.slots.len() {
                out.push(Diagnostic::MalformedNode {
                    message: format!(
                        "`{}` has {} arguments, expects {}",
                        sig.name,
                        args.len(),
                        sig.slots.len()
                    ),
                });
                return;
            }
            for (idx, (arg, slot)) in args.iter().zip(sig.slots).enumerate() {
                match slot {
                    Slot::Window => match arg {
                        AlphaExpr::Window(w) => {
                            if *w < WINDOW_MIN || *w > WINDOW_MAX {
                                out.push(Diagnostic::WindowOutOfRange {
                                    op: sig.name.to_string(),
                                    value: *w,
                                });
                            }
                        }
                        _ => out.push(Diagnostic::MalformedNode {
                            message: format!(
                                "`{}` argument {idx} must be a window parameter",
                                sig.name
                            ),
                        }),
                    },
                    Slot::Const => match arg {
                        AlphaExpr::Literal(_) => {}
                        _ => out.push(Diagnostic::MalformedNode {
                            message: format!(
                                "`{}` argument {idx} must be a literal parameter",
                                sig.name
                            ),
                        }),
                    },
                    Slot::SeriesOrConst => {
                        if !matches!(arg, AlphaExpr::Literal(_)) {
                            walk(arg, schema, out, &format!("argument {idx} of `{}`", sig.name));
                        }
                    }
                    Slot::Series => {
                        // Boolean outputs materialize as 0/1 reals, so a
                        // bool-valued argument is acceptable here.
                        walk(arg, schema, out, &format!("argument {idx} of `{}`", sig.name));
                    }
                    Slot::Bool => {
                        if arg.domain() != Domain::Bool {
                            out.push(Diagnostic::DomainMismatch {
                                op: sig.name.to_string(),
                                arg: idx,
                                expected: Domain::Bool,
                                found: arg.domain(),
                            });
                        }
                        walk(arg, schema, out, &format!("argument {idx} of `{}`", sig.name));
                    }
                }
            }
        }
    }
}

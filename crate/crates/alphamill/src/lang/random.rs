//! Seeded random expression construction and single-move mutation.
//!
//! Generation mixes free recursive composition with a set of structured
//! starting shapes (regression of one field on another, reversal distance
//! since a product's peak, rolling skew/IR of normalized products, ranked
//! co-moments) so that the useful nonlinear forms appear with workable
//! probability instead of requiring a lucky deep draw.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::catalog::{Domain, Op, Slot, WINDOW_MAX, CATALOG};
use super::validate::{validate, PanelSchema};
use super::AlphaExpr;
use crate::rng::{derive_seed, rng_from_seed};

/// Bucket counts offered to the `quantile` operator.
const QUANTILE_BUCKETS: [u32; 4] = [2, 4, 5, 10];
/// Probability of instantiating a structured template instead of free
/// recursion.
const TEMPLATE_PROB: f64 = 0.25;

/// Per-field window candidates, typically from the data-quality stage.
/// Unknown fields fall back to the default (daily-frequency) set.
#[derive(Debug, Clone)]
pub struct WindowMenu {
    per_field: BTreeMap<String, Vec<u32>>,
    default: Vec<u32>,
}

impl Default for WindowMenu {
    fn default() -> Self {
        Self::uniform(&[5, 10, 21, 63])
    }
}

impl WindowMenu {
    /// Same candidate set for every field.
    pub fn uniform(windows: &[u32]) -> Self {
        let mut sorted: Vec<u32> = windows.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        assert!(!sorted.is_empty(), "window menu cannot be empty");
        Self {
            per_field: BTreeMap::new(),
            default: sorted,
        }
    }

    pub fn insert(&mut self, field: &str, windows: impl IntoIterator<Item = u32>) {
        let mut sorted: Vec<u32> = windows.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        if !sorted.is_empty() {
            self.per_field.insert(field.to_string(), sorted);
        }
    }

    /// Sorted union of the candidate windows of the given fields; the
    /// default set when none of them carries an entry.
    pub fn menu_for(&self, fields: &BTreeSet<&str>) -> Vec<u32> {
        let mut union: Vec<u32> = fields
            .iter()
            .filter_map(|f| self.per_field.get(*f))
            .flatten()
            .copied()
            .collect();
        union.sort_unstable();
        union.dedup();
        if union.is_empty() {
            self.default.clone()
        } else {
            union
        }
    }
}

struct Gen<'a> {
    rng: ChaCha8Rng,
    windows: &'a WindowMenu,
    fields: Vec<&'a String>,
    unary_real: Vec<Op>,
    binary_real: Vec<Op>,
    ts_one: Vec<Op>,
    ts_two: Vec<Op>,
}

impl<'a> Gen<'a> {
    fn new(rng: ChaCha8Rng, schema: &'a PanelSchema, windows: &'a WindowMenu) -> Self {
        let allow = |sig: &&'static super::catalog::OperatorSignature| {
            !sig.requires_groups || schema.has_groups
        };
        let unary_real = CATALOG
            .iter()
            .filter(allow)
            .filter(|s| s.slots == [Slot::Series] && s.output == Domain::Real)
            .map(|s| s.op)
            .collect();
        let binary_real = CATALOG
            .iter()
            .filter(|s| s.slots == [Slot::Series, Slot::Series] && s.output == Domain::Real)
            .map(|s| s.op)
            .collect();
        let ts_one = CATALOG
            .iter()
            .filter(|s| {
                s.slots == [Slot::Series, Slot::Window]
                    && s.output == Domain::Real
                    && s.op != Op::Quantile
            })
            .map(|s| s.op)
            .collect();
        let ts_two = CATALOG
            .iter()
            .filter(|s| s.slots == [Slot::Series, Slot::Series, Slot::Window])
            .map(|s| s.op)
            .collect();
        Self {
            rng,
            windows,
            fields: schema.fields.iter().collect(),
            unary_real,
            binary_real,
            ts_one,
            ts_two,
        }
    }

    fn field(&mut self) -> AlphaExpr {
        let idx = self.rng.random_range(0..self.fields.len());
        AlphaExpr::Field(self.fields[idx].clone())
    }

    fn two_fields(&mut self) -> (AlphaExpr, AlphaExpr) {
        let a = self.rng.random_range(0..self.fields.len());
        let b = if self.fields.len() > 1 {
            let mut b = self.rng.random_range(0..self.fields.len() - 1);
            if b >= a {
                b += 1;
            }
            b
        } else {
            a
        };
        (
            AlphaExpr::Field(self.fields[a].clone()),
            AlphaExpr::Field(self.fields[b].clone()),
        )
    }

    fn pick<T: Copy>(&mut self, pool: &[T]) -> T {
        pool[self.rng.random_range(0..pool.len())]
    }

    fn window_for(&mut self, subtree: &AlphaExpr) -> u32 {
        let menu = self.windows.menu_for(&subtree.fields());
        menu[self.rng.random_range(0..menu.len())]
    }

    fn window_for_pair(&mut self, a: &AlphaExpr, b: &AlphaExpr) -> u32 {
        let mut fields = a.fields();
        fields.extend(b.fields());
        let menu = self.windows.menu_for(&fields);
        menu[self.rng.random_range(0..menu.len())]
    }

    fn gen_real(&mut self, budget: usize) -> AlphaExpr {
        if budget <= 1 {
            return self.field();
        }
        // weighted choice over shape groups
        let weights: &[(f64, u8)] = &[
            (1.0, 0), // field leaf
            (1.5, 1), // unary real
            (2.0, 2), // binary real
            (3.0, 3), // one-series window op
            (1.5, 4), // two-series window op
            (0.3, 5), // quantile
            (0.3, 6), // macd
            (0.2, 7), // tail
            (if budget >= 3 { 0.5 } else { 0.0 }, 8), // if_else
        ];
        let total: f64 = weights.iter().map(|(w, _)| w).sum();
        let mut roll = self.rng.random::<f64>() * total;
        let mut choice = 0u8;
        for (w, tag) in weights {
            if roll < *w {
                choice = *tag;
                break;
            }
            roll -= w;
        }
        match choice {
            0 => self.field(),
            1 => {
                let op = self.pick(&self.unary_real.clone());
                AlphaExpr::Call(op, vec![self.gen_real(budget - 1)])
            }
            2 => {
                let op = self.pick(&self.binary_real.clone());
                let a = self.gen_real(budget - 1);
                let b = self.gen_real(budget - 1);
                AlphaExpr::Call(op, vec![a, b])
            }
            3 => {
                let op = self.pick(&self.ts_one.clone());
                let child = self.gen_real(budget - 1);
                let w = self.window_for(&child);
                AlphaExpr::Call(op, vec![child, AlphaExpr::Window(w)])
            }
            4 => {
                let op = self.pick(&self.ts_two.clone());
                let a = self.gen_real(budget - 1);
                let b = self.gen_real(budget - 1);
                let w = self.window_for_pair(&a, &b);
                AlphaExpr::Call(op, vec![a, b, AlphaExpr::Window(w)])
            }
            5 => {
                let child = self.gen_real(budget - 1);
                let q = self.pick(&QUANTILE_BUCKETS);
                AlphaExpr::Call(Op::Quantile, vec![child, AlphaExpr::Window(q)])
            }
            6 => {
                let child = self.gen_real(budget - 1);
                let a = self.window_for(&child);
                let mut b = self.window_for(&child);
                if a == b {
                    b = if a < WINDOW_MAX { a + 1 } else { a - 1 };
                }
                AlphaExpr::Call(
                    Op::TsMacd,
                    vec![
                        child,
                        AlphaExpr::Window(a.min(b)),
                        AlphaExpr::Window(a.max(b)),
                    ],
                )
            }
            7 => {
                let child = self.gen_real(budget - 1);
                let lo = self.pick(&[-2.0, -1.0, 0.0]);
                let hi = self.pick(&[1.0, 2.0]);
                let v = self.pick(&[-1.0, 0.0, 1.0]);
                AlphaExpr::Call(
                    Op::Tail,
                    vec![
                        child,
                        AlphaExpr::Literal(lo),
                        AlphaExpr::Literal(hi),
                        AlphaExpr::Literal(v),
                    ],
                )
            }
            _ => {
                let cond = self.gen_bool(budget - 1);
                let a = self.branch(budget - 1);
                let b = self.branch(budget - 1);
                AlphaExpr::Call(Op::IfElse, vec![cond, a, b])
            }
        }
    }

    fn branch(&mut self, budget: usize) -> AlphaExpr {
        if self.rng.random::<f64>() < 0.3 {
            AlphaExpr::Literal(self.pick(&[-1.0, 0.0, 1.0]))
        } else {
            self.gen_real(budget)
        }
    }

    fn gen_bool(&mut self, budget: usize) -> AlphaExpr {
        debug_assert!(budget >= 2);
        if budget >= 3 && self.rng.random::<f64>() < 0.3 {
            match self.rng.random_range(0..3u8) {
                0 => {
                    let a = self.gen_bool(budget - 1);
                    let b = self.gen_bool(budget - 1);
                    AlphaExpr::Call(Op::And, vec![a, b])
                }
                1 => {
                    let a = self.gen_bool(budget - 1);
                    let b = self.gen_bool(budget - 1);
                    AlphaExpr::Call(Op::Or, vec![a, b])
                }
                _ => {
                    let a = self.gen_bool(budget - 1);
                    AlphaExpr::Call(Op::Not, vec![a])
                }
            }
        } else {
            let op = self.pick(&[Op::Equal, Op::Less, Op::Greater]);
            let a = self.gen_real(budget - 1);
            let b = self.gen_real(budget - 1);
            AlphaExpr::Call(op, vec![a, b])
        }
    }

    /// Structured shapes; depth noted per template.
    fn template(&mut self, max_depth: usize) -> Option<AlphaExpr> {
        let candidates: &[(usize, u8)] = &[
            (2, 0),  // ts_regression(y, x, d)
            (4, 1),  // neg(ts_arg_max(multiply(x, y), d))
            (4, 2),  // ts_skew(ts_rank(multiply(x, y), d1), d2)
            (4, 3),  // ts_ir(ts_zscore(multiply(x, y), d1), d2)
            (3, 4),  // rank(ts_corr(x, y, d))
            (3, 5),  // rank(ts_co_kurtosis(x, y, d))
            (3, 6),  // rank(ts_co_skewness(x, y, d))
            (3, 7),  // normalize(ts_arg_max(x, d))
            (3, 8),  // rank(divide(x, y))
            (2, 9),  // rank(x)
            (2, 10), // ts_zscore(x, d)
        ];
        let eligible: Vec<u8> = candidates
            .iter()
            .filter(|(d, _)| *d <= max_depth)
            .map(|(_, t)| *t)
            .collect();
        if eligible.is_empty() {
            return None;
        }
        let tag = self.pick(&eligible);
        let (x, y) = self.two_fields();
        let product = AlphaExpr::Call(Op::Multiply, vec![x.clone(), y.clone()]);
        let w1 = self.window_for_pair(&x, &y);
        let w2 = self.window_for_pair(&x, &y);
        let win = AlphaExpr::Window(w1);
        Some(match tag {
            0 => AlphaExpr::Call(Op::TsRegression, vec![y, x, win]),
            1 => AlphaExpr::Call(
                Op::Neg,
                vec![AlphaExpr::Call(Op::TsArgMax, vec![product, win])],
            ),
            2 => AlphaExpr::Call(
                Op::TsSkew,
                vec![
                    AlphaExpr::Call(Op::TsRank, vec![product, win]),
                    AlphaExpr::Window(w2),
                ],
            ),
            3 => AlphaExpr::Call(
                Op::TsIr,
                vec![
                    AlphaExpr::Call(Op::TsZscore, vec![product, win]),
                    AlphaExpr::Window(w2),
                ],
            ),
            4 => AlphaExpr::Call(
                Op::Rank,
                vec![AlphaExpr::Call(Op::TsCorr, vec![x, y, win])],
            ),
            5 => AlphaExpr::Call(
                Op::Rank,
                vec![AlphaExpr::Call(Op::TsCoKurtosis, vec![x, y, win])],
            ),
            6 => AlphaExpr::Call(
                Op::Rank,
                vec![AlphaExpr::Call(Op::TsCoSkewness, vec![x, y, win])],
            ),
            7 => {
                let w = self.window_for(&x);
                AlphaExpr::Call(
                    Op::Normalize,
                    vec![AlphaExpr::Call(Op::TsArgMax, vec![x, AlphaExpr::Window(w)])],
                )
            }
            8 => AlphaExpr::Call(
                Op::Rank,
                vec![AlphaExpr::Call(Op::Divide, vec![x, y])],
            ),
            9 => AlphaExpr::Call(Op::Rank, vec![x]),
            _ => {
                let w = self.window_for(&x);
                AlphaExpr::Call(Op::TsZscore, vec![x, AlphaExpr::Window(w)])
            }
        })
    }
}

/// Draw a fresh valid expression. Deterministic in the seed; depth never
/// exceeds `max_depth`.
pub fn random_instantiate(
    seed: u64,
    schema: &PanelSchema,
    windows: &WindowMenu,
    max_depth: usize,
) -> AlphaExpr {
    assert!(!schema.fields.is_empty(), "schema has no fields");
    assert!(max_depth >= 1);
    let schema = schema.clone().with_max_depth(max_depth);
    let mut gen = Gen::new(rng_from_seed(seed), &schema, windows);
    for _ in 0..64 {
        let expr = if gen.rng.random::<f64>() < TEMPLATE_PROB {
            match gen.template(max_depth) {
                Some(e) => e,
                None => gen.gen_real(max_depth),
            }
        } else {
            gen.gen_real(max_depth)
        };
        if validate(&expr, &schema).is_empty() {
            return expr;
        }
    }
    unreachable!("generator produced 64 invalid expressions in a row");
}

// ---------------------------------------------------------------------------
// mutation
// ---------------------------------------------------------------------------

fn node_at<'e>(expr: &'e AlphaExpr, path: &[usize]) -> &'e AlphaExpr {
    let mut cur = expr;
    for &idx in path {
        match cur {
            AlphaExpr::Call(_, args) => cur = &args[idx],
            _ => unreachable!("path into a leaf"),
        }
    }
    cur
}

fn with_replaced(expr: &AlphaExpr, path: &[usize], new: AlphaExpr) -> AlphaExpr {
    if path.is_empty() {
        return new;
    }
    match expr {
        AlphaExpr::Call(op, args) => {
            let mut args = args.clone();
            args[path[0]] = with_replaced(&args[path[0]], &path[1..], new);
            AlphaExpr::Call(*op, args)
        }
        _ => unreachable!("path into a leaf"),
    }
}

/// Preorder paths of series nodes (fields and calls; parameters excluded).
fn series_paths(expr: &AlphaExpr, base: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    match expr {
        AlphaExpr::Field(_) | AlphaExpr::Call(_, _) => out.push(base.clone()),
        _ => return,
    }
    if let AlphaExpr::Call(_, args) = expr {
        for (i, a) in args.iter().enumerate() {
            base.push(i);
            series_paths(a, base, out);
            base.pop();
        }
    }
}

struct Mutator<'a> {
    rng: ChaCha8Rng,
    schema: &'a PanelSchema,
    windows: &'a WindowMenu,
}

impl Mutator<'_> {
    fn replace_operator(&mut self, expr: &AlphaExpr) -> Option<AlphaExpr> {
        let mut paths = Vec::new();
        series_paths(expr, &mut Vec::new(), &mut paths);
        let eligible: Vec<(Vec<usize>, Vec<Op>)> = paths
            .into_iter()
            .filter_map(|p| {
                let node = node_at(expr, &p);
                let AlphaExpr::Call(op, _) = node else {
                    return None;
                };
                if *op == Op::Quantile {
                    return None;
                }
                let sig = op.signature();
                let alts: Vec<Op> = CATALOG
                    .iter()
                    .filter(|s| {
                        s.op != *op
                            && s.op != Op::Quantile
                            && s.slots == sig.slots
                            && s.output == sig.output
                            && (!s.requires_groups || self.schema.has_groups)
                    })
                    .map(|s| s.op)
                    .collect();
                (!alts.is_empty()).then_some((p, alts))
            })
            .collect();
        if eligible.is_empty() {
            return None;
        }
        let (path, alts) = &eligible[self.rng.random_range(0..eligible.len())];
        let new_op = alts[self.rng.random_range(0..alts.len())];
        let AlphaExpr::Call(_, args) = node_at(expr, path) else {
            unreachable!()
        };
        Some(with_replaced(
            expr,
            path,
            AlphaExpr::Call(new_op, args.clone()),
        ))
    }

    fn jitter_window(&mut self, expr: &AlphaExpr) -> Option<AlphaExpr> {
        let mut paths = Vec::new();
        series_paths(expr, &mut Vec::new(), &mut paths);
        let mut targets: Vec<(Vec<usize>, usize, Vec<u32>)> = Vec::new();
        for p in paths {
            let AlphaExpr::Call(op, args) = node_at(expr, &p) else {
                continue;
            };
            for (idx, (arg, slot)) in args.iter().zip(op.signature().slots).enumerate() {
                let (AlphaExpr::Window(cur), Slot::Window) = (arg, slot) else {
                    continue;
                };
                let menu: Vec<u32> = if *op == Op::Quantile {
                    QUANTILE_BUCKETS.to_vec()
                } else {
                    let node = node_at(expr, &p);
                    self.windows.menu_for(&node.fields())
                };
                let choices: Vec<u32> = menu.into_iter().filter(|w| w != cur).collect();
                if !choices.is_empty() {
                    targets.push((p.clone(), idx, choices));
                }
            }
        }
        if targets.is_empty() {
            return None;
        }
        let (path, arg_idx, choices) = &targets[self.rng.random_range(0..targets.len())];
        let new_w = choices[self.rng.random_range(0..choices.len())];
        let AlphaExpr::Call(op, args) = node_at(expr, path) else {
            unreachable!()
        };
        let mut args = args.clone();
        args[*arg_idx] = AlphaExpr::Window(new_w);
        Some(with_replaced(expr, path, AlphaExpr::Call(*op, args)))
    }

    fn swap_field(&mut self, expr: &AlphaExpr) -> Option<AlphaExpr> {
        if self.schema.fields.len() < 2 {
            return None;
        }
        let mut paths = Vec::new();
        series_paths(expr, &mut Vec::new(), &mut paths);
        let field_paths: Vec<Vec<usize>> = paths
            .into_iter()
            .filter(|p| matches!(node_at(expr, p), AlphaExpr::Field(_)))
            .collect();
        if field_paths.is_empty() {
            return None;
        }
        let path = &field_paths[self.rng.random_range(0..field_paths.len())];
        let AlphaExpr::Field(cur) = node_at(expr, path) else {
            unreachable!()
        };
        let others: Vec<&String> = self.schema.fields.iter().filter(|f| *f != cur).collect();
        let new_field = others[self.rng.random_range(0..others.len())];
        Some(with_replaced(
            expr,
            path,
            AlphaExpr::Field(new_field.clone()),
        ))
    }

    fn wrap_root(&mut self, expr: &AlphaExpr) -> Option<AlphaExpr> {
        if expr.depth() >= self.schema.max_depth {
            return None;
        }
        match expr.domain() {
            Domain::Bool => Some(AlphaExpr::Call(Op::Not, vec![expr.clone()])),
            Domain::Real => {
                let pool: Vec<Op> = CATALOG
                    .iter()
                    .filter(|s| {
                        s.slots == [Slot::Series]
                            && s.output == Domain::Real
                            && (!s.requires_groups || self.schema.has_groups)
                    })
                    .map(|s| s.op)
                    .collect();
                let op = pool[self.rng.random_range(0..pool.len())];
                Some(AlphaExpr::Call(op, vec![expr.clone()]))
            }
        }
    }

    fn replace_subtree(&mut self, expr: &AlphaExpr) -> Option<AlphaExpr> {
        let mut paths = Vec::new();
        series_paths(expr, &mut Vec::new(), &mut paths);
        let path = paths[self.rng.random_range(0..paths.len())].clone();
        let old = node_at(expr, &path);
        let remaining = self.schema.max_depth.saturating_sub(path.len());
        let budget = remaining.min(2);
        if budget == 0 {
            return None;
        }
        if old.domain() == Domain::Bool && budget < 2 {
            return None;
        }
        let mut gen = Gen::new(self.rng.clone(), self.schema, self.windows);
        for _ in 0..4 {
            let fresh = match old.domain() {
                Domain::Real => gen.gen_real(budget),
                Domain::Bool => gen.gen_bool(budget),
            };
            if &fresh != old {
                self.rng = gen.rng;
                return Some(with_replaced(expr, &path, fresh));
            }
        }
        self.rng = gen.rng;
        None
    }

    fn prune_to_child(&mut self, expr: &AlphaExpr) -> Option<AlphaExpr> {
        let mut paths = Vec::new();
        series_paths(expr, &mut Vec::new(), &mut paths);
        let mut targets: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
        for p in paths {
            let node = node_at(expr, &p);
            let AlphaExpr::Call(_, args) = node else {
                continue;
            };
            let children: Vec<usize> = args
                .iter()
                .enumerate()
                .filter(|(_, a)| {
                    matches!(a, AlphaExpr::Field(_) | AlphaExpr::Call(_, _))
                        && a.domain() == node.domain()
                })
                .map(|(i, _)| i)
                .collect();
            if !children.is_empty() {
                targets.push((p, children));
            }
        }
        if targets.is_empty() {
            return None;
        }
        let (path, children) = &targets[self.rng.random_range(0..targets.len())];
        let child_idx = children[self.rng.random_range(0..children.len())];
        let AlphaExpr::Call(_, args) = node_at(expr, path) else {
            unreachable!()
        };
        Some(with_replaced(expr, path, args[child_idx].clone()))
    }
}

/// Apply one randomly chosen structural move. The result is always valid
/// and differs from the input; when no legal move exists (degenerate
/// expressions), a fresh random expression is returned instead.
pub fn mutate(
    seed: u64,
    expr: &AlphaExpr,
    schema: &PanelSchema,
    windows: &WindowMenu,
    max_depth: usize,
) -> AlphaExpr {
    let schema = schema.clone().with_max_depth(max_depth);
    let mut m = Mutator {
        rng: rng_from_seed(derive_seed(seed, 0x6d76)),
        schema: &schema,
        windows,
    };

    // shuffled move order, tried until one yields a valid, different tree
    let mut order: Vec<u8> = (0..6).collect();
    for i in (1..order.len()).rev() {
        let j = m.rng.random_range(0..=i);
        order.swap(i, j);
    }
    for mv in order {
        let candidate = match mv {
            0 => m.replace_operator(expr),
            1 => m.jitter_window(expr),
            2 => m.swap_field(expr),
            3 => m.wrap_root(expr),
            4 => m.replace_subtree(expr),
            _ => m.prune_to_child(expr),
        };
        if let Some(c) = candidate {
            if &c != expr && validate(&c, &schema).is_empty() {
                return c;
            }
        }
    }

    // no legal move: fall back to a fresh draw
    for k in 0..8 {
        let fresh = random_instantiate(derive_seed(seed, 0xF0 + k), &schema, windows, max_depth);
        if &fresh != expr {
            return fresh;
        }
    }
    random_instantiate(derive_seed(seed, 0xFF), &schema, windows, max_depth)
}

//! Memoized recursive evaluation shared by every semantics.
//!
//! A [`CompiledFormula`] is the formula flattened into an arena with atoms
//! resolved and within bounds converted to sample counts. [`evaluate`] walks
//! it over sample-index ranges `[i, j]` and delegates the meaning of literals
//! and connectives to a [`Domain`]: Boolean, robustness, AGM robustness, or
//! the interval versions used by the monitors.

use std::collections::HashMap;

use crate::formula::{off_grid, Formula};
use crate::trace::{PredicateSpec, PredicateTable, TraceError, Word};

use super::EvalError;

pub(crate) type NodeId = usize;

#[derive(Debug, Clone)]
pub(crate) enum Node {
    Hold {
        steps: usize,
        atom: usize,
        negated: bool,
    },
    And(NodeId, NodeId),
    Or(NodeId, NodeId),
    Not(NodeId),
    Concat(NodeId, NodeId),
    Within {
        child: NodeId,
        start: usize,
        end: usize,
    },
}

/// A formula resolved against a predicate table for a fixed sampling step.
#[derive(Debug, Clone)]
pub struct CompiledFormula {
    nodes: Vec<Node>,
    root: NodeId,
    atoms: Vec<PredicateSpec>,
    horizon_steps: usize,
    dt: f64,
}

impl CompiledFormula {
    pub fn new(formula: &Formula, table: &PredicateTable, dt: f64) -> Result<Self, EvalError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(EvalError::Trace(TraceError::InvalidStep(dt)));
        }
        let mut builder = Builder {
            table,
            dt,
            nodes: Vec::new(),
            atoms: Vec::new(),
        };
        let (root, horizon_steps) = builder.add(formula)?;
        Ok(Self {
            nodes: builder.nodes,
            root,
            atoms: builder.atoms,
            horizon_steps,
            dt,
        })
    }

    /// Horizon in samples: a complete evaluation needs `horizon_steps() + 1` samples.
    pub fn horizon_steps(&self) -> usize {
        self.horizon_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Resolved atoms, indexed as in the compiled nodes.
    pub fn atoms(&self) -> &[PredicateSpec] {
        &self.atoms
    }

    /// Signals read by any atom, sorted and deduplicated.
    pub fn signals(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .atoms
            .iter()
            .flat_map(|a| a.constraints().iter().map(|c| c.signal.clone()))
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub(crate) fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

struct Builder<'t> {
    table: &'t PredicateTable,
    dt: f64,
    nodes: Vec<Node>,
    atoms: Vec<PredicateSpec>,
}

impl Builder<'_> {
    fn steps(&self, bound: u64) -> Result<usize, EvalError> {
        if off_grid(bound as f64, self.dt) {
            return Err(EvalError::OffGridBound { bound, dt: self.dt });
        }
        Ok((bound as f64 / self.dt).round() as usize)
    }

    fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    /// Returns the node id and its horizon in samples.
    fn add(&mut self, f: &Formula) -> Result<(NodeId, usize), EvalError> {
        Ok(match f {
            Formula::Hold {
                duration,
                atom,
                negated,
            } => {
                let spec = self
                    .table
                    .get(atom.name())
                    .ok_or_else(|| EvalError::UnresolvedAtom(atom.name().to_string()))?;
                let index = match self.atoms.iter().position(|a| a.name() == spec.name()) {
                    Some(i) => i,
                    None => {
                        self.atoms.push(spec.clone());
                        self.atoms.len() - 1
                    }
                };
                let steps = *duration as usize;
                let id = self.push(Node::Hold {
                    steps,
                    atom: index,
                    negated: *negated,
                });
                (id, steps)
            }
            Formula::And(l, r) | Formula::Or(l, r) => {
                let (l, hl) = self.add(l)?;
                let (r, hr) = self.add(r)?;
                let node = if matches!(f, Formula::And(..)) {
                    Node::And(l, r)
                } else {
                    Node::Or(l, r)
                };
                (self.push(node), hl.max(hr))
            }
            Formula::Not(sub) => {
                let (s, h) = self.add(sub)?;
                (self.push(Node::Not(s)), h)
            }
            Formula::Concat(l, r) => {
                let (l, hl) = self.add(l)?;
                let (r, hr) = self.add(r)?;
                (self.push(Node::Concat(l, r)), hl + hr + 1)
            }
            Formula::Within { inner, start, end } => {
                if end < start {
                    return Err(EvalError::InvertedWindow {
                        start: *start,
                        end: *end,
                    });
                }
                let start = self.steps(*start)?;
                let end = self.steps(*end)?;
                let (child, _) = self.add(inner)?;
                (self.push(Node::Within { child, start, end }), end)
            }
        })
    }
}

/// Per-atom literal values for each observed sample.
#[derive(Debug, Clone)]
pub(crate) struct Valuation {
    margins: Vec<Vec<f64>>,
    etas: Option<Vec<Vec<f64>>>,
}

impl Valuation {
    pub(crate) fn empty(formula: &CompiledFormula, with_eta: bool) -> Result<Self, EvalError> {
        if with_eta {
            if let Some(atom) = formula.atoms().iter().find(|a| !a.has_bounds()) {
                return Err(EvalError::MissingBounds(atom.name().to_string()));
            }
        }
        let n = formula.atoms().len();
        Ok(Self {
            margins: vec![Vec::new(); n],
            etas: with_eta.then(|| vec![Vec::new(); n]),
        })
    }

    pub(crate) fn from_word(
        formula: &CompiledFormula,
        word: &Word,
        with_eta: bool,
    ) -> Result<Self, EvalError> {
        let mut v = Self::empty(formula, with_eta)?;
        for k in 0..word.len() {
            v.push(formula, |s| word.signal(s).map(|c| c[k]))?;
        }
        Ok(v)
    }

    pub(crate) fn push(
        &mut self,
        formula: &CompiledFormula,
        value_of: impl Fn(&str) -> Option<f64> + Copy,
    ) -> Result<(), EvalError> {
        // Compute everything first so a failure leaves the valuation unchanged.
        let mut margins = Vec::with_capacity(formula.atoms().len());
        let mut etas = Vec::with_capacity(formula.atoms().len());
        for atom in formula.atoms() {
            margins.push(atom.margin_with(value_of)?);
            if self.etas.is_some() {
                etas.push(atom.eta_margin_with(value_of)?);
            }
        }
        for (column, m) in self.margins.iter_mut().zip(margins) {
            column.push(m);
        }
        if let Some(columns) = &mut self.etas {
            for (column, e) in columns.iter_mut().zip(etas) {
                column.push(e);
            }
        }
        Ok(())
    }

    pub(crate) fn len(&self) -> usize {
        self.margins.first().map_or(0, Vec::len)
    }

    pub(crate) fn margin(&self, atom: usize, k: usize) -> f64 {
        self.margins[atom][k]
    }

    pub(crate) fn eta(&self, atom: usize, k: usize) -> f64 {
        self.etas
            .as_ref()
            .expect("valuation built without AGM margins")[atom][k]
    }

    pub(crate) fn has_eta(&self) -> bool {
        self.etas.is_some()
    }
}

/// Meaning of literals and connectives for one semantics.
pub(crate) trait Domain {
    type Value: Copy;

    /// Value of a subword too short for the operator (Boolean false).
    fn bottom(&self) -> Self::Value;
    fn literal(&self, atom: usize, negated: bool, k: usize) -> Self::Value;
    fn negate(&self, v: Self::Value) -> Self::Value;
    fn conj(&self, values: &[Self::Value]) -> Self::Value;
    fn disj(&self, values: &[Self::Value]) -> Self::Value;
}

/// Evaluates `formula` on the sample range `0..len` under `domain`.
pub(crate) fn evaluate<D: Domain>(formula: &CompiledFormula, domain: &D, len: usize) -> D::Value {
    assert!(len > 0, "evaluation needs at least one sample");
    let mut eval = Evaluator {
        nodes: formula.nodes(),
        domain,
        memo: Memo::new(formula.nodes().len(), len),
    };
    eval.eval(formula.root, 0, len - 1)
}

/// Largest dense memo table, in entries.
const DENSE_LIMIT: usize = 1 << 22;

enum Memo<V> {
    Dense { len: usize, table: Vec<Option<V>> },
    Sparse(HashMap<(NodeId, usize, usize), V>),
}

impl<V: Copy> Memo<V> {
    fn new(nodes: usize, len: usize) -> Self {
        match nodes.checked_mul(len).and_then(|n| n.checked_mul(len)) {
            Some(size) if size <= DENSE_LIMIT => Memo::Dense {
                len,
                table: vec![None; size],
            },
            _ => Memo::Sparse(HashMap::new()),
        }
    }

    fn get(&self, id: NodeId, i: usize, j: usize) -> Option<V> {
        match self {
            Memo::Dense { len, table } => table[(id * len + i) * len + j],
            Memo::Sparse(map) => map.get(&(id, i, j)).copied(),
        }
    }

    fn insert(&mut self, id: NodeId, i: usize, j: usize, v: V) {
        match self {
            Memo::Dense { len, table } => table[(id * *len + i) * *len + j] = Some(v),
            Memo::Sparse(map) => {
                map.insert((id, i, j), v);
            }
        }
    }
}

struct Evaluator<'a, D: Domain> {
    nodes: &'a [Node],
    domain: &'a D,
    memo: Memo<D::Value>,
}

impl<D: Domain> Evaluator<'_, D> {
    /// Value of node `id` on the subword of samples `i..=j` (`i <= j`).
    fn eval(&mut self, id: NodeId, i: usize, j: usize) -> D::Value {
        if let Some(v) = self.memo.get(id, i, j) {
            return v;
        }
        let d = self.domain;
        let v = match self.nodes[id] {
            Node::Hold {
                steps,
                atom,
                negated,
            } => {
                if j - i < steps {
                    d.bottom()
                } else {
                    let window: Vec<_> = (i..=i + steps)
                        .map(|k| d.literal(atom, negated, k))
                        .collect();
                    d.conj(&window)
                }
            }
            Node::And(l, r) => {
                let pair = [self.eval(l, i, j), self.eval(r, i, j)];
                d.conj(&pair)
            }
            Node::Or(l, r) => {
                let pair = [self.eval(l, i, j), self.eval(r, i, j)];
                d.disj(&pair)
            }
            Node::Not(s) => {
                let v = self.eval(s, i, j);
                d.negate(v)
            }
            Node::Concat(l, r) => {
                if j == i {
                    d.bottom()
                } else {
                    let splits: Vec<_> = (i..j)
                        .map(|t| {
                            let pair = [self.eval(l, i, t), self.eval(r, t + 1, j)];
                            d.conj(&pair)
                        })
                        .collect();
                    d.disj(&splits)
                }
            }
            Node::Within { child, start, end } => {
                if j - i < end {
                    d.bottom()
                } else {
                    let starts: Vec<_> = (i + start..=i + end)
                        .map(|t| self.eval(child, t, i + end))
                        .collect();
                    d.disj(&starts)
                }
            }
        };
        self.memo.insert(id, i, j, v);
        v
    }
}

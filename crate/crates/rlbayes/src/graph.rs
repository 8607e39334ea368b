//! Directed acyclic graphs over a fixed node set, and the three edge
//! operations (add, delete, reverse) the structure learners move with.
//!
//! A `Dag` stores its adjacency matrix as bit rows, so copies are cheap
//! and equality is exact. Acyclicity is an invariant: the only mutating
//! door is [`Dag::apply`], which refuses any operation that would break it.

use thiserror::Error;

/// Kind of a structure move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Add,
    Delete,
    Reverse,
}

/// One candidate move: add, delete, or reverse the edge source -> target.
/// `source != target` always holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Operation {
    pub kind: OpKind,
    pub source: usize,
    pub target: usize,
}

/// Why an operation cannot be applied to a particular DAG.
/// (Fields avoid the name `source`, which error derives reserve.)
#[derive(Clone, Copy, Debug, Error, PartialEq, Eq)]
pub enum OperationError {
    #[error("edge {from}->{to} already present")]
    EdgeExists { from: usize, to: usize },
    #[error("edge {from}->{to} not present")]
    EdgeMissing { from: usize, to: usize },
    #[error("adding {from}->{to} would create a cycle")]
    WouldCycle { from: usize, to: usize },
}

impl Operation {
    pub fn add(source: usize, target: usize) -> Self {
        assert_ne!(source, target, "self loops are not operations");
        Operation { kind: OpKind::Add, source, target }
    }

    pub fn delete(source: usize, target: usize) -> Self {
        assert_ne!(source, target, "self loops are not operations");
        Operation { kind: OpKind::Delete, source, target }
    }

    pub fn reverse(source: usize, target: usize) -> Self {
        assert_ne!(source, target, "self loops are not operations");
        Operation { kind: OpKind::Reverse, source, target }
    }

    /// Canonical id in [0, 3n(n-1)): all adds first, then all deletes,
    /// then all reverses, each block ordered by (source, target).
    pub fn id(&self, n_nodes: usize) -> u32 {
        assert!(n_nodes >= 2, "operations need at least two nodes");
        assert!(self.source < n_nodes && self.target < n_nodes);
        let p = (n_nodes * (n_nodes - 1)) as u32;
        let pair = (self.source * (n_nodes - 1)
            + if self.target < self.source { self.target } else { self.target - 1 })
            as u32;
        match self.kind {
            OpKind::Add => pair,
            OpKind::Delete => p + pair,
            OpKind::Reverse => 2 * p + pair,
        }
    }

    /// Inverse of [`Operation::id`].
    pub fn from_id(n_nodes: usize, id: u32) -> Self {
        assert!(n_nodes >= 2, "operations need at least two nodes");
        let p = (n_nodes * (n_nodes - 1)) as u32;
        assert!(id < 3 * p, "operation id {id} out of range for {n_nodes} nodes");
        let kind = match id / p {
            0 => OpKind::Add,
            1 => OpKind::Delete,
            _ => OpKind::Reverse,
        };
        let pair = (id % p) as usize;
        let source = pair / (n_nodes - 1);
        let rem = pair % (n_nodes - 1);
        let target = if rem < source { rem } else { rem + 1 };
        Operation { kind, source, target }
    }
}

/// The operation that undoes `op` on the DAG `op` produced.
pub fn reverse_of(op: Operation) -> Operation {
    match op.kind {
        OpKind::Add => Operation::delete(op.source, op.target),
        OpKind::Delete => Operation::add(op.source, op.target),
        OpKind::Reverse => Operation::reverse(op.target, op.source),
    }
}

/// All 3n(n-1) operations in canonical id order.
pub fn all_operations(n_nodes: usize) -> Vec<Operation> {
    assert!(n_nodes >= 2, "operations need at least two nodes");
    let mut ops = Vec::with_capacity(3 * n_nodes * (n_nodes - 1));
    for kind in [OpKind::Add, OpKind::Delete, OpKind::Reverse] {
        for source in 0..n_nodes {
            for target in 0..n_nodes {
                if target != source {
                    ops.push(Operation { kind, source, target });
                }
            }
        }
    }
    ops
}

/// Total number of operations over `n_nodes` nodes.
pub fn operation_count(n_nodes: usize) -> u64 {
    assert!(n_nodes >= 2, "operations need at least two nodes");
    3 * (n_nodes as u64) * (n_nodes as u64 - 1)
}

/// Compact fingerprint of a DAG: the n*n adjacency bits in row-major
/// order, packed LSB-first into ceil(n^2 / 8) bytes. Two DAGs over the
/// same node count collide iff they are equal.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.0.len() * 2);
        for b in &self.0 {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }

    pub fn from_hex(hex: &str) -> Option<Self> {
        if !hex.len().is_multiple_of(2) {
            return None;
        }
        let mut bytes = Vec::with_capacity(hex.len() / 2);
        let raw = hex.as_bytes();
        for i in (0..raw.len()).step_by(2) {
            let hi = (raw[i] as char).to_digit(16)?;
            let lo = (raw[i + 1] as char).to_digit(16)?;
            bytes.push((hi * 16 + lo) as u8);
        }
        Some(CanonicalKey(bytes))
    }
}

/// Directed acyclic graph with value semantics. Rows of the adjacency
/// matrix are 64-bit words; bit t of row s means the edge s -> t.
#[derive(Clone, PartialEq, Eq)]
pub struct Dag {
    n: usize,
    words_per_row: usize,
    bits: Vec<u64>,
    edge_count: usize,
}

impl std::fmt::Debug for Dag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Dag(n={}, edges={:?})", self.n, self.edges())
    }
}

impl Dag {
    /// Edgeless DAG over `n` nodes.
    pub fn empty(n: usize) -> Self {
        assert!(n >= 1, "a DAG needs at least one node");
        let words_per_row = n.div_ceil(64);
        Dag { n, words_per_row, bits: vec![0; n * words_per_row], edge_count: 0 }
    }

    /// DAG with the given edges. Fails on a duplicate edge or a cycle.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, OperationError> {
        let mut dag = Dag::empty(n);
        for &(s, t) in edges {
            dag = dag.apply(Operation::add(s, t))?;
        }
        Ok(dag)
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn has_edge(&self, source: usize, target: usize) -> bool {
        assert!(source < self.n && target < self.n, "node index out of range");
        self.bits[source * self.words_per_row + target / 64] >> (target % 64) & 1 == 1
    }

    fn set_edge(&mut self, source: usize, target: usize, present: bool) {
        let w = &mut self.bits[source * self.words_per_row + target / 64];
        let mask = 1u64 << (target % 64);
        let was = *w & mask != 0;
        if present {
            *w |= mask;
        } else {
            *w &= !mask;
        }
        match (was, present) {
            (false, true) => self.edge_count += 1,
            (true, false) => self.edge_count -= 1,
            _ => {}
        }
    }

    /// Parents of `target` in ascending order.
    pub fn parents(&self, target: usize) -> Vec<usize> {
        assert!(target < self.n, "node index out of range");
        (0..self.n).filter(|&s| self.has_edge(s, target)).collect()
    }

    /// Children of `source` in ascending order.
    pub fn children(&self, source: usize) -> Vec<usize> {
        assert!(source < self.n, "node index out of range");
        let mut out = Vec::new();
        let row = &self.bits[source * self.words_per_row..(source + 1) * self.words_per_row];
        for (wi, &word) in row.iter().enumerate() {
            let mut w = word;
            while w != 0 {
                out.push(wi * 64 + w.trailing_zeros() as usize);
                w &= w - 1;
            }
        }
        out
    }

    /// All edges in (source, target) lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count);
        for s in 0..self.n {
            for t in self.children(s) {
                out.push((s, t));
            }
        }
        out
    }

    /// Is there a directed path from `start` to `goal`? `skip` removes one
    /// edge from consideration (used when testing a reversal).
    fn path_exists(&self, start: usize, goal: usize, skip: Option<(usize, usize)>) -> bool {
        if start == goal {
            return true;
        }
        let mut visited = vec![false; self.n];
        let mut stack = vec![start];
        visited[start] = true;
        while let Some(u) = stack.pop() {
            for v in self.children(u) {
                if skip == Some((u, v)) {
                    continue;
                }
                if v == goal {
                    return true;
                }
                if !visited[v] {
                    visited[v] = true;
                    stack.push(v);
                }
            }
        }
        false
    }

    /// Would adding source -> target (not currently present) create a
    /// cycle? True exactly when a directed path target ~> source exists.
    pub fn creates_cycle(&self, source: usize, target: usize) -> bool {
        assert!(source < self.n && target < self.n, "node index out of range");
        assert_ne!(source, target, "self loops are never considered");
        self.path_exists(target, source, None)
    }

    /// Can `op` be applied to this DAG? Add needs the edge absent and
    /// acyclicity preserved; Delete needs the edge present; Reverse needs
    /// the edge present and no other directed path source ~> target (any
    /// such path would close a cycle through the flipped edge).
    pub fn is_applicable(&self, op: Operation) -> bool {
        let (s, t) = (op.source, op.target);
        assert!(s < self.n && t < self.n, "node index out of range");
        match op.kind {
            OpKind::Add => !self.has_edge(s, t) && !self.creates_cycle(s, t),
            OpKind::Delete => self.has_edge(s, t),
            OpKind::Reverse => {
                self.has_edge(s, t) && !self.path_exists(s, t, Some((s, t)))
            }
        }
    }

    /// Apply `op`, returning the successor DAG. The receiver is untouched.
    pub fn apply(&self, op: Operation) -> Result<Dag, OperationError> {
        let (s, t) = (op.source, op.target);
        assert!(s < self.n && t < self.n, "node index out of range");
        match op.kind {
            OpKind::Add => {
                if self.has_edge(s, t) {
                    return Err(OperationError::EdgeExists { from: s, to: t });
                }
                if self.creates_cycle(s, t) {
                    return Err(OperationError::WouldCycle { from: s, to: t });
                }
                let mut next = self.clone();
                next.set_edge(s, t, true);
                Ok(next)
            }
            OpKind::Delete => {
                if !self.has_edge(s, t) {
                    return Err(OperationError::EdgeMissing { from: s, to: t });
                }
                let mut next = self.clone();
                next.set_edge(s, t, false);
                Ok(next)
            }
            OpKind::Reverse => {
                if !self.has_edge(s, t) {
                    return Err(OperationError::EdgeMissing { from: s, to: t });
                }
                if self.path_exists(s, t, Some((s, t))) {
                    return Err(OperationError::WouldCycle { from: t, to: s });
                }
                let mut next = self.clone();
                next.set_edge(s, t, false);
                next.set_edge(t, s, true);
                Ok(next)
            }
        }
    }

    pub fn canonical_key(&self) -> CanonicalKey {
        let nbits = self.n * self.n;
        let mut bytes = vec![0u8; nbits.div_ceil(8)];
        for s in 0..self.n {
            for t in self.children(s) {
                let b = s * self.n + t;
                bytes[b / 8] |= 1 << (b % 8);
            }
        }
        CanonicalKey(bytes)
    }

    /// Rebuild a DAG from its canonical key. Fails if the byte length does
    /// not match `n` or the encoded matrix has self loops or cycles.
    pub fn from_canonical_key(n: usize, key: &CanonicalKey) -> Option<Dag> {
        let nbits = n * n;
        if key.0.len() != nbits.div_ceil(8) {
            return None;
        }
        // Padding bits past n*n must be zero, or two byte strings would
        // decode to the same structure.
        if !nbits.is_multiple_of(8) && key.0[nbits / 8] >> (nbits % 8) != 0 {
            return None;
        }
        let mut edges = Vec::new();
        for b in 0..nbits {
            if key.0[b / 8] >> (b % 8) & 1 == 1 {
                let (s, t) = (b / n, b % n);
                if s == t {
                    return None;
                }
                edges.push((s, t));
            }
        }
        Dag::from_edges(n, &edges).ok()
    }
}

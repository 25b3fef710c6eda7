//! Hierarchical partition of the unit hypercube `[0,1]^D`.
//!
//! A [`Tree`] starts from the root cell `[0,1]^D` and grows by expanding
//! leaves: an expansion splits a cell along its `b` longest sides into `a`
//! equal parts each, producing `m = a^b` children that tile the parent
//! exactly. Bounds are stored explicitly per cell rather than derived from
//! index arithmetic, and each split reuses one shared array of cut points,
//! so sibling faces are bit-identical and the outer faces coincide exactly
//! with the parent's.
//!
//! Because the longest sides are always split first, every depth-`h` cell
//! obeys deterministic size bounds: its longest side is at most
//! `a^-floor(b*h/D)` and its smallest side at least `a^-ceil(b*h/D)`
//! ([`side_length_bounds`]), and no point of the cell lies further than
//! `sqrt(D) * a^-floor(b*h/D)` from the cell center
//! ([`half_diagonal_bound`]). Optimiser code uses these bounds for depth
//! budgeting and the tests use them as geometry oracles.

use std::io;

use crate::error::{Error, Result};

/// Subdivision rule: split a cell along its `b` longest dimensions into `a`
/// equal parts each, yielding `m = a^b` children per expansion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionScheme {
    a: usize,
    b: usize,
    m: usize,
}

impl PartitionScheme {
    /// Creates a scheme with `a >= 2` divisions along each of `b >= 1` split
    /// dimensions. Fails when `m = a^b` overflows. Compatibility with the
    /// space dimension (`b <= D`) is checked by [`Tree::new`].
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a < 2 {
            return Err(Error::InvalidParameter {
                name: "a",
                message: format!("divisions per split dimension must be at least 2, got {a}"),
            });
        }
        if b < 1 {
            return Err(Error::InvalidParameter {
                name: "b",
                message: "number of split dimensions must be at least 1".to_string(),
            });
        }
        let m = u32::try_from(b)
            .ok()
            .and_then(|exp| a.checked_pow(exp))
            .ok_or(Error::InvalidParameter {
                name: "m",
                message: format!("branch factor {a}^{b} overflows"),
            })?;
        Ok(Self { a, b, m })
    }

    /// Divisions per split dimension.
    pub fn a(&self) -> usize {
        self.a
    }

    /// Number of dimensions split per expansion.
    pub fn b(&self) -> usize {
        self.b
    }

    /// Branch factor `m = a^b`: children created per expansion.
    pub fn m(&self) -> usize {
        self.m
    }
}

/// Axis-aligned box inside `[0,1]^D`, identified by `(depth, index)`;
/// `index` is unique among cells of the same depth.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    depth: usize,
    index: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    center: Vec<f64>,
}

impl Cell {
    fn new(depth: usize, index: usize, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        debug_assert_eq!(lower.len(), upper.len());
        debug_assert!(lower.iter().zip(&upper).all(|(lo, hi)| lo < hi));
        let center = lower
            .iter()
            .zip(&upper)
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect();
        Self {
            depth,
            index,
            lower,
            upper,
            center,
        }
    }

    /// Depth in the tree; the root has depth 0.
    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Depth-local index, assigned in creation order.
    pub fn index(&self) -> usize {
        self.index
    }

    /// Lower corner.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Upper corner.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Midpoint `(lower + upper) / 2`, the point optimisers evaluate.
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Dimension of the box.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Side length along dimension `d`.
    pub fn side(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    /// Largest distance from any point of the cell to its center, i.e. half
    /// the diagonal length.
    pub fn half_diagonal(&self) -> f64 {
        (0..self.dim())
            .map(|d| {
                let half = 0.5 * self.side(d);
                half * half
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Whether `x` lies in the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

/// Splits `cell` along its `b` longest dimensions (ties broken toward the
/// lowest dimension index) into `a` equal parts each.
///
/// Children are returned in lexicographic order of their per-dimension
/// interval indices, lowest split dimension most significant, and carry
/// indices `0..m` in that order; [`Tree::expand`] rebases the indices onto
/// the depth-local counter. Cut points are computed once per dimension, with
/// the outermost cuts forced to the parent bounds, so the children tile the
/// parent exactly.
///
/// # Panics
///
/// Panics when the scheme splits more dimensions than the cell has.
pub fn split(cell: &Cell, scheme: &PartitionScheme) -> Vec<Cell> {
    let dim = cell.dim();
    assert!(
        scheme.b <= dim,
        "scheme splits {} dimensions but the cell has {dim}",
        scheme.b
    );
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_unstable_by(|&i, &j| cell.side(j).total_cmp(&cell.side(i)).then(i.cmp(&j)));
    let mut dims = order[..scheme.b].to_vec();
    dims.sort_unstable();

    let a = scheme.a;
    let cuts: Vec<Vec<f64>> = dims
        .iter()
        .map(|&d| {
            let lo = cell.lower[d];
            let hi = cell.upper[d];
            let width = hi - lo;
            let mut c: Vec<f64> = (0..=a)
                .map(|j| lo + width * (j as f64 / a as f64))
                .collect();
            c[0] = lo;
            c[a] = hi;
            debug_assert!(c.windows(2).all(|w| w[0] < w[1]), "degenerate cut points");
            c
        })
        .collect();

    let mut children = Vec::with_capacity(scheme.m);
    for rank in 0..scheme.m {
        let mut lower = cell.lower.clone();
        let mut upper = cell.upper.clone();
        let mut rest = rank;
        for k in (0..scheme.b).rev() {
            let j = rest % a;
            rest /= a;
            lower[dims[k]] = cuts[k][j];
            upper[dims[k]] = cuts[k][j + 1];
        }
        children.push(Cell::new(cell.depth + 1, rank, lower, upper));
    }
    children
}

#[derive(Clone, Debug)]
struct Node {
    cell: Cell,
    /// Child node ids; empty while the node is a leaf.
    children: Vec<usize>,
}

/// Partition tree over `[0,1]^D`.
///
/// Nodes live in an arena addressed by stable `usize` ids; the root has
/// id 0 and ids `0..len()` are all valid. A node is either a leaf or
/// expanded, never both. The tree is single-owner mutable state: one
/// optimiser run owns one tree, and [`Cell`]s handed out are immutable.
#[derive(Clone, Debug)]
pub struct Tree {
    dim: usize,
    scheme: PartitionScheme,
    nodes: Vec<Node>,
    /// Leaf node ids per depth, ascending by depth-local cell index.
    leaves_by_depth: Vec<Vec<usize>>,
    /// Next unassigned depth-local index per depth.
    next_index: Vec<usize>,
}

impl Tree {
    /// Creates a tree whose root is `[0,1]^dim`.
    pub fn new(dim: usize, scheme: PartitionScheme) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                message: "dimension must be at least 1".to_string(),
            });
        }
        if scheme.b() > dim {
            return Err(Error::InvalidParameter {
                name: "b",
                message: format!(
                    "scheme splits {} dimensions but the space has {dim}",
                    scheme.b()
                ),
            });
        }
        let root = Cell::new(0, 0, vec![0.0; dim], vec![1.0; dim]);
        Ok(Self {
            dim,
            scheme,
            nodes: vec![Node {
                cell: root,
                children: Vec::new(),
            }],
            leaves_by_depth: vec![vec![0]],
            next_index: vec![1],
        })
    }

    /// Dimension of the partitioned space.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Subdivision rule used by every expansion.
    pub fn scheme(&self) -> PartitionScheme {
        self.scheme
    }

    /// Number of nodes created so far (leaves plus expanded).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false: a tree holds at least the root.
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Depth of the deepest node.
    pub fn depth(&self) -> usize {
        self.leaves_by_depth.len() - 1
    }

    /// Cell of node `id`.
    pub fn cell(&self, id: usize) -> &Cell {
        &self.nodes[id].cell
    }

    /// Whether node `id` has not been expanded.
    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    /// Child ids of node `id`; empty for leaves.
    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    /// Leaf node ids at depth `h`, ascending by cell index. Empty when the
    /// tree has no leaf at that depth.
    pub fn leaves_at_depth(&self, h: usize) -> &[usize] {
        self.leaves_by_depth.get(h).map_or(&[], Vec::as_slice)
    }

    /// Total number of leaves; after `k` expansions this is `1 + k(m-1)`.
    pub fn leaf_count(&self) -> usize {
        self.leaves_by_depth.iter().map(Vec::len).sum()
    }

    /// Expands leaf `id` in place and returns the ids of its `m` children,
    /// in the child order produced by [`split`].
    ///
    /// # Panics
    ///
    /// Panics when `id` is out of bounds or refers to a non-leaf node;
    /// expanding an already-expanded node is a logic error in the caller.
    pub fn expand(&mut self, id: usize) -> &[usize] {
        assert!(
            self.is_leaf(id),
            "expand called on non-leaf node {id} (depth {}, index {})",
            self.nodes[id].cell.depth(),
            self.nodes[id].cell.index()
        );
        let children = split(&self.nodes[id].cell, &self.scheme);
        let parent_depth = self.nodes[id].cell.depth();
        let child_depth = parent_depth + 1;
        if self.leaves_by_depth.len() <= child_depth {
            self.leaves_by_depth.push(Vec::new());
            self.next_index.push(0);
        }
        let base = self.next_index[child_depth];
        self.next_index[child_depth] = base + children.len();

        let pos = self.leaves_by_depth[parent_depth]
            .iter()
            .position(|&leaf| leaf == id)
            .expect("leaf id missing from its depth list");
        self.leaves_by_depth[parent_depth].remove(pos);

        let mut child_ids = Vec::with_capacity(children.len());
        for (rank, mut child) in children.into_iter().enumerate() {
            child.index = base + rank;
            let child_id = self.nodes.len();
            self.nodes.push(Node {
                cell: child,
                children: Vec::new(),
            });
            self.leaves_by_depth[child_depth].push(child_id);
            child_ids.push(child_id);
        }
        self.nodes[id].children = child_ids;
        &self.nodes[id].children
    }

    /// Writes one JSON object per node with fields `depth`, `index`,
    /// `lower`, `upper`, `center`, and `state` (`"leaf"` or `"expanded"`),
    /// in node-id order. Diagnostic format for inspecting trees offline.
    pub fn dump_jsonl<W: io::Write>(&self, mut writer: W) -> io::Result<()> {
        for node in &self.nodes {
            let record = serde_json::json!({
                "depth": node.cell.depth(),
                "index": node.cell.index(),
                "lower": node.cell.lower(),
                "upper": node.cell.upper(),
                "center": node.cell.center(),
                "state": if node.children.is_empty() { "leaf" } else { "expanded" },
            });
            serde_json::to_writer(&mut writer, &record)?;
            writer.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Bounds on the side lengths of any depth-`h` cell under `scheme` in a
/// `dim`-dimensional tree: returns
/// `(a^-floor(b*h/dim), a^-ceil(b*h/dim))`, an upper bound on the longest
/// side and a lower bound on the smallest side.
///
/// Splitting the longest sides first means the `h` expansions leading to a
/// depth-`h` cell divide each dimension either `floor(b*h/dim)` or
/// `ceil(b*h/dim)` times.
pub fn side_length_bounds(scheme: &PartitionScheme, h: usize, dim: usize) -> (f64, f64) {
    let low_exp = (scheme.b * h) / dim;
    let high_exp = (scheme.b * h).div_ceil(dim);
    let a = scheme.a as f64;
    (a.powi(-(low_exp as i32)), a.powi(-(high_exp as i32)))
}

/// Upper bound on the distance from any point of a depth-`h` cell to the
/// cell center: `sqrt(dim) * a^-floor(b*h/dim)`.
pub fn half_diagonal_bound(scheme: &PartitionScheme, h: usize, dim: usize) -> f64 {
    let (longest, _) = side_length_bounds(scheme, h, dim);
    (dim as f64).sqrt() * longest
}

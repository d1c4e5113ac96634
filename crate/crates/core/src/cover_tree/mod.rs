//! Cover trees over class labels.
//!
//! The tree is built by sequential insertion: each label descends from the
//! root through children that cover it and is attached at the deepest level
//! where the covering bound `d(child, parent) <= base^-depth(parent)` still
//! holds. A node that receives its first child also receives a copy of its
//! own label, so every internal node shares a label with one of its children.
//! Separation is not enforced.

mod paths;

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::metric_space::LabelMetric;

pub use paths::{PathTable, TreeVariant};

/// Maximum node depth produced by [`CoverTree::build`].
pub const DEPTH_CAP: usize = 64;

/// Slack on the normalization check of the input metric.
const NORMALIZATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: usize,
    pub depth: usize,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverTree {
    base: f64,
    k: usize,
    nodes: Vec<Node>,
    root: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeStats {
    /// Largest node depth.
    pub height: usize,
    /// Largest child count of any node.
    pub max_fanout: usize,
    /// Node count per depth, starting at the root.
    pub level_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    RootCount(usize),
    RootDepth { node: usize, depth: usize },
    Depth { node: usize, depth: usize, parent_depth: usize },
    Covering { node: usize, distance: f64, bound: f64 },
    Nesting { node: usize },
    MissingLeaf { label: usize },
    LabelOutOfRange { node: usize, label: usize },
    ChildLink { node: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RootCount(n) => write!(f, "expected one root, found {n}"),
            Violation::RootDepth { node, depth } => {
                write!(f, "root node {node} has depth {depth}")
            }
            Violation::Depth { node, depth, parent_depth } => write!(
                f,
                "node {node} has depth {depth} under a parent at depth {parent_depth}"
            ),
            Violation::Covering { node, distance, bound } => write!(
                f,
                "node {node} is {distance} from its parent, above the cover radius {bound}"
            ),
            Violation::Nesting { node } => {
                write!(f, "internal node {node} has no child with its own label")
            }
            Violation::MissingLeaf { label } => write!(f, "label {label} is not a leaf"),
            Violation::LabelOutOfRange { node, label } => {
                write!(f, "node {node} carries out-of-range label {label}")
            }
            Violation::ChildLink { node } => {
                write!(f, "node {node} disagrees with its parent's child list")
            }
        }
    }
}

/// `base^-depth`, the radius a node at `depth` covers.
#[inline]
pub fn cover_radius(base: f64, depth: usize) -> f64 {
    base.powi(-(depth as i32))
}

impl CoverTree {
    /// Builds the tree by inserting labels `0..k` in order; label 0 is the
    /// root. Among covering children the nearest wins, ties going to the
    /// smaller label.
    pub fn build(metric: &LabelMetric, base: f64) -> Result<Self> {
        if !base.is_finite() || base <= 1.0 {
            return Err(Error::config(format!("cover tree base must exceed 1, got {base}")));
        }
        let max = metric.max_distance();
        if max > 1.0 + NORMALIZATION_SLACK {
            return Err(Error::input(format!(
                "metric must be normalized to max distance 1, found {max}"
            )));
        }

        let mut tree = CoverTree {
            base,
            k: metric.k(),
            nodes: vec![Node {
                label: 0,
                depth: 0,
                parent: None,
                children: Vec::new(),
            }],
            root: 0,
        };

        for label in 1..metric.k() {
            let mut current = tree.root;
            loop {
                let child_depth = tree.nodes[current].depth + 1;
                let radius = cover_radius(base, child_depth);
                let next = tree.nodes[current]
                    .children
                    .iter()
                    .map(|&c| (c, metric.distance(label, tree.nodes[c].label)))
                    .filter(|&(_, dist)| dist <= radius)
                    .min_by(|a, b| {
                        a.1.total_cmp(&b.1)
                            .then(tree.nodes[a.0].label.cmp(&tree.nodes[b.0].label))
                    });
                if let Some((child, _)) = next {
                    current = child;
                    continue;
                }
                if child_depth > DEPTH_CAP {
                    return Err(Error::DepthExceeded {
                        label,
                        cap: DEPTH_CAP,
                    });
                }
                if tree.nodes[current].children.is_empty() {
                    let own = tree.nodes[current].label;
                    tree.push_child(current, own);
                }
                tree.push_child(current, label);
                break;
            }
        }
        Ok(tree)
    }

    /// Assembles a tree from explicit `(label, parent)` pairs; depths and
    /// child lists are derived. Structural checks only; use
    /// [`CoverTree::check_invariants`] for covering and nesting.
    pub fn from_parents(base: f64, k: usize, spec: &[(usize, Option<usize>)]) -> Result<Self> {
        let roots: Vec<usize> = (0..spec.len()).filter(|&i| spec[i].1.is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::input(format!(
                "tree needs exactly one root, found {}",
                roots.len()
            )));
        }
        let mut nodes: Vec<Node> = spec
            .iter()
            .map(|&(label, parent)| Node {
                label,
                depth: 0,
                parent,
                children: Vec::new(),
            })
            .collect();
        for (i, &(label, parent)) in spec.iter().enumerate() {
            if label >= k {
                return Err(Error::input(format!("node {i} has label {label} >= k = {k}")));
            }
            if let Some(p) = parent {
                if p >= spec.len() || p == i {
                    return Err(Error::input(format!("node {i} has invalid parent {p}")));
                }
                nodes[p].children.push(i);
            }
        }
        let mut tree = CoverTree {
            base,
            k,
            nodes,
            root: roots[0],
        };
        let order = tree.preorder();
        if order.len() != spec.len() {
            return Err(Error::input("parent links contain a cycle or detached nodes"));
        }
        for &n in &order {
            if let Some(p) = tree.nodes[n].parent {
                tree.nodes[n].depth = tree.nodes[p].depth + 1;
            }
        }
        Ok(tree)
    }

    fn push_child(&mut self, parent: usize, label: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            label,
            depth: self.nodes[parent].depth + 1,
            parent: Some(parent),
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Node ids in depth-first pre-order, children in insertion order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.nodes[n].children.iter().rev());
        }
        out
    }

    /// The leaf carrying `label`; the first one in pre-order if several do.
    pub fn leaf_of(&self, label: usize) -> Option<usize> {
        self.preorder()
            .into_iter()
            .find(|&n| self.nodes[n].label == label && self.nodes[n].children.is_empty())
    }

    pub(crate) fn leaves_by_label(&self) -> Vec<Option<usize>> {
        let mut leaves = vec![None; self.k];
        for n in self.preorder() {
            let node = &self.nodes[n];
            if node.children.is_empty() && node.label < self.k && leaves[node.label].is_none() {
                leaves[node.label] = Some(n);
            }
        }
        leaves
    }

    pub fn stats(&self) -> TreeStats {
        let height = self.nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        let mut level_counts = vec![0; height + 1];
        for n in &self.nodes {
            level_counts[n.depth] += 1;
        }
        TreeStats {
            height,
            max_fanout: self.nodes.iter().map(|n| n.children.len()).max().unwrap_or(0),
            level_counts,
        }
    }

    pub fn height(&self) -> usize {
        self.stats().height
    }

    /// Every violated invariant: single root at depth 0, consistent depths,
    /// covering at every edge, nesting at every internal node and a leaf for
    /// every label.
    pub fn check_invariants(&self, metric: &LabelMetric) -> Vec<Violation> {
        let mut out = Vec::new();
        let roots: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| self.nodes[i].parent.is_none())
            .collect();
        if roots.len() != 1 {
            out.push(Violation::RootCount(roots.len()));
        }
        for &r in &roots {
            if self.nodes[r].depth != 0 {
                out.push(Violation::RootDepth {
                    node: r,
                    depth: self.nodes[r].depth,
                });
            }
        }
        let mut has_leaf = vec![false; self.k];
        for (id, node) in self.nodes.iter().enumerate() {
            if node.label >= self.k || node.label >= metric.k() {
                out.push(Violation::LabelOutOfRange {
                    node: id,
                    label: node.label,
                });
                continue;
            }
            if node.children.is_empty() {
                has_leaf[node.label] = true;
            } else if !node
                .children
                .iter()
                .any(|&c| self.nodes[c].label == node.label)
            {
                out.push(Violation::Nesting { node: id });
            }
            for &c in &node.children {
                if self.nodes[c].parent != Some(id) {
                    out.push(Violation::ChildLink { node: c });
                }
            }
            let Some(p) = node.parent else { continue };
            let parent = &self.nodes[p];
            if !parent.children.contains(&id) {
                out.push(Violation::ChildLink { node: id });
            }
            if node.depth != parent.depth + 1 {
                out.push(Violation::Depth {
                    node: id,
                    depth: node.depth,
                    parent_depth: parent.depth,
                });
            }
            if parent.label < metric.k() {
                let distance = metric.distance(node.label, parent.label);
                let bound = cover_radius(self.base, parent.depth);
                if distance > bound {
                    out.push(Violation::Covering {
                        node: id,
                        distance,
                        bound,
                    });
                }
            }
        }
        for (label, ok) in has_leaf.into_iter().enumerate() {
            if !ok {
                out.push(Violation::MissingLeaf { label });
            }
        }
        out
    }

    pub fn derive_u_paths(&self) -> PathTable {
        paths::derive_u(self)
    }

    pub fn derive_v_tree(&self) -> PathTable {
        paths::derive_v(self)
    }

    /// One line per node: `node_id depth parent_id label`, with `-` as the
    /// root's parent, preceded by a `# cover_tree base=.. k=..` comment.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# cover_tree base={} k={}", self.base, self.k)?;
        for (id, node) in self.nodes.iter().enumerate() {
            match node.parent {
                Some(p) => writeln!(out, "{id} {} {p} {}", node.depth, node.label)?,
                None => writeln!(out, "{id} {} - {}", node.depth, node.label)?,
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::input(format!("tree line {line}: {msg}"));
        let mut base = None;
        let mut k = None;
        let mut spec: Vec<(usize, Option<usize>)> = Vec::new();
        let mut depths = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let trimmed = line.trim();
            if let Some(header) = trimmed.strip_prefix('#') {
                for field in header.split_whitespace() {
                    if let Some(v) = field.strip_prefix("base=") {
                        base = v.parse::<f64>().ok();
                    } else if let Some(v) = field.strip_prefix("k=") {
                        k = v.parse::<usize>().ok();
                    }
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let [id, depth, parent, label] = fields.as_slice() else {
                return Err(bad(lineno, format!("expected 4 fields, got {}", fields.len())));
            };
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| bad(lineno, format!("not an index: {s:?}")))
            };
            if num(id)? != spec.len() {
                return Err(bad(lineno, "node ids must be consecutive from 0".into()));
            }
            let parent = if *parent == "-" { None } else { Some(num(parent)?) };
            spec.push((num(label)?, parent));
            depths.push(num(depth)?);
        }
        let base = base.ok_or_else(|| Error::input("tree file lacks a base= header"))?;
        let k = k.ok_or_else(|| Error::input("tree file lacks a k= header"))?;
        let tree = Self::from_parents(base, k, &spec)?;
        if let Some(id) = (0..depths.len()).find(|&i| tree.nodes[i].depth != depths[i]) {
            return Err(Error::input(format!(
                "node {id} declares depth {} but sits at depth {}",
                depths[id], tree.nodes[id].depth
            )));
        }
        Ok(tree)
    }
}

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use super::CoverTree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TreeVariant {
    /// One row per class; internal nodes reuse the label of a child.
    U,
    /// Leaf rows per class plus one pseudoclass row per branching node.
    V,
}

impl fmt::Display for TreeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreeVariant::U => "U",
            TreeVariant::V => "V",
        })
    }
}

impl FromStr for TreeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "U" => Ok(TreeVariant::U),
            "V" => Ok(TreeVariant::V),
            other => Err(Error::input(format!("unknown tree variant {other:?}"))),
        }
    }
}

/// Parameter-row paths of a label tree.
///
/// Rows `0..k` belong to the classes; in the V variant rows `k..k_prime`
/// are pseudoclasses. Each row has at most one parent row, and the path of
/// class `i` is the chain `i, parent(i), parent(parent(i)), ..` ending at
/// the root row.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTable {
    variant: TreeVariant,
    k: usize,
    parent: Vec<Option<usize>>,
    /// Label each row was derived from: the class itself, or for a
    /// pseudoclass the label of the tree node it replaced.
    origin: Vec<usize>,
    depth: Vec<usize>,
    /// Rows ordered so that every parent precedes its children.
    order: Vec<usize>,
    paths: Vec<Vec<usize>>,
    root: usize,
}

impl PathTable {
    pub fn from_parents(
        variant: TreeVariant,
        k: usize,
        parent: Vec<Option<usize>>,
        origin: Vec<usize>,
    ) -> Result<Self> {
        let rows = parent.len();
        if k == 0 || rows < k || origin.len() != rows {
            return Err(Error::input(format!(
                "path table needs 1 <= k <= rows, got k = {k}, rows = {rows}"
            )));
        }
        if variant == TreeVariant::U && rows != k {
            return Err(Error::input("U path tables have exactly k rows"));
        }
        let roots: Vec<usize> = (0..rows).filter(|&r| parent[r].is_none()).collect();
        let [root] = roots[..] else {
            return Err(Error::input(format!(
                "path table needs one root row, found {}",
                roots.len()
            )));
        };
        let mut children = vec![Vec::new(); rows];
        for (r, p) in parent.iter().enumerate() {
            if let Some(p) = *p {
                if p >= rows || p == r {
                    return Err(Error::input(format!("row {r} has invalid parent {p}")));
                }
                children[p].push(r);
            }
        }
        let mut order = Vec::with_capacity(rows);
        let mut depth = vec![0; rows];
        order.push(root);
        let mut head = 0;
        while head < order.len() {
            let r = order[head];
            head += 1;
            for &c in &children[r] {
                depth[c] = depth[r] + 1;
                order.push(c);
            }
        }
        if order.len() != rows {
            return Err(Error::input("path table parents contain a cycle"));
        }
        if variant == TreeVariant::V {
            if let Some(r) = (k..rows).find(|&r| children[r].is_empty()) {
                return Err(Error::input(format!("pseudoclass row {r} has no children")));
            }
        }
        let paths = (0..k)
            .map(|i| {
                let mut path = vec![i];
                let mut cur = i;
                while let Some(p) = parent[cur] {
                    path.push(p);
                    cur = p;
                }
                path
            })
            .collect();
        Ok(PathTable {
            variant,
            k,
            parent,
            origin,
            depth,
            order,
            paths,
            root,
        })
    }

    pub fn variant(&self) -> TreeVariant {
        self.variant
    }

    /// Number of classes.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of parameter rows.
    pub fn k_prime(&self) -> usize {
        self.parent.len()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Rows from class `class` up to the root.
    pub fn path(&self, class: usize) -> &[usize] {
        &self.paths[class]
    }

    pub fn paths(&self) -> &[Vec<usize>] {
        &self.paths
    }

    pub fn parent(&self, row: usize) -> Option<usize> {
        self.parent[row]
    }

    /// The class's first ancestor row, `None` for the root class.
    pub fn class_parent(&self, class: usize) -> Option<usize> {
        self.parent[class]
    }

    pub fn origin(&self, row: usize) -> usize {
        self.origin[row]
    }

    pub fn depth(&self, row: usize) -> usize {
        self.depth[row]
    }

    pub fn is_pseudoclass(&self, row: usize) -> bool {
        row >= self.k
    }

    /// Rows in an order where parents precede children.
    pub fn topological_order(&self) -> &[usize] {
        &self.order
    }

    pub fn max_path_len(&self) -> usize {
        self.paths.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Header `variant k k_prime`, then `row depth parent tag` per row in
    /// row order. The root's parent is `-`; tags are the class index for
    /// class rows and `*label` for pseudoclasses.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{} {} {}", self.variant, self.k, self.k_prime())?;
        for row in 0..self.k_prime() {
            let parent = self.parent[row].map_or_else(|| "-".to_string(), |p| p.to_string());
            let marker = if self.is_pseudoclass(row) { "*" } else { "" };
            writeln!(
                out,
                "{row} {} {parent} {marker}{}",
                self.depth[row], self.origin[row]
            )?;
        }
        Ok(())
    }

    /// Reads the format of [`PathTable::write_text`], consuming exactly the
    /// header and `k_prime` row lines.
    pub fn read_text<R: BufRead>(reader: &mut R) -> Result<Self> {
        let mut line = String::new();
        let mut next_line = |what: &str| -> Result<String> {
            line.clear();
            if reader.read_line(&mut line)? == 0 {
                return Err(Error::input(format!("path table ended before {what}")));
            }
            Ok(line.trim().to_string())
        };
        let header = next_line("the header")?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let [variant, k, rows] = fields.as_slice() else {
            return Err(Error::input(format!("bad path table header {header:?}")));
        };
        let variant: TreeVariant = variant.parse()?;
        let num = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::input(format!("path table: not an index: {s:?}")))
        };
        let (k, rows) = (num(k)?, num(rows)?);
        let mut parent = Vec::with_capacity(rows);
        let mut origin = Vec::with_capacity(rows);
        let mut depth = Vec::with_capacity(rows);
        for row in 0..rows {
            let text = next_line("all rows were read")?;
            let fields: Vec<&str> = text.split_whitespace().collect();
            let [id, d, p, tag] = fields.as_slice() else {
                return Err(Error::input(format!("bad path table row {text:?}")));
            };
            if num(id)? != row {
                return Err(Error::input(format!("path table row {row} out of order")));
            }
            let pseudo = tag.starts_with('*');
            if pseudo != (row >= k) {
                return Err(Error::input(format!("row {row} has mismatched tag {tag:?}")));
            }
            depth.push(num(d)?);
            parent.push(if *p == "-" { None } else { Some(num(p)?) });
            origin.push(num(tag.trim_start_matches('*'))?);
        }
        let table = Self::from_parents(variant, k, parent, origin)?;
        if table.depth != depth {
            return Err(Error::input("path table depths disagree with parent links"));
        }
        Ok(table)
    }
}

/// Class paths of the U-tree: labels from each class's leaf to the root with
/// duplicates removed. Row indices equal class indices.
pub(super) fn derive_u(tree: &CoverTree) -> PathTable {
    let k = tree.k();
    let leaves = tree.leaves_by_label();
    let mut parent = vec![None; k];
    for (class, leaf) in leaves.iter().enumerate() {
        let Some(mut node) = *leaf else { continue };
        while let Some(p) = tree.node(node).parent {
            let label = tree.node(p).label;
            if label != class {
                parent[class] = Some(label);
                break;
            }
            node = p;
        }
    }
    PathTable::from_parents(TreeVariant::U, k, parent, (0..k).collect())
        .expect("a valid cover tree yields a valid U path table")
}

/// V-tree: class leaves keep rows `0..k`; every node with two or more
/// children becomes a pseudoclass row numbered in pre-order. Nodes with a
/// single child are collapsed into it.
pub(super) fn derive_v(tree: &CoverTree) -> PathTable {
    let k = tree.k();
    let leaves = tree.leaves_by_label();
    let mut row_of = vec![None; tree.nodes().len()];
    for (class, leaf) in leaves.iter().enumerate() {
        if let Some(n) = leaf {
            row_of[*n] = Some(class);
        }
    }
    let mut origin: Vec<usize> = (0..k).collect();
    for n in tree.preorder() {
        if tree.node(n).children.len() >= 2 {
            row_of[n] = Some(origin.len());
            origin.push(tree.node(n).label);
        }
    }

    let row_above = |mut node: usize| {
        while let Some(p) = tree.node(node).parent {
            if let Some(row) = row_of[p] {
                return Some(row);
            }
            node = p;
        }
        None
    };
    let mut parent = vec![None; origin.len()];
    for (n, row) in row_of.iter().enumerate() {
        if let Some(row) = *row {
            parent[row] = row_above(n);
        }
    }
    PathTable::from_parents(TreeVariant::V, k, parent, origin)
        .expect("a valid cover tree yields a valid V path table")
}

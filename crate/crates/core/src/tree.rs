//! Finite ordered trees in Neveu coordinates, window restrictions and the
//! graft events `T(t,x)` / `T_+(t,x,k)`.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::degree_set::DegreeSet;
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// A node address: the root is the empty sequence, `u i` is the `i`-th child
/// of `u` (1-based).
///
/// The derived order on the coordinate vector is the lexicographic order of
/// the tree (an ancestor precedes its descendants).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct NodeLabel(Vec<usize>);

impl NodeLabel {
    pub fn root() -> Self {
        NodeLabel(Vec::new())
    }

    pub fn new(coords: Vec<usize>) -> Result<Self> {
        if coords.contains(&0) {
            return Err(Error::InvalidTree("node coordinates are 1-based".into()));
        }
        Ok(NodeLabel(coords))
    }

    pub fn coords(&self) -> &[usize] {
        &self.0
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    /// Generation `|u|`.
    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// `|u|_∞ = max(|u|, u_1, …, u_|u|)`.
    pub fn norm(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0).max(self.0.len())
    }

    pub fn child(&self, i: usize) -> NodeLabel {
        debug_assert!(i >= 1);
        let mut c = self.0.clone();
        c.push(i);
        NodeLabel(c)
    }

    pub fn parent(&self) -> Option<NodeLabel> {
        if self.0.is_empty() {
            None
        } else {
            Some(NodeLabel(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    /// `self` is an ancestor of `other` or equal to it.
    pub fn is_ancestor_or_self(&self, other: &NodeLabel) -> bool {
        other.0.starts_with(&self.0)
    }

    pub fn concat(&self, other: &NodeLabel) -> NodeLabel {
        let mut c = self.0.clone();
        c.extend_from_slice(&other.0);
        NodeLabel(c)
    }
}

/// Deepest node lying on every root-to-`u` path, endpoints included. Returns
/// `None` for an empty input.
pub fn mrca<'a, I: IntoIterator<Item = &'a NodeLabel>>(labels: I) -> Option<NodeLabel> {
    let mut it = labels.into_iter();
    let first = it.next()?;
    let mut len = first.0.len();
    for l in it {
        len = len.min(l.0.len());
        let common = first.0[..len]
            .iter()
            .zip(&l.0[..len])
            .take_while(|(a, b)| a == b)
            .count();
        len = common;
    }
    Some(NodeLabel(first.0[..len].to_vec()))
}

impl fmt::Display for NodeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("∅");
        }
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join("."))
    }
}

/// Accepts `∅`, `root` or the empty string for the root, dot- or
/// comma-separated coordinates (`1.2.3`), and bare digit strings (`12` is
/// `(1,2)`).
impl FromStr for NodeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "∅" || s == "root" || s == "()" {
            return Ok(NodeLabel::root());
        }
        let bad = || Error::InvalidTree(format!("bad node label {s:?}"));
        let coords: Vec<usize> = if s.contains(['.', ',']) {
            s.split(['.', ','])
                .map(|c| c.trim().parse::<usize>().map_err(|_| bad()))
                .collect::<Result<_>>()?
        } else if s.chars().all(|c| c.is_ascii_digit()) {
            s.chars().map(|c| c as usize - '0' as usize).collect()
        } else {
            return Err(bad());
        };
        NodeLabel::new(coords).map_err(|_| bad())
    }
}

impl Serialize for NodeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for NodeLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A finite rooted ordered tree.
///
/// Nodes are stored in preorder, which is the lexicographic order of their
/// labels; node `0` is the root. The degree sequence determines the tree and
/// is its identity for equality, hashing and ordering.
#[derive(Clone)]
pub struct Tree {
    degrees: Vec<usize>,
    parent: Vec<usize>,
    rank: Vec<usize>,
    depth: Vec<usize>,
    size: Vec<usize>,
}

impl Tree {
    /// The single-node tree `{∅}`.
    pub fn leaf() -> Self {
        Self::from_degrees_unchecked(vec![0])
    }

    /// Builds a tree from its preorder out-degree sequence.
    pub fn from_degrees(degrees: Vec<usize>) -> Result<Self> {
        let mut open: i64 = 1;
        for (i, &d) in degrees.iter().enumerate() {
            if open <= 0 {
                return Err(Error::InvalidTree(format!(
                    "degree sequence closes early at position {i}"
                )));
            }
            open += d as i64 - 1;
        }
        if open != 0 || degrees.is_empty() {
            return Err(Error::InvalidTree("degree sequence does not close".into()));
        }
        Ok(Self::from_degrees_unchecked(degrees))
    }

    pub(crate) fn from_degrees_unchecked(degrees: Vec<usize>) -> Self {
        let n = degrees.len();
        let mut parent = vec![NONE; n];
        let mut rank = vec![0; n];
        let mut depth = vec![0; n];
        let mut size = vec![1; n];
        // Stack of (node, children still to attach).
        let mut stack: Vec<(usize, usize)> = Vec::new();
        for i in 0..n {
            if let Some(top) = stack.last_mut() {
                let p = top.0;
                top.1 -= 1;
                parent[i] = p;
                rank[i] = degrees[p] - top.1;
                depth[i] = depth[p] + 1;
            }
            while stack.last().is_some_and(|t| t.1 == 0) {
                stack.pop();
            }
            if degrees[i] > 0 {
                stack.push((i, degrees[i]));
            }
        }
        for i in (1..n).rev() {
            size[parent[i]] += size[i];
        }
        Tree {
            degrees,
            parent,
            rank,
            depth,
            size,
        }
    }

    /// Root with the given subtrees, in order.
    pub fn from_children(children: &[Tree]) -> Self {
        let mut degrees = vec![children.len()];
        for c in children {
            degrees.extend_from_slice(&c.degrees);
        }
        Self::from_degrees_unchecked(degrees)
    }

    /// Builds a tree from an ancestor-closed label set with contiguous child
    /// indices.
    pub fn from_labels<I: IntoIterator<Item = NodeLabel>>(labels: I) -> Result<Self> {
        let mut labels: Vec<NodeLabel> = labels.into_iter().collect();
        labels.sort();
        labels.dedup();
        if labels.first().map(|l| l.is_root()) != Some(true) {
            return Err(Error::InvalidTree("label set lacks the root".into()));
        }
        let set: std::collections::BTreeSet<&NodeLabel> = labels.iter().collect();
        let mut degrees = Vec::with_capacity(labels.len());
        for l in &labels {
            if let Some(p) = l.parent() {
                if !set.contains(&p) {
                    return Err(Error::InvalidTree(format!("{l} has no parent in the set")));
                }
                let last = *l.0.last().unwrap();
                if last > 1 && !set.contains(&p.child(last - 1)) {
                    return Err(Error::InvalidTree(format!("{l} has no left sibling")));
                }
            }
            let mut k = 0;
            while set.contains(&l.child(k + 1)) {
                k += 1;
            }
            degrees.push(k);
        }
        Ok(Self::from_degrees_unchecked(degrees))
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Number of nodes `|t|`.
    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degrees[node]
    }

    pub fn root_degree(&self) -> usize {
        self.degrees[0]
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        (self.parent[node] != NONE).then_some(self.parent[node])
    }

    /// 1-based position among siblings; 0 for the root.
    pub fn rank(&self, node: usize) -> usize {
        self.rank[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depth[node]
    }

    pub fn subtree_size(&self, node: usize) -> usize {
        self.size[node]
    }

    pub fn children(&self, node: usize) -> Children<'_> {
        Children {
            tree: self,
            next: node + 1,
            left: self.degrees[node],
        }
    }

    /// Index of the `i`-th child (1-based).
    pub fn child(&self, node: usize, i: usize) -> Option<usize> {
        if i == 0 {
            return None;
        }
        self.children(node).nth(i - 1)
    }

    pub fn label(&self, node: usize) -> NodeLabel {
        let mut coords = Vec::with_capacity(self.depth[node]);
        let mut v = node;
        while self.parent[v] != NONE {
            coords.push(self.rank[v]);
            v = self.parent[v];
        }
        coords.reverse();
        NodeLabel(coords)
    }

    /// Labels of all nodes in lexicographic order.
    pub fn labels(&self) -> Vec<NodeLabel> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    pub fn find(&self, label: &NodeLabel) -> Option<usize> {
        let mut v = 0;
        for &c in &label.0 {
            v = self.child(v, c)?;
        }
        Some(v)
    }

    pub fn contains(&self, label: &NodeLabel) -> bool {
        self.find(label).is_some()
    }

    pub fn find_or_err(&self, label: &NodeLabel) -> Result<usize> {
        self.find(label)
            .ok_or_else(|| Error::NotInTree(label.to_string()))
    }

    /// Height `H(t)`: maximal generation.
    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// `H_∞(t)`: maximal node norm.
    pub fn height_inf(&self) -> usize {
        // norm(u i) = max(norm(u), |u|+1, i)
        let mut norm = vec![0usize; self.len()];
        let mut best = 0;
        for i in 1..self.len() {
            let p = self.parent[i];
            norm[i] = norm[p].max(self.depth[i]).max(self.rank[i]);
            best = best.max(norm[i]);
        }
        best
    }

    /// Leaves `𝓛₀(t)` as node indices.
    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.degrees[i] == 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.degrees.iter().filter(|&&d| d == 0).count()
    }

    /// The subtree rooted at `node`, relabelled.
    pub fn subtree(&self, node: usize) -> Tree {
        Self::from_degrees_unchecked(self.degrees[node..node + self.size[node]].to_vec())
    }

    /// `(𝓛_A(t), L_A(t))`: labels of the nodes whose out-degree is in `A`.
    pub fn count_a(&self, a: &DegreeSet) -> (Vec<NodeLabel>, usize) {
        let nodes: Vec<NodeLabel> = (0..self.len())
            .filter(|&i| a.contains(self.degrees[i]))
            .map(|i| self.label(i))
            .collect();
        let n = nodes.len();
        (nodes, n)
    }

    /// `L_A(t)` without materializing labels.
    pub fn l_a(&self, a: &DegreeSet) -> usize {
        self.degrees.iter().filter(|&&d| a.contains(d)).count()
    }

    /// `t ⊛ (s, x)`: the subtrees of the root of `s` become new rightmost
    /// children of `x`.
    pub fn graft(&self, s: &Tree, x: &NodeLabel) -> Result<Tree> {
        let xi = self.find_or_err(x)?;
        if s.len() == 1 {
            return Ok(self.clone());
        }
        let end = xi + self.size[xi];
        let mut degrees = Vec::with_capacity(self.len() + s.len() - 1);
        degrees.extend_from_slice(&self.degrees[..end]);
        degrees[xi] += s.degrees[0];
        degrees.extend_from_slice(&s.degrees[1..]);
        degrees.extend_from_slice(&self.degrees[end..]);
        Ok(Self::from_degrees_unchecked(degrees))
    }

    /// `r_{h,∞}(t)` with degree tags.
    pub fn restrict(&self, h: usize) -> WindowedTree {
        WindowedTree::from_tree(self, h)
    }

    /// A windowed view that keeps the whole tree (every tag finite).
    pub fn to_windowed(&self) -> WindowedTree {
        WindowedTree::from_tree(self, self.height_inf().max(1))
    }

    /// Parenthesized text form, e.g. `(()())` for `{∅,1,2}`.
    pub fn to_paren(&self) -> String {
        let mut out = String::with_capacity(2 * self.len());
        let mut open: Vec<usize> = Vec::new();
        for &d in &self.degrees {
            out.push('(');
            open.push(d);
            while open.last() == Some(&0) {
                open.pop();
                out.push(')');
                if let Some(top) = open.last_mut() {
                    *top -= 1;
                }
            }
        }
        out
    }

    pub fn parse_paren(s: &str) -> Result<Tree> {
        let bad = |why: &str| Error::InvalidTree(format!("{why} in {s:?}"));
        let mut degrees: Vec<usize> = Vec::new();
        let mut stack: Vec<usize> = Vec::new();
        let mut closed = false;
        for c in s.chars() {
            match c {
                '(' => {
                    if closed {
                        return Err(bad("text after the root closes"));
                    }
                    if let Some(&p) = stack.last() {
                        degrees[p] += 1;
                    }
                    stack.push(degrees.len());
                    degrees.push(0);
                }
                ')' => {
                    stack.pop().ok_or_else(|| bad("unbalanced ')'"))?;
                    if stack.is_empty() {
                        closed = true;
                    }
                }
                c if c.is_whitespace() => {}
                _ => return Err(bad("unexpected character")),
            }
        }
        if !closed || !stack.is_empty() {
            return Err(bad("unbalanced '('"));
        }
        Ok(Self::from_degrees_unchecked(degrees))
    }
}

pub struct Children<'a> {
    tree: &'a Tree,
    next: usize,
    left: usize,
}

impl Iterator for Children<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        if self.left == 0 {
            return None;
        }
        let c = self.next;
        self.next += self.tree.size[c];
        self.left -= 1;
        Some(c)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.left, Some(self.left))
    }
}

impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        self.degrees == other.degrees
    }
}

impl Eq for Tree {}

impl Hash for Tree {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.degrees.hash(state);
    }
}

impl PartialOrd for Tree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.degrees.cmp(&other.degrees))
    }
}

impl fmt::Debug for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tree{}", self.to_paren())
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_paren())
    }
}

impl FromStr for Tree {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Tree::parse_paren(s)
    }
}

impl Serialize for Tree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_paren())
    }
}

impl<'de> Deserialize<'de> for Tree {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Tree::parse_paren(&s).map_err(serde::de::Error::custom)
    }
}

/// True out-degree information for a node of a windowed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "tag", content = "degree")]
pub enum DegreeTag {
    /// Degree known and every child is materialized.
    Finite(usize),
    Infinite,
    /// Some children fall outside the window; the true degree is larger than
    /// the number of materialized children.
    TruncatedAtWindow,
}

/// `r_{h,∞}` of a possibly infinite tree: the nodes of norm at most `h`,
/// each with a degree tag.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WindowedTree {
    window: usize,
    shape: Tree,
    tags: Vec<DegreeTag>,
}

/// Number of children of a node at generation `depth` that have norm `≤ h`,
/// given that the node itself does.
pub fn visible_children(depth: usize, degree: usize, h: usize) -> usize {
    if depth < h {
        degree.min(h)
    } else {
        0
    }
}

impl WindowedTree {
    pub fn new(window: usize, shape: Tree, tags: Vec<DegreeTag>) -> Result<Self> {
        if tags.len() != shape.len() {
            return Err(Error::InvalidTree("one tag per node required".into()));
        }
        if shape.height_inf() > window {
            return Err(Error::InvalidTree("node beyond the window".into()));
        }
        for i in 0..shape.len() {
            let d = shape.degree(i);
            let ok = match tags[i] {
                DegreeTag::Finite(n) => n == d && visible_children(shape.depth(i), n, window) == n,
                DegreeTag::Infinite => d == visible_children(shape.depth(i), usize::MAX, window),
                DegreeTag::TruncatedAtWindow => {
                    d == visible_children(shape.depth(i), usize::MAX, window)
                        || shape.depth(i) == window
                }
            };
            if !ok {
                return Err(Error::InvalidTree(format!(
                    "tag {:?} inconsistent with {} visible children at {}",
                    tags[i],
                    d,
                    shape.label(i)
                )));
            }
        }
        Ok(WindowedTree {
            window,
            shape,
            tags,
        })
    }

    pub(crate) fn new_unchecked(window: usize, shape: Tree, tags: Vec<DegreeTag>) -> Self {
        debug_assert_eq!(tags.len(), shape.len());
        WindowedTree {
            window,
            shape,
            tags,
        }
    }

    fn from_tree(t: &Tree, h: usize) -> Self {
        let mut degrees = Vec::new();
        let mut tags = Vec::new();
        // Depth-first over kept nodes.
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            let k = t.degree(v);
            let vis = visible_children(t.depth(v), k, h);
            degrees.push(vis);
            tags.push(if vis == k {
                DegreeTag::Finite(k)
            } else {
                DegreeTag::TruncatedAtWindow
            });
            let kids: Vec<usize> = t.children(v).take(vis).collect();
            stack.extend(kids.into_iter().rev());
        }
        WindowedTree {
            window: h,
            shape: Tree::from_degrees_unchecked(degrees),
            tags,
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn shape(&self) -> &Tree {
        &self.shape
    }

    pub fn tags(&self) -> &[DegreeTag] {
        &self.tags
    }

    pub fn tag(&self, node: usize) -> DegreeTag {
        self.tags[node]
    }

    pub fn infinite_count(&self) -> usize {
        self.tags
            .iter()
            .filter(|t| **t == DegreeTag::Infinite)
            .count()
    }

    /// True when every tag is finite, i.e. the window shows the whole tree.
    pub fn is_complete(&self) -> bool {
        self.tags.iter().all(|t| matches!(t, DegreeTag::Finite(_)))
    }

    /// Further restriction to `h`; windows only shrink, so `h` above the
    /// current window returns a copy.
    pub fn restrict(&self, h: usize) -> WindowedTree {
        if h >= self.window {
            return self.clone();
        }
        let t = &self.shape;
        let mut degrees = Vec::new();
        let mut tags = Vec::new();
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            let shown = t.degree(v);
            let depth = t.depth(v);
            let (vis, tag) = match self.tags[v] {
                DegreeTag::Finite(k) => {
                    let vis = visible_children(depth, k, h);
                    let tag = if vis == k {
                        DegreeTag::Finite(k)
                    } else {
                        DegreeTag::TruncatedAtWindow
                    };
                    (vis, tag)
                }
                other => (visible_children(depth, shown, h), other),
            };
            degrees.push(vis);
            tags.push(tag);
            let kids: Vec<usize> = t.children(v).take(vis).collect();
            stack.extend(kids.into_iter().rev());
        }
        WindowedTree {
            window: h,
            shape: Tree::from_degrees_unchecked(degrees),
            tags,
        }
    }

    /// Lower bound on the true degree and, when known, its exact value
    /// (`None` inside means infinite).
    fn degree_info(&self, node: usize) -> DegreeInfo {
        match self.tags[node] {
            DegreeTag::Finite(k) => DegreeInfo::Exact(Some(k)),
            DegreeTag::Infinite => DegreeInfo::Exact(None),
            DegreeTag::TruncatedAtWindow => DegreeInfo::Above(self.shape.degree(node)),
        }
    }

    /// Membership of the underlying tree in `T_+(t, x, k)`: it is of the form
    /// `t ⊛ (s, x)` and `x` has at least `k` children.
    ///
    /// Errors with [`Error::WindowTooSmall`] when the window does not decide
    /// the event; a window of at least `max(k, H_∞(t)) + 1` always does.
    pub fn in_t_plus(&self, t: &Tree, x: &NodeLabel, k: usize) -> Result<bool> {
        let xi = t.find_or_err(x)?;
        let mut undecided = false;
        // Walk t in preorder, tracking the matching node of the window shape.
        let mut map = vec![NONE; t.len()];
        map[0] = 0;
        for u in 0..t.len() {
            let w = map[u];
            if w == NONE {
                undecided = true;
                continue;
            }
            let ku = t.degree(u);
            let needed = if u == xi { ku.max(k) } else { ku };
            match self.degree_info(w) {
                DegreeInfo::Exact(None) => {
                    if u != xi {
                        return Ok(false);
                    }
                }
                DegreeInfo::Exact(Some(d)) => {
                    if (u == xi && d < needed) || (u != xi && d != ku) {
                        return Ok(false);
                    }
                }
                DegreeInfo::Above(shown) => {
                    // True degree > shown.
                    if u != xi {
                        if shown >= ku {
                            return Ok(false);
                        }
                        undecided = true;
                    } else if shown + 1 < needed {
                        undecided = true;
                    }
                }
            }
            for (i, c) in t.children(u).enumerate() {
                map[c] = self.shape.child(w, i + 1).unwrap_or(NONE);
            }
        }
        if undecided {
            Err(Error::WindowTooSmall {
                window: self.window,
            })
        } else {
            Ok(true)
        }
    }

    /// Membership in `T(t, x) = T_+(t, x, 0)`.
    pub fn in_t(&self, t: &Tree, x: &NodeLabel) -> Result<bool> {
        self.in_t_plus(t, x, 0)
    }

    /// The finite tree, when the window shows all of it.
    pub fn to_tree(&self) -> Option<Tree> {
        self.is_complete().then(|| self.shape.clone())
    }
}

enum DegreeInfo {
    Exact(Option<usize>),
    Above(usize),
}

impl fmt::Display for WindowedTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.shape)
    }
}

impl Serialize for WindowedTree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let tags: Vec<serde_json::Value> = self
            .tags
            .iter()
            .map(|t| match t {
                DegreeTag::Finite(n) => serde_json::Value::from(*n),
                DegreeTag::Infinite => serde_json::Value::from("inf"),
                DegreeTag::TruncatedAtWindow => serde_json::Value::from("truncated"),
            })
            .collect();
        let mut st = s.serialize_struct("WindowedTree", 3)?;
        st.serialize_field("window", &self.window)?;
        st.serialize_field("tree", &self.shape.to_paren())?;
        st.serialize_field("degrees", &tags)?;
        st.end()
    }
}

impl Tree {
    /// Membership of this (finite) tree in `T_+(t, x, k)`.
    pub fn in_t_plus(&self, t: &Tree, x: &NodeLabel, k: usize) -> Result<bool> {
        self.to_windowed().in_t_plus(t, x, k)
    }
}

/// `d_∞` restricted to windows `≤ cap`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CappedDistance {
    /// Largest `h ≤ cap` with equal restrictions.
    pub agree_up_to: usize,
    /// The restrictions agree at `cap` itself, so the true distance is only
    /// bounded above by `2^{-cap}`.
    pub capped: bool,
}

impl CappedDistance {
    pub fn value(&self) -> f64 {
        0.5f64.powi(self.agree_up_to as i32)
    }
}

/// `d_∞(t, t') = 2^{-max{h : r_h(t) = r_h(t')}}`, examined only for `h ≤ cap`.
/// Restrictions are compared as node sets.
pub fn distance_capped(a: &WindowedTree, b: &WindowedTree, cap: usize) -> CappedDistance {
    let cap = cap.min(a.window()).min(b.window());
    let mut best = 0;
    for h in 1..=cap {
        if a.restrict(h).shape() == b.restrict(h).shape() {
            best = h;
        } else {
            break;
        }
    }
    CappedDistance {
        agree_up_to: best,
        capped: best == cap,
    }
}

/// A convergence-determining event `T_+(t, x, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TPlusEvent {
    pub t: Tree,
    pub x: NodeLabel,
    pub k: usize,
}

impl TPlusEvent {
    pub fn new(t: Tree, x: NodeLabel, k: usize) -> Result<Self> {
        t.find_or_err(&x)?;
        Ok(TPlusEvent { t, x, k })
    }

    /// Window that always decides the event.
    pub fn deciding_window(&self) -> usize {
        self.k.max(self.t.height_inf()) + 1
    }
}

impl fmt::Display for TPlusEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}", self.t, self.x, self.k)
    }
}

/// Parses `tree|x|k`, e.g. `(()())|1|0`.
impl FromStr for TPlusEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split('|').collect();
        if parts.len() != 3 {
            return Err(Error::InvalidTree(format!("event {s:?} is not tree|x|k")));
        }
        let t = Tree::parse_paren(parts[0])?;
        let x: NodeLabel = parts[1].parse()?;
        let k: usize = parts[2]
            .trim()
            .parse()
            .map_err(|_| Error::InvalidTree(format!("bad k in {s:?}")))?;
        TPlusEvent::new(t, x, k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> Tree {
        s.parse().unwrap()
    }

    fn l(s: &str) -> NodeLabel {
        s.parse().unwrap()
    }

    #[test]
    fn norms() {
        assert_eq!(NodeLabel::root().norm(), 0);
        assert_eq!(l("3.1.2").norm(), 3);
        assert_eq!(l("1.5").norm(), 5);
    }

    #[test]
    fn mrca_is_inclusive() {
        assert_eq!(mrca([&l("1.2"), &l("1.3.1")]), Some(l("1")));
        assert_eq!(mrca([&l("1"), &l("1.1")]), Some(l("1")));
        assert_eq!(mrca([&l("1"), &l("2")]), Some(NodeLabel::root()));
        assert_eq!(mrca(std::iter::empty()), None);
    }

    #[test]
    fn paren_round_trip_and_labels() {
        let tree = t("((()())()())");
        assert_eq!(tree.to_paren(), "((()())()())");
        assert_eq!(tree.degrees(), &[3, 2, 0, 0, 0, 0]);
        let labels: Vec<String> = tree.labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(labels, ["∅", "1", "1.1", "1.2", "2", "3"]);
        assert_eq!(Tree::from_labels(tree.labels()).unwrap(), tree);
        assert!(Tree::parse_paren("(()").is_err());
        assert!(Tree::parse_paren("()()").is_err());
        assert!(Tree::from_labels([NodeLabel::root(), l("2")]).is_err());
    }

    #[test]
    fn restrict_examples() {
        let tree = Tree::from_labels(["", "1", "2", "3", "11"].map(l)).unwrap();
        let r = tree.restrict(1);
        assert_eq!(r.shape(), &t("(())"));
        assert_eq!(r.tag(0), DegreeTag::TruncatedAtWindow);
        let full = tree.restrict(tree.height_inf());
        assert_eq!(full.shape(), &tree);
        assert!(full.is_complete());
        assert_eq!(t("(())").restrict(0).shape(), &Tree::leaf());
    }

    #[test]
    fn graft_examples() {
        let one = t("(())");
        assert_eq!(one.graft(&one, &NodeLabel::root()).unwrap(), t("(()())"));
        assert_eq!(Tree::leaf().graft(&one, &NodeLabel::root()).unwrap(), one);
        assert_eq!(one.graft(&Tree::leaf(), &l("1")).unwrap(), one);
        assert!(one.graft(&one, &l("2")).is_err());
        // Grafted subtrees land to the right of existing ones.
        let g = t("((())())").graft(&t("((()))"), &l("1")).unwrap();
        assert_eq!(g, t("((()(()))())"));
    }

    #[test]
    fn t_plus_examples() {
        let one = t("(())");
        assert!(t("(()())").in_t_plus(&one, &NodeLabel::root(), 2).unwrap());
        assert!(!one.in_t_plus(&one, &l("1"), 1).unwrap());
        let inf = WindowedTree::new(3, t("(()()())"), vec![
            DegreeTag::Infinite,
            DegreeTag::Finite(0),
            DegreeTag::Finite(0),
            DegreeTag::Finite(0),
        ])
        .unwrap();
        assert!(inf.in_t_plus(&Tree::leaf(), &NodeLabel::root(), 50).unwrap());
    }

    #[test]
    fn small_window_is_undecided() {
        let big = t("(()()()())");
        let w = big.restrict(2);
        assert!(matches!(
            w.in_t_plus(&Tree::leaf(), &NodeLabel::root(), 4),
            Err(Error::WindowTooSmall { .. })
        ));
        assert!(w.in_t_plus(&Tree::leaf(), &NodeLabel::root(), 3).unwrap());
    }

    #[test]
    fn count_a_examples() {
        let a0 = DegreeSet::finite([0]);
        let (nodes, n) = t("(()())").count_a(&a0);
        assert_eq!(n, 2);
        assert_eq!(nodes, vec![l("1"), l("2")]);
        assert_eq!(t("(()())").count_a(&DegreeSet::all()).1, 3);
        assert_eq!(t("((()())())").count_a(&DegreeSet::finite([0, 2])).1, 5);
    }

    #[test]
    fn event_parse() {
        let e: TPlusEvent = "(()())|1|0".parse().unwrap();
        assert_eq!(e.x, l("1"));
        assert_eq!(e.to_string(), "(()())|1|0");
        assert!("(())|2|0".parse::<TPlusEvent>().is_err());
    }
}

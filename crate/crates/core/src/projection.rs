//! The maps that turn the `A`-nodes of a tree into a tree (`0 ∈ A`) or a
//! forest (`0 ∉ A`).

use serde::Serialize;

use crate::degree_set::DegreeSet;
use crate::error::{Error, Result};
use crate::tree::{NodeLabel, Tree};

/// The image tree and the bijection `φ`, listed in lexicographic order of
/// the source nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeProjection {
    pub tree: Tree,
    pub phi: Vec<(NodeLabel, NodeLabel)>,
}

/// A node of the image forest: which tree, and where in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ForestNode {
    pub tree: usize,
    pub label: NodeLabel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ForestProjection {
    pub forest: Vec<Tree>,
    pub phi: Vec<(NodeLabel, ForestNode)>,
}

impl ForestProjection {
    pub fn total_size(&self) -> usize {
        self.forest.iter().map(Tree::len).sum()
    }
}

/// `t ↦ t^A` for `0 ∈ A`. The `k`-th `A`-node (lexicographically) becomes
/// the new rightmost child of the image of the first `A`-node above
/// `MRCA(u^{k−1}, u^k)`.
pub fn project_ta(t: &Tree, a: &DegreeSet) -> Result<TreeProjection> {
    if !a.contains_zero() {
        return Err(Error::InvalidSet("the tree projection needs 0 in A".into()));
    }
    // Preorder is the lexicographic order.
    let nodes: Vec<usize> = (0..t.len()).filter(|&u| a.contains(t.degree(u))).collect();
    // image index of each A-node, by position in `nodes`
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(nodes.len());
    for k in 0..nodes.len() {
        if k == 0 {
            parent.push(None);
            continue;
        }
        let w = mrca_index(t, nodes[k - 1], nodes[k]);
        // first A-node at or after w in preorder; it lies in the subtree of w
        // because u^{k−1} does.
        let v = nodes.partition_point(|&u| u < w);
        parent.push(Some(v));
    }
    let (tree, position) = tree_from_parents(&parent);
    let labels = tree.labels();
    let phi = nodes
        .iter()
        .zip(position)
        .map(|(&u, i)| (t.label(u), labels[i].clone()))
        .collect();
    Ok(TreeProjection { tree, phi })
}

/// `t ↦ F_A(t)` for `0 ∉ A`: each `A`-node hangs below its nearest strict
/// `A`-ancestor; those without one are the roots, in lexicographic order.
pub fn project_forest(t: &Tree, a: &DegreeSet) -> Result<ForestProjection> {
    if a.contains_zero() {
        return Err(Error::InvalidSet("the forest projection needs 0 outside A".into()));
    }
    let mut nearest: Vec<Option<usize>> = vec![None; t.len()];
    let mut index_of = vec![usize::MAX; t.len()];
    let mut parent: Vec<Option<usize>> = Vec::new();
    let mut nodes = Vec::new();
    for u in 0..t.len() {
        // nearest A-node among u's strict ancestors
        let above = t.parent(u).and_then(|p| {
            if index_of[p] != usize::MAX {
                Some(index_of[p])
            } else {
                nearest[p]
            }
        });
        nearest[u] = above;
        if a.contains(t.degree(u)) {
            index_of[u] = nodes.len();
            nodes.push(u);
            parent.push(above);
        }
    }
    // Split into trees at the roots.
    let mut forest = Vec::new();
    let mut phi = Vec::with_capacity(nodes.len());
    let mut tree_of = vec![0usize; nodes.len()];
    let mut local = vec![0usize; nodes.len()];
    let mut groups: Vec<Vec<Option<usize>>> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    for (i, p) in parent.iter().enumerate() {
        match p {
            None => {
                tree_of[i] = groups.len();
                local[i] = 0;
                groups.push(vec![None]);
                members.push(vec![i]);
            }
            Some(p) => {
                let g = tree_of[*p];
                tree_of[i] = g;
                local[i] = groups[g].len();
                groups[g].push(Some(local[*p]));
                members[g].push(i);
            }
        }
    }
    let mut images: Vec<Option<ForestNode>> = vec![None; nodes.len()];
    for (g, parents) in groups.iter().enumerate() {
        let (tree, position) = tree_from_parents(parents);
        let labels = tree.labels();
        for (j, &i) in members[g].iter().enumerate() {
            images[i] = Some(ForestNode {
                tree: g,
                label: labels[position[j]].clone(),
            });
        }
        forest.push(tree);
    }
    for (i, &u) in nodes.iter().enumerate() {
        phi.push((t.label(u), images[i].take().expect("every A-node has an image")));
    }
    Ok(ForestProjection { forest, phi })
}

/// Deepest common node of the root paths of `u` and `v`, endpoints included.
fn mrca_index(t: &Tree, mut u: usize, mut v: usize) -> usize {
    while t.depth(u) > t.depth(v) {
        u = t.parent(u).expect("deeper node has a parent");
    }
    while t.depth(v) > t.depth(u) {
        v = t.parent(v).expect("deeper node has a parent");
    }
    while u != v {
        u = t.parent(u).expect("distinct nodes below the root");
        v = t.parent(v).expect("distinct nodes below the root");
    }
    u
}

/// Builds the tree in which node `i` is attached as the rightmost child of
/// `parents[i]` (node 0 is the root). Returns the tree and each node's
/// preorder position.
fn tree_from_parents(parents: &[Option<usize>]) -> (Tree, Vec<usize>) {
    if parents.is_empty() {
        return (Tree::leaf(), Vec::new());
    }
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); parents.len()];
    for (i, p) in parents.iter().enumerate().skip(1) {
        children[p.expect("only node 0 is a root")].push(i);
    }
    let mut degrees = Vec::with_capacity(parents.len());
    let mut position = vec![0; parents.len()];
    let mut stack = vec![0usize];
    while let Some(v) = stack.pop() {
        position[v] = degrees.len();
        degrees.push(children[v].len());
        stack.extend(children[v].iter().rev());
    }
    (Tree::from_degrees_unchecked(degrees), position)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(s: &str) -> Tree {
        s.parse().unwrap()
    }

    #[test]
    fn ta_examples() {
        let t = tree("((()())())");
        let p = project_ta(&t, &DegreeSet::finite([0, 2])).unwrap();
        assert_eq!(p.tree, t);
        assert!(p.phi.iter().all(|(u, v)| u == v));
        let p = project_ta(&tree("(()()())"), &DegreeSet::finite([0])).unwrap();
        assert_eq!(p.tree, tree("(()())"));
        let p = project_ta(&Tree::leaf(), &DegreeSet::finite([0])).unwrap();
        assert_eq!(p.tree, Tree::leaf());
        assert!(project_ta(&t, &DegreeSet::finite([2])).is_err());
    }

    #[test]
    fn forest_examples() {
        let a = DegreeSet::finite([2]);
        let f = project_forest(&tree("((()())())"), &a).unwrap();
        assert_eq!(f.forest, vec![tree("(())")]);
        let f = project_forest(&tree("(()())"), &a).unwrap();
        assert_eq!(f.forest, vec![Tree::leaf()]);
        let f = project_forest(&tree("((()))"), &a).unwrap();
        assert!(f.forest.is_empty());
        // root of degree 3 above two A-nodes: two trees
        let f = project_forest(&tree("((()())(()())())"), &a).unwrap();
        assert_eq!(f.forest, vec![Tree::leaf(), Tree::leaf()]);
        assert_eq!(f.phi[1].1.tree, 1);
        let f = project_forest(&tree("(((()()))(()()))"), &a).unwrap();
        assert_eq!(f.forest.len(), 1);
        let f = project_forest(&tree("((()())(()()))"), &DegreeSet::finite([1])).unwrap();
        assert!(f.forest.is_empty());
    }
}

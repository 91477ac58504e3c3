use std::collections::{BTreeMap, HashMap};
use std::fmt;

use super::PhyloError;

/// Index of a node in the tree arena.
pub type NodeId = usize;

/// Distances closer than this are treated as equal.
pub const DIST_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub label: Option<String>,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Length of the edge from the parent. Always 0 for the root.
    pub length: f64,
}

/// Where a named point sits on a tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Location {
    Node(NodeId),
    /// A point on the edge above `child`, `offset` time units below the
    /// parent end of that edge.
    Edge { child: NodeId, offset: f64 },
}

/// Weighted rooted tree with named leaves, optional interior labels and named
/// points that may sit in the middle of an edge.
#[derive(Debug, Clone)]
pub struct Tree {
    nodes: Vec<Node>,
    root: NodeId,
    labels: HashMap<String, NodeId>,
    points: BTreeMap<String, Location>,
}

impl Tree {
    pub fn new(root_label: Option<&str>) -> Self {
        let mut labels = HashMap::new();
        if let Some(l) = root_label {
            labels.insert(l.to_string(), 0);
        }
        Self {
            nodes: vec![Node {
                label: root_label.map(str::to_string),
                parent: None,
                children: Vec::new(),
                length: 0.0,
            }],
            root: 0,
            labels,
            points: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&Node, PhyloError> {
        self.nodes.get(id).ok_or(PhyloError::NoSuchNode(id))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn is_leaf(&self, id: NodeId) -> bool {
        self.nodes[id].children.is_empty()
    }

    pub fn add_child(
        &mut self,
        parent: NodeId,
        label: Option<&str>,
        length: f64,
    ) -> Result<NodeId, PhyloError> {
        self.node(parent)?;
        check_length(label.unwrap_or("<unnamed>"), length)?;
        let id = self.nodes.len();
        if let Some(l) = label {
            self.claim_label(l, id)?;
        }
        self.nodes.push(Node {
            label: label.map(str::to_string),
            parent: Some(parent),
            children: Vec::new(),
            length,
        });
        self.nodes[parent].children.push(id);
        Ok(id)
    }

    pub fn set_length(&mut self, id: NodeId, length: f64) -> Result<(), PhyloError> {
        self.node(id)?;
        if id == self.root {
            return Err(PhyloError::RootHasNoEdge);
        }
        check_length(self.nodes[id].label.as_deref().unwrap_or("<unnamed>"), length)?;
        for (name, loc) in &self.points {
            if let Location::Edge { child, offset } = *loc {
                if child == id && offset > length {
                    return Err(PhyloError::OffsetOutOfRange {
                        point: name.clone(),
                        offset,
                        length,
                    });
                }
            }
        }
        self.nodes[id].length = length;
        Ok(())
    }

    pub fn set_label(&mut self, id: NodeId, label: &str) -> Result<(), PhyloError> {
        self.node(id)?;
        self.claim_label(label, id)?;
        if let Some(old) = self.nodes[id].label.take() {
            self.labels.remove(&old);
        }
        self.nodes[id].label = Some(label.to_string());
        Ok(())
    }

    fn claim_label(&mut self, label: &str, id: NodeId) -> Result<(), PhyloError> {
        if label.is_empty() {
            return Err(PhyloError::EmptyLabel);
        }
        if self.labels.contains_key(label) || self.points.contains_key(label) {
            return Err(PhyloError::DuplicateLabel(label.to_string()));
        }
        self.labels.insert(label.to_string(), id);
        Ok(())
    }

    /// Registers a named point. Node labels and point names share one
    /// namespace.
    pub fn mark_point(&mut self, name: &str, location: Location) -> Result<(), PhyloError> {
        if name.is_empty() {
            return Err(PhyloError::EmptyLabel);
        }
        if self.labels.contains_key(name) || self.points.contains_key(name) {
            return Err(PhyloError::DuplicateLabel(name.to_string()));
        }
        match location {
            Location::Node(id) => {
                self.node(id)?;
            }
            Location::Edge { child, offset } => {
                let len = self.node(child)?.length;
                if child == self.root {
                    return Err(PhyloError::RootHasNoEdge);
                }
                if !(0.0..=len).contains(&offset) {
                    return Err(PhyloError::OffsetOutOfRange {
                        point: name.to_string(),
                        offset,
                        length: len,
                    });
                }
            }
        }
        self.points.insert(name.to_string(), location);
        Ok(())
    }

    pub fn marked_points(&self) -> &BTreeMap<String, Location> {
        &self.points
    }

    pub fn node_by_label(&self, label: &str) -> Option<NodeId> {
        self.labels.get(label).copied()
    }

    /// Resolves a node label or marked point name.
    pub fn resolve(&self, label: &str) -> Result<Location, PhyloError> {
        if let Some(loc) = self.points.get(label) {
            return Ok(*loc);
        }
        self.labels
            .get(label)
            .map(|&id| Location::Node(id))
            .ok_or_else(|| PhyloError::UnknownLabel(label.to_string()))
    }

    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.nodes.len()).filter(|&i| self.is_leaf(i)).collect()
    }

    pub fn leaf_labels(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .leaves()
            .into_iter()
            .filter_map(|i| self.nodes[i].label.clone())
            .collect();
        out.sort();
        out
    }

    /// Nodes ordered so that every parent precedes its children.
    pub fn preorder(&self) -> Vec<NodeId> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            order.push(v);
            stack.extend(self.nodes[v].children.iter().rev());
        }
        order
    }

    pub fn node_depth(&self, mut id: NodeId) -> f64 {
        let mut d = 0.0;
        while let Some(p) = self.nodes[id].parent {
            d += self.nodes[id].length;
            id = p;
        }
        d
    }

    pub fn location_depth(&self, loc: Location) -> f64 {
        match loc {
            Location::Node(id) => self.node_depth(id),
            Location::Edge { child, offset } => {
                let parent = self.nodes[child].parent.expect("edge has a parent");
                self.node_depth(parent) + offset
            }
        }
    }

    pub fn ancestors(&self, mut id: NodeId) -> Vec<NodeId> {
        let mut out = vec![id];
        while let Some(p) = self.nodes[id].parent {
            out.push(p);
            id = p;
        }
        out
    }

    pub fn lca(&self, a: NodeId, b: NodeId) -> NodeId {
        let up_a = self.ancestors(a);
        let mut v = b;
        loop {
            if up_a.contains(&v) {
                return v;
            }
            v = self.nodes[v].parent.expect("nodes share the root");
        }
    }

    /// Most recent common ancestor of a set of labelled nodes.
    pub fn mrca(&self, labels: &[&str]) -> Result<NodeId, PhyloError> {
        let mut ids = labels.iter().map(|l| {
            self.node_by_label(l)
                .ok_or_else(|| PhyloError::UnknownLabel(l.to_string()))
        });
        let first = ids.next().ok_or(PhyloError::EmptyLabelSet)??;
        ids.try_fold(first, |acc, id| Ok(self.lca(acc, id?)))
    }

    /// Path length between two locations.
    pub fn location_distance(&self, u: Location, v: Location) -> f64 {
        // Normalise to (edge child, height above that child).
        let canon = |loc: Location| match loc {
            Location::Node(id) => (id, 0.0),
            Location::Edge { child, offset } => (child, self.nodes[child].length - offset),
        };
        let (cu, hu) = canon(u);
        let (cv, hv) = canon(v);
        if cu == cv {
            return (hu - hv).abs();
        }
        let du = self.location_depth(u);
        let dv = self.location_depth(v);
        let w = self.lca(cu, cv);
        if w == cv {
            // v sits on or above cv, which is an ancestor of u
            du - dv
        } else if w == cu {
            dv - du
        } else {
            du + dv - 2.0 * self.node_depth(w)
        }
    }

    /// Path length between two labelled points.
    pub fn dist(&self, u: &str, v: &str) -> Result<f64, PhyloError> {
        Ok(self.location_distance(self.resolve(u)?, self.resolve(v)?))
    }

    /// Copy of the tree in which every requested location is a node. Edges
    /// carrying points are subdivided; returns the node id for each input.
    pub fn materialize(&self, locations: &[Location]) -> (Tree, Vec<NodeId>) {
        let mut out = self.clone();
        out.points.clear();
        // Group edge points by edge, keeping the original indices.
        let mut per_edge: BTreeMap<NodeId, Vec<(f64, usize)>> = BTreeMap::new();
        let mut ids = vec![usize::MAX; locations.len()];
        for (i, loc) in locations.iter().enumerate() {
            match *loc {
                Location::Node(id) => ids[i] = id,
                Location::Edge { child, offset } => {
                    per_edge.entry(child).or_default().push((offset, i))
                }
            }
        }
        for (child, mut pts) in per_edge {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let parent = out.nodes[child].parent.expect("edge has a parent");
            let total = out.nodes[child].length;
            let mut upper = parent;
            let mut upper_offset = 0.0;
            let mut last_offset = f64::NAN;
            for (offset, idx) in pts {
                if offset == last_offset {
                    ids[idx] = upper;
                    continue;
                }
                let id = out.nodes.len();
                out.nodes.push(Node {
                    label: None,
                    parent: Some(upper),
                    children: Vec::new(),
                    length: offset - upper_offset,
                });
                out.replace_child(upper, child, id);
                out.nodes[id].children.push(child);
                out.nodes[child].parent = Some(id);
                upper = id;
                upper_offset = offset;
                last_offset = offset;
                ids[idx] = id;
            }
            out.nodes[child].length = total - upper_offset;
        }
        (out, ids)
    }

    fn replace_child(&mut self, parent: NodeId, old: NodeId, new: NodeId) {
        let slot = self.nodes[parent]
            .children
            .iter_mut()
            .find(|c| **c == old)
            .expect("child is attached to parent");
        *slot = new;
    }

    /// Restriction of the tree to a leaf subset: nodes without kept
    /// descendants are dropped and unary interior nodes are suppressed. The
    /// path from the original root down to the subset's MRCA is kept as a
    /// single root edge so root distances are preserved.
    pub fn restrict(&self, keep: &[&str]) -> Result<Tree, PhyloError> {
        let mut kept = vec![false; self.nodes.len()];
        for l in keep {
            let id = self
                .node_by_label(l)
                .ok_or_else(|| PhyloError::UnknownLabel(l.to_string()))?;
            for a in self.ancestors(id) {
                kept[a] = true;
            }
        }
        let mut out = Tree::new(self.nodes[self.root].label.as_deref());
        // (source node, destination parent, accumulated length)
        let mut stack = vec![(self.root, None::<NodeId>, 0.0)];
        while let Some((v, dest_parent, acc)) = stack.pop() {
            let kids: Vec<NodeId> =
                self.nodes[v].children.iter().copied().filter(|&c| kept[c]).collect();
            let here = match dest_parent {
                None => out.root,
                Some(p) => {
                    let acc = acc + self.nodes[v].length;
                    if kids.len() == 1 {
                        stack.push((kids[0], Some(p), acc));
                        continue;
                    }
                    out.add_child(p, self.nodes[v].label.as_deref(), acc)?
                }
            };
            if dest_parent.is_none() && kids.len() == 1 {
                // Collapse the root path into one edge below the root.
                let mut w = kids[0];
                let mut acc = self.nodes[w].length;
                loop {
                    let next: Vec<NodeId> =
                        self.nodes[w].children.iter().copied().filter(|&c| kept[c]).collect();
                    if next.len() == 1 {
                        w = next[0];
                        acc += self.nodes[w].length;
                    } else {
                        break;
                    }
                }
                let id = out.add_child(here, self.nodes[w].label.as_deref(), acc)?;
                let next: Vec<NodeId> =
                    self.nodes[w].children.iter().copied().filter(|&c| kept[c]).collect();
                for c in next.into_iter().rev() {
                    stack.push((c, Some(id), 0.0));
                }
                continue;
            }
            for c in kids.into_iter().rev() {
                stack.push((c, Some(here), 0.0));
            }
        }
        Ok(out)
    }

    /// Order-independent Newick-like rendering: children are sorted by their
    /// own rendering and lengths are printed with `digits` decimals, or
    /// omitted when `digits` is `None`.
    pub fn canonical_form(&self, digits: Option<usize>) -> String {
        fn render(t: &Tree, v: NodeId, digits: Option<usize>) -> String {
            let node = &t.nodes[v];
            let mut s = String::new();
            if !node.children.is_empty() {
                let mut kids: Vec<String> =
                    node.children.iter().map(|&c| render(t, c, digits)).collect();
                kids.sort();
                s.push('(');
                s.push_str(&kids.join(","));
                s.push(')');
            }
            if node.children.is_empty() || digits.is_some() {
                if let Some(l) = &node.label {
                    s.push_str(l);
                }
            }
            if let (Some(d), Some(_)) = (digits, node.parent) {
                s.push_str(&format!(":{:.*}", d, node.length));
            }
            s
        }
        render(self, self.root, digits)
    }

    /// Leaf topology of the restriction to `leaves`, ignoring lengths, the root
    /// path and interior labels, e.g. `((A,C),B)`.
    pub fn topology(&self, leaves: &[&str]) -> Result<String, PhyloError> {
        let r = self.restrict(leaves)?;
        // Drop the single root edge if the restriction kept one.
        let mut t = r.clone();
        if r.nodes[r.root].children.len() == 1 {
            let only = r.nodes[r.root].children[0];
            t = r.subtree(only);
        }
        Ok(t.canonical_form(None))
    }

    /// Copy of the clade below `id`, re-rooted at `id`.
    pub fn subtree(&self, id: NodeId) -> Tree {
        let mut out = Tree::new(self.nodes[id].label.as_deref());
        let mut stack: Vec<(NodeId, NodeId)> =
            self.nodes[id].children.iter().rev().map(|&c| (c, 0)).collect();
        while let Some((v, p)) = stack.pop() {
            let nid = out
                .add_child(p, self.nodes[v].label.as_deref(), self.nodes[v].length)
                .expect("labels already unique");
            stack.extend(self.nodes[v].children.iter().rev().map(|&c| (c, nid)));
        }
        out
    }

    /// Labels of all leaves below `id` (inclusive).
    pub fn leaves_below(&self, id: NodeId) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(v) = stack.pop() {
            if self.nodes[v].children.is_empty() {
                if let Some(l) = &self.nodes[v].label {
                    out.push(l.clone());
                }
            }
            stack.extend(self.nodes[v].children.iter().copied());
        }
        out.sort();
        out
    }
}

fn check_length(label: &str, length: f64) -> Result<(), PhyloError> {
    if !length.is_finite() || length < 0.0 {
        return Err(PhyloError::InvalidLength {
            label: label.to_string(),
            length,
        });
    }
    Ok(())
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&super::newick::to_newick(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Tree {
        // ((A:0.5,C:0.3)X:0.5,B:1.0)R;
        let mut t = Tree::new(Some("R"));
        let x = t.add_child(0, Some("X"), 0.5).unwrap();
        t.add_child(x, Some("A"), 0.5).unwrap();
        t.add_child(x, Some("C"), 0.3).unwrap();
        t.add_child(0, Some("B"), 1.0).unwrap();
        t
    }

    #[test]
    fn distances_follow_paths() {
        let t = small();
        assert_eq!(t.dist("R", "R").unwrap(), 0.0);
        assert!((t.dist("A", "C").unwrap() - 0.8).abs() < 1e-15);
        assert!((t.dist("A", "B").unwrap() - 2.0).abs() < 1e-15);
        assert!((t.dist("X", "A").unwrap() - 0.5).abs() < 1e-15);
        assert!(matches!(t.dist("A", "Q"), Err(PhyloError::UnknownLabel(_))));
    }

    #[test]
    fn edge_points_measure_from_parent() {
        let mut t = small();
        let a = t.node_by_label("A").unwrap();
        t.mark_point("P", Location::Edge { child: a, offset: 0.2 }).unwrap();
        t.mark_point("Q", Location::Edge { child: a, offset: 0.4 }).unwrap();
        assert!((t.dist("P", "A").unwrap() - 0.3).abs() < 1e-15);
        assert!((t.dist("P", "Q").unwrap() - 0.2).abs() < 1e-15);
        assert!((t.dist("P", "C").unwrap() - 0.5).abs() < 1e-15);
        assert!((t.dist("P", "R").unwrap() - 0.7).abs() < 1e-15);
        assert!((t.dist("P", "B").unwrap() - 1.7).abs() < 1e-15);
        let err = t.mark_point("Z", Location::Edge { child: a, offset: 0.6 });
        assert!(matches!(err, Err(PhyloError::OffsetOutOfRange { .. })));
    }

    #[test]
    fn materialize_preserves_distances() {
        let mut t = small();
        let a = t.node_by_label("A").unwrap();
        let b = t.node_by_label("B").unwrap();
        t.mark_point("P", Location::Edge { child: a, offset: 0.2 }).unwrap();
        t.mark_point("Q", Location::Edge { child: b, offset: 0.7 }).unwrap();
        let locs: Vec<Location> =
            ["P", "Q", "C"].iter().map(|l| t.resolve(l).unwrap()).collect();
        let (m, ids) = t.materialize(&locs);
        for i in 0..3 {
            for j in 0..3 {
                let want = t.location_distance(locs[i], locs[j]);
                let got = m.location_distance(Location::Node(ids[i]), Location::Node(ids[j]));
                assert!((want - got).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut t = small();
        assert!(matches!(
            t.add_child(0, Some("A"), 1.0),
            Err(PhyloError::DuplicateLabel(_))
        ));
        assert!(matches!(
            t.add_child(0, Some("D"), -1.0),
            Err(PhyloError::InvalidLength { .. })
        ));
    }

    #[test]
    fn restriction_and_topology() {
        let t = small();
        assert_eq!(t.topology(&["A", "B", "C"]).unwrap(), "((A,C),B)");
        let r = t.restrict(&["A", "B"]).unwrap();
        assert!((r.dist("A", "B").unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(r.canonical_form(Some(3)), "(A:1.000,B:1.000)R");
    }
}

//! Newick reading and writing, plus the sidecar syntax for named points that
//! standard Newick cannot express (points in the middle of an edge).
//!
//! Sidecar lines have the form `name@child:offset`, naming the edge by the
//! label of its lower endpoint and measuring `offset` down from the upper
//! endpoint, or `name@node` to alias an existing labelled node. Blank lines
//! and lines starting with `#` are ignored.

use thiserror::Error;

use super::tree::{Location, NodeId, Tree};
use super::PhyloError;

#[derive(Debug, Error, PartialEq)]
pub enum NewickError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("negative branch length {length} at byte {offset}")]
    NegativeLength { offset: usize, length: f64 },
    #[error("missing branch length at byte {offset}")]
    MissingLength { offset: usize },
    #[error("leaf without a label at byte {offset}")]
    EmptyLeafLabel { offset: usize },
    #[error("duplicate label {label:?} at byte {offset}")]
    DuplicateLabel { offset: usize, label: String },
    #[error("sidecar line {line}: {message}")]
    Sidecar { line: usize, message: String },
}

impl NewickError {
    /// Byte offset of the problem in the Newick text, when there is one.
    pub fn offset(&self) -> Option<usize> {
        match self {
            Self::Syntax { offset, .. }
            | Self::NegativeLength { offset, .. }
            | Self::MissingLength { offset }
            | Self::EmptyLeafLabel { offset }
            | Self::DuplicateLabel { offset, .. } => Some(*offset),
            Self::Sidecar { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NewickOptions {
    /// Give edges without a `:length` unit length instead of failing.
    pub allow_missing_lengths: bool,
}

pub fn parse_newick(text: &str) -> Result<Tree, NewickError> {
    parse_newick_with(text, NewickOptions::default())
}

pub fn parse_newick_with(text: &str, options: NewickOptions) -> Result<Tree, NewickError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let parsed = p.subtree()?;
    p.skip_ws()?;
    // An optional root length is accepted and dropped.
    if p.peek() == Some(b':') {
        p.pos += 1;
        p.number()?;
        p.skip_ws()?;
    }
    if p.peek() != Some(b';') {
        return Err(p.syntax("expected ';'"));
    }
    p.pos += 1;
    p.skip_ws()?;
    if p.pos != p.src.len() {
        return Err(p.syntax("trailing characters after ';'"));
    }

    let mut tree = Tree::new(None);
    if let Some((label, off)) = &parsed.label {
        tree.set_label(tree.root(), label).map_err(|_| NewickError::DuplicateLabel {
            offset: *off,
            label: label.clone(),
        })?;
    }
    let mut stack: Vec<(&Parsed, NodeId)> =
        parsed.children.iter().rev().map(|c| (c, tree.root())).collect();
    while let Some((node, parent)) = stack.pop() {
        let length = match node.length {
            Some(l) => l,
            None if options.allow_missing_lengths => 1.0,
            None => return Err(NewickError::MissingLength { offset: node.end }),
        };
        let id = tree
            .add_child(parent, node.label.as_ref().map(|l| l.0.as_str()), length)
            .map_err(|e| match e {
                PhyloError::DuplicateLabel(label) => NewickError::DuplicateLabel {
                    offset: node.label.as_ref().map_or(node.end, |l| l.1),
                    label,
                },
                other => NewickError::Syntax {
                    offset: node.end,
                    message: other.to_string(),
                },
            })?;
        stack.extend(node.children.iter().rev().map(|c| (c, id)));
    }
    Ok(tree)
}

struct Parsed {
    label: Option<(String, usize)>,
    length: Option<f64>,
    children: Vec<Parsed>,
    end: usize,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn syntax(&self, message: &str) -> NewickError {
        NewickError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) -> Result<(), NewickError> {
        loop {
            match self.peek() {
                Some(c) if c.is_ascii_whitespace() => self.pos += 1,
                Some(b'[') => {
                    let start = self.pos;
                    while self.peek().is_some_and(|c| c != b']') {
                        self.pos += 1;
                    }
                    if self.peek().is_none() {
                        return Err(NewickError::Syntax {
                            offset: start,
                            message: "unterminated comment".into(),
                        });
                    }
                    self.pos += 1;
                }
                _ => return Ok(()),
            }
        }
    }

    fn subtree(&mut self) -> Result<Parsed, NewickError> {
        self.skip_ws()?;
        let mut children = Vec::new();
        let is_internal = self.peek() == Some(b'(');
        if is_internal {
            self.pos += 1;
            loop {
                children.push(self.subtree()?);
                self.skip_ws()?;
                match self.peek() {
                    Some(b',') => self.pos += 1,
                    Some(b')') => {
                        self.pos += 1;
                        break;
                    }
                    _ => return Err(self.syntax("expected ',' or ')'")),
                }
            }
        }
        self.skip_ws()?;
        let label_start = self.pos;
        let label = self.label()?;
        if !is_internal && label.is_none() {
            return Err(NewickError::EmptyLeafLabel { offset: label_start });
        }
        self.skip_ws()?;
        let mut length = None;
        if self.peek() == Some(b':') {
            self.pos += 1;
            let at = self.pos;
            let l = self.number()?;
            if l < 0.0 {
                return Err(NewickError::NegativeLength { offset: at, length: l });
            }
            length = Some(l);
        }
        Ok(Parsed {
            label: label.map(|l| (l, label_start)),
            length,
            children,
            end: self.pos,
        })
    }

    fn label(&mut self) -> Result<Option<String>, NewickError> {
        if self.peek() == Some(b'\'') {
            let start = self.pos;
            self.pos += 1;
            let mut out = Vec::new();
            loop {
                match self.peek() {
                    None => {
                        return Err(NewickError::Syntax {
                            offset: start,
                            message: "unterminated quoted label".into(),
                        })
                    }
                    Some(b'\'') if self.src.get(self.pos + 1) == Some(&b'\'') => {
                        out.push(b'\'');
                        self.pos += 2;
                    }
                    Some(b'\'') => {
                        self.pos += 1;
                        break;
                    }
                    Some(c) => {
                        out.push(c);
                        self.pos += 1;
                    }
                }
            }
            let s = String::from_utf8(out).map_err(|_| NewickError::Syntax {
                offset: start,
                message: "label is not UTF-8".into(),
            })?;
            return Ok((!s.is_empty()).then_some(s));
        }
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_whitespace() || b"()[]':;,".contains(&c) {
                break;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Ok(None);
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).map_err(|_| NewickError::Syntax {
            offset: start,
            message: "label is not UTF-8".into(),
        })?;
        Ok(Some(s.replace('_', " ")))
    }

    fn number(&mut self) -> Result<f64, NewickError> {
        self.skip_ws()?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || b"+-.eE".contains(&c) {
                self.pos += 1;
            } else {
                break;
            }
        }
        let s = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or(NewickError::Syntax {
                offset: start,
                message: format!("invalid branch length {s:?}"),
            })
    }
}

fn quote_label(label: &str) -> String {
    let plain = !label.is_empty()
        && label
            .bytes()
            .all(|c| !(c.is_ascii_whitespace() || b"()[]':;,_".contains(&c)));
    if plain {
        label.to_string()
    } else if label.bytes().all(|c| c == b' ' || !(c.is_ascii_whitespace() || b"()[]':;,_".contains(&c))) {
        label.replace(' ', "_")
    } else {
        format!("'{}'", label.replace('\'', "''"))
    }
}

/// Writes the tree in Newick form. Child order is preserved and branch
/// lengths use the shortest representation that parses back to the same
/// `f64`. Named edge points are not representable; see [`to_sidecar`].
pub fn to_newick(tree: &Tree) -> String {
    fn write(t: &Tree, v: NodeId, out: &mut String) {
        let node = &t.nodes()[v];
        if !node.children.is_empty() {
            out.push('(');
            for (i, &c) in node.children.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write(t, c, out);
            }
            out.push(')');
        }
        if let Some(l) = &node.label {
            out.push_str(&quote_label(l));
        }
        if node.parent.is_some() {
            out.push(':');
            out.push_str(&node.length.to_string());
        }
    }
    let mut out = String::new();
    write(tree, tree.root(), &mut out);
    out.push(';');
    out
}

/// Point specification read from a sidecar line.
#[derive(Debug, Clone, PartialEq)]
pub enum PointSpec {
    Node(String),
    Edge { child: String, offset: f64 },
}

pub fn parse_sidecar(text: &str) -> Result<Vec<(String, PointSpec)>, NewickError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: &str| NewickError::Sidecar {
            line: i + 1,
            message: message.to_string(),
        };
        let (name, target) = line.split_once('@').ok_or_else(|| err("expected name@target"))?;
        let name = name.trim();
        if name.is_empty() {
            return Err(err("empty point name"));
        }
        let spec = match target.rsplit_once(':') {
            Some((child, off)) => {
                let offset: f64 = off.trim().parse().map_err(|_| err("invalid offset"))?;
                PointSpec::Edge {
                    child: child.trim().to_string(),
                    offset,
                }
            }
            None => PointSpec::Node(target.trim().to_string()),
        };
        out.push((name.to_string(), spec));
    }
    Ok(out)
}

/// Attaches sidecar points to a tree.
pub fn apply_sidecar(tree: &mut Tree, specs: &[(String, PointSpec)]) -> Result<(), PhyloError> {
    for (name, spec) in specs {
        let loc = match spec {
            PointSpec::Node(l) => Location::Node(
                tree.node_by_label(l)
                    .ok_or_else(|| PhyloError::UnknownLabel(l.clone()))?,
            ),
            PointSpec::Edge { child, offset } => Location::Edge {
                child: tree
                    .node_by_label(child)
                    .ok_or_else(|| PhyloError::UnknownLabel(child.clone()))?,
                offset: *offset,
            },
        };
        tree.mark_point(name, loc)?;
    }
    Ok(())
}

/// Renders the tree's named points as sidecar lines. Points on unlabelled
/// nodes or below unlabelled edges cannot be named and are skipped.
pub fn to_sidecar(tree: &Tree) -> String {
    let mut out = String::new();
    for (name, loc) in tree.marked_points() {
        let line = match *loc {
            Location::Node(id) => tree.nodes()[id].label.as_ref().map(|l| format!("{name}@{l}")),
            Location::Edge { child, offset } => tree.nodes()[child]
                .label
                .as_ref()
                .map(|l| format!("{name}@{l}:{offset}")),
        };
        if let Some(line) = line {
            out.push_str(&line);
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lengths_and_distances() {
        let t = parse_newick("((A:0.5,C:0.3):0.5,B:1.0);").unwrap();
        assert_eq!(t.leaf_labels(), vec!["A", "B", "C"]);
        assert!((t.dist("A", "C").unwrap() - 0.8).abs() < 1e-15);
        assert!((t.dist("A", "B").unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn missing_lengths_follow_option() {
        let err = parse_newick("((A,C),B);").unwrap_err();
        assert!(matches!(err, NewickError::MissingLength { .. }));
        let t = parse_newick_with(
            "((A,C),B);",
            NewickOptions {
                allow_missing_lengths: true,
            },
        )
        .unwrap();
        assert_eq!(t.dist("A", "B").unwrap(), 3.0);
    }

    #[test]
    fn errors_carry_offsets() {
        let err = parse_newick("((A:1,C:1):1,B:1;").unwrap_err();
        assert_eq!(err.offset(), Some(16));
        let err = parse_newick("(A:1,B:-2);").unwrap_err();
        assert!(matches!(err, NewickError::NegativeLength { offset: 7, .. }));
        let err = parse_newick("(A:1,A:2);").unwrap_err();
        assert!(matches!(err, NewickError::DuplicateLabel { offset: 5, .. }));
        let err = parse_newick("(A:1,:2);").unwrap_err();
        assert!(matches!(err, NewickError::EmptyLeafLabel { offset: 5 }));
        let err = parse_newick("(A:1,B:x);").unwrap_err();
        assert!(matches!(err, NewickError::Syntax { offset: 7, .. }));
    }

    #[test]
    fn quoting_and_comments() {
        let t = parse_newick("('C''s':1[note],B_x:2)root:0.0;").unwrap();
        assert_eq!(t.leaf_labels(), vec!["B x", "C's"]);
        let again = parse_newick(&to_newick(&t)).unwrap();
        assert_eq!(again.leaf_labels(), t.leaf_labels());
        assert_eq!(to_newick(&again), to_newick(&t));
    }

    #[test]
    fn unary_nodes_round_trip() {
        let src = "(((A:0.2,C:0.3)Cp:0.1,(B:0.3)Bp:0.1):0.6)root;";
        let t = parse_newick(src).unwrap();
        assert_eq!(to_newick(&t), src);
    }

    #[test]
    fn sidecar_points() {
        let mut t = parse_newick("((A:0.5,C:0.3)X:0.5,B:1.0)R;").unwrap();
        let specs = parse_sidecar("# points\nP@A:0.25\nQ@X\n").unwrap();
        apply_sidecar(&mut t, &specs).unwrap();
        assert!((t.dist("P", "C").unwrap() - 0.55).abs() < 1e-15);
        assert_eq!(t.dist("Q", "X").unwrap(), 0.0);
        assert_eq!(parse_sidecar(&to_sidecar(&t)).unwrap(), specs);
        assert!(parse_sidecar("bad line").is_err());
        let specs = parse_sidecar("Z@A:0.9").unwrap();
        assert!(apply_sidecar(&mut t, &specs).is_err());
    }
}

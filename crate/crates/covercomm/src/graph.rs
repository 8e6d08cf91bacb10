//! Finite Serre graphs and their combinatorial morphisms.
//!
//! A graph is a set of vertices together with a set of darts (half-edges)
//! paired by a fixed-point-free involution; a geometric edge is a dart pair.
//! Loops and parallel edges are first-class. Identifiers are opaque strings;
//! internally everything is dense indices, and all iteration orders follow
//! the lexicographic order of the external identifiers, so every search
//! built on top is deterministic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::word::Letter;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dart {
    pub id: String,
    pub origin: usize,
    pub inv: usize,
    pub label: Option<Letter>,
}

#[derive(Clone, Debug)]
pub struct Graph {
    name: String,
    vertices: Vec<String>,
    darts: Vec<Dart>,
    out: Vec<Vec<usize>>,
}

/// Equality is structural (names of the graphs themselves are ignored).
impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.darts == other.darts
    }
}
impl Eq for Graph {}

#[derive(Clone, Debug)]
struct EdgeSpec {
    id: String,
    src: String,
    dst: String,
    label: Option<Letter>,
}

/// Collects vertices and geometric edges, then validates into a [`Graph`].
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    name: String,
    vertices: Vec<String>,
    edges: Vec<EdgeSpec>,
}

impl GraphBuilder {
    pub fn new(name: impl Into<String>) -> GraphBuilder {
        GraphBuilder {
            name: name.into(),
            vertices: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn vertex(&mut self, id: impl Into<String>) -> &mut Self {
        self.vertices.push(id.into());
        self
    }

    pub fn edge(
        &mut self,
        id: impl Into<String>,
        src: impl Into<String>,
        dst: impl Into<String>,
    ) -> &mut Self {
        self.edges.push(EdgeSpec {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            label: None,
        });
        self
    }

    pub fn labeled_edge(
        &mut self,
        id: impl Into<String>,
        src: impl Into<String>,
        dst: impl Into<String>,
        label: Letter,
    ) -> &mut Self {
        self.edges.push(EdgeSpec {
            id: id.into(),
            src: src.into(),
            dst: dst.into(),
            label: Some(label),
        });
        self
    }

    pub fn build(&self) -> Result<Graph> {
        let mut vertices = self.vertices.clone();
        vertices.sort();
        for w in vertices.windows(2) {
            if w[0] == w[1] {
                return Err(Error::Graph(format!("duplicate vertex identifier {:?}", w[0])));
            }
        }
        let vertex_index: BTreeMap<&str, usize> = vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (v.as_str(), i))
            .collect();

        let mut seen_edges: BTreeSet<&str> = BTreeSet::new();
        let mut darts: Vec<Dart> = Vec::with_capacity(2 * self.edges.len());
        for e in &self.edges {
            if e.id.ends_with('\'') {
                return Err(Error::Graph(format!(
                    "edge identifier {:?} may not end with a prime (reserved for reversed darts)",
                    e.id
                )));
            }
            if !seen_edges.insert(&e.id) {
                return Err(Error::Graph(format!("duplicate edge identifier {:?}", e.id)));
            }
            let src = *vertex_index
                .get(e.src.as_str())
                .ok_or_else(|| Error::Graph(format!("edge {:?}: unknown endpoint {:?}", e.id, e.src)))?;
            let dst = *vertex_index
                .get(e.dst.as_str())
                .ok_or_else(|| Error::Graph(format!("edge {:?}: unknown endpoint {:?}", e.id, e.dst)))?;
            if let Some(l) = e.label {
                if l.inv {
                    return Err(Error::Graph(format!(
                        "edge {:?}: labels must be lowercase letters",
                        e.id
                    )));
                }
            }
            darts.push(Dart {
                id: e.id.clone(),
                origin: src,
                inv: usize::MAX,
                label: e.label,
            });
            darts.push(Dart {
                id: format!("{}'", e.id),
                origin: dst,
                inv: usize::MAX,
                label: e.label.map(|l| l.inverse()),
            });
        }

        // Sort darts by identifier, then rewire the involution.
        let mut order: Vec<usize> = (0..darts.len()).collect();
        order.sort_by(|&a, &b| darts[a].id.cmp(&darts[b].id));
        let mut position = vec![0usize; darts.len()];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let mut sorted: Vec<Dart> = order.iter().map(|&o| darts[o].clone()).collect();
        for (new, &old) in order.iter().enumerate() {
            let partner_old = old ^ 1;
            sorted[new].inv = position[partner_old];
        }

        Graph::from_parts(self.name.clone(), vertices, sorted)
    }
}

impl Graph {
    pub(crate) fn from_parts(name: String, vertices: Vec<String>, darts: Vec<Dart>) -> Result<Graph> {
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]), "vertex ids must be sorted");
        debug_assert!(darts.windows(2).all(|w| w[0].id < w[1].id), "dart ids must be sorted");
        let mut out = vec![Vec::new(); vertices.len()];
        for (i, d) in darts.iter().enumerate() {
            if d.origin >= vertices.len() {
                return Err(Error::Graph(format!("dart {:?} has no origin", d.id)));
            }
            if d.inv >= darts.len() || darts[d.inv].inv != i || d.inv == i {
                return Err(Error::Graph(format!(
                    "dart {:?}: involution is not a fixed-point-free pairing",
                    d.id
                )));
            }
            if let (Some(a), Some(b)) = (d.label, darts[d.inv].label) {
                if a.inverse() != b {
                    return Err(Error::Graph(format!(
                        "dart {:?}: label of the involuted dart is not the inverse letter",
                        d.id
                    )));
                }
            }
            out[d.origin].push(i);
        }
        Ok(Graph {
            name,
            vertices,
            darts,
            out,
        })
    }

    /// The rose with one vertex and `rank` labeled loops `a, b, c, ...`.
    pub fn rose(rank: usize) -> Graph {
        let mut b = GraphBuilder::new(format!("rose{rank}"));
        b.vertex("0");
        for g in 0..rank {
            let l = Letter::new(g as u8, false);
            b.labeled_edge(l.to_char().to_string(), "0", "0", l);
        }
        b.build().expect("rose is always valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn dart_count(&self) -> usize {
        self.darts.len()
    }

    pub fn edge_count(&self) -> usize {
        self.darts.len() / 2
    }

    pub fn vertex_id(&self, v: usize) -> &str {
        &self.vertices[v]
    }

    pub fn vertex_ids(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_index(&self, id: &str) -> Option<usize> {
        self.vertices.binary_search_by(|x| x.as_str().cmp(id)).ok()
    }

    pub fn dart(&self, d: usize) -> &Dart {
        &self.darts[d]
    }

    pub fn darts(&self) -> &[Dart] {
        &self.darts
    }

    pub fn dart_index(&self, id: &str) -> Option<usize> {
        self.darts.binary_search_by(|x| x.id.as_str().cmp(id)).ok()
    }

    pub fn involution(&self, d: usize) -> usize {
        self.darts[d].inv
    }

    pub fn origin(&self, d: usize) -> usize {
        self.darts[d].origin
    }

    pub fn terminus(&self, d: usize) -> usize {
        self.darts[self.darts[d].inv].origin
    }

    pub fn label(&self, d: usize) -> Option<Letter> {
        self.darts[d].label
    }

    pub fn degree(&self, v: usize) -> usize {
        self.out[v].len()
    }

    /// Dart indices with origin `v`, in dart-id order.
    pub fn darts_at(&self, v: usize) -> &[usize] {
        &self.out[v]
    }

    pub fn is_labeled(&self) -> bool {
        !self.darts.is_empty() && self.darts.iter().all(|d| d.label.is_some())
    }

    /// Geometric edges as `(dart, inverse dart)` with `dart < inverse`.
    pub fn geometric_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.darts
            .iter()
            .enumerate()
            .filter(|(i, d)| *i < d.inv)
            .map(|(i, d)| (i, d.inv))
    }

    /// Identifier of the geometric edge containing dart `d`.
    pub fn edge_id(&self, d: usize) -> &str {
        let e = d.min(self.darts[d].inv);
        &self.darts[e].id
    }

    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.vertices.len()];
        let mut comps = Vec::new();
        for start in 0..self.vertices.len() {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &d in &self.out[v] {
                    let t = self.terminus(d);
                    if !seen[t] {
                        seen[t] = true;
                        comp.push(t);
                        queue.push_back(t);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// `|V| - |E|`.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64
    }

    /// `1 - chi` for connected graphs: the rank of the free fundamental group.
    pub fn free_rank(&self) -> Result<i64> {
        if !self.is_connected() {
            return Err(Error::Disconnected(format!("graph {:?}", self.name)));
        }
        Ok(1 - self.euler_characteristic())
    }

    /// `(2|E| - 2f) / (|V| - f)` as an exact rational.
    pub fn average_degree_after_folds(&self, folds: usize) -> Result<BigRational> {
        if folds >= self.vertices.len() {
            return Err(Error::InvalidArgument(format!(
                "fold count {} out of range for a graph with {} vertices",
                folds,
                self.vertices.len()
            )));
        }
        let num = BigInt::from(2 * self.edge_count() as i64 - 2 * folds as i64);
        let den = BigInt::from(self.vertices.len() as i64 - folds as i64);
        Ok(BigRational::new(num, den))
    }

    /// Proper 2-coloring of the vertices, if one exists.
    pub fn bipartition(&self) -> Option<Vec<u8>> {
        let mut color = vec![u8::MAX; self.vertices.len()];
        for start in 0..self.vertices.len() {
            if color[start] != u8::MAX {
                continue;
            }
            color[start] = 0;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &d in &self.out[v] {
                    let t = self.terminus(d);
                    if color[t] == u8::MAX {
                        color[t] = 1 - color[v];
                        queue.push_back(t);
                    } else if color[t] == color[v] {
                        return None;
                    }
                }
            }
        }
        Some(color)
    }

    /// The subgraph induced by the given geometric edges (canonical darts),
    /// keeping exactly the vertices incident to one of them.
    pub fn edge_subgraph(&self, name: &str, edges: &BTreeSet<usize>) -> Result<Graph> {
        let mut b = GraphBuilder::new(name);
        let mut keep: BTreeSet<usize> = BTreeSet::new();
        for &d in edges {
            keep.insert(self.origin(d));
            keep.insert(self.terminus(d));
        }
        for &v in &keep {
            b.vertex(self.vertices[v].clone());
        }
        for &d in edges {
            let spec = &self.darts[d];
            debug_assert!(d < spec.inv, "edge_subgraph expects canonical darts");
            b.edges.push(EdgeSpec {
                id: spec.id.clone(),
                src: self.vertices[self.origin(d)].clone(),
                dst: self.vertices[self.terminus(d)].clone(),
                label: spec.label,
            });
        }
        b.build()
    }

    /// The subgraph spanned by a set of vertices (all edges inside it).
    pub fn vertex_subgraph(&self, name: &str, verts: &BTreeSet<usize>) -> Result<Graph> {
        let mut b = GraphBuilder::new(name);
        for &v in verts {
            b.vertex(self.vertices[v].clone());
        }
        for (d, inv) in self.geometric_edges() {
            if verts.contains(&self.origin(d)) && verts.contains(&self.origin(inv)) {
                b.edges.push(EdgeSpec {
                    id: self.darts[d].id.clone(),
                    src: self.vertices[self.origin(d)].clone(),
                    dst: self.vertices[self.origin(inv)].clone(),
                    label: self.darts[d].label,
                });
            }
        }
        b.build()
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "graph {:?}: {} vertices, {} edges",
            self.name,
            self.vertex_count(),
            self.edge_count()
        )
    }
}

/// A combinatorial map of Serre graphs.
#[derive(Clone, Debug)]
pub struct GraphMorphism {
    pub source: Graph,
    pub target: Graph,
    pub vmap: Vec<usize>,
    pub dmap: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MorphismViolation {
    /// `origin(dmap(d)) != vmap(origin(d))`
    OriginMismatch { dart: String },
    /// `dmap(involution(d)) != involution(dmap(d))`
    InvolutionMismatch { dart: String },
    /// labels present on both sides but not preserved
    LabelMismatch { dart: String },
}

impl fmt::Display for MorphismViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MorphismViolation::OriginMismatch { dart } => {
                write!(f, "dart {dart:?}: image origin disagrees with the vertex map")
            }
            MorphismViolation::InvolutionMismatch { dart } => {
                write!(f, "dart {dart:?}: image does not commute with the involution")
            }
            MorphismViolation::LabelMismatch { dart } => {
                write!(f, "dart {dart:?}: label not preserved")
            }
        }
    }
}

impl GraphMorphism {
    pub fn new(
        source: Graph,
        target: Graph,
        vmap_ids: &BTreeMap<String, String>,
        dmap_ids: &BTreeMap<String, String>,
    ) -> Result<GraphMorphism> {
        let mut vmap = vec![usize::MAX; source.vertex_count()];
        for (u, w) in vmap_ids {
            let ui = source
                .vertex_index(u)
                .ok_or_else(|| Error::Morphism(format!("vmap: unknown source vertex {u:?}")))?;
            let wi = target
                .vertex_index(w)
                .ok_or_else(|| Error::Morphism(format!("vmap: unknown target vertex {w:?}")))?;
            vmap[ui] = wi;
        }
        if let Some(v) = vmap.iter().position(|&x| x == usize::MAX) {
            return Err(Error::Morphism(format!(
                "vertex {:?} has no image",
                source.vertex_id(v)
            )));
        }
        let mut dmap = vec![usize::MAX; source.dart_count()];
        for (d, e) in dmap_ids {
            let di = source
                .dart_index(d)
                .ok_or_else(|| Error::Morphism(format!("dmap: unknown source dart {d:?}")))?;
            let ei = target
                .dart_index(e)
                .ok_or_else(|| Error::Morphism(format!("dmap: unknown target dart {e:?}")))?;
            dmap[di] = ei;
            // the involuted dart follows automatically unless explicitly given
            if dmap[source.involution(di)] == usize::MAX {
                dmap[source.involution(di)] = target.involution(ei);
            }
        }
        if let Some(d) = dmap.iter().position(|&x| x == usize::MAX) {
            return Err(Error::Morphism(format!(
                "dart {:?} has no image",
                source.dart(d).id
            )));
        }
        Ok(GraphMorphism {
            source,
            target,
            vmap,
            dmap,
        })
    }

    /// Unchecked construction from index maps; run [`validate`] afterwards
    /// if the maps are not known to be a morphism.
    ///
    /// [`validate`]: GraphMorphism::validate
    pub fn from_indices(
        source: Graph,
        target: Graph,
        vmap: Vec<usize>,
        dmap: Vec<usize>,
    ) -> GraphMorphism {
        GraphMorphism {
            source,
            target,
            vmap,
            dmap,
        }
    }

    pub fn identity(g: &Graph) -> GraphMorphism {
        GraphMorphism {
            source: g.clone(),
            target: g.clone(),
            vmap: (0..g.vertex_count()).collect(),
            dmap: (0..g.dart_count()).collect(),
        }
    }

    /// Every violation of the morphism invariants, in dart order.
    pub fn validate(&self) -> Vec<MorphismViolation> {
        let mut out = Vec::new();
        for (d, dart) in self.source.darts().iter().enumerate() {
            let img = self.dmap[d];
            if self.target.origin(img) != self.vmap[dart.origin] {
                out.push(MorphismViolation::OriginMismatch {
                    dart: dart.id.clone(),
                });
            }
            if self.dmap[dart.inv] != self.target.involution(img) {
                out.push(MorphismViolation::InvolutionMismatch {
                    dart: dart.id.clone(),
                });
            }
            if let (Some(a), Some(b)) = (dart.label, self.target.label(img)) {
                if a != b {
                    out.push(MorphismViolation::LabelMismatch {
                        dart: dart.id.clone(),
                    });
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }
}

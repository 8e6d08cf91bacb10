//! Finitely generated subgroups of free groups as folded based labeled
//! graphs: membership, index, conjugates, intersections, normality, normal
//! cores, free bases, and coset actions.
//!
//! The canonical form of a subgroup graph is its breadth-first relabeling
//! from the basepoint with darts explored in signed-letter order
//! `a < A < b < B < ...`; equality of subgroups is equality of canonical
//! forms, making comparisons O(1) after construction.

use std::collections::VecDeque;

use crate::covering::{fiber_product, fold_labeled};
use crate::error::{Error, Result};
use crate::graph::{Dart, Graph, GraphBuilder, GraphMorphism};
use crate::permgroup::Permutation;
use crate::word::{Letter, Word, MAX_RANK};

/// Folded core based labeled graph of a subgroup of `F_rank`.
#[derive(Clone, Debug)]
pub struct SubgroupGraph {
    graph: Graph,
    basepoint: usize,
    ambient_rank: usize,
}

/// Canonical form: `(rank, transitions)` where entry `v * 2rank + l` is the
/// endpoint of the `l`-labeled dart at canonical vertex `v`, or -1.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct SubgroupKey {
    pub ambient_rank: usize,
    pub transitions: Vec<i64>,
}

impl PartialEq for SubgroupGraph {
    fn eq(&self, other: &Self) -> bool {
        self.canonical_key() == other.canonical_key()
    }
}
impl Eq for SubgroupGraph {}

impl SubgroupGraph {
    /// Wedge of loop-paths at the basepoint, folded to completion and
    /// core-trimmed.
    pub fn from_generators(ambient_rank: usize, generators: &[Word]) -> Result<SubgroupGraph> {
        if ambient_rank > MAX_RANK {
            return Err(Error::RankMismatch(format!(
                "ambient rank {ambient_rank} exceeds the alphabet"
            )));
        }
        for w in generators {
            if let Some(g) = w.max_gen() {
                if g as usize >= ambient_rank {
                    return Err(Error::Word(format!(
                        "generator {w} uses letters outside the rank-{ambient_rank} alphabet"
                    )));
                }
            }
        }
        let (wedge, base_id) = build_wedge(generators);
        let base = wedge.vertex_index(&base_id).unwrap();
        let (folded, fbase, _) = fold_labeled(&wedge, ambient_rank, base)?;
        let (graph, basepoint) = trim_core(&folded, fbase)?;
        Ok(SubgroupGraph {
            graph,
            basepoint,
            ambient_rank,
        })
    }

    /// The whole group `F_rank` (the rose).
    pub fn whole_group(ambient_rank: usize) -> SubgroupGraph {
        SubgroupGraph {
            graph: Graph::rose(ambient_rank),
            basepoint: 0,
            ambient_rank,
        }
    }

    /// Builds the subgroup graph from a transitive permutation action: the
    /// stabilizer of point 0 under `perms[g]` (the image of generator `g`).
    /// Only the orbit of point 0 is kept.
    pub fn from_coset_action(ambient_rank: usize, perms: &[Permutation]) -> Result<SubgroupGraph> {
        if perms.len() != ambient_rank {
            return Err(Error::RankMismatch(format!(
                "expected {ambient_rank} permutations, got {}",
                perms.len()
            )));
        }
        let degree = perms.first().map(|p| p.degree()).unwrap_or(1);
        for p in perms {
            if p.degree() != degree {
                return Err(Error::RankMismatch(
                    "permutations act on different point counts".into(),
                ));
            }
        }
        // orbit of 0
        let mut orbit_index = vec![usize::MAX; degree];
        let mut orbit = vec![0usize];
        orbit_index[0] = 0;
        let mut head = 0;
        while head < orbit.len() {
            let p = orbit[head];
            head += 1;
            for perm in perms {
                for q in [perm.apply(p), perm.preimage(p)] {
                    if orbit_index[q] == usize::MAX {
                        orbit_index[q] = orbit.len();
                        orbit.push(q);
                    }
                }
            }
        }
        let n = orbit.len();
        let width = (n * ambient_rank).max(2).to_string().len();
        let vw = n.max(2).to_string().len();
        let mut b = GraphBuilder::new("coset-graph");
        for i in 0..n {
            b.vertex(format!("c{i:0vw$}"));
        }
        let mut k = 0;
        for (i, &p) in orbit.iter().enumerate() {
            for (g, perm) in perms.iter().enumerate() {
                let j = orbit_index[perm.apply(p)];
                b.labeled_edge(
                    format!("e{k:0width$}"),
                    format!("c{i:0vw$}"),
                    format!("c{j:0vw$}"),
                    Letter::new(g as u8, false),
                );
                k += 1;
            }
        }
        let graph = b.build()?;
        let basepoint = graph.vertex_index(&format!("c{:0vw$}", 0)).unwrap();
        Ok(SubgroupGraph {
            graph,
            basepoint,
            ambient_rank,
        })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn ambient_rank(&self) -> usize {
        self.ambient_rank
    }

    /// Dart with label `l` leaving `v`, unique by foldedness.
    fn step(&self, v: usize, l: Letter) -> Option<usize> {
        self.graph
            .darts_at(v)
            .iter()
            .copied()
            .find(|&d| self.graph.label(d) == Some(l))
    }

    /// Traces a reduced word from the basepoint; returns the final vertex.
    pub fn trace(&self, w: &Word) -> Option<usize> {
        self.trace_from(self.basepoint, w)
    }

    /// Traces a reduced word from an arbitrary vertex.
    pub fn trace_from(&self, start: usize, w: &Word) -> Option<usize> {
        let mut v = start;
        for &l in w.letters() {
            v = self.graph.terminus(self.step(v, l)?);
        }
        Some(v)
    }

    /// The permutation a word induces on the vertices in canonical BFS
    /// order (basepoint = point 0); requires a complete graph.
    pub fn action_of_word(&self, w: &Word) -> Result<Permutation> {
        if !self.is_complete() {
            return Err(Error::InfiniteIndex(
                "word actions require a finite-index subgroup".into(),
            ));
        }
        let (order, _) = self.bfs_tree();
        let mut position = vec![usize::MAX; self.graph.vertex_count()];
        for (i, &v) in order.iter().enumerate() {
            position[v] = i;
        }
        let map: Vec<usize> = order
            .iter()
            .map(|&v| {
                position[self
                    .trace_from(v, w)
                    .expect("complete graphs trace every word")]
            })
            .collect();
        Permutation::new(map)
    }

    /// True iff the reduced word traces a basepoint loop.
    pub fn contains(&self, w: &Word) -> bool {
        self.trace(w) == Some(self.basepoint)
    }

    /// Complete iff every vertex has one outgoing dart per signed letter.
    pub fn is_complete(&self) -> bool {
        (0..self.graph.vertex_count()).all(|v| self.graph.degree(v) == 2 * self.ambient_rank)
    }

    /// `Some(|V|)` when complete, `None` for infinite index.
    pub fn index(&self) -> Option<usize> {
        self.is_complete().then(|| self.graph.vertex_count())
    }

    /// Rank of the subgroup as a free group.
    pub fn rank(&self) -> usize {
        (1 - self.graph.euler_characteristic()).max(0) as usize
    }

    /// Graph of `w S w^-1`: re-base along `w`, fold, trim.
    pub fn conjugate(&self, w: &Word) -> Result<SubgroupGraph> {
        if w.is_empty() {
            return Ok(self.clone());
        }
        // copy the graph and attach a path spelling w from a fresh basepoint
        // into the old one
        let mut b = GraphBuilder::new("conj");
        for v in self.graph.vertex_ids() {
            b.vertex(format!("s.{v}"));
        }
        for (d, _) in self.graph.geometric_edges() {
            b.labeled_edge(
                format!("s.{}", self.graph.dart(d).id),
                format!("s.{}", self.graph.vertex_id(self.graph.origin(d))),
                format!("s.{}", self.graph.vertex_id(self.graph.terminus(d))),
                self.graph.label(d).ok_or_else(|| {
                    Error::Graph("subgroup graphs must be labeled".into())
                })?,
            );
        }
        let base_old = format!("s.{}", self.graph.vertex_id(self.basepoint));
        let mut prev = "p.base".to_string();
        b.vertex(prev.clone());
        for (i, &l) in w.letters().iter().enumerate() {
            let next = if i + 1 == w.len() {
                base_old.clone()
            } else {
                let v = format!("p.{i}");
                b.vertex(v.clone());
                v
            };
            // a positive letter is an edge prev -> next, an inverse letter
            // is the reversed geometric edge
            if l.inv {
                b.labeled_edge(format!("p.e{i}"), next.clone(), prev.clone(), l.inverse());
            } else {
                b.labeled_edge(format!("p.e{i}"), prev.clone(), next.clone(), l);
            }
            prev = next;
        }
        let wedge = b.build()?;
        let base = wedge.vertex_index("p.base").unwrap();
        let (folded, fbase, _) = fold_labeled(&wedge, self.ambient_rank, base)?;
        let (graph, basepoint) = trim_core(&folded, fbase)?;
        Ok(SubgroupGraph {
            graph,
            basepoint,
            ambient_rank: self.ambient_rank,
        })
    }

    /// Based component of the fiber product over the rose, core-trimmed.
    pub fn intersect(&self, other: &SubgroupGraph) -> Result<SubgroupGraph> {
        if self.ambient_rank != other.ambient_rank {
            return Err(Error::RankMismatch(format!(
                "cannot intersect subgroups of F_{} and F_{}",
                self.ambient_rank, other.ambient_rank
            )));
        }
        let m1 = self.rose_morphism()?;
        let m2 = other.rose_morphism()?;
        let (prod, pr1, pr2) = fiber_product(&m1, &m2)?;
        // locate the pair (basepoint, basepoint)
        let base = (0..prod.vertex_count())
            .find(|&v| pr1.vmap[v] == self.basepoint && pr2.vmap[v] == other.basepoint)
            .expect("basepoint pair always exists in the fiber product");
        let comp = prod
            .components()
            .into_iter()
            .find(|c| c.contains(&base))
            .unwrap();
        let comp_set: std::collections::BTreeSet<usize> = comp.into_iter().collect();
        let sub = prod.vertex_subgraph("intersection", &comp_set)?;
        let sub_base = sub
            .vertex_index(prod.vertex_id(base))
            .expect("basepoint survives to the component");
        let (graph, basepoint) = trim_core(&sub, sub_base)?;
        Ok(SubgroupGraph {
            graph,
            basepoint,
            ambient_rank: self.ambient_rank,
        })
    }

    /// The tautological morphism onto the rose.
    fn rose_morphism(&self) -> Result<GraphMorphism> {
        let rose = Graph::rose(self.ambient_rank);
        let vmap = vec![0usize; self.graph.vertex_count()];
        let mut dmap = Vec::with_capacity(self.graph.dart_count());
        for d in 0..self.graph.dart_count() {
            let l = self
                .graph
                .label(d)
                .ok_or_else(|| Error::Graph("subgroup graphs must be labeled".into()))?;
            let id = if l.inv {
                format!("{}'", l.inverse().to_char())
            } else {
                l.to_char().to_string()
            };
            dmap.push(rose.dart_index(&id).unwrap());
        }
        Ok(GraphMorphism::from_indices(
            self.graph.clone(),
            rose,
            vmap,
            dmap,
        ))
    }

    /// True iff `x S x^-1 = S` for every ambient generator `x`.
    pub fn is_normal(&self) -> Result<bool> {
        let key = self.canonical_key();
        for g in 0..self.ambient_rank {
            let conj = self.conjugate(&Word::generator(g as u8))?;
            if conj.canonical_key() != key {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Intersection of the conjugates `r^-1 S r` over the canonical Schreier
    /// representatives `r`; the largest normal subgroup contained in `S`.
    pub fn normal_core(&self) -> Result<SubgroupGraph> {
        if self.index().is_none() {
            return Err(Error::InfiniteIndex(
                "normal core requires a finite-index subgroup".into(),
            ));
        }
        let reps = self.schreier_representatives();
        let mut core = self.clone();
        for r in reps.iter().skip(1) {
            core = core.intersect(&self.conjugate(&r.inverse())?)?;
        }
        Ok(core)
    }

    /// BFS-tree words from the basepoint to each vertex, in canonical vertex
    /// order (basepoint first).
    pub fn schreier_representatives(&self) -> Vec<Word> {
        let (order, _) = self.bfs_tree();
        let by_vertex = self.schreier_representatives_by_vertex();
        order.into_iter().map(|v| by_vertex[v].clone()).collect()
    }

    /// Schreier representatives indexed by raw vertex index, so that
    /// `reps[trace(w)]` is the representative of the coset of `w`.
    pub fn schreier_representatives_by_vertex(&self) -> Vec<Word> {
        let (order, parent) = self.bfs_tree();
        let mut words: Vec<Word> = vec![Word::empty(); self.graph.vertex_count()];
        for &v in &order {
            if let Some((pv, d)) = parent[v] {
                words[v] = words[pv].concat(&Word::letter(self.graph.label(d).unwrap()));
            }
        }
        words
    }

    /// BFS from the basepoint in signed-letter order; returns discovery
    /// order and the tree (parent vertex, dart used).
    fn bfs_tree(&self) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
        let n = self.graph.vertex_count();
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
        let mut seen = vec![false; n];
        let mut order = Vec::with_capacity(n);
        seen[self.basepoint] = true;
        order.push(self.basepoint);
        let mut queue = VecDeque::from([self.basepoint]);
        while let Some(v) = queue.pop_front() {
            let mut darts: Vec<usize> = self.graph.darts_at(v).to_vec();
            darts.sort_by_key(|&d| self.graph.label(d).unwrap());
            for d in darts {
                let t = self.graph.terminus(d);
                if !seen[t] {
                    seen[t] = true;
                    parent[t] = Some((v, d));
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
        (order, parent)
    }

    /// Free basis from the canonical spanning tree; one word per non-tree
    /// geometric edge, in canonical order.
    pub fn basis(&self) -> Vec<Word> {
        let (order, parent) = self.bfs_tree();
        let n = self.graph.vertex_count();
        let mut path: Vec<Word> = vec![Word::empty(); n];
        for &v in &order {
            if let Some((pv, d)) = parent[v] {
                path[v] = path[pv].concat(&Word::letter(self.graph.label(d).unwrap()));
            }
        }
        let mut tree_darts = vec![false; self.graph.dart_count()];
        for p in parent.iter().flatten() {
            tree_darts[p.1] = true;
            tree_darts[self.graph.involution(p.1)] = true;
        }
        let mut basis = Vec::new();
        for (d, _) in self.graph.geometric_edges() {
            if tree_darts[d] {
                continue;
            }
            // use the positively labeled dart of the pair
            let dart = if self.graph.label(d).map(|l| !l.inv).unwrap_or(true) {
                d
            } else {
                self.graph.involution(d)
            };
            let u = self.graph.origin(dart);
            let v = self.graph.terminus(dart);
            let w = path[u]
                .concat(&Word::letter(self.graph.label(dart).unwrap()))
                .concat(&path[v].inverse());
            basis.push(w);
        }
        basis
    }

    /// Right-coset action of the ambient generators on the vertices in
    /// canonical BFS order (basepoint = point 0). Requires finite index.
    pub fn coset_action(&self) -> Result<Vec<Permutation>> {
        if !self.is_complete() {
            return Err(Error::InfiniteIndex(
                "coset action requires a finite-index subgroup".into(),
            ));
        }
        let (order, _) = self.bfs_tree();
        if order.len() != self.graph.vertex_count() {
            return Err(Error::Disconnected("subgroup graph".into()));
        }
        let mut position = vec![usize::MAX; self.graph.vertex_count()];
        for (i, &v) in order.iter().enumerate() {
            position[v] = i;
        }
        let mut perms = Vec::with_capacity(self.ambient_rank);
        for g in 0..self.ambient_rank {
            let l = Letter::new(g as u8, false);
            let map: Vec<usize> = order
                .iter()
                .map(|&v| position[self.graph.terminus(self.step(v, l).unwrap())])
                .collect();
            perms.push(Permutation::new(map)?);
        }
        Ok(perms)
    }

    /// Canonical form under basepoint-preserving label isomorphism.
    pub fn canonical_key(&self) -> SubgroupKey {
        let (order, _) = self.bfs_tree();
        let mut position = vec![usize::MAX; self.graph.vertex_count()];
        for (i, &v) in order.iter().enumerate() {
            position[v] = i;
        }
        let letters = 2 * self.ambient_rank;
        let mut transitions = vec![-1i64; order.len() * letters];
        for (i, &v) in order.iter().enumerate() {
            for si in 0..letters {
                let l = Letter::from_signed_index(si);
                if let Some(d) = self.step(v, l) {
                    transitions[i * letters + si] = position[self.graph.terminus(d)] as i64;
                }
            }
        }
        SubgroupKey {
            ambient_rank: self.ambient_rank,
            transitions,
        }
    }
}

/// Wedge of loop-paths spelling the generators at a common basepoint.
fn build_wedge(generators: &[Word]) -> (Graph, String) {
    let mut b = GraphBuilder::new("wedge");
    let base = "w".to_string();
    b.vertex(base.clone());
    for (gi, w) in generators.iter().enumerate() {
        if w.is_empty() {
            continue;
        }
        let mut prev = base.clone();
        for (i, &l) in w.letters().iter().enumerate() {
            let next = if i + 1 == w.len() {
                base.clone()
            } else {
                let v = format!("w{gi}.{i}");
                b.vertex(v.clone());
                v
            };
            if l.inv {
                b.labeled_edge(format!("w{gi}.e{i}"), next.clone(), prev.clone(), l.inverse());
            } else {
                b.labeled_edge(format!("w{gi}.e{i}"), prev.clone(), next.clone(), l);
            }
            prev = next;
        }
    }
    (b.build().expect("wedges are structurally valid"), base)
}

/// Removes hanging trees: every vertex except the basepoint must keep
/// degree >= 2.
fn trim_core(g: &Graph, basepoint: usize) -> Result<(Graph, usize)> {
    let mut alive_v: Vec<bool> = vec![true; g.vertex_count()];
    let mut alive_d: Vec<bool> = vec![true; g.dart_count()];
    let mut degree: Vec<usize> = (0..g.vertex_count()).map(|v| g.degree(v)).collect();
    let mut queue: VecDeque<usize> = (0..g.vertex_count())
        .filter(|&v| v != basepoint && degree[v] <= 1)
        .collect();
    while let Some(v) = queue.pop_front() {
        if !alive_v[v] || v == basepoint || degree[v] > 1 {
            continue;
        }
        alive_v[v] = false;
        for &d in g.darts_at(v) {
            if !alive_d[d] {
                continue;
            }
            alive_d[d] = false;
            alive_d[g.involution(d)] = false;
            let t = g.terminus(d);
            if alive_v[t] {
                degree[t] -= 1;
                if t != basepoint && degree[t] <= 1 {
                    queue.push_back(t);
                }
            }
        }
    }

    let vertices: Vec<String> = (0..g.vertex_count())
        .filter(|&v| alive_v[v])
        .map(|v| g.vertex_id(v).to_string())
        .collect();
    let vindex: std::collections::BTreeMap<&str, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, v)| (v.as_str(), i))
        .collect();
    let kept: Vec<usize> = (0..g.dart_count()).filter(|&d| alive_d[d]).collect();
    let dpos: std::collections::BTreeMap<usize, usize> =
        kept.iter().enumerate().map(|(i, &d)| (d, i)).collect();
    let darts: Vec<Dart> = kept
        .iter()
        .map(|&d| Dart {
            id: g.dart(d).id.clone(),
            origin: vindex[g.vertex_id(g.origin(d))],
            inv: dpos[&g.involution(d)],
            label: g.label(d),
        })
        .collect();
    let trimmed = Graph::from_parts(g.name().to_string(), vertices, darts)?;
    let base = trimmed
        .vertex_index(g.vertex_id(basepoint))
        .expect("basepoint survives trimming");
    Ok((trimmed, base))
}

// ---------------------------------------------------------------------------
// embeddings with preimage computation
// ---------------------------------------------------------------------------

/// A monomorphism `F_m -> F_n` given by generator images, together with the
/// recorded folding sequence of the image's wedge, which lets us rewrite
/// elements of the image back into domain coordinates.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub images: Vec<Word>,
    pub domain_rank: usize,
    pub target_rank: usize,
    wedge: DecoratedGraph,
    steps: Vec<FoldStep>,
    folded: DecoratedGraph,
}

/// Adjacency-level graph with an H-letter decoration per dart: traversing
/// the dart emits that letter (or nothing).
#[derive(Clone, Debug)]
struct DecoratedGraph {
    origin: Vec<usize>,
    inv: Vec<usize>,
    label: Vec<Letter>,
    emit: Vec<Option<Letter>>,
    out: Vec<Vec<usize>>,
    base: usize,
    nv: usize,
}

#[derive(Clone, Debug)]
struct FoldStep {
    /// merged dart pair in level-k indexing (p, q), same origin, same label
    pair: (usize, usize),
    /// identified termini (x, y) when distinct
    vertices: Option<(usize, usize)>,
    dart_map: Vec<usize>,
    vertex_map: Vec<usize>,
}

impl DecoratedGraph {
    fn wedge(images: &[Word]) -> DecoratedGraph {
        let mut origin = Vec::new();
        let mut inv = Vec::new();
        let mut label = Vec::new();
        let mut emit: Vec<Option<Letter>> = Vec::new();
        let mut nv = 1usize; // vertex 0 is the basepoint
        for (gi, w) in images.iter().enumerate() {
            if w.is_empty() {
                continue;
            }
            let mut prev = 0usize;
            for (i, &l) in w.letters().iter().enumerate() {
                let next = if i + 1 == w.len() {
                    0
                } else {
                    nv += 1;
                    nv - 1
                };
                let d = origin.len();
                origin.push(prev);
                inv.push(d + 1);
                label.push(l);
                // crossing the first dart of loop gi forward emits H-letter gi
                emit.push((i == 0).then_some(Letter::new(gi as u8, false)));
                origin.push(next);
                inv.push(d);
                label.push(l.inverse());
                emit.push((i == 0).then_some(Letter::new(gi as u8, true)));
                prev = next;
            }
        }
        let mut out = vec![Vec::new(); nv];
        for (d, &o) in origin.iter().enumerate() {
            out[o].push(d);
        }
        DecoratedGraph {
            origin,
            inv,
            label,
            emit,
            out,
            base: 0,
            nv,
        }
    }

    fn terminus(&self, d: usize) -> usize {
        self.origin[self.inv[d]]
    }

    /// First foldable pair in canonical order, if any.
    fn find_fold(&self) -> Option<(usize, usize)> {
        for v in 0..self.nv {
            for (i, &d1) in self.out[v].iter().enumerate() {
                for &d2 in &self.out[v][i + 1..] {
                    if self.label[d1] == self.label[d2] && self.inv[d1] != d2 {
                        return Some((d1, d2));
                    }
                }
            }
        }
        None
    }

    /// Performs one fold, producing the quotient graph and the step record.
    fn fold_once(&self, pair: (usize, usize)) -> (DecoratedGraph, FoldStep) {
        let (p, q) = pair;
        let (x, y) = (self.terminus(p), self.terminus(q));
        let merged_vertices = (x != y).then_some((x, y));

        let mut vertex_map = vec![usize::MAX; self.nv];
        let mut next_v = 0usize;
        for v in 0..self.nv {
            if v == y && x != y {
                continue;
            }
            vertex_map[v] = next_v;
            next_v += 1;
        }
        if x != y {
            vertex_map[y] = vertex_map[x];
        }

        let (pi, qi) = (self.inv[p], self.inv[q]);
        let mut dart_map = vec![usize::MAX; self.origin.len()];
        let mut next_d = 0usize;
        for d in 0..self.origin.len() {
            if d == q || d == qi {
                continue;
            }
            dart_map[d] = next_d;
            next_d += 1;
        }
        dart_map[q] = dart_map[p];
        dart_map[qi] = dart_map[pi];

        let mut origin = vec![usize::MAX; next_d];
        let mut inv = vec![usize::MAX; next_d];
        let mut label = vec![Letter::new(0, false); next_d];
        let mut emit: Vec<Option<Letter>> = vec![None; next_d];
        for d in 0..self.origin.len() {
            if d == q || d == qi {
                continue;
            }
            let nd = dart_map[d];
            origin[nd] = vertex_map[self.origin[d]];
            inv[nd] = dart_map[self.inv[d]];
            label[nd] = self.label[d];
            emit[nd] = self.emit[d];
        }
        let mut out = vec![Vec::new(); next_v];
        for (d, &o) in origin.iter().enumerate() {
            out[o].push(d);
        }
        let folded = DecoratedGraph {
            origin,
            inv,
            label,
            emit,
            out,
            base: vertex_map[self.base],
            nv: next_v,
        };
        (
            folded,
            FoldStep {
                pair,
                vertices: merged_vertices,
                dart_map,
                vertex_map,
            },
        )
    }

    /// Deterministic step along label `l` from `v` (folded graphs only).
    fn step(&self, v: usize, l: Letter) -> Option<usize> {
        self.out[v].iter().copied().find(|&d| self.label[d] == l)
    }
}

impl Embedding {
    pub fn new(domain_rank: usize, target_rank: usize, images: Vec<Word>) -> Result<Embedding> {
        if images.len() != domain_rank {
            return Err(Error::RankMismatch(format!(
                "embedding needs {domain_rank} images, got {}",
                images.len()
            )));
        }
        for w in &images {
            if let Some(g) = w.max_gen() {
                if g as usize >= target_rank {
                    return Err(Error::Word(format!(
                        "image {w} uses letters outside the rank-{target_rank} alphabet"
                    )));
                }
            }
        }
        let wedge = DecoratedGraph::wedge(&images);
        let mut steps = Vec::new();
        let mut current = wedge.clone();
        while let Some(pair) = current.find_fold() {
            let (next, step) = current.fold_once(pair);
            steps.push(step);
            current = next;
        }
        Ok(Embedding {
            images,
            domain_rank,
            target_rank,
            wedge,
            steps,
            folded: current,
        })
    }

    /// Applies the embedding to a domain word.
    pub fn apply(&self, w: &Word) -> Word {
        w.substitute(&self.images)
    }

    /// Rewrites an ambient word lying in the image back into domain
    /// coordinates; `None` if the word is not in the image subgroup.
    ///
    /// The reduced trace in the folded wedge is lifted backwards through the
    /// folding sequence, inserting the backtracking connectors a fold
    /// introduces, until it becomes a walk in the wedge, whose decorations
    /// spell the domain word.
    pub fn preimage(&self, ambient: &Word) -> Option<Word> {
        // trace in the folded graph
        let mut walk: Vec<usize> = Vec::with_capacity(ambient.len());
        let mut v = self.folded.base;
        for &l in ambient.letters() {
            let d = self.folded.step(v, l)?;
            walk.push(d);
            v = self.folded.terminus(d);
        }
        if v != self.folded.base {
            return None;
        }
        // lift through the folds in reverse; rebuild the intermediate levels
        let mut levels: Vec<DecoratedGraph> = Vec::with_capacity(self.steps.len());
        {
            let mut cur = self.wedge.clone();
            for step in &self.steps {
                let (next, _) = cur.fold_once(step.pair);
                levels.push(cur);
                cur = next;
            }
        }

        let mut bases: Vec<usize> = Vec::with_capacity(self.steps.len() + 1);
        let mut b = self.wedge.base;
        bases.push(b);
        for step in &self.steps {
            b = step.vertex_map[b];
            bases.push(b);
        }

        for (k, step) in self.steps.iter().enumerate().rev() {
            walk = lift_walk(&levels[k], step, &walk, bases[k]);
        }

        // read the decorations in the wedge
        let mut letters = Vec::new();
        for &d in &walk {
            if let Some(l) = self.wedge.emit[d] {
                letters.push(l);
            }
        }
        Some(Word::from_letters(letters))
    }
}

/// Lifts a based closed walk through one fold: choose dart preimages and
/// insert the connector `p^-1 q` (a backtrack in the image) wherever the
/// walk jumps between the two identified vertices.
fn lift_walk(g: &DecoratedGraph, step: &FoldStep, walk: &[usize], base: usize) -> Vec<usize> {
    let (p, q) = step.pair;
    let (pi, qi) = (g.inv[p], g.inv[q]);
    // a fixed preimage per next-level dart; any choice is valid because the
    // connectors repair every vertex jump
    let next_count = g.origin.len() - 2;
    let mut pre_of = vec![usize::MAX; next_count];
    for d in 0..g.origin.len() {
        let nd = step.dart_map[d];
        if pre_of[nd] == usize::MAX {
            pre_of[nd] = d;
        }
    }
    let pre = |d_next: usize| -> usize { pre_of[d_next] };
    let connect = |from: usize, to: usize, out: &mut Vec<usize>| {
        if from == to {
            return;
        }
        let (x, y) = step.vertices.expect("jump requires a vertex merge");
        if from == x && to == y {
            out.push(pi);
            out.push(q);
        } else if from == y && to == x {
            out.push(qi);
            out.push(p);
        } else {
            unreachable!("walk jumps between vertices the fold did not merge");
        }
    };
    let mut out: Vec<usize> = Vec::with_capacity(walk.len() + 8);
    let mut cur = base;
    for &dn in walk {
        let d = pre(dn);
        connect(cur, g.origin[d], &mut out);
        out.push(d);
        cur = g.terminus(d);
    }
    connect(cur, base, &mut out);
    // free reduction of the dart walk
    let mut reduced: Vec<usize> = Vec::with_capacity(out.len());
    for d in out {
        if reduced.last() == Some(&g.inv[d]) {
            reduced.pop();
        } else {
            reduced.push(d);
        }
    }
    reduced
}

/// Injectivity test for a candidate homomorphism `F_m -> F_n`: images
/// generate a subgroup whose graph has rank m iff the map is injective.
pub fn is_injective(domain_rank: usize, target_rank: usize, images: &[Word]) -> Result<bool> {
    if images.len() != domain_rank {
        return Err(Error::RankMismatch(format!(
            "expected {domain_rank} images, got {}",
            images.len()
        )));
    }
    let s = SubgroupGraph::from_generators(target_rank, images)?;
    Ok(s.rank() == domain_rank)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str, rank: usize) -> Word {
        Word::parse(s, rank).unwrap()
    }

    fn index2_subgroup() -> SubgroupGraph {
        SubgroupGraph::from_generators(2, &[w("aa", 2), w("b", 2), w("abA", 2)]).unwrap()
    }

    #[test]
    fn single_loop_infinite_index() {
        let s = SubgroupGraph::from_generators(2, &[w("a", 2)]).unwrap();
        assert_eq!(s.graph().vertex_count(), 1);
        assert_eq!(s.graph().edge_count(), 1);
        assert_eq!(s.index(), None);
    }

    #[test]
    fn index_two_subgroup_structure() {
        let s = index2_subgroup();
        assert_eq!(s.graph().vertex_count(), 2);
        assert!(s.is_complete());
        assert_eq!(s.index(), Some(2));
        assert_eq!(s.rank(), 3);
        assert_eq!(s.basis().len(), 3);
    }

    #[test]
    fn two_z_in_z() {
        let s = SubgroupGraph::from_generators(1, &[w("aa", 1)]).unwrap();
        assert_eq!(s.index(), Some(2));
        assert!(s.contains(&w("aaaa", 1)));
        assert!(!s.contains(&w("aaa", 1)));
    }

    #[test]
    fn membership_examples() {
        let s = index2_subgroup();
        assert!(s.contains(&Word::empty()));
        assert!(s.contains(&w("abbA", 2)));
        assert!(!s.contains(&w("a", 2)));
    }

    #[test]
    fn whole_group() {
        let s = SubgroupGraph::whole_group(2);
        assert_eq!(s.index(), Some(1));
        assert_eq!(s.basis(), vec![w("a", 2), w("b", 2)]);
        assert!(s.is_normal().unwrap());
    }

    #[test]
    fn conjugation() {
        let s = SubgroupGraph::from_generators(2, &[w("a", 2)]).unwrap();
        let c = s.conjugate(&w("b", 2)).unwrap();
        assert!(c.contains(&w("baB", 2)));
        assert!(!c.contains(&w("a", 2)));
        assert_ne!(s, c);
        // conjugating back restores the subgroup
        assert_eq!(c.conjugate(&w("B", 2)).unwrap(), s);
        // conjugate by identity is the identity
        assert_eq!(s.conjugate(&Word::empty()).unwrap(), s);
    }

    #[test]
    fn normality() {
        let s = index2_subgroup();
        assert!(s.is_normal().unwrap());
        // conjugate of a normal subgroup has equal canonical form
        assert_eq!(s.conjugate(&w("a", 2)).unwrap(), s);

        let stab = stabilizer_example();
        assert!(!stab.is_normal().unwrap());
    }

    /// Index-3 point stabilizer of the F2 action a -> (0 1), b -> (0 1 2).
    fn stabilizer_example() -> SubgroupGraph {
        let sa = Permutation::new(vec![1, 0, 2]).unwrap();
        let sb = Permutation::new(vec![1, 2, 0]).unwrap();
        SubgroupGraph::from_coset_action(2, &[sa, sb]).unwrap()
    }

    #[test]
    fn stabilizer_basics() {
        let s = stabilizer_example();
        assert_eq!(s.index(), Some(3));
        assert_eq!(s.rank(), 4); // Nielsen-Schreier: 1 + 3(2-1)
        let perms = s.coset_action().unwrap();
        assert_eq!(perms[0], Permutation::new(vec![1, 0, 2]).unwrap());
        assert_eq!(perms[1], Permutation::new(vec![1, 2, 0]).unwrap());
    }

    #[test]
    fn normal_core_of_stabilizer() {
        let s = stabilizer_example();
        let core = s.normal_core().unwrap();
        assert_eq!(core.index(), Some(6));
        assert!(core.is_normal().unwrap());
        // the core is contained in s
        for b in core.basis() {
            assert!(s.contains(&b));
        }
        // normal input: core is itself; index-1 input: whole group
        let n = index2_subgroup();
        assert_eq!(n.normal_core().unwrap(), n);
        let whole = SubgroupGraph::whole_group(2);
        assert_eq!(whole.normal_core().unwrap(), whole);
    }

    #[test]
    fn intersection_examples() {
        let s2 = SubgroupGraph::from_generators(1, &[w("aa", 1)]).unwrap();
        let s1 = SubgroupGraph::from_generators(1, &[w("a", 1)]).unwrap();
        assert_eq!(s2.intersect(&s1).unwrap(), s2);
        assert_eq!(s2.intersect(&s2).unwrap(), s2);

        let a_parity = index2_subgroup();
        let b_parity = SubgroupGraph::from_generators(2, &[w("a", 2), w("bb", 2), w("baB", 2)]).unwrap();
        let both = a_parity.intersect(&b_parity).unwrap();
        assert_eq!(both.index(), Some(4));
    }

    #[test]
    fn intersection_membership_conjunction() {
        let s = index2_subgroup();
        let t = stabilizer_example();
        let both = s.intersect(&t).unwrap();
        // brute force over short words
        let mut words = vec![Word::empty()];
        for _ in 0..5 {
            let mut next = Vec::new();
            for u in &words {
                for si in 0..4 {
                    let l = Letter::from_signed_index(si);
                    let v = u.concat(&Word::letter(l));
                    if v.len() > u.len() {
                        next.push(v);
                    }
                }
            }
            words.extend(next.clone());
            words = {
                let mut w = words;
                w.sort();
                w.dedup();
                w
            };
        }
        for u in &words {
            assert_eq!(both.contains(u), s.contains(u) && t.contains(u), "word {u}");
        }
    }

    #[test]
    fn basis_is_membership_positive() {
        let s = stabilizer_example();
        for b in s.basis() {
            assert!(s.contains(&b));
        }
        assert_eq!(
            SubgroupGraph::from_generators(1, &[w("aa", 1)]).unwrap().basis(),
            vec![w("aa", 1)]
        );
    }

    #[test]
    fn nielsen_schreier_small() {
        let s = stabilizer_example();
        assert_eq!(s.rank() as i64 - 1, 3 * (2 - 1));
    }

    #[test]
    fn embedding_roundtrip() {
        let images = vec![w("aa", 2), w("b", 2), w("abA", 2)];
        let emb = Embedding::new(3, 2, images).unwrap();
        for h in ["a", "bC", "aBc", "abcABC", "ccBB", "1"] {
            let hw = w(h, 3);
            let img = emb.apply(&hw);
            let back = emb.preimage(&img).expect("image words have preimages");
            assert_eq!(back, hw, "h = {h}, image = {img}");
        }
        // a word outside the image has no preimage
        assert_eq!(emb.preimage(&w("a", 2)), None);
    }

    #[test]
    fn injectivity_criterion() {
        assert!(is_injective(3, 2, &[w("aa", 2), w("b", 2), w("abA", 2)]).unwrap());
        assert!(!is_injective(2, 2, &[w("a", 2), w("a", 2)]).unwrap());
        assert!(is_injective(2, 2, &[w("a", 2), w("b", 2)]).unwrap());
        assert!(!is_injective(2, 1, &[w("a", 1), w("aa", 1)]).unwrap());
    }
}

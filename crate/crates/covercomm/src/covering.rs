//! Covering-map analysis, Stallings folding, degree refinement, the bounded
//! common-cover search, and fiber products.

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::Mutex;

use crate::canon::{canonical_code_raw, RawAdjacency};
use crate::error::{Error, Result};
use crate::graph::{Dart, Graph, GraphMorphism, MorphismViolation};

// ---------------------------------------------------------------------------
// covering analysis
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalViolation {
    NotLocallyInjective,
    NotLocallySurjective,
}

impl std::fmt::Display for LocalViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LocalViolation::NotLocallyInjective => write!(f, "not locally injective"),
            LocalViolation::NotLocallySurjective => write!(f, "not locally surjective"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoveringReport {
    pub is_covering: bool,
    /// Present iff the map is a covering and the target is connected.
    pub degree: Option<usize>,
    /// Local bijectivity failures, by source vertex id.
    pub violations: Vec<(String, LocalViolation)>,
    /// Violations of the morphism invariants themselves.
    pub morphism_violations: Vec<MorphismViolation>,
    pub notes: Vec<String>,
}

/// Checks local bijectivity of `m` at every source vertex.
pub fn analyze_covering(m: &GraphMorphism) -> CoveringReport {
    let morphism_violations = m.validate();
    let mut violations = Vec::new();
    let mut notes = Vec::new();

    for v in 0..m.source.vertex_count() {
        let image = m.vmap[v];
        let mut hit: BTreeMap<usize, usize> = BTreeMap::new();
        for &d in m.source.darts_at(v) {
            *hit.entry(m.dmap[d]).or_insert(0) += 1;
        }
        let vid = m.source.vertex_id(v).to_string();
        if hit.values().any(|&c| c > 1) {
            violations.push((vid.clone(), LocalViolation::NotLocallyInjective));
        }
        if m.target.darts_at(image).iter().any(|e| !hit.contains_key(e)) {
            violations.push((vid, LocalViolation::NotLocallySurjective));
        }
    }

    let mut is_covering = violations.is_empty() && morphism_violations.is_empty();
    let mut degree = None;
    if is_covering {
        let mut fibers = vec![0usize; m.target.vertex_count()];
        for &w in &m.vmap {
            fibers[w] += 1;
        }
        if m.target.is_connected() && m.target.vertex_count() > 0 {
            let d = fibers[0];
            if d == 0 {
                is_covering = false;
                notes.push("source graph is empty".to_string());
            } else if fibers.iter().any(|&c| c != d) {
                is_covering = false;
                notes.push("fiber cardinality is not constant".to_string());
            } else {
                degree = Some(d);
            }
        } else {
            notes.push("target disconnected: no global degree".to_string());
        }
    }

    CoveringReport {
        is_covering,
        degree,
        violations,
        morphism_violations,
        notes,
    }
}

// ---------------------------------------------------------------------------
// folding
// ---------------------------------------------------------------------------

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.parent[r] != r {
            r = self.parent[r];
        }
        let mut c = x;
        while self.parent[c] != c {
            let next = self.parent[c];
            self.parent[c] = r;
            c = next;
        }
        r
    }
    /// Returns the surviving representative; prefers the smaller index.
    fn union(&mut self, a: usize, b: usize) -> usize {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return ra;
        }
        let (keep, drop) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
        keep
    }
}

/// Stallings folding of a morphism: repeatedly identifies dart pairs at a
/// common vertex with equal images, until the induced map is locally
/// injective. Returns the folded source, the induced morphism, and the
/// number of geometric folds performed (0 iff the input was an immersion).
pub fn fold(m: &GraphMorphism) -> Result<(Graph, GraphMorphism, usize)> {
    let viols = m.validate();
    if !viols.is_empty() {
        return Err(Error::Morphism(format!(
            "cannot fold an invalid morphism: {}",
            viols[0]
        )));
    }
    let src = &m.source;
    let mut ufv = UnionFind::new(src.vertex_count());
    let mut ufd = UnionFind::new(src.dart_count());

    // registry per vertex class: image dart -> dart class currently keyed there
    let mut registry: Vec<BTreeMap<usize, usize>> =
        vec![BTreeMap::new(); src.vertex_count()];
    let mut queue: VecDeque<usize> = (0..src.dart_count()).collect();

    while let Some(d0) = queue.pop_front() {
        let d = ufd.find(d0);
        let v = ufv.find(src.origin(
            // origin of any member of the class; members share a class origin
            d,
        ));
        let key = m.dmap[d0]; // all members of a dart class share one image
        let slot = registry[v].get(&key).copied();
        match slot {
            None => {
                registry[v].insert(key, d);
            }
            Some(e0) => {
                let e = ufd.find(e0);
                if e == d {
                    registry[v].insert(key, d);
                    continue;
                }
                // check the registered dart still lives at this vertex
                if ufv.find(src.origin(e)) != v {
                    registry[v].insert(key, d);
                    queue.push_back(e);
                    continue;
                }
                // fold d with e: merge darts, their inverses, and termini
                let di = src.involution(d);
                let ei = src.involution(e);
                let td = ufv.find(src.origin(di));
                let te = ufv.find(src.origin(ei));
                ufd.union(d, e);
                let minv = ufd.union(di, ei);
                queue.push_back(minv);
                if td != te {
                    let keep = ufv.union(td, te);
                    let drop = if keep == td { te } else { td };
                    // re-key the registry of the absorbed vertex
                    let moved: Vec<usize> = registry[drop].values().copied().collect();
                    registry[drop].clear();
                    for x in moved {
                        queue.push_back(x);
                    }
                }
                queue.push_back(ufd.find(d));
            }
        }
    }

    // assemble the folded graph: classes named by their lexicographically
    // least member id
    let mut vclass: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for v in 0..src.vertex_count() {
        vclass.entry(ufv.find(v)).or_default().push(v);
    }
    let mut vname: BTreeMap<usize, String> = BTreeMap::new();
    for (&rep, members) in &vclass {
        let name = members
            .iter()
            .map(|&v| src.vertex_id(v))
            .min()
            .unwrap()
            .to_string();
        vname.insert(rep, name);
    }
    let mut vertices: Vec<(String, usize)> = vname
        .iter()
        .map(|(&rep, name)| (name.clone(), rep))
        .collect();
    vertices.sort();
    let new_vindex: BTreeMap<usize, usize> = vertices
        .iter()
        .enumerate()
        .map(|(i, &(_, rep))| (rep, i))
        .collect();

    // dart classes, paired into geometric edges by the induced involution
    // and renamed systematically (a class may mix primed and unprimed ids,
    // so the least member id cannot serve as an edge name)
    let mut dclass: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for d in 0..src.dart_count() {
        dclass.entry(ufd.find(d)).or_default().push(d);
    }
    let least_id: BTreeMap<usize, &str> = dclass
        .iter()
        .map(|(&rep, members)| {
            (
                rep,
                members.iter().map(|&d| src.dart(d).id.as_str()).min().unwrap(),
            )
        })
        .collect();
    let mut canonical_classes: Vec<usize> = dclass
        .keys()
        .copied()
        .filter(|&rep| {
            let partner = ufd.find(src.involution(rep));
            least_id[&rep] < least_id[&partner]
        })
        .collect();
    canonical_classes.sort_by_key(|rep| least_id[rep]);
    let ew = canonical_classes.len().max(2).to_string().len();

    let class_label = |rep: usize| -> Option<crate::word::Letter> {
        dclass[&rep]
            .iter()
            .map(|&d| src.dart(d).label)
            .reduce(|a, b| if a == b { a } else { None })
            .flatten()
    };

    let mut darts: Vec<Dart> = Vec::with_capacity(2 * canonical_classes.len());
    let mut class_position: BTreeMap<usize, usize> = BTreeMap::new();
    for (i, &rep) in canonical_classes.iter().enumerate() {
        let partner = ufd.find(src.involution(rep));
        class_position.insert(rep, darts.len());
        darts.push(Dart {
            id: format!("f{i:0ew$}"),
            origin: new_vindex[&ufv.find(src.origin(rep))],
            inv: usize::MAX,
            label: class_label(rep),
        });
        class_position.insert(partner, darts.len());
        darts.push(Dart {
            id: format!("f{i:0ew$}'"),
            origin: new_vindex[&ufv.find(src.origin(partner))],
            inv: usize::MAX,
            label: class_label(partner),
        });
    }
    // sort by id and wire the involution (partners are adjacent pre-sort)
    let mut order: Vec<usize> = (0..darts.len()).collect();
    order.sort_by(|&a, &b| darts[a].id.cmp(&darts[b].id));
    let mut pos = vec![0usize; darts.len()];
    for (new, &old) in order.iter().enumerate() {
        pos[old] = new;
    }
    let mut sorted_darts: Vec<Dart> = order.iter().map(|&o| darts[o].clone()).collect();
    for (new, &old) in order.iter().enumerate() {
        sorted_darts[new].inv = pos[old ^ 1];
    }
    let sorted_class_position: BTreeMap<usize, usize> = class_position
        .iter()
        .map(|(&rep, &unsorted)| (rep, pos[unsorted]))
        .collect();

    let folded = Graph::from_parts(
        format!("{}.folded", src.name()),
        vertices.iter().map(|(n, _)| n.clone()).collect(),
        sorted_darts,
    )?;

    let vmap = (0..folded.vertex_count())
        .map(|i| {
            m.vmap[src
                .vertex_index(folded.vertex_id(i))
                .expect("folded vertex ids come from the source")]
        })
        .collect();
    let mut dmap = vec![usize::MAX; folded.dart_count()];
    for (&rep, &fi) in &sorted_class_position {
        dmap[fi] = m.dmap[rep];
    }
    let induced = GraphMorphism::from_indices(folded.clone(), m.target.clone(), vmap, dmap);
    let folds = src.edge_count() - folded.edge_count();
    Ok((folded, induced, folds))
}

/// Folds a labeled graph to local injectivity via its tautological map to
/// the rose, keeping track of where the basepoint went.
pub fn fold_labeled(g: &Graph, rank: usize, basepoint: usize) -> Result<(Graph, usize, usize)> {
    let rose = Graph::rose(rank);
    let vmap = vec![0usize; g.vertex_count()];
    let mut dmap = Vec::with_capacity(g.dart_count());
    for d in 0..g.dart_count() {
        let l = g
            .label(d)
            .ok_or_else(|| Error::Graph("fold_labeled needs a fully labeled graph".into()))?;
        if l.gen as usize >= rank {
            return Err(Error::RankMismatch(format!(
                "label {} outside the rank-{rank} alphabet",
                l
            )));
        }
        let id = if l.inv {
            format!("{}'", l.inverse().to_char())
        } else {
            l.to_char().to_string()
        };
        dmap.push(rose.dart_index(&id).unwrap());
    }
    let base_id = g.vertex_id(basepoint).to_string();
    let m = GraphMorphism::from_indices(g.clone(), rose, vmap, dmap);
    let (folded, _, folds) = fold(&m)?;
    // Vertex classes are named by their least member id, so if the
    // basepoint's id survived it names its own class; otherwise recover the
    // class by walking the quotient map.
    let idx = match folded.vertex_index(&base_id) {
        Some(i) => i,
        None => find_merged_vertex(g, basepoint, &folded)?,
    };
    Ok((folded, idx, folds))
}

/// Recovery of a basepoint whose id did not survive folding.
fn find_merged_vertex(g: &Graph, basepoint: usize, folded: &Graph) -> Result<usize> {
    // Walk both graphs in lockstep over a spanning tree of `g`, mapping
    // vertices of g onto folded vertices; labels make images unique.
    let mut image = vec![usize::MAX; g.vertex_count()];
    // find any vertex whose id survived to seed the walk
    let seed = (0..g.vertex_count())
        .find(|&v| folded.vertex_index(g.vertex_id(v)).is_some())
        .ok_or_else(|| Error::Graph("folding lost every vertex id".into()))?;
    image[seed] = folded.vertex_index(g.vertex_id(seed)).unwrap();
    let mut queue = VecDeque::from([seed]);
    while let Some(v) = queue.pop_front() {
        if image[basepoint] != usize::MAX {
            break;
        }
        for &d in g.darts_at(v) {
            let t = g.terminus(d);
            if image[t] != usize::MAX {
                continue;
            }
            let l = g.label(d).unwrap();
            let fv = image[v];
            let fd = folded
                .darts_at(fv)
                .iter()
                .copied()
                .find(|&x| folded.label(x) == Some(l))
                .ok_or_else(|| Error::Graph("folded graph lost a labeled dart".into()))?;
            image[t] = folded.terminus(fd);
            queue.push_back(t);
        }
    }
    if image[basepoint] == usize::MAX {
        return Err(Error::Graph("basepoint unreachable while refolding".into()));
    }
    Ok(image[basepoint])
}

// ---------------------------------------------------------------------------
// degree refinement
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DegreeRefinement {
    /// Stable partition in canonical class order; members are vertex ids.
    pub classes: Vec<Vec<String>>,
    /// `matrix[i][j]` = darts from a class-i vertex into class j.
    pub matrix: Vec<Vec<usize>>,
}

/// Coarsest equitable partition of the vertices, with its count matrix in a
/// canonical class order, so that two graphs have the same universal cover
/// iff their matrices are equal.
pub fn degree_refinement(g: &Graph) -> Result<DegreeRefinement> {
    if !g.is_connected() {
        return Err(Error::Disconnected(format!("graph {:?}", g.name())));
    }
    if g.vertex_count() == 0 {
        return Err(Error::Graph("empty graph has no refinement".into()));
    }
    let mut colors = vec![0usize; g.vertex_count()];
    loop {
        let mut sigs: Vec<(usize, Vec<usize>)> = Vec::with_capacity(g.vertex_count());
        for v in 0..g.vertex_count() {
            let mut nb: Vec<usize> = g.darts_at(v).iter().map(|&d| colors[g.terminus(d)]).collect();
            nb.sort_unstable();
            sigs.push((colors[v], nb));
        }
        let mut dict = sigs.clone();
        dict.sort();
        dict.dedup();
        let next: Vec<usize> = sigs.iter().map(|s| dict.binary_search(s).unwrap()).collect();
        if next == colors {
            break;
        }
        colors = next;
    }

    let k = colors.iter().copied().max().unwrap() + 1;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (v, &c) in colors.iter().enumerate() {
        members[c].push(v);
    }
    let mut matrix = vec![vec![0usize; k]; k];
    for (i, cls) in members.iter().enumerate() {
        let v = cls[0];
        for &d in g.darts_at(v) {
            matrix[i][colors[g.terminus(d)]] += 1;
        }
        // equitability check: every member must agree
        for &u in cls.iter().skip(1) {
            let mut row = vec![0usize; k];
            for &d in g.darts_at(u) {
                row[colors[g.terminus(d)]] += 1;
            }
            debug_assert_eq!(row, matrix[i], "refinement not equitable");
        }
    }

    // canonical ordering: sort classes by (degree, size), then break the
    // remaining ties by the lexicographically least matrix
    let degree_of = |i: usize| matrix[i].iter().sum::<usize>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&i| (degree_of(i), members[i].len(), i));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match groups.last() {
            Some(last)
                if degree_of(last[0]) == degree_of(i)
                    && members[last[0]].len() == members[i].len() =>
            {
                groups.last_mut().unwrap().push(i)
            }
            _ => groups.push(vec![i]),
        }
    }
    let best = minimize_matrix(&matrix, &groups);

    let classes = best
        .iter()
        .map(|&i| {
            let mut ids: Vec<String> = members[i].iter().map(|&v| g.vertex_id(v).to_string()).collect();
            ids.sort();
            ids
        })
        .collect();
    let permuted: Vec<Vec<usize>> = best
        .iter()
        .map(|&i| best.iter().map(|&j| matrix[i][j]).collect())
        .collect();
    Ok(DegreeRefinement {
        classes,
        matrix: permuted,
    })
}

/// Lexicographically least matrix over permutations within tie groups.
fn minimize_matrix(matrix: &[Vec<usize>], groups: &[Vec<usize>]) -> Vec<usize> {
    fn rec(
        matrix: &[Vec<usize>],
        groups: &[Vec<usize>],
        gi: usize,
        prefix: Vec<usize>,
        best: &mut Option<(Vec<usize>, Vec<usize>)>,
    ) {
        if gi == groups.len() {
            let flat: Vec<usize> = prefix
                .iter()
                .flat_map(|&i| prefix.iter().map(move |&j| matrix[i][j]))
                .collect();
            if best.as_ref().is_none_or(|(b, _)| flat < *b) {
                *best = Some((flat, prefix));
            }
            return;
        }
        let mut g = groups[gi].clone();
        permute_all(&mut g, 0, &mut |perm| {
            let mut next = prefix.clone();
            next.extend_from_slice(perm);
            rec(matrix, groups, gi + 1, next, best);
        });
    }
    fn permute_all(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
        if k == items.len() {
            f(items);
            return;
        }
        for i in k..items.len() {
            items.swap(k, i);
            permute_all(items, k + 1, f);
            items.swap(k, i);
        }
    }
    let mut best = None;
    rec(matrix, groups, 0, Vec::new(), &mut best);
    best.unwrap().1
}

/// Two connected finite graphs have the same universal covering tree iff
/// their degree refinements agree.
pub fn same_universal_cover(g1: &Graph, g2: &Graph) -> Result<bool> {
    Ok(degree_refinement(g1)?.matrix == degree_refinement(g2)?.matrix)
}

// ---------------------------------------------------------------------------
// fiber product
// ---------------------------------------------------------------------------

/// Pullback of two morphisms with a common target. Vertices are compatible
/// pairs, darts are compatible dart pairs; the projections are morphisms,
/// and coverings pull back to coverings.
pub fn fiber_product(
    p1: &GraphMorphism,
    p2: &GraphMorphism,
) -> Result<(Graph, GraphMorphism, GraphMorphism)> {
    if p1.target != p2.target {
        return Err(Error::Morphism(
            "fiber product requires a common target".into(),
        ));
    }
    let (a, b) = (&p1.source, &p2.source);
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut pair_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for va in 0..a.vertex_count() {
        for vb in 0..b.vertex_count() {
            if p1.vmap[va] == p2.vmap[vb] {
                pair_index.insert((va, vb), pairs.len());
                pairs.push((va, vb));
            }
        }
    }
    // compatible dart pairs; the canonical member of an involution orbit is
    // the lexicographically smaller pair
    let mut canonical: Vec<(usize, usize)> = Vec::new();
    for da in 0..a.dart_count() {
        for db in 0..b.dart_count() {
            if p1.dmap[da] == p2.dmap[db] && (da, db) < (a.involution(da), b.involution(db)) {
                canonical.push((da, db));
            }
        }
    }

    let vw = pairs.len().max(2).to_string().len();
    let ew = canonical.len().max(2).to_string().len();
    let vertices: Vec<String> = (0..pairs.len()).map(|i| format!("q{i:0vw$}")).collect();
    let mut darts: Vec<Dart> = Vec::with_capacity(2 * canonical.len());
    let mut sources: Vec<(usize, usize)> = Vec::with_capacity(2 * canonical.len());
    for (i, &(da, db)) in canonical.iter().enumerate() {
        let (ia, ib) = (a.involution(da), b.involution(db));
        darts.push(Dart {
            id: format!("d{i:0ew$}"),
            origin: pair_index[&(a.origin(da), b.origin(db))],
            inv: darts.len() + 1,
            label: a.label(da).or(b.label(db)),
        });
        sources.push((da, db));
        darts.push(Dart {
            id: format!("d{i:0ew$}'"),
            origin: pair_index[&(a.origin(ia), b.origin(ib))],
            inv: darts.len() - 1,
            label: a.label(ia).or(b.label(ib)),
        });
        sources.push((ia, ib));
    }
    // zero-padded ids are already sorted: d00 < d00' < d01 < ...
    let product = Graph::from_parts("fiber".to_string(), vertices, darts)?;

    let proj1 = GraphMorphism::from_indices(
        product.clone(),
        a.clone(),
        pairs.iter().map(|&(va, _)| va).collect(),
        sources.iter().map(|&(da, _)| da).collect(),
    );
    let proj2 = GraphMorphism::from_indices(
        product.clone(),
        b.clone(),
        pairs.iter().map(|&(_, vb)| vb).collect(),
        sources.iter().map(|&(_, db)| db).collect(),
    );
    Ok((product, proj1, proj2))
}

// ---------------------------------------------------------------------------
// common cover search
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub enum CommonCoverOutcome {
    Found {
        z: Graph,
        p1: GraphMorphism,
        p2: GraphMorphism,
    },
    /// The degree refinements disagree, so no common cover exists.
    NoneExists { reason: String },
    BoundExhausted,
}

struct RawCover {
    nv: usize,
    // per dart: (origin, inv); two darts per edge
    origin: Vec<usize>,
    inv: Vec<usize>,
    out: Vec<Vec<usize>>,
}

impl RawCover {
    fn from_graph(g: &Graph) -> RawCover {
        RawCover {
            nv: g.vertex_count(),
            origin: (0..g.dart_count()).map(|d| g.origin(d)).collect(),
            inv: (0..g.dart_count()).map(|d| g.involution(d)).collect(),
            out: (0..g.vertex_count())
                .map(|v| g.darts_at(v).to_vec())
                .collect(),
        }
    }

    fn terminus(&self, d: usize) -> usize {
        self.origin[self.inv[d]]
    }
}

/// Searches for a connected graph covering both inputs, enumerating
/// permutation voltages on the spanning complement of the graph with fewer
/// vertices, in canonical order with isomorph rejection, and backtracking
/// for a locally bijective map onto the other graph. Returns the
/// lexicographically least certificate, independent of the thread count.
pub fn find_common_cover(
    g1: &Graph,
    g2: &Graph,
    max_vertices: usize,
    threads: usize,
) -> Result<CommonCoverOutcome> {
    if !g1.is_connected() {
        return Err(Error::Disconnected(format!("graph {:?}", g1.name())));
    }
    if !g2.is_connected() {
        return Err(Error::Disconnected(format!("graph {:?}", g2.name())));
    }
    if !same_universal_cover(g1, g2)? {
        return Ok(CommonCoverOutcome::NoneExists {
            reason: "degree refinements disagree: the graphs have different universal covers"
                .to_string(),
        });
    }
    let swap = g2.vertex_count() < g1.vertex_count();
    let (base, other) = if swap { (g2, g1) } else { (g1, g2) };

    let search = CoverSearch::new(base, other);
    let threads = threads.max(1);
    let mut d = 1usize;
    while base.vertex_count() * d <= max_vertices {
        if (base.vertex_count() * d).is_multiple_of(other.vertex_count()) {
            if let Some((z, p_base, p_other)) = search.run_degree(d, threads)? {
                let (p1, p2) = if swap { (p_other, p_base) } else { (p_base, p_other) };
                return Ok(CommonCoverOutcome::Found { z, p1, p2 });
            }
        }
        d += 1;
    }
    Ok(CommonCoverOutcome::BoundExhausted)
}

struct CoverSearch<'a> {
    base: &'a Graph,
    other: &'a Graph,
    raw_other: RawCover,
    other_bipartite: bool,
    /// non-tree geometric edges of the base, as canonical darts
    free_darts: Vec<usize>,
    /// parity of the fundamental cycle of each free dart
    free_parity: Vec<bool>,
}

impl<'a> CoverSearch<'a> {
    fn new(base: &'a Graph, other: &'a Graph) -> CoverSearch<'a> {
        // BFS spanning tree from vertex 0
        let mut depth = vec![usize::MAX; base.vertex_count()];
        let mut in_tree = vec![false; base.dart_count()];
        depth[0] = 0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            for &dd in base.darts_at(v) {
                let t = base.terminus(dd);
                if depth[t] == usize::MAX {
                    depth[t] = depth[v] + 1;
                    in_tree[dd] = true;
                    in_tree[base.involution(dd)] = true;
                    queue.push_back(t);
                }
            }
        }
        let mut free: Vec<usize> = Vec::new();
        let mut parity: Vec<bool> = Vec::new();
        for (d, _) in base.geometric_edges() {
            if !in_tree[d] {
                free.push(d);
                let u = base.origin(d);
                let v = base.terminus(d);
                parity.push((depth[u] + depth[v] + 1) % 2 == 1);
            }
        }
        CoverSearch {
            base,
            other,
            raw_other: RawCover::from_graph(other),
            other_bipartite: other.bipartition().is_some(),
            free_darts: free,
            free_parity: parity,
        }
    }

    /// All permutations of `0..d` in lexicographic order, filtered by the
    /// parity obstruction: when the other graph is bipartite, a voltage on
    /// an odd fundamental cycle must have all orbits of even size, or the
    /// lifted cycle is odd and no map to the bipartite side can exist.
    fn allowed_perms(&self, d: usize, parity_odd: bool) -> Vec<Vec<usize>> {
        let mut all = Vec::new();
        let mut perm: Vec<usize> = (0..d).collect();
        loop {
            if !(self.other_bipartite && parity_odd) || all_even_orbits(&perm) {
                all.push(perm.clone());
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        all
    }

    fn run_degree(
        &self,
        d: usize,
        threads: usize,
    ) -> Result<Option<(Graph, GraphMorphism, GraphMorphism)>> {
        let per_edge: Vec<Vec<Vec<usize>>> = self
            .free_parity
            .iter()
            .map(|&odd| self.allowed_perms(d, odd))
            .collect();
        let mut total: u128 = 1;
        for p in &per_edge {
            if p.is_empty() {
                return Ok(None);
            }
            total = total.saturating_mul(p.len() as u128);
        }

        let seen: Mutex<HashSet<Vec<u32>>> = Mutex::new(HashSet::new());
        const SEEN_CAP: usize = 1 << 20;

        let block = (8192 * threads) as u128;
        let mut start: u128 = 0;
        while start < total {
            let end = (start + block).min(total);
            let hit: Mutex<Option<(u128, Assignment)>> = Mutex::new(None);
            std::thread::scope(|scope| {
                for t in 0..threads {
                    let seen = &seen;
                    let hit = &hit;
                    let per_edge = &per_edge;
                    scope.spawn(move || {
                        let mut idx = start + t as u128;
                        while idx < end {
                            if let Some(a) = self.try_leaf(idx, d, per_edge, seen, SEEN_CAP) {
                                let mut h = hit.lock().unwrap();
                                if h.as_ref().is_none_or(|(i, _)| idx < *i) {
                                    *h = Some((idx, a));
                                }
                            }
                            idx += threads as u128;
                        }
                    });
                }
            });
            if let Some((_, a)) = hit.into_inner().unwrap() {
                return Ok(Some(self.certificate(d, &a)?));
            }
            start = end;
        }
        Ok(None)
    }

    /// Decodes and tests one voltage assignment; returns map data on success.
    fn try_leaf(
        &self,
        idx: u128,
        d: usize,
        per_edge: &[Vec<Vec<usize>>],
        seen: &Mutex<HashSet<Vec<u32>>>,
        seen_cap: usize,
    ) -> Option<Assignment> {
        // mixed-radix decode, most significant digit = first free edge
        let mut rem = idx;
        let mut choice = vec![0usize; per_edge.len()];
        for i in (0..per_edge.len()).rev() {
            let m = per_edge[i].len() as u128;
            choice[i] = (rem % m) as usize;
            rem /= m;
        }
        let voltages: Vec<&[usize]> = choice
            .iter()
            .enumerate()
            .map(|(i, &c)| per_edge[i][c].as_slice())
            .collect();

        let cover = self.build_cover(d, &voltages);
        if !raw_connected(&cover) {
            return None;
        }
        if self.other_bipartite && !raw_bipartite(&cover) {
            return None;
        }

        // isomorph rejection: success only depends on the isomorphism
        // class, so a candidate isomorphic to a recorded failure fails too.
        // Only failures are recorded (recording before the search could let
        // a concurrent twin skip a lower-index success).
        let code = canonical_code_raw(&RawAdjacency {
            n: cover.nv,
            adj: (0..cover.nv)
                .map(|v| cover.out[v].iter().map(|&dd| (cover.terminus(dd), 0)).collect())
                .collect(),
        });
        if seen.lock().unwrap().contains(&code) {
            return None;
        }

        match self.map_onto_other(&cover) {
            Some((vmap, dmap)) => Some(Assignment {
                voltages: voltages.iter().map(|v| v.to_vec()).collect(),
                vmap,
                dmap,
            }),
            None => {
                let mut s = seen.lock().unwrap();
                if s.len() < seen_cap {
                    s.insert(code);
                }
                None
            }
        }
    }

    /// Builds the degree-`d` cover determined by the voltages. Cover vertex
    /// `(v, s)` is index `v*d + s`; cover darts are `(base dart, sheet)`.
    fn build_cover(&self, d: usize, voltages: &[&[usize]]) -> RawCover {
        let base = self.base;
        let nv = base.vertex_count() * d;
        let nd = base.dart_count() * d;
        let mut origin = vec![0usize; nd];
        let mut inv = vec![0usize; nd];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); nv];
        // voltage per canonical dart; on the reverse dart the inverse applies
        let mut volt: BTreeMap<usize, &[usize]> = BTreeMap::new();
        for (i, &fd) in self.free_darts.iter().enumerate() {
            volt.insert(fd, voltages[i]);
        }
        for (cd, icd) in base.geometric_edges() {
            for s in 0..d {
                let sigma_s = volt.get(&cd).map(|p| p[s]).unwrap_or(s);
                let du = cd * d + s; // dart (cd, s): from (origin(cd), s)
                let dv = icd * d + sigma_s; // reverse dart lives at sheet sigma(s)
                origin[du] = base.origin(cd) * d + s;
                origin[dv] = base.origin(icd) * d + sigma_s;
                inv[du] = dv;
                inv[dv] = du;
            }
        }
        for (dd, &o) in origin.iter().enumerate() {
            out[o].push(dd);
        }
        for l in &mut out {
            l.sort_unstable();
        }
        RawCover { nv, origin, inv, out }
    }

    /// Backtracking search for a locally bijective map cover -> other, in
    /// canonical order; returns the first (least) one found.
    fn map_onto_other(&self, cover: &RawCover) -> Option<(Vec<usize>, Vec<usize>)> {
        let other = &self.raw_other;
        let mut vmap = vec![usize::MAX; cover.nv];
        let mut dmap = vec![usize::MAX; cover.origin.len()];
        // degree must match everywhere for a local bijection
        for w in 0..other.nv {
            if other.out[w].is_empty() != cover.out.iter().all(|x| x.is_empty()) {
                break;
            }
        }
        for w in 0..other.nv {
            if cover.out[0].len() != other.out[w].len() {
                continue;
            }
            vmap[0] = w;
            if self.extend_map(cover, &mut vmap, &mut dmap) {
                return Some((vmap, dmap));
            }
            vmap = vec![usize::MAX; cover.nv];
            dmap = vec![usize::MAX; cover.origin.len()];
        }
        None
    }

    fn extend_map(&self, cover: &RawCover, vmap: &mut [usize], dmap: &mut [usize]) -> bool {
        let other = &self.raw_other;
        // next unassigned dart whose origin is assigned, in index order
        let next = (0..dmap.len()).find(|&dd| dmap[dd] == usize::MAX && vmap[cover.origin[dd]] != usize::MAX);
        let Some(dd) = next else {
            // all reachable darts assigned; cover is connected so we are done
            return dmap.iter().all(|&x| x != usize::MAX);
        };
        let v = cover.origin[dd];
        let w = vmap[v];
        // candidate images at w, local injectivity enforced
        let used: Vec<usize> = cover.out[v]
            .iter()
            .filter(|&&x| dmap[x] != usize::MAX)
            .map(|&x| dmap[x])
            .collect();
        for &e in &other.out[w] {
            if used.contains(&e) {
                continue;
            }
            let t = cover.terminus(dd);
            let te = other.terminus(e);
            let old_vt = vmap[t];
            if old_vt != usize::MAX && old_vt != te {
                continue;
            }
            if old_vt == usize::MAX && cover.out[t].len() != other.out[te].len() {
                continue;
            }
            // assign dart, inverse dart, and terminus; darts are always
            // assigned in involution pairs, so the inverse is free here,
            // but its image must stay locally injective at t
            let idd = cover.inv[dd];
            let img_inv = other.inv[e];
            if cover.out[t]
                .iter()
                .any(|&x| x != idd && dmap[x] == img_inv)
            {
                continue;
            }
            dmap[dd] = e;
            dmap[idd] = img_inv;
            vmap[t] = te;
            if self.extend_map(cover, vmap, dmap) {
                return true;
            }
            dmap[dd] = usize::MAX;
            dmap[idd] = usize::MAX;
            vmap[t] = old_vt;
        }
        false
    }

    /// Materializes the certificate graph and the two covering morphisms.
    fn certificate(
        &self,
        d: usize,
        a: &Assignment,
    ) -> Result<(Graph, GraphMorphism, GraphMorphism)> {
        let base = self.base;
        let voltages: Vec<&[usize]> = a.voltages.iter().map(|v| v.as_slice()).collect();
        let cover = self.build_cover(d, &voltages);
        let nv = cover.nv;
        let vw = nv.max(2).to_string().len();
        let vertices: Vec<String> = (0..nv).map(|i| format!("z{i:0vw$}")).collect();

        // geometric edges of the cover: canonical dart = (cd, s)
        let mut edge_of_dart: BTreeMap<usize, (usize, bool)> = BTreeMap::new(); // dart -> (edge idx, reversed)
        let mut edges: Vec<usize> = Vec::new(); // canonical cover darts
        for (cd, _) in base.geometric_edges() {
            for s in 0..d {
                let dd = cd * d + s;
                edge_of_dart.insert(dd, (edges.len(), false));
                edge_of_dart.insert(cover.inv[dd], (edges.len(), true));
                edges.push(dd);
            }
        }
        let ew = edges.len().max(2).to_string().len();
        let mut darts: Vec<Dart> = Vec::new();
        let mut new_index: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, &dd) in edges.iter().enumerate() {
            new_index.insert(dd, darts.len());
            darts.push(Dart {
                id: format!("e{i:0ew$}"),
                origin: cover.origin[dd],
                inv: usize::MAX,
                label: None,
            });
            new_index.insert(cover.inv[dd], darts.len());
            darts.push(Dart {
                id: format!("e{i:0ew$}'"),
                origin: cover.origin[cover.inv[dd]],
                inv: usize::MAX,
                label: None,
            });
        }
        // sort darts by id and wire the involution
        let mut order: Vec<usize> = (0..darts.len()).collect();
        order.sort_by(|&x, &y| darts[x].id.cmp(&darts[y].id));
        let mut pos = vec![0usize; darts.len()];
        for (np, &o) in order.iter().enumerate() {
            pos[o] = np;
        }
        let mut sorted: Vec<Dart> = order.iter().map(|&o| darts[o].clone()).collect();
        for (np, &o) in order.iter().enumerate() {
            sorted[np].inv = pos[o ^ 1];
        }
        // remember where each raw dart went
        let raw_to_sorted: BTreeMap<usize, usize> = new_index
            .iter()
            .map(|(&raw, &unsorted)| (raw, pos[unsorted]))
            .collect();

        let z = Graph::from_parts("Z".to_string(), vertices, sorted)?;

        let vmap_base: Vec<usize> = (0..nv).map(|i| i / d).collect();
        let mut dmap_base = vec![0usize; z.dart_count()];
        for (&raw, &zi) in &raw_to_sorted {
            // raw dart = (base dart cd, sheet): index cd*d + s
            dmap_base[zi] = raw / d;
        }
        let p_base = GraphMorphism::from_indices(z.clone(), base.clone(), vmap_base, dmap_base);

        let mut dmap_other = vec![0usize; z.dart_count()];
        for (&raw, &zi) in &raw_to_sorted {
            dmap_other[zi] = a.dmap[raw];
        }
        let p_other = GraphMorphism::from_indices(
            z.clone(),
            self.other.clone(),
            (0..nv).map(|i| a.vmap[i]).collect(),
            dmap_other,
        );

        debug_assert!(analyze_covering(&p_base).is_covering);
        debug_assert!(analyze_covering(&p_other).is_covering);
        Ok((z, p_base, p_other))
    }
}

struct Assignment {
    voltages: Vec<Vec<usize>>,
    vmap: Vec<usize>,
    dmap: Vec<usize>,
}

fn raw_connected(c: &RawCover) -> bool {
    if c.nv == 0 {
        return true;
    }
    let mut seen = vec![false; c.nv];
    seen[0] = true;
    let mut stack = vec![0usize];
    let mut count = 1;
    while let Some(v) = stack.pop() {
        for &dd in &c.out[v] {
            let t = c.terminus(dd);
            if !seen[t] {
                seen[t] = true;
                count += 1;
                stack.push(t);
            }
        }
    }
    count == c.nv
}

fn raw_bipartite(c: &RawCover) -> bool {
    let mut color = vec![u8::MAX; c.nv];
    for s in 0..c.nv {
        if color[s] != u8::MAX {
            continue;
        }
        color[s] = 0;
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            for &dd in &c.out[v] {
                let t = c.terminus(dd);
                if color[t] == u8::MAX {
                    color[t] = 1 - color[v];
                    stack.push(t);
                } else if color[t] == color[v] {
                    return false;
                }
            }
        }
    }
    true
}

fn all_even_orbits(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    for s in 0..perm.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0;
        let mut c = s;
        while !seen[c] {
            seen[c] = true;
            len += 1;
            c = perm[c];
        }
        if len % 2 == 1 {
            return false;
        }
    }
    true
}

fn next_permutation(perm: &mut [usize]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;
    use crate::word::Letter;

    fn loop_graph() -> Graph {
        let mut b = GraphBuilder::new("loop");
        b.vertex("v");
        b.labeled_edge("a", "v", "v", Letter::new(0, false));
        b.build().unwrap()
    }

    fn two_cycle() -> Graph {
        let mut b = GraphBuilder::new("c2");
        b.vertex("u").vertex("v");
        b.labeled_edge("e1", "u", "v", Letter::new(0, false));
        b.labeled_edge("e2", "v", "u", Letter::new(0, false));
        b.build().unwrap()
    }

    fn double_cover_of_loop() -> GraphMorphism {
        let src = two_cycle();
        let dst = loop_graph();
        let vmap = vec![0, 0];
        let a = dst.dart_index("a").unwrap();
        let ar = dst.dart_index("a'").unwrap();
        let dmap = (0..src.dart_count())
            .map(|d| if src.label(d).unwrap().inv { ar } else { a })
            .collect();
        GraphMorphism::from_indices(src, dst, vmap, dmap)
    }

    pub(crate) fn k4() -> Graph {
        let mut b = GraphBuilder::new("K4");
        for i in 1..=4 {
            b.vertex(format!("v{i}"));
        }
        let mut k = 0;
        for i in 1..=4 {
            for j in (i + 1)..=4 {
                b.edge(format!("e{k}"), format!("v{i}"), format!("v{j}"));
                k += 1;
            }
        }
        b.build().unwrap()
    }

    pub(crate) fn k33() -> Graph {
        let mut b = GraphBuilder::new("K33");
        for i in 0..3 {
            b.vertex(format!("u{i}"));
            b.vertex(format!("w{i}"));
        }
        let mut k = 0;
        for u in 0..3 {
            for w in 0..3 {
                b.edge(format!("e{k}"), format!("u{u}"), format!("w{w}"));
                k += 1;
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn identity_is_degree_one_covering() {
        let g = k4();
        let r = analyze_covering(&GraphMorphism::identity(&g));
        assert!(r.is_covering);
        assert_eq!(r.degree, Some(1));
    }

    #[test]
    fn double_cover_of_loop_is_covering() {
        let m = double_cover_of_loop();
        let r = analyze_covering(&m);
        assert!(r.is_covering, "{:?}", r);
        assert_eq!(r.degree, Some(2));
        // chi multiplicativity
        assert_eq!(
            m.source.euler_characteristic(),
            2 * m.target.euler_characteristic()
        );
    }

    #[test]
    fn collapsing_map_is_not_locally_injective() {
        // wedge of two a-loops onto the rose: both loops hit the same dart
        let mut b = GraphBuilder::new("wedge");
        b.vertex("v");
        b.labeled_edge("x", "v", "v", Letter::new(0, false));
        b.labeled_edge("y", "v", "v", Letter::new(0, false));
        let src = b.build().unwrap();
        let rose = Graph::rose(1);
        let dmap = (0..src.dart_count())
            .map(|d| {
                let l = src.label(d).unwrap();
                let id = if l.inv { "a'" } else { "a" };
                rose.dart_index(id).unwrap()
            })
            .collect();
        let m = GraphMorphism::from_indices(src, rose, vec![0], dmap);
        let r = analyze_covering(&m);
        assert!(!r.is_covering);
        assert!(r
            .violations
            .iter()
            .any(|(v, k)| v == "v" && *k == LocalViolation::NotLocallyInjective));

        // folding it performs exactly one geometric fold
        let (folded, induced, folds) = fold(&m).unwrap();
        assert_eq!(folds, 1);
        assert_eq!(folded.edge_count(), 1);
        assert_eq!(folded.vertex_count(), 1);
        assert!(analyze_covering(&induced).is_covering);
    }

    #[test]
    fn covering_implies_zero_folds() {
        let m = double_cover_of_loop();
        let (_, _, folds) = fold(&m).unwrap();
        assert_eq!(folds, 0);
    }

    #[test]
    fn fold_accounting() {
        // a path a.a mapped onto the loop folds to a single loop:
        // each vertex-identifying fold removes one vertex and two darts
        let mut b = GraphBuilder::new("path");
        b.vertex("p").vertex("q").vertex("r");
        b.labeled_edge("e1", "p", "q", Letter::new(0, false));
        b.labeled_edge("e2", "q", "r", Letter::new(0, false));
        let src = b.build().unwrap();
        let rose = Graph::rose(1);
        let dmap = (0..src.dart_count())
            .map(|d| {
                let l = src.label(d).unwrap();
                rose.dart_index(if l.inv { "a'" } else { "a" }).unwrap()
            })
            .collect();
        let m = GraphMorphism::from_indices(src.clone(), rose, vec![0, 0, 0], dmap);
        let (folded, _, folds) = fold(&m).unwrap();
        let dv = src.vertex_count() - folded.vertex_count();
        let dd = src.dart_count() - folded.dart_count();
        assert_eq!(folds, src.edge_count() - folded.edge_count());
        assert_eq!(dd, 2 * folds);
        assert!(dv <= folds);
    }

    #[test]
    fn refinement_regular_and_path() {
        let r = degree_refinement(&k4()).unwrap();
        assert_eq!(r.matrix, vec![vec![3]]);
        assert_eq!(r.classes.len(), 1);

        let mut b = GraphBuilder::new("p3");
        b.vertex("x").vertex("y").vertex("z");
        b.edge("e1", "x", "y").edge("e2", "y", "z");
        let p3 = b.build().unwrap();
        let r = degree_refinement(&p3).unwrap();
        assert_eq!(r.matrix, vec![vec![0, 1], vec![2, 0]]);
        assert_eq!(r.classes[0], vec!["x".to_string(), "z".to_string()]);
        assert_eq!(r.classes[1], vec!["y".to_string()]);
        // row sums equal the class degree
        assert_eq!(r.matrix[0].iter().sum::<usize>(), 1);
        assert_eq!(r.matrix[1].iter().sum::<usize>(), 2);
    }

    #[test]
    fn same_cover_k4_k33() {
        assert!(same_universal_cover(&k4(), &k33()).unwrap());
        assert!(same_universal_cover(&k4(), &k4()).unwrap());
        assert!(!same_universal_cover(&loop_graph(), &Graph::rose(2)).unwrap());
    }

    #[test]
    fn fiber_product_with_identity() {
        let m = double_cover_of_loop();
        let id = GraphMorphism::identity(&m.target);
        let (prod, pr1, pr2) = fiber_product(&m, &id).unwrap();
        assert_eq!(prod.vertex_count(), m.source.vertex_count());
        assert_eq!(prod.dart_count(), m.source.dart_count());
        assert_eq!(
            crate::canon::canonical_code(&prod),
            crate::canon::canonical_code(&m.source)
        );
        assert!(pr1.is_valid() && pr2.is_valid());
    }

    #[test]
    fn fiber_product_of_double_covers() {
        let m1 = double_cover_of_loop();
        let m2 = double_cover_of_loop();
        let (prod, pr1, pr2) = fiber_product(&m1, &m2).unwrap();
        assert_eq!(prod.vertex_count(), 4);
        let comps = prod.components();
        assert_eq!(comps.len(), 2);
        assert!(pr1.is_valid());
        // degrees multiply: the projection onto one factor is a covering
        // whose degree equals the degree of the other factor
        let r1 = analyze_covering(&pr1);
        let r2 = analyze_covering(&pr2);
        assert!(r1.is_covering && r2.is_covering);
        assert_eq!(r1.degree, Some(2));
        assert_eq!(r2.degree, Some(2));
    }

    #[test]
    fn common_cover_trivial() {
        let g = loop_graph();
        match find_common_cover(&g, &g, 1, 1).unwrap() {
            CommonCoverOutcome::Found { z, p1, p2 } => {
                assert_eq!(z.vertex_count(), 1);
                assert_eq!(analyze_covering(&p1).degree, Some(1));
                assert_eq!(analyze_covering(&p2).degree, Some(1));
            }
            other => panic!("expected a certificate, got {other:?}"),
        }
    }

    #[test]
    fn common_cover_definite_no() {
        match find_common_cover(&loop_graph(), &Graph::rose(2), 50, 1).unwrap() {
            CommonCoverOutcome::NoneExists { .. } => {}
            other => panic!("expected definite no, got {other:?}"),
        }
    }

    #[test]
    fn permutation_enumeration() {
        let mut p = vec![0, 1, 2];
        let mut count = 1;
        while next_permutation(&mut p) {
            count += 1;
        }
        assert_eq!(count, 6);
        assert!(all_even_orbits(&[1, 0, 3, 2]));
        assert!(!all_even_orbits(&[0, 2, 1]));
    }
}

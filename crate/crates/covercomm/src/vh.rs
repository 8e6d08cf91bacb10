//! Square complexes with vertical/horizontal edge partitions, horizontal
//! subgraphs, the cross-section graph with its two projections, and
//! extraction of the induced commensuration.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use crate::amalgam::Commensuration;
use crate::covering::{analyze_covering, fold, CoveringReport};
use crate::error::{Error, Result};
use crate::graph::{Dart, Graph, GraphMorphism};
use crate::word::{Letter, Word};

/// A 2-complex whose 2-cells are squares, given by its 1-skeleton and the
/// squares as closed length-4 dart sequences.
#[derive(Clone, Debug)]
pub struct SquareComplex {
    pub skeleton: Graph,
    pub squares: Vec<[usize; 4]>,
}

impl SquareComplex {
    pub fn new(skeleton: Graph, square_ids: &[[String; 4]]) -> Result<SquareComplex> {
        let mut squares = Vec::with_capacity(square_ids.len());
        for (k, ids) in square_ids.iter().enumerate() {
            let mut darts = [0usize; 4];
            for (i, id) in ids.iter().enumerate() {
                darts[i] = skeleton.dart_index(id).ok_or_else(|| {
                    Error::Complex(format!("square {k}: unknown dart {id:?}"))
                })?;
            }
            check_closure(&skeleton, k, &darts)?;
            squares.push(darts);
        }
        Ok(SquareComplex { skeleton, squares })
    }

    /// Relator input: each letter is an edge identifier (lowercase forward,
    /// uppercase reversed); the word must be a closed path of length 4.
    pub fn from_relators(skeleton: Graph, relators: &[String]) -> Result<SquareComplex> {
        let mut squares = Vec::with_capacity(relators.len());
        for (k, rel) in relators.iter().enumerate() {
            if rel.chars().count() != 4 {
                return Err(Error::Complex(format!(
                    "relator {rel:?} does not have length 4"
                )));
            }
            let mut darts = [0usize; 4];
            for (i, c) in rel.chars().enumerate() {
                let l = Letter::from_char(c).ok_or_else(|| {
                    Error::Complex(format!("relator {rel:?}: invalid letter {c:?}"))
                })?;
                let id = if l.inv {
                    format!("{}'", l.inverse().to_char())
                } else {
                    l.to_char().to_string()
                };
                darts[i] = skeleton.dart_index(&id).ok_or_else(|| {
                    Error::Complex(format!("relator {rel:?}: unknown edge label {c:?}"))
                })?;
            }
            check_closure(&skeleton, k, &darts)?;
            squares.push(darts);
        }
        Ok(SquareComplex { skeleton, squares })
    }

    pub fn square_count(&self) -> usize {
        self.squares.len()
    }
}

fn check_closure(g: &Graph, k: usize, darts: &[usize; 4]) -> Result<()> {
    for i in 0..4 {
        let next = darts[(i + 1) % 4];
        if g.terminus(darts[i]) != g.origin(next) {
            return Err(Error::Complex(format!(
                "square {k} does not close up: dart {:?} ends at {:?} but {:?} starts at {:?}",
                g.dart(darts[i]).id,
                g.vertex_id(g.terminus(darts[i])),
                g.dart(next).id,
                g.vertex_id(g.origin(next)),
            )));
        }
    }
    Ok(())
}

/// Partition of the geometric edges into vertical and horizontal classes
/// (canonical darts).
#[derive(Clone, Debug)]
pub struct VHPartition {
    pub vertical: BTreeSet<usize>,
    pub horizontal: BTreeSet<usize>,
}

impl VHPartition {
    pub fn vertical_ids(&self, g: &Graph) -> Vec<String> {
        self.vertical.iter().map(|&d| g.dart(d).id.clone()).collect()
    }

    pub fn horizontal_ids(&self, g: &Graph) -> Vec<String> {
        self.horizontal.iter().map(|&d| g.dart(d).id.clone()).collect()
    }
}

#[derive(Clone, Debug)]
pub enum VhOutcome {
    Vh(VHPartition),
    /// Witness: an odd cycle of adjacency constraints, as edge identifiers.
    NotVh { witness: Vec<String> },
}

/// Closes "same orientation iff on opposite sides of a square" to an
/// equivalence, then 2-colors the classes so adjacent sides get different
/// classes; `vertical` is the side containing the least edge identifier of
/// each constraint component (or the override edge's side).
pub fn vh_partition(sc: &SquareComplex, vertical_override: Option<&str>) -> Result<VhOutcome> {
    let g = &sc.skeleton;
    let ne = g.edge_count();
    let edge_index: BTreeMap<usize, usize> = g
        .geometric_edges()
        .enumerate()
        .map(|(i, (d, _))| (d, i))
        .collect();
    let canonical: Vec<usize> = g.geometric_edges().map(|(d, _)| d).collect();
    let eix = |dart: usize| -> usize {
        let c = dart.min(g.involution(dart));
        edge_index[&c]
    };

    // union opposite sides
    let mut parent: Vec<usize> = (0..ne).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        if parent[x] != x {
            let r = find(parent, parent[x]);
            parent[x] = r;
        }
        parent[x]
    }
    for sq in &sc.squares {
        for (a, b) in [(0usize, 2usize), (1, 3)] {
            let (ra, rb) = (find(&mut parent, eix(sq[a])), find(&mut parent, eix(sq[b])));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }

    // adjacency constraints between classes
    let mut constraints: Vec<(usize, usize, usize)> = Vec::new(); // (class, class, square)
    for (k, sq) in sc.squares.iter().enumerate() {
        for i in 0..4 {
            let a = find(&mut parent, eix(sq[i]));
            let b = find(&mut parent, eix(sq[(i + 1) % 4]));
            constraints.push((a, b, k));
        }
    }

    // 2-coloring with witness extraction
    let mut adj: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(a, b, _) in &constraints {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut color: BTreeMap<usize, u8> = BTreeMap::new();
    let mut bfs_parent: BTreeMap<usize, usize> = BTreeMap::new();
    let classes: BTreeSet<usize> = (0..ne).map(|e| find(&mut parent, e)).collect();
    for &root in &classes {
        if color.contains_key(&root) {
            continue;
        }
        color.insert(root, 0);
        let mut queue = VecDeque::from([root]);
        while let Some(c) = queue.pop_front() {
            let cc = color[&c];
            for &n in adj.get(&c).into_iter().flatten() {
                match color.get(&n) {
                    None => {
                        color.insert(n, 1 - cc);
                        bfs_parent.insert(n, c);
                        queue.push_back(n);
                    }
                    Some(&nc) if nc == cc => {
                        // odd cycle: paths to the root plus the bad constraint
                        let witness = odd_cycle_witness(g, &canonical, &parent, &bfs_parent, c, n);
                        return Ok(VhOutcome::NotVh { witness });
                    }
                    _ => {}
                }
            }
        }
    }

    // per component, the side containing the least edge id is vertical
    let mut vertical: BTreeSet<usize> = BTreeSet::new();
    let mut horizontal: BTreeSet<usize> = BTreeSet::new();
    // constraint components: group classes by their coloring root
    let mut comp_of: BTreeMap<usize, usize> = BTreeMap::new();
    for &root in &classes {
        if comp_of.contains_key(&root) {
            continue;
        }
        let mut queue = VecDeque::from([root]);
        comp_of.insert(root, root);
        while let Some(c) = queue.pop_front() {
            for &n in adj.get(&c).into_iter().flatten() {
                if let std::collections::btree_map::Entry::Vacant(e) = comp_of.entry(n) {
                    e.insert(root);
                    queue.push_back(n);
                }
            }
        }
    }
    // least edge id per component, or the override edge
    let mut vertical_color: BTreeMap<usize, u8> = BTreeMap::new();
    if let Some(id) = vertical_override {
        let dart = g
            .dart_index(id)
            .or_else(|| g.dart_index(&format!("{id}'")))
            .ok_or_else(|| Error::Complex(format!("unknown edge {id:?} in vertical override")))?;
        let class = find(&mut parent, eix(dart));
        vertical_color.insert(comp_of[&class], color[&class]);
    }
    for e in 0..ne {
        let class = find(&mut parent, e);
        let comp = comp_of[&class];
        vertical_color.entry(comp).or_insert(color[&class]);
    }
    for e in 0..ne {
        let class = find(&mut parent, e);
        if color[&class] == vertical_color[&comp_of[&class]] {
            vertical.insert(canonical[e]);
        } else {
            horizontal.insert(canonical[e]);
        }
    }
    Ok(VhOutcome::Vh(VHPartition { vertical, horizontal }))
}

fn odd_cycle_witness(
    g: &Graph,
    canonical: &[usize],
    parent: &[usize],
    bfs_parent: &BTreeMap<usize, usize>,
    c: usize,
    n: usize,
) -> Vec<String> {
    let path_to_root = |mut x: usize| -> Vec<usize> {
        let mut p = vec![x];
        while let Some(&px) = bfs_parent.get(&x) {
            p.push(px);
            x = px;
        }
        p
    };
    let pa = path_to_root(c);
    let pb = path_to_root(n);
    // trim the common suffix down to the LCA
    let mut ia = pa.len();
    let mut ib = pb.len();
    while ia > 1 && ib > 1 && pa[ia - 2] == pb[ib - 2] {
        ia -= 1;
        ib -= 1;
    }
    let mut cycle: Vec<usize> = pa[..ia].to_vec();
    cycle.extend(pb[..ib].iter().rev());
    // name each class by a representative edge
    cycle
        .iter()
        .map(|&class| {
            let rep = (0..parent.len())
                .find(|&e| {
                    let mut x = e;
                    while parent[x] != x {
                        x = parent[x];
                    }
                    x == class
                })
                .unwrap();
            g.dart(canonical[rep]).id.clone()
        })
        .collect()
}

/// The subgraph on horizontal edges plus its connected components (as
/// canonical vertex-id lists).
pub fn horizontal_subgraph(
    sc: &SquareComplex,
    part: &VHPartition,
) -> Result<(Graph, Vec<Vec<String>>)> {
    let sub = sc.skeleton.edge_subgraph("horizontal", &part.horizontal)?;
    let comps = sub
        .components()
        .into_iter()
        .map(|c| c.into_iter().map(|v| sub.vertex_id(v).to_string()).collect())
        .collect();
    Ok((sub, comps))
}

/// The cross-section: one vertex per vertical edge midpoint, one edge per
/// square, projecting to the two horizontal sides.
#[derive(Clone, Debug)]
pub struct CrossSection {
    pub z: Graph,
    pub p1: GraphMorphism,
    pub p2: GraphMorphism,
}

pub fn cross_section(sc: &SquareComplex, part: &VHPartition) -> Result<CrossSection> {
    let g = &sc.skeleton;
    let (hsub, comps) = horizontal_subgraph(sc, part)?;
    if sc.squares.is_empty() {
        return Err(Error::Complex("cross-section of a complex without squares".into()));
    }

    // z vertices: vertical edges, named by edge id (sorted)
    let vert_ids: Vec<String> = part.vertical.iter().map(|&d| g.dart(d).id.clone()).collect();
    let zv_index: BTreeMap<usize, usize> = part
        .vertical
        .iter()
        .enumerate()
        .map(|(i, &d)| (d, i))
        .collect();
    let z_vertex_of = |dart: usize| -> Result<usize> {
        let c = dart.min(g.involution(dart));
        zv_index.get(&c).copied().ok_or_else(|| {
            Error::Complex(format!(
                "dart {:?} expected to be vertical",
                g.dart(dart).id
            ))
        })
    };

    // normalize each square to (vertical, horizontal, vertical, horizontal)
    // starting at its least vertical dart
    struct NormSquare {
        v1: usize,
        h1: usize,
        v2: usize,
        h2: usize,
    }
    let mut norm: Vec<NormSquare> = Vec::with_capacity(sc.squares.len());
    for (k, sq) in sc.squares.iter().enumerate() {
        let is_vert = |d: usize| part.vertical.contains(&d.min(g.involution(d)));
        let pattern: Vec<bool> = sq.iter().map(|&d| is_vert(d)).collect();
        let r = match pattern.as_slice() {
            [true, false, true, false] => 0usize,
            [false, true, false, true] => 1,
            _ => {
                return Err(Error::Complex(format!(
                    "square {k} does not alternate vertical/horizontal sides"
                )))
            }
        };
        let rot = |off: usize| sq[(r + off) % 4];
        // two vertical starts: positions r and r+2; pick the least dart id
        let start = if g.dart(rot(0)).id <= g.dart(rot(2)).id { 0 } else { 2 };
        norm.push(NormSquare {
            v1: sq[(r + start) % 4],
            h1: sq[(r + start + 1) % 4],
            v2: sq[(r + start + 2) % 4],
            h2: sq[(r + start + 3) % 4],
        });
    }

    // component assignment: side-1 components constant over squares, and
    // likewise side-2
    let comp_of_vertex = |vid: &str| -> Option<usize> {
        comps.iter().position(|c| c.iter().any(|x| x == vid))
    };
    let comp_of_dart = |d: usize| -> Result<usize> {
        let vid = hsub.vertex_id(
            hsub.vertex_index(g.vertex_id(g.origin(d)))
                .ok_or_else(|| Error::Complex("horizontal side misses the horizontal subgraph".into()))?,
        );
        comp_of_vertex(vid).ok_or_else(|| Error::Complex("component lookup failed".into()))
    };
    let mut side1_comp: Option<usize> = None;
    let mut side2_comp: Option<usize> = None;
    for (k, ns) in norm.iter().enumerate() {
        let c1 = comp_of_dart(ns.h1)?;
        let c2 = comp_of_dart(ns.h2)?;
        match side1_comp {
            None => side1_comp = Some(c1),
            Some(c) if c != c1 => {
                return Err(Error::Complex(format!(
                    "squares mix components: square {k} has side 1 in component {c1}, expected {c}"
                )))
            }
            _ => {}
        }
        match side2_comp {
            None => side2_comp = Some(c2),
            Some(c) if c != c2 => {
                return Err(Error::Complex(format!(
                    "squares mix components: square {k} has side 2 in component {c2}, expected {c}"
                )))
            }
            _ => {}
        }
    }
    let x1 = component_subgraph(&hsub, &comps[side1_comp.unwrap()], "X1")?;
    let x2 = component_subgraph(&hsub, &comps[side2_comp.unwrap()], "X2")?;

    // z edges: one per square
    let ew = sc.squares.len().max(2).to_string().len();
    let mut z_darts: Vec<Dart> = Vec::with_capacity(2 * norm.len());
    for (k, ns) in norm.iter().enumerate() {
        let from = z_vertex_of(ns.v1)?;
        let to = z_vertex_of(ns.v2)?;
        z_darts.push(Dart {
            id: format!("s{k:0ew$}"),
            origin: from,
            inv: 2 * k + 1,
            label: None,
        });
        z_darts.push(Dart {
            id: format!("s{k:0ew$}'"),
            origin: to,
            inv: 2 * k,
            label: None,
        });
    }
    // vert_ids are sorted already (BTreeSet iteration over sorted dart ids
    // is not id-sorted in general, so sort with a permutation)
    let mut order: Vec<usize> = (0..vert_ids.len()).collect();
    order.sort_by(|&a, &b| vert_ids[a].cmp(&vert_ids[b]));
    let mut pos = vec![0usize; vert_ids.len()];
    for (new, &old) in order.iter().enumerate() {
        pos[old] = new;
    }
    let sorted_ids: Vec<String> = order.iter().map(|&o| vert_ids[o].clone()).collect();
    for d in &mut z_darts {
        d.origin = pos[d.origin];
    }
    let z = Graph::from_parts("Z".into(), sorted_ids, z_darts)?;

    // assemble the two morphisms; vmap consistency is enforced square by
    // square
    let mut vmap1: Vec<Option<usize>> = vec![None; z.vertex_count()];
    let mut vmap2: Vec<Option<usize>> = vec![None; z.vertex_count()];
    let mut dmap1: Vec<usize> = vec![usize::MAX; z.dart_count()];
    let mut dmap2: Vec<usize> = vec![usize::MAX; z.dart_count()];
    let x1_vertex = |v: usize| -> Result<usize> {
        x1.vertex_index(g.vertex_id(v))
            .ok_or_else(|| Error::Complex("side-1 vertex missing from X1".into()))
    };
    let x2_vertex = |v: usize| -> Result<usize> {
        x2.vertex_index(g.vertex_id(v))
            .ok_or_else(|| Error::Complex("side-2 vertex missing from X2".into()))
    };
    let x1_dart = |d: usize| -> Result<usize> {
        x1.dart_index(&g.dart(d).id)
            .ok_or_else(|| Error::Complex("side-1 dart missing from X1".into()))
    };
    let x2_dart = |d: usize| -> Result<usize> {
        x2.dart_index(&g.dart(d).id)
            .ok_or_else(|| Error::Complex("side-2 dart missing from X2".into()))
    };
    let assign = |slot: &mut Option<usize>, value: usize, what: &str, k: usize| -> Result<()> {
        match slot {
            None => {
                *slot = Some(value);
                Ok(())
            }
            Some(v) if *v == value => Ok(()),
            Some(_) => Err(Error::Complex(format!(
                "square {k}: inconsistent {what} assignment at a vertical edge midpoint"
            ))),
        }
    };
    for (k, ns) in norm.iter().enumerate() {
        let ew_dart = z.dart_index(&format!("s{k:0ew$}")).unwrap();
        let m1 = z_vertex_of(ns.v1)?;
        let m2 = z_vertex_of(ns.v2)?;
        let (zm1, zm2) = (pos[m1], pos[m2]);
        // p1 sends the edge to the first horizontal side
        dmap1[ew_dart] = x1_dart(ns.h1)?;
        dmap1[z.involution(ew_dart)] = x1.involution(dmap1[ew_dart]);
        assign(&mut vmap1[zm1], x1_vertex(g.origin(ns.h1))?, "p1 vertex", k)?;
        assign(&mut vmap1[zm2], x1_vertex(g.terminus(ns.h1))?, "p1 vertex", k)?;
        // p2 sends it to the second horizontal side, reversed
        let h2r = g.involution(ns.h2);
        dmap2[ew_dart] = x2_dart(h2r)?;
        dmap2[z.involution(ew_dart)] = x2.involution(dmap2[ew_dart]);
        assign(&mut vmap2[zm1], x2_vertex(g.origin(h2r))?, "p2 vertex", k)?;
        assign(&mut vmap2[zm2], x2_vertex(g.terminus(h2r))?, "p2 vertex", k)?;
    }
    let vmap1: Result<Vec<usize>> = vmap1
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                Error::Complex(format!(
                    "vertical edge {:?} lies in no square",
                    z.vertex_id(i)
                ))
            })
        })
        .collect();
    let vmap2: Result<Vec<usize>> = vmap2
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                Error::Complex(format!(
                    "vertical edge {:?} lies in no square",
                    z.vertex_id(i)
                ))
            })
        })
        .collect();

    let p1 = GraphMorphism::from_indices(z.clone(), x1, vmap1?, dmap1);
    let p2 = GraphMorphism::from_indices(z.clone(), x2, vmap2?, dmap2);
    let viol1 = p1.validate();
    if !viol1.is_empty() {
        return Err(Error::Complex(format!(
            "projection p1 is not a morphism: {}",
            viol1[0]
        )));
    }
    let viol2 = p2.validate();
    if !viol2.is_empty() {
        return Err(Error::Complex(format!(
            "projection p2 is not a morphism: {}",
            viol2[0]
        )));
    }
    Ok(CrossSection { z, p1, p2 })
}

fn component_subgraph(hsub: &Graph, comp: &[String], name: &str) -> Result<Graph> {
    let verts: BTreeSet<usize> = comp
        .iter()
        .map(|id| hsub.vertex_index(id).expect("component ids come from hsub"))
        .collect();
    let mut g = hsub.vertex_subgraph(name, &verts)?;
    g.set_name(name);
    Ok(g)
}

/// Full diagnostic pass: partition, cross-section, covering analysis of
/// both projections, Euler characteristic and rank bookkeeping, and the
/// fold diagnostics (0 folds iff locally injective).
#[derive(Clone, Debug)]
pub struct CrossSectionReport {
    pub partition: VHPartition,
    pub cross_section: CrossSection,
    pub report1: CoveringReport,
    pub report2: CoveringReport,
    pub folds1: usize,
    pub folds2: usize,
    pub chi: i64,
    pub rank: Option<i64>,
}

impl fmt::Display for CrossSectionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "z: {} vertices, {} edges, chi = {}, rank = {}",
            self.cross_section.z.vertex_count(),
            self.cross_section.z.edge_count(),
            self.chi,
            self.rank.map_or("n/a".into(), |r| r.to_string()),
        )?;
        for (i, (rep, folds)) in [(&self.report1, self.folds1), (&self.report2, self.folds2)]
            .iter()
            .enumerate()
        {
            write!(
                f,
                "p{}: covering = {}, degree = {}, folds = {folds}",
                i + 1,
                rep.is_covering,
                rep.degree.map_or("n/a".into(), |d| d.to_string()),
            )?;
            for (v, kind) in &rep.violations {
                write!(f, "\n  violation at vertex {v:?}: {kind}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn analyze_cross_section(sc: &SquareComplex, vertical_override: Option<&str>) -> Result<CrossSectionReport> {
    let partition = match vh_partition(sc, vertical_override)? {
        VhOutcome::Vh(p) => p,
        VhOutcome::NotVh { witness } => {
            return Err(Error::Complex(format!(
                "complex is not VH: inconsistent orientation cycle through edges {}",
                witness.join(" ~ ")
            )))
        }
    };
    let cs = cross_section(sc, &partition)?;
    let report1 = analyze_covering(&cs.p1);
    let report2 = analyze_covering(&cs.p2);
    let (_, _, folds1) = fold(&cs.p1)?;
    let (_, _, folds2) = fold(&cs.p2)?;
    let chi = cs.z.euler_characteristic();
    let rank = cs.z.free_rank().ok();
    Ok(CrossSectionReport {
        partition,
        cross_section: cs,
        report1,
        report2,
        folds1,
        folds2,
        chi,
        rank,
    })
}

/// Reads the induced commensuration off a cross-section whose projections
/// are coverings: `pi1(X1) <- pi1(Z) -> pi1(X2)` with word-level images of
/// a common basis of `pi1(Z)`.
pub fn commensuration_from_cross_section(cs: &CrossSection) -> Result<Commensuration> {
    if !cs.z.is_connected() {
        return Err(Error::Disconnected("cross-section graph".into()));
    }
    let rep1 = analyze_covering(&cs.p1);
    let rep2 = analyze_covering(&cs.p2);
    if !rep1.is_covering || !rep2.is_covering {
        return Err(Error::Complex(
            "induced commensuration requires both projections to be coverings".into(),
        ));
    }

    let free1 = FreeStructure::new(&cs.p1.target)?;
    let free2 = FreeStructure::new(&cs.p2.target)?;

    // basis loops of pi1(Z) from the canonical spanning tree
    let (order, parent) = bfs_tree(&cs.z, 0);
    if order.len() != cs.z.vertex_count() {
        return Err(Error::Disconnected("cross-section graph".into()));
    }
    let mut path: Vec<Vec<usize>> = vec![Vec::new(); cs.z.vertex_count()];
    for &v in &order {
        if let Some((pv, d)) = parent[v] {
            let mut p = path[pv].clone();
            p.push(d);
            path[v] = p;
        }
    }
    let mut tree_darts = vec![false; cs.z.dart_count()];
    for p in parent.iter().flatten() {
        tree_darts[p.1] = true;
        tree_darts[cs.z.involution(p.1)] = true;
    }
    let mut i1_images = Vec::new();
    let mut i2_images = Vec::new();
    for (d, _) in cs.z.geometric_edges() {
        if tree_darts[d] {
            continue;
        }
        let mut loop_darts: Vec<usize> = path[cs.z.origin(d)].clone();
        loop_darts.push(d);
        loop_darts.extend(path[cs.z.terminus(d)].iter().rev().map(|&x| cs.z.involution(x)));
        i1_images.push(free1.word_of_mapped_loop(&cs.p1, &loop_darts)?);
        i2_images.push(free2.word_of_mapped_loop(&cs.p2, &loop_darts)?);
    }

    let h_rank = cs.z.free_rank()? as usize;
    Commensuration::new(
        h_rank,
        free1.rank,
        free2.rank,
        i1_images,
        i2_images,
    )
}

/// Free-group coordinates on a connected graph: a canonical spanning tree
/// plus one generator per non-tree edge.
struct FreeStructure {
    rank: usize,
    letter_of_dart: BTreeMap<usize, Letter>,
    path_to_base: Vec<Vec<usize>>, // tree darts from base to each vertex
}

impl FreeStructure {
    fn new(g: &Graph) -> Result<FreeStructure> {
        let (order, parent) = bfs_tree(g, 0);
        if order.len() != g.vertex_count() {
            return Err(Error::Disconnected(format!("graph {:?}", g.name())));
        }
        let mut path: Vec<Vec<usize>> = vec![Vec::new(); g.vertex_count()];
        for &v in &order {
            if let Some((pv, d)) = parent[v] {
                let mut p = path[pv].clone();
                p.push(d);
                path[v] = p;
            }
        }
        let mut tree_darts = vec![false; g.dart_count()];
        for p in parent.iter().flatten() {
            tree_darts[p.1] = true;
            tree_darts[g.involution(p.1)] = true;
        }
        let mut letter_of_dart = BTreeMap::new();
        let mut rank = 0usize;
        for (d, inv) in g.geometric_edges() {
            if tree_darts[d] {
                continue;
            }
            let l = Letter::new(rank as u8, false);
            letter_of_dart.insert(d, l);
            letter_of_dart.insert(inv, l.inverse());
            rank += 1;
        }
        Ok(FreeStructure {
            rank,
            letter_of_dart,
            path_to_base: path,
        })
    }

    /// The word of a walk given as darts in this graph.
    fn word_of_walk(&self, darts: &[usize]) -> Word {
        Word::from_letters(
            darts
                .iter()
                .filter_map(|d| self.letter_of_dart.get(d).copied()),
        )
    }

    /// The word of the image of a z-loop, conjugated back to the base
    /// vertex of the target.
    fn word_of_mapped_loop(&self, p: &GraphMorphism, loop_darts: &[usize]) -> Result<Word> {
        let image: Vec<usize> = loop_darts.iter().map(|&d| p.dmap[d]).collect();
        let start = p.vmap[p.source.origin(
            *loop_darts.first().expect("basis loops are nonempty"),
        )];
        let prefix = self.word_of_walk(&self.path_to_base[start]);
        let body = self.word_of_walk(&image);
        Ok(prefix.concat(&body).concat(&prefix.inverse()))
    }
}

fn bfs_tree(g: &Graph, base: usize) -> (Vec<usize>, Vec<Option<(usize, usize)>>) {
    let n = g.vertex_count();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    seen[base] = true;
    order.push(base);
    let mut queue = VecDeque::from([base]);
    while let Some(v) = queue.pop_front() {
        for &d in g.darts_at(v) {
            let t = g.terminus(d);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    pub(crate) fn torus() -> SquareComplex {
        let mut b = GraphBuilder::new("torus");
        b.vertex("v");
        b.edge("a", "v", "v");
        b.edge("b", "v", "v");
        let g = b.build().unwrap();
        SquareComplex::from_relators(g, &["abAB".to_string()]).unwrap()
    }

    #[test]
    fn torus_build() {
        let sc = torus();
        assert_eq!(sc.square_count(), 1);
        // klein-type relator also closes at the single vertex
        let g = sc.skeleton.clone();
        assert!(SquareComplex::from_relators(g, &["abab".to_string()]).is_ok());
    }

    #[test]
    fn relator_errors() {
        let mut b = GraphBuilder::new("rose3");
        b.vertex("v");
        b.edge("a", "v", "v");
        b.edge("b", "v", "v");
        b.edge("c", "v", "v");
        let g = b.build().unwrap();
        // length-4 with c works
        assert!(SquareComplex::from_relators(g.clone(), &["abcA".into()]).is_ok());
        // unknown label
        assert!(SquareComplex::from_relators(g.clone(), &["abdA".into()]).is_err());
        // wrong length
        assert!(SquareComplex::from_relators(g, &["abA".into()]).is_err());
    }

    #[test]
    fn non_closing_square_rejected() {
        let mut b = GraphBuilder::new("path");
        b.vertex("u").vertex("v");
        b.edge("a", "u", "v");
        b.edge("b", "u", "v");
        let g = b.build().unwrap();
        // a then b does not close (both run u -> v)
        assert!(SquareComplex::new(
            g,
            &[[
                "a".to_string(),
                "b".to_string(),
                "a'".to_string(),
                "b'".to_string()
            ]]
        )
        .is_err());
    }

    #[test]
    fn torus_partition() {
        let sc = torus();
        match vh_partition(&sc, None).unwrap() {
            VhOutcome::Vh(p) => {
                assert_eq!(p.vertical_ids(&sc.skeleton), vec!["a"]);
                assert_eq!(p.horizontal_ids(&sc.skeleton), vec!["b"]);
            }
            VhOutcome::NotVh { .. } => panic!("torus is VH"),
        }
        // override flips the designation
        match vh_partition(&sc, Some("b")).unwrap() {
            VhOutcome::Vh(p) => {
                assert_eq!(p.vertical_ids(&sc.skeleton), vec!["b"]);
            }
            VhOutcome::NotVh { .. } => panic!(),
        }
    }

    #[test]
    fn aabb_not_vh() {
        let mut b = GraphBuilder::new("g");
        b.vertex("v");
        b.edge("a", "v", "v");
        b.edge("b", "v", "v");
        let g = b.build().unwrap();
        let sc = SquareComplex::from_relators(g, &["aabb".to_string()]).unwrap();
        match vh_partition(&sc, None).unwrap() {
            VhOutcome::NotVh { witness } => assert!(!witness.is_empty()),
            VhOutcome::Vh(_) => panic!("aabb forces a ~ b with adjacency, not VH"),
        }
    }

    #[test]
    fn two_square_partition() {
        let mut b = GraphBuilder::new("g");
        b.vertex("v");
        for e in ["a", "b", "c"] {
            b.edge(e, "v", "v");
        }
        let g = b.build().unwrap();
        let sc = SquareComplex::from_relators(g, &["abAB".into(), "cbCB".into()]).unwrap();
        match vh_partition(&sc, None).unwrap() {
            VhOutcome::Vh(p) => {
                assert_eq!(p.vertical_ids(&sc.skeleton), vec!["a", "c"]);
                assert_eq!(p.horizontal_ids(&sc.skeleton), vec!["b"]);
            }
            VhOutcome::NotVh { .. } => panic!(),
        }
    }

    #[test]
    fn torus_cross_section() {
        let sc = torus();
        let report = analyze_cross_section(&sc, None).unwrap();
        assert_eq!(report.cross_section.z.vertex_count(), 1);
        assert_eq!(report.cross_section.z.edge_count(), 1);
        assert!(report.report1.is_covering && report.report2.is_covering);
        assert_eq!(report.report1.degree, Some(1));
        assert_eq!((report.folds1, report.folds2), (0, 0));
        let c = commensuration_from_cross_section(&report.cross_section).unwrap();
        let v = c.validate();
        assert!(v.is_valid());
        assert_eq!((v.index1, v.index2), (Some(1), Some(1)));
        assert!(v.trivial);
    }

    #[test]
    fn two_layer_complex() {
        // vertical edge a joins the two b/c loop layers
        let mut b = GraphBuilder::new("g");
        b.vertex("u").vertex("w");
        b.edge("a", "u", "w");
        b.edge("b", "u", "u");
        b.edge("c", "w", "w");
        let g = b.build().unwrap();
        let sc = SquareComplex::new(
            g,
            &[[
                "a".to_string(),
                "c".to_string(),
                "a'".to_string(),
                "b'".to_string(),
            ]],
        )
        .unwrap();
        let part = match vh_partition(&sc, None).unwrap() {
            VhOutcome::Vh(p) => p,
            _ => panic!(),
        };
        assert_eq!(part.vertical_ids(&sc.skeleton), vec!["a"]);
        let (hsub, comps) = horizontal_subgraph(&sc, &part).unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(hsub.edge_count(), 2);
        let cs = cross_section(&sc, &part).unwrap();
        assert_eq!(cs.z.vertex_count(), 1);
        assert_eq!(cs.z.edge_count(), 1);
        // the two projections land in different layers
        assert_ne!(cs.p1.target.vertex_ids(), cs.p2.target.vertex_ids());
        assert!(analyze_covering(&cs.p1).is_covering);
        assert!(analyze_covering(&cs.p2).is_covering);
    }

    #[test]
    fn cross_section_counts_contract() {
        // 20 vertical edges and 100 squares give |V(z)| = 20, |E(z)| = 100,
        // chi(z) = -80 and rank 81
        let mut b = GraphBuilder::new("big");
        b.vertex("v");
        for i in 0..20 {
            b.edge(format!("a{i:02}"), "v", "v");
        }
        b.edge("zb", "v", "v");
        let g = b.build().unwrap();
        let mut squares: Vec<[String; 4]> = Vec::new();
        for k in 0..100usize {
            let (i, j) = if k < 20 {
                (k, (k + 1) % 20) // a cycle through the midpoints keeps z connected
            } else {
                (k % 20, (k * 7 + 3) % 20)
            };
            squares.push([
                format!("a{i:02}"),
                "zb".to_string(),
                format!("a{j:02}'"),
                "zb'".to_string(),
            ]);
        }
        let sc = SquareComplex::new(g, &squares).unwrap();
        let part = match vh_partition(&sc, None).unwrap() {
            VhOutcome::Vh(p) => p,
            _ => panic!("complex is VH"),
        };
        assert_eq!(part.vertical.len(), 20);
        let cs = cross_section(&sc, &part).unwrap();
        assert_eq!(cs.z.vertex_count(), 20);
        assert_eq!(cs.z.edge_count(), 100);
        assert_eq!(cs.z.euler_characteristic(), -80);
        assert_eq!(cs.z.free_rank().unwrap(), 81);
    }

    #[test]
    fn no_horizontal_edges_degenerate() {
        let mut b = GraphBuilder::new("g");
        b.vertex("v");
        b.edge("a", "v", "v");
        let g = b.build().unwrap();
        let sc = SquareComplex { skeleton: g, squares: Vec::new() };
        let part = VHPartition {
            vertical: sc.skeleton.geometric_edges().map(|(d, _)| d).collect(),
            horizontal: BTreeSet::new(),
        };
        let (hsub, comps) = horizontal_subgraph(&sc, &part).unwrap();
        assert_eq!(hsub.vertex_count(), 0);
        assert_eq!(comps.len(), 0);
    }

    #[test]
    fn corrupted_square_list_fails_local_injectivity() {
        // two squares forcing two z-loops over the same b-dart
        let mut b = GraphBuilder::new("g");
        b.vertex("v");
        b.edge("a", "v", "v");
        b.edge("b", "v", "v");
        let g = b.build().unwrap();
        let sc = SquareComplex::from_relators(g, &["abAB".into(), "abAB".into()]).unwrap();
        let report = analyze_cross_section(&sc, None).unwrap();
        assert!(!report.report1.is_covering);
        assert!(report
            .report1
            .violations
            .iter()
            .any(|(v, k)| v == "a" && *k == crate::covering::LocalViolation::NotLocallyInjective));
        assert!(report.folds1 > 0);
    }
}

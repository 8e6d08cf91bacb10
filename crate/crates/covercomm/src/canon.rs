//! Canonical forms of finite graphs up to isomorphism.
//!
//! Color refinement plus individualization, minimizing the adjacency code
//! over the leaves of the refinement tree. Complete for multigraphs with
//! loops, with or without dart labels. Intended for desk-scale graphs
//! (isomorph rejection in the cover search, structural equality in tests).

use crate::graph::Graph;

/// Adjacency form used by the canonizer: per vertex, a list of
/// `(neighbor, label_code)` entries, one per dart (loops contribute two).
#[derive(Clone, Debug)]
pub struct RawAdjacency {
    pub n: usize,
    pub adj: Vec<Vec<(usize, u32)>>,
}

impl RawAdjacency {
    pub fn from_graph(g: &Graph) -> RawAdjacency {
        let mut adj = vec![Vec::new(); g.vertex_count()];
        for (d, dart) in g.darts().iter().enumerate() {
            let label = dart
                .label
                .map(|l| l.signed_index() as u32 + 1)
                .unwrap_or(0);
            adj[dart.origin].push((g.terminus(d), label));
        }
        RawAdjacency {
            n: g.vertex_count(),
            adj,
        }
    }
}

/// A complete isomorphism invariant: two graphs have equal codes iff they
/// are isomorphic (as labeled graphs when labels are present).
pub fn canonical_code(g: &Graph) -> Vec<u32> {
    canonical_code_raw(&RawAdjacency::from_graph(g))
}

pub fn canonical_code_raw(raw: &RawAdjacency) -> Vec<u32> {
    if raw.n == 0 {
        return Vec::new();
    }
    let mut best: Option<Vec<u32>> = None;
    let init = refine(raw, initial_colors(raw));
    search(raw, init, &mut best);
    best.expect("canonical search always yields a leaf")
}

fn initial_colors(raw: &RawAdjacency) -> Vec<u64> {
    // degree plus sorted incident label multiset
    let mut sigs: Vec<(usize, Vec<u32>)> = raw
        .adj
        .iter()
        .map(|a| {
            let mut labels: Vec<u32> = a.iter().map(|&(_, l)| l).collect();
            labels.sort_unstable();
            (a.len(), labels)
        })
        .collect();
    let mut dict: Vec<(usize, Vec<u32>)> = sigs.clone();
    dict.sort();
    dict.dedup();
    sigs.drain(..)
        .map(|s| dict.binary_search(&s).unwrap() as u64)
        .collect::<Vec<_>>()
}

/// Iterated color refinement; colors are renumbered 0.. in signature order
/// each round, so the result is isomorphism-invariant.
fn refine(raw: &RawAdjacency, mut colors: Vec<u64>) -> Vec<u64> {
    loop {
        let mut sigs: Vec<(u64, Vec<(u32, u64)>)> = Vec::with_capacity(raw.n);
        for v in 0..raw.n {
            let mut nb: Vec<(u32, u64)> = raw.adj[v]
                .iter()
                .map(|&(t, l)| (l, colors[t]))
                .collect();
            nb.sort_unstable();
            sigs.push((colors[v], nb));
        }
        let mut dict = sigs.clone();
        dict.sort();
        dict.dedup();
        let next: Vec<u64> = sigs
            .iter()
            .map(|s| dict.binary_search(s).unwrap() as u64)
            .collect();
        if next == colors {
            return colors;
        }
        colors = next;
    }
}

fn search(raw: &RawAdjacency, colors: Vec<u64>, best: &mut Option<Vec<u32>>) {
    // find the first non-singleton color class (by color value)
    let mut by_color: std::collections::BTreeMap<u64, Vec<usize>> = Default::default();
    for (v, &c) in colors.iter().enumerate() {
        by_color.entry(c).or_default().push(v);
    }
    let target = by_color.values().find(|vs| vs.len() > 1);
    match target {
        None => {
            let code = code_of_discrete(raw, &colors);
            if best.as_ref().is_none_or(|b| code < *b) {
                *best = Some(code);
            }
        }
        Some(cell) => {
            let fresh = colors.iter().copied().max().unwrap() + 1;
            for &v in cell {
                let mut next = colors.clone();
                next[v] = fresh;
                let refined = refine(raw, next);
                search(raw, refined, best);
            }
        }
    }
}

fn code_of_discrete(raw: &RawAdjacency, colors: &[u64]) -> Vec<u32> {
    // colors are a permutation 0..n-1 here
    let mut perm = vec![0usize; raw.n]; // vertex -> canonical index
    for (v, &c) in colors.iter().enumerate() {
        perm[v] = c as usize;
    }
    let mut order: Vec<usize> = (0..raw.n).collect(); // canonical index -> vertex
    for (v, &c) in colors.iter().enumerate() {
        order[c as usize] = v;
    }
    let mut code = Vec::with_capacity(raw.n * 4);
    code.push(raw.n as u32);
    for &v in &order {
        let mut row: Vec<(u32, u32)> = raw.adj[v]
            .iter()
            .map(|&(t, l)| (perm[t] as u32, l))
            .collect();
        row.sort_unstable();
        for (t, l) in row {
            code.push(t);
            code.push(l);
        }
        code.push(u32::MAX);
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn cycle(n: usize, shift: usize) -> Graph {
        let mut b = GraphBuilder::new("c");
        for i in 0..n {
            b.vertex(format!("v{}", (i + shift) % n));
        }
        for i in 0..n {
            b.edge(
                format!("e{i}"),
                format!("v{}", (i + shift) % n),
                format!("v{}", (i + 1 + shift) % n),
            );
        }
        b.build().unwrap()
    }

    #[test]
    fn relabeling_invariance() {
        assert_eq!(canonical_code(&cycle(5, 0)), canonical_code(&cycle(5, 2)));
        assert_ne!(canonical_code(&cycle(5, 0)), canonical_code(&cycle(6, 0)));
    }

    #[test]
    fn distinguishes_multigraphs() {
        // two loops at one vertex vs a doubled edge between two vertices
        let mut b = GraphBuilder::new("a");
        b.vertex("v");
        b.edge("e1", "v", "v").edge("e2", "v", "v");
        let g1 = b.build().unwrap();

        let mut b = GraphBuilder::new("b");
        b.vertex("u").vertex("v");
        b.edge("e1", "u", "v").edge("e2", "u", "v");
        let g2 = b.build().unwrap();
        assert_ne!(canonical_code(&g1), canonical_code(&g2));
    }

    #[test]
    fn distinguishes_k33_from_prism() {
        // both are 3-regular on 6 vertices
        let mut b = GraphBuilder::new("k33");
        for v in ["u0", "u1", "u2", "w0", "w1", "w2"] {
            b.vertex(v);
        }
        let mut k = 0;
        for u in 0..3 {
            for w in 0..3 {
                b.edge(format!("e{k}"), format!("u{u}"), format!("w{w}"));
                k += 1;
            }
        }
        let k33 = b.build().unwrap();

        let mut b = GraphBuilder::new("prism");
        for i in 0..6 {
            b.vertex(format!("v{i}"));
        }
        for i in 0..3 {
            b.edge(format!("t{i}"), format!("v{i}"), format!("v{}", (i + 1) % 3));
            b.edge(
                format!("b{i}"),
                format!("v{}", 3 + i),
                format!("v{}", 3 + (i + 1) % 3),
            );
            b.edge(format!("s{i}"), format!("v{i}"), format!("v{}", 3 + i));
        }
        let prism = b.build().unwrap();
        assert_ne!(canonical_code(&k33), canonical_code(&prism));
    }
}

//! Small permutation groups given by generators, with multiplication by
//! composition and element enumeration by closure.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

/// A permutation of `0..n`, stored as its image list. Products read left to
/// right: `(a * b)(x) = b(a(x))`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Permutation> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &x in &map {
            if x >= n || seen[x] {
                return Err(Error::InvalidArgument(format!(
                    "not a permutation: {map:?}"
                )));
            }
            seen[x] = true;
        }
        Ok(Permutation { map })
    }

    pub fn identity(n: usize) -> Permutation {
        Permutation {
            map: (0..n).collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.map.len()
    }

    pub fn apply(&self, x: usize) -> usize {
        self.map[x]
    }

    pub fn preimage(&self, y: usize) -> usize {
        self.map.iter().position(|&x| x == y).unwrap()
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &x)| i == x)
    }

    pub fn compose(&self, then: &Permutation) -> Permutation {
        Permutation {
            map: self.map.iter().map(|&x| then.map[x]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut map = vec![0; self.map.len()];
        for (i, &x) in self.map.iter().enumerate() {
            map[x] = i;
        }
        Permutation { map }
    }

    pub fn images(&self) -> &[usize] {
        &self.map
    }

    /// Concatenation as a permutation of the disjoint union; used to track
    /// graphs of homomorphisms.
    pub fn join(&self, other: &Permutation) -> Permutation {
        let n = self.map.len();
        let mut map = self.map.clone();
        map.extend(other.map.iter().map(|&x| x + n));
        Permutation { map }
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // cycle notation on 0-based points
        let n = self.map.len();
        let mut seen = vec![false; n];
        let mut wrote = false;
        for s in 0..n {
            if seen[s] || self.map[s] == s {
                seen[s] = true;
                continue;
            }
            write!(f, "(")?;
            let mut c = s;
            let mut first = true;
            while !seen[c] {
                seen[c] = true;
                if !first {
                    write!(f, " ")?;
                }
                write!(f, "{c}")?;
                first = false;
                c = self.map[c];
            }
            write!(f, ")")?;
            wrote = true;
        }
        if !wrote {
            write!(f, "()")?;
        }
        Ok(())
    }
}

/// A permutation group given by generators.
#[derive(Clone, Debug)]
pub struct PermGroup {
    pub degree: usize,
    pub gens: Vec<Permutation>,
}

impl PermGroup {
    pub fn new(degree: usize, gens: Vec<Permutation>) -> Result<PermGroup> {
        for g in &gens {
            if g.degree() != degree {
                return Err(Error::InvalidArgument(format!(
                    "generator degree {} does not match group degree {degree}",
                    g.degree()
                )));
            }
        }
        Ok(PermGroup { degree, gens })
    }

    /// Elements by breadth-first closure, in discovery order (which is the
    /// shortest-lex word order over the generators).
    pub fn elements(&self) -> Vec<Permutation> {
        self.elements_with_words().into_iter().map(|(p, _)| p).collect()
    }

    /// Elements plus a word over generator indices for each.
    pub fn elements_with_words(&self) -> Vec<(Permutation, Vec<usize>)> {
        let id = Permutation::identity(self.degree);
        let mut seen: HashMap<Permutation, usize> = HashMap::new();
        let mut out: Vec<(Permutation, Vec<usize>)> = vec![(id.clone(), Vec::new())];
        seen.insert(id, 0);
        let mut head = 0;
        while head < out.len() {
            let (cur, word) = out[head].clone();
            head += 1;
            for (gi, g) in self.gens.iter().enumerate() {
                let next = cur.compose(g);
                if !seen.contains_key(&next) {
                    seen.insert(next.clone(), out.len());
                    let mut w = word.clone();
                    w.push(gi);
                    out.push((next, w));
                }
            }
        }
        out
    }

    pub fn order(&self) -> usize {
        self.elements().len()
    }

    /// Does mapping generator `i` to `images[i]` extend to a homomorphism?
    /// Checked via the graph trick: the subgroup generated by the joined
    /// permutations has the same order as the group iff the map is a
    /// well-defined homomorphism.
    pub fn extends_to_hom(&self, images: &[Permutation]) -> Result<bool> {
        if images.len() != self.gens.len() {
            return Err(Error::InvalidArgument(
                "one image per generator is required".into(),
            ));
        }
        let joined: Vec<Permutation> = self
            .gens
            .iter()
            .zip(images)
            .map(|(g, x)| g.join(x))
            .collect();
        let d = self.degree + images.first().map(|x| x.degree()).unwrap_or(0);
        let graph = PermGroup::new(d, joined)?;
        Ok(graph.order() == self.order())
    }

    /// Image of an element under the homomorphism determined by generator
    /// images (the element must belong to the group).
    pub fn hom_image(
        &self,
        images: &[Permutation],
        target_degree: usize,
        elem: &Permutation,
    ) -> Result<Permutation> {
        let table = self.elements_with_words();
        let word = table
            .iter()
            .find(|(p, _)| p == elem)
            .map(|(_, w)| w.clone())
            .ok_or_else(|| Error::InvalidArgument(format!("element {elem} not in the group")))?;
        let mut acc = Permutation::identity(target_degree);
        for gi in word {
            acc = acc.compose(&images[gi]);
        }
        Ok(acc)
    }
}

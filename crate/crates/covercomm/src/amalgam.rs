//! Commensurations of free groups and the obstruction pipeline: normal
//! extensions, amalgam normal forms, quotient amalgams of finite groups,
//! finite-quotient search, and free-kernel rank data.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder};
use crate::permgroup::{PermGroup, Permutation};
use crate::stallings::{Embedding, SubgroupGraph};
use crate::word::Word;

// ---------------------------------------------------------------------------
// commensurations
// ---------------------------------------------------------------------------

/// A pair of monomorphisms `F_h <- H -> F_g` presented by the images of H's
/// basis, with the derived image subgroup graphs.
#[derive(Clone, Debug)]
pub struct Commensuration {
    pub h_rank: usize,
    pub g1_rank: usize,
    pub g2_rank: usize,
    pub i1_images: Vec<Word>,
    pub i2_images: Vec<Word>,
    s1: SubgroupGraph,
    s2: SubgroupGraph,
}

#[derive(Clone, Debug)]
pub struct CommensurationReport {
    pub injective1: bool,
    pub injective2: bool,
    pub index1: Option<usize>,
    pub index2: Option<usize>,
    pub trivial: bool,
    pub issues: Vec<String>,
}

impl CommensurationReport {
    pub fn is_valid(&self) -> bool {
        self.injective1 && self.injective2 && self.index1.is_some() && self.index2.is_some()
    }
}

impl fmt::Display for CommensurationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "valid: {} (injective: {}/{}, indices: {}/{}{})",
            self.is_valid(),
            self.injective1,
            self.injective2,
            self.index1.map_or("inf".into(), |i| i.to_string()),
            self.index2.map_or("inf".into(), |i| i.to_string()),
            if self.trivial { ", trivial" } else { "" },
        )?;
        for issue in &self.issues {
            writeln!(f, "  issue: {issue}")?;
        }
        Ok(())
    }
}

impl Commensuration {
    pub fn new(
        h_rank: usize,
        g1_rank: usize,
        g2_rank: usize,
        i1_images: Vec<Word>,
        i2_images: Vec<Word>,
    ) -> Result<Commensuration> {
        if i1_images.len() != h_rank || i2_images.len() != h_rank {
            return Err(Error::Commensuration(format!(
                "need {h_rank} images per side, got {} and {}",
                i1_images.len(),
                i2_images.len()
            )));
        }
        let s1 = SubgroupGraph::from_generators(g1_rank, &i1_images)?;
        let s2 = SubgroupGraph::from_generators(g2_rank, &i2_images)?;
        Ok(Commensuration {
            h_rank,
            g1_rank,
            g2_rank,
            i1_images,
            i2_images,
            s1,
            s2,
        })
    }

    pub fn image1(&self) -> &SubgroupGraph {
        &self.s1
    }

    pub fn image2(&self) -> &SubgroupGraph {
        &self.s2
    }

    /// Injectivity via the rank criterion plus finiteness of both indices.
    pub fn validate(&self) -> CommensurationReport {
        let injective1 = self.s1.rank() == self.h_rank;
        let injective2 = self.s2.rank() == self.h_rank;
        let index1 = self.s1.index();
        let index2 = self.s2.index();
        let mut issues = Vec::new();
        if !injective1 {
            issues.push(format!(
                "i1 is not injective: image has rank {} != {}",
                self.s1.rank(),
                self.h_rank
            ));
        }
        if !injective2 {
            issues.push(format!(
                "i2 is not injective: image has rank {} != {}",
                self.s2.rank(),
                self.h_rank
            ));
        }
        if index1.is_none() {
            issues.push("i1(H) has infinite index in G1".into());
        }
        if index2.is_none() {
            issues.push("i2(H) has infinite index in G2".into());
        }
        let trivial = index1 == Some(1) || index2 == Some(1);
        CommensurationReport {
            injective1,
            injective2,
            index1,
            index2,
            trivial,
            issues,
        }
    }

    fn require_valid(&self) -> Result<()> {
        let report = self.validate();
        if !report.is_valid() {
            return Err(Error::Commensuration(format!(
                "invalid commensuration: {}",
                report.issues.join("; ")
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// normal extensions
// ---------------------------------------------------------------------------

/// A normal commensuration extending a given one: `N <= H` of finite index,
/// with both induced images normal in their codomains.
#[derive(Clone, Debug)]
pub struct NormalCommensuration {
    pub base: Commensuration,
    pub n_in_h: SubgroupGraph,
    pub n_in_g1: SubgroupGraph,
    pub n_in_g2: SubgroupGraph,
    pub h_index: usize,
    /// core iterations until stabilization
    pub steps: usize,
}

impl NormalCommensuration {
    /// Re-checks the defining invariants; lists every failure.
    pub fn verify(&self) -> Result<Vec<String>> {
        let mut issues = Vec::new();
        if !self.n_in_g1.is_normal()? {
            issues.push("image of N in G1 is not normal".into());
        }
        if !self.n_in_g2.is_normal()? {
            issues.push("image of N in G2 is not normal".into());
        }
        for b in self.n_in_h.basis() {
            let w1 = b.substitute(&self.base.i1_images);
            if !self.n_in_g1.contains(&w1) {
                issues.push(format!("diagram does not commute: i1({b}) not in the G1 image"));
            }
            let w2 = b.substitute(&self.base.i2_images);
            if !self.n_in_g2.contains(&w2) {
                issues.push(format!("diagram does not commute: i2({b}) not in the G2 image"));
            }
        }
        if self.n_in_h.index() != Some(self.h_index) {
            issues.push(format!(
                "stored index {} disagrees with the graph",
                self.h_index
            ));
        }
        Ok(issues)
    }
}

/// Preimage of a finite-index subgroup `T <= F_target` under the embedding
/// given by `images`: the stabilizer of T's basepoint under the action of
/// the domain generators on T's cosets.
pub fn embedding_preimage(
    domain_rank: usize,
    images: &[Word],
    t: &SubgroupGraph,
) -> Result<SubgroupGraph> {
    if !t.is_complete() {
        return Err(Error::InfiniteIndex(
            "preimage requires a finite-index subgroup".into(),
        ));
    }
    let perms: Result<Vec<Permutation>> = images.iter().map(|w| t.action_of_word(w)).collect();
    SubgroupGraph::from_coset_action(domain_rank, &perms?)
}

/// Iterates `N_{k+1} = N_k ∩ i1^-1(core(i1 N_k)) ∩ i2^-1(core(i2 N_k))`
/// from `N_0 = H` until it stabilizes (the unique maximal simultaneously
/// normal subgroup) or `[H : N_k]` exceeds the bound (inconclusive).
pub fn find_normal_extension(
    c: &Commensuration,
    max_index: usize,
) -> Result<Option<NormalCommensuration>> {
    c.require_valid()?;
    let mut n = SubgroupGraph::whole_group(c.h_rank);
    let mut steps = 0usize;
    loop {
        let basis = n.basis();
        let im1: Vec<Word> = basis.iter().map(|b| b.substitute(&c.i1_images)).collect();
        let im2: Vec<Word> = basis.iter().map(|b| b.substitute(&c.i2_images)).collect();
        let s1 = SubgroupGraph::from_generators(c.g1_rank, &im1)?;
        let s2 = SubgroupGraph::from_generators(c.g2_rank, &im2)?;
        let core1 = s1.normal_core()?;
        let core2 = s2.normal_core()?;
        let next = n
            .intersect(&embedding_preimage(c.h_rank, &c.i1_images, &core1)?)?
            .intersect(&embedding_preimage(c.h_rank, &c.i2_images, &core2)?)?;
        if next == n {
            let h_index = n.index().expect("iterates have finite index");
            return Ok(Some(NormalCommensuration {
                base: c.clone(),
                n_in_h: n,
                n_in_g1: s1,
                n_in_g2: s2,
                h_index,
                steps,
            }));
        }
        let idx = next.index().expect("iterates have finite index");
        if idx > max_index {
            return Ok(None);
        }
        n = next;
        steps += 1;
    }
}

// ---------------------------------------------------------------------------
// normal forms in the amalgam
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Factor {
    G1,
    G2,
    H,
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::G1 => write!(f, "g1"),
            Factor::G2 => write!(f, "g2"),
            Factor::H => write!(f, "h"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Syllable {
    pub factor: Factor,
    pub word: Word,
}

/// Canonical reduced form `i(h) · r_1 ... r_k` with Schreier coset
/// representatives `r_i` alternating between the factors. Equality of
/// amalgam elements is equality of normal forms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NormalForm {
    /// amalgamated part, as a word in H's basis
    pub head: Word,
    /// alternating nontrivial coset representatives
    pub tail: Vec<(Factor, Word)>,
}

impl NormalForm {
    pub fn syllable_length(&self) -> usize {
        self.tail.len()
    }

    pub fn is_identity(&self) -> bool {
        self.head.is_empty() && self.tail.is_empty()
    }
}

impl fmt::Display for NormalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h:{}", self.head)?;
        for (factor, w) in &self.tail {
            write!(f, " {factor}:{w}")?;
        }
        Ok(())
    }
}

/// Reduces an arbitrary syllable sequence to its normal form, using the
/// canonical Schreier representatives of the two image subgroups.
pub fn amalgam_normal_form(c: &Commensuration, syllables: &[Syllable]) -> Result<NormalForm> {
    c.require_valid()?;
    for s in syllables {
        let rank = match s.factor {
            Factor::G1 => c.g1_rank,
            Factor::G2 => c.g2_rank,
            Factor::H => c.h_rank,
        };
        if let Some(g) = s.word.max_gen() {
            if g as usize >= rank {
                return Err(Error::Word(format!(
                    "syllable {} lies outside the rank-{rank} alphabet of factor {}",
                    s.word, s.factor
                )));
            }
        }
    }

    let emb1 = Embedding::new(c.h_rank, c.g1_rank, c.i1_images.clone())?;
    let emb2 = Embedding::new(c.h_rank, c.g2_rank, c.i2_images.clone())?;
    let reps1 = c.s1.schreier_representatives_by_vertex();
    let reps2 = c.s2.schreier_representatives_by_vertex();

    let mut head = Word::empty();
    let mut tail: std::collections::VecDeque<(Factor, Word)> = Default::default();

    for syl in syllables.iter().rev() {
        match syl.factor {
            Factor::H => {
                head = syl.word.concat(&head);
            }
            factor => {
                let (emb, sub, reps) = match factor {
                    Factor::G1 => (&emb1, &c.s1, &reps1),
                    Factor::G2 => (&emb2, &c.s2, &reps2),
                    Factor::H => unreachable!(),
                };
                let mut v = syl.word.concat(&emb.apply(&head));
                if let Some((front_factor, _)) = tail.front() {
                    if *front_factor == factor {
                        let (_, r) = tail.pop_front().unwrap();
                        v = v.concat(&r);
                    }
                }
                let vertex = sub
                    .trace(&v)
                    .expect("complete subgroup graphs trace every word");
                let rep = reps[vertex].clone();
                let in_image = v.concat(&rep.inverse());
                head = emb
                    .preimage(&in_image)
                    .expect("v * rep^-1 lies in the image by construction");
                if !rep.is_empty() {
                    tail.push_front((factor, rep));
                }
            }
        }
    }
    Ok(NormalForm {
        head,
        tail: tail.into_iter().collect(),
    })
}

// ---------------------------------------------------------------------------
// finite amalgams and quotient search
// ---------------------------------------------------------------------------

/// An amalgam `A *_C B` of finite permutation groups, with the common
/// subgroup embedded generator-wise on both sides.
#[derive(Clone, Debug)]
pub struct FiniteAmalgam {
    pub a: PermGroup,
    pub b: PermGroup,
    pub c_in_a: Vec<Permutation>,
    pub c_in_b: Vec<Permutation>,
    pub order_a: usize,
    pub order_b: usize,
    pub order_c: usize,
}

impl FiniteAmalgam {
    pub fn new(
        a: PermGroup,
        b: PermGroup,
        c_in_a: Vec<Permutation>,
        c_in_b: Vec<Permutation>,
    ) -> Result<FiniteAmalgam> {
        if c_in_a.len() != c_in_b.len() {
            return Err(Error::Commensuration(
                "the two embeddings of C need the same generator count".into(),
            ));
        }
        let order_a = a.order();
        let order_b = b.order();
        let ca = PermGroup::new(a.degree, c_in_a.clone())?.order();
        let cb = PermGroup::new(b.degree, c_in_b.clone())?.order();
        // the common subgroup is well-defined iff the generator-wise pairing
        // is an isomorphism of the two images
        let joined: Vec<Permutation> = c_in_a
            .iter()
            .zip(&c_in_b)
            .map(|(x, y)| x.join(y))
            .collect();
        let pair_order = PermGroup::new(a.degree + b.degree, joined)?.order();
        if pair_order != ca || pair_order != cb {
            return Err(Error::Commensuration(format!(
                "C embeddings are not compatible isomorphisms ({ca} vs {cb} vs pairs {pair_order})"
            )));
        }
        if !order_a.is_multiple_of(pair_order) || !order_b.is_multiple_of(pair_order) {
            return Err(Error::Commensuration(
                "|C| must divide |A| and |B|".into(),
            ));
        }
        Ok(FiniteAmalgam {
            a,
            b,
            c_in_a,
            c_in_b,
            order_a,
            order_b,
            order_c: pair_order,
        })
    }
}

/// Quotients a normal commensuration to an amalgam of the finite groups
/// `G_i / N` (regular coset actions), with `H/N` embedded generator-wise.
pub fn quotient_amalgam(nc: &NormalCommensuration) -> Result<FiniteAmalgam> {
    if !nc.n_in_g1.is_normal()? || !nc.n_in_g2.is_normal()? {
        return Err(Error::Commensuration(
            "quotient amalgam requires normal images".into(),
        ));
    }
    let a_gens = nc.n_in_g1.coset_action()?;
    let b_gens = nc.n_in_g2.coset_action()?;
    let a = PermGroup::new(nc.n_in_g1.index().unwrap(), a_gens)?;
    let b = PermGroup::new(nc.n_in_g2.index().unwrap(), b_gens)?;
    let c_in_a: Result<Vec<Permutation>> = nc
        .base
        .i1_images
        .iter()
        .map(|w| nc.n_in_g1.action_of_word(w))
        .collect();
    let c_in_b: Result<Vec<Permutation>> = nc
        .base
        .i2_images
        .iter()
        .map(|w| nc.n_in_g2.action_of_word(w))
        .collect();
    let fa = FiniteAmalgam::new(a, b, c_in_a?, c_in_b?)?;
    // regular actions: order equals degree equals the index
    debug_assert_eq!(fa.order_a, nc.n_in_g1.index().unwrap());
    debug_assert_eq!(fa.order_b, nc.n_in_g2.index().unwrap());
    Ok(fa)
}

/// A homomorphism pair `A -> Sym(d)`, `B -> Sym(d)` agreeing on C with a
/// nontrivial joint image; when `injective_on_factors` is set the images
/// realize the exact factorization `F = phi(A) phi(B)` with
/// `phi(A) ∩ phi(B) = phi(C)`, so the kernel misses every conjugate of the
/// factors and is free.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteQuotientCertificate {
    pub degree: usize,
    pub a_images: Vec<Permutation>,
    pub b_images: Vec<Permutation>,
    pub image_order: usize,
    pub injective_on_factors: bool,
}

/// Backtracking search over homomorphism pairs in canonical order (degree
/// ascending, permutation assignments in lexicographic order); returns the
/// first certificate found.
pub fn find_finite_quotient(
    fa: &FiniteAmalgam,
    max_degree: usize,
    require_injective: bool,
) -> Result<Option<FiniteQuotientCertificate>> {
    for degree in 1..=max_degree {
        let perms = all_permutations(degree);
        let mut a_assign = Odometer::new(fa.a.gens.len(), perms.len());
        while let Some(choice) = a_assign.next() {
            let a_images: Vec<Permutation> = choice.iter().map(|&i| perms[i].clone()).collect();
            if !fa.a.extends_to_hom(&a_images)? {
                continue;
            }
            let phi_a = PermGroup::new(degree, a_images.clone())?;
            if require_injective && phi_a.order() != fa.order_a {
                continue;
            }
            let c_images_a: Result<Vec<Permutation>> = fa
                .c_in_a
                .iter()
                .map(|x| fa.a.hom_image(&a_images, degree, x))
                .collect();
            let c_images_a = c_images_a?;

            let mut b_assign = Odometer::new(fa.b.gens.len(), perms.len());
            while let Some(choice_b) = b_assign.next() {
                let b_images: Vec<Permutation> =
                    choice_b.iter().map(|&i| perms[i].clone()).collect();
                if !fa.b.extends_to_hom(&b_images)? {
                    continue;
                }
                let phi_b = PermGroup::new(degree, b_images.clone())?;
                if require_injective && phi_b.order() != fa.order_b {
                    continue;
                }
                let c_images_b: Result<Vec<Permutation>> = fa
                    .c_in_b
                    .iter()
                    .map(|x| fa.b.hom_image(&b_images, degree, x))
                    .collect();
                if c_images_a != c_images_b? {
                    continue;
                }

                let mut joint = a_images.clone();
                joint.extend(b_images.iter().cloned());
                let image = PermGroup::new(degree, joint)?;
                let image_order = image.order();
                if image_order <= 1 {
                    continue;
                }
                if require_injective {
                    // exact factorization: |F||C| = |A||B| and the images
                    // intersect exactly in phi(C)
                    if image_order as u128 * fa.order_c as u128
                        != fa.order_a as u128 * fa.order_b as u128
                    {
                        continue;
                    }
                    let ea: HashSet<Permutation> = phi_a.elements().into_iter().collect();
                    let eb: HashSet<Permutation> = phi_b.elements().into_iter().collect();
                    let ec: HashSet<Permutation> = PermGroup::new(degree, c_images_a.clone())?
                        .elements()
                        .into_iter()
                        .collect();
                    let inter: HashSet<&Permutation> = ea.intersection(&eb).collect();
                    if inter.len() != ec.len() || !ec.iter().all(|x| inter.contains(x)) {
                        continue;
                    }
                }
                return Ok(Some(FiniteQuotientCertificate {
                    degree,
                    a_images,
                    b_images,
                    image_order,
                    injective_on_factors: require_injective,
                }));
            }
        }
    }
    Ok(None)
}

/// Cheap replay of a certificate: homomorphism laws, agreement on C, image
/// order, and the injectivity conditions when flagged.
pub fn verify_quotient_certificate(
    fa: &FiniteAmalgam,
    cert: &FiniteQuotientCertificate,
) -> Result<Vec<String>> {
    let mut issues = Vec::new();
    if !fa.a.extends_to_hom(&cert.a_images)? {
        issues.push("A-assignment is not a homomorphism".into());
    }
    if !fa.b.extends_to_hom(&cert.b_images)? {
        issues.push("B-assignment is not a homomorphism".into());
    }
    if !issues.is_empty() {
        return Ok(issues);
    }
    let d = cert.degree;
    let ca: Result<Vec<Permutation>> = fa
        .c_in_a
        .iter()
        .map(|x| fa.a.hom_image(&cert.a_images, d, x))
        .collect();
    let cb: Result<Vec<Permutation>> = fa
        .c_in_b
        .iter()
        .map(|x| fa.b.hom_image(&cert.b_images, d, x))
        .collect();
    let ca = ca?;
    if ca != cb? {
        issues.push("assignments disagree on C".into());
    }
    let mut joint = cert.a_images.clone();
    joint.extend(cert.b_images.iter().cloned());
    let image_order = PermGroup::new(d, joint)?.order();
    if image_order != cert.image_order {
        issues.push(format!(
            "image order is {image_order}, certificate claims {}",
            cert.image_order
        ));
    }
    if image_order <= 1 {
        issues.push("image is trivial".into());
    }
    if cert.injective_on_factors {
        let phi_a = PermGroup::new(d, cert.a_images.clone())?;
        let phi_b = PermGroup::new(d, cert.b_images.clone())?;
        if phi_a.order() != fa.order_a || phi_b.order() != fa.order_b {
            issues.push("factor images are not faithful".into());
        }
        if image_order as u128 * fa.order_c as u128 != fa.order_a as u128 * fa.order_b as u128 {
            issues.push("image does not realize the exact factorization".into());
        }
        let ea: HashSet<Permutation> = phi_a.elements().into_iter().collect();
        let eb: HashSet<Permutation> = phi_b.elements().into_iter().collect();
        let ec: HashSet<Permutation> = PermGroup::new(d, ca)?.elements().into_iter().collect();
        let inter: HashSet<&Permutation> = ea.intersection(&eb).collect();
        if inter.len() != ec.len() || !ec.iter().all(|x| inter.contains(x)) {
            issues.push("factor images intersect outside phi(C)".into());
        }
    }
    Ok(issues)
}

/// The Bass-Serre quotient data of the free kernel of a factor-injective
/// quotient: the bipartite graph on cosets `F/phi(A)` and `F/phi(B)` with
/// edge set `F/phi(C)`, whose free rank is the kernel rank.
#[derive(Clone, Debug)]
pub struct FreeKernelData {
    pub graph: Graph,
    pub kernel_rank: i64,
}

pub fn free_kernel_data(
    fa: &FiniteAmalgam,
    cert: &FiniteQuotientCertificate,
) -> Result<FreeKernelData> {
    if !cert.injective_on_factors {
        return Err(Error::Commensuration(
            "free kernel data requires an injective-on-factors certificate".into(),
        ));
    }
    let issues = verify_quotient_certificate(fa, cert)?;
    if !issues.is_empty() {
        return Err(Error::Commensuration(format!(
            "certificate does not verify: {}",
            issues.join("; ")
        )));
    }
    let d = cert.degree;
    let mut joint = cert.a_images.clone();
    joint.extend(cert.b_images.iter().cloned());
    let f_elements = PermGroup::new(d, joint)?.elements();
    let phi_a = PermGroup::new(d, cert.a_images.clone())?.elements();
    let phi_b = PermGroup::new(d, cert.b_images.clone())?.elements();
    let c_images: Result<Vec<Permutation>> = fa
        .c_in_a
        .iter()
        .map(|x| fa.a.hom_image(&cert.a_images, d, x))
        .collect();
    let phi_c = PermGroup::new(d, c_images?)?.elements();

    let a_cosets = cosets(&f_elements, &phi_a);
    let b_cosets = cosets(&f_elements, &phi_b);
    let c_cosets = cosets(&f_elements, &phi_c);

    let aw = a_cosets.len().max(2).to_string().len();
    let bw = b_cosets.len().max(2).to_string().len();
    let cw = c_cosets.len().max(2).to_string().len();
    let mut builder = GraphBuilder::new("kernel-quotient");
    for i in 0..a_cosets.len() {
        builder.vertex(format!("A{i:0aw$}"));
    }
    for j in 0..b_cosets.len() {
        builder.vertex(format!("B{j:0bw$}"));
    }
    for (k, coset) in c_cosets.iter().enumerate() {
        let rep = &coset[0];
        let ai = a_cosets
            .iter()
            .position(|c| c.binary_search(rep).is_ok())
            .unwrap();
        let bj = b_cosets
            .iter()
            .position(|c| c.binary_search(rep).is_ok())
            .unwrap();
        builder.edge(format!("C{k:0cw$}"), format!("A{ai:0aw$}"), format!("B{bj:0bw$}"));
    }
    let graph = builder.build()?;
    let kernel_rank = graph.free_rank()?;

    // cross-check against the Euler characteristic formula
    let formula = BigRational::one()
        - BigRational::from(BigInt::from(f_elements.len() as i64))
            * (BigRational::new(BigInt::one(), BigInt::from(fa.order_a as i64))
                + BigRational::new(BigInt::one(), BigInt::from(fa.order_b as i64))
                - BigRational::new(BigInt::one(), BigInt::from(fa.order_c as i64)));
    if formula != BigRational::from(BigInt::from(kernel_rank)) {
        return Err(Error::Commensuration(format!(
            "kernel rank {kernel_rank} disagrees with the formula value {formula}"
        )));
    }
    Ok(FreeKernelData { graph, kernel_rank })
}

/// Left cosets `f subgroup` as sorted element lists, in the order of first
/// appearance over `elements`.
fn cosets(elements: &[Permutation], subgroup: &[Permutation]) -> Vec<Vec<Permutation>> {
    let mut assigned: HashSet<Permutation> = HashSet::new();
    let mut out = Vec::new();
    for f in elements {
        if assigned.contains(f) {
            continue;
        }
        let mut coset: Vec<Permutation> = subgroup.iter().map(|s| f.compose(s)).collect();
        coset.sort();
        coset.dedup();
        for x in &coset {
            assigned.insert(x.clone());
        }
        out.push(coset);
    }
    out
}

fn all_permutations(n: usize) -> Vec<Permutation> {
    let mut out = Vec::new();
    let mut map: Vec<usize> = (0..n).collect();
    loop {
        out.push(Permutation::new(map.clone()).unwrap());
        // next_permutation
        let len = map.len();
        if len < 2 {
            break;
        }
        let mut i = len - 1;
        while i > 0 && map[i - 1] >= map[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = len - 1;
        while map[j] <= map[i - 1] {
            j -= 1;
        }
        map.swap(i - 1, j);
        map[i..].reverse();
    }
    out
}

/// Mixed-radix odometer over `digits` positions with `base` values each.
struct Odometer {
    state: Vec<usize>,
    base: usize,
    done: bool,
    started: bool,
}

impl Odometer {
    fn new(digits: usize, base: usize) -> Odometer {
        Odometer {
            state: vec![0; digits],
            base,
            done: base == 0 && digits > 0,
            started: false,
        }
    }

    fn next(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.state);
        }
        let mut i = self.state.len();
        loop {
            if i == 0 {
                self.done = true;
                return None;
            }
            i -= 1;
            self.state[i] += 1;
            if self.state[i] < self.base {
                break;
            }
            self.state[i] = 0;
        }
        Some(&self.state)
    }
}

// ---------------------------------------------------------------------------
// obstruction report
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct ObstructionBounds {
    pub max_index: usize,
    pub max_degree: usize,
}

impl Default for ObstructionBounds {
    fn default() -> Self {
        ObstructionBounds {
            max_index: 64,
            max_degree: 6,
        }
    }
}

#[derive(Clone, Debug)]
pub enum ObstructionVerdict {
    /// Both necessary conditions verified; says nothing about sufficiency.
    NecessaryConditionsHold,
    /// Trivial commensurations complete trivially.
    TriviallyCompletable,
    /// A bound ran out before a verdict.
    Inconclusive { detail: String },
}

#[derive(Clone, Debug)]
pub struct ObstructionReport {
    pub report: CommensurationReport,
    pub extension: Option<(usize, usize)>, // ([H:N], steps)
    pub quotient: Option<FiniteQuotientCertificate>,
    pub verdict: ObstructionVerdict,
}

impl fmt::Display for ObstructionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.report)?;
        match &self.extension {
            Some((idx, steps)) => writeln!(
                f,
                "normal extension: [H:N] = {idx} after {steps} core iterations"
            )?,
            None => writeln!(f, "normal extension: not found within bound")?,
        }
        match &self.quotient {
            Some(cert) => writeln!(
                f,
                "finite quotient: degree {}, image order {}",
                cert.degree, cert.image_order
            )?,
            None => writeln!(f, "finite quotient: none found within bound")?,
        }
        match &self.verdict {
            ObstructionVerdict::NecessaryConditionsHold =>

                writeln!(f, "verdict: no obstruction found (necessary conditions hold)"),
            ObstructionVerdict::TriviallyCompletable => {
                writeln!(f, "verdict: trivial commensuration (completable by definition)")
            }
            ObstructionVerdict::Inconclusive { detail } => {
                writeln!(f, "verdict: inconclusive ({detail})")
            }
        }
    }
}

/// Runs the full necessary-condition pipeline. Never claims completability
/// beyond the trivial case.
pub fn obstruction_report(c: &Commensuration, bounds: ObstructionBounds) -> Result<ObstructionReport> {
    let report = c.validate();
    if !report.is_valid() {
        return Err(Error::Commensuration(format!(
            "invalid commensuration: {}",
            report.issues.join("; ")
        )));
    }
    if report.trivial {
        return Ok(ObstructionReport {
            report,
            extension: None,
            quotient: None,
            verdict: ObstructionVerdict::TriviallyCompletable,
        });
    }
    match find_normal_extension(c, bounds.max_index)? {
        None => Ok(ObstructionReport {
            report,
            extension: None,
            quotient: None,
            verdict: ObstructionVerdict::Inconclusive {
                detail: format!(
                    "no simultaneously normal subgroup found with index <= {}",
                    bounds.max_index
                ),
            },
        }),
        Some(nc) => {
            let fa = quotient_amalgam(&nc)?;
            let quotient = find_finite_quotient(&fa, bounds.max_degree, false)?;
            let verdict = match &quotient {
                Some(_) => ObstructionVerdict::NecessaryConditionsHold,
                None => ObstructionVerdict::Inconclusive {
                    detail: format!(
                        "no nontrivial finite quotient found with degree <= {}",
                        bounds.max_degree
                    ),
                },
            };
            Ok(ObstructionReport {
                report,
                extension: Some((nc.h_index, nc.steps)),
                quotient,
                verdict,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str, rank: usize) -> Word {
        Word::parse(s, rank).unwrap()
    }

    /// The infinite dihedral commensuration Z <- 2Z -> Z.
    fn dihedral() -> Commensuration {
        Commensuration::new(1, 1, 1, vec![w("aa", 1)], vec![w("aa", 1)]).unwrap()
    }

    /// Both embeddings equal to the index-3 stabilizer subgroup of F2.
    fn stabilizer_comm() -> Commensuration {
        let sa = Permutation::new(vec![1, 0, 2]).unwrap();
        let sb = Permutation::new(vec![1, 2, 0]).unwrap();
        let s = SubgroupGraph::from_coset_action(2, &[sa, sb]).unwrap();
        let basis = s.basis();
        Commensuration::new(basis.len(), 2, 2, basis.clone(), basis).unwrap()
    }

    #[test]
    fn validate_dihedral() {
        let r = dihedral().validate();
        assert!(r.is_valid());
        assert_eq!((r.index1, r.index2), (Some(2), Some(2)));
        assert!(!r.trivial);
    }

    #[test]
    fn validate_trivial_and_invalid() {
        let t = Commensuration::new(1, 1, 1, vec![w("a", 1)], vec![w("a", 1)]).unwrap();
        let r = t.validate();
        assert!(r.is_valid() && r.trivial);

        let bad = Commensuration::new(2, 2, 2, vec![w("a", 2), w("a", 2)], vec![w("a", 2), w("b", 2)])
            .unwrap();
        let r = bad.validate();
        assert!(!r.injective1);
        assert!(!r.is_valid());
    }

    #[test]
    fn normal_extension_dihedral_at_step_zero() {
        let c = dihedral();
        let nc = find_normal_extension(&c, 64).unwrap().expect("stabilizes");
        assert_eq!(nc.h_index, 1);
        assert_eq!(nc.steps, 0);
        assert!(nc.verify().unwrap().is_empty());
    }

    #[test]
    fn normal_extension_stabilizer() {
        let c = stabilizer_comm();
        assert_eq!(c.h_rank, 4);
        let nc = find_normal_extension(&c, 64).unwrap().expect("stabilizes");
        assert_eq!(nc.h_index, 2);
        assert_eq!(nc.n_in_g1.index(), Some(6));
        assert!(nc.verify().unwrap().is_empty());
        // maximality: the extension contains the known simultaneously normal
        // subgroup N itself (trivially) and is normal
        assert!(nc.n_in_g1.is_normal().unwrap());
    }

    #[test]
    fn normal_extension_bound_exhaustion() {
        let c = stabilizer_comm();
        assert!(find_normal_extension(&c, 1).unwrap().is_none());
    }

    #[test]
    fn quotient_amalgam_dihedral() {
        let nc = find_normal_extension(&dihedral(), 64).unwrap().unwrap();
        let fa = quotient_amalgam(&nc).unwrap();
        assert_eq!((fa.order_a, fa.order_b, fa.order_c), (2, 2, 1));
    }

    #[test]
    fn quotient_amalgam_degenerate() {
        // trivial commensuration with N of index k: A = B = C of order k
        let c = Commensuration::new(1, 1, 1, vec![w("a", 1)], vec![w("a", 1)]).unwrap();
        let n = SubgroupGraph::from_generators(1, &[w("aaa", 1)]).unwrap();
        let nc = NormalCommensuration {
            base: c,
            n_in_h: n.clone(),
            n_in_g1: n.clone(),
            n_in_g2: n,
            h_index: 3,
            steps: 0,
        };
        assert!(nc.verify().unwrap().is_empty());
        let fa = quotient_amalgam(&nc).unwrap();
        assert_eq!((fa.order_a, fa.order_b, fa.order_c), (3, 3, 3));
    }

    #[test]
    fn quotient_amalgam_stabilizer_orders() {
        let nc = find_normal_extension(&stabilizer_comm(), 64).unwrap().unwrap();
        let fa = quotient_amalgam(&nc).unwrap();
        assert_eq!((fa.order_a, fa.order_b), (6, 6));
        // |C| = [H : N] = 2
        assert_eq!(fa.order_c, 2);
    }

    fn c2_star_c2() -> FiniteAmalgam {
        let nc = find_normal_extension(&dihedral(), 64).unwrap().unwrap();
        quotient_amalgam(&nc).unwrap()
    }

    #[test]
    fn finite_quotient_search() {
        let fa = c2_star_c2();
        let cert = find_finite_quotient(&fa, 6, false).unwrap().expect("found");
        assert_eq!(cert.degree, 2);
        assert_eq!(cert.image_order, 2);
        assert!(verify_quotient_certificate(&fa, &cert).unwrap().is_empty());

        let cert = find_finite_quotient(&fa, 6, true).unwrap().expect("found");
        assert_eq!(cert.degree, 4);
        assert_eq!(cert.image_order, 4);
        assert!(verify_quotient_certificate(&fa, &cert).unwrap().is_empty());
    }

    #[test]
    fn free_kernel_examples() {
        let fa = c2_star_c2();
        let cert = find_finite_quotient(&fa, 6, true).unwrap().unwrap();
        let data = free_kernel_data(&fa, &cert).unwrap();
        assert_eq!(data.kernel_rank, 1);

        // C2 * C3 -> Sym(3)
        let a = PermGroup::new(2, vec![Permutation::new(vec![1, 0]).unwrap()]).unwrap();
        let b = PermGroup::new(3, vec![Permutation::new(vec![1, 2, 0]).unwrap()]).unwrap();
        let fa = FiniteAmalgam::new(a, b, vec![], vec![]).unwrap();
        let cert = find_finite_quotient(&fa, 6, true).unwrap().expect("found");
        assert_eq!(cert.degree, 3);
        assert_eq!(cert.image_order, 6);
        let data = free_kernel_data(&fa, &cert).unwrap();
        assert_eq!(data.kernel_rank, 2);

        // degenerate A = B = C
        let a = PermGroup::new(3, vec![Permutation::new(vec![1, 2, 0]).unwrap()]).unwrap();
        let fa = FiniteAmalgam::new(
            a.clone(),
            a,
            vec![Permutation::new(vec![1, 2, 0]).unwrap()],
            vec![Permutation::new(vec![1, 2, 0]).unwrap()],
        )
        .unwrap();
        let cert = find_finite_quotient(&fa, 6, true).unwrap().expect("found");
        assert_eq!(cert.image_order, 3);
        let data = free_kernel_data(&fa, &cert).unwrap();
        assert_eq!(data.kernel_rank, 0);
    }

    #[test]
    fn normal_form_examples() {
        let c = dihedral();
        // single H syllable
        let nf = amalgam_normal_form(
            &c,
            &[Syllable {
                factor: Factor::H,
                word: w("a", 1),
            }],
        )
        .unwrap();
        assert_eq!(nf.head, w("a", 1));
        assert_eq!(nf.syllable_length(), 0);

        // (a in G1)(a in G2): reduced length 2
        let nf = amalgam_normal_form(
            &c,
            &[
                Syllable {
                    factor: Factor::G1,
                    word: w("a", 1),
                },
                Syllable {
                    factor: Factor::G2,
                    word: w("a", 1),
                },
            ],
        )
        .unwrap();
        assert_eq!(nf.syllable_length(), 2);

        // (aa in G1)(a in G2): aa crosses over; reduced length 1
        let nf = amalgam_normal_form(
            &c,
            &[
                Syllable {
                    factor: Factor::G1,
                    word: w("aa", 1),
                },
                Syllable {
                    factor: Factor::G2,
                    word: w("a", 1),
                },
            ],
        )
        .unwrap();
        assert_eq!(nf.syllable_length(), 1);
        assert_eq!(nf.head, w("a", 1));
    }

    #[test]
    fn normal_form_rejects_bad_alphabet() {
        let c = dihedral();
        assert!(amalgam_normal_form(
            &c,
            &[Syllable {
                factor: Factor::G1,
                word: Word::parse("b", 2).unwrap(),
            }]
        )
        .is_err());
    }

    #[test]
    fn normal_form_reassociation_invariance() {
        let c = stabilizer_comm();
        let syls = [
            Syllable { factor: Factor::G1, word: w("ab", 2) },
            Syllable { factor: Factor::G2, word: w("ba", 2) },
            Syllable { factor: Factor::G1, word: w("a", 2) },
        ];
        let nf1 = amalgam_normal_form(&c, &syls).unwrap();
        // re-associate: split syllables into letters
        let mut letters = Vec::new();
        for s in &syls {
            for &l in s.word.letters() {
                letters.push(Syllable {
                    factor: s.factor,
                    word: Word::letter(l),
                });
            }
        }
        let nf2 = amalgam_normal_form(&c, &letters).unwrap();
        assert_eq!(nf1, nf2);
    }

    #[test]
    fn obstruction_pipeline() {
        let r = obstruction_report(&dihedral(), ObstructionBounds::default()).unwrap();
        assert!(matches!(r.verdict, ObstructionVerdict::NecessaryConditionsHold));
        assert_eq!(r.extension, Some((1, 0)));

        let t = Commensuration::new(1, 1, 1, vec![w("a", 1)], vec![w("a", 1)]).unwrap();
        let r = obstruction_report(&t, ObstructionBounds::default()).unwrap();
        assert!(matches!(r.verdict, ObstructionVerdict::TriviallyCompletable));

        let r = obstruction_report(
            &stabilizer_comm(),
            ObstructionBounds {
                max_index: 1,
                max_degree: 6,
            },
        )
        .unwrap();
        assert!(matches!(r.verdict, ObstructionVerdict::Inconclusive { .. }));
    }
}

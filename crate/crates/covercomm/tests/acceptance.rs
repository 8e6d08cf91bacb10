//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).
//! Everything is exact; the stated runtime budgets are asserted.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use covercomm::abelian::{
    self, closure, complete_abelian, d4_generators, d6_generators, equivariant_average,
    is_invariant_lattice, is_out_finite, verify_completion, AbelianCommensuration,
    AveragingInstance, ClosureOutcome, CompletionOutcome, FgAbelian, IntMatrix, OutFiniteOutcome,
};
use covercomm::amalgam::{
    find_finite_quotient, find_normal_extension, free_kernel_data, quotient_amalgam,
    Commensuration, FiniteAmalgam,
};
use covercomm::covering::{
    analyze_covering, find_common_cover, same_universal_cover, CommonCoverOutcome,
};
use covercomm::graph::{Graph, GraphBuilder};
use covercomm::permgroup::{PermGroup, Permutation};
use covercomm::stallings::SubgroupGraph;
use covercomm::vh::{
    analyze_cross_section, commensuration_from_cross_section, vh_partition, SquareComplex,
    VhOutcome,
};
use covercomm::word::{Letter, Word};
use covercomm::zlin::ZMat;

fn pass(n: usize, what: &str) {
    println!("acceptance criterion {n}: PASS ({what})");
}

/// A connected graph with 20 vertices and 100 edges: a 20-cycle plus 80
/// chords.
fn graph_20_100() -> Graph {
    let mut b = GraphBuilder::new("g20");
    for i in 0..20 {
        b.vertex(format!("v{i:02}"));
    }
    for i in 0..20 {
        b.edge(format!("c{i:02}"), format!("v{i:02}"), format!("v{:02}", (i + 1) % 20));
    }
    let mut k = 0;
    'outer: for step in 2..=10 {
        for i in 0..20 {
            if k == 80 {
                break 'outer;
            }
            b.edge(
                format!("x{k:02}"),
                format!("v{i:02}"),
                format!("v{:02}", (i + step) % 20),
            );
            k += 1;
        }
    }
    let g = b.build().unwrap();
    assert_eq!((g.vertex_count(), g.edge_count()), (20, 100));
    g
}

fn k4() -> Graph {
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

fn k33() -> Graph {
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
fn criterion_01_counting_identities() {
    let g = graph_20_100();
    assert_eq!(g.euler_characteristic(), -80);
    assert_eq!(g.free_rank().unwrap(), 81);
    pass(1, "chi(20,100) = -80 and rank 81, exact");
}

#[test]
fn criterion_02_average_degree_strictly_increasing() {
    let g = graph_20_100();
    let a0 = g.average_degree_after_folds(0).unwrap();
    assert_eq!(a0, BigRational::from(BigInt::from(10)));
    let mut prev = a0;
    for f in 1..=18 {
        let a = g.average_degree_after_folds(f).unwrap();
        assert!(a > prev, "A({f}) must exceed A({})", f - 1);
        prev = a;
    }
    // endpoint from the formula: (200 - 38) / 1
    assert_eq!(
        g.average_degree_after_folds(19).unwrap(),
        BigRational::from(BigInt::from(162))
    );
    pass(2, "A(0) = 10 and A strictly increasing on 0..=18, exact rationals");
}

#[test]
fn criterion_03_gl2_obstruction() {
    let t = Instant::now();
    match closure(&d4_generators(), 12).unwrap() {
        ClosureOutcome::Finite(els) => assert_eq!(els.len(), 8),
        other => panic!("D4 must close finitely, got {other:?}"),
    }
    match closure(&d6_generators(), 12).unwrap() {
        ClosureOutcome::Finite(els) => assert_eq!(els.len(), 12),
        other => panic!("D6 must close finitely, got {other:?}"),
    }
    let mut both = d4_generators();
    both.extend(d6_generators());
    match closure(&both, 12).unwrap() {
        ClosureOutcome::Infinite { word, witness } => {
            assert!(word.len() <= 2, "witness word too long: {word:?}");
            let sq = witness.mul(&witness).unwrap();
            assert!(!sq.is_identity());
            // unipotent: (sq - I)^2 = 0, checked via trace 2 and det 1
            assert_eq!(sq.trace(), 2);
            assert_eq!(sq.det(), 1);
        }
        other => panic!("D4 and D6 together must be infinite, got {other:?}"),
    }

    // randomized embeddings: invariance enforced by construction
    let candidates = |hol: &[IntMatrix]| -> Vec<IntMatrix> {
        let mut out = Vec::new();
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                for c in -3i64..=3 {
                    for d in -3i64..=3 {
                        let m = IntMatrix::new(2, vec![a, b, c, d]).unwrap();
                        if m.det() != 0 && is_invariant_lattice(&m, hol).unwrap() {
                            out.push(m);
                        }
                    }
                }
            }
        }
        out
    };
    let m1s = candidates(&d4_generators());
    let m2s = candidates(&d6_generators());
    assert!(m1s.len() > 1 && m2s.len() > 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FE);
    for _ in 0..100 {
        let m1 = m1s[rng.gen_range(0..m1s.len())].clone();
        let m2 = m2s[rng.gen_range(0..m2s.len())].clone();
        let c = AbelianCommensuration::new(2, m1, m2, d4_generators(), d6_generators()).unwrap();
        match is_out_finite(&c, 12).unwrap() {
            OutFiniteOutcome::NotOutFinite { .. } => {}
            other => panic!("D4/D6 embeddings must never be out-finite, got {other:?}"),
        }
    }
    let elapsed = t.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    pass(3, "D4/D6 closures and 100 randomized NotOutFinite verdicts");
}

#[test]
fn criterion_04_completion_construction() {
    let t = Instant::now();
    // Z^2 x| D4 against itself over the index-4 sublattice 2 Z^2
    let c = AbelianCommensuration::new(
        2,
        IntMatrix::identity(2),
        IntMatrix::scalar(2, 2),
        d4_generators(),
        d4_generators(),
    )
    .unwrap();
    match complete_abelian(&c, 12).unwrap() {
        CompletionOutcome::Completed(comp) => {
            assert!(verify_completion(&c, &comp).unwrap().is_empty());
            assert!(comp.indices[0] > BigInt::zero());
            assert!(comp.indices[1] > BigInt::zero());
        }
        other => panic!("expected a completion, got {other:?}"),
    }
    // Z^2 x| D4 against Z^2 x| D6: not out-finite
    let c = AbelianCommensuration::new(
        2,
        IntMatrix::identity(2),
        IntMatrix::identity(2),
        d4_generators(),
        d6_generators(),
    )
    .unwrap();
    match complete_abelian(&c, 12).unwrap() {
        CompletionOutcome::NotOutFinite { .. } => {}
        other => panic!("expected NotOutFinite, got {other:?}"),
    }
    let elapsed = t.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(4, "completion built and verified; D4 vs D6 rejected");
}

#[test]
fn criterion_05_dihedral_pipeline() {
    let t = Instant::now();
    let w = |s: &str| Word::parse(s, 1).unwrap();
    let c = Commensuration::new(1, 1, 1, vec![w("aa")], vec![w("aa")]).unwrap();
    let nc = find_normal_extension(&c, 64).unwrap().expect("stabilizes");
    assert_eq!(nc.steps, 0, "extension must appear at step 0");
    let fa = quotient_amalgam(&nc).unwrap();
    assert_eq!((fa.order_a, fa.order_b, fa.order_c), (2, 2, 1));
    let qc = find_finite_quotient(&fa, 6, false).unwrap().expect("quotient");
    assert_eq!(qc.degree, 2);
    let qci = find_finite_quotient(&fa, 6, true).unwrap().expect("injective quotient");
    assert_eq!(qci.degree, 4);
    let data = free_kernel_data(&fa, &qci).unwrap();
    assert_eq!(data.kernel_rank, 1);
    let elapsed = t.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    pass(5, "Z <- 2Z -> Z: extension at step 0, C2*C2, quotients at degrees 2 and 4, kernel rank 1");
}

#[test]
fn criterion_06_free_kernel_formula() {
    // C2 * C2 -> C2 x C2
    let c2 = PermGroup::new(2, vec![Permutation::new(vec![1, 0]).unwrap()]).unwrap();
    let fa = FiniteAmalgam::new(c2.clone(), c2.clone(), vec![], vec![]).unwrap();
    let qc = find_finite_quotient(&fa, 6, true).unwrap().unwrap();
    assert_eq!(qc.image_order, 4);
    assert_eq!(free_kernel_data(&fa, &qc).unwrap().kernel_rank, 1);

    // C2 * C3 -> Sym(3)
    let c3 = PermGroup::new(3, vec![Permutation::new(vec![1, 2, 0]).unwrap()]).unwrap();
    let fa = FiniteAmalgam::new(c2, c3.clone(), vec![], vec![]).unwrap();
    let qc = find_finite_quotient(&fa, 6, true).unwrap().unwrap();
    assert_eq!(qc.image_order, 6);
    assert_eq!(free_kernel_data(&fa, &qc).unwrap().kernel_rank, 2);

    // degenerate A = B = C
    let gen = Permutation::new(vec![1, 2, 0]).unwrap();
    let fa = FiniteAmalgam::new(c3.clone(), c3, vec![gen.clone()], vec![gen]).unwrap();
    let qc = find_finite_quotient(&fa, 6, true).unwrap().unwrap();
    assert_eq!(free_kernel_data(&fa, &qc).unwrap().kernel_rank, 0);
    pass(6, "kernel rank equals 1 - |F|(1/|A| + 1/|B| - 1/|C|) on all three instances");
}

fn random_permutation(rng: &mut ChaCha8Rng, n: usize) -> Permutation {
    let mut map: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        map.swap(i, j);
    }
    Permutation::new(map).unwrap()
}

#[test]
fn criterion_07_stallings_suite() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut cores_checked = 0usize;
    for trial in 0..200 {
        let rank = 2 + (trial % 2); // ranks 2 and 3
        let points = rng.gen_range(1..=8);
        let perms: Vec<Permutation> = (0..rank)
            .map(|_| random_permutation(&mut rng, points))
            .collect();
        let s = SubgroupGraph::from_coset_action(rank, &perms).unwrap();
        let index = s.index().expect("coset graphs are complete") as i64;
        // Nielsen-Schreier: rank - 1 = index (ambient_rank - 1)
        assert_eq!(
            s.rank() as i64 - 1,
            index * (rank as i64 - 1),
            "trial {trial}: index {index}, rank {}",
            s.rank()
        );

        if cores_checked < 60 && index <= 6 {
            cores_checked += 1;
            let core = s.normal_core().unwrap();
            assert!(core.is_normal().unwrap());
            let core_index = core.index().unwrap();
            // core index divides index!
            let mut fact = BigInt::one();
            for k in 1..=index {
                fact *= k;
            }
            let (_, rem) = num_integer::Integer::div_rem(&fact, &BigInt::from(core_index as i64));
            assert!(rem.is_zero(), "core index {core_index} must divide {index}!");
            // the core is contained in s
            for b in core.basis() {
                assert!(s.contains(&b));
            }
        }
    }
    assert!(cores_checked >= 40, "only {cores_checked} cores checked");

    // intersection agrees with membership conjunction: brute-force oracle
    // over every reduced word of length <= 8
    let w = |s: &str| Word::parse(s, 2).unwrap();
    let pairs = vec![
        (
            SubgroupGraph::from_generators(2, &[w("aa"), w("b"), w("abA")]).unwrap(),
            SubgroupGraph::from_generators(2, &[w("a"), w("bb"), w("baB")]).unwrap(),
        ),
        (
            SubgroupGraph::from_generators(2, &[w("ab")]).unwrap(),
            SubgroupGraph::from_generators(2, &[w("aabb"), w("ba")]).unwrap(),
        ),
        (
            SubgroupGraph::from_coset_action(
                2,
                &[
                    Permutation::new(vec![1, 0, 2]).unwrap(),
                    Permutation::new(vec![1, 2, 0]).unwrap(),
                ],
            )
            .unwrap(),
            SubgroupGraph::from_generators(2, &[w("aa"), w("b"), w("abA")]).unwrap(),
        ),
    ];
    let mut words: Vec<Word> = vec![Word::empty()];
    let mut frontier: Vec<Word> = vec![Word::empty()];
    for _ in 0..8 {
        let mut next = Vec::new();
        for u in &frontier {
            for si in 0..4 {
                let v = u.concat(&Word::letter(Letter::from_signed_index(si)));
                if v.len() == u.len() + 1 {
                    next.push(v);
                }
            }
        }
        words.extend(next.iter().cloned());
        frontier = next;
    }
    // 1 + sum_{L=1..8} 4 * 3^(L-1) reduced words
    assert_eq!(words.len(), 13121);
    for (s, tgraph) in &pairs {
        let both = s.intersect(tgraph).unwrap();
        for u in &words {
            assert_eq!(
                both.contains(u),
                s.contains(u) && tgraph.contains(u),
                "membership conjunction fails on {u}"
            );
        }
    }
    // the documented pair has intersection index 4
    assert_eq!(pairs[0].0.intersect(&pairs[0].1).unwrap().index(), Some(4));

    let elapsed = t.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    pass(7, "Nielsen-Schreier on 200 random covers, cores normal, intersection oracle");
}

#[test]
fn criterion_08_common_cover_oracle() {
    let t = Instant::now();
    let (g1, g2) = (k4(), k33());
    assert!(same_universal_cover(&g1, &g2).unwrap());
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get().min(4));
    match find_common_cover(&g1, &g2, 96, threads).unwrap() {
        CommonCoverOutcome::Found { z, p1, p2 } => {
            let r1 = analyze_covering(&p1);
            let r2 = analyze_covering(&p2);
            assert!(r1.is_covering && r2.is_covering);
            let (d1, d2) = (r1.degree.unwrap() as i64, r2.degree.unwrap() as i64);
            assert_eq!(z.euler_characteristic(), d1 * g1.euler_characteristic());
            assert_eq!(z.euler_characteristic(), d2 * g2.euler_characteristic());
            assert_eq!(z.vertex_count() % 12, 0);
        }
        other => panic!("expected a common cover, got {other:?}"),
    }
    let elapsed = t.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "took {elapsed:?}");
    pass(8, "K4/K3,3 common cover found and certified");
}

#[test]
fn criterion_09_vh_pipeline() {
    let mut b = GraphBuilder::new("torus");
    b.vertex("v");
    b.edge("a", "v", "v");
    b.edge("b", "v", "v");
    let g = b.build().unwrap();
    let sc = SquareComplex::from_relators(g, &["abAB".to_string()]).unwrap();
    match vh_partition(&sc, None).unwrap() {
        VhOutcome::Vh(p) => {
            assert_eq!(p.vertical_ids(&sc.skeleton), vec!["a"]);
            assert_eq!(p.horizontal_ids(&sc.skeleton), vec!["b"]);
        }
        VhOutcome::NotVh { .. } => panic!("torus is VH"),
    }
    let report = analyze_cross_section(&sc, None).unwrap();
    assert_eq!(report.cross_section.z.vertex_count(), 1);
    assert_eq!(report.cross_section.z.edge_count(), 1);
    assert_eq!(report.report1.degree, Some(1));
    assert_eq!(report.report2.degree, Some(1));
    let c = commensuration_from_cross_section(&report.cross_section).unwrap();
    let v = c.validate();
    assert!(v.is_valid() && v.trivial);
    assert_eq!((v.index1, v.index2), (Some(1), Some(1)));

    // corrupted square list: duplicated square forces a local injectivity
    // failure at the midpoint vertex, which the report names
    let mut b = GraphBuilder::new("bad");
    b.vertex("v");
    b.edge("a", "v", "v");
    b.edge("b", "v", "v");
    let g = b.build().unwrap();
    let bad = SquareComplex::from_relators(g, &["abAB".to_string(), "abAB".to_string()]).unwrap();
    let report = analyze_cross_section(&bad, None).unwrap();
    assert!(!report.report1.is_covering);
    assert!(report.report1.violations.iter().any(|(v, k)| {
        v == "a" && *k == covercomm::covering::LocalViolation::NotLocallyInjective
    }));
    pass(9, "torus partition, degree-1 cross-section, trivial commensuration; mutant rejected");
}

#[test]
fn criterion_10_equivariant_averaging() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut done = 0usize;
    let mut attempts = 0usize;
    while done < 50 {
        attempts += 1;
        assert!(attempts < 5000, "instance generation stalled");
        let free_rank = rng.gen_range(0..=3usize);
        let torsion: Vec<u64> = (0..rng.gen_range(0..=2usize))
            .map(|_| [2u64, 3, 4][rng.gen_range(0..3)])
            .collect();
        let n = free_rank + torsion.len();
        if n == 0 {
            continue;
        }
        // a random nonempty coordinate subset spans Z
        let z_coords: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
        if z_coords.is_empty() {
            continue;
        }
        // signed permutations preserving the Z coordinates and the
        // coordinate kinds generate a finite action with Z invariant
        let kind = |i: usize| -> (bool, u64) {
            if i < free_rank {
                (true, 0)
            } else {
                (false, torsion[i - free_rank])
            }
        };
        let mut gens: Vec<ZMat> = Vec::new();
        for _ in 0..rng.gen_range(1..=2usize) {
            let mut target: Vec<usize> = (0..n).collect();
            // shuffle within groups of equal (kind, in-Z) signature
            let mut groups: std::collections::BTreeMap<(bool, u64, bool), Vec<usize>> =
                Default::default();
            for i in 0..n {
                let (f, o) = kind(i);
                groups.entry((f, o, z_coords.contains(&i))).or_default().push(i);
            }
            for members in groups.values() {
                let mut perm = members.clone();
                for i in (1..perm.len()).rev() {
                    let j = rng.gen_range(0..=i);
                    perm.swap(i, j);
                }
                for (src, dst) in members.iter().zip(&perm) {
                    target[*src] = *dst;
                }
            }
            let mut m = ZMat::zero(n, n);
            for i in 0..n {
                let sign = if rng.gen_bool(0.5) { 1i64 } else { -1 };
                m.set(target[i], i, BigInt::from(sign));
            }
            gens.push(m);
        }
        let z_gens: Vec<Vec<BigInt>> = z_coords
            .iter()
            .map(|&s| {
                (0..n)
                    .map(|i| if i == s { BigInt::one() } else { BigInt::zero() })
                    .collect()
            })
            .collect();
        let mut rho0 = ZMat::zero(n, n);
        for &s in &z_coords {
            rho0.set(s, s, BigInt::one());
        }
        let inst = AveragingInstance {
            group: FgAbelian {
                free_rank,
                torsion: torsion.clone(),
            },
            gamma_gens: gens,
            z_gens: z_gens.clone(),
            rho0,
        };
        let avg = match equivariant_average(&inst) {
            Ok(avg) if avg.gamma_order() <= 8 => avg,
            Ok(_) => continue, // Gamma too large for this criterion
            Err(e) => panic!("constructed instance must be valid: {e}"),
        };
        let g = &inst.group;
        let order = BigInt::from(avg.gamma_order() as i64);

        // Gamma-equivariance on generators: gamma rho = rho gamma
        for ggen in &inst.gamma_gens {
            let lhs = g.canon_endo(&ggen.mul(&avg.rho).unwrap());
            let rhs = g.canon_endo(&avg.rho.mul(ggen).unwrap());
            assert_eq!(lhs, rhs, "rho must be Gamma-equivariant");
        }
        // rho restricted to Z is multiplication by |Gamma|
        for z in &z_gens {
            let img = avg.rho.mul_vec(z).unwrap();
            let want: Vec<BigInt> = z.iter().map(|x| x * &order).collect();
            let diff: Vec<BigInt> = img.iter().zip(&want).map(|(a, b)| a - b).collect();
            assert!(g.is_zero_vec(&diff), "rho|Z must be |Gamma| id");
        }
        // the kernel is Gamma-invariant
        for ggen in &inst.gamma_gens {
            for kgen in &avg.kernel_gens {
                let moved = ggen.mul_vec(kgen).unwrap();
                let img = avg.rho.mul_vec(&moved).unwrap();
                assert!(g.is_zero_vec(&img), "ker rho must be Gamma-invariant");
            }
        }
        // |Gamma| M <= Z + ker rho on the generating set
        let mut span = z_gens.clone();
        span.extend(avg.kernel_gens.clone());
        for j in 0..n {
            let v: Vec<BigInt> = (0..n)
                .map(|i| if i == j { order.clone() } else { BigInt::zero() })
                .collect();
            assert!(
                g.member(&v, &span).unwrap(),
                "|Gamma| e_{j} must lie in Z + ker rho"
            );
        }
        done += 1;
    }
    let elapsed = t.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    pass(10, "50 randomized averaging instances satisfy all four identities");
}

/// Extra pipeline glue: the out-finiteness machinery and the abelian
/// completion agree with the closure arithmetic on a scalar-conjugated D4.
#[test]
fn out_finite_scalar_conjugation() {
    let c = AbelianCommensuration::new(
        2,
        IntMatrix::scalar(2, 2),
        IntMatrix::scalar(2, 2),
        d4_generators(),
        d4_generators(),
    )
    .unwrap();
    match is_out_finite(&c, 12).unwrap() {
        OutFiniteOutcome::OutFinite { gamma } => assert_eq!(gamma.len(), 8),
        other => panic!("{other:?}"),
    }
    match complete_abelian(&c, 12).unwrap() {
        CompletionOutcome::Completed(comp) => {
            assert!(abelian::verify_completion(&c, &comp).unwrap().is_empty())
        }
        other => panic!("{other:?}"),
    }
}

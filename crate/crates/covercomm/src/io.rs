//! Line-oriented text formats for every object the tool exchanges:
//! graphs, morphisms, subgroups, commensurations, square complexes,
//! abelian commensurations, and averaging instances. UTF-8, `#` comments.

use std::collections::BTreeMap;

use num_bigint::BigInt;

use crate::abelian::{AbelianCommensuration, AveragingInstance, FgAbelian, IntMatrix};
use crate::amalgam::Commensuration;
use crate::error::{Error, Result};
use crate::graph::{Graph, GraphBuilder, GraphMorphism};
use crate::stallings::SubgroupGraph;
use crate::vh::SquareComplex;
use crate::word::{Letter, Word};
use crate::zlin::ZMat;

#[derive(Clone, Debug)]
pub enum SquareSpec {
    Darts([String; 4]),
    Relator(String),
}

#[derive(Clone, Debug)]
pub struct GraphEntry {
    pub graph: Graph,
    pub squares: Vec<SquareSpec>,
}

#[derive(Clone, Debug)]
pub struct MapEntry {
    pub name: String,
    pub source: String,
    pub target: String,
    pub vmap: BTreeMap<String, String>,
    pub dmap: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct SubgroupEntry {
    pub name: String,
    pub ambient_rank: usize,
    pub generators: Vec<Word>,
}

#[derive(Clone, Debug)]
pub struct CommensurationEntry {
    pub name: String,
    pub commensuration: Commensuration,
}

#[derive(Clone, Debug)]
pub struct AbelianEntry {
    pub name: String,
    pub commensuration: AbelianCommensuration,
}

#[derive(Clone, Debug)]
pub struct AveragingEntry {
    pub name: String,
    pub instance: AveragingInstance,
}

/// Everything found in one file.
#[derive(Clone, Debug, Default)]
pub struct Document {
    pub graphs: Vec<GraphEntry>,
    pub maps: Vec<MapEntry>,
    pub subgroups: Vec<SubgroupEntry>,
    pub commensurations: Vec<CommensurationEntry>,
    pub abelians: Vec<AbelianEntry>,
    pub averagings: Vec<AveragingEntry>,
}

impl Document {
    pub fn merge(&mut self, other: Document) {
        self.graphs.extend(other.graphs);
        self.maps.extend(other.maps);
        self.subgroups.extend(other.subgroups);
        self.commensurations.extend(other.commensurations);
        self.abelians.extend(other.abelians);
        self.averagings.extend(other.averagings);
    }

    pub fn graph(&self, name: &str) -> Option<&GraphEntry> {
        self.graphs.iter().find(|g| g.graph.name() == name)
    }

    /// Resolves a parsed map entry into a checked morphism.
    pub fn resolve_map(&self, entry: &MapEntry) -> Result<GraphMorphism> {
        let src = self
            .graph(&entry.source)
            .ok_or_else(|| Error::Morphism(format!("unknown source graph {:?}", entry.source)))?;
        let dst = self
            .graph(&entry.target)
            .ok_or_else(|| Error::Morphism(format!("unknown target graph {:?}", entry.target)))?;
        GraphMorphism::new(src.graph.clone(), dst.graph.clone(), &entry.vmap, &entry.dmap)
    }

    /// Builds the square complex attached to a graph section.
    pub fn complex(&self, entry: &GraphEntry) -> Result<SquareComplex> {
        let mut darts: Vec<[String; 4]> = Vec::new();
        let mut relators: Vec<String> = Vec::new();
        for sq in &entry.squares {
            match sq {
                SquareSpec::Darts(d) => darts.push(d.clone()),
                SquareSpec::Relator(r) => relators.push(r.clone()),
            }
        }
        if !relators.is_empty() {
            let rc = SquareComplex::from_relators(entry.graph.clone(), &relators)?;
            for sq in rc.squares {
                darts.push([
                    entry.graph.dart(sq[0]).id.clone(),
                    entry.graph.dart(sq[1]).id.clone(),
                    entry.graph.dart(sq[2]).id.clone(),
                    entry.graph.dart(sq[3]).id.clone(),
                ]);
            }
        }
        SquareComplex::new(entry.graph.clone(), &darts)
    }
}

// ---------------------------------------------------------------------------
// parsing
// ---------------------------------------------------------------------------

struct Parser<'a> {
    file: &'a str,
    doc: Document,
}

enum Section {
    None,
    Graph {
        builder: GraphBuilder,
        squares: Vec<SquareSpec>,
    },
    Map(MapEntry),
    Subgroup {
        name: String,
        rank: Option<usize>,
        gens: Vec<Word>,
    },
    Commensuration {
        name: String,
        h_rank: Option<usize>,
        g1_rank: Option<usize>,
        g2_rank: Option<usize>,
        i1: Vec<Word>,
        i2: Vec<Word>,
    },
    Abelian {
        name: String,
        dim: Option<usize>,
        m1: Option<IntMatrix>,
        m2: Option<IntMatrix>,
        p1: Vec<IntMatrix>,
        p2: Vec<IntMatrix>,
    },
    Averaging {
        name: String,
        free_rank: Option<usize>,
        torsion: Vec<u64>,
        gamma: Vec<ZMat>,
        z: Vec<Vec<BigInt>>,
        rho0: Option<ZMat>,
    },
}

pub fn parse_document(text: &str, file: &str) -> Result<Document> {
    let mut p = Parser {
        file,
        doc: Document::default(),
    };
    let mut section = Section::None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let keyword = tokens.next().unwrap();
        let rest: Vec<&str> = tokens.collect();
        if is_section_keyword(keyword) {
            let old = std::mem::replace(&mut section, Section::None);
            p.finish(old, line_no)?;
            section = p.start_section(keyword, &rest, line_no)?;
        } else {
            p.body_line(&mut section, keyword, &rest, line_no)?;
        }
    }
    let end = text.lines().count() + 1;
    p.finish(section, end)?;
    Ok(p.doc)
}

fn is_section_keyword(k: &str) -> bool {
    matches!(
        k,
        "graph" | "map" | "subgroup" | "commensuration" | "abelian-commensuration" | "averaging"
    )
}

impl<'a> Parser<'a> {
    fn err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.file, line, msg)
    }

    fn start_section(&mut self, keyword: &str, rest: &[&str], line: usize) -> Result<Section> {
        let name = rest
            .first()
            .map(|s| s.to_string())
            .unwrap_or_else(|| keyword.to_string());
        Ok(match keyword {
            "graph" => Section::Graph {
                builder: GraphBuilder::new(name),
                squares: Vec::new(),
            },
            "map" => {
                if rest.len() != 3 {
                    return Err(self.err(line, "expected: map <name> <source> <target>"));
                }
                Section::Map(MapEntry {
                    name,
                    source: rest[1].to_string(),
                    target: rest[2].to_string(),
                    vmap: BTreeMap::new(),
                    dmap: BTreeMap::new(),
                })
            }
            "subgroup" => Section::Subgroup {
                name,
                rank: None,
                gens: Vec::new(),
            },
            "commensuration" => Section::Commensuration {
                name,
                h_rank: None,
                g1_rank: None,
                g2_rank: None,
                i1: Vec::new(),
                i2: Vec::new(),
            },
            "abelian-commensuration" => Section::Abelian {
                name,
                dim: None,
                m1: None,
                m2: None,
                p1: Vec::new(),
                p2: Vec::new(),
            },
            "averaging" => Section::Averaging {
                name,
                free_rank: None,
                torsion: Vec::new(),
                gamma: Vec::new(),
                z: Vec::new(),
                rho0: None,
            },
            _ => unreachable!(),
        })
    }

    fn body_line(
        &mut self,
        section: &mut Section,
        keyword: &str,
        rest: &[&str],
        line: usize,
    ) -> Result<()> {
        match section {
            Section::None => Err(self.err(line, format!("{keyword:?} outside of any section"))),
            Section::Graph { builder, squares } => match keyword {
                "vertex" => {
                    if rest.len() != 1 {
                        return Err(self.err(line, "expected: vertex <id>"));
                    }
                    builder.vertex(rest[0]);
                    Ok(())
                }
                "edge" => match rest {
                    [id, src, dst] => {
                        builder.edge(*id, *src, *dst);
                        Ok(())
                    }
                    [id, src, dst, label] => {
                        let l = label
                            .chars()
                            .next()
                            .and_then(Letter::from_char)
                            .filter(|l| !l.inv && label.len() == 1)
                            .ok_or_else(|| {
                                self.err(line, format!("label {label:?} must be one lowercase letter"))
                            })?;
                        builder.labeled_edge(*id, *src, *dst, l);
                        Ok(())
                    }
                    _ => Err(self.err(line, "expected: edge <id> <src> <dst> [label]")),
                },
                "square" => {
                    if rest.len() != 4 {
                        return Err(self.err(line, "expected: square <d1> <d2> <d3> <d4>"));
                    }
                    squares.push(SquareSpec::Darts([
                        rest[0].into(),
                        rest[1].into(),
                        rest[2].into(),
                        rest[3].into(),
                    ]));
                    Ok(())
                }
                "relator" => {
                    if rest.len() != 1 {
                        return Err(self.err(line, "expected: relator <word>"));
                    }
                    squares.push(SquareSpec::Relator(rest[0].to_string()));
                    Ok(())
                }
                _ => Err(self.err(line, format!("unknown graph line {keyword:?}"))),
            },
            Section::Map(entry) => match keyword {
                "vmap" => {
                    if rest.len() != 2 {
                        return Err(self.err(line, "expected: vmap <u> <v>"));
                    }
                    entry.vmap.insert(rest[0].into(), rest[1].into());
                    Ok(())
                }
                "dmap" => {
                    if rest.len() != 2 {
                        return Err(self.err(line, "expected: dmap <d> <e>"));
                    }
                    entry.dmap.insert(rest[0].into(), rest[1].into());
                    Ok(())
                }
                _ => Err(self.err(line, format!("unknown map line {keyword:?}"))),
            },
            Section::Subgroup { rank, gens, .. } => match keyword {
                "ambient" => {
                    *rank = Some(self.parse_usize(rest, line, "ambient <rank>")?);
                    Ok(())
                }
                "gen" => {
                    let r = rank
                        .ok_or_else(|| self.err(line, "ambient rank must precede the generators"))?;
                    if rest.len() != 1 {
                        return Err(self.err(line, "expected: gen <word>"));
                    }
                    gens.push(Word::parse(rest[0], r).map_err(|e| self.err(line, e.to_string()))?);
                    Ok(())
                }
                _ => Err(self.err(line, format!("unknown subgroup line {keyword:?}"))),
            },
            Section::Commensuration {
                h_rank,
                g1_rank,
                g2_rank,
                i1,
                i2,
                ..
            } => match keyword {
                "h-rank" => {
                    *h_rank = Some(self.parse_usize(rest, line, "h-rank <m>")?);
                    Ok(())
                }
                "g1-rank" => {
                    *g1_rank = Some(self.parse_usize(rest, line, "g1-rank <n>")?);
                    Ok(())
                }
                "g2-rank" => {
                    *g2_rank = Some(self.parse_usize(rest, line, "g2-rank <n>")?);
                    Ok(())
                }
                "i1" | "i2" => {
                    let rank = if keyword == "i1" { *g1_rank } else { *g2_rank };
                    let r = rank
                        .ok_or_else(|| self.err(line, "factor ranks must precede the image words"))?;
                    if rest.len() != 1 {
                        return Err(self.err(line, format!("expected: {keyword} <word>")));
                    }
                    let w = Word::parse(rest[0], r).map_err(|e| self.err(line, e.to_string()))?;
                    if keyword == "i1" {
                        i1.push(w);
                    } else {
                        i2.push(w);
                    }
                    Ok(())
                }
                _ => Err(self.err(line, format!("unknown commensuration line {keyword:?}"))),
            },
            Section::Abelian {
                dim, m1, m2, p1, p2, ..
            } => match keyword {
                "dim" => {
                    *dim = Some(self.parse_usize(rest, line, "dim <d>")?);
                    Ok(())
                }
                "m1" | "m2" | "p1" | "p2" => {
                    let d = dim.ok_or_else(|| self.err(line, "dim must come first"))?;
                    let m = self.parse_int_matrix(d, rest, line)?;
                    match keyword {
                        "m1" => *m1 = Some(m),
                        "m2" => *m2 = Some(m),
                        "p1" => p1.push(m),
                        _ => p2.push(m),
                    }
                    Ok(())
                }
                _ => Err(self.err(line, format!("unknown abelian line {keyword:?}"))),
            },
            Section::Averaging {
                free_rank,
                torsion,
                gamma,
                z,
                rho0,
                ..
            } => match keyword {
                "free-rank" => {
                    *free_rank = Some(self.parse_usize(rest, line, "free-rank <r>")?);
                    Ok(())
                }
                "torsion" => {
                    for t in rest {
                        let v: u64 = t
                            .parse()
                            .map_err(|_| self.err(line, format!("bad torsion order {t:?}")))?;
                        if v < 2 {
                            return Err(self.err(line, "torsion orders must be at least 2"));
                        }
                        torsion.push(v);
                    }
                    Ok(())
                }
                "gamma" | "rho0" => {
                    let r = free_rank
                        .ok_or_else(|| self.err(line, "free-rank must come before matrices"))?;
                    let n = r + torsion.len();
                    let m = self.parse_zmat(n, rest, line)?;
                    if keyword == "gamma" {
                        gamma.push(m);
                    } else {
                        *rho0 = Some(m);
                    }
                    Ok(())
                }
                "z" => {
                    let r = free_rank
                        .ok_or_else(|| self.err(line, "free-rank must come before vectors"))?;
                    let n = r + torsion.len();
                    if rest.len() != n {
                        return Err(self.err(line, format!("expected {n} integers")));
                    }
                    let v: std::result::Result<Vec<BigInt>, _> =
                        rest.iter().map(|s| s.parse::<BigInt>()).collect();
                    z.push(v.map_err(|_| self.err(line, "bad integer in z vector"))?);
                    Ok(())
                }
                _ => Err(self.err(line, format!("unknown averaging line {keyword:?}"))),
            },
        }
    }

    fn parse_usize(&self, rest: &[&str], line: usize, what: &str) -> Result<usize> {
        if rest.len() != 1 {
            return Err(self.err(line, format!("expected: {what}")));
        }
        rest[0]
            .parse()
            .map_err(|_| self.err(line, format!("bad integer {:?}", rest[0])))
    }

    fn parse_int_matrix(&self, d: usize, rest: &[&str], line: usize) -> Result<IntMatrix> {
        if rest.len() != d * d {
            return Err(self.err(
                line,
                format!("expected {} integers for a {d}x{d} matrix", d * d),
            ));
        }
        let entries: std::result::Result<Vec<i64>, _> =
            rest.iter().map(|s| s.parse::<i64>()).collect();
        IntMatrix::new(d, entries.map_err(|_| self.err(line, "bad matrix entry"))?)
            .map_err(|e| self.err(line, e.to_string()))
    }

    fn parse_zmat(&self, n: usize, rest: &[&str], line: usize) -> Result<ZMat> {
        if rest.len() != n * n {
            return Err(self.err(
                line,
                format!("expected {} integers for a {n}x{n} matrix", n * n),
            ));
        }
        let entries: std::result::Result<Vec<BigInt>, _> =
            rest.iter().map(|s| s.parse::<BigInt>()).collect();
        let entries = entries.map_err(|_| self.err(line, "bad matrix entry"))?;
        Ok(ZMat::from_fn(n, n, |i, j| entries[i * n + j].clone()))
    }

    fn finish(&mut self, section: Section, line: usize) -> Result<()> {
        match section {
            Section::None => Ok(()),
            Section::Graph { builder, squares } => {
                let graph = builder.build().map_err(|e| self.err(line, e.to_string()))?;
                self.doc.graphs.push(GraphEntry { graph, squares });
                Ok(())
            }
            Section::Map(entry) => {
                self.doc.maps.push(entry);
                Ok(())
            }
            Section::Subgroup { name, rank, gens } => {
                let ambient_rank =
                    rank.ok_or_else(|| self.err(line, "subgroup section missing ambient rank"))?;
                self.doc.subgroups.push(SubgroupEntry {
                    name,
                    ambient_rank,
                    generators: gens,
                });
                Ok(())
            }
            Section::Commensuration {
                name,
                h_rank,
                g1_rank,
                g2_rank,
                i1,
                i2,
            } => {
                let (h, g1, g2) = match (h_rank, g1_rank, g2_rank) {
                    (Some(h), Some(g1), Some(g2)) => (h, g1, g2),
                    _ => return Err(self.err(line, "commensuration section missing ranks")),
                };
                let commensuration = Commensuration::new(h, g1, g2, i1, i2)
                    .map_err(|e| self.err(line, e.to_string()))?;
                self.doc.commensurations.push(CommensurationEntry {
                    name,
                    commensuration,
                });
                Ok(())
            }
            Section::Abelian {
                name,
                dim,
                m1,
                m2,
                p1,
                p2,
            } => {
                let d = dim.ok_or_else(|| self.err(line, "abelian section missing dim"))?;
                let m1 = m1.ok_or_else(|| self.err(line, "abelian section missing m1"))?;
                let m2 = m2.ok_or_else(|| self.err(line, "abelian section missing m2"))?;
                let commensuration = AbelianCommensuration::new(d, m1, m2, p1, p2)
                    .map_err(|e| self.err(line, e.to_string()))?;
                self.doc.abelians.push(AbelianEntry {
                    name,
                    commensuration,
                });
                Ok(())
            }
            Section::Averaging {
                name,
                free_rank,
                torsion,
                gamma,
                z,
                rho0,
            } => {
                let r = free_rank
                    .ok_or_else(|| self.err(line, "averaging section missing free-rank"))?;
                let rho0 = rho0.ok_or_else(|| self.err(line, "averaging section missing rho0"))?;
                self.doc.averagings.push(AveragingEntry {
                    name,
                    instance: AveragingInstance {
                        group: FgAbelian {
                            free_rank: r,
                            torsion,
                        },
                        gamma_gens: gamma,
                        z_gens: z,
                        rho0,
                    },
                });
                Ok(())
            }
        }
    }
}

// ---------------------------------------------------------------------------
// emission
// ---------------------------------------------------------------------------

pub fn emit_graph(g: &Graph) -> String {
    let mut out = format!("graph {}\n", g.name());
    for v in g.vertex_ids() {
        out.push_str(&format!("vertex {v}\n"));
    }
    for (d, _) in g.geometric_edges() {
        let label = g
            .label(d)
            .map(|l| format!(" {}", l.to_char()))
            .unwrap_or_default();
        out.push_str(&format!(
            "edge {} {} {}{}\n",
            g.dart(d).id,
            g.vertex_id(g.origin(d)),
            g.vertex_id(g.terminus(d)),
            label
        ));
    }
    out
}

pub fn emit_complex(sc: &SquareComplex) -> String {
    let mut out = emit_graph(&sc.skeleton);
    for sq in &sc.squares {
        out.push_str(&format!(
            "square {} {} {} {}\n",
            sc.skeleton.dart(sq[0]).id,
            sc.skeleton.dart(sq[1]).id,
            sc.skeleton.dart(sq[2]).id,
            sc.skeleton.dart(sq[3]).id,
        ));
    }
    out
}

pub fn emit_morphism(name: &str, m: &GraphMorphism) -> String {
    let mut out = format!("map {name} {} {}\n", m.source.name(), m.target.name());
    for (v, &w) in m.vmap.iter().enumerate() {
        out.push_str(&format!(
            "vmap {} {}\n",
            m.source.vertex_id(v),
            m.target.vertex_id(w)
        ));
    }
    for (d, _) in m.source.geometric_edges() {
        out.push_str(&format!(
            "dmap {} {}\n",
            m.source.dart(d).id,
            m.target.dart(m.dmap[d]).id
        ));
    }
    out
}

pub fn emit_subgroup(name: &str, s: &SubgroupGraph) -> String {
    let mut out = format!("subgroup {name}\nambient {}\n", s.ambient_rank());
    for b in s.basis() {
        out.push_str(&format!("gen {b}\n"));
    }
    out
}

pub fn emit_commensuration(name: &str, c: &Commensuration) -> String {
    let mut out = format!(
        "commensuration {name}\nh-rank {}\ng1-rank {}\ng2-rank {}\n",
        c.h_rank, c.g1_rank, c.g2_rank
    );
    for w in &c.i1_images {
        out.push_str(&format!("i1 {w}\n"));
    }
    for w in &c.i2_images {
        out.push_str(&format!("i2 {w}\n"));
    }
    out
}

pub fn emit_abelian(name: &str, c: &AbelianCommensuration) -> String {
    let fmt_m = |m: &IntMatrix| -> String {
        m.entries()
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = format!("abelian-commensuration {name}\ndim {}\n", c.dim);
    out.push_str(&format!("m1 {}\n", fmt_m(&c.m1)));
    out.push_str(&format!("m2 {}\n", fmt_m(&c.m2)));
    for p in &c.p1 {
        out.push_str(&format!("p1 {}\n", fmt_m(p)));
    }
    for p in &c.p2 {
        out.push_str(&format!("p2 {}\n", fmt_m(p)));
    }
    out
}

pub fn read_documents(paths: &[std::path::PathBuf]) -> Result<Document> {
    let mut doc = Document::default();
    for path in paths {
        let text = std::fs::read_to_string(path)?;
        let name = path.to_string_lossy().to_string();
        doc.merge(parse_document(&text, &name)?);
    }
    Ok(doc)
}

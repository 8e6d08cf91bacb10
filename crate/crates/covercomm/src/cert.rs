//! Machine-readable certificates. Every expensive search emits one, and
//! `verify` replays only the cheap check (never the search), so runs are
//! reproducible and auditable. Certificates carry digests of their input
//! files, the tool version, and the parameters used.

use std::fmt;

use num_bigint::BigInt;
use sha2::{Digest, Sha256};

use crate::abelian::{
    verify_completion, AbelianCommensuration, AbelianCompletion, IntMatrix, RatLattice,
};
use crate::amalgam::{
    verify_quotient_certificate, Commensuration, FiniteAmalgam, FiniteQuotientCertificate,
    NormalCommensuration,
};
use crate::covering::analyze_covering;
use crate::error::{Error, Result};
use crate::io::{self, Document};
use crate::permgroup::{PermGroup, Permutation};
use crate::stallings::SubgroupGraph;
use crate::vh::CrossSectionReport;
use crate::zlin::ZMat;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertKind {
    Covering,
    CommonCover,
    NormalExtension,
    FiniteQuotient,
    Completion,
    Obstruction,
    CrossSection,
}

impl CertKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CertKind::Covering => "covering",
            CertKind::CommonCover => "common-cover",
            CertKind::NormalExtension => "normal-extension",
            CertKind::FiniteQuotient => "finite-quotient",
            CertKind::Completion => "completion",
            CertKind::Obstruction => "obstruction",
            CertKind::CrossSection => "cross-section",
        }
    }

    pub fn parse(s: &str) -> Option<CertKind> {
        Some(match s {
            "covering" => CertKind::Covering,
            "common-cover" => CertKind::CommonCover,
            "normal-extension" => CertKind::NormalExtension,
            "finite-quotient" => CertKind::FiniteQuotient,
            "completion" => CertKind::Completion,
            "obstruction" => CertKind::Obstruction,
            "cross-section" => CertKind::CrossSection,
            _ => return None,
        })
    }
}

impl fmt::Display for CertKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub kind: CertKind,
    pub version: String,
    pub inputs: Vec<(String, String)>,
    pub params: Vec<(String, String)>,
    pub payload: String,
    pub summary: Vec<(String, String)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

impl Certificate {
    pub fn new(kind: CertKind) -> Certificate {
        Certificate {
            kind,
            version: TOOL_VERSION.to_string(),
            inputs: Vec::new(),
            params: Vec::new(),
            payload: String::new(),
            summary: Vec::new(),
        }
    }

    pub fn input(mut self, name: &str, bytes: &[u8]) -> Certificate {
        self.inputs.push((name.to_string(), sha256_hex(bytes)));
        self
    }

    pub fn param(mut self, key: &str, value: impl fmt::Display) -> Certificate {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    pub fn summarize(mut self, key: &str, value: impl fmt::Display) -> Certificate {
        self.summary.push((key.to_string(), value.to_string()));
        self
    }

    pub fn with_payload(mut self, payload: String) -> Certificate {
        self.payload = payload;
        self
    }

    pub fn emit(&self) -> String {
        let mut out = format!("certificate {}\nversion {}\n", self.kind, self.version);
        for (name, digest) in &self.inputs {
            out.push_str(&format!("input {name} sha256 {digest}\n"));
        }
        for (k, v) in &self.params {
            out.push_str(&format!("param {k} {v}\n"));
        }
        out.push_str("begin-payload\n");
        out.push_str(&self.payload);
        if !self.payload.ends_with('\n') && !self.payload.is_empty() {
            out.push('\n');
        }
        out.push_str("end-payload\n");
        for (k, v) in &self.summary {
            out.push_str(&format!("summary {k} {v}\n"));
        }
        out
    }

    pub fn parse(text: &str, file: &str) -> Result<Certificate> {
        let mut kind = None;
        let mut version = String::new();
        let mut inputs = Vec::new();
        let mut params = Vec::new();
        let mut summary = Vec::new();
        let mut payload = String::new();
        let mut in_payload = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            if in_payload {
                if raw.trim() == "end-payload" {
                    in_payload = false;
                } else {
                    payload.push_str(raw);
                    payload.push('\n');
                }
                continue;
            }
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            match tokens.as_slice() {
                ["certificate", k] => {
                    kind = CertKind::parse(k);
                    if kind.is_none() {
                        return Err(Error::parse(file, line_no, format!("unknown kind {k:?}")));
                    }
                }
                ["version", v] => version = v.to_string(),
                ["input", name, "sha256", digest] => {
                    inputs.push((name.to_string(), digest.to_string()))
                }
                ["param", k, v] => params.push((k.to_string(), v.to_string())),
                ["summary", k, v] => summary.push((k.to_string(), v.to_string())),
                ["begin-payload"] => in_payload = true,
                _ => {
                    return Err(Error::parse(
                        file,
                        line_no,
                        format!("unexpected certificate line {line:?}"),
                    ))
                }
            }
        }
        if in_payload {
            return Err(Error::Certificate("unterminated payload".into()));
        }
        Ok(Certificate {
            kind: kind.ok_or_else(|| Error::Certificate("missing certificate kind".into()))?,
            version,
            inputs,
            params,
            payload,
            summary,
        })
    }

    pub fn summary_value(&self, key: &str) -> Option<&str> {
        self.summary
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

// ---------------------------------------------------------------------------
// payload special blocks
// ---------------------------------------------------------------------------

/// Payload text splits into a leading standard document plus optional
/// trailing blocks for finite amalgams, quotient certificates, and
/// completions.
#[derive(Default)]
pub struct Payload {
    pub doc: Document,
    pub amalgam: Option<FiniteAmalgam>,
    pub quotient: Option<FiniteQuotientCertificate>,
    pub completion: Option<AbelianCompletion>,
}

fn is_special_keyword(k: &str) -> bool {
    matches!(k, "finite-amalgam" | "quotient-certificate" | "completion")
}

pub fn parse_payload(text: &str, file: &str) -> Result<Payload> {
    let mut doc_lines: Vec<&str> = Vec::new();
    let mut special: Vec<(usize, &str)> = Vec::new();
    let mut in_special = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let first = line.split_whitespace().next().unwrap_or("");
        if is_special_keyword(first) {
            in_special = true;
        }
        if in_special {
            if !line.is_empty() {
                special.push((idx + 1, line));
            }
        } else {
            doc_lines.push(raw);
        }
    }
    let doc = io::parse_document(&doc_lines.join("\n"), file)?;
    let mut payload = Payload {
        doc,
        ..Default::default()
    };

    // parse the special blocks
    let mut i = 0usize;
    let err = |line: usize, msg: String| Error::parse(file, line, msg);
    let parse_perm = |tokens: &[&str], line: usize| -> Result<Permutation> {
        let images: std::result::Result<Vec<usize>, _> =
            tokens.iter().map(|t| t.parse::<usize>()).collect();
        Permutation::new(images.map_err(|_| err(line, "bad permutation entry".into()))?)
            .map_err(|e| err(line, e.to_string()))
    };
    while i < special.len() {
        let (line, text_line) = special[i];
        let tokens: Vec<&str> = text_line.split_whitespace().collect();
        match tokens[0] {
            "finite-amalgam" => {
                i += 1;
                let mut a_degree = None;
                let mut b_degree = None;
                let mut a_gens: Vec<Permutation> = Vec::new();
                let mut b_gens: Vec<Permutation> = Vec::new();
                let mut c_in_a: Vec<Permutation> = Vec::new();
                let mut c_in_b: Vec<Permutation> = Vec::new();
                while i < special.len() && !is_special_keyword(special[i].1.split_whitespace().next().unwrap()) {
                    let (ln, l) = special[i];
                    let t: Vec<&str> = l.split_whitespace().collect();
                    match t[0] {
                        "a-degree" => a_degree = Some(t[1].parse::<usize>().map_err(|_| err(ln, "bad degree".into()))?),
                        "b-degree" => b_degree = Some(t[1].parse::<usize>().map_err(|_| err(ln, "bad degree".into()))?),
                        "a-gen" => a_gens.push(parse_perm(&t[1..], ln)?),
                        "b-gen" => b_gens.push(parse_perm(&t[1..], ln)?),
                        "c-in-a" => c_in_a.push(parse_perm(&t[1..], ln)?),
                        "c-in-b" => c_in_b.push(parse_perm(&t[1..], ln)?),
                        other => return Err(err(ln, format!("unknown amalgam line {other:?}"))),
                    }
                    i += 1;
                }
                let ad = a_degree.ok_or_else(|| err(line, "missing a-degree".into()))?;
                let bd = b_degree.ok_or_else(|| err(line, "missing b-degree".into()))?;
                let a = PermGroup::new(ad, a_gens).map_err(|e| err(line, e.to_string()))?;
                let b = PermGroup::new(bd, b_gens).map_err(|e| err(line, e.to_string()))?;
                payload.amalgam = Some(
                    FiniteAmalgam::new(a, b, c_in_a, c_in_b).map_err(|e| err(line, e.to_string()))?,
                );
            }
            "quotient-certificate" => {
                i += 1;
                let mut degree = None;
                let mut a_images = Vec::new();
                let mut b_images = Vec::new();
                let mut image_order = None;
                let mut injective = false;
                while i < special.len() && !is_special_keyword(special[i].1.split_whitespace().next().unwrap()) {
                    let (ln, l) = special[i];
                    let t: Vec<&str> = l.split_whitespace().collect();
                    match t[0] {
                        "degree" => degree = Some(t[1].parse::<usize>().map_err(|_| err(ln, "bad degree".into()))?),
                        "a-image" => a_images.push(parse_perm(&t[1..], ln)?),
                        "b-image" => b_images.push(parse_perm(&t[1..], ln)?),
                        "image-order" => image_order = Some(t[1].parse::<usize>().map_err(|_| err(ln, "bad order".into()))?),
                        "injective" => injective = t[1] == "true",
                        other => return Err(err(ln, format!("unknown quotient line {other:?}"))),
                    }
                    i += 1;
                }
                payload.quotient = Some(FiniteQuotientCertificate {
                    degree: degree.ok_or_else(|| err(line, "missing degree".into()))?,
                    a_images,
                    b_images,
                    image_order: image_order.ok_or_else(|| err(line, "missing image-order".into()))?,
                    injective_on_factors: injective,
                });
            }
            "completion" => {
                i += 1;
                let mut den = None;
                let mut basis = None;
                let mut gamma = Vec::new();
                let mut conj_den = [None, None];
                let mut conj_num: [Option<ZMat>; 2] = [None, None];
                let mut indices = [None, None];
                let mut dim = None;
                while i < special.len() && !is_special_keyword(special[i].1.split_whitespace().next().unwrap()) {
                    let (ln, l) = special[i];
                    let t: Vec<&str> = l.split_whitespace().collect();
                    let parse_big = |s: &str| -> Result<BigInt> {
                        s.parse::<BigInt>().map_err(|_| err(ln, "bad integer".into()))
                    };
                    let parse_square = |toks: &[&str]| -> Result<ZMat> {
                        let n2 = toks.len();
                        let n = (n2 as f64).sqrt() as usize;
                        if n * n != n2 {
                            return Err(err(ln, "matrix entries are not a square count".into()));
                        }
                        let entries: Result<Vec<BigInt>> =
                            toks.iter().map(|s| parse_big(s)).collect();
                        let entries = entries?;
                        Ok(ZMat::from_fn(n, n, |r, c| entries[r * n + c].clone()))
                    };
                    match t[0] {
                        "dim" => dim = Some(t[1].parse::<usize>().map_err(|_| err(ln, "bad dim".into()))?),
                        "lattice-den" => den = Some(parse_big(t[1])?),
                        "lattice-basis" => basis = Some(parse_square(&t[1..])?),
                        "gamma" => {
                            let m = parse_square(&t[1..])?;
                            let d = m.rows;
                            let ints: Result<Vec<i64>> = (0..d * d)
                                .map(|k| {
                                    i64::try_from(m.get(k / d, k % d))
                                        .map_err(|_| err(ln, "gamma entry overflow".into()))
                                })
                                .collect();
                            gamma.push(IntMatrix::new(d, ints?).map_err(|e| err(ln, e.to_string()))?);
                        }
                        "conj1-den" => conj_den[0] = Some(parse_big(t[1])?),
                        "conj2-den" => conj_den[1] = Some(parse_big(t[1])?),
                        "conj1" => conj_num[0] = Some(parse_square(&t[1..])?),
                        "conj2" => conj_num[1] = Some(parse_square(&t[1..])?),
                        "index1" => indices[0] = Some(parse_big(t[1])?),
                        "index2" => indices[1] = Some(parse_big(t[1])?),
                        other => return Err(err(ln, format!("unknown completion line {other:?}"))),
                    }
                    i += 1;
                }
                let _ = dim;
                let den = den.ok_or_else(|| err(line, "missing lattice-den".into()))?;
                let basis = basis.ok_or_else(|| err(line, "missing lattice-basis".into()))?;
                payload.completion = Some(AbelianCompletion {
                    lattice: RatLattice::from_basis(den, basis),
                    gamma,
                    conj_num: [
                        conj_num[0].clone().ok_or_else(|| err(line, "missing conj1".into()))?,
                        conj_num[1].clone().ok_or_else(|| err(line, "missing conj2".into()))?,
                    ],
                    conj_den: [
                        conj_den[0].clone().ok_or_else(|| err(line, "missing conj1-den".into()))?,
                        conj_den[1].clone().ok_or_else(|| err(line, "missing conj2-den".into()))?,
                    ],
                    indices: [
                        indices[0].clone().ok_or_else(|| err(line, "missing index1".into()))?,
                        indices[1].clone().ok_or_else(|| err(line, "missing index2".into()))?,
                    ],
                });
            }
            other => return Err(Error::Certificate(format!("unknown special block {other:?}"))),
        }
    }
    Ok(payload)
}

pub fn emit_finite_amalgam(fa: &FiniteAmalgam) -> String {
    let perm = |p: &Permutation| {
        p.images()
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = format!(
        "finite-amalgam\na-degree {}\nb-degree {}\n",
        fa.a.degree, fa.b.degree
    );
    for g in &fa.a.gens {
        out.push_str(&format!("a-gen {}\n", perm(g)));
    }
    for g in &fa.b.gens {
        out.push_str(&format!("b-gen {}\n", perm(g)));
    }
    for g in &fa.c_in_a {
        out.push_str(&format!("c-in-a {}\n", perm(g)));
    }
    for g in &fa.c_in_b {
        out.push_str(&format!("c-in-b {}\n", perm(g)));
    }
    out
}

pub fn emit_quotient_certificate(cert: &FiniteQuotientCertificate) -> String {
    let perm = |p: &Permutation| {
        p.images()
            .iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let mut out = format!("quotient-certificate\ndegree {}\n", cert.degree);
    for g in &cert.a_images {
        out.push_str(&format!("a-image {}\n", perm(g)));
    }
    for g in &cert.b_images {
        out.push_str(&format!("b-image {}\n", perm(g)));
    }
    out.push_str(&format!("image-order {}\n", cert.image_order));
    out.push_str(&format!(
        "injective {}\n",
        if cert.injective_on_factors { "true" } else { "false" }
    ));
    out
}

pub fn emit_completion(dim: usize, comp: &AbelianCompletion) -> String {
    let zfmt = |m: &ZMat| -> String {
        let mut toks = Vec::new();
        for i in 0..m.rows {
            for j in 0..m.cols {
                toks.push(m.get(i, j).to_string());
            }
        }
        toks.join(" ")
    };
    let mut out = format!("completion\ndim {dim}\n");
    out.push_str(&format!("lattice-den {}\n", comp.lattice.den));
    out.push_str(&format!("lattice-basis {}\n", zfmt(&comp.lattice.basis)));
    for g in &comp.gamma {
        let toks: Vec<String> = g.entries().iter().map(|x| x.to_string()).collect();
        out.push_str(&format!("gamma {}\n", toks.join(" ")));
    }
    out.push_str(&format!("conj1-den {}\n", comp.conj_den[0]));
    out.push_str(&format!("conj1 {}\n", zfmt(&comp.conj_num[0])));
    out.push_str(&format!("conj2-den {}\n", comp.conj_den[1]));
    out.push_str(&format!("conj2 {}\n", zfmt(&comp.conj_num[1])));
    out.push_str(&format!("index1 {}\n", comp.indices[0]));
    out.push_str(&format!("index2 {}\n", comp.indices[1]));
    out
}

// ---------------------------------------------------------------------------
// verification (cheap replay)
// ---------------------------------------------------------------------------

/// Replays the cheap check of a certificate; returns the list of problems
/// (empty iff the certificate verifies). Digests are compared against the
/// provided inputs, by position; a mismatch is an error, not an issue.
pub fn verify_certificate(cert: &Certificate, inputs: &[(String, Vec<u8>)]) -> Result<Vec<String>> {
    for (i, (name, bytes)) in inputs.iter().enumerate() {
        match cert.inputs.get(i) {
            None => {
                return Err(Error::Certificate(format!(
                    "certificate records {} inputs but {} were provided",
                    cert.inputs.len(),
                    inputs.len()
                )))
            }
            Some((rec_name, rec_digest)) => {
                let digest = sha256_hex(bytes);
                if digest != *rec_digest {
                    return Err(Error::Certificate(format!(
                        "digest mismatch for input {name:?} (recorded as {rec_name:?})"
                    )));
                }
            }
        }
    }

    let payload = parse_payload(&cert.payload, "payload")?;
    let mut issues = Vec::new();
    let expect = |key: &str| -> Result<String> {
        cert.summary_value(key)
            .map(|s| s.to_string())
            .ok_or_else(|| Error::Certificate(format!("missing summary key {key:?}")))
    };

    match cert.kind {
        CertKind::Covering => {
            let entry = payload
                .doc
                .maps
                .first()
                .ok_or_else(|| Error::Certificate("covering payload needs a map".into()))?;
            let m = payload.doc.resolve_map(entry)?;
            let report = analyze_covering(&m);
            if !report.is_covering {
                issues.push("map is not a covering".into());
            }
            let want: usize = expect("degree")?.parse().unwrap_or(0);
            if report.degree != Some(want) {
                issues.push(format!(
                    "degree is {:?}, certificate claims {want}",
                    report.degree
                ));
            }
        }
        CertKind::CommonCover => {
            if payload.doc.maps.len() < 2 {
                return Err(Error::Certificate("common-cover payload needs two maps".into()));
            }
            let p1 = payload.doc.resolve_map(&payload.doc.maps[0])?;
            let p2 = payload.doc.resolve_map(&payload.doc.maps[1])?;
            let r1 = analyze_covering(&p1);
            let r2 = analyze_covering(&p2);
            if !r1.is_covering {
                issues.push("first projection is not a covering".into());
            }
            if !r2.is_covering {
                issues.push("second projection is not a covering".into());
            }
            let d1: usize = expect("degree1")?.parse().unwrap_or(0);
            let d2: usize = expect("degree2")?.parse().unwrap_or(0);
            if r1.degree != Some(d1) || r2.degree != Some(d2) {
                issues.push("degrees disagree with the summary".into());
            }
            if let (Some(d1), Some(d2)) = (r1.degree, r2.degree) {
                let chi = p1.source.euler_characteristic();
                if chi != d1 as i64 * p1.target.euler_characteristic()
                    || chi != d2 as i64 * p2.target.euler_characteristic()
                {
                    issues.push("Euler characteristic is not multiplicative".into());
                }
            }
        }
        CertKind::NormalExtension => {
            let nc = payload_normal_extension(&payload)?;
            issues.extend(nc.verify()?);
            let want: usize = expect("h-index")?.parse().unwrap_or(0);
            if nc.h_index != want {
                issues.push(format!("index [H:N] is {}, summary says {want}", nc.h_index));
            }
        }
        CertKind::FiniteQuotient => {
            let fa = payload
                .amalgam
                .as_ref()
                .ok_or_else(|| Error::Certificate("missing finite-amalgam block".into()))?;
            let qc = payload
                .quotient
                .as_ref()
                .ok_or_else(|| Error::Certificate("missing quotient-certificate block".into()))?;
            issues.extend(verify_quotient_certificate(fa, qc)?);
        }
        CertKind::Completion => {
            let entry = payload
                .doc
                .abelians
                .first()
                .ok_or_else(|| Error::Certificate("missing abelian-commensuration".into()))?;
            let comp = payload
                .completion
                .as_ref()
                .ok_or_else(|| Error::Certificate("missing completion block".into()))?;
            issues.extend(verify_completion(&entry.commensuration, comp)?);
        }
        CertKind::Obstruction => {
            if !payload.doc.subgroups.is_empty() {
                let nc = payload_normal_extension(&payload)?;
                issues.extend(nc.verify()?);
            }
            if let (Some(fa), Some(qc)) = (&payload.amalgam, &payload.quotient) {
                issues.extend(verify_quotient_certificate(fa, qc)?);
            }
        }
        CertKind::CrossSection => {
            if payload.doc.maps.len() < 2 {
                return Err(Error::Certificate("cross-section payload needs two maps".into()));
            }
            let p1 = payload.doc.resolve_map(&payload.doc.maps[0])?;
            let p2 = payload.doc.resolve_map(&payload.doc.maps[1])?;
            let complex_entry = payload
                .doc
                .graphs
                .iter()
                .find(|g| !g.squares.is_empty())
                .ok_or_else(|| Error::Certificate("missing square complex".into()))?;
            let sc = payload.doc.complex(complex_entry)?;
            let zv: usize = expect("z-vertices")?.parse().unwrap_or(0);
            let ze: usize = expect("z-edges")?.parse().unwrap_or(0);
            if p1.source.vertex_count() != zv || p1.source.edge_count() != ze {
                issues.push("cross-section counts disagree with the summary".into());
            }
            if ze != sc.square_count() {
                issues.push("edge count does not equal the square count".into());
            }
            let r1 = analyze_covering(&p1);
            let r2 = analyze_covering(&p2);
            if !r1.is_covering || !r2.is_covering {
                issues.push("a projection is not a covering".into());
            }
        }
    }
    Ok(issues)
}

fn payload_normal_extension(payload: &Payload) -> Result<NormalCommensuration> {
    let centry = payload
        .doc
        .commensurations
        .first()
        .ok_or_else(|| Error::Certificate("missing commensuration".into()))?;
    let sentry = payload
        .doc
        .subgroups
        .first()
        .ok_or_else(|| Error::Certificate("missing N subgroup".into()))?;
    let c = centry.commensuration.clone();
    if sentry.ambient_rank != c.h_rank {
        return Err(Error::Certificate(
            "N lives in the wrong ambient free group".into(),
        ));
    }
    let n_in_h = SubgroupGraph::from_generators(c.h_rank, &sentry.generators)?;
    let h_index = n_in_h
        .index()
        .ok_or_else(|| Error::Certificate("N has infinite index in H".into()))?;
    let basis = n_in_h.basis();
    let im1: Vec<crate::word::Word> = basis.iter().map(|b| b.substitute(&c.i1_images)).collect();
    let im2: Vec<crate::word::Word> = basis.iter().map(|b| b.substitute(&c.i2_images)).collect();
    let n_in_g1 = SubgroupGraph::from_generators(c.g1_rank, &im1)?;
    let n_in_g2 = SubgroupGraph::from_generators(c.g2_rank, &im2)?;
    Ok(NormalCommensuration {
        base: c,
        n_in_h,
        n_in_g1,
        n_in_g2,
        h_index,
        steps: 0,
    })
}

// ---------------------------------------------------------------------------
// certificate builders
// ---------------------------------------------------------------------------

pub fn covering_certificate(m: &crate::graph::GraphMorphism, degree: usize) -> Certificate {
    let payload = format!(
        "{}{}{}",
        io::emit_graph(&m.source),
        io::emit_graph(&m.target),
        io::emit_morphism("p", m)
    );
    Certificate::new(CertKind::Covering)
        .with_payload(payload)
        .summarize("covering", "true")
        .summarize("degree", degree)
}

pub fn common_cover_certificate(
    p1: &crate::graph::GraphMorphism,
    p2: &crate::graph::GraphMorphism,
    d1: usize,
    d2: usize,
) -> Certificate {
    let payload = format!(
        "{}{}{}{}{}",
        io::emit_graph(&p1.source),
        io::emit_graph(&p1.target),
        io::emit_graph(&p2.target),
        io::emit_morphism("p1", p1),
        io::emit_morphism("p2", p2)
    );
    Certificate::new(CertKind::CommonCover)
        .with_payload(payload)
        .summarize("z-vertices", p1.source.vertex_count())
        .summarize("degree1", d1)
        .summarize("degree2", d2)
}

pub fn normal_extension_certificate(nc: &NormalCommensuration) -> Certificate {
    let payload = format!(
        "{}{}",
        io::emit_commensuration("c", &nc.base),
        io::emit_subgroup("N", &nc.n_in_h)
    );
    Certificate::new(CertKind::NormalExtension)
        .with_payload(payload)
        .summarize("h-index", nc.h_index)
        .summarize("steps", nc.steps)
}

pub fn finite_quotient_certificate(
    fa: &FiniteAmalgam,
    qc: &FiniteQuotientCertificate,
) -> Certificate {
    let payload = format!("{}{}", emit_finite_amalgam(fa), emit_quotient_certificate(qc));
    Certificate::new(CertKind::FiniteQuotient)
        .with_payload(payload)
        .summarize("degree", qc.degree)
        .summarize("image-order", qc.image_order)
        .summarize("injective", qc.injective_on_factors)
}

pub fn completion_certificate(c: &AbelianCommensuration, comp: &AbelianCompletion) -> Certificate {
    let payload = format!(
        "{}{}",
        io::emit_abelian("c", c),
        emit_completion(c.dim, comp)
    );
    Certificate::new(CertKind::Completion)
        .with_payload(payload)
        .summarize("index1", &comp.indices[0])
        .summarize("index2", &comp.indices[1])
        .summarize("gamma-order", comp.gamma.len())
}

pub fn obstruction_certificate(
    c: &Commensuration,
    nc: Option<&NormalCommensuration>,
    fa: Option<&FiniteAmalgam>,
    qc: Option<&FiniteQuotientCertificate>,
    verdict: &str,
) -> Certificate {
    let mut payload = io::emit_commensuration("c", c);
    if let Some(nc) = nc {
        payload.push_str(&io::emit_subgroup("N", &nc.n_in_h));
    }
    if let Some(fa) = fa {
        payload.push_str(&emit_finite_amalgam(fa));
    }
    if let Some(qc) = qc {
        payload.push_str(&emit_quotient_certificate(qc));
    }
    Certificate::new(CertKind::Obstruction)
        .with_payload(payload)
        .summarize("verdict", verdict)
}

pub fn cross_section_certificate(
    sc: &crate::vh::SquareComplex,
    report: &CrossSectionReport,
) -> Certificate {
    let cs = &report.cross_section;
    let payload = format!(
        "{}{}{}{}{}{}",
        io::emit_complex(sc),
        io::emit_graph(&cs.z),
        io::emit_graph(&cs.p1.target),
        io::emit_graph(&cs.p2.target),
        io::emit_morphism("p1", &cs.p1),
        io::emit_morphism("p2", &cs.p2)
    );
    Certificate::new(CertKind::CrossSection)
        .with_payload(payload)
        .summarize("z-vertices", cs.z.vertex_count())
        .summarize("z-edges", cs.z.edge_count())
        .summarize("chi", report.chi)
        .summarize(
            "degree1",
            report.report1.degree.map_or("none".into(), |d| d.to_string()),
        )
        .summarize(
            "degree2",
            report.report2.degree.map_or("none".into(), |d| d.to_string()),
        )
}

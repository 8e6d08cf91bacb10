//! The `covercomm` command line: every subcommand reads the text formats,
//! runs one operation, prints a human-readable summary, and (with `--out`)
//! writes a re-verifiable certificate.
//!
//! Exit codes: 0 success / verdict found, 1 negative verdict, 2
//! inconclusive (bound exhausted), 3 input error.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::abelian::{
    self, complete_abelian, equivariant_average, is_out_finite, resolve_cap, CompletionOutcome,
    OutFiniteOutcome,
};
use crate::amalgam::{
    amalgam_normal_form, find_finite_quotient, find_normal_extension, obstruction_report,
    quotient_amalgam, Factor, ObstructionBounds, ObstructionVerdict, Syllable,
};
use crate::cert::{self, Certificate};
use crate::covering::{
    analyze_covering, degree_refinement, find_common_cover, CommonCoverOutcome,
};
use crate::error::{Error, Result};
use crate::io::{read_documents, Document};
use crate::stallings::SubgroupGraph;
use crate::vh::{analyze_cross_section, commensuration_from_cross_section, vh_partition, VhOutcome};
use crate::word::Word;

pub const EXIT_OK: u8 = 0;
pub const EXIT_NEGATIVE: u8 = 1;
pub const EXIT_INCONCLUSIVE: u8 = 2;
pub const EXIT_INPUT_ERROR: u8 = 3;

#[derive(Parser)]
#[command(name = "covercomm", version, about = "graph coverings, commensurations, and their completions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Covering maps, degree refinement, and the common-cover search.
    Cover {
        #[command(subcommand)]
        cmd: CoverCmd,
    },
    /// Subgroups of free groups as folded labeled graphs.
    Stallings {
        #[command(subcommand)]
        cmd: StallingsCmd,
    },
    /// Commensurations of free groups and the obstruction pipeline.
    Comm {
        #[command(subcommand)]
        cmd: CommCmd,
    },
    /// VH square complexes and cross-sections.
    Vh {
        #[command(subcommand)]
        cmd: VhCmd,
    },
    /// Crystallographic commensurations over Z^d.
    Abelian {
        #[command(subcommand)]
        cmd: AbelianCmd,
    },
    /// Re-check an emitted certificate without re-running its search.
    Verify {
        /// certificate file
        cert: PathBuf,
        /// the original input files, for digest checking
        inputs: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct OutOpt {
    /// write a certificate into this directory
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CoverCmd {
    /// Check whether a map file describes a covering.
    Verify {
        files: Vec<PathBuf>,
        #[arg(long)]
        name: Option<String>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Print the degree refinement of a graph.
    Refine {
        file: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Search for a common finite cover of two graphs.
    Common {
        g1: PathBuf,
        g2: PathBuf,
        #[arg(long, default_value_t = 64)]
        max_vertices: usize,
        #[command(flatten)]
        out: OutOpt,
    },
}

#[derive(Subcommand)]
enum StallingsCmd {
    /// Index of the subgroup (or "infinite").
    Index { file: PathBuf },
    /// Normal core of a finite-index subgroup.
    Core { file: PathBuf },
    /// Is the subgroup normal?
    Normal { file: PathBuf },
    /// Intersection of two subgroups.
    Intersect { file1: PathBuf, file2: PathBuf },
    /// Free basis of the subgroup.
    Basis { file: PathBuf },
}

#[derive(Subcommand)]
enum CommCmd {
    /// Validate a commensuration (injectivity, indices, triviality).
    Validate { file: PathBuf },
    /// Reduce a syllable sequence to its amalgam normal form.
    Normalize {
        file: PathBuf,
        /// whitespace-separated syllables like "g1:ab g2:ba h:a"
        #[arg(long)]
        syllables: String,
    },
    /// Find the maximal simultaneously normal extension and quotient it.
    Quotient {
        file: PathBuf,
        #[arg(long, default_value_t = 64)]
        max_index: usize,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Search for a finite quotient of the quotient amalgam.
    FiniteQuotient {
        file: PathBuf,
        #[arg(long, default_value_t = 64)]
        max_index: usize,
        #[arg(long, default_value_t = 6)]
        max_degree: usize,
        /// require the factor images to embed (free kernel)
        #[arg(long)]
        injective: bool,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Run the full obstruction pipeline.
    Obstruct {
        file: PathBuf,
        #[arg(long, default_value_t = 64)]
        max_index: usize,
        #[arg(long, default_value_t = 6)]
        max_degree: usize,
        #[command(flatten)]
        out: OutOpt,
    },
}

#[derive(Subcommand)]
enum VhCmd {
    /// Vertical/horizontal partition of a square complex.
    Partition {
        file: PathBuf,
        #[arg(long)]
        vertical: Option<String>,
    },
    /// Build the cross-section and its projections.
    CrossSection {
        file: PathBuf,
        #[arg(long)]
        vertical: Option<String>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Full diagnostic pass (partition, cross-section, coverings, folds).
    Analyze {
        file: PathBuf,
        #[arg(long)]
        vertical: Option<String>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Extract the induced commensuration.
    Commensuration {
        file: PathBuf,
        #[arg(long)]
        vertical: Option<String>,
    },
}

#[derive(Subcommand)]
enum AbelianCmd {
    /// Is the commensuration out-finite?
    Outfinite {
        file: PathBuf,
        #[arg(long)]
        cap: Option<usize>,
    },
    /// Construct the completion of an out-finite commensuration.
    Complete {
        file: PathBuf,
        #[arg(long)]
        cap: Option<usize>,
        #[command(flatten)]
        out: OutOpt,
    },
    /// Verify a completion certificate against its commensuration.
    Verify { comm: PathBuf, completion: PathBuf },
    /// Equivariant averaging of a retraction.
    Average { file: PathBuf },
}

/// Runs the CLI; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // clap handles --help/--version through this path
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT_ERROR } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT_ERROR
        }
    }
}

fn threads() -> usize {
    std::env::var("COVERCOMM_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(1)
}

fn write_certificate(out: &OutOpt, cert: Certificate, inputs: &[PathBuf]) -> Result<()> {
    let Some(dir) = &out.out else {
        return Ok(());
    };
    std::fs::create_dir_all(dir)?;
    let mut cert = cert;
    for path in inputs {
        let bytes = std::fs::read(path)?;
        cert = cert.input(&path.to_string_lossy(), &bytes);
    }
    let path = dir.join(format!("{}.cert", cert.kind));
    std::fs::write(&path, cert.emit())?;
    println!("certificate written to {}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Cover { cmd } => cover(cmd),
        Command::Stallings { cmd } => stallings(cmd),
        Command::Comm { cmd } => comm(cmd),
        Command::Vh { cmd } => vh(cmd),
        Command::Abelian { cmd } => abelian_cmd(cmd),
        Command::Verify { cert, inputs } => verify(cert, inputs),
    }
}

fn the_subgroup(doc: &Document) -> Result<SubgroupGraph> {
    let entry = doc
        .subgroups
        .first()
        .ok_or_else(|| Error::InvalidArgument("no subgroup section in the input".into()))?;
    SubgroupGraph::from_generators(entry.ambient_rank, &entry.generators)
}

fn cover(cmd: CoverCmd) -> Result<u8> {
    match cmd {
        CoverCmd::Verify { files, name, out } => {
            let doc = read_documents(&files)?;
            let entry = match &name {
                Some(n) => doc
                    .maps
                    .iter()
                    .find(|m| m.name == *n)
                    .ok_or_else(|| Error::InvalidArgument(format!("no map named {n:?}")))?,
                None => doc
                    .maps
                    .first()
                    .ok_or_else(|| Error::InvalidArgument("no map section in the input".into()))?,
            };
            let m = doc.resolve_map(entry)?;
            let report = analyze_covering(&m);
            for v in &report.morphism_violations {
                println!("morphism violation: {v}");
            }
            for (v, kind) in &report.violations {
                println!("at vertex {v:?}: {kind}");
            }
            if report.is_covering {
                let d = report.degree.unwrap_or(0);
                println!("covering of degree {d}");
                write_certificate(&out, cert::covering_certificate(&m, d), &files)?;
                Ok(EXIT_OK)
            } else {
                println!("not a covering");
                Ok(EXIT_NEGATIVE)
            }
        }
        CoverCmd::Refine { file, name } => {
            let doc = read_documents(&[file])?;
            let entry = match &name {
                Some(n) => doc
                    .graph(n)
                    .ok_or_else(|| Error::InvalidArgument(format!("no graph named {n:?}")))?,
                None => doc
                    .graphs
                    .first()
                    .ok_or_else(|| Error::InvalidArgument("no graph in the input".into()))?,
            };
            let r = degree_refinement(&entry.graph)?;
            for (i, class) in r.classes.iter().enumerate() {
                println!("class {i}: {}", class.join(" "));
            }
            for row in &r.matrix {
                println!(
                    "matrix {}",
                    row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
                );
            }
            Ok(EXIT_OK)
        }
        CoverCmd::Common {
            g1,
            g2,
            max_vertices,
            out,
        } => {
            let d1 = read_documents(std::slice::from_ref(&g1))?;
            let d2 = read_documents(std::slice::from_ref(&g2))?;
            let ga = &d1
                .graphs
                .first()
                .ok_or_else(|| Error::InvalidArgument("first file has no graph".into()))?
                .graph;
            let gb = &d2
                .graphs
                .first()
                .ok_or_else(|| Error::InvalidArgument("second file has no graph".into()))?
                .graph;
            match find_common_cover(ga, gb, max_vertices, threads())? {
                CommonCoverOutcome::Found { z, p1, p2 } => {
                    let r1 = analyze_covering(&p1);
                    let r2 = analyze_covering(&p2);
                    let (deg1, deg2) = (r1.degree.unwrap_or(0), r2.degree.unwrap_or(0));
                    println!(
                        "common cover with {} vertices; degrees {deg1} over {:?} and {deg2} over {:?}",
                        z.vertex_count(),
                        ga.name(),
                        gb.name()
                    );
                    let cert = cert::common_cover_certificate(&p1, &p2, deg1, deg2)
                        .param("max-vertices", max_vertices);
                    write_certificate(&out, cert, &[g1, g2])?;
                    Ok(EXIT_OK)
                }
                CommonCoverOutcome::NoneExists { reason } => {
                    println!("no common cover exists: {reason}");
                    Ok(EXIT_NEGATIVE)
                }
                CommonCoverOutcome::BoundExhausted => {
                    println!("inconclusive: no common cover with at most {max_vertices} vertices");
                    Ok(EXIT_INCONCLUSIVE)
                }
            }
        }
    }
}

fn stallings(cmd: StallingsCmd) -> Result<u8> {
    match cmd {
        StallingsCmd::Index { file } => {
            let s = the_subgroup(&read_documents(&[file])?)?;
            match s.index() {
                Some(i) => println!("index {i}"),
                None => println!("index infinite"),
            }
            Ok(EXIT_OK)
        }
        StallingsCmd::Core { file } => {
            let s = the_subgroup(&read_documents(&[file])?)?;
            let core = s.normal_core()?;
            print!("{}", crate::io::emit_subgroup("core", &core));
            println!("# index {}", core.index().map_or("infinite".into(), |i| i.to_string()));
            Ok(EXIT_OK)
        }
        StallingsCmd::Normal { file } => {
            let s = the_subgroup(&read_documents(&[file])?)?;
            if s.is_normal()? {
                println!("normal");
                Ok(EXIT_OK)
            } else {
                println!("not normal");
                Ok(EXIT_NEGATIVE)
            }
        }
        StallingsCmd::Intersect { file1, file2 } => {
            let s1 = the_subgroup(&read_documents(&[file1])?)?;
            let s2 = the_subgroup(&read_documents(&[file2])?)?;
            let both = s1.intersect(&s2)?;
            print!("{}", crate::io::emit_subgroup("intersection", &both));
            Ok(EXIT_OK)
        }
        StallingsCmd::Basis { file } => {
            let s = the_subgroup(&read_documents(&[file])?)?;
            for b in s.basis() {
                println!("{b}");
            }
            Ok(EXIT_OK)
        }
    }
}

fn parse_syllables(spec: &str, c: &crate::amalgam::Commensuration) -> Result<Vec<Syllable>> {
    let mut out = Vec::new();
    for token in spec.split_whitespace() {
        let (factor, word) = token.split_once(':').ok_or_else(|| {
            Error::InvalidArgument(format!("syllable {token:?} must look like g1:<word>"))
        })?;
        let (factor, rank) = match factor {
            "g1" => (Factor::G1, c.g1_rank),
            "g2" => (Factor::G2, c.g2_rank),
            "h" => (Factor::H, c.h_rank),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown factor {other:?} (use g1, g2, or h)"
                )))
            }
        };
        out.push(Syllable {
            factor,
            word: Word::parse(word, rank)?,
        });
    }
    Ok(out)
}

fn the_commensuration(doc: &Document) -> Result<crate::amalgam::Commensuration> {
    Ok(doc
        .commensurations
        .first()
        .ok_or_else(|| Error::InvalidArgument("no commensuration section in the input".into()))?
        .commensuration
        .clone())
}

fn comm(cmd: CommCmd) -> Result<u8> {
    match cmd {
        CommCmd::Validate { file } => {
            let c = the_commensuration(&read_documents(&[file])?)?;
            let report = c.validate();
            print!("{report}");
            Ok(if report.is_valid() { EXIT_OK } else { EXIT_NEGATIVE })
        }
        CommCmd::Normalize { file, syllables } => {
            let c = the_commensuration(&read_documents(&[file])?)?;
            let syls = parse_syllables(&syllables, &c)?;
            let nf = amalgam_normal_form(&c, &syls)?;
            println!("{nf}");
            println!("syllable-length {}", nf.syllable_length());
            Ok(EXIT_OK)
        }
        CommCmd::Quotient {
            file,
            max_index,
            out,
        } => {
            let c = the_commensuration(&read_documents(std::slice::from_ref(&file))?)?;
            match find_normal_extension(&c, max_index)? {
                Some(nc) => {
                    println!(
                        "normal extension: [H:N] = {} after {} core iterations",
                        nc.h_index, nc.steps
                    );
                    let fa = quotient_amalgam(&nc)?;
                    println!(
                        "quotient amalgam: |A| = {}, |B| = {}, |C| = {}",
                        fa.order_a, fa.order_b, fa.order_c
                    );
                    let cert =
                        cert::normal_extension_certificate(&nc).param("max-index", max_index);
                    write_certificate(&out, cert, &[file])?;
                    Ok(EXIT_OK)
                }
                None => {
                    println!("inconclusive: no stable extension with index <= {max_index}");
                    Ok(EXIT_INCONCLUSIVE)
                }
            }
        }
        CommCmd::FiniteQuotient {
            file,
            max_index,
            max_degree,
            injective,
            out,
        } => {
            let c = the_commensuration(&read_documents(std::slice::from_ref(&file))?)?;
            let Some(nc) = find_normal_extension(&c, max_index)? else {
                println!("inconclusive: no stable extension with index <= {max_index}");
                return Ok(EXIT_INCONCLUSIVE);
            };
            let fa = quotient_amalgam(&nc)?;
            match find_finite_quotient(&fa, max_degree, injective)? {
                Some(qc) => {
                    println!(
                        "finite quotient at degree {}, image order {}{}",
                        qc.degree,
                        qc.image_order,
                        if qc.injective_on_factors {
                            " (injective on factors)"
                        } else {
                            ""
                        }
                    );
                    let cert = cert::finite_quotient_certificate(&fa, &qc)
                        .param("max-degree", max_degree);
                    write_certificate(&out, cert, &[file])?;
                    Ok(EXIT_OK)
                }
                None => {
                    println!("inconclusive: no finite quotient with degree <= {max_degree}");
                    Ok(EXIT_INCONCLUSIVE)
                }
            }
        }
        CommCmd::Obstruct {
            file,
            max_index,
            max_degree,
            out,
        } => {
            let c = the_commensuration(&read_documents(std::slice::from_ref(&file))?)?;
            let report = obstruction_report(
                &c,
                ObstructionBounds {
                    max_index,
                    max_degree,
                },
            )?;
            print!("{report}");
            let code = match &report.verdict {
                ObstructionVerdict::NecessaryConditionsHold
                | ObstructionVerdict::TriviallyCompletable => EXIT_OK,
                ObstructionVerdict::Inconclusive { .. } => EXIT_INCONCLUSIVE,
            };
            if code == EXIT_OK {
                let verdict = match &report.verdict {
                    ObstructionVerdict::TriviallyCompletable => "trivially-completable",
                    _ => "necessary-conditions-hold",
                };
                // rebuild the pieces for the certificate
                let nc = find_normal_extension(&c, max_index)?;
                let fa = nc.as_ref().map(quotient_amalgam).transpose()?;
                let cert = cert::obstruction_certificate(
                    &c,
                    nc.as_ref(),
                    fa.as_ref(),
                    report.quotient.as_ref(),
                    verdict,
                )
                .param("max-index", max_index)
                .param("max-degree", max_degree);
                write_certificate(&out, cert, &[file])?;
            }
            Ok(code)
        }
    }
}

fn vh(cmd: VhCmd) -> Result<u8> {
    match cmd {
        VhCmd::Partition { file, vertical } => {
            let doc = read_documents(&[file])?;
            let entry = doc
                .graphs
                .first()
                .ok_or_else(|| Error::InvalidArgument("no complex in the input".into()))?;
            let sc = doc.complex(entry)?;
            match vh_partition(&sc, vertical.as_deref())? {
                VhOutcome::Vh(p) => {
                    println!("vertical {}", p.vertical_ids(&sc.skeleton).join(" "));
                    println!("horizontal {}", p.horizontal_ids(&sc.skeleton).join(" "));
                    Ok(EXIT_OK)
                }
                VhOutcome::NotVh { witness } => {
                    println!("not VH: inconsistent cycle {}", witness.join(" ~ "));
                    Ok(EXIT_NEGATIVE)
                }
            }
        }
        VhCmd::CrossSection {
            file,
            vertical,
            out,
        }
        | VhCmd::Analyze {
            file,
            vertical,
            out,
        } => {
            let doc = read_documents(std::slice::from_ref(&file))?;
            let entry = doc
                .graphs
                .first()
                .ok_or_else(|| Error::InvalidArgument("no complex in the input".into()))?;
            let sc = doc.complex(entry)?;
            let report = analyze_cross_section(&sc, vertical.as_deref())?;
            print!("{report}");
            let ok = report.report1.is_covering && report.report2.is_covering;
            write_certificate(&out, cert::cross_section_certificate(&sc, &report), &[file])?;
            Ok(if ok { EXIT_OK } else { EXIT_NEGATIVE })
        }
        VhCmd::Commensuration { file, vertical } => {
            let doc = read_documents(&[file])?;
            let entry = doc
                .graphs
                .first()
                .ok_or_else(|| Error::InvalidArgument("no complex in the input".into()))?;
            let sc = doc.complex(entry)?;
            let report = analyze_cross_section(&sc, vertical.as_deref())?;
            let c = commensuration_from_cross_section(&report.cross_section)?;
            print!("{}", crate::io::emit_commensuration("induced", &c));
            print!("{}", c.validate());
            Ok(EXIT_OK)
        }
    }
}

fn abelian_cmd(cmd: AbelianCmd) -> Result<u8> {
    match cmd {
        AbelianCmd::Outfinite { file, cap } => {
            let doc = read_documents(&[file])?;
            let entry = doc
                .abelians
                .first()
                .ok_or_else(|| Error::InvalidArgument("no abelian-commensuration in the input".into()))?;
            let c = &entry.commensuration;
            let cap = resolve_cap(c.dim, cap)?;
            match is_out_finite(c, cap)? {
                OutFiniteOutcome::OutFinite { gamma } => {
                    println!("out-finite: |Gamma| = {}", gamma.len());
                    Ok(EXIT_OK)
                }
                OutFiniteOutcome::NotOutFinite { word, witness } => {
                    println!("not out-finite");
                    println!(
                        "witness word: {}",
                        word.iter().map(|g| format!("g{g}")).collect::<Vec<_>>().join(" ")
                    );
                    println!("witness matrix: {witness}");
                    Ok(EXIT_NEGATIVE)
                }
                OutFiniteOutcome::Inconclusive { explored } => {
                    println!("inconclusive after exploring {explored} elements");
                    Ok(EXIT_INCONCLUSIVE)
                }
            }
        }
        AbelianCmd::Complete { file, cap, out } => {
            let doc = read_documents(std::slice::from_ref(&file))?;
            let entry = doc
                .abelians
                .first()
                .ok_or_else(|| Error::InvalidArgument("no abelian-commensuration in the input".into()))?;
            let c = &entry.commensuration;
            let cap = resolve_cap(c.dim, cap)?;
            match complete_abelian(c, cap)? {
                CompletionOutcome::Completed(comp) => {
                    println!(
                        "completion: |Gamma| = {}, indices [K:G1] = {}, [K:G2] = {}",
                        comp.gamma.len(),
                        comp.indices[0],
                        comp.indices[1]
                    );
                    let issues = abelian::verify_completion(c, &comp)?;
                    if !issues.is_empty() {
                        return Err(Error::Certificate(format!(
                            "internal: completion fails verification: {}",
                            issues.join("; ")
                        )));
                    }
                    write_certificate(
                        &out,
                        cert::completion_certificate(c, &comp).param("cap", cap),
                        &[file],
                    )?;
                    Ok(EXIT_OK)
                }
                CompletionOutcome::NotOutFinite { witness, .. } => {
                    println!("not out-finite; witness matrix: {witness}");
                    Ok(EXIT_NEGATIVE)
                }
                CompletionOutcome::Inconclusive { explored } => {
                    println!("inconclusive after exploring {explored} elements");
                    Ok(EXIT_INCONCLUSIVE)
                }
            }
        }
        AbelianCmd::Verify { comm, completion } => {
            let doc = read_documents(&[comm])?;
            let entry = doc
                .abelians
                .first()
                .ok_or_else(|| Error::InvalidArgument("no abelian-commensuration in the input".into()))?;
            let text = std::fs::read_to_string(&completion)?;
            let cert = Certificate::parse(&text, &completion.to_string_lossy())?;
            let payload = cert::parse_payload(&cert.payload, "payload")?;
            let comp = payload
                .completion
                .ok_or_else(|| Error::Certificate("certificate has no completion block".into()))?;
            let issues = abelian::verify_completion(&entry.commensuration, &comp)?;
            if issues.is_empty() {
                println!("completion verifies");
                Ok(EXIT_OK)
            } else {
                for issue in issues {
                    println!("issue: {issue}");
                }
                Ok(EXIT_NEGATIVE)
            }
        }
        AbelianCmd::Average { file } => {
            let doc = read_documents(&[file])?;
            let entry = doc
                .averagings
                .first()
                .ok_or_else(|| Error::InvalidArgument("no averaging section in the input".into()))?;
            let avg = equivariant_average(&entry.instance)?;
            println!("gamma-order {}", avg.gamma_order());
            let n = entry.instance.group.dims();
            let mut toks = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    toks.push(avg.rho.get(i, j).to_string());
                }
            }
            println!("rho {}", toks.join(" "));
            for k in &avg.kernel_gens {
                println!(
                    "kernel {}",
                    k.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
                );
            }
            Ok(EXIT_OK)
        }
    }
}

fn verify(cert_path: PathBuf, inputs: Vec<PathBuf>) -> Result<u8> {
    let text = std::fs::read_to_string(&cert_path)?;
    let cert = Certificate::parse(&text, &cert_path.to_string_lossy())?;
    let mut provided = Vec::new();
    for path in &inputs {
        provided.push((path.to_string_lossy().to_string(), std::fs::read(path)?));
    }
    let issues = cert::verify_certificate(&cert, &provided)?;
    if issues.is_empty() {
        println!("certificate verifies ({})", cert.kind);
        Ok(EXIT_OK)
    } else {
        for issue in issues {
            println!("issue: {issue}");
        }
        Ok(EXIT_NEGATIVE)
    }
}

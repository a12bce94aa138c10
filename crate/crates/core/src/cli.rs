//! Command dispatch for the `derive` binary: parse documents, run one
//! operation, and build a report with an exit code (0 pass, 1 a mathematical
//! check failed, 2 input error).

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::cdga::{from_derivation, to_derivation};
use crate::error::{Error, Result};
use crate::geometry::{
    complex_cohomology, is_classical_point, pullback_fibration, tangent_complex, virtual_dimension, DerivedChart,
};
use crate::intersection::{derived_intersection, intersection_point};
use crate::io::{
    parse_points, show_point, ChartDocument, ContractionDocument, MorphismDocument, Report, SubmanifoldDocument,
};
use crate::linfty::{check_morphism, check_structure, invert_morphism, strictify_fibration, AxiomReport};
use crate::pathspace::{derived_path_space, derived_path_space_with, factorization_check, fm_contraction};
use crate::poly::Q;
use crate::transfer::{reduce_chain, transfer_structure, transfer_tree_oracle};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "derive", version, about = "Exact computations on polynomial derived charts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON list of points; overrides the points listed in the chart.
    #[arg(long, global = true)]
    pub points: Option<PathBuf>,
    /// Highest t-degree used when checking path contractions.
    #[arg(long, global = true, default_value_t = 8)]
    pub degree_cap: u32,
    #[arg(long, global = true, value_enum, default_value_t = ReportFormat::Json)]
    pub report: ReportFormat,
    /// Include wall-clock time in the report (breaks byte-stability).
    #[arg(long, global = true)]
    pub timing: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Structure check on CHART, or morphism check on SOURCE TARGET MORPHISM.
    Check {
        #[arg(num_args = 1..=3, required = true)]
        files: Vec<PathBuf>,
    },
    /// Transfer the structure of CHART along CONTRACTION.
    Transfer { chart: PathBuf, contraction: PathBuf },
    /// Tangent complexes and their cohomology at the points.
    Tangent { chart: PathBuf },
    /// Virtual dimension.
    Vdim { chart: PathBuf },
    /// The derived path space and the integral contraction identities.
    Pathspace { chart: PathBuf },
    /// The factorization of the diagonal through the path space.
    Factorize { chart: PathBuf },
    /// Derived intersection of two submanifolds; points are ambient points.
    Intersect { first: PathBuf, second: PathBuf },
    /// Pull the linear fibration FIB: FIB_SOURCE → FIB_TARGET back along G: G_SOURCE → FIB_TARGET.
    Pullback { fib_source: PathBuf, fib_target: PathBuf, fib: PathBuf, g_source: PathBuf, g: PathBuf },
    /// Inverse of an isomorphism.
    Invert { source: PathBuf, target: PathBuf, morphism: PathBuf },
    /// Factor a fibration as an isomorphism followed by a linear fibration.
    Strictify { source: PathBuf, target: PathBuf, morphism: PathBuf },
    /// Reduce a trivial fibration degree by degree from the top.
    Reduce { source: PathBuf, target: PathBuf, morphism: PathBuf },
    /// Dual derivation, Q² on generators, and the roundtrip back to λ.
    Cdga { chart: PathBuf },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check { .. } => "check",
            Command::Transfer { .. } => "transfer",
            Command::Tangent { .. } => "tangent",
            Command::Vdim { .. } => "vdim",
            Command::Pathspace { .. } => "pathspace",
            Command::Factorize { .. } => "factorize",
            Command::Intersect { .. } => "intersect",
            Command::Pullback { .. } => "pullback",
            Command::Invert { .. } => "invert",
            Command::Strictify { .. } => "strictify",
            Command::Reduce { .. } => "reduce",
            Command::Cdga { .. } => "cdga",
        }
    }

    fn files(&self) -> Vec<&PathBuf> {
        match self {
            Command::Check { files } => files.iter().collect(),
            Command::Transfer { chart, contraction } => vec![chart, contraction],
            Command::Tangent { chart }
            | Command::Vdim { chart }
            | Command::Pathspace { chart }
            | Command::Factorize { chart }
            | Command::Cdga { chart } => vec![chart],
            Command::Intersect { first, second } => vec![first, second],
            Command::Pullback { fib_source, fib_target, fib, g_source, g } => vec![fib_source, fib_target, fib, g_source, g],
            Command::Invert { source, target, morphism }
            | Command::Strictify { source, target, morphism }
            | Command::Reduce { source, target, morphism } => vec![source, target, morphism],
        }
    }
}

/// Whether an error is the user's input (exit 2) rather than a failed check (exit 1).
pub fn is_input_error(e: &Error) -> bool {
    matches!(e, Error::Parse(_) | Error::BundleMismatch(_) | Error::Degree(_) | Error::Symmetry(_) | Error::Dimension(_))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn chart_doc(path: &Path) -> Result<ChartDocument> {
    ChartDocument::from_json(&read(path)?).map_err(|e| in_file(path, e))
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn load_chart(path: &Path) -> Result<(ChartDocument, DerivedChart)> {
    let doc = chart_doc(path)?;
    let dc = doc.chart().map_err(|e| in_file(path, e))?;
    Ok((doc, dc))
}

fn load_morphism(path: &Path, src: &DerivedChart, tgt: &DerivedChart) -> Result<crate::linfty::LooMorphism> {
    MorphismDocument::from_json(&read(path)?)
        .and_then(|d| d.morphism(src.bundle(), tgt.bundle()))
        .map_err(|e| in_file(path, e))
}

fn axiom_json(r: &AxiomReport) -> Value {
    json!({
        "pass": r.pass,
        "checked": r.checked,
        "witnesses": r.failures.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
    })
}

struct Outcome {
    pass: bool,
    payload: Value,
}

fn points_for(cli: &Cli, doc: Option<&ChartDocument>) -> Result<Vec<Vec<Q>>> {
    match (&cli.points, doc) {
        (Some(p), _) => parse_points(&read(p)?).map_err(|e| in_file(p, e)),
        (None, Some(d)) => d.points(),
        (None, None) => Ok(Vec::new()),
    }
}

fn run_command(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Check { files } => match files.as_slice() {
            [chart] => {
                let doc = chart_doc(chart)?;
                let s = doc.structure().map_err(|e| in_file(chart, e))?;
                let r = check_structure(&s);
                Ok(Outcome { pass: r.pass, payload: json!({ "structure": axiom_json(&r) }) })
            }
            [src, tgt, m] => {
                let (_, a) = load_chart(src)?;
                let (_, b) = load_chart(tgt)?;
                let m = load_morphism(m, &a, &b)?;
                let r = check_morphism(&m, a.structure(), b.structure())?;
                Ok(Outcome { pass: r.pass, payload: json!({ "morphism": axiom_json(&r) }) })
            }
            _ => Err(Error::Parse("check takes CHART or SOURCE TARGET MORPHISM".into())),
        },
        Command::Transfer { chart, contraction } => {
            let (_, dc) = load_chart(chart)?;
            let c = ContractionDocument::from_json(&read(contraction)?)
                .and_then(|d| d.contraction(dc.structure()))
                .map_err(|e| in_file(contraction, e))?;
            let t = transfer_structure(dc.structure(), &c)?;
            let oracle = transfer_tree_oracle(dc.structure(), &c)?;
            let structure = check_structure(&t.h_structure);
            let morphism = check_morphism(&t.phi, &t.h_structure, dc.structure())?;
            let agrees = oracle.h_structure == t.h_structure && oracle.phi == t.phi;
            Ok(Outcome {
                pass: structure.pass && morphism.pass && agrees,
                payload: json!({
                    "retract": serde_json::to_value(ChartDocument::from_structure(&t.h_structure)).unwrap(),
                    "phi": serde_json::to_value(MorphismDocument::from_morphism(&t.phi)).unwrap(),
                    "structure": axiom_json(&structure),
                    "morphism": axiom_json(&morphism),
                    "oracle_agrees": agrees,
                    "filtration": t.diagnostics.filtration,
                }),
            })
        }
        Command::Tangent { chart } => {
            let (doc, dc) = load_chart(chart)?;
            let points = points_for(cli, Some(&doc))?;
            let mut pass = true;
            let mut rows = Vec::new();
            for p in &points {
                if !is_classical_point(&dc, p)? {
                    pass = false;
                    rows.push(json!({ "point": show_point(p), "classical": false }));
                    continue;
                }
                let tc = tangent_complex(&dc, p)?;
                rows.push(json!({
                    "point": show_point(p),
                    "classical": true,
                    "dims": tc.dims,
                    "cohomology": complex_cohomology(&tc),
                    "euler_characteristic": tc.euler_characteristic(),
                }));
            }
            Ok(Outcome { pass, payload: json!({ "points": rows, "vdim": virtual_dimension(&dc) }) })
        }
        Command::Vdim { chart } => {
            let (_, dc) = load_chart(chart)?;
            Ok(Outcome { pass: true, payload: json!({ "vdim": virtual_dimension(&dc) }) })
        }
        Command::Pathspace { chart } => {
            let (doc, dc) = load_chart(chart)?;
            let ps = match doc.connection(dc.bundle()).map_err(|e| in_file(chart, e))? {
                Some(conn) => derived_path_space_with(&dc, &conn)?,
                None => derived_path_space(&dc)?,
            };
            let structure = check_structure(ps.chart.structure());
            let fm = fm_contraction(dc.bundle())?.verify(cli.degree_cap);
            let vdims = (virtual_dimension(&ps.chart), virtual_dimension(&dc));
            Ok(Outcome {
                pass: structure.pass && fm.pass && vdims.0 == vdims.1,
                payload: json!({
                    "path_space": serde_json::to_value(ChartDocument::from_structure(ps.chart.structure())).unwrap(),
                    "structure": axiom_json(&structure),
                    "contraction_identities": fm,
                    "vdim": vdims.0,
                    "vdim_base": vdims.1,
                }),
            })
        }
        Command::Factorize { chart } => {
            let (doc, dc) = load_chart(chart)?;
            let points = points_for(cli, Some(&doc))?;
            let ps = derived_path_space(&dc)?;
            let rep = factorization_check(&dc, &ps, &points)?;
            let vdims = (virtual_dimension(&ps.chart), virtual_dimension(&dc));
            let amp = dc.bundle().max_degree().max(0) as usize;
            let high_vanish = ps.chart.structure().lambda().arities().iter().all(|&k| k <= amp);
            Ok(Outcome {
                pass: rep.pass && vdims.0 == vdims.1 && high_vanish,
                payload: json!({
                    "structure": axiom_json(&rep.structure),
                    "inclusion": axiom_json(&rep.inclusion),
                    "inclusion_linear": rep.inclusion_linear,
                    "inclusion_etale": rep.inclusion_etale,
                    "evaluation": axiom_json(&rep.evaluation),
                    "evaluation_linear": rep.evaluation_linear,
                    "evaluation_fibration": rep.evaluation_fibration,
                    "composite_is_diagonal": rep.composite_is_diagonal,
                    "vdim": vdims.0,
                    "vdim_base": vdims.1,
                    "higher_operations_vanish": high_vanish,
                }),
            })
        }
        Command::Intersect { first, second } => {
            let sub = |p: &PathBuf| {
                SubmanifoldDocument::from_json(&read(p)?).and_then(|d| d.submanifold()).map_err(|e| in_file(p, e))
            };
            let (x, y) = (sub(first)?, sub(second)?);
            let hfp = derived_intersection(&x, &y)?;
            let points = points_for(cli, None)?;
            let mut rows = Vec::new();
            for p in &points {
                let ip = intersection_point(&x, &y, &hfp, p)?;
                rows.push(json!({ "point": show_point(p), "lifted": show_point(&ip.coordinates), "cohomology": ip.cohomology }));
            }
            Ok(Outcome {
                pass: true,
                payload: json!({
                    "chart": serde_json::to_value(ChartDocument::from_structure(hfp.chart.structure())).unwrap(),
                    "vdim": virtual_dimension(&hfp.chart),
                    "points": rows,
                }),
            })
        }
        Command::Pullback { fib_source, fib_target, fib, g_source, g } => {
            let (_, a) = load_chart(fib_source)?;
            let (_, b) = load_chart(fib_target)?;
            let (_, c) = load_chart(g_source)?;
            let f = load_morphism(fib, &a, &b)?;
            let g = load_morphism(g, &c, &b)?;
            let fp = pullback_fibration(&f, &a, &b, &g, &c)?;
            let proj = check_morphism(&fp.projection, fp.chart.structure(), c.structure())?;
            let lift = check_morphism(&fp.lift, fp.chart.structure(), a.structure())?;
            let vd = [virtual_dimension(&fp.chart), virtual_dimension(&c), virtual_dimension(&a), virtual_dimension(&b)];
            let additive = vd[0] == vd[1] + vd[2] - vd[3];
            Ok(Outcome {
                pass: proj.pass && lift.pass && additive,
                payload: json!({
                    "chart": serde_json::to_value(ChartDocument::from_structure(fp.chart.structure())).unwrap(),
                    "projection": axiom_json(&proj),
                    "lift": axiom_json(&lift),
                    "vdim": vd[0],
                    "vdim_additive": additive,
                }),
            })
        }
        Command::Invert { source, target, morphism } => {
            let (_, a) = load_chart(source)?;
            let (_, b) = load_chart(target)?;
            let m = load_morphism(morphism, &a, &b)?;
            let inv = invert_morphism(&m)?;
            let r = check_morphism(&inv, b.structure(), a.structure())?;
            Ok(Outcome {
                pass: r.pass,
                payload: json!({
                    "inverse": serde_json::to_value(MorphismDocument::from_morphism(&inv)).unwrap(),
                    "morphism": axiom_json(&r),
                }),
            })
        }
        Command::Strictify { source, target, morphism } => {
            let (_, a) = load_chart(source)?;
            let (_, b) = load_chart(target)?;
            let m = load_morphism(morphism, &a, &b)?;
            let st = strictify_fibration(&m, a.structure(), b.structure(), None)?;
            let iso = check_morphism(&st.iso, a.structure(), &st.new_source)?;
            let fib = check_morphism(&st.linear_fib, &st.new_source, b.structure())?;
            Ok(Outcome {
                pass: iso.pass && fib.pass,
                payload: json!({
                    "new_source": serde_json::to_value(ChartDocument::from_structure(&st.new_source)).unwrap(),
                    "iso": serde_json::to_value(MorphismDocument::from_morphism(&st.iso)).unwrap(),
                    "iso_check": axiom_json(&iso),
                    "linear_fibration_check": axiom_json(&fib),
                }),
            })
        }
        Command::Reduce { source, target, morphism } => {
            let (_, a) = load_chart(source)?;
            let (_, b) = load_chart(target)?;
            let m = load_morphism(morphism, &a, &b)?;
            let chain = reduce_chain(&m, a.structure(), b.structure())?;
            let r = check_morphism(&chain.composite, &chain.structure, b.structure())?;
            let iso_high = chain.profile.iter().filter(|p| p.degree >= 2).all(|p| p.iso);
            Ok(Outcome {
                pass: r.pass && iso_high,
                payload: json!({
                    "steps": chain.steps.iter().map(|s| s.level).collect::<Vec<_>>(),
                    "reduced": serde_json::to_value(ChartDocument::from_structure(&chain.structure)).unwrap(),
                    "composite": axiom_json(&r),
                    "profile": chain.profile,
                    "iso_in_degrees_at_least_2": iso_high,
                }),
            })
        }
        Command::Cdga { chart } => {
            let doc = chart_doc(chart)?;
            let s = doc.structure().map_err(|e| in_file(chart, e))?;
            let q = to_derivation(&s);
            let structure = check_structure(&s).pass;
            let squares = q.squares_to_zero();
            let roundtrip = from_derivation(&q)?.lambda() == &s.total();
            let b = s.bundle();
            let images: Vec<String> = (0..b.rank()).map(|i| format!("Q({}^) = {}", b.name(i), q.image(i).show(b))).collect();
            Ok(Outcome {
                pass: squares && structure && roundtrip,
                payload: json!({
                    "derivation": images,
                    "q_squared_zero": squares,
                    "structure": structure,
                    "biconditional": squares == structure,
                    "roundtrip": roundtrip,
                }),
            })
        }
    }
}

/// Runs a parsed command line; returns the report and the exit code.
pub fn run(cli: &Cli) -> (Report, i32) {
    let start = Instant::now();
    let files: Vec<String> = cli.command.files().iter().map(|p| p.display().to_string()).collect();
    let name = cli.command.name();
    let (mut report, code) = match run_command(cli) {
        Ok(o) => (Report::new(name, &files, o.pass, o.payload), if o.pass { 0 } else { 1 }),
        Err(e) => {
            let code = if is_input_error(&e) { 2 } else { 1 };
            (Report::new(name, &files, false, json!({ "error": e.to_string() })), code)
        }
    };
    if cli.timing {
        report.timing_ms = Some(start.elapsed().as_millis() as u64);
    }
    (report, code)
}

pub fn render(cli: &Cli, report: &Report) -> String {
    match cli.report {
        ReportFormat::Json => report.to_json() + "\n",
        ReportFormat::Text => report.to_text(),
    }
}

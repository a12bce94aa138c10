//! JSON documents for charts, morphisms, contractions, submanifolds and point
//! lists, and the report envelope shared by the command-line front end.
//!
//! Polynomials are strings in the declared coordinates ("x0^2 - 3/2*x1") and
//! rationals are "p/q" strings or integers. The dt of path constructions is
//! carried by summand names only; documents never write it.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DerivedChart;
use crate::graded::{Chart, FVec, GradedBundle};
use crate::intersection::{Presentation, Submanifold};
use crate::linfty::{pulled_target, CurvedStructure, LooMorphism};
use crate::matrix::{PolyMatrix, QMatrix};
use crate::multiop::{MultiOp, OpFamily};
use crate::pathspace::ConnectionData;
use crate::poly::{Poly, Q};
use crate::transfer::{ContractionData, FiltrationSpec, Frame};

pub const CHART_SCHEMA: &str = "derive-chart/1";
pub const MORPHISM_SCHEMA: &str = "derive-morphism/1";
pub const CONTRACTION_SCHEMA: &str = "derive-contraction/1";
pub const SUBMANIFOLD_SCHEMA: &str = "derive-submanifold/1";
pub const REPORT_SCHEMA: &str = "derive-report/1";

fn at(path: &str, e: Error) -> Error {
    match e {
        Error::Parse(m) => Error::Parse(format!("{path}: {m}")),
        Error::Degree(m) => Error::Degree(format!("{path}: {m}")),
        Error::Symmetry(m) => Error::Symmetry(format!("{path}: {m}")),
        Error::Dimension(m) => Error::Dimension(format!("{path}: {m}")),
        other => other,
    }
}

fn check_schema(found: &Option<String>, expected: &str) -> Result<()> {
    match found {
        Some(s) if s != expected => Err(Error::Parse(format!("schema '{s}' where '{expected}' was expected"))),
        _ => Ok(()),
    }
}

/// A rational written as a string ("-3/2") or an integer.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Rational {
    Int(i64),
    Text(String),
}

impl Rational {
    pub fn parse(&self) -> Result<Q> {
        match self {
            Rational::Int(i) => Ok(Q::from_integer((*i).into())),
            Rational::Text(s) => Q::from_str(s.trim()).map_err(|_| Error::Parse(format!("'{s}' is not a rational"))),
        }
    }

    pub fn from_q(q: &Q) -> Self {
        Rational::Text(q.to_string())
    }
}

pub fn parse_point(p: &[Rational], path: &str) -> Result<Vec<Q>> {
    p.iter().enumerate().map(|(i, r)| r.parse().map_err(|e| at(&format!("{path}[{i}]"), e))).collect()
}

/// One value of an operation on a tuple of basis elements, by name.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arity: Option<usize>,
    pub inputs: Vec<String>,
    pub output: BTreeMap<String, String>,
}

/// One matrix entry of a connection: ∇_coordinate(column) ∋ value·row.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConnectionEntry {
    pub coordinate: String,
    pub row: String,
    pub column: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub coordinates: Vec<String>,
    /// Degree → basis names.
    pub bundle: BTreeMap<i32, Vec<String>>,
    /// A split differential kept apart from the operations.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub delta: Vec<Entry>,
    #[serde(default)]
    pub operations: Vec<Entry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connection: Option<Vec<ConnectionEntry>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<Vec<Rational>>,
}

fn index(b: &GradedBundle, name: &str, path: &str) -> Result<usize> {
    b.index_of(name).ok_or_else(|| Error::Parse(format!("{path}: unknown basis element '{name}'")))
}

fn parse_vec(target: &GradedBundle, chart: &Chart, out: &BTreeMap<String, String>, path: &str) -> Result<FVec> {
    let mut v = target.zero_vec();
    for (name, poly) in out {
        let p = format!("{path}.output.{name}");
        let j = index(target, name, &p)?;
        v.0[j] = chart.parse(poly).map_err(|e| at(&p, e))?;
    }
    Ok(v)
}

fn show_vec(target: &GradedBundle, chart: &Chart, v: &FVec) -> BTreeMap<String, String> {
    v.nonzero().map(|(j, p)| (target.name(j).to_string(), chart.show(p))).collect()
}

fn read_entries(entries: &[Entry], source: &GradedBundle, target: &GradedBundle, path: &str, fam: &mut OpFamily) -> Result<()> {
    for (k, e) in entries.iter().enumerate() {
        let p = format!("{path}[{k}]");
        if e.arity.is_some_and(|a| a != e.inputs.len()) {
            return Err(Error::Parse(format!("{p}: arity {} with {} inputs", e.arity.unwrap(), e.inputs.len())));
        }
        let idx: Vec<usize> = e.inputs.iter().map(|n| index(source, n, &p)).collect::<Result<_>>()?;
        let v = parse_vec(target, source.chart(), &e.output, &p)?;
        fam.op_mut(idx.len()).add(&idx, &v).map_err(|err| at(&p, err))?;
    }
    Ok(())
}

fn write_op(op: &MultiOp, chart: &Chart) -> Vec<Entry> {
    op.entries()
        .map(|(key, v)| Entry {
            arity: Some(key.len()),
            inputs: key.iter().map(|&i| op.source().name(i).to_string()).collect(),
            output: show_vec(op.target(), chart, v),
        })
        .collect()
}

fn write_family(fam: &OpFamily, chart: &Chart) -> Vec<Entry> {
    fam.arities().into_iter().flat_map(|k| write_op(fam.op(k).unwrap(), chart)).collect()
}

impl ChartDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ChartDocument = serde_json::from_str(text).map_err(|e| Error::Parse(format!("chart document: {e}")))?;
        check_schema(&doc.schema, CHART_SCHEMA)?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    pub fn bundle(&self) -> Result<Arc<GradedBundle>> {
        let chart = Chart::new(self.coordinates.iter().cloned()).map_err(|e| at("coordinates", e))?;
        let decl: Vec<(String, i32)> =
            self.bundle.iter().flat_map(|(&d, names)| names.iter().map(move |n| (n.clone(), d))).collect();
        Ok(GradedBundle::new(chart, decl).map_err(|e| at("bundle", e))?.shared())
    }

    pub fn structure(&self) -> Result<CurvedStructure> {
        let b = self.bundle()?;
        let mut lam = OpFamily::new(b.clone(), b.clone(), 1);
        read_entries(&self.operations, &b, &b, "operations", &mut lam)?;
        if self.delta.is_empty() {
            return CurvedStructure::new(b, lam);
        }
        let mut d = OpFamily::new(b.clone(), b.clone(), 1);
        read_entries(&self.delta, &b, &b, "delta", &mut d)?;
        if d.arities().iter().any(|&k| k != 1) {
            return Err(Error::Parse("delta: every entry must have exactly one input".into()));
        }
        let delta = d.op(1).cloned().unwrap_or_else(|| MultiOp::new(b.clone(), b.clone(), 1, 1));
        CurvedStructure::with_delta(b, delta, lam)
    }

    /// The structure as a validated derived chart.
    pub fn chart(&self) -> Result<DerivedChart> {
        DerivedChart::new(self.structure()?)
    }

    pub fn points(&self) -> Result<Vec<Vec<Q>>> {
        self.points.iter().enumerate().map(|(i, p)| parse_point(p, &format!("points[{i}]"))).collect()
    }

    pub fn connection(&self, b: &Arc<GradedBundle>) -> Result<Option<ConnectionData>> {
        let Some(entries) = &self.connection else { return Ok(None) };
        let chart = b.chart();
        let mut mats = vec![PolyMatrix::zeros(b.rank(), b.rank(), b.nvars()); b.nvars()];
        for (k, e) in entries.iter().enumerate() {
            let p = format!("connection[{k}]");
            let j = chart
                .coords()
                .iter()
                .position(|c| c == &e.coordinate)
                .ok_or_else(|| Error::Parse(format!("{p}: unknown coordinate '{}'", e.coordinate)))?;
            let (r, c) = (index(b, &e.row, &p)?, index(b, &e.column, &p)?);
            mats[j].set(r, c, chart.parse(&e.value).map_err(|err| at(&p, err))?);
        }
        ConnectionData::new(b.clone(), mats).map(Some).map_err(|e| at("connection", e))
    }

    pub fn from_structure(s: &CurvedStructure) -> Self {
        let b = s.bundle();
        let mut bundle: BTreeMap<i32, Vec<String>> = BTreeMap::new();
        for e in b.basis() {
            bundle.entry(e.degree).or_default().push(e.name.clone());
        }
        ChartDocument {
            schema: Some(CHART_SCHEMA.into()),
            coordinates: b.chart().coords().to_vec(),
            bundle,
            delta: s.delta().map(|d| write_op(d, b.chart())).unwrap_or_default(),
            operations: write_family(s.lambda(), b.chart()),
            connection: None,
            points: Vec::new(),
        }
    }

    pub fn with_points(mut self, points: &[Vec<Q>]) -> Self {
        self.points = points.iter().map(|p| p.iter().map(Rational::from_q).collect()).collect();
        self
    }
}

/// A morphism between two charts given in separate documents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphismDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    /// One polynomial in the source coordinates per target coordinate.
    pub base_map: Vec<String>,
    /// Inputs name source basis elements; outputs name target ones.
    pub components: Vec<Entry>,
}

impl MorphismDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MorphismDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("morphism document: {e}")))?;
        check_schema(&doc.schema, MORPHISM_SCHEMA)?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents serialize")
    }

    pub fn morphism(&self, source: &Arc<GradedBundle>, target: &Arc<GradedBundle>) -> Result<LooMorphism> {
        let chart = source.chart();
        let base = self
            .base_map
            .iter()
            .enumerate()
            .map(|(i, p)| chart.parse(p).map_err(|e| at(&format!("base_map[{i}]"), e)))
            .collect::<Result<Vec<_>>>()?;
        let pulled = pulled_target(source, target);
        let mut phi = OpFamily::new(source.clone(), pulled.clone(), 0);
        read_entries(&self.components, source, &pulled, "components", &mut phi)?;
        LooMorphism::new(source.clone(), target.clone(), base, phi)
    }

    pub fn from_morphism(m: &LooMorphism) -> Self {
        let chart = m.source().chart();
        MorphismDocument {
            schema: Some(MORPHISM_SCHEMA.into()),
            base_map: m.base_map().iter().map(|p| chart.show(p)).collect(),
            components: write_family(m.phi(), chart),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub name: String,
    pub degree: i32,
    pub column: BTreeMap<String, String>,
}

/// Homotopy data for transfer; δ comes from the chart's `delta` block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub eta: Vec<Entry>,
    #[serde(default = "auto_filtration")]
    pub filtration: FiltrationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<FrameEntry>>,
}

fn auto_filtration() -> FiltrationSpec {
    FiltrationSpec::Auto
}

impl ContractionDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ContractionDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("contraction document: {e}")))?;
        check_schema(&doc.schema, CONTRACTION_SCHEMA)?;
        Ok(doc)
    }

    pub fn contraction(&self, s: &CurvedStructure) -> Result<ContractionData> {
        let b = s.bundle();
        let mut eta = OpFamily::new(b.clone(), b.clone(), -1);
        read_entries(&self.eta, b, b, "eta", &mut eta)?;
        if eta.arities().iter().any(|&k| k != 1) {
            return Err(Error::Parse("eta: every entry must have exactly one input".into()));
        }
        let eta = eta.op(1).cloned().unwrap_or_else(|| MultiOp::new(b.clone(), b.clone(), 1, -1));
        let (delta, _) = s.split();
        let mut c = ContractionData::new(b.clone(), delta, eta, self.filtration.clone())?;
        if let Some(frame) = &self.frame {
            let mut names = Vec::new();
            let mut columns = Vec::new();
            for (k, f) in frame.iter().enumerate() {
                names.push((f.name.clone(), f.degree));
                let p = format!("frame[{k}]");
                let mut v = b.zero_vec();
                for (n, poly) in &f.column {
                    v.0[index(b, n, &p)?] = b.chart().parse(poly).map_err(|e| at(&p, e))?;
                }
                columns.push(v);
            }
            c = c.with_frame(Frame { names, columns });
        }
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PresentationDocument {
    Parametrized { matrix: Vec<Vec<Rational>>, offset: Vec<Rational> },
    ZeroLocus { matrix: Vec<Vec<Rational>>, rhs: Vec<Rational> },
    /// Dependent coordinates as polynomials in the free ones.
    Graph { free: Vec<String>, values: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubmanifoldDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema: Option<String>,
    pub label: String,
    pub ambient: Vec<String>,
    pub presentation: PresentationDocument,
}

fn parse_matrix(rows: &[Vec<Rational>], cols: usize, path: &str) -> Result<QMatrix> {
    let rows: Vec<Vec<Q>> = rows.iter().enumerate().map(|(i, r)| parse_point(r, &format!("{path}[{i}]"))).collect::<Result<_>>()?;
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::Dimension(format!("{path}: every row must have {cols} entries")));
    }
    Ok(if rows.is_empty() { QMatrix::zeros(0, cols) } else { QMatrix::from_rows(rows) })
}

impl SubmanifoldDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: SubmanifoldDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("submanifold document: {e}")))?;
        check_schema(&doc.schema, SUBMANIFOLD_SCHEMA)?;
        Ok(doc)
    }

    pub fn submanifold(&self) -> Result<Submanifold> {
        let ambient = Chart::new(self.ambient.iter().cloned()).map_err(|e| at("ambient", e))?;
        let presentation = match &self.presentation {
            PresentationDocument::Parametrized { matrix, offset } => {
                let cols = matrix.first().map_or(0, Vec::len);
                Presentation::Parametrized {
                    matrix: parse_matrix(matrix, cols, "presentation.matrix")?,
                    offset: parse_point(offset, "presentation.offset")?,
                }
            }
            PresentationDocument::ZeroLocus { matrix, rhs } => Presentation::ZeroLocus {
                matrix: parse_matrix(matrix, ambient.dim(), "presentation.matrix")?,
                rhs: parse_point(rhs, "presentation.rhs")?,
            },
            PresentationDocument::Graph { free, values } => {
                let idx = free
                    .iter()
                    .map(|n| {
                        ambient.coords().iter().position(|c| c == n).ok_or_else(|| Error::Parse(format!("presentation.free: unknown coordinate '{n}'")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let params = Chart::new(free.iter().cloned()).map_err(|e| at("presentation.free", e))?;
                let values = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| params.parse(v).map_err(|e| at(&format!("presentation.values[{i}]"), e)))
                    .collect::<Result<Vec<Poly>>>()?;
                Presentation::Graph { free: idx, values }
            }
        };
        Submanifold::new(self.label.clone(), ambient, presentation)
    }
}

/// A bare list of points, e.g. `[["0", "1/2"], [1, 2]]`.
pub fn parse_points(text: &str) -> Result<Vec<Vec<Q>>> {
    let raw: Vec<Vec<Rational>> = serde_json::from_str(text).map_err(|e| Error::Parse(format!("points: {e}")))?;
    raw.iter().enumerate().map(|(i, p)| parse_point(p, &format!("points[{i}]"))).collect()
}

pub fn show_point(p: &[Q]) -> Vec<String> {
    p.iter().map(|q| q.to_string()).collect()
}

/// The envelope every command emits.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub files: Vec<String>,
    pub pass: bool,
    pub payload: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<u64>,
}

impl Report {
    pub fn new(command: &str, files: &[String], pass: bool, payload: serde_json::Value) -> Self {
        Report { schema: REPORT_SCHEMA, command: command.into(), files: files.to_vec(), pass, payload, timing_ms: None }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// One line per scalar field; arrays of strings one item per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}: {}\n", self.command, self.files.join(" "), if self.pass { "PASS" } else { "FAIL" });
        if let serde_json::Value::Object(map) = &self.payload {
            for (k, v) in map {
                write_text(&mut out, k, v);
            }
        }
        if let Some(t) = self.timing_ms {
            out.push_str(&format!("timing_ms: {t}\n"));
        }
        out
    }
}

fn write_text(out: &mut String, key: &str, v: &serde_json::Value) {
    use serde_json::Value;
    match v {
        Value::String(s) => out.push_str(&format!("{key}: {s}\n")),
        Value::Array(items) if items.iter().all(Value::is_string) && !items.is_empty() => {
            out.push_str(&format!("{key}:\n"));
            for i in items {
                out.push_str(&format!("  {}\n", i.as_str().unwrap()));
            }
        }
        Value::Object(map) if map.values().all(|x| !x.is_object()) => {
            for (k, x) in map {
                write_text(out, &format!("{key}.{k}"), x);
            }
        }
        other => out.push_str(&format!("{key}: {other}\n")),
    }
}

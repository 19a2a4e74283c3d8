//! Command line driver: JSON input documents, the full analysis pipeline,
//! and machine- or human-readable report rendering.
//!
//! Exit codes: 0 on success, 1 when the input parses but fails validation
//! (bad characteristic vectors, a poset that is not nice, an incomplete
//! fan), 2 when the input is malformed (unreadable file, bad JSON, shape
//! violations, bad parameters).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde::de;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::charfun::{self, CharFnError, CharacteristicFunction};
use crate::cohomology::{
    analyze, boundary_degrees, full_report_low_dim, AssumptionFlags, CohomologyError,
    CohomologyReport, CohomologyValue, Decision, TorsionVerdict,
};
use crate::fan::{
    completeness_check, counterexample_fan, delta_cokernels, fan_to_pair, fibration_fan,
    simplex3_example, weighted_triangle, Fan, FanError, DEFAULT_TRIALS,
};
use crate::lattice::{cokernel, wedge_square_quotient, FinAbGroup, Index, Int, IntMatrix};
use crate::poset::{FacePoset, FacetSet, PosetError, ReferenceKind};

/// Exact integer that crosses the JSON boundary as a number when it fits in
/// an `i64` and as a decimal string otherwise. Both forms are accepted on
/// input; floats are rejected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactInt(pub Int);

impl From<i64> for ExactInt {
    fn from(x: i64) -> Self {
        ExactInt(Int::from(x))
    }
}

impl Serialize for ExactInt {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0.to_i64() {
            Some(x) => s.serialize_i64(x),
            None => s.serialize_str(&self.0.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for ExactInt {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct IntVisitor;
        impl de::Visitor<'_> for IntVisitor {
            type Value = ExactInt;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("an integer or a decimal string")
            }

            fn visit_i64<E: de::Error>(self, x: i64) -> Result<ExactInt, E> {
                Ok(ExactInt(Int::from(x)))
            }

            fn visit_u64<E: de::Error>(self, x: u64) -> Result<ExactInt, E> {
                Ok(ExactInt(Int::from(x)))
            }

            fn visit_f64<E: de::Error>(self, x: f64) -> Result<ExactInt, E> {
                Err(E::custom(format!(
                    "floating point value {x} not accepted; write an integer or a decimal string"
                )))
            }

            fn visit_str<E: de::Error>(self, x: &str) -> Result<ExactInt, E> {
                x.trim()
                    .parse::<Int>()
                    .map(ExactInt)
                    .map_err(|_| E::custom(format!("not a decimal integer: {x:?}")))
            }
        }
        d.deserialize_any(IntVisitor)
    }
}

/// One structured input: a face source (exactly one of `polytope`, `poset`,
/// `fan`), characteristic vectors for the first two kinds, and optional
/// assumption overrides and primes. All facet, vertex and ray indices in
/// the document are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDocument {
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polytope: Option<PolytopeInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poset: Option<PosetInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fan: Option<FanInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vectors: Option<Vec<Vec<ExactInt>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primes: Option<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeInput {
    /// Facet set of each vertex, 1-based facet indices.
    pub vertex_facet_sets: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PosetInput {
    pub faces: Vec<FaceInput>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceInput {
    /// 1-based facet indices carrying this face.
    pub facets: Vec<usize>,
    /// 1-based vertex indices inside this face.
    pub vertices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FanInput {
    pub rays: Vec<Vec<ExactInt>>,
    /// 1-based ray indices of each maximal cone.
    pub max_cones: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AssumptionInput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_acyclic: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facet_h1_trivial: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_p_acyclic: Option<Vec<u32>>,
}

/// Canonical encoding of a finitely generated abelian group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupOut {
    pub rank: usize,
    pub factors: Vec<ExactInt>,
}

impl GroupOut {
    fn from_group(g: &FinAbGroup) -> Self {
        GroupOut {
            rank: g.free_rank(),
            factors: g.torsion().iter().cloned().map(ExactInt).collect(),
        }
    }

    fn to_group(&self) -> FinAbGroup {
        FinAbGroup::new(self.rank, self.factors.iter().map(|x| x.0.clone()).collect())
    }
}

/// A face index value: finite integer or the symbol for an infinite index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndexOut {
    Finite(ExactInt),
    Infinite,
}

impl IndexOut {
    fn from_index(x: &Index) -> Self {
        match x {
            Index::Finite(v) => IndexOut::Finite(ExactInt(v.clone())),
            Index::Infinite => IndexOut::Infinite,
        }
    }

    fn is_one(&self) -> bool {
        matches!(self, IndexOut::Finite(x) if x.0 == Int::from(1))
    }
}

impl std::fmt::Display for IndexOut {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IndexOut::Finite(x) => write!(f, "{}", x.0),
            IndexOut::Infinite => write!(f, "\u{221e}"),
        }
    }
}

impl Serialize for IndexOut {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            IndexOut::Finite(x) => x.serialize(s),
            IndexOut::Infinite => s.serialize_str("\u{221e}"),
        }
    }
}

impl<'de> Deserialize<'de> for IndexOut {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct IndexVisitor;
        impl de::Visitor<'_> for IndexVisitor {
            type Value = IndexOut;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("an integer, a decimal string, or \"\u{221e}\"")
            }

            fn visit_i64<E: de::Error>(self, x: i64) -> Result<IndexOut, E> {
                Ok(IndexOut::Finite(ExactInt(Int::from(x))))
            }

            fn visit_u64<E: de::Error>(self, x: u64) -> Result<IndexOut, E> {
                Ok(IndexOut::Finite(ExactInt(Int::from(x))))
            }

            fn visit_str<E: de::Error>(self, x: &str) -> Result<IndexOut, E> {
                let t = x.trim();
                if t == "\u{221e}" || t == "inf" {
                    return Ok(IndexOut::Infinite);
                }
                t.parse::<Int>()
                    .map(|v| IndexOut::Finite(ExactInt(v)))
                    .map_err(|_| E::custom(format!("not an index value: {x:?}")))
            }
        }
        d.deserialize_any(IndexVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOut {
    pub kind: String,
    pub nice: bool,
    pub class: String,
    pub dimension: usize,
    pub facets: usize,
    pub vertices: usize,
    pub faces: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletenessOut {
    pub passed: bool,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MuEntryOut {
    pub face: String,
    pub dim: usize,
    pub value: IndexOut,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeOut {
    pub degree: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedOut {
    pub degree: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohomologyOut {
    pub degrees: Vec<DegreeOut>,
    pub skipped: Vec<SkippedOut>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaOut {
    pub top: GroupOut,
    pub next: GroupOut,
    pub matches_lattice_route: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictOut {
    pub p: ExactInt,
    pub decision: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    pub notes: Vec<String>,
}

/// The full machine-readable report. The `input` field is an exact echo of
/// the parsed input document, so piping a report back through the parser
/// reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub input: InputDocument,
    pub validation: ValidationOut,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completeness: Option<CompletenessOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<MuEntryOut>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_determinants: Option<Vec<ExactInt>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cohomology: Option<CohomologyOut>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<DeltaOut>,
    pub verdicts: Vec<VerdictOut>,
}

#[derive(Debug)]
enum Failure {
    /// Unparseable or shape-violating input; exit 2.
    Malformed(String),
    /// Well-formed input that fails a semantic check; exit 1.
    Validation(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Malformed(_) => 2,
            Failure::Validation(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Malformed(m) | Failure::Validation(m) => m,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "orbicoh",
    version,
    about = "Exact lattice invariants, boundary cohomology and torsion verdicts for torus orbifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Analyze a polytope or poset input document
    Analyze {
        /// Path to a JSON input document
        file: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Check a fan document for completeness and analyze its dual pair
    Fan {
        /// Path to a JSON input document with a "fan" section
        file: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
    },
    /// Run a built-in example
    Example {
        #[arg(value_enum)]
        name: ExampleName,
        /// Family parameter: weight or torsion order for the parameterized
        /// examples, dimension for the reference posets
        #[arg(long)]
        param: Option<i64>,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(Args, Debug)]
struct CommonOpts {
    /// Additional prime to test (repeatable)
    #[arg(long = "prime", value_name = "P")]
    primes: Vec<u32>,
    /// Emit the machine-readable JSON report instead of text
    #[arg(long)]
    json: bool,
    /// Seed for the completeness sampler
    #[arg(long, env = "ORBICOH_SEED", default_value_t = 0)]
    seed: u64,
    /// Number of sampled directions in completeness checks
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ExampleName {
    /// Triangle with vectors (2a,1), (0,1), (-a,-1)
    WeightedTriangle,
    /// 3-simplex with an index-2 vector span
    Simplex3,
    /// Complete fan fibering over the projective line
    Fibration,
    /// Seven-ray fan over the cut prism
    Counterexample,
    /// Reference poset with two vertices
    Diamond,
    /// Reference simplex poset
    Simplex,
    /// Reference prism poset
    Prism,
}

/// Parses `argv` and runs one subcommand, writing the report to `out` and
/// diagnostics to `err`. Returns the process exit code.
pub fn run<O: Write, E: Write>(
    argv: impl IntoIterator<Item = String>,
    out: &mut O,
    err: &mut E,
) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                0
            } else {
                let _ = write!(err, "{e}");
                2
            };
        }
    };
    let (report, opts) = match dispatch(cli.command) {
        Ok(pair) => pair,
        Err(f) => {
            let _ = writeln!(err, "{}", f.message());
            return f.code();
        }
    };
    let rendered = if opts.json {
        let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
        text.push('\n');
        text
    } else {
        render_human(&report)
    };
    let _ = write!(out, "{rendered}");
    0
}

fn dispatch(command: Command) -> Result<(ReportDocument, CommonOpts), Failure> {
    // reject bad --prime values up front, even on runs that never test primes
    let opts = match &command {
        Command::Analyze { opts, .. } | Command::Fan { opts, .. } | Command::Example { opts, .. } => opts,
    };
    for &p in &opts.primes {
        require_prime(p)?;
    }
    match command {
        Command::Analyze { file, opts } => {
            let doc = read_document(&file)?;
            let report = analyze_document(&doc, &opts)?;
            Ok((report, opts))
        }
        Command::Fan { file, opts } => {
            let doc = read_document(&file)?;
            let report = fan_document(&doc, &opts)?;
            Ok((report, opts))
        }
        Command::Example { name, param, opts } => {
            let report = example_report(name, param, &opts)?;
            Ok((report, opts))
        }
    }
}

fn read_document(path: &std::path::Path) -> Result<InputDocument, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Malformed(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Malformed(format!("{}: {e}", path.display())))
}

fn kind_count(doc: &InputDocument) -> usize {
    doc.polytope.is_some() as usize + doc.poset.is_some() as usize + doc.fan.is_some() as usize
}

/// Converts a 1-based external index into the 0-based internal one.
fn to_internal(what: &str, index: usize) -> Result<usize, Failure> {
    index.checked_sub(1).ok_or_else(|| {
        Failure::Malformed(format!("{what} indices are 1-based; found 0"))
    })
}

fn require_prime(p: u32) -> Result<Int, Failure> {
    if p < 2 {
        return Err(Failure::Malformed(format!("{p} is not a prime")));
    }
    let mut q = 2u32;
    while (q as u64) * (q as u64) <= p as u64 {
        if p.is_multiple_of(q) {
            return Err(Failure::Malformed(format!("{p} is not a prime")));
        }
        q += 1;
    }
    Ok(Int::from(p))
}

fn collect_primes(opts: &CommonOpts, doc_primes: Option<&Vec<u32>>) -> Result<Vec<Int>, Failure> {
    let mut set = BTreeSet::new();
    for &p in &opts.primes {
        set.insert(require_prime(p)?);
    }
    if let Some(ps) = doc_primes {
        for &p in ps {
            set.insert(require_prime(p)?);
        }
    }
    Ok(set.into_iter().collect())
}

fn resolve_flags(
    mut flags: AssumptionFlags,
    overrides: Option<&AssumptionInput>,
) -> Result<AssumptionFlags, Failure> {
    if let Some(a) = overrides {
        if let Some(x) = a.face_acyclic {
            flags.face_acyclic = x;
        }
        if let Some(x) = a.facet_h1_trivial {
            flags.facet_h1_trivial = x;
        }
        if let Some(ps) = &a.face_p_acyclic {
            for &p in ps {
                flags.declare_p_acyclic(require_prime(p)?);
            }
        }
    }
    Ok(flags)
}

fn int_rows(rows: &[Vec<ExactInt>]) -> Vec<Vec<Int>> {
    rows.iter()
        .map(|r| r.iter().map(|x| x.0.clone()).collect())
        .collect()
}

fn build_poset(doc: &InputDocument, m: usize) -> Result<FacePoset, Failure> {
    if let Some(p) = &doc.polytope {
        let mut sets = Vec::with_capacity(p.vertex_facet_sets.len());
        for vertex in &p.vertex_facet_sets {
            let mut set = FacetSet::new();
            for &facet in vertex {
                set.insert(to_internal("facet", facet)?);
            }
            sets.push(set);
        }
        return FacePoset::from_vertex_facets(doc.n, m, &sets)
            .map_err(|e| Failure::Validation(e.to_string()));
    }
    if let Some(p) = &doc.poset {
        let mut faces = Vec::with_capacity(p.faces.len());
        for face in &p.faces {
            let mut facets = FacetSet::new();
            for &f in &face.facets {
                facets.insert(to_internal("facet", f)?);
            }
            let mut vertices = BTreeSet::new();
            for &w in &face.vertices {
                vertices.insert(to_internal("vertex", w)?);
            }
            faces.push((facets, vertices));
        }
        return FacePoset::from_explicit_faces(doc.n, m, &faces)
            .map_err(|e| Failure::Validation(e.to_string()));
    }
    unreachable!("callers check the input kind first");
}

fn charfun_failure(e: CharFnError) -> Failure {
    match e {
        CharFnError::VectorCount { .. } | CharFnError::VectorShape { .. } => {
            Failure::Malformed(e.to_string())
        }
        other => Failure::Validation(other.to_string()),
    }
}

fn fan_failure(e: FanError) -> Failure {
    match e {
        FanError::ZeroDimension
        | FanError::NoCones
        | FanError::RayShape { .. }
        | FanError::NonPositiveParameter(_) => Failure::Malformed(e.to_string()),
        other => Failure::Validation(other.to_string()),
    }
}

fn validation_out(kind: &str, poset: &FacePoset) -> ValidationOut {
    ValidationOut {
        kind: kind.to_string(),
        nice: poset.is_nice(),
        class: poset.classify().to_string(),
        dimension: poset.dim(),
        facets: poset.facet_count(),
        vertices: poset.vertex_count(),
        faces: poset.faces().len(),
    }
}

fn verdict_out(v: &TorsionVerdict) -> VerdictOut {
    let (decision, witness, case) = match &v.decision {
        Decision::HasPTorsion { witness_label, .. } => (
            "has-p-torsion".to_string(),
            Some(witness_label.clone()),
            None,
        ),
        Decision::NoPTorsion { case } => ("no-p-torsion".to_string(), None, Some(case.to_string())),
        Decision::Inconclusive => ("inconclusive".to_string(), None, None),
    };
    VerdictOut {
        p: ExactInt(v.p.clone()),
        decision,
        witness,
        case,
        notes: v.notes.clone(),
    }
}

fn cohomology_out(report: &CohomologyReport) -> CohomologyOut {
    let degrees = report
        .iter()
        .map(|(degree, value)| match value {
            CohomologyValue::Group(g) => DegreeOut {
                degree,
                group: Some(GroupOut::from_group(g)),
                note: None,
            },
            CohomologyValue::ZeroOrTorsion => DegreeOut {
                degree,
                group: None,
                note: Some("zero or torsion".to_string()),
            },
        })
        .collect();
    let skipped = report
        .skipped()
        .iter()
        .map(|(degree, reason)| SkippedOut {
            degree: *degree,
            reason: reason.clone(),
        })
        .collect();
    CohomologyOut { degrees, skipped }
}

/// Everything computable from a validated (poset, vectors) pair.
struct PairSections {
    mu: Vec<MuEntryOut>,
    vertex_determinants: Vec<ExactInt>,
    cohomology: Option<CohomologyOut>,
    verdicts: Vec<VerdictOut>,
}

fn cohomology_section(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    flags: &AssumptionFlags,
) -> Result<Option<CohomologyOut>, Failure> {
    let n = poset.dim();
    if n < 2 {
        return Ok(None);
    }
    let report = if (n == 2 || n == 3) && flags.face_acyclic {
        match full_report_low_dim(poset, v, flags) {
            Ok(r) => r,
            Err(CohomologyError::EulerCheckFailed { vertices, expected }) => {
                return Err(Failure::Validation(format!(
                    "declared face acyclicity contradicts the face counts: \
                     {vertices} vertices where {expected} are required"
                )))
            }
            Err(e) => return Err(Failure::Validation(e.to_string())),
        }
    } else {
        boundary_degrees(poset, v, flags).map_err(|e| Failure::Validation(e.to_string()))?
    };
    Ok(Some(cohomology_out(&report)))
}

fn run_pair(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    flags: &AssumptionFlags,
    primes: &[Int],
) -> Result<PairSections, Failure> {
    let mu = charfun::mu_table(poset, v).map_err(|e| Failure::Validation(e.to_string()))?;
    let dets = charfun::vertex_dets(poset, v).map_err(|e| Failure::Validation(e.to_string()))?;
    let cohomology = cohomology_section(poset, v, flags)?;
    let verdicts = analyze(poset, v, flags, primes)
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let mu_entries = mu
        .iter()
        .map(|(id, value)| MuEntryOut {
            face: poset.face_label(id),
            dim: poset.face(id).dim(),
            value: IndexOut::from_index(value),
        })
        .collect();
    Ok(PairSections {
        mu: mu_entries,
        vertex_determinants: dets.values().iter().cloned().map(ExactInt).collect(),
        cohomology,
        verdicts: verdicts.iter().map(verdict_out).collect(),
    })
}

fn analyze_document(doc: &InputDocument, opts: &CommonOpts) -> Result<ReportDocument, Failure> {
    if kind_count(doc) != 1 {
        return Err(Failure::Malformed(
            "exactly one of 'polytope', 'poset', 'fan' must be present".into(),
        ));
    }
    if doc.fan.is_some() {
        return Err(Failure::Malformed(
            "this document holds a fan; run the 'fan' subcommand".into(),
        ));
    }
    let vectors = doc.vectors.as_ref().ok_or_else(|| {
        Failure::Malformed("'vectors' is required for polytope and poset inputs".into())
    })?;
    let kind = if doc.polytope.is_some() { "polytope" } else { "poset" };
    let poset = build_poset(doc, vectors.len())?;
    poset
        .validate_nice()
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let charfun =
        CharacteristicFunction::new(doc.n, int_rows(vectors)).map_err(charfun_failure)?;
    let violations =
        charfun::validate(&poset, &charfun).map_err(charfun_failure)?;
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(Failure::Validation(lines.join("\n")));
    }
    let flags = resolve_flags(AssumptionFlags::all(), doc.assumptions.as_ref())?;
    let primes = collect_primes(opts, doc.primes.as_ref())?;
    let sections = run_pair(&poset, &charfun, &flags, &primes)?;
    Ok(ReportDocument {
        input: doc.clone(),
        validation: validation_out(kind, &poset),
        completeness: None,
        mu: Some(sections.mu),
        vertex_determinants: Some(sections.vertex_determinants),
        cohomology: sections.cohomology,
        delta: None,
        verdicts: sections.verdicts,
    })
}

fn build_fan(doc: &InputDocument) -> Result<Fan, Failure> {
    let input = doc.fan.as_ref().expect("caller checked the kind");
    let mut cones = Vec::with_capacity(input.max_cones.len());
    for cone in &input.max_cones {
        let mut set = FacetSet::new();
        for &ray in cone {
            set.insert(to_internal("ray", ray)?);
        }
        cones.push(set);
    }
    Fan::new(doc.n, int_rows(&input.rays), cones).map_err(fan_failure)
}

fn fan_document(doc: &InputDocument, opts: &CommonOpts) -> Result<ReportDocument, Failure> {
    if kind_count(doc) != 1 {
        return Err(Failure::Malformed(
            "exactly one of 'polytope', 'poset', 'fan' must be present".into(),
        ));
    }
    if doc.fan.is_none() {
        return Err(Failure::Malformed(
            "the 'fan' subcommand needs a document with a 'fan' section".into(),
        ));
    }
    if doc.vectors.is_some() {
        return Err(Failure::Malformed(
            "fan inputs carry their vectors as rays; drop the 'vectors' field".into(),
        ));
    }
    let fan = build_fan(doc)?;
    fan_report(doc.clone(), &fan, doc.assumptions.as_ref(), doc.primes.as_ref(), opts)
}

/// Shared tail of the fan pipeline: completeness, dual pair, both torsion
/// routes with the cross-check, and the verdict analysis.
fn fan_report(
    echo: InputDocument,
    fan: &Fan,
    assumptions: Option<&AssumptionInput>,
    doc_primes: Option<&Vec<u32>>,
    opts: &CommonOpts,
) -> Result<ReportDocument, Failure> {
    let completeness = completeness_check(fan, opts.trials, opts.seed);
    if !completeness.passed() {
        return Err(Failure::Validation(completeness.to_string()));
    }
    let pair = fan_to_pair(fan).map_err(fan_failure)?;
    let flags = resolve_flags(pair.flags.clone(), assumptions)?;
    let (top, next) = delta_cokernels(fan).map_err(fan_failure)?;
    let lattice_top = cokernel(&IntMatrix::from_columns(fan.dim(), fan.rays()));
    let lattice_next = wedge_square_quotient(fan.rays(), fan.dim())
        .map_err(|e| Failure::Validation(e.to_string()))?;
    let matches = top == lattice_top && next == lattice_next;
    if !matches {
        return Err(Failure::Validation(format!(
            "internal cross-check failed: boundary-map route gave ({top}, {next}), \
             lattice route gave ({lattice_top}, {lattice_next})"
        )));
    }
    let primes = collect_primes(opts, doc_primes)?;
    let sections = run_pair(&pair.poset, &pair.charfun, &flags, &primes)?;
    Ok(ReportDocument {
        input: echo,
        validation: validation_out("fan", &pair.poset),
        completeness: Some(CompletenessOut {
            passed: true,
            trials: completeness.trials(),
        }),
        mu: Some(sections.mu),
        vertex_determinants: Some(sections.vertex_determinants),
        cohomology: sections.cohomology,
        delta: Some(DeltaOut {
            top: GroupOut::from_group(&top),
            next: GroupOut::from_group(&next),
            matches_lattice_route: true,
        }),
        verdicts: sections.verdicts,
    })
}

fn echo_polytope(n: usize, poset: &FacePoset, vectors: Option<&CharacteristicFunction>) -> InputDocument {
    let sets = poset
        .vertex_facets()
        .iter()
        .map(|set| set.iter().map(|&f| f + 1).collect())
        .collect();
    InputDocument {
        n,
        polytope: Some(PolytopeInput {
            vertex_facet_sets: sets,
        }),
        poset: None,
        fan: None,
        vectors: vectors.map(|v| {
            v.vectors()
                .iter()
                .map(|row| row.iter().cloned().map(ExactInt).collect())
                .collect()
        }),
        assumptions: None,
        primes: None,
    }
}

fn echo_fan(fan: &Fan) -> InputDocument {
    InputDocument {
        n: fan.dim(),
        polytope: None,
        poset: None,
        fan: Some(FanInput {
            rays: fan
                .rays()
                .iter()
                .map(|r| r.iter().cloned().map(ExactInt).collect())
                .collect(),
            max_cones: fan
                .max_cones()
                .iter()
                .map(|c| c.iter().map(|&r| r + 1).collect())
                .collect(),
        }),
        vectors: None,
        assumptions: None,
        primes: None,
    }
}

fn example_report(
    name: ExampleName,
    param: Option<i64>,
    opts: &CommonOpts,
) -> Result<ReportDocument, Failure> {
    match name {
        ExampleName::WeightedTriangle => {
            let a = param.unwrap_or(1);
            let (poset, charfun) = weighted_triangle(a).map_err(fan_failure)?;
            pair_example_report(poset, charfun, opts)
        }
        ExampleName::Simplex3 => {
            if param.is_some() {
                return Err(Failure::Malformed("simplex3 takes no --param".into()));
            }
            let (poset, charfun) = simplex3_example();
            pair_example_report(poset, charfun, opts)
        }
        ExampleName::Fibration => {
            let fan = fibration_fan(param.unwrap_or(1)).map_err(fan_failure)?;
            fan_report(echo_fan(&fan), &fan, None, None, opts)
        }
        ExampleName::Counterexample => {
            let fan = counterexample_fan(param.unwrap_or(1)).map_err(fan_failure)?;
            fan_report(echo_fan(&fan), &fan, None, None, opts)
        }
        ExampleName::Diamond => reference_report(ReferenceKind::Diamond, param),
        ExampleName::Simplex => reference_report(ReferenceKind::Simplex, param),
        ExampleName::Prism => reference_report(ReferenceKind::Prism, param),
    }
}

fn pair_example_report(
    poset: FacePoset,
    charfun: CharacteristicFunction,
    opts: &CommonOpts,
) -> Result<ReportDocument, Failure> {
    let flags = AssumptionFlags::all();
    let primes = collect_primes(opts, None)?;
    let sections = run_pair(&poset, &charfun, &flags, &primes)?;
    Ok(ReportDocument {
        input: echo_polytope(poset.dim(), &poset, Some(&charfun)),
        validation: validation_out("polytope", &poset),
        completeness: None,
        mu: Some(sections.mu),
        vertex_determinants: Some(sections.vertex_determinants),
        cohomology: sections.cohomology,
        delta: None,
        verdicts: sections.verdicts,
    })
}

fn reference_report(kind: ReferenceKind, param: Option<i64>) -> Result<ReportDocument, Failure> {
    let n = param.unwrap_or(3);
    if n < 1 {
        return Err(Failure::Malformed(format!(
            "dimension must be at least 1, got {n}"
        )));
    }
    let poset = FacePoset::reference(kind, n as usize)
        .map_err(|e: PosetError| Failure::Malformed(e.to_string()))?;
    Ok(ReportDocument {
        input: echo_polytope(poset.dim(), &poset, None),
        validation: validation_out("reference", &poset),
        completeness: None,
        mu: None,
        vertex_determinants: None,
        cohomology: None,
        delta: None,
        verdicts: Vec::new(),
    })
}

fn render_human(report: &ReportDocument) -> String {
    let mut s = String::new();
    let v = &report.validation;
    let _ = writeln!(
        s,
        "input: {}, n = {}, {} facets, {} vertices, {} faces",
        v.kind, v.dimension, v.facets, v.vertices, v.faces
    );
    let _ = writeln!(
        s,
        "validation: {}, class = {}",
        if v.nice { "nice" } else { "not nice" },
        v.class
    );
    if let Some(c) = &report.completeness {
        let _ = writeln!(
            s,
            "completeness: {} ({} sampled directions)",
            if c.passed { "passed" } else { "failed" },
            c.trials
        );
    }
    if let Some(mu) = &report.mu {
        let _ = writeln!(s, "face indices:");
        let mut ones = 0usize;
        for entry in mu {
            if entry.value.is_one() && entry.face != "Q" {
                ones += 1;
            } else {
                let _ = writeln!(s, "  mu({}) = {}", entry.face, entry.value);
            }
        }
        if ones > 0 {
            let _ = writeln!(
                s,
                "  mu = 1 for the remaining {ones} face{}",
                if ones == 1 { "" } else { "s" }
            );
        }
    }
    if let Some(dets) = &report.vertex_determinants {
        let list: Vec<String> = dets.iter().map(|d| d.0.to_string()).collect();
        let _ = writeln!(s, "vertex determinants: {}", list.join(", "));
    }
    if let Some(c) = &report.cohomology {
        let _ = writeln!(s, "cohomology of the boundary degrees:");
        for d in &c.degrees {
            match (&d.group, &d.note) {
                (Some(g), _) => {
                    let _ = writeln!(s, "  H^{} = {}", d.degree, g.to_group());
                }
                (None, Some(note)) => {
                    let _ = writeln!(s, "  H^{} = {}", d.degree, note);
                }
                (None, None) => {}
            }
        }
        for skip in &c.skipped {
            let _ = writeln!(s, "  H^{} skipped: {}", skip.degree, skip.reason);
        }
    }
    if let Some(d) = &report.delta {
        let top_degree = 2 * v.dimension - 1;
        let _ = writeln!(
            s,
            "boundary-map route: H^{} = {}, Tor H^{} = {} ({} the lattice route)",
            top_degree,
            d.top.to_group(),
            top_degree - 1,
            d.next.to_group(),
            if d.matches_lattice_route {
                "agrees with"
            } else {
                "DISAGREES with"
            }
        );
    }
    if report.verdicts.is_empty() {
        let _ = writeln!(s, "verdicts: none (no primes to test)");
    } else {
        let _ = writeln!(s, "verdicts:");
        for verdict in &report.verdicts {
            let line = match verdict.decision.as_str() {
                "has-p-torsion" => format!(
                    "p = {}: torsion present (witness {})",
                    verdict.p.0,
                    verdict.witness.as_deref().unwrap_or("?")
                ),
                "no-p-torsion" => format!(
                    "p = {}: no torsion ({} case)",
                    verdict.p.0,
                    verdict.case.as_deref().unwrap_or("?")
                ),
                _ => format!("p = {}: inconclusive", verdict.p.0),
            };
            let _ = writeln!(s, "  {line}");
            for note in &verdict.notes {
                let _ = writeln!(s, "    note: {note}");
            }
        }
    }
    s
}

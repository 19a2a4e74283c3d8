//! Cohomology of the torus space attached to a characteristic pair, at the
//! degrees where closed formulas exist, plus per-prime torsion verdicts.
//!
//! The top degrees come from the pair's lattice data: degree `2n` is always
//! `Z`, degree `2n-1` is `N/Nhat`, and degree `2n-2` is a free part counted
//! by `m - rank(Nhat)` together with the exterior-square quotient. Degrees 1
//! and 2 are `0` and `Z^(m-n)`. All of these lean on topological facts about
//! the base that a poset cannot certify, so the caller declares them as
//! [`AssumptionFlags`]; a formula whose flag is missing is skipped, never
//! guessed.
//!
//! The verdict machinery combines a necessary criterion (any face whose
//! index is divisible by `p`, or infinite, forces `p`-torsion) with
//! sufficiency results available only for the three reference poset shapes.
//! Outside those shapes the answer is `Inconclusive`; the ten-vertex corner
//! example is exactly the pair where every index is 1 yet torsion exists,
//! so the gap is real and the tool refuses to paper over it.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Zero};

use crate::charfun::{self, CharFnError, CharacteristicFunction, MuTable};
use crate::lattice::{self, cokernel, FinAbGroup, Index, Int};
use crate::poset::{FaceId, FacePoset, PosetClass};

/// Topological hypotheses the caller vouches for. A poset alone cannot
/// certify acyclicity, so these are declared, not computed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssumptionFlags {
    /// Every face (the whole space included) has trivial reduced homology.
    pub face_acyclic: bool,
    /// Every facet has trivial first homology.
    pub facet_h1_trivial: bool,
    /// Per-prime acyclicity declarations for the sufficiency results.
    pub face_p_acyclic: BTreeMap<Int, bool>,
}

impl AssumptionFlags {
    /// Everything declared; the default for vertex-generated inputs, whose
    /// intended geometry has contractible faces.
    pub fn all() -> Self {
        AssumptionFlags {
            face_acyclic: true,
            facet_h1_trivial: true,
            face_p_acyclic: BTreeMap::new(),
        }
    }

    /// Nothing declared.
    pub fn none() -> Self {
        AssumptionFlags::default()
    }

    pub fn declare_p_acyclic(&mut self, p: Int) {
        self.face_p_acyclic.insert(p, true);
    }

    /// Integral acyclicity implies every mod-p variant.
    pub fn is_face_p_acyclic(&self, p: &Int) -> bool {
        self.face_acyclic || self.face_p_acyclic.get(p).copied().unwrap_or(false)
    }

    /// Face acyclicity subsumes the facet H_1 condition.
    pub fn is_facet_h1_trivial(&self) -> bool {
        self.face_acyclic || self.facet_h1_trivial
    }
}

/// One reported degree: an explicit group, or the symbolic marker for a
/// degree where only "no free part" is known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CohomologyValue {
    Group(FinAbGroup),
    ZeroOrTorsion,
}

impl fmt::Display for CohomologyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CohomologyValue::Group(g) => write!(f, "{g}"),
            CohomologyValue::ZeroOrTorsion => write!(f, "0 or torsion"),
        }
    }
}

/// Cohomology by degree. Only asserted degrees appear; degrees that needed
/// an undeclared assumption are listed in `skipped` with the reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohomologyReport {
    n: usize,
    degrees: BTreeMap<usize, CohomologyValue>,
    skipped: Vec<(usize, String)>,
}

impl CohomologyReport {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, degree: usize) -> Option<&CohomologyValue> {
        self.degrees.get(&degree)
    }

    pub fn group(&self, degree: usize) -> Option<&FinAbGroup> {
        match self.degrees.get(&degree) {
            Some(CohomologyValue::Group(g)) => Some(g),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &CohomologyValue)> {
        self.degrees.iter().map(|(&d, v)| (d, v))
    }

    pub fn skipped(&self) -> &[(usize, String)] {
        &self.skipped
    }

    fn insert(&mut self, degree: usize, value: CohomologyValue) {
        if let Some(existing) = self.degrees.get(&degree) {
            debug_assert_eq!(existing, &value, "degree {degree} computed twice");
            return;
        }
        self.degrees.insert(degree, value);
    }

    fn skip(&mut self, degree: usize, reason: &str) {
        self.skipped.push((degree, reason.to_string()));
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CohomologyError {
    #[error("missing assumption: {0}")]
    MissingAssumption(&'static str),
    #[error("no report is defined for dimension {0}")]
    InvalidDimension(usize),
    #[error(
        "declared acyclicity contradicts the combinatorics: {vertices} vertices, expected 2m-4 = {expected}"
    )]
    EulerCheckFailed { vertices: usize, expected: isize },
    #[error(transparent)]
    CharFn(#[from] CharFnError),
}

/// The degrees with closed formulas: 0, 1, 2, 2n-2, 2n-1, 2n. Needs n >= 2.
/// Formulas with undeclared hypotheses are skipped with a note.
pub fn boundary_degrees(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    flags: &AssumptionFlags,
) -> Result<CohomologyReport, CohomologyError> {
    charfun::ensure_valid(poset, v)?;
    let n = poset.dim();
    if n < 2 {
        return Err(CohomologyError::InvalidDimension(n));
    }
    let m = poset.facet_count();
    let mut report = CohomologyReport {
        n,
        degrees: BTreeMap::new(),
        skipped: Vec::new(),
    };
    report.insert(0, CohomologyValue::Group(FinAbGroup::free(1)));
    report.insert(2 * n, CohomologyValue::Group(FinAbGroup::free(1)));

    let matrix = v.matrix();
    if flags.face_acyclic {
        report.insert(2 * n - 1, CohomologyValue::Group(cokernel(&matrix)));
    } else {
        report.skip(
            2 * n - 1,
            "needs face_acyclic: an unknown H_1 of the base enters this degree",
        );
    }

    if flags.face_acyclic && flags.is_facet_h1_trivial() {
        let rank = matrix.rank();
        let wedge =
            lattice::wedge_square_quotient(v.vectors(), n).map_err(CharFnError::from)?;
        let group = FinAbGroup::new(m - rank + wedge.free_rank(), wedge.torsion().to_vec());
        report.insert(2 * n - 2, CohomologyValue::Group(group));
    } else if !flags.face_acyclic {
        report.skip(
            2 * n - 2,
            "needs face_acyclic: unknown base homology enters this degree",
        );
    } else {
        report.skip(2 * n - 2, "needs facet_h1_trivial");
    }

    if flags.face_acyclic && poset.vertex_count() > 0 {
        report.insert(1, CohomologyValue::Group(FinAbGroup::trivial()));
        report.insert(2, CohomologyValue::Group(FinAbGroup::free(m - n)));
    } else {
        report.skip(1, "needs face_acyclic and a vertex");
        report.skip(2, "needs face_acyclic and a vertex");
    }
    Ok(report)
}

/// The complete table for n = 2 or n = 3. In dimension 3 the middle degree
/// carries no free part (checked through the vertex count), but its torsion
/// is not computable from the pair, so it is reported symbolically.
pub fn full_report_low_dim(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    flags: &AssumptionFlags,
) -> Result<CohomologyReport, CohomologyError> {
    let n = poset.dim();
    if !(n == 2 || n == 3) {
        return Err(CohomologyError::InvalidDimension(n));
    }
    if !flags.face_acyclic {
        return Err(CohomologyError::MissingAssumption("face_acyclic"));
    }
    let mut report = boundary_degrees(poset, v, flags)?;
    debug_assert!(report.skipped().is_empty());
    if n == 3 {
        let m = poset.facet_count();
        let vertices = poset.vertex_count();
        let expected = 2 * m as isize - 4;
        if vertices as isize != expected {
            return Err(CohomologyError::EulerCheckFailed { vertices, expected });
        }
        report.insert(3, CohomologyValue::ZeroOrTorsion);
    }
    Ok(report)
}

/// How a single prime fares.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    HasPTorsion { witness: FaceId, witness_label: String },
    NoPTorsion { case: PosetClass },
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorsionVerdict {
    pub p: Int,
    pub decision: Decision,
    pub notes: Vec<String>,
}

impl fmt::Display for TorsionVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.decision {
            Decision::HasPTorsion { witness_label, .. } => {
                write!(f, "p = {}: torsion present (witness {})", self.p, witness_label)
            }
            Decision::NoPTorsion { case } => {
                write!(f, "p = {}: no torsion ({} case)", self.p, case)
            }
            Decision::Inconclusive => write!(f, "p = {}: inconclusive", self.p),
        }
    }
}

/// Scan the index table for a face that forces `p`-torsion: index divisible
/// by `p` or infinite. `None` means the scan passed; it does not by itself
/// rule torsion out.
pub fn necessary_condition(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    p: &Int,
) -> Result<Option<TorsionVerdict>, CohomologyError> {
    let table = charfun::mu_table(poset, v)?;
    Ok(necessary_from_table(poset, &table, p))
}

fn necessary_from_table(
    poset: &FacePoset,
    table: &MuTable,
    p: &Int,
) -> Option<TorsionVerdict> {
    for (f, value) in table.iter() {
        let forces = match value {
            Index::Infinite => true,
            Index::Finite(x) => (x % p).is_zero(),
        };
        if forces {
            return Some(TorsionVerdict {
                p: p.clone(),
                decision: Decision::HasPTorsion {
                    witness: f,
                    witness_label: poset.face_label(f),
                },
                notes: vec![format!(
                    "face {} has index {}, divisible by {}",
                    poset.face_label(f),
                    value,
                    p
                )],
            });
        }
    }
    None
}

/// Try to certify the absence of `p`-torsion. Only the three reference
/// shapes have such results; everything else is `Inconclusive`.
pub fn sufficient_condition(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    p: &Int,
    flags: &AssumptionFlags,
) -> Result<TorsionVerdict, CohomologyError> {
    charfun::ensure_valid(poset, v)?;
    if !flags.is_face_p_acyclic(p) {
        return Err(CohomologyError::MissingAssumption(
            "face_p_acyclic for this prime",
        ));
    }
    let class = poset.classify();
    let top_index = charfun::nhat_index(v);
    let verdict = |decision, notes| TorsionVerdict {
        p: p.clone(),
        decision,
        notes,
    };
    match class {
        PosetClass::Diamond | PosetClass::Simplex => {
            if top_index.coprime_to(p) {
                Ok(verdict(Decision::NoPTorsion { case: class }, vec![]))
            } else {
                Ok(verdict(
                    Decision::Inconclusive,
                    vec![format!(
                        "the global index {top_index} is not coprime to {p}"
                    )],
                ))
            }
        }
        PosetClass::Prism => {
            if !top_index.coprime_to(p) {
                return Ok(verdict(
                    Decision::Inconclusive,
                    vec![format!(
                        "the global index {top_index} is not coprime to {p}"
                    )],
                ));
            }
            let mut cap_indices = Vec::new();
            for (i, j) in poset.prism_cap_pairs() {
                let mu_i = facet_mu(poset, v, i)?;
                let mu_j = facet_mu(poset, v, j)?;
                if mu_i.coprime_to(p) && mu_j.coprime_to(p) {
                    return Ok(verdict(Decision::NoPTorsion { case: class }, vec![]));
                }
                cap_indices.push(format!(
                    "caps {}, {}: indices {}, {}",
                    i + 1,
                    j + 1,
                    mu_i,
                    mu_j
                ));
            }
            Ok(verdict(
                Decision::Inconclusive,
                vec![
                    format!("no cap pair has both indices coprime to {p}"),
                    cap_indices.join("; "),
                ],
            ))
        }
        PosetClass::Other => Ok(verdict(
            Decision::Inconclusive,
            vec!["no sufficiency result covers this poset shape".to_string()],
        )),
    }
}

fn facet_mu(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    facet: usize,
) -> Result<Index, CohomologyError> {
    let pair = charfun::induced(poset, v, poset.facet_face(facet))?;
    Ok(charfun::nhat_index(&pair.charfun))
}

/// Prime factors of `x >= 2` by trial division; inputs here are products of
/// determinant-sized values, so this stays cheap.
fn prime_divisors(x: &Int) -> Vec<Int> {
    let mut out = Vec::new();
    let mut rest = x.clone();
    let mut p = Int::from(2);
    while (&p * &p) <= rest {
        if (&rest % &p).is_zero() {
            out.push(p.clone());
            while (&rest % &p).is_zero() {
                rest = &rest / &p;
            }
        }
        p += Int::one();
    }
    if rest > Int::one() {
        out.push(rest);
    }
    out
}

/// Full torsion analysis: verdicts for every prime dividing an index or a
/// vertex determinant, plus any caller-supplied primes, in increasing
/// order. Each prime gets the necessary scan first, then the sufficiency
/// attempt; a missing per-prime flag downgrades to `Inconclusive`.
pub fn analyze(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    flags: &AssumptionFlags,
    user_primes: &[Int],
) -> Result<Vec<TorsionVerdict>, CohomologyError> {
    let table = charfun::mu_table(poset, v)?;
    let dets = charfun::vertex_dets(poset, v)?;
    let mut primes: BTreeSet<Int> = user_primes.iter().cloned().collect();
    for (_, value) in table.iter() {
        if let Index::Finite(x) = value {
            if !x.is_one() {
                primes.extend(prime_divisors(x));
            }
        }
    }
    for (_, d) in dets.iter() {
        if !d.is_one() {
            primes.extend(prime_divisors(d));
        }
    }
    let mut verdicts = Vec::new();
    for p in primes {
        if let Some(verdict) = necessary_from_table(poset, &table, &p) {
            verdicts.push(verdict);
            continue;
        }
        let mut verdict = match sufficient_condition(poset, v, &p, flags) {
            Ok(verdict) => verdict,
            Err(CohomologyError::MissingAssumption(what)) => TorsionVerdict {
                p: p.clone(),
                decision: Decision::Inconclusive,
                notes: vec![format!("{what} was not declared")],
            },
            Err(other) => return Err(other),
        };
        verdict.notes.push(
            "index scan passed; the faces' mod-p first homology is assumed trivial, not checked"
                .to_string(),
        );
        verdicts.push(verdict);
    }
    Ok(verdicts)
}

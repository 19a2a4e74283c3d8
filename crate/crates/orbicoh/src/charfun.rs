//! Characteristic functions on face posets and their invariant tables.
//!
//! A characteristic function assigns a primitive integer vector to every
//! facet so that the vectors meeting at each face are linearly independent.
//! From it we derive, for every face, an induced characteristic function on
//! the face's own lattice (project along the saturated span of the carrier's
//! facet vectors, then primitivize), and the two invariant tables the torsion
//! analysis consumes: the per-face subgroup index `mu` and the per-vertex
//! absolute determinant.

use std::collections::BTreeSet;
use std::fmt;

use num_integer::Integer;
use num_traits::One;

use crate::exec;
use crate::lattice::{
    self, gcd_all, Index, Int, IntMatrix, LatticeError,
};
use crate::poset::{FaceId, FacePoset, FacetSet, PosetError, SubposetMap};

/// Primitive facet vectors in the rank-`n` lattice, indexed by facet label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacteristicFunction {
    n: usize,
    vectors: Vec<Vec<Int>>,
}

/// A way the defining conditions can fail. Violations are data, not errors:
/// `validate` collects them so a report can show every offending facet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// The entries of the facet's vector have a common factor (or are all
    /// zero).
    NotPrimitive { facet: usize },
    /// The vectors meeting at a face do not have full rank there.
    DependentAtFace {
        face: FaceId,
        label: String,
        rank: usize,
        expected: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotPrimitive { facet } => {
                write!(f, "facet {}: vector is not primitive", facet + 1)
            }
            Violation::DependentAtFace {
                label,
                rank,
                expected,
                ..
            } => write!(
                f,
                "face {label}: facet vectors span rank {rank}, expected {expected}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CharFnError {
    #[error("expected {expected} vectors, one per facet, got {got}")]
    VectorCount { expected: usize, got: usize },
    #[error("vector for facet {} has {got} entries, expected {expected}", .facet + 1)]
    VectorShape {
        facet: usize,
        got: usize,
        expected: usize,
    },
    #[error("vectors live in rank {got}, the poset needs rank {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid characteristic function: {0}")]
    Invalid(Violation),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

impl CharacteristicFunction {
    /// Wrap facet vectors of uniform length `n`. Only the shape is checked
    /// here; the defining conditions need a poset, see [`validate`].
    pub fn new(n: usize, vectors: Vec<Vec<Int>>) -> Result<Self, CharFnError> {
        for (i, v) in vectors.iter().enumerate() {
            if v.len() != n {
                return Err(CharFnError::VectorShape {
                    facet: i,
                    got: v.len(),
                    expected: n,
                });
            }
        }
        Ok(CharacteristicFunction { n, vectors })
    }

    pub fn from_i64(n: usize, vectors: &[Vec<i64>]) -> Result<Self, CharFnError> {
        Self::new(
            n,
            vectors
                .iter()
                .map(|v| v.iter().map(|&x| Int::from(x)).collect())
                .collect(),
        )
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn facet_count(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<Int>] {
        &self.vectors
    }

    pub fn vector(&self, facet: usize) -> &[Int] {
        &self.vectors[facet]
    }

    /// The matrix whose columns are the facet vectors.
    pub fn matrix(&self) -> IntMatrix {
        IntMatrix::from_columns(self.n, &self.vectors)
    }
}

fn shape_check(poset: &FacePoset, v: &CharacteristicFunction) -> Result<(), CharFnError> {
    if v.facet_count() != poset.facet_count() {
        return Err(CharFnError::VectorCount {
            expected: poset.facet_count(),
            got: v.facet_count(),
        });
    }
    if v.rank() != poset.dim() {
        return Err(CharFnError::DimensionMismatch {
            expected: poset.dim(),
            got: v.rank(),
        });
    }
    Ok(())
}

/// Check the two defining conditions against a poset: every vector
/// primitive, and full rank at every face. Returns all violations found
/// (empty means valid); `Err` only for shape mismatches.
pub fn validate(
    poset: &FacePoset,
    v: &CharacteristicFunction,
) -> Result<Vec<Violation>, CharFnError> {
    shape_check(poset, v)?;
    let mut out = Vec::new();
    for i in 0..v.facet_count() {
        if !gcd_all(v.vector(i).iter()).is_one() {
            out.push(Violation::NotPrimitive { facet: i });
        }
    }
    let mut seen: BTreeSet<FacetSet> = BTreeSet::new();
    for f in poset.face_ids() {
        let facets = poset.face(f).facets();
        if facets.len() < 2 || !seen.insert(facets.clone()) {
            continue;
        }
        let columns: Vec<Vec<Int>> = facets.iter().map(|&i| v.vector(i).to_vec()).collect();
        let rank = IntMatrix::from_columns(v.rank(), &columns).rank();
        if rank < facets.len() {
            out.push(Violation::DependentAtFace {
                face: f,
                label: poset.face_label(f),
                rank,
                expected: facets.len(),
            });
        }
    }
    Ok(out)
}

/// Shape plus validity as a hard precondition: first violation becomes an
/// error.
pub fn ensure_valid(poset: &FacePoset, v: &CharacteristicFunction) -> Result<(), CharFnError> {
    let violations = validate(poset, v)?;
    match violations.into_iter().next() {
        Some(first) => Err(CharFnError::Invalid(first)),
        None => Ok(()),
    }
}

/// Index of the sublattice spanned by all facet vectors, infinite when the
/// span is rank-deficient.
pub fn nhat_index(v: &CharacteristicFunction) -> Index {
    lattice::lattice_index(&v.matrix())
}

/// A face's poset with its induced characteristic function, plus the map
/// back to the parent.
#[derive(Debug, Clone)]
pub struct InducedPair {
    pub poset: FacePoset,
    pub charfun: CharacteristicFunction,
    pub map: SubposetMap,
}

/// Restrict a characteristic pair to the face `f` of positive dimension:
/// quotient the lattice by the saturated span of the carrier's facet
/// vectors and primitivize the images of the vectors of the facets of `f`.
pub fn induced(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    f: FaceId,
) -> Result<InducedPair, CharFnError> {
    ensure_valid(poset, v)?;
    induced_unchecked(poset, v, f)
}

fn induced_unchecked(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    f: FaceId,
) -> Result<InducedPair, CharFnError> {
    let (sub, map) = poset.face_subposet(f)?;
    let carrier = poset.face(f);
    let basis_columns: Vec<Vec<Int>> = carrier
        .facets()
        .iter()
        .map(|&i| v.vector(i).to_vec())
        .collect();
    let basis = IntMatrix::from_columns(v.rank(), &basis_columns);
    let projection = lattice::quotient_projection(&basis)?;
    let vectors: Vec<Vec<Int>> = map
        .parent_facets
        .iter()
        .map(|&j| {
            let image = projection.apply(v.vector(j));
            // independence at any vertex of the sub-facet keeps this nonzero
            let (primitive, _) = lattice::primitivize(&image)?;
            Ok::<_, CharFnError>(primitive)
        })
        .collect::<Result<_, _>>()?;
    let charfun = CharacteristicFunction::new(sub.dim(), vectors)?;
    debug_assert!(validate(&sub, &charfun).map(|v| v.is_empty()).unwrap_or(false));
    Ok(InducedPair {
        poset: sub,
        charfun,
        map,
    })
}

fn mu_of_face(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    f: FaceId,
) -> Result<Index, CharFnError> {
    if poset.face(f).dim() == 0 {
        return Ok(Index::Finite(Int::from(1)));
    }
    let pair = induced_unchecked(poset, v, f)?;
    Ok(nhat_index(&pair.charfun))
}

/// Per-face subgroup indices, aligned with the poset's face order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MuTable {
    values: Vec<Index>,
}

impl MuTable {
    pub fn get(&self, f: FaceId) -> &Index {
        &self.values[f.0]
    }

    pub fn values(&self) -> &[Index] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (FaceId, &Index)> {
        self.values.iter().enumerate().map(|(i, x)| (FaceId(i), x))
    }
}

/// The index table over every face: 1 on vertices, otherwise the index of
/// the induced span inside the face's lattice. Runs per-face work through
/// the execution helper (parallel under the default feature set).
pub fn mu_table(poset: &FacePoset, v: &CharacteristicFunction) -> Result<MuTable, CharFnError> {
    ensure_valid(poset, v)?;
    let values = exec::try_map_indexed(poset.faces().len(), |i| {
        mu_of_face(poset, v, FaceId(i))
    })?;
    Ok(MuTable { values })
}

/// Sequential twin of [`mu_table`], compiled under every feature set.
pub fn mu_table_seq(
    poset: &FacePoset,
    v: &CharacteristicFunction,
) -> Result<MuTable, CharFnError> {
    ensure_valid(poset, v)?;
    let values = (0..poset.faces().len())
        .map(|i| mu_of_face(poset, v, FaceId(i)))
        .collect::<Result<_, _>>()?;
    Ok(MuTable { values })
}

/// Absolute determinants of the vector triples (generally n-tuples) at each
/// vertex, indexed by vertex id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexDetTable {
    dets: Vec<Int>,
}

impl VertexDetTable {
    pub fn get(&self, vertex: usize) -> &Int {
        &self.dets[vertex]
    }

    pub fn values(&self) -> &[Int] {
        &self.dets
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Int)> {
        self.dets.iter().enumerate()
    }
}

/// `|det|` of the facet vectors meeting at each vertex; positive once the
/// pair validates.
pub fn vertex_dets(
    poset: &FacePoset,
    v: &CharacteristicFunction,
) -> Result<VertexDetTable, CharFnError> {
    ensure_valid(poset, v)?;
    let dets = (0..poset.vertex_count())
        .map(|w| {
            let columns: Vec<Vec<Int>> = poset.vertex_facets()[w]
                .iter()
                .map(|&i| v.vector(i).to_vec())
                .collect();
            let det = IntMatrix::from_columns(v.rank(), &columns).determinant();
            num_traits::Signed::abs(&det)
        })
        .collect();
    Ok(VertexDetTable { dets })
}

/// First vertex (by id) whose determinant is coprime to `p`, if any.
pub fn exists_coprime_vertex(
    poset: &FacePoset,
    v: &CharacteristicFunction,
    p: &Int,
) -> Result<Option<usize>, CharFnError> {
    let dets = vertex_dets(poset, v)?;
    let found = dets.iter().find(|(_, d)| d.gcd(p).is_one()).map(|(w, _)| w);
    Ok(found)
}

/// Rejection-sample a valid characteristic function with entries bounded by
/// `bound` in absolute value. Draws primitive vectors facet by facet and
/// retries the whole batch until the rank condition holds at every face.
pub fn sample_characteristic_function<R: rand::Rng>(
    poset: &FacePoset,
    bound: i64,
    rng: &mut R,
) -> CharacteristicFunction {
    assert!(bound >= 1);
    for _ in 0..100_000 {
        let vectors: Vec<Vec<Int>> = (0..poset.facet_count())
            .map(|_| loop {
                let raw: Vec<Int> = (0..poset.dim())
                    .map(|_| Int::from(rng.gen_range(-bound..=bound)))
                    .collect();
                if let Ok((primitive, _)) = lattice::primitivize(&raw) {
                    return primitive;
                }
            })
            .collect();
        let candidate = CharacteristicFunction::new(poset.dim(), vectors)
            .expect("sampled vectors have uniform length");
        if matches!(validate(poset, &candidate), Ok(v) if v.is_empty()) {
            return candidate;
        }
    }
    panic!("rejection sampling failed to find a valid characteristic function");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poset::{cut_prism_vertex_data, ReferenceKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simplex(n: usize) -> FacePoset {
        FacePoset::reference(ReferenceKind::Simplex, n).unwrap()
    }

    fn prism(n: usize) -> FacePoset {
        FacePoset::reference(ReferenceKind::Prism, n).unwrap()
    }

    fn weighted_triangle(a: i64) -> (FacePoset, CharacteristicFunction) {
        let v = CharacteristicFunction::from_i64(
            2,
            &[vec![2 * a, 1], vec![0, 1], vec![-a, -1]],
        )
        .unwrap();
        (simplex(2), v)
    }

    /// Ten-vertex corner example: rays for facets (1..5, +, -), 0-based.
    fn corner_pair(d: i64) -> (FacePoset, CharacteristicFunction) {
        let poset = FacePoset::from_vertex_facets(3, 7, &cut_prism_vertex_data()).unwrap();
        let v = CharacteristicFunction::from_i64(
            3,
            &[
                vec![1, 0, 0],
                vec![-1, d, -d],
                vec![-1, -d, 0],
                vec![0, 1, 0],
                vec![d, 1 - d, -d],
                vec![0, 0, 1],
                vec![1, -1, -1],
            ],
        )
        .unwrap();
        (poset, v)
    }

    fn prism3_product_pair() -> (FacePoset, CharacteristicFunction) {
        let v = CharacteristicFunction::from_i64(
            3,
            &[
                vec![1, 0, 0],
                vec![0, 1, 0],
                vec![-1, -1, 0],
                vec![0, 0, 1],
                vec![0, 0, -1],
            ],
        )
        .unwrap();
        (prism(3), v)
    }

    #[test]
    fn weighted_triangle_validates() {
        let (p, v) = weighted_triangle(4);
        assert!(validate(&p, &v).unwrap().is_empty());
    }

    #[test]
    fn non_primitive_vector_is_a_violation() {
        let p = simplex(2);
        let v =
            CharacteristicFunction::from_i64(2, &[vec![2, 2], vec![0, 1], vec![-1, -1]]).unwrap();
        let violations = validate(&p, &v).unwrap();
        assert!(violations.contains(&Violation::NotPrimitive { facet: 0 }));
    }

    #[test]
    fn dependent_vectors_at_a_vertex_are_a_violation() {
        // square: sides 0, 1 and caps 2, 3; facets 0 and 2 share a vertex
        let p = prism(2);
        let v = CharacteristicFunction::from_i64(
            2,
            &[vec![1, 0], vec![0, 1], vec![1, 0], vec![0, -1]],
        )
        .unwrap();
        let violations = validate(&p, &v).unwrap();
        assert!(violations.iter().any(|viol| matches!(
            viol,
            Violation::DependentAtFace { expected: 2, rank: 1, .. }
        )));
        assert!(ensure_valid(&p, &v).is_err());
    }

    #[test]
    fn nhat_index_of_weighted_triangle_is_a() {
        let (_, v) = weighted_triangle(4);
        assert_eq!(nhat_index(&v), Index::Finite(Int::from(4)));
    }

    #[test]
    fn nhat_index_infinite_for_deficient_span() {
        let v = CharacteristicFunction::from_i64(2, &[vec![1, 0], vec![-1, 0]]).unwrap();
        assert_eq!(nhat_index(&v), Index::Infinite);
    }

    #[test]
    fn induced_on_top_face_is_the_identity() {
        let (p, v) = prism3_product_pair();
        let pair = induced(&p, &v, p.top()).unwrap();
        assert_eq!(pair.poset, p);
        assert_eq!(pair.charfun, v);
    }

    #[test]
    fn induced_on_corner_facet_is_a_unimodular_square_pair() {
        let (p, v) = corner_pair(2);
        let f = p.facet_face(2);
        let pair = induced(&p, &v, f).unwrap();
        assert_eq!(pair.poset.dim(), 2);
        assert_eq!(pair.poset.facet_count(), 4);
        assert_eq!(pair.poset.vertex_count(), 4);
        assert!(nhat_index(&pair.charfun).is_one());
        // the images of the vectors of facets 0 and 1 span the whole plane
        let from_0 = pair.map.parent_facets.iter().position(|&j| j == 0).unwrap();
        let from_1 = pair.map.parent_facets.iter().position(|&j| j == 1).unwrap();
        let det = IntMatrix::from_columns(
            2,
            &[
                pair.charfun.vector(from_0).to_vec(),
                pair.charfun.vector(from_1).to_vec(),
            ],
        )
        .determinant();
        assert!(det == Int::from(1) || det == Int::from(-1));
    }

    #[test]
    fn mu_table_of_weighted_triangle() {
        let (p, v) = weighted_triangle(5);
        let table = mu_table(&p, &v).unwrap();
        assert_eq!(table.get(p.top()), &Index::Finite(Int::from(5)));
        for (f, value) in table.iter() {
            if f != p.top() {
                assert!(value.is_one(), "face {}", p.face_label(f));
            }
        }
    }

    #[test]
    fn mu_table_of_corner_example_is_all_ones() {
        for d in [1, 2, 5] {
            let (p, v) = corner_pair(d);
            let table = mu_table(&p, &v).unwrap();
            assert!(table.iter().all(|(_, value)| value.is_one()), "d = {d}");
        }
    }

    #[test]
    fn mu_table_matches_sequential_twin() {
        let (p, v) = corner_pair(3);
        assert_eq!(mu_table(&p, &v).unwrap(), mu_table_seq(&p, &v).unwrap());
    }

    #[test]
    fn mu_is_one_in_codimension_le_1() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = prism(3);
        let v = sample_characteristic_function(&p, 3, &mut rng);
        let table = mu_table(&p, &v).unwrap();
        for (f, value) in table.iter() {
            if p.face(f).dim() <= 1 {
                assert!(value.is_one());
            }
        }
    }

    #[test]
    fn vertex_dets_of_corner_example_match_closed_forms() {
        let d = 3i64;
        let (p, v) = corner_pair(d);
        let dets = vertex_dets(&p, &v).unwrap();
        // vertex order follows cut_prism_vertex_data
        let expected = [
            1,
            1,
            d,
            1,
            d + 1,
            d * (2 * d - 1),
            d,
            d,
            2 * d,
            d * (d + 3),
        ];
        let got: Vec<Int> = dets.values().to_vec();
        let expected: Vec<Int> = expected.iter().map(|&x| Int::from(x)).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn diamond_vertex_dets_equal_the_top_mu() {
        let p = FacePoset::reference(ReferenceKind::Diamond, 2).unwrap();
        let v = CharacteristicFunction::from_i64(2, &[vec![1, 0], vec![1, 4]]).unwrap();
        let dets = vertex_dets(&p, &v).unwrap();
        assert_eq!(dets.values(), &[Int::from(4), Int::from(4)]);
        let table = mu_table(&p, &v).unwrap();
        assert_eq!(table.get(p.top()), &Index::Finite(Int::from(4)));
    }

    #[test]
    fn coprime_vertex_search() {
        let (p, v) = corner_pair(2);
        assert_eq!(
            exists_coprime_vertex(&p, &v, &Int::from(2)).unwrap(),
            Some(0)
        );
        let diamond = FacePoset::reference(ReferenceKind::Diamond, 2).unwrap();
        let w = CharacteristicFunction::from_i64(2, &[vec![1, 0], vec![1, 4]]).unwrap();
        assert_eq!(exists_coprime_vertex(&diamond, &w, &Int::from(2)).unwrap(), None);
        assert_eq!(
            exists_coprime_vertex(&diamond, &w, &Int::from(3)).unwrap(),
            Some(0)
        );
    }

    #[test]
    fn sampled_characteristic_functions_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for poset in [simplex(3), prism(3), simplex(4)] {
            let v = sample_characteristic_function(&poset, 3, &mut rng);
            assert!(validate(&poset, &v).unwrap().is_empty());
            for i in 0..v.facet_count() {
                assert!(gcd_all(v.vector(i).iter()).is_one());
            }
        }
    }

    #[test]
    fn induced_composes_with_itself() {
        let (p, v) = prism3_product_pair();
        let parent_table = mu_table(&p, &v).unwrap();
        let quad = p.facet_face(0);
        let pair = induced(&p, &v, quad).unwrap();
        let sub_table = mu_table(&pair.poset, &pair.charfun).unwrap();
        for g in pair.poset.face_ids() {
            let sub_face = pair.poset.face(g);
            // identify the parent face by carrying facets and vertices back
            let parent_facets: FacetSet = p
                .face(quad)
                .facets()
                .iter()
                .copied()
                .chain(
                    sub_face
                        .facets()
                        .iter()
                        .map(|&i| pair.map.parent_facets[i]),
                )
                .collect();
            let parent_vertices: BTreeSet<usize> = sub_face
                .vertex_ids()
                .iter()
                .map(|&w| pair.map.parent_vertices[w])
                .collect();
            let parent = p
                .face_ids()
                .find(|&h| {
                    p.face(h).facets() == &parent_facets
                        && p.face(h).vertex_ids() == &parent_vertices
                })
                .expect("sub-face corresponds to a parent face");
            assert_eq!(sub_table.get(g), parent_table.get(parent));
        }
    }

    #[test]
    fn mu_table_is_invariant_under_global_unimodular_change() {
        let (p, v) = weighted_triangle(6);
        let u = IntMatrix::from_rows(&[vec![Int::from(1), Int::from(1)], vec![Int::from(0), Int::from(1)]]);
        assert!(u.is_unimodular());
        let transformed: Vec<Vec<Int>> = v.vectors().iter().map(|x| u.apply(x)).collect();
        let w = CharacteristicFunction::new(2, transformed).unwrap();
        assert_eq!(
            mu_table(&p, &v).unwrap().values(),
            mu_table(&p, &w).unwrap().values()
        );
    }

    #[test]
    fn shape_errors_are_reported() {
        assert!(matches!(
            CharacteristicFunction::from_i64(2, &[vec![1]]),
            Err(CharFnError::VectorShape { facet: 0, .. })
        ));
        let p = simplex(2);
        let v = CharacteristicFunction::from_i64(2, &[vec![1, 0], vec![0, 1]]).unwrap();
        assert!(matches!(
            validate(&p, &v),
            Err(CharFnError::VectorCount { expected: 3, got: 2 })
        ));
    }
}

//! Complete simplicial fans.
//!
//! A fan is given by primitive ray vectors and full-dimensional simplicial
//! cones. This module certifies completeness (wall condition plus exact
//! point sampling), extracts the dual orbit-space pair (facets correspond to
//! rays, vertices to maximal cones), computes the boundary-map cokernels as
//! an independent route to the top torsion groups, and builds the named
//! example fans used throughout the test suite.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, Zero};
use rand::Rng as _;
use rand::SeedableRng as _;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::charfun::{ensure_valid, CharFnError, CharacteristicFunction};
use crate::cohomology::AssumptionFlags;
use crate::exec;
use crate::lattice::{
    cokernel, gcd_all, int, smith_normal_form, wedge_pair, FinAbGroup, Int, IntMatrix,
    LatticeError,
};
use crate::poset::{FacePoset, FacetSet, PosetError, ReferenceKind};

/// Coordinate bound for sampled direction vectors.
const SAMPLE_BOUND: i64 = 1_000;

/// Default number of sampled directions in a completeness check.
pub const DEFAULT_TRIALS: usize = 10_000;

/// Safety cap on boundary resampling per trial. Boundary hits require the
/// sample to land exactly on one of finitely many hyperplanes, so in
/// practice one or two draws suffice.
const MAX_RESAMPLES: usize = 10_000;

#[derive(Debug, Error)]
pub enum FanError {
    #[error("fan dimension must be at least 1")]
    ZeroDimension,
    #[error("a fan needs at least one maximal cone")]
    NoCones,
    #[error("ray {ray} has {got} coordinates, expected {expected}")]
    RayShape {
        ray: usize,
        got: usize,
        expected: usize,
    },
    #[error("ray {ray} is zero or not primitive")]
    RayNotPrimitive { ray: usize },
    #[error("rays {first} and {second} coincide")]
    DuplicateRay { first: usize, second: usize },
    #[error("cone {cone} has {got} rays, expected {expected}")]
    ConeSize {
        cone: usize,
        got: usize,
        expected: usize,
    },
    #[error("cone {cone} references ray {ray}, but there are only {count} rays")]
    ConeRayOutOfRange {
        cone: usize,
        ray: usize,
        count: usize,
    },
    #[error("cone {cone} has linearly dependent rays")]
    ConeDegenerate { cone: usize },
    #[error("cones {first} and {second} coincide")]
    DuplicateCone { first: usize, second: usize },
    #[error("ray {ray} lies in no maximal cone")]
    UnusedRay { ray: usize },
    #[error("fan is not complete: {0}")]
    Incomplete(String),
    #[error("parameter must be at least 1, got {0}")]
    NonPositiveParameter(i64),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Poset(#[from] PosetError),
    #[error(transparent)]
    CharFn(#[from] CharFnError),
}

/// A simplicial fan of full-dimensional cones in ZZ^n.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fan {
    n: usize,
    rays: Vec<Vec<Int>>,
    max_cones: Vec<FacetSet>,
}

impl Fan {
    /// Validates and builds a fan. Rays must be primitive and pairwise
    /// distinct, every maximal cone must consist of `n` linearly independent
    /// rays, cones must be pairwise distinct, and every ray must appear in
    /// some cone.
    pub fn new(n: usize, rays: Vec<Vec<Int>>, max_cones: Vec<FacetSet>) -> Result<Self, FanError> {
        if n == 0 {
            return Err(FanError::ZeroDimension);
        }
        if max_cones.is_empty() {
            return Err(FanError::NoCones);
        }
        for (i, ray) in rays.iter().enumerate() {
            if ray.len() != n {
                return Err(FanError::RayShape {
                    ray: i,
                    got: ray.len(),
                    expected: n,
                });
            }
            if !gcd_all(ray.iter()).is_one() {
                return Err(FanError::RayNotPrimitive { ray: i });
            }
        }
        for i in 0..rays.len() {
            for j in i + 1..rays.len() {
                if rays[i] == rays[j] {
                    return Err(FanError::DuplicateRay { first: i, second: j });
                }
            }
        }
        for (c, cone) in max_cones.iter().enumerate() {
            if cone.len() != n {
                return Err(FanError::ConeSize {
                    cone: c,
                    got: cone.len(),
                    expected: n,
                });
            }
            if let Some(&ray) = cone.iter().find(|&&r| r >= rays.len()) {
                return Err(FanError::ConeRayOutOfRange {
                    cone: c,
                    ray,
                    count: rays.len(),
                });
            }
            let columns: Vec<Vec<Int>> = cone.iter().map(|&r| rays[r].clone()).collect();
            if IntMatrix::from_columns(n, &columns).determinant().is_zero() {
                return Err(FanError::ConeDegenerate { cone: c });
            }
        }
        for c in 0..max_cones.len() {
            for d in c + 1..max_cones.len() {
                if max_cones[c] == max_cones[d] {
                    return Err(FanError::DuplicateCone { first: c, second: d });
                }
            }
        }
        for ray in 0..rays.len() {
            if !max_cones.iter().any(|cone| cone.contains(&ray)) {
                return Err(FanError::UnusedRay { ray });
            }
        }
        Ok(Fan { n, rays, max_cones })
    }

    pub fn from_i64(n: usize, rays: &[Vec<i64>], max_cones: &[Vec<usize>]) -> Result<Self, FanError> {
        let rays = rays
            .iter()
            .map(|r| r.iter().copied().map(int).collect())
            .collect();
        let cones = max_cones
            .iter()
            .map(|c| c.iter().copied().collect())
            .collect();
        Fan::new(n, rays, cones)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn ray_count(&self) -> usize {
        self.rays.len()
    }

    pub fn cone_count(&self) -> usize {
        self.max_cones.len()
    }

    pub fn rays(&self) -> &[Vec<Int>] {
        &self.rays
    }

    pub fn ray(&self, i: usize) -> &[Int] {
        &self.rays[i]
    }

    pub fn max_cones(&self) -> &[FacetSet] {
        &self.max_cones
    }

    /// Ray vectors of one cone as matrix columns, in ray-index order.
    fn cone_matrix(&self, cone: &FacetSet) -> IntMatrix {
        let columns: Vec<Vec<Int>> = cone.iter().map(|&r| self.rays[r].clone()).collect();
        IntMatrix::from_columns(self.n, &columns)
    }

    /// Number of maximal cones containing each wall, where a wall is an
    /// (n-1)-subset of some maximal cone's ray set.
    pub fn wall_counts(&self) -> BTreeMap<FacetSet, usize> {
        let mut counts: BTreeMap<FacetSet, usize> = BTreeMap::new();
        for cone in &self.max_cones {
            for &r in cone {
                let mut wall = cone.clone();
                wall.remove(&r);
                *counts.entry(wall).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Walls whose cone count is not exactly 2.
    pub fn wall_failures(&self) -> Vec<(FacetSet, usize)> {
        self.wall_counts()
            .into_iter()
            .filter(|&(_, count)| count != 2)
            .collect()
    }
}

/// A sampled direction that was covered by a number of open maximal cones
/// other than one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleFailure {
    pub point: Vec<Int>,
    pub containing: usize,
}

/// Outcome of a completeness check: wall counts plus exact point sampling.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletenessReport {
    trials: usize,
    wall_failures: Vec<(FacetSet, usize)>,
    sample_failures: Vec<SampleFailure>,
}

impl CompletenessReport {
    pub fn passed(&self) -> bool {
        self.wall_failures.is_empty() && self.sample_failures.is_empty()
    }

    pub fn trials(&self) -> usize {
        self.trials
    }

    pub fn wall_failures(&self) -> &[(FacetSet, usize)] {
        &self.wall_failures
    }

    pub fn sample_failures(&self) -> &[SampleFailure] {
        &self.sample_failures
    }
}

impl fmt::Display for CompletenessReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return write!(
                f,
                "complete: every wall borders 2 cones, {} sampled directions each covered once",
                self.trials
            );
        }
        write!(f, "not complete:")?;
        for (wall, count) in &self.wall_failures {
            let labels: Vec<String> = wall.iter().map(|r| (r + 1).to_string()).collect();
            write!(f, " wall {{{}}} borders {} cones;", labels.join(","), count)?;
        }
        if !self.sample_failures.is_empty() {
            let worst = &self.sample_failures[0];
            let coords: Vec<String> = worst.point.iter().map(|x| x.to_string()).collect();
            write!(
                f,
                " {} of {} sampled directions miscovered, e.g. ({}) lies in {} open cones",
                self.sample_failures.len(),
                self.trials,
                coords.join(","),
                worst.containing
            )?;
        }
        Ok(())
    }
}

/// Precomputed exact solver for membership in one cone: the adjugate of the
/// ray matrix gives barycentric numerators, whose signs against the
/// determinant's sign decide containment.
struct ConeSolver {
    adj: IntMatrix,
    det_negative: bool,
}

fn cone_solvers(fan: &Fan) -> Vec<ConeSolver> {
    fan.max_cones
        .iter()
        .map(|cone| {
            let m = fan.cone_matrix(cone);
            let det = m.determinant();
            debug_assert!(!det.is_zero());
            ConeSolver {
                adj: adjugate(&m),
                det_negative: det.is_negative(),
            }
        })
        .collect()
}

/// Adjugate of a square matrix: `adj(M) * M = det(M) * I`.
fn adjugate(m: &IntMatrix) -> IntMatrix {
    let n = m.rows();
    debug_assert_eq!(n, m.cols());
    if n == 1 {
        return IntMatrix::identity(1);
    }
    let mut adj = IntMatrix::zero(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut minor = Vec::with_capacity(n - 1);
            for r in 0..n {
                if r == i {
                    continue;
                }
                let mut row = Vec::with_capacity(n - 1);
                for c in 0..n {
                    if c == j {
                        continue;
                    }
                    row.push(m[(r, c)].clone());
                }
                minor.push(row);
            }
            let cofactor = IntMatrix::from_rows(&minor).determinant();
            adj[(j, i)] = if (i + j) % 2 == 0 { cofactor } else { -cofactor };
        }
    }
    adj
}

enum PointClass {
    /// The point lies on the boundary of some cone; the sample is discarded.
    Boundary,
    /// Number of open maximal cones containing the point.
    Covered(usize),
}

fn classify_point(solvers: &[ConeSolver], x: &[Int]) -> PointClass {
    let mut covered = 0usize;
    for solver in solvers {
        let numerators = solver.adj.apply(x);
        let mut outside = false;
        let mut on_boundary = false;
        for lam in &numerators {
            if lam.is_zero() {
                on_boundary = true;
            } else if lam.is_negative() != solver.det_negative {
                outside = true;
                break;
            }
        }
        if outside {
            continue;
        }
        if on_boundary {
            return PointClass::Boundary;
        }
        covered += 1;
    }
    PointClass::Covered(covered)
}

/// One sampling trial with its own deterministic RNG stream, so results do
/// not depend on scheduling order.
fn sample_trial(solvers: &[ConeSolver], n: usize, seed: u64, stream: usize) -> Option<SampleFailure> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    for _ in 0..MAX_RESAMPLES {
        let x: Vec<Int> = (0..n)
            .map(|_| int(rng.gen_range(-SAMPLE_BOUND..=SAMPLE_BOUND)))
            .collect();
        match classify_point(solvers, &x) {
            PointClass::Boundary => continue,
            PointClass::Covered(1) => return None,
            PointClass::Covered(c) => {
                return Some(SampleFailure {
                    point: x,
                    containing: c,
                })
            }
        }
    }
    unreachable!("resample budget exhausted; cone boundaries are measure zero in the sample box");
}

/// Checks completeness: every wall must border exactly two maximal cones,
/// and each of `trials` sampled integer directions must lie in exactly one
/// open maximal cone (samples landing on a cone boundary are redrawn,
/// detected exactly by a zero barycentric numerator).
pub fn completeness_check(fan: &Fan, trials: usize, seed: u64) -> CompletenessReport {
    let wall_failures = fan.wall_failures();
    let solvers = cone_solvers(fan);
    let n = fan.dim();
    let sample_failures = exec::map_indexed(trials, |i| sample_trial(&solvers, n, seed, i))
        .into_iter()
        .flatten()
        .collect();
    CompletenessReport {
        trials,
        wall_failures,
        sample_failures,
    }
}

/// Sequential twin of [`completeness_check`]; same report for the same seed.
pub fn completeness_check_seq(fan: &Fan, trials: usize, seed: u64) -> CompletenessReport {
    let wall_failures = fan.wall_failures();
    let solvers = cone_solvers(fan);
    let n = fan.dim();
    let sample_failures = (0..trials)
        .filter_map(|i| sample_trial(&solvers, n, seed, i))
        .collect();
    CompletenessReport {
        trials,
        wall_failures,
        sample_failures,
    }
}

fn ensure_wall_condition(fan: &Fan) -> Result<(), FanError> {
    let failures = fan.wall_failures();
    if let Some((wall, count)) = failures.first() {
        let labels: Vec<String> = wall.iter().map(|r| (r + 1).to_string()).collect();
        return Err(FanError::Incomplete(format!(
            "wall {{{}}} borders {} maximal cones instead of 2",
            labels.join(","),
            count
        )));
    }
    Ok(())
}

/// The orbit-space data of a fan: dual face poset, characteristic function,
/// and the assumption flags that hold automatically for this source.
#[derive(Debug, Clone)]
pub struct DualPair {
    pub poset: FacePoset,
    pub charfun: CharacteristicFunction,
    pub flags: AssumptionFlags,
}

/// Builds the dual pair of a fan: facets correspond to rays, vertices to
/// maximal cones, and the characteristic vectors are the rays themselves.
/// Orbit spaces of this kind have acyclic faces, so that flag is set.
///
/// Requires the wall condition; use [`completeness_check`] for the stronger
/// sampled certificate.
pub fn fan_to_pair(fan: &Fan) -> Result<DualPair, FanError> {
    ensure_wall_condition(fan)?;
    let poset = FacePoset::from_vertex_facets(fan.dim(), fan.ray_count(), fan.max_cones())?;
    let charfun = CharacteristicFunction::new(fan.dim(), fan.rays.clone())?;
    ensure_valid(&poset, &charfun)?;
    let mut flags = AssumptionFlags::none();
    flags.face_acyclic = true;
    Ok(DualPair {
        poset,
        charfun,
        flags,
    })
}

/// Saturated basis of the rank n-1 sublattice orthogonal to `ray`, followed
/// by its generalized cross product. The result is the primitive generator
/// of the ray's line, up to sign; deriving it this way keeps this route
/// independent of the characteristic-function computations.
fn ray_line_normal(ray: &[Int]) -> Vec<Int> {
    let n = ray.len();
    if n == 1 {
        return ray.to_vec();
    }
    let snf = smith_normal_form(&IntMatrix::from_rows(&[ray.to_vec()]));
    debug_assert_eq!(snf.rank(), 1);
    let kernel: Vec<Vec<Int>> = (1..n).map(|j| snf.v.column(j)).collect();
    cross_product(&kernel, n)
}

/// Generalized cross product of n-1 vectors in ZZ^n: coordinate i is the
/// signed maximal minor omitting coordinate i.
fn cross_product(vectors: &[Vec<Int>], n: usize) -> Vec<Int> {
    debug_assert_eq!(vectors.len(), n - 1);
    (0..n)
        .map(|i| {
            let rows: Vec<Vec<Int>> = vectors
                .iter()
                .map(|v| {
                    v.iter()
                        .enumerate()
                        .filter(|&(k, _)| k != i)
                        .map(|(_, x)| x.clone())
                        .collect()
                })
                .collect();
            let minor = IntMatrix::from_rows(&rows).determinant();
            if i % 2 == 0 {
                minor
            } else {
                -minor
            }
        })
        .collect()
}

/// Cokernels of the two boundary maps feeding the top cohomology groups:
/// the first presents the quotient by the span of the ray lines, the second
/// the quotient of the wedge square by the span of ray-wedge-basis columns.
/// Each ray's generator is re-derived from its orthogonal sublattice rather
/// than taken from the input, making this an independent cross-check of the
/// characteristic-function route.
///
/// Requires the wall condition.
pub fn delta_cokernels(fan: &Fan) -> Result<(FinAbGroup, FinAbGroup), FanError> {
    ensure_wall_condition(fan)?;
    let n = fan.dim();
    let normals: Vec<Vec<Int>> = fan.rays.iter().map(|r| ray_line_normal(r)).collect();
    for (ray, normal) in fan.rays.iter().zip(&normals) {
        let negated: Vec<Int> = normal.iter().map(|x| -x).collect();
        debug_assert!(
            ray == normal || ray == &negated,
            "orthogonal-sublattice route must recover the ray up to sign"
        );
    }
    let first = cokernel(&IntMatrix::from_columns(n, &normals));
    if n < 2 {
        return Ok((first, FinAbGroup::trivial()));
    }
    let wedge_dim = n * (n - 1) / 2;
    let mut columns = Vec::with_capacity(normals.len() * n);
    for normal in &normals {
        for j in 0..n {
            let mut basis = vec![Int::zero(); n];
            basis[j] = Int::one();
            columns.push(wedge_pair(normal, &basis, n));
        }
    }
    let second = cokernel(&IntMatrix::from_columns(wedge_dim, &columns));
    Ok((first, second))
}

fn ensure_positive(value: i64) -> Result<(), FanError> {
    if value < 1 {
        return Err(FanError::NonPositiveParameter(value));
    }
    Ok(())
}

/// Triangle with characteristic vectors (2a,1), (0,1), (-a,-1). The top
/// lattice quotient is ZZ/a, so the boundary cohomology of the associated
/// space carries exactly that torsion in degree 3.
pub fn weighted_triangle(a: i64) -> Result<(FacePoset, CharacteristicFunction), FanError> {
    ensure_positive(a)?;
    let poset = FacePoset::reference(ReferenceKind::Simplex, 2)?;
    let charfun =
        CharacteristicFunction::from_i64(2, &[vec![2 * a, 1], vec![0, 1], vec![-a, -1]])?;
    ensure_valid(&poset, &charfun)?;
    Ok((poset, charfun))
}

/// 3-simplex with vectors (0,0,1), (2,0,1), (0,1,1), (-2,-1,-1): the vector
/// span has index 2, while the wedge-square quotient is trivial.
pub fn simplex3_example() -> (FacePoset, CharacteristicFunction) {
    let poset =
        FacePoset::reference(ReferenceKind::Simplex, 3).expect("reference simplex is valid");
    let charfun = CharacteristicFunction::from_i64(
        3,
        &[
            vec![0, 0, 1],
            vec![2, 0, 1],
            vec![0, 1, 1],
            vec![-2, -1, -1],
        ],
    )
    .expect("fixed vectors are primitive");
    ensure_valid(&poset, &charfun).expect("fixed vectors are nondegenerate");
    (poset, charfun)
}

/// The four rays of the 3-simplex example with all four triples as cones.
/// The wall condition holds, but the cones only cover a proper convex cone
/// of RR^3, so sampled completeness fails; it is still a valid input for
/// the boundary-map cokernels.
pub fn simplex3_fan() -> Fan {
    Fan::from_i64(
        3,
        &[
            vec![0, 0, 1],
            vec![2, 0, 1],
            vec![0, 1, 1],
            vec![-2, -1, -1],
        ],
        &[vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]],
    )
    .expect("fixed ray data is valid")
}

/// Fan over the double cone on a triangle: apex rays (0,0,1) and (1,0,-1),
/// equator rays (2a,1,0), (0,1,0), (-a,-1,0), with the six cones joining an
/// apex to an equator pair. Complete for every a >= 1. The associated space
/// fibers over the projective line with the weighted-triangle space as
/// fiber.
pub fn fibration_fan(a: i64) -> Result<Fan, FanError> {
    ensure_positive(a)?;
    Fan::from_i64(
        3,
        &[
            vec![0, 0, 1],
            vec![2 * a, 1, 0],
            vec![0, 1, 0],
            vec![-a, -1, 0],
            vec![1, 0, -1],
        ],
        &[
            vec![0, 1, 2],
            vec![0, 1, 3],
            vec![0, 2, 3],
            vec![4, 1, 2],
            vec![4, 1, 3],
            vec![4, 2, 3],
        ],
    )
}

/// Fan whose dual is the cut prism with ten vertices: seven rays
/// v1=(1,0,0), v2=(-1,d,-d), v3=(-1,-d,0), v4=(0,1,0), v5=(d,1-d,-d),
/// v+=(0,0,1), v-=(1,-1,-1), cones matching the cut-prism vertex data.
/// Complete for every d >= 1; all face indices are 1 yet degree-5
/// cohomology can carry p-torsion for p dividing d.
pub fn counterexample_fan(d: i64) -> Result<Fan, FanError> {
    ensure_positive(d)?;
    let cones: Vec<Vec<usize>> = crate::poset::cut_prism_vertex_data()
        .into_iter()
        .map(|set| set.into_iter().collect())
        .collect();
    Fan::from_i64(
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
        &cones,
    )
}

/// Fiber of the fibration fan: drop the last coordinate of the three
/// equator rays, giving a complete 2-dimensional fan whose dual pair is the
/// weighted triangle.
pub fn fibration_fiber(a: i64) -> Result<(FacePoset, CharacteristicFunction), FanError> {
    ensure_positive(a)?;
    let full = fibration_fan(a)?;
    let projected: Vec<Vec<Int>> = (1..=3).map(|r| full.ray(r)[..2].to_vec()).collect();
    let fan = Fan::new(
        2,
        projected,
        vec![
            [0usize, 1].into_iter().collect(),
            [1usize, 2].into_iter().collect(),
            [0usize, 2].into_iter().collect(),
        ],
    )?;
    let pair = fan_to_pair(&fan)?;
    Ok((pair.poset, pair.charfun))
}

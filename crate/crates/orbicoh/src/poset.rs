//! Face posets of nice manifolds with corners.
//!
//! A poset here is generated from vertex data: each vertex lists the `n`
//! facets it lies on, and the faces are the connected components of all
//! facet-set intersections implied by shared vertices. A face of codimension
//! `k` is a pair `(I, C)`: a `k`-element facet set `I` together with one
//! connected component `C` of the vertices lying on every facet of `I`,
//! where two vertices are joined inside `Q_I` exactly when some edge of `Q`
//! (a shared facet set of size `n - 1` containing `I`) joins them. This is
//! the combinatorial shadow of a nice manifold with corners in which every
//! face carries at least one vertex; components matter because distinct
//! faces may share the same facet set (the 2-gon's two vertices both lie on
//! both facets).
//!
//! Niceness is validated at construction: facet labels must denote single
//! connected faces, one-dimensional faces must have exactly two endpoints,
//! and the containment order must be graded by dimension.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A set of facet labels (0-based).
pub type FacetSet = BTreeSet<usize>;

/// Errors from poset construction and surgery.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PosetError {
    #[error("inconsistent input: {0}")]
    InconsistentInput(String),
    #[error("not a nice face structure: {0}")]
    NotNice(String),
    #[error("dimension {0} not supported for this construction")]
    InvalidDimension(usize),
    #[error("the selected face is not a vertex")]
    NotAVertex,
    #[error("the selected face is zero-dimensional")]
    ZeroDimensionalFace,
    #[error("collapse does not produce a nice structure: {0}")]
    CollapseNotNice(String),
}

/// Handle to a face inside one `FacePoset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FaceId(pub usize);

/// One face: a facet set together with one connected component of its
/// vertex set. `component` numbers the components of a shared facet set in
/// lexicographic vertex-set order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    facets: FacetSet,
    vertices: BTreeSet<usize>,
    component: usize,
    dim: usize,
}

impl Face {
    pub fn facets(&self) -> &FacetSet {
        &self.facets
    }

    pub fn vertex_ids(&self) -> &BTreeSet<usize> {
        &self.vertices
    }

    pub fn component(&self) -> usize {
        self.component
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Reference shapes recognised by [`FacePoset::classify`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PosetClass {
    /// The n-simplex pattern: n+1 facets, n+1 vertices.
    Simplex,
    /// The suspension pattern: n facets, 2 vertices sharing all of them.
    Diamond,
    /// The simplex-times-interval pattern: n+2 facets, 2n vertices.
    Prism,
    /// Anything else.
    Other,
}

impl fmt::Display for PosetClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PosetClass::Simplex => write!(f, "Simplex"),
            PosetClass::Diamond => write!(f, "Diamond"),
            PosetClass::Prism => write!(f, "Prism"),
            PosetClass::Other => write!(f, "Other"),
        }
    }
}

/// Which reference shape to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Simplex,
    Diamond,
    Prism,
}

/// Bookkeeping returned with a face subposet: how its facets and vertices
/// map back to the parent.
#[derive(Debug, Clone)]
pub struct SubposetMap {
    /// For each facet of the subposet, the parent face it came from.
    pub parent_faces: Vec<FaceId>,
    /// For each facet of the subposet, the one parent facet label by which
    /// its facet set exceeds the carrier's.
    pub parent_facets: Vec<usize>,
    /// For each subposet vertex id, the parent vertex id.
    pub parent_vertices: Vec<usize>,
}

const MAX_DIM: usize = 12;
const MAX_FACETS: usize = 64;
const MAX_VERTICES: usize = 4096;

/// The face poset of a nice manifold with corners, graded by dimension.
#[derive(Clone, PartialEq, Eq)]
pub struct FacePoset {
    n: usize,
    m: usize,
    vertex_facets: Vec<FacetSet>,
    /// Sorted by (dimension descending, facet set, component); the unique
    /// top face comes first, vertices last.
    faces: Vec<Face>,
}

impl FacePoset {
    /// Build the poset generated by vertex -> facet incidences.
    ///
    /// `vertex_facets[w]` is the set of facets on which vertex `w` lies;
    /// each must have exactly `n` elements and every label in `0..m` must
    /// occur somewhere.
    pub fn from_vertex_facets(
        n: usize,
        m: usize,
        vertex_facets: &[FacetSet],
    ) -> Result<Self, PosetError> {
        if n == 0 || n > MAX_DIM {
            return Err(PosetError::InvalidDimension(n));
        }
        if m == 0 || m > MAX_FACETS {
            return Err(PosetError::InconsistentInput(format!(
                "facet count {m} out of range"
            )));
        }
        if vertex_facets.is_empty() || vertex_facets.len() > MAX_VERTICES {
            return Err(PosetError::InconsistentInput(format!(
                "vertex count {} out of range",
                vertex_facets.len()
            )));
        }
        let mut used = vec![false; m];
        for (w, iv) in vertex_facets.iter().enumerate() {
            if iv.len() != n {
                return Err(PosetError::InconsistentInput(format!(
                    "vertex {w} lies on {} facets, expected {n}",
                    iv.len()
                )));
            }
            for &i in iv {
                if i >= m {
                    return Err(PosetError::InconsistentInput(format!(
                        "vertex {w} references facet {i} >= m = {m}"
                    )));
                }
                used[i] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(PosetError::InconsistentInput(format!(
                "facet {i} has no vertex"
            )));
        }

        let faces = generate_faces(n, vertex_facets);
        let poset = FacePoset {
            n,
            m,
            vertex_facets: vertex_facets.to_vec(),
            faces,
        };
        poset.validate_consistent()?;
        poset.validate_nice()?;
        Ok(poset)
    }

    /// Build from an explicit face list, validating that it is exactly the
    /// family generated by its own vertex data.
    pub fn from_explicit_faces(
        n: usize,
        m: usize,
        faces: &[(FacetSet, BTreeSet<usize>)],
    ) -> Result<Self, PosetError> {
        let mut vertex_facets: BTreeMap<usize, FacetSet> = BTreeMap::new();
        for (facets, vertices) in faces {
            if facets.len() == n {
                if vertices.len() != 1 {
                    return Err(PosetError::InconsistentInput(
                        "a zero-dimensional face must list exactly one vertex".into(),
                    ));
                }
                let w = *vertices.iter().next().unwrap();
                if vertex_facets.insert(w, facets.clone()).is_some() {
                    return Err(PosetError::InconsistentInput(format!(
                        "vertex {w} listed twice"
                    )));
                }
            }
        }
        let count = vertex_facets.len();
        if count == 0 {
            return Err(PosetError::InconsistentInput(
                "no zero-dimensional faces listed".into(),
            ));
        }
        if vertex_facets.keys().last() != Some(&(count - 1)) {
            return Err(PosetError::InconsistentInput(
                "vertex ids must be exactly 0..V-1".into(),
            ));
        }
        let vf: Vec<FacetSet> = vertex_facets.into_values().collect();
        let poset = Self::from_vertex_facets(n, m, &vf)?;
        let mut given: Vec<(FacetSet, BTreeSet<usize>)> = faces.to_vec();
        given.sort();
        let mut generated: Vec<(FacetSet, BTreeSet<usize>)> = poset
            .faces
            .iter()
            .map(|f| (f.facets.clone(), f.vertices.clone()))
            .collect();
        generated.sort();
        if given != generated {
            return Err(PosetError::InconsistentInput(
                "face list disagrees with the family generated by its vertices".into(),
            ));
        }
        Ok(poset)
    }

    /// One of the three reference shapes.
    ///
    /// `Simplex` needs `n >= 1`; `Diamond` and `Prism` need `n >= 2` (at
    /// `n = 1` all three degenerate to the interval, which this constructor
    /// labels `Simplex`).
    pub fn reference(kind: ReferenceKind, n: usize) -> Result<Self, PosetError> {
        match kind {
            ReferenceKind::Simplex => {
                if n < 1 {
                    return Err(PosetError::InvalidDimension(n));
                }
                let all: FacetSet = (0..=n).collect();
                let vf: Vec<FacetSet> = (0..=n)
                    .map(|i| all.iter().copied().filter(|&j| j != i).collect())
                    .collect();
                Self::from_vertex_facets(n, n + 1, &vf)
            }
            ReferenceKind::Diamond => {
                if n < 2 {
                    return Err(PosetError::InvalidDimension(n));
                }
                let all: FacetSet = (0..n).collect();
                Self::from_vertex_facets(n, n, &[all.clone(), all])
            }
            ReferenceKind::Prism => {
                if n < 2 {
                    return Err(PosetError::InvalidDimension(n));
                }
                // sides 0..n, caps n ("+") and n+1 ("-")
                let mut vf = Vec::new();
                for cap in [n, n + 1] {
                    for i in 0..n {
                        let mut s: FacetSet = (0..n).filter(|&j| j != i).collect();
                        s.insert(cap);
                        vf.push(s);
                    }
                }
                Self::from_vertex_facets(n, n + 2, &vf)
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn facet_count(&self) -> usize {
        self.m
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_facets.len()
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, id: FaceId) -> &Face {
        &self.faces[id.0]
    }

    pub fn face_ids(&self) -> impl Iterator<Item = FaceId> {
        (0..self.faces.len()).map(FaceId)
    }

    pub fn faces_of_dim(&self, d: usize) -> Vec<FaceId> {
        self.face_ids()
            .filter(|&f| self.face(f).dim == d)
            .collect()
    }

    /// The unique top face (empty facet set).
    pub fn top(&self) -> FaceId {
        FaceId(0)
    }

    /// Facet sets of the vertices, indexed by vertex id.
    pub fn vertex_facets(&self) -> &[FacetSet] {
        &self.vertex_facets
    }

    /// The zero-dimensional face carrying vertex `w`.
    pub fn vertex_face(&self, w: usize) -> FaceId {
        self.face_ids()
            .find(|&f| self.face(f).dim == 0 && self.face(f).vertices.contains(&w))
            .expect("every vertex id has a face")
    }

    /// First vertex (in component order) whose facet set is exactly `facets`.
    pub fn vertex_with_facets(&self, facets: &FacetSet) -> Option<FaceId> {
        self.face_ids()
            .find(|&f| self.face(f).dim == 0 && &self.face(f).facets == facets)
    }

    /// The face with facet set `{i}` (facet labels denote single faces).
    pub fn facet_face(&self, i: usize) -> FaceId {
        let want: FacetSet = [i].into_iter().collect();
        self.face_ids()
            .find(|&f| self.face(f).facets == want)
            .expect("validated facet label")
    }

    /// Containment: `a <= b` when the face `a` is contained in `b`.
    pub fn leq(&self, a: FaceId, b: FaceId) -> bool {
        let fa = self.face(a);
        let fb = self.face(b);
        fb.facets.is_subset(&fa.facets) && fa.vertices.is_subset(&fb.vertices)
    }

    /// Human-readable label: `Q`, `Q_{1,3}` (1-based facets), with a `#k`
    /// suffix when the facet set has several components.
    pub fn face_label(&self, id: FaceId) -> String {
        let f = self.face(id);
        if f.facets.is_empty() {
            return "Q".to_string();
        }
        let labels: Vec<String> = f.facets.iter().map(|i| (i + 1).to_string()).collect();
        let siblings = self
            .faces
            .iter()
            .filter(|g| g.facets == f.facets)
            .count();
        if siblings > 1 {
            format!("Q_{{{}}}#{}", labels.join(","), f.component + 1)
        } else {
            format!("Q_{{{}}}", labels.join(","))
        }
    }

    pub fn validate_consistent(&self) -> Result<(), PosetError> {
        let tops = self.faces.iter().filter(|f| f.facets.is_empty()).count();
        if tops != 1 {
            return Err(PosetError::InconsistentInput(format!(
                "{tops} connected components; the structure must be connected"
            )));
        }
        for i in 0..self.m {
            let parts = self
                .faces
                .iter()
                .filter(|f| f.facets.len() == 1 && f.facets.contains(&i))
                .count();
            if parts != 1 {
                return Err(PosetError::InconsistentInput(format!(
                    "facet {} splits into {parts} components; a facet label must denote one face",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    pub fn validate_nice(&self) -> Result<(), PosetError> {
        for f in &self.faces {
            if f.dim == 1 && f.vertices.len() != 2 {
                return Err(PosetError::NotNice(format!(
                    "a 1-dimensional face has {} endpoints, expected 2",
                    f.vertices.len()
                )));
            }
        }
        // graded: covering relations drop the dimension by exactly one
        let ids: Vec<FaceId> = self.face_ids().collect();
        for &a in &ids {
            for &b in &ids {
                if a == b || !self.leq(a, b) {
                    continue;
                }
                let da = self.face(a).dim;
                let db = self.face(b).dim;
                if da >= db {
                    return Err(PosetError::NotNice(
                        "containment does not respect dimension".into(),
                    ));
                }
                if db - da == 1 {
                    continue;
                }
                let has_between = ids.iter().any(|&h| {
                    h != a && h != b && self.leq(a, h) && self.leq(h, b)
                });
                if !has_between {
                    return Err(PosetError::NotNice(format!(
                        "cover relation jumps from dimension {da} to {db}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Re-run the niceness validation (constructors already enforce it).
    pub fn is_nice(&self) -> bool {
        self.validate_consistent().is_ok() && self.validate_nice().is_ok()
    }

    /// Cut a vertex: replace the corner `q` by a new facet whose vertices
    /// pair each facet through `q` with the new label `m`.
    pub fn vertex_cut(&self, q: FaceId) -> Result<FacePoset, PosetError> {
        if self.n < 2 {
            return Err(PosetError::InvalidDimension(self.n));
        }
        let fq = self.face(q);
        if fq.dim != 0 {
            return Err(PosetError::NotAVertex);
        }
        let w = *fq.vertices.iter().next().unwrap();
        let iq = &self.vertex_facets[w];
        let mut vf: Vec<FacetSet> = self
            .vertex_facets
            .iter()
            .enumerate()
            .filter(|&(x, _)| x != w)
            .map(|(_, s)| s.clone())
            .collect();
        for &i in iq {
            let mut s: FacetSet = iq.iter().copied().filter(|&j| j != i).collect();
            s.insert(self.m);
            vf.push(s);
        }
        Self::from_vertex_facets(self.n, self.m + 1, &vf)
    }

    /// Collapse the union of the facets in `s` to a single new vertex.
    ///
    /// The faces meeting the union (those whose facet set intersects `s`)
    /// disappear into the new vertex; all other faces keep their identity,
    /// with surviving facets relabelled in order. Fails unless the union is
    /// connected and the quotient is again a nice structure.
    pub fn collapse_facets(&self, s: &FacetSet) -> Result<FacePoset, PosetError> {
        if s.is_empty() {
            return Err(PosetError::InconsistentInput("empty collapse set".into()));
        }
        if let Some(&i) = s.iter().find(|&&i| i >= self.m) {
            return Err(PosetError::InconsistentInput(format!(
                "collapse set references facet {i} >= m = {}",
                self.m
            )));
        }
        let keep_labels: Vec<usize> = (0..self.m).filter(|i| !s.contains(i)).collect();
        if keep_labels.is_empty() {
            return Err(PosetError::CollapseNotNice(
                "collapsing every facet leaves nothing".into(),
            ));
        }
        let relabel: BTreeMap<usize, usize> = keep_labels
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();

        let in_region =
            |facets: &FacetSet| -> bool { facets.iter().any(|i| s.contains(i)) };
        let region_vertices: BTreeSet<usize> = (0..self.vertex_count())
            .filter(|&w| in_region(&self.vertex_facets[w]))
            .collect();
        if region_vertices.is_empty() {
            return Err(PosetError::CollapseNotNice(
                "the collapse region is empty".into(),
            ));
        }
        // The region must be connected; walk it along its edges.
        let mut dsu = Dsu::new(self.vertex_count());
        for f in &self.faces {
            if f.dim == 1 && in_region(&f.facets) {
                let mut it = f.vertices.iter();
                let a = *it.next().unwrap();
                let b = *it.next().unwrap();
                dsu.union(a, b);
            }
        }
        let root = dsu.find(*region_vertices.iter().next().unwrap());
        if region_vertices.iter().any(|&w| dsu.find(w) != root) {
            return Err(PosetError::CollapseNotNice(
                "the collapse region is disconnected".into(),
            ));
        }

        // New vertex: lies on every surviving facet that meets the region.
        let star: FacetSet = region_vertices
            .iter()
            .flat_map(|&w| self.vertex_facets[w].iter().copied())
            .filter(|i| !s.contains(i))
            .map(|i| relabel[&i])
            .collect();
        if star.len() != self.n {
            return Err(PosetError::CollapseNotNice(format!(
                "the new vertex would lie on {} facets, expected {}",
                star.len(),
                self.n
            )));
        }

        let kept_old_ids: Vec<usize> = (0..self.vertex_count())
            .filter(|w| !region_vertices.contains(w))
            .collect();
        let old_to_new: BTreeMap<usize, usize> = kept_old_ids
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let mut vf: Vec<FacetSet> = kept_old_ids
            .iter()
            .map(|&w| {
                self.vertex_facets[w]
                    .iter()
                    .map(|i| relabel[i])
                    .collect()
            })
            .collect();
        let star_id = vf.len();
        vf.push(star.clone());

        let quotient = Self::from_vertex_facets(self.n, keep_labels.len(), &vf)
            .map_err(|e| PosetError::CollapseNotNice(e.to_string()))?;

        // Surviving faces must keep their identity: the quotient's faces are
        // exactly the old faces missing `s`, with region vertices replaced
        // by the new one, plus the new vertex itself.
        let mut expected: Vec<(FacetSet, BTreeSet<usize>)> = Vec::new();
        expected.push((star.clone(), [star_id].into_iter().collect()));
        for f in &self.faces {
            if in_region(&f.facets) {
                continue;
            }
            let facets: FacetSet = f.facets.iter().map(|i| relabel[i]).collect();
            let mut verts: BTreeSet<usize> = f
                .vertices
                .iter()
                .filter(|w| !region_vertices.contains(w))
                .map(|w| old_to_new[w])
                .collect();
            if f.vertices.iter().any(|w| region_vertices.contains(w)) {
                verts.insert(star_id);
            }
            expected.push((facets, verts));
        }
        expected.sort();
        expected.dedup();
        let mut got: Vec<(FacetSet, BTreeSet<usize>)> = quotient
            .faces
            .iter()
            .map(|f| (f.facets.clone(), f.vertices.clone()))
            .collect();
        got.sort();
        if expected != got {
            return Err(PosetError::CollapseNotNice(
                "surviving faces do not keep their identity".into(),
            ));
        }
        Ok(quotient)
    }

    /// The face poset of one face, with its own grading and facet labels.
    ///
    /// Returns the subposet together with the map back to the parent. The
    /// carrier must have positive dimension.
    pub fn face_subposet(&self, f: FaceId) -> Result<(FacePoset, SubposetMap), PosetError> {
        let carrier = self.face(f);
        if carrier.dim == 0 {
            return Err(PosetError::ZeroDimensionalFace);
        }
        let sub_n = carrier.dim;
        let mut parent_faces = Vec::new();
        let mut parent_facets = Vec::new();
        for g in self.face_ids() {
            let fg = self.face(g);
            if fg.dim + 1 != carrier.dim || !self.leq(g, f) {
                continue;
            }
            parent_faces.push(g);
            let extra: Vec<usize> = fg
                .facets
                .difference(&carrier.facets)
                .copied()
                .collect();
            debug_assert_eq!(extra.len(), 1);
            parent_facets.push(extra[0]);
        }
        let parent_vertices: Vec<usize> = carrier.vertices.iter().copied().collect();
        let vf: Vec<FacetSet> = parent_vertices
            .iter()
            .map(|&w| {
                parent_faces
                    .iter()
                    .enumerate()
                    .filter(|(_, &g)| self.face(g).vertices.contains(&w))
                    .map(|(idx, _)| idx)
                    .collect()
            })
            .collect();
        let sub = Self::from_vertex_facets(sub_n, parent_faces.len(), &vf)?;
        Ok((
            sub,
            SubposetMap {
                parent_faces,
                parent_facets,
                parent_vertices,
            },
        ))
    }

    /// Search for a facet relabelling identifying `self` with `other`.
    /// Returns the map `self facet -> other facet` if one exists.
    pub fn isomorphic_to(&self, other: &FacePoset) -> Option<Vec<usize>> {
        self.isomorphic_pinned(other, &[])
    }

    /// Isomorphism search with prescribed facet images.
    pub fn isomorphic_pinned(
        &self,
        other: &FacePoset,
        pins: &[(usize, usize)],
    ) -> Option<Vec<usize>> {
        if self.n != other.n
            || self.m != other.m
            || self.vertex_count() != other.vertex_count()
            || self.faces.len() != other.faces.len()
        {
            return None;
        }
        // vertex multiset per facet label
        let degree = |p: &FacePoset, i: usize| -> usize {
            p.vertex_facets.iter().filter(|s| s.contains(&i)).count()
        };
        let mine: Vec<usize> = (0..self.m).map(|i| degree(self, i)).collect();
        let theirs: Vec<usize> = (0..self.m).map(|i| degree(other, i)).collect();
        {
            let mut a = mine.clone();
            let mut b = theirs.clone();
            a.sort_unstable();
            b.sort_unstable();
            if a != b {
                return None;
            }
        }
        let mut map = vec![usize::MAX; self.m];
        let mut used = vec![false; self.m];
        for &(a, b) in pins {
            if a >= self.m || b >= self.m || mine[a] != theirs[b] || used[b] {
                return None;
            }
            map[a] = b;
            used[b] = true;
        }
        let mut their_sets: Vec<FacetSet> = other.vertex_facets.clone();
        their_sets.sort();
        if backtrack(0, &mut map, &mut used, &mine, &theirs, self, &their_sets) {
            Some(map)
        } else {
            None
        }
    }

    /// Which reference shape the poset is, decided by explicit isomorphism.
    pub fn classify(&self) -> PosetClass {
        let n = self.n;
        let candidates = [
            (ReferenceKind::Simplex, PosetClass::Simplex),
            (ReferenceKind::Diamond, PosetClass::Diamond),
            (ReferenceKind::Prism, PosetClass::Prism),
        ];
        for (kind, class) in candidates {
            if let Ok(reference) = Self::reference(kind, n) {
                if self.isomorphic_to(&reference).is_some() {
                    return class;
                }
            }
        }
        PosetClass::Other
    }

    /// For a prism-shaped poset, every facet pair that an isomorphism can
    /// send to the two caps (the `Delta x {+1}` and `Delta x {-1}` ends).
    pub fn prism_cap_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let Ok(reference) = Self::reference(ReferenceKind::Prism, self.n) else {
            return out;
        };
        for i in 0..self.m {
            for j in 0..self.m {
                if i == j {
                    continue;
                }
                if self
                    .isomorphic_pinned(&reference, &[(i, self.n), (j, self.n + 1)])
                    .is_some()
                {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

impl fmt::Debug for FacePoset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "FacePoset(n={}, m={}, V={}) [",
            self.n,
            self.m,
            self.vertex_count()
        )?;
        for id in self.face_ids() {
            let face = self.face(id);
            writeln!(
                f,
                "  dim {} {} vertices {:?}",
                face.dim,
                self.face_label(id),
                face.vertices
            )?;
        }
        write!(f, "]")
    }
}

fn generate_faces(n: usize, vertex_facets: &[FacetSet]) -> Vec<Face> {
    let nv = vertex_facets.len();
    // pairwise shared-facet counts decide edge adjacency
    let mut shared = vec![vec![0usize; nv]; nv];
    for u in 0..nv {
        for v in u + 1..nv {
            let c = vertex_facets[u]
                .intersection(&vertex_facets[v])
                .count();
            shared[u][v] = c;
            shared[v][u] = c;
        }
    }

    let mut candidates: BTreeSet<FacetSet> = BTreeSet::new();
    candidates.insert(FacetSet::new());
    for iv in vertex_facets {
        let items: Vec<usize> = iv.iter().copied().collect();
        for mask in 0..(1u32 << items.len()) {
            let subset: FacetSet = items
                .iter()
                .enumerate()
                .filter(|&(b, _)| mask >> b & 1 == 1)
                .map(|(_, &x)| x)
                .collect();
            candidates.insert(subset);
        }
    }

    let mut faces = Vec::new();
    for i_set in &candidates {
        let members: Vec<usize> = (0..nv)
            .filter(|&w| i_set.is_subset(&vertex_facets[w]))
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut dsu = Dsu::new(nv);
        if i_set.len() < n {
            for (a, &u) in members.iter().enumerate() {
                for &v in &members[a + 1..] {
                    // joined inside Q_I by an edge of Q: an (n-1)-set
                    // between I and the shared facets
                    if shared[u][v] >= n - 1 {
                        dsu.union(u, v);
                    }
                }
            }
        }
        let mut components: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for &w in &members {
            components.entry(dsu.find(w)).or_default().insert(w);
        }
        let mut comps: Vec<BTreeSet<usize>> = components.into_values().collect();
        comps.sort();
        for (k, vertices) in comps.into_iter().enumerate() {
            faces.push(Face {
                facets: i_set.clone(),
                vertices,
                component: k,
                dim: n - i_set.len(),
            });
        }
    }
    faces.sort_by(|a, b| {
        b.dim
            .cmp(&a.dim)
            .then_with(|| a.facets.cmp(&b.facets))
            .then_with(|| a.component.cmp(&b.component))
    });
    faces
}

fn backtrack(
    next: usize,
    map: &mut Vec<usize>,
    used: &mut Vec<bool>,
    mine: &[usize],
    theirs: &[usize],
    me: &FacePoset,
    their_sets: &[FacetSet],
) -> bool {
    let m = map.len();
    let slot = (next..m).find(|&i| map[i] == usize::MAX);
    let Some(slot) = slot else {
        let mut mapped: Vec<FacetSet> = me
            .vertex_facets
            .iter()
            .map(|s| s.iter().map(|i| map[*i]).collect())
            .collect();
        mapped.sort();
        return mapped.as_slice() == their_sets;
    };
    for image in 0..m {
        if used[image] || mine[slot] != theirs[image] {
            continue;
        }
        map[slot] = image;
        used[image] = true;
        if backtrack(slot + 1, map, used, mine, theirs, me, their_sets) {
            return true;
        }
        map[slot] = usize::MAX;
        used[image] = false;
    }
    false
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            self.parent[ra] = rb;
        }
    }
}

/// Vertex data of the ten-vertex corner example: a triangular prism with two
/// vertices cut, facets (1..5, +, -) stored 0-based as (0..4, 5, 6).
pub fn cut_prism_vertex_data() -> Vec<FacetSet> {
    let v = |xs: &[usize]| -> FacetSet { xs.iter().copied().collect() };
    vec![
        v(&[0, 3, 5]), // {1,4,+}
        v(&[1, 3, 5]), // {2,4,+}
        v(&[0, 1, 3]), // {1,2,4}
        v(&[0, 4, 6]), // {1,5,-}
        v(&[1, 4, 6]), // {2,5,-}
        v(&[0, 1, 4]), // {1,2,5}
        v(&[0, 2, 5]), // {1,3,+}
        v(&[0, 2, 6]), // {1,3,-}
        v(&[1, 2, 5]), // {2,3,+}
        v(&[1, 2, 6]), // {2,3,-}
    ]
}

/// The cube pattern: six facets paired into opposite axes.
pub fn cube_vertex_data() -> Vec<FacetSet> {
    let mut out = Vec::new();
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                out.push([x, 2 + y, 4 + z].into_iter().collect());
            }
        }
    }
    out
}

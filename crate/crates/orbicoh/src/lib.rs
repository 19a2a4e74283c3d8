//! Exact-arithmetic invariants of torus orbifolds over manifolds with corners.
//!
//! Given a nice manifold-with-corners face structure `Q` (or a simple
//! polytope, or a complete simplicial fan) together with an integer
//! characteristic function on its facets, this crate computes
//!
//! * lattice indices `mu(Q_I) = |N(I) : Nhat(I)|` for every face,
//! * the quotients `N/Nhat` and `Wedge^2 N / (Nhat wedge N)` in canonical
//!   invariant-factor form,
//! * the cohomology of the associated torus orbifold `X(Q, v)` in the
//!   boundary degrees `2n, 2n-1, 2n-2` (plus full tables for `n = 2, 3`),
//! * per-prime torsion verdicts (`HasPTorsion` / `NoPTorsion` /
//!   `Inconclusive`) backed by the necessary and sufficient conditions
//!   the three reference face-poset classes admit.
//!
//! All arithmetic is exact: integers are arbitrary precision throughout and
//! geometric predicates (fan membership, barycentric signs) are decided with
//! integer determinants, never floating point.
//!
//! Modules:
//!
//! * [`lattice`]: integer matrices, Smith normal form, cokernels, saturations
//!   and exterior-square quotients;
//! * [`poset`]: face posets of nice manifolds with corners, reference shapes
//!   (simplex, diamond, prism), vertex cuts and facet collapses;
//! * [`charfun`]: characteristic functions, induced functions on faces, the
//!   `mu` table and vertex determinants;
//! * [`cohomology`]: boundary-degree cohomology and torsion verdicts;
//! * [`fan`]: complete simplicial fans, the dual posetal pair, Monte-Carlo
//!   completeness certification and the cochain-route torsion oracle;
//! * [`cli`]: the `orbicoh` command-line front end.
//!
//! The `parallel` feature (on by default) runs the embarrassingly parallel
//! cores (fan cover sampling, per-face `mu` evaluation) on rayon; disabling
//! it yields a fully sequential build with identical results.

pub mod charfun;
pub mod cli;
pub mod cohomology;
mod exec;
pub mod fan;
pub mod lattice;
pub mod poset;

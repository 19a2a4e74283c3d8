//! Shared helpers for the integration suites: seeded generators, i128
//! reference oracles that avoid the library's normal-form code, and the
//! reusable property suites the acceptance gate runs at full size.
#![allow(dead_code)]

use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use orbicoh::charfun;
use orbicoh::fan::{self, Fan};
use orbicoh::lattice::{self, int, FinAbGroup, Index, Int, IntMatrix};
use orbicoh::poset::{FacePoset, FacetSet, ReferenceKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rows(rng: &mut ChaCha8Rng, rows: usize, cols: usize, bound: i64) -> Vec<Vec<i128>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-bound..=bound) as i128).collect())
        .collect()
}

pub fn to_int_matrix(rows: &[Vec<i128>]) -> IntMatrix {
    let converted: Vec<Vec<Int>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| Int::from(x)).collect())
        .collect();
    IntMatrix::from_rows(&converted)
}

/// Product of random elementary row operations applied to the identity.
/// Shear multiples stay in {-2,...,2} so entries remain small.
pub fn random_unimodular(rng: &mut ChaCha8Rng, n: usize, steps: usize) -> IntMatrix {
    let mut u = IntMatrix::identity(n);
    if n < 2 {
        return u;
    }
    for _ in 0..steps {
        match rng.gen_range(0..3u8) {
            0 => {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n);
                while j == i {
                    j = rng.gen_range(0..n);
                }
                let c = int(*[-2, -1, 1, 2].get(rng.gen_range(0..4)).unwrap());
                for col in 0..n {
                    let add = &u[(j, col)] * &c;
                    u[(i, col)] += add;
                }
            }
            1 => {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n);
                while j == i {
                    j = rng.gen_range(0..n);
                }
                for col in 0..n {
                    let tmp = u[(i, col)].clone();
                    u[(i, col)] = u[(j, col)].clone();
                    u[(j, col)] = tmp;
                }
            }
            _ => {
                let i = rng.gen_range(0..n);
                for col in 0..n {
                    let neg = -u[(i, col)].clone();
                    u[(i, col)] = neg;
                }
            }
        }
    }
    debug_assert!(u.is_unimodular());
    u
}

/// `a | b` with the usual zero conventions: 0 divides only 0.
pub fn divides(a: &Int, b: &Int) -> bool {
    if a.is_zero() {
        b.is_zero()
    } else {
        (b % a).is_zero()
    }
}

// ---------------------------------------------------------------------------
// i128 reference oracles. Cofactor expansion keeps them independent of the
// Smith normal form implementation; entries and dimensions in the suites are
// small enough that i128 never overflows.

pub fn det_i128(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    assert!(m.iter().all(|r| r.len() == n), "square matrix required");
    let cols: Vec<usize> = (0..n).collect();
    det_on_cols(m, 0, &cols)
}

fn det_on_cols(m: &[Vec<i128>], row: usize, cols: &[usize]) -> i128 {
    if cols.is_empty() {
        return 1;
    }
    let mut acc = 0i128;
    let mut sign = 1i128;
    for &c in cols {
        if m[row][c] != 0 {
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            acc += sign * m[row][c] * det_on_cols(m, row + 1, &rest);
        }
        sign = -sign;
    }
    acc
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Gcd of all k-by-k minors, nonnegative, 0 when every minor vanishes.
pub fn minor_gcd_i128(m: &[Vec<i128>], k: usize) -> i128 {
    let rows = m.len();
    let cols = if rows == 0 { 0 } else { m[0].len() };
    assert!(k >= 1 && k <= rows.min(cols));
    let mut g = 0i128;
    for rset in subsets(rows, k) {
        for cset in subsets(cols, k) {
            let sub: Vec<Vec<i128>> = rset
                .iter()
                .map(|&r| cset.iter().map(|&c| m[r][c]).collect())
                .collect();
            g = g.gcd(&det_i128(&sub));
            if g == 1 {
                return 1;
            }
        }
    }
    g.abs()
}

// the transposed write makes an index loop clearer than iterators here
#[allow(clippy::needless_range_loop)]
fn adjugate_i128(m: &[Vec<i128>]) -> Vec<Vec<i128>> {
    let n = m.len();
    if n == 1 {
        return vec![vec![1]];
    }
    let mut adj = vec![vec![0i128; n]; n];
    for i in 0..n {
        for j in 0..n {
            let minor: Vec<Vec<i128>> = (0..n)
                .filter(|&r| r != i)
                .map(|r| (0..n).filter(|&c| c != j).map(|c| m[r][c]).collect())
                .collect();
            let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[j][i] = sign * det_i128(&minor);
        }
    }
    adj
}

fn prime_divisors_i128(mut x: i128) -> Vec<i128> {
    let mut out = Vec::new();
    let mut p = 2i128;
    x = x.abs();
    while p * p <= x {
        if x % p == 0 {
            out.push(p);
            while x % p == 0 {
                x /= p;
            }
        }
        p += 1;
    }
    if x > 1 {
        out.push(x);
    }
    out
}

/// Invariant factors of `Z^n / A Z^n` for nonsingular `A`, computed by
/// counting. Every point of the box `[0, D)^n` (`D = |det A|`) covers one
/// group element `D^(n-1)` times; the element's order is read off from
/// `adj(A) x mod D`, and the factor exponents at each prime come from the
/// growth of the `p^j`-torsion counts. Ones dropped, ascending.
pub fn cokernel_oracle(a: &[Vec<i128>]) -> Vec<i128> {
    let n = a.len();
    let det = det_i128(a);
    assert!(det != 0, "oracle needs a nonsingular matrix");
    let d = det.abs();
    if d == 1 {
        return Vec::new();
    }
    let adj = adjugate_i128(a);

    // order histogram over the box
    let mut orders: BTreeMap<i128, i128> = BTreeMap::new();
    let mut x = vec![0i128; n];
    'outer: loop {
        let mut order = 1i128;
        for row in &adj {
            let mut y = 0i128;
            for (j, &xj) in x.iter().enumerate() {
                y += row[j] * xj;
            }
            let y = y.rem_euclid(d);
            order = order.lcm(&(d / d.gcd(&y)));
        }
        *orders.entry(order).or_insert(0) += 1;
        let mut k = 0;
        loop {
            if k == n {
                break 'outer;
            }
            x[k] += 1;
            if x[k] < d {
                break;
            }
            x[k] = 0;
            k += 1;
        }
    }

    let fiber = d.pow(n as u32 - 1);
    let torsion_count = |k: i128| -> i128 {
        let total: i128 = orders
            .iter()
            .filter(|(l, _)| k % **l == 0)
            .map(|(_, c)| *c)
            .sum();
        assert_eq!(total % fiber, 0, "box fibers must be uniform");
        total / fiber
    };
    assert_eq!(torsion_count(1), 1, "only the identity is killed by 1");

    // factors_desc[k] accumulates the prime powers of the (k+1)-th largest factor
    let mut factors_desc: Vec<i128> = Vec::new();
    for p in prime_divisors_i128(d) {
        let mut prev = 1i128;
        let mut pj = 1i128;
        loop {
            pj *= p;
            let cur = torsion_count(pj);
            assert_eq!(cur % prev, 0);
            let mut ratio = cur / prev;
            let mut r = 0usize;
            while ratio > 1 {
                assert_eq!(ratio % p, 0, "torsion count ratios must be powers of p");
                ratio /= p;
                r += 1;
            }
            if r == 0 {
                break;
            }
            for k in 0..r {
                if factors_desc.len() <= k {
                    factors_desc.push(1);
                }
                factors_desc[k] *= p;
            }
            prev = cur;
        }
    }
    assert_eq!(factors_desc.iter().product::<i128>(), d, "factor product must be the order");
    let mut factors: Vec<i128> = factors_desc.into_iter().filter(|f| *f > 1).collect();
    factors.reverse();
    factors
}

// ---------------------------------------------------------------------------
// Reusable suites. Each returns Err with the offending case on failure so
// the acceptance gate and the property tests can share them.

fn fail(case: usize, what: impl std::fmt::Display) -> Result<(), String> {
    Err(format!("case {case}: {what}"))
}

/// Random Smith forms: transform identity, diagonality, the divisibility
/// chain, and agreement of divisor products with the minor-gcd oracle.
pub fn suite_smith_forms(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    for case in 0..cases {
        let rows = rng.gen_range(1..=6);
        let cols = rng.gen_range(1..=6);
        let raw = random_rows(&mut rng, rows, cols, 9);
        let m = to_int_matrix(&raw);
        let snf = lattice::smith_normal_form(&m);
        if !snf.u.is_unimodular() || !snf.v.is_unimodular() {
            return fail(case, "transform is not unimodular");
        }
        if snf.u.mul(&m).mul(&snf.v) != snf.s {
            return fail(case, "u * m * v differs from s");
        }
        for i in 0..rows {
            for j in 0..cols {
                if i != j && !snf.s[(i, j)].is_zero() {
                    return fail(case, format!("s has an off-diagonal entry at ({i},{j})"));
                }
            }
        }
        if snf.divisors.len() != rows.min(cols) {
            return fail(case, "wrong number of divisors");
        }
        if snf.divisors.iter().any(|d| d.is_negative()) {
            return fail(case, "negative divisor");
        }
        for w in snf.divisors.windows(2) {
            if w[0].is_zero() {
                if !w[1].is_zero() {
                    return fail(case, "zero divisor followed by a nonzero one");
                }
            } else if !(&w[1] % &w[0]).is_zero() {
                return fail(case, format!("divisor chain broken: {} then {}", w[0], w[1]));
            }
        }
        let mut product = Int::one();
        for (k, divisor) in snf.divisors.iter().enumerate() {
            product *= divisor;
            let oracle = Int::from(minor_gcd_i128(&raw, k + 1));
            if product != oracle {
                return fail(
                    case,
                    format!("minor gcd mismatch at size {}: {} vs oracle {}", k + 1, product, oracle),
                );
            }
        }
    }
    Ok(())
}

/// Random small nonsingular matrices: the cokernel's invariant factors must
/// match the counting oracle exactly.
pub fn suite_cokernel_matches_counting(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    for case in 0..cases {
        let n = rng.gen_range(1..=3);
        let raw = loop {
            let candidate = random_rows(&mut rng, n, n, 4);
            let det = det_i128(&candidate);
            if det != 0 && det.abs() <= 60 {
                break candidate;
            }
        };
        let group = lattice::cokernel(&to_int_matrix(&raw));
        if group.free_rank() != 0 {
            return fail(case, "nonsingular matrix produced a free part");
        }
        let expected: Vec<Int> = cokernel_oracle(&raw).into_iter().map(Int::from).collect();
        if group.torsion() != expected.as_slice() {
            return fail(
                case,
                format!(
                    "invariant factors {:?} disagree with the counting oracle {:?} for {:?}",
                    group.torsion(),
                    expected,
                    raw
                ),
            );
        }
    }
    Ok(())
}

fn finite(case: usize, value: &Index) -> Result<Int, String> {
    match value {
        Index::Finite(x) => Ok(x.clone()),
        Index::Infinite => Err(format!("case {case}: unexpected infinite index")),
    }
}

/// Random simplex characteristic functions: the top index is the gcd of all
/// vertex determinants, dropping any single determinant never changes the
/// gcd, and every facet index divides the top one.
pub fn suite_simplex_mu_gcd(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    for case in 0..cases {
        let n = rng.gen_range(2..=4);
        let poset = FacePoset::reference(ReferenceKind::Simplex, n).unwrap();
        let v = charfun::sample_characteristic_function(&poset, 5, &mut rng);
        let table = charfun::mu_table(&poset, &v).map_err(|e| e.to_string())?;
        let dets = charfun::vertex_dets(&poset, &v).map_err(|e| e.to_string())?;
        let mu_top = finite(case, table.get(poset.top()))?;

        let all = lattice::gcd_all(dets.values().iter());
        if mu_top != all {
            return fail(case, format!("top index {mu_top} is not the det gcd {all}"));
        }
        for omit in 0..dets.values().len() {
            let rest = lattice::gcd_all(
                dets.values()
                    .iter()
                    .enumerate()
                    .filter(|&(w, _)| w != omit)
                    .map(|(_, d)| d),
            );
            if rest != mu_top {
                return fail(
                    case,
                    format!("dropping determinant {omit} changes the gcd: {rest} vs {mu_top}"),
                );
            }
        }
        for i in 0..poset.facet_count() {
            let mu_facet = finite(case, table.get(poset.facet_face(i)))?;
            if !divides(&mu_facet, &mu_top) {
                return fail(
                    case,
                    format!("facet index {mu_facet} does not divide the top index {mu_top}"),
                );
            }
        }
    }
    Ok(())
}

/// Random spanning families `a_1..a_{n+1}` with `a_{n+1}` primitive:
/// checks the determinant gcd identities before and after projecting to
/// the quotient by `a_{n+1}` and primitivizing the images.
pub fn suite_projected_det_gcds(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    for case in 0..cases {
        let n = rng.gen_range(2..=4);
        let (vectors, dets) = loop {
            let mut vectors = random_rows(&mut rng, n + 1, n, 7);
            let g = vectors[n].iter().fold(0i128, |acc, &x| acc.gcd(&x));
            if g == 0 {
                continue;
            }
            for entry in vectors[n].iter_mut() {
                *entry /= g;
            }
            let dets: Vec<i128> = (0..=n)
                .map(|omit| {
                    let sub: Vec<Vec<i128>> = vectors
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != omit)
                        .map(|(_, v)| v.clone())
                        .collect();
                    det_i128(&sub).abs()
                })
                .collect();
            if dets.iter().any(|&d| d != 0) {
                break (vectors, dets);
            }
        };

        let gcd_first_n = dets[..n].iter().fold(0i128, |acc, d| acc.gcd(d));
        let gcd_all = gcd_first_n.gcd(&dets[n]);
        if gcd_first_n == 0 || dets[n] % gcd_first_n != 0 {
            return fail(
                case,
                format!("gcd {} of the first {} determinants does not divide {}", gcd_first_n, n, dets[n]),
            );
        }

        // the gcd of all n+1 determinants is the index of the spanned sublattice
        let columns: Vec<Vec<Int>> = vectors
            .iter()
            .map(|v| v.iter().map(|&x| Int::from(x)).collect())
            .collect();
        let span = IntMatrix::from_columns(n, &columns);
        let order = lattice::cokernel(&span).order();
        if order != Index::Finite(Int::from(gcd_all)) {
            return fail(
                case,
                format!("sublattice index {order} differs from the determinant gcd {gcd_all}"),
            );
        }

        // project to the quotient by the primitive last vector
        let last = IntMatrix::from_columns(n, &columns[n..=n]);
        let projection = lattice::quotient_projection(&last).map_err(|e| e.to_string())?;
        let images: Vec<Vec<Int>> = columns[..n]
            .iter()
            .map(|v| projection.apply(v))
            .collect();
        let primitives: Vec<Vec<Int>> = images
            .iter()
            .map(|image| match lattice::primitivize(image) {
                Ok((primitive, _)) => primitive,
                Err(_) => vec![Int::zero(); n - 1],
            })
            .collect();

        for (omit, det) in dets.iter().enumerate().take(n) {
            let kept: Vec<Vec<Int>> = images
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != omit)
                .map(|(_, v)| v.clone())
                .collect();
            let projected_det = IntMatrix::from_columns(n - 1, &kept).determinant();
            if projected_det.abs() != Int::from(*det) {
                return fail(
                    case,
                    format!(
                        "projected determinant {} differs from {det} at position {omit}",
                        projected_det.abs()
                    ),
                );
            }
        }

        let mut gcd_primitive = Int::zero();
        for omit in 0..n {
            let kept: Vec<Vec<Int>> = primitives
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != omit)
                .map(|(_, v)| v.clone())
                .collect();
            gcd_primitive = gcd_primitive.gcd(&IntMatrix::from_columns(n - 1, &kept).determinant());
        }
        if !divides(&gcd_primitive, &Int::from(gcd_all)) {
            return fail(
                case,
                format!(
                    "primitivized determinant gcd {} does not divide the index {}",
                    gcd_primitive, gcd_all
                ),
            );
        }
    }
    Ok(())
}

/// Random prism characteristic functions: whenever the top index and a cap
/// index are both coprime to `p`, some vertex determinant must be too.
pub fn suite_prism_coprime_vertex(cases: usize, seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let mut hits = 0usize;
    for case in 0..cases {
        let n = rng.gen_range(2..=4);
        let poset = FacePoset::reference(ReferenceKind::Prism, n).unwrap();
        let v = charfun::sample_characteristic_function(&poset, 5, &mut rng);
        let table = charfun::mu_table(&poset, &v).map_err(|e| e.to_string())?;
        let caps = poset.prism_cap_pairs();
        if caps.is_empty() {
            return fail(case, "prism reference lost its cap pairs");
        }
        for p in [2i64, 3, 5, 7] {
            let p = int(p);
            let top_ok = table.get(poset.top()).coprime_to(&p);
            let cap_ok = caps.iter().any(|&(i, j)| {
                table.get(poset.facet_face(i)).coprime_to(&p)
                    || table.get(poset.facet_face(j)).coprime_to(&p)
            });
            if !(top_ok && cap_ok) {
                continue;
            }
            hits += 1;
            let witness =
                charfun::exists_coprime_vertex(&poset, &v, &p).map_err(|e| e.to_string())?;
            if witness.is_none() {
                return fail(
                    case,
                    format!("indices coprime to {p} but every vertex determinant is divisible"),
                );
            }
        }
    }
    if hits == 0 {
        return Err("the hypothesis never held; the suite tested nothing".into());
    }
    Ok(())
}

fn unimodular_image(fan: &Fan, u: &IntMatrix) -> Fan {
    let rays: Vec<Vec<Int>> = fan.rays().iter().map(|r| u.apply(r)).collect();
    let cones: Vec<FacetSet> = fan.max_cones().to_vec();
    Fan::new(fan.dim(), rays, cones).expect("unimodular images preserve fan validity")
}

pub fn builtin_fans() -> Vec<(String, Fan)> {
    let mut out = vec![("simplex3".to_string(), fan::simplex3_fan())];
    for a in 1..=3i64 {
        out.push((format!("fibration a={a}"), fan::fibration_fan(a).unwrap()));
    }
    for d in 1..=7i64 {
        out.push((format!("counterexample d={d}"), fan::counterexample_fan(d).unwrap()));
    }
    out
}

fn delta_routes_agree(label: &str, fan: &Fan) -> Result<(), String> {
    let (top, next) = fan::delta_cokernels(fan).map_err(|e| format!("{label}: {e}"))?;
    let rays = IntMatrix::from_columns(fan.dim(), fan.rays());
    let top_direct = lattice::cokernel(&rays);
    let next_direct =
        lattice::wedge_square_quotient(fan.rays(), fan.dim()).map_err(|e| format!("{label}: {e}"))?;
    if top != top_direct {
        return Err(format!(
            "{label}: boundary-map group {top} differs from the lattice route {top_direct}"
        ));
    }
    if next != next_direct {
        return Err(format!(
            "{label}: wedge group {next} differs from the lattice route {next_direct}"
        ));
    }
    Ok(())
}

/// Boundary-map cokernels against the direct lattice route, on the built-in
/// fans and on `variants` unimodular images of them.
pub fn suite_delta_matches_lattice(variants: usize, seed: u64) -> Result<(), String> {
    let fans = builtin_fans();
    for (label, fan) in &fans {
        delta_routes_agree(label, fan)?;
    }
    let mut rng = rng(seed);
    for k in 0..variants {
        let (label, base) = &fans[k % fans.len()];
        let u = random_unimodular(&mut rng, base.dim(), 8);
        let image = unimodular_image(base, &u);
        delta_routes_agree(&format!("{label} variant {k}"), &image)?;
    }
    Ok(())
}

/// One reference-shape surgery step: cutting any vertex of `from` must give
/// `to`, and collapsing the cut facet must give `from` back.
pub fn check_cut_step(from: &FacePoset, to: &FacePoset) -> Result<(), String> {
    for w in 0..from.vertex_count() {
        let cut = from
            .vertex_cut(from.vertex_face(w))
            .map_err(|e| format!("cut at vertex {w}: {e}"))?;
        if cut.isomorphic_to(to).is_none() {
            return Err(format!("cut at vertex {w} is not the expected shape"));
        }
        let new_facet: FacetSet = [cut.facet_count() - 1].into_iter().collect();
        let back = cut
            .collapse_facets(&new_facet)
            .map_err(|e| format!("collapse after cutting vertex {w}: {e}"))?;
        if back.isomorphic_to(from).is_none() {
            return Err(format!("collapsing the cut facet at vertex {w} does not undo the cut"));
        }
    }
    Ok(())
}

pub fn group(rank: usize, torsion: &[i64]) -> FinAbGroup {
    FinAbGroup::new(rank, torsion.iter().map(|&t| int(t)).collect())
}

pub fn cyclic(t: i64) -> FinAbGroup {
    FinAbGroup::new(0, vec![int(t)])
}

//! Finite groups acting on pixel grids by permutation.
//!
//! The four supported groups all act on an `h x w` grid by permuting pixel
//! indices, so every representation matrix is a permutation matrix and in
//! particular orthogonal. Group elements are stored as explicit index
//! permutations, which makes the group axioms exactly checkable in integer
//! arithmetic.
//!
//! Element ordering is fixed: the identity comes first, then the remaining
//! elements in a canonical order (rotations before reflections for the
//! dihedral group). All orbit and averaging operations iterate in this order,
//! so results are reproducible bit for bit.

use crate::error::{Error, Result};
use crate::image::{Grid, ImageTensor};

/// The four supported group families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupName {
    /// `{e}` — no symmetry.
    Trivial,
    /// Two elements: identity and the right-left mirror.
    FlipH,
    /// Klein four-group: identity, right-left mirror, up-down mirror, 180 degree rotation.
    Klein4,
    /// Dihedral group of the square: four rotations and four reflections.
    Dihedral4,
}

impl GroupName {
    /// Parse the config-file spelling of a group name.
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "trivial" => Ok(GroupName::Trivial),
            "flip_h" => Ok(GroupName::FlipH),
            "klein4" => Ok(GroupName::Klein4),
            "d4" => Ok(GroupName::Dihedral4),
            other => Err(Error::UnknownGroup(other.to_string())),
        }
    }

    /// The config-file spelling.
    pub fn as_str(&self) -> &'static str {
        match self {
            GroupName::Trivial => "trivial",
            GroupName::FlipH => "flip_h",
            GroupName::Klein4 => "klein4",
            GroupName::Dihedral4 => "d4",
        }
    }

    /// Group order: 1, 2, 4 or 8.
    pub fn order(&self) -> usize {
        match self {
            GroupName::Trivial => 1,
            GroupName::FlipH => 2,
            GroupName::Klein4 => 4,
            GroupName::Dihedral4 => 8,
        }
    }
}

/// One group element, stored as a pixel-index permutation.
///
/// `apply` uses pull semantics: `(g x)[i] = x[perm[i]]`. The permutation
/// matrix `rho(g)` this encodes has a single 1 per row, so it is orthogonal
/// and `rho(g)^T = rho(g^{-1})`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupElement {
    perm: Vec<usize>,
}

impl GroupElement {
    /// Validate that `perm` is a bijection on `0..perm.len()`.
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let len = perm.len();
        let mut seen = vec![false; len];
        for &p in &perm {
            if p >= len || seen[p] {
                return Err(Error::InvalidPermutation { len });
            }
            seen[p] = true;
        }
        Ok(GroupElement { perm })
    }

    pub fn identity(len: usize) -> Self {
        GroupElement {
            perm: (0..len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.perm.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// `g x`: permute an image, `out[i] = x[perm[i]]`.
    pub fn apply(&self, x: &ImageTensor) -> Result<ImageTensor> {
        if self.perm.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.perm.len(),
                got: x.len(),
            });
        }
        let data = self.perm.iter().map(|&p| x.data[p]).collect();
        Ok(ImageTensor {
            data,
            grid: x.grid,
        })
    }

    /// Permute a raw slice into `out` (no allocation); lengths must match.
    pub(crate) fn apply_slice(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(self.perm.len(), x.len());
        debug_assert_eq!(self.perm.len(), out.len());
        for (o, &p) in out.iter_mut().zip(&self.perm) {
            *o = x[p];
        }
    }

    /// `g^{-1} x`, i.e. apply the transpose of `rho(g)`.
    ///
    /// Used by the chain rule: the input gradient of `x -> f(gx)` is
    /// `rho(g)^T (grad f)(gx)`.
    pub(crate) fn apply_inverse_slice(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(self.perm.len(), x.len());
        debug_assert_eq!(self.perm.len(), out.len());
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
    }

    /// Composition `self . other` ("apply `other` first, then `self`").
    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        debug_assert_eq!(self.perm.len(), other.perm.len());
        let perm = self.perm.iter().map(|&p| other.perm[p]).collect();
        GroupElement { perm }
    }

    /// The inverse permutation.
    pub fn inverse(&self) -> GroupElement {
        let mut perm = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            perm[p] = i;
        }
        GroupElement { perm }
    }
}

/// A finite group together with the grid it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    name: GroupName,
    grid: Grid,
    elements: Vec<GroupElement>,
    element_names: Vec<&'static str>,
}

// Grid-to-grid pixel maps, written as "destination pulls from source".
fn perm_from_map(grid: Grid, f: impl Fn(usize, usize) -> (usize, usize)) -> GroupElement {
    let mut perm = Vec::with_capacity(grid.len());
    for r in 0..grid.height {
        for c in 0..grid.width {
            let (sr, sc) = f(r, c);
            perm.push(grid.index(sr, sc));
        }
    }
    GroupElement { perm }
}

impl GroupSpec {
    /// Construct one of the four supported groups acting on `grid`.
    ///
    /// `Klein4` and `Dihedral4` require a square grid.
    pub fn new(name: GroupName, grid: Grid) -> Result<Self> {
        let h = grid.height;
        let w = grid.width;
        if matches!(name, GroupName::Klein4 | GroupName::Dihedral4) && h != w {
            return Err(Error::NonSquareGrid {
                group: name.as_str(),
                height: h,
                width: w,
            });
        }
        let e = GroupElement::identity(grid.len());
        let flip_lr = perm_from_map(grid, |r, c| (r, w - 1 - c));
        let (elements, element_names): (Vec<_>, Vec<_>) = match name {
            GroupName::Trivial => (vec![e], vec!["e"]),
            GroupName::FlipH => (vec![e, flip_lr], vec!["e", "s"]),
            GroupName::Klein4 => {
                let flip_ud = perm_from_map(grid, |r, c| (h - 1 - r, c));
                let rot180 = perm_from_map(grid, |r, c| (h - 1 - r, w - 1 - c));
                (
                    vec![e, flip_lr, flip_ud, rot180],
                    vec!["e", "s", "v", "r2"],
                )
            }
            GroupName::Dihedral4 => {
                let n = h;
                let rot90 = perm_from_map(grid, |r, c| (n - 1 - c, r));
                let rot180 = rot90.compose(&rot90);
                let rot270 = rot180.compose(&rot90);
                let sr = flip_lr.compose(&rot90);
                let sr2 = flip_lr.compose(&rot180);
                let sr3 = flip_lr.compose(&rot270);
                (
                    vec![e, rot90, rot180, rot270, flip_lr, sr, sr2, sr3],
                    vec!["e", "r", "r2", "r3", "s", "sr", "sr2", "sr3"],
                )
            }
        };
        Ok(GroupSpec {
            name,
            grid,
            elements,
            element_names,
        })
    }

    pub fn name(&self) -> GroupName {
        self.name
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Group order.
    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Elements in the fixed canonical order (identity first).
    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn element(&self, idx: usize) -> &GroupElement {
        &self.elements[idx]
    }

    /// Short printable name of an element ("e", "r2", "sr", ...).
    pub fn element_name(&self, idx: usize) -> &'static str {
        self.element_names[idx]
    }

    /// Index of the product `elements[a] . elements[b]`, by table lookup.
    pub fn compose_index(&self, a: usize, b: usize) -> Option<usize> {
        let prod = self.elements[a].compose(&self.elements[b]);
        self.elements.iter().position(|g| *g == prod)
    }

    /// Index of the inverse of `elements[a]`.
    pub fn inverse_index(&self, a: usize) -> Option<usize> {
        let inv = self.elements[a].inverse();
        self.elements.iter().position(|g| *g == inv)
    }

    /// Orbits of the group action on pixel indices; their indicator vectors
    /// span the fixed subspace `V^G`.
    pub fn pixel_orbits(&self) -> Vec<Vec<usize>> {
        let d = self.grid.len();
        let mut seen = vec![false; d];
        let mut orbits = Vec::new();
        for start in 0..d {
            if seen[start] {
                continue;
            }
            let mut orbit: Vec<usize> = self
                .elements
                .iter()
                .map(|g| g.perm[start])
                .collect();
            orbit.sort_unstable();
            orbit.dedup();
            for &i in &orbit {
                seen[i] = true;
            }
            orbits.push(orbit);
        }
        orbits
    }
}

/// The orbit `{g x : g in G}` of an image, deduplicated exactly.
///
/// Members are ordered by first occurrence in group element order, so the
/// base image is always `members[0]`. Images produced by permutation share
/// the same floats, which is why exact equality is the right dedup rule.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub base: ImageTensor,
    pub members: Vec<ImageTensor>,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Compute the orbit of `x` under `group`.
pub fn orbit(x: &ImageTensor, group: &GroupSpec) -> Result<Orbit> {
    x.check_grid(group.grid())?;
    let mut members: Vec<ImageTensor> = Vec::new();
    for g in group.elements() {
        let gx = g.apply(x)?;
        if !members.iter().any(|m| m.data == gx.data) {
            members.push(gx);
        }
    }
    Ok(Orbit {
        base: x.clone(),
        members,
    })
}

/// Orbit average `(1/|G|) sum_g g x` — the orthogonal projection onto `V^G`.
pub fn orbit_average(x: &ImageTensor, group: &GroupSpec) -> Result<ImageTensor> {
    x.check_grid(group.grid())?;
    let d = x.len();
    let mut acc = vec![0.0; d];
    let mut scratch = vec![0.0; d];
    for g in group.elements() {
        g.apply_slice(&x.data, &mut scratch);
        for (a, s) in acc.iter_mut().zip(&scratch) {
            *a += s;
        }
    }
    let inv = 1.0 / group.order() as f64;
    for a in &mut acc {
        *a *= inv;
    }
    Ok(ImageTensor {
        data: acc,
        grid: x.grid,
    })
}

/// All `g` with `||g x - x||_inf <= tol`. With `tol = 0` this is the
/// stabilizer subgroup of `x`.
pub fn stabilizer<'g>(
    x: &ImageTensor,
    group: &'g GroupSpec,
    tol: f64,
) -> Result<Vec<&'g GroupElement>> {
    x.check_grid(group.grid())?;
    let mut scratch = vec![0.0; x.len()];
    let mut fixing = Vec::new();
    for g in group.elements() {
        g.apply_slice(&x.data, &mut scratch);
        let dev = scratch
            .iter()
            .zip(&x.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dev <= tol {
            fixing.push(g);
        }
    }
    Ok(fixing)
}

/// Nonnegative integer weight vectors of length `parts` summing to `total`,
/// in ascending lexicographic order.
fn simplex_lattice(total: u32, parts: usize) -> Vec<Vec<u32>> {
    fn rec(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=total {
            prefix.push(k);
            rec(total - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    rec(total, parts, &mut prefix, &mut out);
    out
}

/// One bin of a discretized orbitope: the barycentric weights (numerators
/// over `resolution`) and the resulting point.
#[derive(Debug, Clone)]
pub struct OrbitopeBin {
    /// Integer weights `k_j` with `sum k_j == resolution`; the convex weight
    /// on orbit member `j` is `k_j / resolution`.
    pub weights: Vec<u32>,
    pub point: ImageTensor,
}

/// Discretize the orbitope (convex hull of an orbit) into the simplex
/// lattice at the given resolution.
///
/// Produces `C(resolution + k - 1, k - 1)` bins for an orbit of size `k`,
/// each the convex combination `sum_j (k_j / resolution) member_j`.
pub fn orbitope_bins(orbit: &Orbit, resolution: u32) -> Result<Vec<OrbitopeBin>> {
    if resolution == 0 {
        return Err(Error::ZeroResolution);
    }
    let k = orbit.members.len();
    let d = orbit.base.len();
    let grids = simplex_lattice(resolution, k);
    let mut bins = Vec::with_capacity(grids.len());
    for weights in grids {
        let mut point = vec![0.0; d];
        for (j, &kj) in weights.iter().enumerate() {
            if kj == 0 {
                continue;
            }
            let w = kj as f64 / resolution as f64;
            for (p, m) in point.iter_mut().zip(&orbit.members[j].data) {
                *p += w * m;
            }
        }
        bins.push(OrbitopeBin {
            weights,
            point: ImageTensor {
                data: point,
                grid: orbit.base.grid,
            },
        });
    }
    Ok(bins)
}

/// Group-invariant distance `d(x, x') = min_g ||x - g x'||_2`.
///
/// Zero exactly when `x` lies in the orbit of `x'`; symmetric because the
/// representation is orthogonal.
pub fn invariant_distance(x: &ImageTensor, other: &ImageTensor, group: &GroupSpec) -> Result<f64> {
    x.check_grid(group.grid())?;
    other.check_grid(group.grid())?;
    let mut scratch = vec![0.0; x.len()];
    let mut best = f64::INFINITY;
    for g in group.elements() {
        g.apply_slice(&other.data, &mut scratch);
        let dist2: f64 = scratch
            .iter()
            .zip(&x.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        best = best.min(dist2);
    }
    Ok(best.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_image(grid: Grid, rng: &mut ChaCha8Rng) -> ImageTensor {
        let data = (0..grid.len()).map(|_| rng.random::<f64>()).collect();
        ImageTensor { data, grid }
    }

    fn all_groups(n: usize) -> Vec<GroupSpec> {
        let grid = Grid::new(n, n);
        [
            GroupName::Trivial,
            GroupName::FlipH,
            GroupName::Klein4,
            GroupName::Dihedral4,
        ]
        .iter()
        .map(|&name| GroupSpec::new(name, grid).unwrap())
        .collect()
    }

    #[test]
    fn group_orders() {
        for g in all_groups(4) {
            assert_eq!(g.order(), g.name().order());
        }
    }

    #[test]
    fn identity_is_first_and_applies_trivially() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for group in all_groups(5) {
            let x = random_image(group.grid(), &mut rng);
            assert!(group.element(0).is_identity());
            assert_eq!(group.element(0).apply(&x).unwrap().data, x.data);
        }
    }

    #[test]
    fn flip_h_on_2x2() {
        let group = GroupSpec::new(GroupName::FlipH, Grid::new(2, 2)).unwrap();
        let x = ImageTensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let flipped = group.element(1).apply(&x).unwrap();
        assert_eq!(flipped.data, vec![2.0, 1.0, 4.0, 3.0]);
    }

    #[test]
    fn rot90_four_times_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let group = GroupSpec::new(GroupName::Dihedral4, Grid::new(4, 4)).unwrap();
        let x = random_image(group.grid(), &mut rng);
        let r = group.element(1);
        let mut y = x.clone();
        for _ in 0..4 {
            y = r.apply(&y).unwrap();
        }
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn closure_identity_and_inverses() {
        for group in all_groups(4) {
            let n = group.order();
            for a in 0..n {
                assert!(group.inverse_index(a).is_some(), "missing inverse");
                for b in 0..n {
                    assert!(group.compose_index(a, b).is_some(), "not closed");
                }
            }
            // composition closure on images: apply(g, apply(h, x)) == apply(gh, x)
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            let x = random_image(group.grid(), &mut rng);
            for a in 0..n {
                for b in 0..n {
                    let gh = group.element(a).compose(group.element(b));
                    let lhs = group
                        .element(a)
                        .apply(&group.element(b).apply(&x).unwrap())
                        .unwrap();
                    let rhs = gh.apply(&x).unwrap();
                    assert_eq!(lhs.data, rhs.data);
                }
            }
        }
    }

    #[test]
    fn permutations_preserve_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for group in all_groups(6) {
            let x = random_image(group.grid(), &mut rng);
            for g in group.elements() {
                let gx = g.apply(&x).unwrap();
                assert!((gx.norm() - x.norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn square_required_for_klein4_and_d4() {
        assert!(GroupSpec::new(GroupName::Klein4, Grid::new(2, 3)).is_err());
        assert!(GroupSpec::new(GroupName::Dihedral4, Grid::new(3, 2)).is_err());
        assert!(GroupSpec::new(GroupName::FlipH, Grid::new(2, 3)).is_ok());
    }

    #[test]
    fn orbit_of_constant_image_is_singleton() {
        let group = GroupSpec::new(GroupName::Dihedral4, Grid::new(3, 3)).unwrap();
        let x = ImageTensor::new(vec![0.5; 9], group.grid()).unwrap();
        assert_eq!(orbit(&x, &group).unwrap().len(), 1);
    }

    #[test]
    fn orbit_of_asymmetric_image_under_flip_has_two_members() {
        let group = GroupSpec::new(GroupName::FlipH, Grid::new(2, 2)).unwrap();
        let x = ImageTensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        assert_eq!(orbit(&x, &group).unwrap().len(), 2);
    }

    #[test]
    fn orbit_matches_brute_force_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let group = GroupSpec::new(GroupName::Dihedral4, Grid::new(4, 4)).unwrap();
        let x = random_image(group.grid(), &mut rng);
        // oracle: apply all 8 permutations explicitly and count distinct images
        let mut distinct: Vec<Vec<f64>> = Vec::new();
        for g in group.elements() {
            let gx = g.apply(&x).unwrap();
            if !distinct.contains(&gx.data) {
                distinct.push(gx.data);
            }
        }
        assert_eq!(orbit(&x, &group).unwrap().len(), distinct.len());
    }

    #[test]
    fn orbit_average_flip_h_2x2() {
        let group = GroupSpec::new(GroupName::FlipH, Grid::new(2, 2)).unwrap();
        let x = ImageTensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let avg = orbit_average(&x, &group).unwrap();
        assert_eq!(avg.data, vec![1.5, 1.5, 3.5, 3.5]);
    }

    #[test]
    fn orbit_average_fixes_v_g_and_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let group = GroupSpec::new(GroupName::Dihedral4, Grid::new(4, 4)).unwrap();
        let x = random_image(group.grid(), &mut rng);

        // oracle: direct mean over all 8 explicitly applied elements
        let d = x.len();
        let mut oracle = vec![0.0; d];
        for g in group.elements() {
            let gx = g.apply(&x).unwrap();
            for (o, v) in oracle.iter_mut().zip(&gx.data) {
                *o += v / 8.0;
            }
        }
        let avg = orbit_average(&x, &group).unwrap();
        for (a, o) in avg.data.iter().zip(&oracle) {
            assert!((a - o).abs() < 1e-14);
        }

        // projection: averaging again changes nothing (up to roundoff),
        // and every group element fixes the average
        let avg2 = orbit_average(&avg, &group).unwrap();
        for (a, b) in avg.data.iter().zip(&avg2.data) {
            assert!((a - b).abs() < 1e-13);
        }
        assert_eq!(stabilizer(&avg, &group, 1e-12).unwrap().len(), 8);
    }

    #[test]
    fn residual_is_orthogonal_to_fixed_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for group in all_groups(4) {
            let x = random_image(group.grid(), &mut rng);
            let avg = orbit_average(&x, &group).unwrap();
            let residual: Vec<f64> = x.data.iter().zip(&avg.data).map(|(a, b)| a - b).collect();
            for pixel_orbit in group.pixel_orbits() {
                let dot: f64 = pixel_orbit.iter().map(|&i| residual[i]).sum();
                assert!(dot.abs() < 1e-10, "residual not orthogonal to V^G basis");
            }
        }
    }

    #[test]
    fn stabilizer_of_constant_image_is_whole_group() {
        let group = GroupSpec::new(GroupName::Dihedral4, Grid::new(3, 3)).unwrap();
        let x = ImageTensor::new(vec![0.25; 9], group.grid()).unwrap();
        assert_eq!(stabilizer(&x, &group, 0.0).unwrap().len(), 8);
    }

    #[test]
    fn stabilizer_of_generic_image_is_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let group = GroupSpec::new(GroupName::Dihedral4, Grid::new(4, 4)).unwrap();
        let x = random_image(group.grid(), &mut rng);
        let stab = stabilizer(&x, &group, 0.0).unwrap();
        assert_eq!(stab.len(), 1);
        assert!(stab[0].is_identity());
    }

    #[test]
    fn orbit_stabilizer_theorem() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for group in all_groups(4) {
            // generic image plus images with engineered partial symmetry
            let generic = random_image(group.grid(), &mut rng);
            let symmetric = orbit_average(&generic, &group).unwrap();
            for x in [&generic, &symmetric] {
                let orb = orbit(x, &group).unwrap().len();
                let stab = stabilizer(x, &group, 0.0).unwrap().len();
                assert_eq!(orb * stab, group.order());
            }
        }
    }

    #[test]
    fn orbitope_bins_for_pair_orbit() {
        let group = GroupSpec::new(GroupName::FlipH, Grid::new(2, 2)).unwrap();
        let x = ImageTensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let orb = orbit(&x, &group).unwrap();
        let bins = orbitope_bins(&orb, 2).unwrap();
        assert_eq!(bins.len(), 3);
        // midpoint bin equals the orbit average
        let avg = orbit_average(&x, &group).unwrap();
        let mid = bins.iter().find(|b| b.weights == vec![1, 1]).unwrap();
        assert_eq!(mid.point.data, avg.data);
    }

    #[test]
    fn orbitope_bin_counts() {
        let group = GroupSpec::new(GroupName::Klein4, Grid::new(3, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = random_image(group.grid(), &mut rng);
        let orb = orbit(&x, &group).unwrap();
        assert_eq!(orb.len(), 4);
        // C(3 + 4 - 1, 4 - 1) = C(6, 3) = 20
        assert_eq!(orbitope_bins(&orb, 3).unwrap().len(), 20);

        let constant = ImageTensor::new(vec![0.1; 9], group.grid()).unwrap();
        let orb1 = orbit(&constant, &group).unwrap();
        assert_eq!(orbitope_bins(&orb1, 7).unwrap().len(), 1);

        assert!(orbitope_bins(&orb, 0).is_err());
    }

    #[test]
    fn invariant_distance_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let group = GroupSpec::new(GroupName::FlipH, Grid::new(3, 3)).unwrap();
        let x = random_image(group.grid(), &mut rng);
        assert_eq!(invariant_distance(&x, &x, &group).unwrap(), 0.0);
        let flipped = group.element(1).apply(&x).unwrap();
        assert_eq!(invariant_distance(&x, &flipped, &group).unwrap(), 0.0);
    }

    #[test]
    fn invariant_distance_matches_enumeration_and_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let group = GroupSpec::new(GroupName::Dihedral4, Grid::new(4, 4)).unwrap();
        let x = random_image(group.grid(), &mut rng);
        let y = random_image(group.grid(), &mut rng);
        // oracle: min over the 8 explicitly enumerated distances
        let oracle = group
            .elements()
            .iter()
            .map(|g| x.distance(&g.apply(&y).unwrap()))
            .fold(f64::INFINITY, f64::min);
        let d = invariant_distance(&x, &y, &group).unwrap();
        assert!((d - oracle).abs() < 1e-12);
        let d_rev = invariant_distance(&y, &x, &group).unwrap();
        assert!((d - d_rev).abs() < 1e-12);
    }
}

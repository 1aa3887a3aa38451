//! Hyperrectangle cells over the normalized unit cube, longest-side
//! trisection, and the depth ledger the optimizers select from.
//!
//! All cells live in `[0,1]^D`. A cell divided `h` times has exactly
//! `h mod D` sides of length `3^-(floor(h/D)+1)` and the rest of length
//! `3^-floor(h/D)`; side lengths are therefore derived from the depth
//! rather than recomputed from bounds, which keeps them exact where the
//! subtraction `hi - lo` would lose all precision for deep cells.

use crate::error::{Error, Result};

/// `3^q` as an `f64`. Exact for every `q` where `3^q` fits in `u128`
/// (the conversion then rounds once), which covers any depth reachable
/// at desk scale.
pub fn pow3(q: u32) -> f64 {
    if q <= 80 {
        3u128.pow(q) as f64
    } else {
        pow3(80) * 3f64.powi(q as i32 - 80)
    }
}

/// `3^-q` with at most one rounding beyond the one in [`pow3`].
pub fn pow3_neg(q: u32) -> f64 {
    1.0 / pow3(q)
}

/// A search box in original (unscaled) coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidConfig(format!(
                "domain needs matching non-empty bounds, got {} lower / {} upper",
                lower.len(),
                upper.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "domain axis {i} requires finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The hypercube `[0,1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Map a point of this domain onto the unit cube.
    pub fn normalize(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.check_len(point)?;
        for (i, &x) in point.iter().enumerate() {
            if x < self.lower[i] || x > self.upper[i] {
                return Err(Error::DomainViolation {
                    point: point.to_vec(),
                    reason: format!(
                        "component {i} = {x} outside [{}, {}]",
                        self.lower[i], self.upper[i]
                    ),
                });
            }
        }
        Ok(point
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - self.lower[i]) / (self.upper[i] - self.lower[i]))
            .collect())
    }

    /// Map a unit-cube point back into this domain.
    pub fn denormalize(&self, unit_point: &[f64]) -> Result<Vec<f64>> {
        self.check_len(unit_point)?;
        for (i, &u) in unit_point.iter().enumerate() {
            if !(0.0..=1.0).contains(&u) {
                return Err(Error::DomainViolation {
                    point: unit_point.to_vec(),
                    reason: format!("component {i} = {u} outside [0, 1]"),
                });
            }
        }
        Ok(unit_point
            .iter()
            .enumerate()
            .map(|(i, &u)| self.lower[i] + u * (self.upper[i] - self.lower[i]))
            .collect())
    }

    fn check_len(&self, point: &[f64]) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DomainViolation {
                point: point.to_vec(),
                reason: format!("expected {} components, got {}", self.dim(), point.len()),
            });
        }
        Ok(())
    }
}

/// A hyperrectangle in normalized coordinates carrying its center value.
///
/// `value` starts as the parent's center value after a trisection (the
/// middle child keeps it for good; the side children get overwritten once
/// their own centers are evaluated, or on commit in the parallel runtime).
#[derive(Debug, Clone)]
pub struct Cell {
    id: u64,
    depth: u32,
    lo: Vec<f64>,
    hi: Vec<f64>,
    center: Vec<f64>,
    value: f64,
}

impl Cell {
    /// The whole unit cube, divided zero times.
    pub fn root(dim: usize, value: f64) -> Self {
        Self {
            id: 0,
            depth: 0,
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
            center: vec![0.5; dim],
            value,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn set_value(&mut self, value: f64) {
        self.value = value;
    }

    /// How many times axis `axis` has been split on the way to this cell.
    fn splits_of_axis(&self, axis: usize) -> u32 {
        let d = self.dim() as u32;
        self.depth / d + u32::from((axis as u32) < self.depth % d)
    }

    /// Exact side length of `axis`: `3^-(splits of that axis)`.
    pub fn side_len(&self, axis: usize) -> f64 {
        pow3_neg(self.splits_of_axis(axis))
    }

    /// Length of the longest side, `3^-floor(depth/D)`.
    pub fn longest_side(&self) -> f64 {
        pow3_neg(self.depth / self.dim() as u32)
    }

    /// Product of the exact side lengths.
    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.side_len(a)).product()
    }

    /// Axis the next trisection splits: one of maximal side length,
    /// lowest index on ties. With cycling longest-side trisection this is
    /// `depth mod D`, but it is derived from the per-axis split counts so
    /// the tie-break stays explicit.
    pub fn split_axis(&self) -> usize {
        let mut best = 0;
        for a in 1..self.dim() {
            if self.splits_of_axis(a) < self.splits_of_axis(best) {
                best = a;
            }
        }
        best
    }
}

/// Trisect `parent` along its longest side into three children of depth
/// `h+1`, consuming ids `first_child_id..first_child_id+3` in
/// (left, center, right) order. Every child starts with the parent's
/// center value; the middle child keeps the parent's center point
/// bit-exactly, so no new evaluation is ever needed for it.
pub fn trisect(parent: &Cell, first_child_id: u64) -> [Cell; 3] {
    let axis = parent.split_axis();
    let child_len = pow3_neg(parent.splits_of_axis(axis) + 1);
    let lo = parent.lo[axis];
    let hi = parent.hi[axis];
    let cut1 = lo + child_len;
    let cut2 = hi - child_len;

    let child = |id_off: u64, lo_a: f64, hi_a: f64, center_a: Option<f64>| -> Cell {
        let mut c = parent.clone();
        c.id = first_child_id + id_off;
        c.depth = parent.depth + 1;
        c.lo[axis] = lo_a;
        c.hi[axis] = hi_a;
        if let Some(x) = center_a {
            c.center[axis] = x;
        }
        c
    };

    let left = child(0, lo, cut1, Some(lo + 0.5 * child_len));
    let center = child(1, cut1, cut2, None);
    let right = child(2, cut2, hi, Some(hi - 0.5 * child_len));
    [left, center, right]
}

/// Position of a cell inside a [`DepthLedger`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRef {
    pub depth: u32,
    pub index: usize,
}

/// The family of depth sets `psi_h` plus the derived superset views
/// `Psi_k = psi_{kw} ∪ … ∪ psi_{kw+w-1}`.
///
/// Each `psi_h` keeps its cells in creation (id) order; cells only ever
/// move from a set to the next by trisection, so together they always
/// partition the unit cube.
#[derive(Debug, Clone)]
pub struct DepthLedger {
    sets: Vec<Vec<Cell>>,
    w: u32,
    next_id: u64,
}

impl DepthLedger {
    /// Ledger holding just the root cell.
    pub fn with_root(dim: usize, root_value: f64, w: u32) -> Self {
        Self {
            sets: vec![vec![Cell::root(dim, root_value)]],
            w,
            next_id: 1,
        }
    }

    pub fn w(&self) -> u32 {
        self.w
    }

    /// Change the local-bias width; superset views are derived, so the
    /// depth sets stay untouched.
    pub fn set_w(&mut self, w: u32) {
        assert!(w >= 1, "superset width must be positive");
        self.w = w;
    }

    /// Largest depth that currently holds at least one cell.
    pub fn max_occupied_depth(&self) -> Option<u32> {
        self.sets
            .iter()
            .rposition(|s| !s.is_empty())
            .map(|h| h as u32)
    }

    pub fn cell(&self, at: CellRef) -> &Cell {
        &self.sets[at.depth as usize][at.index]
    }

    pub fn cell_mut(&mut self, at: CellRef) -> &mut Cell {
        &mut self.sets[at.depth as usize][at.index]
    }

    /// All live cells, shallow depths first.
    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.sets.iter().flatten()
    }

    pub fn cells_mut(&mut self) -> impl Iterator<Item = &mut Cell> {
        self.sets.iter_mut().flatten()
    }

    /// Locate a live cell by id (linear scan; ids are sparse once cells
    /// are divided away).
    pub fn find_by_id(&self, id: u64) -> Option<CellRef> {
        for (h, set) in self.sets.iter().enumerate() {
            // Sets are id-ordered, so a binary search would do; sizes stay
            // small enough that the scan has never shown up in profiles.
            if let Some(index) = set.iter().position(|c| c.id() == id) {
                return Some(CellRef {
                    depth: h as u32,
                    index,
                });
            }
        }
        None
    }

    pub fn len(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells of `psi_h`, in id order.
    pub fn depth_set(&self, h: u32) -> &[Cell] {
        self.sets.get(h as usize).map_or(&[], Vec::as_slice)
    }

    /// Members of the superset `Psi_k`: every cell whose depth `h`
    /// satisfies `kw <= h <= kw + w - 1`.
    pub fn superset_members(&self, k: u32) -> impl Iterator<Item = (CellRef, &Cell)> {
        let lo = k as usize * self.w as usize;
        let hi = lo + self.w as usize; // exclusive
        (lo..hi)
            .filter_map(move |h| self.sets.get(h).map(move |set| (h, set)))
            .flat_map(|(h, set)| {
                set.iter().enumerate().map(move |(index, cell)| {
                    (
                        CellRef {
                            depth: h as u32,
                            index,
                        },
                        cell,
                    )
                })
            })
    }

    /// Remove and return a cell, keeping id order within its set.
    pub fn take(&mut self, at: CellRef) -> Cell {
        self.sets[at.depth as usize].remove(at.index)
    }

    /// Trisect an already-removed parent and insert the children into
    /// `psi_{h+1}`. Returns refs to (left, center, right) in place.
    pub fn divide(&mut self, parent: &Cell) -> [CellRef; 3] {
        let children = trisect(parent, self.next_id);
        self.next_id += 3;
        let depth = parent.depth() + 1;
        while self.sets.len() <= depth as usize {
            self.sets.push(Vec::new());
        }
        let set = &mut self.sets[depth as usize];
        let base = set.len();
        let [left, center, right] = children;
        // Grouped in evaluation order: left, center, right all carry the
        // parent's value until the side centers are evaluated.
        set.push(left);
        set.push(center);
        set.push(right);
        [base, base + 1, base + 2].map(|index| CellRef { depth, index })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn normalize_maps_corners_and_midpoint() {
        let d = Domain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
        assert_eq!(d.normalize(&[-5.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(d.normalize(&[2.5, 7.5]).unwrap(), vec![0.5, 0.5]);
        assert_eq!(d.normalize(&[10.0, 15.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn normalize_rejects_outside_point() {
        let d = Domain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
        assert!(matches!(
            d.normalize(&[11.0, 0.0]),
            Err(Error::DomainViolation { .. })
        ));
    }

    #[test]
    fn denormalize_inverts_normalize() {
        let d = Domain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).unwrap();
        assert_eq!(d.denormalize(&[0.5, 0.5]).unwrap(), vec![2.5, 7.5]);
        assert_eq!(d.denormalize(&[0.0, 0.0]).unwrap(), vec![-5.0, 0.0]);
        assert!(d.denormalize(&[1.2, 0.0]).is_err());
    }

    #[test]
    fn trisect_unit_square_splits_axis_zero() {
        let root = Cell::root(2, 7.0);
        let [l, c, r] = trisect(&root, 1);
        for cell in [&l, &c, &r] {
            assert_eq!(cell.depth(), 1);
            assert_eq!(cell.value(), 7.0);
            assert_eq!(cell.lo()[1], 0.0);
            assert_eq!(cell.hi()[1], 1.0);
        }
        approx(l.lo()[0], 0.0, 0.0);
        approx(l.hi()[0], 1.0 / 3.0, 1e-15);
        approx(c.lo()[0], 1.0 / 3.0, 1e-15);
        approx(c.hi()[0], 2.0 / 3.0, 1e-15);
        approx(r.lo()[0], 2.0 / 3.0, 1e-15);
        approx(r.hi()[0], 1.0, 0.0);
        // Middle child keeps the parent's center bit-exactly.
        assert_eq!(c.center(), root.center());
        assert_eq!(l.center()[1], 0.5);
    }

    #[test]
    fn trisect_depth_one_interval_into_ninths() {
        let root = Cell::root(1, 0.0);
        let [_, mid, _] = trisect(&root, 1);
        let [l, c, r] = trisect(&mid, 4);
        approx(l.lo()[0], 1.0 / 3.0, 1e-15);
        approx(l.hi()[0], 4.0 / 9.0, 1e-15);
        approx(c.lo()[0], 4.0 / 9.0, 1e-15);
        approx(c.hi()[0], 5.0 / 9.0, 1e-15);
        approx(r.lo()[0], 5.0 / 9.0, 1e-15);
        approx(r.hi()[0], 2.0 / 3.0, 1e-15);
        assert!(l.dim() == 1 && c.depth() == 2 && r.depth() == 2);
    }

    #[test]
    fn side_lengths_follow_depth_pattern() {
        // Depth 5 in 2-D: one side split 3 times, the other 2 times.
        let mut cell = Cell::root(2, 0.0);
        for i in 0..5 {
            cell = trisect(&cell, 1 + 3 * i)[1].clone();
        }
        assert_eq!(cell.depth(), 5);
        assert_eq!(cell.side_len(0), pow3_neg(3));
        assert_eq!(cell.side_len(1), pow3_neg(2));
        assert_eq!(cell.longest_side(), pow3_neg(2));
        assert_eq!(cell.split_axis(), 1);
        // Measured extents agree with the exact side lengths.
        approx(cell.hi()[0] - cell.lo()[0], pow3_neg(3), 1e-15);
        approx(cell.hi()[1] - cell.lo()[1], pow3_neg(2), 1e-15);
    }

    #[test]
    fn superset_members_unions_w_consecutive_sets() {
        let mut ledger = DepthLedger::with_root(2, 1.0, 1);
        let root = ledger.take(CellRef { depth: 0, index: 0 });
        ledger.divide(&root); // three cells at depth 1
        let mid = ledger.take(CellRef { depth: 1, index: 1 });
        ledger.divide(&mid); // three cells at depth 2

        // w = 1: Psi_2 is exactly psi_2.
        assert_eq!(ledger.superset_members(2).count(), 3);
        assert_eq!(ledger.superset_members(0).count(), 0);

        // w = 4: Psi_0 covers psi_0..psi_3, i.e. everything here.
        ledger.set_w(4);
        assert_eq!(ledger.superset_members(0).count(), ledger.len());
        assert_eq!(ledger.superset_members(1).count(), 0);
    }

    #[test]
    fn superset_members_of_empty_ledger() {
        let mut ledger = DepthLedger::with_root(1, 0.0, 3);
        ledger.take(CellRef { depth: 0, index: 0 });
        for k in 0..4 {
            assert_eq!(ledger.superset_members(k).count(), 0);
        }
    }

    #[test]
    fn pow3_is_exact_in_integer_range() {
        assert_eq!(pow3(0), 1.0);
        assert_eq!(pow3(1), 3.0);
        assert_eq!(pow3(33), 5559060566555523.0);
        assert_eq!(pow3_neg(2), 1.0 / 9.0);
    }
}

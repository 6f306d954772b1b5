//! Structured node grids over the graph domain in the (y1, y2) chart plane.
//!
//! Nodes sit at `(i h, j h)`. Active nodes carry unknowns, rim nodes carry
//! prescribed values that close the 3x3 stencil of every active node. On
//! shapes with a free-boundary edge (`y2 = 0`) the row `j = -1` is never
//! stored: lookups there are answered by even reflection `u(i, -1) = u(i, 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainShape {
    /// {|y| < r, y2 ≥ 0} with a free-boundary edge on y2 = 0.
    HalfDisk,
    /// {|y| < r}, no free boundary.
    Disk,
    /// Periodic in y1 with period `length`, 0 ≤ y2 < width, free boundary on y2 = 0.
    Strip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Outside,
    Active,
    Rim,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    shape: DomainShape,
    h: f64,
    radius: f64,
    length: f64,
    width: f64,
    i_min: i64,
    j_min: i64,
    ni: usize,
    nj: usize,
    kinds: Vec<NodeKind>,
    areas: Vec<f64>,
    active: Vec<usize>,
}

impl Grid {
    pub fn half_disk(radius: f64, h: f64) -> Result<Self> {
        Self::disk_like(DomainShape::HalfDisk, radius, h)
    }

    pub fn disk(radius: f64, h: f64) -> Result<Self> {
        Self::disk_like(DomainShape::Disk, radius, h)
    }

    fn disk_like(shape: DomainShape, radius: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(radius > 2.0 * h) || !radius.is_finite() {
            return Err(Error::InvalidSurface(format!("need radius > 2h > 0, got radius {radius}, h {h}")));
        }
        let n = radius / h;
        let m = n.ceil() as i64 + 2;
        let j_min = if shape == DomainShape::HalfDisk { 0 } else { -m };
        let ni = (2 * m + 1) as usize;
        let nj = (m - j_min + 1) as usize;
        let mut grid = Grid {
            shape,
            h,
            radius,
            length: 0.0,
            width: 0.0,
            i_min: -m,
            j_min,
            ni,
            nj,
            kinds: vec![NodeKind::Outside; ni * nj],
            areas: vec![0.0; ni * nj],
            active: Vec::new(),
        };
        let n2 = n * n * (1.0 - 1e-12);
        for idx in 0..ni * nj {
            let (i, j) = grid.ij(idx);
            if ((i * i + j * j) as f64) < n2 {
                grid.kinds[idx] = NodeKind::Active;
            }
        }
        grid.mark_rim();
        grid.assign_areas(|y1, y2| {
            let (x0, x1, mut y0, y1t) = (y1 - 0.5 * h, y1 + 0.5 * h, y2 - 0.5 * h, y2 + 0.5 * h);
            if shape == DomainShape::HalfDisk {
                y0 = y0.max(0.0);
            }
            if y1t <= y0 {
                0.0
            } else {
                disk_rect_area(radius, x0, x1, y0, y1t)
            }
        });
        Ok(grid)
    }

    /// Strip of period `length` in y1 and height `width`; both must be
    /// multiples of `h`.
    pub fn strip(length: f64, width: f64, h: f64) -> Result<Self> {
        let n1 = (length / h).round();
        let n2 = (width / h).round();
        if !(h > 0.0) || n1 < 4.0 || n2 < 2.0 || (n1 * h - length).abs() > 1e-9 * length || (n2 * h - width).abs() > 1e-9 * width {
            return Err(Error::InvalidSurface(format!(
                "strip length {length} and width {width} must be multiples of h = {h} (at least 4h and 2h)"
            )));
        }
        let (n1, n2) = (n1 as usize, n2 as usize);
        let mut grid = Grid {
            shape: DomainShape::Strip,
            h,
            radius: 0.0,
            length,
            width,
            i_min: 0,
            j_min: 0,
            ni: n1,
            nj: n2 + 1,
            kinds: vec![NodeKind::Outside; n1 * (n2 + 1)],
            areas: vec![0.0; n1 * (n2 + 1)],
            active: Vec::new(),
        };
        for idx in 0..grid.kinds.len() {
            let (_, j) = grid.ij(idx);
            grid.kinds[idx] = if (j as usize) < n2 { NodeKind::Active } else { NodeKind::Rim };
        }
        grid.assign_areas(|_, y2| {
            let lo = (y2 - 0.5 * h).max(0.0);
            let hi = (y2 + 0.5 * h).min(width);
            (hi - lo).max(0.0) * h
        });
        Ok(grid)
    }

    fn mark_rim(&mut self) {
        let mut rim = Vec::new();
        for idx in 0..self.kinds.len() {
            if self.kinds[idx] != NodeKind::Outside {
                continue;
            }
            let (i, j) = self.ij(idx);
            let near = (-1..=1)
                .any(|di| (-1..=1).any(|dj| matches!(self.raw_index(i + di, j + dj), Some(k) if self.kinds[k] == NodeKind::Active)));
            if near {
                rim.push(idx);
            }
        }
        for idx in rim {
            self.kinds[idx] = NodeKind::Rim;
        }
    }

    /// Each node's cell area inside the domain; cells of non-active nodes are
    /// handed to the nearest active node so the total equals the domain area.
    fn assign_areas(&mut self, cell_area: impl Fn(f64, f64) -> f64) {
        self.active = (0..self.kinds.len()).filter(|&k| self.kinds[k] == NodeKind::Active).collect();
        for idx in 0..self.kinds.len() {
            let (y1, y2) = self.y(idx);
            let a = cell_area(y1, y2);
            if a <= 0.0 {
                continue;
            }
            if self.kinds[idx] == NodeKind::Active {
                self.areas[idx] += a;
            } else if let Some(target) = self.nearest_active(idx) {
                self.areas[target] += a;
            }
        }
    }

    fn nearest_active(&self, idx: usize) -> Option<usize> {
        let (i, j) = self.ij(idx);
        let mut best: Option<(i64, usize)> = None;
        for di in -2..=2_i64 {
            for dj in -2..=2_i64 {
                if let Some(k) = self.resolve(i + di, j + dj) {
                    if self.kinds[k] == NodeKind::Active {
                        let d = di * di + dj * dj;
                        if best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, k));
                        }
                    }
                }
            }
        }
        best.map(|(_, k)| k)
    }

    pub fn shape(&self) -> DomainShape {
        self.shape
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn strip_size(&self) -> (f64, f64) {
        (self.length, self.width)
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, idx: usize) -> NodeKind {
        self.kinds[idx]
    }

    /// y-space quadrature weight of an active node.
    pub fn area(&self, idx: usize) -> f64 {
        self.areas[idx]
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn has_free_boundary(&self) -> bool {
        matches!(self.shape, DomainShape::HalfDisk | DomainShape::Strip)
    }

    pub fn is_periodic(&self) -> bool {
        self.shape == DomainShape::Strip
    }

    pub fn ij(&self, idx: usize) -> (i64, i64) {
        ((idx % self.ni) as i64 + self.i_min, (idx / self.ni) as i64 + self.j_min)
    }

    pub fn y(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (i as f64 * self.h, j as f64 * self.h)
    }

    pub fn lattice_bounds(&self) -> (i64, i64, usize, usize) {
        (self.i_min, self.j_min, self.ni, self.nj)
    }

    pub(crate) fn raw_index(&self, i: i64, j: i64) -> Option<usize> {
        let a = i - self.i_min;
        let b = j - self.j_min;
        if a < 0 || b < 0 || a >= self.ni as i64 || b >= self.nj as i64 {
            None
        } else {
            Some(b as usize * self.ni + a as usize)
        }
    }

    /// Storage index of the node that supplies the value at (i, j), applying
    /// periodic wrap and the even reflection across the free boundary.
    pub fn resolve(&self, i: i64, j: i64) -> Option<usize> {
        let i = if self.is_periodic() { i.rem_euclid(self.ni as i64) } else { i };
        let j = if self.has_free_boundary() && j < 0 { -j } else { j };
        let idx = self.raw_index(i, j)?;
        (self.kinds[idx] != NodeKind::Outside).then_some(idx)
    }

    /// Active nodes on the free-boundary edge, ordered by increasing y1.
    pub fn edge_nodes(&self) -> Vec<usize> {
        if !self.has_free_boundary() {
            return Vec::new();
        }
        (0..self.ni).filter(|&idx| self.kinds[idx] == NodeKind::Active).collect()
    }

    /// Whether an active node touches a rim node (its stencil reaches the
    /// outer boundary of the footprint).
    pub fn touches_rim(&self, idx: usize) -> bool {
        let (i, j) = self.ij(idx);
        (-1..=1).any(|di| (-1..=1).any(|dj| matches!(self.resolve(i + di, j + dj), Some(k) if self.kinds[k] == NodeKind::Rim)))
    }
}

/// Area of the rectangle [x0, x1] × [y0, y1] inside the disk of radius r
/// centred at the origin.
pub fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let mut cuts = vec![x0, x1];
    for c in [-r, r] {
        cuts.push(c);
    }
    for y in [y0, y1] {
        if y.abs() < r {
            let s = (r * r - y * y).sqrt();
            cuts.push(s);
            cuts.push(-s);
        }
    }
    let mut cuts: Vec<f64> = cuts.into_iter().filter(|&c| c >= x0 && c <= x1).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    let chord = |s: f64| (r * r - s * s).max(0.0).sqrt();
    let prim = |s: f64| {
        let s = s.clamp(-r, r);
        0.5 * (s * chord(s) + r * r * (s / r).asin())
    };
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        if m.abs() >= r {
            continue;
        }
        let c = chord(m);
        let top_const = y1 <= c;
        let bot_const = y0 >= -c;
        let top_mid = if top_const { y1 } else { c };
        let bot_mid = if bot_const { y0 } else { -c };
        if top_mid <= bot_mid {
            continue;
        }
        let int_c = prim(b) - prim(a);
        let top = if top_const { y1 * (b - a) } else { int_c };
        let bot = if bot_const { y0 * (b - a) } else { -int_c };
        area += top - bot;
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rect_area_cases() {
        assert!((disk_rect_area(1.0, -2.0, 2.0, -2.0, 2.0) - PI).abs() < 1e-14);
        assert!((disk_rect_area(1.0, -2.0, 2.0, 0.0, 2.0) - PI / 2.0).abs() < 1e-14);
        assert!((disk_rect_area(1.0, -0.1, 0.1, -0.1, 0.1) - 0.04).abs() < 1e-15);
        assert_eq!(disk_rect_area(1.0, 2.0, 3.0, 0.0, 1.0), 0.0);
        // quarter disk
        assert!((disk_rect_area(2.0, 0.0, 5.0, 0.0, 5.0) - PI).abs() < 1e-13);
    }

    #[test]
    fn grid_areas_sum_to_domain_area() {
        let g = Grid::half_disk(1.0, 1.0 / 16.0).unwrap();
        let total: f64 = g.active().iter().map(|&k| g.area(k)).sum();
        assert!((total - PI / 2.0).abs() < 1e-12, "{total}");
        let g = Grid::disk(0.5, 1.0 / 32.0).unwrap();
        let total: f64 = g.active().iter().map(|&k| g.area(k)).sum();
        assert!((total - PI / 4.0).abs() < 1e-12);
        let g = Grid::strip(1.0, 0.5, 1.0 / 8.0).unwrap();
        let total: f64 = g.active().iter().map(|&k| g.area(k)).sum();
        assert!((total - 0.5).abs() < 1e-14);
    }

    #[test]
    fn every_active_stencil_resolves() {
        for g in [Grid::half_disk(0.5, 1.0 / 32.0).unwrap(), Grid::disk(0.3, 0.05).unwrap(), Grid::strip(1.0, 0.25, 0.125).unwrap()] {
            for &k in g.active() {
                let (i, j) = g.ij(k);
                for di in -1..=1 {
                    for dj in -1..=1 {
                        assert!(g.resolve(i + di, j + dj).is_some());
                    }
                }
            }
        }
    }

    #[test]
    fn ghost_row_reflects() {
        let g = Grid::half_disk(0.5, 0.1).unwrap();
        assert_eq!(g.resolve(2, -1), g.resolve(2, 1));
        let s = Grid::strip(1.0, 0.5, 0.125).unwrap();
        assert_eq!(s.resolve(-1, 0), s.resolve(7, 0));
    }

    #[test]
    fn edge_nodes_are_ordered() {
        let g = Grid::half_disk(0.5, 0.1).unwrap();
        let e = g.edge_nodes();
        assert_eq!(e.len(), 9);
        let ys: Vec<f64> = e.iter().map(|&k| g.y(k).0).collect();
        assert!(ys.windows(2).all(|w| w[0] < w[1]));
        assert!(g.y(e[0]).1 == 0.0);
    }
}

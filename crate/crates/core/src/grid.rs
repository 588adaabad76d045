//! Uniform cell-centred Cartesian grids, fields living on them, and the
//! midpoint quadrature / discrete norms every diagnostic is built from.

use std::fmt;
use std::ops::{Index, IndexMut};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Closure applied at the two ends of one grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    Periodic,
    /// Impermeable wall: ghost cells mirror scalars and reflect the normal velocity.
    SlipWall,
    /// Slip wall with an absorbing band next to it.
    Sponge,
}

impl BoundaryKind {
    pub fn is_wall(self) -> bool {
        !matches!(self, BoundaryKind::Periodic)
    }
}

impl FromStr for BoundaryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "periodic" => Ok(BoundaryKind::Periodic),
            "slip-wall" | "slip_wall" | "slipwall" | "wall" => Ok(BoundaryKind::SlipWall),
            "sponge" => Ok(BoundaryKind::Sponge),
            other => Err(Error::UnknownBoundary(other.to_string())),
        }
    }
}

impl fmt::Display for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BoundaryKind::Periodic => "periodic",
            BoundaryKind::SlipWall => "slip-wall",
            BoundaryKind::Sponge => "sponge",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    n: Vec<usize>,
    lengths: Vec<f64>,
    dx: Vec<f64>,
    boundary: Vec<BoundaryKind>,
    strides: Vec<usize>,
}

/// Builds a grid; every axis needs at least four cells and a positive length.
pub fn make_grid(dim: usize, n: &[usize], lengths: &[f64], boundary: &[BoundaryKind]) -> Result<Grid> {
    Grid::new(dim, n, lengths, boundary)
}

impl Grid {
    pub fn new(dim: usize, n: &[usize], lengths: &[f64], boundary: &[BoundaryKind]) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidGrid(format!("dimension must be 2 or 3, got {dim}")));
        }
        if n.len() != dim || lengths.len() != dim || boundary.len() != dim {
            return Err(Error::InvalidGrid(format!("expected {dim} entries for n, lengths and boundary kinds")));
        }
        for (axis, &na) in n.iter().enumerate() {
            if na < 4 {
                return Err(Error::GridTooSmall { axis, n: na });
            }
        }
        for (axis, &l) in lengths.iter().enumerate() {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidGrid(format!("axis {axis} has non-positive length {l}")));
            }
        }
        let has_sponge = boundary.iter().any(|b| *b == BoundaryKind::Sponge);
        if has_sponge && boundary.iter().any(|b| *b == BoundaryKind::Periodic) {
            return Err(Error::InvalidGrid("sponge axes require slip-wall closure on every axis".into()));
        }
        let dx = n.iter().zip(lengths).map(|(&na, &l)| l / na as f64).collect();
        let mut strides = vec![1; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * n[a + 1];
        }
        Ok(Grid { dim, n: n.to_vec(), lengths: lengths.to_vec(), dx, boundary: boundary.to_vec(), strides })
    }

    /// Same cell count, length and boundary kind on every axis.
    pub fn uniform(dim: usize, n: usize, length: f64, kind: BoundaryKind) -> Result<Self> {
        Grid::new(dim, &vec![n; dim], &vec![length; dim], &vec![kind; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn boundary(&self) -> &[BoundaryKind] {
        &self.boundary
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.iter().product()
    }

    pub fn volume(&self) -> f64 {
        self.lengths.iter().product()
    }

    pub fn min_dx(&self) -> f64 {
        self.dx.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn all_periodic(&self) -> bool {
        self.boundary.iter().all(|b| *b == BoundaryKind::Periodic)
    }

    pub fn all_walls(&self) -> bool {
        self.boundary.iter().all(|b| b.is_wall())
    }

    pub fn has_sponge(&self) -> bool {
        self.boundary.iter().any(|b| *b == BoundaryKind::Sponge)
    }

    /// Coordinate of cell centre `i` along `axis`.
    pub fn center(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx[axis]
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn multi_index(&self, mut lin: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in 0..self.dim {
            idx[a] = lin / self.strides[a];
            lin %= self.strides[a];
        }
        idx
    }

    /// Cell-centre coordinates of the cell with linear index `lin`.
    pub fn position(&self, lin: usize) -> Vec<f64> {
        self.multi_index(lin).iter().enumerate().map(|(a, &i)| self.center(a, i)).collect()
    }

    /// Neighbour of `lin` shifted by `offset` cells along `axis`, wrapping on
    /// periodic axes. Returns `None` when the shift leaves a walled axis.
    pub fn neighbor(&self, lin: usize, axis: usize, offset: isize) -> Option<usize> {
        let n = self.n[axis] as isize;
        let i = ((lin / self.strides[axis]) % self.n[axis]) as isize;
        let j = i + offset;
        let j = if (0..n).contains(&j) {
            j
        } else if self.boundary[axis] == BoundaryKind::Periodic {
            j.rem_euclid(n)
        } else {
            return None;
        };
        Some((lin as isize + (j - i) * self.strides[axis] as isize) as usize)
    }

    pub fn zeros(&self) -> ScalarField {
        ScalarField::zeros(self)
    }

    pub fn full_region(&self) -> Region {
        Region { lo: vec![0; self.dim], hi: self.n.clone() }
    }

    /// The box covering the central half of every axis.
    pub fn central_half(&self) -> Region {
        let lo = self.n.iter().map(|&n| n / 4).collect();
        let hi = self.n.iter().map(|&n| n - n / 4).collect();
        Region { lo, hi }
    }

    pub(crate) fn check_field(&self, f: &ScalarField) -> Result<()> {
        if f.shape != self.n {
            return Err(Error::ShapeMismatch(format!("field shape {:?} vs grid {:?}", f.shape, self.n)));
        }
        Ok(())
    }
}

/// Half-open index box `[lo, hi)` per axis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl Region {
    pub fn new(lo: Vec<usize>, hi: Vec<usize>) -> Self {
        Region { lo, hi }
    }

    fn validate(&self, grid: &Grid) -> Result<()> {
        if self.lo.len() != grid.dim() || self.hi.len() != grid.dim() {
            return Err(Error::ShapeMismatch("region dimension differs from grid".into()));
        }
        for a in 0..grid.dim() {
            if self.lo[a] >= self.hi[a] || self.hi[a] > grid.n()[a] {
                return Err(Error::ShapeMismatch(format!(
                    "region [{}, {}) outside axis {a} with {} cells",
                    self.lo[a],
                    self.hi[a],
                    grid.n()[a]
                )));
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    pub fn volume(&self, grid: &Grid) -> f64 {
        self.cell_count() as f64 * grid.cell_volume()
    }

    pub fn contains(&self, idx: &[usize]) -> bool {
        idx.iter().zip(self.lo.iter().zip(&self.hi)).all(|(i, (l, h))| i >= l && i < h)
    }

    /// Linear indices of the cells in the region, in row-major order.
    pub fn cells(&self, grid: &Grid) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.cell_count());
        let mut idx = self.lo.clone();
        loop {
            out.push(grid.linear_index(&idx));
            let mut a = grid.dim();
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] < self.hi[a] {
                    break;
                }
                idx[a] = self.lo[a];
            }
        }
    }
}

/// Cell-centred scalar values in row-major order (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        ScalarField { shape: grid.n().to_vec(), data: vec![value; grid.len()] }
    }

    pub fn zeros_like(other: &ScalarField) -> Self {
        ScalarField { shape: other.shape.clone(), data: vec![0.0; other.data.len()] }
    }

    pub fn from_vec(grid: &Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!("{} values for a grid of {} cells", data.len(), grid.len())));
        }
        Ok(ScalarField { shape: grid.n().to_vec(), data })
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let data = (0..grid.len()).map(|lin| f(&grid.position(lin))).collect();
        ScalarField { shape: grid.n().to_vec(), data }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField { shape: self.shape.clone(), data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.shape, other.shape);
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        ScalarField { shape: self.shape.clone(), data }
    }

    /// `a * self + b * other`
    pub fn lin_comb(&self, a: f64, other: &ScalarField, b: f64) -> Self {
        self.zip_map(other, |x, y| a * x + b * y)
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// One scalar field per spatial component.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    comps: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        VectorField { comps: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect() }
    }

    pub fn zeros_like(other: &VectorField) -> Self {
        VectorField { comps: other.comps.iter().map(ScalarField::zeros_like).collect() }
    }

    pub fn from_components(comps: Vec<ScalarField>) -> Result<Self> {
        if comps.is_empty() || comps.iter().any(|c| c.shape != comps[0].shape) {
            return Err(Error::ShapeMismatch("vector components differ in shape".into()));
        }
        Ok(VectorField { comps })
    }

    /// Samples a vector-valued function at every cell centre.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Vec<f64>) -> Self {
        let mut out = VectorField::zeros(grid);
        for lin in 0..grid.len() {
            let v = f(&grid.position(lin));
            for (a, c) in out.comps.iter_mut().enumerate() {
                c[lin] = v[a];
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn comp(&self, axis: usize) -> &ScalarField {
        &self.comps[axis]
    }

    pub fn comp_mut(&mut self, axis: usize) -> &mut ScalarField {
        &mut self.comps[axis]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.comps
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.comps
    }

    pub fn at(&self, lin: usize) -> Vec<f64> {
        self.comps.iter().map(|c| c[lin]).collect()
    }

    pub fn lin_comb(&self, a: f64, other: &VectorField, b: f64) -> Self {
        VectorField { comps: self.comps.iter().zip(&other.comps).map(|(x, y)| x.lin_comb(a, y, b)).collect() }
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        let mut out = self.comps[0].map(|v| v * v);
        for c in &self.comps[1..] {
            for (o, v) in out.as_mut_slice().iter_mut().zip(c.as_slice()) {
                *o += v * v;
            }
        }
        out.map(f64::sqrt)
    }

    pub fn max_abs(&self) -> f64 {
        self.magnitude().max_abs()
    }

    pub fn all_finite(&self) -> bool {
        self.comps.iter().all(ScalarField::all_finite)
    }
}

/// Neumaier-compensated sum in a fixed order.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0_f64;
    let mut c = 0.0_f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Midpoint-rule integral over the grid or an index sub-box.
pub fn integrate(field: &ScalarField, grid: &Grid, region: Option<&Region>) -> Result<f64> {
    grid.check_field(field)?;
    let vol = grid.cell_volume();
    match region {
        None => Ok(compensated_sum(field.as_slice().iter().copied()) * vol),
        Some(r) => {
            r.validate(grid)?;
            let cells = r.cells(grid);
            Ok(compensated_sum(cells.iter().map(|&c| field[c])) * vol)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

pub fn norm(field: &ScalarField, grid: &Grid, which: NormKind, region: Option<&Region>) -> Result<f64> {
    match which {
        NormKind::L1 => integrate(&field.map(f64::abs), grid, region),
        NormKind::L2 => Ok(integrate(&field.map(|v| v * v), grid, region)?.sqrt()),
        NormKind::Linf => {
            grid.check_field(field)?;
            match region {
                None => Ok(field.max_abs()),
                Some(r) => {
                    r.validate(grid)?;
                    Ok(r.cells(grid).iter().fold(0.0, |m, &c| m.max(field[c].abs())))
                }
            }
        }
    }
}

/// L² norm of a vector field: square root of the integral of |v|².
pub fn vector_l2(field: &VectorField, grid: &Grid, region: Option<&Region>) -> Result<f64> {
    let mut sq = field.comp(0).map(|v| v * v);
    for c in &field.components()[1..] {
        for (o, v) in sq.as_mut_slice().iter_mut().zip(c.as_slice()) {
            *o += v * v;
        }
    }
    Ok(integrate(&sq, grid, region)?.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn spacing_from_cell_count() {
        let g = make_grid(2, &[8, 8], &[1.0, 1.0], &[BoundaryKind::Periodic; 2]).unwrap();
        assert_eq!(g.dx(), &[0.125, 0.125]);
        assert_eq!(g.center(0, 0), 0.0625);

        let g3 = Grid::uniform(3, 16, 2.0 * PI, BoundaryKind::Periodic).unwrap();
        for &d in g3.dx() {
            assert!((d - PI / 8.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_small_or_unknown() {
        let err = make_grid(2, &[3, 3], &[1.0, 1.0], &[BoundaryKind::Periodic; 2]).unwrap_err();
        assert!(err.to_string().contains("grid too small"));
        assert!("outflow".parse::<BoundaryKind>().is_err());
        assert!(Grid::new(2, &[8, 8], &[1.0, 1.0], &[BoundaryKind::Sponge, BoundaryKind::Periodic]).is_err());
    }

    #[test]
    fn quadrature_basics() {
        let g = Grid::uniform(2, 8, 1.0, BoundaryKind::Periodic).unwrap();
        assert!((integrate(&ScalarField::constant(&g, 1.0), &g, None).unwrap() - 1.0).abs() < 1e-15);

        let g2 = Grid::new(2, &[4, 6], &[2.0, 3.0], &[BoundaryKind::SlipWall; 2]).unwrap();
        let v = integrate(&ScalarField::constant(&g2, 2.5), &g2, None).unwrap();
        assert!((v - 15.0).abs() < 1e-13);

        let g64 = Grid::uniform(2, 64, 1.0, BoundaryKind::Periodic).unwrap();
        let s = ScalarField::from_fn(&g64, |x| (2.0 * PI * x[0]).sin());
        assert!(integrate(&s, &g64, None).unwrap().abs() < 1e-12);
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = Grid::uniform(2, 8, 1.0, BoundaryKind::Periodic).unwrap();
        let z = g.zeros();
        for k in [NormKind::L1, NormKind::L2, NormKind::Linf] {
            assert_eq!(norm(&z, &g, k, None).unwrap(), 0.0);
        }
        let c = ScalarField::constant(&g, -3.0);
        for k in [NormKind::L1, NormKind::L2, NormKind::Linf] {
            assert!((norm(&c, &g, k, None).unwrap() - 3.0).abs() < 1e-14);
        }
        let mut spike = g.zeros();
        spike[17] = 1.0;
        assert_eq!(norm(&spike, &g, NormKind::L1, None).unwrap(), 1.0 / 64.0);
    }

    #[test]
    fn region_restriction() {
        let g = Grid::uniform(2, 8, 1.0, BoundaryKind::Periodic).unwrap();
        let r = g.central_half();
        assert_eq!(r.cell_count(), 16);
        let one = ScalarField::constant(&g, 1.0);
        assert!((integrate(&one, &g, Some(&r)).unwrap() - 0.25).abs() < 1e-15);
        assert!(integrate(&one, &g, Some(&Region::new(vec![0, 0], vec![9, 2]))).is_err());
    }

    #[test]
    fn neighbors_wrap_or_stop() {
        let g = Grid::new(2, &[4, 5], &[1.0, 1.0], &[BoundaryKind::Periodic, BoundaryKind::SlipWall]).unwrap();
        let lin = g.linear_index(&[0, 0]);
        assert_eq!(g.neighbor(lin, 0, -1), Some(g.linear_index(&[3, 0])));
        assert_eq!(g.neighbor(lin, 1, -1), None);
        assert_eq!(g.neighbor(lin, 1, 2), Some(g.linear_index(&[0, 2])));
    }
}

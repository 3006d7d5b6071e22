//! Uniform Cartesian grids, nodal scalar fields, and the geometric
//! primitives shared by every other module.
//!
//! Grids live on axis-aligned boxes in one or two dimensions. Nodes sit at
//! `origin + i * spacing` per axis — coordinates are always produced by
//! multiplication, never by accumulation, so node positions are exactly
//! reproducible. Balls are handled as masks over the box grid; there is no
//! body-fitted meshing anywhere.

use crate::error::{ApError, Result};

/// Minimum number of cells per axis for a usable grid.
pub const MIN_CELLS_PER_AXIS: usize = 8;

/// A uniform node-centered grid on an axis-aligned box.
///
/// For a 1D grid only the first component of each array is meaningful.
/// A grid with `cells` cells per axis carries `cells + 1` nodes per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dim: usize,
    cells: [usize; 2],
    origin: [f64; 2],
    spacing: [f64; 2],
}

impl GridSpec {
    pub fn new(dim: usize, cells: [usize; 2], origin: [f64; 2], spacing: [f64; 2]) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(ApError::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        for k in 0..dim {
            if cells[k] < MIN_CELLS_PER_AXIS {
                return Err(ApError::InvalidGrid(format!(
                    "axis {k}: need >= {MIN_CELLS_PER_AXIS} cells, got {}",
                    cells[k]
                )));
            }
            if !(spacing[k].is_finite() && spacing[k] > 0.0) {
                return Err(ApError::InvalidGrid(format!("axis {k}: spacing must be positive")));
            }
            if !origin[k].is_finite() {
                return Err(ApError::InvalidGrid(format!("axis {k}: origin must be finite")));
            }
        }
        let mut cells = cells;
        let mut origin = origin;
        let mut spacing = spacing;
        if dim == 1 {
            cells[1] = 0;
            origin[1] = 0.0;
            spacing[1] = 1.0;
        }
        Ok(GridSpec { dim, cells, origin, spacing })
    }

    /// Grid over the interval `[lo, hi]` with `cells` cells.
    pub fn interval(cells: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(ApError::InvalidGrid("interval needs hi > lo".into()));
        }
        let h = (hi - lo) / cells as f64;
        GridSpec::new(1, [cells, 0], [lo, 0.0], [h, 1.0])
    }

    /// Grid over the box `[lo0, hi0] x [lo1, hi1]` with `cells` cells per axis.
    pub fn square(cells: [usize; 2], lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        for k in 0..2 {
            if !(hi[k] > lo[k]) {
                return Err(ApError::InvalidGrid("box needs hi > lo on each axis".into()));
            }
        }
        let h = [(hi[0] - lo[0]) / cells[0] as f64, (hi[1] - lo[1]) / cells[1] as f64];
        GridSpec::new(2, cells, lo, h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cells(&self, axis: usize) -> usize {
        self.cells[axis]
    }

    pub fn nodes(&self, axis: usize) -> usize {
        self.cells[axis] + 1
    }

    pub fn node_count(&self) -> usize {
        if self.dim == 1 {
            self.nodes(0)
        } else {
            self.nodes(0) * self.nodes(1)
        }
    }

    pub fn origin(&self, axis: usize) -> f64 {
        self.origin[axis]
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spacing[axis]
    }

    /// Smallest spacing over the active axes.
    pub fn h_min(&self) -> f64 {
        (0..self.dim).map(|k| self.spacing[k]).fold(f64::INFINITY, f64::min)
    }

    /// Volume of one grid cell (`h` in 1D, `h0*h1` in 2D).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|k| self.spacing[k]).product()
    }

    /// Upper corner of the box.
    pub fn upper(&self, axis: usize) -> f64 {
        self.origin[axis] + self.spacing[axis] * self.cells[axis] as f64
    }

    /// Linear index of the node with per-axis indices `idx`.
    /// Storage is row-major with the first axis fastest.
    #[inline]
    pub fn index(&self, idx: [usize; 2]) -> usize {
        if self.dim == 1 {
            idx[0]
        } else {
            idx[1] * self.nodes(0) + idx[0]
        }
    }

    /// Per-axis indices of the node with linear index `lin`.
    #[inline]
    pub fn unindex(&self, lin: usize) -> [usize; 2] {
        if self.dim == 1 {
            [lin, 0]
        } else {
            let nx = self.nodes(0);
            [lin % nx, lin / nx]
        }
    }

    /// Physical coordinates of a node. Computed by multiplication so that
    /// repeated calls are bit-identical.
    #[inline]
    pub fn node_coord(&self, idx: [usize; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.spacing[0] * idx[0] as f64,
            if self.dim == 2 { self.origin[1] + self.spacing[1] * idx[1] as f64 } else { 0.0 },
        ]
    }

    /// True for nodes on the boundary of the box.
    #[inline]
    pub fn is_boundary(&self, idx: [usize; 2]) -> bool {
        if idx[0] == 0 || idx[0] == self.cells[0] {
            return true;
        }
        self.dim == 2 && (idx[1] == 0 || idx[1] == self.cells[1])
    }

    /// True if `p` lies in the closed box, with a tiny tolerance so that
    /// points constructed to land exactly on a face are not rejected by
    /// floating-point dust.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        for k in 0..self.dim {
            let tol = 1e-9 * self.spacing[k];
            if p[k] < self.origin[k] - tol || p[k] > self.upper(k) + tol {
                return false;
            }
        }
        true
    }

    /// Iterate over all per-axis node indices in storage order.
    pub fn iter_nodes(&self) -> impl Iterator<Item = [usize; 2]> + '_ {
        let nx = self.nodes(0);
        let ny = if self.dim == 2 { self.nodes(1) } else { 1 };
        (0..ny).flat_map(move |j| (0..nx).map(move |i| [i, j]))
    }

    /// Euclidean distance between two points, using only active axes.
    pub fn distance(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let mut s = 0.0;
        for k in 0..self.dim {
            let d = a[k] - b[k];
            s += d * d;
        }
        s.sqrt()
    }
}

/// A closed ball used to select grid regions. In 1D this is an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BallRegion {
    pub center: [f64; 2],
    pub radius: f64,
}

impl BallRegion {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(ApError::InvalidParam("ball radius must be positive".into()));
        }
        if !center[0].is_finite() || !center[1].is_finite() {
            return Err(ApError::InvalidParam("ball center must be finite".into()));
        }
        Ok(BallRegion { center, radius })
    }

    /// Closed-ball membership with a relative slack of 1e-12 so that nodes
    /// placed exactly on the sphere by construction stay inside.
    #[inline]
    pub fn contains(&self, grid: &GridSpec, p: [f64; 2]) -> bool {
        grid.distance(p, self.center) <= self.radius * (1.0 + 1e-12)
    }

    /// True if the closed ball lies inside the grid box.
    pub fn inside(&self, grid: &GridSpec) -> bool {
        for k in 0..grid.dim() {
            let tol = 1e-9 * grid.spacing(k);
            if self.center[k] - self.radius < grid.origin(k) - tol
                || self.center[k] + self.radius > grid.upper(k) + tol
            {
                return false;
            }
        }
        true
    }
}

/// Nodal values on a [`GridSpec`], stored row-major with the first axis
/// fastest. All values are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(ApError::GridMismatch(format!(
                "expected {} values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ApError::NonFinite(format!("value at linear index {i}")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.node_count();
        ScalarField { grid, values: vec![0.0; n] }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(ApError::NonFinite("constant field value".into()));
        }
        let n = grid.node_count();
        Ok(ScalarField { grid, values: vec![c; n] })
    }

    /// Sample `f` at every node.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        let values: Vec<f64> = grid.iter_nodes().map(|idx| f(grid.node_coord(idx))).collect();
        ScalarField::new(grid, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn at(&self, idx: [usize; 2]) -> f64 {
        self.values[self.grid.index(idx)]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Multilinear interpolation at a point of the closed box.
    ///
    /// Queries are clamped to the box (callers check domain membership where
    /// it matters). When all stencil corners carry the same value that value
    /// is returned exactly — constant fields interpolate without rounding
    /// dust, which downstream code relies on for exact-zero error terms.
    pub fn interp(&self, p: [f64; 2]) -> f64 {
        let g = &self.grid;
        let (i0, fx) = locate(p[0], g.origin(0), g.spacing(0), g.cells(0));
        if g.dim() == 1 {
            let a = self.values[i0];
            let b = self.values[i0 + 1];
            if a == b {
                return a;
            }
            return a + fx * (b - a);
        }
        let (j0, fy) = locate(p[1], g.origin(1), g.spacing(1), g.cells(1));
        let nx = g.nodes(0);
        let v00 = self.values[j0 * nx + i0];
        let v10 = self.values[j0 * nx + i0 + 1];
        let v01 = self.values[(j0 + 1) * nx + i0];
        let v11 = self.values[(j0 + 1) * nx + i0 + 1];
        if v00 == v10 && v00 == v01 && v00 == v11 {
            return v00;
        }
        let a = v00 + fx * (v10 - v00);
        let b = v01 + fx * (v11 - v01);
        a + fy * (b - a)
    }
}

/// Cell index and fractional offset of `x` along one axis, clamped to the box.
#[inline]
fn locate(x: f64, origin: f64, h: f64, cells: usize) -> (usize, f64) {
    let t = (x - origin) / h;
    let t = t.clamp(0.0, cells as f64);
    let mut i = t.floor() as usize;
    if i >= cells {
        i = cells - 1;
    }
    (i, t - i as f64)
}

/// The pair of spatially varying coefficients `(gamma, delta)` together with
/// the bounds the theory requires: `0 < gamma_lo <= gamma <= gamma_hi <= 1`
/// pointwise and `delta >= delta_lo > 0`. Optional Hölder metadata describes
/// the modulus of continuity of `gamma` when known.
#[derive(Debug, Clone)]
pub struct CoefficientPair {
    pub gamma: ScalarField,
    pub delta: ScalarField,
    pub gamma_lo: f64,
    pub gamma_hi: f64,
    pub delta_lo: f64,
    pub holder_mu: Option<f64>,
    pub holder_seminorm: Option<f64>,
}

impl CoefficientPair {
    pub fn new(gamma: ScalarField, delta: ScalarField) -> Result<Self> {
        if gamma.grid() != delta.grid() {
            return Err(ApError::GridMismatch("gamma and delta on different grids".into()));
        }
        let gamma_lo = gamma.min();
        let gamma_hi = gamma.max();
        let delta_lo = delta.min();
        if !(gamma_lo > 0.0 && gamma_hi <= 1.0) {
            return Err(ApError::InvalidCoefficients(format!(
                "gamma range [{gamma_lo}, {gamma_hi}] violates 0 < gamma <= 1"
            )));
        }
        if !(delta_lo > 0.0) {
            return Err(ApError::InvalidCoefficients(format!(
                "delta must be bounded below by a positive constant, min is {delta_lo}"
            )));
        }
        Ok(CoefficientPair {
            gamma,
            delta,
            gamma_lo,
            gamma_hi,
            delta_lo,
            holder_mu: None,
            holder_seminorm: None,
        })
    }

    pub fn with_holder(mut self, mu: f64, seminorm: f64) -> Result<Self> {
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(ApError::InvalidParam("holder exponent must lie in (0, 1]".into()));
        }
        if !(seminorm >= 0.0) {
            return Err(ApError::InvalidParam("holder seminorm must be nonnegative".into()));
        }
        self.holder_mu = Some(mu);
        self.holder_seminorm = Some(seminorm);
        Ok(self)
    }

    /// Constant-coefficient pair on `grid`.
    pub fn constant(grid: &GridSpec, gamma0: f64, delta0: f64) -> Result<Self> {
        let gamma = ScalarField::constant(grid.clone(), gamma0)?;
        let delta = ScalarField::constant(grid.clone(), delta0)?;
        CoefficientPair::new(gamma, delta)
    }

    pub fn grid(&self) -> &GridSpec {
        self.gamma.grid()
    }

    /// Interpolated exponent at an arbitrary point.
    pub fn gamma_at(&self, p: [f64; 2]) -> f64 {
        self.gamma.interp(p)
    }

    pub fn delta_at(&self, p: [f64; 2]) -> f64 {
        self.delta.interp(p)
    }
}

/// Pointwise extrema of the exponent over the nodes of `region`.
///
/// The region is intersected with the grid; it errors only when that
/// intersection holds no node at all.
pub fn exponent_extrema(coeffs: &CoefficientPair, region: &BallRegion) -> Result<(f64, f64)> {
    let grid = coeffs.grid();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut seen = false;
    for idx in grid.iter_nodes() {
        let p = grid.node_coord(idx);
        if region.contains(grid, p) {
            let g = coeffs.gamma.at(idx);
            lo = lo.min(g);
            hi = hi.max(g);
            seen = true;
        }
    }
    if !seen {
        return Err(ApError::RegionOutsideDomain(format!(
            "ball of radius {} at ({}, {}) contains no grid node",
            region.radius, region.center[0], region.center[1]
        )));
    }
    Ok((lo, hi))
}

/// Componentwise finite-difference gradient: central differences at interior
/// nodes, one-sided at box faces. Exact for affine fields.
pub fn finite_difference_gradient(field: &ScalarField) -> Vec<ScalarField> {
    let grid = field.grid().clone();
    let mut out = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let h = grid.spacing(axis);
        let n_axis = grid.nodes(axis);
        let mut vals = vec![0.0; grid.node_count()];
        for idx in grid.iter_nodes() {
            let i = idx[axis];
            let mut lo = idx;
            let mut hi = idx;
            let d = if i == 0 {
                hi[axis] = i + 1;
                (field.at(hi) - field.at(lo)) / h
            } else if i == n_axis - 1 {
                lo[axis] = i - 1;
                (field.at(hi) - field.at(lo)) / h
            } else {
                lo[axis] = i - 1;
                hi[axis] = i + 1;
                (field.at(hi) - field.at(lo)) / (2.0 * h)
            };
            vals[grid.index(idx)] = d;
        }
        out.push(ScalarField::new(grid.clone(), vals).expect("gradient of finite field is finite"));
    }
    out
}

/// Default number of angular samples for sphere suprema and quadrature in 2D.
pub const DEFAULT_SPHERE_SAMPLES: usize = 512;

/// Supremum of `field` over the sphere of radius `r` about `center`,
/// estimated from interpolated samples.
///
/// In 1D the sphere is the two endpoints and is evaluated exactly; in 2D
/// `samples >= 16` equally spaced directions are interpolated. Errors when
/// the sphere leaves the grid box.
pub fn sup_on_sphere(field: &ScalarField, center: [f64; 2], r: f64, samples: usize) -> Result<f64> {
    let grid = field.grid();
    if !(r.is_finite() && r > 0.0) {
        return Err(ApError::InvalidParam("sphere radius must be positive".into()));
    }
    let ball = BallRegion::new(center, r)?;
    if !ball.inside(grid) {
        return Err(ApError::RegionOutsideDomain(format!(
            "sphere of radius {r} at ({}, {}) leaves the grid box",
            center[0], center[1]
        )));
    }
    if grid.dim() == 1 {
        let a = field.interp([center[0] - r, 0.0]);
        let b = field.interp([center[0] + r, 0.0]);
        return Ok(a.max(b));
    }
    if samples < 16 {
        return Err(ApError::InvalidParam(format!(
            "need >= 16 angular samples in 2D, got {samples}"
        )));
    }
    let mut best = f64::NEG_INFINITY;
    for k in 0..samples {
        let th = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let p = [center[0] + r * th.cos(), center[1] + r * th.sin()];
        best = best.max(field.interp(p));
    }
    Ok(best)
}

/// Supremum of `field` over the nodes of the closed ball `B_r(center)`.
pub fn sup_on_ball(field: &ScalarField, center: [f64; 2], r: f64) -> Result<f64> {
    let grid = field.grid();
    let ball = BallRegion::new(center, r)?;
    if !ball.inside(grid) {
        return Err(ApError::RegionOutsideDomain(format!(
            "ball of radius {r} at ({}, {}) leaves the grid box",
            center[0], center[1]
        )));
    }
    let mut best = f64::NEG_INFINITY;
    let mut seen = false;
    for_nodes_in_ball(grid, &ball, |idx, _| {
        best = best.max(field.at(idx));
        seen = true;
    });
    if !seen {
        return Err(ApError::RegionOutsideDomain(
            "ball contains no grid node; radius below grid resolution".into(),
        ));
    }
    Ok(best)
}

/// Visit every node of the closed ball without scanning the whole grid.
pub(crate) fn for_nodes_in_ball(
    grid: &GridSpec,
    ball: &BallRegion,
    mut f: impl FnMut([usize; 2], [f64; 2]),
) {
    let lo0 = axis_floor(grid, 0, ball.center[0] - ball.radius);
    let hi0 = axis_ceil(grid, 0, ball.center[0] + ball.radius);
    let (lo1, hi1) = if grid.dim() == 2 {
        (axis_floor(grid, 1, ball.center[1] - ball.radius), axis_ceil(grid, 1, ball.center[1] + ball.radius))
    } else {
        (0, 0)
    };
    for j in lo1..=hi1 {
        for i in lo0..=hi0 {
            let idx = [i, j];
            let p = grid.node_coord(idx);
            if ball.contains(grid, p) {
                f(idx, p);
            }
        }
    }
}

fn axis_floor(grid: &GridSpec, axis: usize, x: f64) -> usize {
    let t = ((x - grid.origin(axis)) / grid.spacing(axis)).floor();
    (t.max(0.0) as usize).min(grid.cells(axis))
}

fn axis_ceil(grid: &GridSpec, axis: usize, x: f64) -> usize {
    let t = ((x - grid.origin(axis)) / grid.spacing(axis)).ceil();
    (t.max(0.0) as usize).min(grid.cells(axis))
}

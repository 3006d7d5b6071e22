//! Free-boundary extraction and geometric diagnostics.
//!
//! Everything here reads a solved field and measures the structure of its
//! positivity set: where the free boundary sits, how fast the solution grows
//! away from it (and whether that matches the predicted exponent
//! `β = 2/(2−γ)`), how much of a ball the positivity set fills, how porous
//! the boundary is, and a box-counting estimate of its dimension.

use std::collections::HashSet;

use crate::error::{ApError, Result};
use crate::grid::{
    finite_difference_gradient, sup_on_ball, sup_on_sphere, BallRegion, CoefficientPair,
    GridSpec, ScalarField, DEFAULT_SPHERE_SAMPLES,
};

/// Nodes where the field exceeds the floor.
#[derive(Debug, Clone)]
pub struct PositivitySet {
    grid: GridSpec,
    mask: Vec<bool>,
    floor: f64,
}

impl PositivitySet {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn is_positive(&self, idx: [usize; 2]) -> bool {
        self.mask[self.grid.index(idx)]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Cells (1D intervals / 2D squares) whose corners straddle the floor,
/// stored by their centers.
#[derive(Debug, Clone)]
pub struct FreeBoundary {
    grid: GridSpec,
    cells: Vec<[f64; 2]>,
}

impl FreeBoundary {
    pub(crate) fn from_cells(grid: GridSpec, cells: Vec<[f64; 2]>) -> Self {
        FreeBoundary { grid, cells }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Cell centers, in row-major scan order.
    pub fn cells(&self) -> &[[f64; 2]] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Euclidean distance from `p` to the nearest boundary cell center
    /// (infinite when the boundary is empty).
    pub fn nearest_distance(&self, p: [f64; 2]) -> f64 {
        self.cells
            .iter()
            .map(|c| self.grid.distance(*c, p))
            .fold(f64::INFINITY, f64::min)
    }

    /// At most `max` cell centers, evenly spread through the scan order.
    /// Deterministic.
    pub fn subsample(&self, max: usize) -> Vec<[f64; 2]> {
        if self.cells.len() <= max || max == 0 {
            return self.cells.clone();
        }
        (0..max)
            .map(|k| self.cells[k * self.cells.len() / max])
            .collect()
    }
}

/// Threshold below which discrete values cannot be told apart from zero:
/// `10·h^{2/(2−γ_hi)}`, the growth scale of the solution one cell from its
/// free boundary at the largest exponent present.
pub fn default_positivity_floor(grid: &GridSpec, coeffs: &CoefficientPair) -> f64 {
    10.0 * grid.h_min().powf(2.0 / (2.0 - coeffs.gamma_hi))
}

fn cell_center(grid: &GridSpec, cell: [usize; 2]) -> [f64; 2] {
    let p = grid.node_coord(cell);
    [
        p[0] + 0.5 * grid.spacing(0),
        if grid.dim() == 2 { p[1] + 0.5 * grid.spacing(1) } else { 0.0 },
    ]
}

/// Cells where the mask takes both values over the cell's corners.
fn mask_boundary_cells(grid: &GridSpec, mask: &[bool]) -> Vec<[f64; 2]> {
    let mut cells = Vec::new();
    let nx = grid.cells(0);
    let ny = if grid.dim() == 2 { grid.cells(1) } else { 1 };
    for j in 0..ny {
        for i in 0..nx {
            let corners: &[[usize; 2]] = if grid.dim() == 1 {
                &[[i, 0], [i + 1, 0]]
            } else {
                &[[i, j], [i + 1, j], [i, j + 1], [i + 1, j + 1]]
            };
            let mut pos = false;
            let mut nonpos = false;
            for c in corners {
                if mask[grid.index(*c)] {
                    pos = true;
                } else {
                    nonpos = true;
                }
            }
            if pos && nonpos {
                cells.push(cell_center(grid, [i, j]));
            }
        }
    }
    cells
}

/// Threshold the field at `floor` and locate the cells its positivity set
/// crosses. A field everywhere above the floor has an empty boundary; a
/// field nowhere above it is an error.
pub fn extract_free_boundary(
    u: &ScalarField,
    floor: f64,
) -> Result<(PositivitySet, FreeBoundary)> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(ApError::InvalidParam("positivity floor must be positive".into()));
    }
    let grid = u.grid().clone();
    let mask: Vec<bool> = u.values().iter().map(|v| *v > floor).collect();
    if !mask.iter().any(|m| *m) {
        return Err(ApError::EmptyPositivitySet);
    }
    let cells = mask_boundary_cells(&grid, &mask);
    Ok((
        PositivitySet { grid: grid.clone(), mask, floor },
        FreeBoundary::from_cells(grid, cells),
    ))
}

/// Growth diagnostics about one center: per-radius ball and sphere suprema,
/// the fitted log-log exponent, and the two constants the growth and
/// non-degeneracy bounds control.
#[derive(Debug, Clone)]
pub struct GrowthReport {
    pub center: [f64; 2],
    pub target_beta: f64,
    /// Radii that survived the zero-sup filter, increasing.
    pub radii: Vec<f64>,
    pub sup_ball: Vec<f64>,
    pub sup_sphere: Vec<f64>,
    /// Least-squares slope of `ln sup_ball` against `ln r`.
    pub fitted_beta: f64,
    /// `min_r sup_sphere / r^target`.
    pub nondeg_constant: f64,
    /// `max_r sup_ball / r^target`.
    pub growth_constant: f64,
}

impl GrowthReport {
    /// Root-mean-square residual of the free least-squares line through
    /// `(ln r, ln sup_ball)`.
    pub fn fit_residual(&self) -> f64 {
        log_fit(&self.radii, &self.sup_ball, None).1
    }

    /// RMS residual of the best line with the slope pinned to `beta`.
    pub fn constrained_fit_residual(&self, beta: f64) -> f64 {
        log_fit(&self.radii, &self.sup_ball, Some(beta)).1
    }
}

/// Slope (free or pinned) and RMS residual of `ln y` against `ln x`.
fn log_fit(xs: &[f64], ys: &[f64], pinned_slope: Option<f64>) -> (f64, f64) {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let slope = pinned_slope.unwrap_or_else(|| {
        let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    });
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum();
    (slope, (ss / n).sqrt())
}

/// Measure how the field grows away from `z0` over a geometric radii
/// ladder: fit the exponent from ball suprema and extract the two constants
/// `sup_{B_r} u / r^β` (max) and `sup_{∂B_r} u / r^β` (min). Radii whose
/// ball supremum vanishes carry no information and are dropped; fewer than
/// three survivors is an error.
pub fn fit_growth_exponent(
    u: &ScalarField,
    z0: [f64; 2],
    target_beta: f64,
    r_min: f64,
    r_max: f64,
    count: usize,
) -> Result<GrowthReport> {
    let grid = u.grid();
    if !(target_beta.is_finite() && target_beta > 0.0) {
        return Err(ApError::InvalidParam("target exponent must be positive".into()));
    }
    if !(r_min >= 4.0 * grid.h_min()) {
        return Err(ApError::InvalidParam(format!(
            "r_min {r_min} below stencil resolution 4h = {}",
            4.0 * grid.h_min()
        )));
    }
    if !(r_max > r_min) || count < 3 {
        return Err(ApError::InvalidParam(
            "need r_max > r_min and at least 3 ladder radii".into(),
        ));
    }
    let ratio = (r_max / r_min).powf(1.0 / (count - 1) as f64);
    let mut radii = Vec::new();
    let mut sup_ball = Vec::new();
    let mut sup_sphere = Vec::new();
    for k in 0..count {
        let r = r_min * ratio.powi(k as i32);
        let sb = sup_on_ball(u, z0, r)?;
        let ss = sup_on_sphere(u, z0, r, DEFAULT_SPHERE_SAMPLES)?;
        if sb <= 0.0 {
            continue;
        }
        radii.push(r);
        sup_ball.push(sb);
        sup_sphere.push(ss);
    }
    if radii.len() < 3 {
        return Err(ApError::UnderResolved(format!(
            "only {} radii with positive supremum around ({}, {})",
            radii.len(),
            z0[0],
            z0[1]
        )));
    }
    let (fitted_beta, _) = log_fit(&radii, &sup_ball, None);
    let nondeg_constant = radii
        .iter()
        .zip(&sup_sphere)
        .map(|(r, s)| s / r.powf(target_beta))
        .fold(f64::INFINITY, f64::min);
    let growth_constant = radii
        .iter()
        .zip(&sup_ball)
        .map(|(r, s)| s / r.powf(target_beta))
        .fold(0.0f64, f64::max);
    Ok(GrowthReport {
        center: z0,
        target_beta,
        radii,
        sup_ball,
        sup_sphere,
        fitted_beta,
        nondeg_constant,
        growth_constant,
    })
}

/// `max |D_h u|² / u^{γ(x)}` over nodes above the floor — the discrete form
/// of the pointwise gradient bound, which predicts this ratio stays bounded
/// up to the free boundary.
pub fn gradient_growth_ratio(
    u: &ScalarField,
    coeffs: &CoefficientPair,
    floor: f64,
) -> Result<f64> {
    if u.grid() != coeffs.grid() {
        return Err(ApError::GridMismatch(
            "field and coefficients live on different grids".into(),
        ));
    }
    if !(floor > 0.0) {
        return Err(ApError::InvalidParam("positivity floor must be positive".into()));
    }
    let grid = u.grid();
    let grads = finite_difference_gradient(u);
    let mut best: Option<f64> = None;
    for idx in grid.iter_nodes() {
        let lin = grid.index(idx);
        let v = u.values()[lin];
        if v <= floor {
            continue;
        }
        let mut g2 = 0.0;
        for comp in &grads {
            let d = comp.values()[lin];
            g2 += d * d;
        }
        let ratio = g2 / v.powf(coeffs.gamma.values()[lin]);
        best = Some(best.map_or(ratio, |b: f64| b.max(ratio)));
    }
    best.ok_or(ApError::EmptyPositivitySet)
}

fn ball_inside_domain(grid: &GridSpec, z0: [f64; 2], r: f64) -> Result<()> {
    for k in 0..grid.dim() {
        let tol = 1e-9 * grid.spacing(k);
        if z0[k] - r < grid.origin(k) - tol || z0[k] + r > grid.upper(k) + tol {
            return Err(ApError::RegionOutsideDomain(format!(
                "ball of radius {r} at ({}, {}) leaves the domain",
                z0[0], z0[1]
            )));
        }
    }
    Ok(())
}

/// Fraction of grid nodes inside `B_r(z0)` where the field is positive.
pub fn density_ratio(positivity: &PositivitySet, z0: [f64; 2], r: f64) -> Result<f64> {
    let grid = &positivity.grid;
    ball_inside_domain(grid, z0, r)?;
    let ball = BallRegion::new(z0, r)?;
    let mut total = 0usize;
    let mut pos = 0usize;
    for idx in grid.iter_nodes() {
        if ball.contains(grid, grid.node_coord(idx)) {
            total += 1;
            if positivity.mask[grid.index(idx)] {
                pos += 1;
            }
        }
    }
    if total == 0 {
        return Err(ApError::RegionOutsideDomain("ball contains no grid nodes".into()));
    }
    Ok(pos as f64 / total as f64)
}

/// One-dimensional squared-distance transform (lower envelope of
/// parabolas) with sample spacing `s`; infinite entries are sources absent
/// from the envelope.
fn dt1d(f: &[f64], s: f64, out: &mut Vec<f64>) {
    let n = f.len();
    out.clear();
    out.resize(n, f64::INFINITY);
    let s2 = s * s;
    // vertex index of each envelope parabola and the left edge of the
    // interval where it is the minimum (in index units)
    let mut v: Vec<usize> = Vec::with_capacity(n);
    let mut z: Vec<f64> = Vec::with_capacity(n + 1);
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        let mut s_q = 0.0;
        while let Some(&p) = v.last() {
            s_q = ((f[q] - f[p]) / s2 + (q * q - p * p) as f64) / (2.0 * (q - p) as f64);
            if s_q <= *z.last().unwrap() {
                v.pop();
                z.pop();
            } else {
                break;
            }
        }
        if v.is_empty() {
            z.push(f64::NEG_INFINITY);
        } else {
            z.push(s_q);
        }
        v.push(q);
    }
    if v.is_empty() {
        return;
    }
    let mut k = 0usize;
    for q in 0..n {
        while k + 1 < v.len() && z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        out[q] = d * d * s2 + f[v[k]];
    }
}

/// Exact Euclidean distance from every point of the half-step lattice
/// (which holds both grid nodes and cell centers) to the nearest seed
/// point. Two 1D passes of the parabola-envelope transform.
fn half_lattice_distances(grid: &GridSpec, seeds: &[[f64; 2]]) -> Vec<f64> {
    let nx = 2 * grid.cells(0) + 1;
    let ny = if grid.dim() == 2 { 2 * grid.cells(1) + 1 } else { 1 };
    let mut field = vec![f64::INFINITY; nx * ny];
    for s in seeds {
        let i = ((s[0] - grid.origin(0)) / (0.5 * grid.spacing(0))).round() as usize;
        let j = if grid.dim() == 2 {
            ((s[1] - grid.origin(1)) / (0.5 * grid.spacing(1))).round() as usize
        } else {
            0
        };
        field[j * nx + i] = 0.0;
    }
    let mut row = vec![0.0f64; nx.max(ny)];
    let mut out = Vec::new();
    // pass along x
    for j in 0..ny {
        row.clear();
        row.extend_from_slice(&field[j * nx..(j + 1) * nx]);
        dt1d(&row[..nx], 0.5 * grid.spacing(0), &mut out);
        field[j * nx..(j + 1) * nx].copy_from_slice(&out);
    }
    if grid.dim() == 2 {
        for i in 0..nx {
            row.clear();
            for j in 0..ny {
                row.push(field[j * nx + i]);
            }
            dt1d(&row[..ny], 0.5 * grid.spacing(1), &mut out);
            for j in 0..ny {
                field[j * nx + i] = out[j];
            }
        }
    }
    field.iter().map(|d| d.sqrt()).collect()
}

/// Largest ball inside `B_r(z0)` that avoids every free-boundary cell,
/// as a fraction of `r`: `max_y min(dist(y, boundary), r − |y−z0|) / r`
/// over grid nodes `y` in the ball. A positive value at every scale is the
/// porosity of the boundary; 1 means the ball saw no boundary at all.
pub fn porosity_ratio(positivity: &PositivitySet, z0: [f64; 2], r: f64) -> Result<f64> {
    let grid = &positivity.grid;
    ball_inside_domain(grid, z0, r)?;
    let seeds = mask_boundary_cells(grid, &positivity.mask);
    let dist = if seeds.is_empty() {
        Vec::new()
    } else {
        half_lattice_distances(grid, &seeds)
    };
    let nx = 2 * grid.cells(0) + 1;
    let ball = BallRegion::new(z0, r)?;
    let mut best: Option<f64> = None;
    for idx in grid.iter_nodes() {
        let p = grid.node_coord(idx);
        if !ball.contains(grid, p) {
            continue;
        }
        let to_sphere = r - grid.distance(p, z0);
        let to_fb = if seeds.is_empty() {
            f64::INFINITY
        } else {
            dist[(2 * idx[1]) * nx + 2 * idx[0]]
        };
        let clearance = to_sphere.min(to_fb);
        best = Some(best.map_or(clearance, |b: f64| b.max(clearance)));
    }
    match best {
        Some(b) => Ok((b / r).clamp(0.0, 1.0)),
        None => Err(ApError::RegionOutsideDomain("ball contains no grid nodes".into())),
    }
}

/// Box-counting dimension estimate of the free boundary: slope of
/// `ln(number of s-boxes hit)` against `ln(1/s)` over the given scales.
/// Scales must stay above twice the grid spacing — below that the cell
/// discretization itself shows up as fake structure.
pub fn box_counting_dimension(fb: &FreeBoundary, scales: &[f64]) -> Result<f64> {
    if fb.is_empty() {
        return Err(ApError::NoInteriorFreeBoundary(
            "cannot estimate the dimension of an empty boundary".into(),
        ));
    }
    if scales.len() < 4 {
        return Err(ApError::InvalidParam("need at least 4 scales".into()));
    }
    let h = fb.grid.h_min();
    for s in scales {
        if !(*s >= 2.0 * h * (1.0 - 1e-12)) {
            return Err(ApError::InvalidParam(format!(
                "scale {s} below the resolvable limit 2h = {}",
                2.0 * h
            )));
        }
    }
    let mut counts = Vec::with_capacity(scales.len());
    for s in scales {
        let mut boxes: HashSet<(i64, i64)> = HashSet::new();
        for c in &fb.cells {
            let bi = ((c[0] - fb.grid.origin(0)) / s).floor() as i64;
            let bj = if fb.grid.dim() == 2 {
                ((c[1] - fb.grid.origin(1)) / s).floor() as i64
            } else {
                0
            };
            boxes.insert((bi, bj));
        }
        counts.push(boxes.len() as f64);
    }
    let inv: Vec<f64> = scales.iter().map(|s| 1.0 / s).collect();
    Ok(log_fit(&inv, &counts, None).0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blowup::{half_plane_profile, rho_constant};
    use proptest::prelude::*;

    fn square_grid(cells: usize) -> GridSpec {
        GridSpec::square([cells, cells], [-1.0, -1.0], [1.0, 1.0]).unwrap()
    }

    #[test]
    fn boundary_cells_hug_the_zero_line() {
        let g = square_grid(64);
        let u = ScalarField::from_fn(g.clone(), |p| p[0].max(0.0).powf(1.5)).unwrap();
        let (pos, fb) = extract_free_boundary(&u, 1e-9).unwrap();
        assert!(!fb.is_empty());
        for c in fb.cells() {
            assert!(c[0].abs() <= g.spacing(0), "cell at x1 = {}", c[0]);
        }
        assert!(pos.count() > 0);
        // distances from on-line points are within a cell diagonal
        assert!(fb.nearest_distance([0.0, 0.5]) <= g.spacing(0));
    }

    #[test]
    fn uniform_fields_have_no_boundary_or_no_positivity() {
        let g = square_grid(16);
        let ones = ScalarField::constant(g.clone(), 1.0).unwrap();
        let (_, fb) = extract_free_boundary(&ones, 1e-3).unwrap();
        assert!(fb.is_empty());

        let zeros = ScalarField::zeros(g);
        assert!(matches!(
            extract_free_boundary(&zeros, 1e-3),
            Err(ApError::EmptyPositivitySet)
        ));
    }

    #[test]
    fn default_floor_follows_the_growth_scale() {
        let g = square_grid(128);
        let coeffs = CoefficientPair::constant(&g, 2.0 / 3.0, 1.0).unwrap();
        let floor = default_positivity_floor(&g, &coeffs);
        assert!((floor - 10.0 * g.h_min().powf(1.5)).abs() < 1e-15);
    }

    #[test]
    fn growth_fit_recovers_profile_exponents() {
        // 257x257 nodes, h = 1/128; offset 0.25 is on-grid so the ladder
        // contains exact-hit radii
        let g = square_grid(256);
        let (rho, beta) = rho_constant(2.0 / 3.0, 1.0).unwrap();
        let u =
            ScalarField::from_fn(g.clone(), |p| rho * (p[0] - 0.25).max(0.0).powf(beta)).unwrap();
        let rep =
            fit_growth_exponent(&u, [0.25, 0.0], beta, 8.0 * g.h_min(), 0.5, 7).unwrap();
        assert!(
            (rep.fitted_beta - 1.5).abs() <= 0.02,
            "fitted {} vs 1.5",
            rep.fitted_beta
        );
        // both constants sit within 5% of the profile amplitude
        assert!(rep.nondeg_constant <= 1.05 * rho && rep.nondeg_constant >= 0.95 * rho);
        assert!(rep.growth_constant >= 0.95 * rho && rep.growth_constant <= 1.05 * rho);
        assert!(rep.nondeg_constant <= rep.growth_constant * (1.0 + 1e-12));

        let v = ScalarField::from_fn(g.clone(), |p| {
            let s = p[1].max(0.0);
            s * s
        })
        .unwrap();
        let rep2 = fit_growth_exponent(&v, [0.0, 0.0], 2.0, 8.0 * g.h_min(), 0.5, 7).unwrap();
        assert!((rep2.fitted_beta - 2.0).abs() <= 0.02, "fitted {}", rep2.fitted_beta);
    }

    #[test]
    fn growth_fit_rejects_degenerate_ladders() {
        let g = square_grid(64);
        let u = ScalarField::from_fn(g.clone(), |p| p[0].max(0.0)).unwrap();
        // r_min below 4h
        assert!(fit_growth_exponent(&u, [0.0, 0.0], 1.0, g.h_min(), 0.5, 5).is_err());
        // too few radii
        assert!(fit_growth_exponent(&u, [0.0, 0.0], 1.0, 8.0 * g.h_min(), 0.5, 2).is_err());
        // all ball sups vanish deep inside the zero set
        let zeroish =
            ScalarField::from_fn(g.clone(), |p| (p[0] - 0.9).max(0.0)).unwrap();
        assert!(matches!(
            fit_growth_exponent(&zeroish, [-0.5, 0.0], 1.0, 8.0 * g.h_min(), 0.3, 5),
            Err(ApError::UnderResolved(_))
        ));
    }

    #[test]
    fn gradient_ratio_is_exact_on_the_parabola() {
        let g = square_grid(128);
        let u = ScalarField::from_fn(g.clone(), |p| {
            let s = p[0].max(0.0);
            s * s
        })
        .unwrap();
        let coeffs = CoefficientPair::constant(&g, 1.0, 2.0).unwrap();
        let ratio = gradient_growth_ratio(&u, &coeffs, 1e-6).unwrap();
        assert!((ratio - 4.0).abs() <= 4.0 * 1e-12, "ratio {ratio}");
    }

    #[test]
    fn gradient_ratio_is_constant_for_the_fractional_profile() {
        // |Du|^2 / u^gamma = (9/4) rho^{4/3} = 2 for gamma = 2/3, delta = 1
        let g = square_grid(256);
        let (rho, beta) = rho_constant(2.0 / 3.0, 1.0).unwrap();
        let u = ScalarField::from_fn(g.clone(), |p| rho * p[0].max(0.0).powf(beta)).unwrap();
        let coeffs = CoefficientPair::constant(&g, 2.0 / 3.0, 1.0).unwrap();
        let floor = default_positivity_floor(&g, &coeffs);
        let ratio = gradient_growth_ratio(&u, &coeffs, floor).unwrap();
        assert!((ratio - 2.0).abs() <= 0.02, "ratio {ratio}");

        // stability across a refinement step, the bound the theory predicts
        let g2 = square_grid(128);
        let u2 = ScalarField::from_fn(g2.clone(), |p| rho * p[0].max(0.0).powf(beta)).unwrap();
        let coeffs2 = CoefficientPair::constant(&g2, 2.0 / 3.0, 1.0).unwrap();
        let ratio2 =
            gradient_growth_ratio(&u2, &coeffs2, default_positivity_floor(&g2, &coeffs2))
                .unwrap();
        assert!(ratio / ratio2 < 2.0 && ratio2 / ratio < 2.0);
    }

    #[test]
    fn gradient_ratio_needs_positive_nodes() {
        let g = square_grid(16);
        let u = ScalarField::constant(g.clone(), 5e-4).unwrap();
        let coeffs = CoefficientPair::constant(&g, 1.0, 1.0).unwrap();
        assert!(matches!(
            gradient_growth_ratio(&u, &coeffs, 1e-3),
            Err(ApError::EmptyPositivitySet)
        ));
    }

    #[test]
    fn density_of_a_half_plane_is_one_half() {
        let g = square_grid(256);
        let u = ScalarField::from_fn(g.clone(), |p| (p[0] - 0.25).max(0.0)).unwrap();
        let (pos, _) = extract_free_boundary(&u, 1e-12).unwrap();
        let ratio = density_ratio(&pos, [0.25, 0.0], 0.35).unwrap();
        assert!((ratio - 0.5).abs() <= 0.05, "ratio {ratio}");

        let ones = ScalarField::constant(g.clone(), 1.0).unwrap();
        let (full, _) = extract_free_boundary(&ones, 1e-3).unwrap();
        assert_eq!(density_ratio(&full, [0.0, 0.0], 0.5).unwrap(), 1.0);

        // ball poking out of the domain is refused
        assert!(matches!(
            density_ratio(&full, [0.9, 0.0], 0.5),
            Err(ApError::RegionOutsideDomain(_))
        ));
    }

    #[test]
    fn porosity_of_a_straight_boundary_is_one_half() {
        let g = square_grid(256);
        let u = ScalarField::from_fn(g.clone(), |p| (p[0] - 0.25).max(0.0)).unwrap();
        let (pos, _) = extract_free_boundary(&u, 1e-12).unwrap();
        let ratio = porosity_ratio(&pos, [0.25, 0.0], 0.5).unwrap();
        assert!((ratio - 0.5).abs() <= 0.03, "ratio {ratio}");

        // no boundary at all: the whole ball is clear
        let ones = ScalarField::constant(g.clone(), 1.0).unwrap();
        let (full, _) = extract_free_boundary(&ones, 1e-3).unwrap();
        let clear = porosity_ratio(&full, [0.0, 0.0], 0.5).unwrap();
        assert!((clear - 1.0).abs() <= 1e-12, "clear {clear}");
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let g = square_grid(32);
        let u = ScalarField::from_fn(g.clone(), |p| {
            (p[0] - 0.3).max(0.0) + (p[1] + 0.4).max(0.0) * 0.5
        })
        .unwrap();
        let (pos, fb) = extract_free_boundary(&u, 1e-9).unwrap();
        let dist = half_lattice_distances(&g, fb.cells());
        let nx = 2 * g.cells(0) + 1;
        for idx in g.iter_nodes() {
            let p = g.node_coord(idx);
            let brute = fb.nearest_distance(p);
            let fast = dist[(2 * idx[1]) * nx + 2 * idx[0]];
            assert!(
                (brute - fast).abs() <= 1e-9 * (1.0 + brute),
                "node ({}, {}): {} vs {}",
                p[0],
                p[1],
                fast,
                brute
            );
        }
        drop(pos);
    }

    #[test]
    fn box_dimension_of_line_and_point() {
        let g = square_grid(512);
        let h = g.h_min();
        // straight segment of unit length, sampled finer than every box
        let cells: Vec<[f64; 2]> = (0..=512)
            .map(|k| [0.25 + 0.5 * h, -0.5 + k as f64 / 512.0])
            .collect();
        let fb = FreeBoundary::from_cells(g.clone(), cells);
        let scales: Vec<f64> = (1..=5).map(|k| 2.0 * h * (1 << k) as f64 / 2.0).collect();
        let d = box_counting_dimension(&fb, &scales).unwrap();
        assert!((d - 1.0).abs() <= 0.1, "line dimension {d}");

        let point = FreeBoundary::from_cells(g.clone(), vec![[0.3, -0.2]]);
        let d0 = box_counting_dimension(&point, &scales).unwrap();
        assert!(d0.abs() <= 1e-12, "point dimension {d0}");

        let empty = FreeBoundary::from_cells(g.clone(), Vec::new());
        assert!(box_counting_dimension(&empty, &scales).is_err());
        assert!(box_counting_dimension(&point, &scales[..3]).is_err());
        assert!(box_counting_dimension(&point, &[h, 4.0 * h, 8.0 * h, 16.0 * h]).is_err());
    }

    #[test]
    fn subsample_is_even_and_deterministic() {
        let g = square_grid(64);
        let cells: Vec<[f64; 2]> = (0..100).map(|k| [k as f64, 0.0]).collect();
        let fb = FreeBoundary::from_cells(g, cells);
        let s = fb.subsample(10);
        assert_eq!(s.len(), 10);
        assert_eq!(s, fb.subsample(10));
        assert_eq!(s[0], [0.0, 0.0]);
        assert_eq!(s[9], [90.0, 0.0]);
        assert_eq!(fb.subsample(200).len(), 100);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn masks_shrink_as_floors_rise(seed in 0u64..1000) {
            let g = GridSpec::square([16, 16], [-1.0, -1.0], [1.0, 1.0]).unwrap();
            let u = ScalarField::from_fn(g, |p| {
                let t = (seed as f64).sin();
                ((p[0] * 3.0 + t).sin() * (p[1] * 2.0 - t).cos() + 0.3).max(0.0)
            }).unwrap();
            let lo = extract_free_boundary(&u, 0.01);
            let hi = extract_free_boundary(&u, 0.3);
            if let (Ok((ml, _)), Ok((mh, _))) = (lo, hi) {
                for (a, b) in ml.mask().iter().zip(mh.mask()) {
                    prop_assert!(*a || !*b, "higher floor added a node");
                }
            }
        }

        #[test]
        fn fitted_slope_ignores_amplitude(c in 0.1f64..10.0, angle in 0.0f64..1.5) {
            let g = GridSpec::square([96, 96], [-1.0, -1.0], [1.0, 1.0]).unwrap();
            let nu = [angle.cos(), angle.sin()];
            let profile = half_plane_profile(2.0/3.0, 1.0, nu, &g).unwrap();
            let scaled = ScalarField::from_fn(
                g.clone(),
                |p| c * profile.interp(p),
            ).unwrap();
            let ladder = (8.0 * g.h_min(), 0.5, 6);
            let a = fit_growth_exponent(&profile, [0.0, 0.0], 1.5, ladder.0, ladder.1, ladder.2).unwrap();
            let b = fit_growth_exponent(&scaled, [0.0, 0.0], 1.5, ladder.0, ladder.1, ladder.2).unwrap();
            prop_assert!((a.fitted_beta - b.fitted_beta).abs() <= 1e-12,
                "slopes {} vs {}", a.fitted_beta, b.fitted_beta);
        }

        #[test]
        fn mask_level_ratios_ignore_amplitude(c in 0.1f64..50.0) {
            let g = GridSpec::square([64, 64], [-1.0, -1.0], [1.0, 1.0]).unwrap();
            let u = ScalarField::from_fn(g.clone(), |p| (p[0] - 0.1).max(0.0).powf(1.4)).unwrap();
            let cu = ScalarField::from_fn(g, |p| c * (p[0] - 0.1).max(0.0).powf(1.4)).unwrap();
            let floor = 1e-6;
            let (pa, _) = extract_free_boundary(&u, floor).unwrap();
            let (pb, _) = extract_free_boundary(&cu, c * floor).unwrap();
            prop_assert_eq!(pa.mask(), pb.mask());
            let da = density_ratio(&pa, [0.1, 0.0], 0.4).unwrap();
            let db = density_ratio(&pb, [0.1, 0.0], 0.4).unwrap();
            prop_assert_eq!(da, db);
            let qa = porosity_ratio(&pa, [0.1, 0.0], 0.4).unwrap();
            let qb = porosity_ratio(&pb, [0.1, 0.0], 0.4).unwrap();
            prop_assert_eq!(qa, qb);
        }
    }
}

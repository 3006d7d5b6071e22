//! Rescaled families `u_r(x) = u(z₀ + r x) / r^β`, their convergence as
//! `r ↓ 0`, and classification of the limit against the explicit half-plane
//! profile `ϱ₀ ((x·ν)₊)^{β₀}`.
//!
//! All rescalings live on one fixed reference grid masked to the unit ball,
//! so sup-distances between members of the family are plain nodal maxima.

use crate::error::{ApError, Result};
use crate::grid::{finite_difference_gradient, GridSpec, ScalarField};

/// β₀ = 2/(2−γ₀), the predicted growth exponent at a point with γ = γ₀.
pub fn beta_exponent(gamma0: f64) -> f64 {
    2.0 / (2.0 - gamma0)
}

/// The amplitude of the one-dimensional profile together with its exponent:
/// returns `(ϱ₀, β₀)` with `ϱ₀ = ((β₀−1)β₀ / (γ₀δ₀))^{1/(γ₀−2)}`.
pub fn rho_constant(gamma0: f64, delta0: f64) -> Result<(f64, f64)> {
    if !(gamma0 > 0.0 && gamma0 <= 1.0) {
        return Err(ApError::InvalidParam(format!(
            "exponent gamma0 = {gamma0} outside (0, 1]"
        )));
    }
    if !(delta0 > 0.0 && delta0.is_finite()) {
        return Err(ApError::InvalidParam(format!("delta0 = {delta0} must be positive")));
    }
    let beta0 = beta_exponent(gamma0);
    let rho0 = ((beta0 - 1.0) * beta0 / (gamma0 * delta0)).powf(1.0 / (gamma0 - 2.0));
    Ok((rho0, beta0))
}

/// The half-plane profile `ϱ₀ ((x·ν)₊)^{β₀}` sampled on `reference`.
pub fn half_plane_profile(
    gamma0: f64,
    delta0: f64,
    nu: [f64; 2],
    reference: &GridSpec,
) -> Result<ScalarField> {
    let (rho0, beta0) = rho_constant(gamma0, delta0)?;
    let dim = reference.dim();
    let norm = if dim == 1 { nu[0].abs() } else { (nu[0] * nu[0] + nu[1] * nu[1]).sqrt() };
    if (norm - 1.0).abs() > 1e-9 {
        return Err(ApError::InvalidParam("profile direction must be a unit vector".into()));
    }
    ScalarField::from_fn(reference.clone(), |p| {
        let s = if dim == 1 { p[0] * nu[0] } else { p[0] * nu[0] + p[1] * nu[1] };
        rho0 * s.max(0.0).powf(beta0)
    })
}

/// The standard comparison grid: 129² nodes over [−1, 1]².
pub fn default_reference() -> GridSpec {
    GridSpec::square([128, 128], [-1.0, -1.0], [1.0, 1.0]).expect("static grid is valid")
}

/// `u(z₀ + r x) / r^β` interpolated onto the nodes of `reference` that lie
/// in the closed unit ball; nodes outside the ball are zero. Radii below
/// eight source cells are refused rather than extrapolated.
pub fn rescale(
    u: &ScalarField,
    z0: [f64; 2],
    r: f64,
    beta: f64,
    reference: &GridSpec,
) -> Result<ScalarField> {
    let src = u.grid();
    if !(r.is_finite() && r > 0.0) {
        return Err(ApError::InvalidParam("rescaling radius must be positive".into()));
    }
    if r < 8.0 * src.h_min() {
        return Err(ApError::UnderResolved(format!(
            "radius {r} below 8 source cells ({})",
            8.0 * src.h_min()
        )));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(ApError::InvalidParam("homogeneity exponent must be positive".into()));
    }
    // the whole closed ball must be visible in the source
    for k in 0..src.dim() {
        let tol = 1e-9 * src.spacing(k);
        if z0[k] - r < src.origin(k) - tol || z0[k] + r > src.upper(k) + tol {
            return Err(ApError::RegionOutsideDomain(format!(
                "ball of radius {r} at ({}, {}) leaves the source box",
                z0[0], z0[1]
            )));
        }
    }
    let scale = r.powf(beta);
    ScalarField::from_fn(reference.clone(), |x| {
        let rr = if reference.dim() == 1 { x[0].abs() } else { (x[0] * x[0] + x[1] * x[1]).sqrt() };
        if rr > 1.0 + 1e-12 {
            return 0.0;
        }
        u.interp([z0[0] + r * x[0], z0[1] + r * x[1]]) / scale
    })
}

/// A family of rescalings at strictly decreasing radii on one reference
/// grid, with the sup-distance of each member to its predecessor.
#[derive(Debug, Clone)]
pub struct BlowupSequence {
    pub center: [f64; 2],
    pub beta: f64,
    pub radii: Vec<f64>,
    pub fields: Vec<ScalarField>,
    /// `distances[i]` = sup |fields[i+1] − fields[i]|.
    pub distances: Vec<f64>,
}

pub fn blowup_sequence(
    u: &ScalarField,
    z0: [f64; 2],
    radii: &[f64],
    beta: f64,
    reference: &GridSpec,
) -> Result<BlowupSequence> {
    if radii.len() < 2 {
        return Err(ApError::InvalidParam("need at least two radii".into()));
    }
    for w in radii.windows(2) {
        if !(w[1] < w[0]) {
            return Err(ApError::InvalidParam("radii must be strictly decreasing".into()));
        }
    }
    let mut fields = Vec::with_capacity(radii.len());
    for &r in radii {
        fields.push(rescale(u, z0, r, beta, reference)?);
    }
    let distances = fields
        .windows(2)
        .map(|w| {
            w[0].values()
                .iter()
                .zip(w[1].values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max)
        })
        .collect();
    Ok(BlowupSequence { center: z0, beta, radii: radii.to_vec(), fields, distances })
}

/// Result of matching the last rescaling against the half-plane family.
#[derive(Debug, Clone)]
pub struct ProfileFit {
    pub nu: [f64; 2],
    pub rho: f64,
    pub sup_error: f64,
}

#[derive(Debug, Clone)]
pub enum Classification {
    /// The limit matches `rho·((x·ν)₊)^β` within `5·tol` in sup norm.
    Fit(ProfileFit),
    /// No half-plane profile fits; the point behaves as singular.
    Singular { sup_error: f64 },
}

/// Classify the limit of a Cauchy blow-up sequence. The direction ν comes
/// from averaging unit gradients of the last rescaling over the inner half
/// ball, and the amplitude from least squares against `((x·ν)₊)^β`.
pub fn classify_blowup(seq: &BlowupSequence, tol: f64) -> Result<Classification> {
    if !(tol > 0.0) {
        return Err(ApError::InvalidParam("tolerance must be positive".into()));
    }
    let last_gap = *seq
        .distances
        .last()
        .ok_or_else(|| ApError::InvalidParam("sequence holds fewer than two fields".into()))?;
    if !(last_gap <= tol) {
        return Err(ApError::NotConverged(format!(
            "blow-up family is not Cauchy: last sup-gap {last_gap} > {tol}"
        )));
    }
    let u = seq.fields.last().expect("nonempty by construction");
    let grid = u.grid();
    let floor = 10.0 * grid.h_min().powf(seq.beta);

    // direction: average of unit gradients over the positive part of the
    // inner half ball, where interpolation rim effects cannot reach
    let grads = finite_difference_gradient(u);
    let mut acc = [0.0f64; 2];
    let mut count = 0usize;
    for idx in grid.iter_nodes() {
        let p = grid.node_coord(idx);
        let rr = grid.distance(p, [0.0, 0.0]);
        if rr > 0.5 || u.at(idx) <= floor {
            continue;
        }
        let gx = grads[0].at(idx);
        let gy = if grid.dim() == 2 { grads[1].at(idx) } else { 0.0 };
        let norm = (gx * gx + gy * gy).sqrt();
        if norm > 0.0 {
            acc[0] += gx / norm;
            acc[1] += gy / norm;
            count += 1;
        }
    }
    if count == 0 {
        return Ok(Classification::Singular { sup_error: f64::INFINITY });
    }
    let norm = (acc[0] * acc[0] + acc[1] * acc[1]).sqrt();
    if norm < 1e-12 {
        // gradients cancel: no preferred half-plane direction
        return Ok(Classification::Singular { sup_error: f64::INFINITY });
    }
    let nu = [acc[0] / norm, acc[1] / norm];

    // amplitude by least squares over the 0.9-ball, then sup misfit there
    let mut num = 0.0;
    let mut den = 0.0;
    for idx in grid.iter_nodes() {
        let p = grid.node_coord(idx);
        if grid.distance(p, [0.0, 0.0]) > 0.9 {
            continue;
        }
        let basis = (p[0] * nu[0] + p[1] * nu[1]).max(0.0).powf(seq.beta);
        num += u.at(idx) * basis;
        den += basis * basis;
    }
    if !(den > 0.0) {
        return Ok(Classification::Singular { sup_error: f64::INFINITY });
    }
    let rho = num / den;
    if !(rho > 0.0) {
        return Ok(Classification::Singular { sup_error: f64::INFINITY });
    }
    let mut sup_error = 0.0f64;
    for idx in grid.iter_nodes() {
        let p = grid.node_coord(idx);
        if grid.distance(p, [0.0, 0.0]) > 0.9 {
            continue;
        }
        let model = rho * (p[0] * nu[0] + p[1] * nu[1]).max(0.0).powf(seq.beta);
        sup_error = sup_error.max((u.at(idx) - model).abs());
    }
    if sup_error <= 5.0 * tol {
        Ok(Classification::Fit(ProfileFit { nu, rho, sup_error }))
    } else {
        Ok(Classification::Singular { sup_error })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minimize::el_residual;
    use crate::grid::CoefficientPair;

    #[test]
    fn rho_constant_reference_values() {
        let (rho, beta) = rho_constant(1.0, 2.0).unwrap();
        assert_eq!(beta, 2.0);
        assert!((rho - 1.0).abs() < 1e-15);

        let (rho, beta) = rho_constant(2.0 / 3.0, 1.0).unwrap();
        assert!((beta - 1.5).abs() < 1e-15);
        let want = (9.0f64 / 8.0).powf(-0.75);
        assert!((rho - want).abs() < 1e-15);
        assert!((rho - 0.9154).abs() < 1e-4);

        assert!(rho_constant(0.0, 1.0).is_err());
        assert!(rho_constant(1.2, 1.0).is_err());
        assert!(rho_constant(0.5, 0.0).is_err());
    }

    #[test]
    fn profile_matches_closed_forms() {
        let g = default_reference();
        let p = half_plane_profile(1.0, 2.0, [1.0, 0.0], &g).unwrap();
        for idx in g.iter_nodes() {
            let x = g.node_coord(idx)[0];
            let want = x.max(0.0).powi(2);
            assert!((p.at(idx) - want).abs() < 1e-14);
        }
        let p = half_plane_profile(2.0 / 3.0, 1.0, [1.0, 0.0], &g).unwrap();
        let rho0 = (9.0f64 / 8.0).powf(-0.75);
        let x = 0.5;
        assert!((p.interp([x, 0.0]) - rho0 * x.powf(1.5)).abs() < 1e-12);

        assert!(half_plane_profile(0.5, 1.0, [0.9, 0.1], &g).is_err());
    }

    #[test]
    fn profile_satisfies_optimality_along_direction() {
        let g = default_reference();
        for (gamma0, delta0) in [(1.0, 2.0), (2.0 / 3.0, 1.0), (0.5, 1.0)] {
            let p = half_plane_profile(gamma0, delta0, [1.0, 0.0], &g).unwrap();
            let coeffs = CoefficientPair::constant(&g, gamma0, delta0).unwrap();
            let beta0 = beta_exponent(gamma0);
            let floor = 10.0 * g.h_min().powf(beta0);
            let r = el_residual(&p, &coeffs, floor).unwrap();
            assert!(r <= 1e-2, "gamma={gamma0}: profile residual {r}");
        }
    }

    fn radial_cone(beta: f64, c: f64, z0: [f64; 2], grid: &GridSpec) -> ScalarField {
        ScalarField::from_fn(grid.clone(), |p| {
            let d = ((p[0] - z0[0]).powi(2) + (p[1] - z0[1]).powi(2)).sqrt();
            c * d.powf(beta)
        })
        .unwrap()
    }

    #[test]
    fn rescaling_homogeneous_field_is_fixed_point() {
        let src = GridSpec::square([256, 256], [-1.0, -1.0], [1.0, 1.0]).unwrap();
        let z0 = [0.25, -0.125];
        let beta = 1.5;
        let u = radial_cone(beta, 0.7, z0, &src);
        let reference = default_reference();
        for r in [0.5, 0.25] {
            let w = rescale(&u, z0, r, beta, &reference).unwrap();
            let want = radial_cone(beta, 0.7, [0.0, 0.0], &reference);
            let mut sup = 0.0f64;
            for idx in reference.iter_nodes() {
                let p = reference.node_coord(idx);
                if reference.distance(p, [0.0, 0.0]) <= 1.0 {
                    sup = sup.max((w.at(idx) - want.at(idx)).abs());
                }
            }
            assert!(sup < 5e-3, "r={r}: fixed-point deviation {sup}");
        }
    }

    #[test]
    fn rescaling_composes_as_semigroup() {
        let src = GridSpec::square([256, 256], [-1.0, -1.0], [1.0, 1.0]).unwrap();
        let z0 = [0.25, -0.125];
        let beta = 1.5;
        let u = ScalarField::from_fn(src.clone(), |p| {
            let s = (p[0] - z0[0] + 0.3 * (p[1] - z0[1])).max(0.0);
            0.9 * s.powf(beta) + 0.05 * ((p[0] - z0[0]).powi(2) + (p[1] - z0[1]).powi(2))
        })
        .unwrap();
        // intermediate grid as fine as the source to keep interpolation mild
        let mid = GridSpec::square([256, 256], [-1.0, -1.0], [1.0, 1.0]).unwrap();
        let reference = default_reference();

        let first = rescale(&u, z0, 0.5, beta, &mid).unwrap();
        let composed = rescale(&first, [0.0, 0.0], 0.5, beta, &reference).unwrap();
        let direct = rescale(&u, z0, 0.25, beta, &reference).unwrap();
        let mut sup = 0.0f64;
        let mut scale = 0.0f64;
        for idx in reference.iter_nodes() {
            let p = reference.node_coord(idx);
            if reference.distance(p, [0.0, 0.0]) <= 1.0 {
                sup = sup.max((composed.at(idx) - direct.at(idx)).abs());
                scale = scale.max(direct.at(idx).abs());
            }
        }
        assert!(sup <= 1e-2 * scale.max(1.0), "semigroup deviation {sup}, scale {scale}");
    }

    #[test]
    fn rescale_preconditions_enforced() {
        let src = GridSpec::square([64, 64], [-1.0, -1.0], [1.0, 1.0]).unwrap();
        let u = ScalarField::zeros(src.clone());
        let reference = default_reference();
        // too small a radius (below 8 cells)
        assert!(matches!(
            rescale(&u, [0.0, 0.0], 0.05, 1.5, &reference),
            Err(ApError::UnderResolved(_))
        ));
        // ball pokes out of the source box
        assert!(matches!(
            rescale(&u, [0.8, 0.0], 0.5, 1.5, &reference),
            Err(ApError::RegionOutsideDomain(_))
        ));
    }

    #[test]
    fn classifies_half_plane_profiles_across_coefficients() {
        let src = GridSpec::square([256, 256], [-1.0, -1.0], [1.0, 1.0]).unwrap();
        let reference = default_reference();
        let angle = 30.0f64.to_radians();
        let nu_true = [angle.cos(), angle.sin()];
        for gamma0 in [0.5, 2.0 / 3.0, 0.9] {
            for delta0 in [0.5, 1.0, 2.0] {
                let (rho0, beta0) = rho_constant(gamma0, delta0).unwrap();
                let u = half_plane_profile(gamma0, delta0, nu_true, &src).unwrap();
                let seq =
                    blowup_sequence(&u, [0.0, 0.0], &[0.5, 0.35, 0.25], beta0, &reference)
                        .unwrap();
                match classify_blowup(&seq, 0.05).unwrap() {
                    Classification::Fit(fit) => {
                        let cosang =
                            (fit.nu[0] * nu_true[0] + fit.nu[1] * nu_true[1]).clamp(-1.0, 1.0);
                        let ang = cosang.acos();
                        assert!(
                            ang <= 1e-2,
                            "gamma={gamma0} delta={delta0}: direction off by {ang} rad"
                        );
                        assert!(
                            (fit.rho - rho0).abs() <= 0.01 * rho0,
                            "gamma={gamma0} delta={delta0}: rho {} vs {rho0}",
                            fit.rho
                        );
                    }
                    Classification::Singular { sup_error } => {
                        panic!("profile misclassified as singular (sup_error {sup_error})")
                    }
                }
            }
        }
    }

    #[test]
    fn radial_cone_is_classified_singular() {
        let src = GridSpec::square([256, 256], [-1.0, -1.0], [1.0, 1.0]).unwrap();
        let reference = default_reference();
        let (rho0, beta0) = rho_constant(2.0 / 3.0, 1.0).unwrap();
        let u = radial_cone(beta0, rho0, [0.0, 0.0], &src);
        let seq = blowup_sequence(&u, [0.0, 0.0], &[0.5, 0.35, 0.25], beta0, &reference).unwrap();
        match classify_blowup(&seq, 0.05).unwrap() {
            Classification::Singular { .. } => {}
            Classification::Fit(f) => panic!("radial cone fit a half-plane: {f:?}"),
        }
    }

    #[test]
    fn non_cauchy_sequence_is_rejected() {
        let src = GridSpec::square([256, 256], [-1.0, -1.0], [1.0, 1.0]).unwrap();
        let reference = default_reference();
        // beta mismatched on purpose: rescalings drift apart
        let u = radial_cone(1.5, 1.0, [0.0, 0.0], &src);
        let seq = blowup_sequence(&u, [0.0, 0.0], &[0.5, 0.25, 0.125], 1.2, &reference).unwrap();
        assert!(matches!(
            classify_blowup(&seq, 0.01),
            Err(ApError::NotConverged(_))
        ));
    }

    #[test]
    fn wrong_exponent_rescalings_drift_monotonically() {
        let src = GridSpec::square([256, 256], [-1.0, -1.0], [1.0, 1.0]).unwrap();
        let reference = default_reference();
        let (_, beta0) = rho_constant(2.0 / 3.0, 1.0).unwrap();
        let u = half_plane_profile(2.0 / 3.0, 1.0, [1.0, 0.0], &src).unwrap();
        let radii = [0.5, 0.35, 0.25, 0.18, 0.125];

        let sups = |beta: f64| -> Vec<f64> {
            radii
                .iter()
                .map(|&r| rescale(&u, [0.0, 0.0], r, beta, &reference).unwrap().max())
                .collect()
        };

        // too large an exponent inflates the family as r shrinks
        let high = sups(beta0 + 0.1);
        for w in high.windows(2) {
            assert!(w[1] > w[0], "expected growth along the ladder: {high:?}");
        }
        // too small an exponent deflates it
        let low = sups(beta0 - 0.1);
        for w in low.windows(2) {
            assert!(w[1] < w[0], "expected decay along the ladder: {low:?}");
        }
        // the correct exponent keeps the family at unit scale
        let right = sups(beta0);
        for (a, b) in right.iter().zip(&right[1..]) {
            assert!((b / a - 1.0).abs() < 0.05, "fixed point family drifted: {right:?}");
        }
    }
}

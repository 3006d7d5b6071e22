//! Constrained minimization of the discrete energy with Dirichlet data.
//!
//! The solver is projected gradient descent with Barzilai–Borwein step
//! proposals, a monotone Armijo backtracking safeguard, and continuation in
//! the regularization ε: each stage minimizes the ε-energy to a projected-
//! gradient tolerance and warm-starts the next, smaller ε. Projection clamps
//! interior nodes into `[0, max boundary datum]` — both truncations can only
//! lower the energy (the singular term is monotone and truncation removes
//! Dirichlet mass), so the feasible box contains a global minimizer — and
//! boundary nodes stay pinned to the datum exactly.

use crate::energy::{discrete_laplacian, energy, energy_gradient, harmonic_replacement, EnergyParams};
use crate::error::{ApError, Result};
use crate::grid::{BallRegion, CoefficientPair, GridSpec, ScalarField};

/// Stage schedule and line-search knobs for [`minimize`].
#[derive(Debug, Clone)]
pub struct SolverParams {
    /// Strictly decreasing positive regularization levels; one descent stage
    /// runs per entry, warm-started from the previous stage.
    pub epsilon_schedule: Vec<f64>,
    /// Iteration cap per stage.
    pub max_iters: usize,
    /// Sup-norm tolerance on the projected-gradient displacement
    /// `u − P(u − ∇J)`.
    pub pg_tol: f64,
    /// Armijo sufficient-decrease fraction in (0, 1).
    pub armijo_c: f64,
    pub step_init: f64,
    pub step_shrink: f64,
    /// Iterations without any relative energy improvement before a stage
    /// stops early (the `converged` flag stays false for such exits).
    pub stall_patience: usize,
}

impl SolverParams {
    /// Defaults: ε from 10⁻¹ down to 10⁻⁶ by decades, 2000 iterations per
    /// stage, pg tolerance 10⁻⁸ scaled by the cell volume (the gradient
    /// itself carries the volume factor).
    pub fn for_grid(grid: &GridSpec) -> Self {
        // Information travels roughly one cell per iteration out of the
        // harmonic initial guess, so the budget must grow with the axis.
        let axis_nodes = (0..grid.dim()).map(|k| grid.nodes(k)).max().unwrap_or(2);
        SolverParams {
            epsilon_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            max_iters: 2000.max(4 * axis_nodes),
            pg_tol: 1e-8 * grid.cell_volume(),
            armijo_c: 1e-4,
            step_init: 1.0,
            step_shrink: 0.5,
            stall_patience: STALL_PATIENCE,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.epsilon_schedule.is_empty() {
            return Err(ApError::InvalidParam("epsilon schedule must not be empty".into()));
        }
        for w in self.epsilon_schedule.windows(2) {
            if !(w[1] < w[0]) {
                return Err(ApError::InvalidParam(
                    "epsilon schedule must be strictly decreasing".into(),
                ));
            }
        }
        if !(self.epsilon_schedule[self.epsilon_schedule.len() - 1] > 0.0) {
            return Err(ApError::InvalidParam("epsilon schedule must stay positive".into()));
        }
        if !(self.pg_tol > 0.0) {
            return Err(ApError::InvalidParam("pg_tol must be positive".into()));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(ApError::InvalidParam("armijo_c must lie in (0, 1)".into()));
        }
        if !(self.step_init > 0.0 && self.step_shrink > 0.0 && self.step_shrink < 1.0) {
            return Err(ApError::InvalidParam("invalid step parameters".into()));
        }
        if self.max_iters == 0 {
            return Err(ApError::InvalidParam("max_iters must be at least 1".into()));
        }
        if self.stall_patience == 0 {
            return Err(ApError::InvalidParam("stall_patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// A Dirichlet problem for the energy: coefficients, boundary datum, and
/// solver knobs. The datum is a full nodal field; only its boundary values
/// act as constraints (interior values merely seed the initial guess through
/// the harmonic extension).
#[derive(Debug, Clone)]
pub struct Problem {
    pub coeffs: CoefficientPair,
    pub boundary_datum: ScalarField,
    pub solver: SolverParams,
    /// Optional warm start; without one the solver begins from the harmonic
    /// extension of the datum.
    pub initial_guess: Option<ScalarField>,
}

impl Problem {
    pub fn new(
        coeffs: CoefficientPair,
        boundary_datum: ScalarField,
        solver: SolverParams,
    ) -> Result<Self> {
        if coeffs.grid() != boundary_datum.grid() {
            return Err(ApError::GridMismatch("datum grid differs from coefficient grid".into()));
        }
        solver.validate()?;
        let grid = boundary_datum.grid();
        for idx in grid.iter_nodes() {
            if grid.is_boundary(idx) && boundary_datum.at(idx) < 0.0 {
                return Err(ApError::BoundaryMismatch(format!(
                    "boundary datum is negative ({}) at node ({}, {})",
                    boundary_datum.at(idx),
                    idx[0],
                    idx[1]
                )));
            }
        }
        Ok(Problem { coeffs, boundary_datum, solver, initial_guess: None })
    }

    /// Replace the default harmonic-extension start with `guess`.
    pub fn with_initial_guess(mut self, guess: ScalarField) -> Result<Self> {
        if guess.grid() != self.coeffs.grid() {
            return Err(ApError::GridMismatch("initial guess grid differs from problem grid".into()));
        }
        self.initial_guess = Some(guess);
        Ok(self)
    }

    pub fn grid(&self) -> &GridSpec {
        self.coeffs.grid()
    }
}

/// One accepted line-search state. `energy` is the ε-energy of the iterate
/// the row describes, `pg_norm` its projected-gradient displacement, `step`
/// the step length that produced it (0 for the stage's starting point).
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    pub stage: usize,
    pub iter: usize,
    pub energy: f64,
    pub pg_norm: f64,
    pub step: f64,
}

#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub u: ScalarField,
    pub log: Vec<IterRecord>,
    /// One flag per schedule stage: whether pg_tol was reached.
    pub converged: Vec<bool>,
}

impl MinimizeResult {
    pub fn fully_converged(&self) -> bool {
        self.converged.iter().all(|&c| c)
    }
}

/// Ball comfortably covering every node, for whole-domain harmonic extension.
fn covering_ball(grid: &GridSpec) -> BallRegion {
    let mut center = [0.0f64; 2];
    let mut rad2 = 0.0;
    for k in 0..grid.dim() {
        center[k] = 0.5 * (grid.origin(k) + grid.upper(k));
        let half = 0.5 * (grid.upper(k) - grid.origin(k));
        rad2 += half * half;
    }
    BallRegion::new(center, rad2.sqrt() + grid.h_min()).expect("positive radius")
}

/// Energy window for the non-monotone Armijo reference (SPG style).
const NONMONOTONE_WINDOW: usize = 10;
/// Iterations without any relative energy improvement before a stage stops.
const STALL_PATIENCE: usize = 100;

pub fn minimize(problem: &Problem) -> Result<MinimizeResult> {
    problem.solver.validate()?;
    let grid = problem.grid().clone();
    let phi = &problem.boundary_datum;
    let coeffs = &problem.coeffs;
    let sp = &problem.solver;

    // upper truncation level: the largest Dirichlet value
    let mut cap = 0.0f64;
    for idx in grid.iter_nodes() {
        if grid.is_boundary(idx) {
            cap = cap.max(phi.at(idx));
        }
    }

    let boundary: Vec<bool> = grid.iter_nodes().map(|idx| grid.is_boundary(idx)).collect();
    let phi_vals = phi.values();

    let project = |vals: &mut Vec<f64>| {
        for (i, v) in vals.iter_mut().enumerate() {
            if boundary[i] {
                *v = phi_vals[i];
            } else {
                *v = v.clamp(0.0, cap);
            }
        }
    };

    // initial guess: harmonic extension of the datum (or the caller's warm
    // start), clipped into the box
    let mut u_vals = match &problem.initial_guess {
        Some(guess) => guess.values().to_vec(),
        None => harmonic_replacement(phi, &covering_ball(&grid))?.values().to_vec(),
    };
    project(&mut u_vals);

    let field = |vals: &[f64]| -> Result<ScalarField> {
        ScalarField::new(grid.clone(), vals.to_vec())
            .map_err(|_| ApError::Diverged("non-finite iterate".into()))
    };

    let n = grid.node_count();
    let mut log = Vec::new();
    let mut converged = Vec::with_capacity(sp.epsilon_schedule.len());
    let mut u = field(&u_vals)?;

    for (stage, &eps) in sp.epsilon_schedule.iter().enumerate() {
        let params = EnergyParams::smoothed(eps)?;
        let mut j_cur = energy(&u, coeffs, &params)?;
        if !j_cur.is_finite() {
            return Err(ApError::Diverged(format!("energy is not finite at stage {stage}")));
        }
        let mut stage_done = false;
        let mut prev: Option<(Vec<f64>, Vec<f64>)> = None; // (u, g) of previous iterate
        let mut last_step = 0.0;
        // Non-monotone (windowed) acceptance reference: lets the spectral
        // step run at its natural length on ill-conditioned problems, where
        // a monotone reference would shrink it back to steepest descent.
        let mut recent = std::collections::VecDeque::with_capacity(NONMONOTONE_WINDOW);
        recent.push_back(j_cur);
        let mut best = j_cur;
        let mut since_best = 0usize;
        // The stage's answer: the lowest-energy iterate seen, breaking
        // floating-point energy ties toward the smaller projected gradient
        // (acceptance is non-monotone, so the last iterate may be neither).
        let mut keep: Option<(f64, f64, Vec<f64>)> = None; // (energy, pg, values)

        for iter in 0..=sp.max_iters {
            let g = energy_gradient(&u, coeffs, &params)?;
            let g_vals = g.values();

            // projected-gradient displacement at the current point
            let mut trial: Vec<f64> = (0..n).map(|i| u_vals[i] - g_vals[i]).collect();
            project(&mut trial);
            let pg_norm = trial
                .iter()
                .zip(&u_vals)
                .map(|(t, v)| (t - v).abs())
                .fold(0.0f64, f64::max);

            log.push(IterRecord { stage, iter, energy: j_cur, pg_norm, step: last_step });
            let keep_this = match &keep {
                None => true,
                Some((je, jpg, _)) => {
                    let tie = 1e-12 * (1.0 + je.abs());
                    j_cur < je - tie || (pg_norm < *jpg && j_cur <= je + tie)
                }
            };
            if keep_this {
                keep = Some((j_cur, pg_norm, u_vals.clone()));
            }
            if pg_norm <= sp.pg_tol {
                stage_done = true;
                break;
            }
            if iter == sp.max_iters {
                break;
            }

            // Barzilai–Borwein step proposal from the previous displacement
            let mut t = sp.step_init;
            if let Some((pu, pg)) = &prev {
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..n {
                    let du = u_vals[i] - pu[i];
                    num += du * du;
                    den += du * (g_vals[i] - pg[i]);
                }
                if den > 0.0 && num > 0.0 {
                    t = (num / den).clamp(1e-14, 1e10);
                }
            }

            // Armijo backtracking on the projected step, tested against the
            // worst energy in the recent window rather than the current one
            let j_ref = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut accepted = false;
            for _ in 0..60 {
                let mut cand: Vec<f64> = (0..n).map(|i| u_vals[i] - t * g_vals[i]).collect();
                project(&mut cand);
                let decrease: f64 =
                    (0..n).map(|i| g_vals[i] * (u_vals[i] - cand[i])).sum();
                if decrease <= 0.0 {
                    t *= sp.step_shrink;
                    continue;
                }
                let cand_field = field(&cand)?;
                let j_new = energy(&cand_field, coeffs, &params)?;
                if !j_new.is_finite() {
                    return Err(ApError::Diverged(format!(
                        "energy is not finite at stage {stage}, iter {iter}"
                    )));
                }
                if j_new <= j_ref - sp.armijo_c * decrease {
                    prev = Some((std::mem::take(&mut u_vals), g_vals.to_vec()));
                    u_vals = cand;
                    u = cand_field;
                    j_cur = j_new;
                    last_step = t;
                    accepted = true;
                    break;
                }
                t *= sp.step_shrink;
            }
            if !accepted {
                // line search exhausted: descent is below floating-point
                // resolution; the stage can make no further progress
                break;
            }
            recent.push_back(j_cur);
            if recent.len() > NONMONOTONE_WINDOW {
                recent.pop_front();
            }
            // Stop once the best energy has been flat (to relative
            // floating-point resolution) for a long stretch.
            if j_cur < best - 1e-14 * (1.0 + best.abs()) {
                best = j_cur;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= sp.stall_patience {
                    break;
                }
            }
        }
        if let Some((_, _, vals)) = keep {
            u_vals = vals;
            u = field(&u_vals)?;
        }
        converged.push(stage_done);
    }

    Ok(MinimizeResult { u, log, converged })
}

/// Resample `field` onto `grid` by linear interpolation. Coarsening a
/// nested grid samples coincident nodes exactly.
fn resample(field: &ScalarField, grid: &GridSpec) -> Result<ScalarField> {
    ScalarField::from_fn(grid.clone(), |p| field.interp(p))
}

/// Lift interior nodes of `guess` to twice the clamped-node release
/// threshold `h²·δγε^{γ−1}`. Descent erases the lift wherever zero is
/// right (covering is fast), but a support frozen slightly short — e.g. by
/// coarse-grid quantization — can only re-open through this lift: a
/// clamped node whose neighbours sit below the threshold is stationary no
/// matter how many iterations follow.
fn seed_support(guess: &ScalarField, coeffs: &CoefficientPair, eps: f64) -> Result<ScalarField> {
    let grid = guess.grid().clone();
    let h2 = grid.h_min() * grid.h_min();
    let mut vals = guess.values().to_vec();
    for idx in grid.iter_nodes() {
        if grid.is_boundary(idx) {
            continue;
        }
        let p = grid.node_coord(idx);
        let g = coeffs.gamma_at(p);
        let seed = 2.0 * h2 * coeffs.delta_at(p) * g * eps.powf(g - 1.0);
        let i = grid.index(idx);
        if vals[i] < seed {
            vals[i] = seed;
        }
    }
    ScalarField::new(grid, vals)
}

/// `coeffs` restricted to `grid`, keeping the Hölder metadata.
fn restrict_coeffs(coeffs: &CoefficientPair, grid: &GridSpec) -> Result<CoefficientPair> {
    let pair =
        CoefficientPair::new(resample(&coeffs.gamma, grid)?, resample(&coeffs.delta, grid)?)?;
    match (coeffs.holder_mu, coeffs.holder_seminorm) {
        (Some(mu), Some(sn)) => pair.with_holder(mu, sn),
        _ => Ok(pair),
    }
}

/// Coarsest first: halve the cell counts while they stay even and above
/// `coarsest` cells per axis.
fn grid_ladder(grid: &GridSpec, coarsest: usize) -> Result<Vec<GridSpec>> {
    let mut ladder = vec![grid.clone()];
    loop {
        let g = ladder.last().expect("ladder is never empty");
        let halvable = (0..g.dim()).all(|k| g.cells(k) % 2 == 0)
            && (0..g.dim()).any(|k| g.cells(k) > coarsest);
        if !halvable {
            break;
        }
        let coarse = if g.dim() == 1 {
            GridSpec::interval(g.cells(0) / 2, g.origin(0), g.upper(0))?
        } else {
            GridSpec::square(
                [g.cells(0) / 2, g.cells(1) / 2],
                [g.origin(0), g.origin(1)],
                [g.upper(0), g.upper(1)],
            )?
        };
        ladder.push(coarse);
    }
    ladder.reverse();
    Ok(ladder)
}

/// Minimize through a coarse-to-fine grid cascade: the full solve — with
/// its whole regularization schedule — runs on a coarsened mesh first, and
/// each refinement is warm-started from the interpolated coarse solution.
/// Refined levels keep only the schedule's final regularization: re-running
/// the heavily smoothed stages would push the free boundary far off its
/// warm-started position (the smoothed problems have visibly different
/// supports) and then spend the whole budget crawling back. The returned
/// log and convergence flags are those of the finest level. Solver
/// parameters are re-derived per level via [`SolverParams::for_grid`].
pub fn solve_cascade(coeffs: &CoefficientPair, boundary_datum: &ScalarField) -> Result<MinimizeResult> {
    if coeffs.grid() != boundary_datum.grid() {
        return Err(ApError::GridMismatch("datum grid differs from coefficient grid".into()));
    }
    let ladder = grid_ladder(coeffs.grid(), 128)?;
    let mut carried: Option<ScalarField> = None;
    let mut result = None;
    for level in &ladder {
        let level_coeffs = restrict_coeffs(coeffs, level)?;
        let level_datum = resample(boundary_datum, level)?;
        let mut solver = SolverParams::for_grid(level);
        if carried.is_some() {
            let last = *solver.epsilon_schedule.last().expect("schedule is never empty");
            solver.epsilon_schedule = vec![last];
        }
        let mut problem = Problem::new(level_coeffs, level_datum, solver)?;
        if let Some(prev) = carried.take() {
            let eps = *problem.solver.epsilon_schedule.last().expect("schedule is never empty");
            let guess = seed_support(&resample(&prev, level)?, &problem.coeffs, eps)?;
            problem = problem.with_initial_guess(guess)?;
        }
        let level_result = minimize(&problem)?;
        carried = Some(level_result.u.clone());
        result = Some(level_result);
    }
    let result = result.expect("ladder contains at least the target grid");

    // In one dimension the coarse grids park the contact point inside their
    // own (coarser) stationarity band, and the budget above is not enough
    // for the fine grid to walk it over; iterations are cheap there, so an
    // extended final-regularization pass finishes the job.
    let grid = coeffs.grid();
    if grid.dim() == 1 {
        let mut solver = SolverParams::for_grid(grid);
        let last = *solver.epsilon_schedule.last().expect("schedule is never empty");
        solver.epsilon_schedule = vec![last];
        solver.max_iters = 32 * grid.nodes(0);
        solver.stall_patience = 2000;
        let guess = seed_support(&result.u, coeffs, last)?;
        let problem = Problem::new(coeffs.clone(), boundary_datum.clone(), solver)?
            .with_initial_guess(guess)?;
        return minimize(&problem);
    }
    Ok(result)
}

/// Worst relative Euler–Lagrange residual over interior nodes above the
/// floor: `|Δ_h u − δγu^{γ−1}| · u^{1−γ}`. The `u^{1−γ}` factor normalizes
/// away the singular scale, so the value is comparable across exponents.
pub fn el_residual(u: &ScalarField, coeffs: &CoefficientPair, positivity_floor: f64) -> Result<f64> {
    if u.grid() != coeffs.grid() {
        return Err(ApError::GridMismatch("field and coefficients on different grids".into()));
    }
    if !(positivity_floor > 0.0) {
        return Err(ApError::InvalidParam("positivity floor must be positive".into()));
    }
    let grid = u.grid();
    let lap = discrete_laplacian(u);
    let mut worst: Option<f64> = None;
    for idx in grid.iter_nodes() {
        if grid.is_boundary(idx) {
            continue;
        }
        let v = u.at(idx);
        if v <= positivity_floor {
            continue;
        }
        let gamma = coeffs.gamma.at(idx);
        let delta = coeffs.delta.at(idx);
        let res = (lap.at(idx) - delta * gamma * v.powf(gamma - 1.0)).abs() * v.powf(1.0 - gamma);
        worst = Some(worst.map_or(res, |w: f64| w.max(res)));
    }
    worst.ok_or(ApError::EmptyPositivitySet)
}

/// Minimality margins against explicit competitors: each must satisfy
/// `J₀(u) ≤ J₀(v) + slack` with `slack = pg_tol · node count`.
#[derive(Debug, Clone)]
pub struct CompetitorReport {
    /// `J₀(competitor) − J₀(u)` per competitor, in input order.
    pub margins: Vec<f64>,
    pub slack: f64,
    pub all_within: bool,
}

pub fn competitor_test(
    u: &ScalarField,
    problem: &Problem,
    competitors: &[ScalarField],
) -> Result<CompetitorReport> {
    let grid = problem.grid();
    if u.grid() != grid {
        return Err(ApError::GridMismatch("solution grid differs from problem grid".into()));
    }
    let exact = EnergyParams::exact();
    let base = energy(u, &problem.coeffs, &exact)?;
    let mut margins = Vec::with_capacity(competitors.len());
    for (k, v) in competitors.iter().enumerate() {
        if v.grid() != grid {
            return Err(ApError::GridMismatch(format!("competitor {k} on a different grid")));
        }
        for idx in grid.iter_nodes() {
            if grid.is_boundary(idx) && v.at(idx) != problem.boundary_datum.at(idx) {
                return Err(ApError::BoundaryMismatch(format!(
                    "competitor {k} deviates from the datum at node ({}, {})",
                    idx[0], idx[1]
                )));
            }
        }
        margins.push(energy(v, &problem.coeffs, &exact)? - base);
    }
    let slack = problem.solver.pg_tol * grid.node_count() as f64;
    let all_within = margins.iter().all(|m| *m >= -slack);
    Ok(CompetitorReport { margins, slack, all_within })
}

//! The five commands behind the CLI: minimize, growth, weiss, blowup, suite.
//!
//! Each command returns its process exit code; hard errors bubble up as
//! `anyhow::Error` and are mapped to codes in `main`. Convention:
//! 0 ok, 2 usage/parse, 3 empty result, 4 property violation.

use std::path::{Path, PathBuf};

use anyhow::Context;
use aplab_core::blowup::{beta_exponent, blowup_sequence, classify_blowup, default_reference, Classification};
use aplab_core::energy::{energy, EnergyParams};
use aplab_core::fbanalysis::{default_positivity_floor, extract_free_boundary, fit_growth_exponent};
use aplab_core::fieldio::read_field_path;
use aplab_core::grid::ScalarField;
use aplab_core::minimize::{minimize, solve_cascade, Problem};
use aplab_core::suite::run_all;
use aplab_core::weiss::{check_monotone, weiss_series, QuadParams};
use aplab_core::ApError;

use crate::config::ExperimentConfig;
use crate::output::{fnum, manifest, plot_script, write_csv, write_field_atomic, write_atomic, PlotKind};

pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
    pub seed: u64,
}

impl Ctx {
    pub fn new(config: &Path, out_flag: Option<PathBuf>, seed: u64) -> anyhow::Result<Ctx> {
        let cfg = ExperimentConfig::load(config)
            .with_context(|| format!("reading {}", config.display()))?;
        let out = out_flag.unwrap_or_else(|| cfg.output.dir.clone());
        Ok(Ctx { cfg, out, seed })
    }

    fn head(&self) -> String {
        manifest(&self.cfg.hash, self.seed)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn prepare_out(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(())
    }

    fn maybe_plot(&self, csv_name: &str, kind: PlotKind) -> anyhow::Result<()> {
        if self.cfg.output.emit_plots {
            let name = format!("plot_{}.py", csv_name.trim_end_matches(".csv"));
            write_atomic(&self.path(&name), plot_script(csv_name, kind).as_bytes())?;
        }
        Ok(())
    }

    /// Load the field under analysis and pin it to the configured grid.
    fn load_field(&self, path: &Path) -> anyhow::Result<ScalarField> {
        let f = read_field_path(path).with_context(|| format!("reading {}", path.display()))?;
        if f.grid() != &self.cfg.grid {
            return Err(ApError::GridMismatch(format!(
                "{} lives on a different grid than the [grid] section",
                path.display()
            ))
            .into());
        }
        Ok(f)
    }
}

/// `x,y` (or just `x` in 1D) → a point; `;` separates points in a list.
fn parse_point(s: &str, dim: usize) -> Result<[f64; 2], ApError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != dim {
        return Err(ApError::Parse(format!(
            "center `{s}`: expected {dim} comma-separated coordinate(s)"
        )));
    }
    let mut p = [0.0f64; 2];
    for (k, t) in parts.iter().enumerate() {
        p[k] = t
            .parse()
            .map_err(|_| ApError::Parse(format!("center `{s}`: `{t}` is not a number")))?;
    }
    Ok(p)
}

// ---------------------------------------------------------------------------

pub fn cmd_minimize(ctx: &Ctx) -> anyhow::Result<i32> {
    let coeffs = ctx.cfg.coefficients()?;
    let datum = ctx.cfg.datum()?;
    let result = if ctx.cfg.solver.cascade {
        solve_cascade(&coeffs, &datum)?
    } else {
        minimize(&Problem::new(coeffs.clone(), datum.clone(), ctx.cfg.solver.params(&ctx.cfg.grid))?)?
    };

    ctx.prepare_out()?;
    write_field_atomic(&ctx.path("solution.field"), &result.u)?;

    let rows: Vec<String> = result
        .log
        .iter()
        .map(|r| {
            format!("{},{},{},{},{}", r.stage, r.iter, fnum(r.energy), fnum(r.pg_norm), fnum(r.step))
        })
        .collect();
    write_csv(&ctx.path("iterations.csv"), &ctx.head(), "stage,iter,energy,pg_norm,step", &rows)?;
    ctx.maybe_plot("iterations.csv", PlotKind::Iterations)?;

    let j = energy(&result.u, &coeffs, &EnergyParams::exact())?;
    println!(
        "minimize: {}D grid, {} nodes, energy {:.6e}, converged {}, wrote {}",
        ctx.cfg.grid.dim(),
        ctx.cfg.grid.node_count(),
        j,
        result.fully_converged(),
        ctx.path("solution.field").display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------

pub fn cmd_growth(ctx: &Ctx, field: &Path, centers: &str) -> anyhow::Result<i32> {
    let coeffs = ctx.cfg.coefficients()?;
    let u = ctx.load_field(field)?;
    let grid = &ctx.cfg.grid;
    let floor = ctx.cfg.analysis.floor.unwrap_or_else(|| default_positivity_floor(grid, &coeffs));

    let points: Vec<[f64; 2]> = if centers == "auto" {
        let (_, fb) = extract_free_boundary(&u, floor)?;
        if fb.is_empty() {
            eprintln!("growth: the free boundary is empty at floor {floor:.3e}");
            return Ok(3);
        }
        fb.subsample(64)
    } else {
        centers
            .split(';')
            .map(|s| parse_point(s, grid.dim()))
            .collect::<Result<_, _>>()?
    };

    let r_min = ctx.cfg.analysis.resolved_r_min(grid);
    let r_max = ctx.cfg.analysis.r_max;
    let count = ctx.cfg.analysis.count;

    let mut rows = Vec::new();
    let mut fitted = Vec::new();
    for c in &points {
        let beta = beta_exponent(coeffs.gamma_at(*c));
        match fit_growth_exponent(&u, *c, beta, r_min, r_max, count) {
            Ok(rep) => {
                for (k, r) in rep.radii.iter().enumerate() {
                    rows.push(format!(
                        "{},{},{},{},{},{},{},{},{}",
                        fnum(c[0]),
                        fnum(c[1]),
                        fnum(beta),
                        fnum(*r),
                        fnum(rep.sup_ball[k]),
                        fnum(rep.sup_sphere[k]),
                        fnum(rep.fitted_beta),
                        fnum(rep.nondeg_constant),
                        fnum(rep.growth_constant)
                    ));
                }
                fitted.push(rep.fitted_beta);
            }
            Err(e) => eprintln!("growth: skipping center ({}, {}): {e}", c[0], c[1]),
        }
    }
    if rows.is_empty() {
        eprintln!("growth: no center produced a usable radii ladder");
        return Ok(3);
    }

    ctx.prepare_out()?;
    write_csv(
        &ctx.path("growth.csv"),
        &ctx.head(),
        "center_x,center_y,target_beta,r,sup_ball,sup_sphere,fitted_beta,nondeg_constant,growth_constant",
        &rows,
    )?;
    ctx.maybe_plot("growth.csv", PlotKind::Growth)?;

    let lo = fitted.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = fitted.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "growth: {} of {} center(s) fitted, exponents in [{lo:.4}, {hi:.4}], wrote {}",
        fitted.len(),
        points.len(),
        ctx.path("growth.csv").display()
    );
    Ok(0)
}

// ---------------------------------------------------------------------------

pub fn cmd_weiss(ctx: &Ctx, field: &Path, center: &str) -> anyhow::Result<i32> {
    let coeffs = ctx.cfg.coefficients()?;
    let u = ctx.load_field(field)?;
    let z0 = parse_point(center, ctx.cfg.grid.dim())?;
    let radii = ctx.cfg.analysis.radii_up(&ctx.cfg.grid)?;
    let quad = QuadParams { angular_samples: ctx.cfg.analysis.angular_samples, ..QuadParams::default() };

    let series = weiss_series(&u, &coeffs, z0, &radii, &quad)?;
    let rows: Vec<String> = series
        .points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{},{}",
                fnum(p.r),
                fnum(p.bulk),
                fnum(p.sphere),
                fnum(p.err_gamma_jump),
                fnum(p.err_gamma_grad),
                fnum(p.err_delta_grad),
                fnum(p.w)
            )
        })
        .collect();

    ctx.prepare_out()?;
    write_csv(
        &ctx.path("weiss.csv"),
        &ctx.head(),
        "r,bulk,sphere,err_gamma_jump,err_gamma_grad,err_delta_grad,w",
        &rows,
    )?;
    ctx.maybe_plot("weiss.csv", PlotKind::Weiss)?;

    let report = check_monotone(&series, ctx.cfg.analysis.slack)?;
    println!(
        "weiss: center ({}, {}), beta {:.4}, w {:.6e} -> {:.6e}, worst violation {:.3e}, wrote {}",
        z0[0],
        z0[1],
        series.beta0,
        series.points.first().map(|p| p.w).unwrap_or(f64::NAN),
        series.points.last().map(|p| p.w).unwrap_or(f64::NAN),
        report.worst_violation,
        ctx.path("weiss.csv").display()
    );
    if !report.pass {
        eprintln!(
            "weiss: the series decreases beyond the slack ({:.3e} > {:.3e})",
            report.worst_violation, ctx.cfg.analysis.slack
        );
        return Ok(4);
    }
    Ok(0)
}

// ---------------------------------------------------------------------------

pub fn cmd_blowup(ctx: &Ctx, field: &Path, center: &str) -> anyhow::Result<i32> {
    let coeffs = ctx.cfg.coefficients()?;
    let u = ctx.load_field(field)?;
    let z0 = parse_point(center, ctx.cfg.grid.dim())?;
    let radii = ctx.cfg.analysis.radii_down(&ctx.cfg.grid)?;
    let beta = beta_exponent(coeffs.gamma_at(z0));

    let seq = blowup_sequence(&u, z0, &radii, beta, &default_reference())?;
    let rows: Vec<String> = seq
        .distances
        .iter()
        .enumerate()
        .map(|(k, gap)| format!("{},{},{}", fnum(radii[k]), fnum(radii[k + 1]), fnum(*gap)))
        .collect();

    ctx.prepare_out()?;
    write_csv(&ctx.path("blowup.csv"), &ctx.head(), "r_from,r_to,sup_gap", &rows)?;
    ctx.maybe_plot("blowup.csv", PlotKind::Blowup)?;
    let csv = ctx.path("blowup.csv");

    match classify_blowup(&seq, ctx.cfg.analysis.cauchy_tol) {
        Ok(Classification::Fit(fit)) => {
            println!(
                "blowup: center ({}, {}), beta {beta:.4}, half-plane profile nu = ({:.4}, {:.4}), \
                 amplitude {:.4}, sup error {:.3e}, wrote {}",
                z0[0],
                z0[1],
                fit.nu[0],
                fit.nu[1],
                fit.rho,
                fit.sup_error,
                csv.display()
            );
            Ok(0)
        }
        Ok(Classification::Singular { sup_error }) => {
            println!(
                "blowup: center ({}, {}), beta {beta:.4}, no half-plane profile fits \
                 (sup error {sup_error:.3e}); the point behaves as singular; wrote {}",
                z0[0],
                z0[1],
                csv.display()
            );
            Ok(0)
        }
        Err(e @ ApError::NotConverged(_)) => {
            eprintln!("blowup: {e}; gaps written to {}", csv.display());
            Ok(4)
        }
        Err(e) => Err(e.into()),
    }
}

// ---------------------------------------------------------------------------

pub fn cmd_suite(only: Option<&str>) -> anyhow::Result<i32> {
    if let Some(o) = only {
        if !aplab_core::suite::CRITERION_IDS.iter().any(|id| id.eq_ignore_ascii_case(o)) {
            return Err(ApError::Parse(format!(
                "unknown criterion `{o}` (expected one of {})",
                aplab_core::suite::CRITERION_IDS.join(", ")
            ))
            .into());
        }
    }
    let reports = run_all(only);
    let mut all_pass = true;
    for rep in &reports {
        println!("{}", rep.summary());
        for line in &rep.lines {
            println!("    {line}");
        }
        all_pass &= rep.pass;
    }
    println!(
        "suite: {} of {} criteria passed",
        reports.iter().filter(|r| r.pass).count(),
        reports.len()
    );
    Ok(if all_pass { 0 } else { 4 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_parsing_respects_dimension() {
        assert_eq!(parse_point("0.25", 1).unwrap(), [0.25, 0.0]);
        assert_eq!(parse_point("0.2, -0.3", 2).unwrap(), [0.2, -0.3]);
        assert!(parse_point("0.2", 2).is_err());
        assert!(parse_point("a,b", 2).is_err());
    }
}

//! Config-driven experiment runner. Every pipeline stage is a subcommand
//! producing JSON reports, CSV tables, and binary field artifacts in the
//! output directory; exit codes separate check failures from config errors.

use std::path::PathBuf;
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::carleman::CarlemanSuite;
use crate::cauchy::{cauchy_phase_on, dbar_residual, phase_decay, phase_ladder};
use crate::cgo::{build_cgo, cgo_grid, decay_report, magnetic_traces, verify_pde, CgoParams};
use crate::config::{resolve_jobs, ExperimentConfig, Tolerances};
use crate::error::{CgoError, Result};
use crate::fields::{mollify, GradientVariant, Mollifier, PotentialSpec};
use crate::geometry::{
    boundary_nodes, boundary_partition, CrossSection, CylinderGrid, DirectionFrame, IndexBox,
};
use crate::recovery::{
    gauge_reconstruction_check, partial_data_check, recover_da, recover_q,
    verify_fourier_identity, PartialDataSpec,
};
use crate::report::{
    field_bytes_complex, read_envelope_header, read_field_complex, CheckLine, ReportWriter,
};

#[derive(Parser)]
#[command(
    name = "cgo-waveguide",
    version,
    about = "Oscillating-solution machinery and Fourier recovery on a closed waveguide"
)]
pub struct Cli {
    /// Experiment configuration file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory override.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Random-seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Scale-ladder override, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub ladder: Option<Vec<f64>>,
    /// Worker threads for per-frequency stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Clone)]
pub enum Command {
    /// Build direction frames, check orthonormality, export boundary sets.
    Frames,
    /// Mollification ladder: kernel mass, convergence, gradient growth.
    Mollify,
    /// Build oscillating solutions along the ladder with phase diagnostics.
    CgoBuild,
    /// Fit the weighted-estimate constants on a seeded member suite.
    CarlemanCheck,
    /// Field-strength recovery: identity, signal, null, gauge generator.
    RecoverDa,
    /// Electric-potential recovery along the ladder.
    RecoverQ,
    /// Restricted-boundary pairing bound.
    PartialData,
    /// Every stage in order.
    All,
    /// Summarize existing report files.
    ReportRender {
        /// Report files; defaults to every .json in the output directory.
        files: Vec<PathBuf>,
    },
}

struct StageCtx<'a> {
    cfg: &'a ExperimentConfig,
    tols: Tolerances,
    writer: &'a ReportWriter,
    jobs: usize,
}

pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(true) => 0,
        Ok(false) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CgoError::Config(_) | CgoError::Report(_) | CgoError::Io(_) => 1,
                _ => 2,
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::ReportRender { files } = &cli.command {
        return render_reports(files, cli.out.as_deref());
    }

    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CgoError::Config("--config is required for this subcommand".into()))?;
    let (mut cfg, hash) = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.run.out_dir = out.display().to_string();
    }
    if let Some(ladder) = &cli.ladder {
        cfg.ladder = ladder.clone();
    }
    if let Some(jobs) = cli.jobs {
        cfg.run.jobs = jobs;
    }
    cfg.validate()?;

    let writer = ReportWriter::new(PathBuf::from(&cfg.run.out_dir).as_path(), &hash, cfg.run.seed)?;
    let ctx = StageCtx {
        cfg: &cfg,
        tols: cfg.tolerances.resolve(),
        writer: &writer,
        jobs: resolve_jobs(cfg.run.jobs),
    };

    let stages: Vec<(&str, StageFn)> = match cli.command {
        Command::Frames => vec![("frames", run_frames as StageFn)],
        Command::Mollify => vec![("mollify", run_mollify as StageFn)],
        Command::CgoBuild => vec![("cgo-build", run_cgo_build as StageFn)],
        Command::CarlemanCheck => vec![("carleman-check", run_carleman as StageFn)],
        Command::RecoverDa => vec![("recover-da", run_recover_da as StageFn)],
        Command::RecoverQ => vec![("recover-q", run_recover_q as StageFn)],
        Command::PartialData => vec![("partial-data", run_partial_data as StageFn)],
        Command::All => vec![
            ("frames", run_frames as StageFn),
            ("mollify", run_mollify as StageFn),
            ("cgo-build", run_cgo_build as StageFn),
            ("carleman-check", run_carleman as StageFn),
            ("recover-da", run_recover_da as StageFn),
            ("recover-q", run_recover_q as StageFn),
            ("partial-data", run_partial_data as StageFn),
        ],
        Command::ReportRender { .. } => unreachable!("handled above"),
    };

    let mut all_passed = true;
    let mut first_err: Option<CgoError> = None;
    for (name, stage) in stages {
        match stage(&ctx) {
            Ok(checks) => {
                print_checks(name, &checks);
                all_passed &= checks.iter().all(|c| c.passed);
            }
            Err(e) => {
                eprintln!("{name}: error: {e}");
                all_passed = false;
                if first_err.is_none() {
                    if let CgoError::Config(_) | CgoError::Report(_) | CgoError::Io(_) = e {
                        first_err = Some(e);
                    }
                }
            }
        }
    }
    if let Some(e) = first_err {
        return Err(e);
    }
    Ok(all_passed)
}

type StageFn = fn(&StageCtx) -> Result<Vec<CheckLine>>;

fn print_checks(stage: &str, checks: &[CheckLine]) {
    for c in checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        println!(
            "{mark} {stage}/{name}  metric {metric:.6e}  threshold {thr:.6e}",
            name = c.name,
            metric = c.metric,
            thr = c.threshold
        );
    }
}

fn render_reports(files: &[PathBuf], out: Option<&std::path::Path>) -> Result<bool> {
    let mut paths: Vec<PathBuf> = files.to_vec();
    if paths.is_empty() {
        if let Some(dir) = out {
            let mut found = Vec::new();
            let entries = std::fs::read_dir(dir).map_err(|e| {
                CgoError::Report(format!("cannot list {}: {e}", dir.display()))
            })?;
            for entry in entries {
                let entry = entry.map_err(|e| CgoError::Report(e.to_string()))?;
                let p = entry.path();
                if p.extension().is_some_and(|x| x == "json") {
                    found.push(p);
                }
            }
            found.sort();
            paths = found;
        }
    }
    if paths.is_empty() {
        println!("no checks run");
        return Ok(true);
    }
    let mut any_checks = false;
    let mut all_passed = true;
    for p in &paths {
        let header = read_envelope_header(p)?;
        let stage = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        print_checks(&stage, &header.checks);
        any_checks |= !header.checks.is_empty();
        all_passed &= header.passed;
    }
    if !any_checks {
        println!("no checks run");
        return Ok(true);
    }
    Ok(all_passed)
}

fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (la, lb) = (a.ln(), b.ln());
        sx += la;
        sy += lb;
        sxx += la * la;
        sxy += la * lb;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

// ---------------------------------------------------------------------------
// frames

#[derive(Serialize)]
struct FramesReport {
    random_frames: usize,
    config_frames: usize,
    max_residual: f64,
    negation_exact: bool,
    theta0: [f64; 2],
    eps: f64,
    illuminated_segments: usize,
    shadowed_segments: usize,
}

fn frame_residual(frame: &DirectionFrame) -> f64 {
    let tt = frame.theta_tilde();
    let eta = frame.eta;
    let xi = frame.xi();
    let xin = frame.xi_norm().max(f64::MIN_POSITIVE);
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let mut r = (dot(tt, tt) - 1.0).abs();
    r = r.max((dot(eta, eta) - 1.0).abs());
    r = r.max(dot(tt, eta).abs());
    r = r.max(dot(tt, xi).abs() / xin);
    r = r.max(dot(eta, xi).abs() / xin);
    r
}

fn run_frames(ctx: &StageCtx) -> Result<Vec<CheckLine>> {
    let cfg = ctx.cfg;
    let section = cfg.cross_section()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut worst = 0.0f64;
    for _ in 0..cfg.probe.frames {
        let ang = rng.gen::<f64>() * std::f64::consts::TAU;
        let theta = [ang.cos(), ang.sin()];
        let scale = 0.3 + 3.7 * rng.gen::<f64>();
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let xi_prime = [sign * scale * -theta[1], sign * scale * theta[0]];
        let xi3_mag = 0.3 + 3.7 * rng.gen::<f64>();
        let xi3 = if rng.gen::<bool>() { xi3_mag } else { -xi3_mag };
        let frame = DirectionFrame::build(&section, theta, xi_prime, xi3)?;
        worst = worst.max(frame_residual(&frame));
    }
    let mut negation_exact = true;
    for &xi in &cfg.probe.xi {
        let f = DirectionFrame::for_xi(&section, xi)?;
        worst = worst.max(frame_residual(&f));
        let g = DirectionFrame::for_xi(&section, [-xi[0], -xi[1], -xi[2]])?;
        negation_exact &= g.theta == [-f.theta[0], -f.theta[1]]
            && g.eta == [-f.eta[0], -f.eta[1], -f.eta[2]]
            && g.xi_prime == [-f.xi_prime[0], -f.xi_prime[1]]
            && g.xi3 == -f.xi3;
    }

    let part = boundary_partition(&section, cfg.probe.theta0, cfg.probe.eps)?;
    let mut rows = Vec::new();
    for s in 0..section.num_segments() {
        let mid = section.segment_midpoint(s);
        let nu = section.segment_normal(s);
        rows.push(vec![
            s.to_string(),
            fmt(mid[0]),
            fmt(mid[1]),
            fmt(nu[0]),
            fmt(nu[1]),
            fmt(section.segment_length(s)),
            (if part.illuminated.contains(&s) { 1 } else { 0 }).to_string(),
            (if part.shadowed.contains(&s) { 1 } else { 0 }).to_string(),
        ]);
    }
    ctx.writer.write_csv(
        "boundary_segments",
        &[
            "segment",
            "center_x",
            "center_y",
            "normal_x",
            "normal_y",
            "length",
            "illuminated",
            "shadowed",
        ],
        &rows,
    )?;

    let checks = vec![
        CheckLine::le("orthonormality", worst, ctx.tols.frame_orthonormality),
        CheckLine::flag("negation_exact", negation_exact),
        CheckLine::flag(
            "partition_complete",
            part.illuminated.len() + part.shadowed.len() == section.num_segments(),
        ),
    ];
    let report = FramesReport {
        random_frames: cfg.probe.frames,
        config_frames: cfg.probe.xi.len(),
        max_residual: worst,
        negation_exact,
        theta0: cfg.probe.theta0,
        eps: cfg.probe.eps,
        illuminated_segments: part.illuminated.len(),
        shadowed_segments: part.shadowed.len(),
    };
    ctx.writer.write_json("frames", &checks, &report)?;
    Ok(checks)
}

// ---------------------------------------------------------------------------
// mollify

#[derive(Serialize)]
struct MollifyRung {
    rho: f64,
    mass_defect: f64,
    l2_distance: f64,
    grad_sup: f64,
}

#[derive(Serialize)]
struct MollifyPotentialReport {
    name: String,
    rungs: Vec<MollifyRung>,
    grad_slope: f64,
}

fn run_mollify(ctx: &StageCtx) -> Result<Vec<CheckLine>> {
    let cfg = ctx.cfg;
    let section = cfg.cross_section()?;
    let grid = Arc::new(CylinderGrid::build(
        section,
        cfg.grid.h_plane,
        cfg.grid.h_axial,
        cfg.grid.half_length,
    )?);
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for (name, spec) in [
        ("a1", &cfg.potentials.a1),
        ("a2", &cfg.potentials.a2),
    ] {
        if matches!(spec, PotentialSpec::Zero) {
            continue;
        }
        let a = spec.sample(&grid)?;
        let mut rungs = Vec::new();
        for &rho in &cfg.ladder {
            let out = mollify(&a, &Mollifier::new(rho)?);
            if out.under_resolved {
                return Err(CgoError::UnderResolved(format!(
                    "mollifier at scale {rho} is narrower than the lattice"
                )));
            }
            let rung = MollifyRung {
                rho,
                mass_defect: (out.raw_mass - 1.0).abs(),
                l2_distance: a.l2_distance(&out.field)?,
                grad_sup: out.field.grad_sup_norm(),
            };
            rows.push(vec![
                name.to_string(),
                fmt(rung.rho),
                fmt(rung.mass_defect),
                fmt(rung.l2_distance),
                fmt(rung.grad_sup),
            ]);
            rungs.push(rung);
        }
        let mass_worst = rungs.iter().map(|r| r.mass_defect).fold(0.0, f64::max);
        checks.push(CheckLine::le(
            &format!("{name}/kernel_mass"),
            mass_worst,
            ctx.tols.mollifier_mass,
        ));
        let decreasing = rungs
            .windows(2)
            .all(|w| w[1].l2_distance < w[0].l2_distance);
        checks.push(CheckLine::flag(
            &format!("{name}/l2_strictly_decreasing"),
            decreasing,
        ));
        let rhos: Vec<f64> = rungs.iter().map(|r| r.rho).collect();
        let grads: Vec<f64> = rungs.iter().map(|r| r.grad_sup).collect();
        let slope = loglog_slope(&rhos, &grads);
        checks.push(CheckLine::le(
            &format!("{name}/grad_slope"),
            slope,
            ctx.tols.mollify_grad_slope_max,
        ));
        reports.push(MollifyPotentialReport {
            name: name.to_string(),
            rungs,
            grad_slope: slope,
        });
    }
    ctx.writer.write_csv(
        "mollify",
        &["potential", "rho", "mass_defect", "l2_distance", "grad_sup"],
        &rows,
    )?;
    ctx.writer.write_json("mollify", &checks, &reports)?;
    Ok(checks)
}

// ---------------------------------------------------------------------------
// cgo-build

#[derive(Serialize)]
struct PhaseDiagnostics {
    dbar_coarse: f64,
    dbar_fine: f64,
    dbar_order: f64,
    exact_over_gap: Vec<f64>,
    exact_drift: f64,
    sup_per_rho: Vec<f64>,
    sup_spread: f64,
    decay_slope: Option<f64>,
}

#[derive(Serialize)]
struct CgoStageReport {
    theta: [f64; 2],
    xi: [f64; 3],
    phase: PhaseDiagnostics,
    ladder: crate::cgo::CgoDecayReport,
    pde: Vec<crate::cgo::PdeCheck>,
}

fn stage_frame(cfg: &ExperimentConfig, section: &CrossSection) -> Result<DirectionFrame> {
    let xi = cfg.probe.xi[0];
    DirectionFrame::build(section, cfg.probe.theta0, [xi[0], xi[1]], xi[2])
}

fn run_cgo_build(ctx: &StageCtx) -> Result<Vec<CheckLine>> {
    let cfg = ctx.cfg;
    let section = cfg.cross_section()?;
    let frame = stage_frame(cfg, &section)?;
    let solve = cfg.solve_params();
    let cutoff = cfg.axial_cutoff();

    let carrier = Arc::new(CylinderGrid::build(
        section.clone(),
        cfg.grid.h_plane,
        cfg.grid.h_axial,
        cfg.grid.half_length,
    )?);
    let a = cfg.potentials.a1.sample(&carrier)?;

    let rho0 = cfg.ladder[0];
    let mut exact_over_gap = Vec::new();
    let mut phases = Vec::new();
    for &rho in &cfg.ladder {
        let a_rho = mollify(&a, &Mollifier::new(rho)?).field;
        let phase = cauchy_phase_on(
            &a_rho,
            &frame,
            1.0,
            &carrier,
            IndexBox::full(&carrier),
            None,
        )?;
        let res = dbar_residual(&phase, &a, &a_rho)?;
        if res.moll_gap_l2 > 0.0 {
            exact_over_gap.push(res.exact_l2 / res.moll_gap_l2);
        }
        phases.push(phase);
    }
    let ladder_sup = phase_ladder(
        &cfg.ladder,
        &phases.iter().collect::<Vec<_>>(),
    )?;
    let sup_spread = {
        let lo = ladder_sup.sup.iter().cloned().fold(f64::INFINITY, f64::min);
        if lo > 0.0 {
            ladder_sup.uniform_bound / lo
        } else {
            1.0
        }
    };

    let fine_grid = Arc::new(CylinderGrid::build(
        section.clone(),
        0.5 * cfg.grid.h_plane,
        0.5 * cfg.grid.h_axial,
        cfg.grid.half_length,
    )?);
    let a_fine = cfg.potentials.a1.sample(&fine_grid)?;
    let a_rho0_fine = mollify(&a_fine, &Mollifier::new(rho0)?).field;
    let fine_phase = cauchy_phase_on(
        &a_rho0_fine,
        &frame,
        1.0,
        &fine_grid,
        IndexBox::full(&fine_grid),
        None,
    )?;
    let dbar_fine = dbar_residual(&fine_phase, &a_fine, &a_rho0_fine)?;
    let a_rho0 = mollify(&a, &Mollifier::new(rho0)?).field;
    let coarse = dbar_residual(&phases[0], &a, &a_rho0)?;
    let dbar_order = (coarse.moll_l2 / dbar_fine.moll_l2).log2();

    let decay = {
        let sb = a_rho0
            .support_box()
            .ok_or_else(|| CgoError::Field("first potential is identically zero".into()))?;
        let window = 4.0 * frame.quad_radius
            + section.radius_sup()
            + cfg.grid.half_length
            + 1.0;
        let probe = cauchy_phase_on(&a_rho0, &frame, 1.0, &carrier, sb, Some(window))?;
        phase_decay(&probe)?
    };

    let drift = {
        let lo = exact_over_gap.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = exact_over_gap.iter().cloned().fold(0.0f64, f64::max);
        if lo.is_finite() && lo > 0.0 {
            hi / lo
        } else {
            1.0
        }
    };

    let mut builds = Vec::new();
    for &rho in &cfg.ladder {
        let params = CgoParams {
            frame: frame.clone(),
            sigma: 1.0,
            rho,
            cutoff: cutoff.clone(),
        };
        let grid = cgo_grid(&carrier, &params)?;
        let af = cfg.potentials.a1.sample(&grid)?;
        let qf = cfg.potentials.q1.sample(&grid)?;
        let a_rho = mollify(&af, &Mollifier::new(rho)?).field;
        let build = build_cgo(&grid, &af, &qf, &a_rho, &params, &solve, None)?;
        builds.push(build);
    }
    let ladder_report = decay_report(&builds.iter().collect::<Vec<_>>())?;
    let pde: Vec<_> = builds.iter().map(verify_pde).collect();

    let last = builds.last().expect("ladder is nonempty");
    let composed = last.composed();
    let bytes = field_bytes_complex(&last.grid, &composed.data)?;
    let path = ctx.writer.write_binary("cgo_composed", &bytes)?;
    let reread = std::fs::read(&path)?;
    let round = read_field_complex(&reread, &last.grid)?;
    let roundtrip_ok = round == composed.data;

    let nodes = boundary_nodes(&last.grid);
    let af_last = cfg.potentials.a1.sample(&last.grid)?;
    let traces = magnetic_traces(
        &last.grid,
        &composed.data,
        &last.params.linear_weight(),
        &af_last,
        &nodes,
    );
    let mut rows = Vec::new();
    for (i, bn) in traces.nodes.iter().enumerate() {
        let (gi, gj, gk) = last.grid.split(bn.lin as usize);
        let p = last.grid.pos(gi, gj, gk);
        rows.push(vec![
            bn.lin.to_string(),
            fmt(p[0]),
            fmt(p[1]),
            fmt(p[2]),
            fmt(traces.dirichlet[i].re),
            fmt(traces.dirichlet[i].im),
            fmt(traces.neumann[i].re),
            fmt(traces.neumann[i].im),
        ]);
    }
    ctx.writer.write_csv(
        "cgo_traces",
        &[
            "node",
            "x",
            "y",
            "z",
            "dirichlet_re",
            "dirichlet_im",
            "neumann_re",
            "neumann_im",
        ],
        &rows,
    )?;

    let non_increasing = ladder_report
        .quantity
        .windows(2)
        .all(|w| w[1] <= w[0]);
    let pde_worst = pde.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let checks = vec![
        CheckLine::ge("dbar_order", dbar_order, ctx.tols.dbar_order_min),
        CheckLine::le("dbar_exact_drift", drift, ctx.tols.fit_drift_max),
        CheckLine::le("phase_sup_spread", sup_spread, ctx.tols.phase_sup_spread_max),
        CheckLine::le(
            "phase_decay_slope",
            decay.slope.unwrap_or(0.0),
            ctx.tols.phase_decay_slope_max,
        ),
        CheckLine::flag("remainder_non_increasing", non_increasing),
        CheckLine::le(
            "remainder_slope",
            ladder_report.slope,
            ctx.tols.remainder_decay_slope_max,
        ),
        CheckLine::le("pde_residual_ratio", pde_worst, ctx.tols.pde_residual_c),
        CheckLine::flag("field_roundtrip", roundtrip_ok),
    ];
    let report = CgoStageReport {
        theta: frame.theta,
        xi: frame.xi(),
        phase: PhaseDiagnostics {
            dbar_coarse: coarse.moll_l2,
            dbar_fine: dbar_fine.moll_l2,
            dbar_order,
            exact_over_gap,
            exact_drift: drift,
            sup_per_rho: ladder_sup.sup.clone(),
            sup_spread,
            decay_slope: decay.slope,
        },
        ladder: ladder_report,
        pde,
    };
    ctx.writer.write_json("cgo_build", &checks, &report)?;
    Ok(checks)
}

// ---------------------------------------------------------------------------
// carleman

fn run_carleman(ctx: &StageCtx) -> Result<Vec<CheckLine>> {
    let cfg = ctx.cfg;
    let section = cfg.cross_section()?;
    let suite = CarlemanSuite::new(
        section,
        cfg.probe.theta0,
        cfg.potentials.a2.clone(),
        cfg.potentials.q1.clone(),
        cfg.grid.h_plane,
        cfg.run.seed,
        20,
    )?;
    let report = suite.report(&cfg.ladder)?;
    let checks = vec![
        CheckLine::le(
            "drift_convexified",
            report.drift_convexified,
            ctx.tols.fit_drift_max,
        ),
        CheckLine::le("drift_weighted", report.drift_weighted, ctx.tols.fit_drift_max),
        CheckLine::le(
            "drift_resolvent",
            report.drift_resolvent,
            ctx.tols.fit_drift_max,
        ),
        CheckLine::le("q_inflation", report.q_inflation, ctx.tols.carleman_q_factor),
        CheckLine::flag("homogeneity_exact", report.homogeneity_exact),
        CheckLine::flag("reversal_exact", report.reversal_exact),
    ];
    ctx.writer.write_json("carleman", &checks, &report)?;
    Ok(checks)
}

// ---------------------------------------------------------------------------
// recover-da

fn gradient_with_variant(spec: &PotentialSpec, v: GradientVariant) -> PotentialSpec {
    match spec.clone() {
        PotentialSpec::GradientField {
            center,
            radius_plane,
            radius_axial,
            amplitude,
            ..
        } => PotentialSpec::GradientField {
            center,
            radius_plane,
            radius_axial,
            amplitude,
            variant: v,
        },
        other => other,
    }
}

#[derive(Serialize)]
struct RecoverDaStageReport {
    identity: Vec<crate::recovery::FourierIdentityReport>,
    signal: crate::recovery::DaRecoveryReport,
    null: crate::recovery::DaRecoveryReport,
    null_to_signal: f64,
    gauge: crate::recovery::GaugeRecovery,
}

fn run_recover_da(ctx: &StageCtx) -> Result<Vec<CheckLine>> {
    let cfg = ctx.cfg;
    let section = cfg.cross_section()?;
    let h = cfg.grid.h_plane;
    let hl = cfg.grid.half_length;
    let rho0 = cfg.ladder[0];
    let mut checks = Vec::new();

    let mut identity = Vec::new();
    for (name, spec) in [
        ("a1", cfg.potentials.a1.clone()),
        ("a2", cfg.potentials.a2.clone()),
        (
            "gauge",
            gradient_with_variant(&cfg.potentials.gauge, GradientVariant::Analytic),
        ),
    ] {
        if matches!(spec, PotentialSpec::Zero) {
            continue;
        }
        let rep = verify_fourier_identity(&section, &spec, rho0, cfg.probe.xi[0], h, hl)?;
        let worst = rep
            .fine
            .rel_err
            .max(rep.fine.rel_err_flipped);
        checks.push(CheckLine::le(
            &format!("identity/{name}"),
            worst,
            ctx.tols.fourier_identity_rel,
        ));
        checks.push(CheckLine::ge(
            &format!("identity/{name}_refinement"),
            rep.improvement,
            ctx.tols.fourier_refine_factor,
        ));
        identity.push(rep);
    }

    let zero = PotentialSpec::Zero;
    let signal = recover_da(
        &section,
        &cfg.potentials.a2,
        &zero,
        h,
        hl,
        &cfg.ladder,
        &cfg.probe.xi,
        ctx.jobs,
    )?;
    let null_spec = gradient_with_variant(&cfg.potentials.gauge, GradientVariant::Analytic);
    let null = recover_da(
        &section,
        &null_spec,
        &zero,
        h,
        hl,
        &cfg.ladder,
        &cfg.probe.xi,
        ctx.jobs,
    )?;

    let grid = Arc::new(CylinderGrid::build(section.clone(), h, h, hl)?);
    let signal_norm = cfg.potentials.a2.sample(&grid)?.l2_norm();
    let null_norm = null_spec.sample(&grid)?.l2_norm();
    let null_to_signal = if signal.recovered_rms > 0.0 && null_norm > 0.0 {
        (null.recovered_rms / null_norm) / (signal.recovered_rms / signal_norm)
    } else {
        f64::INFINITY
    };

    checks.push(CheckLine::le(
        "signal_defect",
        signal.max_defect,
        ctx.tols.recovery_signal_rel,
    ));
    checks.push(CheckLine::flag(
        "signal_converged",
        signal.samples.iter().all(|s| !s.diverged),
    ));
    checks.push(CheckLine::le(
        "null_to_signal",
        null_to_signal,
        ctx.tols.recovery_null_rel,
    ));
    checks.push(CheckLine::le(
        "conjugate_symmetry",
        signal.conjugate_defect,
        ctx.tols.conjugate_symmetry,
    ));

    let gauge_spec = gradient_with_variant(&cfg.potentials.gauge, GradientVariant::Lattice);
    let gauge = gauge_reconstruction_check(&section, &gauge_spec, h, hl)?;
    checks.push(CheckLine::le(
        "gauge_sup_refinement",
        gauge.sup_err[1] / gauge.sup_err[0].max(f64::MIN_POSITIVE),
        ctx.tols.gauge_refine_ratio_max,
    ));
    checks.push(CheckLine::le(
        "gauge_grad_refinement",
        gauge.grad_err[1] / gauge.grad_err[0].max(f64::MIN_POSITIVE),
        ctx.tols.gauge_refine_ratio_max,
    ));

    let mut rows = Vec::new();
    for s in &signal.samples {
        rows.push(vec![
            fmt(s.xi[0]),
            fmt(s.xi[1]),
            fmt(s.xi[2]),
            s.pair[0].to_string(),
            s.pair[1].to_string(),
            fmt(s.recovered.re),
            fmt(s.recovered.im),
            fmt(s.oracle.re),
            fmt(s.oracle.im),
            fmt(s.defect),
            (s.diverged as u8).to_string(),
        ]);
    }
    ctx.writer.write_csv(
        "curl_samples",
        &[
            "xi_1",
            "xi_2",
            "xi_3",
            "component_j",
            "component_k",
            "recovered_re",
            "recovered_im",
            "oracle_re",
            "oracle_im",
            "rel_defect",
            "diverged",
        ],
        &rows,
    )?;

    let report = RecoverDaStageReport {
        identity,
        signal,
        null,
        null_to_signal,
        gauge,
    };
    ctx.writer.write_json("recover_da", &checks, &report)?;
    Ok(checks)
}

// ---------------------------------------------------------------------------
// recover-q

fn run_recover_q(ctx: &StageCtx) -> Result<Vec<CheckLine>> {
    let cfg = ctx.cfg;
    let section = cfg.cross_section()?;
    let report = recover_q(
        &section,
        &cfg.potentials.q1,
        &cfg.potentials.q2,
        &cfg.ladder,
        &cfg.axial_cutoff(),
        cfg.grid.h_plane,
        cfg.grid.half_length,
        &cfg.probe.xi,
    )?;
    let mut checks = vec![CheckLine::le(
        "conjugate_symmetry",
        report.conjugate_defect,
        ctx.tols.conjugate_symmetry,
    )];
    if report.plateau_margin > 0.0 {
        checks.push(CheckLine::le(
            "plateau_exact",
            report.max_rel_err,
            ctx.tols.same_nodes,
        ));
    }
    let mut rows = Vec::new();
    for s in &report.samples {
        for (r, v) in report.ladder.iter().zip(&s.per_rho) {
            rows.push(vec![
                fmt(s.xi[0]),
                fmt(s.xi[1]),
                fmt(s.xi[2]),
                fmt(*r),
                fmt(v.re),
                fmt(v.im),
                fmt(s.direct.re),
                fmt(s.direct.im),
            ]);
        }
    }
    ctx.writer.write_csv(
        "q_samples",
        &[
            "xi_1",
            "xi_2",
            "xi_3",
            "rho",
            "paired_re",
            "paired_im",
            "direct_re",
            "direct_im",
        ],
        &rows,
    )?;
    ctx.writer.write_json("recover_q", &checks, &report)?;
    Ok(checks)
}

// ---------------------------------------------------------------------------
// partial-data

fn auto_measured(section: &CrossSection, theta0: [f64; 2], eps: f64, margin: usize) -> Result<Vec<usize>> {
    let n = section.num_segments();
    let mut inc = vec![false; n];
    let base = theta0[1].atan2(theta0[0]);
    let probes = 9;
    for t in 0..probes {
        let frac = 2.0 * t as f64 / (probes - 1) as f64 - 1.0;
        let ang = base + frac * eps;
        let part = boundary_partition(section, [ang.cos(), ang.sin()], 0.0)?;
        for s in part.shadowed {
            inc[s] = true;
        }
    }
    let seed: Vec<usize> = (0..n).filter(|&s| inc[s]).collect();
    for s in seed {
        for d in 1..=margin {
            inc[(s + d) % n] = true;
            inc[(s + n - d) % n] = true;
        }
    }
    Ok((0..n).filter(|&s| inc[s]).collect())
}

fn run_partial_data(ctx: &StageCtx) -> Result<Vec<CheckLine>> {
    let cfg = ctx.cfg;
    let section = cfg.cross_section()?;
    let measured = match &cfg.partial.measured {
        Some(m) => m.clone(),
        None => auto_measured(
            &section,
            cfg.probe.theta0,
            cfg.probe.eps,
            cfg.partial.margin,
        )?,
    };
    let spec = PartialDataSpec {
        measured,
        theta0: cfg.probe.theta0,
        eps: cfg.probe.eps,
    };
    let report = partial_data_check(
        &section,
        &spec,
        &cfg.potentials.a2,
        &cfg.potentials.q1,
        cfg.probe.xi[0],
        cfg.grid.h_plane,
        cfg.grid.half_length,
        &cfg.ladder,
        &cfg.solve_params(),
    )?;
    let checks = vec![
        CheckLine::le("complement_full", report.complement_full, 0.0),
        CheckLine::le("fit_drift", report.fit_drift, ctx.tols.fit_drift_max),
    ];
    let mut rows = Vec::new();
    for r in &report.rungs {
        rows.push(vec![
            fmt(r.rho),
            fmt(r.complement),
            fmt(r.illuminated),
            fmt(r.measured),
            fmt(r.pairing_over_rho),
            fmt(r.moll_err),
            fmt(r.c_fit),
        ]);
    }
    ctx.writer.write_csv(
        "partial_data",
        &[
            "rho",
            "complement",
            "illuminated_flux",
            "measured",
            "pairing_over_rho",
            "moll_err",
            "c_fit",
        ],
        &rows,
    )?;
    ctx.writer.write_json("partial_data", &checks, &report)?;
    Ok(checks)
}

//! Subcommand implementations: spectrum, minimize, verify, plotdata.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use diracopt_core::axisym::{minimize_axisym, sample_profile, AxisymBasis};
use diracopt_core::geometry::{
    build_sphere_basis, build_torus_basis, evaluate_factor, ConformalFactor, SpectralBasis,
    SurfaceKind,
};
use diracopt_core::io::{
    fmt_f64, read_checkpoint, read_spectrum_rows, read_trace, write_basis, write_checkpoint,
    write_spectrum, write_trace_header, write_trace_record, Checkpoint,
};
use diracopt_core::variation::{minimize_with_observer, solve, MinimizeState, OptimizationTrace};
use serde::Serialize;

use crate::config::RunConfig;

pub fn build_basis(cfg: &RunConfig) -> anyhow::Result<SpectralBasis> {
    match cfg.surface_kind()? {
        SurfaceKind::RoundSphere => Ok(build_sphere_basis(
            cfg.basis.cutoff as u32,
            cfg.basis.grid_resolution,
        )?),
        SurfaceKind::FlatTorus => {
            let lattice = cfg
                .surface
                .lattice
                .ok_or_else(|| anyhow!("config error at surface.lattice: required"))?;
            Ok(build_torus_basis(
                lattice,
                cfg.spin_structure()?,
                cfg.basis.cutoff,
                cfg.basis.grid_resolution,
            )?)
        }
    }
}

fn initial_factor(
    cfg: &RunConfig,
    basis: &SpectralBasis,
    p: f64,
) -> anyhow::Result<ConformalFactor> {
    Ok(evaluate_factor(basis, &cfg.init, 0.0, p)?)
}

/// spectrum: solve the weighted eigenproblem for the configured β, write the
/// dump and print the table. β is normalized to unit L² so the table shows
/// the volume-normalized eigenvalues directly.
pub fn cmd_spectrum(cfg: &RunConfig) -> anyhow::Result<()> {
    let basis = build_basis(cfg)?;
    let beta = initial_factor(cfg, &basis, 2.0)?
        .normalized_lp(&basis.grid)
        .context("initial factor is identically zero")?;
    let k_show = cfg.problem.k.clamp(8, 16);
    let spectrum = solve(&basis, &beta, cfg.problem.k)?;

    let dir = cfg.output_root().join(cfg.run_id());
    std::fs::create_dir_all(&dir)?;
    let mut out = BufWriter::new(File::create(dir.join("spectrum.tsv"))?);
    write_spectrum(&spectrum, cfg.output.eigenvectors, &mut out)?;
    out.flush()?;
    if cfg.output.export_basis {
        let mut bout = BufWriter::new(File::create(dir.join("basis.tsv"))?);
        write_basis(&basis, &mut bout)?;
        bout.flush()?;
    }

    println!(
        "# surface {}  cutoff {}  modes {}  kernel dim {}",
        cfg.surface.kind,
        cfg.basis.cutoff,
        basis.n_modes(),
        spectrum.kernel_dim
    );
    println!("# k\tlambda\ti(k)\tI(k)\tresidual");
    for k in 1..=k_show.min(spectrum.positive.len()) {
        let c = spectrum.cluster(k);
        println!(
            "{k}\t{}\t{}\t{}\t{}",
            fmt_f64(spectrum.lambda(k)),
            c.lo,
            c.hi,
            fmt_f64(spectrum.residuals[k - 1])
        );
    }
    eprintln!("wrote {}", dir.join("spectrum.tsv").display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct RunSummary {
    run_id: String,
    surface: String,
    k: usize,
    lambda_estimate: f64,
    error_bar: f64,
    status: String,
    zero_count: usize,
    concentration_flagged: bool,
    final_el_residual: f64,
    final_max_local_mass: f64,
    iterations: usize,
    stopped_early: bool,
    seed: u64,
    cutoff: f64,
    grid_resolution: u32,
    p_schedule: Vec<f64>,
    delta_schedule: Vec<f64>,
}

fn write_summary(dir: &Path, cfg: &RunConfig, trace: &OptimizationTrace) -> anyhow::Result<()> {
    let summary = RunSummary {
        run_id: cfg.run_id(),
        surface: cfg.surface.kind.clone(),
        k: trace.k,
        lambda_estimate: trace.lambda_estimate,
        error_bar: trace.error_bar,
        status: trace.status.to_string(),
        zero_count: trace.final_zero_count,
        concentration_flagged: trace.status == diracopt_core::variation::RunStatus::Concentrating,
        final_el_residual: trace.final_el_residual,
        final_max_local_mass: trace.final_max_local_mass,
        iterations: trace.iterations.len(),
        stopped_early: trace.stopped_early,
        seed: cfg.optimizer.seed,
        cutoff: cfg.basis.cutoff,
        grid_resolution: cfg.basis.grid_resolution,
        p_schedule: cfg.problem.p_schedule.clone(),
        delta_schedule: cfg.optimizer.delta_schedule.clone(),
    };
    let mut f = File::create(dir.join("summary.json"))?;
    serde_json::to_writer_pretty(&mut f, &summary)?;
    f.write_all(b"\n")?;
    Ok(())
}

fn write_beta(
    dir: &Path,
    grid: &diracopt_core::geometry::Grid,
    beta: &ConformalFactor,
) -> anyhow::Result<()> {
    let mut f = BufWriter::new(File::create(dir.join("beta.tsv"))?);
    writeln!(f, "# diracopt beta v1")?;
    writeln!(f, "# node\tcoord0\tcoord1\tpos0\tpos1\tpos2\tbeta")?;
    for i in 0..grid.len() {
        writeln!(
            f,
            "{i}\t{}\t{}\t{}\t{}\t{}\t{}",
            fmt_f64(grid.coords[i][0]),
            fmt_f64(grid.coords[i][1]),
            fmt_f64(grid.positions[i][0]),
            fmt_f64(grid.positions[i][1]),
            fmt_f64(grid.positions[i][2]),
            fmt_f64(beta.values()[i])
        )?;
    }
    f.flush()?;
    Ok(())
}

/// minimize: run the continuation, stream the trace, checkpoint every N
/// iterations, write the final summary and β.
pub fn cmd_minimize(
    cfg: &RunConfig,
    resume: Option<&Path>,
    stop_after: Option<usize>,
) -> anyhow::Result<()> {
    let dir = cfg.output_root().join(cfg.run_id());
    std::fs::create_dir_all(&dir)?;
    // Effective config is itself a run artifact.
    std::fs::write(dir.join("config.toml"), toml::to_string_pretty(cfg)?)?;

    let params = cfg.minimize_params();
    let schedule = &cfg.problem.p_schedule;

    let trace = if cfg.problem.axisymmetric {
        if resume.is_some() {
            bail!("resume is supported for the general path only");
        }
        let basis = AxisymBasis::build(cfg.basis.cutoff as u32, cfg.basis.grid_resolution)?;
        let profile = sample_profile(&basis, &cfg.init)?;
        let trace = minimize_axisym(&basis, &profile, cfg.problem.k, schedule, &params)?;
        let mut tf = BufWriter::new(File::create(dir.join("trace.tsv"))?);
        write_trace_header(&mut tf)?;
        for r in &trace.iterations {
            write_trace_record(r, &mut tf)?;
        }
        tf.flush()?;
        write_beta(&dir, &basis.meridian_grid(), &trace.final_beta)?;
        trace
    } else {
        let basis = build_basis(cfg)?;
        let state = match resume {
            Some(path) => {
                let cp = read_checkpoint(&mut BufReader::new(File::open(path)?))?;
                if cp.k != cfg.problem.k {
                    bail!(
                        "checkpoint is for k={}, config has k={}",
                        cp.k,
                        cfg.problem.k
                    );
                }
                cp.into_state(&basis.grid)?
            }
            None => MinimizeState::fresh(initial_factor(cfg, &basis, schedule[0])?, params.theta),
        };

        let mut tf = BufWriter::new(File::create(dir.join("trace.tsv"))?);
        write_trace_header(&mut tf)?;
        let checkpoint_every = cfg.output.checkpoint_every;
        let k = cfg.problem.k;
        let dir_cb = dir.clone();
        let mut io_error: Option<std::io::Error> = None;
        let trace = {
            let mut observer = |record: &diracopt_core::variation::IterationRecord,
                                _beta: &ConformalFactor,
                                state: &MinimizeState|
             -> bool {
                if let Some(limit) = stop_after {
                    if record.iter >= limit {
                        // Persist the resumable state and stop before this
                        // record is committed.
                        let cp = Checkpoint::from_state(k, state);
                        if let Err(e) = File::create(dir_cb.join("checkpoint.tsv"))
                            .map_err(diracopt_core::Error::from)
                            .and_then(|f| {
                                let mut w = BufWriter::new(f);
                                write_checkpoint(&cp, &mut w)
                            })
                        {
                            io_error = Some(std::io::Error::other(e.to_string()));
                        }
                        return false;
                    }
                }
                if let Err(e) = write_trace_record(record, &mut tf) {
                    io_error = Some(std::io::Error::other(e.to_string()));
                    return false;
                }
                if record.iter.is_multiple_of(checkpoint_every) {
                    let cp = Checkpoint::from_state(k, state);
                    if let Err(e) = File::create(dir_cb.join("checkpoint.tsv"))
                        .map_err(diracopt_core::Error::from)
                        .and_then(|f| {
                            let mut w = BufWriter::new(f);
                            write_checkpoint(&cp, &mut w)
                        })
                    {
                        io_error = Some(std::io::Error::other(e.to_string()));
                        return false;
                    }
                }
                true
            };
            minimize_with_observer(&basis, k, schedule, &params, state, &mut observer)?
        };
        tf.flush()?;
        if let Some(e) = io_error {
            return Err(e.into());
        }
        write_beta(&dir, &basis.grid, &trace.final_beta)?;
        // Final spectrum dump for the ladder export.
        let spectrum = solve(&basis, &trace.final_beta, cfg.problem.k)?;
        let mut sf = BufWriter::new(File::create(dir.join("spectrum.tsv"))?);
        write_spectrum(&spectrum, cfg.output.eigenvectors, &mut sf)?;
        sf.flush()?;
        trace
    };

    write_summary(&dir, cfg, &trace)?;
    println!(
        "run {}: status {}, lambda {} ± {}, {} iterations",
        cfg.run_id(),
        trace.status,
        fmt_f64(trace.lambda_estimate),
        fmt_f64(trace.error_bar),
        trace.iterations.len()
    );
    eprintln!("artifacts in {}", dir.display());
    Ok(())
}

/// verify: run the acceptance criteria, print one line each, exit 1 on any
/// failure (handled by main). Full runs also emit the measurement report
/// {k, Λ estimate, error bar, partition bound, gap verdict}.
pub fn cmd_verify(only: Option<&str>, out_root: &Path) -> anyhow::Result<bool> {
    if let Some(name) = only {
        if !diracopt_core::acceptance::criterion_names().contains(&name) {
            bail!(
                "unknown criterion {name:?}; available: {}",
                diracopt_core::acceptance::criterion_names().join(", ")
            );
        }
    }
    let suite = diracopt_core::acceptance::Suite::new();
    let results = diracopt_core::acceptance::run_all_with_suite(only, &suite);
    let mut all = true;
    for r in &results {
        println!(
            "[{}] {:2}. {:<22} {:7.2}s  {}",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.seconds,
            r.detail
        );
        all &= r.passed;
    }
    if only.is_none() {
        let rows = diracopt_core::acceptance::measurement_report(&suite)
            .map_err(|e| anyhow!("report: {e}"))?;
        let dir = out_root.join("verify");
        std::fs::create_dir_all(&dir)?;
        let mut tsv = BufWriter::new(File::create(dir.join("report.tsv"))?);
        writeln!(tsv, "# diracopt report v1")?;
        writeln!(
            tsv,
            "# k\tlambda_estimate\terror_bar\taubin_bound\tgap_verdict"
        )?;
        for row in &rows {
            writeln!(
                tsv,
                "{}\t{}\t{}\t{}\t{}",
                row.k,
                fmt_f64(row.lambda_estimate),
                fmt_f64(row.error_bar),
                fmt_f64(row.aubin_bound),
                row.gap_verdict
            )?;
        }
        tsv.flush()?;
        let mut jf = File::create(dir.join("report.json"))?;
        serde_json::to_writer_pretty(&mut jf, &rows)?;
        jf.write_all(b"\n")?;
        eprintln!("report written under {}", dir.display());
    }
    Ok(all)
}

/// plotdata: columnar exports of a finished run.
pub fn cmd_plotdata(out_root: &Path, run_id: &str) -> anyhow::Result<()> {
    let dir = out_root.join(run_id);
    if !dir.is_dir() {
        bail!("missing run id {run_id:?} under {}", out_root.display());
    }

    // β heatmap: coordinates + value. Meridian profiles (axisymmetric runs)
    // are resampled at equal-area colatitudes so that per-node statistics
    // reflect surface fractions; full grids pass through unchanged.
    let beta_src = dir.join("beta.tsv");
    if beta_src.is_file() {
        let text = std::fs::read_to_string(&beta_src)?;
        let mut rows: Vec<(f64, f64, [f64; 3], f64)> = Vec::new();
        for line in text.lines() {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let p: Vec<&str> = line.split('\t').collect();
            if p.len() >= 7 {
                rows.push((
                    p[1].parse()?,
                    p[2].parse()?,
                    [p[3].parse()?, p[4].parse()?, p[5].parse()?],
                    p[6].parse()?,
                ));
            }
        }
        let meridian = rows.len() > 1 && rows.iter().all(|r| r.1 == rows[0].1);
        let mut out = BufWriter::new(File::create(dir.join("beta_heatmap.dat"))?);
        writeln!(out, "# x y z coord0 coord1 beta")?;
        if meridian {
            let n = rows.len().max(64);
            for i in 0..n {
                let z = 1.0 - (i as f64 + 0.5) * 2.0 / n as f64;
                let theta = z.acos();
                let beta = interpolate_profile(&rows, theta);
                writeln!(
                    out,
                    "{} {} {} {} {} {}",
                    fmt_f64(theta.sin()),
                    fmt_f64(0.0),
                    fmt_f64(z),
                    fmt_f64(theta),
                    fmt_f64(0.0),
                    fmt_f64(beta)
                )?;
            }
        } else {
            for (c0, c1, pos, beta) in &rows {
                writeln!(
                    out,
                    "{} {} {} {} {} {}",
                    fmt_f64(pos[0]),
                    fmt_f64(pos[1]),
                    fmt_f64(pos[2]),
                    fmt_f64(*c0),
                    fmt_f64(*c1),
                    fmt_f64(*beta)
                )?;
            }
        }
        out.flush()?;
    }

    // Trace curves.
    let trace_src = dir.join("trace.tsv");
    if trace_src.is_file() {
        let records = read_trace(&mut BufReader::new(File::open(&trace_src)?))?;
        let mut out = BufWriter::new(File::create(dir.join("trace_curves.dat"))?);
        writeln!(
            out,
            "# iter p objective lambda_bar_l2 el_residual damping max_local_mass"
        )?;
        for r in &records {
            writeln!(
                out,
                "{} {} {} {} {} {} {}",
                r.iter,
                fmt_f64(r.p),
                fmt_f64(r.objective),
                fmt_f64(r.lambda_bar_l2),
                fmt_f64(r.el_residual),
                fmt_f64(r.damping),
                fmt_f64(r.max_local_mass)
            )?;
        }
        out.flush()?;
    }

    // Spectrum ladder.
    let spec_src = dir.join("spectrum.tsv");
    if spec_src.is_file() {
        let (_, rows) = read_spectrum_rows(&mut BufReader::new(File::open(&spec_src)?))?;
        let mut out = BufWriter::new(File::create(dir.join("spectrum_ladder.dat"))?);
        writeln!(out, "# k lambda")?;
        for r in &rows {
            writeln!(out, "{} {}", r.k, fmt_f64(r.lambda))?;
        }
        out.flush()?;
    }

    eprintln!("plot data written under {}", dir.display());
    Ok(())
}

/// Piecewise-linear interpolation of a meridian profile in θ, clamped ends.
fn interpolate_profile(rows: &[(f64, f64, [f64; 3], f64)], theta: f64) -> f64 {
    if theta <= rows[0].0 {
        return rows[0].3;
    }
    if theta >= rows[rows.len() - 1].0 {
        return rows[rows.len() - 1].3;
    }
    let mut lo = 0usize;
    let mut hi = rows.len() - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if rows[mid].0 <= theta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = (theta - rows[lo].0) / (rows[hi].0 - rows[lo].0);
    rows[lo].3 * (1.0 - t) + rows[hi].3 * t
}

pub fn effective_config(
    path: Option<&PathBuf>,
    overrides: &crate::Overrides,
) -> anyhow::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::load(p).map_err(anyhow::Error::from)?,
        None => RunConfig::default(),
    };
    if let Some(k) = overrides.k {
        cfg.problem.k = k;
    }
    if let Some(seed) = overrides.seed {
        cfg.optimizer.seed = seed;
        if let diracopt_core::geometry::FactorForm::RandomSmooth { seed: s, .. } = &mut cfg.init {
            *s = seed;
        }
    }
    if let Some(c) = overrides.cutoff {
        cfg.basis.cutoff = c;
    }
    if let Some(g) = overrides.grid_resolution {
        cfg.basis.grid_resolution = g;
    }
    if let Some(m) = overrides.max_iters {
        cfg.optimizer.max_iters = m;
    }
    if let Some(id) = &overrides.run_id {
        cfg.output.run_id = Some(id.clone());
    }
    if let Some(out) = &overrides.out {
        cfg.output.directory = out.clone();
    }
    cfg.validate().map_err(anyhow::Error::from)?;
    Ok(cfg)
}

//! Versioned structured-text import/export: basis tables, spectrum dumps,
//! optimization traces and resumable checkpoints.
//!
//! All floating-point output carries 17 significant digits so files
//! round-trip bit-exactly and regression diffs stay meaningful.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::geometry::{
    ConformalFactor, DiracMode, Grid, SpectralBasis, SpinStructure, SurfaceKind, SurfaceSpec,
};
use crate::spectrum::WeightedSpectrum;
use crate::variation::{IterationRecord, MinimizeState};
use crate::{Error, Result};

/// 17-significant-digit float formatting; round-trips f64 exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

const BASIS_HEADER: &str = "# diracopt basis v1";
const SPECTRUM_HEADER: &str = "# diracopt spectrum v1";
const TRACE_HEADER: &str = "# diracopt trace v1";
const CHECKPOINT_HEADER: &str = "# diracopt checkpoint v1";

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Format(format!("bad float for {what}: {s}")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::Format(format!("bad integer for {what}: {s}")))
}

/// Writes the basis as a self-describing table. The value rows carry
/// {mode index, μ, node id, weight, four real spinor components}.
pub fn write_basis(basis: &SpectralBasis, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{BASIS_HEADER}")?;
    match basis.surface.kind {
        SurfaceKind::RoundSphere => writeln!(out, "surface\tsphere")?,
        SurfaceKind::FlatTorus => {
            writeln!(out, "surface\ttorus")?;
            let lat = basis.surface.lattice.unwrap();
            writeln!(
                out,
                "lattice\t{}\t{}\t{}\t{}",
                fmt_f64(lat[0][0]),
                fmt_f64(lat[0][1]),
                fmt_f64(lat[1][0]),
                fmt_f64(lat[1][1])
            )?;
            let spin = basis.surface.spin_structure.unwrap();
            writeln!(
                out,
                "spin\t{}\t{}",
                fmt_f64(spin.shifts[0]),
                fmt_f64(spin.shifts[1])
            )?;
        }
    }
    writeln!(out, "genus\t{}", basis.surface.genus)?;
    writeln!(out, "area\t{}", fmt_f64(basis.surface.area))?;
    writeln!(out, "cutoff\t{}", fmt_f64(basis.cutoff))?;
    writeln!(out, "kernel_tol\t{}", fmt_f64(basis.kernel_tol))?;
    writeln!(out, "grid\t{}\t{}", basis.grid.rows, basis.grid.cols)?;
    for (id, ((w, c), p)) in basis
        .grid
        .weights
        .iter()
        .zip(&basis.grid.coords)
        .zip(&basis.grid.positions)
        .enumerate()
    {
        writeln!(
            out,
            "node\t{id}\t{}\t{}\t{}\t{}\t{}\t{}",
            fmt_f64(*w),
            fmt_f64(c[0]),
            fmt_f64(c[1]),
            fmt_f64(p[0]),
            fmt_f64(p[1]),
            fmt_f64(p[2])
        )?;
    }
    for mode in &basis.modes {
        writeln!(
            out,
            "mode\t{}\t{}\t{}",
            mode.index,
            fmt_f64(mode.eigenvalue),
            mode.label
        )?;
    }
    for mode in &basis.modes {
        for node in 0..basis.n_nodes() {
            let v = basis.value(mode.index, node);
            writeln!(
                out,
                "value\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                mode.index,
                fmt_f64(mode.eigenvalue),
                node,
                fmt_f64(basis.grid.weights[node]),
                fmt_f64(v[0].re),
                fmt_f64(v[0].im),
                fmt_f64(v[1].re),
                fmt_f64(v[1].im)
            )?;
        }
    }
    Ok(())
}

/// Reads a basis table written by [`write_basis`]; invariants are revalidated.
pub fn read_basis(input: &mut impl BufRead) -> Result<SpectralBasis> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty basis file".into()))??;
    if header.trim() != BASIS_HEADER {
        return Err(Error::Format(format!(
            "unsupported basis version line: {header}"
        )));
    }
    let mut meta: HashMap<String, Vec<String>> = HashMap::new();
    let mut nodes: Vec<(usize, f64, [f64; 2], [f64; 3])> = Vec::new();
    let mut modes: Vec<DiracMode> = Vec::new();
    let mut values: Vec<(usize, usize, [f64; 4])> = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        match parts[0] {
            "node" => {
                nodes.push((
                    parse_usize(parts[1], "node id")?,
                    parse_f64(parts[2], "weight")?,
                    [
                        parse_f64(parts[3], "coord0")?,
                        parse_f64(parts[4], "coord1")?,
                    ],
                    [
                        parse_f64(parts[5], "pos0")?,
                        parse_f64(parts[6], "pos1")?,
                        parse_f64(parts[7], "pos2")?,
                    ],
                ));
            }
            "mode" => modes.push(DiracMode {
                index: parse_usize(parts[1], "mode index")?,
                eigenvalue: parse_f64(parts[2], "mu")?,
                label: parts.get(3).unwrap_or(&"").to_string(),
            }),
            "value" => values.push((
                parse_usize(parts[1], "mode index")?,
                parse_usize(parts[3], "node id")?,
                [
                    parse_f64(parts[5], "re0")?,
                    parse_f64(parts[6], "im0")?,
                    parse_f64(parts[7], "re1")?,
                    parse_f64(parts[8], "im1")?,
                ],
            )),
            key => {
                meta.entry(key.to_string())
                    .or_default()
                    .extend(parts[1..].iter().map(|s| s.to_string()));
            }
        }
    }
    let get = |key: &str| -> Result<&Vec<String>> {
        meta.get(key)
            .ok_or_else(|| Error::Format(format!("missing {key} line")))
    };
    let surface = match get("surface")?[0].as_str() {
        "sphere" => SurfaceSpec::round_sphere(),
        "torus" => {
            let lat = get("lattice")?;
            let spin = get("spin")?;
            SurfaceSpec::flat_torus(
                [
                    [
                        parse_f64(&lat[0], "lattice")?,
                        parse_f64(&lat[1], "lattice")?,
                    ],
                    [
                        parse_f64(&lat[2], "lattice")?,
                        parse_f64(&lat[3], "lattice")?,
                    ],
                ],
                SpinStructure::new(parse_f64(&spin[0], "spin")?, parse_f64(&spin[1], "spin")?)?,
            )?
        }
        other => return Err(Error::Format(format!("unknown surface {other}"))),
    };
    let grid_meta = get("grid")?;
    let rows = parse_usize(&grid_meta[0], "grid rows")?;
    let cols = parse_usize(&grid_meta[1], "grid cols")?;
    nodes.sort_by_key(|n| n.0);
    let grid = Grid {
        surface: surface.clone(),
        rows,
        cols,
        weights: nodes.iter().map(|n| n.1).collect(),
        coords: nodes.iter().map(|n| n.2).collect(),
        positions: nodes.iter().map(|n| n.3).collect(),
    };
    modes.sort_by_key(|m| m.index);
    let n_nodes = grid.len();
    let n_modes = modes.len();
    let mut vre = DMatrix::<f64>::zeros(2 * n_nodes, n_modes);
    let mut vim = DMatrix::<f64>::zeros(2 * n_nodes, n_modes);
    for (mode, node, v) in values {
        vre[(2 * node, mode)] = v[0];
        vim[(2 * node, mode)] = v[1];
        vre[(2 * node + 1, mode)] = v[2];
        vim[(2 * node + 1, mode)] = v[3];
    }
    let cutoff = parse_f64(&get("cutoff")?[0], "cutoff")?;
    let kernel_tol = parse_f64(&get("kernel_tol")?[0], "kernel_tol")?;
    SpectralBasis::from_parts(surface, modes, cutoff, kernel_tol, grid, vre, vim)
}

/// Writes the spectrum dump: one record {k, λₖ, cluster, residual} per
/// positive eigenvalue; eigenvector coefficients optional.
pub fn write_spectrum(
    spectrum: &WeightedSpectrum,
    with_eigenvectors: bool,
    out: &mut impl Write,
) -> Result<()> {
    writeln!(out, "{SPECTRUM_HEADER}")?;
    writeln!(out, "kernel_dim\t{}", spectrum.kernel_dim)?;
    writeln!(
        out,
        "b_orthonormality_residual\t{}",
        fmt_f64(spectrum.b_orthonormality_residual)
    )?;
    writeln!(out, "# k\tlambda\tcluster_lo\tcluster_hi\tresidual")?;
    for k in 1..=spectrum.positive.len() {
        let c = spectrum.cluster(k);
        writeln!(
            out,
            "eig\t{k}\t{}\t{}\t{}\t{}",
            fmt_f64(spectrum.positive[k - 1]),
            c.lo,
            c.hi,
            fmt_f64(spectrum.residuals[k - 1])
        )?;
    }
    if with_eigenvectors {
        writeln!(out, "# eigenvectors v1: k\tmode\tre\tim")?;
        for k in 1..=spectrum.positive.len() {
            let v = spectrum.eigenvector(k);
            for (mode, c) in v.iter().enumerate() {
                writeln!(
                    out,
                    "vec\t{k}\t{mode}\t{}\t{}",
                    fmt_f64(c.re),
                    fmt_f64(c.im)
                )?;
            }
        }
    }
    Ok(())
}

/// One parsed row of a spectrum dump.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub k: usize,
    pub lambda: f64,
    pub cluster_lo: usize,
    pub cluster_hi: usize,
    pub residual: f64,
}

pub fn read_spectrum_rows(input: &mut impl BufRead) -> Result<(usize, Vec<SpectrumRow>)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty spectrum file".into()))??;
    if header.trim() != SPECTRUM_HEADER {
        return Err(Error::Format(format!(
            "unsupported spectrum version: {header}"
        )));
    }
    let mut kernel_dim = 0usize;
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        match parts[0] {
            "kernel_dim" => kernel_dim = parse_usize(parts[1], "kernel_dim")?,
            "eig" => rows.push(SpectrumRow {
                k: parse_usize(parts[1], "k")?,
                lambda: parse_f64(parts[2], "lambda")?,
                cluster_lo: parse_usize(parts[3], "cluster_lo")?,
                cluster_hi: parse_usize(parts[4], "cluster_hi")?,
                residual: parse_f64(parts[5], "residual")?,
            }),
            _ => {}
        }
    }
    Ok((kernel_dim, rows))
}

/// Appends trace records, one line per iteration.
pub fn write_trace_header(out: &mut impl Write) -> Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    writeln!(
        out,
        "# iter\tp\tdelta\tobjective\tlambda_bar_l2\tel_residual\tdamping\tmax_local_mass\tzero_count\tcluster_lo\tcluster_hi"
    )?;
    Ok(())
}

pub fn write_trace_record(record: &IterationRecord, out: &mut impl Write) -> Result<()> {
    writeln!(
        out,
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        record.iter,
        fmt_f64(record.p),
        fmt_f64(record.delta),
        fmt_f64(record.objective),
        fmt_f64(record.lambda_bar_l2),
        fmt_f64(record.el_residual),
        fmt_f64(record.damping),
        fmt_f64(record.max_local_mass),
        record.zero_count,
        record.cluster_lo,
        record.cluster_hi
    )?;
    Ok(())
}

pub fn read_trace(input: &mut impl BufRead) -> Result<Vec<IterationRecord>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty trace file".into()))??;
    if header.trim() != TRACE_HEADER {
        return Err(Error::Format(format!(
            "unsupported trace version: {header}"
        )));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p: Vec<&str> = line.split('\t').collect();
        if p.len() < 11 {
            return Err(Error::Format(format!("short trace row: {line}")));
        }
        out.push(IterationRecord {
            iter: parse_usize(p[0], "iter")?,
            p: parse_f64(p[1], "p")?,
            delta: parse_f64(p[2], "delta")?,
            objective: parse_f64(p[3], "objective")?,
            lambda_bar_l2: parse_f64(p[4], "lambda_bar_l2")?,
            el_residual: parse_f64(p[5], "el_residual")?,
            damping: parse_f64(p[6], "damping")?,
            max_local_mass: parse_f64(p[7], "max_local_mass")?,
            zero_count: parse_usize(p[8], "zero_count")?,
            cluster_lo: parse_usize(p[9], "cluster_lo")?,
            cluster_hi: parse_usize(p[10], "cluster_hi")?,
        });
    }
    Ok(out)
}

/// Serializable snapshot of a continuation in flight.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub k: usize,
    pub delta_idx: usize,
    pub p_idx: usize,
    pub iter_in_stage: usize,
    pub iter_global: usize,
    pub theta: f64,
    pub concentrating: bool,
    pub concentration_streak: usize,
    pub objective_window: Vec<f64>,
    pub stage_values: Vec<(f64, f64)>,
    pub leg_estimates: Vec<f64>,
    pub stage_initial_objective: Option<f64>,
    pub p: f64,
    pub floor: f64,
    pub beta_values: Vec<f64>,
}

impl Checkpoint {
    pub fn from_state(k: usize, state: &MinimizeState) -> Self {
        Checkpoint {
            k,
            delta_idx: state.delta_idx,
            p_idx: state.p_idx,
            iter_in_stage: state.iter_in_stage,
            iter_global: state.iter_global,
            theta: state.theta,
            concentrating: state.concentrating,
            concentration_streak: state.concentration_streak,
            objective_window: state.objective_window.clone(),
            stage_values: state.stage_values.clone(),
            leg_estimates: state.leg_estimates.clone(),
            stage_initial_objective: state.stage_initial_objective,
            p: state.beta.p(),
            floor: state.beta.floor(),
            beta_values: state.beta.values().to_vec(),
        }
    }

    pub fn into_state(self, grid: &Grid) -> Result<MinimizeState> {
        let beta = ConformalFactor::from_values(grid, self.beta_values, self.floor, self.p)?;
        Ok(MinimizeState {
            beta,
            delta_idx: self.delta_idx,
            p_idx: self.p_idx,
            iter_in_stage: self.iter_in_stage,
            iter_global: self.iter_global,
            theta: self.theta,
            objective_window: self.objective_window,
            concentration_streak: self.concentration_streak,
            concentrating: self.concentrating,
            stage_values: self.stage_values,
            leg_estimates: self.leg_estimates,
            stage_initial_objective: self.stage_initial_objective,
        })
    }
}

pub fn write_checkpoint(cp: &Checkpoint, out: &mut impl Write) -> Result<()> {
    writeln!(out, "{CHECKPOINT_HEADER}")?;
    writeln!(out, "k\t{}", cp.k)?;
    writeln!(out, "delta_idx\t{}", cp.delta_idx)?;
    writeln!(out, "p_idx\t{}", cp.p_idx)?;
    writeln!(out, "iter_in_stage\t{}", cp.iter_in_stage)?;
    writeln!(out, "iter_global\t{}", cp.iter_global)?;
    writeln!(out, "theta\t{}", fmt_f64(cp.theta))?;
    writeln!(out, "concentrating\t{}", u8::from(cp.concentrating))?;
    writeln!(out, "concentration_streak\t{}", cp.concentration_streak)?;
    write!(out, "objective_window\t{}", cp.objective_window.len())?;
    for v in &cp.objective_window {
        write!(out, "\t{}", fmt_f64(*v))?;
    }
    writeln!(out)?;
    write!(out, "stage_values\t{}", cp.stage_values.len())?;
    for (p, v) in &cp.stage_values {
        write!(out, "\t{}\t{}", fmt_f64(*p), fmt_f64(*v))?;
    }
    writeln!(out)?;
    write!(out, "leg_estimates\t{}", cp.leg_estimates.len())?;
    for v in &cp.leg_estimates {
        write!(out, "\t{}", fmt_f64(*v))?;
    }
    writeln!(out)?;
    match cp.stage_initial_objective {
        Some(v) => writeln!(out, "stage_initial\t1\t{}", fmt_f64(v))?,
        None => writeln!(out, "stage_initial\t0")?,
    }
    writeln!(out, "p\t{}", fmt_f64(cp.p))?;
    writeln!(out, "floor\t{}", fmt_f64(cp.floor))?;
    writeln!(out, "beta\t{}", cp.beta_values.len())?;
    for v in &cp.beta_values {
        writeln!(out, "{}", fmt_f64(*v))?;
    }
    Ok(())
}

pub fn read_checkpoint(input: &mut impl BufRead) -> Result<Checkpoint> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty checkpoint".into()))??;
    if header.trim() != CHECKPOINT_HEADER {
        return Err(Error::Format(format!(
            "unsupported checkpoint version: {header}"
        )));
    }
    let mut fields: HashMap<String, Vec<String>> = HashMap::new();
    let mut beta_values = Vec::new();
    let mut reading_beta = false;
    for line in lines {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if reading_beta {
            beta_values.push(parse_f64(&line, "beta value")?);
            continue;
        }
        let parts: Vec<&str> = line.split('\t').collect();
        if parts[0] == "beta" {
            reading_beta = true;
            beta_values.reserve(parse_usize(parts[1], "beta count")?);
            continue;
        }
        fields.insert(
            parts[0].to_string(),
            parts[1..].iter().map(|s| s.to_string()).collect(),
        );
    }
    let get = |key: &str| -> Result<&Vec<String>> {
        fields
            .get(key)
            .ok_or_else(|| Error::Format(format!("missing checkpoint field {key}")))
    };
    let window_raw = get("objective_window")?;
    let wn = parse_usize(&window_raw[0], "window len")?;
    let objective_window = (0..wn)
        .map(|i| parse_f64(&window_raw[1 + i], "window value"))
        .collect::<Result<Vec<_>>>()?;
    let sv_raw = get("stage_values")?;
    let sn = parse_usize(&sv_raw[0], "stage_values len")?;
    let stage_values = (0..sn)
        .map(|i| {
            Ok((
                parse_f64(&sv_raw[1 + 2 * i], "stage p")?,
                parse_f64(&sv_raw[2 + 2 * i], "stage value")?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let leg_raw = get("leg_estimates")?;
    let ln = parse_usize(&leg_raw[0], "leg len")?;
    let leg_estimates = (0..ln)
        .map(|i| parse_f64(&leg_raw[1 + i], "leg value"))
        .collect::<Result<Vec<_>>>()?;
    let si_raw = get("stage_initial")?;
    let stage_initial_objective = if si_raw[0] == "1" {
        Some(parse_f64(&si_raw[1], "stage initial")?)
    } else {
        None
    };
    Ok(Checkpoint {
        k: parse_usize(&get("k")?[0], "k")?,
        delta_idx: parse_usize(&get("delta_idx")?[0], "delta_idx")?,
        p_idx: parse_usize(&get("p_idx")?[0], "p_idx")?,
        iter_in_stage: parse_usize(&get("iter_in_stage")?[0], "iter_in_stage")?,
        iter_global: parse_usize(&get("iter_global")?[0], "iter_global")?,
        theta: parse_f64(&get("theta")?[0], "theta")?,
        concentrating: get("concentrating")?[0] == "1",
        concentration_streak: parse_usize(&get("concentration_streak")?[0], "streak")?,
        objective_window,
        stage_values,
        leg_estimates,
        stage_initial_objective,
        p: parse_f64(&get("p")?[0], "p")?,
        floor: parse_f64(&get("floor")?[0], "floor")?,
        beta_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_sphere_basis, build_torus_basis};

    #[test]
    fn basis_roundtrip_is_bit_exact() {
        let basis = build_sphere_basis(2, 4).unwrap();
        let mut buf = Vec::new();
        write_basis(&basis, &mut buf).unwrap();
        let read = read_basis(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(read.n_modes(), basis.n_modes());
        assert_eq!(read.n_nodes(), basis.n_nodes());
        for m in 0..basis.n_modes() {
            assert_eq!(read.modes[m].eigenvalue, basis.modes[m].eigenvalue);
            for node in 0..basis.n_nodes() {
                assert_eq!(read.value(m, node), basis.value(m, node));
            }
        }
        assert_eq!(read.grid.weights, basis.grid.weights);
    }

    #[test]
    fn torus_basis_roundtrip() {
        let basis = build_torus_basis(
            [[1.0, 0.0], [0.0, 1.0]],
            SpinStructure::new(0.5, 0.0).unwrap(),
            7.0,
            8,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_basis(&basis, &mut buf).unwrap();
        let read = read_basis(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(read.kernel_dim(), basis.kernel_dim());
        assert_eq!(read.surface, basis.surface);
    }

    #[test]
    fn version_line_is_mandatory() {
        let data = b"surface\tsphere\n";
        let err = read_basis(&mut std::io::BufReader::new(&data[..])).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn spectrum_dump_roundtrip() {
        let basis = build_sphere_basis(3, 6).unwrap();
        let beta = ConformalFactor::constant(&basis.grid, 1.0, 2.0).unwrap();
        let spec = crate::variation::solve(&basis, &beta, 4).unwrap();
        let mut buf = Vec::new();
        write_spectrum(&spec, false, &mut buf).unwrap();
        let (kernel, rows) = read_spectrum_rows(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(kernel, 0);
        assert_eq!(rows.len(), spec.positive.len());
        assert_eq!(rows[0].lambda, spec.positive[0]);
        assert_eq!(rows[2].cluster_lo, 3);
        assert_eq!(rows[2].cluster_hi, 6);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let basis = build_sphere_basis(2, 4).unwrap();
        let beta = ConformalFactor::constant(&basis.grid, 0.3, 2.25).unwrap();
        let mut state = MinimizeState::fresh(beta, 0.5);
        state.delta_idx = 1;
        state.p_idx = 2;
        state.iter_in_stage = 7;
        state.iter_global = 40;
        state.objective_window = vec![3.1, 3.05];
        state.stage_values = vec![(2.5, 3.7), (2.25, 3.66)];
        state.leg_estimates = vec![3.62];
        state.stage_initial_objective = Some(3.8);
        let cp = Checkpoint::from_state(2, &state);
        let mut buf = Vec::new();
        write_checkpoint(&cp, &mut buf).unwrap();
        let read = read_checkpoint(&mut std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(read, cp);
        let restored = read.into_state(&basis.grid).unwrap();
        assert_eq!(restored.beta.values(), state.beta.values());
        assert_eq!(restored.objective_window, state.objective_window);
    }
}

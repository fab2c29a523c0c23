use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use msflow_core::{
    assemble_a0, check_invariants, fit_decay_rate, run, spectrum_check, symbol_halfspace, symbol_strip, Error,
    EllipticGrid, LinearizedOperator, StepperConfig, Trajectory,
};

use crate::config::RunConfig;
use crate::verify::{self, Status};

fn prepare(config: &RunConfig, command: &str) -> Result<PathBuf> {
    let dir = config.output.dir.clone();
    fs::create_dir_all(&dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    write_file(&dir.join("manifest.txt"), config.manifest(command).as_bytes())?;
    Ok(dir)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn with_writer(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn simulate(config: &RunConfig) -> Result<ExitCode> {
    let dir = prepare(config, "simulate")?;
    let h0 = config.initial_height()?;
    let stepper = StepperConfig::new(config.dt(), config.elliptic_grid())
        .with_scheme(config.stepper.scheme.into())
        .with_safety(config.stepper.safety)
        .with_output_every(config.stepper.output_every);

    let trajectory = match run(&h0, config.t_final(), &stepper) {
        Ok(t) => t,
        Err(e @ Error::SimulationFailed { .. }) => {
            if let Error::SimulationFailed { state, .. } = &e {
                let nodes = h0.nodes();
                with_writer(&dir.join("failed_state.dat"), |out| {
                    writeln!(out, "# x h")?;
                    for (x, h) in nodes.iter().zip(state) {
                        writeln!(out, "{x:.17e} {h:.17e}")?;
                    }
                    Ok(())
                })?;
            }
            return Err(e).context("simulation failed; last accepted state written to failed_state.dat");
        }
        Err(e) => return Err(e.into()),
    };

    with_writer(&dir.join("trajectory.dat"), |out| trajectory.write_columns(out))?;
    with_writer(&dir.join("steps.dat"), |out| {
        writeln!(out, "# t dt volume energy deviation mean_forcing")?;
        for r in &trajectory.log {
            writeln!(
                out,
                "{:.17e} {:.17e} {:.17e} {:.17e} {:.17e} {:.17e}",
                r.time, r.dt, r.volume, r.energy, r.deviation, r.mean_forcing
            )?;
        }
        Ok(())
    })?;
    with_writer(&dir.join("profiles.dat"), |out| {
        writeln!(out, "# t h_0 ... h_(N-1)")?;
        for s in &trajectory.snapshots {
            write!(out, "{:.17e}", s.time)?;
            for v in s.h.values() {
                write!(out, " {v:.17e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    })?;
    let last = trajectory.final_state();
    with_writer(&dir.join("final_state.dat"), |out| {
        writeln!(out, "# x h")?;
        for (x, h) in last.h.nodes().iter().zip(last.h.values()) {
            writeln!(out, "{x:.17e} {h:.17e}")?;
        }
        Ok(())
    })?;
    let summary = summary(config, &trajectory);
    write_file(&dir.join("summary.txt"), summary.as_bytes())?;
    print!("{summary}");
    println!("output written to {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn summary(config: &RunConfig, trajectory: &Trajectory) -> String {
    let g = config.geometry();
    let a1 = symbol_strip(g.wavenumber(1), &g);
    let last = trajectory.final_state();
    let inv = check_invariants(trajectory);
    let mut lines = vec![
        format!("accepted_steps={}", trajectory.log.len() - 1),
        format!("halvings={}", trajectory.halvings),
        format!("final_dt={:.17e}", trajectory.final_dt),
        format!("final_time={:.17e}", last.time),
        format!("a1={a1:.17e}"),
    ];
    match fit_decay_rate(trajectory) {
        Ok(fit) => {
            lines.push(format!("fitted_rate={:.17e}", fit.rate));
            lines.push(format!("fitted_rate_relative_error={:.17e}", (fit.rate - a1).abs() / a1));
            lines.push(format!("fit_residual={:.17e}", fit.residual));
            lines.push(format!("fit_points={}", fit.points));
        }
        Err(e) => {
            lines.push("fitted_rate=none".into());
            lines.push(format!("fit_note={e}"));
        }
    }
    lines.push(format!("volume_drift={:.17e}", inv.volume_drift));
    lines.push(format!("energy_violations={}", inv.energy_violations));
    lines.push(format!("max_energy_increase={:.17e}", inv.max_energy_increase));
    lines.push(format!("mean_drift={:.17e}", inv.mean_drift));
    lines.push(format!("final_deviation={:.17e}", last.h.deviation()));
    lines.push(format!("final_mean={:.17e}", last.h.mean()));
    lines.join("\n") + "\n"
}

pub fn spectrum(config: &RunConfig) -> Result<ExitCode> {
    let dir = prepare(config, "spectrum")?;
    let g = config.geometry();
    let grid = EllipticGrid::square(config.spectrum.resolution)?;
    let op = LinearizedOperator::new(g, config.spectrum.nodes, grid)?;
    let matrix = assemble_a0(&op)?;
    let report = spectrum_check(&matrix, &g)?;
    write_file(&dir.join("spectrum.txt"), report.to_string().as_bytes())?;
    println!(
        "kernel_dimension={} rank={}/{} smallest_nonzero={:.17e} a1={:.17e} passed={}",
        report.kernel_dimension,
        report.rank,
        config.spectrum.nodes,
        report.smallest_nonzero().unwrap_or(f64::NAN),
        report.a1,
        report.passed()
    );
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

pub fn symbol(config: &RunConfig) -> Result<ExitCode> {
    let dir = prepare(config, "symbol")?;
    let g = config.geometry();
    let omegas = &config.symbol.omegas;
    with_writer(&dir.join("symbol.dat"), |out| {
        write!(out, "# m k a_strip halfspace")?;
        for w in omegas {
            write!(out, " a_omega={w:.17e}")?;
        }
        writeln!(out)?;
        for m in 0..=config.symbol.modes {
            let k = g.wavenumber(m);
            write!(
                out,
                "{m} {k:.17e} {:.17e} {:.17e}",
                symbol_strip(k, &g),
                2.0 * k.abs().powi(3)
            )?;
            for &w in omegas {
                write!(out, " {:.17e}", symbol_halfspace(k, w))?;
            }
            writeln!(out)?;
        }
        Ok(())
    })?;
    println!("symbol table written to {}", dir.join("symbol.dat").display());
    Ok(ExitCode::SUCCESS)
}

pub fn verify(config: &RunConfig) -> Result<ExitCode> {
    let dir = prepare(config, "verify")?;
    let results = verify::run_suite(config);
    let table = verify::render(&results);
    write_file(&dir.join("verify.txt"), table.as_bytes())?;
    print!("{table}");
    let failed = results.iter().any(|r| r.status == Status::Fail);
    Ok(if failed { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

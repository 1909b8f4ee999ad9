use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use weakmeter_core::algebra::{verify_fourier, verify_sl2, GeneratorKind};
use weakmeter_core::ensemble::{run_ensemble_parts, run_ensemble_recording, EnsembleReport};
use weakmeter_core::experiment::{CouplingMode, ExperimentSpec, ResolvedExperiment};
use weakmeter_core::fock::{canonical_operators, expectation, DEFAULT_TRUNCATION_TOL};
use weakmeter_core::husimi::{husimi_grid, Window, DEFAULT_RESOLUTION};
use weakmeter_core::weak::{ideal_measurement, residual_scan};
use weakmeter_core::{Error, FockConfig};

use crate::error::CliError;
use crate::report::{BranchReport, HusimiReport, ResidualScanReport, RunReport};

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Initial,
    Final,
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    ExperimentSpec::from_json(&text).map_err(|source| CliError::Spec {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(wrap)?;
    let mut out = BufWriter::new(file);
    write(&mut out).and_then(|_| out.flush()).map_err(wrap)
}

/// Writes `report` as pretty JSON to `out`, or to stdout.
pub fn emit(report: &RunReport, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    match out {
        Some(path) => write_file(path, |w| w.write_all(text.as_bytes())),
        None => io::stdout().write_all(text.as_bytes()).map_err(|source| CliError::Write {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn finish(mut report: RunReport, started: Instant, out: Option<&Path>) -> Result<RunReport> {
    report.wall_time_s = started.elapsed().as_secs_f64();
    emit(&report, out)?;
    Ok(report)
}

fn algebra_failure(report: &RunReport) -> Option<CliError> {
    let failed: Vec<String> = report
        .algebra
        .iter()
        .flatten()
        .filter(|r| !r.pass)
        .map(|r| format!("{} (residual {:e})", r.relation, r.residual))
        .collect();
    (!failed.is_empty()).then(|| CliError::AlgebraFailed(failed.join(", ")))
}

fn algebra_checks(cfg: &FockConfig) -> Vec<weakmeter_core::algebra::AlgebraReport> {
    let mut reports = verify_sl2(cfg);
    reports.extend(verify_fourier(cfg));
    reports
}

pub fn verify_algebra(dim: usize, buffer: usize, out: Option<&Path>) -> Result<RunReport> {
    let started = Instant::now();
    let cfg = FockConfig::new(dim, DEFAULT_TRUNCATION_TOL, buffer)?;
    let mut report = RunReport::new("verify-algebra", cfg);
    report.algebra = Some(algebra_checks(&cfg));
    let report = finish(report, started, out)?;
    match algebra_failure(&report) {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

fn base_report(command: &str, spec: &ExperimentSpec, resolved: &ResolvedExperiment) -> Result<RunReport> {
    let mut report = RunReport::new(command, resolved.shift.cfg);
    report.spec = Some(spec.clone());
    report.mode = Some(resolved.mode);
    report.weak_value = Some(resolved.shift.weak_value()?.into());
    report.shifts = resolved.shift.sweep(&resolved.strengths)?;
    Ok(report)
}

fn scan(resolved: &ResolvedExperiment) -> Result<Option<ResidualScanReport>> {
    if resolved.mode != CouplingMode::Weak || resolved.strengths.len() < 2 {
        return Ok(None);
    }
    Ok(Some(match residual_scan(&resolved.shift, &resolved.strengths) {
        Ok(s) => ResidualScanReport {
            slope: Some(s.slope),
            note: None,
        },
        Err(Error::DegenerateFit(note) | Error::InvalidInput(note)) => ResidualScanReport {
            slope: None,
            note: Some(note),
        },
        Err(e) => return Err(e.into()),
    }))
}

fn branches(resolved: &ResolvedExperiment) -> Result<Option<Vec<BranchReport>>> {
    let exp = &resolved.shift;
    if resolved.mode != CouplingMode::Strong || !matches!(exp.generator, GeneratorKind::P) {
        return Ok(None);
    }
    let can = canonical_operators(&exp.cfg);
    let found = ideal_measurement(
        exp.system.observable(),
        exp.system.pre(),
        &exp.meter,
        resolved.strengths[0],
        &exp.cfg,
    )?;
    let reports = found
        .into_iter()
        .map(|b| {
            Ok(BranchReport {
                eigenvalue: b.eigenvalue,
                probability: b.probability,
                mean_q: expectation(&can.q, &b.meter)?.re,
                mean_p: expectation(&can.p, &b.meter)?.re,
            })
        })
        .collect::<weakmeter_core::Result<Vec<_>>>()?;
    Ok(Some(reports))
}

pub fn run(spec_path: &Path, out: Option<&Path>, algebra: bool) -> Result<RunReport> {
    let started = Instant::now();
    let spec = load_spec(spec_path)?;
    let resolved = spec.resolve()?;
    let mut report = base_report("run", &spec, &resolved)?;
    report.residual_scan = scan(&resolved)?;
    report.branches = branches(&resolved)?;
    if algebra {
        report.algebra = Some(algebra_checks(&resolved.shift.cfg));
    }
    let report = finish(report, started, out)?;
    match algebra_failure(&report) {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

pub struct EnsembleArgs<'a> {
    pub spec: &'a Path,
    pub out: Option<&'a Path>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub samples_csv: Option<&'a Path>,
}

pub fn ensemble(args: EnsembleArgs<'_>) -> Result<RunReport> {
    let started = Instant::now();
    let mut spec = load_spec(args.spec)?;
    let sampler = spec
        .sampler
        .as_mut()
        .ok_or_else(|| CliError::Usage("the ensemble command needs a sampler block".into()))?;
    if let Some(seed) = args.seed {
        sampler.seed = seed;
    }
    if let Some(n) = args.samples {
        sampler.n_samples = n;
    }
    let resolved = spec.resolve()?;
    let sampler = resolved.sampler.clone().expect("sampler present");
    let mut report = base_report("ensemble", &spec, &resolved)?;
    let hermitian = resolved.shift.readout.operator(&resolved.shift.cfg)?.is_hermitian();
    let mut reports: Vec<EnsembleReport> = Vec::new();
    if let Some(csv) = args.samples_csv {
        if resolved.strengths.len() != 1 || !hermitian {
            return Err(CliError::Usage(
                "--samples-csv needs a single coupling strength and a Hermitian readout".into(),
            ));
        }
        let (rep, samples) =
            run_ensemble_recording(&resolved.shift, resolved.strengths[0], &sampler)?.remove(0);
        write_file(csv, |w| samples.iter().try_for_each(|x| writeln!(w, "{x:?}")))?;
        reports.push(rep);
    } else {
        for &eps in &resolved.strengths {
            reports.extend(run_ensemble_parts(&resolved.shift, eps, &sampler)?);
        }
    }
    report.ensemble = Some(reports);
    finish(report, started, args.out)
}

pub fn husimi(spec_path: &Path, stage: Stage, out: &Path, report_path: Option<&Path>) -> Result<RunReport> {
    let started = Instant::now();
    let spec = load_spec(spec_path)?;
    let first = spec.resolve()?;
    let window = match spec.husimi_window()? {
        Some(w) => w,
        None => Window::for_state(&first.shift.meter, &first.shift.cfg)?,
    };
    let resolution = spec
        .husimi
        .as_ref()
        .and_then(|h| h.resolution)
        .unwrap_or(DEFAULT_RESOLUTION);
    let resolved = spec.resolve_with(window.z_max())?;
    let exp = &resolved.shift;
    let (label, psi) = match stage {
        Stage::Initial => ("initial", exp.meter.clone()),
        Stage::Final => {
            exp.weak_value()?;
            ("final", exp.final_meter(resolved.strengths[0])?)
        }
    };
    let grid = husimi_grid(&psi, &window, resolution, &exp.cfg)?;
    write_file(out, |w| grid.write_csv(w).map_err(io::Error::from))?;
    let (cq, cp) = grid.centroid();
    let (pq, pp, pd) = grid.peak();
    let mut report = base_report("husimi", &spec, &resolved)?;
    report.husimi = Some(HusimiReport {
        stage: label.to_string(),
        resolution,
        q_axis: grid.q_axis.clone(),
        p_axis: grid.p_axis.clone(),
        normalization: grid.normalization,
        centroid: [cq, cp],
        peak: [pq, pp, pd],
    });
    report.wall_time_s = started.elapsed().as_secs_f64();
    if let Some(path) = report_path {
        emit(&report, Some(path))?;
    }
    Ok(report)
}

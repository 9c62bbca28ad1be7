use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use hardedge::ensembles::{EnsembleSpec, Family};
use hardedge::gapprob::{
    brute_force_e_gap, e_gap_finite, e_hard, expansion_check_st0, prop_a1_residuals, write_gap_csv, JacobiBetaSpec,
};
use hardedge::hardedge::{
    FiniteKernel, Frame, FrameLimit, KernelExperiment, Scaling, BESSEL_AXIS, DEFAULT_LADDER, PRODUCT_AXIS,
};
use hardedge::moments::{
    fuss_catalan_f64, generating_function_coefficient, lattice_path_sum, laguerre_product_recurrence, scaled_moment,
    spectral_moment, write_moments_csv, ScaledMoment,
};
use hardedge::polya::{BiorthogonalEvaluator, InvariantResiduals};
use hardedge::Precision;

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Largest grid coordinate accepted in either frame.
const AXIS_MAX: f64 = 12.0;

#[derive(Parser, Debug)]
#[command(name = "hardedge", version, about = "Hard-edge kernels of Pólya ensembles: tables and checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write data here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, global = true, value_enum, default_value_t = PrecisionArg::Double)]
    precision: PrecisionArg,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Scaled kernel, limit and correction on a grid at one N.
    Kernel,
    /// Convergence order and coefficient over an N-ladder.
    Converge,
    /// Scaled spectral moments against Fuss–Catalan numbers.
    Moments,
    /// Jacobi β-ensemble gap probabilities and their 1/N coefficient.
    Gap,
    /// Every module invariant; nonzero exit on any failure.
    Verify,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PrecisionArg {
    Double,
    Extended,
}

impl From<PrecisionArg> for Precision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Extended => Precision::Extended,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    ensemble: Option<EnsembleSpec>,
    #[serde(alias = "N_ladder")]
    ladder: Option<Vec<usize>>,
    axis: Option<Vec<f64>>,
    frame: Option<Frame>,
    #[serde(default)]
    scaling: Scaling,
    #[serde(default)]
    subtract: bool,
    moments: Option<MomentsConfig>,
    gap: Option<GapConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct MomentsConfig {
    #[serde(rename = "M")]
    m: Vec<usize>,
    k_max: u32,
    #[serde(rename = "N")]
    n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct GapConfig {
    beta: f64,
    a: f64,
    b: u32,
    s: f64,
    ladder: Vec<usize>,
}

/// Failure of a run, mapped onto the exit-code contract.
#[derive(Debug)]
enum Failure {
    Config(String),
    Numerical(String),
    Io(String),
}

impl From<hardedge::Error> for Failure {
    fn from(e: hardedge::Error) -> Self {
        Failure::Numerical(e.to_string())
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

impl RunConfig {
    fn load(path: Option<&Path>) -> Outcome<Self> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self =
            serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Outcome<()> {
        if let Some(spec) = &self.ensemble {
            spec.validate().map_err(|e| Failure::Config(format!("ensemble: {e}")))?;
        }
        if let Some(l) = &self.ladder {
            check_ladder("ladder", l)?;
        }
        if let Some(axis) = &self.axis {
            if axis.is_empty() || axis.iter().any(|&x| !(x > 0.0 && x <= AXIS_MAX)) {
                return Err(Failure::Config(format!("axis values must lie in (0, {AXIS_MAX}]")));
            }
        }
        if let Some(m) = &self.moments {
            if m.m.is_empty() || m.m.iter().any(|&v| v == 0) || m.k_max == 0 {
                return Err(Failure::Config("moments: M entries and k_max must be positive".into()));
            }
        }
        if let Some(g) = &self.gap {
            check_ladder("gap.ladder", &g.ladder)?;
        }
        Ok(())
    }

    fn ensemble(&self) -> Outcome<&EnsembleSpec> {
        self.ensemble.as_ref().ok_or_else(|| Failure::Config("this command needs an \"ensemble\" section".into()))
    }

    /// Bessel frame where it exists, the family's own scale otherwise.
    fn frame(&self, spec: &EnsembleSpec) -> Frame {
        self.frame.unwrap_or(if spec.m() == 1 && spec.family != Family::MuttalibBorodinLaguerre {
            Frame::Bessel
        } else {
            Frame::Natural
        })
    }

    fn axis(&self, spec: &EnsembleSpec, frame: Frame) -> Vec<f64> {
        self.axis.clone().unwrap_or_else(|| match frame {
            Frame::Natural if spec.family != Family::JacobiUnitary => PRODUCT_AXIS.to_vec(),
            _ => BESSEL_AXIS.to_vec(),
        })
    }
}

fn check_ladder(name: &str, ladder: &[usize]) -> Outcome<()> {
    if ladder.is_empty() || ladder[0] == 0 || ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Failure::Config(format!("{name} must be a non-empty, strictly increasing list of positive sizes")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize)]
struct KernelRow {
    x: f64,
    y: f64,
    k_scaled: f64,
    limit: f64,
    correction: f64,
    residual: f64,
}

fn cmd_kernel(cfg: &RunConfig, precision: Precision) -> Outcome<Vec<KernelRow>> {
    let spec = cfg.ensemble()?;
    let frame = cfg.frame(spec);
    let axis = cfg.axis(spec, frame);
    let top = axis.iter().cloned().fold(0.0, f64::max);
    let scale = hardedge::hardedge::frame_scale(spec, frame, cfg.scaling)?;
    let kernel = FiniteKernel::with_precision(spec, 1.01 * scale * top, precision)?;
    let limit = FrameLimit::new(spec, frame, top)?;
    let n = spec.n as f64;
    let grid: Vec<(f64, f64)> = axis.iter().flat_map(|&x| axis.iter().map(move |&y| (x, y))).collect();
    let rows = grid
        .par_iter()
        .map(|&(x, y)| {
            let k_scaled = kernel.scaled(x, y, frame, cfg.scaling)?;
            let l = limit.limit(x, y)?;
            let correction = limit.correction(x, y)?;
            let residual = k_scaled - l - if cfg.subtract { correction / n } else { 0.0 };
            Ok(KernelRow { x, y, k_scaled, limit: l, correction, residual })
        })
        .collect::<hardedge::Result<Vec<_>>>()?;
    Ok(rows)
}

fn cmd_moments(cfg: &RunConfig) -> Outcome<Vec<ScaledMoment>> {
    let mc = cfg.moments.as_ref().ok_or_else(|| Failure::Config("this command needs a \"moments\" section".into()))?;
    let jobs: Vec<(usize, u32)> = mc.m.iter().flat_map(|&m| (1..=mc.k_max).map(move |k| (m, k))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(m, k)| scaled_moment(&vec![0.0; m], k, mc.n))
        .collect::<hardedge::Result<Vec<_>>>()?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
struct Check {
    check: String,
    value: f64,
    tolerance: f64,
    passed: bool,
}

impl Check {
    fn new(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { check: check.into(), value, tolerance, passed: value <= tolerance }
    }
}

fn default_invariant_specs() -> Vec<EnsembleSpec> {
    vec![
        EnsembleSpec::laguerre_product(&[0.0, 1.0], 4),
        EnsembleSpec::mb_laguerre(0.5, 2.0, 4),
        EnsembleSpec::laguerre_inverse_product(&[1.0], &[1.0], 4),
        EnsembleSpec::jacobi_unitary(1.0, 1.0, 4),
    ]
}

const INVARIANT_POINTS: [f64; 3] = [0.3, 1.0, 1.7];
const INVARIANT_NAMES: [&str; 4] = ["biorthogonality", "recurrence_p", "recurrence_q", "differential_identity"];

fn invariant_checks(spec: &EnsembleSpec, precision: Precision) -> hardedge::Result<Vec<Check>> {
    let ev = BiorthogonalEvaluator::new(spec.build()?.with_precision(precision))?;
    let r: InvariantResiduals = ev.invariant_residuals(&INVARIANT_POINTS)?;
    Ok(r.as_array()
        .iter()
        .zip(InvariantResiduals::TOLERANCES)
        .zip(INVARIANT_NAMES)
        .map(|((&v, tol), name)| Check::new(format!("{:?} a={:?} b={:?} N={} {name}", spec.family, spec.a, spec.b, spec.n), v, tol))
        .collect())
}

fn moment_checks() -> hardedge::Result<Vec<Check>> {
    let mut out = Vec::new();
    for m in 1..=3usize {
        let c = laguerre_product_recurrence(m)?;
        let worst = (1..=8u32)
            .map(|k| {
                let lp = lattice_path_sum(k, &c)?;
                let gf = generating_function_coefficient(k, &c)?;
                let fc = fuss_catalan_f64(k as u64, m as u64)?;
                Ok(((lp - gf).abs() + (gf / k as f64 - fc).abs()) / fc)
            })
            .collect::<hardedge::Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        out.push(Check::new(format!("lattice paths = Fuss-Catalan M={m} k<=8"), worst, 0.0));
    }
    for (a, n) in [(vec![0.0], 6), (vec![0.5, 1.0], 5)] {
        let ev = BiorthogonalEvaluator::new(EnsembleSpec::laguerre_product(&a, n).build()?)?;
        let worst = (1..=4).map(|k| Ok(spectral_moment(&ev, k)?.relative_gap())).collect::<hardedge::Result<Vec<f64>>>()?;
        out.push(Check::new(format!("moment identity a={a:?} N={n}"), worst.into_iter().fold(0.0, f64::max), 1e-8));
    }
    Ok(out)
}

fn gap_checks() -> hardedge::Result<Vec<Check>> {
    let mut out = Vec::new();
    // the b >= 2 torus route is checked at a looser tolerance than the Gauss route
    for (label, cases, tol) in [
        ("Gauss", [(2, 2.0, 0.0, 1), (3, 4.0, 1.0, 1)], 1e-6),
        ("torus", [(1, 2.0, 1.0, 2), (2, 2.0, 0.0, 2)], 1e-5),
    ] {
        let mut worst: f64 = 0.0;
        for (n, beta, a, b) in cases {
            let spec = JacobiBetaSpec::new(n, beta, a, b)?;
            for s in [0.2, 0.5, 0.8] {
                let bf = brute_force_e_gap(&spec, s)?;
                worst = worst.max((e_gap_finite(&spec, s)? - bf).abs() / bf);
            }
        }
        out.push(Check::new(format!("{label} route gap probability vs direct integration"), worst, tol));
    }
    out.push(Check::new("E_hard(0) = 1", (e_hard(1e-12, 1, 2.0)? - 1.0).abs(), 1e-9));
    for (s, b, beta) in [(1.0, 1, 2.0), (2.0, 2, 2.0), (1.5, 1, 4.0)] {
        let r = prop_a1_residuals(s, b, beta)?;
        out.push(Check::new(format!("contour relations s={s} b={b} beta={beta}"), r.iter().cloned().fold(0.0, f64::max), 1e-6));
    }
    Ok(out)
}

fn cmd_verify(cfg: &RunConfig, precision: Precision) -> Outcome<Vec<Check>> {
    let specs = match &cfg.ensemble {
        Some(s) => vec![s.clone()],
        None => default_invariant_specs(),
    };
    let mut checks = Vec::new();
    for spec in &specs {
        checks.extend(invariant_checks(spec, precision)?);
    }
    checks.extend(moment_checks()?);
    checks.extend(gap_checks()?);
    Ok(checks)
}

fn write_csv_rows<T: Serialize>(rows: &[T], out: &mut dyn Write) -> Outcome<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Failure::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Failure::Io(e.to_string()))
}

fn write_json<T: Serialize + ?Sized>(value: &T, out: &mut dyn Write) -> Outcome<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(out).map_err(|e| Failure::Io(e.to_string()))
}

fn run(cli: &Cli, out: &mut dyn Write) -> Outcome<()> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    if cli.config.is_none() && !matches!(cli.command, Command::Verify) {
        return Err(Failure::Config("--config is required for this command".into()));
    }
    let precision = Precision::from(cli.precision);
    match cli.command {
        Command::Kernel => {
            let rows = cmd_kernel(&cfg, precision)?;
            match cli.format {
                Format::Csv => write_csv_rows(&rows, out),
                Format::Json => write_json(&rows, out),
            }
        }
        Command::Converge => {
            let spec = cfg.ensemble()?.clone();
            let frame = cfg.frame(&spec);
            let axis = cfg.axis(&spec, frame);
            let ladder = cfg.ladder.clone().unwrap_or_else(|| DEFAULT_LADDER.to_vec());
            let report = KernelExperiment::new(spec, frame, cfg.scaling, cfg.subtract)
                .with_ladder(&ladder)
                .with_axis(&axis)
                .with_precision(precision)
                .run()?;
            eprintln!("{}: order {:.4}, coefficient {:.6e}", report.label, report.fitted_order, report.fitted_coefficient);
            match cli.format {
                Format::Csv => Ok(report.write_csv(out)?),
                Format::Json => write_json(&report, out),
            }
        }
        Command::Moments => {
            let rows = cmd_moments(&cfg)?;
            match cli.format {
                Format::Csv => Ok(write_moments_csv(&rows, out)?),
                Format::Json => write_json(&rows, out),
            }
        }
        Command::Gap => {
            let g = cfg.gap.as_ref().ok_or_else(|| Failure::Config("this command needs a \"gap\" section".into()))?;
            let check = expansion_check_st0(g.beta, g.a, g.b, g.s, &g.ladder)?;
            eprintln!(
                "fitted 1/N coefficient {:.6} (target {:.6}): {}",
                check.fitted_coefficient,
                check.target_coefficient,
                if check.passes() { "ok" } else { "MISMATCH" }
            );
            match cli.format {
                Format::Csv => write_gap_csv(&check, out)?,
                Format::Json => write_json(&check, out)?,
            }
            if check.passes() {
                Ok(())
            } else {
                Err(Failure::Numerical("fitted coefficient misses the predicted value".into()))
            }
        }
        Command::Verify => {
            let checks = cmd_verify(&cfg, precision)?;
            for c in &checks {
                eprintln!("{} {} ({:e} vs {:e})", if c.passed { "PASS" } else { "FAIL" }, c.check, c.value, c.tolerance);
            }
            match cli.format {
                Format::Csv => write_csv_rows(&checks, out)?,
                Format::Json => write_json(&checks, out)?,
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed == 0 {
                Ok(())
            } else {
                Err(Failure::Numerical(format!("{failed} of {} checks failed", checks.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.out {
        Some(path) => match fs::File::create(path) {
            Ok(file) => {
                let mut w = io::BufWriter::new(file);
                run(&cli, &mut w).and_then(|()| w.flush().map_err(|e| Failure::Io(e.to_string())))
            }
            Err(e) => Err(Failure::Config(format!("{}: {e}", path.display()))),
        },
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            run(&cli, &mut lock)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

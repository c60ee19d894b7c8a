use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use workhist::distributions::{
    build, comparison_report, jarzynski_report, moment_report, to_json, total_variation,
    trajectory_distributions, zeno_limit_distribution, BuildOptions, Origin, WorkDistribution,
};
use workhist::io::{fmt_sig, write_csv};
use workhist::operator::{thermal_state, DensityMatrix};
use workhist::protocol::{
    discretize, discretize_with, parse_protocol_config, DiscretizedProtocol, InitialState, ProtocolKind,
    ProtocolSpec, RunSettings,
};
use workhist::trajectories::{spill_records, Method};
use workhist::Error;

use crate::Axis;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RESOURCE: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;
pub const EXIT_REGRESSION: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config { .. } | Error::Shape(_) | Error::Domain(_) | Error::Io(_) => EXIT_CONFIG,
            Error::Resource { .. } => EXIT_RESOURCE,
            Error::NotHermitian { .. }
            | Error::NotUnitary { .. }
            | Error::InvalidDensity(_)
            | Error::NumericalFailure { .. }
            | Error::Consistency(_) => EXIT_NUMERIC,
        };
        Self { code, message: e.to_string() }
    }
}

/// Writes to stdout, tolerating a closed pipe.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::usage(format!("{}: {e}", path.display()))
}

pub struct Context {
    pub out: PathBuf,
    pub strict_degeneracy: bool,
}

impl Context {
    /// Relative paths from the config are placed under `--out`.
    fn resolve(&self, path: Option<&Path>, default: &str) -> PathBuf {
        match path {
            Some(p) if p.is_absolute() => p.to_path_buf(),
            Some(p) => self.out.join(p),
            None => self.out.join(default),
        }
    }
}

pub struct Loaded {
    pub spec: ProtocolSpec,
    pub settings: RunSettings,
}

impl Loaded {
    fn discretize(&self, k: usize) -> Result<DiscretizedProtocol, Failure> {
        Ok(discretize_with(&self.spec, k, &self.settings.discretize)?)
    }

    fn build_options(&self, method: Method) -> BuildOptions {
        BuildOptions {
            bin_tol: self.settings.bin_tol,
            guard: self.settings.guard,
            method,
        }
    }
}

pub fn load(path: &Path, ctx: &Context) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let (spec, mut settings) = parse_protocol_config(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    })?;
    settings.discretize.strict_degeneracy |= ctx.strict_degeneracy;
    Ok(Loaded { spec, settings })
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| io_failure(path, e))?))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    let mut f = create(path)?;
    f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(|e| io_failure(path, e))
}

fn write_dist(path: &Path, dist: &WorkDistribution) -> Result<(), Failure> {
    let mut f = create(path)?;
    write_csv(dist, &mut f)?;
    f.flush().map_err(|e| io_failure(path, e))
}

/// `<dir>/<stem>_<origin>.csv` next to the configured CSV path.
fn csv_for(base: &Path, origin: Origin) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("dist");
    base.with_file_name(format!("{stem}_{}.csv", origin.name()))
}

fn summary_line(k: usize, dist: &WorkDistribution) -> String {
    format!(
        "{} K={k} bins={} total={} mean={} variance={} min_weight={}",
        dist.origin().name(),
        dist.len(),
        fmt_sig(dist.total()),
        fmt_sig(dist.mean()),
        fmt_sig(dist.variance()),
        fmt_sig(dist.min_weight()),
    )
}

pub fn dist(ctx: &Context, cfg: &Loaded) -> Result<(), Failure> {
    let s = &cfg.settings;
    let proto = cfg.discretize(s.k)?;
    let rho = s.initial.density(proto.initial_hamiltonian())?;
    let opts = cfg.build_options(s.method);

    if let Some(spill) = &s.spill_path {
        let path = ctx.resolve(Some(spill), "");
        let mut f = create(&path)?;
        let n = spill_records(&proto, &rho, &s.guard, &mut f)?;
        f.flush().map_err(|e| io_failure(&path, e))?;
        eprintln!("spilled {n} trajectories to {}", path.display());
    }

    let base = ctx.resolve(s.csv_path.as_deref(), "dist.csv");
    let mut lines = Vec::new();
    for &origin in &s.distributions {
        let d = build(origin, &proto, &rho, &opts)?;
        let path = csv_for(&base, origin);
        write_dist(&path, &d)?;
        let line = summary_line(s.k, &d);
        emit(&format!("{line}  -> {}\n", path.display()));
        lines.push(line);
    }

    let report = ctx.resolve(s.report_path.as_deref(), "report.txt");
    if let Some(dir) = report.parent() {
        fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&report)
        .map_err(|e| io_failure(&report, e))?;
    for line in lines {
        writeln!(f, "{line}").map_err(|e| io_failure(&report, e))?;
    }
    Ok(())
}

pub fn compare(ctx: &Context, cfg: &Loaded) -> Result<(), Failure> {
    let s = &cfg.settings;
    let proto = cfg.discretize(s.k)?;
    let rho = s.initial.density(proto.initial_hamiltonian())?;
    let beta = s.initial.beta().filter(|&b| b > 0.0);
    let report = comparison_report(&proto, &rho, beta, &cfg.build_options(s.method))?;
    let json = to_json(&report)?;
    write_text(&ctx.resolve(s.report_path.as_deref(), "compare.json"), &format!("{json}\n"))?;
    emit(&format!("{json}\n"));
    Ok(())
}

pub fn moments(ctx: &Context, cfg: &Loaded, max_order: u32) -> Result<(), Failure> {
    let s = &cfg.settings;
    let proto = cfg.discretize(s.k)?;
    let rho = s.initial.density(proto.initial_hamiltonian())?;
    let opts = cfg.build_options(s.method);
    let reports = s
        .distributions
        .iter()
        .map(|&o| moment_report(&build(o, &proto, &rho, &opts)?, &proto, &rho, max_order))
        .collect::<Result<Vec<_>, _>>()?;
    let json = to_json(&reports)?;
    write_text(&ctx.resolve(s.report_path.as_deref(), "moments.json"), &format!("{json}\n"))?;
    emit(&format!("{json}\n"));
    Ok(())
}

struct SweepRow {
    value: f64,
    k: usize,
    beta: Option<f64>,
    mean: f64,
    delta_u: f64,
    jarzynski: Option<(f64, f64, f64, f64)>,
    zeno_tv: Option<f64>,
}

pub const SWEEP_HEADER: &str =
    "value,K,beta,mean,delta_u,first_moment_gap,jarzynski_lhs,jarzynski_rhs,jarzynski_gap,jarzynski_gap_closed_form,zeno_tv";

fn sweep_point(cfg: &Loaded, proto: &DiscretizedProtocol, rho: &DensityMatrix, beta: Option<f64>, value: f64) -> Result<SweepRow, Failure> {
    let opts = cfg.build_options(Method::Auto);
    let (hist, meas) = trajectory_distributions(proto, rho, &opts)?;
    let delta_u = workhist::distributions::closed_form_moment(proto, rho, 1)?;
    let jarzynski = match beta {
        None => None,
        // e^{-0 w} averages to the norm and both partition functions coincide.
        Some(0.0) => Some((1.0, 1.0, 0.0, 0.0)),
        Some(b) => {
            let r = jarzynski_report(Some(&hist), proto, rho, b)?;
            Some((r.lhs, r.rhs, r.gap, r.lhs_closed_form - r.rhs))
        }
    };
    let zeno_tv = match cfg.spec.kind {
        ProtocolKind::LinearRamp { .. } => {
            let limit = zeno_limit_distribution(proto, &cfg.spec, rho, cfg.settings.bin_tol)?;
            Some(total_variation(&meas, &limit))
        }
        _ => None,
    };
    Ok(SweepRow {
        value,
        k: proto.k,
        beta,
        mean: hist.mean(),
        delta_u,
        jarzynski,
        zeno_tv,
    })
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let j = r.jarzynski;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            fmt_sig(r.value),
            r.k,
            opt(r.beta),
            fmt_sig(r.mean),
            fmt_sig(r.delta_u),
            fmt_sig(r.mean - r.delta_u),
            opt(j.map(|j| j.0)),
            opt(j.map(|j| j.1)),
            opt(j.map(|j| j.2)),
            opt(j.map(|j| j.3)),
            opt(r.zeno_tv),
        );
    }
    out
}

pub fn sweep(ctx: &Context, cfg: &Loaded, axis: Axis, values: &[f64]) -> Result<(), Failure> {
    if values.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Failure::usage("sweep values must be strictly ascending"));
    }
    let s = &cfg.settings;
    let mut rows = Vec::with_capacity(values.len());
    match axis {
        Axis::K => {
            if matches!(cfg.spec.kind, ProtocolKind::Tabulated { .. }) {
                return Err(Error::config("K", None, "a tabulated protocol fixes K; it cannot be swept").into());
            }
            for &v in values {
                if !(v >= 1.0 && v.fract() == 0.0) {
                    return Err(Failure::usage(format!("K values must be positive integers, got {v}")));
                }
                let proto = cfg.discretize(v as usize)?;
                let rho = s.initial.density(proto.initial_hamiltonian())?;
                rows.push(sweep_point(cfg, &proto, &rho, s.initial.beta(), v)?);
            }
        }
        Axis::Beta => {
            if let InitialState::Explicit(_) = s.initial {
                return Err(Error::config("rho", None, "a beta sweep needs a thermal initial state").into());
            }
            let proto = cfg.discretize(s.k)?;
            for &b in values {
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(Failure::usage(format!("beta values must be non-negative, got {b}")));
                }
                let rho = thermal_state(proto.initial_hamiltonian(), b)?;
                rows.push(sweep_point(cfg, &proto, &rho, Some(b), b)?);
            }
        }
    }
    let csv = sweep_csv(&rows);
    let name = match axis {
        Axis::K => "sweep_K.csv",
        Axis::Beta => "sweep_beta.csv",
    };
    write_text(&ctx.out.join(name), &csv)?;
    emit(&csv);
    Ok(())
}

pub const FIG2_OMEGA: f64 = 1.0;
pub const FIG2_G: f64 = 1.0;
pub const FIG2_K: usize = 15;
pub const FIG2_BETA: f64 = 0.1;

fn is_monotone(q: &[(f64, f64)]) -> bool {
    q.windows(2).all(|w| w[1].1 >= w[0].1 - 1e-12)
}

pub fn fig2(ctx: &Context) -> Result<(), Failure> {
    let spec = ProtocolSpec::qubit_drive_quarter_period(FIG2_OMEGA, FIG2_G, FIG2_K);
    let proto = discretize(&spec, FIG2_K)?;
    let rho = thermal_state(proto.initial_hamiltonian(), FIG2_BETA)?;
    let (p, pm) = trajectory_distributions(&proto, &rho, &BuildOptions::default())?;
    write_dist(&ctx.out.join("fig2_histories.csv"), &p)?;
    write_dist(&ctx.out.join("fig2_measured.csv"), &pm)?;

    let q = p.cumulative();
    let qm = pm.cumulative();
    let mut problems = Vec::new();
    if p.len() != FIG2_K + 1 || pm.len() != FIG2_K + 1 {
        problems.push(format!("expected {} work values, got {} and {}", FIG2_K + 1, p.len(), pm.len()));
    }
    if !p.has_negative_bin() {
        problems.push("histories distribution has no negative bin".to_string());
    }
    if is_monotone(&q) {
        problems.push("histories cumulative is monotone".to_string());
    }
    if pm.min_weight() < -1e-12 || !is_monotone(&qm) {
        problems.push("measured distribution is not a probability distribution".to_string());
    }
    for (name, c) in [("histories", &q), ("measured", &qm)] {
        let top = c.last().map_or(0.0, |x| x.1);
        if (top - 1.0).abs() > 1e-10 {
            problems.push(format!("{name} cumulative ends at {top}"));
        }
    }
    emit(&format!(
        "fig2: K={FIG2_K} beta={FIG2_BETA} histories min={} measured min={}\n",
        fmt_sig(p.min_weight()),
        fmt_sig(pm.min_weight())
    ));
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_REGRESSION,
            message: format!("fig2 regression: {}", problems.join("; ")),
        })
    }
}

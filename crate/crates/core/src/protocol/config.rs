//! Protocol configuration documents.
//!
//! A document is TOML with three sections:
//!
//! ```toml
//! [protocol]
//! type = "qubit_drive"        # qubit_drive | linear_ramp | fixed_basis | tabulated
//! omega = 1.0
//! g = 1.0
//!
//! [run]
//! K = 15
//! beta = 0.1
//!
//! [output]
//! csv_path = "out"
//! report_path = "out/report.json"
//! ```
//!
//! Matrices are flat row-major lists of complex entries; an entry is a real
//! number, a `[re, im]` pair, or a string such as `"0.5-0.25i"`.
//! Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::str::FromStr;

use num_complex::Complex64;
use toml::{Table, Value};

use super::{
    projectors_from_basis, standard_projectors, DiscretizeOptions, PowerSampling, Propagation,
    ProtocolKind, ProtocolSpec, Schedule, DEFAULT_MAGNUS_SUBSTEPS,
};
use crate::distributions::Origin;
use crate::error::{Error, Result};
use crate::operator::{from_row_major, thermal_state, CMatrix, DensityMatrix, HermitianOperator};
use crate::trajectories::{EnumerationGuard, Method};

/// Initial state: thermal with respect to `H(0)`, or given explicitly.
#[derive(Debug, Clone)]
pub enum InitialState {
    Thermal { beta: f64 },
    Explicit(DensityMatrix),
}

impl InitialState {
    pub fn beta(&self) -> Option<f64> {
        match self {
            InitialState::Thermal { beta } => Some(*beta),
            InitialState::Explicit(_) => None,
        }
    }

    pub fn density(&self, h0: &HermitianOperator) -> Result<DensityMatrix> {
        match self {
            InitialState::Thermal { beta } => thermal_state(h0, *beta),
            InitialState::Explicit(rho) => {
                if rho.dim() != h0.dim() {
                    return Err(Error::config("rho", None, format!(
                        "initial state is {}-dimensional, protocol is {}-dimensional",
                        rho.dim(),
                        h0.dim()
                    )));
                }
                Ok(rho.clone())
            }
        }
    }
}

/// Run settings parsed alongside the protocol.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub k: usize,
    pub initial: InitialState,
    /// `None` uses the relative default.
    pub bin_tol: Option<f64>,
    pub guard: EnumerationGuard,
    pub method: Method,
    pub distributions: Vec<Origin>,
    pub discretize: DiscretizeOptions,
    pub csv_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
    pub spill_path: Option<PathBuf>,
}

const PROTOCOL_KEYS: &[&str] = &[
    "type", "omega", "g", "tau", "A", "B", "schedule", "lambda_start", "lambda_end",
    "schedule_samples", "basis", "energies_start", "energies_end", "hamiltonians", "propagation",
    "magnus_substeps", "sampling",
];
const RUN_KEYS: &[&str] = &["K", "beta", "rho", "bin_tol", "enum_cap", "method", "distributions"];
const OUTPUT_KEYS: &[&str] = &["csv_path", "report_path", "spill_path"];

struct Doc<'a> {
    text: &'a str,
}

impl Doc<'_> {
    /// Line (1-based) where `key` is assigned inside `[section]`.
    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        for (i, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = name.trim().to_string();
                if key.is_empty() && current == section {
                    return Some(i + 1);
                }
                continue;
            }
            if current == section {
                if let Some((k, _)) = line.split_once('=') {
                    let k = k.trim().trim_matches('"');
                    if k == key {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    fn err(&self, section: &str, key: &str, message: impl Into<String>) -> Error {
        Error::config(key, self.line_of(section, key), message)
    }
}

struct Section<'a> {
    name: &'static str,
    table: &'a Table,
    doc: &'a Doc<'a>,
}

impl<'a> Section<'a> {
    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.get(key)
    }

    fn err(&self, key: &str, message: impl Into<String>) -> Error {
        self.doc.err(self.name, key, message)
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(n)) => Ok(Some(*n as f64)),
            Some(_) => Err(self.err(key, "expected a number")),
        }
    }

    fn require_float(&self, key: &str) -> Result<f64> {
        self.float(key)?.ok_or_else(|| self.err(key, "missing required key"))
    }

    fn integer(&self, key: &str) -> Result<Option<i64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(n)) => Ok(Some(*n)),
            Some(_) => Err(self.err(key, "expected an integer")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(_) => Err(self.err(key, "expected a string")),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::Float(x) => Ok(*x),
                    Value::Integer(n) => Ok(*n as f64),
                    _ => Err(self.err(key, "expected a list of numbers")),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(self.err(key, "expected a list of numbers")),
        }
    }

    fn matrix(&self, key: &str) -> Result<Option<CMatrix>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => self.parse_matrix(key, v).map(Some),
        }
    }

    fn parse_matrix(&self, key: &str, v: &Value) -> Result<CMatrix> {
        let Value::Array(items) = v else {
            return Err(self.err(key, "expected a row-major list of complex entries"));
        };
        let entries = items
            .iter()
            .map(|e| parse_complex(e).ok_or_else(|| self.err(key, format!("cannot read complex entry {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let d = (entries.len() as f64).sqrt().round() as usize;
        if d == 0 || d * d != entries.len() {
            return Err(self.err(key, format!("{} entries do not form a square matrix", entries.len())));
        }
        from_row_major(d, &entries)
    }

    fn hermitian(&self, key: &str) -> Result<Option<HermitianOperator>> {
        match self.matrix(key)? {
            None => Ok(None),
            Some(m) => HermitianOperator::new(m)
                .map(Some)
                .map_err(|e| self.err(key, e.to_string())),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.table.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(self.err(key, format!("unknown key in [{}]", self.name)));
            }
        }
        Ok(())
    }
}

fn parse_complex(v: &Value) -> Option<Complex64> {
    match v {
        Value::Float(x) => Some(Complex64::new(*x, 0.0)),
        Value::Integer(n) => Some(Complex64::new(*n as f64, 0.0)),
        Value::Array(pair) if pair.len() == 2 => {
            let num = |v: &Value| match v {
                Value::Float(x) => Some(*x),
                Value::Integer(n) => Some(*n as f64),
                _ => None,
            };
            Some(Complex64::new(num(&pair[0])?, num(&pair[1])?))
        }
        Value::String(s) => Complex64::from_str(&s.replace(' ', "")).ok(),
        _ => None,
    }
}

fn parse_schedule(section: &Section, start_key: &str, end_key: &str) -> Result<Schedule> {
    let shape = section.string("schedule")?.unwrap_or("linear");
    let schedule = match shape {
        "linear" | "cosine" => {
            let start = section.require_float(start_key)?;
            let end = section.require_float(end_key)?;
            if shape == "linear" {
                Schedule::Linear { start, end }
            } else {
                Schedule::Cosine { start, end }
            }
        }
        "sampled" => Schedule::Sampled {
            values: section
                .floats("schedule_samples")?
                .ok_or_else(|| section.err("schedule_samples", "missing required key for a sampled schedule"))?,
        },
        other => return Err(section.err("schedule", format!("unknown schedule `{other}`"))),
    };
    schedule
        .validate()
        .map_err(|e| section.err("schedule_samples", e.to_string()))?;
    Ok(schedule)
}

/// Parses and validates a protocol configuration document.
pub fn parse_protocol_config(text: &str) -> Result<(ProtocolSpec, RunSettings)> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config {
        key: None,
        line: e.span().map(|s| text[..s.start].matches('\n').count() + 1),
        message: e.message().to_string(),
    })?;
    let doc = Doc { text };

    let missing: Vec<&str> = ["protocol", "run"]
        .into_iter()
        .filter(|s| !root.contains_key(*s))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Config {
            key: None,
            line: None,
            message: format!(
                "missing required sections {}; required keys are [protocol] type, [run] K, and one of [run] beta / rho",
                missing.iter().map(|s| format!("[{s}]")).collect::<Vec<_>>().join(", ")
            ),
        });
    }
    for key in root.keys() {
        if !["protocol", "run", "output"].contains(&key.as_str()) {
            return Err(Error::config(key.clone(), doc.line_of(key, ""), "unknown section"));
        }
    }
    let empty = Table::new();
    let table = |name: &str| -> Result<&Table> {
        match root.get(name) {
            None => Ok(&empty),
            Some(Value::Table(t)) => Ok(t),
            Some(_) => Err(Error::config(name, None, "expected a section")),
        }
    };
    let protocol = Section { name: "protocol", table: table("protocol")?, doc: &doc };
    let run = Section { name: "run", table: table("run")?, doc: &doc };
    let output = Section { name: "output", table: table("output")?, doc: &doc };
    protocol.check_keys(PROTOCOL_KEYS)?;
    run.check_keys(RUN_KEYS)?;
    output.check_keys(OUTPUT_KEYS)?;

    let mut missing = Vec::new();
    if protocol.get("type").is_none() {
        missing.push("[protocol] type");
    }
    if run.get("K").is_none() {
        missing.push("[run] K");
    }
    if run.get("beta").is_none() && run.get("rho").is_none() {
        missing.push("[run] beta or rho");
    }
    if !missing.is_empty() {
        let key = missing[0].split_whitespace().last().unwrap().to_string();
        return Err(Error::Config {
            key: Some(key),
            line: None,
            message: format!("missing required keys: {}", missing.join(", ")),
        });
    }

    let k = run.integer("K")?.unwrap();
    if k <= 0 {
        return Err(run.err("K", format!("K must be a positive integer, got {k}")));
    }
    let k = k as usize;

    let kind_name = protocol.string("type")?.unwrap();
    let tau = protocol.float("tau")?;
    let (kind, tau) = match kind_name {
        "qubit_drive" => {
            let omega = protocol.require_float("omega")?;
            let g = protocol.require_float("g")?;
            if !(omega > 0.0) {
                return Err(protocol.err("omega", "omega must be positive"));
            }
            if !(g > 0.0) {
                return Err(protocol.err("g", "g must be positive"));
            }
            // Default step is a quarter period of the drive, dt = pi / (2 g).
            let tau = tau.unwrap_or(k as f64 * PI / (2.0 * g));
            (ProtocolKind::QubitDrive { omega, g }, tau)
        }
        "linear_ramp" => {
            let a = protocol.hermitian("A")?.ok_or_else(|| protocol.err("A", "missing required key"))?;
            let b = protocol.hermitian("B")?.ok_or_else(|| protocol.err("B", "missing required key"))?;
            if a.dim() != b.dim() {
                return Err(protocol.err("B", "A and B differ in dimension"));
            }
            let schedule = parse_schedule(&protocol, "lambda_start", "lambda_end")?;
            let tau = tau.ok_or_else(|| protocol.err("tau", "missing required key"))?;
            (ProtocolKind::LinearRamp { a, b, schedule }, tau)
        }
        "fixed_basis" => {
            let start = protocol
                .floats("energies_start")?
                .ok_or_else(|| protocol.err("energies_start", "missing required key"))?;
            let end = protocol
                .floats("energies_end")?
                .ok_or_else(|| protocol.err("energies_end", "missing required key"))?;
            if start.len() != end.len() {
                return Err(protocol.err("energies_end", "energies_start and energies_end differ in length"));
            }
            let projectors = match protocol.matrix("basis")? {
                Some(basis) => {
                    if basis.nrows() != start.len() {
                        return Err(protocol.err("basis", "basis dimension does not match the number of energies"));
                    }
                    projectors_from_basis(&basis).map_err(|e| protocol.err("basis", e.to_string()))?
                }
                None => standard_projectors(start.len()),
            };
            let shape = protocol.string("schedule")?.unwrap_or("linear");
            let tracks = start
                .iter()
                .zip(&end)
                .map(|(&s, &e)| match shape {
                    "linear" => Ok(Schedule::Linear { start: s, end: e }),
                    "cosine" => Ok(Schedule::Cosine { start: s, end: e }),
                    other => Err(protocol.err("schedule", format!("unsupported energy track `{other}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            let tau = tau.ok_or_else(|| protocol.err("tau", "missing required key"))?;
            (ProtocolKind::FixedBasis { projectors, tracks }, tau)
        }
        "tabulated" => {
            let Some(Value::Array(list)) = protocol.get("hamiltonians") else {
                return Err(protocol.err("hamiltonians", "missing required list of matrices"));
            };
            let hamiltonians = list
                .iter()
                .map(|m| {
                    HermitianOperator::new(protocol.parse_matrix("hamiltonians", m)?)
                        .map_err(|e| protocol.err("hamiltonians", e.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            if hamiltonians.len() != k + 1 {
                return Err(run.err("K", format!(
                    "tabulated protocol has {} Hamiltonians but K + 1 = {}",
                    hamiltonians.len(),
                    k + 1
                )));
            }
            let tau = tau.ok_or_else(|| protocol.err("tau", "missing required key"))?;
            (ProtocolKind::Tabulated { hamiltonians }, tau)
        }
        other => return Err(protocol.err("type", format!("unknown protocol type `{other}`"))),
    };
    let spec = ProtocolSpec { kind, tau };
    spec.validate().map_err(|e| match e {
        Error::Config { key: Some(key), message, .. } => protocol.err(&key, message),
        other => other,
    })?;

    let substeps = protocol.integer("magnus_substeps")?;
    let propagation = match protocol.string("propagation")? {
        None => None,
        Some("analytic") => Some(Propagation::Analytic),
        Some("product") => Some(Propagation::ProductStep),
        Some("magnus") => Some(Propagation::Magnus {
            substeps: substeps.map_or(DEFAULT_MAGNUS_SUBSTEPS, |n| n.max(1) as usize),
        }),
        Some(other) => return Err(protocol.err("propagation", format!("unknown propagation `{other}`"))),
    };
    let sampling = match protocol.string("sampling")? {
        None | Some("left") => PowerSampling::LeftEndpoint,
        Some("midpoint") => PowerSampling::Midpoint,
        Some(other) => return Err(protocol.err("sampling", format!("unknown sampling `{other}`"))),
    };

    let initial = match (run.float("beta")?, run.matrix("rho")?) {
        (Some(_), Some(_)) => return Err(run.err("rho", "give either beta or rho, not both")),
        (Some(beta), None) => {
            if !(beta >= 0.0) {
                return Err(run.err("beta", "beta must be non-negative"));
            }
            InitialState::Thermal { beta }
        }
        (None, Some(m)) => {
            if m.nrows() != spec.dim() {
                return Err(run.err("rho", "initial state dimension does not match the protocol"));
            }
            InitialState::Explicit(DensityMatrix::new(m).map_err(|e| run.err("rho", e.to_string()))?)
        }
        (None, None) => unreachable!("checked above"),
    };

    let bin_tol = run.float("bin_tol")?;
    if let Some(t) = bin_tol {
        if !(t > 0.0) {
            return Err(run.err("bin_tol", "bin_tol must be positive"));
        }
    }
    let guard = match run.integer("enum_cap")? {
        None => EnumerationGuard::default(),
        Some(c) if c >= 1 => EnumerationGuard { cap: c as u64 },
        Some(c) => return Err(run.err("enum_cap", format!("enum_cap must be at least 1, got {c}"))),
    };
    let method = match run.string("method")? {
        None | Some("enumerate") => Method::Enumerate,
        Some("transfer") => Method::Transfer,
        Some("auto") => Method::Auto,
        Some(other) => return Err(run.err("method", format!("unknown method `{other}`"))),
    };
    let distributions = match run.get("distributions") {
        None => Origin::ALL.to_vec(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| {
                v.as_str()
                    .and_then(Origin::from_name)
                    .ok_or_else(|| run.err("distributions", format!("unknown distribution {v}")))
            })
            .collect::<Result<Vec<_>>>()?,
        Some(_) => return Err(run.err("distributions", "expected a list of names")),
    };

    let path = |key: &str| -> Result<Option<PathBuf>> { Ok(output.string(key)?.map(PathBuf::from)) };

    let settings = RunSettings {
        k,
        initial,
        bin_tol,
        guard,
        method,
        distributions,
        discretize: DiscretizeOptions {
            propagation,
            sampling,
            strict_degeneracy: false,
        },
        csv_path: path("csv_path")?,
        report_path: path("report_path")?,
        spill_path: path("spill_path")?,
    };
    Ok((spec, settings))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = "[protocol]\ntype = \"qubit_drive\"\nomega = 1\ng = 1\n\n[run]\nK = 15\nbeta = 0.1\n";

    #[test]
    fn minimal_qubit_drive() {
        let (spec, run) = parse_protocol_config(FIG2).unwrap();
        assert!(matches!(spec.kind, ProtocolKind::QubitDrive { omega, g } if omega == 1.0 && g == 1.0));
        assert_eq!(run.k, 15);
        assert!((spec.tau - 15.0 * PI / 2.0).abs() < 1e-12);
        assert!(matches!(run.initial, InitialState::Thermal { beta } if beta == 0.1));
        assert_eq!(run.guard.cap, 1 << 24);
    }

    #[test]
    fn empty_document_lists_required_keys() {
        let err = parse_protocol_config("").unwrap_err().to_string();
        assert!(err.contains("[protocol]") && err.contains("[run]"), "{err}");
        let err = parse_protocol_config("[protocol]\n[run]\n").unwrap_err().to_string();
        assert!(err.contains("type") && err.contains("K") && err.contains("beta"), "{err}");
    }

    #[test]
    fn missing_k_names_the_key() {
        let text = "[protocol]\ntype = \"qubit_drive\"\nomega = 1\ng = 1\n[run]\nbeta = 0.1\n";
        match parse_protocol_config(text).unwrap_err() {
            Error::Config { key, message, .. } => {
                assert_eq!(key.as_deref(), Some("K"));
                assert!(message.contains('K'));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = "[protocol]\ntype = \"qubit_drive\"\nomega = 1\ng = 1\nfoo = 2\n[run]\nK = 3\nbeta = 0.1\n";
        match parse_protocol_config(text).unwrap_err() {
            Error::Config { key, line, .. } => {
                assert_eq!(key.as_deref(), Some("foo"));
                assert_eq!(line, Some(5));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_positive_k_rejected() {
        let text = FIG2.replace("K = 15", "K = 0");
        match parse_protocol_config(&text).unwrap_err() {
            Error::Config { key, line, .. } => {
                assert_eq!(key.as_deref(), Some("K"));
                assert_eq!(line, Some(7));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn tabulated_length_rule() {
        let mk = |k: usize| {
            format!(
                "[protocol]\ntype = \"tabulated\"\ntau = 1.0\nhamiltonians = [[1, 0, 0, -1], [1, 0.5, 0.5, -1], [0, [0, -1], [0, 1], 0]]\n[run]\nK = {k}\nbeta = 1.0\n"
            )
        };
        assert!(parse_protocol_config(&mk(2)).is_ok());
        match parse_protocol_config(&mk(3)).unwrap_err() {
            Error::Config { key, message, .. } => {
                assert_eq!(key.as_deref(), Some("K"));
                assert!(message.contains("K + 1"));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn non_hermitian_matrix_rejected() {
        let text = "[protocol]\ntype = \"linear_ramp\"\ntau = 1\nA = [0, 1, 0, 0]\nB = [1, 0, 0, -1]\nlambda_start = 0\nlambda_end = 1\n[run]\nK = 2\nbeta = 1\n";
        match parse_protocol_config(text).unwrap_err() {
            Error::Config { key, line, .. } => {
                assert_eq!(key.as_deref(), Some("A"));
                assert_eq!(line, Some(4));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn explicit_rho_and_complex_strings() {
        let text = "[protocol]\ntype = \"qubit_drive\"\nomega = 1\ng = 2\ntau = 1.5\n[run]\nK = 4\nrho = [0.5, \"0-0.5i\", [0, 0.5], 0.5]\nbin_tol = 1e-8\ndistributions = [\"histories\", \"mh\"]\n[output]\ncsv_path = \"out\"\n";
        let (spec, run) = parse_protocol_config(text).unwrap();
        assert_eq!(spec.tau, 1.5);
        let InitialState::Explicit(rho) = &run.initial else { panic!() };
        assert_eq!(rho.matrix()[(1, 0)], Complex64::new(0.0, 0.5));
        assert_eq!(run.distributions, vec![Origin::Histories, Origin::MargenauHill]);
        assert_eq!(run.csv_path, Some(PathBuf::from("out")));
        assert_eq!(run.bin_tol, Some(1e-8));
    }

    #[test]
    fn beta_and_rho_are_exclusive() {
        let text = FIG2.to_string() + "rho = [1, 0, 0, 0]\n";
        assert!(parse_protocol_config(&text).is_err());
    }

    #[test]
    fn sampled_schedule_needs_two_points() {
        let text = "[protocol]\ntype = \"linear_ramp\"\ntau = 1\nA = [0, 1, 1, 0]\nB = [1, 0, 0, -1]\nschedule = \"sampled\"\nschedule_samples = [0.5]\n[run]\nK = 2\nbeta = 1\n";
        assert!(matches!(parse_protocol_config(text), Err(Error::Config { .. })));
    }
}

//! Command-line harness. Every subcommand builds an [`ExperimentConfig`]
//! and runs it through [`execute`], so `erbm run config.json` and the
//! equivalent flags produce identical output.
//!
//! Exit codes: 0 on success, 1 when `verify` finds a failing check, 2 for
//! configuration errors and 3 for numerical failures. Output files are
//! written only after the whole operation succeeded.

pub mod verify;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::brownian::histogram::fmt17;
use crate::brownian::rng::hash_str;
use crate::brownian::{
    green_disk, green_halfplane, pk_halfplane, pk_halfplane_infinity, pk_halfstrip, RngStream, StepPolicy,
};
use crate::capacity::{capacity_report, CapMethod};
use crate::confmap::{hull_map_er, map_bilateral, map_chordal, map_standard, phi_map_fn, MapKind, MapRecord};
use crate::erbm::{estimate_chain, sample_erbm, ErbmState, EtaConfig, ExcursionMode, Sampler};
use crate::geometry::{Domain, Hull};
use crate::kernels::{
    boundary_pk, excursion_measure, green_er, pk_er, pk_er_annulus, pk_er_holes, pk_er_infinity, Backend,
    KernelEstimate, Method,
};
use crate::loewner::{solve_classical, solve_er, CapacitySchedule, DrivingFunction, SolverOptions};
use crate::{Error, Result, C64};

/// A complete, reproducible experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operation: Operation,
    /// Operation-specific parameters, checked against the operation's schema.
    #[serde(default)]
    pub params: Value,
    #[serde(default = "Domain::halfplane")]
    pub domain: Domain,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub n_samples: Option<u64>,
    #[serde(default)]
    pub backend: Option<Backend>,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Kernel,
    Green,
    Map,
    Capacity,
    Simulate,
    Chain,
    Loewner,
}

impl Operation {
    fn name(&self) -> &'static str {
        match self {
            Operation::Kernel => "kernel",
            Operation::Green => "green",
            Operation::Map => "map",
            Operation::Capacity => "capacity",
            Operation::Simulate => "simulate",
            Operation::Chain => "chain",
            Operation::Loewner => "loewner",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum KernelKind {
    PkEr,
    PkErInfinity,
    PkErHoles,
    BoundaryPk,
    ExcursionMeasure,
    PkHalfplane,
    PkHalfplaneInfinity,
    PkHalfstrip,
    PkErAnnulus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelParams {
    kind: KernelKind,
    z: Option<C64>,
    x: Option<f64>,
    i: Option<usize>,
    j: Option<usize>,
    r: Option<f64>,
    phi0: Option<f64>,
    tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum GreenKind {
    GreenEr,
    GreenHalfplane,
    GreenDisk,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GreenParams {
    kind: GreenKind,
    start: Option<ErbmState>,
    z: Option<C64>,
    w: Option<C64>,
    r: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSpec {
    x: [f64; 2],
    y: [f64; 2],
    nx: usize,
    ny: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapParams {
    kind: MapKind,
    x: Option<f64>,
    hole: Option<usize>,
    z0: Option<C64>,
    hull: Option<Hull>,
    grid: GridSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapacityParams {
    hull: Hull,
    method: Option<CapMethod>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EtaParams {
    rho: Option<f64>,
    eps_rel: Option<f64>,
}

impl EtaParams {
    fn config(&self) -> EtaConfig {
        let mut eta = EtaConfig::default();
        if let Some(rho) = self.rho {
            eta.rho = rho;
        }
        if let Some(eps_rel) = self.eps_rel {
            eta.mode = ExcursionMode::Released { eps_rel };
        }
        eta
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateParams {
    start: ErbmState,
    rho: Option<f64>,
    eps_rel: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChainParams {
    rho: Option<f64>,
    eps_rel: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LoewnerMode {
    Classical,
    Er,
}

/// Knots given inline or as a path to a two-column CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum Knots<T> {
    File { file: PathBuf },
    Inline(T),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoewnerParams {
    mode: LoewnerMode,
    driving: Knots<DrivingFunction>,
    capacity: Knots<CapacitySchedule>,
    points: Vec<C64>,
    t_end: f64,
    dt: f64,
    #[serde(default)]
    record_every: Option<usize>,
    #[serde(default)]
    tol_slit: Option<f64>,
}

/// Result bytes of one operation: the primary output and optional
/// companion files, keyed by the suffix appended to the output path.
#[derive(Debug, Default)]
pub struct Outputs {
    pub primary: Vec<u8>,
    pub extra: Vec<(String, Vec<u8>)>,
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn params<T: serde::de::DeserializeOwned>(v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(config_err)
}

fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing parameter `{what}`")))
}

fn default_backend(domain: &Domain) -> Backend {
    if domain.n_holes() == 0 || domain.is_annulus() {
        Backend::Analytic
    } else {
        Backend::bie()
    }
}

/// JSON formatter printing floats with 17 significant digits.
struct Fmt17;

impl serde_json::ser::Formatter for Fmt17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> std::io::Result<()> {
        if v.is_finite() {
            w.write_all(fmt17(v).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }
}

/// Serializes `v` as one line of JSON with 17-digit floats.
pub fn to_json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = vec![];
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Fmt17);
    v.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(out)
}

fn kernel_json(e: &KernelEstimate, params: &Value) -> Value {
    json!({"value": e.value, "stderr": e.stderr, "method": e.method, "n_samples": e.n_samples, "params": params})
}

fn run_kernel(cfg: &ExperimentConfig, backend: &Backend) -> Result<Value> {
    let p: KernelParams = params(&cfg.params)?;
    let d = &cfg.domain;
    let exact = |v: f64| KernelEstimate::exact(v, Method::Analytic);
    let e = match p.kind {
        KernelKind::PkEr => pk_er(d, need(p.z, "z")?, need(p.x, "x")?, backend)?,
        KernelKind::PkErInfinity => pk_er_infinity(d, need(p.x, "x")?, backend)?,
        KernelKind::PkErHoles => {
            let v = pk_er_holes(d, need(p.x, "x")?, backend)?;
            let method = v.first().map(|e| e.method).unwrap_or(Method::Analytic);
            let n = v.iter().map(|e| e.n_samples).sum::<u64>();
            return Ok(json!({
                "value": v.iter().map(|e| e.value).collect::<Vec<_>>(),
                "stderr": v.iter().map(|e| e.stderr).collect::<Vec<_>>(),
                "method": method,
                "n_samples": n,
                "params": cfg.params,
            }));
        }
        KernelKind::BoundaryPk => boundary_pk(d, need(p.i, "i")?, need(p.x, "x")?, backend)?,
        KernelKind::ExcursionMeasure => excursion_measure(d, need(p.i, "i")?, need(p.j, "j")?, backend)?,
        KernelKind::PkHalfplane => exact(pk_halfplane(need(p.z, "z")?, need(p.x, "x")?)?),
        KernelKind::PkHalfplaneInfinity => exact(pk_halfplane_infinity(need(p.x, "x")?)),
        KernelKind::PkHalfstrip => exact(pk_halfstrip(need(p.r, "r")?, need(p.z, "z")?)?),
        KernelKind::PkErAnnulus => {
            let v = pk_er_annulus(need(p.r, "r")?, need(p.z, "z")?, need(p.phi0, "phi0")?, p.tol.unwrap_or(1e-13))?;
            KernelEstimate { value: v.value, stderr: v.tail, method: Method::Series, n_samples: v.terms as u64 }
        }
    };
    Ok(kernel_json(&e, &cfg.params))
}

fn run_green(cfg: &ExperimentConfig, backend: &Backend) -> Result<Value> {
    let p: GreenParams = params(&cfg.params)?;
    let exact = |v: f64| KernelEstimate::exact(v, Method::Analytic);
    let e = match p.kind {
        GreenKind::GreenEr => {
            let start = match (p.start, p.z) {
                (Some(s), None) => s,
                (None, Some(z)) => ErbmState::interior(z),
                _ => return Err(Error::Config("give exactly one of `start` and `z`".into())),
            };
            green_er(&cfg.domain, start, need(p.w, "w")?, backend)?
        }
        GreenKind::GreenHalfplane => exact(green_halfplane(need(p.z, "z")?, need(p.w, "w")?)?),
        GreenKind::GreenDisk => exact(green_disk(need(p.r, "r")?, need(p.z, "z")?)?),
    };
    Ok(kernel_json(&e, &cfg.params))
}

fn run_map(cfg: &ExperimentConfig, backend: &Backend) -> Result<Outputs> {
    let p: MapParams = params(&cfg.params)?;
    let d = &cfg.domain;
    let g = &p.grid;
    if g.nx < 1 || g.ny < 1 || !(g.x[1] >= g.x[0]) || !(g.y[1] >= g.y[0]) {
        return Err(Error::Config("grid needs nx, ny >= 1 and increasing ranges".into()));
    }
    let (map, region, extra) = match p.kind {
        MapKind::Chordal => (map_chordal(d, need(p.x, "x")?, backend)?, d.clone(), Value::Null),
        MapKind::Phi => (phi_map_fn(d, need(p.x, "x")?, backend)?, d.clone(), Value::Null),
        MapKind::Bilateral => (map_bilateral(d, need(p.hole, "hole")?, backend)?, d.clone(), Value::Null),
        MapKind::Standard => (map_standard(d, need(p.z0, "z0")?, backend)?, d.clone(), Value::Null),
        MapKind::Hull => {
            let hull = need(p.hull, "hull")?;
            let m = hull_map_er(d, &hull, backend)?;
            let info =
                json!({"hcap": m.hcap, "hcap_er": m.hcap_er, "u": m.u, "u_tilde": m.u_tilde, "phi_prime": m.phi_prime});
            (m.map, d.with_hull(Some(hull))?, info)
        }
    };
    let step =
        |lo: f64, hi: f64, n: usize, k: usize| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 };
    let mut pts = vec![];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let z = C64::new(step(g.x[0], g.x[1], g.nx, i), step(g.y[0], g.y[1], g.ny, j));
            if region.contains(z) {
                pts.push(z);
            }
        }
    }
    let vals = crate::parallel::map_items(&pts, |z| map.eval(*z));
    let mut csv = b"x,y,fx,fy\n".to_vec();
    for (z, f) in pts.iter().zip(vals) {
        let f = f?;
        writeln!(csv, "{},{},{},{}", fmt17(z.re), fmt17(z.im), fmt17(f.re), fmt17(f.im))?;
    }
    #[derive(Serialize)]
    struct Record<'a> {
        #[serde(flatten)]
        record: &'a MapRecord,
        hull: &'a Value,
    }
    let record = map.record();
    let meta = to_json_bytes(&Record { record: &record, hull: &extra })?;
    Ok(Outputs { primary: csv, extra: vec![("normalization.json".into(), meta)] })
}

fn run_capacity(cfg: &ExperimentConfig, stream: RngStream) -> Result<Value> {
    let p: CapacityParams = params(&cfg.params)?;
    let method = match (p.method, cfg.n_samples) {
        (Some(m), _) => m,
        (None, Some(n)) => CapMethod::Mc { n },
        (None, None) if cfg.domain.n_holes() == 0 => CapMethod::ClosedForm,
        (None, None) => CapMethod::Bie,
    };
    Ok(serde_json::to_value(capacity_report(&cfg.domain, &p.hull, method, stream)?)?)
}

fn run_simulate(cfg: &ExperimentConfig, stream: RngStream) -> Result<Vec<u8>> {
    let p: SimulateParams = params(&cfg.params)?;
    let eta = EtaParams { rho: p.rho, eps_rel: p.eps_rel }.config();
    eta.validate(&cfg.domain)?;
    let policy = StepPolicy::for_domain(&cfg.domain);
    let n = cfg.n_samples.unwrap_or(1);
    let ids: Vec<u64> = (0..n).collect();
    let paths =
        crate::parallel::map_items(&ids, |&k| sample_erbm(&cfg.domain, p.start, &eta, &policy, stream.path(k), None));
    let mut csv = b"path_id,event_idx,kind,x,y,boundary_id\n".to_vec();
    for (k, path) in paths.into_iter().enumerate() {
        for (e, ev) in path?.events.iter().enumerate() {
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                k,
                e,
                ev.kind.as_str(),
                fmt17(ev.point.re),
                fmt17(ev.point.im),
                ev.boundary
            )?;
        }
    }
    Ok(csv)
}

fn run_chain(cfg: &ExperimentConfig, stream: RngStream) -> Result<Value> {
    let p: ChainParams = params(&cfg.params)?;
    let eta = EtaParams { rho: p.rho, eps_rel: p.eps_rel }.config();
    let sampler = Sampler::new(&cfg.domain, eta, StepPolicy::for_domain(&cfg.domain))?;
    let chain = estimate_chain(&sampler, stream, cfg.n_samples.unwrap_or(100_000))?;
    Ok(chain.to_json())
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn knots<T>(k: Knots<T>, parse: fn(&str) -> Result<T>) -> Result<T> {
    match k {
        Knots::Inline(v) => Ok(v),
        Knots::File { file } => parse(&read_text(&file)?),
    }
}

fn run_loewner(cfg: &ExperimentConfig, backend: &Backend) -> Result<Outputs> {
    let p: LoewnerParams = params(&cfg.params)?;
    let u = knots(p.driving, DrivingFunction::from_csv)?;
    let a = knots(p.capacity, CapacitySchedule::from_csv)?;
    let u = DrivingFunction::new(u.t, u.u).map_err(config_err)?;
    let a = CapacitySchedule::new(a.t, a.b).map_err(config_err)?;
    let mut opts = SolverOptions::new(p.dt);
    if let Some(r) = p.record_every {
        opts.record_every = r;
    }
    opts.validate().map_err(config_err)?;
    if !(p.t_end > 0.0 && p.t_end.is_finite()) {
        return Err(Error::Config("t_end must be positive".into()));
    }
    let mut out = Outputs::default();
    match p.mode {
        LoewnerMode::Classical => solve_classical(&u, &a, &p.points, p.t_end, opts)?.write_csv(&mut out.primary)?,
        LoewnerMode::Er => {
            let sol = solve_er(&cfg.domain, &u, &a, &p.points, p.t_end, opts, backend, p.tol_slit.unwrap_or(1e-10))?;
            sol.trajectory.write_csv(&mut out.primary)?;
            let mut slits = vec![];
            sol.write_slits_csv(&mut slits)?;
            out.extra.push(("slits.csv".into(), slits));
        }
    }
    Ok(out)
}

/// Runs one experiment and returns its output bytes.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outputs> {
    cfg.domain.validate()?;
    let backend = cfg.backend.unwrap_or_else(|| default_backend(&cfg.domain));
    backend.validate()?;
    let stream = RngStream::new(cfg.seed, hash_str(cfg.operation.name()));
    let json_out = |v: Value| -> Result<Outputs> { Ok(Outputs { primary: to_json_bytes(&v)?, extra: vec![] }) };
    match cfg.operation {
        Operation::Kernel => json_out(run_kernel(cfg, &backend)?),
        Operation::Green => json_out(run_green(cfg, &backend)?),
        Operation::Map => run_map(cfg, &backend),
        Operation::Capacity => json_out(run_capacity(cfg, stream)?),
        Operation::Simulate => Ok(Outputs { primary: run_simulate(cfg, stream)?, extra: vec![] }),
        Operation::Chain => json_out(run_chain(cfg, stream)?),
        Operation::Loewner => run_loewner(cfg, &backend),
    }
}

/// Writes `out` to `path` (companions to `path.<suffix>`) or to stdout.
pub fn write_outputs(out: &Outputs, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => {
            std::fs::write(p, &out.primary)?;
            for (suffix, bytes) in &out.extra {
                std::fs::write(format!("{}.{suffix}", p.display()), bytes)?;
            }
        }
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(&out.primary)?;
            for (_, bytes) in &out.extra {
                so.write_all(bytes)?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Parser)]
#[command(name = "erbm", version, about = "ER Brownian motion, ER kernels, canonical maps and ER Loewner chains")]
struct Cli {
    /// Base seed of every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output file (stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Domain as JSON text or a path to a JSON file.
    #[arg(long)]
    domain: Option<String>,
    /// Backend as JSON text, e.g. '{"method":"bie","n_open":64,"n_closed":65}'.
    #[arg(long)]
    backend: Option<String>,
    /// Number of samples for Monte Carlo operations.
    #[arg(long)]
    n: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a Poisson kernel.
    Kernel {
        #[arg(long, value_enum)]
        kind: KernelKind,
        /// Interior point `x,y`.
        #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
        z: Option<C64>,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        #[arg(long)]
        i: Option<usize>,
        #[arg(long)]
        j: Option<usize>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        phi0: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a Green's function.
    Green {
        #[arg(long, value_enum)]
        kind: GreenKind,
        /// Start state as JSON, e.g. '{"type":"hole","i":1}'.
        #[arg(long)]
        start: Option<String>,
        #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
        z: Option<C64>,
        #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
        w: Option<C64>,
        #[arg(long)]
        r: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a canonical conformal map on a grid.
    Map {
        #[arg(long, value_parser = parse_map_kind)]
        kind: MapKind,
        #[arg(long, allow_hyphen_values = true)]
        x: Option<f64>,
        #[arg(long)]
        hole: Option<usize>,
        #[arg(long, value_parser = parse_c64, allow_hyphen_values = true)]
        z0: Option<C64>,
        /// Hull as JSON text or a path to a JSON file.
        #[arg(long)]
        hull: Option<String>,
        /// Grid `x0,x1,y0,y1,nx,ny`.
        #[arg(long, allow_hyphen_values = true, default_value = "-2,2,0.05,2,41,40")]
        grid: String,
        #[command(flatten)]
        common: Common,
    },
    /// Half-plane capacity and ER capacity of a hull.
    Capacity {
        /// Hull as JSON text or a path to a JSON file.
        #[arg(long)]
        hull: String,
        /// Method as JSON, e.g. '{"method":"bie"}'.
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Sample ERBM paths and write their boundary events.
    Simulate {
        /// Start state as JSON, or an interior point `x,y`.
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        eps_rel: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Estimate the boundary Markov chain.
    Chain {
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        eps_rel: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Integrate a Loewner chain.
    Loewner {
        #[arg(long, value_enum, default_value = "classical")]
        mode: LoewnerMode,
        /// CSV file with rows `t,U`.
        #[arg(long)]
        driving: PathBuf,
        /// CSV file with rows `t,b`.
        #[arg(long)]
        capacity: PathBuf,
        /// CSV file with rows `x,y`, or inline `x,y;x,y`.
        #[arg(long, allow_hyphen_values = true)]
        points: String,
        #[arg(long = "T")]
        t_end: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long)]
        record_every: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the verification suite.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        suite: verify::Suite,
        /// Multiplier on every Monte Carlo sample count.
        #[arg(long, default_value_t = 1.0)]
        budget: f64,
    },
    /// Run an experiment described by a JSON config file.
    Run { config: PathBuf },
}

fn parse_c64(s: &str) -> std::result::Result<C64, String> {
    let v: Vec<&str> = s.split(',').map(str::trim).collect();
    match v.as_slice() {
        [a, b] => Ok(C64::new(a.parse().map_err(|e| format!("{e}"))?, b.parse().map_err(|e| format!("{e}"))?)),
        _ => Err(format!("expected `x,y`, got `{s}`")),
    }
}

fn parse_map_kind(s: &str) -> std::result::Result<MapKind, String> {
    serde_json::from_value(Value::String(s.into())).map_err(|_| format!("unknown map kind `{s}`"))
}

/// JSON given inline or as a file path.
fn json_arg(s: &str) -> Result<Value> {
    let t = s.trim_start();
    let text = if t.starts_with('{') || t.starts_with('[') || t.starts_with('"') {
        s.to_string()
    } else {
        read_text(Path::new(s))?
    };
    serde_json::from_str(&text).map_err(config_err)
}

fn parse_points(s: &str) -> Result<Vec<C64>> {
    let text = if Path::new(s).is_file() { read_text(Path::new(s))? } else { s.replace(';', "\n") };
    let mut pts = vec![];
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        match parse_c64(line) {
            Ok(z) => pts.push(z),
            Err(_) if pts.is_empty() && line.chars().any(|c| c.is_alphabetic()) => continue,
            Err(e) => return Err(Error::Config(e)),
        }
    }
    Ok(pts)
}

fn base_config(op: Operation, common: Option<&Common>, params: Value) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig {
        operation: op,
        params,
        domain: Domain::halfplane(),
        seed: 0,
        n_samples: None,
        backend: None,
        output: None,
    };
    if let Some(c) = common {
        if let Some(d) = &c.domain {
            cfg.domain = serde_json::from_value(json_arg(d)?).map_err(config_err)?;
        }
        if let Some(b) = &c.backend {
            cfg.backend = Some(serde_json::from_value(json_arg(b)?).map_err(config_err)?);
        }
        cfg.n_samples = c.n;
    }
    Ok(cfg)
}

/// Drops `null` members so optional parameters stay optional.
fn compact(v: Value) -> Value {
    match v {
        Value::Object(m) => Value::Object(m.into_iter().filter(|(_, v)| !v.is_null()).collect()),
        v => v,
    }
}

fn c64_json(z: Option<C64>) -> Value {
    z.map(|z| json!([z.re, z.im])).unwrap_or(Value::Null)
}

fn start_arg(s: &str) -> Result<Value> {
    match parse_c64(s) {
        Ok(z) => Ok(json!({"type": "interior", "z": [z.re, z.im]})),
        Err(_) => json_arg(s),
    }
}

fn build_config(cmd: Command) -> Result<ExperimentConfig> {
    Ok(match cmd {
        Command::Kernel { kind, z, x, i, j, r, phi0, tol, common } => base_config(
            Operation::Kernel,
            Some(&common),
            compact(json!({"kind": kind, "z": c64_json(z), "x": x, "i": i, "j": j, "r": r, "phi0": phi0, "tol": tol})),
        )?,
        Command::Green { kind, start, z, w, r, common } => {
            let start = start.map(|s| start_arg(&s)).transpose()?;
            base_config(
                Operation::Green,
                Some(&common),
                compact(json!({"kind": kind, "start": start, "z": c64_json(z), "w": c64_json(w), "r": r})),
            )?
        }
        Command::Map { kind, x, hole, z0, hull, grid, common } => {
            let g: Vec<f64> = grid
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(config_err)?;
            if g.len() != 6 || g[4] < 1.0 || g[5] < 1.0 || g[4].fract() != 0.0 || g[5].fract() != 0.0 {
                return Err(Error::Config("grid must be `x0,x1,y0,y1,nx,ny`".into()));
            }
            let hull = hull.map(|h| json_arg(&h)).transpose()?;
            base_config(
                Operation::Map,
                Some(&common),
                compact(json!({
                    "kind": kind, "x": x, "hole": hole, "z0": c64_json(z0), "hull": hull,
                    "grid": {"x": [g[0], g[1]], "y": [g[2], g[3]], "nx": g[4] as usize, "ny": g[5] as usize},
                })),
            )?
        }
        Command::Capacity { hull, method, common } => {
            let method = method.map(|m| json_arg(&m)).transpose()?;
            base_config(
                Operation::Capacity,
                Some(&common),
                compact(json!({"hull": json_arg(&hull)?, "method": method})),
            )?
        }
        Command::Simulate { start, rho, eps_rel, common } => base_config(
            Operation::Simulate,
            Some(&common),
            compact(json!({"start": start_arg(&start)?, "rho": rho, "eps_rel": eps_rel})),
        )?,
        Command::Chain { rho, eps_rel, common } => {
            base_config(Operation::Chain, Some(&common), compact(json!({"rho": rho, "eps_rel": eps_rel})))?
        }
        Command::Loewner { mode, driving, capacity, points, t_end, dt, record_every, common } => {
            let pts: Vec<Value> = parse_points(&points)?.iter().map(|z| json!([z.re, z.im])).collect();
            base_config(
                Operation::Loewner,
                Some(&common),
                compact(json!({
                    "mode": mode, "driving": {"file": driving}, "capacity": {"file": capacity},
                    "points": pts, "t_end": t_end, "dt": dt, "record_every": record_every,
                })),
            )?
        }
        Command::Run { config } => serde_json::from_str(&read_text(&config)?).map_err(config_err)?,
        Command::Verify { .. } => unreachable!("verify is not an experiment"),
    })
}

fn exit_code(e: &Error) -> i32 {
    if e.is_config() {
        2
    } else {
        3
    }
}

fn run_verify(suite: verify::Suite, seed: u64, budget: f64, out: Option<&Path>) -> Result<i32> {
    if !(budget > 0.0 && budget.is_finite()) {
        return Err(Error::Config("budget must be positive".into()));
    }
    let report = verify::verify(suite, seed, budget);
    for c in &report.checks {
        println!(
            "{:<13} {:<36} measured {:.4e} / tolerance {:.4e}  ({:.1} s)",
            c.status.label(),
            c.name,
            c.measured,
            c.tolerance,
            c.runtime
        );
        if let Some(e) = &c.error {
            println!("    error: {e}");
        }
    }
    if let Some(p) = out {
        std::fs::write(p, to_json_bytes(&report)?)?;
    }
    Ok(if report.failed() { 1 } else { 0 })
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if let Some(j) = cli.jobs {
        crate::parallel::set_jobs(j);
    }
    let result = match cli.command {
        Command::Verify { suite, budget } => run_verify(suite, cli.seed.unwrap_or(0), budget, cli.out.as_deref()),
        cmd => build_config(cmd).and_then(|mut cfg| {
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if cli.out.is_some() {
                cfg.output = cli.out.clone();
            }
            let out = execute(&cfg)?;
            write_outputs(&out, cfg.output.as_deref())?;
            Ok(0)
        }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_fields() {
        let bad = r#"{"operation":"kernel","params":{"kind":"pk_halfplane","z":[0,1],"x":0},"sed":3}"#;
        assert!(serde_json::from_str::<ExperimentConfig>(bad).is_err());
        let bad_params = json!({"kind": "pk_halfplane", "z": [0.0, 1.0], "x": 0.0, "extra": 1});
        assert!(params::<KernelParams>(&bad_params).unwrap_err().is_config());
    }

    #[test]
    fn kernel_operation_matches_closed_form() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"operation":"kernel","params":{"kind":"pk_halfplane","z":[0.0,1.0],"x":0.0}}"#)
                .unwrap();
        let out = execute(&cfg).unwrap();
        let v: Value = serde_json::from_slice(&out.primary).unwrap();
        assert_eq!(v["value"].as_f64().unwrap(), 1.0 / std::f64::consts::PI);
        assert_eq!(v["method"], "analytic");
    }

    #[test]
    fn fmt17_json_round_trips() {
        let x = 0.1f64 + 0.2;
        let bytes = to_json_bytes(&json!({"a": x, "b": -1e-300, "c": f64::NAN})).unwrap();
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["a"].as_f64().unwrap(), x);
        assert_eq!(v["b"].as_f64().unwrap(), -1e-300);
        assert!(v["c"].is_null());
    }

    #[test]
    fn points_parse_inline_and_header() {
        assert_eq!(parse_points("0,1;-1,0.5").unwrap(), vec![C64::new(0.0, 1.0), C64::new(-1.0, 0.5)]);
        assert!(parse_points("0,1;x").is_err());
    }
}

//! Command-line interface: argument parsing, the load pipeline and one
//! report per subcommand.
//!
//! Exit codes: 0 when every check passes, 2 on input errors, 3 when a
//! check fails.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use srkilling_core::connection::{Check, Connection, ConnectionError, Curvature};
use srkilling_core::expr::{parse_expression, Expr};
use srkilling_core::frame::{ContactStructure, FrameError, Mode};
use srkilling_core::killing::{self, Generator, Grid, KillingError, Order, RankOptions, TransportOptions};

use crate::formats::{self, InputError};
use crate::report::{self, matrix, num, nums, Report};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_CHECK: i32 = 3;

/// Number of seeded random points used when no grid is given.
pub const RANDOM_POINTS: usize = 100;

#[derive(Debug, Parser)]
#[command(
    name = "srkilling",
    version,
    about = "Canonical connection, curvature and infinitesimal isometries of contact sub-Riemannian structures",
    long_about = "Structures are given as a file path or a built-in name (heisenberg:<n>, su2, su2:chart).\n\
                  Reports are JSON on stdout (or --out). Exit status: 0 pass, 2 input error, 3 check failure."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Args)]
pub struct Global {
    /// Tolerance of the command's main checks (each command has its own default).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Evaluation grid, e.g. x:-1:1:5,y:-1:1:5,z:-1:1:5.
    #[arg(long, global = true)]
    pub grid: Option<String>,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Render a human-readable table instead of JSON.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Seed for random sample points.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Structure file or built-in name (alternative to the positional argument).
    #[arg(long = "structure", id = "structure_flag", value_name = "STRUCTURE", global = true)]
    pub structure: Option<String>,
}

#[derive(Debug, Args)]
pub struct Target {
    /// Structure file or built-in name.
    pub structure: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Normalized contact form, Reeb field and the special condition: the Reeb flow
    /// preserves the horizontal distribution and its metric.
    Check {
        #[command(flatten)]
        target: Target,
    },
    /// Christoffel symbols of the unique metric, torsion-free connection in frame components.
    Connection {
        #[command(flatten)]
        target: Target,
        /// Also evaluate at this point (x=..,y=.. or a comma list).
        #[arg(long)]
        at: Option<String>,
    },
    /// Curvature R(X,Y)Z and its iterated horizontal covariant derivatives.
    Curvature {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        at: Option<String>,
        /// Number of covariant derivatives applied to R.
        #[arg(long, default_value_t = 0)]
        order: usize,
    },
    /// Metricity, zero torsion, both Bianchi identities, R(xi, W) = 0, skewness of R
    /// and the Bianchi-type identity for d(alpha).
    VerifyGeometry {
        #[command(flatten)]
        target: Target,
    },
    /// Dimensions of the generator spaces i_m(q) and the stabilized isometry algebra dimension.
    Dim {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        at: Option<String>,
        /// `auto` or a fixed highest order m.
        #[arg(long, default_value = "auto")]
        order: String,
        /// Largest order tried by `--order auto`.
        #[arg(long, default_value_t = 6)]
        m_max: usize,
    },
    /// Transport a generator (X, A, c) along a curve with the prolongation ODE system (RK4).
    Prolong {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        curve: String,
        #[arg(long = "gen")]
        generator: String,
        /// Step per unit parameter.
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Reject curves with |alpha(velocity)| above the tolerance.
        #[arg(long)]
        require_horizontal: bool,
    },
    /// Transport one generator along two curves with common endpoints and compare.
    PathCheck {
        #[command(flatten)]
        target: Target,
        /// Exactly two curve files.
        #[arg(long, num_args = 1)]
        curve: Vec<String>,
        #[arg(long = "gen")]
        generator: String,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
    /// Reconstruct the Killing field of a generator on a grid and check its first-order system.
    Reconstruct {
        #[command(flatten)]
        target: Target,
        #[arg(long = "gen")]
        generator: String,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
    /// Killing-field identities for a vector field given by coordinate expressions:
    /// contact and Killing conditions, skewness and derivatives of A_Z, the Reeb commutation
    /// and the extended Riemannian Killing equation.
    Verify {
        #[command(flatten)]
        target: Target,
        /// Comma-separated components in coordinate order.
        #[arg(long, allow_hyphen_values = true)]
        field: String,
    },
    /// Dimension of i(q) over a grid, regular points and the semicontinuity check.
    Scan {
        #[command(flatten)]
        target: Target,
        #[arg(long, default_value_t = 6)]
        m_max: usize,
    },
}

/// Failure of a run, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Frame(FrameError),
    #[error(transparent)]
    Connection(ConnectionError),
    #[error(transparent)]
    Killing(KillingError),
    /// A check failed before a full report could be produced.
    #[error("{message}")]
    Failed { message: String, report: Box<Report> },
}

impl From<FrameError> for CliError {
    fn from(e: FrameError) -> Self {
        CliError::Frame(e)
    }
}

impl From<ConnectionError> for CliError {
    fn from(e: ConnectionError) -> Self {
        match e {
            ConnectionError::Frame(f) => CliError::Frame(f),
            ConnectionError::NotSpecial(sr) => {
                let mut rep = Report::new();
                rep.check(Check::new("reeb_preserves_distribution", sr.horizontal_residual, sr.points, 1e-9));
                rep.check(Check::new("reeb_preserves_metric", sr.killing_residual, sr.points, 1e-9));
                CliError::Failed {
                    message: "structure is not special: the Reeb flow does not preserve the metric".into(),
                    report: Box::new(rep),
                }
            }
            ConnectionError::Axioms { check, residual } => {
                let mut rep = Report::new();
                rep.check(Check::new(check, residual, 0, 1e-9));
                CliError::Failed {
                    message: format!("connection axiom `{check}` fails with residual {residual:e}"),
                    report: Box::new(rep),
                }
            }
            other => CliError::Connection(other),
        }
    }
}

impl From<KillingError> for CliError {
    fn from(e: KillingError) -> Self {
        match e {
            KillingError::Connection(c) => c.into(),
            other => CliError::Killing(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Failed { .. } => EXIT_CHECK,
            _ => EXIT_INPUT,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) | CliError::Usage(_) => "input",
            CliError::Frame(_) => "structure",
            CliError::Connection(_) => "connection",
            CliError::Killing(_) => "generator",
            CliError::Failed { .. } => "check",
        }
    }

    fn to_value(&self) -> Value {
        let mut v = match self {
            CliError::Failed { report, .. } => report.to_value(),
            _ => json!({ "tool": report::TOOL, "pass": false }),
        };
        let obj = v.as_object_mut().expect("reports are objects");
        obj.insert("error".into(), json!({ "kind": self.kind(), "message": self.to_string() }));
        v
    }
}

/// Output of a run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    pub output: String,
    pub json: Value,
}

/// Parses `argv` (including the program name), runs the command and
/// renders the report. Never panics on bad input.
pub fn run<I, T>(argv: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            return Outcome {
                code,
                output: e.to_string(),
                json: Value::Null,
            };
        }
    };
    let pretty = cli.global.pretty;
    let (code, json, table) = match execute(&cli) {
        Ok(rep) => {
            let code = if rep.pass() { EXIT_PASS } else { EXIT_CHECK };
            (code, rep.to_value(), rep.to_table())
        }
        Err(e) => {
            let table = match &e {
                CliError::Failed { report, .. } => format!("error: {e}\n\n{}", report.to_table()),
                _ => format!("error: {e}\n"),
            };
            (e.exit_code(), e.to_value(), table)
        }
    };
    let output = if pretty { table } else { report::to_json(&json) + "\n" };
    Outcome { code, output, json }
}

/// Binary entry point.
pub fn main() -> i32 {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    let out_path = out_flag(&args);
    let outcome = run(args);
    match out_path {
        Some(p) if outcome.json != Value::Null => {
            if let Err(e) = std::fs::write(&p, &outcome.output) {
                eprintln!("cannot write {}: {e}", p.display());
                return EXIT_INPUT;
            }
        }
        _ if outcome.code == EXIT_INPUT && outcome.json == Value::Null => eprint!("{}", outcome.output),
        _ => print!("{}", outcome.output),
    }
    outcome.code
}

fn out_flag(args: &[std::ffi::OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--out" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--out=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

struct Loaded {
    source: String,
    text: String,
    s: ContactStructure,
    /// Points at which the structure's conditions were certified.
    samples: Vec<Vec<f64>>,
}

impl Loaded {
    fn coords(&self) -> Vec<String> {
        self.s.coords().map(<[String]>::to_vec).unwrap_or_default()
    }

    fn names(&self) -> Vec<String> {
        self.coords()
    }

    fn point(&self, at: Option<&str>) -> Result<Vec<f64>, CliError> {
        if self.s.is_lie() {
            return Ok(Vec::new());
        }
        let at = at.ok_or_else(|| CliError::Usage("--at <point> is required for chart structures".into()))?;
        Ok(formats::parse_point(at, &self.coords())?)
    }
}

/// Default certification grid: 5 points per axis on [-1, 1], 3 per axis above dimension 5.
fn default_grid(dim: usize) -> Grid {
    let count = if dim <= 5 { 5 } else { 3 };
    Grid::uniform(&vec![(-1.0, 1.0, count); dim])
}

fn structure_arg<'a>(target: &'a Target, g: &'a Global) -> Result<&'a str, CliError> {
    match (&target.structure, &g.structure) {
        (Some(_), Some(_)) => Err(CliError::Usage("give the structure either positionally or with --structure".into())),
        (Some(s), None) | (None, Some(s)) => Ok(s),
        (None, None) => Err(CliError::Usage("missing structure (file path or built-in name)".into())),
    }
}

fn load(target: &Target, g: &Global) -> Result<Loaded, CliError> {
    let source = structure_arg(target, g)?.to_string();
    let text = formats::load_structure_text(&source)?;
    let raw = formats::parse_structure(&text)?;
    let samples = default_grid(raw.dim()).points();
    let s = ContactStructure::new(raw, &samples)?;
    let samples = s.sample_points(&samples);
    Ok(Loaded {
        source,
        text,
        s,
        samples,
    })
}

fn curvature(l: &Loaded) -> Result<Curvature, CliError> {
    Ok(Curvature::new(Connection::new(l.s.clone(), &l.samples, 1e-9)?))
}

/// `--grid` points if given, else seeded random points in [-1, 1]^dim.
fn eval_points(l: &Loaded, g: &Global) -> Result<Vec<Vec<f64>>, CliError> {
    if l.s.is_lie() {
        return Ok(vec![Vec::new()]);
    }
    if let Some(spec) = &g.grid {
        return Ok(formats::parse_grid(spec, &l.coords())?.points());
    }
    Ok(random_points(l.s.dim(), RANDOM_POINTS, g.seed))
}

pub fn random_points(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect()
}

fn tol(g: &Global, default: f64) -> Result<f64, CliError> {
    match g.tol {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(CliError::Usage(format!("--tol must be positive, got {t}"))),
        Some(t) => Ok(t),
        None => Ok(default),
    }
}

fn printed(e: &[Expr], names: &[String]) -> Value {
    Value::Array(e.iter().map(|x| json!(x.display(names).to_string())).collect())
}

pub fn generator_json(g: &Generator) -> Value {
    json!({ "at": nums(&g.q), "X": nums(&g.x), "A": matrix(&g.a), "c": num(g.c) })
}

fn execute(cli: &Cli) -> Result<Report, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Check { target } => cmd_check(target, g),
        Command::Connection { target, at } => cmd_connection(target, g, at.as_deref()),
        Command::Curvature { target, at, order } => cmd_curvature(target, g, at.as_deref(), *order),
        Command::VerifyGeometry { target } => cmd_verify_geometry(target, g),
        Command::Dim {
            target,
            at,
            order,
            m_max,
        } => cmd_dim(target, g, at.as_deref(), order, *m_max),
        Command::Prolong {
            target,
            curve,
            generator,
            step,
            require_horizontal,
        } => cmd_prolong(target, g, curve, generator, *step, *require_horizontal),
        Command::PathCheck {
            target,
            curve,
            generator,
            step,
        } => cmd_path_check(target, g, curve, generator, *step),
        Command::Reconstruct { target, generator, step } => cmd_reconstruct(target, g, generator, *step),
        Command::Verify { target, field } => cmd_verify(target, g, field),
        Command::Scan { target, m_max } => cmd_scan(target, g, *m_max),
    }
}

fn base_report(l: &Loaded) -> Report {
    let mut r = Report::new();
    r.structure(&l.source, &l.text);
    r
}

fn cmd_check(target: &Target, g: &Global) -> Result<Report, CliError> {
    let source = structure_arg(target, g)?.to_string();
    let text = formats::load_structure_text(&source)?;
    let raw = formats::parse_structure(&text)?;
    let dim = raw.dim();
    let grid = match &g.grid {
        Some(spec) => {
            let coords = match &raw.mode {
                Mode::Chart { coords } => coords.clone(),
                Mode::Lie { .. } => Vec::new(),
            };
            formats::parse_grid(spec, &coords)?
        }
        None => default_grid(dim),
    };
    let pts = grid.points();
    let tol = tol(g, 1e-10)?;
    let mut rep = Report::new();
    rep.structure(&source, &text);
    let s = match ContactStructure::new(raw, &pts) {
        Ok(s) => s,
        Err(e @ (FrameError::Degenerate(_) | FrameError::NonContact(_) | FrameError::Orientation { .. })) => {
            rep.field("contact", json!(false));
            rep.check(Check::new("contact", f64::INFINITY, pts.len(), tol));
            return Err(CliError::Failed {
                message: e.to_string(),
                report: Box::new(rep),
            });
        }
        Err(e) => return Err(e.into()),
    };
    let names = s.coords().map(<[String]>::to_vec).unwrap_or_default();
    let sr = s.check_special(&pts, tol)?;
    rep.field("mode", json!(if s.is_lie() { "lie" } else { "chart" }))
        .field("n", json!(s.n()))
        .field("contact", json!(true))
        .field("special", json!(sr.special))
        .field("orientation_sign", json!(s.orientation_sign()))
        .field("wedge_power", json!(s.wedge0().display(&names).to_string()))
        .field("alpha", printed(s.alpha(), &names))
        .field("reeb", printed(s.reeb(), &names));
    rep.check(Check::new("reeb_preserves_distribution", sr.horizontal_residual, sr.points, tol));
    rep.check(Check::new("reeb_preserves_metric", sr.killing_residual, sr.points, tol));
    if s.n() % 2 == 0 {
        let opp = s.with_opposite_orientation()?;
        rep.field("alpha_opposite", printed(opp.alpha(), &names));
    }
    Ok(rep)
}

fn direction_name(d: usize, r: usize) -> String {
    if d == r {
        "xi".into()
    } else {
        format!("e{}", d + 1)
    }
}

fn cmd_connection(target: &Target, g: &Global, at: Option<&str>) -> Result<Report, CliError> {
    let l = load(target, g)?;
    let curv = curvature(&l)?;
    let conn = curv.connection();
    let r = conn.rank();
    let names = l.names();
    let mut rep = base_report(&l);
    let mut comps = Vec::new();
    for (d, block) in conn.gamma().iter().enumerate() {
        for (k, row) in block.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if !e.is_zero() {
                    comps.push(json!({
                        "direction": direction_name(d, r),
                        "k": k + 1,
                        "j": j + 1,
                        "expr": e.display(&names).to_string(),
                    }));
                }
            }
        }
    }
    rep.field("gamma_nonzero", Value::Array(comps));
    if at.is_some() || l.s.is_lie() {
        let q = l.point(at)?;
        let vals: Vec<Value> = conn
            .gamma()
            .iter()
            .map(|b| {
                Value::Array(
                    b.iter()
                        .map(|row| {
                            nums(&row.iter().map(|e| e.evaluate(&q)).collect::<Result<Vec<_>, _>>().unwrap_or_default())
                        })
                        .collect(),
                )
            })
            .collect();
        rep.field("at", nums(&q)).field("gamma", Value::Array(vals));
    }
    let pts = eval_points(&l, g)?;
    let tol = tol(g, 1e-10)?;
    for (name, res) in conn.axiom_residuals(&pts)? {
        rep.check(Check::new(name, res, pts.len(), tol));
    }
    Ok(rep)
}

fn cmd_curvature(target: &Target, g: &Global, at: Option<&str>, order: usize) -> Result<Report, CliError> {
    let l = load(target, g)?;
    let mut curv = curvature(&l)?;
    curv.ensure(order)?;
    let t = curv.r(order).clone();
    let mut rep = base_report(&l);
    let shape = vec![t.dim; t.rank()];
    rep.field("order", json!(order))
        .field("layout", json!("[k][a][b][j] = R(e_a, e_b) e_j component k, derivative slots after k"))
        .field("shape", json!(shape))
        .field("identically_zero", json!(t.is_zero()));
    let pts = eval_points(&l, g)?;
    let tape = t.tape();
    let mut max_abs = 0.0f64;
    for p in &pts {
        let v = tape.eval(p).map_err(|e| CliError::Usage(format!("evaluation failed at {p:?}: {e}")))?;
        max_abs = v.iter().fold(max_abs, |m, x| m.max(x.abs()));
    }
    rep.field("points", json!(pts.len())).field("max_abs", num(max_abs));
    if at.is_some() || l.s.is_lie() {
        let q = l.point(at)?;
        let v = tape.eval(&q).map_err(|e| CliError::Usage(format!("evaluation failed at {q:?}: {e}")))?;
        rep.field("at", nums(&q)).field("values", nums(&v));
    }
    Ok(rep)
}

fn cmd_verify_geometry(target: &Target, g: &Global) -> Result<Report, CliError> {
    let l = load(target, g)?;
    let mut curv = curvature(&l)?;
    let pts = eval_points(&l, g)?;
    let tol = tol(g, 1e-10)?;
    let mut rep = base_report(&l);
    for c in curv.verify_geometry(&pts, tol)? {
        rep.check(c);
    }
    Ok(rep)
}

fn rank_options(m_max: usize) -> RankOptions {
    RankOptions {
        m_max,
        ..RankOptions::default()
    }
}

fn cmd_dim(target: &Target, g: &Global, at: Option<&str>, order: &str, m_max: usize) -> Result<Report, CliError> {
    let order = match order {
        "auto" => Order::Auto,
        m => Order::Fixed(
            m.parse()
                .map_err(|_| CliError::Usage(format!("--order must be `auto` or an integer, got `{m}`")))?,
        ),
    };
    let l = load(target, g)?;
    let q = l.point(at)?;
    let mut curv = curvature(&l)?;
    let sp = killing::generator_space(&mut curv, &q, order, rank_options(m_max))?;
    let n = l.s.n();
    let bound = (n + 1) * (n + 1);
    let mut rep = base_report(&l);
    rep.field("dims", json!(sp.dims))
        .field("dim_i", json!(sp.dim()))
        .field("certified", json!(sp.certified))
        .field("at", nums(&q))
        .field("m_used", json!(sp.m_used))
        .field("bound", json!(bound))
        .field("threshold", num(sp.threshold))
        .field("singular_values", nums(&sp.singular_values))
        .field("basis", Value::Array(sp.basis.iter().map(generator_json).collect()));
    if let Some(why) = &sp.stopped {
        rep.field("stopped", json!(why));
    }
    let k = sp.dims.len();
    let stab = if k >= 3 {
        (sp.dims[k - 1].abs_diff(sp.dims[k - 2]) + sp.dims[k - 2].abs_diff(sp.dims[k - 3])) as f64
    } else {
        f64::INFINITY
    };
    rep.check(Check::new("stabilization", stab, 1, 0.5));
    rep.check(Check::new("dimension_bound", sp.dim().saturating_sub(bound) as f64, 1, 0.5));
    Ok(rep)
}

fn load_generator(l: &Loaded, path: &str) -> Result<Generator, CliError> {
    Ok(formats::parse_generator(&formats::read(path)?, l.s.rank(), &l.coords())?)
}

fn cmd_prolong(
    target: &Target,
    g: &Global,
    curve: &str,
    generator: &str,
    step: f64,
    horizontal: bool,
) -> Result<Report, CliError> {
    let l = load(target, g)?;
    let curv = curvature(&l)?;
    let c = formats::parse_curve(&formats::read(curve)?, l.s.dim())?;
    let gen = load_generator(&l, generator)?;
    let tol = tol(g, 1e-8)?;
    let opts = TransportOptions {
        step,
        horizontal_tol: horizontal.then_some(tol),
    };
    let out = killing::transport(&curv, &gen, &c, opts)?;
    let mut rep = base_report(&l);
    rep.field("start", generator_json(&gen))
        .field("end", generator_json(&out.end))
        .field("steps", json!(out.steps))
        .field("skew_drift", num(out.skew_drift))
        .field("max_vertical_speed", num(out.max_vertical_speed));
    rep.check(Check::new("skewness", out.skew_drift, out.steps, tol));
    Ok(rep)
}

fn cmd_path_check(target: &Target, g: &Global, curves: &[String], generator: &str, step: f64) -> Result<Report, CliError> {
    if curves.len() != 2 {
        return Err(CliError::Usage(format!("path-check needs exactly two --curve files, got {}", curves.len())));
    }
    let l = load(target, g)?;
    let curv = curvature(&l)?;
    let c1 = formats::parse_curve(&formats::read(&curves[0])?, l.s.dim())?;
    let c2 = formats::parse_curve(&formats::read(&curves[1])?, l.s.dim())?;
    let gen = load_generator(&l, generator)?;
    let opts = TransportOptions {
        step,
        horizontal_tol: None,
    };
    let pc = killing::path_independence(&curv, &gen, &c1, &c2, opts)?;
    let tol = tol(g, 1e-6)?;
    let mut rep = base_report(&l);
    rep.field("deviation", num(pc.deviation))
        .field("first", generator_json(&pc.first.end))
        .field("second", generator_json(&pc.second.end));
    rep.check(Check::new("path_independence", pc.deviation, 2, tol));
    rep.check(Check::new(
        "skewness",
        pc.first.skew_drift.max(pc.second.skew_drift),
        pc.first.steps + pc.second.steps,
        1e-8,
    ));
    Ok(rep)
}

fn required_grid(l: &Loaded, g: &Global) -> Result<Grid, CliError> {
    let spec = g
        .grid
        .as_deref()
        .ok_or_else(|| CliError::Usage("--grid <spec> is required".into()))?;
    Ok(formats::parse_grid(spec, &l.coords())?)
}

fn cmd_reconstruct(target: &Target, g: &Global, generator: &str, step: f64) -> Result<Report, CliError> {
    let l = load(target, g)?;
    if l.s.is_lie() {
        return Err(KillingError::LieTransport.into());
    }
    let mut curv = curvature(&l)?;
    let gen = load_generator(&l, generator)?;
    let grid = required_grid(&l, g)?;
    let opts = TransportOptions {
        step,
        horizontal_tol: None,
    };
    let field = killing::reconstruct_field(&mut curv, &gen, &grid, opts, RankOptions::default())?;
    let tol = tol(g, 1e-4)?;
    let mut rep = base_report(&l);
    rep.field("generator", generator_json(&gen))
        .field("axes", matrix(&grid.axes))
        .field(
            "samples",
            Value::Array(
                field
                    .samples
                    .iter()
                    .map(|s| json!({ "at": nums(&s.q), "X": nums(&s.x), "A": matrix(&s.a), "c": num(s.c), "Z": nums(&s.z) }))
                    .collect(),
            ),
        );
    for c in killing::verify_discrete(&curv, &field, tol)? {
        rep.check(c);
    }
    Ok(rep)
}

fn cmd_verify(target: &Target, g: &Global, field: &str) -> Result<Report, CliError> {
    let l = load(target, g)?;
    let names = l.names();
    let z = field
        .split(',')
        .map(|s| {
            parse_expression(s, &names).map_err(|source| {
                CliError::Input(InputError::Expression {
                    line: 0,
                    text: s.to_string(),
                    source,
                })
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut curv = curvature(&l)?;
    let pts = eval_points(&l, g)?;
    let tol = tol(g, 1e-9)?;
    let mut rep = base_report(&l);
    rep.field("field", printed(&z, &names));
    for c in killing::verify_killing(&mut curv, &z, &pts, tol)? {
        rep.check(c);
    }
    rep.check(killing::riemannian_extension_check(&l.s, &z, &pts, tol)?);
    Ok(rep)
}

fn cmd_scan(target: &Target, g: &Global, m_max: usize) -> Result<Report, CliError> {
    let l = load(target, g)?;
    let grid = if l.s.is_lie() { Grid::default() } else { required_grid(&l, g)? };
    let mut curv = curvature(&l)?;
    let map = killing::scan_regularity(&mut curv, &grid, rank_options(m_max))?;
    let interior: Vec<usize> = (0..grid.len()).filter(|&i| grid.is_interior(i)).collect();
    let constant = map.dims.first().filter(|d| map.dims.iter().all(|x| x == *d));
    let mut rep = base_report(&l);
    rep.field("points", json!(map.points.len()))
        .field("constant_dimension", json!(constant))
        .field("dims", json!(map.dims))
        .field("orders", json!(map.orders))
        .field("regular", json!(map.regular))
        .field("interior_points", json!(interior.len()))
        .field("interior_regular", json!(interior.iter().filter(|&&i| map.regular[i]).count()))
        .field("semicontinuity_violations", json!(map.semicontinuity_violations.len()));
    let uncertified = map.certified.iter().filter(|c| !**c).count();
    rep.check(Check::new("certified", uncertified as f64, map.points.len(), 0.5));
    rep.check(Check::new(
        "semicontinuity",
        map.semicontinuity_violations.len() as f64,
        map.points.len(),
        0.5,
    ));
    Ok(rep)
}

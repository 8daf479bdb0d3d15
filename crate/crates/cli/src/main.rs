//! `colombeau` command line.
//!
//! Every command writes `<command>.csv` (and for `demo` a directory of CSVs)
//! under `--out`, prints a JSON document on stdout and exits with
//! 0/1/2 for yes/no/inconclusive. Failures print a JSON error document on
//! stderr and exit with 64 (bad input) or 70 (computation failed).

mod input;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use colombeau::association::{associated_limit, battery, is_associated};
use colombeau::asymptotics::{classify_moderate, classify_negligible, NegligibleMode, Verdict};
use colombeau::config::RunConfig;
use colombeau::demo::{self, csv};
use colombeau::flows::{check_flow_conditions, flow_net, VectorField};
use colombeau::geometry::{check_metric, pp_wave_chart, pp_wave_metric};
use colombeau::ode::OdeOptions;
use colombeau::{ChartDomain, DistributionSpec, EpsilonGrid, Error, Expr, Representative};
use serde_json::{json, Value};

#[derive(Parser, Debug)]
#[command(name = "colombeau", version, about = "Generalized functions as computable ε-nets")]
struct Cli {
    /// Flat `key = value` run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// ε-grid as `eps_max,ratio,count`.
    #[arg(long, global = true)]
    grid: Option<String>,
    /// Number of vanishing-moment conditions of the mollifier.
    #[arg(long = "mollifier-q", global = true)]
    mollifier_q: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Moderate,
    Negligible,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Moderateness or negligibility of an expression net on a box.
    Classify {
        /// Expression text, or `@file`.
        #[arg(long)]
        expr: String,
        /// Compact box `a:b[,c:d…]`.
        #[arg(long = "box", allow_hyphen_values = true, default_value = "-1:1")]
        kbox: String,
        #[arg(long, default_value_t = 0)]
        alpha_max: usize,
        #[arg(long, value_enum, default_value = "moderate")]
        mode: Mode,
        #[arg(long, default_value_t = 1)]
        m_max: u32,
    },
    /// Values of the embedding of a distribution at points over the grid.
    Embed {
        /// Distribution spec, e.g. `delta`, `heaviside`, `2*pv_inv - delta'`.
        #[arg(long)]
        dist: String,
        /// Comma-separated points.
        #[arg(long, allow_hyphen_values = true, default_value = "0")]
        points: String,
    },
    /// Pairings `∫ u_ε φ` over the grid and their limit.
    Pair {
        #[arg(long)]
        expr: String,
        /// Bump test function `c,r[,tilt]`; repeatable. Default: the battery.
        #[arg(long = "test", allow_hyphen_values = true)]
        tests: Vec<String>,
    },
    /// Association of two nets on the test-function battery.
    Associate {
        #[arg(long)]
        u: String,
        #[arg(long)]
        v: String,
    },
    /// Geodesics of a generalized metric and their ε → 0 limit.
    Geodesic {
        /// Metric file (`coords`, `chart`, `compact`, `g i j = expr` lines).
        #[arg(long, conflicts_with = "ppwave", required_unless_present = "ppwave")]
        metric: Option<PathBuf>,
        /// Impulsive pp-wave with profile f(x, y).
        #[arg(long)]
        ppwave: Option<String>,
        /// Initial position.
        #[arg(long, allow_hyphen_values = true, default_value = "-1,0,1,1")]
        start: String,
        /// Initial velocity.
        #[arg(long, allow_hyphen_values = true, default_value = "1,0,0,0")]
        velocity: String,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        t0: f64,
        #[arg(long, allow_hyphen_values = true, default_value_t = 2.0)]
        t1: f64,
    },
    /// Flows of a generalized vector field.
    Flow {
        /// Field file (`coords`, `chart`, `compact`, `xi i = expr` lines).
        #[arg(long, conflicts_with = "torus", required_unless_present = "torus")]
        field: Option<PathBuf>,
        /// The torus field ξ = (1, 1 - |ln ε| ρ_σ(α)).
        #[arg(long)]
        torus: bool,
        /// Start point; repeatable.
        #[arg(long = "start", allow_hyphen_values = true)]
        starts: Vec<String>,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        t_max: f64,
        /// Number of equally spaced output times.
        #[arg(long, default_value_t = 17)]
        samples: usize,
    },
    /// One of the worked examples.
    Demo {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(colombeau::config::DEMOS))]
        name: String,
    },
}

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Parse { .. } => (64, "parse"),
            Error::Config(_) => (64, "config"),
            Error::Grid(_) => (64, "grid"),
            Error::InvalidBox(_) => (64, "box"),
            Error::UnsupportedDistribution(_) => (64, "distribution"),
            Error::Mollifier(_) => (64, "mollifier"),
            Error::Io(_) => (64, "io"),
            Error::Uncertified(_) | Error::NonPositiveLog(_) => (64, "certificate"),
            Error::Shape(_) | Error::DomainMismatch(_) => (64, "shape"),
            Error::Metric(_) => (70, "metric"),
            Error::Domain { .. } | Error::Composition(_) | Error::Support { .. } => (70, "domain"),
            Error::Quadrature { .. } => (70, "quadrature"),
            Error::Singular { .. } => (70, "singular"),
            Error::Ode(_) => (70, "ode"),
            Error::Parameter(_) | Error::GridMismatch(_) => (70, "computation"),
        };
        Failure { code, kind, message: e.to_string() }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 64, kind: "usage", message: message.into() }
}

type Run<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(usage(e.to_string().trim_end())),
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => fail(f),
    }
}

fn fail(f: Failure) -> ExitCode {
    let doc = json!({ "error": { "kind": f.kind, "message": f.message, "exit_code": f.code } });
    eprintln!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    ExitCode::from(f.code)
}

fn config(cli: &Cli) -> Run<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(g) = &cli.grid {
        cfg.grid = EpsilonGrid::parse(g)?;
    }
    if let Some(q) = cli.mollifier_q {
        cfg.mollifier_q = q;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(dir: &Path, name: &str, contents: &str) -> Run<()> {
    std::fs::create_dir_all(dir).map_err(Error::from)?;
    std::fs::write(dir.join(name), contents).map_err(|e| Error::Io(format!("{}: {e}", dir.join(name).display())))?;
    Ok(())
}

fn emit(cfg: &RunConfig, name: &str, doc: &Value) -> Run<()> {
    let text = serde_json::to_string_pretty(doc).expect("serializable");
    write(&cfg.out_dir, &format!("{name}.json"), &format!("{text}\n"))?;
    println!("{text}");
    Ok(())
}

fn expression(arg: &str) -> Run<Expr> {
    Ok(colombeau::expr::parse(input::text_or_file(arg)?.trim())?)
}

fn ode(cfg: &RunConfig) -> OdeOptions {
    OdeOptions { rel_tol: cfg.tolerances.ode_rel_tol, ..OdeOptions::default() }
}

fn run(cli: Cli) -> Run<u8> {
    let cfg = config(&cli)?;
    match cli.command {
        Command::Classify { expr, kbox, alpha_max, mode, m_max } => classify(&cfg, &expr, &kbox, alpha_max, mode, m_max),
        Command::Embed { dist, points } => embed(&cfg, &dist, &points),
        Command::Pair { expr, tests } => pair_cmd(&cfg, &expr, &tests),
        Command::Associate { u, v } => associate(&cfg, &u, &v),
        Command::Geodesic { metric, ppwave, start, velocity, t0, t1 } => {
            geodesic(&cfg, metric.as_deref(), ppwave.as_deref(), &start, &velocity, (t0, t1))
        }
        Command::Flow { field, torus, starts, t_max, samples } => flow(&cfg, field.as_deref(), torus, &starts, t_max, samples),
        Command::Demo { name } => run_demo(&cfg, &name),
    }
}

fn verdict_code(v: Verdict) -> u8 {
    v.exit_code() as u8
}

fn classify(cfg: &RunConfig, expr: &str, kbox: &str, alpha_max: usize, mode: Mode, m_max: u32) -> Run<u8> {
    let e = expression(expr)?;
    let k = input::compact(kbox)?;
    let n = k.dim();
    if (n..e.arity()).any(|i| e.depends_on_var(i)) {
        return Err(usage(format!("expression uses coordinates beyond the {n}-dimensional box")));
    }
    let rep = Representative::scalar(e, ChartDomain::euclidean(n))?;
    let grid = cfg.grid;
    let c = match mode {
        Mode::Moderate => classify_moderate(&rep, &k, alpha_max, &grid, &cfg.tolerances)?,
        Mode::Negligible => {
            classify_negligible(&rep, &k, m_max, &grid, NegligibleMode::AllDerivatives(alpha_max), &cfg.tolerances)?
        }
    };
    let mut header = vec!["eps".to_string()];
    header.extend(c.fits.iter().map(|f| format!("sup_d{}", f.alpha.iter().map(|a| a.to_string()).collect::<Vec<_>>().join("_"))));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..grid.len()).map(|j| std::iter::once(grid.get(j)).chain(c.fits.iter().map(|f| f.values[j])).collect());
    write(&cfg.out_dir, "classify.csv", &csv(&header, rows))?;
    let fits: Vec<Value> = c
        .fits
        .iter()
        .map(|f| {
            json!({
                "alpha": f.alpha,
                "slope": f.estimate.slope,
                "residual": f.estimate.residual,
                "zero_tail": f.estimate.zero_tail,
                "overflow": f.estimate.overflow,
            })
        })
        .collect();
    let mode_name = match mode {
        Mode::Moderate => "moderate",
        Mode::Negligible => "negligible",
    };
    emit(cfg, "classify", &json!({ "command": "classify", "mode": mode_name, "verdict": c.verdict, "order": c.order, "fits": fits }))?;
    Ok(verdict_code(c.verdict))
}

fn embed(cfg: &RunConfig, dist: &str, points: &str) -> Run<u8> {
    let w = DistributionSpec::parse(dist)?;
    let m = cfg.mollifier()?;
    let rep = Representative::iota(&w, &m, ChartDomain::euclidean(1))?;
    let xs = input::numbers(points)?;
    if xs.is_empty() {
        return Err(usage("no points given"));
    }
    let grid = cfg.grid;
    let mut rows = Vec::new();
    for j in 0..grid.len() {
        let e = grid.get(j);
        for &x in &xs {
            rows.push(vec![e, x, rep.eval_scalar(e, &[x])?]);
        }
    }
    write(&cfg.out_dir, "embed.csv", &csv(&["eps", "x", "value"], rows))?;
    emit(cfg, "embed", &json!({ "command": "embed", "distribution": w.to_string(), "expr": rep.expr().to_string(), "points": xs }))?;
    Ok(0)
}

fn pair_cmd(cfg: &RunConfig, expr: &str, tests: &[String]) -> Run<u8> {
    let rep = Representative::scalar(expression(expr)?, ChartDomain::euclidean(1))?;
    let phis = if tests.is_empty() { battery() } else { tests.iter().map(|t| input::test_function(t)).collect::<Result<_, _>>()? };
    let grid = cfg.grid;
    let mut rows = Vec::new();
    let mut members = Vec::new();
    let mut all = true;
    for (i, phi) in phis.iter().enumerate() {
        let lim = associated_limit(&rep, phi, &grid, &cfg.tolerances)?;
        for (e, v) in lim.eps.iter().zip(&lim.values) {
            rows.push(vec![i as f64, *e, *v]);
        }
        all &= lim.converged;
        members.push(json!({
            "test": phi.label(),
            "limit": lim.limit,
            "converged": lim.converged,
            "tail_spread": lim.tail_spread,
            "accelerated": lim.accelerated.is_some(),
        }));
    }
    write(&cfg.out_dir, "pair.csv", &csv(&["test", "eps", "pairing"], rows))?;
    let verdict = if all { Verdict::Yes } else { Verdict::Inconclusive };
    emit(cfg, "pair", &json!({ "command": "pair", "converged": verdict, "members": members }))?;
    Ok(verdict_code(verdict))
}

fn associate(cfg: &RunConfig, u: &str, v: &str) -> Run<u8> {
    let dom = ChartDomain::euclidean(1);
    let u = Representative::scalar(expression(u)?, dom.clone())?;
    let v = Representative::scalar(expression(v)?, dom)?;
    let b = battery();
    let r = is_associated(&u, &v, &b, &cfg.grid, &cfg.tolerances)?;
    let mut rows = Vec::new();
    for (i, m) in r.members.iter().enumerate() {
        for (e, val) in m.limit.eps.iter().zip(&m.limit.values) {
            rows.push(vec![i as f64, *e, *val]);
        }
    }
    write(&cfg.out_dir, "associate.csv", &csv(&["test", "eps", "pairing_of_difference"], rows))?;
    let members: Vec<Value> = r
        .members
        .iter()
        .map(|m| json!({ "test": m.label, "limit": m.limit.limit, "converged": m.limit.converged, "verdict": m.verdict }))
        .collect();
    emit(cfg, "associate", &json!({ "command": "associate", "verdict": r.verdict, "battery_version": r.battery_version, "members": members }))?;
    Ok(verdict_code(r.verdict))
}

fn geodesic(cfg: &RunConfig, metric: Option<&Path>, ppwave: Option<&str>, start: &str, velocity: &str, tspan: (f64, f64)) -> Run<u8> {
    let m = cfg.mollifier()?;
    let (g, k) = match (metric, ppwave) {
        (_, Some(f)) => {
            let f = colombeau::expr::parse_with_names(input::text_or_file(f)?.trim(), &["x", "y"])?;
            (pp_wave_metric(&f, &m, pp_wave_chart())?, input::compact("-2:2,-2:2,-2:2,-2:2")?)
        }
        (Some(path), None) => {
            let text = input::text_or_file(&format!("@{}", path.display()))?;
            let file = input::chart_file(&text, "g", 2)?;
            let n = file.chart.dim();
            (Representative::matrix(n, input::metric_components(&file)?, file.chart.clone())?, file.compact)
        }
        (None, None) => return Err(usage("one of --metric or --ppwave is required")),
    };
    let metric = check_metric(&g, &k, &cfg.grid, &cfg.tolerances)?;
    let p0 = input::numbers(start)?;
    let v0 = input::numbers(velocity)?;
    let net = metric.geodesic_net(&p0, &v0, &cfg.grid, tspan, &ode(cfg))?;
    let r = &net.report;
    let n = metric.dim();
    let names: Vec<String> = g.domain().names().to_vec();
    let mut header = vec!["eps".to_string(), "t".to_string()];
    header.extend(names.iter().cloned());
    header.extend(names.iter().map(|s| format!("d{s}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let geos = net.curve.geodesics().expect("geodesic net");
    let rows = geos.iter().flat_map(|geo| {
        r.times.iter().map(move |&t| {
            let mut row = vec![geo.eps, t];
            row.extend(geo.trajectory.at(t));
            row
        })
    });
    write(&cfg.out_dir, "geodesic.csv", &csv(&header, rows))?;
    let mut lheader = vec!["t".to_string()];
    lheader.extend(names.iter().cloned());
    let lheader: Vec<&str> = lheader.iter().map(String::as_str).collect();
    write(
        &cfg.out_dir,
        "geodesic_limit.csv",
        &csv(&lheader, r.times.iter().zip(&r.limit).map(|(t, p)| std::iter::once(*t).chain(p.iter().copied()).collect())),
    )?;
    let truncated = geos.iter().any(|g| g.truncated());
    emit(
        cfg,
        "geodesic",
        &json!({
            "command": "geodesic",
            "dim": n,
            "metric": metric.summary(),
            "c_bounded": net.curve.c_bounded,
            "truncated": truncated,
            "cauchy": r.cauchy,
            "successive": r.successive,
            "kink_time": r.kink_time,
            "position_at_kink": r.position_at_kink,
            "velocity_jump": r.velocity_jump,
            "position_jump": r.position_jump,
            "max_second_difference": r.max_second_difference,
        }),
    )?;
    Ok(if r.cauchy && !truncated { 0 } else { 2 })
}

fn flow(cfg: &RunConfig, field: Option<&Path>, torus: bool, starts: &[String], t_max: f64, samples: usize) -> Run<u8> {
    let (xi, k) = if torus {
        (VectorField::torus_example(&cfg.mollifier()?)?, input::default_compact(&ChartDomain::torus())?)
    } else {
        let path = field.ok_or_else(|| usage("one of --field or --torus is required"))?;
        let text = input::text_or_file(&format!("@{}", path.display()))?;
        let file = input::chart_file(&text, "xi", 1)?;
        (VectorField::from_exprs(input::field_components(&file)?, file.chart.clone())?, file.compact)
    };
    if samples < 2 || !(t_max.is_finite()) {
        return Err(usage("need --samples ≥ 2 and a finite --t-max"));
    }
    let starts: Vec<Vec<f64>> = if starts.is_empty() {
        vec![k.center()]
    } else {
        starts.iter().map(|s| input::numbers(s)).collect::<Result<_, _>>()?
    };
    let net = flow_net(&xi, &cfg.grid, t_max, starts.clone(), &ode(cfg))?;
    let hyp = check_flow_conditions(&xi, &k, &cfg.grid)?;
    let times = colombeau::domain::linspace(0.0, t_max, samples);
    let n = xi.domain().dim();
    let mut header = vec!["eps".to_string(), "t".to_string(), "start".to_string()];
    header.extend(xi.domain().names().iter().cloned());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut rows = Vec::new();
    for j in 0..cfg.grid.len() {
        for i in 0..starts.len() {
            for &t in &times {
                let mut row = vec![net.eps(j), t, i as f64];
                row.extend(net.at(j, i, t));
                rows.push(row);
            }
        }
    }
    write(&cfg.out_dir, "flow.csv", &csv(&header, rows))?;
    emit(
        cfg,
        "flow",
        &json!({ "command": "flow", "dim": n, "starts": starts, "truncated": net.truncated(), "hypotheses": hyp }),
    )?;
    Ok(if net.truncated() { 2 } else { 0 })
}

fn run_demo(cfg: &RunConfig, name: &str) -> Run<u8> {
    let report = demo::run(name, cfg)?;
    let dir = cfg.out_dir.join(name);
    for (file, contents) in &report.files {
        write(&dir, file, contents)?;
    }
    let summary = report.summary();
    write(&dir, "summary.txt", &summary)?;
    write(&dir, "config.txt", &cfg.to_text())?;
    let doc = serde_json::to_string_pretty(&report).expect("serializable");
    write(&dir, "report.json", &format!("{doc}\n"))?;
    print!("{summary}");
    Ok(if report.passed() { 0 } else { 1 })
}

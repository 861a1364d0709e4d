//! Command-line front end: critical values, limiting coverage functions and
//! Monte Carlo power tables.
//!
//! Exit codes: 0 on success, 2 for invalid input (flags, config, domain
//! violations), 3 for numerical or engine failures.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::critical::{solve_c1, solve_c2, Alpha};
use crate::error::Error;
use crate::limit::{
    eval_h, eval_w_with, h_monotonicity_scan, DriftParams, LimitCi, LimitSigmas, WMethod,
};
use crate::mc::{power_curves, AlternativeSeq, CiKind, DgpSpec, McSettings, PowerPoint};
use crate::normal::Corr;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "IVCI_THREADS";

pub const CRITVAL_HEADER: &str =
    "ci,alpha,delta,sigma_l,sigma_u,rho,c_l,c_u,objective,residual_1,residual_2,binding_1,binding_2,branch";
pub const POWER_HEADER: &str = "ci_kind,n,psi,theta,cover_e,cover_i,diff,mc_se,reps,seed";
pub const LIMIT_HEADER: &str = "fn,sigma_l,sigma_u,rho,mu,psi,alpha,value";
pub const SCAN_HEADER: &str = "sigma_1,sigma_2,mu,psi,h_1,h_2";

#[derive(Debug, Parser)]
#[command(name = "ivci", version, about = "Confidence intervals for interval-identified parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print CI¹ or CI² critical values as a one-row CSV.
    Critval(CritvalArgs),
    /// Run a Monte Carlo power experiment described by a TOML config.
    Power(PowerArgs),
    /// Evaluate limiting coverage functions or scan H for monotonicity.
    Limit(LimitArgs),
}

#[derive(Debug, Args)]
struct CritvalArgs {
    /// Interval: 1 or 2.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    ci: u8,
    #[arg(long)]
    alpha: f64,
    /// √N (θ̂_u − θ̂_l); `inf` accepted.
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    sigma_l: f64,
    #[arg(long)]
    sigma_u: f64,
    /// Correlation; required for --ci 2.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; overrides the config, defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG plot destination; overrides the config.
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Worker threads; overrides the environment.
    #[arg(long, env = THREADS_ENV)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LimitFn {
    H,
    W,
    HScan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Closed,
    Quadrature,
}

#[derive(Debug, Args)]
struct LimitArgs {
    #[arg(long = "fn", value_enum)]
    function: LimitFn,
    #[arg(long)]
    alpha: f64,
    /// σ grid for h and h-scan: comma list of values or `start:step:end` ranges.
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    sigma_l: Option<String>,
    #[arg(long)]
    sigma_u: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    mu: Option<String>,
    #[arg(long)]
    psi: Option<String>,
    /// Evaluation method for w.
    #[arg(long, value_enum, default_value = "closed")]
    method: Method,
}

/// Experiment description for `ivci power`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub dgp: DgpSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub alpha: f64,
    pub reps: u64,
    pub seed: u64,
    pub n: Vec<u64>,
    #[serde(default = "default_psi")]
    pub psi: Vec<f64>,
    #[serde(default = "default_ci")]
    pub ci: Vec<String>,
    /// `local_lower`, `local_upper` or `fixed`.
    #[serde(default = "default_alternative")]
    pub alternative: String,
    pub theta_bar: Option<f64>,
    pub out: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

/// `theta_u` and `mu` are alternatives: with `mu`, θ_u = θ_l + μ/√n at each n.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSection {
    #[serde(default)]
    pub theta_l: f64,
    pub theta_u: Option<f64>,
    pub mu: Option<f64>,
    pub sigma_l: f64,
    pub sigma_u: f64,
    pub rho: f64,
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub plugin_noise: f64,
    pub sigma_lo_bound: Option<f64>,
    pub sigma_hi_bound: Option<f64>,
    pub delta_bar: Option<f64>,
}

fn default_psi() -> Vec<f64> {
    vec![0.0]
}

fn default_ci() -> Vec<String> {
    vec!["ci1".into(), "ci2".into()]
}

fn default_alternative() -> String {
    "local_lower".into()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn alternative(&self) -> anyhow::Result<AlternativeSeq> {
        match (self.experiment.alternative.as_str(), self.experiment.theta_bar) {
            ("local_lower", None) => Ok(AlternativeSeq::LocalLower),
            ("local_upper", None) => Ok(AlternativeSeq::LocalUpper),
            ("fixed", Some(theta_bar)) => Ok(AlternativeSeq::Fixed { theta_bar }),
            ("fixed", None) => bail!("alternative = \"fixed\" requires theta_bar"),
            ("local_lower" | "local_upper", Some(_)) => bail!("theta_bar is only valid with alternative = \"fixed\""),
            (other, _) => bail!("unknown alternative {other:?}; expected local_lower, local_upper or fixed"),
        }
    }

    pub fn kinds(&self) -> anyhow::Result<Vec<CiKind>> {
        let mut kinds = self.experiment.ci.iter().map(|s| s.parse::<CiKind>()).collect::<Result<Vec<_>, _>>()?;
        kinds.sort();
        kinds.dedup();
        if kinds.is_empty() {
            bail!("ci must list at least one of ci1, ci2");
        }
        Ok(kinds)
    }

    /// The DGP at sample size n (θ_u depends on n when `mu` is given).
    pub fn dgp_at(&self, n: u64) -> anyhow::Result<DgpSpec> {
        let d = &self.dgp;
        let theta_u = match (d.theta_u, d.mu) {
            (Some(t), None) => t,
            (None, Some(mu)) => d.theta_l + mu / (n as f64).sqrt(),
            _ => bail!("[dgp] needs exactly one of theta_u and mu"),
        };
        let tau2 = d.tau * d.tau;
        let (vl, vu) = (d.sigma_l * d.sigma_l, d.sigma_u * d.sigma_u);
        let widest = match (d.theta_u, d.mu) {
            (Some(t), _) => t - d.theta_l,
            (_, Some(mu)) => mu / (self.experiment.n.iter().copied().min().unwrap_or(1).max(1) as f64).sqrt(),
            _ => 0.0,
        };
        Ok(DgpSpec {
            theta_l: d.theta_l,
            theta_u,
            sigma_l: d.sigma_l,
            sigma_u: d.sigma_u,
            rho: Corr::new(d.rho)?,
            noise_tau: d.tau,
            sigma_lo_bound: d.sigma_lo_bound.unwrap_or(vl.min(vu)),
            sigma_hi_bound: d.sigma_hi_bound.unwrap_or(vl.max(vu) + tau2),
            delta_bar: d.delta_bar.unwrap_or(if widest > 0.0 { widest } else { 1.0 }),
            plugin_noise: d.plugin_noise,
        })
    }
}

/// Formats a number with 9 significant digits, `%g` style; `inf`, `-inf`
/// and `nan` for non-finite values.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };
    let trim = |s: String| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    };
    if (-5..9).contains(&exp) {
        let body = if exp >= 0 {
            let split = (exp + 1) as usize;
            format!("{}.{}", &digits[..split], &digits[split..])
        } else {
            format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
        };
        format!("{sign}{}", trim(body))
    } else {
        let body = trim(format!("{}.{}", &digits[..1], &digits[1..]));
        format!("{sign}{body}e{exp}")
    }
}

/// Parses a grid: comma-separated numbers or inclusive `start:step:end`
/// ranges (`inf` allowed as a single value).
pub fn parse_grid(text: &str) -> anyhow::Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(v.parse::<f64>().with_context(|| format!("invalid number {v:?}"))?),
            [a, step, b] => {
                let (a, step, b): (f64, f64, f64) = (
                    a.parse().with_context(|| format!("invalid range start {a:?}"))?,
                    step.parse().with_context(|| format!("invalid range step {step:?}"))?,
                    b.parse().with_context(|| format!("invalid range end {b:?}"))?,
                );
                if !(a.is_finite() && b.is_finite() && step.is_finite() && step > 0.0 && b >= a) {
                    bail!("range {item:?} needs finite start <= end and positive step");
                }
                let count = ((b - a) / step + 1e-9).floor() as u64;
                if count > 10_000_000 {
                    bail!("range {item:?} has too many points");
                }
                out.extend((0..=count).map(|i| a + i as f64 * step));
            }
            _ => bail!("invalid grid item {item:?}"),
        }
    }
    if out.is_empty() {
        bail!("empty grid");
    }
    Ok(out)
}

fn csv_writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).has_headers(false).from_writer(sink)
}

fn write_rows<W: Write>(sink: W, header: &str, rows: &[Vec<String>]) -> anyhow::Result<()> {
    let mut w = csv_writer(sink);
    w.write_record(header.split(','))?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return if e.is_domain() { EXIT_INPUT } else { EXIT_NUMERIC };
        }
    }
    EXIT_INPUT
}

/// Runs the command line `args` (including the program name), writing
/// results to `out` and diagnostics to `err`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Critval(a) => cmd_critval(&a, out),
        Command::Power(a) => cmd_power(&a, out, err),
        Command::Limit(a) => cmd_limit(&a, out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            exit_code(&e)
        }
    }
}

fn cmd_critval(a: &CritvalArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let alpha = Alpha::new(a.alpha)?;
    let target = 1.0 - a.alpha;
    let row = if a.ci == 1 {
        let c = solve_c1(a.delta, a.sigma_l, a.sigma_u, alpha)?;
        vec![
            "1".to_string(),
            fmt_num(a.alpha),
            fmt_num(a.delta),
            fmt_num(a.sigma_l),
            fmt_num(a.sigma_u),
            a.rho.map(fmt_num).unwrap_or_default(),
            fmt_num(c.c),
            fmt_num(c.c),
            fmt_num((a.sigma_l + a.sigma_u) * c.c),
            fmt_num(c.residual),
            fmt_num(c.residual),
            "true".into(),
            "true".into(),
            "scalar".into(),
        ]
    } else {
        let rho = a.rho.ok_or_else(|| Error::domain("--rho is required for --ci 2"))?;
        let p = solve_c2(a.delta, a.sigma_l, a.sigma_u, Corr::new(rho)?, alpha)?;
        vec![
            "2".to_string(),
            fmt_num(a.alpha),
            fmt_num(a.delta),
            fmt_num(a.sigma_l),
            fmt_num(a.sigma_u),
            fmt_num(rho),
            fmt_num(p.c_l),
            fmt_num(p.c_u),
            fmt_num(p.objective),
            fmt_num(p.coverage[0] - target),
            fmt_num(p.coverage[1] - target),
            p.binding[0].to_string(),
            p.binding[1].to_string(),
            format!("{}{}", p.branch.as_str(), if p.ambiguous { "_ambiguous" } else { "" }),
        ]
    };
    write_rows(out, CRITVAL_HEADER, &[row])
}

/// Runs the experiment in `cfg` on a pool of `threads` workers (rayon's
/// default when `None`).
pub fn run_power(cfg: &ExperimentConfig, threads: Option<usize>) -> anyhow::Result<Vec<PowerPoint>> {
    let alpha = Alpha::new(cfg.experiment.alpha)?;
    let alt = cfg.alternative()?;
    let kinds = cfg.kinds()?;
    if cfg.experiment.n.is_empty() {
        return Err(Error::domain("n grid must be nonempty").into());
    }
    let settings = McSettings { reps: cfg.experiment.reps, alpha, seed: cfg.experiment.seed };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            bail!("thread count must be positive");
        }
        builder = builder.num_threads(t);
    }
    let pool = builder.build().context("building worker pool")?;
    let mut points = Vec::new();
    for &n in &cfg.experiment.n {
        let spec = cfg.dgp_at(n)?;
        let pts = pool.install(|| power_curves(&spec, &alt, &[n], &cfg.experiment.psi, &kinds, &settings))?;
        points.extend(pts);
    }
    Ok(points)
}

/// CSV rows for `ivci power`.
pub fn power_csv(points: &[PowerPoint]) -> anyhow::Result<String> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            vec![
                p.ci_kind.as_str().to_string(),
                p.n.to_string(),
                fmt_num(p.psi),
                fmt_num(p.theta),
                fmt_num(p.cover_rate_e.get()),
                fmt_num(p.cover_rate_i.get()),
                fmt_num(p.difference()),
                fmt_num(p.mc_se),
                p.reps.to_string(),
                p.seed.to_string(),
            ]
        })
        .collect();
    let mut buf = Vec::new();
    write_rows(&mut buf, POWER_HEADER, &rows)?;
    Ok(String::from_utf8(buf)?)
}

fn cmd_power(a: &PowerArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    let text = fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let cfg = ExperimentConfig::from_toml(&text).with_context(|| format!("parsing {}", a.config.display()))?;
    let points = run_power(&cfg, a.threads)?;
    let csv = power_csv(&points)?;
    match a.out.as_ref().or(cfg.experiment.out.as_ref()) {
        Some(path) => write_file(path, csv.as_bytes())?,
        None => out.write_all(csv.as_bytes())?,
    }
    if let Some(path) = a.plot.as_ref().or(cfg.experiment.plot.as_ref()) {
        write_file(path, power_svg(&points, cfg.experiment.alpha).as_bytes())?;
        writeln!(err, "wrote plot to {}", path.display())?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn grid_or(text: &Option<String>, name: &str, default: Option<&str>) -> anyhow::Result<Vec<f64>> {
    match (text, default) {
        (Some(t), _) => parse_grid(t).with_context(|| format!("--{name}")),
        (None, Some(d)) => parse_grid(d),
        (None, None) => Err(anyhow!("--{name} is required for this function")),
    }
}

fn cmd_limit(a: &LimitArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<()> {
    let alpha = Alpha::new(a.alpha)?;
    let mut rows = Vec::new();
    match a.function {
        LimitFn::H => {
            for s in grid_or(&a.sigma, "sigma", None)? {
                for mu in grid_or(&a.mu, "mu", None)? {
                    for psi in grid_or(&a.psi, "psi", None)? {
                        let v = eval_h(s, mu, psi, alpha)?.get();
                        rows.push(limit_row("h", s, s, None, mu, psi, a.alpha, v));
                    }
                }
            }
            write_rows(out, LIMIT_HEADER, &rows)
        }
        LimitFn::W => {
            let method = match a.method {
                Method::Closed => WMethod::ClosedForm,
                Method::Quadrature => WMethod::Quadrature,
            };
            for sl in grid_or(&a.sigma_l, "sigma-l", None)? {
                for su in grid_or(&a.sigma_u, "sigma-u", None)? {
                    for rho in grid_or(&a.rho, "rho", None)? {
                        let sig = LimitSigmas::new(sl, su, Corr::new(rho)?)?;
                        for mu in grid_or(&a.mu, "mu", None)? {
                            for psi in grid_or(&a.psi, "psi", None)? {
                                let drift = DriftParams::new(mu, psi)?;
                                let v = eval_w_with(&sig, &drift, alpha, LimitCi::Ci1, method)?.get();
                                rows.push(limit_row("w", sl, su, Some(rho), mu, psi, a.alpha, v));
                            }
                        }
                    }
                }
            }
            write_rows(out, LIMIT_HEADER, &rows)
        }
        LimitFn::HScan => {
            let sigmas = grid_or(&a.sigma, "sigma", Some("0.5:0.01:3"))?;
            let mus = grid_or(&a.mu, "mu", Some("0,0.5,1,2"))?;
            let psis = grid_or(&a.psi, "psi", Some("0,0.5,1,2,5"))?;
            let mut grid = Vec::with_capacity(sigmas.len() * mus.len() * psis.len());
            for &mu in &mus {
                for &psi in &psis {
                    for &s in &sigmas {
                        grid.push((s, mu, psi));
                    }
                }
            }
            let report = h_monotonicity_scan(&grid, alpha)?;
            for v in &report.violations {
                rows.push([v.sigma_1, v.sigma_2, v.mu, v.psi, v.h_1, v.h_2].map(fmt_num).to_vec());
            }
            write_rows(out, SCAN_HEADER, &rows)?;
            writeln!(err, "checked {} adjacent pairs, {} violations", report.pairs_checked, report.violations.len())?;
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn limit_row(f: &str, sl: f64, su: f64, rho: Option<f64>, mu: f64, psi: f64, alpha: f64, v: f64) -> Vec<String> {
    vec![
        f.to_string(),
        fmt_num(sl),
        fmt_num(su),
        rho.map(fmt_num).unwrap_or_default(),
        fmt_num(mu),
        fmt_num(psi),
        fmt_num(alpha),
        fmt_num(v),
    ]
}

/// Static SVG of coverage against Ψ: one polyline per (interval, n,
/// channel), solid for the efficient channel and dashed for the inefficient
/// one, with a dotted reference line at 1 − α.
pub fn power_svg(points: &[PowerPoint], alpha: f64) -> String {
    const W: f64 = 720.0;
    const H: f64 = 440.0;
    const LEFT: f64 = 60.0;
    const RIGHT: f64 = 200.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 50.0;
    const COLORS: [&str; 6] = ["#1b6ca8", "#c0392b", "#27ae60", "#8e44ad", "#d35400", "#2c3e50"];

    let mut series: Vec<((CiKind, u64), Vec<&PowerPoint>)> = Vec::new();
    for p in points {
        match series.iter_mut().find(|(k, _)| *k == (p.ci_kind, p.n)) {
            Some((_, v)) => v.push(p),
            None => series.push(((p.ci_kind, p.n), vec![p])),
        }
    }
    for (_, v) in series.iter_mut() {
        v.sort_by(|a, b| a.psi.total_cmp(&b.psi));
    }
    let x_max = points.iter().map(|p| p.psi).fold(0.0f64, f64::max).max(1e-9);
    let y_min = points
        .iter()
        .flat_map(|p| [p.cover_rate_e.get(), p.cover_rate_i.get()])
        .fold(1.0 - alpha, f64::min)
        .max(0.0);
    let y_min = (y_min * 10.0).floor() / 10.0;
    let y_span = (1.0 - y_min).max(1e-9);
    let px = |x: f64| LEFT + (W - LEFT - RIGHT) * x / x_max;
    let py = |y: f64| TOP + (H - TOP - BOTTOM) * (1.0 - (y - y_min) / y_span);

    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    ));
    s.push_str(&format!("<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"));
    let (x0, x1, y0, y1) = (px(0.0), px(x_max), py(y_min), py(1.0));
    s.push_str(&format!(
        "<path d=\"M{x0:.1} {y1:.1} L{x0:.1} {y0:.1} L{x1:.1} {y0:.1}\" stroke=\"black\" fill=\"none\"/>\n"
    ));
    for i in 0..=5 {
        let xv = x_max * i as f64 / 5.0;
        let yv = y_min + y_span * i as f64 / 5.0;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
            px(xv),
            y0 + 18.0,
            fmt_tick(xv)
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
            x0 - 6.0,
            py(yv) + 4.0,
            fmt_tick(yv)
        ));
    }
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">psi</text>\n",
        (x0 + x1) / 2.0,
        H - 10.0
    ));
    s.push_str(&format!(
        "<text x=\"14\" y=\"{:.1}\" transform=\"rotate(-90 14 {:.1})\" text-anchor=\"middle\">coverage</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    ));
    let yn = py(1.0 - alpha);
    s.push_str(&format!(
        "<line x1=\"{x0:.1}\" y1=\"{yn:.1}\" x2=\"{x1:.1}\" y2=\"{yn:.1}\" stroke=\"gray\" stroke-dasharray=\"2 3\"/>\n"
    ));
    for (idx, ((kind, n), pts)) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        for (channel, dash) in [("E", ""), ("I", " stroke-dasharray=\"6 4\"")] {
            let coords: Vec<String> = pts
                .iter()
                .map(|p| {
                    let y = if channel == "E" { p.cover_rate_e.get() } else { p.cover_rate_i.get() };
                    format!("{:.1},{:.1}", px(p.psi), py(y))
                })
                .collect();
            s.push_str(&format!(
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
                coords.join(" ")
            ));
        }
        let ly = TOP + 16.0 * (2 * idx) as f64 + 10.0;
        let lx = W - RIGHT + 20.0;
        for (j, (label, dash)) in [("E", ""), ("I", " stroke-dasharray=\"6 4\"")].iter().enumerate() {
            let y = ly + 16.0 * j as f64;
            s.push_str(&format!(
                "<line x1=\"{lx:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"{color}\" stroke-width=\"1.5\"{dash}/>\n",
                lx + 24.0
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\">{} n={} {}</text>\n",
                lx + 30.0,
                y + 4.0,
                kind.as_str(),
                n,
                label
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

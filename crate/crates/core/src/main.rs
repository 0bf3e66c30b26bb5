use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use mpspread::experiments::{
    self, compare_mmca_mc, mc_onset, presets, run_powergrid_case, run_scenario, write_outputs, Comparison,
    PhysicalSpec, Scenario, SweepKind,
};
use mpspread::kernels::SensingBaseline;
use mpspread::mc::{run_ensemble, ExposureAwareness};
use mpspread::mmca::mmca_steady;
use mpspread::network::{write_edge_list, write_simplices};
use mpspread::threshold::epidemic_threshold;
use mpspread::Error;

/// Exit codes. Usage errors use clap's 2.
mod exit {
    pub const OTHER: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const MISSING_FILE: u8 = 3;
    pub const INVALID: u8 = 4;
    pub const PARSE: u8 = 5;
    pub const IO: u8 = 6;
}

#[derive(Parser, Debug)]
#[command(name = "mpspread", version, about = "Awareness/epidemic spreading on two-layer cyber-physical networks")]
struct Cli {
    /// More log output (-v info, -vv debug); logs go to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Worker threads [default: all available cores]. Results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a network and write its edge lists.
    Generate(Common),
    /// Solve the MMCA fixed point at one parameter point.
    Mmca(Common),
    /// Monte Carlo ensemble at one parameter point.
    Mc(Common),
    /// Theoretical outbreak threshold beta_c = mu / lambda_max(M).
    Threshold(Common),
    /// Density curves against beta (scenario kind "beta").
    Sweep(Common),
    /// Densities over a beta x parameter grid (scenario kind "heatmap").
    Heatmap(Common),
    /// Channel-by-channel comparison (scenario kind "ablation").
    Ablation(Common),
    /// Run shipped figure presets, e.g. `reproduce fig4 fig5`.
    Reproduce(Reproduce),
    /// MMCA-vs-Monte Carlo deviation and onset for a sweep or an existing CSV.
    Compare(Compare),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Preset name (fig4, fig5a, ...) or scenario JSON file [default: fig4].
    /// Flags given here override the file, which overrides built-in defaults.
    #[arg(short, long, value_name = "NAME|PATH")]
    scenario: Option<String>,

    /// Master seed for networks and Monte Carlo streams [default: 20240917].
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory [env: MPSPREAD_OUT] [default: out].
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Monte Carlo runs per point [default: scenario value, 100].
    #[arg(long, value_name = "N")]
    runs: Option<usize>,

    /// Points per sweep axis, replacing the scenario's count.
    #[arg(long, value_name = "N")]
    steps: Option<usize>,

    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Args, Debug, Clone, Default)]
struct ParamFlags {
    /// Infection probability per contact for unaware nodes, beta^U (probability per step).
    #[arg(long)]
    beta: Option<f64>,
    /// Pairwise information probability lambda (per step).
    #[arg(long)]
    lambda: Option<f64>,
    /// 2-simplex information probability lambda* (per step).
    #[arg(long)]
    lambda_star: Option<f64>,
    /// Forgetting probability delta (per step).
    #[arg(long)]
    delta: Option<f64>,
    /// Awareness attenuation gamma, beta^A = gamma * beta^U (dimensionless, [0, 1)).
    #[arg(long)]
    gamma: Option<f64>,
    /// Recovery probability mu (per step).
    #[arg(long)]
    mu: Option<f64>,
    /// Response intensity alpha of the sensing sigmoid (dimensionless, > 0).
    #[arg(long)]
    alpha: Option<f64>,
    /// Vigilance threshold theta, a fraction of infected contacts in (0, 1).
    #[arg(long)]
    theta: Option<f64>,
    /// Disable the pairwise information channel.
    #[arg(long)]
    no_r1: bool,
    /// Disable the 2-simplex information channel.
    #[arg(long)]
    no_r2: bool,
    /// Disable the physical sensing channel.
    #[arg(long)]
    no_r3: bool,
    /// Sensing with no infected contact: literal (sigmoid baseline) or clamped (none).
    #[arg(long, value_name = "MODE", value_parser = ["literal", "clamped"])]
    sensing_baseline: Option<String>,
    /// Awareness that selects beta^A vs beta^U in Monte Carlo: updated (this step's) or current.
    #[arg(long, value_name = "MODE", value_parser = ["updated", "current"])]
    exposure: Option<String>,
}

#[derive(Args, Debug)]
struct Reproduce {
    /// Figures or presets: fig4 .. fig9, fig5c, ..., or `all`.
    #[arg(required = true, value_name = "FIG")]
    figures: Vec<String>,

    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Compare {
    /// Read an existing sweep CSV instead of running the scenario.
    #[arg(long, value_name = "FILE", conflicts_with = "scenario")]
    csv: Option<PathBuf>,

    /// Onset level for rho_i [default: 0.005].
    #[arg(long, value_name = "RHO")]
    onset_eps: Option<f64>,

    #[command(flatten)]
    common: Common,
}

/// A failure with its exit code and a stable kind label.
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::MissingFile { .. } => (exit::MISSING_FILE, "missing_file"),
            Error::InvalidParameter { .. } | Error::Scenario(_) => (exit::INVALID, "invalid_parameter"),
            Error::Parse { .. } | Error::Json { .. } | Error::EmptyGraph { .. } => (exit::PARSE, "parse_error"),
            Error::Io { .. } => (exit::IO, "io_error"),
            Error::Invariant(_) => (exit::OTHER, "invariant"),
        };
        Failure {
            code,
            kind,
            message: e.to_string(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            report(&Failure {
                code: exit::USAGE,
                kind: "usage",
                message: first.to_string(),
            });
            return ExitCode::from(exit::USAGE);
        }
    };

    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.jobs {
        if n == 0 {
            report(&Failure {
                code: exit::USAGE,
                kind: "usage",
                message: "--jobs must be at least 1".into(),
            });
            return ExitCode::from(exit::USAGE);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("thread pool is configured once");
    }

    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f);
            ExitCode::from(f.code)
        }
    }
}

fn report(f: &Failure) {
    eprintln!(
        "{}",
        json!({"error": f.kind, "code": f.code, "message": f.message})
    );
}

fn dispatch(command: Command) -> Outcome {
    match command {
        Command::Generate(c) => generate(&c),
        Command::Mmca(c) => single_mmca(&c),
        Command::Mc(c) => single_mc(&c),
        Command::Threshold(c) => threshold(&c),
        Command::Sweep(c) => sweep(&c, Some(SweepKind::Beta)),
        Command::Heatmap(c) => sweep(&c, Some(SweepKind::Heatmap)),
        Command::Ablation(c) => sweep(&c, Some(SweepKind::Ablation)),
        Command::Reproduce(r) => reproduce(&r),
        Command::Compare(c) => compare(&c),
    }
}

/// Defaults, then the scenario file, then flags.
fn scenario(c: &Common) -> Result<Scenario, Failure> {
    let mut s = match &c.scenario {
        Some(name) => Scenario::load(name)?,
        None => Scenario::preset("fig4")?,
    };
    apply_flags(&mut s, c)?;
    Ok(s)
}

fn apply_flags(s: &mut Scenario, c: &Common) -> Outcome {
    if let Some(seed) = c.seed {
        s.run.seed = seed;
    }
    if let Some(n) = c.runs {
        s.run.n_runs = n;
    }
    if let Some(n) = c.steps {
        for a in &mut s.sweep.axes {
            a.steps = n;
        }
    }
    let f = &c.params;
    let p = &mut s.params;
    for (slot, v) in [
        (&mut p.beta_u, f.beta),
        (&mut p.lambda, f.lambda),
        (&mut p.lambda_star, f.lambda_star),
        (&mut p.delta, f.delta),
        (&mut p.gamma, f.gamma),
        (&mut p.mu, f.mu),
        (&mut p.alpha, f.alpha),
        (&mut p.theta, f.theta),
    ] {
        if let Some(v) = v {
            *slot = v;
        }
    }
    p.enable_r1 &= !f.no_r1;
    p.enable_r2 &= !f.no_r2;
    p.enable_r3 &= !f.no_r3;
    match f.sensing_baseline.as_deref() {
        Some("clamped") => p.sensing_baseline = SensingBaseline::Clamped,
        Some("literal") => p.sensing_baseline = SensingBaseline::Literal,
        _ => {}
    }
    match f.exposure.as_deref() {
        Some("current") => s.run.exposure = ExposureAwareness::Current,
        Some("updated") => s.run.exposure = ExposureAwareness::Updated,
        _ => {}
    }
    s.params.validate()?;
    s.run.validate()?;
    Ok(())
}

fn out_dir(c: &Common) -> PathBuf {
    c.out
        .clone()
        .or_else(|| std::env::var_os("MPSPREAD_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write_text(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>) -> Outcome {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| {
        Failure::from(Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    })
}

fn generate(c: &Common) -> Outcome {
    let s = scenario(c)?;
    let net = experiments::build_network(&s, None)?;
    let dir = out_dir(c);
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let physical = dir.join(format!("{}.physical.txt", s.name));
    let cyber = dir.join(format!("{}.cyber.txt", s.name));
    let simplices = dir.join(format!("{}.simplices.txt", s.name));
    write_text(&physical, |w| write_edge_list(net.physical.adjacency(), w))?;
    write_text(&cyber, |w| write_edge_list(net.cyber.adjacency(), w))?;
    write_text(&simplices, |w| write_simplices(&net.cyber, w))?;
    let info = experiments::NetworkInfo::of(&net);
    let manifest = dir.join(format!("{}.network.manifest.json", s.name));
    let body = json!({
        "tool": "mpspread",
        "version": experiments::version_string(),
        "seed": s.run.seed,
        "network": s.network,
        "stats": info,
        "files": [physical, cyber, simplices],
    });
    write_text(&manifest, |w| {
        use std::io::Write;
        writeln!(w, "{}", serde_json::to_string_pretty(&body).expect("json"))
    })?;
    println!("{}", json!({"stats": info, "manifest": manifest}));
    Ok(())
}

fn single_mmca(c: &Common) -> Outcome {
    let s = scenario(c)?;
    let net = experiments::build_network(&s, None)?;
    let d = mmca_steady(&net, &s.params, &s.mmca);
    println!(
        "{}",
        json!({"beta": s.params.beta_u, "rho_i": d.rho_i, "rho_a": d.rho_a,
               "iterations": d.iterations, "converged": d.converged, "seed": s.run.seed})
    );
    Ok(())
}

fn single_mc(c: &Common) -> Outcome {
    let s = scenario(c)?;
    let net = experiments::build_network(&s, None)?;
    let e = run_ensemble(&net, &s.params, &s.run);
    println!(
        "{}",
        json!({"beta": s.params.beta_u, "rho_i": e.rho_i_mean, "rho_i_sd": e.rho_i_sd,
               "rho_a": e.rho_a_mean, "rho_a_sd": e.rho_a_sd, "runs": e.runs_used,
               "unsettled_runs": e.unsettled_runs, "seed": s.run.seed})
    );
    Ok(())
}

fn threshold(c: &Common) -> Outcome {
    let s = scenario(c)?;
    let net = experiments::build_network(&s, None)?;
    let t = epidemic_threshold(&net, &s.params)?;
    let beta_c = if t.is_unbounded() { json!("inf") } else { json!(t.beta_c) };
    println!(
        "{}",
        json!({"beta_c": beta_c, "lambda_max": t.lambda_max, "power_iterations": t.power_iters,
               "awareness_converged": t.awareness_converged, "eigen_converged": t.eigen_converged,
               "seed": s.run.seed})
    );
    Ok(())
}

fn run_and_write(s: &Scenario, dir: &Path) -> Result<Vec<Comparison>, Failure> {
    let results = if matches!(s.network.physical, PhysicalSpec::EdgeList { .. }) && s.sweep.kind == SweepKind::Ablation {
        run_powergrid_case(s)?
    } else {
        run_scenario(s)?
    };
    let files = write_outputs(s, &results, dir)?;
    for f in &files {
        log::info!("wrote {}", f.display());
    }
    let comparisons: Vec<Comparison> = results
        .iter()
        .map(|r| compare_mmca_mc(r, s.sweep.onset_eps))
        .collect();
    for (r, cmp) in results.iter().zip(&comparisons) {
        println!("{}", json!({"output": format!("{}.csv", r.stem()), "comparison": cmp}));
    }
    Ok(comparisons)
}

fn sweep(c: &Common, kind: Option<SweepKind>) -> Outcome {
    let s = scenario(c)?;
    if let Some(k) = kind {
        if s.sweep.kind != k {
            return Err(Error::Scenario(format!(
                "scenario {} is a {:?} sweep; use the matching subcommand",
                s.name, s.sweep.kind
            ))
            .into());
        }
    }
    run_and_write(&s, &out_dir(c)).map(|_| ())
}

fn reproduce(r: &Reproduce) -> Outcome {
    let mut names = Vec::new();
    for fig in &r.figures {
        if fig == "all" {
            names.extend(presets::NAMES.iter().copied());
            continue;
        }
        match presets::group(fig) {
            Some(g) => names.extend(g),
            None => {
                return Err(Error::Scenario(format!(
                    "unknown figure `{fig}`; known presets: {}",
                    presets::NAMES.join(", ")
                ))
                .into())
            }
        }
    }
    let dir = out_dir(&r.common);
    for name in names {
        let mut c = r.common.clone();
        c.scenario = Some(name.to_string());
        let s = scenario(&c)?;
        log::info!("reproducing {name}");
        run_and_write(&s, &dir)?;
    }
    Ok(())
}

fn compare(c: &Compare) -> Outcome {
    let eps = c.onset_eps.unwrap_or(0.005);
    match &c.csv {
        Some(path) => {
            let cmp = compare_csv(path, eps)?;
            println!("{}", json!({"input": path, "comparison": cmp}));
            Ok(())
        }
        None => {
            let mut s = scenario(&c.common)?;
            s.sweep.onset_eps = eps;
            if !s.sweep.solvers.contains(&experiments::Solver::Mmca) {
                s.sweep.solvers.push(experiments::Solver::Mmca);
            }
            if !s.sweep.solvers.contains(&experiments::Solver::Mc) {
                s.sweep.solvers.push(experiments::Solver::Mc);
            }
            s.sweep.threshold = true;
            run_and_write(&s, &out_dir(&c.common)).map(|_| ())
        }
    }
}

/// Deviation and onset from the columns of a written sweep.
fn compare_csv(path: &Path, eps: f64) -> Result<Comparison, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile {
                path: path.to_path_buf(),
                hint: String::new(),
            }
        } else {
            Error::Io {
                path: path.to_path_buf(),
                source: e,
            }
        }
    })?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name);
    let parse_err = |line: usize, reason: String| {
        Failure::from(Error::Parse {
            path: path.to_path_buf(),
            line,
            reason,
        })
    };
    let (Some(b), Some(imc), Some(amc)) = (col("beta"), col("rho_i_mc"), col("rho_a_mc")) else {
        return Err(parse_err(1, "header lacks beta, rho_i_mc or rho_a_mc".into()));
    };
    let mmca = col("rho_i_mmca").zip(col("rho_a_mmca"));
    let mut curve = Vec::new();
    let (mut di, mut da, mut n) = (0.0, 0.0, 0usize);
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let num = |k: usize| {
            cells
                .get(k)
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| parse_err(i + 2, format!("column {} is not a number", k + 1)))
        };
        let (beta, ri, ra) = (num(b)?, num(imc)?, num(amc)?);
        curve.push((beta, ri));
        if let Some((mi, ma)) = mmca {
            di += (num(mi)? - ri).abs();
            da += (num(ma)? - ra).abs();
            n += 1;
        }
    }
    if curve.is_empty() {
        return Err(parse_err(2, "no data rows".into()));
    }
    Ok(Comparison {
        mad_rho_i: (n > 0).then(|| di / n as f64),
        mad_rho_a: (n > 0).then(|| da / n as f64),
        beta_onset_mc: mc_onset(&curve, eps),
        beta_c_theory: None,
    })
}

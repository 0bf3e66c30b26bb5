//! Scenario files, parameter sweeps and their CSV output.
//!
//! A scenario names a network recipe, the model parameters, a sweep over
//! one or two parameters and the solvers to run at every grid point. All
//! randomness derives from `run.seed`: the two layers use their own derived
//! streams and Monte Carlo run `r` uses the same stream at every grid point,
//! so curves are coupled across `β`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::ModelParams;
use crate::mc::{run_ensemble, EnsembleResult, RunConfig};
use crate::mmca::{mmca_steady, MmcaConfig, SteadyDensities};
use crate::network::{
    generate_simplicial_er, generate_ws, load_edge_list, mirror_layer, EdgeListFormat, MultiplexNetwork,
    PhysicalLayer,
};
use crate::seeding::{derive_seed, stream};
use crate::threshold::{epidemic_threshold, ThresholdResult};

/// Environment variable naming an extra directory searched for edge lists.
pub const DATA_DIR_ENV: &str = "MPSPREAD_DATA_DIR";

/// Where to fetch the power-grid topology used by the `fig9` preset.
pub const POWER_GRID_HINT: &str = "the US western power grid (4941 nodes, 6594 edges) is not bundled; \
download power.zip from http://www-personal.umich.edu/~mejn/netdata/, \
unpack power.gml into a `data/` directory (or set MPSPREAD_DATA_DIR) and rerun";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhysicalSpec {
    WattsStrogatz { n: usize, k: usize, p: f64 },
    EdgeList {
        path: PathBuf,
        #[serde(default)]
        format: EdgeListFormat,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CyberSpec {
    /// ER pairwise links plus random 2-simplices.
    SimplicialEr { k1: f64, k2: f64 },
    /// The physical links plus random 2-simplices.
    Mirror { k2: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub physical: PhysicalSpec,
    pub cyber: CyberSpec,
}

/// Parameters a sweep axis can move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    #[serde(alias = "beta")]
    BetaU,
    Lambda,
    LambdaStar,
    Delta,
    Gamma,
    Mu,
    Alpha,
    Theta,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::BetaU => "beta",
            SweepParam::Lambda => "lambda",
            SweepParam::LambdaStar => "lambda_star",
            SweepParam::Delta => "delta",
            SweepParam::Gamma => "gamma",
            SweepParam::Mu => "mu",
            SweepParam::Alpha => "alpha",
            SweepParam::Theta => "theta",
        }
    }

    pub fn set(self, params: &mut ModelParams, value: f64) {
        let slot = match self {
            SweepParam::BetaU => &mut params.beta_u,
            SweepParam::Lambda => &mut params.lambda,
            SweepParam::LambdaStar => &mut params.lambda_star,
            SweepParam::Delta => &mut params.delta,
            SweepParam::Gamma => &mut params.gamma,
            SweepParam::Mu => &mut params.mu,
            SweepParam::Alpha => &mut params.alpha,
            SweepParam::Theta => &mut params.theta,
        };
        *slot = value;
    }
}

/// `steps` evenly spaced values from `start` to `stop` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: SweepParam,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                // Round away representation noise so 0.02 * 3 prints as 0.06.
                let v = self.start + h * i as f64;
                (v * 1e12).round() / 1e12
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Beta,
    Heatmap,
    Ablation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Mc,
    Mmca,
}

/// Information-channel configurations compared in an ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Pairwise cyber links only.
    Pwi,
    /// 2-simplices only.
    Simplex,
    /// Physical sensing only.
    Phy,
    /// All three.
    Integrated,
    /// No information at all.
    None,
}

impl Channel {
    pub const ALL: [Channel; 5] = [
        Channel::Pwi,
        Channel::Simplex,
        Channel::Phy,
        Channel::Integrated,
        Channel::None,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Channel::Pwi => "pwi",
            Channel::Simplex => "simplex",
            Channel::Phy => "phy",
            Channel::Integrated => "integrated",
            Channel::None => "none",
        }
    }

    pub fn apply(self, params: &ModelParams) -> ModelParams {
        let (r1, r2, r3) = match self {
            Channel::Pwi => (true, false, false),
            Channel::Simplex => (false, true, false),
            Channel::Phy => (false, false, true),
            Channel::Integrated => (true, true, true),
            Channel::None => (false, false, false),
        };
        params.with_channels(r1, r2, r3)
    }
}

fn default_solvers() -> Vec<Solver> {
    vec![Solver::Mc]
}

fn default_channels() -> Vec<Channel> {
    Channel::ALL.to_vec()
}

fn default_onset_eps() -> f64 {
    0.005
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub kind: SweepKind,
    /// `β` first; heatmaps add a second axis.
    pub axes: Vec<Axis>,
    #[serde(default = "default_solvers")]
    pub solvers: Vec<Solver>,
    /// Also compute the theoretical threshold.
    #[serde(default)]
    pub threshold: bool,
    /// Configurations compared by an ablation.
    #[serde(default = "default_channels")]
    pub channels: Vec<Channel>,
    /// Draw a fresh network for every grid point instead of sharing one.
    #[serde(default)]
    pub regenerate_network: bool,
    /// `ρ^I` level that marks the Monte Carlo outbreak onset.
    #[serde(default = "default_onset_eps")]
    pub onset_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub network: NetworkSpec,
    pub params: ModelParams,
    pub sweep: SweepSpec,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub mmca: MmcaConfig,
    /// Directories searched for relative edge-list paths, before the data
    /// directory variable and the working directory.
    #[serde(skip)]
    pub search_dirs: Vec<PathBuf>,
}

impl Scenario {
    pub fn from_json(text: &str, origin: &Path) -> Result<Scenario> {
        let mut s: Scenario = serde_json::from_str(text).map_err(|source| Error::Json {
            path: origin.to_path_buf(),
            source,
        })?;
        if let Some(dir) = origin.parent() {
            if !dir.as_os_str().is_empty() {
                s.search_dirs.push(dir.to_path_buf());
            }
        }
        Ok(s)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Scenario> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingFile {
                    path: path.to_path_buf(),
                    hint: String::new(),
                }
            } else {
                Error::io(path, e)
            }
        })?;
        Scenario::from_json(&text, path)
    }

    /// A checked-in preset by name, e.g. `fig4` or `fig7c`.
    pub fn preset(name: &str) -> Result<Scenario> {
        let text = presets::get(name)
            .ok_or_else(|| Error::Scenario(format!("unknown preset `{name}`; known: {}", presets::NAMES.join(", "))))?;
        Scenario::from_json(text, Path::new(&format!("{name}.json")))
    }

    /// A preset name or a path to a scenario file. A missing `fig7a.json`
    /// falls back to the `fig7a` preset.
    pub fn load(name_or_path: &str) -> Result<Scenario> {
        let name = name_or_path.strip_suffix(".json").unwrap_or(name_or_path);
        if presets::get(name).is_some() && !Path::new(name_or_path).exists() {
            Scenario::preset(name)
        } else {
            Scenario::from_file(name_or_path)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn beta_axis(&self) -> &Axis {
        &self.sweep.axes[0]
    }

    pub fn second_axis(&self) -> Option<&Axis> {
        self.sweep.axes.get(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.run.validate()?;
        let sweep = &self.sweep;
        let want_axes = if sweep.kind == SweepKind::Heatmap { 2 } else { 1 };
        if sweep.axes.len() != want_axes {
            return Err(Error::Scenario(format!(
                "a {:?} sweep takes {want_axes} axis/axes, found {}",
                sweep.kind,
                sweep.axes.len()
            )));
        }
        if sweep.axes[0].name != SweepParam::BetaU {
            return Err(Error::Scenario("the first sweep axis must be beta".into()));
        }
        if let Some(a) = sweep.axes.get(1) {
            if !matches!(a.name, SweepParam::Lambda | SweepParam::LambdaStar | SweepParam::Theta) {
                return Err(Error::Scenario(format!(
                    "the second heatmap axis must be lambda, lambda_star or theta, not {}",
                    a.name.name()
                )));
            }
        }
        for a in &sweep.axes {
            if a.steps == 0 || !a.start.is_finite() || !a.stop.is_finite() || a.stop < a.start {
                return Err(Error::Scenario(format!(
                    "axis {} is empty or reversed: {}..{} in {} steps",
                    a.name.name(),
                    a.start,
                    a.stop,
                    a.steps
                )));
            }
            for v in [a.start, a.stop] {
                let mut p = self.params;
                a.name.set(&mut p, v);
                p.validate()?;
            }
        }
        if sweep.solvers.is_empty() {
            return Err(Error::Scenario("no solver selected".into()));
        }
        if sweep.kind == SweepKind::Ablation && sweep.channels.is_empty() {
            return Err(Error::Scenario("an ablation needs at least one channel".into()));
        }
        if !(sweep.onset_eps > 0.0 && sweep.onset_eps < 1.0) {
            return Err(Error::Scenario(format!("onset_eps {} outside (0, 1)", sweep.onset_eps)));
        }
        Ok(())
    }

    fn resolve(&self, path: &Path) -> Result<PathBuf> {
        if path.is_absolute() {
            return if path.exists() {
                Ok(path.to_path_buf())
            } else {
                Err(missing(path, &[]))
            };
        }
        let mut tried = Vec::new();
        let mut dirs = self.search_dirs.clone();
        if let Some(d) = std::env::var_os(DATA_DIR_ENV) {
            dirs.push(PathBuf::from(d));
        }
        dirs.push(PathBuf::from("."));
        for d in dirs {
            let candidate = d.join(path);
            if candidate.exists() {
                return Ok(candidate);
            }
            // A bare file name may also sit directly in the data directory.
            if let Some(name) = path.file_name() {
                let flat = d.join(name);
                if flat.exists() {
                    return Ok(flat);
                }
            }
            tried.push(candidate);
        }
        Err(missing(path, &tried))
    }
}

fn missing(path: &Path, tried: &[PathBuf]) -> Error {
    let mut hint = String::new();
    if !tried.is_empty() {
        let list: Vec<String> = tried.iter().map(|p| p.display().to_string()).collect();
        let _ = write!(hint, " (looked in {})", list.join(", "));
    }
    let _ = write!(hint, "; {POWER_GRID_HINT}");
    Error::MissingFile {
        path: path.to_path_buf(),
        hint,
    }
}

/// Size statistics of a built network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkInfo {
    pub nodes: usize,
    pub physical_edges: usize,
    pub cyber_edges: usize,
    pub simplices: usize,
    pub mean_physical_degree: f64,
    pub mean_cyber_degree: f64,
    pub mean_simplex_membership: f64,
}

impl NetworkInfo {
    pub fn of(net: &MultiplexNetwork) -> Self {
        NetworkInfo {
            nodes: net.node_count(),
            physical_edges: net.physical.edge_count(),
            cyber_edges: net.cyber.adjacency().edge_count(),
            simplices: net.cyber.simplices().len(),
            mean_physical_degree: net.physical.adjacency().mean_degree(),
            mean_cyber_degree: net.cyber.adjacency().mean_degree(),
            mean_simplex_membership: net.cyber.mean_simplex_membership(),
        }
    }
}

fn physical_layer(scenario: &Scenario, seed: u64) -> Result<PhysicalLayer> {
    match &scenario.network.physical {
        PhysicalSpec::WattsStrogatz { n, k, p } => generate_ws(*n, *k, *p, seed),
        PhysicalSpec::EdgeList { path, format } => {
            let resolved = scenario.resolve(path)?;
            let loaded = load_edge_list(&resolved, *format)?;
            Ok(loaded.layer)
        }
    }
}

/// Builds the network for `scenario`. `point` selects an independent
/// realization per grid point; `None` is the shared one.
pub fn build_network(scenario: &Scenario, point: Option<usize>) -> Result<MultiplexNetwork> {
    let seed = scenario.run.seed;
    let mut phys_seed = derive_seed(seed, stream::PHYSICAL_LAYER);
    let mut cyber_seed = derive_seed(seed, stream::CYBER_LAYER);
    if let Some(p) = point {
        phys_seed = derive_seed(phys_seed, p as u64 + 1);
        cyber_seed = derive_seed(cyber_seed, p as u64 + 1);
    }
    let physical = physical_layer(scenario, phys_seed)?;
    let cyber = match scenario.network.cyber {
        CyberSpec::SimplicialEr { k1, k2 } => generate_simplicial_er(physical.node_count(), k1, k2, cyber_seed)?,
        CyberSpec::Mirror { k2 } => mirror_layer(&physical, k2, cyber_seed)?,
    };
    MultiplexNetwork::new(cyber, physical)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub beta: f64,
    pub axis2: Option<f64>,
    pub mc: Option<EnsembleResult>,
    pub mmca: Option<SteadyDensities>,
    /// Theoretical threshold at this point's parameters.
    pub beta_c: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub scenario: String,
    /// Channel configuration for ablation curves.
    pub variant: Option<Channel>,
    pub axis2: Option<SweepParam>,
    pub network: NetworkInfo,
    /// Threshold of the shared network at the scenario parameters.
    pub threshold: Option<ThresholdResult>,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// File stem for this result: the scenario name plus the variant.
    pub fn stem(&self) -> String {
        match self.variant {
            Some(c) => format!("{}_{}", self.scenario, c.label()),
            None => self.scenario.clone(),
        }
    }

    pub fn has(&self, solver: Solver) -> bool {
        self.points.iter().all(|p| match solver {
            Solver::Mc => p.mc.is_some(),
            Solver::Mmca => p.mmca.is_some(),
        })
    }

    /// Points whose MMCA iteration hit the cap.
    pub fn unconverged_mmca(&self) -> usize {
        self.points
            .iter()
            .filter(|p| p.mmca.is_some_and(|m| !m.converged))
            .count()
    }

    /// `(β, ρ^I)` of the Monte Carlo curve, for one value of the second axis.
    pub fn mc_curve(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter_map(|p| p.mc.map(|m| (p.beta, m.rho_i_mean)))
            .collect()
    }
}

/// Grid points in row order: `β` varies slowest.
fn grid(scenario: &Scenario) -> Vec<(f64, Option<f64>)> {
    let betas = scenario.beta_axis().values();
    match scenario.second_axis() {
        None => betas.into_iter().map(|b| (b, None)).collect(),
        Some(a) => {
            let ys = a.values();
            betas
                .into_iter()
                .flat_map(|b| ys.iter().map(move |&y| (b, Some(y))))
                .collect()
        }
    }
}

fn evaluate_sweep(scenario: &Scenario, params: ModelParams, variant: Option<Channel>) -> Result<SweepResult> {
    scenario.validate()?;
    let spec = &scenario.sweep;
    let shared = build_network(scenario, None)?;
    let axis2 = scenario.second_axis().map(|a| a.name);

    let threshold = if spec.threshold {
        Some(epidemic_threshold(&shared, &params)?)
    } else {
        None
    };
    // The threshold does not depend on β, so compute one per second-axis value.
    let mut per_y: BTreeMap<u64, f64> = BTreeMap::new();
    if spec.threshold {
        if let Some(a) = scenario.second_axis() {
            let ys = a.values();
            let found: Vec<Result<(u64, f64)>> = ys
                .par_iter()
                .map(|&y| {
                    let mut p = params;
                    a.name.set(&mut p, y);
                    epidemic_threshold(&shared, &p).map(|t| (y.to_bits(), t.beta_c))
                })
                .collect();
            for f in found {
                let (k, v) = f?;
                per_y.insert(k, v);
            }
        }
    }

    let points = grid(scenario);
    let run_mc = spec.solvers.contains(&Solver::Mc);
    let run_mmca = spec.solvers.contains(&Solver::Mmca);
    let evaluated: Vec<Result<SweepPoint>> = points
        .par_iter()
        .enumerate()
        .map(|(idx, &(beta, y))| {
            let mut p = params;
            SweepParam::BetaU.set(&mut p, beta);
            if let (Some(a), Some(y)) = (axis2, y) {
                a.set(&mut p, y);
            }
            let own;
            let net = if spec.regenerate_network {
                own = build_network(scenario, Some(idx))?;
                &own
            } else {
                &shared
            };
            let mc = run_mc.then(|| run_ensemble(net, &p, &scenario.run));
            let mmca = run_mmca.then(|| mmca_steady(net, &p, &scenario.mmca));
            let beta_c = match y {
                Some(y) => per_y.get(&y.to_bits()).copied(),
                None => threshold.map(|t| t.beta_c),
            };
            log::debug!("{}: beta={beta} y={y:?} done", scenario.name);
            Ok(SweepPoint {
                beta,
                axis2: y,
                mc,
                mmca,
                beta_c,
            })
        })
        .collect();
    let points = evaluated.into_iter().collect::<Result<Vec<_>>>()?;

    Ok(SweepResult {
        scenario: scenario.name.clone(),
        variant,
        axis2,
        network: NetworkInfo::of(&shared),
        threshold,
        points,
    })
}

/// Density curves against `β` on one network realization.
pub fn run_beta_sweep(scenario: &Scenario) -> Result<SweepResult> {
    if scenario.sweep.kind != SweepKind::Beta {
        return Err(Error::Scenario(format!("{} is not a beta sweep", scenario.name)));
    }
    evaluate_sweep(scenario, scenario.params, None)
}

/// Densities over a `β` × second-parameter grid.
pub fn run_heatmap(scenario: &Scenario) -> Result<SweepResult> {
    if scenario.sweep.kind != SweepKind::Heatmap {
        return Err(Error::Scenario(format!("{} is not a heatmap", scenario.name)));
    }
    evaluate_sweep(scenario, scenario.params, None)
}

/// One `β` sweep per information-channel configuration, all on the same
/// network and seeds.
pub fn run_ablation(scenario: &Scenario) -> Result<Vec<SweepResult>> {
    if scenario.sweep.kind != SweepKind::Ablation {
        return Err(Error::Scenario(format!("{} is not an ablation", scenario.name)));
    }
    scenario
        .sweep
        .channels
        .iter()
        .map(|&c| evaluate_sweep(scenario, c.apply(&scenario.params), Some(c)))
        .collect()
}

/// The channel ablation on a loaded topology; fails early with download
/// instructions when the edge list is absent.
pub fn run_powergrid_case(scenario: &Scenario) -> Result<Vec<SweepResult>> {
    match &scenario.network.physical {
        PhysicalSpec::EdgeList { path, .. } => {
            scenario.resolve(path)?;
        }
        PhysicalSpec::WattsStrogatz { .. } => {
            return Err(Error::Scenario(format!(
                "{} does not load a real topology",
                scenario.name
            )))
        }
    }
    run_ablation(scenario)
}

/// Runs whatever kind of sweep `scenario` describes.
pub fn run_scenario(scenario: &Scenario) -> Result<Vec<SweepResult>> {
    match scenario.sweep.kind {
        SweepKind::Beta => run_beta_sweep(scenario).map(|r| vec![r]),
        SweepKind::Heatmap => run_heatmap(scenario).map(|r| vec![r]),
        SweepKind::Ablation => run_ablation(scenario),
    }
}

/// Smallest `β` whose Monte Carlo `ρ^I` exceeds `eps`.
pub fn mc_onset(curve: &[(f64, f64)], eps: f64) -> Option<f64> {
    curve.iter().find(|&&(_, rho)| rho > eps).map(|&(b, _)| b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Mean |ρ^I_MMCA − ρ^I_MC| over the grid.
    pub mad_rho_i: Option<f64>,
    pub mad_rho_a: Option<f64>,
    pub beta_onset_mc: Option<f64>,
    pub beta_c_theory: Option<f64>,
}

/// MMCA against Monte Carlo on one sweep.
pub fn compare_mmca_mc(sweep: &SweepResult, onset_eps: f64) -> Comparison {
    let pairs: Vec<(SteadyDensities, EnsembleResult)> = sweep
        .points
        .iter()
        .filter_map(|p| Some((p.mmca?, p.mc?)))
        .collect();
    let mad = |f: &dyn Fn(&(SteadyDensities, EnsembleResult)) -> f64| {
        (!pairs.is_empty()).then(|| pairs.iter().map(f).sum::<f64>() / pairs.len() as f64)
    };
    Comparison {
        mad_rho_i: mad(&|(m, c)| (m.rho_i - c.rho_i_mean).abs()),
        mad_rho_a: mad(&|(m, c)| (m.rho_a - c.rho_a_mean).abs()),
        beta_onset_mc: mc_onset(&sweep.mc_curve(), onset_eps),
        beta_c_theory: sweep.threshold.map(|t| t.beta_c),
    }
}

/// `%g`-style formatting with `sig` significant digits.
pub fn format_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if exp < -4 || exp >= sig as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim(mantissa), exp.abs())
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

fn g(x: f64) -> String {
    format_sig(x, 6)
}

/// CSV header for `sweep`.
pub fn csv_header(sweep: &SweepResult) -> String {
    let mut cols = vec!["beta"];
    if let Some(a) = sweep.axis2 {
        cols.push(a.name());
    }
    if sweep.has(Solver::Mc) {
        cols.extend(["rho_i_mc", "rho_i_sd", "rho_a_mc", "rho_a_sd"]);
    }
    if sweep.has(Solver::Mmca) {
        cols.extend(["rho_i_mmca", "rho_a_mmca"]);
    }
    cols.join(",")
}

pub fn write_csv(sweep: &SweepResult, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{}", csv_header(sweep))?;
    let (mc, mmca) = (sweep.has(Solver::Mc), sweep.has(Solver::Mmca));
    for p in &sweep.points {
        let mut row = vec![g(p.beta)];
        if let Some(y) = p.axis2 {
            row.push(g(y));
        }
        if let (true, Some(m)) = (mc, p.mc) {
            row.extend([g(m.rho_i_mean), g(m.rho_i_sd), g(m.rho_a_mean), g(m.rho_a_sd)]);
        }
        if let (true, Some(m)) = (mmca, p.mmca) {
            row.extend([g(m.rho_i), g(m.rho_a)]);
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Version string recorded in manifests.
pub fn version_string() -> String {
    format!("{} ({})", env!("CARGO_PKG_VERSION"), env!("MPSPREAD_GIT_DESCRIBE"))
}

/// Everything needed to reproduce a set of output files.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: String,
    pub seed: u64,
    pub scenario: &'a Scenario,
    pub outputs: Vec<OutputSummary>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OutputSummary {
    pub file: String,
    pub variant: Option<Channel>,
    pub network: NetworkInfo,
    pub threshold: Option<ThresholdResult>,
    pub comparison: Comparison,
    pub unsettled_mc_runs: usize,
    pub unconverged_mmca_points: usize,
}

/// Writes one CSV per result plus `<scenario>.manifest.json` into `dir`.
/// Returns the paths written.
pub fn write_outputs(scenario: &Scenario, results: &[SweepResult], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut outputs = Vec::new();
    for r in results {
        let file = format!("{}.csv", r.stem());
        let path = dir.join(&file);
        let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = std::io::BufWriter::new(f);
        write_csv(r, &mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&path, e))?;
        written.push(path);
        outputs.push(OutputSummary {
            file,
            variant: r.variant,
            network: r.network,
            threshold: r.threshold,
            comparison: compare_mmca_mc(r, scenario.sweep.onset_eps),
            unsettled_mc_runs: r.points.iter().filter_map(|p| p.mc).map(|m| m.unsettled_runs).sum(),
            unconverged_mmca_points: r.unconverged_mmca(),
        });
    }
    let manifest = Manifest {
        tool: "mpspread",
        version: version_string(),
        seed: scenario.run.seed,
        scenario,
        outputs,
    };
    let path = dir.join(format!("{}.manifest.json", scenario.name));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

/// Scenario files shipped with the crate.
pub mod presets {
    macro_rules! table {
        ($($name:literal),* $(,)?) => {
            pub const NAMES: &[&str] = &[$($name),*];
            pub fn get(name: &str) -> Option<&'static str> {
                match name {
                    $($name => Some(include_str!(concat!("../scenarios/", $name, ".json"))),)*
                    _ => None,
                }
            }
        };
    }

    table!(
        "fig4",
        "fig5a",
        "fig5b",
        "fig5c",
        "fig6_theta03_alpha10",
        "fig6_theta05_alpha10",
        "fig6_theta07_alpha10",
        "fig6_theta03_alpha15",
        "fig6_theta05_alpha15",
        "fig6_theta07_alpha15",
        "fig7a",
        "fig7c",
        "fig7e",
        "fig8",
        "fig9",
    );

    /// Presets that make up one figure.
    pub fn group(name: &str) -> Option<Vec<&'static str>> {
        let members: Vec<&'static str> = NAMES
            .iter()
            .copied()
            .filter(|n| *n == name || (n.starts_with(name) && !n[name.len()..].starts_with(char::is_numeric)))
            .collect();
        (!members.is_empty()).then_some(members)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(kind: &str, axes: &str) -> Scenario {
        let text = format!(
            r#"{{
              "name": "toy",
              "network": {{
                "physical": {{"kind": "watts_strogatz", "n": 60, "k": 4, "p": 0.3}},
                "cyber": {{"kind": "simplicial_er", "k1": 6, "k2": 1}}
              }},
              "params": {{"lambda": 0.1, "lambda_star": 0.1, "delta": 0.8, "beta_u": 0.5,
                          "gamma": 0, "mu": 0.4, "alpha": 10, "theta": 0.8}},
              "sweep": {{"kind": "{kind}", "axes": [{axes}], "solvers": ["mc", "mmca"], "threshold": true}},
              "run": {{"n_runs": 3, "burn_in": 20, "window": 10, "max_steps": 200}}
            }}"#
        );
        Scenario::from_json(&text, Path::new("toy.json")).unwrap()
    }

    const BETA2: &str = r#"{"name": "beta", "start": 0.2, "stop": 0.8, "steps": 2}"#;

    #[test]
    fn format_matches_printf_g() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.02, "0.02"),
            (0.123456789, "0.123457"),
            (123456.7, "123457"),
            (1234567.0, "1.23457e+06"),
            (0.0001, "0.0001"),
            (0.00001234567, "1.23457e-05"),
            (-2.5, "-2.5"),
            (9.9999996, "10"),
            (0.1 + 0.2, "0.3"),
        ];
        for (x, want) in cases {
            assert_eq!(format_sig(x, 6), want, "{x}");
        }
    }

    #[test]
    fn axis_values_are_clean() {
        let a = Axis { name: SweepParam::BetaU, start: 0.0, stop: 1.0, steps: 51 };
        let v = a.values();
        assert_eq!(v.len(), 51);
        assert_eq!(v[3], 0.06);
        assert_eq!(v[50], 1.0);
        let one = Axis { steps: 1, ..a };
        assert_eq!(one.values(), vec![0.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = toy("beta", BETA2).to_json().replace("\"mu\"", "\"nu\"");
        assert!(matches!(Scenario::from_json(&text, Path::new("x.json")), Err(Error::Json { .. })));
        let text = toy("beta", BETA2).to_json().replace("\"solvers\"", "\"solver\"");
        assert!(Scenario::from_json(&text, Path::new("x.json")).is_err());
    }

    #[test]
    fn validation_checks_axes() {
        let s = toy("heatmap", BETA2);
        assert!(s.validate().is_err());
        let s = toy(
            "heatmap",
            &format!(r#"{BETA2}, {{"name": "mu", "start": 0.1, "stop": 0.2, "steps": 2}}"#),
        );
        assert!(s.validate().is_err());
        let s = toy("beta", r#"{"name": "beta", "start": 0.2, "stop": 1.5, "steps": 3}"#);
        assert!(s.validate().is_err());
        assert!(toy("beta", BETA2).validate().is_ok());
    }

    #[test]
    fn heatmap_grid_is_deterministic() {
        let s = toy(
            "heatmap",
            &format!(r#"{BETA2}, {{"name": "lambda", "start": 0.1, "stop": 0.5, "steps": 2}}"#),
        );
        let a = run_heatmap(&s).unwrap();
        let b = run_heatmap(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 4);
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "beta,lambda,rho_i_mc,rho_i_sd,rho_a_mc,rho_a_sd,rho_i_mmca,rho_a_mmca");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0.2,0.1,"));
        assert!(a.points.iter().all(|p| p.beta_c.is_some()));
    }

    #[test]
    fn zero_beta_sweep_has_no_infection() {
        let s = toy("beta", r#"{"name": "beta", "start": 0, "stop": 0, "steps": 1}"#);
        let r = run_beta_sweep(&s).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.points[0].mc.unwrap().rho_i_mean, 0.0);
        assert!(r.points[0].mmca.unwrap().rho_i < 1e-6);
    }

    #[test]
    fn identical_curves_have_zero_deviation() {
        let s = toy("beta", BETA2);
        let mut r = run_beta_sweep(&s).unwrap();
        for p in &mut r.points {
            let mc = p.mc.unwrap();
            p.mmca = Some(SteadyDensities {
                rho_a: mc.rho_a_mean,
                rho_i: mc.rho_i_mean,
                iterations: 1,
                converged: true,
            });
        }
        let c = compare_mmca_mc(&r, 0.005);
        assert_eq!(c.mad_rho_i, Some(0.0));
        assert_eq!(c.mad_rho_a, Some(0.0));
    }

    #[test]
    fn onset_is_first_point_above_eps() {
        let curve = [(0.0, 0.0), (0.1, 0.004), (0.2, 0.02), (0.3, 0.1)];
        assert_eq!(mc_onset(&curve, 0.005), Some(0.2));
        assert_eq!(mc_onset(&curve[..2], 0.005), None);
    }

    #[test]
    fn ablation_produces_one_curve_per_channel() {
        let mut s = toy("ablation", BETA2);
        s.sweep.solvers = vec![Solver::Mc];
        let r = run_ablation(&s).unwrap();
        assert_eq!(r.len(), 5);
        assert_eq!(r[4].stem(), "toy_none");
        assert!(!r[0].has(Solver::Mmca));
    }

    #[test]
    fn missing_edge_list_explains_download() {
        let mut s = toy("ablation", BETA2);
        s.network.physical = PhysicalSpec::EdgeList {
            path: PathBuf::from("no/such/grid.txt"),
            format: EdgeListFormat::Pairs,
        };
        match run_powergrid_case(&s) {
            Err(Error::MissingFile { hint, .. }) => assert!(hint.contains("power")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn every_preset_parses_and_validates() {
        for name in presets::NAMES {
            let s = Scenario::preset(name).unwrap();
            assert_eq!(&s.name, name);
            s.validate().unwrap();
        }
        assert_eq!(presets::group("fig5").unwrap(), vec!["fig5a", "fig5b", "fig5c"]);
        assert_eq!(presets::group("fig6").unwrap().len(), 6);
        assert_eq!(presets::group("fig4").unwrap(), vec!["fig4"]);
        assert_eq!(presets::group("fig7c").unwrap(), vec!["fig7c"]);
        assert!(presets::group("fig10").is_none());
    }

    #[test]
    fn manifest_and_csv_are_written() {
        let s = toy("beta", BETA2);
        let r = run_scenario(&s).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = write_outputs(&s, &r, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&files[1]).unwrap()).unwrap();
        assert_eq!(manifest["seed"], s.run.seed);
        let back: Scenario = serde_json::from_value(manifest["scenario"].clone()).unwrap();
        assert_eq!(back.params, s.params);
    }
}

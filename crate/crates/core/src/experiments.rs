//! Reproducible experiment runners behind the `vcem` command line.
//!
//! Each runner writes its data files plus `manifest.json` (seeds, resolved
//! configuration, sampled errors and channels, tool version) and
//! `config.txt`, which can be fed back through `--config` to replay the run.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::analytic::{GhzScenario, GhzVariant};
use crate::circuit::{build_graph_circuit, sample_coherent_errors, sample_coherent_errors_by_key, transpile, ParamCircuit};
use crate::cost::{delta_cost, GradientMethod, NoisyCost, Objective, PureCost};
use crate::error::{Result, VcemError};
use crate::fit::{fit_linear, fit_loglog, FitResult, MIN_FIT_POINTS};
use crate::graph::Graph;
use crate::noise::{GenericChannel, LayoutDocument, NoiseLayout, NoiseSpec};
use crate::optimizer::{minimize, OptimizationTrace, OptimizerSettings};
use crate::pauli::{graph_stabilizers, StabilizerSet};
use crate::sim::MAX_NOISY_QUBITS;
use crate::twirl;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Largest register in the default delta-scaling `n` sweep; larger registers
/// need `allow_large = true`.
pub const DEFAULT_MAX_SWEEP_QUBITS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Optimize,
    DeltaScaling,
    GhzLandscape,
    TwirlDemo,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Optimize => "optimize",
            Experiment::DeltaScaling => "delta-scaling",
            Experiment::GhzLandscape => "ghz-landscape",
            Experiment::TwirlDemo => "twirl-demo",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = VcemError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "optimize" => Ok(Experiment::Optimize),
            "delta-scaling" => Ok(Experiment::DeltaScaling),
            "ghz-landscape" => Ok(Experiment::GhzLandscape),
            "twirl-demo" => Ok(Experiment::TwirlDemo),
            other => Err(VcemError::Config(format!("unknown experiment {other:?}"))),
        }
    }
}

/// Fully defaulted settings for one run. Fields that an experiment does not
/// use are still present and recorded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub graph: String,
    pub noise: String,
    pub coh_mag: f64,
    pub seed_coh: u64,
    pub seed_inc: u64,
    pub optimizer: OptimizerSettings,
    pub gradient: GradientMethod,
    pub out: PathBuf,
    /// Coherent-error scales of the delta-scaling sweep over `ε`.
    pub eps_values: Vec<f64>,
    /// Register sizes of the delta-scaling sweep over `n`; empty skips it.
    pub n_values: Vec<usize>,
    /// Coherent-error scale used for every point of the `n` sweep.
    pub n_sweep_eps: f64,
    /// Coherent-error directions averaged per sweep point.
    pub draws: usize,
    /// Also evaluate each direction at `-ε` and average, cancelling odd orders.
    pub antithetic: bool,
    pub allow_large: bool,
    /// `all` or one variant name.
    pub variant: String,
    pub ghz_epsilon: f64,
    pub ghz_points: usize,
    pub gamma: f64,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let graph = match experiment {
            Experiment::DeltaScaling => "line:10",
            _ => "grid:2x5",
        };
        let noise = match experiment {
            Experiment::DeltaScaling => "pauli:m=2,mag=0.01",
            _ => "none",
        };
        ExperimentConfig {
            experiment,
            graph: graph.into(),
            noise: noise.into(),
            coh_mag: 0.01,
            seed_coh: 1,
            seed_inc: 2,
            optimizer: OptimizerSettings::default(),
            gradient: GradientMethod::Adjoint,
            out: PathBuf::from(format!("out/{}", experiment.name())),
            eps_values: log_spaced(1e-3, 1e-1, 8),
            n_values: (4..=DEFAULT_MAX_SWEEP_QUBITS).collect(),
            n_sweep_eps: 0.01,
            draws: 8,
            antithetic: true,
            allow_large: false,
            variant: "all".into(),
            ghz_epsilon: 0.5,
            ghz_points: 101,
            gamma: 0.1,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| VcemError::Config(format!("{key} = {value:?}: {what}"));
        fn num<T: FromStr>(v: &str) -> Option<T> {
            v.parse().ok()
        }
        match key.trim() {
            "experiment" => {
                let e: Experiment = value.parse()?;
                if e != self.experiment {
                    return Err(bad(&format!("config is for {e}, running {}", self.experiment)));
                }
            }
            "graph" => self.graph = value.into(),
            "noise" => self.noise = value.into(),
            "coh_mag" => self.coh_mag = num(value).ok_or_else(|| bad("expected a number"))?,
            "seed_coh" => self.seed_coh = num(value).ok_or_else(|| bad("expected an unsigned integer"))?,
            "seed_inc" => self.seed_inc = num(value).ok_or_else(|| bad("expected an unsigned integer"))?,
            "out" => self.out = PathBuf::from(value),
            "max_iters" => self.optimizer.max_iters = num(value).ok_or_else(|| bad("expected an unsigned integer"))?,
            "learning_rate" => self.optimizer.learning_rate = num(value).ok_or_else(|| bad("expected a number"))?,
            "grad_tolerance" => self.optimizer.grad_tolerance = num(value).ok_or_else(|| bad("expected a number"))?,
            "adaptive" => self.optimizer.adaptive = parse_bool(value).ok_or_else(|| bad("expected true or false"))?,
            "gradient" => {
                self.gradient = match value {
                    "adjoint" => GradientMethod::Adjoint,
                    "parameter_shift" => GradientMethod::ParameterShift,
                    _ => return Err(bad("expected adjoint or parameter_shift")),
                }
            }
            "eps_values" => self.eps_values = parse_f64_list(value).ok_or_else(|| bad("expected numbers"))?,
            "n_values" => self.n_values = parse_usize_list(value).ok_or_else(|| bad("expected integers or a range a-b"))?,
            "n_sweep_eps" => self.n_sweep_eps = num(value).ok_or_else(|| bad("expected a number"))?,
            "draws" => self.draws = num(value).ok_or_else(|| bad("expected an unsigned integer"))?,
            "antithetic" => self.antithetic = parse_bool(value).ok_or_else(|| bad("expected true or false"))?,
            "allow_large" => self.allow_large = parse_bool(value).ok_or_else(|| bad("expected true or false"))?,
            "variant" => self.variant = value.into(),
            "ghz_epsilon" => self.ghz_epsilon = num(value).ok_or_else(|| bad("expected a number"))?,
            "ghz_points" => self.ghz_points = num(value).ok_or_else(|| bad("expected an unsigned integer"))?,
            "gamma" => self.gamma = num(value).ok_or_else(|| bad("expected a number"))?,
            other => return Err(VcemError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| VcemError::Config(format!("line {}: expected key = value", i + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| VcemError::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Every setting in `key = value` form, accepted back by [`Self::apply_text`].
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let join = |v: &[String]| v.join(",");
        let gradient = match self.gradient {
            GradientMethod::Adjoint => "adjoint",
            GradientMethod::ParameterShift => "parameter_shift",
        };
        vec![
            ("experiment", self.experiment.to_string()),
            ("graph", self.graph.clone()),
            ("noise", self.noise.clone()),
            ("coh_mag", format!("{:?}", self.coh_mag)),
            ("seed_coh", self.seed_coh.to_string()),
            ("seed_inc", self.seed_inc.to_string()),
            ("out", self.out.display().to_string()),
            ("max_iters", self.optimizer.max_iters.to_string()),
            ("learning_rate", format!("{:?}", self.optimizer.learning_rate)),
            ("grad_tolerance", format!("{:?}", self.optimizer.grad_tolerance)),
            ("adaptive", self.optimizer.adaptive.to_string()),
            ("gradient", gradient.into()),
            ("eps_values", join(&self.eps_values.iter().map(|e| format!("{e:?}")).collect::<Vec<_>>())),
            ("n_values", join(&self.n_values.iter().map(|n| n.to_string()).collect::<Vec<_>>())),
            ("n_sweep_eps", format!("{:?}", self.n_sweep_eps)),
            ("draws", self.draws.to_string()),
            ("antithetic", self.antithetic.to_string()),
            ("allow_large", self.allow_large.to_string()),
            ("variant", self.variant.clone()),
            ("ghz_epsilon", format!("{:?}", self.ghz_epsilon)),
            ("ghz_points", self.ghz_points.to_string()),
            ("gamma", format!("{:?}", self.gamma)),
        ]
    }

    pub fn to_text(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Checks the settings shared by all experiments.
    pub fn validate(&self) -> Result<()> {
        if !(self.coh_mag.is_finite() && self.coh_mag >= 0.0) {
            return Err(VcemError::Config(format!("coh_mag {} must be finite and >= 0", self.coh_mag)));
        }
        self.noise_spec()?;
        self.optimizer.validate()
    }

    pub fn noise_spec(&self) -> Result<String> {
        for part in self.noise.split(';') {
            part.parse::<NoiseSpec>()?;
        }
        Ok(self.noise.clone())
    }

    fn graph(&self) -> Result<Graph> {
        Graph::from_spec(&self.graph).map_err(|e| VcemError::Config(format!("graph {:?}: {e}", self.graph)))
    }
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_f64_list(v: &str) -> Option<Vec<f64>> {
    v.split(',').map(|x| x.trim().parse().ok()).collect()
}

fn parse_usize_list(v: &str) -> Option<Vec<usize>> {
    if let Some((a, b)) = v.split_once('-') {
        let (a, b): (usize, usize) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
        return (a <= b).then(|| (a..=b).collect());
    }
    v.split(',').map(|x| x.trim().parse().ok()).collect()
}

/// `k` points from `lo` to `hi` inclusive, evenly spaced in `ln`.
pub fn log_spaced(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..k)
            .map(|i| match i {
                0 => lo,
                i if i == k - 1 => hi,
                i => (lo.ln() + (hi.ln() - lo.ln()) * i as f64 / (k - 1) as f64).exp(),
            })
            .collect(),
    }
}

/// Maps an error to the process exit code: 2 for configuration problems, 3
/// for resource ceilings, 1 otherwise.
pub fn exit_code(e: &VcemError) -> i32 {
    match e {
        VcemError::Config(_) | VcemError::Parse(_) | VcemError::InvalidGraph(_) => 2,
        VcemError::ResourceLimit(_) => 3,
        _ => 1,
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: Experiment,
    pub seeds: BTreeMap<&'static str, u64>,
    pub config: BTreeMap<&'static str, String>,
    /// Sampled coherent errors by parameter key.
    pub coherent_errors: BTreeMap<String, f64>,
    /// Sampled channel layouts by label.
    pub noise_layouts: BTreeMap<String, LayoutDocument>,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
}

impl Manifest {
    fn new(config: &ExperimentConfig) -> Self {
        Manifest {
            tool: "vcem",
            version: VERSION,
            experiment: config.experiment,
            seeds: BTreeMap::from([("coherent", config.seed_coh), ("incoherent", config.seed_inc)]),
            config: config.to_pairs().into_iter().collect(),
            coherent_errors: BTreeMap::new(),
            noise_layouts: BTreeMap::new(),
            outputs: Vec::new(),
            results: serde_json::Value::Null,
        }
    }

    fn record_errors(&mut self, c: &ParamCircuit) {
        for (k, e) in c.param_keys().iter().zip(c.epsilons()) {
            self.coherent_errors.insert(k.to_string(), *e);
        }
    }

    fn finish(mut self, config: &ExperimentConfig) -> Result<()> {
        write_text(&config.out, "config.txt", &config.to_text())?;
        self.outputs.push("config.txt".into());
        self.outputs.push("manifest.json".into());
        let text = serde_json::to_string_pretty(&self)?;
        write_text(&config.out, "manifest.json", &text)
    }
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), text)?;
    Ok(())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn graph_circuit(g: &Graph) -> Result<(ParamCircuit, StabilizerSet)> {
    Ok((transpile(&build_graph_circuit(g)?)?, graph_stabilizers(g)?))
}

#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub circuit: ParamCircuit,
    pub layout: NoiseLayout,
    pub trace: OptimizationTrace,
    /// `max_k |θ_k + ε_k|` at the final parameters.
    pub max_residual: f64,
}

/// Builds the graph-state circuit, samples coherent errors (and a noise
/// layout), then minimizes the ideal or noisy cost from `θ = 0`.
///
/// Writes `trace.csv`, `manifest.json` and `config.txt` to `config.out`.
pub fn run_optimize(config: &ExperimentConfig) -> Result<OptimizeOutcome> {
    config.validate()?;
    let g = config.graph()?;
    let (c, stabs) = graph_circuit(&g)?;
    let eps = sample_coherent_errors(&c, config.coh_mag, config.seed_coh)?;
    let c = c.with_epsilons(eps)?.with_seed(Some(config.seed_coh));
    let layout = NoiseLayout::from_spec(&config.noise, &c, config.seed_inc)?;
    let objective: Box<dyn Objective> = if layout.is_noiseless() {
        Box::new(PureCost::with_method(c.clone(), stabs, config.gradient)?)
    } else {
        Box::new(NoisyCost::new(c.clone(), layout.clone(), stabs, config.gradient)?)
    };
    let trace = minimize(objective.as_ref(), &c, &config.optimizer)?;
    let max_residual = trace
        .final_theta
        .iter()
        .zip(c.epsilons())
        .map(|(t, e)| (t + e).abs())
        .fold(0.0, f64::max);

    let mut manifest = Manifest::new(config);
    manifest.record_errors(&c);
    manifest.noise_layouts.insert("circuit".into(), layout.to_document());
    trace.write_csv(create(&config.out, "trace.csv")?)?;
    manifest.outputs.push("trace.csv".into());
    let last = trace.epsilon_metrics_history.last().copied().unwrap_or_default();
    manifest.results = json!({
        "num_qubits": c.num_qubits(),
        "num_moments": c.num_moments(),
        "num_params": c.num_params(),
        "iterations": trace.num_iterations(),
        "converged": trace.converged,
        "final_cost": trace.final_cost(),
        "final_grad_norm": trace.final_grad_norm(),
        "max_abs_theta_plus_eps": max_residual,
        "eps_metrics": last,
        "final_theta": trace.final_theta,
    });
    manifest.finish(config)?;
    Ok(OptimizeOutcome {
        circuit: c,
        layout,
        trace,
        max_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaPoint {
    pub num_qubits: usize,
    pub epsilon: f64,
    /// Mean `ΔC̃(0)` over the sampled directions.
    pub delta: f64,
    /// Per-direction values, `(+ε, -ε)` pairs when antithetic.
    pub samples: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeltaScalingOutcome {
    pub eps_points: Vec<DeltaPoint>,
    pub eps_fit: FitResult,
    pub n_points: Vec<DeltaPoint>,
    pub n_fit: Option<FitResult>,
}

fn line_size(g: &Graph) -> Result<usize> {
    let n = g.num_nodes();
    if *g != Graph::line(n)? {
        return Err(VcemError::Config("delta-scaling needs a line graph".into()));
    }
    Ok(n)
}

/// `ΔC̃(0)` on `line:n` with coherent errors `ε·u` along the sampled unit
/// directions `u`, all under the same keyed noise layout.
pub fn delta_at_zero(config: &ExperimentConfig, n: usize, epsilon: f64) -> Result<DeltaPoint> {
    let g = Graph::line(n)?;
    let (c, stabs) = graph_circuit(&g)?;
    let layout = NoiseLayout::from_spec(&config.noise, &c, config.seed_inc)?;
    let theta = vec![0.0; c.num_params()];
    let signs: &[f64] = if config.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let mut samples = Vec::new();
    for d in 0..config.draws as u64 {
        let dir = sample_coherent_errors_by_key(&c, 1.0, config.seed_coh.wrapping_add(d))?;
        for s in signs {
            let scaled = c.clone().with_epsilons(dir.iter().map(|u| s * epsilon * u).collect())?;
            samples.push(delta_cost(&scaled, &theta, &layout, &stabs)?);
        }
    }
    Ok(DeltaPoint {
        num_qubits: n,
        epsilon,
        delta: samples.iter().sum::<f64>() / samples.len() as f64,
        samples,
    })
}

/// Sweeps `ΔC̃(0)` over `eps_values` on the configured line and over
/// `n_values` at `n_sweep_eps`, with log-log and linear fits.
///
/// Writes `delta_eps.csv`, `delta_n.csv`, `fits.json` and the manifest.
pub fn run_delta_scaling(config: &ExperimentConfig) -> Result<DeltaScalingOutcome> {
    config.validate()?;
    let n_line = line_size(&config.graph()?)?;
    if config.draws == 0 {
        return Err(VcemError::Config("draws must be at least 1".into()));
    }
    if config.eps_values.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
        return Err(VcemError::Config("eps_values must be finite and >= 0".into()));
    }
    let usable = config.eps_values.iter().filter(|e| **e > 0.0).count();
    if usable < MIN_FIT_POINTS {
        return Err(VcemError::Config(format!(
            "the eps sweep has {usable} positive points, a fit needs {MIN_FIT_POINTS}"
        )));
    }
    if !config.n_values.is_empty() && config.n_values.len() < MIN_FIT_POINTS {
        return Err(VcemError::Config(format!(
            "the n sweep has {} points, a fit needs {MIN_FIT_POINTS}",
            config.n_values.len()
        )));
    }
    let ceiling = if config.allow_large { MAX_NOISY_QUBITS } else { DEFAULT_MAX_SWEEP_QUBITS };
    let largest = config.n_values.iter().copied().chain([n_line]).max().unwrap_or(0);
    if largest > ceiling {
        return Err(VcemError::ResourceLimit(format!(
            "{largest} qubits exceeds the sweep ceiling of {ceiling}{}",
            if config.allow_large { "" } else { " (set allow_large for up to 12)" }
        )));
    }
    if config.n_values.iter().any(|&n| n < 2) {
        return Err(VcemError::Config("n_values must be at least 2".into()));
    }

    let eps_points = config
        .eps_values
        .par_iter()
        .map(|&e| delta_at_zero(config, n_line, e))
        .collect::<Result<Vec<_>>>()?;
    let n_points = config
        .n_values
        .par_iter()
        .map(|&n| delta_at_zero(config, n, config.n_sweep_eps))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = eps_points.iter().map(|p| p.epsilon).collect();
    let ys: Vec<f64> = eps_points.iter().map(|p| p.delta).collect();
    let eps_fit = fit_loglog(&xs, &ys)?;
    let n_fit = if n_points.is_empty() {
        None
    } else {
        let xs: Vec<f64> = n_points.iter().map(|p| p.num_qubits as f64).collect();
        let ys: Vec<f64> = n_points.iter().map(|p| p.delta.abs()).collect();
        Some(fit_linear(&xs, &ys)?)
    };

    let mut manifest = Manifest::new(config);
    for n in config.n_values.iter().copied().chain([n_line]).collect::<std::collections::BTreeSet<_>>() {
        let (c, _) = graph_circuit(&Graph::line(n)?)?;
        let layout = NoiseLayout::from_spec(&config.noise, &c, config.seed_inc)?;
        manifest.noise_layouts.insert(format!("line:{n}"), layout.to_document());
        if n == n_line {
            for d in 0..config.draws as u64 {
                let dir = sample_coherent_errors_by_key(&c, 1.0, config.seed_coh.wrapping_add(d))?;
                for (k, u) in c.param_keys().iter().zip(dir) {
                    manifest.coherent_errors.insert(format!("direction{d}:{k}"), u);
                }
            }
        }
    }
    write_points(create(&config.out, "delta_eps.csv")?, &eps_points)?;
    write_points(create(&config.out, "delta_n.csv")?, &n_points)?;
    let fits = json!({ "eps_loglog": eps_fit, "n_linear": n_fit });
    write_text(&config.out, "fits.json", &serde_json::to_string_pretty(&fits)?)?;
    manifest.outputs.extend(["delta_eps.csv".into(), "delta_n.csv".into(), "fits.json".into()]);
    manifest.results = fits;
    manifest.finish(config)?;
    Ok(DeltaScalingOutcome {
        eps_points,
        eps_fit,
        n_points,
        n_fit,
    })
}

fn write_points<W: Write>(mut w: W, points: &[DeltaPoint]) -> Result<()> {
    writeln!(w, "n,epsilon,delta,abs_delta,min_sample,max_sample")?;
    for p in points {
        let lo = p.samples.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = p.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        writeln!(w, "{},{:e},{:e},{:e},{:e},{:e}", p.num_qubits, p.epsilon, p.delta, p.delta.abs(), lo, hi)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LandscapeRow {
    pub theta: f64,
    pub analytic: f64,
    pub simulated: f64,
    pub abs_diff: f64,
    /// Remainder term, present for the per-moment Pauli variant only.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LandscapeSummary {
    pub variant: String,
    pub max_abs_diff: f64,
    pub max_abs_delta: Option<f64>,
    pub argmin_theta: f64,
    pub rows: Vec<LandscapeRow>,
}

fn select_variants(name: &str) -> Result<Vec<GhzVariant>> {
    let all = GhzVariant::reference_variants();
    if name == "all" {
        return Ok(all.to_vec());
    }
    all.iter()
        .find(|v| v.name() == name)
        .map(|v| vec![*v])
        .ok_or_else(|| VcemError::Config(format!("unknown GHZ variant {name:?}")))
}

/// `θ` grid of `points` values spanning `[-π, π]`.
pub fn theta_grid(points: usize) -> Vec<f64> {
    use std::f64::consts::PI;
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|k| -PI + 2.0 * PI * k as f64 / (points - 1) as f64).collect(),
    }
}

pub fn ghz_landscape(variant: GhzVariant, epsilon: f64, thetas: &[f64]) -> Result<LandscapeSummary> {
    let rows = thetas
        .par_iter()
        .map(|&theta| {
            let s = GhzScenario::new(theta, epsilon, variant);
            let (analytic, simulated) = (s.analytic_cost()?, s.simulated_cost()?);
            let delta = match variant {
                GhzVariant::PerMomentPauli(_) => Some(s.remainder()?),
                _ => None,
            };
            Ok(LandscapeRow {
                theta,
                analytic,
                simulated,
                abs_diff: (analytic - simulated).abs(),
                delta,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_abs_diff = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let max_abs_delta = rows.iter().filter_map(|r| r.delta).map(f64::abs).reduce(f64::max);
    let argmin_theta = rows
        .iter()
        .min_by(|a, b| a.simulated.total_cmp(&b.simulated))
        .map_or(f64::NAN, |r| r.theta);
    Ok(LandscapeSummary {
        variant: variant.name().into(),
        max_abs_diff,
        max_abs_delta,
        argmin_theta,
        rows,
    })
}

/// Writes `ghz_<variant>.csv` for each selected variant plus the manifest.
pub fn run_ghz_landscape(config: &ExperimentConfig) -> Result<Vec<LandscapeSummary>> {
    config.validate()?;
    let variants = select_variants(&config.variant)?;
    if config.ghz_points < 2 {
        return Err(VcemError::Config("ghz_points must be at least 2".into()));
    }
    if !config.ghz_epsilon.is_finite() {
        return Err(VcemError::Config("ghz_epsilon must be finite".into()));
    }
    let thetas = theta_grid(config.ghz_points);
    let mut manifest = Manifest::new(config);
    let mut summaries = Vec::new();
    for v in variants {
        let s = ghz_landscape(v, config.ghz_epsilon, &thetas)?;
        let name = format!("ghz_{}.csv", s.variant);
        let mut w = create(&config.out, &name)?;
        let with_delta = s.max_abs_delta.is_some();
        writeln!(w, "theta,analytic,simulated,abs_diff{}", if with_delta { ",delta" } else { "" })?;
        for r in &s.rows {
            write!(w, "{:e},{:e},{:e},{:e}", r.theta, r.analytic, r.simulated, r.abs_diff)?;
            match r.delta {
                Some(d) => writeln!(w, ",{d:e}")?,
                None => writeln!(w)?,
            }
        }
        w.flush()?;
        manifest.outputs.push(name);
        summaries.push(s);
    }
    manifest.results = json!({
        "epsilon": config.ghz_epsilon,
        "variants": summaries.iter().map(|s| json!({
            "variant": s.variant,
            "scenario": GhzVariant::reference_variants().iter().find(|v| v.name() == s.variant),
            "max_abs_diff": s.max_abs_diff,
            "max_abs_delta": s.max_abs_delta,
            "argmin_theta": s.argmin_theta,
        })).collect::<Vec<_>>(),
    });
    manifest.finish(config)?;
    Ok(summaries)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TwirlReport {
    pub gamma: f64,
    /// Pauli-twirled probabilities by label.
    pub pauli_terms: BTreeMap<String, f64>,
    /// Largest off-diagonal transfer-matrix entry of the input channel.
    pub residual_before: f64,
    /// Same for the dense Pauli-group average.
    pub residual_after: f64,
    /// Largest gap between the twirled channel and the dense group average.
    pub twirl_vs_group_average: f64,
    pub clifford_p: f64,
    pub clifford_group_average_p: f64,
    pub clifford_abs_diff: f64,
}

pub fn twirl_report(gamma: f64) -> Result<TwirlReport> {
    let g = GenericChannel::amplitude_damping(gamma).map_err(|e| VcemError::Config(format!("gamma {gamma}: {e}")))?;
    let before = twirl::pauli_transfer_matrix(1, |rho| g.apply_dense(rho))?;
    let twirled = twirl::pauli_twirl(&g)?;
    let average = twirl::pauli_group_average(&g)?;
    let twirled_ptm = twirl::pauli_transfer_matrix(1, |rho| crate::noise::Channel::Pauli(twirled.clone()).apply_dense(rho))?;
    let gap = (&twirled_ptm - &average).abs().max();
    let clifford = twirl::clifford_twirl(&g)?;
    let group_p = twirl::depolarizing_probability_from_ptm(&twirl::clifford_group_average(&g)?);
    Ok(TwirlReport {
        gamma,
        pauli_terms: twirled.full_terms().into_iter().map(|(p, s)| (s.to_string(), p)).collect(),
        residual_before: twirl::off_diagonal_residual(&before),
        residual_after: twirl::off_diagonal_residual(&average),
        twirl_vs_group_average: gap,
        clifford_p: clifford.p(),
        clifford_group_average_p: group_p,
        clifford_abs_diff: (clifford.p() - group_p).abs(),
    })
}

/// Twirls an amplitude-damping channel and writes `twirl.json` plus the manifest.
pub fn run_twirl_demo(config: &ExperimentConfig) -> Result<TwirlReport> {
    let report = twirl_report(config.gamma)?;
    write_text(&config.out, "twirl.json", &serde_json::to_string_pretty(&report)?)?;
    let mut manifest = Manifest::new(config);
    manifest.outputs.push("twirl.json".into());
    manifest.results = serde_json::to_value(&report)?;
    manifest.finish(config)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip() {
        let mut c = ExperimentConfig::defaults(Experiment::DeltaScaling);
        c.apply_text("# sweep\ngraph = line:6\nn_values = 4-6\neps_values = 0.001, 0.01\n\ndraws=3 # fewer\n")
            .unwrap();
        assert_eq!(c.graph, "line:6");
        assert_eq!(c.n_values, vec![4, 5, 6]);
        assert_eq!(c.eps_values, vec![0.001, 0.01]);
        assert_eq!(c.draws, 3);
        let mut d = ExperimentConfig::defaults(Experiment::DeltaScaling);
        d.apply_text(&c.to_text()).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn config_errors() {
        let mut c = ExperimentConfig::defaults(Experiment::Optimize);
        for bad in ["nope = 1", "coh_mag = x", "adaptive = maybe", "graph", "experiment = twirl-demo"] {
            let e = c.apply_text(bad).unwrap_err();
            assert_eq!(exit_code(&e), 2, "{bad}");
        }
        c.noise = "pauli:m=3,mag=0.1".into();
        assert_eq!(exit_code(&c.validate().unwrap_err()), 2);
    }

    #[test]
    fn spacing() {
        let v = log_spaced(1e-3, 1e-1, 8);
        assert_eq!(v.len(), 8);
        assert_eq!((v[0], v[7]), (1e-3, 1e-1));
        for w in v.windows(2) {
            assert!((w[1] / w[0] - 100f64.powf(1.0 / 7.0)).abs() < 1e-12);
        }
        let t = theta_grid(101);
        assert!((t[50]).abs() < 1e-15 && (t[100] - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&VcemError::ResourceLimit("x".into())), 3);
        assert_eq!(exit_code(&VcemError::NonFinite("x".into())), 1);
    }
}

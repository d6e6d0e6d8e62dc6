//! Experiment driver: builds scenarios, runs the design methods, sweeps a
//! parameter and writes deterministic CSV tables.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::Deserialize;

use crate::covdesign::{solve_selfish, solve_weighted_eip, DesignSolution};
use crate::error::{Error, Result};
use crate::interference::{noise_covariances, scheme_eip, tip, weight_schedule, WeightMethod};
use crate::mc::{radar_pipeline, CompletionParams};
use crate::rng::indexed_stream;
use crate::samplingopt::{joint_design_restarts, JointOptions, JointProblem};
use crate::scenario::{
    generate_sampling_mask_with, MaskCoverage, SamplingMask, Scenario, ScenarioConfig, ScenarioFile, Scheme, Target,
};

pub const CSV_HEADER: &str = "method,sweep_var,sweep_value,seed,eip,tip,capacity,power,mc_mean_err,mc_std_err,wall_ms";

/// Design methods, in the order rows are sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    /// Minimum power meeting the capacity target.
    Selfish,
    /// Minimize total interference power.
    Noncoop,
    /// Minimize Scheme-I effective interference.
    Coop,
    /// Minimize interference at the full matched-filter bank output.
    Partial,
    /// Minimize Scheme-II effective interference.
    Full,
    /// Alternate covariance design and mask permutation.
    Joint,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Selfish,
        Method::Noncoop,
        Method::Coop,
        Method::Partial,
        Method::Full,
        Method::Joint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Selfish => "selfish",
            Method::Noncoop => "noncoop",
            Method::Coop => "coop",
            Method::Partial => "partial",
            Method::Full => "full",
            Method::Joint => "joint",
        }
    }

    pub fn valid_for(self, scheme: Scheme) -> bool {
        match self {
            Method::Coop => scheme == Scheme::SchemeI,
            Method::Partial | Method::Full => scheme == Scheme::SchemeII,
            _ => true,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    P,
    C,
    Targets,
    Rho2,
    Sigma1_2,
    None,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::P => "p",
            SweepVar::C => "C",
            SweepVar::Targets => "targets",
            SweepVar::Rho2 => "rho2",
            SweepVar::Sigma1_2 => "sigma1_2",
            SweepVar::None => "none",
        }
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "p" => Ok(SweepVar::P),
            "C" => Ok(SweepVar::C),
            "targets" => Ok(SweepVar::Targets),
            "rho2" => Ok(SweepVar::Rho2),
            "sigma1_2" => Ok(SweepVar::Sigma1_2),
            "none" => Ok(SweepVar::None),
            other => Err(Error::Config(format!("unknown sweep variable '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

impl Sweep {
    pub fn none() -> Self {
        Self {
            var: SweepVar::None,
            values: Vec::new(),
        }
    }

    /// Grid points actually run; a `none` sweep runs the base scenario once.
    fn points(&self) -> Vec<Option<f64>> {
        match self.var {
            SweepVar::None => vec![None],
            _ => self.values.iter().map(|&v| Some(v)).collect(),
        }
    }
}

impl FromStr for Sweep {
    type Err = Error;

    /// `var=start:stop:step`, or `none`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "none" {
            return Ok(Sweep::none());
        }
        let (var, range) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("sweep '{s}' is not var=start:stop:step")))?;
        let var: SweepVar = var.parse()?;
        let parts: Vec<f64> = range
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number '{p}' in sweep"))))
            .collect::<Result<_>>()?;
        let (start, stop, step) = match parts.as_slice() {
            [a] => (*a, *a, 1.0),
            [a, b, c] => (*a, *b, *c),
            _ => return Err(Error::Config(format!("sweep range '{range}' needs start:stop:step"))),
        };
        if !(step > 0.0) || stop < start || !start.is_finite() || !stop.is_finite() {
            return Err(Error::Config(format!("empty or invalid sweep range '{range}'")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // round away accumulated binary noise so values print cleanly
        let values = (0..count)
            .map(|k| {
                let v = start + k as f64 * step;
                (v * 1e12).round() / 1e12
            })
            .collect();
        Ok(Sweep { var, values })
    }
}

/// Everything one experiment needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub scenario: ScenarioConfig,
    pub methods: Vec<Method>,
    pub sweep: Sweep,
    pub seeds: Vec<u64>,
    /// Monte-Carlo recovery trials per row; 0 skips recovery (the error
    /// columns are then `NaN`).
    pub mc_trials: usize,
    pub mask_coverage: MaskCoverage,
    /// Initial masks tried by the joint design.
    pub restarts: usize,
    pub completion: CompletionParams,
    pub joint: JointOptions,
    /// Record wall-clock time; otherwise `wall_ms` is 0 so output is
    /// reproducible byte for byte.
    pub timing: bool,
}

impl ExperimentSpec {
    pub fn new(scenario: ScenarioConfig) -> Self {
        let methods = Method::ALL.into_iter().filter(|m| m.valid_for(scenario.scheme)).collect();
        Self {
            seeds: vec![scenario.seed],
            scenario,
            methods,
            sweep: Sweep::none(),
            mc_trials: 0,
            mask_coverage: MaskCoverage::Full,
            restarts: 1,
            completion: CompletionParams::default(),
            joint: JointOptions::default(),
            timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.methods.is_empty() {
            return Err(Error::Config("no methods selected".into()));
        }
        for m in &self.methods {
            if !m.valid_for(self.scenario.scheme) {
                return Err(Error::Config(format!("method '{m}' does not apply to {}", self.scenario.scheme)));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if self.sweep.var != SweepVar::None && self.sweep.values.is_empty() {
            return Err(Error::Config("sweep grid is empty".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be >= 1".into()));
        }
        self.completion.validate()
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        let scenario = file.scenario.resolve();
        let mut spec = ExperimentSpec::new(scenario);
        if let Some(m) = file.methods {
            spec.methods = m.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        if let Some(s) = file.sweep {
            spec.sweep = s.parse()?;
        }
        if let Some(s) = file.seeds {
            spec.seeds = s;
        }
        if let Some(n) = file.mc_trials {
            spec.mc_trials = n;
        }
        if let Some(c) = file.mask_coverage {
            spec.mask_coverage = match c.as_str() {
                "full" => MaskCoverage::Full,
                "relaxed" => MaskCoverage::Relaxed,
                "none" => MaskCoverage::None,
                other => return Err(Error::Config(format!("unknown mask_coverage '{other}'"))),
            };
        }
        if let Some(r) = file.restarts {
            spec.restarts = r;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            msg: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Deserialize)]
struct SpecFile {
    #[serde(flatten)]
    scenario: ScenarioFile,
    methods: Option<Vec<String>>,
    sweep: Option<String>,
    seeds: Option<Vec<u64>>,
    mc_trials: Option<usize>,
    mask_coverage: Option<String>,
    restarts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub seed: u64,
    pub eip: f64,
    pub tip: f64,
    pub capacity: f64,
    pub power: f64,
    pub mc_mean_err: f64,
    pub mc_std_err: f64,
    pub wall_ms: f64,
    /// Set when the row could not be computed; numeric fields are `NaN`.
    pub error: Option<String>,
}

impl ResultRow {
    fn failed(method: Method, var: SweepVar, value: f64, seed: u64, err: &Error) -> Self {
        Self {
            method,
            sweep_var: var,
            sweep_value: value,
            seed,
            eip: f64::NAN,
            tip: f64::NAN,
            capacity: f64::NAN,
            power: f64::NAN,
            mc_mean_err: f64::NAN,
            mc_std_err: f64::NAN,
            wall_ms: 0.0,
            error: Some(err.to_string()),
        }
    }
}

/// `k` targets spread across the field of view; reflection coefficients
/// share the default total power.
pub fn spread_targets(k: usize) -> Vec<Target> {
    let base = ScenarioConfig::default().targets[0];
    let scale = 1.0 / (k.max(1) as f64).sqrt();
    (0..k)
        .map(|i| Target {
            angle_deg: if k == 1 { base.angle_deg } else { -60.0 + 120.0 * i as f64 / (k - 1) as f64 },
            beta_re: base.beta_re * scale,
            beta_im: base.beta_im * scale,
        })
        .collect()
}

/// Scenario for one grid point and seed.
pub fn configure(base: &ScenarioConfig, var: SweepVar, value: Option<f64>, seed: u64) -> Result<ScenarioConfig> {
    let mut cfg = base.clone();
    cfg.seed = seed;
    if let Some(v) = value {
        match var {
            SweepVar::P => cfg.p = v,
            SweepVar::C => cfg.c = v,
            SweepVar::Rho2 => cfg.rho2 = v,
            SweepVar::Sigma1_2 => cfg.sigma1_2 = v,
            SweepVar::Targets => {
                if v < 1.0 || v.fract() != 0.0 {
                    return Err(Error::Config(format!("target count {v} is not a positive integer")));
                }
                cfg.targets = spread_targets(v as usize);
            }
            SweepVar::None => {}
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Outcome of one design method on one scenario.
#[derive(Debug, Clone)]
pub struct MethodOutcome {
    pub solution: DesignSolution<f64>,
    /// Mask the radar uses with this design (permuted for the joint design).
    pub mask: SamplingMask,
    pub eip: f64,
    pub tip: f64,
}

/// Extra initial masks for joint-design restarts.
fn restart_masks(sc: &Scenario<f64>, restarts: usize, coverage: MaskCoverage) -> Result<Vec<SamplingMask>> {
    let mut masks = vec![sc.mask.clone()];
    for k in 1..restarts {
        let mut rng = indexed_stream(sc.cfg.seed, "mask-restart", k as u64);
        masks.push(generate_sampling_mask_with(&sc.cfg, &mut rng, coverage)?);
    }
    Ok(masks)
}

/// Run one method on a generated scenario.
pub fn run_method(sc: &Scenario<f64>, method: Method, spec: &ExperimentSpec) -> Result<MethodOutcome> {
    let cfg = &sc.cfg;
    if !method.valid_for(cfg.scheme) {
        return Err(Error::Config(format!("method '{method}' does not apply to {}", cfg.scheme)));
    }
    let h = &sc.channels.h;
    let g2 = &sc.channels.g2;
    let s = &sc.waveforms.s;
    let noise = noise_covariances(cfg, &sc.channels.g1, s)?;
    let solver = spec.joint.solver;
    let weighted = |wm: WeightMethod| -> Result<DesignSolution<f64>> {
        let w = weight_schedule(wm, cfg.l, cfg.m_rr, Some(&sc.mask), Some(s))?;
        solve_weighted_eip(&w, h, g2, &noise, cfg.p_t, cfg.c, &solver)
    };
    let (solution, mask) = match method {
        Method::Selfish => {
            let sol = solve_selfish(h, &noise, cfg.c)?;
            if sol.consumed_power > cfg.p_t * (1.0 + 1e-12) {
                return Err(Error::Infeasible(format!(
                    "capacity {} needs power {} > P_t = {}",
                    cfg.c, sol.consumed_power, cfg.p_t
                )));
            }
            (sol, sc.mask.clone())
        }
        Method::Noncoop => (weighted(WeightMethod::Tip)?, sc.mask.clone()),
        Method::Coop => (weighted(WeightMethod::EipI)?, sc.mask.clone()),
        Method::Partial => (weighted(WeightMethod::IpFmfb)?, sc.mask.clone()),
        Method::Full => (weighted(WeightMethod::EipII)?, sc.mask.clone()),
        Method::Joint => {
            let problem = JointProblem {
                scheme: cfg.scheme,
                h,
                g2,
                s,
                noise: &noise,
                p_t: cfg.p_t,
                c: cfg.c,
            };
            let starts = restart_masks(sc, spec.restarts, spec.mask_coverage)?;
            let r = joint_design_restarts(&problem, &starts, &spec.joint)?;
            (r.solution, r.mask)
        }
    };
    let eip = scheme_eip(cfg.scheme, &mask, s, g2, &solution.schedule)?;
    let tip = tip(&solution.schedule, g2)?;
    Ok(MethodOutcome { solution, mask, eip, tip })
}

fn value_key(value: Option<f64>) -> u64 {
    value.map_or(0, f64::to_bits)
}

/// Rows for one grid point: every method on every seed. Recovery trials
/// reuse the same random draws across methods.
fn run_point(spec: &ExperimentSpec, value: Option<f64>) -> Vec<ResultRow> {
    let var = spec.sweep.var;
    let shown = value.unwrap_or(f64::NAN);
    let mut rows = Vec::new();
    for &seed in &spec.seeds {
        let scenario = configure(&spec.scenario, var, value, seed)
            .and_then(|cfg| Scenario::<f64>::generate_with(&cfg, spec.mask_coverage));
        let sc = match scenario {
            Ok(sc) => sc,
            Err(e) => {
                for &m in &spec.methods {
                    eprintln!("{m} seed {seed} {}={shown}: {e}", var.name());
                    rows.push(ResultRow::failed(m, var, shown, seed, &e));
                }
                continue;
            }
        };
        for &m in &spec.methods {
            let start = Instant::now();
            let outcome = run_method(&sc, m, spec).and_then(|o| {
                let (mean, std) = if spec.mc_trials > 0 {
                    let mut rng = indexed_stream(seed, "recovery", value_key(value));
                    let st = radar_pipeline(&sc, &o.solution.schedule, &o.mask, spec.mc_trials, &spec.completion, &mut rng)?;
                    (st.mean_error, st.std_error)
                } else {
                    (f64::NAN, f64::NAN)
                };
                Ok((o, mean, std))
            });
            let wall = if spec.timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
            match outcome {
                Ok((o, mean, std)) => rows.push(ResultRow {
                    method: m,
                    sweep_var: var,
                    sweep_value: shown,
                    seed,
                    eip: o.eip,
                    tip: o.tip,
                    capacity: o.solution.achieved_capacity,
                    power: o.solution.consumed_power,
                    mc_mean_err: mean,
                    mc_std_err: std,
                    wall_ms: wall,
                    error: None,
                }),
                Err(e) => {
                    eprintln!("{m} seed {seed} {}={shown}: {e}", var.name());
                    rows.push(ResultRow::failed(m, var, shown, seed, &e));
                }
            }
        }
    }
    rows
}

/// Every method on every seed at the base scenario (the sweep is ignored).
pub fn run_compare(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    let mut single = spec.clone();
    single.sweep = Sweep::none();
    single.validate()?;
    let mut rows = run_point(&single, None);
    sort_rows(&mut rows);
    Ok(rows)
}

/// [`run_compare`] at every grid value of the sweep.
pub fn sweep(spec: &ExperimentSpec) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let mut rows = Vec::new();
    for value in spec.sweep.points() {
        rows.extend(run_point(spec, value));
    }
    sort_rows(&mut rows);
    Ok(rows)
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then(a.method.cmp(&b.method))
            .then(a.seed.cmp(&b.seed))
    });
}

/// `%g`-style rendering with 9 significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub fn csv_string(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            r.method.name().to_string(),
            r.sweep_var.name().to_string(),
            format_float(r.sweep_value),
            r.seed.to_string(),
            format_float(r.eip),
            format_float(r.tip),
            format_float(r.capacity),
            format_float(r.power),
            format_float(r.mc_mean_err),
            format_float(r.mc_std_err),
            format_float(r.wall_ms),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let io = |e: std::io::Error| Error::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    };
    let mut f = std::fs::File::create(path).map_err(io)?;
    f.write_all(csv_string(rows).as_bytes()).map_err(io)
}

/// Parse a CSV produced by [`write_csv`] back into rows.
pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Invalid("unexpected CSV header".into()));
    }
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return Err(Error::Invalid(format!("expected 11 fields, got {}", f.len())));
            }
            let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Invalid(format!("bad number '{s}'"))) };
            let eip = num(f[4])?;
            Ok(ResultRow {
                method: f[0].parse()?,
                sweep_var: f[1].parse()?,
                sweep_value: num(f[2])?,
                seed: f[3].parse().map_err(|_| Error::Invalid(format!("bad seed '{}'", f[3])))?,
                eip,
                tip: num(f[5])?,
                capacity: num(f[6])?,
                power: num(f[7])?,
                mc_mean_err: num(f[8])?,
                mc_std_err: num(f[9])?,
                wall_ms: num(f[10])?,
                error: eip.is_nan().then(|| "failed".to_string()),
            })
        })
        .collect()
}

/// Spectral gap of the initial mask and of the joint-design mask per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct GapRow {
    pub seed: u64,
    pub initial: (f64, f64, f64),
    pub joint: (f64, f64, f64),
}

pub fn mask_gaps(spec: &ExperimentSpec) -> Result<Vec<GapRow>> {
    spec.validate()?;
    let mut out = Vec::new();
    for &seed in &spec.seeds {
        let cfg = configure(&spec.scenario, SweepVar::None, None, seed)?;
        let sc = Scenario::<f64>::generate_with(&cfg, spec.mask_coverage)?;
        let joint = run_method(&sc, Method::Joint, spec)?;
        out.push(GapRow {
            seed,
            initial: crate::samplingopt::spectral_gap(&sc.mask)?,
            joint: crate::samplingopt::spectral_gap(&joint.mask)?,
        });
    }
    Ok(out)
}

pub fn gap_csv(rows: &[GapRow]) -> String {
    let mut out = String::from("seed,sigma1,sigma2,gap,joint_sigma1,joint_sigma2,joint_gap\n");
    for r in rows {
        let v = [r.initial.0, r.initial.1, r.initial.2, r.joint.0, r.joint.1, r.joint.2];
        let nums: Vec<String> = v.iter().map(|&x| format_float(x)).collect();
        out.push_str(&format!("{},{}\n", r.seed, nums.join(",")));
    }
    out
}

//! Scenario configs, command execution and CSV / report output for the
//! `mgincap` binary.
//!
//! A config is flat `key = value` text grouped under `[section]` headers:
//!
//! ```text
//! [noise]
//! alpha = 1.5
//! gamma_s = 1
//! gamma_g = 1
//! c1 = 0.5
//! gamma_sg = 1
//!
//! [scenario]
//! p = 1.1
//! gsnr_db = -5, 0, 5, 10
//! commands = bounds, pam
//! ```
//!
//! Every command writes `<command>.csv` into the output directory; `validate`
//! writes `validation_report.txt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use rayon::prelude::*;

use crate::approx_entropy::{pin_entropy_convention, ApproxModel};
use crate::ba_solver::{capacity_at, SweepOptions};
use crate::capacity_bounds::{compute_bounds, BoundOptions, EntropySource, FitOptions, NoiseEntropy};
use crate::noise_model::{check_moment_order, gsnr_to_power, NoiseModel, NoiseParams};
use crate::pam::{
    collision_lower, pam_ser_closed, pam_ser_printed, pam_ser_quadrature, pam_sweep, GhqOptions, PamChannel,
    PamFrame, PamSweepOptions, PowerNormalization,
};
use crate::special_fn::quad::{integrate_to_infinity, QuadOptions};
use crate::special_fn::{gauss_hermite_rule, tail_integral};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Pdf,
    Moments,
    Entropy,
    Bounds,
    Ba,
    Pam,
    Sweep,
    Validate,
}

impl Command {
    pub const ALL: [Command; 8] = [
        Command::Pdf,
        Command::Moments,
        Command::Entropy,
        Command::Bounds,
        Command::Ba,
        Command::Pam,
        Command::Sweep,
        Command::Validate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Pdf => "pdf",
            Command::Moments => "moments",
            Command::Entropy => "entropy",
            Command::Bounds => "bounds",
            Command::Ba => "ba",
            Command::Pam => "pam",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
        }
    }
}

impl FromStr for Command {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Units {
    #[default]
    Nats,
    Bits,
}

impl Units {
    fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => 1.0 / std::f64::consts::LN_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub noise: NoiseParams,
    pub p: f64,
    pub gsnr_grid: Vec<f64>,
    pub commands: Vec<Command>,
    pub pam_order: usize,
    pub output_path: PathBuf,
    pub units: Units,
    pub seed: u64,
    pub ghq_order: usize,
    pub pam_normalization: PowerNormalization,
    pub pam_frame: PamFrame,
    /// Base output step of the BA discretization.
    pub ba_step: f64,
    pub ba_tol: f64,
    /// Fit the matched-output lower bound in `bounds`.
    pub l1: bool,
    pub entropy_source: EntropySource,
    /// `pdf` grid: `points` values on `[-range, range]`.
    pub pdf_range: f64,
    pub pdf_points: usize,
    pub moment_orders: Vec<f64>,
    /// Stability exponents swept by `sweep`; the noise's own when empty.
    pub sweep_alphas: Vec<f64>,
    /// Residual thresholds for `validate`.
    pub validate_rel_tol: f64,
    pub validate_entropy_tol: f64,
}

impl ScenarioConfig {
    fn defaults(noise: NoiseParams) -> Self {
        Self {
            noise,
            p: 1.1,
            gsnr_grid: vec![0.0, 10.0, 20.0],
            commands: Vec::new(),
            pam_order: 4,
            output_path: PathBuf::from("out"),
            units: Units::Nats,
            seed: 1,
            ghq_order: 30,
            pam_normalization: PowerNormalization::Sum,
            pam_frame: PamFrame::NoiseFixed,
            ba_step: 0.01,
            ba_tol: 1e-4,
            l1: false,
            entropy_source: EntropySource::Numeric,
            pdf_range: 10.0,
            pdf_points: 401,
            moment_orders: Vec::new(),
            sweep_alphas: Vec::new(),
            validate_rel_tol: 1e-6,
            validate_entropy_tol: 1e-4,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            line: 0,
            field: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_sections(text)?;
        let mut noise = [f64::NAN; 5];
        const NOISE_KEYS: [&str; 5] = ["alpha", "gamma_s", "gamma_g", "c1", "gamma_sg"];
        for (i, k) in NOISE_KEYS.iter().enumerate() {
            if let Some(e) = entries.get(&format!("noise.{k}")) {
                noise[i] = e.number()?;
            }
        }
        for (k, v) in NOISE_KEYS.iter().zip(noise) {
            if v.is_nan() {
                return Err(config_err(0, &format!("noise.{k}"), "missing"));
            }
        }
        let params = NoiseParams {
            alpha: noise[0],
            gamma_s: noise[1],
            gamma_g: noise[2],
            c1: noise[3],
            gamma_sg: noise[4],
        };
        params.validate().map_err(|e| config_err(0, "noise", &e.to_string()))?;
        let mut c = Self::defaults(params);

        for (key, e) in &entries {
            match key.as_str() {
                k if k.strip_prefix("noise.").is_some_and(|n| NOISE_KEYS.contains(&n)) => {}
                "scenario.p" => c.p = e.number()?,
                "scenario.gsnr_db" => c.gsnr_grid = e.numbers()?,
                "scenario.commands" => {
                    c.commands = e
                        .list()
                        .iter()
                        .map(|s| s.parse().map_err(|r: String| e.err(&r)))
                        .collect::<Result<_>>()?
                }
                "scenario.output_path" => c.output_path = PathBuf::from(&e.value),
                "scenario.units" => {
                    c.units = match e.value.as_str() {
                        "nats" => Units::Nats,
                        "bits" => Units::Bits,
                        other => return Err(e.err(&format!("expected nats or bits, got `{other}`"))),
                    }
                }
                "scenario.seed" => c.seed = e.integer()?,
                "pam.order" => c.pam_order = e.integer()? as usize,
                "pam.ghq_order" => c.ghq_order = e.integer()? as usize,
                "pam.normalization" => {
                    c.pam_normalization = match e.value.as_str() {
                        "sum" => PowerNormalization::Sum,
                        "expectation" => PowerNormalization::Expectation,
                        other => return Err(e.err(&format!("expected sum or expectation, got `{other}`"))),
                    }
                }
                "pam.signal_p0" => {
                    let p0 = e.number()?;
                    if !(p0 > 0.0) {
                        return Err(e.err("must be positive"));
                    }
                    c.pam_frame = PamFrame::SignalFixed { p0 };
                }
                "ba.step" => c.ba_step = e.number()?,
                "ba.tol" => c.ba_tol = e.number()?,
                "bounds.l1" => c.l1 = e.boolean()?,
                "bounds.entropy" => {
                    c.entropy_source = match e.value.as_str() {
                        "numeric" => EntropySource::Numeric,
                        "closed" => EntropySource::Closed,
                        other => return Err(e.err(&format!("expected numeric or closed, got `{other}`"))),
                    }
                }
                "pdf.range" => c.pdf_range = e.number()?,
                "pdf.points" => c.pdf_points = e.integer()? as usize,
                "moments.p" => c.moment_orders = e.numbers()?,
                "sweep.alpha" => c.sweep_alphas = e.numbers()?,
                "validate.rel_tol" => c.validate_rel_tol = e.number()?,
                "validate.entropy_tol" => c.validate_entropy_tol = e.number()?,
                _ => return Err(e.err("unknown key")),
            }
        }
        c.check(&entries)?;
        Ok(c)
    }

    fn check(&self, entries: &BTreeMap<String, Entry>) -> Result<()> {
        let line = |k: &str| entries.get(k).map_or(0, |e| e.line);
        if self.gsnr_grid.is_empty() {
            return Err(config_err(line("scenario.gsnr_db"), "scenario.gsnr_db", "empty grid"));
        }
        if self.gsnr_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config_err(
                line("scenario.gsnr_db"),
                "scenario.gsnr_db",
                "grid must be strictly increasing",
            ));
        }
        let model = NoiseModel::new(self.noise).map_err(|e| config_err(0, "noise", &e.to_string()))?;
        check_moment_order(&model, self.p).map_err(|e| config_err(line("scenario.p"), "scenario.p", &e.to_string()))?;
        if self.pam_order < 2 || self.pam_order % 2 != 0 {
            return Err(config_err(line("pam.order"), "pam.order", "must be even and >= 2"));
        }
        if self.ghq_order < 10 || self.ghq_order > crate::special_fn::MAX_HERMITE_ORDER {
            return Err(config_err(line("pam.ghq_order"), "pam.ghq_order", "must be in 10..=128"));
        }
        if !(self.ba_step > 0.0) {
            return Err(config_err(line("ba.step"), "ba.step", "must be positive"));
        }
        if self.pdf_points < 2 || !(self.pdf_range > 0.0) {
            return Err(config_err(line("pdf.points"), "pdf", "need at least 2 points on a positive range"));
        }
        for &a in &self.sweep_alphas {
            let mut q = self.noise;
            q.alpha = a;
            let m = NoiseModel::new(q).map_err(|e| config_err(line("sweep.alpha"), "sweep.alpha", &e.to_string()))?;
            check_moment_order(&m, self.p)
                .map_err(|e| config_err(line("sweep.alpha"), "sweep.alpha", &e.to_string()))?;
        }
        Ok(())
    }
}

fn config_err(line: usize, field: &str, reason: &str) -> Error {
    Error::Config {
        line,
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Clone)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

impl Entry {
    fn err(&self, reason: &str) -> Error {
        config_err(self.line, &self.key, reason)
    }

    fn number(&self) -> Result<f64> {
        self.value
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.err(&format!("`{}` is not a finite number", self.value)))
    }

    fn integer(&self) -> Result<u64> {
        self.value
            .parse()
            .map_err(|_| self.err(&format!("`{}` is not a non-negative integer", self.value)))
    }

    fn boolean(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            v => Err(self.err(&format!("`{v}` is not a boolean"))),
        }
    }

    fn list(&self) -> Vec<String> {
        self.value
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect()
    }

    fn numbers(&self) -> Result<Vec<f64>> {
        self.list()
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(&format!("`{s}` is not a finite number")))
            })
            .collect()
    }
}

/// `section.key -> entry`; keys before any header go to `scenario`.
fn parse_sections(text: &str) -> Result<BTreeMap<String, Entry>> {
    let mut section = String::from("scenario");
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| config_err(line, s, "unterminated section header"))?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| config_err(line, s, "expected `key = value`"))?;
        let key = format!("{section}.{}", k.trim());
        if out.contains_key(&key) {
            return Err(config_err(line, &key, "duplicate key"));
        }
        out.insert(
            key.clone(),
            Entry {
                key,
                value: v.trim().to_string(),
                line,
            },
        );
    }
    Ok(out)
}

/// Command-line overrides applied on top of a config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub bits: bool,
    pub seed: Option<u64>,
    pub step: Option<f64>,
    pub ghq_order: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, c: &mut ScenarioConfig) -> Result<()> {
        if let Some(o) = &self.out {
            c.output_path = o.clone();
        }
        if self.bits {
            c.units = Units::Bits;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(config_err(0, "--step", "must be positive"));
            }
            c.ba_step = s;
        }
        if let Some(o) = self.ghq_order {
            if !(10..=crate::special_fn::MAX_HERMITE_ORDER).contains(&o) {
                return Err(config_err(0, "--ghq-order", "must be in 10..=128"));
            }
            c.ghq_order = o;
        }
        Ok(())
    }
}

/// Formats with 12 significant digits, shortest of fixed and exponent
/// notation (like C's `%.12g`), independent of locale.
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
    let e = format!("{x:.11e}");
    let (mant, exp) = e.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{}{:02}", trim_zeros(mant.to_string()), if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// A CSV table. Values are numbers, except the trailing `status` column.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    /// Columns holding information quantities, scaled by the units flag.
    info: Vec<bool>,
    rows: Vec<(Vec<f64>, String)>,
}

impl Table {
    fn new(columns: &[(&'static str, bool)]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.0).collect(),
            info: columns.iter().map(|c| c.1).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push((values, "ok".into()));
    }

    /// A failure marker row: leading key values, the rest empty.
    fn push_failure(&mut self, keys: Vec<f64>, err: &Error) {
        let mut v = keys;
        v.resize(self.columns.len(), f64::NAN);
        let msg = err.to_string().replace([',', '\n'], ";");
        self.rows.push((v, format!("failed: {msg}")));
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.1 != "ok").count()
    }

    pub fn to_csv(&self, units: Units) -> String {
        let mut s = self.columns.join(",");
        s.push_str(",status\n");
        for (vals, status) in &self.rows {
            for (i, v) in vals.iter().enumerate() {
                let failed = status != "ok" && v.is_nan();
                if !failed {
                    let v = if self.info[i] { v * units.scale() } else { *v };
                    s.push_str(&fmt_num(v));
                }
                s.push(',');
            }
            s.push_str(status);
            s.push('\n');
        }
        s
    }
}

/// Files written and failed rows counted by [`run`].
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub failures: usize,
}

/// Runs `commands` (the config's list when empty) and writes their outputs.
pub fn run(config: &ScenarioConfig, commands: &[Command]) -> Result<RunOutcome> {
    let commands = if commands.is_empty() {
        &config.commands[..]
    } else {
        commands
    };
    fs::create_dir_all(&config.output_path)?;
    let mut outcome = RunOutcome::default();
    for &cmd in commands {
        info!("running {}", cmd.name());
        if cmd == Command::Validate {
            let (report, failed) = validation_report(config)?;
            let path = config.output_path.join("validation_report.txt");
            fs::write(&path, report)?;
            outcome.files.push(path);
            outcome.failures += failed;
            continue;
        }
        let table = match cmd {
            Command::Pdf => pdf_table(config)?,
            Command::Moments => moments_table(config)?,
            Command::Entropy => entropy_table(config)?,
            Command::Bounds => bounds_table(config)?,
            Command::Ba => ba_table(config)?,
            Command::Pam => pam_table(config)?,
            Command::Sweep => sweep_table(config)?,
            Command::Validate => unreachable!(),
        };
        let path = config.output_path.join(format!("{}.csv", cmd.name()));
        fs::write(&path, table.to_csv(config.units))?;
        outcome.failures += table.failures();
        outcome.files.push(path);
    }
    Ok(outcome)
}

pub fn pdf_table(c: &ScenarioConfig) -> Result<Table> {
    let model = NoiseModel::new(c.noise)?;
    let approx = if model.consts.tail.is_some() && c.noise.c1 > 0.0 {
        Some(ApproxModel::new(model)?)
    } else {
        None
    };
    let mut t = Table::new(&[("n", false), ("pdf", false), ("pdf_approx", false), ("cdf", false)]);
    let k = c.pdf_points - 1;
    for i in 0..=k {
        let n = -c.pdf_range + 2.0 * c.pdf_range * i as f64 / k as f64;
        let fa = approx.as_ref().map_or(model.pdf(n), |a| a.pdf(n));
        t.push(vec![n, model.pdf(n), fa, model.cdf(n)?]);
    }
    Ok(t)
}

pub fn moments_table(c: &ScenarioConfig) -> Result<Table> {
    let model = NoiseModel::new(c.noise)?;
    let orders = if c.moment_orders.is_empty() {
        vec![c.p]
    } else {
        c.moment_orders.clone()
    };
    let mut t = Table::new(&[
        ("p", false),
        ("closed", false),
        ("printed", false),
        ("quadrature", false),
        ("rel_err", false),
    ]);
    for p in orders {
        match model.p_moment(p) {
            Ok(m) => {
                let q = model.p_moment_quadrature(p)?;
                t.push(vec![p, m, model.p_moment_printed(p)?, q, (m - q).abs() / q]);
            }
            Err(e) => t.push_failure(vec![p], &e),
        }
    }
    Ok(t)
}

pub fn entropy_table(c: &ScenarioConfig) -> Result<Table> {
    let model = NoiseModel::new(c.noise)?;
    let h = NoiseEntropy::of(&model)?;
    let mut t = Table::new(&[
        ("alpha", false),
        ("c1", false),
        ("h_numeric", true),
        ("h_closed", true),
        ("n0", false),
        ("approx_closed", true),
        ("approx_numeric", true),
        ("kld", true),
    ]);
    let mut row = vec![c.noise.alpha, c.noise.c1, h.numeric, h.closed];
    if model.consts.tail.is_some() && c.noise.c1 > 0.0 {
        let a = ApproxModel::new(model)?;
        row.extend([a.n0, a.entropy_closed()?, a.entropy_numeric()?, a.kld()?]);
    } else {
        row.extend([f64::NAN; 4]);
    }
    t.push(row);
    Ok(t)
}

pub fn bounds_table(c: &ScenarioConfig) -> Result<Table> {
    let model = NoiseModel::new(c.noise)?;
    let h = NoiseEntropy::of(&model)?;
    let moment = model.p_moment(c.p)?;
    let opts = BoundOptions {
        entropy: c.entropy_source,
        l1_fit: c.l1.then(|| FitOptions {
            seed: c.seed,
            ..FitOptions::default()
        }),
    };
    let mut t = Table::new(&[
        ("gsnr_db", false),
        ("p0", false),
        ("l1", true),
        ("l2", true),
        ("u", true),
        ("c_asym", true),
        ("gap", true),
        ("h_noise", true),
    ]);
    let rows: Vec<_> = c
        .gsnr_grid
        .par_iter()
        .map(|&g| compute_bounds(&model, c.p, gsnr_to_power(g, moment), &h, &opts))
        .collect();
    for (&g, r) in c.gsnr_grid.iter().zip(rows) {
        match r {
            Ok(b) => t.push(vec![
                g,
                b.p0,
                b.l1.unwrap_or(f64::NAN),
                b.l2,
                b.u,
                b.c_asymptotic,
                b.gap.exact,
                b.h_nm,
            ]),
            Err(e) => t.push_failure(vec![g, gsnr_to_power(g, moment)], &e),
        }
    }
    Ok(t)
}

fn sweep_options(c: &ScenarioConfig) -> SweepOptions {
    let mut o = SweepOptions::default();
    o.grid.step = c.ba_step;
    o.ba.tol = c.ba_tol;
    o
}

pub fn ba_table(c: &ScenarioConfig) -> Result<Table> {
    let model = NoiseModel::new(c.noise)?;
    let opts = sweep_options(c);
    let mut t = Table::new(&[
        ("gsnr_db", false),
        ("p0", false),
        ("step", false),
        ("c_ba", true),
        ("lambda", true),
        ("iterations", false),
        ("gap", true),
        ("kkt_residual", true),
    ]);
    let rows: Vec<_> = c.gsnr_grid.par_iter().map(|&g| capacity_at(&model, c.p, g, &opts)).collect();
    for (&g, r) in c.gsnr_grid.iter().zip(rows) {
        match r {
            Ok(s) => t.push(vec![
                g,
                s.p0,
                s.step,
                s.capacity,
                s.lambda,
                s.iterations as f64,
                s.gap,
                s.kkt_residual,
            ]),
            Err(e) => t.push_failure(vec![g], &e),
        }
    }
    Ok(t)
}

pub fn pam_table(c: &ScenarioConfig) -> Result<Table> {
    let opts = PamSweepOptions {
        m: c.pam_order,
        p: c.p,
        normalization: c.pam_normalization,
        frame: c.pam_frame,
        ghq: GhqOptions::with_order(c.ghq_order),
    };
    let mut t = Table::new(&[
        ("gsnr_db", false),
        ("a", false),
        ("pe", false),
        ("lhat1", true),
        ("lhat2", true),
        ("mi_numeric", true),
        ("qam_mi", true),
        ("ghq_covers_span", false),
    ]);
    for (&g, r) in c.gsnr_grid.iter().zip(pam_sweep(&c.noise, &c.gsnr_grid, &opts)) {
        match r {
            Ok(pt) => t.push(vec![
                g,
                pt.a,
                pt.bounds.pe,
                pt.bounds.lhat1,
                pt.bounds.lhat2,
                pt.bounds.mi_numeric,
                crate::pam::qam_capacity_from_pam(pt.bounds.mi_numeric),
                pt.ghq_covers_span as u8 as f64,
            ]),
            Err(e) => t.push_failure(vec![g], &e),
        }
    }
    Ok(t)
}

/// Bounds and BA capacity over `sweep.alpha` x GSNR.
pub fn sweep_table(c: &ScenarioConfig) -> Result<Table> {
    let alphas = if c.sweep_alphas.is_empty() {
        vec![c.noise.alpha]
    } else {
        c.sweep_alphas.clone()
    };
    let opts = sweep_options(c);
    let jobs: Vec<(f64, f64)> = alphas
        .iter()
        .flat_map(|&a| c.gsnr_grid.iter().map(move |&g| (a, g)))
        .collect();
    let results: Vec<Result<[f64; 5]>> = jobs
        .par_iter()
        .map(|&(a, g)| {
            let model = NoiseModel::new(NoiseParams { alpha: a, ..c.noise })?;
            let h = NoiseEntropy::of(&model)?;
            let p0 = gsnr_to_power(g, model.p_moment(c.p)?);
            let b = compute_bounds(
                &model,
                c.p,
                p0,
                &h,
                &BoundOptions {
                    entropy: c.entropy_source,
                    l1_fit: None,
                },
            )?;
            let s = capacity_at(&model, c.p, g, &opts)?;
            Ok([p0, b.l2, s.capacity, b.u, b.c_asymptotic])
        })
        .collect();
    let mut t = Table::new(&[
        ("alpha", false),
        ("gsnr_db", false),
        ("p0", false),
        ("l2", true),
        ("c_ba", true),
        ("u", true),
        ("c_asym", true),
    ]);
    for (&(a, g), r) in jobs.iter().zip(results) {
        match r {
            Ok(v) => {
                let mut row = vec![a, g];
                row.extend(v);
                t.push(row);
            }
            Err(e) => t.push_failure(vec![a, g], &e),
        }
    }
    Ok(t)
}

struct Report {
    text: String,
    failed: usize,
}

impl Report {
    fn check(&mut self, name: &str, residual: f64, threshold: f64) {
        let ok = residual <= threshold;
        if !ok {
            self.failed += 1;
        }
        let _ = writeln!(
            self.text,
            "{:<4} {name}: residual {} (threshold {})",
            if ok { "ok" } else { "FAIL" },
            fmt_num(residual),
            fmt_num(threshold)
        );
    }

    fn note(&mut self, name: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "info {name}: {value}");
    }
}

/// Oracle-vs-closed-form residuals for the configured noise plus the fixed
/// pinning grids. Returns the report and the number of failed checks.
pub fn validation_report(c: &ScenarioConfig) -> Result<(String, usize)> {
    let mut r = Report {
        text: String::new(),
        failed: 0,
    };
    let _ = writeln!(r.text, "validation report");
    let _ = writeln!(r.text, "noise: {}", c.noise.to_kv().trim().replace('\n', ", "));
    let _ = writeln!(r.text, "p = {}, seed = {}\n", fmt_num(c.p), c.seed);

    let model = NoiseModel::new(c.noise)?;

    let _ = writeln!(r.text, "[moments]");
    let q = model.p_moment_quadrature(c.p)?;
    let closed = model.p_moment(c.p)?;
    r.check("E|N|^p closed form vs quadrature (relative)", (closed - q).abs() / q, c.validate_rel_tol);
    r.note(
        "E|N|^p printed Gaussian term vs quadrature (relative)",
        fmt_num((model.p_moment_printed(c.p)? - q).abs() / q),
    );

    let _ = writeln!(r.text, "\n[tail integral]");
    let mut worst: f64 = 0.0;
    for (rr, cc, a) in [(0.0, 1.0, 2.2), (0.5, 0.7, 2.5), (1.1, 2.0, 2.9), (0.0, 0.3, 2.8)] {
        let exact = tail_integral(rr, cc, a)?;
        let num = integrate_to_infinity(|x| x.powf(rr) / (cc + x.powf(a)), 0.0, QuadOptions::precise()).value;
        worst = worst.max((exact - num).abs() / num);
    }
    r.check("int x^r/(c + x^a) closed form vs quadrature (relative)", worst, 1e-8);

    let _ = writeln!(r.text, "\n[entropy]");
    let grid: Vec<ApproxModel> = [1.2, 1.5, 1.8]
        .iter()
        .flat_map(|&a| [0.3, 0.5, 0.7].map(move |c1| (a, c1)))
        .map(|(a, c1)| ApproxModel::new(NoiseModel::new(NoiseParams::unit(a, c1)?)?))
        .collect::<Result<_>>()?;
    let pin = pin_entropy_convention(&grid)?;
    r.note("Gaussian tail convention chosen by RMS", pin.chosen.name());
    for (conv, mx) in &pin.max_abs {
        if *conv == pin.chosen {
            r.check(
                "two-piece closed-form entropy vs quadrature, 9-point grid (max abs, nats)",
                *mx,
                c.validate_entropy_tol,
            );
        } else {
            r.note(&format!("{} convention max abs residual (nats)", conv.name()), fmt_num(*mx));
        }
    }
    let h = NoiseEntropy::of(&model)?;
    r.note(
        "closed-form minus quadrature noise entropy for this noise (nats)",
        fmt_num(h.closed - h.numeric),
    );

    let _ = writeln!(r.text, "\n[gauss-hermite]");
    let mut worst: f64 = 0.0;
    for order in [10, c.ghq_order, 50] {
        let rule = gauss_hermite_rule(order)?;
        worst = worst.max((rule.weights.iter().sum::<f64>() - std::f64::consts::PI.sqrt()).abs());
    }
    r.check("weight sum vs sqrt(pi)", worst, 1e-12);

    let _ = writeln!(r.text, "\n[pam]");
    let mut ser_worst: f64 = 0.0;
    let mut printed_worst: f64 = 0.0;
    let mut ghq_rows = String::new();
    for &g in &c.gsnr_grid {
        let ch = PamChannel::at_gsnr(&c.noise, c.pam_order, c.p, g, c.pam_normalization, c.pam_frame)?;
        let quad = pam_ser_quadrature(&ch.spec, &ch.noise);
        ser_worst = ser_worst.max((pam_ser_closed(&ch.spec, &ch.noise)? - quad).abs() / quad.max(1e-300));
        printed_worst = printed_worst.max((pam_ser_printed(&ch.spec, &ch.noise)? - quad).abs() / quad.max(1e-300));
        let exact = collision_lower(&ch.spec, &ch.noise, ch.h_nm);
        let ghq = ch.ghq_lower(&GhqOptions::with_order(c.ghq_order))?;
        let _ = writeln!(
            ghq_rows,
            "info collision bound at {} dB: quadrature {}, Gauss-Hermite order {} {} (nats)",
            fmt_num(g),
            fmt_num(exact),
            c.ghq_order,
            fmt_num(ghq.lhat1)
        );
    }
    r.check("SER closed form vs quadrature (relative, GSNR grid)", ser_worst, 1e-8);
    r.note("SER printed form vs quadrature (relative, GSNR grid)", fmt_num(printed_worst));
    r.text.push_str(&ghq_rows);

    let _ = writeln!(r.text, "\n{} check(s) failed", r.failed);
    Ok((r.text, r.failed))
}

/// Process exit status for an error: 1 for config problems, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::InvalidParameter { .. }
        | Error::DivergentMoment { .. }
        | Error::DegenerateModel(_) => 1,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[noise]\nalpha = 1.5\ngamma_s = 1\ngamma_g = 1\nc1 = 0.5\ngamma_sg = 1\n";

    #[test]
    fn number_format() {
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(123456.789), "123456.789");
        assert_eq!(fmt_num(1e-7), "1e-07");
        assert_eq!(fmt_num(6.02214076e23), "6.02214076e+23");
        assert_eq!(fmt_num(f64::NAN), "nan");
        assert_eq!(fmt_num(0.0), "0");
    }

    #[test]
    fn parses_sections_and_lists() {
        let text = format!(
            "{BASE}\n[scenario]\np = 1.2\ngsnr_db = -5, 0, 5 # dB\ncommands = bounds, pam\nunits = bits\n[pam]\norder = 8\n"
        );
        let c = ScenarioConfig::parse(&text).unwrap();
        assert_eq!(c.p, 1.2);
        assert_eq!(c.gsnr_grid, vec![-5.0, 0.0, 5.0]);
        assert_eq!(c.commands, vec![Command::Bounds, Command::Pam]);
        assert_eq!(c.units, Units::Bits);
        assert_eq!(c.pam_order, 8);
    }

    fn err_of(text: &str) -> (usize, String) {
        match ScenarioConfig::parse(text) {
            Err(Error::Config { line, field, .. }) => (line, field),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn config_errors_name_line_and_field() {
        assert_eq!(err_of(&format!("{BASE}[scenario]\np = abc\n")), (8, "scenario.p".into()));
        assert_eq!(err_of(&format!("{BASE}[scenario]\nbogus = 1\n")), (8, "scenario.bogus".into()));
        assert_eq!(err_of(&format!("{BASE}[scenario]\ngsnr_db = 5, 0\n")), (8, "scenario.gsnr_db".into()));
        assert_eq!(err_of(&format!("{BASE}[scenario]\np = 1.6\n")), (8, "scenario.p".into()));
        assert_eq!(err_of("[noise]\nalpha = 1.5\n").1, "noise.gamma_s");
        assert_eq!(err_of(&format!("{BASE}[scenario]\ncommands = bounds, plot\n")).1, "scenario.commands");
        assert_eq!(err_of(&format!("{BASE}[pam]\norder = 3\n")).1, "pam.order");
        assert_eq!(err_of(&format!("{BASE}beta = 2\n")), (7, "noise.beta".into()));
    }

    #[test]
    fn units_scale_information_columns_only() {
        let mut t = Table::new(&[("gsnr_db", false), ("c", true)]);
        t.push(vec![10.0, std::f64::consts::LN_2]);
        assert_eq!(t.to_csv(Units::Nats), "gsnr_db,c,status\n10,0.69314718056,ok\n");
        assert_eq!(t.to_csv(Units::Bits), "gsnr_db,c,status\n10,1,ok\n");
    }

    #[test]
    fn failure_rows_are_marked() {
        let mut t = Table::new(&[("gsnr_db", false), ("c", true)]);
        t.push_failure(vec![5.0], &Error::Resolution("grid, too coarse".into()));
        assert_eq!(t.failures(), 1);
        assert_eq!(t.to_csv(Units::Nats), "gsnr_db,c,status\n5,,failed: resolution error: grid; too coarse\n");
    }
}

//! Experiment runner: flat key=value config files with flag overrides,
//! the paper-facing presets, and versioned CSV output.
//!
//! The CSV schema is the contract (`# clockpress-csv v1`); plotting is
//! left to whatever consumes the file. Sweep points run in parallel,
//! but rows are emitted in config order and are byte-identical across
//! thread counts (the runtime column aside), so a re-run reproduces
//! the file.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rayon::prelude::*;

use crate::channels::{frequency_projection, frequency_projection_s_basis, Window};
use crate::clockstate::{build_block_state, qj_weights, rho_pj, ClockParams};
use crate::compressor::{
    compression_error, compression_error_on_grid, error_bound, known_target, memory_shape,
    starved_run, Mode, TailRestriction,
};
use crate::linalg::{max_abs_diff, random_psd, trace_norm_hermitian, trace_re};
use crate::oracle::{oracle_blocks, oracle_convert, MAX_ORACLE_COPIES};
use crate::repkit::Spin;
use crate::{Error, Result};

/// Everything a run needs; built by [`parse_config`] from a config
/// file and/or command-line flags.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Sorted ascending and deduplicated on construction.
    pub n_list: Vec<u32>,
    pub p_list: Vec<f64>,
    pub s_list: Vec<f64>,
    /// Partition exponent; the converse preset reads it as the window
    /// width exponent w instead (default 0.3 there, 0.1 elsewhere).
    pub x: f64,
    pub mode: Mode,
    /// Replaces the default evolution-time grid when present.
    pub t_grid: Option<Vec<f64>>,
    pub seed: u64,
    pub output_path: String,
    pub restrict_tail: TailRestriction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    ErrorScan,
    MemoryScan,
    BoundCompare,
    Converse,
    OracleVerify,
    ProjectionBasisDiagnostic,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "error-scan" => Ok(Preset::ErrorScan),
            "memory-scan" => Ok(Preset::MemoryScan),
            "bound-compare" => Ok(Preset::BoundCompare),
            "converse" => Ok(Preset::Converse),
            "oracle-verify" => Ok(Preset::OracleVerify),
            "projection-basis-diagnostic" => Ok(Preset::ProjectionBasisDiagnostic),
            other => Err(Error::Config(format!("unknown preset '{other}'"))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Preset::ErrorScan => "error-scan",
            Preset::MemoryScan => "memory-scan",
            Preset::BoundCompare => "bound-compare",
            Preset::Converse => "converse",
            Preset::OracleVerify => "oracle-verify",
            Preset::ProjectionBasisDiagnostic => "projection-basis-diagnostic",
        })
    }
}

/// Command-line overrides; every field beats the config file when set.
#[derive(Clone, Debug, Default)]
pub struct Flags {
    pub n: Option<Vec<u32>>,
    pub p: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub x: Option<f64>,
    pub mode: Option<String>,
    pub t_grid: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub restrict_tail: Option<bool>,
}

/// One CSV row. Every preset fills every column; presets that do not
/// compute an error report the vacuous interval [0, 1].
#[derive(Clone, Debug)]
pub struct ResultRow {
    pub preset: String,
    pub n: u32,
    pub p: f64,
    pub s: f64,
    pub x: f64,
    pub mode: Mode,
    pub epsilon: f64,
    /// Upper end of the error interval (>= epsilon).
    pub epsilon_tail_bound: f64,
    pub lemma2_bound: f64,
    pub qubits_exact: f64,
    pub qubits_bound: f64,
    pub cbits_exact: f64,
    pub quantum_dim: usize,
    pub classical_count: usize,
    pub runtime_ms: u128,
}

pub const CSV_VERSION_LINE: &str = "# clockpress-csv v1";
pub const CSV_HEADER: &str = "preset,n,p,s,x,mode,epsilon,epsilon_tail_bound,lemma2_bound,\
qubits_exact,qubits_bound,cbits_exact,quantum_dim,classical_count,runtime_ms";

impl ResultRow {
    pub fn csv_line(&self) -> String {
        let mut line = String::new();
        write!(
            line,
            "{},{},{:.11e},{:.11e},{:.11e},{},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{:.11e},{},{},{}",
            self.preset,
            self.n,
            self.p,
            self.s,
            self.x,
            self.mode,
            self.epsilon,
            self.epsilon_tail_bound,
            self.lemma2_bound,
            self.qubits_exact,
            self.qubits_bound,
            self.cbits_exact,
            self.quantum_dim,
            self.classical_count,
            self.runtime_ms,
        )
        .expect("writing to a String cannot fail");
        line
    }
}

/// Parses a flat key=value config file (comments with '#', blank lines
/// ignored), applies flag overrides, fills defaults, and validates
/// domains. Unknown keys are rejected by name.
pub fn parse_config(
    preset: Option<Preset>,
    file_text: Option<&str>,
    flags: &Flags,
) -> Result<ExperimentConfig> {
    let mut file = Flags::default();
    let mut file_preset = None;
    if let Some(text) = file_text {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "config line {}: expected key=value, got '{line}'",
                    idx + 1
                )));
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "preset" => file_preset = Some(value.parse()?),
                "n_list" => file.n = Some(parse_list(key, value)?),
                "p_list" => file.p = Some(parse_list(key, value)?),
                "s_list" => file.s = Some(parse_list(key, value)?),
                "x" => file.x = Some(parse_scalar(key, value)?),
                "mode" => file.mode = Some(value.to_string()),
                "t_grid" => file.t_grid = Some(parse_list(key, value)?),
                "seed" => file.seed = Some(parse_scalar(key, value)?),
                "out" => file.out = Some(value.to_string()),
                "restrict_tail" => file.restrict_tail = Some(parse_scalar(key, value)?),
                other => {
                    return Err(Error::Config(format!("unknown config key '{other}'")));
                }
            }
        }
    }

    let preset = preset
        .or(file_preset)
        .ok_or_else(|| Error::Config("no preset given (argument or config file)".into()))?;
    let mut n_list = flags
        .n
        .clone()
        .or(file.n)
        .unwrap_or_else(|| vec![16, 64, 256]);
    n_list.sort_unstable();
    n_list.dedup();
    if n_list.is_empty() || n_list[0] == 0 {
        return Err(Error::Config("n_list must contain positive sizes".into()));
    }
    let p_list = flags.p.clone().or(file.p).unwrap_or_else(|| vec![1.0]);
    for p in &p_list {
        if !(*p > 0.5 && *p <= 1.0) {
            return Err(Error::Config(format!("p={p} outside (1/2, 1]")));
        }
    }
    let s_list = flags.s.clone().or(file.s).unwrap_or_else(|| vec![0.5]);
    for s in &s_list {
        if !(*s > 0.0 && *s < 1.0) {
            return Err(Error::Config(format!("s={s} outside (0, 1)")));
        }
    }
    let default_x = if preset == Preset::Converse { 0.3 } else { 0.1 };
    let x = flags.x.or(file.x).unwrap_or(default_x);
    if !(x > 0.0 && x < 0.5) {
        return Err(Error::Config(format!("x={x} outside (0, 1/2)")));
    }
    let mode = match flags.mode.as_deref().or(file.mode.as_deref()) {
        Some(text) => text.parse()?,
        None => Mode::Known,
    };
    let t_grid = flags.t_grid.clone().or(file.t_grid);
    if let Some(grid) = &t_grid {
        if grid.is_empty() {
            return Err(Error::Config("t_grid override is empty".into()));
        }
        for t in grid {
            if !(0.0..std::f64::consts::TAU).contains(t) {
                return Err(Error::Config(format!("t={t} outside [0, 2pi)")));
            }
        }
    }
    Ok(ExperimentConfig {
        preset,
        n_list,
        p_list,
        s_list,
        x,
        mode,
        t_grid,
        seed: flags.seed.or(file.seed).unwrap_or(17),
        output_path: flags
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| "-".into()),
        restrict_tail: match flags.restrict_tail.or(file.restrict_tail) {
            None => TailRestriction::Auto,
            Some(true) => TailRestriction::Always,
            Some(false) => TailRestriction::Never,
        },
    })
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| {
            item.trim()
                .parse()
                .map_err(|_| Error::Config(format!("{key}: cannot parse '{}'", item.trim())))
        })
        .collect()
}

fn parse_scalar<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

/// Runs every sweep point of the config on a pool of `threads` workers
/// (0 = library default) and returns rows in config order.
pub fn run(config: &ExperimentConfig, threads: usize) -> Result<Vec<ResultRow>> {
    let points = sweep_points(config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    let nested: Vec<Vec<ResultRow>> = pool.install(|| {
        points
            .par_iter()
            .map(|point| compute_point(config, point))
            .collect::<Result<_>>()
    })?;
    let rows: Vec<ResultRow> = nested.into_iter().flatten().collect();
    for row in &rows {
        debug_assert!(row.epsilon.is_finite() && row.epsilon_tail_bound.is_finite());
    }
    Ok(rows)
}

/// Runs the config, writes the CSV, and for oracle-verify enforces the
/// comparison tolerance after the rows are persisted.
pub fn execute(config: &ExperimentConfig, threads: usize, out: &mut dyn Write) -> Result<()> {
    let rows = run(config, threads)?;
    writeln!(out, "{CSV_VERSION_LINE}")?;
    writeln!(out, "{CSV_HEADER}")?;
    for row in &rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    out.flush()?;
    if config.preset == Preset::OracleVerify {
        for row in &rows {
            if row.epsilon > row.epsilon_tail_bound {
                return Err(Error::Numeric(format!(
                    "oracle comparison at n={} deviates by {:.3e} (tolerance {:.1e})",
                    row.n, row.epsilon, row.epsilon_tail_bound
                )));
            }
        }
    }
    Ok(())
}

struct SweepPoint {
    n: u32,
    p: f64,
    s: f64,
}

fn sweep_points(config: &ExperimentConfig) -> Vec<SweepPoint> {
    match config.preset {
        // Oracle verification sweeps sizes; p and s vary inside.
        Preset::OracleVerify => config
            .n_list
            .iter()
            .map(|n| SweepPoint {
                n: *n,
                p: config.p_list[0],
                s: config.s_list[0],
            })
            .collect(),
        _ => {
            let mut points = Vec::new();
            for n in &config.n_list {
                for p in &config.p_list {
                    for s in &config.s_list {
                        points.push(SweepPoint {
                            n: *n,
                            p: *p,
                            s: *s,
                        });
                    }
                }
            }
            points
        }
    }
}

fn compute_point(config: &ExperimentConfig, point: &SweepPoint) -> Result<Vec<ResultRow>> {
    let start = Instant::now();
    let (n, p, s) = (point.n, point.p, point.s);
    let base_row = |preset: String| -> Result<ResultRow> {
        let (dim, count) = memory_shape(n, p, s, config.x, config.mode)?;
        let report = crate::compressor::MemoryReport::from_dims(n, config.x, dim, count);
        Ok(ResultRow {
            preset,
            n,
            p,
            s,
            x: config.x,
            mode: config.mode,
            epsilon: 0.0,
            epsilon_tail_bound: 1.0,
            lemma2_bound: error_bound(n, p)?,
            qubits_exact: report.qubits_exact,
            qubits_bound: report.paper_qubit_bound,
            cbits_exact: report.cbits_exact,
            quantum_dim: dim,
            classical_count: count,
            runtime_ms: 0,
        })
    };
    let mut rows = match config.preset {
        Preset::ErrorScan | Preset::BoundCompare => {
            let params = ClockParams::new(n, s, p, 0.0)?;
            let est = match &config.t_grid {
                Some(grid) => {
                    compression_error_on_grid(params, config.mode, config.x, config.restrict_tail, grid)?
                }
                None => compression_error(params, config.mode, config.x, config.restrict_tail)?,
            };
            let mut row = base_row(config.preset.to_string())?;
            row.epsilon = est.epsilon;
            row.epsilon_tail_bound = est.upper();
            if config.preset == Preset::BoundCompare && est.upper() > 3.0 * row.lemma2_bound {
                eprintln!(
                    "bound-compare: n={n} p={p} s={s}: exact error {:.6e} exceeds 3x bound {:.6e}",
                    est.upper(),
                    row.lemma2_bound
                );
            }
            vec![row]
        }
        Preset::MemoryScan => vec![base_row(config.preset.to_string())?],
        Preset::Converse => {
            let params = ClockParams::new(n, s, p, 0.0)?;
            let eps = starved_run(params, config.x)?;
            let window = Window::with_half_width(
                known_target(n, p)?,
                s,
                f64::from(n).powf(config.x) / 2.0,
            )?;
            let mut row = base_row(config.preset.to_string())?;
            row.epsilon = eps;
            row.epsilon_tail_bound = eps;
            row.quantum_dim = window.len();
            row.classical_count = 1;
            row.qubits_exact = (window.len() as f64).log2();
            row.cbits_exact = 0.0;
            vec![row]
        }
        Preset::OracleVerify => {
            let dev = oracle_deviation(config, n)?;
            let mut row = base_row(config.preset.to_string())?;
            row.epsilon = dev;
            row.epsilon_tail_bound = ORACLE_TOLERANCE;
            vec![row]
        }
        Preset::ProjectionBasisDiagnostic => {
            let target = known_target(n, p)?;
            let block = rho_pj(p, target, s)?;
            let window = Window::new(target, s)?;
            let mut out = Vec::new();
            for (suffix, projected) in [
                ("z", frequency_projection(target, s, &block, None)?),
                ("s", frequency_projection_s_basis(target, s, &block, None)?),
            ] {
                let eps = 0.5 * trace_norm_hermitian(&(projected - &block));
                let mut row = base_row(format!("{}/{suffix}", config.preset))?;
                row.epsilon = eps;
                row.epsilon_tail_bound = eps;
                row.quantum_dim = window.len();
                row.classical_count = 1;
                out.push(row);
            }
            out
        }
    };
    let elapsed = start.elapsed().as_millis();
    for row in &mut rows {
        row.runtime_ms = elapsed;
    }
    Ok(rows)
}

const ORACLE_TOLERANCE: f64 = 1e-9;

/// Worst deviation between the block pipeline and the full-space
/// oracles at size n: decomposition weights and blocks across the
/// (p, s, t) sweep, plus conversions on seeded random states for all
/// spin pairs feasible at that size.
fn oracle_deviation(config: &ExperimentConfig, n: u32) -> Result<f64> {
    if n > MAX_ORACLE_COPIES {
        return Err(Error::SizeRefusal(format!(
            "oracle-verify needs n <= {MAX_ORACLE_COPIES}, got {n}"
        )));
    }
    let t_values = config.t_grid.clone().unwrap_or_else(|| vec![0.0, 1.1]);
    let mut worst = 0.0f64;
    for p in &config.p_list {
        for s in &config.s_list {
            for t in &t_values {
                let params = ClockParams::new(n, *s, *p, *t)?;
                let fast = build_block_state(params)?;
                let slow = oracle_blocks(params)?;
                for (j, q) in qj_weights(n, *p)? {
                    let qf = fast.block(j).map_or(0.0, |b| b.weight);
                    let qs = slow.block(j).map_or(0.0, |b| b.weight);
                    worst = worst.max((qf - q).abs()).max((qs - q).abs());
                    if let (Some(bf), Some(bs)) = (fast.block(j), slow.block(j)) {
                        worst = worst.max(max_abs_diff(&bf.mat, &bs.mat));
                    }
                }
            }
        }
    }
    let max_tw = n.min(6);
    for tj in 1..=max_tw {
        for tk in 1..=max_tw {
            let (j, k) = (Spin::new(tj), Spin::new(tk));
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(
                config
                    .seed
                    .wrapping_mul(1_000_003)
                    .wrapping_add(u64::from(n * 64 + tj * 8 + tk)),
            );
            for _ in 0..3 {
                let mut input = random_psd(j.dim(), &mut rng);
                input /= crate::linalg::Cx::new(trace_re(&input), 0.0);
                let fast = crate::channels::convert(j, k, &input)?;
                let slow = oracle_convert(j, k, &input)?;
                worst = worst.max(max_abs_diff(&fast, &slow));
            }
        }
    }
    Ok(worst)
}

//! End-to-end compression pipelines: the interval partition over the
//! spin grid, known- and unknown-spectrum encoders and decoders, exact
//! output-state error evaluation over a time grid, the analytic error
//! bound, and memory accounting.
//!
//! Everything is computed as exact mixtures: the protocol's
//! measurements and sampling steps are replaced by their expectation
//! values, which is what the reported trace-distance error compares
//! against. A seeded Monte-Carlo decoder exists in the tests purely to
//! confirm that replacement.

use crate::channels::{convert, convert_restricted, embed_from_window, Window};
use crate::clockstate::{
    evolve, qj_weights, rho_pj, spin_at_position, spin_grid_len, Block, BlockState, ClockParams,
    WEIGHT_FLOOR,
};
use crate::linalg::{CMat, Cx};
use crate::repkit::Spin;
use crate::{Error, Result};

/// Whether the compressor may assume the spectrum value p.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Known,
    Unknown,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "known" => Ok(Mode::Known),
            "unknown" => Ok(Mode::Unknown),
            other => Err(Error::Config(format!(
                "mode must be 'known' or 'unknown', got '{other}'"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Known => "known",
            Mode::Unknown => "unknown",
        })
    }
}

/// Whether the exact computation restricts itself to the spins that
/// carry non-negligible weight. `Auto` switches the restriction on
/// above n = 512, where the unrestricted cost becomes cubic overkill;
/// the excluded mass is always reported as a rigorous error increment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TailRestriction {
    #[default]
    Auto,
    Always,
    Never,
}

impl TailRestriction {
    fn active(self, n: u32) -> bool {
        match self {
            TailRestriction::Auto => n > 512,
            TailRestriction::Always => true,
            TailRestriction::Never => false,
        }
    }
}

/// Exact compression error together with the rigorous upper-bound
/// increment for weight excluded by a tail restriction. The true error
/// lies in [epsilon, epsilon + tail_bound]; tail_bound is 0 when
/// nothing was excluded.
#[derive(Clone, Copy, Debug)]
pub struct ErrorEstimate {
    pub epsilon: f64,
    pub tail_bound: f64,
}

impl ErrorEstimate {
    pub fn upper(&self) -> f64 {
        self.epsilon + self.tail_bound
    }
}

/// Partition of the spin-grid positions {0, ..., G} into b intervals,
/// with the top grid point singled out as the last interval. Positions
/// index the ascending J grid; `medians` hold the in-set anchor spins
/// (upper midpoints), `None` for permitted empty trailing intervals.
#[derive(Clone, Debug)]
pub struct Partition {
    pub n: u32,
    pub x: f64,
    pub b: usize,
    pub r: usize,
    pub intervals: Vec<Vec<usize>>,
    pub medians: Vec<Option<Spin>>,
}

/// Builds the b = floor(n^(1/2+x)) interval partition: intervals of
/// width r cover the non-top positions, the remainder forms interval
/// b-1, and the top point is interval b. The width is
/// r = ceil((G-1)/(b-1)), the smallest integer admitted by the
/// constraint r(b-2) < G-1 <= r(b-1) and also the fallback when no
/// integer satisfies it (which happens, e.g. n = 100, x = 0.1).
pub fn make_partition(n: u32, x: f64) -> Result<Partition> {
    if n < 4 {
        return Err(Error::Argument(format!("partition needs n >= 4, got {n}")));
    }
    if !(x > 0.0 && x < 0.5) {
        return Err(Error::Argument(format!("exponent x={x} outside (0, 1/2)")));
    }
    let b = f64::from(n).powf(0.5 + x).floor() as usize;
    if b < 3 {
        return Err(Error::Config(format!(
            "n={n} too small for x={x}: only {b} intervals"
        )));
    }
    let top = spin_grid_len(n) - 1;
    let last_covered = top - 1;
    let r = last_covered.div_ceil(b - 1).max(1);
    let mut intervals: Vec<Vec<usize>> = Vec::with_capacity(b);
    for m in 1..=(b - 2) {
        intervals.push(((m - 1) * r..m * r).filter(|pos| *pos < top).collect());
    }
    let covered = (b - 2) * r;
    intervals.push((covered.min(top)..top).collect());
    intervals.push(vec![top]);
    let medians = intervals
        .iter()
        .map(|members| {
            members
                .first()
                .map(|first| spin_at_position(n, (first + members.last().unwrap()).div_ceil(2)))
        })
        .collect();
    Ok(Partition {
        n,
        x,
        b,
        r,
        intervals,
        medians,
    })
}

impl Partition {
    /// The 1-based classical index i with J in L_i.
    pub fn index_of(&self, j: Spin) -> usize {
        let pos = crate::clockstate::grid_position(self.n, j);
        let top = spin_grid_len(self.n) - 1;
        if pos == top {
            self.b
        } else if pos < self.r * (self.b - 2) {
            pos / self.r + 1
        } else {
            self.b - 1
        }
    }

    /// Members of the 1-based interval i as spins, ascending.
    pub fn members(&self, i: usize) -> impl Iterator<Item = Spin> + '_ {
        self.intervals[i - 1]
            .iter()
            .map(|pos| spin_at_position(self.n, *pos))
    }
}

/// One classical branch of a compressed record: its probability, the
/// window at the reference spin, and the stored block on that window.
#[derive(Clone, Debug)]
pub struct RecordEntry {
    /// 1-based classical index (always 1 for known spectrum).
    pub index: usize,
    pub prob: f64,
    pub window: Window,
    pub block: CMat,
}

/// Output of an encoder: everything the matching decoder consumes.
#[derive(Clone, Debug)]
pub struct CompressedRecord {
    pub n: u32,
    pub p: f64,
    pub s: f64,
    pub mode: Mode,
    pub entries: Vec<RecordEntry>,
    /// Largest stored block dimension (the quantum memory).
    pub quantum_dim: usize,
    /// Number of classical index values (1 for known spectrum).
    pub classical_count: usize,
}

/// Memory accounting for a compressed record against the analytic
/// targets.
#[derive(Clone, Copy, Debug)]
pub struct MemoryReport {
    pub qubits_exact: f64,
    pub qubits_ceil: u32,
    pub cbits_exact: f64,
    pub cbits_ceil: u32,
    pub paper_qubit_bound: f64,
    pub paper_cbit_bound: f64,
}

impl MemoryReport {
    pub fn from_dims(n: u32, x: f64, quantum_dim: usize, classical_count: usize) -> Self {
        let nf = f64::from(n);
        let qubits_exact = (quantum_dim as f64).log2();
        let cbits_exact = (classical_count as f64).log2();
        MemoryReport {
            qubits_exact,
            qubits_ceil: qubits_exact.ceil() as u32,
            cbits_exact,
            cbits_ceil: cbits_exact.ceil() as u32,
            paper_qubit_bound: 0.5 * nf.log2() + nf.log2().log2() + 1.0,
            paper_cbit_bound: (0.5 + x) * nf.log2(),
        }
    }
}

/// Memory accounting for an existing record.
pub fn memory_report(rec: &CompressedRecord, x: f64) -> MemoryReport {
    MemoryReport::from_dims(rec.n, x, rec.quantum_dim, rec.classical_count)
}

/// Memory dimensions of the protocol without running it: the window
/// size at the reference spin(s) and the classical index count.
pub fn memory_shape(n: u32, p: f64, s: f64, x: f64, mode: Mode) -> Result<(usize, usize)> {
    match mode {
        Mode::Known => {
            let window = Window::new(known_target(n, p)?, s)?;
            Ok((window.len(), 1))
        }
        Mode::Unknown => {
            let partition = make_partition(n, x)?;
            let mut dim = 1;
            for median in partition.medians.iter().flatten() {
                dim = dim.max(Window::new(*median, s)?.len());
            }
            Ok((dim, partition.b))
        }
    }
}

/// The known-spectrum reference spin J0*: the grid value nearest
/// min((p-1/2)(n+1), n/2), clipped to the grid, ties toward larger J.
pub fn known_target(n: u32, p: f64) -> Result<Spin> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::Argument(format!("spectrum p={p} outside (1/2, 1]")));
    }
    let target = ((p - 0.5) * (f64::from(n) + 1.0)).min(f64::from(n) / 2.0);
    let parity = i64::from(n % 2);
    let doubled = 2.0 * target;
    let mut lower = (doubled.floor() as i64 - parity).div_euclid(2) * 2 + parity;
    if lower > doubled.ceil() as i64 {
        lower -= 2;
    }
    let upper = lower + 2;
    let tw = if (doubled - lower as f64) <= (upper as f64 - doubled) && lower as f64 <= doubled {
        if (doubled - lower as f64) == (upper as f64 - doubled) {
            upper
        } else {
            lower
        }
    } else {
        upper
    };
    let clipped = tw.clamp(parity, i64::from(n));
    Ok(Spin::new(clipped as u32))
}

/// sigma projected by the frequency window, in window coordinates: the
/// kept square plus the clipped weight rerouted to the default anchor
/// state. `total` is the trace the input would have had without any
/// restriction (1 for a normalized source).
fn finish_window_projection(mut sigma: CMat, window: &Window, total: f64) -> CMat {
    let mut kept = 0.0;
    for i in 0..sigma.nrows() {
        kept += sigma[(i, i)].re;
    }
    let anchor_local = window.j.index_of(window.anchor()) - window.row_range().0;
    sigma[(anchor_local, anchor_local)] += Cx::new(total - kept, 0.0);
    sigma
}

/// Known-spectrum encoder: converts every block to J0*, averages with
/// the q_J weights (the exact mixture replacing the measurement), and
/// projects onto the frequency window at J0*.
pub fn encode_known(state: &BlockState, p: f64, s: f64) -> Result<CompressedRecord> {
    let target = known_target(state.n, p)?;
    let window = Window::new(target, s)?;
    let (lo, len) = window.row_range();
    let mut sigma = CMat::zeros(len, len);
    for block in &state.blocks {
        sigma += convert_restricted(block.j, target, &block.mat, lo, len).scale(block.weight);
    }
    let block = finish_window_projection(sigma, &window, 1.0);
    Ok(CompressedRecord {
        n: state.n,
        p,
        s,
        mode: Mode::Known,
        quantum_dim: window.len(),
        classical_count: 1,
        entries: vec![RecordEntry {
            index: 1,
            prob: 1.0,
            window,
            block,
        }],
    })
}

/// Known-spectrum decoder: the exact mixture over the sampled spin K,
/// output block K = convert(J0*, K, stored block) with weight q_K.
pub fn decode_known(rec: &CompressedRecord, n: u32, p: f64, s: f64) -> Result<BlockState> {
    if rec.mode != Mode::Known || rec.n != n {
        return Err(Error::Argument(format!(
            "record is {} over n={}, expected known over n={n}",
            rec.mode, rec.n
        )));
    }
    let _ = s;
    let entry = &rec.entries[0];
    let full = embed_from_window(&entry.block, &entry.window);
    let mut blocks = Vec::new();
    let mut skipped = 0.0;
    for (k, q) in qj_weights(n, p)? {
        if q < WEIGHT_FLOOR {
            skipped += q;
            continue;
        }
        blocks.push(Block {
            j: k,
            weight: q,
            mat: convert(entry.window.j, k, &full)?,
        });
    }
    Ok(BlockState {
        n,
        blocks,
        skipped_mass: skipped,
    })
}

/// Unknown-spectrum encoder: per interval, converts the members to the
/// interval median, mixes with the conditional weights, and projects
/// onto the window at the median. Intervals with zero mass produce no
/// entry; the classical count stays b.
pub fn encode_unknown(state: &BlockState, partition: &Partition, s: f64) -> Result<CompressedRecord> {
    if partition.n != state.n {
        return Err(Error::Argument(format!(
            "partition over n={} does not match state over n={}",
            partition.n, state.n
        )));
    }
    let weight_of = |j: Spin| state.block(j).map_or(0.0, |blk| blk.weight);
    let mut entries = Vec::new();
    let mut quantum_dim = 1;
    for i in 1..=partition.b {
        let Some(median) = partition.medians[i - 1] else {
            continue;
        };
        let prob: f64 = partition.members(i).map(weight_of).sum();
        if prob <= 0.0 {
            continue;
        }
        let window = Window::new(median, s)?;
        let (lo, len) = window.row_range();
        let mut sigma = CMat::zeros(len, len);
        for j in partition.members(i) {
            if let Some(block) = state.block(j) {
                sigma +=
                    convert_restricted(j, median, &block.mat, lo, len).scale(block.weight / prob);
            }
        }
        let block = finish_window_projection(sigma, &window, 1.0);
        quantum_dim = quantum_dim.max(window.len());
        entries.push(RecordEntry {
            index: i,
            prob,
            window,
            block,
        });
    }
    Ok(CompressedRecord {
        n: state.n,
        p: f64::NAN,
        s,
        mode: Mode::Unknown,
        entries,
        quantum_dim,
        classical_count: partition.b,
    })
}

/// Unknown-spectrum decoder: for each stored interval, spreads the
/// interval probability uniformly over its members and converts the
/// stored block from the median to each member spin.
pub fn decode_unknown(rec: &CompressedRecord, partition: &Partition, n: u32) -> Result<BlockState> {
    if rec.mode != Mode::Unknown || rec.n != n || partition.n != n {
        return Err(Error::Argument(format!(
            "record is {} over n={}, expected unknown over n={n}",
            rec.mode, rec.n
        )));
    }
    let mut blocks = Vec::new();
    let mut total = 0.0;
    for entry in &rec.entries {
        let full = embed_from_window(&entry.block, &entry.window);
        let share = entry.prob / partition.intervals[entry.index - 1].len() as f64;
        for k in partition.members(entry.index) {
            blocks.push(Block {
                j: k,
                weight: share,
                mat: convert(entry.window.j, k, &full)?,
            });
            total += share;
        }
    }
    blocks.sort_by_key(|blk| std::cmp::Reverse(blk.j));
    Ok(BlockState {
        n,
        blocks,
        skipped_mass: 1.0 - total,
    })
}

/// Analytic compression error bound:
/// (n/(2p-1))^(-1/2) + (3/2)[(p-1/2)n]^(-(1/8) ln(p/(1-p))), the
/// second term dropping at p = 1.
pub fn error_bound(n: u32, p: f64) -> Result<f64> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::Argument(format!("spectrum p={p} outside (1/2, 1]")));
    }
    let nf = f64::from(n);
    let first = ((2.0 * p - 1.0) / nf).sqrt();
    if p == 1.0 {
        return Ok(first);
    }
    let second = 1.5 * (-((p - 0.5) * nf).ln() * (p / (1.0 - p)).ln() / 8.0).exp();
    Ok(first + second)
}

/// The worst-case time grid: phase covariance makes the error
/// t-independent, so four spread-out points both exercise and verify
/// that.
const T_GRID: [f64; 4] = [0.0, 0.7, std::f64::consts::PI, 2.1];

/// Exact compression error of the full pipeline: the trace distance
/// between the n-copy clock state and decode(encode(state)), maximized
/// over the time grid. The four grid values must agree to 1e-9 (phase
/// covariance) or the run aborts with a numeric error. With an active
/// tail restriction the excluded weight is returned as `tail_bound`.
pub fn compression_error(
    params: ClockParams,
    mode: Mode,
    x: f64,
    restrict: TailRestriction,
) -> Result<ErrorEstimate> {
    pipeline_error(params, mode, x, restrict, None, &T_GRID)
}

/// [`compression_error`] on a caller-chosen time grid instead of the
/// default one; the cross-grid agreement check applies unchanged.
pub fn compression_error_on_grid(
    params: ClockParams,
    mode: Mode,
    x: f64,
    restrict: TailRestriction,
    grid: &[f64],
) -> Result<ErrorEstimate> {
    if grid.is_empty() {
        return Err(Error::Argument("time grid must be nonempty".into()));
    }
    for t in grid {
        if !(0.0..std::f64::consts::TAU).contains(t) {
            return Err(Error::Argument(format!("grid time {t} outside [0, 2pi)")));
        }
    }
    pipeline_error(params, mode, x, restrict, None, grid)
}

/// Known-spectrum pipeline with the window half-width forced to
/// n^w / 2 grid steps, modelling a quantum memory of dimension O(n^w).
/// Returns the upper end of the error interval (the tail increment is
/// zero unless a restriction excluded weight).
pub fn starved_run(params: ClockParams, width_exponent: f64) -> Result<f64> {
    if !(width_exponent > 0.0 && width_exponent < 0.5) {
        return Err(Error::Argument(format!(
            "width exponent {width_exponent} outside (0, 1/2)"
        )));
    }
    let half_width = f64::from(params.n).powf(width_exponent) / 2.0;
    let estimate = pipeline_error(
        params,
        Mode::Known,
        0.25,
        TailRestriction::Auto,
        Some(half_width),
        &T_GRID,
    )?;
    Ok(estimate.upper().min(1.0))
}

/// Spins the known-mode restriction keeps: within
/// ceil(4 sqrt(n p (1-p) ln n)) grid steps of J0*.
fn known_radius(n: u32, p: f64) -> i64 {
    let nf = f64::from(n);
    (4.0 * (nf * p * (1.0 - p) * nf.ln()).sqrt()).ceil() as i64
}

fn pipeline_error(
    params: ClockParams,
    mode: Mode,
    x: f64,
    restrict: TailRestriction,
    width_override: Option<f64>,
    grid: &[f64],
) -> Result<ErrorEstimate> {
    let n = params.n;
    let weights = qj_weights(n, params.p)?;
    let active = restrict.active(n);
    match mode {
        Mode::Known => {
            let target = known_target(n, params.p)?;
            let window = match width_override {
                Some(hw) => Window::with_half_width(target, params.s, hw)?,
                None => Window::new(target, params.s)?,
            };
            let radius = known_radius(n, params.p);
            let kept: Vec<(Spin, f64)> = weights
                .iter()
                .filter(|(j, q)| {
                    *q >= WEIGHT_FLOOR
                        && (!active
                            || (i64::from(j.twice_j()) - i64::from(target.twice_j())).abs()
                                <= 2 * radius)
                })
                .copied()
                .collect();
            let included: f64 = kept.iter().map(|(_, q)| q).sum();
            let excluded = (1.0 - included).max(0.0);
            // Encode once per time point, sharing the per-spin block
            // construction across the grid.
            let (lo, len) = window.row_range();
            let mut sigmas = vec![CMat::zeros(len, len); grid.len()];
            for (j, q) in &kept {
                let base = rho_pj(params.p, *j, params.s)?;
                for (ti, t) in grid.iter().enumerate() {
                    sigmas[ti] +=
                        convert_restricted(*j, target, &evolve(&base, *t), lo, len).scale(*q);
                }
            }
            let embedded: Vec<CMat> = sigmas
                .into_iter()
                .map(|sigma| {
                    embed_from_window(&finish_window_projection(sigma, &window, 1.0), &window)
                })
                .collect();
            let mut eps = vec![0.0f64; grid.len()];
            for (k, q) in &kept {
                let base = rho_pj(params.p, *k, params.s)?;
                for (ti, t) in grid.iter().enumerate() {
                    let decoded = convert(target, *k, &embedded[ti])?.scale(*q);
                    let diff = evolve(&base, *t).scale(*q) - decoded;
                    eps[ti] += crate::linalg::trace_norm_hermitian(&diff);
                }
            }
            let unmatched = excluded;
            let epsilon = finish_grid(&mut eps, unmatched)?;
            // Restricted encoding distorts the stored block by at most
            // the excluded mass, and restricted decoding omits that
            // same mass outright.
            Ok(ErrorEstimate {
                epsilon,
                tail_bound: 1.5 * excluded,
            })
        }
        Mode::Unknown => {
            let partition = make_partition(n, x)?;
            let weight_of = |j: Spin| {
                weights
                    .iter()
                    .find(|(jj, _)| *jj == j)
                    .map_or(0.0, |(_, q)| *q)
            };
            let mut eps = vec![0.0f64; grid.len()];
            let mut excluded = 0.0;
            for i in 1..=partition.b {
                let Some(median) = partition.medians[i - 1] else {
                    continue;
                };
                let prob: f64 = partition.members(i).map(weight_of).sum();
                if prob <= 0.0 {
                    continue;
                }
                if active && prob <= 1e-12 {
                    excluded += prob;
                    continue;
                }
                let window = Window::new(median, params.s)?;
                let (lo, len) = window.row_range();
                let mut sigmas = vec![CMat::zeros(len, len); grid.len()];
                let mut bases: Vec<(Spin, f64, CMat)> = Vec::new();
                for j in partition.members(i) {
                    let q = weight_of(j);
                    let base = rho_pj(params.p, j, params.s)?;
                    if q >= WEIGHT_FLOOR {
                        for (ti, t) in grid.iter().enumerate() {
                            sigmas[ti] += convert_restricted(j, median, &evolve(&base, *t), lo, len)
                                .scale(q / prob);
                        }
                    }
                    bases.push((j, q, base));
                }
                let embedded: Vec<CMat> = sigmas
                    .into_iter()
                    .map(|sigma| {
                        embed_from_window(&finish_window_projection(sigma, &window, 1.0), &window)
                    })
                    .collect();
                let share = prob / partition.intervals[i - 1].len() as f64;
                for (k, q, base) in &bases {
                    for (ti, t) in grid.iter().enumerate() {
                        let decoded = convert(median, *k, &embedded[ti])?.scale(share);
                        let diff = evolve(base, *t).scale(*q) - decoded;
                        eps[ti] += crate::linalg::trace_norm_hermitian(&diff);
                    }
                }
            }
            let epsilon = finish_grid(&mut eps, excluded)?;
            Ok(ErrorEstimate {
                epsilon,
                tail_bound: excluded,
            })
        }
    }
}

/// Folds unmatched original weight into each grid value, checks the
/// phase-covariance agreement, and returns the maximum.
fn finish_grid(eps: &mut [f64], unmatched: f64) -> Result<f64> {
    for e in eps.iter_mut() {
        if !e.is_finite() {
            return Err(Error::Numeric(
                "trace-distance accumulation produced a non-finite value".into(),
            ));
        }
        *e = 0.5 * (*e + unmatched);
    }
    let max = eps.iter().copied().fold(0.0, f64::max);
    let min = eps.iter().copied().fold(f64::INFINITY, f64::min);
    if max - min > 1e-9 {
        return Err(Error::Numeric(format!(
            "time-grid errors disagree by {:.3e}; phase covariance is broken",
            max - min
        )));
    }
    Ok(max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::frequency_projection;
    use crate::clockstate::{build_block_state, trace_distance};
    use crate::linalg::{
        hermiticity_defect, max_abs_diff, min_eigenvalue, trace_norm_hermitian, trace_re,
    };
    use crate::oracle::{oracle_blocks, oracle_convert};

    #[test]
    fn partition_eight_copies_reference() {
        let part = make_partition(8, 0.1).unwrap();
        assert_eq!((part.b, part.r), (3, 2));
        assert_eq!(part.intervals, vec![vec![0, 1], vec![2, 3], vec![4]]);
        let med: Vec<u32> = part
            .medians
            .iter()
            .map(|m| m.unwrap().twice_j() / 2)
            .collect();
        assert_eq!(med, vec![1, 3, 4]);
        assert_eq!(part.index_of(Spin::new(0)), 1);
        assert_eq!(part.index_of(Spin::new(6)), 2);
        assert_eq!(part.index_of(Spin::new(8)), 3);
    }

    #[test]
    fn partition_hundred_copies_uses_fallback_width() {
        let part = make_partition(100, 0.1).unwrap();
        assert_eq!(part.b, 15);
        // No integer r satisfies 13r < 49 <= 14r.
        assert!((1..=49).all(|r| !(r * 13 < 49 && 49 <= r * 14)));
        assert_eq!(part.r, 4);
        assert!(part.intervals[13].is_empty());
        assert!(part.medians[13].is_none());
        assert_eq!(part.intervals[14], vec![50]);
    }

    #[test]
    fn partition_covers_grid_disjointly() {
        for (n, x) in [(8u32, 0.1), (9, 0.1), (100, 0.1), (57, 0.3), (300, 0.05)] {
            let part = make_partition(n, x).unwrap();
            let mut seen = vec![false; spin_grid_len(n)];
            for (idx, members) in part.intervals.iter().enumerate() {
                for pos in members {
                    assert!(!seen[*pos], "position {pos} covered twice at n={n}");
                    seen[*pos] = true;
                    assert_eq!(part.index_of(spin_at_position(n, *pos)), idx + 1);
                }
                if let Some(median) = part.medians[idx] {
                    assert!(members.contains(&crate::clockstate::grid_position(n, median)));
                } else {
                    assert!(members.is_empty());
                }
            }
            assert!(seen.iter().all(|s| *s), "grid not covered at n={n}");
            assert_eq!(*part.intervals.last().unwrap(), vec![spin_grid_len(n) - 1]);
            assert!(part.intervals[..part.b - 2].iter().all(|m| m.len() <= part.r));
        }
    }

    #[test]
    fn partition_rejects_bad_arguments() {
        assert!(matches!(make_partition(3, 0.1), Err(Error::Argument(_))));
        assert!(matches!(make_partition(8, 0.0), Err(Error::Argument(_))));
        assert!(matches!(make_partition(8, 0.5), Err(Error::Argument(_))));
        assert!(matches!(make_partition(4, 0.1), Err(Error::Config(_))));
    }

    #[test]
    fn known_target_reference_points() {
        assert_eq!(known_target(8, 0.8).unwrap(), Spin::new(6));
        assert_eq!(known_target(8, 1.0).unwrap(), Spin::new(8));
        assert_eq!(known_target(1024, 0.8).unwrap(), Spin::new(616));
        // Half-integer grid.
        assert_eq!(known_target(5, 0.8).unwrap(), Spin::new(3));
        // Clipping at the top of the grid.
        assert_eq!(known_target(8, 0.99).unwrap(), Spin::new(8));
    }

    fn record_invariants(rec: &CompressedRecord) {
        let total: f64 = rec.entries.iter().map(|e| e.prob).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for entry in &rec.entries {
            assert_eq!(entry.block.nrows(), entry.window.len());
            assert!((trace_re(&entry.block) - 1.0).abs() < 1e-12);
            assert!(hermiticity_defect(&entry.block) < 1e-12);
            assert!(min_eigenvalue(&entry.block) > -1e-10);
        }
        assert_eq!(
            rec.quantum_dim,
            rec.entries.iter().map(|e| e.window.len()).max().unwrap()
        );
    }

    #[test]
    fn encode_known_reference_behaviour() {
        let state = build_block_state(ClockParams::new(8, 0.5, 0.8, 0.7).unwrap()).unwrap();
        let rec = encode_known(&state, 0.8, 0.5).unwrap();
        assert_eq!(rec.entries[0].window.j, Spin::new(6));
        assert_eq!(rec.classical_count, 1);
        record_invariants(&rec);
        let j0 = 3.0f64;
        let cap = 2.0 * (j0.sqrt() * j0.ln() / 2.0).floor() + 1.0;
        assert!(rec.quantum_dim as f64 <= cap);

        let pure = build_block_state(ClockParams::new(8, 0.5, 1.0, 0.0).unwrap()).unwrap();
        let rec = encode_known(&pure, 1.0, 0.5).unwrap();
        assert_eq!(rec.entries[0].window.j, Spin::new(8));
        record_invariants(&rec);
    }

    #[test]
    fn decode_known_weights_and_pure_support() {
        let params = ClockParams::new(6, 0.4, 0.85, 1.1).unwrap();
        let state = build_block_state(params).unwrap();
        let rec = encode_known(&state, 0.85, 0.4).unwrap();
        let decoded = decode_known(&rec, 6, 0.85, 0.4).unwrap();
        let q = qj_weights(6, 0.85).unwrap();
        assert_eq!(decoded.blocks.len(), q.len());
        for (blk, (j, w)) in decoded.blocks.iter().zip(q.iter()) {
            assert_eq!(blk.j, *j);
            assert_eq!(blk.weight, *w);
            assert!((trace_re(&blk.mat) - 1.0).abs() < 1e-12);
            assert!(min_eigenvalue(&blk.mat) > -1e-10);
        }
        assert!((decoded.total_weight() - 1.0).abs() < 1e-12);

        let pure = build_block_state(ClockParams::new(6, 0.5, 1.0, 0.0).unwrap()).unwrap();
        let rec = encode_known(&pure, 1.0, 0.5).unwrap();
        let decoded = decode_known(&rec, 6, 1.0, 0.5).unwrap();
        assert_eq!(decoded.blocks.len(), 1);
        assert_eq!(decoded.blocks[0].j, Spin::new(6));
    }

    #[test]
    fn encode_unknown_interval_probabilities() {
        let state = build_block_state(ClockParams::new(8, 0.5, 0.8, 0.0).unwrap()).unwrap();
        let part = make_partition(8, 0.1).unwrap();
        let rec = encode_unknown(&state, &part, 0.5).unwrap();
        record_invariants(&rec);
        assert_eq!(rec.classical_count, 3);
        let q = qj_weights(8, 0.8).unwrap();
        let by_j = |tj: u32| q.iter().find(|(j, _)| j.twice_j() == tj).unwrap().1;
        let expect = [
            by_j(0) + by_j(2),
            by_j(4) + by_j(6),
            by_j(8),
        ];
        for (entry, want) in rec.entries.iter().zip(expect.iter()) {
            assert!((entry.prob - want).abs() < 1e-13);
        }

        let pure = build_block_state(ClockParams::new(8, 0.5, 1.0, 0.0).unwrap()).unwrap();
        let rec = encode_unknown(&pure, &part, 0.5).unwrap();
        assert_eq!(rec.entries.len(), 1);
        assert_eq!(rec.entries[0].index, 3);
        assert!((rec.entries[0].prob - 1.0).abs() < 1e-15);
    }

    #[test]
    fn decode_unknown_uniform_interval_weights() {
        let params = ClockParams::new(8, 0.3, 0.8, 0.7).unwrap();
        let state = build_block_state(params).unwrap();
        let part = make_partition(8, 0.1).unwrap();
        let rec = encode_unknown(&state, &part, 0.3).unwrap();
        let decoded = decode_unknown(&rec, &part, 8).unwrap();
        assert!((decoded.total_weight() - 1.0).abs() < 1e-12);
        assert!(decoded.skipped_mass.abs() < 1e-12);
        for blk in &decoded.blocks {
            let i = part.index_of(blk.j);
            let prob = rec.entries.iter().find(|e| e.index == i).unwrap().prob;
            let want = prob / part.intervals[i - 1].len() as f64;
            assert!((blk.weight - want).abs() < 1e-13);
            assert!((trace_re(&blk.mat) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_pipeline_matches_full_space_oracle() {
        // Assemble the same pipeline from the brute-force pieces:
        // oracle decomposition, oracle conversions, shared projection.
        let params = ClockParams::new(6, 0.3, 0.8, 1.1).unwrap();
        let part = make_partition(6, 0.2).unwrap();

        let fast = decode_unknown(
            &encode_unknown(&build_block_state(params).unwrap(), &part, params.s).unwrap(),
            &part,
            6,
        )
        .unwrap();

        let reference_state = oracle_blocks(params).unwrap();
        let mut reference: Vec<(Spin, f64, CMat)> = Vec::new();
        for i in 1..=part.b {
            let Some(median) = part.medians[i - 1] else { continue };
            let prob: f64 = part
                .members(i)
                .map(|j| reference_state.block(j).map_or(0.0, |b| b.weight))
                .sum();
            if prob <= 0.0 {
                continue;
            }
            let mut sigma = CMat::zeros(median.dim(), median.dim());
            for j in part.members(i) {
                if let Some(blk) = reference_state.block(j) {
                    sigma += oracle_convert(j, median, &blk.mat).unwrap().scale(blk.weight / prob);
                }
            }
            let projected = frequency_projection(median, params.s, &sigma, None).unwrap();
            for k in part.members(i) {
                reference.push((
                    k,
                    prob / part.intervals[i - 1].len() as f64,
                    oracle_convert(median, k, &projected).unwrap(),
                ));
            }
        }
        reference.sort_by_key(|entry| std::cmp::Reverse(entry.0));

        assert_eq!(fast.blocks.len(), reference.len());
        for (blk, (j, w, mat)) in fast.blocks.iter().zip(reference.iter()) {
            assert_eq!(blk.j, *j);
            assert!((blk.weight - w).abs() < 1e-12);
            assert!(
                max_abs_diff(&blk.mat, mat) < 1e-8,
                "pipeline block mismatch at J={j}"
            );
        }
    }

    #[test]
    fn known_pipeline_matches_full_space_oracle() {
        let params = ClockParams::new(6, 0.5, 0.8, 0.7).unwrap();
        let fast_state = build_block_state(params).unwrap();
        let rec = encode_known(&fast_state, params.p, params.s).unwrap();
        let fast = decode_known(&rec, 6, params.p, params.s).unwrap();

        let reference_state = oracle_blocks(params).unwrap();
        let target = known_target(6, params.p).unwrap();
        let mut sigma = CMat::zeros(target.dim(), target.dim());
        for blk in &reference_state.blocks {
            sigma += oracle_convert(blk.j, target, &blk.mat).unwrap().scale(blk.weight);
        }
        let projected = frequency_projection(target, params.s, &sigma, None).unwrap();
        for blk in &fast.blocks {
            let want = oracle_convert(target, blk.j, &projected).unwrap();
            assert!(
                max_abs_diff(&blk.mat, &want) < 1e-8,
                "known pipeline mismatch at J={}",
                blk.j
            );
        }
    }

    #[test]
    fn monte_carlo_decoder_agrees_with_exact_mixture() {
        use rand::Rng;
        use rand::SeedableRng;
        let n = 6u32;
        let p = 0.8;
        let q = qj_weights(n, p).unwrap();
        let draws = 100_000usize;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(424242);
        let sample = |rng: &mut rand_chacha::ChaCha8Rng| -> usize {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (idx, (_, w)) in q.iter().enumerate() {
                acc += w;
                if u < acc {
                    return idx;
                }
            }
            q.len() - 1
        };

        // Known spectrum: the decoder draws K from q independently of
        // the measured J, so the cell weights are q_J q_K.
        let mut counts = vec![vec![0u32; q.len()]; q.len()];
        for _ in 0..draws {
            counts[sample(&mut rng)][sample(&mut rng)] += 1;
        }
        for (ja, row) in counts.iter().enumerate() {
            for (ka, count) in row.iter().enumerate() {
                let want = q[ja].1 * q[ka].1;
                if want < 1e-6 {
                    continue;
                }
                let stderr = (want * (1.0 - want) / draws as f64).sqrt();
                let got = f64::from(*count) / draws as f64;
                assert!(
                    (got - want).abs() <= 3.0 * stderr,
                    "known-mode cell ({ja},{ka}): got {got}, want {want}"
                );
            }
        }

        // Unknown spectrum: J fixes the interval, K is uniform in it.
        let part = make_partition(n, 0.2).unwrap();
        let mut counts = vec![vec![0u32; q.len()]; q.len()];
        for _ in 0..draws {
            let ja = sample(&mut rng);
            let i = part.index_of(q[ja].0);
            let members: Vec<Spin> = part.members(i).collect();
            let k = members[rng.gen_range(0..members.len())];
            let ka = q.iter().position(|(jj, _)| *jj == k).unwrap();
            counts[ja][ka] += 1;
        }
        for (ja, row) in counts.iter().enumerate() {
            for (ka, count) in row.iter().enumerate() {
                let i = part.index_of(q[ja].0);
                let in_interval = part.members(i).any(|j| j == q[ka].0);
                let want = if in_interval {
                    q[ja].1 / part.intervals[i - 1].len() as f64
                } else {
                    0.0
                };
                if want < 1e-6 {
                    assert_eq!(*count, 0, "impossible cell ({ja},{ka}) sampled");
                    continue;
                }
                let stderr = (want * (1.0 - want) / draws as f64).sqrt();
                let got = f64::from(*count) / draws as f64;
                assert!(
                    (got - want).abs() <= 3.0 * stderr,
                    "unknown-mode cell ({ja},{ka}): got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn error_bound_reference_points() {
        assert!((error_bound(1000, 1.0).unwrap() - 0.03162277660168379).abs() < 1e-15);
        let b = error_bound(1000, 0.8).unwrap();
        assert!((b - (0.024494897 + 0.558266)).abs() < 1e-4);
        assert!(error_bound(4000, 0.8).unwrap() < b);
        assert!(error_bound(100, 0.3).is_err());
    }

    #[test]
    fn compression_error_pure_states_shrink_with_n() {
        let mut last = f64::INFINITY;
        for n in [16u32, 64, 256] {
            let params = ClockParams::new(n, 0.5, 1.0, 0.0).unwrap();
            let est = compression_error(params, Mode::Unknown, 0.1, TailRestriction::Auto).unwrap();
            assert_eq!(est.tail_bound, 0.0);
            assert!((0.0..=1.0).contains(&est.epsilon));
            assert!(est.epsilon < last, "error did not shrink at n={n}");
            last = est.epsilon;
        }
        assert!(last < 0.1);
    }

    #[test]
    fn compression_error_pure_reduces_to_projection_error() {
        let n = 64u32;
        let params = ClockParams::new(n, 0.5, 1.0, 0.0).unwrap();
        let est = compression_error(params, Mode::Unknown, 0.1, TailRestriction::Auto).unwrap();
        let top = Spin::new(n);
        let block = rho_pj(1.0, top, 0.5).unwrap();
        let projected = frequency_projection(top, 0.5, &block, None).unwrap();
        let direct = 0.5 * trace_norm_hermitian(&(projected - &block));
        assert!(
            (est.epsilon - direct).abs() < 1e-12,
            "pure-state error {} is not the bare projection error {direct}",
            est.epsilon
        );
    }

    #[test]
    fn compression_error_stays_under_analytic_envelope() {
        for (n, p) in [(64u32, 0.9), (64, 1.0)] {
            let params = ClockParams::new(n, 0.5, p, 0.0).unwrap();
            let est = compression_error(params, Mode::Known, 0.1, TailRestriction::Auto).unwrap();
            let bound = 3.0 * error_bound(n, p).unwrap();
            assert!(
                est.upper() <= bound,
                "exact error {} escaped 3x analytic bound {bound} at n={n} p={p}",
                est.upper()
            );
        }
    }

    #[test]
    fn tail_restriction_brackets_exact_error() {
        // n large enough that the kept radius genuinely excludes the
        // far tail of q_J in both modes.
        let params = ClockParams::new(200, 0.4, 0.8, 0.0).unwrap();
        for mode in [Mode::Known, Mode::Unknown] {
            let exact = compression_error(params, mode, 0.1, TailRestriction::Never).unwrap();
            let restricted =
                compression_error(params, mode, 0.1, TailRestriction::Always).unwrap();
            assert!(
                restricted.tail_bound > 0.0,
                "{mode}: restriction excluded nothing"
            );
            assert!(restricted.tail_bound < 1e-6);
            assert!(
                (exact.epsilon - restricted.epsilon).abs() <= restricted.tail_bound + 1e-12,
                "{mode}: exact {} outside restricted bracket {} +- {}",
                exact.epsilon,
                restricted.epsilon,
                restricted.tail_bound
            );
        }
    }

    #[test]
    fn memory_reference_points() {
        let (dim, count) = memory_shape(1024, 0.8, 0.5, 0.1, Mode::Known).unwrap();
        assert_eq!((dim, count), (101, 1));
        let report = MemoryReport::from_dims(1024, 0.1, dim, count);
        assert!((report.qubits_exact - 101f64.log2()).abs() < 1e-14);
        assert!(report.qubits_exact <= report.paper_qubit_bound);
        assert!((report.paper_qubit_bound - (5.0 + 10f64.log2() + 1.0)).abs() < 1e-12);
        assert_eq!(report.cbits_ceil, 0);

        let (_, count) = memory_shape(8, 0.8, 0.5, 0.1, Mode::Unknown).unwrap();
        let report = MemoryReport::from_dims(8, 0.1, 3, count);
        assert_eq!(report.cbits_ceil, 2);
    }

    #[test]
    fn memory_stays_under_paper_bound() {
        for n in [16u32, 64, 256, 1024, 4096] {
            for mode in [Mode::Known, Mode::Unknown] {
                let (dim, count) = memory_shape(n, 0.8, 0.5, 0.1, mode).unwrap();
                let report = MemoryReport::from_dims(n, 0.1, dim, count);
                assert!(
                    report.qubits_exact <= report.paper_qubit_bound + 2.0,
                    "qubit bound violated at n={n} {mode}"
                );
                assert!(f64::from(report.cbits_ceil) <= report.paper_cbit_bound.ceil());
            }
        }
    }

    #[test]
    fn starved_runs_saturate_toward_full_error() {
        let mut last = 0.0;
        for n in [64u32, 256] {
            let params = ClockParams::new(n, 0.5, 1.0, 0.0).unwrap();
            let eps = starved_run(params, 0.3).unwrap();
            assert!((0.0..=1.0).contains(&eps));
            assert!(eps >= last, "starved error decreased at n={n}");
            last = eps;
        }
        assert!(last > 0.8, "starved error {last} did not approach 1");

        // When the override window covers the whole reference block
        // (J0* = 0 here) the starved pipeline is the unstarved one.
        let params = ClockParams::new(8, 0.3, 0.52, 0.7).unwrap();
        assert_eq!(known_target(8, 0.52).unwrap(), Spin::new(0));
        let covered = starved_run(params, 0.3).unwrap();
        let unstarved =
            compression_error(params, Mode::Known, 0.1, TailRestriction::Auto).unwrap();
        assert!((covered - unstarved.epsilon).abs() < 1e-13);
        assert!(starved_run(params, 0.0).is_err());
        assert!(starved_run(params, 0.5).is_err());
    }

    #[test]
    fn pipelines_accept_only_matching_records() {
        let state = build_block_state(ClockParams::new(8, 0.5, 0.8, 0.0).unwrap()).unwrap();
        let part = make_partition(8, 0.1).unwrap();
        let known = encode_known(&state, 0.8, 0.5).unwrap();
        let unknown = encode_unknown(&state, &part, 0.5).unwrap();
        assert!(decode_known(&unknown, 8, 0.8, 0.5).is_err());
        assert!(decode_unknown(&known, &part, 8).is_err());
        assert!(decode_known(&known, 6, 0.8, 0.5).is_err());
    }

    #[test]
    fn end_to_end_error_matches_direct_trace_distance() {
        // compression_error must equal the trace distance between the
        // materialized states from the public encode/decode path.
        let params = ClockParams::new(12, 0.3, 0.85, 0.7).unwrap();
        let est = compression_error(params, Mode::Known, 0.1, TailRestriction::Never).unwrap();
        let state = build_block_state(params).unwrap();
        let rec = encode_known(&state, params.p, params.s).unwrap();
        let decoded = decode_known(&rec, params.n, params.p, params.s).unwrap();
        let direct = trace_distance(&state, &decoded).unwrap();
        assert!(
            (est.epsilon - direct).abs() < 1e-11,
            "streamed error {} disagrees with materialized distance {direct}",
            est.epsilon
        );

        let part = make_partition(params.n, 0.1).unwrap();
        let est = compression_error(params, Mode::Unknown, 0.1, TailRestriction::Never).unwrap();
        let rec = encode_unknown(&state, &part, params.s).unwrap();
        let decoded = decode_unknown(&rec, &part, params.n).unwrap();
        let direct = trace_distance(&state, &decoded).unwrap();
        assert!(
            (est.epsilon - direct).abs() < 1e-11,
            "streamed unknown error {} disagrees with materialized distance {direct}",
            est.epsilon
        );
    }
}

//! Construction and algebra of n-copy clock states in total-spin block
//! coordinates: the q_J weights, the per-spin blocks, time evolution,
//! and trace distance between block states.
//!
//! A clock state is rho_{t,p} = p |phi_t><phi_t| + (1-p)
//! |phi_t_perp><phi_t_perp| with phi_t = sqrt(s)|0> + sqrt(1-s)
//! e^{it}|1>. Its n-fold tensor power decomposes into total-spin blocks
//! with weights q_J, a fixed (2J+1)-dimensional state per block, and a
//! maximally mixed multiplicity register. The multiplicity register is
//! maximally mixed on both sides of every comparison made here, so the
//! trace norm factorizes and the multiplicity dimension drops out;
//! blocks are all this module ever stores.

use crate::linalg::{complexify, trace_norm_hermitian, CMat, Cx, RMat};
use crate::repkit::{rotation_angle, wigner_d_column, Spin};
use crate::{Error, Result};

/// Weights below this are dropped from block construction to avoid
/// denormal churn; the skipped mass is tracked on the state.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// The tuple (n, s, p, t) defining rho_{t,p}^{tensor n}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClockParams {
    pub n: u32,
    pub s: f64,
    pub p: f64,
    pub t: f64,
}

impl ClockParams {
    pub fn new(n: u32, s: f64, p: f64, t: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::Argument("copy count n must be at least 1".into()));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Argument(format!("s={s} outside (0, 1)")));
        }
        if !(p > 0.5 && p <= 1.0) {
            return Err(Error::Argument(format!("spectrum p={p} outside (1/2, 1]")));
        }
        if !(0.0..std::f64::consts::TAU).contains(&t) {
            return Err(Error::Argument(format!("time t={t} outside [0, 2*pi)")));
        }
        Ok(ClockParams { n, s, p, t })
    }

    pub fn with_t(self, t: f64) -> Self {
        ClockParams { t, ..self }
    }
}

/// One total-spin block: weight q_J and a Hermitian (2J+1)x(2J+1)
/// matrix in the J_z eigenbasis (rows by descending m).
#[derive(Clone, Debug)]
pub struct Block {
    pub j: Spin,
    pub weight: f64,
    pub mat: CMat,
}

/// Block-diagonal operator over the total-spin grid of n qubits,
/// blocks ordered by descending J. `skipped_mass` records weight
/// dropped by the underflow floor or by an explicit grid restriction;
/// it is zero for fully represented states.
#[derive(Clone, Debug)]
pub struct BlockState {
    pub n: u32,
    pub blocks: Vec<Block>,
    pub skipped_mass: f64,
}

impl BlockState {
    pub fn total_weight(&self) -> f64 {
        self.blocks.iter().map(|b| b.weight).sum()
    }

    pub fn block(&self, j: Spin) -> Option<&Block> {
        self.blocks.iter().find(|b| b.j == j)
    }
}

/// Total-spin grid of n qubits, iterated from J = n/2 downward.
pub fn spin_grid_desc(n: u32) -> impl Iterator<Item = Spin> {
    (0..=(n / 2)).map(move |step| Spin::new(n - 2 * step))
}

/// Number of grid points, ⌊n/2⌋ + 1.
pub fn spin_grid_len(n: u32) -> usize {
    (n / 2) as usize + 1
}

/// Grid position of a spin under the ascending-J numbering used by the
/// interval partition (position 0 is the smallest J on the grid).
pub fn grid_position(n: u32, j: Spin) -> usize {
    debug_assert_eq!(j.twice_j() % 2, n % 2);
    ((j.twice_j() - n % 2) / 2) as usize
}

/// Spin at an ascending grid position.
pub fn spin_at_position(n: u32, pos: usize) -> Spin {
    Spin::new(n % 2 + 2 * pos as u32)
}

/// Probability of measuring total spin J on the n-copy clock state:
/// q_J = m_J [p(1-p)]^{n/2-J} N_J with N_J = sum_m p^{J+m}(1-p)^{J-m}.
/// Returned over the descending J grid.
///
/// Evaluated by an exact-ratio recurrence from the top spin, with the
/// running value carried as mantissa * 2^exponent: per-J log-space
/// evaluation loses ~1e-12 to factorial rounding at n ~ 1000, while
/// the recurrence stays near machine precision at any n and survives
/// the sub-1e-308 tails of large-n distributions.
pub fn qj_weights(n: u32, p: f64) -> Result<Vec<(Spin, f64)>> {
    check_p(p)?;
    if n < 1 {
        return Err(Error::Argument("copy count n must be at least 1".into()));
    }
    let top = Spin::new(n);
    if p == 1.0 {
        return Ok(spin_grid_desc(n)
            .map(|j| (j, if j == top { 1.0 } else { 0.0 }))
            .collect());
    }
    let w = (1.0 - p) / p;
    let ln_w = w.ln();
    let nf = f64::from(n);

    // Anchor at J = n/2 where the multiplicity is 1:
    // A_{n/2} = p^{n+1}/(2p-1), represented as mant * 2^exp2.
    let ln_anchor = (nf + 1.0) * p.ln() - (2.0 * p - 1.0).ln();
    let e0 = (ln_anchor / std::f64::consts::LN_2).round();
    let mut mant = (ln_anchor - e0 * std::f64::consts::LN_2).exp();
    let mut exp2 = e0 as i64;

    let mut out = Vec::with_capacity(spin_grid_len(n));
    let mut tj = i64::from(n);
    loop {
        let tjf = tj as f64;
        // q_J = A_J (1 - w^{2J+1}); exp_m1 keeps the factor accurate
        // whether w^{2J+1} is near 0 or near 1.
        let frac = -((tjf + 1.0) * ln_w).exp_m1();
        out.push((Spin::new(tj as u32), pow2_scale(mant, exp2) * frac));
        if tj < 2 {
            break;
        }
        // A_{J-1}/A_J; every integer product here is exact in f64.
        let num = (tjf - 1.0) * (nf + tjf + 2.0) * (1.0 - p);
        let den = (nf - tjf + 2.0) * (tjf + 1.0) * p;
        mant *= num / den;
        while mant != 0.0 && mant.abs() < (2f64).powi(-512) {
            mant *= (2f64).powi(512);
            exp2 -= 512;
        }
        while mant.abs() > (2f64).powi(512) {
            mant *= (2f64).powi(-512);
            exp2 += 512;
        }
        tj -= 2;
    }
    Ok(out)
}

/// mant * 2^exp2 with graceful underflow to zero.
fn pow2_scale(mant: f64, exp2: i64) -> f64 {
    if mant == 0.0 || exp2 < -1400 {
        return 0.0;
    }
    if exp2 == 0 {
        return mant;
    }
    let half = exp2 / 2;
    mant * (2f64).powi(half as i32) * (2f64).powi((exp2 - half) as i32)
}

/// The distribution exactly as printed in the source derivation:
/// q_J = (2J+1)/(2 J_0) [B(n/2+J+1) - B(n/2-J)] with
/// B(k) = p^k (1-p)^{n-k} C(n,k) (zero outside 0..n) and
/// J_0 = (p-1/2)(n+1). Diagnostic only: at small n this printed form
/// goes negative (n=2, p=0.8 gives q_1 < 0), so nothing in the
/// pipeline consumes it; [`qj_weights`] is the canonical distribution.
pub fn qj_weights_paper_form(n: u32, p: f64) -> Result<Vec<(Spin, f64)>> {
    check_p(p)?;
    let j0 = (p - 0.5) * (f64::from(n) + 1.0);
    let b = |k: i64| -> f64 {
        if k < 0 || k > i64::from(n) {
            return 0.0;
        }
        let kf = k as f64;
        let nf = f64::from(n);
        (kf * p.ln()
            + (nf - kf) * (1.0 - p).ln()
            + crate::repkit::ln_fact(i64::from(n))
            - crate::repkit::ln_fact(k)
            - crate::repkit::ln_fact(i64::from(n) - k))
        .exp()
    };
    Ok(spin_grid_desc(n)
        .map(|j| {
            let tj = i64::from(j.twice_j());
            let upper = (i64::from(n) + tj) / 2 + 1;
            let lower = (i64::from(n) - tj) / 2;
            let q = (f64::from(j.twice_j()) + 1.0) / (2.0 * j0) * (b(upper) - b(lower));
            (j, q)
        })
        .collect())
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::Argument(format!("spectrum p={p} outside (1/2, 1]")));
    }
    Ok(())
}

/// The fixed block state rho_{p,J} at t = 0 in the J_z eigenbasis:
/// diagonal p^{J+m}(1-p)^{J-m}/N_J in the rotated |J,m>_s basis,
/// conjugated back by the Wigner small-d rotation at angle
/// `rotation_angle(s)`.
///
/// Only rotation columns carrying at least ~1e-19 of the diagonal mass
/// are accumulated, so the cost stays near-linear in the block
/// dimension for p well above 1/2.
pub fn rho_pj(p: f64, j: Spin, s: f64) -> Result<CMat> {
    check_p(p)?;
    let theta = rotation_angle(s)?;
    let dim = j.dim();
    let tj = j.twice_j() as i32;

    let mut acc = RMat::zeros(dim, dim);
    if p == 1.0 {
        let col = wigner_d_column(j, theta, tj);
        accumulate_outer(&mut acc, &col, 1.0);
        return Ok(complexify(&acc));
    }

    let w = (1.0 - p) / p;
    let ln_w = w.ln();
    // lambda(m)/lambda(J) = w^{J-m}; stop once columns fall below 1e-19
    // of the leading one.
    let max_defect = ((-43.75 / ln_w).ceil() as usize).min(dim - 1);
    let ln_nj = nj_log(p, j);
    for defect in 0..=max_defect {
        let tm = tj - 2 * defect as i32;
        let ln_lambda = f64::from((tj + tm) / 2) * p.ln()
            + f64::from((tj - tm) / 2) * (1.0 - p).ln()
            - ln_nj;
        let col = wigner_d_column(j, theta, tm);
        accumulate_outer(&mut acc, &col, ln_lambda.exp());
    }
    Ok(complexify(&acc))
}

/// ln N_J for N_J = sum_{m=-J}^{J} p^{J+m} (1-p)^{J-m}.
fn nj_log(p: f64, j: Spin) -> f64 {
    let tj = f64::from(j.twice_j());
    let ln_w = ((1.0 - p) / p).ln();
    (tj + 1.0) * p.ln() + (-((tj + 1.0) * ln_w).exp()).ln_1p() - (2.0 * p - 1.0).ln()
}

fn accumulate_outer(acc: &mut RMat, col: &[f64], weight: f64) {
    let dim = acc.nrows();
    for r in 0..dim {
        let wr = weight * col[r];
        if wr == 0.0 {
            continue;
        }
        for c in 0..dim {
            acc[(r, c)] += wr * col[c];
        }
    }
}

/// Time evolution of a block: U_t^{tensor n} acts as z-phases, so in
/// descending-m storage out[i,i'] = e^{i t (i - i')} mat[i,i'].
pub fn evolve(mat: &CMat, t: f64) -> CMat {
    let dim = mat.nrows();
    let phases: Vec<Cx> = (0..dim).map(|i| Cx::new(0.0, t * i as f64).exp()).collect();
    CMat::from_fn(dim, dim, |r, c| mat[(r, c)] * phases[r] * phases[c].conj())
}

/// Full block decomposition of rho_{t,p}^{tensor n}.
pub fn build_block_state(params: ClockParams) -> Result<BlockState> {
    let weights = qj_weights(params.n, params.p)?;
    let mut blocks = Vec::with_capacity(weights.len());
    let mut skipped = 0.0;
    for (j, q) in weights {
        if q < WEIGHT_FLOOR {
            skipped += q;
            continue;
        }
        let mat = evolve(&rho_pj(params.p, j, params.s)?, params.t);
        blocks.push(Block { j, weight: q, mat });
    }
    Ok(BlockState {
        n: params.n,
        blocks,
        skipped_mass: skipped,
    })
}

/// Trace distance (1/2) sum_J || w_a A_J - w_b B_J ||_1 between two
/// block states over the same copy count; a block missing on one side
/// is treated as weight zero. Valid without the multiplicity registers
/// because both sides carry identical maximally mixed factors there.
pub fn trace_distance(a: &BlockState, b: &BlockState) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::Argument(format!(
            "trace distance between different copy counts {} and {}",
            a.n, b.n
        )));
    }
    let mut total = 0.0;
    let (mut ia, mut ib) = (0, 0);
    while ia < a.blocks.len() || ib < b.blocks.len() {
        let ja = a.blocks.get(ia).map(|blk| blk.j);
        let jb = b.blocks.get(ib).map(|blk| blk.j);
        match (ja, jb) {
            (Some(x), Some(y)) if x == y => {
                let blk_a = &a.blocks[ia];
                let blk_b = &b.blocks[ib];
                let diff = blk_a.mat.scale(blk_a.weight) - blk_b.mat.scale(blk_b.weight);
                total += trace_norm_hermitian(&diff);
                ia += 1;
                ib += 1;
            }
            // Descending order: the larger spin is the unmatched one.
            (Some(x), Some(y)) if x > y => {
                total += a.blocks[ia].weight * trace_norm_hermitian(&a.blocks[ia].mat);
                ia += 1;
            }
            (Some(_), Some(_)) => {
                total += b.blocks[ib].weight * trace_norm_hermitian(&b.blocks[ib].mat);
                ib += 1;
            }
            (Some(_), None) => {
                total += a.blocks[ia].weight * trace_norm_hermitian(&a.blocks[ia].mat);
                ia += 1;
            }
            (None, Some(_)) => {
                total += b.blocks[ib].weight * trace_norm_hermitian(&b.blocks[ib].mat);
                ib += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(0.5 * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{
        hermitian_eigenvalues, hermiticity_defect, max_abs_diff, min_eigenvalue, trace_re,
    };
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn single_qubit_clock(t: f64, p: f64, s: f64) -> CMat {
        let phi = [
            Cx::new(s.sqrt(), 0.0),
            Cx::new(0.0, t).exp() * (1.0 - s).sqrt(),
        ];
        let perp = [
            Cx::new((1.0 - s).sqrt(), 0.0),
            -Cx::new(0.0, t).exp() * s.sqrt(),
        ];
        CMat::from_fn(2, 2, |r, c| {
            phi[r] * phi[c].conj() * p + perp[r] * perp[c].conj() * (1.0 - p)
        })
    }

    #[test]
    fn params_are_validated() {
        assert!(ClockParams::new(4, 0.5, 0.8, 0.0).is_ok());
        assert!(ClockParams::new(0, 0.5, 0.8, 0.0).is_err());
        assert!(ClockParams::new(4, 0.0, 0.8, 0.0).is_err());
        assert!(ClockParams::new(4, 0.5, 0.5, 0.0).is_err());
        assert!(ClockParams::new(4, 0.5, 1.1, 0.0).is_err());
        assert!(ClockParams::new(4, 0.5, 0.8, 6.4).is_err());
    }

    #[test]
    fn grid_round_trips() {
        for n in [1u32, 2, 5, 8] {
            let grid: Vec<Spin> = spin_grid_desc(n).collect();
            assert_eq!(grid.len(), spin_grid_len(n));
            assert_eq!(grid[0], Spin::new(n));
            for j in &grid {
                assert_eq!(spin_at_position(n, grid_position(n, *j)), *j);
            }
        }
    }

    #[test]
    fn qj_point_mass_at_pure_spectrum() {
        let q = qj_weights(6, 1.0).unwrap();
        assert_eq!(q[0].0, Spin::new(6));
        assert_eq!(q[0].1, 1.0);
        assert!(q[1..].iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn qj_two_copies_reference_values() {
        let q = qj_weights(2, 0.8).unwrap();
        assert_eq!(q.len(), 2);
        assert!((q[0].1 - 0.84).abs() < 1e-14);
        assert!((q[1].1 - 0.16).abs() < 1e-14);
    }

    #[test]
    fn qj_normalizes_across_scales() {
        for (n, p) in [
            (3u32, 0.9),
            (17, 0.6),
            (128, 0.75),
            (1000, 0.6),
            (1024, 0.8),
            (2000, 0.55),
            (4001, 0.7),
        ] {
            let total: f64 = qj_weights(n, p).unwrap().iter().map(|(_, q)| q).sum();
            assert!(
                (total - 1.0).abs() < 1e-12,
                "normalization defect at n={n} p={p}: {total}"
            );
        }
    }

    #[test]
    fn qj_recurrence_matches_logspace_evaluation() {
        // Independent per-J evaluation through log factorials; looser
        // tolerance because that route rounds at the factorial scale.
        let logspace = |n: u32, p: f64| -> Vec<f64> {
            let ln_pq = (p * (1.0 - p)).ln();
            let ln_w = ((1.0 - p) / p).ln();
            spin_grid_desc(n)
                .map(|j| {
                    let tj = f64::from(j.twice_j());
                    let half_defect = f64::from((n - j.twice_j()) / 2);
                    let ln_nj =
                        (tj + 1.0) * p.ln() + (-((tj + 1.0) * ln_w).exp()).ln_1p()
                            - (2.0 * p - 1.0).ln();
                    (crate::repkit::ln_multiplicity(n, j) + half_defect * ln_pq + ln_nj).exp()
                })
                .collect()
        };
        for (n, p) in [(7u32, 0.8), (100, 0.6), (100, 0.95)] {
            let fast = qj_weights(n, p).unwrap();
            let reference = logspace(n, p);
            for ((j, a), b) in fast.iter().zip(reference.iter()) {
                if *b > 1e-250 {
                    assert!(
                        ((a - b) / b).abs() < 1e-11,
                        "q mismatch at n={n} p={p} J={j}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn qj_rejects_bad_spectrum() {
        assert!(qj_weights(4, 0.5).is_err());
        assert!(qj_weights(4, 0.2).is_err());
    }

    #[test]
    fn paper_form_goes_negative_at_two_copies() {
        // The printed closed form fails at small n; pinned here so the
        // discrepancy with the canonical distribution stays visible.
        let q = qj_weights_paper_form(2, 0.8).unwrap();
        assert!((q[0].1 - (-1.0 / 15.0)).abs() < 1e-12);
        let canonical = qj_weights(2, 0.8).unwrap();
        assert!((canonical[0].1 - 0.84).abs() < 1e-14);
    }

    #[test]
    fn paper_form_discrepancy_shrinks_with_n() {
        // Observed behaviour of the printed closed form: total mass
        // 1 - O(1/n) (never exactly 1) and total variation against the
        // canonical distribution decaying roughly like n^{-1/2}, worse
        // at larger p. Values pinned at n=100, p=0.8.
        let tv_and_mass = |n: u32, p: f64| {
            let canonical = qj_weights(n, p).unwrap();
            let printed = qj_weights_paper_form(n, p).unwrap();
            let tv: f64 = canonical
                .iter()
                .zip(printed.iter())
                .map(|((_, a), (_, b))| (a - b).abs())
                .sum::<f64>()
                / 2.0;
            let mass: f64 = printed.iter().map(|(_, q)| q).sum();
            (tv, mass)
        };
        let (tv, mass) = tv_and_mass(100, 0.8);
        assert!((tv - 7.891268e-2).abs() < 1e-7);
        assert!((mass - 0.973597359736).abs() < 1e-10);
        for p in [0.6, 0.8, 0.95] {
            let (tv_small, _) = tv_and_mass(100, p);
            let (tv_mid, _) = tv_and_mass(400, p);
            let (tv_large, _) = tv_and_mass(1600, p);
            assert!(tv_small > tv_mid && tv_mid > tv_large);
            assert!(tv_large > 1e-2, "printed form unexpectedly converged");
        }
    }

    #[test]
    fn rho_pj_pure_spectrum_is_rank_one() {
        let j = Spin::new(8);
        let m = rho_pj(1.0, j, 0.5).unwrap();
        assert!((trace_re(&m) - 1.0).abs() < 1e-12);
        let mut ev = hermitian_eigenvalues(&m);
        ev.sort_by(f64::total_cmp);
        assert!((ev[ev.len() - 1] - 1.0).abs() < 1e-10);
        assert!(ev[..ev.len() - 1].iter().all(|l| l.abs() < 1e-10));
    }

    #[test]
    fn rho_pj_single_qubit_matches_clock_definition() {
        for (p, s) in [(0.8, 0.3), (0.97, 0.5), (0.6, 0.7)] {
            let fast = rho_pj(p, Spin::new(1), s).unwrap();
            let reference = single_qubit_clock(0.0, p, s);
            assert!(max_abs_diff(&fast, &reference) < 1e-14);
        }
    }

    #[test]
    fn rho_pj_spectrum_is_geometric() {
        let m = rho_pj(0.8, Spin::new(2), 0.5).unwrap();
        let mut ev = hermitian_eigenvalues(&m);
        ev.sort_by(f64::total_cmp);
        let expect = [0.04 / 0.84, 0.16 / 0.84, 0.64 / 0.84];
        for (got, want) in ev.iter().zip(expect.iter()) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn rho_pj_is_hermitian_psd_unit_trace_at_scale() {
        let m = rho_pj(0.8, Spin::new(101), 0.3).unwrap();
        assert!(hermiticity_defect(&m) < 1e-12);
        assert!((trace_re(&m) - 1.0).abs() < 1e-12);
        assert!(min_eigenvalue(&m) > -1e-10);
    }

    #[test]
    fn evolve_reference_behaviour() {
        let m = rho_pj(0.8, Spin::new(3), 0.4).unwrap();
        assert!(max_abs_diff(&evolve(&m, 0.0), &m) < 1e-15);
        assert!(max_abs_diff(&evolve(&m, std::f64::consts::TAU), &m) < 1e-12);
        let diag = CMat::from_fn(4, 4, |r, c| {
            if r == c {
                Cx::new(0.25, 0.0)
            } else {
                Cx::new(0.0, 0.0)
            }
        });
        assert!(max_abs_diff(&evolve(&diag, 1.3), &diag) == 0.0);
    }

    #[test]
    fn evolve_matches_clock_definition_on_one_qubit() {
        // The sign convention test: evolving the t=0 block must land on
        // the literal clock state at time t, entry for entry.
        for t in [0.7, 2.1, PI] {
            let evolved = evolve(&rho_pj(0.8, Spin::new(1), 0.3).unwrap(), t);
            let reference = single_qubit_clock(t, 0.8, 0.3);
            assert!(
                max_abs_diff(&evolved, &reference) < 1e-14,
                "evolve sign mismatch at t={t}"
            );
        }
    }

    #[test]
    fn evolve_preserves_spectrum() {
        let m = rho_pj(0.7, Spin::new(5), 0.4).unwrap();
        let mut before = hermitian_eigenvalues(&m);
        let mut after = hermitian_eigenvalues(&evolve(&m, 2.1));
        before.sort_by(f64::total_cmp);
        after.sort_by(f64::total_cmp);
        for (x, y) in before.iter().zip(after.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn block_state_single_copy_reproduces_clock() {
        let st = build_block_state(ClockParams::new(1, 0.35, 0.9, 1.1).unwrap()).unwrap();
        assert_eq!(st.blocks.len(), 1);
        assert_eq!(st.blocks[0].j, Spin::new(1));
        assert_eq!(st.blocks[0].weight, 1.0);
        assert!(max_abs_diff(&st.blocks[0].mat, &single_qubit_clock(1.1, 0.9, 0.35)) < 1e-14);
    }

    #[test]
    fn block_state_weights_and_block_shape() {
        let st = build_block_state(ClockParams::new(6, 0.5, 0.8, 0.7).unwrap()).unwrap();
        let q = qj_weights(6, 0.8).unwrap();
        assert_eq!(st.blocks.len(), q.len());
        assert!((st.total_weight() - 1.0).abs() < 1e-12);
        for (blk, (j, w)) in st.blocks.iter().zip(q.iter()) {
            assert_eq!(blk.j, *j);
            assert_eq!(blk.weight, *w);
            assert_eq!(blk.mat.nrows(), j.dim());
            assert!(hermiticity_defect(&blk.mat) < 1e-12);
            assert!((trace_re(&blk.mat) - 1.0).abs() < 1e-12);
            assert!(min_eigenvalue(&blk.mat) > -1e-10);
        }
    }

    #[test]
    fn pure_four_copy_block_is_rotated_highest_weight() {
        let st = build_block_state(ClockParams::new(4, 0.5, 1.0, 0.0).unwrap()).unwrap();
        assert_eq!(st.blocks.len(), 1);
        let j = Spin::new(4);
        assert_eq!(st.blocks[0].j, j);
        let col = wigner_d_column(j, rotation_angle(0.5).unwrap(), 4);
        let proj = CMat::from_fn(5, 5, |r, c| Cx::new(col[r] * col[c], 0.0));
        assert!(max_abs_diff(&st.blocks[0].mat, &proj) < 1e-13);
    }

    #[test]
    fn trace_distance_identical_and_disjoint() {
        let a = build_block_state(ClockParams::new(5, 0.4, 0.85, 0.7).unwrap()).unwrap();
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);

        let mk = |tj: u32| BlockState {
            n: 4,
            blocks: vec![Block {
                j: Spin::new(tj),
                weight: 1.0,
                mat: CMat::identity(Spin::new(tj).dim(), Spin::new(tj).dim())
                    .scale(1.0 / Spin::new(tj).dim() as f64),
            }],
            skipped_mass: 0.0,
        };
        let d = trace_distance(&mk(4), &mk(2)).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_distance_rejects_mismatched_copy_counts() {
        let a = build_block_state(ClockParams::new(2, 0.5, 0.8, 0.0).unwrap()).unwrap();
        let b = build_block_state(ClockParams::new(3, 0.5, 0.8, 0.0).unwrap()).unwrap();
        assert!(trace_distance(&a, &b).is_err());
    }

    #[test]
    fn trace_distance_qubit_closed_form() {
        // Single copy: (2p-1) * 2 sqrt(s(1-s)) |sin((t-t')/2)|.
        for (p, s, t, tp) in [
            (1.0, 0.5, 0.0, PI),
            (0.8, 0.3, 0.7, 2.1),
            (0.6, 0.5, 0.0, 1.0),
        ] {
            let a = build_block_state(ClockParams::new(1, s, p, t).unwrap()).unwrap();
            let b = build_block_state(ClockParams::new(1, s, p, tp).unwrap()).unwrap();
            let got = trace_distance(&a, &b).unwrap();
            let want = (2.0 * p - 1.0) * 2.0 * (s * (1.0 - s)).sqrt() * ((t - tp) / 2.0).sin().abs();
            assert!(
                (got - want).abs() < 1e-12,
                "closed form mismatch: got {got}, want {want}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn trace_distance_is_metric_like(
            seed in 0u64..1024,
            n in 2u32..6,
        ) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let random_state = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut weights: Vec<f64> =
                    spin_grid_desc(n).map(|_| rand::Rng::gen::<f64>(rng)).collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                BlockState {
                    n,
                    blocks: spin_grid_desc(n)
                        .zip(weights)
                        .map(|(j, weight)| Block {
                            j,
                            weight,
                            mat: crate::linalg::random_psd(j.dim(), rng),
                        })
                        .collect(),
                    skipped_mass: 0.0,
                }
            };
            let a = random_state(&mut rng);
            let b = random_state(&mut rng);
            let c = random_state(&mut rng);
            let dab = trace_distance(&a, &b).unwrap();
            let dba = trace_distance(&b, &a).unwrap();
            let dac = trace_distance(&a, &c).unwrap();
            let dcb = trace_distance(&c, &b).unwrap();
            prop_assert!((dab - dba).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&dab));
            prop_assert!(dab <= dac + dcb + 1e-10);
        }
    }
}

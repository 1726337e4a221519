//! Brute-force reference implementations on the full 2^n-dimensional
//! Hilbert space. Everything here is deliberately slow and obvious:
//! product states are built by explicit Kronecker products, the total
//! spin decomposition by qubit-at-a-time angular momentum coupling,
//! and block conversions by symmetrizing on physical qubit registers.
//! The fast block-level code elsewhere in the crate is tested against
//! these routines, never the other way around.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::clockstate::{Block, BlockState, ClockParams};
use crate::linalg::{complexify, trace_re, CMat, Cx, RMat};
use crate::repkit::{clebsch_gordan, Spin};
use crate::{Error, Result};

/// Largest copy count for which the full 2^n x 2^n density matrix is
/// materialized.
pub const MAX_FULL_COPIES: u32 = 10;

/// Largest copy count accepted by [`oracle_blocks`].
pub const MAX_ORACLE_COPIES: u32 = 8;

/// Largest qubit register accepted by [`symmetrizer`].
pub const MAX_SYMMETRIZER_QUBITS: u32 = 12;

/// Largest doubled spin accepted by [`oracle_convert`].
pub const MAX_CONVERT_TWICE_J: u32 = 6;

/// The single-copy clock state written out literally from its
/// definition: rho = p |phi_t><phi_t| + (1-p) |phi_t_perp><phi_t_perp|
/// with phi_t = sqrt(s)|0> + sqrt(1-s) e^{it}|1>.
fn qubit_clock(s: f64, p: f64, t: f64) -> CMat {
    let phase = Cx::new(0.0, t).exp();
    let phi = [Cx::new(s.sqrt(), 0.0), phase * (1.0 - s).sqrt()];
    let perp = [Cx::new((1.0 - s).sqrt(), 0.0), -phase * s.sqrt()];
    CMat::from_fn(2, 2, |r, c| {
        phi[r] * phi[c].conj() * p + perp[r] * perp[c].conj() * (1.0 - p)
    })
}

/// rho_{t,p}^{tensor n} as a dense 2^n x 2^n matrix, first copy on the
/// most significant index.
pub fn full_product_state(params: ClockParams) -> Result<CMat> {
    if params.n > MAX_FULL_COPIES {
        return Err(Error::SizeRefusal(format!(
            "full product state limited to n <= {MAX_FULL_COPIES}, got n={}",
            params.n
        )));
    }
    let single = qubit_clock(params.s, params.p, params.t);
    let mut full = single.clone();
    for _ in 1..params.n {
        full = full.kronecker(&single);
    }
    Ok(full)
}

/// One multiplicity path of a total spin sector: an isometry from the
/// (2J+1)-dimensional block space into the 2^n-dimensional qubit
/// space, columns indexed by m descending.
#[derive(Clone, Debug)]
pub struct SectorPath {
    pub isometry: RMat,
}

/// Total spin sector: all coupling paths reaching spin J.
#[derive(Clone, Debug)]
pub struct Sector {
    pub j: Spin,
    pub paths: Vec<SectorPath>,
}

/// The coupled basis of n qubits, sectors by descending J. Columns are
/// built by coupling qubits left to right with Clebsch-Gordan
/// coefficients, so they are real and the first qubit sits on the most
/// significant index, matching [`full_product_state`].
pub fn coupled_basis(n: u32) -> Result<Arc<Vec<Sector>>> {
    if !(1..=MAX_FULL_COPIES).contains(&n) {
        return Err(Error::SizeRefusal(format!(
            "coupled basis limited to 1 <= n <= {MAX_FULL_COPIES}, got n={n}"
        )));
    }
    static CACHE: OnceLock<Mutex<HashMap<u32, Arc<Vec<Sector>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(found) = cache.lock().unwrap().get(&n) {
        return Ok(found.clone());
    }
    let mut sectors = vec![Sector {
        j: Spin::new(1),
        paths: vec![SectorPath {
            isometry: RMat::identity(2, 2),
        }],
    }];
    for grown in 2..=n {
        sectors = couple_one_qubit(&sectors, grown);
    }
    sectors.sort_by_key(|sector| std::cmp::Reverse(sector.j));
    let arc = Arc::new(sectors);
    cache.lock().unwrap().insert(n, arc.clone());
    Ok(arc)
}

fn couple_one_qubit(sectors: &[Sector], grown: u32) -> Vec<Sector> {
    let half = Spin::new(1);
    let dim_out = 1usize << grown;
    let mut by_tj: HashMap<u32, Vec<SectorPath>> = HashMap::new();
    for sector in sectors {
        for path in &sector.paths {
            let targets: &[i64] = if sector.j.twice_j() == 0 { &[1] } else { &[1, -1] };
            for delta in targets {
                let tj_new = (i64::from(sector.j.twice_j()) + delta) as u32;
                let j_new = Spin::new(tj_new);
                let mut iso = RMat::zeros(dim_out, j_new.dim());
                for (col, tm_new) in j_new.twice_m_desc().enumerate() {
                    for (old_col, tm_old) in sector.j.twice_m_desc().enumerate() {
                        for (bit, tm_q) in [(0usize, 1i32), (1, -1)] {
                            if tm_old + tm_q != tm_new {
                                continue;
                            }
                            let cg = clebsch_gordan(sector.j, tm_old, half, tm_q, j_new, tm_new)
                                .expect("coupling stays on grid");
                            if cg == 0.0 {
                                continue;
                            }
                            for row in 0..path.isometry.nrows() {
                                let v = path.isometry[(row, old_col)];
                                if v != 0.0 {
                                    iso[(2 * row + bit, col)] += cg * v;
                                }
                            }
                        }
                    }
                }
                by_tj.entry(tj_new).or_default().push(SectorPath { isometry: iso });
            }
        }
    }
    let mut out: Vec<Sector> = by_tj
        .into_iter()
        .map(|(tj, paths)| Sector {
            j: Spin::new(tj),
            paths,
        })
        .collect();
    out.sort_by_key(|mat| std::cmp::Reverse(mat.j));
    out
}

/// Block decomposition of rho_{t,p}^{tensor n} computed entirely in
/// the full Hilbert space: weights are isotypic traces, blocks are
/// path sums renormalized to unit trace. Sectors whose weight
/// underflows are skipped, mirroring the block-level builder.
pub fn oracle_blocks(params: ClockParams) -> Result<BlockState> {
    if params.n > MAX_ORACLE_COPIES {
        return Err(Error::SizeRefusal(format!(
            "oracle decomposition limited to n <= {MAX_ORACLE_COPIES}, got n={}",
            params.n
        )));
    }
    let full = full_product_state(params)?;
    let sectors = coupled_basis(params.n)?;
    let mut blocks = Vec::with_capacity(sectors.len());
    let mut skipped = 0.0;
    for sector in sectors.iter() {
        let mut sum = CMat::zeros(sector.j.dim(), sector.j.dim());
        for path in &sector.paths {
            let iso = complexify(&path.isometry);
            sum += iso.adjoint() * &full * iso;
        }
        let weight = trace_re(&sum);
        if weight < crate::clockstate::WEIGHT_FLOOR {
            skipped += weight;
            continue;
        }
        blocks.push(Block {
            j: sector.j,
            weight,
            mat: sum.scale(1.0 / weight),
        });
    }
    Ok(BlockState {
        n: params.n,
        blocks,
        skipped_mass: skipped,
    })
}

/// Per-path compressed blocks of one sector, unnormalized. The
/// Schur-Weyl structure predicts every path of a sector yields the
/// same matrix; tests assert it.
pub fn sector_path_blocks(params: ClockParams, j: Spin) -> Result<Vec<CMat>> {
    let full = full_product_state(params)?;
    let sectors = coupled_basis(params.n)?;
    let sector = sectors
        .iter()
        .find(|sec| sec.j == j)
        .ok_or_else(|| Error::Argument(format!("spin {j} not on the grid of n={}", params.n)))?;
    Ok(sector
        .paths
        .iter()
        .map(|path| {
            let iso = complexify(&path.isometry);
            iso.adjoint() * &full * iso
        })
        .collect())
}

/// Isometry from the (M+1)-dimensional symmetric sector of M qubits
/// into the full register: column k is the Dicke state with k
/// excitations, so column order matches descending m = M/2 - k.
pub fn dicke_isometry(m_qubits: u32) -> Result<RMat> {
    if m_qubits > MAX_SYMMETRIZER_QUBITS {
        return Err(Error::SizeRefusal(format!(
            "symmetric sector limited to {MAX_SYMMETRIZER_QUBITS} qubits, got {m_qubits}"
        )));
    }
    let dim = 1usize << m_qubits;
    let mut iso = RMat::zeros(dim, m_qubits as usize + 1);
    let mut counts = vec![0u64; m_qubits as usize + 1];
    for r in 0..dim {
        counts[r.count_ones() as usize] += 1;
    }
    for r in 0..dim {
        let k = r.count_ones() as usize;
        iso[(r, k)] = 1.0 / (counts[k] as f64).sqrt();
    }
    Ok(iso)
}

/// Projector onto the symmetric subspace of M qubits.
pub fn symmetrizer(m_qubits: u32) -> Result<RMat> {
    let iso = dicke_isometry(m_qubits)?;
    Ok(&iso * iso.transpose())
}

/// Reference spin conversion J -> K through physical qubit registers:
/// the block is embedded as Dicke states on 2J qubits, then either
/// symmetrized onto 2K > 2J qubits with the (2J+1)/(2K+1) weight, or
/// partially traced down to 2K < 2J qubits, and read back out of the
/// symmetric sector.
pub fn oracle_convert(j: Spin, k: Spin, mat: &CMat) -> Result<CMat> {
    if j.twice_j() > MAX_CONVERT_TWICE_J || k.twice_j() > MAX_CONVERT_TWICE_J {
        return Err(Error::SizeRefusal(format!(
            "reference conversion limited to 2J <= {MAX_CONVERT_TWICE_J}, got {j} -> {k}"
        )));
    }
    if mat.nrows() != j.dim() || mat.ncols() != j.dim() {
        return Err(Error::Argument(format!(
            "block shape {}x{} does not match spin {j}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    if j == k {
        return Ok(mat.clone());
    }
    let b_in = complexify(&dicke_isometry(j.twice_j())?);
    let embedded = &b_in * mat * b_in.adjoint();
    let b_out = complexify(&dicke_isometry(k.twice_j())?);
    if k > j {
        let extra = 1usize << (k.twice_j() - j.twice_j());
        let padded = embedded.kronecker(&CMat::identity(extra, extra));
        let sym = complexify(&symmetrizer(k.twice_j())?);
        let ratio = j.dim() as f64 / k.dim() as f64;
        let big = (&sym * padded * &sym).scale(ratio);
        Ok(b_out.adjoint() * big * &b_out)
    } else {
        let keep = 1usize << k.twice_j();
        let drop = 1usize << (j.twice_j() - k.twice_j());
        let reduced = partial_trace_last(&embedded, keep, drop);
        Ok(b_out.adjoint() * reduced * &b_out)
    }
}

/// Partial trace over the least significant register of dimension
/// `drop_dim`.
fn partial_trace_last(mat: &CMat, keep_dim: usize, drop_dim: usize) -> CMat {
    debug_assert_eq!(mat.nrows(), keep_dim * drop_dim);
    CMat::from_fn(keep_dim, keep_dim, |a, b| {
        (0..drop_dim).map(|e| mat[(a * drop_dim + e, b * drop_dim + e)]).sum()
    })
}

//! The protocol's channels in block coordinates: spin conversion
//! C_{J->K} (optimal cloner upward, partial trace downward) and the
//! frequency projection channel, plus the analytic projection error
//! bound.
//!
//! Both conversion directions reduce to the same kind of kernel. A
//! symmetric M-qubit vector splits as sym(2J) tensor sym(M-2J) with
//! stretched Clebsch-Gordan weights, so cloning and discarding never
//! leave the symmetric subspace and the channels act block-to-block:
//! out[a,b] = sum_{m2} c_a c_b mat[a+d, b+d] with real stretched CG
//! factors c and a diagonal shift d per m2. All matrices are in the
//! J_z eigenbasis with rows by descending m.

use crate::linalg::{CMat, Cx};
use crate::repkit::{cg_stretched, Spin};
use crate::{Error, Result};

/// The kept frequency window of Eq-style projection at spin J: the
/// magnetic indices mu with |mu - (2s-1)J| <= sqrt(J) ln(J)/2. Degenerate
/// windows (J <= 1 can give zero or negative half width) fall back to
/// the single grid point nearest the center, ties toward larger mu.
#[derive(Clone, Debug)]
pub struct Window {
    pub j: Spin,
    pub s: f64,
    /// Kept magnetic indices as doubled values, descending to match
    /// matrix row order.
    pub kept: Vec<i32>,
    pub center: f64,
    pub half_width: f64,
}

impl Window {
    pub fn new(j: Spin, s: f64) -> Result<Self> {
        let jj = j.j();
        let half_width = if jj > 0.0 { jj.sqrt() * jj.ln() / 2.0 } else { 0.0 };
        Self::with_half_width(j, s, half_width)
    }

    /// Window with an explicit half width; the protocol value is
    /// sqrt(J) ln(J)/2 but diagnostics sweep other widths.
    pub fn with_half_width(j: Spin, s: f64, half_width: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Argument(format!("s={s} outside (0, 1)")));
        }
        let center = (2.0 * s - 1.0) * j.j();
        let mut kept: Vec<i32> = j
            .twice_m_desc()
            .filter(|tm| {
                half_width >= 0.0 && (f64::from(*tm) / 2.0 - center).abs() <= half_width
            })
            .collect();
        if kept.is_empty() {
            let nearest = j
                .twice_m_desc()
                .min_by(|a, b| {
                    let da = (f64::from(*a) / 2.0 - center).abs();
                    let db = (f64::from(*b) / 2.0 - center).abs();
                    da.total_cmp(&db).then(b.cmp(a))
                })
                .expect("spin grid is never empty");
            kept.push(nearest);
        }
        Ok(Window {
            j,
            s,
            kept,
            center,
            half_width,
        })
    }

    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    /// Row range of the kept indices inside the full (2J+1) block:
    /// (first row, length). Kept indices are always contiguous.
    pub fn row_range(&self) -> (usize, usize) {
        let first = self.j.index_of(self.kept[0]);
        (first, self.kept.len())
    }

    /// Kept index nearest the window center, ties toward larger mu.
    pub fn anchor(&self) -> i32 {
        *self
            .kept
            .iter()
            .min_by(|a, b| {
                let da = (f64::from(**a) / 2.0 - self.center).abs();
                let db = (f64::from(**b) / 2.0 - self.center).abs();
                da.total_cmp(&db).then(b.cmp(a))
            })
            .expect("window is never empty")
    }
}

/// Restriction of a full (2J+1) block to a window's kept rows/columns.
#[cfg(test)]
pub(crate) fn restrict_to_window(mat: &CMat, window: &Window) -> CMat {
    let (lo, len) = window.row_range();
    CMat::from_fn(len, len, |r, c| mat[(lo + r, lo + c)])
}

/// Zero-padded embedding of a windowed block back into the full
/// (2J+1)-dimensional block space.
pub(crate) fn embed_from_window(sub: &CMat, window: &Window) -> CMat {
    let dim = window.j.dim();
    let (lo, len) = window.row_range();
    debug_assert_eq!(sub.nrows(), len);
    let mut out = CMat::zeros(dim, dim);
    for c in 0..len {
        for r in 0..len {
            out[(lo + r, lo + c)] = sub[(r, c)];
        }
    }
    out
}

/// Optimal universal cloner from 2J to 2K qubits in spin coordinates:
/// out[mu,mu'] = (2J+1)/(2K+1) sum_{m2} CG(J,mu-m2; K-J,m2 | K,mu)
/// CG(J,mu'-m2; K-J,m2 | K,mu') mat[mu-m2,mu'-m2]. Trace-preserving.
pub fn symmetric_clone(j: Spin, k: Spin, mat: &CMat) -> Result<CMat> {
    if k < j {
        return Err(Error::Argument(format!("cloner cannot shrink {j} to {k}")));
    }
    check_block_shape(j, mat)?;
    Ok(convert_restricted(j, k, mat, 0, k.dim()))
}

/// Partial trace of the symmetric 2J-qubit embedding down to 2K
/// qubits: out[nu,nu'] = sum_{m2} CG(K,nu; J-K,m2 | J,nu+m2)
/// CG(K,nu'; J-K,m2 | J,nu'+m2) mat[nu+m2,nu'+m2]. Trace-preserving.
pub fn symmetric_trace_down(j: Spin, k: Spin, mat: &CMat) -> Result<CMat> {
    if k > j {
        return Err(Error::Argument(format!(
            "partial trace cannot grow {j} to {k}"
        )));
    }
    check_block_shape(j, mat)?;
    Ok(convert_restricted(j, k, mat, 0, k.dim()))
}

/// The conversion channel C_{J->K}: cloner when K > J, partial trace
/// when K < J, identity when K = J.
pub fn convert(j: Spin, k: Spin, mat: &CMat) -> Result<CMat> {
    check_block_shape(j, mat)?;
    Ok(convert_restricted(j, k, mat, 0, k.dim()))
}

fn check_block_shape(j: Spin, mat: &CMat) -> Result<()> {
    if mat.nrows() != j.dim() || mat.ncols() != j.dim() {
        return Err(Error::Argument(format!(
            "block shape {}x{} does not match spin {j}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

/// C_{J->K} computed only on the square output range starting at row
/// `out_lo` with `out_len` rows. Encoders project onto a narrow window
/// right after converting, so computing the discarded entries would
/// dominate the runtime at large n.
pub(crate) fn convert_restricted(
    j: Spin,
    k: Spin,
    mat: &CMat,
    out_lo: usize,
    out_len: usize,
) -> CMat {
    debug_assert!(out_lo + out_len <= k.dim());
    if j == k {
        return CMat::from_fn(out_len, out_len, |r, c| mat[(out_lo + r, out_lo + c)]);
    }
    let tj = i64::from(j.twice_j());
    let tk = i64::from(k.twice_j());
    let tl = (tj - tk).abs();
    let mut out = CMat::zeros(out_len, out_len);
    let mut factors = vec![0.0f64; out_len];
    let mut tm2 = -tl;
    while tm2 <= tl {
        // Input index for output index i is i + d on the shifted
        // diagonal; clamp to rows that exist on the input block.
        let d = if k > j {
            (tj - tk + tm2) / 2
        } else {
            (tj - tk - tm2) / 2
        };
        let lo = (-d).max(out_lo as i64).max(0) as usize;
        let hi_excl = ((tj + 1 - d).min((out_lo + out_len) as i64)).max(0) as usize;
        if lo >= hi_excl {
            tm2 += 2;
            continue;
        }
        for i in lo..hi_excl {
            let tm_out = tk - 2 * i as i64;
            factors[i - out_lo] = if k > j {
                cg_stretched(tj, tm_out - tm2, tl, tm2)
            } else {
                cg_stretched(tk, tm_out, tl, tm2)
            };
        }
        let shift = d as isize;
        for b in lo..hi_excl {
            let cb = factors[b - out_lo];
            if cb == 0.0 {
                continue;
            }
            let in_col = (b as isize + shift) as usize;
            for a in lo..hi_excl {
                let ca = factors[a - out_lo];
                if ca == 0.0 {
                    continue;
                }
                let in_row = (a as isize + shift) as usize;
                out[(a - out_lo, b - out_lo)] += mat[(in_row, in_col)] * (ca * cb);
            }
        }
        tm2 += 2;
    }
    if k > j {
        out.scale_mut((tj + 1) as f64 / (tk + 1) as f64);
    }
    out
}

/// The frequency projection channel at spin J: P mat P plus the
/// clipped weight rerouted to a fixed state rho_0 inside the window.
/// The default rho_0 is the pure state at the kept index nearest the
/// window center; a caller-supplied fallback must be supported inside
/// the window. Output is full (2J+1)-dimensional; encoders restrict it
/// afterwards.
pub fn frequency_projection(
    j: Spin,
    s: f64,
    mat: &CMat,
    fallback: Option<&CMat>,
) -> Result<CMat> {
    check_block_shape(j, mat)?;
    let window = Window::new(j, s)?;
    frequency_projection_with(&window, mat, fallback)
}

/// Frequency projection with a caller-built window (diagnostics sweep
/// nonstandard widths).
pub fn frequency_projection_with(
    window: &Window,
    mat: &CMat,
    fallback: Option<&CMat>,
) -> Result<CMat> {
    let j = window.j;
    check_block_shape(j, mat)?;
    let dim = j.dim();
    let (lo, len) = window.row_range();
    if let Some(rho0) = fallback {
        if rho0.nrows() != dim || rho0.ncols() != dim {
            return Err(Error::Argument(format!(
                "fallback shape {}x{} does not match spin {j}",
                rho0.nrows(),
                rho0.ncols()
            )));
        }
        for c in 0..dim {
            for r in 0..dim {
                let inside = (lo..lo + len).contains(&r) && (lo..lo + len).contains(&c);
                if !inside && rho0[(r, c)].norm() > 1e-12 {
                    return Err(Error::Argument(
                        "fallback state has support outside the kept window".into(),
                    ));
                }
            }
        }
    }
    let mut out = CMat::zeros(dim, dim);
    let mut kept_trace = 0.0;
    for c in lo..lo + len {
        for r in lo..lo + len {
            out[(r, c)] = mat[(r, c)];
        }
        kept_trace += mat[(c, c)].re;
    }
    let deficit = 1.0 - kept_trace;
    match fallback {
        Some(rho0) => {
            for c in 0..dim {
                for r in 0..dim {
                    out[(r, c)] += rho0[(r, c)] * deficit;
                }
            }
        }
        None => {
            let anchor_row = j.index_of(window.anchor());
            out[(anchor_row, anchor_row)] += Cx::new(deficit, 0.0);
        }
    }
    Ok(out)
}

/// The same projection applied in the rotated s-basis instead of the
/// J_z eigenbasis. Diagnostic only: this reading of the projection
/// does not preserve the clock state, and the CLI exposes the
/// comparison.
pub fn frequency_projection_s_basis(
    j: Spin,
    s: f64,
    mat: &CMat,
    fallback: Option<&CMat>,
) -> Result<CMat> {
    check_block_shape(j, mat)?;
    let d = crate::linalg::complexify(crate::repkit::wigner_d(j, crate::repkit::rotation_angle(s)?)?.mat());
    let rotated = d.adjoint() * mat * &d;
    let projected = frequency_projection(j, s, &rotated, fallback)?;
    Ok(&d * projected * d.adjoint())
}

/// Leading-order analytic bound on the frequency projection error at
/// spin J: (3/2) J^{-(1/8) ln(p/(1-p))}. Zero at p = 1 (the exponent
/// diverges), infinite at J = 0 where the bound is vacuous.
pub fn projection_error_bound(j: Spin, p: f64) -> Result<f64> {
    if !(p > 0.5 && p <= 1.0) {
        return Err(Error::Argument(format!("spectrum p={p} outside (1/2, 1]")));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let jj = j.j();
    if jj == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(1.5 * (-(jj.ln()) * (p / (1.0 - p)).ln() / 8.0).exp())
}

//! Representation-theoretic numerical kernels: half-integer spin
//! arithmetic, Clebsch-Gordan coefficients, Wigner small-d rotation
//! matrices, and Schur-Weyl multiplicities.
//!
//! Conventions fixed here and relied on by every other module:
//!
//! * spins are stored doubled (`twice_j`), so half-integers stay exact
//!   and no floating-point J ever appears;
//! * magnetic indices run m = J, J-1, ..., -J, so storage index `i`
//!   holds m with 2m = 2J - 2i (descending);
//! * Clebsch-Gordan coefficients use the Condon-Shortley sign
//!   convention throughout; the cloner and trace-down kernels multiply
//!   pairs of them, where one consistent convention makes the signs
//!   cancel but mixed conventions would not;
//! * `wigner_d(j, theta)` is the matrix of exp(-i theta J_y) in the J_z
//!   eigenbasis, which is real orthogonal.

use crate::linalg::RMat;
use crate::{Error, Result};
use std::fmt;
use std::sync::OnceLock;

/// Total- or partial-spin quantum number, stored doubled so that
/// half-integers are exact.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Spin {
    twice_j: u32,
}

impl Spin {
    pub fn new(twice_j: u32) -> Self {
        Spin { twice_j }
    }

    pub fn twice_j(self) -> u32 {
        self.twice_j
    }

    /// J as a float; fine for formulas, never used for indexing.
    pub fn j(self) -> f64 {
        f64::from(self.twice_j) / 2.0
    }

    /// Block dimension 2J+1.
    pub fn dim(self) -> usize {
        self.twice_j as usize + 1
    }

    /// True when 2m lies on this spin's magnetic grid.
    pub fn on_grid(self, twice_m: i32) -> bool {
        let tj = i64::from(self.twice_j);
        let tm = i64::from(twice_m);
        tm.abs() <= tj && (tj - tm) % 2 == 0
    }

    /// Storage index of a magnetic value (m descending from +J).
    pub fn index_of(self, twice_m: i32) -> usize {
        debug_assert!(self.on_grid(twice_m));
        ((i64::from(self.twice_j) - i64::from(twice_m)) / 2) as usize
    }

    /// Magnetic value at a storage index.
    pub fn twice_m_at(self, index: usize) -> i32 {
        debug_assert!(index < self.dim());
        self.twice_j as i32 - 2 * index as i32
    }

    /// Magnetic values in storage order (descending).
    pub fn twice_m_desc(self) -> impl Iterator<Item = i32> {
        let tj = self.twice_j as i32;
        (0..self.dim()).map(move |i| tj - 2 * i as i32)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice_j.is_multiple_of(2) {
            write!(f, "{}", self.twice_j / 2)
        } else {
            write!(f, "{}/2", self.twice_j)
        }
    }
}

const LN_FACT_LEN: usize = 1 << 14;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = vec![0.0; LN_FACT_LEN];
        for k in 2..LN_FACT_LEN {
            t[k] = t[k - 1] + (k as f64).ln();
        }
        t
    })
}

/// ln(k!) from a precomputed table; covers every factorial argument that
/// can appear at desk scale (n up to several thousand copies).
pub(crate) fn ln_fact(k: i64) -> f64 {
    assert!(
        (0..LN_FACT_LEN as i64).contains(&k),
        "ln_fact argument {k} outside table range"
    );
    ln_fact_table()[k as usize]
}

fn ln_binomial(n: i64, r: i64) -> f64 {
    debug_assert!(r >= 0 && r <= n);
    ln_fact(n) - ln_fact(r) - ln_fact(n - r)
}

/// Clebsch-Gordan coefficient `<j1 m1; j2 m2 | J M>` in the
/// Condon-Shortley convention, evaluated by the Racah sum in
/// log-factorial space with sign tracking.
///
/// Magnetic arguments are doubled (`twice_m`). Returns 0 when
/// `M != m1 + m2` or when J fails the triangle condition; an off-grid
/// magnetic index is an argument error.
pub fn clebsch_gordan(
    j1: Spin,
    twice_m1: i32,
    j2: Spin,
    twice_m2: i32,
    big_j: Spin,
    twice_m: i32,
) -> Result<f64> {
    for (j, tm, name) in [
        (j1, twice_m1, "m1"),
        (j2, twice_m2, "m2"),
        (big_j, twice_m, "M"),
    ] {
        if !j.on_grid(tm) {
            return Err(Error::Argument(format!(
                "magnetic index {name}={}/2 off the grid of j={j}",
                tm
            )));
        }
    }
    Ok(cg_unchecked(
        i64::from(j1.twice_j()),
        i64::from(twice_m1),
        i64::from(j2.twice_j()),
        i64::from(twice_m2),
        i64::from(big_j.twice_j()),
        i64::from(twice_m),
    ))
}

/// Racah sum over doubled-integer arguments; assumes each m is on its
/// spin's grid and returns 0 for violated selection rules.
fn cg_unchecked(tj1: i64, tm1: i64, tj2: i64, tm2: i64, tbj: i64, tbm: i64) -> f64 {
    if tm1 + tm2 != tbm {
        return 0.0;
    }
    if tbj < (tj1 - tj2).abs() || tbj > tj1 + tj2 || (tj1 + tj2 + tbj) % 2 != 0 {
        return 0.0;
    }

    // All the following are exact integers (halves of even sums).
    let a = (tj1 + tj2 - tbj) / 2;
    let b = (tj1 - tj2 + tbj) / 2;
    let c = (-tj1 + tj2 + tbj) / 2;
    let j1pm1 = (tj1 + tm1) / 2;
    let j1mm1 = (tj1 - tm1) / 2;
    let j2pm2 = (tj2 + tm2) / 2;
    let j2mm2 = (tj2 - tm2) / 2;
    let jpm = (tbj + tbm) / 2;
    let jmm = (tbj - tbm) / 2;

    let ln_pref = 0.5
        * ((f64::from(tbj as i32) + 1.0).ln() + ln_fact(a) + ln_fact(b) + ln_fact(c)
            - ln_fact(a + b + c + 1)
            + ln_fact(jpm)
            + ln_fact(jmm)
            + ln_fact(j1pm1)
            + ln_fact(j1mm1)
            + ln_fact(j2pm2)
            + ln_fact(j2mm2));

    // Term k has denominator k! (j1+j2-J-k)! (j1-m1-k)! (j2+m2-k)!
    // (J-j2+m1+k)! (J-j1-m2+k)!.
    let d1 = a;
    let d2 = j1mm1;
    let d3 = j2pm2;
    let e1 = (tbj - tj2 + tm1) / 2;
    let e2 = (tbj - tj1 - tm2) / 2;
    let k_min = 0.max(-e1).max(-e2);
    let k_max = d1.min(d2).min(d3);
    if k_min > k_max {
        return 0.0;
    }

    let ln_term = |k: i64| {
        -(ln_fact(k)
            + ln_fact(d1 - k)
            + ln_fact(d2 - k)
            + ln_fact(d3 - k)
            + ln_fact(e1 + k)
            + ln_fact(e2 + k))
    };
    let ln_max = (k_min..=k_max).map(ln_term).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let term = (ln_term(k) - ln_max).exp();
        sum += if k % 2 == 0 { term } else { -term };
    }
    sum * (ln_pref + ln_max).exp()
}

/// Stretched coefficient `<j1 m1; j2 m2 | j1+j2, m1+m2>`: the Racah sum
/// collapses to a single term, giving a non-negative closed form. The
/// channel kernels use only this case.
pub(crate) fn cg_stretched(tj1: i64, tm1: i64, tj2: i64, tm2: i64) -> f64 {
    debug_assert!(tm1.abs() <= tj1 && (tj1 - tm1) % 2 == 0);
    debug_assert!(tm2.abs() <= tj2 && (tj2 - tm2) % 2 == 0);
    let tbj = tj1 + tj2;
    let tbm = tm1 + tm2;
    let ln = 0.5
        * (ln_fact(tj1) + ln_fact(tj2) + ln_fact((tbj + tbm) / 2) + ln_fact((tbj - tbm) / 2)
            - ln_fact(tbj)
            - ln_fact((tj1 + tm1) / 2)
            - ln_fact((tj1 - tm1) / 2)
            - ln_fact((tj2 + tm2) / 2)
            - ln_fact((tj2 - tm2) / 2));
    ln.exp()
}

/// Wigner small-d rotation matrix: entries d^j_{mu' mu}(theta) of
/// exp(-i theta J_y) in the J_z eigenbasis, rows and columns ordered by
/// descending magnetic number.
#[derive(Clone, Debug)]
pub struct WignerD {
    j: Spin,
    theta: f64,
    entries: RMat,
}

impl WignerD {
    pub fn j(&self) -> Spin {
        self.j
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn mat(&self) -> &RMat {
        &self.entries
    }

    /// Entry by magnetic values (doubled).
    pub fn entry(&self, twice_m_row: i32, twice_m_col: i32) -> f64 {
        self.entries[(self.j.index_of(twice_m_row), self.j.index_of(twice_m_col))]
    }
}

/// Full Wigner small-d matrix for spin `j`.
pub fn wigner_d(j: Spin, theta: f64) -> Result<WignerD> {
    if !theta.is_finite() {
        return Err(Error::Argument(format!("non-finite rotation angle {theta}")));
    }
    let dim = j.dim();
    let mut entries = RMat::zeros(dim, dim);
    for r in 0..dim {
        let tmp = j.twice_m_at(r);
        for c in 0..dim {
            entries[(r, c)] = wigner_d_entry(j.twice_j(), tmp, j.twice_m_at(c), theta);
        }
    }
    Ok(WignerD { j, theta, entries })
}

/// One column of the small-d matrix (rows in descending-m storage
/// order). The clock-state builder only ever needs a handful of
/// columns near m = +J, so this avoids filling whole matrices at large
/// spin.
pub(crate) fn wigner_d_column(j: Spin, theta: f64, twice_m_col: i32) -> Vec<f64> {
    (0..j.dim())
        .map(|r| wigner_d_entry(j.twice_j(), j.twice_m_at(r), twice_m_col, theta))
        .collect()
}

/// Single small-d entry, evaluated through a Jacobi polynomial with a
/// scaled three-term recurrence. The recurrence length is the distance
/// from the nearest matrix corner, so entries near the highest weight
/// stay cheap even at very large j, and no alternating factorial sum
/// ever appears (that sum loses all precision beyond j of a few tens).
pub(crate) fn wigner_d_entry(twice_j: u32, twice_m_row: i32, twice_m_col: i32, theta: f64) -> f64 {
    let tj = i64::from(twice_j);
    let tmp = i64::from(twice_m_row);
    let tm = i64::from(twice_m_col);
    debug_assert!(tmp.abs() <= tj && (tj - tmp) % 2 == 0);
    debug_assert!(tm.abs() <= tj && (tj - tm) % 2 == 0);

    let jpm = (tj + tm) / 2;
    let jmm = (tj - tm) / 2;
    let jpmp = (tj + tmp) / 2;
    let jmmp = (tj - tmp) / 2;
    let k = jpm.min(jmm).min(jpmp).min(jmmp);

    // Map to d = (-1)^lam sqrt(C(2j-k, k+a)/C(k+b, b))
    //            * sin^a(t/2) cos^b(t/2) * P_k^{(a,b)}(cos t),
    // choosing (a, lam) by which corner is nearest.
    let (a, lam) = if k == jmm || k == jpmp {
        (jpm - jpmp, 0)
    } else {
        (jpmp - jpm, jpmp - jpm)
    };
    let b = tj - 2 * k - a;
    debug_assert!(a >= 0 && b >= 0);

    let half = 0.5 * theta;
    let (sh, ch) = (half.sin(), half.cos());
    if (a > 0 && sh == 0.0) || (b > 0 && ch == 0.0) {
        return 0.0;
    }

    let mut sign = if lam % 2 == 0 { 1.0 } else { -1.0 };
    if a % 2 == 1 && sh < 0.0 {
        sign = -sign;
    }
    if b % 2 == 1 && ch < 0.0 {
        sign = -sign;
    }
    let mut ln_mag = 0.5 * (ln_binomial(tj - k, k + a) - ln_binomial(k + b, b));
    if a > 0 {
        ln_mag += a as f64 * sh.abs().ln();
    }
    if b > 0 {
        ln_mag += b as f64 * ch.abs().ln();
    }

    let (p, p_ln_scale) = jacobi_scaled(k, a as f64, b as f64, theta.cos());
    sign * p * (ln_mag + p_ln_scale).exp()
}

/// Jacobi polynomial P_k^{(a,b)}(x) by the standard three-term
/// recurrence, returned as (mantissa, ln scale) so large intermediate
/// values cannot overflow.
fn jacobi_scaled(k: i64, a: f64, b: f64, x: f64) -> (f64, f64) {
    if k == 0 {
        return (1.0, 0.0);
    }
    let mut p_prev = 1.0;
    let mut p_cur = 0.5 * (a - b) + (1.0 + 0.5 * (a + b)) * x;
    let mut ln_scale = 0.0;
    const BIG: f64 = 1e250;
    const LN_BIG: f64 = 575.6462732485114;
    for i in 2..=k {
        let n = i as f64;
        let c0 = 2.0 * n * (n + a + b) * (2.0 * n + a + b - 2.0);
        let c1 = (2.0 * n + a + b - 1.0)
            * ((2.0 * n + a + b) * (2.0 * n + a + b - 2.0) * x + a * a - b * b);
        let c2 = 2.0 * (n + a - 1.0) * (n + b - 1.0) * (2.0 * n + a + b);
        let p_next = (c1 * p_cur - c2 * p_prev) / c0;
        p_prev = p_cur;
        p_cur = p_next;
        if p_cur.abs() > BIG || p_prev.abs() > BIG {
            p_cur /= BIG;
            p_prev /= BIG;
            ln_scale += LN_BIG;
        }
    }
    (p_cur, ln_scale)
}

/// Number of spin-J irrep copies in n qubits, exact:
/// `C(n, n/2-J) * (2J+1) / (n/2+J+1)`.
pub fn multiplicity(n: u32, j: Spin) -> Result<u128> {
    let k = multiplicity_k(n, j)?;
    let n = u128::from(n);
    let c = binomial_u128(n, k)?;
    let num = c
        .checked_mul(u128::from(j.twice_j()) + 1)
        .ok_or_else(|| Error::Numeric("multiplicity overflows u128".into()))?;
    Ok(num / (n - k + 1))
}

/// ln of the multiplicity, for weight formulas at large n.
#[cfg(test)]
pub(crate) fn ln_multiplicity(n: u32, j: Spin) -> f64 {
    let k = multiplicity_k(n, j).expect("parity checked by caller");
    let n = i64::from(n);
    let k = k as i64;
    ln_fact(n) - ln_fact(k) - ln_fact(n - k) + (f64::from(j.twice_j()) + 1.0).ln()
        - ((n - k + 1) as f64).ln()
}

fn multiplicity_k(n: u32, j: Spin) -> Result<u128> {
    let tj = j.twice_j();
    if tj > n || !(n - tj).is_multiple_of(2) {
        return Err(Error::Argument(format!(
            "spin {j} is not on the total-spin grid of n={n} qubits"
        )));
    }
    Ok(u128::from((n - tj) / 2))
}

fn binomial_u128(n: u128, k: u128) -> Result<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc
            .checked_mul(n - k + i)
            .ok_or_else(|| Error::Numeric("binomial overflows u128".into()))?
            / i;
    }
    Ok(acc)
}

/// Rotation angle theta = 2 arccos(sqrt(s)), the y-rotation with
/// exp(-i theta J_y)|0> = sqrt(s)|0> + sqrt(1-s)|1>.
pub fn rotation_angle(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Argument(format!(
            "basis parameter s={s} outside (0, 1)"
        )));
    }
    Ok(2.0 * s.sqrt().acos())
}

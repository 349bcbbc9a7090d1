//! Run-length encoding of occupancy sequences and the compressed-domain MI
//! family: exact, Gaussian-truncated, and uniform-noise evaluation on groups,
//! the alpha/beta/theta/gamma table builders behind them, and the erfc-based
//! analytic approximation of the group interaction term.

use std::io::{BufRead, Write};
use std::time::Instant;

use thiserror::Error;

use crate::mi::MiBreakdown;
use crate::sensor::{FTable, SensorModel};

/// Default occupancy quantization lattice spacing.
pub const DEFAULT_O_RES: f64 = 1.0 / 128.0;

/// Gaussian exponents beyond this underflow to exactly 0.0 in f64, so the
/// corresponding terms can be skipped without changing any sum.
const EXP_UNDERFLOW: f64 = 760.0;

#[derive(Debug, Error)]
pub enum RleError {
    #[error("empty occupancy sequence")]
    EmptyInput,
    #[error("quantization resolution must lie in (0, 0.5), got {0}")]
    BadResolution(f64),
    #[error("virtual cell width must be positive, got {0}")]
    BadWidth(f64),
    #[error("text fixture: {0}")]
    BadFixture(String),
    #[error("group length {len} exceeds the theta/gamma table bound {l_max}")]
    GroupTooLong { len: usize, l_max: usize },
    #[error("table index {needed} exceeds the alpha/beta bound {l_bound}")]
    TableTooSmall { needed: usize, l_bound: usize },
    #[error("tables built for sigma'={built} but sequence implies sigma'={implied}")]
    TableMismatch { built: f64, implied: f64 },
    #[error("truncation width must be >= 1, got {0}")]
    BadTruncation(u32),
    #[error("numerical range exceeded in exact group evaluation: {0}")]
    NumericalRange(String),
    #[error("analytic approximation requires 0 < x < 1 and sigma' > 0")]
    BadAnalyticInput,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One run of identical quantized occupancy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RleGroup {
    pub o: f64,
    pub len: usize,
}

/// Run-length encoded occupancy vector over uniform virtual cells of width
/// `w0`. Occupancies lie exactly on the quantization lattice and adjacent
/// groups differ (unless a long run was split at a caller-chosen cap).
#[derive(Debug, Clone, PartialEq)]
pub struct RleSequence {
    pub groups: Vec<RleGroup>,
    pub w0: f64,
    pub o_res: f64,
}

/// Quantize an occupancy onto the lattice `{k * o_res}` restricted to the
/// clamp interval.
pub fn quantize(o: f64, o_res: f64, clamp_eps: f64) -> f64 {
    let k_min = (clamp_eps / o_res).ceil().max(1.0);
    let k_max = ((1.0 - clamp_eps) / o_res).floor();
    let k = (o / o_res).round().clamp(k_min, k_max);
    k * o_res
}

/// Compress an occupancy vector: quantize onto the lattice, then merge equal
/// neighbors.
pub fn rle_compress(
    occupancies: &[f64],
    o_res: f64,
    w0: f64,
    clamp_eps: f64,
) -> Result<RleSequence, RleError> {
    if occupancies.is_empty() {
        return Err(RleError::EmptyInput);
    }
    if !(o_res > 0.0 && o_res < 0.5) {
        return Err(RleError::BadResolution(o_res));
    }
    if !(w0 > 0.0) {
        return Err(RleError::BadWidth(w0));
    }
    let mut groups: Vec<RleGroup> = Vec::new();
    for &o in occupancies {
        let q = quantize(o, o_res, clamp_eps);
        match groups.last_mut() {
            Some(g) if g.o == q => g.len += 1,
            _ => groups.push(RleGroup { o: q, len: 1 }),
        }
    }
    Ok(RleSequence { groups, w0, o_res })
}

impl RleSequence {
    /// Build directly from quantized groups (values must already sit on the
    /// lattice; merging is applied to keep the form canonical).
    pub fn from_groups(groups: Vec<(f64, usize)>, o_res: f64, w0: f64) -> Result<Self, RleError> {
        if groups.is_empty() || groups.iter().any(|&(_, l)| l == 0) {
            return Err(RleError::EmptyInput);
        }
        let mut merged: Vec<RleGroup> = Vec::new();
        for (o, len) in groups {
            match merged.last_mut() {
                Some(g) if g.o == o => g.len += len,
                _ => merged.push(RleGroup { o, len }),
            }
        }
        Ok(Self {
            groups: merged,
            w0,
            o_res,
        })
    }

    /// Number of groups.
    pub fn n_r(&self) -> usize {
        self.groups.len()
    }

    /// Total number of virtual cells.
    pub fn n(&self) -> usize {
        self.groups.iter().map(|g| g.len).sum()
    }

    /// Start index `s_u` of each group (0-based cell index).
    pub fn starts(&self) -> Vec<usize> {
        let mut s = Vec::with_capacity(self.groups.len());
        let mut acc = 0;
        for g in &self.groups {
            s.push(acc);
            acc += g.len;
        }
        s
    }

    /// Expand back to one occupancy per virtual cell.
    pub fn decompress(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n());
        for g in &self.groups {
            out.extend(std::iter::repeat(g.o).take(g.len));
        }
        out
    }

    /// Split runs longer than `cap` into equal-occupancy sub-groups so that
    /// bounded theta/gamma tables apply. Splitting a homogeneous run changes
    /// nothing about the per-cell model, so MI is unchanged.
    pub fn split_long_runs(&self, cap: usize) -> Self {
        assert!(cap >= 1);
        let mut groups = Vec::new();
        for g in &self.groups {
            let mut rest = g.len;
            while rest > cap {
                groups.push(RleGroup { o: g.o, len: cap });
                rest -= cap;
            }
            groups.push(RleGroup { o: g.o, len: rest });
        }
        Self {
            groups,
            w0: self.w0,
            o_res: self.o_res,
        }
    }

    /// Text fixture format: header `w0 <meters>`, then one `o L` line per group.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<(), RleError> {
        writeln!(w, "w0 {}", self.w0)?;
        for g in &self.groups {
            writeln!(w, "{} {}", g.o, g.len)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R, o_res: f64) -> Result<Self, RleError> {
        let mut w0 = None;
        let mut groups = Vec::new();
        for line in r.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            match (it.next(), it.next()) {
                (Some("w0"), Some(v)) => {
                    w0 = Some(
                        v.parse::<f64>()
                            .map_err(|_| RleError::BadFixture(format!("bad w0 value {v}")))?,
                    );
                }
                (Some(o), Some(l)) => {
                    let o: f64 = o
                        .parse()
                        .map_err(|_| RleError::BadFixture(format!("bad occupancy {o}")))?;
                    let l: usize = l
                        .parse()
                        .map_err(|_| RleError::BadFixture(format!("bad length {l}")))?;
                    groups.push((o, l));
                }
                _ => return Err(RleError::BadFixture(format!("unparseable line: {line}"))),
            }
        }
        let w0 = w0.ok_or_else(|| RleError::BadFixture("missing w0 header".into()))?;
        Self::from_groups(groups, o_res, w0)
    }
}

/// `P_E(u) = prod_{i<u} (1 - o_i)^{L_i}`: probability that every cell before
/// group `u` is empty. Index 0 holds `P_E(1) = 1`.
pub fn pe_u(seq: &RleSequence) -> Vec<f64> {
    let nr = seq.n_r();
    let mut p = vec![1.0; nr];
    for u in 1..nr {
        let g = &seq.groups[u - 1];
        p[u] = p[u - 1] * (1.0 - g.o).powi(g.len as i32);
    }
    p
}

/// `D_E(v) = sum_{i<v} L_i f(delta_emp, r_i)` with `D_E(1) = 0`.
pub fn de_v(seq: &RleSequence, f_table: &FTable) -> Vec<f64> {
    let nr = seq.n_r();
    let mut d = vec![0.0; nr];
    for v in 1..nr {
        let g = &seq.groups[v - 1];
        let r = g.o / (1.0 - g.o);
        d[v] = d[v - 1] + g.len as f64 * f_table.pair_interp(r.ln()).1;
    }
    d
}

/// Literal double sum `sum_{j<Lu} sum_{k<Lv} x^j exp(-(j-k)^2 / 2 sigma'^2)`,
/// with `0^0 := 1`. Test and table-validation oracle.
pub fn alpha_direct(x: f64, l_u: usize, l_v: usize, sigma_cells: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma_cells * sigma_cells);
    let mut sum = 0.0;
    let mut xj = 1.0;
    for j in 0..l_u {
        for k in 0..l_v {
            let d = j as f64 - k as f64;
            sum += xj * (-d * d * inv).exp();
        }
        xj *= x;
    }
    sum
}

/// As [`alpha_direct`] with the extra factor `k`.
pub fn beta_direct(x: f64, l_u: usize, l_v: usize, sigma_cells: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma_cells * sigma_cells);
    let mut sum = 0.0;
    let mut xj = 1.0;
    for j in 0..l_u {
        for k in 0..l_v {
            let d = j as f64 - k as f64;
            sum += k as f64 * xj * (-d * d * inv).exp();
        }
        xj *= x;
    }
    sum
}

/// Shifted double sums combining two groups at cell offset `t`; brute-force
/// reference for [`a_term`]/[`b_term`].
pub fn a_direct(x: f64, l_u: usize, l_v: usize, t: i64, sigma_cells: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma_cells * sigma_cells);
    let mut sum = 0.0;
    let mut xj = 1.0;
    for j in 0..l_u {
        for k in 0..l_v {
            let d = j as f64 + t as f64 - k as f64;
            sum += xj * (-d * d * inv).exp();
        }
        xj *= x;
    }
    sum
}

pub fn b_direct(x: f64, l_u: usize, l_v: usize, t: i64, sigma_cells: f64) -> f64 {
    let inv = 1.0 / (2.0 * sigma_cells * sigma_cells);
    let mut sum = 0.0;
    let mut xj = 1.0;
    for j in 0..l_u {
        for k in 0..l_v {
            let d = j as f64 + t as f64 - k as f64;
            sum += k as f64 * xj * (-d * d * inv).exp();
        }
        xj *= x;
    }
    sum
}

/// Precomputed alpha/beta/theta/gamma tables over the occupancy lattice.
///
/// `alpha[x, lu, lv]` and `beta[x, lu, lv]` are stored for `0 <= lu, lv <=
/// l_bound` (index-zero rows are zero so difference formulas index freely);
/// `theta[x, l] = alpha[x, l, l]` and `gamma[x, l] = beta[x, l, l]` extend to
/// `l_max` through incremental rim sums.
#[derive(Debug, Clone)]
pub struct RleTables {
    pub o_res: f64,
    pub sigma_cells: f64,
    pub l_bound: usize,
    pub l_max: usize,
    k_min: i64,
    n_x: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    theta: Vec<f64>,
    gamma: Vec<f64>,
    /// x^p for p in 0..=l_bound, per lattice value
    powers: Vec<f64>,
    ln_x: Vec<f64>,
}

impl RleTables {
    /// Tables for the truncated evaluation: off-diagonal interactions index
    /// up to `2 * delta` after window reduction.
    pub fn for_approx(
        o_res: f64,
        sigma_cells: f64,
        delta: u32,
        l_max: usize,
    ) -> Result<Self, RleError> {
        if delta < 1 {
            return Err(RleError::BadTruncation(delta));
        }
        Self::build(o_res, sigma_cells, 2 * delta as usize, l_max)
    }

    pub fn build(
        o_res: f64,
        sigma_cells: f64,
        l_bound: usize,
        l_max: usize,
    ) -> Result<Self, RleError> {
        if !(o_res > 0.0 && o_res < 0.5) {
            return Err(RleError::BadResolution(o_res));
        }
        assert!(sigma_cells > 0.0 && l_bound >= 1 && l_max >= l_bound);
        let clamp_eps = crate::grid::CLAMP_EPS;
        let k_min = (clamp_eps / o_res).ceil().max(1.0) as i64;
        let k_max = ((1.0 - clamp_eps) / o_res).floor() as i64;
        let n_x = (k_max - k_min + 1) as usize;
        let inv = 1.0 / (2.0 * sigma_cells * sigma_cells);
        let lb1 = l_bound + 1;
        let mut alpha = vec![0.0; n_x * lb1 * lb1];
        let mut beta = vec![0.0; n_x * lb1 * lb1];
        let mut theta = vec![0.0; n_x * (l_max + 1)];
        let mut gamma = vec![0.0; n_x * (l_max + 1)];
        let mut powers = vec![0.0; n_x * lb1];
        let mut ln_x = vec![0.0; n_x];
        // rim terms further than this from the diagonal underflow to zero
        let reach = (sigma_cells * (2.0 * EXP_UNDERFLOW).sqrt()).ceil() as usize + 1;

        for xi in 0..n_x {
            let x = (k_min + xi as i64) as f64 * o_res;
            ln_x[xi] = x.ln();
            let pw = &mut powers[xi * lb1..(xi + 1) * lb1];
            pw[0] = 1.0;
            for p in 1..lb1 {
                pw[p] = pw[p - 1] * x;
            }
            let base = xi * lb1 * lb1;
            let idx = |lu: usize, lv: usize| base + lu * lb1 + lv;
            // inclusion-exclusion on the corner cell (j, k) = (lu-1, lv-1);
            // the x power follows the row index, the weight the column index
            for lu in 1..=l_bound {
                for lv in 1..=l_bound {
                    let d = lu as f64 - lv as f64;
                    let e = (-d * d * inv).exp();
                    let xpow = pw[lu - 1];
                    alpha[idx(lu, lv)] = alpha[idx(lu, lv - 1)] + alpha[idx(lu - 1, lv)]
                        - alpha[idx(lu - 1, lv - 1)]
                        + xpow * e;
                    beta[idx(lu, lv)] = beta[idx(lu, lv - 1)] + beta[idx(lu - 1, lv)]
                        - beta[idx(lu - 1, lv - 1)]
                        + (lv - 1) as f64 * xpow * e;
                }
            }
            let tbase = xi * (l_max + 1);
            for l in 1..=l_bound.min(l_max) {
                theta[tbase + l] = alpha[idx(l, l)];
                gamma[tbase + l] = beta[idx(l, l)];
            }
            // extend the diagonal beyond the square table: add the new row
            // j = L-1, the new column k = L-1, and the corner
            for l in l_bound + 1..=l_max {
                let xl = x.powi(l as i32 - 1);
                let mut th = theta[tbase + l - 1];
                let mut ga = gamma[tbase + l - 1];
                let lo = l.saturating_sub(reach).max(1);
                let mut xi_pow = x.powi(lo as i32 - 1);
                for i in lo..l {
                    let d = i as f64 - l as f64;
                    let e = (-d * d * inv).exp();
                    th += (xl + xi_pow) * e;
                    ga += ((i - 1) as f64 * xl + (l - 1) as f64 * xi_pow) * e;
                    xi_pow *= x;
                }
                th += xl;
                ga += (l - 1) as f64 * xl;
                theta[tbase + l] = th;
                gamma[tbase + l] = ga;
            }
        }
        Ok(Self {
            o_res,
            sigma_cells,
            l_bound,
            l_max,
            k_min,
            n_x,
            alpha,
            beta,
            theta,
            gamma,
            powers,
            ln_x,
        })
    }

    /// Lattice index for an occupancy-complement value `x = 1 - o_u`.
    #[inline]
    pub fn x_index(&self, x: f64) -> usize {
        let k = (x / self.o_res).round() as i64 - self.k_min;
        (k.max(0) as usize).min(self.n_x - 1)
    }

    #[inline]
    pub fn x_value(&self, xi: usize) -> f64 {
        (self.k_min + xi as i64) as f64 * self.o_res
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    #[inline]
    fn ab_idx(&self, xi: usize, lu: usize, lv: usize) -> usize {
        let lb1 = self.l_bound + 1;
        (xi * lb1 + lu) * lb1 + lv
    }

    #[inline]
    pub fn alpha(&self, xi: usize, lu: usize, lv: usize) -> f64 {
        self.alpha[self.ab_idx(xi, lu, lv)]
    }

    #[inline]
    pub fn beta(&self, xi: usize, lu: usize, lv: usize) -> f64 {
        self.beta[self.ab_idx(xi, lu, lv)]
    }

    #[inline]
    pub fn theta(&self, xi: usize, l: usize) -> f64 {
        self.theta[xi * (self.l_max + 1) + l]
    }

    #[inline]
    pub fn gamma(&self, xi: usize, l: usize) -> f64 {
        self.gamma[xi * (self.l_max + 1) + l]
    }

    #[inline]
    fn power(&self, xi: usize, p: usize) -> f64 {
        self.powers[xi * (self.l_bound + 1) + p]
    }

    fn check_ab(&self, lu: usize, lv: usize) -> Result<(), RleError> {
        let needed = lu.max(lv);
        if needed > self.l_bound {
            return Err(RleError::TableTooSmall {
                needed,
                l_bound: self.l_bound,
            });
        }
        Ok(())
    }
}

/// Smallest squared offset appearing in the shifted sum; drives the
/// "is the true value materially nonzero" check in the guarded paths.
fn nearest_offset_sq(l_u: usize, l_v: usize, t: i64) -> f64 {
    // offsets span [t - (Lv-1), t + (Lu-1)]
    let lo = t - (l_v as i64 - 1);
    let hi = t + (l_u as i64 - 1);
    let nearest = if lo <= 0 && hi >= 0 {
        0
    } else {
        lo.abs().min(hi.abs())
    };
    (nearest * nearest) as f64
}

/// `A[x, Lu, Lv, t]` via the three-case table reduction. The `t >= 1` branch
/// multiplies a potentially huge `x^{-t}` with a difference of nearby table
/// entries; it is evaluated in log space, and complete cancellation where the
/// true value is materially nonzero raises [`RleError::NumericalRange`].
pub fn a_term(
    tables: &RleTables,
    xi: usize,
    l_u: usize,
    l_v: usize,
    t: i64,
) -> Result<f64, RleError> {
    if t == 0 {
        tables.check_ab(l_u, l_v)?;
        return Ok(tables.alpha(xi, l_u, l_v));
    }
    if t < 0 {
        let shift = (-t) as usize;
        tables.check_ab(l_u, l_v + shift)?;
        return Ok(tables.alpha(xi, l_u, l_v + shift) - tables.alpha(xi, l_u, shift));
    }
    let shift = t as usize;
    tables.check_ab(l_u + shift, l_v)?;
    let diff = tables.alpha(xi, l_u + shift, l_v) - tables.alpha(xi, shift, l_v);
    scaled_from_diff(tables, xi, diff, l_u, l_v, t)
}

/// `B[x, Lu, Lv, t]` companion of [`a_term`].
pub fn b_term(
    tables: &RleTables,
    xi: usize,
    l_u: usize,
    l_v: usize,
    t: i64,
) -> Result<f64, RleError> {
    if t == 0 {
        tables.check_ab(l_u, l_v)?;
        return Ok(tables.beta(xi, l_u, l_v));
    }
    if t < 0 {
        let shift = (-t) as usize;
        tables.check_ab(l_u, l_v + shift)?;
        let a = a_term(tables, xi, l_u, l_v, t)?;
        return Ok(tables.beta(xi, l_u, l_v + shift) - tables.beta(xi, l_u, shift) + t as f64 * a);
    }
    let shift = t as usize;
    tables.check_ab(l_u + shift, l_v)?;
    if l_v == 1 {
        return Ok(0.0); // the k-weight annihilates every term
    }
    let diff = tables.beta(xi, l_u + shift, l_v) - tables.beta(xi, shift, l_v);
    scaled_from_diff(tables, xi, diff, l_u, l_v, t)
}

/// `x^{-t} * diff` in log space with cancellation and overflow detection.
///
/// When the true sum is provably negligible the (fully cancelled, possibly
/// garbage) difference is discarded and zero returned; when it is materially
/// nonzero but the difference vanished below the table's floating-point
/// resolution, the evaluation is unsalvageable and reported as such.
fn scaled_from_diff(
    tables: &RleTables,
    xi: usize,
    diff: f64,
    l_u: usize,
    l_v: usize,
    t: i64,
) -> Result<f64, RleError> {
    let inv_two_var = 1.0 / (2.0 * tables.sigma_cells * tables.sigma_cells);
    // upper bound on the true unscaled sum: every term is at most the
    // Gaussian factor at the nearest offset
    let bound_log = ((l_u * l_v) as f64).ln() - nearest_offset_sq(l_u, l_v, t) * inv_two_var;
    if bound_log < -23.0 {
        // below 1e-10: irrelevant to any MI total at the tested tolerances
        return Ok(0.0);
    }
    if diff <= 0.0 {
        return Err(RleError::NumericalRange(format!(
            "x^t-scaled table difference cancelled to {diff} at t={t}, Lu={l_u}, Lv={l_v}"
        )));
    }
    let log_val = diff.ln() - t as f64 * tables.ln_x[xi];
    if log_val > 709.0 {
        return Err(RleError::NumericalRange(format!(
            "scaled value exp({log_val:.1}) overflows at t={t}"
        )));
    }
    Ok(log_val.exp())
}

fn check_sigma(
    tables: &RleTables,
    seq: &RleSequence,
    sensor: &SensorModel,
) -> Result<f64, RleError> {
    let implied = sensor.sigma / seq.w0;
    if (implied - tables.sigma_cells).abs() > 1e-12 * tables.sigma_cells {
        return Err(RleError::TableMismatch {
            built: tables.sigma_cells,
            implied,
        });
    }
    Ok(implied)
}

/// Per-group model values shared by the RLE evaluators, in one allocation.
#[derive(Clone, Copy, Default)]
struct GroupTerm {
    pe: f64,
    de: f64,
    f_occ: f64,
    f_emp: f64,
    start: i64,
}

struct GroupModel {
    terms: Vec<GroupTerm>,
}

impl GroupModel {
    #[inline]
    fn pe(&self, u: usize) -> f64 {
        self.terms[u].pe
    }
    #[inline]
    fn de(&self, v: usize) -> f64 {
        self.terms[v].de
    }
    #[inline]
    fn f_occ(&self, v: usize) -> f64 {
        self.terms[v].f_occ
    }
    #[inline]
    fn f_emp(&self, v: usize) -> f64 {
        self.terms[v].f_emp
    }
    #[inline]
    fn start(&self, u: usize) -> i64 {
        self.terms[u].start
    }
}

fn group_model(seq: &RleSequence, f_table: &FTable) -> GroupModel {
    let nr = seq.n_r();
    let mut terms = vec![GroupTerm::default(); nr];
    let mut pe = 1.0;
    let mut de = 0.0;
    let mut start = 0i64;
    for (u, g) in seq.groups.iter().enumerate() {
        let (fo, fe) = f_table.pair_interp((g.o / (1.0 - g.o)).ln());
        terms[u] = GroupTerm {
            pe,
            de,
            f_occ: fo,
            f_emp: fe,
            start,
        };
        pe *= (1.0 - g.o).powi(g.len as i32);
        de += g.len as f64 * fe;
        start += g.len as i64;
    }
    GroupModel { terms }
}

/// Exact Shannon MI on the compressed sequence via the full group double sum.
/// Mirrors the midpoint-density kernel of [`crate::mi::fsmi_pdf_kernel`];
/// known to be numerically fragile for long runs of near-certain occupancy,
/// in which case it reports [`RleError::NumericalRange`] instead of a
/// corrupted value.
pub fn fsmi_rle(
    seq: &RleSequence,
    sensor: &SensorModel,
    f_table: &FTable,
    tables: &RleTables,
) -> Result<MiBreakdown, RleError> {
    let sigma_cells = check_sigma(tables, seq, sensor)?;
    let start = Instant::now();
    let nr = seq.n_r();
    let m = group_model(seq, f_table);
    let mut acc = 0.0;
    for u in 0..nr {
        let gu = &seq.groups[u];
        let xi = tables.x_index(1.0 - gu.o);
        let hit = m.pe(u) * gu.o;
        for v in 0..nr {
            let gv = &seq.groups[v];
            let t = m.start(u) - m.start(v);
            let a = a_term(tables, xi, gu.len, gv.len, t)?;
            let b = b_term(tables, xi, gu.len, gv.len, t)?;
            acc += hit * ((m.de(v) + m.f_occ(v)) * a + m.f_emp(v) * b);
        }
    }
    let mi = acc / ((2.0 * std::f64::consts::PI).sqrt() * sigma_cells);
    Ok(MiBreakdown {
        mi,
        multiplications: 0,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Gaussian-truncated MI on the compressed sequence. Group pairs beyond the
/// truncation reach are skipped outright; surviving pairs are clipped to
/// their interacting sub-blocks, which bounds every table index by `2 delta`
/// and keeps the `x^{-t}` factors representable.
pub fn approx_fsmi_rle(
    seq: &RleSequence,
    sensor: &SensorModel,
    f_table: &FTable,
    tables: &RleTables,
    delta: u32,
) -> Result<MiBreakdown, RleError> {
    if delta < 1 {
        return Err(RleError::BadTruncation(delta));
    }
    let sigma_cells = check_sigma(tables, seq, sensor)?;
    if tables.l_bound < 2 * delta as usize {
        return Err(RleError::TableTooSmall {
            needed: 2 * delta as usize,
            l_bound: tables.l_bound,
        });
    }
    let start = Instant::now();
    let nr = seq.n_r();
    let d = delta as i64;
    let m = group_model(seq, f_table);
    let mut acc = 0.0;
    for u in 0..nr {
        let gu = &seq.groups[u];
        let lu = gu.len;
        let su = m.start(u);
        if lu > tables.l_max {
            return Err(RleError::GroupTooLong {
                len: lu,
                l_max: tables.l_max,
            });
        }
        let x = 1.0 - gu.o;
        let xi = tables.x_index(x);
        let hit = m.pe(u) * gu.o;

        // diagonal block
        acc += hit
            * ((m.de(u) + m.f_occ(u)) * tables.theta(xi, lu) + m.f_emp(u) * tables.gamma(xi, lu));

        // hit group before the readout group: the hit-side block start moves
        // right, discounting by (1-o_u)^shift
        for v in u + 1..nr {
            let sv = m.start(v);
            if sv >= su + lu as i64 + d {
                break;
            }
            let gv = &seq.groups[v];
            let su_p = su.max(sv - d);
            let lu_p = (su + lu as i64 - su_p) as usize;
            let lv_p = (gv.len as i64).min(su + lu as i64 + d - sv) as usize;
            let t = su_p - sv; // <= -1
            let shift = (-t) as usize;
            let a = tables.alpha(xi, lu_p, lv_p + shift) - tables.alpha(xi, lu_p, shift);
            let b =
                tables.beta(xi, lu_p, lv_p + shift) - tables.beta(xi, lu_p, shift) + t as f64 * a;
            let discount = x.powi((su_p - su) as i32);
            acc += hit * discount * ((m.de(v) + m.f_occ(v)) * a + m.f_emp(v) * b);
        }

        // hit group after the readout group: the readout-side block start
        // moves right, advancing D_E by whole skipped cells
        for v in (0..u).rev() {
            let sv = m.start(v);
            let gv = &seq.groups[v];
            if su >= sv + gv.len as i64 + d {
                break;
            }
            let lu_p = (lu as i64).min(sv + gv.len as i64 + d - su) as usize;
            let sv_p = sv.max(su - d);
            let lv_p = (sv + gv.len as i64 - sv_p) as usize;
            let t = (su - sv_p) as usize; // >= 1
            let inv_xt = 1.0 / tables.power(xi, t);
            let a = inv_xt * (tables.alpha(xi, lu_p + t, lv_p) - tables.alpha(xi, t, lv_p));
            let b = inv_xt * (tables.beta(xi, lu_p + t, lv_p) - tables.beta(xi, t, lv_p));
            let de_shift = m.de(v) + (sv_p - sv) as f64 * m.f_emp(v);
            acc += hit * ((de_shift + m.f_occ(v)) * a + m.f_emp(v) * b);
        }
    }
    let mi = acc / ((2.0 * std::f64::consts::PI).sqrt() * sigma_cells);
    Ok(MiBreakdown {
        mi,
        multiplications: 0,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

/// `1 - x^len` without cancellation.
#[inline]
fn one_minus_pow(ln_x: f64, len: f64) -> f64 {
    -f64::exp_m1(len * ln_x)
}

/// Exact Shannon MI on the compressed sequence under the uniform noise model.
/// The indicator-kernel group sums collapse into window-clipped geometric row
/// sums; the all-empty event is added explicitly so the result matches the
/// uncompressed prefix-sum evaluation.
pub fn uniform_fsmi_rle(
    seq: &RleSequence,
    _sensor: &SensorModel,
    f_table: &FTable,
    h: u32,
) -> Result<MiBreakdown, RleError> {
    let start = Instant::now();
    let nr = seq.n_r();
    let n = seq.n() as i64;
    let h = h as i64;
    let m = group_model(seq, f_table);
    let mut acc = 0.0;
    for u in 0..nr {
        let gu = &seq.groups[u];
        let lu = gu.len as i64;
        let su = m.start(u);
        let x = 1.0 - gu.o;
        let ln_x = x.ln();
        let inv_1mx = 1.0 / (1.0 - x);
        let hit = m.pe(u) * gu.o;
        for v in 0..nr {
            let gv = &seq.groups[v];
            let lv = gv.len as i64;
            let sv = m.start(v);
            let t = su - sv;
            // readout cells k reachable from some j in [0, Lu): |j + t - k| <= H
            let k_lo = (t - h).max(0);
            let k_hi = (lu - 1 + t + h).min(lv - 1);
            if k_lo > k_hi {
                continue;
            }
            let mut f_sum = 0.0;
            let mut g_sum = 0.0;
            // row sum over j for fixed k is geometric over the clipped window
            let first_a = (k_lo - t - h).max(0);
            let mut x_a = x.powi(first_a as i32);
            let mut prev_a = first_a;
            for k in k_lo..=k_hi {
                let a = (k - t - h).max(0);
                let b = (k - t + h).min(lu - 1);
                if a > b {
                    continue;
                }
                if a > prev_a {
                    x_a *= x; // the window start advances one cell per k at most
                    prev_a = a;
                }
                let row = x_a * one_minus_pow(ln_x, (b - a + 1) as f64) * inv_1mx;
                f_sum += row;
                g_sum += k as f64 * row;
            }
            acc += hit * ((m.de(v) + m.f_occ(v)) * f_sum + m.f_emp(v) * g_sum);
        }
    }

    // all-empty event: its window covers the first H real cells
    let last = seq.groups[nr - 1];
    let p_empty = m.pe(nr - 1) * (1.0 - last.o).powi(last.len as i32);
    let cap = h.min(n);
    let mut covered = 0i64;
    let mut c_prefix = 0.0;
    for v in 0..nr {
        if covered >= cap {
            break;
        }
        let take = (seq.groups[v].len as i64).min(cap - covered);
        let tk = take as f64;
        c_prefix += tk * (m.de(v) + m.f_occ(v)) + tk * (tk - 1.0) / 2.0 * m.f_emp(v);
        covered += take;
    }
    acc += p_empty * c_prefix;

    let mi = acc / (2.0 * h as f64 + 1.0);
    Ok(MiBreakdown {
        mi,
        multiplications: 0,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Closed-form tail integral behind the analytic approximation:
/// `int_{a1}^inf int_{a2}^inf x^j exp(-(j - k + t)^2 / 2 sigma'^2) dj dk`.
fn theta_tail(sigma: f64, x: f64, a1: f64, a2: f64, t: f64) -> f64 {
    let c = x.ln();
    let lam = 1.0 / (std::f64::consts::SQRT_2 * sigma);
    let g = a2 - t;
    let arg = lam * (a1 - g);
    let term1 = x.powf(a1) * (libm::erfc(arg) - 2.0);
    let term2 = (c * g + 0.5 * c * c * sigma * sigma).exp()
        * libm::erfc(arg - c * sigma * std::f64::consts::FRAC_1_SQRT_2);
    sigma * (std::f64::consts::PI / 2.0).sqrt() / c * (term1 - term2)
}

/// Constant-time approximation of the group interaction sum `A[x,Lu,Lv,t]`
/// by the corresponding double integral, assembled from four erfc tail
/// integrals. Accuracy is characterized empirically; the sum-vs-integral gap
/// does not vanish for strongly decaying `x`.
pub fn analytic_a_approx(
    x: f64,
    l_u: usize,
    l_v: usize,
    t: i64,
    sigma_cells: f64,
) -> Result<f64, RleError> {
    if !(x > 0.0 && x < 1.0) || !(sigma_cells > 0.0) {
        return Err(RleError::BadAnalyticInput);
    }
    let (lu, lv, t) = (l_u as f64, l_v as f64, t as f64);
    Ok(theta_tail(sigma_cells, x, -0.5, -0.5, t)
        - theta_tail(sigma_cells, x, lu - 0.5, -0.5, t)
        - theta_tail(sigma_cells, x, -0.5, lv - 0.5, t)
        + theta_tail(sigma_cells, x, lu - 0.5, lv - 0.5, t))
}

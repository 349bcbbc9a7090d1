//! Per-beam Shannon mutual information on uncompressed occupancy sequences:
//! the exact analytic double sum, its Gaussian-truncated and uniform-noise
//! variants, numerical-integration references, and CSQMI baselines, all with
//! multiplication-count instrumentation.

use std::time::Instant;

use thiserror::Error;

use crate::grid::{OccupancyGrid2D, Pose};
use crate::sensor::{f_value_unchecked, FTable, NoiseKind, PhiTable, SensorModel, SensorError};

#[derive(Debug, Error)]
pub enum MiError {
    #[error("operation requires Gaussian-family sensor noise")]
    RequiresGaussian,
    #[error("truncation width must be >= 1, got {0}")]
    BadTruncation(u32),
    #[error("integration step must be positive, got {0}")]
    BadStep(f64),
    #[error("uniform-noise evaluation requires constant cell width: {0}")]
    NonUniformWidths(String),
    #[error("invalid beam: {0}")]
    BadBeam(String),
    #[error(transparent)]
    Sensor(#[from] SensorError),
}

/// Shared lookup tables consumed by the MI kernels: the sigma-scaled normal
/// CDF and the information kernel sampled on the log-odds axis.
#[derive(Debug, Clone)]
pub struct MiTables {
    pub phi: PhiTable,
    pub f: FTable,
}

impl MiTables {
    pub fn build(sensor: &SensorModel, clamp_eps: f64) -> Result<Self, SensorError> {
        Ok(Self {
            phi: PhiTable::default(),
            f: FTable::build(sensor.delta_occ, clamp_eps, FTable::DEFAULT_SAMPLES)?,
        })
    }
}

/// Relative tolerance for treating cell widths as equal.
const WIDTH_TOL: f64 = 1e-9;

/// A beam ready for MI evaluation: occupancies, odds ratios (with logarithms
/// precomputed for table addressing), and the boundary distances `l_1..l_{n+1}`.
#[derive(Debug, Clone)]
pub struct BeamView {
    pub occupancies: Vec<f64>,
    pub odds: Vec<f64>,
    pub ln_odds: Vec<f64>,
    pub boundaries: Vec<f64>,
    /// Set when every cell (including first and last) has the same width.
    strict_uniform: Option<f64>,
}

impl BeamView {
    /// Build from an occupancy sequence and its boundary distances.
    pub fn from_parts(occupancies: Vec<f64>, boundaries: Vec<f64>) -> Result<Self, MiError> {
        let n = occupancies.len();
        if n == 0 {
            return Err(MiError::BadBeam("empty occupancy sequence".into()));
        }
        if boundaries.len() != n + 1 {
            return Err(MiError::BadBeam(format!(
                "expected {} boundaries, got {}",
                n + 1,
                boundaries.len()
            )));
        }
        for w in boundaries.windows(2) {
            if !(w[1] > w[0]) {
                return Err(MiError::BadBeam("boundaries not strictly increasing".into()));
            }
        }
        if occupancies.iter().any(|&o| !(o > 0.0 && o < 1.0)) {
            return Err(MiError::BadBeam("occupancies must lie in (0,1)".into()));
        }
        let odds: Vec<f64> = occupancies.iter().map(|&o| o / (1.0 - o)).collect();
        let ln_odds = odds.iter().map(|&r| r.ln()).collect();
        let w0 = boundaries[1] - boundaries[0];
        let strict = boundaries
            .windows(2)
            .all(|w| ((w[1] - w[0]) - w0).abs() <= WIDTH_TOL * w0.max(1e-300));
        Ok(Self {
            occupancies,
            odds,
            ln_odds,
            boundaries,
            strict_uniform: strict.then_some(w0),
        })
    }

    /// Uniform-width beam starting at distance zero.
    pub fn uniform(occupancies: Vec<f64>, width: f64) -> Result<Self, MiError> {
        if !(width > 0.0) {
            return Err(MiError::BadBeam(format!("non-positive width {width}")));
        }
        let bounds = (0..=occupancies.len()).map(|i| i as f64 * width).collect();
        Self::from_parts(occupancies, bounds)
    }

    /// View of a traced ray (occupancy snapshot plus crossing distances).
    pub fn from_ray(ray: &crate::grid::RayTrace) -> Result<Self, MiError> {
        Self::from_parts(ray.occupancies.clone(), ray.boundaries.clone())
    }

    /// Sample the grid along a ray onto uniform virtual cells one grid
    /// resolution wide (occupancy taken at each virtual-cell midpoint). This
    /// is the beam construction used by MI surfaces: every algorithm,
    /// including the uniform-noise ones, accepts the result.
    pub fn resample(
        grid: &OccupancyGrid2D,
        origin: Pose,
        angle: f64,
        max_range: f64,
    ) -> Result<Self, MiError> {
        Self::resample_with_cells(grid, origin, angle, max_range).map(|(beam, _)| beam)
    }

    /// As [`BeamView::resample`], also reporting the grid cell index backing
    /// each virtual cell.
    pub fn resample_with_cells(
        grid: &OccupancyGrid2D,
        origin: Pose,
        angle: f64,
        max_range: f64,
    ) -> Result<(Self, Vec<usize>), MiError> {
        if !grid.contains_point(origin.x, origin.y) {
            return Err(MiError::BadBeam("origin outside grid".into()));
        }
        let w = grid.resolution;
        let (dx, dy) = (angle.cos(), angle.sin());
        let (ex, ey) = grid.extent();
        let exit = |pos: f64, dir: f64, hi: f64| -> f64 {
            if dir > 0.0 {
                (hi - pos) / dir
            } else if dir < 0.0 {
                -pos / dir
            } else {
                f64::INFINITY
            }
        };
        let t_exit = exit(origin.x, dx, ex).min(exit(origin.y, dy, ey));
        let total = max_range.min(t_exit);
        let n = ((total / w).floor() as usize).max(1);
        let mut cells = Vec::with_capacity(n);
        let occ = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * w;
                let x = (origin.x + t * dx).clamp(0.0, ex * (1.0 - 1e-12));
                let y = (origin.y + t * dy).clamp(0.0, ey * (1.0 - 1e-12));
                let (cx, cy) = grid.cell_at(x, y);
                cells.push(grid.index(cx, cy));
                grid.get(cx, cy)
            })
            .collect();
        Ok((Self::uniform(occ, w)?, cells))
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.occupancies.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.occupancies.is_empty()
    }

    /// Mean cell width, which is also the width of the virtual max-range cell.
    #[inline]
    pub fn mean_width(&self) -> f64 {
        let n = self.len();
        (self.boundaries[n] - self.boundaries[0]) / n as f64
    }

    /// Center of the i-th cell (1-based).
    #[inline]
    fn mu(&self, i: usize) -> f64 {
        0.5 * (self.boundaries[i - 1] + self.boundaries[i])
    }

    /// Center of the virtual cell modelling the max-range return.
    #[inline]
    fn mu_virtual(&self) -> f64 {
        self.boundaries[self.len()] + 0.5 * self.mean_width()
    }

    pub fn strict_uniform_width(&self) -> Option<f64> {
        self.strict_uniform
    }

    /// Common width after snapping the partial first/last cells, or an error
    /// when the interior spacings disagree beyond tolerance.
    pub fn snapped_uniform_width(&self) -> Result<f64, MiError> {
        if let Some(w) = self.strict_uniform {
            return Ok(w);
        }
        let n = self.len();
        if n <= 2 {
            return Ok(self.mean_width());
        }
        let interior: Vec<f64> = (1..n - 1)
            .map(|i| self.boundaries[i + 1] - self.boundaries[i])
            .collect();
        let w = interior[interior.len() / 2];
        for (i, &wi) in interior.iter().enumerate() {
            if (wi - w).abs() > WIDTH_TOL * w {
                return Err(MiError::NonUniformWidths(format!(
                    "interior cell {} has width {} vs {}",
                    i + 1,
                    wi,
                    w
                )));
            }
        }
        Ok(w)
    }
}

/// Hit distribution along a beam. `p[0]` is the probability that every cell
/// is empty (max-range return); `p[j]` that cell `j` is the first occupied.
#[derive(Debug, Clone)]
pub struct HitDistribution {
    pub p: Vec<f64>,
}

/// `P(e_j) = o_j * prod_{l<j} (1 - o_l)` via a single forward pass. Each
/// step costs one multiplication: the hit probability falls out of the
/// difference of consecutive all-empty prefixes.
pub fn compute_pe(beam: &BeamView) -> HitDistribution {
    let n = beam.len();
    let mut p = vec![0.0; n + 1];
    let mut e_prev = 1.0;
    for j in 1..=n {
        let e = e_prev * (1.0 - beam.occupancies[j - 1]);
        p[j] = e_prev - e;
        e_prev = e;
    }
    p[0] = e_prev;
    HitDistribution { p }
}

/// Cumulative information constants `C_k = f(d_occ, r_k) + sum_{i<k} f(d_emp, r_i)`
/// via the prefix recurrence. Returned vector is 1-based (`c[0]` unused).
pub fn compute_ck(beam: &BeamView, f_table: &FTable) -> Vec<f64> {
    let n = beam.len();
    let mut c = vec![0.0; n + 1];
    let mut q = 0.0;
    for k in 1..=n {
        let (f_occ, f_emp) = f_table.pair_interp(beam.ln_odds[k - 1]);
        c[k] = q + f_occ;
        q += f_emp;
    }
    c
}

/// Same prefix structure built from the exact closed form; reference paths
/// only.
fn compute_ck_exact(beam: &BeamView, sensor: &SensorModel) -> Vec<f64> {
    let n = beam.len();
    let mut c = vec![0.0; n + 1];
    let mut q = 0.0;
    for k in 1..=n {
        let r = beam.odds[k - 1];
        c[k] = q + f_value_unchecked(sensor.delta_occ, r);
        q += f_value_unchecked(sensor.delta_emp, r);
    }
    c
}

/// MI result plus the instrumentation payload carried out of the hot loop.
#[derive(Debug, Clone, Copy)]
pub struct MiBreakdown {
    pub mi: f64,
    pub multiplications: u64,
    pub elapsed_ns: u64,
}

/// Which instrumented operation [`count_multiplications`] should run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountedOp {
    ApproxFsmi,
    CsqmiApprox,
}

fn require_gaussian(sensor: &SensorModel) -> Result<(), MiError> {
    match sensor.noise {
        NoiseKind::Gaussian | NoiseKind::TruncatedGaussian { .. } => Ok(()),
        NoiseKind::Uniform { .. } => Err(MiError::RequiresGaussian),
    }
}

/// Cumulative information constants with marked cells contributing nothing;
/// used by path planners to avoid double counting across scan poses.
pub fn compute_ck_masked(beam: &BeamView, f_table: &FTable, masked: &[bool]) -> Vec<f64> {
    let n = beam.len();
    debug_assert_eq!(masked.len(), n);
    let mut c = vec![0.0; n + 1];
    let mut q = 0.0;
    for k in 1..=n {
        if masked[k - 1] {
            c[k] = q;
            continue;
        }
        let (f_occ, f_emp) = f_table.pair_interp(beam.ln_odds[k - 1]);
        c[k] = q + f_occ;
        q += f_emp;
    }
    c
}

/// Shared core of the exact and truncated Gaussian evaluations. `delta`
/// bounds the inner-sum window in cells; anything >= n reproduces the full
/// double sum. Returns (mi, multiplications).
fn fsmi_core(
    beam: &BeamView,
    sensor: &SensorModel,
    tables: &MiTables,
    delta: usize,
) -> (f64, u64) {
    let pe = compute_pe(beam);
    let c = compute_ck(beam, &tables.f);
    fsmi_windowed(beam, sensor, tables, delta, &pe, &c)
}

/// Truncated Gaussian evaluation with caller-supplied hit distribution and
/// information constants.
pub(crate) fn fsmi_windowed(
    beam: &BeamView,
    sensor: &SensorModel,
    tables: &MiTables,
    delta: usize,
    pe: &HitDistribution,
    c: &[f64],
) -> (f64, u64) {
    let n = beam.len();
    let mut mults = n as u64; // forward pass of compute_pe
    let inv_sigma = 1.0 / sensor.sigma;
    let mut acc = 0.0;

    if let Some(w) = beam.strict_uniform {
        // Constant width makes the kernel a function of the index offset
        // alone, shared between +d and -d.
        let scaled = w * inv_sigma;
        let dmax = delta.min(n);
        let g: Vec<f64> = (0..=dmax)
            .map(|d| {
                tables.phi.phi((d as f64 + 0.5) * scaled) - tables.phi.phi((d as f64 - 0.5) * scaled)
            })
            .collect();
        for j in 1..=n {
            let mut s = g[0] * c[j];
            let mut jm = 1;
            let reach = (j - 1).max(n - j).min(dmax);
            for (d, &gd) in g.iter().enumerate().take(reach + 1).skip(1) {
                let mut csum = 0.0;
                let mut any = false;
                if j > d {
                    csum += c[j - d];
                    any = true;
                }
                if j + d <= n {
                    csum += c[j + d];
                    any = true;
                }
                if any {
                    s += gd * csum;
                    jm += 1;
                }
            }
            acc += pe.p[j] * s;
            mults += jm + 1;
        }
        // virtual max-range cell sits one position past the last real cell
        let mut s0 = 0.0;
        let reach = dmax.min(n);
        for (d, &gd) in g.iter().enumerate().take(reach + 1).skip(1) {
            s0 += gd * c[n + 1 - d];
            mults += 1;
        }
        acc += pe.p[0] * s0;
        mults += 1;
    } else {
        // General widths: per hit cell, evaluate the CDF at each boundary in
        // the window once and difference adjacent values.
        for jpos in 1..=n + 1 {
            let mu = if jpos <= n { beam.mu(jpos) } else { beam.mu_virtual() };
            let p_hit = if jpos <= n { pe.p[jpos] } else { pe.p[0] };
            let lo = jpos.saturating_sub(delta).max(1);
            let hi = (jpos + delta).min(n);
            if lo > hi {
                continue;
            }
            let mut phi_prev = tables.phi.phi((beam.boundaries[lo - 1] - mu) * inv_sigma);
            let mut s = 0.0;
            for k in lo..=hi {
                let phi_next = tables.phi.phi((beam.boundaries[k] - mu) * inv_sigma);
                s += c[k] * (phi_next - phi_prev);
                phi_prev = phi_next;
                mults += 1;
            }
            acc += p_hit * s;
            mults += 1;
        }
    }
    (acc, mults)
}

/// Exact Shannon MI between the beam's range measurement and the cells it
/// intersects, via the analytic double sum over hit cells and readout cells.
pub fn fsmi(beam: &BeamView, sensor: &SensorModel, tables: &MiTables) -> Result<MiBreakdown, MiError> {
    require_gaussian(sensor)?;
    let start = Instant::now();
    let (mi, mults) = fsmi_core(beam, sensor, tables, beam.len());
    Ok(MiBreakdown {
        mi,
        multiplications: mults,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Gaussian-truncated variant: the inner sum is restricted to `delta` cells
/// each side of the hit cell, reproducing `fsmi` exactly once `delta >= n`.
pub fn approx_fsmi(
    beam: &BeamView,
    sensor: &SensorModel,
    tables: &MiTables,
    delta: u32,
) -> Result<MiBreakdown, MiError> {
    require_gaussian(sensor)?;
    if delta < 1 {
        return Err(MiError::BadTruncation(delta));
    }
    let start = Instant::now();
    let (mi, mults) = fsmi_core(beam, sensor, tables, delta as usize);
    Ok(MiBreakdown {
        mi,
        multiplications: mults,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Midpoint-density kernel variant of [`fsmi`]/[`approx_fsmi`] used to
/// cross-check the run-length-encoded evaluations, which expand the Gaussian
/// at integer cell offsets rather than integrating it across cell boundaries.
/// Requires a strictly uniform beam; there is no max-range term.
pub fn fsmi_pdf_kernel(
    beam: &BeamView,
    sensor: &SensorModel,
    tables: &MiTables,
    delta: Option<u32>,
) -> Result<MiBreakdown, MiError> {
    require_gaussian(sensor)?;
    let w = beam
        .strict_uniform_width()
        .ok_or_else(|| MiError::NonUniformWidths("pdf kernel needs uniform cells".into()))?;
    let start = Instant::now();
    let n = beam.len();
    let delta = delta.map(|d| d as usize).unwrap_or(n).min(n);
    let sigma_cells = sensor.sigma / w;
    let inv_two_var = 1.0 / (2.0 * sigma_cells * sigma_cells);
    let g: Vec<f64> = (0..=delta)
        .map(|d| (-((d * d) as f64) * inv_two_var).exp())
        .collect();
    let pe = compute_pe(beam);
    let c = compute_ck(beam, &tables.f);
    let mut acc = 0.0;
    for j in 1..=n {
        let mut s = g[0] * c[j];
        for (d, &gd) in g.iter().enumerate().skip(1) {
            let mut csum = 0.0;
            if j > d {
                csum += c[j - d];
            }
            if j + d <= n {
                csum += c[j + d];
            }
            s += gd * csum;
        }
        acc += pe.p[j] * s;
    }
    let mi = acc / ((2.0 * std::f64::consts::PI).sqrt() * sigma_cells);
    Ok(MiBreakdown {
        mi,
        multiplications: 0,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Exact MI under the uniform noise model via prefix sums (Theorem-style
/// window differences with index clamping).
pub fn uniform_fsmi(
    beam: &BeamView,
    _sensor: &SensorModel,
    tables: &MiTables,
    h: u32,
) -> Result<MiBreakdown, MiError> {
    beam.snapped_uniform_width()?;
    let start = Instant::now();
    let n = beam.len();
    let h = h as usize;
    // prefix sums D_i = sum_{k<=i} C_k built in one pass over the f table
    let mut d = vec![0.0; n + 1];
    let mut q = 0.0;
    for k in 1..=n {
        let (f_occ, f_emp) = tables.f.pair_interp(beam.ln_odds[k - 1]);
        d[k] = d[k - 1] + q + f_occ;
        q += f_emp;
    }
    let mut mults = n as u64;
    // hit probabilities stream through the window sum without materializing
    let mut acc = 0.0;
    let mut e_prev = 1.0;
    for j in 1..=n {
        let e = e_prev * (1.0 - beam.occupancies[j - 1]);
        let hi = (j + h).min(n);
        let lo = j - (h + 1).min(j);
        acc += (e_prev - e) * (d[hi] - d[lo]);
        e_prev = e;
        mults += 1;
    }
    acc += e_prev * d[h.min(n)]; // all-empty event: window covers cells 1..H
    let mi = acc / (2.0 * h as f64 + 1.0);
    mults += 2;
    Ok(MiBreakdown {
        mi,
        multiplications: mults,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Gaussian pdf with variance `2 sigma^2` evaluated at `x`.
#[inline]
fn pdf_two_sigma_sq(x: f64, sigma: f64) -> f64 {
    let var2 = 2.0 * sigma * sigma;
    (-x * x / (2.0 * var2)).exp() / (2.0 * std::f64::consts::PI * var2).sqrt()
}

/// Shared core of exact and truncated CSQMI. Positions run 1..=n for real
/// cells with the virtual max-range cell at n+1.
fn csqmi_core(beam: &BeamView, sensor: &SensorModel, delta: usize) -> (f64, u64) {
    let n = beam.len();
    let mut mults = 0u64;

    // hit probabilities, position-indexed
    let pe = compute_pe(beam);
    mults += n as u64;
    let mut p = vec![0.0; n + 2];
    p[1..=n].copy_from_slice(&pe.p[1..=n]);
    p[n + 1] = pe.p[0];

    // w_l = P(e_l)^2 * prod_{j>l} (o_j^2 + (1-o_j)^2): a hit on cell l pins
    // every cell up to l, while the cells beyond stay free to vary. The
    // all-empty event pins the whole map, so its product is empty.
    let mut w = vec![0.0; n + 2];
    let mut rho = 1.0; // running suffix product
    for l in (1..=n).rev() {
        w[l] = p[l] * p[l] * rho;
        let o = beam.occupancies[l - 1];
        let o2 = o * o;
        let s = 1.0 - (o + o) + o2 + o2; // o^2 + (1-o)^2
        rho *= s;
        mults += 4;
    }
    let rho_all = rho;
    w[n + 1] = p[n + 1] * p[n + 1];
    mults += 1;

    // The two double sums are evaluated independently, as in the structure
    // the multiplication-count comparison describes: each hoists its outer
    // weight and folds the symmetric kernel pairwise over the inner index.
    let mus: Vec<f64> = (1..=n)
        .map(|i| beam.mu(i))
        .chain(std::iter::once(beam.mu_virtual()))
        .collect();
    let uniform = beam.strict_uniform;
    let kernel: Vec<f64> = match uniform {
        Some(wdt) => (0..=delta.min(n + 1))
            .map(|d| pdf_two_sigma_sq(d as f64 * wdt, sensor.sigma))
            .collect(),
        None => Vec::new(),
    };
    let npos = n + 1;
    let inner_sum = |q: usize, mults: &mut u64| -> f64 {
        let mut s;
        if uniform.is_some() {
            s = kernel[0] * p[q];
            *mults += 1;
            for (d, &kd) in kernel.iter().enumerate().skip(1) {
                let mut psum = 0.0;
                let mut any = false;
                if q > d {
                    psum += p[q - d];
                    any = true;
                }
                if q + d <= npos {
                    psum += p[q + d];
                    any = true;
                }
                if any {
                    s += kd * psum;
                    *mults += 1;
                }
            }
        } else {
            s = 0.0;
            let lo = q.saturating_sub(delta).max(1);
            let hi = (q + delta).min(npos);
            for t in lo..=hi {
                s += pdf_two_sigma_sq(mus[t - 1] - mus[q - 1], sensor.sigma) * p[t];
                *mults += 1;
            }
        }
        s
    };

    let n0 = pdf_two_sigma_sq(0.0, sensor.sigma);
    let sum_w: f64 = (1..=npos).map(|l| w[l]).sum();
    let mut joint = 0.0;
    for q in 1..=npos {
        joint += p[q] * inner_sum(q, &mut mults);
        mults += 1;
    }
    let mut cross = 0.0;
    for q in 1..=npos {
        cross += w[q] * inner_sum(q, &mut mults);
        mults += 1;
    }
    let mi = (n0 * sum_w).ln() + (rho_all * joint).ln() - 2.0 * cross.ln();
    mults += 3;
    (mi, mults)
}

/// Cauchy-Schwarz quadratic MI between the beam and the map, exact form.
pub fn csqmi_exact(beam: &BeamView, sensor: &SensorModel) -> Result<MiBreakdown, MiError> {
    require_gaussian(sensor)?;
    let start = Instant::now();
    let (mi, mults) = csqmi_core(beam, sensor, beam.len() + 1);
    Ok(MiBreakdown {
        mi,
        multiplications: mults,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Truncated CSQMI: both double sums restricted to `delta` cells around the
/// diagonal; equals the exact form once `delta >= n`.
pub fn csqmi_approx(
    beam: &BeamView,
    sensor: &SensorModel,
    delta: u32,
) -> Result<MiBreakdown, MiError> {
    require_gaussian(sensor)?;
    if delta < 1 {
        return Err(MiError::BadTruncation(delta));
    }
    let start = Instant::now();
    let (mi, mults) = csqmi_core(beam, sensor, delta as usize);
    Ok(MiBreakdown {
        mi,
        multiplications: mults,
        elapsed_ns: start.elapsed().as_nanos() as u64,
    })
}

/// Kahan-compensated accumulator for the long reference sums.
#[derive(Default, Clone, Copy)]
struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Integration domain shared by the numerical references: the beam plus the
/// virtual cell plus a Gaussian support margin.
fn integration_zmax(beam: &BeamView, sensor: &SensorModel) -> f64 {
    beam.boundaries[beam.len()] + beam.mean_width() + 6.0 * sensor.sigma
}

/// Ground-truth numerical MI: midpoint Riemann sum of
/// `sum_i P(Z=z) f(delta_i(z), r_i)` over the measurement support. The sum is
/// reorganized per hit cell (mathematically identical; terms beyond the
/// radius where the Gaussian underflows are dropped) so fine steps stay
/// affordable, and accumulation is compensated. Uses exact closed-form `f`.
pub fn smi_reference(beam: &BeamView, sensor: &SensorModel, step: f64) -> Result<f64, MiError> {
    require_gaussian(sensor)?;
    if !(step > 0.0) {
        return Err(MiError::BadStep(step));
    }
    let n = beam.len();
    let pe = compute_pe(beam);
    let c = compute_ck_exact(beam, sensor);
    let f_emp_total: f64 = beam
        .odds
        .iter()
        .map(|&r| f_value_unchecked(sensor.delta_emp, r))
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let zmax = integration_zmax(beam, sensor);
    let n_z = (zmax / step).floor() as i64;
    let sigma = sensor.sigma;
    let inv_sigma = 1.0 / sigma;
    let norm = step / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    // beyond ~8.6 sigma the Gaussian factor is below f64 noise relative to
    // the window peak
    let radius = 8.6 * sigma;

    let mut total = Kahan::default();
    for jpos in 1..=n + 1 {
        let mu = if jpos <= n { beam.mu(jpos) } else { beam.mu_virtual() };
        let p_hit = if jpos <= n { pe.p[jpos] } else { pe.p[0] };
        if p_hit == 0.0 {
            continue;
        }
        let i_lo = (((mu - radius) / step - 0.5).ceil() as i64).max(0);
        let i_hi = (((mu + radius) / step - 0.5).floor() as i64).min(n_z - 1);
        // cell pointer for F(z); advances as z sweeps the window
        let mut cell = match beam
            .boundaries
            .binary_search_by(|b| b.partial_cmp(&((i_lo as f64 + 0.5) * step)).unwrap())
        {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        let mut inner = Kahan::default();
        for i in i_lo..=i_hi {
            let z = (i as f64 + 0.5) * step;
            while cell + 1 <= n && beam.boundaries[cell + 1] <= z {
                cell += 1;
            }
            let f_z = if cell >= n { f_emp_total } else { c[cell + 1] };
            let d = (z - mu) * inv_sigma;
            inner.add((-0.5 * d * d).exp() * f_z);
        }
        total.add(p_hit * inner.sum);
    }
    Ok(total.sum * norm)
}

/// The numerical-integration baseline as an algorithm under test: a direct
/// transcription that evaluates the measurement prior at every sample and the
/// information kernel from its closed form per (cell, sample) pair.
pub fn smi_baseline(beam: &BeamView, sensor: &SensorModel, step: f64) -> Result<f64, MiError> {
    require_gaussian(sensor)?;
    if !(step > 0.0) {
        return Err(MiError::BadStep(step));
    }
    let n = beam.len();
    let pe = compute_pe(beam);
    let zmax = integration_zmax(beam, sensor);
    let n_z = (zmax / step).floor() as usize;
    let sigma = sensor.sigma;
    let inv_sigma = 1.0 / sigma;
    let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * sigma);

    // measurement prior P(Z = z) over the full sample grid
    let mut prior = vec![0.0; n_z];
    for (i, pz) in prior.iter_mut().enumerate() {
        let z = (i as f64 + 0.5) * step;
        let mut s = 0.0;
        for jpos in 1..=n + 1 {
            let mu = if jpos <= n { beam.mu(jpos) } else { beam.mu_virtual() };
            let p_hit = if jpos <= n { pe.p[jpos] } else { pe.p[0] };
            let d = (z - mu) * inv_sigma;
            s += p_hit * (-0.5 * d * d).exp();
        }
        *pz = s * norm;
    }

    // per-cell numerical integral of P(z) f(delta_i(z), r_i)
    let mut total = 0.0;
    for i in 1..=n {
        let r = beam.odds[i - 1];
        let lo = beam.boundaries[i - 1];
        let hi = beam.boundaries[i];
        let mut cell_sum = 0.0;
        for (iz, &pz) in prior.iter().enumerate() {
            let z = (iz as f64 + 0.5) * step;
            if z < lo {
                continue; // measurement before the cell carries no verdict
            }
            let delta = if z < hi { sensor.delta_occ } else { sensor.delta_emp };
            cell_sum += pz * f_value_unchecked(delta, r);
        }
        total += cell_sum * step;
    }
    Ok(total)
}

/// Run the chosen instrumented operation on a synthetic uniform beam and
/// report the floating multiplications in its per-beam hot loop (table
/// lookups excluded). An empty occupancy slice counts zero.
pub fn count_multiplications(
    op: CountedOp,
    occupancies: &[f64],
    width: f64,
    sensor: &SensorModel,
    tables: &MiTables,
    delta: u32,
) -> Result<u64, MiError> {
    if occupancies.is_empty() {
        return Ok(0);
    }
    let beam = BeamView::uniform(occupancies.to_vec(), width)?;
    let b = match op {
        CountedOp::ApproxFsmi => approx_fsmi(&beam, sensor, tables, delta)?,
        CountedOp::CsqmiApprox => csqmi_approx(&beam, sensor, delta)?,
    };
    Ok(b.multiplications)
}

//! Sensor noise models, the per-cell information kernel `f(delta, r)`, and the
//! lookup tables shared by every MI algorithm.

use thiserror::Error;

/// Inverse of sqrt(2), used to map the normal CDF onto `erfc`.
const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("sigma must be positive, got {0}")]
    BadSigma(f64),
    #[error("delta_occ must be > 1, got {0}")]
    BadDeltaOcc(f64),
    #[error("max_range must be positive, got {0}")]
    BadMaxRange(f64),
    #[error("truncation width must be >= 1, got {0}")]
    BadTruncation(u32),
    #[error("f(delta, r) requires positive arguments, got delta={0}, r={1}")]
    NonPositive(f64, f64),
}

/// Measurement noise model attached to a [`SensorModel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    /// Zero-mean Gaussian with the model's sigma, full support.
    Gaussian,
    /// Gaussian with the kernel zeroed beyond `delta` cells from the hit cell.
    TruncatedGaussian { delta: u32 },
    /// Uniform over the hit cell widened by `h` cells on each side.
    Uniform { h: u32 },
}

/// Range sensor description: Gaussian std-dev, inverse-model odds multipliers,
/// and maximum range. `delta_emp` is pinned to `1 / delta_occ` so a single
/// f-table serves both query kinds through the reciprocal identity.
#[derive(Debug, Clone, Copy)]
pub struct SensorModel {
    pub sigma: f64,
    pub delta_occ: f64,
    pub delta_emp: f64,
    pub max_range: f64,
    pub noise: NoiseKind,
}

impl SensorModel {
    pub fn new(
        sigma: f64,
        delta_occ: f64,
        max_range: f64,
        noise: NoiseKind,
    ) -> Result<Self, SensorError> {
        if !(sigma > 0.0) {
            return Err(SensorError::BadSigma(sigma));
        }
        if !(delta_occ > 1.0) {
            return Err(SensorError::BadDeltaOcc(delta_occ));
        }
        if !(max_range > 0.0) {
            return Err(SensorError::BadMaxRange(max_range));
        }
        if let NoiseKind::TruncatedGaussian { delta } = noise {
            if delta < 1 {
                return Err(SensorError::BadTruncation(delta));
            }
        }
        Ok(Self {
            sigma,
            delta_occ,
            delta_emp: 1.0 / delta_occ,
            max_range,
            noise,
        })
    }
}

/// Per-cell information kernel, in nats:
/// `f(delta, r) = ln((r+1)/(r+1/delta)) - ln(delta)/(r*delta+1)`.
pub fn f_value(delta: f64, r: f64) -> Result<f64, SensorError> {
    if !(delta > 0.0) || !(r > 0.0) {
        return Err(SensorError::NonPositive(delta, r));
    }
    Ok(f_value_unchecked(delta, r))
}

#[inline]
pub(crate) fn f_value_unchecked(delta: f64, r: f64) -> f64 {
    ((r + 1.0) / (r + 1.0 / delta)).ln() - delta.ln() / (r * delta + 1.0)
}

/// Standard normal CDF via `erfc`, used to build [`PhiTable`] and as the
/// reference in tests.
#[inline]
pub fn normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u * FRAC_1_SQRT_2)
}

/// Precomputed standard normal CDF over `[-6, 6]` in sigma-scaled units with
/// linear interpolation; saturates to 0/1 outside the domain.
#[derive(Debug, Clone)]
pub struct PhiTable {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    inv_step: f64,
    values: Vec<f64>,
}

impl Default for PhiTable {
    fn default() -> Self {
        Self::build(6.0, 1e-3)
    }
}

impl PhiTable {
    /// Sample the CDF over `[-half_width, half_width]` at the given spacing.
    pub fn build(half_width: f64, step: f64) -> Self {
        assert!(half_width > 0.0 && step > 0.0);
        let n = (2.0 * half_width / step).round() as usize + 1;
        let values = (0..n)
            .map(|i| normal_cdf(-half_width + i as f64 * step))
            .collect();
        Self {
            lo: -half_width,
            hi: half_width,
            step,
            inv_step: 1.0 / step,
            values,
        }
    }

    /// CDF at `u` (already divided by sigma). Linear interpolation between
    /// samples, clamped to 0/1 beyond the table domain.
    #[inline]
    pub fn phi(&self, u: f64) -> f64 {
        if u <= self.lo {
            return 0.0;
        }
        if u >= self.hi {
            return 1.0;
        }
        let pos = (u - self.lo) * self.inv_step;
        let idx = pos as usize;
        let frac = pos - idx as f64;
        let a = self.values[idx];
        let b = self.values[idx + 1];
        a + (b - a) * frac
    }
}

/// Which odds multiplier an f-table query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaKind {
    Occ,
    Emp,
}

/// Lookup table for `f(delta_occ, r)` sampled uniformly on the log-odds axis.
///
/// With `delta_emp = 1/delta_occ`, queries for the empty-cell multiplier reuse
/// the same table through `f(delta_emp, r) = f(delta_occ, 1/r)`, which on the
/// symmetric log-odds axis is an index reflection and therefore exact at
/// lattice points.
#[derive(Debug, Clone)]
pub struct FTable {
    pub delta_occ: f64,
    pub lo: f64,
    pub step: f64,
    inv_step: f64,
    values: Vec<f64>,
}

impl FTable {
    pub const DEFAULT_SAMPLES: usize = 4096;

    /// Build over the odds range implied by the occupancy clamp bounds:
    /// `r` spans `[eps/(1-eps), (1-eps)/eps]`.
    pub fn build(delta_occ: f64, clamp_eps: f64, samples: usize) -> Result<Self, SensorError> {
        if !(delta_occ > 1.0) {
            return Err(SensorError::BadDeltaOcc(delta_occ));
        }
        assert!(samples >= 2 && clamp_eps > 0.0 && clamp_eps < 0.5);
        let hi = ((1.0 - clamp_eps) / clamp_eps).ln();
        let lo = -hi;
        let step = (hi - lo) / (samples - 1) as f64;
        let values = (0..samples)
            .map(|i| f_value_unchecked(delta_occ, (lo + i as f64 * step).exp()))
            .collect();
        Ok(Self {
            delta_occ,
            lo,
            step,
            inv_step: 1.0 / step,
            values,
        })
    }

    /// Nearest-sample query by odds ratio; `r` outside the domain clamps to
    /// the table edge.
    pub fn lookup(&self, kind: DeltaKind, r: f64) -> f64 {
        let ln_r = r.ln();
        match kind {
            DeltaKind::Occ => self.nearest(ln_r),
            DeltaKind::Emp => self.nearest(-ln_r),
        }
    }

    #[inline]
    fn clamp_pos(&self, ln_r: f64) -> f64 {
        let pos = (ln_r - self.lo) * self.inv_step;
        pos.clamp(0.0, (self.values.len() - 1) as f64)
    }

    #[inline]
    pub(crate) fn nearest(&self, ln_r: f64) -> f64 {
        self.values[self.clamp_pos(ln_r).round() as usize]
    }

    /// Linearly interpolated single-kind queries keyed by a precomputed
    /// `ln r`; the hot paths use [`FTable::pair_interp`] instead.
    #[cfg_attr(not(test), allow(dead_code))]
    #[inline]
    pub(crate) fn occ_interp(&self, ln_r: f64) -> f64 {
        self.interp(ln_r)
    }

    #[cfg_attr(not(test), allow(dead_code))]
    #[inline]
    pub(crate) fn emp_interp(&self, ln_r: f64) -> f64 {
        self.interp(-ln_r)
    }

    /// Both multipliers from one position computation: the axis is symmetric,
    /// so the empty-kind value interpolates at the mirrored position.
    #[inline]
    pub(crate) fn pair_interp(&self, ln_r: f64) -> (f64, f64) {
        let last = self.values.len() - 1;
        let pos = self.clamp_pos(ln_r);
        let idx = (pos as usize).min(last - 1);
        let frac = pos - idx as f64;
        let occ = self.values[idx] + (self.values[idx + 1] - self.values[idx]) * frac;
        // mirrored position last - pos falls between last-idx-1 and last-idx
        let m = last - idx;
        let emp = self.values[m] + (self.values[m - 1] - self.values[m]) * frac;
        (occ, emp)
    }

    #[cfg_attr(not(test), allow(dead_code))]
    #[inline]
    fn interp(&self, ln_r: f64) -> f64 {
        let pos = self.clamp_pos(ln_r);
        let idx = (pos as usize).min(self.values.len() - 2);
        let frac = pos - idx as f64;
        let a = self.values[idx];
        let b = self.values[idx + 1];
        a + (b - a) * frac
    }
}

/// Width (in cells, each side of the hit cell) of the uniform distribution
/// that matches a Gaussian of std-dev `sigma` in mean and variance:
/// `H = round(sqrt(3) * sigma/cell_width - 1/2)`, clamped at zero.
pub fn gaussian_to_uniform_h(sigma: f64, cell_width: f64) -> u32 {
    assert!(sigma > 0.0 && cell_width > 0.0);
    let h = (3.0f64.sqrt() * sigma / cell_width - 0.5).round();
    if h < 0.0 {
        0
    } else {
        h as u32
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_neutral_delta_is_zero() {
        for r in [0.01, 0.5, 1.0, 7.3, 500.0] {
            assert_eq!(f_value(1.0, r).unwrap(), 0.0);
        }
    }

    #[test]
    fn f_direct_arithmetic_example() {
        // f(1.5, 1) = ln(2/(1 + 2/3)) - ln(1.5)/2.5
        let expect = (2.0f64 / (1.0 + 2.0 / 3.0)).ln() - 1.5f64.ln() / 2.5;
        let got = f_value(1.5, 1.0).unwrap();
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.02013).abs() < 1e-5);
    }

    #[test]
    fn f_reciprocal_identity() {
        // delta_emp * delta_occ = 1 makes f(delta_emp, r) = f(delta_occ, 1/r)
        for r in [0.1, 0.5, 2.0, 9.0] {
            let lhs = f_value(2.0 / 3.0, r).unwrap();
            let rhs = f_value(1.5, 1.0 / r).unwrap();
            assert!((lhs - rhs).abs() < 1e-14, "r={r}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn f_positive_for_informative_model() {
        for r in [1e-4, 0.3, 1.0, 42.0, 1e4] {
            assert!(f_value(1.5, r).unwrap() > 0.0);
        }
    }

    #[test]
    fn f_rejects_non_positive() {
        assert!(f_value(0.0, 1.0).is_err());
        assert!(f_value(1.5, -2.0).is_err());
    }

    #[test]
    fn phi_center_and_saturation() {
        let t = PhiTable::default();
        assert_eq!(t.phi(0.0), 0.5);
        assert_eq!(t.phi(100.0), 1.0);
        assert_eq!(t.phi(-100.0), 0.0);
    }

    #[test]
    fn phi_matches_erf_reference() {
        let t = PhiTable::default();
        assert!((t.phi(1.0) - 0.841344746068543).abs() < 1e-6);
        for i in 0..200 {
            let u = -5.9 + i as f64 * 0.059;
            assert!((t.phi(u) - normal_cdf(u)).abs() < 1e-7, "u={u}");
        }
    }

    #[test]
    fn phi_symmetry_at_samples() {
        let t = PhiTable::default();
        for i in 0..=6000 {
            let u = i as f64 * 1e-3;
            assert!((t.phi(u) + t.phi(-u) - 1.0).abs() < 1e-9, "u={u}");
        }
    }

    #[test]
    fn phi_monotone_non_decreasing() {
        let t = PhiTable::default();
        let mut prev = -1.0;
        for i in 0..=12000 {
            let v = t.phi(-6.0 + i as f64 * 1e-3);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn ftable_exact_on_lattice() {
        let t = FTable::build(1.5, 1e-4, 4096).unwrap();
        // reconstruct a lattice point and query it
        for idx in [0usize, 1, 17, 2047, 2048, 4095] {
            let ln_r = t.lo + idx as f64 * t.step;
            let r = ln_r.exp();
            let expect = f_value(1.5, r).unwrap();
            assert!(
                (t.lookup(DeltaKind::Occ, r) - expect).abs() < 1e-12,
                "idx={idx}"
            );
        }
    }

    #[test]
    fn ftable_reciprocal_identity_on_lattice() {
        let t = FTable::build(1.5, 1e-4, 4096).unwrap();
        for idx in [3usize, 100, 2048, 4000] {
            let r = (t.lo + idx as f64 * t.step).exp();
            let a = t.lookup(DeltaKind::Emp, r);
            let b = t.lookup(DeltaKind::Occ, 1.0 / r);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn ftable_scan_deviation_bound() {
        // Exhaustive random scan; the frozen ceiling covers the worst nearest-
        // sample deviation observed at this resolution (measured ~6.4e-6).
        let t = FTable::build(1.5, 1e-4, 4096).unwrap();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut worst = 0.0f64;
        for _ in 0..100_000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let u = (state >> 11) as f64 / (1u64 << 53) as f64;
            let ln_r = -9.2 + 18.4 * u;
            let r = ln_r.exp();
            let dev = (t.lookup(DeltaKind::Occ, r) - f_value(1.5, r).unwrap()).abs();
            worst = worst.max(dev);
        }
        assert!(worst < 2e-5, "worst nearest-sample deviation {worst}");
    }

    #[test]
    fn ftable_clamps_out_of_domain() {
        let t = FTable::build(1.5, 1e-4, 4096).unwrap();
        let edge = t.lookup(DeltaKind::Occ, 1e9);
        let inside = t.lookup(DeltaKind::Occ, ((1.0 - 1e-4) / 1e-4) as f64);
        assert_eq!(edge, inside);
    }

    #[test]
    fn interp_tracks_exact_values() {
        let t = FTable::build(1.5, 1e-4, 4096).unwrap();
        for i in 0..1000 {
            let ln_r = -9.0 + i as f64 * 0.018;
            let exact = f_value(1.5, ln_r.exp()).unwrap();
            assert!((t.occ_interp(ln_r) - exact).abs() < 1e-7, "ln_r={ln_r}");
            let exact_emp = f_value(1.0 / 1.5, ln_r.exp()).unwrap();
            assert!((t.emp_interp(ln_r) - exact_emp).abs() < 1e-7);
        }
    }

    #[test]
    fn uniform_h_examples() {
        assert_eq!(gaussian_to_uniform_h(0.05, 0.1), 0); // sigma' = 0.5
        assert_eq!(gaussian_to_uniform_h(0.2, 0.1), 3); // sigma' = 2 -> round(2.964)
        assert_eq!(gaussian_to_uniform_h(1e-6, 0.1), 0);
    }

    #[test]
    fn sensor_model_validation() {
        assert!(SensorModel::new(0.05, 1.5, 10.0, NoiseKind::Gaussian).is_ok());
        assert!(SensorModel::new(-1.0, 1.5, 10.0, NoiseKind::Gaussian).is_err());
        assert!(SensorModel::new(0.05, 0.9, 10.0, NoiseKind::Gaussian).is_err());
        assert!(
            SensorModel::new(0.05, 1.5, 10.0, NoiseKind::TruncatedGaussian { delta: 0 }).is_err()
        );
        let m = SensorModel::new(0.05, 1.5, 10.0, NoiseKind::Gaussian).unwrap();
        assert!((m.delta_emp * m.delta_occ - 1.0).abs() < 1e-15);
    }
}

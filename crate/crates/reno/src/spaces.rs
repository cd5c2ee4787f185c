//! Concrete function spaces and sampling: the bandlimited space `P_K`, its
//! Fourier and Dirichlet-kernel bases, uniform grids, and the exact
//! sample-to-coefficient bridge via the scaled DFT.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::frames::{AmbientSpace, Frame, PeriodicFunction};

/// The space `P_K` of 2-periodic signals bandlimited to `πK`, viewed inside
/// an ambient space with `k_max >= K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandlimitedSpace {
    k: usize,
    ambient: AmbientSpace,
}

impl BandlimitedSpace {
    pub fn new(k: usize, ambient: AmbientSpace) -> Result<Self> {
        if k > ambient.k_max() {
            return Err(Error::AmbientTooSmall {
                k_max: ambient.k_max(),
                required: k,
            });
        }
        Ok(BandlimitedSpace { k, ambient })
    }

    /// `P_K` in its own minimal ambient space (`k_max = K`).
    pub fn tight(k: usize) -> Self {
        BandlimitedSpace {
            k,
            ambient: AmbientSpace::new(k),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn ambient(&self) -> AmbientSpace {
        self.ambient
    }

    /// Dimension `2K + 1`.
    pub fn dim(&self) -> usize {
        2 * self.k + 1
    }

    /// Nyquist sample count `2K + 1`.
    pub fn nyquist_count(&self) -> usize {
        self.dim()
    }
}

/// Uniform period-2 grid `x_n = 2n/M`, `n = -⌊M/2⌋ .. ⌈M/2⌉ - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleGrid {
    m: usize,
}

impl SampleGrid {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("grid needs at least one node".into()));
        }
        Ok(SampleGrid { m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// First node index `-⌊M/2⌋`.
    pub fn n_min(&self) -> i64 {
        -((self.m / 2) as i64)
    }

    pub fn node(&self, i: usize) -> f64 {
        2.0 * (self.n_min() + i as i64) as f64 / self.m as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.m).map(|i| self.node(i)).collect()
    }
}

/// Point values of a function on a [`SampleGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    pub grid: SampleGrid,
    pub values: Vec<Complex64>,
}

impl SampleVector {
    pub fn new(grid: SampleGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "sample values",
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(SampleVector { grid, values })
    }

    pub fn from_real(grid: SampleGrid, values: &[f64]) -> Result<Self> {
        SampleVector::new(
            grid,
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// The orthonormal Fourier basis `{e^{iπkx}}`, `|k| <= K`, of `P_K`.
pub fn fourier_basis(space: BandlimitedSpace) -> Frame {
    let k = space.k() as i64;
    let vecs = (-k..=k)
        .map(|j| PeriodicFunction::exponential(space.ambient(), j).expect("k within ambient"))
        .collect();
    Frame::new(vecs).expect("nonempty basis")
}

/// The orthonormal Dirichlet sampling basis of `P_K`: shifted, normalized
/// Dirichlet kernels `d(x - 2j/(2K+1)) / sqrt(2K+1)`, `j = 0..2K`.
///
/// Under the 1/2-weighted inner product the normalizer is `1/sqrt(2K+1)`
/// (the unweighted convention would carry an extra `1/sqrt(2)`).
pub fn dirichlet_basis(space: BandlimitedSpace) -> Frame {
    let k = space.k() as i64;
    let dim = space.dim() as f64;
    let norm = 1.0 / dim.sqrt();
    let vecs = (0..space.dim())
        .map(|j| {
            let shift = 2.0 * j as f64 / dim;
            let coeffs_in_band: Vec<Complex64> = (-k..=k)
                .map(|m| {
                    let phase = -PI * m as f64 * shift;
                    Complex64::new(phase.cos(), phase.sin()) * norm
                })
                .collect();
            band_function(space, &coeffs_in_band)
        })
        .collect();
    Frame::new(vecs).expect("nonempty basis")
}

/// The sampling frame of `P_K` induced by an `M`-node grid with `M >= 2K+1`:
/// `M` shifted, normalized Dirichlet kernels of order `K`. Orthonormal at
/// the Nyquist count, a tight overcomplete frame above it.
pub fn sampling_frame(space: BandlimitedSpace, grid: SampleGrid) -> Result<Frame> {
    if grid.len() < space.nyquist_count() {
        return Err(Error::SubNyquist {
            samples: grid.len(),
            required: space.nyquist_count(),
        });
    }
    let k = space.k() as i64;
    let norm = 1.0 / (space.dim() as f64).sqrt();
    let vecs = (0..grid.len())
        .map(|n| {
            let shift = grid.node(n);
            let coeffs_in_band: Vec<Complex64> = (-k..=k)
                .map(|m| {
                    let phase = -PI * m as f64 * shift;
                    Complex64::new(phase.cos(), phase.sin()) * norm
                })
                .collect();
            band_function(space, &coeffs_in_band)
        })
        .collect();
    Frame::new(vecs)
}

/// Builds an ambient function from coefficients given on the band
/// `-K..K` of `space`, zero outside.
pub fn band_function(space: BandlimitedSpace, coeffs: &[Complex64]) -> PeriodicFunction {
    assert_eq!(coeffs.len(), space.dim(), "band coefficient count");
    let k_max = space.ambient().k_max();
    let mut full = vec![Complex64::ZERO; space.ambient().dim()];
    let offset = k_max - space.k();
    full[offset..offset + coeffs.len()].copy_from_slice(coeffs);
    PeriodicFunction::new(space.ambient(), full).expect("ambient dimension")
}

/// Extracts the band `-K..K` coefficients of an ambient function.
pub fn band_coeffs(space: BandlimitedSpace, f: &PeriodicFunction) -> Result<Vec<Complex64>> {
    space.ambient().check_same(&f.space())?;
    let k = space.k() as i64;
    Ok((-k..=k).map(|m| f.coeff(m)).collect())
}

/// Evaluates `f` at every grid node.
pub fn sample(f: &PeriodicFunction, grid: SampleGrid) -> SampleVector {
    let values = (0..grid.len()).map(|i| f.eval(grid.node(i))).collect();
    SampleVector { grid, values }
}

/// Full DFT of a sample vector: bin `k` is `Σ_n s_n e^{-iπ k x_n}` for
/// `k` in the grid's own index range.
pub fn dft(s: &SampleVector) -> Vec<Complex64> {
    let m = s.grid.len();
    let n_min = s.grid.n_min();
    (n_min..n_min + m as i64)
        .map(|k| dft_bin(s, k))
        .collect()
}

fn dft_bin(s: &SampleVector, k: i64) -> Complex64 {
    let m = s.grid.len() as f64;
    let n_min = s.grid.n_min();
    let mut acc = Complex64::ZERO;
    for (i, v) in s.values.iter().enumerate() {
        let n = n_min + i as i64;
        let phase = -2.0 * PI * k as f64 * n as f64 / m;
        acc += v * Complex64::new(phase.cos(), phase.sin());
    }
    acc
}

/// Recovers the `P_K` coefficients from samples on an `M >= 2K+1` grid:
/// `W_k = (DFT s)_k / M`. Exact inverse of [`sample`] for functions in
/// `P_K`; coincides with `T†` of the induced sampling frame.
pub fn samples_to_coeffs(s: &SampleVector, k: usize) -> Result<PeriodicFunction> {
    let required = 2 * k + 1;
    if s.grid.len() < required {
        return Err(Error::SubNyquist {
            samples: s.grid.len(),
            required,
        });
    }
    let m = s.grid.len() as f64;
    let coeffs: Vec<Complex64> = (-(k as i64)..=k as i64)
        .map(|j| dft_bin(s, j) / m)
        .collect();
    PeriodicFunction::new(AmbientSpace::new(k), coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Random real function in P_K, unit-scale coefficients.
    fn random_real_fn(k: usize, seed: u64) -> PeriodicFunction {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut unit = || (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
        let space = AmbientSpace::new(k);
        let mut coeffs = vec![Complex64::ZERO; space.dim()];
        coeffs[k] = c(unit(), 0.0);
        for j in 1..=k {
            let v = c(unit(), unit());
            coeffs[k + j] = v;
            coeffs[k - j] = v.conj();
        }
        PeriodicFunction::new(space, coeffs).unwrap()
    }

    #[test]
    fn fourier_basis_k0_is_constant() {
        let frame = fourier_basis(BandlimitedSpace::tight(0));
        assert_eq!(frame.len(), 1);
        assert!((frame.vectors()[0].eval(0.123) - Complex64::ONE).norm() < 1e-12);
    }

    #[test]
    fn fourier_basis_gram_identity() {
        let frame = fourier_basis(BandlimitedSpace::tight(2));
        assert_eq!(frame.len(), 5);
        for (i, a) in frame.vectors().iter().enumerate() {
            for (j, b) in frame.vectors().iter().enumerate() {
                let g = a.inner(b).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_synthesis_matches_pointwise_sum() {
        let space = BandlimitedSpace::tight(3);
        let frame = fourier_basis(space);
        let coeffs: Vec<Complex64> =
            (0..7).map(|i| c(0.1 * i as f64 - 0.4, 0.05 * i as f64)).collect();
        let f = frame.synthesis(&coeffs).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..10 {
            let x = (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
            let direct: Complex64 = coeffs
                .iter()
                .enumerate()
                .map(|(i, ck)| {
                    let k = i as i64 - 3;
                    let phase = PI * k as f64 * x;
                    ck * Complex64::new(phase.cos(), phase.sin())
                })
                .sum();
            assert!((f.eval(x) - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_gram_identity() {
        let frame = dirichlet_basis(BandlimitedSpace::tight(4));
        for (i, a) in frame.vectors().iter().enumerate() {
            for (j, b) in frame.vectors().iter().enumerate() {
                let g = a.inner(b).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((g - c(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn dirichlet_k1_shift_zero_coeffs() {
        // d(t) = 1 + 2cos(πt) has coefficients (1,1,1); normalized (1,1,1)/√3.
        let frame = dirichlet_basis(BandlimitedSpace::tight(1));
        let v = &frame.vectors()[0];
        let s = 1.0 / 3f64.sqrt();
        for k in -1..=1 {
            assert!((v.coeff(k) - c(s, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_analysis_is_point_sampling() {
        let k = 5usize;
        let space = BandlimitedSpace::tight(k);
        let frame = dirichlet_basis(space);
        let w = random_real_fn(k, 11);
        let a = frame.analysis(&w).unwrap();
        let scale = ((2 * k + 1) as f64).sqrt();
        for (j, aj) in a.iter().enumerate() {
            let x = 2.0 * j as f64 / (2 * k + 1) as f64;
            let direct = w.eval(x);
            assert!((aj * scale - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn dirichlet_roundtrip_cos() {
        // Frame decomposition for w(x) = cos(πx) through the sampling basis.
        let space = BandlimitedSpace::tight(2);
        let frame = dirichlet_basis(space);
        let w = {
            let ambient = space.ambient();
            let mut coeffs = vec![Complex64::ZERO; ambient.dim()];
            coeffs[1] = c(0.5, 0.0); // k = -1
            coeffs[3] = c(0.5, 0.0); // k = +1
            PeriodicFunction::new(ambient, coeffs).unwrap()
        };
        let a = frame.analysis(&w).unwrap();
        let back = frame.synthesis(&a).unwrap();
        assert!(back.sub(&w).unwrap().norm() < 1e-12);
    }

    #[test]
    fn sample_constant_and_cosine() {
        let space = AmbientSpace::new(1);
        let one = PeriodicFunction::exponential(space, 0).unwrap();
        let grid = SampleGrid::new(4).unwrap();
        let s = sample(&one, grid);
        assert!(s.values.iter().all(|v| (v - Complex64::ONE).norm() < 1e-12));

        // cos(πx) on nodes -1, -1/2, 0, 1/2 → -1, 0, 1, 0
        let cosf = PeriodicFunction::new(space, vec![c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0)]).unwrap();
        let s = sample(&cosf, grid);
        let expected = [-1.0, 0.0, 1.0, 0.0];
        for (v, e) in s.values.iter().zip(expected) {
            assert!((v - c(e, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn samples_to_coeffs_exponential_and_scaling() {
        // f = e^{iπx}, K=1, M=3: coefficients (0,0,1), DFT bin = 3·W_1.
        let space = AmbientSpace::new(1);
        let f = PeriodicFunction::exponential(space, 1).unwrap();
        let s = sample(&f, SampleGrid::new(3).unwrap());
        let rec = samples_to_coeffs(&s, 1).unwrap();
        assert!(rec.coeff(-1).norm() < 1e-12);
        assert!(rec.coeff(0).norm() < 1e-12);
        assert!((rec.coeff(1) - Complex64::ONE).norm() < 1e-12);
        let bins = dft(&s);
        // bins indexed k = -1, 0, 1
        assert!((bins[2] - c(3.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn samples_to_coeffs_zero_and_subnyquist() {
        let grid = SampleGrid::new(5).unwrap();
        let s = SampleVector::new(grid, vec![Complex64::ZERO; 5]).unwrap();
        let rec = samples_to_coeffs(&s, 2).unwrap();
        assert!(rec.norm() == 0.0);
        assert!(matches!(
            samples_to_coeffs(&s, 3),
            Err(Error::SubNyquist { .. })
        ));
    }

    #[test]
    fn oversampling_consistency() {
        let k = 6usize;
        let f = random_real_fn(k, 3);
        let nyq = sample(&f, SampleGrid::new(2 * k + 1).unwrap());
        let over = sample(&f, SampleGrid::new(4 * k + 3).unwrap());
        let a = samples_to_coeffs(&nyq, k).unwrap();
        let b = samples_to_coeffs(&over, k).unwrap();
        assert!(a.sub(&b).unwrap().norm() < 1e-10);
        assert!(a.sub(&f).unwrap().norm() < 1e-10);
    }

    #[test]
    fn sub_nyquist_alias_collision() {
        // e^{iπKx} sampled at M = K+1 collides with e^{-iπx}.
        let k = 7usize;
        let m = k + 1;
        let space = AmbientSpace::new(k);
        let hi = PeriodicFunction::exponential(space, k as i64).unwrap();
        let lo = PeriodicFunction::exponential(space, k as i64 - m as i64).unwrap();
        assert_eq!(k as i64 - m as i64, -1);
        let grid = SampleGrid::new(m).unwrap();
        let sh = sample(&hi, grid);
        let sl = sample(&lo, grid);
        for (a, b) in sh.values.iter().zip(&sl.values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn eval_periodicity_and_values() {
        let space = AmbientSpace::new(2);
        let f = random_real_fn(2, 9);
        let e1 = PeriodicFunction::exponential(space, 1).unwrap();
        assert!((e1.eval(0.5) - c(0.0, 1.0)).norm() < 1e-12);
        for &x in &[0.1, -0.7, 1.3] {
            assert!((f.eval(x) - f.eval(x + 2.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn sampling_frame_is_tight_above_nyquist() {
        let space = BandlimitedSpace::tight(3);
        let frame = sampling_frame(space, SampleGrid::new(11).unwrap()).unwrap();
        let b = frame.frame_bounds().unwrap();
        let expected = 11.0 / 7.0;
        assert!((b.lower - expected).abs() < 1e-10);
        assert!((b.upper - expected).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn nyquist_round_trip(k in 0usize..=16, seed in 0u64..1000) {
            let f = random_real_fn(k, seed);
            let s = sample(&f, SampleGrid::new(2 * k + 1).unwrap());
            let rec = samples_to_coeffs(&s, k).unwrap();
            prop_assert!(rec.sub(&f).unwrap().norm() <= 1e-10 * f.norm().max(1.0));
        }

        #[test]
        fn dirichlet_to_fourier_change_of_frame_is_unitary(k in 1usize..=8) {
            let space = BandlimitedSpace::tight(k);
            let d = dirichlet_basis(space);
            let fbasis = fourier_basis(space);
            let m = crate::frames::change_of_frame(&d, &fbasis).unwrap();
            let prod = &m * m.adjoint();
            let eye = nalgebra::DMatrix::<Complex64>::identity(2 * k + 1, 2 * k + 1);
            prop_assert!((prod - eye).norm() < 1e-10);
        }
    }
}

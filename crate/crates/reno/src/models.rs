//! The model zoo: convolutional layer, FNO Fourier layer, SNO,
//! DeepONet-lite, pointwise activations with spectrum analysis, and the
//! squaring operator.

use num_complex::Complex64;

/// A pointwise activation. `Identity` doubles as "no activation".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Gelu,
    Tanh,
    Identity,
}

impl ActivationKind {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::Gelu => gelu(x),
            ActivationKind::Tanh => x.tanh(),
            ActivationKind::Identity => x,
        }
    }

    /// Derivative; relu'(0) is defined as 0.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            ActivationKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Gelu => gelu_prime(x),
            ActivationKind::Tanh => 1.0 - x.tanh().powi(2),
            ActivationKind::Identity => 1.0,
        }
    }

    /// Componentwise action on a complex value (real and imaginary parts
    /// independently). Coincides with the pointwise real action on
    /// real-valued signals.
    pub fn apply_complex(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.apply(z.re), self.apply(z.im))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Gelu => "gelu",
            ActivationKind::Tanh => "tanh",
            ActivationKind::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<ActivationKind> {
        match s {
            "relu" => Some(ActivationKind::Relu),
            "gelu" => Some(ActivationKind::Gelu),
            "tanh" => Some(ActivationKind::Tanh),
            "identity" | "none" => Some(ActivationKind::Identity),
            _ => None,
        }
    }
}

/// Exact Gaussian-CDF gelu, `x·Φ(x)`; erf comes from libm (error well
/// below 1e-7).
fn gelu(x: f64) -> f64 {
    x * normal_cdf(x)
}

fn gelu_prime(x: f64) -> f64 {
    normal_cdf(x) + x * normal_pdf(x)
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}


use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::frames::{AmbientSpace, PeriodicFunction};
use crate::operators::ContinuousOperator;
use crate::spaces::{
    fourier_basis, sample, samples_to_coeffs, BandlimitedSpace, SampleGrid,
    SampleVector,
};

/// Circular convolution layer: `y[m] = Σ_{i=-s..s} k[i] x[(m-i) mod M]`,
/// taps stored as `taps[i+s]`, followed by an optional pointwise
/// activation.
#[derive(Debug, Clone)]
pub struct ConvLayer {
    taps: Vec<f64>,
    activation: ActivationKind,
}

impl ConvLayer {
    pub fn new(taps: Vec<f64>, activation: ActivationKind) -> Result<Self> {
        if taps.is_empty() || taps.len().is_multiple_of(2) {
            return Err(Error::Config("conv taps length must be odd".into()));
        }
        Ok(ConvLayer { taps, activation })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }
}

/// Applies a convolution layer on a sample grid with periodic boundary.
/// The same taps reinterpret on every grid length, which is exactly what
/// breaks representation equivalence across resolutions.
pub fn conv_apply(layer: &ConvLayer, s: &SampleVector) -> Result<SampleVector> {
    let m = s.grid.len();
    if layer.taps.len() > m {
        return Err(Error::KernelTooLong {
            kernel: layer.taps.len(),
            grid: m,
        });
    }
    let half = (layer.taps.len() as i64 - 1) / 2;
    let mut out = Vec::with_capacity(m);
    for mm in 0..m as i64 {
        let mut acc = Complex64::ZERO;
        for i in -half..=half {
            let src = (mm - i).rem_euclid(m as i64) as usize;
            acc += s.values[src] * layer.taps[(i + half) as usize];
        }
        out.push(layer.activation.apply_complex(acc));
    }
    SampleVector::new(s.grid, out)
}

/// One Fourier layer: `v ↦ σ(A v + B + ℱ⁻¹(R ⊙ ℱ v))`, with the spectral
/// multiplier `R` supported on modes `|k| ≤ K_out ≤ K_in`.
#[derive(Debug, Clone)]
pub struct FnoLayer {
    k_in: usize,
    k_out: usize,
    /// Multiplier values for modes `-K_out..K_out`, index 0 at `-K_out`.
    r: Vec<Complex64>,
    a: f64,
    /// Bias function, bandlimited to `K_out`.
    b: PeriodicFunction,
    activation: ActivationKind,
}

impl FnoLayer {
    pub fn new(
        k_in: usize,
        k_out: usize,
        r: Vec<Complex64>,
        a: f64,
        b: PeriodicFunction,
        activation: ActivationKind,
    ) -> Result<Self> {
        if k_out > k_in {
            return Err(Error::Config(format!(
                "fno k_out {k_out} exceeds k_in {k_in}"
            )));
        }
        if r.len() != 2 * k_out + 1 {
            return Err(Error::DimensionMismatch {
                what: "fno multiplier",
                expected: 2 * k_out + 1,
                got: r.len(),
            });
        }
        if b.space().k_max() != k_out {
            return Err(Error::DimensionMismatch {
                what: "fno bias bandwidth",
                expected: k_out,
                got: b.space().k_max(),
            });
        }
        Ok(FnoLayer {
            k_in,
            k_out,
            r,
            a,
            b,
            activation,
        })
    }

    pub fn k_in(&self) -> usize {
        self.k_in
    }

    pub fn k_out(&self) -> usize {
        self.k_out
    }

    pub fn multiplier(&self) -> &[Complex64] {
        &self.r
    }

    pub fn pointwise_weight(&self) -> f64 {
        self.a
    }

    pub fn bias(&self) -> &PeriodicFunction {
        &self.b
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }
}

/// Applies a Fourier layer to samples: coefficients via the scaled DFT,
/// spectral multiply with truncation to `K_out`, pointwise weight and
/// bias in coefficient space, synthesis on the output grid, activation
/// last on output samples.
pub fn fno_apply(layer: &FnoLayer, s: &SampleVector, m_out: usize) -> Result<SampleVector> {
    let v = samples_to_coeffs(s, layer.k_in)?;
    let k_out = layer.k_out as i64;
    let coeffs: Vec<Complex64> = (-k_out..=k_out)
        .map(|k| {
            let w = v.coeff(k);
            let r = layer.r[(k + k_out) as usize];
            r * w + layer.a * w + layer.b.coeff(k)
        })
        .collect();
    let out_fn = PeriodicFunction::new(AmbientSpace::new(layer.k_out), coeffs)?;
    let grid = SampleGrid::new(m_out)?;
    if m_out < 2 * layer.k_out + 1 {
        return Err(Error::SubNyquist {
            samples: m_out,
            required: 2 * layer.k_out + 1,
        });
    }
    let sampled = sample(&out_fn, grid);
    let values = sampled
        .values
        .iter()
        .map(|&z| layer.activation.apply_complex(z))
        .collect();
    SampleVector::new(grid, values)
}

/// Feedforward network, layer rule `x ↦ σ(W x - b)` with the activation
/// skipped on the final layer.
#[derive(Debug, Clone)]
pub struct MlpParams {
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    activation: ActivationKind,
}

impl MlpParams {
    pub fn new(
        weights: Vec<DMatrix<f64>>,
        biases: Vec<DVector<f64>>,
        activation: ActivationKind,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Config("mlp needs matched weight/bias lists".into()));
        }
        for (w, b) in weights.iter().zip(&biases) {
            if w.nrows() != b.len() {
                return Err(Error::DimensionMismatch {
                    what: "mlp bias",
                    expected: w.nrows(),
                    got: b.len(),
                });
            }
        }
        for pair in weights.windows(2) {
            if pair[1].ncols() != pair[0].nrows() {
                return Err(Error::DimensionMismatch {
                    what: "mlp layer chain",
                    expected: pair[0].nrows(),
                    got: pair[1].ncols(),
                });
            }
        }
        Ok(MlpParams {
            weights,
            biases,
            activation,
        })
    }

    /// Identity network: one layer, identity weights, zero biases.
    pub fn identity(n: usize) -> Self {
        MlpParams {
            weights: vec![DMatrix::identity(n, n)],
            biases: vec![DVector::zeros(n)],
            activation: ActivationKind::Identity,
        }
    }

    pub fn input_len(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn output_len(&self) -> usize {
        self.weights.last().expect("nonempty").nrows()
    }

    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[DMatrix<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[DVector<f64>] {
        &self.biases
    }

    pub fn activation(&self) -> ActivationKind {
        self.activation
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_len() {
            return Err(Error::DimensionMismatch {
                what: "mlp input",
                expected: self.input_len(),
                got: x.len(),
            });
        }
        let mut h = DVector::from_column_slice(x);
        let last = self.weights.len() - 1;
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            h = w * h - b;
            if i < last {
                h.apply(|v| *v = self.activation.apply(*v));
            }
        }
        Ok(h.iter().cloned().collect())
    }
}

/// Packs the Hermitian-symmetric coefficients of a real function into the
/// `2K+1` real degrees of freedom `[c_0.re, c_1.re, c_1.im, ...,
/// c_K.re, c_K.im]`.
pub fn pack_coeffs(f: &PeriodicFunction) -> Vec<f64> {
    let k = f.space().k_max() as i64;
    let mut out = Vec::with_capacity(f.space().dim());
    out.push(f.coeff(0).re);
    for m in 1..=k {
        out.push(f.coeff(m).re);
        out.push(f.coeff(m).im);
    }
    out
}

/// Inverse of [`pack_coeffs`]: reconstructs the Hermitian-symmetric
/// function in the ambient of bandwidth `k`.
pub fn unpack_coeffs(k: usize, reals: &[f64]) -> Result<PeriodicFunction> {
    let space = AmbientSpace::new(k);
    if reals.len() != space.dim() {
        return Err(Error::DimensionMismatch {
            what: "packed coefficients",
            expected: space.dim(),
            got: reals.len(),
        });
    }
    let mut coeffs = vec![Complex64::ZERO; space.dim()];
    coeffs[k] = Complex64::new(reals[0], 0.0);
    for m in 1..=k {
        let z = Complex64::new(reals[2 * m - 1], reals[2 * m]);
        coeffs[k + m] = z;
        coeffs[k - m] = z.conj();
    }
    PeriodicFunction::new(space, coeffs)
}

/// Spectral neural operator: analysis onto the Fourier basis of
/// `P_{K_in}`, a feedforward network on the real coefficient
/// parameterization, synthesis into `P_{K_out}`. No sample grid appears
/// anywhere, which is why the model is resolution invariant by
/// construction.
#[derive(Debug, Clone)]
pub struct SnoModel {
    k_in: usize,
    k_out: usize,
    mlp: MlpParams,
}

impl SnoModel {
    pub fn new(k_in: usize, k_out: usize, mlp: MlpParams) -> Result<Self> {
        if mlp.input_len() != 2 * k_in + 1 {
            return Err(Error::DimensionMismatch {
                what: "sno input width",
                expected: 2 * k_in + 1,
                got: mlp.input_len(),
            });
        }
        if mlp.output_len() != 2 * k_out + 1 {
            return Err(Error::DimensionMismatch {
                what: "sno output width",
                expected: 2 * k_out + 1,
                got: mlp.output_len(),
            });
        }
        Ok(SnoModel { k_in, k_out, mlp })
    }

    pub fn k_in(&self) -> usize {
        self.k_in
    }

    pub fn k_out(&self) -> usize {
        self.k_out
    }

    pub fn mlp(&self) -> &MlpParams {
        &self.mlp
    }
}

/// Applies an SNO to a function already living in `P_{K_in}`. Callers
/// holding wider functions must project explicitly first; no silent
/// truncation happens here.
pub fn sno_apply(model: &SnoModel, f: &PeriodicFunction) -> Result<PeriodicFunction> {
    if f.space().k_max() != model.k_in {
        return Err(Error::DimensionMismatch {
            what: "sno input bandwidth",
            expected: model.k_in,
            got: f.space().k_max(),
        });
    }
    let packed = pack_coeffs(f);
    let out = model.mlp.forward(&packed)?;
    unpack_coeffs(model.k_out, &out)
}

/// DeepONet with a fixed trunk frame and a branch network over uniform
/// sensor readings.
#[derive(Debug, Clone)]
pub struct DeepOnetModel {
    trunk: crate::frames::Frame,
    branch: MlpParams,
}

impl DeepOnetModel {
    pub fn new(trunk: crate::frames::Frame, branch: MlpParams) -> Result<Self> {
        if branch.output_len() != trunk.len() {
            return Err(Error::DimensionMismatch {
                what: "branch output width",
                expected: trunk.len(),
                got: branch.output_len(),
            });
        }
        if branch.input_len().is_multiple_of(2) {
            return Err(Error::SensorCount {
                expected: branch.input_len() + 1,
                got: branch.input_len(),
            });
        }
        Ok(DeepOnetModel { trunk, branch })
    }

    pub fn trunk(&self) -> &crate::frames::Frame {
        &self.trunk
    }

    pub fn branch(&self) -> &MlpParams {
        &self.branch
    }

    pub fn sensor_count(&self) -> usize {
        self.branch.input_len()
    }
}

/// Branch net on uniform sensor values, then synthesis against the trunk
/// frame. Sensors read the real part of the samples; the intended inputs
/// are real functions.
pub fn deeponet_apply(model: &DeepOnetModel, s: &SampleVector) -> Result<PeriodicFunction> {
    if s.grid.len() != model.sensor_count() {
        return Err(Error::SensorCount {
            expected: model.sensor_count(),
            got: s.grid.len(),
        });
    }
    let sensors: Vec<f64> = s.values.iter().map(|z| z.re).collect();
    let coeffs = model.branch.forward(&sensors)?;
    let complex: Vec<Complex64> = coeffs.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    model.trunk.synthesis(&complex)
}

/// Magnitude spectrum of an activated function plus tail-energy fractions
/// per cutoff.
#[derive(Debug, Clone)]
pub struct ActivationSpectrum {
    pub k_probe: usize,
    /// `|c_k|` for `k = -K_probe .. K_probe`, index 0 at `-K_probe`.
    pub magnitudes: Vec<f64>,
    /// `tail[k]` = fraction of spectral energy at modes `|m| > k`.
    pub tail_fraction: Vec<f64>,
}

impl ActivationSpectrum {
    pub fn magnitude(&self, k: i64) -> f64 {
        self.magnitudes[(k + self.k_probe as i64) as usize]
    }
}

/// Measures how a pointwise activation spreads spectral energy: samples
/// `σ(f)` on a fine grid of `4·K_probe+1` nodes and reads back the
/// coefficients up to `K_probe`.
pub fn activation_spectrum(
    f: &PeriodicFunction,
    act: ActivationKind,
    k_probe: usize,
) -> Result<ActivationSpectrum> {
    if f.space().k_max() > k_probe {
        return Err(Error::AmbientTooSmall {
            k_max: k_probe,
            required: f.space().k_max(),
        });
    }
    let grid = SampleGrid::new(4 * k_probe + 1)?;
    let sampled = sample(f, grid);
    let activated: Vec<Complex64> = sampled
        .values
        .iter()
        .map(|&z| act.apply_complex(z))
        .collect();
    let activated = SampleVector::new(grid, activated)?;
    let g = samples_to_coeffs(&activated, k_probe)?;
    let magnitudes: Vec<f64> = g.coeffs().iter().map(|z| z.norm()).collect();
    let total: f64 = magnitudes.iter().map(|m| m * m).sum();
    let k = k_probe as i64;
    let tail_fraction: Vec<f64> = (0..=k)
        .map(|cut| {
            let tail: f64 = (-k..=k)
                .filter(|m| m.abs() > cut)
                .map(|m| {
                    let v = magnitudes[(m + k) as usize];
                    v * v
                })
                .sum();
            if total == 0.0 {
                0.0
            } else {
                // adding +0.0 collapses an empty sum's negative zero
                tail / total + 0.0
            }
        })
        .collect();
    Ok(ActivationSpectrum {
        k_probe,
        magnitudes,
        tail_fraction,
    })
}

/// The pointwise squaring operator `f ↦ f²` as a continuous operator
/// `P_K → P_2K`, computed exactly as coefficient self-convolution.
pub fn square_operator(k: usize, ambient: AmbientSpace) -> Result<ContinuousOperator> {
    if ambient.k_max() < 2 * k {
        return Err(Error::AmbientTooSmall {
            k_max: ambient.k_max(),
            required: 2 * k,
        });
    }
    let domain = BandlimitedSpace::new(k, ambient)?;
    let range = BandlimitedSpace::new(2 * k, ambient)?;
    let domain_span = fourier_basis(domain);
    let range_span = fourier_basis(range);
    let k_max = ambient.k_max() as i64;
    ContinuousOperator::new(domain, range, domain_span, range_span, move |f| {
        // exact self-convolution; any mass that would land outside the
        // ambient band means the input was too wide for this operator
        let dim = 2 * (2 * k_max) + 1;
        let mut conv = vec![Complex64::ZERO; dim as usize];
        for p in -k_max..=k_max {
            let cp = f.coeff(p);
            if cp == Complex64::ZERO {
                continue;
            }
            for q in -k_max..=k_max {
                let cq = f.coeff(q);
                if cq == Complex64::ZERO {
                    continue;
                }
                conv[(p + q + 2 * k_max) as usize] += cp * cq;
            }
        }
        for (i, v) in conv.iter().enumerate() {
            let m = i as i64 - 2 * k_max;
            if m.abs() > k_max && *v != Complex64::ZERO {
                return Err(Error::AmbientTooSmall {
                    k_max: k_max as usize,
                    required: m.unsigned_abs() as usize,
                });
            }
        }
        let coeffs: Vec<Complex64> = (-k_max..=k_max)
            .map(|m| conv[(m + 2 * k_max) as usize])
            .collect();
        PeriodicFunction::new(f.space(), coeffs)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use crate::operators::aliasing_error_apply;
    use crate::spaces::band_coeffs;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Random real function in `P_K`.
    fn random_real_fn(k: usize, seed: u64) -> PeriodicFunction {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut unit = || (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
        let space = AmbientSpace::new(k);
        let mut coeffs = vec![Complex64::ZERO; space.dim()];
        coeffs[k] = c(unit(), 0.0);
        for m in 1..=k {
            let z = c(unit(), unit());
            coeffs[k + m] = z;
            coeffs[k - m] = z.conj();
        }
        PeriodicFunction::new(space, coeffs).unwrap()
    }

    #[test]
    fn conv_center_tap_is_identity() {
        let layer = ConvLayer::new(vec![0.0, 1.0, 0.0], ActivationKind::Identity).unwrap();
        let grid = SampleGrid::new(5).unwrap();
        let s = SampleVector::from_real(grid, &[1.0, -2.0, 3.0, 0.5, 0.0]).unwrap();
        let out = conv_apply(&layer, &s).unwrap();
        assert_eq!(out.values, s.values);
    }

    #[test]
    fn conv_shift_kernel_hand_example() {
        // taps (1,0,0): k[-1]=1, so y[m] = x[m+1] circularly
        let layer = ConvLayer::new(vec![1.0, 0.0, 0.0], ActivationKind::Identity).unwrap();
        let grid = SampleGrid::new(4).unwrap();
        let s = SampleVector::from_real(grid, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let out = conv_apply(&layer, &s).unwrap();
        let got: Vec<f64> = out.values.iter().map(|z| z.re).collect();
        assert_eq!(got, vec![2.0, 3.0, 4.0, 1.0]);
    }

    #[test]
    fn conv_commutes_with_circular_shift() {
        let layer = ConvLayer::new(vec![0.5, 1.0, -0.25], ActivationKind::Tanh).unwrap();
        let grid = SampleGrid::new(7).unwrap();
        let vals = [0.3, -1.0, 0.7, 0.2, -0.4, 1.5, -0.9];
        let s = SampleVector::from_real(grid, &vals).unwrap();
        let mut rolled = vals.to_vec();
        rolled.rotate_right(2);
        let s_rolled = SampleVector::from_real(grid, &rolled).unwrap();
        let a = conv_apply(&layer, &s).unwrap();
        let b = conv_apply(&layer, &s_rolled).unwrap();
        let mut a_vals: Vec<Complex64> = a.values.to_vec();
        a_vals.rotate_right(2);
        for (x, y) in a_vals.iter().zip(b.values) {
            assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn conv_kernel_longer_than_grid_rejected() {
        let layer = ConvLayer::new(vec![1.0; 5], ActivationKind::Identity).unwrap();
        let grid = SampleGrid::new(3).unwrap();
        let s = SampleVector::from_real(grid, &[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(conv_apply(&layer, &s), Err(Error::KernelTooLong { .. })));
    }

    #[test]
    fn conv_disagrees_across_resolutions() {
        // same taps at M=7 and M=13 applied to one f in P_3 produce
        // different functions after coefficient recovery
        let k = 3;
        let f = random_real_fn(k, 11);
        let layer = ConvLayer::new(vec![0.5, 1.0, -0.25], ActivationKind::Identity).unwrap();
        let coarse = conv_apply(&layer, &sample(&f, SampleGrid::new(7).unwrap())).unwrap();
        let fine = conv_apply(&layer, &sample(&f, SampleGrid::new(13).unwrap())).unwrap();
        let g1 = samples_to_coeffs(&coarse, k).unwrap();
        let g2 = samples_to_coeffs(&fine, k).unwrap();
        assert!(g1.sub(&g2).unwrap().norm() > 1e-3);
    }

    #[test]
    fn fno_all_pass_multiplier_is_identity_across_resolutions() {
        let k = 4;
        let f = random_real_fn(k, 5);
        let bias = PeriodicFunction::zero(AmbientSpace::new(k));
        let r = vec![c(1.0, 0.0); 2 * k + 1];
        let layer = FnoLayer::new(k, k, r, 0.0, bias, ActivationKind::Identity).unwrap();
        for (m_in, m_out) in [(9, 9), (9, 17), (31, 9)] {
            let s = sample(&f, SampleGrid::new(m_in).unwrap());
            let out = fno_apply(&layer, &s, m_out).unwrap();
            let expected = sample(&f, SampleGrid::new(m_out).unwrap());
            for (a, b) in out.values.iter().zip(expected.values) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn fno_zero_multiplier_constant_bias() {
        let k = 2;
        let mut bias_coeffs = vec![Complex64::ZERO; 2 * k + 1];
        bias_coeffs[k] = c(1.0, 0.0);
        let bias = PeriodicFunction::new(AmbientSpace::new(k), bias_coeffs).unwrap();
        let r = vec![Complex64::ZERO; 2 * k + 1];
        let layer = FnoLayer::new(k, k, r, 0.0, bias, ActivationKind::Identity).unwrap();
        let s = sample(&random_real_fn(k, 3), SampleGrid::new(5).unwrap());
        let out = fno_apply(&layer, &s, 5).unwrap();
        for v in out.values {
            assert!((v - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn fno_without_activation_is_linear() {
        let k = 3;
        let bias = PeriodicFunction::zero(AmbientSpace::new(k));
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let mut unit = || (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
        let mut r = vec![Complex64::ZERO; 2 * k + 1];
        r[k] = c(unit(), 0.0);
        for m in 1..=k {
            let z = c(unit(), unit());
            r[k + m] = z;
            r[k - m] = z.conj();
        }
        let layer = FnoLayer::new(k, k, r, 0.0, bias, ActivationKind::Identity).unwrap();
        let f = random_real_fn(k, 8);
        let g = random_real_fn(k, 9);
        let grid = SampleGrid::new(9).unwrap();
        let (alpha, beta) = (0.7, -1.3);
        let combo_fn = f.scale(c(alpha, 0.0)).add(&g.scale(c(beta, 0.0))).unwrap();
        let combo = fno_apply(&layer, &sample(&combo_fn, grid), 9).unwrap();
        let fa = fno_apply(&layer, &sample(&f, grid), 9).unwrap();
        let fb = fno_apply(&layer, &sample(&g, grid), 9).unwrap();
        for i in 0..9 {
            let lhs = combo.values[i];
            let rhs = alpha * fa.values[i] + beta * fb.values[i];
            assert!((lhs - rhs).norm() < 1e-10);
        }
    }

    #[test]
    fn fno_relu_aliases_at_coarse_resolution() {
        // relu widens the spectrum; recovering coefficients at the Nyquist
        // grid of the input band disagrees with a fine-grid reference
        let k = 1;
        let f = {
            let space = AmbientSpace::new(1);
            let coeffs = vec![c(0.5, 0.0), Complex64::ZERO, c(0.5, 0.0)];
            PeriodicFunction::new(space, coeffs).unwrap()
        };
        let bias = PeriodicFunction::zero(AmbientSpace::new(k));
        let r = vec![c(1.0, 0.0); 2 * k + 1];
        let layer = FnoLayer::new(k, k, r, 0.0, bias, ActivationKind::Relu).unwrap();
        let coarse = fno_apply(&layer, &sample(&f, SampleGrid::new(3).unwrap()), 3).unwrap();
        let fine = fno_apply(&layer, &sample(&f, SampleGrid::new(401).unwrap()), 401).unwrap();
        let g_coarse = samples_to_coeffs(&coarse, k).unwrap();
        let g_fine = samples_to_coeffs(&fine, k).unwrap();
        assert!(g_coarse.sub(&g_fine).unwrap().norm() > 1e-3);
    }

    #[test]
    fn fno_sub_nyquist_input_rejected() {
        let k = 3;
        let bias = PeriodicFunction::zero(AmbientSpace::new(k));
        let layer = FnoLayer::new(
            k,
            k,
            vec![c(1.0, 0.0); 2 * k + 1],
            0.0,
            bias,
            ActivationKind::Identity,
        )
        .unwrap();
        let s = sample(&random_real_fn(k, 1), SampleGrid::new(5).unwrap());
        assert!(matches!(
            fno_apply(&layer, &s, 9),
            Err(Error::SubNyquist { .. })
        ));
    }

    #[test]
    fn pack_unpack_round_trip() {
        let f = random_real_fn(6, 21);
        let packed = pack_coeffs(&f);
        assert_eq!(packed.len(), 13);
        let g = unpack_coeffs(6, &packed).unwrap();
        assert!(f.sub(&g).unwrap().norm() < 1e-15);
        assert!(g.is_real());
    }

    #[test]
    fn sno_identity_network_is_identity() {
        let k = 5;
        let model = SnoModel::new(k, k, MlpParams::identity(2 * k + 1)).unwrap();
        let f = random_real_fn(k, 2);
        let out = sno_apply(&model, &f).unwrap();
        assert!(f.sub(&out).unwrap().norm() < 1e-14);
    }

    #[test]
    fn sno_zero_final_layer_kills_everything() {
        let k = 3;
        let n = 2 * k + 1;
        let mlp = MlpParams::new(
            vec![DMatrix::identity(n, n), DMatrix::zeros(n, n)],
            vec![DVector::zeros(n), DVector::zeros(n)],
            ActivationKind::Tanh,
        )
        .unwrap();
        let model = SnoModel::new(k, k, mlp).unwrap();
        let out = sno_apply(&model, &random_real_fn(k, 4)).unwrap();
        assert!(out.norm() < 1e-15);
    }

    #[test]
    fn sno_is_resolution_invariant() {
        // route through samples at two resolutions; outputs agree exactly
        // because no grid enters the model itself
        let k = 10;
        let n = 2 * k + 1;
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let mut unit = || (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
        let w = DMatrix::from_fn(n, n, |_, _| unit() * 0.3);
        let b = DVector::from_fn(n, |_, _| unit() * 0.1);
        let mlp = MlpParams::new(vec![w], vec![b], ActivationKind::Tanh).unwrap();
        let model = SnoModel::new(k, k, mlp).unwrap();
        let f = random_real_fn(k, 6);
        let via = |m: usize| {
            let s = sample(&f, SampleGrid::new(m).unwrap());
            let g = samples_to_coeffs(&s, k).unwrap();
            sno_apply(&model, &g).unwrap()
        };
        let a = via(2 * k + 1);
        let b2 = via(4 * k + 3);
        assert!(a.sub(&b2).unwrap().norm() < 1e-10);
    }

    #[test]
    fn deeponet_zero_branch_gives_zero() {
        let k = 2;
        let trunk = fourier_basis(BandlimitedSpace::tight(k));
        let n = 5;
        let branch = MlpParams::new(
            vec![DMatrix::zeros(2 * k + 1, n)],
            vec![DVector::zeros(2 * k + 1)],
            ActivationKind::Identity,
        )
        .unwrap();
        let model = DeepOnetModel::new(trunk, branch).unwrap();
        let s = sample(&random_real_fn(0, 1).embed(AmbientSpace::new(2)).unwrap(),
                       SampleGrid::new(n).unwrap());
        let out = deeponet_apply(&model, &s).unwrap();
        assert!(out.norm() < 1e-15);
    }

    #[test]
    fn deeponet_dirichlet_trunk_matches_identity_sno() {
        // trunk = dirichlet basis, branch = the matching permutation over
        // sensor values scaled by 1/sqrt(2K+1): reproduces f exactly, so it
        // coincides with the identity SNO
        let k = 2;
        let space = crate::spaces::BandlimitedSpace::tight(k);
        let trunk = crate::spaces::dirichlet_basis(space);
        let m = 2 * k + 1;
        let grid = SampleGrid::new(m).unwrap();
        // dirichlet node j sits at 2j/(2K+1); grid index i holds node
        // 2(i - k)/M, so j = (i - k) mod M
        let mut w = DMatrix::zeros(m, m);
        for i in 0..m {
            let j = (i as i64 - k as i64).rem_euclid(m as i64) as usize;
            w[(j, i)] = 1.0 / (m as f64).sqrt();
        }
        let branch = MlpParams::new(vec![w], vec![DVector::zeros(m)], ActivationKind::Identity)
            .unwrap();
        let model = DeepOnetModel::new(trunk, branch).unwrap();
        let f = random_real_fn(k, 17);
        let out = deeponet_apply(&model, &sample(&f, grid)).unwrap();
        let sno = SnoModel::new(k, k, MlpParams::identity(m)).unwrap();
        let expected = sno_apply(&sno, &f).unwrap();
        assert!(out.sub(&expected).unwrap().norm() < 1e-10);
    }

    #[test]
    fn deeponet_wrong_sensor_count_rejected() {
        let k = 2;
        let trunk = fourier_basis(BandlimitedSpace::tight(k));
        let branch = MlpParams::identity(5);
        let model = DeepOnetModel::new(trunk, branch).unwrap();
        let f = random_real_fn(k, 1);
        let s = sample(&f, SampleGrid::new(7).unwrap());
        assert!(matches!(
            deeponet_apply(&model, &s),
            Err(Error::SensorCount { .. })
        ));
    }

    #[test]
    fn identity_activation_spectrum_has_no_tail() {
        let f = random_real_fn(4, 30);
        let spec = activation_spectrum(&f, ActivationKind::Identity, 12).unwrap();
        for k in 0..=4i64 {
            let expected = f.coeff(k).norm();
            assert!((spec.magnitude(k) - expected).abs() < 1e-10);
        }
        assert!(spec.tail_fraction[4] < 1e-20);
    }

    #[test]
    fn relu_of_cosine_matches_closed_form() {
        // relu(cos pi x) has c_0 = 1/pi, |c_1| = 1/4, |c_2| = 1/(3 pi)
        let space = AmbientSpace::new(1);
        let coeffs = vec![c(0.5, 0.0), Complex64::ZERO, c(0.5, 0.0)];
        let f = PeriodicFunction::new(space, coeffs).unwrap();
        let spec = activation_spectrum(&f, ActivationKind::Relu, 500).unwrap();
        assert!((spec.magnitude(0) - 1.0 / PI).abs() < 1e-6);
        assert!((spec.magnitude(1) - 0.25).abs() < 1e-6);
        assert!((spec.magnitude(2) - 1.0 / (3.0 * PI)).abs() < 1e-6);
        assert!((spec.magnitude(-2) - 1.0 / (3.0 * PI)).abs() < 1e-6);
        assert!(spec.magnitude(3) < 1e-6);
    }

    #[test]
    fn relu_spreads_energy_past_the_band() {
        let f = random_real_fn(20, 99);
        let spec = activation_spectrum(&f, ActivationKind::Relu, 60).unwrap();
        assert!(spec.tail_fraction[20] > 1e-4);
    }

    #[test]
    fn tail_energy_is_non_increasing() {
        let f = random_real_fn(8, 44);
        for act in [ActivationKind::Relu, ActivationKind::Gelu, ActivationKind::Tanh] {
            let spec = activation_spectrum(&f, act, 30).unwrap();
            for w in spec.tail_fraction.windows(2) {
                assert!(w[1] <= w[0] + 1e-15);
            }
        }
    }

    #[test]
    fn square_of_constant() {
        let ambient = AmbientSpace::new(4);
        let u = square_operator(2, ambient).unwrap();
        let mut coeffs = vec![Complex64::ZERO; ambient.dim()];
        coeffs[4] = c(3.0, 0.0);
        let f = PeriodicFunction::new(ambient, coeffs).unwrap();
        let out = u.apply(&f).unwrap();
        assert!((out.coeff(0) - c(9.0, 0.0)).norm() < 1e-14);
        assert!(out.sub(&PeriodicFunction::new(ambient, {
            let mut v = vec![Complex64::ZERO; ambient.dim()];
            v[4] = c(9.0, 0.0);
            v
        }).unwrap()).unwrap().norm() < 1e-14);
    }

    #[test]
    fn square_of_top_cosine() {
        // cos(pi K x)^2 = 1/2 + cos(2 pi K x)/2
        let k = 3;
        let ambient = AmbientSpace::new(2 * k);
        let u = square_operator(k, ambient).unwrap();
        let mut coeffs = vec![Complex64::ZERO; ambient.dim()];
        coeffs[3 * k] = c(0.5, 0.0);
        coeffs[k] = c(0.5, 0.0);
        let f = PeriodicFunction::new(ambient, coeffs).unwrap();
        let out = u.apply(&f).unwrap();
        assert!((out.coeff(0) - c(0.5, 0.0)).norm() < 1e-14);
        assert!((out.coeff(2 * k as i64) - c(0.25, 0.0)).norm() < 1e-14);
        assert!((out.coeff(-(2 * k as i64)) - c(0.25, 0.0)).norm() < 1e-14);
        assert!((out.coeff(1)).norm() < 1e-14);
    }

    #[test]
    fn square_matches_fine_grid_pointwise_squaring() {
        let k = 5;
        let ambient = AmbientSpace::new(2 * k);
        let u = square_operator(k, ambient).unwrap();
        let f = random_real_fn(k, 61).embed(ambient).unwrap();
        let out = u.apply(&f).unwrap();
        let grid = SampleGrid::new(8 * k + 1).unwrap();
        let s = sample(&f, grid);
        let squared: Vec<Complex64> = s.values.iter().map(|z| z * z).collect();
        let sq = SampleVector::new(grid, squared).unwrap();
        let reference = samples_to_coeffs(&sq, 2 * k).unwrap();
        let diff = band_coeffs(BandlimitedSpace::new(2 * k, ambient).unwrap(), &out).unwrap();
        let refc = reference.coeffs();
        let err: f64 = diff
            .iter()
            .zip(refc)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-10);
    }

    #[test]
    fn square_aliasing_witness_against_narrow_range() {
        // the squared top cosine leaks mass to modes +-2K; projecting the
        // output onto P_K leaves a residual of norm sqrt(2)/4, while the
        // full P_2K range captures everything
        let k = 2;
        let ambient = AmbientSpace::new(2 * k);
        let u = square_operator(k, ambient).unwrap();
        let mut coeffs = vec![Complex64::ZERO; ambient.dim()];
        coeffs[2 * k + k] = c(0.5, 0.0);
        coeffs[2 * k - k] = c(0.5, 0.0);
        let witness = PeriodicFunction::new(ambient, coeffs).unwrap();

        let psi = fourier_basis(BandlimitedSpace::new(k, ambient).unwrap());
        let phi_narrow = fourier_basis(BandlimitedSpace::new(k, ambient).unwrap());
        let phi_wide = fourier_basis(BandlimitedSpace::new(2 * k, ambient).unwrap());

        let disc_narrow =
            crate::operators::canonical_discretization(&u, &psi, &phi_narrow).unwrap();
        let disc_wide = crate::operators::canonical_discretization(&u, &psi, &phi_wide).unwrap();

        let eps_narrow =
            aliasing_error_apply(&u, &disc_narrow, &psi, &phi_narrow, &witness).unwrap();
        let eps_wide = aliasing_error_apply(&u, &disc_wide, &psi, &phi_wide, &witness).unwrap();

        assert!((eps_narrow.norm() - 2.0f64.sqrt() / 4.0).abs() < 1e-9);
        assert!(eps_wide.norm() < 1e-12);
    }

    #[test]
    fn square_needs_wide_enough_ambient() {
        assert!(matches!(
            square_operator(3, AmbientSpace::new(5)),
            Err(Error::AmbientTooSmall { .. })
        ));
    }
}

//! Finite frame algebra over the ambient periodic Hilbert space.
//!
//! The ambient space is the span of the exponentials `e^{iπkx}` for
//! `|k| <= k_max`, with the inner product `(1/2)∫_{-1}^{1} f conj(g) dx`
//! under which those exponentials are orthonormal. Everything here is
//! therefore plain Euclidean linear algebra on coefficient vectors.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hermitian-symmetry tolerance used by [`PeriodicFunction::is_real`].
const HERMITIAN_TOL: f64 = 1e-9;

/// Default relative singular-value cutoff for pseudo-inverses.
pub const DEFAULT_SVD_RTOL: f64 = 1e-10;

/// The ambient space `P_{k_max}`: trigonometric polynomials of degree `k_max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmbientSpace {
    k_max: usize,
}

impl AmbientSpace {
    pub fn new(k_max: usize) -> Self {
        AmbientSpace { k_max }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Dimension `2·k_max + 1`.
    pub fn dim(&self) -> usize {
        2 * self.k_max + 1
    }

    pub(crate) fn check_same(&self, other: &AmbientSpace) -> Result<()> {
        if self != other {
            return Err(Error::AmbientMismatch {
                left: self.k_max,
                right: other.k_max,
            });
        }
        Ok(())
    }
}

/// A 2-periodic function stored by its Fourier coefficients `W_k`,
/// `k = -k_max..k_max` (index 0 of the vector holds `k = -k_max`).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicFunction {
    space: AmbientSpace,
    coeffs: Vec<Complex64>,
}

impl PeriodicFunction {
    pub fn new(space: AmbientSpace, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                what: "coefficient vector",
                expected: space.dim(),
                got: coeffs.len(),
            });
        }
        Ok(PeriodicFunction { space, coeffs })
    }

    pub fn zero(space: AmbientSpace) -> Self {
        PeriodicFunction {
            space,
            coeffs: vec![Complex64::ZERO; space.dim()],
        }
    }

    /// Unit coefficient at frequency `k`, i.e. the exponential `e^{iπkx}`.
    pub fn exponential(space: AmbientSpace, k: i64) -> Result<Self> {
        let mut f = PeriodicFunction::zero(space);
        let idx = f.index_of(k)?;
        f.coeffs[idx] = Complex64::ONE;
        Ok(f)
    }

    pub fn space(&self) -> AmbientSpace {
        self.space
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    fn index_of(&self, k: i64) -> Result<usize> {
        let k_max = self.space.k_max as i64;
        if k < -k_max || k > k_max {
            return Err(Error::AmbientTooSmall {
                k_max: self.space.k_max,
                required: k.unsigned_abs() as usize,
            });
        }
        Ok((k + k_max) as usize)
    }

    /// Coefficient `W_k`; zero outside the ambient band.
    pub fn coeff(&self, k: i64) -> Complex64 {
        match self.index_of(k) {
            Ok(i) => self.coeffs[i],
            Err(_) => Complex64::ZERO,
        }
    }

    /// `⟨self, other⟩` as the Euclidean inner product of coefficient vectors.
    pub fn inner(&self, other: &PeriodicFunction) -> Result<Complex64> {
        self.space.check_same(&other.space)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a * b.conj())
            .sum())
    }

    /// Parseval norm: `sqrt(Σ |W_k|²)`.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Whether the coefficients are Hermitian-symmetric, i.e. the function is
    /// real-valued.
    pub fn is_real(&self) -> bool {
        let k_max = self.space.k_max as i64;
        (0..=k_max).all(|k| (self.coeff(-k) - self.coeff(k).conj()).norm() <= HERMITIAN_TOL)
    }

    /// `Σ_k W_k e^{iπkx}`.
    pub fn eval(&self, x: f64) -> Complex64 {
        let k_max = self.space.k_max as i64;
        let mut acc = Complex64::ZERO;
        for k in -k_max..=k_max {
            let phase = std::f64::consts::PI * k as f64 * x;
            acc += self.coeff(k) * Complex64::new(phase.cos(), phase.sin());
        }
        acc
    }

    pub fn add(&self, other: &PeriodicFunction) -> Result<PeriodicFunction> {
        self.space.check_same(&other.space)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(PeriodicFunction {
            space: self.space,
            coeffs,
        })
    }

    pub fn sub(&self, other: &PeriodicFunction) -> Result<PeriodicFunction> {
        self.space.check_same(&other.space)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(PeriodicFunction {
            space: self.space,
            coeffs,
        })
    }

    pub fn scale(&self, s: Complex64) -> PeriodicFunction {
        PeriodicFunction {
            space: self.space,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// Re-expresses the function in another ambient space. Growing the band
    /// zero-pads; shrinking requires the dropped coefficients to be zero.
    pub fn embed(&self, target: AmbientSpace) -> Result<PeriodicFunction> {
        let mut out = PeriodicFunction::zero(target);
        let k_max = self.space.k_max as i64;
        let t_max = target.k_max as i64;
        for k in -k_max..=k_max {
            let c = self.coeff(k);
            if k.abs() > t_max {
                if c.norm() > 1e-12 {
                    return Err(Error::AmbientTooSmall {
                        k_max: target.k_max,
                        required: k.unsigned_abs() as usize,
                    });
                }
                continue;
            }
            let idx = (k + t_max) as usize;
            out.coeffs[idx] = c;
        }
        Ok(out)
    }

    fn as_vector(&self) -> DVector<Complex64> {
        DVector::from_column_slice(&self.coeffs)
    }
}

/// Frame bounds `0 < A <= B` of Eq-style two-sided energy estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameBounds {
    pub lower: f64,
    pub upper: f64,
}

/// A finite indexed family of ambient-space functions together with its
/// synthesis matrix (columns = coefficient vectors) and a cached SVD.
pub struct Frame {
    space: AmbientSpace,
    vectors: Vec<PeriodicFunction>,
    synthesis: DMatrix<Complex64>,
    svd: nalgebra::SVD<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
    svd_rtol: f64,
}

impl Frame {
    pub fn new(vectors: Vec<PeriodicFunction>) -> Result<Self> {
        Frame::with_rtol(vectors, DEFAULT_SVD_RTOL)
    }

    pub fn with_rtol(vectors: Vec<PeriodicFunction>, svd_rtol: f64) -> Result<Self> {
        let first = vectors.first().ok_or(Error::EmptyFrame)?;
        let space = first.space();
        for v in &vectors {
            space.check_same(&v.space())?;
        }
        let synthesis = DMatrix::from_fn(space.dim(), vectors.len(), |r, c| {
            vectors[c].coeffs()[r]
        });
        let svd = nalgebra::SVD::new(synthesis.clone(), true, true);
        Ok(Frame {
            space,
            vectors,
            synthesis,
            svd,
            svd_rtol,
        })
    }

    pub fn space(&self) -> AmbientSpace {
        self.space
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[PeriodicFunction] {
        &self.vectors
    }

    pub fn synthesis_matrix(&self) -> &DMatrix<Complex64> {
        &self.synthesis
    }

    pub fn svd_rtol(&self) -> f64 {
        self.svd_rtol
    }

    fn sigma_cutoff(&self) -> f64 {
        let sigma_max = self.svd.singular_values.iter().cloned().fold(0.0, f64::max);
        self.svd_rtol * sigma_max
    }

    /// Numerical rank of the synthesis matrix.
    pub fn rank(&self) -> usize {
        let cutoff = self.sigma_cutoff();
        self.svd
            .singular_values
            .iter()
            .filter(|&&s| s > cutoff)
            .count()
    }

    /// `T c = Σ_i c_i v_i`.
    pub fn synthesis(&self, coeffs: &[Complex64]) -> Result<PeriodicFunction> {
        if coeffs.len() != self.len() {
            return Err(Error::DimensionMismatch {
                what: "frame coefficients",
                expected: self.len(),
                got: coeffs.len(),
            });
        }
        let c = DVector::from_column_slice(coeffs);
        let out = &self.synthesis * c;
        PeriodicFunction::new(self.space, out.iter().cloned().collect())
    }

    /// `T* f = {⟨f, v_i⟩}`.
    pub fn analysis(&self, f: &PeriodicFunction) -> Result<Vec<Complex64>> {
        self.space.check_same(&f.space())?;
        let fv = f.as_vector();
        let out = self.synthesis.adjoint() * fv;
        Ok(out.iter().cloned().collect())
    }

    /// Smallest and largest squared nonzero singular values of the synthesis
    /// matrix, i.e. the optimal frame bounds on the span.
    pub fn frame_bounds(&self) -> Result<FrameBounds> {
        let cutoff = self.sigma_cutoff();
        let mut lower = f64::INFINITY;
        let mut upper: f64 = 0.0;
        for &s in self.svd.singular_values.iter() {
            if s > cutoff {
                lower = lower.min(s * s);
                upper = upper.max(s * s);
            }
        }
        if upper == 0.0 {
            return Err(Error::DegenerateFrame);
        }
        Ok(FrameBounds { lower, upper })
    }

    /// Minimal-norm coefficients `T† f`, total on the ambient space: for
    /// `f` outside the span this yields the coefficients of its projection.
    pub fn pseudo_inverse_coeffs(&self, f: &PeriodicFunction) -> Result<Vec<Complex64>> {
        self.space.check_same(&f.space())?;
        let cutoff = self.sigma_cutoff();
        let u = self.svd.u.as_ref().expect("svd computed with u");
        let vt = self.svd.v_t.as_ref().expect("svd computed with v_t");
        let uh_f = u.adjoint() * f.as_vector();
        let mut scaled = DVector::<Complex64>::zeros(self.svd.singular_values.len());
        for (i, &s) in self.svd.singular_values.iter().enumerate() {
            if s > cutoff {
                scaled[i] = uh_f[i] / Complex64::new(s, 0.0);
            }
        }
        let c = vt.adjoint() * scaled;
        Ok(c.iter().cloned().collect())
    }

    /// Orthogonal projection onto the span: `T T† f`.
    pub fn project(&self, f: &PeriodicFunction) -> Result<PeriodicFunction> {
        let c = self.pseudo_inverse_coeffs(f)?;
        self.synthesis(&c)
    }

    /// Aliasing error function `ε(f) = f - P f` and its norm.
    pub fn aliasing_error_fn(&self, f: &PeriodicFunction) -> Result<(PeriodicFunction, f64)> {
        let p = self.project(f)?;
        let eps = f.sub(&p)?;
        let norm = eps.norm();
        Ok((eps, norm))
    }

    /// Matrix of `T†_self` restricted to the ambient space: maps coefficient
    /// vectors of ambient functions to frame coefficients.
    pub fn pseudo_inverse_matrix(&self) -> DMatrix<Complex64> {
        let cutoff = self.sigma_cutoff();
        let u = self.svd.u.as_ref().expect("svd computed with u");
        let vt = self.svd.v_t.as_ref().expect("svd computed with v_t");
        let mut sigma_pinv = DMatrix::<Complex64>::zeros(vt.nrows(), u.ncols());
        for (i, &s) in self.svd.singular_values.iter().enumerate() {
            if s > cutoff {
                sigma_pinv[(i, i)] = Complex64::new(1.0 / s, 0.0);
            }
        }
        vt.adjoint() * sigma_pinv * u.adjoint()
    }

    /// Whether every element of `inner` lies in the span of `self`, up to
    /// relative tolerance `tol`.
    pub fn contains_span(&self, inner: &Frame, tol: f64) -> Result<bool> {
        for v in inner.vectors() {
            let (_, residual) = self.aliasing_error_fn(v)?;
            let scale = v.norm().max(1.0);
            if residual > tol * scale {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("k_max", &self.space.k_max)
            .field("len", &self.vectors.len())
            .field("svd_rtol", &self.svd_rtol)
            .finish()
    }
}

impl Clone for Frame {
    fn clone(&self) -> Self {
        Frame::with_rtol(self.vectors.clone(), self.svd_rtol).expect("clone of valid frame")
    }
}

/// Matrix of `T†_to ∘ T_from`, mapping coefficient sequences over `from` to
/// coefficient sequences over `to`.
pub fn change_of_frame(from: &Frame, to: &Frame) -> Result<DMatrix<Complex64>> {
    from.space().check_same(&to.space())?;
    Ok(to.pseudo_inverse_matrix() * from.synthesis_matrix())
}

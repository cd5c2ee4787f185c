//! Operator-level continuous-discrete equivalence machinery: canonical
//! discretizations, aliasing-error operators, probe-based operator-norm
//! estimates, discrete aliasing maps between resolutions, and layer-wise
//! representation-equivalence verification.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::frames::{change_of_frame, Frame, PeriodicFunction};
use crate::spaces::BandlimitedSpace;

/// Span tolerance used when flagging violated domain/range conditions.
const SPAN_TOL: f64 = 1e-8;

type ApplyFn = dyn Fn(&PeriodicFunction) -> Result<PeriodicFunction> + Send + Sync;

/// A (possibly nonlinear) operator between bandlimited spaces, together with
/// declared frames whose spans contain its domain and range.
#[derive(Clone)]
pub struct ContinuousOperator {
    pub domain: BandlimitedSpace,
    pub range: BandlimitedSpace,
    pub domain_span: Frame,
    pub range_span: Frame,
    apply: Arc<ApplyFn>,
}

impl ContinuousOperator {
    pub fn new(
        domain: BandlimitedSpace,
        range: BandlimitedSpace,
        domain_span: Frame,
        range_span: Frame,
        apply: impl Fn(&PeriodicFunction) -> Result<PeriodicFunction> + Send + Sync + 'static,
    ) -> Result<Self> {
        domain.ambient().check_same(&domain_span.space())?;
        range.ambient().check_same(&range_span.space())?;
        Ok(ContinuousOperator {
            domain,
            range,
            domain_span,
            range_span,
            apply: Arc::new(apply),
        })
    }

    pub fn apply(&self, f: &PeriodicFunction) -> Result<PeriodicFunction> {
        self.domain.ambient().check_same(&f.space())?;
        let out = (self.apply)(f)?;
        self.range.ambient().check_same(&out.space())?;
        Ok(out)
    }

    /// Identity on a space (domain = range).
    pub fn identity(space: BandlimitedSpace) -> Self {
        let basis = crate::spaces::fourier_basis(space);
        ContinuousOperator::new(space, space, basis.clone(), basis, |f| Ok(f.clone()))
            .expect("matching ambients")
    }

    /// Orthogonal truncation `P_{K_dom} -> P_{K_ran}`, re-expressed in the
    /// range ambient.
    pub fn truncation(domain: BandlimitedSpace, range: BandlimitedSpace) -> Self {
        let dspan = crate::spaces::fourier_basis(domain);
        let rspan = crate::spaces::fourier_basis(range);
        let k_out = range.k() as i64;
        let target = range.ambient();
        ContinuousOperator::new(domain, range, dspan, rspan, move |f| {
            let coeffs: Vec<Complex64> = (-k_out..=k_out).map(|k| f.coeff(k)).collect();
            Ok(crate::spaces::band_function(
                BandlimitedSpace::new(k_out as usize, target)?,
                &coeffs,
            ))
        })
        .expect("matching ambients")
    }

    /// The zero operator.
    pub fn zero(domain: BandlimitedSpace, range: BandlimitedSpace) -> Self {
        let dspan = crate::spaces::fourier_basis(domain);
        let rspan = crate::spaces::fourier_basis(range);
        let ambient = range.ambient();
        ContinuousOperator::new(domain, range, dspan, rspan, move |_| {
            Ok(PeriodicFunction::zero(ambient))
        })
        .expect("matching ambients")
    }

    /// A linear operator given by its matrix on ambient coefficient vectors.
    pub fn linear(
        domain: BandlimitedSpace,
        range: BandlimitedSpace,
        matrix: DMatrix<Complex64>,
    ) -> Result<Self> {
        if matrix.nrows() != range.ambient().dim() || matrix.ncols() != domain.ambient().dim() {
            return Err(Error::DimensionMismatch {
                what: "operator matrix",
                expected: range.ambient().dim() * domain.ambient().dim(),
                got: matrix.nrows() * matrix.ncols(),
            });
        }
        let dspan = crate::spaces::fourier_basis(domain);
        let rspan = crate::spaces::fourier_basis(range);
        let ambient = range.ambient();
        ContinuousOperator::new(domain, range, dspan, rspan, move |f| {
            let v = DVector::from_column_slice(f.coeffs());
            let out = &matrix * v;
            PeriodicFunction::new(ambient, out.iter().cloned().collect())
        })
    }
}

impl std::fmt::Debug for ContinuousOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ContinuousOperator")
            .field("domain", &self.domain)
            .field("range", &self.range)
            .finish()
    }
}

type MapFn = dyn Fn(&[Complex64]) -> Result<Vec<Complex64>> + Send + Sync;

/// A (possibly nonlinear, possibly parameterized) map between finite
/// coefficient sequences.
#[derive(Clone)]
pub struct DiscreteMap {
    pub in_len: usize,
    pub out_len: usize,
    pub parameters: Vec<f64>,
    apply: Arc<MapFn>,
}

impl DiscreteMap {
    pub fn from_fn(
        in_len: usize,
        out_len: usize,
        apply: impl Fn(&[Complex64]) -> Result<Vec<Complex64>> + Send + Sync + 'static,
    ) -> Self {
        DiscreteMap {
            in_len,
            out_len,
            parameters: Vec::new(),
            apply: Arc::new(apply),
        }
    }

    pub fn with_parameters(mut self, parameters: Vec<f64>) -> Self {
        self.parameters = parameters;
        self
    }

    pub fn linear(matrix: DMatrix<Complex64>) -> Self {
        let in_len = matrix.ncols();
        let out_len = matrix.nrows();
        DiscreteMap::from_fn(in_len, out_len, move |c| {
            let v = DVector::from_column_slice(c);
            Ok((&matrix * v).iter().cloned().collect())
        })
    }

    pub fn identity(n: usize) -> Self {
        DiscreteMap::from_fn(n, n, |c| Ok(c.to_vec()))
    }

    pub fn zero(in_len: usize, out_len: usize) -> Self {
        DiscreteMap::from_fn(in_len, out_len, move |_| {
            Ok(vec![Complex64::ZERO; out_len])
        })
    }

    pub fn apply(&self, c: &[Complex64]) -> Result<Vec<Complex64>> {
        if c.len() != self.in_len {
            return Err(Error::DimensionMismatch {
                what: "discrete map input",
                expected: self.in_len,
                got: c.len(),
            });
        }
        let out = (self.apply)(c)?;
        if out.len() != self.out_len {
            return Err(Error::DimensionMismatch {
                what: "discrete map output",
                expected: self.out_len,
                got: out.len(),
            });
        }
        Ok(out)
    }

    /// `self ∘ other` (other runs first).
    pub fn compose(&self, other: &DiscreteMap) -> Result<DiscreteMap> {
        if other.out_len != self.in_len {
            return Err(Error::DimensionMismatch {
                what: "discrete map composition",
                expected: self.in_len,
                got: other.out_len,
            });
        }
        let first = other.clone();
        let second = self.clone();
        Ok(DiscreteMap::from_fn(other.in_len, self.out_len, move |c| {
            second.apply(&first.apply(c)?)
        }))
    }
}

impl std::fmt::Debug for DiscreteMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteMap")
            .field("in_len", &self.in_len)
            .field("out_len", &self.out_len)
            .finish()
    }
}

/// One probe result inside an [`AliasingReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct AliasingRecord {
    pub test_id: String,
    pub residual_norm: f64,
    pub input_norm: f64,
}

impl AliasingRecord {
    /// `residual / input`, with the 0/0 case counting as 0.
    pub fn ratio(&self) -> f64 {
        if self.input_norm == 0.0 {
            if self.residual_norm == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            self.residual_norm / self.input_norm
        }
    }
}

/// Per-probe aliasing residuals plus the max-ratio estimate of the
/// operator-level aliasing norm. The estimate is a certified lower bound on
/// the true operator norm, not the norm itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AliasingReport {
    pub per_test: Vec<AliasingRecord>,
    pub norm_estimate: f64,
    pub test_count: usize,
}

impl AliasingReport {
    fn from_records(per_test: Vec<AliasingRecord>) -> Self {
        let norm_estimate = per_test.iter().map(|r| r.ratio()).fold(0.0, f64::max);
        let test_count = per_test.len();
        AliasingReport {
            per_test,
            norm_estimate,
            test_count,
        }
    }

    /// Mean of the per-probe ratios.
    pub fn mean_ratio(&self) -> f64 {
        if self.per_test.is_empty() {
            return 0.0;
        }
        self.per_test.iter().map(|r| r.ratio()).sum::<f64>() / self.per_test.len() as f64
    }

    /// CSV with columns `test_id,residual_norm,input_norm,ratio` and a
    /// `norm_estimate` footer row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("test_id,residual_norm,input_norm,ratio\n");
        for r in &self.per_test {
            out.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e}\n",
                r.test_id,
                r.residual_norm,
                r.input_norm,
                r.ratio()
            ));
        }
        out.push_str(&format!("norm_estimate,,,{:.17e}\n", self.norm_estimate));
        out
    }
}

/// Whether the declared domain/range spans of `u` are contained in the spans
/// of `psi` and `phi` (the layer admissibility conditions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanConditions {
    pub domain_ok: bool,
    pub range_ok: bool,
}

impl SpanConditions {
    pub fn ok(&self) -> bool {
        self.domain_ok && self.range_ok
    }

    pub fn describe(&self) -> Option<String> {
        match (self.domain_ok, self.range_ok) {
            (true, true) => None,
            (false, true) => Some("Dom U ⊄ span(Ψ)".into()),
            (true, false) => Some("Ran U ⊄ span(Φ)".into()),
            (false, false) => Some("Dom U ⊄ span(Ψ), Ran U ⊄ span(Φ)".into()),
        }
    }
}

pub fn span_conditions(
    u: &ContinuousOperator,
    psi: &Frame,
    phi: &Frame,
) -> Result<SpanConditions> {
    Ok(SpanConditions {
        domain_ok: psi.contains_span(&u.domain_span, SPAN_TOL)?,
        range_ok: phi.contains_span(&u.range_span, SPAN_TOL)?,
    })
}

/// The canonical discretization `T†_Φ ∘ U ∘ T_Ψ` of `U` for the frame pair
/// `(Ψ, Φ)`. Span conditions are not enforced here; callers that care use
/// [`span_conditions`].
pub fn canonical_discretization(
    u: &ContinuousOperator,
    psi: &Frame,
    phi: &Frame,
) -> Result<DiscreteMap> {
    u.domain.ambient().check_same(&psi.space())?;
    u.range.ambient().check_same(&phi.space())?;
    let op = u.clone();
    let psi = psi.clone();
    let phi = phi.clone();
    Ok(DiscreteMap::from_fn(psi.len(), phi.len(), move |c| {
        let f = psi.synthesis(c)?;
        let uf = op.apply(&f)?;
        phi.pseudo_inverse_coeffs(&uf)
    }))
}

/// Aliasing error operator applied to one function:
/// `ε(U,u,Ψ,Φ)(f) = U(f) - T_Φ(u(T†_Ψ f))`.
pub fn aliasing_error_apply(
    u_cont: &ContinuousOperator,
    u_disc: &DiscreteMap,
    psi: &Frame,
    phi: &Frame,
    f: &PeriodicFunction,
) -> Result<PeriodicFunction> {
    u_cont.domain.ambient().check_same(&f.space())?;
    let exact = u_cont.apply(f)?;
    let c = psi.pseudo_inverse_coeffs(f)?;
    let d = u_disc.apply(&c)?;
    let approx = phi.synthesis(&d)?;
    exact.sub(&approx)
}

/// Probe-based estimate of `‖ε(U,u,Ψ,Φ)‖`: max over probes of
/// `‖ε(f)‖ / ‖f‖`.
pub fn aliasing_norm(
    u_cont: &ContinuousOperator,
    u_disc: &DiscreteMap,
    psi: &Frame,
    phi: &Frame,
    tests: &[PeriodicFunction],
) -> Result<AliasingReport> {
    if tests.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut records = Vec::with_capacity(tests.len());
    for (i, f) in tests.iter().enumerate() {
        let eps = aliasing_error_apply(u_cont, u_disc, psi, phi, f)?;
        records.push(AliasingRecord {
            test_id: format!("test-{i}"),
            residual_norm: eps.norm(),
            input_norm: f.norm(),
        });
    }
    Ok(AliasingReport::from_records(records))
}

/// Discrete aliasing error map between two discretizations:
/// `ε(u,u')(c) = u(c) - (T†_Φ T_Φ') u'((T†_Ψ' T_Ψ) c)`, reported as the
/// max over probes of `‖r‖ / ‖u(c)‖`.
pub fn discrete_aliasing_map(
    u: &DiscreteMap,
    u_alt: &DiscreteMap,
    psi: &Frame,
    phi: &Frame,
    psi_alt: &Frame,
    phi_alt: &Frame,
    probes: &[Vec<Complex64>],
) -> Result<AliasingReport> {
    if probes.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let m_in = change_of_frame(psi, psi_alt)?;
    let m_out = change_of_frame(phi_alt, phi)?;
    let mut records = Vec::with_capacity(probes.len());
    for (i, c) in probes.iter().enumerate() {
        if c.len() != u.in_len {
            return Err(Error::DimensionMismatch {
                what: "probe",
                expected: u.in_len,
                got: c.len(),
            });
        }
        let reference = u.apply(c)?;
        let c_alt: Vec<Complex64> = (&m_in * DVector::from_column_slice(c))
            .iter()
            .cloned()
            .collect();
        let out_alt = u_alt.apply(&c_alt)?;
        let mapped = &m_out * DVector::from_column_slice(&out_alt);
        let residual: f64 = reference
            .iter()
            .zip(mapped.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let ref_norm: f64 = reference.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        records.push(AliasingRecord {
            test_id: format!("probe-{i}"),
            residual_norm: residual,
            input_norm: ref_norm,
        });
    }
    Ok(AliasingReport::from_records(records))
}

/// A user-supplied frame-parameterized discretization factory.
pub type DiscretizationFactory = Arc<dyn Fn(&Frame, &Frame) -> Result<DiscreteMap> + Send + Sync>;

/// How a layer produces its discrete representation for a frame pair.
#[derive(Clone)]
pub enum DiscretizationRule {
    /// `T†_Φ ∘ U ∘ T_Ψ`.
    Canonical,
    /// A user-supplied frame-parameterized factory.
    Custom(DiscretizationFactory),
}

/// A hidden layer: the continuous operator plus its discretization recipe.
#[derive(Clone)]
pub struct RenoLayer {
    pub op: ContinuousOperator,
    pub discretize: DiscretizationRule,
}

impl RenoLayer {
    pub fn canonical(op: ContinuousOperator) -> Self {
        RenoLayer {
            op,
            discretize: DiscretizationRule::Canonical,
        }
    }

    pub fn custom(
        op: ContinuousOperator,
        factory: impl Fn(&Frame, &Frame) -> Result<DiscreteMap> + Send + Sync + 'static,
    ) -> Self {
        RenoLayer {
            op,
            discretize: DiscretizationRule::Custom(Arc::new(factory)),
        }
    }

    pub fn build(&self, psi: &Frame, phi: &Frame) -> Result<DiscreteMap> {
        match &self.discretize {
            DiscretizationRule::Canonical => canonical_discretization(&self.op, psi, phi),
            DiscretizationRule::Custom(f) => f(psi, phi),
        }
    }
}

/// Verdict for one hidden layer of a [`reno_check`] run.
#[derive(Debug, Clone)]
pub struct LayerVerdict {
    pub layer: usize,
    pub pass: bool,
    pub norm_estimate: f64,
    pub span_violation: Option<String>,
}

/// Result of a layer-wise representation-equivalence check.
#[derive(Debug, Clone)]
pub struct RenoCheckReport {
    pub layers: Vec<LayerVerdict>,
    pub composed_pass: bool,
    pub composed_norm: f64,
    pub tol: f64,
}

impl RenoCheckReport {
    pub fn all_pass(&self) -> bool {
        self.layers.iter().all(|l| l.pass) && self.composed_pass
    }
}

/// Checks each layer's aliasing norm against `tol` and then the composed
/// stack: if every layer passes the composition must too.
///
/// `frames` must hold one frame per level, `L + 1` entries for `L` layers,
/// each in the ambient of the corresponding interface space. `tests` are
/// probe functions in the first layer's domain ambient; they are pushed
/// forward through the continuous stack to probe deeper layers.
pub fn reno_check(
    layers: &[RenoLayer],
    frames: &[Frame],
    tests: &[PeriodicFunction],
    tol: f64,
) -> Result<RenoCheckReport> {
    if layers.is_empty() {
        return Err(Error::Config("reno_check needs at least one layer".into()));
    }
    if frames.len() != layers.len() + 1 {
        return Err(Error::DimensionMismatch {
            what: "frame list",
            expected: layers.len() + 1,
            got: frames.len(),
        });
    }
    if tests.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    for (i, layer) in layers.iter().enumerate() {
        layer.op.domain.ambient().check_same(&frames[i].space())?;
        layer
            .op
            .range
            .ambient()
            .check_same(&frames[i + 1].space())?;
        if i > 0 {
            layers[i - 1]
                .op
                .range
                .ambient()
                .check_same(&layer.op.domain.ambient())?;
        }
    }

    let mut verdicts = Vec::with_capacity(layers.len());
    let mut current: Vec<PeriodicFunction> = tests.to_vec();
    for (i, layer) in layers.iter().enumerate() {
        let mut layer_tests = current.clone();
        layer_tests.extend(frames[i].vectors().iter().cloned());
        let disc = layer.build(&frames[i], &frames[i + 1])?;
        let report = aliasing_norm(&layer.op, &disc, &frames[i], &frames[i + 1], &layer_tests)?;
        let spans = span_conditions(&layer.op, &frames[i], &frames[i + 1])?;
        verdicts.push(LayerVerdict {
            layer: i + 1,
            pass: report.norm_estimate <= tol,
            norm_estimate: report.norm_estimate,
            span_violation: spans.describe(),
        });
        current = current
            .iter()
            .map(|f| layer.op.apply(f))
            .collect::<Result<_>>()?;
    }

    // Composed stack per the full-depth aliasing operator.
    let mut composed_norm: f64 = 0.0;
    let discs: Vec<DiscreteMap> = layers
        .iter()
        .enumerate()
        .map(|(i, l)| l.build(&frames[i], &frames[i + 1]))
        .collect::<Result<_>>()?;
    for f in tests {
        let mut exact = f.clone();
        for layer in layers {
            exact = layer.op.apply(&exact)?;
        }
        let mut c = frames[0].pseudo_inverse_coeffs(f)?;
        for d in &discs {
            c = d.apply(&c)?;
        }
        let approx = frames[frames.len() - 1].synthesis(&c)?;
        let residual = exact.sub(&approx)?.norm();
        let input = f.norm();
        let ratio = if input == 0.0 {
            if residual == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            residual / input
        };
        composed_norm = composed_norm.max(ratio);
    }

    Ok(RenoCheckReport {
        layers: verdicts,
        composed_pass: composed_norm <= tol,
        composed_norm,
        tol,
    })
}

/// Outcome of the unique-recipe (change-of-frame) identity check.
#[derive(Debug, Clone)]
pub struct UniqueRecipeOutcome {
    pub pass: bool,
    pub max_rel_err: f64,
    pub span_violations: Vec<String>,
}

/// Verifies `𝔤(Ψ',Φ') = T†_{Φ'} T_Φ ∘ 𝔤(Ψ,Φ) ∘ T†_Ψ T_{Ψ'}` on probe
/// coefficient sequences over `psi_alt`.
pub fn unique_recipe_identity_check(
    layer: &RenoLayer,
    psi: &Frame,
    phi: &Frame,
    psi_alt: &Frame,
    phi_alt: &Frame,
    probes: &[Vec<Complex64>],
    tol: f64,
) -> Result<UniqueRecipeOutcome> {
    if probes.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut span_violations = Vec::new();
    if let Some(v) = span_conditions(&layer.op, psi, phi)?.describe() {
        span_violations.push(format!("(Ψ,Φ): {v}"));
    }
    if let Some(v) = span_conditions(&layer.op, psi_alt, phi_alt)?.describe() {
        span_violations.push(format!("(Ψ',Φ'): {v}"));
    }

    let lhs_map = layer.build(psi_alt, phi_alt)?;
    let base_map = layer.build(psi, phi)?;
    let m_in = change_of_frame(psi_alt, psi)?;
    let m_out = change_of_frame(phi, phi_alt)?;

    let mut max_rel_err: f64 = 0.0;
    for c in probes {
        let lhs = lhs_map.apply(c)?;
        let mid: Vec<Complex64> = (&m_in * DVector::from_column_slice(c))
            .iter()
            .cloned()
            .collect();
        let base_out = base_map.apply(&mid)?;
        let rhs = &m_out * DVector::from_column_slice(&base_out);
        let diff: f64 = lhs
            .iter()
            .zip(rhs.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let lhs_norm: f64 = lhs.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let rel = if lhs_norm == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / lhs_norm
        };
        max_rel_err = max_rel_err.max(rel);
    }

    Ok(UniqueRecipeOutcome {
        pass: span_violations.is_empty() && max_rel_err <= tol,
        max_rel_err,
        span_violations,
    })
}

/// The default deterministic probe set for a space: the basis exponentials
/// plus 32 seeded random unit-norm real functions.
pub fn standard_probes(space: BandlimitedSpace, seed: u64) -> Vec<PeriodicFunction> {
    let mut probes: Vec<PeriodicFunction> =
        crate::spaces::fourier_basis(space).vectors().to_vec();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut unit = move || (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
    for _ in 0..32 {
        let k = space.k() as i64;
        let mut coeffs = vec![Complex64::ZERO; space.dim()];
        coeffs[space.k()] = Complex64::new(unit(), 0.0);
        for j in 1..=k {
            let v = Complex64::new(unit(), unit());
            coeffs[(space.k() as i64 + j) as usize] = v;
            coeffs[(space.k() as i64 - j) as usize] = v.conj();
        }
        let f = crate::spaces::band_function(space, &coeffs);
        let n = f.norm();
        if n > 0.0 {
            probes.push(f.scale(Complex64::new(1.0 / n, 0.0)));
        }
    }
    probes
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::AmbientSpace;
    use crate::spaces::{dirichlet_basis, fourier_basis};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn canonical_identity_fourier_is_identity_map() {
        let space = BandlimitedSpace::tight(3);
        let id = ContinuousOperator::identity(space);
        let basis = fourier_basis(space);
        let u = canonical_discretization(&id, &basis, &basis).unwrap();
        let input: Vec<Complex64> = (0..7).map(|i| c(0.2 * i as f64 - 0.5, 0.1)).collect();
        let out = u.apply(&input).unwrap();
        for (a, b) in input.iter().zip(&out) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn canonical_identity_fourier_to_dirichlet_matches_change_of_frame() {
        let space = BandlimitedSpace::tight(2);
        let id = ContinuousOperator::identity(space);
        let fb = fourier_basis(space);
        let db = dirichlet_basis(space);
        let u = canonical_discretization(&id, &fb, &db).unwrap();
        let m = change_of_frame(&fb, &db).unwrap();
        let input: Vec<Complex64> = (0..5).map(|i| c(0.3 * i as f64, -0.2)).collect();
        let out = u.apply(&input).unwrap();
        let direct = &m * DVector::from_column_slice(&input);
        for (a, b) in out.iter().zip(direct.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn aliasing_zero_for_canonical_in_span() {
        let space = BandlimitedSpace::tight(3);
        let id = ContinuousOperator::identity(space);
        let fb = fourier_basis(space);
        let db = dirichlet_basis(space);
        let u = canonical_discretization(&id, &fb, &db).unwrap();
        for f in standard_probes(space, 7) {
            let eps = aliasing_error_apply(&id, &u, &fb, &db, &f).unwrap();
            assert!(eps.norm() < 1e-9);
        }
    }

    #[test]
    fn aliasing_zero_operator() {
        let space = BandlimitedSpace::tight(2);
        let zero_op = ContinuousOperator::zero(space, space);
        let fb = fourier_basis(space);
        let u = DiscreteMap::zero(5, 5);
        for f in standard_probes(space, 3) {
            let eps = aliasing_error_apply(&zero_op, &u, &fb, &fb, &f).unwrap();
            assert!(eps.norm() < 1e-12);
        }
    }

    #[test]
    fn aliasing_norm_empty_tests_rejected() {
        let space = BandlimitedSpace::tight(1);
        let id = ContinuousOperator::identity(space);
        let fb = fourier_basis(space);
        let u = canonical_discretization(&id, &fb, &fb).unwrap();
        assert_eq!(
            aliasing_norm(&id, &u, &fb, &fb, &[]),
            Err(Error::EmptyTestSet)
        );
    }

    #[test]
    fn aliasing_norm_scale_free_for_linear() {
        let space = BandlimitedSpace::tight(2);
        // a linear operator that truncates to P_1 (in the same ambient)
        let m = {
            let mut m = DMatrix::<Complex64>::zeros(5, 5);
            for i in 1..4 {
                m[(i, i)] = Complex64::ONE;
            }
            m
        };
        let op = ContinuousOperator::linear(space, space, m).unwrap();
        let fb = fourier_basis(space);
        let u = DiscreteMap::identity(5); // wrong: keeps all modes
        let tests = standard_probes(space, 1);
        let doubled: Vec<_> = tests.iter().map(|f| f.scale(c(2.0, 0.0))).collect();
        let a = aliasing_norm(&op, &u, &fb, &fb, &tests).unwrap();
        let b = aliasing_norm(&op, &u, &fb, &fb, &doubled).unwrap();
        assert!((a.norm_estimate - b.norm_estimate).abs() < 1e-12);
        assert!(a.norm_estimate > 0.1);
    }

    #[test]
    fn probe_monotonicity() {
        let space = BandlimitedSpace::tight(2);
        let id = ContinuousOperator::identity(space);
        let fb = fourier_basis(space);
        let u = DiscreteMap::zero(5, 5); // maximally wrong discretization
        let tests = standard_probes(space, 5);
        let small = aliasing_norm(&id, &u, &fb, &fb, &tests[..3]).unwrap();
        let big = aliasing_norm(&id, &u, &fb, &fb, &tests).unwrap();
        assert!(big.norm_estimate >= small.norm_estimate);
    }

    #[test]
    fn discrete_aliasing_map_self_is_zero() {
        let space = BandlimitedSpace::tight(2);
        let fb = fourier_basis(space);
        let db = dirichlet_basis(space);
        let u = DiscreteMap::linear(change_of_frame(&fb, &db).unwrap());
        let probes: Vec<Vec<Complex64>> = (0..5)
            .map(|i| (0..5).map(|j| c((i * j) as f64 * 0.1, 0.05)).collect())
            .collect();
        let report = discrete_aliasing_map(&u, &u, &fb, &db, &fb, &db, &probes).unwrap();
        assert!(report.norm_estimate < 1e-10);
    }

    #[test]
    fn reno_check_truncation_stack_passes() {
        // P_4 -> P_2 -> P_1 truncations with canonical discretizations.
        let ambient = AmbientSpace::new(4);
        let s4 = BandlimitedSpace::new(4, ambient).unwrap();
        let s2 = BandlimitedSpace::new(2, ambient).unwrap();
        let s1 = BandlimitedSpace::new(1, ambient).unwrap();
        let layers = vec![
            RenoLayer::canonical(ContinuousOperator::truncation(s4, s2)),
            RenoLayer::canonical(ContinuousOperator::truncation(s2, s1)),
        ];
        let frames = vec![fourier_basis(s4), fourier_basis(s2), fourier_basis(s1)];
        let tests = standard_probes(s4, 11);
        let report = reno_check(&layers, &frames, &tests, 1e-8).unwrap();
        assert!(report.all_pass(), "report: {report:?}");
    }

    #[test]
    fn unique_recipe_identity_for_identity_operator() {
        let space = BandlimitedSpace::tight(3);
        let layer = RenoLayer::canonical(ContinuousOperator::identity(space));
        let fb = fourier_basis(space);
        let db = dirichlet_basis(space);
        let probes: Vec<Vec<Complex64>> = (0..10)
            .map(|i| {
                (0..7)
                    .map(|j| c(((i + j) % 5) as f64 * 0.2 - 0.4, (j as f64) * 0.1))
                    .collect()
            })
            .collect();
        let out =
            unique_recipe_identity_check(&layer, &fb, &fb, &db, &db, &probes, 1e-9).unwrap();
        assert!(out.pass, "outcome: {out:?}");
    }

    #[test]
    fn csv_report_shape() {
        let report = AliasingReport::from_records(vec![AliasingRecord {
            test_id: "test-0".into(),
            residual_norm: 0.5,
            input_norm: 1.0,
        }]);
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "test_id,residual_norm,input_norm,ratio");
        assert!(lines[2].starts_with("norm_estimate,,,"));
        assert_eq!(report.norm_estimate, 0.5);
    }
}

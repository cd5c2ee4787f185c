//! Dataset generation, supervised training of the model zoo, and
//! multi-resolution evaluation sweeps.
//!
//! The target operator is data-defined: random input/target pairs drawn
//! i.i.d. on the Nyquist grid. Training memorizes the pairs at one fixed
//! resolution; the evaluation sweep then measures the discrete aliasing
//! error of each model's wrapping at every other resolution against the
//! training-resolution map.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::autodiff::Tape;
use crate::container::{deinterleave, interleave, Record, RECORD_DATASET, RECORD_MODEL_CHECKPOINT};
use crate::error::{Error, Result};
use crate::frames::{AmbientSpace, PeriodicFunction};
use crate::models::{
    conv_apply, pack_coeffs, sno_apply, unpack_coeffs, ActivationKind, ConvLayer, FnoLayer,
    MlpParams, SnoModel,
};
use crate::operators::{discrete_aliasing_map, AliasingReport, DiscreteMap};
use crate::spaces::{
    sample, samples_to_coeffs, sampling_frame, BandlimitedSpace, SampleGrid, SampleVector,
};

/// Name of the value generator, written into dataset headers. The stream
/// is a seeded ChaCha20 word source fed through Box-Muller.
pub const GENERATOR_NAME: &str = "chacha20/box-muller";

/// Standard normal stream: uniform 64-bit words through the Box-Muller
/// transform, one value at a time, spare cached.
struct Normals {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl Normals {
    fn new(seed: u64) -> Self {
        Normals {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform in (0, 1]: zero is excluded so the log is always finite.
    fn uniform_open(&mut self) -> f64 {
        (self.rng.next_u64() as f64 + 1.0) / (u64::MAX as f64 + 1.0)
    }

    fn next(&mut self) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform_open();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// A supervised dataset of bandlimited input/target pairs.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub k: usize,
    pub d: usize,
    pub seed: u64,
    pub pairs: Vec<(PeriodicFunction, PeriodicFunction)>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.pairs.len()
    }

    pub fn train_resolution(&self) -> usize {
        2 * self.k + 1
    }
}

/// Draws `n` input/target pairs in `P_K`: `2K+1` i.i.d. grid values per
/// function from N(0, 1/3), converted to coefficients through the exact
/// Nyquist-grid correspondence.
pub fn gen_dataset(k: usize, n: usize, seed: u64, d: usize) -> Result<Dataset> {
    if d != 1 {
        return Err(Error::Config(format!(
            "dimension {d} not supported; only d=1 is implemented"
        )));
    }
    if n == 0 {
        return Err(Error::Config("dataset needs at least one pair".into()));
    }
    let m = 2 * k + 1;
    let grid = SampleGrid::new(m)?;
    let sigma = (1.0f64 / 3.0).sqrt();
    let mut normals = Normals::new(seed);
    let draw_fn = |normals: &mut Normals| -> Result<PeriodicFunction> {
        let values: Vec<f64> = (0..m).map(|_| normals.next() * sigma).collect();
        let s = SampleVector::from_real(grid, &values)?;
        samples_to_coeffs(&s, k)
    };
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let input = draw_fn(&mut normals)?;
        let target = draw_fn(&mut normals)?;
        pairs.push((input, target));
    }
    Ok(Dataset { k, d, seed, pairs })
}

/// Serializes a dataset to a container record: metadata holds the shape
/// fields and generator name, the payload interleaves every pair's
/// coefficients (input then target, re/im pairs).
pub fn dataset_to_record(ds: &Dataset) -> Record {
    let mut payload = Vec::new();
    for (input, target) in &ds.pairs {
        payload.extend(interleave(input.coeffs()));
        payload.extend(interleave(target.coeffs()));
    }
    Record::new(
        RECORD_DATASET,
        serde_json::json!({
            "k": ds.k,
            "n": ds.n(),
            "d": ds.d,
            "seed": ds.seed,
            "generator": GENERATOR_NAME,
        }),
        payload,
    )
}

pub fn dataset_from_record(record: &Record) -> Result<Dataset> {
    if record.record_type != RECORD_DATASET {
        return Err(Error::Format("record is not a dataset".into()));
    }
    let k = record.meta_usize("k")?;
    let n = record.meta_usize("n")?;
    let d = record.meta_usize("d")?;
    let seed = record
        .metadata
        .get("seed")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Format("missing metadata field seed".into()))?;
    let space = AmbientSpace::new(k);
    let per_fn = 2 * space.dim();
    if record.payload.len() != n * 2 * per_fn {
        return Err(Error::Format("dataset payload length mismatch".into()));
    }
    let mut pairs = Vec::with_capacity(n);
    for chunk in record.payload.chunks_exact(2 * per_fn) {
        let input = PeriodicFunction::new(space, deinterleave(&chunk[..per_fn])?)?;
        let target = PeriodicFunction::new(space, deinterleave(&chunk[per_fn..])?)?;
        pairs.push((input, target));
    }
    Ok(Dataset { k, d, seed, pairs })
}

/// Which architecture to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Sno,
    Cnn,
    Fno,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Sno => "sno",
            ModelKind::Cnn => "cnn",
            ModelKind::Fno => "fno",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "sno" => Some(ModelKind::Sno),
            "cnn" => Some(ModelKind::Cnn),
            "fno" => Some(ModelKind::Fno),
            _ => None,
        }
    }
}

/// Training hyperparameters. Defaults: Adam(1e-3, 0.9, 0.999, 1e-8),
/// full batch, 2000 epochs.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Hidden widths of the SNO network.
    pub hidden: Vec<usize>,
}

impl TrainConfig {
    pub fn defaults(model: ModelKind, seed: u64) -> Self {
        TrainConfig {
            model,
            epochs: 2000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed,
            hidden: vec![128, 128],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0
            || self.beta1 <= 0.0
            || self.beta1 >= 1.0
            || self.beta2 <= 0.0
            || self.beta2 >= 1.0
            || self.epsilon <= 0.0
        {
            return Err(Error::Config("training rates must be positive".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        Ok(())
    }
}

/// A trained (or freshly initialized) model ready for evaluation at any
/// resolution.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Sno { k: usize, model: SnoModel },
    Cnn { layers: Vec<ConvLayer> },
    Fno { k: usize, layers: Vec<FnoLayer> },
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Sno { .. } => ModelKind::Sno,
            TrainedModel::Cnn { .. } => ModelKind::Cnn,
            TrainedModel::Fno { .. } => ModelKind::Fno,
        }
    }
}

/// Runs a model at the resolution of the given sample vector. The SNO and
/// FNO extract whatever modes the grid can resolve (projection below the
/// Nyquist count); the CNN reinterprets its taps on the new grid.
pub fn forward_samples(model: &TrainedModel, s: &SampleVector) -> Result<SampleVector> {
    match model {
        TrainedModel::Cnn { layers } => {
            let mut cur = s.clone();
            for layer in layers {
                cur = conv_apply(layer, &cur)?;
            }
            Ok(cur)
        }
        TrainedModel::Sno { k, model } => {
            let m = s.grid.len();
            let k_eff = (*k).min((m - 1) / 2);
            let g = samples_to_coeffs(s, k_eff)?;
            let g = g.embed(AmbientSpace::new(*k))?;
            let out = sno_apply(model, &g)?;
            Ok(sample(&out, s.grid))
        }
        TrainedModel::Fno { k: _, layers } => {
            let mut cur = s.clone();
            for layer in layers {
                cur = fno_apply_any(layer, &cur)?;
            }
            Ok(cur)
        }
    }
}

/// Fourier layer at an arbitrary grid length: resolvable modes only, same
/// grid out. Above the Nyquist count of `K_in` this agrees with
/// `models::fno_apply`; below it the unresolvable modes read as zero and
/// the synthesized output aliases on the coarse grid, which is the
/// non-equivalence the evaluation sweep measures.
fn fno_apply_any(layer: &FnoLayer, s: &SampleVector) -> Result<SampleVector> {
    let m = s.grid.len();
    let k_eff = layer.k_in().min((m - 1) / 2);
    let v = samples_to_coeffs(s, k_eff)?;
    let k_out = layer.k_out() as i64;
    let k_eff = k_eff as i64;
    let coeffs: Vec<Complex64> = (-k_out..=k_out)
        .map(|k| {
            let w = if k.abs() <= k_eff {
                v.coeff(k)
            } else {
                Complex64::ZERO
            };
            let r = layer.multiplier()[(k + k_out) as usize];
            r * w + layer.pointwise_weight() * w + layer.bias().coeff(k)
        })
        .collect();
    let out_fn = PeriodicFunction::new(AmbientSpace::new(layer.k_out()), coeffs)?;
    let sampled = sample(&out_fn, s.grid);
    let values = sampled
        .values
        .iter()
        .map(|&z| layer.activation().apply_complex(z))
        .collect();
    SampleVector::new(s.grid, values)
}

/// Adam with bias correction, one state slot per tape parameter.
struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    fn new(config: &TrainConfig, shapes: &[usize]) -> Self {
        Adam {
            lr: config.learning_rate,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            m: shapes.iter().map(|&s| vec![0.0; s]).collect(),
            v: shapes.iter().map(|&s| vec![0.0; s]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, tape: &mut Tape, grads: &[Vec<f64>]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (p, g) in grads.iter().enumerate() {
            let mut values = tape.param_values(p).to_vec();
            for (i, &gi) in g.iter().enumerate() {
                self.m[p][i] = self.beta1 * self.m[p][i] + (1.0 - self.beta1) * gi;
                self.v[p][i] = self.beta2 * self.v[p][i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = self.m[p][i] / bc1;
                let v_hat = self.v[p][i] / bc2;
                values[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            tape.set_param(p, values);
        }
    }
}

/// A tape plus the bookkeeping needed to turn its parameters back into a
/// [`TrainedModel`].
struct ModelTape {
    tape: Tape,
    target_const: usize,
    builder: fn(&ModelTape, usize) -> Result<TrainedModel>,
    k: usize,
    hidden: Vec<usize>,
}

fn uniform_pm(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0
}

/// Real matrix of the scaled forward DFT on an `M`-node grid: maps `M`
/// real samples to `2K+1` interleaved (re, im) coefficients,
/// `W_k = (1/M) Σ_n s_n e^{-iπ k x_n}`.
fn dft_matrix_real(m: usize, k: usize) -> DMatrix<f64> {
    let grid = SampleGrid::new(m).expect("odd grid");
    let mut out = DMatrix::zeros(2 * (2 * k + 1), m);
    for (row, kk) in (-(k as i64)..=k as i64).enumerate() {
        for n in 0..m {
            let phase = -PI * kk as f64 * grid.node(n);
            out[(2 * row, n)] = phase.cos() / m as f64;
            out[(2 * row + 1, n)] = phase.sin() / m as f64;
        }
    }
    out
}

/// Real matrix of the synthesis map: `2K+1` interleaved coefficients to
/// `M` real samples, taking the real part (inputs are Hermitian by
/// construction, so nothing is lost).
fn synthesis_matrix_real(m: usize, k: usize) -> DMatrix<f64> {
    let grid = SampleGrid::new(m).expect("odd grid");
    let mut out = DMatrix::zeros(m, 2 * (2 * k + 1));
    for n in 0..m {
        for (col, kk) in (-(k as i64)..=k as i64).enumerate() {
            let phase = PI * kk as f64 * grid.node(n);
            out[(n, 2 * col)] = phase.cos();
            out[(n, 2 * col + 1)] = -phase.sin();
        }
    }
    out
}

/// Real matrix expanding the packed Hermitian parameterization
/// `[c_0.re, c_1.re, c_1.im, ...]` to `2K+1` interleaved coefficients.
fn hermitian_expand_matrix(k: usize) -> DMatrix<f64> {
    let dim = 2 * k + 1;
    let mut out = DMatrix::zeros(2 * dim, dim);
    // row pair for mode kk sits at 2*(kk+k)
    out[(2 * k, 0)] = 1.0; // c_0.re
    for m in 1..=k {
        let pos = 2 * (k + m);
        let neg = 2 * (k - m);
        out[(pos, 2 * m - 1)] = 1.0;
        out[(pos + 1, 2 * m)] = 1.0;
        out[(neg, 2 * m - 1)] = 1.0;
        out[(neg + 1, 2 * m)] = -1.0;
    }
    out
}

const CNN_TAPS: usize = 9;

fn build_sno_tape(k: usize, hidden: &[usize], seed: u64) -> ModelTape {
    let n = 2 * k + 1;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut tape = Tape::new(n);
    let mut widths = vec![n];
    widths.extend_from_slice(hidden);
    widths.push(n);
    let x = tape.input();
    let mut h = x;
    for layer in 0..widths.len() - 1 {
        let (fan_in, fan_out) = (widths[layer], widths[layer + 1]);
        let scale = (1.0 / fan_in as f64).sqrt();
        let w = tape.param(
            (0..fan_out * fan_in)
                .map(|_| uniform_pm(&mut rng) * scale)
                .collect(),
        );
        let b = tape.param(vec![0.0; fan_out]);
        h = tape.matvec(w, h, fan_out, fan_in);
        h = tape.sub(h, b);
        if layer + 1 < widths.len() - 1 {
            h = tape.activation(h, ActivationKind::Tanh);
        }
    }
    let target = tape.constant(vec![0.0; n]);
    let diff = tape.sub(h, target);
    let ss = tape.sum_sq(diff);
    tape.scale(ss, 1.0 / n as f64);
    ModelTape {
        tape,
        target_const: 0,
        builder: sno_from_tape,
        k,
        hidden: hidden.to_vec(),
    }
}

fn sno_from_tape(mt: &ModelTape, _m: usize) -> Result<TrainedModel> {
    let n = 2 * mt.k + 1;
    let mut widths = vec![n];
    widths.extend_from_slice(&mt.hidden);
    widths.push(n);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for layer in 0..widths.len() - 1 {
        let (fan_in, fan_out) = (widths[layer], widths[layer + 1]);
        let w = mt.tape.param_values(2 * layer);
        let b = mt.tape.param_values(2 * layer + 1);
        weights.push(DMatrix::from_row_slice(fan_out, fan_in, w));
        biases.push(nalgebra::DVector::from_column_slice(b));
    }
    let mlp = MlpParams::new(weights, biases, ActivationKind::Tanh)?;
    Ok(TrainedModel::Sno {
        k: mt.k,
        model: SnoModel::new(mt.k, mt.k, mlp)?,
    })
}

fn build_cnn_tape(k: usize, seed: u64) -> ModelTape {
    let m = 2 * k + 1;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut tape = Tape::new(m);
    // init large enough that the untrained output carries real energy;
    // training then shrinks toward the best circulant fit and the loss
    // drops by well over half
    let scale = 1.0;
    let taps1 = tape.param((0..CNN_TAPS).map(|_| uniform_pm(&mut rng) * scale).collect());
    let taps2 = tape.param((0..CNN_TAPS).map(|_| uniform_pm(&mut rng) * scale).collect());
    let x = tape.input();
    let h = tape.circ_conv(taps1, x);
    let h = tape.activation(h, ActivationKind::Tanh);
    let h = tape.circ_conv(taps2, h);
    let target = tape.constant(vec![0.0; m]);
    let diff = tape.sub(h, target);
    let ss = tape.sum_sq(diff);
    tape.scale(ss, 1.0 / m as f64);
    ModelTape {
        tape,
        target_const: 0,
        builder: cnn_from_tape,
        k,
        hidden: Vec::new(),
    }
}

fn cnn_from_tape(mt: &ModelTape, _m: usize) -> Result<TrainedModel> {
    let layers = vec![
        ConvLayer::new(mt.tape.param_values(0).to_vec(), ActivationKind::Tanh)?,
        ConvLayer::new(mt.tape.param_values(1).to_vec(), ActivationKind::Identity)?,
    ];
    Ok(TrainedModel::Cnn { layers })
}

const FNO_LAYERS: usize = 2;

fn build_fno_tape(k: usize, seed: u64) -> ModelTape {
    let m = 2 * k + 1;
    let n = 2 * k + 1;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut tape = Tape::new(m);
    let dft = tape.fixed_matrix(dft_matrix_real(m, k));
    let synth = tape.fixed_matrix(synthesis_matrix_real(m, k));
    let expand = tape.fixed_matrix(hermitian_expand_matrix(k));
    let x = tape.input();
    let mut cur = x;
    for layer in 0..FNO_LAYERS {
        // wide multiplier init for the same reason as the conv taps: the
        // untrained map must carry enough energy that fitting halves the loss
        let r_packed = tape.param((0..n).map(|_| uniform_pm(&mut rng) * 2.0).collect());
        let a = tape.param(vec![uniform_pm(&mut rng) * 0.5]);
        let bias_packed = tape.param(vec![0.0; n]);
        let v = tape.fixed_matvec(dft, cur);
        let r_full = tape.fixed_matvec(expand, r_packed);
        let rv = tape.complex_mul(r_full, v);
        let av = tape.scale_by_param(a, v);
        let b_full = tape.fixed_matvec(expand, bias_packed);
        let c1 = tape.add(rv, av);
        let c = tape.add(c1, b_full);
        let s = tape.fixed_matvec(synth, c);
        cur = if layer + 1 < FNO_LAYERS {
            tape.activation(s, ActivationKind::Relu)
        } else {
            s
        };
    }
    let target = tape.constant(vec![0.0; m]);
    let diff = tape.sub(cur, target);
    let ss = tape.sum_sq(diff);
    tape.scale(ss, 1.0 / m as f64);
    ModelTape {
        tape,
        target_const: 0,
        builder: fno_from_tape,
        k,
        hidden: Vec::new(),
    }
}

fn fno_from_tape(mt: &ModelTape, _m: usize) -> Result<TrainedModel> {
    let mut layers = Vec::with_capacity(FNO_LAYERS);
    for layer in 0..FNO_LAYERS {
        let r_packed = mt.tape.param_values(3 * layer);
        let a = mt.tape.param_values(3 * layer + 1)[0];
        let bias_packed = mt.tape.param_values(3 * layer + 2);
        let r_fn = unpack_coeffs(mt.k, r_packed)?;
        let bias = unpack_coeffs(mt.k, bias_packed)?;
        let activation = if layer + 1 < FNO_LAYERS {
            ActivationKind::Relu
        } else {
            ActivationKind::Identity
        };
        layers.push(FnoLayer::new(
            mt.k,
            mt.k,
            r_fn.coeffs().to_vec(),
            a,
            bias,
            activation,
        )?);
    }
    Ok(TrainedModel::Fno { k: mt.k, layers })
}

fn build_model_tape(config: &TrainConfig, k: usize) -> ModelTape {
    match config.model {
        ModelKind::Sno => build_sno_tape(k, &config.hidden, config.seed),
        ModelKind::Cnn => build_cnn_tape(k, config.seed),
        ModelKind::Fno => build_fno_tape(k, config.seed),
    }
}

/// The scalar training-loss tape for one pair: the model forward pass
/// followed by mean squared error against the target in constant slot 0.
/// Useful for gradient checks against the exact training objective.
pub fn loss_tape(config: &TrainConfig, k: usize) -> Tape {
    build_model_tape(config, k).tape
}

/// An initialized but untrained model with the same seeded parameters a
/// training run would start from.
pub fn init_model(config: &TrainConfig, k: usize) -> Result<TrainedModel> {
    config.validate()?;
    let mt = build_model_tape(config, k);
    (mt.builder)(&mt, 2 * k + 1)
}

/// Result of a training run: the fitted model and the loss at every
/// epoch boundary (length `epochs + 1`).
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub loss_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("nonempty history")
    }
}

/// Per-pair training representation: packed coefficients for the SNO,
/// real grid samples for the CNN and FNO.
fn pair_vectors(ds: &Dataset, kind: ModelKind) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let grid = SampleGrid::new(ds.train_resolution())?;
    ds.pairs
        .iter()
        .map(|(input, target)| match kind {
            ModelKind::Sno => Ok((pack_coeffs(input), pack_coeffs(target))),
            ModelKind::Cnn | ModelKind::Fno => {
                let re = |f: &PeriodicFunction| -> Vec<f64> {
                    sample(f, grid).values.iter().map(|z| z.re).collect()
                };
                Ok((re(input), re(target)))
            }
        })
        .collect()
}

/// Full-batch Adam on the mean squared error at the training resolution.
/// Loss history entry `e` is the mean loss with the parameters of epoch
/// `e`; the last entry is evaluated after the final update.
pub fn train_model(ds: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let mut mt = build_model_tape(config, ds.k);
    let data = pair_vectors(ds, config.model)?;
    let n = data.len() as f64;
    let shapes: Vec<usize> = (0..mt.tape.param_count())
        .map(|p| mt.tape.param_values(p).len())
        .collect();
    let mut adam = Adam::new(config, &shapes);
    let mut history = Vec::with_capacity(config.epochs + 1);

    let mean_loss = |mt: &mut ModelTape| -> Result<f64> {
        let mut acc = 0.0;
        for (input, target) in &data {
            mt.tape.set_const(mt.target_const, target.clone());
            acc += mt.tape.forward(input)?[0];
        }
        Ok(acc / n)
    };

    for epoch in 0..config.epochs {
        let mut grad_acc: Vec<Vec<f64>> = shapes.iter().map(|&s| vec![0.0; s]).collect();
        let mut loss_acc = 0.0;
        for (input, target) in &data {
            mt.tape.set_const(mt.target_const, target.clone());
            let out = mt.tape.forward(input)?;
            loss_acc += out[0];
            let grads = mt.tape.backward(&[1.0])?;
            for (dst, src) in grad_acc.iter_mut().zip(&grads.by_param) {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
        }
        let loss = loss_acc / n;
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch });
        }
        history.push(loss);
        for g in &mut grad_acc {
            for v in g.iter_mut() {
                *v /= n;
            }
        }
        adam.step(&mut mt.tape, &grad_acc);
    }
    let final_loss = mean_loss(&mut mt)?;
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: config.epochs,
        });
    }
    history.push(final_loss);
    let model = (mt.builder)(&mt, ds.train_resolution())?;
    Ok(TrainOutcome {
        model,
        loss_history: history,
    })
}

/// Discrete aliasing error of a model across resolutions against its
/// training-resolution map.
#[derive(Debug, Clone)]
pub struct EvalCurve {
    pub model_kind: String,
    pub train_resolution: usize,
    pub resolutions: Vec<usize>,
    pub errors: Vec<f64>,
}

impl EvalCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("resolution,error,model,train_resolution\n");
        for (m, e) in self.resolutions.iter().zip(&self.errors) {
            out.push_str(&format!(
                "{m},{e:.12e},{},{}\n",
                self.model_kind, self.train_resolution
            ));
        }
        out
    }
}

/// Frame of `P_K` matched to an `M`-node grid. At or above the Nyquist
/// count this is the tight oversampled sampling frame; below it the grid
/// only spans `P_{(M-1)/2}`, so the sampling basis of that smaller space
/// stands in and inputs get projected through its pseudo-inverse.
fn resolution_frame(k: usize, m: usize, ambient: AmbientSpace) -> Result<crate::frames::Frame> {
    let k_order = k.min((m - 1) / 2);
    let space = BandlimitedSpace::new(k_order, ambient)?;
    sampling_frame(space, SampleGrid::new(m)?)
}

/// Samples-per-coefficient factor of [`resolution_frame`]: the frame is
/// tight with bound `M / (2K+1)`, so `samples = (M / sqrt(2K+1)) ·
/// coefficients`.
fn resolution_scale(k: usize, m: usize) -> f64 {
    let k_order = k.min((m - 1) / 2);
    m as f64 / ((2 * k_order + 1) as f64).sqrt()
}

/// The model as a map on sampling-frame coefficient vectors at one
/// resolution.
fn resolution_map(model: &TrainedModel, k: usize, m: usize) -> DiscreteMap {
    let model = model.clone();
    let alpha = resolution_scale(k, m);
    DiscreteMap::from_fn(m, m, move |c| {
        let grid = SampleGrid::new(m)?;
        let values: Vec<Complex64> = c.iter().map(|z| z * alpha).collect();
        let s = SampleVector::new(grid, values)?;
        let out = forward_samples(&model, &s)?;
        Ok(out.values.iter().map(|z| z / alpha).collect())
    })
}

/// Multi-resolution sweep: for each odd resolution `M`, compares the
/// model's `M`-resolution wrapping to its training-resolution map through
/// the change-of-frame maps and records the mean relative discrete
/// aliasing error over the dataset inputs.
pub fn eval_multires(
    model: &TrainedModel,
    ds: &Dataset,
    resolutions: &[usize],
) -> Result<EvalCurve> {
    if resolutions.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut resolutions = resolutions.to_vec();
    resolutions.sort_unstable();
    resolutions.dedup();
    for &m in &resolutions {
        if m % 2 == 0 {
            return Err(Error::EvenResolution(m));
        }
        if m < 3 {
            return Err(Error::Config(format!("resolution {m} below minimum 3")));
        }
    }
    let k = ds.k;
    let m_train = ds.train_resolution();
    let ambient = AmbientSpace::new(k);
    let psi = resolution_frame(k, m_train, ambient)?;
    let u_train = resolution_map(model, k, m_train);
    let probes: Vec<Vec<Complex64>> = ds
        .pairs
        .iter()
        .map(|(input, _)| psi.pseudo_inverse_coeffs(input))
        .collect::<Result<_>>()?;
    let mut errors = Vec::with_capacity(resolutions.len());
    for &m in &resolutions {
        let psi_alt = resolution_frame(k, m, ambient)?;
        let u_alt = resolution_map(model, k, m);
        let report =
            discrete_aliasing_map(&u_train, &u_alt, &psi, &psi, &psi_alt, &psi_alt, &probes)?;
        errors.push(report.mean_ratio());
    }
    Ok(EvalCurve {
        model_kind: model.kind().name().to_string(),
        train_resolution: m_train,
        resolutions,
        errors,
    })
}

/// Discrete aliasing map between two resolutions of one model, probed
/// with the dataset inputs expressed over the reference resolution's
/// frame.
pub fn aliasing_between(
    model: &TrainedModel,
    ds: &Dataset,
    m_a: usize,
    m_b: usize,
) -> Result<AliasingReport> {
    for m in [m_a, m_b] {
        if m % 2 == 0 {
            return Err(Error::EvenResolution(m));
        }
    }
    let k = ds.k;
    let ambient = AmbientSpace::new(k);
    let psi_a = resolution_frame(k, m_a, ambient)?;
    let psi_b = resolution_frame(k, m_b, ambient)?;
    let u_a = resolution_map(model, k, m_a);
    let u_b = resolution_map(model, k, m_b);
    let probes: Vec<Vec<Complex64>> = ds
        .pairs
        .iter()
        .map(|(input, _)| psi_a.pseudo_inverse_coeffs(input))
        .collect::<Result<_>>()?;
    discrete_aliasing_map(&u_a, &u_b, &psi_a, &psi_a, &psi_b, &psi_b, &probes)
}

/// Serializes a model to a container checkpoint record.
pub fn model_to_record(model: &TrainedModel) -> Record {
    match model {
        TrainedModel::Sno { k, model } => {
            let mut payload = Vec::new();
            let mut layers = Vec::new();
            for (w, b) in model.mlp().weights().iter().zip(model.mlp().biases()) {
                layers.push(serde_json::json!([w.nrows(), w.ncols()]));
                for r in 0..w.nrows() {
                    for c in 0..w.ncols() {
                        payload.push(w[(r, c)]);
                    }
                }
                payload.extend(b.iter());
            }
            Record::new(
                RECORD_MODEL_CHECKPOINT,
                serde_json::json!({
                    "model": "sno",
                    "k": k,
                    "layers": layers,
                    "activation": model.mlp().activation().name(),
                }),
                payload,
            )
        }
        TrainedModel::Cnn { layers } => {
            let mut payload = Vec::new();
            let mut meta_layers = Vec::new();
            for layer in layers {
                meta_layers.push(serde_json::json!({
                    "taps": layer.taps().len(),
                    "activation": layer.activation().name(),
                }));
                payload.extend_from_slice(layer.taps());
            }
            Record::new(
                RECORD_MODEL_CHECKPOINT,
                serde_json::json!({ "model": "cnn", "layers": meta_layers }),
                payload,
            )
        }
        TrainedModel::Fno { k, layers } => {
            let mut payload = Vec::new();
            let mut meta_layers = Vec::new();
            for layer in layers {
                meta_layers.push(serde_json::json!({
                    "activation": layer.activation().name(),
                }));
                payload.extend(interleave(layer.multiplier()));
                payload.push(layer.pointwise_weight());
                payload.extend(interleave(layer.bias().coeffs()));
            }
            Record::new(
                RECORD_MODEL_CHECKPOINT,
                serde_json::json!({ "model": "fno", "k": k, "layers": meta_layers }),
                payload,
            )
        }
    }
}

pub fn model_from_record(record: &Record) -> Result<TrainedModel> {
    if record.record_type != RECORD_MODEL_CHECKPOINT {
        return Err(Error::Format("record is not a model checkpoint".into()));
    }
    let kind = record.meta_str("model")?;
    let layers_meta = record
        .metadata
        .get("layers")
        .and_then(serde_json::Value::as_array)
        .ok_or_else(|| Error::Format("missing metadata field layers".into()))?
        .clone();
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, len: usize| -> Result<&[f64]> {
        let end = *cursor + len;
        if end > record.payload.len() {
            return Err(Error::Format("checkpoint payload truncated".into()));
        }
        let slice = &record.payload[*cursor..end];
        *cursor = end;
        Ok(slice)
    };
    match kind {
        "sno" => {
            let k = record.meta_usize("k")?;
            let act = ActivationKind::parse(record.meta_str("activation")?)
                .ok_or_else(|| Error::Format("unknown activation".into()))?;
            let mut weights = Vec::new();
            let mut biases = Vec::new();
            for shape in &layers_meta {
                let dims = shape
                    .as_array()
                    .filter(|a| a.len() == 2)
                    .ok_or_else(|| Error::Format("bad layer shape".into()))?;
                let rows = dims[0].as_u64().unwrap_or(0) as usize;
                let cols = dims[1].as_u64().unwrap_or(0) as usize;
                let w = take(&mut cursor, rows * cols)?;
                weights.push(DMatrix::from_row_slice(rows, cols, w));
                let b = take(&mut cursor, rows)?;
                biases.push(nalgebra::DVector::from_column_slice(b));
            }
            let mlp = MlpParams::new(weights, biases, act)?;
            Ok(TrainedModel::Sno {
                k,
                model: SnoModel::new(k, k, mlp)?,
            })
        }
        "cnn" => {
            let mut layers = Vec::new();
            for meta in &layers_meta {
                let taps_len = meta
                    .get("taps")
                    .and_then(serde_json::Value::as_u64)
                    .ok_or_else(|| Error::Format("missing taps length".into()))?
                    as usize;
                let act = meta
                    .get("activation")
                    .and_then(serde_json::Value::as_str)
                    .and_then(ActivationKind::parse)
                    .ok_or_else(|| Error::Format("unknown activation".into()))?;
                let taps = take(&mut cursor, taps_len)?.to_vec();
                layers.push(ConvLayer::new(taps, act)?);
            }
            Ok(TrainedModel::Cnn { layers })
        }
        "fno" => {
            let k = record.meta_usize("k")?;
            let dim = 2 * k + 1;
            let mut layers = Vec::new();
            for meta in &layers_meta {
                let act = meta
                    .get("activation")
                    .and_then(serde_json::Value::as_str)
                    .and_then(ActivationKind::parse)
                    .ok_or_else(|| Error::Format("unknown activation".into()))?;
                let r = deinterleave(take(&mut cursor, 2 * dim)?)?;
                let a = take(&mut cursor, 1)?[0];
                let bias_coeffs = deinterleave(take(&mut cursor, 2 * dim)?)?;
                let bias = PeriodicFunction::new(AmbientSpace::new(k), bias_coeffs)?;
                layers.push(FnoLayer::new(k, k, r, a, bias, act)?);
            }
            Ok(TrainedModel::Fno { k, layers })
        }
        other => Err(Error::Format(format!("unknown model kind {other}"))),
    }
}

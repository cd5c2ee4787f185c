//! Command-line entry point: dataset generation, training, evaluation
//! sweeps, aliasing reports, activation spectra, and layer-wise
//! equivalence checks. Exit codes: 0 success, 1 validation error or
//! failed check, 2 numerical failure.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use reno::container;
use reno::frames::{AmbientSpace, PeriodicFunction};
use reno::models::{activation_spectrum, square_operator, ActivationKind};
use reno::operators::{reno_check, standard_probes, ContinuousOperator, RenoLayer};
use reno::spaces::{fourier_basis, sampling_frame, BandlimitedSpace, SampleGrid};
use reno::svg::{line_chart, Series};
use reno::train::{
    dataset_from_record, dataset_to_record, eval_multires, gen_dataset, model_from_record,
    model_to_record, train_model, ModelKind, TrainConfig,
};
use reno::{Error, Result};

#[derive(Parser)]
#[command(name = "reno", version, about = "Frame-theoretic operator learning toolkit", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random input/target dataset of bandlimited functions.
    GenData {
        /// Bandwidth of the function space.
        #[arg(long = "K", default_value_t = 30)]
        k: usize,
        /// Number of input/target pairs.
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Spatial dimension (1 supported).
        #[arg(long, default_value_t = 1)]
        dim: usize,
        /// Output dataset file (RNO1 container).
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a dataset at its Nyquist resolution.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Architecture: sno, cnn, or fno.
        #[arg(long)]
        model: String,
        #[arg(long, default_value_t = 2000)]
        epochs: usize,
        #[arg(long = "learning-rate", default_value_t = 1e-3)]
        learning_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output checkpoint file.
        #[arg(long)]
        out: PathBuf,
        /// Optional CSV of the loss history.
        #[arg(long = "loss-out")]
        loss_out: Option<PathBuf>,
    },
    /// Multi-resolution aliasing sweep of a trained checkpoint.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Odd resolutions, either "start:end:step" or comma-separated.
        #[arg(long)]
        resolutions: String,
        /// Output CSV path; an SVG with the same stem is written too.
        #[arg(long)]
        out: PathBuf,
    },
    /// Discrete aliasing map between two resolutions of one checkpoint.
    AliasingMap {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Reference resolution (odd).
        #[arg(long = "resolution-a")]
        resolution_a: usize,
        /// Compared resolution (odd).
        #[arg(long = "resolution-b")]
        resolution_b: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Magnitude spectrum and tail energy of an activated random function.
    Spectrum {
        /// Activation: relu, gelu, tanh, identity.
        #[arg(long)]
        act: String,
        /// Bandwidth of the probe function.
        #[arg(long = "K", default_value_t = 20)]
        k: usize,
        /// Number of modes measured on each side.
        #[arg(long)]
        probe: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Layer-wise representation-equivalence check of a builtin stack.
    Check {
        /// Stack: square, square-narrow, or linear2.
        #[arg(long)]
        stack: String,
        /// Bandwidth of the first layer's domain.
        #[arg(long = "K", default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Pass tolerance for the aliasing norm.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success, everything else is a
            // validation error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(code) = validate_thread_cap() {
        std::process::exit(code);
    }
    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Divergence { .. } => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}

/// RENO_THREADS caps internal parallelism. Execution here is
/// single-threaded, so any positive value is honored trivially; the
/// variable is still validated so misconfiguration fails loudly.
fn validate_thread_cap() -> std::result::Result<(), i32> {
    match std::env::var("RENO_THREADS") {
        Err(_) => Ok(()),
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(()),
            _ => {
                eprintln!("error: RENO_THREADS must be a positive integer, got {v:?}");
                Err(1)
            }
        },
    }
}

fn run(command: Command) -> Result<i32> {
    match command {
        Command::GenData { k, n, seed, dim, out } => {
            let ds = gen_dataset(k, n, seed, dim)?;
            container::write_record_file(&out, &dataset_to_record(&ds))?;
            println!(
                "wrote dataset K={k} n={n} seed={seed} to {}",
                out.display()
            );
            Ok(0)
        }
        Command::Train {
            data,
            model,
            epochs,
            learning_rate,
            seed,
            out,
            loss_out,
        } => {
            let kind = ModelKind::parse(&model)
                .ok_or_else(|| Error::Config(format!("unknown model kind {model}")))?;
            let ds = dataset_from_record(&container::read_record_file(&data)?)?;
            let mut config = TrainConfig::defaults(kind, seed);
            config.epochs = epochs;
            config.learning_rate = learning_rate;
            let outcome = train_model(&ds, &config)?;
            container::write_record_file(&out, &model_to_record(&outcome.model))?;
            if let Some(path) = loss_out {
                let mut csv = String::from("epoch,loss\n");
                for (e, l) in outcome.loss_history.iter().enumerate() {
                    csv.push_str(&format!("{e},{l:.12e}\n"));
                }
                std::fs::write(&path, csv)?;
            }
            println!(
                "trained {model} for {epochs} epochs: initial loss {:.6e}, final loss {:.6e}",
                outcome.loss_history[0],
                outcome.final_loss()
            );
            Ok(0)
        }
        Command::Eval {
            model,
            data,
            resolutions,
            out,
        } => {
            let trained = model_from_record(&container::read_record_file(&model)?)?;
            let ds = dataset_from_record(&container::read_record_file(&data)?)?;
            let resolutions = parse_resolutions(&resolutions)?;
            let curve = eval_multires(&trained, &ds, &resolutions)?;
            std::fs::write(&out, curve.to_csv())?;
            let svg_path = out.with_extension("svg");
            let series = vec![Series {
                label: curve.model_kind.clone(),
                points: curve
                    .resolutions
                    .iter()
                    .zip(&curve.errors)
                    .map(|(&m, &e)| (m as f64, e))
                    .collect(),
            }];
            let chart = line_chart(
                &format!(
                    "aliasing error vs resolution (trained at {})",
                    curve.train_resolution
                ),
                "resolution",
                "mean relative aliasing error",
                &series,
                true,
            );
            std::fs::write(&svg_path, chart)?;
            println!("wrote {} and {}", out.display(), svg_path.display());
            Ok(0)
        }
        Command::AliasingMap {
            model,
            data,
            resolution_a,
            resolution_b,
            out,
        } => {
            let trained = model_from_record(&container::read_record_file(&model)?)?;
            let ds = dataset_from_record(&container::read_record_file(&data)?)?;
            for m in [resolution_a, resolution_b] {
                if m % 2 == 0 {
                    return Err(Error::EvenResolution(m));
                }
            }
            let report = reno::train::aliasing_between(&trained, &ds, resolution_a, resolution_b)?;
            std::fs::write(&out, report.to_csv())?;
            println!(
                "aliasing map {} -> {}: norm estimate {:.6e} over {} probes",
                resolution_a, resolution_b, report.norm_estimate, report.test_count
            );
            Ok(0)
        }
        Command::Spectrum {
            act,
            k,
            probe,
            seed,
            out,
        } => {
            let act = ActivationKind::parse(&act)
                .ok_or_else(|| Error::Config(format!("unknown activation {act}")))?;
            if probe < k {
                return Err(Error::Config(format!(
                    "probe bandwidth {probe} below input bandwidth {k}"
                )));
            }
            let f = random_real_function(k, seed);
            let spec = activation_spectrum(&f, act, probe)?;
            let mut csv = String::from("k,magnitude,tail_fraction_above_abs_k\n");
            let kp = spec.k_probe as i64;
            for kk in -kp..=kp {
                let tail = spec.tail_fraction[kk.unsigned_abs() as usize];
                csv.push_str(&format!(
                    "{kk},{:.12e},{:.12e}\n",
                    spec.magnitude(kk),
                    tail
                ));
            }
            std::fs::write(&out, csv)?;
            println!(
                "wrote spectrum of {}(f), f random in P_{k}, to {}",
                act.name(),
                out.display()
            );
            Ok(0)
        }
        Command::Check { stack, k, seed, tol } => {
            let (layers, frames) = builtin_stack(&stack, k, seed)?;
            let tests = standard_probes(layers[0].op.domain, seed ^ 0x5eed);
            let report = reno_check(&layers, &frames, &tests, tol)?;
            println!("layer  verdict  norm_estimate  span");
            for v in &report.layers {
                println!(
                    "{:<6} {:<8} {:<13.6e} {}",
                    v.layer,
                    if v.pass { "pass" } else { "FAIL" },
                    v.norm_estimate,
                    match &v.span_violation {
                        None => "ok".to_string(),
                        Some(s) => s.clone(),
                    }
                );
            }
            println!(
                "composed: {} (norm estimate {:.6e}, tol {:.1e})",
                if report.composed_pass { "pass" } else { "FAIL" },
                report.composed_norm,
                report.tol
            );
            Ok(if report.all_pass() { 0 } else { 1 })
        }
    }
}

/// "start:end:step" or a comma-separated list.
fn parse_resolutions(spec: &str) -> Result<Vec<usize>> {
    let bad = |s: &str| Error::Config(format!("bad resolution spec {s:?}"));
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(spec));
        }
        let start: usize = parts[0].parse().map_err(|_| bad(spec))?;
        let end: usize = parts[1].parse().map_err(|_| bad(spec))?;
        let step: usize = parts[2].parse().map_err(|_| bad(spec))?;
        if step == 0 || end < start {
            return Err(bad(spec));
        }
        Ok((start..=end).step_by(step).collect())
    } else {
        spec.split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad(spec)))
            .collect()
    }
}

fn random_real_function(k: usize, seed: u64) -> PeriodicFunction {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut unit = || (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
    let space = AmbientSpace::new(k);
    let mut coeffs = vec![Complex64::ZERO; space.dim()];
    coeffs[k] = Complex64::new(unit(), 0.0);
    for m in 1..=k {
        let z = Complex64::new(unit(), unit());
        coeffs[k + m] = z;
        coeffs[k - m] = z.conj();
    }
    PeriodicFunction::new(space, coeffs).expect("hermitian coefficients")
}

/// Builtin operator stacks for the check subcommand.
fn builtin_stack(
    name: &str,
    k: usize,
    seed: u64,
) -> Result<(Vec<RenoLayer>, Vec<reno::frames::Frame>)> {
    let ambient = AmbientSpace::new(2 * k);
    let p_k = BandlimitedSpace::new(k, ambient)?;
    let p_2k = BandlimitedSpace::new(2 * k, ambient)?;
    match name {
        // square operator with the full P_2K range: a ReO
        "square" => {
            let u = square_operator(k, ambient)?;
            let frames = vec![
                sampling_frame(p_k, SampleGrid::new(2 * k + 1)?)?,
                fourier_basis(p_2k),
            ];
            Ok((vec![RenoLayer::canonical(u)], frames))
        }
        // same operator checked against a range frame spanning only P_K:
        // the span condition fails and aliasing shows up
        "square-narrow" => {
            let u = square_operator(k, ambient)?;
            let frames = vec![fourier_basis(p_k), fourier_basis(p_k)];
            Ok((vec![RenoLayer::canonical(u)], frames))
        }
        // two random linear maps composed canonically: a ReNO
        "linear2" => {
            let space = BandlimitedSpace::tight(k);
            let dim = space.ambient().dim();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut unit = || (rng.next_u64() as f64 / u64::MAX as f64) * 2.0 - 1.0;
            let mut mk = |_: usize| {
                let m = nalgebra::DMatrix::from_fn(dim, dim, |_, _| {
                    Complex64::new(unit(), unit())
                });
                ContinuousOperator::linear(space, space, m)
            };
            let layers = vec![
                RenoLayer::canonical(mk(0)?),
                RenoLayer::canonical(mk(1)?),
            ];
            let frames = vec![
                fourier_basis(space),
                sampling_frame(space, SampleGrid::new(2 * k + 3)?)?,
                fourier_basis(space),
            ];
            Ok((layers, frames))
        }
        other => Err(Error::Config(format!("unknown stack {other}"))),
    }
}

//! Forward evaluation, loss, gradients, Adam and the restart protocol.

mod pure;

use std::f64::consts::TAU;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::architect::{estimate_resources, QcnnCircuit};
use crate::datapipe::{EncodedSample, Splits};
use crate::error::{QcnnError, Result};
use crate::noise::{BoundNoisy, DeviceNoiseProfile, NoisyProgram};
use crate::simcore::PureState;

pub use pure::{BoundPure, PureProgram};

/// Which simulator evaluates the circuit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Executor {
    Noiseless,
    Noisy { profile: DeviceNoiseProfile },
}

/// How noiseless gradients are computed. Both are exact; the adjoint sweep
/// costs about two forward passes, the literal shift rule two reruns per
/// parameter occurrence. Noisy gradients always use the shift rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    #[default]
    Adjoint,
    ParameterShift,
}

/// Parameter vector indexed by slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub values: Vec<f64>,
}

impl ParamStore {
    /// I.i.d. uniform angles in `[0, 2pi)`.
    pub fn random(len: usize, rng: &mut impl Rng) -> Self {
        ParamStore {
            values: (0..len).map(|_| rng.random_range(0.0..TAU)).collect(),
        }
    }
}

/// Compiled circuit plus the executor it runs on.
#[derive(Debug, Clone)]
pub struct Model {
    data_qubits: usize,
    total_qubits: usize,
    num_params: usize,
    program: Program,
}

#[derive(Debug, Clone)]
enum Program {
    Pure(PureProgram),
    Noisy(NoisyProgram),
}

/// A model bound to one parameter vector.
#[derive(Debug, Clone)]
pub enum Bound {
    Pure(BoundPure),
    Noisy(BoundNoisy),
}

impl Model {
    pub fn compile(circuit: &QcnnCircuit, executor: &Executor) -> Result<Self> {
        let program = match executor {
            Executor::Noiseless => Program::Pure(PureProgram::compile(circuit)?),
            Executor::Noisy { profile } => Program::Noisy(NoisyProgram::compile(circuit, profile)?),
        };
        Ok(Model {
            data_qubits: circuit.data_qubits(),
            total_qubits: circuit.total_qubits(),
            num_params: circuit.num_params(),
            program,
        })
    }

    pub fn num_params(&self) -> usize {
        self.num_params
    }

    pub fn is_noisy(&self) -> bool {
        matches!(self.program, Program::Noisy(_))
    }

    /// Tensors `|0>` ancillas onto an encoded sample.
    pub fn prepare(&self, state: &PureState) -> Result<PureState> {
        if state.num_qubits() != self.data_qubits {
            return Err(QcnnError::arg(format!(
                "sample has {} qubits, circuit expects {} data qubits",
                state.num_qubits(),
                self.data_qubits
            )));
        }
        Ok(match self.total_qubits - self.data_qubits {
            0 => state.clone(),
            anc => state.tensor(&PureState::zero(anc)),
        })
    }

    pub fn bind(&self, params: &[f64]) -> Result<Bound> {
        Ok(match &self.program {
            Program::Pure(p) => Bound::Pure(p.bind(params)?),
            Program::Noisy(p) => Bound::Noisy(p.bind(params)?),
        })
    }

    /// `<Z>` on the measured wire for a data-register state.
    pub fn expectation(&self, bound: &Bound, state: &PureState) -> Result<f64> {
        let input = self.prepare(state)?;
        match (&self.program, bound) {
            (Program::Pure(p), Bound::Pure(b)) => p.expectation(b, &input),
            (Program::Noisy(p), Bound::Noisy(b)) => p.expectation(b, &input),
            _ => Err(QcnnError::Invariant("parameters bound for a different executor".into())),
        }
    }

    /// `f_i` for every sample, in sample order.
    pub fn predict(&self, params: &[f64], samples: &[EncodedSample]) -> Result<Vec<f64>> {
        let bound = self.bind(params)?;
        samples.par_iter().map(|s| self.expectation(&bound, &s.state)).collect()
    }

    /// Fraction of samples with `sign(f) == label` (`f = 0` predicts +1).
    pub fn accuracy(&self, params: &[f64], samples: &[EncodedSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(QcnnError::arg("cannot score an empty sample set"));
        }
        let f = self.predict(params, samples)?;
        let hits = f.iter().zip(samples).filter(|(f, s)| predict_label(**f) == s.label).count();
        Ok(hits as f64 / samples.len() as f64)
    }

    /// `f` and `df/dtheta` for each sample, in sample order.
    pub fn expectations_and_gradients(
        &self,
        params: &[f64],
        samples: &[EncodedSample],
        method: GradientMethod,
    ) -> Result<Vec<(f64, Vec<f64>)>> {
        match &self.program {
            Program::Pure(p) => {
                let b = p.bind(params)?;
                samples
                    .par_iter()
                    .map(|s| {
                        let input = self.prepare(&s.state)?;
                        match method {
                            GradientMethod::Adjoint => p.expectation_and_gradient(&b, &input),
                            GradientMethod::ParameterShift => p.shift_gradient(&b, &input),
                        }
                    })
                    .collect()
            }
            Program::Noisy(p) => {
                let b = p.bind(params)?;
                let shifts = p.shift_observables(params, &b)?;
                samples
                    .par_iter()
                    .map(|s| p.expectation_and_gradient(&b, &shifts, &self.prepare(&s.state)?))
                    .collect()
            }
        }
    }

    /// MSE over `batch` and its gradient `(2/M) sum (f_i - y_i) df_i`.
    /// Per-sample results are reduced sequentially in sample order, so the
    /// sum does not depend on the thread count.
    pub fn loss_and_gradient(&self, params: &[f64], batch: &[EncodedSample], method: GradientMethod) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(QcnnError::arg("empty batch"));
        }
        let per_sample = self.expectations_and_gradients(params, batch, method)?;
        let m = batch.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.num_params];
        for ((f, df), s) in per_sample.iter().zip(batch) {
            let r = f - s.label;
            loss += r * r;
            for (g, d) in grad.iter_mut().zip(df) {
                *g += 2.0 * r * d / m;
            }
        }
        Ok((loss / m, grad))
    }
}

pub fn predict_label(f: f64) -> f64 {
    if f >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `<Z>` on the measured wire for one encoded sample.
pub fn forward(circuit: &QcnnCircuit, params: &[f64], sample: &EncodedSample, executor: &Executor) -> Result<f64> {
    let model = Model::compile(circuit, executor)?;
    model.expectation(&model.bind(params)?, &sample.state)
}

/// `(1/M) sum |y_i - f_i|^2`
pub fn mse_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != labels.len() {
        return Err(QcnnError::arg(format!(
            "need equal nonempty predictions and labels, got {} and {}",
            predictions.len(),
            labels.len()
        )));
    }
    Ok(predictions.iter().zip(labels).map(|(f, y)| (y - f).powi(2)).sum::<f64>() / predictions.len() as f64)
}

/// Loss gradient over `batch` by the two-term shift rule.
pub fn grad_parameter_shift(circuit: &QcnnCircuit, params: &[f64], batch: &[EncodedSample], executor: &Executor) -> Result<Vec<f64>> {
    let model = Model::compile(circuit, executor)?;
    Ok(model.loss_and_gradient(params, batch, GradientMethod::ParameterShift)?.1)
}

pub fn evaluate_accuracy(circuit: &QcnnCircuit, params: &[f64], samples: &[EncodedSample], executor: &Executor) -> Result<f64> {
    Model::compile(circuit, executor)?.accuracy(params, samples)
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], gradient: &[f64], lr: f64) -> Result<()> {
    if params.len() != gradient.len() || params.len() != state.m.len() {
        return Err(QcnnError::arg(format!(
            "Adam sizes differ: {} params, {} gradient, {} moments",
            params.len(),
            gradient.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let c1 = 1.0 - state.beta1.powf(state.t as f64);
    let c2 = 1.0 - state.beta2.powf(state.t as f64);
    for i in 0..params.len() {
        let g = gradient[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitDistribution {
    /// Uniform on `[0, 2pi)`.
    #[default]
    UniformTwoPi,
}

/// Missing fields deserialize to the defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub restarts: usize,
    pub seed: u64,
    pub init: InitDistribution,
    pub gradient: GradientMethod,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 25,
            epochs: 10,
            restarts: 10,
            seed: 0,
            init: InitDistribution::UniformTwoPi,
            gradient: GradientMethod::Adjoint,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train_size: usize) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(QcnnError::validation(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.restarts == 0 {
            return Err(QcnnError::validation("batch size, epochs and restarts must be positive"));
        }
        if self.batch_size > train_size {
            return Err(QcnnError::validation(format!(
                "batch size {} exceeds the {train_size} training samples",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean squared error over the epoch's batches, measured before each
    /// batch update.
    pub train_loss: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub restart: usize,
    pub epochs: Vec<EpochMetrics>,
    pub test_accuracy: f64,
    pub wall_time_s: f64,
    pub params: ParamStore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub restarts: Vec<Metrics>,
    pub mean_test_accuracy: f64,
    /// Population standard deviation across restarts.
    pub std_test_accuracy: f64,
    pub wall_time_s: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Generator for restart `restart`: the run seed picks the key and the
/// restart index picks an independent stream.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

/// Runs one restart: random init, `epochs` shuffled mini-batch passes, then
/// scoring the final parameters on the test split.
pub fn train_restart(model: &Model, splits: &Splits, config: &TrainConfig, restart: usize) -> Result<Metrics> {
    let start = Instant::now();
    let mut rng = restart_rng(config.seed, restart);
    let mut params = ParamStore::random(model.num_params(), &mut rng);
    let mut adam = AdamState::new(model.num_params());
    let mut order: Vec<usize> = (0..splits.train.len()).collect();
    let mut epochs = Vec::with_capacity(config.epochs);
    let mut batch = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| splits.train[i].clone()));
            let (loss, grad) = model.loss_and_gradient(&params.values, &batch, config.gradient)?;
            loss_sum += loss * chunk.len() as f64;
            adam_step(&mut adam, &mut params.values, &grad, config.learning_rate)?;
        }
        let validation_accuracy = if splits.validation.is_empty() {
            None
        } else {
            Some(model.accuracy(&params.values, &splits.validation)?)
        };
        epochs.push(EpochMetrics {
            epoch: epoch + 1,
            train_loss: loss_sum / splits.train.len() as f64,
            validation_accuracy,
        });
    }
    let test_accuracy = model.accuracy(&params.values, &splits.test)?;
    Ok(Metrics {
        restart,
        epochs,
        test_accuracy,
        wall_time_s: start.elapsed().as_secs_f64(),
        params,
    })
}

/// Full protocol: checks the parameter count against the closed-form
/// estimate, then runs `config.restarts` independent restarts.
pub fn train(circuit: &QcnnCircuit, splits: &Splits, config: &TrainConfig, executor: &Executor) -> Result<TrainReport> {
    train_with(circuit, splits, config, executor, |_| {})
}

/// [`train`] with a callback after each finished restart.
pub fn train_with(
    circuit: &QcnnCircuit,
    splits: &Splits,
    config: &TrainConfig,
    executor: &Executor,
    mut on_restart: impl FnMut(&Metrics),
) -> Result<TrainReport> {
    if splits.train.is_empty() || splits.test.is_empty() {
        return Err(QcnnError::arg("training and test splits must be nonempty"));
    }
    config.validate(splits.train.len())?;
    let expected = estimate_resources(circuit.config())?.params(circuit.config().sharing);
    if expected != circuit.num_params() {
        return Err(QcnnError::Invariant(format!(
            "circuit has {} parameters, resource estimate says {expected}",
            circuit.num_params()
        )));
    }
    let start = Instant::now();
    let model = Model::compile(circuit, executor)?;
    let mut restarts = Vec::with_capacity(config.restarts);
    for r in 0..config.restarts {
        let metrics = train_restart(&model, splits, config, r)?;
        on_restart(&metrics);
        restarts.push(metrics);
    }
    let acc: Vec<f64> = restarts.iter().map(|m| m.test_accuracy).collect();
    let (mean_test_accuracy, std_test_accuracy) = mean_std(&acc);
    Ok(TrainReport {
        restarts,
        mean_test_accuracy,
        std_test_accuracy,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::AnsatzSet;
    use crate::architect::{plan_architecture, ArchitectureConfig, PaddingMethod};
    use crate::datapipe::{amplitude_encode, FittedPreprocess, PadMode};
    use proptest::prelude::*;
    use rand::Rng;

    fn circuit(k: usize, method: PaddingMethod, set: AnsatzSet, sharing: bool) -> QcnnCircuit {
        plan_architecture(&ArchitectureConfig::uniform(k, method, 1, set, sharing).unwrap()).unwrap()
    }

    fn random_sample(q: usize, rng: &mut impl Rng) -> EncodedSample {
        let x: Vec<f64> = (0..1usize << q).map(|_| rng.random_range(-1.0..1.0)).collect();
        EncodedSample {
            state: amplitude_encode(&x, PadMode::None, q).unwrap(),
            label: if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            raw_index: 0,
        }
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, -1.0], &[1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(mse_loss(&[0.5, 0.5], &[1.0, -1.0]).unwrap(), 1.25);
        assert!(mse_loss(&[], &[]).is_err());
        assert!(mse_loss(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_parameters_on_zero_state_give_plus_one() {
        for method in PaddingMethod::ALL {
            let c = circuit(5, method, AnsatzSet::One, false);
            let q = c.data_qubits();
            let sample = EncodedSample {
                state: PureState::zero(q),
                label: 1.0,
                raw_index: 0,
            };
            let f = forward(&c, &vec![0.0; c.num_params()], &sample, &Executor::Noiseless).unwrap();
            assert!((f - 1.0).abs() < 1e-12, "{method}: {f}");
        }
    }

    #[test]
    fn wrong_sample_size_is_an_argument_error() {
        let c = circuit(3, PaddingMethod::SkipPooling, AnsatzSet::One, true);
        let sample = EncodedSample {
            state: PureState::zero(4),
            label: 1.0,
            raw_index: 0,
        };
        assert!(matches!(
            forward(&c, &vec![0.0; c.num_params()], &sample, &Executor::Noiseless),
            Err(QcnnError::Argument(_))
        ));
    }

    #[test]
    fn adjoint_and_shift_gradients_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for set in [AnsatzSet::One, AnsatzSet::Two] {
            for sharing in [false, true] {
                let c = circuit(5, PaddingMethod::LayerWiseAncilla, set, sharing);
                let model = Model::compile(&c, &Executor::Noiseless).unwrap();
                let params = ParamStore::random(c.num_params(), &mut rng).values;
                let batch: Vec<_> = (0..3).map(|_| random_sample(5, &mut rng)).collect();
                let (la, ga) = model.loss_and_gradient(&params, &batch, GradientMethod::Adjoint).unwrap();
                let (ls, gs) = model.loss_and_gradient(&params, &batch, GradientMethod::ParameterShift).unwrap();
                assert!((la - ls).abs() < 1e-14);
                for (a, s) in ga.iter().zip(&gs) {
                    assert!((a - s).abs() < 1e-12, "{a} vs {s}");
                }
            }
        }
    }

    #[test]
    fn loss_gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let c = circuit(3, PaddingMethod::SingleAncilla, AnsatzSet::One, true);
        let model = Model::compile(&c, &Executor::Noiseless).unwrap();
        let params = ParamStore::random(c.num_params(), &mut rng).values;
        let batch: Vec<_> = (0..4).map(|_| random_sample(3, &mut rng)).collect();
        let g = grad_parameter_shift(&c, &params, &batch, &Executor::Noiseless).unwrap();
        let h = 1e-5;
        for s in 0..params.len() {
            let mut p = params.clone();
            p[s] += h;
            let up = model.loss_and_gradient(&p, &batch, GradientMethod::Adjoint).unwrap().0;
            p[s] -= 2.0 * h;
            let down = model.loss_and_gradient(&p, &batch, GradientMethod::Adjoint).unwrap().0;
            assert!((g[s] - (up - down) / (2.0 * h)).abs() < 1e-8);
        }
    }

    #[test]
    fn noisy_model_with_zero_noise_matches_noiseless() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = circuit(3, PaddingMethod::SingleAncilla, AnsatzSet::Two, false);
        let pure = Model::compile(&c, &Executor::Noiseless).unwrap();
        let noisy = Model::compile(
            &c,
            &Executor::Noisy {
                profile: DeviceNoiseProfile::noiseless(),
            },
        )
        .unwrap();
        let params = ParamStore::random(c.num_params(), &mut rng).values;
        let batch: Vec<_> = (0..3).map(|_| random_sample(3, &mut rng)).collect();
        let (lp, gp) = pure.loss_and_gradient(&params, &batch, GradientMethod::Adjoint).unwrap();
        let (ln, gn) = noisy.loss_and_gradient(&params, &batch, GradientMethod::ParameterShift).unwrap();
        assert!((lp - ln).abs() < 1e-10);
        for (a, b) in gp.iter().zip(&gn) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn adam_zero_gradient_leaves_params() {
        let mut s = AdamState::new(3);
        let mut p = vec![0.1, 0.2, 0.3];
        for _ in 0..5 {
            adam_step(&mut s, &mut p, &[0.0; 3], 0.01).unwrap();
        }
        assert_eq!(p, vec![0.1, 0.2, 0.3]);
    }

    #[test]
    fn adam_constant_gradient_steps_by_lr() {
        let mut s = AdamState::new(2);
        let mut p = vec![0.0, 0.0];
        let mut prev = p.clone();
        for _ in 0..200 {
            adam_step(&mut s, &mut p, &[0.3, -2.0], 0.01).unwrap();
            assert!(((prev[0] - p[0]) - 0.01).abs() < 1e-6);
            assert!(((p[1] - prev[1]) - 0.01).abs() < 1e-6);
            prev = p.clone();
        }
        assert!(adam_step(&mut s, &mut p, &[1.0], 0.01).is_err());
    }

    #[test]
    fn adam_is_deterministic() {
        let run = || {
            let mut s = AdamState::new(4);
            let mut p = vec![1.0, -1.0, 0.5, 2.0];
            for t in 0..50 {
                let g: Vec<f64> = p.iter().map(|x| (x * t as f64).sin()).collect();
                adam_step(&mut s, &mut p, &g, 0.05).unwrap();
            }
            p
        };
        let (a, b) = (run(), run());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    fn toy_splits() -> Splits {
        // classes separated by the sign of the first coordinate
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut make = |n: usize| -> Vec<EncodedSample> {
            (0..n)
                .map(|i| {
                    let label = if i % 2 == 0 { 1.0 } else { -1.0 };
                    let angle: f64 = rng.random_range(0.15..1.4) * label;
                    EncodedSample {
                        state: amplitude_encode(&[angle.cos(), angle.sin()], PadMode::Zero, 2).unwrap(),
                        label,
                        raw_index: i,
                    }
                })
                .collect()
        };
        Splits {
            train: make(100),
            validation: make(20),
            test: make(40),
            preprocess: FittedPreprocess::None,
        }
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let s = toy_splits();
        let cfg = TrainConfig {
            epochs: 5,
            restarts: 2,
            seed: 1,
            batch_size: 10,
            learning_rate: 0.1,
            ..TrainConfig::default()
        };
        for set in [AnsatzSet::One, AnsatzSet::Two] {
            let c = circuit(2, PaddingMethod::SkipPooling, set, false);
            let report = train(&c, &s, &cfg, &Executor::Noiseless).unwrap();
            assert_eq!(report.mean_test_accuracy, 1.0, "{set:?}: {report:?}");
            let again = train(&c, &s, &cfg, &Executor::Noiseless).unwrap();
            assert_eq!(report.restarts[1].params, again.restarts[1].params);
            assert!(report.restarts[0].epochs.iter().all(|e| e.train_loss >= 0.0));
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let s = toy_splits();
        let c = circuit(2, PaddingMethod::SkipPooling, AnsatzSet::One, false);
        let mut cfg = TrainConfig {
            batch_size: 1000,
            ..TrainConfig::default()
        };
        assert!(train(&c, &s, &cfg, &Executor::Noiseless).is_err());
        cfg.batch_size = 10;
        cfg.learning_rate = 0.0;
        assert!(train(&c, &s, &cfg, &Executor::Noiseless).is_err());
    }

    #[test]
    fn accuracy_complements_under_label_flip() {
        let s = toy_splits();
        let c = circuit(2, PaddingMethod::SkipPooling, AnsatzSet::One, false);
        let model = Model::compile(&c, &Executor::Noiseless).unwrap();
        let params = ParamStore::random(c.num_params(), &mut ChaCha8Rng::seed_from_u64(2)).values;
        let a = model.accuracy(&params, &s.test).unwrap();
        let flipped: Vec<_> = s
            .test
            .iter()
            .cloned()
            .map(|mut e| {
                e.label = -e.label;
                e
            })
            .collect();
        // exact ties f = 0 would break the symmetry; random angles avoid them
        assert!((model.accuracy(&params, &flipped).unwrap() - (1.0 - a)).abs() < 1e-15);
        let brute = s
            .test
            .iter()
            .filter(|e| predict_label(forward(&c, &params, e, &Executor::Noiseless).unwrap()) == e.label)
            .count() as f64
            / s.test.len() as f64;
        assert_eq!(a, brute);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn expectations_are_bounded(seed in any::<u64>(), k in 2usize..7, m in 0usize..5) {
            let method = PaddingMethod::ALL[m];
            let c = circuit(k, method, AnsatzSet::One, false);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = ParamStore::random(c.num_params(), &mut rng).values;
            let batch: Vec<_> = (0..3).map(|_| random_sample(c.data_qubits(), &mut rng)).collect();
            let model = Model::compile(&c, &Executor::Noiseless).unwrap();
            let (loss, _) = model.loss_and_gradient(&params, &batch, GradientMethod::Adjoint).unwrap();
            prop_assert!(loss >= 0.0);
            for f in model.predict(&params, &batch).unwrap() {
                prop_assert!(f.abs() <= 1.0 + 1e-12);
            }
        }
    }
}

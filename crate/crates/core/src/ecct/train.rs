use std::rc::Rc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{preprocess, EcctError, EcctModel};
use crate::channel::{sigma_from_snr, sign_to_bin, transmit, ChannelModel};
use crate::nn::{Adam, Graph, Mat};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    /// Per-sample training SNRs (dB), drawn uniformly.
    pub snr_db: Vec<f64>,
    pub channel: ChannelModel,
    pub seed: u64,
}

impl TrainConfig {
    /// Quick profile used by tests and the default CLI run.
    pub fn ci(channel: ChannelModel) -> Self {
        Self {
            steps: 3000,
            batch: 64,
            lr: 1e-3,
            snr_db: (2..=7).map(f64::from).collect(),
            channel,
            seed: 0,
        }
    }

    /// Batch 128 and learning rate 1e-4.
    pub fn full(channel: ChannelModel) -> Self {
        Self {
            steps: 20_000,
            batch: 128,
            lr: 1e-4,
            ..Self::ci(channel)
        }
    }
}

/// One training batch: reliability vectors and BCE targets.
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Mat,
}

/// Fresh random messages sent over the channel; the target of position `i`
/// is `sign_to_bin(z_tilde_i)`.
pub fn sample_batch(model: &EcctModel, cfg: &TrainConfig, rng: &mut impl Rng) -> Batch {
    let code = model.code();
    let n = code.n();
    let mut inputs = Vec::with_capacity(cfg.batch);
    let mut targets = Mat::zeros(cfg.batch, n);
    for b in 0..cfg.batch {
        let m: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
        let x = code.encode(&m).expect("message length matches the code");
        let snr = *cfg.snr_db.choose(rng).expect("at least one training SNR");
        let frame = transmit(&x, &cfg.channel, sigma_from_snr(snr), rng);
        for (t, bit) in targets.row_mut(b).iter_mut().zip(sign_to_bin(&frame.z_tilde())) {
            *t = f64::from(bit);
        }
        inputs.push(preprocess(&frame.y, code));
    }
    Batch { inputs, targets }
}

/// Mean BCE of the model on `batch` and the parameter gradients.
pub fn loss_and_grads(model: &EcctModel, batch: &Batch) -> Result<(f64, Vec<Mat>), EcctError> {
    let mut g = Graph::new();
    let logits = model.forward(&mut g, &batch.inputs);
    let loss = g.bce_with_logits(logits, Rc::new(batch.targets.clone()));
    g.check_finite()?;
    g.backward(loss);
    Ok((g.value(loss).data[0], g.param_grads(&model.params)))
}

/// Trains in place with Adam and returns the per-step losses. `on_step`
/// sees `(step, loss)` after each update.
///
/// If a loss turns non-finite the parameters are left as they were after
/// the last good step and that state is returned inside the error.
pub fn train(model: &mut EcctModel, cfg: &TrainConfig, mut on_step: impl FnMut(usize, f64)) -> Result<Vec<f64>, EcctError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(&model.params, cfg.lr);
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let batch = sample_batch(model, cfg, &mut rng);
        let result = loss_and_grads(model, &batch);
        let (loss, grads) = match result {
            Ok((l, g)) if l.is_finite() && g.iter().all(Mat::all_finite) => (l, g),
            Ok((l, _)) => return Err(diverged(model, step, l)),
            Err(_) => return Err(diverged(model, step, f64::NAN)),
        };
        opt.step(&mut model.params, &grads);
        losses.push(loss);
        on_step(step, loss);
    }
    Ok(losses)
}

fn diverged(model: &EcctModel, step: usize, loss: f64) -> EcctError {
    EcctError::Diverged {
        step,
        loss,
        last_good: Box::new(model.to_checkpoint()),
    }
}

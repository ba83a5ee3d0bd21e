use log::debug;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Checkpoint, ComposerGan, GanLayout};
use crate::error::{Error, Result};
use crate::nn::{bce_logits_loss, sigmoid, AdamConfig, AdamState, Gradients};
use crate::pianoroll::Dataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub lr: f64,
    pub seed: u64,
    pub checkpoint_every: usize,
    #[serde(default = "one")]
    pub d_steps_per_g_step: usize,
    #[serde(default)]
    pub layout: GanLayout,
}

fn one() -> usize {
    1
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 2000,
            batch_size: 32,
            latent_dim: 32,
            lr: 1e-3,
            seed: 0,
            checkpoint_every: 200,
            d_steps_per_g_step: 1,
            layout: GanLayout::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("iterations", self.iterations),
            ("batch_size", self.batch_size),
            ("latent_dim", self.latent_dim),
            ("checkpoint_every", self.checkpoint_every),
            ("d_steps_per_g_step", self.d_steps_per_g_step),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be >= 1")));
        }
        if self.checkpoint_every > self.iterations {
            return Err(Error::Config("checkpoint_every exceeds iterations; no checkpoint would be written".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config("lr must be positive".into()));
        }
        Ok(())
    }

    /// Iterations at which checkpoints are emitted.
    pub fn checkpoint_iterations(&self) -> Vec<usize> {
        (1..=self.iterations / self.checkpoint_every)
            .map(|k| k * self.checkpoint_every)
            .collect()
    }
}

struct Trainer<'a> {
    gan: ComposerGan,
    d_opt: AdamState,
    g_opt: AdamState,
    data: Vec<Vec<f64>>,
    config: &'a TrainConfig,
    rng: ChaCha8Rng,
}

impl Trainer<'_> {
    fn fake_batch(&mut self) -> Vec<Vec<f64>> {
        (0..self.config.batch_size)
            .map(|_| self.gan.sample_latent(&mut self.rng))
            .collect()
    }

    /// One discriminator update; returns the mean real + fake loss.
    fn d_step(&mut self) -> Result<f64> {
        let b = self.config.batch_size;
        let d = &self.gan.discriminator;
        let mut grads = Gradients::zeros_like(d);
        let mut loss = 0.0;
        let real_idx = index::sample(&mut self.rng, self.data.len(), b).into_vec();
        for i in real_idx {
            let (y, cache) = d.forward(&self.data[i])?;
            let (l, dl) = bce_logits_loss(y[0], 1.0);
            loss += l;
            grads.add_assign(&d.backward(&cache, &[dl])?.0);
        }
        for z in self.fake_batch() {
            let fake: Vec<f64> = self.gan.g_logits(&z)?.into_iter().map(sigmoid).collect();
            let d = &self.gan.discriminator;
            let (y, cache) = d.forward(&fake)?;
            let (l, dl) = bce_logits_loss(y[0], 0.0);
            loss += l;
            grads.add_assign(&d.backward(&cache, &[dl])?.0);
        }
        grads.scale(1.0 / b as f64);
        let loss = loss / b as f64;
        if !loss.is_finite() {
            return Err(Error::Divergence);
        }
        let mut params = self.gan.discriminator.param_slices_mut();
        self.d_opt.step(&mut params, &grads.slices())?;
        Ok(loss)
    }

    /// One non-saturating generator update through the frozen discriminator.
    fn g_step(&mut self) -> Result<f64> {
        let b = self.config.batch_size;
        let cpt = self.gan.shape.cells_per_track();
        let mut trunk_grads = Gradients::zeros_like(&self.gan.trunk);
        let mut head_grads: Vec<Gradients> = self.gan.heads.iter().map(Gradients::zeros_like).collect();
        let mut loss = 0.0;
        for z in self.fake_batch() {
            let gan = &self.gan;
            let (feature, trunk_cache) = gan.trunk.forward(&z)?;
            let mut head_caches = Vec::with_capacity(gan.heads.len());
            let mut probs = Vec::with_capacity(gan.shape.cells());
            for head in &gan.heads {
                let (logits, cache) = head.forward(&feature)?;
                probs.extend(logits.into_iter().map(sigmoid));
                head_caches.push(cache);
            }
            let (y, d_cache) = gan.discriminator.forward(&probs)?;
            let (l, dl) = bce_logits_loss(y[0], 1.0);
            loss += l;
            let (_, dprobs) = gan.discriminator.backward(&d_cache, &[dl])?;

            let mut dfeature = vec![0.0; feature.len()];
            for (t, (head, cache)) in gan.heads.iter().zip(&head_caches).enumerate() {
                let dlogits: Vec<f64> = (t * cpt..(t + 1) * cpt)
                    .map(|k| dprobs[k] * probs[k] * (1.0 - probs[k]))
                    .collect();
                let (g, dx) = head.backward(cache, &dlogits)?;
                head_grads[t].add_assign(&g);
                dfeature.iter_mut().zip(dx).for_each(|(a, b)| *a += b);
            }
            trunk_grads.add_assign(&gan.trunk.backward(&trunk_cache, &dfeature)?.0);
        }
        let scale = 1.0 / b as f64;
        trunk_grads.scale(scale);
        head_grads.iter_mut().for_each(|g| g.scale(scale));
        let loss = loss * scale;
        if !loss.is_finite() {
            return Err(Error::Divergence);
        }
        let mut grads = trunk_grads.slices();
        for g in &head_grads {
            grads.extend(g.slices());
        }
        let mut params = self.gan.generator_param_slices_mut();
        self.g_opt.step(&mut params, &grads)?;
        Ok(loss)
    }
}

/// Alternating D/G training with binary cross-entropy on logits.
///
/// Every `checkpoint_every` iterations a [`Checkpoint`] is captured, handed
/// to `sink` and kept in the returned list. The run depends only on the
/// dataset and `config` (including its seed).
pub fn train(
    train_set: &Dataset,
    config: &TrainConfig,
    sink: &mut dyn FnMut(&Checkpoint) -> Result<()>,
) -> Result<Vec<Checkpoint>> {
    config.validate()?;
    if train_set.len() < config.batch_size {
        return Err(Error::InsufficientRecords {
            needed: config.batch_size,
            available: train_set.len(),
        });
    }
    let arch = config.layout.describe(*train_set.shape(), config.latent_dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let gan = ComposerGan::init(&arch, &mut rng)?;
    let adam = AdamConfig::with_lr(config.lr);
    let d_opt = AdamState::for_params(adam, &gan.discriminator.param_slices());
    let g_opt = AdamState::for_params(adam, &gan.generator_param_slices());
    let mut trainer = Trainer {
        gan,
        d_opt,
        g_opt,
        data: train_set.rolls().iter().map(|r| r.to_flat()).collect(),
        config,
        rng,
    };

    let mut checkpoints = Vec::new();
    for iteration in 1..=config.iterations {
        let step = (|| -> Result<(f64, f64)> {
            let mut d_loss = 0.0;
            for _ in 0..config.d_steps_per_g_step {
                d_loss = trainer.d_step()?;
            }
            Ok((d_loss, trainer.g_step()?))
        })();
        let (d_loss, g_loss) = match step {
            Ok(losses) => losses,
            Err(Error::Divergence) => {
                return Err(Error::TrainingDiverged {
                    iteration,
                    last_good: checkpoints.last().cloned().map(Box::new),
                })
            }
            Err(e) => return Err(e),
        };
        if iteration % config.checkpoint_every == 0 {
            debug!("iteration {iteration}: d_loss {d_loss:.4} g_loss {g_loss:.4}");
            let ckpt = Checkpoint::capture(&trainer.gan, iteration as u64);
            sink(&ckpt)?;
            checkpoints.push(ckpt);
        }
    }
    Ok(checkpoints)
}

//! Composer-style multi-track GAN: one shared trunk maps the latent vector
//! to a feature vector, one head per track turns it into that track's cell
//! logits, and a single discriminator scores whole flattened rolls.

mod checkpoint;
mod oracle;
mod train;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, Mlp};
use crate::pianoroll::{Pianoroll, PianorollShape};

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, Tensor,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use oracle::{OracleDiscriminator, OracleGenerator};
pub use train::{train, TrainConfig};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentArch {
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl ComponentArch {
    fn of(mlp: &Mlp) -> Self {
        ComponentArch {
            dims: mlp.dims(),
            activations: mlp.activations(),
        }
    }
}

/// Everything needed to rebuild an untrained network of the same layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub latent_dim: usize,
    pub shape: PianorollShape,
    pub trunk: ComponentArch,
    /// Layout shared by every per-track head.
    pub head: ComponentArch,
    pub discriminator: ComponentArch,
}

/// Hidden-layer widths. Defaults: trunk `latent → 128`, heads `128 → cells
/// per track`, discriminator `cells → 128 → 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GanLayout {
    pub trunk_hidden: Vec<usize>,
    pub disc_hidden: Vec<usize>,
}

impl Default for GanLayout {
    fn default() -> Self {
        GanLayout {
            trunk_hidden: vec![128],
            disc_hidden: vec![128],
        }
    }
}

impl GanLayout {
    pub fn describe(&self, shape: PianorollShape, latent_dim: usize) -> Result<ArchDescriptor> {
        shape.validate()?;
        if latent_dim == 0 || self.trunk_hidden.is_empty() || self.trunk_hidden.contains(&0) || self.disc_hidden.contains(&0) {
            return Err(Error::Config("latent and hidden widths must be >= 1 and the trunk needs a layer".into()));
        }
        let mut trunk_dims = vec![latent_dim];
        trunk_dims.extend(&self.trunk_hidden);
        let feature = *trunk_dims.last().unwrap();
        let mut disc_dims = vec![shape.cells()];
        disc_dims.extend(&self.disc_hidden);
        disc_dims.push(1);

        let mut disc_acts = vec![Activation::Relu; disc_dims.len() - 2];
        disc_acts.push(Activation::Linear);
        Ok(ArchDescriptor {
            latent_dim,
            shape,
            trunk: ComponentArch {
                activations: vec![Activation::Relu; trunk_dims.len() - 1],
                dims: trunk_dims,
            },
            head: ComponentArch {
                dims: vec![feature, shape.cells_per_track()],
                activations: vec![Activation::Linear],
            },
            discriminator: ComponentArch {
                dims: disc_dims,
                activations: disc_acts,
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComposerGan {
    pub(crate) shape: PianorollShape,
    pub(crate) latent_dim: usize,
    pub(crate) trunk: Mlp,
    pub(crate) heads: Vec<Mlp>,
    pub(crate) discriminator: Mlp,
}

impl ComposerGan {
    /// Glorot-initialised model. Components are initialised in the order
    /// trunk, heads (by track), discriminator.
    pub fn init<R: Rng + ?Sized>(arch: &ArchDescriptor, rng: &mut R) -> Result<Self> {
        let trunk = Mlp::glorot(&arch.trunk.dims, &arch.trunk.activations, rng)?;
        let heads = (0..arch.shape.tracks)
            .map(|_| Mlp::glorot(&arch.head.dims, &arch.head.activations, rng))
            .collect::<Result<Vec<_>>>()?;
        let discriminator = Mlp::glorot(&arch.discriminator.dims, &arch.discriminator.activations, rng)?;
        Self::from_parts(arch.shape, trunk, heads, discriminator)
    }

    pub fn from_parts(shape: PianorollShape, trunk: Mlp, heads: Vec<Mlp>, discriminator: Mlp) -> Result<Self> {
        let mismatch = |what: &str| Err(Error::ArchitectureMismatch(what.to_string()));
        if heads.len() != shape.tracks {
            return mismatch("head count differs from track count");
        }
        if heads.iter().any(|h| h.in_dim() != trunk.out_dim() || h.out_dim() != shape.cells_per_track()) {
            return mismatch("head dimensions do not match trunk output and track size");
        }
        if discriminator.in_dim() != shape.cells() || discriminator.out_dim() != 1 {
            return mismatch("discriminator must map all cells to one logit");
        }
        Ok(ComposerGan {
            shape,
            latent_dim: trunk.in_dim(),
            trunk,
            heads,
            discriminator,
        })
    }

    pub fn arch(&self) -> ArchDescriptor {
        ArchDescriptor {
            latent_dim: self.latent_dim,
            shape: self.shape,
            trunk: ComponentArch::of(&self.trunk),
            head: ComponentArch::of(&self.heads[0]),
            discriminator: ComponentArch::of(&self.discriminator),
        }
    }

    pub fn shape(&self) -> &PianorollShape {
        &self.shape
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn trunk(&self) -> &Mlp {
        &self.trunk
    }

    pub fn heads(&self) -> &[Mlp] {
        &self.heads
    }

    pub fn discriminator(&self) -> &Mlp {
        &self.discriminator
    }

    pub fn heads_mut(&mut self) -> &mut [Mlp] {
        &mut self.heads
    }

    pub fn discriminator_mut(&mut self) -> &mut Mlp {
        &mut self.discriminator
    }

    pub fn sample_latent<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.latent_dim).map(|_| rng.sample(StandardNormal)).collect()
    }

    /// Per-cell generator logits, tracks concatenated in flat cell order.
    pub fn g_logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        let feature = self.trunk.predict(z)?;
        let mut out = Vec::with_capacity(self.shape.cells());
        for head in &self.heads {
            out.extend(head.predict(&feature)?);
        }
        Ok(out)
    }

    /// Generated roll: cell on iff its logit is strictly positive.
    pub fn g_sample(&self, z: &[f64]) -> Result<Pianoroll> {
        let logits = self.g_logits(z)?;
        let mut roll = Pianoroll::zeros(self.shape);
        for (k, &l) in logits.iter().enumerate() {
            if l > 0.0 {
                roll.set_flat(k, true);
            }
        }
        Ok(roll)
    }

    /// Raw discriminator logit; larger means "more like training data".
    pub fn d_score(&self, roll: &Pianoroll) -> Result<f64> {
        if *roll.shape() != self.shape {
            return Err(Error::ShapeMismatch);
        }
        self.d_score_flat(&roll.to_flat())
    }

    pub fn d_score_flat(&self, x: &[f64]) -> Result<f64> {
        Ok(self.discriminator.predict(x)?[0])
    }

    pub(crate) fn generator_param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.trunk.param_slices_mut();
        for h in &mut self.heads {
            out.extend(h.param_slices_mut());
        }
        out
    }

    pub(crate) fn generator_param_slices(&self) -> Vec<&[f64]> {
        let mut out = self.trunk.param_slices();
        for h in &self.heads {
            out.extend(h.param_slices());
        }
        out
    }

    /// All layers in checkpoint order: trunk, heads, discriminator.
    pub(crate) fn all_layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.trunk
            .layers()
            .iter()
            .chain(self.heads.iter().flat_map(|h| h.layers()))
            .chain(self.discriminator.layers())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> ComposerGan {
        let shape = PianorollShape::new(2, 1, 4, 12).unwrap();
        let arch = GanLayout { trunk_hidden: vec![8], disc_hidden: vec![6] }.describe(shape, 4).unwrap();
        ComposerGan::init(&arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    fn with_head_bias(mut gan: ComposerGan, bias: f64) -> ComposerGan {
        for head in gan.heads_mut() {
            let layer = head.layer_mut(0);
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.bias.iter_mut().for_each(|b| *b = bias);
        }
        gan
    }

    #[test]
    fn sampling_is_deterministic() {
        let gan = model();
        let z = [0.3, -1.0, 0.2, 2.0];
        assert_eq!(gan.g_sample(&z).unwrap(), gan.g_sample(&z).unwrap());
    }

    #[test]
    fn negative_bias_gives_empty_roll() {
        let gan = with_head_bias(model(), -1.0);
        assert_eq!(gan.g_sample(&[1.0; 4]).unwrap().active_cells(), 0);
    }

    #[test]
    fn positive_bias_gives_full_roll() {
        let gan = with_head_bias(model(), 1.0);
        assert_eq!(gan.g_sample(&[1.0; 4]).unwrap().active_cells(), 96);
    }

    #[test]
    fn binarization_matches_logits() {
        let gan = model();
        let z = [0.5, 1.5, -0.7, 0.1];
        let logits = gan.g_logits(&z).unwrap();
        let roll = gan.g_sample(&z).unwrap();
        for (k, l) in logits.iter().enumerate() {
            assert_eq!(roll.get_flat(k), *l > 0.0);
        }
    }

    #[test]
    fn latent_width_checked() {
        assert!(model().g_sample(&[0.0; 3]).is_err());
    }

    #[test]
    fn zero_discriminator_scores_bias() {
        let mut gan = model();
        let n = gan.discriminator().layers().len();
        for i in 0..n {
            let layer = gan.discriminator_mut().layer_mut(i);
            layer.weights.iter_mut().for_each(|w| *w = 0.0);
            layer.bias.iter_mut().for_each(|b| *b = 0.0);
        }
        gan.discriminator_mut().layer_mut(n - 1).bias[0] = 0.75;
        let shape = *gan.shape();
        assert_eq!(gan.d_score(&Pianoroll::zeros(shape)).unwrap(), 0.75);
        assert_eq!(gan.d_score(&Pianoroll::ones(shape)).unwrap(), 0.75);
    }

    #[test]
    fn scaling_final_layer_scales_logit() {
        let gan = model();
        let shape = *gan.shape();
        let mut roll = Pianoroll::zeros(shape);
        roll.set_flat(5, true);
        roll.set_flat(40, true);
        let before = gan.d_score(&roll).unwrap();
        let mut doubled = gan.clone();
        let n = doubled.discriminator().layers().len();
        let last = doubled.discriminator_mut().layer_mut(n - 1);
        last.weights.iter_mut().for_each(|w| *w *= 2.0);
        last.bias.iter_mut().for_each(|b| *b *= 2.0);
        assert!((doubled.d_score(&roll).unwrap() - 2.0 * before).abs() < 1e-12);
    }

    #[test]
    fn d_score_checks_shape() {
        let other = PianorollShape::new(1, 1, 4, 12).unwrap();
        assert!(matches!(model().d_score(&Pianoroll::zeros(other)), Err(Error::ShapeMismatch)));
    }
}

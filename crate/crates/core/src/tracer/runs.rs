//! Corrupted and restored runs.

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::noise::NoiseConfig;
use super::{Result, TraceError};
use crate::datagen::{ProfessionEntry, PromptTemplate, PronounIds, Vocabulary};
use crate::model::{
    forward, HookSpec, ModelCheckpoint, NextTokenDistribution, Site, SiteKind,
};
use crate::seed;

/// The component whose clean activation a restoration re-injects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Component {
    Mlp,
    Attn,
    Layer,
}

impl Component {
    pub fn site_kind(self) -> SiteKind {
        match self {
            Component::Mlp => SiteKind::MlpOut,
            Component::Attn => SiteKind::AttnOut,
            Component::Layer => SiteKind::LayerOut,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::Mlp => "mlp",
            Component::Attn => "attn",
            Component::Layer => "layer",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        match s {
            "mlp" => Some(Component::Mlp),
            "attn" => Some(Component::Attn),
            "layer" => Some(Component::Layer),
            _ => None,
        }
    }
}

/// A prompt annotated with its subject span and lexicon scores.
#[derive(Clone, Debug)]
pub struct TracePrompt {
    pub tokens: Vec<u32>,
    pub subject_span: (usize, usize),
    pub x_s: f64,
    pub x_f: f64,
    pub profession: String,
    pub template_id: String,
}

impl TracePrompt {
    /// Realizes a template for a profession and locates the subject span.
    pub fn from_entry(
        entry: &ProfessionEntry,
        template: &PromptTemplate,
        vocab: &Vocabulary,
    ) -> Result<Self> {
        let tokens = template.realize(&entry.word, vocab)?;
        let prof_id = vocab
            .id(&entry.word)
            .ok_or_else(|| TraceError::InvalidArgument(format!(
                "profession {:?} not in vocabulary",
                entry.word
            )))?;
        let pos = tokens
            .iter()
            .position(|&t| t == prof_id)
            .ok_or_else(|| TraceError::InvalidArgument("slot token missing".into()))?;
        Ok(Self {
            tokens,
            subject_span: (pos, pos + 1),
            x_s: entry.x_s,
            x_f: entry.x_f,
            profession: entry.word.clone(),
            template_id: template.id.clone(),
        })
    }
}

fn check_span(tokens: &[u32], span: (usize, usize)) -> Result<()> {
    if span.0 >= span.1 || span.1 > tokens.len() {
        return Err(TraceError::SpanOutOfRange(format!(
            "span {span:?} in sequence of length {}",
            tokens.len()
        )));
    }
    Ok(())
}

/// Embedding patches carrying `h_i + eps` for the subject positions; one
/// fixed draw per `(noise.seed, sample)`.
pub(crate) fn corruption_hooks(
    ckpt: &ModelCheckpoint,
    tokens: &[u32],
    span: (usize, usize),
    noise: &NoiseConfig,
    sample: u64,
) -> Result<Vec<HookSpec>> {
    check_span(tokens, span)?;
    let sigma = noise.sigma();
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_indexed(noise.seed, "noise-sample", sample));
    let embed = ckpt.embed();
    let d = ckpt.config().d_model;
    let mut hooks = Vec::new();
    for pos in span.0..span.1 {
        let token = tokens[pos] as usize;
        let mut payload = embed.row(token).to_vec();
        for coord in payload.iter_mut().take(d) {
            *coord += seed::gaussian(&mut rng) * sigma;
        }
        hooks.push(HookSpec::patch(Site::new(SiteKind::Embedding, 0, pos), payload));
    }
    Ok(hooks)
}

/// Corrupted run: noise on the subject embeddings, next-token distribution
/// at the last position.
pub fn corrupted_run(
    ckpt: &ModelCheckpoint,
    tokens: &[u32],
    span: (usize, usize),
    noise: &NoiseConfig,
) -> Result<NextTokenDistribution> {
    let hooks = corruption_hooks(ckpt, tokens, span, noise, 0)?;
    let out = forward(ckpt, tokens, &hooks)?;
    Ok(out.distributions.last().expect("non-empty prompt").clone())
}

/// Corrupted run with one restored site, given precomputed clean payloads;
/// returns `y = P(he) - P(she)` at the last position.
pub(crate) fn restored_y(
    ckpt: &ModelCheckpoint,
    tokens: &[u32],
    corruption: &[HookSpec],
    site: Site,
    clean_payload: &[f64],
    pronouns: PronounIds,
) -> Result<f64> {
    let mut hooks = corruption.to_vec();
    hooks.push(HookSpec::patch(site, clean_payload.to_vec()));
    let out = forward(ckpt, tokens, &hooks)?;
    let dist = out.distributions.last().expect("non-empty prompt");
    Ok(dist.prob(pronouns.he) - dist.prob(pronouns.she))
}

/// Full restored run for one site: clean capture, corruption, restoration.
/// Averages `y` over `noise.samples` independent corruption draws.
pub fn restored_run(
    ckpt: &ModelCheckpoint,
    tokens: &[u32],
    span: (usize, usize),
    noise: &NoiseConfig,
    component: Component,
    layer: usize,
    token: usize,
    pronouns: PronounIds,
) -> Result<f64> {
    check_span(tokens, span)?;
    let site = Site::new(component.site_kind(), layer, token);
    let clean = forward(ckpt, tokens, &[HookSpec::capture(site)])?;
    let payload = clean.captures[&site].clone();
    let samples = noise.samples.max(1);
    let mut total = 0.0;
    for s in 0..samples {
        let corruption = corruption_hooks(ckpt, tokens, span, noise, s as u64)?;
        total += restored_y(ckpt, tokens, &corruption, site, &payload, pronouns)?;
    }
    Ok(total / samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::default_templates;
    use crate::model::ModelConfig;

    fn fixture() -> (Vocabulary, ModelCheckpoint, Vec<u32>) {
        let vocab = Vocabulary::build(&["plumber".into()]);
        let cfg = ModelConfig {
            vocab_size: vocab.len(),
            d_model: 16,
            d_ff: 32,
            n_layers: 2,
            n_heads: 2,
            max_seq: 16,
            seed: 21,
        };
        let ckpt = ModelCheckpoint::init(&cfg).unwrap();
        let tokens = vocab.encode("the plumber wanted that").unwrap();
        (vocab, ckpt, tokens)
    }

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    #[test]
    fn zero_noise_equals_clean_bitwise() {
        let (_, ckpt, tokens) = fixture();
        let noise = NoiseConfig {
            multiplier: 0.0,
            base_sigma: 1.0,
            seed: 5,
            samples: 1,
        };
        let corrupted = corrupted_run(&ckpt, &tokens, (1, 2), &noise).unwrap();
        let clean = forward(&ckpt, &tokens, &[]).unwrap();
        assert_eq!(
            bits(&corrupted.probabilities),
            bits(&clean.distributions.last().unwrap().probabilities)
        );
    }

    #[test]
    fn same_seed_same_corruption() {
        let (_, ckpt, tokens) = fixture();
        let noise = NoiseConfig {
            multiplier: 3.0,
            base_sigma: 0.02,
            seed: 9,
            samples: 1,
        };
        let a = corrupted_run(&ckpt, &tokens, (1, 2), &noise).unwrap();
        let b = corrupted_run(&ckpt, &tokens, (1, 2), &noise).unwrap();
        assert_eq!(bits(&a.probabilities), bits(&b.probabilities));
        let other = NoiseConfig { seed: 10, ..noise };
        let c = corrupted_run(&ckpt, &tokens, (1, 2), &other).unwrap();
        assert_ne!(bits(&a.probabilities), bits(&c.probabilities));
    }

    #[test]
    fn span_bounds_are_checked() {
        let (_, ckpt, tokens) = fixture();
        let noise = NoiseConfig {
            multiplier: 3.0,
            base_sigma: 0.02,
            seed: 0,
            samples: 1,
        };
        assert!(matches!(
            corrupted_run(&ckpt, &tokens, (2, 9), &noise),
            Err(TraceError::SpanOutOfRange(_))
        ));
        assert!(matches!(
            corrupted_run(&ckpt, &tokens, (3, 3), &noise),
            Err(TraceError::SpanOutOfRange(_))
        ));
    }

    #[test]
    fn zero_noise_restoration_is_clean_y() {
        let (vocab, ckpt, tokens) = fixture();
        let pronouns = vocab.pronouns();
        let noise = NoiseConfig {
            multiplier: 0.0,
            base_sigma: 1.0,
            seed: 3,
            samples: 1,
        };
        let clean = forward(&ckpt, &tokens, &[]).unwrap();
        let dist = clean.distributions.last().unwrap();
        let y_clean = dist.prob(pronouns.he) - dist.prob(pronouns.she);
        for component in [Component::Mlp, Component::Attn, Component::Layer] {
            let y = restored_run(&ckpt, &tokens, (1, 2), &noise, component, 1, 2, pronouns)
                .unwrap();
            assert_eq!(y.to_bits(), y_clean.to_bits());
        }
    }

    #[test]
    fn restoring_subject_embedding_undoes_corruption() {
        let (vocab, ckpt, tokens) = fixture();
        let pronouns = vocab.pronouns();
        let noise = NoiseConfig {
            multiplier: 3.0,
            base_sigma: 0.05,
            seed: 31,
            samples: 1,
        };
        let clean = forward(&ckpt, &tokens, &[]).unwrap();
        let dist = clean.distributions.last().unwrap();
        let y_clean = dist.prob(pronouns.he) - dist.prob(pronouns.she);

        // restore the embedding site of the whole (single-token) span
        let corruption = corruption_hooks(&ckpt, &tokens, (1, 2), &noise, 0).unwrap();
        let site = Site::new(SiteKind::Embedding, 0, 1);
        let payload = ckpt.embed().row(tokens[1] as usize).to_vec();
        let y = restored_y(&ckpt, &tokens, &corruption, site, &payload, pronouns).unwrap();
        assert_eq!(y.to_bits(), y_clean.to_bits());
    }

    #[test]
    fn restoring_all_layer_outputs_reproduces_clean() {
        let (vocab, ckpt, tokens) = fixture();
        let pronouns = vocab.pronouns();
        let noise = NoiseConfig {
            multiplier: 3.0,
            base_sigma: 0.05,
            seed: 41,
            samples: 1,
        };
        // capture all layer outputs from the clean run
        let mut capture_hooks = Vec::new();
        for l in 0..2 {
            for t in 0..tokens.len() {
                capture_hooks.push(HookSpec::capture(Site::new(SiteKind::LayerOut, l, t)));
            }
        }
        let clean = forward(&ckpt, &tokens, &capture_hooks).unwrap();
        let dist = clean.distributions.last().unwrap();
        let y_clean = dist.prob(pronouns.he) - dist.prob(pronouns.she);

        let mut hooks = corruption_hooks(&ckpt, &tokens, (1, 2), &noise, 0).unwrap();
        for (site, payload) in &clean.captures {
            hooks.push(HookSpec::patch(*site, payload.clone()));
        }
        let out = forward(&ckpt, &tokens, &hooks).unwrap();
        let d = out.distributions.last().unwrap();
        let y = d.prob(pronouns.he) - d.prob(pronouns.she);
        assert!((y - y_clean).abs() < 1e-6);
    }

    #[test]
    fn prompt_from_entry_finds_span() {
        let vocab = Vocabulary::build(&["plumber".into()]);
        let entry = ProfessionEntry {
            word: "plumber".into(),
            x_f: 0.1,
            x_s: 0.8,
        };
        let t = &default_templates()[4]; // stayed_up
        let p = TracePrompt::from_entry(&entry, t, &vocab).unwrap();
        assert_eq!(p.subject_span, (1, 2));
        assert_eq!(vocab.word(p.tokens[1]), "plumber");
        assert_eq!(p.template_id, "stayed_up");
    }
}

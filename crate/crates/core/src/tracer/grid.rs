//! Indirect-effect grids: per (layer, token-group) restored scores averaged
//! within groups, then a bias regression across prompts per cell.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::groups::{group_positions, TokenGroup, ALL_GROUPS};
use super::noise::NoiseConfig;
use super::runs::{corruption_hooks, restored_y, Component, TracePrompt};
use super::{Result, TraceError};
use crate::biaseval::{fit_xy, BiasRegressionFit, EvalError};
use crate::datagen::PronounIds;
use crate::model::{forward, HookSpec, ModelCheckpoint, Site};
use crate::par;
use crate::seed;

#[derive(Clone, Debug)]
pub struct TraceCell {
    /// One averaged score per prompt that has positions in this group, in
    /// canonical prompt order.
    pub scores: Vec<f64>,
    pub fit: Option<BiasRegressionFit>,
}

#[derive(Clone, Debug)]
pub struct TraceGrid {
    pub component: Component,
    pub n_layers: usize,
    /// Canonical `(profession, template)` prompt order shared by all cells.
    pub prompt_keys: Vec<(String, String)>,
    pub cells: BTreeMap<(usize, TokenGroup), TraceCell>,
}

/// Serializable grid: component, layer count, the six group labels, and one
/// `{a_s, a_f, b0, r2}` record per cell (nulls for empty cells).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub component: String,
    pub n_layers: usize,
    pub groups: Vec<String>,
    pub n_prompts: usize,
    pub cells: Vec<CellReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub layer: usize,
    pub group: String,
    pub n: usize,
    pub a_s: Option<f64>,
    pub a_f: Option<f64>,
    pub b0: Option<f64>,
    pub r2: Option<f64>,
}

impl TraceGrid {
    pub fn to_report(&self) -> GridReport {
        let mut cells = Vec::new();
        for layer in 0..self.n_layers {
            for group in ALL_GROUPS {
                let cell = &self.cells[&(layer, group)];
                cells.push(CellReport {
                    layer,
                    group: group.label().to_string(),
                    n: cell.scores.len(),
                    a_s: cell.fit.map(|f| f.a_s),
                    a_f: cell.fit.map(|f| f.a_f),
                    b0: cell.fit.map(|f| f.b0),
                    r2: cell.fit.map(|f| f.r2),
                });
            }
        }
        GridReport {
            component: self.component.label().to_string(),
            n_layers: self.n_layers,
            groups: ALL_GROUPS.iter().map(|g| g.label().to_string()).collect(),
            n_prompts: self.prompt_keys.len(),
            cells,
        }
    }

    /// Cell with the largest fitted `a_s`, if any cell carries a fit.
    pub fn max_a_s_cell(&self) -> Option<(usize, TokenGroup, f64)> {
        self.cells
            .iter()
            .filter_map(|(&(layer, group), cell)| cell.fit.map(|f| (layer, group, f.a_s)))
            .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
    }
}

/// Builds the grid for one component kind.
///
/// Per prompt: one clean run capturing every `(layer, token)` site of the
/// component, one corruption draw derived from the prompt identity (shared
/// across all of its restoration sites, so cells are comparable), and one
/// restored run per site. Scores of the positions in a group are averaged
/// per prompt before the cross-prompt regression. Prompts are processed in
/// a canonical `(profession, template)` order, so permuting the input
/// changes nothing.
pub fn build_grid(
    ckpt: &ModelCheckpoint,
    prompts: &[TracePrompt],
    noise: &NoiseConfig,
    component: Component,
    pronouns: PronounIds,
) -> Result<TraceGrid> {
    if prompts.is_empty() {
        return Err(TraceError::InvalidArgument("no prompts".into()));
    }
    let n_layers = ckpt.config().n_layers;
    let kind = component.site_kind();

    let mut order: Vec<usize> = (0..prompts.len()).collect();
    order.sort_by(|&a, &b| {
        (&prompts[a].profession, &prompts[a].template_id)
            .cmp(&(&prompts[b].profession, &prompts[b].template_id))
    });

    // per prompt: [layer][group] -> averaged y (None when the group is empty)
    let per_prompt = par::try_map_range(order.len(), |rank| {
        let prompt = &prompts[order[rank]];
        let seq = prompt.tokens.len();
        let prompt_noise = NoiseConfig {
            seed: seed::derive(
                noise.seed,
                &format!("prompt/{}/{}", prompt.profession, prompt.template_id),
            ),
            ..*noise
        };

        let capture_hooks: Vec<HookSpec> = (0..n_layers)
            .flat_map(|l| (0..seq).map(move |t| HookSpec::capture(Site::new(kind, l, t))))
            .collect();
        let clean = forward(ckpt, &prompt.tokens, &capture_hooks)?;

        let samples = prompt_noise.samples.max(1);
        let mut scores = vec![vec![0.0f64; seq]; n_layers];
        for sample in 0..samples {
            let corruption = corruption_hooks(
                ckpt,
                &prompt.tokens,
                prompt.subject_span,
                &prompt_noise,
                sample as u64,
            )?;
            for layer in 0..n_layers {
                for token in 0..seq {
                    let site = Site::new(kind, layer, token);
                    let y = restored_y(
                        ckpt,
                        &prompt.tokens,
                        &corruption,
                        site,
                        &clean.captures[&site],
                        pronouns,
                    )?;
                    scores[layer][token] += y / samples as f64;
                }
            }
        }

        let groups = group_positions(seq, prompt.subject_span);
        let mut averaged = vec![[None::<f64>; 6]; n_layers];
        for (layer, row) in scores.iter().enumerate() {
            for (gi, group) in ALL_GROUPS.iter().enumerate() {
                let values: Vec<f64> = row
                    .iter()
                    .zip(&groups)
                    .filter(|(_, g)| *g == group)
                    .map(|(v, _)| *v)
                    .collect();
                if !values.is_empty() {
                    averaged[layer][gi] =
                        Some(values.iter().sum::<f64>() / values.len() as f64);
                }
            }
        }
        Ok::<_, TraceError>(averaged)
    })?;

    let prompt_keys: Vec<(String, String)> = order
        .iter()
        .map(|&i| (prompts[i].profession.clone(), prompts[i].template_id.clone()))
        .collect();

    let mut cells = BTreeMap::new();
    for layer in 0..n_layers {
        for (gi, group) in ALL_GROUPS.iter().enumerate() {
            let mut scores = Vec::new();
            let mut triples = Vec::new();
            for (rank, averaged) in per_prompt.iter().enumerate() {
                if let Some(y) = averaged[layer][gi] {
                    scores.push(y);
                    let p = &prompts[order[rank]];
                    triples.push((p.x_s, p.x_f, y));
                }
            }
            let fit = if triples.len() >= 3 {
                match fit_xy(&triples) {
                    Ok(f) => Some(f),
                    Err(EvalError::DegenerateDesign(msg)) => {
                        return Err(TraceError::Eval(EvalError::DegenerateDesign(format!(
                            "cell (layer {layer}, {}): {msg}",
                            group.label()
                        ))))
                    }
                    Err(e) => return Err(TraceError::Eval(e)),
                }
            } else {
                None
            };
            cells.insert((layer, *group), TraceCell { scores, fit });
        }
    }

    Ok(TraceGrid {
        component,
        n_layers,
        prompt_keys,
        cells,
    })
}

//! End-to-end lesion synthesis: recipes, configuration, and epoch streaming
//! over a dataset manifest.

mod config;
mod manifest;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ca::{grow_lesion, sample_seed, GrowthRules, StepReport, Termination};
use crate::error::{ensure, Error, Result, StageExt};
use crate::handcrafted::{self, ShapeSpec};
use crate::interaction::{mass_effect_field, warp, Interpolation, MassEffectParams};
use crate::mapping::{render, IntensityModel};
use crate::quantize::{build_organ_map, TumorMap, DEFAULT_LEVELS};
use crate::rng::{derive_key, Stream};
use crate::volume_io::{HuVolume, LabelVolume, MaskSet};

pub use config::{Config, HandcraftedConfig, IntensityOverrides, Preset};
pub use manifest::{
    epoch_stream, lesion_seed, load_case, output_stem, parse_manifest, read_manifest, run_epoch, write_item,
    EpochItem, EpochSummary, ManifestRow,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    CellularAutomata,
    Handcrafted,
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ca" | "cellular_automata" => Ok(Backend::CellularAutomata),
            "handcrafted" => Ok(Backend::Handcrafted),
            other => Err(Error::Config(format!("unknown backend {other:?}"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::CellularAutomata => "cellular_automata",
            Backend::Handcrafted => "handcrafted",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrganPreset {
    #[default]
    Liver,
    Pancreas,
    Kidney,
}

/// Everything needed to reproduce one lesion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LesionRecipe {
    pub backend: Backend,
    pub organ_preset: OrganPreset,
    /// Lesion center; drawn from the eligible set when absent.
    pub seed_voxel: Option<[usize; 3]>,
    pub target_volume_mm3: f64,
    /// Intensity quantization levels for the organ map.
    pub organ_levels: u8,
    /// Minimum distance (voxels) from organ boundary and vessels for a
    /// sampled CA seed.
    pub seed_margin_voxels: f64,
    /// Candidate centers tried per focus by the handcrafted placement.
    pub placement_attempts: usize,
    #[serde(with = "crate::rng::seed_serde")]
    pub rng_seed: u64,
    pub intensity: IntensityModel,
    pub mass_effect: MassEffectParams,
    /// Set for the cellular-automaton backend only.
    pub rules: Option<GrowthRules>,
    /// Set for the handcrafted backend only.
    pub shape: Option<ShapeSpec>,
}

impl LesionRecipe {
    pub fn validate(&self) -> Result<()> {
        ensure(self.target_volume_mm3 > 0.0 && self.target_volume_mm3.is_finite(), || {
            format!("target_volume_mm3 {} must be > 0", self.target_volume_mm3)
        })?;
        ensure(self.placement_attempts >= 1, || "placement_attempts must be >= 1".into())?;
        self.intensity.validate()?;
        self.mass_effect.validate()?;
        match (self.backend, &self.rules, &self.shape) {
            (Backend::CellularAutomata, Some(rules), None) => rules.validate(self.organ_levels),
            (Backend::Handcrafted, None, Some(shape)) => shape.validate(),
            (b, _, _) => Err(Error::InvalidParameter(format!(
                "backend {b} needs exactly its own parameter block (rules for CA, shape for handcrafted)"
            ))),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Key for the texture noise of this lesion.
    pub fn texture_seed(&self) -> u64 {
        derive_key(self.rng_seed, "texture")
    }
}

impl Default for LesionRecipe {
    fn default() -> Self {
        Self {
            backend: Backend::CellularAutomata,
            organ_preset: OrganPreset::Liver,
            seed_voxel: None,
            target_volume_mm3: std::f64::consts::PI / 6.0 * 1000.0,
            organ_levels: DEFAULT_LEVELS,
            seed_margin_voxels: 2.0,
            placement_attempts: 100,
            rng_seed: 0,
            intensity: IntensityModel::default(),
            mass_effect: MassEffectParams::default(),
            rules: Some(GrowthRules::default()),
            shape: None,
        }
    }
}

/// Output of one synthesis.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthesisResult {
    pub image: HuVolume,
    /// Exact lesion mask; never warped.
    pub mask: LabelVolume,
    /// Organ mask after the mass-effect warp.
    pub organ_mask: LabelVolume,
    /// Vessel mask after the mass-effect warp.
    pub vessel_mask: Option<LabelVolume>,
    /// The input recipe with every sampled value filled in.
    pub recipe_echo: LesionRecipe,
    /// Per-step growth log (cellular-automaton backend).
    pub step_log: Vec<StepReport>,
    pub termination: Option<Termination>,
    /// Growth stalled before reaching the target volume.
    pub died: bool,
}

/// Runs the recipe's backend on one case. Errors carry the failing stage.
pub fn synthesize(ct: &HuVolume, masks: &MaskSet, recipe: &LesionRecipe) -> Result<SynthesisResult> {
    recipe.validate().stage("recipe")?;
    ct.ensure_same_grid(masks.organ(), "CT vs organ mask").stage("input")?;
    match recipe.backend {
        Backend::CellularAutomata => synthesize_ca(ct, masks, recipe),
        Backend::Handcrafted => handcrafted::synthesize_handcrafted(ct, masks, recipe),
    }
}

fn synthesize_ca(ct: &HuVolume, masks: &MaskSet, recipe: &LesionRecipe) -> Result<SynthesisResult> {
    let rules = recipe.rules.as_ref().ok_or_else(|| Error::InvalidParameter("missing rules".into()))?;
    let organ = build_organ_map(ct, masks, recipe.organ_levels).stage("quantize")?;
    let seed = match recipe.seed_voxel {
        Some(s) => s,
        None => {
            let mut stream = Stream::for_purpose(recipe.rng_seed, "seed");
            sample_seed(masks, &organ, &mut stream, recipe.seed_margin_voxels).stage("seed")?
        }
    };
    let outcome = grow_lesion(&organ, seed, rules, recipe.target_volume_mm3).stage("grow")?;
    let mut echo = recipe.clone();
    echo.seed_voxel = Some(seed);
    let died = outcome.termination == Termination::Died;
    let mut result = composite(ct, masks, &outcome.tumor, echo)?;
    result.step_log = outcome.reports;
    result.termination = Some(outcome.termination);
    result.died = died;
    Ok(result)
}

/// Mass effect, warp of the CT and anatomy masks, then rendering of the
/// lesion onto the warped CT. The lesion mask itself is not warped.
pub(crate) fn composite(ct: &HuVolume, masks: &MaskSet, tumor: &TumorMap, echo: LesionRecipe) -> Result<SynthesisResult> {
    let field = mass_effect_field(tumor, masks, &echo.mass_effect).stage("mass_effect")?;
    let warped_ct = warp(ct, &field, Interpolation::Trilinear).stage("warp")?;
    let organ_mask = warp(masks.organ(), &field, Interpolation::Nearest).stage("warp")?;
    let vessel_mask = masks
        .vessels()
        .map(|v| warp(v, &field, Interpolation::Nearest))
        .transpose()
        .stage("warp")?;
    let image = render(&warped_ct, tumor, &echo.intensity, echo.texture_seed()).stage("render")?;
    Ok(SynthesisResult {
        image,
        mask: tumor.mask(),
        organ_mask,
        vessel_mask,
        recipe_echo: echo,
        step_log: Vec::new(),
        termination: None,
        died: false,
    })
}

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Backend, LesionRecipe, OrganPreset};
use crate::ca::GrowthRules;
use crate::error::{ensure, Error, Result};
use crate::handcrafted::ShapeSpec;
use crate::interaction::MassEffectParams;
use crate::mapping::IntensityModel;
use crate::quantize::DEFAULT_LEVELS;
use crate::rng::{derive_key, Stream};

/// Per-organ defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub intensity: IntensityModel,
    /// Range the lesion's equivalent diameter is drawn from, mm.
    pub diameter_mm: [f64; 2],
}

impl OrganPreset {
    /// Liver HU range is the published hepatocellular-carcinoma range; the
    /// pancreas and kidney ranges and all diameter ranges are placeholders.
    pub fn preset(self) -> Preset {
        match self {
            OrganPreset::Liver => Preset {
                intensity: IntensityModel::default(),
                diameter_mm: [5.0, 60.0],
            },
            OrganPreset::Pancreas => Preset {
                intensity: IntensityModel {
                    hu_base: 65.0,
                    hu_range: [40.0, 90.0],
                    capsule_enabled: false,
                    ..IntensityModel::default()
                },
                diameter_mm: [5.0, 40.0],
            },
            OrganPreset::Kidney => Preset {
                intensity: IntensityModel {
                    hu_base: 85.0,
                    hu_range: [50.0, 120.0],
                    ..IntensityModel::default()
                },
                diameter_mm: [5.0, 50.0],
            },
        }
    }
}

/// Optional replacements for the organ preset's intensity model.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntensityOverrides {
    pub hu_range: Option<[f64; 2]>,
    pub necrosis_delta: Option<f64>,
    pub texture_sigma: Option<f64>,
    pub texture_scales: Option<Vec<f64>>,
    pub blend_halfwidth: Option<u32>,
    pub capsule_enabled: Option<bool>,
    pub capsule_delta: Option<f64>,
    pub capsule_min_radius_mm: Option<f64>,
}

impl IntensityOverrides {
    fn apply(&self, mut m: IntensityModel) -> IntensityModel {
        if let Some(v) = self.hu_range {
            m.hu_range = v;
            m.hu_base = 0.5 * (v[0] + v[1]);
        }
        if let Some(v) = self.necrosis_delta {
            m.necrosis_delta = v;
        }
        if let Some(v) = self.texture_sigma {
            m.texture_sigma = v;
        }
        if let Some(v) = &self.texture_scales {
            m.texture_scales = v.clone();
        }
        if let Some(v) = self.blend_halfwidth {
            m.blend_halfwidth = v;
        }
        if let Some(v) = self.capsule_enabled {
            m.capsule_enabled = v;
        }
        if let Some(v) = self.capsule_delta {
            m.capsule_delta = v;
        }
        if let Some(v) = self.capsule_min_radius_mm {
            m.capsule_min_radius_mm = v;
        }
        m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandcraftedConfig {
    pub elastic_sigma_mm: f64,
    pub elastic_amplitude: [f64; 2],
    /// Lower bound of the two minor-to-major semiaxis ratios.
    pub axis_ratio_min: f64,
    pub multifocal_count: u32,
    pub placement_attempts: usize,
}

impl Default for HandcraftedConfig {
    fn default() -> Self {
        Self {
            elastic_sigma_mm: 4.0,
            elastic_amplitude: [0.05, 0.3],
            axis_ratio_min: 0.7,
            multifocal_count: 1,
            placement_attempts: 100,
        }
    }
}

/// Run configuration, read from TOML. Every field is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    #[serde(with = "crate::rng::seed_serde")]
    pub seed: u64,
    pub backend: Backend,
    pub organ_preset: OrganPreset,
    pub lesions_per_case: u32,
    /// Overrides the preset's diameter range, mm.
    pub diameter_mm: Option<[f64; 2]>,
    pub organ_levels: u8,
    pub seed_margin_voxels: f64,
    /// `rng_seed` here is ignored; each lesion gets its own.
    pub ca: GrowthRules,
    pub handcrafted: HandcraftedConfig,
    pub intensity: IntensityOverrides,
    pub mass_effect: MassEffectParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            backend: Backend::CellularAutomata,
            organ_preset: OrganPreset::Liver,
            lesions_per_case: 1,
            diameter_mm: None,
            organ_levels: DEFAULT_LEVELS,
            seed_margin_voxels: 2.0,
            ca: GrowthRules::default(),
            handcrafted: HandcraftedConfig::default(),
            intensity: IntensityOverrides::default(),
            mass_effect: MassEffectParams::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e)))
    }

    pub fn intensity_model(&self) -> IntensityModel {
        self.intensity.apply(self.organ_preset.preset().intensity)
    }

    pub fn diameter_range(&self) -> [f64; 2] {
        self.diameter_mm.unwrap_or(self.organ_preset.preset().diameter_mm)
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.diameter_range();
        ensure(lo > 0.0 && lo <= hi, || format!("diameter range [{lo}, {hi}] invalid"))?;
        ensure(self.lesions_per_case >= 1, || "lesions_per_case must be >= 1".into())?;
        self.intensity_model().validate()?;
        self.mass_effect.validate()?;
        self.ca.validate(self.organ_levels)?;
        let h = &self.handcrafted;
        ensure(h.elastic_amplitude[0] <= h.elastic_amplitude[1], || {
            "handcrafted.elastic_amplitude must be ordered".into()
        })?;
        ensure(h.axis_ratio_min > 0.0 && h.axis_ratio_min <= 1.0, || {
            format!("axis_ratio_min {} not in (0, 1]", h.axis_ratio_min)
        })?;
        ensure(h.placement_attempts >= 1, || "placement_attempts must be >= 1".into())?;
        ShapeSpec {
            elastic_sigma_mm: h.elastic_sigma_mm,
            elastic_amplitude: h.elastic_amplitude[1],
            multifocal_count: h.multifocal_count,
            ..ShapeSpec::default()
        }
        .validate()
    }

    /// Draws every random recipe value from `lesion_seed`.
    pub fn resolve(&self, lesion_seed: u64) -> Result<LesionRecipe> {
        self.validate()?;
        let mut stream = Stream::for_purpose(lesion_seed, "recipe");
        let [dlo, dhi] = self.diameter_range();
        let diameter = stream.range_f64(dlo, dhi);
        let mut intensity = self.intensity_model();
        intensity.hu_base = stream.range_f64(intensity.hu_range[0], intensity.hu_range[1]);

        let (rules, shape) = match self.backend {
            Backend::CellularAutomata => {
                let rules = GrowthRules {
                    rng_seed: derive_key(lesion_seed, "growth"),
                    ..self.ca.clone()
                };
                (Some(rules), None)
            }
            Backend::Handcrafted => {
                let h = &self.handcrafted;
                let r1 = stream.range_f64(h.axis_ratio_min, 1.0);
                let r2 = stream.range_f64(h.axis_ratio_min, 1.0);
                let major = 0.5 * diameter / (r1 * r2).cbrt();
                let shape = ShapeSpec {
                    semiaxes_mm: [major, major * r1, major * r2],
                    euler_angles: [0; 3].map(|_| stream.range_f64(0.0, 2.0 * PI)),
                    elastic_sigma_mm: h.elastic_sigma_mm,
                    elastic_amplitude: stream.range_f64(h.elastic_amplitude[0], h.elastic_amplitude[1]),
                    multifocal_count: h.multifocal_count,
                };
                (None, Some(shape))
            }
        };
        Ok(LesionRecipe {
            backend: self.backend,
            organ_preset: self.organ_preset,
            seed_voxel: None,
            target_volume_mm3: PI / 6.0 * diameter.powi(3),
            organ_levels: self.organ_levels,
            seed_margin_voxels: self.seed_margin_voxels,
            placement_attempts: self.handcrafted.placement_attempts,
            rng_seed: lesion_seed,
            intensity,
            mass_effect: self.mass_effect.clone(),
            rules,
            shape,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_default() {
        assert_eq!(Config::from_toml("").unwrap(), Config::default());
    }

    #[test]
    fn shipped_default_file_matches() {
        let text = include_str!("../../../../configs/default.toml");
        assert_eq!(Config::from_toml(text).unwrap(), Config::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Config::from_toml("sed = 1"), Err(Error::Config(_))));
        assert!(matches!(Config::from_toml("[ca]\np_grw = 0.5"), Err(Error::Config(_))));
    }

    #[test]
    fn partial_tables_keep_defaults() {
        let c = Config::from_toml("seed = \"18446744073709551615\"\n[ca]\np_grow = 0.9\n").unwrap();
        assert_eq!(c.seed, u64::MAX);
        assert_eq!(c.ca.p_grow, 0.9);
        assert_eq!(c.ca.p_invade, GrowthRules::default().p_invade);
    }

    #[test]
    fn resolved_values_within_ranges() {
        for backend in [Backend::CellularAutomata, Backend::Handcrafted] {
            let c = Config {
                backend,
                ..Config::default()
            };
            for s in 0..200 {
                let r = c.resolve(s).unwrap();
                r.validate().unwrap();
                let d = (6.0 * r.target_volume_mm3 / PI).cbrt();
                assert!((5.0 - 1e-9..=60.0 + 1e-9).contains(&d));
                assert!((36.0..=162.0).contains(&r.intensity.hu_base));
                if let Some(shape) = &r.shape {
                    assert!((shape.volume_mm3() - r.target_volume_mm3).abs() < 1e-6 * r.target_volume_mm3);
                }
            }
        }
    }

    #[test]
    fn presets_are_valid() {
        for p in [OrganPreset::Liver, OrganPreset::Pancreas, OrganPreset::Kidney] {
            let c = Config {
                organ_preset: p,
                ..Config::default()
            };
            c.validate().unwrap();
        }
    }

    #[test]
    fn intensity_override_recenters_base() {
        let c = Config::from_toml("[intensity]\nhu_range = [50.0, 70.0]\ntexture_sigma = 0.0\n").unwrap();
        let m = c.intensity_model();
        assert_eq!((m.hu_base, m.hu_range, m.texture_sigma), (60.0, [50.0, 70.0], 0.0));
    }
}

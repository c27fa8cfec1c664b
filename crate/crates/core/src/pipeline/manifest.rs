use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{synthesize, Config, SynthesisResult};
use crate::error::{Error, Result};
use crate::rng::{fnv1a64, hash_words, mix_seed};
use crate::volume_io::{load_volume, save_volume, HuVolume, LabelVolume, MaskSet};

/// One manifest line: `case_id,ct_path,organ_path[,vessel_path]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRow {
    /// 1-based line number in the manifest.
    pub line: usize,
    pub case_id: String,
    pub ct_path: PathBuf,
    pub organ_path: PathBuf,
    pub vessel_path: Option<PathBuf>,
}

fn valid_case_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Parses manifest text. Relative paths are resolved against `base`.
/// Blank lines, `#` comments, and a leading `case_id,...` header are
/// skipped; every other line yields a row or a `ManifestRowInvalid`.
pub fn parse_manifest(text: &str, base: &Path) -> Vec<Result<ManifestRow>> {
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if fields[0] == "case_id" {
            continue;
        }
        let invalid = |reason: String| Err(Error::ManifestRowInvalid { line, reason });
        if !(3..=4).contains(&fields.len()) {
            rows.push(invalid(format!("expected 3 or 4 fields, found {}", fields.len())));
            continue;
        }
        if !valid_case_id(fields[0]) {
            rows.push(invalid(format!("case id {:?} is empty or has unsafe characters", fields[0])));
            continue;
        }
        if fields[1..].iter().any(|f| f.is_empty()) {
            rows.push(invalid("empty path".into()));
            continue;
        }
        if !seen.insert(fields[0].to_string()) {
            rows.push(invalid(format!("duplicate case id {:?}", fields[0])));
            continue;
        }
        let resolve = |f: &str| base.join(f);
        rows.push(Ok(ManifestRow {
            line,
            case_id: fields[0].to_string(),
            ct_path: resolve(fields[1]),
            organ_path: resolve(fields[2]),
            vessel_path: fields.get(3).map(|f| resolve(f)),
        }));
    }
    rows
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<Result<ManifestRow>>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(parse_manifest(&text, base))
}

fn binarize(mut m: LabelVolume) -> LabelVolume {
    for v in m.data_mut() {
        *v = (*v != 0) as u8;
    }
    m
}

/// Loads a row's CT and masks. Mask volumes are binarized (nonzero is
/// foreground).
pub fn load_case(row: &ManifestRow) -> Result<(HuVolume, MaskSet)> {
    let ct = load_volume(&row.ct_path)?.into_hu()?;
    let organ = binarize(load_volume(&row.organ_path)?.into_label()?);
    let vessels = match &row.vessel_path {
        Some(p) => Some(binarize(load_volume(p)?.into_label()?)),
        None => None,
    };
    ct.ensure_same_grid(&organ, "CT vs organ mask")?;
    Ok((ct, MaskSet::new(organ, vessels)?))
}

/// Seed of lesion `k` of a case in an epoch. Depends on the case id, not
/// its position in the manifest.
pub fn lesion_seed(global_seed: u64, epoch: u64, case_id: &str, k: u32) -> u64 {
    hash_words(mix_seed(global_seed, epoch, fnv1a64(case_id.as_bytes())), &[k as u64])
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochItem {
    pub case_id: String,
    pub lesion_index: u32,
    pub result: SynthesisResult,
}

fn synthesize_row(row: &ManifestRow, config: &Config, epoch: u64) -> Result<Vec<EpochItem>> {
    let (ct, masks) = load_case(row)?;
    (0..config.lesions_per_case)
        .map(|k| {
            let recipe = config.resolve(lesion_seed(config.seed, epoch, &row.case_id, k))?;
            Ok(EpochItem {
                case_id: row.case_id.clone(),
                lesion_index: k,
                result: synthesize(&ct, &masks, &recipe)?,
            })
        })
        .collect()
}

/// Lazily synthesizes every row in order. Rows that fail to load or
/// synthesize are logged and skipped.
pub fn epoch_stream<'a>(rows: &'a [ManifestRow], config: &'a Config, epoch: u64) -> impl Iterator<Item = EpochItem> + 'a {
    rows.iter().flat_map(move |row| match synthesize_row(row, config, epoch) {
        Ok(items) => items,
        Err(e) => {
            log::warn!("skipping case {} (line {}): {e}", row.case_id, row.line);
            Vec::new()
        }
    })
}

/// File stem for a lesion: the case id, plus `_l<k>` when a case gets
/// more than one lesion per epoch.
pub fn output_stem(case_id: &str, k: u32, lesions_per_case: u32) -> String {
    if lesions_per_case > 1 {
        format!("{case_id}_l{k}")
    } else {
        case_id.to_string()
    }
}

/// Writes `<stem>_img.rvol`, `<stem>_msk.rvol` and `<stem>_recipe.toml`.
pub fn write_item(out_dir: &Path, item: &EpochItem, lesions_per_case: u32, epoch: u64) -> Result<()> {
    let stem = output_stem(&item.case_id, item.lesion_index, lesions_per_case);
    save_volume(&item.result.image, out_dir.join(format!("{stem}_img.rvol")))?;
    save_volume(&item.result.mask, out_dir.join(format!("{stem}_msk.rvol")))?;
    let r = &item.result;
    let mut text = format!(
        "# case {} lesion {} epoch {}\n# voxels {} steps {} died {}\n",
        item.case_id,
        item.lesion_index,
        epoch,
        r.mask.count_nonzero(),
        r.step_log.len(),
        r.died
    );
    text.push_str(&r.recipe_echo.to_toml()?);
    let path = out_dir.join(format!("{stem}_recipe.toml"));
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EpochSummary {
    /// Stems written, in manifest order.
    pub written: Vec<String>,
    /// (row label, reason) for every skipped row.
    pub skipped: Vec<(String, String)>,
}

/// Synthesizes and writes one epoch of a manifest using `jobs` threads
/// (0 lets rayon choose). Output bytes do not depend on `jobs`.
pub fn run_epoch(manifest: &Path, config: &Config, epoch: u64, out_dir: &Path, jobs: usize) -> Result<EpochSummary> {
    config.validate()?;
    let parsed = read_manifest(manifest)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut summary = EpochSummary::default();
    let mut rows = Vec::new();
    for r in parsed {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => {
                log::warn!("{e}");
                let label = match &e {
                    Error::ManifestRowInvalid { line, .. } => format!("line {line}"),
                    _ => "manifest".into(),
                };
                summary.skipped.push((label, e.to_string()));
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Result<Vec<String>>> = pool.install(|| {
        rows.par_iter()
            .map(|row| {
                let items = synthesize_row(row, config, epoch)?;
                items
                    .iter()
                    .map(|item| {
                        write_item(out_dir, item, config.lesions_per_case, epoch)?;
                        Ok(output_stem(&item.case_id, item.lesion_index, config.lesions_per_case))
                    })
                    .collect()
            })
            .collect()
    });
    for (row, outcome) in rows.iter().zip(outcomes) {
        match outcome {
            Ok(stems) => summary.written.extend(stems),
            Err(e) => {
                log::warn!("skipping case {} (line {}): {e}", row.case_id, row.line);
                summary.skipped.push((row.case_id.clone(), e.to_string()));
            }
        }
    }
    Ok(summary)
}

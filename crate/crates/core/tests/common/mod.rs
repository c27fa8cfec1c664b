#![allow(dead_code)]

use std::path::Path;

use tumorsynth::ca::{GrowthRules, PHASE_INVADE, PHASE_PROLIFERATE};
use tumorsynth::grid::{self, Dims};
use tumorsynth::phantom::{Phantom, PhantomSpec};
use tumorsynth::quantize::{OrganMap, Phase};
use tumorsynth::rng::{hash_words, CounterRng, Stream};
use tumorsynth::volume_io::{save_volume, LabelVolume};

const OFFSETS: [[i64; 3]; 6] = [[-1, 0, 0], [1, 0, 0], [0, -1, 0], [0, 1, 0], [0, 0, -1], [0, 0, 1]];

fn shifted(dims: Dims, i: usize, off: [i64; 3]) -> Option<usize> {
    let c = grid::coords(dims, i);
    let mut out = [0usize; 3];
    for a in 0..3 {
        let v = c[a] as i64 + off[a];
        if v < 0 || v >= dims[a] as i64 {
            return None;
        }
        out[a] = v as usize;
    }
    Some(grid::index(dims, out))
}

/// Straightforward full-grid re-implementation of one growth step.
pub fn oracle_step(density: &mut [u8], phase: &mut [u8], levels: &[u8], dims: Dims, rules: &GrowthRules, step: u64) {
    let rng = CounterRng::new(rules.rng_seed);
    let n = density.len();
    let pre = density.to_vec();
    for i in 0..n {
        let m = rules.level_multiplier[levels[i] as usize];
        if pre[i] >= 1 && pre[i] < 10 {
            if rng.bernoulli(rules.p_grow * m, [step, PHASE_PROLIFERATE, i as u64, 0]) {
                density[i] = pre[i] + 1;
            }
        } else if pre[i] == 0 && levels[i] >= 1 {
            let mut hit = false;
            for (dir, off) in OFFSETS.iter().enumerate() {
                if let Some(j) = shifted(dims, i, *off) {
                    if pre[j] >= rules.invade_threshold
                        && rng.bernoulli(rules.p_invade * m, [step, PHASE_INVADE, i as u64, dir as u64])
                    {
                        hit = true;
                    }
                }
            }
            if hit {
                density[i] = 1;
            }
        }
    }

    for i in 0..n {
        if density[i] == 0 || phase[i] == Phase::Necrotic as u8 {
            continue;
        }
        let exposed = OFFSETS
            .iter()
            .any(|&o| shifted(dims, i, o).is_some_and(|j| density[j] == 0 && levels[j] >= 1));
        phase[i] = if exposed { Phase::Active as u8 } else { Phase::Quiescent as u8 };
    }

    // erosion depth by peeling layers off the saturated set
    let sat: Vec<bool> = density.iter().map(|&d| d == 10).collect();
    let mut depth = vec![0u32; n];
    for i in 0..n {
        if sat[i] && OFFSETS.iter().any(|&o| shifted(dims, i, o).map_or(true, |j| !sat[j])) {
            depth[i] = 1;
        }
    }
    let mut k = 1;
    loop {
        let mut changed = false;
        let snapshot = depth.clone();
        for i in 0..n {
            if sat[i] && snapshot[i] == 0 && OFFSETS.iter().any(|&o| shifted(dims, i, o).is_some_and(|j| snapshot[j] == k)) {
                depth[i] = k + 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        k += 1;
    }
    for i in 0..n {
        if phase[i] == Phase::Quiescent as u8 && sat[i] && depth[i] >= rules.necrosis_depth {
            phase[i] = Phase::Necrotic as u8;
        }
    }
}

/// Organ map with random levels; about `zero_pct` percent of voxels are
/// level 0.
pub fn random_organ(dims: Dims, seed: u64, zero_pct: u64) -> OrganMap {
    let levels: Vec<u8> = (0..grid::voxel_count(dims))
        .map(|i| {
            let h = hash_words(seed, &[i as u64]);
            if h % 100 < zero_pct {
                0
            } else {
                1 + ((h >> 8) % 4) as u8
            }
        })
        .collect();
    OrganMap::from_levels(LabelVolume::new(dims, [1.0; 3], levels).unwrap(), 4).unwrap()
}

/// Random but valid growth rules.
pub fn random_rules(stream: &mut Stream) -> GrowthRules {
    GrowthRules {
        p_grow: stream.range_f64(0.3, 1.0),
        p_invade: stream.range_f64(0.1, 1.0),
        invade_threshold: 5 + stream.below(6) as u8,
        level_multiplier: vec![
            0.0,
            stream.range_f64(0.2, 1.0),
            stream.range_f64(0.2, 1.0),
            stream.range_f64(0.2, 1.0),
            1.0,
        ],
        necrosis_depth: 1 + stream.below(3) as u32,
        death_stall_steps: 0,
        max_steps: 1000,
        rng_seed: stream.next_u64(),
    }
}

/// Any tissue voxel, drawn from `stream`.
pub fn random_tissue_voxel(organ: &OrganMap, stream: &mut Stream) -> [usize; 3] {
    let dims = organ.dims();
    loop {
        let i = stream.below(grid::voxel_count(dims) as u64) as usize;
        if organ.level(i) >= 1 {
            return grid::coords(dims, i);
        }
    }
}

pub fn phantom(n: usize, seed: u64) -> Phantom {
    Phantom::generate(&PhantomSpec {
        dims: [n, n, n],
        seed,
        ..PhantomSpec::default()
    })
    .unwrap()
}

/// Writes `n`-voxel phantom cases and a manifest listing them in order.
pub fn write_cases(dir: &Path, ids: &[&str], n: usize) {
    let mut manifest = String::from("case_id,ct_path,organ_path,vessel_path\n");
    for (k, id) in ids.iter().enumerate() {
        let p = phantom(n, k as u64 + 1);
        save_volume(&p.ct, dir.join(format!("{id}_ct.rvol"))).unwrap();
        save_volume(p.masks.organ(), dir.join(format!("{id}_organ.rvol"))).unwrap();
        save_volume(p.masks.vessels().unwrap(), dir.join(format!("{id}_vessels.rvol"))).unwrap();
        manifest.push_str(&format!("{id},{id}_ct.rvol,{id}_organ.rvol,{id}_vessels.rvol\n"));
    }
    std::fs::write(dir.join("manifest.csv"), manifest).unwrap();
}

/// Writes a manifest over cases already on disk, in the given order.
pub fn write_manifest(path: &Path, ids: &[&str]) {
    let mut text = String::new();
    for id in ids {
        text.push_str(&format!("{id},{id}_ct.rvol,{id}_organ.rvol,{id}_vessels.rvol\n"));
    }
    std::fs::write(path, text).unwrap();
}

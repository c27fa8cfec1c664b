//! Cellular-automaton tumor growth.
//!
//! Each synchronous step reads the pre-step densities and applies, in
//! order: proliferation (density += 1), invasion (an Empty tissue voxel next
//! to a voxel at or above the invasion threshold becomes density 1), phase
//! classification, and necrosis of the saturated core. Every random draw is
//! keyed by `(step, phase, voxel, sub-index)` so the result does not depend
//! on scan order.

mod seed;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::grid::{self, Coord, Region};
use crate::quantize::{init_tumor_map, OrganMap, Phase, TumorMap, MAX_DENSITY};
use crate::rng::CounterRng;

pub use seed::{sample_seed, SeedSampler};

/// Counter word identifying the proliferation draws.
pub const PHASE_PROLIFERATE: u64 = 1;
/// Counter word identifying the invasion draws.
pub const PHASE_INVADE: u64 = 2;

/// Growth-rule parameters.
///
/// The default probabilities and multipliers are engineering placeholders
/// chosen to give plausible growth speeds; they are not published values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthRules {
    /// Per-step chance a tumor voxel below saturation gains one density unit.
    pub p_grow: f64,
    /// Per-step chance a source voxel seeds a given Empty face neighbor.
    pub p_invade: f64,
    /// Density a voxel needs before it can invade.
    pub invade_threshold: u8,
    /// Factor per organ level scaling both probabilities; index 0 must be 0.
    pub level_multiplier: Vec<f64>,
    /// Erosion depth (voxels) within the saturated set at which Quiescent
    /// cells turn Necrotic.
    pub necrosis_depth: u32,
    /// Consecutive unchanged steps after which the lesion is declared dead;
    /// 0 disables stall detection.
    pub death_stall_steps: u32,
    pub max_steps: u32,
    #[serde(with = "crate::rng::seed_serde")]
    pub rng_seed: u64,
}

impl Default for GrowthRules {
    fn default() -> Self {
        Self {
            p_grow: 0.6,
            p_invade: 0.3,
            invade_threshold: MAX_DENSITY,
            level_multiplier: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            necrosis_depth: 6,
            death_stall_steps: 50,
            max_steps: 3000,
            rng_seed: 0,
        }
    }
}

impl GrowthRules {
    pub fn validate(&self, level_count: u8) -> Result<()> {
        ensure((0.0..=1.0).contains(&self.p_grow), || format!("p_grow {} not in [0,1]", self.p_grow))?;
        ensure((0.0..=1.0).contains(&self.p_invade), || {
            format!("p_invade {} not in [0,1]", self.p_invade)
        })?;
        ensure((1..=MAX_DENSITY).contains(&self.invade_threshold), || {
            format!("invade_threshold {} not in [1,10]", self.invade_threshold)
        })?;
        ensure(self.level_multiplier.len() == level_count as usize + 1, || {
            format!(
                "level_multiplier has {} entries, organ map has {} levels",
                self.level_multiplier.len(),
                level_count
            )
        })?;
        ensure(self.level_multiplier[0] == 0.0, || "level_multiplier[0] must be 0".into())?;
        ensure(self.level_multiplier.iter().all(|m| (0.0..=1.0).contains(m)), || {
            "level multipliers must lie in [0,1]".into()
        })?;
        ensure(self.necrosis_depth >= 1, || "necrosis_depth must be >= 1".into())?;
        ensure(self.max_steps >= 1, || "max_steps must be >= 1".into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: u64,
    pub tumor_voxels: usize,
    pub saturated_voxels: usize,
    pub necrotic_voxels: usize,
    pub grew: bool,
    /// Set on the final report when growth stalled long enough to count as
    /// lesion death.
    pub dead: bool,
}

/// Why [`grow_lesion`] stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TargetReached,
    MaxSteps,
    Died,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthOutcome {
    pub tumor: TumorMap,
    pub reports: Vec<StepReport>,
    pub termination: Termination,
    /// The target exceeded the available tissue volume; growth ran until it
    /// stalled or hit `max_steps`.
    pub target_unreachable: bool,
}

/// Stateful stepper that only scans the tumor's bounding box.
pub struct Engine<'a> {
    organ: &'a OrganMap,
    rules: &'a GrowthRules,
    rng: CounterRng,
    tumor: TumorMap,
    region: Option<Region>,
    steps_done: u64,
    changes: Vec<usize>,
    depth: Vec<u32>,
    queue: Vec<usize>,
}

impl<'a> Engine<'a> {
    /// `steps_done` is the number of steps already applied to `tumor`; the
    /// next step is numbered `steps_done + 1`.
    pub fn new(tumor: TumorMap, organ: &'a OrganMap, rules: &'a GrowthRules, steps_done: u64) -> Result<Self> {
        if tumor.dims() != organ.dims() {
            return Err(Error::DimensionMismatch(format!(
                "tumor map {:?} vs organ map {:?}",
                tumor.dims(),
                organ.dims()
            )));
        }
        rules.validate(organ.level_count())?;
        let region = tumor.region();
        Ok(Self {
            organ,
            rules,
            rng: CounterRng::new(rules.rng_seed),
            tumor,
            region,
            steps_done,
            changes: Vec::new(),
            depth: Vec::new(),
            queue: Vec::new(),
        })
    }

    pub fn tumor(&self) -> &TumorMap {
        &self.tumor
    }

    pub fn into_tumor(self) -> TumorMap {
        self.tumor
    }

    pub fn steps_done(&self) -> u64 {
        self.steps_done
    }

    /// Applies one synchronous update.
    pub fn advance(&mut self) -> StepReport {
        self.steps_done += 1;
        let step = self.steps_done;
        let Some(region) = self.region else {
            return StepReport {
                step,
                tumor_voxels: 0,
                saturated_voxels: 0,
                necrotic_voxels: 0,
                grew: false,
                dead: false,
            };
        };
        let dims = self.tumor.dims();
        let rules = self.rules;
        let mult = &rules.level_multiplier;

        // proliferation and invasion, reading only pre-step densities
        self.changes.clear();
        {
            let density = self.tumor.density.data();
            for c in region.expand(1, dims).iter() {
                let i = grid::index(dims, c);
                let d = density[i];
                let level = self.organ.level(i) as usize;
                if d >= 1 {
                    if d < MAX_DENSITY {
                        let p = rules.p_grow * mult[level];
                        if self.rng.bernoulli(p, [step, PHASE_PROLIFERATE, i as u64, 0]) {
                            self.changes.push(i);
                        }
                    }
                } else if level >= 1 {
                    let p = rules.p_invade * mult[level];
                    if p <= 0.0 {
                        continue;
                    }
                    for dir in 0..6 {
                        let Some(n) = grid::neighbor(dims, c, dir) else {
                            continue;
                        };
                        if density[n] >= rules.invade_threshold
                            && self.rng.bernoulli(p, [step, PHASE_INVADE, i as u64, dir as u64])
                        {
                            self.changes.push(i);
                            break;
                        }
                    }
                }
            }
        }
        let grew = !self.changes.is_empty();
        let mut region = region;
        {
            let density = self.tumor.density.data_mut();
            for &i in &self.changes {
                density[i] += 1;
                if density[i] == 1 {
                    region.include(grid::coords(dims, i));
                }
            }
        }
        self.region = Some(region);

        self.classify(region);
        self.report(region, step, grew)
    }

    fn classify(&mut self, region: Region) {
        let dims = self.tumor.dims();
        let ext = region.extent();
        let local = |c: Coord| (c[0] - region.lo[0]) + ext[0] * ((c[1] - region.lo[1]) + ext[1] * (c[2] - region.lo[2]));

        // active/quiescent from post-step densities
        let mut any_candidate = false;
        {
            let density = self.tumor.density.data();
            let phase = self.tumor.phase.data_mut();
            for c in region.iter() {
                let i = grid::index(dims, c);
                if density[i] == 0 || phase[i] == Phase::Necrotic as u8 {
                    continue;
                }
                let exposed = (0..6).any(|d| {
                    grid::neighbor(dims, c, d).is_some_and(|n| density[n] == 0 && self.organ.level(n) >= 1)
                });
                phase[i] = if exposed {
                    Phase::Active as u8
                } else {
                    if density[i] == MAX_DENSITY {
                        any_candidate = true;
                    }
                    Phase::Quiescent as u8
                };
            }
        }
        if !any_candidate {
            return;
        }

        // erosion depth within the saturated set: L1 distance to the nearest
        // unsaturated or out-of-grid voxel, found by BFS from the surface
        let n_local = ext[0] * ext[1] * ext[2];
        self.depth.clear();
        self.depth.resize(n_local, 0);
        self.queue.clear();
        let density = self.tumor.density.data();
        let saturated = |i: usize| density[i] == MAX_DENSITY;
        for c in region.iter() {
            let i = grid::index(dims, c);
            if !saturated(i) {
                continue;
            }
            let surface = (0..6).any(|d| match grid::neighbor(dims, c, d) {
                Some(n) => !saturated(n),
                None => true,
            });
            if surface {
                self.depth[local(c)] = 1;
                self.queue.push(i);
            }
        }
        let mut head = 0;
        while head < self.queue.len() {
            let i = self.queue[head];
            head += 1;
            let c = grid::coords(dims, i);
            let di = self.depth[local(c)];
            for d in 0..6 {
                if let Some(nc) = grid::offset(dims, c, grid::NEIGHBORS6[d]) {
                    let n = grid::index(dims, nc);
                    if saturated(n) && self.depth[local(nc)] == 0 {
                        self.depth[local(nc)] = di + 1;
                        self.queue.push(n);
                    }
                }
            }
        }
        let phase = self.tumor.phase.data_mut();
        for c in region.iter() {
            let i = grid::index(dims, c);
            if phase[i] == Phase::Quiescent as u8
                && density[i] == MAX_DENSITY
                && self.depth[local(c)] >= self.rules.necrosis_depth
            {
                phase[i] = Phase::Necrotic as u8;
            }
        }
    }

    fn report(&self, region: Region, step: u64, grew: bool) -> StepReport {
        let dims = self.tumor.dims();
        let (mut tumor, mut sat, mut nec) = (0, 0, 0);
        let density = self.tumor.density.data();
        let phase = self.tumor.phase.data();
        for c in region.iter() {
            let i = grid::index(dims, c);
            if density[i] > 0 {
                tumor += 1;
                if density[i] == MAX_DENSITY {
                    sat += 1;
                }
                if phase[i] == Phase::Necrotic as u8 {
                    nec += 1;
                }
            }
        }
        StepReport {
            step,
            tumor_voxels: tumor,
            saturated_voxels: sat,
            necrotic_voxels: nec,
            grew,
            dead: false,
        }
    }
}

/// One synchronous update of `tumor`, numbered `step_number` (>= 1) for the
/// purpose of random-stream keys.
pub fn step(tumor: &TumorMap, organ: &OrganMap, rules: &GrowthRules, step_number: u64) -> Result<(TumorMap, StepReport)> {
    let mut engine = Engine::new(tumor.clone(), organ, rules, step_number.saturating_sub(1))?;
    let report = engine.advance();
    Ok((engine.into_tumor(), report))
}

/// Grows a lesion from `seed` until its volume reaches `target_volume_mm3`,
/// the step cap is hit, or growth stalls for `death_stall_steps` steps.
pub fn grow_lesion(organ: &OrganMap, seed: Coord, rules: &GrowthRules, target_volume_mm3: f64) -> Result<GrowthOutcome> {
    ensure(target_volume_mm3 > 0.0, || format!("target volume {target_volume_mm3} must be > 0"))?;
    let tumor = init_tumor_map(organ, seed)?;
    let voxel_mm3 = organ.levels().voxel_volume_mm3();
    let target_unreachable = target_volume_mm3 > organ.tissue_voxels() as f64 * voxel_mm3;

    let mut engine = Engine::new(tumor, organ, rules, 0)?;
    let mut reports = Vec::new();
    let mut stall = 0u32;
    let mut voxels = 1usize;
    let termination = loop {
        if voxels as f64 * voxel_mm3 >= target_volume_mm3 {
            break Termination::TargetReached;
        }
        if engine.steps_done() >= rules.max_steps as u64 {
            break Termination::MaxSteps;
        }
        let mut report = engine.advance();
        voxels = report.tumor_voxels;
        stall = if report.grew { 0 } else { stall + 1 };
        let died = rules.death_stall_steps > 0 && stall >= rules.death_stall_steps;
        report.dead = died;
        reports.push(report);
        if died {
            break Termination::Died;
        }
    };
    if target_unreachable {
        log::warn!("target volume {target_volume_mm3:.1} mm3 exceeds available tissue; grew to exhaustion");
    }
    Ok(GrowthOutcome {
        tumor: engine.into_tumor(),
        reports,
        termination,
        target_unreachable,
    })
}

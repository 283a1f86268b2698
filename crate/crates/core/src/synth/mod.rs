//! Deterministic synthetic sequences with exact ground truth.
//!
//! A camera moves through an analytic scene (box room or plane set); depth is
//! rendered by ray intersection. Spheres play the dynamic instances: one
//! attached to the camera as a hand, others resting near the scene center
//! until their onset and moving afterwards. Every chunk after the first sees
//! the world through its own Sim(3) drift, so stitching has a known answer.

pub mod scene;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{
    frame_file_name, save_depth, save_manifest, save_mask, save_pointcloud, save_poses,
    save_track_index, Category, ChunkParams, ChunkRecord, EvalMaskDirs, EvalMaskKind, FrameMasks,
    FrameRecord, InMemoryMasks, ManifestDoc, Track, TrackId, TrackIndex,
};
use crate::model::{axis_angle, BinaryMask, ChunkPlan, DepthFrame, Intrinsics, PointCloud, Pose, Sim3};
use crate::prior::{footprint_masks, suppression_masks, ObjectFilter, SuppressionMode};
use crate::sequence::InMemorySequence;
use crate::stitch::{back_project, plan_chunks, umeyama, voxel_subsample, PixelFilter};

pub use scene::{intersect_sphere, look_at, Plane, SceneKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Trajectory {
    /// Circle of `radius` around the origin, swept over `sweep_deg`, looking
    /// at `target`. `bob` adds a vertical oscillation.
    Arc {
        radius: f64,
        sweep_deg: f64,
        height: f64,
        bob: f64,
        target: [f64; 3],
    },
    /// Back-and-forth rows along x, advancing in z, looking along +z.
    Lawnmower {
        rows: usize,
        row_length: f64,
        row_spacing: f64,
        height: f64,
        bob: f64,
    },
}

impl Default for Trajectory {
    fn default() -> Self {
        Trajectory::Arc {
            radius: 2.5,
            sweep_deg: 120.0,
            height: 0.0,
            bob: 0.15,
            target: [0.0, -0.3, 0.0],
        }
    }
}

impl Trajectory {
    fn pose(&self, i: usize, n: usize) -> Result<Pose> {
        let s = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let up = Vector3::y();
        match *self {
            Trajectory::Arc {
                radius,
                sweep_deg,
                height,
                bob,
                target,
            } => {
                let theta = (sweep_deg * s - 0.5 * sweep_deg).to_radians() - std::f64::consts::FRAC_PI_2;
                let y = height + bob * (4.0 * std::f64::consts::PI * s).sin();
                let eye = Vector3::new(radius * theta.cos(), y, radius * theta.sin());
                look_at(&eye, &Vector3::from(target), &up)
            }
            Trajectory::Lawnmower {
                rows,
                row_length,
                row_spacing,
                height,
                bob,
            } => {
                let rows = rows.max(1);
                let pos = s * rows as f64;
                let row = (pos.floor() as usize).min(rows - 1);
                let along = pos - row as f64;
                let along = if row.is_multiple_of(2) { along } else { 1.0 - along };
                let x = (along - 0.5) * row_length;
                let z = -0.5 * row_spacing * (rows - 1) as f64 + row as f64 * row_spacing;
                let y = height + bob * (6.0 * std::f64::consts::PI * s).sin();
                let eye = Vector3::new(x, y, z);
                look_at(&eye, &(eye + Vector3::new(0.0, 0.0, 1.0)), &up)
            }
        }
    }
}

/// Per-chunk drift ranges: scale in `1 ± scale_jitter`, rotation angle in
/// `±rotation_deg` about a random axis, translation components in `±translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftConfig {
    pub scale_jitter: f64,
    pub rotation_deg: f64,
    pub translation: f64,
}

impl Default for DriftConfig {
    fn default() -> Self {
        Self {
            scale_jitter: 0.1,
            rotation_deg: 5.0,
            translation: 0.5,
        }
    }
}

impl DriftConfig {
    pub fn none() -> Self {
        Self {
            scale_jitter: 0.0,
            rotation_deg: 0.0,
            translation: 0.0,
        }
    }
}

/// A sphere at rest near the scene center until `onset`, then orbiting its
/// rest position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectBlob {
    pub radius: f64,
    pub onset: usize,
    /// Orbit radius after onset.
    pub motion: f64,
}

/// A sphere fixed in camera coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandBlob {
    pub radius: f64,
    pub offset: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub frame_count: usize,
    pub chunk_length: usize,
    pub overlap: usize,
    pub fps: f64,
    pub scene: SceneKind,
    pub trajectory: Trajectory,
    pub drift: DriftConfig,
    pub hand: Option<HandBlob>,
    pub objects: Vec<ObjectBlob>,
    /// Standard deviation of Gaussian noise added to chunk depths.
    pub depth_noise: f64,
    /// Reject trajectories whose overlap centers are collinear.
    pub require_noncollinear: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            width: 64,
            height: 48,
            focal: 50.0,
            frame_count: 160,
            chunk_length: 40,
            overlap: 20,
            fps: 30.0,
            scene: SceneKind::default(),
            trajectory: Trajectory::default(),
            drift: DriftConfig::default(),
            hand: Some(HandBlob {
                radius: 0.12,
                offset: [0.25, 0.2, 0.6],
            }),
            objects: vec![
                ObjectBlob {
                    radius: 0.35,
                    onset: 30,
                    motion: 0.4,
                },
                ObjectBlob {
                    radius: 0.3,
                    onset: 90,
                    motion: 0.5,
                },
            ],
            depth_noise: 0.0,
            require_noncollinear: true,
        }
    }
}

impl SynthConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        Intrinsics::new(
            self.focal,
            self.focal,
            self.width as f64 / 2.0,
            self.height as f64 / 2.0,
            self.width,
            self.height,
        )
    }

    fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        let d = &self.drift;
        let finite = [d.scale_jitter, d.rotation_deg, d.translation, self.depth_noise, self.fps];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("synthetic parameters must be finite".into()));
        }
        if !(0.0..1.0).contains(&d.scale_jitter) || d.translation < 0.0 || d.rotation_deg < 0.0 {
            return Err(Error::Config("drift jitter must be non-negative and scale jitter below 1".into()));
        }
        if self.depth_noise < 0.0 {
            return Err(Error::Config("depth noise must be non-negative".into()));
        }
        for o in &self.objects {
            if o.onset >= self.frame_count || !(o.radius > 0.0) {
                return Err(Error::Config(format!(
                    "object blob needs a positive radius and an onset below {}",
                    self.frame_count
                )));
            }
        }
        Ok(())
    }
}

/// Everything a synthetic run produces, with the ground truth behind it.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub config: SynthConfig,
    pub intrinsics: Intrinsics,
    pub plans: Vec<ChunkPlan>,
    /// Ground-truth camera-to-world pose per frame.
    pub gt_poses: Vec<Pose>,
    /// Injected drift `G_c` per chunk: local = `G_c⁻¹` applied to ground truth.
    pub drift: Vec<Sim3>,
    pub chunk_poses: Vec<BTreeMap<usize, Pose>>,
    /// Noise-free ground-truth depth (blobs included) per frame.
    pub gt_depth: Vec<DepthFrame>,
    /// Depth of each chunk in its own drifted frame.
    pub chunk_depths: Vec<BTreeMap<usize, DepthFrame>>,
    /// Static scene surfaces seen by the camera, ground-truth frame.
    pub scene_cloud: PointCloud,
    pub tracks: TrackIndex,
    pub masks: InMemoryMasks,
    pub instantaneous: Vec<BinaryMask>,
    pub footprint: Vec<BinaryMask>,
}

const HAND_ID: TrackId = 1;

fn object_id(i: usize) -> TrackId {
    10 + i as TrackId
}

struct ObjectState {
    rest: Vector3<f64>,
    phase: f64,
}

fn object_center(blob: &ObjectBlob, state: &ObjectState, t: usize) -> Vector3<f64> {
    if t < blob.onset {
        return state.rest;
    }
    let a = state.phase + 0.15 * (t - blob.onset) as f64;
    state.rest + blob.motion * Vector3::new(a.cos() - state.phase.cos(), 0.0, a.sin() - state.phase.sin())
}

struct Rendered {
    depth: Vec<f64>,
    static_depth: Vec<f64>,
    masks: FrameMasks,
}

fn render(
    cfg: &SynthConfig,
    k: &Intrinsics,
    pose: &Pose,
    t: usize,
    objects: &[ObjectState],
) -> Rendered {
    let o = pose.center();
    let mut spheres: Vec<(TrackId, Vector3<f64>, f64)> = Vec::new();
    if let Some(h) = &cfg.hand {
        spheres.push((HAND_ID, pose.transform_point(&Vector3::from(h.offset)), h.radius));
    }
    for (i, (blob, state)) in cfg.objects.iter().zip(objects).enumerate() {
        spheres.push((object_id(i), object_center(blob, state, t), blob.radius));
    }
    let n = k.pixel_count();
    let mut depth = vec![0.0; n];
    let mut static_depth = vec![0.0; n];
    let mut bits: BTreeMap<TrackId, Vec<bool>> =
        spheres.iter().map(|s| (s.0, vec![false; n])).collect();
    for v in 0..k.height {
        for u in 0..k.width {
            let idx = v * k.width + u;
            let d = pose.rotation() * k.unproject(u, v, 1.0);
            let base = cfg.scene.intersect(&o, &d);
            static_depth[idx] = base.unwrap_or(0.0);
            let mut best = base.map(|t| (t, None));
            for (id, c, r) in &spheres {
                if let Some(ts) = intersect_sphere(&o, &d, c, *r) {
                    if best.is_none_or(|(b, _)| ts < b) {
                        best = Some((ts, Some(*id)));
                    }
                }
            }
            if let Some((z, id)) = best {
                depth[idx] = z;
                if let Some(id) = id {
                    bits.get_mut(&id).expect("sphere id")[idx] = true;
                }
            }
        }
    }
    let masks = bits
        .into_iter()
        .filter(|(_, b)| b.iter().any(|x| *x))
        .map(|(id, b)| (id, BinaryMask::from_bits(k.width, k.height, b).expect("raster size")))
        .collect();
    Rendered {
        depth,
        static_depth,
        masks,
    }
}

fn draw_drift(rng: &mut ChaCha8Rng, d: &DriftConfig) -> Sim3 {
    let mut sym = |a: f64| if a > 0.0 { rng.random_range(-a..=a) } else { 0.0 };
    let scale = 1.0 + sym(d.scale_jitter);
    let angle = sym(d.rotation_deg).to_radians();
    let t = Vector3::new(sym(d.translation), sym(d.translation), sym(d.translation));
    let axis = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    Sim3::new(scale, axis_angle(&axis, angle), t).expect("drift is a valid similarity")
}

fn noise_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream + 1);
    rng
}

/// Generates a full synthetic sequence. The same config always yields
/// bit-identical output.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let k = cfg.intrinsics()?;
    let t_count = cfg.frame_count;
    let plans = plan_chunks(t_count, cfg.chunk_length, cfg.overlap)?;
    let gt_poses: Vec<Pose> = (0..t_count)
        .map(|i| cfg.trajectory.pose(i, t_count))
        .collect::<Result<_>>()?;

    if cfg.require_noncollinear {
        for p in plans.iter().skip(1) {
            let centers: Vec<_> = p.overlap().map(|f| gt_poses[f].center()).collect();
            if let Err(e) = umeyama(&centers, &centers) {
                return Err(Error::Config(format!(
                    "trajectory is degenerate over the overlap of chunk {}: {e}",
                    p.chunk_id
                )));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let drift: Vec<Sim3> = plans
        .iter()
        .map(|p| if p.chunk_id == 0 { Sim3::identity() } else { draw_drift(&mut rng, &cfg.drift) })
        .collect();
    let objects: Vec<ObjectState> = cfg
        .objects
        .iter()
        .map(|_| ObjectState {
            rest: Vector3::new(rng.random_range(-0.8..0.8), rng.random_range(-0.5..0.3), rng.random_range(-0.8..0.8)),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        })
        .collect();

    let rendered: Vec<Rendered> = (0..t_count)
        .into_par_iter()
        .map(|t| render(cfg, &k, &gt_poses[t], t, &objects))
        .collect();

    let gt_depth: Vec<DepthFrame> = rendered
        .iter()
        .enumerate()
        .map(|(t, r)| DepthFrame::new(t, r.depth.clone(), k))
        .collect::<Result<_>>()?;

    let noise = Normal::new(0.0, cfg.depth_noise.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut chunk_poses = Vec::with_capacity(plans.len());
    let mut chunk_depths = Vec::with_capacity(plans.len());
    for (p, g) in plans.iter().zip(&drift) {
        let g_inv = g.inverse();
        chunk_poses.push(p.frames().map(|f| (f, g_inv.compose_pose(&gt_poses[f]))).collect());
        let depths: BTreeMap<usize, DepthFrame> = p
            .frames()
            .into_par_iter()
            .map(|f| {
                let mut rng = noise_rng(cfg.seed, (p.chunk_id * t_count + f) as u64);
                let values = rendered[f]
                    .depth
                    .iter()
                    .map(|&z| {
                        if z > 0.0 && cfg.depth_noise > 0.0 {
                            (z + noise.sample(&mut rng)) / g.scale()
                        } else {
                            z / g.scale()
                        }
                    })
                    .collect();
                Ok((f, DepthFrame::new(f, values, k)?))
            })
            .collect::<Result<_>>()?;
        chunk_depths.push(depths);
    }

    let mut scene_points = Vec::new();
    for (t, r) in rendered.iter().enumerate() {
        let d = DepthFrame::new(t, r.static_depth.clone(), k)?;
        scene_points.extend(back_project(&d, &gt_poses[t], PixelFilter::All)?.into_points());
    }
    let scene_cloud = voxel_subsample(&PointCloud::new(scene_points)?, 0.05)?;

    let mut tracks = Vec::new();
    if cfg.hand.is_some() {
        tracks.push(Track {
            track_id: HAND_ID,
            name: "hand".into(),
            category: Category::Hand,
            onset_frame: None,
            mask_pattern: "masks/{track_id}/{frame:06}.pgm".into(),
            bbox: None,
        });
    }
    for (i, o) in cfg.objects.iter().enumerate() {
        tracks.push(Track {
            track_id: object_id(i),
            name: format!("object_{i}"),
            category: Category::Object,
            onset_frame: Some(o.onset),
            mask_pattern: "masks/{track_id}/{frame:06}.pgm".into(),
            bbox: None,
        });
    }
    let tracks = TrackIndex { tracks };
    let masks = InMemoryMasks {
        frames: rendered
            .into_iter()
            .enumerate()
            .map(|(t, r)| (t, r.masks))
            .collect(),
    };
    let dims = (k.width, k.height);
    let instantaneous = suppression_masks(
        SuppressionMode::DynamicOnly,
        &tracks,
        &masks,
        t_count,
        dims,
        ObjectFilter::None,
    )?;
    let footprint = footprint_masks(&instantaneous)?;

    Ok(SynthOutput {
        config: cfg.clone(),
        intrinsics: k,
        plans,
        gt_poses,
        drift,
        chunk_poses,
        gt_depth,
        chunk_depths,
        scene_cloud,
        tracks,
        masks,
        instantaneous,
        footprint,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DriftDoc {
    chunk: usize,
    s: f64,
    #[serde(rename = "R")]
    r: [f64; 9],
    t: [f64; 3],
}

impl SynthOutput {
    pub fn sequence(&self) -> InMemorySequence {
        InMemorySequence {
            plans: self.plans.clone(),
            poses: self.chunk_poses.clone(),
            depths: self.chunk_depths.clone(),
            instantaneous: self.instantaneous.clone(),
            footprint: self.footprint.clone(),
        }
    }

    pub fn eval_masks(&self, kind: EvalMaskKind) -> &[BinaryMask] {
        match kind {
            EvalMaskKind::Instantaneous => &self.instantaneous,
            EvalMaskKind::Footprint => &self.footprint,
        }
    }

    /// Writes the dataset (manifest, depths, poses, tracks, masks, evaluation
    /// masks and ground truth) under `out`.
    pub fn write(&self, out: impl AsRef<Path>) -> Result<()> {
        let out = out.as_ref();
        let mkdir = |p: &Path| fs::create_dir_all(p).map_err(|e| Error::io(p, e));
        mkdir(&out.join("frames/depth"))?;
        mkdir(&out.join("ground_truth"))?;
        for kind in [EvalMaskKind::Instantaneous, EvalMaskKind::Footprint] {
            mkdir(&out.join("eval").join(kind.dir_name()))?;
        }
        for t in &self.tracks.tracks {
            mkdir(&out.join("masks").join(t.track_id.to_string()))?;
        }

        let frames: Vec<FrameRecord> = (0..self.gt_depth.len())
            .map(|t| FrameRecord {
                frame_id: t,
                depth: format!("frames/depth/{}", frame_file_name(t, "pfm")),
                intrinsics: self.intrinsics,
            })
            .collect();
        frames
            .par_iter()
            .zip(&self.gt_depth)
            .try_for_each(|(rec, d)| save_depth(d, out.join(&rec.depth)))?;

        let mut chunks = Vec::with_capacity(self.plans.len());
        for (c, plan) in self.plans.iter().enumerate() {
            let dir = format!("chunks/c{c:03}");
            mkdir(&out.join(&dir).join("depth"))?;
            let poses: Vec<(usize, Pose)> = self.chunk_poses[c].iter().map(|(f, p)| (*f, *p)).collect();
            save_poses(&poses, out.join(&dir).join("poses.jsonl"))?;
            plan.frames().collect::<Vec<_>>().par_iter().try_for_each(|f| {
                save_depth(
                    &self.chunk_depths[c][f],
                    out.join(&dir).join("depth").join(frame_file_name(*f, "pfm")),
                )
            })?;
            chunks.push(ChunkRecord {
                chunk_id: c,
                poses: format!("{dir}/poses.jsonl"),
                depth: Some(format!("{dir}/depth/{{frame:06}}.pfm")),
            });
        }

        for (t, masks) in &self.masks.frames {
            for (id, m) in masks {
                save_mask(m, out.join("masks").join(id.to_string()).join(frame_file_name(*t, "pgm")))?;
            }
        }
        save_track_index(&self.tracks, out.join("tracks.json"))?;

        for kind in [EvalMaskKind::Instantaneous, EvalMaskKind::Footprint] {
            let dir = out.join("eval").join(kind.dir_name());
            self.eval_masks(kind)
                .par_iter()
                .enumerate()
                .try_for_each(|(t, m)| save_mask(m, dir.join(frame_file_name(t, "pgm"))))?;
        }

        let gt: Vec<(usize, Pose)> = self.gt_poses.iter().copied().enumerate().collect();
        save_poses(&gt, out.join("ground_truth/poses.jsonl"))?;
        let drift: Vec<DriftDoc> = self
            .drift
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let r = s.rotation();
                DriftDoc {
                    chunk: c,
                    s: s.scale(),
                    r: [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]],
                    t: [s.translation().x, s.translation().y, s.translation().z],
                }
            })
            .collect();
        let p = out.join("ground_truth/drift.json");
        fs::write(&p, serde_json::to_string_pretty(&drift).expect("drift serializes") + "\n")
            .map_err(|e| Error::io(&p, e))?;
        save_pointcloud(&self.scene_cloud, out.join("ground_truth/scene.ply"))?;
        let p = out.join("ground_truth/config.json");
        fs::write(&p, serde_json::to_string_pretty(&self.config).expect("config serializes") + "\n")
            .map_err(|e| Error::io(&p, e))?;

        let doc = ManifestDoc {
            frame_count: self.gt_depth.len(),
            fps: self.config.fps,
            chunking: ChunkParams {
                chunk_length: self.config.chunk_length,
                overlap: self.config.overlap,
            },
            frames,
            chunks,
            tracks: "tracks.json".into(),
            eval_masks: Some(EvalMaskDirs {
                union_mask_dynamics: format!("eval/{}", EvalMaskKind::Instantaneous.dir_name()),
                union_mask_fulltime: format!("eval/{}", EvalMaskKind::Footprint.dir_name()),
            }),
        };
        save_manifest(&doc, out.join("manifest.json"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stitch::stitch;

    fn small() -> SynthConfig {
        SynthConfig {
            width: 32,
            height: 24,
            focal: 25.0,
            frame_count: 50,
            chunk_length: 20,
            overlap: 10,
            objects: vec![
                ObjectBlob { radius: 0.35, onset: 10, motion: 0.4 },
                ObjectBlob { radius: 0.3, onset: 30, motion: 0.5 },
            ],
            ..Default::default()
        }
    }

    #[test]
    fn same_seed_same_output() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.chunk_depths, b.chunk_depths);
        assert_eq!(a.chunk_poses, b.chunk_poses);
        assert_eq!(a.instantaneous, b.instantaneous);
        let c = generate(&SynthConfig { seed: 8, ..small() }).unwrap();
        assert_ne!(a.drift, c.drift);
    }

    #[test]
    fn depth_lies_on_room_walls_or_blobs() {
        let out = generate(&SynthConfig { hand: None, objects: vec![], ..small() }).unwrap();
        let SceneKind::BoxRoom { half_extents } = out.config.scene.clone() else { unreachable!() };
        for (t, d) in out.gt_depth.iter().enumerate() {
            let cloud = back_project(d, &out.gt_poses[t], PixelFilter::All).unwrap();
            assert_eq!(cloud.len(), d.values().len());
            for p in cloud.points() {
                let on_wall = (0..3).any(|a| (p[a].abs() - half_extents[a]).abs() < 1e-9);
                let inside = (0..3).all(|a| p[a].abs() <= half_extents[a] + 1e-9);
                assert!(on_wall && inside, "{p:?}");
            }
        }
    }

    #[test]
    fn masks_cover_exactly_the_overridden_pixels() {
        let out = generate(&small()).unwrap();
        for (t, d) in out.gt_depth.iter().enumerate() {
            let pose = &out.gt_poses[t];
            let masks = &out.masks.frames[&t];
            for v in 0..d.height() {
                for u in 0..d.width() {
                    let dir = pose.rotation() * out.intrinsics.unproject(u, v, 1.0);
                    let wall = out.config.scene.intersect(&pose.center(), &dir).unwrap();
                    let overridden = d.at(u, v) != wall;
                    let masked = masks.values().any(|m| m.get(u, v));
                    assert_eq!(overridden, masked, "frame {t} pixel ({u},{v})");
                }
            }
        }
        assert!(out.masks.frames.values().any(|m| m.contains_key(&HAND_ID)));
    }

    #[test]
    fn stitching_recovers_injected_drift() {
        let out = generate(&small()).unwrap();
        let res = stitch(&out.chunk_poses, &out.plans).unwrap();
        for (s, g) in res.transforms.iter().zip(&out.drift) {
            assert!((s.to_matrix() - g.to_matrix()).abs().max() < 1e-9);
        }
        for t in &res.transitions {
            assert!(t.e_cen < 1e-9);
        }
    }

    #[test]
    fn zero_drift_gives_identity() {
        let out = generate(&SynthConfig { drift: DriftConfig::none(), ..small() }).unwrap();
        let res = stitch(&out.chunk_poses, &out.plans).unwrap();
        for s in &res.transforms {
            assert!((s.to_matrix() - nalgebra::Matrix4::identity()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn raw_residual_grows_with_translation_jitter() {
        let raw = |tr: f64| {
            let cfg = SynthConfig {
                drift: DriftConfig { scale_jitter: 0.0, rotation_deg: 0.0, translation: tr },
                ..small()
            };
            let out = generate(&cfg).unwrap();
            let res = stitch(&out.chunk_poses, &out.plans).unwrap();
            res.transitions.iter().map(|t| t.raw_rmse).sum::<f64>()
        };
        let (a, b, c) = (raw(0.1), raw(0.5), raw(2.0));
        assert!(a < b && b < c, "{a} {b} {c}");
    }

    #[test]
    fn degenerate_trajectory_rejected() {
        let cfg = SynthConfig {
            trajectory: Trajectory::Lawnmower { rows: 1, row_length: 2.0, row_spacing: 0.0, height: 0.0, bob: 0.0 },
            ..small()
        };
        assert!(matches!(generate(&cfg), Err(Error::Config(_))));
        let ok = SynthConfig {
            trajectory: Trajectory::Lawnmower { rows: 2, row_length: 2.0, row_spacing: 0.5, height: 0.0, bob: 0.1 },
            ..small()
        };
        generate(&ok).unwrap();
    }
}

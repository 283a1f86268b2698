//! Interaction-activated dynamic prior.
//!
//! Hands are suppressed in every frame. An object is suppressed from its
//! interaction onset onward: the activated set at frame `t` is every object
//! whose onset is `<= t`, recomputed from the onsets each frame. An optional
//! near-hand filter keeps only activated instances that overlap the dilated
//! hand region by at least a threshold fraction of their own area.

pub mod morphology;

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::pgm::{load_mask, save_mask};
use crate::ingest::tracks::{FrameMasks, MaskSource, TrackId, TrackIndex};
use crate::model::BinaryMask;

pub use morphology::dilate;

/// Proximity filter parameters: dilation radius in pixels and minimum overlap fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearHandParams {
    pub radius: usize,
    pub threshold: f64,
}

impl Default for NearHandParams {
    fn default() -> Self {
        Self {
            radius: 3,
            threshold: 0.5,
        }
    }
}

impl NearHandParams {
    pub fn new(radius: usize, threshold: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Config(format!(
                "near-hand threshold must lie in [0, 1], got {threshold}"
            )));
        }
        Ok(Self { radius, threshold })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectFilter {
    #[default]
    None,
    NearHand(NearHandParams),
}

/// Activation bookkeeping at one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivationState {
    pub frame: usize,
    pub activated: BTreeSet<TrackId>,
    /// Activated instances that also pass the object filter at this frame.
    pub filtered: BTreeSet<TrackId>,
}

/// Objects whose onset is at or before `t`. Hands are never part of this set.
pub fn activated_set(tracks: &TrackIndex, t: usize) -> BTreeSet<TrackId> {
    tracks
        .objects()
        .filter(|o| matches!(o.onset_frame, Some(a) if a <= t))
        .map(|o| o.track_id)
        .collect()
}

/// True when `|instance ∩ dilate(hand, r)| / |instance| >= threshold`.
pub fn near_hand_pass(
    instance: &BinaryMask,
    hand_union: &BinaryMask,
    params: &NearHandParams,
) -> Result<bool> {
    let dilated = dilate(hand_union, params.radius);
    near_hand_pass_dilated(instance, &dilated, params.threshold)
}

fn near_hand_pass_dilated(instance: &BinaryMask, dilated_hand: &BinaryMask, threshold: f64) -> Result<bool> {
    let area = instance.count();
    if area == 0 {
        return Err(Error::DegenerateInstance);
    }
    let inside = instance.intersection_count(dilated_hand)?;
    Ok(inside as f64 / area as f64 >= threshold)
}

fn check_dims(masks: &FrameMasks, dims: (usize, usize)) -> Result<()> {
    for (id, m) in masks {
        if m.dims() != dims {
            return Err(Error::Consistency(format!(
                "mask of track {id} is {}x{}, frame is {}x{}",
                m.width(),
                m.height(),
                dims.0,
                dims.1
            )));
        }
    }
    Ok(())
}

/// Union of every hand instance visible in `masks`.
pub fn hand_union(tracks: &TrackIndex, masks: &FrameMasks, dims: (usize, usize)) -> Result<BinaryMask> {
    check_dims(masks, dims)?;
    let mut out = BinaryMask::new(dims.0, dims.1);
    for hand in tracks.hands() {
        if let Some(m) = masks.get(&hand.track_id) {
            out.union_with(m)?;
        }
    }
    Ok(out)
}

/// Applies `filter` to the candidate objects, returning those that survive.
/// Candidates without a (non-empty) mask at this frame are dropped: they
/// contribute no pixels either way.
fn filter_objects(
    candidates: &BTreeSet<TrackId>,
    masks: &FrameMasks,
    hands: &BinaryMask,
    filter: ObjectFilter,
) -> Result<BTreeSet<TrackId>> {
    let dilated = match filter {
        ObjectFilter::None => None,
        ObjectFilter::NearHand(p) => Some((dilate(hands, p.radius), p.threshold)),
    };
    let mut kept = BTreeSet::new();
    for id in candidates {
        let Some(m) = masks.get(id) else { continue };
        if m.is_empty() {
            continue;
        }
        let keep = match &dilated {
            None => true,
            Some((d, tau)) => near_hand_pass_dilated(m, d, *tau)?,
        };
        if keep {
            kept.insert(*id);
        }
    }
    Ok(kept)
}

pub fn activation_state(
    tracks: &TrackIndex,
    masks: &FrameMasks,
    t: usize,
    filter: ObjectFilter,
    dims: (usize, usize),
) -> Result<ActivationState> {
    let hands = hand_union(tracks, masks, dims)?;
    let activated = activated_set(tracks, t);
    let filtered = filter_objects(&activated, masks, &hands, filter)?;
    Ok(ActivationState {
        frame: t,
        activated,
        filtered,
    })
}

fn union_of(ids: &BTreeSet<TrackId>, masks: &FrameMasks, dims: (usize, usize)) -> Result<BinaryMask> {
    let mut out = BinaryMask::new(dims.0, dims.1);
    for id in ids {
        if let Some(m) = masks.get(id) {
            out.union_with(m)?;
        }
    }
    Ok(out)
}

/// Union of the activated (optionally near-hand filtered) object instances at `t`.
pub fn object_prior(
    tracks: &TrackIndex,
    masks: &FrameMasks,
    t: usize,
    filter: ObjectFilter,
    dims: (usize, usize),
) -> Result<BinaryMask> {
    let state = activation_state(tracks, masks, t, filter, dims)?;
    union_of(&state.filtered, masks, dims)
}

/// Final per-frame prior: hands in every frame, activated objects after onset.
pub fn dynamic_prior(
    tracks: &TrackIndex,
    masks: &FrameMasks,
    t: usize,
    filter: ObjectFilter,
    dims: (usize, usize),
) -> Result<BinaryMask> {
    let mut out = hand_union(tracks, masks, dims)?;
    out.union_with(&object_prior(tracks, masks, t, filter, dims)?)?;
    Ok(out)
}

/// Hands plus every object instance visible at `t`, ignoring onsets.
pub fn instantaneous_prior(
    tracks: &TrackIndex,
    masks: &FrameMasks,
    filter: ObjectFilter,
    dims: (usize, usize),
) -> Result<BinaryMask> {
    let hands = hand_union(tracks, masks, dims)?;
    let visible: BTreeSet<TrackId> = tracks.objects().map(|t| t.track_id).collect();
    let kept = filter_objects(&visible, masks, &hands, filter)?;
    let mut out = hands;
    out.union_with(&union_of(&kept, masks, dims)?)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuppressionMode {
    /// Hands and whatever instances are visible at `t`, no persistence.
    DynamicOnly,
    /// Hands always, objects from their onset onward.
    Cumulative,
}

/// Per-frame suppression masks for the whole sequence, computed in parallel.
pub fn suppression_masks(
    mode: SuppressionMode,
    tracks: &TrackIndex,
    source: &dyn MaskSource,
    frame_count: usize,
    dims: (usize, usize),
    filter: ObjectFilter,
) -> Result<Vec<BinaryMask>> {
    (0..frame_count)
        .into_par_iter()
        .map(|t| {
            let masks = source.masks_at(t)?;
            match mode {
                SuppressionMode::DynamicOnly => instantaneous_prior(tracks, &masks, filter, dims),
                SuppressionMode::Cumulative => dynamic_prior(tracks, &masks, t, filter, dims),
            }
        })
        .collect()
}

/// Running union: frame `t` holds every pixel active in any frame `<= t`.
pub fn footprint_masks(series: &[BinaryMask]) -> Result<Vec<BinaryMask>> {
    let mut out: Vec<BinaryMask> = Vec::with_capacity(series.len());
    for m in series {
        let next = match out.last() {
            Some(prev) => {
                let mut acc = prev.clone();
                acc.union_with(m)?;
                acc
            }
            None => m.clone(),
        };
        out.push(next);
    }
    Ok(out)
}

/// File name for the prior of one frame.
pub fn prior_file_name(frame: usize) -> String {
    format!("D_{frame:06}.pgm")
}

/// Writes one PGM per frame into `dir`, which must exist.
pub fn save_prior_series(series: &[BinaryMask], dir: &Path) -> Result<()> {
    series
        .par_iter()
        .enumerate()
        .try_for_each(|(t, m)| save_mask(m, dir.join(prior_file_name(t))))
}

/// Reads `frame_count` priors from `dir`, checking every raster against `dims`.
pub fn load_prior_series(dir: &Path, frame_count: usize, dims: (usize, usize)) -> Result<Vec<BinaryMask>> {
    (0..frame_count)
        .into_par_iter()
        .map(|t| {
            let m = load_mask(dir.join(prior_file_name(t)))?;
            if m.dims() != dims {
                return Err(Error::Consistency(format!(
                    "prior for frame {t} is {}x{}, expected {}x{}",
                    m.width(),
                    m.height(),
                    dims.0,
                    dims.1
                )));
            }
            Ok(m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::tracks::{Category, InMemoryMasks, Track};
    use proptest::prelude::*;

    const DIMS: (usize, usize) = (16, 12);

    fn track(id: TrackId, category: Category, onset: Option<usize>) -> Track {
        Track {
            track_id: id,
            name: format!("t{id}"),
            category,
            onset_frame: onset,
            mask_pattern: String::new(),
            bbox: None,
        }
    }

    fn rect(x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryMask {
        BinaryMask::from_fn(DIMS.0, DIMS.1, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1)
    }

    #[test]
    fn activation_examples() {
        let idx = TrackIndex {
            tracks: vec![
                track(1, Category::Object, Some(5)),
                track(2, Category::Object, Some(10)),
                track(9, Category::Hand, None),
            ],
        };
        assert!(activated_set(&idx, 0).is_empty());
        assert_eq!(activated_set(&idx, 7), BTreeSet::from([1]));
        assert_eq!(activated_set(&idx, 10), BTreeSet::from([1, 2]));
    }

    #[test]
    fn near_hand_examples() {
        let hand = rect(0, 0, 8, 8);
        let inside = rect(2, 2, 4, 4);
        let far = rect(12, 9, 14, 11);
        let p = NearHandParams::new(0, 1.0).unwrap();
        assert!(near_hand_pass(&inside, &hand, &p).unwrap());
        assert!(!near_hand_pass(&far, &hand, &NearHandParams::new(0, 0.1).unwrap()).unwrap());
        assert!(matches!(
            near_hand_pass(&BinaryMask::new(DIMS.0, DIMS.1), &hand, &p),
            Err(Error::DegenerateInstance)
        ));
        // exactly half the instance is inside: 0.5 passes, anything above does not
        let half = rect(6, 0, 10, 1);
        assert!(near_hand_pass(&half, &hand, &NearHandParams::new(0, 0.5).unwrap()).unwrap());
        assert!(!near_hand_pass(&half, &hand, &NearHandParams::new(0, 0.51).unwrap()).unwrap());
        // dilation by 2 pulls the whole strip in
        assert!(near_hand_pass(&half, &hand, &NearHandParams::new(2, 1.0).unwrap()).unwrap());
        assert!(NearHandParams::new(1, 1.5).is_err());
    }

    #[test]
    fn object_prior_examples() {
        let idx = TrackIndex {
            tracks: vec![track(1, Category::Object, Some(3)), track(2, Category::Object, Some(3))],
        };
        let masks = FrameMasks::from([(1, rect(0, 0, 2, 2)), (2, rect(5, 5, 8, 8))]);
        let before = object_prior(&idx, &masks, 2, ObjectFilter::None, DIMS).unwrap();
        assert_eq!(before.count(), 0);
        let after = object_prior(&idx, &masks, 3, ObjectFilter::None, DIMS).unwrap();
        assert_eq!(after.count(), 4 + 9);
    }

    #[test]
    fn size_mismatch_is_consistency_error() {
        let idx = TrackIndex {
            tracks: vec![track(1, Category::Object, Some(0))],
        };
        let masks = FrameMasks::from([(1, BinaryMask::new(3, 3))]);
        assert!(matches!(
            object_prior(&idx, &masks, 0, ObjectFilter::None, DIMS),
            Err(Error::Consistency(_))
        ));
    }

    #[test]
    fn hands_only_before_onsets() {
        let idx = TrackIndex {
            tracks: vec![track(1, Category::Hand, None), track(2, Category::Object, Some(4))],
        };
        let masks = FrameMasks::from([(1, rect(0, 0, 3, 3)), (2, rect(6, 6, 9, 9))]);
        let d = dynamic_prior(&idx, &masks, 1, ObjectFilter::None, DIMS).unwrap();
        assert_eq!(d, rect(0, 0, 3, 3));
    }

    #[test]
    fn no_tracks_gives_empty_series() {
        let idx = TrackIndex::default();
        let src = InMemoryMasks::default();
        for mode in [SuppressionMode::DynamicOnly, SuppressionMode::Cumulative] {
            let s = suppression_masks(mode, &idx, &src, 6, DIMS, ObjectFilter::None).unwrap();
            assert_eq!(s.len(), 6);
            assert!(s.iter().all(BinaryMask::is_empty));
        }
    }

    #[test]
    fn single_object_modes_differ_before_onset() {
        let idx = TrackIndex {
            tracks: vec![track(1, Category::Hand, None), track(2, Category::Object, Some(5))],
        };
        let hand = rect(0, 8, 4, 12);
        let obj = rect(8, 2, 12, 6);
        let mut src = InMemoryMasks::default();
        for t in 0..10 {
            src.frames.insert(t, FrameMasks::from([(1, hand.clone()), (2, obj.clone())]));
        }
        let dyn_only =
            suppression_masks(SuppressionMode::DynamicOnly, &idx, &src, 10, DIMS, ObjectFilter::None).unwrap();
        let cumul =
            suppression_masks(SuppressionMode::Cumulative, &idx, &src, 10, DIMS, ObjectFilter::None).unwrap();
        for t in 0..10 {
            let diff: Vec<(usize, usize)> = dyn_only[t]
                .active_pixels()
                .filter(|&(x, y)| !cumul[t].get(x, y))
                .collect();
            assert!(cumul[t].is_subset_of(&dyn_only[t]));
            if t < 5 {
                assert_eq!(diff, obj.active_pixels().collect::<Vec<_>>());
            } else {
                assert!(diff.is_empty(), "modes agree at saturation");
            }
        }
    }

    #[test]
    fn footprint_never_shrinks() {
        let series = vec![rect(0, 0, 2, 2), rect(4, 4, 5, 5), BinaryMask::new(DIMS.0, DIMS.1)];
        let fp = footprint_masks(&series).unwrap();
        assert_eq!(fp[2].count(), 5);
        for (f, s) in fp.iter().zip(&series) {
            assert!(s.is_subset_of(f));
        }
        assert!(fp[0].is_subset_of(&fp[1]) && fp[1].is_subset_of(&fp[2]));
    }

    prop_compose! {
        fn arb_scene()(
            onsets in prop::collection::vec(0usize..20, 1..5),
            hand_box in (0usize..12, 0usize..8, 1usize..5, 1usize..5),
            boxes in prop::collection::vec((0usize..14, 0usize..10, 1usize..4, 1usize..4, prop::bool::weighted(0.8)), 5),
        ) -> (TrackIndex, FrameMasks) {
            let mut tracks = vec![track(100, Category::Hand, None)];
            let mut masks = FrameMasks::new();
            let (hx, hy, hw, hh) = hand_box;
            masks.insert(100, rect(hx, hy, hx + hw, hy + hh));
            for (i, a) in onsets.iter().enumerate() {
                tracks.push(track(i as TrackId, Category::Object, Some(*a)));
                let (x, y, w, h, visible) = boxes[i];
                if visible {
                    masks.insert(i as TrackId, rect(x, y, x + w, y + h));
                }
            }
            (TrackIndex { tracks }, masks)
        }
    }

    proptest! {
        #[test]
        fn activation_is_monotone_and_matches_scan((idx, _) in arb_scene()) {
            for t in 0..25 {
                let a = activated_set(&idx, t);
                let b = activated_set(&idx, t + 1);
                prop_assert!(a.is_subset(&b));
                let scan: BTreeSet<TrackId> = idx.tracks.iter()
                    .filter(|tr| tr.category == Category::Object && tr.onset_frame.unwrap() <= t)
                    .map(|tr| tr.track_id)
                    .collect();
                prop_assert_eq!(a, scan);
            }
        }

        #[test]
        fn filter_extremes((idx, masks) in arb_scene(), r in 0usize..4, t in 0usize..25) {
            let plain = object_prior(&idx, &masks, t, ObjectFilter::None, DIMS).unwrap();
            let tau0 = ObjectFilter::NearHand(NearHandParams::new(r, 0.0).unwrap());
            prop_assert_eq!(object_prior(&idx, &masks, t, tau0, DIMS).unwrap(), plain.clone());

            let strict = ObjectFilter::NearHand(NearHandParams::new(0, 1.0).unwrap());
            let state = activation_state(&idx, &masks, t, strict, DIMS).unwrap();
            let hands = hand_union(&idx, &masks, DIMS).unwrap();
            for id in &state.activated {
                let contained = masks.get(id).is_some_and(|m| !m.is_empty() && m.is_subset_of(&hands));
                prop_assert_eq!(state.filtered.contains(id), contained);
            }
            prop_assert!(state.filtered.is_subset(&state.activated));
        }

        #[test]
        fn filtered_prior_is_subset((idx, masks) in arb_scene(), r in 0usize..4, tau in 0.0f64..=1.0, t in 0usize..25) {
            let plain = object_prior(&idx, &masks, t, ObjectFilter::None, DIMS).unwrap();
            let f = ObjectFilter::NearHand(NearHandParams::new(r, tau).unwrap());
            let filtered = object_prior(&idx, &masks, t, f, DIMS).unwrap();
            prop_assert!(filtered.is_subset_of(&plain));
        }

        #[test]
        fn prior_contains_hands_and_is_idempotent((idx, masks) in arb_scene(), t in 0usize..25) {
            let d1 = dynamic_prior(&idx, &masks, t, ObjectFilter::None, DIMS).unwrap();
            let d2 = dynamic_prior(&idx, &masks, t, ObjectFilter::None, DIMS).unwrap();
            prop_assert_eq!(&d1, &d2);
            prop_assert!(hand_union(&idx, &masks, DIMS).unwrap().is_subset_of(&d1));
        }

        #[test]
        fn stateless_matches_incremental((idx, masks) in arb_scene()) {
            // Incremental accumulator: add an object the first frame its onset is reached.
            let mut active: BTreeSet<TrackId> = BTreeSet::new();
            for t in 0..25 {
                for tr in idx.objects() {
                    if tr.onset_frame == Some(t) {
                        active.insert(tr.track_id);
                    }
                }
                let mut expected = hand_union(&idx, &masks, DIMS).unwrap();
                for id in &active {
                    if let Some(m) = masks.get(id) {
                        expected.union_with(m).unwrap();
                    }
                }
                prop_assert_eq!(dynamic_prior(&idx, &masks, t, ObjectFilter::None, DIMS).unwrap(), expected);
            }
        }
    }
}

//! Tracked instance index: which tracks exist, whether each is a hand or an
//! object, when each object's interaction begins, and where its masks live.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::pgm::load_mask;
use crate::model::BinaryMask;

pub type TrackId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Hand,
    Object,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Track {
    pub track_id: TrackId,
    pub name: String,
    pub category: Category,
    /// First frame at which the object is touched or moved. Hands have none.
    #[serde(default)]
    pub onset_frame: Option<usize>,
    /// Path pattern relative to the index file; `{frame:06}`, `{frame}` and
    /// `{track_id}` are substituted.
    pub mask_pattern: String,
    /// Optional coarse localization `(x, y, w, h)` carried through from the prompt.
    #[serde(default, rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackIndex {
    pub tracks: Vec<Track>,
}

/// Instance masks visible at one frame. A track without an entry has no mask there.
pub type FrameMasks = BTreeMap<TrackId, BinaryMask>;

pub fn expand_pattern(pattern: &str, frame: usize, track_id: Option<TrackId>) -> String {
    let mut s = pattern
        .replace("{frame:06}", &format!("{frame:06}"))
        .replace("{frame}", &frame.to_string());
    if let Some(id) = track_id {
        s = s.replace("{track_id}", &id.to_string());
    }
    s
}

impl TrackIndex {
    pub fn validate(&self, frame_count: usize) -> Result<()> {
        let mut ids = BTreeSet::new();
        for t in &self.tracks {
            if !ids.insert(t.track_id) {
                return Err(Error::Validation(format!("duplicate track_id {}", t.track_id)));
            }
            match (t.category, t.onset_frame) {
                (Category::Hand, Some(_)) => {
                    return Err(Error::Validation(format!(
                        "hand track {} must not have an onset (hands are always active)",
                        t.track_id
                    )))
                }
                (Category::Object, None) => {
                    return Err(Error::Validation(format!(
                        "object track {} has no onset frame",
                        t.track_id
                    )))
                }
                (Category::Object, Some(a)) if a >= frame_count => {
                    return Err(Error::Validation(format!(
                        "object track {} has onset {a} outside [0, {frame_count})",
                        t.track_id
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn get(&self, id: TrackId) -> Option<&Track> {
        self.tracks.iter().find(|t| t.track_id == id)
    }

    pub fn hands(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.category == Category::Hand)
    }

    pub fn objects(&self) -> impl Iterator<Item = &Track> {
        self.tracks.iter().filter(|t| t.category == Category::Object)
    }
}

pub fn load_track_index(path: impl AsRef<Path>) -> Result<TrackIndex> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_track_index(index: &TrackIndex, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(index).expect("track index serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Source of per-frame instance masks.
pub trait MaskSource: Sync {
    fn masks_at(&self, frame: usize) -> Result<FrameMasks>;
}

/// Masks held in memory, indexed by frame.
#[derive(Debug, Clone, Default)]
pub struct InMemoryMasks {
    pub frames: BTreeMap<usize, FrameMasks>,
}

impl MaskSource for InMemoryMasks {
    fn masks_at(&self, frame: usize) -> Result<FrameMasks> {
        Ok(self.frames.get(&frame).cloned().unwrap_or_default())
    }
}

/// Masks read from the files named by a track index. A missing file means the
/// instance is not visible at that frame.
#[derive(Debug, Clone)]
pub struct TrackMaskFiles {
    root: PathBuf,
    index: TrackIndex,
}

impl TrackMaskFiles {
    pub fn new(root: impl Into<PathBuf>, index: TrackIndex) -> Self {
        Self {
            root: root.into(),
            index,
        }
    }

    pub fn mask_path(&self, track: &Track, frame: usize) -> PathBuf {
        self.root
            .join(expand_pattern(&track.mask_pattern, frame, Some(track.track_id)))
    }
}

impl MaskSource for TrackMaskFiles {
    fn masks_at(&self, frame: usize) -> Result<FrameMasks> {
        let mut out = FrameMasks::new();
        for t in &self.index.tracks {
            let p = self.mask_path(t, frame);
            if p.exists() {
                out.insert(t.track_id, load_mask(&p)?);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(id: TrackId, category: Category, onset: Option<usize>) -> Track {
        Track {
            track_id: id,
            name: format!("t{id}"),
            category,
            onset_frame: onset,
            mask_pattern: "masks/{track_id}/{frame:06}.pgm".into(),
            bbox: None,
        }
    }

    #[test]
    fn validation_rules() {
        let ok = TrackIndex {
            tracks: vec![track(1, Category::Hand, None), track(2, Category::Object, Some(4))],
        };
        assert!(ok.validate(10).is_ok());
        assert!(ok.validate(4).is_err());

        let dup = TrackIndex {
            tracks: vec![track(1, Category::Hand, None), track(1, Category::Object, Some(0))],
        };
        assert!(dup.validate(10).is_err());
        let hand_onset = TrackIndex {
            tracks: vec![track(1, Category::Hand, Some(0))],
        };
        assert!(hand_onset.validate(10).is_err());
        let obj_none = TrackIndex {
            tracks: vec![track(1, Category::Object, None)],
        };
        assert!(obj_none.validate(10).is_err());
    }

    #[test]
    fn pattern_expansion() {
        assert_eq!(
            expand_pattern("m/{track_id}/{frame:06}.pgm", 42, Some(7)),
            "m/7/000042.pgm"
        );
        assert_eq!(expand_pattern("d_{frame}.pfm", 3, None), "d_3.pfm");
    }

    #[test]
    fn json_schema() {
        let text = r#"{"tracks": [
            {"track_id": 1, "name": "hand", "category": "hand", "mask_pattern": "h/{frame:06}.pgm"},
            {"track_id": 5, "name": "cup", "category": "object", "onset_frame": 12,
             "mask_pattern": "c/{frame:06}.pgm", "box": [1, 2, 30, 40]}
        ]}"#;
        let idx: TrackIndex = serde_json::from_str(text).unwrap();
        assert_eq!(idx.tracks[1].onset_frame, Some(12));
        assert_eq!(idx.tracks[1].bbox, Some([1.0, 2.0, 30.0, 40.0]));
        assert_eq!(idx.hands().count(), 1);
    }
}

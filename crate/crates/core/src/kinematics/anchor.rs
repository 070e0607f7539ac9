//! Global anchor index convention.
//!
//! Rows 0..20 are four anchors per finger in the order thumb, index,
//! middle, ring, pinky; each finger lists proximal, intermediate, distal
//! and tip. Rows 20 and 21 are the palm anchors.

use std::fmt;
use std::str::FromStr;

pub const ANCHOR_COUNT: usize = 22;
pub const THUMB_TIP: usize = 3;
pub const FINGERTIPS: [usize; 4] = [7, 11, 15, 19];
pub const PALM: [usize; 2] = [20, 21];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Finger {
    Thumb,
    Index,
    Middle,
    Ring,
    Pinky,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Segment {
    Proximal,
    Intermediate,
    Distal,
    Tip,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Finger(Finger, Segment),
    Palm,
}

const FINGERS: [Finger; 5] = [
    Finger::Thumb,
    Finger::Index,
    Finger::Middle,
    Finger::Ring,
    Finger::Pinky,
];
const SEGMENTS: [Segment; 4] = [
    Segment::Proximal,
    Segment::Intermediate,
    Segment::Distal,
    Segment::Tip,
];

impl Finger {
    pub fn name(self) -> &'static str {
        match self {
            Finger::Thumb => "thumb",
            Finger::Index => "index",
            Finger::Middle => "middle",
            Finger::Ring => "ring",
            Finger::Pinky => "pinky",
        }
    }
}

impl Segment {
    pub fn name(self) -> &'static str {
        match self {
            Segment::Proximal => "proximal",
            Segment::Intermediate => "intermediate",
            Segment::Distal => "distal",
            Segment::Tip => "tip",
        }
    }
}

impl Region {
    /// Region carried by row `index` of every anchor set.
    pub fn canonical(index: usize) -> Option<Region> {
        match index {
            0..=19 => Some(Region::Finger(FINGERS[index / 4], SEGMENTS[index % 4])),
            20 | 21 => Some(Region::Palm),
            _ => None,
        }
    }

    pub fn is_thumb(self) -> bool {
        matches!(self, Region::Finger(Finger::Thumb, _))
    }

    pub fn is_tip(self) -> bool {
        matches!(self, Region::Finger(_, Segment::Tip))
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Palm => f.write_str("palm"),
            Region::Finger(finger, seg) => write!(f, "{}_{}", finger.name(), seg.name()),
        }
    }
}

impl FromStr for Region {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "palm" {
            return Ok(Region::Palm);
        }
        let (finger, seg) = s
            .split_once('_')
            .ok_or_else(|| format!("unknown region `{s}`"))?;
        let finger = FINGERS
            .iter()
            .find(|f| f.name() == finger)
            .ok_or_else(|| format!("unknown finger in region `{s}`"))?;
        let seg = SEGMENTS
            .iter()
            .find(|g| g.name() == seg)
            .ok_or_else(|| format!("unknown segment in region `{s}`"))?;
        Ok(Region::Finger(*finger, *seg))
    }
}

//! Trajectory JSON-lines files and PLY point clouds.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::adf::AnchorSet;
use crate::error::{Error, Result};
use crate::transform::Pose;

/// One timestamped sample of a joint trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub joints: Vec<f64>,
    pub eef: Pose,
}

pub fn read_trajectory<R: BufRead>(input: R) -> Result<Vec<TrajectoryPoint>> {
    let mut out = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let p: TrajectoryPoint = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("trajectory line {}: {e}", k + 1)))?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_trajectory<W: Write>(mut out: W, points: &[TrajectoryPoint]) -> Result<()> {
    for p in points {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// ASCII PLY with one vertex per anchor and an `anchor` index property.
pub fn write_ply<W: Write>(mut out: W, anchors: &AnchorSet) -> Result<()> {
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", crate::ANCHOR_COUNT)?;
    for p in ["x", "y", "z"] {
        writeln!(out, "property double {p}")?;
    }
    writeln!(out, "property int anchor")?;
    writeln!(out, "end_header")?;
    for (i, r) in anchors.iter().enumerate() {
        writeln!(out, "{} {} {} {i}", r.x, r.y, r.z)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trajectory_round_trip() {
        let pts = vec![TrajectoryPoint {
            t: 0.5,
            joints: vec![0.1, 0.2],
            eef: Pose {
                xyz: [1.0, 2.0, 3.0],
                rpy: [0.0, 0.1, 0.2],
            },
        }];
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &pts).unwrap();
        assert_eq!(read_trajectory(buf.as_slice()).unwrap(), pts);
        assert!(read_trajectory("{\"t\": 1}\n".as_bytes()).is_err());
    }

    #[test]
    fn ply_has_22_vertices() {
        let mut buf = Vec::new();
        write_ply(&mut buf, &AnchorSet::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("element vertex 22"));
        let body = text.split("end_header\n").nth(1).unwrap();
        assert_eq!(body.lines().count(), 22);
    }
}

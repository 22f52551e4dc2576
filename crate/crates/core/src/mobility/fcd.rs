//! Ingestion of SUMO floating-car-data exports.
//!
//! ```xml
//! <fcd-export>
//!   <timestep time="0.00">
//!     <vehicle id="v0" x="12.5" y="0" speed="8.0" lane="E0_1" angle="90"/>
//!   </timestep>
//! </fcd-export>
//! ```

use roxmltree::{Document, Node};

use super::{MobilityError, Snapshot, TrajectorySet, VehiclePose};

fn line_of(doc: &Document, node: Node) -> u32 {
    doc.text_pos_at(node.range().start).row
}

fn attr<'a>(doc: &Document, node: Node<'a, '_>, name: &str) -> Result<&'a str, MobilityError> {
    node.attribute(name).ok_or_else(|| MobilityError::Schema {
        line: line_of(doc, node),
        message: format!(
            "<{}> is missing required attribute `{name}`",
            node.tag_name().name()
        ),
    })
}

fn number(doc: &Document, node: Node, name: &str) -> Result<f64, MobilityError> {
    let raw = attr(doc, node, name)?;
    raw.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| MobilityError::Schema {
            line: line_of(doc, node),
            message: format!("attribute `{name}` has non-numeric value {raw:?}"),
        })
}

/// SUMO lane ids look like `edge_2` or `:junction_0_1`; the index is the
/// trailing `_N` component. A bare integer is accepted as well.
fn lane_index(raw: &str) -> Option<usize> {
    raw.parse()
        .ok()
        .or_else(|| raw.rsplit('_').next().and_then(|s| s.parse().ok()))
}

/// Parses an FCD export into a [`TrajectorySet`], in document order.
///
/// `id`, `x`, `y`, `speed` and `lane` are required on every vehicle. When
/// an `angle` attribute is present (SUMO convention, degrees clockwise from
/// north), a westward heading yields direction -1; otherwise +1.
pub fn parse_fcd_trace(document: &str) -> Result<TrajectorySet, MobilityError> {
    let doc = Document::parse(document).map_err(|e| {
        let pos = e.pos();
        MobilityError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "fcd-export" {
        return Err(MobilityError::Schema {
            line: line_of(&doc, root),
            message: format!("expected <fcd-export> root, found <{}>", root.tag_name().name()),
        });
    }

    let mut steps: Vec<Snapshot> = Vec::new();
    for step in root.children().filter(|n| n.has_tag_name("timestep")) {
        let time_s = number(&doc, step, "time")?;
        if let Some(prev) = steps.last() {
            if time_s <= prev.time_s {
                return Err(MobilityError::Schema {
                    line: line_of(&doc, step),
                    message: format!(
                        "timestep time {time_s} does not increase (previous {})",
                        prev.time_s
                    ),
                });
            }
        }
        let mut poses = Vec::new();
        for v in step.children().filter(|n| n.has_tag_name("vehicle")) {
            let lane_raw = attr(&doc, v, "lane")?;
            let lane = lane_index(lane_raw).ok_or_else(|| MobilityError::Schema {
                line: line_of(&doc, v),
                message: format!("attribute `lane` has no lane index: {lane_raw:?}"),
            })?;
            let direction = match v.attribute("angle").and_then(|a| a.parse::<f64>().ok()) {
                Some(angle) if angle.to_radians().sin() < 0.0 => -1,
                _ => 1,
            };
            poses.push(VehiclePose {
                vehicle_id: attr(&doc, v, "id")?.to_string(),
                x: number(&doc, v, "x")?,
                y: number(&doc, v, "y")?,
                speed_mps: number(&doc, v, "speed")?,
                lane,
                direction,
            });
        }
        steps.push(Snapshot { time_s, poses });
    }
    Ok(TrajectorySet { steps })
}

//! Clamp-centric waypoint generation and merging.
//!
//! Each clamp contributes a small choreography of waypoints: U-shaped clamps
//! get two waypoints to pull the wire across the mouth before the insertion
//! primitive, C-shaped clamps get two side-waypoints with a tip-waypoint in
//! between to route the wire around the pivot. Consecutive waypoints that
//! bunch up within 20 mm of their mean are merged to keep the path
//! efficient.

use crate::error::{Error, Result};
use crate::types::Pose2D;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Desired tension at C-clamp routing waypoints, newtons.
pub const C_CLAMP_FORCE_N: f64 = 7.0;

/// Desired tension at U-clamp insertion waypoints, newtons.
pub const U_CLAMP_FORCE_N: f64 = 10.0;

/// Consecutive waypoints within this distance of their mean are merged.
pub const MERGE_RADIUS_MM: f64 = 20.0;

/// Clamp variety: C-shaped pivots route the wire, U-shaped receptacles
/// secure it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClampKind {
    C,
    U,
}

/// Waypoint offsets around a clamp, millimetres. Boards override these per
/// clamp to match their physical fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClampGeometry {
    /// Lateral offset of the two C-clamp side-waypoints from the center.
    pub side_offset: f64,
    /// Offset of the C-clamp tip-waypoint beyond the center along the tip
    /// direction.
    pub tip_offset: f64,
    /// Offset of the two U-clamp waypoints along the channel axis.
    pub pre_offset: f64,
}

impl Default for ClampGeometry {
    fn default() -> Self {
        Self {
            side_offset: 25.0,
            tip_offset: 25.0,
            pre_offset: 20.0,
        }
    }
}

/// One clamp on the board.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampSpec {
    pub id: String,
    pub kind: ClampKind,
    /// Clamp center, world frame, millimetres.
    pub center: Pose2D,
    /// Tip direction for C clamps, channel axis for U clamps, radians.
    pub orientation: f64,
    #[serde(default)]
    pub geometry: ClampGeometry,
}

/// Role a waypoint plays in the clamp choreography.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaypointRole {
    CSide1,
    CTip,
    CSide2,
    UPre,
    UInsert,
}

/// Role annotation tying a waypoint back to its clamp. Merged waypoints
/// carry the annotations of every member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointTag {
    pub role: WaypointRole,
    pub clamp_id: String,
}

/// A planned waypoint: position, desired force, and clamp annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Pose2D,
    /// Desired tension while tracking this waypoint (7 N for C, 10 N for U;
    /// merged waypoints take the maximum of their members).
    pub f_d: f64,
    pub tags: Vec<WaypointTag>,
}

impl Waypoint {
    fn single(position: Pose2D, f_d: f64, role: WaypointRole, clamp_id: &str) -> Self {
        Self {
            position,
            f_d,
            tags: vec![WaypointTag {
                role,
                clamp_id: clamp_id.to_string(),
            }],
        }
    }

    /// The clamp id of the first tag carrying `role`, if any.
    pub fn tag_for(&self, role: WaypointRole) -> Option<&str> {
        self.tags
            .iter()
            .find(|t| t.role == role)
            .map(|t| t.clamp_id.as_str())
    }

    /// Primary clamp this waypoint belongs to (first annotation).
    pub fn clamp_id(&self) -> &str {
        &self.tags[0].clamp_id
    }
}

/// Ordered waypoints for one clamp, approached from `approach_from`.
///
/// U clamps emit two waypoints along the channel axis at 10 N; C clamps emit
/// side, tip, side at 7 N with the tip strictly between the sides. The first
/// side is the one nearer the approach point; exact ties break toward the
/// smaller x, then smaller y.
pub fn clamp_waypoints(clamp: &ClampSpec, approach_from: Pose2D) -> Vec<Waypoint> {
    let dir = (clamp.orientation.cos(), clamp.orientation.sin());
    let lat = (-dir.1, dir.0);
    match clamp.kind {
        ClampKind::U => {
            let off = clamp.geometry.pre_offset;
            let a = clamp.center.translated(dir.0 * off, dir.1 * off);
            let b = clamp.center.translated(-dir.0 * off, -dir.1 * off);
            let (first, second) = order_by_distance(a, b, approach_from);
            vec![
                Waypoint::single(first, U_CLAMP_FORCE_N, WaypointRole::UPre, &clamp.id),
                Waypoint::single(second, U_CLAMP_FORCE_N, WaypointRole::UInsert, &clamp.id),
            ]
        }
        ClampKind::C => {
            let s = clamp.geometry.side_offset;
            let a = clamp.center.translated(lat.0 * s, lat.1 * s);
            let b = clamp.center.translated(-lat.0 * s, -lat.1 * s);
            let tip = clamp
                .center
                .translated(dir.0 * clamp.geometry.tip_offset, dir.1 * clamp.geometry.tip_offset);
            let (first, second) = order_by_distance(a, b, approach_from);
            vec![
                Waypoint::single(first, C_CLAMP_FORCE_N, WaypointRole::CSide1, &clamp.id),
                Waypoint::single(tip, C_CLAMP_FORCE_N, WaypointRole::CTip, &clamp.id),
                Waypoint::single(second, C_CLAMP_FORCE_N, WaypointRole::CSide2, &clamp.id),
            ]
        }
    }
}

fn order_by_distance(a: Pose2D, b: Pose2D, from: Pose2D) -> (Pose2D, Pose2D) {
    let da = a.distance(&from);
    let db = b.distance(&from);
    if da < db {
        (a, b)
    } else if db < da {
        (b, a)
    } else if (a.x, a.y) <= (b.x, b.y) {
        (a, b)
    } else {
        (b, a)
    }
}

/// Merge runs of consecutive waypoints lying within [`MERGE_RADIUS_MM`] of
/// their mean. The merged waypoint sits at the mean, takes the maximum f_d,
/// and unions the annotations. Passes repeat until nothing changes, so the
/// operation is idempotent.
pub fn merge_waypoints(mut waypoints: Vec<Waypoint>) -> Vec<Waypoint> {
    loop {
        let merged = merge_pass(&waypoints);
        if merged.len() == waypoints.len() {
            return merged;
        }
        waypoints = merged;
    }
}

fn merge_pass(waypoints: &[Waypoint]) -> Vec<Waypoint> {
    let mut out: Vec<Waypoint> = Vec::with_capacity(waypoints.len());
    let mut i = 0;
    while i < waypoints.len() {
        let mut group_end = i + 1;
        while group_end < waypoints.len() {
            let candidate = &waypoints[i..=group_end];
            let mean = mean_position(candidate);
            let all_close = candidate
                .iter()
                .all(|w| w.position.distance(&mean) <= MERGE_RADIUS_MM);
            if all_close {
                group_end += 1;
            } else {
                break;
            }
        }
        let group = &waypoints[i..group_end];
        if group.len() == 1 {
            out.push(group[0].clone());
        } else {
            let mean = mean_position(group);
            let f_d = group.iter().map(|w| w.f_d).fold(0.0, f64::max);
            let tags = group.iter().flat_map(|w| w.tags.clone()).collect();
            out.push(Waypoint {
                position: mean,
                f_d,
                tags,
            });
        }
        i = group_end;
    }
    out
}

fn mean_position(group: &[Waypoint]) -> Pose2D {
    let n = group.len() as f64;
    let x = group.iter().map(|w| w.position.x).sum::<f64>() / n;
    let y = group.iter().map(|w| w.position.y).sum::<f64>() / n;
    Pose2D::new(x, y)
}

/// Full plan: concatenate each clamp's waypoints in sequence order (sides
/// ordered by distance from the running position), then merge.
pub fn plan(clamps: &[&ClampSpec], start: Pose2D) -> Result<Vec<Waypoint>> {
    if clamps.is_empty() {
        return Err(Error::EmptyBoard);
    }
    let mut waypoints = Vec::new();
    let mut cursor = start;
    for clamp in clamps {
        let wps = clamp_waypoints(clamp, cursor);
        cursor = wps.last().expect("clamp emits waypoints").position;
        waypoints.extend(wps);
    }
    Ok(merge_waypoints(waypoints))
}

/// Board layout: the connector fix-point, initial gripper position, clamp
/// set, and named harness routes (ordered clamp sequences).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoardLayout {
    /// Connector anchor, world frame.
    pub fixpoint: Pose2D,
    /// Initial gripper position, world frame.
    pub start: Pose2D,
    /// Unstretched wire length from connector to gripper at episode start.
    pub initial_rest_length: f64,
    pub clamps: Vec<ClampSpec>,
    pub routes: BTreeMap<String, Vec<String>>,
}

impl BoardLayout {
    /// The built-in two-route reference board.
    pub fn reference() -> BoardLayout {
        serde_json::from_str(include_str!("../boards/reference.json"))
            .expect("embedded reference board is valid")
    }

    pub fn clamp(&self, id: &str) -> Result<&ClampSpec> {
        self.clamps
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::UnknownClamp(id.to_string()))
    }

    /// Clamps of a named route, in harness order.
    pub fn route_clamps(&self, route: &str) -> Result<Vec<&ClampSpec>> {
        let ids = self
            .routes
            .get(route)
            .ok_or_else(|| Error::UnknownRoute(route.to_string()))?;
        ids.iter().map(|id| self.clamp(id)).collect()
    }

    /// Plan the waypoints of a named route from the board start.
    pub fn plan_route(&self, route: &str) -> Result<Vec<Waypoint>> {
        let clamps = self.route_clamps(route)?;
        plan(&clamps, self.start)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clamps.is_empty() {
            return Err(Error::EmptyBoard);
        }
        if !(self.initial_rest_length > 0.0) {
            return Err(Error::Config("initial_rest_length must be positive".into()));
        }
        for ids in self.routes.values() {
            for id in ids {
                self.clamp(id)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn u_clamp(id: &str, center: Pose2D, orientation: f64, pre: f64) -> ClampSpec {
        ClampSpec {
            id: id.into(),
            kind: ClampKind::U,
            center,
            orientation,
            geometry: ClampGeometry {
                pre_offset: pre,
                ..Default::default()
            },
        }
    }

    fn c_clamp(id: &str, center: Pose2D, orientation: f64) -> ClampSpec {
        ClampSpec {
            id: id.into(),
            kind: ClampKind::C,
            center,
            orientation,
            geometry: ClampGeometry::default(),
        }
    }

    #[test]
    fn u_clamp_two_waypoints_at_ten_newtons() {
        let clamp = u_clamp("u0", Pose2D::new(100.0, 0.0), 0.0, 25.0);
        let wps = clamp_waypoints(&clamp, Pose2D::ORIGIN);
        assert_eq!(wps.len(), 2);
        assert!(wps.iter().all(|w| w.f_d == U_CLAMP_FORCE_N));
        // nearer waypoint first
        assert_relative_eq!(wps[0].position.x, 75.0);
        assert_relative_eq!(wps[1].position.x, 125.0);
        assert_eq!(wps[0].tags[0].role, WaypointRole::UPre);
        assert_eq!(wps[1].tags[0].role, WaypointRole::UInsert);
    }

    #[test]
    fn c_clamp_tip_between_sides_at_seven_newtons() {
        let clamp = c_clamp("c0", Pose2D::new(0.0, 100.0), std::f64::consts::FRAC_PI_2);
        let wps = clamp_waypoints(&clamp, Pose2D::ORIGIN);
        assert_eq!(wps.len(), 3);
        assert!(wps.iter().all(|w| w.f_d == C_CLAMP_FORCE_N));
        assert_eq!(wps[0].tags[0].role, WaypointRole::CSide1);
        assert_eq!(wps[1].tags[0].role, WaypointRole::CTip);
        assert_eq!(wps[2].tags[0].role, WaypointRole::CSide2);
        // tip lies beyond the center along +Y
        assert_relative_eq!(wps[1].position.y, 125.0);
    }

    #[test]
    fn equidistant_sides_tie_break_by_x_then_y() {
        // approach from the center line: both sides equidistant
        let clamp = c_clamp("c0", Pose2D::new(0.0, 100.0), std::f64::consts::FRAC_PI_2);
        let wps = clamp_waypoints(&clamp, Pose2D::new(0.0, 0.0));
        // sides at (±25, 100); tie-break picks x = −25 first
        assert_relative_eq!(wps[0].position.x, -25.0);
        assert_relative_eq!(wps[2].position.x, 25.0);
    }

    #[test]
    fn merge_examples() {
        let a = Waypoint::single(Pose2D::new(0.0, 0.0), 7.0, WaypointRole::CTip, "c0");
        let b = Waypoint::single(Pose2D::new(15.0, 0.0), 10.0, WaypointRole::UPre, "u0");
        let merged = merge_waypoints(vec![a.clone(), b.clone()]);
        assert_eq!(merged.len(), 1);
        assert_relative_eq!(merged[0].position.x, 7.5);
        assert_eq!(merged[0].f_d, 10.0);
        assert_eq!(merged[0].tags.len(), 2);

        let far = Waypoint::single(Pose2D::new(50.0, 0.0), 10.0, WaypointRole::UPre, "u0");
        let kept = merge_waypoints(vec![a, far]);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn merge_is_idempotent_even_when_groups_bunch() {
        // 0, 40, 41 on a line: the first pass merges {0, 40} to 20, and the
        // results 20 and 41 are again within 20 mm of their mean
        let wps: Vec<Waypoint> = [0.0, 40.0, 41.0]
            .iter()
            .map(|x| Waypoint::single(Pose2D::new(*x, 0.0), 7.0, WaypointRole::CTip, "c"))
            .collect();
        let merged = merge_waypoints(wps);
        assert_eq!(merged.len(), 1);
        let again = merge_waypoints(merged.clone());
        assert_eq!(again, merged);
    }

    #[test]
    fn single_u_board_plan_length_follows_merge_rule() {
        // pre_offset 25: waypoints 50 mm apart, each 25 mm from the mean → kept
        let clamp = u_clamp("u0", Pose2D::new(100.0, 0.0), 0.0, 25.0);
        let plan_wide = plan(&[&clamp], Pose2D::ORIGIN).unwrap();
        assert_eq!(plan_wide.len(), 2);

        // pre_offset 5: waypoints 10 mm apart → merged into one
        let tight = u_clamp("u1", Pose2D::new(100.0, 0.0), 0.0, 5.0);
        let plan_tight = plan(&[&tight], Pose2D::ORIGIN).unwrap();
        assert_eq!(plan_tight.len(), 1);
        assert_eq!(plan_tight[0].tags.len(), 2);
    }

    #[test]
    fn empty_board_is_an_error() {
        assert!(matches!(plan(&[], Pose2D::ORIGIN), Err(Error::EmptyBoard)));
    }

    #[test]
    fn reference_board_parses_and_plans() {
        let board = BoardLayout::reference();
        board.validate().unwrap();
        for route in board.routes.keys() {
            let wps = board.plan_route(route).unwrap();
            assert!(!wps.is_empty());
            for w in &wps {
                assert!(w.f_d == C_CLAMP_FORCE_N || w.f_d == U_CLAMP_FORCE_N);
            }
        }
    }
}

//! Array layout, flow sources and geometric occlusion.
//!
//! Heading convention used throughout the crate: a heading `phi` is the
//! direction the flow comes *from*, in degrees counterclockwise from the
//! array's +x axis. The flow propagates along `-(cos phi, sin phi)`, so the
//! upstream whisker of a pair is the one nearer the source.

use std::fmt;
use std::str::FromStr;

use crate::angle::{normalize_deg, wrap_deg, Vec2};
use crate::error::{Error, Result};

/// Drag-element diameter of the canonical array, mm.
pub const DEFAULT_DIAMETER_MM: f64 = 15.0;
/// Whisker spacing of the canonical array, mm.
pub const DEFAULT_SPACING_MM: f64 = 35.0;
/// Below this centre distance neighbouring whiskers touch at 6.5 m/s.
pub const CONTACT_SPACING_MM: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WhiskerId(pub u16);

impl fmt::Display for WhiskerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Whisker {
    pub id: WhiskerId,
    /// Centre position, mm.
    pub position: Vec2,
}

/// Planar whisker array.
///
/// Ids are unique and contiguous from 1, stored in id order. No two
/// whiskers are closer than one drag-element diameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    whiskers: Vec<Whisker>,
    diameter_mm: f64,
    nominal_spacing_mm: f64,
}

impl ArrayLayout {
    pub fn new(
        mut whiskers: Vec<Whisker>,
        diameter_mm: f64,
        nominal_spacing_mm: f64,
    ) -> Result<Self> {
        if !(diameter_mm > 0.0) || !diameter_mm.is_finite() {
            return Err(Error::InvalidLayout(format!(
                "diameter must be positive, got {diameter_mm}"
            )));
        }
        if whiskers.is_empty() {
            return Err(Error::InvalidLayout("layout has no whiskers".into()));
        }
        whiskers.sort_by_key(|w| w.id);
        for (i, w) in whiskers.iter().enumerate() {
            if usize::from(w.id.0) != i + 1 {
                return Err(Error::InvalidLayout(
                    "whisker ids must be unique and contiguous from 1".into(),
                ));
            }
            if !w.position.is_finite() {
                return Err(Error::InvalidLayout(format!(
                    "whisker {} has a non-finite position",
                    w.id
                )));
            }
        }
        for (i, a) in whiskers.iter().enumerate() {
            for b in &whiskers[i + 1..] {
                let dist = (a.position - b.position).norm();
                if dist < diameter_mm {
                    return Err(Error::InvalidLayout(format!(
                        "whiskers {} and {} overlap ({dist:.3} mm apart, diameter {diameter_mm} mm)",
                        a.id, b.id
                    )));
                }
            }
        }
        Ok(Self {
            whiskers,
            diameter_mm,
            nominal_spacing_mm,
        })
    }

    /// Build from `(x, y)` positions in mm; ids are assigned 1, 2, ...
    pub fn from_positions(
        positions: &[(f64, f64)],
        diameter_mm: f64,
        spacing_mm: f64,
    ) -> Result<Self> {
        let whiskers = positions
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                let id = u16::try_from(i + 1)
                    .map_err(|_| Error::InvalidLayout("too many whiskers".into()))?;
                Ok(Whisker {
                    id: WhiskerId(id),
                    position: Vec2::new(x, y),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(whiskers, diameter_mm, spacing_mm)
    }

    /// Square 2x2 array.
    ///
    /// ```text
    ///   4 (0,s)   3 (s,s)
    ///   2 (0,0)   1 (s,0)
    /// ```
    ///
    /// With flow 1 from 0° and flow 2 from 90°, whisker 1 is shadowed only
    /// from flow 2, whisker 2 from both, and whiskers 3 and 4 are exposed to
    /// flow 2.
    pub fn grid2x2(spacing_mm: f64, diameter_mm: f64) -> Result<Self> {
        let s = spacing_mm;
        Self::from_positions(&[(s, 0.0), (0.0, 0.0), (s, s), (0.0, s)], diameter_mm, s)
    }

    /// Two whiskers on the x axis: 1 at `(s, 0)`, 2 at the origin. Flow
    /// from 0° makes whisker 1 upstream.
    pub fn pair(spacing_mm: f64, diameter_mm: f64) -> Result<Self> {
        let s = spacing_mm;
        Self::from_positions(&[(s, 0.0), (0.0, 0.0)], diameter_mm, s)
    }

    pub fn single(diameter_mm: f64) -> Result<Self> {
        Self::from_positions(&[(0.0, 0.0)], diameter_mm, 0.0)
    }

    pub fn whiskers(&self) -> &[Whisker] {
        &self.whiskers
    }

    pub fn ids(&self) -> impl Iterator<Item = WhiskerId> + '_ {
        self.whiskers.iter().map(|w| w.id)
    }

    pub fn len(&self) -> usize {
        self.whiskers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.whiskers.is_empty()
    }

    pub fn diameter_mm(&self) -> f64 {
        self.diameter_mm
    }

    pub fn nominal_spacing_mm(&self) -> f64 {
        self.nominal_spacing_mm
    }

    pub fn position(&self, id: WhiskerId) -> Result<Vec2> {
        self.whiskers
            .get(usize::from(id.0).wrapping_sub(1))
            .map(|w| w.position)
            .ok_or(Error::UnknownWhisker(id))
    }

    /// Human-readable warnings for pairs closer than the contact spacing.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, a) in self.whiskers.iter().enumerate() {
            for b in &self.whiskers[i + 1..] {
                let dist = (a.position - b.position).norm();
                if dist < CONTACT_SPACING_MM {
                    out.push(format!(
                        "whiskers {} and {} are {dist:.1} mm apart; below {CONTACT_SPACING_MM} mm they may touch",
                        a.id, b.id
                    ));
                }
            }
        }
        out
    }

    pub fn translated(&self, offset: Vec2) -> Self {
        let mut out = self.clone();
        for w in &mut out.whiskers {
            w.position += offset;
        }
        out
    }

    /// Rotate every position about the origin by `deg` counterclockwise.
    pub fn rotated(&self, deg: f64) -> Self {
        let mut out = self.clone();
        for w in &mut out.whiskers {
            w.position = w.position.rotated(deg);
        }
        out
    }

    /// Percent of `target` shadowed by `occluder` under flow from `heading_deg`.
    pub fn occlusion_percent(
        &self,
        heading_deg: f64,
        target: WhiskerId,
        occluder: WhiskerId,
    ) -> Result<f64> {
        let t = self.position(target)?;
        let o = self.position(occluder)?;
        if target == occluder {
            return Err(Error::InvalidArgument(format!(
                "whisker {target} cannot occlude itself"
            )));
        }
        Ok(pair_occlusion(heading_deg, t - o, self.diameter_mm))
    }

    /// Occlusion of `target` by its worst occluder. Shadows do not stack.
    pub fn occlusion_for_whisker(&self, heading_deg: f64, target: WhiskerId) -> Result<f64> {
        let t = self.position(target)?;
        Ok(self
            .whiskers
            .iter()
            .filter(|w| w.id != target)
            .map(|w| pair_occlusion(heading_deg, t - w.position, self.diameter_mm))
            .fold(0.0, f64::max))
    }

    /// Occlusion of every whisker, in id order.
    pub fn occlusion_profile(&self, heading_deg: f64) -> Vec<(WhiskerId, f64)> {
        self.whiskers
            .iter()
            .map(|w| {
                let occ = self
                    .occlusion_for_whisker(heading_deg, w.id)
                    .expect("id taken from the layout");
                (w.id, occ)
            })
            .collect()
    }
}

/// Occlusion for a target displaced by `delta` (target minus occluder).
fn pair_occlusion(heading_deg: f64, delta: Vec2, diameter: f64) -> f64 {
    let propagation = -Vec2::from_heading(heading_deg);
    if delta.dot(propagation) <= 0.0 {
        return 0.0;
    }
    let lateral = delta.cross(propagation).abs();
    100.0 * (diameter - lateral.min(diameter)) / diameter
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayoutPreset {
    Grid2x2,
    Pair,
    Single,
}

impl LayoutPreset {
    pub fn build(self, spacing_mm: f64, diameter_mm: f64) -> Result<ArrayLayout> {
        match self {
            LayoutPreset::Grid2x2 => ArrayLayout::grid2x2(spacing_mm, diameter_mm),
            LayoutPreset::Pair => ArrayLayout::pair(spacing_mm, diameter_mm),
            LayoutPreset::Single => ArrayLayout::single(diameter_mm),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LayoutPreset::Grid2x2 => "grid2x2",
            LayoutPreset::Pair => "pair",
            LayoutPreset::Single => "single",
        }
    }
}

impl FromStr for LayoutPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid2x2" => Ok(LayoutPreset::Grid2x2),
            "pair" => Ok(LayoutPreset::Pair),
            "single" => Ok(LayoutPreset::Single),
            other => Err(Error::Config(format!(
                "unknown layout preset '{other}' (expected grid2x2, pair or single)"
            ))),
        }
    }
}

/// One airflow. Heading is stored in `[0, 360)`; speed 0 means no flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSource {
    heading_deg: f64,
    speed_mps: f64,
}

impl FlowSource {
    pub fn new(heading_deg: f64, speed_mps: f64) -> Result<Self> {
        if !heading_deg.is_finite() {
            return Err(Error::InvalidArgument("flow heading must be finite".into()));
        }
        if !(speed_mps >= 0.0) || !speed_mps.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "flow speed must be finite and non-negative, got {speed_mps}"
            )));
        }
        Ok(Self {
            heading_deg: normalize_deg(heading_deg),
            speed_mps,
        })
    }

    pub fn heading_deg(&self) -> f64 {
        self.heading_deg
    }

    pub fn speed_mps(&self) -> f64 {
        self.speed_mps
    }

    pub fn rotated(&self, deg: f64) -> Self {
        Self {
            heading_deg: normalize_deg(self.heading_deg + deg),
            speed_mps: self.speed_mps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPair {
    pub flow1: FlowSource,
    pub flow2: FlowSource,
}

impl FlowPair {
    /// Smallest unsigned angle between the two headings, `[0, 180]`.
    pub fn alpha_deg(&self) -> f64 {
        wrap_deg(self.flow2.heading_deg - self.flow1.heading_deg).abs()
    }

    /// `v1 / v2`, or `None` when flow 2 is still.
    pub fn speed_ratio(&self) -> Option<f64> {
        (self.flow2.speed_mps > 0.0).then(|| self.flow1.speed_mps / self.flow2.speed_mps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn id(n: u16) -> WhiskerId {
        WhiskerId(n)
    }

    /// Independent evaluation of the pairwise formula for a flow rotated
    /// `offset` degrees off the connecting axis.
    fn hand_occlusion(s: f64, d: f64, offset_deg: f64) -> f64 {
        100.0 * (d - (s * offset_deg.to_radians().sin().abs()).min(d)) / d
    }

    #[test]
    fn aligned_pair_is_fully_shadowed() {
        let l = ArrayLayout::pair(35.0, 15.0).unwrap();
        assert_abs_diff_eq!(l.occlusion_percent(0.0, id(2), id(1)).unwrap(), 100.0);
        // occluder downstream of target
        assert_eq!(l.occlusion_percent(0.0, id(1), id(2)).unwrap(), 0.0);
    }

    #[test]
    fn partial_and_boundary_occlusion() {
        let l = ArrayLayout::pair(30.0, 15.0).unwrap();
        let occ = l.occlusion_percent(20.0, id(2), id(1)).unwrap();
        assert_abs_diff_eq!(occ, hand_occlusion(30.0, 15.0, 20.0), epsilon = 1e-9);
        assert_abs_diff_eq!(occ, 31.596, epsilon = 1e-3);
        let edge = l.occlusion_percent(30.0, id(2), id(1)).unwrap();
        assert_abs_diff_eq!(edge, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn errors_on_unknown_or_identical_ids() {
        let l = ArrayLayout::grid2x2(35.0, 15.0).unwrap();
        assert_eq!(
            l.occlusion_percent(0.0, id(9), id(1)),
            Err(Error::UnknownWhisker(id(9)))
        );
        assert_eq!(
            l.occlusion_for_whisker(0.0, id(0)),
            Err(Error::UnknownWhisker(id(0)))
        );
        assert!(matches!(
            l.occlusion_percent(0.0, id(1), id(1)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn grid_axis_flows() {
        let l = ArrayLayout::grid2x2(35.0, 15.0).unwrap();
        let p0: Vec<f64> = l
            .occlusion_profile(0.0)
            .into_iter()
            .map(|(_, o)| o)
            .collect();
        assert_eq!(p0, vec![0.0, 100.0, 0.0, 100.0]);
        let p90: Vec<f64> = l
            .occlusion_profile(90.0)
            .into_iter()
            .map(|(_, o)| o)
            .collect();
        for (got, want) in p90.iter().zip([100.0, 100.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-9);
        }
    }

    #[test]
    fn grid_diagonal_matches_brute_force() {
        let l = ArrayLayout::grid2x2(35.0, 15.0).unwrap();
        let heading: f64 = 45.0;
        let prop = -Vec2::from_heading(heading);
        for t in l.whiskers() {
            // brute force over every other whisker, straight from the definition
            let mut worst = 0.0_f64;
            for o in l.whiskers() {
                if o.id == t.id {
                    continue;
                }
                let dp = t.position - o.position;
                let along = dp.x * prop.x + dp.y * prop.y;
                if along > 0.0 {
                    let lateral = (dp.norm().powi(2) - along * along).max(0.0).sqrt();
                    worst = worst.max(100.0 * (15.0 - lateral.min(15.0)) / 15.0);
                }
            }
            let got = l.occlusion_for_whisker(heading, t.id).unwrap();
            assert_abs_diff_eq!(got, worst, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(
            l.occlusion_for_whisker(45.0, id(2)).unwrap(),
            100.0,
            epsilon = 1e-9
        );
        assert_eq!(l.occlusion_for_whisker(45.0, id(1)).unwrap(), 0.0);
        assert_eq!(l.occlusion_for_whisker(45.0, id(4)).unwrap(), 0.0);
    }

    #[test]
    fn single_whisker_never_shadowed() {
        let l = ArrayLayout::single(15.0).unwrap();
        for h in 0..36 {
            assert_eq!(
                l.occlusion_for_whisker(h as f64 * 10.0, id(1)).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn reduces_to_pairwise_formula_over_sweep() {
        for (s, d) in [(35.0, 15.0), (30.0, 15.0), (50.0, 15.0)] {
            let l = ArrayLayout::pair(s, d).unwrap();
            for step in -90i32..=90 {
                let phi = step as f64;
                let got = l.occlusion_percent(phi, id(2), id(1)).unwrap();
                let want = if step.abs() == 90 {
                    0.0
                } else {
                    hand_occlusion(s, d, phi)
                };
                assert_abs_diff_eq!(got, want, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn layout_validation() {
        assert!(ArrayLayout::from_positions(&[(0.0, 0.0), (10.0, 0.0)], 15.0, 10.0).is_err());
        assert!(ArrayLayout::from_positions(&[(0.0, 0.0)], 0.0, 0.0).is_err());
        let dup = vec![
            Whisker {
                id: id(1),
                position: Vec2::ZERO,
            },
            Whisker {
                id: id(1),
                position: Vec2::new(40.0, 0.0),
            },
        ];
        assert!(ArrayLayout::new(dup, 15.0, 40.0).is_err());
        let gap = vec![
            Whisker {
                id: id(1),
                position: Vec2::ZERO,
            },
            Whisker {
                id: id(3),
                position: Vec2::new(40.0, 0.0),
            },
        ];
        assert!(ArrayLayout::new(gap, 15.0, 40.0).is_err());
        assert!(ArrayLayout::pair(35.0, 15.0).unwrap().warnings().is_empty());
        assert_eq!(ArrayLayout::pair(25.0, 15.0).unwrap().warnings().len(), 1);
    }

    #[test]
    fn flow_source_normalizes() {
        let f = FlowSource::new(-30.0, 5.0).unwrap();
        assert_eq!(f.heading_deg(), 330.0);
        assert!(FlowSource::new(0.0, -1.0).is_err());
        assert!(FlowSource::new(0.0, 0.0).is_ok());
        let pair = FlowPair {
            flow1: FlowSource::new(350.0, 5.2).unwrap(),
            flow2: FlowSource::new(125.0, 8.3).unwrap(),
        };
        assert_abs_diff_eq!(pair.alpha_deg(), 135.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pair.speed_ratio().unwrap(), 5.2 / 8.3);
        let still = FlowPair {
            flow2: FlowSource::new(0.0, 0.0).unwrap(),
            ..pair
        };
        assert_eq!(still.speed_ratio(), None);
    }
}

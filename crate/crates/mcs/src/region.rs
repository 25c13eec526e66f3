//! Target regions for multivariate responses.
//!
//! A *target region* is the subset of response space we hope a test point's
//! unobserved response falls in. Selection asks: "is `y_j` in the region?"
//! All regions here are treated as closed sets, so `contains` includes the
//! boundary and `interior` excludes it.
//!
//! Besides membership, every region reports the distance from a point to the
//! *complement* of the region. That quantity is the workhorse of
//! distance-based nonconformity scores: it is zero outside the region and
//! grows as a point moves deeper inside, so it orders responses by how
//! comfortably they sit in the region.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which vector norm to measure distances with.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Norm {
    /// Sum of absolute values.
    L1,
    /// Euclidean norm.
    #[default]
    L2,
    /// Maximum absolute value.
    LInf,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Norm::L1 => write!(f, "1"),
            Norm::L2 => write!(f, "2"),
            Norm::LInf => write!(f, "inf"),
        }
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Norm::L1),
            "2" => Ok(Norm::L2),
            "inf" => Ok(Norm::LInf),
            other => Err(Error::InvalidArgument {
                what: "norm",
                why: format!("expected 1, 2 or inf, got {other:?}"),
            }),
        }
    }
}

fn p_norm(v: &[f64], norm: Norm) -> f64 {
    match norm {
        Norm::L1 => v.iter().map(|t| t.abs()).sum(),
        Norm::L2 => v.iter().map(|t| t * t).sum::<f64>().sqrt(),
        Norm::LInf => v.iter().map(|t| t.abs()).fold(0.0, f64::max),
    }
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_finite_slice(what: &'static str, v: &[f64]) -> Result<()> {
    if v.iter().all(|t| t.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what })
    }
}

/// A closed region of response space.
///
/// Construct with the checked constructors ([`TargetRegion::orthant`] and
/// friends) or parse one from the text format via [`TargetRegion::parse_spec`].
#[derive(Debug, Clone, PartialEq)]
pub enum TargetRegion {
    /// `{ y : y_k >= c_k for every k }` — all coordinates at least their cutoff.
    Orthant { cutoffs: Vec<f64> },
    /// `{ y : ||y - center||_2 <= radius }`.
    Ball { center: Vec<f64>, radius: f64 },
    /// `{ y : ||y - center||_2 >= radius }` — everything at or beyond the radius.
    BallComplement { center: Vec<f64>, radius: f64 },
    /// `{ y : y_k <= c_k for some k }` — at least one coordinate at or below
    /// its cutoff (the closed complement of an open orthant).
    OrthantComplement { cutoffs: Vec<f64> },
    /// `{ y : y >= cutoff }` for scalar responses.
    HalfLine { cutoff: f64 },
}

impl TargetRegion {
    /// All coordinates at least their cutoffs.
    pub fn orthant(cutoffs: Vec<f64>) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(Error::Empty {
                what: "orthant cutoffs",
            });
        }
        check_finite_slice("orthant cutoffs", &cutoffs)?;
        Ok(TargetRegion::Orthant { cutoffs })
    }

    /// Closed Euclidean ball.
    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Empty {
                what: "ball center",
            });
        }
        check_finite_slice("ball center", &center)?;
        if !radius.is_finite() || radius <= 0.0 {
            return Err(Error::InvalidArgument {
                what: "ball radius",
                why: format!("must be finite and positive, got {radius}"),
            });
        }
        Ok(TargetRegion::Ball { center, radius })
    }

    /// Complement of an open Euclidean ball.
    pub fn ball_complement(center: Vec<f64>, radius: f64) -> Result<Self> {
        match Self::ball(center, radius)? {
            TargetRegion::Ball { center, radius } => {
                Ok(TargetRegion::BallComplement { center, radius })
            }
            _ => unreachable!(),
        }
    }

    /// At least one coordinate at or below its cutoff.
    pub fn orthant_complement(cutoffs: Vec<f64>) -> Result<Self> {
        match Self::orthant(cutoffs)? {
            TargetRegion::Orthant { cutoffs } => {
                Ok(TargetRegion::OrthantComplement { cutoffs })
            }
            _ => unreachable!(),
        }
    }

    /// Scalar responses at or above a cutoff.
    pub fn half_line(cutoff: f64) -> Result<Self> {
        if !cutoff.is_finite() {
            return Err(Error::NonFinite {
                what: "half-line cutoff",
            });
        }
        Ok(TargetRegion::HalfLine { cutoff })
    }

    /// Response dimension the region lives in.
    pub fn dim(&self) -> usize {
        match self {
            TargetRegion::Orthant { cutoffs } | TargetRegion::OrthantComplement { cutoffs } => {
                cutoffs.len()
            }
            TargetRegion::Ball { center, .. } | TargetRegion::BallComplement { center, .. } => {
                center.len()
            }
            TargetRegion::HalfLine { .. } => 1,
        }
    }

    /// Short lowercase name of the region family, as used in spec files.
    pub fn kind_name(&self) -> &'static str {
        match self {
            TargetRegion::Orthant { .. } => "orthant",
            TargetRegion::Ball { .. } => "ball",
            TargetRegion::BallComplement { .. } => "ball_complement",
            TargetRegion::OrthantComplement { .. } => "orthant_complement",
            TargetRegion::HalfLine { .. } => "half_line",
        }
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "response",
                expected: self.dim(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// Is `y` in the (closed) region?
    pub fn contains(&self, y: &[f64]) -> Result<bool> {
        self.check_dim(y)?;
        check_finite_slice("response", y)?;
        Ok(match self {
            TargetRegion::Orthant { cutoffs } => {
                y.iter().zip(cutoffs).all(|(yi, ci)| yi >= ci)
            }
            TargetRegion::Ball { center, radius } => l2_dist(y, center) <= *radius,
            TargetRegion::BallComplement { center, radius } => l2_dist(y, center) >= *radius,
            TargetRegion::OrthantComplement { cutoffs } => {
                y.iter().zip(cutoffs).any(|(yi, ci)| yi <= ci)
            }
            TargetRegion::HalfLine { cutoff } => y[0] >= *cutoff,
        })
    }

    /// Is `y` in the interior of the region (strictly inside, off the boundary)?
    pub fn interior(&self, y: &[f64]) -> Result<bool> {
        self.check_dim(y)?;
        check_finite_slice("response", y)?;
        Ok(match self {
            TargetRegion::Orthant { cutoffs } => {
                y.iter().zip(cutoffs).all(|(yi, ci)| yi > ci)
            }
            TargetRegion::Ball { center, radius } => l2_dist(y, center) < *radius,
            TargetRegion::BallComplement { center, radius } => l2_dist(y, center) > *radius,
            TargetRegion::OrthantComplement { cutoffs } => {
                y.iter().zip(cutoffs).any(|(yi, ci)| yi < ci)
            }
            TargetRegion::HalfLine { cutoff } => y[0] > *cutoff,
        })
    }

    /// Distance from `z` to the complement of the region, in the given norm.
    ///
    /// This is zero whenever `z` is outside the region or on its boundary and
    /// strictly positive exactly on the interior, where it measures how deep
    /// inside the region `z` sits. Ball-shaped regions only support the
    /// Euclidean norm; the orthant-shaped regions and half-lines support all
    /// three.
    pub fn dist_to_complement(&self, z: &[f64], norm: Norm) -> Result<f64> {
        self.check_dim(z)?;
        check_finite_slice("response", z)?;
        match self {
            TargetRegion::Orthant { cutoffs } => {
                // Leaving the orthant only takes moving one coordinate below
                // its cutoff, so the distance is the smallest margin in any
                // single coordinate regardless of the norm.
                let min_margin = z
                    .iter()
                    .zip(cutoffs)
                    .map(|(zi, ci)| zi - ci)
                    .fold(f64::INFINITY, f64::min);
                Ok(min_margin.max(0.0))
            }
            TargetRegion::Ball { radius, center } => {
                if norm != Norm::L2 {
                    return Err(Error::UnsupportedNorm {
                        region: "ball",
                        norm,
                    });
                }
                Ok((radius - l2_dist(z, center)).max(0.0))
            }
            TargetRegion::BallComplement { radius, center } => {
                if norm != Norm::L2 {
                    return Err(Error::UnsupportedNorm {
                        region: "ball_complement",
                        norm,
                    });
                }
                Ok((l2_dist(z, center) - radius).max(0.0))
            }
            TargetRegion::OrthantComplement { cutoffs } => {
                // The complement is the open orthant above every cutoff, so
                // every coordinate's deficit has to be closed at once.
                let deficits: Vec<f64> = z
                    .iter()
                    .zip(cutoffs)
                    .map(|(zi, ci)| (ci - zi).max(0.0))
                    .collect();
                Ok(p_norm(&deficits, norm))
            }
            TargetRegion::HalfLine { cutoff } => Ok((z[0] - cutoff).max(0.0)),
        }
    }

    /// A canonical point on the boundary of the region.
    ///
    /// Used when scoring test points whose response is unknown: substituting a
    /// boundary point yields the least-favorable score within the region.
    pub fn boundary_point(&self) -> Vec<f64> {
        match self {
            TargetRegion::Orthant { cutoffs } | TargetRegion::OrthantComplement { cutoffs } => {
                cutoffs.clone()
            }
            TargetRegion::Ball { center, radius }
            | TargetRegion::BallComplement { center, radius } => {
                let mut p = center.clone();
                p[0] += radius;
                p
            }
            TargetRegion::HalfLine { cutoff } => vec![*cutoff],
        }
    }

    /// Parse a region from its plain-text spec.
    ///
    /// The format is line-oriented `key=value`, with `#` starting a comment:
    ///
    /// ```text
    /// kind=orthant
    /// cutoffs=1,-0.2
    /// ```
    ///
    /// Recognized kinds and their keys:
    /// `orthant`/`orthant_complement` take `cutoffs` (comma-separated);
    /// `ball`/`ball_complement` take `center` and `radius`;
    /// `half_line` takes `cutoff`.
    pub fn parse_spec(text: &str) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        for raw in text.lines() {
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(Error::RegionSpec(format!(
                    "expected key=value, got {line:?}"
                )));
            };
            let key = line[..eq].trim().to_string();
            let value = line[eq + 1..].trim().to_string();
            if pairs.iter().any(|(k, _)| *k == key) {
                return Err(Error::RegionSpec(format!("duplicate key {key:?}")));
            }
            pairs.push((key, value));
        }

        let take = |key: &str| -> Option<&str> {
            pairs
                .iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
        };
        let require = |key: &str| -> Result<&str> {
            take(key).ok_or_else(|| Error::RegionSpec(format!("missing key {key:?}")))
        };
        let parse_f64 = |key: &str, v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::RegionSpec(format!("bad number for {key:?}: {v:?}")))
        };
        let parse_list = |key: &str, v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|t| parse_f64(key, t.trim()))
                .collect::<Result<Vec<f64>>>()
        };

        let kind = require("kind")?;
        let allowed: &[&str] = match kind {
            "orthant" | "orthant_complement" => &["kind", "cutoffs"],
            "ball" | "ball_complement" => &["kind", "center", "radius"],
            "half_line" => &["kind", "cutoff"],
            other => {
                return Err(Error::RegionSpec(format!("unknown kind {other:?}")));
            }
        };
        for (k, _) in &pairs {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::RegionSpec(format!(
                    "unexpected key {k:?} for kind {kind:?}"
                )));
            }
        }

        match kind {
            "orthant" => TargetRegion::orthant(parse_list("cutoffs", require("cutoffs")?)?),
            "orthant_complement" => {
                TargetRegion::orthant_complement(parse_list("cutoffs", require("cutoffs")?)?)
            }
            "ball" => TargetRegion::ball(
                parse_list("center", require("center")?)?,
                parse_f64("radius", require("radius")?)?,
            ),
            "ball_complement" => TargetRegion::ball_complement(
                parse_list("center", require("center")?)?,
                parse_f64("radius", require("radius")?)?,
            ),
            "half_line" => TargetRegion::half_line(parse_f64("cutoff", require("cutoff")?)?),
            _ => unreachable!(),
        }
    }

    /// Emit the plain-text spec understood by [`TargetRegion::parse_spec`].
    pub fn to_spec(&self) -> String {
        fn join(v: &[f64]) -> String {
            v.iter()
                .map(|t| t.to_string())
                .collect::<Vec<_>>()
                .join(",")
        }
        match self {
            TargetRegion::Orthant { cutoffs } => {
                format!("kind=orthant\ncutoffs={}\n", join(cutoffs))
            }
            TargetRegion::OrthantComplement { cutoffs } => {
                format!("kind=orthant_complement\ncutoffs={}\n", join(cutoffs))
            }
            TargetRegion::Ball { center, radius } => {
                format!("kind=ball\ncenter={}\nradius={radius}\n", join(center))
            }
            TargetRegion::BallComplement { center, radius } => format!(
                "kind=ball_complement\ncenter={}\nradius={radius}\n",
                join(center)
            ),
            TargetRegion::HalfLine { cutoff } => format!("kind=half_line\ncutoff={cutoff}\n"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    const NORMS: [Norm; 3] = [Norm::L1, Norm::L2, Norm::LInf];

    /// Brute-force distance to the complement by scanning a 2-D grid for
    /// complement points and taking the nearest one.
    fn grid_dist(region: &TargetRegion, z: &[f64], norm: Norm, lo: f64, hi: f64, step: f64) -> f64 {
        let mut best = f64::INFINITY;
        let steps = ((hi - lo) / step).round() as usize;
        for i in 0..=steps {
            for j in 0..=steps {
                let g = [lo + i as f64 * step, lo + j as f64 * step];
                if !region.contains(&g).unwrap() {
                    let d = p_norm(&[z[0] - g[0], z[1] - g[1]], norm);
                    best = best.min(d);
                }
            }
        }
        best
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_region_2d(r: &mut ChaCha8Rng) -> TargetRegion {
        match r.random_range(0..4) {
            0 => TargetRegion::orthant(vec![
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
            ])
            .unwrap(),
            1 => TargetRegion::ball(
                vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)],
                r.random_range(0.5..2.0),
            )
            .unwrap(),
            2 => TargetRegion::ball_complement(
                vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)],
                r.random_range(0.5..2.0),
            )
            .unwrap(),
            _ => TargetRegion::orthant_complement(vec![
                r.random_range(-1.0..1.0),
                r.random_range(-1.0..1.0),
            ])
            .unwrap(),
        }
    }

    fn norms_for(region: &TargetRegion) -> &'static [Norm] {
        match region {
            TargetRegion::Ball { .. } | TargetRegion::BallComplement { .. } => &[Norm::L2],
            _ => &NORMS,
        }
    }

    #[test]
    fn orthant_membership_is_closed() {
        let r = TargetRegion::orthant(vec![1.0, 1.0]).unwrap();
        assert!(r.contains(&[1.0, 1.0]).unwrap());
        assert!(!r.interior(&[1.0, 1.0]).unwrap());
        assert!(r.interior(&[1.1, 2.0]).unwrap());
        assert!(!r.contains(&[0.99, 5.0]).unwrap());
    }

    #[test]
    fn orthant_depth_matches_grid_search() {
        let r = TargetRegion::orthant(vec![1.0, 1.0]).unwrap();
        for norm in NORMS {
            // Depth of (2,3): one unit of slack in the first coordinate.
            assert_eq!(r.dist_to_complement(&[2.0, 3.0], norm).unwrap(), 1.0);
            let oracle = grid_dist(&r, &[2.0, 3.0], norm, -3.0, 5.0, 0.02);
            assert!((oracle - 1.0).abs() < 0.05, "oracle {oracle} for {norm}");
            // Points outside have depth zero.
            assert_eq!(r.dist_to_complement(&[0.5, 3.0], norm).unwrap(), 0.0);
        }
    }

    #[test]
    fn ball_depth_at_center_is_radius() {
        let r = TargetRegion::ball(vec![0.0, 0.0], 2.0).unwrap();
        assert_eq!(r.dist_to_complement(&[0.0, 0.0], Norm::L2).unwrap(), 2.0);
        let oracle = grid_dist(&r, &[0.0, 0.0], Norm::L2, -3.0, 3.0, 0.02);
        assert!((oracle - 2.0).abs() < 0.05);
    }

    #[test]
    fn ball_rejects_non_euclidean_norms() {
        let r = TargetRegion::ball(vec![0.0, 0.0], 2.0).unwrap();
        for norm in [Norm::L1, Norm::LInf] {
            assert!(matches!(
                r.dist_to_complement(&[0.0, 0.0], norm),
                Err(Error::UnsupportedNorm { .. })
            ));
        }
    }

    #[test]
    fn depth_agrees_with_grid_search_on_random_regions() {
        let mut r = rng(17);
        for case in 0..30 {
            let region = random_region_2d(&mut r);
            let z = [r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)];
            for &norm in norms_for(&region) {
                let got = region.dist_to_complement(&z, norm).unwrap();
                let oracle = grid_dist(&region, &z, norm, -4.0, 4.0, 0.02);
                assert!(
                    (got - oracle).abs() < 0.06,
                    "case {case}: {region:?} z={z:?} norm={norm} got={got} oracle={oracle}"
                );
            }
        }
    }

    #[test]
    fn depth_is_positive_exactly_on_the_interior() {
        let mut r = rng(23);
        for _ in 0..4000 {
            let region = random_region_2d(&mut r);
            let z = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
            for &norm in norms_for(&region) {
                let d = region.dist_to_complement(&z, norm).unwrap();
                let interior = region.interior(&z).unwrap();
                assert_eq!(d > 0.0, interior, "{region:?} z={z:?} d={d}");
                if region.contains(&z).unwrap() {
                    assert!(d >= 0.0);
                } else {
                    assert_eq!(d, 0.0);
                }
            }
        }
    }

    #[test]
    fn interior_implies_containment() {
        let mut r = rng(29);
        for _ in 0..4000 {
            let region = random_region_2d(&mut r);
            let z = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
            if region.interior(&z).unwrap() {
                assert!(region.contains(&z).unwrap());
            }
        }
    }

    #[test]
    fn depth_is_one_lipschitz() {
        let mut r = rng(31);
        for _ in 0..4000 {
            let region = random_region_2d(&mut r);
            let a = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
            let b = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
            for &norm in norms_for(&region) {
                let da = region.dist_to_complement(&a, norm).unwrap();
                let db = region.dist_to_complement(&b, norm).unwrap();
                let gap = p_norm(&[a[0] - b[0], a[1] - b[1]], norm);
                assert!(
                    (da - db).abs() <= gap + 1e-9,
                    "{region:?} {norm}: |{da} - {db}| > {gap}"
                );
            }
        }
    }

    #[test]
    fn boundary_point_sits_on_the_boundary() {
        // Quarter-integer parameters keep center + radius exact in floating
        // point, so the boundary point lands exactly on the boundary.
        let mut r = rng(37);
        let quarter = |r: &mut ChaCha8Rng| r.random_range(-8..8) as f64 * 0.25;
        for _ in 0..500 {
            let region = match r.random_range(0..5) {
                0 => TargetRegion::orthant(vec![quarter(&mut r), quarter(&mut r)]).unwrap(),
                1 => TargetRegion::ball(
                    vec![quarter(&mut r), quarter(&mut r)],
                    r.random_range(1..8) as f64 * 0.25,
                )
                .unwrap(),
                2 => TargetRegion::ball_complement(
                    vec![quarter(&mut r), quarter(&mut r)],
                    r.random_range(1..8) as f64 * 0.25,
                )
                .unwrap(),
                3 => {
                    TargetRegion::orthant_complement(vec![quarter(&mut r), quarter(&mut r)])
                        .unwrap()
                }
                _ => TargetRegion::half_line(quarter(&mut r)).unwrap(),
            };
            let b = region.boundary_point();
            assert_eq!(b.len(), region.dim());
            assert!(region.contains(&b).unwrap(), "{region:?} boundary {b:?}");
            assert!(!region.interior(&b).unwrap(), "{region:?} boundary {b:?}");
            for &norm in norms_for(&region) {
                assert_eq!(region.dist_to_complement(&b, norm).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn ball_boundary_point_is_along_first_axis() {
        let r = TargetRegion::ball(vec![2.0, 2.0], 1.5).unwrap();
        assert_eq!(r.boundary_point(), vec![3.5, 2.0]);
    }

    #[test]
    fn half_line_membership_and_depth() {
        let r = TargetRegion::half_line(0.5).unwrap();
        assert!(r.contains(&[0.5]).unwrap());
        assert!(!r.interior(&[0.5]).unwrap());
        assert!(!r.contains(&[0.49]).unwrap());
        for norm in NORMS {
            assert_eq!(r.dist_to_complement(&[2.0], norm).unwrap(), 1.5);
            assert_eq!(r.dist_to_complement(&[-1.0], norm).unwrap(), 0.0);
        }
        assert_eq!(r.boundary_point(), vec![0.5]);
    }

    #[test]
    fn spec_round_trips() {
        let mut r = rng(41);
        for _ in 0..200 {
            let region = match r.random_range(0..5) {
                0..=3 => random_region_2d(&mut r),
                _ => TargetRegion::half_line(r.random_range(-1.0..1.0)).unwrap(),
            };
            let text = region.to_spec();
            let parsed = TargetRegion::parse_spec(&text).unwrap();
            assert_eq!(parsed, region, "spec was:\n{text}");
        }
    }

    #[test]
    fn spec_parses_comments_and_whitespace() {
        let text = "# target\nkind = orthant   # family\n\n cutoffs = 1.0 , -0.2 \n";
        let region = TargetRegion::parse_spec(text).unwrap();
        assert_eq!(region, TargetRegion::orthant(vec![1.0, -0.2]).unwrap());
    }

    #[test]
    fn spec_rejects_malformed_input() {
        for bad in [
            "cutoffs=1,2\n",                          // missing kind
            "kind=torus\ncutoffs=1\n",                // unknown kind
            "kind=orthant\n",                         // missing cutoffs
            "kind=orthant\ncutoffs=1,x\n",            // bad number
            "kind=orthant\ncutoffs=1\ncutoffs=2\n",   // duplicate key
            "kind=ball\ncenter=0,0\nradius=1\ncutoff=3\n", // stray key
            "kind=ball\ncenter=0,0\nradius=-1\n",     // bad radius
            "just words\n",                           // not key=value
        ] {
            assert!(
                TargetRegion::parse_spec(bad).is_err(),
                "accepted bad spec {bad:?}"
            );
        }
    }

    #[test]
    fn constructors_validate() {
        assert!(TargetRegion::orthant(vec![]).is_err());
        assert!(TargetRegion::orthant(vec![f64::NAN]).is_err());
        assert!(TargetRegion::ball(vec![0.0], 0.0).is_err());
        assert!(TargetRegion::ball(vec![0.0], f64::INFINITY).is_err());
        assert!(TargetRegion::half_line(f64::NAN).is_err());
        let r = TargetRegion::orthant(vec![0.0, 0.0]).unwrap();
        assert!(matches!(
            r.contains(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(r.contains(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn norm_parsing_round_trips() {
        for norm in NORMS {
            assert_eq!(norm.to_string().parse::<Norm>().unwrap(), norm);
        }
        assert!("3".parse::<Norm>().is_err());
    }
}

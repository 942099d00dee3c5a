//! Per-ROI feature computation.

pub mod intensity;
pub mod moments;
pub mod shape;
pub mod texture;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::roistore::{convex_hull, trace_contour, PixelCloud};
use intensity::{intensity_features, IntensityError, IntensityFeatureSet};
use moments::{moments, MomentSet};
use shape::{shape_features, ShapeFeatureSet};
use texture::{
    discretize, glcm, glcm_features, glrlm, glszm, ngtdm, GlcmParams, TextureError,
    GLCM_FEATURE_NAMES, GLRLM_FEATURE_NAMES, GLSZM_FEATURE_NAMES, NGTDM_FEATURE_NAMES,
};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Intensity(#[from] IntensityError),
    #[error(transparent)]
    Texture(#[from] TextureError),
    #[error("unknown feature group '{0}'")]
    UnknownGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FeatureGroup {
    Intensity,
    Shape,
    Moments,
    Glcm,
    Glrlm,
    Glszm,
    Ngtdm,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 7] = [
        FeatureGroup::Intensity,
        FeatureGroup::Shape,
        FeatureGroup::Moments,
        FeatureGroup::Glcm,
        FeatureGroup::Glrlm,
        FeatureGroup::Glszm,
        FeatureGroup::Ngtdm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureGroup::Intensity => "intensity",
            FeatureGroup::Shape => "shape",
            FeatureGroup::Moments => "moments",
            FeatureGroup::Glcm => "glcm",
            FeatureGroup::Glrlm => "glrlm",
            FeatureGroup::Glszm => "glszm",
            FeatureGroup::Ngtdm => "ngtdm",
        }
    }

    /// Parse a list of group names; `*ALL*` selects every group. The result
    /// is sorted and deduplicated.
    pub fn parse_list<S: AsRef<str>>(names: &[S]) -> Result<Vec<FeatureGroup>, FeatureError> {
        let mut out = Vec::new();
        for n in names {
            let n = n.as_ref().trim();
            if n == "*ALL*" {
                out.extend(Self::ALL);
            } else {
                out.push(n.parse()?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }
}

impl fmt::Display for FeatureGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureGroup {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|g| g.name() == lower)
            .ok_or_else(|| FeatureError::UnknownGroup(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSettings {
    pub histogram_bins: usize,
    pub texture: GlcmParams,
}

/// Ordered `(column, value)` pairs.
pub type FeatureRow = Vec<(String, f64)>;

/// Column names produced by [`compute_features`] for the given groups.
pub fn column_names(groups: &[FeatureGroup], settings: &FeatureSettings) -> Vec<String> {
    let mut out = Vec::new();
    for &g in groups {
        match g {
            FeatureGroup::Intensity => {
                out.extend(IntensityFeatureSet::NAMES.iter().map(|s| s.to_string()))
            }
            FeatureGroup::Shape => out.extend(ShapeFeatureSet::names()),
            FeatureGroup::Moments => {
                out.extend(MomentSet::names(""));
                out.extend(MomentSet::names("WEIGHTED_"));
            }
            FeatureGroup::Glcm => out.extend(angled("GLCM", &GLCM_FEATURE_NAMES, settings)),
            FeatureGroup::Glrlm => out.extend(angled("GLRLM", &GLRLM_FEATURE_NAMES, settings)),
            FeatureGroup::Glszm => out.extend(GLSZM_FEATURE_NAMES.iter().map(|n| format!("GLSZM_{n}"))),
            FeatureGroup::Ngtdm => out.extend(NGTDM_FEATURE_NAMES.iter().map(|n| format!("NGTDM_{n}"))),
        }
    }
    out
}

fn angled(family: &str, names: &[&str], settings: &FeatureSettings) -> Vec<String> {
    let mut out = Vec::new();
    for n in names {
        for a in &settings.texture.angles {
            out.push(format!("{family}_{n}_{a}"));
        }
        out.push(format!("{family}_{n}_AVE"));
    }
    out
}

/// Per-angle values plus their mean over angles with any data.
fn push_angled(values: &mut Vec<f64>, per_angle: &[(bool, Vec<f64>)]) {
    let width = per_angle.first().map_or(0, |(_, v)| v.len());
    let live = per_angle.iter().filter(|(ok, _)| *ok).count();
    for k in 0..width {
        values.extend(per_angle.iter().map(|(_, v)| v[k]));
        let ave = if live == 0 {
            0.0
        } else {
            per_angle.iter().filter(|(ok, _)| *ok).map(|(_, v)| v[k]).sum::<f64>() / live as f64
        };
        values.push(ave);
    }
}

pub fn compute_features(
    cloud: &PixelCloud,
    groups: &[FeatureGroup],
    settings: &FeatureSettings,
) -> Result<FeatureRow, FeatureError> {
    settings.texture.validate()?;
    let needs_contour = groups
        .iter()
        .any(|g| matches!(g, FeatureGroup::Intensity | FeatureGroup::Shape));
    let contour = needs_contour.then(|| trace_contour(cloud));
    let roi = if groups.iter().any(|g| g >= &FeatureGroup::Glcm) {
        Some(discretize(cloud, settings.texture.ng)?)
    } else {
        None
    };

    let mut values = Vec::new();
    for &g in groups {
        match g {
            FeatureGroup::Intensity => {
                let f = intensity_features(cloud, contour.as_ref().unwrap(), settings.histogram_bins)?;
                values.extend(f.values());
            }
            FeatureGroup::Shape => {
                let hull = convex_hull(cloud);
                values.extend(shape_features(cloud, contour.as_ref().unwrap(), &hull).values());
            }
            FeatureGroup::Moments => {
                values.extend(moments(cloud, false)?.values());
                match moments(cloud, true) {
                    Ok(m) => values.extend(m.values()),
                    Err(IntensityError::ZeroMass) => values.extend([0.0; 31]),
                    Err(e) => return Err(e.into()),
                }
            }
            FeatureGroup::Glcm => {
                let per: Vec<_> = glcm(roi.as_ref().unwrap(), &settings.texture)
                    .iter()
                    .map(|m| (!m.is_empty(), glcm_features(m).to_vec()))
                    .collect();
                push_angled(&mut values, &per);
            }
            FeatureGroup::Glrlm => {
                let per: Vec<_> = glrlm(roi.as_ref().unwrap(), &settings.texture.angles)
                    .iter()
                    .map(|m| (m.run_count() > 0, m.features().to_vec()))
                    .collect();
                push_angled(&mut values, &per);
            }
            FeatureGroup::Glszm => values.extend(glszm(roi.as_ref().unwrap()).features()),
            FeatureGroup::Ngtdm => values.extend(ngtdm(roi.as_ref().unwrap()).features()),
        }
    }
    let names = column_names(groups, settings);
    debug_assert_eq!(names.len(), values.len());
    Ok(names.into_iter().zip(values).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use texture::Angle;

    fn settings() -> FeatureSettings {
        FeatureSettings {
            histogram_bins: 256,
            texture: GlcmParams::new(8, 1, Angle::ALL, true).unwrap(),
        }
    }

    fn blob() -> PixelCloud {
        let mut t = Vec::new();
        for y in 0..6u32 {
            for x in 0..7u32 {
                if (x + y) % 5 != 0 {
                    t.push((x + 10, y + 3, (x * 31 + y * 17) as u16));
                }
            }
        }
        PixelCloud::from_triples(4, &t).unwrap()
    }

    #[test]
    fn every_group_matches_its_names() {
        let s = settings();
        for g in FeatureGroup::ALL {
            let row = compute_features(&blob(), &[g], &s).unwrap();
            assert_eq!(row.len(), column_names(&[g], &s).len(), "{g}");
            assert!(row.iter().all(|(_, v)| v.is_finite()), "{g}");
        }
    }

    #[test]
    fn zero_mass_moments_are_zero() {
        let c = PixelCloud::from_triples(1, &[(0, 0, 0), (1, 0, 0)]).unwrap();
        let row = compute_features(&c, &[FeatureGroup::Moments], &settings()).unwrap();
        let w: Vec<_> = row.iter().filter(|(n, _)| n.starts_with("WEIGHTED_")).collect();
        assert_eq!(w.len(), 31);
        assert!(w.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn single_pixel_all_groups() {
        let c = PixelCloud::from_triples(1, &[(5, 5, 100)]).unwrap();
        let row = compute_features(&c, &FeatureGroup::ALL, &settings()).unwrap();
        assert!(row.iter().all(|(_, v)| v.is_finite()));
        let get = |n: &str| row.iter().find(|(k, _)| k == n).unwrap().1;
        assert_eq!(get("GLCM_ASM_AVE"), 0.0);
        assert_eq!(get("NGTDM_COARSENESS"), 0.0);
    }

    #[test]
    fn group_parsing() {
        assert_eq!(FeatureGroup::parse_list(&["*ALL*"]).unwrap(), FeatureGroup::ALL.to_vec());
        assert_eq!(
            FeatureGroup::parse_list(&["shape", "GLCM", "shape"]).unwrap(),
            vec![FeatureGroup::Shape, FeatureGroup::Glcm]
        );
        assert!(FeatureGroup::parse_list(&["haralick"]).is_err());
    }
}

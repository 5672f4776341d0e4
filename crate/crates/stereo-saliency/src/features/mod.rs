//! The 24 conspicuity maps: photometric (brightness, color, texture),
//! motion, depth, and detector-driven high-level features.

pub mod depth;
pub mod highlevel;
pub mod motion;
pub mod photometric;

use serde::{Deserialize, Serialize};

/// Canonical feature identities in stack order. Every on-disk stack, model
/// file, and importance report uses this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    BrightnessVarianceContrast,
    BrightnessContrast,
    ColorHistogram,
    ColorWarmth,
    ColorSaturation,
    ColorHvsSensitivity,
    ColorEmpirical,
    ColorContrastA,
    ColorContrastB,
    Texture,
    MotionDx,
    MotionDy,
    MotionDz,
    MotionVelocity,
    MotionZEmphasis,
    MotionAcceleration,
    MotionSurprise,
    Depth,
    Face,
    Person,
    Vehicle,
    Animal,
    Text,
    Horizon,
}

/// Number of feature maps in a full stack.
pub const FEATURE_COUNT: usize = 24;

/// All features in canonical stack order.
pub const FEATURE_ORDER: [FeatureKind; FEATURE_COUNT] = [
    FeatureKind::BrightnessVarianceContrast,
    FeatureKind::BrightnessContrast,
    FeatureKind::ColorHistogram,
    FeatureKind::ColorWarmth,
    FeatureKind::ColorSaturation,
    FeatureKind::ColorHvsSensitivity,
    FeatureKind::ColorEmpirical,
    FeatureKind::ColorContrastA,
    FeatureKind::ColorContrastB,
    FeatureKind::Texture,
    FeatureKind::MotionDx,
    FeatureKind::MotionDy,
    FeatureKind::MotionDz,
    FeatureKind::MotionVelocity,
    FeatureKind::MotionZEmphasis,
    FeatureKind::MotionAcceleration,
    FeatureKind::MotionSurprise,
    FeatureKind::Depth,
    FeatureKind::Face,
    FeatureKind::Person,
    FeatureKind::Vehicle,
    FeatureKind::Animal,
    FeatureKind::Text,
    FeatureKind::Horizon,
];

impl FeatureKind {
    /// Stable snake_case identifier used in file names, CSVs, and CLI args.
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::BrightnessVarianceContrast => "brightness_variance_contrast",
            FeatureKind::BrightnessContrast => "brightness_contrast",
            FeatureKind::ColorHistogram => "color_histogram",
            FeatureKind::ColorWarmth => "color_warmth",
            FeatureKind::ColorSaturation => "color_saturation",
            FeatureKind::ColorHvsSensitivity => "color_hvs_sensitivity",
            FeatureKind::ColorEmpirical => "color_empirical",
            FeatureKind::ColorContrastA => "color_contrast_a",
            FeatureKind::ColorContrastB => "color_contrast_b",
            FeatureKind::Texture => "texture",
            FeatureKind::MotionDx => "motion_dx",
            FeatureKind::MotionDy => "motion_dy",
            FeatureKind::MotionDz => "motion_dz",
            FeatureKind::MotionVelocity => "motion_velocity",
            FeatureKind::MotionZEmphasis => "motion_z_emphasis",
            FeatureKind::MotionAcceleration => "motion_acceleration",
            FeatureKind::MotionSurprise => "motion_surprise",
            FeatureKind::Depth => "depth",
            FeatureKind::Face => "face",
            FeatureKind::Person => "person",
            FeatureKind::Vehicle => "vehicle",
            FeatureKind::Animal => "animal",
            FeatureKind::Text => "text",
            FeatureKind::Horizon => "horizon",
        }
    }

    /// Index in the canonical stack order.
    pub fn index(self) -> usize {
        FEATURE_ORDER
            .iter()
            .position(|&f| f == self)
            .expect("all features are listed")
    }

    pub fn from_name(name: &str) -> Option<FeatureKind> {
        FEATURE_ORDER.iter().copied().find(|f| f.name() == name)
    }

    /// High-level features come from external detections and skip the
    /// sparsity shaping step by default.
    pub fn is_high_level(self) -> bool {
        matches!(
            self,
            FeatureKind::Face
                | FeatureKind::Person
                | FeatureKind::Vehicle
                | FeatureKind::Animal
                | FeatureKind::Text
                | FeatureKind::Horizon
        )
    }
}

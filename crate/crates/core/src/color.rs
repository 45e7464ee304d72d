//! The ten-color body/cube palette and the fixed scene greys.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// 24-bit RGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }

    /// Euclidean distance in channel space.
    pub fn distance(self, other: Rgb) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| {
                let d = f64::from(a) - f64::from(b);
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Scales each channel by `factor` in [0, 1] with round-half-away rounding.
    pub fn scaled(self, factor: f64) -> Rgb {
        let f = |c: u8| (f64::from(c) * factor).round().clamp(0.0, 255.0) as u8;
        Rgb([f(self.0[0]), f(self.0[1]), f(self.0[2])])
    }
}

pub const WALL_GREY: Rgb = Rgb::new(140, 140, 140);
pub const FLOOR_GREY: Rgb = Rgb::new(110, 110, 110);
pub const CEILING_GREY: Rgb = Rgb::new(250, 250, 250);
pub const OCCLUDER_GREY: Rgb = Rgb::new(10, 10, 10);

/// Body and cube colors. The palette has exactly ten entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorLabel {
    Red,
    Green,
    Blue,
    Yellow,
    Orange,
    Purple,
    Cyan,
    Magenta,
    Brown,
    Pink,
}

impl ColorLabel {
    pub const ALL: [ColorLabel; 10] = [
        ColorLabel::Red,
        ColorLabel::Green,
        ColorLabel::Blue,
        ColorLabel::Yellow,
        ColorLabel::Orange,
        ColorLabel::Purple,
        ColorLabel::Cyan,
        ColorLabel::Magenta,
        ColorLabel::Brown,
        ColorLabel::Pink,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ColorLabel::Red => "red",
            ColorLabel::Green => "green",
            ColorLabel::Blue => "blue",
            ColorLabel::Yellow => "yellow",
            ColorLabel::Orange => "orange",
            ColorLabel::Purple => "purple",
            ColorLabel::Cyan => "cyan",
            ColorLabel::Magenta => "magenta",
            ColorLabel::Brown => "brown",
            ColorLabel::Pink => "pink",
        }
    }

    pub fn rgb(self) -> Rgb {
        match self {
            ColorLabel::Red => Rgb::new(220, 20, 20),
            ColorLabel::Green => Rgb::new(20, 170, 40),
            ColorLabel::Blue => Rgb::new(30, 50, 230),
            ColorLabel::Yellow => Rgb::new(245, 235, 30),
            ColorLabel::Orange => Rgb::new(255, 135, 0),
            ColorLabel::Purple => Rgb::new(120, 20, 170),
            ColorLabel::Cyan => Rgb::new(0, 225, 235),
            ColorLabel::Magenta => Rgb::new(235, 20, 220),
            ColorLabel::Brown => Rgb::new(110, 55, 5),
            ColorLabel::Pink => Rgb::new(255, 150, 200),
        }
    }

    /// Darker shade used for the head band on robot bodies.
    pub fn band_rgb(self) -> Rgb {
        self.rgb().scaled(0.55)
    }
}

impl fmt::Display for ColorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown color label `{0}`")]
pub struct UnknownColor(pub String);

impl FromStr for ColorLabel {
    type Err = UnknownColor;

    /// Case-insensitive exact match against palette names.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        ColorLabel::ALL
            .iter()
            .copied()
            .find(|c| c.name() == lower)
            .ok_or_else(|| UnknownColor(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn palette_has_ten_distinct_colors() {
        assert_eq!(ColorLabel::ALL.len(), 10);
        for (i, a) in ColorLabel::ALL.iter().enumerate() {
            for b in &ColorLabel::ALL[i + 1..] {
                assert!(
                    a.rgb().distance(b.rgb()) >= 100.0,
                    "{a} vs {b}: {}",
                    a.rgb().distance(b.rgb())
                );
            }
        }
    }

    #[test]
    fn palette_is_far_from_scene_greys() {
        for c in ColorLabel::ALL {
            for g in [WALL_GREY, FLOOR_GREY, CEILING_GREY, OCCLUDER_GREY] {
                assert!(c.rgb().distance(g) >= 100.0, "{c} vs {g:?}");
            }
        }
    }

    #[test]
    fn parse_is_case_insensitive_and_exact() {
        assert_eq!("Blue".parse::<ColorLabel>().unwrap(), ColorLabel::Blue);
        assert_eq!("MAGENTA".parse::<ColorLabel>().unwrap(), ColorLabel::Magenta);
        assert!("navy".parse::<ColorLabel>().is_err());
        assert!("blue ".parse::<ColorLabel>().is_err());
    }
}

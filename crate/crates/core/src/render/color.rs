use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::store::Base;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }

    pub fn to_hex(self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.0[0], self.0[1], self.0[2])
    }

    /// Scale HSV saturation by `num / den` keeping hue and value. For a fixed
    /// hue and value each channel is linear in saturation, so this is
    /// `c' = max - f * (max - c)`, rounded half up.
    pub fn with_saturation(self, num: u64, den: u64) -> Rgb {
        if den == 0 || num >= den {
            return self;
        }
        let max = u64::from(*self.0.iter().max().unwrap());
        let channel = |c: u8| {
            let delta = max - u64::from(c);
            let scaled = (2 * delta * num + den) / (2 * den);
            (max - scaled) as u8
        };
        Rgb([channel(self.0[0]), channel(self.0[1]), channel(self.0[2])])
    }

    /// HSV saturation in [0, 1].
    pub fn saturation(self) -> f64 {
        let max = *self.0.iter().max().unwrap();
        let min = *self.0.iter().min().unwrap();
        if max == 0 {
            0.0
        } else {
            f64::from(max - min) / f64::from(max)
        }
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Rgb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("invalid color {s:?}, expected #RRGGBB"));
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).expect("validated hex");
        Ok(Rgb([byte(0), byte(2), byte(4)]))
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What a cell means, independent of the palette. The declaration order is
/// the tie-break order for modal overview pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorRole {
    Base(Base),
    Missing,
    RefMatch,
    RefDiff,
    HomAlt,
    Het,
    HomRef,
    Selection,
}

impl ColorRole {
    pub(crate) const COUNT: usize = 11;

    pub(crate) fn index(self) -> usize {
        match self {
            ColorRole::Base(b) => b.code() as usize,
            ColorRole::Missing => 4,
            ColorRole::RefMatch => 5,
            ColorRole::RefDiff => 6,
            ColorRole::HomAlt => 7,
            ColorRole::Het => 8,
            ColorRole::HomRef => 9,
            ColorRole::Selection => 10,
        }
    }

    pub(crate) fn from_index(i: usize) -> ColorRole {
        match i {
            0..=3 => ColorRole::Base(Base::ALL[i]),
            4 => ColorRole::Missing,
            5 => ColorRole::RefMatch,
            6 => ColorRole::RefDiff,
            7 => ColorRole::HomAlt,
            8 => ColorRole::Het,
            9 => ColorRole::HomRef,
            _ => ColorRole::Selection,
        }
    }
}

pub const GREEN: Rgb = Rgb::new(0x4D, 0xAF, 0x4A);
pub const BLUE: Rgb = Rgb::new(0x37, 0x7E, 0xB8);
pub const RED: Rgb = Rgb::new(0xE4, 0x1A, 0x1C);
pub const YELLOW: Rgb = Rgb::new(0xFF, 0xFF, 0x33);
pub const WHITE: Rgb = Rgb::new(0xFF, 0xFF, 0xFF);
pub const BLACK: Rgb = Rgb::new(0x00, 0x00, 0x00);
/// Cell grid lines; not part of the user palette.
pub const GRID: Rgb = Rgb::new(0xBD, 0xBD, 0xBD);

/// Qualitative palette for categorical meta values (ColorBrewer Set3).
pub const CATEGORY_PALETTE: [Rgb; 12] = [
    Rgb::new(0x8D, 0xD3, 0xC7),
    Rgb::new(0xFF, 0xFF, 0xB3),
    Rgb::new(0xBE, 0xBA, 0xDA),
    Rgb::new(0xFB, 0x80, 0x72),
    Rgb::new(0x80, 0xB1, 0xD3),
    Rgb::new(0xFD, 0xB4, 0x62),
    Rgb::new(0xB3, 0xDE, 0x69),
    Rgb::new(0xFC, 0xCD, 0xE5),
    Rgb::new(0xD9, 0xD9, 0xD9),
    Rgb::new(0xBC, 0x80, 0xBD),
    Rgb::new(0xCC, 0xEB, 0xC5),
    Rgb::new(0xFF, 0xED, 0x6F),
];

/// Colors for categories given their lexicographic ranks, cycling through
/// [`CATEGORY_PALETTE`].
pub fn category_colors(ranks: &[u32]) -> Vec<Rgb> {
    ranks.iter().map(|&r| CATEGORY_PALETTE[r as usize % CATEGORY_PALETTE.len()]).collect()
}

/// User-adjustable palette. Defaults follow ColorBrewer Set1 hues.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorScheme {
    pub a: Rgb,
    pub c: Rgb,
    pub g: Rgb,
    pub t: Rgb,
    pub missing: Rgb,
    pub ref_match: Rgb,
    pub ref_diff: Rgb,
    pub hom_alt: Rgb,
    pub het: Rgb,
    pub hom_ref: Rgb,
    pub selection: Rgb,
}

impl Default for ColorScheme {
    fn default() -> Self {
        ColorScheme {
            a: GREEN,
            c: BLUE,
            g: YELLOW,
            t: RED,
            missing: WHITE,
            ref_match: BLUE,
            ref_diff: YELLOW,
            hom_alt: RED,
            het: YELLOW,
            hom_ref: GREEN,
            selection: BLACK,
        }
    }
}

impl ColorScheme {
    pub fn color(&self, role: ColorRole) -> Rgb {
        match role {
            ColorRole::Base(Base::A) => self.a,
            ColorRole::Base(Base::C) => self.c,
            ColorRole::Base(Base::G) => self.g,
            ColorRole::Base(Base::T) => self.t,
            ColorRole::Missing => self.missing,
            ColorRole::RefMatch => self.ref_match,
            ColorRole::RefDiff => self.ref_diff,
            ColorRole::HomAlt => self.hom_alt,
            ColorRole::Het => self.het,
            ColorRole::HomRef => self.hom_ref,
            ColorRole::Selection => self.selection,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip() {
        let c: Rgb = "#4daf4a".parse().unwrap();
        assert_eq!(c, GREEN);
        assert_eq!(c.to_hex(), "#4DAF4A");
        assert!("#12345".parse::<Rgb>().is_err());
        assert!("zzzzzz".parse::<Rgb>().is_err());
    }

    #[test]
    fn saturation_scaling() {
        assert_eq!(RED.with_saturation(1, 1), RED);
        assert_eq!(RED.with_saturation(0, 1), Rgb::new(0xE4, 0xE4, 0xE4));
        let half = BLUE.with_saturation(1, 2);
        assert!((half.saturation() - BLUE.saturation() / 2.0).abs() < 0.01);
        // Value (max channel) is preserved.
        assert_eq!(half.0.iter().max(), BLUE.0.iter().max());
    }

    #[test]
    fn role_index_round_trip() {
        for i in 0..ColorRole::COUNT {
            assert_eq!(ColorRole::from_index(i).index(), i);
        }
    }

    #[test]
    fn partial_scheme_override() {
        let s: ColorScheme = serde_json::from_str(r##"{"a":"#000001"}"##).unwrap();
        assert_eq!(s.a, Rgb::new(0, 0, 1));
        assert_eq!(s.c, BLUE);
    }
}

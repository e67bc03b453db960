use std::fmt;

use serde::{Deserialize, Serialize};

/// One of the seventeen CSS 2.1 named colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NamedColor {
    pub name: &'static str,
    pub rgb: [u8; 3],
}

impl fmt::Display for NamedColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

/// The CSS 2.1 keyword colors, alphabetical.
pub const CSS21_COLORS: [NamedColor; 17] = [
    NamedColor { name: "aqua", rgb: [0, 255, 255] },
    NamedColor { name: "black", rgb: [0, 0, 0] },
    NamedColor { name: "blue", rgb: [0, 0, 255] },
    NamedColor { name: "fuchsia", rgb: [255, 0, 255] },
    NamedColor { name: "gray", rgb: [128, 128, 128] },
    NamedColor { name: "green", rgb: [0, 128, 0] },
    NamedColor { name: "lime", rgb: [0, 255, 0] },
    NamedColor { name: "maroon", rgb: [128, 0, 0] },
    NamedColor { name: "navy", rgb: [0, 0, 128] },
    NamedColor { name: "olive", rgb: [128, 128, 0] },
    NamedColor { name: "orange", rgb: [255, 165, 0] },
    NamedColor { name: "purple", rgb: [128, 0, 128] },
    NamedColor { name: "red", rgb: [255, 0, 0] },
    NamedColor { name: "silver", rgb: [192, 192, 192] },
    NamedColor { name: "teal", rgb: [0, 128, 128] },
    NamedColor { name: "white", rgb: [255, 255, 255] },
    NamedColor { name: "yellow", rgb: [255, 255, 0] },
];

pub fn color_by_name(name: &str) -> Option<NamedColor> {
    CSS21_COLORS.iter().copied().find(|c| c.name == name)
}

pub fn is_color_name(name: &str) -> bool {
    color_by_name(name).is_some()
}

fn dist2(a: [u8; 3], b: [u8; 3]) -> i32 {
    (0..3).map(|i| (i32::from(a[i]) - i32::from(b[i])).pow(2)).sum()
}

/// The closest named color by Euclidean RGB distance. Equal distances go to
/// the alphabetically first name.
pub fn nearest_named_color(rgb: [u8; 3]) -> NamedColor {
    let mut best = CSS21_COLORS[0];
    let mut best_d = dist2(rgb, best.rgb);
    for c in &CSS21_COLORS[1..] {
        let d = dist2(rgb, c.rgb);
        if d < best_d {
            best = *c;
            best_d = d;
        }
    }
    best
}

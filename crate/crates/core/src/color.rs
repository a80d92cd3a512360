//! sRGB → CIELAB conversion and the CIE76 / CIEDE2000 color difference metrics.
//!
//! Conversions assume 8-bit sRGB with the standard piecewise transfer curve,
//! a D65 reference white and the 2° standard observer. All math is `f64`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An 8-bit sRGB color. Channel range is enforced by the type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u8; 3]", into = "[u8; 3]")]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);
    pub const WHITE: Rgb = Rgb::new(255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb { r, g, b }
    }

    /// Uppercase `#RRGGBB`.
    pub fn hex(&self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.r, self.g, self.b)
    }

    pub fn channels(&self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    /// Channels divided by 255, the regression target space.
    pub fn to_unit(&self) -> [f64; 3] {
        [self.r, self.g, self.b].map(|c| f64::from(c) / 255.0)
    }

    pub fn to_lab(&self) -> LabColor {
        rgb_to_lab(*self)
    }
}

impl From<[u8; 3]> for Rgb {
    fn from([r, g, b]: [u8; 3]) -> Self {
        Rgb { r, g, b }
    }
}

impl From<Rgb> for [u8; 3] {
    fn from(c: Rgb) -> Self {
        c.channels()
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.r, self.g, self.b)
    }
}

impl FromStr for Rgb {
    type Err = Error;

    /// Accepts `#RRGGBB` / `RRGGBB` or `r,g,b`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("not a color: `{s}`"));
        if s.contains(',') {
            let parts: Vec<&str> = s.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(bad());
            }
            let mut ch = [0u8; 3];
            for (slot, p) in ch.iter_mut().zip(&parts) {
                *slot = p.parse().map_err(|_| bad())?;
            }
            return Ok(Rgb::from(ch));
        }
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.is_ascii() {
            return Err(bad());
        }
        let byte = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).map_err(|_| bad());
        Ok(Rgb::new(byte(0)?, byte(2)?, byte(4)?))
    }
}

/// CIELAB coordinates relative to the D65 white.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        LabColor { l, a, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cie76,
    #[default]
    Ciede2000,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Cie76 => "cie76",
            Metric::Ciede2000 => "ciede2000",
        }
    }

    pub fn between(&self, x: LabColor, y: LabColor) -> DeltaE {
        match self {
            Metric::Cie76 => delta_e_76(x, y),
            Metric::Ciede2000 => delta_e_2000(x, y),
        }
    }

    pub fn between_rgb(&self, x: Rgb, y: Rgb) -> f64 {
        self.between(rgb_to_lab(x), rgb_to_lab(y)).value
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cie76" | "de76" => Ok(Metric::Cie76),
            "ciede2000" | "de2000" | "cie2000" => Ok(Metric::Ciede2000),
            other => Err(Error::invalid(format!("unknown metric `{other}`"))),
        }
    }
}

/// A color difference together with the formula that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaE {
    pub value: f64,
    pub metric: Metric,
}

// sRGB (linear) → XYZ, IEC 61966-2-1.
const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const LAB_EPSILON: f64 = 216.0 / 24389.0;
const LAB_KAPPA: f64 = 24389.0 / 27.0;

/// D65 white as the image of linear RGB (1,1,1), so neutral inputs land on a* = b* = 0.
fn white_point() -> [f64; 3] {
    SRGB_TO_XYZ.map(|row| row.iter().sum())
}

fn srgb_decode(channel: u8) -> f64 {
    let v = f64::from(channel) / 255.0;
    if v <= 0.040_45 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        (LAB_KAPPA * t + 16.0) / 116.0
    }
}

pub fn rgb_to_xyz(c: Rgb) -> [f64; 3] {
    let lin = c.channels().map(srgb_decode);
    SRGB_TO_XYZ.map(|row| row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2])
}

pub fn rgb_to_lab(c: Rgb) -> LabColor {
    let xyz = rgb_to_xyz(c);
    let white = white_point();
    let [fx, fy, fz] = [0, 1, 2].map(|i| lab_f(xyz[i] / white[i]));
    LabColor {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// Euclidean distance in Lab.
pub fn delta_e_76(x: LabColor, y: LabColor) -> DeltaE {
    let value = ((x.l - y.l).powi(2) + (x.a - y.a).powi(2) + (x.b - y.b).powi(2)).sqrt();
    DeltaE {
        value,
        metric: Metric::Cie76,
    }
}

/// CIEDE2000 with kL = kC = kH = 1.
pub fn delta_e_2000(x: LabColor, y: LabColor) -> DeltaE {
    const POW25_7: f64 = 6_103_515_625.0; // 25^7

    let c1 = x.a.hypot(x.b);
    let c2 = y.a.hypot(y.b);
    let c_bar7 = ((c1 + c2) / 2.0).powi(7);
    let g = 0.5 * (1.0 - (c_bar7 / (c_bar7 + POW25_7)).sqrt());

    let a1p = (1.0 + g) * x.a;
    let a2p = (1.0 + g) * y.a;
    let c1p = a1p.hypot(x.b);
    let c2p = a2p.hypot(y.b);
    let h1p = hue_degrees(a1p, x.b);
    let h2p = hue_degrees(a2p, y.b);

    let dl = y.l - x.l;
    let dc = c2p - c1p;
    let chroma_product = c1p * c2p;
    let dh_angle = if chroma_product == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dh = 2.0 * chroma_product.sqrt() * (dh_angle.to_radians() / 2.0).sin();

    let l_bar = (x.l + y.l) / 2.0;
    let c_bar_p = (c1p + c2p) / 2.0;
    let h_bar_p = if chroma_product == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        (h1p + h2p) / 2.0
    } else if h1p + h2p < 360.0 {
        (h1p + h2p + 360.0) / 2.0
    } else {
        (h1p + h2p - 360.0) / 2.0
    };

    let t = 1.0 - 0.17 * (h_bar_p - 30.0).to_radians().cos()
        + 0.24 * (2.0 * h_bar_p).to_radians().cos()
        + 0.32 * (3.0 * h_bar_p + 6.0).to_radians().cos()
        - 0.20 * (4.0 * h_bar_p - 63.0).to_radians().cos();

    let l50 = (l_bar - 50.0).powi(2);
    let s_l = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let s_c = 1.0 + 0.045 * c_bar_p;
    let s_h = 1.0 + 0.015 * c_bar_p * t;

    let d_theta = 30.0 * (-((h_bar_p - 275.0) / 25.0).powi(2)).exp();
    let c_bar_p7 = c_bar_p.powi(7);
    let r_c = 2.0 * (c_bar_p7 / (c_bar_p7 + POW25_7)).sqrt();
    let r_t = -r_c * (2.0 * d_theta).to_radians().sin();

    let tl = dl / s_l;
    let tc = dc / s_c;
    let th = dh / s_h;
    // Rounding can push the sum a hair below zero for near-identical inputs.
    let value = (tl * tl + tc * tc + th * th + r_t * tc * th)
        .max(0.0)
        .sqrt();
    DeltaE {
        value,
        metric: Metric::Ciede2000,
    }
}

fn hue_degrees(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        return 0.0;
    }
    let h = b.atan2(a).to_degrees();
    if h < 0.0 {
        h + 360.0
    } else {
        h
    }
}

/// Mean ΔE over `(predicted, reference)` pairs after converting both sides to Lab.
pub fn mean_delta_e(pairs: &[(Rgb, Rgb)], metric: Metric) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    let total: f64 = pairs.iter().map(|&(p, q)| metric.between_rgb(p, q)).sum();
    Ok(total / pairs.len() as f64)
}

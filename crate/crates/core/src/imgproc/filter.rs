use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ImgError;

/// XMM-OM observing filters with central wavelength and width in nm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FilterBand {
    V,
    B,
    U,
    #[serde(rename = "UVW1")]
    Uvw1,
    #[serde(rename = "UVM2")]
    Uvm2,
    #[serde(rename = "UVW2")]
    Uvw2,
    White,
}

impl FilterBand {
    pub const ALL: [FilterBand; 7] = [
        FilterBand::V,
        FilterBand::B,
        FilterBand::U,
        FilterBand::Uvw1,
        FilterBand::Uvm2,
        FilterBand::Uvw2,
        FilterBand::White,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FilterBand::V => "V",
            FilterBand::B => "B",
            FilterBand::U => "U",
            FilterBand::Uvw1 => "UVW1",
            FilterBand::Uvm2 => "UVM2",
            FilterBand::Uvw2 => "UVW2",
            FilterBand::White => "White",
        }
    }

    /// Single-letter code used in OM product file names.
    pub fn code(self) -> char {
        match self {
            FilterBand::V => 'V',
            FilterBand::B => 'B',
            FilterBand::U => 'U',
            FilterBand::Uvw1 => 'L',
            FilterBand::Uvm2 => 'M',
            FilterBand::Uvw2 => 'S',
            FilterBand::White => 'W',
        }
    }

    pub fn central_wavelength_nm(self) -> u32 {
        match self {
            FilterBand::V => 543,
            FilterBand::B => 450,
            FilterBand::U => 344,
            FilterBand::Uvw1 => 291,
            FilterBand::Uvm2 => 231,
            FilterBand::Uvw2 => 212,
            FilterBand::White => 406,
        }
    }

    pub fn width_nm(self) -> u32 {
        match self {
            FilterBand::V => 70,
            FilterBand::B => 105,
            FilterBand::U => 84,
            FilterBand::Uvw1 => 83,
            FilterBand::Uvm2 => 48,
            FilterBand::Uvw2 => 50,
            FilterBand::White => 347,
        }
    }

    pub fn from_code(code: char) -> Option<FilterBand> {
        FilterBand::ALL
            .into_iter()
            .find(|f| f.code() == code.to_ascii_uppercase())
    }

    /// Infers the band from an OM-style file name such as `S0148740701_U.png`.
    pub fn from_file_name(name: &str) -> Option<FilterBand> {
        let stem = name.rsplit(['/', '\\']).next().unwrap_or(name);
        let stem = stem.split('.').next().unwrap_or(stem);
        let (_, suffix) = stem.rsplit_once('_')?;
        let mut chars = suffix.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => FilterBand::from_code(c),
            _ => suffix.parse().ok(),
        }
    }
}

impl fmt::Display for FilterBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FilterBand {
    type Err = ImgError;

    /// Accepts the band name (`UVW1`), the table spelling (`UVW1(L)`) or the
    /// one-letter code (`L`), case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let base = t.split('(').next().unwrap_or(t).trim();
        let found = FilterBand::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(base))
            .or_else(|| {
                let mut chars = base.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => FilterBand::from_code(c),
                    _ => None,
                }
            });
        found.ok_or_else(|| ImgError::UnknownFilter(s.to_string()))
    }
}

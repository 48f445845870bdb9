use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::AnnotError;

/// The five artefact categories. Integer ids follow declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ArtefactClass {
    /// Central ring
    CR,
    /// Smoke ring
    SR,
    /// Star loop
    SL,
    /// Read-out streak
    ROS,
    Other,
}

impl ArtefactClass {
    pub const ALL: [ArtefactClass; 5] = [
        ArtefactClass::CR,
        ArtefactClass::SR,
        ArtefactClass::SL,
        ArtefactClass::ROS,
        ArtefactClass::Other,
    ];
    pub const COUNT: usize = 5;

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Self> {
        Self::ALL.get(id).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            ArtefactClass::CR => "CR",
            ArtefactClass::SR => "SR",
            ArtefactClass::SL => "SL",
            ArtefactClass::ROS => "ROS",
            ArtefactClass::Other => "Other",
        }
    }

    pub fn long_name(self) -> &'static str {
        match self {
            ArtefactClass::CR => "central ring",
            ArtefactClass::SR => "smoke ring",
            ArtefactClass::SL => "star loop",
            ArtefactClass::ROS => "read-out streak",
            ArtefactClass::Other => "other",
        }
    }
}

impl fmt::Display for ArtefactClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ArtefactClass {
    type Err = AnnotError;

    /// Matches codes and long names ignoring case, spaces, `-` and `_`,
    /// so `ROS`, `Read-out-Streak` and `read_out_streaks` all resolve.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let key = key.strip_suffix('s').filter(|k| k.len() > 3).unwrap_or(&key);
        let class = match key {
            "cr" | "centralring" => ArtefactClass::CR,
            "sr" | "smokering" => ArtefactClass::SR,
            "sl" | "starloop" => ArtefactClass::SL,
            "ros" | "readoutstreak" => ArtefactClass::ROS,
            "other" => ArtefactClass::Other,
            _ => return Err(AnnotError::UnknownCategory(s.to_string())),
        };
        Ok(class)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_declaration_order() {
        let ids: Vec<_> = ArtefactClass::ALL.iter().map(|c| c.id()).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
        assert_eq!(ArtefactClass::from_id(3), Some(ArtefactClass::ROS));
        assert_eq!(ArtefactClass::from_id(5), None);
    }

    #[test]
    fn name_variants() {
        for (s, c) in [
            ("ROS", ArtefactClass::ROS),
            ("Read-out-Streak", ArtefactClass::ROS),
            ("read_out_streaks", ArtefactClass::ROS),
            ("Central-Ring", ArtefactClass::CR),
            ("smoke ring", ArtefactClass::SR),
            ("Star-Loops", ArtefactClass::SL),
            ("other", ArtefactClass::Other),
            ("Other", ArtefactClass::Other),
        ] {
            assert_eq!(s.parse::<ArtefactClass>().unwrap(), c, "{s}");
        }
        assert!("ghost".parse::<ArtefactClass>().is_err());
        assert!("".parse::<ArtefactClass>().is_err());
    }
}

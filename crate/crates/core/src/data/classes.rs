use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The ten EuroSAT land-cover categories, in their canonical index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LandCoverClass {
    AnnualCrop = 0,
    Forest = 1,
    HerbaceousVegetation = 2,
    Highway = 3,
    Industrial = 4,
    Pasture = 5,
    PermanentCrop = 6,
    Residential = 7,
    River = 8,
    SeaLake = 9,
}

pub const NUM_CLASSES: usize = 10;

impl LandCoverClass {
    pub const ALL: [LandCoverClass; NUM_CLASSES] = [
        Self::AnnualCrop,
        Self::Forest,
        Self::HerbaceousVegetation,
        Self::Highway,
        Self::Industrial,
        Self::Pasture,
        Self::PermanentCrop,
        Self::Residential,
        Self::River,
        Self::SeaLake,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        Self::ALL
            .get(index)
            .copied()
            .ok_or(Error::InvalidLabel { label: index, classes: NUM_CLASSES })
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Self::AnnualCrop => "Annual Crop",
            Self::Forest => "Forest",
            Self::HerbaceousVegetation => "Herbaceous Vegetation",
            Self::Highway => "Highway",
            Self::Industrial => "Industrial",
            Self::Pasture => "Pasture",
            Self::PermanentCrop => "Permanent Crop",
            Self::Residential => "Residential",
            Self::River => "River",
            Self::SeaLake => "Sea Lake",
        }
    }

    /// Directory name used by the EuroSAT distribution.
    pub fn folder_name(self) -> &'static str {
        match self {
            Self::AnnualCrop => "AnnualCrop",
            Self::Forest => "Forest",
            Self::HerbaceousVegetation => "HerbaceousVegetation",
            Self::Highway => "Highway",
            Self::Industrial => "Industrial",
            Self::Pasture => "Pasture",
            Self::PermanentCrop => "PermanentCrop",
            Self::Residential => "Residential",
            Self::River => "River",
            Self::SeaLake => "SeaLake",
        }
    }

    /// Map colour (RGB).
    pub fn colour(self) -> [u8; 3] {
        match self {
            Self::AnnualCrop => [240, 200, 70],
            Self::Forest => [20, 100, 40],
            Self::HerbaceousVegetation => [150, 200, 80],
            Self::Highway => [120, 120, 120],
            Self::Industrial => [190, 60, 190],
            Self::Pasture => [200, 240, 150],
            Self::PermanentCrop => [200, 120, 40],
            Self::Residential => [220, 40, 40],
            Self::River => [60, 140, 230],
            Self::SeaLake => [20, 50, 140],
        }
    }

    /// Exact display name, e.g. `"Sea Lake"`.
    pub fn from_display_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.display_name() == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    /// Dataset directory name: either the EuroSAT folder name or the display name.
    pub fn from_dir_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.folder_name() == name || c.display_name() == name)
            .ok_or_else(|| Error::UnknownClass(name.to_string()))
    }
}

impl fmt::Display for LandCoverClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// Serializable row of the class table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub index: usize,
    pub name: String,
    pub folder: String,
    pub colour: [u8; 3],
}

pub fn class_table() -> Vec<ClassEntry> {
    LandCoverClass::ALL
        .into_iter()
        .map(|c| ClassEntry {
            index: c.index(),
            name: c.display_name().to_string(),
            folder: c.folder_name().to_string(),
            colour: c.colour(),
        })
        .collect()
}

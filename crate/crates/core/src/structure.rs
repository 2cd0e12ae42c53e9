use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Anatomical structure segmented by the networks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Lungs,
    Heart,
    Clavicles,
}

impl Structure {
    pub const ALL: [Structure; 3] = [Structure::Lungs, Structure::Heart, Structure::Clavicles];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Lungs => "lungs",
            Structure::Heart => "heart",
            Structure::Clavicles => "clavicles",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Structure::Lungs => "Lungs",
            Structure::Heart => "Heart",
            Structure::Clavicles => "Clavicles",
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lungs" | "lung" => Ok(Structure::Lungs),
            "heart" => Ok(Structure::Heart),
            "clavicles" | "clavicle" => Ok(Structure::Clavicles),
            other => Err(Error::Config(format!("unknown structure `{other}`"))),
        }
    }
}

/// Per-structure probability maps produced by a network for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMaps {
    pub case_id: String,
    classes: Vec<Structure>,
    maps: Vec<Grid<f32>>,
}

impl ScoreMaps {
    pub fn new(case_id: impl Into<String>, classes: Vec<Structure>, maps: Vec<Grid<f32>>) -> Result<Self> {
        if classes.len() != maps.len() || classes.is_empty() {
            return Err(Error::Contract(format!(
                "{} classes but {} score maps",
                classes.len(),
                maps.len()
            )));
        }
        let shape = maps[0].shape();
        if maps.iter().any(|m| m.shape() != shape) {
            return Err(Error::Contract("score maps differ in shape".into()));
        }
        Ok(Self {
            case_id: case_id.into(),
            classes,
            maps,
        })
    }

    pub fn classes(&self) -> &[Structure] {
        &self.classes
    }

    pub fn shape(&self) -> (usize, usize) {
        self.maps[0].shape()
    }

    pub fn get(&self, structure: Structure) -> Option<&Grid<f32>> {
        self.classes
            .iter()
            .position(|&s| s == structure)
            .map(|i| &self.maps[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (Structure, &Grid<f32>)> {
        self.classes.iter().copied().zip(self.maps.iter())
    }
}

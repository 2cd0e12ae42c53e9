use std::sync::OnceLock;

use serde::Deserialize;

use crate::structure::Structure;

const PUBLISHED_TOML: &str = include_str!("../../data/published.toml");

/// `[dice, jaccard, macd_mm]`.
pub type MetricTriple = [f64; 3];

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedRow {
    pub key: String,
    pub label: String,
    #[serde(default)]
    pub fine_tuned: Option<bool>,
    pub lungs: MetricTriple,
    pub heart: MetricTriple,
    pub clavicles: MetricTriple,
}

impl PublishedRow {
    pub fn get(&self, s: Structure) -> MetricTriple {
        match s {
            Structure::Lungs => self.lungs,
            Structure::Heart => self.heart,
            Structure::Clavicles => self.clavicles,
        }
    }
}

/// A comparison row; each metric is `[mean]`, `[mean, std]` or empty.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedSota {
    pub structure: Structure,
    pub method: String,
    pub source: String,
    pub dice: Vec<f64>,
    pub jaccard: Vec<f64>,
    pub macd_mm: Vec<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PostprocMacd {
    pub raw: [f64; 3],
    pub post: [f64; 3],
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Published {
    pub arch: Vec<PublishedRow>,
    pub loss: Vec<PublishedRow>,
    pub postproc_macd: PostprocMacd,
    pub sota: Vec<PublishedSota>,
}

impl Published {
    pub fn arch_row(&self, key: &str) -> Option<&PublishedRow> {
        self.arch.iter().find(|r| r.key == key)
    }

    pub fn loss_row(&self, key: &str) -> Option<&PublishedRow> {
        self.loss.iter().find(|r| r.key == key)
    }
}

/// The bundled reference numbers.
pub fn published() -> &'static Published {
    static CELL: OnceLock<Published> = OnceLock::new();
    CELL.get_or_init(|| toml::from_str(PUBLISHED_TOML).expect("bundled published.toml parses"))
}

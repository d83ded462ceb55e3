use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PIXEL_SPACING_MM: f64 = 1.62;
pub const IMAGE_SIZE_PX: f64 = 136.0;
pub const CONTOUR_FPS: u32 = 50;
pub const POINTS_PER_ARTICULATOR: usize = 50;
/// 50 X values followed by 50 Y values.
pub const ARTICULATOR_DIM: usize = 2 * POINTS_PER_ARTICULATOR;
pub const N_ARTICULATORS: usize = 8;
pub const CONTOUR_DIM: usize = N_ARTICULATORS * ARTICULATOR_DIM;
pub const N_PHONES: usize = 44;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Articulator {
    ArytenoidCartilage,
    Epiglottis,
    LowerLip,
    PharyngealWall,
    SoftPalateMidline,
    Tongue,
    UpperLip,
    VocalFolds,
}

impl Articulator {
    /// Canonical order, which is also the row order of the report tables.
    pub const ALL: [Articulator; N_ARTICULATORS] = [
        Articulator::ArytenoidCartilage,
        Articulator::Epiglottis,
        Articulator::LowerLip,
        Articulator::PharyngealWall,
        Articulator::SoftPalateMidline,
        Articulator::Tongue,
        Articulator::UpperLip,
        Articulator::VocalFolds,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn slug(self) -> &'static str {
        match self {
            Articulator::ArytenoidCartilage => "arytenoid-cartilage",
            Articulator::Epiglottis => "epiglottis",
            Articulator::LowerLip => "lower-lip",
            Articulator::PharyngealWall => "pharyngeal-wall",
            Articulator::SoftPalateMidline => "soft-palate-midline",
            Articulator::Tongue => "tongue",
            Articulator::UpperLip => "upper-lip",
            Articulator::VocalFolds => "vocal-folds",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Articulator::ArytenoidCartilage => "Arytenoid cartilage",
            Articulator::Epiglottis => "Epiglottis",
            Articulator::LowerLip => "Lower lip",
            Articulator::PharyngealWall => "Pharyngeal wall",
            Articulator::SoftPalateMidline => "Soft palate midline",
            Articulator::Tongue => "Tongue",
            Articulator::UpperLip => "Upper lip",
            Articulator::VocalFolds => "Vocal folds",
        }
    }

    /// Range of this articulator's coordinates in an 800-value contour vector.
    pub fn range(self) -> std::ops::Range<usize> {
        let start = self.index() * ARTICULATOR_DIM;
        start..start + ARTICULATOR_DIM
    }
}

impl fmt::Display for Articulator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for Articulator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace([' ', '_'], "-");
        Self::ALL
            .into_iter()
            .find(|a| a.slug() == key)
            .ok_or_else(|| Error::Config(format!("unknown articulator {s:?}")))
    }
}

/// One frame of geometry: 8 articulators × 50 (x, y) points, stored in the
/// model's output layout (articulator-major, then 50 X, then 50 Y).
#[derive(Debug, Clone, PartialEq)]
pub struct ContourSet {
    pub frame_index: usize,
    values: Vec<f64>,
}

impl ContourSet {
    pub fn from_values(frame_index: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != CONTOUR_DIM {
            return Err(Error::Dimension {
                context: "contour set",
                expected: CONTOUR_DIM,
                got: values.len(),
            });
        }
        Ok(ContourSet {
            frame_index,
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn articulator(&self, a: Articulator) -> &[f64] {
        &self.values[a.range()]
    }

    pub fn point(&self, a: Articulator, i: usize) -> (f64, f64) {
        let base = a.index() * ARTICULATOR_DIM;
        (
            self.values[base + i],
            self.values[base + POINTS_PER_ARTICULATOR + i],
        )
    }

    pub fn set_point(&mut self, a: Articulator, i: usize, (x, y): (f64, f64)) {
        let base = a.index() * ARTICULATOR_DIM;
        self.values[base + i] = x;
        self.values[base + POINTS_PER_ARTICULATOR + i] = y;
    }
}

const FRENCH_PHONES: [&str; N_PHONES] = [
    "i", "e", "E", "a", "A", "O", "o", "u", "y", "2", "9", "@", "e~", "a~", "o~", "9~", "j",
    "w", "H", "p", "b", "t", "d", "k", "g", "f", "v", "s", "z", "S", "Z", "m", "n", "J", "N",
    "l", "R", "p_cl", "b_cl", "t_cl", "d_cl", "k_cl", "g_cl", "sil",
];

/// The fixed 44-symbol phone set; silence is the last symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhoneInventory {
    symbols: Vec<String>,
    silence: usize,
}

impl Default for PhoneInventory {
    fn default() -> Self {
        PhoneInventory {
            symbols: FRENCH_PHONES.iter().map(|s| s.to_string()).collect(),
            silence: N_PHONES - 1,
        }
    }
}

impl PhoneInventory {
    pub fn new(symbols: Vec<String>, silence_symbol: &str) -> Result<Self> {
        if symbols.len() != N_PHONES {
            return Err(Error::Config(format!(
                "phone inventory must have {N_PHONES} symbols, got {}",
                symbols.len()
            )));
        }
        let mut sorted = symbols.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != symbols.len() {
            return Err(Error::Config("duplicate phone symbols".into()));
        }
        let silence = symbols
            .iter()
            .position(|s| s == silence_symbol)
            .ok_or_else(|| Error::UnknownPhone(silence_symbol.to_string()))?;
        Ok(PhoneInventory { symbols, silence })
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn silence_index(&self) -> usize {
        self.silence
    }

    pub fn symbol(&self, index: usize) -> Option<&str> {
        self.symbols.get(index).map(String::as_str)
    }

    pub fn index_of(&self, symbol: &str) -> Result<usize> {
        self.symbols
            .iter()
            .position(|s| s == symbol)
            .ok_or_else(|| Error::UnknownPhone(symbol.to_string()))
    }

    pub fn one_hot(&self, index: usize) -> Result<Vec<f64>> {
        one_hot(index, self)
    }
}

pub fn one_hot(index: usize, inventory: &PhoneInventory) -> Result<Vec<f64>> {
    if index >= inventory.len() {
        return Err(Error::UnknownPhone(format!("index {index}")));
    }
    let mut v = vec![0.0; inventory.len()];
    v[index] = 1.0;
    Ok(v)
}

/// A labelled time span `[start_ms, end_ms)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhoneInterval {
    pub start_ms: f64,
    pub end_ms: f64,
    pub symbol: usize,
    /// Set for pauses inside a sentence; meaningless for speech phones.
    pub sentence_internal: bool,
}

impl PhoneInterval {
    pub fn contains(&self, time_ms: f64) -> bool {
        self.start_ms <= time_ms && time_ms < self.end_ms
    }
}

/// Checks ordering, positivity and non-overlap of an utterance's intervals.
pub fn validate_intervals(intervals: &[PhoneInterval], inventory: &PhoneInventory) -> Result<()> {
    for (i, iv) in intervals.iter().enumerate() {
        if iv.start_ms >= iv.end_ms {
            return Err(Error::Config(format!(
                "interval {i} has start {} >= end {}",
                iv.start_ms, iv.end_ms
            )));
        }
        if iv.symbol >= inventory.len() {
            return Err(Error::UnknownPhone(format!("index {}", iv.symbol)));
        }
        if i > 0 && intervals[i - 1].end_ms > iv.start_ms {
            return Err(Error::Config(format!("interval {i} overlaps its predecessor")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn articulators_are_alphabetical() {
        let names: Vec<_> = Articulator::ALL.iter().map(|a| a.display_name()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        for a in Articulator::ALL {
            assert_eq!(a.slug().parse::<Articulator>().unwrap(), a);
            assert_eq!(Articulator::from_index(a.index()), Some(a));
        }
        assert_eq!("Soft palate midline".parse::<Articulator>().unwrap(), Articulator::SoftPalateMidline);
    }

    #[test]
    fn inventory_has_44_unique_symbols() {
        let inv = PhoneInventory::default();
        assert_eq!(inv.len(), 44);
        assert_eq!(inv.silence_index(), 43);
        assert_eq!(inv.symbol(43), Some("sil"));
        let rebuilt = PhoneInventory::new(FRENCH_PHONES.iter().map(|s| s.to_string()).collect(), "sil")
            .unwrap();
        assert_eq!(rebuilt, inv);
        let mut dup: Vec<String> = FRENCH_PHONES.iter().map(|s| s.to_string()).collect();
        dup[1] = "i".into();
        assert!(PhoneInventory::new(dup, "sil").is_err());
    }

    #[test]
    fn one_hot_encoding() {
        let inv = PhoneInventory::default();
        let v = one_hot(0, &inv).unwrap();
        assert_eq!(v[0], 1.0);
        assert!(v[1..].iter().all(|&x| x == 0.0));
        for i in 0..44 {
            let v = inv.one_hot(i).unwrap();
            assert_eq!(v.iter().sum::<f64>(), 1.0);
            assert_eq!(v.iter().filter(|&&x| x == 1.0).count(), 1);
        }
        assert!(matches!(one_hot(44, &inv), Err(Error::UnknownPhone(_))));
    }

    #[test]
    fn contour_layout_is_articulator_major() {
        let values: Vec<f64> = (0..CONTOUR_DIM).map(|i| i as f64).collect();
        let c = ContourSet::from_values(0, values).unwrap();
        assert_eq!(c.point(Articulator::Epiglottis, 0), (100.0, 150.0));
        assert_eq!(c.point(Articulator::VocalFolds, 49), (749.0, 799.0));
        assert_eq!(c.articulator(Articulator::Tongue)[0], 500.0);
        assert!(ContourSet::from_values(0, vec![0.0; 799]).is_err());
    }

    #[test]
    fn interval_validation() {
        let inv = PhoneInventory::default();
        let iv = |s, e| PhoneInterval { start_ms: s, end_ms: e, symbol: 0, sentence_internal: false };
        assert!(validate_intervals(&[iv(0.0, 10.0), iv(10.0, 20.0)], &inv).is_ok());
        assert!(validate_intervals(&[iv(0.0, 10.0), iv(5.0, 20.0)], &inv).is_err());
        assert!(validate_intervals(&[iv(10.0, 10.0)], &inv).is_err());
    }
}

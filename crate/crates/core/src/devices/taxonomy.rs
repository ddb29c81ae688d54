use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DeviceError;

/// Category names, indexed by category number - 1.
const CATEGORIES: [&str; 6] = [
    "Musical instruments",
    "Music processors",
    "Music generators",
    "Music recommendation devices",
    "Music-related feedback systems",
    "Educational aids",
];

/// Subcategory names per category.
const SUBCATEGORIES: [&[&str]; 6] = [
    &["AI assisted instruments", "Augmented instruments"],
    &[
        "Instrumental modifiers",
        "Voice modifiers",
        "General sound processors",
    ],
    &["Instrumental", "Voice", "Combined"],
    &[
        "Ambient aware recommendation",
        "User aware recommendation",
        "Combined",
    ],
    &["Personal feedback", "Ambient feedback", "Combined"],
    &[
        "Music education",
        "General educational support",
        "Rehabilitation",
    ],
];

/// A cell of the device taxonomy grid, written `<category><letter>` (e.g. `1b`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TaxonomyCode {
    category: u8,
    sub: char,
}

impl TaxonomyCode {
    pub const AUGMENTED_INSTRUMENT: TaxonomyCode = TaxonomyCode {
        category: 1,
        sub: 'b',
    };
    pub const USER_AWARE_RECOMMENDATION: TaxonomyCode = TaxonomyCode {
        category: 4,
        sub: 'b',
    };

    pub fn new(category: u8, sub: char) -> Result<Self, DeviceError> {
        let subs = category
            .checked_sub(1)
            .and_then(|i| SUBCATEGORIES.get(usize::from(i)))
            .ok_or_else(|| DeviceError::InvalidCode(format!("{category}{sub}")))?;
        let idx = (sub as u32).wrapping_sub('a' as u32) as usize;
        if idx >= subs.len() {
            return Err(DeviceError::InvalidCode(format!("{category}{sub}")));
        }
        Ok(TaxonomyCode { category, sub })
    }

    /// Every valid code, in grid order.
    pub fn all() -> impl Iterator<Item = TaxonomyCode> {
        SUBCATEGORIES
            .iter()
            .zip(1u8..)
            .flat_map(|(subs, category)| {
                (0..subs.len()).map(move |i| TaxonomyCode {
                    category,
                    sub: (b'a' + i as u8) as char,
                })
            })
    }

    pub fn category(&self) -> u8 {
        self.category
    }

    pub fn sub(&self) -> char {
        self.sub
    }

    pub fn category_name(&self) -> &'static str {
        CATEGORIES[usize::from(self.category - 1)]
    }

    pub fn name(&self) -> &'static str {
        SUBCATEGORIES[usize::from(self.category - 1)][(self.sub as u8 - b'a') as usize]
    }
}

/// Parse and check a code such as `"1a"` against the taxonomy grid.
pub fn validate_taxonomy(code: &str) -> Result<TaxonomyCode, DeviceError> {
    code.parse()
}

impl FromStr for TaxonomyCode {
    type Err = DeviceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || DeviceError::InvalidCode(s.to_owned());
        let mut chars = s.chars();
        let (Some(digit), Some(sub), None) = (chars.next(), chars.next(), chars.next()) else {
            return Err(invalid());
        };
        let category = digit.to_digit(10).ok_or_else(invalid)? as u8;
        TaxonomyCode::new(category, sub).map_err(|_| invalid())
    }
}

impl TryFrom<String> for TaxonomyCode {
    type Error = DeviceError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<TaxonomyCode> for String {
    fn from(c: TaxonomyCode) -> Self {
        c.to_string()
    }
}

impl fmt::Display for TaxonomyCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.category, self.sub)
    }
}

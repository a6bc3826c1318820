use std::fmt;
use std::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;

/// Why an article mentions a repository. The integer codes are fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum IntentLabel {
    Release = 0,
    Reuse = 1,
    Reference = 2,
    Nothing = 3,
}

pub const NUM_LABELS: usize = 4;

impl IntentLabel {
    pub const ALL: [IntentLabel; NUM_LABELS] = [
        IntentLabel::Release,
        IntentLabel::Reuse,
        IntentLabel::Reference,
        IntentLabel::Nothing,
    ];

    /// Labels that express an actual data-sharing intent.
    pub const SUBSTANTIVE: [IntentLabel; 3] = [IntentLabel::Release, IntentLabel::Reuse, IntentLabel::Reference];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            IntentLabel::Release => "Release",
            IntentLabel::Reuse => "Reuse",
            IntentLabel::Reference => "Reference",
            IntentLabel::Nothing => "Nothing",
        }
    }

    pub fn is_substantive(self) -> bool {
        self != IntentLabel::Nothing
    }
}

/// Index of the largest probability; ties go to the lowest label.
pub fn argmax(probs: &[f64; NUM_LABELS]) -> IntentLabel {
    let mut best = 0;
    for i in 1..NUM_LABELS {
        if probs[i] > probs[best] {
            best = i;
        }
    }
    IntentLabel::ALL[best]
}

impl fmt::Display for IntentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IntentLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let t = s.trim();
        if let Ok(i) = t.parse::<usize>() {
            return Self::from_index(i).ok_or_else(|| Error::Invalid(format!("label index {i} out of range")));
        }
        Self::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| Error::Invalid(format!("unknown intent label {t:?}")))
    }
}

impl Serialize for IntentLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for IntentLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct LabelVisitor;

        impl Visitor<'_> for LabelVisitor {
            type Value = IntentLabel;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an intent label name or integer 0-3")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<IntentLabel, E> {
                IntentLabel::from_index(v as usize).ok_or_else(|| E::custom(format!("label index {v} out of range")))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<IntentLabel, E> {
                if v < 0 {
                    return Err(E::custom(format!("label index {v} out of range")));
                }
                self.visit_u64(v as u64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<IntentLabel, E> {
                v.parse().map_err(E::custom)
            }
        }

        d.deserialize_any(LabelVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_mapping_is_fixed() {
        assert_eq!(IntentLabel::Release as u8, 0);
        assert_eq!(IntentLabel::Reuse as u8, 1);
        assert_eq!(IntentLabel::Reference as u8, 2);
        assert_eq!(IntentLabel::Nothing as u8, 3);
    }

    #[test]
    fn serde_accepts_names_and_integers() {
        let l: IntentLabel = serde_json::from_str("\"reuse\"").unwrap();
        assert_eq!(l, IntentLabel::Reuse);
        let l: IntentLabel = serde_json::from_str("2").unwrap();
        assert_eq!(l, IntentLabel::Reference);
        assert!(serde_json::from_str::<IntentLabel>("4").is_err());
        assert_eq!(serde_json::to_string(&IntentLabel::Nothing).unwrap(), "\"Nothing\"");
    }

    #[test]
    fn argmax_tie_goes_low() {
        assert_eq!(argmax(&[0.25; 4]), IntentLabel::Release);
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.1]), IntentLabel::Reuse);
        assert_eq!(argmax(&[0.0, 0.0, 0.0, 1.0]), IntentLabel::Nothing);
    }
}

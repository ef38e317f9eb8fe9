use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Binary class label, written ±1 in formulas and 0/1 or ±1 in files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Label {
    Negative,
    Positive,
}

impl Label {
    /// +1 or −1.
    #[inline]
    pub fn sign<T: Real>(self) -> T {
        match self {
            Label::Positive => T::one(),
            Label::Negative => -T::one(),
        }
    }

    pub fn from_sign(value: i32) -> Option<Self> {
        match value {
            1 => Some(Label::Positive),
            -1 => Some(Label::Negative),
            _ => None,
        }
    }

    /// Parses `0`, `1`, `-1` or `+1`.
    pub fn parse(text: &str) -> Option<Self> {
        match text.trim() {
            "1" | "+1" => Some(Label::Positive),
            "0" | "-1" => Some(Label::Negative),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Positive => "positive",
            Label::Negative => "negative",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Positive => f.write_str("1"),
            Label::Negative => f.write_str("-1"),
        }
    }
}

/// (positives, negatives).
pub fn class_counts(labels: &[Label]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&l| l == Label::Positive).count();
    (pos, labels.len() - pos)
}

/// Errors unless both classes are present.
pub fn require_both_classes(labels: &[Label]) -> Result<(usize, usize)> {
    let (pos, neg) = class_counts(labels);
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }
    Ok((pos, neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_accepts_both_conventions() {
        assert_eq!(Label::parse("0"), Some(Label::Negative));
        assert_eq!(Label::parse("-1"), Some(Label::Negative));
        assert_eq!(Label::parse("1"), Some(Label::Positive));
        assert_eq!(Label::parse("+1"), Some(Label::Positive));
        assert_eq!(Label::parse("2"), None);
        assert_eq!(Label::parse(""), None);
        assert_eq!(Label::Positive.sign::<f64>(), 1.0);
        assert_eq!(Label::from_sign(-1), Some(Label::Negative));
    }
}

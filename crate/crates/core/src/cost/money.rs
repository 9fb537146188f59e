use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::CostError;

const SCALE: i128 = 1_000_000;

/// An exact amount of currency in millionths of a unit.
///
/// Parsed from and printed as a decimal string; arithmetic never goes through
/// binary floating point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Money(i128);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: i128) -> Self {
        Money(micros)
    }

    pub const fn micros(self) -> i128 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }

    pub fn times(self, n: u64) -> Money {
        Money(self.0 * i128::from(n))
    }

    /// `self * num / den` rounded half away from zero to the nearest micro-unit.
    pub fn scale_round(self, num: u64, den: u64) -> Money {
        assert!(den > 0, "zero denominator");
        let p = self.0 * i128::from(num);
        let d = i128::from(den);
        let q = p / d;
        let r = p % d;
        if 2 * r.abs() >= d {
            Money(q + p.signum())
        } else {
            Money(q)
        }
    }

    /// How many whole `unit`s fit into `self`.
    pub fn whole_multiples_of(self, unit: Money) -> Option<u64> {
        if unit.0 <= 0 || self.0 < 0 {
            return None;
        }
        u64::try_from(self.0 / unit.0).ok()
    }

    fn parts(self) -> (bool, u128, u128) {
        let neg = self.0 < 0;
        let abs = self.0.unsigned_abs();
        (neg, abs / SCALE as u128, abs % SCALE as u128)
    }

    fn fraction(frac: u128) -> String {
        let digits = format!("{frac:06}");
        let trimmed = digits.trim_end_matches('0');
        if trimmed.len() < 2 {
            digits[..2].to_string()
        } else {
            trimmed.to_string()
        }
    }

    /// Like `Display`, with thousands separators in the integer part.
    pub fn grouped(self) -> String {
        let (neg, int, frac) = self.parts();
        format!("{}{}.{}", if neg { "-" } else { "" }, group_thousands(int), Self::fraction(frac))
    }
}

/// Formats an integer with `,` between groups of three digits.
pub fn group_thousands(n: impl Into<u128>) -> String {
    let digits = n.into().to_string();
    let mut out = String::with_capacity(digits.len() + digits.len() / 3);
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// At least two decimals, more only when needed: `76.80`, `0.012`.
impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (neg, int, frac) = self.parts();
        write!(f, "{}{int}.{}", if neg { "-" } else { "" }, Self::fraction(frac))
    }
}

impl FromStr for Money {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, CostError> {
        let bad = || CostError::InvalidAmount(s.to_string());
        let t = s.trim().trim_start_matches('$');
        let (neg, t) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        let int: String = int.chars().filter(|c| *c != ',' && *c != '_').collect();
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let frac = frac.trim_end_matches('0');
        if frac.len() > 6 {
            return Err(bad());
        }
        let int: i128 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_micros: i128 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<6}").parse().map_err(|_| bad())?
        };
        let v = int.checked_mul(SCALE).and_then(|v| v.checked_add(frac_micros)).ok_or_else(bad)?;
        Ok(Money(if neg { -v } else { v }))
    }
}

impl std::ops::Add for Money {
    type Output = Money;
    fn add(self, o: Money) -> Money {
        Money(self.0 + o.0)
    }
}

impl std::ops::Sub for Money {
    type Output = Money;
    fn sub(self, o: Money) -> Money {
        Money(self.0 - o.0)
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, |a, b| a + b)
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) => s.parse().map_err(de::Error::custom),
            Raw::Int(i) => Ok(Money(i128::from(i) * SCALE)),
        }
    }
}

use std::fmt;

use num_rational::Ratio;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::window::Tick;

/// Exact on-fraction of a periodic source.
///
/// Stored as a reduced rational so that `floor(duty * period)` never suffers
/// from binary floating-point error. In scenario files a duty is written
/// either as a decimal number (`0.4`) or as a `"num/den"` string; decimals
/// are read digit-for-digit, so `0.3` is exactly `3/10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Duty(Ratio<u64>);

impl Duty {
    pub const ZERO: Duty = Duty(Ratio::new_raw(0, 1));
    pub const ONE: Duty = Duty(Ratio::new_raw(1, 1));

    /// Panics if `den == 0`.
    pub fn new(num: u64, den: u64) -> Self {
        Duty(Ratio::new(num, den))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn is_valid(&self) -> bool {
        self.numer() <= self.denom()
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `floor(duty * period)`: the number of on ticks per period.
    pub fn on_ticks(&self, period: Tick) -> Tick {
        (u128::from(self.numer()) * u128::from(period) / u128::from(self.denom())) as Tick
    }

    /// Parses `"0.25"`, `"1e-1"`, `"3"` or `"1/3"` exactly.
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| format!("bad numerator in {text:?}"))?;
            let d: u64 = d.trim().parse().map_err(|_| format!("bad denominator in {text:?}"))?;
            if d == 0 {
                return Err(format!("zero denominator in {text:?}"));
            }
            return Ok(Duty::new(n, d));
        }
        parse_decimal(text).ok_or_else(|| format!("{text:?} is not a non-negative decimal or fraction"))
    }

    fn decimal_text(&self) -> Option<String> {
        let text = format!("{}", self.as_f64());
        (parse_decimal(&text) == Some(*self)).then_some(text)
    }
}

fn parse_decimal(text: &str) -> Option<Duty> {
    let (mantissa, exp) = match text.split_once(['e', 'E']) {
        Some((m, e)) => (m, e.parse::<i32>().ok()?),
        None => (text, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.starts_with('-') || (int_part.is_empty() && frac_part.is_empty()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let mut num: u128 = digits.parse().ok()?;
    let mut den: u128 = 1;
    let scale = exp - frac_part.len() as i32;
    if scale >= 0 {
        num = num.checked_mul(10u128.checked_pow(scale as u32)?)?;
    } else {
        den = 10u128.checked_pow((-scale) as u32)?;
    }
    let r = Ratio::new(num, den);
    Some(Duty(Ratio::new(
        u64::try_from(*r.numer()).ok()?,
        u64::try_from(*r.denom()).ok()?,
    )))
}

impl fmt::Display for Duty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decimal_text() {
            Some(t) => f.write_str(&t),
            None => write!(f, "{}/{}", self.numer(), self.denom()),
        }
    }
}

impl Serialize for Duty {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.decimal_text() {
            Some(_) => s.serialize_f64(self.as_f64()),
            None => s.serialize_str(&format!("{}/{}", self.numer(), self.denom())),
        }
    }
}

impl<'de> Deserialize<'de> for Duty {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct DutyVisitor;

        impl Visitor<'_> for DutyVisitor {
            type Value = Duty;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-negative number or a \"num/den\" string")
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Duty, E> {
                Ok(Duty::new(v, 1))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Duty, E> {
                u64::try_from(v)
                    .map(|v| Duty::new(v, 1))
                    .map_err(|_| E::custom(format!("negative duty {v}")))
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Duty, E> {
                if !v.is_finite() || v < 0.0 {
                    return Err(E::custom(format!("duty {v} is negative or not finite")));
                }
                Duty::parse(&format!("{v}")).map_err(E::custom)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Duty, E> {
                Duty::parse(v).map_err(E::custom)
            }
        }

        d.deserialize_any(DutyVisitor)
    }
}

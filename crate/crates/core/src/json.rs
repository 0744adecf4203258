//! JSON emission with stable key order and `%.17g` numbers.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::numfmt::g17;

/// A float that serializes with 17 significant digits; non-finite values
/// become `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return serializer.serialize_none();
        }
        let raw = RawValue::from_string(g17(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(serializer)
    }
}

/// Pretty-printed JSON followed by a newline. Field order follows the struct.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types always serialize");
    text.push('\n');
    text
}

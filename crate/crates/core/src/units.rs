//! Unit conversion at the configuration boundary. Everything inside the
//! crate is meters; some benchmark parameters are conventionally written in
//! centimeters.

pub const CM_PER_M: f64 = 100.0;

/// Serde adapter: a meters field that is written as centimeters in files.
pub mod centimeters {
    use serde::{Deserialize, Deserializer, Serializer};

    use super::CM_PER_M;

    pub fn serialize<S: Serializer>(meters: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(meters * CM_PER_M)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(f64::deserialize(d)? / CM_PER_M)
    }
}

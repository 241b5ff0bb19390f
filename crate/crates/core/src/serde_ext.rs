//! Serde helpers for values JSON cannot represent natively.

/// Serializes `f64` as a number when finite and as `"inf"`, `"-inf"` or
/// `"nan"` otherwise, so states holding `η_{−1} = +∞` round-trip.
pub mod extended_f64 {
    use serde::de::{self, Deserializer, Visitor};
    use serde::Serializer;
    use std::fmt;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    struct ExtendedVisitor;

    impl Visitor<'_> for ExtendedVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(ExtendedVisitor)
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Debug, PartialEq, Serialize, Deserialize)]
    struct Wrapper {
        #[serde(with = "super::extended_f64")]
        v: f64,
    }

    #[test]
    fn round_trips_non_finite() {
        for v in [1.5, 0.0, f64::INFINITY, f64::NEG_INFINITY] {
            let s = serde_json::to_string(&Wrapper { v }).unwrap();
            let back: Wrapper = serde_json::from_str(&s).unwrap();
            assert_eq!(back.v, v);
        }
        assert_eq!(
            serde_json::to_string(&Wrapper { v: f64::INFINITY }).unwrap(),
            r#"{"v":"inf"}"#
        );
        let nan: Wrapper = serde_json::from_str(r#"{"v":"nan"}"#).unwrap();
        assert!(nan.v.is_nan());
    }
}

//! JSON has no infinities; unbounded interval ends are written as `null`.

macro_rules! bound_module {
    ($name:ident, $inf:expr) => {
        pub mod $name {
            use serde::{Deserialize, Deserializer, Serialize, Serializer};

            pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                if v.is_infinite() { None } else { Some(*v) }.serialize(s)
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                Ok(Option::<f64>::deserialize(d)?.unwrap_or($inf))
            }
        }
    };
}

bound_module!(lower_bound, f64::NEG_INFINITY);
bound_module!(upper_bound, f64::INFINITY);

//! Complex helpers: roots of unity and the `{"re", "im"}` wire representation.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::de::{self, SeqAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// `exp(2πij/n)`.
pub fn unity_root(n: usize, j: usize) -> Result<Complex64> {
    if n == 0 || j >= n {
        return Err(Error::OutOfRange { index: j, n });
    }
    Ok(root(n, j as i64))
}

/// `exp(2πij/n)` for any integer `j`; quarter turns are returned exactly.
pub(crate) fn root(n: usize, j: i64) -> Complex64 {
    let n = n as i64;
    let j = j.rem_euclid(n);
    if (4 * j) % n == 0 {
        return match (4 * j) / n {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
    }
    let angle = 2.0 * PI * (j as f64) / (n as f64);
    let (s, c) = angle.sin_cos();
    Complex64::new(c, s)
}

/// All n-th roots of unity `ε_0, …, ε_{n-1}`.
pub fn unity_roots(n: usize) -> Vec<Complex64> {
    (0..n as i64).map(|j| root(n, j)).collect()
}

/// Complex number serialized as `{"re": .., "im": ..}`; also accepts `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Cx(pub Complex64);

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        Cx(z)
    }
}

impl From<Cx> for Complex64 {
    fn from(z: Cx) -> Self {
        z.0
    }
}

impl Serialize for Cx {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("Complex", 2)?;
        st.serialize_field("re", &self.0.re)?;
        st.serialize_field("im", &self.0.im)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for Cx {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct CxVisitor;

        impl<'de> Visitor<'de> for CxVisitor {
            type Value = Cx;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a complex number as {\"re\", \"im\"} or [re, im]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Cx, A::Error> {
                let re: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let im: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<de::IgnoredAny>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(Cx(Complex64::new(re, im)))
            }

            fn visit_map<A: de::MapAccess<'de>>(self, mut map: A) -> std::result::Result<Cx, A::Error> {
                let mut re = None;
                let mut im = None;
                while let Some(key) = map.next_key::<String>()? {
                    match key.as_str() {
                        "re" => {
                            if re.is_some() {
                                return Err(de::Error::duplicate_field("re"));
                            }
                            re = Some(map.next_value::<f64>()?);
                        }
                        "im" => {
                            if im.is_some() {
                                return Err(de::Error::duplicate_field("im"));
                            }
                            im = Some(map.next_value::<f64>()?);
                        }
                        other => return Err(de::Error::unknown_field(other, &["re", "im"])),
                    }
                }
                Ok(Cx(Complex64::new(
                    re.ok_or_else(|| de::Error::missing_field("re"))?,
                    im.unwrap_or(0.0),
                )))
            }
        }

        deserializer.deserialize_any(CxVisitor)
    }
}

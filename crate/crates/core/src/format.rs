//! Two-decimal string rendering used by every LLM-facing document.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::geometry::{OrientedBox, Vec3};

/// Renders `v` with exactly two decimals, rounding half away from zero on
/// the shortest decimal representation of the value (so `1.005` renders as
/// `"1.01"`). Negative zero is normalised to `"0.00"`.
pub fn fixed2(v: f64) -> String {
    if !v.is_finite() {
        return "0.00".to_string();
    }
    let repr = format!("{}", v.abs());
    let (int_part, frac_part) = match repr.split_once('.') {
        Some((i, f)) => (i.to_string(), f.to_string()),
        None => (repr.clone(), String::new()),
    };
    let mut digits: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes().chain(std::iter::repeat(b'0')).take(2))
        .map(|b| b - b'0')
        .collect();
    let round_up = frac_part.as_bytes().get(2).is_some_and(|d| *d >= b'5');
    if round_up {
        let mut i = digits.len();
        loop {
            if i == 0 {
                digits.insert(0, 1);
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let split = digits.len() - 2;
    let int_digits: String = digits[..split].iter().map(|d| (d + b'0') as char).collect();
    let frac_digits: String = digits[split..].iter().map(|d| (d + b'0') as char).collect();
    let is_zero = digits.iter().all(|d| *d == 0);
    let sign = if v < 0.0 && !is_zero { "-" } else { "" };
    format!("{sign}{int_digits}.{frac_digits}")
}

/// `{"x": "..", "y": "..", "z": ".."}` view of a vector.
#[derive(Debug, Clone, Copy)]
pub struct Fixed2Vec(pub Vec3);

impl Serialize for Fixed2Vec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Vec3", 3)?;
        st.serialize_field("x", &fixed2(self.0.x))?;
        st.serialize_field("y", &fixed2(self.0.y))?;
        st.serialize_field("z", &fixed2(self.0.z))?;
        st.end()
    }
}

/// `{"Central", "Size", "Forward", "Up", "Right"}` view of a box.
#[derive(Debug, Clone, Copy)]
pub struct Fixed2Box(pub OrientedBox);

impl Serialize for Fixed2Box {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let b = &self.0;
        let mut st = s.serialize_struct("OrientedBox", 5)?;
        st.serialize_field("Central", &Fixed2Vec(b.central))?;
        st.serialize_field("Size", &Fixed2Vec(b.size))?;
        st.serialize_field("Forward", &Fixed2Vec(b.forward))?;
        st.serialize_field("Up", &Fixed2Vec(b.up))?;
        st.serialize_field("Right", &Fixed2Vec(b.right))?;
        st.end()
    }
}

/// Pretty JSON with the given indent width.
pub fn to_pretty<T: Serialize>(value: &T, indent: usize) -> String {
    let indent = " ".repeat(indent);
    let mut buf = Vec::new();
    let fmt = serde_json::ser::PrettyFormatter::with_indent(indent.as_bytes());
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value
        .serialize(&mut ser)
        .expect("serializing in-memory documents cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_half_away_from_zero() {
        assert_eq!(fixed2(0.005), "0.01");
        assert_eq!(fixed2(-0.005), "-0.01");
        assert_eq!(fixed2(1.005), "1.01");
        assert_eq!(fixed2(0.125), "0.13");
        assert_eq!(fixed2(9.995), "10.00");
        assert_eq!(fixed2(99.999), "100.00");
    }

    #[test]
    fn negative_zero_is_normalised() {
        assert_eq!(fixed2(-0.004), "0.00");
        assert_eq!(fixed2(-0.0), "0.00");
        assert_eq!(fixed2(0.0), "0.00");
    }

    #[test]
    fn plain_values() {
        assert_eq!(fixed2(4.49), "4.49");
        assert_eq!(fixed2(-0.91), "-0.91");
        assert_eq!(fixed2(11.0), "11.00");
        assert_eq!(fixed2(0.035), "0.04");
        assert_eq!(fixed2(1e-20), "0.00");
        assert_eq!(fixed2(1234567.891), "1234567.89");
    }

    #[test]
    fn vec_renders_as_strings() {
        let s = serde_json::to_string(&Fixed2Vec(Vec3::new(4.49, 0.05, -0.0))).unwrap();
        assert_eq!(s, r#"{"x":"4.49","y":"0.05","z":"0.00"}"#);
    }
}

//! CSV and document output helpers.

use std::io::Write;

use crate::error::Result;

/// 17 significant digits, `.` decimal point; `inf`/`-inf`/`nan` for non-finite values.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Writes a header row and numeric rows, comma separated.
pub fn write_table<W: Write>(out: &mut W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&x| fmt_num(x)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn table_string(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut buf = Vec::new();
    write_table(&mut buf, header, rows).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("table output is ASCII")
}

/// Parses a table written by [`write_table`] back into rows.
pub fn parse_table(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let row: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| crate::Error::Parse(e.to_string()))?);
    }
    Ok((header, rows))
}

/// Serde adapter for extended reals in JSON documents: finite values are
/// numbers, non-finite values are the strings `inf`, `-inf` and `nan`.
pub mod ext_real {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&super::fmt_num(*x))
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(de::Error::custom),
        }
    }
}

/// [`ext_real`] applied to every element of a vector.
pub mod ext_real_vec {
    use serde::ser::SerializeSeq;
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    struct Item(#[serde(with = "super::ext_real")] f64);

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(serde::Serialize)]
        struct Ref<'a>(#[serde(with = "super::ext_real")] &'a f64);
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            seq.serialize_element(&Ref(x))?;
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        Ok(Vec::<Item>::deserialize(d)?.into_iter().map(|i| i.0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_exactly() {
        for x in [0.1, 1.0 / 3.0, std::f64::consts::PI * 1e-200, 123456789.123456789, -0.0] {
            let s = fmt_num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_num(f64::INFINITY), "inf");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn table_layout() {
        let s = table_string(&["a", "b"], &[vec![1.0, 0.5]]);
        assert_eq!(s, "a,b\n1.0000000000000000e0,5.0000000000000000e-1\n");
        let (h, rows) = parse_table(&s).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows, vec![vec![1.0, 0.5]]);
    }

    #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
    struct Wrap {
        #[serde(with = "ext_real")]
        x: f64,
    }

    #[test]
    fn extended_reals_in_json() {
        let s = serde_json::to_string(&Wrap { x: f64::INFINITY }).unwrap();
        assert_eq!(s, r#"{"x":"inf"}"#);
        assert_eq!(serde_json::from_str::<Wrap>(&s).unwrap().x, f64::INFINITY);
        let s = serde_json::to_string(&Wrap { x: 0.25 }).unwrap();
        assert_eq!(serde_json::from_str::<Wrap>(&s).unwrap(), Wrap { x: 0.25 });
    }
}

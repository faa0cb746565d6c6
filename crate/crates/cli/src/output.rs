//! Result emission: 17 significant digits everywhere, fixed CSV columns.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

/// Column order of `nodes.csv`.
pub const NODE_COLUMNS: [&str; 17] = [
    "node_id",
    "time",
    "parent_id",
    "q",
    "state_S",
    "state_hit",
    "Y",
    "R",
    "R_plus",
    "stop",
    "u_star_stop",
    "argmax_extreme",
    "z_star",
    "M",
    "C",
    "K",
    "A_q",
];

/// `printf("%.17g", x)`. Non-finite values have no JSON form and come out as
/// `nan`, `inf` or `-inf` here; the JSON writer maps them to `null`.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Pretty JSON whose floats go through [`g17`].
struct G17Formatter(PrettyFormatter<'static>);

impl Formatter for G17Formatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            w.write_all(g17(value).as_bytes())
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn end_object_key<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_key(w)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> serde_json::Result<Vec<u8>> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17Formatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(buf)
}

/// One `nodes.csv` row; `None` cells are written empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeRow {
    pub node_id: String,
    pub time: usize,
    pub parent_id: Option<String>,
    pub q: Option<f64>,
    pub state_s: Option<f64>,
    pub state_hit: Option<f64>,
    pub y: f64,
    pub r: f64,
    pub r_plus: f64,
    pub stop: bool,
    pub u_star_stop: bool,
    pub argmax_extreme: Option<usize>,
    pub z_star: Option<f64>,
    pub m: Option<f64>,
    pub c: Option<f64>,
    pub k: Option<f64>,
    pub a_q: Option<f64>,
}

impl NodeRow {
    fn cells(&self) -> Vec<String> {
        let num = |x: Option<f64>| x.map(g17).unwrap_or_default();
        let flag = |b: bool| if b { "1" } else { "0" }.to_string();
        vec![
            self.node_id.clone(),
            self.time.to_string(),
            self.parent_id.clone().unwrap_or_default(),
            num(self.q),
            num(self.state_s),
            num(self.state_hit),
            g17(self.y),
            g17(self.r),
            g17(self.r_plus),
            flag(self.stop),
            flag(self.u_star_stop),
            self.argmax_extreme.map(|i| i.to_string()).unwrap_or_default(),
            num(self.z_star),
            num(self.m),
            num(self.c),
            num(self.k),
            num(self.a_q),
        ]
    }
}

pub fn to_csv_bytes(rows: &[NodeRow]) -> csv::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(NODE_COLUMNS)?;
    for row in rows {
        w.write_record(row.cells())?;
    }
    w.into_inner().map_err(|e| csv::Error::from(e.into_error()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        // Reference strings are what C's printf("%.17g") prints.
        let cases = [
            (1.5, "1.5"),
            (0.1, "0.10000000000000001"),
            (-0.2, "-0.20000000000000001"),
            (2.625, "2.625"),
            (1.0 / 3.0, "0.33333333333333331"),
            (100.0, "100"),
            (1e17, "1e+17"),
            (123456789012345680.0, "1.2345678901234568e+17"),
            (1e-5, "1.0000000000000001e-05"),
            (0.0001, "0.0001"),
            (0.0, "0"),
            (-3.0, "-3"),
            (1e300, "1.0000000000000001e+300"),
        ];
        for (x, s) in cases {
            assert_eq!(g17(x), s, "{x:e}");
        }
    }

    #[test]
    fn g17_round_trips() {
        for x in [0.1, 2.0 / 3.0, 1e-300, 123.456, f64::MAX, f64::MIN_POSITIVE, -7.25e-9] {
            assert_eq!(g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_nonfinite_is_null() {
        let v = serde_json::json!({"a": 1.5, "b": [0.1, 2]});
        let text = String::from_utf8(to_json_bytes(&v).unwrap()).unwrap();
        assert!(text.contains("\"a\": 1.5"));
        assert!(text.contains("0.10000000000000001"));
        #[derive(Serialize)]
        struct S {
            x: f64,
        }
        let text = String::from_utf8(to_json_bytes(&S { x: f64::NAN }).unwrap()).unwrap();
        assert!(text.contains("\"x\": null"));
    }

    #[test]
    fn csv_keeps_empty_columns() {
        let row = NodeRow {
            node_id: "r".into(),
            y: 1.0,
            r: 1.5,
            r_plus: 1.5,
            ..NodeRow::default()
        };
        let text = String::from_utf8(to_csv_bytes(&[row]).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), NODE_COLUMNS.join(","));
        assert_eq!(lines.next().unwrap(), "r,0,,,,,1,1.5,1.5,0,0,,,,,,");
    }
}

use serde::Serialize;
use serde_json::value::RawValue;

pub const PROB_PLACES: usize = 6;
pub const THRESHOLD_PLACES: usize = 4;
pub const SCORE_PLACES: usize = 4;

pub fn fixed(x: f64, places: usize) -> String {
    if x.is_finite() {
        // avoid printing -0.000000
        let s = format!("{x:.places$}");
        if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
            s[1..].to_string()
        } else {
            s
        }
    } else {
        String::new()
    }
}

pub fn opt_fixed(x: Option<f64>, places: usize) -> String {
    x.map(|v| fixed(v, places)).unwrap_or_default()
}

/// JSON number with a fixed number of decimals; `null` when not finite.
#[derive(Debug, Clone)]
pub struct Fixed(Box<RawValue>);

impl Fixed {
    pub fn new(x: f64, places: usize) -> Self {
        let text = if x.is_finite() { fixed(x, places) } else { "null".to_string() };
        Fixed(RawValue::from_string(text).expect("formatted float is valid JSON"))
    }

    /// Caller guarantees `text` is a JSON number.
    pub fn raw(text: String) -> Self {
        Fixed(RawValue::from_string(text).expect("valid JSON number"))
    }

    pub fn prob(x: f64) -> Self {
        Fixed::new(x, PROB_PLACES)
    }

    pub fn threshold(x: f64) -> Self {
        Fixed::new(x, THRESHOLD_PLACES)
    }

    pub fn score(x: f64) -> Self {
        Fixed::new(x, SCORE_PLACES)
    }
}

impl Serialize for Fixed {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.0.serialize(s)
    }
}

/// Comma-separated table with a fixed header.
pub struct Csv {
    out: String,
    width: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Csv { out, width: header.len() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.width);
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialises");
    s.push('\n');
    s
}

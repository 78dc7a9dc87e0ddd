//! CSV emission with fixed, locale-free number formatting.

use std::fmt::Write;

/// Shortest decimal that round-trips, switching to exponent form for very
/// large or small magnitudes.
pub fn fmt_num(v: f64) -> String {
    format!("{v:?}")
}

/// Seventeen significant digits, for matrices meant for external checks.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

/// A CSV document: provenance comment, header, then rows.
#[derive(Debug, Clone)]
pub struct Table {
    text: String,
    width: usize,
}

impl Table {
    pub fn new(config_hash: &str, seed: u64, header: &[&str]) -> Self {
        let mut text = format!("# config_hash={config_hash} seed={seed}\n");
        text.push_str(&header.join(","));
        text.push('\n');
        Self {
            text,
            width: header.len(),
        }
    }

    pub fn row<S: AsRef<str>>(&mut self, cells: &[S]) {
        assert_eq!(cells.len(), self.width, "row width does not match header");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            write!(self.text, "{}", c.as_ref()).expect("writing to a String");
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

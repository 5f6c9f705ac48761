//! Fixed-format CSV helpers. Numbers are written with 12 significant digits
//! in scientific notation, so identical runs give identical bytes.

use std::io::{self, Write};

pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        // folds -0.0 into 0.0
        return format!("{:.11e}", 0.0);
    }
    format!("{x:.11e}")
}

/// Row-oriented table of preformatted cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn write<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for row in &self.rows {
            out.write_record(row)?;
        }
        out.flush()
    }

    pub fn to_string_lossy(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("table cells are UTF-8")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_num(0.5), "5.00000000000e-1");
        assert_eq!(fmt_num(-0.0), "0.00000000000e0");
        assert_eq!(fmt_num(std::f64::consts::PI), "3.14159265359e0");
        assert_eq!(fmt_num(1.0e4), "1.00000000000e4");
    }

    #[test]
    fn table_layout() {
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["1".into(), "x".into()]);
        assert_eq!(t.to_string_lossy(), "a,b\n1,x\n");
    }
}

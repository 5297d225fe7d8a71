//! CSV assembly helpers. All floating-point values are printed with 17
//! significant digits so byte-level determinism is checkable.

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Incremental CSV builder; the caller owns writing the bytes out.
#[derive(Debug, Default)]
pub struct Csv {
    buf: String,
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        let mut csv = Csv { buf: String::new() };
        csv.buf.push_str(&columns.join(","));
        csv.buf.push('\n');
        csv
    }

    pub fn row(&mut self, fields: &[CsvField]) {
        let mut first = true;
        for f in fields {
            if !first {
                self.buf.push(',');
            }
            first = false;
            match f {
                CsvField::Str(s) => self.buf.push_str(s),
                CsvField::Int(i) => self.buf.push_str(&i.to_string()),
                CsvField::Float(x) => self.buf.push_str(&fmt_f64(*x)),
                CsvField::Bool(b) => self.buf.push_str(if *b { "true" } else { "false" }),
                CsvField::Empty => {}
            }
        }
        self.buf.push('\n');
    }

    pub fn into_string(self) -> String {
        self.buf
    }

    pub fn as_str(&self) -> &str {
        &self.buf
    }
}

/// One CSV cell.
#[derive(Debug, Clone)]
pub enum CsvField<'a> {
    Str(&'a str),
    Int(i64),
    Float(f64),
    Bool(bool),
    Empty,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_f64(std::f64::consts::PI), "3.1415926535897931e0");
        assert_eq!(fmt_f64(-0.5), "-5.0000000000000000e-1");
    }

    #[test]
    fn builds_rows() {
        let mut csv = Csv::new(&["index", "mu", "flag"]);
        csv.row(&[CsvField::Int(1), CsvField::Float(0.25), CsvField::Bool(true)]);
        csv.row(&[CsvField::Int(2), CsvField::Empty, CsvField::Bool(false)]);
        assert_eq!(
            csv.as_str(),
            "index,mu,flag\n1,2.5000000000000000e-1,true\n2,,false\n"
        );
    }
}

//! Fixed-format CSV writer. Floats are printed with 17 significant digits so
//! every value round-trips.

use std::fmt::Write;

pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        String::new()
    }
}

#[derive(Debug, Default)]
pub struct Table {
    out: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[String]) -> Self {
        let mut t = Table { out: String::new(), width: header.len() };
        t.out.push_str(&header.join(","));
        t.out.push('\n');
        t
    }

    pub fn row(&mut self, values: &[f64]) {
        debug_assert_eq!(values.len(), self.width);
        let cells: Vec<String> = values.iter().map(|v| num(*v)).collect();
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    /// Leading value followed by empty cells.
    pub fn blank(&mut self, lead: f64) {
        let _ = write!(self.out, "{}{}", num(lead), ",".repeat(self.width - 1));
        self.out.push('\n');
    }

    pub fn finish(self) -> String {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        let x = 0.1 + 0.2;
        let s = num(x);
        assert_eq!(s, "3.0000000000000004e-1");
        assert_eq!(s.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn blank_row_keeps_width() {
        let mut t = Table::new(&["a".into(), "b".into(), "c".into()]);
        t.blank(1.0);
        assert_eq!(t.finish(), "a,b,c\n1.0000000000000000e0,,\n");
    }
}

//! Number formatting and the measure-table CSV.

use std::io::{self, Write};

use matgibbs::MeasureTable;

/// Significant digits used for every CSV value.
pub const CSV_DIGITS: usize = 15;

/// `printf("%.{digits}g")`: fixed notation for exponents in `[-4, digits)`,
/// scientific otherwise, trailing zeros removed.
pub fn format_g(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `word,depth,kappa,tau_11,tau_12,...,tau_dd` with the upper triangle of
/// `tau` in row-major order.
pub fn write_measure_csv<W: Write>(table: &MeasureTable, out: &mut W) -> io::Result<()> {
    let mut header = vec!["word".to_string(), "depth".into(), "kappa".into()];
    for i in 1..=table.dim {
        for j in i..=table.dim {
            header.push(format!("tau_{i}{j}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for row in &table.rows {
        write!(
            out,
            "{},{},{}",
            row.word,
            row.word.depth(),
            format_g(row.kappa, CSV_DIGITS)
        )?;
        for v in row.tau.upper_triangle() {
            write!(out, ",{}", format_g(v, CSV_DIGITS))?;
        }
        writeln!(out)?;
    }
    Ok(())
}

//! Plain-text grid interchange:
//!
//! ```text
//! gridmap <role> <W> <H> <cell_size> <x_min> <y_min>
//! <row j = 0: W space-separated values>
//! ...
//! <row j = H-1>
//! ```
//!
//! Values carry 9 significant digits. A file may hold several blocks back to back.

use super::{GridSpec, MapError, ScalarGrid};

/// One parsed `gridmap` block.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub role: String,
    pub grid: ScalarGrid,
}

/// Formats a value with 9 significant digits, trimming trailing zeros.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        t.to_string()
    } else {
        s
    }
}

pub fn write_grid(role: &str, grid: &ScalarGrid) -> String {
    let spec = grid.spec();
    let mut out = format!(
        "gridmap {} {} {} {} {} {}\n",
        role,
        spec.width,
        spec.height,
        format_value(spec.cell_size),
        format_value(spec.origin_x),
        format_value(spec.origin_y)
    );
    for row in grid.values().chunks(spec.width) {
        let line: Vec<String> = row.iter().map(|&v| format_value(v)).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, reason: impl Into<String>) -> MapError {
    MapError::Parse {
        line,
        reason: reason.into(),
    }
}

pub fn parse_grids(text: &str) -> Result<Vec<GridBlock>, MapError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let mut blocks = Vec::new();
    while let Some((lineno, header)) = lines.next() {
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 7 || fields[0] != "gridmap" {
            return Err(parse_err(lineno, "expected `gridmap <role> <W> <H> <cell> <x> <y>`"));
        }
        let num = |s: &str| -> Result<f64, MapError> {
            s.parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("bad number {s:?}: {e}")))
        };
        let count = |s: &str| -> Result<usize, MapError> {
            s.parse::<usize>()
                .map_err(|e| parse_err(lineno, format!("bad count {s:?}: {e}")))
        };
        let spec = GridSpec::new(
            count(fields[2])?,
            count(fields[3])?,
            num(fields[4])?,
            num(fields[5])?,
            num(fields[6])?,
        )?;
        let mut values = Vec::with_capacity(spec.len());
        for _ in 0..spec.height {
            let (rowno, row) = lines
                .next()
                .ok_or_else(|| parse_err(lineno, "truncated grid block"))?;
            let before = values.len();
            for tok in row.split_whitespace() {
                values.push(
                    tok.parse::<f64>()
                        .map_err(|e| parse_err(rowno, format!("bad value {tok:?}: {e}")))?,
                );
            }
            if values.len() - before != spec.width {
                return Err(parse_err(
                    rowno,
                    format!("expected {} values, found {}", spec.width, values.len() - before),
                ));
            }
        }
        blocks.push(GridBlock {
            role: fields[1].to_string(),
            grid: ScalarGrid::from_values(spec, values)?,
        });
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_nine_significant_digits() {
        assert_eq!(format_value(0.4), "0.4");
        assert_eq!(format_value(1.0 / 3.0), "0.333333333");
        assert_eq!(format_value(123456789.0), "123456789");
        assert_eq!(format_value(1.5e12), "1.5e12");
        assert_eq!(format_value(-2.25e-7), "-2.25e-7");
        assert_eq!(format_value(9.9999999999), "10");
    }

    #[test]
    fn rejects_short_rows() {
        let text = "gridmap cover 2 1 1 0 0\n0.5\n";
        assert!(parse_grids(text).is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_exact_after_rounding(
            values in proptest::collection::vec(-1e6f64..1e6, 12),
        ) {
            let spec = GridSpec::new(4, 3, 0.5, -2.0, 3.25).unwrap();
            let grid = ScalarGrid::from_values(spec, values.clone()).unwrap();
            let text = write_grid("height", &grid);
            let parsed = parse_grids(&text).unwrap();
            prop_assert_eq!(parsed.len(), 1);
            prop_assert_eq!(&parsed[0].role, "height");
            prop_assert_eq!(parsed[0].grid.spec(), &spec);
            for (a, b) in values.iter().zip(parsed[0].grid.values()) {
                let rounded: f64 = format!("{a:.8e}").parse().unwrap();
                prop_assert_eq!(rounded, *b);
            }
            // stable under a second pass
            prop_assert_eq!(write_grid("height", &parsed[0].grid), text);
        }
    }
}

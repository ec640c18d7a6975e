//! The alist sparse-matrix text format.
//!
//! ```text
//! N M
//! max_col_degree max_row_degree
//! N column degrees
//! M row degrees
//! N lines: 1-based row indices of each column (zero padded)
//! M lines: 1-based column indices of each row (zero padded)
//! ```

use super::{BitMatrix, CodeError};

fn err(msg: impl Into<String>) -> CodeError {
    CodeError::Alist(msg.into())
}

pub fn parse_alist(text: &str) -> Result<BitMatrix, CodeError> {
    let mut nums = text.split_whitespace().map(|t| t.parse::<usize>().map_err(|_| err(format!("not a number: {t:?}"))));
    let mut next = |what: &str| nums.next().unwrap_or_else(|| Err(err(format!("unexpected end while reading {what}"))));
    let n = next("N")?;
    let m = next("M")?;
    if n == 0 || m == 0 {
        return Err(err("empty matrix"));
    }
    let max_col = next("max column degree")?;
    let max_row = next("max row degree")?;
    let col_deg: Vec<usize> = (0..n).map(|_| next("column degrees")).collect::<Result<_, _>>()?;
    let row_deg: Vec<usize> = (0..m).map(|_| next("row degrees")).collect::<Result<_, _>>()?;
    if col_deg.iter().any(|&d| d > max_col) || row_deg.iter().any(|&d| d > max_row) {
        return Err(err("degree exceeds the declared maximum"));
    }
    let mut h = BitMatrix::zeros(m, n);
    for (c, &deg) in col_deg.iter().enumerate() {
        for slot in 0..max_col {
            let r = next("column lists")?;
            if slot < deg {
                if r == 0 || r > m {
                    return Err(err(format!("column {} lists row {r} outside 1..={m}", c + 1)));
                }
                if h.get(r - 1, c) == 1 {
                    return Err(err(format!("column {} lists row {r} twice", c + 1)));
                }
                h.set(r - 1, c, 1);
            } else if r != 0 {
                return Err(err(format!("column {} has more entries than its degree", c + 1)));
            }
        }
    }
    for (r, &deg) in row_deg.iter().enumerate() {
        let mut seen = 0;
        for slot in 0..max_row {
            let c = next("row lists")?;
            if slot < deg {
                if c == 0 || c > n || h.get(r, c - 1) != 1 {
                    return Err(err(format!("row {} lists column {c} inconsistently", r + 1)));
                }
                seen += 1;
            } else if c != 0 {
                return Err(err(format!("row {} has more entries than its degree", r + 1)));
            }
        }
        if seen != h.row_support(r).len() {
            return Err(err(format!("row {} degree disagrees with the column lists", r + 1)));
        }
    }
    Ok(h)
}

pub fn write_alist(h: &BitMatrix) -> String {
    let cols: Vec<Vec<usize>> = (0..h.cols).map(|c| h.col_support(c)).collect();
    let rows: Vec<Vec<usize>> = (0..h.rows).map(|r| h.row_support(r)).collect();
    let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = rows.iter().map(Vec::len).max().unwrap_or(0);
    let line = |v: Vec<String>| v.join(" ") + "\n";
    let padded = |list: &Vec<usize>, width: usize| {
        line((0..width).map(|i| list.get(i).map_or(0, |x| x + 1).to_string()).collect())
    };
    let mut s = format!("{} {}\n{} {}\n", h.cols, h.rows, max_col, max_row);
    s += &line(cols.iter().map(|c| c.len().to_string()).collect());
    s += &line(rows.iter().map(|r| r.len().to_string()).collect());
    for c in &cols {
        s += &padded(c, max_col);
    }
    for r in &rows {
        s += &padded(r, max_row);
    }
    s
}

//! Flat CSV record for a [`HermiteExpansion`].
//!
//! ```text
//! #schema=hermite_expansion/1
//! d,max_order,regularity
//! 2,1,-0.5
//! offset,multi_index,coefficient
//! 0,0:0,0.5641895835477563
//! ...
//! ```
//!
//! Floats are written in shortest round-trip form, so reading back is bit exact.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::expansion::{shared_truncation, HermiteExpansion};

pub const EXPANSION_SCHEMA: &str = "#schema=hermite_expansion/1";

pub fn expansion_to_csv(u: &HermiteExpansion) -> String {
    let mut s = String::with_capacity(32 * u.coeffs().len() + 96);
    s.push_str(EXPANSION_SCHEMA);
    s.push('\n');
    s.push_str("d,max_order,regularity\n");
    let _ = writeln!(
        s,
        "{},{},{:?}",
        u.dimension(),
        u.max_order(),
        u.regularity()
    );
    s.push_str("offset,multi_index,coefficient\n");
    for (off, (entries, c)) in u.truncation().iter().zip(u.coeffs()).enumerate() {
        let _ = write!(s, "{off},");
        for (i, e) in entries.iter().enumerate() {
            if i > 0 {
                s.push(':');
            }
            let _ = write!(s, "{e}");
        }
        let _ = writeln!(s, ",{c:?}");
    }
    s
}

pub fn expansion_from_csv(text: &str) -> Result<HermiteExpansion> {
    parse(text, Path::new("<memory>"))
}

pub fn write_expansion(path: &Path, u: &HermiteExpansion) -> Result<()> {
    std::fs::write(path, expansion_to_csv(u)).map_err(|e| Error::io(path, e))
}

pub fn read_expansion(path: &Path) -> Result<HermiteExpansion> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse(&text, path)
}

fn parse(text: &str, path: &Path) -> Result<HermiteExpansion> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut expect = |want: &str| -> Result<()> {
        match lines.next() {
            Some((_, l)) if l == want => Ok(()),
            Some((n, l)) => Err(err(n, format!("expected `{want}`, found `{l}`"))),
            None => Err(err(0, format!("missing `{want}`"))),
        }
    };
    expect(EXPANSION_SCHEMA)?;
    expect("d,max_order,regularity")?;
    let (hn, header) = lines
        .next()
        .ok_or_else(|| err(0, "missing header values".into()))?;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 3 {
        return Err(err(hn, "header needs three fields".into()));
    }
    let d: usize = fields[0]
        .parse()
        .map_err(|_| err(hn, format!("bad dimension `{}`", fields[0])))?;
    let n: usize = fields[1]
        .parse()
        .map_err(|_| err(hn, format!("bad max_order `{}`", fields[1])))?;
    let regularity: f64 = fields[2]
        .parse()
        .map_err(|_| err(hn, format!("bad regularity `{}`", fields[2])))?;
    let t = shared_truncation(d, n).map_err(|e| err(hn, e.to_string()))?;
    match lines.next() {
        Some((_, "offset,multi_index,coefficient")) => {}
        Some((ln, l)) => return Err(err(ln, format!("unexpected column header `{l}`"))),
        None => return Err(err(0, "missing column header".into())),
    }
    let mut coeffs = Vec::with_capacity(t.size());
    for (ln, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(err(ln, "row needs three fields".into()));
        }
        let off: usize = fields[0]
            .parse()
            .map_err(|_| err(ln, format!("bad offset `{}`", fields[0])))?;
        if off != coeffs.len() || off >= t.size() {
            return Err(err(ln, format!("offset {off} out of sequence")));
        }
        let idx: Vec<u32> = fields[1]
            .split(':')
            .map(|s| s.parse::<u32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| err(ln, format!("bad multi-index `{}`", fields[1])))?;
        if idx.as_slice() != t.entries(off) {
            return Err(err(
                ln,
                format!("multi-index `{}` does not match offset {off}", fields[1]),
            ));
        }
        let c: f64 = fields[2]
            .parse()
            .map_err(|_| err(ln, format!("bad coefficient `{}`", fields[2])))?;
        coeffs.push(c);
    }
    if coeffs.len() != t.size() {
        return Err(err(
            0,
            format!(
                "expected {} coefficient rows, found {}",
                t.size(),
                coeffs.len()
            ),
        ));
    }
    HermiteExpansion::new(t, coeffs, regularity)
}

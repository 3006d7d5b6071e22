//! Plain-text serialization of nodal fields.
//!
//! Format (`AP-FIELD`, version 1): a single header line
//!
//! ```text
//! AP-FIELD 1 <dim> <cells...> <spacing...> <origin...>
//! ```
//!
//! with `dim` entries for each of cells/spacing/origin, followed by one
//! nodal value per line in storage order (first axis fastest). Floats are
//! written with 17 significant digits so a write/read round trip is
//! bit-exact. Lines starting with `#` are ignored.

use crate::error::{ApError, Result};
use crate::grid::{GridSpec, ScalarField};
use std::io::{BufRead, BufReader, Read, Write as IoWrite};
use std::path::Path;

const MAGIC: &str = "AP-FIELD";
const VERSION: u32 = 1;

pub fn write_field<W: IoWrite>(mut w: W, field: &ScalarField) -> Result<()> {
    let g = field.grid();
    let mut header = format!("{MAGIC} {VERSION} {}", g.dim());
    for k in 0..g.dim() {
        header.push_str(&format!(" {}", g.cells(k)));
    }
    for k in 0..g.dim() {
        header.push_str(&format!(" {:.16e}", g.spacing(k)));
    }
    for k in 0..g.dim() {
        header.push_str(&format!(" {:.16e}", g.origin(k)));
    }
    writeln!(w, "{header}")?;
    for v in field.values() {
        writeln!(w, "{v:.16e}")?;
    }
    Ok(())
}

pub fn read_field<R: Read>(r: R) -> Result<ScalarField> {
    let mut lines = BufReader::new(r).lines();
    let header = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                let t = line.trim();
                if t.is_empty() || t.starts_with('#') {
                    continue;
                }
                break t.to_string();
            }
            None => return Err(ApError::Parse("empty field file".into())),
        }
    };
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() < 3 || toks[0] != MAGIC {
        return Err(ApError::Parse(format!("bad header, expected `{MAGIC} <version> <dim> ...`")));
    }
    let version: u32 =
        toks[1].parse().map_err(|_| ApError::Parse("bad version in header".into()))?;
    if version != VERSION {
        return Err(ApError::Parse(format!("unsupported field version {version}")));
    }
    let dim: usize = toks[2].parse().map_err(|_| ApError::Parse("bad dim in header".into()))?;
    if dim != 1 && dim != 2 {
        return Err(ApError::Parse(format!("dim must be 1 or 2, got {dim}")));
    }
    let need = 3 + 3 * dim;
    if toks.len() != need {
        return Err(ApError::Parse(format!(
            "header holds {} tokens, expected {need} for dim {dim}",
            toks.len()
        )));
    }
    let mut cells = [0usize; 2];
    let mut spacing = [1.0f64; 2];
    let mut origin = [0.0f64; 2];
    for k in 0..dim {
        cells[k] = toks[3 + k].parse().map_err(|_| ApError::Parse("bad cell count".into()))?;
        spacing[k] =
            toks[3 + dim + k].parse().map_err(|_| ApError::Parse("bad spacing".into()))?;
        origin[k] =
            toks[3 + 2 * dim + k].parse().map_err(|_| ApError::Parse("bad origin".into()))?;
    }
    let grid = GridSpec::new(dim, cells, origin, spacing)
        .map_err(|e| ApError::Parse(format!("header describes an invalid grid: {e}")))?;
    let mut values = Vec::with_capacity(grid.node_count());
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| ApError::Parse(format!("bad value `{t}`")))?;
        values.push(v);
    }
    if values.len() != grid.node_count() {
        return Err(ApError::Parse(format!(
            "expected {} values, file holds {}",
            grid.node_count(),
            values.len()
        )));
    }
    ScalarField::new(grid, values)
}

pub fn write_field_path(path: &Path, field: &ScalarField) -> Result<()> {
    let mut buf = Vec::new();
    write_field(&mut buf, field)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_field_path(path: &Path) -> Result<ScalarField> {
    let f = std::fs::File::open(path)?;
    read_field(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn round_trip_is_bit_exact_2d() {
        let g = GridSpec::square([16, 24], [-1.0, 0.5], [1.0, 2.0]).unwrap();
        let f = ScalarField::from_fn(g, |p| (13.7 * p[0]).sin() * (p[1] * 0.73).cos() / 3.0)
            .unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let f2 = read_field(&buf[..]).unwrap();
        assert_eq!(f.grid(), f2.grid());
        assert_eq!(f.values(), f2.values());
    }

    #[test]
    fn round_trip_is_bit_exact_1d() {
        let g = GridSpec::interval(37, -0.25, 1.75).unwrap();
        let f = ScalarField::from_fn(g, |p| p[0].exp() - 1.0).unwrap();
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let f2 = read_field(&buf[..]).unwrap();
        assert_eq!(f.grid(), f2.grid());
        assert_eq!(f.values(), f2.values());
    }

    #[test]
    fn comments_and_blank_lines_skipped() {
        let text = "# produced by hand\n\nAP-FIELD 1 1 8 1.25e-1 0.0e0\n# data follows\n0\n1\n2\n3\n4\n5\n6\n7\n8\n";
        let f = read_field(text.as_bytes()).unwrap();
        assert_eq!(f.values().len(), 9);
        assert_eq!(f.values()[3], 3.0);
    }

    #[test]
    fn truncated_and_corrupt_files_error() {
        let ok = "AP-FIELD 1 1 8 1.25e-1 0.0e0\n0\n1\n2\n3\n4\n5\n6\n7\n8\n";
        assert!(read_field(ok.as_bytes()).is_ok());
        let short = "AP-FIELD 1 1 8 1.25e-1 0.0e0\n0\n1\n2\n";
        assert!(matches!(read_field(short.as_bytes()), Err(ApError::Parse(_))));
        let bad_magic = "AP-GRID 1 1 8 1.25e-1 0.0e0\n";
        assert!(read_field(bad_magic.as_bytes()).is_err());
        let bad_value = ok.replace("\n5\n", "\nfive\n");
        assert!(read_field(bad_value.as_bytes()).is_err());
        let nan = ok.replace("\n5\n", "\nNaN\n");
        assert!(read_field(nan.as_bytes()).is_err(), "non-finite values must be rejected");
        assert!(read_field("".as_bytes()).is_err());
    }
}

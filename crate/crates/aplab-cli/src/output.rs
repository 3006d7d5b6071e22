//! Output plumbing: atomic file writes, CSV manifest headers, and the
//! generated plotting scripts.
//!
//! Every CSV starts with a `#` comment naming the tool version, the SHA-256
//! of the config that produced it, and the seed, so results stay traceable
//! and byte-identical reruns are diffable.

use std::path::Path;

use aplab_core::fieldio::write_field;
use aplab_core::grid::ScalarField;
use aplab_core::Result;

pub fn manifest(config_hash: &str, seed: u64) -> String {
    format!("# aplab {} config-sha256={config_hash} seed={seed}", env!("CARGO_PKG_VERSION"))
}

/// Exact-round-trip float formatting shared by all CSV columns.
pub fn fnum(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write-temp-then-rename; the rename is atomic on the same filesystem.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_csv(path: &Path, head: &str, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(rows.iter().map(|r| r.len() + 1).sum::<usize>() + 256);
    text.push_str(head);
    text.push('\n');
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

pub fn write_field_atomic(path: &Path, field: &ScalarField) -> Result<()> {
    let mut bytes = Vec::new();
    write_field(&mut bytes, field)?;
    write_atomic(path, &bytes)
}

/// A small self-contained matplotlib script next to the CSV it plots;
/// emitting code instead of images keeps the tool dependency-free and the
/// outputs diffable.
pub fn plot_script(csv_name: &str, kind: PlotKind) -> String {
    let body = match kind {
        PlotKind::Iterations => {
            "fig, (a, b) = plt.subplots(2, 1, sharex=True)\n\
             a.semilogy(col(\"iter\"), [e - min(col(\"energy\")) + 1e-16 for e in col(\"energy\")])\n\
             a.set_ylabel(\"energy above best\")\n\
             b.semilogy(col(\"iter\"), col(\"pg_norm\"))\n\
             b.set_ylabel(\"projected gradient\")\n\
             b.set_xlabel(\"iteration\")\n"
        }
        PlotKind::Growth => {
            "plt.loglog(col(\"r\"), col(\"sup_ball\"), \"o-\")\n\
             plt.xlabel(\"r\")\n\
             plt.ylabel(\"sup over the ball\")\n"
        }
        PlotKind::Weiss => {
            "plt.semilogx(col(\"r\"), col(\"w\"), \"o-\")\n\
             plt.xlabel(\"r\")\n\
             plt.ylabel(\"adjusted boundary energy\")\n"
        }
        PlotKind::Blowup => {
            "plt.semilogx(col(\"r_to\"), col(\"sup_gap\"), \"o-\")\n\
             plt.xlabel(\"inner radius\")\n\
             plt.ylabel(\"sup gap between rescalings\")\n"
        }
    };
    format!(
        "#!/usr/bin/env python3\n\
         import csv\n\
         import matplotlib\n\
         matplotlib.use(\"Agg\")\n\
         import matplotlib.pyplot as plt\n\
         \n\
         rows = [r for r in csv.reader(open(\"{csv_name}\")) if r and not r[0].startswith(\"#\")]\n\
         names = rows[0]\n\
         \n\
         def col(name):\n\
         \x20   k = names.index(name)\n\
         \x20   return [float(r[k]) for r in rows[1:]]\n\
         \n\
         {body}\
         plt.tight_layout()\n\
         plt.savefig(\"{csv_name}.png\", dpi=160)\n\
         print(\"wrote {csv_name}.png\")\n"
    )
}

#[derive(Clone, Copy)]
pub enum PlotKind {
    Iterations,
    Growth,
    Weiss,
    Blowup,
}

//! Plain-text dumps for offline inspection.
//!
//! Matrices: a header line `% rows cols nnz` followed by one `row col value`
//! line per stored entry (zero-based indices, values in `{:.17e}`), in
//! row-major order.
//!
//! Meshes: a header line `% n_x n_t boundary interface_node`, then one line
//! per time level holding `t_n` followed by the node positions.

use std::io::{self, Write};

use sprs::CsMat;

use super::mesh::SpaceTimeMesh;

pub fn write_triplets<W: Write>(out: &mut W, a: &CsMat<f64>) -> io::Result<()> {
    writeln!(out, "% {} {} {}", a.rows(), a.cols(), a.nnz())?;
    for (r, row) in a.outer_iterator().enumerate() {
        for (c, v) in row.iter() {
            writeln!(out, "{r} {c} {v:.17e}")?;
        }
    }
    Ok(())
}

pub fn write_mesh<W: Write>(out: &mut W, mesh: &SpaceTimeMesh) -> io::Result<()> {
    writeln!(
        out,
        "% {} {} {:?} {}",
        mesh.n_x(),
        mesh.n_t(),
        mesh.boundary(),
        mesh.interface_node()
    )?;
    for (n, t) in mesh.times().iter().enumerate() {
        write!(out, "{t:.17e}")?;
        for x in mesh.level(n) {
            write!(out, " {x:.17e}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Parse a triplet dump back into `(rows, cols, triplets)`.
pub fn read_triplets(text: &str) -> Option<(usize, usize, Vec<(usize, usize, f64)>)> {
    let mut lines = text.lines();
    let header: Vec<usize> = lines
        .next()?
        .strip_prefix('%')?
        .split_whitespace()
        .map(|s| s.parse().ok())
        .collect::<Option<_>>()?;
    let [rows, cols, nnz] = header[..] else { return None };
    let triplets: Vec<(usize, usize, f64)> = lines
        .map(|l| {
            let mut it = l.split_whitespace();
            Some((it.next()?.parse().ok()?, it.next()?.parse().ok()?, it.next()?.parse().ok()?))
        })
        .collect::<Option<_>>()?;
    (triplets.len() == nnz).then_some((rows, cols, triplets))
}

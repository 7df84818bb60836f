//! Per-(node, facet) embedding tables and their text format.

use std::io::Write;
use std::path::Path;

use rand::Rng;

use crate::error::{validation, Error, Result};
use crate::graph::IdMap;
use crate::rng;
use crate::textio;

/// `rows × k` vectors of length `dim`, stored row-major by `(node, facet)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetTable {
    rows: usize,
    k: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FacetTable {
    pub fn zeros(rows: usize, k: usize, dim: usize) -> Self {
        FacetTable { rows, k, dim, data: vec![0.0; rows * k * dim] }
    }

    pub fn from_vec(rows: usize, k: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * k * dim {
            return Err(validation(format!(
                "table data has {} values, expected {rows}x{k}x{dim}",
                data.len()
            )));
        }
        Ok(FacetTable { rows, k, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn offset(&self, node: usize, facet: usize) -> usize {
        (node * self.k + facet) * self.dim
    }

    #[inline]
    pub fn vector(&self, node: usize, facet: usize) -> &[f64] {
        let o = self.offset(node, facet);
        &self.data[o..o + self.dim]
    }

    #[inline]
    pub fn vector_mut(&mut self, node: usize, facet: usize) -> &mut [f64] {
        let o = self.offset(node, facet);
        &mut self.data[o..o + self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Order-sensitive digest of the raw bits, for reproducibility checks.
    pub fn checksum(&self) -> u64 {
        self.data.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
            (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableKind {
    /// Target and context tables index the same node set.
    Homogeneous,
    /// Target table over type-A nodes, context table over type-B nodes.
    Bipartite,
}

/// Target table `U` and context table `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTables {
    pub kind: TableKind,
    pub target: FacetTable,
    pub context: FacetTable,
}

impl EmbeddingTables {
    pub fn k(&self) -> usize {
        self.target.k()
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn is_finite(&self) -> bool {
        self.target.is_finite() && self.context.is_finite()
    }

    pub fn checksum(&self) -> u64 {
        self.target.checksum().rotate_left(17) ^ self.context.checksum()
    }
}

fn uniform_target(rows: usize, k: usize, dim: usize, seed: u64) -> FacetTable {
    let mut r = rng::seeded(seed);
    let half = 0.5 / dim as f64;
    let data = (0..rows * k * dim).map(|_| (r.random::<f64>() * 2.0 - 1.0) * half).collect();
    FacetTable { rows, k, dim, data }
}

/// `U` uniform in `(−0.5/D, 0.5/D)`, `H` zero.
pub fn init_tables(n: usize, k: usize, dim: usize, seed: u64) -> Result<EmbeddingTables> {
    check_dims(n, k, dim)?;
    Ok(EmbeddingTables {
        kind: TableKind::Homogeneous,
        target: uniform_target(n, k, dim, seed),
        context: FacetTable::zeros(n, k, dim),
    })
}

/// Bipartite variant: `U` over `num_a` type-A nodes, `H` over `num_b`.
pub fn init_bipartite_tables(num_a: usize, num_b: usize, k: usize, dim: usize, seed: u64) -> Result<EmbeddingTables> {
    check_dims(num_a.max(1), k, dim)?;
    Ok(EmbeddingTables {
        kind: TableKind::Bipartite,
        target: uniform_target(num_a, k, dim, seed),
        context: FacetTable::zeros(num_b, k, dim),
    })
}

fn check_dims(n: usize, k: usize, dim: usize) -> Result<()> {
    if n == 0 || k == 0 || dim == 0 {
        return Err(validation(format!("table dimensions must be positive (N={n}, K={k}, D={dim})")));
    }
    Ok(())
}

/// Writes header `N K D` then `node facet v_1 .. v_D` per row.
pub fn write_table<W: Write>(out: &mut W, table: &FacetTable, ids: &IdMap) -> Result<()> {
    if ids.len() != table.rows() {
        return Err(validation("id map and table disagree on node count"));
    }
    writeln!(out, "{} {} {}", table.rows(), table.k(), table.dim())?;
    for v in 0..table.rows() {
        for k in 0..table.k() {
            textio::write_row(out, &format!("{} {k}", ids.label(v)), table.vector(v, k))?;
        }
    }
    Ok(())
}

pub fn save_table(path: &Path, table: &FacetTable, ids: &IdMap) -> Result<()> {
    let mut out = textio::create(path)?;
    write_table(&mut out, table, ids)?;
    out.flush()?;
    Ok(())
}

/// Parses a table, resolving labels through `ids`. Returns the table and
/// the label order found in the file when `ids` is `None`.
pub fn parse_table(text: &str, ids: Option<&IdMap>) -> Result<(FacetTable, IdMap)> {
    let mut lines = textio::data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| validation("embedding file is empty"))?;
    if header.len() != 3 {
        return Err(Error::Parse { line: hline, message: "expected header `N K D`".into() });
    }
    let n: usize = textio::parse_field(hline, header[0], "N")?;
    let k: usize = textio::parse_field(hline, header[1], "K")?;
    let dim: usize = textio::parse_field(hline, header[2], "D")?;
    let mut table = FacetTable::zeros(n, k, dim);
    let mut seen = vec![false; n * k];
    let mut local = IdMap::default();
    for (line, fields) in lines {
        if fields.len() != dim + 2 {
            return Err(Error::Parse { line, message: format!("expected node, facet and {dim} values") });
        }
        let v = match ids {
            Some(ids) => ids
                .get(fields[0])
                .ok_or_else(|| validation(format!("line {line}: unknown node {:?}", fields[0])))?,
            None => local.get_or_insert(fields[0]),
        };
        if v >= n {
            return Err(Error::Index { index: v, len: n });
        }
        let f: usize = textio::parse_field(line, fields[1], "facet")?;
        if f >= k {
            return Err(Error::Index { index: f, len: k });
        }
        for (slot, field) in table.vector_mut(v, f).iter_mut().zip(&fields[2..]) {
            *slot = textio::parse_field(line, field, "value")?;
        }
        seen[v * k + f] = true;
    }
    if seen.iter().any(|s| !s) {
        return Err(validation("embedding file is missing (node, facet) rows"));
    }
    let map = match ids {
        Some(ids) => ids.clone(),
        None => local,
    };
    Ok((table, map))
}

pub fn load_table(path: &Path, ids: Option<&IdMap>) -> Result<(FacetTable, IdMap)> {
    parse_table(&textio::read_to_string(path)?, ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_ranges_and_determinism() {
        let t = init_tables(2, 2, 4, 9).unwrap();
        assert_eq!(t.target.as_slice().len(), 16);
        assert!(t.target.as_slice().iter().all(|v| v.abs() < 0.125));
        assert!(t.context.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(t, init_tables(2, 2, 4, 9).unwrap());
        assert_ne!(t, init_tables(2, 2, 4, 10).unwrap());
        assert!(init_tables(0, 1, 1, 0).is_err());
    }

    #[test]
    fn table_file_round_trip() {
        let t = init_tables(3, 2, 5, 1).unwrap().target;
        let ids = IdMap::from_labels(vec!["x".into(), "y".into(), "z".into()]);
        let mut buf = Vec::new();
        write_table(&mut buf, &t, &ids).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let (back, _) = parse_table(&text, Some(&ids)).unwrap();
        assert_eq!(back, t);
        let (back, map) = parse_table(&text, None).unwrap();
        assert_eq!(back, t);
        assert_eq!(map, ids);
    }
}

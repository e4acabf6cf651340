//! Plain-text mesh and field files.
//!
//! ```text
//! limstrain-mesh 1
//! dim <d>
//! vertices <count>
//! <x_1> .. <x_d>                      one line per vertex
//! cells <count>
//! <v_0> .. <v_d>                      one line per cell, 0-based
//! facets <count>
//! <v_1> .. <v_d> <D|N>                one line per boundary facet
//! ```
//!
//! A field file is a mesh followed by any number of value blocks and a
//! closing `end` line:
//!
//! ```text
//! nodal <name> <components>           then one line per vertex
//! cellwise <name> <width>             then one line per cell
//! end
//! ```
//!
//! Tokens are separated by single spaces, lines end with `\n`, and reals
//! are written in Rust's shortest round-trip exponent form (`{:e}`), so a
//! written file reads back to bit-identical values.

use std::fmt::Write as _;

use super::field::{CellTensorField, Field};
use super::mesh::{FacetTag, MeshDomain};
use crate::error::{Error, Result};

pub const MESH_HEADER: &str = "limstrain-mesh 1";

/// Per-node values of a named quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalBlock {
    pub name: String,
    pub components: usize,
    pub values: Vec<f64>,
}

/// Per-cell values of a named quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct CellBlock {
    pub name: String,
    pub width: usize,
    pub values: Vec<f64>,
}

impl NodalBlock {
    pub fn from_field(name: &str, field: &Field) -> Self {
        NodalBlock {
            name: name.to_string(),
            components: field.components(),
            values: field.values().to_vec(),
        }
    }
}

impl CellBlock {
    /// Cell means of a tensor field, flattened row-major.
    pub fn from_tensor_field(name: &str, tf: &CellTensorField) -> Self {
        let mut values = Vec::new();
        let mut width = 0;
        for c in 0..tf.n_cells() {
            let m = tf.cell_mean(c);
            width = m.len();
            values.extend_from_slice(m.as_slice());
        }
        CellBlock {
            name: name.to_string(),
            width,
            values,
        }
    }

    pub fn scalars(name: &str, values: Vec<f64>) -> Self {
        CellBlock {
            name: name.to_string(),
            width: 1,
            values,
        }
    }
}

fn push_row(out: &mut String, vals: &[f64]) {
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

pub fn write_mesh(mesh: &MeshDomain) -> String {
    let dim = mesh.dim();
    let mut out = String::new();
    let _ = writeln!(out, "{MESH_HEADER}");
    let _ = writeln!(out, "dim {dim}");
    let _ = writeln!(out, "vertices {}", mesh.n_vertices());
    for p in mesh.vertices() {
        push_row(&mut out, &p[..dim]);
    }
    let _ = writeln!(out, "cells {}", mesh.n_cells());
    for c in 0..mesh.n_cells() {
        let line: Vec<String> = mesh.cell(c).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{}", line.join(" "));
    }
    let _ = writeln!(out, "facets {}", mesh.facets().len());
    for f in mesh.facets() {
        let line: Vec<String> = f.nodes(dim).iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{} {}", line.join(" "), f.tag.letter());
    }
    out
}

pub fn write_field_file(mesh: &MeshDomain, nodal: &[NodalBlock], cellwise: &[CellBlock]) -> String {
    let mut out = write_mesh(mesh);
    for b in nodal {
        let _ = writeln!(out, "nodal {} {}", b.name, b.components);
        for row in b.values.chunks(b.components) {
            push_row(&mut out, row);
        }
    }
    for b in cellwise {
        let _ = writeln!(out, "cellwise {} {}", b.name, b.width);
        for row in b.values.chunks(b.width.max(1)) {
            push_row(&mut out, row);
        }
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, Vec<&'a str>)> {
        for (i, l) in self.inner.by_ref() {
            let l = l.trim();
            if !l.is_empty() {
                return Ok((i + 1, l.split_whitespace().collect()));
            }
        }
        Err(Error::Parse {
            line: 0,
            message: "unexpected end of file".into(),
        })
    }

    fn keyword(&mut self, key: &str) -> Result<(usize, usize)> {
        let (line, toks) = self.next_line()?;
        if toks.len() != 2 || toks[0] != key {
            return Err(Error::Parse {
                line,
                message: format!("expected '{key} <count>'"),
            });
        }
        let n = parse_num::<usize>(toks[1], line)?;
        Ok((line, n))
    }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse::<T>().map_err(|_| Error::Parse {
        line,
        message: format!("cannot parse '{tok}'"),
    })
}

fn read_mesh_from(lines: &mut Lines<'_>) -> Result<MeshDomain> {
    let (line, toks) = lines.next_line()?;
    if toks.join(" ") != MESH_HEADER {
        return Err(Error::Parse {
            line,
            message: format!("expected header '{MESH_HEADER}'"),
        });
    }
    let (_, dim) = lines.keyword("dim")?;
    if !(1..=3).contains(&dim) {
        return Err(Error::Parse {
            line: line + 1,
            message: format!("dimension {dim} unsupported"),
        });
    }
    let (_, nv) = lines.keyword("vertices")?;
    let mut coords = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (line, toks) = lines.next_line()?;
        if toks.len() != dim {
            return Err(Error::Parse {
                line,
                message: format!("vertex needs {dim} coordinates"),
            });
        }
        let mut p = [0.0; 3];
        for (k, t) in toks.iter().enumerate() {
            p[k] = parse_num::<f64>(t, line)?;
        }
        coords.push(p);
    }
    let (_, nc) = lines.keyword("cells")?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line, toks) = lines.next_line()?;
        if toks.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                message: format!("cell needs {} vertex indices", dim + 1),
            });
        }
        cells.push(
            toks.iter()
                .map(|t| parse_num::<usize>(t, line))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let (_, nf) = lines.keyword("facets")?;
    let mut facets = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (line, toks) = lines.next_line()?;
        if toks.len() != dim + 1 {
            return Err(Error::Parse {
                line,
                message: format!("facet needs {dim} vertex indices and a tag"),
            });
        }
        let verts = toks[..dim]
            .iter()
            .map(|t| parse_num::<usize>(t, line))
            .collect::<Result<Vec<_>>>()?;
        let tag = match toks[dim] {
            "D" => FacetTag::Dirichlet,
            "N" => FacetTag::Neumann,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("facet tag must be D or N, got '{other}'"),
                })
            }
        };
        facets.push((verts, tag));
    }
    MeshDomain::from_parts(dim, coords, cells, facets)
}

pub fn read_mesh(text: &str) -> Result<MeshDomain> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    read_mesh_from(&mut lines)
}

/// Parsed field file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFile {
    pub mesh: MeshDomain,
    pub nodal: Vec<NodalBlock>,
    pub cellwise: Vec<CellBlock>,
}

pub fn read_field_file(text: &str) -> Result<FieldFile> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let mesh = read_mesh_from(&mut lines)?;
    let mut nodal = Vec::new();
    let mut cellwise = Vec::new();
    loop {
        let (line, toks) = lines.next_line()?;
        match toks.as_slice() {
            ["end"] => break,
            [kind @ ("nodal" | "cellwise"), name, width] => {
                let width = parse_num::<usize>(width, line)?;
                let rows = if *kind == "nodal" {
                    mesh.n_vertices()
                } else {
                    mesh.n_cells()
                };
                let mut values = Vec::with_capacity(rows * width);
                for _ in 0..rows {
                    let (l, t) = lines.next_line()?;
                    if t.len() != width {
                        return Err(Error::Parse {
                            line: l,
                            message: format!("expected {width} values"),
                        });
                    }
                    for tok in t {
                        values.push(parse_num::<f64>(tok, l)?);
                    }
                }
                if *kind == "nodal" {
                    nodal.push(NodalBlock {
                        name: name.to_string(),
                        components: width,
                        values,
                    });
                } else {
                    cellwise.push(CellBlock {
                        name: name.to_string(),
                        width,
                        values,
                    });
                }
            }
            _ => {
                return Err(Error::Parse {
                    line,
                    message: "expected 'nodal', 'cellwise' or 'end'".into(),
                })
            }
        }
    }
    Ok(FieldFile { mesh, nodal, cellwise })
}

#[cfg(test)]
mod tests {
    use super::super::field::DataFn;
    use super::super::structured::{build_structured_mesh, GeometrySpec};
    use super::*;

    #[test]
    fn mesh_round_trip() {
        let m = build_structured_mesh(&GeometrySpec::LShape { resolution: 2 }, &["left", "bottom"]).unwrap();
        let text = write_mesh(&m);
        assert!(text.starts_with("limstrain-mesh 1\ndim 2\nvertices 21\n"));
        let back = read_mesh(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(write_mesh(&back), text);
    }

    #[test]
    fn field_round_trip_is_bitwise() {
        let m = build_structured_mesh(&GeometrySpec::unit_square(3), &["left"]).unwrap();
        let u = Field::interpolate(
            &m,
            &DataFn::from_fn(2, |x, _| [x[0].sin() / 3.0, (x[1] * 0.1).exp(), 0.0]),
        );
        let text = write_field_file(
            &m,
            &[NodalBlock::from_field("u", &u)],
            &[CellBlock::scalars(
                "flag",
                (0..m.n_cells()).map(|c| c as f64 * 0.1).collect(),
            )],
        );
        let back = read_field_file(&text).unwrap();
        assert_eq!(back.nodal[0].values, u.values());
        assert_eq!(back.cellwise[0].values.len(), m.n_cells());
    }

    #[test]
    fn bad_tag_reports_line() {
        let text = "limstrain-mesh 1\ndim 1\nvertices 2\n0e0\n1e0\ncells 1\n0 1\nfacets 2\n0 D\n1 X\n";
        match read_mesh(text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 10),
            e => panic!("unexpected {e:?}"),
        }
    }
}

//! Mesh and field files.
//!
//! Native mesh format:
//!
//! ```text
//! MORPHMESH v1
//! nodes <N>
//! <x> <y>                       (N lines)
//! triangles <T>
//! <a> <b> <c>                   (T lines, 0-based)
//! boundary_edges <B>
//! <a> <b> <facet>               (B lines)
//! end
//! ```
//!
//! Native field format:
//!
//! ```text
//! MORPHFIELD v1
//! name <name>
//! nodes <N> components <C>
//! <v_1> .. <v_C>                (N lines)
//! end
//! ```
//!
//! Floats are written with 17 significant digits so values round-trip
//! exactly. Blank lines and lines starting with `#` are ignored.
//!
//! Legacy VTK ASCII unstructured grids (cell type 5) are also supported
//! for meshes with point data.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{repair_orientation, BoundaryEdge, NodalField, Point, TriangleMesh};
use crate::error::{Error, Result};

pub const MESH_HEADER: &str = "MORPHMESH v1";
pub const FIELD_HEADER: &str = "MORPHFIELD v1";

/// Non-fatal fixes applied while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub flipped_triangles: usize,
}

impl LoadReport {
    pub fn warnings(&self) -> usize {
        self.flipped_triangles
    }
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    /// Next meaningful line with its 1-based number.
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let t = line.trim();
            if !t.is_empty() && !t.starts_with('#') {
                return Ok((i + 1, t));
            }
        }
        Err(Error::Parse {
            line: self.last + 1,
            msg: "unexpected end of file".into(),
        })
    }

    fn keyword_count(&mut self, keyword: &str) -> Result<usize> {
        let (line, text) = self.next_line()?;
        let mut it = text.split_whitespace();
        if it.next() != Some(keyword) {
            return Err(Error::Parse {
                line,
                msg: format!("expected `{keyword} <count>`, found `{text}`"),
            });
        }
        parse_tok(it.next(), line)
    }
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    let tok = tok.ok_or(Error::Parse {
        line,
        msg: "missing value".into(),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{tok}`"),
    })
}

fn parse_row<T: std::str::FromStr, const N: usize>(text: &str, line: usize) -> Result<[T; N]>
where
    T: Copy + Default,
{
    let mut out = [T::default(); N];
    let mut it = text.split_whitespace();
    for o in out.iter_mut() {
        *o = parse_tok(it.next(), line)?;
    }
    if it.next().is_some() {
        return Err(Error::Parse {
            line,
            msg: format!("expected {N} values"),
        });
    }
    Ok(out)
}

fn check_header(lines: &mut Lines, header: &str) -> Result<()> {
    let (line, text) = lines.next_line()?;
    if text == header {
        return Ok(());
    }
    let magic = header.split_whitespace().next().unwrap_or_default();
    if text.starts_with(magic) {
        Err(Error::Version(text.to_string()))
    } else {
        Err(Error::Parse {
            line,
            msg: format!("expected header `{header}`"),
        })
    }
}

pub fn mesh_to_string(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    writeln!(s, "{MESH_HEADER}").unwrap();
    writeln!(s, "nodes {}", mesh.n_nodes()).unwrap();
    for p in mesh.nodes() {
        writeln!(s, "{} {}", fmt_f64(p[0]), fmt_f64(p[1])).unwrap();
    }
    writeln!(s, "triangles {}", mesh.n_triangles()).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "{} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "boundary_edges {}", mesh.boundary_edges().len()).unwrap();
    for be in mesh.boundary_edges() {
        writeln!(s, "{} {} {}", be.nodes[0], be.nodes[1], be.facet).unwrap();
    }
    writeln!(s, "end").unwrap();
    s
}

pub fn mesh_from_str(text: &str) -> Result<(TriangleMesh, LoadReport)> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, MESH_HEADER)?;
    let n = lines.keyword_count("nodes")?;
    let mut nodes: Vec<Point> = Vec::with_capacity(n);
    for _ in 0..n {
        let (line, t) = lines.next_line()?;
        nodes.push(parse_row::<f64, 2>(t, line)?);
    }
    let nt = lines.keyword_count("triangles")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, t) = lines.next_line()?;
        let tri = parse_row::<usize, 3>(t, line)?;
        if let Some(&v) = tri.iter().find(|&&v| v >= n) {
            return Err(Error::Parse {
                line,
                msg: format!("node index {v} out of range"),
            });
        }
        triangles.push(tri);
    }
    let nb = lines.keyword_count("boundary_edges")?;
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let (line, t) = lines.next_line()?;
        let [a, b, facet] = parse_row::<usize, 3>(t, line)?;
        boundary.push(BoundaryEdge {
            nodes: [a, b],
            facet,
        });
    }
    let (line, t) = lines.next_line()?;
    if t != "end" {
        return Err(Error::Parse {
            line,
            msg: format!("expected `end`, found `{t}`"),
        });
    }
    let flipped = repair_orientation(&nodes, &mut triangles)?;
    if flipped > 0 {
        log::warn!("repaired orientation of {flipped} clockwise triangles");
    }
    let mesh = TriangleMesh::with_boundary(nodes, triangles, &boundary)?;
    Ok((
        mesh,
        LoadReport {
            flipped_triangles: flipped,
        },
    ))
}

pub fn field_to_string(name: &str, field: &NodalField) -> String {
    let mut s = String::new();
    writeln!(s, "{FIELD_HEADER}").unwrap();
    writeln!(s, "name {name}").unwrap();
    writeln!(
        s,
        "nodes {} components {}",
        field.n_nodes(),
        field.components()
    )
    .unwrap();
    for row in field.values().chunks(field.components()) {
        let parts: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(s, "{}", parts.join(" ")).unwrap();
    }
    writeln!(s, "end").unwrap();
    s
}

pub fn field_from_str(text: &str) -> Result<(String, NodalField)> {
    let mut lines = Lines::new(text);
    check_header(&mut lines, FIELD_HEADER)?;
    let (line, t) = lines.next_line()?;
    let name = t
        .strip_prefix("name")
        .map(|s| s.trim().to_string())
        .ok_or(Error::Parse {
            line,
            msg: "expected `name <name>`".into(),
        })?;
    let (line, t) = lines.next_line()?;
    let tok: Vec<&str> = t.split_whitespace().collect();
    if tok.len() != 4 || tok[0] != "nodes" || tok[2] != "components" {
        return Err(Error::Parse {
            line,
            msg: "expected `nodes <N> components <C>`".into(),
        });
    }
    let n: usize = parse_tok(Some(tok[1]), line)?;
    let c: usize = parse_tok(Some(tok[3]), line)?;
    if c == 0 || c > 2 {
        return Err(Error::Parse {
            line,
            msg: format!("unsupported component count {c}"),
        });
    }
    let mut values = Vec::with_capacity(n * c);
    for _ in 0..n {
        let (line, t) = lines.next_line()?;
        let row: Vec<&str> = t.split_whitespace().collect();
        if row.len() != c {
            return Err(Error::Parse {
                line,
                msg: format!("expected {c} values"),
            });
        }
        for tok in row {
            values.push(parse_tok::<f64>(Some(tok), line)?);
        }
    }
    let (line, t) = lines.next_line()?;
    if t != "end" {
        return Err(Error::Parse {
            line,
            msg: format!("expected `end`, found `{t}`"),
        });
    }
    Ok((name, NodalField::new(c, values)?))
}

pub fn write_mesh(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    let path = path.as_ref();
    if path.extension().is_some_and(|e| e == "vtk") {
        return write_vtk(path, mesh, &[]);
    }
    fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<(TriangleMesh, LoadReport)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "vtk") {
        let (mesh, _, report) = vtk_from_str(&text)?;
        return Ok((mesh, report));
    }
    mesh_from_str(&text)
}

pub fn write_field(path: impl AsRef<Path>, name: &str, field: &NodalField) -> Result<()> {
    fs::write(path, field_to_string(name, field))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<(String, NodalField)> {
    field_from_str(&fs::read_to_string(path)?)
}

pub fn vtk_to_string(mesh: &TriangleMesh, fields: &[(&str, &NodalField)]) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "# vtk DataFile Version 3.0").unwrap();
    writeln!(s, "morphopt").unwrap();
    writeln!(s, "ASCII").unwrap();
    writeln!(s, "DATASET UNSTRUCTURED_GRID").unwrap();
    writeln!(s, "POINTS {} double", mesh.n_nodes()).unwrap();
    for p in mesh.nodes() {
        writeln!(s, "{} {} 0", fmt_f64(p[0]), fmt_f64(p[1])).unwrap();
    }
    let nt = mesh.n_triangles();
    writeln!(s, "CELLS {nt} {}", 4 * nt).unwrap();
    for t in mesh.triangles() {
        writeln!(s, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(s, "CELL_TYPES {nt}").unwrap();
    for _ in 0..nt {
        writeln!(s, "5").unwrap();
    }
    if !fields.is_empty() {
        writeln!(s, "POINT_DATA {}", mesh.n_nodes()).unwrap();
    }
    for (name, f) in fields {
        mesh.check_field(f, f.components())?;
        if f.components() == 1 {
            writeln!(s, "SCALARS {name} double 1").unwrap();
            writeln!(s, "LOOKUP_TABLE default").unwrap();
            for v in f.values() {
                writeln!(s, "{}", fmt_f64(*v)).unwrap();
            }
        } else {
            writeln!(s, "VECTORS {name} double").unwrap();
            for v in f.values().chunks(2) {
                writeln!(s, "{} {} 0", fmt_f64(v[0]), fmt_f64(v[1])).unwrap();
            }
        }
    }
    Ok(s)
}

pub fn write_vtk(
    path: impl AsRef<Path>,
    mesh: &TriangleMesh,
    fields: &[(&str, &NodalField)],
) -> Result<()> {
    fs::write(path, vtk_to_string(mesh, fields)?)?;
    Ok(())
}

/// Token stream over a VTK file, tracking line numbers.
struct Tokens<'a> {
    toks: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn next(&mut self) -> Result<(usize, &'a str)> {
        let t = self.toks.get(self.pos).copied().ok_or(Error::Parse {
            line: self.toks.last().map_or(1, |t| t.0 + 1),
            msg: "unexpected end of file".into(),
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn parse<T: std::str::FromStr>(&mut self) -> Result<T> {
        let (line, t) = self.next()?;
        parse_tok(Some(t), line)
    }

    fn expect(&mut self, word: &str) -> Result<()> {
        let (line, t) = self.next()?;
        if !t.eq_ignore_ascii_case(word) {
            return Err(Error::Parse {
                line,
                msg: format!("expected `{word}`, found `{t}`"),
            });
        }
        Ok(())
    }
}

pub fn vtk_from_str(text: &str) -> Result<(TriangleMesh, Vec<(String, NodalField)>, LoadReport)> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    if !first.starts_with("# vtk DataFile") {
        return Err(Error::Parse {
            line: 1,
            msg: "missing `# vtk DataFile` header".into(),
        });
    }
    lines.next(); // title
    let toks: Vec<(usize, &str)> = lines
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)))
        .collect();
    let mut tk = Tokens { toks, pos: 0 };
    tk.expect("ASCII")?;
    tk.expect("DATASET")?;
    tk.expect("UNSTRUCTURED_GRID")?;
    tk.expect("POINTS")?;
    let n: usize = tk.parse()?;
    tk.next()?; // data type
    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let x: f64 = tk.parse()?;
        let y: f64 = tk.parse()?;
        let _z: f64 = tk.parse()?;
        nodes.push([x, y]);
    }
    tk.expect("CELLS")?;
    let nc: usize = tk.parse()?;
    let _size: usize = tk.parse()?;
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let (line, k) = tk.next()?;
        let k: usize = parse_tok(Some(k), line)?;
        let ids: Vec<usize> = (0..k).map(|_| tk.parse()).collect::<Result<_>>()?;
        cells.push((line, ids));
    }
    tk.expect("CELL_TYPES")?;
    let _: usize = tk.parse()?;
    let mut triangles = Vec::with_capacity(nc);
    for (line, ids) in cells {
        let ty: u32 = tk.parse()?;
        if ty != 5 || ids.len() != 3 {
            return Err(Error::Parse {
                line,
                msg: format!("only triangles (cell type 5) are supported, found type {ty}"),
            });
        }
        if let Some(&v) = ids.iter().find(|&&v| v >= n) {
            return Err(Error::Parse {
                line,
                msg: format!("node index {v} out of range"),
            });
        }
        triangles.push([ids[0], ids[1], ids[2]]);
    }
    let mut fields = Vec::new();
    while tk.pos < tk.toks.len() {
        let (line, kw) = tk.next()?;
        match kw.to_ascii_uppercase().as_str() {
            "POINT_DATA" => {
                let _: usize = tk.parse()?;
            }
            "SCALARS" => {
                let (_, name) = tk.next()?;
                tk.next()?; // type
                            // optional component count before LOOKUP_TABLE
                let (l2, t) = tk.next()?;
                if !t.eq_ignore_ascii_case("LOOKUP_TABLE") {
                    let nc: usize = parse_tok(Some(t), l2)?;
                    if nc != 1 {
                        return Err(Error::Parse {
                            line: l2,
                            msg: "only 1-component scalars are supported".into(),
                        });
                    }
                    tk.expect("LOOKUP_TABLE")?;
                }
                tk.next()?; // table name
                let vals = (0..n).map(|_| tk.parse()).collect::<Result<Vec<f64>>>()?;
                fields.push((name.to_string(), NodalField::new(1, vals)?));
            }
            "VECTORS" => {
                let (_, name) = tk.next()?;
                tk.next()?;
                let mut vals = Vec::with_capacity(2 * n);
                for _ in 0..n {
                    vals.push(tk.parse()?);
                    vals.push(tk.parse()?);
                    let _z: f64 = tk.parse()?;
                }
                fields.push((name.to_string(), NodalField::new(2, vals)?));
            }
            other => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unsupported section `{other}`"),
                })
            }
        }
    }
    let flipped = repair_orientation(&nodes, &mut triangles)?;
    if flipped > 0 {
        log::warn!("repaired orientation of {flipped} clockwise triangles");
    }
    let mesh = TriangleMesh::new(nodes, triangles)?;
    Ok((
        mesh,
        fields,
        LoadReport {
            flipped_triangles: flipped,
        },
    ))
}

//! Legacy ASCII VTK unstructured-grid writer and a matching reader.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Mesh;

#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Scalar(Vec<f64>),
    Vector(Vec<[f64; 2]>),
}

impl Field {
    fn len(&self) -> usize {
        match self {
            Field::Scalar(v) => v.len(),
            Field::Vector(v) => v.len(),
        }
    }

    /// Vector field from raw interleaved dofs.
    pub fn from_interleaved(raw: &[f64]) -> Field {
        Field::Vector(raw.chunks(2).map(|c| [c[0], c[1]]).collect())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<Vec<usize>>,
    pub point_data: Vec<(String, Field)>,
    pub cell_data: Vec<(String, Field)>,
}

impl VtkData {
    pub fn from_mesh(mesh: &Mesh) -> VtkData {
        let mut d = VtkData {
            points: mesh.coords.clone(),
            cells: mesh.elements.clone(),
            ..Default::default()
        };
        d.cell_data
            .push(("region".into(), Field::Scalar(mesh.regions.iter().map(|&r| r as f64).collect())));
        d
    }

    pub fn point(mut self, name: &str, f: Field) -> VtkData {
        self.point_data.push((name.into(), f));
        self
    }

    pub fn cell(mut self, name: &str, f: Field) -> VtkData {
        self.cell_data.push((name.into(), f));
        self
    }

    pub fn to_string(&self, title: &str) -> Result<String> {
        let mut s = String::new();
        let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
        let _ = writeln!(s, "POINTS {} double", self.points.len());
        for p in &self.points {
            let _ = writeln!(s, "{:e} {:e} 0", p[0], p[1]);
        }
        let size: usize = self.cells.iter().map(|c| c.len() + 1).sum();
        let _ = writeln!(s, "CELLS {} {}", self.cells.len(), size);
        for c in &self.cells {
            let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "{} {}", c.len(), ids.join(" "));
        }
        let _ = writeln!(s, "CELL_TYPES {}", self.cells.len());
        for c in &self.cells {
            let _ = writeln!(s, "{}", if c.len() == 3 { 5 } else { 9 });
        }
        let mut section = |kind: &str, n: usize, data: &[(String, Field)]| -> Result<()> {
            if data.is_empty() {
                return Ok(());
            }
            let _ = writeln!(s, "{kind} {n}");
            for (name, f) in data {
                if f.len() != n {
                    return Err(Error::Format(format!("field '{name}' has {} values for {n} entities", f.len())));
                }
                match f {
                    Field::Scalar(v) => {
                        let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                        for x in v {
                            let _ = writeln!(s, "{x:e}");
                        }
                    }
                    Field::Vector(v) => {
                        let _ = writeln!(s, "VECTORS {name} double");
                        for x in v {
                            let _ = writeln!(s, "{:e} {:e} 0", x[0], x[1]);
                        }
                    }
                }
            }
            Ok(())
        };
        section("POINT_DATA", self.points.len(), &self.point_data)?;
        section("CELL_DATA", self.cells.len(), &self.cell_data)?;
        Ok(s)
    }

    pub fn write(&self, path: &Path, title: &str) -> Result<()> {
        std::fs::write(path, self.to_string(title)?)?;
        Ok(())
    }

    pub fn parse(text: &str) -> Result<VtkData> {
        let bad = |m: &str| Error::Format(format!("VTK: {m}"));
        let mut tok = text.lines().skip(4).flat_map(|l| l.split_whitespace());
        let mut next = || tok.next().ok_or_else(|| bad("unexpected end of file"));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(&format!("bad number '{s}'")));
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("bad integer '{s}'")));
        let mut d = VtkData::default();
        if next()? != "POINTS" {
            return Err(bad("expected POINTS"));
        }
        let np = int(next()?)?;
        next()?;
        for _ in 0..np {
            let (x, y) = (num(next()?)?, num(next()?)?);
            next()?;
            d.points.push([x, y]);
        }
        if next()? != "CELLS" {
            return Err(bad("expected CELLS"));
        }
        let nc = int(next()?)?;
        next()?;
        for _ in 0..nc {
            let k = int(next()?)?;
            let c = (0..k).map(|_| next().and_then(int)).collect::<Result<Vec<_>>>()?;
            d.cells.push(c);
        }
        if next()? != "CELL_TYPES" {
            return Err(bad("expected CELL_TYPES"));
        }
        let nt = int(next()?)?;
        for _ in 0..nt {
            next()?;
        }
        let mut target: Option<(bool, usize)> = None;
        while let Ok(t) = next() {
            match t {
                "POINT_DATA" => target = Some((true, int(next()?)?)),
                "CELL_DATA" => target = Some((false, int(next()?)?)),
                "SCALARS" | "VECTORS" => {
                    let (is_point, n) = target.ok_or_else(|| bad("data before section header"))?;
                    let name = next()?.to_string();
                    next()?;
                    let f = if t == "SCALARS" {
                        next()?;
                        next()?;
                        next()?;
                        Field::Scalar((0..n).map(|_| next().and_then(num)).collect::<Result<_>>()?)
                    } else {
                        let mut v = Vec::with_capacity(n);
                        for _ in 0..n {
                            let (x, y) = (num(next()?)?, num(next()?)?);
                            next()?;
                            v.push([x, y]);
                        }
                        Field::Vector(v)
                    };
                    if is_point {
                        d.point_data.push((name, f));
                    } else {
                        d.cell_data.push((name, f));
                    }
                }
                other => return Err(bad(&format!("unexpected token '{other}'"))),
            }
        }
        Ok(d)
    }

    pub fn read(path: &Path) -> Result<VtkData> {
        VtkData::parse(&std::fs::read_to_string(path)?)
    }
}

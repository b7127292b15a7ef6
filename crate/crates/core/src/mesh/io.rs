use std::io::{BufRead, Write};
use std::path::Path;

use super::{Mesh, MeshError, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            _ => None,
        }
    }
}

pub fn load_mesh<R: BufRead>(source: R, format: MeshFormat) -> Result<Mesh, MeshError> {
    let (vertices, faces, face_lines) = match format {
        MeshFormat::Off => parse_off(source)?,
        MeshFormat::Obj => parse_obj(source)?,
    };
    Mesh::new(vertices, faces).map_err(|e| e.with_line(&face_lines))
}

pub fn load_mesh_file(path: &Path) -> Result<Mesh, MeshError> {
    let format = MeshFormat::from_path(path).ok_or_else(|| MeshError::Parse {
        line: 0,
        msg: format!("cannot infer mesh format from {}", path.display()),
    })?;
    let file = std::fs::File::open(path)?;
    load_mesh(std::io::BufReader::new(file), format)
}

pub fn write_off<W: Write>(mesh: &Mesh, mut out: W) -> std::io::Result<()> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", mesh.vertex_count(), mesh.face_count())?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

type Parsed = (Vec<Vec3>, Vec<[usize; 3]>, Vec<usize>);

/// Non-empty, comment-stripped lines with 1-based line numbers.
fn content_lines<R: BufRead>(
    source: R,
) -> impl Iterator<Item = Result<(usize, String), MeshError>> {
    source
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(MeshError::Io(e))),
            Ok(l) => {
                let body = l.split('#').next().unwrap_or("").trim().to_string();
                (!body.is_empty()).then_some(Ok((i + 1, body)))
            }
        })
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, MeshError> {
    tok.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("invalid {what} {tok:?}"),
    })
}

fn parse_off<R: BufRead>(source: R) -> Result<Parsed, MeshError> {
    let mut lines = content_lines(source);
    let (hline, header) = lines.next().transpose()?.ok_or(MeshError::Parse {
        line: 1,
        msg: "empty file, expected OFF header".into(),
    })?;
    let mut toks: Vec<String> = header.split_whitespace().map(str::to_string).collect();
    if toks.first().map(String::as_str) != Some("OFF") {
        return Err(MeshError::Parse {
            line: hline,
            msg: format!("expected OFF header, found {:?}", toks.first().cloned().unwrap_or_default()),
        });
    }
    toks.remove(0);
    // Counts may share the header line ("OFF 8 12 0").
    let (cline, counts) = if toks.is_empty() {
        let (l, c) = lines.next().transpose()?.ok_or(MeshError::Parse {
            line: hline + 1,
            msg: "missing vertex/face counts".into(),
        })?;
        (l, c.split_whitespace().map(str::to_string).collect::<Vec<_>>())
    } else {
        (hline, toks)
    };
    if counts.len() < 2 {
        return Err(MeshError::Parse {
            line: cline,
            msg: "counts line must hold vertex and face counts".into(),
        });
    }
    let nv: usize = parse_num(&counts[0], cline, "vertex count")?;
    let nf: usize = parse_num(&counts[1], cline, "face count")?;

    let mut vertices = Vec::with_capacity(nv);
    let mut last_line = cline;
    for i in 0..nv {
        let (l, body) = lines.next().transpose()?.ok_or_else(|| MeshError::Parse {
            line: last_line + 1,
            msg: format!("header declares {nv} vertices but the file ends after {i}"),
        })?;
        last_line = l;
        let t: Vec<&str> = body.split_whitespace().collect();
        if t.len() < 3 {
            return Err(MeshError::Parse {
                line: l,
                msg: format!("vertex needs 3 coordinates, found {}", t.len()),
            });
        }
        vertices.push(Vec3::new(
            parse_num(t[0], l, "coordinate")?,
            parse_num(t[1], l, "coordinate")?,
            parse_num(t[2], l, "coordinate")?,
        ));
    }

    let mut faces = Vec::with_capacity(nf);
    let mut face_lines = Vec::with_capacity(nf);
    for i in 0..nf {
        let (l, body) = lines.next().transpose()?.ok_or_else(|| MeshError::Parse {
            line: last_line + 1,
            msg: format!("header declares {nf} faces but the file lists only {i}"),
        })?;
        last_line = l;
        let t: Vec<&str> = body.split_whitespace().collect();
        let count: usize = parse_num(t[0], l, "face vertex count")?;
        if count != 3 {
            return Err(MeshError::NonTriangle { line: l, count });
        }
        if t.len() < 4 {
            return Err(MeshError::Parse {
                line: l,
                msg: format!("face lists {} of 3 indices", t.len() - 1),
            });
        }
        let mut tri = [0usize; 3];
        for k in 0..3 {
            let idx: i64 = parse_num(t[k + 1], l, "vertex index")?;
            if idx < 0 || idx as usize >= nv {
                return Err(MeshError::IndexOutOfRange {
                    face: i,
                    index: idx,
                    count: nv,
                    line: Some(l),
                });
            }
            tri[k] = idx as usize;
        }
        faces.push(tri);
        face_lines.push(l);
    }
    Ok((vertices, faces, face_lines))
}

fn parse_obj<R: BufRead>(source: R) -> Result<Parsed, MeshError> {
    let mut vertices = Vec::new();
    let mut raw_faces: Vec<([i64; 3], usize)> = Vec::new();
    for item in content_lines(source) {
        let (l, body) = item?;
        let mut t = body.split_whitespace();
        match t.next() {
            Some("v") => {
                let c: Vec<&str> = t.collect();
                if c.len() < 3 {
                    return Err(MeshError::Parse {
                        line: l,
                        msg: format!("vertex needs 3 coordinates, found {}", c.len()),
                    });
                }
                vertices.push(Vec3::new(
                    parse_num(c[0], l, "coordinate")?,
                    parse_num(c[1], l, "coordinate")?,
                    parse_num(c[2], l, "coordinate")?,
                ));
            }
            Some("f") => {
                let refs: Vec<&str> = t.collect();
                if refs.len() != 3 {
                    return Err(MeshError::NonTriangle {
                        line: l,
                        count: refs.len(),
                    });
                }
                let mut tri = [0i64; 3];
                for (k, r) in refs.iter().enumerate() {
                    // "v", "v/vt", "v//vn", "v/vt/vn": only the position index matters.
                    let idx: i64 = parse_num(r.split('/').next().unwrap_or(""), l, "vertex index")?;
                    if idx <= 0 {
                        return Err(MeshError::Parse {
                            line: l,
                            msg: format!("vertex index {idx} unsupported (OBJ indices are 1-based, negative indices are not accepted)"),
                        });
                    }
                    tri[k] = idx;
                }
                raw_faces.push((tri, l));
            }
            _ => {}
        }
    }
    let nv = vertices.len();
    let mut faces = Vec::with_capacity(raw_faces.len());
    let mut face_lines = Vec::with_capacity(raw_faces.len());
    for (i, (tri, l)) in raw_faces.into_iter().enumerate() {
        let mut out = [0usize; 3];
        for k in 0..3 {
            let idx = tri[k] - 1;
            if idx as usize >= nv {
                return Err(MeshError::IndexOutOfRange {
                    face: i,
                    index: tri[k],
                    count: nv,
                    line: Some(l),
                });
            }
            out[k] = idx as usize;
        }
        faces.push(out);
        face_lines.push(l);
    }
    Ok((vertices, faces, face_lines))
}

//! Indexed triangle meshes, OFF/OBJ loading and the face-adjacency dual graph.

mod dual;
mod io;
pub mod shapes;

use std::collections::HashMap;

use thiserror::Error;

pub use dual::{face_neighborhood, DualEdge, DualGraph};
pub use io::{load_mesh, load_mesh_file, write_off, MeshFormat};

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: face has {count} vertices, only triangles are supported")]
    NonTriangle { line: usize, count: usize },
    #[error("{}face {face} is degenerate (zero area)", at_line(*.line))]
    DegenerateFace { face: usize, line: Option<usize> },
    #[error("{}face {face} references vertex {index}, but the mesh has {count} vertices", at_line(*.line))]
    IndexOutOfRange {
        face: usize,
        index: i64,
        count: usize,
        line: Option<usize>,
    },
    #[error("{}face {face} repeats a vertex index", at_line(*.line))]
    RepeatedVertex { face: usize, line: Option<usize> },
    #[error("vertex {vertex} has a non-finite coordinate")]
    NonFinite { vertex: usize },
    #[error("non-manifold edge ({a}, {b}) is shared by {count} faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("vertex count changed from {expected} to {got}")]
    VertexCountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl MeshError {
    fn with_line(self, lines: &[usize]) -> Self {
        match self {
            MeshError::DegenerateFace { face, .. } => MeshError::DegenerateFace {
                face,
                line: lines.get(face).copied(),
            },
            MeshError::IndexOutOfRange {
                face, index, count, ..
            } => MeshError::IndexOutOfRange {
                face,
                index,
                count,
                line: lines.get(face).copied(),
            },
            MeshError::RepeatedVertex { face, .. } => MeshError::RepeatedVertex {
                face,
                line: lines.get(face).copied(),
            },
            other => other,
        }
    }
}

/// An indexed triangle mesh with derived per-face geometry.
///
/// Immutable once built; positions can only change by building a new mesh
/// with [`Mesh::with_positions`], which keeps the face list.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    face_areas: Vec<f64>,
    face_centroids: Vec<Vec3>,
    face_normals: Vec<Vec3>,
    vertex_faces: Vec<Vec<usize>>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let n = vertices.len();
        for (i, v) in vertices.iter().enumerate() {
            if !v.iter().all(|c| c.is_finite()) {
                return Err(MeshError::NonFinite { vertex: i });
            }
        }
        let mut vertex_faces = vec![Vec::new(); n];
        for (f, tri) in faces.iter().enumerate() {
            for &i in tri {
                if i >= n {
                    return Err(MeshError::IndexOutOfRange {
                        face: f,
                        index: i as i64,
                        count: n,
                        line: None,
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedVertex { face: f, line: None });
            }
            for &i in tri {
                vertex_faces[i].push(f);
            }
        }
        let mut mesh = Mesh {
            vertices,
            faces,
            face_areas: Vec::new(),
            face_centroids: Vec::new(),
            face_normals: Vec::new(),
            vertex_faces,
        };
        mesh.compute_face_geometry()?;
        Ok(mesh)
    }

    fn compute_face_geometry(&mut self) -> Result<(), MeshError> {
        let m = self.faces.len();
        self.face_areas = Vec::with_capacity(m);
        self.face_centroids = Vec::with_capacity(m);
        self.face_normals = Vec::with_capacity(m);
        for (f, &[a, b, c]) in self.faces.iter().enumerate() {
            let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
            let cross = (pb - pa).cross(&(pc - pa));
            let norm = cross.norm();
            let area = 0.5 * norm;
            // Relative threshold: area is compared to the squared longest edge.
            let scale = (pb - pa)
                .norm_squared()
                .max((pc - pa).norm_squared())
                .max((pc - pb).norm_squared());
            if !(area > 1e-14 * scale) || area <= 0.0 {
                return Err(MeshError::DegenerateFace { face: f, line: None });
            }
            self.face_areas.push(area);
            self.face_centroids.push((pa + pb + pc) / 3.0);
            self.face_normals.push(cross / norm);
        }
        Ok(())
    }

    /// Same connectivity, new vertex positions.
    pub fn with_positions(&self, vertices: Vec<Vec3>) -> Result<Self, MeshError> {
        if vertices.len() != self.vertices.len() {
            return Err(MeshError::VertexCountMismatch {
                expected: self.vertices.len(),
                got: vertices.len(),
            });
        }
        if let Some(i) = vertices.iter().position(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(MeshError::NonFinite { vertex: i });
        }
        let mut mesh = Mesh {
            vertices,
            faces: self.faces.clone(),
            face_areas: Vec::new(),
            face_centroids: Vec::new(),
            face_normals: Vec::new(),
            vertex_faces: self.vertex_faces.clone(),
        };
        mesh.compute_face_geometry()?;
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face_areas(&self) -> &[f64] {
        &self.face_areas
    }

    pub fn face_centroids(&self) -> &[Vec3] {
        &self.face_centroids
    }

    pub fn face_normals(&self) -> &[Vec3] {
        &self.face_normals
    }

    /// Faces incident to each vertex (F_v), in ascending face order.
    pub fn vertex_faces(&self) -> &[Vec<usize>] {
        &self.vertex_faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn surface_area(&self) -> f64 {
        self.face_areas.iter().sum()
    }

    /// Barycentric vertex areas: one third of the incident face areas.
    pub fn barycentric_areas(&self) -> Vec<f64> {
        self.vertex_faces
            .iter()
            .map(|fs| fs.iter().map(|&f| self.face_areas[f]).sum::<f64>() / 3.0)
            .collect()
    }

    /// Signed enclosed volume via the divergence theorem; positive for a
    /// closed mesh with outward (counter-clockwise) orientation.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0
            })
            .sum()
    }

    pub fn bbox_diagonal(&self) -> f64 {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        if self.vertices.is_empty() {
            0.0
        } else {
            (hi - lo).norm()
        }
    }

    /// Undirected mesh edges in first-seen order, each with its incident faces.
    pub fn edges(&self) -> Vec<([usize; 2], Vec<usize>)> {
        let mut index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<([usize; 2], Vec<usize>)> = Vec::new();
        for (f, tri) in self.faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = [a.min(b), a.max(b)];
                let slot = *index.entry(key).or_insert_with(|| {
                    edges.push((key, Vec::new()));
                    edges.len() - 1
                });
                edges[slot].1.push(f);
            }
        }
        edges
    }

    /// Vertex one-rings: sorted, de-duplicated neighbor lists.
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for &[a, b, c] in &self.faces {
            nbrs[a].extend([b, c]);
            nbrs[b].extend([a, c]);
            nbrs[c].extend([a, b]);
        }
        for n in &mut nbrs {
            n.sort_unstable();
            n.dedup();
        }
        nbrs
    }

    /// Vertices lying on an edge with exactly one incident face.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for (key, fs) in self.edges() {
            if fs.len() == 1 {
                flags[key[0]] = true;
                flags[key[1]] = true;
            }
        }
        flags
    }

    /// Euler characteristic V − E + F over referenced vertices.
    pub fn euler_characteristic(&self) -> i64 {
        let v = self.vertex_faces.iter().filter(|f| !f.is_empty()).count() as i64;
        v - self.edges().len() as i64 + self.faces.len() as i64
    }

    /// Connected components over vertices (via shared faces); returns a
    /// component id per vertex and the component count.
    pub fn vertex_components(&self) -> (Vec<usize>, usize) {
        let n = self.vertices.len();
        let mut comp = vec![usize::MAX; n];
        let nbrs = self.vertex_neighbors();
        let mut count = 0;
        let mut stack = Vec::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            stack.push(s);
            while let Some(v) = stack.pop() {
                for &w in &nbrs[v] {
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }
}

//! Per-face colored PLY export for inspecting segmentations.

use std::io::Write;

use crate::mesh::Mesh;

/// Fixed label palette; label `i` gets `PALETTE[i % 22]`.
pub const PALETTE: [[u8; 3]; 22] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
    [170, 255, 195],
    [128, 128, 0],
    [255, 215, 180],
    [0, 0, 128],
    [128, 128, 128],
    [255, 255, 255],
    [0, 0, 0],
];

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("{labels} labels for a mesh with {faces} faces")]
    LabelCount { labels: usize, faces: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn label_color(label: usize) -> [u8; 3] {
    PALETTE[label % PALETTE.len()]
}

/// ASCII PLY with per-face `uchar` RGB. Labels beyond the palette wrap
/// around with a warning.
pub fn write_colored_ply<W: Write>(mesh: &Mesh, labels: &[usize], mut out: W) -> Result<(), ExportError> {
    if labels.len() != mesh.face_count() {
        return Err(ExportError::LabelCount {
            labels: labels.len(),
            faces: mesh.face_count(),
        });
    }
    if let Some(max) = labels.iter().max().filter(|&&m| m >= PALETTE.len()) {
        log::warn!(
            "label {max} exceeds the {}-color palette; colors repeat",
            PALETTE.len()
        );
    }
    writeln!(out, "ply")?;
    writeln!(out, "format ascii 1.0")?;
    writeln!(out, "element vertex {}", mesh.vertex_count())?;
    writeln!(out, "property double x")?;
    writeln!(out, "property double y")?;
    writeln!(out, "property double z")?;
    writeln!(out, "element face {}", mesh.face_count())?;
    writeln!(out, "property list uchar int vertex_indices")?;
    writeln!(out, "property uchar red")?;
    writeln!(out, "property uchar green")?;
    writeln!(out, "property uchar blue")?;
    writeln!(out, "end_header")?;
    for v in mesh.vertices() {
        writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
    }
    for (f, &l) in mesh.faces().iter().zip(labels) {
        let [r, g, b] = label_color(l);
        writeln!(out, "3 {} {} {} {r} {g} {b}", f[0], f[1], f[2])?;
    }
    Ok(())
}

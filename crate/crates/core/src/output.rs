//! File artifacts: CSV tables, legacy VTK snapshots, JSON summaries and a
//! manifest with a SHA-256 digest per file.
//!
//! Floating-point columns use 17 significant digits so every value reads
//! back bit-identically.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dynamics::Observables;
use crate::error::{Error, Result};
use crate::field::{Field, RealField};
use crate::fv::LaplacianOperator;
use crate::mesh::RingMesh;
use crate::spectral::{AnnulusEigenpair, ModeCoefficients};
use crate::vortex::VortexRecord;

/// Round-trip-safe float text.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

pub fn mesh_vertices_csv(mesh: &RingMesh) -> Result<Vec<u8>> {
    csv_bytes(
        &["id", "x", "y"],
        mesh.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| vec![i.to_string(), fmt_f64(v.x), fmt_f64(v.y)]),
    )
}

pub fn mesh_triangles_csv(mesh: &RingMesh) -> Result<Vec<u8>> {
    csv_bytes(
        &["id", "v0", "v1", "v2", "cx", "cy", "area"],
        mesh.triangles.iter().enumerate().map(|(k, t)| {
            let c = mesh.circumcenters[k];
            vec![
                k.to_string(),
                t[0].to_string(),
                t[1].to_string(),
                t[2].to_string(),
                fmt_f64(c.x),
                fmt_f64(c.y),
                fmt_f64(mesh.areas[k]),
            ]
        }),
    )
}

/// `outer = -1` marks boundary edges; `(nx, ny)` points out of `inner`.
pub fn mesh_edges_csv(mesh: &RingMesh) -> Result<Vec<u8>> {
    csv_bytes(
        &["id", "a", "b", "inner", "outer", "length", "distance", "nx", "ny"],
        mesh.edges.iter().enumerate().map(|(i, e)| {
            vec![
                i.to_string(),
                e.vertices[0].to_string(),
                e.vertices[1].to_string(),
                e.inner.to_string(),
                e.outer.map_or("-1".to_string(), |l| l.to_string()),
                fmt_f64(e.length),
                fmt_f64(e.distance),
                fmt_f64(e.normal.x),
                fmt_f64(e.normal.y),
            ]
        }),
    )
}

pub fn field_csv(mesh: &RingMesh, u: &Field) -> Result<Vec<u8>> {
    u.check_mesh(mesh)?;
    csv_bytes(
        &["id", "x", "y", "re", "im"],
        u.values.iter().enumerate().map(|(k, z)| {
            let c = mesh.circumcenters[k];
            vec![k.to_string(), fmt_f64(c.x), fmt_f64(c.y), fmt_f64(z.re), fmt_f64(z.im)]
        }),
    )
}

/// Read a field written by [`field_csv`] back onto `mesh`.
pub fn read_field_csv(mesh: &RingMesh, bytes: &[u8]) -> Result<Field> {
    let mut r = csv::Reader::from_reader(bytes);
    let bad = |line: usize, message: String| Error::Config { line, message };
    let mut values = vec![None; mesh.n_triangles()];
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        if rec.len() != 5 {
            return Err(bad(line, format!("expected 5 columns, got {}", rec.len())));
        }
        let id: usize = rec[0].parse().map_err(|_| bad(line, format!("bad id `{}`", &rec[0])))?;
        let num = |j: usize| rec[j].parse::<f64>().map_err(|_| bad(line, format!("bad number `{}`", &rec[j])));
        let slot = values
            .get_mut(id)
            .ok_or_else(|| bad(line, format!("triangle {id} is outside the mesh")))?;
        *slot = Some(Complex64::new(num(3)?, num(4)?));
    }
    let values: Option<Vec<Complex64>> = values.into_iter().collect();
    let values = values.ok_or_else(|| bad(0, "field file does not cover every triangle".to_string()))?;
    Field::from_values(mesh, values)
}

pub fn real_field_csv(mesh: &RingMesh, u: &RealField, name: &str) -> Result<Vec<u8>> {
    u.check_mesh(mesh)?;
    csv_bytes(
        &["id", "x", "y", name],
        u.values.iter().enumerate().map(|(k, v)| {
            let c = mesh.circumcenters[k];
            vec![k.to_string(), fmt_f64(c.x), fmt_f64(c.y), fmt_f64(*v)]
        }),
    )
}

/// Empty `err_gs` cells when no reference was supplied.
pub fn observables_csv(obs: &[Observables]) -> Result<Vec<u8>> {
    csv_bytes(
        &["t", "mass", "energy", "err_gs"],
        obs.iter().map(|o| {
            vec![
                fmt_f64(o.t),
                fmt_f64(o.mass),
                fmt_f64(o.energy),
                o.err_gs.map(fmt_f64).unwrap_or_default(),
            ]
        }),
    )
}

pub fn vortices_csv(rows: &[(f64, VortexRecord)]) -> Result<Vec<u8>> {
    csv_bytes(
        &["t", "method", "triangle", "x", "y", "index", "lambda", "extremum", "reliable"],
        rows.iter().map(|(t, r)| {
            vec![
                fmt_f64(*t),
                r.method.to_string(),
                r.triangle.to_string(),
                fmt_f64(r.position.x),
                fmt_f64(r.position.y),
                r.index.to_string(),
                r.lambda.to_string(),
                fmt_f64(r.extremum),
                r.reliable.to_string(),
            ]
        }),
    )
}

pub fn modes_csv(rows: &[(f64, ModeCoefficients)]) -> Result<Vec<u8>> {
    csv_bytes(
        &["t", "p", "ell", "re", "im", "abs2"],
        rows.iter().flat_map(|(t, c)| {
            c.rows()
                .map(|(p, ell, z): (usize, i32, Complex64)| {
                    vec![
                        fmt_f64(*t),
                        p.to_string(),
                        ell.to_string(),
                        fmt_f64(z.re),
                        fmt_f64(z.im),
                        fmt_f64(z.norm_sqr()),
                    ]
                })
                .collect::<Vec<_>>()
        }),
    )
}

/// Radial eigenvalues in mode-basis order.
pub fn mode_eigenvalues_csv(p_max: usize, l_max: usize, eigenvalues: &[f64]) -> Result<Vec<u8>> {
    let width = 2 * l_max + 1;
    assert_eq!(eigenvalues.len(), (p_max + 1) * width);
    csv_bytes(
        &["p", "ell", "lambda"],
        eigenvalues.iter().enumerate().map(|(i, lam)| {
            vec![
                (i / width).to_string(),
                ((i % width) as i64 - l_max as i64).to_string(),
                fmt_f64(*lam),
            ]
        }),
    )
}

pub fn annulus_eigenpairs_csv(pairs: &[AnnulusEigenpair]) -> Result<Vec<u8>> {
    csv_bytes(
        &["alpha", "beta", "lambda", "c"],
        pairs
            .iter()
            .map(|p| vec![p.alpha.to_string(), p.beta.to_string(), fmt_f64(p.lambda), fmt_f64(p.c)]),
    )
}

/// Nonzeros of the flux-form matrix `A`.
pub fn operator_triplets_csv(op: &LaplacianOperator) -> Result<Vec<u8>> {
    csv_bytes(
        &["row", "col", "value"],
        op.a.triplets().map(|(r, c, v)| vec![r.to_string(), c.to_string(), fmt_f64(v)]),
    )
}

/// Generic table from preformatted rows.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    csv_bytes(header, rows.iter().cloned())
}

/// Legacy ASCII VTK unstructured grid with per-triangle `density`, `phase`,
/// `re` and `im`.
pub fn field_vtk(mesh: &RingMesh, u: &Field, title: &str) -> Result<Vec<u8>> {
    u.check_mesh(mesh)?;
    use std::fmt::Write;
    let mut s = String::new();
    let n = mesh.n_triangles();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or("field"));
    let _ = writeln!(s, "ASCII");
    let _ = writeln!(s, "DATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} 0", fmt_f64(v.x), fmt_f64(v.y));
    }
    let _ = writeln!(s, "CELLS {} {}", n, 4 * n);
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        // VTK_TRIANGLE
        let _ = writeln!(s, "5");
    }
    let _ = writeln!(s, "CELL_DATA {n}");
    let scalars: [(&str, fn(&Complex64) -> f64); 4] = [
        ("density", |z| z.norm_sqr()),
        ("phase", |z| z.arg()),
        ("re", |z| z.re),
        ("im", |z| z.im),
    ];
    for (name, f) in scalars {
        let _ = writeln!(s, "SCALARS {name} double 1");
        let _ = writeln!(s, "LOOKUP_TABLE default");
        for z in &u.values {
            let _ = writeln!(s, "{}", fmt_f64(f(z)));
        }
    }
    Ok(s.into_bytes())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Writes files below one directory and remembers what it wrote.
#[derive(Debug)]
pub struct ArtifactWriter {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl ArtifactWriter {
    pub fn new(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(ArtifactWriter {
            root,
            entries: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        let entry = ManifestEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        };
        match self.entries.iter_mut().find(|e| e.path == rel) {
            Some(e) => *e = entry,
            None => self.entries.push(entry),
        }
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(rel, &bytes)
    }

    /// Write `manifest.json` listing every file so far, with `parameters`
    /// echoed verbatim. The manifest does not list itself.
    pub fn finish<P: Serialize>(self, parameters: &P) -> Result<Vec<ManifestEntry>> {
        #[derive(Serialize)]
        struct Manifest<'a, P> {
            parameters: &'a P,
            files: &'a [ManifestEntry],
        }
        let mut bytes = serde_json::to_vec_pretty(&Manifest {
            parameters,
            files: &self.entries,
        })?;
        bytes.push(b'\n');
        fs::write(self.root.join("manifest.json"), bytes)?;
        Ok(self.entries)
    }
}

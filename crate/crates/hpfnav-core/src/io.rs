//! File formats: PGM grayscale environments with JSON sidecars, JSON grid
//! environments, and solved-field export.
//!
//! Grid files declare row-major ordering with the x index fastest; PGM rows
//! map to increasing y, columns to increasing x. Intensity maps linearly to
//! fitness (0 impassable, full scale free); anything below 1/255 is treated
//! as exactly zero.

use crate::field::{FieldVariant, PotentialField};
use crate::grid::{CellClass, GridEnvironment, GridError};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Fitness below this quantum is treated as exactly zero.
pub const BETA_QUANTUM: f64 = 1.0 / 255.0;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("pgm parse error at byte {offset} (line {line}): {message}")]
    PgmParse {
        offset: usize,
        line: usize,
        message: String,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

// ---------------------------------------------------------------------------
// PGM

#[derive(Debug, Clone)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major, top row first.
    pub pixels: Vec<u16>,
}

struct PgmScanner<'a> {
    bytes: &'a [u8],
    at: usize,
    line: usize,
}

impl<'a> PgmScanner<'a> {
    fn error(&self, message: impl Into<String>) -> IoError {
        IoError::PgmParse {
            offset: self.at,
            line: self.line,
            message: message.into(),
        }
    }

    /// Next whitespace-delimited token, skipping `#` comments.
    fn token(&mut self) -> Result<&'a [u8], IoError> {
        while self.at < self.bytes.len() {
            match self.bytes[self.at] {
                b'\n' => {
                    self.line += 1;
                    self.at += 1;
                }
                b' ' | b'\t' | b'\r' => self.at += 1,
                b'#' => {
                    while self.at < self.bytes.len() && self.bytes[self.at] != b'\n' {
                        self.at += 1;
                    }
                }
                _ => break,
            }
        }
        if self.at >= self.bytes.len() {
            return Err(self.error("unexpected end of file"));
        }
        let start = self.at;
        while self.at < self.bytes.len() && !self.bytes[self.at].is_ascii_whitespace() {
            self.at += 1;
        }
        Ok(&self.bytes[start..self.at])
    }

    fn number(&mut self, what: &str) -> Result<usize, IoError> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| self.error(format!("expected {what}, got {:?}", String::from_utf8_lossy(tok))))
    }
}

/// Parse a P2 (ascii) or P5 (binary, 8-bit) grayscale image.
pub fn parse_pgm(bytes: &[u8]) -> Result<PgmImage, IoError> {
    let mut s = PgmScanner {
        bytes,
        at: 0,
        line: 1,
    };
    let magic = s.token()?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        other => {
            return Err(s.error(format!(
                "unsupported magic {:?}; expected P2 or P5",
                String::from_utf8_lossy(other)
            )))
        }
    };
    let width = s.number("width")?;
    let height = s.number("height")?;
    let maxval = s.number("maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(s.error(format!("maxval {maxval} out of range")));
    }
    let count = width * height;
    let mut pixels = Vec::with_capacity(count);
    if binary {
        if maxval > 255 {
            return Err(s.error("binary images support maxval <= 255 only"));
        }
        // Exactly one whitespace byte after maxval.
        s.at += 1;
        if bytes.len() < s.at + count {
            return Err(s.error(format!(
                "expected {count} pixel bytes, found {}",
                bytes.len().saturating_sub(s.at)
            )));
        }
        pixels.extend(bytes[s.at..s.at + count].iter().map(|&b| b as u16));
    } else {
        for _ in 0..count {
            let v = s.number("pixel value")?;
            if v > maxval {
                return Err(s.error(format!("pixel value {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as u16);
        }
    }
    Ok(PgmImage {
        width,
        height,
        maxval: maxval as u16,
        pixels,
    })
}

pub fn read_pgm(path: &Path) -> Result<PgmImage, IoError> {
    parse_pgm(&read_file(path)?)
}

/// Serialize as ascii P2, 16 values per line.
pub fn pgm_to_p2(img: &PgmImage) -> String {
    let mut out = format!("P2\n{} {}\n{}\n", img.width, img.height, img.maxval);
    for chunk in img.pixels.chunks(16) {
        let line: Vec<String> = chunk.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Environment sidecar and JSON formats

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DirectionalJson {
    pub cells: Vec<Vec<usize>>,
    pub vectors: Vec<Vec<f64>>,
}

/// Companion annotations for a PGM environment: target/start cells and
/// directional constraints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PgmSidecar {
    pub schema_version: u32,
    #[serde(default = "default_spacing")]
    pub spacing: f64,
    pub target: [usize; 2],
    #[serde(default)]
    pub start: Option<[usize; 2]>,
    #[serde(default)]
    pub directional: Option<DirectionalJson>,
}

fn default_spacing() -> f64 {
    1.0
}

/// Build an environment from a grayscale image and its sidecar. Zero-fitness
/// pixels become obstacles.
pub fn env_from_pgm(img: &PgmImage, sidecar: &PgmSidecar) -> Result<GridEnvironment, IoError> {
    let mut env = GridEnvironment::new_2d(img.width, img.height, sidecar.spacing)?;
    for row in 0..img.height {
        for col in 0..img.width {
            let g = img.pixels[row * img.width + col] as f64 / img.maxval as f64;
            let beta = if g < BETA_QUANTUM { 0.0 } else { g };
            let cell = env.index(col, row, 0);
            if beta == 0.0 {
                env.set_class(cell, CellClass::Obstacle);
            } else {
                env.set_beta(cell, beta)?;
            }
        }
    }
    let t = cell_index_2d(&env, &sidecar.target, "target")?;
    env.set_class(t, CellClass::Target);
    if let Some(start) = &sidecar.start {
        let s = cell_index_2d(&env, start, "start")?;
        env.set_class(s, CellClass::Start);
    }
    if let Some(d) = &sidecar.directional {
        apply_directional(&mut env, d)?;
    }
    Ok(env)
}

fn cell_index_2d(env: &GridEnvironment, ij: &[usize; 2], what: &str) -> Result<usize, IoError> {
    let [nx, ny, _] = env.shape();
    if ij[0] >= nx || ij[1] >= ny {
        return Err(IoError::Schema(format!(
            "{what} cell [{}, {}] outside shape [{nx}, {ny}]",
            ij[0], ij[1]
        )));
    }
    Ok(env.index(ij[0], ij[1], 0))
}

fn apply_directional(env: &mut GridEnvironment, d: &DirectionalJson) -> Result<(), IoError> {
    if d.cells.len() != d.vectors.len() {
        return Err(IoError::Schema(format!(
            "directional: {} cells but {} vectors",
            d.cells.len(),
            d.vectors.len()
        )));
    }
    for (cell, vector) in d.cells.iter().zip(&d.vectors) {
        let idx = cell_index(env, cell, "directional cell")?;
        let mut v = [0.0f64; 3];
        for (a, &x) in vector.iter().take(3).enumerate() {
            v[a] = x;
        }
        env.set_direction(idx, v)?;
    }
    Ok(())
}

fn cell_index(env: &GridEnvironment, idx: &[usize], what: &str) -> Result<usize, IoError> {
    let shape = env.shape();
    let mut c = [0usize; 3];
    for (a, &i) in idx.iter().take(3).enumerate() {
        c[a] = i;
    }
    if idx.len() < 2 || idx.len() > 3 {
        return Err(IoError::Schema(format!(
            "{what}: cell index needs 2 or 3 components, got {}",
            idx.len()
        )));
    }
    for a in 0..3 {
        if c[a] >= shape[a] {
            return Err(IoError::Schema(format!(
                "{what}: index {:?} outside shape {:?}",
                idx, shape
            )));
        }
    }
    Ok(env.index(c[0], c[1], c[2]))
}

/// Self-contained JSON environment (the only format for 3-D grids).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvJson {
    pub schema_version: u32,
    /// Cells per axis: `[nx, ny]` or `[nx, ny, nz]`.
    pub shape: Vec<usize>,
    pub spacing: f64,
    /// Always "row-major-x-fastest"; stated in the file for readers.
    #[serde(default = "default_ordering")]
    pub ordering: String,
    /// Per-cell class codes (0 free, 1 obstacle, 2 target, 3 start).
    #[serde(default)]
    pub cells: Option<Vec<u8>>,
    #[serde(default)]
    pub beta: Option<Vec<f64>>,
    #[serde(default)]
    pub target: Option<Vec<usize>>,
    #[serde(default)]
    pub start: Option<Vec<usize>>,
    #[serde(default)]
    pub directional: Option<DirectionalJson>,
}

fn default_ordering() -> String {
    "row-major-x-fastest".into()
}

pub fn env_from_json(text: &str) -> Result<GridEnvironment, IoError> {
    let spec: EnvJson = serde_json::from_str(text)?;
    if spec.ordering != "row-major-x-fastest" {
        return Err(IoError::Schema(format!(
            "unsupported ordering {:?}",
            spec.ordering
        )));
    }
    let shape = match spec.shape.as_slice() {
        [nx, ny] => [*nx, *ny, 1],
        [nx, ny, nz] => [*nx, *ny, *nz],
        other => {
            return Err(IoError::Schema(format!(
                "shape needs 2 or 3 axes, got {}",
                other.len()
            )))
        }
    };
    let mut env = GridEnvironment::new(shape, spec.spacing)?;
    let n = env.cell_count();
    if let Some(cells) = &spec.cells {
        if cells.len() != n {
            return Err(IoError::Schema(format!(
                "cells array has {} entries, grid has {n}",
                cells.len()
            )));
        }
        for (i, &code) in cells.iter().enumerate() {
            let class = CellClass::from_code(code)
                .ok_or_else(|| IoError::Schema(format!("unknown cell code {code} at {i}")))?;
            env.set_class(i, class);
        }
    }
    if let Some(beta) = &spec.beta {
        if beta.len() != n {
            return Err(IoError::Schema(format!(
                "beta array has {} entries, grid has {n}",
                beta.len()
            )));
        }
        for (i, &b) in beta.iter().enumerate() {
            let q = if b < BETA_QUANTUM { 0.0 } else { b };
            env.set_beta(i, q)?;
        }
    }
    if let Some(target) = &spec.target {
        let idx = cell_index(&env, target, "target")?;
        env.set_class(idx, CellClass::Target);
    }
    if let Some(start) = &spec.start {
        let idx = cell_index(&env, start, "start")?;
        env.set_class(idx, CellClass::Start);
    }
    if let Some(d) = &spec.directional {
        apply_directional(&mut env, d)?;
    }
    Ok(env)
}

pub fn env_to_json(env: &GridEnvironment) -> EnvJson {
    let shape = env.shape();
    let shape_vec = if shape[2] == 1 {
        vec![shape[0], shape[1]]
    } else {
        shape.to_vec()
    };
    EnvJson {
        schema_version: 1,
        shape: shape_vec,
        spacing: env.spacing(),
        ordering: default_ordering(),
        cells: Some(env.classes().iter().map(|c| c.code()).collect()),
        beta: Some(env.betas().to_vec()),
        target: None,
        start: None,
        directional: env.directional().map(|d| {
            let mut cells = Vec::new();
            let mut vectors = Vec::new();
            for (i, &m) in d.mask.iter().enumerate() {
                if m {
                    let c = env.coords(i);
                    cells.push(if shape[2] == 1 {
                        vec![c[0], c[1]]
                    } else {
                        c.to_vec()
                    });
                    vectors.push(d.vectors[i].to_vec());
                }
            }
            DirectionalJson { cells, vectors }
        }),
    }
}

/// Load an environment from `.pgm` (with sidecar) or `.json`.
pub fn load_env(path: &Path, sidecar: Option<&Path>) -> Result<GridEnvironment, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => {
            let img = read_pgm(path)?;
            let sidecar_path = match sidecar {
                Some(p) => p.to_path_buf(),
                None => path.with_extension("json"),
            };
            let text = read_file(&sidecar_path)?;
            let sidecar: PgmSidecar = serde_json::from_slice(&text)?;
            env_from_pgm(&img, &sidecar)
        }
        _ => {
            let text = read_file(path)?;
            env_from_json(&String::from_utf8_lossy(&text))
        }
    }
}

// ---------------------------------------------------------------------------
// Solved-field export

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldHeader {
    pub schema_version: u32,
    pub variant: String,
    pub shape: Vec<usize>,
    pub spacing: f64,
    pub ordering: String,
    pub residual: f64,
    pub iterations: usize,
    #[serde(default)]
    pub sigma_f: Option<f64>,
    #[serde(default)]
    pub sigma_b: Option<f64>,
    pub target: Vec<usize>,
    /// "csv" (one value per line) or "f64le" (flat binary).
    pub values_format: String,
    pub values_file: String,
}

pub fn variant_name(v: FieldVariant) -> &'static str {
    match v {
        FieldVariant::Laplace => "laplace",
        FieldVariant::Anisotropic => "anisotropic",
        FieldVariant::Weighted => "weighted",
    }
}

/// Write `<stem>.field.json` plus `<stem>.values.{csv,bin}` into `dir`.
pub fn write_field(
    field: &PotentialField,
    dir: &Path,
    stem: &str,
    binary: bool,
) -> Result<(PathBuf, PathBuf), IoError> {
    let env = field.env();
    let shape = env.shape();
    let shape_vec = if shape[2] == 1 {
        vec![shape[0], shape[1]]
    } else {
        shape.to_vec()
    };
    let coords = env.coords(field.target_cell());
    let target = if shape[2] == 1 {
        vec![coords[0], coords[1]]
    } else {
        coords.to_vec()
    };
    let (values_file, bytes): (String, Vec<u8>) = if binary {
        let mut b = Vec::with_capacity(field.values().len() * 8);
        for v in field.values() {
            b.extend_from_slice(&v.to_le_bytes());
        }
        (format!("{stem}.values.bin"), b)
    } else {
        let mut s = String::new();
        for v in field.values() {
            s.push_str(&format!("{v}\n"));
        }
        (format!("{stem}.values.csv"), s.into_bytes())
    };
    let header = FieldHeader {
        schema_version: 1,
        variant: variant_name(field.variant()).into(),
        shape: shape_vec,
        spacing: env.spacing(),
        ordering: default_ordering(),
        residual: field.residual(),
        iterations: field.iterations(),
        sigma_f: field.sigma().map(|s| s.sigma_f),
        sigma_b: field.sigma().map(|s| s.sigma_b),
        target,
        values_format: if binary { "f64le" } else { "csv" }.into(),
        values_file,
    };
    let header_path = dir.join(format!("{stem}.field.json"));
    let values_path = dir.join(&header.values_file);
    write_file(
        &header_path,
        serde_json::to_string_pretty(&header)?.as_bytes(),
    )?;
    write_file(&values_path, &bytes)?;
    Ok((header_path, values_path))
}

/// Read a field header and its values array back.
pub fn read_field(header_path: &Path) -> Result<(FieldHeader, Vec<f64>), IoError> {
    let text = read_file(header_path)?;
    let header: FieldHeader = serde_json::from_slice(&text)?;
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let values_path = dir.join(&header.values_file);
    let bytes = read_file(&values_path)?;
    let values = match header.values_format.as_str() {
        "f64le" => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
        "csv" => {
            let text = String::from_utf8_lossy(&bytes);
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                out.push(line.trim().parse::<f64>().map_err(|e| {
                    IoError::Schema(format!("{}: line {}: {e}", values_path.display(), i + 1))
                })?);
            }
            out
        }
        other => return Err(IoError::Schema(format!("unknown values format {other:?}"))),
    };
    let expected: usize = header.shape.iter().product();
    if values.len() != expected {
        return Err(IoError::Schema(format!(
            "field has {} values, header shape wants {expected}",
            values.len()
        )));
    }
    Ok((header, values))
}

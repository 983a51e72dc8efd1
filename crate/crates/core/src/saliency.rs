//! Ground-truth saliency heat maps on an equirectangular grid.
//!
//! Each user contributes a spherical Gaussian `exp(-d² / 2σ²)` around their
//! viewport center, `d` being the orthodromic distance to each cell center;
//! the ground-truth map of a timestep is the mean over all users.

use std::f64::consts::PI;
use std::io::{Read, Write};

use thiserror::Error;

use crate::geometry::{self, SphericalCoord};

#[derive(Debug, Error)]
pub enum SaliencyError {
    #[error("invalid saliency config: {0}")]
    Config(String),
    #[error("aggregate map needs at least one viewport center")]
    NoCenters,
    #[error("map file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaliencyConfig {
    sigma: f64,
    width: usize,
    height: usize,
}

impl SaliencyConfig {
    /// Kernel width used for reproduction runs.
    pub const DEFAULT_SIGMA: f64 = PI / 30.0;

    pub fn new(sigma: f64, width: usize, height: usize) -> Result<Self, SaliencyError> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(SaliencyError::Config(format!("sigma must be > 0, got {sigma}")));
        }
        if width < 2 || height < 2 || width != 2 * height {
            return Err(SaliencyError::Config(format!(
                "grid must be W x H with W = 2H >= 4, got {width} x {height}"
            )));
        }
        let cell = 2.0 * PI / width as f64;
        if sigma < 2.0 * cell {
            log::warn!(
                "sigma {sigma:.4} rad spans less than 2 cells ({:.4} rad each) of a {width}x{height} grid",
                cell
            );
        }
        Ok(Self { sigma, width, height })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Unit vectors of all cell centers, row-major.
    fn cell_vectors(&self) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                let g = geometry::grid_cell_to_geo(x, y, self.width, self.height).expect("cell in range");
                out.push(geometry::geo_to_spherical(&g).to_unit_vector());
            }
        }
        out
    }
}

impl Default for SaliencyConfig {
    fn default() -> Self {
        Self {
            sigma: Self::DEFAULT_SIGMA,
            width: 64,
            height: 32,
        }
    }
}

/// Row-major grid of saliency values, row 0 at the north pole.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap {
    width: usize,
    height: usize,
    t: u32,
    values: Vec<f64>,
}

impl SaliencyMap {
    pub fn from_values(width: usize, height: usize, t: u32, values: Vec<f64>) -> Result<Self, SaliencyError> {
        if values.len() != width * height {
            return Err(SaliencyError::Format(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        Ok(Self { width, height, t, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    pub fn with_t(mut self, t: u32) -> Self {
        self.t = t;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

/// Generates maps for a fixed configuration, caching the cell geometry.
#[derive(Debug, Clone)]
pub struct SaliencyGenerator {
    cfg: SaliencyConfig,
    cells: Vec<[f64; 3]>,
}

impl SaliencyGenerator {
    pub fn new(cfg: SaliencyConfig) -> Self {
        Self {
            cells: cfg.cell_vectors(),
            cfg,
        }
    }

    pub fn config(&self) -> &SaliencyConfig {
        &self.cfg
    }

    fn accumulate(&self, center: &SphericalCoord, acc: &mut [f64]) {
        let c = center.to_unit_vector();
        let k = 1.0 / (2.0 * self.cfg.sigma * self.cfg.sigma);
        for (a, cell) in acc.iter_mut().zip(&self.cells) {
            let d = geometry::unit_vector_distance(cell, &c);
            *a += (-d * d * k).exp();
        }
    }

    pub fn per_user_map(&self, center: &SphericalCoord) -> SaliencyMap {
        let mut values = vec![0.0; self.cells.len()];
        self.accumulate(center, &mut values);
        SaliencyMap {
            width: self.cfg.width,
            height: self.cfg.height,
            t: 0,
            values,
        }
    }

    pub fn aggregate_map(&self, centers: &[SphericalCoord]) -> Result<SaliencyMap, SaliencyError> {
        if centers.is_empty() {
            return Err(SaliencyError::NoCenters);
        }
        let mut values = vec![0.0; self.cells.len()];
        for c in centers {
            self.accumulate(c, &mut values);
        }
        let inv = 1.0 / centers.len() as f64;
        values.iter_mut().for_each(|v| *v *= inv);
        Ok(SaliencyMap {
            width: self.cfg.width,
            height: self.cfg.height,
            t: 0,
            values,
        })
    }
}

pub fn per_user_map(center: &SphericalCoord, cfg: &SaliencyConfig) -> SaliencyMap {
    SaliencyGenerator::new(*cfg).per_user_map(center)
}

/// Cellwise mean of the per-user maps.
pub fn aggregate_map(centers: &[SphericalCoord], cfg: &SaliencyConfig) -> Result<SaliencyMap, SaliencyError> {
    SaliencyGenerator::new(*cfg).aggregate_map(centers)
}

/// Cell holding the maximum; ties go to the smallest `(y, x)`.
pub fn map_argmax(map: &SaliencyMap) -> (usize, usize) {
    let mut best = 0;
    for (i, &v) in map.values.iter().enumerate() {
        if v > map.values[best] {
            best = i;
        }
    }
    (best % map.width, best / map.width)
}

const MAGIC: &[u8; 4] = b"GTSM";

/// Binary map: `GTSM`, little-endian u32 width, height and timestep, then
/// `width * height` little-endian f32 values row-major.
pub fn write_map<W: Write>(mut w: W, map: &SaliencyMap) -> Result<(), SaliencyError> {
    w.write_all(MAGIC)?;
    for v in [map.width as u32, map.height as u32, map.t] {
        w.write_all(&v.to_le_bytes())?;
    }
    for &v in &map.values {
        w.write_all(&(v as f32).to_le_bytes())?;
    }
    Ok(())
}

pub fn read_map<R: Read>(mut r: R) -> Result<SaliencyMap, SaliencyError> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)?;
    if &head[..4] != MAGIC {
        return Err(SaliencyError::Format("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().unwrap());
    let (width, height, t) = (word(4) as usize, word(8) as usize, word(12));
    let count = width
        .checked_mul(height)
        .filter(|&c| c <= 1 << 26)
        .ok_or_else(|| SaliencyError::Format(format!("implausible grid {width}x{height}")))?;
    let mut raw = vec![0u8; count * 4];
    r.read_exact(&mut raw)?;
    let values = raw
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    SaliencyMap::from_values(width, height, t, values)
}

/// Binary PGM (P5) with values scaled linearly from `[0, max]` to `0..=255`.
pub fn write_pgm<W: Write>(mut w: W, map: &SaliencyMap) -> Result<(), SaliencyError> {
    let max = map.values.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    write!(w, "P5\n{} {}\n255\n", map.width, map.height)?;
    let bytes: Vec<u8> = map
        .values
        .iter()
        .map(|v| (v * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    w.write_all(&bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geo_to_spherical, grid_cell_to_geo};

    fn cfg(sigma: f64) -> SaliencyConfig {
        SaliencyConfig::new(sigma, 64, 32).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SaliencyConfig::new(0.0, 64, 32).is_err());
        assert!(SaliencyConfig::new(0.1, 64, 30).is_err());
        assert!(SaliencyConfig::new(0.1, 2, 1).is_err());
        assert_eq!(SaliencyConfig::default().sigma(), PI / 30.0);
    }

    #[test]
    fn center_cell_is_one() {
        let c = cfg(PI / 12.0);
        let center = geo_to_spherical(&grid_cell_to_geo(10, 7, 64, 32).unwrap());
        let m = per_user_map(&center, &c);
        assert!((m.get(10, 7) - 1.0).abs() < 1e-12);
        assert_eq!(map_argmax(&m), (10, 7));
        assert!(m.values().iter().all(|&v| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn aggregate_of_identical_centers() {
        let c = cfg(PI / 12.0);
        let p = SphericalCoord::new(1.0, 1.2).unwrap();
        let single = per_user_map(&p, &c);
        let agg = aggregate_map(&[p, p], &c).unwrap();
        for (a, b) in single.values().iter().zip(agg.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(matches!(aggregate_map(&[], &c), Err(SaliencyError::NoCenters)));
    }

    #[test]
    fn uniform_map_ties_to_origin() {
        let m = per_user_map(&SphericalCoord::new(2.0, 1.0).unwrap(), &cfg(1e3));
        let near_one = m.values().iter().all(|&v| (v - 1.0).abs() < 1e-5);
        assert!(near_one);
        let flat = SaliencyMap::from_values(4, 2, 0, vec![0.5; 8]).unwrap();
        assert_eq!(map_argmax(&flat), (0, 0));
    }

    #[test]
    fn binary_and_pgm_export() {
        let m = per_user_map(&SphericalCoord::new(0.5, 1.0).unwrap(), &cfg(PI / 12.0)).with_t(42);
        let mut buf = Vec::new();
        write_map(&mut buf, &m).unwrap();
        assert_eq!(buf.len(), 16 + 64 * 32 * 4);
        let back = read_map(buf.as_slice()).unwrap();
        assert_eq!((back.width(), back.height(), back.t()), (64, 32, 42));
        for (a, b) in m.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-7);
        }
        buf[0] = b'X';
        assert!(read_map(buf.as_slice()).is_err());

        let mut pgm = Vec::new();
        write_pgm(&mut pgm, &m).unwrap();
        assert!(pgm.starts_with(b"P5\n64 32\n255\n"));
        assert_eq!(pgm.len(), 13 + 64 * 32);
    }
}

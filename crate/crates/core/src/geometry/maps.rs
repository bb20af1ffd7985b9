//! Per-pixel rasters: depth, normals, RGB images and boolean masks.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Metric depth with a validity mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    /// All-invalid map.
    pub fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        DepthMap {
            width,
            height,
            values: vec![0.0; n],
            valid: vec![false; n],
        }
    }

    /// Builds a map from raw values; non-finite or non-positive entries become invalid.
    pub fn from_values(width: u32, height: u32, values: Vec<f64>) -> Result<Self> {
        let n = width as usize * height as usize;
        if values.len() != n {
            return Err(Error::dims(n, values.len()));
        }
        let valid = values.iter().map(|v| v.is_finite() && *v > 0.0).collect();
        let mut d = DepthMap {
            width,
            height,
            values,
            valid,
        };
        d.sanitize();
        Ok(d)
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Option<f64>) -> Self {
        let mut d = DepthMap::empty(width, height);
        for v in 0..height {
            for u in 0..width {
                if let Some(z) = f(u, v) {
                    d.set(u, v, z);
                }
            }
        }
        d
    }

    fn sanitize(&mut self) {
        for (v, ok) in self.values.iter_mut().zip(self.valid.iter_mut()) {
            if !*ok {
                *v = 0.0;
            }
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> Option<f64> {
        let i = self.index(u, v);
        self.valid[i].then(|| self.values[i])
    }

    /// Stores `z` when it is a valid depth, otherwise invalidates the pixel.
    pub fn set(&mut self, u: u32, v: u32, z: f64) {
        let i = self.index(u, v);
        if z.is_finite() && z > 0.0 {
            self.values[i] = z;
            self.valid[i] = true;
        } else {
            self.values[i] = 0.0;
            self.valid[i] = false;
        }
    }

    pub fn invalidate(&mut self, i: usize) {
        self.valid[i] = false;
        self.values[i] = 0.0;
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn valid_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, ok)| **ok)
            .map(|(v, _)| *v)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let n = self.width as usize * self.height as usize;
        if self.values.len() != n || self.valid.len() != n {
            return Err(Error::dims(n, self.values.len()));
        }
        if self
            .values
            .iter()
            .zip(&self.valid)
            .any(|(v, ok)| *ok && !(*v > 0.0 && v.is_finite()))
        {
            return Err(Error::Invariant("valid depth must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn same_size(&self, width: u32, height: u32) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::dims(
                format!("{width}x{height}"),
                format!("{}x{}", self.width, self.height),
            ));
        }
        Ok(())
    }
}

/// Unit normals with a validity mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    pub width: u32,
    pub height: u32,
    pub vectors: Vec<Vec3>,
    pub valid: Vec<bool>,
}

impl NormalMap {
    pub fn empty(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        NormalMap {
            width,
            height,
            vectors: vec![Vec3::zeros(); n],
            valid: vec![false; n],
        }
    }

    /// Normalizes every vector; zero or non-finite vectors become invalid.
    pub fn from_vectors(width: u32, height: u32, vectors: Vec<Vec3>) -> Result<Self> {
        let n = width as usize * height as usize;
        if vectors.len() != n {
            return Err(Error::dims(n, vectors.len()));
        }
        let mut map = NormalMap::empty(width, height);
        for (i, v) in vectors.into_iter().enumerate() {
            map.set_index(i, v);
        }
        Ok(map)
    }

    #[inline]
    pub fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    pub fn set_index(&mut self, i: usize, v: Vec3) {
        let n = v.norm();
        if n > 1e-12 && n.is_finite() {
            self.vectors[i] = v / n;
            self.valid[i] = true;
        } else {
            self.vectors[i] = Vec3::zeros();
            self.valid[i] = false;
        }
    }

    pub fn get(&self, u: u32, v: u32) -> Option<Vec3> {
        let i = self.index(u, v);
        self.valid[i].then(|| self.vectors[i])
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Linear RGB image, channel values nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[f64; 3]>,
}

impl RgbImage {
    pub fn new(width: u32, height: u32) -> Self {
        RgbImage {
            width,
            height,
            pixels: vec![[0.0; 3]; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> [f64; 3]) -> Self {
        let mut img = RgbImage::new(width, height);
        for v in 0..height {
            for u in 0..width {
                let i = img.index(u, v);
                img.pixels[i] = f(u, v);
            }
        }
        img
    }

    pub fn filled(width: u32, height: u32, c: [f64; 3]) -> Self {
        RgbImage {
            width,
            height,
            pixels: vec![c; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    #[inline]
    pub fn get(&self, u: u32, v: u32) -> [f64; 3] {
        self.pixels[self.index(u, v)]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Equirectangular panorama: `width == 2 * height`, finite values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PanoramaImage(RgbImage);

impl PanoramaImage {
    pub fn new(image: RgbImage) -> Result<Self> {
        if image.width != 2 * image.height || image.height == 0 {
            return Err(Error::invalid(format!(
                "panorama must be 2:1, got {}x{}",
                image.width, image.height
            )));
        }
        if image
            .pixels
            .iter()
            .flatten()
            .any(|c| !(c.is_finite() && (0.0..=1.0).contains(c)))
        {
            return Err(Error::invalid("panorama values must be finite and within [0, 1]"));
        }
        Ok(PanoramaImage(image))
    }

    pub fn image(&self) -> &RgbImage {
        &self.0
    }

    pub fn into_image(self) -> RgbImage {
        self.0
    }

    pub fn width(&self) -> u32 {
        self.0.width
    }

    pub fn height(&self) -> u32 {
        self.0.height
    }
}

/// Invalidates pixels whose relative depth jump to any valid 4-neighbor exceeds `max_rel_jump`.
///
/// Removes the "edge floaters" that appear when back-projecting across depth discontinuities.
/// With `wrap_horizontal` the left and right image borders are treated as adjacent (ERP).
pub fn remove_edge_floaters(depth: &DepthMap, max_rel_jump: f64, wrap_horizontal: bool) -> DepthMap {
    let (w, h) = (depth.width as i64, depth.height as i64);
    let mut out = depth.clone();
    for v in 0..h {
        for u in 0..w {
            let Some(d) = depth.get(u as u32, v as u32) else {
                continue;
            };
            let mut floater = false;
            for (du, dv) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
                let mut nu = u + du;
                let nv = v + dv;
                if wrap_horizontal {
                    nu = nu.rem_euclid(w);
                }
                if nu < 0 || nu >= w || nv < 0 || nv >= h {
                    continue;
                }
                if let Some(dn) = depth.get(nu as u32, nv as u32) {
                    if (d - dn).abs() / d.min(dn) > max_rel_jump {
                        floater = true;
                        break;
                    }
                }
            }
            if floater {
                out.invalidate(depth.index(u as u32, v as u32));
            }
        }
    }
    out
}

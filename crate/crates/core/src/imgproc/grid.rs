use super::ImgError;

/// Row-major grid of `f64` intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl PixelGrid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, ImgError> {
        if width == 0 || height == 0 {
            return Err(ImgError::EmptyGrid { width, height });
        }
        if values.len() != width * height {
            return Err(ImgError::LengthMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImgError> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a grid from nested rows, mostly useful for small fixtures.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, ImgError> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(ImgError::RaggedRows);
        }
        Self::new(width, height, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.width)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> PixelGrid {
        PixelGrid {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Replaces NaN/Inf with the smallest finite value of the frame.
    ///
    /// Returns the number of replaced pixels. A frame without any finite
    /// value is an error since there is nothing to substitute.
    pub fn replace_non_finite(&mut self) -> Result<usize, ImgError> {
        let bad = self.values.iter().filter(|v| !v.is_finite()).count();
        if bad == 0 {
            return Ok(0);
        }
        let floor = self
            .values
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::INFINITY, f64::min);
        if !floor.is_finite() {
            return Err(ImgError::NoFinitePixels);
        }
        for v in self.values.iter_mut().filter(|v| !v.is_finite()) {
            *v = floor;
        }
        Ok(bad)
    }
}

/// Block-mean downsampling by an integer factor in both axes.
pub fn rebin(grid: &PixelGrid, factor: usize) -> Result<PixelGrid, ImgError> {
    if factor == 0 {
        return Err(ImgError::InvalidRebinFactor(factor));
    }
    let (w, h) = (grid.width, grid.height);
    if w % factor != 0 || h % factor != 0 {
        return Err(ImgError::NotDivisible { width: w, height: h, factor });
    }
    if factor == 1 {
        return Ok(grid.clone());
    }
    let (ow, oh) = (w / factor, h / factor);
    let mut out = vec![0.0; ow * oh];
    for (r, row) in grid.rows().enumerate() {
        let orow = &mut out[(r / factor) * ow..(r / factor + 1) * ow];
        for (acc, block) in orow.iter_mut().zip(row.chunks_exact(factor)) {
            *acc += block.iter().sum::<f64>();
        }
    }
    let norm = (factor * factor) as f64;
    for v in &mut out {
        *v /= norm;
    }
    PixelGrid::new(ow, oh, out)
}

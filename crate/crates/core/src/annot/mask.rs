//! Mask encodings and the conversions between them.
//!
//! * [`Bitmap`]: packed row-major bits, the working form for overlap counts.
//! * [`Rle`]: column-major run lengths starting with a (possibly empty)
//!   run of zeros, as in uncompressed COCO RLE.
//! * [`Polygon`]: one or more rings in pixel coordinates, origin at the
//!   top-left corner of the top-left pixel.

use serde::{Deserialize, Serialize};

use super::AnnotError;

/// Vertices may sit up to this far outside the canvas.
pub const VERTEX_TOLERANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.x < other.x + other.w
            && other.x < self.x + self.w
            && self.y < other.y + other.h
            && other.y < self.y + self.h
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }

    pub fn expand(&self, by: f64) -> BBox {
        BBox::new(self.x - by, self.y - by, self.w + 2.0 * by, self.h + 2.0 * by)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    height: usize,
    width: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for Bitmap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Bitmap({}x{}, {} set)", self.height, self.width, self.count())
    }
}

impl Bitmap {
    pub fn new(height: usize, width: usize) -> Self {
        Self { height, width, words: vec![0; (height * width).div_ceil(64)] }
    }

    /// Row-major booleans.
    pub fn from_bools(height: usize, width: usize, bits: &[bool]) -> Self {
        assert_eq!(bits.len(), height * width, "bitmap length must be h*w");
        let mut b = Self::new(height, width);
        for (i, _) in bits.iter().enumerate().filter(|(_, &v)| v) {
            b.words[i / 64] |= 1 << (i % 64);
        }
        b
    }

    /// Filled axis-aligned rectangle of rows `r0..r1` and columns `c0..c1`,
    /// clipped to the canvas.
    pub fn rect(height: usize, width: usize, r0: usize, c0: usize, r1: usize, c1: usize) -> Self {
        let mut b = Self::new(height, width);
        let (r1, c1) = (r1.min(height), c1.min(width));
        for r in r0..r1 {
            b.fill_row_span(r, c0, c1);
        }
        b
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        let i = row * self.width + col;
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let i = row * self.width + col;
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Sets columns `c0..c1` of `row`.
    pub fn fill_row_span(&mut self, row: usize, c0: usize, c1: usize) {
        if c0 >= c1 {
            return;
        }
        let start = row * self.width + c0;
        let end = row * self.width + c1;
        self.fill_range(start, end);
    }

    fn fill_range(&mut self, start: usize, end: usize) {
        let (mut i, end) = (start, end);
        while i < end {
            let word = i / 64;
            let lo = i % 64;
            let hi = (end - word * 64).min(64);
            let mask = if hi - lo == 64 { u64::MAX } else { ((1u64 << (hi - lo)) - 1) << lo };
            self.words[word] |= mask;
            i = word * 64 + hi;
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn intersection_count(&self, other: &Bitmap) -> usize {
        debug_assert_eq!(self.dims(), other.dims());
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    /// Intersection count restricted to rows `r0..r1` (clipped to the
    /// canvas); pixels outside those rows must not matter to the caller.
    pub fn intersection_count_in_rows(&self, other: &Bitmap, r0: usize, r1: usize) -> usize {
        debug_assert_eq!(self.dims(), other.dims());
        let r1 = r1.min(self.height);
        if r0 >= r1 {
            return 0;
        }
        let w0 = r0 * self.width / 64;
        let w1 = (r1 * self.width).div_ceil(64);
        self.words[w0..w1]
            .iter()
            .zip(&other.words[w0..w1])
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.height * self.width)
            .map(|i| self.words[i / 64] >> (i % 64) & 1 == 1)
            .collect()
    }

    /// Iterates set pixels as `(row, col)` in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.words.iter().enumerate().flat_map(move |(wi, &w)| {
            let mut bits = w;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + b)
            })
            .map(move |i| (i / self.width, i % self.width))
        })
    }

    /// Tight pixel bounds; `None` for an empty bitmap.
    pub fn bbox(&self) -> Option<BBox> {
        let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
        for (r, c) in self.ones() {
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
        }
        (r0 != usize::MAX).then(|| {
            BBox::new(c0 as f64, r0 as f64, (c1 - c0 + 1) as f64, (r1 - r0 + 1) as f64)
        })
    }
}

/// Uncompressed column-major run-length encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RleJson", into = "RleJson")]
pub struct Rle {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct RleJson {
    size: [usize; 2],
    counts: Vec<u64>,
}

impl TryFrom<RleJson> for Rle {
    type Error = AnnotError;

    fn try_from(j: RleJson) -> Result<Self, Self::Error> {
        Rle::new(j.size[0], j.size[1], j.counts)
    }
}

impl From<Rle> for RleJson {
    fn from(r: Rle) -> Self {
        RleJson { size: [r.height, r.width], counts: r.counts }
    }
}

impl Rle {
    /// Checks that the runs cover exactly `height * width` pixels.
    pub fn new(height: usize, width: usize, counts: Vec<u64>) -> Result<Self, AnnotError> {
        let total: u64 = counts.iter().sum();
        let expected = (height * width) as u64;
        if total != expected {
            return Err(AnnotError::CountsSum { expected, actual: total });
        }
        Ok(Self { height, width, counts })
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).sum()
    }
}

pub fn rle_encode(bitmap: &Bitmap) -> Rle {
    let (h, w) = bitmap.dims();
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u64;
    for c in 0..w {
        for r in 0..h {
            let v = bitmap.get(r, c);
            if v != current {
                counts.push(run);
                run = 0;
                current = v;
            }
            run += 1;
        }
    }
    counts.push(run);
    Rle { height: h, width: w, counts }
}

pub fn rle_decode(rle: &Rle) -> Result<Bitmap, AnnotError> {
    let total: u64 = rle.counts.iter().sum();
    let expected = (rle.height * rle.width) as u64;
    if total != expected {
        return Err(AnnotError::CountsSum { expected, actual: total });
    }
    let h = rle.height;
    let mut out = Bitmap::new(rle.height, rle.width);
    let mut pos = 0usize;
    for (i, &n) in rle.counts.iter().enumerate() {
        let n = n as usize;
        if i % 2 == 1 {
            for k in pos..pos + n {
                out.set(k % h, k / h, true);
            }
        }
        pos += n;
    }
    Ok(out)
}

/// Polygon rings as `[x, y]` vertices. Several rings combine under the
/// even-odd rule, so inner rings cut holes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Polygon {
    pub rings: Vec<Vec<[f64; 2]>>,
}

impl Polygon {
    pub fn new(rings: Vec<Vec<[f64; 2]>>) -> Result<Self, AnnotError> {
        if rings.is_empty() {
            return Err(AnnotError::BadPolygon("no rings".into()));
        }
        for ring in &rings {
            if ring.len() < 3 {
                return Err(AnnotError::BadPolygon(format!("ring with {} vertices", ring.len())));
            }
            if ring.iter().flatten().any(|v| !v.is_finite()) {
                return Err(AnnotError::BadPolygon("non-finite vertex".into()));
            }
        }
        Ok(Self { rings })
    }

    pub fn single(vertices: Vec<[f64; 2]>) -> Result<Self, AnnotError> {
        Self::new(vec![vertices])
    }

    /// Rectangle covering `bbox`, used for box-only detections.
    pub fn from_bbox(bbox: &BBox) -> Self {
        let (x0, y0, x1, y1) = (bbox.x, bbox.y, bbox.x + bbox.w, bbox.y + bbox.h);
        Self { rings: vec![vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]] }
    }

    pub fn vertex_bbox(&self) -> BBox {
        let pts = self.rings.iter().flatten();
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for p in pts {
            x0 = x0.min(p[0]);
            y0 = y0.min(p[1]);
            x1 = x1.max(p[0]);
            y1 = y1.max(p[1]);
        }
        BBox::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Even-odd area for non-crossing rings: each ring's shoelace area is
    /// added or subtracted by how many other rings enclose it.
    pub fn shoelace_area(&self) -> f64 {
        self.rings
            .iter()
            .enumerate()
            .map(|(k, ring)| {
                let n = ring.len();
                let twice: f64 = (0..n)
                    .map(|i| {
                        let (a, b) = (ring[i], ring[(i + 1) % n]);
                        a[0] * b[1] - b[0] * a[1]
                    })
                    .sum();
                let depth = self
                    .rings
                    .iter()
                    .enumerate()
                    .filter(|&(j, other)| j != k && point_in_ring(ring[0], other))
                    .count();
                let area = (twice / 2.0).abs();
                if depth % 2 == 0 {
                    area
                } else {
                    -area
                }
            })
            .sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.rings
            .iter()
            .map(|ring| {
                let n = ring.len();
                (0..n)
                    .map(|i| {
                        let (a, b) = (ring[i], ring[(i + 1) % n]);
                        (a[0] - b[0]).hypot(a[1] - b[1])
                    })
                    .sum::<f64>()
            })
            .sum()
    }
}

fn point_in_ring(p: [f64; 2], ring: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = ring.len();
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) && p[0] < a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]) {
            inside = !inside;
        }
    }
    inside
}

impl TryFrom<Vec<Vec<f64>>> for Polygon {
    type Error = AnnotError;

    fn try_from(flat: Vec<Vec<f64>>) -> Result<Self, Self::Error> {
        let rings = flat
            .into_iter()
            .map(|ring| {
                if ring.len() % 2 != 0 {
                    return Err(AnnotError::BadPolygon("odd number of coordinates".into()));
                }
                Ok(ring.chunks_exact(2).map(|p| [p[0], p[1]]).collect())
            })
            .collect::<Result<Vec<_>, _>>()?;
        Polygon::new(rings)
    }
}

impl From<Polygon> for Vec<Vec<f64>> {
    fn from(p: Polygon) -> Self {
        p.rings.into_iter().map(|ring| ring.into_iter().flatten().collect()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceMask {
    Polygon(Polygon),
    Rle(Rle),
    Bitmap(Bitmap),
}

impl InstanceMask {
    /// Canvas size carried by the encoding, if any (polygons have none).
    pub fn canvas(&self) -> Option<(usize, usize)> {
        match self {
            InstanceMask::Polygon(_) => None,
            InstanceMask::Rle(r) => Some((r.height, r.width)),
            InstanceMask::Bitmap(b) => Some(b.dims()),
        }
    }
}

impl From<Bitmap> for InstanceMask {
    fn from(b: Bitmap) -> Self {
        InstanceMask::Bitmap(b)
    }
}

impl From<Rle> for InstanceMask {
    fn from(r: Rle) -> Self {
        InstanceMask::Rle(r)
    }
}

impl From<Polygon> for InstanceMask {
    fn from(p: Polygon) -> Self {
        InstanceMask::Polygon(p)
    }
}

/// Renders any encoding onto an `h x w` canvas.
///
/// Polygons are filled with the even-odd rule, testing pixel centres
/// `(c + 0.5, r + 0.5)`.
pub fn rasterize(mask: &InstanceMask, height: usize, width: usize) -> Result<Bitmap, AnnotError> {
    match mask {
        InstanceMask::Polygon(p) => rasterize_polygon(p, height, width),
        InstanceMask::Rle(r) => {
            check_canvas(r.height, r.width, height, width)?;
            rle_decode(r)
        }
        InstanceMask::Bitmap(b) => {
            check_canvas(b.height, b.width, height, width)?;
            Ok(b.clone())
        }
    }
}

fn check_canvas(h: usize, w: usize, height: usize, width: usize) -> Result<(), AnnotError> {
    if (h, w) != (height, width) {
        return Err(AnnotError::CanvasMismatch { expected: (height, width), actual: (h, w) });
    }
    Ok(())
}

fn rasterize_polygon(poly: &Polygon, height: usize, width: usize) -> Result<Bitmap, AnnotError> {
    let (wf, hf) = (width as f64, height as f64);
    for &[x, y] in poly.rings.iter().flatten() {
        let inside = (-VERTEX_TOLERANCE..=wf + VERTEX_TOLERANCE).contains(&x)
            && (-VERTEX_TOLERANCE..=hf + VERTEX_TOLERANCE).contains(&y);
        if !inside {
            return Err(AnnotError::VertexOutOfBounds { x, y, height, width });
        }
    }
    // Non-horizontal edges as (y_min, y_max, x at y_min, dx/dy).
    let mut edges: Vec<(f64, f64, f64, f64)> = Vec::new();
    for ring in &poly.rings {
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            if a[1] == b[1] {
                continue;
            }
            let (lo, hi) = if a[1] < b[1] { (a, b) } else { (b, a) };
            edges.push((lo[1], hi[1], lo[0], (hi[0] - lo[0]) / (hi[1] - lo[1])));
        }
    }
    let mut out = Bitmap::new(height, width);
    let mut xs: Vec<f64> = Vec::new();
    let y_min = edges.iter().map(|e| e.0).fold(f64::INFINITY, f64::min);
    let y_max = edges.iter().map(|e| e.1).fold(f64::NEG_INFINITY, f64::max);
    if edges.is_empty() {
        return Ok(out);
    }
    let r_start = (y_min - 0.5).ceil().max(0.0) as usize;
    let r_end = ((y_max - 0.5).ceil().max(0.0) as usize).min(height);
    for r in r_start..r_end {
        let y = r as f64 + 0.5;
        xs.clear();
        // half-open in y so shared vertices are counted once
        xs.extend(
            edges
                .iter()
                .filter(|e| e.0 <= y && y < e.1)
                .map(|e| e.2 + (y - e.0) * e.3),
        );
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            let c0 = (pair[0] - 0.5).ceil().clamp(0.0, wf) as usize;
            let c1 = (pair[1] - 0.5).ceil().clamp(0.0, wf) as usize;
            out.fill_row_span(r, c0, c1);
        }
    }
    Ok(out)
}

/// Tight bounds of a mask. Polygons report their vertex extent; pixel
/// encodings report `x = min col`, `w = max col - min col + 1`, likewise
/// for rows.
pub fn bbox_of(mask: &InstanceMask) -> Result<BBox, AnnotError> {
    match mask {
        InstanceMask::Polygon(p) => {
            let b = p.vertex_bbox();
            if b.w <= 0.0 || b.h <= 0.0 {
                return Err(AnnotError::EmptyMask);
            }
            Ok(b)
        }
        InstanceMask::Rle(r) => rle_decode(r)?.bbox().ok_or(AnnotError::EmptyMask),
        InstanceMask::Bitmap(b) => b.bbox().ok_or(AnnotError::EmptyMask),
    }
}

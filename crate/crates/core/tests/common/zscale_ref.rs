//! Reference ZScale written from the textbook description, kept separate
//! from the library code it checks. Uses normal-equation sums for the fit and
//! explicit index lists for the rejection bookkeeping.

#[allow(dead_code)]
pub struct RefParams {
    pub n_samples: usize,
    pub contrast: f64,
    pub max_reject: f64,
    pub min_pixels: usize,
    pub krej: f64,
    pub max_iter: usize,
}

#[allow(dead_code)]
pub const REF_DEFAULTS: RefParams = RefParams {
    n_samples: 1000,
    contrast: 0.25,
    max_reject: 0.5,
    min_pixels: 5,
    krej: 2.5,
    max_iter: 5,
};

#[allow(dead_code)]
#[allow(clippy::needless_range_loop)]
pub fn reference_zscale(values: &[f64], p: &RefParams) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let stride = std::cmp::max(1, finite.len() / p.n_samples);
    let mut s = Vec::new();
    let mut i = 0;
    while i < finite.len() && s.len() < p.n_samples {
        s.push(finite[i]);
        i += stride;
    }
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    let (lo, hi) = (s[0], s[n - 1]);
    let minpix = std::cmp::max(p.min_pixels, (n as f64 * p.max_reject).floor() as usize);

    let mut good: Vec<usize> = (0..n).collect();
    let mut prev_good = n + 1;
    let mut slope: Option<f64> = None;
    for _ in 0..p.max_iter {
        if good.len() >= prev_good || good.len() < minpix {
            break;
        }
        let m = good.len() as f64;
        let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
        for &j in &good {
            let x = j as f64;
            sx += x;
            sy += s[j];
            sxx += x * x;
            sxy += x * s[j];
        }
        let det = m * sxx - sx * sx;
        if good.len() < 2 || det == 0.0 {
            slope = None;
            break;
        }
        let b = (m * sxy - sx * sy) / det;
        let a = (sy - b * sx) / m;
        slope = Some(b);
        let resid: Vec<f64> = (0..n).map(|j| s[j] - a - b * j as f64).collect();
        let mean = good.iter().map(|&j| resid[j]).sum::<f64>() / m;
        let var = good.iter().map(|&j| (resid[j] - mean) * (resid[j] - mean)).sum::<f64>() / m;
        let thr = p.krej * var.sqrt();

        let mut rejected = vec![false; n];
        for j in 0..n {
            let was_bad = !good.contains(&j);
            if was_bad || resid[j] < -thr || resid[j] > thr {
                for k in j.saturating_sub(1)..=std::cmp::min(j + 1, n - 1) {
                    rejected[k] = true;
                }
            }
        }
        prev_good = good.len();
        good = (0..n).filter(|&j| !rejected[j]).collect();
    }
    match slope {
        Some(b) if good.len() >= minpix && b > 0.0 => {
            let b = b / p.contrast;
            let mid = (n - 1) / 2;
            let med = if n % 2 == 0 { (s[n / 2 - 1] + s[n / 2]) / 2.0 } else { s[n / 2] };
            let z1 = f64::max(lo, med - mid as f64 * b);
            let z2 = f64::min(hi, med + (n - mid) as f64 * b);
            (z1, z2)
        }
        _ => (lo, hi),
    }
}

/// Deterministic frame shared with `data/zscale_numpy_ref.py`.
#[allow(dead_code)]
pub fn wave_frame(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = i as f64;
            100.0 + 10.0 * (0.37 * x).sin() + 3.0 * ((1.91 * x * x) % 97.0).sin()
        })
        .collect()
}

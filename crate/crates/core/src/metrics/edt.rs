//! Exact Euclidean distance transform with nearest-site tracking.
//!
//! Separable lower-envelope algorithm (Felzenszwalb & Huttenlocher): a 1D pass
//! down every column followed by a parabola envelope along every row. Squared
//! distances are sums of squared integers, so they are exact in `f64`.

use crate::grid::{Grid, Mask, Shape};

#[derive(Debug, Clone)]
pub struct DistanceField {
    shape: Shape,
    sq: Vec<f64>,
    nearest: Vec<Option<usize>>,
}

impl DistanceField {
    /// Squared distance to the nearest site; `f64::INFINITY` when there is none.
    pub fn squared(&self, row: usize, col: usize) -> f64 {
        self.sq[self.shape.index(row, col)]
    }

    pub fn distance(&self, row: usize, col: usize) -> f64 {
        self.squared(row, col).sqrt()
    }

    /// Coordinates of the nearest site.
    pub fn nearest(&self, row: usize, col: usize) -> Option<(usize, usize)> {
        self.nearest[self.shape.index(row, col)].map(|i| (i / self.shape.width, i % self.shape.width))
    }

    pub fn squared_data(&self) -> &[f64] {
        &self.sq
    }
}

impl Grid for DistanceField {
    fn shape(&self) -> Shape {
        self.shape
    }
}

/// Distance from every pixel to the nearest set pixel of `sites`.
pub fn distance_to_sites(sites: &Mask) -> DistanceField {
    let shape = sites.shape();
    let Shape { height, width } = shape;
    let n = shape.len();

    // column pass: squared vertical distance and the row of the nearest site
    let mut col_sq = vec![f64::INFINITY; n];
    let mut col_row = vec![usize::MAX; n];
    for c in 0..width {
        let mut last: Option<usize> = None;
        for r in 0..height {
            if sites.get(r, c) {
                last = Some(r);
            }
            if let Some(lr) = last {
                let d = (r - lr) as f64;
                col_sq[shape.index(r, c)] = d * d;
                col_row[shape.index(r, c)] = lr;
            }
        }
        let mut next: Option<usize> = None;
        for r in (0..height).rev() {
            if sites.get(r, c) {
                next = Some(r);
            }
            if let Some(nr) = next {
                let d = (nr - r) as f64;
                let i = shape.index(r, c);
                if d * d < col_sq[i] {
                    col_sq[i] = d * d;
                    col_row[i] = nr;
                }
            }
        }
    }

    let mut sq = vec![f64::INFINITY; n];
    let mut nearest = vec![None; n];
    let mut v = vec![0usize; width];
    let mut z = vec![0.0f64; width + 1];
    for r in 0..height {
        let f = |q: usize| col_sq[shape.index(r, q)];
        let mut k: isize = -1;
        for q in 0..width {
            let fq = f(q);
            if !fq.is_finite() {
                continue;
            }
            let qf = q as f64;
            loop {
                if k < 0 {
                    k = 0;
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                let vk = v[k as usize];
                let vf = vk as f64;
                let s = ((fq + qf * qf) - (f(vk) + vf * vf)) / (2.0 * qf - 2.0 * vf);
                if s <= z[k as usize] {
                    k -= 1;
                    continue;
                }
                k += 1;
                v[k as usize] = q;
                z[k as usize] = s;
                z[k as usize + 1] = f64::INFINITY;
                break;
            }
        }
        if k < 0 {
            continue;
        }
        let mut j = 0usize;
        for q in 0..width {
            let qf = q as f64;
            while z[j + 1] < qf {
                j += 1;
            }
            let site_col = v[j];
            let dc = qf - site_col as f64;
            let i = shape.index(r, q);
            sq[i] = dc * dc + f(site_col);
            nearest[i] = Some(shape.index(col_row[shape.index(r, site_col)], site_col));
        }
    }
    DistanceField { shape, sq, nearest }
}

/// Distance from every pixel to the nearest pixel *outside* `mask`, treating
/// everything beyond the image border as outside.
pub fn distance_to_background(mask: &Mask) -> Vec<f64> {
    let Shape { height, width } = mask.shape();
    let padded = Mask::from_fn(width + 2, height + 2, |r, c| {
        r == 0 || c == 0 || r == height + 1 || c == width + 1 || !mask.get(r - 1, c - 1)
    });
    let field = distance_to_sites(&padded);
    let mut out = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            out.push(field.distance(r + 1, c + 1));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(sites: &Mask, r: usize, c: usize) -> f64 {
        sites
            .iter_set()
            .map(|(sr, sc)| {
                let dr = sr as f64 - r as f64;
                let dc = sc as f64 - c as f64;
                dr * dr + dc * dc
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn single_site() {
        let m = Mask::from_rows(&["00000", "00000", "00100", "00000", "00000"]);
        let d = distance_to_sites(&m);
        assert_eq!(d.squared(0, 0), 8.0);
        assert_eq!(d.squared(2, 0), 4.0);
        assert_eq!(d.nearest(4, 4), Some((2, 2)));
    }

    #[test]
    fn no_sites_is_infinite() {
        let d = distance_to_sites(&Mask::empty(4, 3));
        assert!(d.squared_data().iter().all(|v| v.is_infinite()));
        assert_eq!(d.nearest(1, 1), None);
    }

    #[test]
    fn matches_brute_force_on_patterns() {
        let m = Mask::from_fn(17, 11, |r, c| (r * 7 + c * 3) % 19 == 0 || (r == 5 && c > 12));
        let d = distance_to_sites(&m);
        for r in 0..11 {
            for c in 0..17 {
                assert_eq!(d.squared(r, c), brute(&m, r, c), "({r},{c})");
                let (nr, nc) = d.nearest(r, c).unwrap();
                assert!(m.get(nr, nc));
                let dr = nr as f64 - r as f64;
                let dc = nc as f64 - c as f64;
                assert_eq!(dr * dr + dc * dc, d.squared(r, c));
            }
        }
    }

    #[test]
    fn background_distance_of_bar() {
        let bar = Mask::from_fn(9, 5, |r, _| (1..=3).contains(&r));
        let d = distance_to_background(&bar);
        assert_eq!(d[2 * 9 + 4], 2.0);
        assert_eq!(d[9 + 4], 1.0);
        assert_eq!(d[0], 0.0);
    }
}

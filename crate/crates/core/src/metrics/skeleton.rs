//! Guo–Hall two-subiteration parallel thinning.
//!
//! Each subiteration marks every removable pixel against the current image
//! and then deletes them together. Removability is a lookup on the 8-bit
//! neighbourhood code. The method preserves 8-connectivity and keeps
//! two-pixel-thick diagonals, both of which Zhang–Suen gets wrong.

use crate::grid::{Grid, Mask, Shape};

// x1..x8 counter-clockwise from east, as (d_row, d_col); bit k of the code is x(k+1)
const RING: [(isize, isize); 8] = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)];

const fn bit(code: usize, k: usize) -> bool {
    (code >> (k % 8)) & 1 == 1
}

const fn removable(code: usize, first: bool) -> bool {
    // exactly one 8-connected run of neighbours
    let mut crossings = 0;
    let mut k = 0;
    while k < 8 {
        if !bit(code, k) && (bit(code, k + 1) || bit(code, k + 2)) {
            crossings += 1;
        }
        k += 2;
    }
    if crossings != 1 {
        return false;
    }
    // not an end point, not interior
    let (mut n1, mut n2) = (0, 0);
    let mut k = 1;
    while k < 8 {
        if bit(code, k - 1) || bit(code, k) {
            n1 += 1;
        }
        if bit(code, k) || bit(code, k + 1) {
            n2 += 1;
        }
        k += 2;
    }
    let n = if n1 < n2 { n1 } else { n2 };
    if n < 2 || n > 3 {
        return false;
    }
    if first {
        !((bit(code, 1) || bit(code, 2) || !bit(code, 7)) && bit(code, 0))
    } else {
        !((bit(code, 5) || bit(code, 6) || !bit(code, 3)) && bit(code, 4))
    }
}

const fn table(first: bool) -> [bool; 256] {
    let mut t = [false; 256];
    let mut code = 0;
    while code < 256 {
        t[code] = removable(code, first);
        code += 1;
    }
    t
}

const FIRST: [bool; 256] = table(true);
const SECOND: [bool; 256] = table(false);

/// Thins `mask` to a one-pixel-wide, 8-connected skeleton.
pub fn skeletonize(mask: &Mask) -> Mask {
    let shape = mask.shape();
    let Shape { height, width } = shape;
    let pw = width + 2;
    let mut img = vec![0u8; pw * (height + 2)];
    for (r, c) in mask.iter_set() {
        img[(r + 1) * pw + c + 1] = 1;
    }
    let offsets = RING.map(|(dr, dc)| dr * pw as isize + dc);
    let mut marked = Vec::new();
    loop {
        let mut changed = false;
        for lut in [&FIRST, &SECOND] {
            marked.clear();
            for r in 1..=height {
                for i in r * pw + 1..r * pw + 1 + width {
                    if img[i] == 0 {
                        continue;
                    }
                    let code = offsets.iter().enumerate().fold(0usize, |acc, (k, &o)| {
                        acc | ((img[(i as isize + o) as usize] as usize) << k)
                    });
                    if lut[code] {
                        marked.push(i);
                    }
                }
            }
            changed |= !marked.is_empty();
            for &i in &marked {
                img[i] = 0;
            }
        }
        if !changed {
            break;
        }
    }
    Mask::from_fn(width, height, |r, c| img[(r + 1) * pw + c + 1] != 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::morphology::count_components;

    #[test]
    fn fixed_points() {
        let single = Mask::from_rows(&["000", "010", "000"]);
        assert_eq!(skeletonize(&single), single);
        let empty = Mask::empty(6, 4);
        assert_eq!(skeletonize(&empty), empty);
    }

    #[test]
    fn solid_bar_thins_to_line() {
        let (w, h) = (54, 9);
        let bar = Mask::from_fn(w, h, |r, c| (2..7).contains(&r) && (2..52).contains(&c));
        let sk = skeletonize(&bar);
        assert_eq!(count_components(&sk), 1);
        let cols: Vec<usize> = (0..w).filter(|&c| (0..h).any(|r| sk.get(r, c))).collect();
        for &c in &cols {
            assert_eq!((0..h).filter(|&r| sk.get(r, c)).count(), 1, "column {c}");
        }
        let span = cols.last().unwrap() - cols.first().unwrap() + 1;
        assert!((50 - 4..=50).contains(&span), "span {span}");
        assert!(sk.iter_set().all(|(r, _)| r == 4));
    }

    #[test]
    fn two_by_two_block_keeps_a_pixel() {
        let block = Mask::from_rows(&["0000", "0110", "0110", "0000"]);
        let sk = skeletonize(&block);
        assert!(sk.count() >= 1);
        assert_eq!(count_components(&sk), 1);
    }

    #[test]
    fn thick_diagonal_stays_connected() {
        let m = Mask::from_fn(20, 20, |r, c| r == c || r == c + 1);
        let sk = skeletonize(&m);
        assert_eq!(count_components(&sk), 1);
        assert!(sk.count() >= 17, "diagonal eroded to {} pixels", sk.count());
        assert_eq!(skeletonize(&sk), sk);
    }

    #[test]
    fn idempotent_on_cross() {
        let m = Mask::from_fn(40, 40, |r, c| (15..24).contains(&r) || (12..19).contains(&c));
        let sk = skeletonize(&m);
        assert_eq!(skeletonize(&sk), sk);
        assert_eq!(count_components(&sk), 1);
    }
}

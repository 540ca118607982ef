use crate::grid::{Grid, Mask};
use crate::metrics::edt::distance_to_sites;

/// Number of 8-connected foreground components.
pub fn count_components(mask: &Mask) -> usize {
    label_components(mask).1
}

/// 8-connected labels (0 = background, components numbered from 1 in raster
/// order of their first pixel) and the component count.
pub fn label_components(mask: &Mask) -> (Vec<u32>, usize) {
    let shape = mask.shape();
    let mut labels = vec![0u32; shape.len()];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for (r, c) in mask.iter_set() {
        if labels[shape.index(r, c)] != 0 {
            continue;
        }
        next += 1;
        labels[shape.index(r, c)] = next;
        stack.push((r, c));
        while let Some((pr, pc)) = stack.pop() {
            for dr in -1..=1 {
                for dc in -1..=1 {
                    if let Some((nr, nc)) = shape.offset(pr, pc, dr, dc) {
                        let i = shape.index(nr, nc);
                        if mask.get(nr, nc) && labels[i] == 0 {
                            labels[i] = next;
                            stack.push((nr, nc));
                        }
                    }
                }
            }
        }
    }
    (labels, next as usize)
}

/// Pixels within Euclidean distance `radius` of the foreground.
pub fn dilate_disk(mask: &Mask, radius: f64) -> Mask {
    if radius <= 0.0 {
        return mask.clone();
    }
    let field = distance_to_sites(mask);
    let r2 = radius * radius;
    Mask::from_fn(mask.width(), mask.height(), |r, c| field.squared(r, c) <= r2)
}

//! Connected-component cleanup for predicted masks.

use crate::imaging::BinaryMask;

/// Keeps only the largest 4-connected true component.
///
/// Predicted masks often carry speckle; geometry runs on the main blob. Ties
/// resolve to the component found first in scan order. An empty mask passes
/// through unchanged.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h]; // 0 = unvisited/background
    let mut best_label = 0u32;
    let mut best_size = 0usize;
    let mut next = 1u32;
    let mut stack = Vec::new();

    for start in 0..w * h {
        if !mask.data()[start] || labels[start] != 0 {
            continue;
        }
        let label = next;
        next += 1;
        let mut size = 0usize;
        stack.push(start);
        labels[start] = label;
        while let Some(idx) = stack.pop() {
            size += 1;
            let (x, y) = (idx % w, idx / w);
            let mut visit = |nx: usize, ny: usize| {
                let nidx = ny * w + nx;
                if mask.data()[nidx] && labels[nidx] == 0 {
                    labels[nidx] = label;
                    stack.push(nidx);
                }
            };
            if x > 0 {
                visit(x - 1, y);
            }
            if x + 1 < w {
                visit(x + 1, y);
            }
            if y > 0 {
                visit(x, y - 1);
            }
            if y + 1 < h {
                visit(x, y + 1);
            }
        }
        if size > best_size {
            best_size = size;
            best_label = label;
        }
    }

    let data = labels.iter().map(|&l| l != 0 && l == best_label).collect();
    BinaryMask::new(w, h, data).expect("same dims")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask_from_rows(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        let data = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| c == '#'))
            .collect();
        BinaryMask::new(w, h, data).unwrap()
    }

    #[test]
    fn single_blob_is_unchanged() {
        let m = mask_from_rows(&["....", ".##.", ".##.", "...."]);
        assert_eq!(largest_component(&m), m);
    }

    #[test]
    fn speck_is_removed() {
        let m = mask_from_rows(&["#....#", "###..#", "###...", "......"]);
        let out = largest_component(&m);
        assert_eq!(out.count_true(), 7);
        assert!(!out.get(5, 0));
        assert!(!out.get(5, 1));
        assert!(out.get(0, 0));
    }

    #[test]
    fn empty_mask_passes_through() {
        let m = BinaryMask::empty(5, 5);
        assert_eq!(largest_component(&m).count_true(), 0);
    }

    #[test]
    fn diagonal_touching_is_not_connected() {
        let m = mask_from_rows(&["#.", ".#"]);
        let out = largest_component(&m);
        assert_eq!(out.count_true(), 1);
        assert!(out.get(0, 0), "first component in scan order wins the tie");
    }
}

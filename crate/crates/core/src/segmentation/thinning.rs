//! Zhang-Suen thinning.
//!
//! Each iteration runs two subpasses. A subpass first marks candidates by
//! looking only at the previous generation, exactly as in the classic
//! parallel formulation. The marks are then committed in raster order,
//! and a mark is dropped if, given the deletions already committed, the
//! pixel has fewer than two foreground neighbours or its neighbours no
//! longer form a single run. Without that check two-pixel-thick
//! structures (a 2x2 block, a thick diagonal) are erased or split
//! outright.

use super::BinaryImage;

/// Neighbour offsets P2..P9, clockwise from north.
const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ThinningStats {
    pub iterations: usize,
    pub removed: usize,
}

#[inline]
fn ring(bin: &BinaryImage, x: usize, y: usize) -> [bool; 8] {
    let mut n = [false; 8];
    for (v, (dx, dy)) in n.iter_mut().zip(RING) {
        *v = bin.get_or_false(x as isize + dx, y as isize + dy);
    }
    n
}

/// `B(P)`: foreground neighbours.
#[inline]
fn occupancy(n: &[bool; 8]) -> usize {
    n.iter().filter(|&&b| b).count()
}

/// `A(P)`: background-to-foreground transitions around the ring.
#[inline]
fn transitions(n: &[bool; 8]) -> usize {
    (0..8).filter(|&i| !n[i] && n[(i + 1) % 8]).count()
}

fn is_candidate(n: &[bool; 8], first: bool) -> bool {
    let [p2, _, p4, _, p6, _, p8, _] = *n;
    let b = occupancy(n);
    if !(2..=6).contains(&b) || transitions(n) != 1 {
        return false;
    }
    if first {
        !(p2 && p4 && p6) && !(p4 && p6 && p8)
    } else {
        !(p2 && p4 && p8) && !(p2 && p6 && p8)
    }
}

fn subpass(bin: &mut BinaryImage, first: bool, marks: &mut Vec<(usize, usize)>) -> usize {
    marks.clear();
    let (w, h) = bin.dimensions();
    for y in 0..h {
        for x in 0..w {
            if bin.get(x, y) && is_candidate(&ring(bin, x, y), first) {
                marks.push((x, y));
            }
        }
    }
    let mut removed = 0;
    for &(x, y) in marks.iter() {
        let n = ring(bin, x, y);
        if occupancy(&n) >= 2 && transitions(&n) == 1 {
            bin.set(x, y, false);
            removed += 1;
        }
    }
    removed
}

/// Thins foreground regions to one-pixel-wide, 8-connected curves.
pub fn thin(bin: &BinaryImage) -> BinaryImage {
    thin_with_stats(bin).0
}

pub fn thin_with_stats(bin: &BinaryImage) -> (BinaryImage, ThinningStats) {
    let mut out = bin.clone();
    let mut stats = ThinningStats::default();
    let mut marks = Vec::new();
    loop {
        stats.iterations += 1;
        let removed = subpass(&mut out, true, &mut marks) + subpass(&mut out, false, &mut marks);
        stats.removed += removed;
        if removed == 0 {
            break;
        }
    }
    (out, stats)
}

use crate::grid::{Electrode, GridSpec};

/// Points per edge direction for an `I x J x K` box (in grid intervals) at
/// `density` seeds per `h^2`, rounded to nearest and floored at `clamp_min`.
pub fn seed_counts(i: f64, j: f64, k: f64, density: f64, clamp_min: usize) -> [usize; 3] {
    seed_counts_raw(i, j, k, density).map(|n| ((n + 0.5).floor() as usize).max(clamp_min))
}

/// Real-valued positive root per axis, before rounding. A negative
/// square-root operand (density below the 8-vertex density) is clamped to 0.
pub fn seed_counts_raw(i: f64, j: f64, k: f64, density: f64) -> [f64; 3] {
    let s = i * j + j * k + i * k;
    let p = i + j + k;
    let rho8 = 4.0 / s;
    let rho_min = rho8 - (p / s).powi(2);
    let base = p * rho8 / 4.0 + (density - rho_min).max(0.0).sqrt();
    [i * base, j * base, k * base]
}

/// Total seeds on a box with `n` points per edge direction.
pub fn seed_total(n: [usize; 3]) -> usize {
    let m = n.map(|v| v as isize - 2);
    (8 + 4 * (m[0] + m[1] + m[2]) + 2 * (m[0] * m[1] + m[1] * m[2] + m[0] * m[2])) as usize
}

/// Seeds on the surface of `e`: face interiors first, then edge interiors,
/// then the 8 vertices. No position repeats.
pub fn generate_seeds(e: &Electrode, grid: &GridSpec, density: f64) -> Vec<[f64; 3]> {
    let iv = e.bounds.intervals().map(|v| v as f64);
    let n = seed_counts(iv[0], iv[1], iv[2], density, 3);
    seeds_with_counts(e, grid, n)
}

/// Seed lattice for explicit per-axis counts (each at least 2).
pub fn seeds_with_counts(e: &Electrode, grid: &GridSpec, n: [usize; 3]) -> Vec<[f64; 3]> {
    let n = n.map(|v| v.max(2));
    let (lo, hi) = e.physical_box(grid.h);
    let coord = |a: usize, t: usize| -> f64 {
        if t + 1 == n[a] {
            hi[a]
        } else {
            lo[a] + (hi[a] - lo[a]) * t as f64 / (n[a] - 1) as f64
        }
    };
    let mut out = Vec::with_capacity(seed_total(n));

    // face interiors
    for a in 0..3 {
        let (u, v) = ((a + 1) % 3, (a + 2) % 3);
        for side in [lo[a], hi[a]] {
            for tv in 1..n[v] - 1 {
                for tu in 1..n[u] - 1 {
                    let mut p = [0.0; 3];
                    p[a] = side;
                    p[u] = coord(u, tu);
                    p[v] = coord(v, tv);
                    out.push(p);
                }
            }
        }
    }
    // edge interiors: 4 edges along each axis
    for a in 0..3 {
        let (u, v) = ((a + 1) % 3, (a + 2) % 3);
        for pv in [lo[v], hi[v]] {
            for pu in [lo[u], hi[u]] {
                for t in 1..n[a] - 1 {
                    let mut p = [0.0; 3];
                    p[a] = coord(a, t);
                    p[u] = pu;
                    p[v] = pv;
                    out.push(p);
                }
            }
        }
    }
    for corner in 0..8 {
        out.push([0, 1, 2].map(|a| if corner >> a & 1 == 1 { hi[a] } else { lo[a] }));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::IndexBox;

    #[test]
    fn cube_at_vertex_density() {
        let rho8 = 4.0 / 300.0;
        assert_eq!(seed_counts(10.0, 10.0, 10.0, rho8, 2), [2, 2, 2]);
        assert_eq!(seed_counts(10.0, 10.0, 10.0, rho8, 3), [3, 3, 3]);
        let raw = seed_counts_raw(10.0, 10.0, 10.0, rho8);
        assert!(raw.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn elongated_box() {
        let raw = seed_counts_raw(30.0, 10.0, 10.0, 0.02);
        assert!((raw[0] - 6.32).abs() < 0.01, "{raw:?}");
        assert!((raw[1] - 2.107).abs() < 0.01, "{raw:?}");
        assert_eq!(seed_counts(30.0, 10.0, 10.0, 0.02, 3), [6, 3, 3]);
    }

    #[test]
    fn low_density_is_clamped() {
        assert_eq!(seed_counts(10.0, 10.0, 10.0, 1e-6, 3), [3, 3, 3]);
    }

    #[test]
    fn corners_only_and_cube_26() {
        let g = GridSpec::new(20, 20, 20, 0.5).unwrap();
        let e = Electrode::anode(IndexBox::new([2, 2, 2], [6, 6, 6]), 1.0);
        let s = seeds_with_counts(&e, &g, [2, 2, 2]);
        assert_eq!(s.len(), 8);
        assert!(s.iter().all(|p| p.iter().all(|c| *c == 1.0 || *c == 3.0)));
        let s = seeds_with_counts(&e, &g, [3, 3, 3]);
        assert_eq!(s.len(), 26);
        assert_eq!(seed_total([3, 3, 3]), 26);
        // first six are face centres
        assert_eq!(s[0], [1.0, 2.0, 2.0]);
    }

    #[test]
    fn no_duplicates() {
        let g = GridSpec::new(40, 20, 20, 0.01).unwrap();
        let e = Electrode::anode(IndexBox::new([3, 2, 4], [30, 12, 9]), 1.0);
        let s = seeds_with_counts(&e, &g, [7, 4, 5]);
        assert_eq!(s.len(), seed_total([7, 4, 5]));
        let mut keys: Vec<[u64; 3]> = s.iter().map(|p| p.map(f64::to_bits)).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), s.len());
    }
}

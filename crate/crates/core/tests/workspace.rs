use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use prmrl::seed;
use prmrl::workspace::{maze, CellLabel, ConfigPoint, OccupancyGrid, Raster};

fn blocks_grid(inflation: f64, blocks: &[(usize, usize, usize, usize)]) -> OccupancyGrid {
    let (w, h) = (60, 40);
    let mut mask = vec![false; w * h];
    for &(x0, y0, bw, bh) in blocks {
        for y in y0..(y0 + bh).min(h) {
            for x in x0..(x0 + bw).min(w) {
                mask[y * w + x] = true;
            }
        }
    }
    OccupancyGrid::from_obstacles(w, h, 0.1, (-1.0, 2.0), inflation, &mask).unwrap()
}

fn block_strategy() -> impl Strategy<Value = Vec<(usize, usize, usize, usize)>> {
    prop::collection::vec((0usize..60, 0usize..40, 1usize..8, 1usize..8), 0..6)
}

fn point_strategy() -> impl Strategy<Value = ConfigPoint> {
    (-1.5f64..5.5, 1.5f64..6.5).prop_map(|(x, y)| ConfigPoint::planar(x, y))
}

proptest! {
    #[test]
    fn free_points_are_inside(blocks in block_strategy(), p in point_strategy()) {
        let g = blocks_grid(0.2, &blocks);
        prop_assert!(!g.is_free(&p) || g.contains(&p));
    }

    #[test]
    fn segments_are_symmetric(blocks in block_strategy(), a in point_strategy(), b in point_strategy()) {
        let g = blocks_grid(0.2, &blocks);
        prop_assert_eq!(g.segment_free(&a, &b, 0.05).unwrap(), g.segment_free(&b, &a, 0.05).unwrap());
    }

    #[test]
    fn raycast_is_monotone_in_range(
        blocks in block_strategy(),
        bearing in -3.2f64..3.2,
        r1 in 0.0f64..8.0,
        r2 in 0.0f64..8.0,
    ) {
        let g = blocks_grid(0.0, &blocks);
        let origin = ConfigPoint::planar(2.0, 4.0);
        prop_assume!(g.label_at(&origin) != Some(CellLabel::Obstacle));
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let a = g.raycast(&origin, bearing, lo).unwrap();
        let b = g.raycast(&origin, bearing, hi).unwrap();
        prop_assert!(a <= b);
        let truth = g.raycast(&origin, bearing, 100.0).unwrap();
        if lo > truth {
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn inflation_never_frees_cells(blocks in block_strategy(), r1 in 0.0f64..0.6, r2 in 0.0f64..0.6) {
        let (lo, hi) = (r1.min(r2), r1.max(r2));
        let a = blocks_grid(lo, &blocks);
        let b = blocks_grid(hi, &blocks);
        for (x, y) in a.cells().iter().zip(b.cells()) {
            prop_assert!(*x == CellLabel::Free || *y != CellLabel::Free);
        }
    }
}

#[test]
fn segments_match_supersampled_oracle() {
    let g = blocks_grid(0.25, &[(10, 5, 6, 20), (30, 20, 12, 4), (45, 3, 3, 3), (22, 30, 2, 8)]);
    let step = 0.05;
    let mut rng = seed::rng(0);
    let mut blocked = 0;
    for _ in 0..100 {
        let a = ConfigPoint::planar(rng.random_range(-1.0..5.0), rng.random_range(2.0..6.0));
        let b = ConfigPoint::planar(rng.random_range(-1.0..5.0), rng.random_range(2.0..6.0));
        let fine = step / 16.0;
        let n = (a.distance(&b) / fine).ceil().max(1.0) as usize;
        let oracle = (0..=n).all(|i| g.is_free(&a.lerp(&b, i as f64 / n as f64)));
        assert_eq!(g.segment_free(&a, &b, step).unwrap(), oracle, "segment {a:?} -> {b:?}");
        blocked += !oracle as u32;
    }
    assert!(blocked > 10, "fixture should block a good share of segments");
}

fn chi_square_p(counts: &[usize], expected: &[f64]) -> f64 {
    let stat: f64 = counts.iter().zip(expected).map(|(c, e)| (*c as f64 - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn open_grid_sampling_is_uniform_over_quadrants() {
    let g = OccupancyGrid::from_obstacles(50, 30, 0.2, (1.0, -2.0), 0.3, &vec![false; 50 * 30]).unwrap();
    let (w, h) = g.extent();
    let (cx, cy) = (1.0 + w / 2.0, -2.0 + h / 2.0);
    let n = 10_000;
    let mut counts = [0usize; 4];
    let mut rng = seed::rng(3);
    for _ in 0..n {
        let p = g.sample_free(&mut rng).unwrap();
        counts[(p.x >= cx) as usize + 2 * (p.y >= cy) as usize] += 1;
    }
    let p = chi_square_p(&counts, &[n as f64 / 4.0; 4]);
    assert!(p > 0.01, "counts {counts:?}, p = {p:.3e}");
}

#[test]
fn maze_sampling_follows_free_area() {
    let spec = maze::MazeSpec::new(8, 10.0, 10.0, 2.5);
    let raster: Raster = maze::generate(&spec).unwrap();
    let g = OccupancyGrid::load(&raster, spec.resolution, 0.35).unwrap();
    let bins = 4;
    let bin_of = |p: &ConfigPoint| {
        let (w, h) = g.extent();
        let bx = ((p.x / w * bins as f64) as usize).min(bins - 1);
        let by = ((p.y / h * bins as f64) as usize).min(bins - 1);
        by * bins + bx
    };
    let mut free_per_bin = vec![0usize; bins * bins];
    for cy in 0..g.height() {
        for cx in 0..g.width() {
            if g.label(cx, cy) == CellLabel::Free {
                free_per_bin[bin_of(&g.cell_center(cx, cy))] += 1;
            }
        }
    }
    let n = 20_000;
    let mut counts = vec![0usize; bins * bins];
    let mut rng = seed::rng(4);
    for _ in 0..n {
        let p = g.sample_free(&mut rng).unwrap();
        assert!(g.is_free(&p));
        counts[bin_of(&p)] += 1;
    }
    let total: usize = free_per_bin.iter().sum();
    let (mut c, mut e) = (Vec::new(), Vec::new());
    for (k, f) in counts.iter().zip(&free_per_bin) {
        if *f == 0 {
            assert_eq!(*k, 0);
        } else {
            c.push(*k);
            e.push(n as f64 * *f as f64 / total as f64);
        }
    }
    let p = chi_square_p(&c, &e);
    assert!(p > 0.01, "p = {p:.3e}");
}

#[test]
fn maze_is_reproducible_and_connected_enough_to_sample() {
    let spec = maze::MazeSpec::new(1, 20.0, 20.0, 2.5);
    let a = maze::generate(&spec).unwrap();
    assert_eq!(a, maze::generate(&spec).unwrap());
    let g = OccupancyGrid::load(&a, spec.resolution, 0.35).unwrap();
    assert!(g.free_area() > 150.0 && g.free_area() < 400.0);
}

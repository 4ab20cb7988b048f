mod common;

use common::*;
use proptest::prelude::*;
use terracover::data::{split_dataset, LandCoverClass, SplitRatios};
use terracover::scanner::plan_tiling;
use terracover::stats::{class_shares, Region};
use terracover::tensor::{col2im, im2col, ConvGeometry};
use terracover::{ClassificationMatrix, Rng};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_is_associative(m in 1usize..12, k in 1usize..12, l in 1usize..12, n in 1usize..12, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let a = random(&[m, k], &mut rng);
        let b = random(&[k, l], &mut rng);
        let c = random(&[l, n], &mut rng);
        let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
        let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) < 1e-4);
    }

    #[test]
    fn col2im_is_the_adjoint_of_im2col(
        n in 1usize..3, c in 1usize..4, h in 3usize..9, w in 3usize..9,
        k in 1usize..4, stride in 1usize..3, pad in 0usize..2, seed in any::<u64>(),
    ) {
        let mut rng = Rng::new(seed);
        let g = ConvGeometry::new(k, k, stride, pad);
        let x = random(&[n, c, h, w], &mut rng);
        let cols = im2col(&x, g).unwrap();
        let y = random(cols.shape(), &mut rng);
        let lhs = cols.dot(&y).unwrap();
        let rhs = x.dot(&col2im(&y, x.shape(), g).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-5 * (1.0 + lhs.abs()));
    }

    #[test]
    fn split_is_a_stratified_partition(counts in prop::collection::vec(10usize..60, 1..10), seed in any::<u64>()) {
        let labels: Vec<LandCoverClass> = counts
            .iter()
            .enumerate()
            .flat_map(|(i, &n)| std::iter::repeat_n(LandCoverClass::from_index(i).unwrap(), n))
            .collect();
        let total = labels.len();
        let s = split_dataset(labels, SplitRatios::default(), seed).unwrap();
        prop_assert_eq!(s.train.len() + s.validation.len() + s.test.len(), total);
        for (i, &n) in counts.iter().enumerate() {
            let class = LandCoverClass::from_index(i).unwrap();
            let cnt = |v: &[LandCoverClass]| v.iter().filter(|&&l| l == class).count();
            prop_assert_eq!(cnt(&s.test), n / 10);
            prop_assert_eq!(cnt(&s.validation), n / 10);
            prop_assert_eq!(cnt(&s.train), n - 2 * (n / 10));
        }
    }

    #[test]
    fn tiling_covers_the_image_exactly(width in 64usize..3000, height in 64usize..3000) {
        let p = plan_tiling(width, height).unwrap();
        prop_assert_eq!((p.cols(), p.rows()), (width / 64, height / 64));
        let area: usize = p.tiles().map(|t| t.width * t.height).sum();
        prop_assert_eq!(area, width * height);
        for (ext, dim) in [(p.col_extents(), width), (p.row_extents(), height)] {
            prop_assert_eq!(ext.iter().sum::<usize>(), dim);
            let (lo, hi) = (*ext.iter().min().unwrap(), *ext.iter().max().unwrap());
            let n = dim / 64;
            if n >= dim - 64 * n {
                prop_assert!(hi - lo <= 1);
            } else {
                prop_assert!(hi - lo <= 64);
            }
        }
        // Adjacent tiles share edges: no gaps, no overlap.
        let mut covered = vec![0u8; width];
        for c in 0..p.cols() {
            let t = p.tile(0, c);
            covered[t.x..t.x + t.width].iter_mut().for_each(|v| *v += 1);
        }
        prop_assert!(covered.iter().all(|&v| v == 1));
    }

    #[test]
    fn shares_match_the_counting_oracle(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = random_matrix(rows, cols, &mut rng);
        let r0 = rng.below(rows);
        let r1 = r0 + 1 + rng.below(rows - r0);
        let c0 = rng.below(cols);
        let c1 = c0 + 1 + rng.below(cols - c0);
        let report = class_shares(&m, Some(Region { r0, r1, c0, c1 }), &[]).unwrap();
        let oracle = oracle_counts(&m, r0, r1, c0, c1);
        for c in LandCoverClass::ALL {
            prop_assert_eq!(report.count(c), oracle[c.index()]);
        }
        let sum: f64 = report.classes.iter().filter_map(|c| c.share).sum();
        prop_assert!((sum - 100.0).abs() < 1e-9);
    }

    #[test]
    fn counts_are_additive_over_sub_regions(rows in 2usize..12, cols in 1usize..12, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = random_matrix(rows, cols, &mut rng);
        let cut = 1 + rng.below(rows - 1);
        let full = class_shares(&m, None, &[]).unwrap();
        let top = class_shares(&m, Some(Region { r0: 0, r1: cut, c0: 0, c1: cols }), &[]).unwrap();
        let bottom = class_shares(&m, Some(Region { r0: cut, r1: rows, c0: 0, c1: cols }), &[]).unwrap();
        for c in LandCoverClass::ALL {
            prop_assert_eq!(full.count(c), top.count(c) + bottom.count(c));
        }
    }

    #[test]
    fn exclusion_equals_deleting_cells(len in 1usize..80, mask in 1u16..1023, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = random_matrix(1, len, &mut rng);
        let exclude: Vec<LandCoverClass> = LandCoverClass::ALL.into_iter().filter(|c| mask & (1 << c.index()) != 0).collect();
        let kept: Vec<LandCoverClass> = m.labels().iter().copied().filter(|l| !exclude.contains(l)).collect();
        let with = class_shares(&m, None, &exclude);
        if kept.is_empty() {
            prop_assert!(with.is_err());
        } else {
            let with = with.unwrap();
            let without = class_shares(&ClassificationMatrix::from_labels(1, kept.len(), kept).unwrap(), None, &[]).unwrap();
            for c in LandCoverClass::ALL {
                if exclude.contains(&c) {
                    prop_assert_eq!(with.share(c), None);
                } else {
                    prop_assert_eq!(with.share(c), without.share(c));
                }
            }
        }
    }

    #[test]
    fn adding_a_cell_never_lowers_its_count(len in 1usize..50, class in 0usize..10, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let m = random_matrix(1, len, &mut rng);
        let k = LandCoverClass::from_index(class).unwrap();
        let mut labels = m.labels().to_vec();
        labels.push(k);
        let bigger = ClassificationMatrix::from_labels(1, len + 1, labels).unwrap();
        let before = class_shares(&m, None, &[]).unwrap().count(k);
        prop_assert_eq!(class_shares(&bigger, None, &[]).unwrap().count(k), before + 1);
    }

    #[test]
    fn matrix_json_round_trips(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let labels = random_matrix(rows, cols, &mut rng).labels().to_vec();
        let conf = (0..rows * cols).map(|_| rng.uniform(0.0, 1.0) as f32).collect();
        let m = ClassificationMatrix::new("x.png", rows, cols, labels, conf).unwrap();
        prop_assert_eq!(ClassificationMatrix::from_json(&m.to_json().unwrap()).unwrap(), m);
    }
}

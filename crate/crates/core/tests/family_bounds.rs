use polymer_ldp_core::gamma::links_are_nearest_neighbour;
use polymer_ldp_core::PathFamily;

#[test]
fn counting_bounds_exhaustive() {
    for (d, max_t) in [(1usize, 128usize), (2, 32)] {
        let family = PathFamily::build(d, max_t).unwrap();
        assert!(links_are_nearest_neighbour(&family));
        for tp in 1..=max_t {
            let report = family.verify_counting_bounds(tp).unwrap();
            assert!(report.passed(), "d={d} t'={tp}: {:?}", &report.violations[..report.violations.len().min(5)]);
        }
    }
}

#[test]
fn checkpoints_and_cube_sizes() {
    for (d, max_k) in [(1usize, 7u32), (2, 4)] {
        let sigma = |k: u32| d * ((1usize << k) - 1);
        let family = PathFamily::build(d, sigma(max_k)).unwrap();
        for k in 0..=max_k {
            assert_eq!(family.checkpoints()[k as usize], sigma(k));
            let s = family.frontier(sigma(k));
            assert_eq!(s.len(), 1usize << (d as u32 * k));
            for c in 0..d {
                let mut side: Vec<i32> = s.iter().map(|x| x[c]).collect();
                side.sort();
                side.dedup();
                assert_eq!(side.len(), 1usize << k, "side length in coordinate {c}");
            }
        }
    }
}

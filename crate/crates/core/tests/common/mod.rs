//! Seeded instance generators shared by the integration tests.

#![allow(dead_code)]

use listcolour::instance::{Colour, Colouring, Instance};
use listcolour::solver::decide;
use listcolour::transforms::classify_colours;
use rand::seq::SliceRandom;
pub use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random part sizes: `k` parts summing to `n`.
pub fn random_parts(rng: &mut TestRng, k: usize, n: usize) -> Vec<usize> {
    assert!(n >= k);
    let mut sizes = vec![1; k];
    for _ in k..n {
        let p = rng.gen_range(0..k);
        sizes[p] += 1;
    }
    sizes
}

/// Random lists with sizes in `min_len..=max_len` drawn from colours `1..=colours`.
pub fn random_lists(
    rng: &mut TestRng,
    n: usize,
    colours: u32,
    min_len: usize,
    max_len: usize,
) -> Vec<Vec<u32>> {
    let universe: Vec<u32> = (1..=colours).collect();
    (0..n)
        .map(|_| {
            let len = rng.gen_range(min_len..=max_len.min(colours as usize));
            let mut l: Vec<u32> = universe.choose_multiple(rng, len).copied().collect();
            l.sort_unstable();
            l
        })
        .collect()
}

pub fn random_instance(
    rng: &mut TestRng,
    k: usize,
    n: usize,
    colours: u32,
    min_len: usize,
    max_len: usize,
) -> Instance {
    let parts = random_parts(rng, k, n);
    let lists = random_lists(rng, n, colours, min_len, max_len);
    Instance::from_parts(&parts, &lists).unwrap()
}

/// A colourable instance with `n <= 2k+1` and lists of size at least `k`,
/// together with a near-acceptable colouring obtained by moving singletons
/// onto off-list frequent colours that no other vertex uses.
pub fn planted_near_acceptable(rng: &mut TestRng, k: usize) -> (Instance, Colouring) {
    loop {
        let n = if rng.gen_bool(0.7) {
            2 * k + 1
        } else {
            rng.gen_range(k..=2 * k + 1)
        };
        let colours = rng.gen_range(k as u32..=(2 * k) as u32);
        let inst = random_instance(rng, k, n, colours, k, k + 1);
        let Some(mut f) = decide(&inst).witness else {
            continue;
        };
        let report = classify_colours(&inst);
        let mut singletons = inst.structure().singletons();
        singletons.shuffle(rng);
        let mut planted = 0;
        for v in singletons {
            let used = f.used_colours();
            let current = f.get(v).unwrap();
            let options: Vec<Colour> = report
                .frequent
                .iter()
                .copied()
                .filter(|&c| !inst.has_colour(v, c) && (c == current || !used.contains(&c)))
                .collect();
            if let Some(&c) = options.choose(rng) {
                if rng.gen_bool(0.8) {
                    f.set(v, Some(c));
                    planted += 1;
                }
            }
        }
        if planted > 0 || rng.gen_bool(0.05) {
            return (inst, f);
        }
    }
}

/// `n = 2k+1`, lists of size `k` or `k+1`, at least `k` frequent colours,
/// at most `2k` colours, and disjoint lists on parts of size two.
pub fn proof_shaped(rng: &mut TestRng, k: usize) -> Instance {
    use listcolour::greedy::is_proof_shaped;
    loop {
        let colours = rng.gen_range(k as u32..=(2 * k) as u32);
        let inst = random_instance(rng, k, 2 * k + 1, colours, k, k + 1);
        if is_proof_shaped(&inst, &classify_colours(&inst)) {
            return inst;
        }
    }
}

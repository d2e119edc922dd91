//! Fixed instances shared by the benchmarks.

use listcolour::Instance;

/// The classic bad 2-assignment of K_{3,3}.
pub fn k33_bad() -> Instance {
    Instance::from_parts(&[3, 3], &[[1, 2], [1, 3], [2, 3], [1, 2], [1, 3], [2, 3]]).unwrap()
}

/// A colourable 3-partite instance on 7 vertices with 3-lists.
pub fn seven_vertex() -> Instance {
    Instance::from_parts(
        &[3, 1, 3],
        &[
            &[2, 3, 4][..],
            &[1, 2, 5],
            &[2, 4, 5],
            &[1, 2, 3, 4],
            &[3, 4, 5],
            &[1, 2, 4],
            &[2, 3, 5],
        ],
    )
    .unwrap()
}

/// A 6-partite instance on 13 vertices whose lists are 6-windows of a cyclic
/// palette, so colours overlap heavily between parts.
pub fn thirteen_vertex() -> Instance {
    let sizes = [1, 2, 2, 2, 3, 3];
    let lists: Vec<Vec<u32>> = (0..13u32)
        .map(|v| (0..6).map(|i| (3 * v + i) % 12 + 1).collect())
        .collect();
    Instance::from_parts(&sizes, &lists).unwrap()
}

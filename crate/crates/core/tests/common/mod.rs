//! Oracles shared by several test targets.

/// Rank by counting the kernel: `|{v : M v = 0}| = q^(K - rank)`.
pub fn exhaustive_rank(rows: &[Vec<u32>], k: usize, q: u32) -> usize {
    let total = (q as usize).pow(k as u32);
    let mut kernel = 0usize;
    let mut v = vec![0u32; k];
    for idx in 0..total {
        let mut r = idx;
        for x in v.iter_mut() {
            *x = (r % q as usize) as u32;
            r /= q as usize;
        }
        if rows.iter().all(|row| {
            row.iter()
                .zip(&v)
                .map(|(&a, &b)| u64::from(a) * u64::from(b))
                .sum::<u64>()
                % u64::from(q)
                == 0
        }) {
            kernel += 1;
        }
    }
    let mut dim = 0;
    let mut size = 1usize;
    while size < kernel {
        size *= q as usize;
        dim += 1;
    }
    assert_eq!(size, kernel, "kernel size must be a power of q");
    k - dim
}

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Per-class sample sizes summing to `round(n · fraction)`.
///
/// Each class first gets `round(size · fraction)`; the total is then pushed
/// to the target one unit at a time, adding to the classes whose rounding
/// lost the most and removing from those that gained the most.
pub fn stratified_counts(class_sizes: &[usize], fraction: f64) -> Vec<usize> {
    let n: usize = class_sizes.iter().sum();
    let target = (n as f64 * fraction).round() as usize;
    let mut counts: Vec<usize> = class_sizes.iter().map(|&c| (c as f64 * fraction).round() as usize).collect();
    let remainder = |k: usize, counts: &[usize]| class_sizes[k] as f64 * fraction - counts[k] as f64;
    loop {
        let total: usize = counts.iter().sum();
        if total == target {
            return counts;
        }
        let pick = if total < target {
            (0..counts.len())
                .filter(|&k| counts[k] < class_sizes[k])
                .max_by(|&a, &b| remainder(a, &counts).total_cmp(&remainder(b, &counts)).then(b.cmp(&a)))
        } else {
            (0..counts.len())
                .filter(|&k| counts[k] > 0)
                .min_by(|&a, &b| remainder(a, &counts).total_cmp(&remainder(b, &counts)).then(a.cmp(&b)))
        };
        let k = pick.expect("target lies between 0 and n");
        if total < target {
            counts[k] += 1;
        } else {
            counts[k] -= 1;
        }
    }
}

/// Splits `0..labels.len()` into `(rest, sample)` with the sample stratified
/// by class. Both lists are sorted.
pub fn stratified_split(labels: &[usize], n_classes: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction}")));
    }
    let mut members = vec![Vec::new(); n_classes];
    for (i, &y) in labels.iter().enumerate() {
        members
            .get_mut(y)
            .ok_or_else(|| Error::InvalidArgument(format!("label {y} outside {n_classes} classes")))?
            .push(i);
    }
    if let Some(k) = members.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!("class {k} has no members")));
    }
    let sizes: Vec<usize> = members.iter().map(Vec::len).collect();
    let counts = stratified_counts(&sizes, fraction);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rest = Vec::new();
    let mut sample = Vec::new();
    for (mut m, c) in members.into_iter().zip(counts) {
        m.shuffle(&mut rng);
        sample.extend_from_slice(&m[..c]);
        rest.extend_from_slice(&m[c..]);
    }
    rest.sort_unstable();
    sample.sort_unstable();
    Ok((rest, sample))
}

/// Unstratified version: a uniformly random `round(n · fraction)` sample.
pub fn random_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::InvalidArgument("nothing to split".into()));
    }
    stratified_split(&vec![0; n], 1, fraction, seed)
}

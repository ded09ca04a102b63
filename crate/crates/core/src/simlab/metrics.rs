use std::collections::BTreeMap;

use crate::error::{Error, Result};

const MAX_CLASSES: usize = 8;

fn check_lengths(a: usize, true_labels: &[usize], noise_mask: &[bool]) -> Result<()> {
    if a != true_labels.len() {
        return Err(Error::DimensionMismatch { expected: true_labels.len(), got: a });
    }
    if noise_mask.len() != true_labels.len() {
        return Err(Error::DimensionMismatch { expected: true_labels.len(), got: noise_mask.len() });
    }
    Ok(())
}

/// Maps arbitrary labels to dense indices in sorted order.
fn densify(labels: impl Iterator<Item = usize>) -> BTreeMap<usize, usize> {
    let mut map = BTreeMap::new();
    for l in labels {
        let next = map.len();
        map.entry(l).or_insert(next);
    }
    for (i, v) in map.values_mut().enumerate() {
        *v = i;
    }
    map
}

/// Confusion counts `[row][class]` over non-noise points plus the counted total.
fn confusion(
    rows: &[usize],
    n_rows: usize,
    true_labels: &[usize],
    noise_mask: &[bool],
) -> Result<(Vec<Vec<usize>>, BTreeMap<usize, usize>, usize)> {
    let classes = densify(true_labels.iter().zip(noise_mask).filter(|(_, &m)| !m).map(|(&t, _)| t));
    let mut counts = vec![vec![0usize; classes.len()]; n_rows];
    let mut total = 0;
    for ((&r, &t), &m) in rows.iter().zip(true_labels).zip(noise_mask) {
        if m {
            continue;
        }
        if r >= n_rows {
            return Err(Error::Labels(format!("label {r} out of range for {n_rows} groups")));
        }
        counts[r][classes[&t]] += 1;
        total += 1;
    }
    if total == 0 {
        return Err(Error::Labels("no non-noise points".into()));
    }
    Ok((counts, classes, total))
}

fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize])) {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    f(&perm);
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            f(&perm);
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

fn best_bijection(counts: &[Vec<usize>], total: usize) -> f64 {
    let mut best = 0usize;
    for_each_permutation(counts.len(), |p| {
        let hit: usize = p.iter().enumerate().map(|(r, &c)| counts[r][c]).sum();
        best = best.max(hit);
    });
    (total - best) as f64 / total as f64
}

/// Fraction of non-noise points wrongly clustered under the best bijection
/// between final labels and true classes.
pub fn misclassification_rate(final_labels: &[usize], true_labels: &[usize], noise_mask: &[bool]) -> Result<f64> {
    check_lengths(final_labels.len(), true_labels, noise_mask)?;
    let finals = densify(final_labels.iter().zip(noise_mask).filter(|(_, &m)| !m).map(|(&f, _)| f));
    let rows: Vec<usize> = final_labels.iter().map(|f| finals.get(f).copied().unwrap_or(usize::MAX)).collect();
    let (counts, classes, total) = confusion(&rows, finals.len(), true_labels, noise_mask)?;
    if finals.len() != classes.len() {
        return Err(Error::Labels(format!(
            "{} distinct final labels for {} true classes",
            finals.len(),
            classes.len()
        )));
    }
    if classes.len() > MAX_CLASSES {
        return Err(Error::Labels(format!("at most {MAX_CLASSES} classes supported")));
    }
    Ok(best_bijection(&counts, total))
}

/// Same as [`misclassification_rate`] for labels already in `0..n_final`;
/// empty final groups are allowed.
pub fn misclassification_indexed(
    final_labels: &[usize],
    n_final: usize,
    true_labels: &[usize],
    noise_mask: &[bool],
) -> Result<f64> {
    check_lengths(final_labels.len(), true_labels, noise_mask)?;
    let (mut counts, classes, total) = confusion(final_labels, n_final, true_labels, noise_mask)?;
    if n_final != classes.len() {
        if n_final < classes.len() {
            return Err(Error::Labels(format!("{n_final} final groups for {} true classes", classes.len())));
        }
        for row in counts.iter_mut() {
            row.resize(n_final, 0);
        }
    }
    if n_final > MAX_CLASSES {
        return Err(Error::Labels(format!("at most {MAX_CLASSES} classes supported")));
    }
    Ok(best_bijection(&counts, total))
}

/// Best misclassification over all groupings of `k` subclusters into the
/// true classes with every class receiving at least one subcluster.
pub fn min_misclassification(
    map_labels: &[usize],
    k: usize,
    true_labels: &[usize],
    noise_mask: &[bool],
) -> Result<f64> {
    check_lengths(map_labels.len(), true_labels, noise_mask)?;
    let (counts, classes, total) = confusion(map_labels, k, true_labels, noise_mask)?;
    let c = classes.len();
    if k < c {
        return Err(Error::Labels(format!("{k} subclusters cannot cover {c} classes")));
    }
    let majority: Vec<usize> = counts.iter().map(|r| r.iter().copied().max().unwrap_or(0)).collect();
    // cost[class][subcluster]: points lost by forcing the subcluster off its majority class
    let cost: Vec<Vec<f64>> =
        (0..c).map(|j| (0..k).map(|i| (majority[i] - counts[i][j]) as f64).collect()).collect();
    let repair = hungarian(&cost);
    let correct = majority.iter().sum::<usize>() as f64 - repair;
    Ok((total as f64 - correct) / total as f64)
}

/// Minimum-cost assignment of every row to a distinct column, `rows ≤ cols`.
fn hungarian(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    if n == 0 {
        return 0.0;
    }
    let m = cost[0].len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m).filter(|&j| p[j] != 0).map(|j| cost[p[j] - 1][j - 1]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exhaustive(counts: &[Vec<usize>], c: usize) -> usize {
        let k = counts.len();
        let mut best = 0;
        let mut assign = vec![0usize; k];
        loop {
            let mut seen = vec![false; c];
            for &a in &assign {
                seen[a] = true;
            }
            if seen.iter().all(|&s| s) {
                best = best.max(assign.iter().enumerate().map(|(i, &a)| counts[i][a]).sum());
            }
            let mut pos = 0;
            loop {
                if pos == k {
                    return best;
                }
                assign[pos] += 1;
                if assign[pos] < c {
                    break;
                }
                assign[pos] = 0;
                pos += 1;
            }
        }
    }

    fn expand(counts: &[Vec<usize>]) -> (Vec<usize>, Vec<usize>) {
        let mut map = Vec::new();
        let mut truth = Vec::new();
        for (i, row) in counts.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                map.extend(std::iter::repeat(i).take(n));
                truth.extend(std::iter::repeat(j).take(n));
            }
        }
        (map, truth)
    }

    #[test]
    fn permuted_labels_are_free() {
        let truth = vec![0, 0, 1, 1, 2, 2];
        let fin = vec![7, 7, 3, 3, 5, 5];
        assert_eq!(misclassification_rate(&fin, &truth, &[false; 6]).unwrap(), 0.0);
    }

    #[test]
    fn single_label_rejected() {
        let truth: Vec<usize> = (0..300).map(|i| i / 100).collect();
        assert!(misclassification_rate(&vec![0; 300], &truth, &vec![false; 300]).is_err());
    }

    #[test]
    fn two_class_confusion() {
        let (fin, truth) = expand(&[vec![50, 2], vec![3, 40]]);
        let r = misclassification_rate(&fin, &truth, &vec![false; fin.len()]).unwrap();
        assert!((r - 5.0 / 95.0).abs() < 1e-15);
    }

    #[test]
    fn noise_excluded() {
        let truth = vec![0, 0, 1, 1, 0];
        let fin = vec![0, 0, 1, 1, 1];
        let mask = vec![false, false, false, false, true];
        assert_eq!(misclassification_rate(&fin, &truth, &mask).unwrap(), 0.0);
        assert_eq!(min_misclassification(&fin, 2, &truth, &mask).unwrap(), 0.0);
    }

    #[test]
    fn mixed_subcluster() {
        let (map, truth) = expand(&[vec![50, 2, 0], vec![0, 40, 0], vec![0, 0, 30]]);
        let r = min_misclassification(&map, 3, &truth, &vec![false; map.len()]).unwrap();
        assert!((r - 2.0 / 122.0).abs() < 1e-15);
        assert!(min_misclassification(&map, 2, &truth, &vec![false; map.len()]).is_err());
    }

    #[test]
    fn repair_forces_surjectivity() {
        // Every subcluster prefers class 0; two must be moved.
        let counts = vec![vec![10, 9, 0], vec![10, 0, 1], vec![10, 0, 0], vec![10, 1, 1]];
        let (map, truth) = expand(&counts);
        let n = map.len();
        let r = min_misclassification(&map, 4, &truth, &vec![false; n]).unwrap();
        let want = (n - exhaustive(&counts, 3)) as f64 / n as f64;
        assert!((r - want).abs() < 1e-15);
    }

    #[test]
    fn matches_exhaustive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        while checked < 200 {
            let k = rng.gen_range(3..=12);
            let counts: Vec<Vec<usize>> = (0..k)
                .map(|_| {
                    let skew = rng.gen_range(0..3);
                    (0..3).map(|j| rng.gen_range(0..20) * if j == skew { 3 } else { 1 }).collect()
                })
                .collect();
            let (map, truth) = expand(&counts);
            let n = map.len();
            let classes = (0..3).filter(|&j| counts.iter().any(|r| r[j] > 0)).count();
            if classes < 3 {
                continue;
            }
            let r = min_misclassification(&map, k, &truth, &vec![false; n]).unwrap();
            let want = (n - exhaustive(&counts, 3)) as f64 / n as f64;
            assert!((r - want).abs() < 1e-12, "{counts:?}");
            checked += 1;
        }
    }

    #[test]
    fn lower_bound_on_groupings() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let k = rng.gen_range(3..=8);
            let counts: Vec<Vec<usize>> = (0..k).map(|_| (0..3).map(|_| rng.gen_range(1..15)).collect()).collect();
            let (map, truth) = expand(&counts);
            let n = map.len();
            let group: Vec<usize> = (0..k).map(|i| if i < 3 { i } else { rng.gen_range(0..3) }).collect();
            let fin: Vec<usize> = map.iter().map(|&s| group[s]).collect();
            let lo = min_misclassification(&map, k, &truth, &vec![false; n]).unwrap();
            let mis = misclassification_indexed(&fin, 3, &truth, &vec![false; n]).unwrap();
            assert!(mis >= lo - 1e-12);
        }
    }
}

//! Density-based clustering over a pairwise distance function.

use std::collections::BTreeMap;

/// Result of one clustering run: clusters sorted by their smallest member,
/// members sorted within each cluster, noise ids sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DbscanOutcome {
    pub clusters: Vec<Vec<String>>,
    pub noise: Vec<String>,
}

/// Standard density-based clustering. A point is core when at least
/// `min_pts` points (itself included) lie within distance `eps` inclusive.
/// Clusters are connected components of core points plus the border points
/// within `eps` of any member core; a border point reachable from several
/// clusters goes to the cluster containing the lexicographically smallest
/// such core id. Everything else is noise.
pub fn dbscan(ids: &[String], dist: impl Fn(usize, usize) -> f64, eps: f64, min_pts: usize) -> DbscanOutcome {
    let n = ids.len();
    if n == 0 {
        return DbscanOutcome {
            clusters: Vec::new(),
            noise: Vec::new(),
        };
    }

    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            let d = if i == j { 0.0 } else { dist(i.min(j), i.max(j)) };
            if d <= eps {
                neighbors[i].push(j);
            }
        }
    }
    let core: Vec<bool> = neighbors.iter().map(|ns| ns.len() >= min_pts).collect();

    // Connected components over core points.
    let mut component = vec![usize::MAX; n];
    let mut n_components = 0usize;
    for start in 0..n {
        if !core[start] || component[start] != usize::MAX {
            continue;
        }
        let comp = n_components;
        n_components += 1;
        let mut stack = vec![start];
        component[start] = comp;
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if core[j] && component[j] == usize::MAX {
                    component[j] = comp;
                    stack.push(j);
                }
            }
        }
    }

    // Border points: non-core within eps of a core. Pick the component of
    // the lexicographically smallest reachable core id.
    for i in 0..n {
        if core[i] || component[i] != usize::MAX {
            continue;
        }
        let mut choice: Option<(&String, usize)> = None;
        for &j in &neighbors[i] {
            if !core[j] {
                continue;
            }
            match choice {
                Some((best, _)) if *best <= ids[j] => {}
                _ => choice = Some((&ids[j], component[j])),
            }
        }
        if let Some((_, comp)) = choice {
            component[i] = comp;
        }
    }

    let mut by_component: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut noise = Vec::new();
    for i in 0..n {
        if component[i] == usize::MAX {
            noise.push(ids[i].clone());
        } else {
            by_component.entry(component[i]).or_default().push(ids[i].clone());
        }
    }
    let mut clusters: Vec<Vec<String>> = by_component
        .into_values()
        .map(|mut members| {
            members.sort();
            members
        })
        .collect();
    clusters.sort_by(|a, b| a[0].cmp(&b[0]));
    noise.sort();
    DbscanOutcome { clusters, noise }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i}")).collect()
    }

    #[test]
    fn all_identical_points_form_one_cluster() {
        let out = dbscan(&ids(4), |_, _| 0.0, 0.3, 2);
        assert_eq!(out.clusters.len(), 1);
        assert_eq!(out.clusters[0].len(), 4);
        assert!(out.noise.is_empty());
    }

    #[test]
    fn two_distant_points_are_noise() {
        let out = dbscan(&ids(2), |_, _| 1.0, 0.3, 2);
        assert!(out.clusters.is_empty());
        assert_eq!(out.noise.len(), 2);
    }

    #[test]
    fn chain_and_pair_split_into_two_clusters() {
        // a-b-c chained within eps, d-e within eps, everything else far.
        let names = ids(5);
        let d = |i: usize, j: usize| -> f64 {
            match (i, j) {
                (0, 1) | (1, 2) => 0.2,
                (0, 2) => 0.4,
                (3, 4) => 0.1,
                _ => 1.0,
            }
        };
        let out = dbscan(&names, d, 0.3, 2);
        assert_eq!(out.clusters.len(), 2);
        assert_eq!(out.clusters[0], vec!["u0", "u1", "u2"]);
        assert_eq!(out.clusters[1], vec!["u3", "u4"]);
        assert!(out.noise.is_empty());
    }

    #[test]
    fn min_pts_one_makes_everything_core() {
        let out = dbscan(&ids(3), |_, _| 1.0, 0.3, 1);
        assert_eq!(out.clusters.len(), 3);
        assert!(out.noise.is_empty());
    }

    #[test]
    fn border_point_prefers_smallest_core_id() {
        // Two tight 4-point cliques; u2 sits between them, within eps of
        // one core on each side but with too few neighbors to be core
        // itself. It must join the cluster of the smallest core id it can
        // reach, u1's.
        let clique_a = [0usize, 1, 5, 7];
        let clique_b = [3usize, 4, 6, 8];
        let d = move |i: usize, j: usize| -> f64 {
            if clique_a.contains(&i) && clique_a.contains(&j) {
                return 0.1;
            }
            if clique_b.contains(&i) && clique_b.contains(&j) {
                return 0.1;
            }
            match (i, j) {
                (1, 2) => 0.3,
                (2, 3) => 0.3,
                _ => 1.0,
            }
        };
        let out = dbscan(&ids(9), d, 0.3, 4);
        assert_eq!(out.clusters.len(), 2);
        assert_eq!(out.clusters[0], vec!["u0", "u1", "u2", "u5", "u7"]);
        assert_eq!(out.clusters[1], vec!["u3", "u4", "u6", "u8"]);
        assert!(out.noise.is_empty());
    }

    #[test]
    fn empty_input() {
        let out = dbscan(&[], |_, _| 0.0, 0.3, 2);
        assert!(out.clusters.is_empty() && out.noise.is_empty());
    }
}

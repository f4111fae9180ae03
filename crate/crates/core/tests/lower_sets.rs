use std::collections::BTreeSet;

use proptest::prelude::*;

use sensorfield::multiindex::{box_lower_set, is_lower_set, simplex_lower_set};
use sensorfield::{LowerSet, MultiIndex};

/// Downward closure of a few generators, enumerated by brute force over the
/// bounding box.
fn closure(m: usize, generators: &[Vec<u32>]) -> Vec<Vec<u32>> {
    let hi: Vec<u32> = (0..m)
        .map(|j| generators.iter().map(|g| g[j]).max().unwrap_or(0))
        .collect();
    box_points(&hi)
        .into_iter()
        .filter(|a| generators.iter().any(|g| dominated(a, g)))
        .collect()
}

fn box_points(hi: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for &h in hi {
        out = out
            .into_iter()
            .flat_map(|p: Vec<u32>| {
                (0..=h).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

fn dominated(a: &[u32], b: &[u32]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y)
}

fn lower_set_strategy() -> impl Strategy<Value = (usize, Vec<Vec<u32>>)> {
    (1usize..=3).prop_flat_map(|m| {
        (
            Just(m),
            prop::collection::vec(prop::collection::vec(0u32..=4, m), 1..=4),
        )
    })
}

fn to_set(v: &[MultiIndex]) -> BTreeSet<Vec<u32>> {
    v.iter().map(|a| a.exponents().to_vec()).collect()
}

fn build(elements: &[Vec<u32>]) -> LowerSet {
    LowerSet::new(elements.iter().cloned().map(MultiIndex::new).collect()).unwrap()
}

proptest! {
    #[test]
    fn border_matches_maximal_elements((m, gens) in lower_set_strategy()) {
        let elems = closure(m, &gens);
        let l = build(&elems);
        let oracle: BTreeSet<Vec<u32>> = elems
            .iter()
            .filter(|a| !elems.iter().any(|b| b != *a && dominated(a, b)))
            .cloned()
            .collect();
        prop_assert_eq!(to_set(&l.border()), oracle);
    }

    #[test]
    fn cover_matches_minimal_complement((m, gens) in lower_set_strategy()) {
        let elems = closure(m, &gens);
        let l = build(&elems);
        let members: BTreeSet<Vec<u32>> = elems.iter().cloned().collect();
        let hi: Vec<u32> = (0..m).map(|j| elems.iter().map(|a| a[j]).max().unwrap() + 1).collect();
        let oracle: BTreeSet<Vec<u32>> = box_points(&hi)
            .into_iter()
            .filter(|a| !members.contains(a))
            .filter(|a| {
                box_points(a)
                    .iter()
                    .all(|b| b == a || members.contains(b))
            })
            .collect();
        let cover = l.cover();
        prop_assert_eq!(to_set(&cover), oracle);
        for c in cover {
            let mut grown = l.elements().to_vec();
            grown.push(c);
            prop_assert!(is_lower_set(&grown).unwrap());
        }
    }

    #[test]
    fn successors_contain_cover((m, gens) in lower_set_strategy()) {
        let l = build(&closure(m, &gens));
        let succ = to_set(&l.successors());
        prop_assert!(to_set(&l.cover()).is_subset(&succ));
        for s in &succ {
            prop_assert!(!l.contains(&MultiIndex::new(s.clone())));
        }
    }

    #[test]
    fn elements_are_graded((m, gens) in lower_set_strategy()) {
        let l = build(&closure(m, &gens));
        let degrees: Vec<u32> = l.iter().map(MultiIndex::degree).collect();
        prop_assert!(degrees.windows(2).all(|w| w[0] <= w[1]));
        for (i, a) in l.iter().enumerate() {
            prop_assert_eq!(l.index_of(a), Some(i));
        }
    }

    #[test]
    fn removing_a_non_maximal_element_breaks_closure((m, gens) in lower_set_strategy()) {
        let l = build(&closure(m, &gens));
        let border = to_set(&l.border());
        for (i, a) in l.iter().enumerate() {
            let mut rest = l.elements().to_vec();
            rest.remove(i);
            if rest.is_empty() {
                continue;
            }
            let maximal = border.contains(a.exponents());
            prop_assert_eq!(is_lower_set(&rest).unwrap(), maximal);
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

#[test]
fn standard_shapes_have_expected_sizes() {
    for m in 1..=3usize {
        for k in 0..=4u32 {
            let b = box_lower_set(m, k).unwrap();
            assert_eq!(b.len(), (k as usize + 1).pow(m as u32));
            assert_eq!(b.max_exponent(), k);
            let s = simplex_lower_set(m, k).unwrap();
            assert_eq!(s.len() as u64, binomial(m as u64 + k as u64, m as u64));
            assert_eq!(s.max_degree(), k);
        }
    }
}

#[test]
fn rejects_sets_with_holes() {
    let holes = vec![MultiIndex::new(vec![0, 0]), MultiIndex::new(vec![2, 0])];
    assert!(LowerSet::new(holes).is_err());
    let mixed = vec![MultiIndex::new(vec![0, 0]), MultiIndex::new(vec![0])];
    assert!(LowerSet::new(mixed).is_err());
}

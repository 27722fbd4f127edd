//! Path-by-path d-separation, independent of the library's traversal.

use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub struct SmallDag {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl SmallDag {
    fn descendants(&self, v: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([v]);
        let mut stack = vec![v];
        while let Some(a) = stack.pop() {
            for &(from, to) in &self.edges {
                if from == a && seen.insert(to) {
                    stack.push(to);
                }
            }
        }
        seen
    }

    fn adjacent(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a, b)) || self.edges.contains(&(b, a))
    }

    /// Every simple path from `x` to `y` in the skeleton.
    pub fn simple_paths(&self, x: usize, y: usize) -> Vec<Vec<usize>> {
        fn walk(d: &SmallDag, path: &mut Vec<usize>, y: usize, out: &mut Vec<Vec<usize>>) {
            let last = *path.last().unwrap();
            if last == y {
                out.push(path.clone());
                return;
            }
            for next in 0..d.n {
                if d.adjacent(last, next) && !path.contains(&next) {
                    path.push(next);
                    walk(d, path, y, out);
                    path.pop();
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut vec![x], y, &mut out);
        out
    }

    pub fn path_open(&self, path: &[usize], zs: &BTreeSet<usize>) -> bool {
        path.windows(3).all(|w| {
            let (a, m, b) = (w[0], w[1], w[2]);
            let collider = self.edges.contains(&(a, m)) && self.edges.contains(&(b, m));
            if collider {
                self.descendants(m).iter().any(|d| zs.contains(d))
            } else {
                !zs.contains(&m)
            }
        })
    }

    pub fn separated(&self, xs: &BTreeSet<usize>, ys: &BTreeSet<usize>, zs: &BTreeSet<usize>) -> bool {
        xs.iter().all(|&x| {
            ys.iter()
                .all(|&y| self.simple_paths(x, y).iter().all(|p| !self.path_open(p, zs)))
        })
    }
}

pub fn label(i: usize) -> String {
    ((b'A' + i as u8) as char).to_string()
}

pub fn labels(set: &BTreeSet<usize>) -> Vec<String> {
    set.iter().map(|&i| label(i)).collect()
}

/// All subsets of `pool` as bitmask-enumerated sets.
pub fn subsets(pool: &[usize]) -> Vec<BTreeSet<usize>> {
    (0..1u32 << pool.len())
        .map(|mask| {
            pool.iter()
                .enumerate()
                .filter(|(i, _)| mask & (1 << i) != 0)
                .map(|(_, &v)| v)
                .collect()
        })
        .collect()
}

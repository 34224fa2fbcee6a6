//! Disjoint-set forest that tracks the smallest vertex id of each component.

#[derive(Clone, Debug)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
    oldest: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            oldest: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Smallest vertex id in the component rooted at `root`.
    pub(crate) fn oldest(&self, root: usize) -> usize {
        self.oldest[root]
    }

    /// Merges two roots; returns the surviving root.
    pub(crate) fn union_roots(&mut self, a: usize, b: usize) -> usize {
        debug_assert_ne!(a, b);
        let (keep, gone) = if self.rank[a] >= self.rank[b] {
            (a, b)
        } else {
            (b, a)
        };
        self.parent[gone] = keep;
        if self.rank[keep] == self.rank[gone] {
            self.rank[keep] = self.rank[keep].saturating_add(1);
        }
        self.oldest[keep] = self.oldest[keep].min(self.oldest[gone]);
        keep
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tracks_oldest_member() {
        let mut uf = UnionFind::new(5);
        let r = uf.union_roots(3, 4);
        assert_eq!(uf.oldest(r), 3);
        let (a, b) = (uf.find(1), uf.find(4));
        let r = uf.union_roots(a, b);
        assert_eq!(uf.oldest(r), 1);
        assert_eq!(uf.find(3), uf.find(1));
        assert_ne!(uf.find(0), uf.find(1));
    }
}

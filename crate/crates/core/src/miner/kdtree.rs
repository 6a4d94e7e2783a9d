//! Bucketed k-d tree over embedding points with per-subtree live counts,
//! used to find the minimum-variance candidate without scanning the pool.

use crate::mds::Embedding;

use super::grow::within_tie;

const LEAF: usize = 8;
const NONE: usize = usize::MAX;

#[derive(Debug)]
enum Kind {
    Leaf(Vec<usize>),
    Split(usize, usize),
}

#[derive(Debug)]
struct Node {
    lo: Vec<f64>,
    hi: Vec<f64>,
    live: usize,
    parent: usize,
    kind: Kind,
}

#[derive(Debug)]
pub(crate) struct KdTree<'a> {
    emb: &'a Embedding,
    nodes: Vec<Node>,
    leaf_of: Vec<usize>,
    live: Vec<bool>,
}

impl<'a> KdTree<'a> {
    /// Tree over `members` (embedding row indices), all initially dormant.
    pub fn new(emb: &'a Embedding, members: Vec<usize>) -> Self {
        let mut t = Self {
            emb,
            nodes: Vec::new(),
            leaf_of: vec![NONE; emb.len()],
            live: vec![false; emb.len()],
        };
        if !members.is_empty() {
            t.build(members, NONE);
        }
        t
    }

    fn build(&mut self, mut pts: Vec<usize>, parent: usize) -> usize {
        let dim = self.emb.dim();
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        for &i in &pts {
            for (c, x) in self.emb.point(i).iter().enumerate() {
                lo[c] = lo[c].min(*x);
                hi[c] = hi[c].max(*x);
            }
        }
        let id = self.nodes.len();
        let axis = (0..dim)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let flat = hi[axis] - lo[axis] <= 0.0;
        self.nodes.push(Node { lo, hi, live: 0, parent, kind: Kind::Leaf(vec![]) });
        if pts.len() <= LEAF || flat {
            for &i in &pts {
                self.leaf_of[i] = id;
            }
            self.nodes[id].kind = Kind::Leaf(pts);
            return id;
        }
        let mid = pts.len() / 2;
        let emb = self.emb;
        pts.select_nth_unstable_by(mid, |&a, &b| {
            emb.point(a)[axis].total_cmp(&emb.point(b)[axis]).then(a.cmp(&b))
        });
        let right = pts.split_off(mid);
        let l = self.build(pts, id);
        let r = self.build(right, id);
        self.nodes[id].kind = Kind::Split(l, r);
        id
    }

    fn adjust(&mut self, i: usize, up: bool) {
        let mut n = self.leaf_of[i];
        debug_assert!(n != NONE, "point {i} is not in the tree");
        while n != NONE {
            let node = &mut self.nodes[n];
            if up {
                node.live += 1;
            } else {
                node.live -= 1;
            }
            n = node.parent;
        }
    }

    pub fn insert(&mut self, i: usize) {
        if !self.live[i] {
            self.live[i] = true;
            self.adjust(i, true);
        }
    }

    pub fn remove(&mut self, i: usize) {
        if self.live[i] {
            self.live[i] = false;
            self.adjust(i, false);
        }
    }

    /// Every live point whose `score(dist2 to centre)` lies within the tie
    /// window of the smallest score; may also return some points outside it.
    /// Returns `(score, index)` pairs and the smallest score.
    pub fn nearest_ties(&self, centre: &[f64], score: &dyn Fn(f64) -> f64, out: &mut Vec<(f64, usize)>) -> f64 {
        let mut best = f64::INFINITY;
        if !self.nodes.is_empty() {
            self.search(0, centre, score, &mut best, out);
        }
        best
    }

    fn box_dist2(&self, n: usize, centre: &[f64]) -> f64 {
        let node = &self.nodes[n];
        centre
            .iter()
            .enumerate()
            .map(|(c, &m)| {
                let edge = if m < node.lo[c] {
                    node.lo[c]
                } else if m > node.hi[c] {
                    node.hi[c]
                } else {
                    m
                };
                (edge - m) * (edge - m)
            })
            .sum()
    }

    fn search(&self, n: usize, centre: &[f64], score: &dyn Fn(f64) -> f64, best: &mut f64, out: &mut Vec<(f64, usize)>) {
        let node = &self.nodes[n];
        if node.live == 0 || !within_tie(score(self.box_dist2(n, centre)), *best) {
            return;
        }
        match &node.kind {
            Kind::Leaf(pts) => {
                for &i in pts.iter().filter(|&&i| self.live[i]) {
                    let dist2: f64 = self.emb.point(i).iter().zip(centre).map(|(a, b)| (a - b) * (a - b)).sum();
                    let s = score(dist2);
                    *best = best.min(s);
                    if within_tie(s, *best) {
                        out.push((s, i));
                    }
                }
            }
            &Kind::Split(l, r) => {
                let (first, second) = if self.box_dist2(l, centre) <= self.box_dist2(r, centre) { (l, r) } else { (r, l) };
                self.search(first, centre, score, best, out);
                self.search(second, centre, score, best, out);
            }
        }
    }
}

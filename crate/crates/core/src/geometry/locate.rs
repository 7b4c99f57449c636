//! Bounding-volume hierarchy over element boxes.

#[derive(Clone, Copy, Debug)]
struct Aabb<const D: usize> {
    lo: [f64; D],
    hi: [f64; D],
}

impl<const D: usize> Aabb<D> {
    fn empty() -> Self {
        Self { lo: [f64::INFINITY; D], hi: [f64::NEG_INFINITY; D] }
    }

    fn grow(&mut self, o: &Aabb<D>) {
        for k in 0..D {
            self.lo[k] = self.lo[k].min(o.lo[k]);
            self.hi[k] = self.hi[k].max(o.hi[k]);
        }
    }

    fn contains(&self, p: &[f64; D], pad: f64) -> bool {
        (0..D).all(|k| p[k] >= self.lo[k] - pad && p[k] <= self.hi[k] + pad)
    }

    fn dist2(&self, p: &[f64; D]) -> f64 {
        (0..D)
            .map(|k| {
                let d = (self.lo[k] - p[k]).max(p[k] - self.hi[k]).max(0.0);
                d * d
            })
            .sum()
    }
}

#[derive(Debug)]
enum Node<const D: usize> {
    Leaf { bb: Aabb<D>, items: Vec<usize> },
    Split { bb: Aabb<D>, left: Box<Node<D>>, right: Box<Node<D>> },
}

impl<const D: usize> Node<D> {
    fn bb(&self) -> &Aabb<D> {
        match self {
            Node::Leaf { bb, .. } | Node::Split { bb, .. } => bb,
        }
    }
}

#[derive(Debug)]
pub struct Bvh<const D: usize> {
    root: Node<D>,
    boxes: Vec<Aabb<D>>,
    pad: f64,
}

const LEAF: usize = 8;

impl<const D: usize> Bvh<D> {
    /// Builds the tree from per-element corner lists.
    pub fn build<I>(elements: I) -> Self
    where
        I: IntoIterator<Item = Vec<[f64; D]>>,
    {
        let mut boxes = Vec::new();
        let mut diam = 0.0f64;
        for pts in elements {
            let mut bb = Aabb::empty();
            for p in &pts {
                bb.grow(&Aabb { lo: *p, hi: *p });
            }
            boxes.push(bb);
        }
        let mut all = Aabb::empty();
        for b in &boxes {
            all.grow(b);
        }
        for k in 0..D {
            diam = diam.max(all.hi[k] - all.lo[k]);
        }
        let idx: Vec<usize> = (0..boxes.len()).collect();
        let root = Self::node(&boxes, idx);
        Self { root, boxes, pad: 1e-12 * diam.max(f64::MIN_POSITIVE) }
    }

    fn node(boxes: &[Aabb<D>], mut idx: Vec<usize>) -> Node<D> {
        let mut bb = Aabb::empty();
        for &i in &idx {
            bb.grow(&boxes[i]);
        }
        if idx.len() <= LEAF {
            return Node::Leaf { bb, items: idx };
        }
        let axis = (0..D)
            .max_by(|&a, &b| (bb.hi[a] - bb.lo[a]).total_cmp(&(bb.hi[b] - bb.lo[b])))
            .unwrap_or(0);
        let centre = |i: usize| boxes[i].lo[axis] + boxes[i].hi[axis];
        idx.sort_by(|&a, &b| centre(a).total_cmp(&centre(b)).then(a.cmp(&b)));
        let right = idx.split_off(idx.len() / 2);
        Node::Split {
            bb,
            left: Box::new(Self::node(boxes, idx)),
            right: Box::new(Self::node(boxes, right)),
        }
    }

    /// Elements whose box contains `p`, in ascending order.
    pub fn candidates(&self, p: &[f64; D]) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if !n.bb().contains(p, self.pad) {
                continue;
            }
            match n {
                Node::Leaf { items, .. } => {
                    out.extend(items.iter().copied().filter(|&i| self.boxes[i].contains(p, self.pad)))
                }
                Node::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// The element whose box is closest to `p`.
    pub fn nearest(&self, p: &[f64; D]) -> Option<usize> {
        let mut best = (f64::INFINITY, None);
        let mut stack = vec![&self.root];
        while let Some(n) = stack.pop() {
            if n.bb().dist2(p) > best.0 {
                continue;
            }
            match n {
                Node::Leaf { items, .. } => {
                    for &i in items {
                        let d = self.boxes[i].dist2(p);
                        if d < best.0 || (d == best.0 && Some(i) < best.1) {
                            best = (d, Some(i));
                        }
                    }
                }
                Node::Split { left, right, .. } => {
                    stack.push(right);
                    stack.push(left);
                }
            }
        }
        best.1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_grid_cells() {
        let mut cells = Vec::new();
        for j in 0..10 {
            for i in 0..10 {
                let (x, y) = (i as f64, j as f64);
                cells.push(vec![[x, y], [x + 1.0, y], [x + 1.0, y + 1.0], [x, y + 1.0]]);
            }
        }
        let bvh = Bvh::build(cells);
        assert_eq!(bvh.candidates(&[3.5, 7.5]), vec![73]);
        assert_eq!(bvh.candidates(&[3.0, 7.5]), vec![72, 73]);
        assert!(bvh.candidates(&[11.0, 0.5]).is_empty());
        assert_eq!(bvh.nearest(&[11.0, 0.5]), Some(9));
    }
}

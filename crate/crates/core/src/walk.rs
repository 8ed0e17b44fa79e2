//! Dense propagation of the law of `Z_n` from a fixed starting state.
//!
//! The law on `Z^d x {1..p}` is stored as one dense box per modulating
//! state. Boxes grow by the jump support every step and, when pruning is
//! enabled, shrink back to the cells holding mass above the threshold.

use crate::process::ProcessSpec;

#[derive(Clone, Debug, Default)]
pub(crate) struct Layer {
    pub lo: Vec<i64>,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Layer {
    fn strides(shape: &[usize]) -> Vec<usize> {
        let mut s = vec![1usize; shape.len()];
        for t in (0..shape.len().saturating_sub(1)).rev() {
            s[t] = s[t + 1] * shape[t + 1];
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: &[i64]) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let strides = Self::strides(&self.shape);
        let mut idx = 0usize;
        for t in 0..x.len() {
            let off = x[t] - self.lo[t];
            if off < 0 || off as usize >= self.shape[t] {
                return 0.0;
            }
            idx += off as usize * strides[t];
        }
        self.data[idx]
    }

    /// Nonzero cells as `(position, mass)`.
    pub fn cells(&self) -> Vec<(Vec<i64>, f64)> {
        let mut out = Vec::new();
        if self.is_empty() {
            return out;
        }
        let d = self.shape.len();
        let mut a = vec![0usize; d];
        for &v in &self.data {
            if v != 0.0 {
                out.push((a.iter().zip(&self.lo).map(|(&i, &l)| l + i as i64).collect(), v));
            }
            for t in (0..d).rev() {
                a[t] += 1;
                if a[t] < self.shape[t] {
                    break;
                }
                a[t] = 0;
            }
        }
        out
    }

    #[cfg(test)]
    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Zeroes cells below `threshold`, appending them to `removed_cells`, and
    /// shrinks the box; returns removed mass.
    fn prune(&mut self, threshold: f64, removed_cells: &mut Vec<(Vec<i64>, f64)>) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let d = self.shape.len();
        let mut removed = 0.0;
        let mut min_i = self.shape.clone();
        let mut max_i = vec![0usize; d];
        let mut any = false;
        let mut a = vec![0usize; d];
        for v in self.data.iter_mut() {
            if *v < threshold {
                if *v > 0.0 {
                    removed += *v;
                    removed_cells.push((a.iter().zip(&self.lo).map(|(&i, &l)| l + i as i64).collect(), *v));
                }
                *v = 0.0;
            } else if *v != 0.0 {
                any = true;
                for t in 0..d {
                    min_i[t] = min_i[t].min(a[t]);
                    max_i[t] = max_i[t].max(a[t]);
                }
            }
            for t in (0..d).rev() {
                a[t] += 1;
                if a[t] < self.shape[t] {
                    break;
                }
                a[t] = 0;
            }
        }
        if !any {
            *self = Layer::default();
            return removed;
        }
        let new_shape: Vec<usize> = (0..d).map(|t| max_i[t] - min_i[t] + 1).collect();
        if new_shape != self.shape {
            let old_strides = Self::strides(&self.shape);
            let total: usize = new_shape.iter().product();
            let mut data = Vec::with_capacity(total);
            let mut b = vec![0usize; d];
            for _ in 0..total {
                let idx: usize = (0..d).map(|t| (b[t] + min_i[t]) * old_strides[t]).sum();
                data.push(self.data[idx]);
                for t in (0..d).rev() {
                    b[t] += 1;
                    if b[t] < new_shape[t] {
                        break;
                    }
                    b[t] = 0;
                }
            }
            self.lo = (0..d).map(|t| self.lo[t] + min_i[t] as i64).collect();
            self.shape = new_shape;
            self.data = data;
        }
        removed
    }
}

pub(crate) struct Propagator<'a> {
    spec: &'a ProcessSpec,
    layers: Vec<Layer>,
    prune: f64,
    pruned_mass: f64,
    /// Cells removed by the last step as `(state, position, mass)`.
    last_pruned: Vec<(usize, Vec<i64>, f64)>,
    steps: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(spec: &'a ProcessSpec, start: usize, prune: f64) -> Self {
        let d = spec.dim();
        let mut layers = vec![Layer::default(); spec.states()];
        layers[start] = Layer {
            lo: vec![0; d],
            shape: vec![1; d],
            data: vec![1.0],
        };
        Propagator {
            spec,
            layers,
            prune,
            pruned_mass: 0.0,
            last_pruned: Vec::new(),
            steps: 0,
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn mass_at(&self, x: &[i64], j: usize) -> f64 {
        self.layers[j].get(x)
    }

    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    pub fn last_pruned(&self) -> &[(usize, Vec<i64>, f64)] {
        &self.last_pruned
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self) {
        let spec = self.spec;
        let (d, p) = (spec.dim(), spec.states());
        let mut next = Vec::with_capacity(p);
        for j in 0..p {
            // bounding box of the destination layer
            let mut lo = vec![i64::MAX; d];
            let mut hi = vec![i64::MIN; d];
            for k in 0..p {
                let src = &self.layers[k];
                if src.is_empty() {
                    continue;
                }
                for (x, _) in spec.jump(k, j).iter() {
                    for t in 0..d {
                        lo[t] = lo[t].min(src.lo[t] + x.coords()[t]);
                        hi[t] = hi[t].max(src.lo[t] + src.shape[t] as i64 - 1 + x.coords()[t]);
                    }
                }
            }
            if lo[0] == i64::MAX {
                next.push(Layer::default());
                continue;
            }
            let shape: Vec<usize> = (0..d).map(|t| (hi[t] - lo[t] + 1) as usize).collect();
            let strides = Layer::strides(&shape);
            let mut data = vec![0.0; shape.iter().product()];
            for k in 0..p {
                let src = &self.layers[k];
                let jump = spec.jump(k, j);
                if src.is_empty() || jump.is_empty() {
                    continue;
                }
                let atoms: Vec<(isize, f64)> = jump
                    .iter()
                    .map(|(x, w)| {
                        let off: isize = (0..d).map(|t| x.coords()[t] as isize * strides[t] as isize).sum();
                        (off, w)
                    })
                    .collect();
                let mut base: isize = (0..d).map(|t| (src.lo[t] - lo[t]) as isize * strides[t] as isize).sum();
                let mut a = vec![0usize; d];
                for &v in &src.data {
                    if v != 0.0 {
                        for &(off, w) in &atoms {
                            data[(base + off) as usize] += w * v;
                        }
                    }
                    for t in (0..d).rev() {
                        a[t] += 1;
                        base += strides[t] as isize;
                        if a[t] < src.shape[t] {
                            break;
                        }
                        base -= (src.shape[t] * strides[t]) as isize;
                        a[t] = 0;
                    }
                }
            }
            next.push(Layer { lo, shape, data });
        }
        self.last_pruned.clear();
        if self.prune > 0.0 {
            let mut cells = Vec::new();
            for (k, layer) in next.iter_mut().enumerate() {
                self.pruned_mass += layer.prune(self.prune, &mut cells);
                self.last_pruned.extend(cells.drain(..).map(|(x, m)| (k, x, m)));
            }
        }
        self.layers = next;
        self.steps += 1;
    }
}

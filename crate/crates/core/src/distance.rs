//! Exact Euclidean distance transform with anisotropic spacing
//! (separable lower-envelope algorithm of Felzenszwalb & Huttenlocher).

use crate::grid::{self, Dims};

/// Squared physical distance from every voxel to the nearest feature voxel.
/// Voxels with no feature anywhere in the grid get `f64::INFINITY`.
pub fn squared_edt(dims: Dims, spacing: [f64; 3], is_feature: impl Fn(usize) -> bool) -> Vec<f64> {
    let n = grid::voxel_count(dims);
    let mut d: Vec<f64> = (0..n)
        .map(|i| if is_feature(i) { 0.0 } else { f64::INFINITY })
        .collect();
    let longest = dims.iter().copied().max().unwrap_or(1);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];
    let mut env = Envelope::with_capacity(longest);

    for axis in 0..3 {
        let len = dims[axis];
        if len == 1 {
            continue;
        }
        let stride = match axis {
            0 => 1,
            1 => dims[0],
            _ => dims[0] * dims[1],
        };
        let (o1, o2) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let w = spacing[axis];
        for j in 0..dims[o2] {
            for i in 0..dims[o1] {
                let mut c = [0usize; 3];
                c[o1] = i;
                c[o2] = j;
                let base = grid::index(dims, c);
                for k in 0..len {
                    line[k] = d[base + k * stride];
                }
                env.transform(&line[..len], w, &mut out[..len]);
                for k in 0..len {
                    d[base + k * stride] = out[k];
                }
            }
        }
    }
    d
}

struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
}

impl Envelope {
    fn with_capacity(n: usize) -> Self {
        Self {
            v: Vec::with_capacity(n),
            z: Vec::with_capacity(n + 1),
        }
    }

    /// out[p] = min_q (w(p-q))^2 + f[q]
    fn transform(&mut self, f: &[f64], w: f64, out: &mut [f64]) {
        let w2 = w * w;
        self.v.clear();
        self.z.clear();
        for (q, &fq) in f.iter().enumerate() {
            if !fq.is_finite() {
                continue;
            }
            loop {
                match self.v.last() {
                    None => {
                        self.v.push(q);
                        self.z.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&p) => {
                        let (qf, pf) = (q as f64, p as f64);
                        let s = ((fq + w2 * qf * qf) - (f[p] + w2 * pf * pf)) / (2.0 * w2 * (qf - pf));
                        if s <= *self.z.last().unwrap() {
                            self.v.pop();
                            self.z.pop();
                        } else {
                            self.v.push(q);
                            self.z.push(s);
                            break;
                        }
                    }
                }
            }
        }
        if self.v.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (p, o) in out.iter_mut().enumerate() {
            let pf = p as f64;
            while k + 1 < self.v.len() && self.z[k + 1] < pf {
                k += 1;
            }
            let q = self.v[k];
            let dq = w * (pf - q as f64);
            *o = dq * dq + f[q];
        }
    }
}

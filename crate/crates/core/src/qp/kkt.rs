//! Reduced KKT system `[[P + CᵀWC, Eᵀ], [E, 0]]` solved by a banded LDLᵀ.
//!
//! Unknowns are ordered so that every equality multiplier follows the last
//! primal variable it touches; for spline problems that keeps the matrix
//! narrow-banded. The factorisation is of the quasidefinite regularisation
//! `[[· + δI, ·], [·, −δI]]`, and solves are cleaned up by iterative
//! refinement against the unregularised operator.

use super::QpProblem;

pub(crate) struct KktSystem<'a> {
    prob: &'a QpProblem,
    n: usize,
    total: usize,
    pos: Vec<usize>,
    bw: usize,
    band: Vec<f64>,
    diag: Vec<f64>,
    weights: Vec<f64>,
    reg_primal: f64,
    reg_dual: f64,
    refinement: usize,
}

impl<'a> KktSystem<'a> {
    pub fn new(prob: &'a QpProblem, regularization: f64, refinement: usize) -> Self {
        let n = prob.dim();
        let me = prob.e.nrows();
        let total = n + me;

        let mut keys: Vec<(f64, usize)> = (0..n).map(|j| (j as f64, j)).collect();
        for r in 0..me {
            let (cols, _) = prob.e.row(r);
            let key = cols
                .iter()
                .max()
                .map(|&c| c as f64 + 0.5)
                .unwrap_or(n as f64);
            keys.push((key, n + r));
        }
        keys.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let mut pos = vec![0usize; total];
        for (p, &(_, u)) in keys.iter().enumerate() {
            pos[u] = p;
        }

        let mut bw = 0usize;
        for i in 0..n {
            let (cols, _) = prob.p.row(i);
            for &c in cols {
                bw = bw.max(pos[i].abs_diff(pos[c]));
            }
        }
        for r in 0..me {
            let (cols, _) = prob.e.row(r);
            for &c in cols {
                bw = bw.max(pos[n + r].abs_diff(pos[c]));
            }
        }
        for r in 0..prob.c.nrows() {
            let (cols, _) = prob.c.row(r);
            if let (Some(lo), Some(hi)) = (
                cols.iter().map(|&c| pos[c]).min(),
                cols.iter().map(|&c| pos[c]).max(),
            ) {
                bw = bw.max(hi - lo);
            }
        }

        let scale = (0..n)
            .map(|i| prob.p.get(i, i).abs())
            .fold(1.0f64, f64::max);
        Self {
            prob,
            n,
            total,
            pos,
            bw,
            band: vec![0.0; total * (bw + 1)],
            diag: vec![0.0; total],
            weights: Vec::new(),
            reg_primal: regularization * scale,
            reg_dual: regularization / scale,
            refinement,
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        // lower band, i >= j
        i * (self.bw + 1) + (i - j)
    }

    #[inline]
    fn add(&mut self, a: usize, b: usize, v: f64) {
        let (pa, pb) = (self.pos[a], self.pos[b]);
        let (i, j) = if pa >= pb { (pa, pb) } else { (pb, pa) };
        let k = self.idx(i, j);
        self.band[k] += v;
    }

    /// Assembles and factors the system for inequality weights `w = z / s`.
    /// Returns `false` on a zero or non-finite pivot.
    pub fn factor(&mut self, weights: &[f64]) -> bool {
        let prob = self.prob;
        self.weights.clear();
        self.weights.extend_from_slice(weights);
        self.band.iter_mut().for_each(|v| *v = 0.0);

        for i in 0..self.n {
            let (cols, vals) = prob.p.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                if self.pos[i] >= self.pos[c] {
                    self.add(i, c, v);
                }
            }
            self.add(i, i, self.reg_primal);
        }
        for r in 0..prob.e.nrows() {
            let (cols, vals) = prob.e.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                self.add(self.n + r, c, v);
            }
            self.add(self.n + r, self.n + r, -self.reg_dual);
        }
        for (r, &w) in weights.iter().enumerate() {
            let (cols, vals) = prob.c.row(r);
            for (a, (&ca, &va)) in cols.iter().zip(vals).enumerate() {
                for (&cb, &vb) in cols[..=a].iter().zip(&vals[..=a]) {
                    // each unordered pair once; `add` maps it to the lower triangle
                    self.add(ca, cb, w * va * vb);
                }
            }
        }
        self.factor_in_place()
    }

    fn factor_in_place(&mut self) -> bool {
        let bw = self.bw;
        let w = bw + 1;
        for j in 0..self.total {
            let start = j.saturating_sub(bw);
            let mut dj = self.band[j * w];
            for k in start..j {
                let l = self.band[j * w + (j - k)];
                dj -= l * l * self.diag[k];
            }
            if !dj.is_finite() || dj.abs() < 1e-300 {
                return false;
            }
            self.diag[j] = dj;
            let end = (j + bw).min(self.total - 1);
            for i in j + 1..=end {
                let kstart = i.saturating_sub(bw);
                let mut v = self.band[i * w + (i - j)];
                for k in kstart..j {
                    v -= self.band[i * w + (i - k)] * self.band[j * w + (j - k)] * self.diag[k];
                }
                self.band[i * w + (i - j)] = v / dj;
            }
        }
        true
    }

    fn solve_factored(&self, rhs: &[f64]) -> Vec<f64> {
        let w = self.bw + 1;
        let mut x = vec![0.0; self.total];
        for (u, &v) in rhs.iter().enumerate() {
            x[self.pos[u]] = v;
        }
        for i in 0..self.total {
            let start = i.saturating_sub(self.bw);
            let mut v = x[i];
            for k in start..i {
                v -= self.band[i * w + (i - k)] * x[k];
            }
            x[i] = v;
        }
        for i in 0..self.total {
            x[i] /= self.diag[i];
        }
        for i in (0..self.total).rev() {
            let end = (i + self.bw).min(self.total - 1);
            let mut v = x[i];
            for k in i + 1..=end {
                v -= self.band[k * w + (k - i)] * x[k];
            }
            x[i] = v;
        }
        (0..self.total).map(|u| x[self.pos[u]]).collect()
    }

    /// Unregularised operator applied to `(x_b, x_ν)` stacked.
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let prob = self.prob;
        let (xb, xn) = x.split_at(self.n);
        let mut out = prob.p.mul_vec(xb);
        if !self.weights.is_empty() {
            let cx: Vec<f64> = prob
                .c
                .mul_vec(xb)
                .iter()
                .zip(&self.weights)
                .map(|(v, w)| v * w)
                .collect();
            prob.c.tmul_add(&cx, &mut out);
        }
        prob.e.tmul_add(xn, &mut out);
        out.extend(prob.e.mul_vec(xb));
        out
    }

    /// Solves for the stacked unknowns `(Δb, Δν)`. Refinement runs at least
    /// `refinement` steps and continues while the residual keeps shrinking,
    /// which matters when the regularisation is comparable to the operator.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        const MAX_STEPS: usize = 100;
        let mut x = self.solve_factored(rhs);
        let rhs_norm = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mut best = (f64::INFINITY, x.clone());
        for step in 0..MAX_STEPS {
            let kx = self.apply(&x);
            let resid: Vec<f64> = rhs.iter().zip(&kx).map(|(r, k)| r - k).collect();
            let rn = resid.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if !rn.is_finite() {
                break;
            }
            let prev = best.0;
            if rn < prev {
                best = (rn, x.clone());
            }
            if rn <= 1e-16 * (1.0 + rhs_norm) || (step >= self.refinement && rn > 0.9 * prev) {
                break;
            }
            let dx = self.solve_factored(&resid);
            x.iter_mut().zip(dx).for_each(|(xi, di)| *xi += di);
        }
        if best.0.is_finite() {
            best.1
        } else {
            x
        }
    }

    #[cfg(test)]
    pub fn bandwidth(&self) -> usize {
        self.bw
    }
}

//! Cone algebra for the nonnegative orthant and the second-order cone:
//! Jordan products, step-to-boundary and Nesterov–Todd scalings.

use nalgebra::DVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cone {
    NonNeg(usize),
    /// `{(t, u) : t ≥ ‖u‖}` of total dimension `dim`.
    Soc(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::NonNeg(d) | Cone::Soc(d) => d,
        }
    }

    pub fn degree(&self) -> usize {
        match *self {
            Cone::NonNeg(d) => d,
            Cone::Soc(_) => 1,
        }
    }
}

/// Iterates `(offset, cone)` pairs.
pub(crate) fn blocks(cones: &[Cone]) -> impl Iterator<Item = (usize, Cone)> + '_ {
    cones.iter().scan(0usize, |off, &c| {
        let start = *off;
        *off += c.dim();
        Some((start, c))
    })
}

pub(crate) fn total_degree(cones: &[Cone]) -> usize {
    cones.iter().map(Cone::degree).sum()
}

pub(crate) fn identity(cones: &[Cone], m: usize) -> DVector<f64> {
    let mut e = DVector::zeros(m);
    for (off, cone) in blocks(cones) {
        match cone {
            Cone::NonNeg(d) => e.rows_mut(off, d).fill(1.0),
            Cone::Soc(_) => e[off] = 1.0,
        }
    }
    e
}

/// Jordan product `u ∘ v`.
pub(crate) fn circ(cones: &[Cone], u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(u.len());
    for (off, cone) in blocks(cones) {
        match cone {
            Cone::NonNeg(d) => {
                for i in off..off + d {
                    out[i] = u[i] * v[i];
                }
            }
            Cone::Soc(d) => {
                let uu = u.rows(off, d);
                let vv = v.rows(off, d);
                out[off] = uu.dot(&vv);
                for i in 1..d {
                    out[off + i] = uu[0] * vv[i] + vv[0] * uu[i];
                }
            }
        }
    }
    out
}

/// Solves `λ ∘ x = v` for `x` with `λ` in the cone interior.
pub(crate) fn inv_circ(cones: &[Cone], lambda: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(v.len());
    for (off, cone) in blocks(cones) {
        match cone {
            Cone::NonNeg(d) => {
                for i in off..off + d {
                    out[i] = v[i] / lambda[i];
                }
            }
            Cone::Soc(d) => {
                let l = lambda.rows(off, d);
                let vv = v.rows(off, d);
                let l0 = l[0];
                let l1v1 = l.rows(1, d - 1).dot(&vv.rows(1, d - 1));
                let det = l0 * l0 - l.rows(1, d - 1).norm_squared();
                let x0 = (l0 * vv[0] - l1v1) / det;
                out[off] = x0;
                for i in 1..d {
                    out[off + i] = (vv[i] - x0 * l[i]) / l0;
                }
            }
        }
    }
    out
}

/// Largest `α ≥ 0` keeping `u + α du` in the cone, capped at `cap`.
pub(crate) fn max_step(cones: &[Cone], u: &DVector<f64>, du: &DVector<f64>, cap: f64) -> f64 {
    let mut alpha = cap;
    for (off, cone) in blocks(cones) {
        match cone {
            Cone::NonNeg(d) => {
                for i in off..off + d {
                    if du[i] < 0.0 {
                        alpha = alpha.min(-u[i] / du[i]);
                    }
                }
            }
            Cone::Soc(d) => {
                alpha = alpha.min(soc_step(&u.rows(off, d).into_owned(), &du.rows(off, d).into_owned()));
            }
        }
    }
    alpha.max(0.0)
}

fn soc_step(u: &DVector<f64>, du: &DVector<f64>) -> f64 {
    let d = u.len();
    let jdot = |a: &DVector<f64>, b: &DVector<f64>| a[0] * b[0] - a.rows(1, d - 1).dot(&b.rows(1, d - 1));
    // f(α) = c + 2bα + aα², boundary at the first positive root
    let qa = jdot(du, du);
    let qb = jdot(u, du);
    let qc = jdot(u, u);
    let mut best = f64::INFINITY;
    if qa.abs() < 1e-300 {
        if qb < 0.0 {
            best = -qc / (2.0 * qb);
        }
    } else {
        let disc = qb * qb - qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            // numerically stable pair of roots
            let t = -(qb + qb.signum() * sq);
            let roots = [t / qa, if t != 0.0 { qc / t } else { f64::INFINITY }];
            for r in roots {
                if r > 0.0 && r < best {
                    best = r;
                }
            }
        }
    }
    if du[0] < 0.0 {
        best = best.min(-u[0] / du[0]);
    }
    best
}

/// Per-cone Nesterov–Todd scaling `W` with `W z = W⁻¹ s = λ`.
#[derive(Debug, Clone)]
pub(crate) enum BlockScaling {
    NonNeg(DVector<f64>),
    Soc { eta: f64, w: DVector<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    cones: Vec<Cone>,
    blocks: Vec<BlockScaling>,
    pub lambda: DVector<f64>,
}

impl Scaling {
    pub fn identity(cones: &[Cone]) -> Self {
        let m: usize = cones.iter().map(Cone::dim).sum();
        let blocks = cones
            .iter()
            .map(|c| match *c {
                Cone::NonNeg(d) => BlockScaling::NonNeg(DVector::from_element(d, 1.0)),
                Cone::Soc(d) => {
                    let mut w = DVector::zeros(d);
                    w[0] = 1.0;
                    BlockScaling::Soc { eta: 1.0, w }
                }
            })
            .collect();
        Self {
            cones: cones.to_vec(),
            blocks,
            lambda: DVector::zeros(m),
        }
    }

    pub fn compute(cones: &[Cone], s: &DVector<f64>, z: &DVector<f64>) -> Self {
        let mut blocks = Vec::with_capacity(cones.len());
        for (off, cone) in self::blocks(cones) {
            match cone {
                Cone::NonNeg(d) => {
                    let w = DVector::from_fn(d, |i, _| (s[off + i] / z[off + i]).sqrt());
                    blocks.push(BlockScaling::NonNeg(w));
                }
                Cone::Soc(d) => {
                    let ss = s.rows(off, d);
                    let zz = z.rows(off, d);
                    let sres = (ss[0] * ss[0] - ss.rows(1, d - 1).norm_squared()).max(f64::MIN_POSITIVE);
                    let zres = (zz[0] * zz[0] - zz.rows(1, d - 1).norm_squared()).max(f64::MIN_POSITIVE);
                    let snorm = sres.sqrt();
                    let znorm = zres.sqrt();
                    let sbar = ss / snorm;
                    let zbar = zz / znorm;
                    let gamma = ((1.0 + sbar.dot(&zbar)) / 2.0).sqrt();
                    let mut w = DVector::zeros(d);
                    w[0] = (sbar[0] + zbar[0]) / (2.0 * gamma);
                    for i in 1..d {
                        w[i] = (sbar[i] - zbar[i]) / (2.0 * gamma);
                    }
                    blocks.push(BlockScaling::Soc {
                        eta: (snorm / znorm).sqrt(),
                        w,
                    });
                }
            }
        }
        let mut sc = Self {
            cones: cones.to_vec(),
            blocks,
            lambda: DVector::zeros(s.len()),
        };
        sc.lambda = sc.apply(z, false);
        sc
    }

    /// `W v` (or `W⁻¹ v` when `inverse`).
    pub fn apply(&self, v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for ((off, _), blk) in blocks(&self.cones).zip(&self.blocks) {
            match blk {
                BlockScaling::NonNeg(w) => {
                    for i in 0..w.len() {
                        out[off + i] = if inverse { v[off + i] / w[i] } else { v[off + i] * w[i] };
                    }
                }
                BlockScaling::Soc { eta, w } => {
                    let d = w.len();
                    let vv = v.rows(off, d);
                    let w1v1 = w.rows(1, d - 1).dot(&vv.rows(1, d - 1));
                    let (sign, scale) = if inverse { (-1.0, 1.0 / eta) } else { (1.0, *eta) };
                    out[off] = scale * (w[0] * vv[0] + sign * w1v1);
                    let coef = sign * vv[0] + w1v1 / (1.0 + w[0]);
                    for i in 1..d {
                        out[off + i] = scale * (vv[i] + coef * w[i]);
                    }
                }
            }
        }
        out
    }

    /// Applies `W⁻¹` to every column of `mat` in place of the row blocks.
    pub fn apply_inv_columns(&self, mat: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
        let mut out = mat.clone();
        for j in 0..mat.ncols() {
            let col = mat.column(j).into_owned();
            out.set_column(j, &self.apply(&col, true));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn interior_soc(v: &[f64]) -> DVector<f64> {
        let mut x = DVector::from_row_slice(v);
        let tail = x.rows(1, x.len() - 1).norm();
        x[0] = tail + 0.5 + x[0].abs();
        x
    }

    #[test]
    fn nt_scaling_maps_z_and_s_to_same_point() {
        let cones = [Cone::NonNeg(2), Cone::Soc(4)];
        let mut s = DVector::from_row_slice(&[0.3, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let mut z = DVector::from_row_slice(&[1.7, 0.1, 0.0, 0.0, 0.0, 0.0]);
        s.rows_mut(2, 4).copy_from(&interior_soc(&[0.1, 0.4, -1.2, 0.3]));
        z.rows_mut(2, 4).copy_from(&interior_soc(&[2.0, -0.7, 0.2, 0.9]));
        let sc = Scaling::compute(&cones, &s, &z);
        let wz = sc.apply(&z, false);
        let winv_s = sc.apply(&s, true);
        assert!((wz - winv_s).amax() < 1e-12);
        let v = DVector::from_row_slice(&[0.2, -1.0, 3.0, 0.5, -0.1, 0.7]);
        let back = sc.apply(&sc.apply(&v, false), true);
        assert!((back - v).amax() < 1e-12);
    }

    #[test]
    fn inverse_jordan_product_round_trips() {
        let cones = [Cone::NonNeg(1), Cone::Soc(3)];
        let mut lam = DVector::from_row_slice(&[2.0, 0.0, 0.0, 0.0]);
        lam.rows_mut(1, 3).copy_from(&interior_soc(&[0.0, 0.3, -0.8]));
        let v = DVector::from_row_slice(&[1.0, -0.4, 2.0, 0.25]);
        let x = inv_circ(&cones, &lam, &v);
        assert!((circ(&cones, &lam, &x) - v).amax() < 1e-12);
    }

    #[test]
    fn step_to_boundary_lands_on_boundary() {
        let cones = [Cone::Soc(3)];
        let u = DVector::from_row_slice(&[2.0, 0.5, 0.0]);
        let du = DVector::from_row_slice(&[-1.0, 0.5, 0.5]);
        let a = max_step(&cones, &u, &du, f64::INFINITY);
        let p = &u + &du * a;
        assert!((p[0] - p.rows(1, 2).norm()).abs() < 1e-12);
        let inside = DVector::from_row_slice(&[1.0, 0.0, 0.0]);
        assert_eq!(max_step(&cones, &u, &inside, 1.0), 1.0);
    }
}

//! Problem description and conversion to the internal standard form.

use nalgebra::{DMatrix, DVector};

use crate::cone::Cone;
use crate::error::ConicError;

/// Quadratic part of the objective, `½‖F x‖²`.
#[derive(Debug, Clone, PartialEq)]
pub enum Quadratic {
    /// Purely linear objective.
    None,
    /// `½‖x‖²`.
    Identity,
    /// `½‖F x‖²` for an explicit factor `F` with `n` columns.
    Factor(DMatrix<f64>),
}

/// A single linear row `aᵀx (= or ≤) rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub coeffs: DVector<f64>,
    pub rhs: f64,
}

/// `‖A x + b‖ ≤ cᵀx + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SocConstraint {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
}

impl SocConstraint {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, d: f64) -> Self {
        Self { a, b, c, d }
    }

    /// `‖A x + b‖ − (cᵀx + d)`; non-positive when satisfied.
    pub fn excess(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x + &self.b).norm() - (self.c.dot(x) + self.d)
    }
}

/// Minimize `½‖F x‖² + qᵀx` subject to linear equalities, linear
/// inequalities and second-order cone constraints, over dense real `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    n: usize,
    pub quadratic: Quadratic,
    pub linear: DVector<f64>,
    pub equalities: Vec<LinearRow>,
    pub inequalities: Vec<LinearRow>,
    pub socs: Vec<SocConstraint>,
}

impl ConicProblem {
    /// Feasibility problem over `n` variables with a zero objective.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            quadratic: Quadratic::None,
            linear: DVector::zeros(n),
            equalities: Vec::new(),
            inequalities: Vec::new(),
            socs: Vec::new(),
        }
    }

    /// Minimum-norm problem, objective `½‖x‖²`.
    pub fn min_norm(n: usize) -> Self {
        Self {
            quadratic: Quadratic::Identity,
            ..Self::new(n)
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn with_quadratic(mut self, quadratic: Quadratic) -> Self {
        self.quadratic = quadratic;
        self
    }

    pub fn with_linear(mut self, q: DVector<f64>) -> Self {
        self.linear = q;
        self
    }

    pub fn add_eq(&mut self, coeffs: DVector<f64>, rhs: f64) -> &mut Self {
        self.equalities.push(LinearRow { coeffs, rhs });
        self
    }

    /// `coeffsᵀx ≤ rhs`.
    pub fn add_le(&mut self, coeffs: DVector<f64>, rhs: f64) -> &mut Self {
        self.inequalities.push(LinearRow { coeffs, rhs });
        self
    }

    pub fn add_soc(&mut self, soc: SocConstraint) -> &mut Self {
        self.socs.push(soc);
        self
    }

    /// Objective value at `x`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        let quad = match &self.quadratic {
            Quadratic::None => 0.0,
            Quadratic::Identity => 0.5 * x.norm_squared(),
            Quadratic::Factor(f) => 0.5 * (f * x).norm_squared(),
        };
        quad + self.linear.dot(x)
    }

    /// Rejects inconsistent dimensions and non-finite data.
    pub fn validate(&self) -> Result<(), ConicError> {
        let n = self.n;
        if n == 0 {
            return Err(ConicError::Dimension("problem has no variables".into()));
        }
        if self.linear.len() != n {
            return Err(ConicError::Dimension(format!(
                "linear objective has length {}, expected {n}",
                self.linear.len()
            )));
        }
        if let Quadratic::Factor(f) = &self.quadratic {
            if f.ncols() != n {
                return Err(ConicError::Dimension(format!(
                    "quadratic factor has {} columns, expected {n}",
                    f.ncols()
                )));
            }
        }
        for (kind, rows) in [("equality", &self.equalities), ("inequality", &self.inequalities)] {
            for (i, row) in rows.iter().enumerate() {
                if row.coeffs.len() != n {
                    return Err(ConicError::Dimension(format!(
                        "{kind} row {i} has length {}, expected {n}",
                        row.coeffs.len()
                    )));
                }
                if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
                    return Err(ConicError::NonFinite(format!("{kind} row {i}")));
                }
            }
        }
        for (j, soc) in self.socs.iter().enumerate() {
            if soc.a.ncols() != n || soc.c.len() != n || soc.a.nrows() != soc.b.len() {
                return Err(ConicError::Dimension(format!(
                    "cone {j}: A is {}x{}, b has {}, c has {} (n = {n})",
                    soc.a.nrows(),
                    soc.a.ncols(),
                    soc.b.len(),
                    soc.c.len()
                )));
            }
            let finite = soc
                .a
                .iter()
                .chain(soc.b.iter())
                .chain(soc.c.iter())
                .all(|v| v.is_finite())
                && soc.d.is_finite();
            if !finite {
                return Err(ConicError::NonFinite(format!("cone {j}")));
            }
        }
        if self.linear.iter().any(|v| !v.is_finite()) {
            return Err(ConicError::NonFinite("linear objective".into()));
        }
        Ok(())
    }

    /// Largest absolute entry over all problem data.
    pub fn data_norm_inf(&self) -> f64 {
        let mut m = self.linear.amax();
        for row in self.equalities.iter().chain(&self.inequalities) {
            m = m.max(row.coeffs.amax()).max(row.rhs.abs());
        }
        for soc in &self.socs {
            m = m.max(soc.a.amax()).max(soc.b.amax()).max(soc.c.amax()).max(soc.d.abs());
        }
        if let Quadratic::Factor(f) = &self.quadratic {
            m = m.max(f.amax());
        }
        m
    }
}

/// `min cᵀx  s.t.  A x = b,  G x + s = h,  s ∈ K`.
///
/// Cone order in `G`/`h`: nonnegative block, user cones in insertion
/// order, then the objective epigraph cone when present.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub cones: Vec<Cone>,
    /// Number of variables in the user's problem; an epigraph variable,
    /// if any, is appended after them.
    pub user_n: usize,
}

impl StandardForm {
    pub fn from_problem(p: &ConicProblem) -> Self {
        let user_n = p.n;
        let factor: Option<DMatrix<f64>> = match &p.quadratic {
            Quadratic::None => None,
            Quadratic::Identity => Some(DMatrix::identity(user_n, user_n)),
            Quadratic::Factor(f) => Some(f.clone()),
        };
        let has_epigraph = factor.is_some();
        let n = user_n + usize::from(has_epigraph);

        let mut c = DVector::zeros(n);
        c.rows_mut(0, user_n).copy_from(&p.linear);
        if has_epigraph {
            c[user_n] = 1.0;
        }

        let neq = p.equalities.len();
        let mut a = DMatrix::zeros(neq, n);
        let mut b = DVector::zeros(neq);
        for (i, row) in p.equalities.iter().enumerate() {
            a.view_mut((i, 0), (1, user_n)).copy_from(&row.coeffs.transpose());
            b[i] = row.rhs;
        }

        let nlin = p.inequalities.len();
        let soc_rows: usize = p.socs.iter().map(|s| s.a.nrows() + 1).sum();
        let epi_rows = factor.as_ref().map_or(0, |f| f.nrows() + 2);
        let m = nlin + soc_rows + epi_rows;
        let mut g = DMatrix::zeros(m, n);
        let mut h = DVector::zeros(m);
        let mut cones = Vec::new();

        for (i, row) in p.inequalities.iter().enumerate() {
            g.view_mut((i, 0), (1, user_n)).copy_from(&row.coeffs.transpose());
            h[i] = row.rhs;
        }
        if nlin > 0 {
            cones.push(Cone::NonNeg(nlin));
        }

        // slack = (cᵀx + d, A x + b) = h − G x
        let mut r = nlin;
        for soc in &p.socs {
            g.view_mut((r, 0), (1, user_n)).copy_from(&(-&soc.c).transpose());
            h[r] = soc.d;
            let k = soc.a.nrows();
            g.view_mut((r + 1, 0), (k, user_n)).copy_from(&(-&soc.a));
            h.rows_mut(r + 1, k).copy_from(&soc.b);
            cones.push(Cone::Soc(k + 1));
            r += k + 1;
        }

        // ½‖F x‖² ≤ t  ⇔  ‖(F x, t − ½)‖ ≤ t + ½
        if let Some(f) = factor {
            let k = f.nrows();
            g[(r, user_n)] = -1.0;
            h[r] = 0.5;
            g.view_mut((r + 1, 0), (k, user_n)).copy_from(&(-&f));
            g[(r + 1 + k, user_n)] = -1.0;
            h[r + 1 + k] = -0.5;
            cones.push(Cone::Soc(k + 2));
        }

        Self {
            c,
            a,
            b,
            g,
            h,
            cones,
            user_n,
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn p(&self) -> usize {
        self.b.len()
    }

    pub fn m(&self) -> usize {
        self.h.len()
    }
}

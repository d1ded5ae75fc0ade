use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Continuous-time state-space model `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStateSpace", into = "RawStateSpace")]
pub struct StateSpaceModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}", n, a.ncols())));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "A is {n}x{n} but B is {}x{} and C is {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        let all = a.iter().chain(b.iter()).chain(c.iter()).chain(d.iter());
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite state-space entry".into()));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn static_gain(k: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            c: DMatrix::zeros(1, 0),
            d: DMatrix::from_element(1, 1, k),
        }
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.n_inputs() == 1 && self.n_outputs() == 1
    }

    /// `(jωI - A)⁻¹ B` as a complex `n x m` matrix.
    pub fn resolvent_times_b(&self, omega: f64) -> Result<DMatrix<Complex64>> {
        let n = self.n_states();
        let mut m = self.a.map(|v| Complex64::new(-v, 0.0));
        for i in 0..n {
            m[(i, i)] += Complex64::new(0.0, omega);
        }
        let rhs = self.b.map(|v| Complex64::new(v, 0.0));
        let x = m
            .lu()
            .solve(&rhs)
            .ok_or(Error::SingularResolvent { omega })?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularResolvent { omega });
        }
        Ok(x)
    }

    /// SISO frequency response at `ω` rad/s.
    pub fn response_at(&self, omega: f64) -> Result<Complex64> {
        if !self.is_siso() {
            return Err(Error::Dimension(format!(
                "frequency response needs a SISO model, got {} outputs x {} inputs",
                self.n_outputs(),
                self.n_inputs()
            )));
        }
        let d = Complex64::new(self.d[(0, 0)], 0.0);
        if self.n_states() == 0 {
            return Ok(d);
        }
        let x = self.resolvent_times_b(omega)?;
        let y = (0..self.n_states())
            .map(|i| x[(i, 0)] * self.c[(0, i)])
            .sum::<Complex64>();
        Ok(y + d)
    }

    /// `self` followed by `next`: the output of `self` drives `next`.
    ///
    /// The state is ordered `[x_self, x_next]`, so the block structure is
    /// `A = [[A1, 0], [B2 C1, A2]]`, `B = [B1; B2 D1]`, `C = [D2 C1, C2]`,
    /// `D = D2 D1`.
    pub fn series(&self, next: &StateSpaceModel) -> Result<StateSpaceModel> {
        if self.n_outputs() != next.n_inputs() {
            return Err(Error::Dimension(format!(
                "cannot feed {} outputs into {} inputs",
                self.n_outputs(),
                next.n_inputs()
            )));
        }
        let (n1, n2) = (self.n_states(), next.n_states());
        let n = n1 + n2;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        a.view_mut((n1, 0), (n2, n1)).copy_from(&(&next.b * &self.c));

        let mut b = DMatrix::zeros(n, self.n_inputs());
        b.view_mut((0, 0), (n1, self.n_inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.n_inputs()))
            .copy_from(&(&next.b * &self.d));

        let mut c = DMatrix::zeros(next.n_outputs(), n);
        c.view_mut((0, 0), (next.n_outputs(), n1))
            .copy_from(&(&next.d * &self.c));
        c.view_mut((0, n1), (next.n_outputs(), n2)).copy_from(&next.c);

        let d = &next.d * &self.d;
        StateSpaceModel::new(a, b, c, d)
    }

    pub fn poles(&self) -> Vec<Complex64> {
        if self.n_states() == 0 {
            return Vec::new();
        }
        self.a.complex_eigenvalues().iter().copied().collect()
    }
}

#[derive(Serialize, Deserialize)]
struct RawStateSpace {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    d: Vec<Vec<f64>>,
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    // An empty dimension may be written either as `[]` or as a list of empty rows.
    if nrows == 0 || ncols == 0 {
        if rows.iter().any(|r| !r.is_empty()) && nrows != 0 && ncols != 0 {
            return Err(Error::Dimension(format!("{name} should be empty")));
        }
        return Ok(DMatrix::zeros(nrows, ncols));
    }
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "{name} must be {nrows}x{ncols}"
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl TryFrom<RawStateSpace> for StateSpaceModel {
    type Error = Error;
    fn try_from(raw: RawStateSpace) -> Result<Self> {
        let n = raw.a.len();
        let p = raw.d.len();
        let m = raw.d.first().map_or(0, Vec::len);
        let a = rows_to_matrix("A", &raw.a, n, n)?;
        let b = rows_to_matrix("B", &raw.b, n, m)?;
        let c = rows_to_matrix("C", &raw.c, p, n)?;
        let d = rows_to_matrix("D", &raw.d, p, m)?;
        StateSpaceModel::new(a, b, c, d)
    }
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl From<StateSpaceModel> for RawStateSpace {
    fn from(s: StateSpaceModel) -> Self {
        RawStateSpace {
            a: matrix_to_rows(&s.a),
            b: matrix_to_rows(&s.b),
            c: matrix_to_rows(&s.c),
            d: matrix_to_rows(&s.d),
        }
    }
}

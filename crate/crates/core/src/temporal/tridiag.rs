use crate::error::{Error, Result};

/// `sub[i]` couples rows `i + 1` and `i`, `sup[i]` rows `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagSystem {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl TridiagSystem {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }
}

/// Thomas algorithm: forward elimination then back substitution, O(n).
pub fn thomas_solve(sys: &TridiagSystem) -> Result<Vec<f64>> {
    let n = sys.diag.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    if sys.sub.len() + 1 != n || sys.sup.len() + 1 != n || sys.rhs.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "tridiagonal system with {} sub, {} diag, {} super, {} rhs entries",
            sys.sub.len(),
            n,
            sys.sup.len(),
            sys.rhs.len()
        )));
    }
    let scale = sys.diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = 1e-14 * scale;
    let check = |row: usize, pivot: f64| {
        if pivot.abs() < tiny || pivot == 0.0 || !pivot.is_finite() {
            Err(Error::SingularSystem { row, pivot })
        } else {
            Ok(pivot)
        }
    };

    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = check(0, sys.diag[0])?;
    if n > 1 {
        c[0] = sys.sup[0] / pivot;
    }
    d[0] = sys.rhs[0] / pivot;
    for i in 1..n {
        pivot = check(i, sys.diag[i] - sys.sub[i - 1] * c[i - 1])?;
        if i + 1 < n {
            c[i] = sys.sup[i] / pivot;
        }
        d[i] = (sys.rhs[i] - sys.sub[i - 1] * d[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

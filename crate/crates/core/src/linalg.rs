//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Complex, DMatrix, DVector};

pub type C64 = Complex<f64>;
pub type RVec = DVector<f64>;
pub type CVec = DVector<C64>;
pub type RMat = DMatrix<f64>;
pub type CMat = DMatrix<C64>;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn complexify_vec(v: &RVec) -> CVec {
    v.map(|x| C64::new(x, 0.0))
}

pub fn complexify(m: &RMat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

/// Hermitian product `Σ a_j conj(b_j)`.
pub fn herm(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

/// Complex-bilinear product `Σ a_j b_j`.
pub fn sym(a: &CVec, b: &CVec) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn conj_vec(v: &CVec) -> CVec {
    v.map(|x| x.conj())
}

/// Standard complex structure on `R^d`, coordinates ordered
/// `(x1, y1, x2, y2, ...)` with `J e_x = e_y`.
pub fn standard_j(d: usize) -> RMat {
    assert!(d.is_multiple_of(2), "complex structure needs even dimension");
    let mut j = RMat::zeros(d, d);
    for k in 0..d / 2 {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// `R_θ = cos θ I + sin θ J`.
pub fn rotation(j: &RMat, theta: f64) -> RMat {
    RMat::identity(j.nrows(), j.ncols()) * theta.cos() + j * theta.sin()
}

/// Gram–Schmidt with a rejection threshold relative to `scale`.
///
/// Generators are processed in order; a generator whose residual norm falls
/// below `rel_tol * scale` is skipped.  Two passes of orthogonalisation keep
/// the result orthonormal to machine precision.
pub fn gram_schmidt(gens: &[CVec], rel_tol: f64, scale: f64) -> Vec<CVec> {
    let mut out: Vec<CVec> = Vec::new();
    let thresh = rel_tol * scale.max(f64::MIN_POSITIVE);
    for g in gens {
        let mut v = g.clone();
        for _ in 0..2 {
            for e in &out {
                let p = herm(&v, e);
                v -= e * p;
            }
        }
        let nv = v.norm();
        if nv > thresh {
            out.push(v / C64::new(nv, 0.0));
        }
    }
    out
}

pub fn gram_schmidt_real(gens: &[RVec], rel_tol: f64, scale: f64) -> Vec<RVec> {
    let mut out: Vec<RVec> = Vec::new();
    let thresh = rel_tol * scale.max(f64::MIN_POSITIVE);
    for g in gens {
        let mut v = g.clone();
        for _ in 0..2 {
            for e in &out {
                let p = v.dot(e);
                v -= e * p;
            }
        }
        let nv = v.norm();
        if nv > thresh {
            out.push(v / nv);
        }
    }
    out
}

/// Columns as a matrix; an empty frame gives an `n x 0` matrix.
pub fn frame_matrix(frame: &[CVec], n: usize) -> CMat {
    if frame.is_empty() {
        return CMat::zeros(n, 0);
    }
    CMat::from_columns(frame)
}

/// Orthogonal projector onto the span of an orthonormal frame.
pub fn projector(frame: &[CVec], n: usize) -> CMat {
    let f = frame_matrix(frame, n);
    &f * f.adjoint()
}

/// Projector onto the column span of a full-rank matrix `s`.
pub fn column_projector(s: &CMat) -> Option<CMat> {
    let g = s.adjoint() * s;
    let gi = g.try_inverse()?;
    Some(s * gi * s.adjoint())
}

/// Derivative of the column-span projector along a direction in which the
/// generating matrix moves by `ds`.
pub fn column_projector_derivative(s: &CMat, ds: &CMat) -> Option<CMat> {
    let gi = (s.adjoint() * s).try_inverse()?;
    let dg = ds.adjoint() * s + s.adjoint() * ds;
    let a = ds * &gi * s.adjoint();
    let b = s * &gi * ds.adjoint();
    let c = s * &gi * dg * &gi * s.adjoint();
    Some(a + b - c)
}

/// Numerical rank with threshold `rel_tol * σ_max`.
pub fn numerical_rank(m: &RMat, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

pub fn numerical_rank_c(m: &CMat, abs_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().filter(|&&s| s > abs_tol).count()
}

/// Groups sorted values into clusters whose consecutive gaps are below `tol`.
/// Returns half-open index ranges.
pub fn cluster_sorted(values: &[f64], tol: f64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    if values.is_empty() {
        return out;
    }
    let mut start = 0;
    for i in 1..values.len() {
        if values[i] - values[i - 1] > tol {
            out.push((start, i));
            start = i;
        }
    }
    out.push((start, values.len()));
    out
}

/// Largest absolute entry.
pub fn max_abs(m: &RMat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

pub fn max_abs_c(m: &CMat) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.norm()))
}

pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// Frobenius Hermitian product `tr(B* A)`.
pub fn frob_herm(a: &CMat, b: &CMat) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_j_squares_to_minus_identity() {
        let j = standard_j(4);
        assert_eq!(&j * &j, -RMat::identity(4, 4));
        assert_eq!(j[(1, 0)], 1.0);
    }

    #[test]
    fn gram_schmidt_skips_dependent_generators() {
        let a = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let b = &a * c(0.0, 2.0);
        let e = CVec::from_vec(vec![c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        let f = gram_schmidt(&[a, b, e], 1e-9, 1.0);
        assert_eq!(f.len(), 2);
        assert!(herm(&f[0], &f[1]).norm() < 1e-15);
    }

    #[test]
    fn projector_derivative_matches_difference_quotient() {
        let s0 = CMat::from_fn(4, 2, |i, j| c((i + 2 * j) as f64 * 0.3 + 1.0, (i * j) as f64 * 0.2));
        let ds = CMat::from_fn(4, 2, |i, j| c(0.1 * (i as f64 - j as f64), 0.05 * i as f64));
        let h = 1e-4;
        let p_plus = column_projector(&(&s0 + &ds * c(h, 0.0))).unwrap();
        let p_minus = column_projector(&(&s0 - &ds * c(h, 0.0))).unwrap();
        let fd = (p_plus - p_minus) / c(2.0 * h, 0.0);
        let an = column_projector_derivative(&s0, &ds).unwrap();
        let dev = max_abs_c(&(fd - an));
        assert!(dev < 1e-7, "{dev}");
    }

    #[test]
    fn clusters_split_on_gaps() {
        let v = [0.0, 1e-12, 1.0, 1.0 + 1e-11, 3.0];
        assert_eq!(cluster_sorted(&v, 1e-9), vec![(0, 2), (2, 4), (4, 5)]);
    }
}

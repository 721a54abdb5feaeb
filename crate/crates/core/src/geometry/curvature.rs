use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const HERMITIAN_TOL: f64 = 1e-8;

/// Components `R_{ij̄kl̄}` in a unitary frame, stored row-major in (i, j, k, l).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KahlerTensor {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl KahlerTensor {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n.pow(4)] }
    }

    pub fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        self.data[self.idx(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, v: Complex64) {
        let p = self.idx(i, j, k, l);
        self.data[p] = v;
    }

    /// `c(δ_ij δ_kl + δ_il δ_kj)`.
    pub fn space_form(n: usize, c: f64) -> Self {
        let mut t = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let mut v = t.get(i, i, k, k);
                v += c;
                t.set(i, i, k, k, v);
                let mut v = t.get(i, k, k, i);
                v += c;
                t.set(i, k, k, i, v);
            }
        }
        t
    }

    /// Projects an arbitrary array onto tensors with the Kähler symmetries
    /// `R_{ij̄kl̄} = R_{kj̄il̄} = R_{il̄kj̄}` and `conj R_{ij̄kl̄} = R_{jīlk̄}`.
    pub fn symmetrize(raw: &Self) -> Self {
        let n = raw.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = raw.get(i, j, k, l)
                            + raw.get(k, j, i, l)
                            + raw.get(i, l, k, j)
                            + raw.get(k, l, i, j);
                        t.set(i, j, k, l, v / 4.0);
                    }
                }
            }
        }
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = (t.get(i, j, k, l) + t.get(j, i, l, k).conj()) / 2.0;
                        out.set(i, j, k, l, v);
                    }
                }
            }
        }
        out
    }

    /// Largest deviation from the Kähler symmetries.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut d: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let v = self.get(i, j, k, l);
                        d = d
                            .max((v - self.get(k, j, i, l)).norm())
                            .max((v - self.get(i, l, k, j)).norm())
                            .max((v.conj() - self.get(j, i, l, k)).norm());
                    }
                }
            }
        }
        d
    }
}

/// Curvature at one point in a unitary frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvaturePointData {
    pub n: usize,
    pub tensor: KahlerTensor,
    /// `R_{ij̄} = Σ_k R_{ij̄kk̄}`, row-major.
    pub ricci: Vec<Complex64>,
    /// Trace of the Ricci tensor (half the Riemannian scalar curvature).
    pub scalar: f64,
    /// `S_{ij̄} = R_{ij̄} − (scalar/n)δ_ij`.
    pub traceless_ricci: Vec<Complex64>,
    /// `R_{iīiī}` per frame vector.
    pub holomorphic_sectional: Vec<f64>,
    /// Extremes of `R_{iīkk̄}` over frame pairs.
    pub bisectional_min: f64,
    pub bisectional_max: f64,
}

impl CurvaturePointData {
    pub fn from_tensor(tensor: KahlerTensor) -> Self {
        let n = tensor.n;
        let zero = Complex64::new(0.0, 0.0);
        let mut ricci = vec![zero; n * n];
        for i in 0..n {
            for j in 0..n {
                ricci[i * n + j] = (0..n).map(|k| tensor.get(i, j, k, k)).sum();
            }
        }
        let scalar = (0..n).map(|i| ricci[i * n + i].re).sum::<f64>();
        let mut traceless_ricci = ricci.clone();
        for i in 0..n {
            traceless_ricci[i * n + i] -= scalar / n as f64;
        }
        let holomorphic_sectional = (0..n).map(|i| tensor.get(i, i, i, i).re).collect();
        let mut bmin = f64::INFINITY;
        let mut bmax = f64::NEG_INFINITY;
        for i in 0..n {
            for k in 0..n {
                let v = tensor.get(i, i, k, k).re;
                bmin = bmin.min(v);
                bmax = bmax.max(v);
            }
        }
        Self {
            n,
            tensor,
            ricci,
            scalar,
            traceless_ricci,
            holomorphic_sectional,
            bisectional_min: bmin,
            bisectional_max: bmax,
        }
    }

    /// Tensor of a U(n)-invariant metric from its four frame components, frame
    /// vector 0 radial.
    pub fn from_components(n: usize, a: f64, b: f64, c: f64, d: f64) -> Self {
        let mut t = KahlerTensor::zeros(n);
        let re = |v: f64| Complex64::new(v, 0.0);
        t.set(0, 0, 0, 0, re(a));
        for p in 1..n {
            t.set(0, 0, p, p, re(b));
            t.set(p, p, 0, 0, re(b));
            t.set(0, p, p, 0, re(b));
            t.set(p, 0, 0, p, re(b));
            t.set(p, p, p, p, re(c));
            for q in 1..n {
                if q != p {
                    t.set(p, p, q, q, re(d));
                    t.set(p, q, q, p, re(d));
                }
            }
        }
        Self::from_tensor(t)
    }

    pub fn traceless_trace(&self) -> f64 {
        (0..self.n).map(|i| self.traceless_ricci[i * self.n + i].re).sum::<f64>().abs()
    }

    /// Largest absolute tensor entry.
    pub fn max_abs(&self) -> f64 {
        self.tensor.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Matrix of the Phong-Sturm operator on traceless hermitian (1,1)-forms in
/// an orthonormal basis, with its spectrum.
#[derive(Debug, Clone)]
pub struct PhongSturm {
    pub matrix: DMatrix<f64>,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub sum_two_lowest: f64,
    pub hermitian_residual: f64,
}

/// Orthonormal basis of traceless hermitian n×n matrices, `tr(E_a E_b) = δ_ab`.
pub fn traceless_hermitian_basis(n: usize) -> Vec<Vec<Complex64>> {
    let zero = Complex64::new(0.0, 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut basis = Vec::with_capacity(n * n - 1);
    for j in 0..n {
        for k in j + 1..n {
            let mut e = vec![zero; n * n];
            e[j * n + k] = Complex64::new(s, 0.0);
            e[k * n + j] = Complex64::new(s, 0.0);
            basis.push(e);
            let mut e = vec![zero; n * n];
            e[j * n + k] = Complex64::new(0.0, -s);
            e[k * n + j] = Complex64::new(0.0, s);
            basis.push(e);
        }
    }
    for l in 1..n {
        let mut e = vec![zero; n * n];
        let norm = ((l * (l + 1)) as f64).sqrt();
        for j in 0..l {
            e[j * n + j] = Complex64::new(1.0 / norm, 0.0);
        }
        e[l * n + l] = Complex64::new(-(l as f64) / norm, 0.0);
        basis.push(e);
    }
    basis
}

/// `S_{ij̄kl̄} = R_{ij̄kl̄} − (1/n)(S_{ij̄}δ_kl + δ_ij S_{kl̄}) + (1/n²)R δ_ij δ_kl`,
/// where `S_{ij̄}` is the traceless Ricci tensor and `R` the Ricci trace.
pub fn phong_sturm_tensor(point: &CurvaturePointData) -> KahlerTensor {
    let n = point.n;
    let nf = n as f64;
    let mut t = point.tensor.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut v = t.get(i, j, k, l);
                    if k == l {
                        v -= point.traceless_ricci[i * n + j] / nf;
                    }
                    if i == j {
                        v -= point.traceless_ricci[k * n + l] / nf;
                    }
                    if i == j && k == l {
                        v += point.scalar / (nf * nf);
                    }
                    t.set(i, j, k, l, v);
                }
            }
        }
    }
    t
}

/// `(Sφ)_{ij̄} = Σ_{kl} S_{ij̄kl̄} φ_{lk̄}`.
pub fn apply_tensor(t: &KahlerTensor, phi: &[Complex64]) -> Vec<Complex64> {
    let n = t.n;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..n {
                for l in 0..n {
                    s += t.get(i, j, k, l) * phi[l * n + k];
                }
            }
            out[i * n + j] = s;
        }
    }
    out
}

pub fn phong_sturm_operator(point: &CurvaturePointData) -> Result<PhongSturm> {
    let n = point.n;
    if n < 2 {
        return Err(Error::DimensionTooSmall { n });
    }
    let s = phong_sturm_tensor(point);
    let basis = traceless_hermitian_basis(n);
    let d = basis.len();
    let images: Vec<Vec<Complex64>> = basis.iter().map(|e| apply_tensor(&s, e)).collect();
    let mut full = vec![Complex64::new(0.0, 0.0); d * d];
    for a in 0..d {
        for b in 0..d {
            // tr(E_a X) = Σ (E_a)_{ji} X_{ij}
            let mut v = Complex64::new(0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    v += basis[a][j * n + i] * images[b][i * n + j];
                }
            }
            full[a * d + b] = v;
        }
    }
    let mut residual: f64 = 0.0;
    for a in 0..d {
        for b in 0..d {
            let v = full[a * d + b];
            residual = residual.max(v.im.abs()).max((v - full[b * d + a]).norm());
        }
    }
    if residual > HERMITIAN_TOL {
        return Err(Error::NonHermitian { residual });
    }
    let matrix = DMatrix::from_fn(d, d, |a, b| 0.5 * (full[a * d + b].re + full[b * d + a].re));
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(matrix.clone()).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.total_cmp(b));
    let sum_two_lowest = eigenvalues[0] + eigenvalues[1];
    Ok(PhongSturm { matrix, eigenvalues, sum_two_lowest, hermitian_residual: residual })
}

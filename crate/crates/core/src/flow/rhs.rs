//! Right-hand sides of the Ricci–DeTurck flow.
//!
//! With `g = ḡ + h` the flow can be written in strong form
//! `∂_t g = −2Ric(g) − L_X g` or in split form
//! `∂_t h = Δ_ḡ h + 2Rm(h) + Q⁰ + div Q¹`, where
//! `Q¹^p_{ij} = (g^{pq} − ḡ^{pq}) ∇_q h_{ij}` and `Q⁰` collects the
//! gradient-quadratic and curvature terms. Covariant derivatives are taken
//! with respect to `ḡ`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{MetricField, Slot, SymTensorField, TensorField};
use crate::gauge::deturck_vector;
use crate::geometry::{christoffel, lie_derivative, nabla_once, ricci};
use crate::grid::sym_index;
use crate::spectral::Spectrum;

/// The quadratic terms `Q⁰` and `Q¹` of the perturbation equation.
#[derive(Debug, Clone)]
pub struct QTerms {
    pub q0: SymTensorField,
    /// `Q¹^p_{ij}`, slots `[Contra, Co, Co]`.
    pub q1: TensorField,
}

/// `sup_x |h|_ḡ`, the pointwise norm measured by the background metric.
pub fn background_sup_norm(h: &SymTensorField, background: &MetricField) -> f64 {
    let grid = h.grid();
    let d = grid.dim();
    let binv = background.inverse();
    let mut worst: f64 = 0.0;
    for p in 0..grid.len() {
        let b = binv.at(p);
        let m = h.at(p);
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                for a in 0..d {
                    for c in 0..d {
                        s += b[i][a] * b[j][c] * m[i][j] * m[a][c];
                    }
                }
            }
        }
        worst = worst.max(s.max(0.0).sqrt());
    }
    worst
}

fn connection(background: &MetricField) -> Option<TensorField> {
    if background.is_constant() {
        None
    } else {
        Some(christoffel(background))
    }
}

fn gather3(t: &TensorField, d: usize, p: usize) -> [[[f64; 3]; 3]; 3] {
    let mut a = [[[0.0; 3]; 3]; 3];
    for c in 0..d {
        for i in 0..d {
            for j in 0..d {
                a[c][i][j] = t.components()[(c * d + i) * d + j][p];
            }
        }
    }
    a
}

/// `−½ g^{pq} g^{mℓ}(−∇_i h_{pm}∇_j h_{qℓ} − 2∇_m h_{ip}∇_q h_{jℓ} + 2∇_m h_{ip}∇_ℓ h_{jq}
///  + 2∇_p h_{iℓ}∇_j h_{qm} + 2∇_i h_{pm}∇_q h_{jℓ})` at one point, with `a[c][i][j] = ∇_c h_{ij}`.
pub(crate) fn gradient_quadratic(d: usize, ginv: &[[f64; 3]; 3], a: &[[[f64; 3]; 3]; 3]) -> [[f64; 3]; 3] {
    let mut raised = [[[0.0; 3]; 3]; 3];
    let mut w = [[[0.0; 3]; 3]; 3];
    let mut v = [[[0.0; 3]; 3]; 3];
    for j in 0..d {
        for p in 0..d {
            for m in 0..d {
                let (mut r, mut ww, mut vv) = (0.0, 0.0, 0.0);
                for q in 0..d {
                    for l in 0..d {
                        let gg = ginv[p][q] * ginv[m][l];
                        r += gg * a[j][q][l];
                        ww += gg * a[q][j][l];
                        vv += gg * a[l][j][q];
                    }
                }
                raised[j][p][m] = r;
                w[j][p][m] = ww;
                v[j][p][m] = vv;
            }
        }
    }
    let mut out = [[0.0; 3]; 3];
    for i in 0..d {
        for j in i..d {
            let (mut t1, mut t2, mut t3, mut t4, mut t5) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for p in 0..d {
                for m in 0..d {
                    t1 += a[i][p][m] * raised[j][p][m];
                    t2 += a[m][i][p] * w[j][p][m];
                    t3 += a[m][i][p] * v[j][p][m];
                    t4 += a[p][i][m] * raised[j][p][m];
                    t5 += a[i][p][m] * w[j][p][m];
                }
            }
            let val = -0.5 * (-t1 - 2.0 * t2 + 2.0 * t3 + 2.0 * t4 + 2.0 * t5);
            out[i][j] = val;
            out[j][i] = val;
        }
    }
    out
}

/// Computes `Q⁰` and `Q¹` for the perturbation `h` of `background`.
///
/// `rm` is the background curvature `R_{pij}^m` (slots `[Co, Co, Co, Contra]`);
/// `None` means a flat background.
pub fn q_terms(h: &SymTensorField, background: &MetricField, rm: Option<&TensorField>) -> Result<QTerms> {
    let norm = background_sup_norm(h, background);
    if !(norm < 1.0) {
        return Err(Error::GammaExceeded { norm });
    }
    let gamma = connection(background);
    q_terms_unchecked(h, background, rm, gamma.as_ref())
}

pub(crate) fn q_terms_unchecked(
    h: &SymTensorField,
    background: &MetricField,
    rm: Option<&TensorField>,
    gamma: Option<&TensorField>,
) -> Result<QTerms> {
    let grid = *h.grid();
    let d = grid.dim();
    let n = grid.len();
    let g = background.perturbed(h)?;
    let ginv = g.inverse();
    let binv = background.inverse();
    let big_g = ginv.sub(&binv)?;
    let dh = nabla_once(&h.to_tensor(), gamma);
    let mut q1 = TensorField::zeros(&grid, &[Slot::Contra, Slot::Co, Slot::Co]);
    for p in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut v = vec![0.0; n];
                for q in 0..d {
                    let gpq = big_g.get(p, q);
                    let a = &dh.components()[(q * d + i) * d + j];
                    for x in 0..n {
                        v[x] += gpq[x] * a[x];
                    }
                }
                *q1.component_mut(&[p, i, j]) = v;
            }
        }
    }
    let mut gt = big_g.to_tensor();
    gt = TensorField::from_components(&grid, &[Slot::Contra, Slot::Contra], gt.into_components())?;
    let dg = nabla_once(&gt, gamma);
    let mut q0 = SymTensorField::zeros(&grid);
    for x in 0..n {
        let gi = ginv.at(x);
        let a = gather3(&dh, d, x);
        let mut m = gradient_quadratic(d, &gi, &a);
        // − (∇_p G^{pq}) ∇_q h_ij
        let mut divg = [0.0; 3];
        for q in 0..d {
            for p in 0..d {
                divg[q] += dg.components()[(p * d + p) * d + q][x];
            }
        }
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for q in 0..d {
                    s += divg[q] * a[q][i][j];
                }
                m[i][j] -= s;
            }
        }
        if let Some(rm) = rm {
            let gg = big_g.at(x);
            let hh = h.at(x);
            let r = |p: usize, i: usize, j: usize, k: usize| rm.components()[((p * d + i) * d + j) * d + k][x];
            for i in 0..d {
                for j in i..d {
                    let mut s = 0.0;
                    for p in 0..d {
                        for q in 0..d {
                            for k in 0..d {
                                s += gg[p][q] * (r(p, i, j, k) + r(p, j, i, k)) * hh[k][q];
                                s -= gg[p][q] * (r(i, p, q, k) * hh[k][j] + r(j, p, q, k) * hh[i][k]);
                            }
                        }
                    }
                    m[i][j] += s;
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                q0.packed_mut()[sym_index(d, i, j)][x] = m[i][j];
            }
        }
    }
    Ok(QTerms { q0, q1 })
}

/// `(div Q¹)_{ij} = ∇_p Q¹^p_{ij}`.
pub fn divergence(q1: &TensorField, background: &MetricField) -> Result<SymTensorField> {
    let gamma = connection(background);
    divergence_with(q1, gamma.as_ref())
}

pub(crate) fn divergence_with(q1: &TensorField, gamma: Option<&TensorField>) -> Result<SymTensorField> {
    let grid = *q1.grid();
    let d = grid.dim();
    let n = grid.len();
    let mut full = TensorField::zeros(&grid, &[Slot::Co, Slot::Co]);
    if gamma.is_none() {
        for i in 0..d {
            for j in 0..d {
                let mut v = vec![0.0; n];
                for p in 0..d {
                    let dp = Spectrum::new(&grid, q1.component(&[p, i, j])).derivative(p, 1);
                    for x in 0..n {
                        v[x] += dp[x];
                    }
                }
                *full.component_mut(&[i, j]) = v;
            }
        }
    } else {
        let nq = nabla_once(q1, gamma);
        for i in 0..d {
            for j in 0..d {
                let mut v = vec![0.0; n];
                for p in 0..d {
                    let c = nq.component(&[p, p, i, j]);
                    for x in 0..n {
                        v[x] += c[x];
                    }
                }
                *full.component_mut(&[i, j]) = v;
            }
        }
    }
    SymTensorField::from_tensor(&full)
}

/// `ḡ^{pq} ∇²_{pq} h`.
pub fn background_laplacian(h: &SymTensorField, background: &MetricField) -> SymTensorField {
    let grid = *h.grid();
    let d = grid.dim();
    if background.is_constant() {
        let b = background.inverse().at(0);
        let mut out = h.clone();
        for c in out.packed_mut() {
            *c = Spectrum::new(&grid, c)
                .multiplied(|k| {
                    let mut s = 0.0;
                    for p in 0..d {
                        for q in 0..d {
                            s += b[p][q] * k[p] * k[q];
                        }
                    }
                    Complex64::new(-s, 0.0)
                })
                .to_physical();
        }
        return out;
    }
    let gamma = christoffel(background);
    let ddh = nabla_once(&nabla_once(&h.to_tensor(), Some(&gamma)), Some(&gamma));
    let binv = background.inverse();
    let mut out = SymTensorField::zeros(&grid);
    for i in 0..d {
        for j in i..d {
            let mut v = vec![0.0; grid.len()];
            for p in 0..d {
                for q in 0..d {
                    let b = binv.get(p, q);
                    let c = ddh.component(&[p, q, i, j]);
                    for x in 0..grid.len() {
                        v[x] += b[x] * c[x];
                    }
                }
            }
            *out.get_mut(i, j) = v;
        }
    }
    out
}

/// `Rm(h)_{ij} = ḡ^{pq} R_{pij}^m h_{qm}`.
pub fn curvature_action(h: &SymTensorField, background: &MetricField, rm: &TensorField) -> SymTensorField {
    let grid = *h.grid();
    let d = grid.dim();
    let binv = background.inverse();
    let mut out = SymTensorField::zeros(&grid);
    for x in 0..grid.len() {
        let b = binv.at(x);
        let hh = h.at(x);
        let r = |p: usize, i: usize, j: usize, k: usize| rm.components()[((p * d + i) * d + j) * d + k][x];
        for i in 0..d {
            for j in i..d {
                let mut s = 0.0;
                for p in 0..d {
                    for q in 0..d {
                        for m in 0..d {
                            s += 0.5 * b[p][q] * (r(p, i, j, m) + r(p, j, i, m)) * hh[q][m];
                        }
                    }
                }
                out.packed_mut()[sym_index(d, i, j)][x] = s;
            }
        }
    }
    out
}

/// Strong form `−2Ric(g) − L_X g` with `X` the DeTurck vector of `g` relative to `background`.
pub fn strong_rhs(g: &MetricField, background: &MetricField) -> SymTensorField {
    let ric = ricci(g);
    let x = deturck_vector(g, background);
    let lie = lie_derivative(&x, g.sym());
    ric.zip_with(&lie, |r, l| -2.0 * r - l).expect("shared grid")
}

/// Split form `Δ_ḡ h + 2Rm(h) + Q⁰ + div Q¹` with `h = g − ḡ`.
pub fn split_rhs(g: &MetricField, background: &MetricField, rm: Option<&TensorField>) -> Result<SymTensorField> {
    let h = g.difference(background)?;
    let gamma = connection(background);
    let norm = background_sup_norm(&h, background);
    if !(norm < 1.0) {
        return Err(Error::GammaExceeded { norm });
    }
    let q = q_terms_unchecked(&h, background, rm, gamma.as_ref())?;
    let div = divergence_with(&q.q1, gamma.as_ref())?;
    let mut out = background_laplacian(&h, background).add(&q.q0)?.add(&div)?;
    if let Some(rm) = rm {
        out = out.add(&curvature_action(&h, background, rm).scaled(2.0))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TorusGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_perturbation(grid: &TorusGrid, seed: u64, amp: f64, modes: i32) -> SymTensorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = grid.dim();
        let mut terms = Vec::new();
        for c in 0..grid.sym_len() {
            for _ in 0..6 {
                let k: Vec<f64> = (0..d).map(|_| rng.gen_range(-modes..=modes) as f64).collect();
                terms.push((c, k, rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3)));
            }
        }
        let mut packed = vec![vec![0.0; grid.len()]; grid.sym_len()];
        for p in 0..grid.len() {
            let x = grid.coord(p);
            for (c, k, a, ph) in &terms {
                let arg: f64 = k.iter().zip(&x).map(|(k, x)| k * x).sum::<f64>() + ph;
                packed[*c][p] += a * arg.cos();
            }
        }
        let h = SymTensorField::from_packed(grid, packed).unwrap();
        let s = h.sup_norm();
        h.scaled(amp / s)
    }

    fn oracle_q0(
        d: usize,
        gi: &[[f64; 3]; 3],
        gbar_inv: &[[f64; 3]; 3],
        a: &[[[f64; 3]; 3]; 3],
        div_g: &[f64; 3],
        h: &[[f64; 3]; 3],
        r: &dyn Fn(usize, usize, usize, usize) -> f64,
        i: usize,
        j: usize,
    ) -> f64 {
        let mut quad = 0.0;
        for p in 0..d {
            for q in 0..d {
                for m in 0..d {
                    for l in 0..d {
                        let c = gi[p][q] * gi[m][l];
                        quad += c
                            * (-a[i][p][m] * a[j][q][l] - 2.0 * a[m][i][p] * a[q][j][l]
                                + 2.0 * a[m][i][p] * a[l][j][q]
                                + 2.0 * a[p][i][l] * a[j][q][m]
                                + 2.0 * a[i][p][m] * a[q][j][l]);
                    }
                }
            }
        }
        let mut val = -0.5 * quad;
        for q in 0..d {
            val -= div_g[q] * a[q][i][j];
        }
        for p in 0..d {
            for q in 0..d {
                let gpq = gi[p][q] - gbar_inv[p][q];
                for m in 0..d {
                    val += gpq * (r(p, i, j, m) * h[m][q] + r(p, j, i, m) * h[m][q]);
                    val += -gpq * (r(i, p, q, m) * h[m][j] + r(j, p, q, m) * h[i][m]);
                }
            }
        }
        val
    }

    #[test]
    fn zero_perturbation_has_zero_q() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let q = q_terms(&SymTensorField::zeros(&grid), &MetricField::flat(&grid), None).unwrap();
        assert_eq!(q.q0.max_abs_entry(), 0.0);
        assert_eq!(q.q1.sup_norm(), 0.0);
    }

    #[test]
    fn gamma_guard() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let h = SymTensorField::constant(&grid, &[[0.8, 0.0, 0.0], [0.0, -0.7, 0.0], [0.0; 3]]);
        assert!(matches!(q_terms(&h, &MetricField::flat(&grid), None), Err(Error::GammaExceeded { .. })));
    }

    #[test]
    fn q0_is_quadratic_on_flat_background() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let base = smooth_perturbation(&grid, 7, 1.0, 3);
        let flat = MetricField::flat(&grid);
        let eps = [1e-2, 1e-3, 1e-4];
        let norms: Vec<f64> =
            eps.iter().map(|e| q_terms(&base.scaled(*e), &flat, None).unwrap().q0.sup_norm()).collect();
        let slope = (norms[2].ln() - norms[0].ln()) / (eps[2].ln() - eps[0].ln());
        assert!((slope - 2.0).abs() <= 0.02, "slope {slope}");
    }

    #[test]
    fn q0_matches_index_by_index_oracle_with_synthetic_curvature() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let d = 2;
        let h = smooth_perturbation(&grid, 3, 0.1, 2);
        let background = MetricField::constant(&grid, &[[1.1, 0.2, 0.0], [0.2, 0.9, 0.0], [0.0; 3]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rm = TensorField::from_components(
            &grid,
            &[Slot::Co, Slot::Co, Slot::Co, Slot::Contra],
            (0..16).map(|_| (0..grid.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect(),
        )
        .unwrap();
        let q = q_terms(&h, &background, Some(&rm)).unwrap();
        // independent pieces: plain spectral partials and explicit inverses
        let dh: Vec<Vec<Vec<f64>>> = (0..d)
            .map(|c| h.packed().iter().map(|comp| crate::spectral::derivative(&grid, comp, c, 1)).collect())
            .collect();
        let bi = crate::field::invert(d, &background.at(0));
        let inv_at = |x: usize| {
            let mut m = background.at(0);
            let hh = h.at(x);
            for i in 0..d {
                for j in 0..d {
                    m[i][j] += hh[i][j];
                }
            }
            crate::field::invert(d, &m)
        };
        let ginv_comp: Vec<Vec<Vec<f64>>> = (0..d)
            .map(|p| (0..d).map(|q| (0..grid.len()).map(|x| inv_at(x)[p][q] - bi[p][q]).collect()).collect())
            .collect();
        let mut worst: f64 = 0.0;
        for x in 0..grid.len() {
            let gi = inv_at(x);
            let mut a = [[[0.0; 3]; 3]; 3];
            for c in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        a[c][i][j] = dh[c][sym_index(d, i, j)][x];
                    }
                }
            }
            let mut div_g = [0.0; 3];
            for q in 0..d {
                for p in 0..d {
                    div_g[q] += crate::spectral::derivative(&grid, &ginv_comp[p][q], p, 1)[x];
                }
            }
            let r = |p: usize, i: usize, j: usize, m: usize| rm.component(&[p, i, j, m])[x];
            for i in 0..d {
                for j in 0..d {
                    let o = oracle_q0(d, &gi, &bi, &a, &div_g, &h.at(x), &r, i, j);
                    let v = if i <= j { q.q0.get(i, j)[x] } else { q.q0.get(j, i)[x] };
                    worst = worst.max((o - v).abs());
                }
            }
        }
        assert!(worst <= 1e-10, "worst {worst}");
    }

    #[test]
    fn strong_and_split_forms_agree() {
        let grid = TorusGrid::new(2, 64).unwrap();
        let flat = MetricField::flat(&grid);
        for seed in 0..3 {
            let h = smooth_perturbation(&grid, seed, 0.05, 3);
            let g = flat.perturbed(&h).unwrap();
            let a = strong_rhs(&g, &flat);
            let b = split_rhs(&g, &flat, None).unwrap();
            let err = a.sub(&b).unwrap().max_abs_entry();
            assert!(err <= 1e-10, "seed {seed}: {err}");
        }
    }

    #[test]
    fn strong_and_split_agree_on_constant_background_in_3d() {
        let grid = TorusGrid::new(3, 32).unwrap();
        let bg = MetricField::constant(&grid, &[[1.2, 0.1, 0.0], [0.1, 0.9, 0.05], [0.0, 0.05, 1.0]]).unwrap();
        let h = smooth_perturbation(&grid, 5, 0.05, 2);
        let g = bg.perturbed(&h).unwrap();
        let err = strong_rhs(&g, &bg).sub(&split_rhs(&g, &bg, None).unwrap()).unwrap().max_abs_entry();
        assert!(err <= 1e-9, "{err}");
    }

    #[test]
    fn flat_state_is_stationary() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let flat = MetricField::flat(&grid);
        assert_eq!(strong_rhs(&flat, &flat).max_abs_entry(), 0.0);
    }
}

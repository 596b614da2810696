//! Coordinate tensor algebra on arrays of jets.
//!
//! Layouts: rank-2 arrays are row-major `m×m`; Christoffel symbols are stored
//! as `Γ^k_{ij}` at `k·m² + i·m + j`; rank-3 covariant arrays `∇T` as
//! `(∇_k T)_{ij}` at `k·m² + i·m + j`. Every routine differentiates at most
//! once, so outputs are one jet order below their most-differentiated input.

use crate::jet::Jet;
use crate::Result;

#[inline]
pub(crate) fn ix2(m: usize, i: usize, j: usize) -> usize {
    i * m + j
}

#[inline]
pub(crate) fn ix3(m: usize, k: usize, i: usize, j: usize) -> usize {
    (k * m + i) * m + j
}

fn zero_like(j: &Jet) -> Jet {
    j.scale(0.0)
}

/// Σ over an iterator of jets; `seed` fixes the shape when the iterator is empty.
pub(crate) fn sum(seed: &Jet, terms: impl IntoIterator<Item = Jet>) -> Jet {
    terms.into_iter().fold(zero_like(seed), |acc, t| &acc + &t)
}

/// Inverse of a symmetric positive definite jet matrix (Gauss–Jordan, no pivoting).
pub(crate) fn inverse(m: usize, a: &[Jet]) -> Result<Vec<Jet>> {
    let mut a = a.to_vec();
    let one = a[0].scale(0.0).add_scalar(1.0);
    let mut inv: Vec<Jet> = (0..m * m)
        .map(|k| {
            if k / m == k % m {
                one.clone()
            } else {
                zero_like(&one)
            }
        })
        .collect();
    for col in 0..m {
        let pivot = a[ix2(m, col, col)].recip()?;
        for c in 0..m {
            a[ix2(m, col, c)] = &a[ix2(m, col, c)] * &pivot;
            inv[ix2(m, col, c)] = &inv[ix2(m, col, c)] * &pivot;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let factor = a[ix2(m, r, col)].clone();
            for c in 0..m {
                a[ix2(m, r, c)] = &a[ix2(m, r, c)] - &(&factor * &a[ix2(m, col, c)]);
                inv[ix2(m, r, c)] = &inv[ix2(m, r, c)] - &(&factor * &inv[ix2(m, col, c)]);
            }
        }
    }
    Ok(inv)
}

/// `∂_l g_ij` as `dg[ix3(l, i, j)]`.
fn partials2(m: usize, g: &[Jet]) -> Result<Vec<Jet>> {
    let mut out = Vec::with_capacity(m * m * m);
    for l in 0..m {
        for ij in 0..m * m {
            out.push(g[ij].partial(l)?);
        }
    }
    Ok(out)
}

/// `Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
pub(crate) fn christoffel(m: usize, g: &[Jet], ginv: &[Jet]) -> Result<Vec<Jet>> {
    let dg = partials2(m, g)?;
    // first kind: Γ_{l,ij}
    let mut first = Vec::with_capacity(m * m * m);
    for l in 0..m {
        for i in 0..m {
            for j in 0..m {
                let t = &(&dg[ix3(m, i, j, l)] + &dg[ix3(m, j, i, l)]) - &dg[ix3(m, l, i, j)];
                first.push(t.scale(0.5));
            }
        }
    }
    let mut gamma = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                gamma.push(sum(
                    &first[0],
                    (0..m).map(|l| &ginv[ix2(m, k, l)] * &first[ix3(m, l, i, j)]),
                ));
            }
        }
    }
    Ok(gamma)
}

/// `v^i = g^{ij} w_j`.
pub(crate) fn raise(m: usize, ginv: &[Jet], w: &[Jet]) -> Vec<Jet> {
    (0..m)
        .map(|i| sum(&w[0], (0..m).map(|j| &ginv[ix2(m, i, j)] * &w[j])))
        .collect()
}

/// `g^{ij} T_ij`.
pub(crate) fn trace(m: usize, ginv: &[Jet], t: &[Jet]) -> Jet {
    sum(&t[0], (0..m * m).map(|ij| &ginv[ij] * &t[ij]))
}

/// `Hess_ij = ∂_i∂_j f − Γ^k_ij ∂_k f` from the jets of `df`.
pub(crate) fn hessian(m: usize, df: &[Jet], gamma: &[Jet]) -> Result<Vec<Jet>> {
    let mut h = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let second = df[i].partial(j)?;
            let corr = sum(&second, (0..m).map(|k| &gamma[ix3(m, k, i, j)] * &df[k]));
            h.push(&second - &corr);
        }
    }
    Ok(h)
}

/// `(∇_k T)_ij = ∂_k T_ij − Γ^l_ki T_lj − Γ^l_kj T_il`.
pub(crate) fn cov_deriv_sym2(m: usize, t: &[Jet], gamma: &[Jet]) -> Result<Vec<Jet>> {
    let mut out = Vec::with_capacity(m * m * m);
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let d = t[ix2(m, i, j)].partial(k)?;
                let c = sum(
                    &d,
                    (0..m).map(|l| {
                        &(&gamma[ix3(m, l, k, i)] * &t[ix2(m, l, j)])
                            + &(&gamma[ix3(m, l, k, j)] * &t[ix2(m, i, l)])
                    }),
                );
                out.push(&d - &c);
            }
        }
    }
    Ok(out)
}

/// `(div T)_j = g^{ik} (∇_i T)_kj`.
pub(crate) fn div_sym2(m: usize, t: &[Jet], ginv: &[Jet], gamma: &[Jet]) -> Result<Vec<Jet>> {
    let nabla = cov_deriv_sym2(m, t, gamma)?;
    Ok((0..m)
        .map(|j| {
            sum(
                &nabla[0],
                (0..m)
                    .flat_map(|i| (0..m).map(move |k| (i, k)))
                    .map(|(i, k)| &ginv[ix2(m, i, k)] * &nabla[ix3(m, i, k, j)]),
            )
        })
        .collect())
}

/// `(∇_j X)^i = ∂_j X^i + Γ^i_jk X^k`, stored at `ix2(j, i)`.
pub(crate) fn cov_deriv_vec(m: usize, x: &[Jet], gamma: &[Jet]) -> Result<Vec<Jet>> {
    let mut out = Vec::with_capacity(m * m);
    for j in 0..m {
        for i in 0..m {
            let d = x[i].partial(j)?;
            let c = sum(&d, (0..m).map(|k| &gamma[ix3(m, i, j, k)] * &x[k]));
            out.push(&d + &c);
        }
    }
    Ok(out)
}

/// `div X = ∂_i X^i + Γ^i_ik X^k`.
pub(crate) fn div_vec(m: usize, x: &[Jet], gamma: &[Jet]) -> Result<Jet> {
    let n = cov_deriv_vec(m, x, gamma)?;
    Ok(sum(&n[0], (0..m).map(|i| n[ix2(m, i, i)].clone())))
}

/// `(trace ∇²X)^i = g^{kj} (∇_k ∇X)^i_j`.
pub(crate) fn rough_laplacian_vec(
    m: usize,
    x: &[Jet],
    ginv: &[Jet],
    gamma: &[Jet],
) -> Result<Vec<Jet>> {
    // n[ix2(j, i)] = (∇_j X)^i
    let n = cov_deriv_vec(m, x, gamma)?;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut terms = Vec::with_capacity(m * m);
        for k in 0..m {
            for j in 0..m {
                let d = n[ix2(m, j, i)].partial(k)?;
                let up = sum(
                    &d,
                    (0..m).map(|l| &gamma[ix3(m, i, k, l)] * &n[ix2(m, j, l)]),
                );
                let down = sum(
                    &d,
                    (0..m).map(|l| &gamma[ix3(m, l, k, j)] * &n[ix2(m, l, i)]),
                );
                let nn = &(&d + &up) - &down;
                terms.push(&ginv[ix2(m, k, j)] * &nn);
            }
        }
        out.push(sum(&terms[0], terms.iter().cloned()));
    }
    Ok(out)
}

/// `Ric_ij = ∂_k Γ^k_ij − ∂_i Γ^k_kj + Γ^k_kl Γ^l_ij − Γ^k_il Γ^l_kj`.
pub(crate) fn ricci(m: usize, gamma: &[Jet]) -> Result<Vec<Jet>> {
    let mut ric = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut acc = gamma[0].partial(0)?.scale(0.0);
            for k in 0..m {
                acc = &acc + &gamma[ix3(m, k, i, j)].partial(k)?;
                acc = &acc - &gamma[ix3(m, k, k, j)].partial(i)?;
                for l in 0..m {
                    acc = &acc + &(&gamma[ix3(m, k, k, l)] * &gamma[ix3(m, l, i, j)]);
                    acc = &acc - &(&gamma[ix3(m, k, i, l)] * &gamma[ix3(m, l, k, j)]);
                }
            }
            ric.push(acc);
        }
    }
    Ok(ric)
}

/// `(L_X g)_ij = X^k ∂_k g_ij + g_kj ∂_i X^k + g_ik ∂_j X^k`.
pub(crate) fn lie_metric(m: usize, x: &[Jet], g: &[Jet]) -> Result<Vec<Jet>> {
    let mut dx = Vec::with_capacity(m * m); // dx[ix2(i, k)] = ∂_i X^k
    for i in 0..m {
        for k in 0..m {
            dx.push(x[k].partial(i)?);
        }
    }
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let transport = sum(
                &dx[0],
                (0..m)
                    .map(|k| g[ix2(m, i, j)].partial(k).map(|d| &x[k] * &d))
                    .collect::<Result<Vec<_>, _>>()?,
            );
            let twist = sum(
                &dx[0],
                (0..m).map(|k| {
                    &(&g[ix2(m, k, j)] * &dx[ix2(m, i, k)])
                        + &(&g[ix2(m, i, k)] * &dx[ix2(m, j, k)])
                }),
            );
            out.push(&transport + &twist);
        }
    }
    Ok(out)
}

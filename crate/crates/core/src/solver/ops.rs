//! Node-centred difference operators.
//!
//! Two one-dimensional derivatives are used. The gradient form `G` is the
//! central difference in the interior and one-sided at reflecting walls. The
//! flux form `D` is central in the interior and, at reflecting walls, the
//! adjoint of `G` under the control-volume inner product, so that
//! `sum(V * u * D(phi)) = -sum(V * G(u) * phi)` holds exactly. On periodic
//! axes both reduce to the wrapped central difference.
//!
//! `gradient` and `curl` use `G`; `divergence` and `curl_flux` use `D`.
//! Consequently `curl_flux` is the adjoint of `curl`, `laplacian` is a
//! symmetric negative semi-definite operator, and the discrete identities
//! `divergence(curl_flux(F)) = 0` and `curl(gradient(phi)) = 0` hold on
//! periodic grids.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::{Boundary, GridGeometry};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Form {
    Gradient,
    Flux,
}

fn check<F>(geom: &GridGeometry, a: &[F]) -> Result<()> {
    if a.len() != geom.node_count() {
        return Err(Error::Shape {
            expected: geom.node_count(),
            actual: a.len(),
        });
    }
    Ok(())
}

/// `out += scale * d/dx_axis f` over every node, images included.
fn add_derivative<F: Real>(
    geom: &GridGeometry,
    f: &[F],
    axis: usize,
    form: Form,
    scale: F,
    out: &mut [F],
) {
    let [sx, sy, sz] = geom.nodes();
    let stride = [1, sx, sx * sy][axis];
    let n = geom.cells[axis];
    let h = geom.spacing[axis];
    let inv2h = scale * F::from_f64(0.5 / h);
    let invh = scale * F::from_f64(1.0 / h);
    let periodic = geom.boundary[axis] == Boundary::Periodic;
    for k in 0..sz {
        for j in 0..sy {
            for i in 0..sx {
                let t = [i, j, k][axis];
                let idx = geom.node_index_unchecked(i, j, k);
                let base = idx - t * stride;
                let at = |s: usize| f[base + s * stride];
                let d = if periodic {
                    let t = if t == n { 0 } else { t };
                    let plus = if t + 1 == n { 0 } else { t + 1 };
                    let minus = if t == 0 { n - 1 } else { t - 1 };
                    (at(plus) - at(minus)) * inv2h
                } else if t == 0 {
                    match form {
                        Form::Gradient => (at(1) - at(0)) * invh,
                        Form::Flux => (at(0) + at(1)) * invh,
                    }
                } else if t == n {
                    match form {
                        Form::Gradient => (at(n) - at(n - 1)) * invh,
                        Form::Flux => -(at(n - 1) + at(n)) * invh,
                    }
                } else {
                    (at(t + 1) - at(t - 1)) * inv2h
                };
                out[idx] = out[idx] + d;
            }
        }
    }
}

fn curl_with<F: Real>(f: &[Vec<F>; 3], geom: &GridGeometry, form: Form) -> Result<[Vec<F>; 3]> {
    for c in f {
        check(geom, c)?;
    }
    let n = geom.node_count();
    let mut out = [vec![F::zero(); n], vec![F::zero(); n], vec![F::zero(); n]];
    let one = F::one();
    // (curl f)_a = d_b f_c - d_c f_b for cyclic (a, b, c)
    for a in 0..3 {
        let b = (a + 1) % 3;
        let c = (a + 2) % 3;
        add_derivative(geom, &f[c], b, form, one, &mut out[a]);
        add_derivative(geom, &f[b], c, form, -one, &mut out[a]);
    }
    Ok(out)
}

/// Curl using the gradient-form derivative.
pub fn curl<F: Real>(f: &[Vec<F>; 3], geom: &GridGeometry) -> Result<[Vec<F>; 3]> {
    curl_with(f, geom, Form::Gradient)
}

/// Curl using the flux-form derivative; the adjoint of [`curl`].
pub fn curl_flux<F: Real>(f: &[Vec<F>; 3], geom: &GridGeometry) -> Result<[Vec<F>; 3]> {
    curl_with(f, geom, Form::Flux)
}

pub fn divergence<F: Real>(f: &[Vec<F>; 3], geom: &GridGeometry) -> Result<Vec<F>> {
    for c in f {
        check(geom, c)?;
    }
    let mut out = vec![F::zero(); geom.node_count()];
    for (a, comp) in f.iter().enumerate() {
        add_derivative(geom, comp, a, Form::Flux, F::one(), &mut out);
    }
    Ok(out)
}

pub fn gradient<F: Real>(phi: &[F], geom: &GridGeometry) -> Result<[Vec<F>; 3]> {
    check(geom, phi)?;
    let n = geom.node_count();
    let mut out = [vec![F::zero(); n], vec![F::zero(); n], vec![F::zero(); n]];
    for (a, comp) in out.iter_mut().enumerate() {
        add_derivative(geom, phi, a, Form::Gradient, F::one(), comp);
    }
    Ok(out)
}

/// One pass of the 1-2-1 binomial filter along each axis in turn. Periodic
/// axes wrap; at reflecting walls the missing neighbour is the mirror image.
/// The filter removes the alternating mode `(-1)^i` along every axis exactly
/// and leaves constants unchanged.
pub fn binomial_smooth<F: Real>(values: &[F], geom: &GridGeometry) -> Result<Vec<F>> {
    check(geom, values)?;
    let [sx, sy, sz] = geom.nodes();
    let quarter = F::from_f64(0.25);
    let half = F::from_f64(0.5);
    let mut cur = values.to_vec();
    let mut next = cur.clone();
    for axis in 0..3 {
        let stride = [1, sx, sx * sy][axis];
        let n = geom.cells[axis];
        let periodic = geom.boundary[axis] == Boundary::Periodic;
        for k in 0..sz {
            for j in 0..sy {
                for i in 0..sx {
                    let t = [i, j, k][axis];
                    let idx = geom.node_index_unchecked(i, j, k);
                    let base = idx - t * stride;
                    let at = |s: usize| cur[base + s * stride];
                    let (minus, plus) = if periodic {
                        let t = if t == n { 0 } else { t };
                        (
                            if t == 0 { n - 1 } else { t - 1 },
                            if t + 1 == n { 0 } else { t + 1 },
                        )
                    } else if t == 0 {
                        (1, 1)
                    } else if t == n {
                        (n - 1, n - 1)
                    } else {
                        (t - 1, t + 1)
                    };
                    next[idx] = half * at(t) + quarter * (at(minus) + at(plus));
                }
            }
        }
        core::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `divergence(gradient(phi))`, evaluated as that composition.
pub fn laplacian<F: Real>(phi: &[F], geom: &GridGeometry) -> Result<Vec<F>> {
    divergence(&gradient(phi, geom)?, geom)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn box_geom(b: Boundary) -> GridGeometry {
        GridGeometry::new([5, 4, 3], [5.0, 2.0, 3.0], [0.0; 3], [b; 3]).unwrap()
    }

    fn sample(geom: &GridGeometry, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
        (0..geom.node_count())
            .map(|n| {
                let [i, j, k] = geom.node_triple(n);
                f(
                    i as f64 * geom.spacing[0],
                    j as f64 * geom.spacing[1],
                    k as f64 * geom.spacing[2],
                )
            })
            .collect()
    }

    #[test]
    fn constants_have_zero_derivatives() {
        for b in [Boundary::Periodic, Boundary::Reflecting] {
            let g = box_geom(b);
            let c = vec![3.5; g.node_count()];
            let grad = gradient(&c, &g).unwrap();
            assert!(grad.iter().flatten().all(|&v| v == 0.0));
            let f = [c.clone(), c.clone(), c.clone()];
            assert!(curl(&f, &g).unwrap().iter().flatten().all(|&v| v == 0.0));
            assert!(laplacian(&c, &g).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_curl_interior() {
        let g = box_geom(Boundary::Reflecting);
        let fy = sample(&g, |x, _, _| x);
        let zero = vec![0.0; g.node_count()];
        let c = curl(&[zero.clone(), fy, zero], &g).unwrap();
        for n in 0..g.node_count() {
            assert!((c[2][n] - 1.0).abs() < 1e-14);
            assert_eq!(c[0][n], 0.0);
        }
    }

    #[test]
    fn quadratic_laplacian_interior() {
        let g = box_geom(Boundary::Reflecting);
        let phi = sample(&g, |x, _, _| x * x);
        let lap = laplacian(&phi, &g).unwrap();
        for n in 0..g.node_count() {
            let [i, _, _] = g.node_triple(n);
            if (2..=3).contains(&i) {
                assert!((lap[n] - 2.0).abs() < 1e-12, "{}", lap[n]);
            }
        }
    }

    #[test]
    fn flux_form_is_adjoint_of_gradient_form() {
        let g = box_geom(Boundary::Reflecting);
        let vol = g.control_volumes();
        let u = sample(&g, |x, y, z| libm::sin(x + 2.0 * y) + z * z);
        let phi = sample(&g, |x, y, z| libm::cos(x * y) - z);
        let div = divergence(&[u.clone(), u.clone(), u.clone()], &g).unwrap();
        let grad = gradient(&phi, &g).unwrap();
        let lhs: f64 = (0..u.len()).map(|n| vol[n] * div[n] * phi[n]).sum();
        let rhs: f64 = (0..u.len())
            .map(|n| vol[n] * u[n] * (grad[0][n] + grad[1][n] + grad[2][n]))
            .sum();
        assert!((lhs + rhs).abs() < 1e-10, "{lhs} {rhs}");
    }

    #[test]
    fn shape_error() {
        let g = box_geom(Boundary::Periodic);
        assert!(matches!(gradient(&[0.0; 3], &g), Err(Error::Shape { .. })));
    }
}

//! Implicit field advance and divergence cleaning.
//!
//! Krylov vectors hold one value per distinct node: periodic image nodes are
//! dropped on the way in and restored on the way out.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::krylov::{cg_solve, gmres_solve, FnOperator, SolverReport};
use super::ops::{binomial_smooth, curl, curl_flux, divergence, gradient, laplacian};
use crate::error::Result;
use crate::fields::{FieldGrid, MomentGrid};
use crate::grid::GridGeometry;
use crate::real::Real;

fn compact<F: Real>(unique: &[usize], full: &[F], out: &mut [F]) {
    for (o, &n) in out.iter_mut().zip(unique) {
        *o = full[n];
    }
}

fn expand<F: Real>(geom: &GridGeometry, unique: &[usize], values: &[F], full: &mut [F]) {
    for (v, &n) in values.iter().zip(unique) {
        full[n] = *v;
    }
    geom.sync_periodic(full);
}

/// Per component, the nodes where that component of `E` is tangential to a
/// reflecting wall. Reflecting walls are perfect conductors, so these values
/// are held at zero.
fn tangential_walls(geom: &GridGeometry) -> [Vec<bool>; 3] {
    let n = geom.node_count();
    let mut mask = [vec![false; n], vec![false; n], vec![false; n]];
    if !geom.has_walls() {
        return mask;
    }
    for node in 0..n {
        let [i, j, k] = geom.node_triple(node);
        let walls = geom.wall_axes(i, j, k);
        for (d, m) in mask.iter_mut().enumerate() {
            m[node] = (0..3).any(|a| a != d && walls[a]);
        }
    }
    mask
}

/// Distinct nodes not lying on any reflecting wall.
fn interior_nodes(geom: &GridGeometry) -> Vec<usize> {
    geom.unique_nodes()
        .into_iter()
        .filter(|&n| {
            let [i, j, k] = geom.node_triple(n);
            !geom.wall_axes(i, j, k).contains(&true)
        })
        .collect()
}

fn zeros3<F: Real>(n: usize) -> [Vec<F>; 3] {
    [vec![F::zero(); n], vec![F::zero(); n], vec![F::zero(); n]]
}

/// Time-step and solver settings of one field advance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellParams {
    pub dt: f64,
    pub theta: f64,
    pub c: f64,
    pub tol: f64,
    pub restart: usize,
    pub max_iter: usize,
    /// Binomial filter passes applied to `E^{n+theta}` before it updates the
    /// fields and is handed to the particles (0 = none).
    pub smoothing: usize,
}

/// Advances `E` and `B` by one step of the theta scheme:
///
/// ```text
/// E' + a^2 curl_flux(curl E') = E^n + a (curl_flux B^n - 4 pi J / c),  a = c theta dt
/// E^{n+1} = (E' - (1 - theta) E^n) / theta
/// B^{n+1} = B^n - c dt curl E'
/// ```
///
/// `moments` is the all-species total; only its current density enters.
/// A solve that misses the tolerance still returns the fields, with
/// `converged == false` in the report.
pub fn maxwell_advance<F: Real>(
    fields: &FieldGrid<F>,
    moments: &MomentGrid<F>,
    geom: &GridGeometry,
    params: &MaxwellParams,
) -> Result<(FieldGrid<F>, SolverReport)> {
    fields.check_extents(geom)?;
    let step = theta_step(fields, &moments.j, None, geom, params)?;
    Ok((step.fields, step.report))
}

/// One species' moments together with its charge-to-mass ratio.
#[derive(Debug, Clone, Copy)]
pub struct SpeciesMoments<'a, F> {
    pub qom: f64,
    pub moments: &'a MomentGrid<F>,
}

/// Result of an implicit-moment field advance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImplicitAdvance<F> {
    /// `E^{n+1}`, `B^{n+1}`.
    pub fields: FieldGrid<F>,
    /// `E^{n+theta}` with `B^n`: the fields the particles see over the step.
    pub push: FieldGrid<F>,
    pub report: SolverReport,
}

/// Theta-scheme advance with the plasma response folded into the operator.
///
/// Over one step a particle's mean velocity responds to the field through
/// `vbar = M_s (v + qdt2m_s E)`, where `M_s` is the magnetic rotation of the
/// mover and `qdt2m_s = qom_s dt / 2`. Substituting the resulting current
///
/// ```text
/// Jbar = sum_s M_s (J_s - dt/2 div P_s) + sum_s rho_s qdt2m_s M_s E
/// ```
///
/// into the field equation, with `mu = I + 4 pi theta dt sum_s rho_s qdt2m_s M_s`
/// and Gauss's law imposed through the predicted charge density
/// `rhohat = rho - theta dt div Jhat`, gives
///
/// ```text
/// mu E' + a^2 curl_flux(curl E') - a^2 grad(div(mu E'))
///     = E^n + a (curl_flux B^n - 4 pi Jhat / c) - a^2 4 pi grad(rhohat)
/// ```
///
/// with `M_s` evaluated from the node values of `B^n`. The plasma terms keep
/// the step stable for any `omega_pe dt`.
pub fn maxwell_advance_implicit<F: Real>(
    fields: &FieldGrid<F>,
    species: &[SpeciesMoments<'_, F>],
    geom: &GridGeometry,
    params: &MaxwellParams,
) -> Result<ImplicitAdvance<F>> {
    fields.check_extents(geom)?;
    let nodes = geom.node_count();
    for s in species {
        if s.moments.rho.len() != nodes {
            return Err(crate::error::Error::Shape {
                expected: nodes,
                actual: s.moments.rho.len(),
            });
        }
    }
    let half_dt = 0.5 * params.dt;
    let mut j_hat = [vec![0.0f64; nodes], vec![0.0; nodes], vec![0.0; nodes]];
    let mut response = vec![[0.0f64; 9]; nodes];
    let scale = 4.0 * PI * params.theta * params.dt;
    for s in species {
        let m = s.moments;
        let qdt2m = s.qom * half_dt;
        let beta = qdt2m / params.c;
        let [pxx, pxy, pxz, pyy, pyz, pzz] = &m.p;
        let rows = [
            [pxx.clone(), pxy.clone(), pxz.clone()],
            [pxy.clone(), pyy.clone(), pyz.clone()],
            [pxz.clone(), pyz.clone(), pzz.clone()],
        ];
        let div_p = [
            divergence(&rows[0], geom)?,
            divergence(&rows[1], geom)?,
            divergence(&rows[2], geom)?,
        ];
        for n in 0..nodes {
            let rot = rotation(
                [
                    fields.b[0][n].as_f64(),
                    fields.b[1][n].as_f64(),
                    fields.b[2][n].as_f64(),
                ],
                beta,
            );
            let j: [f64; 3] =
                core::array::from_fn(|d| m.j[d][n].as_f64() - half_dt * div_p[d][n].as_f64());
            for r in 0..3 {
                j_hat[r][n] += (0..3).map(|c| rot[3 * r + c] * j[c]).sum::<f64>();
            }
            let k = scale * m.rho[n].as_f64() * qdt2m;
            for (dst, src) in response[n].iter_mut().zip(&rot) {
                *dst += k * src;
            }
        }
    }
    let j_hat = j_hat.map(|a| a.into_iter().map(F::from_f64).collect::<Vec<F>>());
    let div_j = divergence(&j_hat, geom)?;
    let th_dt = params.theta * params.dt;
    let rho_hat: Vec<F> = (0..nodes)
        .map(|n| {
            let rho: f64 = species.iter().map(|s| s.moments.rho[n].as_f64()).sum();
            F::from_f64(rho - th_dt * div_j[n].as_f64())
        })
        .collect();
    let response: Vec<[F; 9]> = response.iter().map(|m| m.map(F::from_f64)).collect();
    theta_step(
        fields,
        &j_hat,
        Some(Plasma {
            response: &response,
            rho_hat: &rho_hat,
        }),
        geom,
        params,
    )
}

/// Plasma terms of the implicit operator.
#[derive(Clone, Copy)]
struct Plasma<'a, F> {
    /// `mu - I` per node, row major.
    response: &'a [[F; 9]],
    rho_hat: &'a [F],
}

/// Matrix of `x -> (x + beta x cross b + beta^2 (x . b) b) / (1 + beta^2 |b|^2)`,
/// row major.
fn rotation(b: [f64; 3], beta: f64) -> [f64; 9] {
    let [bx, by, bz] = b;
    let denom = 1.0 + beta * beta * (bx * bx + by * by + bz * bz);
    let bb = [bx, by, bz];
    let cross = [0.0, bz, -by, -bz, 0.0, bx, by, -bx, 0.0];
    let mut m = [0.0; 9];
    for r in 0..3 {
        for c in 0..3 {
            let id = if r == c { 1.0 } else { 0.0 };
            m[3 * r + c] = (id + beta * cross[3 * r + c] + beta * beta * bb[r] * bb[c]) / denom;
        }
    }
    m
}

fn theta_step<F: Real>(
    fields: &FieldGrid<F>,
    current: &[Vec<F>; 3],
    plasma: Option<Plasma<'_, F>>,
    geom: &GridGeometry,
    params: &MaxwellParams,
) -> Result<ImplicitAdvance<F>> {
    let nodes = geom.node_count();
    for j in current {
        if j.len() != nodes {
            return Err(crate::error::Error::Shape {
                expected: nodes,
                actual: j.len(),
            });
        }
    }
    let unique = geom.unique_nodes();
    let u = unique.len();
    let walls = tangential_walls(geom);
    let pinned: Vec<bool> = (0..3)
        .flat_map(|d| unique.iter().map(move |&n| (d, n)))
        .map(|(d, n)| walls[d][n])
        .collect();
    let a = params.c * params.theta * params.dt;
    let af = F::from_f64(a);
    let a2 = F::from_f64(a * a);
    let four_pi_c = F::from_f64(4.0 * PI / params.c);

    let cb = curl_flux(&fields.b, geom)?;
    let grad_rho = match plasma {
        Some(p) => Some(gradient(p.rho_hat, geom)?),
        None => None,
    };
    let gauss = F::from_f64(4.0 * PI * a * a);
    let mut rhs = vec![F::zero(); 3 * u];
    let mut guess = vec![F::zero(); 3 * u];
    for d in 0..3 {
        let full: Vec<F> = (0..nodes)
            .map(|n| {
                let v = fields.e[d][n] + af * (cb[d][n] - four_pi_c * current[d][n]);
                match &grad_rho {
                    Some(g) => v - gauss * g[d][n],
                    None => v,
                }
            })
            .collect();
        compact(&unique, &full, &mut rhs[d * u..(d + 1) * u]);
        compact(&unique, &fields.e[d], &mut guess[d * u..(d + 1) * u]);
    }
    for (i, _) in pinned.iter().enumerate().filter(|(_, &p)| p) {
        rhs[i] = F::zero();
        guess[i] = F::zero();
    }

    let op = FnOperator {
        dim: 3 * u,
        f: |x: &[F], y: &mut [F]| {
            let mut free = x.to_vec();
            for (v, _) in free.iter_mut().zip(&pinned).filter(|(_, &p)| p) {
                *v = F::zero();
            }
            let mut e = zeros3::<F>(nodes);
            for d in 0..3 {
                expand(geom, &unique, &free[d * u..(d + 1) * u], &mut e[d]);
            }
            let cc = curl_flux(&curl(&e, geom)?, geom)?;
            for d in 0..3 {
                for (slot, &n) in y[d * u..(d + 1) * u].iter_mut().zip(&unique) {
                    *slot = e[d][n] + a2 * cc[d][n];
                }
            }
            if let Some(p) = plasma {
                let mut mu_e = e.clone();
                for n in 0..nodes {
                    let m = &p.response[n];
                    for r in 0..3 {
                        mu_e[r][n] = mu_e[r][n]
                            + m[3 * r] * e[0][n]
                            + m[3 * r + 1] * e[1][n]
                            + m[3 * r + 2] * e[2][n];
                    }
                }
                let gd = gradient(&divergence(&mu_e, geom)?, geom)?;
                for d in 0..3 {
                    for (slot, &n) in y[d * u..(d + 1) * u].iter_mut().zip(&unique) {
                        *slot = *slot + (mu_e[d][n] - e[d][n]) - a2 * gd[d][n];
                    }
                }
            }
            for ((slot, &xi), _) in y.iter_mut().zip(x).zip(&pinned).filter(|(_, &p)| p) {
                *slot = xi;
            }
            Ok(())
        },
    };
    let report = gmres_solve(
        &op,
        &rhs,
        &mut guess,
        params.tol,
        params.restart,
        params.max_iter,
    )?;

    let mut e_theta = zeros3::<F>(nodes);
    for d in 0..3 {
        expand(geom, &unique, &guess[d * u..(d + 1) * u], &mut e_theta[d]);
        for _ in 0..params.smoothing {
            e_theta[d] = binomial_smooth(&e_theta[d], geom)?;
        }
        for (v, _) in e_theta[d].iter_mut().zip(&walls[d]).filter(|(_, &w)| w) {
            *v = F::zero();
        }
    }
    let ce = curl(&e_theta, geom)?;
    let theta = F::from_f64(params.theta);
    let keep = F::one() - theta;
    let cdt = F::from_f64(params.c * params.dt);
    let mut out = fields.clone();
    for d in 0..3 {
        for n in 0..nodes {
            out.e[d][n] = if walls[d][n] {
                F::zero()
            } else {
                (e_theta[d][n] - keep * fields.e[d][n]) / theta
            };
            out.b[d][n] = fields.b[d][n] - cdt * ce[d][n];
        }
    }
    let push = FieldGrid {
        e: e_theta,
        b: fields.b.clone(),
    };
    Ok(ImplicitAdvance {
        fields: out,
        push,
        report,
    })
}

/// Outcome of one divergence-cleaning pass.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CleanReport {
    pub cg: SolverReport,
    /// `|div E - 4 pi rho|` before and after, over nodes off the walls, with
    /// the part the discrete Laplacian cannot reach removed.
    pub residual_before: f64,
    pub residual_after: f64,
    /// `max(tol |4 pi rho|, tol |div E_in|)`.
    pub bound: f64,
    pub converged: bool,
}

/// Removes the components of `r` (values on `free`) lying in the null space
/// of the discrete Laplacian. With conducting walls the potential is pinned
/// there and the null space is empty; on fully periodic grids it holds the
/// volume-weighted mean of every sub-lattice decoupled by the central
/// stencil.
fn project_out_null_space(geom: &GridGeometry, free: &[usize], r: &mut [f64]) {
    if geom.has_walls() {
        return;
    }
    let classes = geom.parity_classes();
    let mut num = vec![0.0; classes];
    let mut den = vec![0.0; classes];
    let ids: Vec<(usize, f64)> = free
        .iter()
        .map(|&n| {
            let [i, j, k] = geom.node_triple(n);
            (geom.parity_class(i, j, k), geom.control_volume(i, j, k))
        })
        .collect();
    for (v, &(c, w)) in r.iter().zip(&ids) {
        num[c] += w * v;
        den[c] += w;
    }
    for (v, &(c, _)) in r.iter_mut().zip(&ids) {
        *v -= num[c] / den[c];
    }
}

fn l2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Gauss-law residual `div E - 4 pi rho` on distinct nodes off the walls,
/// with its null-space part removed. Wall nodes carry the conductor's
/// surface charge and are not constrained.
pub fn gauss_residual<F: Real>(
    e: &[Vec<F>; 3],
    rho: &[F],
    geom: &GridGeometry,
) -> Result<Vec<f64>> {
    let div = divergence(e, geom)?;
    let free = interior_nodes(geom);
    let four_pi = 4.0 * PI;
    let mut r: Vec<f64> = free
        .iter()
        .map(|&n| div[n].as_f64() - four_pi * rho[n].as_f64())
        .collect();
    project_out_null_space(geom, &free, &mut r);
    Ok(r)
}

/// Projects `E` onto the Gauss-law manifold: solves `lap(phi) = div E - 4 pi rho`
/// by conjugate gradients, with `phi = 0` on reflecting walls, and sets
/// `E <- E - grad(phi)`. Tangential `E` on the walls is left untouched.
///
/// On fully periodic grids the volume-weighted mean of the right-hand side
/// over each sub-lattice decoupled by the central stencil is not reachable by
/// any correction and is excluded from both the solve and the reported
/// residuals.
pub fn divergence_clean<F: Real>(
    e: &mut [Vec<F>; 3],
    rho: &[F],
    geom: &GridGeometry,
    tol: f64,
    max_iter: usize,
) -> Result<CleanReport> {
    let free = interior_nodes(geom);
    let u = free.len();
    let nodes = geom.node_count();
    let div_in = divergence(e, geom)?;
    let four_pi = 4.0 * PI;
    let rho_norm = l2(&free
        .iter()
        .map(|&n| four_pi * rho[n].as_f64())
        .collect::<Vec<_>>());
    let div_norm = l2(&free.iter().map(|&n| div_in[n].as_f64()).collect::<Vec<_>>());
    let bound = (tol * rho_norm).max(tol * div_norm);

    let r = gauss_residual(e, rho, geom)?;
    let before = l2(&r);
    let mut report = CleanReport {
        residual_before: before,
        residual_after: before,
        bound,
        ..CleanReport::default()
    };
    if before <= bound || u == 0 {
        report.converged = before <= bound;
        return Ok(report);
    }

    let weights: Vec<f64> = free
        .iter()
        .map(|&n| {
            let [i, j, k] = geom.node_triple(n);
            geom.control_volume(i, j, k)
        })
        .collect();
    let wmax = weights.iter().cloned().fold(0.0, f64::max);
    let wmin = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let cg_tol = tol / (2.0 * wmax / wmin);
    let wf: Vec<F> = weights.iter().map(|&w| F::from_f64(w)).collect();

    let b: Vec<F> = r
        .iter()
        .zip(&weights)
        .map(|(v, w)| F::from_f64(-w * v))
        .collect();
    let op = FnOperator {
        dim: u,
        f: |x: &[F], y: &mut [F]| {
            let mut full = vec![F::zero(); nodes];
            expand(geom, &free, x, &mut full);
            let lap = laplacian(&full, geom)?;
            for ((slot, &n), &w) in y.iter_mut().zip(&free).zip(&wf) {
                *slot = -(w * lap[n]);
            }
            Ok(())
        },
    };
    let mut phi = vec![F::zero(); u];
    report.cg = cg_solve(&op, &b, &mut phi, cg_tol, max_iter)?;

    let mut full = vec![F::zero(); nodes];
    expand(geom, &free, &phi, &mut full);
    let grad = gradient(&full, geom)?;
    let walls = tangential_walls(geom);
    for d in 0..3 {
        for n in 0..nodes {
            if !walls[d][n] {
                e[d][n] = e[d][n] - grad[d][n];
            }
        }
    }
    report.residual_after = l2(&gauss_residual(e, rho, geom)?);
    report.converged = report.cg.converged && report.residual_after <= bound;
    Ok(report)
}

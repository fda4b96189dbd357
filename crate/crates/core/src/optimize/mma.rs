//! Method of moving asymptotes (Svanberg) with the primal–dual interior
//! point solver for the convex separable subproblem. The default variant is
//! the globally convergent one: each subproblem solution is checked against
//! the true functions and the approximations are made more conservative
//! until they bound them from above.

use nalgebra::{DMatrix, DVector};

use super::{
    DesignProblem, Evaluation, OptimizationResult, OptimizerSettings, Recorder, Termination,
    FEASIBILITY_TOLERANCE,
};
use crate::error::Result;

const ALBEFA: f64 = 0.1;
const EPSIMIN: f64 = 1e-7;
/// Fixed curvature term of the plain method.
const RAA0: f64 = 1e-5;
const RAA_MIN: f64 = 1e-6;
/// Conservativeness inner iterations per outer iteration.
const MAX_INNER: usize = 15;

/// Convex separable approximation of one MMA iteration. Objective and
/// constraints are approximated as `r + Σ p/(u−x) + q/(x−l)`.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub low: DVector<f64>,
    pub upp: DVector<f64>,
    pub alfa: DVector<f64>,
    pub beta: DVector<f64>,
    pub p0: DVector<f64>,
    pub q0: DVector<f64>,
    pub r0: f64,
    /// m×n
    pub p: DMatrix<f64>,
    pub q: DMatrix<f64>,
    /// Constraint right-hand sides, −r.
    pub b: DVector<f64>,
}

impl Subproblem {
    /// Approximate objective and constraint values at `x`.
    pub fn values(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let uxinv = (&self.upp - x).map(|v| 1.0 / v);
        let xlinv = (x - &self.low).map(|v| 1.0 / v);
        let f0 = self.r0 + self.p0.dot(&uxinv) + self.q0.dot(&xlinv);
        let f = &self.p * &uxinv + &self.q * &xlinv - &self.b;
        (f0, f)
    }
}

/// State carried between MMA iterations.
#[derive(Debug, Clone)]
pub struct MmaState {
    pub iteration: usize,
    pub xold1: Vec<f64>,
    pub xold2: Vec<f64>,
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
}

impl MmaState {
    pub fn new(x0: &[f64]) -> MmaState {
        MmaState {
            iteration: 0,
            xold1: x0.to_vec(),
            xold2: x0.to_vec(),
            low: vec![0.0; x0.len()],
            upp: vec![0.0; x0.len()],
        }
    }

    fn advance(&mut self, x: &[f64]) {
        self.xold2 = std::mem::replace(&mut self.xold1, x.to_vec());
    }
}

fn ranges(xmin: &[f64], xmax: &[f64]) -> Vec<f64> {
    xmin.iter()
        .zip(xmax)
        .map(|(l, h)| (h - l).max(1e-5))
        .collect()
}

/// Move the asymptotes: widen where the iterates progress monotonically,
/// tighten where they oscillate.
fn update_asymptotes(
    state: &mut MmaState,
    settings: &super::MmaSettings,
    x: &[f64],
    xmin: &[f64],
    xmax: &[f64],
) {
    state.iteration += 1;
    let range = ranges(xmin, xmax);
    for j in 0..x.len() {
        if state.iteration <= 2 {
            state.low[j] = x[j] - settings.asymptote_init * range[j];
            state.upp[j] = x[j] + settings.asymptote_init * range[j];
            continue;
        }
        let zzz = (x[j] - state.xold1[j]) * (state.xold1[j] - state.xold2[j]);
        let factor = if zzz > 0.0 {
            settings.asymptote_increase
        } else if zzz < 0.0 {
            settings.asymptote_decrease
        } else {
            1.0
        };
        let lo = x[j] - factor * (state.xold1[j] - state.low[j]);
        let up = x[j] + factor * (state.upp[j] - state.xold1[j]);
        state.low[j] = lo.max(x[j] - 10.0 * range[j]).min(x[j] - 0.01 * range[j]);
        state.upp[j] = up.min(x[j] + 10.0 * range[j]).max(x[j] + 0.01 * range[j]);
    }
}

/// Build the subproblem at `x` from values and gradients. `raa0`/`raa`
/// control the curvature added to the objective and each constraint.
#[allow(clippy::too_many_arguments)]
fn approximate(
    state: &MmaState,
    move_limit: f64,
    x: &[f64],
    xmin: &[f64],
    xmax: &[f64],
    f0: f64,
    df0: &[f64],
    g: &[f64],
    dg: &[Vec<f64>],
    raa0: f64,
    raa: &[f64],
) -> Subproblem {
    let n = x.len();
    let m = g.len();
    let range = ranges(xmin, xmax);
    let mut alfa = DVector::zeros(n);
    let mut beta = DVector::zeros(n);
    let mut p0 = DVector::zeros(n);
    let mut q0 = DVector::zeros(n);
    let mut p = DMatrix::zeros(m, n);
    let mut q = DMatrix::zeros(m, n);
    let mut r0 = f0;
    let mut r = DVector::from_column_slice(g);
    for j in 0..n {
        alfa[j] = (state.low[j] + ALBEFA * (x[j] - state.low[j]))
            .max(x[j] - move_limit * range[j])
            .max(xmin[j]);
        beta[j] = (state.upp[j] - ALBEFA * (state.upp[j] - x[j]))
            .min(x[j] + move_limit * range[j])
            .min(xmax[j]);
        let ux = state.upp[j] - x[j];
        let xl = x[j] - state.low[j];
        let inv_range = 1.0 / range[j];
        let (pp, qq) = (df0[j].max(0.0), (-df0[j]).max(0.0));
        let pq = 0.001 * (pp + qq) + raa0 * inv_range;
        p0[j] = (pp + pq) * ux * ux;
        q0[j] = (qq + pq) * xl * xl;
        r0 -= p0[j] / ux + q0[j] / xl;
        for i in 0..m {
            let (pp, qq) = (dg[i][j].max(0.0), (-dg[i][j]).max(0.0));
            let pq = 0.001 * (pp + qq) + raa[i] * inv_range;
            p[(i, j)] = (pp + pq) * ux * ux;
            q[(i, j)] = (qq + pq) * xl * xl;
            r[i] -= p[(i, j)] / ux + q[(i, j)] / xl;
        }
    }
    Subproblem {
        low: DVector::from_column_slice(&state.low),
        upp: DVector::from_column_slice(&state.upp),
        alfa,
        beta,
        p0,
        q0,
        r0,
        p,
        q,
        b: -r,
    }
}

/// One plain MMA update: returns the next iterate, which always lies within `[xmin, xmax]`.
#[allow(clippy::too_many_arguments)]
pub fn mma_step(
    state: &mut MmaState,
    settings: &super::MmaSettings,
    x: &[f64],
    xmin: &[f64],
    xmax: &[f64],
    df0: &[f64],
    g: &[f64],
    dg: &[Vec<f64>],
) -> Vec<f64> {
    update_asymptotes(state, settings, x, xmin, xmax);
    let raa = vec![RAA0; g.len()];
    let sub = approximate(
        state,
        settings.move_limit,
        x,
        xmin,
        xmax,
        0.0,
        df0,
        g,
        dg,
        RAA0,
        &raa,
    );
    let xnew = subsolve(
        &sub,
        1.0,
        &vec![0.0; g.len()],
        &vec![settings.slack_penalty; g.len()],
        &vec![1.0; g.len()],
    );
    state.advance(x);
    xnew.iter()
        .enumerate()
        .map(|(j, &v)| v.max(xmin[j]).min(xmax[j]))
        .collect()
}

#[derive(Debug, Clone)]
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    z: f64,
    lam: DVector<f64>,
    xsi: DVector<f64>,
    eta: DVector<f64>,
    mu: DVector<f64>,
    zet: f64,
    s: DVector<f64>,
}

impl Iterate {
    fn step(&self, d: &Iterate, t: f64) -> Iterate {
        Iterate {
            x: &self.x + t * &d.x,
            y: &self.y + t * &d.y,
            z: self.z + t * d.z,
            lam: &self.lam + t * &d.lam,
            xsi: &self.xsi + t * &d.xsi,
            eta: &self.eta + t * &d.eta,
            mu: &self.mu + t * &d.mu,
            zet: self.zet + t * d.zet,
            s: &self.s + t * &d.s,
        }
    }
}

/// Problem constants of the subproblem: objective weight a0, and per
/// constraint a, c (slack penalty), d (quadratic slack penalty).
struct Weights<'a> {
    a0: f64,
    a: &'a DVector<f64>,
    c: &'a DVector<f64>,
    d: &'a DVector<f64>,
}

fn residual(sp: &Subproblem, w: &Weights, it: &Iterate, epsi: f64) -> DVector<f64> {
    let n = it.x.len();
    let m = it.y.len();
    let ux = &sp.upp - &it.x;
    let xl = &it.x - &sp.low;
    let plam = &sp.p0 + sp.p.tr_mul(&it.lam);
    let qlam = &sp.q0 + sp.q.tr_mul(&it.lam);
    let gvec = &sp.p * ux.map(|v| 1.0 / v) + &sp.q * xl.map(|v| 1.0 / v);
    let mut r = DVector::zeros(3 * n + 4 * m + 2);
    let mut k = 0;
    let mut push = |v: f64| {
        r[k] = v;
        k += 1;
    };
    for j in 0..n {
        push(plam[j] / (ux[j] * ux[j]) - qlam[j] / (xl[j] * xl[j]) - it.xsi[j] + it.eta[j]);
    }
    for i in 0..m {
        push(w.c[i] + w.d[i] * it.y[i] - it.mu[i] - it.lam[i]);
    }
    push(w.a0 - it.zet - w.a.dot(&it.lam));
    for i in 0..m {
        push(gvec[i] - w.a[i] * it.z - it.y[i] + it.s[i] - sp.b[i]);
    }
    for j in 0..n {
        push(it.xsi[j] * (it.x[j] - sp.alfa[j]) - epsi);
    }
    for j in 0..n {
        push(it.eta[j] * (sp.beta[j] - it.x[j]) - epsi);
    }
    for i in 0..m {
        push(it.mu[i] * it.y[i] - epsi);
    }
    push(it.zet * it.z - epsi);
    for i in 0..m {
        push(it.lam[i] * it.s[i] - epsi);
    }
    r
}

fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton direction for the barrier-relaxed KKT residual at `it`, eliminating
/// down to whichever of the (m+1) or (n+1) systems is smaller.
fn newton_direction(sp: &Subproblem, w: &Weights, it: &Iterate, epsi: f64) -> Iterate {
    let n = it.x.len();
    let m = it.y.len();
    let ux = &sp.upp - &it.x;
    let xl = &it.x - &sp.low;
    let plam = &sp.p0 + sp.p.tr_mul(&it.lam);
    let qlam = &sp.q0 + sp.q.tr_mul(&it.lam);
    let gvec = &sp.p * ux.map(|v| 1.0 / v) + &sp.q * xl.map(|v| 1.0 / v);
    let mut gg = sp.p.clone();
    for j in 0..n {
        let (u2, l2) = (ux[j] * ux[j], xl[j] * xl[j]);
        let mut col = gg.column_mut(j);
        col /= u2;
        col.axpy(-1.0 / l2, &sp.q.column(j), 1.0);
    }
    let xa = &it.x - &sp.alfa;
    let bx = &sp.beta - &it.x;
    let delx = DVector::from_fn(n, |j, _| {
        plam[j] / (ux[j] * ux[j]) - qlam[j] / (xl[j] * xl[j]) - epsi / xa[j] + epsi / bx[j]
    });
    let diagx = DVector::from_fn(n, |j, _| {
        2.0 * (plam[j] / ux[j].powi(3) + qlam[j] / xl[j].powi(3))
            + it.xsi[j] / xa[j]
            + it.eta[j] / bx[j]
    });
    let dely = DVector::from_fn(m, |i, _| {
        w.c[i] + w.d[i] * it.y[i] - it.lam[i] - epsi / it.y[i]
    });
    let delz = w.a0 - w.a.dot(&it.lam) - epsi / it.z;
    let dellam = DVector::from_fn(m, |i, _| {
        gvec[i] - w.a[i] * it.z - it.y[i] - sp.b[i] + epsi / it.lam[i]
    });
    let diagy = DVector::from_fn(m, |i, _| w.d[i] + it.mu[i] / it.y[i]);
    let diaglamyi = DVector::from_fn(m, |i, _| it.s[i] / it.lam[i] + 1.0 / diagy[i]);

    let (dx, dz, dlam) = if m < n {
        let mut scaled = gg.clone();
        for j in 0..n {
            scaled.column_mut(j).scale_mut(1.0 / diagx[j]);
        }
        let mut aa = DMatrix::zeros(m + 1, m + 1);
        aa.view_mut((0, 0), (m, m))
            .copy_from(&(&scaled * gg.transpose()));
        for i in 0..m {
            aa[(i, i)] += diaglamyi[i];
            aa[(i, m)] = w.a[i];
            aa[(m, i)] = w.a[i];
        }
        aa[(m, m)] = -it.zet / it.z;
        let blam = &dellam + dely.component_div(&diagy) - &gg * delx.component_div(&diagx);
        let mut bb = DVector::zeros(m + 1);
        bb.rows_mut(0, m).copy_from(&blam);
        bb[m] = delz;
        let sol = aa.lu().solve(&bb).unwrap_or_else(|| DVector::zeros(m + 1));
        let dlam = sol.rows(0, m).into_owned();
        let dx = -(&delx + gg.tr_mul(&dlam)).component_div(&diagx);
        (dx, sol[m], dlam)
    } else {
        let dellamyi = &dellam + dely.component_div(&diagy);
        let inv = diaglamyi.map(|v| 1.0 / v);
        // Gᵀ diag(inv) G as HᵀH with H = diag(√inv) G; the whole (n+1) system
        // is JᵀDJ plus a positive diagonal, so Cholesky applies
        let mut h = gg.clone();
        for i in 0..m {
            h.row_mut(i).scale_mut(inv[i].sqrt());
        }
        let mut aa = DMatrix::zeros(n + 1, n + 1);
        let mut axx = h.transpose() * &h;
        for j in 0..n {
            axx[(j, j)] += diagx[j];
        }
        aa.view_mut((0, 0), (n, n)).copy_from(&axx);
        let a_over = w.a.component_mul(&inv);
        let axz = -gg.tr_mul(&a_over);
        let bx = &delx + gg.tr_mul(&dellamyi.component_mul(&inv));
        for j in 0..n {
            aa[(j, n)] = axz[j];
            aa[(n, j)] = axz[j];
        }
        aa[(n, n)] = it.zet / it.z + w.a.dot(&a_over);
        let bz = delz - a_over.dot(&dellamyi);
        let mut bb = DVector::zeros(n + 1);
        bb.rows_mut(0, n).copy_from(&(-bx));
        bb[n] = -bz;
        let sol = match aa.clone().cholesky() {
            Some(ch) => ch.solve(&bb),
            None => aa.lu().solve(&bb).unwrap_or_else(|| DVector::zeros(n + 1)),
        };
        let dx = sol.rows(0, n).into_owned();
        let dz = sol[n];
        let dlam = (&gg * &dx - dz * w.a + &dellamyi).component_mul(&inv);
        (dx, dz, dlam)
    };

    let dy = (&dlam - &dely).component_div(&diagy);
    let dxsi = DVector::from_fn(n, |j, _| {
        -it.xsi[j] + epsi / xa[j] - it.xsi[j] * dx[j] / xa[j]
    });
    let deta = DVector::from_fn(n, |j, _| {
        -it.eta[j] + epsi / bx[j] + it.eta[j] * dx[j] / bx[j]
    });
    let dmu = DVector::from_fn(m, |i, _| {
        -it.mu[i] + epsi / it.y[i] - it.mu[i] * dy[i] / it.y[i]
    });
    let dzet = -it.zet + epsi / it.z - it.zet * dz / it.z;
    let ds = DVector::from_fn(m, |i, _| {
        -it.s[i] + epsi / it.lam[i] - it.s[i] * dlam[i] / it.lam[i]
    });
    Iterate {
        x: dx,
        y: dy,
        z: dz,
        lam: dlam,
        xsi: dxsi,
        eta: deta,
        mu: dmu,
        zet: dzet,
        s: ds,
    }
}

/// Largest step in (0, 1] that keeps every slack-type quantity positive.
fn max_step(sp: &Subproblem, it: &Iterate, d: &Iterate) -> f64 {
    let mut stm: f64 = 1.0;
    let mut upd = |v: f64, dv: f64| stm = stm.max(-1.01 * dv / v);
    for i in 0..it.y.len() {
        upd(it.y[i], d.y[i]);
        upd(it.lam[i], d.lam[i]);
        upd(it.mu[i], d.mu[i]);
        upd(it.s[i], d.s[i]);
    }
    upd(it.z, d.z);
    upd(it.zet, d.zet);
    for j in 0..it.x.len() {
        upd(it.xsi[j], d.xsi[j]);
        upd(it.eta[j], d.eta[j]);
        upd(it.x[j] - sp.alfa[j], d.x[j]);
        upd(sp.beta[j] - it.x[j], -d.x[j]);
    }
    1.0 / stm
}

/// Primal–dual Newton iterations on the relaxed KKT system of the subproblem.
pub fn subsolve(sp: &Subproblem, a0: f64, a: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = sp.alfa.len();
    let m = sp.b.len();
    let (a, c, d) = (
        DVector::from_column_slice(a),
        DVector::from_column_slice(c),
        DVector::from_column_slice(d),
    );
    let w = Weights {
        a0,
        a: &a,
        c: &c,
        d: &d,
    };
    let x = (&sp.alfa + &sp.beta) * 0.5;
    let mut it = Iterate {
        xsi: DVector::from_fn(n, |j, _| (1.0 / (x[j] - sp.alfa[j])).max(1.0)),
        eta: DVector::from_fn(n, |j, _| (1.0 / (sp.beta[j] - x[j])).max(1.0)),
        x,
        y: DVector::from_element(m, 1.0),
        z: 1.0,
        lam: DVector::from_element(m, 1.0),
        mu: c.map(|ci| (0.5 * ci).max(1.0)),
        zet: 1.0,
        s: DVector::from_element(m, 1.0),
    };
    let mut epsi = 1.0;
    while epsi > EPSIMIN {
        let res = residual(sp, &w, &it, epsi);
        let mut resnorm = res.norm();
        let mut resmax = max_abs(&res);
        let mut inner = 0;
        while resmax > 0.9 * epsi && inner < 200 {
            inner += 1;
            let dir = newton_direction(sp, &w, &it, epsi);
            let mut steg = max_step(sp, &it, &dir);
            let mut accepted = None;
            for _ in 0..50 {
                let trial = it.step(&dir, steg);
                let r = residual(sp, &w, &trial, epsi);
                if r.norm() <= resnorm {
                    accepted = Some((trial, r));
                    break;
                }
                steg /= 2.0;
            }
            // no descent at this barrier level: keep the iterate and tighten
            let Some((trial, r)) = accepted else { break };
            it = trial;
            resnorm = r.norm();
            resmax = max_abs(&r);
        }
        epsi *= 0.1;
    }
    it.x.iter().copied().collect()
}

/// Curvature floor for the conservative variant, scaled to the gradient.
fn initial_raa(grad: &[f64], range: &[f64]) -> f64 {
    let n = grad.len().max(1) as f64;
    (0.1 / n
        * grad
            .iter()
            .zip(range)
            .map(|(g, r)| g.abs() * r)
            .sum::<f64>())
    .max(RAA_MIN)
}

/// Raise curvature on every function whose approximation fell below the true value.
#[allow(clippy::too_many_arguments)]
fn raa_update(
    sub: &Subproblem,
    x: &DVector<f64>,
    xnew: &DVector<f64>,
    range: &[f64],
    (f0app, fapp): (f64, &DVector<f64>),
    (f0new, fnew): (f64, &[f64]),
    raa0: &mut f64,
    raa: &mut [f64],
) {
    let mut raacof = 0.0;
    for j in 0..x.len() {
        let dx = xnew[j] - x[j];
        let ul = sub.upp[j] - sub.low[j];
        raacof += dx / (sub.upp[j] - xnew[j]) * dx / (xnew[j] - sub.low[j]) * ul / range[j];
    }
    let raacof = raacof.max(1e-12);
    let grow = |r: f64, app: f64, new: f64| {
        if !new.is_finite() {
            return 10.0 * r;
        }
        (1.1 * (r + (new - app) / raacof)).min(10.0 * r)
    };
    if !(f0new <= f0app + 0.5 * EPSIMIN) {
        *raa0 = grow(*raa0, f0app, f0new);
    }
    for i in 0..raa.len() {
        if !(fnew[i] <= fapp[i] + 0.5 * EPSIMIN) {
            raa[i] = grow(raa[i], fapp[i], fnew[i]);
        }
    }
}

/// Constrained minimization with MMA. Each outer iteration costs one
/// forward analysis plus one reverse pass per output; the conservative
/// variant adds a forward analysis per inner iteration.
pub fn optimize_mma<P: DesignProblem>(
    p: &P,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult> {
    let cfg = &settings.mma;
    let lo = p.lower();
    let hi = p.upper();
    let range = ranges(&lo, &hi);
    let mut x = p.initial();
    super::clamp(&mut x, &lo, &hi);
    let mut rec = Recorder::new(settings);
    let mut state = MmaState::new(&x);

    let (mut eval, mut grads) = p.evaluate_with_gradients(&x)?;
    rec.evaluations += 1;
    rec.record(0, &x, &eval);
    let scale = eval.objective.abs().max(1e-12);
    let m = eval.constraints.len();
    let a = vec![0.0; m];
    let c = vec![cfg.slack_penalty; m];
    let d = vec![1.0; m];

    let mut iteration = 0;
    let termination = 'outer: loop {
        if iteration >= settings.max_iterations {
            break Termination::IterationLimit;
        }
        if rec.out_of_time() {
            break Termination::TimeLimit;
        }
        let f0 = eval.objective / scale;
        let df0: Vec<f64> = grads.objective.iter().map(|g| g / scale).collect();
        update_asymptotes(&mut state, cfg, &x, &lo, &hi);

        let xnew = if cfg.conservative {
            let mut raa0 = initial_raa(&df0, &range);
            let mut raa: Vec<f64> = grads
                .constraints
                .iter()
                .map(|row| initial_raa(row, &range))
                .collect();
            let xv = DVector::from_column_slice(&x);
            let mut inner = 0;
            loop {
                let sub = approximate(
                    &state,
                    cfg.move_limit,
                    &x,
                    &lo,
                    &hi,
                    f0,
                    &df0,
                    &eval.constraints,
                    &grads.constraints,
                    raa0,
                    &raa,
                );
                let mut xn = subsolve(&sub, 1.0, &a, &c, &d);
                super::clamp(&mut xn, &lo, &hi);
                inner += 1;
                if inner >= MAX_INNER {
                    break xn;
                }
                let xnv = DVector::from_column_slice(&xn);
                let (f0app, fapp) = sub.values(&xnv);
                let (f0new, fnew) = match p.evaluate(&xn) {
                    Ok(e) => (e.objective / scale, e.constraints),
                    Err(err) if err.is_singular() => (f64::INFINITY, vec![f64::INFINITY; m]),
                    Err(err) => break 'outer Termination::AnalysisFailure(err.to_string()),
                };
                rec.evaluations += 1;
                let conservative = f0new <= f0app + EPSIMIN
                    && fnew
                        .iter()
                        .zip(fapp.iter())
                        .all(|(f, app)| *f <= app + EPSIMIN);
                if conservative {
                    break xn;
                }
                raa_update(
                    &sub,
                    &xv,
                    &xnv,
                    &range,
                    (f0app, &fapp),
                    (f0new, &fnew),
                    &mut raa0,
                    &mut raa,
                );
            }
        } else {
            let raa = vec![RAA0; m];
            let sub = approximate(
                &state,
                cfg.move_limit,
                &x,
                &lo,
                &hi,
                f0,
                &df0,
                &eval.constraints,
                &grads.constraints,
                RAA0,
                &raa,
            );
            let mut xn = subsolve(&sub, 1.0, &a, &c, &d);
            super::clamp(&mut xn, &lo, &hi);
            xn
        };
        state.advance(&x);
        iteration += 1;
        let prev: Evaluation = eval.clone();
        match p.evaluate_with_gradients(&xnew) {
            Ok((e, g)) => {
                eval = e;
                grads = g;
            }
            Err(err) => break Termination::AnalysisFailure(err.to_string()),
        }
        rec.evaluations += 1;
        x = xnew;
        rec.record(iteration, &x, &eval);
        let change = (eval.objective - prev.objective).abs() / prev.objective.abs().max(1e-12);
        if change <= settings.rel_tolerance && eval.max_violation() <= FEASIBILITY_TOLERANCE {
            break Termination::Converged;
        }
    };
    rec.finish(p, &x, iteration, termination)
}

//! Full-batch Adam and limited-memory BFGS with a strong-Wolfe line search.
//!
//! The L-BFGS driver follows the widely used PyTorch formulation: two-loop
//! recursion with `H0 = s.y / y.y`, a first step of `min(1, 1/|g|_1)`, and a
//! bracketing/zoom line search with safeguarded cubic interpolation.

use crate::error::Result;
use crate::scalar::Scalar;

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn max_abs<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
}

/// Adam with optional global-norm clipping of the gradient.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub clip_norm: Option<T>,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize, lr: T, clip_norm: Option<T>) -> Self {
        Self {
            lr,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            clip_norm,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, x: &mut [T], grad: &[T]) {
        let scale = match self.clip_norm {
            Some(c) => {
                let n = dot(grad, grad).sqrt();
                if n > c {
                    c / n
                } else {
                    T::one()
                }
            }
            None => T::one(),
        };
        self.t += 1;
        let one = T::one();
        let bc1 = one - self.beta1.powi(self.t);
        let bc2 = one - self.beta2.powi(self.t);
        for i in 0..x.len() {
            let g = grad[i] * scale;
            self.m[i] = self.beta1 * self.m[i] + (one - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (one - self.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            x[i] = x[i] - self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsConfig<T> {
    pub history: usize,
    pub c1: T,
    pub c2: T,
    pub max_ls: usize,
    pub tolerance_grad: T,
    pub tolerance_change: T,
}

impl<T: Scalar> Default for LbfgsConfig<T> {
    fn default() -> Self {
        Self {
            history: 20,
            c1: T::lit(1e-4),
            c2: T::lit(0.9),
            max_ls: 25,
            tolerance_grad: T::epsilon() * T::lit(1e3),
            tolerance_change: T::epsilon() * T::lit(1e2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbfgsStop {
    /// Iteration budget used up.
    MaxIter,
    /// Gradient below tolerance.
    Converged,
    /// Step or loss change below tolerance.
    Stalled,
    /// Line search did not produce a decrease.
    LineSearchFailed,
}

/// Safeguarded cubic minimizer through `(x1, f1, g1)` and `(x2, f2, g2)`.
fn cubic_interpolate<T: Scalar>(x1: T, f1: T, g1: T, x2: T, f2: T, g2: T, bounds: Option<(T, T)>) -> T {
    let (lo, hi) = bounds.unwrap_or(if x1 <= x2 { (x1, x2) } else { (x2, x1) });
    let three = T::lit(3.0);
    let d1 = g1 + g2 - three * (f1 - f2) / (x1 - x2);
    let d2sq = d1 * d1 - g1 * g2;
    if d2sq >= T::zero() && d2sq.is_finite() {
        let d2 = d2sq.sqrt();
        let two = T::lit(2.0);
        let pos = if x1 <= x2 {
            x2 - (x2 - x1) * ((g2 + d2 - d1) / (g2 - g1 + two * d2))
        } else {
            x1 - (x1 - x2) * ((g1 + d2 - d1) / (g1 - g2 + two * d2))
        };
        if pos.is_finite() {
            return pos.max(lo).min(hi);
        }
    }
    (lo + hi) / T::lit(2.0)
}

struct Probe<T> {
    f: T,
    g: Vec<T>,
    gtd: T,
}

/// Strong-Wolfe search along `d` from `x`; returns `(f, g, t, evals)`.
#[allow(clippy::too_many_arguments)]
fn strong_wolfe<T: Scalar, F>(
    obj: &mut F,
    x: &[T],
    mut t: T,
    d: &[T],
    f: T,
    g: &[T],
    gtd: T,
    cfg: &LbfgsConfig<T>,
) -> (T, Vec<T>, T, usize)
where
    F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
{
    let d_norm = max_abs(d);
    let mut eval = |t: T| -> Probe<T> {
        let xt: Vec<T> = x.iter().zip(d).map(|(&xi, &di)| xi + t * di).collect();
        match obj(&xt) {
            Ok((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => {
                let gtd = dot(&g, d);
                Probe { f, g, gtd }
            }
            _ => Probe {
                f: T::infinity(),
                g: vec![T::zero(); d.len()],
                gtd: T::infinity(),
            },
        }
    };
    let mut new = eval(t);
    let mut evals = 1;
    let (mut t_prev, mut f_prev, mut g_prev, mut gtd_prev) = (T::zero(), f, g.to_vec(), gtd);
    let mut done = false;
    let mut ls_iter = 0;
    let mut bracket: Vec<T>;
    let mut bf: Vec<T>;
    let mut bg: Vec<Vec<T>>;
    let mut bgtd: Vec<T>;
    loop {
        if ls_iter >= cfg.max_ls {
            bracket = vec![T::zero(), t];
            bf = vec![f, new.f];
            bg = vec![g.to_vec(), new.g.clone()];
            bgtd = vec![gtd, new.gtd];
            break;
        }
        if new.f > f + cfg.c1 * t * gtd || (ls_iter > 1 && new.f >= f_prev) {
            bracket = vec![t_prev, t];
            bf = vec![f_prev, new.f];
            bg = vec![g_prev, new.g.clone()];
            bgtd = vec![gtd_prev, new.gtd];
            break;
        }
        if new.gtd.abs() <= -cfg.c2 * gtd {
            bracket = vec![t];
            bf = vec![new.f];
            bg = vec![new.g.clone()];
            bgtd = vec![new.gtd];
            done = true;
            break;
        }
        if new.gtd >= T::zero() {
            bracket = vec![t_prev, t];
            bf = vec![f_prev, new.f];
            bg = vec![g_prev, new.g.clone()];
            bgtd = vec![gtd_prev, new.gtd];
            break;
        }
        let min_step = t + T::lit(0.01) * (t - t_prev);
        let max_step = t * T::lit(10.0);
        let tmp = t;
        t = cubic_interpolate(t_prev, f_prev, gtd_prev, t, new.f, new.gtd, Some((min_step, max_step)));
        t_prev = tmp;
        f_prev = new.f;
        g_prev = new.g.clone();
        gtd_prev = new.gtd;
        new = eval(t);
        evals += 1;
        ls_iter += 1;
    }

    if bracket.len() == 1 {
        return (bf[0], bg.swap_remove(0), bracket[0], evals);
    }
    let mut insuf = false;
    let (mut lo, mut hi) = if bf[0] <= bf[1] { (0, 1) } else { (1, 0) };
    while !done && ls_iter < cfg.max_ls {
        if (bracket[1] - bracket[0]).abs() * d_norm < cfg.tolerance_change {
            break;
        }
        t = cubic_interpolate(bracket[0], bf[0], bgtd[0], bracket[1], bf[1], bgtd[1], None);
        let bmax = bracket[0].max(bracket[1]);
        let bmin = bracket[0].min(bracket[1]);
        let eps = T::lit(0.1) * (bmax - bmin);
        if (bmax - t).min(t - bmin) < eps {
            if insuf || t >= bmax || t <= bmin {
                t = if (t - bmax).abs() < (t - bmin).abs() { bmax - eps } else { bmin + eps };
                insuf = false;
            } else {
                insuf = true;
            }
        } else {
            insuf = false;
        }
        new = eval(t);
        evals += 1;
        ls_iter += 1;
        if new.f > f + cfg.c1 * t * gtd || new.f >= bf[lo] {
            bracket[hi] = t;
            bf[hi] = new.f;
            bg[hi] = new.g.clone();
            bgtd[hi] = new.gtd;
            (lo, hi) = if bf[0] <= bf[1] { (0, 1) } else { (1, 0) };
        } else {
            if new.gtd.abs() <= -cfg.c2 * gtd {
                done = true;
            } else if new.gtd * (bracket[hi] - bracket[lo]) >= T::zero() {
                bracket[hi] = bracket[lo];
                bf[hi] = bf[lo];
                bg[hi] = bg[lo].clone();
                bgtd[hi] = bgtd[lo];
            }
            bracket[lo] = t;
            bf[lo] = new.f;
            bg[lo] = new.g.clone();
            bgtd[lo] = new.gtd;
        }
    }
    (bf[lo], bg.swap_remove(lo), bracket[lo], evals)
}

/// L-BFGS state carried across outer iterations.
pub struct Lbfgs<T> {
    pub cfg: LbfgsConfig<T>,
    dirs: Vec<Vec<T>>,
    steps: Vec<Vec<T>>,
    ro: Vec<T>,
    h_diag: T,
    d: Vec<T>,
    t: T,
    prev_g: Vec<T>,
    iter: usize,
    pub evals: usize,
}

impl<T: Scalar> Lbfgs<T> {
    pub fn new(cfg: LbfgsConfig<T>) -> Self {
        Self {
            cfg,
            dirs: Vec::new(),
            steps: Vec::new(),
            ro: Vec::new(),
            h_diag: T::one(),
            d: Vec::new(),
            t: T::zero(),
            prev_g: Vec::new(),
            iter: 0,
            evals: 0,
        }
    }

    /// One outer iteration from `(x, f, g)`. On success `x`, `f` and `g` are
    /// replaced by the accepted point; on a stop the inputs are untouched.
    pub fn step<F>(&mut self, obj: &mut F, x: &mut [T], f: &mut T, g: &mut Vec<T>) -> Option<LbfgsStop>
    where
        F: FnMut(&[T]) -> Result<(T, Vec<T>)>,
    {
        if max_abs(g) <= self.cfg.tolerance_grad {
            return Some(LbfgsStop::Converged);
        }
        self.iter += 1;
        if self.iter == 1 {
            self.d = g.iter().map(|&v| -v).collect();
            self.h_diag = T::one();
        } else {
            let y: Vec<T> = g.iter().zip(&self.prev_g).map(|(&a, &b)| a - b).collect();
            let s: Vec<T> = self.d.iter().map(|&v| v * self.t).collect();
            let ys = dot(&y, &s);
            if ys > T::lit(1e-10) {
                if self.dirs.len() == self.cfg.history {
                    self.dirs.remove(0);
                    self.steps.remove(0);
                    self.ro.remove(0);
                }
                self.h_diag = ys / dot(&y, &y);
                self.dirs.push(y);
                self.steps.push(s);
                self.ro.push(T::one() / ys);
            }
            let k = self.dirs.len();
            let mut al = vec![T::zero(); k];
            let mut q: Vec<T> = g.iter().map(|&v| -v).collect();
            for i in (0..k).rev() {
                al[i] = dot(&self.steps[i], &q) * self.ro[i];
                for (qj, &yj) in q.iter_mut().zip(&self.dirs[i]) {
                    *qj = *qj - al[i] * yj;
                }
            }
            let mut r: Vec<T> = q.iter().map(|&v| v * self.h_diag).collect();
            for i in 0..k {
                let be = dot(&self.dirs[i], &r) * self.ro[i];
                for (rj, &sj) in r.iter_mut().zip(&self.steps[i]) {
                    *rj = *rj + sj * (al[i] - be);
                }
            }
            self.d = r;
        }
        self.prev_g = g.clone();
        let t0 = if self.iter == 1 {
            let l1: T = g.iter().map(|v| v.abs()).sum();
            T::one().min(T::one() / l1)
        } else {
            T::one()
        };
        let gtd = dot(g, &self.d);
        if gtd > -self.cfg.tolerance_change {
            return Some(LbfgsStop::Stalled);
        }
        let (f_new, g_new, t, evals) = strong_wolfe(obj, x, t0, &self.d, *f, g, gtd, &self.cfg);
        self.evals += evals;
        if !(f_new < *f) || !f_new.is_finite() {
            return Some(LbfgsStop::LineSearchFailed);
        }
        self.t = t;
        for (xi, &di) in x.iter_mut().zip(&self.d) {
            *xi = *xi + t * di;
        }
        let f_old = *f;
        *f = f_new;
        *g = g_new;
        if max_abs(&self.d) * t.abs() <= self.cfg.tolerance_change
            || (f_new - f_old).abs() < self.cfg.tolerance_change * f_old.abs().max(T::min_positive_value())
        {
            return Some(LbfgsStop::Stalled);
        }
        None
    }
}
